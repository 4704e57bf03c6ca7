//! Integer step functions on the punctured circle, spectra of unitary
//! matrices as points of the quotient space, and the spectral flow of a
//! sampled path of unitaries.
//!
//! Phases are parametrized by `θ ∈ (0, 2π)`; the point `1 = e^{i0}` is
//! excluded throughout.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Norm, UnitaryMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub theta: f64,
    pub m: i64,
}

/// Left-continuous integer step function on `(0, 2π)`:
/// `value(θ) = tail + Σ_{θ_j ≥ θ} m_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleStepFunction {
    pub tail: i64,
    pub jumps: Vec<Jump>,
}

impl CircleStepFunction {
    pub fn zero() -> Self {
        Self::constant(0)
    }

    pub fn constant(tail: i64) -> Self {
        Self {
            tail,
            jumps: Vec::new(),
        }
    }

    /// Sorts the jumps, merges jumps at identical phases and drops zero heights.
    pub fn new(tail: i64, jumps: impl IntoIterator<Item = Jump>) -> Self {
        let mut jumps: Vec<Jump> = jumps.into_iter().collect();
        jumps.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        let mut merged: Vec<Jump> = Vec::with_capacity(jumps.len());
        for jump in jumps {
            match merged.last_mut() {
                Some(last) if last.theta == jump.theta => last.m += jump.m,
                _ => merged.push(jump),
            }
        }
        merged.retain(|j| j.m != 0);
        Self {
            tail,
            jumps: merged,
        }
    }

    /// `N(·, z0; spec)` as a function of its first argument.
    pub fn counting(spec: &SpectrumClass, z0: f64) -> Self {
        Self::new(
            -(spec.count_at_or_above(z0) as i64),
            spec.phases.iter().map(|&theta| Jump { theta, m: 1 }),
        )
    }

    pub fn value_at(&self, theta: f64) -> i64 {
        self.tail
            + self
                .jumps
                .iter()
                .filter(|j| j.theta >= theta)
                .map(|j| j.m)
                .sum::<i64>()
    }

    /// Value on `(0, θ_1]`, i.e. the limit at `θ → 0+`.
    pub fn head(&self) -> i64 {
        self.tail + self.jumps.iter().map(|j| j.m).sum::<i64>()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(
            self.tail + other.tail,
            self.jumps.iter().chain(other.jumps.iter()).copied(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.negate())
    }

    pub fn negate(&self) -> Self {
        Self {
            tail: -self.tail,
            jumps: self
                .jumps
                .iter()
                .map(|j| Jump {
                    theta: j.theta,
                    m: -j.m,
                })
                .collect(),
        }
    }

    pub fn add_constant(&self, n: i64) -> Self {
        Self {
            tail: self.tail + n,
            jumps: self.jumps.clone(),
        }
    }

    /// Merges runs of jumps whose consecutive phases differ by at most `tol`;
    /// the merged phase is the height-weighted mean (plain mean if heights cancel).
    pub fn merged_within(&self, tol: f64) -> Self {
        let mut out: Vec<Jump> = Vec::new();
        let mut cluster: Vec<Jump> = Vec::new();
        let flush = |cluster: &mut Vec<Jump>, out: &mut Vec<Jump>| {
            if cluster.is_empty() {
                return;
            }
            let m: i64 = cluster.iter().map(|j| j.m).sum();
            if m != 0 {
                let weight: f64 = cluster.iter().map(|j| j.m.abs() as f64).sum();
                let theta = cluster
                    .iter()
                    .map(|j| j.theta * j.m.abs() as f64)
                    .sum::<f64>()
                    / weight;
                out.push(Jump { theta, m });
            }
            cluster.clear();
        };
        for &jump in &self.jumps {
            if let Some(last) = cluster.last() {
                if jump.theta - last.theta > tol {
                    flush(&mut cluster, &mut out);
                }
            }
            cluster.push(jump);
        }
        flush(&mut cluster, &mut out);
        Self {
            tail: self.tail,
            jumps: out,
        }
    }

    pub fn is_non_increasing(&self) -> bool {
        self.jumps.iter().all(|j| j.m > 0)
    }

    /// `∫_0^{2π} f(θ) dθ`, exact for the step representation.
    pub fn integral(&self) -> f64 {
        self.tail as f64 * TAU + self.jumps.iter().map(|j| j.m as f64 * j.theta).sum::<f64>()
    }

    pub fn min_value(&self) -> i64 {
        self.interval_values()
            .into_iter()
            .min()
            .unwrap_or(self.tail)
    }

    pub fn max_value(&self) -> i64 {
        self.interval_values()
            .into_iter()
            .max()
            .unwrap_or(self.tail)
    }

    /// Values on the open intervals between consecutive jumps, left to right.
    pub fn interval_values(&self) -> Vec<i64> {
        let mut values = Vec::with_capacity(self.jumps.len() + 1);
        let mut v = self.head();
        values.push(v);
        for j in &self.jumps {
            v -= j.m;
            values.push(v);
        }
        values
    }

    /// Phases where the jump sets of the two functions agree within `tol` and
    /// all interval values coincide.
    pub fn equals_within(&self, other: &Self, tol: f64) -> bool {
        self.tail == other.tail
            && self.jumps.len() == other.jumps.len()
            && self
                .jumps
                .iter()
                .zip(&other.jumps)
                .all(|(a, b)| a.m == b.m && (a.theta - b.theta).abs() <= tol)
    }

    /// Projection to the quotient by constants: jump phases with multiplicity.
    /// Only meaningful when all heights are positive.
    pub fn spectrum_class(&self) -> SpectrumClass {
        SpectrumClass::new(
            self.jumps
                .iter()
                .flat_map(|j| std::iter::repeat_n(j.theta, j.m.max(0) as usize)),
        )
    }
}

/// `ν(n) = sup({0} ∪ {θ : f(θ) > n})`, stored as `ν(n) = 2π` for `n < start`,
/// `values[n − start]` on the stored range and `0` beyond it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuSequence {
    pub start: i64,
    pub values: Vec<f64>,
}

impl NuSequence {
    pub fn at(&self, n: i64) -> f64 {
        if n < self.start {
            return TAU;
        }
        self.values
            .get((n - self.start) as usize)
            .copied()
            .unwrap_or(0.0)
    }

    fn end(&self) -> i64 {
        self.start + self.values.len() as i64
    }

    /// `f(θ) = inf{n : ν(n) < θ}`.
    pub fn reconstruct(&self) -> CircleStepFunction {
        let mut jumps: Vec<Jump> = Vec::new();
        for &v in &self.values {
            if v > 0.0 && v < TAU {
                jumps.push(Jump { theta: v, m: 1 });
            }
        }
        // values equal to 2π raise the whole function; zeros contribute nothing
        let full = self.values.iter().filter(|&&v| v >= TAU).count() as i64;
        CircleStepFunction::new(self.start + full, jumps)
    }
}

pub fn nu_of(f: &CircleStepFunction) -> NuSequence {
    // (left, right, value) for each subinterval of (0, 2π)
    let mut pieces: Vec<(f64, f64, i64)> = Vec::with_capacity(f.jumps.len() + 1);
    let values = f.interval_values();
    let mut left = 0.0;
    for (k, j) in f.jumps.iter().enumerate() {
        pieces.push((left, j.theta, values[k]));
        left = j.theta;
    }
    pieces.push((left, TAU, f.tail));
    let lo = values.iter().copied().min().unwrap_or(f.tail);
    let hi = values.iter().copied().max().unwrap_or(f.tail);
    let values = (lo..hi)
        .map(|n| {
            pieces
                .iter()
                .filter(|p| p.2 > n)
                .map(|p| p.1)
                .fold(0.0, f64::max)
        })
        .collect();
    NuSequence { start: lo, values }
}

/// `ρ̃_p(f, g) = ‖ν(·; f) − ν(·; g)‖_{l_p(ℤ)}`.
pub fn rho_distance(f: &CircleStepFunction, g: &CircleStepFunction, p: Norm) -> f64 {
    let nf = nu_of(f);
    let ng = nu_of(g);
    let lo = nf.start.min(ng.start);
    let hi = nf.end().max(ng.end());
    p.of((lo..hi).map(|n| nf.at(n) - ng.at(n)))
}

/// Distance of a phase to the excluded point `1`.
fn distance_to_one(theta: f64) -> f64 {
    theta.min(TAU - theta)
}

/// Finite multiset of phases in `(0, 2π)`, sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumClass {
    pub phases: Vec<f64>,
}

impl SpectrumClass {
    pub fn new(phases: impl IntoIterator<Item = f64>) -> Self {
        let mut phases: Vec<f64> = phases.into_iter().collect();
        phases.sort_by(f64::total_cmp);
        Self { phases }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn count_at_or_above(&self, theta: f64) -> usize {
        self.phases.len() - self.phases.partition_point(|&p| p < theta)
    }

    /// Signed count `N(e^{iθ1}, e^{iθ2})` over the half-open arc.
    pub fn counting_n(&self, theta1: f64, theta2: f64) -> i64 {
        self.count_at_or_above(theta1) as i64 - self.count_at_or_above(theta2) as i64
    }

    /// Smallest distance from `theta` to a phase of the class.
    pub fn distance_to(&self, theta: f64) -> f64 {
        self.phases
            .iter()
            .map(|&p| (p - theta).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Greedy nearest-phase pairing. Phases are paired when they are closer to
    /// each other than both are to `1`; unpaired phases are matched to `1`.
    pub fn matching(&self, other: &Self) -> Matching {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (i, &a) in self.phases.iter().enumerate() {
            for (j, &b) in other.phases.iter().enumerate() {
                let d = (a - b).abs();
                if d < distance_to_one(a) + distance_to_one(b) {
                    candidates.push((d, i, j));
                }
            }
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut used_a = vec![false; self.phases.len()];
        let mut used_b = vec![false; other.phases.len()];
        let mut pairs = Vec::new();
        for (_, i, j) in candidates {
            if !used_a[i] && !used_b[j] {
                used_a[i] = true;
                used_b[j] = true;
                pairs.push((self.phases[i], other.phases[j]));
            }
        }
        let unmatched = self
            .phases
            .iter()
            .zip(&used_a)
            .chain(other.phases.iter().zip(&used_b))
            .filter(|(_, &used)| !used)
            .map(|(&p, _)| p)
            .collect();
        Matching { pairs, unmatched }
    }

    /// Sup-type distance induced by [`SpectrumClass::matching`].
    pub fn distance(&self, other: &Self) -> f64 {
        self.matching(other).cost()
    }
}

#[derive(Clone, Debug)]
pub struct Matching {
    pub pairs: Vec<(f64, f64)>,
    pub unmatched: Vec<f64>,
}

impl Matching {
    pub fn cost(&self) -> f64 {
        self.pairs
            .iter()
            .map(|(a, b)| (a - b).abs())
            .chain(self.unmatched.iter().map(|&p| distance_to_one(p)))
            .fold(0.0, f64::max)
    }

    /// Whether the gap `z` is crossed by any trajectory implied by the matching:
    /// paired phases move along the arc between them, unpaired ones through `1`.
    pub fn crosses(&self, z: f64) -> bool {
        let paired = self
            .pairs
            .iter()
            .any(|&(a, b)| a.min(b) <= z && z <= a.max(b));
        let through_one = self.unmatched.iter().any(|&p| {
            if p < std::f64::consts::PI {
                z <= p
            } else {
                z >= p
            }
        });
        paired || through_one
    }
}

pub fn counting_n(theta1: f64, theta2: f64, spec: &SpectrumClass) -> i64 {
    spec.counting_n(theta1, theta2)
}

pub fn eta(w: &UnitaryMatrix, id_tol: f64) -> SpectrumClass {
    SpectrumClass::new(w.eigenphases(id_tol))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("no common spectral gap on [{t_lo}, {t_hi}] at maximal refinement depth")]
    RefinementLimitExceeded { t_lo: f64, t_hi: f64 },
    #[error("path spectrum does not converge at the {end} endpoint")]
    EndpointDivergence { end: &'static str },
    #[error("path sample at t = {t}: {source}")]
    Sample { t: f64, source: LinalgError },
    #[error("path sample at t = {t}: {message}")]
    Evaluation { t: f64, message: String },
}

/// A continuous family of unitary matrices on the open interval `(0, 1)`.
pub trait UnitaryPath: Sync {
    fn eval(&self, t: f64) -> Result<UnitaryMatrix, FlowError>;

    /// Spectrum class of the limit at `t → 0+`, if known in closed form.
    fn start_limit(&self) -> Option<SpectrumClass> {
        None
    }

    /// Spectrum class of the limit at `t → 1−`, if known in closed form.
    fn end_limit(&self) -> Option<SpectrumClass> {
        None
    }
}

/// Path given by a closure, with optional closed-form endpoint classes.
pub struct PathSampler<F> {
    eval: F,
    start: Option<SpectrumClass>,
    end: Option<SpectrumClass>,
}

impl<F> PathSampler<F>
where
    F: Fn(f64) -> Result<UnitaryMatrix, FlowError> + Sync,
{
    pub fn new(eval: F) -> Self {
        Self {
            eval,
            start: None,
            end: None,
        }
    }

    pub fn with_limits(mut self, start: Option<SpectrumClass>, end: Option<SpectrumClass>) -> Self {
        self.start = start;
        self.end = end;
        self
    }
}

impl<F> UnitaryPath for PathSampler<F>
where
    F: Fn(f64) -> Result<UnitaryMatrix, FlowError> + Sync,
{
    fn eval(&self, t: f64) -> Result<UnitaryMatrix, FlowError> {
        (self.eval)(t)
    }

    fn start_limit(&self) -> Option<SpectrumClass> {
        self.start.clone()
    }

    fn end_limit(&self) -> Option<SpectrumClass> {
        self.end.clone()
    }
}

/// `t ↦ path(1 − t)`.
pub struct Reversed<'a, P: ?Sized>(pub &'a P);

impl<P: UnitaryPath + ?Sized> UnitaryPath for Reversed<'_, P> {
    fn eval(&self, t: f64) -> Result<UnitaryMatrix, FlowError> {
        self.0.eval(1.0 - t)
    }

    fn start_limit(&self) -> Option<SpectrumClass> {
        self.0.end_limit()
    }

    fn end_limit(&self) -> Option<SpectrumClass> {
        self.0.start_limit()
    }
}

/// First path on `(0, 1/2]`, second on `(1/2, 1)`, each reparametrized linearly.
/// The junction is evaluated as the closed-end sample of the first path.
pub struct Concatenated<'a, P: ?Sized, Q: ?Sized>(pub &'a P, pub &'a Q);

impl<P: UnitaryPath + ?Sized, Q: UnitaryPath + ?Sized> UnitaryPath for Concatenated<'_, P, Q> {
    fn eval(&self, t: f64) -> Result<UnitaryMatrix, FlowError> {
        if t <= 0.5 {
            self.0.eval(2.0 * t)
        } else {
            self.1.eval(2.0 * t - 1.0)
        }
    }

    fn start_limit(&self) -> Option<SpectrumClass> {
        self.0.start_limit()
    }

    fn end_limit(&self) -> Option<SpectrumClass> {
        self.1.end_limit()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Number of equal subintervals of the initial partition.
    pub initial_grid: usize,
    pub max_depth: u32,
    /// Minimal distance of an accepted gap phase from all sampled eigenphases.
    pub eps_gap: f64,
    /// Largest admissible eigenphase displacement between neighbouring samples.
    pub max_step: f64,
    /// Eigenvalues within this distance of `1` are treated as `1`.
    pub id_tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            initial_grid: 16,
            max_depth: 40,
            eps_gap: 1e-3,
            max_step: 0.25,
            id_tol: 1e-9,
        }
    }
}

struct FlowState<'a, P: ?Sized> {
    path: &'a P,
    cfg: &'a FlowConfig,
    tail: i64,
    /// Parameters at which the path supplied its limit class instead of a sample.
    exact_start: Option<f64>,
    exact_end: Option<f64>,
}

impl<P: UnitaryPath + ?Sized> FlowState<'_, P> {
    fn spectrum(&self, t: f64) -> Result<SpectrumClass, FlowError> {
        Ok(eta(&self.path.eval(t)?, self.cfg.id_tol))
    }

    fn gap_candidates(&self, a: &SpectrumClass, b: &SpectrumClass) -> Vec<f64> {
        let mut points: Vec<f64> = Vec::with_capacity(a.len() + b.len() + 2);
        points.push(0.0);
        points.extend_from_slice(&a.phases);
        points.extend_from_slice(&b.phases);
        points.push(TAU);
        points.sort_by(f64::total_cmp);
        let mut arcs: Vec<(f64, f64)> = points
            .windows(2)
            .map(|w| (w[1] - w[0], 0.5 * (w[0] + w[1])))
            .filter(|(len, _)| *len > 0.0)
            .collect();
        arcs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)));
        arcs.into_iter().take(4).map(|(_, mid)| mid).collect()
    }

    fn admissible(&self, z: f64, samples: &[&SpectrumClass]) -> bool {
        let eps = self.cfg.eps_gap;
        if distance_to_one(z) < eps || samples.iter().any(|s| s.distance_to(z) < eps) {
            return false;
        }
        samples.windows(2).all(|w| {
            let m = w[0].matching(w[1]);
            m.cost() <= self.cfg.max_step && !m.crosses(z)
        })
    }

    /// Accumulates the flow of `[ta, tb]` into the tail: on a certified gap `z`
    /// the contribution `N(·, z; S_b) − N(·, z; S_a)` has jumps that telescope
    /// to those of the endpoint spectra, so only its integer part is kept.
    fn segment(
        &mut self,
        ta: f64,
        tb: f64,
        sa: &SpectrumClass,
        sb: &SpectrumClass,
        depth: u32,
    ) -> Result<(), FlowError> {
        let tm = 0.5 * (ta + tb);
        let sm = self.spectrum(tm)?;
        // next to a supplied limit the sample must already have settled on it,
        // otherwise motion between the sample and the limit goes unseen
        let settled = (self.exact_start != Some(ta) || sa.distance(&sm) <= self.cfg.eps_gap)
            && (self.exact_end != Some(tb) || sm.distance(sb) <= self.cfg.eps_gap);
        let candidates = if settled {
            self.gap_candidates(sa, sb)
        } else {
            Vec::new()
        };
        for z in candidates {
            if self.admissible(z, &[sa, &sm, sb]) {
                self.tail += sa.count_at_or_above(z) as i64 - sb.count_at_or_above(z) as i64;
                return Ok(());
            }
        }
        if depth >= self.cfg.max_depth {
            return Err(FlowError::RefinementLimitExceeded { t_lo: ta, t_hi: tb });
        }
        self.segment(ta, tm, sa, &sm, depth + 1)?;
        self.segment(tm, tb, &sm, sb, depth + 1)
    }
}

const ENDPOINT_TOL: f64 = 1e-6;

/// Samples `t = 2^{-k}` (or `1 − 2^{-k}`) until consecutive spectrum classes
/// agree within `1e-6`; returns the parameter and class of the last sample.
fn extrapolate_endpoint<P: UnitaryPath + ?Sized>(
    path: &P,
    cfg: &FlowConfig,
    at_start: bool,
) -> Result<(f64, SpectrumClass), FlowError> {
    let param = |k: i32| {
        let h = 2f64.powi(-k);
        if at_start {
            h
        } else {
            1.0 - h
        }
    };
    let mut prev = eta(&path.eval(param(4))?, cfg.id_tol);
    for k in 5..=52 {
        let t = param(k);
        let current = eta(&path.eval(t)?, cfg.id_tol);
        if prev.distance(&current) < ENDPOINT_TOL {
            // phases this close to 1 belong to the point 1 in the limit
            let limit = SpectrumClass {
                phases: current
                    .phases
                    .into_iter()
                    .filter(|&p| distance_to_one(p) >= ENDPOINT_TOL)
                    .collect(),
            };
            return Ok((t, limit));
        }
        prev = current;
    }
    Err(FlowError::EndpointDivergence {
        end: if at_start { "start" } else { "end" },
    })
}

/// Spectral flow of a path of unitaries: the step function
/// `Σ_n [N(·, z_n; U(t_n)) − N(·, z_n; U(t_{n−1}))]` over a partition on which
/// each `z_n` is a certified spectral gap.
pub fn spectral_flow<P: UnitaryPath + ?Sized>(
    path: &P,
    cfg: &FlowConfig,
) -> Result<CircleStepFunction, FlowError> {
    let start_limit = path.start_limit();
    let end_limit = path.end_limit();
    let (exact_start, exact_end) = (start_limit.is_some(), end_limit.is_some());
    let (t_lo, s_lo) = match start_limit {
        Some(s) => (0.0, s),
        None => extrapolate_endpoint(path, cfg, true)?,
    };
    let (t_hi, s_hi) = match end_limit {
        Some(s) => (1.0, s),
        None => extrapolate_endpoint(path, cfg, false)?,
    };
    let grid = cfg.initial_grid.max(1);
    let knots: Vec<f64> = (0..=grid)
        .map(|k| t_lo + (t_hi - t_lo) * k as f64 / grid as f64)
        .collect();
    let mut spectra = Vec::with_capacity(knots.len());
    spectra.push(s_lo.clone());
    for &t in &knots[1..grid] {
        spectra.push(eta(&path.eval(t)?, cfg.id_tol));
    }
    spectra.push(s_hi.clone());

    let mut state = FlowState {
        path,
        cfg,
        tail: 0,
        exact_start: exact_start.then_some(t_lo),
        exact_end: exact_end.then_some(t_hi),
    };
    for k in 0..grid {
        state.segment(knots[k], knots[k + 1], &spectra[k], &spectra[k + 1], 0)?;
    }
    let jumps = s_hi
        .phases
        .iter()
        .map(|&theta| Jump { theta, m: 1 })
        .chain(s_lo.phases.iter().map(|&theta| Jump { theta, m: -1 }));
    Ok(CircleStepFunction::new(state.tail, jumps))
}
