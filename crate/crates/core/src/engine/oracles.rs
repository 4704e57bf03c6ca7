use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::mu::{mu_via_flow, mu_via_index, FlowRoute, MuFunction, MuMethod};
use super::{EngineError, Result};
use crate::circle_flow::{FlowConfig, FlowError};
use crate::linalg::HermitianMatrix;
use crate::models::{pushforward, DenseModel, Model, MoebiusMap, ResolventModel};

/// Distance below which `λ` counts as an eigenvalue, relative to the scale.
const EIGENVALUE_TOL: f64 = 1e-9;

fn count_below(values: &[f64], lambda: f64) -> i64 {
    values.iter().filter(|&&x| x < lambda).count() as i64
}

fn check_resolvent_point(model: &DenseModel, lambda: f64) -> Result<()> {
    let tol = EIGENVALUE_TOL * model.scale();
    let hit = model
        .h0_eigenvalues()
        .iter()
        .chain(model.h_eigenvalues())
        .any(|&x| (x - lambda).abs() <= tol);
    if hit {
        return Err(EngineError::EigenvalueAtLambda { lambda });
    }
    Ok(())
}

/// `rank E_{H0}((−∞, λ)) − rank E_H((−∞, λ))`, the exact SSF of a matrix pair.
pub fn counting_ssf_oracle(model: &DenseModel, lambda: f64) -> Result<i64> {
    check_resolvent_point(model, lambda)?;
    Ok(count_below(model.h0_eigenvalues(), lambda) - count_below(model.h_eigenvalues(), lambda))
}

/// `μ(θ; λ)` by the requested method.
pub(crate) fn mu_by<M: ResolventModel + ?Sized>(
    model: &M,
    lambda: f64,
    method: MuMethod,
    flow: &FlowConfig,
) -> Result<MuFunction> {
    match method {
        MuMethod::Index => mu_via_index(model, lambda),
        MuMethod::Flow => mu_via_flow(model, lambda, flow, FlowRoute::Scattering),
    }
}

/// Smooth function with its derivative, for the trace formula.
pub struct TestFunction {
    phi: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    dphi: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Interval outside which `φ` is constant (or on which it is checked).
    pub support: (f64, f64),
    pub name: String,
}

impl TestFunction {
    /// Checks `φ′` against central differences at 201 points of the support.
    pub fn new(
        name: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dphi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = support;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(EngineError::InvalidTestFunction(format!(
                "bad support [{lo}, {hi}]"
            )));
        }
        let h = 1e-5 * (hi - lo).max(1.0);
        for k in 0..=200 {
            let x = lo + (hi - lo) * k as f64 / 200.0;
            let fd = (phi(x + h) - phi(x - h)) / (2.0 * h);
            let d = dphi(x);
            if (fd - d).abs() > 1e-6 * d.abs().max(1.0) {
                return Err(EngineError::InvalidTestFunction(format!(
                    "φ′({x}) = {d} but finite difference gives {fd}"
                )));
            }
        }
        Ok(Self {
            phi: Box::new(phi),
            dphi: Box::new(dphi),
            support,
            name: name.into(),
        })
    }

    /// `Σ c_k x^k`, checked on `support`.
    pub fn polynomial(coeffs: &[f64], support: (f64, f64)) -> Result<Self> {
        let c = coeffs.to_vec();
        let dc: Vec<f64> = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &a)| k as f64 * a)
            .collect();
        let horner = |c: &[f64], x: f64| c.iter().rev().fold(0.0, |acc, &a| acc * x + a);
        Self::new(
            format!("poly{coeffs:?}"),
            move |x| horner(&c, x),
            move |x| horner(&dc, x),
            support,
        )
    }

    /// `exp(−1/(1 − u²))` with `u = (x − center)/radius`, zero outside.
    pub fn bump(center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(EngineError::InvalidTestFunction(
                "radius must be positive".into(),
            ));
        }
        let phi = move |x: f64| {
            let u = (x - center) / radius;
            if u.abs() >= 1.0 {
                0.0
            } else {
                (-1.0 / (1.0 - u * u)).exp()
            }
        };
        let dphi = move |x: f64| {
            let u = (x - center) / radius;
            if u.abs() >= 1.0 {
                0.0
            } else {
                let w = 1.0 - u * u;
                (-1.0 / w).exp() * (-2.0 * u / (w * w)) / radius
            }
        };
        Self::new(
            format!("bump({center}, {radius})"),
            phi,
            dphi,
            (center - radius, center + radius),
        )
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.phi)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.dphi)(x)
    }
}

/// `|Tr(φ(H) − φ(H0)) − ∫ φ′ ξ dλ|` with `ξ` the counting step function; the
/// integral is exact since `ξ` is constant between consecutive eigenvalues.
pub fn trace_formula_defect(model: &DenseModel, phi: &TestFunction) -> Result<f64> {
    let lhs: f64 = model
        .h_eigenvalues()
        .iter()
        .map(|&x| phi.value(x))
        .sum::<f64>()
        - model
            .h0_eigenvalues()
            .iter()
            .map(|&x| phi.value(x))
            .sum::<f64>();
    let mut points: Vec<f64> = model
        .h0_eigenvalues()
        .iter()
        .chain(model.h_eigenvalues())
        .copied()
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut rhs = 0.0;
    for w in points.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let xi = count_below(model.h0_eigenvalues(), mid) - count_below(model.h_eigenvalues(), mid);
        if xi != 0 {
            rhs += xi as f64 * (phi.value(w[1]) - phi.value(w[0]));
        }
    }
    Ok((lhs - rhs).abs())
}

/// `max_θ |[μ(θ; λ2) − μ(θ; λ1)] − [N(λ1, λ2; H) − N(λ1, λ2; H0)]|` for gap points.
pub fn gap_mu_relation_defect(
    model: &DenseModel,
    lambda1: f64,
    lambda2: f64,
    thetas: &[f64],
    method: MuMethod,
    flow: &FlowConfig,
) -> Result<i64> {
    check_resolvent_point(model, lambda1)?;
    check_resolvent_point(model, lambda2)?;
    let mu1 = mu_by(model, lambda1, method, flow)?;
    let mu2 = mu_by(model, lambda2, method, flow)?;
    let window = |values: &[f64]| count_below(values, lambda2) - count_below(values, lambda1);
    let counted = window(model.h_eigenvalues()) - window(model.h0_eigenvalues());
    Ok(thetas
        .iter()
        .map(|&theta| (mu2.value_at(theta) - mu1.value_at(theta) - counted).abs())
        .max()
        .unwrap_or(0))
}

/// 64 equispaced, midpoint-shifted phases plus the midpoints between
/// consecutive jumps of every given function.
pub fn invariance_theta_samples(functions: &[&MuFunction]) -> Vec<f64> {
    let mut thetas: Vec<f64> = (0..64).map(|k| (k as f64 + 0.5) * TAU / 64.0).collect();
    let mut phases: Vec<f64> = functions
        .iter()
        .flat_map(|f| f.step.jumps.iter().map(|j| j.theta))
        .collect();
    phases.push(0.0);
    phases.push(TAU);
    phases.sort_by(f64::total_cmp);
    // the same jump seen by two computations differs by rounding only
    phases.dedup_by(|b, a| *b - *a <= 1e-8);
    thetas.extend(
        phases
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| 0.5 * (w[0] + w[1])),
    );
    thetas.sort_by(f64::total_cmp);
    thetas
}

/// `max_θ |μ(θ; λ, H, H0) − μ(θ; f(λ), f(H), f(H0))|`, the second from the
/// pushed-forward factored pair.
pub fn invariance_defect(
    model: &Model,
    map: MoebiusMap,
    lambda: f64,
    method: MuMethod,
    flow: &FlowConfig,
) -> Result<i64> {
    let pushed = pushforward(model, map)?;
    let original = mu_by(model, lambda, method, flow)?;
    let image = mu_by(&pushed, map.apply(lambda), method, flow)?;
    Ok(invariance_theta_samples(&[&original, &image])
        .into_iter()
        .map(|theta| (original.value_at(theta) - image.value_at(theta)).abs())
        .max()
        .unwrap_or(0))
}

/// Integer-valued step function of a real variable, left-continuous:
/// `value(x) = base + Σ_{x_k < x} m_k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealStepFunction {
    pub base: i64,
    pub jumps: Vec<(OrderedJump, i64)>,
}

/// Jump location; kept as raw bits so the function is `Eq`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedJump(u64);

impl OrderedJump {
    pub fn new(x: f64) -> Self {
        Self(x.to_bits())
    }

    pub fn get(self) -> f64 {
        f64::from_bits(self.0)
    }
}

impl RealStepFunction {
    fn from_parts(base: i64, mut raw: Vec<(f64, i64)>) -> Self {
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut jumps: Vec<(f64, i64)> = Vec::new();
        for (x, m) in raw {
            match jumps.last_mut() {
                Some((y, n)) if *y == x => *n += m,
                _ => jumps.push((x, m)),
            }
        }
        Self {
            base,
            jumps: jumps
                .into_iter()
                .filter(|&(_, m)| m != 0)
                .map(|(x, m)| (OrderedJump::new(x), m))
                .collect(),
        }
    }

    pub fn value_at(&self, x: f64) -> i64 {
        self.base
            + self
                .jumps
                .iter()
                .filter(|(p, _)| p.get() < x)
                .map(|(_, m)| m)
                .sum::<i64>()
    }
}

/// A continuous family `α ↦ H(α)`, `α ∈ [0, 1]`, observed through the window
/// `(lo, hi)` whose endpoints lie in the resolvent sets of `H(0)` and `H(1)`.
pub struct SelfAdjointFamily<F> {
    pub eval: F,
    pub window: (f64, f64),
}

struct RealFlow<'a, F> {
    family: &'a SelfAdjointFamily<F>,
    cfg: &'a FlowConfig,
    base: i64,
}

impl<F: Fn(f64) -> HermitianMatrix + Sync> RealFlow<'_, F> {
    fn spectrum(&self, alpha: f64) -> Vec<f64> {
        (self.family.eval)(alpha).eigenvalues()
    }

    fn in_window(&self, values: &[f64], below: f64) -> i64 {
        let lo = self.family.window.0;
        values.iter().filter(|&&x| x > lo && x < below).count() as i64
    }

    fn candidates(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.family.window;
        let mut points: Vec<f64> = a
            .iter()
            .chain(b)
            .copied()
            .filter(|&x| x > lo && x < hi)
            .collect();
        points.push(lo);
        points.push(hi);
        points.sort_by(f64::total_cmp);
        let mut gaps: Vec<(f64, f64)> = points
            .windows(2)
            .map(|w| (w[1] - w[0], 0.5 * (w[0] + w[1])))
            .filter(|(len, _)| *len > 0.0)
            .collect();
        gaps.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)));
        gaps.into_iter().take(4).map(|(_, mid)| mid).collect()
    }

    /// `z` is a gap throughout the segment: no sampled eigenvalue within
    /// `eps_gap`, equal counts below `z`, and sorted eigenvalues moving by at
    /// most `max_step` between neighbouring samples.
    fn admissible(&self, z: f64, samples: &[&[f64]]) -> bool {
        let eps = self.cfg.eps_gap;
        if samples
            .iter()
            .any(|s| s.iter().any(|&x| (x - z).abs() < eps))
        {
            return false;
        }
        let count = count_below(samples[0], z);
        samples.iter().all(|s| count_below(s, z) == count)
            && samples.windows(2).all(|w| {
                w[0].iter()
                    .zip(w[1])
                    .all(|(x, y)| (x - y).abs() <= self.cfg.max_step)
            })
    }

    fn segment(&mut self, a: f64, b: f64, sa: &[f64], sb: &[f64], depth: u32) -> Result<()> {
        let m = 0.5 * (a + b);
        let sm = self.spectrum(m);
        for z in self.candidates(sa, sb) {
            if self.admissible(z, &[sa, &sm, sb]) {
                // eigenvalues leaving the window through its lower end between a and b
                self.base += self.in_window(sa, z) - self.in_window(sb, z);
                return Ok(());
            }
        }
        if depth >= self.cfg.max_depth {
            return Err(FlowError::RefinementLimitExceeded { t_lo: a, t_hi: b }.into());
        }
        self.segment(a, m, sa, &sm, depth + 1)?;
        self.segment(m, b, &sm, sb, depth + 1)
    }
}

/// Spectral flow of `H(α)` through each `λ` of the window: eigenvalues
/// crossing `λ` leftwards count `+1`, rightwards `−1`.
///
/// On each certified segment `[α_{n−1}, α_n]` with gap `z_n` the contribution
/// is `N(z_n, λ; H(α_n)) − N(z_n, λ; H(α_{n−1}))` (signed for `λ < z_n`); these
/// telescope to windowed counts at the ends plus the integer `base`.
pub fn selfadjoint_spectral_flow<F: Fn(f64) -> HermitianMatrix + Sync>(
    family: &SelfAdjointFamily<F>,
    cfg: &FlowConfig,
) -> Result<RealStepFunction> {
    let (lo, hi) = family.window;
    if !(lo < hi) {
        return Err(EngineError::InvalidWindow(format!("[{lo}, {hi}]")));
    }
    let mut flow = RealFlow {
        family,
        cfg,
        base: 0,
    };
    let s0 = flow.spectrum(0.0);
    let s1 = flow.spectrum(1.0);
    let tol = EIGENVALUE_TOL * (1.0 + lo.abs().max(hi.abs()));
    if s0
        .iter()
        .chain(&s1)
        .any(|&x| (x - lo).abs() <= tol || (x - hi).abs() <= tol)
    {
        return Err(EngineError::InvalidWindow(
            "endpoint in the spectrum at α = 0 or 1".into(),
        ));
    }
    let grid = cfg.initial_grid.max(1);
    let knots: Vec<f64> = (0..=grid).map(|k| k as f64 / grid as f64).collect();
    let spectra: Vec<Vec<f64>> = knots.iter().map(|&a| flow.spectrum(a)).collect();
    for k in 0..grid {
        flow.segment(knots[k], knots[k + 1], &spectra[k], &spectra[k + 1], 0)?;
    }
    let inside = |x: f64| x > lo && x < hi;
    let jumps = s1
        .iter()
        .filter(|&&x| inside(x))
        .map(|&x| (x, 1))
        .chain(s0.iter().filter(|&&x| inside(x)).map(|&x| (x, -1)))
        .collect();
    Ok(RealStepFunction::from_parts(flow.base, jumps))
}

/// Outcome of checking that a map is admissible at `λ` on `Ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub lambda: f64,
    pub derivative: Option<f64>,
    /// `(δ, inf |f(x) − f(λ)|)` over the sampled `Ω ∖ B(λ, δ)`.
    pub separations: Vec<(f64, f64)>,
    pub violations: Vec<String>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks (i) `f` is finite and differentiable at `λ` with `f′(λ) > 0` and
/// regular on `Ω`, and (ii) `inf |f(x) − f(λ)| > 0` over `10⁴` points of
/// `Ω ∖ B(λ, δ)` for `δ ∈ {10⁻¹, 10⁻²}`.
pub fn validate_admissible_map(map: MoebiusMap, omega: (f64, f64), lambda: f64) -> ConditionReport {
    const SAMPLES: usize = 10_000;
    let (lo, hi) = omega;
    let mut violations = Vec::new();
    let pole_inside = match map {
        MoebiusMap::InverseShift { lambda0 } => lambda0 >= lo && lambda0 <= hi,
        MoebiusMap::Affine { .. } => false,
    };
    let derivative = if map.is_regular_at(lambda) {
        let d = map.derivative(lambda);
        if !(d > 0.0 && d.is_finite()) {
            violations.push(format!("(i) f′(λ) = {d} is not positive"));
        }
        Some(d)
    } else {
        violations.push("(i) f is not finite at λ".to_string());
        None
    };
    if pole_inside {
        violations.push("(i) pole of f inside Ω".to_string());
    }
    let mut separations = Vec::new();
    if derivative.is_some() {
        let f_lambda = map.apply(lambda);
        for delta in [1e-1, 1e-2] {
            let inf = (0..SAMPLES)
                .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / SAMPLES as f64)
                .filter(|x| (x - lambda).abs() >= delta)
                .map(|x| (map.apply(x) - f_lambda).abs())
                .filter(|d| !d.is_nan())
                .fold(f64::INFINITY, f64::min);
            if !(inf > 0.0) {
                violations.push(format!("(ii) separation vanishes for δ = {delta}"));
            }
            separations.push((delta, inf));
        }
    }
    ConditionReport {
        lambda,
        derivative,
        separations,
        violations,
    }
}
