//! Seeded property suites. Each criterion runs a batch of random or fixed
//! instances, compares an implementation against an independent oracle and
//! tallies the largest defect; suites group criteria by topic.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circle_flow::{FlowConfig, SpectrumClass};
use crate::engine::{
    birman_krein_defect, counting_ssf_oracle, gap_mu_relation_defect, invariance_defect,
    invariance_theta_samples, mu_from_data, mu_via_flow, mu_via_index, selfadjoint_spectral_flow,
    ssf_from_mu, ssf_index_integral, ssf_index_integral_from_data, ssf_via_determinant,
    trace_formula_defect, DetConfig, EngineError, FlowRoute, MuMethod, SelfAdjointFamily,
    TestFunction,
};
use crate::linalg::{
    eigenvalue_sequences, fredholm_index, pencil_real_zeros, schatten_norm, xi_projection, CMatrix,
    HermitianMatrix, Norm, C64, DEFAULT_ID_TOL, DEFAULT_ONE_TOL,
};
use crate::models::{
    s_of_z, BoundaryData, DenseModel, HalfLineModel, Model, MoebiusMap, ResolventModel,
    DEFAULT_INV_TOL,
};
use crate::random::{
    random_complex_matrix, random_hermitian, random_hermitian_with_spectrum, random_projection,
    random_psd, random_signature_matrix, random_unitary,
};

/// Suite names accepted by [`run_suite`].
pub const SUITES: [&str; 9] = [
    "index",
    "flow",
    "lidski",
    "e-lemmas",
    "bk",
    "invariance",
    "gaps",
    "trace",
    "all",
];

/// Outcome of one criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub name: String,
    pub tolerance: f64,
    pub cases_run: usize,
    pub cases_passed: usize,
    /// Points excluded as exceptional (flagged), not counted as run.
    pub skipped: usize,
    pub max_defect: f64,
    /// First few failing cases.
    pub failures: Vec<String>,
}

impl Tally {
    pub fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            tolerance,
            cases_run: 0,
            cases_passed: 0,
            skipped: 0,
            max_defect: 0.0,
            failures: Vec::new(),
        }
    }

    /// Records a case passing iff `defect ≤ tolerance`.
    pub fn record(&mut self, defect: f64, label: impl FnOnce() -> String) {
        let ok = defect <= self.tolerance;
        self.record_with(defect, ok, label);
    }

    pub fn record_with(&mut self, defect: f64, ok: bool, label: impl FnOnce() -> String) {
        self.cases_run += 1;
        if defect.is_nan() || defect > self.max_defect {
            self.max_defect = if defect.is_nan() {
                f64::INFINITY
            } else {
                defect
            };
        }
        if ok {
            self.cases_passed += 1;
        } else if self.failures.len() < 5 {
            self.failures
                .push(format!("{} (defect {defect:e})", label()));
        }
    }

    pub fn fail(&mut self, label: impl FnOnce() -> String) {
        self.record_with(f64::INFINITY, false, label);
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    pub fn passed(&self) -> bool {
        self.cases_run > 0 && self.cases_passed == self.cases_run
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub suite: String,
    pub seed: u64,
    pub cases_run: usize,
    pub cases_passed: usize,
    pub max_defects: BTreeMap<String, f64>,
    pub wall_time_s: f64,
    pub criteria: Vec<Tally>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(Tally::passed)
    }
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt))
}

/// Points of the exceptional set: reported by the model or engine, skipped
/// by the checks rather than counted as failures.
fn is_exceptional(e: &EngineError) -> bool {
    matches!(
        e.flag().as_str(),
        "BoundaryUndefined"
            | "BranchAtThreshold"
            | "NonInvertibleSymbol"
            | "KernelAtZero"
            | "PoleHit"
    )
}

/// `(pos, neg)` with both parts nonzero when `r ≥ 2`.
fn mixed_signature<R: Rng>(rng: &mut R, r: usize) -> (usize, usize) {
    if r == 1 {
        if rng.gen_bool(0.5) {
            (1, 0)
        } else {
            (0, 1)
        }
    } else {
        let pos = rng.gen_range(1..r);
        (pos, r - pos)
    }
}

/// Dense model with `σ(H0) ⊂ [−2, 2]`, `G` of size `r×n` with entries of size
/// about `coupling/√n`, and `J` of signature `(pos, neg)`.
pub fn random_dense_model<R: Rng>(
    rng: &mut R,
    n: usize,
    pos: usize,
    neg: usize,
    coupling: f64,
) -> DenseModel {
    let spectrum: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let h0 = random_hermitian_with_spectrum(rng, &spectrum);
    let g = random_complex_matrix(rng, pos + neg, n) * C64::new(coupling / (n as f64).sqrt(), 0.0);
    let j = random_signature_matrix(rng, pos, neg);
    DenseModel::new(h0, g, j).expect("random dense model is valid")
}

/// Half-line lattice model supported on `r` or `r + 1` distinct sites in `1..=6`.
pub fn random_lattice_model<R: Rng>(rng: &mut R, pos: usize, neg: usize) -> HalfLineModel {
    let r = pos + neg;
    let k = r + rng.gen_range(0..=1);
    let mut sites: Vec<usize> = (1..=6).collect();
    for i in 0..k {
        let j = rng.gen_range(i..sites.len());
        sites.swap(i, j);
    }
    sites.truncate(k);
    let weights = random_complex_matrix(rng, r, k);
    let j = random_signature_matrix(rng, pos, neg);
    HalfLineModel::new(sites, weights, j).expect("random lattice model is valid")
}

/// Midpoints of the gaps of `σ(H0) ∪ σ(H)` wider than `1e−6·scale`, plus one
/// point below and one above both spectra.
pub fn gap_points(model: &DenseModel) -> Vec<f64> {
    let mut points: Vec<f64> = model
        .h0_eigenvalues()
        .iter()
        .chain(model.h_eigenvalues())
        .copied()
        .collect();
    points.sort_by(f64::total_cmp);
    let min_gap = 1e-6 * model.scale();
    let mut out = vec![points[0] - 1.0];
    out.extend(
        points
            .windows(2)
            .filter(|w| w[1] - w[0] > min_gap)
            .map(|w| 0.5 * (w[0] + w[1])),
    );
    out.push(points[points.len() - 1] + 1.0);
    out
}

/// `n` points spread evenly over `(lo, hi)`, excluding the endpoints.
pub fn open_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / n as f64)
        .collect()
}

fn circle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Largest phase mismatch between two sorted multisets, `∞` if sizes differ.
fn phase_defect(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| circle_gap(x, y))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------- index

/// `round(xi_det)` equals the counting oracle at every gap point of random
/// dense models, with `|xi_det − round(xi_det)| < 1e−6`.
pub fn counting_oracle_equivalence(seed: u64, models: usize) -> Tally {
    let mut tally = Tally::new("counting oracle vs determinant", 1e-6);
    let mut rng = rng_for(seed, 1);
    let det = DetConfig::default();
    for m in 0..models {
        let n = rng.gen_range(2..=10);
        let r = rng.gen_range(1..=n.min(4));
        let (pos, neg) = mixed_signature(&mut rng, r);
        let model = random_dense_model(&mut rng, n, pos, neg, 1.0);
        for lambda in gap_points(&model) {
            let oracle = match counting_ssf_oracle(&model, lambda) {
                Ok(v) => v,
                Err(_) => {
                    tally.skip();
                    continue;
                }
            };
            match ssf_via_determinant(&model, lambda, &det) {
                Ok(xi) => {
                    let residual = (xi - xi.round()).abs();
                    let ok = xi.round() as i64 == oracle && residual < tally.tolerance;
                    tally.record_with((xi - oracle as f64).abs(), ok, || {
                        format!("model {m} (n={n}, r={r}) λ={lambda}: xi_det={xi}, oracle={oracle}")
                    });
                }
                Err(e) if is_exceptional(&e) => tally.skip(),
                Err(e) => tally.fail(|| format!("model {m} λ={lambda}: {e}")),
            }
        }
    }
    tally
}

/// The three scalar closed forms, through boundary data and through lattice
/// models realizing the same `(A, B, J)`.
pub fn scalar_closed_forms() -> Tally {
    let mut tally = Tally::new("scalar closed forms", 1e-6);
    let cases = [
        (0.0, 1.0, 1.0, 0.25),
        (0.0, 1.0, -1.0, -0.25),
        (0.5, 1.0, 1.0, 0.187167),
    ];
    let flow = FlowConfig::default();
    let det = DetConfig::default();
    for (a, b, j, expected) in cases {
        let data = BoundaryData {
            a: HermitianMatrix::from_real_diagonal(&[a]),
            b: HermitianMatrix::from_real_diagonal(&[b]),
            j_inv: HermitianMatrix::from_real_diagonal(&[1.0 / j]),
        };
        let at = C64::new(0.0, 0.0);
        let label = || format!("(A,B,J)=({a},{b},{j})");
        match mu_from_data(&data, at) {
            Ok((step, _)) => tally.record((-step.integral() / TAU - expected).abs(), label),
            Err(e) => tally.fail(|| format!("{}: {e}", label())),
        }
        match ssf_index_integral_from_data(&data, at) {
            Ok(xi) => tally.record((xi - expected).abs(), label),
            Err(e) => tally.fail(|| format!("{}: {e}", label())),
        }
        // T = −w²ζ at site 1: λ = 0, w = 1 gives (0, 1); w⁴ = 5/4, λ = −1/w² gives (0.5, 1)
        let (weight, lambda) = if a == 0.0 {
            (1.0, 0.0)
        } else {
            let w = 1.25f64.powf(0.25);
            (w, -1.0 / (w * w))
        };
        let model = HalfLineModel::rank_one(1, weight, j).expect("scalar lattice model");
        for result in [
            ssf_via_determinant(&model, lambda, &det),
            mu_via_flow(&model, lambda, &flow, FlowRoute::Scattering).map(|mu| ssf_from_mu(&mu)),
            ssf_index_integral(&model, lambda),
        ] {
            match result {
                Ok(xi) => tally.record((xi - expected).abs(), || format!("lattice {}", label())),
                Err(e) => tally.fail(|| format!("lattice {}: {e}", label())),
            }
        }
    }
    tally
}

// ---------------------------------------------------------------- flow

/// Nontrivial eigenphases of `M(z)` (`n×n`) equal those of `S(z)` (`r×r`).
pub fn m_and_s_eigenphases(seed: u64, models: usize, points: usize) -> Tally {
    let mut tally = Tally::new("eigenphases of M(z) vs S(z)", 1e-8);
    let mut rng = rng_for(seed, 2);
    for m in 0..models {
        let n = rng.gen_range(2..=8);
        let r = rng.gen_range(1..=n.min(4));
        let (pos, neg) = mixed_signature(&mut rng, r);
        let model = random_dense_model(&mut rng, n, pos, neg, 1.0);
        let (lo, hi) = model.spectral_hull();
        for _ in 0..points {
            let z = C64::new(rng.gen_range(lo..hi), 10f64.powf(rng.gen_range(-1.0..1.0)));
            let m_phases = model.m_of_z(z).map(|w| w.eigenphases(DEFAULT_ID_TOL));
            let s_phases = s_of_z(&model, z).map(|w| w.eigenphases(DEFAULT_ID_TOL));
            match (m_phases, s_phases) {
                (Ok(a), Ok(b)) => tally.record(phase_defect(&a, &b), || {
                    format!("model {m} z={z}: M {a:?} vs S {b:?}")
                }),
                (Err(e), _) | (_, Err(e)) => tally.fail(|| format!("model {m} z={z}: {e}")),
            }
        }
    }
    tally
}

/// Lattice instances for the flow and determinant sweeps: ranks 1 to 3 with
/// positive, negative and mixed `J`, three random models each.
pub fn lattice_sweep_models(seed: u64) -> Vec<(String, HalfLineModel)> {
    let mut rng = rng_for(seed, 3);
    let mut out = Vec::new();
    for r in 1..=3usize {
        let mut signatures = vec![(r, 0), (0, r)];
        if r >= 2 {
            signatures.push((1, r - 1));
        }
        if r == 3 {
            signatures.push((2, 1));
        }
        for (pos, neg) in signatures {
            for k in 0..3 {
                let label = format!("r={r} sig=(+{pos},−{neg}) #{k}");
                out.push((label, random_lattice_model(&mut rng, pos, neg)));
            }
        }
    }
    out
}

pub const LATTICE_SWEEP_LAMBDAS: [f64; 4] = [-1.5, -0.5, 0.4, 1.2];

/// `mu_via_flow == mu_via_index` exactly (jumps within `1e−8`, equal
/// integers) and `|arg D(λ+i0) + ½∫μ| < 1e−6` on the lattice sweep.
pub fn flow_index_and_determinant(seed: u64) -> (Tally, Tally) {
    let mut equal = Tally::new("mu_via_flow == mu_via_index (lattice)", 1e-8);
    let mut g1 = Tally::new("arg D(λ+i0) + ½∫μ dθ (lattice)", 1e-6);
    let flow = FlowConfig::default();
    let det = DetConfig::default();
    for (label, model) in lattice_sweep_models(seed) {
        for lambda in LATTICE_SWEEP_LAMBDAS {
            let index = match mu_via_index(&model, lambda) {
                Ok(mu) => mu,
                Err(e) if is_exceptional(&e) => {
                    equal.skip();
                    g1.skip();
                    continue;
                }
                Err(e) => {
                    equal.fail(|| format!("{label} λ={lambda}: index {e}"));
                    continue;
                }
            };
            let flowed = match mu_via_flow(&model, lambda, &flow, FlowRoute::Scattering) {
                Ok(mu) => mu,
                Err(e) => {
                    equal.fail(|| format!("{label} λ={lambda}: flow {e}"));
                    g1.fail(|| format!("{label} λ={lambda}: flow {e}"));
                    continue;
                }
            };
            let same = flowed.step.equals_within(&index.step, equal.tolerance);
            let defect = if flowed.step.jumps.len() == index.step.jumps.len() {
                flowed
                    .step
                    .jumps
                    .iter()
                    .zip(&index.step.jumps)
                    .map(|(a, b)| (a.theta - b.theta).abs())
                    .fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            equal.record_with(if same { defect } else { f64::INFINITY }, same, || {
                format!(
                    "{label} λ={lambda}: flow {:?} vs index {:?}",
                    flowed.step, index.step
                )
            });
            match ssf_via_determinant(&model, lambda, &det) {
                Ok(xi) => {
                    let defect = (PI * xi + 0.5 * flowed.step.integral()).abs();
                    g1.record(defect, || format!("{label} λ={lambda}: xi_det={xi}"));
                }
                Err(e) if is_exceptional(&e) => g1.skip(),
                Err(e) => g1.fail(|| format!("{label} λ={lambda}: det {e}")),
            }
        }
    }
    (equal, g1)
}

// ---------------------------------------------------------------- bk

/// Lattice models for the Birman–Krein sweep.
pub fn bk_models(seed: u64) -> Vec<(String, HalfLineModel)> {
    let mut rng = rng_for(seed, 4);
    vec![
        (
            "rank-one site 1".to_string(),
            HalfLineModel::rank_one(1, 1.0, 1.0).unwrap(),
        ),
        (
            "rank-2 mixed".to_string(),
            random_lattice_model(&mut rng, 1, 1),
        ),
        (
            "rank-3 mixed".to_string(),
            random_lattice_model(&mut rng, 2, 1),
        ),
    ]
}

/// `|det S(λ+i0) − e^{−2πiξ}| < 1e−6` with `ξ` the index integral, on 101
/// points of `(−1.9, 1.9)`.
pub fn birman_krein_sweep(seed: u64) -> Tally {
    let mut tally = Tally::new("Birman–Krein defect (lattice)", 1e-6);
    for (label, model) in bk_models(seed) {
        for lambda in open_grid(-1.9, 1.9, 101) {
            match ssf_index_integral(&model, lambda)
                .and_then(|xi| birman_krein_defect(&model, lambda, xi))
            {
                Ok(d) => tally.record(d, || format!("{label} λ={lambda}")),
                Err(e) if is_exceptional(&e) => tally.skip(),
                Err(e) => tally.fail(|| format!("{label} λ={lambda}: {e}")),
            }
        }
    }
    tally
}

/// `J = I ⇒ ξ ≥ −1e−12, μ ≤ 0`; `J = −I ⇒ ξ ≤ 1e−12, μ ≥ 0` on a 101-point sweep.
pub fn sign_definite_sweep(seed: u64) -> Tally {
    let mut tally = Tally::new("sign-definite ξ and μ (lattice)", 1e-12);
    let mut rng = rng_for(seed, 5);
    let flow = FlowConfig::default();
    let det = DetConfig::default();
    for sign in [1.0, -1.0] {
        for r in 1..=2usize {
            let base = random_lattice_model(&mut rng, r, 0);
            let j = HermitianMatrix::identity(r).scale(sign);
            let model =
                HalfLineModel::new(base.sites().to_vec(), base.weights().clone(), j).unwrap();
            for lambda in open_grid(-1.9, 1.9, 101) {
                let label = || format!("J={sign}·I r={r} λ={lambda}");
                let index = match mu_via_index(&model, lambda) {
                    Ok(mu) => mu,
                    Err(e) if is_exceptional(&e) => {
                        tally.skip();
                        continue;
                    }
                    Err(e) => {
                        tally.fail(|| format!("{}: {e}", label()));
                        continue;
                    }
                };
                let flowed = mu_via_flow(&model, lambda, &flow, FlowRoute::Scattering);
                let xi_det = ssf_via_determinant(&model, lambda, &det);
                let (flowed, xi_det) = match (flowed, xi_det) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(e), _) | (_, Err(e)) => {
                        tally.fail(|| format!("{}: {e}", label()));
                        continue;
                    }
                };
                let xis = [ssf_from_mu(&index), ssf_from_mu(&flowed), xi_det];
                // violation sizes: positive parts of sign·ξ bound and of sign·μ
                let xi_violation = xis
                    .iter()
                    .map(|&x| (-sign * x).max(0.0))
                    .fold(0.0, f64::max);
                let mu_violation = [&index.step, &flowed.step]
                    .iter()
                    .map(|s| {
                        if sign > 0.0 {
                            s.max_value()
                        } else {
                            -s.min_value()
                        }
                    })
                    .max()
                    .unwrap_or(0)
                    .max(0);
                let ok = xi_violation <= tally.tolerance && mu_violation == 0;
                tally.record_with(xi_violation.max(mu_violation as f64), ok, label);
            }
        }
    }
    tally
}

// ---------------------------------------------------------------- invariance

pub const INVARIANCE_MAPS: [MoebiusMap; 2] = [
    MoebiusMap::Affine { a: 2.0, b: 0.3 },
    MoebiusMap::InverseShift { lambda0: -5.0 },
];

/// `μ(θ; λ, H, H0) = μ(θ; f(λ), f(H), f(H0))` at the sampled phases, by both
/// methods, for dense models at gap points and lattice models at `λ ∈ {−0.7, 0.4}`.
pub fn invariance_suite(seed: u64, dense_models: usize) -> Tally {
    let mut tally = Tally::new("invariance defect (dense and lattice)", 0.0);
    let mut rng = rng_for(seed, 6);
    let flow = FlowConfig::default();
    let mut instances: Vec<(String, Model, Vec<f64>)> = Vec::new();
    for m in 0..dense_models {
        let n = rng.gen_range(2..=6);
        let r = rng.gen_range(1..=n.min(3));
        let (pos, neg) = mixed_signature(&mut rng, r);
        let model = random_dense_model(&mut rng, n, pos, neg, 0.5);
        let lambdas = gap_points(&model);
        instances.push((format!("dense {m}"), model.into(), lambdas));
    }
    for (pos, neg) in [(1, 0), (1, 1), (0, 2)] {
        let model = random_lattice_model(&mut rng, pos, neg);
        instances.push((
            format!("lattice (+{pos},−{neg})"),
            model.into(),
            vec![-0.7, 0.4],
        ));
    }
    for (label, model, lambdas) in &instances {
        for map in INVARIANCE_MAPS {
            for &lambda in lambdas {
                for method in [MuMethod::Index, MuMethod::Flow] {
                    match invariance_defect(model, map, lambda, method, &flow) {
                        Ok(d) => tally.record(d as f64, || {
                            format!("{label} {map:?} λ={lambda} {method:?}")
                        }),
                        Err(e) if is_exceptional(&e) => tally.skip(),
                        Err(e) => {
                            tally.fail(|| format!("{label} {map:?} λ={lambda} {method:?}: {e}"))
                        }
                    }
                }
            }
        }
    }
    tally
}

// ---------------------------------------------------------------- gaps

/// Gap relation between `μ` at two gap points and eigenvalue counts, by both
/// methods, on random dense models.
pub fn gap_relation_suite(seed: u64, models: usize) -> Tally {
    let mut tally = Tally::new("gap relation for μ (dense)", 0.0);
    let mut rng = rng_for(seed, 7);
    let flow = FlowConfig::default();
    let thetas = invariance_theta_samples(&[]);
    for m in 0..models {
        let n = rng.gen_range(2..=8);
        let r = rng.gen_range(1..=n.min(4));
        let (pos, neg) = mixed_signature(&mut rng, r);
        let model = random_dense_model(&mut rng, n, pos, neg, 1.0);
        let gaps = gap_points(&model);
        let i = rng.gen_range(0..gaps.len());
        let j = rng.gen_range(0..gaps.len());
        let (l1, l2) = (gaps[i.min(j)], gaps[i.max(j)]);
        for method in [MuMethod::Index, MuMethod::Flow] {
            match gap_mu_relation_defect(&model, l1, l2, &thetas, method, &flow) {
                Ok(d) => tally.record(d as f64, || format!("model {m} [{l1}, {l2}] {method:?}")),
                Err(e) if is_exceptional(&e) => tally.skip(),
                Err(e) => tally.fail(|| format!("model {m} [{l1}, {l2}] {method:?}: {e}")),
            }
        }
    }
    tally
}

/// Spectral flow of `H(α) = H0 + αG†JG` through gap points equals `μ` of the
/// pair `(H(1), H(0))`, the latter by index and by the flow of `M`.
pub fn selfadjoint_flow_suite(seed: u64, models: usize, points_per_model: usize) -> Tally {
    let mut tally = Tally::new("self-adjoint spectral flow vs μ (dense)", 0.0);
    let mut rng = rng_for(seed, 8);
    let flow = FlowConfig::default();
    for m in 0..models {
        let n = rng.gen_range(5..=8);
        let r = rng.gen_range(1..=3);
        let (pos, neg) = mixed_signature(&mut rng, r);
        let model = random_dense_model(&mut rng, n, pos, neg, 1.0);
        let gaps = gap_points(&model);
        // lower window edge at an interior gap, so eigenvalues may leave through it
        let window = (gaps[gaps.len() / 3], gaps[gaps.len() - 1] + 1.0);
        let v = model.h().sub(model.h0());
        let h0 = model.h0().clone();
        let family = SelfAdjointFamily {
            eval: move |a: f64| h0.add_scaled(a, &v),
            window,
        };
        let sf = match selfadjoint_spectral_flow(&family, &flow) {
            Ok(sf) => sf,
            Err(e) => {
                tally.fail(|| format!("model {m}: {e}"));
                continue;
            }
        };
        let inside: Vec<f64> = gaps
            .iter()
            .copied()
            .filter(|&l| l > window.0 && l < window.1)
            .collect();
        let step = (inside.len() / points_per_model).max(1);
        for &lambda in inside.iter().step_by(step).take(points_per_model) {
            let expected = sf.value_at(lambda);
            for (name, mu) in [
                ("index", mu_via_index(&model, lambda)),
                (
                    "M-flow",
                    mu_via_flow(&model, lambda, &flow, FlowRoute::Unitary),
                ),
            ] {
                match mu {
                    Ok(mu) => {
                        let d = (mu.step.min_value() - expected)
                            .abs()
                            .max((mu.step.max_value() - expected).abs());
                        tally.record(d as f64, || {
                            format!("model {m} λ={lambda} {name}: sf={expected}")
                        });
                    }
                    Err(e) if is_exceptional(&e) => tally.skip(),
                    Err(e) => tally.fail(|| format!("model {m} λ={lambda} {name}: {e}")),
                }
            }
        }
    }
    tally
}

// ---------------------------------------------------------------- trace

/// `|Tr(φ(H) − φ(H0)) − ∫φ′ξ| < 1e−8` for `φ ∈ {x, x², x³, bump}`.
pub fn trace_formula_suite(seed: u64, models: usize) -> Tally {
    let mut tally = Tally::new("trace formula (dense)", 1e-8);
    let mut rng = rng_for(seed, 9);
    for m in 0..models {
        let n = rng.gen_range(2..=8);
        let r = rng.gen_range(1..=n.min(4));
        let (pos, neg) = mixed_signature(&mut rng, r);
        let model = random_dense_model(&mut rng, n, pos, neg, 1.0);
        let (lo, hi) = model.spectral_hull();
        let support = (lo - 1.0, hi + 1.0);
        let functions = [
            TestFunction::polynomial(&[0.0, 1.0], support),
            TestFunction::polynomial(&[0.0, 0.0, 1.0], support),
            TestFunction::polynomial(&[0.0, 0.0, 0.0, 1.0], support),
            TestFunction::bump(0.5 * (lo + hi), 0.3 * (hi - lo) + 0.2),
        ];
        for phi in functions {
            match phi.and_then(|phi| Ok((trace_formula_defect(&model, &phi)?, phi.name))) {
                Ok((d, name)) => tally.record(d, || format!("model {m} φ={name}")),
                Err(e) => tally.fail(|| format!("model {m}: {e}")),
            }
        }
    }
    tally
}

// ---------------------------------------------------------------- e-lemmas

/// Random boundary data `(A, B ⪰ 0, J⁻¹)` of rank `r`; every third instance is
/// doubled (`X ⊕ X` in a random basis) to produce repeated eigenphases.
fn random_boundary_data<R: Rng>(rng: &mut R, k: usize) -> BoundaryData {
    let doubled = k % 3 == 2;
    let r = rng.gen_range(1..=if doubled { 2 } else { 4 });
    let rank_b = rng.gen_range(1..=r);
    let (pos, neg) = if r == 1 {
        mixed_signature(rng, 1)
    } else {
        (rng.gen_range(0..=r), 0)
    };
    let neg = if r > 1 { r - pos } else { neg };
    let data = BoundaryData {
        a: random_hermitian(rng, r, 1.0),
        b: random_psd(rng, r, rank_b),
        j_inv: random_signature_matrix(rng, pos, neg),
    };
    if !doubled {
        return data;
    }
    let u = random_unitary(rng, 2 * r).into_inner();
    let double = |m: &HermitianMatrix| {
        let mut d = CMatrix::zeros(2 * r, 2 * r);
        d.view_mut((0, 0), (r, r)).copy_from(m.entries());
        d.view_mut((r, r), (r, r)).copy_from(m.entries());
        HermitianMatrix::from_hermitian_part(&(&u * d * u.adjoint()))
    };
    BoundaryData {
        a: double(&data.a),
        b: double(&data.b),
        j_inv: double(&data.j_inv),
    }
}

/// Multiset `{2·atan2(1, s) : Ker(J⁻¹ + A + sB) ≠ 0}` equals the eigenphases of `S`.
pub fn kernel_phase_lemma(seed: u64, instances: usize) -> Tally {
    let mut tally = Tally::new("pencil kernels ↔ eigenphases of S", 1e-8);
    let mut rng = rng_for(seed, 10);
    let at = C64::new(0.0, 0.0);
    for k in 0..instances {
        let data = random_boundary_data(&mut rng, k);
        let s = match data.scattering(at, DEFAULT_INV_TOL) {
            Ok(s) => s,
            Err(e) => {
                tally.fail(|| format!("instance {k}: {e}"));
                continue;
            }
        };
        let phases = s.eigenphases(DEFAULT_ID_TOL);
        let base = data.pencil(0.0);
        match pencil_real_zeros(&base, &data.b, (f64::NEG_INFINITY, f64::INFINITY)) {
            Ok(zeros) => {
                let mut from_kernels: Vec<f64> = zeros
                    .iter()
                    .flat_map(|&(s, m)| std::iter::repeat_n(2.0 * 1f64.atan2(s), m))
                    .collect();
                from_kernels.sort_by(f64::total_cmp);
                tally.record(phase_defect(&from_kernels, &phases), || {
                    format!("instance {k}: kernels {from_kernels:?} vs S {phases:?}")
                });
            }
            Err(_) => tally.skip(),
        }
    }
    tally
}

/// `index(Ξ(M), Ξ(M + B)) = Σ_{s ∈ (0, 1]} dim Ker(M + sB)`.
pub fn index_kernel_sum_lemma(seed: u64, instances: usize) -> Tally {
    let mut tally = Tally::new("index as kernel sum", 0.0);
    let mut rng = rng_for(seed, 11);
    for k in 0..instances {
        let n = rng.gen_range(1..=6);
        let m = random_hermitian(&mut rng, n, 1.0);
        let rank = rng.gen_range(1..=n);
        let b = random_psd(&mut rng, n, rank).scale(rng.gen_range(0.5..3.0));
        let result = (|| -> Result<(i64, i64), crate::linalg::LinalgError> {
            let tol = 1e-10;
            let index = fredholm_index(
                &xi_projection(&m, tol)?,
                &xi_projection(&m.add(&b), tol)?,
                DEFAULT_ONE_TOL,
            )?;
            let kernels = pencil_real_zeros(&m, &b, (0.0, 1.0))?
                .iter()
                .map(|&(_, mult)| mult as i64)
                .sum();
            Ok((index, kernels))
        })();
        match result {
            Ok((index, kernels)) => tally.record((index - kernels).abs() as f64, || {
                format!("instance {k}: index {index}, kernels {kernels}")
            }),
            Err(_) => tally.skip(),
        }
    }
    tally
}

/// `N(θ1, θ2; S) = index(Ξ(J⁻¹+A+cot(θ2/2)B), Ξ(J⁻¹+A+cot(θ1/2)B))` at 20
/// random phase pairs per instance.
pub fn arc_count_lemma(seed: u64, instances: usize) -> Tally {
    let mut tally = Tally::new("arc counts of S as indices", 0.0);
    let mut rng = rng_for(seed, 12);
    let at = C64::new(0.0, 0.0);
    for k in 0..instances {
        let data = random_boundary_data(&mut rng, k);
        let spec = match data.scattering(at, DEFAULT_INV_TOL) {
            Ok(s) => SpectrumClass::new(s.eigenphases(DEFAULT_ID_TOL)),
            Err(e) => {
                tally.fail(|| format!("instance {k}: {e}"));
                continue;
            }
        };
        let xi = |theta: f64| {
            let p = data.pencil(1.0 / (0.5 * theta).tan());
            xi_projection(&p, 1e-10 * crate::linalg::max_abs(p.entries()).max(1.0))
        };
        for _ in 0..20 {
            let mut t1 = rng.gen_range(0.0..TAU);
            let mut t2 = rng.gen_range(0.0..TAU);
            if t1 > t2 {
                std::mem::swap(&mut t1, &mut t2);
            }
            match (xi(t1), xi(t2)) {
                (Ok(p1), Ok(p2)) => match fredholm_index(&p2, &p1, DEFAULT_ONE_TOL) {
                    Ok(index) => {
                        let count = spec.counting_n(t1, t2);
                        tally.record((index - count).abs() as f64, || {
                            format!("instance {k} [{t1}, {t2}): N={count}, index={index}")
                        });
                    }
                    Err(e) => tally.fail(|| format!("instance {k}: {e}")),
                },
                _ => tally.skip(),
            }
        }
    }
    tally
}

// ---------------------------------------------------------------- lidski

/// `‖Λ(A1) − Λ(A2)‖_p ≤ ‖A1 − A2‖_{S_p}` for `p ∈ {1, 2, ∞}`; the defect is
/// the excess over the right-hand side beyond rounding.
pub fn lidski_suite(seed: u64, instances: usize) -> Tally {
    let mut tally = Tally::new("Lidski inequality", 0.0);
    let mut rng = rng_for(seed, 13);
    for k in 0..instances {
        let n = rng.gen_range(1..=8);
        let (c1, c2) = (rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0));
        let a1 = random_hermitian(&mut rng, n, c1);
        let a2 = random_hermitian(&mut rng, n, c2);
        let (s1, s2) = (eigenvalue_sequences(&a1), eigenvalue_sequences(&a2));
        let diff = a1.sub(&a2);
        let excess = Norm::ALL
            .iter()
            .map(|&p| {
                let lhs = s1.distance(&s2, p);
                let rhs = schatten_norm(&diff, p);
                // slack for rounding in two eigen-decompositions
                (lhs - rhs - 1e-12 * (1.0 + rhs)).max(0.0)
            })
            .fold(0.0, f64::max);
        tally.record(excess, || format!("instance {k} (n={n})"));
    }
    tally
}

/// `index(P, R) = index(P, Q) + index(Q, R)` and `index(P, Q) = −index(Q, P)`.
pub fn chain_rule_suite(seed: u64, instances: usize) -> Tally {
    let mut tally = Tally::new("index chain rule", 0.0);
    let mut rng = rng_for(seed, 14);
    for k in 0..instances {
        let n = rng.gen_range(1..=8);
        let mut proj = || {
            let rank = rng.gen_range(0..=n);
            random_projection(&mut rng, n, rank)
        };
        let (p, q, r) = (proj(), proj(), proj());
        let idx = |a, b| fredholm_index(a, b, DEFAULT_ONE_TOL);
        match (idx(&p, &r), idx(&p, &q), idx(&q, &r), idx(&q, &p)) {
            (Ok(pr), Ok(pq), Ok(qr), Ok(qp)) => {
                let d = (pr - pq - qr).abs().max((pq + qp).abs());
                tally.record(d as f64, || format!("instance {k}: {pr} vs {pq} + {qr}"));
            }
            _ => tally.fail(|| format!("instance {k}: index computation failed")),
        }
    }
    tally
}

// ---------------------------------------------------------------- suites

/// Criteria of a suite with the instance counts used by the acceptance run.
pub fn suite_criteria(suite: &str, seed: u64) -> Option<Vec<Tally>> {
    let tallies = match suite {
        "index" => vec![
            counting_oracle_equivalence(seed, 100),
            scalar_closed_forms(),
        ],
        "flow" => {
            let (equal, g1) = flow_index_and_determinant(seed);
            vec![m_and_s_eigenphases(seed, 50, 5), equal, g1]
        }
        "lidski" => vec![lidski_suite(seed, 200), chain_rule_suite(seed, 200)],
        "e-lemmas" => vec![
            kernel_phase_lemma(seed, 60),
            index_kernel_sum_lemma(seed, 60),
            arc_count_lemma(seed, 60),
        ],
        "bk" => vec![birman_krein_sweep(seed), sign_definite_sweep(seed)],
        "invariance" => vec![invariance_suite(seed, 10)],
        "gaps" => vec![
            gap_relation_suite(seed, 50),
            selfadjoint_flow_suite(seed, 4, 10),
        ],
        "trace" => vec![trace_formula_suite(seed, 50)],
        "all" => {
            let mut all = Vec::new();
            for s in &SUITES[..SUITES.len() - 1] {
                all.extend(suite_criteria(s, seed)?);
            }
            all
        }
        _ => return None,
    };
    Some(tallies)
}

/// Runs a named suite; `None` for an unknown name.
pub fn run_suite(suite: &str, seed: u64) -> Option<CheckReport> {
    let start = Instant::now();
    let criteria = suite_criteria(suite, seed)?;
    Some(CheckReport {
        suite: suite.to_string(),
        seed,
        cases_run: criteria.iter().map(|t| t.cases_run).sum(),
        cases_passed: criteria.iter().map(|t| t.cases_passed).sum(),
        max_defects: criteria
            .iter()
            .map(|t| (t.name.clone(), t.max_defect))
            .collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
        criteria,
    })
}
