use std::f64::consts::TAU;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssf_core::circle_flow::FlowConfig;
use ssf_core::engine::{
    compute_record, counting_ssf_oracle, mu_via_flow, mu_via_index, ssf_from_mu,
    ssf_index_integral, ssf_via_determinant, DetConfig, EngineError, FlowRoute, SsfConfig,
};
use ssf_core::linalg::{CMatrix, HermitianMatrix, C64};
use ssf_core::models::{DenseModel, HalfLineModel, Model};
use ssf_core::random::{random_complex_matrix, random_hermitian, random_signature_matrix};

fn lattice(seed: u64, rank: usize) -> HalfLineModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites: Vec<usize> = (1..=5).collect();
    for k in (1..sites.len()).rev() {
        sites.swap(k, rng.gen_range(0..=k));
    }
    sites.truncate(rank);
    let w = random_complex_matrix(&mut rng, rank, rank);
    let pos = rng.gen_range(0..=rank);
    let j = random_signature_matrix(&mut rng, pos, rank - pos);
    HalfLineModel::new(sites, w, j).unwrap()
}

fn dense(seed: u64) -> DenseModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=5);
    let r = rng.gen_range(1..=n);
    let pos = rng.gen_range(0..=r);
    let h0 = random_hermitian(&mut rng, n, 1.0);
    let g = random_complex_matrix(&mut rng, r, n);
    let j = random_signature_matrix(&mut rng, pos, r - pos);
    DenseModel::new(h0, g, j).unwrap()
}

fn exceptional(e: &EngineError) -> bool {
    matches!(
        e.flag().as_str(),
        "BoundaryUndefined"
            | "BranchAtThreshold"
            | "NonInvertibleSymbol"
            | "KernelAtZero"
            | "PoleHit"
    ) || matches!(e, EngineError::EigenvalueAtLambda { .. })
}

#[test]
fn three_routes_to_xi_agree_on_lattice() {
    let mut checked = 0;
    for seed in 0..12 {
        let model = lattice(seed, 1 + seed as usize % 3);
        for k in 0..9 {
            let lambda = -1.8 + 0.45 * k as f64;
            let Ok(index) = ssf_index_integral(&model, lambda) else {
                continue;
            };
            let mu = mu_via_flow(
                &model,
                lambda,
                &FlowConfig::default(),
                FlowRoute::Scattering,
            )
            .unwrap();
            let det = ssf_via_determinant(&model, lambda, &DetConfig::default()).unwrap();
            assert!(
                (ssf_from_mu(&mu) - index).abs() < 1e-9,
                "seed {seed} λ={lambda}"
            );
            assert!(
                (det - index).abs() < 1e-6,
                "seed {seed} λ={lambda}: det {det} index {index}"
            );
            checked += 1;
        }
    }
    assert!(checked > 90);
}

#[test]
fn unitary_route_matches_scattering_route_in_gaps() {
    let mut checked = 0;
    for seed in 0..15 {
        let model = dense(100 + seed);
        for lambda in [-2.5, -0.9, 0.1, 1.2, 2.8] {
            if counting_ssf_oracle(&model, lambda).is_err() {
                continue;
            }
            let cfg = FlowConfig::default();
            let s = mu_via_flow(&model, lambda, &cfg, FlowRoute::Scattering);
            let m = mu_via_flow(&model, lambda, &cfg, FlowRoute::Unitary);
            let (s, m) = match (s, m) {
                (Ok(s), Ok(m)) => (s, m),
                (Err(e), _) | (_, Err(e)) if exceptional(&e) => continue,
                (Err(e), _) | (_, Err(e)) => panic!("seed {seed} λ={lambda}: {e}"),
            };
            for k in 0..64 {
                let theta = (k as f64 + 0.5) * TAU / 64.0;
                assert_eq!(
                    s.value_at(theta),
                    m.value_at(theta),
                    "seed {seed} λ={lambda}"
                );
            }
            let oracle = counting_ssf_oracle(&model, lambda).unwrap();
            assert_eq!(ssf_from_mu(&m), oracle as f64);
            checked += 1;
        }
    }
    assert!(checked > 40, "{checked}");
}

#[test]
fn gap_mu_is_constant_and_equals_minus_xi() {
    let model = DenseModel::new(
        HermitianMatrix::from_real_diagonal(&[0.0, 2.0]),
        CMatrix::identity(2, 2),
        HermitianMatrix::identity(2),
    )
    .unwrap();
    let mu = mu_via_index(&model, 0.5).unwrap();
    assert!(mu.step.jumps.is_empty());
    assert_eq!(mu.step.tail, -1);
    assert_eq!(counting_ssf_oracle(&model, 0.5).unwrap(), 1);
}

#[test]
fn record_for_zero_coupling() {
    let model: Model = DenseModel::new(
        HermitianMatrix::from_real_diagonal(&[-1.0, 1.0]),
        CMatrix::zeros(1, 2),
        HermitianMatrix::identity(1),
    )
    .unwrap()
    .into();
    let r = compute_record(&model, 0.0, &SsfConfig::default());
    assert!(r.flags.is_empty(), "{:?}", r.flags);
    assert_eq!(r.xi_oracle, Some(0));
    assert_eq!(r.xi_mu, Some(0.0));
    assert_eq!(r.xi_index, Some(0.0));
    assert_eq!(r.xi_det, Some(0.0));
}

#[test]
fn signed_coupling_fixes_sign_of_xi() {
    for (j, sign) in [(1.0, 1.0), (-1.0, -1.0)] {
        let model = HalfLineModel::new(
            vec![2],
            CMatrix::from_element(1, 1, C64::new(0.9, 0.0)),
            HermitianMatrix::from_real_diagonal(&[j]),
        )
        .unwrap();
        for k in 0..7 {
            let lambda = -1.5 + 0.5 * k as f64;
            let xi = ssf_index_integral(&model, lambda).unwrap();
            assert!(sign * xi >= -1e-12, "j={j} λ={lambda}: {xi}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mu_is_nonincreasing_and_bounded_by_rank(seed in 0u64..10_000, rank in 1usize..=3, lambda in -1.95f64..1.95) {
        let model = lattice(seed, rank);
        let mu = match mu_via_index(&model, lambda) {
            Ok(mu) => mu,
            Err(e) if exceptional(&e) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        // left-continuous steps downwards at every eigenphase
        prop_assert!(mu.step.jumps.iter().all(|j| j.m > 0));
        let total: i64 = mu.step.jumps.iter().map(|j| j.m).sum();
        prop_assert!(total <= rank as i64);
        for k in 0..32 {
            let v = mu.value_at((k as f64 + 0.5) * TAU / 32.0);
            prop_assert!(v.abs() <= rank as i64);
        }
    }

    #[test]
    fn flow_does_not_depend_on_initial_grid(seed in 0u64..10_000, rank in 1usize..=3, lambda in -1.95f64..1.95) {
        let model = lattice(seed, rank);
        let coarse = FlowConfig { initial_grid: 4, ..FlowConfig::default() };
        let fine = FlowConfig { initial_grid: 48, ..FlowConfig::default() };
        let (a, b) = match (
            mu_via_flow(&model, lambda, &coarse, FlowRoute::Scattering),
            mu_via_flow(&model, lambda, &fine, FlowRoute::Scattering),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) if exceptional(&e) => return Ok(()),
            (Err(e), _) | (_, Err(e)) => panic!("{e}"),
        };
        prop_assert_eq!(a.step.tail, b.step.tail);
        prop_assert_eq!(a.step.jumps.len(), b.step.jumps.len());
        for (x, y) in a.step.jumps.iter().zip(&b.step.jumps) {
            prop_assert_eq!(x.m, y.m);
            prop_assert!((x.theta - y.theta).abs() < 1e-8);
        }
    }

    #[test]
    fn dense_xi_is_counting_oracle(seed in 0u64..10_000, lambda in -3.0f64..3.0) {
        let model = dense(seed);
        let Ok(oracle) = counting_ssf_oracle(&model, lambda) else { return Ok(()) };
        match ssf_index_integral(&model, lambda) {
            Ok(xi) => prop_assert!((xi - oracle as f64).abs() < 1e-9),
            Err(e) if exceptional(&e) => {}
            Err(e) => panic!("{e}"),
        }
    }
}
