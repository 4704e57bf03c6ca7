use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssf_core::engine::{counting_ssf_oracle, ssf_via_determinant, DetConfig};
use ssf_core::linalg::{apply_scalar_function, HermitianMatrix, C64, DEFAULT_ID_TOL};
use ssf_core::models::{
    herglotz_symmetry_defect, pushforward, s_at_boundary, DenseModel, HalfLineModel, Model,
    MoebiusMap, ResolventModel,
};
use ssf_core::random::{random_complex_matrix, random_hermitian, random_signature_matrix};

const MAPS: [MoebiusMap; 3] = [
    MoebiusMap::Affine { a: 2.0, b: 0.3 },
    MoebiusMap::Affine { a: 0.5, b: -1.0 },
    MoebiusMap::InverseShift { lambda0: -7.0 },
];

fn random_dense(rng: &mut ChaCha8Rng) -> DenseModel {
    let n = rng.gen_range(2..=5);
    let r = rng.gen_range(1..=n);
    let pos = rng.gen_range(0..=r);
    let h0 = random_hermitian(rng, n, 1.0);
    let g = random_complex_matrix(rng, r, n) * C64::new(0.5, 0.0);
    let j = random_signature_matrix(rng, pos, r - pos);
    DenseModel::new(h0, g, j).unwrap()
}

#[test]
fn pushed_dense_ssf_matches_counting_on_mapped_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..20 {
        let dense = random_dense(&mut rng);
        let model: Model = dense.clone().into();
        for map in MAPS {
            let pushed = pushforward(&model, map).unwrap();
            let f = |x: f64| map.apply(x);
            let fh0 = apply_scalar_function(dense.h0(), f).unwrap();
            let fh = apply_scalar_function(dense.h(), f).unwrap();
            let (e0, e1) = (fh0.eigenvalues(), fh.eigenvalues());
            for lambda in [-1.3, -0.2, 0.6, 1.7] {
                let w = map.apply(lambda);
                if e0.iter().chain(&e1).any(|&x| (x - w).abs() < 1e-6) {
                    continue;
                }
                let below = |v: &[f64]| v.iter().filter(|&&x| x < w).count() as i64;
                let expected = below(&e0) - below(&e1);
                assert_eq!(counting_ssf_oracle(&dense, lambda).unwrap(), expected);
                let Ok(xi) = ssf_via_determinant(&pushed, map.apply(lambda), &DetConfig::default())
                else {
                    continue;
                };
                assert!(
                    (xi - expected as f64).abs() < 1e-6,
                    "{map:?} λ={lambda}: {xi} vs {expected}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 150, "{checked}");
}

#[test]
fn pushed_lattice_keeps_scattering_phases() {
    let model: Model = HalfLineModel::new(
        vec![1, 2],
        ssf_core::linalg::CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.8, 0.0),
                C64::new(0.3, -0.2),
                C64::new(0.0, 0.0),
                C64::new(0.6, 0.0),
            ],
        ),
        HermitianMatrix::from_real_diagonal(&[1.0, -1.0]),
    )
    .unwrap()
    .into();
    for map in MAPS {
        let pushed = pushforward(&model, map).unwrap();
        for lambda in [-1.5, -0.4, 0.9, 1.6] {
            let mut a = s_at_boundary(&model, lambda)
                .unwrap()
                .eigenphases(DEFAULT_ID_TOL);
            let mut b = s_at_boundary(&pushed, map.apply(lambda))
                .unwrap()
                .eigenphases(DEFAULT_ID_TOL);
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "{map:?} λ={lambda}: {a:?} vs {b:?}");
            }
        }
    }
}

#[test]
fn herglotz_symmetry_survives_pushforward() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lattice: Model = HalfLineModel::rank_one(2, 0.7, -1.0).unwrap().into();
    let models = [random_dense(&mut rng).into(), lattice];
    for model in &models {
        for map in MAPS {
            let pushed = pushforward(model, map).unwrap();
            for z in [C64::new(0.3, 0.5), C64::new(-2.0, 0.01), C64::new(4.0, 3.0)] {
                let d = herglotz_symmetry_defect(&pushed, z).unwrap();
                assert!(d < 1e-9 * (1.0 + pushed.scale()), "{map:?} {z}: {d}");
            }
        }
    }
}

#[test]
fn inverse_shift_pole_inside_spectrum_is_rejected() {
    let model: Model = HalfLineModel::rank_one(1, 1.0, 1.0).unwrap().into();
    assert!(pushforward(&model, MoebiusMap::InverseShift { lambda0: 0.5 }).is_err());
    assert!(pushforward(&model, MoebiusMap::Affine { a: -1.0, b: 0.0 }).is_err());
}
