//! Seeded generators for random test instances.

use nalgebra::DMatrix;
use rand::Rng;

use crate::linalg::{CMatrix, HermitianMatrix, ProjectionMatrix, UnitaryMatrix, C64};

pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// Hermitian matrix with entries of size about `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> HermitianMatrix {
    let x = random_complex_matrix(rng, n, n);
    HermitianMatrix::from_hermitian_part(&x.scale(scale))
}

/// Hermitian matrix with prescribed eigenvalues in a random eigenbasis.
pub fn random_hermitian_with_spectrum<R: Rng + ?Sized>(
    rng: &mut R,
    eigenvalues: &[f64],
) -> HermitianMatrix {
    let n = eigenvalues.len();
    let u = random_unitary(rng, n).into_inner();
    let mut scaled = u.clone();
    for (j, &d) in eigenvalues.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= C64::new(d, 0.0);
        }
    }
    HermitianMatrix::from_hermitian_part(&(scaled * u.adjoint()))
}

/// Haar-like unitary from the QR factorization of a random matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> UnitaryMatrix {
    let x = random_complex_matrix(rng, n, n);
    let qr = x.qr();
    let q = qr.q();
    let r = qr.r();
    // fix the phase of each column so the distribution does not depend on QR conventions
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    UnitaryMatrix::new(q).expect("QR factor is unitary")
}

/// Positive semidefinite matrix `X X†` of the given rank.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> HermitianMatrix {
    let x = random_complex_matrix(rng, n, rank);
    HermitianMatrix::from_hermitian_part(&(&x * x.adjoint()))
}

/// Orthogonal projection of the given rank onto a random subspace.
pub fn random_projection<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> ProjectionMatrix {
    let u = random_unitary(rng, n).into_inner();
    ProjectionMatrix::onto_columns(&u.columns(0, rank).into_owned())
}

/// Real diagonal signature matrix with `pos` entries `+1` followed by `neg` entries `-1`,
/// in a random orthonormal basis and scaled by random magnitudes in `[0.5, 2]`.
pub fn random_signature_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    pos: usize,
    neg: usize,
) -> HermitianMatrix {
    let mut values: Vec<f64> = (0..pos).map(|_| rng.gen_range(0.5..2.0)).collect();
    values.extend((0..neg).map(|_| -rng.gen_range(0.5..2.0)));
    random_hermitian_with_spectrum(rng, &values)
}
