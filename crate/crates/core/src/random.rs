//! Seeded random operators and states for property checks and sweeps.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::hilbert::{Matrix, Operator, SpaceShape, State, Vector, C64};

fn gaussian(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Operator with i.i.d. complex Gaussian entries.
pub fn random_operator(rng: &mut impl Rng, dim: usize) -> Operator {
    Operator::from_matrix(ginibre(rng, dim, dim)).expect("square")
}

pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> Operator {
    let g = ginibre(rng, dim, dim);
    let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    Operator::from_matrix(h).expect("square")
}

/// Haar-random unit vector.
pub fn random_vector(rng: &mut impl Rng, dim: usize) -> Vector {
    let v = DVector::from_fn(dim, |_, _| gaussian(rng));
    Vector::normalized(SpaceShape::single(dim), v).expect("non-zero with probability one")
}

/// Full-rank mixed state from the Ginibre ensemble.
pub fn random_state(rng: &mut impl Rng, dim: usize) -> State {
    let g = ginibre(rng, dim, dim);
    let mut rho = &g * g.adjoint();
    let tr = rho.trace();
    rho /= tr;
    // symmetrise away rounding asymmetry
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    State::new(Operator::from_matrix(rho).expect("square")).expect("Ginibre states are valid")
}

/// Random effect `0 ≤ E ≤ I`.
pub fn random_effect(rng: &mut impl Rng, dim: usize) -> Operator {
    let g = ginibre(rng, dim, dim);
    let p = Operator::from_matrix(&g * g.adjoint()).expect("square");
    let top = p.hermitian_eigenvalues().last().copied().unwrap_or(1.0);
    let scale: f64 = rng.random_range(0.2..1.0);
    p.scale(C64::new(scale / top, 0.0))
}
