//! Dense complex linear algebra on (possibly bipartite) finite Hilbert spaces.
//!
//! Basis convention: number basis `|0>..|d-1>` on every factor; a composite
//! index `(i_s, i_r)` is flattened row-major with the system first, so
//! `flat = i_s * d_r + i_r`.

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Entry tolerance used for hermiticity checks.
pub const EPS_HERMITIAN: f64 = 1e-10;
/// Smallest eigenvalue tolerated for a positive operator.
pub const EPS_PSD: f64 = 1e-10;
/// Allowed deviation of a state's trace from one.
pub const EPS_TRACE: f64 = 1e-10;
/// Allowed deviation of a vector's norm from one.
pub const EPS_NORM: f64 = 1e-10;

/// Default bound on the discarded weight of a truncated coherent state.
pub const DEFAULT_TRUNCATION_BOUND: f64 = 1e-6;

pub type Matrix = DMatrix<C64>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub struct SpaceShape {
    factors: Vec<usize>,
}

impl SpaceShape {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.contains(&0) {
            return Err(Error::Shape(format!(
                "factor dimensions must be positive, got {factors:?}"
            )));
        }
        Ok(Self { factors })
    }

    pub fn single(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { factors: vec![dim] }
    }

    pub fn bipartite(system: usize, reference: usize) -> Self {
        assert!(system >= 1 && reference >= 1, "dimensions must be positive");
        Self {
            factors: vec![system, reference],
        }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().product()
    }

    pub fn is_bipartite(&self) -> bool {
        self.factors.len() == 2
    }

    /// `(system, reference)` dimensions of a bipartite shape.
    pub fn split(&self) -> Result<(usize, usize)> {
        match self.factors.as_slice() {
            &[s, r] => Ok((s, r)),
            other => Err(Error::Shape(format!(
                "expected a bipartite shape, got factors {other:?}"
            ))),
        }
    }

    pub fn concat(&self, other: &SpaceShape) -> SpaceShape {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        SpaceShape { factors }
    }

    pub(crate) fn ensure_eq(&self, other: &SpaceShape, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.factors, other.factors
            )))
        }
    }
}

/// A square complex matrix tagged with the shape of the space it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    shape: SpaceShape,
    matrix: Matrix,
}

impl Operator {
    pub fn new(shape: SpaceShape, matrix: Matrix) -> Result<Self> {
        let d = shape.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Shape(format!(
                "matrix is {}x{}, shape {:?} needs {d}x{d}",
                matrix.nrows(),
                matrix.ncols(),
                shape.factors
            )));
        }
        Ok(Self { shape, matrix })
    }

    /// Operator on a single factor of dimension `matrix.nrows()`.
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        let shape = SpaceShape::new(vec![matrix.nrows()])?;
        Self::new(shape, matrix)
    }

    pub fn from_fn(shape: SpaceShape, f: impl FnMut(usize, usize) -> C64) -> Self {
        let d = shape.dim();
        Self {
            shape,
            matrix: Matrix::from_fn(d, d, f),
        }
    }

    pub fn identity(shape: SpaceShape) -> Self {
        let d = shape.dim();
        Self {
            shape,
            matrix: Matrix::identity(d, d),
        }
    }

    pub fn zeros(shape: SpaceShape) -> Self {
        let d = shape.dim();
        Self {
            shape,
            matrix: Matrix::zeros(d, d),
        }
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let d = values.len();
        Self {
            shape: SpaceShape::single(d),
            matrix: Matrix::from_fn(d, d, |i, j| {
                if i == j {
                    values[i]
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
        }
    }

    /// `|i><j|` on a single factor of dimension `dim`.
    pub fn matrix_unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        m[(i, j)] = C64::new(1.0, 0.0);
        Self {
            shape: SpaceShape::single(dim),
            matrix: m,
        }
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    /// Same entries, reinterpreted on another shape of equal total dimension.
    pub fn with_shape(self, shape: SpaceShape) -> Result<Self> {
        Self::new(shape, self.matrix)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            matrix: &self.matrix * c,
        }
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.shape.ensure_eq(&other.shape, "add")?;
        Ok(Self {
            shape: self.shape.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.shape.ensure_eq(&other.shape, "sub")?;
        Ok(Self {
            shape: self.shape.clone(),
            matrix: &self.matrix - &other.matrix,
        })
    }

    pub fn mul(&self, other: &Operator) -> Result<Self> {
        self.shape.ensure_eq(&other.shape, "mul")?;
        Ok(Self {
            shape: self.shape.clone(),
            matrix: &self.matrix * &other.matrix,
        })
    }

    /// `U A U^*`.
    pub fn conjugate_by(&self, u: &Operator) -> Result<Self> {
        self.shape.ensure_eq(&u.shape, "conjugation")?;
        Ok(Self {
            shape: self.shape.clone(),
            matrix: &u.matrix * &self.matrix * u.matrix.adjoint(),
        })
    }

    /// `A ⊗ B` in (self, other) factor order.
    pub fn tensor(&self, other: &Operator) -> Operator {
        Operator {
            shape: self.shape.concat(&other.shape),
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    /// Partial trace over the second factor of a bipartite operator.
    pub fn partial_trace_reference(&self) -> Result<Operator> {
        let (ds, dr) = self.shape.split()?;
        let m = &self.matrix;
        let out = Matrix::from_fn(ds, ds, |i, j| {
            (0..dr).map(|k| m[(i * dr + k, j * dr + k)]).sum()
        });
        Ok(Operator {
            shape: SpaceShape::single(ds),
            matrix: out,
        })
    }

    /// Partial trace over the first factor of a bipartite operator.
    pub fn partial_trace_system(&self) -> Result<Operator> {
        let (ds, dr) = self.shape.split()?;
        let m = &self.matrix;
        let out = Matrix::from_fn(dr, dr, |r, s| {
            (0..ds).map(|k| m[(k * dr + r, k * dr + s)]).sum()
        });
        Ok(Operator {
            shape: SpaceShape::single(dr),
            matrix: out,
        })
    }

    /// `tr[A B]` without forming the product.
    pub fn trace_pairing(&self, other: &Operator) -> Result<C64> {
        self.shape.ensure_eq(&other.shape, "trace pairing")?;
        let a = &self.matrix;
        let b = &other.matrix;
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += a[(i, j)] * b[(j, i)];
            }
        }
        Ok(acc)
    }

    pub fn max_entry_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.matrix
            .clone()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.matrix;
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() < tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Eigenvector of the largest eigenvalue of the Hermitian part.
    pub fn top_eigenvector(&self) -> (f64, DVector<C64>) {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let (k, &lambda) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty spectrum");
        (lambda, eig.eigenvectors.column(k).into_owned())
    }
}

/// A unit vector; `projector` gives the pure state `P[φ] = |φ><φ|`.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector {
    shape: SpaceShape,
    amplitudes: DVector<C64>,
}

impl Vector {
    pub fn new(shape: SpaceShape, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != shape.dim() {
            return Err(Error::Shape(format!(
                "vector of length {} for shape {:?}",
                amplitudes.len(),
                shape.factors
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > EPS_NORM {
            return Err(Error::InvalidState(format!("vector norm {norm} is not 1")));
        }
        Ok(Self { shape, amplitudes })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(shape: SpaceShape, amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm.is_nan() || norm <= 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalise a zero vector".into()));
        }
        Self::new(shape, amplitudes.unscale(norm))
    }

    /// Number eigenvector `|n>` in dimension `dim`.
    pub fn basis(dim: usize, n: usize) -> Self {
        assert!(n < dim, "basis index {n} out of range for dimension {dim}");
        let mut v = DVector::zeros(dim);
        v[n] = C64::new(1.0, 0.0);
        Self {
            shape: SpaceShape::single(dim),
            amplitudes: v,
        }
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn tensor(&self, other: &Vector) -> Vector {
        Vector {
            shape: self.shape.concat(&other.shape),
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }

    pub fn projector(&self) -> Operator {
        Operator {
            shape: self.shape.clone(),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    pub fn pure_state(&self) -> State {
        State {
            op: self.projector(),
        }
    }

    /// `<φ|A φ>`.
    pub fn quadratic_form(&self, a: &Operator) -> Result<C64> {
        self.shape.ensure_eq(a.shape(), "quadratic form")?;
        Ok(self.amplitudes.dotc(&(a.matrix() * &self.amplitudes)))
    }
}

/// A density operator: Hermitian, positive, unit trace (validated on construction).
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    op: Operator,
}

impl State {
    pub fn new(op: Operator) -> Result<Self> {
        let herm = op.hermiticity_defect();
        if herm >= EPS_HERMITIAN {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > EPS_TRACE || tr.im.abs() > EPS_TRACE {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = op.hermitian_eigenvalues()[0];
        if min < -EPS_PSD {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { op })
    }

    /// Wraps an operator known to be a state (e.g. the image of a state under a
    /// positive trace-preserving map) without re-validating it.
    pub(crate) fn from_trusted(op: Operator) -> Self {
        Self { op }
    }

    pub fn maximally_mixed(shape: SpaceShape) -> Self {
        let d = shape.dim() as f64;
        Self {
            op: Operator::identity(shape).scale(C64::new(1.0 / d, 0.0)),
        }
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    pub fn shape(&self) -> &SpaceShape {
        self.op.shape()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn tensor(&self, other: &State) -> State {
        State {
            op: self.op.tensor(&other.op),
        }
    }

    /// Reduced state on the system factor.
    pub fn reduce_to_system(&self) -> Result<State> {
        Ok(State {
            op: self.op.partial_trace_reference()?,
        })
    }

    /// Reduced state on the reference factor.
    pub fn reduce_to_reference(&self) -> Result<State> {
        Ok(State {
            op: self.op.partial_trace_system()?,
        })
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.op
            .hermitian_eigenvalues()
            .iter()
            .filter(|&&l| l > tol)
            .count()
    }
}

/// Trace distance `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &State, sigma: &State) -> Result<f64> {
    let diff = rho.operator().sub(sigma.operator())?;
    let sum: f64 = diff.into_matrix().singular_values().iter().sum();
    Ok(0.5 * sum)
}

/// `tr[ρ A]`.
pub fn expectation(rho: &State, a: &Operator) -> Result<C64> {
    rho.operator().trace_pairing(a)
}

/// Truncated, renormalised coherent state together with its discarded weight.
#[derive(Clone, Debug)]
pub struct CoherentState {
    pub vector: Vector,
    /// Number of the lowest retained Fock level: basis vector `i` stands for `|offset + i>`.
    pub offset: usize,
    /// Poisson weight of the discarded levels, before renormalisation.
    pub truncation_weight: f64,
}

/// Coherent state `|β>` truncated to `n < dim` and renormalised.
pub fn coherent_state(beta: C64, dim: usize) -> CoherentState {
    coherent_state_window(beta, dim, 0)
}

/// Coherent state restricted to the Fock levels `offset ≤ n < offset + dim`.
///
/// Every quantity built from a number operator, its phase shifts and a
/// covariant phase POVM depends only on differences of number eigenvalues, so
/// a window of an oscillator ladder is modelled by relabelling `n ↦ n − offset`.
pub fn coherent_state_window(beta: C64, dim: usize, offset: usize) -> CoherentState {
    assert!(dim >= 1, "dimension must be positive");
    let r = beta.norm();
    let phase = beta.arg();
    let mut amps = DVector::<C64>::zeros(dim);
    if r == 0.0 {
        // with offset > 0 the vacuum lies outside the window; keep the lowest level
        amps[0] = C64::new(1.0, 0.0);
    } else {
        // log|c_n| = n ln r − ½ ln n!, shifted by its maximum to stay finite
        let ln_r = r.ln();
        let logs: Vec<f64> = (offset..offset + dim)
            .map(|n| n as f64 * ln_r - 0.5 * ln_factorial(n))
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (i, l) in logs.iter().enumerate() {
            amps[i] = C64::from_polar((l - top).exp(), (offset + i) as f64 * phase);
        }
    }
    let vector = Vector::normalized(SpaceShape::single(dim), amps)
        .expect("coherent amplitudes are non-zero");
    let truncation_weight = if r == 0.0 {
        if offset == 0 {
            0.0
        } else {
            1.0
        }
    } else {
        (poisson_head(r * r, offset) + poisson_tail(r * r, offset + dim)).min(1.0)
    };
    CoherentState {
        vector,
        offset,
        truncation_weight,
    }
}

/// Window offset placing `dim` levels as symmetrically as possible around `|β|²`.
pub fn centred_window_offset(beta: C64, dim: usize) -> usize {
    let mean = beta.norm_sqr().round() as usize;
    mean.saturating_sub(dim / 2)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Like [`coherent_state`] but refuses truncations that discard more than `bound`.
pub fn coherent_state_strict(beta: C64, dim: usize, bound: f64) -> Result<CoherentState> {
    let c = coherent_state(beta, dim);
    if c.truncation_weight > bound {
        return Err(Error::Truncation {
            weight: c.truncation_weight,
            bound,
        });
    }
    Ok(c)
}

/// `P(X < d)` for `X ~ Poisson(mean)`.
fn poisson_head(mean: f64, d: usize) -> f64 {
    let ln_mean = mean.ln();
    let mut ln_term = -mean;
    let mut total = 0.0;
    for n in 0..d {
        if n > 0 {
            ln_term += ln_mean - (n as f64).ln();
        }
        total += ln_term.exp();
    }
    total
}

/// `P(X ≥ d)` for `X ~ Poisson(mean)`, summed directly over the tail.
fn poisson_tail(mean: f64, d: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let ln_mean = mean.ln();
    let mut ln_term = -mean + d as f64 * ln_mean - ln_factorial(d);
    let mut total = 0.0;
    let mut n = d;
    loop {
        let term = ln_term.exp();
        total += term;
        n += 1;
        ln_term += ln_mean - (n as f64).ln();
        if n as f64 > mean && ln_term.exp() < total * 1e-18 {
            break;
        }
        if n > d + 100_000 {
            break;
        }
    }
    total.min(1.0)
}
