//! Number operators, phase shifts, and the symmetrisation map `τ`.
//!
//! `τ(A) = Σ_n P_n A P_n` keeps the block-diagonal part of `A` with respect to
//! the charge sectors of a number operator. For the circle group a sector is
//! an eigenvalue; for the cyclic group `Z_d` it is an eigenvalue modulo `d`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::{Matrix, Operator, SpaceShape, State, C64};

/// Maps an angle to `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// The symmetry group generated by a number operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum PhaseGroup {
    /// `U(1)`, all phase shifts.
    Circle,
    /// `Z_d`, phase shifts by multiples of `2π/d`.
    Cyclic(u32),
}

/// `N = Σ n P_n`, diagonal in the number basis; repeated eigenvalues are degenerate sectors.
#[derive(Clone, Debug, PartialEq)]
pub struct NumberOperator {
    shape: SpaceShape,
    eigenvalues: Vec<i64>,
    group: PhaseGroup,
}

impl NumberOperator {
    pub fn new(eigenvalues: Vec<i64>) -> Result<Self> {
        let shape = SpaceShape::new(vec![eigenvalues.len()])?;
        Ok(Self {
            shape,
            eigenvalues,
            group: PhaseGroup::Circle,
        })
    }

    /// The oscillator number operator with spectrum `0..dim`.
    pub fn number(dim: usize) -> Self {
        Self::new((0..dim as i64).collect()).expect("dimension must be positive")
    }

    /// Same eigenvalues, symmetry group reduced to `Z_order`.
    pub fn cyclic(mut self, order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidOperator(
                "cyclic order must be positive".into(),
            ));
        }
        self.group = PhaseGroup::Cyclic(order);
        Ok(self)
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[i64] {
        &self.eigenvalues
    }

    pub fn group(&self) -> PhaseGroup {
        self.group
    }

    /// `max n − min n`.
    pub fn spread(&self) -> i64 {
        let max = self.eigenvalues.iter().max().copied().unwrap_or(0);
        let min = self.eigenvalues.iter().min().copied().unwrap_or(0);
        max - min
    }

    /// Sector label of basis index `i`.
    pub fn charge(&self, i: usize) -> i64 {
        match self.group {
            PhaseGroup::Circle => self.eigenvalues[i],
            PhaseGroup::Cyclic(d) => self.eigenvalues[i].rem_euclid(d as i64),
        }
    }

    /// Distinct sectors with their basis indices, ordered by label.
    pub fn sectors(&self) -> Vec<(i64, Vec<usize>)> {
        let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for i in 0..self.dim() {
            map.entry(self.charge(i)).or_default().push(i);
        }
        map.into_iter().collect()
    }

    /// Spectral projection onto one sector.
    pub fn projector(&self, charge: i64) -> Operator {
        Operator::from_fn(self.shape.clone(), |i, j| {
            if i == j && self.charge(i) == charge {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn as_operator(&self) -> Operator {
        Operator::from_fn(self.shape.clone(), |i, j| {
            if i == j {
                C64::new(self.eigenvalues[i] as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// `U(θ) = e^{iNθ}`.
    pub fn phase_shift(&self, theta: f64) -> Operator {
        let theta = wrap_angle(theta);
        Operator::from_fn(self.shape.clone(), |i, j| {
            if i == j {
                C64::from_polar(1.0, self.eigenvalues[i] as f64 * theta)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

/// `N_T = N_S ⊗ I + I ⊗ N_R` on the composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeNumber {
    pub system: NumberOperator,
    pub reference: NumberOperator,
    total: NumberOperator,
}

impl CompositeNumber {
    pub fn new(system: NumberOperator, reference: NumberOperator) -> Result<Self> {
        if system.group() != reference.group() {
            return Err(Error::InvalidOperator(format!(
                "system and reference generate different groups: {:?} vs {:?}",
                system.group(),
                reference.group()
            )));
        }
        let (ds, dr) = (system.dim(), reference.dim());
        let mut eigenvalues = Vec::with_capacity(ds * dr);
        for &n in system.eigenvalues() {
            for &r in reference.eigenvalues() {
                eigenvalues.push(n + r);
            }
        }
        let total = NumberOperator {
            shape: SpaceShape::bipartite(ds, dr),
            eigenvalues,
            group: system.group(),
        };
        Ok(Self {
            system,
            reference,
            total,
        })
    }

    pub fn total(&self) -> &NumberOperator {
        &self.total
    }
}

fn sector_mask(a: &Operator, n: &NumberOperator) -> Result<Operator> {
    a.shape().ensure_eq(n.shape(), "symmetrisation")?;
    let m = a.matrix();
    Operator::new(
        a.shape().clone(),
        Matrix::from_fn(a.dim(), a.dim(), |i, j| {
            if n.charge(i) == n.charge(j) {
                m[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        }),
    )
}

/// `τ(A) = Σ_n P_n A P_n`.
pub fn tau(a: &Operator, n: &NumberOperator) -> Result<Operator> {
    sector_mask(a, n)
}

/// Predual of `τ`; same projector-sum form, trace preserving.
pub fn tau_star(rho: &State, n: &NumberOperator) -> Result<State> {
    Ok(State::from_trusted(sector_mask(rho.operator(), n)?))
}

/// Uniform-grid Haar average `(1/K) Σ_k U(θ_k) A U(θ_k)^*`, `θ_k = −π + 2πk/K`.
///
/// The integrand is a trigonometric polynomial whose frequencies are the
/// eigenvalue differences, so the grid average is exact once `K` exceeds the
/// spread of the spectrum.
pub fn twirl(a: &Operator, n: &NumberOperator, points: usize) -> Result<Operator> {
    a.shape().ensure_eq(n.shape(), "twirl")?;
    let spread = n.spread();
    if (points as i64) <= spread {
        return Err(Error::Quadrature { points, spread });
    }
    let m = a.matrix();
    let ev = n.eigenvalues();
    let d = a.dim();
    let mut out = Matrix::zeros(d, d);
    for k in 0..points {
        let theta = -PI + 2.0 * PI * k as f64 / points as f64;
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += C64::from_polar(1.0, (ev[i] - ev[j]) as f64 * theta) * m[(i, j)];
            }
        }
    }
    out /= C64::new(points as f64, 0.0);
    Operator::new(a.shape().clone(), out)
}

/// Max-entry magnitude of `[A, N]`.
pub fn invariance_defect(a: &Operator, n: &NumberOperator) -> Result<f64> {
    a.shape().ensure_eq(n.shape(), "invariance defect")?;
    let m = a.matrix();
    let ev = n.eigenvalues();
    let mut worst = 0.0f64;
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            // [A, N]_{ij} = A_ij (n_j − n_i)
            worst = worst.max((m[(i, j)] * (ev[j] - ev[i]) as f64).norm());
        }
    }
    Ok(worst)
}
