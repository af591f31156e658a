//! Covariant phase POVMs on a finite number-basis space.
//!
//! A POVM is stored as one effect per arc of an equal-width partition of the
//! circle. The exact measure behind the bins is known for every built-in kind,
//! which is what [`PhasePovm::fourier_moment`] and
//! [`PhasePovm::quadrature_rule`] expose.
//!
//! Kernel convention: with `U(θ) = e^{iNθ}`, the canonical phase has
//! `<r|F(dθ)|s> = e^{i(r−s)θ} dθ/2π`, the sign for which
//! `U(θ) F(X) U(θ)^* = F(X + θ)` holds exactly.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::{Operator, SpaceShape, State, EPS_PSD};
use crate::symmetry::{wrap_angle, NumberOperator};
use crate::C64;

/// Tolerance for `Σ_k F(X_k) = I` on user-supplied effects.
const RESOLUTION_TOL: f64 = 1e-10;

/// `K` equal arcs `[offset + 2πk/K, offset + 2π(k+1)/K)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ArcPartition {
    bins: usize,
    offset: f64,
}

impl ArcPartition {
    /// Arcs starting at `−π`.
    pub fn new(bins: usize) -> Result<Self> {
        Self::with_offset(bins, -PI)
    }

    /// Arcs shifted so that each midpoint sits on `−π + 2πk/K`; for even `K`
    /// bin `K/2` is centred on zero.
    pub fn centred(bins: usize) -> Result<Self> {
        Self::with_offset(bins, -PI - PI / bins.max(1) as f64)
    }

    pub fn with_offset(bins: usize, offset: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidPovm("bin count must be positive".into()));
        }
        Ok(Self { bins, offset })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn width(&self) -> f64 {
        2.0 * PI / self.bins as f64
    }

    /// `[a, b)` of arc `k`, with `a` in unwrapped coordinates.
    pub fn arc(&self, k: usize) -> (f64, f64) {
        let w = self.width();
        (self.offset + k as f64 * w, self.offset + (k + 1) as f64 * w)
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        let (a, b) = self.arc(k);
        wrap_angle(0.5 * (a + b))
    }

    /// Index of the arc containing `theta`.
    pub fn bin_of(&self, theta: f64) -> usize {
        let x = (theta - self.offset).rem_euclid(2.0 * PI) / self.width();
        // absorb rounding just below an arc edge
        ((x + 1e-9).floor() as usize) % self.bins
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum PovmKind {
    /// Canonical phase, binned.
    CanonicalBinned,
    /// Discrete Fourier (sharp) angle of the cyclic model.
    CyclicSharp,
    /// The trivial covariant POVM `F(X) = |X|/2π · I`.
    Uniform,
    /// Arbitrary binned effects; only the bin data are known.
    Custom,
}

#[derive(Clone, Debug)]
pub struct PhasePovm {
    shape: SpaceShape,
    partition: ArcPartition,
    effects: Vec<Operator>,
    kind: PovmKind,
    /// Representative angle of each bin: the midpoint, or the atom for sharp kinds.
    tags: Vec<f64>,
}

/// Canonical-phase effect of an arbitrary arc `[a, b)`.
pub fn canonical_arc_effect(dim: usize, a: f64, b: f64) -> Operator {
    Operator::from_fn(SpaceShape::single(dim), |r, s| {
        let p = r as f64 - s as f64;
        if r == s {
            C64::new((b - a) / (2.0 * PI), 0.0)
        } else {
            (C64::from_polar(1.0, p * b) - C64::from_polar(1.0, p * a))
                / C64::new(0.0, 2.0 * PI * p)
        }
    })
}

/// Canonical phase on the default partition.
pub fn canonical_phase(dim: usize, bins: usize) -> Result<PhasePovm> {
    canonical_phase_on(dim, ArcPartition::new(bins)?)
}

pub fn canonical_phase_on(dim: usize, partition: ArcPartition) -> Result<PhasePovm> {
    if dim == 0 {
        return Err(Error::Shape("dimension must be positive".into()));
    }
    let effects = (0..partition.bins())
        .map(|k| {
            let (a, b) = partition.arc(k);
            canonical_arc_effect(dim, a, b)
        })
        .collect();
    let tags = (0..partition.bins())
        .map(|k| partition.midpoint(k))
        .collect();
    Ok(PhasePovm {
        shape: SpaceShape::single(dim),
        partition,
        effects,
        kind: PovmKind::CanonicalBinned,
        tags,
    })
}

/// Projections onto the Fourier vectors `f_k = d^{-1/2} Σ_n e^{i n 2πk/d} |n>`,
/// one per arc of the `d`-bin partition.
pub fn cyclic_angle_pvm(dim: usize) -> Result<PhasePovm> {
    if dim == 0 {
        return Err(Error::Shape("dimension must be positive".into()));
    }
    let partition = ArcPartition::new(dim)?;
    let mut effects = vec![Operator::zeros(SpaceShape::single(dim)); dim];
    let mut tags = vec![0.0; dim];
    for k in 0..dim {
        let atom = 2.0 * PI * k as f64 / dim as f64;
        // atom 2πk/d lies in arc (k + ⌊d/2⌋) mod d
        let bin = (k + dim / 2) % dim;
        effects[bin] = Operator::from_fn(SpaceShape::single(dim), |r, s| {
            C64::from_polar(1.0 / dim as f64, (r as f64 - s as f64) * atom)
        });
        tags[bin] = wrap_angle(atom);
    }
    Ok(PhasePovm {
        shape: SpaceShape::single(dim),
        partition,
        effects,
        kind: PovmKind::CyclicSharp,
        tags,
    })
}

/// `F(X) = |X|/2π · I`: covariant for every number operator, carries no phase information.
pub fn uniform_phase(dim: usize, bins: usize) -> Result<PhasePovm> {
    if dim == 0 {
        return Err(Error::Shape("dimension must be positive".into()));
    }
    let partition = ArcPartition::new(bins)?;
    let weight = C64::new(1.0 / bins as f64, 0.0);
    Ok(PhasePovm {
        shape: SpaceShape::single(dim),
        partition,
        effects: vec![Operator::identity(SpaceShape::single(dim)).scale(weight); bins],
        kind: PovmKind::Uniform,
        tags: (0..bins).map(|k| partition.midpoint(k)).collect(),
    })
}

/// Discretisation of `∫ g(θ) F(dθ)` as `Σ_j g(θ_j) W_j`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<Operator>,
    /// Largest `|m|` for which `g(θ) = e^{imθ}` is integrated exactly; `None` if only approximate.
    pub exact_up_to: Option<i64>,
}

impl PhasePovm {
    /// Binned POVM from explicit effects; tags default to arc midpoints.
    pub fn custom(
        partition: ArcPartition,
        effects: Vec<Operator>,
        tags: Option<Vec<f64>>,
    ) -> Result<Self> {
        if effects.len() != partition.bins() {
            return Err(Error::InvalidPovm(format!(
                "{} effects for {} bins",
                effects.len(),
                partition.bins()
            )));
        }
        let shape = effects[0].shape().clone();
        if shape.factors().len() != 1 {
            return Err(Error::Shape("phase POVMs act on a single factor".into()));
        }
        let mut sum = Operator::zeros(shape.clone());
        for (k, e) in effects.iter().enumerate() {
            e.shape().ensure_eq(&shape, "effect shape")?;
            if !e.is_hermitian(1e-10) {
                return Err(Error::InvalidPovm(format!("effect {k} is not Hermitian")));
            }
            let ev = e.hermitian_eigenvalues();
            if ev[0] < -EPS_PSD || *ev.last().unwrap() > 1.0 + EPS_PSD {
                return Err(Error::InvalidPovm(format!(
                    "effect {k} is not between 0 and I"
                )));
            }
            sum = sum.add(e)?;
        }
        let defect = sum
            .sub(&Operator::identity(shape.clone()))?
            .max_entry_norm();
        if defect > RESOLUTION_TOL {
            return Err(Error::InvalidPovm(format!(
                "effects sum to identity only within {defect:.3e}"
            )));
        }
        let tags = match tags {
            Some(t) if t.len() == partition.bins() => t.into_iter().map(wrap_angle).collect(),
            Some(t) => {
                return Err(Error::InvalidPovm(format!(
                    "{} tags for {} bins",
                    t.len(),
                    partition.bins()
                )))
            }
            None => (0..partition.bins())
                .map(|k| partition.midpoint(k))
                .collect(),
        };
        Ok(Self {
            shape,
            partition,
            effects,
            kind: PovmKind::Custom,
            tags,
        })
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn bins(&self) -> usize {
        self.partition.bins()
    }

    pub fn partition(&self) -> &ArcPartition {
        &self.partition
    }

    pub fn effects(&self) -> &[Operator] {
        &self.effects
    }

    pub fn effect(&self, k: usize) -> &Operator {
        &self.effects[k]
    }

    pub fn kind(&self) -> PovmKind {
        self.kind
    }

    pub fn tag(&self, k: usize) -> f64 {
        self.tags[k]
    }

    /// Sum of effects over a set of bins.
    pub fn effect_sum(&self, bins: &[usize]) -> Result<Operator> {
        if bins.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut sum = Operator::zeros(self.shape.clone());
        for &k in bins {
            if k >= self.bins() {
                return Err(Error::InvalidPovm(format!("bin {k} out of range")));
            }
            sum = sum.add(&self.effects[k])?;
        }
        Ok(sum)
    }

    /// `∫ e^{ipθ} F(dθ)`; exact for the built-in kinds, bin-tagged for custom POVMs.
    pub fn fourier_moment(&self, p: i64) -> Operator {
        let d = self.dim();
        let shape = self.shape.clone();
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        match self.kind {
            PovmKind::CanonicalBinned => {
                Operator::from_fn(
                    shape,
                    |r, s| {
                        if s as i64 - r as i64 == p {
                            one
                        } else {
                            zero
                        }
                    },
                )
            }
            PovmKind::Uniform => {
                if p == 0 {
                    Operator::identity(shape)
                } else {
                    Operator::zeros(shape)
                }
            }
            PovmKind::CyclicSharp => Operator::from_fn(shape, |r, s| {
                if (p + r as i64 - s as i64).rem_euclid(d as i64) == 0 {
                    one
                } else {
                    zero
                }
            }),
            PovmKind::Custom => {
                let mut acc = Operator::zeros(shape);
                for (e, &t) in self.effects.iter().zip(&self.tags) {
                    acc = acc
                        .add(&e.scale(C64::from_polar(1.0, p as f64 * t)))
                        .expect("same shape");
                }
                acc
            }
        }
    }

    /// Point-and-weight rule for integrals against this POVM.
    ///
    /// Canonical and uniform kinds sample their densities on the midpoints of a
    /// `points`-grid; the sharp kind uses its atoms (`points` is ignored);
    /// custom POVMs fall back to bin midpoints weighted by the bin effects.
    pub fn quadrature_rule(&self, points: usize) -> Result<QuadratureRule> {
        let d = self.dim();
        let grid = |q: usize| -> Vec<f64> {
            (0..q)
                .map(|j| -PI + 2.0 * PI * (j as f64 + 0.5) / q as f64)
                .collect()
        };
        match self.kind {
            PovmKind::CanonicalBinned => {
                if points == 0 {
                    return Err(Error::Quadrature {
                        points,
                        spread: d as i64 - 1,
                    });
                }
                let nodes = grid(points);
                let weights = nodes
                    .iter()
                    .map(|&t| {
                        Operator::from_fn(self.shape.clone(), |r, s| {
                            C64::from_polar(1.0 / points as f64, (r as f64 - s as f64) * t)
                        })
                    })
                    .collect();
                Ok(QuadratureRule {
                    nodes,
                    weights,
                    exact_up_to: Some(points as i64 - d as i64),
                })
            }
            PovmKind::Uniform => {
                if points == 0 {
                    return Err(Error::Quadrature { points, spread: 0 });
                }
                let nodes = grid(points);
                let w = Operator::identity(self.shape.clone())
                    .scale(C64::new(1.0 / points as f64, 0.0));
                Ok(QuadratureRule {
                    weights: vec![w; points],
                    nodes,
                    exact_up_to: Some(points as i64 - 1),
                })
            }
            PovmKind::CyclicSharp => Ok(QuadratureRule {
                nodes: self.tags.clone(),
                weights: self.effects.clone(),
                exact_up_to: Some(i64::MAX),
            }),
            PovmKind::Custom => Ok(QuadratureRule {
                nodes: self.tags.clone(),
                weights: self.effects.clone(),
                exact_up_to: None,
            }),
        }
    }

    /// Outcome distribution `p_k = tr[ω F(X_k)]`.
    pub fn measure_of_state(&self, omega: &State) -> Result<Vec<f64>> {
        omega.shape().ensure_eq(&self.shape, "measure of state")?;
        self.effects
            .iter()
            .map(|e| omega.operator().trace_pairing(e).map(|z| z.re))
            .collect()
    }

    /// Largest eigenvalue of `Σ_{k ∈ bins} F(X_k)`, i.e. `sup_φ <φ|F(X)φ>`.
    pub fn norm1_diagnostic(&self, bins: &[usize]) -> Result<f64> {
        let sum = self.effect_sum(bins)?;
        Ok(*sum.hermitian_eigenvalues().last().expect("non-empty"))
    }
}

/// A number operator together with a phase POVM meant to be covariant for it.
#[derive(Clone, Debug)]
pub struct NumberPhasePair {
    pub number: NumberOperator,
    pub phase: PhasePovm,
}

impl NumberPhasePair {
    pub fn new(number: NumberOperator, phase: PhasePovm) -> Result<Self> {
        number
            .shape()
            .ensure_eq(phase.shape(), "number/phase pair")?;
        Ok(Self { number, phase })
    }
}

/// `max_{j,k} ‖U(jw) F(X_k) U(jw)^* − F(X_{k+j})‖` over bin-width shifts `jw`.
pub fn covariance_defect(pair: &NumberPhasePair) -> Result<f64> {
    let povm = &pair.phase;
    pair.number.shape().ensure_eq(povm.shape(), "covariance")?;
    let k_bins = povm.bins();
    let w = povm.partition().width();
    let mut worst = 0.0f64;
    for j in 0..k_bins {
        let u = pair.number.phase_shift(j as f64 * w);
        for k in 0..k_bins {
            let moved = povm.effect(k).conjugate_by(&u)?;
            let target = povm.effect((k + j) % k_bins);
            worst = worst.max(moved.sub(target)?.max_entry_norm());
        }
    }
    Ok(worst)
}

/// Max-entry distance of `Σ_k F(X_k)` from the identity.
pub fn resolution_defect(povm: &PhasePovm) -> f64 {
    let all: Vec<usize> = (0..povm.bins()).collect();
    let sum = povm.effect_sum(&all).expect("non-empty");
    sum.sub(&Operator::identity(povm.shape().clone()))
        .expect("same shape")
        .max_entry_norm()
}

/// `max_{k,l} ‖F_k F_l − δ_{kl} F_k‖`; zero iff the POVM is projection valued.
pub fn sharpness_defect(povm: &PhasePovm) -> f64 {
    let mut worst = 0.0f64;
    for (k, a) in povm.effects().iter().enumerate() {
        for (l, b) in povm.effects().iter().enumerate() {
            let prod = a.mul(b).expect("same shape");
            let target = if k == l {
                a.clone()
            } else {
                Operator::zeros(a.shape().clone())
            };
            worst = worst.max(prod.sub(&target).expect("same shape").max_entry_norm());
        }
    }
    worst
}
