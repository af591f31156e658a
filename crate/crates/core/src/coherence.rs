//! Localisation sweeps, relational states and mutual-coherence witnesses.
//!
//! Everything here is built from the maps in [`crate::relativise`] and
//! [`crate::symmetry`]; the functions return one typed row per sweep point.

use crate::error::{Error, Result};
use crate::hilbert::{
    centred_window_offset, coherent_state_strict, coherent_state_window, trace_distance, Operator,
    State, Vector, C64, DEFAULT_TRUNCATION_BOUND,
};
use crate::povm::{canonical_arc_effect, canonical_phase, PhasePovm};
use crate::relativise::{gamma_restrict, RelativisationContext};
use crate::symmetry::{tau_star, CompositeNumber, NumberOperator};

/// Default witness tolerance separating structural zeros from rounding noise.
pub const WITNESS_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum SequenceKind {
    /// Coherent states `|β>` with real `β`, peaked at phase zero, kept on a
    /// window of `d_R` Fock levels centred on `|β|²`.
    CoherentAmplitude,
    /// Top eigenvector of the canonical-phase effect of the arc `[−w/2, w/2)`.
    PhasePeaked,
}

/// Reference states increasingly localised around phase zero.
#[derive(Clone, Debug)]
pub struct LocalisationSequence {
    kind: SequenceKind,
    parameters: Vec<f64>,
    dim: usize,
    states: Vec<Vector>,
    offsets: Vec<usize>,
    truncation: Vec<f64>,
}

impl LocalisationSequence {
    pub fn coherent(amplitudes: &[f64], dim: usize) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut states = Vec::with_capacity(amplitudes.len());
        let mut offsets = Vec::with_capacity(amplitudes.len());
        let mut truncation = Vec::with_capacity(amplitudes.len());
        for &b in amplitudes {
            let beta = C64::new(b, 0.0);
            let cs = coherent_state_window(beta, dim, centred_window_offset(beta, dim));
            states.push(cs.vector);
            offsets.push(cs.offset);
            truncation.push(cs.truncation_weight);
        }
        Ok(Self {
            kind: SequenceKind::CoherentAmplitude,
            parameters: amplitudes.to_vec(),
            dim,
            states,
            offsets,
            truncation,
        })
    }

    pub fn phase_peaked(widths: &[f64], dim: usize) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::EmptySequence);
        }
        let states = widths
            .iter()
            .map(|&w| {
                let effect = canonical_arc_effect(dim, -0.5 * w, 0.5 * w);
                let (_, v) = effect.top_eigenvector();
                // fix the global phase so the vacuum amplitude is real and positive
                let phase = if v[0].norm() > 0.0 {
                    v[0] / v[0].norm()
                } else {
                    C64::new(1.0, 0.0)
                };
                Vector::normalized(effect.shape().clone(), v / phase)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: SequenceKind::PhasePeaked,
            parameters: widths.to_vec(),
            dim,
            offsets: vec![0; widths.len()],
            truncation: vec![0.0; widths.len()],
            states,
        })
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    pub fn parameters(&self) -> &[f64] {
        &self.parameters
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    /// Lowest Fock level represented by each element's basis vector `0`.
    pub fn window_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn truncation_weights(&self) -> &[f64] {
        &self.truncation
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Probability of the bin containing `θ = 0`, per element.
    pub fn zero_bin_mass(&self, povm: &PhasePovm) -> Result<Vec<f64>> {
        let k0 = povm.partition().bin_of(0.0);
        self.states
            .iter()
            .map(|v| Ok(povm.measure_of_state(&v.pure_state())?[k0]))
            .collect()
    }

    fn check(&self, ctx: &RelativisationContext) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::EmptySequence);
        }
        if self.dim != ctx.reference_dim() {
            return Err(Error::Shape(format!(
                "sequence lives in dimension {}, reference has {}",
                self.dim,
                ctx.reference_dim()
            )));
        }
        Ok(())
    }
}

/// `τ_*(ρ_S ⊗ ρ_R)` with respect to `N_T`.
pub fn relational_state(
    n_s: &NumberOperator,
    n_r: &NumberOperator,
    rho_s: &State,
    rho_r: &State,
) -> Result<State> {
    rho_s.shape().ensure_eq(n_s.shape(), "system state")?;
    rho_r.shape().ensure_eq(n_r.shape(), "reference state")?;
    let composite = CompositeNumber::new(n_s.clone(), n_r.clone())?;
    tau_star(&rho_s.tensor(rho_r), composite.total())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Verdict {
    MutuallyCoherent,
    MutuallyIncoherent,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::MutuallyCoherent => "mutually-coherent",
            Verdict::MutuallyIncoherent => "mutually-incoherent",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CoherenceReport {
    /// Distinguishability of `(ρ_S, ρ_R)` from `(τ_{S*}ρ_S, ρ_R)` by invariant observables.
    pub witness_s: f64,
    /// Distinguishability of `(ρ_S, ρ_R)` from `(ρ_S, τ_{R*}ρ_R)` by invariant observables.
    pub witness_r: f64,
    pub verdict: Verdict,
    pub tolerance: f64,
}

/// Invariant effects are exactly the fixed points of `τ`, so an invariant
/// observable separates two composite states iff their `τ_*`-images differ.
/// The trace distance of those images is the best achievable bias.
pub fn mutual_coherence_witness(
    n_s: &NumberOperator,
    n_r: &NumberOperator,
    rho_s: &State,
    rho_r: &State,
    tolerance: f64,
) -> Result<CoherenceReport> {
    let joint = relational_state(n_s, n_r, rho_s, rho_r)?;
    let dephased_s = relational_state(n_s, n_r, &tau_star(rho_s, n_s)?, rho_r)?;
    let dephased_r = relational_state(n_s, n_r, rho_s, &tau_star(rho_r, n_r)?)?;
    let witness_s = trace_distance(&joint, &dephased_s)?;
    let witness_r = trace_distance(&joint, &dephased_r)?;
    let verdict = if witness_s > tolerance && witness_r > tolerance {
        Verdict::MutuallyCoherent
    } else {
        Verdict::MutuallyIncoherent
    };
    Ok(CoherenceReport {
        witness_s,
        witness_r,
        verdict,
        tolerance,
    })
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ConvergenceRow {
    pub index: usize,
    pub parameter: f64,
    /// `|tr[ρ_S ((Γ_φ ∘ ¥)(A) − A)]|`.
    pub pointwise_error: f64,
    /// `|tr[τ_*(ρ_S ⊗ P[φ]) ¥(A)] − tr[ρ_S A]|`.
    pub invariant_error: f64,
    /// `‖(Γ_φ ∘ ¥)(A) − A‖` in operator norm.
    pub operator_norm_error: f64,
    pub truncation_weight: f64,
}

/// Absolute expectation `tr[ρ_S A]` against its relational counterparts along `seq`.
pub fn absolute_vs_relative(
    ctx: &RelativisationContext,
    rho_s: &State,
    a: &Operator,
    seq: &LocalisationSequence,
) -> Result<Vec<ConvergenceRow>> {
    seq.check(ctx)?;
    if !a.is_hermitian(1e-10) {
        return Err(Error::InvalidOperator(
            "observable must be Hermitian".into(),
        ));
    }
    let absolute = rho_s.operator().trace_pairing(a)?;
    let relative = ctx.yen(a)?;
    seq.states
        .iter()
        .enumerate()
        .map(|(i, phi)| {
            let omega = phi.pure_state();
            let restricted = ctx.gamma_yen(&omega, a)?;
            let diff = restricted.sub(a)?;
            let pointwise = rho_s.operator().trace_pairing(&diff)?.norm();
            let joint = tau_star(&rho_s.tensor(&omega), ctx.total_number())?;
            let invariant = (joint.operator().trace_pairing(&relative)? - absolute).norm();
            Ok(ConvergenceRow {
                index: i,
                parameter: seq.parameters[i],
                pointwise_error: pointwise,
                invariant_error: invariant,
                operator_norm_error: diff.operator_norm(),
                truncation_weight: seq.truncation[i],
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DerelativiseRow {
    pub index: usize,
    pub parameter: f64,
    /// `D(¥_*(τ_*(ρ_S ⊗ P[φ])), ρ_S)`.
    pub distance: f64,
    pub truncation_weight: f64,
}

/// How well relational states `τ_*(ρ_S ⊗ P[φ_i])` reproduce `ρ_S` after derelativisation.
pub fn derelativised_state_limit(
    ctx: &RelativisationContext,
    rho_s: &State,
    seq: &LocalisationSequence,
) -> Result<Vec<DerelativiseRow>> {
    seq.check(ctx)?;
    rho_s
        .shape()
        .ensure_eq(ctx.system().shape(), "system state")?;
    seq.states
        .iter()
        .enumerate()
        .map(|(i, phi)| {
            let joint = tau_star(&rho_s.tensor(&phi.pure_state()), ctx.total_number())?;
            let back = ctx.yen_star(&joint)?;
            Ok(DerelativiseRow {
                index: i,
                parameter: seq.parameters[i],
                distance: trace_distance(&back, rho_s)?,
                truncation_weight: seq.truncation[i],
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct HomodyneRow {
    pub index: usize,
    pub parameter: f64,
    /// `tr[F^T(X_k) τ_*(P[β ⊗ φ_i])]` per bin.
    pub relative: Vec<f64>,
    /// Total variation between `relative` and the absolute distribution.
    pub tv: f64,
    /// Same comparison with the reference dephased, `(P[β], τ_{R*}P[φ_i])`.
    pub incoherent_tv: f64,
    pub truncation_weight: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct HomodyneReport {
    /// `<β|F^S(X_k) β>`.
    pub absolute: Vec<f64>,
    /// `½ Σ_k |<β|F^S(X_k)β> − tr[τ_{S*}(P[β]) F^S(X_k)]|`.
    pub dephased_contrast: f64,
    pub system_truncation_weight: f64,
    pub rows: Vec<HomodyneRow>,
}

fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Canonical-phase statistics of `|β>` against the relative phase `¥ ∘ F^S`
/// measured on relational states. `F^S` uses the reference POVM's bin count.
pub fn homodyne_compare(
    ctx: &RelativisationContext,
    beta: C64,
    seq: &LocalisationSequence,
) -> Result<HomodyneReport> {
    seq.check(ctx)?;
    let ds = ctx.system_dim();
    let system_povm = canonical_phase(ds, ctx.reference().phase.bins())?;
    let coherent = coherent_state_strict(beta, ds, DEFAULT_TRUNCATION_BOUND)?;
    let p_beta = coherent.vector.pure_state();
    let absolute = system_povm.measure_of_state(&p_beta)?;
    let dephased = system_povm.measure_of_state(&tau_star(&p_beta, ctx.system())?)?;
    let dephased_contrast = total_variation(&absolute, &dephased);

    let joints = seq
        .states
        .iter()
        .map(|phi| {
            tau_star(
                &coherent.vector.tensor(phi).pure_state(),
                ctx.total_number(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let dephased_refs = seq
        .states
        .iter()
        .map(|phi| tau_star(&phi.pure_state(), &ctx.reference().number))
        .collect::<Result<Vec<_>>>()?;

    let mut relative = vec![Vec::with_capacity(system_povm.bins()); seq.len()];
    let mut incoherent = vec![Vec::with_capacity(system_povm.bins()); seq.len()];
    for effect in system_povm.effects() {
        let relative_effect = ctx.yen(effect)?;
        for (i, joint) in joints.iter().enumerate() {
            relative[i].push(joint.operator().trace_pairing(&relative_effect)?.re);
            let restricted = gamma_restrict(&dephased_refs[i], &relative_effect)?;
            incoherent[i].push(coherent.vector.quadratic_form(&restricted)?.re);
        }
    }
    let rows = relative
        .into_iter()
        .zip(incoherent)
        .enumerate()
        .map(|(i, (rel, inc))| HomodyneRow {
            index: i,
            parameter: seq.parameters[i],
            tv: total_variation(&absolute, &rel),
            incoherent_tv: total_variation(&absolute, &inc),
            relative: rel,
            truncation_weight: seq.truncation[i],
        })
        .collect();
    Ok(HomodyneReport {
        absolute,
        dephased_contrast,
        system_truncation_weight: coherent.truncation_weight,
        rows,
    })
}
