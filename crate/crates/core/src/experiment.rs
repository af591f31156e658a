//! Dispatch from a validated [`ExperimentConfig`] to the numerical routines.

use crate::coherence::{
    absolute_vs_relative, derelativised_state_limit, homodyne_compare, mutual_coherence_witness,
    LocalisationSequence, SequenceKind,
};
use crate::config::{ExperimentConfig, ExperimentId, Model, StateSpec};
use crate::error::{Error, Result};
use crate::hilbert::{Operator, SpaceShape, C64};
use crate::random::random_operator;
use crate::relativise::{choi_cp_check, tau_superoperator, RelativisationContext};
use crate::symmetry::{tau, tau_star, twirl};
use crate::table::{ResultTable, Value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Bound used by the pass column of the structure suite.
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
#[error("experiment `{experiment}` failed: {source}")]
pub struct RunError {
    pub experiment: ExperimentId,
    #[source]
    pub source: Error,
}

pub fn context(config: &ExperimentConfig) -> Result<RelativisationContext> {
    let (ds, dr) = (config.dims.system, config.dims.reference);
    match config.model {
        Model::Canonical => RelativisationContext::canonical(ds, dr, config.bins),
        Model::Cyclic => RelativisationContext::cyclic(ds, dr),
    }
}

pub fn sequence(config: &ExperimentConfig) -> Result<LocalisationSequence> {
    let d = config.dims.reference;
    match config.sequence.kind {
        SequenceKind::CoherentAmplitude => {
            LocalisationSequence::coherent(&config.sequence.values, d)
        }
        SequenceKind::PhasePeaked => LocalisationSequence::phase_peaked(&config.sequence.values, d),
    }
}

/// `|0><1| + |1><0|`, the simplest observable that changes the system number.
pub fn hopping_observable(dim: usize) -> Operator {
    Operator::from_fn(SpaceShape::single(dim), |i, j| {
        if (i, j) == (0, 1) || (i, j) == (1, 0) {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Runs one experiment. Identical configs give identical rows; only the
/// wall time in the metadata varies.
pub fn run(config: &ExperimentConfig) -> std::result::Result<ResultTable, RunError> {
    let start = Instant::now();
    let mut table = dispatch(config).map_err(|source| RunError {
        experiment: config.experiment,
        source,
    })?;
    let extra = std::mem::take(&mut table.meta);
    let mut meta = serde_json::json!({
        "artifact": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": config.experiment.as_str(),
        "config": config,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    if let (Some(m), serde_json::Value::Object(e)) = (meta.as_object_mut(), extra) {
        m.extend(e);
    }
    table.meta = meta;
    Ok(table)
}

fn dispatch(config: &ExperimentConfig) -> Result<ResultTable> {
    match config.experiment {
        ExperimentId::Convergence => convergence(config),
        ExperimentId::Derelativise => derelativise(config),
        ExperimentId::TwirlCheck => twirl_check(config),
        ExperimentId::MutualCoherence => mutual_coherence(config),
        ExperimentId::Homodyne => homodyne(config),
        ExperimentId::StructureSuite => structure_suite(config),
    }
}

fn convergence(config: &ExperimentConfig) -> Result<ResultTable> {
    let ctx = context(config)?;
    let seq = sequence(config)?;
    let rho = config
        .states
        .system
        .build(config.dims.system, config.tolerances.truncation)?;
    let rows = absolute_vs_relative(&ctx, &rho, &hopping_observable(config.dims.system), &seq)?;
    let mut t = ResultTable::new([
        "index",
        "parameter",
        "e_pointwise",
        "e_invariant",
        "e_operator_norm",
        "truncation_weight",
        "window_offset",
    ])
    .plot("parameter", "e_pointwise")
    .plot("parameter", "e_invariant")
    .plot("parameter", "e_operator_norm");
    for (r, &offset) in rows.iter().zip(seq.window_offsets()) {
        t.push(vec![
            r.index.into(),
            r.parameter.into(),
            r.pointwise_error.into(),
            r.invariant_error.into(),
            r.operator_norm_error.into(),
            r.truncation_weight.into(),
            offset.into(),
        ]);
    }
    Ok(t)
}

fn derelativise(config: &ExperimentConfig) -> Result<ResultTable> {
    let ctx = context(config)?;
    let seq = sequence(config)?;
    let rho = config
        .states
        .system
        .build(config.dims.system, config.tolerances.truncation)?;
    let mut t = ResultTable::new([
        "index",
        "parameter",
        "distance",
        "truncation_weight",
        "window_offset",
    ])
    .plot("parameter", "distance");
    for (r, &offset) in derelativised_state_limit(&ctx, &rho, &seq)?
        .iter()
        .zip(seq.window_offsets())
    {
        t.push(vec![
            r.index.into(),
            r.parameter.into(),
            r.distance.into(),
            r.truncation_weight.into(),
            offset.into(),
        ]);
    }
    Ok(t)
}

/// Per trial: the larger of `‖twirl(A) − τ_S(A)‖` and
/// `‖(Γ_ω ∘ ¥)(A) − τ_S(A)‖` with `ω` the dephased reference state.
fn twirl_check(config: &ExperimentConfig) -> Result<ResultTable> {
    let ctx = context(config)?;
    let omega = config
        .states
        .reference
        .build(config.dims.reference, config.tolerances.truncation)?;
    let dephased = tau_star(&omega, &ctx.reference().number)?;
    let points = 2 * ctx.system().spread() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut t = ResultTable::new(["trial", "defect"]).plot("trial", "defect");
    for trial in 0..config.trials {
        let a = random_operator(&mut rng, config.dims.system);
        let target = tau(&a, ctx.system())?;
        let by_twirl = twirl(&a, ctx.system(), points)?
            .sub(&target)?
            .max_entry_norm();
        let by_restriction = ctx.gamma_yen(&dephased, &a)?.sub(&target)?.max_entry_norm();
        t.push(vec![trial.into(), by_twirl.max(by_restriction).into()]);
    }
    Ok(t)
}

fn mutual_coherence(config: &ExperimentConfig) -> Result<ResultTable> {
    let ctx = context(config)?;
    let bound = config.tolerances.truncation;
    let rho_s = config.states.system.build(config.dims.system, bound)?;
    let rho_r = config
        .states
        .reference
        .build(config.dims.reference, bound)?;
    let rep = mutual_coherence_witness(
        ctx.system(),
        &ctx.reference().number,
        &rho_s,
        &rho_r,
        config.tolerances.witness,
    )?;
    let mut t = ResultTable::new(["witness_s", "witness_r", "verdict", "tolerance"]);
    t.push(vec![
        rep.witness_s.into(),
        rep.witness_r.into(),
        rep.verdict.as_str().into(),
        rep.tolerance.into(),
    ]);
    Ok(t)
}

fn homodyne(config: &ExperimentConfig) -> Result<ResultTable> {
    let ctx = context(config)?;
    let seq = sequence(config)?;
    let StateSpec::Coherent { amplitude, phase } = config.states.system else {
        return Err(Error::InvalidState(
            "homodyne needs a coherent system state".into(),
        ));
    };
    let rep = homodyne_compare(&ctx, C64::from_polar(amplitude, phase), &seq)?;
    let mut t = ResultTable::new([
        "index",
        "parameter",
        "tv",
        "incoherent_tv",
        "dephased_contrast",
        "truncation_weight",
    ])
    .plot("parameter", "tv")
    .plot("parameter", "incoherent_tv");
    for r in &rep.rows {
        t.push(vec![
            r.index.into(),
            r.parameter.into(),
            r.tv.into(),
            r.incoherent_tv.into(),
            rep.dephased_contrast.into(),
            r.truncation_weight.into(),
        ]);
    }
    t.meta = serde_json::json!({
        "absolute_distribution": rep.absolute,
        "system_truncation_weight": rep.system_truncation_weight,
    });
    Ok(t)
}

fn structure_suite(config: &ExperimentConfig) -> Result<ResultTable> {
    let ctx = context(config)?;
    let (ds, dr) = (config.dims.system, config.dims.reference);
    let omega = config
        .states
        .reference
        .build(dr, config.tolerances.truncation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let id_s = Operator::identity(SpaceShape::single(ds));
    let id_r = Operator::identity(SpaceShape::single(dr));

    let mut checks: Vec<(&str, f64)> = Vec::new();
    checks.push((
        "unital",
        ctx.yen(&id_s)?.sub(&id_s.tensor(&id_r))?.max_entry_norm(),
    ));
    let (mut embed, mut inv, mut quad, mut hom) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let points = ctx.default_quadrature_points();
    for _ in 0..config.trials {
        let a = random_operator(&mut rng, ds);
        let b = random_operator(&mut rng, ds);
        let ta = tau(&a, ctx.system())?;
        embed = embed.max(ctx.yen(&ta)?.sub(&ta.tensor(&id_r))?.max_entry_norm());
        inv = inv.max(ctx.invariance_check(&a)?);
        quad = quad.max(
            ctx.yen_sum(&a, points)?
                .op
                .sub(&ctx.yen(&a)?)?
                .max_entry_norm(),
        );
        if ctx.is_sharp() {
            hom = hom.max(ctx.star_hom_defect(&a, &b)?);
        }
    }
    checks.push(("invariant_embedding", embed));
    checks.push(("invariance", inv));
    checks.push(("quadrature_agreement", quad));
    if ctx.is_sharp() {
        checks.push(("star_homomorphism", hom));
    }
    let neg = |x: f64| (-x).max(0.0);
    checks.push((
        "cp_tau_star",
        neg(choi_cp_check(&tau_superoperator(ctx.system())?.predual()).min_eigenvalue),
    ));
    checks.push((
        "cp_yen_star",
        neg(choi_cp_check(&ctx.yen_superoperator()?.predual()).min_eigenvalue),
    ));
    checks.push((
        "cp_gamma_yen_star",
        neg(choi_cp_check(&ctx.gamma_yen_superoperator(&omega)?.predual()).min_eigenvalue),
    ));

    let mut t = ResultTable::new(["check", "defect", "bound", "pass"]);
    for (name, value) in checks {
        t.push(vec![
            name.into(),
            value.into(),
            STRUCTURE_TOL.into(),
            Value::from(value < STRUCTURE_TOL),
        ]);
    }
    Ok(t)
}
