//! The relativisation map `¥`, its predual, the restriction channel `Γ_ω`,
//! and structural checks on them.
//!
//! `¥(A) = ∫ U_S(θ) A U_S(θ)^* ⊗ F(dθ)`. Two evaluation routes are provided:
//!
//! * closed form: `¥(A) = Σ_{n,m} A_nm |n><m| ⊗ ∫ e^{i(ν_n−ν_m)θ} F(dθ)`, using
//!   the exact Fourier moments of the reference POVM;
//! * point sum: `Σ_j U_S(θ_j) A U_S(θ_j)^* ⊗ W_j` over a quadrature rule of the
//!   reference POVM, exact once the rule resolves every frequency involved.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::hilbert::{Matrix, Operator, SpaceShape, State, C64};
use crate::povm::{
    canonical_phase, covariance_defect, cyclic_angle_pvm, NumberPhasePair, PovmKind, QuadratureRule,
};
use crate::symmetry::{tau, CompositeNumber, NumberOperator};

/// Largest covariance defect accepted when building a context.
pub const COVARIANCE_TOL: f64 = 1e-10;

/// Norm used by the diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DiagnosticNorm {
    #[default]
    MaxEntry,
    Operator,
}

impl DiagnosticNorm {
    pub fn of(self, op: &Operator) -> f64 {
        match self {
            DiagnosticNorm::MaxEntry => op.max_entry_norm(),
            DiagnosticNorm::Operator => op.operator_norm(),
        }
    }
}

/// Result of the point-sum route.
#[derive(Clone, Debug)]
pub struct SumPath {
    pub op: Operator,
    /// False when the rule is only a bin-midpoint approximation.
    pub exact: bool,
}

#[derive(Clone, Debug)]
pub struct RelativisationContext {
    system: NumberOperator,
    reference: NumberPhasePair,
    composite: CompositeNumber,
}

impl RelativisationContext {
    pub fn new(system: NumberOperator, reference: NumberPhasePair) -> Result<Self> {
        let defect = covariance_defect(&reference)?;
        if defect >= COVARIANCE_TOL {
            return Err(Error::NotCovariant(defect));
        }
        let composite = CompositeNumber::new(system.clone(), reference.number.clone())?;
        Ok(Self {
            system,
            reference,
            composite,
        })
    }

    /// Oscillator system of dimension `d_s` against a binned canonical phase reference.
    pub fn canonical(d_s: usize, d_r: usize, bins: usize) -> Result<Self> {
        let pair = NumberPhasePair::new(NumberOperator::number(d_r), canonical_phase(d_r, bins)?)?;
        Self::new(NumberOperator::number(d_s), pair)
    }

    /// Cyclic model: `Z_{d_r}` symmetry, sharp Fourier angle on the reference.
    pub fn cyclic(d_s: usize, d_r: usize) -> Result<Self> {
        let order = d_r as u32;
        let pair = NumberPhasePair::new(
            NumberOperator::number(d_r).cyclic(order)?,
            cyclic_angle_pvm(d_r)?,
        )?;
        Self::new(NumberOperator::number(d_s).cyclic(order)?, pair)
    }

    pub fn system(&self) -> &NumberOperator {
        &self.system
    }

    pub fn reference(&self) -> &NumberPhasePair {
        &self.reference
    }

    pub fn total_number(&self) -> &NumberOperator {
        self.composite.total()
    }

    pub fn system_dim(&self) -> usize {
        self.system.dim()
    }

    pub fn reference_dim(&self) -> usize {
        self.reference.number.dim()
    }

    pub fn total_shape(&self) -> SpaceShape {
        SpaceShape::bipartite(self.system_dim(), self.reference_dim())
    }

    /// Point count making the default rule exact: `2·spread(N_S) + d_R`.
    pub fn default_quadrature_points(&self) -> usize {
        (2 * self.system.spread()) as usize + self.reference_dim()
    }

    fn check_system(&self, a: &Operator) -> Result<()> {
        a.shape().ensure_eq(self.system.shape(), "system operator")
    }

    fn check_total(&self, c: &Operator) -> Result<()> {
        c.shape()
            .ensure_eq(&self.total_shape(), "composite operator")
    }

    /// Fourier moments of the reference POVM at every system frequency.
    fn moments(&self) -> HashMap<i64, Operator> {
        let ev = self.system.eigenvalues();
        let mut out = HashMap::new();
        for &n in ev {
            for &m in ev {
                out.entry(n - m)
                    .or_insert_with(|| self.reference.phase.fourier_moment(n - m));
            }
        }
        out
    }

    /// Closed-form `¥(A)`.
    pub fn yen(&self, a: &Operator) -> Result<Operator> {
        self.check_system(a)?;
        let (ds, dr) = (self.system_dim(), self.reference_dim());
        let ev = self.system.eigenvalues();
        let moments = self.moments();
        let mut out = Matrix::zeros(ds * dr, ds * dr);
        for n in 0..ds {
            for m in 0..ds {
                let a_nm = a.get(n, m);
                if a_nm == C64::new(0.0, 0.0) {
                    continue;
                }
                let g = moments[&(ev[n] - ev[m])].matrix();
                for r in 0..dr {
                    for s in 0..dr {
                        let gv = g[(r, s)];
                        if gv != C64::new(0.0, 0.0) {
                            out[(n * dr + r, m * dr + s)] = a_nm * gv;
                        }
                    }
                }
            }
        }
        Operator::new(self.total_shape(), out)
    }

    fn rule(&self, points: usize) -> Result<QuadratureRule> {
        let rule = self.reference.phase.quadrature_rule(points)?;
        // the integrand U_S(θ) A U_S(θ)^* carries frequencies up to spread(N_S)
        let needed = self.system.spread();
        match rule.exact_up_to {
            Some(m) if m < needed => Err(Error::Quadrature {
                points,
                spread: needed + (points as i64 - m) - 1,
            }),
            _ => Ok(rule),
        }
    }

    /// Point-sum `¥(A)` with a `points`-node rule.
    pub fn yen_sum(&self, a: &Operator, points: usize) -> Result<SumPath> {
        self.check_system(a)?;
        let rule = self.rule(points)?;
        let mut acc = Operator::zeros(self.total_shape());
        for (&t, w) in rule.nodes.iter().zip(&rule.weights) {
            let rotated = a.conjugate_by(&self.system.phase_shift(t))?;
            acc = acc.add(&rotated.tensor(w))?;
        }
        Ok(SumPath {
            op: acc,
            exact: rule.exact_up_to.is_some(),
        })
    }

    /// Quadrature weights `tr[ω W_j]` of the outcome measure of `ω`.
    fn state_measure(&self, omega: &State) -> Result<(Vec<f64>, Vec<f64>)> {
        omega
            .shape()
            .ensure_eq(self.reference.phase.shape(), "reference state")?;
        let rule = self.rule(self.default_quadrature_points())?;
        let weights = rule
            .weights
            .iter()
            .map(|w| omega.operator().trace_pairing(w).map(|z| z.re))
            .collect::<Result<Vec<_>>>()?;
        Ok((rule.nodes, weights))
    }

    /// `(Γ_ω ∘ ¥)(A) = ∫ U_S(θ) A U_S(θ)^* μ_ω(dθ)`.
    pub fn gamma_yen(&self, omega: &State, a: &Operator) -> Result<Operator> {
        self.check_system(a)?;
        let (nodes, mu) = self.state_measure(omega)?;
        let mut acc = Operator::zeros(a.shape().clone());
        for (&t, &p) in nodes.iter().zip(&mu) {
            let rotated = a.conjugate_by(&self.system.phase_shift(t))?;
            acc = acc.add(&rotated.scale(C64::new(p, 0.0)))?;
        }
        Ok(acc)
    }

    /// `¥_*(ρ_S ⊗ ρ_R) = ∫ U_S(θ)^* ρ_S U_S(θ) tr[ρ_R F(dθ)]`.
    pub fn yen_star_product(&self, rho_s: &State, rho_r: &State) -> Result<State> {
        rho_s
            .shape()
            .ensure_eq(self.system.shape(), "system state")?;
        let (nodes, mu) = self.state_measure(rho_r)?;
        let mut acc = Operator::zeros(rho_s.shape().clone());
        for (&t, &p) in nodes.iter().zip(&mu) {
            let u = self.system.phase_shift(t);
            let rotated = rho_s.operator().conjugate_by(&u.adjoint())?;
            acc = acc.add(&rotated.scale(C64::new(p, 0.0)))?;
        }
        Ok(State::from_trusted(acc))
    }

    /// `¥_*` on an arbitrary composite state: the trace-pairing adjoint of the closed form,
    /// `¥_*(X)_{mn} = tr[¥(|n><m|) X]`.
    pub fn yen_star(&self, rho_t: &State) -> Result<State> {
        self.check_total(rho_t.operator())?;
        let (ds, dr) = (self.system_dim(), self.reference_dim());
        let ev = self.system.eigenvalues();
        let moments = self.moments();
        let x = rho_t.operator().matrix();
        let mut out = Matrix::zeros(ds, ds);
        for m in 0..ds {
            for n in 0..ds {
                let g = moments[&(ev[n] - ev[m])].matrix();
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..dr {
                    for s in 0..dr {
                        let gv = g[(r, s)];
                        if gv != C64::new(0.0, 0.0) {
                            acc += gv * x[(m * dr + s, n * dr + r)];
                        }
                    }
                }
                out[(m, n)] = acc;
            }
        }
        Ok(State::from_trusted(Operator::new(
            self.system.shape().clone(),
            out,
        )?))
    }

    /// `¥` as an explicit matrix on vectorised operators.
    pub fn yen_superoperator(&self) -> Result<SuperOperator> {
        SuperOperator::from_fn(self.system.shape().clone(), self.total_shape(), |a| {
            self.yen(a)
        })
    }

    /// `(Γ_ω ∘ ¥)` as a superoperator on system operators.
    pub fn gamma_yen_superoperator(&self, omega: &State) -> Result<SuperOperator> {
        SuperOperator::from_fn(
            self.system.shape().clone(),
            self.system.shape().clone(),
            |a| gamma_restrict(omega, &self.yen(a)?),
        )
    }

    pub fn star_hom_defect(&self, a: &Operator, b: &Operator) -> Result<f64> {
        self.star_hom_defect_in(a, b, DiagnosticNorm::MaxEntry)
    }

    /// `‖¥(AB) − ¥(A)¥(B)‖`.
    pub fn star_hom_defect_in(
        &self,
        a: &Operator,
        b: &Operator,
        norm: DiagnosticNorm,
    ) -> Result<f64> {
        let ab = a.mul(b)?;
        let lhs = self.yen(&ab)?;
        let rhs = self.yen(a)?.mul(&self.yen(b)?)?;
        Ok(norm.of(&lhs.sub(&rhs)?))
    }

    /// `‖τ_T(¥(A)) − ¥(A)‖` with `τ_T` built from `N_T = N_S ⊗ I + I ⊗ N_R`.
    pub fn invariance_check(&self, a: &Operator) -> Result<f64> {
        let y = self.yen(a)?;
        Ok(tau(&y, self.total_number())?.sub(&y)?.max_entry_norm())
    }

    /// True when the reference POVM is projection valued.
    pub fn is_sharp(&self) -> bool {
        self.reference.phase.kind() == PovmKind::CyclicSharp
    }
}

/// `Γ_ω(C) = Tr_R[(I ⊗ ω) C]`, so `Γ_ω(A ⊗ B) = A tr[ωB]`.
pub fn gamma_restrict(omega: &State, c: &Operator) -> Result<Operator> {
    let (ds, dr) = c.shape().split()?;
    omega
        .shape()
        .ensure_eq(&SpaceShape::single(dr), "restriction state")?;
    let w = omega.operator().matrix();
    let m = c.matrix();
    let out = Matrix::from_fn(ds, ds, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..dr {
            for s in 0..dr {
                acc += m[(i * dr + r, j * dr + s)] * w[(s, r)];
            }
        }
        acc
    });
    Operator::new(SpaceShape::single(ds), out)
}

/// `V_ω(ρ) = ρ ⊗ ω`, the predual of `Γ_ω`.
pub fn embed(rho: &Operator, omega: &State) -> Operator {
    rho.tensor(omega.operator())
}

/// Linear map between operator spaces, stored as an `(out², in²)` matrix acting
/// on row-major vectorisations `vec(X)[i·d + j] = X_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    input: SpaceShape,
    output: SpaceShape,
    matrix: Matrix,
}

impl SuperOperator {
    /// Assembles the matrix by applying `f` to every matrix unit `|i><j|`.
    pub fn from_fn(
        input: SpaceShape,
        output: SpaceShape,
        f: impl Fn(&Operator) -> Result<Operator>,
    ) -> Result<Self> {
        let din = input.dim();
        let dout = output.dim();
        let mut matrix = Matrix::zeros(dout * dout, din * din);
        for i in 0..din {
            for j in 0..din {
                let unit = Operator::matrix_unit(din, i, j).with_shape(input.clone())?;
                let img = f(&unit)?;
                img.shape().ensure_eq(&output, "superoperator image")?;
                let col = i * din + j;
                for a in 0..dout {
                    for b in 0..dout {
                        matrix[(a * dout + b, col)] = img.get(a, b);
                    }
                }
            }
        }
        Ok(Self {
            input,
            output,
            matrix,
        })
    }

    pub fn identity(shape: SpaceShape) -> Self {
        let d = shape.dim();
        Self {
            input: shape.clone(),
            output: shape,
            matrix: Matrix::identity(d * d, d * d),
        }
    }

    pub fn input(&self) -> &SpaceShape {
        &self.input
    }

    pub fn output(&self) -> &SpaceShape {
        &self.output
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        x.shape().ensure_eq(&self.input, "superoperator input")?;
        let din = self.input.dim();
        let dout = self.output.dim();
        let v = nalgebra::DVector::from_fn(din * din, |k, _| x.get(k / din, k % din));
        let w = &self.matrix * v;
        Operator::new(
            self.output.clone(),
            Matrix::from_fn(dout, dout, |a, b| w[a * dout + b]),
        )
    }

    /// The map `Φ_*` with `tr[Φ(A) ρ] = tr[A Φ_*(ρ)]`.
    pub fn predual(&self) -> SuperOperator {
        let din = self.input.dim();
        let dout = self.output.dim();
        // Φ_*[(i,j),(k,l)] = Φ[(l,k),(j,i)]
        let matrix = Matrix::from_fn(din * din, dout * dout, |row, col| {
            let (i, j) = (row / din, row % din);
            let (k, l) = (col / dout, col % dout);
            self.matrix[(l * dout + k, j * din + i)]
        });
        SuperOperator {
            input: self.output.clone(),
            output: self.input.clone(),
            matrix,
        }
    }

    /// `after ∘ self`.
    pub fn then(&self, after: &SuperOperator) -> Result<SuperOperator> {
        self.output.ensure_eq(&after.input, "composition")?;
        Ok(SuperOperator {
            input: self.input.clone(),
            output: after.output.clone(),
            matrix: &after.matrix * &self.matrix,
        })
    }

    /// `Σ_{ij} |i><j| ⊗ Φ(|i><j|)` on input ⊗ output.
    pub fn choi(&self) -> Operator {
        let din = self.input.dim();
        let dout = self.output.dim();
        let m = Matrix::from_fn(din * dout, din * dout, |row, col| {
            let (i, a) = (row / dout, row % dout);
            let (j, b) = (col / dout, col % dout);
            self.matrix[(a * dout + b, i * din + j)]
        });
        Operator::new(SpaceShape::bipartite(din, dout), m).expect("square by construction")
    }

    /// `max_{ij} |tr Φ(|i><j|) − δ_ij|`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let din = self.input.dim();
        let dout = self.output.dim();
        let mut worst = 0.0f64;
        for i in 0..din {
            for j in 0..din {
                let col = i * din + j;
                let tr: C64 = (0..dout).map(|a| self.matrix[(a * dout + a, col)]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((tr - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn max_entry_distance(&self, other: &SuperOperator) -> Result<f64> {
        self.input
            .ensure_eq(&other.input, "superoperator comparison")?;
        self.output
            .ensure_eq(&other.output, "superoperator comparison")?;
        Ok((&self.matrix - &other.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChoiReport {
    /// Smallest Choi eigenvalue; the map is CP iff this is ≥ 0.
    pub min_eigenvalue: f64,
    pub trace_defect: f64,
}

pub fn choi_cp_check(map: &SuperOperator) -> ChoiReport {
    ChoiReport {
        min_eigenvalue: map.choi().hermitian_eigenvalues()[0],
        trace_defect: map.trace_preservation_defect(),
    }
}

/// `τ_*` as a superoperator.
pub fn tau_superoperator(n: &NumberOperator) -> Result<SuperOperator> {
    SuperOperator::from_fn(n.shape().clone(), n.shape().clone(), |a| tau(a, n))
}

/// `Γ_ω` as a superoperator from composite to system operators.
pub fn gamma_superoperator(omega: &State, d_s: usize) -> Result<SuperOperator> {
    let dr = omega.dim();
    SuperOperator::from_fn(
        SpaceShape::bipartite(d_s, dr),
        SpaceShape::single(d_s),
        |c| gamma_restrict(omega, c),
    )
}

/// `V_ω` as a superoperator.
pub fn embed_superoperator(omega: &State, d_s: usize) -> Result<SuperOperator> {
    let dr = omega.dim();
    SuperOperator::from_fn(
        SpaceShape::single(d_s),
        SpaceShape::bipartite(d_s, dr),
        |rho| embed(rho, omega).with_shape(SpaceShape::bipartite(d_s, dr)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_state, expectation, Vector};
    use crate::povm::{uniform_phase, PhasePovm};
    use crate::random::{random_effect, random_hermitian, random_operator, random_state};
    use crate::symmetry::{tau_star, twirl};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn id(d: usize) -> Operator {
        Operator::identity(SpaceShape::single(d))
    }

    #[test]
    fn yen_is_unital() {
        for ctx in [
            RelativisationContext::canonical(3, 5, 4).unwrap(),
            RelativisationContext::cyclic(3, 3).unwrap(),
            RelativisationContext::cyclic(2, 5).unwrap(),
        ] {
            let y = ctx.yen(&id(ctx.system_dim())).unwrap();
            let expected = Operator::identity(ctx.total_shape());
            assert!(y.sub(&expected).unwrap().max_entry_norm() < 1e-12);
        }
    }

    #[test]
    fn yen_fixes_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let ctx = RelativisationContext::canonical(4, 6, 8).unwrap();
        let a = tau(&random_operator(&mut rng, 4), ctx.system()).unwrap();
        let y = ctx.yen(&a).unwrap();
        assert!(y.sub(&a.tensor(&id(6))).unwrap().max_entry_norm() < 1e-12);
    }

    #[test]
    fn yen_fixes_invariants_degenerate_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pair = NumberPhasePair::new(NumberOperator::number(5), canonical_phase(5, 4).unwrap())
            .unwrap();
        let ctx = RelativisationContext::new(NumberOperator::new(vec![0, 1, 1, 2]).unwrap(), pair)
            .unwrap();
        let a = tau(&random_operator(&mut rng, 4), ctx.system()).unwrap();
        let y = ctx.yen(&a).unwrap();
        assert!(y.sub(&a.tensor(&id(5))).unwrap().max_entry_norm() < 1e-12);
    }

    #[test]
    fn closed_form_matches_point_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let ctx = RelativisationContext::canonical(3, 5, 4).unwrap();
        let k = 2 * 2 + 4 + 1;
        for _ in 0..5 {
            let a = random_operator(&mut rng, 3);
            let closed = ctx.yen(&a).unwrap();
            let sum = ctx.yen_sum(&a, k).unwrap();
            assert!(sum.exact);
            assert!(closed.sub(&sum.op).unwrap().max_entry_norm() < 1e-12);
        }
        assert!(matches!(
            ctx.yen_sum(&id(3), 6),
            Err(Error::Quadrature { .. })
        ));
    }

    #[test]
    fn bin_effect_tagging_is_only_approximate() {
        // Σ_k U(θ̄_k) A U(θ̄_k)^* ⊗ F(X_k) picks up a sinc((n−m)π/K) factor
        let ctx = RelativisationContext::canonical(2, 2, 4).unwrap();
        let f = &ctx.reference().phase;
        let custom = PhasePovm::custom(*f.partition(), f.effects().to_vec(), None).unwrap();
        let pair = NumberPhasePair::new(NumberOperator::number(2), custom).unwrap();
        let binned = RelativisationContext::new(NumberOperator::number(2), pair).unwrap();
        let a = Operator::matrix_unit(2, 0, 1);
        let sum = binned.yen_sum(&a, 0).unwrap();
        assert!(!sum.exact);
        let exact = ctx.yen(&a).unwrap();
        let entry = sum.op.get(1, 2);
        assert!((exact.get(1, 2).re - 1.0).abs() < 1e-15);
        let sinc = (PI / 4.0).sin() / (PI / 4.0);
        assert!((entry.re - sinc).abs() < 1e-12, "{entry}");
    }

    #[test]
    fn canonical_selection_rule() {
        let ctx = RelativisationContext::canonical(2, 4, 8).unwrap();
        let y = ctx.yen(&Operator::matrix_unit(2, 0, 1)).unwrap();
        for r in 0..4 {
            for s in 0..4 {
                let expected = if r as i64 - s as i64 == 1 { 1.0 } else { 0.0 };
                assert_eq!(y.get(r, 4 + s).re, expected);
            }
        }
        assert!(
            ctx.invariance_check(&Operator::matrix_unit(2, 0, 1))
                .unwrap()
                < 1e-12
        );
    }

    #[test]
    fn yen_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let canonical = RelativisationContext::canonical(3, 4, 5).unwrap();
        let cyclic = RelativisationContext::cyclic(3, 3).unwrap();
        for _ in 0..5 {
            let a = random_operator(&mut rng, 3);
            assert!(canonical.invariance_check(&a).unwrap() < 1e-12);
            assert!(cyclic.invariance_check(&a).unwrap() < 1e-12);
        }
        assert_eq!(canonical.invariance_check(&id(3)).unwrap(), 0.0);
    }

    #[test]
    fn cyclic_relative_angle_spectrum() {
        for d in 2..=6 {
            let ctx = RelativisationContext::cyclic(d, d).unwrap();
            let fourier = cyclic_angle_pvm(d).unwrap();
            let mut phi = Operator::zeros(SpaceShape::single(d));
            for k in 0..d {
                phi = phi
                    .add(&fourier.effect(k).scale(C64::new(fourier.tag(k), 0.0)))
                    .unwrap();
            }
            let spectrum = ctx.yen(&phi).unwrap().hermitian_eigenvalues();
            // integer steps avoid rounding across the ±π cut
            let steps: Vec<i64> = (0..d)
                .map(|k| (fourier.tag(k) * d as f64 / (2.0 * PI)).round() as i64)
                .collect();
            let mut oracle: Vec<f64> = Vec::new();
            for &sj in &steps {
                for &sk in &steps {
                    let r = (sj - sk).rem_euclid(d as i64);
                    let m = if 2 * r <= d as i64 { r } else { r - d as i64 };
                    oracle.push(2.0 * PI * m as f64 / d as f64);
                }
            }
            oracle.sort_by(|a, b| a.total_cmp(b));
            for (x, y) in spectrum.iter().zip(&oracle) {
                assert!((x - y).abs() < 1e-9, "d={d}: {spectrum:?} vs {oracle:?}");
            }
        }
    }

    #[test]
    fn star_homomorphism_sharp_vs_unsharp() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let cyclic = RelativisationContext::cyclic(3, 3).unwrap();
        let a = random_operator(&mut rng, 3);
        let b = random_operator(&mut rng, 3);
        assert!(cyclic.star_hom_defect(&a, &b).unwrap() < 1e-10);
        assert_eq!(cyclic.star_hom_defect(&id(3), &id(3)).unwrap(), 0.0);

        let a = random_operator(&mut rng, 3);
        let b = random_operator(&mut rng, 3);
        let defects: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&dr| {
                RelativisationContext::canonical(3, dr, 8)
                    .unwrap()
                    .star_hom_defect_in(&a, &b, DiagnosticNorm::MaxEntry)
                    .unwrap()
            })
            .collect();
        assert!(defects.iter().all(|&x| x > 1e-6), "{defects:?}");
        let canonical = RelativisationContext::canonical(3, 8, 8).unwrap();
        assert!(
            canonical
                .star_hom_defect_in(&a, &b, DiagnosticNorm::Operator)
                .unwrap()
                > 1e-6
        );
    }

    #[test]
    fn yen_star_product_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let ctx = RelativisationContext::canonical(3, 4, 4).unwrap();
        let rho_s = random_state(&mut rng, 3);
        let number = Vector::basis(4, 2).pure_state();
        let out = ctx.yen_star_product(&rho_s, &number).unwrap();
        let tw = twirl(rho_s.operator(), ctx.system(), 5).unwrap();
        assert!(out.operator().sub(&tw).unwrap().max_entry_norm() < 1e-12);

        let diag = tau_star(&rho_s, ctx.system()).unwrap();
        let omega = random_state(&mut rng, 4);
        let out = ctx.yen_star_product(&diag, &omega).unwrap();
        assert!(
            out.operator()
                .sub(diag.operator())
                .unwrap()
                .max_entry_norm()
                < 1e-12
        );
    }

    #[test]
    fn yen_star_product_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        for ctx in [
            RelativisationContext::canonical(3, 3, 4).unwrap(),
            RelativisationContext::cyclic(3, 3).unwrap(),
        ] {
            let rho_s = random_state(&mut rng, 3);
            let rho_r = random_state(&mut rng, 3);
            let a = random_operator(&mut rng, 3);
            let lhs = expectation(&rho_s.tensor(&rho_r), &ctx.yen(&a).unwrap()).unwrap();
            let rhs = expectation(&ctx.yen_star_product(&rho_s, &rho_r).unwrap(), &a).unwrap();
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn yen_star_general_agrees_with_product_and_superoperator() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let ctx = RelativisationContext::canonical(2, 3, 4).unwrap();
        let rho_s = random_state(&mut rng, 2);
        let rho_r = random_state(&mut rng, 3);
        let prod = rho_s.tensor(&rho_r);
        let general = ctx.yen_star(&prod).unwrap();
        let product = ctx.yen_star_product(&rho_s, &rho_r).unwrap();
        assert!(
            general
                .operator()
                .sub(product.operator())
                .unwrap()
                .max_entry_norm()
                < 1e-12
        );

        let pre = ctx.yen_superoperator().unwrap().predual();
        let rho_t = random_state(&mut rng, 6);
        let rho_t =
            State::new(rho_t.into_operator().with_shape(ctx.total_shape()).unwrap()).unwrap();
        let via_super = pre.apply(rho_t.operator()).unwrap();
        let direct = ctx.yen_star(&rho_t).unwrap();
        assert!(via_super.sub(direct.operator()).unwrap().max_entry_norm() < 1e-12);
        assert!((direct.operator().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn yen_star_on_bell_state_cyclic() {
        let ctx = RelativisationContext::cyclic(2, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = Vector::new(
            ctx.total_shape(),
            nalgebra::DVector::from_vec(vec![
                C64::new(s, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(s, 0.0),
            ]),
        )
        .unwrap()
        .pure_state();
        // Σ_k U_k^* Tr_R[(I ⊗ P_k) X] U_k
        let fourier = &ctx.reference().phase;
        let mut oracle = Operator::zeros(SpaceShape::single(2));
        for k in 0..2 {
            let weighted = id(2)
                .tensor(fourier.effect(k))
                .with_shape(ctx.total_shape())
                .unwrap();
            let block = weighted
                .mul(bell.operator())
                .unwrap()
                .partial_trace_reference()
                .unwrap();
            let u = ctx.system().phase_shift(fourier.tag(k));
            oracle = oracle
                .add(&block.conjugate_by(&u.adjoint()).unwrap())
                .unwrap();
        }
        let out = ctx.yen_star(&bell).unwrap();
        assert!(out.operator().sub(&oracle).unwrap().max_entry_norm() < 1e-12);
    }

    #[test]
    fn gamma_restrict_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let a = random_operator(&mut rng, 2);
        let b = random_operator(&mut rng, 3);
        let omega = random_state(&mut rng, 3);
        let g = gamma_restrict(&omega, &a.tensor(&b)).unwrap();
        let expected = a.scale(expectation(&omega, &b).unwrap());
        assert!(g.sub(&expected).unwrap().max_entry_norm() < 1e-12);

        let unit =
            gamma_restrict(&omega, &Operator::identity(SpaceShape::bipartite(2, 3))).unwrap();
        assert!(unit.sub(&id(2)).unwrap().max_entry_norm() < 1e-12);

        let c = random_operator(&mut rng, 6)
            .with_shape(SpaceShape::bipartite(2, 3))
            .unwrap();
        let rho = random_state(&mut rng, 2);
        let lhs = expectation(&rho.tensor(&omega), &c).unwrap();
        let rhs = expectation(&rho, &gamma_restrict(&omega, &c).unwrap()).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn gamma_yen_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let ctx = RelativisationContext::canonical(3, 6, 6).unwrap();
        let a = random_operator(&mut rng, 3);
        let number = Vector::basis(6, 4).pure_state();
        let g = ctx.gamma_yen(&number, &a).unwrap();
        assert!(
            g.sub(&tau(&a, ctx.system()).unwrap())
                .unwrap()
                .max_entry_norm()
                < 1e-12
        );

        let diag = tau(&a, ctx.system()).unwrap();
        let omega = random_state(&mut rng, 6);
        assert!(
            ctx.gamma_yen(&omega, &diag)
                .unwrap()
                .sub(&diag)
                .unwrap()
                .max_entry_norm()
                < 1e-12
        );

        let via_restrict = gamma_restrict(&omega, &ctx.yen(&a).unwrap()).unwrap();
        assert!(
            ctx.gamma_yen(&omega, &a)
                .unwrap()
                .sub(&via_restrict)
                .unwrap()
                .max_entry_norm()
                < 1e-10
        );
    }

    #[test]
    fn gamma_yen_approaches_identity_with_amplitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let ctx = RelativisationContext::canonical(8, 96, 16).unwrap();
        let a = random_hermitian(&mut rng, 8);
        let errors: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&b| {
                let omega = coherent_state(C64::new(b, 0.0), 96).vector.pure_state();
                ctx.gamma_yen(&omega, &a)
                    .unwrap()
                    .sub(&a)
                    .unwrap()
                    .max_entry_norm()
            })
            .collect();
        for w in errors.windows(2) {
            assert!(w[1] < w[0], "{errors:?}");
        }
    }

    #[test]
    fn choi_examples() {
        let idmap = SuperOperator::identity(SpaceShape::single(3));
        let rep = choi_cp_check(&idmap);
        assert!(rep.min_eigenvalue.abs() < 1e-12);
        assert!(rep.trace_defect < 1e-15);

        let t = tau_superoperator(&NumberOperator::number(3)).unwrap();
        let rep = choi_cp_check(&t);
        assert!(rep.min_eigenvalue > -1e-12 && rep.trace_defect < 1e-12);

        let ctx = RelativisationContext::cyclic(3, 3).unwrap();
        let rep = choi_cp_check(&ctx.yen_superoperator().unwrap().predual());
        assert!(rep.min_eigenvalue > -1e-10 && rep.trace_defect < 1e-10);
    }

    #[test]
    fn transpose_is_not_cp() {
        let t = SuperOperator::from_fn(SpaceShape::single(2), SpaceShape::single(2), |a| {
            Operator::from_matrix(a.matrix().transpose())
        })
        .unwrap();
        let rep = choi_cp_check(&t);
        assert!(rep.min_eigenvalue < -0.5);
        assert!(rep.trace_defect < 1e-15);
    }

    #[test]
    fn restriction_composition_predual() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let ctx = RelativisationContext::canonical(2, 3, 4).unwrap();
        let omega = random_state(&mut rng, 3);
        let composed = ctx.gamma_yen_superoperator(&omega).unwrap().predual();
        let chain = embed_superoperator(&omega, 2)
            .unwrap()
            .then(&ctx.yen_superoperator().unwrap().predual())
            .unwrap();
        assert!(composed.max_entry_distance(&chain).unwrap() < 1e-12);
        let gamma_pre = gamma_superoperator(&omega, 2).unwrap().predual();
        assert!(
            gamma_pre
                .max_entry_distance(&embed_superoperator(&omega, 2).unwrap())
                .unwrap()
                < 1e-15
        );
    }

    #[test]
    fn yen_preserves_effect_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let ctx = RelativisationContext::canonical(3, 5, 4).unwrap();
        for _ in 0..5 {
            let e = random_effect(&mut rng, 3);
            let ev = ctx.yen(&e).unwrap().hermitian_eigenvalues();
            assert!(ev[0] > -1e-10 && *ev.last().unwrap() < 1.0 + 1e-10);
        }
    }

    #[test]
    fn uniform_reference_reduces_to_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let pair =
            NumberPhasePair::new(NumberOperator::number(4), uniform_phase(4, 1).unwrap()).unwrap();
        let ctx = RelativisationContext::new(NumberOperator::number(3), pair).unwrap();
        let a = random_operator(&mut rng, 3);
        let expected = tau(&a, ctx.system()).unwrap().tensor(&id(4));
        assert!(
            ctx.yen(&a)
                .unwrap()
                .sub(&expected)
                .unwrap()
                .max_entry_norm()
                < 1e-12
        );
    }

    #[test]
    fn non_covariant_reference_rejected() {
        let pair = NumberPhasePair::new(
            NumberOperator::new(vec![0, 2, 4]).unwrap(),
            canonical_phase(3, 6).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            RelativisationContext::new(NumberOperator::number(2), pair),
            Err(Error::NotCovariant(_))
        ));
    }

    #[test]
    fn shape_errors() {
        let ctx = RelativisationContext::canonical(2, 3, 4).unwrap();
        assert!(matches!(ctx.yen(&id(3)), Err(Error::Shape(_))));
        let omega = State::maximally_mixed(SpaceShape::single(2));
        assert!(matches!(
            ctx.gamma_yen(&omega, &id(2)),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            gamma_restrict(&omega, &id(4)),
            Err(Error::Shape(_))
        ));
    }
}
