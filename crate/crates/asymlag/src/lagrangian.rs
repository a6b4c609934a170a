//! Lagrangians on the doubled state: action functional and the causal,
//! anti-causal, and lifted Euler–Lagrange residuals.
//!
//! A Lagrangian `L(x, v, t)` carries its partial gradients `∂₁L` (in `x`) and
//! `∂₂L` (in `v`); construction cross-checks the gradients against finite
//! differences of `L` so a typo in a hand-written gradient fails fast. Bound
//! to an operator pair, the Lagrangian yields the action by trapezoidal
//! quadrature of `L(x₊+x₋, D⁺x₊+D⁻x₋, t)` and four single-branch residuals,
//! all normalized to the form `∂₁L − D∂₂L`:
//!
//! - `CausalPlus`: inner and outer `D⁺` (past-reading throughout),
//! - `AntiCausalPlus`: inner `D⁺`, outer `D⁻`,
//! - `CausalMinus`: inner and outer `D⁻`,
//! - `AntiCausalMinus`: inner `D⁻`, outer `D⁺`,
//!
//! plus `EmbeddedGeneral`, the selector-dispatched lift that reduces to the
//! matching causal residual on single-branch states.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{CoeffFamily, CoeffFn, EmbeddedOperator};
use crate::error::{Error, Result};
use crate::grid::{AsymmetricState, BranchTag, GridFunction};
use crate::operators::OperatorPair;
use crate::util::trapezoid;

/// Scalar Lagrangian callable `(x, v, t) -> L`.
pub type LagEval = Arc<dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync>;
/// Gradient callable `(x, v, t) -> n-vector`.
pub type LagGrad = Arc<dyn Fn(&[f64], &[f64], f64) -> Vec<f64> + Send + Sync>;

/// Probes used to cross-check hand-written gradients at construction.
const GRAD_CHECK_PROBES: usize = 100;
/// Relative tolerance for the gradient cross-check.
const GRAD_CHECK_TOL: f64 = 1e-6;
/// Seed for the probe sampler; fixed so construction is deterministic.
const GRAD_CHECK_SEED: u64 = 0x4c41_4752;

/// A differentiable Lagrangian with explicit partial gradients.
#[derive(Clone)]
pub struct Lagrangian {
    dim: usize,
    eval: LagEval,
    d1: LagGrad,
    d2: LagGrad,
}

impl std::fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lagrangian").field("dim", &self.dim).finish()
    }
}

impl Lagrangian {
    /// Builds a Lagrangian and verifies `d1`/`d2` against central finite
    /// differences of `eval` at seeded random probe points.
    pub fn new(dim: usize, eval: LagEval, d1: LagGrad, d2: LagGrad) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                message: "state dimension must be positive".into(),
            });
        }
        let lag = Self { dim, eval, d1, d2 };
        lag.check_gradients()?;
        Ok(lag)
    }

    fn check_gradients(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(GRAD_CHECK_SEED);
        let n = self.dim;
        for _ in 0..GRAD_CHECK_PROBES {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = rng.random_range(0.0..3.0);
            let g1 = (self.d1)(&x, &v, t);
            let g2 = (self.d2)(&x, &v, t);
            if g1.len() != n || g2.len() != n {
                return Err(Error::DerivativeMismatch(format!(
                    "gradient length {} or {} does not match dimension {n}",
                    g1.len(),
                    g2.len()
                )));
            }
            for i in 0..n {
                let fd1 = central_diff(|xi| {
                    let mut xs = x.clone();
                    xs[i] = xi;
                    (self.eval)(&xs, &v, t)
                }, x[i]);
                let fd2 = central_diff(|vi| {
                    let mut vs = v.clone();
                    vs[i] = vi;
                    (self.eval)(&x, &vs, t)
                }, v[i]);
                for (name, got, want) in [("d1", g1[i], fd1), ("d2", g2[i], fd2)] {
                    if !got.is_finite() || (got - want).abs() > GRAD_CHECK_TOL * (1.0 + want.abs()) {
                        return Err(Error::DerivativeMismatch(format!(
                            "{name}[{i}] = {got} disagrees with finite difference {want} at x = {x:?}, v = {v:?}, t = {t}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64], v: &[f64], t: f64) -> f64 {
        (self.eval)(x, v, t)
    }

    pub fn d1(&self, x: &[f64], v: &[f64], t: f64) -> Vec<f64> {
        (self.d1)(x, v, t)
    }

    pub fn d2(&self, x: &[f64], v: &[f64], t: f64) -> Vec<f64> {
        (self.d2)(x, v, t)
    }
}

fn central_diff(f: impl Fn(f64) -> f64, at: f64) -> f64 {
    let h = 1e-5 * (1.0 + at.abs());
    (f(at + h) - f(at - h)) / (2.0 * h)
}

/// `L = ½|v|²` in `dim` dimensions.
pub fn free_particle(dim: usize) -> Result<Lagrangian> {
    Lagrangian::new(
        dim,
        Arc::new(|_, v, _| 0.5 * v.iter().map(|vi| vi * vi).sum::<f64>()),
        Arc::new(move |_, _, _| vec![0.0; dim]),
        Arc::new(|_, v, _| v.to_vec()),
    )
}

/// `L = ½(v² − ω²x²)`, the scalar oscillator with stiffness `ω²`.
pub fn harmonic_oscillator(omega: f64) -> Result<Lagrangian> {
    if !omega.is_finite() || omega <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "omega",
            message: format!("frequency must be positive, got {omega}"),
        });
    }
    let w2 = omega * omega;
    Lagrangian::new(
        1,
        Arc::new(move |x, v, _| 0.5 * (v[0] * v[0] - w2 * x[0] * x[0])),
        Arc::new(move |x, _, _| vec![-w2 * x[0]]),
        Arc::new(|_, v, _| vec![v[0]]),
    )
}

/// Built-in Lagrangians addressable from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LagrangianFamily {
    FreeParticle { dim: usize },
    HarmonicOscillator { omega: f64 },
}

impl LagrangianFamily {
    pub fn build(&self) -> Result<Lagrangian> {
        match *self {
            Self::FreeParticle { dim } => free_particle(dim),
            Self::HarmonicOscillator { omega } => harmonic_oscillator(omega),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::FreeParticle { dim } => dim,
            Self::HarmonicOscillator { .. } => 1,
        }
    }
}

/// Which Euler–Lagrange residual to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ELKind {
    CausalPlus,
    CausalMinus,
    AntiCausalPlus,
    AntiCausalMinus,
    EmbeddedGeneral,
}

impl std::fmt::Display for ELKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ELKind::CausalPlus => "causal_plus",
            ELKind::CausalMinus => "causal_minus",
            ELKind::AntiCausalPlus => "anti_causal_plus",
            ELKind::AntiCausalMinus => "anti_causal_minus",
            ELKind::EmbeddedGeneral => "embedded_general",
        };
        f.write_str(s)
    }
}

/// An evaluated Euler–Lagrange residual with its provenance kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ELResidual {
    kind: ELKind,
    values: GridFunction,
}

impl ELResidual {
    pub fn kind(&self) -> ELKind {
        self.kind
    }

    pub fn values(&self) -> &GridFunction {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.max_abs()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.l2_norm()
    }

    pub fn to_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        self.values.to_csv(w)
    }

    /// Report shape: `{kind, max_abs, l2, grid: {a, b, n_steps}}`.
    pub fn summary(&self) -> serde_json::Value {
        let g = self.values.grid();
        serde_json::json!({
            "kind": self.kind.to_string(),
            "max_abs": self.max_abs(),
            "l2": self.l2_norm(),
            "grid": {"a": g.a(), "b": g.b(), "n_steps": g.n_steps()},
        })
    }
}

/// A Lagrangian bound to an operator pair.
#[derive(Debug, Clone)]
pub struct EmbeddedLagrangian {
    base: Lagrangian,
    ops: OperatorPair,
}

impl EmbeddedLagrangian {
    pub fn new(base: Lagrangian, ops: OperatorPair) -> Self {
        Self { base, ops }
    }

    pub fn base(&self) -> &Lagrangian {
        &self.base
    }

    pub fn ops(&self) -> &OperatorPair {
        &self.ops
    }

    fn check_state(&self, x: &AsymmetricState) -> Result<()> {
        if x.grid() != self.ops.grid() {
            return Err(Error::GridMismatch);
        }
        if x.dim() != self.base.dim {
            return Err(Error::DimMismatch { expected: self.base.dim, got: x.dim() });
        }
        Ok(())
    }

    /// Summed position and velocity stages `(x₊+x₋, D⁺x₊+D⁻x₋)`.
    pub(crate) fn summed_stages(&self, x: &AsymmetricState) -> Result<(GridFunction, GridFunction)> {
        let pos = x.plus().add_scaled(1.0, x.minus())?;
        let vel = self
            .ops
            .apply_plus(x.plus())?
            .add_scaled(1.0, &self.ops.apply_minus(x.minus())?)?;
        Ok((pos, vel))
    }

    /// Trapezoidal action of the lifted Lagrangian.
    pub fn action(&self, x: &AsymmetricState) -> Result<f64> {
        self.check_state(x)?;
        let (pos, vel) = self.summed_stages(x)?;
        let grid = self.ops.grid();
        let n = self.base.dim;
        let mut integrand = vec![0.0; grid.n_nodes()];
        let mut xb = vec![0.0; n];
        let mut vb = vec![0.0; n];
        for (k, slot) in integrand.iter_mut().enumerate() {
            pos.node_into(k, &mut xb);
            vel.node_into(k, &mut vb);
            let val = (self.base.eval)(&xb, &vb, grid.node(k));
            if !val.is_finite() {
                return Err(Error::NonFiniteValue { node: k, component: 0 });
            }
            *slot = val;
        }
        Ok(trapezoid(grid.step(), &integrand))
    }

    /// Evaluates the gradient series `t -> g(x(t), dx(t), t)` on the grid.
    fn gradient_series(&self, g: &LagGrad, x: &GridFunction, dx: &GridFunction) -> Result<GridFunction> {
        let grid = x.grid();
        let n = self.base.dim;
        let mut out = GridFunction::zeros(grid, n);
        let mut xb = vec![0.0; n];
        let mut vb = vec![0.0; n];
        for k in 0..grid.n_nodes() {
            x.node_into(k, &mut xb);
            dx.node_into(k, &mut vb);
            let vals = g(&xb, &vb, grid.node(k));
            if vals.len() != n {
                return Err(Error::DimMismatch { expected: n, got: vals.len() });
            }
            for (c, &v) in vals.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue { node: k, component: c });
                }
                out.set_value(k, c, v);
            }
        }
        Ok(out)
    }

    pub(crate) fn d1_series(&self, pos: &GridFunction, vel: &GridFunction) -> Result<GridFunction> {
        self.gradient_series(&self.base.d1.clone(), pos, vel)
    }

    pub(crate) fn d2_series(&self, pos: &GridFunction, vel: &GridFunction) -> Result<GridFunction> {
        self.gradient_series(&self.base.d2.clone(), pos, vel)
    }

    /// Single-branch residual `∂₁L − D∂₂L` of the requested kind.
    ///
    /// The plus kinds require a `PlusOnly` state and read arguments
    /// `(x₊, D⁺x₊)`; the minus kinds require `MinusOnly` and read
    /// `(x₋, D⁻x₋)`. `EmbeddedGeneral` accepts any state and routes through
    /// the lifted expression.
    pub fn el_residual(&self, x: &AsymmetricState, kind: ELKind) -> Result<ELResidual> {
        self.check_state(x)?;
        if kind == ELKind::EmbeddedGeneral {
            return self.embedded_el_residual(x);
        }
        let plus_branch = matches!(kind, ELKind::CausalPlus | ELKind::AntiCausalPlus);
        let (branch, needed) = if plus_branch {
            (x.plus(), BranchTag::PlusOnly)
        } else {
            (x.minus(), BranchTag::MinusOnly)
        };
        if x.tag() != needed {
            return Err(Error::WrongTag {
                found: x.tag(),
                message: format!("{kind} residual needs a {needed:?} state"),
            });
        }
        let dx = if plus_branch {
            self.ops.apply_plus(branch)?
        } else {
            self.ops.apply_minus(branch)?
        };
        let d1s = self.gradient_series(&self.base.d1.clone(), branch, &dx)?;
        let d2s = self.gradient_series(&self.base.d2.clone(), branch, &dx)?;
        let outer = match kind {
            ELKind::CausalPlus | ELKind::AntiCausalMinus => self.ops.apply_plus(&d2s)?,
            ELKind::CausalMinus | ELKind::AntiCausalPlus => self.ops.apply_minus(&d2s)?,
            ELKind::EmbeddedGeneral => unreachable!(),
        };
        let values = d1s.add_scaled(-1.0, &outer)?;
        Ok(ELResidual { kind, values })
    }

    /// Selector-dispatched residual of the lifted equation.
    ///
    /// Realized through the generic lift with the first-order family
    /// `f = {∂₁L, −1}`, `g = {∂₂L}`, so single-branch states reduce to the
    /// matching causal residual by the same arithmetic.
    pub fn embedded_el_residual(&self, x: &AsymmetricState) -> Result<ELResidual> {
        self.check_state(x)?;
        let n = self.base.dim;
        let d1 = self.base.d1.clone();
        let d2 = self.base.d2.clone();
        let f0: CoeffFn = Arc::new(move |args, t| d1(&args[..n], &args[n..], t));
        let f1: CoeffFn = Arc::new(move |_, _| vec![-1.0; n]);
        let g1: CoeffFn = Arc::new(move |args, t| d2(&args[..n], &args[n..], t));
        let family = CoeffFamily::new(1, n, n, vec![f0, f1], vec![g1])?;
        let values = EmbeddedOperator::new(family, self.ops.clone()).embed_apply(x)?;
        Ok(ELResidual { kind: ELKind::EmbeddedGeneral, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use approx::assert_relative_eq;

    #[test]
    fn wrong_gradient_is_caught_at_construction() {
        let bad = Lagrangian::new(
            1,
            Arc::new(|x, v, _| 0.5 * v[0] * v[0] - x[0] * x[0]),
            // Sign error: should be -2x.
            Arc::new(|x, _, _| vec![2.0 * x[0]]),
            Arc::new(|_, v, _| vec![v[0]]),
        );
        assert!(matches!(bad, Err(Error::DerivativeMismatch(_))));
    }

    #[test]
    fn builtin_families_construct_and_report_dims() {
        assert_eq!(free_particle(3).unwrap().dim(), 3);
        assert_eq!(harmonic_oscillator(2.0).unwrap().dim(), 1);
        assert!(harmonic_oscillator(0.0).is_err());
        assert_eq!(LagrangianFamily::FreeParticle { dim: 2 }.dim(), 2);
        assert!(LagrangianFamily::HarmonicOscillator { omega: 1.5 }.build().is_ok());
    }

    #[test]
    fn action_of_unit_slope_free_particle_is_one_half() {
        let g = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let lhat = EmbeddedLagrangian::new(free_particle(1).unwrap(), OperatorPair::classical(g));
        let x = GridFunction::sample_scalar(g, |t| t).unwrap();
        let a = lhat.action(&AsymmetricState::lift_plus(x)).unwrap();
        assert_relative_eq!(a, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn oscillator_action_over_a_full_period_is_near_zero() {
        // x = cos t with ω = 1: the integrand is -½cos(2t), which averages
        // to zero over [0, 2π].
        let g = TimeGrid::new(0.0, 2.0 * std::f64::consts::PI, 2000).unwrap();
        let lhat =
            EmbeddedLagrangian::new(harmonic_oscillator(1.0).unwrap(), OperatorPair::classical(g));
        let x = GridFunction::sample_scalar(g, |t| t.cos()).unwrap();
        let a = lhat.action(&AsymmetricState::lift_plus(x)).unwrap();
        assert!(a.abs() < 1e-4, "action {a}");
    }

    #[test]
    fn constant_input_action_is_exactly_the_zero_extension_boundary_layer() {
        // x ≡ c with a shifted pair: the forward difference vanishes from
        // node m on; the first m nodes see (c - 0)/eps. Under trapezoidal
        // weights the action is ½(c/eps)²·h·(m − ½), exactly.
        let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let eps = 2.0 * g.step();
        let lhat = EmbeddedLagrangian::new(
            free_particle(1).unwrap(),
            OperatorPair::finite_diff(eps, g).unwrap(),
        );
        let c = 3.0;
        let x = GridFunction::sample_scalar(g, |_| c).unwrap();
        let a = lhat.action(&AsymmetricState::lift_plus(x)).unwrap();
        let expect = 0.5 * (c / eps).powi(2) * g.step() * 1.5;
        assert_relative_eq!(a, expect, max_relative = 1e-12);
    }

    #[test]
    fn action_reports_the_node_of_a_non_finite_integrand() {
        let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
        // Pole at x = 5, well outside the construction-time probe box.
        let lag = Lagrangian::new(
            1,
            Arc::new(|x, _, _| 1.0 / (x[0] - 5.0)),
            Arc::new(|x, _, _| vec![-1.0 / ((x[0] - 5.0) * (x[0] - 5.0))]),
            Arc::new(|_, _, _| vec![0.0]),
        )
        .unwrap();
        let lhat = EmbeddedLagrangian::new(lag, OperatorPair::classical(g));
        let x = GridFunction::sample_scalar(g, |t| 10.0 * t).unwrap();
        match lhat.action(&AsymmetricState::lift_plus(x)) {
            Err(Error::NonFiniteValue { node, .. }) => assert_eq!(node, 5),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn causal_residual_vanishes_on_the_classical_oscillator_solution() {
        let g = TimeGrid::new(0.0, 3.0, 500).unwrap();
        let lhat =
            EmbeddedLagrangian::new(harmonic_oscillator(1.0).unwrap(), OperatorPair::classical(g));
        let x = GridFunction::sample_scalar(g, |t| t.cos()).unwrap();
        let res = lhat.el_residual(&AsymmetricState::lift_plus(x), ELKind::CausalPlus).unwrap();
        let mut interior_max: f64 = 0.0;
        for k in 2..=g.n_steps() - 2 {
            interior_max = interior_max.max(res.values().value(k, 0).abs());
        }
        assert!(interior_max < 1e-4, "interior residual {interior_max}");
        assert_eq!(res.kind(), ELKind::CausalPlus);
    }

    #[test]
    fn plus_kinds_reject_minus_states() {
        let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let lhat = EmbeddedLagrangian::new(free_particle(1).unwrap(), OperatorPair::classical(g));
        let x = GridFunction::sample_scalar(g, |t| t).unwrap();
        let minus = AsymmetricState::lift_minus(x);
        for kind in [ELKind::CausalPlus, ELKind::AntiCausalPlus] {
            assert!(matches!(lhat.el_residual(&minus, kind), Err(Error::WrongTag { .. })));
        }
        assert!(lhat.el_residual(&minus, ELKind::CausalMinus).is_ok());
    }

    #[test]
    fn lifted_residual_reduces_to_the_single_branch_forms() {
        let g = TimeGrid::new(0.0, 2.0, 60).unwrap();
        let pairs = [
            OperatorPair::classical(g),
            OperatorPair::finite_diff(2.0 * g.step(), g).unwrap(),
            OperatorPair::fractional_rl(0.45, 1.2, g).unwrap(),
        ];
        let x = GridFunction::sample_scalar(g, |t| (1.3 * t).sin() + 0.1 * t * t).unwrap();
        for ops in pairs {
            let lhat = EmbeddedLagrangian::new(harmonic_oscillator(1.4).unwrap(), ops);
            let plus = AsymmetricState::lift_plus(x.clone());
            let direct = lhat.el_residual(&plus, ELKind::CausalPlus).unwrap();
            let lifted = lhat.embedded_el_residual(&plus).unwrap();
            for k in 0..=g.n_steps() {
                assert_eq!(lifted.values().value(k, 0), direct.values().value(k, 0), "node {k}");
            }
            let minus = AsymmetricState::lift_minus(x.clone());
            let direct_m = lhat.el_residual(&minus, ELKind::CausalMinus).unwrap();
            let lifted_m = lhat.embedded_el_residual(&minus).unwrap();
            for k in 0..=g.n_steps() {
                assert_eq!(lifted_m.values().value(k, 0), direct_m.values().value(k, 0));
            }
        }
    }

    #[test]
    fn classical_pair_gives_direction_independent_residuals() {
        let g = TimeGrid::new(0.0, 2.0, 80).unwrap();
        let lhat =
            EmbeddedLagrangian::new(harmonic_oscillator(1.0).unwrap(), OperatorPair::classical(g));
        let x = GridFunction::sample_scalar(g, |t| (0.9 * t).cos() + t).unwrap();
        let plus = lhat
            .el_residual(&AsymmetricState::lift_plus(x.clone()), ELKind::CausalPlus)
            .unwrap();
        let minus =
            lhat.el_residual(&AsymmetricState::lift_minus(x), ELKind::CausalMinus).unwrap();
        for k in 0..=g.n_steps() {
            let d = (plus.values().value(k, 0) - minus.values().value(k, 0)).abs();
            assert!(d <= 1e-12, "node {k}: diff {d}");
        }
    }

    #[test]
    fn zero_state_has_identically_zero_lifted_residual_for_free_particle() {
        let g = TimeGrid::new(0.0, 1.0, 20).unwrap();
        let lhat = EmbeddedLagrangian::new(free_particle(2).unwrap(), OperatorPair::classical(g));
        let res = lhat.embedded_el_residual(&AsymmetricState::zeros(g, 2)).unwrap();
        assert_eq!(res.max_abs(), 0.0);
    }

    #[test]
    fn residual_summary_and_csv_have_the_documented_shape() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let lhat = EmbeddedLagrangian::new(free_particle(1).unwrap(), OperatorPair::classical(g));
        let x = GridFunction::sample_scalar(g, |t| t * t).unwrap();
        let res = lhat.el_residual(&AsymmetricState::lift_plus(x), ELKind::CausalPlus).unwrap();
        let s = res.summary();
        assert_eq!(s["kind"], "causal_plus");
        assert_eq!(s["grid"]["n_steps"], 4);
        assert!(s["max_abs"].as_f64().unwrap() >= 0.0);
        let mut buf = Vec::new();
        res.to_csv(&mut buf).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        assert!(csv.starts_with("t,x0\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
