//! Lifting differential expressions to the doubled state.
//!
//! A differential expression is described by coefficient families `f` and `g`:
//! it maps a trajectory `x` to
//! `F_0 + Σ_{i=1..p} F_i · (d/dt)^i ∘ G_i`, where every coefficient is
//! evaluated on the argument stack `(x, Dx, …, D^k x, t)` and `·` multiplies
//! componentwise. The lift replaces each coefficient by its evaluation on the
//! *sum* of the two branch stacks, replaces `d/dt` by the forward operator on
//! one row and the backward operator on the other, and routes rows through a
//! selector that looks at which branches of the state are occupied.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{AsymmetricState, GridFunction};
use crate::operators::OperatorPair;

/// Coefficient callable: maps a flattened argument stack and a time to an
/// output vector. The stack holds the state and its first `k` derivative
/// stages in order, each `n`-dimensional.
pub type CoeffFn = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

/// Coefficient families defining a differential expression.
///
/// `f_terms` has `p + 1` entries (indices `0..=p`), `g_terms` has `p` entries
/// (mathematical indices `1..=p`). Term `i >= 1` contributes
/// `f_i · (d/dt)^i ∘ g_i`; term `0` is additive with no derivative.
#[derive(Clone)]
pub struct CoeffFamily {
    k: usize,
    n_dim: usize,
    m_dim: usize,
    f_terms: Vec<CoeffFn>,
    g_terms: Vec<CoeffFn>,
}

impl std::fmt::Debug for CoeffFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoeffFamily")
            .field("k", &self.k)
            .field("n_dim", &self.n_dim)
            .field("m_dim", &self.m_dim)
            .field("p", &self.g_terms.len())
            .finish()
    }
}

impl CoeffFamily {
    /// `k` is the highest derivative stage fed to the coefficients, `n_dim`
    /// the state dimension, `m_dim` the output dimension.
    pub fn new(
        k: usize,
        n_dim: usize,
        m_dim: usize,
        f_terms: Vec<CoeffFn>,
        g_terms: Vec<CoeffFn>,
    ) -> Result<Self> {
        if n_dim == 0 || m_dim == 0 {
            return Err(Error::BadFamily("state and output dimensions must be positive".into()));
        }
        if f_terms.len() != g_terms.len() + 1 {
            return Err(Error::BadFamily(format!(
                "need one more f-term than g-terms, got {} f-terms and {} g-terms",
                f_terms.len(),
                g_terms.len()
            )));
        }
        Ok(Self { k, n_dim, m_dim, f_terms, g_terms })
    }

    /// Number of derivative-carrying terms.
    pub fn p(&self) -> usize {
        self.g_terms.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn m_dim(&self) -> usize {
        self.m_dim
    }
}

/// Scalar second-order nonlinear demonstration family,
/// `x'' + e^{-t} cos(x') + (cos x)'`, used by the commanded demo and the
/// restriction tests. Here `k = 2`, `p = 1`.
pub fn demo_family() -> CoeffFamily {
    let f0: CoeffFn = Arc::new(|args, t| vec![args[2] + (-t).exp() * args[1].cos()]);
    let f1: CoeffFn = Arc::new(|_, _| vec![1.0]);
    let g1: CoeffFn = Arc::new(|args, _| vec![args[0].cos()]);
    CoeffFamily::new(2, 1, 1, vec![f0, f1], vec![g1]).expect("demo family is well formed")
}

/// Doubled-argument representation of a coefficient: evaluates the original
/// callable on the sum of the two branch stacks, so a vanished second branch
/// reproduces the original exactly.
pub fn asym_rep(f: CoeffFn) -> impl Fn(&[f64], &[f64], f64) -> Vec<f64> {
    move |y1, y2, t| {
        debug_assert_eq!(y1.len(), y2.len());
        let summed: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| a + b).collect();
        f(&summed, t)
    }
}

/// Which rows of the doubled expression apply to a given state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorMatrix {
    /// `(I 0)`: only the forward row.
    PlusBlock,
    /// `(0 I)`: only the backward row.
    MinusBlock,
    /// `(I I)`: both rows summed.
    Both,
}

/// Selector by occupancy: a state with only the plus branch nonzero selects
/// the forward row, only the minus branch the backward row, anything else
/// (including the zero state) both.
///
/// Membership is decided by exact-zero samples, not by tolerance and not by
/// the constructor tag; a tolerance would silently change which equation a
/// nearly-flat trajectory satisfies.
pub fn sigma(x: &AsymmetricState) -> SelectorMatrix {
    let plus_zero = x.plus().is_zero();
    let minus_zero = x.minus().is_zero();
    if !plus_zero && minus_zero {
        SelectorMatrix::PlusBlock
    } else if plus_zero && !minus_zero {
        SelectorMatrix::MinusBlock
    } else {
        SelectorMatrix::Both
    }
}

/// A coefficient family bound to an operator pair.
#[derive(Debug, Clone)]
pub struct EmbeddedOperator {
    family: CoeffFamily,
    ops: OperatorPair,
}

impl EmbeddedOperator {
    pub fn new(family: CoeffFamily, ops: OperatorPair) -> Self {
        Self { family, ops }
    }

    pub fn family(&self) -> &CoeffFamily {
        &self.family
    }

    pub fn ops(&self) -> &OperatorPair {
        &self.ops
    }

    /// Evaluate the lifted expression on a doubled state.
    ///
    /// The argument stack at each node is the sum of the plus branch's
    /// forward-derivative stages and the minus branch's backward-derivative
    /// stages; the selector decides whether the forward row, the backward
    /// row, or their sum contributes the derivative terms.
    pub fn embed_apply(&self, x: &AsymmetricState) -> Result<GridFunction> {
        let grid = self.ops.grid();
        if x.grid() != grid {
            return Err(Error::GridMismatch);
        }
        if x.dim() != self.family.n_dim {
            return Err(Error::DimMismatch { expected: self.family.n_dim, got: x.dim() });
        }
        let k = self.family.k;
        let nn = grid.n_nodes();
        let n = self.family.n_dim;
        let m = self.family.m_dim;

        // Summed derivative stacks: stage j holds (D⁺)^j x₊ + (D⁻)^j x₋.
        let mut stages = Vec::with_capacity(k + 1);
        let mut plus = x.plus().clone();
        let mut minus = x.minus().clone();
        for j in 0..=k {
            if j > 0 {
                plus = self.ops.apply_plus(&plus)?;
                minus = self.ops.apply_minus(&minus)?;
            }
            stages.push(plus.add_scaled(1.0, &minus)?);
        }

        let eval = |term: &CoeffFn| -> Result<GridFunction> {
            let mut out = GridFunction::zeros(grid, m);
            let mut args = vec![0.0; n * (k + 1)];
            for node in 0..nn {
                for (j, stage) in stages.iter().enumerate() {
                    stage.node_into(node, &mut args[j * n..(j + 1) * n]);
                }
                let vals = term(&args, grid.node(node));
                if vals.len() != m {
                    return Err(Error::DimMismatch { expected: m, got: vals.len() });
                }
                for (c, &v) in vals.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::NonFiniteValue { node, component: c });
                    }
                    out.set_value(node, c, v);
                }
            }
            Ok(out)
        };

        let sel = sigma(x);
        let mut result = eval(&self.family.f_terms[0])?;
        for i in 1..=self.family.p() {
            let fi = eval(&self.family.f_terms[i])?;
            let gi = eval(&self.family.g_terms[i - 1])?;
            if sel != SelectorMatrix::MinusBlock {
                accumulate_product(&mut result, &fi, &self.ops.apply_plus_power(&gi, i)?);
            }
            if sel != SelectorMatrix::PlusBlock {
                accumulate_product(&mut result, &fi, &self.ops.apply_minus_power(&gi, i)?);
            }
        }
        Ok(result)
    }

    /// [`embed_apply`](Self::embed_apply) read as the residual of the lifted
    /// equation `E(X) = 0`.
    pub fn embed_equation_residual(&self, x: &AsymmetricState) -> Result<GridFunction> {
        self.embed_apply(x)
    }
}

/// `acc += f ⊙ g` componentwise; inputs share grid and dimension by
/// construction.
fn accumulate_product(acc: &mut GridFunction, f: &GridFunction, g: &GridFunction) {
    for c in 0..acc.dim() {
        let (fc, gc) = (f.component(c), g.component(c));
        let ac = acc.component_mut(c);
        for k in 0..ac.len() {
            ac[k] += fc[k] * gc[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridFunction, TimeGrid};
    use crate::operators::OperatorPair;

    fn grid() -> TimeGrid {
        TimeGrid::new(0.0, 2.0, 40).unwrap()
    }

    fn all_pairs(g: TimeGrid) -> Vec<OperatorPair> {
        vec![
            OperatorPair::classical(g),
            OperatorPair::finite_diff(2.0 * g.step(), g).unwrap(),
            OperatorPair::fractional_rl(0.55, 1.4, g).unwrap(),
        ]
    }

    #[test]
    fn asym_rep_ignores_a_vanished_second_branch() {
        let f: CoeffFn = Arc::new(|args, t| vec![args[0] * args[0] + t * args[1]]);
        let rep = asym_rep(f.clone());
        let y = [1.3, -0.7];
        let zero = [0.0, 0.0];
        assert_eq!(rep(&y, &zero, 0.9), f(&y, 0.9));
        // And genuinely sums otherwise.
        assert_eq!(rep(&[1.0, 2.0], &[0.5, -1.0], 2.0), f(&[1.5, 1.0], 2.0));
    }

    #[test]
    fn sigma_reads_values_not_tags() {
        let g = grid();
        let x = GridFunction::sample_scalar(g, |t| t + 1.0).unwrap();
        let zero = GridFunction::zeros(g, 1);
        assert_eq!(sigma(&AsymmetricState::lift_plus(x.clone())), SelectorMatrix::PlusBlock);
        assert_eq!(sigma(&AsymmetricState::lift_minus(x.clone())), SelectorMatrix::MinusBlock);
        assert_eq!(sigma(&AsymmetricState::zeros(g, 1)), SelectorMatrix::Both);
        // A plus-tagged state whose samples all vanish still selects Both.
        assert_eq!(sigma(&AsymmetricState::lift_plus(zero)), SelectorMatrix::Both);
        let both = AsymmetricState::general(x.clone(), x).unwrap();
        assert_eq!(sigma(&both), SelectorMatrix::Both);
    }

    #[test]
    fn family_shape_is_validated() {
        let c: CoeffFn = Arc::new(|_, _| vec![0.0]);
        assert!(CoeffFamily::new(1, 1, 1, vec![c.clone()], vec![c.clone()]).is_err());
        assert!(CoeffFamily::new(1, 0, 1, vec![c.clone()], vec![]).is_err());
        assert!(CoeffFamily::new(1, 1, 1, vec![c.clone(), c.clone()], vec![c]).is_ok());
    }

    #[test]
    fn plus_restriction_matches_direct_forward_formula() {
        // On (x₊, 0) the lift must reduce node-for-node to
        // (D⁺)²x + e^{-t} cos(D⁺x) + D⁺cos(x).
        let g = grid();
        let x = GridFunction::sample_scalar(g, |t| 0.4 * (1.7 * t).sin() + 0.2 * t).unwrap();
        for ops in all_pairs(g) {
            let emb = EmbeddedOperator::new(demo_family(), ops.clone());
            let got = emb.embed_apply(&AsymmetricState::lift_plus(x.clone())).unwrap();

            let dx = ops.apply_plus(&x).unwrap();
            let ddx = ops.apply_plus(&dx).unwrap();
            let cos_x = GridFunction::sample_scalar(g, |_| 0.0).unwrap();
            let mut cos_x = cos_x;
            for k in 0..=g.n_steps() {
                cos_x.set_value(k, 0, x.value(k, 0).cos());
            }
            let d_cos_x = ops.apply_plus(&cos_x).unwrap();
            for k in 0..=g.n_steps() {
                let t = g.node(k);
                let direct = ddx.value(k, 0) + (-t).exp() * dx.value(k, 0).cos() + d_cos_x.value(k, 0);
                assert_eq!(got.value(k, 0).to_bits(), direct.to_bits(), "node {k}");
            }
        }
    }

    #[test]
    fn minus_restriction_matches_direct_backward_formula() {
        let g = grid();
        let x = GridFunction::sample_scalar(g, |t| (0.8 * t).cos()).unwrap();
        for ops in all_pairs(g) {
            let emb = EmbeddedOperator::new(demo_family(), ops.clone());
            let got = emb.embed_apply(&AsymmetricState::lift_minus(x.clone())).unwrap();

            let dx = ops.apply_minus(&x).unwrap();
            let ddx = ops.apply_minus(&dx).unwrap();
            let mut cos_x = GridFunction::zeros(g, 1);
            for k in 0..=g.n_steps() {
                cos_x.set_value(k, 0, x.value(k, 0).cos());
            }
            let d_cos_x = ops.apply_minus(&cos_x).unwrap();
            for k in 0..=g.n_steps() {
                let t = g.node(k);
                let direct = ddx.value(k, 0) + (-t).exp() * dx.value(k, 0).cos() + d_cos_x.value(k, 0);
                assert_eq!(got.value(k, 0).to_bits(), direct.to_bits(), "node {k}");
            }
        }
    }

    #[test]
    fn general_state_sums_both_derivative_rows() {
        let g = grid();
        let xp = GridFunction::sample_scalar(g, |t| t * t).unwrap();
        let xm = GridFunction::sample_scalar(g, |t| (t - 1.0).powi(3)).unwrap();
        let ops = OperatorPair::finite_diff(g.step(), g).unwrap();
        let emb = EmbeddedOperator::new(demo_family(), ops.clone());
        let x = AsymmetricState::general(xp.clone(), xm.clone()).unwrap();
        let got = emb.embed_apply(&x).unwrap();

        // Hand-built: summed stages s_j = (D⁺)^j xp + (D⁻)^j xm feed the
        // coefficients; the derivative term runs through both rows.
        let s0 = xp.add_scaled(1.0, &xm).unwrap();
        let s1 = ops
            .apply_plus(&xp)
            .unwrap()
            .add_scaled(1.0, &ops.apply_minus(&xm).unwrap())
            .unwrap();
        let s2 = ops
            .apply_plus(&ops.apply_plus(&xp).unwrap())
            .unwrap()
            .add_scaled(1.0, &ops.apply_minus(&ops.apply_minus(&xm).unwrap()).unwrap())
            .unwrap();
        let mut cos_s0 = GridFunction::zeros(g, 1);
        for k in 0..=g.n_steps() {
            cos_s0.set_value(k, 0, s0.value(k, 0).cos());
        }
        let d_plus = ops.apply_plus(&cos_s0).unwrap();
        let d_minus = ops.apply_minus(&cos_s0).unwrap();
        for k in 0..=g.n_steps() {
            let t = g.node(k);
            let direct = s2.value(k, 0)
                + (-t).exp() * s1.value(k, 0).cos()
                + (d_plus.value(k, 0) + d_minus.value(k, 0));
            let diff = (got.value(k, 0) - direct).abs();
            assert!(diff < 1e-12, "node {k}: {} vs {direct}", got.value(k, 0));
        }
    }

    #[test]
    fn derivative_free_family_ignores_the_selector() {
        let g = grid();
        let f0: CoeffFn = Arc::new(|args, t| vec![args[0] * 2.0 + t]);
        let fam = CoeffFamily::new(0, 1, 1, vec![f0], vec![]).unwrap();
        let ops = OperatorPair::classical(g);
        let emb = EmbeddedOperator::new(fam, ops);
        let x = GridFunction::sample_scalar(g, |t| t).unwrap();
        let on_plus = emb.embed_apply(&AsymmetricState::lift_plus(x.clone())).unwrap();
        let on_minus = emb.embed_apply(&AsymmetricState::lift_minus(x)).unwrap();
        assert_eq!(on_plus, on_minus);
        for k in 0..=g.n_steps() {
            let t = g.node(k);
            assert_eq!(on_plus.value(k, 0), 2.0 * t + t);
        }
    }

    #[test]
    fn non_finite_coefficient_output_reports_the_node() {
        let g = grid();
        let f0: CoeffFn = Arc::new(|args, _| vec![1.0 / (args[0] - 1.0)]);
        let fam = CoeffFamily::new(0, 1, 1, vec![f0], vec![]).unwrap();
        let emb = EmbeddedOperator::new(fam, OperatorPair::classical(g));
        // x(t) = t hits 1.0 exactly at node 20 (t = 1.0 on [0, 2] with 40 steps).
        let x = GridFunction::sample_scalar(g, |t| t).unwrap();
        match emb.embed_apply(&AsymmetricState::lift_plus(x)) {
            Err(Error::NonFiniteValue { node, component }) => {
                assert_eq!((node, component), (20, 0));
            }
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = grid();
        let emb = EmbeddedOperator::new(demo_family(), OperatorPair::classical(g));
        let x2 = GridFunction::sample(g, 2, |t| vec![t, -t]).unwrap();
        assert!(matches!(
            emb.embed_apply(&AsymmetricState::lift_plus(x2)),
            Err(Error::DimMismatch { expected: 1, got: 2 })
        ));
    }
}
