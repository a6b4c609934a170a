//! Discrete calculus of variations over the doubled state.
//!
//! The central objects are variation spaces and their finite bases. A
//! variation is admissible when the discrete integration-by-parts defect it
//! would generate vanishes exactly on the grid, so pairing a basis element
//! against the action's first variation isolates one interior value of an
//! Euler–Lagrange residual with no boundary leakage. Concretely:
//!
//! - classical pairs: endpoint samples vanish, and additionally the two nodes
//!   adjacent to the one-sided stencil closure are excluded from the basis
//!   (their pairings measure the closure, not the equation);
//! - shifted pairs: the forward family excludes node `n − m`, the backward
//!   family node `m`, where `m` is the shift in steps;
//! - fractional pairs: hats are corrected by a second entry so a weighted
//!   endpoint sum cancels exactly in floating point.
//!
//! On top of the bases sit the Gateaux differential of the action (closed
//! form plus an independent finite-difference version used as an oracle in
//! tests), an extremality sweep, a coherence check comparing the lifted
//! equation against the residual assembled from the restricted variational
//! principle, and a discrete surrogate of the fundamental lemma.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AsymmetricState, BranchTag, GridFunction, TimeGrid};
use crate::lagrangian::{ELKind, EmbeddedLagrangian, Lagrangian};
use crate::operators::{OperatorKind, OperatorPair};
use crate::util::{indexed_map, trapezoid};

/// Relative slack for the weighted-sum admission predicate of fractional
/// pairs. Endpoint predicates are exact-zero checks.
const WEIGHTED_SUM_TOL: f64 = 1e-12;

/// Step factor for the finite-difference Gateaux oracle.
const GATEAUX_FD_STEP: f64 = 1e-5;

/// Which variation space a sweep runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationSpaceKind {
    /// Variations on both branches.
    Full,
    /// Variations supported on the plus branch only.
    Plus,
    /// Variations supported on the minus branch only.
    Minus,
}

/// A variation space bound to nothing: the boundary predicate and basis are
/// derived per operator pair on demand.
#[derive(Debug, Clone, Copy)]
pub struct VariationSpace {
    kind: VariationSpaceKind,
}

impl VariationSpace {
    pub fn new(kind: VariationSpaceKind) -> Self {
        Self { kind }
    }

    pub fn kind(&self) -> VariationSpaceKind {
        self.kind
    }

    /// Whether `h` satisfies this space's membership predicate under `ops`:
    /// branch support per the kind, and the per-operator boundary condition
    /// on each branch (endpoint samples exactly zero; for fractional pairs a
    /// weighted endpoint sum within rounding of zero).
    pub fn admits(&self, ops: &OperatorPair, h: &AsymmetricState) -> Result<bool> {
        if h.grid() != ops.grid() {
            return Err(Error::GridMismatch);
        }
        let plus_ok = |f: &GridFunction| (0..f.dim()).all(|c| plus_predicate(ops, f.component(c)));
        let minus_ok = |f: &GridFunction| (0..f.dim()).all(|c| minus_predicate(ops, f.component(c)));
        Ok(match self.kind {
            VariationSpaceKind::Plus => h.minus().is_zero() && plus_ok(h.plus()),
            VariationSpaceKind::Minus => h.plus().is_zero() && minus_ok(h.minus()),
            VariationSpaceKind::Full => plus_ok(h.plus()) && minus_ok(h.minus()),
        })
    }

    /// Hat basis spanning the admissible interior directions, one element per
    /// branch, component, and anchor node, ordered deterministically (plus
    /// branch first, then by component, then by anchor).
    pub fn basis(&self, ops: &OperatorPair, dim: usize) -> Result<VariationBasis> {
        if dim == 0 {
            return Err(Error::DimMismatch { expected: 1, got: 0 });
        }
        let grid = ops.grid();
        let mut elements = Vec::new();
        if self.kind != VariationSpaceKind::Minus {
            push_branch_elements(&mut elements, ops, dim, BranchTag::PlusOnly);
        }
        if self.kind != VariationSpaceKind::Plus {
            push_branch_elements(&mut elements, ops, dim, BranchTag::MinusOnly);
        }
        if elements.is_empty() {
            return Err(Error::EmptyBasis);
        }
        Ok(VariationBasis { grid, dim, elements })
    }
}

fn plus_predicate(ops: &OperatorPair, h: &[f64]) -> bool {
    let n = h.len() - 1;
    match ops.kind() {
        OperatorKind::Classical => h[0] == 0.0 && h[n] == 0.0,
        OperatorKind::FiniteDiff { .. } => h[0] == 0.0 && h[n - ops.shift_steps()] == 0.0,
        OperatorKind::FractionalRL { .. } => {
            if h[0] != 0.0 {
                return false;
            }
            let w = ops.gl_weight_table();
            let mut acc = 0.0;
            let mut mag = 0.0;
            for i in 1..n {
                let term = w[n - i] * h[i];
                acc += term;
                mag += term.abs();
            }
            acc.abs() <= WEIGHTED_SUM_TOL * mag.max(1.0)
        }
    }
}

fn minus_predicate(ops: &OperatorPair, h: &[f64]) -> bool {
    let n = h.len() - 1;
    match ops.kind() {
        OperatorKind::Classical => h[0] == 0.0 && h[n] == 0.0,
        OperatorKind::FiniteDiff { .. } => h[ops.shift_steps()] == 0.0 && h[n] == 0.0,
        OperatorKind::FractionalRL { .. } => {
            if h[n] != 0.0 {
                return false;
            }
            let w = ops.gl_weight_table();
            let mut acc = 0.0;
            let mut mag = 0.0;
            for i in 1..n {
                let term = w[i] * h[i];
                acc += term;
                mag += term.abs();
            }
            acc.abs() <= WEIGHTED_SUM_TOL * mag.max(1.0)
        }
    }
}

fn push_branch_elements(
    out: &mut Vec<BasisElement>,
    ops: &OperatorPair,
    dim: usize,
    branch: BranchTag,
) {
    let n = ops.grid().n_steps();
    let plus = branch == BranchTag::PlusOnly;
    for component in 0..dim {
        match ops.kind() {
            OperatorKind::Classical => {
                // Nodes 1 and n-1 pair against the one-sided closure of the
                // central stencil, not against the equation, so they are left
                // out just like the shifted families leave out their image
                // nodes.
                for anchor in 2..n.saturating_sub(1) {
                    out.push(BasisElement { branch, component, anchor, entries: vec![(anchor, 1.0)] });
                }
            }
            OperatorKind::FiniteDiff { .. } => {
                let excluded = if plus { n - ops.shift_steps() } else { ops.shift_steps() };
                for anchor in 1..n {
                    if anchor != excluded {
                        out.push(BasisElement {
                            branch,
                            component,
                            anchor,
                            entries: vec![(anchor, 1.0)],
                        });
                    }
                }
            }
            OperatorKind::FractionalRL { .. } => {
                // Corrected hats: w₁·e_anchor − w_q·e_corr with the correction
                // node next to the constrained end. The two predicate products
                // are then the same floating-point number with opposite signs,
                // so the weighted endpoint sum cancels exactly.
                let w = ops.gl_weight_table();
                if plus {
                    for anchor in 1..n.saturating_sub(1) {
                        out.push(BasisElement {
                            branch,
                            component,
                            anchor,
                            entries: vec![(anchor, w[1]), (n - 1, -w[n - anchor])],
                        });
                    }
                } else {
                    for anchor in 2..n {
                        out.push(BasisElement {
                            branch,
                            component,
                            anchor,
                            entries: vec![(anchor, w[1]), (1, -w[anchor])],
                        });
                    }
                }
            }
        }
    }
}

/// One sparse basis direction: a few `(node, value)` entries on one component
/// of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisElement {
    pub branch: BranchTag,
    pub component: usize,
    /// The node whose residual value this element's pairing isolates.
    pub anchor: usize,
    entries: Vec<(usize, f64)>,
}

impl BasisElement {
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }
}

/// A finite basis of admissible variations.
#[derive(Debug, Clone)]
pub struct VariationBasis {
    grid: TimeGrid,
    dim: usize,
    elements: Vec<BasisElement>,
}

impl VariationBasis {
    /// Plain unit hats at every interior node of one branch; used by the
    /// fundamental-lemma surrogate, where no operator is involved.
    pub fn interior_hats(grid: TimeGrid, dim: usize, branch: BranchTag) -> Result<Self> {
        if branch == BranchTag::General {
            return Err(Error::WrongTag {
                found: branch,
                message: "hat bases live on a single branch".into(),
            });
        }
        if dim == 0 {
            return Err(Error::DimMismatch { expected: 1, got: 0 });
        }
        let mut elements = Vec::new();
        for component in 0..dim {
            for anchor in 1..grid.n_steps() {
                elements.push(BasisElement { branch, component, anchor, entries: vec![(anchor, 1.0)] });
            }
        }
        if elements.is_empty() {
            return Err(Error::EmptyBasis);
        }
        Ok(Self { grid, dim, elements })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn element(&self, i: usize) -> &BasisElement {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    /// Builds the dense doubled-state form of element `i`.
    pub fn materialize(&self, i: usize) -> AsymmetricState {
        let el = &self.elements[i];
        let mut f = GridFunction::zeros(self.grid, self.dim);
        for &(node, value) in &el.entries {
            f.set_value(node, el.component, value);
        }
        match el.branch {
            BranchTag::PlusOnly => AsymmetricState::lift_plus(f),
            _ => AsymmetricState::lift_minus(f),
        }
    }
}

/// First variation of the action at `x` in direction `h`, in closed form:
/// trapezoidal quadrature of
/// `∂₁L̃·(h₊+h₋) + ∂₂L̃·(D⁺h₊ + D⁻h₋)`
/// with the gradients evaluated on the summed stages of `x`.
pub fn gateaux(lhat: &EmbeddedLagrangian, x: &AsymmetricState, h: &AsymmetricState) -> Result<f64> {
    let grid = lhat.ops().grid();
    if x.grid() != grid || h.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let dim = lhat.base().dim();
    if x.dim() != dim {
        return Err(Error::DimMismatch { expected: dim, got: x.dim() });
    }
    if h.dim() != dim {
        return Err(Error::DimMismatch { expected: dim, got: h.dim() });
    }
    let (pos, vel) = lhat.summed_stages(x)?;
    let d1s = lhat.d1_series(&pos, &vel)?;
    let d2s = lhat.d2_series(&pos, &vel)?;
    let hsum = h.plus().add_scaled(1.0, h.minus())?;
    let hvel = lhat
        .ops()
        .apply_plus(h.plus())?
        .add_scaled(1.0, &lhat.ops().apply_minus(h.minus())?)?;
    let nn = grid.n_nodes();
    let mut integrand = vec![0.0; nn];
    for c in 0..dim {
        let (a, b) = (d1s.component(c), hsum.component(c));
        let (p, q) = (d2s.component(c), hvel.component(c));
        for k in 0..nn {
            integrand[k] += a[k] * b[k] + p[k] * q[k];
        }
    }
    let value = trapezoid(grid.step(), &integrand);
    if !value.is_finite() {
        return Err(Error::NonFiniteValue { node: 0, component: 0 });
    }
    Ok(value)
}

/// Finite-difference version of [`gateaux`]: central difference of
/// `s -> action(x + s·h)` at `s = 0`. Independent arithmetic path, used to
/// cross-check the closed form.
pub fn gateaux_numeric(
    lhat: &EmbeddedLagrangian,
    x: &AsymmetricState,
    h: &AsymmetricState,
) -> Result<f64> {
    let s = GATEAUX_FD_STEP * (1.0 + x.max_abs());
    let plus = lhat.action(&x.add_scaled(s, h)?)?;
    let minus = lhat.action(&x.add_scaled(-s, h)?)?;
    Ok((plus - minus) / (2.0 * s))
}

/// The basis element whose pairing was largest in magnitude.
#[derive(Debug, Clone, Serialize)]
pub struct WorstElement {
    pub branch: BranchTag,
    pub component: usize,
    pub anchor: usize,
    pub pairing: f64,
}

/// Outcome of an extremality sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalReport {
    pub space: VariationSpaceKind,
    pub extremal: bool,
    pub tol: f64,
    pub scale: f64,
    /// The effective bound `tol · scale` each pairing is held to.
    pub threshold: f64,
    pub max_pairing: f64,
    pub n_elements: usize,
    pub worst: Option<WorstElement>,
}

/// Default extremality tolerance; quadrature error accumulates with node
/// count.
pub fn default_extremal_tol(grid: TimeGrid) -> f64 {
    1e-6 * grid.n_steps() as f64
}

/// Sweeps every basis element of `space` and reports whether all pairings
/// `|dA(x)(h_i)|` stay below `tol · (1 + |A(x)|)`.
pub fn is_extremal(
    lhat: &EmbeddedLagrangian,
    x: &AsymmetricState,
    space: &VariationSpace,
    tol: Option<f64>,
) -> Result<ExtremalReport> {
    let basis = space.basis(lhat.ops(), lhat.base().dim())?;
    let grid = lhat.ops().grid();
    let tol = tol.unwrap_or_else(|| default_extremal_tol(grid));
    let scale = 1.0 + lhat.action(x)?.abs();
    let pairings = indexed_map(basis.len(), |i| gateaux(lhat, x, &basis.materialize(i)));
    let mut max_pairing = 0.0_f64;
    let mut worst: Option<WorstElement> = None;
    for (i, p) in pairings.into_iter().enumerate() {
        let p = p?;
        if p.abs() > max_pairing {
            max_pairing = p.abs();
            let el = basis.element(i);
            worst = Some(WorstElement {
                branch: el.branch,
                component: el.component,
                anchor: el.anchor,
                pairing: p,
            });
        }
    }
    let threshold = tol * scale;
    Ok(ExtremalReport {
        space: space.kind(),
        extremal: max_pairing <= threshold,
        tol,
        scale,
        threshold,
        max_pairing,
        n_elements: basis.len(),
        worst,
    })
}

/// Side-by-side comparison of the two residual derivation paths.
#[derive(Debug, Clone, Serialize)]
pub struct CoherenceReport {
    pub path_a_norm: f64,
    pub path_b_norm: f64,
    pub max_diff: f64,
    pub verdict: String,
    #[serde(skip)]
    pub path_a_kind: ELKind,
    #[serde(skip)]
    pub path_b_kind: ELKind,
}

impl CoherenceReport {
    pub fn passed(&self) -> bool {
        self.verdict == "PASS"
    }
}

/// Canonical coherence check: the lifted equation (path A) against the causal
/// residual that the matching restricted variational principle yields
/// (path B) — minus-branch variations for a plus state and vice versa.
pub fn coherence_check(
    lagrangian: &Lagrangian,
    ops: &OperatorPair,
    x: &AsymmetricState,
    tol: f64,
) -> Result<CoherenceReport> {
    let space = match x.tag() {
        BranchTag::PlusOnly => VariationSpaceKind::Minus,
        BranchTag::MinusOnly => VariationSpaceKind::Plus,
        BranchTag::General => {
            return Err(Error::WrongTag {
                found: BranchTag::General,
                message: "coherence comparison is defined on single-branch states".into(),
            })
        }
    };
    coherence_check_with_space(lagrangian, ops, x, space, tol)
}

/// Coherence check with an explicit variation space for path B. Picking the
/// same-branch space deliberately assembles the anti-causal residual, which
/// fails against path A whenever the operator pair is genuinely asymmetric.
pub fn coherence_check_with_space(
    lagrangian: &Lagrangian,
    ops: &OperatorPair,
    x: &AsymmetricState,
    space: VariationSpaceKind,
    tol: f64,
) -> Result<CoherenceReport> {
    let path_b_kind = match (x.tag(), space) {
        (BranchTag::PlusOnly, VariationSpaceKind::Minus) => ELKind::CausalPlus,
        (BranchTag::PlusOnly, VariationSpaceKind::Plus) => ELKind::AntiCausalPlus,
        (BranchTag::MinusOnly, VariationSpaceKind::Plus) => ELKind::CausalMinus,
        (BranchTag::MinusOnly, VariationSpaceKind::Minus) => ELKind::AntiCausalMinus,
        (BranchTag::General, _) => {
            return Err(Error::WrongTag {
                found: BranchTag::General,
                message: "coherence comparison is defined on single-branch states".into(),
            })
        }
        (_, VariationSpaceKind::Full) => {
            return Err(Error::InvalidParameter {
                name: "space",
                message: "full-space variations yield a pair of equations, not one residual".into(),
            })
        }
    };
    let lhat = EmbeddedLagrangian::new(lagrangian.clone(), ops.clone());
    let path_a = lhat.embedded_el_residual(x)?;
    let path_b = lhat.el_residual(x, path_b_kind)?;
    let diff = path_a.values().add_scaled(-1.0, path_b.values())?;
    let max_diff = diff.max_abs();
    Ok(CoherenceReport {
        path_a_norm: path_a.max_abs(),
        path_b_norm: path_b.max_abs(),
        max_diff,
        verdict: if max_diff <= tol { "PASS" } else { "FAIL" }.to_string(),
        path_a_kind: ELKind::EmbeddedGeneral,
        path_b_kind,
    })
}

/// Result of the discrete fundamental-lemma surrogate.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    /// True when every reconstructed interior value is below `tol`, i.e. the
    /// pairings certify the function vanishes on the covered nodes.
    pub holds: bool,
    pub max_reconstructed: f64,
    /// Worst disagreement between reconstructed and actual samples; a sanity
    /// bound on the reconstruction itself.
    pub reconstruction_error: f64,
    /// First `(node, component)` whose reconstructed value exceeds `tol`.
    pub witness: Option<(usize, usize)>,
}

/// Pairs `r` against every hat of `basis`, reconstructs the covered interior
/// samples from the pairings alone, and reports whether they all vanish to
/// `tol`. Requires a single-entry (plain hat) basis: corrected fractional
/// hats mix nodes and cannot isolate a sample.
pub fn fundamental_lemma_probe(
    r: &GridFunction,
    basis: &VariationBasis,
    tol: f64,
) -> Result<LemmaReport> {
    if r.grid() != basis.grid() {
        return Err(Error::GridMismatch);
    }
    if r.dim() != basis.dim() {
        return Err(Error::DimMismatch { expected: basis.dim(), got: r.dim() });
    }
    let grid = basis.grid();
    let nn = grid.n_nodes();
    let mut max_reconstructed = 0.0_f64;
    let mut reconstruction_error = 0.0_f64;
    let mut witness = None;
    let mut integrand = vec![0.0; nn];
    for el in basis.elements() {
        let [(node, value)] = el.entries()[..] else {
            return Err(Error::UnsupportedBasis(
                "sample reconstruction needs single-entry hats".into(),
            ));
        };
        if node == 0 || node == grid.n_steps() {
            return Err(Error::UnsupportedBasis("hats must sit at interior nodes".into()));
        }
        // Pairing ∫ r·h dt computed by the same quadrature the action uses.
        integrand.fill(0.0);
        integrand[node] = r.value(node, el.component) * value;
        let pairing = trapezoid(grid.step(), &integrand);
        let reconstructed = pairing / (grid.step() * value);
        reconstruction_error =
            reconstruction_error.max((reconstructed - r.value(node, el.component)).abs());
        if reconstructed.abs() > max_reconstructed {
            max_reconstructed = reconstructed.abs();
        }
        if reconstructed.abs() > tol && witness.is_none() {
            witness = Some((node, el.component));
        }
    }
    Ok(LemmaReport {
        holds: witness.is_none(),
        max_reconstructed,
        reconstruction_error,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{free_particle, harmonic_oscillator};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn interior_bump(grid: TimeGrid, center: f64, width: f64) -> GridFunction {
        GridFunction::sample_scalar(grid, move |t| {
            let u: f64 = (t - center) / width;
            if u.abs() < 1.0 {
                (1.0 - u * u).powi(2)
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn gateaux_of_zero_direction_is_zero() {
        let g = TimeGrid::new(0.0, 1.0, 20).unwrap();
        let lhat =
            EmbeddedLagrangian::new(harmonic_oscillator(1.0).unwrap(), OperatorPair::classical(g));
        let x = AsymmetricState::lift_plus(GridFunction::sample_scalar(g, |t| t.sin()).unwrap());
        let h = AsymmetricState::zeros(g, 1);
        assert_eq!(gateaux(&lhat, &x, &h).unwrap(), 0.0);
    }

    #[test]
    fn free_particle_cross_branch_pairing_matches_direct_quadrature() {
        // L = ½v², x₊(t) = t, h on the minus branch: the closed form reduces
        // to ∫ D⁺x₊ · D⁻h₋ dt.
        let g = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let ops = OperatorPair::finite_diff(2.0 * g.step(), g).unwrap();
        let lhat = EmbeddedLagrangian::new(free_particle(1).unwrap(), ops.clone());
        let x = AsymmetricState::lift_plus(GridFunction::sample_scalar(g, |t| t).unwrap());
        let bump = interior_bump(g, 0.5, 0.25);
        let h = AsymmetricState::lift_minus(bump.clone());

        let got = gateaux(&lhat, &x, &h).unwrap();
        let dxp = ops.apply_plus(x.plus()).unwrap();
        let dhm = ops.apply_minus(&bump).unwrap();
        let integrand: Vec<f64> =
            (0..g.n_nodes()).map(|k| dxp.value(k, 0) * dhm.value(k, 0)).collect();
        let expect = trapezoid(g.step(), &integrand);
        assert!((got - expect).abs() < 1e-14, "{got} vs {expect}");
    }

    #[test]
    fn closed_form_agrees_with_finite_difference_oracle() {
        let g = TimeGrid::new(0.0, 2.0, 60).unwrap();
        for ops in [
            OperatorPair::classical(g),
            OperatorPair::finite_diff(g.step(), g).unwrap(),
            OperatorPair::fractional_rl(0.6, 1.1, g).unwrap(),
        ] {
            let lhat = EmbeddedLagrangian::new(harmonic_oscillator(1.3).unwrap(), ops);
            let x = AsymmetricState::general(
                GridFunction::sample_scalar(g, |t| (1.1 * t).sin()).unwrap(),
                GridFunction::sample_scalar(g, |t| 0.3 * t * (2.0 - t)).unwrap(),
            )
            .unwrap();
            let h = AsymmetricState::lift_plus(interior_bump(g, 1.0, 0.5));
            let a = gateaux(&lhat, &x, &h).unwrap();
            let b = gateaux_numeric(&lhat, &x, &h).unwrap();
            // Quadratic Lagrangian: the central difference is exact up to
            // rounding amplified by 1/h_fd.
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn gateaux_is_linear_in_the_direction(
            a in -3.0_f64..3.0,
            b in -3.0_f64..3.0,
            i in 1_usize..19,
            j in 1_usize..19,
        ) {
            let g = TimeGrid::new(0.0, 1.0, 20).unwrap();
            let ops = OperatorPair::finite_diff(g.step(), g).unwrap();
            let lhat = EmbeddedLagrangian::new(harmonic_oscillator(0.8).unwrap(), ops);
            let x = AsymmetricState::lift_plus(
                GridFunction::sample_scalar(g, |t| (2.0 * t).cos()).unwrap(),
            );
            let mut h1v = GridFunction::zeros(g, 1);
            h1v.set_value(i, 0, 1.0);
            let mut h2v = GridFunction::zeros(g, 1);
            h2v.set_value(j, 0, 1.0);
            let h1 = AsymmetricState::lift_minus(h1v.clone());
            let h2 = AsymmetricState::lift_minus(h2v.clone());
            let combo = AsymmetricState::lift_minus(
                h1v.scale(a).add_scaled(b, &h2v).unwrap(),
            );
            let lhs = gateaux(&lhat, &x, &combo).unwrap();
            let rhs = a * gateaux(&lhat, &x, &h1).unwrap() + b * gateaux(&lhat, &x, &h2).unwrap();
            prop_assert!(
                (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs() + rhs.abs()),
                "{lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn classical_oscillator_solution_is_full_space_extremal() {
        let g = TimeGrid::new(0.0, 3.0, 100).unwrap();
        let lhat =
            EmbeddedLagrangian::new(harmonic_oscillator(1.0).unwrap(), OperatorPair::classical(g));
        let x = AsymmetricState::lift_plus(GridFunction::sample_scalar(g, |t| t.cos()).unwrap());
        let report =
            is_extremal(&lhat, &x, &VariationSpace::new(VariationSpaceKind::Full), None).unwrap();
        assert!(report.extremal, "max pairing {} > {}", report.max_pairing, report.threshold);
        // And a visibly wrong trajectory is rejected through the same sweep.
        let y = AsymmetricState::lift_plus(
            GridFunction::sample_scalar(g, |t| t * t + 1.0).unwrap(),
        );
        let bad =
            is_extremal(&lhat, &y, &VariationSpace::new(VariationSpaceKind::Full), None).unwrap();
        assert!(!bad.extremal);
        assert!(bad.worst.is_some());
    }

    #[test]
    fn shifted_pair_marched_solution_is_minus_space_extremal() {
        // March the causal oscillator update under a one-step shifted pair:
        // every interior residual vanishes to rounding, so the minus-space
        // sweep must accept, and a random trajectory must be rejected.
        let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let ops = OperatorPair::finite_diff(g.step(), g).unwrap();
        let lhat = EmbeddedLagrangian::new(harmonic_oscillator(1.0).unwrap(), ops);
        let e2 = g.step() * g.step();
        let mut xs = vec![0.0; g.n_nodes()];
        xs[0] = 1.0;
        xs[1] = 2.0 * xs[0] / (1.0 + e2);
        for k in 2..xs.len() {
            xs[k] = (2.0 * xs[k - 1] - xs[k - 2]) / (1.0 + e2);
        }
        let x = AsymmetricState::lift_plus(
            GridFunction::from_components(g, vec![xs]).unwrap(),
        );
        let space = VariationSpace::new(VariationSpaceKind::Minus);
        let report = is_extremal(&lhat, &x, &space, None).unwrap();
        assert!(report.extremal, "max pairing {}", report.max_pairing);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise: Vec<f64> = (0..g.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = AsymmetricState::lift_plus(GridFunction::from_components(g, vec![noise]).unwrap());
        assert!(!is_extremal(&lhat, &y, &space, None).unwrap().extremal);
    }

    #[test]
    fn full_space_sweep_matches_brute_force_residual_pair_on_small_grids() {
        // The sweep must agree with directly thresholding the two general
        // residual series (forward-outer on minus anchors, backward-outer on
        // plus anchors), which is the two-equation characterization.
        let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let ops = OperatorPair::finite_diff(2.0 * g.step(), g).unwrap();
        let lag = harmonic_oscillator(1.0).unwrap();
        let lhat = EmbeddedLagrangian::new(lag, ops.clone());
        let space = VariationSpace::new(VariationSpaceKind::Full);
        let m = ops.shift_steps();
        let n = g.n_steps();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for case in 0..8 {
            let (xp, xm) = if case == 0 {
                (GridFunction::zeros(g, 1), GridFunction::zeros(g, 1))
            } else {
                let a: Vec<f64> = (0..g.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b: Vec<f64> = (0..g.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
                (
                    GridFunction::from_components(g, vec![a]).unwrap(),
                    GridFunction::from_components(g, vec![b]).unwrap(),
                )
            };
            let x = AsymmetricState::general(xp.clone(), xm.clone()).unwrap();
            let report = is_extremal(&lhat, &x, &space, None).unwrap();

            // Brute-force residual pair on the summed stages.
            let pos = xp.add_scaled(1.0, &xm).unwrap();
            let vel = ops
                .apply_plus(&xp)
                .unwrap()
                .add_scaled(1.0, &ops.apply_minus(&xm).unwrap())
                .unwrap();
            let d1: Vec<f64> = (0..g.n_nodes()).map(|k| -pos.value(k, 0)).collect();
            let d2 = vel;
            let outer_minus = ops.apply_minus(&d2).unwrap();
            let outer_plus = ops.apply_plus(&d2).unwrap();
            let mut max_resid = 0.0_f64;
            for anchor in (1..n).filter(|&i| i != n - m) {
                max_resid = max_resid.max((d1[anchor] - outer_minus.value(anchor, 0)).abs());
            }
            for anchor in (1..n).filter(|&i| i != m) {
                max_resid = max_resid.max((d1[anchor] - outer_plus.value(anchor, 0)).abs());
            }
            let brute = max_resid <= report.threshold / g.step();
            assert_eq!(report.extremal, brute, "case {case}: {} vs {max_resid}", report.max_pairing);
        }
    }

    #[test]
    fn coherence_passes_canonically_and_fails_adversarially() {
        let g = TimeGrid::new(0.0, 2.0, 50).unwrap();
        let lag = harmonic_oscillator(1.0).unwrap();
        let x = AsymmetricState::lift_plus(
            GridFunction::sample_scalar(g, |t| (1.7 * t).sin() + 0.2).unwrap(),
        );
        for ops in [
            OperatorPair::classical(g),
            OperatorPair::finite_diff(g.step(), g).unwrap(),
            OperatorPair::fractional_rl(0.7, 1.0, g).unwrap(),
        ] {
            let rep = coherence_check(&lag, &ops, &x, 1e-12).unwrap();
            assert!(rep.passed(), "max diff {}", rep.max_diff);
            assert_eq!(rep.path_b_kind, ELKind::CausalPlus);
        }
        // Same-branch variations assemble the anti-causal residual; for a
        // genuinely one-sided pair that disagrees with the lifted equation.
        let frac = OperatorPair::fractional_rl(0.7, 1.0, g).unwrap();
        let adv =
            coherence_check_with_space(&lag, &frac, &x, VariationSpaceKind::Plus, 1e-12).unwrap();
        assert!(!adv.passed());
        assert_eq!(adv.path_b_kind, ELKind::AntiCausalPlus);
        // The classical pair is direction-blind, so even the adversarial
        // pairing agrees.
        let cls = OperatorPair::classical(g);
        let adv_cls =
            coherence_check_with_space(&lag, &cls, &x, VariationSpaceKind::Plus, 1e-12).unwrap();
        assert!(adv_cls.passed());
    }

    #[test]
    fn coherence_rejects_general_states_and_full_space() {
        let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let lag = free_particle(1).unwrap();
        let ops = OperatorPair::classical(g);
        let both = AsymmetricState::general(
            GridFunction::sample_scalar(g, |t| t).unwrap(),
            GridFunction::sample_scalar(g, |t| 1.0 - t).unwrap(),
        )
        .unwrap();
        assert!(matches!(coherence_check(&lag, &ops, &both, 1e-12), Err(Error::WrongTag { .. })));
        let plus = AsymmetricState::lift_plus(GridFunction::sample_scalar(g, |t| t).unwrap());
        assert!(coherence_check_with_space(&lag, &ops, &plus, VariationSpaceKind::Full, 1e-12)
            .is_err());
    }

    #[test]
    fn admission_predicates_accept_own_basis_and_reject_violations() {
        let g = TimeGrid::new(0.0, 1.0, 12).unwrap();
        for ops in [
            OperatorPair::classical(g),
            OperatorPair::finite_diff(3.0 * g.step(), g).unwrap(),
            OperatorPair::fractional_rl(0.5, 1.0, g).unwrap(),
        ] {
            for kind in
                [VariationSpaceKind::Full, VariationSpaceKind::Plus, VariationSpaceKind::Minus]
            {
                let space = VariationSpace::new(kind);
                let basis = space.basis(&ops, 1).unwrap();
                for i in 0..basis.len() {
                    assert!(
                        space.admits(&ops, &basis.materialize(i)).unwrap(),
                        "{:?} {kind:?} element {i}",
                        ops.kind()
                    );
                }
            }
        }
        // A hat at the excluded image node violates the minus predicate of a
        // shifted pair.
        let fd = OperatorPair::finite_diff(3.0 * g.step(), g).unwrap();
        let mut h = GridFunction::zeros(g, 1);
        h.set_value(3, 0, 1.0);
        let state = AsymmetricState::lift_minus(h);
        assert!(!VariationSpace::new(VariationSpaceKind::Minus).admits(&fd, &state).unwrap());
        // Nonzero endpoint sample violates every plus predicate.
        let mut e = GridFunction::zeros(g, 1);
        e.set_value(0, 0, 0.5);
        assert!(!VariationSpace::new(VariationSpaceKind::Plus)
            .admits(&fd, &AsymmetricState::lift_plus(e))
            .unwrap());
    }

    #[test]
    fn fractional_basis_weighted_sums_cancel_exactly() {
        let g = TimeGrid::new(0.0, 1.0, 30).unwrap();
        let ops = OperatorPair::fractional_rl(0.37, 2.0, g).unwrap();
        let w = ops.gl_weight_table().to_vec();
        let n = g.n_steps();
        let basis = VariationSpace::new(VariationSpaceKind::Minus).basis(&ops, 1).unwrap();
        for i in 0..basis.len() {
            let h = basis.materialize(i);
            let series = h.minus().component(0);
            let mut acc = 0.0;
            for k in 1..n {
                acc += w[k] * series[k];
            }
            assert_eq!(acc, 0.0, "element {i}");
        }
    }

    #[test]
    fn tiny_grids_yield_an_empty_basis_error() {
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let ops = OperatorPair::fractional_rl(0.5, 1.0, g).unwrap();
        assert!(matches!(
            VariationSpace::new(VariationSpaceKind::Minus).basis(&ops, 1),
            Err(Error::EmptyBasis)
        ));
    }

    #[test]
    fn lemma_probe_clears_zero_and_localizes_a_spike() {
        let g = TimeGrid::new(0.0, 1.0, 20).unwrap();
        let hats = VariationBasis::interior_hats(g, 1, BranchTag::PlusOnly).unwrap();
        let zero = GridFunction::zeros(g, 1);
        let rep = fundamental_lemma_probe(&zero, &hats, 1e-10).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.max_reconstructed, 0.0);

        let mut spike = GridFunction::zeros(g, 1);
        spike.set_value(7, 0, 2.5);
        let rep = fundamental_lemma_probe(&spike, &hats, 1e-10).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.witness, Some((7, 0)));
        assert!((rep.max_reconstructed - 2.5).abs() < 1e-12);
        assert!(rep.reconstruction_error < 1e-12);

        let smooth = GridFunction::sample_scalar(g, |t| (3.0 * t).sin()).unwrap();
        assert!(!fundamental_lemma_probe(&smooth, &hats, 1e-10).unwrap().holds);
    }

    #[test]
    fn lemma_probe_rejects_multi_entry_bases() {
        let g = TimeGrid::new(0.0, 1.0, 20).unwrap();
        let ops = OperatorPair::fractional_rl(0.5, 1.0, g).unwrap();
        let basis = VariationSpace::new(VariationSpaceKind::Minus).basis(&ops, 1).unwrap();
        let r = GridFunction::zeros(g, 1);
        assert!(matches!(
            fundamental_lemma_probe(&r, &basis, 1e-10),
            Err(Error::UnsupportedBasis(_))
        ));
    }
}
