//! Paired forward/backward derivative operators on a uniform grid.
//!
//! Three families share one interface. `Classical` is the ordinary derivative
//! (central differences inside, one-sided at the ends) where forward and
//! backward coincide. `FiniteDiff` uses a left shift for the forward operator
//! and a right shift for the backward one, with a finite shift width `eps`.
//! `FractionalRL` realizes left- and right-sided fractional derivatives of
//! order `alpha` through Grünwald–Letnikov convolutions, scaled by a time
//! constant `tau` so both operators keep the dimensions of a first derivative.
//!
//! Samples outside `[a, b]` are taken as zero everywhere (zero extension), so
//! the forward operator at node `k` reads only nodes `<= k` and the backward
//! operator only nodes `>= k`.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TimeGrid};
use crate::util::{dot, trapezoid};

/// Relative slack when checking that `eps` is a whole number of grid steps.
const EPS_ALIGNMENT_TOL: f64 = 1e-9;

/// Which derivative family a pair of operators belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    /// d/dt on both sides.
    Classical,
    /// Backward/forward difference with shift width `eps`.
    FiniteDiff { eps: f64 },
    /// Left/right fractional derivative of order `alpha` with time scale
    /// `tau`.
    FractionalRL { alpha: f64, tau: f64 },
}

/// A forward/backward operator pair bound to one grid.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    kind: OperatorKind,
    grid: TimeGrid,
    // FiniteDiff: eps expressed in whole grid steps.
    shift: usize,
    // FractionalRL: Grünwald–Letnikov weights of order alpha, one per node.
    weights: Vec<f64>,
}

impl OperatorPair {
    pub fn classical(grid: TimeGrid) -> Self {
        Self { kind: OperatorKind::Classical, grid, shift: 0, weights: Vec::new() }
    }

    /// `eps` must be a whole (positive) number of grid steps.
    pub fn finite_diff(eps: f64, grid: TimeGrid) -> Result<Self> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "eps",
                message: format!("shift width must be positive and finite, got {eps}"),
            });
        }
        let ratio = eps / grid.step();
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > EPS_ALIGNMENT_TOL * ratio.max(1.0) {
            return Err(Error::InvalidParameter {
                name: "eps",
                message: format!(
                    "shift width {eps} is not a whole number of grid steps (step = {})",
                    grid.step()
                ),
            });
        }
        let shift = m as usize;
        if shift >= grid.n_steps() {
            return Err(Error::InvalidParameter {
                name: "eps",
                message: format!("shift of {shift} steps does not fit a grid of {} steps", grid.n_steps()),
            });
        }
        Ok(Self { kind: OperatorKind::FiniteDiff { eps }, grid, shift, weights: Vec::new() })
    }

    /// Fractional pair of order `alpha` in `(0, 1]` with time scale `tau > 0`.
    ///
    /// `alpha = 1` is admitted and degenerates to one-step backward/forward
    /// differences, which keeps the classical limit reachable through the same
    /// interface.
    pub fn fractional_rl(alpha: f64, tau: f64, grid: TimeGrid) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
            return Err(Error::InvalidParameter {
                name: "alpha",
                message: format!("order must lie in (0, 1], got {alpha}"),
            });
        }
        if !tau.is_finite() || tau <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "tau",
                message: format!("time scale must be positive, got {tau}"),
            });
        }
        let weights = gl_weights(alpha, grid.n_nodes());
        Ok(Self { kind: OperatorKind::FractionalRL { alpha, tau }, grid, shift: 0, weights })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// For `FiniteDiff`, the shift expressed in grid steps.
    pub fn shift_steps(&self) -> usize {
        self.shift
    }

    fn check_input(&self, f: &GridFunction) -> Result<()> {
        if f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Forward (past-reading) operator.
    pub fn apply_plus(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check_input(f)?;
        let mut out = GridFunction::zeros(self.grid, f.dim());
        for c in 0..f.dim() {
            let src = f.component(c);
            let dst = out.component_mut(c);
            match self.kind {
                OperatorKind::Classical => classical_derivative(self.grid.step(), src, dst),
                OperatorKind::FiniteDiff { eps } => {
                    let m = self.shift;
                    for k in 0..src.len() {
                        let past = if k >= m { src[k - m] } else { 0.0 };
                        dst[k] = (src[k] - past) / eps;
                    }
                }
                OperatorKind::FractionalRL { alpha, tau } => {
                    let coeff = tau.powf(alpha - 1.0) * self.grid.step().powf(-alpha);
                    convolve_left(&self.weights, coeff, src, dst);
                }
            }
        }
        Ok(out)
    }

    /// Backward (future-reading) operator.
    pub fn apply_minus(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check_input(f)?;
        let mut out = GridFunction::zeros(self.grid, f.dim());
        for c in 0..f.dim() {
            let src = f.component(c);
            let dst = out.component_mut(c);
            match self.kind {
                OperatorKind::Classical => classical_derivative(self.grid.step(), src, dst),
                OperatorKind::FiniteDiff { eps } => {
                    let m = self.shift;
                    let n = src.len() - 1;
                    for k in 0..src.len() {
                        let future = if k + m <= n { src[k + m] } else { 0.0 };
                        dst[k] = (future - src[k]) / eps;
                    }
                }
                OperatorKind::FractionalRL { alpha, tau } => {
                    // Overall minus sign: the backward operator is the negated
                    // right-sided derivative, which restores d/dt at alpha = 1.
                    let coeff = -tau.powf(alpha - 1.0) * self.grid.step().powf(-alpha);
                    convolve_right(&self.weights, coeff, src, dst);
                }
            }
        }
        Ok(out)
    }

    /// `power`-fold application of the forward operator; `power = 0` is the
    /// identity.
    pub fn apply_plus_power(&self, f: &GridFunction, power: usize) -> Result<GridFunction> {
        self.check_input(f)?;
        let mut out = f.clone();
        for _ in 0..power {
            out = self.apply_plus(&out)?;
        }
        Ok(out)
    }

    pub fn apply_minus_power(&self, f: &GridFunction, power: usize) -> Result<GridFunction> {
        self.check_input(f)?;
        let mut out = f.clone();
        for _ in 0..power {
            out = self.apply_minus(&out)?;
        }
        Ok(out)
    }

    /// Boundary pairing appearing in integration by parts.
    ///
    /// Classical operators pair through endpoint values,
    /// `f(b)·g(b) − f(a)·g(a)`. The shifted and fractional families carry no
    /// boundary pairing: with zero extension their discrete forward and
    /// backward operators are exact negative transposes, so the functional is
    /// identically zero.
    pub fn boundary_functional(&self, f: &GridFunction, g: &GridFunction) -> Result<f64> {
        self.check_input(f)?;
        self.check_input(g)?;
        if f.dim() != g.dim() {
            return Err(Error::DimMismatch { expected: f.dim(), got: g.dim() });
        }
        match self.kind {
            OperatorKind::Classical => {
                let n = self.grid.n_steps();
                let mut fb = vec![0.0; f.dim()];
                let mut gb = vec![0.0; f.dim()];
                let mut fa = vec![0.0; f.dim()];
                let mut ga = vec![0.0; f.dim()];
                f.node_into(n, &mut fb);
                g.node_into(n, &mut gb);
                f.node_into(0, &mut fa);
                g.node_into(0, &mut ga);
                Ok(dot(&fb, &gb) - dot(&fa, &ga))
            }
            _ => Ok(0.0),
        }
    }

    /// Magnitude of the integration-by-parts defect
    /// `|∫ D⁺f·g dt + ∫ f·D⁻g dt − R(f, g)|` under trapezoidal quadrature.
    pub fn ibp_residual(&self, f: &GridFunction, g: &GridFunction) -> Result<f64> {
        self.check_input(f)?;
        self.check_input(g)?;
        if f.dim() != g.dim() {
            return Err(Error::DimMismatch { expected: f.dim(), got: g.dim() });
        }
        let df = self.apply_plus(f)?;
        let dg = self.apply_minus(g)?;
        let nn = self.grid.n_nodes();
        let mut left = vec![0.0; nn];
        let mut right = vec![0.0; nn];
        for c in 0..f.dim() {
            let (fc, gc) = (f.component(c), g.component(c));
            let (dfc, dgc) = (df.component(c), dg.component(c));
            for k in 0..nn {
                left[k] += dfc[k] * gc[k];
                right[k] += fc[k] * dgc[k];
            }
        }
        let step = self.grid.step();
        let r = self.boundary_functional(f, g)?;
        Ok((trapezoid(step, &left) + trapezoid(step, &right) - r).abs())
    }

    /// Grünwald–Letnikov weights held by a fractional pair.
    pub fn gl_weight_table(&self) -> &[f64] {
        &self.weights
    }
}

fn classical_derivative(step: f64, src: &[f64], dst: &mut [f64]) {
    let n = src.len() - 1;
    dst[0] = (src[1] - src[0]) / step;
    for k in 1..n {
        dst[k] = (src[k + 1] - src[k - 1]) / (2.0 * step);
    }
    dst[n] = (src[n] - src[n - 1]) / step;
}

/// Grünwald–Letnikov weights `w_0..w_{len-1}` of order `order`.
///
/// `w_0 = 1` and `w_j = w_{j-1} · (j - 1 - order) / j`, the numerically stable
/// form of the alternating binomial coefficients of `(1 - z)^order`.
pub fn gl_weights(order: f64, len: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(len);
    w.push(1.0);
    for j in 1..len {
        let prev = w[j - 1];
        w.push(prev * ((j as f64 - 1.0 - order) / j as f64));
    }
    w
}

/// Causal convolution `dst[k] = coeff · Σ_{j=0..k} w[j] · src[k-j]`.
///
/// Summation order is fixed (ascending `j`) so outputs are bit-reproducible.
pub fn convolve_left(w: &[f64], coeff: f64, src: &[f64], dst: &mut [f64]) {
    for k in 0..src.len() {
        let mut acc = 0.0;
        for j in 0..=k {
            acc += w[j] * src[k - j];
        }
        dst[k] = coeff * acc;
    }
}

/// Anti-causal convolution `dst[k] = coeff · Σ_{j=0..n-k} w[j] · src[k+j]`.
pub fn convolve_right(w: &[f64], coeff: f64, src: &[f64], dst: &mut [f64]) {
    let n = src.len() - 1;
    for k in 0..src.len() {
        let mut acc = 0.0;
        for j in 0..=(n - k) {
            acc += w[j] * src[k + j];
        }
        dst[k] = coeff * acc;
    }
}

/// Left Grünwald–Letnikov derivative of arbitrary order in `(0, 2]`, without
/// the `tau` scaling. Used for composing and solving second-order causal
/// equations.
pub fn gl_apply_left(order: f64, f: &GridFunction) -> Result<GridFunction> {
    if !order.is_finite() || order <= 0.0 || order > 2.0 {
        return Err(Error::InvalidParameter {
            name: "order",
            message: format!("order must lie in (0, 2], got {order}"),
        });
    }
    let grid = f.grid();
    let w = gl_weights(order, grid.n_nodes());
    let coeff = grid.step().powf(-order);
    let mut out = GridFunction::zeros(grid, f.dim());
    for c in 0..f.dim() {
        convolve_left(&w, coeff, f.component(c), out.component_mut(c));
    }
    Ok(out)
}

/// Right-sided counterpart of [`gl_apply_left`].
pub fn gl_apply_right(order: f64, f: &GridFunction) -> Result<GridFunction> {
    if !order.is_finite() || order <= 0.0 || order > 2.0 {
        return Err(Error::InvalidParameter {
            name: "order",
            message: format!("order must lie in (0, 2], got {order}"),
        });
    }
    let grid = f.grid();
    let w = gl_weights(order, grid.n_nodes());
    let coeff = grid.step().powf(-order);
    let mut out = GridFunction::zeros(grid, f.dim());
    for c in 0..f.dim() {
        convolve_right(&w, coeff, f.component(c), out.component_mut(c));
    }
    Ok(out)
}
