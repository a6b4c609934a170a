//! Uniform time grids, sampled vector trajectories, and two-branch states.
//!
//! Everything downstream works on [`GridFunction`] values: dense samples of a
//! vector-valued function of time on a shared uniform grid. An
//! [`AsymmetricState`] carries two such trajectories, one evolved by the
//! forward (past-dependent) operator and one by the backward
//! (future-dependent) operator.

use crate::error::{Error, Result};
use crate::util::trapezoid;
use std::io::{self, Write};

/// Closed interval `[a, b]` discretized into `n_steps` uniform steps
/// (`n_steps + 1` nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    a: f64,
    b: f64,
    n_steps: usize,
    step: f64,
}

impl TimeGrid {
    pub fn new(a: f64, b: f64, n_steps: usize) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(Error::InvalidInterval { a, b });
        }
        if n_steps < 2 {
            return Err(Error::TooFewSteps { n_steps });
        }
        let step = (b - a) / n_steps as f64;
        Ok(Self { a, b, n_steps, step })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Time of node `k`. The last node reproduces `b` exactly.
    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        if k == self.n_steps {
            self.b
        } else {
            self.a + k as f64 * self.step
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |k| self.node(k))
    }
}

/// Dense samples of a `dim`-vector function on a [`TimeGrid`].
///
/// Stored component-major: each component is a contiguous series of
/// `n_nodes` samples, which keeps the convolution kernels in the operator
/// module on sequential memory.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TimeGrid,
    dim: usize,
    data: Vec<f64>,
}

impl GridFunction {
    /// Samples a vector-valued callable at every node.
    pub fn sample<F>(grid: TimeGrid, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                message: "dimension must be at least 1".into(),
            });
        }
        let nn = grid.n_nodes();
        let mut data = vec![0.0; dim * nn];
        for k in 0..nn {
            let v = f(grid.node(k));
            if v.len() != dim {
                return Err(Error::DimMismatch { expected: dim, got: v.len() });
            }
            for (c, &x) in v.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::NonFiniteSample { node: k, component: c });
                }
                data[c * nn + k] = x;
            }
        }
        Ok(Self { grid, dim, data })
    }

    /// Samples a scalar callable; the result has `dim == 1`.
    pub fn sample_scalar<F>(grid: TimeGrid, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        Self::sample(grid, 1, |t| vec![f(t)])
    }

    /// Builds a function from per-component sample series.
    pub fn from_components(grid: TimeGrid, components: Vec<Vec<f64>>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "components",
                message: "need at least one component".into(),
            });
        }
        let nn = grid.n_nodes();
        let mut data = Vec::with_capacity(dim * nn);
        for (c, series) in components.iter().enumerate() {
            if series.len() != nn {
                return Err(Error::DimMismatch { expected: nn, got: series.len() });
            }
            for (k, &x) in series.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::NonFiniteSample { node: k, component: c });
                }
            }
            data.extend_from_slice(series);
        }
        Ok(Self { grid, dim, data })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self { grid, dim, data: vec![0.0; dim * grid.n_nodes()] }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, node: usize, component: usize) -> f64 {
        self.data[component * self.grid.n_nodes() + node]
    }

    pub fn set_value(&mut self, node: usize, component: usize, x: f64) {
        let nn = self.grid.n_nodes();
        self.data[component * nn + node] = x;
    }

    /// Contiguous sample series of one component.
    pub fn component(&self, c: usize) -> &[f64] {
        let nn = self.grid.n_nodes();
        &self.data[c * nn..(c + 1) * nn]
    }

    pub(crate) fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let nn = self.grid.n_nodes();
        &mut self.data[c * nn..(c + 1) * nn]
    }

    /// Copies the `dim` components at one node into `buf`.
    pub fn node_into(&self, k: usize, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.dim);
        let nn = self.grid.n_nodes();
        for (c, slot) in buf.iter_mut().enumerate() {
            *slot = self.data[c * nn + k];
        }
    }

    /// True iff every sample is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    /// Trapezoid-weighted L2 norm over the grid.
    pub fn l2_norm(&self) -> f64 {
        let nn = self.grid.n_nodes();
        let mut sq = vec![0.0; nn];
        for c in 0..self.dim {
            let series = self.component(c);
            for k in 0..nn {
                sq[k] += series[k] * series[k];
            }
        }
        trapezoid(self.grid.step(), &sq).sqrt()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.dim != other.dim {
            return Err(Error::DimMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid, dim: self.dim, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, dim: self.dim, data })
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect();
        Ok(Self { grid: self.grid, dim: self.dim, data })
    }

    pub fn scale(&self, s: f64) -> Self {
        let data = self.data.iter().map(|a| s * a).collect();
        Self { grid: self.grid, dim: self.dim, data }
    }

    /// Reverses the sample order in time: node `k` takes the value of node
    /// `n - k`. The grid is unchanged.
    pub fn reflect(&self) -> Self {
        let nn = self.grid.n_nodes();
        let mut data = self.data.clone();
        for c in 0..self.dim {
            data[c * nn..(c + 1) * nn].reverse();
        }
        Self { grid: self.grid, dim: self.dim, data }
    }

    /// Piecewise-linear evaluation at an arbitrary time in `[a, b]`.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>> {
        let g = &self.grid;
        if !t.is_finite() || t < g.a() || t > g.b() {
            return Err(Error::InvalidParameter {
                name: "t",
                message: format!("{t} outside [{}, {}]", g.a(), g.b()),
            });
        }
        let pos = (t - g.a()) / g.step();
        let k = (pos.floor() as usize).min(g.n_steps() - 1);
        let w = pos - k as f64;
        let mut out = vec![0.0; self.dim];
        for (c, slot) in out.iter_mut().enumerate() {
            let series = self.component(c);
            *slot = series[k] + w * (series[k + 1] - series[k]);
        }
        Ok(out)
    }

    /// Writes `t,x0,...,x{dim-1}` rows. Floats are printed in shortest
    /// round-trip form, so parsing the file back reproduces the samples
    /// exactly.
    pub fn to_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write!(w, "t")?;
        for c in 0..self.dim {
            write!(w, ",x{c}")?;
        }
        writeln!(w)?;
        for k in 0..self.grid.n_nodes() {
            write!(w, "{}", self.grid.node(k))?;
            for c in 0..self.dim {
                write!(w, ",{}", self.value(k, c))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Which branches of an [`AsymmetricState`] are structurally zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchTag {
    /// Backward branch identically zero by construction.
    PlusOnly,
    /// Forward branch identically zero by construction.
    MinusOnly,
    /// No structural guarantee on either branch.
    General,
}

/// A pair of trajectories `(plus, minus)` sharing one grid and dimension.
///
/// The plus branch belongs to the forward operator, the minus branch to the
/// backward one. The tag records construction-time knowledge only; selector
/// dispatch re-checks values, so a `General` state whose minus branch happens
/// to be zero behaves like a lifted plus state.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymmetricState {
    plus: GridFunction,
    minus: GridFunction,
    tag: BranchTag,
}

impl AsymmetricState {
    /// Embeds a plain trajectory as `(x, 0)`.
    pub fn lift_plus(x: GridFunction) -> Self {
        let minus = GridFunction::zeros(x.grid(), x.dim());
        Self { plus: x, minus, tag: BranchTag::PlusOnly }
    }

    /// Embeds a plain trajectory as `(0, x)`.
    pub fn lift_minus(x: GridFunction) -> Self {
        let plus = GridFunction::zeros(x.grid(), x.dim());
        Self { plus, minus: x, tag: BranchTag::MinusOnly }
    }

    pub fn general(plus: GridFunction, minus: GridFunction) -> Result<Self> {
        plus.check_compatible(&minus)?;
        Ok(Self { plus, minus, tag: BranchTag::General })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self {
            plus: GridFunction::zeros(grid, dim),
            minus: GridFunction::zeros(grid, dim),
            tag: BranchTag::General,
        }
    }

    pub fn plus(&self) -> &GridFunction {
        &self.plus
    }

    pub fn minus(&self) -> &GridFunction {
        &self.minus
    }

    pub fn tag(&self) -> BranchTag {
        self.tag
    }

    pub fn grid(&self) -> TimeGrid {
        self.plus.grid()
    }

    pub fn dim(&self) -> usize {
        self.plus.dim()
    }

    /// Largest absolute sample across both branches.
    pub fn max_abs(&self) -> f64 {
        self.plus.max_abs().max(self.minus.max_abs())
    }

    /// `self + s * other`, tagged `General`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Result<Self> {
        Ok(Self {
            plus: self.plus.add_scaled(s, &other.plus)?,
            minus: self.minus.add_scaled(s, &other.minus)?,
            tag: BranchTag::General,
        })
    }
}
