//! Scenario configuration: strict JSON in, validated builders out.
//!
//! Specs with optional per-kind fields (operator, lagrangian, profile) are
//! flat structs rather than tagged enums so that unknown and misplaced
//! fields are rejected with a message naming the field; the kind-dependent
//! requirements are enforced by the builders.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use asymlag::dynamics::Direction;
use asymlag::lagrangian::{ELKind, LagrangianFamily};
use asymlag::variational::VariationSpaceKind;
use asymlag::{AsymmetricState, GridFunction, OperatorPair, TimeGrid};

/// One experiment: a grid, an operator pair, a Lagrangian, and a task.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Drives every randomized probe in the scenario.
    pub seed: u64,
    pub grid: GridSpec,
    pub operator: OperatorSpec,
    pub lagrangian: LagrangianSpec,
    pub task: TaskSpec,
    /// Directory receiving summary.json, CSV data, and plot files.
    pub output_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::new(self.a, self.b, self.n_steps)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKindName {
    Classical,
    FiniteDiff,
    FractionalRl,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: OperatorKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

impl OperatorSpec {
    pub fn build(&self, grid: TimeGrid) -> Result<OperatorPair> {
        let field = |name: &str, value: Option<f64>, wanted: bool| -> Result<f64> {
            match (value, wanted) {
                (Some(v), true) => Ok(v),
                (None, true) => bail!("field `{name}` is required for operator kind {:?}", self.kind),
                (Some(_), false) => {
                    bail!("field `{name}` is not allowed for operator kind {:?}", self.kind)
                }
                (None, false) => Ok(f64::NAN),
            }
        };
        Ok(match self.kind {
            OperatorKindName::Classical => {
                field("alpha", self.alpha, false)?;
                field("tau", self.tau, false)?;
                field("eps", self.eps, false)?;
                OperatorPair::classical(grid)
            }
            OperatorKindName::FiniteDiff => {
                field("alpha", self.alpha, false)?;
                field("tau", self.tau, false)?;
                let eps = field("eps", self.eps, true)?;
                OperatorPair::finite_diff(eps, grid).context("field `eps` rejected")?
            }
            OperatorKindName::FractionalRl => {
                field("eps", self.eps, false)?;
                let alpha = field("alpha", self.alpha, true)?;
                let tau = field("tau", self.tau, true)?;
                OperatorPair::fractional_rl(alpha, tau, grid)
                    .context("fields `alpha`/`tau` rejected")?
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Free,
    Oscillator,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianSpec {
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

impl LagrangianSpec {
    pub fn to_family(self) -> Result<LagrangianFamily> {
        Ok(match self.family {
            FamilyName::Free => {
                if self.omega.is_some() {
                    bail!("field `omega` is not allowed for the free family");
                }
                LagrangianFamily::FreeParticle { dim: self.dim.unwrap_or(1) }
            }
            FamilyName::Oscillator => {
                if self.dim.is_some() {
                    bail!("field `dim` is not allowed for the oscillator family");
                }
                let omega =
                    self.omega.ok_or_else(|| anyhow::anyhow!("field `omega` is required for the oscillator family"))?;
                LagrangianFamily::HarmonicOscillator { omega }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Cosine,
    Sine,
    Linear,
    ExpDecay,
    Random,
}

/// Shape of a sampled trajectory; `frequency` belongs to cosine/sine,
/// `slope` to linear, `rate` to exp_decay, `amplitude` to random.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub profile: ProfileName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

impl Profile {
    fn check_fields(&self) -> Result<()> {
        let allowed: &[(&str, bool)] = match self.profile {
            ProfileName::Cosine | ProfileName::Sine => &[
                ("frequency", true),
                ("slope", false),
                ("rate", false),
                ("amplitude", false),
            ],
            ProfileName::Linear => {
                &[("frequency", false), ("slope", true), ("rate", false), ("amplitude", false)]
            }
            ProfileName::ExpDecay => {
                &[("frequency", false), ("slope", false), ("rate", true), ("amplitude", false)]
            }
            ProfileName::Random => {
                &[("frequency", false), ("slope", false), ("rate", false), ("amplitude", true)]
            }
        };
        for &(name, ok) in allowed {
            let present = match name {
                "frequency" => self.frequency.is_some(),
                "slope" => self.slope.is_some(),
                "rate" => self.rate.is_some(),
                _ => self.amplitude.is_some(),
            };
            if present && !ok {
                bail!("field `{name}` is not allowed for profile {:?}", self.profile);
            }
        }
        Ok(())
    }

    /// Samples one scalar series; `random` draws from `rng`, everything else
    /// is a closed-form shape over the grid.
    pub fn sample(&self, grid: TimeGrid, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
        self.check_fields()?;
        let a = grid.a();
        Ok(match self.profile {
            ProfileName::Cosine => {
                let w = self.frequency.unwrap_or(1.0);
                GridFunction::sample_scalar(grid, |t| (w * (t - a)).cos())?
            }
            ProfileName::Sine => {
                let w = self.frequency.unwrap_or(1.0);
                GridFunction::sample_scalar(grid, |t| (w * (t - a)).sin())?
            }
            ProfileName::Linear => {
                let s = self.slope.unwrap_or(1.0);
                GridFunction::sample_scalar(grid, |t| s * (t - a))?
            }
            ProfileName::ExpDecay => {
                let r = self.rate.unwrap_or(1.0);
                GridFunction::sample_scalar(grid, |t| (-r * (t - a)).exp())?
            }
            ProfileName::Random => {
                let amp = self.amplitude.unwrap_or(1.0);
                let vals: Vec<f64> =
                    (0..grid.n_nodes()).map(|_| rng.random_range(-amp..amp)).collect();
                GridFunction::from_components(grid, vec![vals])?
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
    General,
}

/// A doubled-state trajectory: a profile placed on one branch, or on both
/// (`general` pairs the profile with its half-amplitude reflection; `random`
/// draws the two branches independently).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub shape: Profile,
    pub branch: Branch,
}

impl StateSpec {
    pub fn build(&self, grid: TimeGrid, dim: usize, rng: &mut ChaCha8Rng) -> Result<AsymmetricState> {
        let sample = |rng: &mut ChaCha8Rng| -> Result<GridFunction> {
            let base = self.shape.sample(grid, rng)?;
            // Components are scaled copies so multi-dimensional Lagrangians
            // see distinct channels.
            let comps: Vec<Vec<f64>> = (0..dim)
                .map(|c| {
                    let s = 1.0 / (1.0 + c as f64);
                    base.component(0).iter().map(|v| s * v).collect()
                })
                .collect();
            Ok(GridFunction::from_components(grid, comps)?)
        };
        Ok(match self.branch {
            Branch::Plus => AsymmetricState::lift_plus(sample(rng)?),
            Branch::Minus => AsymmetricState::lift_minus(sample(rng)?),
            Branch::General => {
                let plus = sample(rng)?;
                let minus = if self.shape.profile == ProfileName::Random {
                    sample(rng)?
                } else {
                    plus.reflect().scale(0.5)
                };
                AsymmetricState::general(plus, minus)?
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    /// `x0 · e^{−τω²(t−a)}`, the closed form of the half-order forward
    /// oscillator equation.
    ExpDecay,
    /// `x0 · cos(ω(t−a))`, the classical-limit solution for zero velocity.
    Cosine,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub truth: TruthKind,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbpParams {
    #[serde(default = "default_ibp_tol")]
    pub tol: f64,
}

fn default_ibp_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedDemoParams {
    pub state: StateSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualParams {
    pub form: ELKind,
    pub state: StateSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremalParams {
    pub space: VariationSpaceKind,
    pub state: StateSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceParams {
    pub state: StateSpec,
    pub tol: f64,
    /// Omitted: the canonical cross-branch space. Set to force a specific
    /// variation space (the same-branch choice is the adversarial probe).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<VariationSpaceKind>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    pub x0: f64,
    #[serde(default)]
    pub v0: f64,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

fn default_direction() -> Direction {
    Direction::Forward
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedVerdict {
    Reversible,
    Irreversible,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReversibilityParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<ExpectedVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionParams {
    pub alpha: f64,
    pub input: Profile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

/// The eight experiment drivers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum TaskSpec {
    IbpCheck(IbpParams),
    EmbedDemo(EmbedDemoParams),
    Residual(ResidualParams),
    Extremal(ExtremalParams),
    Coherence(CoherenceParams),
    Solve(SolveParams),
    Reversibility(ReversibilityParams),
    Composition(CompositionParams),
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::IbpCheck(_) => "ibp_check",
            TaskSpec::EmbedDemo(_) => "embed_demo",
            TaskSpec::Residual(_) => "residual",
            TaskSpec::Extremal(_) => "extremal",
            TaskSpec::Coherence(_) => "coherence",
            TaskSpec::Solve(_) => "solve",
            TaskSpec::Reversibility(_) => "reversibility",
            TaskSpec::Composition(_) => "composition",
        }
    }
}
