//! Built-in reduced verification suite: nine fast rows, one per core
//! property, sized to finish in seconds on a debug build.
//!
//! Row thresholds are looser than the full test suite's but still far below
//! the failure regimes, so a broken kernel flips the row to FAIL rather than
//! drifting past it.

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use asymlag::dynamics::{classify_reversibility, composition_identity_check, CausalProblem, Direction};
use asymlag::lagrangian::{ELKind, EmbeddedLagrangian, LagrangianFamily};
use asymlag::variational::{coherence_check, gateaux, gateaux_numeric, is_extremal, VariationSpace, VariationSpaceKind};
use asymlag::{AsymmetricState, GridFunction, OperatorPair, TimeGrid};

struct Row {
    name: &'static str,
    run: fn() -> Result<(bool, String)>,
}

const ROWS: &[Row] = &[
    Row { name: "duality", run: duality },
    Row { name: "causality", run: causality },
    Row { name: "coherence", run: coherence },
    Row { name: "extremality", run: extremality },
    Row { name: "anti_causal", run: anti_causal },
    Row { name: "oscillator_limits", run: oscillator_limits },
    Row { name: "composition", run: composition },
    Row { name: "reversibility", run: reversibility },
    Row { name: "gateaux", run: gateaux_row },
];

/// Runs the selected rows (all when `only` is empty) and prints one table
/// line per row. Returns whether every selected row passed.
pub fn run(only: &[String]) -> Result<bool> {
    for name in only {
        if !ROWS.iter().any(|r| r.name == name) {
            let known: Vec<&str> = ROWS.iter().map(|r| r.name).collect();
            bail!("unknown selftest row `{name}`; available: {}", known.join(", "));
        }
    }
    let selected: Vec<&Row> = if only.is_empty() {
        ROWS.iter().collect()
    } else {
        ROWS.iter().filter(|r| only.iter().any(|n| n == r.name)).collect()
    };
    if selected.is_empty() {
        bail!("empty selftest selection");
    }
    let mut all = true;
    println!("{:<18} {:<6} detail", "check", "result");
    for row in selected {
        let (pass, detail) = match (row.run)() {
            Ok(x) => x,
            Err(e) => (false, format!("error: {e:#}")),
        };
        all &= pass;
        println!("{:<18} {:<6} {detail}", row.name, if pass { "PASS" } else { "FAIL" });
    }
    Ok(all)
}

fn bump(center: f64, width: f64) -> impl Fn(f64) -> f64 {
    move |t| {
        let u = (t - center) / width;
        if u.abs() >= 1.0 {
            0.0
        } else {
            let w = 1.0 - u * u;
            w * w * w
        }
    }
}

fn all_kinds(grid: TimeGrid) -> Vec<OperatorPair> {
    vec![
        OperatorPair::classical(grid),
        OperatorPair::finite_diff(2.0 * grid.step(), grid).expect("eps on grid"),
        OperatorPair::fractional_rl(0.5, 1.0, grid).expect("valid order"),
    ]
}

/// Product-rule defect of each operator pair on interior-supported bumps.
fn duality() -> Result<(bool, String)> {
    let grid = TimeGrid::new(0.0, 1.0, 200)?;
    let f = GridFunction::sample_scalar(grid, bump(0.4, 0.25))?;
    let g = GridFunction::sample_scalar(grid, bump(0.6, 0.3))?;
    let mut worst: f64 = 0.0;
    for ops in all_kinds(grid) {
        worst = worst.max(ops.ibp_residual(&f, &g)?.abs());
    }
    Ok((worst <= 1e-10, format!("max residual {worst:.2e} over 3 operator kinds")))
}

/// Poking one sample must not change forward outputs at earlier nodes nor
/// backward outputs at later nodes, bit for bit.
fn causality() -> Result<(bool, String)> {
    let grid = TimeGrid::new(0.0, 3.0, 60)?;
    let pairs = vec![
        OperatorPair::finite_diff(3.0 * grid.step(), grid)?,
        OperatorPair::fractional_rl(0.6, 1.2, grid)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let mut trials = 0usize;
    for ops in &pairs {
        for _ in 0..50 {
            let base: Vec<f64> = (0..grid.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = GridFunction::from_components(grid, vec![base.clone()])?;
            let poked = rng.random_range(1..grid.n_nodes() - 1);
            let mut bumped = base;
            bumped[poked] += rng.random_range(0.5..1.5);
            let f2 = GridFunction::from_components(grid, vec![bumped])?;
            let (dp, dp2) = (ops.apply_plus(&f)?, ops.apply_plus(&f2)?);
            let (dm, dm2) = (ops.apply_minus(&f)?, ops.apply_minus(&f2)?);
            for k in 0..grid.n_nodes() {
                if k < poked && dp.value(k, 0).to_bits() != dp2.value(k, 0).to_bits() {
                    return Ok((false, format!("forward output leaked to node {k} < {poked}")));
                }
                if k > poked && dm.value(k, 0).to_bits() != dm2.value(k, 0).to_bits() {
                    return Ok((false, format!("backward output leaked to node {k} > {poked}")));
                }
            }
            trials += 1;
        }
    }
    Ok((true, format!("{trials} probes, 2 operator kinds, bitwise")))
}

/// Restricting the doubled equation to one branch must match deriving on that
/// branch directly.
fn coherence() -> Result<(bool, String)> {
    let grid = TimeGrid::new(0.0, 2.0, 48)?;
    let lag = asymlag::lagrangian::harmonic_oscillator(1.1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut worst: f64 = 0.0;
    for ops in all_kinds(grid) {
        for trial in 0..4 {
            let vals: Vec<f64> = (0..grid.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = GridFunction::from_components(grid, vec![vals])?;
            let x = if trial % 2 == 0 {
                AsymmetricState::lift_plus(f)
            } else {
                AsymmetricState::lift_minus(f)
            };
            let report = coherence_check(&lag, &ops, &x, 1e-12)?;
            worst = worst.max(report.max_diff);
            if !report.passed() {
                return Ok((false, format!("paths disagree by {:.2e}", report.max_diff)));
            }
        }
    }
    Ok((true, format!("12 trajectories, max path gap {worst:.2e}")))
}

/// Marched oscillator updates are accepted by the variation sweep; noise is
/// rejected.
fn extremality() -> Result<(bool, String)> {
    let grid = TimeGrid::new(0.0, 1.0, 10)?;
    let ops = OperatorPair::finite_diff(grid.step(), grid)?;
    let lhat = EmbeddedLagrangian::new(asymlag::lagrangian::harmonic_oscillator(1.0)?, ops);
    let space = VariationSpace::new(VariationSpaceKind::Minus);
    let e2 = grid.step() * grid.step();
    let mut rng = ChaCha8Rng::seed_from_u64(0xe57);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    for trial in 0..12 {
        let x = if trial % 2 == 0 {
            let mut xs = vec![0.0; grid.n_nodes()];
            xs[0] = rng.random_range(0.5..1.5);
            xs[1] = 2.0 * xs[0] / (1.0 + e2);
            for k in 2..xs.len() {
                xs[k] = (2.0 * xs[k - 1] - xs[k - 2]) / (1.0 + e2);
            }
            AsymmetricState::lift_plus(GridFunction::from_components(grid, vec![xs])?)
        } else {
            let vals: Vec<f64> = (0..grid.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
            AsymmetricState::lift_plus(GridFunction::from_components(grid, vec![vals])?)
        };
        let report = is_extremal(&lhat, &x, &space, None)?;
        let want = trial % 2 == 0;
        if report.extremal != want {
            return Ok((false, format!("trial {trial}: extremal = {}, wanted {want}", report.extremal)));
        }
        if want {
            accepted += 1;
        } else {
            rejected += 1;
        }
    }
    Ok((true, format!("{accepted} marched accepted, {rejected} noise rejected")))
}

/// On a forward solution the anti-causal residual stays large while the
/// causal one is at rounding level.
fn anti_causal() -> Result<(bool, String)> {
    let grid = TimeGrid::new(0.0, 5.0, 200)?;
    let problem = CausalProblem {
        family: LagrangianFamily::HarmonicOscillator { omega: 1.0 },
        ops: OperatorPair::fractional_rl(0.5, 1.0, grid)?,
        seed_value: 1.0,
        seed_slope: 0.0,
        direction: Direction::Forward,
    };
    let x = problem.solve()?;
    let lhat = EmbeddedLagrangian::new(
        LagrangianFamily::HarmonicOscillator { omega: 1.0 }.build()?,
        OperatorPair::fractional_rl(0.5, 1.0, grid)?,
    );
    let state = AsymmetricState::lift_plus(x);
    let window_sup = |kind: ELKind| -> Result<f64> {
        let r = lhat.el_residual(&state, kind)?;
        let mut sup: f64 = 0.0;
        for k in 2..grid.n_steps() - 1 {
            sup = sup.max(r.values().value(k, 0).abs());
        }
        Ok(sup)
    };
    let causal = window_sup(ELKind::CausalPlus)?;
    let anti = window_sup(ELKind::AntiCausalPlus)?;
    let pass = anti > 10.0 * causal;
    Ok((pass, format!("anti {anti:.2e} vs causal {causal:.2e}")))
}

/// The solver reproduces the classical cosine at order one and the half-order
/// exponential decay.
fn oscillator_limits() -> Result<(bool, String)> {
    let g1 = TimeGrid::new(0.0, 4.0 * std::f64::consts::PI, 500)?;
    let x1 = asymlag::dynamics::solve_forward_oscillator(1.0, 1.0, 1.0, 1.0, 0.0, g1)?;
    let mut cos_err: f64 = 0.0;
    for k in 0..g1.n_nodes() {
        cos_err = cos_err.max((x1.value(k, 0) - g1.node(k).cos()).abs());
    }

    let g2 = TimeGrid::new(0.0, 5.0, 500)?;
    let x2 = asymlag::dynamics::solve_forward_oscillator(0.5, 1.0, 1.0, 1.0, 0.0, g2)?;
    let mut exp_err: f64 = 0.0;
    for k in 0..g2.n_nodes() {
        let want = (-g2.node(k)).exp();
        exp_err = exp_err.max((x2.value(k, 0) - want).abs() / want);
    }

    let pass = cos_err <= 0.2 && exp_err <= 5e-2;
    Ok((pass, format!("cosine sup {cos_err:.2e}, half-order rel {exp_err:.2e}")))
}

/// Applying the half-order derivative twice matches the full-order operator.
fn composition() -> Result<(bool, String)> {
    let grid = TimeGrid::new(0.0, 1.0, 200)?;
    let f = GridFunction::sample_scalar(grid, bump(0.5, 0.3))?;
    let gap = composition_identity_check(0.4, &f)?;
    Ok((gap <= 1e-9, format!("gap {gap:.2e} at order 0.4")))
}

/// Classical-limit pairs classify as reversible, the half-order pair as not.
fn reversibility() -> Result<(bool, String)> {
    let g1 = TimeGrid::new(0.0, 4.0 * std::f64::consts::PI, 500)?;
    let osc = LagrangianFamily::HarmonicOscillator { omega: 1.0 };
    let r1 = classify_reversibility(osc, &OperatorPair::fractional_rl(1.0, 1.0, g1)?, None)?;

    let g2 = TimeGrid::new(0.0, 6.0, 200)?;
    let free = LagrangianFamily::FreeParticle { dim: 1 };
    let r2 = classify_reversibility(free, &OperatorPair::classical(g2), None)?;

    let g3 = TimeGrid::new(0.0, 5.0, 2000)?;
    let r3 = classify_reversibility(osc, &OperatorPair::fractional_rl(0.5, 1.0, g3)?, None)?;

    let pass = r1.is_reversible() && r2.is_reversible() && !r3.is_reversible();
    Ok((
        pass,
        format!(
            "order 1: {:?}, classical free: {:?}, order 1/2: {:?}",
            r1.verdict, r2.verdict, r3.verdict
        ),
    ))
}

/// The closed-form directional derivative of the action matches a central
/// finite difference.
fn gateaux_row() -> Result<(bool, String)> {
    let grid = TimeGrid::new(0.0, 1.5, 30)?;
    let lag_dim = 1;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a7e);
    let mut worst: f64 = 0.0;
    for ops in all_kinds(grid) {
        let lhat = EmbeddedLagrangian::new(asymlag::lagrangian::harmonic_oscillator(1.1)?, ops);
        for _ in 0..10 {
            let mut draw = |scale: f64| -> Result<AsymmetricState> {
                let comp = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                    (0..grid.n_nodes()).map(|_| rng.random_range(-scale..scale)).collect()
                };
                let plus = GridFunction::from_components(grid, (0..lag_dim).map(|_| comp(&mut rng)).collect())?;
                let minus = GridFunction::from_components(grid, (0..lag_dim).map(|_| comp(&mut rng)).collect())?;
                Ok(AsymmetricState::general(plus, minus)?)
            };
            let x = draw(1.0)?;
            let h = draw(0.5)?;
            let exact = gateaux(&lhat, &x, &h)?;
            let fd = gateaux_numeric(&lhat, &x, &h)?;
            worst = worst.max((exact - fd).abs());
        }
    }
    let tol = 1e-7;
    Ok((worst <= tol, format!("30 pairs, worst closed-vs-numeric gap {worst:.2e}")))
}
