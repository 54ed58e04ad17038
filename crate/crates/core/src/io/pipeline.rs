//! End-to-end pipelines driven by a [`RunConfig`]: integrate, verify,
//! refine and compare against the closed form.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{build_mesh, DensityField, Mesh, MeshKind};
use crate::operators::{brute_force_rhs, CollisionOperator};
use crate::oracles::{
    compare_smoluchowski, moment_ode_reference, table_from_finals, ConvergenceTable, OracleScenario,
};
use crate::solver::{InitialDatum, Solver, SolverConfig, Trajectory};
use crate::verification::{
    check_continuous_dependence, check_mass_conservation_limit, check_mass_law,
    check_moment_bounds, check_space_modulus, check_time_modulus, check_uniform_bound,
    compute_ledger, tail_bound_check, CheckReport, TAIL_SLACK,
};

use super::config::RunConfig;
use super::output::{write_moments, write_report, write_trajectory, VerificationReport};

/// Time shifts of the time-modulus check.
pub const TIME_SHIFTS: [f64; 3] = [0.1, 0.05, 0.025];
/// Space shifts of the space-modulus check, coarsest first.
pub const SPACE_SHIFTS: [f64; 3] = [0.2, 0.1, 0.05];
/// Cells of the mesh used by the operator oracle sweep.
pub const ORACLE_SWEEP_CELLS: usize = 64;
const ORACLE_SWEEP_FIELDS: usize = 10;
const TAIL_SWEEP: usize = 1000;
/// Tolerances of the closed-form comparison.
pub const SMOLUCHOWSKI_SUP_TOL: f64 = 0.02;
pub const SMOLUCHOWSKI_M0_TOL: f64 = 0.01;
pub const SMOLUCHOWSKI_WINDOW: (f64, f64) = (0.01, 10.0);

pub fn mesh_for(cfg: &RunConfig) -> Result<Arc<Mesh>> {
    build_mesh(cfg.mesh.z_min, cfg.mesh.n, cfg.mesh.cells, cfg.mesh.kind)
}

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        neg_moment_order: cfg.space.sigma1,
        ..cfg.solver
    }
}

pub fn run_config(cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate()?;
    run_with(cfg, &cfg.init)
}

fn run_with(cfg: &RunConfig, init: &InitialDatum) -> Result<Trajectory> {
    let mesh = mesh_for(cfg)?;
    let solver = Solver::new(mesh.clone(), &cfg.kernel, solver_config(cfg))?;
    solver.run_field(init.sample(mesh))
}

/// Output paths, with `out` overriding the configured directory.
pub fn output_paths(cfg: &RunConfig, out: Option<&Path>) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    (
        dir.join(&cfg.output.trajectory),
        dir.join(&cfg.output.moments),
        dir.join(&cfg.output.report),
        dir,
    )
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Integrates the configured scenario and writes the trajectory and moment log.
pub fn run_and_write(cfg: &RunConfig, out: Option<&Path>) -> Result<Trajectory> {
    let traj = run_config(cfg)?;
    let (traj_path, moments_path, _, dir) = output_paths(cfg, out);
    ensure_dir(&dir)?;
    write_trajectory(&traj, &traj_path)?;
    write_moments(&traj, &moments_path)?;
    Ok(traj)
}

fn sup_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Optimized operator against the brute-force oracle on seeded random
/// nonnegative fields over a 64-cell geometric mesh.
pub fn operator_oracle_check(cfg: &RunConfig, seed: u64, fields: usize) -> Result<CheckReport> {
    let mesh = build_mesh(
        cfg.mesh.z_min,
        cfg.mesh.n,
        ORACLE_SWEEP_CELLS,
        MeshKind::Geometric,
    )?;
    let op = CollisionOperator::new(mesh.clone(), &cfg.kernel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = CheckReport::new("operator_oracle");
    let mut worst = 0.0f64;
    for i in 0..fields {
        let decay: f64 = rng.gen_range(0.2..3.0);
        let values: Vec<f64> = mesh
            .centers()
            .iter()
            .map(|&z| rng.gen_range(0.0..1.0) * (-decay * z).exp())
            .collect();
        let g = DensityField::new(mesh.clone(), values, 0.0)?;
        let fast = op.evaluate(&g.values)?;
        let slow = brute_force_rhs(&g, &cfg.kernel)?;
        let e = sup_rel(&fast.rhs, &slow.rhs);
        worst = worst.max(e);
        if !(e <= 1e-8) {
            rep.passed = false;
            rep.violations
                .push(format!("field {i}: relative sup difference {e:e}"));
        }
    }
    rep.margin = worst / 1e-8;
    rep.details.push(("max_rel_diff".into(), worst));
    Ok(rep)
}

/// Tail bound on the final snapshot for a few `(beta, r)` and on seeded
/// random nonnegative fields.
pub fn tail_check(traj: &Trajectory, seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("tail_bound");
    let mut worst = 0.0f64;
    let mut record = |rep: &mut CheckReport, lhs: f64, rhs: f64, what: String| {
        let r = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(r / (1.0 + TAIL_SLACK));
        if lhs > rhs * (1.0 + TAIL_SLACK) {
            rep.passed = false;
            if rep.violations.len() < 20 {
                rep.violations.push(format!("{what}: {lhs:e} > {rhs:e}"));
            }
        }
    };
    let last = traj.last();
    let mesh = traj.mesh().clone();
    for beta in [1.0, 2.0, 5.0] {
        for r in [0.5, 1.0, 1.5] {
            if beta > mesh.z_min() {
                let (lhs, rhs) = tail_bound_check(last, beta, r)?;
                record(
                    &mut rep,
                    lhs,
                    rhs,
                    format!("final snapshot beta={beta} r={r}"),
                );
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a11);
    let lo = mesh.z_min().ln();
    let hi = mesh.n().ln();
    for i in 0..TAIL_SWEEP {
        let values: Vec<f64> = (0..mesh.len()).map(|_| rng.gen::<f64>()).collect();
        let field = DensityField::new(mesh.clone(), values, 0.0)?;
        let beta = rng
            .gen_range(lo..hi)
            .exp()
            .max(mesh.z_min() * (1.0 + 1e-12));
        let r = rng.gen_range(0.05..2.0);
        let (lhs, rhs) = tail_bound_check(&field, beta, r)?;
        record(
            &mut rep,
            lhs,
            rhs,
            format!("random field {i} beta={beta} r={r}"),
        );
    }
    rep.margin = worst;
    Ok(rep)
}

/// Integrates the configured scenario and runs every enabled check.
pub fn verify_config(cfg: &RunConfig, seed: u64) -> Result<(Trajectory, VerificationReport)> {
    cfg.validate()?;
    let traj = run_with(cfg, &cfg.init)?;
    let v = cfg.verify;
    let mut checks = Vec::new();
    let mut ledger = None;

    if v.operator_oracle {
        checks.push(operator_oracle_check(cfg, seed, ORACLE_SWEEP_FIELDS)?);
    }
    if v.mass_law {
        checks.push(check_mass_law(&traj));
    }
    let needs_ledger = v.moment_bounds || v.uniform_bound || v.equicontinuity;
    if needs_ledger && !cfg.test_mode {
        let l = compute_ledger(
            traj.initial(),
            &cfg.kernel,
            &cfg.space,
            cfg.solver.t_end,
            v.z_o,
        )?;
        if v.moment_bounds {
            checks.push(check_moment_bounds(&traj, &l));
        }
        if v.uniform_bound {
            checks.push(check_uniform_bound(&traj, &l)?);
        }
        if v.equicontinuity {
            let horizon = traj.last().time - traj.initial().time;
            let hs: Vec<f64> = TIME_SHIFTS
                .iter()
                .copied()
                .filter(|&h| h < horizon)
                .collect();
            if !hs.is_empty() {
                checks.push(check_time_modulus(&traj, &l, &hs)?);
            }
        }
        ledger = Some(l);
    }
    if v.equicontinuity {
        checks.push(check_space_modulus(traj.last(), &SPACE_SHIFTS, v.z_o)?);
    }
    if v.tail_bound {
        checks.push(tail_check(&traj, seed)?);
    }
    if v.continuous_dependence {
        let again = run_with(cfg, &cfg.init)?;
        let mut same = check_continuous_dependence(&traj, &again, &cfg.space)?;
        same.name = "uniqueness".into();
        checks.push(same);
        let perturbed = run_with(cfg, &cfg.init.scaled(1.0 + v.perturbation))?;
        checks.push(check_continuous_dependence(&traj, &perturbed, &cfg.space)?);
    }
    Ok((
        traj,
        VerificationReport {
            fingerprint: cfg.fingerprint(),
            checks,
            ledger,
        },
    ))
}

/// [`verify_config`] followed by writing the trajectory, moment log and report.
pub fn verify_and_write(
    cfg: &RunConfig,
    out: Option<&Path>,
    seed: u64,
) -> Result<VerificationReport> {
    let (traj, report) = verify_config(cfg, seed)?;
    let (traj_path, moments_path, report_path, dir) = output_paths(cfg, out);
    ensure_dir(&dir)?;
    write_trajectory(&traj, &traj_path)?;
    write_moments(&traj, &moments_path)?;
    write_report(&report, &report_path)?;
    Ok(report)
}

/// The configuration refined `level` times: `n` doubled, `z_min` halved and
/// the cell count doubled at each level.
pub fn refined(cfg: &RunConfig, level: u32) -> RunConfig {
    let f = 2f64.powi(level as i32);
    let mut c = cfg.clone();
    c.mesh.n = cfg.mesh.n * f;
    c.mesh.z_min = cfg.mesh.z_min / f;
    c.mesh.cells = cfg.mesh.cells << level;
    c
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub limit: CheckReport,
    pub table: ConvergenceTable,
}

/// Mass defect across joint `(n, z_min, cells)` refinements, and the
/// self-convergence table across cell refinements at fixed `(n, z_min)`.
pub fn convergence_study(cfg: &RunConfig, levels: u32) -> Result<ConvergenceStudy> {
    cfg.validate()?;
    if levels < 3 {
        return Err(Error::Domain(format!(
            "a convergence study needs at least 3 levels, got {levels}"
        )));
    }
    let runs: Vec<Trajectory> = (0..levels)
        .map(|i| run_config(&refined(cfg, i)))
        .collect::<Result<_>>()?;
    let limit = check_mass_conservation_limit(&runs);

    let mut finals = Vec::new();
    for i in 0..levels {
        let mut c = cfg.clone();
        c.mesh.cells = cfg.mesh.cells << i;
        finals.push(run_config(&c)?.last().clone());
    }
    let window = (cfg.mesh.z_min, cfg.verify.z_o);
    let table = table_from_finals(&finals, window)?;
    Ok(ConvergenceStudy { limit, table })
}

#[derive(Debug, Clone)]
pub struct OracleComparison {
    pub report: CheckReport,
    pub trajectory: Trajectory,
}

/// Constant-kernel pure coagulation from `e^-z` on the configured mesh and
/// solver settings, against the closed form and the moment equations.
pub fn oracle_compare(cfg: &RunConfig) -> Result<OracleComparison> {
    let scenario = OracleScenario::smoluchowski();
    let mut c = cfg.clone();
    c.kernel = scenario.spec;
    c.test_mode = true;
    c.init = scenario.init;
    c.validate()?;
    let traj = run_with(&c, &c.init)?;
    let cmp = compare_smoluchowski(&traj, SMOLUCHOWSKI_WINDOW)?;
    let first = traj.moments[0];
    let curves = moment_ode_reference(&c.kernel, (first.m0, first.m1, first.m2), cmp.t, 1000)?;
    let ode_m0 = *curves.m0.last().expect("curves are never empty");
    let ode_rel = (cmp.m0 - ode_m0).abs() / ode_m0;

    let mut report = CheckReport::new("smoluchowski_oracle");
    report.details.push(("sup_rel".into(), cmp.sup_rel));
    report
        .details
        .push(("pointwise_rel".into(), cmp.pointwise_rel));
    report.details.push(("M0".into(), cmp.m0));
    report.details.push(("M0_exact".into(), cmp.m0_exact));
    report.details.push(("M0_rel".into(), cmp.m0_rel()));
    report.details.push(("M0_ode_rel".into(), ode_rel));
    report.margin = (cmp.sup_rel / SMOLUCHOWSKI_SUP_TOL)
        .max(cmp.m0_rel() / SMOLUCHOWSKI_M0_TOL)
        .max(ode_rel / SMOLUCHOWSKI_M0_TOL);
    if cmp.sup_rel > SMOLUCHOWSKI_SUP_TOL {
        report.passed = false;
        report.violations.push(format!(
            "density differs from the closed form by {:e} (relative sup)",
            cmp.sup_rel
        ));
    }
    if cmp.m0_rel() > SMOLUCHOWSKI_M0_TOL || ode_rel > SMOLUCHOWSKI_M0_TOL {
        report.passed = false;
        report.violations.push(format!(
            "M0 = {} differs from 2/(t+2) = {}",
            cmp.m0, cmp.m0_exact
        ));
    }
    Ok(OracleComparison {
        report,
        trajectory: traj,
    })
}
