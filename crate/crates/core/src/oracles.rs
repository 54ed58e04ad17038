//! Reference solutions: the constant-kernel Smoluchowski closed form,
//! closed moment equations for constant kernels, and self-convergence
//! tables for scenarios without a closed form.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{sample, DensityField, Mesh};
use crate::kernels::{EfficiencyModel, KernelSpec};
use crate::solver::{run, InitialDatum, SolverConfig, Trajectory};
use crate::verification::{moment_values, CheckReport};

/// `g(z, t) = (2 / (t + 2))^2 exp(-2 z / (t + 2))`: pure coagulation with
/// `phi == 1` from `g0 = e^-z`.
pub fn smoluchowski_constant(z: f64, t: f64) -> Result<f64> {
    if !(z >= 0.0 && t >= 0.0 && z.is_finite() && t.is_finite()) {
        return Err(Error::Domain(format!(
            "closed form needs z >= 0 and t >= 0, got z = {z}, t = {t}"
        )));
    }
    let u = 2.0 / (t + 2.0);
    Ok(u * u * (-u * z).exp())
}

/// Time derivative of [`smoluchowski_constant`].
pub fn smoluchowski_constant_dt(z: f64, t: f64) -> Result<f64> {
    let g = smoluchowski_constant(z, t)?;
    let u = 2.0 / (t + 2.0);
    Ok(-(u - 0.5 * z * u * u) * g)
}

/// A kernel and initial datum together with the quantities it has closed forms for.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleScenario {
    pub name: &'static str,
    pub spec: KernelSpec,
    pub init: InitialDatum,
    pub predicts_density: bool,
    pub predicts_moments: bool,
}

impl OracleScenario {
    pub fn smoluchowski() -> Self {
        OracleScenario {
            name: "smoluchowski_constant",
            spec: KernelSpec::constant_test_mode(),
            init: InitialDatum::default(),
            predicts_density: true,
            predicts_moments: true,
        }
    }

    /// Constant kernel with constant efficiency `e`; only the moments close.
    pub fn constant_kernel(e: f64) -> Self {
        let mut spec = KernelSpec::constant_test_mode();
        spec.efficiency = EfficiencyModel::Constant(e);
        OracleScenario {
            name: "constant_kernel_breakage",
            spec,
            init: InitialDatum::default(),
            predicts_density: false,
            predicts_moments: true,
        }
    }

    pub fn density(&self, z: f64, t: f64) -> Result<f64> {
        if !self.predicts_density {
            return Err(Error::Domain(format!(
                "scenario {} has no closed-form density",
                self.name
            )));
        }
        smoluchowski_constant(z, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentCurves {
    pub times: Vec<f64>,
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    /// True when the curves solve closed moment equations; false when they
    /// are upper envelopes only.
    pub closed: bool,
}

impl MomentCurves {
    fn at(values: &[f64], times: &[f64], t: f64) -> f64 {
        let hi = times.partition_point(|&s| s < t).min(times.len() - 1);
        if hi == 0 || times[hi] == t {
            return values[hi];
        }
        let lam = (t - times[hi - 1]) / (times[hi] - times[hi - 1]);
        values[hi - 1] + lam * (values[hi] - values[hi - 1])
    }

    pub fn m0_at(&self, t: f64) -> f64 {
        Self::at(&self.m0, &self.times, t)
    }

    pub fn m2_at(&self, t: f64) -> f64 {
        Self::at(&self.m2, &self.times, t)
    }
}

/// Reference moment curves on `steps + 1` equally spaced times in `[0, T]`.
///
/// For a constant kernel `K` and constant efficiencies the moments obey
///
/// ```text
/// dM0/dt = K/2 M0^2 (E - 2 + E1 f),                 f = (theta + 2) / (theta + 1)
/// dM1/dt = 0
/// dM2/dt = K/2 [(E + E1 (theta + 2) / (theta + 3)) (2 M0 M2 + 2 M1^2) - 2 M0 M2]
/// ```
///
/// which are integrated with RK4. Any other kernel gets the envelopes
/// `M0 <= M0(0)`, `M1 <= M1(0)`, `M2 <= (M2(0) + 2c M0^2) exp(2c (2 M0 + M1) t)`.
pub fn moment_ode_reference(
    spec: &KernelSpec,
    init: (f64, f64, f64),
    t_end: f64,
    steps: usize,
) -> Result<MomentCurves> {
    if !(t_end >= 0.0 && t_end.is_finite()) || steps == 0 {
        return Err(Error::Domain("need T >= 0 and at least one step".into()));
    }
    let (a0, a1, a2) = init;
    let dt = t_end / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let e = match spec.efficiency {
        EfficiencyModel::Constant(e) => Some(e),
        EfficiencyModel::PureCoagulation => Some(1.0),
        EfficiencyModel::RatioBounded => None,
    };
    match e {
        Some(e) if spec.is_test_mode() => {
            let k = 2.0 * spec.c;
            let e1 = 1.0 - e;
            let frag = (spec.theta + 2.0) / (spec.theta + 1.0);
            let second = e + e1 * (spec.theta + 2.0) / (spec.theta + 3.0);
            let f = |m: [f64; 2]| -> [f64; 2] {
                let (m0, m2) = (m[0], m[1]);
                [
                    0.5 * k * m0 * m0 * (e - 2.0 + e1 * frag),
                    0.5 * k * (second * (2.0 * m0 * m2 + 2.0 * a1 * a1) - 2.0 * m0 * m2),
                ]
            };
            let mut state = [a0, a2];
            let mut m0 = vec![a0];
            let mut m2 = vec![a2];
            for _ in 0..steps {
                let k1 = f(state);
                let k2 = f([state[0] + 0.5 * dt * k1[0], state[1] + 0.5 * dt * k1[1]]);
                let k3 = f([state[0] + 0.5 * dt * k2[0], state[1] + 0.5 * dt * k2[1]]);
                let k4 = f([state[0] + dt * k3[0], state[1] + dt * k3[1]]);
                for i in 0..2 {
                    state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                m0.push(state[0]);
                m2.push(state[1]);
            }
            Ok(MomentCurves {
                m1: vec![a1; times.len()],
                times,
                m0,
                m2,
                closed: true,
            })
        }
        _ => {
            let c = spec.c;
            let m2 = times
                .iter()
                .map(|t| (a2 + 2.0 * c * a0 * a0) * (2.0 * c * (2.0 * a0 + a1) * t).exp())
                .collect();
            Ok(MomentCurves {
                m0: vec![a0; times.len()],
                m1: vec![a1; times.len()],
                m2,
                times,
                closed: false,
            })
        }
    }
}

/// Solver output against the Smoluchowski closed form at the final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoluchowskiComparison {
    pub t: f64,
    /// `max |g - exact| / max |exact|` over cells in the window
    pub sup_rel: f64,
    /// `max |g - exact| / exact` over cells in the window
    pub pointwise_rel: f64,
    pub m0: f64,
    pub m0_exact: f64,
}

impl SmoluchowskiComparison {
    pub fn m0_rel(&self) -> f64 {
        (self.m0 - self.m0_exact).abs() / self.m0_exact
    }
}

pub fn compare_smoluchowski(
    traj: &Trajectory,
    window: (f64, f64),
) -> Result<SmoluchowskiComparison> {
    let last = traj.last();
    let mesh = &*last.mesh;
    let t = last.time;
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    let mut pointwise = 0.0f64;
    for (&z, &g) in mesh.centers().iter().zip(&last.values) {
        if z < window.0 || z > window.1 {
            continue;
        }
        let exact = smoluchowski_constant(z, t)?;
        diff = diff.max((g - exact).abs());
        scale = scale.max(exact);
        pointwise = pointwise.max((g - exact).abs() / exact);
    }
    if scale == 0.0 {
        return Err(Error::Domain(
            "comparison window holds no cell centers".into(),
        ));
    }
    Ok(SmoluchowskiComparison {
        t,
        sup_rel: diff / scale,
        pointwise_rel: pointwise,
        m0: moment_values(&last.values, mesh, 0.0),
        m0_exact: 2.0 / (t + 2.0),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub z_min: f64,
    pub n: f64,
    /// Sup difference on the window to the next finer level.
    pub diff_to_next: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// `log2(d_i / d_{i+1})` for consecutive differences.
    pub orders: Vec<f64>,
    pub report: CheckReport,
}

/// `sup |a(z) - b(z)|` over the centers of both meshes inside `window`.
pub fn window_difference(a: &DensityField, b: &DensityField, window: (f64, f64)) -> f64 {
    let mut sup = 0.0f64;
    for mesh in [&a.mesh, &b.mesh] {
        for &z in mesh.centers() {
            if z >= window.0 && z <= window.1 {
                sup = sup.max((sample(a, z) - sample(b, z)).abs());
            }
        }
    }
    sup
}

/// Solves the scenario on every mesh and tabulates the window difference
/// between consecutive levels, which must shrink.
pub fn self_convergence(
    spec: &KernelSpec,
    init: &InitialDatum,
    cfg: &SolverConfig,
    meshes: &[Arc<Mesh>],
    window: (f64, f64),
) -> Result<ConvergenceTable> {
    if meshes.len() < 3 {
        return Err(Error::Domain(format!(
            "self-convergence needs at least 3 resolutions, got {}",
            meshes.len()
        )));
    }
    let finals: Vec<DensityField> = meshes
        .iter()
        .map(|m| run(init, m.clone(), spec, cfg).map(|t| t.last().clone()))
        .collect::<Result<_>>()?;
    table_from_finals(&finals, window)
}

/// Builds the table from already computed final fields, coarsest first.
pub fn table_from_finals(finals: &[DensityField], window: (f64, f64)) -> Result<ConvergenceTable> {
    let diffs: Vec<f64> = finals
        .windows(2)
        .map(|w| window_difference(&w[0], &w[1], window))
        .collect();
    let rows = finals
        .iter()
        .enumerate()
        .map(|(i, f)| ConvergenceRow {
            cells: f.mesh.len(),
            z_min: f.mesh.z_min(),
            n: f.mesh.n(),
            diff_to_next: diffs.get(i).copied(),
        })
        .collect();
    let orders: Vec<f64> = diffs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let mut report = CheckReport::new("self_convergence");
    let mut worst = 0.0f64;
    for (i, d) in diffs.iter().enumerate() {
        report.details.push((format!("diff[{i}]"), *d));
    }
    for (i, o) in orders.iter().enumerate() {
        report.details.push((format!("order[{i}]"), *o));
    }
    for (i, w) in diffs.windows(2).enumerate() {
        let ratio = if w[0] > 0.0 {
            w[1] / w[0]
        } else if w[1] == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
        if w[1] > w[0] {
            report.passed = false;
            report.violations.push(format!(
                "difference grew from {:e} to {:e} at level {}",
                w[0],
                w[1],
                i + 1
            ));
        }
    }
    report.margin = worst;
    Ok(ConvergenceTable {
        rows,
        orders,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, MeshKind};
    use crate::operators::brute_force_rhs;

    #[test]
    fn closed_form_examples() {
        for z in [0.0, 0.5, 3.0] {
            assert!((smoluchowski_constant(z, 0.0).unwrap() - (-z).exp()).abs() < 1e-15);
        }
        assert!(smoluchowski_constant(-1.0, 0.0).is_err());
        // M0 = 2/(t+2), M1 = 1 by midpoint quadrature on a long uniform grid
        let t = 1.0;
        let h = 1e-3;
        let (mut m0, mut m1) = (0.0, 0.0);
        for i in 0..60_000 {
            let z = (i as f64 + 0.5) * h;
            let g = smoluchowski_constant(z, t).unwrap();
            m0 += g * h;
            m1 += z * g * h;
        }
        assert!((m0 - 2.0 / 3.0).abs() < 1e-6);
        assert!((m1 - 1.0).abs() < 1e-6);
        // the time derivative against a centered difference
        let d = (smoluchowski_constant(2.0, 1.0 + 1e-5).unwrap()
            - smoluchowski_constant(2.0, 1.0 - 1e-5).unwrap())
            / 2e-5;
        assert!((d - smoluchowski_constant_dt(2.0, 1.0).unwrap()).abs() < 1e-8);
        assert!(OracleScenario::constant_kernel(0.5)
            .density(1.0, 1.0)
            .is_err());
    }

    #[test]
    fn closed_form_satisfies_the_discrete_equation() {
        let mesh = build_mesh(1e-4, 50.0, 512, MeshKind::Geometric).unwrap();
        let t = 0.5;
        let g = DensityField::from_fn(mesh.clone(), t, |z| smoluchowski_constant(z, t).unwrap());
        let out = brute_force_rhs(&g, &KernelSpec::constant_test_mode()).unwrap();
        let scale = g.values.iter().fold(0.0f64, |m, v| m.max(*v));
        let mut worst = 0.0f64;
        for (k, &z) in mesh.centers().iter().enumerate() {
            if z > 10.0 {
                break;
            }
            let res = smoluchowski_constant_dt(z, t).unwrap() - out.rhs[k];
            worst = worst.max(res.abs());
        }
        assert!(worst <= 1e-3 * scale, "residual {worst}");
    }

    #[test]
    fn riccati_solutions() {
        let spec = KernelSpec::constant_test_mode();
        let curves = moment_ode_reference(&spec, (1.0, 1.0, 2.0), 1.0, 1000).unwrap();
        assert!(curves.closed);
        for (t, m0) in curves.times.iter().zip(&curves.m0) {
            assert!((m0 - 1.0 / (1.0 + t / 2.0)).abs() < 1e-12);
        }
        // exact M2 for pure coagulation: M2(0) + K M1^2 t with K = 1
        assert!((curves.m2_at(1.0) - 3.0).abs() < 1e-10);

        let half = moment_ode_reference(
            &OracleScenario::constant_kernel(0.5).spec,
            (1.0, 1.0, 2.0),
            1.0,
            1000,
        )
        .unwrap();
        // dM0/dt = -M0^2 / 4
        assert!((half.m0_at(1.0) - 1.0 / 1.25).abs() < 1e-12);

        let breakage = moment_ode_reference(
            &OracleScenario::constant_kernel(0.0).spec,
            (1.0, 1.0, 2.0),
            1.0,
            100,
        )
        .unwrap();
        assert!(breakage.m0.windows(2).all(|w| w[1] >= w[0]));

        let general = KernelSpec::new(1.0, 0.5, 0.5, EfficiencyModel::Constant(0.5), 0.0).unwrap();
        let env = moment_ode_reference(&general, (1.0, 1.0, 2.0), 1.0, 10).unwrap();
        assert!(!env.closed);
        assert!((env.m2_at(1.0) - 4.0 * 6f64.exp()).abs() < 1e-9 * env.m2_at(1.0));
    }

    #[test]
    fn identical_levels_have_zero_difference() {
        let mesh = build_mesh(1e-3, 10.0, 16, MeshKind::Geometric).unwrap();
        let f = DensityField::from_fn(mesh, 0.0, |z| (-z).exp());
        let table = table_from_finals(&[f.clone(), f.clone(), f], (1e-3, 10.0)).unwrap();
        assert!(table
            .rows
            .iter()
            .take(2)
            .all(|r| r.diff_to_next == Some(0.0)));
        assert!(table.report.passed);
    }
}
