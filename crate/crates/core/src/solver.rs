//! Explicit time integration of the truncated system with step-doubling
//! error control.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{DensityField, Mesh};
use crate::kernels::KernelSpec;
use crate::operators::CollisionOperator;
use crate::verification::moment_values;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    pub safety: f64,
    /// Tolerated step-doubling difference per unit of simulated time,
    /// relative to `1 + |g|`.
    pub tol_step: f64,
    pub negativity_tol: f64,
    /// Keep every `record_every`-th accepted step as a snapshot (the final
    /// state is always kept).
    pub record_every: usize,
    /// Order of the negative moment written to the moment log.
    pub neg_moment_order: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            t_end: 1.0,
            dt_init: 1e-3,
            dt_max: 0.05,
            safety: 0.9,
            tol_step: 1e-8,
            negativity_tol: 1e-12,
            record_every: 1,
            neg_moment_order: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            p.push(format!(
                "t_end must be a finite time >= 0, got {}",
                self.t_end
            ));
        }
        for (name, v) in [
            ("dt_init", self.dt_init),
            ("dt_max", self.dt_max),
            ("tol_step", self.tol_step),
            ("negativity_tol", self.negativity_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                p.push(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            p.push(format!("safety must lie in (0, 1), got {}", self.safety));
        }
        if self.record_every == 0 {
            p.push("record_every must be at least 1".into());
        }
        if !(self.neg_moment_order > 0.0 && self.neg_moment_order < 1.0) {
            p.push(format!(
                "neg_moment_order must lie in (0, 1), got {}",
                self.neg_moment_order
            ));
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain(p.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDatum {
    /// `amplitude * exp(-decay z)`
    Exponential { amplitude: f64, decay: f64 },
    /// `amplitude * z^-p * exp(-decay z)`, unbounded at the origin for `p > 0`
    TruncatedPowerExp { amplitude: f64, p: f64, decay: f64 },
    /// Gaussian bump `amplitude * exp(-(z - center)^2 / (2 width^2))`
    Monodisperse {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl Default for InitialDatum {
    fn default() -> Self {
        InitialDatum::Exponential {
            amplitude: 1.0,
            decay: 1.0,
        }
    }
}

impl InitialDatum {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            InitialDatum::Exponential { amplitude, decay } => amplitude * (-decay * z).exp(),
            InitialDatum::TruncatedPowerExp {
                amplitude,
                p,
                decay,
            } => amplitude * z.powf(-p) * (-decay * z).exp(),
            InitialDatum::Monodisperse {
                amplitude,
                center,
                width,
            } => {
                let u = (z - center) / width;
                amplitude * (-0.5 * u * u).exp()
            }
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            InitialDatum::Exponential { amplitude, .. }
            | InitialDatum::TruncatedPowerExp { amplitude, .. }
            | InitialDatum::Monodisperse { amplitude, .. } => amplitude,
        }
    }

    /// Same shape with the amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut d = *self;
        match &mut d {
            InitialDatum::Exponential { amplitude, .. }
            | InitialDatum::TruncatedPowerExp { amplitude, .. }
            | InitialDatum::Monodisperse { amplitude, .. } => *amplitude *= factor,
        }
        d
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitialDatum::Exponential { .. } => "exponential",
            InitialDatum::TruncatedPowerExp { .. } => "power_exp",
            InitialDatum::Monodisperse { .. } => "monodisperse",
        }
    }

    /// Checks nonnegativity and that `(z^-sigma1 + z^sigma2) g0` is integrable.
    pub fn problems(&self, sigma1: f64) -> Vec<String> {
        let mut p = Vec::new();
        let amplitude = self.amplitude();
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            p.push(format!("initial amplitude must be >= 0, got {amplitude}"));
        }
        match *self {
            InitialDatum::Exponential { decay, .. } => {
                if !(decay > 0.0 && decay.is_finite()) {
                    p.push(format!("initial decay must be positive, got {decay}"));
                }
            }
            InitialDatum::TruncatedPowerExp { p: pw, decay, .. } => {
                if !(decay > 0.0 && decay.is_finite()) {
                    p.push(format!("initial decay must be positive, got {decay}"));
                }
                if !(pw >= 0.0 && pw < 1.0 - sigma1) {
                    p.push(format!(
                        "power p = {pw} must satisfy 0 <= p < 1 - sigma1 = {} so that z^-sigma1 g0 is integrable",
                        1.0 - sigma1
                    ));
                }
            }
            InitialDatum::Monodisperse { center, width, .. } => {
                if !(center > 0.0 && center.is_finite()) {
                    p.push(format!("bump center must be positive, got {center}"));
                }
                if !(width > 0.0 && width.is_finite()) {
                    p.push(format!("bump width must be positive, got {width}"));
                }
            }
        }
        p
    }

    /// The datum sampled at cell centers, which also applies the truncation to `(0, n)`.
    pub fn sample(&self, mesh: Arc<Mesh>) -> DensityField {
        DensityField::from_fn(mesh, 0.0, |z| self.eval(z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRecord {
    pub t: f64,
    /// `M_{-q}` with `q = neg_moment_order`
    pub m_neg: f64,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    /// Mass that has left `[z_min, n]` since `t = 0`.
    pub flux_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub spec: KernelSpec,
    pub config: SolverConfig,
    pub snapshots: Vec<DensityField>,
    pub moments: Vec<MomentRecord>,
    /// Mass added by clamping tiny negative values to zero.
    pub clamped_mass: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Trajectory {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.snapshots[0].mesh
    }

    pub fn initial(&self) -> &DensityField {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &DensityField {
        self.snapshots
            .last()
            .expect("a trajectory always holds its initial snapshot")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    /// Values at time `t`, linearly interpolated between neighbouring snapshots.
    /// Exact snapshot times return the stored values unchanged.
    pub fn values_at(&self, t: f64) -> Result<Vec<f64>> {
        let first = self.snapshots[0].time;
        let last = self.last().time;
        if !(t >= first && t <= last) {
            return Err(Error::Domain(format!(
                "time {t} lies outside the trajectory [{first}, {last}]"
            )));
        }
        let hi = self.snapshots.partition_point(|s| s.time < t);
        let b = &self.snapshots[hi];
        if b.time == t || hi == 0 {
            return Ok(b.values.clone());
        }
        let a = &self.snapshots[hi - 1];
        let lam = (t - a.time) / (b.time - a.time);
        Ok(a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x + lam * (y - x))
            .collect())
    }
}

/// Result of one accepted RK4 step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: DensityField,
    /// Mass that left `[z_min, n]` during the step.
    pub flux: f64,
    pub clamped_mass: f64,
}

pub struct Solver {
    op: CollisionOperator,
    cfg: SolverConfig,
}

struct Stage {
    values: Vec<f64>,
    flux: f64,
}

impl Solver {
    pub fn new(mesh: Arc<Mesh>, spec: &KernelSpec, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Solver {
            op: CollisionOperator::new(mesh, spec)?,
            cfg,
        })
    }

    pub fn operator(&self) -> &CollisionOperator {
        &self.op
    }

    fn rk4(&self, g: &[f64], dt: f64) -> Result<Stage> {
        let n = g.len();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let f1 = self.op.rates_into(g, &mut k1)?;
        for i in 0..n {
            tmp[i] = g[i] + 0.5 * dt * k1[i];
        }
        let f2 = self.op.rates_into(&tmp, &mut k2)?;
        for i in 0..n {
            tmp[i] = g[i] + 0.5 * dt * k2[i];
        }
        let f3 = self.op.rates_into(&tmp, &mut k3)?;
        for i in 0..n {
            tmp[i] = g[i] + dt * k3[i];
        }
        let f4 = self.op.rates_into(&tmp, &mut k4)?;
        let values = (0..n)
            .map(|i| g[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        Ok(Stage {
            values,
            flux: dt / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4),
        })
    }

    /// Clamps values in `[-tol * scale, 0)` to zero and returns the mass
    /// added, or the first cell below the threshold.
    fn clamp(&self, values: &mut [f64]) -> std::result::Result<f64, usize> {
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = -self.cfg.negativity_tol * scale;
        if let Some(i) = values.iter().position(|&v| v < floor || !v.is_finite()) {
            return Err(i);
        }
        let x = self.op.mesh().centers();
        let w = self.op.mesh().widths();
        let mut added = 0.0;
        for (i, v) in values.iter_mut().enumerate() {
            if *v < 0.0 {
                added -= *v * x[i] * w[i];
                *v = 0.0;
            }
        }
        Ok(added)
    }

    fn instability(&self, t: f64, values: &[f64], cell: usize) -> Error {
        Error::Instability {
            t,
            cell,
            z: self.op.mesh().centers()[cell],
            value: values[cell],
        }
    }

    /// One plain RK4 step of size `dt`.
    pub fn step(&self, g: &DensityField, dt: f64) -> Result<StepOutcome> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let stage = self.rk4(&g.values, dt)?;
        let t = g.time + dt;
        let mut values = stage.values;
        let clamped = self
            .clamp(&mut values)
            .map_err(|cell| self.instability(t, &values, cell))?;
        Ok(StepOutcome {
            field: DensityField {
                mesh: g.mesh.clone(),
                values,
                time: t,
            },
            flux: stage.flux,
            clamped_mass: clamped,
        })
    }

    fn record(&self, g: &DensityField, flux_total: f64) -> MomentRecord {
        let mesh = self.op.mesh();
        MomentRecord {
            t: g.time,
            m_neg: moment_values(&g.values, mesh, -self.cfg.neg_moment_order),
            m0: moment_values(&g.values, mesh, 0.0),
            m1: moment_values(&g.values, mesh, 1.0),
            m2: moment_values(&g.values, mesh, 2.0),
            flux_out: flux_total,
        }
    }

    /// Integrates from `g0` to `t_end` with step doubling and local
    /// extrapolation `y_half + (y_half - y_full) / 15`.
    pub fn run_field(&self, g0: DensityField) -> Result<Trajectory> {
        if !Arc::ptr_eq(&g0.mesh, self.op.mesh()) && *g0.mesh != **self.op.mesh() {
            return Err(Error::MeshMismatch);
        }
        let cfg = self.cfg;
        let t_end = cfg.t_end;
        let mut g = DensityField { time: 0.0, ..g0 };
        let mut flux_total = 0.0;
        let mut clamped_total = 0.0;
        let mut moments = vec![self.record(&g, 0.0)];
        let mut snapshots = vec![g.clone()];
        let mut accepted = 0usize;
        let mut rejected = 0usize;
        let mut dt = cfg.dt_init.min(cfg.dt_max);
        let min_dt = 1e-12 * t_end;

        while g.time < t_end {
            let remaining = t_end - g.time;
            let mut h = dt.min(cfg.dt_max);
            let last_step = h >= remaining;
            if last_step {
                h = remaining;
            } else if h > 0.5 * remaining {
                h = 0.5 * remaining;
            }
            if h < min_dt {
                return Err(Error::StepUnderflow { t: g.time, dt: h });
            }

            let full = self.rk4(&g.values, h)?;
            let half = self.rk4(&g.values, 0.5 * h)?;
            let half = self.rk4(&half.values, 0.5 * h).map(|s| Stage {
                flux: half.flux + s.flux,
                values: s.values,
            })?;
            let mut err = 0.0f64;
            for (a, b) in full.values.iter().zip(&half.values) {
                err = err.max((a - b).abs() / (1.0 + b.abs()));
            }
            let err_rate = err / h;
            let finite = err_rate.is_finite();
            let factor = if !finite {
                0.2
            } else if err_rate == 0.0 {
                5.0
            } else {
                (cfg.safety * (cfg.tol_step / err_rate).powf(0.25)).clamp(0.2, 5.0)
            };

            if finite && err_rate <= cfg.tol_step {
                let mut values: Vec<f64> = full
                    .values
                    .iter()
                    .zip(&half.values)
                    .map(|(a, b)| b + (b - a) / 15.0)
                    .collect();
                let step_flux = half.flux + (half.flux - full.flux) / 15.0;
                let t_new = if last_step { t_end } else { g.time + h };
                match self.clamp(&mut values) {
                    Ok(added) => {
                        clamped_total += added;
                        flux_total += step_flux;
                        g = DensityField {
                            mesh: g.mesh.clone(),
                            values,
                            time: t_new,
                        };
                        accepted += 1;
                        moments.push(self.record(&g, flux_total));
                        if accepted.is_multiple_of(cfg.record_every) || g.time >= t_end {
                            snapshots.push(g.clone());
                        }
                        dt = (h * factor).min(cfg.dt_max);
                    }
                    Err(cell) => {
                        if 0.5 * h < min_dt {
                            return Err(self.instability(t_new, &values, cell));
                        }
                        rejected += 1;
                        dt = 0.5 * h;
                    }
                }
            } else {
                rejected += 1;
                dt = h * factor.min(0.9);
            }
        }

        Ok(Trajectory {
            spec: *self.op.spec(),
            config: cfg,
            snapshots,
            moments,
            clamped_mass: clamped_total,
            steps_accepted: accepted,
            steps_rejected: rejected,
        })
    }
}

/// One RK4 step of the truncated system; see [`Solver::step`].
pub fn step(g: &DensityField, dt: f64, spec: &KernelSpec) -> Result<DensityField> {
    let solver = Solver::new(g.mesh.clone(), spec, SolverConfig::default())?;
    solver.step(g, dt).map(|o| o.field)
}

pub fn run(
    init: &InitialDatum,
    mesh: Arc<Mesh>,
    spec: &KernelSpec,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let solver = Solver::new(mesh.clone(), spec, *cfg)?;
    solver.run_field(init.sample(mesh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, MeshKind};
    use crate::kernels::EfficiencyModel;
    use crate::operators::rhs;

    fn default_spec() -> KernelSpec {
        KernelSpec::new(1.0, 0.5, 0.5, EfficiencyModel::Constant(0.5), 0.0).unwrap()
    }

    #[test]
    fn zero_and_inert_steps() {
        let mesh = build_mesh(1e-3, 10.0, 32, MeshKind::Geometric).unwrap();
        let zero = DensityField::zeros(mesh.clone(), 0.0);
        let next = step(&zero, 0.1, &default_spec()).unwrap();
        assert_eq!(next.values, zero.values);
        assert_eq!(next.time, 0.1);

        let mut off = default_spec();
        off.c = 0.0;
        let g = DensityField::from_fn(mesh, 0.0, |z| (-z).exp());
        assert_eq!(step(&g, 0.1, &off).unwrap().values, g.values);
    }

    #[test]
    fn small_step_is_consistent_with_rhs() {
        let mesh = build_mesh(1e-3, 10.0, 32, MeshKind::Geometric).unwrap();
        let g = DensityField::from_fn(mesh, 0.0, |z| (-z).exp());
        let f = rhs(&g, &default_spec()).unwrap().rhs;
        let mut prev = f64::INFINITY;
        for dt in [1e-2, 1e-3, 1e-4] {
            let next = step(&g, dt, &default_spec()).unwrap();
            let err = next
                .values
                .iter()
                .zip(&g.values)
                .zip(&f)
                .map(|((a, b), r)| ((a - b) / dt - r).abs())
                .fold(0.0f64, f64::max);
            assert!(err < 0.5 * prev || err < 1e-9, "dt = {dt}: {err}");
            prev = err;
        }
    }

    #[test]
    fn zero_horizon_keeps_only_the_initial_state() {
        let mesh = build_mesh(1e-3, 10.0, 16, MeshKind::Geometric).unwrap();
        let cfg = SolverConfig {
            t_end: 0.0,
            ..SolverConfig::default()
        };
        let traj = run(&InitialDatum::default(), mesh, &default_spec(), &cfg).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.moments.len(), 1);
    }

    #[test]
    fn mass_balance_and_monotone_moments() {
        let mesh = build_mesh(1e-4, 20.0, 64, MeshKind::Geometric).unwrap();
        let traj = run(
            &InitialDatum::default(),
            mesh,
            &default_spec(),
            &SolverConfig::default(),
        )
        .unwrap();
        let m0 = traj.moments[0];
        let end = *traj.moments.last().unwrap();
        assert_eq!(end.t, 1.0);
        for w in traj.moments.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!(w[1].m1 <= w[0].m1 * (1.0 + 1e-12));
            assert!(w[1].m0 <= w[0].m0 * (1.0 + 1e-12));
            assert!(w[1].flux_out >= w[0].flux_out);
        }
        let balance = m0.m1 - end.m1 - end.flux_out + traj.clamped_mass;
        assert!(balance.abs() <= 1e-12 * m0.m1, "balance {balance}");
        assert!(traj.clamped_mass <= 1e-8 * m0.m1);
        assert!(traj.last().values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn halving_tolerance_shrinks_the_change() {
        let mesh = build_mesh(1e-4, 20.0, 48, MeshKind::Geometric).unwrap();
        let solve = |tol: f64| {
            let cfg = SolverConfig {
                tol_step: tol,
                dt_init: 0.05,
                ..SolverConfig::default()
            };
            run(
                &InitialDatum::default(),
                mesh.clone(),
                &default_spec(),
                &cfg,
            )
            .unwrap()
            .last()
            .values
            .clone()
        };
        let diff = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max)
        };
        let (a, b, c) = (solve(1e-4), solve(5e-5), solve(2.5e-5));
        let (d1, d2) = (diff(&a, &b), diff(&b, &c));
        assert!(d1 >= 2.0 * d2, "{d1} vs {d2}");
    }

    #[test]
    fn interpolation_hits_snapshots_exactly() {
        let mesh = build_mesh(1e-3, 10.0, 16, MeshKind::Geometric).unwrap();
        let traj = run(
            &InitialDatum::default(),
            mesh,
            &default_spec(),
            &SolverConfig::default(),
        )
        .unwrap();
        for s in &traj.snapshots {
            assert_eq!(traj.values_at(s.time).unwrap(), s.values);
        }
        assert!(traj.values_at(1.5).is_err());
    }
}
