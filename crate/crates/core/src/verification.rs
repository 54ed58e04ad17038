//! A-priori estimates of the truncated problem turned into checks on
//! computed trajectories: moment bounds, the pointwise majorant,
//! equicontinuity moduli, tail bounds, continuous dependence and the mass
//! law.
//!
//! The majorant `A(z, t)`, its window supremum `S(T)` and the time-modulus
//! constant grow double-exponentially in their parameters and overflow
//! `f64` for ordinary inputs, so they are carried as natural logarithms.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{sample, DensityField, Mesh};
use crate::kernels::{zeta_bound, KernelSpec};
use crate::solver::Trajectory;

/// Relative slack allowed on the moment bounds.
pub const MOMENT_SLACK: f64 = 1e-6;
/// Relative slack allowed on the Gronwall estimate.
pub const GRONWALL_SLACK: f64 = 1e-3;
/// Absolute tolerance (relative to the solution norm) for identical runs.
pub const UNIQUENESS_TOL: f64 = 1e-9;
/// Per-unit-time tolerance of the mass law.
pub const MASS_LAW_TOL: f64 = 1e-6;
/// Allowed growth between consecutive refinement levels.
pub const REFINEMENT_SLACK: f64 = 0.1;
/// Allowed non-monotonicity of the space modulus.
pub const MODULUS_SLACK: f64 = 0.1;
pub const TAIL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceParams {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Default for SpaceParams {
    fn default() -> Self {
        SpaceParams {
            sigma1: 0.5,
            sigma2: 1.5,
        }
    }
}

impl SpaceParams {
    /// Violations of the well-posedness restrictions tying the weights to the kernel.
    pub fn problems(&self, spec: &KernelSpec) -> Vec<String> {
        let mut p = Vec::new();
        let (s1, s2) = (self.sigma1, self.sigma2);
        if !(0.5..1.0).contains(&s1) {
            p.push(format!("sigma1 = {s1} must lie in [1/2, 1)"));
        }
        if !(s2 > 1.0 && s2 <= 2.0) {
            p.push(format!("sigma2 = {s2} must lie in (1, 2]"));
        }
        let lower1 = (1.0 - spec.alpha).max(1.0 - spec.alpha_prime);
        if s1 < lower1 {
            p.push(format!(
                "sigma1 = {s1} violates the well-posedness restriction \
                 1/2 <= max(1-alpha, 1-alpha') <= sigma1 < 1 (max(1-alpha, 1-alpha') = {lower1})"
            ));
        }
        let lower2 = (1.0 + spec.alpha).max(1.0 + spec.alpha_prime);
        if s2 < lower2 {
            p.push(format!(
                "sigma2 = {s2} violates the well-posedness restriction \
                 1 < max(1+alpha, 1+alpha') <= sigma2 <= 2 (max(1+alpha, 1+alpha') = {lower2})"
            ));
        }
        p
    }

    pub fn check_admissible(&self, spec: &KernelSpec) -> Result<()> {
        let p = self.problems(spec);
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Constraint(p.join("; ")))
        }
    }
}

/// `sum_k x_k^r v_k w_k`.
pub fn moment_values(values: &[f64], mesh: &Mesh, r: f64) -> f64 {
    values
        .iter()
        .zip(mesh.centers())
        .zip(mesh.widths())
        .map(|((v, x), w)| x.powf(r) * v * w)
        .sum()
}

/// `M_r = int z^r g dz` over `[z_min, n]`.
pub fn moment(g: &DensityField, r: f64) -> f64 {
    moment_values(&g.values, &g.mesh, r)
}

/// `int (z^-sigma1 + z^sigma2) |g| dz`.
pub fn weighted_norm(g: &DensityField, params: &SpaceParams) -> f64 {
    let mesh = &*g.mesh;
    g.values
        .iter()
        .zip(mesh.centers())
        .zip(mesh.widths())
        .map(|((v, x), w)| (x.powf(-params.sigma1) + x.powf(params.sigma2)) * v.abs() * w)
        .sum()
}

/// Supremum of [`weighted_norm`] over the stored snapshots.
pub fn trajectory_norm(traj: &Trajectory, params: &SpaceParams) -> f64 {
    traj.snapshots
        .iter()
        .map(|s| weighted_norm(s, params))
        .fold(0.0, f64::max)
}

/// Moments of the initial datum that feed the ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialMoments {
    /// `M_{-sigma1}(0)`
    pub m_neg: f64,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    /// `sup g0` over cells with center `<= Z°`
    pub sup_window: f64,
}

impl InitialMoments {
    pub fn from_field(g0: &DensityField, params: &SpaceParams, z_o: f64) -> Self {
        let sup_window = g0
            .values
            .iter()
            .zip(g0.mesh.centers())
            .filter(|(_, &x)| x <= z_o)
            .map(|(v, _)| *v)
            .fold(0.0, f64::max);
        InitialMoments {
            m_neg: moment(g0, -params.sigma1),
            m0: moment(g0, 0.0),
            m1: moment(g0, 1.0),
            m2: moment(g0, 2.0),
            sup_window,
        }
    }
}

/// Constants of the a-priori estimates for one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundLedger {
    pub c: f64,
    pub sigma1: f64,
    pub zeta: f64,
    pub t_end: f64,
    pub z_o: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2_t: f64,
    pub gamma_neg_t: f64,
    pub a0: f64,
    /// `ln S(T)`, `S(T) = A(0) exp(A(0) c (1 + Z°) Z° (e^T - 1) + T)`
    pub ln_s_t: f64,
    /// `ln C_emp`, the Lipschitz-in-time constant of the density on the window
    pub ln_c_emp: f64,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

impl BoundLedger {
    pub fn from_moments(
        m: &InitialMoments,
        spec: &KernelSpec,
        params: &SpaceParams,
        t_end: f64,
        z_o: f64,
    ) -> Result<Self> {
        if spec.theta != 0.0 {
            return Err(Error::Constraint(format!(
                "the bound ledger is only available for binary breakage (theta = 0), got theta = {}",
                spec.theta
            )));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::Domain(format!("T must be >= 0, got {t_end}")));
        }
        if !(z_o > 0.0 && z_o.is_finite()) {
            return Err(Error::Domain(format!("Z° must be positive, got {z_o}")));
        }
        let c = spec.c;
        let zeta = zeta_bound(params.sigma1)?;
        let (g0, g1) = (m.m0, m.m1);
        let gamma2_t = (m.m2 + 2.0 * c * g0 * g0) * (2.0 * c * (2.0 * g0 + g1) * t_end).exp();
        let gamma_neg_t =
            (m.m_neg + zeta * c * (2.0 * g0 * g1 + g1 * g1)) * (zeta * c * g0 * t_end).exp();
        let a0 = m.sup_window.max(2.0 * c * (g0 + g1) * (gamma_neg_t + g1));
        let ln_s_t = a0.ln() + a0 * c * (1.0 + z_o) * z_o * t_end.exp_m1() + t_end;
        let ln_c = c.ln();
        let ln_c_emp = log_sum_exp(&[
            ln_c + ((1.0 + z_o) * z_o).ln() + 2.0 * ln_s_t,
            ln_c + (2.0 * (1.0 + z_o).sqrt() * (g0 + g1)).ln() + ln_s_t,
            ln_c + (2.0 * (g0 + g1) * (gamma_neg_t + g1)).ln(),
        ]);
        Ok(BoundLedger {
            c,
            sigma1: params.sigma1,
            zeta,
            t_end,
            z_o,
            gamma0: g0,
            gamma1: g1,
            gamma2_t,
            gamma_neg_t,
            a0,
            ln_s_t,
            ln_c_emp,
        })
    }

    /// `S(T)`; infinite when it exceeds the `f64` range.
    pub fn s_t(&self) -> f64 {
        self.ln_s_t.exp()
    }

    pub fn c_emp(&self) -> f64 {
        self.ln_c_emp.exp()
    }

    /// Gronwall rate `(4c + 12c / (1 - sigma1)) (||g|| + ||h||)`.
    pub fn gronwall_theta(&self, norm_g: f64, norm_h: f64) -> f64 {
        (4.0 * self.c + 12.0 * self.c / (1.0 - self.sigma1)) * (norm_g + norm_h)
    }
}

pub fn compute_ledger(
    init: &DensityField,
    spec: &KernelSpec,
    params: &SpaceParams,
    t_end: f64,
    z_o: f64,
) -> Result<BoundLedger> {
    params.check_admissible(spec)?;
    let m = InitialMoments::from_field(init, params, z_o);
    BoundLedger::from_moments(&m, spec, params, t_end, z_o)
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Worst ratio of a measured quantity to what the check allows; the
    /// check passes when this does not exceed 1.
    pub margin: f64,
    pub details: Vec<(String, f64)>,
    pub violations: Vec<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            passed: true,
            margin: f64::NEG_INFINITY,
            details: Vec::new(),
            violations: Vec::new(),
        }
    }

    fn ratio(&mut self, r: f64) {
        if r > self.margin || r.is_nan() {
            self.margin = r;
        }
    }

    fn fail(&mut self, msg: String) {
        self.passed = false;
        if self.violations.len() < 20 {
            self.violations.push(msg);
        }
    }

    fn detail(&mut self, key: impl Into<String>, value: f64) {
        self.details.push((key.into(), value));
    }

    fn finish(mut self) -> Self {
        if self.margin == f64::NEG_INFINITY {
            self.margin = 0.0;
        }
        self
    }

    pub fn summary(&self) -> String {
        let status = if self.passed { "pass" } else { "fail" };
        match self.violations.first() {
            Some(v) => format!("{status} margin={:e}; {v}", self.margin),
            None => format!("{status} margin={:e}", self.margin),
        }
    }

    pub fn into_result(self) -> Result<CheckReport> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::CheckFailed(Box::new(self)))
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.summary())
    }
}

/// `M_0 <= Gamma0`, `M_1 <= Gamma1`, `M_2 <= Gamma2(T)` and
/// `M_{-sigma1} <= Gamma_{-sigma1}(T)` at every logged time.
pub fn check_moment_bounds(traj: &Trajectory, ledger: &BoundLedger) -> CheckReport {
    let mut rep = CheckReport::new("moment_bounds");
    let mesh = traj.mesh().clone();
    let neg_logged = traj.config.neg_moment_order == ledger.sigma1;
    let rows: Vec<(f64, [f64; 4])> = if neg_logged {
        traj.moments
            .iter()
            .map(|m| (m.t, [m.m0, m.m1, m.m2, m.m_neg]))
            .collect()
    } else {
        traj.snapshots
            .iter()
            .map(|s| {
                let v = &s.values;
                (
                    s.time,
                    [
                        moment_values(v, &mesh, 0.0),
                        moment_values(v, &mesh, 1.0),
                        moment_values(v, &mesh, 2.0),
                        moment_values(v, &mesh, -ledger.sigma1),
                    ],
                )
            })
            .collect()
    };
    let names = ["M0", "M1", "M2", "M_neg"];
    let bounds = [
        ledger.gamma0,
        ledger.gamma1,
        ledger.gamma2_t,
        ledger.gamma_neg_t,
    ];
    let mut worst = [0.0f64; 4];
    for (t, vals) in rows {
        for i in 0..4 {
            let r = if bounds[i] > 0.0 {
                vals[i] / bounds[i]
            } else if vals[i] <= 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst[i] = worst[i].max(r);
            if !(vals[i] <= bounds[i] * (1.0 + MOMENT_SLACK)) {
                rep.fail(format!(
                    "{} = {:e} exceeds its bound {:e} at t = {t}",
                    names[i], vals[i], bounds[i]
                ));
            }
        }
    }
    for i in 0..4 {
        rep.detail(format!("ratio_{}", names[i]), worst[i]);
        rep.ratio(worst[i] / (1.0 + MOMENT_SLACK));
    }
    rep.finish()
}

fn check_window(z: f64, t: f64, ledger: &BoundLedger) -> Result<()> {
    if !(z >= 0.0 && z <= ledger.z_o) {
        return Err(Error::Domain(format!(
            "z = {z} lies outside the window [0, {}]",
            ledger.z_o
        )));
    }
    if !(t >= 0.0 && t <= ledger.t_end) {
        return Err(Error::Domain(format!(
            "t = {t} lies outside [0, {}]",
            ledger.t_end
        )));
    }
    Ok(())
}

/// `ln A(z, t) = ln A(0) + c A(0) z (1 + Z°) (e^t - 1) + t`.
pub fn ln_majorant_a(z: f64, t: f64, ledger: &BoundLedger) -> Result<f64> {
    check_window(z, t, ledger)?;
    Ok(ledger.a0.ln() + ledger.c * ledger.a0 * z * (1.0 + ledger.z_o) * t.exp_m1() + t)
}

/// The pointwise majorant `A(z, t)`; may be `+inf` when it exceeds the `f64` range.
pub fn majorant_a(z: f64, t: f64, ledger: &BoundLedger) -> Result<f64> {
    ln_majorant_a(z, t, ledger).map(f64::exp)
}

/// `g(z, t) <= A(z, t)` and `g <= S(T)` at every stored sample with `z <= Z°`.
pub fn check_uniform_bound(traj: &Trajectory, ledger: &BoundLedger) -> Result<CheckReport> {
    let mesh = traj.mesh();
    if ledger.z_o > mesh.n() {
        return Err(Error::Domain(format!(
            "Z° = {} exceeds the truncation volume n = {}",
            ledger.z_o,
            mesh.n()
        )));
    }
    let mut rep = CheckReport::new("uniform_bound");
    let mut worst_a = f64::NEG_INFINITY;
    let mut worst_s = f64::NEG_INFINITY;
    for snap in &traj.snapshots {
        let t = snap.time.min(ledger.t_end);
        for (&v, &z) in snap.values.iter().zip(mesh.centers()) {
            if z > ledger.z_o || v <= 0.0 {
                continue;
            }
            let ln_v = v.ln();
            let ln_a = ln_majorant_a(z, t, ledger)?;
            worst_a = worst_a.max(ln_v - ln_a);
            worst_s = worst_s.max(ln_v - ledger.ln_s_t);
            if ln_v > ln_a {
                rep.fail(format!("g({z}, {t}) = {v:e} exceeds A = exp({ln_a})"));
            }
            if ln_v > ledger.ln_s_t {
                rep.fail(format!(
                    "g({z}, {t}) = {v:e} exceeds S(T) = exp({})",
                    ledger.ln_s_t
                ));
            }
        }
    }
    rep.detail("ln_ratio_A", worst_a);
    rep.detail("ln_ratio_S", worst_s);
    rep.detail("ln_A0", ledger.a0.ln());
    rep.detail("ln_S_T", ledger.ln_s_t);
    rep.ratio(worst_a.exp());
    rep.ratio(worst_s.exp());
    Ok(rep.finish())
}

/// `sup |g(z, t + h) - g(z, t)|` over cells with `z <= z_max` and over
/// times `t` that are snapshot times or lie `h` before one.
pub fn modulus_time(traj: &Trajectory, h: f64, z_max: f64) -> Result<f64> {
    let t0 = traj.initial().time;
    let t1 = traj.last().time;
    if !(h > 0.0 && h < t1 - t0) {
        return Err(Error::Domain(format!(
            "time shift h = {h} must lie in (0, {})",
            t1 - t0
        )));
    }
    let mut starts: Vec<f64> = Vec::new();
    for s in &traj.snapshots {
        if s.time + h <= t1 {
            starts.push(s.time);
        }
        if s.time - h >= t0 {
            starts.push(s.time - h);
        }
    }
    let cells = traj
        .mesh()
        .centers()
        .iter()
        .take_while(|&&z| z <= z_max)
        .count();
    let mut sup = 0.0f64;
    for t in starts {
        let a = traj.values_at(t)?;
        let b = traj.values_at((t + h).min(t1))?;
        for k in 0..cells {
            sup = sup.max((b[k] - a[k]).abs());
        }
    }
    Ok(sup)
}

/// `sup |g(z + h) - g(z)|` over cell centers `z <= z_max` with `z + h <= n`.
pub fn modulus_space(field: &DensityField, h: f64, z_max: f64) -> Result<f64> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("space shift must be >= 0, got {h}")));
    }
    let n = field.mesh.n();
    let mut sup = 0.0f64;
    for &z in field.mesh.centers() {
        if z > z_max || z + h > n {
            break;
        }
        sup = sup.max((sample(field, z + h) - sample(field, z)).abs());
    }
    Ok(sup)
}

/// `modulus_time(h) / h <= C_emp` for every `h`.
pub fn check_time_modulus(
    traj: &Trajectory,
    ledger: &BoundLedger,
    hs: &[f64],
) -> Result<CheckReport> {
    let mut rep = CheckReport::new("time_modulus");
    let z_max = ledger.z_o.min(traj.mesh().n());
    rep.detail("ln_C_emp", ledger.ln_c_emp);
    for &h in hs {
        let m = modulus_time(traj, h, z_max)?;
        let ln_ratio = (m / h).ln() - ledger.ln_c_emp;
        rep.detail(format!("modulus_over_h[{h}]"), m / h);
        rep.ratio(ln_ratio.exp());
        if !(ln_ratio <= 0.0) && m > 0.0 {
            rep.fail(format!(
                "modulus_time({h}) / h = {:e} exceeds C_emp = exp({})",
                m / h,
                ledger.ln_c_emp
            ));
        }
    }
    Ok(rep.finish())
}

/// Space modulus decreasing along `hs` (given in decreasing order) up to [`MODULUS_SLACK`].
pub fn check_space_modulus(field: &DensityField, hs: &[f64], z_max: f64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("space_modulus");
    let mut values = Vec::with_capacity(hs.len());
    for &h in hs {
        let m = modulus_space(field, h, z_max)?;
        rep.detail(format!("modulus[{h}]"), m);
        values.push((h, m));
    }
    for w in values.windows(2) {
        let ((h0, m0), (h1, m1)) = (w[0], w[1]);
        let allowed = m0 * (1.0 + MODULUS_SLACK);
        rep.ratio(if allowed > 0.0 {
            m1 / allowed
        } else if m1 > 0.0 {
            f64::INFINITY
        } else {
            0.0
        });
        if m1 > allowed {
            rep.fail(format!(
                "modulus grew from {m0:e} at h = {h0} to {m1:e} at h = {h1}"
            ));
        }
    }
    Ok(rep.finish())
}

/// Returns `(int_{z >= beta} g, beta^-r int z^r g)` with cells assigned by their centers.
pub fn tail_bound_check(field: &DensityField, beta: f64, r: f64) -> Result<(f64, f64)> {
    let mesh = &*field.mesh;
    if !(beta > mesh.z_min()) {
        return Err(Error::Domain(format!(
            "beta = {beta} must exceed z_min = {}",
            mesh.z_min()
        )));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "tail exponent must be positive, got {r}"
        )));
    }
    let mut lhs = 0.0;
    let mut weighted = 0.0;
    for ((v, x), w) in field.values.iter().zip(mesh.centers()).zip(mesh.widths()) {
        if *x >= beta {
            lhs += v * w;
        }
        weighted += x.powf(r) * v * w;
    }
    Ok((lhs, beta.powf(-r) * weighted))
}

/// `Q = int (z^-sigma1 + z) |g - h| dz`.
pub fn q_distance(g: &DensityField, h: &DensityField, sigma1: f64) -> Result<f64> {
    if !g.same_mesh(h) {
        return Err(Error::MeshMismatch);
    }
    Ok(q_values(&g.values, &h.values, &g.mesh, sigma1))
}

fn q_values(g: &[f64], h: &[f64], mesh: &Mesh, sigma1: f64) -> f64 {
    g.iter()
        .zip(h)
        .zip(mesh.centers())
        .zip(mesh.widths())
        .map(|(((a, b), x), w)| (x.powf(-sigma1) + x) * (a - b).abs() * w)
        .sum()
}

/// Gronwall form of continuous dependence: `Q(t) <= Q(0) e^{Theta t}`, and
/// `Q == 0` when both runs start from the same datum.
pub fn check_continuous_dependence(
    run_g: &Trajectory,
    run_h: &Trajectory,
    params: &SpaceParams,
) -> Result<CheckReport> {
    if !run_g.initial().same_mesh(run_h.initial()) {
        return Err(Error::MeshMismatch);
    }
    let mesh = run_g.mesh().clone();
    let c = run_g.spec.c;
    let norm_g = trajectory_norm(run_g, params);
    let norm_h = trajectory_norm(run_h, params);
    let theta = (4.0 * c + 12.0 * c / (1.0 - params.sigma1)) * (norm_g + norm_h);
    let q0 = q_values(
        &run_g.initial().values,
        &run_h.initial().values,
        &mesh,
        params.sigma1,
    );

    let mut rep = CheckReport::new("continuous_dependence");
    rep.detail("Theta", theta);
    rep.detail("Q0", q0);
    let mut q_max = 0.0f64;
    let mut identical = true;
    for snap in &run_g.snapshots {
        let t = snap.time;
        let other = run_h.values_at(t)?;
        if other != snap.values {
            identical = false;
        }
        let q = q_values(&snap.values, &other, &mesh, params.sigma1);
        q_max = q_max.max(q);
        if q0 == 0.0 {
            let allowed = UNIQUENESS_TOL * norm_g.max(f64::MIN_POSITIVE);
            rep.ratio(q / allowed);
            if q > allowed {
                rep.fail(format!(
                    "runs from identical data differ at t = {t}: Q = {q:e}"
                ));
            }
        } else {
            let ln_ratio = q.ln() - q0.ln() - theta * t;
            rep.ratio(ln_ratio.exp() / (1.0 + GRONWALL_SLACK));
            if q > 0.0 && ln_ratio > GRONWALL_SLACK.ln_1p() {
                rep.fail(format!(
                    "Q({t}) = {q:e} exceeds Q(0) exp(Theta t) = {q0:e} * exp({})",
                    theta * t
                ));
            }
        }
    }
    rep.detail("Q_max", q_max);
    rep.detail("bitwise_identical", if identical { 1.0 } else { 0.0 });
    Ok(rep.finish())
}

/// Truncated-system mass law: `M1` decreases only through the flux out of `[z_min, n]`
/// and `M0` does not grow, both up to [`MASS_LAW_TOL`] per unit time.
pub fn check_mass_law(traj: &Trajectory) -> CheckReport {
    let mut rep = CheckReport::new("mass_law");
    let first = traj.moments[0];
    let last = *traj.moments.last().expect("moment log is never empty");
    let m1_scale = first.m1.abs().max(f64::MIN_POSITIVE);
    let m0_scale = first.m0.abs().max(f64::MIN_POSITIVE);
    let mut worst_growth = f64::NEG_INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_m0 = f64::NEG_INFINITY;
    for w in traj.moments.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dt = b.t - a.t;
        let growth = (b.m1 - a.m1) / (m1_scale * dt);
        let excess = ((a.m1 - b.m1) - (b.flux_out - a.flux_out)) / (m1_scale * dt);
        let m0_growth = (b.m0 - a.m0) / (m0_scale * dt);
        worst_growth = worst_growth.max(growth);
        worst_excess = worst_excess.max(excess);
        worst_m0 = worst_m0.max(m0_growth);
        if growth > MASS_LAW_TOL {
            rep.fail(format!(
                "M1 grew at relative rate {growth:e} near t = {}",
                b.t
            ));
        }
        if excess > MASS_LAW_TOL {
            rep.fail(format!(
                "M1 fell faster than the truncation flux by {excess:e} per unit time near t = {}",
                b.t
            ));
        }
        if m0_growth > MASS_LAW_TOL {
            rep.fail(format!(
                "M0 grew at relative rate {m0_growth:e} near t = {}",
                b.t
            ));
        }
    }
    let balance = first.m1 - last.m1 - last.flux_out + traj.clamped_mass;
    rep.detail("max_M1_growth_rate", worst_growth);
    rep.detail("max_M1_excess_over_flux_rate", worst_excess);
    rep.detail("max_M0_growth_rate", worst_m0);
    rep.detail("flux_total", last.flux_out);
    rep.detail("clamped_mass", traj.clamped_mass);
    rep.detail("mass_balance_residual", balance);
    for v in [worst_growth, worst_excess, worst_m0] {
        if v.is_finite() {
            rep.ratio(v / MASS_LAW_TOL);
        }
    }
    rep.finish()
}

/// Relative mass defect `(M1(0) - M1(T)) / M1(0)`, taken from the logged
/// flux and clamping so that defects far below `f64` resolution of `M1`
/// stay measurable.
pub fn mass_defect(traj: &Trajectory) -> f64 {
    let first = traj.moments[0];
    let last = traj.moments.last().expect("moment log is never empty");
    if first.m1 == 0.0 {
        return 0.0;
    }
    (last.flux_out - traj.clamped_mass) / first.m1
}

/// Mass defect shrinking along a refinement sequence of runs.
pub fn check_mass_conservation_limit(runs: &[Trajectory]) -> CheckReport {
    let mut rep = CheckReport::new("mass_conservation_limit");
    if runs.len() < 2 {
        rep.fail("need at least two refinement levels".into());
        return rep.finish();
    }
    let mut defects = Vec::with_capacity(runs.len());
    for (i, traj) in runs.iter().enumerate() {
        let first = traj.moments[0];
        let last = traj.moments.last().expect("moment log is never empty");
        let d = mass_defect(traj);
        let direct = if first.m1 == 0.0 {
            0.0
        } else {
            (first.m1 - last.m1) / first.m1
        };
        let balance = first.m1 - last.m1 - last.flux_out + traj.clamped_mass;
        rep.detail(format!("defect[{i}]"), d);
        rep.detail(format!("direct_defect[{i}]"), direct);
        rep.detail(format!("balance_residual[{i}]"), balance);
        if d < -1e-9 {
            rep.fail(format!("level {i} created mass: defect {d:e}"));
        }
        if balance.abs() > 1e-11 * first.m1.abs() {
            rep.fail(format!("level {i} mass balance is off by {balance:e}"));
        }
        defects.push(d);
    }
    for (i, w) in defects.windows(2).enumerate() {
        let (d0, d1) = (w[0], w[1]);
        let allowed = d0 * (1.0 + REFINEMENT_SLACK);
        let ratio = if d0 > 0.0 {
            d1 / d0
        } else if d1 <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        rep.detail(format!("defect_ratio[{}]", i + 1), ratio);
        rep.ratio(ratio / (1.0 + REFINEMENT_SLACK));
        if d1 > allowed.max(0.0) {
            rep.fail(format!(
                "defect grew from {d0:e} to {d1:e} at level {}",
                i + 1
            ));
        }
    }
    rep.detail(
        "strictly_decreasing",
        if defects.windows(2).all(|w| w[1] < w[0]) {
            1.0
        } else {
            0.0
        },
    );
    rep.finish()
}
