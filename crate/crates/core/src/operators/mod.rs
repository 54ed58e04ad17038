//! Collision operators of the truncated system: coagulation gain `C`,
//! collision loss `B` and collisional-breakage gain `B*`.

mod brute;
mod pivot;

pub use brute::{brute_force_rhs, BRUTE_FORCE_MAX_CELLS};
pub use pivot::CollisionOperator;

use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::kernels::{p_moment, KernelSpec};

/// Per-cell operator values (densities) plus the mass flux leaving `[z_min, n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorOutput {
    pub gain_coag: Vec<f64>,
    pub loss: Vec<f64>,
    pub gain_break: Vec<f64>,
    pub rhs: Vec<f64>,
    pub flux_out: f64,
}

impl OperatorOutput {
    pub fn zeros(cells: usize) -> Self {
        OperatorOutput {
            gain_coag: vec![0.0; cells],
            loss: vec![0.0; cells],
            gain_break: vec![0.0; cells],
            rhs: vec![0.0; cells],
            flux_out: 0.0,
        }
    }
}

pub fn rhs(g: &DensityField, spec: &KernelSpec) -> Result<OperatorOutput> {
    CollisionOperator::new(g.mesh.clone(), spec)?.evaluate(&g.values)
}

pub fn coag_gain(g: &DensityField, spec: &KernelSpec) -> Result<Vec<f64>> {
    rhs(g, spec).map(|o| o.gain_coag)
}

pub fn collision_loss(g: &DensityField, spec: &KernelSpec) -> Result<Vec<f64>> {
    rhs(g, spec).map(|o| o.loss)
}

pub fn breakage_gain(g: &DensityField, spec: &KernelSpec) -> Result<Vec<f64>> {
    rhs(g, spec).map(|o| o.gain_break)
}

pub fn truncation_flux(g: &DensityField, spec: &KernelSpec) -> Result<f64> {
    CollisionOperator::new(g.mesh.clone(), spec)?.flux(&g.values)
}

/// `d/dt M_r` in symmetrized weak form,
///
/// ```text
/// 1/2 sum_a sum_b R_ab [ chi(s <= n) (E s^r + E1 int_{z_min}^s v^r P dv) - x_a^r - x_b^r ],
/// R_ab = phi(x_a, x_b) g_a g_b w_a w_b,   s = x_a + x_b,
/// ```
///
/// summed sequentially in a fixed order.
pub fn weak_moment_rate(g: &DensityField, spec: &KernelSpec, r: f64) -> Result<f64> {
    spec.validate_evaluable()?;
    if !(r > -1.0 && r <= 2.0) {
        return Err(Error::Domain(format!(
            "moment order must lie in (-1, 2], got {r}"
        )));
    }
    let mesh = &*g.mesh;
    let x = mesh.centers();
    let w = mesh.widths();
    let n = mesh.n();
    let theta = spec.theta;
    // int_0^{z_min} v^r P dv = below / s^(theta + 1)
    let below = (theta + 2.0) / (r + theta + 1.0) * mesh.z_min().powf(r + theta + 1.0);
    let v = &g.values;
    let xr: Vec<f64> = x.iter().map(|z| z.powf(r)).collect();
    let mut total = 0.0;
    for a in 0..x.len() {
        for b in 0..x.len() {
            let rate = spec.phi(x[a], x[b]) * v[a] * w[a] * v[b] * w[b];
            if rate == 0.0 {
                continue;
            }
            let s = x[a] + x[b];
            let mut term = -xr[a] - xr[b];
            if s <= n {
                let e = spec.efficiency.coalescence(x[a], x[b]);
                let e1 = spec.efficiency.breakage(x[a], x[b]);
                term += e * s.powf(r);
                if e1 != 0.0 {
                    term += e1 * (p_moment(r, s, theta)? - below * s.powf(-(theta + 1.0)));
                }
            }
            total += 0.5 * rate * term;
        }
    }
    Ok(total)
}
