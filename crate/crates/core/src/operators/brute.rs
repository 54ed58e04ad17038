//! Reference evaluation by direct loops: for every output cell, every
//! ordered colliding pair, and every piece of that cell's weight function.

use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::kernels::KernelSpec;

use super::OperatorOutput;

pub const BRUTE_FORCE_MAX_CELLS: usize = 512;

/// Linear pieces `(lo, hi, a0, a1)` of the weight `a0 + a1 v` that pivot `k`
/// receives from a particle of volume `v in [lo, hi)`; the top piece is closed at `n`.
fn weight_pieces(x: &[f64], z_min: f64, n: f64, k: usize) -> Vec<(f64, f64, f64, f64)> {
    let last = x.len() - 1;
    let mut pieces = Vec::with_capacity(2);
    if k == 0 {
        pieces.push((z_min, x[0], 0.0, 1.0 / x[0]));
    } else {
        let d = x[k] - x[k - 1];
        pieces.push((x[k - 1], x[k], -x[k - 1] / d, 1.0 / d));
    }
    if k == last {
        pieces.push((x[last], n, 0.0, 1.0 / x[last]));
    } else {
        let d = x[k + 1] - x[k];
        pieces.push((x[k], x[k + 1], x[k + 1] / d, -1.0 / d));
    }
    pieces
}

fn weight_at(pieces: &[(f64, f64, f64, f64)], v: f64, n: f64) -> f64 {
    for &(lo, hi, a0, a1) in pieces {
        let inside = v >= lo && (v < hi || (hi == n && v <= n));
        if inside {
            return a0 + a1 * v;
        }
    }
    0.0
}

/// `int_0^s weight(v) P(v | s) dv` with `P = (theta + 2) v^theta / s^(theta + 1)`.
fn fragment_share(pieces: &[(f64, f64, f64, f64)], s: f64, theta: f64) -> f64 {
    let mut total = 0.0;
    for &(lo, hi, a0, a1) in pieces {
        let top = hi.min(s);
        if top <= lo {
            continue;
        }
        // antiderivative of (a0 + a1 v)(theta + 2) v^theta
        let prim = |v: f64| {
            (theta + 2.0)
                * (a0 * v.powf(theta + 1.0) / (theta + 1.0)
                    + a1 * v.powf(theta + 2.0) / (theta + 2.0))
        };
        total += prim(top) - prim(lo);
    }
    total / s.powf(theta + 1.0)
}

pub fn brute_force_rhs(g: &DensityField, spec: &KernelSpec) -> Result<OperatorOutput> {
    spec.validate_evaluable()?;
    let mesh = &*g.mesh;
    let cells = mesh.len();
    if cells > BRUTE_FORCE_MAX_CELLS {
        return Err(Error::OracleTooLarge {
            cells,
            limit: BRUTE_FORCE_MAX_CELLS,
        });
    }
    if cells < 2 {
        return Err(Error::Mesh(
            "collision operators need at least 2 cells".into(),
        ));
    }
    let x = mesh.centers();
    let w = mesh.widths();
    let n = mesh.n();
    let v = &g.values;

    let mut gain_coag = vec![0.0; cells];
    let mut gain_break = vec![0.0; cells];
    let mut loss = vec![0.0; cells];
    for k in 0..cells {
        let pieces = weight_pieces(x, mesh.z_min(), n, k);
        let mut coag = 0.0;
        let mut brk = 0.0;
        for a in 0..cells {
            for b in 0..cells {
                let s = x[a] + x[b];
                if s > n {
                    continue;
                }
                let rate = 0.5 * spec.phi(x[a], x[b]) * v[a] * w[a] * v[b] * w[b];
                let e = spec.efficiency.coalescence(x[a], x[b]);
                let e1 = spec.efficiency.breakage(x[a], x[b]);
                coag += e * rate * weight_at(&pieces, s, n);
                brk += e1 * rate * fragment_share(&pieces, s, spec.theta);
            }
        }
        gain_coag[k] = coag / w[k];
        gain_break[k] = brk / w[k];
        let mut l = 0.0;
        for b in 0..cells {
            l += spec.phi(x[k], x[b]) * v[b] * w[b];
        }
        loss[k] = v[k] * l;
    }

    let below = [(0.0, mesh.z_min(), 0.0, 1.0)];
    let mut flux_out = 0.0;
    for a in 0..cells {
        for b in 0..cells {
            let s = x[a] + x[b];
            let rate = 0.5 * spec.phi(x[a], x[b]) * v[a] * w[a] * v[b] * w[b];
            if s > n {
                flux_out += rate * s;
            } else {
                let e1 = spec.efficiency.breakage(x[a], x[b]);
                flux_out += e1 * rate * fragment_share(&below, s, spec.theta);
            }
        }
    }

    let rhs = (0..cells)
        .map(|k| gain_coag[k] - loss[k] + gain_break[k])
        .collect();
    Ok(OperatorOutput {
        gain_coag,
        loss,
        gain_break,
        rhs,
        flux_out,
    })
}
