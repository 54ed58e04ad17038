//! Fixed-pivot evaluation of the collision operators.
//!
//! Particles live on the cell centers `x_k` (pivots). A particle of volume
//! `v` that appears between two pivots is split between them with weights
//! that keep both its number and its volume:
//!
//! ```text
//! v in [x_j, x_{j+1}]:  x_j gets (x_{j+1} - v) / (x_{j+1} - x_j),  x_{j+1} gets (v - x_j) / (x_{j+1} - x_j)
//! v in [z_min, x_0]:    x_0 gets v / x_0
//! v in [x_{N-1}, n]:    x_{N-1} gets v / x_{N-1}
//! ```
//!
//! Coalescence products above `n` leave the system and are counted as
//! truncation flux, as are the fragments of pairs whose total volume
//! exceeds `n` and fragments smaller than `z_min`. Fragment deposits integrate the daughter density against the
//! weight functions in closed form. Summing first over colliding pairs that
//! share a bucket `x_J <= s < x_{J+1}` and then over suffixes of buckets
//! makes the whole evaluation O(N^2).

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Mesh;
use crate::kernels::KernelSpec;

use super::OperatorOutput;

/// `int_lo^hi (a0 + a1 v) (theta + 2) v^theta dv`.
pub(crate) fn weighted_fragment_integral(lo: f64, hi: f64, a0: f64, a1: f64, theta: f64) -> f64 {
    let p1 = theta + 1.0;
    let p2 = theta + 2.0;
    a0 * p2 / p1 * (hi.powf(p1) - lo.powf(p1)) + a1 * (hi.powf(p2) - lo.powf(p2))
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    a: u32,
    b: u32,
    /// multiplicity * E * phi * w_a * w_b
    kc: f64,
    /// multiplicity * E1 * phi * w_a * w_b * s^-(theta+1)
    kb: f64,
    /// coalescence weights on pivots J and J+1
    cl: f64,
    cr: f64,
    /// fragment mass of the partial piece [x_J, s] landing on pivots J and J+1
    pl: f64,
    pr: f64,
}

#[derive(Debug, Clone, Copy)]
struct Overflow {
    a: u32,
    b: u32,
    /// multiplicity * phi * w_a * w_b * s
    k: f64,
}

/// Precomputed collision operator for one mesh and kernel.
#[derive(Debug, Clone)]
pub struct CollisionOperator {
    mesh: Arc<Mesh>,
    spec: KernelSpec,
    /// row-major `phi(x_k, x_b) * w_b`
    phi_w: Vec<f64>,
    pairs: Vec<Pair>,
    /// `pairs[bucket_start[j]..bucket_start[j + 1]]` have `x_j <= s < x_{j+1}`
    bucket_start: Vec<usize>,
    overflow: Vec<Overflow>,
    /// fragment weight of the piece `[z_min, x_0]` on pivot 0
    first_piece: f64,
    /// fragment mass below `z_min`
    bottom_loss: f64,
    /// full interior piece `j` deposits `left[j]` on pivot j and `right[j]` on pivot j+1
    left: Vec<f64>,
    right: Vec<f64>,
}

impl CollisionOperator {
    pub fn new(mesh: Arc<Mesh>, spec: &KernelSpec) -> Result<Self> {
        spec.validate_evaluable()?;
        let n_cells = mesh.len();
        if n_cells < 2 {
            return Err(Error::Mesh(
                "collision operators need at least 2 cells".into(),
            ));
        }
        let x = mesh.centers();
        let w = mesh.widths();
        let n = mesh.n();
        let theta = spec.theta;
        let last = n_cells - 1;

        let mut phi_w = vec![0.0; n_cells * n_cells];
        for k in 0..n_cells {
            for b in 0..n_cells {
                phi_w[k * n_cells + b] = spec.phi(x[k], x[b]) * w[b];
            }
        }

        let mut buckets: Vec<Vec<Pair>> = vec![Vec::new(); n_cells];
        let mut overflow = Vec::new();
        for a in 0..n_cells {
            for b in a..n_cells {
                let s = x[a] + x[b];
                let mult = if a == b { 0.5 } else { 1.0 };
                let base = mult * spec.phi(x[a], x[b]) * w[a] * w[b];
                if s > n {
                    overflow.push(Overflow {
                        a: a as u32,
                        b: b as u32,
                        k: base * s,
                    });
                    continue;
                }
                let e = spec.efficiency.coalescence(x[a], x[b]);
                let e1 = spec.efficiency.breakage(x[a], x[b]);
                // s >= 2 x_0 > x_0, so j is a valid bucket
                let j = x.partition_point(|&c| c <= s) - 1;
                let (cl, cr, pl, pr) = if j == last {
                    let top = weighted_fragment_integral(x[last], s, 0.0, 1.0 / x[last], theta);
                    (s / x[last], 0.0, top, 0.0)
                } else {
                    let d = x[j + 1] - x[j];
                    (
                        (x[j + 1] - s) / d,
                        (s - x[j]) / d,
                        weighted_fragment_integral(x[j], s, x[j + 1] / d, -1.0 / d, theta),
                        weighted_fragment_integral(x[j], s, -x[j] / d, 1.0 / d, theta),
                    )
                };
                buckets[j].push(Pair {
                    a: a as u32,
                    b: b as u32,
                    kc: base * e,
                    kb: base * e1 * s.powf(-(theta + 1.0)),
                    cl,
                    cr,
                    pl,
                    pr,
                });
            }
        }
        let mut bucket_start = Vec::with_capacity(n_cells + 1);
        let mut pairs = Vec::new();
        for bucket in buckets {
            bucket_start.push(pairs.len());
            pairs.extend(bucket);
        }
        bucket_start.push(pairs.len());

        let z_min = mesh.z_min();
        let first_piece = weighted_fragment_integral(z_min, x[0], 0.0, 1.0 / x[0], theta);
        let bottom_loss = weighted_fragment_integral(0.0, z_min, 0.0, 1.0, theta);
        let mut left = Vec::with_capacity(last);
        let mut right = Vec::with_capacity(last);
        for j in 0..last {
            let d = x[j + 1] - x[j];
            left.push(weighted_fragment_integral(
                x[j],
                x[j + 1],
                x[j + 1] / d,
                -1.0 / d,
                theta,
            ));
            right.push(weighted_fragment_integral(
                x[j],
                x[j + 1],
                -x[j] / d,
                1.0 / d,
                theta,
            ));
        }

        Ok(CollisionOperator {
            mesh,
            spec: *spec,
            phi_w,
            pairs,
            bucket_start,
            overflow,
            first_piece,
            bottom_loss,
            left,
            right,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    fn check_len(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.mesh.len() {
            return Err(Error::LengthMismatch {
                expected: self.mesh.len(),
                got: g.len(),
            });
        }
        Ok(())
    }

    /// Per-bucket sums `[coag to J, coag to J+1, W, W * pl, W * pr]`.
    fn bucket_sums(&self, g: &[f64]) -> Vec<[f64; 5]> {
        (0..self.mesh.len())
            .into_par_iter()
            .map(|j| {
                let mut acc = [0.0; 5];
                for p in &self.pairs[self.bucket_start[j]..self.bucket_start[j + 1]] {
                    let gg = g[p.a as usize] * g[p.b as usize];
                    let c = p.kc * gg;
                    let wgt = p.kb * gg;
                    acc[0] += c * p.cl;
                    acc[1] += c * p.cr;
                    acc[2] += wgt;
                    acc[3] += wgt * p.pl;
                    acc[4] += wgt * p.pr;
                }
                acc
            })
            .collect()
    }

    fn loss_into(&self, g: &[f64], out: &mut [f64]) {
        let n_cells = self.mesh.len();
        out.par_iter_mut().enumerate().for_each(|(k, o)| {
            let row = &self.phi_w[k * n_cells..(k + 1) * n_cells];
            let rate: f64 = row.iter().zip(g).map(|(p, gb)| p * gb).sum();
            *o = g[k] * rate;
        });
    }

    /// Mass per unit time leaving `[z_min, n]`.
    pub fn flux(&self, g: &[f64]) -> Result<f64> {
        self.check_len(g)?;
        let fragments: f64 = self.bucket_sums(g).iter().map(|s| s[2]).sum();
        Ok(self.flux_unchecked(g, fragments))
    }

    /// `fragments` is the sum of `W` over all buckets.
    fn flux_unchecked(&self, g: &[f64], fragments: f64) -> f64 {
        let top: f64 = self
            .overflow
            .iter()
            .map(|o| o.k * g[o.a as usize] * g[o.b as usize])
            .sum();
        top + self.bottom_loss * fragments
    }

    /// All operator parts.
    pub fn evaluate(&self, g: &[f64]) -> Result<OperatorOutput> {
        self.check_len(g)?;
        let n_cells = self.mesh.len();
        let w = self.mesh.widths();
        let sums = self.bucket_sums(g);

        let mut gain_coag = vec![0.0; n_cells];
        let mut gain_break = vec![0.0; n_cells];
        for (j, s) in sums.iter().enumerate() {
            gain_coag[j] += s[0];
            gain_break[j] += s[3];
            if j + 1 < n_cells {
                gain_coag[j + 1] += s[1];
                gain_break[j + 1] += s[4];
            }
        }
        // suffix[j] = sum of W over buckets >= j
        let mut suffix = vec![0.0; n_cells + 1];
        for j in (0..n_cells).rev() {
            suffix[j] = suffix[j + 1] + sums[j][2];
        }
        gain_break[0] += self.first_piece * suffix[0];
        for k in 0..n_cells {
            if k + 1 < n_cells {
                gain_break[k] += self.left[k] * suffix[k + 1];
            }
            if k >= 1 {
                gain_break[k] += self.right[k - 1] * suffix[k];
            }
        }
        for k in 0..n_cells {
            gain_coag[k] /= w[k];
            gain_break[k] /= w[k];
        }

        let mut loss = vec![0.0; n_cells];
        self.loss_into(g, &mut loss);
        let rhs = (0..n_cells)
            .map(|k| gain_coag[k] - loss[k] + gain_break[k])
            .collect();
        Ok(OperatorOutput {
            gain_coag,
            loss,
            gain_break,
            rhs,
            flux_out: self.flux_unchecked(g, suffix[0]),
        })
    }

    /// Writes `C - B + B*` into `out` and returns the truncation flux.
    pub fn rates_into(&self, g: &[f64], out: &mut [f64]) -> Result<f64> {
        let parts = self.evaluate(g)?;
        self.check_len(out)?;
        out.copy_from_slice(&parts.rhs);
        Ok(parts.flux_out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, MeshKind};
    use crate::kernels::EfficiencyModel;

    #[test]
    fn fragment_integral_matches_quadrature() {
        let theta = 0.7;
        let (lo, hi, a0, a1) = (0.3, 1.9, 2.0, -0.5);
        let m = 200_000;
        let h = (hi - lo) / m as f64;
        let q: f64 = (0..m)
            .map(|i| {
                let v = lo + (i as f64 + 0.5) * h;
                (a0 + a1 * v) * (theta + 2.0) * v.powf(theta)
            })
            .sum::<f64>()
            * h;
        let exact = weighted_fragment_integral(lo, hi, a0, a1, theta);
        assert!((q - exact).abs() < 1e-9 * exact.abs());
    }

    #[test]
    fn pieces_conserve_fragment_number_and_mass() {
        let mesh = build_mesh(1e-3, 20.0, 40, MeshKind::Geometric).unwrap();
        let spec = KernelSpec::new(1.0, 0.5, 0.5, EfficiencyModel::Constant(0.5), 0.0).unwrap();
        let op = CollisionOperator::new(mesh.clone(), &spec).unwrap();
        let x = mesh.centers();
        let last = x.len() - 1;
        // volume deposited by the full pieces below x_last plus the loss below z_min equals int_0^{x_last} v P
        let mut mass = op.first_piece * x[0] + op.bottom_loss;
        for j in 0..last {
            mass += op.left[j] * x[j] + op.right[j] * x[j + 1];
        }
        let exact = x[last] * x[last];
        assert!((mass - exact).abs() < 1e-12 * exact);
        // number on interior pieces is exact
        for j in 0..last {
            let number = op.left[j] + op.right[j];
            let exact = 2.0 * (x[j + 1] - x[j]);
            assert!((number - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn buckets_partition_pairs() {
        let mesh = build_mesh(1e-2, 5.0, 24, MeshKind::Uniform).unwrap();
        let spec = KernelSpec::new(1.0, 0.3, 0.4, EfficiencyModel::RatioBounded, 0.0).unwrap();
        let op = CollisionOperator::new(mesh.clone(), &spec).unwrap();
        assert_eq!(op.pairs.len() + op.overflow.len(), 24 * 25 / 2);
        let x = mesh.centers();
        for j in 0..x.len() {
            for p in &op.pairs[op.bucket_start[j]..op.bucket_start[j + 1]] {
                let s = x[p.a as usize] + x[p.b as usize];
                assert!(s >= x[j] && s <= mesh.n());
                if j + 1 < x.len() {
                    assert!(s < x[j + 1]);
                }
            }
        }
    }

    #[test]
    fn rejects_single_cell_mesh() {
        let mesh = build_mesh(1.0, 2.0, 1, MeshKind::Uniform).unwrap();
        let spec = KernelSpec::constant_test_mode();
        assert!(CollisionOperator::new(mesh, &spec).is_err());
    }
}
