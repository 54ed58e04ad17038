//! Truncated volume grid `[z_min, n]`, midpoint quadrature and the sampled
//! density field.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Uniform,
    /// Edges at `z_min * rho^i` with `rho = (n / z_min)^(1 / cells)`.
    Geometric,
}

impl MeshKind {
    pub fn name(&self) -> &'static str {
        match self {
            MeshKind::Uniform => "uniform",
            MeshKind::Geometric => "geometric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub left: f64,
    pub center: f64,
    pub right: f64,
    pub width: f64,
}

/// Cells covering `[z_min, n]`. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    z_min: f64,
    n: f64,
    kind: MeshKind,
    edges: Vec<f64>,
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl Mesh {
    pub fn new(z_min: f64, n: f64, cell_count: usize, kind: MeshKind) -> Result<Self> {
        if !(z_min > 0.0 && z_min < n && n.is_finite()) {
            return Err(Error::Mesh(format!(
                "need 0 < z_min < n, got z_min = {z_min}, n = {n}"
            )));
        }
        if cell_count == 0 {
            return Err(Error::Mesh("cell count must be positive".into()));
        }
        let m = cell_count as f64;
        let mut edges: Vec<f64> = match kind {
            MeshKind::Uniform => {
                let h = (n - z_min) / m;
                (0..=cell_count).map(|i| z_min + i as f64 * h).collect()
            }
            MeshKind::Geometric => {
                let rho = (n / z_min).powf(1.0 / m);
                (0..=cell_count)
                    .map(|i| z_min * rho.powi(i as i32))
                    .collect()
            }
        };
        edges[0] = z_min;
        edges[cell_count] = n;
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Mesh(
                "edges are not strictly increasing (too many cells for the range?)".into(),
            ));
        }
        let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
        if centers
            .iter()
            .zip(edges.windows(2))
            .any(|(&c, w)| !(c > w[0] && c < w[1]))
        {
            return Err(Error::Mesh(
                "cells too narrow to hold an interior center".into(),
            ));
        }
        Ok(Mesh {
            z_min,
            n,
            kind,
            edges,
            centers,
            widths,
        })
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    /// Truncation volume.
    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    /// Edge ratio of a geometric mesh.
    pub fn ratio(&self) -> Option<f64> {
        match self.kind {
            MeshKind::Geometric => Some((self.n / self.z_min).powf(1.0 / self.len() as f64)),
            MeshKind::Uniform => None,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn cell(&self, i: usize) -> Cell {
        Cell {
            left: self.edges[i],
            center: self.centers[i],
            right: self.edges[i + 1],
            width: self.widths[i],
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|i| self.cell(i))
    }
}

pub fn build_mesh(z_min: f64, n: f64, cell_count: usize, kind: MeshKind) -> Result<Arc<Mesh>> {
    Mesh::new(z_min, n, cell_count, kind).map(Arc::new)
}

/// Midpoint rule `sum_i values_i * width_i`.
pub fn quad(values: &[f64], mesh: &Mesh) -> Result<f64> {
    if values.len() != mesh.len() {
        return Err(Error::LengthMismatch {
            expected: mesh.len(),
            got: values.len(),
        });
    }
    Ok(values.iter().zip(&mesh.widths).map(|(v, w)| v * w).sum())
}

/// Particle-size density sampled at cell centers at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::LengthMismatch {
                expected: mesh.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "density value at cell {i} is not finite"
            )));
        }
        Ok(DensityField { mesh, values, time })
    }

    pub fn zeros(mesh: Arc<Mesh>, time: f64) -> Self {
        let values = vec![0.0; mesh.len()];
        DensityField { mesh, values, time }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(mesh: Arc<Mesh>, time: f64, f: impl Fn(f64) -> f64) -> Self {
        let values = mesh.centers().iter().map(|&z| f(z)).collect();
        DensityField { mesh, values, time }
    }

    pub fn same_mesh(&self, other: &DensityField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    pub fn quad(&self) -> f64 {
        self.values
            .iter()
            .zip(self.mesh.widths())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// Smallest value; the field is admissible when this is `>= -eps`.
    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Point evaluation with zero extension outside `[z_min, n]`, linear
/// interpolation between centers and constant extension in the two
/// boundary half-cells.
pub fn sample(field: &DensityField, z: f64) -> f64 {
    let mesh = &*field.mesh;
    if !(z >= mesh.z_min && z <= mesh.n) {
        return 0.0;
    }
    let centers = mesh.centers();
    let values = &field.values;
    let last = centers.len() - 1;
    if z <= centers[0] {
        return values[0];
    }
    if z >= centers[last] {
        return values[last];
    }
    // first center strictly greater than z; 1 <= hi <= last
    let hi = centers.partition_point(|&c| c <= z);
    let lo = hi - 1;
    if z == centers[lo] {
        return values[lo];
    }
    let t = (z - centers[lo]) / (centers[hi] - centers[lo]);
    values[lo] + t * (values[hi] - values[lo])
}
