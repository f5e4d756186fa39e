//! Reduced-coordinate geometry: revolution specs, cell-centered grids on the
//! unit cube, midpoint quadrature against `∏ (t_k + eps)^{n_k-1} dt_k` and the
//! weighted norms built on it.
//!
//! The normalization constant relating the reduced integral to the integral
//! over the full domain is dropped throughout, so norms are "per unit
//! constant".

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::{Error, Result};

/// Block sizes `(n_1, …, n_m)` of `ℝ^N = ℝ^{n_1} × … × ℝ^{n_m}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RevolutionSpec {
    n: Vec<usize>,
}

impl RevolutionSpec {
    pub fn new(n: Vec<usize>) -> Result<Self> {
        if n.is_empty() {
            return Err(Error::InvalidSpec(
                "need at least one revolution factor".into(),
            ));
        }
        if n.contains(&0) {
            return Err(Error::InvalidSpec(format!(
                "block sizes must be >= 1, got {n:?}"
            )));
        }
        Ok(RevolutionSpec { n })
    }

    pub fn blocks(&self) -> &[usize] {
        &self.n
    }

    /// Number of revolution factors `m`.
    pub fn m(&self) -> usize {
        self.n.len()
    }

    /// Ambient dimension `N = Σ n_k`.
    pub fn ambient_dim(&self) -> usize {
        self.n.iter().sum()
    }

    /// `2m/(m-2)` for `m >= 3`, infinite otherwise.
    pub fn critical_exponent(&self) -> f64 {
        let m = self.m() as f64;
        if self.m() <= 2 {
            f64::INFINITY
        } else {
            2.0 * m / (m - 2.0)
        }
    }

    /// The classical Sobolev exponent `2N/(N-2)` of the ambient space.
    pub fn ambient_critical_exponent(&self) -> f64 {
        let n = self.ambient_dim() as f64;
        if self.ambient_dim() <= 2 {
            f64::INFINITY
        } else {
            2.0 * n / (n - 2.0)
        }
    }
}

/// Which measure a norm integrates against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// `∏ (t_k + eps)^{n_k - 1} dt`.
    Weighted,
    /// Plain Lebesgue measure on the cube.
    Lebesgue,
}

/// Cell-centered tensor grid on `(0,1)^m`; centers sit at `(i + 1/2)/s_k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Grid {
    spec: RevolutionSpec,
    cells: Vec<usize>,
    #[serde(skip)]
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(spec: RevolutionSpec, cells: Vec<usize>) -> Result<Arc<Self>> {
        if cells.len() != spec.m() {
            return Err(Error::InvalidGrid(format!(
                "{} cell counts given for {} axes",
                cells.len(),
                spec.m()
            )));
        }
        if cells.contains(&0) {
            return Err(Error::InvalidGrid(
                "every axis needs at least one cell".into(),
            ));
        }
        let mut strides = vec![1; cells.len()];
        for k in (0..cells.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * cells[k + 1];
        }
        Ok(Arc::new(Grid {
            spec,
            cells,
            strides,
        }))
    }

    /// Same number of cells on every axis.
    pub fn uniform(spec: RevolutionSpec, per_axis: usize) -> Result<Arc<Self>> {
        let m = spec.m();
        Grid::new(spec, vec![per_axis; m])
    }

    pub fn spec(&self) -> &RevolutionSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.cells[axis] as f64
    }

    /// Volume of one cell, `∏ h_k`.
    pub fn cell_volume(&self) -> f64 {
        self.cells.iter().map(|&s| 1.0 / s as f64).product()
    }

    pub fn center(&self, axis: usize, i: usize) -> f64 {
        (i as f64 + 0.5) / self.cells[axis] as f64
    }

    /// Index of flat cell `flat` along `axis`.
    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.cells[axis]
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        (0..self.dim()).map(|k| self.axis_index(flat, k)).collect()
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coordinates(&self, flat: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.center(k, self.axis_index(flat, k)))
            .collect()
    }

    fn axis_factor(&self, axis: usize, t: f64, eps: f64) -> f64 {
        (t + eps).powi(self.spec.n[axis] as i32 - 1)
    }

    /// Weight `∏ (t_k + eps)^{n_k-1}` at the center of `index`.
    pub fn cell_weight(&self, index: &[usize], eps: f64) -> f64 {
        index
            .iter()
            .enumerate()
            .map(|(k, &i)| self.axis_factor(k, self.center(k, i), eps))
            .product()
    }

    /// Center weights of all cells, in flat order.
    pub fn cell_weights(&self, eps: f64) -> Vec<f64> {
        let factors: Vec<Vec<f64>> = (0..self.dim())
            .map(|k| {
                (0..self.cells[k])
                    .map(|i| self.axis_factor(k, self.center(k, i), eps))
                    .collect()
            })
            .collect();
        (0..self.len())
            .map(|c| {
                (0..self.dim())
                    .map(|k| factors[k][self.axis_index(c, k)])
                    .product()
            })
            .collect()
    }

    /// Weight on the face between cell `c` and its successor along `axis`,
    /// with the axis coordinate at the face and the others at cell centers.
    /// Entries for cells on the top boundary are zero (no neighbor).
    pub fn face_weights(&self, axis: usize, eps: f64) -> Vec<f64> {
        let centers = self.cell_weights(eps);
        let s = self.cells[axis];
        (0..self.len())
            .map(|c| {
                let i = self.axis_index(c, axis);
                if i + 1 >= s {
                    return 0.0;
                }
                let t_face = (i + 1) as f64 / s as f64;
                let own = self.axis_factor(axis, self.center(axis, i), eps);
                centers[c] / own * self.axis_factor(axis, t_face, eps)
            })
            .collect()
    }

    fn check(&self, g: &GridFunction) -> Result<()> {
        if g.grid.as_ref() == self {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Midpoint rule `Σ g(i) w(i) ∏ h_k`.
    pub fn integrate(&self, g: &GridFunction, eps: f64) -> Result<f64> {
        self.check(g)?;
        let w = self.cell_weights(eps);
        let terms: Vec<f64> = g.values.iter().zip(&w).map(|(v, w)| v * w).collect();
        Ok(pairwise_sum(&terms) * self.cell_volume())
    }

    /// Discrete `Y_m` norm: weighted face differences plus weighted mass.
    pub fn norm_ym(&self, g: &GridFunction, eps: f64) -> Result<f64> {
        self.check(g)?;
        let w = self.cell_weights(eps);
        let mut terms: Vec<f64> = g.values.iter().zip(&w).map(|(v, w)| w * v * v).collect();
        for k in 0..self.dim() {
            let fw = self.face_weights(k, eps);
            let st = self.strides[k];
            let inv_h2 = (self.cells[k] as f64).powi(2);
            for c in 0..self.len() {
                if fw[c] > 0.0 {
                    let d = g.values[c + st] - g.values[c];
                    terms.push(fw[c] * d * d * inv_h2);
                }
            }
        }
        Ok((pairwise_sum(&terms) * self.cell_volume()).sqrt())
    }

    pub fn norm_lq(&self, g: &GridFunction, q: f64, eps: f64, measure: Measure) -> Result<f64> {
        self.check(g)?;
        if !(q >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "norm exponent must be >= 1, got {q}"
            )));
        }
        let terms: Vec<f64> = match measure {
            Measure::Weighted => {
                let w = self.cell_weights(eps);
                g.values
                    .iter()
                    .zip(&w)
                    .map(|(v, w)| w * v.abs().powf(q))
                    .collect()
            }
            Measure::Lebesgue => g.values.iter().map(|v| v.abs().powf(q)).collect(),
        };
        Ok((pairwise_sum(&terms) * self.cell_volume()).powf(1.0 / q))
    }
}

/// Pairwise summation; deterministic and `O(log n)` error growth.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Real values on the cells of a grid, flat in row-major order
/// (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(
                "grid function values must be finite".into(),
            ));
        }
        Ok(GridFunction { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridFunction { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        GridFunction {
            grid,
            values: vec![c; n],
        }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|c| f(&grid.coordinates(c))).collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.grid.flat_index(index)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination; the grids must match.
    pub fn zip_map(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with columns `t_1..t_m,value`, one row per cell in flat order.
    pub fn to_csv(&self) -> String {
        let m = self.grid.dim();
        let mut out = String::new();
        for k in 0..m {
            let _ = write!(out, "t_{},", k + 1);
        }
        out.push_str("value\n");
        for (c, v) in self.values.iter().enumerate() {
            for t in self.grid.coordinates(c) {
                let _ = write!(out, "{t},");
            }
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Reads the CSV layout of [`GridFunction::to_csv`] onto `grid`; the
    /// coordinate columns must match the grid's cell centers.
    pub fn read_csv(grid: Arc<Grid>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(grid, &text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse_csv(grid: Arc<Grid>, text: &str) -> std::result::Result<Self, String> {
        let m = grid.dim();
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty file")?;
        if header.split(',').count() != m + 1 {
            return Err(format!("header has wrong column count, expected {}", m + 1));
        }
        let mut values = Vec::with_capacity(grid.len());
        for (row, line) in lines.enumerate() {
            if row >= grid.len() {
                return Err(format!("more than {} data rows", grid.len()));
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("row {}: {e}", row + 1))?;
            if fields.len() != m + 1 {
                return Err(format!("row {}: expected {} columns", row + 1, m + 1));
            }
            let coords = grid.coordinates(row);
            if coords
                .iter()
                .zip(&fields)
                .any(|(a, b)| (a - b).abs() > 1e-9)
            {
                return Err(format!(
                    "row {}: coordinates do not match the grid",
                    row + 1
                ));
            }
            values.push(fields[m]);
        }
        if values.len() != grid.len() {
            return Err(format!(
                "expected {} data rows, found {}",
                grid.len(),
                values.len()
            ));
        }
        GridFunction::new(grid, values).map_err(|e| e.to_string())
    }

    /// Two-column `(coordinate, value)` slice along `axis` through the cell
    /// `anchor` (the anchor's own axis entry is ignored).
    pub fn line_slice_csv(&self, axis: usize, anchor: &[usize]) -> String {
        let mut idx = anchor.to_vec();
        let mut out = format!("t_{},value\n", axis + 1);
        for i in 0..self.grid.cells()[axis] {
            idx[axis] = i;
            let _ = writeln!(out, "{},{}", self.grid.center(axis, i), self.get(&idx));
        }
        out
    }
}

impl Serialize for GridFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("GridFunction", 3)?;
        st.serialize_field("blocks", self.grid.spec().blocks())?;
        st.serialize_field("cells", self.grid.cells())?;
        st.serialize_field("values", &self.values)?;
        st.end()
    }
}
