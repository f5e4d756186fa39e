//! The cone of nonnegative grid functions that are nondecreasing along every
//! axis: membership, nearest-point projection and a monotone mollifier.

use serde::Serialize;

use crate::domain::GridFunction;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    pub member: bool,
    /// Smallest value (negative means a nonnegativity violation).
    pub min_value: f64,
    /// Most negative forward difference over all axes (raw per-cell
    /// difference, not divided by the spacing). Zero for a single cell.
    pub worst_slope: f64,
    /// Most negative forward difference per axis.
    pub axis_slopes: Vec<f64>,
    /// Axes whose worst slope is below `-tol`.
    pub violating_axes: Vec<usize>,
    pub tol: f64,
}

impl ConeReport {
    /// Size of the worst violation, `max(0, -min_value, -worst_slope)`.
    pub fn violation(&self) -> f64 {
        0f64.max(-self.min_value).max(-self.worst_slope)
    }
}

pub fn in_cone(g: &GridFunction, tol: f64) -> ConeReport {
    let grid = g.grid();
    let v = g.values();
    let min_value = g.min();
    let mut axis_slopes = vec![0.0f64; grid.dim()];
    for (k, worst) in axis_slopes.iter_mut().enumerate() {
        let st = grid.stride(k);
        let s = grid.cells()[k];
        for c in 0..v.len() {
            if grid.axis_index(c, k) + 1 < s {
                *worst = worst.min(v[c + st] - v[c]);
            }
        }
    }
    let worst_slope = axis_slopes.iter().copied().fold(0.0, f64::min);
    let violating_axes = axis_slopes
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < -tol)
        .map(|(k, _)| k)
        .collect();
    ConeReport {
        member: min_value >= -tol && worst_slope >= -tol,
        min_value,
        worst_slope,
        axis_slopes,
        violating_axes,
        tol,
    }
}

/// Tolerances for the Dykstra cycle in [`project_cone`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    pub max_cycles: usize,
    /// Relative to `max(1, sup |g|)`.
    pub tol: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            max_cycles: 10_000,
            tol: 1e-10,
        }
    }
}

/// Nearest cone element in the unweighted grid `ℓ²` metric.
pub fn project_cone(g: &GridFunction) -> Result<GridFunction> {
    project_cone_with(g, ProjectionOptions::default())
}

/// Dykstra's alternating projections over the sets "nondecreasing along
/// axis k" (exact per line by pool-adjacent-violators) and "nonnegative",
/// in that order, followed by a final clamp at zero.
pub fn project_cone_with(g: &GridFunction, opts: ProjectionOptions) -> Result<GridFunction> {
    let grid = g.grid().clone();
    let m = grid.dim();
    let n = grid.len();
    let scale = g.sup_norm().max(1.0);
    let tol = opts.tol * scale;

    let mut x = g.values().to_vec();
    if in_cone(g, 0.0).member {
        return Ok(g.clone());
    }
    // One correction vector per constraint set: m monotone sets + nonnegativity.
    let mut corrections = vec![vec![0.0; n]; m + 1];
    let mut y = vec![0.0; n];
    let mut line = Vec::new();
    let mut gap = f64::INFINITY;

    for _cycle in 0..opts.max_cycles {
        let start = x.clone();
        for (set, corr) in corrections.iter_mut().enumerate() {
            for i in 0..n {
                y[i] = x[i] + corr[i];
            }
            if set < m {
                project_axis_monotone(&grid, set, &y, &mut x, &mut line);
            } else {
                for i in 0..n {
                    x[i] = y[i].max(0.0);
                }
            }
            for i in 0..n {
                corr[i] = y[i] - x[i];
            }
        }
        let change = x
            .iter()
            .zip(&start)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        let current = GridFunction::from_values_unchecked(grid.clone(), x.clone());
        gap = in_cone(&current, 0.0).violation();
        if change <= tol && gap <= tol {
            let mut out = current;
            for v in out.values_mut() {
                *v = v.max(0.0);
            }
            return Ok(out);
        }
    }
    Err(Error::ProjectionDidNotConverge {
        cycles: opts.max_cycles,
        gap,
    })
}

/// Isotonic regression along every grid line of `axis`, `src` into `dst`.
fn project_axis_monotone(
    grid: &crate::domain::Grid,
    axis: usize,
    src: &[f64],
    dst: &mut [f64],
    line: &mut Vec<f64>,
) {
    let st = grid.stride(axis);
    let s = grid.cells()[axis];
    for start in 0..grid.len() {
        if grid.axis_index(start, axis) != 0 {
            continue;
        }
        line.clear();
        line.extend((0..s).map(|i| src[start + i * st]));
        pava(line);
        for (i, &v) in line.iter().enumerate() {
            dst[start + i * st] = v;
        }
    }
}

/// In-place least-squares projection onto nondecreasing sequences
/// (pool-adjacent-violators, unit weights).
pub fn pava(y: &mut [f64]) {
    // Blocks as (sum, count); merged while the last two violate order.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y.iter() {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 > s1 / c1 as f64 {
                blocks.pop();
                let last = blocks.last_mut().unwrap();
                *last = (s0 + s1, c0 + c1);
            } else {
                break;
            }
        }
    }
    let mut i = 0;
    for (sum, count) in blocks {
        let mean = sum / count as f64;
        for v in &mut y[i..i + count] {
            *v = mean;
        }
        i += count;
    }
}

/// Backward box average over the index window `{i - window, …, i}` on every
/// axis, with `g` extended by zero below index 0. The output stays in the
/// cone and lies pointwise below `g`.
pub fn mollify(g: &GridFunction, window: usize) -> Result<GridFunction> {
    let rep = in_cone(g, 0.0);
    if !rep.member {
        return Err(Error::NotInCone {
            min_value: rep.min_value,
            worst_slope: rep.worst_slope,
        });
    }
    if window == 0 {
        return Ok(g.clone());
    }
    let grid = g.grid().clone();
    let mut cur = g.values().to_vec();
    let mut prefix = Vec::new();
    let norm = 1.0 / (window + 1) as f64;
    for axis in 0..grid.dim() {
        let st = grid.stride(axis);
        let s = grid.cells()[axis];
        let src = cur.clone();
        for start in 0..grid.len() {
            if grid.axis_index(start, axis) != 0 {
                continue;
            }
            prefix.clear();
            prefix.push(0.0);
            for i in 0..s {
                let last = *prefix.last().unwrap();
                prefix.push(last + src[start + i * st]);
            }
            for i in 0..s {
                let lo = i.saturating_sub(window);
                cur[start + i * st] = (prefix[i + 1] - prefix[lo]) * norm;
            }
        }
    }
    // Rounding in the prefix sums can leave tiny overshoots above `g`.
    for (o, &x) in cur.iter_mut().zip(g.values()) {
        *o = o.min(x).max(0.0);
    }
    Ok(GridFunction::from_values_unchecked(grid, cur))
}
