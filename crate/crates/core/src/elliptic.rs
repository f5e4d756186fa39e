//! The weighted Neumann operator
//!
//! ```text
//! A g = -Δ_t g - Σ_k (n_k - 1)/(t_k + eps) ∂_k g + g
//! ```
//!
//! in divergence form, `A g = g - w⁻¹ Σ_k ∂_k (w ∂_k g)` with
//! `w = ∏ (t_k + eps)^{n_k - 1}`, discretized by cell-centered finite volumes.
//! Face fluxes through the boundary of the cube vanish (homogeneous Neumann),
//! which also removes the coordinate singularity at `t_k = 0`. The stencil is
//! exactly self-adjoint in the discrete inner product `Σ w u v ∏h`, so
//! unpreconditioned conjugate gradients in that inner product applies.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{Grid, GridFunction};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct WeightedOperator {
    grid: Arc<Grid>,
    eps: f64,
    cell_w: Vec<f64>,
    inv_cell_w: Vec<f64>,
    /// Per axis: face weight on the `+` face of each cell divided by `h_k²`.
    face_w: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgOptions {
    /// Target for `‖A v - h‖ / ‖h‖` in the weighted norm.
    pub tol: f64,
    /// `None` selects `50 · (cells)^{1/m}`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearResidual {
    pub absolute: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

impl WeightedOperator {
    pub fn new(grid: Arc<Grid>, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eps must be >= 0, got {eps}"
            )));
        }
        let cell_w = grid.cell_weights(eps);
        let inv_cell_w = cell_w.iter().map(|w| 1.0 / w).collect();
        let face_w = (0..grid.dim())
            .map(|k| {
                let inv_h2 = (grid.cells()[k] as f64).powi(2);
                grid.face_weights(k, eps)
                    .into_iter()
                    .map(|w| w * inv_h2)
                    .collect()
            })
            .collect();
        Ok(WeightedOperator {
            grid,
            eps,
            cell_w,
            inv_cell_w,
            face_w,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_w
    }

    fn check(&self, g: &GridFunction) -> Result<()> {
        if g.grid() == &self.grid || **g.grid() == *self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn apply(&self, g: &GridFunction) -> Result<GridFunction> {
        self.check(g)?;
        let mut out = vec![0.0; g.values().len()];
        self.apply_into(g.values(), &mut out);
        Ok(GridFunction::from_values_unchecked(self.grid.clone(), out))
    }

    fn apply_into(&self, g: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, fw) in self.face_w.iter().enumerate() {
            let st = self.grid.stride(k);
            for c in 0..g.len() {
                let w = fw[c];
                if w > 0.0 {
                    let flux = w * (g[c + st] - g[c]);
                    out[c] += flux;
                    out[c + st] -= flux;
                }
            }
        }
        for c in 0..g.len() {
            out[c] = g[c] - out[c] * self.inv_cell_w[c];
        }
    }

    fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((a, b), w) in u.iter().zip(v).zip(&self.cell_w) {
            acc += w * a * b;
        }
        acc * self.grid.cell_volume()
    }

    /// Weighted inner product `Σ w u v ∏h`.
    pub fn inner(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let terms: Vec<f64> = u
            .values()
            .iter()
            .zip(v.values())
            .zip(&self.cell_w)
            .map(|((a, b), w)| w * a * b)
            .collect();
        Ok(crate::domain::pairwise_sum(&terms) * self.grid.cell_volume())
    }

    pub fn norm(&self, u: &GridFunction) -> Result<f64> {
        Ok(self.inner(u, u)?.sqrt())
    }

    /// Rough relative-residual floor that CG can reach in double precision,
    /// `2ε (1 + Σ h_k⁻²)`, about half of `ε` times the stencil norm.
    pub fn residual_floor(&self) -> f64 {
        let stiff: f64 = (0..self.grid.dim())
            .map(|k| self.grid.spacing(k).powi(-2))
            .sum();
        2.0 * f64::EPSILON * (1.0 + stiff)
    }

    pub fn default_max_iter(&self) -> usize {
        let m = self.grid.dim() as f64;
        (50.0 * (self.grid.len() as f64).powf(1.0 / m)).ceil() as usize
    }

    /// Solves `A v = h` by conjugate gradients from a zero initial guess.
    pub fn solve(&self, h: &GridFunction, opts: CgOptions) -> Result<GridFunction> {
        self.solve_from(h, None, opts).map(|(v, _)| v)
    }

    /// CG from an optional warm start; fails loudly when `max_iter` runs out.
    ///
    /// Convergence is judged on the recursively updated residual and then
    /// confirmed against the true residual; a few restarts absorb drift.
    pub fn solve_from(
        &self,
        h: &GridFunction,
        guess: Option<&GridFunction>,
        opts: CgOptions,
    ) -> Result<(GridFunction, CgStats)> {
        const RESTARTS: usize = 3;
        self.check(h)?;
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidArgument(
                "CG tolerance must be positive".into(),
            ));
        }
        let n = h.values().len();
        let max_iter = opts.max_iter.unwrap_or_else(|| self.default_max_iter());
        let b = h.values();
        let b_norm = self.dot(b, b).sqrt();
        if b_norm == 0.0 {
            return Ok((
                GridFunction::zeros(self.grid.clone()),
                CgStats {
                    iterations: 0,
                    relative_residual: 0.0,
                },
            ));
        }
        let mut x = match guess {
            Some(g) => {
                self.check(g)?;
                g.values().to_vec()
            }
            None => vec![0.0; n],
        };
        let mut ap = vec![0.0; n];
        let mut r = vec![0.0; n];
        let target = opts.tol * b_norm;
        let mut iterations = 0;
        let mut relative = f64::INFINITY;

        for _ in 0..=RESTARTS {
            self.apply_into(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            let mut rr = self.dot(&r, &r);
            relative = rr.sqrt() / b_norm;
            if rr.sqrt() <= target {
                return Ok((
                    GridFunction::from_values_unchecked(self.grid.clone(), x),
                    CgStats {
                        iterations,
                        relative_residual: relative,
                    },
                ));
            }
            let mut p = r.clone();
            while rr.sqrt() > target && iterations < max_iter {
                self.apply_into(&p, &mut ap);
                let pap = self.dot(&p, &ap);
                if !(pap > 0.0) {
                    break;
                }
                let alpha = rr / pap;
                for i in 0..n {
                    x[i] += alpha * p[i];
                    r[i] -= alpha * ap[i];
                }
                let rr_new = self.dot(&r, &r);
                let beta = rr_new / rr;
                for i in 0..n {
                    p[i] = r[i] + beta * p[i];
                }
                rr = rr_new;
                iterations += 1;
            }
            if iterations >= max_iter {
                break;
            }
        }
        Err(Error::LinearSolveDidNotConverge {
            iterations,
            residual: relative,
        })
    }

    /// `‖A v - h‖` in the weighted norm, absolute and relative to `‖h‖`.
    pub fn residual(&self, v: &GridFunction, h: &GridFunction) -> Result<LinearResidual> {
        self.check(h)?;
        let av = self.apply(v)?;
        let r = av.zip_map(h, |a, b| a - b)?;
        let absolute = self.norm(&r)?;
        let hn = self.norm(h)?;
        Ok(LinearResidual {
            absolute,
            relative: if hn > 0.0 { absolute / hn } else { absolute },
        })
    }

    /// Largest `(forward difference / h_k) / (t_k + eps)` over faces and axes,
    /// with `t_k` at the face. Used as a soft diagnostic of gradient growth.
    pub fn gradient_ratio(&self, v: &GridFunction) -> Result<f64> {
        self.check(v)?;
        let mut worst = 0.0f64;
        let vals = v.values();
        for k in 0..self.grid.dim() {
            let st = self.grid.stride(k);
            let s = self.grid.cells()[k];
            for c in 0..vals.len() {
                let i = self.grid.axis_index(c, k);
                if i + 1 < s {
                    let t_face = (i + 1) as f64 / s as f64;
                    let slope = (vals[c + st] - vals[c]) * s as f64;
                    worst = worst.max(slope / (t_face + self.eps));
                }
            }
        }
        Ok(worst)
    }
}
