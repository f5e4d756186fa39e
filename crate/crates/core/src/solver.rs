//! Critical points of the dual energy.
//!
//! [`fixed_point_solve`] is a scaled inverse iteration for power
//! nonlinearities: `û ← P(A⁻¹ a f(û)) / ‖·‖∞`, with the amplitude recovered
//! from the limiting scale factor. [`mountain_pass_solve`] works for any
//! admissible nonlinearity: it starts from the maximizer of `I` along the ray
//! through the constant `sup a + 1`, then descends along the residual
//! `u - A⁻¹ a f(u)`, rescaling every iterate to the maximum of `I` on its ray.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{in_cone, project_cone};
use crate::domain::GridFunction;
use crate::elliptic::CgOptions;
use crate::energy::{Extended, Problem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    FixedPoint,
    MountainPass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub tol_residual: f64,
    /// Stop (unconverged) once successive iterates move less than this in
    /// sup norm while the residual is still above `tol_residual`.
    pub tol_step: f64,
    pub max_outer: usize,
    /// Raised to the operator's rounding floor on fine grids.
    pub linear_tol: f64,
    pub linear_max_iter: Option<usize>,
    pub path_samples: usize,
    pub descent_step: f64,
    /// Zero starts from the exact constant; other values add a small
    /// increasing ramp with a seed-dependent amplitude.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::FixedPoint,
            tol_residual: 1e-8,
            tol_step: 1e-15,
            max_outer: 5000,
            linear_tol: 1e-10,
            linear_max_iter: None,
            path_samples: 64,
            descent_step: 1.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "solver.{name} must be positive, got {v}"
                )))
            }
        };
        pos("tol_residual", self.tol_residual)?;
        pos("tol_step", self.tol_step)?;
        pos("linear_tol", self.linear_tol)?;
        pos("descent_step", self.descent_step)?;
        if self.max_outer == 0 {
            return Err(Error::Config("solver.max_outer must be at least 1".into()));
        }
        if self.path_samples < 2 {
            return Err(Error::Config(
                "solver.path_samples must be at least 2".into(),
            ));
        }
        Ok(())
    }

    fn cg(&self, pb: &Problem) -> CgOptions {
        CgOptions {
            tol: self.linear_tol.max(pb.operator().residual_floor()),
            max_iter: self.linear_max_iter,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub method: Method,
    pub u: GridFunction,
    pub converged: bool,
    pub outer_iterations: usize,
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<Extended>,
    pub cone_violation_history: Vec<f64>,
    /// Limiting scale factor `1/‖A⁻¹ a f(û)‖∞` (fixed-point only).
    pub lambda: Option<f64>,
    /// `I` at the maximizer of the initial path (mountain pass only).
    pub path_max_energy: Option<f64>,
    /// Ray length `T` with `I(T e) ≤ 0` (mountain pass only).
    pub path_scale: Option<f64>,
    pub strong_residual: f64,
    pub consistency_gap: f64,
    pub min_value: f64,
    pub in_cone: bool,
    pub constant: bool,
    pub message: String,
    /// Seconds; left out of serialized output so reruns are byte-identical.
    #[serde(skip)]
    pub wall_time: f64,
}

impl SolveReport {
    /// `iteration,residual` lines for plotting.
    pub fn residual_history_csv(&self) -> String {
        let mut s = String::from("iteration,residual\n");
        for (i, r) in self.residual_history.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, r));
        }
        s
    }

    /// `iteration,energy` lines; infinite values are written as `inf`.
    pub fn energy_history_csv(&self) -> String {
        let mut s = String::from("iteration,energy\n");
        for (i, e) in self.energy_history.iter().enumerate() {
            match e {
                Extended::Finite(v) => s.push_str(&format!("{i},{v}\n")),
                Extended::PlusInfinity => s.push_str(&format!("{i},inf\n")),
            }
        }
        s
    }
}

pub fn strong_residual(pb: &Problem, u: &GridFunction) -> Result<f64> {
    pb.strong_residual(u)
}

/// Dispatches on `cfg.method`.
pub fn solve(pb: &Problem, cfg: &SolverConfig) -> Result<SolveReport> {
    match cfg.method {
        Method::FixedPoint => fixed_point_solve(pb, cfg),
        Method::MountainPass => mountain_pass_solve(pb, cfg),
    }
}

fn initial_guess(pb: &Problem, seed: u64) -> GridFunction {
    let amp = if seed == 0 {
        0.0
    } else {
        1e-3 * ChaCha8Rng::seed_from_u64(seed).random::<f64>()
    };
    let m = pb.grid().dim() as f64;
    GridFunction::from_fn(pb.grid().clone(), |t| 1.0 + amp * t.iter().sum::<f64>() / m)
}

struct Outcome {
    u: GridFunction,
    iterations: usize,
    reached_tol: bool,
    message: String,
}

/// Applies the accepted-solution contract and assembles the report.
fn finish(
    pb: &Problem,
    cfg: &SolverConfig,
    out: Outcome,
    hist: History,
    extra: (Option<f64>, Option<f64>, Option<f64>),
    start: Instant,
) -> Result<SolveReport> {
    let u = out.u;
    let residual = pb.strong_residual(&u)?;
    let cone = in_cone(&u, pb.cone_tol_for(&u));
    let gap = if cone.member {
        pb.consistency_gap(&u)?
    } else {
        f64::INFINITY
    };
    let min_value = u.min();
    let mut message = out.message;
    let mut converged = out.reached_tol;
    if converged {
        let mut broken = Vec::new();
        if !(residual <= cfg.tol_residual) {
            broken.push(format!("strong residual {residual:e}"));
        }
        if !(gap <= 10.0 * cfg.tol_residual) {
            broken.push(format!("consistency gap {gap:e}"));
        }
        if !cone.member {
            broken.push(format!("cone violation {:e}", cone.violation()));
        }
        if !(min_value > 0.0) {
            broken.push(format!("min value {min_value:e} not positive"));
        }
        if !broken.is_empty() {
            converged = false;
            message = format!("contract failed: {}", broken.join(", "));
        }
    }
    let (lo, hi) = (u.min(), u.max());
    let constant = hi > 0.0 && hi - lo <= 1e-9 * hi;
    Ok(SolveReport {
        method: cfg.method,
        u,
        converged,
        outer_iterations: out.iterations,
        residual_history: hist.residual,
        energy_history: hist.energy,
        cone_violation_history: hist.cone_violation,
        lambda: extra.0,
        path_max_energy: extra.1,
        path_scale: extra.2,
        strong_residual: residual,
        consistency_gap: gap,
        min_value,
        in_cone: cone.member,
        constant,
        message,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Default)]
struct History {
    residual: Vec<f64>,
    energy: Vec<Extended>,
    cone_violation: Vec<f64>,
}

/// Stopping test: the residual and the consistency gap both within contract.
fn meets_tol(pb: &Problem, cfg: &SolverConfig, u: &GridFunction, res: f64) -> Result<bool> {
    Ok(res <= cfg.tol_residual && pb.consistency_gap(u)? <= 10.0 * cfg.tol_residual)
}

fn energy_value(pb: &Problem, u: &GridFunction) -> Result<Extended> {
    let psi = pb.psi(u)?;
    let phi = pb.phi(u)?;
    Ok(match psi {
        Extended::Finite(v) => Extended::Finite(v - phi),
        Extended::PlusInfinity => Extended::PlusInfinity,
    })
}

/// Scaled inverse iteration; requires a power nonlinearity.
pub fn fixed_point_solve(pb: &Problem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if !pb.nonlinearity().is_power() {
        return Err(Error::InvalidProblem(
            "fixed-point iteration needs a power nonlinearity; use the mountain-pass method".into(),
        ));
    }
    let start = Instant::now();
    let p = pb.nonlinearity().p;
    let op = pb.operator();
    let cg = cfg.cg(pb);
    let mut hist = History::default();

    let mut uhat = initial_guess(pb, cfg.seed);
    let mut warm: Option<GridFunction> = None;
    let mut lambda = 1.0;
    let mut u = uhat.clone();
    let mut outcome = None;

    for it in 1..=cfg.max_outer {
        let rhs = pb.dphi(&uhat)?;
        let (v, _) = op.solve_from(&rhs, warm.as_ref(), cg)?;
        hist.cone_violation
            .push(in_cone(&v, 0.0).violation() / v.sup_norm().max(f64::MIN_POSITIVE));
        let vp = project_cone(&v)?;
        let s = vp.sup_norm();
        if !(s > 1e-280) || !s.is_finite() {
            return Err(Error::DegenerateIteration(format!(
                "iterate collapsed at step {it} (sup norm {s:e})"
            )));
        }
        lambda = 1.0 / s;
        let next = vp.scaled(lambda);
        let step = next
            .values()
            .iter()
            .zip(uhat.values())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        warm = Some(vp);
        uhat = next;
        u = uhat.scaled(lambda.powf(1.0 / (p - 2.0)));
        let res = pb.strong_residual(&u)?;
        hist.residual.push(res);
        hist.energy.push(energy_value(pb, &u)?);
        if meets_tol(pb, cfg, &u, res)? {
            outcome = Some(Outcome {
                u: u.clone(),
                iterations: it,
                reached_tol: true,
                message: format!("converged after {it} iterations"),
            });
            break;
        }
        if step <= cfg.tol_step {
            outcome = Some(Outcome {
                u: u.clone(),
                iterations: it,
                reached_tol: false,
                message: format!("stagnated at residual {res:e} after {it} iterations"),
            });
            break;
        }
    }
    let out = outcome.unwrap_or_else(|| Outcome {
        u,
        iterations: cfg.max_outer,
        reached_tol: false,
        message: format!("no convergence within {} iterations", cfg.max_outer),
    });
    finish(pb, cfg, out, hist, (Some(lambda), None, None), start)
}

/// `τ ↦ I(τ u)` for a fixed cone element.
struct Ray<'a> {
    pb: &'a Problem,
    u: GridFunction,
    au: GridFunction,
    /// Largest τ for which `F*` is defined on `τ A u / a`.
    tau_cap: f64,
}

impl<'a> Ray<'a> {
    fn new(pb: &'a Problem, u: GridFunction) -> Result<Self> {
        let au = pb.operator().apply(&u)?;
        let range = pb.nonlinearity().conjugate_range();
        let peak = au
            .values()
            .iter()
            .zip(pb.weight().values())
            .fold(0.0f64, |acc, (h, a)| acc.max((h / a).abs()));
        let tau_cap = if range.is_finite() && peak > 0.0 {
            range / peak
        } else {
            f64::INFINITY
        };
        Ok(Ray { pb, u, au, tau_cap })
    }

    fn energy(&self, tau: f64) -> Result<f64> {
        let psi = self.pb.conjugate_integral(&self.au.scaled(tau))?;
        Ok(psi - self.pb.phi(&self.u.scaled(tau))?)
    }

    /// Maximizer of `I(τ u)` over `τ > 0` and its value.
    fn maximize(&self) -> Result<(f64, f64)> {
        let nl = self.pb.nonlinearity();
        if nl.is_power() {
            let psi = self.energy_parts(1.0)?;
            let (q, p) = (nl.q(), nl.p);
            if psi.1 <= 0.0 {
                return Err(Error::DegenerateIteration("φ vanishes on the ray".into()));
            }
            let tau = (q * psi.0 / (p * psi.1)).powf(1.0 / (p - q));
            return Ok((tau, self.energy(tau)?));
        }
        // Bracket by doubling, then golden-section search.
        let mut hi = 1.0f64.min(self.tau_cap);
        let mut best = (hi, self.energy(hi)?);
        let mut lo = 0.0;
        for _ in 0..80 {
            let next = (2.0 * hi).min(self.tau_cap);
            if next <= hi {
                break;
            }
            let e = self.energy(next)?;
            if e < best.1 {
                hi = next;
                break;
            }
            lo = best.0 / 2.0;
            best = (next, e);
            hi = next;
        }
        if best.0 == hi && hi < self.tau_cap {
            hi *= 2.0;
        }
        let (mut a, mut b) = (lo, hi.min(self.tau_cap));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (self.energy(c)?, self.energy(d)?);
        for _ in 0..200 {
            if (b - a) <= 1e-14 * b {
                break;
            }
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.energy(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.energy(d)?;
            }
        }
        let tau = 0.5 * (a + b);
        Ok((tau, self.energy(tau)?))
    }

    fn energy_parts(&self, tau: f64) -> Result<(f64, f64)> {
        Ok((
            self.pb.conjugate_integral(&self.au.scaled(tau))?,
            self.pb.phi(&self.u.scaled(tau))?,
        ))
    }
}

/// Residual descent from the mountain-pass path maximizer.
pub fn mountain_pass_solve(pb: &Problem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = pb.grid().clone();
    let op = pb.operator();
    let cg = cfg.cg(pb);
    let mut hist = History::default();

    // Path endpoint: the smallest power-of-two multiple of e with I ≤ 0.
    let e = GridFunction::constant(grid.clone(), pb.weight().max() + 1.0);
    let ray = Ray::new(pb, e.clone())?;
    let mut scale = 1.0;
    let mut found = false;
    for _ in 0..=40 {
        if scale > ray.tau_cap {
            break;
        }
        if ray.energy(scale)? <= 0.0 {
            found = true;
            break;
        }
        scale *= 2.0;
    }
    if !found {
        return Err(Error::MountainPassSetup(format!(
            "I(T e) stayed positive up to T = {scale}"
        )));
    }
    let mut best = (0.0, 0.0);
    for j in 1..cfg.path_samples {
        let tau = scale * j as f64 / cfg.path_samples as f64;
        let val = ray.energy(tau)?;
        if val > best.1 {
            best = (tau, val);
        }
    }
    // The path is a ray, so its maximizer is the ray maximizer.
    let (tau0, path_max) = ray.maximize()?;
    let path_max = path_max.max(best.1);
    let mut u = e.scaled(if tau0 <= scale { tau0 } else { best.0 });
    let mut energy = energy_value(pb, &u)?.finite().unwrap_or(path_max);
    hist.energy.push(Extended::Finite(energy));

    let mut warm: Option<GridFunction> = None;
    let mut outcome = None;
    for it in 1..=cfg.max_outer {
        let rhs = pb.dphi(&u)?;
        let (v, _) = op.solve_from(&rhs, warm.as_ref(), cg)?;
        let res = pb.strong_residual(&u)?;
        hist.residual.push(res);
        if meets_tol(pb, cfg, &u, res)? {
            outcome = Some(Outcome {
                u: u.clone(),
                iterations: it - 1,
                reached_tol: true,
                message: format!("converged after {} descent steps", it - 1),
            });
            break;
        }
        let r = u.zip_map(&v, |x, y| x - y)?;
        warm = Some(v);
        let slack = 1e-12 * energy.abs().max(1e-300);
        let mut step = cfg.descent_step;
        let mut accepted = None;
        while step >= 1e-12 {
            let trial = u.zip_map(&r, |x, d| x - step * d)?;
            let proj = project_cone(&trial)?;
            if proj.sup_norm() > 0.0 {
                let (tau, val) = Ray::new(pb, proj.clone())?.maximize()?;
                if val.is_finite() && val <= energy + slack {
                    let cand = proj.scaled(tau);
                    let viol = in_cone(&trial, 0.0).violation() / trial.sup_norm().max(1e-300);
                    accepted = Some((cand, val, viol));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, val, viol)) = accepted else {
            outcome = Some(Outcome {
                u: u.clone(),
                iterations: it - 1,
                reached_tol: false,
                message: format!("descent stagnated at residual {res:e}"),
            });
            break;
        };
        let moved = cand
            .values()
            .iter()
            .zip(u.values())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        hist.cone_violation.push(viol);
        hist.energy.push(Extended::Finite(val));
        energy = val;
        u = cand;
        if moved <= cfg.tol_step * u.sup_norm().max(1.0) {
            let res = pb.strong_residual(&u)?;
            hist.residual.push(res);
            outcome = Some(Outcome {
                u: u.clone(),
                iterations: it,
                reached_tol: meets_tol(pb, cfg, &u, res)?,
                message: format!("step below tolerance at residual {res:e}"),
            });
            break;
        }
    }
    let out = outcome.unwrap_or_else(|| Outcome {
        u,
        iterations: cfg.max_outer,
        reached_tol: false,
        message: format!("no convergence within {} descent steps", cfg.max_outer),
    });
    finish(
        pb,
        cfg,
        out,
        hist,
        (None, Some(path_max), Some(scale)),
        start,
    )
}
