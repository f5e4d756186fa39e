//! The dual energy `I = ψ - φ` with
//!
//! ```text
//! φ(u) = ∫ a F(u) dμ,        ψ(u) = ∫ a F*(A u / a) dμ   (u in the cone)
//! ```
//!
//! and `ψ = +∞` off the cone. At a critical point `u`, the linear solve of
//! `A v = a f(u)` returns `u` itself, so `‖(F*)'(Au/a) - u‖` is a computable
//! optimality residual.

use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::cone::{in_cone, ConeReport};
use crate::convex::Nonlinearity;
use crate::domain::{Grid, GridFunction};
use crate::elliptic::WeightedOperator;
use crate::{Error, Result};

/// A value in `ℝ ∪ {+∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    PlusInfinity,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::PlusInfinity => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            Extended::PlusInfinity => s.serialize_str("+inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemOptions {
    /// Accept `p >= 2*_m` (exploratory runs only).
    pub allow_supercritical: bool,
    /// Cone tolerance for the domain of `ψ`, relative to `max(1, sup |u|)`.
    pub cone_tol: f64,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        ProblemOptions {
            allow_supercritical: false,
            cone_tol: 1e-9,
        }
    }
}

/// `-Δu + u = a f(u)` on a grid, with its operator prebuilt.
#[derive(Debug, Clone)]
pub struct Problem {
    a: GridFunction,
    nl: Nonlinearity,
    op: WeightedOperator,
    opts: ProblemOptions,
}

impl Problem {
    pub fn new(a: GridFunction, nl: Nonlinearity, eps: f64) -> Result<Self> {
        Self::with_options(a, nl, eps, ProblemOptions::default())
    }

    pub fn with_options(
        a: GridFunction,
        nl: Nonlinearity,
        eps: f64,
        opts: ProblemOptions,
    ) -> Result<Self> {
        let grid = a.grid().clone();
        let amin = a.min();
        if !(amin > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "weight must be positive on every cell (min {amin:e})"
            )));
        }
        let rep = in_cone(&a, 1e-12 * a.sup_norm().max(1.0));
        if !rep.member {
            return Err(Error::InvalidProblem(format!(
                "weight must be nondecreasing along every axis (worst slope {:e})",
                rep.worst_slope
            )));
        }
        let crit = grid.spec().critical_exponent();
        if nl.p >= crit && !opts.allow_supercritical {
            return Err(Error::InvalidProblem(format!(
                "growth exponent p = {} is not below 2*_m = {crit}",
                nl.p
            )));
        }
        let op = WeightedOperator::new(grid, eps)?;
        Ok(Problem { a, nl, op, opts })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.a.grid()
    }

    pub fn weight(&self) -> &GridFunction {
        &self.a
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn operator(&self) -> &WeightedOperator {
        &self.op
    }

    pub fn eps(&self) -> f64 {
        self.op.eps()
    }

    pub fn options(&self) -> ProblemOptions {
        self.opts
    }

    pub(crate) fn cone_tol_for(&self, u: &GridFunction) -> f64 {
        self.opts.cone_tol * u.sup_norm().max(1.0)
    }

    fn integrate(&self, values: impl Iterator<Item = f64>) -> f64 {
        let terms: Vec<f64> = values
            .zip(self.op.cell_weights())
            .map(|(v, w)| v * w)
            .collect();
        crate::domain::pairwise_sum(&terms) * self.grid().cell_volume()
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        if **u.grid() == **self.grid() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `φ(u) = ∫ a F(u)`.
    pub fn phi(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        let a = self.a.values();
        Ok(self.integrate(
            u.values()
                .iter()
                .zip(a)
                .map(|(&x, &ak)| ak * self.nl.big_f(x)),
        ))
    }

    /// `∫ a F*(h / a)` for an arbitrary right-hand side `h`.
    pub fn conjugate_integral(&self, h: &GridFunction) -> Result<f64> {
        self.check(h)?;
        let mut vals = Vec::with_capacity(h.values().len());
        for (&x, &ak) in h.values().iter().zip(self.a.values()) {
            vals.push(ak * self.nl.conjugate(x / ak)?);
        }
        Ok(self.integrate(vals.into_iter()))
    }

    /// `ψ(u)`; `+∞` when `u` leaves the cone.
    pub fn psi(&self, u: &GridFunction) -> Result<Extended> {
        self.check(u)?;
        if !in_cone(u, self.cone_tol_for(u)).member {
            return Ok(Extended::PlusInfinity);
        }
        let au = self.op.apply(u)?;
        Ok(Extended::Finite(self.conjugate_integral(&au)?))
    }

    /// Full energy breakdown at `u`.
    pub fn energy(&self, u: &GridFunction) -> Result<EnergyReport> {
        let phi = self.phi(u)?;
        let psi = self.psi(u)?;
        let cone = in_cone(u, self.cone_tol_for(u));
        let (i, consistency_gap) = match psi {
            Extended::Finite(v) => (Extended::Finite(v - phi), Some(self.consistency_gap(u)?)),
            Extended::PlusInfinity => (Extended::PlusInfinity, None),
        };
        Ok(EnergyReport {
            phi,
            psi,
            i,
            consistency_gap,
            cone,
        })
    }

    /// `Dφ(u) = a f(u)`.
    pub fn dphi(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        u.zip_map(&self.a, |x, ak| ak * self.nl.f(x))
    }

    /// `‖(F*)'(Au/a) - u‖ / max(‖u‖, 1)` in the weighted `L²` norm.
    pub fn consistency_gap(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        let au = self.op.apply(u)?;
        let mut diff = Vec::with_capacity(u.values().len());
        for ((&h, &ak), &x) in au.values().iter().zip(self.a.values()).zip(u.values()) {
            diff.push(self.nl.conjugate_derivative(h / ak)? - x);
        }
        let d = GridFunction::from_values_unchecked(self.grid().clone(), diff);
        Ok(self.op.norm(&d)? / self.op.norm(u)?.max(1.0))
    }

    /// `‖A u - a f(u)‖ / max(‖a f(u)‖, 1)` in the weighted `L²` norm.
    pub fn strong_residual(&self, u: &GridFunction) -> Result<f64> {
        let au = self.op.apply(u)?;
        let rhs = self.dphi(u)?;
        let r = au.zip_map(&rhs, |x, y| x - y)?;
        Ok(self.op.norm(&r)? / self.op.norm(&rhs)?.max(1.0))
    }

    /// Classical energy `½⟨Au, u⟩ - φ(u)`; diagnostic only.
    pub fn primal_energy(&self, u: &GridFunction) -> Result<f64> {
        let au = self.op.apply(u)?;
        Ok(0.5 * self.op.inner(&au, u)? - self.phi(u)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub phi: f64,
    pub psi: Extended,
    #[serde(rename = "I")]
    pub i: Extended,
    /// `None` when `ψ` is infinite.
    pub consistency_gap: Option<f64>,
    pub cone: ConeReport,
}
