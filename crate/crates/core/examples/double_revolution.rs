//! Solution on a domain of double revolution in ℝ⁴ = ℝ² × ℝ² with
//! a = (1 + t₁²)(1 + t₂²) and p = 5 (above the Sobolev exponent 4 of ℝ⁴).
//! The solution is nondecreasing in each block radius.
//!
//! `cargo run --release --example double_revolution -- [cells_per_axis]`

use monodual::{in_cone, Grid, GridFunction, Nonlinearity, Problem, RevolutionSpec, SolverConfig};

fn main() -> monodual::Result<()> {
    let s: usize = std::env::args()
        .nth(1)
        .map_or(64, |v| v.parse().expect("cells"));
    let grid = Grid::new(RevolutionSpec::new(vec![2, 2])?, vec![s, s])?;
    let a = GridFunction::from_fn(grid, |t| (1.0 + t[0] * t[0]) * (1.0 + t[1] * t[1]));
    let pb = Problem::new(a, Nonlinearity::power(5.0)?, 0.0)?;
    let rep = monodual::solver::fixed_point_solve(&pb, &SolverConfig::default())?;

    let cone = in_cone(&rep.u, 1e-8);
    println!("{}", rep.message);
    println!("iterations        {}", rep.outer_iterations);
    println!("strong residual   {:.3e}", rep.strong_residual);
    println!("consistency gap   {:.3e}", rep.consistency_gap);
    println!(
        "cone (1e-8)       {} (worst slope {:.2e})",
        cone.member, cone.worst_slope
    );
    println!("min / max         {:.6} {:.6}", rep.u.min(), rep.u.max());
    println!("wall time         {:.3} s", rep.wall_time);
    Ok(())
}
