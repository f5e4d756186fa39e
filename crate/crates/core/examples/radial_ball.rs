//! Radially increasing solution on the unit ball of ℝ³ with a(x) = |x|², p = 8.
//!
//! The exponent is above the Sobolev exponent 6 of ℝ³, but the reduced
//! problem lives in one radial variable, where every p > 2 is admissible.
//!
//! `cargo run --release --example radial_ball -- [cells] [p] [alpha]`

use monodual::{Grid, GridFunction, Nonlinearity, Problem, RevolutionSpec, SolverConfig};

fn main() -> monodual::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cells: usize = args.first().map_or(512, |s| s.parse().expect("cells"));
    let p: f64 = args.get(1).map_or(8.0, |s| s.parse().expect("p"));
    let alpha: f64 = args.get(2).map_or(2.0, |s| s.parse().expect("alpha"));

    let grid = Grid::new(RevolutionSpec::new(vec![3])?, vec![cells])?;
    let a = GridFunction::from_fn(grid, |t| t[0].powf(alpha));
    let pb = Problem::new(a, Nonlinearity::power(p)?, 0.0)?;
    let cfg = SolverConfig {
        tol_residual: 1e-7,
        ..Default::default()
    };
    let rep = monodual::solver::fixed_point_solve(&pb, &cfg)?;

    println!("{}", rep.message);
    println!("iterations        {}", rep.outer_iterations);
    println!("strong residual   {:.3e}", rep.strong_residual);
    println!("consistency gap   {:.3e}", rep.consistency_gap);
    println!(
        "u(0), u(1)        {:.6} {:.6}",
        rep.u.values()[0],
        rep.u.values()[cells - 1]
    );
    println!("wall time         {:.3} s", rep.wall_time);
    Ok(())
}
