//! Mountain-pass descent against the scaled inverse iteration on the radial
//! ball problem (n = 3, a = t², p = 8).
//!
//! `cargo run --release --example mountain_pass -- [cells]`

use monodual::solver::{fixed_point_solve, mountain_pass_solve};
use monodual::{Grid, GridFunction, Method, Nonlinearity, Problem, RevolutionSpec, SolverConfig};

fn main() -> monodual::Result<()> {
    let cells: usize = std::env::args()
        .nth(1)
        .map_or(512, |s| s.parse().expect("cells"));
    let grid = Grid::new(RevolutionSpec::new(vec![3])?, vec![cells])?;
    let a = GridFunction::from_fn(grid, |t| t[0] * t[0]);
    let pb = Problem::new(a, Nonlinearity::power(8.0)?, 0.0)?;

    // The small weight near the axis limits how far the consistency gap can
    // be pushed in double precision; 1e-7 leaves a margin.
    let cfg = SolverConfig {
        tol_residual: 1e-7,
        ..Default::default()
    };
    let fp = fixed_point_solve(&pb, &cfg)?;
    let mp = mountain_pass_solve(
        &pb,
        &SolverConfig {
            method: Method::MountainPass,
            ..cfg
        },
    )?;

    let energies: Vec<f64> = mp
        .energy_history
        .iter()
        .filter_map(|e| e.finite())
        .collect();
    println!(
        "path scale T          {}",
        mp.path_scale.unwrap_or(f64::NAN)
    );
    println!(
        "path max energy       {:.10}",
        mp.path_max_energy.unwrap_or(f64::NAN)
    );
    println!(
        "final energy          {:.10}",
        energies.last().copied().unwrap_or(f64::NAN)
    );
    println!("descent steps         {}", mp.outer_iterations);
    println!(
        "mountain pass         {} (residual {:.2e})",
        mp.message, mp.strong_residual
    );
    println!(
        "fixed point           {} (residual {:.2e})",
        fp.message, fp.strong_residual
    );

    let op = pb.operator();
    let diff = mp.u.zip_map(&fp.u, |x, y| x - y)?;
    println!(
        "relative L2 distance  {:.3e}",
        op.norm(&diff)? / op.norm(&fp.u)?
    );
    Ok(())
}
