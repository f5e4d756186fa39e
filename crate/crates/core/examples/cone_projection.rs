//! Projects a noisy, partly decreasing function on a 2-D grid onto the
//! monotone cone and reports the distance moved and the cone violations.
//!
//! `cargo run --release --example cone_projection -- [cells]`

use monodual::{in_cone, project_cone, Grid, GridFunction, RevolutionSpec};

fn main() -> monodual::Result<()> {
    let cells: usize = std::env::args()
        .nth(1)
        .map_or(32, |s| s.parse().expect("cells"));
    let grid = Grid::uniform(RevolutionSpec::new(vec![2, 3])?, cells)?;
    let g = GridFunction::from_fn(grid, |x| {
        x[0] + x[1] * x[1] - 0.3 + 0.2 * (9.0 * x[0]).sin() * (7.0 * x[1]).cos()
    });

    let before = in_cone(&g, 1e-12);
    let p = project_cone(&g)?;
    let after = in_cone(&p, 1e-12);
    let moved = g
        .values()
        .iter()
        .zip(p.values())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();

    println!(
        "before: min {:.4}, worst slope {:.4}",
        before.min_value, before.worst_slope
    );
    println!(
        "after:  min {:.4}, worst slope {:.4}",
        after.min_value, after.worst_slope
    );
    println!("in cone after projection: {}", after.member);
    println!("l2 distance moved: {moved:.6}");
    // Projecting twice changes nothing.
    let again = project_cone(&p)?;
    println!("idempotent: {}", again.values() == p.values());
    Ok(())
}
