//! Tabulates F, f, F* and (F*)' for a power nonlinearity or a tabulated one,
//! then runs the assumption checks. A piecewise-linear table behaves like a
//! quadratic near zero, so there t f(t) / F(t) tends to 2.
//!
//! `cargo run --release --example conjugate -- [p | table.csv p mu ell c]`

use monodual::convex::Table;
use monodual::Nonlinearity;

fn main() -> monodual::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let nl = match args.as_slice() {
        [table, p, mu, ell, c] => Nonlinearity::tabulated(
            Table::from_file(table)?,
            p.parse().expect("p"),
            mu.parse().expect("mu"),
            ell.parse().expect("ell"),
            c.parse().expect("c"),
        )?,
        [p] => Nonlinearity::power(p.parse().expect("p"))?,
        _ => Nonlinearity::power(4.0)?,
    };

    // Sample t and evaluate the conjugate at s = f(t), where (F*)'(s) = t.
    let mut t_max = 2.0;
    while nl.f(t_max) > nl.conjugate_range() {
        t_max /= 2.0;
    }
    println!(
        "{:>8} {:>13} {:>13} {:>13} {:>13}",
        "t", "F(t)", "s = f(t)", "F*(s)", "F*'(s)"
    );
    for i in 0..=10 {
        let t = t_max * i as f64 / 10.0;
        let s = nl.f(t);
        println!(
            "{t:>8.4} {:>13.6e} {s:>13.6e} {:>13.6e} {:>13.6e}",
            nl.big_f(t),
            nl.conjugate(s)?,
            nl.conjugate_derivative(s)?
        );
    }

    let rep = nl.check_assumptions(2000)?;
    println!("assumptions hold: {}", rep.all_passed());
    println!(
        "  mu inequality   worst slack {:.3e}",
        rep.mu_inequality.worst_slack
    );
    println!(
        "  conjugate mu    worst slack {:.3e}",
        rep.conjugate_mu_inequality.worst_slack
    );
    println!(
        "  doubling        {:.4} (bound {:.4})",
        rep.doubling_constant, rep.doubling_bound
    );
    Ok(())
}
