//! Runs the default verification battery for a power nonlinearity and prints
//! one line per check.
//!
//! `cargo run --release --example verify_suite -- [p] [seed]`

use monodual::verify::run_suite;
use monodual::Nonlinearity;

fn main() -> monodual::Result<()> {
    let mut args = std::env::args().skip(1);
    let p: f64 = args.next().map_or(4.0, |s| s.parse().expect("p"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let report = run_suite(&Nonlinearity::power(p)?, seed)?;
    for c in &report.checks {
        let flag = if c.passed { "pass" } else { "FAIL" };
        println!(
            "{flag}  {:<26} slack {:>11.3e}  {}",
            c.name, c.slack, c.message
        );
        for s in &c.subchecks {
            let flag = if s.passed { "pass" } else { "FAIL" };
            println!("        {flag}  {:<24} slack {:>11.3e}", s.name, s.slack);
        }
    }
    println!("overall: {}", if report.passed { "pass" } else { "FAIL" });
    Ok(())
}
