//! Grid convergence of the linear Neumann solve against a polynomial exact
//! solution, in one radial block of dimension n.
//!
//! `cargo run --release --example manufactured -- [n]`

use monodual::verify::manufactured_study;

fn main() -> monodual::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(3, |s| s.parse().expect("n"));
    let cells = [32, 64, 128, 256, 512];
    let rep = manufactured_study(n, &cells)?;
    println!("{:>6} {:>12} {:>7}", "cells", "sup error", "order");
    for (i, (s, e)) in rep.cells.iter().zip(&rep.linf_errors).enumerate() {
        match i.checked_sub(1).map(|j| rep.orders[j]) {
            Some(o) => println!("{s:>6} {e:>12.4e} {o:>7.3}"),
            None => println!("{s:>6} {e:>12.4e} {:>7}", "-"),
        }
    }
    Ok(())
}
