//! Regenerates `tests/fixtures/ed_energies.toml`.
//!
//! cargo run --release -p antn-core --example ed_fixtures > crates/core/tests/fixtures/ed_energies.toml

use std::time::Instant;

use antn::lattice::{build_lattice, heisenberg_terms};
use antn::oracle::exact_ground_state_sparse;

fn main() {
    let systems: &[(usize, usize, f64)] = &[
        (1, 2, 0.0),
        (1, 4, 0.0),
        (2, 2, 0.5),
        (2, 3, 0.5),
        (3, 3, 0.2),
        (3, 3, 0.5),
        (3, 4, 0.5),
        (4, 4, 0.0),
        (4, 4, 0.2),
        (4, 4, 0.5),
        (4, 4, 0.8),
    ];
    println!("# Ground-state energies of the open-boundary J1-J2 model (J1 = 1, Pauli convention).");
    println!("# Lanczos with full reorthogonalization; regenerate with the ed_fixtures example.");
    for &(lx, ly, j2) in systems {
        let terms = heisenberg_terms(&build_lattice(lx, ly).unwrap(), 1.0, j2);
        let t = Instant::now();
        let r = exact_ground_state_sparse(&terms, 7).unwrap();
        eprintln!("{lx}x{ly} j2={j2}: {:.12} residual {:.1e} in {:.1?}", r.energy, r.residual, t.elapsed());
        println!();
        println!("[[system]]");
        println!("lx = {lx}");
        println!("ly = {ly}");
        println!("j2 = {j2:?}");
        println!("energy = {:.12}", r.energy);
    }
}
