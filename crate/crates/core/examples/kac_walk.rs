//! Kac particle walk: a short event log, and the distance between the
//! particle marginal and the Boltzmann solution as N grows.

use nonrev_kinetic::kac::{chaos_gap, simulate_kac};
use nonrev_kinetic::kernels::{build_kuramoto_collision_kernel, CircleGrid, KuramotoModel};
use nonrev_kinetic::measures::ProbabilityVector;

fn main() -> nonrev_kinetic::Result<()> {
    let k = build_kuramoto_collision_kernel(&KuramotoModel::variant_b(0.5)?, &CircleGrid::new(16)?)?;
    let p0 = ProbabilityVector::from_unnormalized((0..16).map(|i| if i < 4 { 1.0 } else { 0.05 }).collect())?;
    let run = simulate_kac(&k.kernel, 10, &p0, 5.0, 0)?;
    for e in run.events.iter().take(5) {
        println!("t={:.4} particles ({}, {}) {:?} -> {:?}", e.time, e.i, e.j, e.pre, e.post);
    }
    println!("{} events", run.events.len());
    for n in [20, 80, 320] {
        let g = chaos_gap(&k.kernel, n, &p0, 1.0, 50, 1)?;
        println!("N={n:4}: TV {:.4} +- {:.4}", g.tv, g.std_error);
    }
    Ok(())
}
