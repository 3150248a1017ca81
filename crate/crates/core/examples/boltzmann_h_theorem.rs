//! Relative entropy decay of the Boltzmann flow for a kernel satisfying the
//! two-particle factorization, with the second-order dissipation.

use nonrev_kinetic::boltzmann::{boltzmann_evolve, build_kernel_from_two_particle, dirichlet_form2, factorization_residual};
use nonrev_kinetic::measures::relative_entropy;
use nonrev_kinetic::sampling::{random_pair_transition, random_probability};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nonrev_kinetic::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p2 = random_pair_transition(6, &mut rng);
    let pi = random_probability(6, 0.2, &mut rng);
    let b = build_kernel_from_two_particle(&p2, &pi, 1.0)?;
    println!("factorization residual {:.2e}", factorization_residual(&b, &pi)?.max_norm);
    let p0 = random_probability(6, 0.01, &mut rng);
    let traj = boltzmann_evolve(&b, &p0, 8.0, 16)?;
    println!("{:>6} {:>14} {:>14}", "t", "Ent(P|pi)", "D2(P)");
    for (t, p) in traj.t_grid().iter().zip(traj.states()) {
        println!("{t:6.2} {:14.6e} {:14.6e}", relative_entropy(p, &pi)?, dirichlet_form2(&b, &pi, p)?);
    }
    Ok(())
}
