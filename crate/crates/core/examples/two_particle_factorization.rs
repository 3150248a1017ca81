//! Builds B = lambda P2 from a two-particle transition and checks that pi is
//! a Boltzmann equilibrium; a generic kernel fails the same test.

use nonrev_kinetic::boltzmann::{
    boltzmann_equilibrium_residual, build_kernel_from_two_particle, check_symmetries, factorization_residual,
    two_particle_stationary, CollisionKernel,
};
use nonrev_kinetic::sampling::{random_pair_transition, random_probability};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> nonrev_kinetic::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 4;
    let p2 = random_pair_transition(n, &mut rng);
    let pi = random_probability(n, 0.2, &mut rng);
    let b = build_kernel_from_two_particle(&p2, &pi, 1.0)?;
    let g = two_particle_stationary(&b)?;
    let w = pi.weights();
    let gap = (0..n * n).map(|i| (g.weights()[i] - w[i / n] * w[i % n]).abs()).fold(0.0, f64::max);
    println!("recipe kernel: factorization {:.2e}, equilibrium {:.2e}, |g - pi pi| {gap:.2e}",
        factorization_residual(&b, &pi)?.max_norm, boltzmann_equilibrium_residual(&b, &pi)?);
    println!("symmetries: {:?}", check_symmetries(&b));
    let generic = CollisionKernel::dense(n, (0..n.pow(4)).map(|_| rng.gen_range(0.1..1.0)).collect())?;
    println!("generic kernel: factorization {:.2e}", factorization_residual(&generic, &pi)?.max_norm);
    Ok(())
}
