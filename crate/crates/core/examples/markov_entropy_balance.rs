//! Entropy balance along a non-reversible chain: the typical flux closes the
//! balance, a divergence-free perturbation of it is rejected.

use nonrev_kinetic::markov::{entropy_balance_report, kolmogorov_evolve, stationary_measure, typical_flux};
use nonrev_kinetic::sampling::{random_probability, random_rate_matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nonrev_kinetic::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = random_rate_matrix(6, &mut rng);
    let pi = stationary_measure(&r)?;
    println!("pi = {:?}", pi.weights());
    println!("reversible: {}", r.is_reversible(&pi, 1e-10));
    let p0 = random_probability(6, 0.05, &mut rng);
    let traj = kolmogorov_evolve(&r, &p0, 2.0, 1024)?;
    let flux = typical_flux(&r, &traj)?;
    let report = entropy_balance_report(&r, &pi, &traj, &flux)?;
    println!("typical flux:\n{}", report.to_json());
    let perturbed = flux.with_symmetric_component(0.3);
    let report = entropy_balance_report(&r, &pi, &traj, &perturbed)?;
    println!("perturbed flux: verdict {:?}, gap {:?}", report.verdict, report.gap_value());
    Ok(())
}
