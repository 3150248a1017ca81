//! Collision rates of the two Kuramoto-type kernels and the factorization
//! residual of their discretizations under grid refinement.

use nonrev_kinetic::kernels::{build_kuramoto_collision_kernel, CircleGrid, KuramotoModel};
use std::f64::consts::PI;

fn main() -> nonrev_kinetic::Result<()> {
    let a = KuramotoModel::variant_a(PI / 6.0)?;
    let b = KuramotoModel::variant_b(0.5)?;
    println!("{:>8} {:>14} {:>14}", "xi", "lambda_A", "lambda_B");
    for k in 1..=8 {
        let xi = PI * k as f64 / 8.0;
        println!("{xi:8.4} {:14.6e} {:14.6e}", a.lambda(xi)?, b.lambda(xi)?);
    }
    for (name, model) in [("A", &a), ("B", &b)] {
        for m in [16, 32, 64] {
            let k = build_kuramoto_collision_kernel(model, &CircleGrid::new(m)?)?;
            println!("{name} M={m:3}: factorization max {:.3e}, relative {:.3e}, symmetric {}",
                k.factorization.max_norm, k.factorization.relative, k.symmetry.is_symmetric(1e-14));
        }
    }
    Ok(())
}
