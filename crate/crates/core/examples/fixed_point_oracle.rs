//! Solves the integral equation for the collision rate and compares it with
//! the closed forms; the Nystrom route is shown for contrast.

use nonrev_kinetic::kernels::{kuramoto_lambda_a, kuramoto_lambda_b, nystrom_h, solve_h_fixed_point, KuramotoModel};
use std::f64::consts::PI;

fn main() -> nonrev_kinetic::Result<()> {
    for eps in [0.1, 0.5, 0.9] {
        let model = KuramotoModel::variant_b(eps)?;
        let t = solve_h_fixed_point(&model, 2000)?;
        let err = t.sup_error(|x| kuramoto_lambda_b(x, eps).unwrap(), |_| false);
        println!("B eps={eps}: sup error {err:.2e}, eigenvalue {:.12}, h'(pi) {:.6}", t.eigenvalue, t.slope_at_pi());
    }
    let delta = PI / 6.0;
    let model = KuramotoModel::variant_a(delta)?;
    let t = solve_h_fixed_point(&model, 2000)?;
    let w = PI / 2000.0;
    let exact = |x: f64| kuramoto_lambda_a(x, delta).unwrap();
    println!("A delta=pi/6: sup error {:.2e} away from delta", t.sup_error(exact, |x| (x - delta).abs() < 2.0 * w));
    let n = nystrom_h(&model, 300, 10_000)?;
    println!("A Nystrom M=300: sup error {:.2e}", n.sup_error(exact, |x| (x - delta).abs() < 2.0 * PI / 300.0));
    Ok(())
}
