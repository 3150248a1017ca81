//! Opinion model on 64 bins: equilibrium g, extracted (pi, lambda), and the
//! effect of the asymmetric modifier on the central mass.

use nonrev_kinetic::kernels::{central_mass, local_maxima, run_opinion_model, IntervalGrid, OpinionModel};
use std::time::Instant;

fn main() -> nonrev_kinetic::Result<()> {
    let grid = IntervalGrid::new(64)?;
    let c = grid.centers();
    for (name, model) in [("symmetric", OpinionModel::symmetric(0.01)?), ("asymmetric", OpinionModel::asymmetric(0.01, 5.0)?)] {
        let t = Instant::now();
        let out = run_opinion_model(&model, &grid)?;
        let peaks: Vec<f64> = local_maxima(out.pi_lambda.pi.weights()).into_iter().map(|k| c[k]).collect();
        println!(
            "{name:>10}: residual {:.2e}  peaks {:?}  rho {:.4}  central mass {:.4}  ({:.1?})",
            out.equilibrium.residual,
            peaks,
            out.pi_lambda.rank_correlation,
            central_mass(&out.pi_lambda.pi, &grid, 0.25),
            t.elapsed()
        );
    }
    Ok(())
}
