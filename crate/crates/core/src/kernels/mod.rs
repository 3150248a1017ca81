//! Model library: Kuramoto-type circle models and opinion dynamics, each
//! turned into a discretized collision kernel.

pub mod fixed_point;
pub mod grids;
pub mod kuramoto;
pub mod opinion;
pub mod quadrature;

pub use fixed_point::{nystrom_h, solve_h_fixed_point, HTable};
pub use grids::{CircleGrid, IntervalGrid};
pub use kuramoto::{
    build_kuramoto_collision_kernel, kuramoto_lambda_a, kuramoto_lambda_b, kuramoto_two_particle_kernel, r_from_epsilon,
    KuramotoKernel, KuramotoModel, KuramotoVariant,
};
pub use opinion::{
    asymmetric_modifier, central_mass, extract_pi_lambda, local_maxima, opinion_transition, run_opinion_model,
    solve_opinion_equilibrium, spearman, AsymmetricModifier, ModifierForm, NoiseConvention, OpinionEquilibrium, OpinionModel,
    OpinionOutcome, OutgoingRule, PiLambda,
};
