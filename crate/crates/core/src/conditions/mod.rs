//! Double-bush operator, its kernel, and the nonlinear bush conditions that
//! single out `A = c b^T`.

mod bush;
mod kernel;
mod operator;
mod uniqueness;

pub use bush::{
    asym_bush_residual, double_bush_poly_residual, double_bush_residual, on_nodes,
    triple_bush_residual,
};
pub use kernel::{
    default_rank_tolerance, kernel_rowsum, plain_matrix, proportionality, rank_kernel,
    rank_of_block, rank_one_factors, residual_tolerance, KernelBasis, KernelElement,
    RankAnalysis, RankOneFactors, RowsumKernel, StructureCheck,
};
pub use operator::{
    build_m, build_m_with_basis, build_p_tilde, p_tilde_coefficients, BasisKind, MOperator,
    Parity,
};
pub use uniqueness::{
    default_betas, expected_rank, fit_residuals, uniqueness_sweep, Outcome, ResidualFit,
    UniquenessReport,
};
