//! Active-variable truncation and changing-dimension approximation in
//! weighted tensor-product spaces with weights `γ_{d,u} = d^{-|u|}`.

pub mod cda;
pub mod cost;
pub mod error;
pub mod harness;
pub mod numeric;
pub mod optimal;
pub mod space;
pub mod spectrum;
pub mod truncation;

pub use cda::{apply, plan, price, r_upper_bounds, ApplyOutcome, CdaPlan, Level, Price, RBound, RRegime};
pub use cost::{
    complexity_curve, eval_cost, tractability_classify, Classification, ComplexityPoint,
    ComplexityReport, ComplexitySource, CostModel,
};
pub use error::{Error, Result};
pub use harness::{
    make_test_function, mc_l2_error, quadrature_l2_error, reproduce_table, McEstimate, OutputFormat,
    RunConfig, TableReport, TestFunctionKind,
};
pub use optimal::{
    n_of_eps, optimal_algorithm, tau_sum_identity, OptimalSummary, TauSum, TensorEigen,
    TensorEigenStream,
};
pub use space::{act, g_norm_exact, AnovaFunction, Functional, GNorm, SubsetIndex};
pub use spectrum::{build_spectrum, C0sqMode, Density, KernelKind, KernelSpec, Spectrum};
pub use truncation::{big_m, m1, m2, TruncationReport};
