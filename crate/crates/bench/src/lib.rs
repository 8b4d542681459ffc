//! Fixtures shared by the benchmarks.

use actvar::harness::{make_test_function, TestFunctionKind};
use actvar::{AnovaFunction, Spectrum};

pub fn korobov(n: usize) -> Spectrum {
    Spectrum::korobov(1.0, n).expect("korobov spectrum")
}

/// A reproducible unit-norm function with `sparsity` subsets of size at most 3.
pub fn random_function(d: usize, sparsity: usize, s: &Spectrum) -> AnovaFunction {
    make_test_function(&TestFunctionKind::Random { sparsity, max_card: 3 }, d, s, 17)
        .expect("random test function")
}
