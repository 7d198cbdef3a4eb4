//! Fixtures shared by the benchmarks in `benches/`.

use dirpoly::disorder::{sample_environment, HashedEnvironment};
use dirpoly::{Dim, DisorderSpec, EnvironmentField, Window};

/// Gaussian disorder hashed on demand, as the Monte Carlo estimators use it.
pub fn hashed(d: Dim, seed: u64) -> HashedEnvironment {
    HashedEnvironment::new(&DisorderSpec::Gaussian, d, seed).expect("gaussian spec is valid")
}

/// Dense Gaussian field covering every site reachable in `n` steps.
pub fn dense(d: Dim, n: u64, seed: u64) -> EnvironmentField {
    sample_environment(&DisorderSpec::Gaussian, &Window::cone(d, n), seed).expect("cone window is valid")
}
