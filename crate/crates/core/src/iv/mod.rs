//! Instrumental variables for closed-loop data: controller coprime
//! factorization, instrument assembly, the weighted least-squares predictor,
//! the associated projection and controller-annihilator diagnostics.

mod annihilator;
mod instrument;
mod lcf;

pub use annihilator::{annihilator, restriction_residual, Annihilator};
pub use instrument::{
    build_iv, iv_noise_correlation, predictor, projection, InstrumentSet, IvBlock, IvVariant,
};
pub use lcf::{factor_observability, lcf, markov_parameters, xi_f, CoprimeFactors};
