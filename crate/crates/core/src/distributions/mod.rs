//! One-dimensional laws: marginals with scores and quantiles, and the
//! samplers used for copula mixing variables.

mod marginal;
mod normal;
mod sampling;

pub use marginal::MarginalDistribution;
pub use normal::{normal_cdf, normal_ln_pdf, normal_pdf, normal_quantile, normal_sf};
pub use sampling::{
    open_uniform, sample_gamma, sample_positive_stable, stable_scale, standard_normal,
    GammaSampler, PositiveStableSampler,
};
