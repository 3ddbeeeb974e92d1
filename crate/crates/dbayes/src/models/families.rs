//! Parametric model families: each gives an exact log density, a transform
//! between sampler space and parameter space, and, when the family is
//! Gaussian in the observable, the (mu, sigma) structure that enables
//! Gauss-Hermite disparity estimation.

use statrs::function::gamma::{digamma, ln_gamma};

use super::{CoordTransform, ModelError, ParamTransform};
use crate::density::LN_SQRT_2PI;

pub trait ParametricModel {
    fn param_dim(&self) -> usize;

    /// Errors when the constrained parameter leaves the family's domain.
    fn validate(&self, theta: &[f64]) -> Result<(), ModelError>;

    /// Exact log density at `x` for a validated parameter.
    fn log_density(&self, theta: &[f64], x: f64) -> f64;

    fn transform(&self) -> ParamTransform;

    /// `(mu, sigma)` when the observable is Gaussian given theta.
    fn gaussian_structure(&self, _theta: &[f64]) -> Option<(f64, f64)> {
        None
    }

    /// True when `gaussian_structure` returns `Some` for every valid theta.
    fn gh_capable(&self) -> bool {
        false
    }

    fn param_names(&self) -> Vec<&'static str>;
}

/// Normal location family with a known standard deviation; theta = [mu].
#[derive(Debug, Clone, Copy)]
pub struct GaussianMeanModel {
    pub known_sd: f64,
}

impl GaussianMeanModel {
    pub fn new(known_sd: f64) -> Self {
        assert!(known_sd > 0.0);
        GaussianMeanModel { known_sd }
    }
}

impl ParametricModel for GaussianMeanModel {
    fn param_dim(&self) -> usize {
        1
    }

    fn validate(&self, theta: &[f64]) -> Result<(), ModelError> {
        if theta.len() != 1 || !theta[0].is_finite() {
            return Err(ModelError::InvalidParam("mean must be finite"));
        }
        Ok(())
    }

    fn log_density(&self, theta: &[f64], x: f64) -> f64 {
        let u = (x - theta[0]) / self.known_sd;
        -0.5 * u * u - self.known_sd.ln() - LN_SQRT_2PI
    }

    fn transform(&self) -> ParamTransform {
        ParamTransform::identity(1)
    }

    fn gaussian_structure(&self, theta: &[f64]) -> Option<(f64, f64)> {
        Some((theta[0], self.known_sd))
    }

    fn gh_capable(&self) -> bool {
        true
    }

    fn param_names(&self) -> Vec<&'static str> {
        vec!["mu"]
    }
}

/// Normal family with unknown location and scale; theta = [mu, sigma].
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianLocationScale;

impl ParametricModel for GaussianLocationScale {
    fn param_dim(&self) -> usize {
        2
    }

    fn validate(&self, theta: &[f64]) -> Result<(), ModelError> {
        if theta.len() != 2 || !theta[0].is_finite() {
            return Err(ModelError::InvalidParam("mean must be finite"));
        }
        if !(theta[1] > 0.0 && theta[1].is_finite()) {
            return Err(ModelError::InvalidParam("sd must be positive"));
        }
        Ok(())
    }

    fn log_density(&self, theta: &[f64], x: f64) -> f64 {
        let u = (x - theta[0]) / theta[1];
        -0.5 * u * u - theta[1].ln() - LN_SQRT_2PI
    }

    fn transform(&self) -> ParamTransform {
        ParamTransform::new(vec![CoordTransform::Identity, CoordTransform::Log])
    }

    fn gaussian_structure(&self, theta: &[f64]) -> Option<(f64, f64)> {
        Some((theta[0], theta[1]))
    }

    fn gh_capable(&self) -> bool {
        true
    }

    fn param_names(&self) -> Vec<&'static str> {
        vec!["mu", "sigma"]
    }
}

/// Log of a Gamma variable: if W ~ Gamma(shape, scale) then X = log W has
/// density exp(shape*x - e^x/scale) / (Gamma(shape) scale^shape);
/// theta = [shape, scale], sampled on the log scale for both.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpGamma;

impl ExpGamma {
    /// E[X] = digamma(shape) + log(scale).
    pub fn mean(shape: f64, scale: f64) -> f64 {
        digamma(shape) + scale.ln()
    }
}

impl ParametricModel for ExpGamma {
    fn param_dim(&self) -> usize {
        2
    }

    fn validate(&self, theta: &[f64]) -> Result<(), ModelError> {
        if theta.len() != 2 {
            return Err(ModelError::InvalidParam("expected [shape, scale]"));
        }
        if !(theta[0] > 0.0 && theta[0].is_finite()) {
            return Err(ModelError::InvalidParam("shape must be positive"));
        }
        if !(theta[1] > 0.0 && theta[1].is_finite()) {
            return Err(ModelError::InvalidParam("scale must be positive"));
        }
        Ok(())
    }

    fn log_density(&self, theta: &[f64], x: f64) -> f64 {
        let (shape, scale) = (theta[0], theta[1]);
        shape * x - x.exp() / scale - ln_gamma(shape) - shape * scale.ln()
    }

    fn transform(&self) -> ParamTransform {
        ParamTransform::new(vec![CoordTransform::Log, CoordTransform::Log])
    }

    fn param_names(&self) -> Vec<&'static str> {
        vec!["shape", "scale"]
    }
}
