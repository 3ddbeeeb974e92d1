//! Parametric families, priors, and the composite D-posterior constructions:
//! i.i.d. models, linear regression in three disparity formulations, one-way
//! random effects, binomial-logit-normal counts, and the random-intercept
//! longitudinal model.

pub mod data;
pub mod families;
pub mod hierarchical;
pub mod iid;
pub mod prior;
pub mod regression;

pub use families::{ExpGamma, GaussianLocationScale, GaussianMeanModel, ParametricModel};
pub use iid::{iid_dposterior_logpdf, BandwidthSelector, EstimatorChoice, IidDPosterior};
pub use prior::{Prior, Prior1d};

use thiserror::Error;

use crate::kde::KdeError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter outside the family's domain: {0}")]
    InvalidParam(&'static str),
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error(transparent)]
    Kde(#[from] KdeError),
}

/// Map for one sampler coordinate between the unconstrained space the chain
/// moves in and the constrained parameter space the model is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordTransform {
    Identity,
    /// Sampler coordinate is the log of a positive parameter.
    Log,
    /// Sampler coordinate is the logit of a unit-interval parameter.
    Logit,
}

impl CoordTransform {
    pub fn constrain(self, z: f64) -> f64 {
        match self {
            CoordTransform::Identity => z,
            CoordTransform::Log => z.exp(),
            CoordTransform::Logit => 1.0 / (1.0 + (-z).exp()),
        }
    }

    pub fn unconstrain(self, x: f64) -> f64 {
        match self {
            CoordTransform::Identity => x,
            CoordTransform::Log => x.ln(),
            CoordTransform::Logit => (x / (1.0 - x)).ln(),
        }
    }

    /// Log of |d constrained / d z| at the unconstrained point.
    pub fn log_jacobian(self, z: f64) -> f64 {
        match self {
            CoordTransform::Identity => 0.0,
            CoordTransform::Log => z,
            // d/dz expit(z) = p(1-p); written with softplus for stability.
            CoordTransform::Logit => -softplus(z) - softplus(-z),
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

/// Coordinate-wise bijection between sampler space and parameter space.
#[derive(Debug, Clone)]
pub struct ParamTransform {
    coords: Vec<CoordTransform>,
}

impl ParamTransform {
    pub fn new(coords: Vec<CoordTransform>) -> Self {
        ParamTransform { coords }
    }

    pub fn identity(dim: usize) -> Self {
        ParamTransform {
            coords: vec![CoordTransform::Identity; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[CoordTransform] {
        &self.coords
    }

    /// Maps an unconstrained state to the constrained parameter along with the
    /// total log-Jacobian of the map.
    pub fn constrain(&self, z: &[f64]) -> (Vec<f64>, f64) {
        assert_eq!(z.len(), self.coords.len());
        let mut theta = Vec::with_capacity(z.len());
        let mut log_jac = 0.0;
        for (&c, &zi) in self.coords.iter().zip(z) {
            theta.push(c.constrain(zi));
            log_jac += c.log_jacobian(zi);
        }
        (theta, log_jac)
    }

    pub fn unconstrain(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.coords.len());
        self.coords
            .iter()
            .zip(theta)
            .map(|(c, &x)| c.unconstrain(x))
            .collect()
    }

    /// Closure for `sampler::summarize`: constrained state plus log-Jacobian.
    pub fn summary_fn(&self) -> impl Fn(&[f64]) -> (Vec<f64>, f64) + '_ {
        move |z| self.constrain(z)
    }
}

/// Whether a hierarchical factor enters as an exact log-likelihood or as a
/// scaled disparity against a kernel estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermChoice {
    Likelihood,
    Disparity(crate::disparity::DisparityKind),
}
