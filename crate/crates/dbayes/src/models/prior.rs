//! Proper priors with finite first moments, the standing assumption for
//! every posterior built here.

use rand::Rng;
use rand_distr::Distribution;
use statrs::function::gamma::ln_gamma;

use crate::density::LN_SQRT_2PI;

/// One-dimensional prior. `shape`/`scale` follow the density conventions
/// written out on each variant; all are proper with finite mean on their
/// stated domains.
#[derive(Debug, Clone)]
pub enum Prior1d {
    Gaussian { mean: f64, sd: f64 },
    /// x^{a-1} e^{-x/s} / (Gamma(a) s^a) on x > 0.
    Gamma { shape: f64, scale: f64 },
    /// b^a x^{-(a+1)} e^{-b/x} / Gamma(a) on x > 0; mean requires shape > 1.
    InverseGamma { shape: f64, scale: f64 },
    /// Gamma(df/2, 2).
    ChiSquared { df: f64 },
    /// Prior placed on the square of the coordinate: if the model samples a
    /// scale sigma but the stated prior is on sigma^2, this is that prior
    /// pushed forward to sigma, Jacobian 2*sigma included.
    OnSquare(Box<Prior1d>),
}

impl Prior1d {
    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            Prior1d::Gaussian { mean, sd } => {
                let u = (x - mean) / sd;
                -0.5 * u * u - sd.ln() - LN_SQRT_2PI
            }
            Prior1d::Gamma { shape, scale } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                (shape - 1.0) * x.ln() - x / scale - ln_gamma(*shape) - shape * scale.ln()
            }
            Prior1d::InverseGamma { shape, scale } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * scale.ln() - ln_gamma(*shape) - (shape + 1.0) * x.ln() - scale / x
            }
            Prior1d::ChiSquared { df } => Prior1d::Gamma {
                shape: df / 2.0,
                scale: 2.0,
            }
            .log_density(x),
            Prior1d::OnSquare(inner) => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                inner.log_density(x * x) + (2.0 * x).ln()
            }
        }
    }

    /// Analytic mean where a closed form exists.
    pub fn mean(&self) -> Option<f64> {
        match self {
            Prior1d::Gaussian { mean, .. } => Some(*mean),
            Prior1d::Gamma { shape, scale } => Some(shape * scale),
            Prior1d::InverseGamma { shape, scale } => {
                (*shape > 1.0).then(|| scale / (shape - 1.0))
            }
            Prior1d::ChiSquared { df } => Some(*df),
            // E[sqrt(X)] by the fractional-moment formulas for Gamma and
            // inverse-Gamma inner laws.
            Prior1d::OnSquare(inner) => match **inner {
                Prior1d::Gamma { shape, scale } => {
                    Some(scale.sqrt() * (ln_gamma(shape + 0.5) - ln_gamma(shape)).exp())
                }
                Prior1d::ChiSquared { df } => Prior1d::OnSquare(Box::new(Prior1d::Gamma {
                    shape: df / 2.0,
                    scale: 2.0,
                }))
                .mean(),
                Prior1d::InverseGamma { shape, scale } => (shape > 0.5)
                    .then(|| scale.sqrt() * (ln_gamma(shape - 0.5) - ln_gamma(shape)).exp()),
                _ => None,
            },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Prior1d::Gaussian { mean, sd } => {
                mean + sd * rand_distr::Normal::new(0.0, 1.0).unwrap().sample(rng)
            }
            Prior1d::Gamma { shape, scale } => rand_distr::Gamma::new(*shape, *scale)
                .unwrap()
                .sample(rng),
            Prior1d::InverseGamma { shape, scale } => {
                // 1/W with W ~ Gamma(shape, rate = scale).
                1.0 / rand_distr::Gamma::new(*shape, 1.0 / scale).unwrap().sample(rng)
            }
            Prior1d::ChiSquared { df } => rand_distr::ChiSquared::new(*df).unwrap().sample(rng),
            Prior1d::OnSquare(inner) => inner.sample(rng).sqrt(),
        }
    }
}

/// Product prior over the constrained parameter vector.
#[derive(Debug, Clone)]
pub struct Prior {
    components: Vec<Prior1d>,
}

impl Prior {
    pub fn new(components: Vec<Prior1d>) -> Self {
        Prior { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &Prior1d {
        &self.components[i]
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.components.len());
        self.components
            .iter()
            .zip(theta)
            .map(|(p, &x)| p.log_density(x))
            .sum()
    }

    pub fn mean(&self) -> Option<Vec<f64>> {
        self.components.iter().map(Prior1d::mean).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.components.iter().map(|p| p.sample(rng)).collect()
    }
}
