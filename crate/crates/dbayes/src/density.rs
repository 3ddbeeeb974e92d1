//! Density abstraction shared by kernel estimates and analytic laws.
//!
//! Disparity estimators only need pointwise evaluation of the data-side
//! density `g` plus, for the Monte Carlo estimator, the ability to draw from
//! it. Keeping both behind traits lets the same estimator code run against a
//! kernel density estimate, an analytic Gaussian, or a contamination mixture.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::LOG_DENSITY_FLOOR;

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A probability density on the real line.
pub trait Density {
    fn density(&self, x: f64) -> f64;

    /// Log density floored at [`LOG_DENSITY_FLOOR`] so downstream ratios stay finite.
    fn log_density(&self, x: f64) -> f64 {
        let d = self.density(x);
        if d > 0.0 {
            d.ln().max(LOG_DENSITY_FLOOR)
        } else {
            LOG_DENSITY_FLOOR
        }
    }
}

/// A density that can also be sampled, as the Monte Carlo estimator requires.
pub trait SampleableDensity: Density {
    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
}

impl Gaussian {
    pub fn new(mean: f64, sd: f64) -> Self {
        assert!(sd > 0.0 && sd.is_finite(), "sd must be positive");
        Gaussian { mean, sd }
    }

    pub fn standard() -> Self {
        Gaussian { mean: 0.0, sd: 1.0 }
    }
}

impl Density for Gaussian {
    fn density(&self, x: f64) -> f64 {
        let u = (x - self.mean) / self.sd;
        INV_SQRT_2PI / self.sd * (-0.5 * u * u).exp()
    }

    fn log_density(&self, x: f64) -> f64 {
        let u = (x - self.mean) / self.sd;
        (-0.5 * u * u - self.sd.ln() - LN_SQRT_2PI).max(LOG_DENSITY_FLOOR)
    }
}

impl SampleableDensity for Gaussian {
    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count)
            .map(|_| {
                let w: f64 = StandardNormal.sample(rng);
                self.mean + self.sd * w
            })
            .collect()
    }
}

/// Finite mixture of sampleable components; weights need not be normalized.
pub struct Mixture<D: SampleableDensity> {
    components: Vec<(f64, D)>,
    total_weight: f64,
}

impl<D: SampleableDensity> Mixture<D> {
    pub fn new(components: Vec<(f64, D)>) -> Self {
        assert!(!components.is_empty());
        let total_weight = components.iter().map(|(w, _)| w).sum();
        Mixture {
            components,
            total_weight,
        }
    }
}

impl<D: SampleableDensity> Density for Mixture<D> {
    fn density(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|(w, d)| w * d.density(x))
            .sum::<f64>()
            / self.total_weight
    }
}

impl<D: SampleableDensity> SampleableDensity for Mixture<D> {
    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count)
            .map(|_| {
                let mut u: f64 = rng.gen::<f64>() * self.total_weight;
                for (w, d) in &self.components {
                    if u < *w {
                        return d.sample(1, rng)[0];
                    }
                    u -= w;
                }
                self.components.last().unwrap().1.sample(1, rng)[0]
            })
            .collect()
    }
}

/// Uniform density on [center - width/2, center + width/2].
#[derive(Debug, Clone, Copy)]
pub struct UniformBox {
    pub center: f64,
    pub width: f64,
}

impl Density for UniformBox {
    fn density(&self, x: f64) -> f64 {
        if (x - self.center).abs() <= self.width / 2.0 {
            1.0 / self.width
        } else {
            0.0
        }
    }
}

impl SampleableDensity for UniformBox {
    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count)
            .map(|_| self.center + self.width * (rng.gen::<f64>() - 0.5))
            .collect()
    }
}

/// The identically-zero "density". Not a probability law, but the D-posterior
/// remains well defined against it: the disparity becomes constant in theta
/// and the posterior collapses to the prior.
#[derive(Debug, Clone, Copy)]
pub struct ZeroDensity;

impl Density for ZeroDensity {
    fn density(&self, _x: f64) -> f64 {
        0.0
    }
}

/// A density scaled by a constant mass factor (used for the contamination
/// limit checks, where the base law keeps only mass 1 - alpha).
pub struct ScaledDensity<D: Density> {
    pub base: D,
    pub mass: f64,
}

impl<D: Density> Density for ScaledDensity<D> {
    fn density(&self, x: f64) -> f64 {
        self.mass * self.base.density(x)
    }
}

impl<D: Density + ?Sized> Density for &D {
    fn density(&self, x: f64) -> f64 {
        (**self).density(x)
    }
    fn log_density(&self, x: f64) -> f64 {
        (**self).log_density(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_density_matches_closed_form() {
        let g = Gaussian::standard();
        assert!((g.density(0.0) - INV_SQRT_2PI).abs() < 1e-15);
        assert!((g.density(1.0) - 0.24197072451914337).abs() < 1e-15);
    }

    #[test]
    fn mixture_density_normalizes_weights() {
        let m = Mixture::new(vec![
            (9.0, Gaussian::new(0.0, 1.0)),
            (1.0, Gaussian::new(5.0, 1.0)),
        ]);
        let expect = 0.9 * Gaussian::standard().density(0.0)
            + 0.1 * Gaussian::new(5.0, 1.0).density(0.0);
        assert!((m.density(0.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn log_density_is_floored() {
        let g = Gaussian::standard();
        assert_eq!(g.log_density(1e6), crate::LOG_DENSITY_FLOOR);
    }
}
