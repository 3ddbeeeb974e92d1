//! Random-walk Metropolis over any unnormalized log target on an
//! unconstrained space, with posterior summaries and chain export.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::util;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("initial state has no posterior mass (target is -inf there)")]
    InitInvalid,
    #[error("no post-burn-in samples to summarize")]
    EmptyChain,
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub steps: usize,
    pub proposal_scales: Vec<f64>,
    pub seed: u64,
    /// Fraction of the chain discarded from the front before summarizing.
    pub burn_in_fraction: f64,
    /// Keep every `thinning`-th post-burn-in state.
    pub thinning: usize,
}

impl ChainConfig {
    pub fn new(steps: usize, proposal_scales: Vec<f64>, seed: u64) -> Self {
        ChainConfig {
            steps,
            proposal_scales,
            seed,
            burn_in_fraction: 0.5,
            thinning: 1,
        }
    }

    pub fn with_burn_in(mut self, fraction: f64) -> Self {
        self.burn_in_fraction = fraction;
        self
    }

    pub fn with_thinning(mut self, thinning: usize) -> Self {
        self.thinning = thinning;
        self
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.steps as f64 * self.burn_in_fraction).floor() as usize
    }

    fn validate(&self, dim: usize) -> Result<(), SamplerError> {
        if !(self.burn_in_fraction > 0.0 && self.burn_in_fraction < 1.0) {
            return Err(SamplerError::InvalidConfig(
                "burn-in fraction must lie in (0,1)".into(),
            ));
        }
        if (self.steps as f64) < 2.0 / self.burn_in_fraction {
            return Err(SamplerError::InvalidConfig(format!(
                "steps = {} leaves no post-burn-in samples",
                self.steps
            )));
        }
        if self.thinning == 0 {
            return Err(SamplerError::InvalidConfig("thinning must be >= 1".into()));
        }
        if self.proposal_scales.len() != dim {
            return Err(SamplerError::InvalidConfig(format!(
                "{} proposal scales for a {}-dimensional state",
                self.proposal_scales.len(),
                dim
            )));
        }
        if self
            .proposal_scales
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(SamplerError::InvalidConfig(
                "proposal scales must be positive finite".into(),
            ));
        }
        Ok(())
    }
}

/// A realized Metropolis chain over unconstrained states.
#[derive(Debug, Clone)]
pub struct Chain {
    pub states: Vec<Vec<f64>>,
    pub log_targets: Vec<f64>,
    pub accepted: Vec<bool>,
    pub acceptance_rate: f64,
    /// Warning flag: fewer than 1% of proposals accepted.
    pub stuck: bool,
    pub config: ChainConfig,
}

impl Chain {
    /// Thinned post-burn-in state indices.
    pub fn kept_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let start = self.config.burn_in_steps();
        (start..self.states.len()).step_by(self.config.thinning)
    }
}

/// Runs a symmetric random-walk Metropolis chain: one joint proposal per
/// step, each coordinate perturbed by an independent Gaussian with its
/// configured scale. Deterministic given the seed.
pub fn run_metropolis<T: Fn(&[f64]) -> f64>(
    target: T,
    init: &[f64],
    cfg: &ChainConfig,
) -> Result<Chain, SamplerError> {
    cfg.validate(init.len())?;
    let mut current = init.to_vec();
    let mut current_lt = target(&current);
    if !current_lt.is_finite() {
        return Err(SamplerError::InitInvalid);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut states = Vec::with_capacity(cfg.steps);
    let mut log_targets = Vec::with_capacity(cfg.steps);
    let mut accepted_flags = Vec::with_capacity(cfg.steps);
    let mut proposal = vec![0.0; current.len()];
    let mut accepted = 0usize;
    for _ in 0..cfg.steps {
        for (p, (x, s)) in proposal
            .iter_mut()
            .zip(current.iter().zip(&cfg.proposal_scales))
        {
            let w: f64 = StandardNormal.sample(&mut rng);
            *p = x + s * w;
        }
        let proposal_lt = target(&proposal);
        // log U < log ratio; NaN targets compare false and are rejected.
        let accept = proposal_lt - current_lt > rng.gen::<f64>().ln();
        if accept {
            std::mem::swap(&mut current, &mut proposal);
            current_lt = proposal_lt;
            accepted += 1;
        }
        states.push(current.clone());
        log_targets.push(current_lt);
        accepted_flags.push(accept);
    }
    let acceptance_rate = accepted as f64 / cfg.steps as f64;
    Ok(Chain {
        states,
        log_targets,
        accepted: accepted_flags,
        acceptance_rate,
        stuck: acceptance_rate < 0.01,
        config: cfg.clone(),
    })
}

/// Pilot scale tuning: doubles or halves all proposal scales until a short
/// pilot chain accepts in [0.2, 0.5], then freezes. The measured chain itself
/// never adapts.
pub fn pilot_tuned_scales<T: Fn(&[f64]) -> f64>(
    target: T,
    init: &[f64],
    cfg: &ChainConfig,
    pilot_steps: usize,
    max_rounds: usize,
) -> Result<Vec<f64>, SamplerError> {
    let mut scales = cfg.proposal_scales.clone();
    for round in 0..max_rounds {
        let pilot_cfg = ChainConfig {
            steps: pilot_steps.max(50),
            proposal_scales: scales.clone(),
            seed: util::derive_seed(cfg.seed, 0xb175 + round as u64),
            burn_in_fraction: 0.5,
            thinning: 1,
        };
        let chain = run_metropolis(&target, init, &pilot_cfg)?;
        if chain.acceptance_rate > 0.5 {
            for s in &mut scales {
                *s *= 2.0;
            }
        } else if chain.acceptance_rate < 0.2 {
            for s in &mut scales {
                *s *= 0.5;
            }
        } else {
            break;
        }
    }
    Ok(scales)
}

/// Posterior summaries on the constrained scale.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    /// Expected a-posteriori point: mean of the kept constrained samples.
    pub edap: Vec<f64>,
    /// Maximum a-posteriori point: the kept constrained state with the
    /// largest constrained-scale log target.
    pub mdap: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub interval_mass: f64,
    pub sample_count: usize,
}

/// Summarizes a chain through a transform mapping an unconstrained state to
/// its constrained parameter and the log-Jacobian of that map. The Jacobian
/// is subtracted from the stored log target so the MDAP maximizes the density
/// of the constrained parameter, not of the sampler coordinates.
pub fn summarize<T: Fn(&[f64]) -> (Vec<f64>, f64)>(
    chain: &Chain,
    transform: T,
) -> Result<PosteriorSummary, SamplerError> {
    summarize_with_mass(chain, transform, 0.95)
}

pub fn summarize_with_mass<T: Fn(&[f64]) -> (Vec<f64>, f64)>(
    chain: &Chain,
    transform: T,
    interval_mass: f64,
) -> Result<PosteriorSummary, SamplerError> {
    assert!(interval_mass > 0.0 && interval_mass < 1.0);
    let kept: Vec<usize> = chain.kept_indices().collect();
    if kept.is_empty() {
        return Err(SamplerError::EmptyChain);
    }
    let dim = chain.states[0].len();
    let mut per_coord: Vec<Vec<f64>> = vec![Vec::with_capacity(kept.len()); dim];
    let mut best_lt = f64::NEG_INFINITY;
    let mut mdap = vec![f64::NAN; dim];
    for &i in &kept {
        let (constrained, log_jac) = transform(&chain.states[i]);
        debug_assert_eq!(constrained.len(), dim);
        let constrained_lt = chain.log_targets[i] - log_jac;
        if constrained_lt > best_lt {
            best_lt = constrained_lt;
            mdap = constrained.clone();
        }
        for (col, v) in per_coord.iter_mut().zip(constrained) {
            col.push(v);
        }
    }
    let tail = 0.5 * (1.0 - interval_mass);
    let mut edap = Vec::with_capacity(dim);
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for col in &mut per_coord {
        edap.push(util::mean(col));
        col.sort_by(f64::total_cmp);
        lower.push(util::quantile_sorted(col, tail));
        upper.push(util::quantile_sorted(col, 1.0 - tail));
    }
    Ok(PosteriorSummary {
        edap,
        mdap,
        lower,
        upper,
        interval_mass,
        sample_count: kept.len(),
    })
}

/// Identity transform for targets already on an unconstrained scale.
pub fn identity_transform(state: &[f64]) -> (Vec<f64>, f64) {
    (state.to_vec(), 0.0)
}

/// Writes the chain as CSV: step, log_target, the constrained state
/// components, and the acceptance flag.
pub fn write_chain_csv<W: std::io::Write, T: Fn(&[f64]) -> (Vec<f64>, f64)>(
    chain: &Chain,
    transform: T,
    names: &[&str],
    out: W,
) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "log_target".to_string()];
    header.extend(names.iter().map(|n| n.to_string()));
    header.push("accepted".to_string());
    wtr.write_record(&header)?;
    for (i, state) in chain.states.iter().enumerate() {
        let (constrained, _) = transform(state);
        let mut rec = vec![i.to_string(), format!("{:.16e}", chain.log_targets[i])];
        rec.extend(constrained.iter().map(|v| format!("{v:.16e}")));
        rec.push(if chain.accepted[i] { "1" } else { "0" }.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal_target(x: &[f64]) -> f64 {
        -0.5 * x[0] * x[0]
    }

    #[test]
    fn recovers_standard_gaussian() {
        let cfg = ChainConfig::new(50_000, vec![2.4], 7);
        let chain = run_metropolis(std_normal_target, &[0.3], &cfg).unwrap();
        let kept: Vec<f64> = chain.kept_indices().map(|i| chain.states[i][0]).collect();
        assert!(util::mean(&kept).abs() < 0.03, "mean {}", util::mean(&kept));
        assert!((util::sd(&kept) - 1.0).abs() < 0.05, "sd {}", util::sd(&kept));
        assert!(!chain.stuck);
    }

    #[test]
    fn conjugate_normal_mean_posterior() {
        // n observations of a unit-variance normal with a N(0, 25) mean prior
        // give a normal posterior with precision n + 1/25.
        let data: Vec<f64> = vec![
            5.2, 4.1, 4.9, 5.5, 6.0, 4.4, 5.1, 4.8, 5.3, 4.6, 5.0, 5.7, 4.2, 5.4, 4.95, 5.05,
            4.7, 5.6, 4.3, 5.15,
        ];
        let n = data.len() as f64;
        let sum: f64 = data.iter().sum();
        let target = |th: &[f64]| {
            let t = th[0];
            let ll: f64 = data.iter().map(|x| -0.5 * (x - t) * (x - t)).sum();
            ll - t * t / 50.0
        };
        let post_mean = sum / (n + 0.04);
        let post_sd = (1.0 / (n + 0.04)).sqrt();
        let cfg = ChainConfig::new(60_000, vec![0.5], 99).with_thinning(2);
        let chain = run_metropolis(target, &[0.0], &cfg).unwrap();
        let summary = summarize(&chain, identity_transform).unwrap();
        // Generous 3-sigma Monte Carlo allowance with a rough IACT of 10.
        let mcse = post_sd / (summary.sample_count as f64 / 10.0).sqrt();
        assert!(
            (summary.edap[0] - post_mean).abs() < 3.0 * mcse,
            "edap {} vs {}",
            summary.edap[0],
            post_mean
        );
        let len = summary.upper[0] - summary.lower[0];
        assert!((len - 2.0 * 1.959964 * post_sd).abs() < 0.1 * len);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = ChainConfig::new(500, vec![1.0], 1234);
        let a = run_metropolis(std_normal_target, &[0.0], &cfg).unwrap();
        let b = run_metropolis(std_normal_target, &[0.0], &cfg).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.log_targets, b.log_targets);
        assert_eq!(a.acceptance_rate, b.acceptance_rate);
    }

    #[test]
    fn invalid_init_is_rejected() {
        let cfg = ChainConfig::new(100, vec![1.0], 1);
        let err = run_metropolis(|_| f64::NEG_INFINITY, &[0.0], &cfg).unwrap_err();
        assert_eq!(err, SamplerError::InitInvalid);
    }

    #[test]
    fn config_validation() {
        let cfg = ChainConfig::new(2, vec![1.0], 1);
        assert!(matches!(
            run_metropolis(std_normal_target, &[0.0], &cfg),
            Err(SamplerError::InvalidConfig(_))
        ));
        let cfg = ChainConfig::new(100, vec![1.0, 1.0], 1);
        assert!(matches!(
            run_metropolis(std_normal_target, &[0.0], &cfg),
            Err(SamplerError::InvalidConfig(_))
        ));
        let cfg = ChainConfig::new(100, vec![-1.0], 1);
        assert!(matches!(
            run_metropolis(std_normal_target, &[0.0], &cfg),
            Err(SamplerError::InvalidConfig(_))
        ));
    }

    #[test]
    fn degenerate_chain_summary() {
        let cfg = ChainConfig::new(10, vec![1.0], 1);
        let chain = Chain {
            states: vec![vec![2.5]; 10],
            log_targets: vec![-1.0; 10],
            accepted: vec![false; 10],
            acceptance_rate: 0.0,
            stuck: true,
            config: cfg,
        };
        let s = summarize(&chain, identity_transform).unwrap();
        assert_eq!(s.edap, vec![2.5]);
        assert_eq!(s.mdap, vec![2.5]);
        assert_eq!(s.lower, s.upper);
    }

    #[test]
    fn two_dim_gaussian_moment_match() {
        // Correlated target: covariance [[1, .5], [.5, 2]].
        let det: f64 = 1.0 * 2.0 - 0.25;
        let (i00, i01, i11) = (2.0 / det, -0.5 / det, 1.0 / det);
        let target = move |z: &[f64]| {
            -0.5 * (i00 * z[0] * z[0] + 2.0 * i01 * z[0] * z[1] + i11 * z[1] * z[1])
        };
        let cfg = ChainConfig::new(200_000, vec![0.9, 1.3], 21);
        let chain = run_metropolis(target, &[0.0, 0.0], &cfg).unwrap();
        let kept: Vec<&Vec<f64>> = chain.kept_indices().map(|i| &chain.states[i]).collect();
        let n = kept.len() as f64;
        let mean0: f64 = kept.iter().map(|s| s[0]).sum::<f64>() / n;
        let mean1: f64 = kept.iter().map(|s| s[1]).sum::<f64>() / n;
        let mut c00 = 0.0;
        let mut c01 = 0.0;
        let mut c11 = 0.0;
        for s in &kept {
            c00 += (s[0] - mean0) * (s[0] - mean0);
            c01 += (s[0] - mean0) * (s[1] - mean1);
            c11 += (s[1] - mean1) * (s[1] - mean1);
        }
        c00 /= n;
        c01 /= n;
        c11 /= n;
        assert!(mean0.abs() < 0.05 && mean1.abs() < 0.07);
        assert!((c00 - 1.0).abs() < 0.05, "c00 {c00}");
        assert!((c01 - 0.5).abs() < 0.05 * 2.0, "c01 {c01}");
        assert!((c11 - 2.0).abs() < 0.10, "c11 {c11}");
    }

    #[test]
    fn mdap_uses_jacobian_correction() {
        // Exponential(1) in x sampled through x = exp(z): the unconstrained
        // target z - exp(z) peaks at z = 0, the constrained density at x -> 0.
        let target = |z: &[f64]| z[0] - z[0].exp();
        let cfg = ChainConfig::new(40_000, vec![1.2], 5);
        let chain = run_metropolis(target, &[0.0], &cfg).unwrap();
        let transform = |z: &[f64]| (vec![z[0].exp()], z[0]);
        let s = summarize(&chain, transform).unwrap();
        // EDAP near the mean 1; MDAP near the mode 0, far below exp(0) = 1.
        assert!((s.edap[0] - 1.0).abs() < 0.08, "edap {}", s.edap[0]);
        assert!(s.mdap[0] < 0.15, "mdap {}", s.mdap[0]);
    }

    #[test]
    fn chain_csv_roundtrip_shape() {
        let cfg = ChainConfig::new(20, vec![1.0], 3);
        let chain = run_metropolis(std_normal_target, &[0.0], &cfg).unwrap();
        let mut buf = Vec::new();
        write_chain_csv(&chain, identity_transform, &["theta"], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 21);
        assert_eq!(lines[0], "step,log_target,theta,accepted");
    }

    #[test]
    fn pilot_tuning_reaches_band() {
        let cfg = ChainConfig::new(2000, vec![100.0], 11);
        let scales = pilot_tuned_scales(std_normal_target, &[0.0], &cfg, 2000, 12).unwrap();
        let tuned = ChainConfig::new(20_000, scales, 12);
        let chain = run_metropolis(std_normal_target, &[0.0], &tuned).unwrap();
        assert!(
            chain.acceptance_rate > 0.15 && chain.acceptance_rate < 0.55,
            "rate {}",
            chain.acceptance_rate
        );
    }
}
