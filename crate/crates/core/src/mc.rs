//! Seeded, worker-count-independent Monte-Carlo engine.
//!
//! A run consists of `doubling_rounds + 1` rounds of [`BATCHES_PER_ROUND`]
//! batches; batch size doubles from round to round. Batch `i` of round `r`
//! draws from ChaCha stream `r * BATCHES_PER_ROUND + i` of the root seed, and
//! batch statistics are reduced in a fixed order, so results do not depend on
//! how many threads ran the batches.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::stream_rng;

pub const BATCHES_PER_ROUND: usize = 16;

/// Growth factor per round above which a monitored channel is called divergent.
pub const DIVERGENCE_GROWTH: f64 = 1.5;

/// Deterministic or Monte-Carlo rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuadratureRule {
    MonteCarlo,
    /// Composite Gauss–Legendre in one dimension (only meaningful for `n = 1`).
    GaussLegendre { panels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub budget: u64,
    pub seed: u64,
    pub workers: usize,
    pub doubling_rounds: usize,
    pub rule: QuadratureRule,
}

impl QuadratureSpec {
    pub fn monte_carlo(budget: u64, seed: u64) -> Self {
        Self {
            budget,
            seed,
            workers: 1,
            doubling_rounds: 4,
            rule: QuadratureRule::MonteCarlo,
        }
    }

    pub fn gauss_legendre(panels: usize) -> Self {
        Self {
            budget: 0,
            seed: 0,
            workers: 1,
            doubling_rounds: 4,
            rule: QuadratureRule::GaussLegendre { panels },
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn rounds(&self) -> usize {
        self.doubling_rounds + 1
    }

    /// Size of a batch in round 0.
    fn base_batch(&self) -> u64 {
        let slots = BATCHES_PER_ROUND as u64 * ((1u64 << self.rounds()) - 1);
        self.budget.div_ceil(slots).max(1)
    }

    /// Total number of samples a run draws.
    pub fn total_samples(&self) -> u64 {
        BATCHES_PER_ROUND as u64 * self.base_batch() * ((1u64 << self.rounds()) - 1)
    }
}

/// Mean and standard error of one real quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            se: 0.0,
            samples: 0,
        }
    }
}

/// Mean and standard error of real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub re: Estimate,
    pub im: Estimate,
}

impl ComplexEstimate {
    pub fn exact(re: f64, im: f64) -> Self {
        Self {
            re: Estimate::exact(re),
            im: Estimate::exact(im),
        }
    }

    pub fn abs_mean(&self) -> f64 {
        self.re.mean.hypot(self.im.mean)
    }

    /// Combined standard error of the modulus, `sqrt(se_re² + se_im²)`.
    pub fn se(&self) -> f64 {
        self.re.se.hypot(self.im.se)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / total as f64;
        self.count = total;
    }

    fn estimate(&self) -> Estimate {
        let se = if self.count > 1 {
            (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            se,
            samples: self.count,
        }
    }
}

/// Output of [`run`]: per-channel estimates plus, for monitored channels,
/// the median batch mean of every round.
#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub channels: Vec<Estimate>,
    pub round_medians: Vec<Vec<f64>>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Per-round growth factor of `values`: `exp` of the least-squares slope of
/// `ln values` against the round index. `None` unless all values are positive.
pub fn trend_growth(values: &[f64]) -> Option<f64> {
    if values.len() < 2 || values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let m = values.len() as f64;
    let x_bar = (m - 1.0) / 2.0;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let y_bar = logs.iter().sum::<f64>() / m;
    let (num, den) = logs.iter().enumerate().fold((0.0, 0.0), |(num, den), (i, y)| {
        let dx = i as f64 - x_bar;
        (num + dx * (y - y_bar), den + dx * dx)
    });
    Some((num / den).exp())
}

/// Verdict on round medians of a nonnegative channel: non-finite, or growing
/// by more than [`DIVERGENCE_GROWTH`] per round on trend.
pub fn suggests_divergence(values: &[f64]) -> bool {
    values.iter().any(|v| !v.is_finite()) || trend_growth(values).is_some_and(|g| g > DIVERGENCE_GROWTH)
}

/// True when every value exceeds the previous one by more than
/// [`DIVERGENCE_GROWTH`], or when any value is not finite.
pub fn grows_every_round(values: &[f64]) -> bool {
    if values.iter().any(|v| !v.is_finite()) {
        return true;
    }
    values.len() >= 2
        && values
            .windows(2)
            .all(|w| w[1] > 0.0 && w[1] > DIVERGENCE_GROWTH * w[0])
}

fn run_batch<F>(sampler: &F, seed: u64, stream: u64, size: u64, channels: usize) -> Result<Vec<Moments>>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) -> Result<()>,
{
    let mut rng = stream_rng(seed, stream);
    let mut moments = vec![Moments::default(); channels];
    let mut buf = vec![0.0; channels];
    for _ in 0..size {
        buf.iter_mut().for_each(|v| *v = 0.0);
        sampler(&mut rng, &mut buf)?;
        for (m, &v) in moments.iter_mut().zip(&buf) {
            m.push(v);
        }
    }
    Ok(moments)
}

/// Runs `sampler`, which writes one draw of every channel into its buffer.
///
/// Channels listed in `monitor` must be nonnegative; if the median batch mean
/// of a monitored channel grows by more than [`DIVERGENCE_GROWTH`] per round on
/// trend (or any channel is non-finite) the run fails with
/// [`Error::DivergenceSuspected`]. Batch means of an infinite-mean integrand
/// scale with the batch size, which doubles every round.
pub fn run<F>(spec: &QuadratureSpec, channels: usize, monitor: &[usize], sampler: F) -> Result<McResult>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) -> Result<()> + Sync,
{
    if spec.budget == 0 {
        return Err(Error::InvalidInput("Monte-Carlo budget must be positive".into()));
    }
    if monitor.iter().any(|&c| c >= channels) {
        return Err(Error::InvalidInput("monitored channel out of range".into()));
    }
    let base = spec.base_batch();
    let jobs: Vec<(usize, u64, u64)> = (0..spec.rounds())
        .flat_map(|r| {
            (0..BATCHES_PER_ROUND).map(move |i| (r, (r * BATCHES_PER_ROUND + i) as u64, base << r))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("could not start worker pool: {e}")))?;
    let batches: Vec<Result<Vec<Moments>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(_, stream, size)| run_batch(&sampler, spec.seed, stream, size, channels))
            .collect()
    });

    let mut total = vec![Moments::default(); channels];
    let mut round_means = vec![vec![Vec::with_capacity(BATCHES_PER_ROUND); spec.rounds()]; monitor.len()];
    for (&(round, _, _), batch) in jobs.iter().zip(batches) {
        let batch = batch?;
        for (t, b) in total.iter_mut().zip(&batch) {
            t.merge(b);
        }
        for (slot, &c) in monitor.iter().enumerate() {
            round_means[slot][round].push(batch[c].mean);
        }
    }
    let channels_out: Vec<Estimate> = total.iter().map(Moments::estimate).collect();
    let round_medians: Vec<Vec<f64>> = round_means
        .into_iter()
        .map(|rounds| rounds.into_iter().map(|mut v| median(&mut v)).collect())
        .collect();
    for medians in &round_medians {
        if suggests_divergence(medians) {
            return Err(Error::DivergenceSuspected {
                estimates: medians.clone(),
            });
        }
    }
    if let Some(bad) = channels_out.iter().find(|e| !e.mean.is_finite()) {
        return Err(Error::DivergenceSuspected {
            estimates: vec![bad.mean],
        });
    }
    Ok(McResult {
        channels: channels_out,
        round_medians,
    })
}

/// Gauss–Legendre nodes and weights mapped to `[a, b]`, split into `panels` equal panels.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(order.max(1)).expect("order >= 1"));
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for &(x, w) in rule.as_node_weight_pairs() {
            out.push((mid + 0.5 * width * x, 0.5 * width * w));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn uniform_mean() {
        let spec = QuadratureSpec::monte_carlo(100_000, 3);
        let out = run(&spec, 1, &[0], |rng, buf| {
            buf[0] = rng.random::<f64>();
            Ok(())
        })
        .unwrap();
        let e = out.channels[0];
        assert!((e.mean - 0.5).abs() < 4.0 * e.se);
        assert!(e.samples >= 100_000);
    }

    #[test]
    fn independent_of_worker_count() {
        let base = QuadratureSpec::monte_carlo(20_000, 9);
        let f = |rng: &mut ChaCha8Rng, buf: &mut [f64]| {
            let x: f64 = rng.random();
            buf[0] = x * x;
            buf[1] = x.sin();
            Ok(())
        };
        let a = run(&base.with_workers(1), 2, &[0], f).unwrap();
        let b = run(&base.with_workers(4), 2, &[0], f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn heavy_tail_is_flagged() {
        // 1/u² with u uniform has infinite mean
        let spec = QuadratureSpec::monte_carlo(200_000, 5);
        let err = run(&spec, 1, &[0], |rng, buf| {
            let u: f64 = rng.random();
            buf[0] = 1.0 / (u * u);
            Ok(())
        });
        assert!(matches!(err, Err(Error::DivergenceSuspected { .. })));
    }

    #[test]
    fn finite_variance_is_not_flagged() {
        let spec = QuadratureSpec::monte_carlo(200_000, 5);
        let out = run(&spec, 1, &[0], |rng, buf| {
            let u: f64 = rng.random();
            buf[0] = 1.0 / u.sqrt();
            Ok(())
        })
        .unwrap();
        assert!((out.channels[0].mean - 2.0).abs() < 4.0 * out.channels[0].se);
    }

    #[test]
    fn trend_rule() {
        assert!((trend_growth(&[1.0, 2.0, 4.0, 8.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(suggests_divergence(&[667.0, 2609.0, 7623.0, 5390.0, 12835.0]));
        assert!(!suggests_divergence(&[1.0, 1.1, 0.9, 1.05]));
        assert!(!suggests_divergence(&[0.0, 0.0]));
    }

    #[test]
    fn growth_rule() {
        assert!(grows_every_round(&[1.0, 2.0, 4.0, 8.0]));
        assert!(!grows_every_round(&[1.0, 2.0, 2.1, 8.0]));
        assert!(grows_every_round(&[1.0, f64::INFINITY]));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let nodes = composite_gauss_legendre(0.0, 2.0, 3, 5);
        let v: f64 = nodes.iter().map(|(x, w)| w * x.powi(4)).sum();
        assert!((v - 32.0 / 5.0).abs() < 1e-12);
    }
}
