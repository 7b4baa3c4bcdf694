//! Hidden-jump completions of a fixed visible record: the interval-wise
//! acceptance-rejection sampler, conditional averages with error bars, exact
//! continuous-time count statistics and the exact discrete-time enumeration oracle.

pub mod counting;
pub mod oracle;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::records::{merge, FullRecord, HiddenRecord, JumpEvent, VisibleRecord};
use crate::scalar::{cr, log_sum_exp, ComplexMatrix, ComplexVector, Real};
use crate::trajectories::{
    log_path_probability_visible, stream_rng, JumpAction, TrajectoryContext,
};

pub use counting::{
    exact_conditional_heat, exact_heat_given_visible_and_initial, hidden_count_distribution,
};
pub use oracle::{
    enumerate_discrete, oracle_conditional_distribution, BinOutcome, DiscreteGrid, DiscreteLeaf,
    Enumeration, FilteredHeat, OracleSummary, VisibleKey,
};

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl EstimateWithError {
    /// Sample mean and `s/√M` of `values`.
    pub fn from_samples(values: &[f64]) -> Self {
        let m = values.len();
        let mean = values.iter().sum::<f64>() / m as f64;
        let var = if m > 1 {
            values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0)
        } else {
            0.0
        };
        EstimateWithError {
            mean,
            std_error: (var / m as f64).sqrt(),
            samples: m,
        }
    }

    /// Estimate of `⟨e^x⟩` from the exponents, scaled by the largest one to avoid overflow.
    pub fn exp_mean(exponents: &[f64]) -> Self {
        let m = exponents.len();
        let c = log_sum_exp(exponents.iter().copied()) - (m as f64).ln();
        let scaled: Vec<f64> = exponents.iter().map(|x| (x - c).exp()).collect();
        let e = Self::from_samples(&scaled);
        let s = c.exp();
        EstimateWithError {
            mean: e.mean * s,
            std_error: e.std_error * s,
            samples: m,
        }
    }

    /// `|mean − target|` in units of the standard error (0 when they agree to rounding).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d <= 1e-12 * target.abs().max(self.mean.abs()) {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            d / self.std_error
        }
    }
}

/// Acceptance weight used at the end of each hidden interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    /// Weight `η_k ‖L_k ψ‖²` of the next visible jump only (Born weight of
    /// `m` on the last interval). Intervals are treated as independent, which
    /// biases records with visible jumps.
    Chained,
    /// Weight `⟨ψ|W|ψ⟩` with `W` the effect of the whole remaining visible
    /// record, propagated backwards. Exact.
    LookAhead,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerOptions {
    pub mode: SamplerMode,
    /// Attempts allowed per interval before giving up.
    pub max_attempts: u64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            mode: SamplerMode::LookAhead,
            max_attempts: 1_000_000,
        }
    }
}

/// One hidden completion of a visible record.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenSample<T: Real> {
    pub hidden: HiddenRecord<T>,
    pub weight: T,
    pub attempts: u64,
}

#[derive(Debug, Clone)]
struct Interval<T: Real> {
    start: T,
    end: T,
    /// Visible channel closing the interval (`None` for the last one).
    closing: Option<usize>,
    /// Acceptance effect, scaled to unit largest eigenvalue.
    effect: ComplexMatrix<T>,
}

fn largest_eigenvalue<T: Real>(m: &ComplexMatrix<T>) -> T {
    let h = (m + m.adjoint()) * cr(T::lit(0.5));
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Prepared sampler for one visible record.
#[derive(Debug, Clone)]
pub struct HiddenSampler<'a, T: Real> {
    ctx: &'a TrajectoryContext<T>,
    gamma: VisibleRecord<T>,
    intervals: Vec<Interval<T>>,
    options: SamplerOptions,
}

impl<'a, T: Real> HiddenSampler<'a, T> {
    pub fn new(
        gamma: &VisibleRecord<T>,
        ctx: &'a TrajectoryContext<T>,
        options: SamplerOptions,
    ) -> Result<Self> {
        let log_p = log_path_probability_visible(gamma, ctx)?;
        if !log_p.is_finite_value() {
            return Err(Error::ZeroProbability(gamma.to_string()));
        }
        let model = &ctx.model;
        let mut bounds = vec![T::zero()];
        bounds.extend(gamma.events.iter().map(|e| e.time));
        bounds.push(ctx.tau());
        let count = gamma.events.len() + 1;
        let mut intervals: Vec<Interval<T>> = Vec::with_capacity(count);
        let final_projector = ctx.final_basis.projector(gamma.final_outcome);
        // Backward pass: effect of the remaining record seen from the end of each interval.
        let mut effect_after = final_projector.clone();
        for i in (0..count).rev() {
            let closing = gamma.events.get(i).map(|e| e.channel);
            let effect = match (options.mode, closing) {
                (_, None) => final_projector.clone(),
                (SamplerMode::Chained, Some(k)) => {
                    let ch = model.channel(k)?;
                    ch.matrix.adjoint() * &ch.matrix * cr(ch.efficiency)
                }
                (SamplerMode::LookAhead, Some(k)) => {
                    let ch = model.channel(k)?;
                    ch.matrix.adjoint() * &effect_after * &ch.matrix * cr(ch.efficiency)
                }
            };
            let bound = largest_eigenvalue(&effect);
            if !(bound > T::zero()) {
                return Err(Error::ZeroProbability(gamma.to_string()));
            }
            let effect = effect / cr(bound);
            if options.mode == SamplerMode::LookAhead {
                let back = ctx
                    .forward
                    .hidden(bounds[i], bounds[i + 1])?
                    .adjoint()
                    .apply(&effect)?;
                let scale = largest_eigenvalue(&back);
                effect_after = if scale > T::zero() {
                    back / cr(scale)
                } else {
                    back
                };
            }
            intervals.push(Interval {
                start: bounds[i],
                end: bounds[i + 1],
                closing,
                effect,
            });
        }
        intervals.reverse();
        Ok(HiddenSampler {
            ctx,
            gamma: gamma.clone(),
            intervals,
            options,
        })
    }

    pub fn record(&self) -> &VisibleRecord<T> {
        &self.gamma
    }

    /// One hidden completion drawn from `P(h|γ)` (exactly in `LookAhead` mode).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HiddenSample<T>> {
        let ctx = self.ctx;
        let model = &ctx.model;
        if model.channels.iter().all(|ch| ch.efficiency >= T::one()) {
            return Ok(HiddenSample {
                hidden: HiddenRecord::empty(),
                weight: T::one(),
                attempts: 1,
            });
        }
        let mut entry: ComplexVector<T> = ctx.initial_basis.vectors[self.gamma.initial].clone();
        let mut hidden = Vec::new();
        let mut attempts = 0u64;
        for (idx, iv) in self.intervals.iter().enumerate() {
            let mut tries = 0u64;
            let accepted = loop {
                if tries >= self.options.max_attempts {
                    return Err(Error::AttemptBudgetExceeded {
                        interval: idx,
                        cap: self.options.max_attempts,
                    });
                }
                tries += 1;
                let mut psi = entry.clone();
                let mut local: Vec<JumpEvent<T>> = Vec::new();
                let completed = ctx.engine.run(
                    &ctx.forward,
                    &mut psi,
                    iv.start,
                    iv.end,
                    rng,
                    |time, channel, r| {
                        if r.gen::<f64>() < model.channels[channel].efficiency.as_f64() {
                            JumpAction::Abort
                        } else {
                            local.push(JumpEvent { time, channel });
                            JumpAction::Continue
                        }
                    },
                );
                if !completed {
                    continue;
                }
                let w = psi.dotc(&(&iv.effect * &psi)).re;
                if rng.gen::<f64>() < w.as_f64() {
                    break (psi, local);
                }
            };
            attempts += tries;
            let (psi, local) = accepted;
            hidden.extend(local);
            if let Some(k) = iv.closing {
                let jumped = &model.channels[k].matrix * psi;
                let n = jumped.norm();
                entry = jumped / cr(n);
            }
        }
        Ok(HiddenSample {
            hidden: HiddenRecord { events: hidden },
            weight: T::one(),
            attempts,
        })
    }

    /// `count` samples, sample `i` drawn from stream `(seed, i)`.
    pub fn sample_many(&self, count: usize, seed: u64) -> Result<Vec<HiddenSample<T>>> {
        (0..count)
            .into_par_iter()
            .map(|i| self.sample(&mut stream_rng(seed, i as u64)))
            .collect()
    }
}

/// One hidden completion of `gamma`.
pub fn sample_hidden_given_visible<T: Real, R: Rng + ?Sized>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
    options: SamplerOptions,
    rng: &mut R,
) -> Result<HiddenSample<T>> {
    HiddenSampler::new(gamma, ctx, options)?.sample(rng)
}

/// `M` full records `merge(γ, h)` with `h ~ P(h|γ)`.
pub fn conditional_records<T: Real>(
    gamma: &VisibleRecord<T>,
    samples: usize,
    ctx: &TrajectoryContext<T>,
    seed: u64,
    options: SamplerOptions,
) -> Result<Vec<FullRecord<T>>> {
    let sampler = HiddenSampler::new(gamma, ctx, options)?;
    sampler
        .sample_many(samples, seed)?
        .iter()
        .map(|s| merge(gamma, &s.hidden))
        .collect()
}

/// `⟨X|γ⟩` estimated from `M` hidden completions.
pub fn conditional_average<T: Real>(
    gamma: &VisibleRecord<T>,
    functional: impl Fn(&FullRecord<T>) -> Result<f64> + Sync,
    samples: usize,
    ctx: &TrajectoryContext<T>,
    seed: u64,
    options: SamplerOptions,
) -> Result<EstimateWithError> {
    if samples < 2 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: "need at least 2".into(),
        });
    }
    let records = conditional_records(gamma, samples, ctx, seed, options)?;
    let values: Vec<f64> = records.par_iter().map(&functional).collect::<Result<_>>()?;
    Ok(EstimateWithError::from_samples(&values))
}
