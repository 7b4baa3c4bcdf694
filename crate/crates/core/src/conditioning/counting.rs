//! Exact continuous-time conditional statistics of the hidden jumps from the
//! counting-field generator
//!
//! ```text
//! 𝒩(z) = e^{t ℒ(z)},   ℒ(z) = ℒ_hidden + Σ_k (z_k − 1)(1 − η_k) L_k · L_k†
//! ```
//!
//! whose visible-record chain is the generating function of the hidden-jump
//! counts. Count distributions come from a discrete Fourier transform over
//! roots of unity and mean counts from a complex-step derivative.

use std::collections::BTreeMap;

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::propagators::SuperOperator;
use crate::records::VisibleRecord;
use crate::scalar::{cr, Real};
use crate::trajectories::TrajectoryContext;

/// Step of the complex-step derivative.
fn complex_step<T: Real>() -> T {
    T::lit(1e-8)
}

fn counting_generators<T: Real>(
    ctx: &TrajectoryContext<T>,
    z: &[Complex<T>],
) -> Vec<SuperOperator<T>> {
    let prop = &ctx.forward;
    (0..prop.segment_count())
        .map(|s| {
            let mut g = prop.hidden_generator(s).clone();
            for (ch, zk) in ctx.model.channels.iter().zip(z) {
                let w = (*zk - cr(T::one())) * cr(T::one() - ch.efficiency);
                g.matrix += SuperOperator::sandwich(&ch.matrix).matrix * w;
            }
            g
        })
        .collect()
}

/// `Σ_h z^{N(h)} P(n, v, h, m)` up to the factor `p_n`; with `final_outcome`
/// `None` the final measurement is summed over.
fn generating_function<T: Real>(
    gamma: &VisibleRecord<T>,
    final_outcome: Option<usize>,
    ctx: &TrajectoryContext<T>,
    z: &[Complex<T>],
) -> Result<Complex<T>> {
    gamma.validate(&ctx.model)?;
    let prop = &ctx.forward;
    let gens = counting_generators(ctx, z);
    let chain = |t0: T, t1: T| -> Result<SuperOperator<T>> {
        let mut acc = SuperOperator::identity(prop.dim());
        for p in ctx.model.protocol.pieces(t0, t1)? {
            acc = gens[p.segment].exp_scaled(p.end - p.start).compose(&acc);
        }
        Ok(acc)
    };
    let mut sigma = ctx.initial_basis.projector(gamma.initial);
    let mut t = T::zero();
    for ev in &gamma.events {
        sigma = prop
            .jump(ev.channel)?
            .apply(&chain(t, ev.time)?.apply(&sigma)?)?;
        t = ev.time;
    }
    sigma = chain(t, prop.tau())?.apply(&sigma)?;
    Ok(match final_outcome {
        Some(m) => {
            let v = &ctx.final_basis.vectors[m];
            v.dotc(&(&sigma * v))
        }
        None => sigma.trace(),
    })
}

/// `P(N_hidden = j | γ)` for `j = 0..=max_count`; counts above `max_count`
/// alias onto `j mod (max_count + 1)`.
pub fn hidden_count_distribution<T: Real>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
    max_count: usize,
) -> Result<Vec<T>> {
    let k = max_count + 1;
    let two_pi = T::lit(std::f64::consts::TAU);
    let values: Vec<Complex<T>> = (0..k)
        .map(|l| {
            let angle = two_pi * T::lit(l as f64) / T::lit(k as f64);
            let z = vec![Complex::new(angle.cos(), angle.sin()); ctx.model.channels.len()];
            generating_function(gamma, Some(gamma.final_outcome), ctx, &z)
        })
        .collect::<Result<_>>()?;
    let total = values[0].re;
    if !(total > T::zero()) {
        return Err(Error::ZeroProbability(gamma.to_string()));
    }
    Ok((0..k)
        .map(|j| {
            let acc = values.iter().enumerate().fold(
                Complex::new(T::zero(), T::zero()),
                |acc, (l, f)| {
                    let angle = -two_pi * T::lit((l * j) as f64) / T::lit(k as f64);
                    acc + *f * Complex::new(angle.cos(), angle.sin())
                },
            );
            acc.re / T::lit(k as f64) / total
        })
        .collect())
}

/// Conditional mean number of hidden jumps per channel.
fn mean_hidden_counts<T: Real>(
    gamma: &VisibleRecord<T>,
    final_outcome: Option<usize>,
    ctx: &TrajectoryContext<T>,
) -> Result<Vec<T>> {
    let channels = ctx.model.channels.len();
    let one = vec![cr(T::one()); channels];
    let total = generating_function(gamma, final_outcome, ctx, &one)?.re;
    if !(total > T::zero()) {
        return Err(Error::ZeroProbability(gamma.to_string()));
    }
    let h = complex_step::<T>();
    (0..channels)
        .map(|k| {
            if ctx.model.channels[k].efficiency >= T::one() {
                return Ok(T::zero());
            }
            let mut z = one.clone();
            z[k] = Complex::new(h.cos(), h.sin());
            Ok(generating_function(gamma, final_outcome, ctx, &z)?.im / h / total)
        })
        .collect()
}

fn heat_from_counts<T: Real>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
    counts: &[T],
) -> BTreeMap<usize, T> {
    let model = &ctx.model;
    let mut q: BTreeMap<usize, T> = model.beta.keys().map(|&r| (r, T::zero())).collect();
    for ev in &gamma.events {
        let ch = &model.channels[ev.channel];
        *q.entry(ch.reservoir).or_insert_with(T::zero) +=
            ch.entropy_flux / model.beta_of(ch.reservoir);
    }
    for (ch, n) in model.channels.iter().zip(counts) {
        *q.entry(ch.reservoir).or_insert_with(T::zero) +=
            *n * ch.entropy_flux / model.beta_of(ch.reservoir);
    }
    q
}

/// Exact `⟨Q_r|γ⟩` in continuous time.
pub fn exact_conditional_heat<T: Real>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<BTreeMap<usize, T>> {
    let counts = mean_hidden_counts(gamma, Some(gamma.final_outcome), ctx)?;
    Ok(heat_from_counts(gamma, ctx, &counts))
}

/// Exact `⟨Q_r|v,n⟩` in continuous time; `gamma.final_outcome` is ignored.
pub fn exact_heat_given_visible_and_initial<T: Real>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<BTreeMap<usize, T>> {
    let counts = mean_hidden_counts(gamma, None, ctx)?;
    Ok(heat_from_counts(gamma, ctx, &counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioning::oracle::{enumerate_discrete, DiscreteGrid, VisibleKey};
    use crate::operators::{build_two_level_model, TwoLevelParams, EMISSION};
    use crate::records::{JumpEvent, Record};
    use crate::thermo::conditional_heat_closed_form;
    use crate::trajectories::path_probability_visible;

    fn ctx(eta: f64, tau: f64) -> TrajectoryContext<f64> {
        let p = TwoLevelParams {
            omega: 1000.0,
            gamma0: 1.0,
            epsilon: 10.0,
            beta: 2e-4,
            eta_minus: eta,
            eta_plus: eta,
        };
        TrajectoryContext::stationary(&build_two_level_model(&p, tau).unwrap()).unwrap()
    }

    #[test]
    fn distribution_is_normalized_and_trivial_at_unit_efficiency() {
        let c = ctx(0.3, 0.5);
        let g = Record::new(
            0,
            vec![JumpEvent {
                time: 0.2,
                channel: EMISSION,
            }],
            1,
            0.5,
        );
        let p = hidden_count_distribution(&g, &c, 20).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| *x > -1e-12));
        let c1 = ctx(1.0, 0.5);
        let p1 = hidden_count_distribution(&g, &c1, 5).unwrap();
        assert!((p1[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generating_function_at_one_is_visible_probability() {
        let c = ctx(0.3, 0.5);
        let g = Record::new(
            1,
            vec![JumpEvent {
                time: 0.2,
                channel: EMISSION,
            }],
            0,
            0.5,
        );
        let one = vec![cr(1.0); 2];
        let f = generating_function(&g, Some(0), &c, &one).unwrap().re * c.initial_probability(1);
        assert!((f - path_probability_visible(&g, &c).unwrap()).abs() < 1e-12 * f);
    }

    #[test]
    fn mean_count_agrees_with_distribution() {
        let c = ctx(0.2, 0.5);
        let g = Record::new(0, vec![], 0, 0.5);
        let p = hidden_count_distribution(&g, &c, 24).unwrap();
        let mean: f64 = p.iter().enumerate().map(|(j, x)| j as f64 * x).sum();
        let counts = mean_hidden_counts(&g, Some(0), &c).unwrap();
        assert!((mean - counts.iter().sum::<f64>()).abs() < 1e-8);
    }

    #[test]
    fn filtered_closed_form_is_exact_without_future_information() {
        // At η = 0 the visible record carries no information, so filtering is smoothing.
        let c = ctx(0.0, 0.5);
        let g = Record::new(0, vec![], 0, 0.5);
        let exact = exact_heat_given_visible_and_initial(&g, &c).unwrap()[&0];
        let closed = conditional_heat_closed_form(&g, &c, 512).unwrap().m_summed[&0];
        assert!(
            (exact - closed).abs() < 1e-6 * exact.abs().max(1.0),
            "{exact} vs {closed}"
        );
    }

    #[test]
    fn discrete_oracle_converges_to_exact_heat() {
        let tau = 0.05;
        let c = ctx(0.2, tau);
        let exact = exact_conditional_heat(&Record::new(0, vec![], 0, tau), &c).unwrap()[&0];
        let mut errors = Vec::new();
        for bins in [2, 4, 6] {
            let en = enumerate_discrete(&c, DiscreteGrid::new(bins, tau).unwrap(), bins).unwrap();
            let key = VisibleKey {
                initial: 0,
                visible: vec![None; bins],
                final_outcome: 0,
            };
            errors.push((en.summaries()[&key].heat[0] - exact).abs());
        }
        assert!(errors[2] < errors[0], "{errors:?}");
    }
}
