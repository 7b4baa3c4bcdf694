//! Thermodynamic functionals of records and the checks of the conditional and
//! global fluctuation theorems, the bounds they imply and their tail estimates.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::conditioning::{EstimateWithError, HiddenSampler, SamplerOptions};
use crate::error::{Error, Result};
use crate::operators::Model;
use crate::records::{merge, FullRecord, JumpEvent, Record, VisibleRecord};
use crate::scalar::{trace_product, Real};
use crate::trajectories::{
    coarse_grain, evolve_conditional_state, log_path_probability_visible,
    log_path_probability_visible_reversed, sample_ideal_trajectory, stream_rng, TrajectoryContext,
};

/// Slack, in standard errors, granted to every Monte Carlo inequality.
pub const SE_SLACK: f64 = 3.0;

/// Entropy balance of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoBreakdown<T> {
    /// `S_tot` (full records only).
    pub s_tot: Option<T>,
    /// `ΔS_sys = ln p_n(0) − ln p_m(τ)`.
    pub ds_sys: T,
    /// `Q_r` per reservoir (full records only).
    pub q_per_reservoir: BTreeMap<usize, T>,
    /// `Σ` (visible records only).
    pub sigma: Option<T>,
    /// `φ = Σ − ΔS_sys` (visible records only).
    pub phi: Option<T>,
}

impl<T: Real> ThermoBreakdown<T> {
    /// `Σ_r β_r Q_r`.
    pub fn entropy_flow(&self, model: &Model<T>) -> T {
        self.q_per_reservoir
            .iter()
            .fold(T::zero(), |acc, (r, q)| acc + model.beta_of(*r) * *q)
    }

    /// Largest violation of `S_tot = ΔS_sys + Σ β_r Q_r` and `Σ = ΔS_sys + φ`.
    pub fn decomposition_defect(&self, model: &Model<T>) -> f64 {
        let mut defect: f64 = 0.0;
        if let Some(s) = self.s_tot {
            defect = defect.max((s - self.ds_sys - self.entropy_flow(model)).abs().as_f64());
        }
        if let (Some(sigma), Some(phi)) = (self.sigma, self.phi) {
            defect = defect.max((sigma - self.ds_sys - phi).abs().as_f64());
        }
        defect
    }
}

fn system_entropy<T: Real>(record: &Record<T>, ctx: &TrajectoryContext<T>) -> Result<T> {
    let p_n = ctx.initial_probability(record.initial);
    let p_m = ctx.final_probability(record.final_outcome);
    if !(p_n > T::zero()) || !(p_m > T::zero()) {
        return Err(Error::Divergent {
            record: record.to_string(),
            reason: format!(
                "endpoint probabilities p_n = {}, p_m = {}",
                p_n.as_f64(),
                p_m.as_f64()
            ),
        });
    }
    Ok(p_n.ln() - p_m.ln())
}

/// `S_tot = ΔS_sys + Σ_r β_r Q_r` with `β_r Q_r = Σ_{jumps into r} Δs_k`.
pub fn entropy_production<T: Real>(
    record: &FullRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<ThermoBreakdown<T>> {
    record.validate(&ctx.model)?;
    let ds_sys = system_entropy(record, ctx)?;
    let model = &ctx.model;
    let mut q: BTreeMap<usize, T> = model.beta.keys().map(|&r| (r, T::zero())).collect();
    let mut flow = T::zero();
    for ev in &record.events {
        let ch = model.channel(ev.channel)?;
        flow += ch.entropy_flux;
        *q.entry(ch.reservoir).or_insert_with(T::zero) +=
            ch.entropy_flux / model.beta_of(ch.reservoir);
    }
    Ok(ThermoBreakdown {
        s_tot: Some(ds_sys + flow),
        ds_sys,
        q_per_reservoir: q,
        sigma: None,
        phi: None,
    })
}

/// `Σ = ln P(γ) − ln P̃(γ̃)` and `φ = Σ − ΔS_sys`.
pub fn sigma_estimator<T: Real>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<ThermoBreakdown<T>> {
    let ds_sys = system_entropy(gamma, ctx)?;
    let fwd = log_path_probability_visible(gamma, ctx)?;
    if !fwd.is_finite_value() {
        return Err(Error::ZeroProbability(gamma.to_string()));
    }
    let bwd = log_path_probability_visible_reversed(gamma, ctx)?;
    if !bwd.is_finite_value() {
        return Err(Error::Divergent {
            record: gamma.to_string(),
            reason: "reversed visible probability vanishes".into(),
        });
    }
    let sigma = fwd - bwd;
    Ok(ThermoBreakdown {
        s_tot: None,
        ds_sys,
        q_per_reservoir: BTreeMap::new(),
        sigma: Some(sigma),
        phi: Some(sigma - ds_sys),
    })
}

/// Conditional heat evaluated on the filtered state `σ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalHeat<T> {
    /// `P[m|v,n] · T_r [Σ_visible Δs_k + ∫ dt Σ_k (1−η_k) Tr[L_k†L_k σ_t] Δs_k]`.
    pub with_final_factor: BTreeMap<usize, T>,
    /// The same bracket without the factor, `⟨Q_r|v,n⟩`.
    pub m_summed: BTreeMap<usize, T>,
    /// `P[m|v,n]`.
    pub final_given_visible: T,
}

/// Closed form of the conditional heat with a Simpson integral over `steps`
/// subintervals per smooth piece of `σ_t`.
pub fn conditional_heat_closed_form<T: Real>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
    steps: usize,
) -> Result<ConditionalHeat<T>> {
    let path = evolve_conditional_state(gamma, ctx, steps)?;
    let model = &ctx.model;
    let mut m_summed = BTreeMap::new();
    for (&r, &beta) in &model.beta {
        let visible = gamma
            .events
            .iter()
            .map(|e| &model.channels[e.channel])
            .filter(|ch| ch.reservoir == r)
            .fold(T::zero(), |a, ch| a + ch.entropy_flux);
        let rates: Vec<(ComplexMatrixT<T>, T)> = model
            .channels
            .iter()
            .filter(|ch| ch.reservoir == r)
            .map(|ch| {
                (
                    ch.matrix.adjoint() * &ch.matrix,
                    (T::one() - ch.efficiency) * ch.entropy_flux,
                )
            })
            .collect();
        let hidden = path.integrate(|s| {
            rates
                .iter()
                .fold(T::zero(), |a, (ll, w)| a + trace_product(ll, s).re * *w)
        });
        m_summed.insert(r, (visible + hidden) / beta);
    }
    let v = &ctx.final_basis.vectors[gamma.final_outcome];
    let final_given_visible = v.dotc(&(path.final_state() * v)).re;
    let with_final_factor = m_summed
        .iter()
        .map(|(&r, &q)| (r, q * final_given_visible))
        .collect();
    Ok(ConditionalHeat {
        with_final_factor,
        m_summed,
        final_given_visible,
    })
}

type ComplexMatrixT<T> = crate::scalar::ComplexMatrix<T>;

/// Hidden completions of one visible record with the functionals every check needs.
#[derive(Debug, Clone)]
pub struct ConditionalEnsemble<T: Real> {
    pub gamma: VisibleRecord<T>,
    /// `Σ` and `φ` of `gamma`.
    pub estimator: ThermoBreakdown<T>,
    pub records: Vec<FullRecord<T>>,
    /// `S_tot` per completion.
    pub s_tot: Vec<f64>,
    /// `Σ_r β_r Q_r` per completion.
    pub entropy_flow: Vec<f64>,
    /// `Q_r` per completion, by reservoir.
    pub heat: BTreeMap<usize, Vec<f64>>,
    pub hidden_jumps: Vec<usize>,
    pub attempts: u64,
}

impl<T: Real> ConditionalEnsemble<T> {
    /// `samples` completions, completion `i` drawn from stream `(seed, i)`.
    pub fn sample(
        gamma: &VisibleRecord<T>,
        samples: usize,
        ctx: &TrajectoryContext<T>,
        seed: u64,
        options: SamplerOptions,
    ) -> Result<Self> {
        if samples < 2 {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: "need at least 2".into(),
            });
        }
        let estimator = sigma_estimator(gamma, ctx)?;
        let sampler = HiddenSampler::new(gamma, ctx, options)?;
        let draws = sampler.sample_many(samples, seed)?;
        let attempts = draws.iter().map(|d| d.attempts).sum();
        let hidden_jumps = draws.iter().map(|d| d.hidden.len()).collect();
        let records: Vec<FullRecord<T>> = draws
            .iter()
            .map(|d| merge(gamma, &d.hidden))
            .collect::<Result<_>>()?;
        let breakdowns: Vec<ThermoBreakdown<T>> = records
            .par_iter()
            .map(|r| entropy_production(r, ctx))
            .collect::<Result<_>>()?;
        let s_tot = breakdowns
            .iter()
            .map(|b| b.s_tot.map(|s| s.as_f64()).unwrap_or(f64::NAN))
            .collect();
        let entropy_flow = breakdowns
            .iter()
            .map(|b| b.entropy_flow(&ctx.model).as_f64())
            .collect();
        let mut heat: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for b in &breakdowns {
            for (r, q) in &b.q_per_reservoir {
                heat.entry(*r).or_default().push(q.as_f64());
            }
        }
        Ok(ConditionalEnsemble {
            gamma: gamma.clone(),
            estimator,
            records,
            s_tot,
            entropy_flow,
            heat,
            hidden_jumps,
            attempts,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.estimator.sigma.map(|s| s.as_f64()).unwrap_or(f64::NAN)
    }

    pub fn phi(&self) -> f64 {
        self.estimator.phi.map(|s| s.as_f64()).unwrap_or(f64::NAN)
    }

    /// The first `m` completions.
    pub fn prefix(&self, m: usize) -> Self {
        let m = m.min(self.records.len());
        ConditionalEnsemble {
            gamma: self.gamma.clone(),
            estimator: self.estimator.clone(),
            records: self.records[..m].to_vec(),
            s_tot: self.s_tot[..m].to_vec(),
            entropy_flow: self.entropy_flow[..m].to_vec(),
            heat: self
                .heat
                .iter()
                .map(|(r, v)| (*r, v[..m].to_vec()))
                .collect(),
            hidden_jumps: self.hidden_jumps[..m].to_vec(),
            attempts: self.attempts,
        }
    }

    /// `⟨e^{−S_tot}|γ⟩` against `e^{−Σ}`.
    pub fn conditional_ft(&self) -> ConditionalFtCheck {
        let neg: Vec<f64> = self.s_tot.iter().map(|s| -s).collect();
        ConditionalFtCheck {
            lhs: (-self.sigma()).exp(),
            rhs: EstimateWithError::exp_mean(&neg),
        }
    }

    /// `Σ^k ≤ ⟨S_tot^k|γ⟩` for `k = 1, 2, 4`.
    pub fn bound_hierarchy(&self) -> BoundHierarchy {
        let sigma = self.sigma();
        let rows = [1, 2, 4]
            .iter()
            .map(|&k| {
                let vals: Vec<f64> = self.s_tot.iter().map(|s| s.powi(k)).collect();
                let estimate = EstimateWithError::from_samples(&vals);
                let lower = sigma.powi(k);
                MomentRow {
                    order: k as u32,
                    sigma_power: lower,
                    estimate,
                    satisfied: lower <= estimate.mean + SE_SLACK * estimate.std_error,
                }
            })
            .collect();
        BoundHierarchy { sigma, rows }
    }

    /// `⟨S_tot|γ⟩ − Σ`, which equals `Σ_r β_r⟨Q_r|γ⟩ − φ`.
    pub fn entropy_gap(&self) -> EstimateWithError {
        let sigma = self.sigma();
        let vals: Vec<f64> = self.s_tot.iter().map(|s| s - sigma).collect();
        EstimateWithError::from_samples(&vals)
    }

    /// `φ ≤ Σ_r β_r ⟨Q_r|γ⟩`.
    pub fn heat_bound(&self) -> HeatBoundCheck {
        let beta_q = EstimateWithError::from_samples(&self.entropy_flow);
        let phi = self.phi();
        HeatBoundCheck {
            phi,
            beta_q,
            satisfied: phi <= beta_q.mean + SE_SLACK * beta_q.std_error,
        }
    }

    /// `⟨Q_r|γ⟩` per reservoir.
    pub fn mean_heat(&self) -> BTreeMap<usize, EstimateWithError> {
        self.heat
            .iter()
            .map(|(r, v)| (*r, EstimateWithError::from_samples(v)))
            .collect()
    }

    /// Deviations `S_tot − Σ`.
    pub fn deviations(&self) -> Vec<f64> {
        let sigma = self.sigma();
        self.s_tot.iter().map(|s| s - sigma).collect()
    }

    /// Empirical tails of `S_tot − Σ` against the exponential bounds.
    pub fn tail_rows(&self, xi_grid: &[f64], q_grid: &[f64]) -> Vec<TailCheckRow> {
        let d = self.deviations();
        let w = vec![1.0 / d.len() as f64; d.len()];
        tail_rows(&d, &w, Some(d.len()), xi_grid, q_grid)
    }

    /// `⟨e^{q(S_tot−Σ)}|γ⟩`.
    pub fn exp_moment(&self, q: f64) -> EstimateWithError {
        let x: Vec<f64> = self.deviations().iter().map(|d| q * d).collect();
        EstimateWithError::exp_mean(&x)
    }
}

/// Conditional fluctuation theorem for one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalFtCheck {
    /// `e^{−Σ}`.
    pub lhs: f64,
    /// `⟨e^{−S_tot}|γ⟩`.
    pub rhs: EstimateWithError,
}

impl ConditionalFtCheck {
    pub fn z_score(&self) -> f64 {
        self.rhs.z_score(self.lhs)
    }

    pub fn passes(&self) -> bool {
        self.z_score() <= SE_SLACK
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub order: u32,
    /// `Σ^k`.
    pub sigma_power: f64,
    /// `⟨S_tot^k|γ⟩`.
    pub estimate: EstimateWithError,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundHierarchy {
    pub sigma: f64,
    pub rows: Vec<MomentRow>,
}

impl BoundHierarchy {
    pub fn satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.satisfied)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatBoundCheck {
    pub phi: f64,
    /// `Σ_r β_r ⟨Q_r|γ⟩`.
    pub beta_q: EstimateWithError,
    pub satisfied: bool,
}

/// Which tail of `S_tot − Σ` a row bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// `Pr(S_tot − Σ < −ξ) ≤ e^{−ξ}`.
    Left,
    /// `Pr(S_tot − Σ ≥ ξ) ≤ e^{−qξ} ⟨e^{q(S_tot−Σ)}⟩`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheckRow {
    pub tail: Tail,
    pub xi: f64,
    pub q: f64,
    pub empirical_prob: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Tail rows from weighted deviations. With `samples = Some(M)` the slack is
/// three binomial standard errors; exact weights get `1e−9`.
pub fn tail_rows(
    deviations: &[f64],
    weights: &[f64],
    samples: Option<usize>,
    xi_grid: &[f64],
    q_grid: &[f64],
) -> Vec<TailCheckRow> {
    let slack = |p: f64| match samples {
        Some(m) => SE_SLACK * (p * (1.0 - p) / m as f64).sqrt(),
        None => 1e-9,
    };
    let prob = |pred: &dyn Fn(f64) -> bool| {
        deviations
            .iter()
            .zip(weights)
            .filter(|(d, _)| pred(**d))
            .map(|(_, w)| w)
            .sum::<f64>()
    };
    let mut rows = Vec::new();
    for &xi in xi_grid {
        let p = prob(&|d| d < -xi);
        let bound = (-xi).exp();
        rows.push(TailCheckRow {
            tail: Tail::Left,
            xi,
            q: 1.0,
            empirical_prob: p,
            bound,
            satisfied: p <= bound + slack(p),
        });
    }
    for &q in q_grid {
        let moment = deviations
            .iter()
            .zip(weights)
            .map(|(d, w)| w * (q * d).exp())
            .sum::<f64>();
        for &xi in xi_grid {
            let p = prob(&|d| d >= xi);
            let bound = (-q * xi).exp() * moment;
            rows.push(TailCheckRow {
                tail: Tail::Right,
                xi,
                q,
                empirical_prob: p,
                bound,
                satisfied: p <= bound + slack(p),
            });
        }
    }
    rows
}

/// `e^{−Σ}` against `⟨e^{−S_tot}|γ⟩` from `samples` hidden completions.
pub fn check_conditional_ft<T: Real>(
    gamma: &VisibleRecord<T>,
    samples: usize,
    ctx: &TrajectoryContext<T>,
    seed: u64,
    options: SamplerOptions,
) -> Result<ConditionalFtCheck> {
    Ok(ConditionalEnsemble::sample(gamma, samples, ctx, seed, options)?.conditional_ft())
}

/// `Σ^k ≤ ⟨S_tot^k|γ⟩`, `k ∈ {1, 2, 4}`.
pub fn check_bound_hierarchy<T: Real>(
    gamma: &VisibleRecord<T>,
    samples: usize,
    ctx: &TrajectoryContext<T>,
    seed: u64,
    options: SamplerOptions,
) -> Result<BoundHierarchy> {
    Ok(ConditionalEnsemble::sample(gamma, samples, ctx, seed, options)?.bound_hierarchy())
}

/// Tail bounds plus the corollary `⟨e^{q(S_tot−Σ)}|γ⟩ ≥ 1` per `q`.
pub fn check_tail_bounds<T: Real>(
    gamma: &VisibleRecord<T>,
    xi_grid: &[f64],
    q_grid: &[f64],
    samples: usize,
    ctx: &TrajectoryContext<T>,
    seed: u64,
    options: SamplerOptions,
) -> Result<(Vec<TailCheckRow>, Vec<(f64, EstimateWithError)>)> {
    if xi_grid.iter().any(|x| *x < 0.0) || q_grid.iter().any(|q| *q < 1.0) {
        return Err(Error::InvalidParameter {
            name: "tail grid",
            reason: "need xi >= 0 and q >= 1".into(),
        });
    }
    let ens = ConditionalEnsemble::sample(gamma, samples, ctx, seed, options)?;
    let moments = q_grid.iter().map(|&q| (q, ens.exp_moment(q))).collect();
    Ok((ens.tail_rows(xi_grid, q_grid), moments))
}

/// Finite-time estimate of the scaled cumulant generating function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgfPoint {
    pub tau: f64,
    /// `ln⟨e^{q(S_tot−Σ)}|γ⟩ / τ`.
    pub value: f64,
    /// Delta-method standard error.
    pub std_error: f64,
}

/// `ln⟨e^{q(S_tot−Σ)}|γ⟩/τ` for each `(context, record)` of a duration ladder.
pub fn scaled_cgf<T: Real>(
    q: f64,
    family: &[(TrajectoryContext<T>, VisibleRecord<T>)],
    samples: usize,
    seed: u64,
    options: SamplerOptions,
) -> Result<Vec<CgfPoint>> {
    if q < 1.0 {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: "must be at least 1".into(),
        });
    }
    family
        .iter()
        .map(|(ctx, gamma)| {
            let e = ConditionalEnsemble::sample(gamma, samples, ctx, seed, options)?.exp_moment(q);
            let tau = ctx.tau().as_f64();
            Ok(CgfPoint {
                tau,
                value: e.mean.ln() / tau,
                std_error: e.std_error / e.mean / tau,
            })
        })
        .collect()
}

/// Ensemble averages over unconditioned trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFtCheck {
    /// `⟨e^{−S_tot}⟩` over ideal records.
    pub exp_minus_s: EstimateWithError,
    /// `⟨e^{−Σ}⟩` over visible records.
    pub exp_minus_sigma: EstimateWithError,
    /// `(k, ⟨Σ^k⟩, ⟨S_tot^k⟩)` for `k = 1, 2, 4`.
    pub moments: Vec<(u32, EstimateWithError, EstimateWithError)>,
}

/// `⟨e^{−S_tot}⟩ = 1` and `⟨e^{−Σ}⟩ = 1` from `count` trajectories.
pub fn check_global_fts<T: Real>(
    count: usize,
    ctx: &TrajectoryContext<T>,
    seed: u64,
) -> Result<GlobalFtCheck> {
    if count < 2 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "need at least 2".into(),
        });
    }
    let pairs: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let sample = sample_ideal_trajectory(ctx, &mut rng);
            let (gamma, _) = coarse_grain(&sample.record, &ctx.model, &mut rng)?;
            let s = entropy_production(&sample.record, ctx)?
                .s_tot
                .map(|x| x.as_f64())
                .unwrap_or(f64::NAN);
            let sigma = sigma_estimator(&gamma, ctx)?
                .sigma
                .map(|x| x.as_f64())
                .unwrap_or(f64::NAN);
            Ok((s, sigma))
        })
        .collect::<Result<_>>()?;
    let neg_s: Vec<f64> = pairs.iter().map(|p| -p.0).collect();
    let neg_sigma: Vec<f64> = pairs.iter().map(|p| -p.1).collect();
    let moments = [1, 2, 4]
        .iter()
        .map(|&k| {
            let sig: Vec<f64> = pairs.iter().map(|p| p.1.powi(k)).collect();
            let s: Vec<f64> = pairs.iter().map(|p| p.0.powi(k)).collect();
            (
                k as u32,
                EstimateWithError::from_samples(&sig),
                EstimateWithError::from_samples(&s),
            )
        })
        .collect();
    Ok(GlobalFtCheck {
        exp_minus_s: EstimateWithError::exp_mean(&neg_s),
        exp_minus_sigma: EstimateWithError::exp_mean(&neg_sigma),
        moments,
    })
}

/// Fluctuation theorems for the heat with final (and initial) outcomes averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedFtCheck {
    /// Per initial outcome `n`: `Σ_m P[m|v,n] e^{−φ}` against `⟨e^{−Σ_r β_r Q_r}|n,v⟩`.
    pub m_summed: Vec<(usize, f64, EstimateWithError)>,
    /// `Σ_{n,m} p_n P[m|v,n] e^{−φ}` against `⟨e^{−Σ_r β_r Q_r}|v⟩`.
    pub nm_summed: (f64, EstimateWithError),
    /// `Σ_r β_r ⟨Q_r|v⟩` against `Σ_{n,m} p_n P[m|v,n] φ`.
    pub heat_inequality: (EstimateWithError, f64),
}

impl AveragedFtCheck {
    pub fn passes(&self) -> bool {
        self.m_summed
            .iter()
            .all(|(_, lhs, est)| est.z_score(*lhs) <= SE_SLACK)
            && self.nm_summed.1.z_score(self.nm_summed.0) <= SE_SLACK
            && self.heat_inequality.0.mean + SE_SLACK * self.heat_inequality.0.std_error
                >= self.heat_inequality.1
    }
}

struct OutcomeBranch<'a, T: Real> {
    probability: f64,
    phi: f64,
    gamma: VisibleRecord<T>,
    sampler: HiddenSampler<'a, T>,
}

/// Averaged fluctuation theorems for the visible jumps `v_events`, for the
/// initial outcome `initial` (or every outcome when `None`).
pub fn check_averaged_fts<T: Real>(
    v_events: &[JumpEvent<T>],
    initial: Option<usize>,
    samples: usize,
    ctx: &TrajectoryContext<T>,
    seed: u64,
    options: SamplerOptions,
) -> Result<AveragedFtCheck> {
    if samples < 2 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: "need at least 2".into(),
        });
    }
    let d = ctx.dim();
    let tau = ctx.tau();
    // Per n: the conditional distribution of m and a sampler per (n, m).
    let mut branches: Vec<Vec<OutcomeBranch<T>>> = Vec::with_capacity(d);
    for n in 0..d {
        let mut per_m = Vec::new();
        if ctx.initial_probability(n) > T::zero() {
            let logs: Vec<(usize, T)> = (0..d)
                .map(|m| {
                    Ok((
                        m,
                        log_path_probability_visible(
                            &Record::new(n, v_events.to_vec(), m, tau),
                            ctx,
                        )?,
                    ))
                })
                .collect::<Result<_>>()?;
            let finite: Vec<f64> = logs.iter().map(|(_, l)| l.as_f64()).collect();
            let norm = crate::scalar::log_sum_exp(finite.iter().copied());
            for (m, l) in logs {
                if !l.is_finite_value() || !norm.is_finite() {
                    continue;
                }
                let gamma = Record::new(n, v_events.to_vec(), m, tau);
                let phi = sigma_estimator(&gamma, ctx)?
                    .phi
                    .map(|x| x.as_f64())
                    .unwrap_or(f64::NAN);
                let sampler = HiddenSampler::new(&gamma, ctx, options)?;
                per_m.push(OutcomeBranch {
                    probability: (l.as_f64() - norm).exp(),
                    phi,
                    gamma,
                    sampler,
                });
            }
        }
        branches.push(per_m);
    }
    let draw = |n: usize, rng: &mut rand_chacha::ChaCha20Rng| -> Result<f64> {
        let weights: Vec<f64> = branches[n].iter().map(|b| b.probability).collect();
        let j = crate::trajectories::sample_index(&weights, rng).ok_or_else(|| {
            Error::ZeroProbability(format!(
                "initial outcome {n} with visible jumps {}",
                v_events.len()
            ))
        })?;
        let b = &branches[n][j];
        let h = b.sampler.sample(rng)?;
        let full = merge(&b.gamma, &h.hidden)?;
        Ok(entropy_production(&full, ctx)?
            .entropy_flow(&ctx.model)
            .as_f64())
    };
    let targets: Vec<usize> = match initial {
        Some(n) => vec![n],
        None => (0..d).filter(|&n| !branches[n].is_empty()).collect(),
    };
    let mut m_summed = Vec::new();
    for &n in &targets {
        if branches.get(n).map_or(true, |b| b.is_empty()) {
            return Err(Error::ZeroProbability(format!("initial outcome {n}")));
        }
        let lhs: f64 = branches[n]
            .iter()
            .map(|b| b.probability * (-b.phi).exp())
            .sum();
        let flows: Vec<f64> = (0..samples)
            .into_par_iter()
            .map(|i| draw(n, &mut stream_rng(seed, ((n as u64 + 1) << 32) | i as u64)))
            .collect::<Result<_>>()?;
        let neg: Vec<f64> = flows.iter().map(|f| -f).collect();
        m_summed.push((n, lhs, EstimateWithError::exp_mean(&neg)));
    }
    let p_n: Vec<f64> = (0..d)
        .map(|n| {
            if branches[n].is_empty() {
                0.0
            } else {
                ctx.initial_probability(n).as_f64()
            }
        })
        .collect();
    let flows: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let n = crate::trajectories::sample_index(&p_n, &mut rng)
                .ok_or_else(|| Error::ZeroProbability("visible jumps".into()))?;
            draw(n, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mass: f64 = p_n.iter().sum();
    let (mut lhs_exp, mut lhs_phi) = (0.0, 0.0);
    for (n, per_m) in branches.iter().enumerate() {
        for b in per_m {
            lhs_exp += p_n[n] / mass * b.probability * (-b.phi).exp();
            lhs_phi += p_n[n] / mass * b.probability * b.phi;
        }
    }
    let neg: Vec<f64> = flows.iter().map(|f| -f).collect();
    Ok(AveragedFtCheck {
        m_summed,
        nm_summed: (lhs_exp, EstimateWithError::exp_mean(&neg)),
        heat_inequality: (EstimateWithError::from_samples(&flows), lhs_phi),
    })
}

/// A visible record drawn from the forward process.
pub fn sample_visible_record<T: Real, R: Rng + ?Sized>(
    ctx: &TrajectoryContext<T>,
    rng: &mut R,
) -> Result<VisibleRecord<T>> {
    let s = sample_ideal_trajectory(ctx, rng);
    Ok(coarse_grain(&s.record, &ctx.model, rng)?.0)
}
