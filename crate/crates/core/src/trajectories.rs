//! Quantum-jump trajectories: the ideal Monte Carlo wave-function sampler,
//! coarse-graining into visible and hidden jumps, the conditional state of an
//! imperfectly monitored record, and exact path probabilities (log-space).

use nalgebra::{Complex, ComplexField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::{MeasurementBasis, Model};
use crate::propagators::{check_density, lindblad_propagate, steady_state, Propagators};
use crate::records::{FullRecord, HiddenRecord, JumpEvent, Record, VisibleRecord};
use crate::scalar::{cr, norm_sqr, trace_re, ComplexMatrix, ComplexVector, Real};

/// Number of dyadic refinement levels used to locate a jump time.
const BISECTION_LEVELS: usize = 52;

/// Deterministic per-trajectory random stream derived from `(seed, index)`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws an index with probability proportional to `weights`.
pub(crate) fn sample_index<T: Real, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> Option<usize> {
    let total = weights.iter().fold(0.0, |a, w| a + w.as_f64());
    if !(total > 0.0) {
        return None;
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, w) in weights.iter().enumerate() {
        let w = w.as_f64();
        if w > 0.0 {
            acc += w;
            last = Some(i);
            if u < acc {
                return Some(i);
            }
        }
    }
    last
}

/// Dyadic no-jump propagator tables, one per protocol segment.
#[derive(Debug, Clone)]
pub(crate) struct JumpEngine<T: Real> {
    /// `(step, exp(G_s · step))` with `step = T_s / 2^j`, `j = 1..`.
    tables: Vec<Vec<(T, ComplexMatrix<T>)>>,
}

/// What the jump callback asks the engine to do next.
pub(crate) enum JumpAction {
    Continue,
    Abort,
}

impl<T: Real> JumpEngine<T> {
    pub(crate) fn new(prop: &Propagators<T>) -> Self {
        let tables = (0..prop.segment_count())
            .map(|s| {
                let (a, b) = prop.segment_bounds(s);
                let mut step = b - a;
                (0..BISECTION_LEVELS)
                    .map(|_| {
                        step *= T::lit(0.5);
                        (step, (prop.no_jump_generator(s) * cr(step)).exp())
                    })
                    .collect()
            })
            .collect();
        JumpEngine { tables }
    }

    /// Runs the jump process on `[t_a, t_b]` starting from normalized `psi`.
    ///
    /// A jump happens when the squared norm of the no-jump evolved state
    /// falls to a uniform threshold; its time is located by dyadic descent and
    /// its channel drawn with weights `‖L_k ψ‖²`. Returns `false` if the
    /// callback aborted; on success `psi` is the normalized state at `t_b`.
    pub(crate) fn run<R: Rng + ?Sized>(
        &self,
        prop: &Propagators<T>,
        psi: &mut ComplexVector<T>,
        t_a: T,
        t_b: T,
        rng: &mut R,
        mut on_jump: impl FnMut(T, usize, &mut R) -> JumpAction,
    ) -> bool {
        let model = &prop.model;
        let mut alpha = T::lit(rng.gen::<f64>());
        let mut t = t_a;
        let mut last_jump: Option<T> = None;
        let mut weights = vec![T::zero(); model.channels.len()];
        while t < t_b {
            let s = model.protocol.segment_at(t);
            let (_, seg_end) = prop.segment_bounds(s);
            let limit = if s + 1 == prop.segment_count() || t_b < seg_end {
                t_b
            } else {
                seg_end
            };
            let full = (prop.no_jump_generator(s) * cr(limit - t)).exp() * &*psi;
            if norm_sqr(&full) > alpha {
                *psi = full;
                t = limit;
                continue;
            }
            for (step, u) in &self.tables[s] {
                if t + *step <= limit {
                    let cand = u * &*psi;
                    if norm_sqr(&cand) > alpha {
                        *psi = cand;
                        t += *step;
                    }
                }
            }
            if let Some(prev) = last_jump {
                if t <= prev {
                    t = prev
                        + self.tables[s]
                            .last()
                            .map(|x| x.0)
                            .unwrap_or_else(T::default_epsilon);
                }
            }
            for (w, ch) in weights.iter_mut().zip(&model.channels) {
                *w = norm_sqr(&(&ch.matrix * &*psi));
            }
            let Some(k) = sample_index(&weights, rng) else {
                // No channel can fire: the norm cannot have decayed; treat as survival.
                alpha = T::zero();
                continue;
            };
            let jumped = &model.channels[k].matrix * &*psi;
            let n = norm_sqr(&jumped).sqrt();
            *psi = jumped / cr(n);
            last_jump = Some(t);
            if let JumpAction::Abort = on_jump(t, k, rng) {
                return false;
            }
            alpha = T::lit(rng.gen::<f64>());
        }
        let n = norm_sqr(psi).sqrt();
        if n > T::zero() {
            *psi /= cr(n);
        }
        true
    }
}

/// Model, cached propagators and the two projective measurements.
#[derive(Debug, Clone)]
pub struct TrajectoryContext<T: Real> {
    pub model: Model<T>,
    pub forward: Propagators<T>,
    /// Propagators of the time-reversed model.
    pub backward: Propagators<T>,
    pub rho0: ComplexMatrix<T>,
    pub rho_tau: ComplexMatrix<T>,
    pub initial_basis: MeasurementBasis<T>,
    pub final_basis: MeasurementBasis<T>,
    pub(crate) engine: JumpEngine<T>,
}

impl<T: Real> TrajectoryContext<T> {
    /// Initial state `ρ₀ = ρ_ss`; bases are the eigenbases of `ρ₀` and `ρ_τ`.
    pub fn stationary(model: &Model<T>) -> Result<Self> {
        let rho0 = steady_state(model)?;
        Self::from_initial_state(model, rho0)
    }

    /// Bases are the eigenbases of `ρ₀` and of `ρ_τ` obtained from the master equation.
    pub fn from_initial_state(model: &Model<T>, rho0: ComplexMatrix<T>) -> Result<Self> {
        model.ensure_valid()?;
        check_density(&rho0)?;
        let rho_tau = lindblad_propagate(&rho0, model, T::zero(), model.tau())?;
        let initial_basis = MeasurementBasis::from_density(&rho0)?;
        let final_basis = MeasurementBasis::from_density(&rho_tau)?;
        Ok(Self::assemble(
            model,
            rho0,
            rho_tau,
            initial_basis,
            final_basis,
        ))
    }

    /// Explicit measurement bases; the final probabilities must be those of
    /// the evolved initial mixture for the fluctuation theorems to hold.
    pub fn with_bases(
        model: &Model<T>,
        initial_basis: MeasurementBasis<T>,
        final_basis: MeasurementBasis<T>,
    ) -> Result<Self> {
        model.ensure_valid()?;
        initial_basis.validate()?;
        final_basis.validate()?;
        if initial_basis.dim() != model.dim || final_basis.dim() != model.dim {
            return Err(Error::DimensionMismatch {
                expected: model.dim,
                found: initial_basis.dim().min(final_basis.dim()),
            });
        }
        let rho0 = initial_basis.density();
        let rho_tau = lindblad_propagate(&rho0, model, T::zero(), model.tau())?;
        Ok(Self::assemble(
            model,
            rho0,
            rho_tau,
            initial_basis,
            final_basis,
        ))
    }

    fn assemble(
        model: &Model<T>,
        rho0: ComplexMatrix<T>,
        rho_tau: ComplexMatrix<T>,
        initial_basis: MeasurementBasis<T>,
        final_basis: MeasurementBasis<T>,
    ) -> Self {
        let forward = Propagators::new(model);
        let backward = Propagators::new(&model.reversed());
        let engine = JumpEngine::new(&forward);
        TrajectoryContext {
            model: model.clone(),
            forward,
            backward,
            rho0,
            rho_tau,
            initial_basis,
            final_basis,
            engine,
        }
    }

    pub fn tau(&self) -> T {
        self.model.tau()
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    /// `p_n(0)`.
    pub fn initial_probability(&self, n: usize) -> T {
        self.initial_basis.probabilities[n]
    }

    /// `p_m(τ)`.
    pub fn final_probability(&self, m: usize) -> T {
        self.final_basis.probabilities[m]
    }

    /// `Θ|m⟩` of the final basis, the initial state of the reversed process.
    pub fn reversed_initial_vector(&self, m: usize) -> ComplexVector<T> {
        self.model.time_reverse_vector(&self.final_basis.vectors[m])
    }

    /// `Θ|n⟩` of the initial basis, the final outcome of the reversed process.
    pub fn reversed_final_vector(&self, n: usize) -> ComplexVector<T> {
        self.model
            .time_reverse_vector(&self.initial_basis.vectors[n])
    }

    pub(crate) fn check_record(&self, record: &Record<T>) -> Result<()> {
        record.validate(&self.model)
    }
}

/// An ideal record together with the normalized state just before the final measurement.
#[derive(Debug, Clone)]
pub struct IdealSample<T: Real> {
    pub record: FullRecord<T>,
    pub final_state: ComplexVector<T>,
}

/// One trajectory of the perfectly monitored process.
pub fn sample_ideal_trajectory<T: Real, R: Rng + ?Sized>(
    ctx: &TrajectoryContext<T>,
    rng: &mut R,
) -> IdealSample<T> {
    let n = sample_index(&ctx.initial_basis.probabilities, rng).unwrap_or(0);
    let mut psi = ctx.initial_basis.vectors[n].clone();
    let mut events = Vec::new();
    ctx.engine.run(
        &ctx.forward,
        &mut psi,
        T::zero(),
        ctx.tau(),
        rng,
        |time, channel, _| {
            events.push(JumpEvent { time, channel });
            JumpAction::Continue
        },
    );
    let born: Vec<T> = ctx
        .final_basis
        .vectors
        .iter()
        .map(|v| v.dotc(&psi).modulus_squared())
        .collect();
    let m = sample_index(&born, rng).unwrap_or(0);
    IdealSample {
        record: Record::new(n, events, m, ctx.tau()),
        final_state: psi,
    }
}

/// `count` ideal trajectories, trajectory `i` drawn from stream `(seed, i)`.
pub fn sample_ideal_ensemble<T: Real>(
    ctx: &TrajectoryContext<T>,
    count: usize,
    seed: u64,
) -> Vec<IdealSample<T>> {
    (0..count)
        .into_par_iter()
        .map(|i| sample_ideal_trajectory(ctx, &mut stream_rng(seed, i as u64)))
        .collect()
}

/// Marks each jump visible with probability `η_k` of its channel.
pub fn coarse_grain<T: Real, R: Rng + ?Sized>(
    record: &FullRecord<T>,
    model: &Model<T>,
    rng: &mut R,
) -> Result<(VisibleRecord<T>, HiddenRecord<T>)> {
    let mut visible = Vec::new();
    let mut hidden = Vec::new();
    for ev in &record.events {
        let eta = model.channel(ev.channel)?.efficiency.as_f64();
        if rng.gen::<f64>() < eta {
            visible.push(*ev);
        } else {
            hidden.push(*ev);
        }
    }
    Ok((record.with_events(visible), HiddenRecord { events: hidden }))
}

/// Normalized conditional states on a uniform grid over one smooth stretch.
#[derive(Debug, Clone)]
pub struct StatePiece<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<ComplexMatrix<T>>,
}

/// Conditional state `σ_t` of a visible record, split at visible jumps and
/// protocol boundaries so that each piece is smooth in time.
#[derive(Debug, Clone)]
pub struct ConditionalPath<T: Real> {
    pub pieces: Vec<StatePiece<T>>,
}

impl<T: Real> ConditionalPath<T> {
    /// `σ_τ`.
    pub fn final_state(&self) -> &ComplexMatrix<T> {
        self.pieces
            .last()
            .and_then(|p| p.states.last())
            .expect("path has at least one point")
    }

    /// Every `(t, σ_t)` in time order (jump instants appear twice).
    pub fn points(&self) -> impl Iterator<Item = (T, &ComplexMatrix<T>)> {
        self.pieces
            .iter()
            .flat_map(|p| p.times.iter().copied().zip(p.states.iter()))
    }

    /// Composite Simpson integral of `f(σ_t)` over `[0, τ]`.
    pub fn integrate(&self, f: impl Fn(&ComplexMatrix<T>) -> T) -> T {
        let mut total = T::zero();
        for p in &self.pieces {
            let steps = p.times.len() - 1;
            if steps == 0 {
                continue;
            }
            let h = (p.times[steps] - p.times[0]) / T::lit(steps as f64);
            let mut acc = f(&p.states[0]) + f(&p.states[steps]);
            for (i, s) in p.states.iter().enumerate().take(steps).skip(1) {
                acc += f(s) * if i % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
            }
            total += acc * h / T::lit(3.0);
        }
        total
    }
}

/// Threshold below which a visible jump is deemed impossible.
fn impossible_jump_threshold<T: Real>() -> T {
    T::lit(1e-280)
}

/// Filtered state `σ_t` for visible record `gamma`, starting from `Π_n`,
/// with `steps` (rounded up to even) Simpson subintervals per smooth piece.
pub fn evolve_conditional_state<T: Real>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
    steps: usize,
) -> Result<ConditionalPath<T>> {
    ctx.check_record(gamma)?;
    let steps = (steps.max(2) + 1) & !1;
    let prop = &ctx.forward;
    let mut sigma = ctx.initial_basis.projector(gamma.initial);
    let mut breaks: Vec<T> = prop.model.protocol.boundaries();
    breaks.extend(gamma.events.iter().map(|e| e.time));
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    breaks.dedup();
    let mut pieces = Vec::new();
    let mut next_event = 0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        while next_event < gamma.events.len() && gamma.events[next_event].time <= a {
            let ev = gamma.events[next_event];
            sigma = apply_visible_jump(prop, &sigma, ev)?;
            next_event += 1;
        }
        if b <= a {
            continue;
        }
        let s = prop.model.protocol.segment_at(a);
        let h = (b - a) / T::lit(steps as f64);
        let step = prop.hidden_generator(s).exp_scaled(h);
        let mut times = Vec::with_capacity(steps + 1);
        let mut states = Vec::with_capacity(steps + 1);
        times.push(a);
        states.push(sigma.clone());
        for i in 1..=steps {
            let next = step.apply(&sigma)?;
            let tr = trace_re(&next);
            sigma = hermitize(&next) / cr(tr);
            times.push(if i == steps {
                b
            } else {
                a + h * T::lit(i as f64)
            });
            states.push(sigma.clone());
        }
        pieces.push(StatePiece { times, states });
    }
    while next_event < gamma.events.len() {
        let ev = gamma.events[next_event];
        sigma = apply_visible_jump(prop, &sigma, ev)?;
        next_event += 1;
        pieces.push(StatePiece {
            times: vec![ev.time],
            states: vec![sigma.clone()],
        });
    }
    Ok(ConditionalPath { pieces })
}

fn hermitize<T: Real>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    (m + m.adjoint()) * cr(T::lit(0.5))
}

fn apply_visible_jump<T: Real>(
    prop: &Propagators<T>,
    sigma: &ComplexMatrix<T>,
    ev: JumpEvent<T>,
) -> Result<ComplexMatrix<T>> {
    let out = prop.jump(ev.channel)?.apply(sigma)?;
    let tr = trace_re(&out);
    if !(tr > impossible_jump_threshold()) {
        return Err(Error::ImpossibleJump {
            time: ev.time.as_f64(),
            channel: ev.channel,
        });
    }
    Ok(hermitize(&out) / cr(tr))
}

/// `ln |⟨out| U(τ,t_J) L_{k_J} ⋯ L_{k_1} U(t_1,0) |psi0⟩|²` on the given propagators.
fn log_pure_amplitude<T: Real>(
    prop: &Propagators<T>,
    psi0: &ComplexVector<T>,
    events: &[JumpEvent<T>],
    out: &ComplexVector<T>,
) -> Result<T> {
    let mut psi = psi0.clone();
    let mut log = T::zero();
    let mut t = T::zero();
    for ev in events {
        psi = &prop.model.channel(ev.channel)?.matrix * (prop.no_jump(t, ev.time)? * psi);
        let n = norm_sqr(&psi);
        if !(n > T::zero()) {
            return Ok(T::neg_infinity());
        }
        log += n.ln();
        psi /= cr(n.sqrt());
        t = ev.time;
    }
    psi = prop.no_jump(t, prop.tau())? * psi;
    let overlap = out.dotc(&psi).modulus_squared();
    Ok(log + overlap.ln())
}

/// `ln p_n + ln Tr[Π_out 𝒩 ∘ 𝒥_{k_V} ∘ ⋯ ∘ 𝒥_{k_1} ∘ 𝒩 (Π_in)]` on the given propagators.
fn log_visible_trace<T: Real>(
    prop: &Propagators<T>,
    rho_in: ComplexMatrix<T>,
    events: &[JumpEvent<T>],
    out: &ComplexVector<T>,
) -> Result<T> {
    let mut sigma = rho_in;
    let mut log = T::zero();
    let mut t = T::zero();
    for ev in events {
        sigma = prop
            .jump(ev.channel)?
            .apply(&prop.hidden(t, ev.time)?.apply(&sigma)?)?;
        let tr = trace_re(&sigma);
        if !(tr > T::zero()) {
            return Ok(T::neg_infinity());
        }
        log += tr.ln();
        sigma /= cr(tr);
        t = ev.time;
    }
    sigma = prop.hidden(t, prop.tau())?.apply(&sigma)?;
    let p: Complex<T> = out.dotc(&(&sigma * out));
    Ok(log + p.re.ln())
}

fn ln_or_neg_inf<T: Real>(p: T) -> T {
    if p > T::zero() {
        p.ln()
    } else {
        T::neg_infinity()
    }
}

/// `ln ℙ(Γ)`: density of the full record with respect to Lebesgue measure on the jump times.
pub fn log_path_probability_full<T: Real>(
    record: &FullRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<T> {
    ctx.check_record(record)?;
    let psi0 = &ctx.initial_basis.vectors[record.initial];
    let out = &ctx.final_basis.vectors[record.final_outcome];
    Ok(ln_or_neg_inf(ctx.initial_probability(record.initial))
        + log_pure_amplitude(&ctx.forward, psi0, &record.events, out)?)
}

/// `ln ℙ̃(Γ̃)`: reversed protocol and jumps, starting from `Θ|m⟩` with weight `p_m(τ)`.
pub fn log_path_probability_full_reversed<T: Real>(
    record: &FullRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<T> {
    ctx.check_record(record)?;
    let psi0 = ctx.reversed_initial_vector(record.final_outcome);
    let out = ctx.reversed_final_vector(record.initial);
    Ok(ln_or_neg_inf(ctx.final_probability(record.final_outcome))
        + log_pure_amplitude(&ctx.backward, &psi0, &record.reversed_events(), &out)?)
}

/// `ln P(γ)`, hidden jumps marginalized through `𝒩`.
pub fn log_path_probability_visible<T: Real>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<T> {
    ctx.check_record(gamma)?;
    let rho = ctx.initial_basis.projector(gamma.initial);
    let out = &ctx.final_basis.vectors[gamma.final_outcome];
    Ok(ln_or_neg_inf(ctx.initial_probability(gamma.initial))
        + log_visible_trace(&ctx.forward, rho, &gamma.events, out)?)
}

/// `ln P̃(γ̃)` with efficiencies exchanged between paired channels.
pub fn log_path_probability_visible_reversed<T: Real>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<T> {
    ctx.check_record(gamma)?;
    let v = ctx.reversed_initial_vector(gamma.final_outcome);
    let rho = &v * v.adjoint();
    let out = ctx.reversed_final_vector(gamma.initial);
    Ok(ln_or_neg_inf(ctx.final_probability(gamma.final_outcome))
        + log_visible_trace(&ctx.backward, rho, &gamma.reversed_events(), &out)?)
}

/// `ℙ(Γ)`.
pub fn path_probability_full<T: Real>(
    record: &FullRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<T> {
    Ok(log_path_probability_full(record, ctx)?.exp())
}

/// `ℙ̃(Γ̃)`.
pub fn path_probability_full_reversed<T: Real>(
    record: &FullRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<T> {
    Ok(log_path_probability_full_reversed(record, ctx)?.exp())
}

/// `P(γ)`.
pub fn path_probability_visible<T: Real>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<T> {
    Ok(log_path_probability_visible(gamma, ctx)?.exp())
}

/// `P̃(γ̃)`.
pub fn path_probability_visible_reversed<T: Real>(
    gamma: &VisibleRecord<T>,
    ctx: &TrajectoryContext<T>,
) -> Result<T> {
    Ok(log_path_probability_visible_reversed(gamma, ctx)?.exp())
}
