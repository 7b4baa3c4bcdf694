//! Exact enumeration of a discrete-time measurement scheme.
//!
//! Each bin of width `dt` applies one of the operators
//!
//! ```text
//! M₀  = V (1 − dt Σ L†L)^{1/2} V,   X_k = √dt V L_k V,   V = e^{−iH dt/2}
//! ```
//!
//! with `H` taken at the bin midpoint; a jump is visible with probability
//! `η_k`. The set is exactly complete, and the same construction on the
//! reversed model is exactly micro-reversible, so discrete records obey the
//! fluctuation theorems to rounding error.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Complex, SymmetricEigen};

use crate::error::{Error, Result};
use crate::operators::{MeasurementBasis, Model};
use crate::records::{
    format_significant, FullRecord, HiddenRecord, JumpEvent, Record, VisibleRecord,
};
use crate::scalar::{cr, norm_sqr, trace_re, ComplexMatrix, ComplexVector, Real};
use crate::trajectories::TrajectoryContext;

/// Leaf budget of [`enumerate_discrete`].
pub const MAX_LEAVES: u128 = 10_000_000;

/// Uniform partition of `[0, τ]` into `bins` bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteGrid<T> {
    pub bins: usize,
    pub dt: T,
}

impl<T: Real> DiscreteGrid<T> {
    pub fn new(bins: usize, tau: T) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidParameter {
                name: "bins",
                reason: "must be at least 1".into(),
            });
        }
        if !(tau > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: "must be positive".into(),
            });
        }
        Ok(DiscreteGrid {
            bins,
            dt: tau / T::lit(bins as f64),
        })
    }

    pub fn tau(&self) -> T {
        self.dt * T::lit(self.bins as f64)
    }

    /// Continuous time assigned to a jump in bin `b`.
    pub fn midpoint(&self, b: usize) -> T {
        self.dt * (T::lit(b as f64) + T::lit(0.5))
    }
}

/// What was registered in one bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOutcome {
    Quiet,
    Visible(usize),
    Hidden(usize),
}

/// Bin operators before the efficiency split.
#[derive(Debug, Clone)]
struct BinKraus<T: Real> {
    no_jump: ComplexMatrix<T>,
    jumps: Vec<ComplexMatrix<T>>,
}

fn psd_sqrt<T: Real>(a: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let eig = SymmetricEigen::new((a + a.adjoint()) * cr(T::lit(0.5)));
    let d = a.nrows();
    let mut out = ComplexMatrix::<T>::zeros(d, d);
    for i in 0..d {
        let v = eig.eigenvectors.column(i);
        let l = eig.eigenvalues[i];
        let s = if l > T::zero() { l.sqrt() } else { T::zero() };
        out += v * v.adjoint() * cr(s);
    }
    out
}

fn grid_kraus<T: Real>(model: &Model<T>, start: T, dt: T) -> Result<BinKraus<T>> {
    let d = model.dim;
    let mid = start + dt * T::lit(0.5);
    let h = &model.protocol.segments[model.protocol.segment_at(mid)].hamiltonian;
    let v = (h * Complex::new(T::zero(), -dt * T::lit(0.5))).exp();
    let decay = model.total_decay();
    let largest = SymmetricEigen::new(decay.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    let load = dt * largest;
    if load > T::one() {
        return Err(Error::GridTooCoarse(load.as_f64()));
    }
    let root = psd_sqrt(&(ComplexMatrix::<T>::identity(d, d) - decay * cr(dt)));
    let no_jump = &v * root * &v;
    let jumps = model
        .channels
        .iter()
        .map(|ch| &v * &ch.matrix * &v * cr(dt.sqrt()))
        .collect();
    Ok(BinKraus { no_jump, jumps })
}

/// Initial outcome, visible outcome per bin and final outcome.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VisibleKey {
    pub initial: usize,
    pub visible: Vec<Option<usize>>,
    pub final_outcome: usize,
}

impl VisibleKey {
    /// Continuous visible record with jumps at bin midpoints.
    pub fn to_record<T: Real>(&self, grid: &DiscreteGrid<T>) -> VisibleRecord<T> {
        let events = self
            .visible
            .iter()
            .enumerate()
            .filter_map(|(b, k)| {
                k.map(|channel| JumpEvent {
                    time: grid.midpoint(b),
                    channel,
                })
            })
            .collect();
        Record::new(self.initial, events, self.final_outcome, grid.tau())
    }

    pub fn visible_jumps(&self) -> usize {
        self.visible.iter().filter(|k| k.is_some()).count()
    }
}

/// One fully resolved discrete record.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLeaf<T> {
    pub initial: usize,
    pub outcomes: Vec<BinOutcome>,
    pub final_outcome: usize,
    pub probability: T,
    /// `None` when an endpoint probability vanishes.
    pub s_tot: Option<T>,
    /// `Q_r` per reservoir, in the order of [`Enumeration::reservoirs`].
    pub heat: Vec<T>,
}

impl<T: Real> DiscreteLeaf<T> {
    pub fn visible_key(&self) -> VisibleKey {
        VisibleKey {
            initial: self.initial,
            visible: self
                .outcomes
                .iter()
                .map(|o| {
                    if let BinOutcome::Visible(k) = o {
                        Some(*k)
                    } else {
                        None
                    }
                })
                .collect(),
            final_outcome: self.final_outcome,
        }
    }

    pub fn hidden_record(&self, grid: &DiscreteGrid<T>) -> HiddenRecord<T> {
        HiddenRecord {
            events: self
                .outcomes
                .iter()
                .enumerate()
                .filter_map(|(b, o)| match o {
                    BinOutcome::Hidden(k) => Some(JumpEvent {
                        time: grid.midpoint(b),
                        channel: *k,
                    }),
                    _ => None,
                })
                .collect(),
        }
    }

    pub fn full_record(&self, grid: &DiscreteGrid<T>) -> FullRecord<T> {
        let events = self
            .outcomes
            .iter()
            .enumerate()
            .filter_map(|(b, o)| match o {
                BinOutcome::Visible(k) | BinOutcome::Hidden(k) => Some(JumpEvent {
                    time: grid.midpoint(b),
                    channel: *k,
                }),
                BinOutcome::Quiet => None,
            })
            .collect();
        Record::new(self.initial, events, self.final_outcome, grid.tau())
    }

    pub fn hidden_jumps(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, BinOutcome::Hidden(_)))
            .count()
    }
}

/// Exact conditional moments of one visible record.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary<T> {
    /// `P(γ)`.
    pub probability: T,
    /// `⟨e^{−S_tot}|γ⟩`.
    pub exp_minus_s: T,
    /// `⟨S_tot^k|γ⟩` for `k = 1, 2, 4`.
    pub s_moments: [T; 3],
    /// `⟨Q_r|γ⟩`.
    pub heat: Vec<T>,
    /// Mean number of hidden jumps.
    pub hidden_jumps: T,
}

/// Filtered-state closed form of the conditional heat for `(n, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredHeat<T> {
    /// Visible contribution plus expected hidden contribution, per reservoir.
    pub heat: Vec<T>,
    /// `P[m|v,n]` for every final outcome.
    pub final_given_visible: Vec<T>,
}

/// All discrete records of a model, with the bin operators needed to
/// evaluate visible path probabilities independently.
#[derive(Debug, Clone)]
pub struct Enumeration<T: Real> {
    pub grid: DiscreteGrid<T>,
    pub leaves: Vec<DiscreteLeaf<T>>,
    pub total_mass: T,
    pub truncated_mass: T,
    pub initial_basis: MeasurementBasis<T>,
    /// Eigenbasis of the discretely evolved state.
    pub final_basis: MeasurementBasis<T>,
    pub reservoirs: Vec<usize>,
    model: Model<T>,
    reversed: Model<T>,
    forward_bins: Vec<BinKraus<T>>,
    /// Reversed-time order: entry `b` covers reversed time `[b dt, (b+1) dt]`.
    backward_bins: Vec<BinKraus<T>>,
}

fn leaf_count(channels: usize, bins: usize, dim: usize) -> u128 {
    let branch = (1 + 2 * channels) as u128;
    let mut total: u128 = (dim * dim) as u128;
    for _ in 0..bins {
        total = total.saturating_mul(branch);
    }
    total
}

/// Trace-preserving bin channel `σ ↦ M₀σM₀† + Σ_k X_kσX_k†`.
fn apply_channel<T: Real>(bin: &BinKraus<T>, sigma: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let mut out = &bin.no_jump * sigma * bin.no_jump.adjoint();
    for x in &bin.jumps {
        out += x * sigma * x.adjoint();
    }
    out
}

/// Every record of the discrete scheme on `grid`, pruning those with more
/// than `max_jumps` jumps (pruned probability is reported as `truncated_mass`).
pub fn enumerate_discrete<T: Real>(
    ctx: &TrajectoryContext<T>,
    grid: DiscreteGrid<T>,
    max_jumps: usize,
) -> Result<Enumeration<T>> {
    let model = &ctx.model;
    let d = model.dim;
    let tau = model.tau();
    if (grid.tau() - tau).abs() > T::tol(1e-9) * (T::one() + tau) {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!(
                "covers {} but protocol lasts {}",
                grid.tau().as_f64(),
                tau.as_f64()
            ),
        });
    }
    let leaves_needed = leaf_count(model.channels.len(), grid.bins, d);
    if leaves_needed > MAX_LEAVES {
        return Err(Error::EnumerationBudgetExceeded {
            leaves: leaves_needed,
            limit: MAX_LEAVES,
        });
    }
    let reversed = model.reversed();
    let forward_bins = (0..grid.bins)
        .map(|b| grid_kraus(model, grid.dt * T::lit(b as f64), grid.dt))
        .collect::<Result<Vec<_>>>()?;
    let backward_bins = (0..grid.bins)
        .map(|b| grid_kraus(&reversed, grid.dt * T::lit(b as f64), grid.dt))
        .collect::<Result<Vec<_>>>()?;

    let mut rho = ctx.initial_basis.density();
    for bin in &forward_bins {
        rho = apply_channel(bin, &rho);
    }
    let final_basis = MeasurementBasis::from_density(&((&rho + rho.adjoint()) * cr(T::lit(0.5))))?;
    let reservoirs: Vec<usize> = model.beta.keys().copied().collect();

    let mut state = EnumState {
        model,
        bins: &forward_bins,
        final_basis: &final_basis,
        initial_basis: &ctx.initial_basis,
        reservoirs: &reservoirs,
        max_jumps,
        leaves: Vec::new(),
        truncated: T::zero(),
        outcomes: Vec::with_capacity(grid.bins),
    };
    for n in 0..d {
        let p_n = ctx.initial_probability(n);
        if !(p_n > T::zero()) {
            continue;
        }
        state.descend(n, p_n, ctx.initial_basis.vectors[n].clone(), 0);
    }
    let EnumState {
        leaves, truncated, ..
    } = state;
    let total_mass = leaves.iter().fold(truncated, |a, l| a + l.probability);
    Ok(Enumeration {
        grid,
        leaves,
        total_mass,
        truncated_mass: truncated,
        initial_basis: ctx.initial_basis.clone(),
        final_basis,
        reservoirs,
        model: model.clone(),
        reversed,
        forward_bins,
        backward_bins,
    })
}

struct EnumState<'a, T: Real> {
    model: &'a Model<T>,
    bins: &'a [BinKraus<T>],
    final_basis: &'a MeasurementBasis<T>,
    initial_basis: &'a MeasurementBasis<T>,
    reservoirs: &'a [usize],
    max_jumps: usize,
    leaves: Vec<DiscreteLeaf<T>>,
    truncated: T,
    outcomes: Vec<BinOutcome>,
}

impl<T: Real> EnumState<'_, T> {
    fn descend(&mut self, n: usize, p_n: T, psi: ComplexVector<T>, jumps: usize) {
        let b = self.outcomes.len();
        if b == self.bins.len() {
            self.emit(n, p_n, &psi);
            return;
        }
        let bin = &self.bins[b];
        self.outcomes.push(BinOutcome::Quiet);
        self.descend(n, p_n, &bin.no_jump * &psi, jumps);
        self.outcomes.pop();
        for (k, ch) in self.model.channels.iter().enumerate() {
            let jumped = &bin.jumps[k] * &psi;
            for (outcome, weight) in [
                (BinOutcome::Visible(k), ch.efficiency),
                (BinOutcome::Hidden(k), T::one() - ch.efficiency),
            ] {
                if !(weight > T::zero()) {
                    continue;
                }
                let next = &jumped * cr(weight.sqrt());
                if jumps + 1 > self.max_jumps {
                    self.truncated += p_n * norm_sqr(&next);
                    continue;
                }
                self.outcomes.push(outcome);
                self.descend(n, p_n, next, jumps + 1);
                self.outcomes.pop();
            }
        }
    }

    fn emit(&mut self, n: usize, p_n: T, psi: &ComplexVector<T>) {
        let mut flux = T::zero();
        let mut heat = vec![T::zero(); self.reservoirs.len()];
        for o in &self.outcomes {
            if let BinOutcome::Visible(k) | BinOutcome::Hidden(k) = o {
                let ch = &self.model.channels[*k];
                flux += ch.entropy_flux;
                if let Some(r) = self.reservoirs.iter().position(|&r| r == ch.reservoir) {
                    heat[r] += ch.entropy_flux / self.model.beta_of(ch.reservoir);
                }
            }
        }
        for m in 0..self.final_basis.dim() {
            let amp = self.final_basis.vectors[m].dotc(psi);
            let probability = p_n * amp.norm_sqr();
            let p_m = self.final_basis.probabilities[m];
            let s_tot = if p_m > T::zero() && self.initial_basis.probabilities[n] > T::zero() {
                Some(p_n.ln() - p_m.ln() + flux)
            } else {
                None
            };
            self.leaves.push(DiscreteLeaf {
                initial: n,
                outcomes: self.outcomes.clone(),
                final_outcome: m,
                probability,
                s_tot,
                heat: heat.clone(),
            });
        }
    }
}

impl<T: Real> Enumeration<T> {
    fn split_weight(model: &Model<T>, k: usize, visible: bool) -> T {
        let eta = model.channels[k].efficiency;
        if visible {
            eta
        } else {
            T::one() - eta
        }
    }

    /// `ln P(γ)` from the bin superoperators `𝒩_bin` and `𝒥_bin`.
    pub fn log_visible_probability(&self, key: &VisibleKey) -> T {
        let v = &self.initial_basis.vectors[key.initial];
        let out = &self.final_basis.vectors[key.final_outcome];
        let p = self.initial_basis.probabilities[key.initial];
        log_visible_chain(
            &self.model,
            &self.forward_bins,
            key.visible.iter().copied(),
            v,
            out,
            p,
        )
    }

    /// `ln P̃(γ̃)` from the reversed bin superoperators.
    pub fn log_visible_probability_reversed(&self, key: &VisibleKey) -> T {
        let v = self
            .model
            .time_reverse_vector(&self.final_basis.vectors[key.final_outcome]);
        let out = self
            .model
            .time_reverse_vector(&self.initial_basis.vectors[key.initial]);
        let p = self.final_basis.probabilities[key.final_outcome];
        log_visible_chain(
            &self.reversed,
            &self.backward_bins,
            key.visible.iter().rev().copied(),
            &v,
            &out,
            p,
        )
    }

    /// `Σ = ln P(γ) − ln P̃(γ̃)`.
    pub fn sigma(&self, key: &VisibleKey) -> Result<T> {
        let a = self.log_visible_probability(key);
        let b = self.log_visible_probability_reversed(key);
        if !a.is_finite_value() {
            return Err(Error::ZeroProbability(format!("{key:?}")));
        }
        if !b.is_finite_value() {
            return Err(Error::Divergent {
                record: format!("{key:?}"),
                reason: "reversed visible probability vanishes".into(),
            });
        }
        Ok(a - b)
    }

    /// `ln ℙ̃(Γ̃)` of a leaf, visible and hidden labels kept.
    pub fn log_reversed_leaf_probability(&self, leaf: &DiscreteLeaf<T>) -> T {
        let mut psi = self
            .model
            .time_reverse_vector(&self.final_basis.vectors[leaf.final_outcome]);
        let out = self
            .model
            .time_reverse_vector(&self.initial_basis.vectors[leaf.initial]);
        for (bin, o) in self.backward_bins.iter().zip(leaf.outcomes.iter().rev()) {
            psi = match *o {
                BinOutcome::Quiet => &bin.no_jump * psi,
                BinOutcome::Visible(k) => {
                    &bin.jumps[k] * psi * cr(Self::split_weight(&self.reversed, k, true).sqrt())
                }
                BinOutcome::Hidden(k) => {
                    &bin.jumps[k] * psi * cr(Self::split_weight(&self.reversed, k, false).sqrt())
                }
            };
        }
        let p = self.final_basis.probabilities[leaf.final_outcome] * out.dotc(&psi).norm_sqr();
        if p > T::zero() {
            p.ln()
        } else {
            T::neg_infinity()
        }
    }

    /// Exact conditional moments for every visible record of positive probability.
    pub fn summaries(&self) -> BTreeMap<VisibleKey, OracleSummary<T>> {
        let mut map: BTreeMap<VisibleKey, OracleSummary<T>> = BTreeMap::new();
        let r = self.reservoirs.len();
        for leaf in &self.leaves {
            if !(leaf.probability > T::zero()) {
                continue;
            }
            let e = map
                .entry(leaf.visible_key())
                .or_insert_with(|| OracleSummary {
                    probability: T::zero(),
                    exp_minus_s: T::zero(),
                    s_moments: [T::zero(); 3],
                    heat: vec![T::zero(); r],
                    hidden_jumps: T::zero(),
                });
            let p = leaf.probability;
            e.probability += p;
            if let Some(s) = leaf.s_tot {
                e.exp_minus_s += p * (-s).exp();
                e.s_moments[0] += p * s;
                e.s_moments[1] += p * s * s;
                e.s_moments[2] += p * s * s * s * s;
            }
            for (acc, q) in e.heat.iter_mut().zip(&leaf.heat) {
                *acc += p * *q;
            }
            e.hidden_jumps += p * T::lit(leaf.hidden_jumps() as f64);
        }
        for e in map.values_mut() {
            let p = e.probability;
            e.exp_minus_s /= p;
            for x in e.s_moments.iter_mut() {
                *x /= p;
            }
            for q in e.heat.iter_mut() {
                *q /= p;
            }
            e.hidden_jumps /= p;
        }
        map
    }

    /// `⟨Q_r|v,n⟩`: conditional heat with the final outcome summed over.
    pub fn heat_given_visible_and_initial(&self) -> BTreeMap<(usize, Vec<Option<usize>>), Vec<T>> {
        let mut acc: BTreeMap<(usize, Vec<Option<usize>>), (T, Vec<T>)> = BTreeMap::new();
        for leaf in &self.leaves {
            let key = leaf.visible_key();
            let e = acc
                .entry((key.initial, key.visible))
                .or_insert_with(|| (T::zero(), vec![T::zero(); self.reservoirs.len()]));
            e.0 += leaf.probability;
            for (a, q) in e.1.iter_mut().zip(&leaf.heat) {
                *a += leaf.probability * *q;
            }
        }
        acc.into_iter()
            .filter(|(_, (p, _))| *p > T::zero())
            .map(|(k, (p, q))| (k, q.into_iter().map(|x| x / p).collect()))
            .collect()
    }

    /// Closed form of the conditional heat on the grid: visible fluxes plus
    /// hidden-jump probabilities evaluated on the filtered state.
    pub fn filtered_heat(
        &self,
        initial: usize,
        visible: &[Option<usize>],
    ) -> Result<FilteredHeat<T>> {
        if visible.len() != self.grid.bins {
            return Err(Error::DimensionMismatch {
                expected: self.grid.bins,
                found: visible.len(),
            });
        }
        let model = &self.model;
        let mut sigma = self.initial_basis.projector(initial);
        let mut heat = vec![T::zero(); self.reservoirs.len()];
        let reservoir_slot = |k: usize| {
            self.reservoirs
                .iter()
                .position(|&r| r == model.channels[k].reservoir)
        };
        for (bin, v) in self.forward_bins.iter().zip(visible) {
            let next = match *v {
                Some(k) => {
                    let ch = &model.channels[k];
                    if let Some(r) = reservoir_slot(k) {
                        heat[r] += ch.entropy_flux / model.beta_of(ch.reservoir);
                    }
                    &bin.jumps[k] * &sigma * bin.jumps[k].adjoint() * cr(ch.efficiency)
                }
                None => {
                    let mut out = &bin.no_jump * &sigma * bin.no_jump.adjoint();
                    let mut hidden = Vec::with_capacity(model.channels.len());
                    for (x, ch) in bin.jumps.iter().zip(&model.channels) {
                        let part = x * &sigma * x.adjoint() * cr(T::one() - ch.efficiency);
                        hidden.push(trace_re(&part));
                        out += part;
                    }
                    let tr = trace_re(&out);
                    if tr > T::zero() {
                        for (k, h) in hidden.into_iter().enumerate() {
                            let ch = &model.channels[k];
                            if let Some(r) = reservoir_slot(k) {
                                heat[r] += h / tr * ch.entropy_flux / model.beta_of(ch.reservoir);
                            }
                        }
                    }
                    out
                }
            };
            let tr = trace_re(&next);
            if !(tr > T::zero()) {
                return Err(Error::ZeroProbability(format!(
                    "initial {initial}, visible {visible:?}"
                )));
            }
            sigma = next / cr(tr);
        }
        let final_given_visible = self
            .final_basis
            .vectors
            .iter()
            .map(|v| v.dotc(&(&sigma * v)).re)
            .collect();
        Ok(FilteredHeat {
            heat,
            final_given_visible,
        })
    }

    /// Leaves as CSV: `record, probability, S_tot, Q_r..., visible_key`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("record,probability,S_tot");
        for r in &self.reservoirs {
            let _ = write!(out, ",Q_{r}");
        }
        out.push_str(",visible_key\n");
        for leaf in &self.leaves {
            let s = leaf
                .s_tot
                .map(|s| format_significant(s.as_f64()))
                .unwrap_or_else(|| "nan".into());
            let _ = write!(
                out,
                "{},{},{}",
                leaf.full_record(&self.grid),
                format_significant(leaf.probability.as_f64()),
                s
            );
            for q in &leaf.heat {
                let _ = write!(out, ",{}", format_significant(q.as_f64()));
            }
            let _ = writeln!(out, ",{}", leaf.visible_key().to_record(&self.grid));
        }
        out
    }
}

fn log_visible_chain<T: Real>(
    model: &Model<T>,
    bins: &[BinKraus<T>],
    visible: impl Iterator<Item = Option<usize>>,
    start: &ComplexVector<T>,
    out: &ComplexVector<T>,
    weight: T,
) -> T {
    if !(weight > T::zero()) {
        return T::neg_infinity();
    }
    let mut sigma = start * start.adjoint();
    let mut log = weight.ln();
    for (bin, v) in bins.iter().zip(visible) {
        sigma = match v {
            Some(k) => {
                &bin.jumps[k] * &sigma * bin.jumps[k].adjoint() * cr(model.channels[k].efficiency)
            }
            None => {
                let mut acc = &bin.no_jump * &sigma * bin.no_jump.adjoint();
                for (x, ch) in bin.jumps.iter().zip(&model.channels) {
                    acc += x * &sigma * x.adjoint() * cr(T::one() - ch.efficiency);
                }
                acc
            }
        };
        let tr = trace_re(&sigma);
        if !(tr > T::zero()) {
            return T::neg_infinity();
        }
        log += tr.ln();
        sigma /= cr(tr);
    }
    let p = out.dotc(&(&sigma * out)).re;
    if p > T::zero() {
        log + p.ln()
    } else {
        T::neg_infinity()
    }
}

/// `P(h|γ)` for the discrete visible record `key`.
pub fn oracle_conditional_distribution<T: Real>(
    key: &VisibleKey,
    enumeration: &Enumeration<T>,
) -> Result<Vec<(HiddenRecord<T>, T)>> {
    let matching: Vec<&DiscreteLeaf<T>> = enumeration
        .leaves
        .iter()
        .filter(|l| &l.visible_key() == key)
        .collect();
    let total = matching.iter().fold(T::zero(), |a, l| a + l.probability);
    if !(total > T::zero()) {
        return Err(Error::ZeroProbability(format!("{key:?}")));
    }
    Ok(matching
        .into_iter()
        .filter(|l| l.probability > T::zero())
        .map(|l| (l.hidden_record(&enumeration.grid), l.probability / total))
        .collect())
}
