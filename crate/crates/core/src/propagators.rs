//! Deterministic evolution maps.
//!
//! Superoperators act on `d×d` matrices through column-stacking
//! vectorization, `vec(A X B) = (Bᵀ ⊗ A) vec(X)`, used everywhere in the crate.
//! Every map is propagated with exact matrix exponentials per protocol segment.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::operators::{check_square, hermiticity_defect, Channel, Model, POSITIVITY_TOL};
use crate::scalar::{ci, cr, max_abs, trace_re, ComplexMatrix, Real};

/// Linear map on `d×d` matrices stored as a `d²×d²` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator<T: Real> {
    pub dim: usize,
    pub matrix: DMatrix<Complex<T>>,
}

pub fn vectorize<T: Real>(a: &ComplexMatrix<T>) -> DVector<Complex<T>> {
    DVector::from_column_slice(a.as_slice())
}

pub fn unvectorize<T: Real>(v: &DVector<Complex<T>>, dim: usize) -> ComplexMatrix<T> {
    ComplexMatrix::from_column_slice(dim, dim, v.as_slice())
}

impl<T: Real> SuperOperator<T> {
    pub fn identity(dim: usize) -> Self {
        SuperOperator {
            dim,
            matrix: DMatrix::identity(dim * dim, dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        SuperOperator {
            dim,
            matrix: DMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// `X ↦ A X`.
    pub fn left(a: &ComplexMatrix<T>) -> Self {
        let d = a.nrows();
        SuperOperator {
            dim: d,
            matrix: ComplexMatrix::<T>::identity(d, d).kronecker(a),
        }
    }

    /// `X ↦ X B`.
    pub fn right(b: &ComplexMatrix<T>) -> Self {
        let d = b.nrows();
        SuperOperator {
            dim: d,
            matrix: b.transpose().kronecker(&ComplexMatrix::<T>::identity(d, d)),
        }
    }

    /// `X ↦ A X A†`.
    pub fn sandwich(a: &ComplexMatrix<T>) -> Self {
        SuperOperator {
            dim: a.nrows(),
            matrix: a.map(|z| z.conj()).kronecker(a),
        }
    }

    pub fn apply(&self, x: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        check_square(x, self.dim)?;
        Ok(unvectorize(&(&self.matrix * vectorize(x)), self.dim))
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// Hilbert–Schmidt adjoint: `Tr[A† S(X)] = Tr[S†(A)† X]`.
    pub fn adjoint(&self) -> Self {
        SuperOperator {
            dim: self.dim,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix * cr(s),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix + &other.matrix,
        }
    }

    /// `exp(t · self)`.
    pub fn exp_scaled(&self, t: T) -> Self {
        SuperOperator {
            dim: self.dim,
            matrix: (&self.matrix * cr(t)).exp(),
        }
    }
}

/// `−i[H, ·]`.
fn commutator_generator<T: Real>(h: &ComplexMatrix<T>) -> SuperOperator<T> {
    let l = SuperOperator::left(h);
    let r = SuperOperator::right(h);
    SuperOperator {
        dim: h.nrows(),
        matrix: (l.matrix - r.matrix) * ci(-T::one()),
    }
}

/// Lindblad generator `−i[H,·] + Σ_k 𝒟[L_k]`.
pub fn lindblad_generator<T: Real>(
    h: &ComplexMatrix<T>,
    channels: &[Channel<T>],
) -> SuperOperator<T> {
    weighted_generator(h, channels, |_| T::one())
}

/// `−i[H,·] − ½{Σ L†L, ·} + Σ_k w_k L_k · L_k†`.
fn weighted_generator<T: Real>(
    h: &ComplexMatrix<T>,
    channels: &[Channel<T>],
    weight: impl Fn(&Channel<T>) -> T,
) -> SuperOperator<T> {
    let d = h.nrows();
    let mut g = commutator_generator(h);
    let mut decay = ComplexMatrix::<T>::zeros(d, d);
    for ch in channels {
        decay += ch.matrix.adjoint() * &ch.matrix;
        let w = weight(ch);
        if w != T::zero() {
            g.matrix += SuperOperator::sandwich(&ch.matrix).matrix * cr(w);
        }
    }
    let half = cr(T::lit(0.5));
    g.matrix -= (SuperOperator::left(&decay).matrix + SuperOperator::right(&decay).matrix) * half;
    g
}

/// Generator of the no-visible-jump evolution: no-jump drift plus hidden jumps
/// weighted by `1 − η_k`.
pub fn hidden_generator<T: Real>(
    h: &ComplexMatrix<T>,
    channels: &[Channel<T>],
) -> SuperOperator<T> {
    weighted_generator(h, channels, |ch| T::one() - ch.efficiency)
}

/// `−iH − ½ Σ L_k†L_k`, the generator of the no-jump propagator.
pub fn effective_generator<T: Real>(
    h: &ComplexMatrix<T>,
    channels: &[Channel<T>],
) -> ComplexMatrix<T> {
    let d = h.nrows();
    let mut decay = ComplexMatrix::<T>::zeros(d, d);
    for ch in channels {
        decay += ch.matrix.adjoint() * &ch.matrix;
    }
    h * ci(-T::one()) - decay * cr(T::lit(0.5))
}

/// Per-segment generators of a model, built once and shared read-only.
#[derive(Debug, Clone)]
pub struct Propagators<T: Real> {
    pub model: Model<T>,
    boundaries: Vec<T>,
    no_jump: Vec<ComplexMatrix<T>>,
    lindblad: Vec<SuperOperator<T>>,
    hidden: Vec<SuperOperator<T>>,
}

impl<T: Real> Propagators<T> {
    pub fn new(model: &Model<T>) -> Self {
        let segs = &model.protocol.segments;
        Propagators {
            boundaries: model.protocol.boundaries(),
            no_jump: segs
                .iter()
                .map(|s| effective_generator(&s.hamiltonian, &model.channels))
                .collect(),
            lindblad: segs
                .iter()
                .map(|s| lindblad_generator(&s.hamiltonian, &model.channels))
                .collect(),
            hidden: segs
                .iter()
                .map(|s| hidden_generator(&s.hamiltonian, &model.channels))
                .collect(),
            model: model.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    pub fn tau(&self) -> T {
        *self.boundaries.last().unwrap_or(&T::zero())
    }

    pub fn segment_bounds(&self, s: usize) -> (T, T) {
        (self.boundaries[s], self.boundaries[s + 1])
    }

    pub fn segment_count(&self) -> usize {
        self.no_jump.len()
    }

    pub fn no_jump_generator(&self, segment: usize) -> &ComplexMatrix<T> {
        &self.no_jump[segment]
    }

    pub fn lindblad_generator(&self, segment: usize) -> &SuperOperator<T> {
        &self.lindblad[segment]
    }

    pub fn hidden_generator(&self, segment: usize) -> &SuperOperator<T> {
        &self.hidden[segment]
    }

    /// Time-ordered `U(t1, t0)` of the no-jump evolution.
    pub fn no_jump(&self, t0: T, t1: T) -> Result<ComplexMatrix<T>> {
        let d = self.dim();
        let mut u = ComplexMatrix::<T>::identity(d, d);
        for p in self.model.protocol.pieces(t0, t1)? {
            u = (&self.no_jump[p.segment] * cr(p.end - p.start)).exp() * u;
        }
        Ok(u)
    }

    /// `𝒩_{t1,t0}`: no visible jumps, hidden jumps summed over.
    pub fn hidden(&self, t0: T, t1: T) -> Result<SuperOperator<T>> {
        self.chain(&self.hidden, t0, t1)
    }

    /// `e^{ℒ(t1−t0)}` (time-ordered over segments).
    pub fn lindblad(&self, t0: T, t1: T) -> Result<SuperOperator<T>> {
        self.chain(&self.lindblad, t0, t1)
    }

    fn chain(&self, gens: &[SuperOperator<T>], t0: T, t1: T) -> Result<SuperOperator<T>> {
        let mut acc = SuperOperator::identity(self.dim());
        for p in self.model.protocol.pieces(t0, t1)? {
            acc = gens[p.segment].exp_scaled(p.end - p.start).compose(&acc);
        }
        Ok(acc)
    }

    /// `σ ↦ η_k L_k σ L_k†`; the `dt` of the jump density is left to the caller.
    pub fn jump(&self, k: usize) -> Result<SuperOperator<T>> {
        let ch = self.model.channel(k)?;
        Ok(SuperOperator::sandwich(&ch.matrix).scaled(ch.efficiency))
    }
}

/// Checks that `rho` is a density matrix within the crate-wide tolerances.
pub(crate) fn check_density<T: Real>(rho: &ComplexMatrix<T>) -> Result<()> {
    let herm = hermiticity_defect(rho).as_f64();
    if herm > T::tol_f64(1e-9) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("not Hermitian (defect {herm:.3e})"),
        });
    }
    let tr = trace_re(rho).as_f64();
    if (tr - 1.0).abs() > T::tol_f64(1e-9) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("trace {tr} != 1"),
        });
    }
    let min = min_eigenvalue(rho);
    if min < -T::tol_f64(POSITIVITY_TOL) {
        return Err(Error::PositivityViolation(min));
    }
    Ok(())
}

pub(crate) fn min_eigenvalue<T: Real>(rho: &ComplexMatrix<T>) -> f64 {
    let herm = (rho + rho.adjoint()) * cr(T::lit(0.5));
    SymmetricEigen::new(herm)
        .eigenvalues
        .iter()
        .map(|x| x.as_f64())
        .fold(f64::INFINITY, f64::min)
}

/// `ρ(t1)` from `ρ(t0)` under the Lindblad master equation.
pub fn lindblad_propagate<T: Real>(
    rho0: &ComplexMatrix<T>,
    model: &Model<T>,
    t0: T,
    t1: T,
) -> Result<ComplexMatrix<T>> {
    check_square(rho0, model.dim)?;
    let prop = Propagators::new(model);
    let out = prop.lindblad(t0, t1)?.apply(rho0)?;
    let out = (&out + out.adjoint()) * cr(T::lit(0.5));
    let min = min_eigenvalue(&out);
    if min < -T::tol_f64(POSITIVITY_TOL) {
        return Err(Error::PositivityViolation(min));
    }
    Ok(out)
}

/// Unique fixed point of the generator of the first protocol segment.
pub fn steady_state<T: Real>(model: &Model<T>) -> Result<ComplexMatrix<T>> {
    let d = model.dim;
    let seg = model
        .protocol
        .segments
        .first()
        .ok_or_else(|| Error::InvalidModel(vec!["protocol: no segments".into()]))?;
    let gen = lindblad_generator(&seg.hamiltonian, &model.channels);
    let svd = gen.matrix.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let sv = &svd.singular_values;
    let smax = sv.iter().fold(T::zero(), |a, &b| if b > a { b } else { a });
    let tol = T::tol(1e-9) * (T::one() + smax);
    let null_dim = sv.iter().filter(|&&s| s <= tol).count();
    if null_dim != 1 {
        return Err(Error::DegenerateSteadyState(null_dim));
    }
    let (idx, _) =
        sv.iter().enumerate().fold(
            (0, T::infinity()),
            |(bi, bv), (i, &s)| if s < bv { (i, s) } else { (bi, bv) },
        );
    let x = DVector::from_iterator(d * d, v_t.row(idx).iter().map(|z| z.conj()));
    let mut rho = unvectorize(&x, d);
    rho = (&rho + rho.adjoint()) * cr(T::lit(0.5));
    let tr = trace_re(&rho);
    rho /= cr(tr);
    let residual = max_abs(&unvectorize(&(&gen.matrix * vectorize(&rho)), d)).as_f64();
    if residual > T::tol_f64(1e-10) * (1.0 + smax.as_f64()) {
        return Err(Error::DegenerateSteadyState(0));
    }
    check_density(&rho)?;
    Ok(rho)
}

/// Time-ordered no-jump propagator `U(t1, t0)`.
pub fn no_jump_propagator<T: Real>(model: &Model<T>, t0: T, t1: T) -> Result<ComplexMatrix<T>> {
    Propagators::new(model).no_jump(t0, t1)
}

/// `𝒩_{t1,t0}`: completely positive, trace non-increasing.
pub fn hidden_propagator<T: Real>(model: &Model<T>, t0: T, t1: T) -> Result<SuperOperator<T>> {
    Propagators::new(model).hidden(t0, t1)
}

/// Visible-jump map `σ ↦ η_k L_k σ L_k†`.
pub fn jump_superoperator<T: Real>(model: &Model<T>, k: usize) -> Result<SuperOperator<T>> {
    let ch = model.channel(k)?;
    Ok(SuperOperator::sandwich(&ch.matrix).scaled(ch.efficiency))
}

/// Generators of the time-reversed imperfectly monitored process.
#[derive(Debug, Clone)]
pub struct ReversedParts<T: Real> {
    /// The reversed model (`Θ H(τ−t) Θ†`, channel `k` realised by `Θ L_k̃ Θ†`
    /// with efficiency `η_k`).
    pub model: Model<T>,
    /// Hidden generator per reversed protocol segment.
    pub hidden_generators: Vec<SuperOperator<T>>,
    /// Reversed visible-jump map per channel label.
    pub jumps: Vec<SuperOperator<T>>,
}

pub fn reversed_generator_parts<T: Real>(model: &Model<T>) -> Result<ReversedParts<T>> {
    model.ensure_valid()?;
    let rev = model.reversed();
    let hidden_generators = rev
        .protocol
        .segments
        .iter()
        .map(|s| hidden_generator(&s.hamiltonian, &rev.channels))
        .collect();
    let jumps = rev
        .channels
        .iter()
        .map(|ch| SuperOperator::sandwich(&ch.matrix).scaled(ch.efficiency))
        .collect();
    Ok(ReversedParts {
        model: rev,
        hidden_generators,
        jumps,
    })
}

/// First-order measurement operators for one time step.
#[derive(Debug, Clone)]
pub struct KrausStep<T: Real> {
    pub dt: T,
    pub no_jump: ComplexMatrix<T>,
    pub visible: Vec<(usize, ComplexMatrix<T>)>,
    pub hidden: Vec<(usize, ComplexMatrix<T>)>,
}

impl<T: Real> KrausStep<T> {
    /// `‖Σ M†M − I‖` (max-entry norm).
    pub fn completeness_defect(&self) -> T {
        let d = self.no_jump.nrows();
        let mut acc = self.no_jump.adjoint() * &self.no_jump;
        for (_, m) in self.visible.iter().chain(&self.hidden) {
            acc += m.adjoint() * m;
        }
        max_abs(&(acc - ComplexMatrix::<T>::identity(d, d)))
    }
}

/// `M₀ = 1 − iH dt − dt Σ L†L/2`, visible `√(η_k dt) L_k`, hidden `√((1−η_k) dt) L_k`.
pub fn kraus_step<T: Real>(model: &Model<T>, t: T, dt: T) -> Result<KrausStep<T>> {
    model.protocol.check_interval(t, t)?;
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: "must be positive".into(),
        });
    }
    let seg = &model.protocol.segments[model.protocol.segment_at(t)];
    let d = model.dim;
    let no_jump = ComplexMatrix::<T>::identity(d, d)
        + effective_generator(&seg.hamiltonian, &model.channels) * cr(dt);
    let mut visible = Vec::new();
    let mut hidden = Vec::new();
    for ch in &model.channels {
        if ch.efficiency > T::zero() {
            visible.push((ch.index, &ch.matrix * cr((ch.efficiency * dt).sqrt())));
        }
        if ch.efficiency < T::one() {
            hidden.push((
                ch.index,
                &ch.matrix * cr(((T::one() - ch.efficiency) * dt).sqrt()),
            ));
        }
    }
    Ok(KrausStep {
        dt,
        no_jump,
        visible,
        hidden,
    })
}
