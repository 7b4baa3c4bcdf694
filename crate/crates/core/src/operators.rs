//! Model definition: Hamiltonian protocol, jump channels with their
//! detailed-balance pairing, measurement bases and time reversal.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Complex, ComplexField, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{cr, max_abs, ComplexMatrix, ComplexVector, Real};

const HERMITIAN_TOL: f64 = 1e-12;
const PAIRING_TOL: f64 = 1e-12;
const BASIS_TOL: f64 = 1e-10;
const PROBABILITY_SUM_TOL: f64 = 1e-12;
/// Eigenvalues of a density matrix down to this value are treated as zero.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// `L ρ L† − {L†L, ρ}/2`.
pub fn dissipator<T: Real>(
    l: &ComplexMatrix<T>,
    rho: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>> {
    check_square(l, rho.nrows())?;
    check_square(rho, l.nrows())?;
    let ld = l.adjoint();
    let ldl = &ld * l;
    let half = cr(T::lit(0.5));
    Ok(l * rho * &ld - (&ldl * rho + rho * &ldl) * half)
}

pub(crate) fn check_square<T: Real>(m: &ComplexMatrix<T>, dim: usize) -> Result<()> {
    if m.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m.nrows(),
        });
    }
    if m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn hermiticity_defect<T: Real>(m: &ComplexMatrix<T>) -> T {
    max_abs(&(m - m.adjoint()))
}

/// One Lindblad jump channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T: Real> {
    pub index: usize,
    pub matrix: ComplexMatrix<T>,
    /// Entropy change in the environment per jump (dimensionless).
    pub entropy_flux: T,
    /// Detection efficiency in `[0, 1]`.
    pub efficiency: T,
    pub reservoir: usize,
    /// Index of the inverse process paired through local detailed balance.
    pub reverse_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T: Real> {
    pub duration: T,
    pub hamiltonian: ComplexMatrix<T>,
}

/// Piecewise-constant driving protocol on `[0, τ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol<T: Real> {
    pub segments: Vec<Segment<T>>,
}

/// A maximal sub-interval of `[t0, t1]` lying inside a single protocol segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece<T> {
    pub segment: usize,
    pub start: T,
    pub end: T,
}

impl<T: Real> Protocol<T> {
    pub fn constant(hamiltonian: ComplexMatrix<T>, tau: T) -> Self {
        Protocol {
            segments: vec![Segment {
                duration: tau,
                hamiltonian,
            }],
        }
    }

    pub fn duration(&self) -> T {
        self.segments
            .iter()
            .fold(T::zero(), |acc, s| acc + s.duration)
    }

    /// Start times of every segment, plus the final time.
    pub fn boundaries(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut t = T::zero();
        out.push(t);
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }

    fn slack(&self) -> T {
        T::tol(1e-12) * (T::one() + self.duration())
    }

    pub fn check_interval(&self, t0: T, t1: T) -> Result<()> {
        let tau = self.duration();
        let eps = self.slack();
        if t0 < -eps || t1 > tau + eps || t1 < t0 - eps {
            return Err(Error::IntervalOutsideProtocol {
                t0: t0.as_f64(),
                t1: t1.as_f64(),
                tau: tau.as_f64(),
            });
        }
        Ok(())
    }

    /// Index of the segment active at time `t` (right-continuous, the last
    /// segment owns `t = τ`).
    pub fn segment_at(&self, t: T) -> usize {
        let mut end = T::zero();
        for (i, s) in self.segments.iter().enumerate() {
            end += s.duration;
            if t < end {
                return i;
            }
        }
        self.segments.len() - 1
    }

    /// Splits `[t0, t1]` at segment boundaries.
    pub fn pieces(&self, t0: T, t1: T) -> Result<Vec<Piece<T>>> {
        self.check_interval(t0, t1)?;
        let mut out = Vec::new();
        if t1 <= t0 {
            return Ok(out);
        }
        let b = self.boundaries();
        for (i, w) in b.windows(2).enumerate() {
            let start = if t0 > w[0] { t0 } else { w[0] };
            let end = if i + 1 == self.segments.len() || t1 < w[1] {
                t1
            } else {
                w[1]
            };
            if end > start {
                out.push(Piece {
                    segment: i,
                    start,
                    end,
                });
            }
            if t1 <= w[1] {
                break;
            }
        }
        Ok(out)
    }
}

/// Open-system model: Hamiltonian protocol, channels, reservoir temperatures and
/// the basis in which time reversal acts as complex conjugation.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Real> {
    pub dim: usize,
    pub protocol: Protocol<T>,
    pub channels: Vec<Channel<T>>,
    /// Inverse temperature per reservoir id.
    pub beta: BTreeMap<usize, T>,
    /// Unitary `U_Θ`; `Θ` conjugates coordinates in this basis.
    pub reversal_basis: ComplexMatrix<T>,
}

/// A failed model invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

fn violation(subject: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        subject: subject.into(),
        message: message.into(),
    }
}

/// Lists every broken invariant of `model`; empty means the model is usable.
pub fn validate_model<T: Real>(model: &Model<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    let d = model.dim;
    if d == 0 {
        out.push(violation("model", "dimension must be at least 1"));
        return out;
    }

    if model.reversal_basis.shape() != (d, d) {
        out.push(violation(
            "reversal_basis",
            format!("expected {d}x{d} matrix"),
        ));
    } else {
        let u = &model.reversal_basis;
        let defect = max_abs(&(u.adjoint() * u - ComplexMatrix::<T>::identity(d, d)));
        if defect.as_f64() > T::tol_f64(BASIS_TOL) {
            out.push(violation(
                "reversal_basis",
                format!("not unitary (defect {:.3e})", defect.as_f64()),
            ));
        }
    }

    if model.protocol.segments.is_empty() {
        out.push(violation("protocol", "no segments"));
    }
    for (i, s) in model.protocol.segments.iter().enumerate() {
        let subject = format!("segment {i}");
        if !(s.duration > T::zero()) || !s.duration.is_finite_value() {
            out.push(violation(
                &subject,
                format!(
                    "duration must be positive and finite, got {}",
                    s.duration.as_f64()
                ),
            ));
        }
        if s.hamiltonian.shape() != (d, d) {
            out.push(violation(&subject, format!("hamiltonian must be {d}x{d}")));
            continue;
        }
        if !all_finite(&s.hamiltonian) {
            out.push(violation(&subject, "hamiltonian has non-finite entries"));
            continue;
        }
        let defect = hermiticity_defect(&s.hamiltonian).as_f64();
        if defect > T::tol_f64(HERMITIAN_TOL) * (1.0 + max_abs(&s.hamiltonian).as_f64()) {
            out.push(violation(
                &subject,
                format!("hamiltonian not Hermitian (defect {defect:.3e})"),
            ));
        }
    }

    let n = model.channels.len();
    for (pos, ch) in model.channels.iter().enumerate() {
        let subject = format!("channel {pos}");
        if ch.index != pos {
            out.push(violation(
                &subject,
                format!("index field is {} but position is {pos}", ch.index),
            ));
        }
        if ch.matrix.shape() != (d, d) {
            out.push(violation(&subject, format!("matrix must be {d}x{d}")));
        } else if !all_finite(&ch.matrix) {
            out.push(violation(&subject, "matrix has non-finite entries"));
        }
        if !(ch.efficiency >= T::zero() && ch.efficiency <= T::one()) {
            out.push(violation(
                &subject,
                format!("efficiency {} outside [0, 1]", ch.efficiency.as_f64()),
            ));
        }
        if !ch.entropy_flux.is_finite_value() {
            out.push(violation(&subject, "entropy flux is not finite"));
        }
        if !model.beta.contains_key(&ch.reservoir) {
            out.push(violation(
                &subject,
                format!("reservoir {} has no inverse temperature", ch.reservoir),
            ));
        }
        if ch.reverse_index >= n {
            out.push(violation(
                &subject,
                format!("reverse index {} out of range", ch.reverse_index),
            ));
            continue;
        }
        let rev = &model.channels[ch.reverse_index];
        if rev.reverse_index != pos {
            out.push(violation(
                &subject,
                format!(
                    "reverse pairing is not an involution ({} -> {} -> {})",
                    pos, ch.reverse_index, rev.reverse_index
                ),
            ));
            continue;
        }
        if ch.reverse_index == pos {
            if ch.entropy_flux != T::zero() {
                out.push(violation(
                    &subject,
                    "self-reversed channel must have zero entropy flux",
                ));
            }
            if ch.matrix.shape() == (d, d)
                && !pairing_holds(&ch.matrix, &ch.matrix, ch.entropy_flux)
            {
                out.push(violation(
                    &subject,
                    "self-reversed channel violates L = L^dag exp(-ds/2)",
                ));
            }
        } else if pos < ch.reverse_index {
            if rev.matrix.shape() != (d, d) || ch.matrix.shape() != (d, d) {
                continue;
            }
            let mut problems = Vec::new();
            if (ch.entropy_flux + rev.entropy_flux).abs().as_f64() > T::tol_f64(PAIRING_TOL) {
                problems.push(format!(
                    "entropy fluxes {} and {} are not opposite",
                    ch.entropy_flux.as_f64(),
                    rev.entropy_flux.as_f64()
                ));
            }
            if !pairing_holds(&ch.matrix, &rev.matrix, ch.entropy_flux) {
                problems.push(format!(
                    "L_{} != L_{}^dag exp(-ds_{}/2)",
                    ch.reverse_index, pos, pos
                ));
            }
            if !problems.is_empty() {
                out.push(violation(
                    format!("channel pair ({pos}, {})", ch.reverse_index),
                    problems.join(", "),
                ));
            }
        }
    }
    for (r, b) in &model.beta {
        if !b.is_finite_value() {
            out.push(violation(
                format!("reservoir {r}"),
                "inverse temperature is not finite",
            ));
        }
    }
    out
}

fn all_finite<T: Real>(m: &ComplexMatrix<T>) -> bool {
    m.iter()
        .all(|z| z.re.is_finite_value() && z.im.is_finite_value())
}

/// `L_rev == L† e^{−Δs/2}` entrywise.
fn pairing_holds<T: Real>(l: &ComplexMatrix<T>, l_rev: &ComplexMatrix<T>, ds: T) -> bool {
    let expected = l.adjoint() * cr((-ds / T::lit(2.0)).exp());
    let scale = 1.0 + max_abs(l).as_f64().max(max_abs(l_rev).as_f64());
    max_abs(&(l_rev - expected)).as_f64() <= T::tol_f64(PAIRING_TOL) * scale
}

impl<T: Real> Model<T> {
    pub fn tau(&self) -> T {
        self.protocol.duration()
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate_model(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(
                v.iter().map(|x| x.to_string()).collect(),
            ))
        }
    }

    pub fn channel(&self, k: usize) -> Result<&Channel<T>> {
        self.channels.get(k).ok_or(Error::UnknownChannel(k))
    }

    /// `Σ_k L_k† L_k`.
    pub fn total_decay(&self) -> ComplexMatrix<T> {
        let mut acc = ComplexMatrix::<T>::zeros(self.dim, self.dim);
        for ch in &self.channels {
            acc += ch.matrix.adjoint() * &ch.matrix;
        }
        acc
    }

    pub fn beta_of(&self, reservoir: usize) -> T {
        self.beta.get(&reservoir).copied().unwrap_or_else(T::one)
    }

    /// Copy with every efficiency replaced.
    pub fn with_efficiencies(&self, etas: &[T]) -> Self {
        let mut m = self.clone();
        for (ch, &e) in m.channels.iter_mut().zip(etas) {
            ch.efficiency = e;
        }
        m
    }

    /// Copy with the protocol truncated or extended to duration `tau` (the
    /// last segment absorbs the change).
    pub fn with_duration(&self, tau: T) -> Result<Self> {
        let mut m = self.clone();
        let mut remaining = tau;
        let mut segs = Vec::new();
        for s in &self.protocol.segments {
            if remaining <= T::zero() {
                break;
            }
            let dur = if s.duration < remaining {
                s.duration
            } else {
                remaining
            };
            segs.push(Segment {
                duration: dur,
                hamiltonian: s.hamiltonian.clone(),
            });
            remaining -= dur;
        }
        if remaining > T::zero() {
            match segs.last_mut() {
                Some(last) => last.duration += remaining,
                None => {
                    return Err(Error::InvalidParameter {
                        name: "tau",
                        reason: "protocol has no segments".into(),
                    })
                }
            }
        }
        if !(tau > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("must be positive, got {}", tau.as_f64()),
            });
        }
        m.protocol = Protocol { segments: segs };
        Ok(m)
    }

    /// The time-reversed process: protocol run backwards with `Θ H Θ†`,
    /// channel `k` realised by `Θ L_k̃ Θ†` while keeping efficiency `η_k`,
    /// and entropy flux `Δs_k̃ = −Δs_k`. Reversing twice returns the model.
    pub fn reversed(&self) -> Self {
        let segments = self
            .protocol
            .segments
            .iter()
            .rev()
            .map(|s| Segment {
                duration: s.duration,
                hamiltonian: self.time_reverse(&s.hamiltonian),
            })
            .collect();
        let channels = self
            .channels
            .iter()
            .map(|ch| {
                let partner = &self.channels[ch.reverse_index];
                Channel {
                    index: ch.index,
                    matrix: self.time_reverse(&partner.matrix),
                    entropy_flux: partner.entropy_flux,
                    efficiency: ch.efficiency,
                    reservoir: ch.reservoir,
                    reverse_index: ch.reverse_index,
                }
            })
            .collect();
        Model {
            dim: self.dim,
            protocol: Protocol { segments },
            channels,
            beta: self.beta.clone(),
            reversal_basis: self.reversal_basis.clone(),
        }
    }

    /// `Θ A Θ†` (dimensions assumed valid).
    pub fn time_reverse(&self, a: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let u = &self.reversal_basis;
        let inner = (u.adjoint() * a * u).map(|z| z.conj());
        u * inner * u.adjoint()
    }

    /// `Θ |ψ⟩`.
    pub fn time_reverse_vector(&self, v: &ComplexVector<T>) -> ComplexVector<T> {
        let u = &self.reversal_basis;
        u * (u.adjoint() * v).map(|z| z.conj())
    }
}

/// `Θ A Θ†` with `Θ` complex conjugation in the model's reversal basis.
pub fn time_reverse_matrix<T: Real>(
    model: &Model<T>,
    a: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>> {
    check_square(a, model.dim)?;
    Ok(model.time_reverse(a))
}

/// Rank-one projective measurement with outcome probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBasis<T: Real> {
    pub vectors: Vec<ComplexVector<T>>,
    pub probabilities: Vec<T>,
}

impl<T: Real> MeasurementBasis<T> {
    /// Eigen-decomposition of a density matrix, eigenvalues descending.
    /// Degenerate eigenvalues are ordered by lexicographic comparison of the
    /// (phase-fixed) eigenvector components.
    pub fn from_density(rho: &ComplexMatrix<T>) -> Result<Self> {
        let d = rho.nrows();
        check_square(rho, d)?;
        let herm = (rho + rho.adjoint()) * cr(T::lit(0.5));
        let eig = SymmetricEigen::new(herm);
        let mut pairs: Vec<(T, ComplexVector<T>)> = (0..d)
            .map(|i| {
                let mut v: ComplexVector<T> = eig.eigenvectors.column(i).into_owned();
                fix_phase(&mut v);
                (eig.eigenvalues[i], v)
            })
            .collect();
        let tie = T::tol(1e-12);
        pairs.sort_by(|a, b| {
            if (a.0 - b.0).abs() > tie {
                b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal)
            } else {
                lexicographic(&a.1, &b.1)
            }
        });
        let mut probabilities = Vec::with_capacity(d);
        let mut vectors = Vec::with_capacity(d);
        for (p, v) in pairs {
            if p.as_f64() < -T::tol_f64(POSITIVITY_TOL) {
                return Err(Error::PositivityViolation(p.as_f64()));
            }
            probabilities.push(if p < T::zero() { T::zero() } else { p });
            vectors.push(v);
        }
        let basis = MeasurementBasis {
            vectors,
            probabilities,
        };
        basis.validate()?;
        Ok(basis)
    }

    /// Basis with explicit vectors and probabilities.
    pub fn new(vectors: Vec<ComplexVector<T>>, probabilities: Vec<T>) -> Result<Self> {
        let b = MeasurementBasis {
            vectors,
            probabilities,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn projector(&self, i: usize) -> ComplexMatrix<T> {
        let v = &self.vectors[i];
        v * v.adjoint()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.vectors.len();
        if self.probabilities.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.probabilities.len(),
            });
        }
        let mut gram = DMatrix::<Complex<T>>::zeros(d, d);
        for i in 0..d {
            if self.vectors[i].len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: self.vectors[i].len(),
                });
            }
            for j in 0..d {
                gram[(i, j)] = self.vectors[i].dotc(&self.vectors[j]);
            }
        }
        let defect = max_abs(&(gram - ComplexMatrix::<T>::identity(d, d))).as_f64();
        if defect > T::tol_f64(BASIS_TOL) {
            return Err(Error::InvalidParameter {
                name: "basis",
                reason: format!("not orthonormal (defect {defect:.3e})"),
            });
        }
        let mut sum = 0.0;
        for p in &self.probabilities {
            if p.as_f64() < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "probabilities",
                    reason: "negative entry".into(),
                });
            }
            sum += p.as_f64();
        }
        let tol =
            T::tol_f64(PROBABILITY_SUM_TOL).max(100.0 * (d as f64) * T::default_epsilon().as_f64());
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidParameter {
                name: "probabilities",
                reason: format!("sum to {sum}, expected 1"),
            });
        }
        Ok(())
    }

    /// `Σ_i p_i |i⟩⟨i|`.
    pub fn density(&self) -> ComplexMatrix<T> {
        let d = self.dim();
        let mut rho = ComplexMatrix::<T>::zeros(d, d);
        for (v, p) in self.vectors.iter().zip(&self.probabilities) {
            rho += v * v.adjoint() * cr(*p);
        }
        rho
    }
}

/// Makes the first non-negligible component real and positive.
fn fix_phase<T: Real>(v: &mut ComplexVector<T>) {
    let thresh = T::tol(1e-12);
    if let Some(z) = v.iter().find(|z| z.modulus() > thresh).copied() {
        let phase = z.conj() / cr(z.modulus());
        *v *= phase;
    }
}

fn lexicographic<T: Real>(a: &ComplexVector<T>, b: &ComplexVector<T>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        for (p, q) in [(x.re, y.re), (x.im, y.im)] {
            if let Some(o) = p.partial_cmp(&q) {
                if o != std::cmp::Ordering::Equal {
                    return o;
                }
            }
        }
    }
    std::cmp::Ordering::Equal
}

/// `σ₋ = |0⟩⟨1|` with `|0⟩` the ground state.
pub fn sigma_minus<T: Real>() -> ComplexMatrix<T> {
    let mut m = ComplexMatrix::<T>::zeros(2, 2);
    m[(0, 1)] = cr(T::one());
    m
}

pub fn sigma_plus<T: Real>() -> ComplexMatrix<T> {
    sigma_minus::<T>().transpose()
}

pub fn sigma_x<T: Real>() -> ComplexMatrix<T> {
    sigma_minus::<T>() + sigma_plus::<T>()
}

/// Physical parameters of the resonantly driven two-level emitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelParams<T> {
    pub omega: T,
    pub gamma0: T,
    pub epsilon: T,
    pub beta: T,
    pub eta_minus: T,
    pub eta_plus: T,
}

impl<T: Real> TwoLevelParams<T> {
    /// Mean boson number `n̄ = 1/(e^{βω} − 1)`.
    pub fn mean_occupation(&self) -> T {
        T::one() / ((self.beta * self.omega).exp() - T::one())
    }

    /// Same physics with times measured in `1/Γ₀` (rates divided by `Γ₀`,
    /// `β` multiplied by it so that `βω` is unchanged).
    pub fn in_decay_units(&self) -> Self {
        TwoLevelParams {
            omega: self.omega / self.gamma0,
            gamma0: T::one(),
            epsilon: self.epsilon / self.gamma0,
            beta: self.beta * self.gamma0,
            eta_minus: self.eta_minus,
            eta_plus: self.eta_plus,
        }
    }
}

/// Channel index of the emission process `L₋`.
pub const EMISSION: usize = 0;
/// Channel index of the absorption process `L₊`.
pub const ABSORPTION: usize = 1;

/// Rotating-frame two-level model: `H = ε σx`,
/// `L₋ = √(Γ₀(n̄+1)) σ₋` with `Δs₋ = +βω` and `L₊ = √(Γ₀ n̄) σ₊` with
/// `Δs₊ = −βω`, both coupled to reservoir 0.
///
/// The pairing `L₊ = L₋† e^{−Δs₋/2}` fixes the sign of the fluxes from the
/// operators themselves (`n̄ + 1 = n̄ e^{βω}`).
pub fn build_two_level_model<T: Real>(p: &TwoLevelParams<T>, tau: T) -> Result<Model<T>> {
    if !(p.beta > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("must be positive, got {}", p.beta.as_f64()),
        });
    }
    if !(p.omega > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "omega",
            reason: format!("must be positive, got {}", p.omega.as_f64()),
        });
    }
    if !(p.gamma0 >= T::zero()) {
        return Err(Error::InvalidParameter {
            name: "gamma0",
            reason: "must be non-negative".into(),
        });
    }
    for (name, eta) in [("eta_minus", p.eta_minus), ("eta_plus", p.eta_plus)] {
        if !(eta >= T::zero() && eta <= T::one()) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("{} outside [0, 1]", eta.as_f64()),
            });
        }
    }
    if !(tau > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: "must be positive".into(),
        });
    }
    let nbar = p.mean_occupation();
    let ds = p.beta * p.omega;
    let l_minus = sigma_minus::<T>() * cr((p.gamma0 * (nbar + T::one())).sqrt());
    let l_plus = sigma_plus::<T>() * cr((p.gamma0 * nbar).sqrt());
    let hamiltonian = sigma_x::<T>() * cr(p.epsilon);
    let mut beta = BTreeMap::new();
    beta.insert(0, p.beta);
    Ok(Model {
        dim: 2,
        protocol: Protocol::constant(hamiltonian, tau),
        channels: vec![
            Channel {
                index: EMISSION,
                matrix: l_minus,
                entropy_flux: ds,
                efficiency: p.eta_minus,
                reservoir: 0,
                reverse_index: ABSORPTION,
            },
            Channel {
                index: ABSORPTION,
                matrix: l_plus,
                entropy_flux: -ds,
                efficiency: p.eta_plus,
                reservoir: 0,
                reverse_index: EMISSION,
            },
        ],
        beta,
        reversal_basis: ComplexMatrix::<T>::identity(2, 2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_params() -> TwoLevelParams<f64> {
        TwoLevelParams {
            omega: 1.0,
            gamma0: 1e-3,
            epsilon: 1e-2,
            beta: 0.2,
            eta_minus: 0.2,
            eta_plus: 0.2,
        }
    }

    fn ket(i: usize) -> ComplexMatrix<f64> {
        let mut m = ComplexMatrix::<f64>::zeros(2, 2);
        m[(i, i)] = cr(1.0);
        m
    }

    #[test]
    fn dissipator_zero_operator() {
        let rho = ket(1);
        let out = dissipator(&ComplexMatrix::<f64>::zeros(2, 2), &rho).unwrap();
        assert_eq!(out, ComplexMatrix::<f64>::zeros(2, 2));
    }

    #[test]
    fn dissipator_decay_of_excited_state() {
        let out = dissipator(&sigma_minus::<f64>(), &ket(1)).unwrap();
        assert!(max_abs(&(out - (ket(0) - ket(1)))) < 1e-15);
        let out = dissipator(&sigma_minus::<f64>(), &ket(0)).unwrap();
        assert!(max_abs(&out) < 1e-15);
    }

    #[test]
    fn dissipator_shape_mismatch() {
        let err =
            dissipator(&sigma_minus::<f64>(), &ComplexMatrix::<f64>::identity(3, 3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn mean_occupation_at_reference_temperature() {
        let nbar = reference_params().mean_occupation();
        let expected = 1.0 / (0.2f64.exp() - 1.0);
        assert!((nbar - expected).abs() < 1e-14);
        assert!((nbar - 4.516_655_566_126_994).abs() < 1e-9);
    }

    #[test]
    fn two_level_model_is_valid_and_balanced() {
        let p = reference_params();
        let m = build_two_level_model(&p, 1000.0).unwrap();
        assert!(validate_model(&m).is_empty(), "{:?}", validate_model(&m));
        let nbar = p.mean_occupation();
        let lm = &m.channels[EMISSION].matrix;
        let lp = &m.channels[ABSORPTION].matrix;
        assert!((lm[(0, 1)].re - (1e-3 * (nbar + 1.0)).sqrt()).abs() < 1e-15);
        assert!((lp[(1, 0)].re - (1e-3 * nbar).sqrt()).abs() < 1e-15);
        let expected = lm.adjoint() * cr((-m.channels[EMISSION].entropy_flux / 2.0).exp());
        assert!(max_abs(&(lp - expected)) <= 1e-12);
        assert!((m.channels[EMISSION].entropy_flux - 0.2).abs() < 1e-15);
        assert!((m.channels[ABSORPTION].entropy_flux + 0.2).abs() < 1e-15);
    }

    #[test]
    fn two_level_rejects_bad_temperature() {
        let mut p = reference_params();
        p.beta = 0.0;
        assert!(build_two_level_model(&p, 1.0).is_err());
        p.beta = 0.2;
        p.omega = -1.0;
        assert!(build_two_level_model(&p, 1.0).is_err());
    }

    #[test]
    fn mismatched_flux_signs_reported_once() {
        let mut m = build_two_level_model(&reference_params(), 1.0).unwrap();
        m.channels[ABSORPTION].entropy_flux = 0.2;
        let v = validate_model(&m);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].subject.contains("(0, 1)"));
    }

    #[test]
    fn non_hermitian_segment_reported() {
        let mut m = build_two_level_model(&reference_params(), 1.0).unwrap();
        m.protocol.segments[0].hamiltonian = sigma_minus::<f64>();
        let v = validate_model(&m);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].subject.contains("segment 0"));
    }

    #[test]
    fn ideal_detection_model_is_valid() {
        let mut p = reference_params();
        p.eta_minus = 1.0;
        p.eta_plus = 1.0;
        assert!(validate_model(&build_two_level_model(&p, 1.0).unwrap()).is_empty());
    }

    #[test]
    fn time_reversal_of_scalars_and_real_matrices() {
        let m = build_two_level_model(&reference_params(), 1.0).unwrap();
        let i_id = ComplexMatrix::<f64>::identity(2, 2) * Complex::new(0.0, 1.0);
        let out = time_reverse_matrix(&m, &i_id).unwrap();
        assert!(max_abs(&(out + i_id)) < 1e-15);
        for a in [sigma_minus::<f64>(), sigma_plus(), sigma_x()] {
            assert!(max_abs(&(time_reverse_matrix(&m, &a).unwrap() - &a)) < 1e-15);
        }
        assert!(time_reverse_matrix(&m, &ComplexMatrix::<f64>::zeros(3, 3)).is_err());
    }

    #[test]
    fn reversed_model_exchanges_efficiencies() {
        let mut p = reference_params();
        p.eta_minus = 0.5;
        p.eta_plus = 0.2;
        let m = build_two_level_model(&p, 1.0).unwrap();
        let r = m.reversed();
        // label + in the reversed process is realised by σ₋ and carries η₊.
        assert!(max_abs(&(&r.channels[ABSORPTION].matrix - &m.channels[EMISSION].matrix)) < 1e-15);
        assert_eq!(r.channels[ABSORPTION].efficiency, 0.2);
        assert_eq!(r.channels[EMISSION].efficiency, 0.5);
        assert!(validate_model(&r).is_empty());
        assert_eq!(r.reversed(), m);
    }

    #[test]
    fn protocol_pieces_split_at_boundaries() {
        let h = sigma_x::<f64>();
        let p = Protocol {
            segments: vec![
                Segment {
                    duration: 1.0,
                    hamiltonian: h.clone(),
                },
                Segment {
                    duration: 2.0,
                    hamiltonian: h.clone() * cr(2.0),
                },
            ],
        };
        let pieces = p.pieces(0.5, 2.0).unwrap();
        assert_eq!(pieces.len(), 2);
        assert_eq!(
            (pieces[0].segment, pieces[0].start, pieces[0].end),
            (0, 0.5, 1.0)
        );
        assert_eq!(
            (pieces[1].segment, pieces[1].start, pieces[1].end),
            (1, 1.0, 2.0)
        );
        assert!(p.pieces(0.0, 3.5).is_err());
        assert!(p.pieces(1.0, 1.0).unwrap().is_empty());
        assert_eq!(p.segment_at(3.0), 1);
    }

    #[test]
    fn measurement_basis_orders_descending() {
        let mut rho = ComplexMatrix::<f64>::zeros(2, 2);
        rho[(0, 0)] = cr(0.3);
        rho[(1, 1)] = cr(0.7);
        let b = MeasurementBasis::from_density(&rho).unwrap();
        assert!((b.probabilities[0] - 0.7).abs() < 1e-14);
        assert!(b.vectors[0][1].norm() > 0.999);
        let maximally_mixed = ComplexMatrix::<f64>::identity(2, 2) * cr(0.5);
        let b1 = MeasurementBasis::from_density(&maximally_mixed).unwrap();
        let b2 = MeasurementBasis::from_density(&maximally_mixed).unwrap();
        assert_eq!(b1, b2);
    }

    fn arb_matrix() -> impl Strategy<Value = ComplexMatrix<f64>> {
        prop::collection::vec(-2.0f64..2.0, 8).prop_map(|v| {
            ComplexMatrix::<f64>::from_fn(2, 2, |i, j| {
                Complex::new(v[2 * (2 * i + j)], v[2 * (2 * i + j) + 1])
            })
        })
    }

    proptest! {
        #[test]
        fn dissipator_is_traceless(l in arb_matrix(), a in arb_matrix()) {
            let rho = &a * a.adjoint();
            let out = dissipator(&l, &rho).unwrap();
            prop_assert!(out.trace().norm() <= 1e-12 * (1.0 + max_abs(&l).powi(2) * max_abs(&rho)));
        }

        #[test]
        fn time_reversal_is_hermiticity_preserving_involution(a in arb_matrix(), b in arb_matrix()) {
            let mut m = build_two_level_model(&reference_params(), 1.0).unwrap();
            // unitary from the QR of a random matrix
            m.reversal_basis = (&b + ComplexMatrix::<f64>::identity(2, 2) * cr(3.0)).qr().q();
            let twice = m.time_reverse(&m.time_reverse(&a));
            prop_assert!(max_abs(&(twice - &a)) < 1e-12);
            let h = &a + a.adjoint();
            let th = m.time_reverse(&h);
            prop_assert!(hermiticity_defect(&th) < 1e-12);
        }

        #[test]
        fn two_level_models_always_validate(
            beta in 0.01f64..5.0, omega in 0.1f64..10.0, g in 0.0f64..3.0,
            eps in 0.0f64..3.0, em in 0.0f64..=1.0, ep in 0.0f64..=1.0,
        ) {
            let p = TwoLevelParams { omega, gamma0: g, epsilon: eps, beta, eta_minus: em, eta_plus: ep };
            let m = build_two_level_model(&p, 1.0).unwrap();
            prop_assert!(validate_model(&m).is_empty());
        }
    }
}
