//! Quantum operations preserving the gauge-invariant Gaussian states.
//!
//! The central construction dilates a contraction S on the one-particle
//! space to a self-adjoint unitary on a doubled space, adjoins a Gaussian
//! ancilla with symbol T, rotates by the second-quantized dilation, and
//! compresses back. The resulting channel acts on symbols as Q ↦ SQS* + R
//! with R = (I−SS*)^{1/2} T (I−SS*)^{1/2}. This module also provides the
//! channel's trace dual, measurement channels whose symbol maps fail to be
//! affine, and a classifier that recovers (S, R) and the branch type from
//! an opaque injective applier.

use crate::car::{Conjugation, FermionRep};
use crate::cmatrix::{cr, superop_matrix, CMatrix};
use crate::config::{MAX_DENSE_SUPEROP_MODES, TOL_HERM, TOL_PSD};
use crate::error::{Error, Result};
use crate::gig::{rho_from_symbol, symbol_of, wolfe_check, WolfeOutcome};
use crate::linalg::{min_eigenvalue, op_norm, psd_function, singular_values, PsdFn};
use crate::rng::SplitMix64;
use crate::sampling::random_symbol;
use num_complex::Complex64;
use std::sync::OnceLock;

/// Reconstruction tolerance for R = (I−SS*)^{1/2} T (I−SS*)^{1/2}.
const RECON_TOL: f64 = 1e-10;
/// Smallest restricted singular value accepted by the classifier.
const INJECTIVITY_TOL: f64 = 1e-8;
/// Central-difference step for the classifier's derivative probe.
const PROBE_STEP: f64 = 1e-4;
/// A branch fit is accepted when its residual stays below this.
const BRANCH_ACCEPT: f64 = 1e-6;

/// A contraction S together with a noise operator R satisfying
/// 0 ≤ R ≤ I − SS*. These are exactly the parameters for which the
/// dilation construction yields a channel.
#[derive(Debug, Clone)]
pub struct CompatiblePair {
    s: CMatrix,
    r: CMatrix,
}

impl CompatiblePair {
    pub fn new(s: CMatrix, r: CMatrix) -> Result<Self> {
        let n = s.require_square()?;
        if r.rows() != n || r.cols() != n {
            return Err(Error::dim("S and R must have the same square shape"));
        }
        let norm = op_norm(&s);
        if norm > 1.0 + 1e-10 {
            return Err(Error::IncompatiblePair {
                context: format!("operator norm of S is {norm:.12}, exceeds 1"),
            });
        }
        if r.hermitian_residual() > TOL_HERM {
            return Err(Error::IncompatiblePair { context: "R is not Hermitian".into() });
        }
        let min_r = min_eigenvalue(&r);
        if min_r < -TOL_PSD {
            return Err(Error::IncompatiblePair {
                context: format!("R has negative eigenvalue {min_r:.3e}"),
            });
        }
        let slack = &deficiency_of(&s) - &r;
        let min_slack = min_eigenvalue(&slack);
        if min_slack < -TOL_PSD {
            return Err(Error::IncompatiblePair {
                context: format!("R exceeds I - SS* by {:.3e}", -min_slack),
            });
        }
        Ok(CompatiblePair { s, r })
    }

    pub fn n(&self) -> usize {
        self.s.rows()
    }

    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    pub fn r(&self) -> &CMatrix {
        &self.r
    }

    /// I − SS*, the defect through which the ancilla couples.
    pub fn deficiency(&self) -> CMatrix {
        deficiency_of(&self.s)
    }

    /// Symbol map of the channel this pair generates: Q ↦ SQS* + R.
    pub fn symbol_map(&self, q: &CMatrix) -> CMatrix {
        &self.s.matmul(q).matmul(&self.s.adjoint()) + &self.r
    }
}

fn deficiency_of(s: &CMatrix) -> CMatrix {
    &CMatrix::identity(s.rows()) - &s.matmul(&s.adjoint())
}

/// The unique T with 0 ≤ T ≤ I, ker(I−SS*) ⊆ ker(T), and
/// (I−SS*)^{1/2} T (I−SS*)^{1/2} = R. The pseudo-inverse square root
/// realizes the ε-regularized limit directly.
pub fn ancilla_symbol(pair: &CompatiblePair) -> Result<CMatrix> {
    let d = pair.deficiency();
    let d_inv_sqrt = psd_function(&d, PsdFn::InvSqrtPinv)?;
    let raw = d_inv_sqrt.matmul(pair.r()).matmul(&d_inv_sqrt);
    let t = (&raw + &raw.adjoint()).scale_re(0.5);
    crate::gig::validate_symbol(&t)?;
    let d_sqrt = psd_function(&d, PsdFn::Sqrt)?;
    let residual = d_sqrt.matmul(&t).matmul(&d_sqrt).dist(pair.r());
    if residual > RECON_TOL * (1.0 + pair.r().frobenius_norm()) {
        // R has weight inside ker(I−SS*) that no T can produce.
        return Err(Error::KernelMismatch { residual });
    }
    Ok(t)
}

/// The 2N-mode representation hosting the dilation. The first N modes
/// (low occupation bits) carry the output copy of the algebra, modes
/// N+1..2N carry the input copy; the input embedding twists odd elements
/// by the parity of the output factor so the mixed anticommutators vanish.
pub struct DoubledRep {
    small: FermionRep,
    big: FermionRep,
    dilation: CMatrix,
    dilation_big: CMatrix,
    swap_big: CMatrix,
}

impl DoubledRep {
    pub fn new(pair: &CompatiblePair) -> Result<Self> {
        let n = pair.n();
        let small = FermionRep::new(n)?;
        let big = FermionRep::new(2 * n)?;
        let s = pair.s();
        let defect_out = psd_function(&pair.deficiency(), PsdFn::Sqrt)?;
        let id = CMatrix::identity(n);
        let defect_in = psd_function(&(&id - &s.adjoint().matmul(s)), PsdFn::Sqrt)?;
        let mut u = CMatrix::zeros(2 * n, 2 * n);
        u.set_block(0, 0, &defect_out.scale_re(-1.0));
        u.set_block(0, n, s);
        u.set_block(n, 0, &s.adjoint());
        u.set_block(n, n, &defect_in);
        // The two defect square roots come from independent eigensolves; when
        // S is close to unitary their intertwining error scales like the
        // square root of the defect, so project back onto the unitaries.
        // The polar factor of a self-adjoint near-unitary is self-adjoint.
        let u = crate::linalg::polar(&u)?.0;
        let u = (&u + &u.adjoint()).scale_re(0.5);
        let dilation_big = big.second_quantize(&u)?;
        let mut p = CMatrix::zeros(2 * n, 2 * n);
        p.set_block(0, n, &id);
        p.set_block(n, 0, &id);
        let swap_big = big.second_quantize(&p)?;
        Ok(DoubledRep { small, big, dilation: u, dilation_big, swap_big })
    }

    pub fn small(&self) -> &FermionRep {
        &self.small
    }

    pub fn big(&self) -> &FermionRep {
        &self.big
    }

    /// Output-copy mode indices.
    pub fn a_modes(&self) -> Vec<usize> {
        (0..self.small.n_modes()).collect()
    }

    /// Input-copy mode indices.
    pub fn b_modes(&self) -> Vec<usize> {
        (self.small.n_modes()..2 * self.small.n_modes()).collect()
    }

    /// The self-adjoint unitary dilation of S on the doubled one-particle space.
    pub fn dilation(&self) -> &CMatrix {
        &self.dilation
    }

    /// Second quantization of the dilation; self-adjoint because the dilation is.
    pub fn dilation_big(&self) -> &CMatrix {
        &self.dilation_big
    }

    /// Isometry onto the input (B) coordinates.
    pub fn j1(&self) -> CMatrix {
        let n = self.small.n_modes();
        let mut j = CMatrix::zeros(2 * n, n);
        for k in 0..n {
            j[(n + k, k)] = cr(1.0);
        }
        j
    }

    /// Isometry onto the output (A) coordinates.
    pub fn j2(&self) -> CMatrix {
        let n = self.small.n_modes();
        let mut j = CMatrix::zeros(2 * n, n);
        for k in 0..n {
            j[(k, k)] = cr(1.0);
        }
        j
    }

    /// Embeds an N-mode operator on the output modes. These occupy the low
    /// bits, where the mode strings never reach the input factor, so the
    /// embedding is a plain tensor product.
    pub fn embed_a(&self, x: &CMatrix) -> CMatrix {
        CMatrix::identity(self.small.dim()).kron(x)
    }

    /// Embeds an N-mode operator on the input modes. Odd elements pick up
    /// the output-factor parity from their mode strings.
    pub fn embed_b(&self, x: &CMatrix) -> CMatrix {
        let w = self.small.parity_op();
        let twisted = w.matmul(x).matmul(w);
        let even = (x + &twisted).scale_re(0.5);
        let odd = (x - &twisted).scale_re(0.5);
        &even.kron(&CMatrix::identity(self.small.dim())) + &odd.kron(w)
    }

    /// Tracial conditional expectation onto the output subalgebra,
    /// re-identified with the N-mode representation.
    pub fn compress_a(&self, m: &CMatrix) -> CMatrix {
        let dim = self.small.dim();
        trace_out_high(m, dim).scale_re(1.0 / dim as f64)
    }

    /// Tracial conditional expectation onto the input subalgebra,
    /// re-identified with the N-mode representation. Realized by swapping
    /// the two mode blocks with a second-quantized permutation first.
    pub fn compress_b(&self, m: &CMatrix) -> CMatrix {
        let v = &self.swap_big;
        self.compress_a(&v.adjoint().matmul(m).matmul(v))
    }
}

fn trace_out_high(m: &CMatrix, dim_lo: usize) -> CMatrix {
    let dim_hi = m.rows() / dim_lo;
    CMatrix::from_fn(dim_lo, dim_lo, |a, b| {
        let mut acc = Complex64::new(0.0, 0.0);
        for h in 0..dim_hi {
            acc += m[(h * dim_lo + a, h * dim_lo + b)];
        }
        acc
    })
}

/// The dilation channel for a compatible pair, with cached second-quantized
/// ingredients so repeated application is cheap.
pub struct EhkChannel {
    pair: CompatiblePair,
    ancilla: CMatrix,
    doubled: DoubledRep,
    rho_t_a: CMatrix,
    dense_dual: OnceLock<CMatrix>,
}

impl EhkChannel {
    pub fn new(pair: CompatiblePair) -> Result<Self> {
        let ancilla = ancilla_symbol(&pair)?;
        let doubled = DoubledRep::new(&pair)?;
        let rho_t = rho_from_symbol(doubled.small(), &ancilla)?.rho;
        let rho_t_a = doubled.embed_a(&rho_t);
        Ok(EhkChannel { pair, ancilla, doubled, rho_t_a, dense_dual: OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.pair.n()
    }

    pub fn pair(&self) -> &CompatiblePair {
        &self.pair
    }

    /// Ancilla symbol T determined by the pair.
    pub fn ancilla(&self) -> &CMatrix {
        &self.ancilla
    }

    pub fn doubled(&self) -> &DoubledRep {
        &self.doubled
    }

    pub fn small_rep(&self) -> &FermionRep {
        self.doubled.small()
    }

    fn check_dim(&self, x: &CMatrix) -> Result<()> {
        let dim = self.doubled.small().dim();
        if x.rows() != dim || x.cols() != dim {
            return Err(Error::dim(format!(
                "channel expects {dim}x{dim} input, got {}x{}",
                x.rows(),
                x.cols()
            )));
        }
        Ok(())
    }

    /// Adjoin the ancilla on the output modes, rotate by the dilation,
    /// compress onto the output modes.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        self.check_dim(x)?;
        Ok(self.apply_inner(x))
    }

    fn apply_inner(&self, x: &CMatrix) -> CMatrix {
        let m = self.rho_t_a.matmul(&self.doubled.embed_b(x));
        let u = self.doubled.dilation_big();
        let rotated = u.matmul(&m).matmul(&u.adjoint());
        self.doubled.compress_a(&rotated)
    }

    fn dense_dual_matrix(&self) -> &CMatrix {
        self.dense_dual.get_or_init(|| {
            let dim = self.doubled.small().dim();
            superop_matrix(dim, |e| self.apply_inner(e)).adjoint()
        })
    }

    /// Trace dual via the adjoint of the dense superoperator. The matrix is
    /// built once per channel and reused.
    pub fn dual_apply_dense(&self, x: &CMatrix) -> Result<CMatrix> {
        if self.n() > MAX_DENSE_SUPEROP_MODES {
            return Err(Error::SizeOutOfRange { n: self.n(), max: MAX_DENSE_SUPEROP_MODES });
        }
        self.check_dim(x)?;
        let dim = x.rows();
        let v = self.dense_dual_matrix().matvec(&x.vec());
        Ok(CMatrix::unvec(&v, dim, dim))
    }

    /// Trace dual through the doubled space: embed on the output modes,
    /// rotate, weight by the ancilla state, compress onto the input modes.
    /// Needs no superoperator, so it scales to every supported mode count.
    pub fn dual_apply_doubled(&self, x: &CMatrix) -> Result<CMatrix> {
        self.check_dim(x)?;
        let u = self.doubled.dilation_big();
        let rotated = u.matmul(&self.doubled.embed_a(x)).matmul(&u.adjoint());
        Ok(self.doubled.compress_b(&self.rho_t_a.matmul(&rotated)))
    }

    pub fn dual_apply(&self, x: &CMatrix) -> Result<CMatrix> {
        if self.n() <= MAX_DENSE_SUPEROP_MODES {
            self.dual_apply_dense(x)
        } else {
            self.dual_apply_doubled(x)
        }
    }

    pub fn symbol_map(&self, q: &CMatrix) -> CMatrix {
        self.pair.symbol_map(q)
    }
}

/// One-shot application; construct an [`EhkChannel`] for repeated use.
pub fn ehk_apply(pair: &CompatiblePair, x: &CMatrix) -> Result<CMatrix> {
    EhkChannel::new(pair.clone())?.apply(x)
}

/// One-shot dual application, auto-routing between the dense adjoint and
/// the doubled-space formula by mode count.
pub fn ehk_dual(pair: &CompatiblePair, x: &CMatrix) -> Result<CMatrix> {
    EhkChannel::new(pair.clone())?.dual_apply(x)
}

/// Dense-adjoint dual only. Refuses mode counts past the dense range
/// before doing any work.
pub fn ehk_dual_dense(pair: &CompatiblePair, x: &CMatrix) -> Result<CMatrix> {
    if pair.n() > MAX_DENSE_SUPEROP_MODES {
        return Err(Error::SizeOutOfRange { n: pair.n(), max: MAX_DENSE_SUPEROP_MODES });
    }
    EhkChannel::new(pair.clone())?.dual_apply_dense(x)
}

/// Phase rotation of a density by the number operator: ρ ↦ e^{-itN} ρ e^{itN}.
pub fn gauge_rotate(rep: &FermionRep, rho: &CMatrix, t: f64) -> CMatrix {
    CMatrix::from_fn(rho.rows(), rho.cols(), |a, b| {
        let phase = t * (rep.occupation(b) as f64 - rep.occupation(a) as f64);
        rho[(a, b)] * Complex64::from_polar(1.0, phase)
    })
}

/// Worst observed commutation defect between the channel and the gauge
/// rotations over sampled angles and densities.
pub fn gauge_covariance_residual<F>(
    rep: &FermionRep,
    apply: F,
    trials: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&CMatrix) -> Result<CMatrix>,
{
    let mut rng = SplitMix64::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let t = rng.uniform_in(0.0, std::f64::consts::TAU);
        let rho = crate::sampling::random_density(&mut rng, rep.dim());
        let lhs = gauge_rotate(rep, &apply(&rho)?, t);
        let rhs = apply(&gauge_rotate(rep, &rho, t))?;
        worst = worst.max(lhs.dist(&rhs));
    }
    Ok(worst)
}

/// Like [`gauge_covariance_residual`] but against the reversed rotation,
/// which is the defect that vanishes for number-conjugating channels.
pub fn gauge_contravariance_residual<F>(
    rep: &FermionRep,
    apply: F,
    trials: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&CMatrix) -> Result<CMatrix>,
{
    let mut rng = SplitMix64::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let t = rng.uniform_in(0.0, std::f64::consts::TAU);
        let rho = crate::sampling::random_density(&mut rng, rep.dim());
        let lhs = gauge_rotate(rep, &apply(&rho)?, t);
        let rhs = apply(&gauge_rotate(rep, &rho, -t))?;
        worst = worst.max(lhs.dist(&rhs));
    }
    Ok(worst)
}

/// Binary measurement followed by state preparation. The two outcome states
/// must differ by a single-signed rank-one symbol gap so every output is
/// Gaussian; the price is a symbol map that is not affine.
pub struct MeasurementChannel {
    e0: CMatrix,
    e1: CMatrix,
    rho0: CMatrix,
    rho1: CMatrix,
    q0: CMatrix,
    q1: CMatrix,
}

impl MeasurementChannel {
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let dim = self.rho0.rows();
        if x.rows() != dim || x.cols() != dim {
            return Err(Error::dim("measurement channel input size"));
        }
        let p0 = self.e0.matmul(x).normalized_trace();
        let p1 = self.e1.matmul(x).normalized_trace();
        Ok(&self.rho0.scale(p0) + &self.rho1.scale(p1))
    }

    /// The exact symbol of the output on a Gaussian input with symbol Q:
    /// Q0 + τ(E1 ρ_Q)(Q1 − Q0).
    pub fn predicted_symbol(&self, rep: &FermionRep, q: &CMatrix) -> Result<CMatrix> {
        let rho = rho_from_symbol(rep, q)?.rho;
        let p1 = self.e1.matmul(&rho).normalized_trace();
        Ok(&self.q0 + &(&self.q1 - &self.q0).scale(p1))
    }
}

pub fn measurement_channel(
    rep: &FermionRep,
    e0: &CMatrix,
    q0: &CMatrix,
    q1: &CMatrix,
) -> Result<MeasurementChannel> {
    let dim = rep.dim();
    if e0.rows() != dim || e0.cols() != dim {
        return Err(Error::InvalidPovm { context: "effect size does not match representation".into() });
    }
    if e0.hermitian_residual() > TOL_HERM {
        return Err(Error::InvalidPovm { context: "effect is not Hermitian".into() });
    }
    let min = min_eigenvalue(e0);
    if min < -TOL_PSD {
        return Err(Error::InvalidPovm { context: format!("effect has eigenvalue {min:.3e} below 0") });
    }
    let complement = &CMatrix::identity(dim) - e0;
    let max_excess = -min_eigenvalue(&complement);
    if max_excess > TOL_PSD {
        return Err(Error::InvalidPovm { context: format!("effect exceeds identity by {max_excess:.3e}") });
    }
    match wolfe_check(q0, q1)? {
        WolfeOutcome::GigMixture => {}
        WolfeOutcome::NotGigMixture => {
            let sv = singular_values(&(q1 - q0));
            let sigma2 = sv.get(1).copied().unwrap_or(0.0);
            return Err(Error::NotRankOneGap { sigma2 });
        }
    }
    Ok(MeasurementChannel {
        e0: e0.clone(),
        e1: complement,
        rho0: rho_from_symbol(rep, q0)?.rho,
        rho1: rho_from_symbol(rep, q1)?.rho,
        q0: q0.clone(),
        q1: q1.clone(),
    })
}

/// Structure of an injective Gaussian-preserving channel: completely
/// positive or its composition with the transpose, each either commuting
/// with the gauge rotations or conjugating them.
#[derive(Debug, Clone)]
pub enum Classification {
    CpCovariant { s: CMatrix, r: CMatrix },
    CoCpCovariant { s: CMatrix, r: CMatrix },
    CpContravariant { s: CMatrix, r: CMatrix },
    CoCpContravariant { s: CMatrix, r: CMatrix },
}

impl Classification {
    pub fn s(&self) -> &CMatrix {
        match self {
            Classification::CpCovariant { s, .. }
            | Classification::CoCpCovariant { s, .. }
            | Classification::CpContravariant { s, .. }
            | Classification::CoCpContravariant { s, .. } => s,
        }
    }

    pub fn r(&self) -> &CMatrix {
        match self {
            Classification::CpCovariant { r, .. }
            | Classification::CoCpCovariant { r, .. }
            | Classification::CpContravariant { r, .. }
            | Classification::CoCpContravariant { r, .. } => r,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Classification::CpCovariant { .. } => "cp_covariant",
            Classification::CoCpCovariant { .. } => "co_cp_covariant",
            Classification::CpContravariant { .. } => "cp_contravariant",
            Classification::CoCpContravariant { .. } => "co_cp_contravariant",
        }
    }

    /// Predicted symbol image under the recovered form.
    pub fn predicted_symbol(&self, conj: &Conjugation, q: &CMatrix) -> CMatrix {
        let id = CMatrix::identity(q.rows());
        let arg = match self {
            Classification::CpCovariant { .. } => q.clone(),
            Classification::CoCpCovariant { .. } => transpose_sym(conj, q),
            Classification::CpContravariant { .. } => &id - &transpose_sym(conj, q),
            Classification::CoCpContravariant { .. } => &id - q,
        };
        let s = self.s();
        &s.matmul(&arg).matmul(&s.adjoint()) + self.r()
    }
}

fn transpose_sym(conj: &Conjugation, q: &CMatrix) -> CMatrix {
    conj.conj_op(q).adjoint()
}

/// Rotates `candidate` by the global phase that best matches `reference`.
/// The classifier recovers S only up to a phase, which this fixes for
/// comparisons.
pub fn phase_align(candidate: &CMatrix, reference: &CMatrix) -> CMatrix {
    let z = candidate.inner(reference);
    if z.norm() < 1e-300 {
        return candidate.clone();
    }
    candidate.scale(z / z.norm())
}

/// Splits a matrix expected to equal conj(S) ⊗ S into its factor, up to a
/// global phase. Returns the factor and the largest block magnitude used.
fn kron_conj_factor(m: &CMatrix, n: usize) -> Option<CMatrix> {
    let mut best = (0usize, 0usize);
    let mut best_norm = -1.0;
    for j in 0..n {
        for l in 0..n {
            let mut norm = 0.0;
            for i in 0..n {
                for k in 0..n {
                    norm += m[(j * n + i, l * n + k)].norm_sqr();
                }
            }
            if norm > best_norm {
                best_norm = norm;
                best = (j, l);
            }
        }
    }
    let (j0, l0) = best;
    let block = CMatrix::from_fn(n, n, |i, k| m[(j0 * n + i, l0 * n + k)]);
    // The (j0, l0) entry of the block is |S[j0,l0]|², real and positive when
    // the product form holds.
    let q0 = block[(j0, l0)].re;
    if q0 <= 1e-24 {
        return None;
    }
    Some(block.scale_re(1.0 / q0.sqrt()))
}

/// Recovers the branch and parameters of an injective channel that maps
/// Gaussian states to Gaussian states. The channel is probed only through
/// `apply`; injectivity is certified on the gauge-invariant span first.
pub fn classify<F>(rep: &FermionRep, conj: &Conjugation, apply: F) -> Result<Classification>
where
    F: Fn(&CMatrix) -> Result<CMatrix>,
{
    let n = rep.n_modes();
    let dim = rep.dim();

    // Injectivity gate: the superoperator restricted to the span of
    // number-preserving matrix units must be bounded below.
    let pairs: Vec<(usize, usize)> = (0..dim)
        .flat_map(|a| (0..dim).map(move |b| (a, b)))
        .filter(|&(a, b)| a.count_ones() == b.count_ones())
        .collect();
    let mut restricted = CMatrix::zeros(dim * dim, pairs.len());
    for (col, &(a, b)) in pairs.iter().enumerate() {
        let mut unit = CMatrix::zeros(dim, dim);
        unit[(a, b)] = cr(1.0);
        let image = apply(&unit)?.vec();
        for (row, value) in image.into_iter().enumerate() {
            restricted[(row, col)] = value;
        }
    }
    let sv = singular_values(&restricted);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    if sigma_min <= INJECTIVITY_TOL {
        return Err(Error::NotInjective { sigma_min });
    }

    let gamma = |q: &CMatrix| -> Result<CMatrix> {
        let rho = rho_from_symbol(rep, q)?.rho;
        symbol_of(rep, &apply(&rho)?)
    };

    let id = CMatrix::identity(n);
    let half = id.scale_re(0.5);
    let g0 = gamma(&CMatrix::zeros(n, n))?;
    let g1 = gamma(&id)?;

    // Derivative of the symbol map at ½I along Hermitian directions. For an
    // affine map the central difference is exact; assembling the images of
    // matrix units gives the complex-linear derivative superoperator.
    let h = PROBE_STEP;
    let probe = |v: &CMatrix| -> Result<CMatrix> {
        let plus = gamma(&(&half + &v.scale_re(h)))?;
        let minus = gamma(&(&half - &v.scale_re(h)))?;
        Ok((&plus - &minus).scale_re(0.5 / h))
    };
    let mut deriv = CMatrix::zeros(n * n, n * n);
    let mut write_column = |unit_row: usize, unit_col: usize, image: &CMatrix| {
        let col = unit_row + n * unit_col;
        let v = image.vec();
        for (row, value) in v.into_iter().enumerate() {
            deriv[(row, col)] = value;
        }
    };
    for p in 0..n {
        let mut e = CMatrix::zeros(n, n);
        e[(p, p)] = cr(1.0);
        let image = probe(&e)?;
        write_column(p, p, &image);
    }
    for p in 0..n {
        for q in (p + 1)..n {
            let mut v_re = CMatrix::zeros(n, n);
            v_re[(p, q)] = cr(1.0);
            v_re[(q, p)] = cr(1.0);
            let mut v_im = CMatrix::zeros(n, n);
            v_im[(p, q)] = Complex64::new(0.0, 1.0);
            v_im[(q, p)] = Complex64::new(0.0, -1.0);
            let psi_re = probe(&v_re)?;
            let psi_im = probe(&v_im)?;
            // E_pq = (V_re − i V_im)/2 and E_qp = (V_re + i V_im)/2.
            let img_pq = (&psi_re - &psi_im.mul_i()).scale_re(0.5);
            let img_qp = (&psi_re + &psi_im.mul_i()).scale_re(0.5);
            write_column(p, q, &img_pq);
            write_column(q, p, &img_qp);
        }
    }

    // vec(V ↦ Vᵀ) permutation, used to undo the transpose in two branches.
    let mut transpose_perm = CMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            transpose_perm[(i + n * j, j + n * i)] = cr(1.0);
        }
    }

    // Extra verification probes beyond the extreme points.
    let mut rng = SplitMix64::new(0x1f9a_c3d5_700b_4e21);
    let qr1 = random_symbol(&mut rng, n);
    let qr2 = random_symbol(&mut rng, n);
    let measured = [
        (CMatrix::zeros(n, n), g0.clone()),
        (half.clone(), gamma(&half)?),
        (id.clone(), g1.clone()),
        (qr1.clone(), gamma(&qr1)?),
        (qr2.clone(), gamma(&qr2)?),
    ];

    let candidates: [(usize, CMatrix, &CMatrix); 4] = [
        (0, deriv.clone(), &g0),
        (1, deriv.matmul(&transpose_perm), &g0),
        (2, deriv.matmul(&transpose_perm).scale_re(-1.0), &g1),
        (3, deriv.scale_re(-1.0), &g1),
    ];

    let mut best: Option<(usize, CMatrix, CMatrix, f64)> = None;
    for (branch, map, r) in candidates {
        let Some(s) = kron_conj_factor(&map, n) else { continue };
        let trial = match branch {
            0 => Classification::CpCovariant { s, r: r.clone() },
            1 => Classification::CoCpCovariant { s, r: r.clone() },
            2 => Classification::CpContravariant { s, r: r.clone() },
            _ => Classification::CoCpContravariant { s, r: r.clone() },
        };
        let mut residual: f64 = 0.0;
        for (q, g) in &measured {
            residual = residual.max(trial.predicted_symbol(conj, q).dist(g));
        }
        if best.as_ref().map_or(true, |(_, _, _, r0)| residual < *r0) {
            best = Some((branch, trial.s().clone(), trial.r().clone(), residual));
        }
    }

    match best {
        Some((branch, s, r, residual)) if residual <= BRANCH_ACCEPT => Ok(match branch {
            0 => Classification::CpCovariant { s, r },
            1 => Classification::CoCpCovariant { s, r },
            2 => Classification::CpContravariant { s, r },
            _ => Classification::CoCpContravariant { s, r },
        }),
        Some((_, _, _, residual)) => Err(Error::NoConsistentBranch { residual }),
        None => Err(Error::NoConsistentBranch { residual: f64::INFINITY }),
    }
}

/// Choi matrix of an applier on dim×dim inputs; positive semidefiniteness
/// is equivalent to complete positivity.
pub fn choi_matrix<F>(dim: usize, apply: F) -> Result<CMatrix>
where
    F: Fn(&CMatrix) -> Result<CMatrix>,
{
    let mut choi = CMatrix::zeros(dim * dim, dim * dim);
    for p in 0..dim {
        for q in 0..dim {
            let mut unit = CMatrix::zeros(dim, dim);
            unit[(p, q)] = cr(1.0);
            let image = apply(&unit)?;
            for a in 0..dim {
                for b in 0..dim {
                    choi[(p * dim + a, q * dim + b)] = image[(a, b)];
                }
            }
        }
    }
    Ok(choi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::car::{embed_homomorphism, particle_hole, transpose_map};
    use crate::cmatrix::c;
    use crate::gig::GigState;
    use crate::linalg::{expm, hermitian_eig, min_eigenvalue};
    use crate::sampling::{
        random_commuting_ht, random_compatible_sr, random_density, random_matrix,
        random_symbol, random_unitary,
    };

    fn random_unit_vec(rng: &mut SplitMix64, n: usize) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = (0..n).map(|_| rng.complex_normal()).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut v {
            *z /= norm;
        }
        v
    }

    #[test]
    fn compatible_pair_validation() {
        let s = CMatrix::diag(&[cr(0.5), cr(0.8)]);
        let r = CMatrix::diag(&[cr(0.3), cr(0.2)]);
        assert!(CompatiblePair::new(s.clone(), r).is_ok());

        let too_big = CMatrix::diag(&[cr(1.4), cr(0.5)]);
        assert!(matches!(
            CompatiblePair::new(too_big, CMatrix::zeros(2, 2)),
            Err(Error::IncompatiblePair { .. })
        ));

        let neg_r = CMatrix::diag(&[cr(-0.1), cr(0.1)]);
        assert!(matches!(
            CompatiblePair::new(s.clone(), neg_r),
            Err(Error::IncompatiblePair { .. })
        ));

        // R ≤ I−SS* fails: defect is diag(0.75, 0.36).
        let r_large = CMatrix::diag(&[cr(0.8), cr(0.2)]);
        assert!(matches!(
            CompatiblePair::new(s, r_large),
            Err(Error::IncompatiblePair { .. })
        ));
    }

    #[test]
    fn ancilla_symbol_examples() {
        let mut rng = SplitMix64::new(41);
        // R = 0 forces T = 0.
        let s = crate::sampling::random_contraction(&mut rng, 3, 0.9);
        let pair = CompatiblePair::new(s, CMatrix::zeros(3, 3)).unwrap();
        assert!(ancilla_symbol(&pair).unwrap().max_abs() < 1e-12);

        // S = 0 leaves T = R.
        let r = random_symbol(&mut rng, 3);
        let pair = CompatiblePair::new(CMatrix::zeros(3, 3), r.clone()).unwrap();
        assert!(ancilla_symbol(&pair).unwrap().dist(&r) < 1e-12);

        // Commuting construction recovers the prescribed T exactly.
        for trial in 0..8 {
            let (h, t0) = random_commuting_ht(&mut SplitMix64::new(500 + trial), 3);
            let eig = hermitian_eig(&h).unwrap();
            let s = eig.apply(|lam| (-lam).exp());
            let id = CMatrix::identity(3);
            let r = (&id - &s.matmul(&s)).matmul(&t0);
            let r = (&r + &r.adjoint()).scale_re(0.5);
            let pair = CompatiblePair::new(s, r).unwrap();
            let t = ancilla_symbol(&pair).unwrap();
            assert!(t.dist(&t0) < 1e-9, "trial {trial}: {}", t.dist(&t0));
        }

        // Reconstruction residual, not silent truncation, when R carries
        // weight on a defect direction below the pseudo-inverse cutoff.
        let s = CMatrix::diag(&[cr(0.0), cr((1.0f64 - 5e-10).sqrt())]);
        let r = CMatrix::diag(&[cr(0.1), cr(4e-10)]);
        let pair = CompatiblePair::new(s, r).unwrap();
        assert!(matches!(ancilla_symbol(&pair), Err(Error::KernelMismatch { .. })));
    }

    #[test]
    fn doubled_rep_invariants() {
        for n in 1..=3usize {
            let mut rng = SplitMix64::new(7 + n as u64);
            let (s, r) = random_compatible_sr(&mut rng, n);
            let pair = CompatiblePair::new(s.clone(), r).unwrap();
            let doubled = DoubledRep::new(&pair).unwrap();
            let u = doubled.dilation();
            assert!(u.hermitian_residual() < 1e-12, "dilation self-adjoint");
            let id2n = CMatrix::identity(2 * n);
            assert!(u.matmul(u).dist(&id2n) < 1e-12, "dilation involutive");
            let j1 = doubled.j1();
            let j2 = doubled.j2();
            let s_back = j2.adjoint().matmul(u).matmul(&j1);
            assert!(s_back.dist(&s) < 1e-12, "compression recovers S");
            let ubig = doubled.dilation_big();
            assert!(ubig.hermitian_residual() < 1e-10, "second-quantized dilation self-adjoint");
            assert_eq!(doubled.a_modes(), (0..n).collect::<Vec<_>>());
            assert_eq!(doubled.b_modes(), (n..2 * n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn doubled_embeddings_match_generic_homomorphism() {
        for n in 1..=2usize {
            let mut rng = SplitMix64::new(100 + n as u64);
            let (s, r) = random_compatible_sr(&mut rng, n);
            let pair = CompatiblePair::new(s, r).unwrap();
            let doubled = DoubledRep::new(&pair).unwrap();
            let small = doubled.small();
            let big = doubled.big();
            let a_map: Vec<usize> = doubled.a_modes();
            let b_map: Vec<usize> = doubled.b_modes();
            for _ in 0..6 {
                let x = random_matrix(&mut rng, small.dim());
                let via_a = embed_homomorphism(small, big, &a_map, &x).unwrap();
                assert!(via_a.dist(&doubled.embed_a(&x)) < 1e-10);
                let via_b = embed_homomorphism(small, big, &b_map, &x).unwrap();
                assert!(via_b.dist(&doubled.embed_b(&x)) < 1e-10);
            }
            // compress_a inverts embed_a, compress_b inverts embed_b.
            let x = random_matrix(&mut rng, small.dim());
            assert!(doubled.compress_a(&doubled.embed_a(&x)).dist(&x) < 1e-11);
            assert!(doubled.compress_b(&doubled.embed_b(&x)).dist(&x) < 1e-11);
        }
    }

    #[test]
    fn tensor_twist_realization_is_swap_conjugate() {
        // The doubled field with the parity twist on the opposite factor is
        // the same representation composed with the coordinate swap, so the
        // second-quantized swap intertwines the two realizations.
        for n in 1..=2usize {
            let pair = CompatiblePair::new(
                CMatrix::identity(n).scale_re(0.5),
                CMatrix::identity(n).scale_re(0.25),
            )
            .unwrap();
            let doubled = DoubledRep::new(&pair).unwrap();
            let small = doubled.small();
            let big = doubled.big();
            let v = &doubled.swap_big;
            let w = small.parity_op();
            let id = CMatrix::identity(small.dim());
            for j in 0..n {
                let twist_a = small.z(j).kron(w);
                let plain_b = id.kron(small.z(j));
                let from_a = v.matmul(big.z(j)).matmul(&v.adjoint());
                assert!(from_a.dist(&twist_a) < 1e-12);
                let from_b = v.matmul(big.z(n + j)).matmul(&v.adjoint());
                assert!(from_b.dist(&plain_b) < 1e-12);
            }
        }
    }

    #[test]
    fn ehk_symbol_law() {
        let mut worst: f64 = 0.0;
        for n in 1..=3usize {
            for trial in 0..7 {
                let mut rng = SplitMix64::new(1000 + (n * 17 + trial) as u64);
                let (s, r) = random_compatible_sr(&mut rng, n);
                let pair = CompatiblePair::new(s, r).unwrap();
                let channel = EhkChannel::new(pair.clone()).unwrap();
                let rep = channel.small_rep();
                let q = random_symbol(&mut rng, n);
                let rho = rho_from_symbol(rep, &q).unwrap().rho;
                let out = channel.apply(&rho).unwrap();
                let got = symbol_of(rep, &out).unwrap();
                worst = worst.max(got.dist(&pair.symbol_map(&q)));
            }
        }
        assert!(worst < 1e-10, "symbol law residual {worst}");
    }

    #[test]
    fn ehk_identity_and_unitary_cases() {
        let mut rng = SplitMix64::new(2024);
        let n = 2;
        let id = CMatrix::identity(n);
        let pair = CompatiblePair::new(id.clone(), CMatrix::zeros(n, n)).unwrap();
        let channel = EhkChannel::new(pair).unwrap();
        for _ in 0..10 {
            let x = random_matrix(&mut rng, channel.small_rep().dim());
            assert!(channel.apply(&x).unwrap().dist(&x) < 1e-11);
        }

        // Unitary S with R = 0 acts by conjugation with the second
        // quantization of S.
        let u = random_unitary(&mut rng, n);
        let pair = CompatiblePair::new(u.clone(), CMatrix::zeros(n, n)).unwrap();
        let channel = EhkChannel::new(pair).unwrap();
        let rep = channel.small_rep();
        let ubig = rep.second_quantize(&u).unwrap();
        for _ in 0..5 {
            let rho = random_density(&mut rng, rep.dim());
            let got = channel.apply(&rho).unwrap();
            let expected = ubig.matmul(&rho).matmul(&ubig.adjoint());
            assert!(got.dist(&expected) < 1e-10);
        }
    }

    #[test]
    fn ehk_trace_preserving_and_cp() {
        for n in 1..=2usize {
            for trial in 0..10 {
                let mut rng = SplitMix64::new(3000 + (n * 31 + trial) as u64);
                let (s, r) = random_compatible_sr(&mut rng, n);
                let channel = EhkChannel::new(CompatiblePair::new(s, r).unwrap()).unwrap();
                let dim = channel.small_rep().dim();
                let rho = random_density(&mut rng, dim);
                let out = channel.apply(&rho).unwrap();
                assert!((out.normalized_trace() - cr(1.0)).norm() < 1e-11, "trace preserved");
                assert!(out.hermitian_residual() < 1e-11);
                let choi = choi_matrix(dim, |x| channel.apply(x)).unwrap();
                let min = min_eigenvalue(&choi);
                assert!(min > -1e-9, "Choi minimum eigenvalue {min}");
            }
        }
    }

    #[test]
    fn ehk_dual_formulas() {
        for n in 2..=3usize {
            let mut rng = SplitMix64::new(4000 + n as u64);
            let (s, r) = random_compatible_sr(&mut rng, n);
            let pair = CompatiblePair::new(s.clone(), r.clone()).unwrap();
            let channel = EhkChannel::new(pair).unwrap();
            let rep = channel.small_rep();
            let id = CMatrix::identity(rep.dim());

            // Unitality through both routes.
            assert!(channel.dual_apply_dense(&id).unwrap().dist(&id) < 1e-11);
            assert!(channel.dual_apply_doubled(&id).unwrap().dist(&id) < 1e-11);

            // Φ†(Z(ψ)) = Z(S*ψ) and the quadratic rule with the R shift.
            for _ in 0..6 {
                let psi = random_unit_vec(&mut rng, n);
                let phi = random_unit_vec(&mut rng, n);
                let s_psi = s.adjoint().matvec(&psi);
                let s_phi = s.adjoint().matvec(&phi);
                let lhs1 = channel.dual_apply(&rep.field(&psi).unwrap()).unwrap();
                assert!(lhs1.dist(&rep.field(&s_psi).unwrap()) < 1e-10);

                let x = rep.field_dag(&psi).unwrap().matmul(&rep.field(&phi).unwrap());
                let lhs2 = channel.dual_apply(&x).unwrap();
                let mut shift = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    for k in 0..n {
                        shift += phi[j].conj() * r[(j, k)] * psi[k];
                    }
                }
                let rhs2 = &rep
                    .field_dag(&s_psi)
                    .unwrap()
                    .matmul(&rep.field(&s_phi).unwrap())
                    + &id.scale(shift);
                assert!(lhs2.dist(&rhs2) < 1e-10);
            }

            // The two dual routes agree, and both are the adjoint in the
            // normalized trace pairing.
            for _ in 0..4 {
                let x = random_matrix(&mut rng, rep.dim());
                let dense = channel.dual_apply_dense(&x).unwrap();
                let doubled = channel.dual_apply_doubled(&x).unwrap();
                assert!(dense.dist(&doubled) < 1e-10);
                let y = random_matrix(&mut rng, rep.dim());
                let lhs = rep.tau(&channel.apply(&y).unwrap().adjoint().matmul(&x));
                let rhs = rep.tau(&y.adjoint().matmul(&dense));
                assert!((lhs - rhs).norm() < 1e-11);
            }
        }

        // The dense-only entry point refuses sizes past the superoperator cap
        // without building anything.
        let s5 = CMatrix::identity(5).scale_re(0.5);
        let r5 = CMatrix::identity(5).scale_re(0.25);
        let pair5 = CompatiblePair::new(s5, r5).unwrap();
        let x5 = CMatrix::identity(32);
        assert!(matches!(
            ehk_dual_dense(&pair5, &x5),
            Err(Error::SizeOutOfRange { n: 5, .. })
        ));
    }

    #[test]
    fn ehk_gauge_covariance() {
        let mut rng = SplitMix64::new(5000);
        for n in 2..=3usize {
            let (s, r) = random_compatible_sr(&mut rng, n);
            let channel = EhkChannel::new(CompatiblePair::new(s, r).unwrap()).unwrap();
            let rep = channel.small_rep();
            let residual =
                gauge_covariance_residual(rep, |x| channel.apply(x), 6, 60 + n as u64).unwrap();
            assert!(residual < 1e-10, "covariance residual {residual}");
        }

        // Composition with the particle-hole flip reverses the rotation.
        let n = 2;
        let (s, r) = random_compatible_sr(&mut rng, n);
        let channel = EhkChannel::new(CompatiblePair::new(s, r).unwrap()).unwrap();
        let rep = channel.small_rep();
        let conj = Conjugation::new(rep);
        let ph = particle_hole(rep, &conj).unwrap();
        let composed = |x: &CMatrix| channel.apply(&ph.apply(x));
        let contra = gauge_contravariance_residual(rep, composed, 6, 77).unwrap();
        assert!(contra < 1e-10, "contravariance residual {contra}");
        let co = gauge_covariance_residual(rep, composed, 6, 78).unwrap();
        assert!(co > 1e-3, "covariance residual should be visible, got {co}");
    }

    #[test]
    fn detailed_balance_for_commuting_pairs() {
        for n in 2..=3usize {
            let mut rng = SplitMix64::new(6000 + n as u64);
            let (h, t0) = random_commuting_ht(&mut rng, n);
            let eig = hermitian_eig(&h).unwrap();
            let s = eig.apply(|lam| (-lam).exp());
            let id = CMatrix::identity(n);
            let r = (&id - &s.matmul(&s)).matmul(&t0);
            let r = (&r + &r.adjoint()).scale_re(0.5);
            let channel = EhkChannel::new(CompatiblePair::new(s, r).unwrap()).unwrap();
            let rep = channel.small_rep();
            let rho_t = rho_from_symbol(rep, channel.ancilla()).unwrap().rho;
            let mut worst: f64 = 0.0;
            for _ in 0..5 {
                let x = random_matrix(&mut rng, rep.dim());
                let y = random_matrix(&mut rng, rep.dim());
                let lhs = rep.tau(&rho_t.matmul(&x.adjoint()).matmul(&channel.dual_apply(&y).unwrap()));
                let rhs = rep.tau(&rho_t.matmul(&channel.dual_apply(&x).unwrap().adjoint()).matmul(&y));
                worst = worst.max((lhs - rhs).norm());
            }
            assert!(worst < 1e-10, "detailed balance residual {worst}");
        }
    }

    #[test]
    fn dual_factorizes_over_invariant_splits() {
        // Diagonal H and T leave every coordinate split invariant.
        let n = 3;
        let mut rng = SplitMix64::new(7000);
        let hvals = [0.4, 0.9, 1.3];
        let tvals = [0.15, 0.6, 0.8];
        let h = CMatrix::diag(&hvals.map(cr));
        let t0 = CMatrix::diag(&tvals.map(cr));
        let eig = hermitian_eig(&h).unwrap();
        let s = eig.apply(|lam| (-lam).exp());
        let id = CMatrix::identity(n);
        let r = (&id - &s.matmul(&s)).matmul(&t0);
        let channel = EhkChannel::new(CompatiblePair::new(s, r).unwrap()).unwrap();
        let rep = channel.small_rep();

        let rep1 = FermionRep::new(1).unwrap();
        let rep2 = FermionRep::new(2).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let x_small = random_matrix(&mut rng, rep1.dim());
            let y_small = random_matrix(&mut rng, rep2.dim());
            let x = embed_homomorphism(&rep1, rep, &[0], &x_small).unwrap();
            let y = embed_homomorphism(&rep2, rep, &[1, 2], &y_small).unwrap();
            let lhs = channel.dual_apply(&x.matmul(&y)).unwrap();
            let rhs = channel
                .dual_apply(&x)
                .unwrap()
                .matmul(&channel.dual_apply(&y).unwrap());
            worst = worst.max(lhs.dist(&rhs));
        }
        assert!(worst < 1e-10, "factorization residual {worst}");
    }

    #[test]
    fn symbol_composition_law() {
        for n in 2..=3usize {
            let mut rng = SplitMix64::new(8000 + n as u64);
            let (s1, r1) = random_compatible_sr(&mut rng, n);
            let (s2, r2) = random_compatible_sr(&mut rng, n);
            let c1 = EhkChannel::new(CompatiblePair::new(s1.clone(), r1.clone()).unwrap()).unwrap();
            let c2 = EhkChannel::new(CompatiblePair::new(s2.clone(), r2.clone()).unwrap()).unwrap();
            let rep = c1.small_rep();
            let q = random_symbol(&mut rng, n);
            let rho = rho_from_symbol(rep, &q).unwrap().rho;
            let out = c2.apply(&c1.apply(&rho).unwrap()).unwrap();
            let got = symbol_of(rep, &out).unwrap();
            let s21 = s2.matmul(&s1);
            let expected = &s21.matmul(&q).matmul(&s21.adjoint())
                + &(&r2 + &s2.matmul(&r1).matmul(&s2.adjoint()));
            assert!(got.dist(&expected) < 1e-10);
        }
    }

    #[test]
    fn measurement_channel_behavior() {
        let n = 2;
        let rep = FermionRep::new(n).unwrap();
        let q0 = CMatrix::diag(&[cr(0.1), cr(0.1)]);
        let mut q1 = q0.clone();
        q1[(0, 0)] = cr(0.6);

        // E0 = I collapses everything onto the first prepared state.
        let id = CMatrix::identity(rep.dim());
        let constant = measurement_channel(&rep, &id, &q0, &q1).unwrap();
        let rho0 = rho_from_symbol(&rep, &q0).unwrap().rho;
        let mut rng = SplitMix64::new(9000);
        for _ in 0..5 {
            let rho = random_density(&mut rng, rep.dim());
            assert!(constant.apply(&rho).unwrap().dist(&rho0) < 1e-12);
        }

        // Vacuum-projector effect: exact symbol prediction on Gaussian inputs.
        let mut e0 = CMatrix::zeros(rep.dim(), rep.dim());
        e0[(rep.vacuum_index(), rep.vacuum_index())] = cr(1.0);
        let channel = measurement_channel(&rep, &e0, &q0, &q1).unwrap();
        for _ in 0..6 {
            let q = random_symbol(&mut rng, n);
            let rho = rho_from_symbol(&rep, &q).unwrap().rho;
            let got = symbol_of(&rep, &channel.apply(&rho).unwrap()).unwrap();
            let predicted = channel.predicted_symbol(&rep, &q).unwrap();
            assert!(got.dist(&predicted) < 1e-10);
        }

        // The symbol map is visibly non-affine.
        let qa = CMatrix::diag(&[cr(0.2), cr(0.2)]);
        let qb = CMatrix::diag(&[cr(0.8), cr(0.8)]);
        let mid = (&qa + &qb).scale_re(0.5);
        let g = |q: &CMatrix| {
            let rho = rho_from_symbol(&rep, q).unwrap().rho;
            symbol_of(&rep, &channel.apply(&rho).unwrap()).unwrap()
        };
        let violation = g(&mid).dist(&(&g(&qa) + &g(&qb)).scale_re(0.5));
        assert!(violation > 1e-4, "affinity violation {violation}");

        // Invalid effects and non-rank-one gaps are rejected.
        let bad = id.scale_re(1.5);
        assert!(matches!(
            measurement_channel(&rep, &bad, &q0, &q1),
            Err(Error::InvalidPovm { .. })
        ));
        let q_rank2 = CMatrix::diag(&[cr(0.5), cr(0.4)]);
        assert!(matches!(
            measurement_channel(&rep, &e0, &q0, &q_rank2),
            Err(Error::NotRankOneGap { .. })
        ));
    }

    #[test]
    fn classifier_recovers_all_four_branches() {
        let n = 2;
        let mut rng = SplitMix64::new(11000);
        let (s, r) = random_compatible_sr(&mut rng, n);
        let channel = EhkChannel::new(CompatiblePair::new(s.clone(), r.clone()).unwrap()).unwrap();
        let rep = FermionRep::new(n).unwrap();
        let conj = Conjugation::new(&rep);
        let ph = particle_hole(&rep, &conj).unwrap();

        let check = |result: Result<Classification>, expected: &str| {
            let class = result.unwrap();
            assert_eq!(class.name(), expected);
            let s_aligned = phase_align(class.s(), &s);
            assert!(s_aligned.dist(&s) < 1e-7, "{expected}: S residual {}", s_aligned.dist(&s));
            assert!(class.r().dist(&r) < 1e-7, "{expected}: R residual {}", class.r().dist(&r));
        };

        check(classify(&rep, &conj, |x| channel.apply(x)), "cp_covariant");
        check(
            classify(&rep, &conj, |x| channel.apply(&transpose_map(&rep, &conj, x)?)),
            "co_cp_covariant",
        );
        check(
            classify(&rep, &conj, |x| channel.apply(&ph.apply(x))),
            "cp_contravariant",
        );
        check(
            classify(&rep, &conj, |x| {
                channel.apply(&ph.apply(&transpose_map(&rep, &conj, x)?))
            }),
            "co_cp_contravariant",
        );
    }

    #[test]
    fn classifier_rejects_non_injective_channels() {
        let n = 2;
        let rep = FermionRep::new(n).unwrap();
        let conj = Conjugation::new(&rep);

        // S = 0 erases everything but the ancilla.
        let pair = CompatiblePair::new(CMatrix::zeros(n, n), CMatrix::identity(n).scale_re(0.5))
            .unwrap();
        let constant = EhkChannel::new(pair).unwrap();
        assert!(matches!(
            classify(&rep, &conj, |x| constant.apply(x)),
            Err(Error::NotInjective { .. })
        ));

        // Measurement channels have huge kernels.
        let q0 = CMatrix::diag(&[cr(0.2), cr(0.3)]);
        let mut q1 = q0.clone();
        q1[(1, 1)] = cr(0.7);
        let mut e0 = CMatrix::zeros(rep.dim(), rep.dim());
        e0[(0, 0)] = cr(1.0);
        let m = measurement_channel(&rep, &e0, &q0, &q1).unwrap();
        assert!(matches!(
            classify(&rep, &conj, |x| m.apply(x)),
            Err(Error::NotInjective { .. })
        ));
    }

    #[test]
    fn gig_states_stay_gig_under_channel() {
        let n = 3;
        let mut rng = SplitMix64::new(12000);
        let (s, r) = random_compatible_sr(&mut rng, n);
        let channel = EhkChannel::new(CompatiblePair::new(s, r).unwrap()).unwrap();
        let rep = channel.small_rep();
        let q = random_symbol(&mut rng, n);
        let GigState { rho, .. } = rho_from_symbol(rep, &q).unwrap();
        let out = channel.apply(&rho).unwrap();
        let residual = crate::gig::is_gig(rep, &out, 40, 13).unwrap();
        assert!(residual < 1e-9, "moment residual {residual}");
    }

    #[test]
    fn expm_consistency_on_generator_example() {
        // e^{-H} built by eigendecomposition matches the series exponential.
        let mut rng = SplitMix64::new(13000);
        let h = crate::sampling::random_psd(&mut rng, 3);
        let via_eig = hermitian_eig(&h).unwrap().apply(|lam| (-lam).exp());
        let via_series = expm(&h.scale(c(-1.0, 0.0))).unwrap();
        assert!(via_eig.dist(&via_series) < 1e-11);
    }
}
