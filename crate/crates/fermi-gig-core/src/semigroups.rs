//! Quantum dynamical semigroups of gauge-covariant channels.
//!
//! A semigroup of channels on the CAR algebra is parameterized by a pair
//! (G, A): G generates a contraction semigroup on mode space and A is a noise
//! rate with 0 ≤ A ≤ −(G + G*). The time-t member is the channel with
//! contraction e^{tG} and accumulated noise R_t = ∫₀ᵗ e^{sG} A e^{sG*} ds, so
//! the symbol flows by Q ↦ e^{tG} Q e^{tG*} + R_t. Differentiating at t = 0
//! yields a Lindblad generator whose Hamiltonian part is the bilinear lift of
//! K = (G − G*)/(2i) and whose jump vectors are φ_j = (2H)^{1/2} η_j for an
//! eigenbasis η_j of the rate symbol T = (2H)^{-1/2} A (2H)^{-1/2}, with
//! H = −(G + G*)/2. `finite_difference_generator` recomputes the derivative
//! straight from the channel family and is the reference the closed Lindblad
//! form is tested against.
//!
//! When G = −H is self-adjoint and [H, A] = 0 the dynamics is diagonalized by
//! products of per-mode operators {1, Z*(ψ), Z(ψ), Z*(ψ)Z(ψ) − μ}: see
//! `hermite_basis`. The dual channel multiplies such a product by
//! e^{−Σ (a_j + b_j) λ_j}, and the matching density ρ_T is a steady state.
//! `steady_states` describes all fixed symbols of a single channel through
//! the limit projection P = lim Sⁿ, and `embed_check` decides whether a given
//! (S, R) = (e^G, R) sits inside a semigroup by solving a Stein equation for
//! the rate A and testing 0 ≤ A ≤ −(G + G*).
//!
//! The generator depends linearly on (G, A), so nonnegative combinations of
//! parameter pairs realize conic combinations of generators (`cone_combine`).
//! `skew_derivation` and `carre_du_champ` provide the first-order calculus:
//! the carré du champ of the generator factors through the skew derivations
//! ∂_φ and ∂̄_φ twisted by the parity automorphism.

use num_complex::Complex64;

use crate::car::FermionRep;
use crate::channels::{CompatiblePair, EhkChannel};
use crate::cmatrix::{commutator, superop_matrix, CMatrix};
use crate::config::{
    COHERENT_COEFF, KERNEL_TOL, MAX_DENSE_SUPEROP_MODES, POWER_CONV_TOL, POWER_MAX_SQUARINGS,
    TOL_HERM, TOL_PSD,
};
use crate::error::{Error, Result};
use crate::gig::validate_symbol;
use crate::linalg::{
    expm, hermitian_eig, is_psd_within, loewner_leq, lyapunov_accumulate, min_eigenvalue,
    nullspace, psd_function, stein_series, stein_solve, PsdFn,
};

/// Commutator tolerance for data that must share an eigenbasis.
const COMMUTING_TOL: f64 = 1e-10;
/// Eigenvalue grouping width when splitting degenerate eigenspaces.
const DEGENERACY_TOL: f64 = 1e-8;

fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + &m.adjoint()).scale_re(0.5)
}

/// Parameter pair (G, A) of a semigroup of gauge-covariant channels:
/// G + G* ≤ 0 and 0 ≤ A ≤ −(G + G*).
#[derive(Debug, Clone)]
pub struct SemigroupParams {
    g: CMatrix,
    a: CMatrix,
}

impl SemigroupParams {
    pub fn new(g: CMatrix, a: CMatrix) -> Result<Self> {
        let n = g.require_square()?;
        if a.rows() != n || a.cols() != n {
            return Err(Error::dim(format!(
                "semigroup params: A is {}x{}, G is {}x{}",
                a.rows(),
                a.cols(),
                n,
                n
            )));
        }
        let two_h = (&g + &g.adjoint()).scale_re(-1.0);
        let min_h = min_eigenvalue(&two_h);
        if min_h < -TOL_PSD * g.frobenius_norm().max(1.0) {
            return Err(Error::InvalidParams {
                context: format!("G + G* has a positive eigenvalue ({:.3e})", -min_h),
            });
        }
        let herm = a.hermitian_residual();
        if herm > TOL_HERM * a.frobenius_norm().max(1.0) {
            return Err(Error::InvalidParams {
                context: format!("rate matrix is not Hermitian (residual {:.3e})", herm),
            });
        }
        if !is_psd_within(&a, TOL_PSD) {
            return Err(Error::InvalidParams {
                context: format!(
                    "rate matrix has a negative eigenvalue ({:.3e})",
                    min_eigenvalue(&a)
                ),
            });
        }
        if !loewner_leq(&a, &two_h, TOL_PSD) {
            return Err(Error::InvalidParams {
                context: "rate matrix exceeds -(G + G*)".into(),
            });
        }
        Ok(SemigroupParams { g, a })
    }

    /// Self-adjoint drift with commuting target symbol: G = −H, A = HT + TH.
    /// The semigroup then relaxes onto the state with symbol T.
    pub fn mehler(h: &CMatrix, t_sym: &CMatrix) -> Result<Self> {
        let comm = commutator(h, t_sym).frobenius_norm();
        let scale = (h.frobenius_norm() * t_sym.frobenius_norm()).max(1.0);
        if comm > COMMUTING_TOL * scale {
            return Err(Error::NonCommuting { residual: comm });
        }
        validate_symbol(t_sym)?;
        let a = symmetrize(&(&(h * t_sym) + &(t_sym * h)));
        SemigroupParams::new(h.scale_re(-1.0), a)
    }

    pub fn n(&self) -> usize {
        self.g.rows()
    }

    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    /// −(G + G*) = 2H, the total jump rate.
    pub fn two_h(&self) -> CMatrix {
        (&self.g + &self.g.adjoint()).scale_re(-1.0)
    }

    /// Accumulated noise R_t = ∫₀ᵗ e^{sG} A e^{sG*} ds.
    pub fn noise_at(&self, t: f64) -> Result<CMatrix> {
        let r = lyapunov_accumulate(&self.g, &self.a, t)?;
        Ok(symmetrize(&r))
    }

    /// The time-t member (e^{tG}, R_t) of the channel semigroup.
    pub fn pair_at(&self, t: f64) -> Result<CompatiblePair> {
        let s = expm(&self.g.scale_re(t))?;
        CompatiblePair::new(s, self.noise_at(t)?)
    }
}

/// Nonnegative combination (aG1 + bG2, aA1 + bA2). The Lindblad generator is
/// linear in the parameter pair, so this realizes aℒ1 + bℒ2.
pub fn cone_combine(
    p1: &SemigroupParams,
    p2: &SemigroupParams,
    a: f64,
    b: f64,
) -> Result<SemigroupParams> {
    if a < 0.0 {
        return Err(Error::NegativeWeight { weight: a });
    }
    if b < 0.0 {
        return Err(Error::NegativeWeight { weight: b });
    }
    if p1.n() != p2.n() {
        return Err(Error::dim(format!(
            "cone combine: {} modes vs {}",
            p1.n(),
            p2.n()
        )));
    }
    SemigroupParams::new(
        &p1.g.scale_re(a) + &p2.g.scale_re(b),
        &p1.a.scale_re(a) + &p2.a.scale_re(b),
    )
}

/// Lindblad form of a generator: Hamiltonian lift K̂ plus jump vectors φ_j
/// with weights λ_j ∈ [0, 1] satisfying Σ λ_j|φ_j⟩⟨φ_j| = A and
/// Σ |φ_j⟩⟨φ_j| = 2H.
#[derive(Debug, Clone)]
pub struct GeneratorData {
    h: CMatrix,
    k: CMatrix,
    t_sym: CMatrix,
    jump_vectors: Vec<Vec<Complex64>>,
    jump_weights: Vec<f64>,
    khat: CMatrix,
}

impl GeneratorData {
    /// H = −(G + G*)/2.
    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    /// K = (G − G*)/(2i).
    pub fn k(&self) -> &CMatrix {
        &self.k
    }

    /// T = (2H)^{-1/2} A (2H)^{-1/2} on ran(H); the relaxation target symbol.
    pub fn rate_symbol(&self) -> &CMatrix {
        &self.t_sym
    }

    pub fn jump_vectors(&self) -> &[Vec<Complex64>] {
        &self.jump_vectors
    }

    pub fn jump_weights(&self) -> &[f64] {
        &self.jump_weights
    }

    /// Bilinear lift Σ K_{jk} Z*_j Z_k of the Hamiltonian matrix.
    pub fn khat(&self) -> &CMatrix {
        &self.khat
    }
}

/// Splits (G, A) into Hamiltonian and jump data. Jump vectors from ker H have
/// zero length and are dropped; their Lindblad terms vanish identically.
pub fn generator_data(params: &SemigroupParams, rep: &FermionRep) -> Result<GeneratorData> {
    if rep.n_modes() != params.n() {
        return Err(Error::dim(format!(
            "generator data: {} modes, params for {}",
            rep.n_modes(),
            params.n()
        )));
    }
    let h = symmetrize(&(&params.g + &params.g.adjoint()).scale_re(-0.5));
    let k = symmetrize(&(&params.g - &params.g.adjoint()).mul_i().scale_re(-0.5));
    let two_h = h.scale_re(2.0);
    let eig_h = hermitian_eig(&two_h)?;
    let lam_max = eig_h.values.last().copied().unwrap_or(0.0).max(0.0);
    let sqrt_h = eig_h.apply(|l| l.max(0.0).sqrt());
    let inv_sqrt = psd_function(&two_h, PsdFn::InvSqrtPinv)?;
    let t_sym = symmetrize(&(&(&inv_sqrt * &params.a) * &inv_sqrt));
    let eig_t = validate_symbol(&t_sym)?;
    let cut = KERNEL_TOL * lam_max.max(1e-300);
    let mut jump_vectors = Vec::new();
    let mut jump_weights = Vec::new();
    for j in 0..params.n() {
        let eta = eig_t.vectors.column(j);
        let phi = sqrt_h.matvec(&eta);
        let norm2: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= cut {
            continue;
        }
        jump_vectors.push(phi);
        jump_weights.push(eig_t.values[j].clamp(0.0, 1.0));
    }
    let khat = rep.hat(&k)?;
    Ok(GeneratorData {
        h,
        k,
        t_sym,
        jump_vectors,
        jump_weights,
        khat,
    })
}

fn gamma(rep: &FermionRep, x: &CMatrix) -> CMatrix {
    let w = rep.parity_op();
    &(w * x) * w
}

fn lindblad_dual_with_coeff(
    data: &GeneratorData,
    rep: &FermionRep,
    x: &CMatrix,
    coeff: f64,
) -> CMatrix {
    let gx = gamma(rep, x);
    let mut acc = commutator(&data.khat, x).mul_i().scale_re(coeff);
    for (phi, &lam) in data.jump_vectors.iter().zip(&data.jump_weights) {
        let zd = rep.field_dag(phi).expect("jump vector length fixed by construction");
        let z = zd.adjoint();
        let n0 = &zd * &z;
        let jump0 = &(&(&zd * &gx) * &z) - &(&(&n0 * x) + &(x * &n0)).scale_re(0.5);
        let n1 = &z * &zd;
        let jump1 = &(&(&z * &gx) * &zd) - &(&(&n1 * x) + &(x * &n1)).scale_re(0.5);
        acc = &acc + &(&jump0.scale_re(1.0 - lam) + &jump1.scale_re(lam));
    }
    acc
}

fn lindblad_dual_unchecked(data: &GeneratorData, rep: &FermionRep, x: &CMatrix) -> CMatrix {
    lindblad_dual_with_coeff(data, rep, x, COHERENT_COEFF)
}

/// Dual (observable-side) Lindblad generator,
/// ℒ†(X) = Σ_j (1−λ_j)(Z*(φ_j) W X W Z(φ_j) − ½{Z*(φ_j)Z(φ_j), X})
///       + Σ_j λ_j (Z(φ_j) W X W Z*(φ_j) − ½{Z(φ_j)Z*(φ_j), X})
///       + c·i[K̂, X],
/// with the coherent coefficient c calibrated against the finite-difference
/// generator (see the calibration test).
pub fn lindblad_dual_apply(data: &GeneratorData, rep: &FermionRep, x: &CMatrix) -> Result<CMatrix> {
    if x.rows() != rep.dim() || x.cols() != rep.dim() {
        return Err(Error::dim(format!(
            "generator input is {}x{}, rep dimension {}",
            x.rows(),
            x.cols(),
            rep.dim()
        )));
    }
    Ok(lindblad_dual_unchecked(data, rep, x))
}

fn lindblad_unchecked(data: &GeneratorData, rep: &FermionRep, rho: &CMatrix) -> CMatrix {
    let w = rep.parity_op();
    let mut acc = commutator(&data.khat, rho).mul_i().scale_re(-COHERENT_COEFF);
    for (phi, &lam) in data.jump_vectors.iter().zip(&data.jump_weights) {
        let zd = rep.field_dag(phi).expect("jump vector length fixed by construction");
        let z = zd.adjoint();
        let wz = w * &z;
        let wzd = w * &zd;
        let n0 = &zd * &z;
        let jump0 = &(&(&wz * rho) * &wz.adjoint()) - &(&(&n0 * rho) + &(rho * &n0)).scale_re(0.5);
        let n1 = &z * &zd;
        let jump1 =
            &(&(&wzd * rho) * &wzd.adjoint()) - &(&(&n1 * rho) + &(rho * &n1)).scale_re(0.5);
        acc = &acc + &(&jump0.scale_re(1.0 - lam) + &jump1.scale_re(lam));
    }
    acc
}

/// Primal (state-side) generator: the trace-pairing adjoint of
/// `lindblad_dual_apply`. Traceless and Hermiticity-preserving.
pub fn lindblad_apply(data: &GeneratorData, rep: &FermionRep, rho: &CMatrix) -> Result<CMatrix> {
    if rho.rows() != rep.dim() || rho.cols() != rep.dim() {
        return Err(Error::dim(format!(
            "generator input is {}x{}, rep dimension {}",
            rho.rows(),
            rho.cols(),
            rep.dim()
        )));
    }
    Ok(lindblad_unchecked(data, rep, rho))
}

/// Difference quotient (Φ†_{e^{tG},R_t}(X) − X)/t at t = step, Richardson
/// extrapolated over {step, step/2}. This is the defining derivative of the
/// semigroup and the ground truth for the closed Lindblad form.
pub fn finite_difference_generator(
    params: &SemigroupParams,
    rep: &FermionRep,
    x: &CMatrix,
    step: f64,
) -> Result<CMatrix> {
    assert!(
        step > 0.0 && step <= 1e-2,
        "finite-difference step must lie in (0, 1e-2]"
    );
    if x.rows() != rep.dim() || x.cols() != rep.dim() {
        return Err(Error::dim(format!(
            "difference quotient input is {}x{}, rep dimension {}",
            x.rows(),
            x.cols(),
            rep.dim()
        )));
    }
    let quotient = |t: f64| -> Result<CMatrix> {
        let channel = EhkChannel::new(params.pair_at(t)?)?;
        let y = channel.dual_apply_doubled(x)?;
        Ok((&y - x).scale_re(1.0 / t))
    };
    let d_full = quotient(step)?;
    let d_half = quotient(0.5 * step)?;
    Ok(&d_half.scale_re(2.0) - &d_full)
}

/// e^{tℒ}ρ0. Routes to the dense superoperator exponential for small mode
/// counts and to adaptive RK4 above `MAX_DENSE_SUPEROP_MODES`.
pub fn evolve(params: &SemigroupParams, rep: &FermionRep, rho0: &CMatrix, t: f64) -> Result<CMatrix> {
    if rep.n_modes() <= MAX_DENSE_SUPEROP_MODES {
        evolve_dense(params, rep, rho0, t)
    } else {
        evolve_rk4(params, rep, rho0, t)
    }
}

/// e^{tℒ}ρ0 via the exponential of the dense superoperator matrix.
pub fn evolve_dense(
    params: &SemigroupParams,
    rep: &FermionRep,
    rho0: &CMatrix,
    t: f64,
) -> Result<CMatrix> {
    let n = rep.n_modes();
    if n > MAX_DENSE_SUPEROP_MODES {
        return Err(Error::SizeOutOfRange {
            n,
            max: MAX_DENSE_SUPEROP_MODES,
        });
    }
    assert!(t >= 0.0, "evolution time must be nonnegative");
    let data = generator_data(params, rep)?;
    if rho0.rows() != rep.dim() || rho0.cols() != rep.dim() {
        return Err(Error::dim(format!(
            "state is {}x{}, rep dimension {}",
            rho0.rows(),
            rho0.cols(),
            rep.dim()
        )));
    }
    let dim = rep.dim();
    let lmat = superop_matrix(dim, |e| lindblad_unchecked(&data, rep, e));
    let prop = expm(&lmat.scale_re(t))?;
    Ok(CMatrix::unvec(&prop.matvec(&rho0.vec()), dim, dim))
}

fn rk4_step(l: &impl Fn(&CMatrix) -> CMatrix, rho: &CMatrix, h: f64) -> CMatrix {
    let k1 = l(rho);
    let k2 = l(&(rho + &k1.scale_re(0.5 * h)));
    let k3 = l(&(rho + &k2.scale_re(0.5 * h)));
    let k4 = l(&(rho + &k3.scale_re(h)));
    rho + &(&(&k1 + &k4) + &(&k2 + &k3).scale_re(2.0)).scale_re(h / 6.0)
}

/// e^{tℒ}ρ0 by classical RK4 with step doubling: each step is accepted when
/// the Richardson error estimate ‖full − two halves‖/15 stays below 1e-10.
pub fn evolve_rk4(
    params: &SemigroupParams,
    rep: &FermionRep,
    rho0: &CMatrix,
    t: f64,
) -> Result<CMatrix> {
    assert!(t >= 0.0, "evolution time must be nonnegative");
    let data = generator_data(params, rep)?;
    if rho0.rows() != rep.dim() || rho0.cols() != rep.dim() {
        return Err(Error::dim(format!(
            "state is {}x{}, rep dimension {}",
            rho0.rows(),
            rho0.cols(),
            rep.dim()
        )));
    }
    let l = |m: &CMatrix| lindblad_unchecked(&data, rep, m);
    let rate: f64 = data.jump_vectors.iter().flatten().map(|z| z.norm_sqr()).sum();
    let norm_est = (2.0 * rate + 2.0 * data.khat.frobenius_norm()).max(1e-6);
    let h_cap = 0.05 / norm_est;
    let mut h = h_cap.min(t.max(1e-12));
    let mut rho = rho0.clone();
    let mut time = 0.0;
    while time < t - 1e-13 * t.max(1.0) {
        let step = h.min(t - time);
        let full = rk4_step(&l, &rho, step);
        let mid = rk4_step(&l, &rho, 0.5 * step);
        let halves = rk4_step(&l, &mid, 0.5 * step);
        let err = full.dist(&halves) / 15.0;
        if err > 1e-10 && step > 1e-12 {
            h = 0.5 * step;
            continue;
        }
        rho = halves;
        time += step;
        if err < 1e-12 {
            h = (1.5 * h).min(h_cap);
        }
    }
    Ok(rho)
}

/// n-fold product of the time-t/n channel applied to ρ0. Converges to
/// evolve(t) at rate O(1/n); exact at every n when G is self-adjoint and
/// commutes with A.
pub fn chernoff_product(
    params: &SemigroupParams,
    rep: &FermionRep,
    rho0: &CMatrix,
    t: f64,
    n: usize,
) -> Result<CMatrix> {
    assert!(n >= 1, "chernoff product needs at least one factor");
    if rep.n_modes() != params.n() {
        return Err(Error::dim(format!(
            "chernoff: {} modes, params for {}",
            rep.n_modes(),
            params.n()
        )));
    }
    let channel = EhkChannel::new(params.pair_at(t / n as f64)?)?;
    let mut rho = rho0.clone();
    for _ in 0..n {
        rho = channel.apply(&rho)?;
    }
    Ok(rho)
}

/// Time-t relaxation channel data (e^{−tH}, (1 − e^{−2tH})T) for commuting
/// (H, T).
pub fn mehler_pair(h: &CMatrix, t_sym: &CMatrix, time: f64) -> Result<CompatiblePair> {
    let comm = commutator(h, t_sym).frobenius_norm();
    let scale = (h.frobenius_norm() * t_sym.frobenius_norm()).max(1.0);
    if comm > COMMUTING_TOL * scale {
        return Err(Error::NonCommuting { residual: comm });
    }
    let s = expm(&h.scale_re(-time))?;
    let r = symmetrize(&(t_sym - &(&(&s * t_sym) * &s)));
    CompatiblePair::new(s, r)
}

/// One diagonalizing mode of a commuting pair (H, T): shared eigenvector ψ
/// with H-eigenvalue λ and T-eigenvalue μ.
#[derive(Debug, Clone)]
pub struct HermiteMode {
    pub vector: Vec<Complex64>,
    pub lambda: f64,
    pub mu: f64,
}

/// One product element H_𝐚 with its dual eigenvalue under the time-1
/// relaxation channel.
#[derive(Debug, Clone)]
pub struct HermiteElement {
    /// Per-mode exponents (a_j, b_j): factor I, Z*(ψ_j), Z(ψ_j), or
    /// Z*(ψ_j)Z(ψ_j) − μ_j for (0,0), (1,0), (0,1), (1,1).
    pub label: Vec<(u8, u8)>,
    pub op: CMatrix,
    /// e^{−Σ_j (a_j + b_j) λ_j}.
    pub eigenvalue: f64,
}

/// Eigenbasis of a relaxation semigroup, orthogonal in the GNS inner product
/// of the target state ρ_T.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    pub modes: Vec<HermiteMode>,
    pub elements: Vec<HermiteElement>,
}

/// Product eigenbasis for commuting (H, T): per mode j the factors
/// {1, Z*(ψ_j), Z(ψ_j), Z*(ψ_j)Z(ψ_j) − μ_j}, multiplied in increasing mode
/// order. Requires ker H ⊆ ker T so every decay rate is defined.
pub fn hermite_basis(rep: &FermionRep, h: &CMatrix, t_sym: &CMatrix) -> Result<HermiteBasis> {
    let n = h.require_square()?;
    if rep.n_modes() != n || t_sym.rows() != n || t_sym.cols() != n {
        return Err(Error::dim(format!(
            "hermite basis: H is {}x{}, T is {}x{}, rep has {} modes",
            n,
            n,
            t_sym.rows(),
            t_sym.cols(),
            rep.n_modes()
        )));
    }
    let comm = commutator(h, t_sym).frobenius_norm();
    let scale = (h.frobenius_norm() * t_sym.frobenius_norm()).max(1.0);
    if comm > COMMUTING_TOL * scale {
        return Err(Error::NonCommuting { residual: comm });
    }
    if !is_psd_within(h, TOL_PSD) {
        return Err(Error::InvalidParams {
            context: format!(
                "mode Hamiltonian has a negative eigenvalue ({:.3e})",
                min_eigenvalue(h)
            ),
        });
    }
    validate_symbol(t_sym)?;
    let eig_h = hermitian_eig(h)?;
    let lam_max = eig_h.values.last().copied().unwrap_or(0.0).max(0.0);
    let mut modes = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig_h.values[end] - eig_h.values[end - 1] <= DEGENERACY_TOL * lam_max.max(1.0)
        {
            end += 1;
        }
        // T preserves each eigenspace of H; diagonalize its compression.
        let block = end - start;
        let mut v = CMatrix::zeros(n, block);
        for (c, col) in (start..end).enumerate() {
            let column = eig_h.vectors.column(col);
            for r in 0..n {
                v[(r, c)] = column[r];
            }
        }
        let compressed = symmetrize(&(&(&v.adjoint() * t_sym) * &v));
        let eig_c = hermitian_eig(&compressed)?;
        let rotated = &v * &eig_c.vectors;
        let lambda_mean: f64 = eig_h.values[start..end].iter().sum::<f64>() / block as f64;
        for c in 0..block {
            modes.push(HermiteMode {
                vector: rotated.column(c),
                lambda: lambda_mean,
                mu: eig_c.values[c].clamp(0.0, 1.0),
            });
        }
        start = end;
    }
    let kernel_cut = KERNEL_TOL * lam_max.max(1e-300);
    for mode in &modes {
        if mode.lambda <= kernel_cut && mode.mu > DEGENERACY_TOL {
            return Err(Error::KernelMismatch { residual: mode.mu });
        }
    }
    let dim = rep.dim();
    let mut elements = Vec::with_capacity(1usize << (2 * n));
    for idx in 0..(1usize << (2 * n)) {
        let mut label = Vec::with_capacity(n);
        let mut op = CMatrix::identity(dim);
        let mut rate = 0.0;
        for (j, mode) in modes.iter().enumerate() {
            let code = (idx >> (2 * j)) & 3;
            let (a, b) = [(0u8, 0u8), (1, 0), (0, 1), (1, 1)][code];
            label.push((a, b));
            if code == 0 {
                continue;
            }
            let zd = rep.field_dag(&mode.vector)?;
            let factor = match code {
                1 => zd,
                2 => zd.adjoint(),
                _ => &(&zd * &zd.adjoint()) - &CMatrix::identity(dim).scale_re(mode.mu),
            };
            op = &op * &factor;
            rate += f64::from(a + b) * mode.lambda;
        }
        elements.push(HermiteElement {
            label,
            op,
            eigenvalue: (-rate).exp(),
        });
    }
    Ok(HermiteBasis { modes, elements })
}

/// Fixed-point data of a single channel: the limit projection P = lim Sⁿ,
/// the saturated noise R_∞ = Σ Sⁿ R S*ⁿ, and the resulting fixed-symbol
/// family R_∞ + P Q′ P*.
#[derive(Debug, Clone)]
pub struct SteadyStates {
    pub p: CMatrix,
    pub r_inf: CMatrix,
    pub family: String,
}

impl SteadyStates {
    /// The member R_∞ + P Q′ P* of the fixed-symbol family.
    pub fn fixed_symbol(&self, q_prime: &CMatrix) -> CMatrix {
        symmetrize(&(&self.r_inf + &(&(&self.p * q_prime) * &self.p.adjoint())))
    }
}

/// Describes every symbol fixed by the channel of `pair`. Requires lim Sⁿ to
/// exist; oscillating unit-modulus spectrum is reported as nonconvergence,
/// never averaged away.
pub fn steady_states(pair: &CompatiblePair, rep: &FermionRep) -> Result<SteadyStates> {
    if rep.n_modes() != pair.n() {
        return Err(Error::dim(format!(
            "steady states: {} modes, pair on {}",
            rep.n_modes(),
            pair.n()
        )));
    }
    let s = pair.s();
    let mut p = s.clone();
    let mut converged = false;
    for _ in 0..POWER_MAX_SQUARINGS {
        let sq = &p * &p;
        let delta = sq.dist(&p);
        p = sq;
        if delta < POWER_CONV_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::PowersDoNotConverge);
    }
    // A squaring fixed point that is not a power limit (e.g. S = −1) fails
    // PS = P; reject it rather than return the wrong projection.
    let scale = p.frobenius_norm().max(1.0);
    if (&p * s).dist(&p) > 1e-9 * scale || (&p * &p).dist(&p) > 1e-9 * scale {
        return Err(Error::PowersDoNotConverge);
    }
    // S = P ⊕ S̃ with S̃ = S − P strictly contracting, and PR = RP* = 0, so
    // the noise series collapses onto the complement.
    let s_tilde = s - &p;
    let r_inf = symmetrize(&stein_series(&s_tilde, pair.r()));
    let leak = (&(&p * pair.r()) * &p.adjoint()).frobenius_norm();
    let rank = crate::linalg::singular_values(&p)
        .iter()
        .filter(|&&sv| sv > 0.5)
        .count();
    let family = format!(
        "R_inf + P Q' P* over symbols Q' (rank P = {rank}, |P R P*| = {leak:.1e})"
    );
    Ok(SteadyStates { p, r_inf, family })
}

/// Verdict of `embed_check`: the Stein equation determines a unique rate
/// candidate A; the pair embeds iff 0 ≤ A ≤ −(G + G*).
#[derive(Debug, Clone)]
pub enum EmbedOutcome {
    /// R = ∫₀¹ e^{sG} A e^{sG*} ds for the recovered rate A.
    Embeddable { a: CMatrix },
    /// The candidate violates the rate bounds; `min_eig` is the most negative
    /// eigenvalue over A and −(G + G*) − A.
    NotEmbeddable { a: CMatrix, min_eig: f64 },
}

/// Decides whether the channel with data (e^G, R) is the time-1 member of a
/// semigroup with drift G. The candidate rate is the Stein solution
/// A = −Σ Sⁿ (GR + RG*) S*ⁿ, which telescopes back to R when R is reachable.
pub fn embed_check(g: &CMatrix, r: &CMatrix) -> Result<EmbedOutcome> {
    let n = g.require_square()?;
    if r.rows() != n || r.cols() != n {
        return Err(Error::dim(format!(
            "embed check: R is {}x{}, G is {}x{}",
            r.rows(),
            r.cols(),
            n,
            n
        )));
    }
    let two_h = (g + &g.adjoint()).scale_re(-1.0);
    if !is_psd_within(&two_h, TOL_PSD) {
        return Err(Error::InvalidParams {
            context: format!(
                "G + G* has a positive eigenvalue ({:.3e})",
                -min_eigenvalue(&two_h)
            ),
        });
    }
    let s = expm(g)?;
    CompatiblePair::new(s.clone(), r.clone())?;
    let rhs = (&(g * r) + &(r * &g.adjoint())).scale_re(-1.0);
    let a = symmetrize(&stein_solve(&s, &rhs)?);
    let lo = min_eigenvalue(&a);
    let hi = min_eigenvalue(&(&two_h - &a));
    let worst = lo.min(hi);
    if worst < -1e-8 * a.frobenius_norm().max(1.0) {
        Ok(EmbedOutcome::NotEmbeddable { a, min_eig: worst })
    } else {
        Ok(EmbedOutcome::Embeddable { a })
    }
}

/// Symbol trajectory of the semigroup with drift −(H + iK) relaxing toward T:
/// e^{−t(H+iK)} Q e^{−t(H−iK)} + ∫₀ᵗ e^{−s(H+iK)}(HT + TH)e^{−s(H−iK)} ds.
pub fn combined_symbol(
    h: &CMatrix,
    k: &CMatrix,
    t_sym: &CMatrix,
    q: &CMatrix,
    t: f64,
) -> Result<CMatrix> {
    let n = h.require_square()?;
    if k.rows() != n || t_sym.rows() != n || q.rows() != n {
        return Err(Error::dim("combined symbol: mismatched operand sizes"));
    }
    let comm = commutator(h, t_sym).frobenius_norm();
    let scale = (h.frobenius_norm() * t_sym.frobenius_norm()).max(1.0);
    if comm > COMMUTING_TOL * scale {
        return Err(Error::NonCommuting { residual: comm });
    }
    validate_symbol(t_sym)?;
    let kernel = nullspace(h);
    for c in 0..kernel.cols() {
        let v = kernel.column(c);
        let tv = t_sym.matvec(&v);
        let leak: f64 = tv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if leak > DEGENERACY_TOL {
            return Err(Error::KernelMismatch { residual: leak });
        }
    }
    let g = &h.scale_re(-1.0) - &k.mul_i();
    let a = symmetrize(&(&(h * t_sym) + &(t_sym * h)));
    let s = expm(&g.scale_re(t))?;
    let drift = &(&s * q) * &s.adjoint();
    let noise = lyapunov_accumulate(&g, &a, t)?;
    Ok(symmetrize(&(&drift + &noise)))
}

/// Parity-twisted first-order differences along a mode vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivationKind {
    /// ∂_φ(X) = Z(φ)X − Γ(X)Z(φ).
    Holomorphic,
    /// ∂̄_φ(X) = Z*(φ)X − Γ(X)Z*(φ).
    Antiholomorphic,
}

/// Skew derivation along φ: annihilates its own field kind and returns the
/// pairing on the other, with the skew Leibniz rule
/// ∂(XY) = ∂(X)Y + Γ(X)∂(Y) for Γ(X) = WXW.
pub fn skew_derivation(
    rep: &FermionRep,
    phi: &[Complex64],
    kind: DerivationKind,
    x: &CMatrix,
) -> Result<CMatrix> {
    if x.rows() != rep.dim() || x.cols() != rep.dim() {
        return Err(Error::dim(format!(
            "derivation input is {}x{}, rep dimension {}",
            x.rows(),
            x.cols(),
            rep.dim()
        )));
    }
    let field = match kind {
        DerivationKind::Holomorphic => rep.field(phi)?,
        DerivationKind::Antiholomorphic => rep.field_dag(phi)?,
    };
    Ok(&(&field * x) - &(&gamma(rep, x) * &field))
}

/// Single-jump dual generator 2LXL* − LL*X − XLL*, whose carré du champ is
/// −2[L,X][L*,Y].
pub fn single_jump_dual(l: &CMatrix, x: &CMatrix) -> CMatrix {
    let ll = l * &l.adjoint();
    &(&(l * x) * &l.adjoint()).scale_re(2.0) - &(&(&ll * x) + &(x * &ll))
}

/// Carré du champ ℒ†(XY) − ℒ†(X)Y − Xℒ†(Y) of the generator. Factors through
/// the skew derivations: −Σ_j((1−λ_j)∂̄_{φ_j}Γ(X)∂_{φ_j}Y +
/// λ_j ∂_{φ_j}Γ(X)∂̄_{φ_j}Y); the coherent part contributes nothing.
pub fn carre_du_champ(
    data: &GeneratorData,
    rep: &FermionRep,
    x: &CMatrix,
    y: &CMatrix,
) -> Result<CMatrix> {
    let dim = rep.dim();
    if x.rows() != dim || x.cols() != dim || y.rows() != dim || y.cols() != dim {
        return Err(Error::dim("carre du champ: operands must match the rep"));
    }
    let both = lindblad_dual_unchecked(data, rep, &(x * y));
    let left = &lindblad_dual_unchecked(data, rep, x) * y;
    let right = x * &lindblad_dual_unchecked(data, rep, y);
    Ok(&(&both - &left) - &right)
}
