//! Conditional expectations and recovery maps on the mode algebra.
//!
//! A `ModeSubspace` H of the one-particle space generates the subalgebra of
//! all polynomials in fields over H. Three projections onto it live here:
//! the trace-compatible expectation (`tracial_condexp`), the expectation
//! compatible with a gauge-invariant Gaussian state whose symbol leaves H
//! invariant (`state_condexp`), and the vacuum-compatible one
//! (`vacuum_condexp`). All three are realized the same way: rotate H onto
//! the leading modes with a second-quantized basis change, reduce over the
//! trailing tensor factor, refill with identity, rotate back.
//!
//! The state-weighted geometry comes as two inner products (`inner_product`,
//! GNS and KMS), the modular map X ↦ ρXρ⁻¹ (`modular_apply`), and its
//! eigenbasis (`k_basis`): normalized occupation polynomials, orthonormal in
//! GNS, with explicit modular eigenvalues per multi-index.
//!
//! `accardi_cecchini` and `petz_recover` are the adjoint pair of coarse
//! graining and recovery maps attached to a state and a subspace: the first
//! contracts the full algebra onto the subalgebra, unital and expectation
//! preserving; the second is trace preserving and recovers the state from
//! its restriction. Both reject states whose restriction is singular; the
//! `_pinv` variants substitute the pseudo-inverse instead.

use num_complex::Complex64;

use crate::car::FermionRep;
use crate::cmatrix::CMatrix;
use crate::config::{TOL_HERM, TOL_PSD};
use crate::error::{Error, Result};
use crate::gig::validate_symbol;
use crate::linalg::{is_psd_within, min_eigenvalue, nullspace, op_norm, psd_function, PsdFn};

/// Basis columns must be orthonormal to this residual.
const ORTHO_TOL: f64 = 1e-11;
/// ‖[Q, P_H]‖ gate for state-compatible expectations.
const INVARIANCE_TOL: f64 = 1e-10;
/// Symbol eigenvalues closer than this to {0, 1} count as boundary.
const BOUNDARY_TOL: f64 = 1e-12;
/// Densities (or their restrictions) with smaller minimum eigenvalue are
/// rejected where an inverse is required.
const SINGULAR_TOL: f64 = 1e-12;

/// A subspace H ⊆ ℂ^N together with the machinery to rotate it onto the
/// leading modes: the second-quantized unitary of any basis change sending
/// H to span(e_1..e_k) conjugates the H-field subalgebra onto the algebra
/// of the first k Jordan–Wigner modes, where it is a full tensor factor.
#[derive(Debug, Clone)]
pub struct ModeSubspace {
    rep: FermionRep,
    basis: CMatrix,
    complement: CMatrix,
    rotation: CMatrix,
}

impl ModeSubspace {
    /// `basis` holds orthonormal columns spanning H; 1 ≤ dim H ≤ N.
    pub fn new(rep: &FermionRep, basis: &CMatrix) -> Result<Self> {
        let n = rep.n_modes();
        if basis.rows() != n || basis.cols() > n {
            return Err(Error::dim(format!(
                "subspace basis is {}x{} over {} modes",
                basis.rows(),
                basis.cols(),
                n
            )));
        }
        let k = basis.cols();
        if k == 0 {
            return Err(Error::InvalidParams {
                context: "subspace must contain at least one mode".into(),
            });
        }
        let gram = &basis.adjoint() * basis;
        let res = gram.dist(&CMatrix::identity(k));
        if res > ORTHO_TOL {
            return Err(Error::InvalidParams {
                context: format!("subspace basis not orthonormal, residual {res:.3e}"),
            });
        }
        let proj = basis * &basis.adjoint();
        let complement = nullspace(&proj);
        if complement.cols() != n - k {
            return Err(Error::InvalidParams {
                context: format!(
                    "projector kernel has dimension {}, expected {}",
                    complement.cols(),
                    n - k
                ),
            });
        }
        let mut v = CMatrix::zeros(n, n);
        for j in 0..k {
            v.set_column(j, &basis.column(j));
        }
        for j in 0..n - k {
            v.set_column(k + j, &complement.column(j));
        }
        let rotation = rep.second_quantize(&v.adjoint())?;
        Ok(ModeSubspace {
            rep: rep.clone(),
            basis: basis.clone(),
            complement,
            rotation,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.rep.n_modes()
    }

    pub fn dim_h(&self) -> usize {
        self.basis.cols()
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn complement_basis(&self) -> &CMatrix {
        &self.complement
    }

    pub fn projector(&self) -> CMatrix {
        &self.basis * &self.basis.adjoint()
    }

    /// The second-quantized basis change U with U 𝒜_H U* = 𝒜_{first k modes}.
    pub fn rotation(&self) -> &CMatrix {
        &self.rotation
    }

    pub fn rep(&self) -> &FermionRep {
        &self.rep
    }

    fn check_op(&self, a: &CMatrix, what: &str) -> Result<()> {
        let dim = self.rep.dim();
        if a.rows() != dim || a.cols() != dim {
            return Err(Error::dim(format!(
                "{what}: operator is {}x{}, need {dim}x{dim}",
                a.rows(),
                a.cols()
            )));
        }
        Ok(())
    }
}

fn sandwich(u: &CMatrix, a: &CMatrix) -> CMatrix {
    &(u * a) * &u.adjoint()
}

/// In the rotated frame the H-subalgebra is exactly the set of matrices of
/// the form m ⊗ 1 in the split b = b_low + 2^k·b_high. Averaging the block
/// diagonal over b_high and refilling implements the trace-compatible
/// projection onto that set.
fn prefix_average(a: &CMatrix, k: usize, n_modes: usize) -> CMatrix {
    let dl = 1usize << k;
    let dh = 1usize << (n_modes - k);
    let w = 1.0 / dh as f64;
    let mut out = CMatrix::zeros(a.rows(), a.cols());
    for bl in 0..dl {
        for bl2 in 0..dl {
            let mut s = Complex64::new(0.0, 0.0);
            for h in 0..dh {
                s += a[(bl + dl * h, bl2 + dl * h)];
            }
            s *= w;
            for h in 0..dh {
                out[(bl + dl * h, bl2 + dl * h)] = s;
            }
        }
    }
    out
}

/// Trace-compatible conditional expectation onto the H-subalgebra. It is
/// the orthogonal projection for the inner product τ(A*B), fixes the
/// subalgebra, sends anything supported on H^⊥ to its trace, and obeys the
/// bimodule law E(XAY) = X E(A) Y for X, Y over H.
pub fn tracial_condexp(sub: &ModeSubspace, a: &CMatrix) -> Result<CMatrix> {
    sub.check_op(a, "tracial_condexp")?;
    let rotated = sandwich(&sub.rotation, a);
    let reduced = prefix_average(&rotated, sub.dim_h(), sub.n_modes());
    Ok(sandwich(&sub.rotation.adjoint(), &reduced))
}

/// The Gaussian density with symbol Q compressed to H^⊥, as an element of
/// the commutant of the H-subalgebra: the product of the per-eigenmode
/// factors 2(1−μ)ZZ* + 2μZ*Z over an eigenbasis of the compression.
fn restricted_complement_density(sub: &ModeSubspace, q: &CMatrix) -> Result<CMatrix> {
    let rep = &sub.rep;
    let mut rho = CMatrix::identity(rep.dim());
    let w = &sub.complement;
    if w.cols() == 0 {
        return Ok(rho);
    }
    let qk = &(&w.adjoint() * q) * w;
    let eig = validate_symbol(&qk)?;
    for j in 0..w.cols() {
        let mu = eig.values[j].clamp(0.0, 1.0);
        let phi = w.matvec(&eig.vectors.column(j));
        let z = rep.field(&phi)?;
        let zd = z.adjoint();
        let factor = &(&z * &zd).scale_re(2.0 * (1.0 - mu)) + &(&zd * &z).scale_re(2.0 * mu);
        rho = &rho * &factor;
    }
    Ok(rho)
}

/// Conditional expectation compatible with the Gaussian state of symbol Q,
/// defined when Q leaves H invariant (Takesaki criterion, checked as
/// ‖[Q, P_H]‖ ≤ 1e-10). Realized as E(A) = E_τ(ρ_K·A) with ρ_K the
/// complement factor of ρ_Q; this is the orthogonal projection onto the
/// H-subalgebra for the inner product τ(ρ_Q A*B).
pub fn state_condexp(sub: &ModeSubspace, q: &CMatrix, a: &CMatrix) -> Result<CMatrix> {
    let n = sub.n_modes();
    if q.rows() != n || q.cols() != n {
        return Err(Error::dim(format!(
            "state_condexp: symbol is {}x{} for {n} modes",
            q.rows(),
            q.cols()
        )));
    }
    sub.check_op(a, "state_condexp")?;
    validate_symbol(q)?;
    let p = sub.projector();
    let res = op_norm(&(&(q * &p) - &(&p * q)));
    if res > INVARIANCE_TOL {
        return Err(Error::SubspaceNotInvariant { residual: res });
    }
    let rho_k = restricted_complement_density(sub, q)?;
    tracial_condexp(sub, &(&rho_k * a))
}

/// Conditional expectation compatible with the vacuum. The projector onto
/// Fock states with zero H^⊥ occupation is, in the rotated frame, the
/// b_high = 0 block; the compressed corner is re-embedded with identity
/// refill so the image is the H-subalgebra and the map is unital.
pub fn vacuum_condexp(sub: &ModeSubspace, a: &CMatrix) -> Result<CMatrix> {
    sub.check_op(a, "vacuum_condexp")?;
    let rotated = sandwich(&sub.rotation, a);
    let k = sub.dim_h();
    let dl = 1usize << k;
    let dh = 1usize << (sub.n_modes() - k);
    let mut out = CMatrix::zeros(a.rows(), a.cols());
    for bl in 0..dl {
        for bl2 in 0..dl {
            let v = rotated[(bl, bl2)];
            for h in 0..dh {
                out[(bl + dl * h, bl2 + dl * h)] = v;
            }
        }
    }
    Ok(sandwich(&sub.rotation.adjoint(), &out))
}

fn check_density(rep: &FermionRep, rho: &CMatrix, what: &str) -> Result<()> {
    let dim = rep.dim();
    if rho.rows() != dim || rho.cols() != dim {
        return Err(Error::dim(format!(
            "{what}: density is {}x{}, need {dim}x{dim}",
            rho.rows(),
            rho.cols()
        )));
    }
    let scale = rho.frobenius_norm().max(1.0);
    let herm = rho.hermitian_residual();
    if herm > TOL_HERM * scale {
        return Err(Error::NonHermitian { residual: herm });
    }
    let tr = rep.tau(rho).re;
    if (tr - 1.0).abs() > 1e-10 {
        return Err(Error::NotAState { trace: tr });
    }
    if !is_psd_within(rho, TOL_PSD * scale) {
        return Err(Error::NotPsd {
            min_eig: min_eigenvalue(rho),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerProductKind {
    Gns,
    Kms,
}

/// State-weighted inner products: GNS is τ(ρA*B), KMS is τ(ρ^½A*ρ^½B).
/// Both are positive semidefinite sesquilinear forms, conjugate-symmetric,
/// and reduce to τ(A*B) at ρ = 1.
pub fn inner_product(
    rep: &FermionRep,
    rho: &CMatrix,
    kind: InnerProductKind,
    a: &CMatrix,
    b: &CMatrix,
) -> Result<Complex64> {
    check_density(rep, rho, "inner_product")?;
    let dim = rep.dim();
    for (m, name) in [(a, "left"), (b, "right")] {
        if m.rows() != dim || m.cols() != dim {
            return Err(Error::dim(format!("inner_product: {name} operand is {}x{}", m.rows(), m.cols())));
        }
    }
    match kind {
        InnerProductKind::Gns => Ok(rep.tau(&(&(rho * &a.adjoint()) * b))),
        InnerProductKind::Kms => {
            let rh = psd_function(rho, PsdFn::Sqrt)?;
            Ok(rep.tau(&(&(&(&rh * &a.adjoint()) * &rh) * b)))
        }
    }
}

/// One eigenmode of the symbol entering the K-basis.
#[derive(Debug, Clone)]
pub struct KMode {
    vector: Vec<Complex64>,
    mu: f64,
}

impl KMode {
    pub fn vector(&self) -> &[Complex64] {
        &self.vector
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// One element K_𝐚: per-mode label (a_j, b_j) ∈ {0,1}², the operator, and
/// its modular eigenvalue Π_{(1,0)} μ/(1−μ) · Π_{(0,1)} (1−μ)/μ.
#[derive(Debug, Clone)]
pub struct KBasisElement {
    label: Vec<(u8, u8)>,
    op: CMatrix,
    modular_eigenvalue: f64,
}

impl KBasisElement {
    pub fn label(&self) -> &[(u8, u8)] {
        &self.label
    }

    pub fn op(&self) -> &CMatrix {
        &self.op
    }

    pub fn modular_eigenvalue(&self) -> f64 {
        self.modular_eigenvalue
    }
}

/// GNS-orthonormal eigenbasis of the modular map of an interior Gaussian
/// state, indexed by pairs (a_j, b_j) per eigenmode.
#[derive(Debug, Clone)]
pub struct KBasis {
    modes: Vec<KMode>,
    elements: Vec<KBasisElement>,
}

impl KBasis {
    pub fn modes(&self) -> &[KMode] {
        &self.modes
    }

    pub fn elements(&self) -> &[KBasisElement] {
        &self.elements
    }
}

/// Per-mode generators over an eigenbasis {(ψ_j, μ_j)} of Q:
///   K_{j,00} = 1                K_{j,10} = Z*(ψ_j)/√(1−μ_j)
///   K_{j,01} = Z(ψ_j)/√μ_j     K_{j,11} = (Z*(ψ_j)Z(ψ_j) − μ_j)/√(μ_j(1−μ_j))
/// multiplied in increasing mode order. Orthonormal for τ(ρ_Q A*B), and each
/// K_𝐚 is an eigenvector of X ↦ ρ_Q X ρ_Q⁻¹. Requires 0 < Q < 1.
pub fn k_basis(rep: &FermionRep, q: &CMatrix) -> Result<KBasis> {
    let n = rep.n_modes();
    if q.rows() != n || q.cols() != n {
        return Err(Error::dim(format!(
            "k_basis: symbol is {}x{} for {n} modes",
            q.rows(),
            q.cols()
        )));
    }
    let eig = validate_symbol(q)?;
    if eig.values[0] <= BOUNDARY_TOL || eig.values[n - 1] >= 1.0 - BOUNDARY_TOL {
        return Err(Error::SymbolOnBoundary);
    }
    let dim = rep.dim();
    let id = CMatrix::identity(dim);
    let mut modes = Vec::with_capacity(n);
    let mut per_mode: Vec<[CMatrix; 4]> = Vec::with_capacity(n);
    for j in 0..n {
        let mu = eig.values[j];
        let psi = eig.vectors.column(j);
        let z = rep.field(&psi)?;
        let zd = z.adjoint();
        let occ = &zd * &z;
        per_mode.push([
            id.clone(),
            zd.scale_re(1.0 / (1.0 - mu).sqrt()),
            z.scale_re(1.0 / mu.sqrt()),
            (&occ - &id.scale_re(mu)).scale_re(1.0 / (mu * (1.0 - mu)).sqrt()),
        ]);
        modes.push(KMode { vector: psi, mu });
    }
    let total = 1usize << (2 * n);
    let mut elements = Vec::with_capacity(total);
    for idx in 0..total {
        let mut label = Vec::with_capacity(n);
        let mut op = CMatrix::identity(dim);
        let mut ev = 1.0;
        for (j, mode) in modes.iter().enumerate() {
            let code = (idx >> (2 * j)) & 3;
            label.push(match code {
                0 => (0, 0),
                1 => (1, 0),
                2 => (0, 1),
                _ => (1, 1),
            });
            if code != 0 {
                op = &op * &per_mode[j][code];
            }
            match code {
                1 => ev *= mode.mu / (1.0 - mode.mu),
                2 => ev *= (1.0 - mode.mu) / mode.mu,
                _ => {}
            }
        }
        elements.push(KBasisElement {
            label,
            op,
            modular_eigenvalue: ev,
        });
    }
    Ok(KBasis { modes, elements })
}

/// The modular map X ↦ ρXρ⁻¹ of an invertible density.
pub fn modular_apply(rep: &FermionRep, rho: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    check_density(rep, rho, "modular_apply")?;
    let dim = rep.dim();
    if x.rows() != dim || x.cols() != dim {
        return Err(Error::dim(format!(
            "modular_apply: operator is {}x{}, need {dim}x{dim}",
            x.rows(),
            x.cols()
        )));
    }
    let min = min_eigenvalue(rho);
    if min <= SINGULAR_TOL {
        return Err(Error::SingularState { min_eig: min });
    }
    let inv = psd_function(rho, PsdFn::Pinv)?;
    Ok(&(rho * x) * &inv)
}

fn restriction_inv_sqrt(
    rep: &FermionRep,
    rho: &CMatrix,
    sub: &ModeSubspace,
    pinv: bool,
    what: &str,
) -> Result<(CMatrix, CMatrix)> {
    check_density(rep, rho, what)?;
    if rep.n_modes() != sub.n_modes() {
        return Err(Error::dim(format!(
            "{what}: representation has {} modes, subspace {}",
            rep.n_modes(),
            sub.n_modes()
        )));
    }
    let rho_h = tracial_condexp(sub, rho)?;
    if !pinv {
        let min = min_eigenvalue(&rho_h);
        if min <= SINGULAR_TOL {
            return Err(Error::SingularRestriction { min_eig: min });
        }
    }
    let inv_sqrt = psd_function(&rho_h, PsdFn::InvSqrtPinv)?;
    Ok((rho_h, inv_sqrt))
}

fn ac_impl(
    rep: &FermionRep,
    rho: &CMatrix,
    sub: &ModeSubspace,
    a: &CMatrix,
    pinv: bool,
) -> Result<CMatrix> {
    sub.check_op(a, "accardi_cecchini")?;
    let (_, inv_sqrt) = restriction_inv_sqrt(rep, rho, sub, pinv, "accardi_cecchini")?;
    let half = psd_function(rho, PsdFn::Sqrt)?;
    let e = tracial_condexp(sub, &(&(&half * a) * &half))?;
    Ok(&(&inv_sqrt * &e) * &inv_sqrt)
}

/// Coarse graining onto the H-subalgebra adapted to ρ:
/// 𝒜_ρ(A) = ρ_H^{-1/2} E_τ(ρ^{1/2} A ρ^{1/2}) ρ_H^{-1/2} with
/// ρ_H = E_τ(ρ). Unital and expectation preserving: ρ(𝒜(A)) = ρ(A).
/// Rejects ρ whose restriction has an eigenvalue ≤ 1e-12.
pub fn accardi_cecchini(
    rep: &FermionRep,
    rho: &CMatrix,
    sub: &ModeSubspace,
    a: &CMatrix,
) -> Result<CMatrix> {
    ac_impl(rep, rho, sub, a, false)
}

/// `accardi_cecchini` with the restriction pseudo-inverted instead of
/// rejected when singular.
pub fn accardi_cecchini_pinv(
    rep: &FermionRep,
    rho: &CMatrix,
    sub: &ModeSubspace,
    a: &CMatrix,
) -> Result<CMatrix> {
    ac_impl(rep, rho, sub, a, true)
}

fn petz_impl(
    rep: &FermionRep,
    rho: &CMatrix,
    sub: &ModeSubspace,
    gamma: &CMatrix,
    pinv: bool,
) -> Result<CMatrix> {
    check_density(rep, gamma, "petz_recover input")?;
    let fixed = tracial_condexp(sub, gamma)?;
    let res = fixed.dist(gamma);
    if res > 1e-8 * gamma.frobenius_norm().max(1.0) {
        return Err(Error::InvalidParams {
            context: format!("recovery input not in the subspace algebra, residual {res:.3e}"),
        });
    }
    let (_, inv_sqrt) = restriction_inv_sqrt(rep, rho, sub, pinv, "petz_recover")?;
    let half = psd_function(rho, PsdFn::Sqrt)?;
    let middle = &(&inv_sqrt * gamma) * &inv_sqrt;
    Ok(&(&half * &middle) * &half)
}

/// Recovery map dual to `accardi_cecchini`:
/// ℛ_ρ(γ) = ρ^{1/2} ρ_H^{-1/2} γ ρ_H^{-1/2} ρ^{1/2} for a density γ in the
/// H-subalgebra. Trace preserving, and ℛ_ρ(ρ_H) = ρ.
pub fn petz_recover(
    rep: &FermionRep,
    rho: &CMatrix,
    sub: &ModeSubspace,
    gamma: &CMatrix,
) -> Result<CMatrix> {
    petz_impl(rep, rho, sub, gamma, false)
}

/// `petz_recover` with the restriction pseudo-inverted instead of rejected
/// when singular.
pub fn petz_recover_pinv(
    rep: &FermionRep,
    rho: &CMatrix,
    sub: &ModeSubspace,
    gamma: &CMatrix,
) -> Result<CMatrix> {
    petz_impl(rep, rho, sub, gamma, true)
}
