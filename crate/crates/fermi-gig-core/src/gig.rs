//! Gauge-invariant Gaussian states: the symbol ↔ density bijection, the
//! determinant moment formula, Gibbs forms, a Gaussianity residual, and the
//! rank-one mixture criterion.

use crate::car::FermionRep;
use crate::cmatrix::{cr, CMatrix};
use crate::config::TOL_PSD;
use crate::error::{Error, Result};
use crate::linalg::{determinant, hermitian_eig, psd_function, PsdFn};
use crate::rng::SplitMix64;
use num_complex::Complex64;

/// A state together with its cached symbol. The density is taken with
/// respect to the normalized trace: τ(ρ) = 1.
#[derive(Debug, Clone)]
pub struct GigState {
    pub n_modes: usize,
    pub rho: CMatrix,
    pub symbol: CMatrix,
}

/// Validates 0 ≤ Q ≤ 1 within tol_psd and returns the eigendecomposition.
pub fn validate_symbol(q: &CMatrix) -> Result<crate::linalg::EigDecomposition> {
    let eig = hermitian_eig(q)?;
    let min = eig.values.first().copied().unwrap_or(0.0);
    let max = eig.values.last().copied().unwrap_or(0.0);
    if min < -TOL_PSD || max > 1.0 + TOL_PSD {
        return Err(Error::InvalidSymbol { min_eig: min, max_eig: max });
    }
    Ok(eig)
}

/// ρ_Q = Π_j ((1−μ_j)·2 Z(ψ_j)Z*(ψ_j) + μ_j·2 Z*(ψ_j)Z(ψ_j)) over an
/// eigenbasis {(μ_j, ψ_j)} of Q. The factors commute, so the order is
/// immaterial; the result does not depend on the eigenbasis chosen in
/// degenerate eigenspaces.
pub fn rho_from_symbol(rep: &FermionRep, q: &CMatrix) -> Result<GigState> {
    if q.rows() != rep.n_modes() || q.cols() != rep.n_modes() {
        return Err(Error::dim(format!("symbol is {}x{} for {} modes", q.rows(), q.cols(), rep.n_modes())));
    }
    let eig = validate_symbol(q)?;
    let mut rho = CMatrix::identity(rep.dim());
    for j in 0..rep.n_modes() {
        let mu = eig.values[j].clamp(0.0, 1.0);
        let psi = eig.vectors.column(j);
        let z = rep.field(&psi)?;
        let zd = z.adjoint();
        let factor = &(&z * &zd).scale_re(2.0 * (1.0 - mu)) + &(&zd * &z).scale_re(2.0 * mu);
        rho = &rho * &factor;
    }
    Ok(GigState { n_modes: rep.n_modes(), rho, symbol: q.clone() })
}

/// (Q)_{jk} = τ(ρ Z_k* Z_j). Defined for every state; lands in 0 ≤ Q ≤ 1.
pub fn symbol_of(rep: &FermionRep, rho: &CMatrix) -> Result<CMatrix> {
    if rho.rows() != rep.dim() || rho.cols() != rep.dim() {
        return Err(Error::dim(format!("state is {}x{} for rep dim {}", rho.rows(), rho.cols(), rep.dim())));
    }
    let tr = rho.normalized_trace();
    if (tr - cr(1.0)).norm() > 1e-10 || rho.hermitian_residual() > 1e-10 * rho.frobenius_norm().max(1.0) {
        return Err(Error::NotAState { trace: tr.re });
    }
    let n = rep.n_modes();
    let mut q = CMatrix::zeros(n, n);
    for j in 0..n {
        // τ(ρ Z_k* Z_j) = τ(Z_j ρ Z_k*) by cyclicity.
        let zjr = rep.z(j) * rho;
        for k in 0..n {
            q[(j, k)] = (&zjr * &rep.z(k).adjoint()).normalized_trace();
        }
    }
    Ok(q)
}

/// τ(ρ · Z*(ψ_1)···Z*(ψ_m) · Z(φ_n)···Z(φ_1)) by direct matrix products.
pub fn moment(rep: &FermionRep, rho: &CMatrix, psis: &[Vec<Complex64>], phis: &[Vec<Complex64>]) -> Result<Complex64> {
    let mut acc = rho.clone();
    for psi in psis {
        acc = &acc * &rep.field_dag(psi)?;
    }
    for phi in phis.iter().rev() {
        acc = &acc * &rep.field(phi)?;
    }
    Ok(acc.normalized_trace())
}

/// The Gaussian prediction for the same moment: 0 when m ≠ n, and
/// det(⟨φ_j, Q ψ_k⟩) when m = n.
pub fn gauss_moment_prediction(q: &CMatrix, psis: &[Vec<Complex64>], phis: &[Vec<Complex64>]) -> Result<Complex64> {
    if psis.len() != phis.len() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let m = psis.len();
    let gram = CMatrix::from_fn(m, m, |j, k| {
        let qpsi = q.matvec(&psis[k]);
        phis[j].iter().zip(&qpsi).map(|(a, b)| a.conj() * b).sum()
    });
    determinant(&gram)
}

/// Largest deviation between sampled moments of ρ and the Gaussian
/// prediction from its symbol, over all (m, n) with m, n ≤ min(N, 3) and
/// `sample_budget` unit-vector tuples per pair. Deterministic in the seed.
pub fn is_gig(rep: &FermionRep, rho: &CMatrix, sample_budget: usize, seed: u64) -> Result<f64> {
    let q = symbol_of(rep, rho)?;
    let mut rng = SplitMix64::new(seed);
    let n = rep.n_modes();
    let mmax = n.min(3);
    let mut worst = 0.0_f64;
    for m in 0..=mmax {
        for nn in 0..=mmax {
            if m == 0 && nn == 0 {
                continue;
            }
            for _ in 0..sample_budget {
                let psis: Vec<Vec<Complex64>> = (0..m).map(|_| unit_vector(&mut rng, n)).collect();
                let phis: Vec<Vec<Complex64>> = (0..nn).map(|_| unit_vector(&mut rng, n)).collect();
                let actual = moment(rep, rho, &psis, &phis)?;
                let predicted = gauss_moment_prediction(&q, &psis, &phis)?;
                worst = worst.max((actual - predicted).norm());
            }
        }
    }
    Ok(worst)
}

fn unit_vector(rng: &mut SplitMix64, n: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..n).map(|_| rng.complex_normal()).collect();
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 1e-6 {
            return v.into_iter().map(|z| z / cr(nrm)).collect();
        }
    }
}

/// H = −log(Q(1−Q)^{−1}) for symbols with spectrum strictly inside (0, 1);
/// then ρ_Q = e^{−Ĥ}/τ(e^{−Ĥ}).
pub fn gibbs_form(q: &CMatrix) -> Result<CMatrix> {
    let eig = validate_symbol(q)?;
    let n = q.rows();
    let interior_tol = 1e-9;
    if eig.values.iter().any(|&mu| mu < interior_tol || mu > 1.0 - interior_tol) {
        return Err(Error::SymbolOnBoundary);
    }
    let mut h = CMatrix::zeros(n, n);
    for j in 0..n {
        let mu = eig.values[j];
        let lam = -(mu / (1.0 - mu)).ln();
        let col = eig.vectors.column(j);
        for r in 0..n {
            for c in 0..n {
                h[(r, c)] += cr(lam) * col[r] * col[c].conj();
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WolfeOutcome {
    GigMixture,
    NotGigMixture,
}

/// Mixtures of ρ_{Q0} and ρ_{Q1} stay Gaussian exactly when
/// Q1 − Q0 = ±|η⟩⟨η|: the difference must be rank one (second singular
/// value ≤ 1e-9) with all nonzero eigenvalues of one sign.
pub fn wolfe_check(q0: &CMatrix, q1: &CMatrix) -> Result<WolfeOutcome> {
    validate_symbol(q0)?;
    validate_symbol(q1)?;
    let d = q1 - q0;
    // The difference of two symbols is Hermitian, so its singular values
    // are |eigenvalues|. The direct eigendecomposition keeps absolute
    // accuracy ~eps*|d|; the Gram-matrix route would floor the second
    // singular value near sqrt(eps)*|d|, which straddles the 1e-9 gate.
    let eig = hermitian_eig(&d)?;
    let mut sv: Vec<f64> = eig.values.iter().map(|l| l.abs()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if sv.is_empty() || sv[0] <= 1e-9 {
        // Q1 = Q0: the mixture equals the state itself (η = 0).
        return Ok(WolfeOutcome::GigMixture);
    }
    if sv.len() > 1 && sv[1] > 1e-9 {
        return Ok(WolfeOutcome::NotGigMixture);
    }
    let min = eig.values.first().copied().unwrap_or(0.0);
    let max = eig.values.last().copied().unwrap_or(0.0);
    if min < -1e-9 && max > 1e-9 {
        return Ok(WolfeOutcome::NotGigMixture);
    }
    Ok(WolfeOutcome::GigMixture)
}

/// Gibbs density e^{−Ĥ}/τ(e^{−Ĥ}) for an arbitrary Hermitian single-particle
/// Hamiltonian; the inverse route of gibbs_form.
pub fn gibbs_density(rep: &FermionRep, h: &CMatrix) -> Result<CMatrix> {
    let hh = rep.hat(h)?;
    let e = crate::linalg::expm(&hh.scale_re(-1.0))?;
    let z = e.normalized_trace().re;
    Ok(e.scale_re(1.0 / z))
}

/// Sanity check used by tests and the CLI: eigenvalues of ρ_Q against the
/// product formula Π(μ_j^{a_j}(1−μ_j)^{1−a_j})·2^N.
pub fn gig_purity_check(rep: &FermionRep, q: &CMatrix) -> Result<f64> {
    let st = rho_from_symbol(rep, q)?;
    let eig = validate_symbol(q)?;
    let mut expected: Vec<f64> = Vec::with_capacity(rep.dim());
    for b in 0..rep.dim() {
        let mut p = 1.0;
        for j in 0..rep.n_modes() {
            let mu = eig.values[j].clamp(0.0, 1.0);
            p *= if b & (1 << j) != 0 { 2.0 * mu } else { 2.0 * (1.0 - mu) };
        }
        expected.push(p);
    }
    expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let got = hermitian_eig(&st.rho)?.values;
    let mut worst = 0.0_f64;
    for (g, e) in got.iter().zip(&expected) {
        worst = worst.max((g - e).abs());
    }
    Ok(worst)
}

/// Interior symbols also arise from cooling: Q_β = (1 + e^{βH})^{−1}.
pub fn symbol_from_hamiltonian(h: &CMatrix, beta: f64) -> Result<CMatrix> {
    let eig = hermitian_eig(h)?;
    Ok(eig.apply(|lam| 1.0 / (1.0 + (beta * lam).exp())))
}

pub use crate::linalg::EigDecomposition;

#[allow(dead_code)]
fn boundary_guard(q: &CMatrix) -> Result<CMatrix> {
    psd_function(q, PsdFn::Sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmatrix::commutator;
    use crate::sampling::{random_density, random_interior_symbol, random_symbol, random_unitary};

    #[test]
    fn rho_examples() {
        let rep = FermionRep::new(3).unwrap();
        let half = CMatrix::identity(3).scale_re(0.5);
        let st = rho_from_symbol(&rep, &half).unwrap();
        assert!(st.rho.dist(&CMatrix::identity(8)) <= 1e-13);
        let zero = CMatrix::zeros(3, 3);
        let st0 = rho_from_symbol(&rep, &zero).unwrap();
        let mut want = CMatrix::zeros(8, 8);
        want[(0, 0)] = cr(8.0);
        assert!(st0.rho.dist(&want) <= 1e-13);
        let st1 = rho_from_symbol(&rep, &CMatrix::identity(3)).unwrap();
        let mut want1 = CMatrix::zeros(8, 8);
        want1[(7, 7)] = cr(8.0);
        assert!(st1.rho.dist(&want1) <= 1e-13);
    }

    #[test]
    fn symbol_roundtrip_and_gauge_invariance() {
        let mut rng = SplitMix64::new(1001);
        for n in 1..=4usize {
            let rep = FermionRep::new(n).unwrap();
            for _ in 0..(100 / n) {
                let q = random_symbol(&mut rng, n);
                let st = rho_from_symbol(&rep, &q).unwrap();
                let back = symbol_of(&rep, &st.rho).unwrap();
                assert!(back.dist(&q) <= 1e-11, "n={n}");
                assert!((st.rho.normalized_trace() - cr(1.0)).norm() <= 1e-12);
                assert!(commutator(rep.number_op(), &st.rho).frobenius_norm() <= 1e-11);
            }
        }
        // The tracial state has symbol ½·I.
        let rep = FermionRep::new(3).unwrap();
        let q = symbol_of(&rep, &CMatrix::identity(8)).unwrap();
        assert!(q.dist(&CMatrix::identity(3).scale_re(0.5)) <= 1e-13);
    }

    #[test]
    fn symbol_of_any_state_is_in_range() {
        let mut rng = SplitMix64::new(1003);
        let rep = FermionRep::new(3).unwrap();
        for _ in 0..10 {
            let rho = random_density(&mut rng, 8);
            let q = symbol_of(&rep, &rho).unwrap();
            let eig = hermitian_eig(&q).unwrap();
            assert!(eig.values[0] >= -1e-11);
            assert!(eig.values[2] <= 1.0 + 1e-11);
        }
    }

    #[test]
    fn moments_match_determinant_formula() {
        let mut rng = SplitMix64::new(1005);
        let rep = FermionRep::new(3).unwrap();
        let q = random_symbol(&mut rng, 3);
        let st = rho_from_symbol(&rep, &q).unwrap();
        // m ≠ n vanishes.
        let psi1 = super::unit_vector(&mut rng, 3);
        let phi1 = super::unit_vector(&mut rng, 3);
        let phi2 = super::unit_vector(&mut rng, 3);
        let odd = moment(&rep, &st.rho, &[psi1.clone()], &[phi1.clone(), phi2.clone()]).unwrap();
        assert!(odd.norm() <= 1e-12);
        // m = n = 1 is ⟨φ, Qψ⟩.
        let m11 = moment(&rep, &st.rho, &[psi1.clone()], &[phi1.clone()]).unwrap();
        let qpsi = q.matvec(&psi1);
        let want: Complex64 = phi1.iter().zip(&qpsi).map(|(a, b)| a.conj() * b).sum();
        assert!((m11 - want).norm() <= 1e-12);
        // m = n = 2 against the hand-written 2×2 determinant.
        let psi2 = super::unit_vector(&mut rng, 3);
        let m22 = moment(&rep, &st.rho, &[psi1.clone(), psi2.clone()], &[phi1.clone(), phi2.clone()]).unwrap();
        let e = |phi: &Vec<Complex64>, psi: &Vec<Complex64>| -> Complex64 {
            let qp = q.matvec(psi);
            phi.iter().zip(&qp).map(|(a, b)| a.conj() * b).sum()
        };
        let hand = e(&phi1, &psi1) * e(&phi2, &psi2) - e(&phi1, &psi2) * e(&phi2, &psi1);
        assert!((m22 - hand).norm() <= 1e-10);
    }

    #[test]
    fn is_gig_residuals() {
        let mut rng = SplitMix64::new(1007);
        let rep = FermionRep::new(2).unwrap();
        let q = random_symbol(&mut rng, 2);
        let st = rho_from_symbol(&rep, &q).unwrap();
        assert!(is_gig(&rep, &st.rho, 5, 7).unwrap() <= 1e-10);
        // Vacuum.
        let vac = rho_from_symbol(&rep, &CMatrix::zeros(2, 2)).unwrap();
        assert!(is_gig(&rep, &vac.rho, 5, 7).unwrap() <= 1e-12);
        // Midpoint mixture across a rank-two gap is not Gaussian.
        let q0 = CMatrix::diag(&[cr(0.2), cr(0.7)]);
        let q1 = CMatrix::diag(&[cr(0.7), cr(0.2)]);
        let r0 = rho_from_symbol(&rep, &q0).unwrap();
        let r1 = rho_from_symbol(&rep, &q1).unwrap();
        let mix = (&r0.rho + &r1.rho).scale_re(0.5);
        assert!(is_gig(&rep, &mix, 8, 7).unwrap() > 1e-3);
    }

    #[test]
    fn convexity_rank_one_gap() {
        let mut rng = SplitMix64::new(1009);
        let rep = FermionRep::new(3).unwrap();
        let q0 = random_interior_symbol(&mut rng, 3, 0.2);
        let eta = super::unit_vector(&mut rng, 3);
        let mut bump = CMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                bump[(i, j)] = eta[i] * eta[j].conj() * cr(0.1);
            }
        }
        let q1 = &q0 + &bump;
        let r0 = rho_from_symbol(&rep, &q0).unwrap();
        let r1 = rho_from_symbol(&rep, &q1).unwrap();
        for lam in [0.25, 0.5, 0.75] {
            let mix = &r0.rho.scale_re(1.0 - lam) + &r1.rho.scale_re(lam);
            let res = is_gig(&rep, &mix, 5, 11).unwrap();
            assert!(res <= 1e-9, "λ={lam}: residual {res:.3e}");
        }
        assert_eq!(wolfe_check(&q0, &q1).unwrap(), WolfeOutcome::GigMixture);
    }

    #[test]
    fn wolfe_examples() {
        let q0 = CMatrix::diag(&[cr(0.3), cr(0.4), cr(0.5)]);
        let mut up = q0.clone();
        up[(0, 0)] += cr(0.1);
        assert_eq!(wolfe_check(&q0, &up).unwrap(), WolfeOutcome::GigMixture);
        let mut two = q0.clone();
        two[(0, 0)] += cr(0.1);
        two[(1, 1)] -= cr(0.1);
        assert_eq!(wolfe_check(&q0, &two).unwrap(), WolfeOutcome::NotGigMixture);
        assert_eq!(wolfe_check(&q0, &q0).unwrap(), WolfeOutcome::GigMixture);

        // Dense complex displacements of O(1) norm: the second singular
        // value of the difference must be resolved well below 1e-9 even
        // though the subtraction leaves ~1e-17 of rounding in every entry.
        let mut rng = SplitMix64::new(0x1d84_6a92_f7c0_35eb);
        for n in [2usize, 3] {
            for _ in 0..10 {
                let q0 = random_interior_symbol(&mut rng, n, 0.35);
                let eta: Vec<Complex64> = (0..n).map(|_| rng.complex_normal()).collect();
                let norm = eta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let one = CMatrix::from_fn(n, n, |i, j| {
                    eta[i] * eta[j].conj() / (norm * norm) * 0.25
                });
                assert_eq!(
                    wolfe_check(&q0, &(&q0 + &one)).unwrap(),
                    WolfeOutcome::GigMixture
                );
                assert_eq!(
                    wolfe_check(&q0, &(&q0 - &one)).unwrap(),
                    WolfeOutcome::GigMixture
                );
            }
        }
    }

    #[test]
    fn gibbs_examples() {
        let mut rng = SplitMix64::new(1011);
        // Scalar inversion: μ = 1/(1+e^λ) gives H = diag(λ).
        let lam: [f64; 2] = [0.7, -1.2];
        let q = CMatrix::diag(&[cr(1.0 / (1.0 + lam[0].exp())), cr(1.0 / (1.0 + lam[1].exp()))]);
        let h = gibbs_form(&q).unwrap();
        assert!(h.dist(&CMatrix::diag(&[cr(lam[0]), cr(lam[1])])) <= 1e-12);
        assert!(gibbs_form(&CMatrix::identity(2).scale_re(0.5)).unwrap().frobenius_norm() <= 1e-12);
        // Boundary rejected.
        assert!(matches!(gibbs_form(&CMatrix::zeros(2, 2)), Err(Error::SymbolOnBoundary)));
        // Round trip at random interior symbols.
        let rep = FermionRep::new(3).unwrap();
        for _ in 0..5 {
            let q = random_interior_symbol(&mut rng, 3, 0.05);
            let h = gibbs_form(&q).unwrap();
            let via_gibbs = gibbs_density(&rep, &h).unwrap();
            let direct = rho_from_symbol(&rep, &q).unwrap();
            assert!(via_gibbs.dist(&direct.rho) <= 1e-10 * direct.rho.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn symbol_covariance_under_second_quantization() {
        let mut rng = SplitMix64::new(1013);
        let rep = FermionRep::new(3).unwrap();
        let q = random_symbol(&mut rng, 3);
        let u = random_unitary(&mut rng, 3);
        let st = rho_from_symbol(&rep, &q).unwrap();
        let big = rep.second_quantize(&u).unwrap();
        let rotated = &(&big * &st.rho) * &big.adjoint();
        let got = symbol_of(&rep, &rotated).unwrap();
        let want = &(&u * &q) * &u.adjoint();
        assert!(got.dist(&want) <= 1e-11);
    }

    #[test]
    fn degenerate_symbols_are_basis_independent() {
        let rep = FermionRep::new(3).unwrap();
        // Exactly degenerate diagonal symbol: formula must reproduce the
        // explicit diagonal product regardless of eigenbasis choice.
        let q = CMatrix::diag(&[cr(0.3), cr(0.3), cr(0.8)]);
        let st = rho_from_symbol(&rep, &q).unwrap();
        let mut want = CMatrix::zeros(8, 8);
        for b in 0..8usize {
            let mus = [0.3, 0.3, 0.8];
            let mut p = 1.0;
            for j in 0..3 {
                p *= if b & (1 << j) != 0 { 2.0 * mus[j] } else { 2.0 * (1.0 - mus[j]) };
            }
            want[(b, b)] = cr(p);
        }
        assert!(st.rho.dist(&want) <= 1e-11);
        // Rotated degenerate symbol agrees with the Gibbs route.
        let mut rng = SplitMix64::new(1015);
        let u = random_unitary(&mut rng, 3);
        let qr = &(&u * &q) * &u.adjoint();
        let h = gibbs_form(&qr).unwrap();
        let direct = rho_from_symbol(&rep, &qr).unwrap();
        let via = gibbs_density(&rep, &h).unwrap();
        assert!(direct.rho.dist(&via) <= 1e-10);
    }

    #[test]
    fn tracial_product_on_orthogonal_mode_sets() {
        // Symbols deviating from ½ only on complementary invariant subspaces
        // multiply to normalized trace one.
        let rep = FermionRep::new(3).unwrap();
        let qa = CMatrix::diag(&[cr(0.15), cr(0.5), cr(0.5)]);
        let qb = CMatrix::diag(&[cr(0.5), cr(0.9), cr(0.35)]);
        let ra = rho_from_symbol(&rep, &qa).unwrap();
        let rb = rho_from_symbol(&rep, &qb).unwrap();
        let prod = (&ra.rho * &rb.rho).normalized_trace();
        assert!((prod - cr(1.0)).norm() <= 1e-12);
        // The same in a rotated frame.
        let mut rng = SplitMix64::new(1017);
        let u = random_unitary(&mut rng, 3);
        let big = rep.second_quantize(&u).unwrap();
        let ra2 = &(&big * &ra.rho) * &big.adjoint();
        let rb2 = &(&big * &rb.rho) * &big.adjoint();
        assert!(((&ra2 * &rb2).normalized_trace() - cr(1.0)).norm() <= 1e-11);
    }

    #[test]
    fn purity_spectrum_check() {
        let mut rng = SplitMix64::new(1019);
        let rep = FermionRep::new(3).unwrap();
        let q = random_symbol(&mut rng, 3);
        assert!(gig_purity_check(&rep, &q).unwrap() <= 1e-10);
    }

    #[test]
    fn invalid_symbols_rejected() {
        let rep = FermionRep::new(2).unwrap();
        let bad = CMatrix::diag(&[cr(1.4), cr(0.2)]);
        assert!(matches!(rho_from_symbol(&rep, &bad), Err(Error::InvalidSymbol { .. })));
        let nonstate = CMatrix::identity(4).scale_re(2.0);
        assert!(matches!(symbol_of(&rep, &nonstate), Err(Error::NotAState { .. })));
    }
}
