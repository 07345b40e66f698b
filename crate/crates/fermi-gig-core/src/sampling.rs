//! Seeded generators for matrices with the side conditions the library's
//! operations expect: unitaries, PSD matrices, symbols in [0, 1], contraction
//! pairs (S, R) with 0 ≤ R ≤ 1 − SS*, and semigroup data (G, A) with
//! G + G* ≤ 0 and 0 ≤ A ≤ −(G + G*). All derive deterministically from the
//! passed stream.

use crate::cmatrix::{cr, CMatrix};
use crate::linalg::{op_norm, orthonormalize, psd_function, PsdFn};
use crate::rng::SplitMix64;

pub fn random_matrix(rng: &mut SplitMix64, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| rng.complex_normal())
}

pub fn random_hermitian(rng: &mut SplitMix64, n: usize) -> CMatrix {
    let a = random_matrix(rng, n);
    (&a + &a.adjoint()).scale_re(0.5)
}

pub fn random_unitary(rng: &mut SplitMix64, n: usize) -> CMatrix {
    loop {
        let q = orthonormalize(&random_matrix(rng, n), 1e-6);
        if q.cols() == n {
            return q;
        }
    }
}

pub fn random_psd(rng: &mut SplitMix64, n: usize) -> CMatrix {
    let a = random_matrix(rng, n);
    (&a * &a.adjoint()).scale_re(1.0 / n as f64)
}

/// Hermitian with spectrum inside [lo, hi].
pub fn random_spectrum_in(rng: &mut SplitMix64, n: usize, lo: f64, hi: f64) -> CMatrix {
    let v = random_unitary(rng, n);
    let d = CMatrix::diag(&(0..n).map(|_| cr(rng.uniform_in(lo, hi))).collect::<Vec<_>>());
    &(&v * &d) * &v.adjoint()
}

/// Symbol of a gauge-invariant state: Hermitian with 0 ≤ Q ≤ 1.
pub fn random_symbol(rng: &mut SplitMix64, n: usize) -> CMatrix {
    random_spectrum_in(rng, n, 0.0, 1.0)
}

/// Symbol with spectrum in (margin, 1 − margin), usable for Gibbs forms and
/// modular operators.
pub fn random_interior_symbol(rng: &mut SplitMix64, n: usize, margin: f64) -> CMatrix {
    random_spectrum_in(rng, n, margin, 1.0 - margin)
}

/// Operator-norm contraction scaled to ‖S‖ ≤ max_norm.
pub fn random_contraction(rng: &mut SplitMix64, n: usize, max_norm: f64) -> CMatrix {
    let a = random_matrix(rng, n);
    let target = max_norm * rng.uniform_in(0.3, 1.0);
    a.scale_re(target / op_norm(&a).max(1e-12))
}

/// (S, R) with ‖S‖ ≤ 1 and 0 ≤ R ≤ 1 − SS*: the input data of a
/// gauge-covariant channel.
pub fn random_compatible_sr(rng: &mut SplitMix64, n: usize) -> (CMatrix, CMatrix) {
    let s = random_contraction(rng, n, 0.98);
    let d = &CMatrix::identity(n) - &(&s * &s.adjoint());
    let half = psd_function(&d, PsdFn::Sqrt).expect("1 - SS* is PSD for a contraction");
    let c = random_symbol(rng, n);
    let r = &(&half * &c) * &half;
    (s, r)
}

/// (G, A) with G + G* ≤ 0 and 0 ≤ A ≤ −(G + G*): semigroup data. G is
/// non-normal in general.
pub fn random_semigroup_ga(rng: &mut SplitMix64, n: usize) -> (CMatrix, CMatrix) {
    let h = &random_psd(rng, n) + &CMatrix::identity(n).scale_re(rng.uniform_in(0.05, 0.3));
    let k = random_hermitian(rng, n);
    let g = &h.scale_re(-1.0) + &k.scale_re(rng.uniform_in(0.0, 1.0)).mul_i();
    let two_h_half = psd_function(&h.scale_re(2.0), PsdFn::Sqrt).unwrap();
    let t = random_symbol(rng, n);
    let a = &(&two_h_half * &t) * &two_h_half;
    (g, a)
}

/// Density matrix with respect to the normalized trace: PSD with τ(ρ) = 1.
pub fn random_density(rng: &mut SplitMix64, dim: usize) -> CMatrix {
    let a = CMatrix::from_fn(dim, dim, |_, _| rng.complex_normal());
    let p = &a * &a.adjoint();
    let t = p.normalized_trace().re;
    p.scale_re(1.0 / t)
}

/// Commuting Gibbs-type data: H PSD and T a symbol diagonal in the same
/// basis, with ker H ⊆ ker T. Returns (H, T).
pub fn random_commuting_ht(rng: &mut SplitMix64, n: usize) -> (CMatrix, CMatrix) {
    let v = random_unitary(rng, n);
    let hvals: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.2, 1.5)).collect();
    let tvals: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.05, 0.95)).collect();
    let h = &(&v * &CMatrix::diag(&hvals.iter().map(|&x| cr(x)).collect::<Vec<_>>())) * &v.adjoint();
    let t = &(&v * &CMatrix::diag(&tvals.iter().map(|&x| cr(x)).collect::<Vec<_>>())) * &v.adjoint();
    (h, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_psd_within, loewner_leq};

    #[test]
    fn generators_satisfy_side_conditions() {
        let mut rng = SplitMix64::new(42);
        for n in [1usize, 2, 4] {
            let u = random_unitary(&mut rng, n);
            assert!((&u.adjoint() * &u).dist(&CMatrix::identity(n)) < 1e-10);
            let q = random_symbol(&mut rng, n);
            assert!(is_psd_within(&q, 1e-12));
            assert!(loewner_leq(&q, &CMatrix::identity(n), 1e-12));
            let (s, r) = random_compatible_sr(&mut rng, n);
            assert!(op_norm(&s) <= 1.0 + 1e-12);
            assert!(is_psd_within(&r, 1e-10));
            let cap = &CMatrix::identity(n) - &(&s * &s.adjoint());
            assert!(loewner_leq(&r, &cap, 1e-10));
            let (g, a) = random_semigroup_ga(&mut rng, n);
            let neg = (&g + &g.adjoint()).scale_re(-1.0);
            assert!(is_psd_within(&neg, 1e-10));
            assert!(is_psd_within(&a, 1e-10));
            assert!(loewner_leq(&a, &neg, 1e-10));
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let mut a = SplitMix64::substream(9, 3);
        let mut b = SplitMix64::substream(9, 3);
        assert_eq!(random_matrix(&mut a, 3).data(), random_matrix(&mut b, 3).data());
    }
}
