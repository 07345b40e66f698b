//! Irreducible CAR representations on 2^N-dimensional Fock space and the
//! structural operators around them: fields, number and parity operators,
//! the hat transform, second quantization, the gauge projector, particle-hole
//! and transpose automorphisms, Majorana fields, and mode-embedding
//! homomorphisms.
//!
//! Mode j (1-based) acts on bit j−1; bit 0 is the least significant. The
//! occupation basis vector for bitstring b is exactly the standard basis
//! vector with index b, with no extra phase.

use crate::cmatrix::{cr, CMatrix};
use crate::config::MAX_MODES;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, nullspace};
use num_complex::Complex64;

fn popcount(b: usize) -> u32 {
    (b as u64).count_ones()
}

/// Parity of the occupied modes below mode k in basis index b: the
/// Jordan–Wigner sign string.
fn jw_sign(b: usize, k: usize) -> f64 {
    if popcount(b & ((1 << k) - 1)) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone)]
pub struct FermionRep {
    n_modes: usize,
    dim: usize,
    mode_ops: Vec<CMatrix>,
    vacuum_index: usize,
    number_op: CMatrix,
    parity_op: CMatrix,
}

impl FermionRep {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes < 1 || n_modes > MAX_MODES {
            return Err(Error::SizeOutOfRange { n: n_modes, max: MAX_MODES });
        }
        let dim = 1usize << n_modes;
        let mut mode_ops = Vec::with_capacity(n_modes);
        for k in 0..n_modes {
            let mut z = CMatrix::zeros(dim, dim);
            for b in 0..dim {
                if b & (1 << k) != 0 {
                    z[(b ^ (1 << k), b)] = cr(jw_sign(b, k));
                }
            }
            mode_ops.push(z);
        }
        let number_op = CMatrix::from_fn(dim, dim, |i, j| if i == j { cr(popcount(i) as f64) } else { cr(0.0) });
        let parity_op = CMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                cr(if popcount(i) % 2 == 0 { 1.0 } else { -1.0 })
            } else {
                cr(0.0)
            }
        });
        Ok(FermionRep { n_modes, dim, mode_ops, vacuum_index: 0, number_op, parity_op })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Annihilator of mode k (0-based).
    pub fn z(&self, k: usize) -> &CMatrix {
        &self.mode_ops[k]
    }

    pub fn mode_ops(&self) -> &[CMatrix] {
        &self.mode_ops
    }

    pub fn vacuum_index(&self) -> usize {
        self.vacuum_index
    }

    pub fn number_op(&self) -> &CMatrix {
        &self.number_op
    }

    pub fn parity_op(&self) -> &CMatrix {
        &self.parity_op
    }

    /// Particle count of the basis vector with index b.
    pub fn occupation(&self, b: usize) -> u32 {
        popcount(b)
    }

    pub fn check_vector(&self, psi: &[Complex64]) -> Result<()> {
        if psi.len() != self.n_modes {
            return Err(Error::dim(format!("vector length {} for {} modes", psi.len(), self.n_modes)));
        }
        Ok(())
    }

    /// Z(ψ) = Σ_j conj(ψ_j) Z_j; conjugate-linear in ψ.
    pub fn field(&self, psi: &[Complex64]) -> Result<CMatrix> {
        self.check_vector(psi)?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (j, &coef) in psi.iter().enumerate() {
            out = &out + &self.mode_ops[j].scale(coef.conj());
        }
        Ok(out)
    }

    /// Z*(ψ) = Σ_j ψ_j Z_j*; linear in ψ.
    pub fn field_dag(&self, psi: &[Complex64]) -> Result<CMatrix> {
        Ok(self.field(psi)?.adjoint())
    }

    /// X̂ = Σ_{jk} X_{jk} Z_j* Z_k, filled directly from the occupation-basis
    /// action. hat(I) is the number operator.
    pub fn hat(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.rows() != self.n_modes || x.cols() != self.n_modes {
            return Err(Error::dim(format!("hat: X is {}x{}, need {0}x{0} with {} modes", x.rows(), x.cols(), self.n_modes)));
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for b in 0..self.dim {
            for k in 0..self.n_modes {
                if b & (1 << k) == 0 {
                    continue;
                }
                let b1 = b ^ (1 << k);
                let s1 = jw_sign(b, k);
                for j in 0..self.n_modes {
                    let coef = x[(j, k)];
                    if coef.norm_sqr() == 0.0 {
                        continue;
                    }
                    if b1 & (1 << j) != 0 {
                        continue;
                    }
                    let b2 = b1 ^ (1 << j);
                    out[(b2, b)] += coef * cr(s1 * jw_sign(b1, j));
                }
            }
        }
        Ok(out)
    }

    /// Second quantization: the unitary with 𝒰_U Ω_0 = Ω_0 and
    /// 𝒰_U Z(ψ) 𝒰_U* = Z(Uψ), built column by column on the occupation basis.
    pub fn second_quantize(&self, u: &CMatrix) -> Result<CMatrix> {
        if u.rows() != self.n_modes || u.cols() != self.n_modes {
            return Err(Error::dim(format!("second_quantize: U is {}x{}", u.rows(), u.cols())));
        }
        let uu = &u.adjoint() * u;
        let res = uu.dist(&CMatrix::identity(self.n_modes));
        if res > 1e-10 {
            return Err(Error::NotUnitary { residual: res });
        }
        let cols: Vec<Vec<Complex64>> = (0..self.n_modes).map(|k| u.column(k)).collect();
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for b in 0..self.dim {
            let mut v = vec![Complex64::new(0.0, 0.0); self.dim];
            v[self.vacuum_index] = cr(1.0);
            // Occupied modes applied in descending order: the rightmost
            // factor of (Z*(u_1))^{a_1}···(Z*(u_N))^{a_N} acts first.
            for k in (0..self.n_modes).rev() {
                if b & (1 << k) != 0 {
                    v = creator_apply(self.n_modes, &cols[k], &v);
                }
            }
            out.set_column(b, &v);
        }
        Ok(out)
    }

    /// Tracial conditional expectation onto the gauge-invariant subalgebra:
    /// zeroes every matrix element between occupation sectors of different
    /// particle number.
    pub fn gauge_project(&self, a: &CMatrix) -> Result<CMatrix> {
        if a.rows() != self.dim || a.cols() != self.dim {
            return Err(Error::dim(format!("gauge_project: operator is {}x{}, rep dim {}", a.rows(), a.cols(), self.dim)));
        }
        Ok(CMatrix::from_fn(self.dim, self.dim, |i, j| {
            if popcount(i) == popcount(j) {
                a[(i, j)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// Majorana fields Q(ψ) = Z(ψ) + Z*(ψ) and P(ψ) = (Z(ψ) − Z*(ψ))/i.
    pub fn majorana(&self, psi: &[Complex64]) -> Result<(CMatrix, CMatrix)> {
        let z = self.field(psi)?;
        let zd = z.adjoint();
        let q = &z + &zd;
        let p = (&z - &zd).scale(Complex64::new(0.0, -1.0));
        Ok((q, p))
    }

    pub fn tau(&self, a: &CMatrix) -> Complex64 {
        a.normalized_trace()
    }
}

/// Applies Z*(φ) to a state vector: out[b | 2^j] += φ_j · sign · v[b].
pub(crate) fn creator_apply(n_modes: usize, phi: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let dim = v.len();
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (b, &amp) in v.iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        for j in 0..n_modes {
            if b & (1 << j) == 0 {
                let coef = phi[j];
                if coef.norm_sqr() != 0.0 {
                    out[b | (1 << j)] += coef * cr(jw_sign(b, j)) * amp;
                }
            }
        }
    }
    out
}

/// Complex conjugation with the computational single-particle basis declared
/// real. Its lift to Fock space is entrywise conjugation in the occupation
/// basis, since all Jordan–Wigner matrix elements are real.
#[derive(Debug, Clone)]
pub struct Conjugation {
    n_modes: usize,
}

impl Conjugation {
    pub fn new(rep: &FermionRep) -> Self {
        Conjugation { n_modes: rep.n_modes() }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn conj_vec(&self, psi: &[Complex64]) -> Vec<Complex64> {
        psi.iter().map(|z| z.conj()).collect()
    }

    /// 𝒞 A 𝒞 for the lifted conjugation: entrywise conjugate.
    pub fn conj_op(&self, a: &CMatrix) -> CMatrix {
        a.conj()
    }
}

/// The fermionic transpose: matrix transpose in the occupation basis built
/// from real modes. On self-adjoint operators this coincides with 𝒞A𝒞
/// (entrywise conjugation); the transpose is its linear extension. An
/// involution, positive but not completely positive; on symbols Q ↦ Qᵀ.
pub fn transpose_map(rep: &FermionRep, conj: &Conjugation, a: &CMatrix) -> Result<CMatrix> {
    if conj.n_modes() != rep.n_modes() {
        return Err(Error::dim("transpose_map: conjugation does not match rep"));
    }
    if a.rows() != rep.dim() || a.cols() != rep.dim() {
        return Err(Error::dim(format!("transpose_map: operator is {}x{}", a.rows(), a.cols())));
    }
    Ok(a.transpose())
}

/// The particle-hole intertwiner and the automorphism it implements:
/// 𝒰 Z(ψ) 𝒰* = Z*(ψ̄).
#[derive(Debug, Clone)]
pub struct ParticleHole {
    pub unitary: CMatrix,
}

impl ParticleHole {
    pub fn apply(&self, a: &CMatrix) -> CMatrix {
        &(&self.unitary * a) * &self.unitary.adjoint()
    }
}

/// Builds the particle-hole unitary as a product of the self-adjoint
/// Majorana unitaries Q(e_1)···Q(e_N), with a parity factor for even N and a
/// phase correction making 𝒰 = 𝒰* exactly.
pub fn particle_hole(rep: &FermionRep, conj: &Conjugation) -> Result<ParticleHole> {
    if conj.n_modes() != rep.n_modes() {
        return Err(Error::dim("particle_hole: conjugation does not match rep"));
    }
    let n = rep.n_modes();
    let mut u = CMatrix::identity(rep.dim());
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = cr(1.0);
        let (q, _) = rep.majorana(&e)?;
        u = &u * &q;
    }
    if n % 2 == 0 {
        u = rep.parity_op() * &u;
    }
    // The product is self-adjoint or anti-self-adjoint; the phase i fixes the
    // latter without changing the conjugation action.
    let sa = u.dist(&u.adjoint());
    let asa = (&u + &u.adjoint()).frobenius_norm();
    let u = if sa <= asa { u } else { u.mul_i() };
    let ph = ParticleHole { unitary: u };
    for k in 0..n {
        let img = ph.apply(rep.z(k));
        if img.dist(&rep.z(k).adjoint()) > 1e-11 * img.frobenius_norm().max(1.0) {
            return Err(Error::IntertwinerNotFound);
        }
    }
    Ok(ph)
}

/// Solves the intertwining system 𝒰 Z_j = Z_j* 𝒰 for all j over the full
/// matrix space. The solution space is one-dimensional; the normalized
/// element is returned with the self-adjoint phase. Dense in dim²: a
/// cross-check for small N, not the production path.
pub fn find_intertwiner(rep: &FermionRep) -> Result<ParticleHole> {
    let d = rep.dim();
    let id = CMatrix::identity(d);
    // Both families are needed: M Z_j = Z_j* M alone admits non-invertible
    // solutions such as Z*Z; adding M Z_j* = Z_j M cuts the space to a line.
    let mut stacked = CMatrix::zeros(2 * rep.n_modes() * d * d, d * d);
    for j in 0..rep.n_modes() {
        // vec(M Z_j − Z_j* M) = (Z_jᵀ ⊗ I − I ⊗ Z_j*) vec(M).
        let block = &rep.z(j).transpose().kron(&id) - &id.kron(&rep.z(j).adjoint());
        stacked.set_block(2 * j * d * d, 0, &block);
        let block2 = &rep.z(j).conj().kron(&id) - &id.kron(rep.z(j));
        stacked.set_block((2 * j + 1) * d * d, 0, &block2);
    }
    let ker = nullspace(&stacked);
    if ker.cols() != 1 {
        return Err(Error::IntertwinerNotFound);
    }
    let m = CMatrix::unvec(&ker.column(0), d, d);
    // Normalize to unitary: columns of the solution have a common norm.
    let scale = (m.frobenius_norm().powi(2) / d as f64).sqrt();
    let mut u = m.scale_re(1.0 / scale);
    // Fix the global phase so that 𝒰 = 𝒰*.
    let eig = hermitian_eig(&(&u.adjoint() * &u))?;
    if (eig.values[0] - 1.0).abs() > 1e-8 || (eig.values[d - 1] - 1.0).abs() > 1e-8 {
        return Err(Error::IntertwinerNotFound);
    }
    // u* = e^{iθ} u for some phase; halve it.
    let mut theta = 0.0;
    let mut found = false;
    'outer: for i in 0..d {
        for j in 0..d {
            if u[(i, j)].norm() > 1e-6 {
                theta = (u[(j, i)].conj() / u[(i, j)]).arg();
                found = true;
                break 'outer;
            }
        }
    }
    if !found {
        return Err(Error::IntertwinerNotFound);
    }
    u = u.scale(Complex64::from_polar(1.0, theta / 2.0));
    if u.dist(&u.adjoint()) > 1e-8 {
        u = u.mul_i();
    }
    let ph = ParticleHole { unitary: u };
    for k in 0..rep.n_modes() {
        let img = ph.apply(rep.z(k));
        if img.dist(&rep.z(k).adjoint()) > 1e-9 * img.frobenius_norm().max(1.0) {
            return Err(Error::IntertwinerNotFound);
        }
    }
    Ok(ph)
}

/// Per-mode factors of the τ-orthonormal monomial basis: I, √2 Z*_k, √2 Z_k,
/// 2Z*_kZ_k − I. Ordered products over ascending modes span the algebra.
fn monomial_factor(rep: &FermionRep, k: usize, digit: usize) -> CMatrix {
    let z = rep.z(k);
    match digit {
        0 => CMatrix::identity(rep.dim()),
        1 => z.adjoint().scale_re(std::f64::consts::SQRT_2),
        2 => z.scale_re(std::f64::consts::SQRT_2),
        _ => &(&z.adjoint() * z).scale_re(2.0) - &CMatrix::identity(rep.dim()),
    }
}

/// The unique algebra homomorphism sending src Z_j to dst Z_{mode_map(j)},
/// applied to X through its expansion in the τ-orthonormal monomial basis.
/// Cost grows as 4^N_src times a dst matrix product; intended for small
/// source representations.
pub fn embed_homomorphism(src: &FermionRep, dst: &FermionRep, mode_map: &[usize], x: &CMatrix) -> Result<CMatrix> {
    let n = src.n_modes();
    if mode_map.len() != n || n > dst.n_modes() {
        return Err(Error::dim(format!("embed_homomorphism: {} source modes, map of length {}, {} target modes", n, mode_map.len(), dst.n_modes())));
    }
    let mut seen = vec![false; dst.n_modes()];
    for &m in mode_map {
        if m >= dst.n_modes() || seen[m] {
            return Err(Error::NotInjective { sigma_min: 0.0 });
        }
        seen[m] = true;
    }
    if x.rows() != src.dim() || x.cols() != src.dim() {
        return Err(Error::dim(format!("embed_homomorphism: operator is {}x{}", x.rows(), x.cols())));
    }
    let mut out = CMatrix::zeros(dst.dim(), dst.dim());
    // DFS over digit strings reusing partial products mode by mode.
    fn rec(
        src: &FermionRep,
        dst: &FermionRep,
        mode_map: &[usize],
        x: &CMatrix,
        k: usize,
        src_prod: &CMatrix,
        dst_prod: &CMatrix,
        out: &mut CMatrix,
    ) {
        if k == src.n_modes() {
            let coef = src.tau(&(&src_prod.adjoint() * x));
            if coef.norm() > 0.0 {
                *out = &*out + &dst_prod.scale(coef);
            }
            return;
        }
        for digit in 0..4 {
            let sp = src_prod * &monomial_factor(src, k, digit);
            let dp = dst_prod * &monomial_factor(dst, mode_map[k], digit);
            rec(src, dst, mode_map, x, k + 1, &sp, &dp, out);
        }
    }
    let src_id = CMatrix::identity(src.dim());
    let dst_id = CMatrix::identity(dst.dim());
    rec(src, dst, mode_map, x, 0, &src_id, &dst_id, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmatrix::{anticommutator, commutator};
    use crate::linalg::expm;
    use crate::rng::SplitMix64;
    use crate::sampling::{random_matrix, random_unitary};

    fn random_vec(rng: &mut SplitMix64, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| rng.complex_normal()).collect()
    }

    #[test]
    fn rep_size_limits() {
        assert!(matches!(FermionRep::new(0), Err(Error::SizeOutOfRange { .. })));
        assert!(matches!(FermionRep::new(11), Err(Error::SizeOutOfRange { .. })));
        assert_eq!(FermionRep::new(1).unwrap().dim(), 2);
        assert_eq!(FermionRep::new(8).unwrap().dim(), 256);
    }

    #[test]
    fn car_relations_exact() {
        for n in 1..=6 {
            let rep = FermionRep::new(n).unwrap();
            let id = CMatrix::identity(rep.dim());
            for j in 0..n {
                for k in 0..n {
                    let mixed = anticommutator(rep.z(j), &rep.z(k).adjoint());
                    let want = if j == k { id.clone() } else { CMatrix::zeros(rep.dim(), rep.dim()) };
                    assert!(mixed.dist(&want) <= 1e-13, "n={n} j={j} k={k}");
                    let same = anticommutator(rep.z(j), rep.z(k));
                    assert!(same.frobenius_norm() <= 1e-13, "n={n} j={j} k={k}");
                }
            }
        }
    }

    #[test]
    fn number_parity_vacuum_invariants() {
        for n in 1..=6 {
            let rep = FermionRep::new(n).unwrap();
            let mut num = CMatrix::zeros(rep.dim(), rep.dim());
            for j in 0..n {
                num = &num + &(&rep.z(j).adjoint() * rep.z(j));
            }
            assert!(num.dist(rep.number_op()) <= 1e-13, "n={n}");
            // Eigenspace dimensions are binomial; sectors 0 and N are lines.
            let mut counts = vec![0usize; n + 1];
            for b in 0..rep.dim() {
                counts[rep.occupation(b) as usize] += 1;
            }
            assert_eq!(counts[0], 1);
            assert_eq!(counts[n], 1);
            let w = rep.parity_op();
            assert!(w.dist(&w.adjoint()) == 0.0);
            assert!((w * w).dist(&CMatrix::identity(rep.dim())) == 0.0);
            for j in 0..n {
                assert!((&(w * rep.z(j)) * w).dist(&rep.z(j).scale_re(-1.0)) <= 1e-13);
            }
            // 𝒩 Ω_0 = 0.
            let v0 = rep.number_op().column(rep.vacuum_index());
            assert!(v0.iter().map(|z| z.norm()).sum::<f64>() == 0.0);
        }
    }

    #[test]
    fn number_op_is_popcount_at_n3() {
        let rep = FermionRep::new(3).unwrap();
        for b in 0..8 {
            let want = (b as u64).count_ones() as f64;
            assert_eq!(rep.number_op()[(b, b)].re, want);
        }
    }

    #[test]
    fn field_conjugate_linearity() {
        let rep = FermionRep::new(2).unwrap();
        let e1 = vec![cr(1.0), cr(0.0)];
        assert!(rep.field(&e1).unwrap().dist(rep.z(0)) == 0.0);
        let ie1 = vec![Complex64::new(0.0, 1.0), cr(0.0)];
        let want = rep.z(0).scale(Complex64::new(0.0, -1.0));
        assert!(rep.field(&ie1).unwrap().dist(&want) == 0.0);
    }

    #[test]
    fn field_car_random_vectors() {
        let mut rng = SplitMix64::new(11);
        let rep = FermionRep::new(4).unwrap();
        for _ in 0..10 {
            let psi = random_vec(&mut rng, 4);
            let phi = random_vec(&mut rng, 4);
            let ip: Complex64 = psi.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
            let lhs = anticommutator(&rep.field(&psi).unwrap(), &rep.field_dag(&phi).unwrap());
            let want = CMatrix::identity(rep.dim()).scale(ip);
            assert!(lhs.dist(&want) <= 1e-13 * want.frobenius_norm().max(1.0));
            let zz = anticommutator(&rep.field(&psi).unwrap(), &rep.field(&phi).unwrap());
            assert!(zz.frobenius_norm() <= 1e-13);
        }
    }

    #[test]
    fn hat_identities() {
        let mut rng = SplitMix64::new(13);
        let rep = FermionRep::new(3).unwrap();
        let id3 = CMatrix::identity(3);
        assert!(rep.hat(&id3).unwrap().dist(rep.number_op()) == 0.0);
        // Matrix-product oracle: X̂ = Σ X_{jk} Z_j* Z_k.
        let x = random_matrix(&mut rng, 3);
        let mut oracle = CMatrix::zeros(8, 8);
        for j in 0..3 {
            for k in 0..3 {
                oracle = &oracle + &(&rep.z(j).adjoint() * rep.z(k)).scale(x[(j, k)]);
            }
        }
        assert!(rep.hat(&x).unwrap().dist(&oracle) <= 1e-14);
        // Commutator law and trace-norm bound.
        for _ in 0..50 {
            let x = random_matrix(&mut rng, 3);
            let y = random_matrix(&mut rng, 3);
            let lhs = commutator(&rep.hat(&x).unwrap(), &rep.hat(&y).unwrap());
            let rhs = rep.hat(&commutator(&x, &y)).unwrap();
            assert!(lhs.dist(&rhs) <= 1e-12 * rhs.frobenius_norm().max(1.0));
            let opn = crate::linalg::op_norm(&rep.hat(&x).unwrap());
            let trn = crate::linalg::trace_norm(&x);
            assert!(opn <= trn + 1e-10);
        }
    }

    #[test]
    fn hat_field_commutators() {
        let mut rng = SplitMix64::new(17);
        let rep = FermionRep::new(3).unwrap();
        let x = random_matrix(&mut rng, 3);
        let psi = random_vec(&mut rng, 3);
        let xh = rep.hat(&x).unwrap();
        // [X̂, Z*(ψ)] = Z*(Xψ) and [X̂, Z(ψ)] = −Z(X*ψ).
        let xpsi = x.matvec(&psi);
        let lhs1 = commutator(&xh, &rep.field_dag(&psi).unwrap());
        assert!(lhs1.dist(&rep.field_dag(&xpsi).unwrap()) <= 1e-12);
        let xdpsi = x.adjoint().matvec(&psi);
        let lhs2 = commutator(&xh, &rep.field(&psi).unwrap());
        assert!(lhs2.dist(&rep.field(&xdpsi).unwrap().scale_re(-1.0)) <= 1e-12);
    }

    #[test]
    fn second_quantize_identity_and_gauge() {
        let rep = FermionRep::new(3).unwrap();
        let id = CMatrix::identity(3);
        assert!(rep.second_quantize(&id).unwrap().dist(&CMatrix::identity(8)) == 0.0);
        let t = 0.7;
        let u = id.scale(Complex64::from_polar(1.0, t));
        let big = rep.second_quantize(&u).unwrap();
        let want = expm(&rep.number_op().scale(Complex64::new(0.0, t))).unwrap();
        assert!(big.dist(&want) <= 1e-12);
    }

    #[test]
    fn second_quantize_intertwines_and_composes() {
        let mut rng = SplitMix64::new(19);
        for n in [2usize, 3] {
            let rep = FermionRep::new(n).unwrap();
            for _ in 0..5 {
                let u = random_unitary(&mut rng, n);
                let big = rep.second_quantize(&u).unwrap();
                assert!((&big.adjoint() * &big).dist(&CMatrix::identity(rep.dim())) <= 1e-11);
                let psi = random_vec(&mut rng, n);
                let lhs = &(&big * &rep.field(&psi).unwrap()) * &big.adjoint();
                let rhs = rep.field(&u.matvec(&psi)).unwrap();
                assert!(lhs.dist(&rhs) <= 1e-11 * rhs.frobenius_norm().max(1.0), "n={n}");
                let v = random_unitary(&mut rng, n);
                let comp = rep.second_quantize(&(&u * &v)).unwrap();
                let prod = &big * &rep.second_quantize(&v).unwrap();
                assert!(comp.dist(&prod) <= 1e-10);
                // Vacuum is fixed.
                let col = big.column(rep.vacuum_index());
                assert!((col[rep.vacuum_index()] - cr(1.0)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn gauge_covariance_primitive() {
        let mut rng = SplitMix64::new(23);
        let rep = FermionRep::new(3).unwrap();
        for _ in 0..10 {
            let t = rng.uniform_in(-3.0, 3.0);
            let psi = random_vec(&mut rng, 3);
            let g = expm(&rep.number_op().scale(Complex64::new(0.0, t))).unwrap();
            let lhs = &(&g * &rep.field(&psi).unwrap()) * &g.adjoint();
            let rotated: Vec<Complex64> = psi.iter().map(|z| z * Complex64::from_polar(1.0, t)).collect();
            let rhs = rep.field(&rotated).unwrap();
            assert!(lhs.dist(&rhs) <= 1e-11 * rhs.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn gauge_project_examples() {
        let mut rng = SplitMix64::new(29);
        let rep = FermionRep::new(3).unwrap();
        let a = random_matrix(&mut rng, 8);
        let p = rep.gauge_project(&a).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if rep.occupation(i) != rep.occupation(j) {
                    assert!(p[(i, j)].norm() == 0.0);
                }
            }
        }
        assert!(rep.gauge_project(&p).unwrap().dist(&p) == 0.0);
        assert!(rep.gauge_project(rep.z(0)).unwrap().frobenius_norm() == 0.0);
    }

    #[test]
    fn majorana_relations() {
        let mut rng = SplitMix64::new(31);
        let rep = FermionRep::new(3).unwrap();
        let id = CMatrix::identity(8);
        for _ in 0..10 {
            let psi = random_vec(&mut rng, 3);
            let phi = random_vec(&mut rng, 3);
            let (qp, pp) = rep.majorana(&psi).unwrap();
            let (qf, pf) = rep.majorana(&phi).unwrap();
            let ip: Complex64 = psi.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
            let re2 = cr(2.0 * ip.re);
            // The cross anticommutator is −2 Im⟨ψ,φ⟩·I by the CAR; it
            // vanishes exactly when the inner product is real.
            let cross = cr(-2.0 * ip.im);
            assert!(anticommutator(&qp, &pf).dist(&id.scale(cross)) <= 1e-12);
            assert!(anticommutator(&qp, &qf).dist(&id.scale(re2)) <= 1e-12);
            assert!(anticommutator(&pp, &pf).dist(&id.scale(re2)) <= 1e-12);
        }
        // Real ψ: {Q(ψ), P(ψ)} = 0 and {Q,Q} = 2‖ψ‖².
        let psi = vec![cr(0.6), cr(-0.3), cr(1.1)];
        let (q, p) = rep.majorana(&psi).unwrap();
        assert!(anticommutator(&q, &p).frobenius_norm() <= 1e-13);
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!(anticommutator(&q, &q).dist(&id.scale_re(2.0 * n2)) <= 1e-13);
    }

    #[test]
    fn particle_hole_action() {
        for n in [1usize, 2, 3, 4] {
            let rep = FermionRep::new(n).unwrap();
            let conj = Conjugation::new(&rep);
            let ph = particle_hole(&rep, &conj).unwrap();
            // Unitary and self-adjoint.
            let u = &ph.unitary;
            assert!((&u.adjoint() * u).dist(&CMatrix::identity(rep.dim())) <= 1e-12, "n={n}");
            assert!(u.dist(&u.adjoint()) <= 1e-12, "n={n}");
            // α_ph(𝒩) = N·I − 𝒩.
            let img = ph.apply(rep.number_op());
            let want = &CMatrix::identity(rep.dim()).scale_re(n as f64) - rep.number_op();
            assert!(img.dist(&want) <= 1e-11, "n={n}");
            // General vectors: Z(ψ) ↦ Z*(ψ̄).
            let mut rng = SplitMix64::new(37 + n as u64);
            let psi = random_vec(&mut rng, n);
            let lhs = ph.apply(&rep.field(&psi).unwrap());
            let rhs = rep.field_dag(&conj.conj_vec(&psi)).unwrap();
            assert!(lhs.dist(&rhs) <= 1e-11 * rhs.frobenius_norm().max(1.0), "n={n}");
            // Involution on random operators.
            let a = random_matrix(&mut rng, rep.dim());
            assert!(ph.apply(&ph.apply(&a)).dist(&a) <= 1e-11 * a.frobenius_norm());
        }
    }

    #[test]
    fn particle_hole_matches_linear_system() {
        for n in [1usize, 2, 3] {
            let rep = FermionRep::new(n).unwrap();
            let conj = Conjugation::new(&rep);
            let prod = particle_hole(&rep, &conj).unwrap();
            let sys = find_intertwiner(&rep).unwrap();
            // Same automorphism; unitaries agree up to a sign.
            let d1 = prod.unitary.dist(&sys.unitary);
            let d2 = prod.unitary.dist(&sys.unitary.scale_re(-1.0));
            assert!(d1.min(d2) <= 1e-8, "n={n}: {d1:.2e} {d2:.2e}");
        }
    }

    #[test]
    fn transpose_map_properties() {
        let mut rng = SplitMix64::new(41);
        let rep = FermionRep::new(2).unwrap();
        let conj = Conjugation::new(&rep);
        let a = random_matrix(&mut rng, 4);
        let t = transpose_map(&rep, &conj, &a).unwrap();
        assert!(transpose_map(&rep, &conj, &t).unwrap().dist(&a) == 0.0);
        // Positivity is preserved but complete positivity fails: the Choi
        // matrix at N=1 has a negative eigenvalue.
        let rep1 = FermionRep::new(1).unwrap();
        let conj1 = Conjugation::new(&rep1);
        let mut choi = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                let mut e = CMatrix::zeros(2, 2);
                e[(i, j)] = cr(1.0);
                let img = transpose_map(&rep1, &conj1, &e).unwrap();
                for k in 0..2 {
                    for l in 0..2 {
                        choi[(i * 2 + k, j * 2 + l)] = img[(k, l)];
                    }
                }
            }
        }
        let min = crate::linalg::min_eigenvalue(&choi);
        assert!(min < -0.5, "Choi min eigenvalue {min}");
    }

    #[test]
    fn embed_homomorphism_checks() {
        let mut rng = SplitMix64::new(43);
        let src = FermionRep::new(2).unwrap();
        let dst = FermionRep::new(3).unwrap();
        let map = [2usize, 0];
        let id = CMatrix::identity(4);
        assert!(embed_homomorphism(&src, &dst, &map, &id).unwrap().dist(&CMatrix::identity(8)) <= 1e-12);
        let z1_img = embed_homomorphism(&src, &dst, &map, src.z(0)).unwrap();
        assert!(z1_img.dist(dst.z(2)) <= 1e-12);
        // Identity map reconstructs: expansion in the monomial basis is exact.
        for _ in 0..20 {
            let x = random_matrix(&mut rng, 4);
            let back = embed_homomorphism(&src, &src, &[0, 1], &x).unwrap();
            assert!(back.dist(&x) <= 1e-11 * x.frobenius_norm().max(1.0));
        }
        // Homomorphism property on random monomials.
        let x = &src.z(0).adjoint() * src.z(1);
        let y = &(src.z(1) * src.z(0)) + &src.z(0).adjoint();
        let lhs = embed_homomorphism(&src, &dst, &map, &anticommutator(&x, &y)).unwrap();
        let rhs = anticommutator(
            &embed_homomorphism(&src, &dst, &map, &x).unwrap(),
            &embed_homomorphism(&src, &dst, &map, &y).unwrap(),
        );
        assert!(lhs.dist(&rhs) <= 1e-11 * rhs.frobenius_norm().max(1.0));
        // Non-injective maps are rejected.
        assert!(matches!(embed_homomorphism(&src, &dst, &[1, 1], &id), Err(Error::NotInjective { .. })));
    }

    #[test]
    fn monomial_basis_orthonormal() {
        let rep = FermionRep::new(2).unwrap();
        let mut basis = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                let m = &monomial_factor(&rep, 0, a) * &monomial_factor(&rep, 1, b);
                basis.push(m);
            }
        }
        for (i, x) in basis.iter().enumerate() {
            for (j, y) in basis.iter().enumerate() {
                let ip = rep.tau(&(&x.adjoint() * y));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - cr(want)).norm() <= 1e-13, "i={i} j={j}");
            }
        }
    }
}
