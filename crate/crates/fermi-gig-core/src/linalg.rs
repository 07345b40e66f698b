//! Dense complex linear-algebra kernel: Hermitian eigensolver (cyclic Jacobi),
//! matrix exponential (scaling and squaring), spectral functions of PSD
//! matrices, Stein and Lyapunov-accumulation solvers, polar decomposition.
//! Everything is exact-arithmetic-free and sized for dim ≤ 1024.

use crate::cmatrix::{cr, CMatrix};
use crate::config::{EXPM_SCALE, JACOBI_OFF, KERNEL_TOL, TOL_HERM, TOL_PSD, TOL_SR};
use crate::error::{Error, Result};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct EigDecomposition {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are the eigenvectors, ordered like `values`.
    pub vectors: CMatrix,
}

impl EigDecomposition {
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut d = CMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = cr(self.values[i]);
        }
        &(&self.vectors * &d) * &self.vectors.adjoint()
    }

    /// V f(diag) V* for a scalar function of the eigenvalues.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut d = CMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = cr(f(self.values[i]));
        }
        &(&self.vectors * &d) * &self.vectors.adjoint()
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Converges when the off-diagonal Frobenius mass drops below
/// JACOBI_OFF·‖M‖_F.
pub fn hermitian_eig(m: &CMatrix) -> Result<EigDecomposition> {
    let n = m.require_square()?;
    let scale = m.frobenius_norm();
    let herm_res = m.hermitian_residual();
    if herm_res > TOL_HERM * scale.max(1.0) {
        return Err(Error::NonHermitian { residual: herm_res });
    }
    // Work on the exactly Hermitian part; the residual above bounds the bias.
    let mut a = CMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * cr(0.5));
    let mut v = CMatrix::identity(n);
    if n > 1 {
        let target = JACOBI_OFF * scale.max(1e-300);
        let skip = target / (10.0 * n as f64);
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += 2.0 * a[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= target {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    if mag <= skip {
                        continue;
                    }
                    let phase = apq / cr(mag); // e^{iφ}
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let tau = (aqq - app) / (2.0 * mag);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // Plane unitary: V[p,p]=c, V[p,q]=s, V[q,p]=−s·conj(phase), V[q,q]=c·conj(phase).
                    let vpp = cr(c);
                    let vpq = cr(s);
                    let vqp = -cr(s) * phase.conj();
                    let vqq = cr(c) * phase.conj();
                    // Columns: M ← M·V.
                    for i in 0..n {
                        let mp = a[(i, p)];
                        let mq = a[(i, q)];
                        a[(i, p)] = mp * vpp + mq * vqp;
                        a[(i, q)] = mp * vpq + mq * vqq;
                    }
                    // Rows: M ← V*·M.
                    for j in 0..n {
                        let mp = a[(p, j)];
                        let mq = a[(q, j)];
                        a[(p, j)] = vpp.conj() * mp + vqp.conj() * mq;
                        a[(q, j)] = vpq.conj() * mp + vqq.conj() * mq;
                    }
                    for i in 0..n {
                        let vp = v[(i, p)];
                        let vq = v[(i, q)];
                        v[(i, p)] = vp * vpp + vq * vqp;
                        v[(i, q)] = vp * vpq + vq * vqq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(EigDecomposition { values, vectors })
}

/// Matrix exponential: scale until ‖M/2^k‖_F ≤ EXPM_SCALE, 30-term Taylor by
/// Horner's rule, then square k times.
pub fn expm(m: &CMatrix) -> Result<CMatrix> {
    let n = m.require_square()?;
    let nrm = m.frobenius_norm();
    let k = if nrm <= EXPM_SCALE { 0 } else { (nrm / EXPM_SCALE).log2().ceil() as u32 };
    let scaled = m.scale_re(1.0 / f64::powi(2.0, k as i32));
    let id = CMatrix::identity(n);
    let mut acc = id.clone();
    for j in (1..=30).rev() {
        acc = &id + &(&scaled * &acc).scale_re(1.0 / j as f64);
    }
    for _ in 0..k {
        acc = &acc * &acc;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsdFn {
    Sqrt,
    Log,
    Pinv,
    Pow(f64),
    InvSqrtPinv,
}

/// Spectral function of a Hermitian PSD matrix. Eigenvalues in
/// [−tol_psd·max(1,λ_max), 0) are clamped to 0; pinv-type functions send the
/// kernel (λ ≤ kernel_tol·λ_max) to 0.
pub fn psd_function(m: &CMatrix, f: PsdFn) -> Result<CMatrix> {
    let eig = hermitian_eig(m)?;
    let lam_max = eig.values.iter().cloned().fold(0.0, f64::max);
    let clamp_floor = -TOL_PSD * lam_max.max(1.0);
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < clamp_floor {
        return Err(Error::NotPsd { min_eig: min });
    }
    let kernel_cut = KERNEL_TOL * lam_max.max(0.0);
    if matches!(f, PsdFn::Log) && eig.values.iter().any(|&l| l <= kernel_cut) {
        return Err(Error::LogOfSingular);
    }
    Ok(eig.apply(|l| {
        let l = l.max(0.0);
        match f {
            PsdFn::Sqrt => l.sqrt(),
            PsdFn::Log => l.ln(),
            PsdFn::Pinv => {
                if l <= kernel_cut {
                    0.0
                } else {
                    1.0 / l
                }
            }
            PsdFn::Pow(p) => l.powf(p),
            PsdFn::InvSqrtPinv => {
                if l <= kernel_cut {
                    0.0
                } else {
                    1.0 / l.sqrt()
                }
            }
        }
    }))
}

/// Spectral radius by normalized repeated squaring in log scale
/// (Gelfand's formula at power 2^40). No eigensolver needed.
pub fn spectral_radius(m: &CMatrix) -> f64 {
    if m.rows() == 0 || !m.is_square() {
        return 0.0;
    }
    let mut b = m.clone();
    let mut t = 0.0_f64;
    let k = 40;
    for _ in 0..k {
        let n = b.frobenius_norm();
        if n < 1e-280 {
            return 0.0;
        }
        let bn = b.scale_re(1.0 / n);
        b = &bn * &bn;
        t = 2.0 * (t + n.ln());
    }
    let n = b.frobenius_norm();
    if n < 1e-280 {
        return 0.0;
    }
    ((t + n.ln()) / f64::powi(2.0, k)).exp()
}

/// Solves X = S X S* + R (equivalently X = Σ_{n≥0} Sⁿ R S*ⁿ) by doubling.
/// Requires spectral radius of S strictly below 1 − tol_sr.
pub fn stein_solve(s: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    let n = s.require_square()?;
    if r.rows() != n || r.cols() != n {
        return Err(Error::dim(format!("stein_solve: R is {}x{}, S is {}x{}", r.rows(), r.cols(), n, n)));
    }
    let radius = spectral_radius(s);
    if radius >= 1.0 - TOL_SR {
        return Err(Error::SpectralRadiusAtOne { radius, margin: TOL_SR });
    }
    Ok(stein_series(s, r))
}

/// Doubling summation of Σ Sⁿ R S*ⁿ without the radius precondition;
/// callers must know the series converges.
pub(crate) fn stein_series(s: &CMatrix, r: &CMatrix) -> CMatrix {
    let mut x = r.clone();
    let mut p = s.clone();
    for _ in 0..128 {
        let inc = &(&p * &x) * &p.adjoint();
        let inc_norm = inc.frobenius_norm();
        x = &x + &inc;
        if inc_norm <= 1e-16 * x.frobenius_norm().max(1.0) {
            break;
        }
        p = &p * &p;
    }
    x
}

/// R_t solving R′ = A + G R + R G*, R_0 = 0, via the exponential of the
/// augmented generator on the column-stacked system:
/// d/dt [vec R; 1] = [[I⊗G + conj(G)⊗I, vec A], [0, 0]] [vec R; 1].
pub fn lyapunov_accumulate(g: &CMatrix, a: &CMatrix, t: f64) -> Result<CMatrix> {
    let n = g.require_square()?;
    if a.rows() != n || a.cols() != n {
        return Err(Error::dim(format!("lyapunov_accumulate: A is {}x{}, G is {}x{}", a.rows(), a.cols(), n, n)));
    }
    let id = CMatrix::identity(n);
    let l = &id.kron(g) + &g.conj().kron(&id);
    let nn = n * n;
    let mut aug = CMatrix::zeros(nn + 1, nn + 1);
    aug.set_block(0, 0, &l);
    let va = a.vec();
    for i in 0..nn {
        aug[(i, nn)] = va[i];
    }
    let e = expm(&aug.scale_re(t))?;
    let col: Vec<Complex64> = (0..nn).map(|i| e[(i, nn)]).collect();
    Ok(CMatrix::unvec(&col, n, n))
}

/// Determinant by LU with partial pivoting. Intended for the small matrices
/// of the moment formula.
pub fn determinant(m: &CMatrix) -> Result<Complex64> {
    let n = m.require_square()?;
    if n == 0 {
        return Ok(cr(1.0));
    }
    let mut a = m.clone();
    let mut det = cr(1.0);
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if a[(row, col)].norm() > a[(piv, col)].norm() {
                piv = row;
            }
        }
        if a[(piv, col)].norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if piv != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
            det = -det;
        }
        det *= a[(col, col)];
        for row in (col + 1)..n {
            let f = a[(row, col)] / a[(col, col)];
            for j in col..n {
                let sub = f * a[(col, j)];
                a[(row, j)] -= sub;
            }
        }
    }
    Ok(det)
}

/// Singular values, descending, via the Hermitian eigenvalues of M*M.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mm = &m.adjoint() * m;
    let eig = hermitian_eig(&mm).expect("M*M is Hermitian by construction");
    let mut sv: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    sv.reverse();
    sv
}

pub fn op_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    singular_values(m).iter().sum()
}

/// Orthonormal basis (columns) of the kernel of M, detected relative to the
/// largest singular value.
pub fn nullspace(m: &CMatrix) -> CMatrix {
    let mm = &m.adjoint() * m;
    let eig = hermitian_eig(&mm).expect("M*M is Hermitian by construction");
    let lam_max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let cut = KERNEL_TOL * lam_max.max(1e-300);
    let idx: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i] <= cut).collect();
    let n = m.cols();
    let mut out = CMatrix::zeros(n, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        for row in 0..n {
            out[(row, j)] = eig.vectors[(row, i)];
        }
    }
    out
}

/// Unitary polar factor and PSD modulus: M = U·|M|. If M has a kernel, U is
/// completed by pairing the kernel bases of |M| and |M*| in eigen-order.
pub fn polar(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = m.require_square()?;
    let p = psd_function(&(&m.adjoint() * m), PsdFn::Sqrt)?;
    let u0 = m * &psd_function(&p, PsdFn::Pinv)?;
    let ker_right = nullspace(m);
    let ker_left = nullspace(&m.adjoint());
    if ker_right.cols() != ker_left.cols() {
        return Err(Error::NotUnitary { residual: f64::INFINITY });
    }
    let u = &u0 + &(&ker_left * &ker_right.adjoint());
    let res = (&(&u.adjoint() * &u) - &CMatrix::identity(n)).frobenius_norm();
    if res > 1e-8 {
        return Err(Error::NotUnitary { residual: res });
    }
    Ok((u, p))
}

/// Cholesky factor L with L L* = M, or None if a pivot is non-positive.
pub fn cholesky(m: &CMatrix) -> Option<CMatrix> {
    let n = m.require_square().ok()?;
    let mut l = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            if i == j {
                if s.re <= 0.0 || s.im.abs() > 1e-8 * s.re.abs().max(1e-300) {
                    return None;
                }
                l[(i, j)] = cr(s.re.sqrt());
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Hermitian PSD test within tolerance: first a shifted Cholesky (cheap),
/// falling back to the minimum eigenvalue.
pub fn is_psd_within(m: &CMatrix, tol: f64) -> bool {
    if !m.is_square() || m.hermitian_residual() > tol * m.frobenius_norm().max(1.0) {
        return false;
    }
    let herm = CMatrix::from_fn(m.rows(), m.cols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * cr(0.5));
    let shift = tol * herm.frobenius_norm().max(1.0);
    let mut shifted = herm.clone();
    for i in 0..herm.rows() {
        shifted[(i, i)] += cr(shift);
    }
    if cholesky(&shifted).is_some() {
        return true;
    }
    match hermitian_eig(&herm) {
        Ok(e) => e.values.first().copied().unwrap_or(0.0) >= -tol * e.values.last().copied().unwrap_or(0.0).abs().max(1.0),
        Err(_) => false,
    }
}

/// Minimum eigenvalue of the Hermitian part (witness for PSD violations).
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let herm = CMatrix::from_fn(m.rows(), m.cols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * cr(0.5));
    hermitian_eig(&herm).map(|e| e.values.first().copied().unwrap_or(0.0)).unwrap_or(f64::NEG_INFINITY)
}

/// Loewner order test A ≤ B within tol·max(1, ‖B−A‖_F).
pub fn loewner_leq(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    is_psd_within(&(b - a), tol)
}

/// Modified Gram–Schmidt on the columns; returns an n×k matrix with
/// orthonormal columns, dropping columns below the tolerance.
pub fn orthonormalize(cols: &CMatrix, tol: f64) -> CMatrix {
    let n = cols.rows();
    let mut kept: Vec<Vec<Complex64>> = Vec::new();
    for j in 0..cols.cols() {
        let mut v = cols.column(j);
        for _pass in 0..2 {
            for u in &kept {
                let ip: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= ip * ui;
                }
            }
        }
        let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nrm > tol {
            for x in &mut v {
                *x /= cr(nrm);
            }
            kept.push(v);
        }
    }
    let mut out = CMatrix::zeros(n, kept.len());
    for (j, v) in kept.iter().enumerate() {
        out.set_column(j, v);
    }
    out
}

/// Extends orthonormal columns to a full unitary by sweeping in the standard
/// basis. Columns of `basis` must already be orthonormal.
pub fn complete_to_unitary(basis: &CMatrix) -> CMatrix {
    let n = basis.rows();
    let mut cols = CMatrix::zeros(n, basis.cols() + n);
    cols.set_block(0, 0, basis);
    for j in 0..n {
        cols[(j, basis.cols() + j)] = cr(1.0);
    }
    let q = orthonormalize(&cols, 1e-8);
    assert_eq!(q.cols(), n, "basis completion failed");
    q
}
