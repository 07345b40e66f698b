//! Named numerical tolerances. Every threshold used by the library lives here
//! so the CLI can override them by name.

use std::collections::BTreeMap;

/// Hermiticity acceptance: ‖M − M*‖_F ≤ tol_herm · max(1, ‖M‖_F).
pub const TOL_HERM: f64 = 1e-10;
/// PSD acceptance: eigenvalues ≥ −tol_psd · max(1, λ_max) are clamped to 0.
pub const TOL_PSD: f64 = 1e-10;
/// Relative kernel cut for pseudo-inverses: λ ≤ kernel_tol · λ_max is kernel.
pub const KERNEL_TOL: f64 = 1e-9;
/// Margin below 1 required of the spectral radius before a Stein solve.
pub const TOL_SR: f64 = 1e-8;
/// Jacobi sweep convergence: off-diagonal Frobenius norm ≤ jacobi_off · ‖M‖_F.
pub const JACOBI_OFF: f64 = 1e-13;
/// Matrix exponential scaling target: ‖M / 2^k‖_F ≤ expm_scale.
pub const EXPM_SCALE: f64 = 0.5;
/// Stabilization threshold for lim Sⁿ detection.
pub const POWER_CONV_TOL: f64 = 1e-11;
/// Maximum repeated squarings when hunting lim Sⁿ.
pub const POWER_MAX_SQUARINGS: usize = 200;
/// Largest supported mode count (operator space dimension 2^N).
pub const MAX_MODES: usize = 10;
/// Mode count ceiling for dense superoperator paths (dimension 4^N).
pub const MAX_DENSE_SUPEROP_MODES: usize = 4;
/// Coherent coefficient c in the dual generator term c·i[K̂, X].
/// Calibrated against the finite-difference generator; the calibration test
/// asserts this is the unique consistent value in {−1, −½, ½, 1}.
pub const COHERENT_COEFF: f64 = -1.0;

/// Runtime-overridable tolerance table keyed by the names above.
#[derive(Debug, Clone)]
pub struct Tolerances {
    values: BTreeMap<String, f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        let mut values = BTreeMap::new();
        values.insert("tol_herm".into(), TOL_HERM);
        values.insert("tol_psd".into(), TOL_PSD);
        values.insert("kernel_tol".into(), KERNEL_TOL);
        values.insert("tol_sr".into(), TOL_SR);
        values.insert("jacobi_off".into(), JACOBI_OFF);
        values.insert("expm_scale".into(), EXPM_SCALE);
        values.insert("power_conv_tol".into(), POWER_CONV_TOL);
        Tolerances { values }
    }
}

impl Tolerances {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    /// Sets an override. Returns false for unknown names so callers can
    /// reject typos instead of silently ignoring them.
    pub fn set(&mut self, name: &str, value: f64) -> bool {
        if self.values.contains_key(name) {
            self.values.insert(name.to_string(), value);
            true
        } else {
            false
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }
}
