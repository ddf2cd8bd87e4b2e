//! Real scalar fields on the unit torus stored as truncated Fourier series.
//!
//! A field of cutoff `N` keeps the coefficients `φ_k` for `|k|₁ ≤ N` on the
//! square `[-N, N]²` (entries outside the ℓ¹ ball stay zero) and represents
//!
//! ```text
//! φ(x) = Σ_k φ_k exp(2πi k·x),    φ_{-k} = conj(φ_k).
//! ```
//!
//! Every field also carries the size `M` of the physical grid used for
//! pointwise work.

mod io;
mod norms;
mod pairing;
mod transform;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpdeError};

pub use io::{read_container, read_field_file, write_container, write_field_file, write_grid_csv,
    CONTAINER_MAGIC, CONTAINER_VERSION};
pub use norms::{
    aggregate, besov_norm, besov_norm_l2, block_l2_norms, block_sup_norms, dyadic_sobolev_norm,
    h1_norm, holder_norm, holder_norm_sampled, lp_norm, H1_BESOV_LOWER, H1_BESOV_UPPER,
};
pub use pairing::{bump, pair_with_scaled_test, ScaledTest};
pub use transform::{from_grid, from_grid_pair, to_grid, to_grid_pair};

/// Integer wave vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub k1: i64,
    pub k2: i64,
}

impl ModeIndex {
    pub const ZERO: ModeIndex = ModeIndex { k1: 0, k2: 0 };

    pub const fn new(k1: i64, k2: i64) -> Self {
        Self { k1, k2 }
    }

    /// ℓ¹ size `|k1| + |k2|`, used for the cutoff and the annuli.
    pub fn l1(self) -> u64 {
        self.k1.unsigned_abs() + self.k2.unsigned_abs()
    }

    /// Euclidean `k1² + k2²`, used for Laplacian eigenvalues.
    pub fn norm_sq(self) -> u64 {
        (self.k1 * self.k1 + self.k2 * self.k2) as u64
    }

    /// `μ_k = (2π)² ‖k‖²`, the eigenvalue of `-Δ`.
    pub fn eigenvalue(self) -> f64 {
        laplacian_eigenvalue(self.norm_sq())
    }

    pub fn annulus(self) -> u32 {
        annulus_of(self.l1())
    }

    pub fn neg(self) -> Self {
        Self::new(-self.k1, -self.k2)
    }

    /// True for one representative of each pair `{k, -k}` with `k ≠ 0`.
    pub fn is_half_plane(self) -> bool {
        self.k1 > 0 || (self.k1 == 0 && self.k2 > 0)
    }
}

pub fn laplacian_eigenvalue(norm_sq: u64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    two_pi * two_pi * norm_sq as f64
}

/// Index `q` of the dyadic annulus containing modes of ℓ¹ size `l1`:
/// `A_0 = {0}`, `A_q = {2^(q-1) ≤ |k| < 2^q}`.
pub fn annulus_of(l1: u64) -> u32 {
    64 - l1.leading_zeros()
}

/// Largest annulus index met by modes with `|k| ≤ n`.
pub fn max_annulus(n: usize) -> u32 {
    annulus_of(n as u64)
}

/// Smallest power of two strictly above `n_in * degree + n_out`, so that a
/// degree-`degree` pointwise product of fields with cutoff `n_in` is exact
/// on all output modes with `|k| ≤ n_out`.
pub fn dealiased_grid_size(n_in: usize, degree: usize, n_out: usize) -> usize {
    (n_in * degree.max(1) + n_out + 1).next_power_of_two().max(4)
}

/// All mode indices with `|k| ≤ n`, in row-major `(k1, k2)` order.
pub fn modes_in_ball(n: usize) -> impl Iterator<Item = ModeIndex> {
    let n = n as i64;
    (-n..=n).flat_map(move |k1| {
        let r = n - k1.abs();
        (-r..=r).map(move |k2| ModeIndex::new(k1, k2))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    n: usize,
    m: usize,
    coeffs: Vec<Complex64>,
}

impl FourierField {
    pub fn zeros(n: usize, m: usize) -> Result<Self> {
        if m < 2 * n + 1 {
            return Err(SpdeError::Config(format!(
                "grid size {m} cannot resolve cutoff {n} (need at least {})",
                2 * n + 1
            )));
        }
        let side = 2 * n + 1;
        Ok(Self { n, m, coeffs: vec![Complex64::new(0.0, 0.0); side * side] })
    }

    pub fn constant(value: f64, n: usize, m: usize) -> Result<Self> {
        let mut f = Self::zeros(n, m)?;
        f.set(ModeIndex::ZERO, Complex64::new(value, 0.0));
        Ok(f)
    }

    /// Builds a field from `(k, φ_k)` pairs; the conjugate partner of each
    /// entry is filled in.
    pub fn from_modes(n: usize, m: usize, modes: &[(ModeIndex, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(n, m)?;
        for &(k, c) in modes {
            if k.l1() > n as u64 {
                return Err(SpdeError::Precondition(format!(
                    "mode ({}, {}) lies outside the cutoff {n}",
                    k.k1, k.k2
                )));
            }
            f.set(k, c);
        }
        Ok(f)
    }

    /// Independent complex Gaussian coefficients with `E|φ_k|² = variance(k)`,
    /// conjugate-symmetric, real at `k = 0`.
    pub fn random<R: Rng + ?Sized>(
        n: usize,
        m: usize,
        rng: &mut R,
        variance: impl Fn(ModeIndex) -> f64,
    ) -> Result<Self> {
        let mut f = Self::zeros(n, m)?;
        for k in modes_in_ball(n) {
            if k == ModeIndex::ZERO {
                let z: f64 = rng.sample(StandardNormal);
                f.set(k, Complex64::new(variance(k).sqrt() * z, 0.0));
            } else if k.is_half_plane() {
                let s = (0.5 * variance(k)).sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                f.set(k, Complex64::new(s * re, s * im));
            }
        }
        Ok(f)
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    pub(crate) fn side(&self) -> usize {
        2 * self.n + 1
    }

    pub(crate) fn slot(&self, k: ModeIndex) -> Option<usize> {
        let n = self.n as i64;
        if k.l1() > self.n as u64 {
            return None;
        }
        Some(((k.k1 + n) as usize) * self.side() + (k.k2 + n) as usize)
    }

    /// Coefficient `φ_k`; zero outside the cutoff.
    pub fn coeff(&self, k: ModeIndex) -> Complex64 {
        self.slot(k).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Sets `φ_k = c` and `φ_{-k} = conj(c)`; at `k = 0` only the real part
    /// is kept. Modes outside the cutoff are ignored.
    pub fn set(&mut self, k: ModeIndex, c: Complex64) {
        if k == ModeIndex::ZERO {
            if let Some(i) = self.slot(k) {
                self.coeffs[i] = Complex64::new(c.re, 0.0);
            }
            return;
        }
        if let (Some(i), Some(j)) = (self.slot(k), self.slot(k.neg())) {
            self.coeffs[i] = c;
            self.coeffs[j] = c.conj();
        }
    }

    /// Raw square storage, row-major in `(k1 + N, k2 + N)`.
    pub fn raw(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> {
        modes_in_ball(self.n)
    }

    /// Mean value `φ_0`.
    pub fn mean(&self) -> f64 {
        self.coeff(ModeIndex::ZERO).re
    }

    /// `‖φ‖²_{L²} = Σ |φ_k|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Largest `|φ_k - conj(φ_{-k})|` over stored modes.
    pub fn reality_defect(&self) -> f64 {
        self.modes()
            .map(|k| (self.coeff(k) - self.coeff(k.neg()).conj()).norm())
            .chain(std::iter::once(self.coeff(ModeIndex::ZERO).im.abs()))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn to_grid(&self) -> Vec<f64> {
        to_grid(self)
    }

    /// Littlewood–Paley block `δ_q φ`.
    pub fn annulus_project(&self, q: u32) -> FourierField {
        let mut out = FourierField { n: self.n, m: self.m, coeffs: vec![Complex64::new(0.0, 0.0); self.coeffs.len()] };
        for k in self.modes() {
            if k.annulus() == q {
                let i = self.slot(k).expect("mode in ball");
                out.coeffs[i] = self.coeffs[i];
            }
        }
        out
    }

    /// Galerkin projection onto `|k| ≤ n_new`, keeping storage size.
    pub fn galerkin_project(&self, n_new: usize) -> FourierField {
        let mut out = self.clone();
        for k in self.modes() {
            if k.l1() > n_new as u64 {
                let i = self.slot(k).expect("mode in ball");
                out.coeffs[i] = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Copies the coefficients into a field with cutoff `n_new` and grid
    /// size `m_new`, dropping modes beyond the new cutoff.
    pub fn resized(&self, n_new: usize, m_new: usize) -> Result<FourierField> {
        let mut out = FourierField::zeros(n_new, m_new)?;
        for k in modes_in_ball(n_new.min(self.n)) {
            let i = out.slot(k).expect("mode in ball");
            out.coeffs[i] = self.coeff(k);
        }
        Ok(out)
    }

    pub fn with_grid_size(&self, m_new: usize) -> Result<FourierField> {
        if m_new < self.side() {
            return Err(SpdeError::Config(format!(
                "grid size {m_new} cannot resolve cutoff {}",
                self.n
            )));
        }
        Ok(FourierField { n: self.n, m: m_new, coeffs: self.coeffs.clone() })
    }

    fn check_layout(&self, other: &FourierField) {
        assert_eq!(self.n, other.n, "cutoff mismatch");
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &FourierField) {
        self.check_layout(other);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }

    pub fn scaled(&self, s: f64) -> FourierField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add(&self, other: &FourierField) -> FourierField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &FourierField) -> FourierField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// True when every non-zero mode vanishes.
    pub fn is_spatially_constant(&self) -> bool {
        let zero = self.slot(ModeIndex::ZERO).expect("zero mode");
        self.coeffs.iter().enumerate().all(|(i, c)| i == zero || (c.re == 0.0 && c.im == 0.0))
    }
}
