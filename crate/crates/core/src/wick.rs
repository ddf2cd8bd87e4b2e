//! Hermite polynomials with a variance parameter and Wick powers.
//!
//! `H_m(x; C)` is defined by `H_0 = 1`, `H_1 = x` and
//! `H_{m+1} = x H_m - m C H_{m-1}`, so that `H_m(X; C)` is the `m`-th Wick
//! power of a centred Gaussian `X` with variance `C`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SpdeError};
use crate::field::{
    from_grid, from_grid_pair, laplacian_eigenvalue, max_annulus, modes_in_ball, to_grid,
    to_grid_pair, FourierField, ModeIndex,
};
use crate::stats::{Estimate, Moments};

pub fn hermite(m: usize, x: f64, c: f64) -> f64 {
    match m {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for j in 1..m {
                let next = x * cur - j as f64 * c * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Fills `out[j] = H_j(x; c)` for `j < out.len()`.
pub fn hermite_all(x: f64, c: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for j in 2..out.len() {
        out[j] = x * out[j - 1] - (j - 1) as f64 * c * out[j - 2];
    }
}

/// Coefficients of the two changes of basis between monomials and Hermite
/// polynomials of degree `n`:
///
/// ```text
/// H_n(x; C) = Σ_ℓ a_ℓ C^ℓ x^{n-2ℓ},     x^n = Σ_ℓ b_ℓ C^ℓ H_{n-2ℓ}(x; C),
/// a_ℓ = (-1)^ℓ n! / (2^ℓ ℓ! (n-2ℓ)!),    b_ℓ = |a_ℓ|.
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HermiteCoeffs {
    pub degree: usize,
    pub a: Vec<i64>,
    pub b: Vec<i64>,
}

fn capacity(n: usize) -> SpdeError {
    SpdeError::Capacity(format!("Hermite coefficients of degree {n} exceed 64-bit integers"))
}

fn binomial(n: u64, k: u64) -> Option<i64> {
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
        if acc > i64::MAX as i128 {
            return None;
        }
    }
    Some(acc as i64)
}

/// `n! / (2^ℓ ℓ! (n-2ℓ)!) = C(n, 2ℓ) (2ℓ-1)!!`.
fn pairing_count(n: usize, l: usize) -> Option<i64> {
    let mut double_fact: i64 = 1;
    for j in (1..2 * l as i64).step_by(2) {
        double_fact = double_fact.checked_mul(j)?;
    }
    binomial(n as u64, 2 * l as u64)?.checked_mul(double_fact)
}

pub fn hermite_coeffs(n: usize) -> Result<HermiteCoeffs> {
    let mut a = Vec::with_capacity(n / 2 + 1);
    let mut b = Vec::with_capacity(n / 2 + 1);
    for l in 0..=n / 2 {
        let v = pairing_count(n, l).ok_or_else(|| capacity(n))?;
        b.push(v);
        a.push(if l % 2 == 0 { v } else { -v });
    }
    Ok(HermiteCoeffs { degree: n, a, b })
}

impl HermiteCoeffs {
    /// Expanded evaluation `Σ_ℓ a_ℓ C^ℓ x^{n-2ℓ}`, returned together with
    /// `Σ_ℓ |a_ℓ C^ℓ x^{n-2ℓ}|` as a scale for relative comparisons.
    pub fn eval(&self, x: f64, c: f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut scale = 0.0;
        for (l, &al) in self.a.iter().enumerate() {
            let term = al as f64 * c.powi(l as i32) * x.powi((self.degree - 2 * l) as i32);
            value += term;
            scale += term.abs();
        }
        (value, scale)
    }
}

/// Rewrites `Σ_j p_j x^j` as `Σ_j h_j H_j(x; 1)`, exactly.
pub fn monomial_to_hermite(p: &[i64]) -> Result<Vec<i64>> {
    let mut h = vec![0i64; p.len()];
    for (j, &pj) in p.iter().enumerate() {
        if pj == 0 {
            continue;
        }
        let coeffs = hermite_coeffs(j)?;
        for (l, &bl) in coeffs.b.iter().enumerate() {
            let add = pj.checked_mul(bl).ok_or_else(|| capacity(j))?;
            h[j - 2 * l] = h[j - 2 * l].checked_add(add).ok_or_else(|| capacity(j))?;
        }
    }
    Ok(h)
}

/// Rewrites `Σ_j h_j H_j(x; 1)` as `Σ_j p_j x^j`, exactly.
pub fn hermite_to_monomial(h: &[i64]) -> Result<Vec<i64>> {
    let mut p = vec![0i64; h.len()];
    for (j, &hj) in h.iter().enumerate() {
        if hj == 0 {
            continue;
        }
        let coeffs = hermite_coeffs(j)?;
        for (l, &al) in coeffs.a.iter().enumerate() {
            let add = hj.checked_mul(al).ok_or_else(|| capacity(j))?;
            p[j - 2 * l] = p[j - 2 * l].checked_add(add).ok_or_else(|| capacity(j))?;
        }
    }
    Ok(p)
}

/// Truncated generating function `Σ_{n ≤ order} tⁿ/n! H_n(x; C)`, which
/// approximates `exp(tx - Ct²/2)`.
pub fn hermite_generating_sum(t: f64, x: f64, c: f64, order: usize) -> f64 {
    let mut h = vec![0.0; order + 1];
    hermite_all(x, c, &mut h);
    let mut sum = 0.0;
    let mut factor = 1.0;
    for (n, hn) in h.iter().enumerate() {
        if n > 0 {
            factor *= t / n as f64;
        }
        sum += factor * hn;
    }
    sum
}

/// Right-hand side of
/// `H_n(x + y; C1 + C2) = Σ_m C(n, m) H_m(x; C1) H_{n-m}(y; C2)`.
pub fn wick_binomial(n: usize, x: f64, y: f64, c1: f64, c2: f64) -> f64 {
    let mut hx = vec![0.0; n + 1];
    let mut hy = vec![0.0; n + 1];
    hermite_all(x, c1, &mut hx);
    hermite_all(y, c2, &mut hy);
    let mut binom = 1.0;
    let mut sum = 0.0;
    for m in 0..=n {
        sum += binom * hx[m] * hy[n - m];
        binom = binom * (n - m) as f64 / (m + 1) as f64;
    }
    sum
}

/// `v_k = σ² / (2(μ_k + 1))`, the stationary variance `E|ψ_k|²`.
pub fn stationary_variance(sigma: f64, k: ModeIndex) -> f64 {
    sigma * sigma / (2.0 * (k.eigenvalue() + 1.0))
}

/// The renormalisation constant `C_N = Σ_{|k|≤N} v_k` with its per-annulus
/// split `c_q = Σ_{k∈A_q} v_k`. The total is the sum of the annulus table, so
/// `Σ_q c_q = C_N` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormConstant {
    pub cutoff: usize,
    pub sigma: f64,
    pub value: f64,
    pub annulus: Vec<f64>,
}

impl RenormConstant {
    pub fn new(cutoff: usize, sigma: f64) -> Self {
        let q_max = max_annulus(cutoff) as usize;
        // Compensated sums per annulus; N = 4096 has ~3·10⁷ modes.
        let mut sum = vec![0.0f64; q_max + 1];
        let mut comp = vec![0.0f64; q_max + 1];
        let s2 = sigma * sigma;
        let n = cutoff as i64;
        for k1 in -n..=n {
            let r = n - k1.abs();
            for k2 in -r..=r {
                let l1 = (k1.abs() + k2.abs()) as u64;
                let q = crate::field::annulus_of(l1) as usize;
                let v = s2 / (2.0 * (laplacian_eigenvalue((k1 * k1 + k2 * k2) as u64) + 1.0));
                let t = sum[q] + v;
                if sum[q].abs() >= v.abs() {
                    comp[q] += (sum[q] - t) + v;
                } else {
                    comp[q] += (v - t) + sum[q];
                }
                sum[q] = t;
            }
        }
        let annulus: Vec<f64> = sum.iter().zip(&comp).map(|(s, c)| s + c).collect();
        let value = annulus.iter().sum();
        Self { cutoff, sigma, value, annulus }
    }

    pub fn mode_variance(&self, k: ModeIndex) -> f64 {
        stationary_variance(self.sigma, k)
    }

    /// CSV with columns `k1,k2,mu_k,v_k`.
    pub fn write_mode_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k1,k2,mu_k,v_k")?;
        for k in modes_in_ball(self.cutoff) {
            writeln!(w, "{},{},{:e},{:e}", k.k1, k.k2, k.eigenvalue(), self.mode_variance(k))?;
        }
        Ok(())
    }

    /// CSV with columns `q,c_q`.
    pub fn write_annulus_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "q,c_q")?;
        for (q, c) in self.annulus.iter().enumerate() {
            writeln!(w, "{q},{c:e}")?;
        }
        Ok(())
    }
}

/// Smallest grid size for which a degree-`m` pointwise map of a field with
/// cutoff `n` is alias-free on `|k| ≤ n`.
fn check_degree(field: &FourierField, m: usize) -> Result<()> {
    let need = m * field.cutoff() + field.cutoff() + 1;
    if m > 1 && field.grid_size() < need {
        return Err(SpdeError::Config(format!(
            "grid size {} too small for degree {m} at cutoff {} (need at least {need})",
            field.grid_size(),
            field.cutoff()
        )));
    }
    Ok(())
}

/// `:φ^m: = H_m(φ; C)` evaluated on the grid and truncated to the field's
/// cutoff.
pub fn wick_power_field(field: &FourierField, m: usize, c: f64) -> Result<FourierField> {
    check_degree(field, m)?;
    if m == 1 {
        return Ok(field.clone());
    }
    let grid = to_grid(field);
    let values: Vec<f64> = grid.iter().map(|&x| hermite(m, x, c)).collect();
    Ok(from_grid(&values, field.cutoff(), field.grid_size()))
}

/// `[:φ:, :φ²:, …, :φ^{m_max}:]` sharing one synthesis and pairing the
/// analysis transforms.
pub fn wick_powers_field(field: &FourierField, m_max: usize, c: f64) -> Result<Vec<FourierField>> {
    check_degree(field, m_max)?;
    let (n, m) = (field.cutoff(), field.grid_size());
    let grid = to_grid(field);
    let mut out = vec![field.clone()];
    let mut h = vec![0.0; m_max + 1];
    let mut powers: Vec<Vec<f64>> = vec![vec![0.0; grid.len()]; m_max + 1];
    for (i, &x) in grid.iter().enumerate() {
        hermite_all(x, c, &mut h);
        for j in 2..=m_max {
            powers[j][i] = h[j];
        }
    }
    let mut j = 2;
    while j <= m_max {
        if j < m_max {
            let (a, b) = from_grid_pair(&powers[j], &powers[j + 1], n, m);
            out.push(a);
            out.push(b);
            j += 2;
        } else {
            out.push(from_grid(&powers[j], n, m));
            j += 1;
        }
    }
    Ok(out)
}

/// All multi-indices `(n_0, …, n_{len-1})` with `Σ n_q = m`.
pub fn compositions(m: usize, len: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, len: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == len {
            prefix.push(m);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for j in 0..=m {
            prefix.push(j);
            rec(m - j, len, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if len == 0 {
        return out;
    }
    rec(m, len, &mut Vec::with_capacity(len), &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|j| j as f64).product()
}

/// `:φ^m:` as the multinomial sum over annulus blocks,
/// `Σ_{|n|=m} m!/n! Π_q H_{n_q}(δ_q φ; c_q)`.
pub fn wick_multinomial_blocks(
    field: &FourierField,
    m: usize,
    annulus_variances: &[f64],
    total_variance: f64,
) -> Result<FourierField> {
    check_degree(field, m)?;
    let blocks = max_annulus(field.cutoff()) as usize + 1;
    if annulus_variances.len() < blocks {
        return Err(SpdeError::Precondition(format!(
            "variance table has {} annuli, field needs {blocks}",
            annulus_variances.len()
        )));
    }
    let table_sum: f64 = annulus_variances.iter().sum();
    if (table_sum - total_variance).abs() > 1e-12 * total_variance.abs().max(1.0) {
        return Err(SpdeError::Precondition(format!(
            "annulus variances sum to {table_sum}, expected {total_variance}"
        )));
    }
    let size = field.grid_size() * field.grid_size();
    let mut block_grids: Vec<Vec<f64>> = Vec::with_capacity(blocks);
    let mut q = 0;
    while q < blocks {
        if q + 1 < blocks {
            let (a, b) = to_grid_pair(&field.annulus_project(q as u32), &field.annulus_project(q as u32 + 1));
            block_grids.push(a);
            block_grids.push(b);
            q += 2;
        } else {
            block_grids.push(to_grid(&field.annulus_project(q as u32)));
            q += 1;
        }
    }
    let terms: Vec<(f64, Vec<usize>)> = compositions(m, blocks)
        .into_iter()
        .map(|nq| {
            let denom: f64 = nq.iter().map(|&j| factorial(j)).product();
            (factorial(m) / denom, nq)
        })
        .collect();
    let mut h = vec![vec![0.0; m + 1]; blocks];
    let mut values = vec![0.0; size];
    for (i, v) in values.iter_mut().enumerate() {
        for q in 0..blocks {
            hermite_all(block_grids[q][i], annulus_variances[q], &mut h[q]);
        }
        *v = terms
            .iter()
            .map(|(w, nq)| w * nq.iter().enumerate().map(|(q, &j)| h[q][j]).product::<f64>())
            .sum();
    }
    Ok(from_grid(&values, field.cutoff(), field.grid_size()))
}

/// Monte Carlo estimate of `E[H_n(X; C1) H_m(Y; C2)]` for centred jointly
/// Gaussian `(X, Y)` with variances `(C1, C2)` and covariance `corr`.
pub fn wick_moment_mc<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    corr: f64,
    c1: f64,
    c2: f64,
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if samples < 10_000 {
        return Err(SpdeError::Precondition(format!("need at least 10^4 samples, got {samples}")));
    }
    if !(c1 >= 0.0 && c2 >= 0.0) || corr * corr > c1 * c2 * (1.0 + 1e-12) {
        return Err(SpdeError::Precondition(format!(
            "invalid covariance: C1 = {c1}, C2 = {c2}, corr = {corr}"
        )));
    }
    let (a, b) = if c1 > 0.0 {
        (corr / c1.sqrt(), (c2 - corr * corr / c1).max(0.0).sqrt())
    } else {
        (0.0, c2.sqrt())
    };
    let s1 = c1.sqrt();
    let mut acc = Moments::default();
    for _ in 0..samples {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let x = s1 * z1;
        let y = a * z1 + b * z2;
        acc.push(hermite(n, x, c1) * hermite(m, y, c2));
    }
    Ok(acc.estimate())
}
