//! Second moments of products of block Wick powers.
//!
//! For a multi-index `n = (n_q)` over annuli, let
//! `X = Π_q :(δ_q ψ)^{n_q}:` with `δ_q ψ` Wick-ordered at variance `c_q`.
//! Pairing the Gaussian factors gives the exact sum
//!
//! ```text
//! E‖δ_{q0} X‖²_{L²} = n! Σ Π_i v_{k_i},
//! ```
//!
//! over tuples `(k_1, …, k_m)` with `n_q` entries in each `A_q` and
//! `k_1 + … + k_m ∈ A_{q0}`.

use rand::Rng;

use crate::error::{Result, SpdeError};
use crate::field::{
    annulus_of, dealiased_grid_size, from_grid_pair, from_grid, max_annulus, modes_in_ball,
    to_grid, to_grid_pair, FourierField, ModeIndex,
};
use crate::parallel::Ensemble;
use crate::stats::{Estimate, Moments};
use crate::wick::{hermite_all, stationary_variance};

pub const ORACLE_MAX_CUTOFF: usize = 8;
pub const ORACLE_MAX_DEGREE: usize = 3;

fn check_budget(hbn: &[usize], cutoff: usize) -> Result<usize> {
    let m: usize = hbn.iter().sum();
    if cutoff > ORACLE_MAX_CUTOFF || m > ORACLE_MAX_DEGREE {
        return Err(SpdeError::Capacity(format!(
            "enumeration budget is N <= {ORACLE_MAX_CUTOFF}, m <= {ORACLE_MAX_DEGREE} (got N = {cutoff}, m = {m})"
        )));
    }
    if hbn.len() > max_annulus(cutoff) as usize + 1 && hbn[max_annulus(cutoff) as usize + 1..].iter().any(|&n| n > 0) {
        return Err(SpdeError::Precondition("multi-index charges annuli beyond the cutoff".into()));
    }
    Ok(m)
}

/// Exact values for every output annulus `q0 = 0..=annulus(mN)`.
pub fn chaos_expectation_table(
    hbn: &[usize],
    cutoff: usize,
    variance: &dyn Fn(ModeIndex) -> f64,
) -> Result<Vec<f64>> {
    let m = check_budget(hbn, cutoff)?;
    let mut slots: Vec<Vec<(ModeIndex, f64)>> = Vec::with_capacity(m);
    let mut weight = 1.0;
    for (q, &n) in hbn.iter().enumerate() {
        let members: Vec<(ModeIndex, f64)> = modes_in_ball(cutoff)
            .filter(|k| k.annulus() as usize == q)
            .map(|k| (k, variance(k)))
            .collect();
        for j in 1..=n {
            weight *= j as f64;
            slots.push(members.clone());
        }
    }
    let mut buckets = vec![0.0; max_annulus(m * cutoff) as usize + 1];
    fn walk(slots: &[Vec<(ModeIndex, f64)>], depth: usize, s1: i64, s2: i64, prod: f64, buckets: &mut [f64]) {
        if depth == slots.len() {
            buckets[annulus_of(s1.unsigned_abs() + s2.unsigned_abs()) as usize] += prod;
            return;
        }
        for &(k, v) in &slots[depth] {
            walk(slots, depth + 1, s1 + k.k1, s2 + k.k2, prod * v, buckets);
        }
    }
    walk(&slots, 0, 0, 0, 1.0, &mut buckets);
    buckets.iter_mut().for_each(|b| *b *= weight);
    Ok(buckets)
}

/// `E‖δ_{q0} Π_q :(δ_q ψ)^{n_q}:‖²_{L²}` by tuple enumeration.
pub fn chaos_expectation_oracle(
    hbn: &[usize],
    q0: u32,
    cutoff: usize,
    variance: &dyn Fn(ModeIndex) -> f64,
) -> Result<f64> {
    let table = chaos_expectation_table(hbn, cutoff, variance)?;
    Ok(table.get(q0 as usize).copied().unwrap_or(0.0))
}

/// Monte Carlo estimates for a list of multi-indices.
#[derive(Debug, Clone)]
pub struct ChaosTable {
    pub multi_indices: Vec<Vec<usize>>,
    /// `estimates[i][q0]`
    pub estimates: Vec<Vec<Estimate>>,
}

/// Samples the stationary convolution at cutoff `N` and estimates
/// `E‖δ_{q0} Π_q :(δ_q ψ)^{n_q}:‖²` for every multi-index and `q0`. Products
/// are formed on a grid large enough to be exact up to `|k| ≤ mN`.
pub fn chaos_expectation_mc(
    multi_indices: &[Vec<usize>],
    cutoff: usize,
    sigma: f64,
    samples: usize,
    ensemble: &Ensemble,
) -> Result<ChaosTable> {
    let m_max = multi_indices
        .iter()
        .map(|h| check_budget(h, cutoff))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let n_out = m_max * cutoff;
    let grid = dealiased_grid_size(cutoff, 2 * m_max, 0).max(dealiased_grid_size(n_out, 1, n_out));
    let blocks = max_annulus(cutoff) as usize + 1;
    let annulus_var: Vec<f64> = (0..blocks)
        .map(|q| {
            modes_in_ball(cutoff)
                .filter(|k| k.annulus() as usize == q)
                .map(|k| stationary_variance(sigma, k))
                .sum()
        })
        .collect();
    let q_out = max_annulus(n_out) as usize + 1;
    let batches = 64.min(samples.max(1));
    let per = samples.div_ceil(batches);

    let partials = ensemble.map(batches, |b, rng| {
        let count = per.min(samples.saturating_sub(b * per));
        let mut acc = vec![vec![Moments::default(); q_out]; multi_indices.len()];
        for _ in 0..count {
            sample_once(rng, cutoff, grid, sigma, &annulus_var, m_max, n_out, multi_indices, &mut acc);
        }
        acc
    })?;
    let mut total = vec![vec![Moments::default(); q_out]; multi_indices.len()];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            for (a, b) in t.iter_mut().zip(p) {
                a.merge(b);
            }
        }
    }
    Ok(ChaosTable {
        multi_indices: multi_indices.to_vec(),
        estimates: total.into_iter().map(|row| row.iter().map(Moments::estimate).collect()).collect(),
    })
}

#[allow(clippy::too_many_arguments)]
fn sample_once<R: Rng + ?Sized>(
    rng: &mut R,
    cutoff: usize,
    grid: usize,
    sigma: f64,
    annulus_var: &[f64],
    m_max: usize,
    n_out: usize,
    multi_indices: &[Vec<usize>],
    acc: &mut [Vec<Moments>],
) {
    let psi = FourierField::random(cutoff, grid, rng, |k| stationary_variance(sigma, k)).expect("grid");
    let blocks = annulus_var.len();
    let mut block_grids: Vec<Vec<f64>> = Vec::with_capacity(blocks);
    let mut q = 0;
    while q < blocks {
        if q + 1 < blocks {
            let (a, b) = to_grid_pair(&psi.annulus_project(q as u32), &psi.annulus_project(q as u32 + 1));
            block_grids.push(a);
            block_grids.push(b);
            q += 2;
        } else {
            block_grids.push(to_grid(&psi.annulus_project(q as u32)));
            q += 1;
        }
    }
    let size = grid * grid;
    // herm[q][j][i] = H_j(δ_q ψ(x_i); c_q)
    let mut herm = vec![vec![vec![0.0; size]; m_max + 1]; blocks];
    let mut h = vec![0.0; m_max + 1];
    for q in 0..blocks {
        for i in 0..size {
            hermite_all(block_grids[q][i], annulus_var[q], &mut h);
            for j in 0..=m_max {
                herm[q][j][i] = h[j];
            }
        }
    }
    let product = |hbn: &Vec<usize>| -> Vec<f64> {
        let mut out = vec![1.0; size];
        for (q, &n) in hbn.iter().enumerate() {
            if n > 0 {
                for (o, v) in out.iter_mut().zip(&herm[q][n]) {
                    *o *= v;
                }
            }
        }
        out
    };
    let record = |field: &FourierField, row: &mut Vec<Moments>| {
        let mut sums = vec![0.0; row.len()];
        for k in field.modes() {
            sums[k.annulus() as usize] += field.coeff(k).norm_sqr();
        }
        for (m, s) in row.iter_mut().zip(sums) {
            m.push(s);
        }
    };
    let mut i = 0;
    while i < multi_indices.len() {
        if i + 1 < multi_indices.len() {
            let (a, b) = from_grid_pair(&product(&multi_indices[i]), &product(&multi_indices[i + 1]), n_out, grid);
            record(&a, &mut acc[i]);
            record(&b, &mut acc[i + 1]);
            i += 2;
        } else {
            let a = from_grid(&product(&multi_indices[i]), n_out, grid);
            record(&a, &mut acc[i]);
            i += 1;
        }
    }
}
