//! Grid transforms.
//!
//! Grid values are row-major, `values[i * M + j] = φ(i / M, j / M)`. A mode
//! `k` sits at FFT index `(k1 mod M, k2 mod M)`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{modes_in_ball, FourierField};

struct Plan {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Plan {
    fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            m,
            fwd,
            inv,
            buf: vec![Complex64::new(0.0, 0.0); m * m],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    fn transpose(&mut self) {
        let m = self.m;
        for i in 0..m {
            for j in (i + 1)..m {
                self.buf.swap(i * m + j, j * m + i);
            }
        }
    }

    fn clear(&mut self) {
        self.buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
    }

    fn row_index(&self, k: i64) -> usize {
        k.rem_euclid(self.m as i64) as usize
    }

    /// Scatters `field` (optionally `+ i·second`) into the buffer and runs
    /// the inverse transform. Afterwards `buf[j * M + i]` holds the value at
    /// `(i / M, j / M)`.
    fn synthesise(&mut self, field: &FourierField, second: Option<&FourierField>) {
        let m = self.m;
        let n = field.cutoff() as i64;
        self.clear();
        for k in modes_in_ball(field.cutoff()) {
            let mut c = field.coeff(k);
            if let Some(g) = second {
                c += Complex64::new(0.0, 1.0) * g.coeff(k);
            }
            let (a, b) = (self.row_index(k.k1), self.row_index(k.k2));
            self.buf[a * m + b] = c;
        }
        // Only rows with |k1| <= N carry data before the first pass.
        for k1 in -n..=n {
            let a = self.row_index(k1);
            self.inv
                .process_with_scratch(&mut self.buf[a * m..(a + 1) * m], &mut self.scratch);
        }
        self.transpose();
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    /// Forward transform of the buffer (grid layout `buf[i * M + j]`). After
    /// the call `buf[b * M + a]` holds `M² · Z_k` for `(a, b) = (k1, k2) mod M`,
    /// valid for every `k2` with `|k2| <= n`.
    fn analyse(&mut self, n: usize) {
        let m = self.m;
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        self.transpose();
        for k2 in -(n as i64)..=(n as i64) {
            let b = self.row_index(k2);
            self.fwd
                .process_with_scratch(&mut self.buf[b * m..(b + 1) * m], &mut self.scratch);
        }
    }

    fn spectral(&self, k1: i64, k2: i64) -> Complex64 {
        let (a, b) = (self.row_index(k1), self.row_index(k2));
        self.buf[b * self.m + a]
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Plan>> = RefCell::new(HashMap::new());
}

fn with_plan<R>(m: usize, f: impl FnOnce(&mut Plan) -> R) -> R {
    PLANS.with(|cell| {
        let mut plans = cell.borrow_mut();
        let plan = plans.entry(m).or_insert_with(|| Plan::new(m));
        f(plan)
    })
}

/// Values of `field` on its `M × M` grid.
pub fn to_grid(field: &FourierField) -> Vec<f64> {
    let m = field.grid_size();
    with_plan(m, |plan| {
        plan.synthesise(field, None);
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = plan.buf[j * m + i].re;
            }
        }
        out
    })
}

/// Grid values of two fields with one complex transform.
pub fn to_grid_pair(a: &FourierField, b: &FourierField) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.grid_size(), b.grid_size(), "grid size mismatch");
    assert_eq!(a.cutoff(), b.cutoff(), "cutoff mismatch");
    let m = a.grid_size();
    with_plan(m, |plan| {
        plan.synthesise(a, Some(b));
        let mut u = vec![0.0; m * m];
        let mut v = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let z = plan.buf[j * m + i];
                u[i * m + j] = z.re;
                v[i * m + j] = z.im;
            }
        }
        (u, v)
    })
}

/// Fourier coefficients of real grid values, truncated to `|k| ≤ n` and
/// symmetrised so that the result is exactly real.
///
/// Panics if `values.len()` is not `m²` or if `m < 2n + 1`.
pub fn from_grid(values: &[f64], n: usize, m: usize) -> FourierField {
    assert_eq!(values.len(), m * m, "grid has wrong size");
    let mut out = FourierField::zeros(n, m).expect("grid resolves cutoff");
    with_plan(m, |plan| {
        for (z, &v) in plan.buf.iter_mut().zip(values) {
            *z = Complex64::new(v, 0.0);
        }
        plan.analyse(n);
        let scale = 1.0 / (m * m) as f64;
        for k in modes_in_ball(n) {
            let z = plan.spectral(k.k1, k.k2);
            let zc = plan.spectral(-k.k1, -k.k2).conj();
            let i = out.slot(k).expect("mode in ball");
            out.raw_mut()[i] = (z + zc) * (0.5 * scale);
        }
    });
    out
}

/// Two real grids transformed together: returns the coefficients of `u` and
/// of `v`, each truncated to `|k| ≤ n`.
pub fn from_grid_pair(u: &[f64], v: &[f64], n: usize, m: usize) -> (FourierField, FourierField) {
    assert_eq!(u.len(), m * m, "grid has wrong size");
    assert_eq!(v.len(), m * m, "grid has wrong size");
    let mut fa = FourierField::zeros(n, m).expect("grid resolves cutoff");
    let mut fb = FourierField::zeros(n, m).expect("grid resolves cutoff");
    with_plan(m, |plan| {
        for ((z, &a), &b) in plan.buf.iter_mut().zip(u).zip(v) {
            *z = Complex64::new(a, b);
        }
        plan.analyse(n);
        let scale = 1.0 / (m * m) as f64;
        let half_i = Complex64::new(0.0, -0.5 * scale);
        for k in modes_in_ball(n) {
            let z = plan.spectral(k.k1, k.k2);
            let zc = plan.spectral(-k.k1, -k.k2).conj();
            let i = fa.slot(k).expect("mode in ball");
            fa.raw_mut()[i] = (z + zc) * (0.5 * scale);
            fb.raw_mut()[i] = (z - zc) * half_i;
        }
    });
    (fa, fb)
}
