use std::sync::{Arc, Mutex};

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::{FieldRole, GridField, GridSpec};

/// Discrete log-potential `u_i = sum_j K(i - j) s_j` on a fixed grid, with
/// `K(d) = h^2 log(h |d|)` off the diagonal and the equal-area-disk self
/// integral `h^2 (log a - 1/2)`, `a = h / sqrt(pi)`, on it.
///
/// The convolution is linear (aperiodic) thanks to zero padding to at least
/// twice the grid size in each direction, rounded up to a length with only
/// factors 2, 3 and 5 so the transforms stay fast.
pub struct LogConvolver {
    spec: GridSpec,
    width: usize,
    height: usize,
    /// Complex row length after the real transform.
    half: usize,
    row_fwd: Arc<dyn RealToComplex<f64>>,
    row_inv: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    /// Kernel transform, stored transposed (columns contiguous).
    kernel_hat: Vec<Complex64>,
    work: Mutex<Workspace>,
}

/// Buffers reused across calls.
#[derive(Default)]
struct Workspace {
    real: Vec<f64>,
    spectra: Vec<Complex64>,
    columns: Vec<Complex64>,
    row_scratch: Vec<Complex64>,
    col_scratch: Vec<Complex64>,
}

impl std::fmt::Debug for LogConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogConvolver").field("spec", &self.spec).finish()
    }
}

/// Kernel value for an offset of `(dx, dy)` cells.
pub(crate) fn log_kernel(h: f64, dx: i64, dy: i64) -> f64 {
    let h2 = h * h;
    if dx == 0 && dy == 0 {
        let a = h / std::f64::consts::PI.sqrt();
        h2 * (a.ln() - 0.5)
    } else {
        let r2 = (dx * dx + dy * dy) as f64;
        h2 * (h.ln() + 0.5 * r2.ln())
    }
}

/// Smallest even integer `>= n` with no prime factor above 5.
fn smooth_length(n: usize) -> usize {
    (n.max(2)..)
        .filter(|m| m % 2 == 0)
        .find(|&m| {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .expect("smooth numbers are unbounded")
}

impl LogConvolver {
    pub fn new(spec: GridSpec) -> Self {
        let width = smooth_length(2 * spec.nx);
        let height = smooth_length(2 * spec.ny);
        let half = width / 2 + 1;
        let mut real = RealFftPlanner::<f64>::new();
        let mut planner = FftPlanner::new();
        let mut conv = LogConvolver {
            spec,
            width,
            height,
            half,
            row_fwd: real.plan_fft_forward(width),
            row_inv: real.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
            kernel_hat: Vec::new(),
            work: Mutex::new(Workspace::default()),
        };
        // Offsets between two grid cells lie in (-n, n); the wrapped indices
        // in between never pair two cells and stay zero.
        let offset = |i: usize, n: usize, len: usize| -> Option<i64> {
            if i < n {
                Some(i as i64)
            } else if i > len - n {
                Some(i as i64 - len as i64)
            } else {
                None
            }
        };
        let mut work = Workspace::default();
        work.real = vec![0.0; width * height];
        for y in 0..height {
            let Some(dy) = offset(y, spec.ny, height) else { continue };
            for x in 0..width {
                let Some(dx) = offset(x, spec.nx, width) else { continue };
                work.real[y * width + x] = log_kernel(spec.h, dx, dy);
            }
        }
        conv.forward(&mut work, height);
        let norm = 1.0 / (width * height) as f64;
        conv.kernel_hat = work.columns.iter().map(|v| v * norm).collect();
        conv
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// Real row transforms of the first `rows` rows of `work.real` (the rest
    /// are zero), transpose, column transforms. The result is left in
    /// `work.columns` in transposed layout.
    fn forward(&self, work: &mut Workspace, rows: usize) {
        let zero = Complex64::new(0.0, 0.0);
        let len = self.height * self.half;
        work.spectra.clear();
        work.spectra.resize(len, zero);
        work.row_scratch.resize(self.row_fwd.get_scratch_len(), zero);
        for (row, out) in work
            .real
            .chunks_exact_mut(self.width)
            .zip(work.spectra.chunks_exact_mut(self.half))
            .take(rows)
        {
            self.row_fwd
                .process_with_scratch(row, out, &mut work.row_scratch)
                .expect("row transform sizes match");
        }
        work.columns.resize(len, zero);
        transpose::transpose(&work.spectra, &mut work.columns, self.half, self.height);
        work.col_scratch.resize(self.col_fwd.get_inplace_scratch_len(), zero);
        self.col_fwd.process_with_scratch(&mut work.columns, &mut work.col_scratch);
    }

    /// Inverse of [`forward`] from `work.columns`, leaving the first `rows`
    /// rows in `work.real`.
    fn inverse(&self, work: &mut Workspace, rows: usize) {
        let zero = Complex64::new(0.0, 0.0);
        work.col_scratch.resize(self.col_inv.get_inplace_scratch_len(), zero);
        self.col_inv.process_with_scratch(&mut work.columns, &mut work.col_scratch);
        transpose::transpose(&work.columns, &mut work.spectra, self.height, self.half);
        work.real.resize(rows * self.width, 0.0);
        work.row_scratch.resize(self.row_inv.get_scratch_len(), zero);
        for (spectrum, row) in work
            .spectra
            .chunks_exact_mut(self.half)
            .zip(work.real.chunks_exact_mut(self.width))
        {
            // Rows of a real field have real DC and Nyquist terms.
            spectrum[0].im = 0.0;
            spectrum[self.half - 1].im = 0.0;
            self.row_inv
                .process_with_scratch(spectrum, row, &mut work.row_scratch)
                .expect("row transform sizes match");
        }
    }

    /// Convolves a cell array laid out like the grid.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let s = self.spec;
        assert_eq!(values.len(), s.len(), "field does not match the convolver grid");
        let mut guard = self.work.lock().unwrap_or_else(|e| e.into_inner());
        let work = &mut *guard;
        work.real.clear();
        work.real.resize(self.width * s.ny, 0.0);
        for (dst, src) in work.real.chunks_exact_mut(self.width).zip(values.chunks_exact(s.nx)) {
            dst[..s.nx].copy_from_slice(src);
        }
        self.forward(work, s.ny);
        for (v, k) in work.columns.iter_mut().zip(&self.kernel_hat) {
            *v *= k;
        }
        self.inverse(work, s.ny);
        let mut out = Vec::with_capacity(s.len());
        for row in work.real.chunks_exact(self.width) {
            out.extend_from_slice(&row[..s.nx]);
        }
        out
    }
}

/// Log-potential `x -> integral of log|x - x'| sigma(x') dx'` of a field at
/// the cell centres.
pub fn log_convolution(sigma: &GridField) -> GridField {
    let conv = LogConvolver::new(sigma.spec);
    GridField {
        spec: sigma.spec,
        role: FieldRole::Potential,
        values: conv.apply(&sigma.values),
    }
}
