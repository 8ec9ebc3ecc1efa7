use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};

pub const MIN_SERIES_LEN: usize = 1000;

/// Normalized autocorrelation function of `series` for all lags, computed
/// through a zero-padded FFT.
pub fn autocorrelation(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { len: n, min: 2 });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = series
        .iter()
        .map(|&v| Complex64::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 0.0) || c0 <= 1e-28 * n as f64 * mean.abs().max(1.0).powi(2) {
        return Err(Error::DegenerateSeries);
    }
    Ok(buf[..n].iter().map(|v| v.re / c0).collect())
}

/// Integrated autocorrelation time `1 + 2 sum_k rho(k)` with Geyer's initial
/// monotone sequence truncation. White noise gives 1.
pub fn integrated_autocorrelation(series: &[f64]) -> Result<f64> {
    if series.len() < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: MIN_SERIES_LEN,
        });
    }
    let rho = autocorrelation(series)?;
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < rho.len() {
        let pair = rho[2 * k] + rho[2 * k + 1];
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    Ok(tau.max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn white_noise_has_unit_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let tau = integrated_autocorrelation(&s).unwrap();
        assert!((0.8..=1.2).contains(&tau), "tau = {tau}");
    }

    #[test]
    fn ar1_matches_closed_form() {
        let phi: f64 = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = 0.0;
        let s: Vec<f64> = (0..200_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = phi * x + e;
                x
            })
            .collect();
        let tau = integrated_autocorrelation(&s).unwrap();
        let exact = (1.0 + phi) / (1.0 - phi);
        assert!((tau - exact).abs() <= 3.0, "tau = {tau}, exact {exact}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            integrated_autocorrelation(&vec![3.0; 5000]),
            Err(Error::DegenerateSeries)
        ));
        assert!(matches!(
            integrated_autocorrelation(&[1.0, 2.0, 3.0]),
            Err(Error::SeriesTooShort { .. })
        ));
    }
}
