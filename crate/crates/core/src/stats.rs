//! Sample means and standard errors.

use num_complex::Complex64;
use serde::Serialize;

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Standard error from the means of `batches` contiguous batches, for
/// correlated chains.
pub fn batch_means_stderr(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches.max(1);
    if size == 0 || batches < 2 {
        return mean_stderr(xs).1;
    }
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(|b| pairwise_sum(b) / size as f64).collect();
    mean_stderr(&means).1
}

/// Complex Monte Carlo estimate with componentwise standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[Complex64]) -> Self {
        let re: Vec<f64> = xs.iter().map(|z| z.re).collect();
        let im: Vec<f64> = xs.iter().map(|z| z.im).collect();
        let (mr, sr) = mean_stderr(&re);
        let (mi, si) = mean_stderr(&im);
        Self { mean: Complex64::new(mr, mi), stderr_re: sr, stderr_im: si, samples: xs.len() }
    }

    pub fn from_batches(xs: &[Complex64], batches: usize) -> Self {
        let re: Vec<f64> = xs.iter().map(|z| z.re).collect();
        let im: Vec<f64> = xs.iter().map(|z| z.im).collect();
        Self {
            mean: Complex64::new(mean_stderr(&re).0, mean_stderr(&im).0),
            stderr_re: batch_means_stderr(&re, batches),
            stderr_im: batch_means_stderr(&im, batches),
            samples: xs.len(),
        }
    }

    /// Standard error of the complex mean as a whole.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }
}
