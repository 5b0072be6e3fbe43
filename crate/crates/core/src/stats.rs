//! Sample means and standard errors from running sums.

use num_complex::Complex64;

/// Running sums of values and squared values, one slot per component. Sums
/// are taken relative to the first sample, so constant data gives that value
/// as the mean and an exactly zero error.
#[derive(Debug, Clone, PartialEq)]
pub struct VecAccumulator {
    n: usize,
    shift: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl VecAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            n: 0,
            shift: vec![0.0; len],
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
        }
    }

    pub fn push(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.sum.len());
        if self.n == 0 {
            self.shift.copy_from_slice(sample);
        }
        for (((s, q), k), x) in self
            .sum
            .iter_mut()
            .zip(&mut self.sum_sq)
            .zip(&self.shift)
            .zip(sample)
        {
            let y = x - k;
            *s += y;
            *q += y * y;
        }
        self.n += 1;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n.max(1) as f64;
        self.shift
            .iter()
            .zip(&self.sum)
            .map(|(k, s)| k + s / n)
            .collect()
    }

    /// Standard error of the mean, using the unbiased sample variance.
    /// Zero when fewer than two samples were pushed.
    pub fn stderr(&self) -> Vec<f64> {
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(&s, &q)| stderr_from_sums(self.n, s, q))
            .collect()
    }
}

/// Running sums for a scalar.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: usize,
    shift: f64,
    sum: f64,
    sum_sq: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        if self.n == 0 {
            self.shift = x;
        }
        let y = x - self.shift;
        self.n += 1;
        self.sum += y;
        self.sum_sq += y * y;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.sum / self.n.max(1) as f64
    }

    pub fn stderr(&self) -> f64 {
        stderr_from_sums(self.n, self.sum, self.sum_sq)
    }
}

/// Complex samples: real and imaginary parts tracked separately.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComplexAccumulator {
    pub re: Accumulator,
    pub im: Accumulator,
}

impl ComplexAccumulator {
    pub fn push(&mut self, z: Complex64) {
        self.re.push(z.re);
        self.im.push(z.im);
    }

    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.re.mean(), self.im.mean())
    }

    /// `sqrt(se_re² + se_im²)`.
    pub fn stderr(&self) -> f64 {
        self.re.stderr().hypot(self.im.stderr())
    }
}

fn stderr_from_sums(n: usize, sum: f64, sum_sq: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (var / nf).sqrt()
}

/// Mean and standard error of a slice.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
