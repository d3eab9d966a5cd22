//! Monte Carlo reductions.

use rayon::prelude::*;

use crate::error::Result;

/// Trials per work item. Fixed so that the reduction tree, and therefore
/// every floating-point sum, is independent of the thread count.
pub const CHUNK: u64 = 256;

/// Mean of a Monte Carlo experiment together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation divided by `sqrt(trials)`; zero for a single trial.
    pub std_error: f64,
    pub trials: u64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut acc = Accumulator::default();
        samples.iter().for_each(|&x| acc.push(x));
        acc.estimate()
    }
}

/// Running count / sum / sum-of-squares. Merging is associative, so chunks
/// can be reduced in any grouping as long as the order is fixed.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.count as f64;
        let mean = self.mean();
        let std_error = if self.count > 1 {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error,
            trials: self.count,
        }
    }
}

/// Runs `trial(i)` for `i in 0..trials` in parallel and reduces the per-trial
/// vectors of `width` values into one [`Accumulator`] per component.
///
/// The result is bit-identical for any thread count.
pub fn run_trials<F>(trials: u64, width: usize, trial: F) -> Result<Vec<Accumulator>>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<Vec<Accumulator>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut accs = vec![Accumulator::default(); width];
            let mut buf = vec![0.0; width];
            for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                trial(i, &mut buf)?;
                for (acc, &x) in accs.iter_mut().zip(&buf) {
                    acc.push(x);
                }
            }
            Ok(accs)
        })
        .collect::<Result<_>>()?;

    let mut total = vec![Accumulator::default(); width];
    for accs in &partial {
        for (t, a) in total.iter_mut().zip(accs) {
            t.merge(a);
        }
    }
    Ok(total)
}
