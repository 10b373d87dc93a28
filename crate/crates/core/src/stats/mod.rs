//! Monte Carlo estimators over seeded disorder samples, and polynomial probes
//! of block determinants and discriminants.
//!
//! Trial `i` of a run with seed `s` always uses disorder stream `(s, i)`;
//! trials run in parallel and are reduced in trial order with compensated
//! sums, so results do not depend on the worker count.

mod estimators;
mod polyfit;
mod probes;

pub use estimators::*;
pub use polyfit::{chebyshev_nodes, fit_tensor_chebyshev, tensor_grid, ChebyshevFit};
pub use probes::*;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

/// Mean and standard error (`sample stdev / sqrt(n)`) of `xs`.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<KahanSum>().value();
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}

/// Evaluate `f` on trials `0..n` in parallel, results in trial order.
pub fn run_trials<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub label: String,
    /// Parameter point, in column order.
    pub params: Vec<(String, f64)>,
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
    /// Trial indices `[start, end)`.
    pub trials: (u64, u64),
    /// Bound evaluated at the same parameters.
    pub bound: Option<f64>,
    /// `value <= bound + 3 stderr`; `None` when the comparison is informational.
    pub pass: Option<bool>,
    /// Reference curve value, never judged.
    pub reference: Option<f64>,
    /// Trials on which the procedure under test returned an error.
    pub failures: u64,
}

impl Estimate {
    pub fn from_samples(label: &str, params: Vec<(String, f64)>, samples: &[f64], seed: u64) -> Self {
        let (value, stderr) = mean_stderr(samples);
        Self {
            label: label.into(),
            params,
            value,
            stderr,
            n: samples.len() as u64,
            seed,
            trials: (0, samples.len() as u64),
            bound: None,
            pass: None,
            reference: None,
            failures: 0,
        }
    }

    /// Attach a bound; judged only when `judged`.
    pub fn with_bound(mut self, bound: f64, judged: bool) -> Self {
        self.bound = Some(bound);
        self.pass = judged.then(|| self.value <= bound + 3.0 * self.stderr);
        self
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}
