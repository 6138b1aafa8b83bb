//! Small numeric helpers shared across modules.

/// Neumaier compensated summation. Accumulation order is fixed by the
/// caller, which keeps reductions bit-stable regardless of thread count.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator.
pub fn sum_compensated(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = CompensatedSum::new();
    for v in values {
        s.add(v);
    }
    s.value()
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum_compensated(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = sum_compensated(values.iter().map(|v| (v - mean) * (v - mean)));
    let sd = (ss / (n as f64 - 1.0)).sqrt();
    (mean, sd / (n as f64).sqrt())
}
