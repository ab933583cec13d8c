//! Small numeric helpers shared by the reducers.
//!
//! Every corpus-level mean in this crate goes through [`NeumaierSum`] in a fixed
//! order, so results do not depend on how per-example values were produced.

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if libm_abs(self.sum) >= libm_abs(value) {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// Mean of `values` in iteration order, `None` when empty.
pub fn mean<I: IntoIterator<Item = f64>>(values: I) -> Option<f64> {
    let mut acc = NeumaierSum::new();
    let mut n = 0usize;
    for v in values {
        acc.add(v);
        n += 1;
    }
    (n > 0).then(|| acc.total() / n as f64)
}

/// Weighted mean; `None` when the weights sum to zero.
pub fn weighted_mean<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Option<f64> {
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for (value, weight) in pairs {
        num.add(value * weight);
        den.add(weight);
    }
    let d = den.total();
    (d != 0.0).then(|| num.total() / d)
}

/// Rounds half away from zero to `decimals` places.
pub fn round_to(value: f64, decimals: u32) -> f64 {
    let scale = pow10(decimals);
    let scaled = value * scale;
    let truncated = scaled as i64 as f64;
    let frac = scaled - truncated;
    let rounded = if frac >= 0.5 {
        truncated + 1.0
    } else if frac <= -0.5 {
        truncated - 1.0
    } else {
        truncated
    };
    rounded / scale
}

/// Rounds to 2 decimals, the precision of every reported table cell.
pub fn round2(value: f64) -> f64 {
    round_to(value, 2)
}

fn pow10(decimals: u32) -> f64 {
    let mut s = 1.0;
    for _ in 0..decimals {
        s *= 10.0;
    }
    s
}

fn libm_abs(x: f64) -> f64 {
    if x < 0.0 {
        -x
    } else {
        x
    }
}
