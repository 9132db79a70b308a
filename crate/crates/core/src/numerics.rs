//! Small numerical helpers shared across modules.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Trapezoid rule for samples `f` on nodes `x`.
pub(crate) fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), f.len());
    let mut acc = CompensatedSum::new();
    for i in 1..x.len() {
        acc.add(0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]));
    }
    acc.value()
}

/// Running trapezoid integral, starting at zero on the first node.
pub(crate) fn cumulative_trapezoid(x: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = CompensatedSum::new();
    out.push(0.0);
    for i in 1..x.len() {
        acc.add(0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]));
        out.push(acc.value());
    }
    out
}
