//! Reductions and least-squares fits shared by the sweeps.

use serde::{Deserialize, Serialize};

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
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

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Ordinary least-squares line `y ≈ slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - (slope * xi + intercept);
            r * r
        })
        .sum();
    Some(LineFit {
        slope,
        intercept,
        residual: (rss / nf).sqrt(),
    })
}

/// Fits `log2(values)` against `log2(scales)`.
pub fn fit_log2(scales: &[f64], values: &[f64]) -> Option<LineFit> {
    let x: Vec<f64> = scales.iter().map(|s| s.log2()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.log2()).collect();
    fit_line(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_beats_naive() {
        let mut xs = vec![1.0];
        xs.extend(std::iter::repeat_n(1e-16, 10_000));
        let naive: f64 = xs.iter().sum();
        assert_eq!(naive, 1.0);
        let c = compensated_sum(xs);
        assert!((c - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn exact_power_law_slope() {
        let n = [4.0, 8.0, 16.0, 32.0];
        let v: Vec<f64> = n.iter().map(|x: &f64| 3.0 * x.powf(0.75)).collect();
        let fit = fit_log2(&n, &v).unwrap();
        assert!((fit.slope - 0.75).abs() < 1e-12);
        assert!((fit.intercept - 3f64.log2()).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn degenerate_fit_rejected() {
        assert!(fit_line(&[1.0, 1.0], &[2.0, 3.0]).is_none());
        assert!(fit_line(&[1.0], &[2.0]).is_none());
    }
}
