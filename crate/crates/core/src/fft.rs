//! Multi-dimensional complex FFT on row-major arrays (last axis fastest).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct NdFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            shape: shape.to_vec(),
            forward,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    /// Unnormalized `Σ_k a_k e^{+2πi k·x/G}`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, false);
    }

    /// Unnormalized `Σ_x a_x e^{-2πi k·x/G}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, true);
    }

    fn apply(&self, data: &mut [Complex64], fwd: bool) {
        assert_eq!(data.len(), self.len());
        let plans = if fwd { &self.forward } else { &self.inverse };
        let d = self.shape.len();
        let mut line = Vec::new();
        let mut scratch = Vec::new();
        for axis in 0..d {
            let n = self.shape[axis];
            if n == 1 {
                continue;
            }
            let plan = &plans[axis];
            scratch.resize(plan.get_inplace_scratch_len(), Complex64::default());
            let stride: usize = self.shape[axis + 1..].iter().product();
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            line.resize(n, Complex64::default());
            let block = n * stride;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[base + i * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        data[base + i * stride] = *v;
                    }
                }
            }
        }
    }
}
