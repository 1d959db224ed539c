use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};

/// Complex samples on the tensor grid x_j = (j - N/2) dx, dx = 2 extent / N,
/// stored row-major with the last axis fastest.
#[derive(Debug, Clone, Serialize)]
pub struct GridFunction {
    pub n: usize,
    pub points_per_axis: usize,
    /// Physical half-width of the box.
    pub extent: f64,
    #[serde(skip)]
    pub samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(n: usize, points_per_axis: usize, extent: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(extent > 0.0) {
            return Err(Error::InvalidArgument(format!("extent must be > 0, got {extent}")));
        }
        if points_per_axis < 2 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "points_per_axis must be a power of two >= 2, got {points_per_axis}"
            )));
        }
        let count = points_per_axis.checked_pow(n as u32).ok_or_else(|| {
            Error::InvalidArgument("grid too large".into())
        })?;
        if samples.len() != count {
            return Err(Error::DimensionMismatch {
                expected: count,
                got: samples.len(),
            });
        }
        Ok(Self {
            n,
            points_per_axis,
            extent,
            samples,
        })
    }

    pub fn from_fn<F>(n: usize, points_per_axis: usize, extent: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let count = points_per_axis.pow(n as u32);
        let mut x = vec![0.0; n];
        let mut samples = Vec::with_capacity(count);
        let dx = 2.0 * extent / points_per_axis as f64;
        for flat in 0..count {
            let mut rem = flat;
            for d in (0..n).rev() {
                x[d] = ((rem % points_per_axis) as f64 - (points_per_axis / 2) as f64) * dx;
                rem /= points_per_axis;
            }
            samples.push(f(&x));
        }
        Self::new(n, points_per_axis, extent, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }

    /// Multi-index of a flat position.
    pub fn index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        let mut rem = flat;
        for d in (0..self.n).rev() {
            idx[d] = rem % self.points_per_axis;
            rem /= self.points_per_axis;
        }
        idx
    }

    pub fn flat(&self, index: &[usize]) -> usize {
        index.iter().fold(0, |acc, &i| acc * self.points_per_axis + i)
    }

    pub fn coordinate(&self, flat: usize) -> Vec<f64> {
        let dx = self.spacing();
        let half = (self.points_per_axis / 2) as f64;
        self.index(flat).iter().map(|&i| (i as f64 - half) * dx).collect()
    }

    /// Angular frequencies of the discrete transform along one axis, in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        fft_frequencies(self.points_per_axis, self.spacing())
    }
}

/// 2 pi k / (N dx) for k = 0, 1, ..., N/2 - 1, -N/2, ..., -1.
pub fn fft_frequencies(len: usize, dx: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / (len as f64 * dx);
    (0..len)
        .map(|k| {
            let kk = if k < len / 2 { k as f64 } else { k as f64 - len as f64 };
            kk * base
        })
        .collect()
}

/// Unnormalised n-dimensional DFT in place: forward uses e^{-i}, inverse e^{+i}.
pub fn fft_nd(data: &mut [Complex64], n: usize, len: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(len, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // The last axis is contiguous.
    for line in data.chunks_mut(len) {
        fft.process_with_scratch(line, &mut scratch);
    }
    let total = data.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for axis in 0..n.saturating_sub(1) {
        let stride = len.pow((n - 1 - axis) as u32);
        let block = stride * len;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = data[base + k * stride];
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (k, b) in buf.iter().enumerate() {
                    data[base + k * stride] = *b;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct_sum_in_two_dimensions() {
        let len = 8;
        let data: Vec<Complex64> = (0..len * len)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let mut out = data.clone();
        fft_nd(&mut out, 2, len, FftDirection::Inverse);
        for j0 in 0..len {
            for j1 in 0..len {
                let mut acc = Complex64::new(0.0, 0.0);
                for k0 in 0..len {
                    for k1 in 0..len {
                        let ph = 2.0 * std::f64::consts::PI * ((j0 * k0 + j1 * k1) as f64) / len as f64;
                        acc += data[k0 * len + k1] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((acc - out[j0 * len + j1]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn coordinates_are_centred() {
        let g = GridFunction::from_fn(2, 4, 2.0, |x| Complex64::new(x[0], x[1])).unwrap();
        assert_eq!(g.coordinate(0), vec![-2.0, -2.0]);
        assert_eq!(g.samples[g.flat(&[2, 3])], Complex64::new(0.0, 1.0));
        assert_eq!(g.index(g.flat(&[1, 3])), vec![1, 3]);
        assert!(GridFunction::new(2, 3, 1.0, vec![Complex64::new(0.0, 0.0); 9]).is_err());
    }
}
