//! FFT helpers on periodic extensions of the displacement grids.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::model::QGrid;

/// Angular wavenumbers in FFT order for `n` nodes spaced by `h`.
pub fn wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let l = n as f64 * h;
    (0..n)
        .map(|j| {
            let m = if j <= (n - 1) / 2 {
                j as f64
            } else {
                j as f64 - n as f64
            };
            2.0 * PI * m / l
        })
        .collect()
}

/// `(i k)^order`, with the unpaired Nyquist term dropped for odd orders.
fn derivative_factor(k: f64, order: u32, nyquist: bool) -> Complex64 {
    if nyquist && order % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new(0.0, k).powu(order)
}

/// Multidimensional FFTs over a [`QGrid`].
pub struct Spectral {
    shape: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    k: Vec<Vec<f64>>,
}

impl Spectral {
    pub fn new(grid: &QGrid) -> Self {
        let mut planner = FftPlanner::new();
        let shape = grid.shape();
        let fwd = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let k = grid
            .axes()
            .iter()
            .map(|a| wavenumbers(a.n_points, a.spacing()))
            .collect();
        Self { shape, fwd, inv, k }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    /// Squared wavenumber magnitude per flat index.
    pub fn k_squared(&self) -> Vec<f64> {
        match self.shape.len() {
            1 => self.k[0].iter().map(|k| k * k).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for k0 in &self.k[0] {
                    for k1 in &self.k[1] {
                        out.push(k0 * k0 + k1 * k1);
                    }
                }
                out
            }
        }
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        match self.shape.len() {
            1 => plans[0].process(data),
            _ => {
                let (n0, n1) = (self.shape[0], self.shape[1]);
                plans[1].process(data);
                let mut t = vec![Complex64::new(0.0, 0.0); n0 * n1];
                for i in 0..n0 {
                    for j in 0..n1 {
                        t[j * n0 + i] = data[i * n1 + j];
                    }
                }
                plans[0].process(&mut t);
                for i in 0..n0 {
                    for j in 0..n1 {
                        data[i * n1 + j] = t[j * n0 + i];
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    /// Unnormalized inverse transform in place.
    pub fn inverse_raw(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    /// Multiply a spectrum by `(i k_axis)^order`.
    pub fn apply_derivative(&self, spec: &mut [Complex64], axis: usize, order: u32) {
        let n = self.shape[axis];
        let nyq = (n % 2 == 0).then_some(n / 2);
        let factors: Vec<Complex64> = self.k[axis]
            .iter()
            .enumerate()
            .map(|(j, &k)| derivative_factor(k, order, Some(j) == nyq))
            .collect();
        match self.shape.len() {
            1 => spec.iter_mut().zip(&factors).for_each(|(v, f)| *v *= f),
            _ => {
                let n1 = self.shape[1];
                for (idx, v) in spec.iter_mut().enumerate() {
                    let j = if axis == 0 { idx / n1 } else { idx % n1 };
                    *v *= factors[j];
                }
            }
        }
    }

    /// Spectral derivative of a grid function along `axis`.
    pub fn derivative(&self, data: &[Complex64], axis: usize, order: u32) -> Vec<Complex64> {
        let mut spec = data.to_vec();
        self.forward(&mut spec);
        self.derivative_from_spectrum(&spec, axis, order)
    }

    pub fn derivative_from_spectrum(
        &self,
        spec: &[Complex64],
        axis: usize,
        order: u32,
    ) -> Vec<Complex64> {
        let mut d = spec.to_vec();
        self.apply_derivative(&mut d, axis, order);
        self.inverse(&mut d);
        d
    }
}

/// Trigonometric interpolation of an `n`-point line onto `n * m` points.
pub struct LineUpsampler {
    n: usize,
    m: usize,
    h: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl LineUpsampler {
    pub fn new(n: usize, h: f64, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            m,
            h,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n * m),
            k: wavenumbers(n, h),
        }
    }

    pub fn factor(&self) -> usize {
        self.m
    }

    pub fn fine_spacing(&self) -> f64 {
        self.h / self.m as f64
    }

    /// Unnormalized spectrum of a coarse line.
    pub fn spectrum(&self, line: &[Complex64]) -> Vec<Complex64> {
        let mut s = line.to_vec();
        self.fwd.process(&mut s);
        s
    }

    /// `order`-th derivative of the interpolant at every fine node; fine node
    /// `j * m` coincides with coarse node `j`.
    pub fn evaluate(&self, spec: &[Complex64], order: u32) -> Vec<Complex64> {
        let (n, m) = (self.n, self.m);
        let nf = n * m;
        let mut fine = vec![Complex64::new(0.0, 0.0); nf];
        let half = (n - 1) / 2;
        for j in 0..n {
            let k = self.k[j];
            if n % 2 == 0 && j == n / 2 {
                // Split the Nyquist coefficient evenly between +/- k.
                let c = 0.5 * spec[j];
                let kn = k.abs();
                fine[n / 2] += c * Complex64::new(0.0, kn).powu(order);
                fine[nf - n / 2] += c * Complex64::new(0.0, -kn).powu(order);
                continue;
            }
            let idx = if j <= half { j } else { nf - (n - j) };
            fine[idx] = spec[j] * Complex64::new(0.0, k).powu(order);
        }
        self.inv.process(&mut fine);
        let s = 1.0 / n as f64;
        fine.iter_mut().for_each(|v| *v *= s);
        fine
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QGrid;

    fn gauss(q: f64) -> Complex64 {
        Complex64::new((-0.5 * q * q).exp(), 0.0) * Complex64::from_polar(1.0, 0.3 * q)
    }

    fn gauss_d(q: f64) -> Complex64 {
        gauss(q) * Complex64::new(-q, 0.3)
    }

    #[test]
    fn derivative_of_gaussian_wave() {
        for n in [128usize, 129] {
            let g = QGrid::line(15.0, n).unwrap();
            let sp = Spectral::new(&g);
            let q = g.axis(0).coords();
            let f: Vec<_> = q.iter().map(|&x| gauss(x)).collect();
            let d = sp.derivative(&f, 0, 1);
            for (x, v) in q.iter().zip(&d) {
                assert!((v - gauss_d(*x)).norm() < 1e-10, "n={n} q={x}");
            }
            let d2 = sp.derivative(&f, 0, 2);
            for (x, v) in q.iter().zip(&d2) {
                let exact = gauss(*x) * (Complex64::new(-x, 0.3).powu(2) - 1.0);
                assert!((v - exact).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn two_dimensional_transform_roundtrip_and_derivative() {
        let g = QGrid::square(10.0, 81).unwrap();
        let sp = Spectral::new(&g);
        let pts = g.points();
        let f: Vec<_> = pts
            .iter()
            .map(|p| gauss(p[0]) * gauss(1.3 * p[1]))
            .collect();
        let mut t = f.clone();
        sp.forward(&mut t);
        sp.inverse(&mut t);
        for (a, b) in t.iter().zip(&f) {
            assert!((a - b).norm() < 1e-14);
        }
        let d1 = sp.derivative(&f, 1, 1);
        for (p, v) in pts.iter().zip(&d1) {
            let exact = gauss(p[0]) * gauss_d(1.3 * p[1]) * 1.3;
            assert!((v - exact).norm() < 1e-9);
        }
    }

    #[test]
    fn upsampled_line_matches_function() {
        for n in [96usize, 97] {
            let g = QGrid::line(12.0, n).unwrap();
            let h = g.axis(0).spacing();
            let q = g.axis(0).coords();
            let f: Vec<_> = q.iter().map(|&x| gauss(x)).collect();
            let up = LineUpsampler::new(n, h, 5);
            let spec = up.spectrum(&f);
            let v = up.evaluate(&spec, 0);
            let d = up.evaluate(&spec, 1);
            for (j, (a, b)) in v.iter().zip(&d).enumerate() {
                let x = q[0] + j as f64 * up.fine_spacing();
                if x > 11.0 {
                    break;
                }
                assert!((a - gauss(x)).norm() < 1e-10);
                assert!((b - gauss_d(x)).norm() < 1e-9);
            }
            for j in 0..n {
                assert!((v[j * 5] - f[j]).norm() < 1e-13);
            }
        }
    }
}
