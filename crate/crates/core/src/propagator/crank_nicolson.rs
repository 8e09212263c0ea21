use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ModelParams, QGrid};

/// Eighth-order central stencil for the second derivative.
const D2: [f64; 5] = [
    -205.0 / 72.0,
    8.0 / 5.0,
    -1.0 / 5.0,
    8.0 / 315.0,
    -1.0 / 560.0,
];

const CG_TOLERANCE: f64 = 1e-14;
const CG_MAX_ITER: usize = 2000;

/// Crank-Nicolson with a finite-difference Laplacian and hard walls. The
/// implicit system is solved by conjugate gradients on the Hermitian
/// positive-definite form `(1 + tau^2 H^2) x = (1 - i tau H)^2 psi`.
pub struct CrankNicolson {
    shape: Vec<usize>,
    inv_h2: Vec<f64>,
    diag0: Vec<f64>,
    diag1: Vec<f64>,
    coupling: Vec<f64>,
    tau: f64,
}

type Pair = (Vec<Complex64>, Vec<Complex64>);

fn dot(a: &Pair, b: &Pair) -> Complex64 {
    let s0: Complex64 = a.0.iter().zip(&b.0).map(|(x, y)| x.conj() * y).sum();
    let s1: Complex64 = a.1.iter().zip(&b.1).map(|(x, y)| x.conj() * y).sum();
    s0 + s1
}

impl CrankNicolson {
    pub fn new(params: &ModelParams, grid: &QGrid, dt: f64) -> Self {
        let h = 0.5 * params.omega0;
        let mut diag0 = Vec::new();
        let mut diag1 = Vec::new();
        let mut coupling = Vec::new();
        for p in grid.points() {
            let q = &p[..grid.dim()];
            let v = params.harmonic(q);
            diag0.push(v + h);
            diag1.push(v - h);
            coupling.push(params.coupling_field(q));
        }
        Self {
            shape: grid.shape(),
            inv_h2: grid
                .axes()
                .iter()
                .map(|a| 1.0 / (a.spacing() * a.spacing()))
                .collect(),
            diag0,
            diag1,
            coupling,
            tau: 0.5 * dt,
        }
    }

    /// `-1/2` times the finite-difference Laplacian.
    fn kinetic(&self, x: &[Complex64], out: &mut [Complex64]) {
        let zero = Complex64::new(0.0, 0.0);
        out.iter_mut().for_each(|v| *v = zero);
        let n_axes = self.shape.len();
        for axis in 0..n_axes {
            let (n, stride) = if n_axes == 1 || axis == 1 {
                (self.shape[axis], 1)
            } else {
                (self.shape[0], self.shape[1])
            };
            let scale = -0.5 * self.inv_h2[axis];
            for (idx, o) in out.iter_mut().enumerate() {
                let pos = (idx / stride) % n;
                let mut acc = x[idx] * D2[0];
                for (s, w) in D2.iter().enumerate().skip(1) {
                    if pos + s < n {
                        acc += x[idx + s * stride] * *w;
                    }
                    if pos >= s {
                        acc += x[idx - s * stride] * *w;
                    }
                }
                *o += acc * scale;
            }
        }
    }

    fn apply(&self, x: &Pair) -> Pair {
        let n = x.0.len();
        let mut t0 = vec![Complex64::new(0.0, 0.0); n];
        let mut t1 = vec![Complex64::new(0.0, 0.0); n];
        self.kinetic(&x.0, &mut t0);
        self.kinetic(&x.1, &mut t1);
        for j in 0..n {
            let (a, b) = (x.0[j], x.1[j]);
            t0[j] += a * self.diag0[j] + b * self.coupling[j];
            t1[j] += b * self.diag1[j] + a * self.coupling[j];
        }
        (t0, t1)
    }

    /// `x + tau^2 H^2 x`
    fn normal(&self, x: &Pair) -> Pair {
        let hh = self.apply(&self.apply(x));
        let t2 = self.tau * self.tau;
        (
            x.0.iter().zip(&hh.0).map(|(a, b)| a + b * t2).collect(),
            x.1.iter().zip(&hh.1).map(|(a, b)| a + b * t2).collect(),
        )
    }

    fn step(&self, psi: &Pair) -> Result<Pair> {
        let it = Complex64::new(0.0, self.tau);
        let hp = self.apply(psi);
        let hhp = self.apply(&hp);
        let t2 = self.tau * self.tau;
        let comb = |a: &[Complex64],
                    b: &[Complex64],
                    c: &[Complex64],
                    cb: Complex64,
                    cc: f64|
         -> Vec<Complex64> {
            a.iter()
                .zip(b)
                .zip(c)
                .map(|((x, y), z)| x + y * cb + z * cc)
                .collect()
        };
        let rhs = (
            comb(&psi.0, &hp.0, &hhp.0, -2.0 * it, -t2),
            comb(&psi.1, &hp.1, &hhp.1, -2.0 * it, -t2),
        );
        let mut x = (
            comb(&psi.0, &hp.0, &hhp.0, -2.0 * it, -2.0 * t2),
            comb(&psi.1, &hp.1, &hhp.1, -2.0 * it, -2.0 * t2),
        );
        let ax = self.normal(&x);
        let mut r: Pair = (
            rhs.0.iter().zip(&ax.0).map(|(a, b)| a - b).collect(),
            rhs.1.iter().zip(&ax.1).map(|(a, b)| a - b).collect(),
        );
        let bnorm = dot(&rhs, &rhs).re.sqrt();
        let mut p = r.clone();
        let mut rr = dot(&r, &r).re;
        for _ in 0..CG_MAX_ITER {
            if rr.sqrt() <= CG_TOLERANCE * bnorm {
                return Ok(x);
            }
            let ap = self.normal(&p);
            let alpha = rr / dot(&p, &ap).re;
            for k in 0..x.0.len() {
                x.0[k] += p.0[k] * alpha;
                x.1[k] += p.1[k] * alpha;
                r.0[k] -= ap.0[k] * alpha;
                r.1[k] -= ap.1[k] * alpha;
            }
            let rr_new = dot(&r, &r).re;
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..x.0.len() {
                p.0[k] = r.0[k] + p.0[k] * beta;
                p.1[k] = r.1[k] + p.1[k] * beta;
            }
        }
        Err(Error::Undefined(format!(
            "Crank-Nicolson solve did not converge (residual {:.3e})",
            rr.sqrt() / bnorm
        )))
    }

    pub fn advance(&mut self, c0: &mut [Complex64], c1: &mut [Complex64], n: usize) -> Result<()> {
        let mut psi: Pair = (c0.to_vec(), c1.to_vec());
        for _ in 0..n {
            psi = self.step(&psi)?;
        }
        c0.copy_from_slice(&psi.0);
        c1.copy_from_slice(&psi.1);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_is_exact_for_polynomials() {
        let g = QGrid::line(5.0, 41).unwrap();
        let p = ModelParams::single_mode(0.4, 0.0).unwrap();
        let cn = CrankNicolson::new(&p, &g, 0.01);
        let q = g.axis(0).coords();
        let x: Vec<Complex64> = q.iter().map(|&v| Complex64::new(v.powi(6), 0.0)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        cn.kinetic(&x, &mut out);
        for j in 4..37 {
            assert!((out[j].re + 0.5 * 30.0 * q[j].powi(4)).abs() < 1e-9);
        }
    }
}
