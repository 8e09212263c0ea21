use num_complex::Complex64;

use crate::model::{ModelParams, QGrid};
use crate::spectral::Spectral;

/// Entries `(m11, m12, m22)` of `exp(-i tau (V + h sz + c sx))` at one node.
fn local_propagator(v: f64, h: f64, c: f64, tau: f64) -> [Complex64; 3] {
    let r = h.hypot(c);
    let ph = Complex64::from_polar(1.0, -v * tau);
    let (sn, cs) = (r * tau).sin_cos();
    let s = if r > 0.0 { sn / r } else { tau };
    [
        ph * Complex64::new(cs, -s * h),
        ph * Complex64::new(0.0, -s * c),
        ph * Complex64::new(cs, s * h),
    ]
}

/// Strang splitting: half potential step, full kinetic step in momentum
/// space, half potential step. Consecutive half steps are fused.
pub struct SplitOperator {
    spectral: Spectral,
    kinetic: Vec<Complex64>,
    half: Vec<[Complex64; 3]>,
    full: Vec<[Complex64; 3]>,
}

impl SplitOperator {
    pub fn new(params: &ModelParams, grid: &QGrid, dt: f64) -> Self {
        let spectral = Spectral::new(grid);
        let norm = 1.0 / spectral.len() as f64;
        let kinetic = spectral
            .k_squared()
            .iter()
            .map(|k2| Complex64::from_polar(norm, -0.5 * dt * k2))
            .collect();
        let h = 0.5 * params.omega0;
        let (mut half, mut full) = (Vec::new(), Vec::new());
        for p in grid.points() {
            let q = &p[..grid.dim()];
            let v = params.harmonic(q);
            let c = params.coupling_field(q);
            half.push(local_propagator(v, h, c, 0.5 * dt));
            full.push(local_propagator(v, h, c, dt));
        }
        Self {
            spectral,
            kinetic,
            half,
            full,
        }
    }

    fn potential(m: &[[Complex64; 3]], c0: &mut [Complex64], c1: &mut [Complex64]) {
        for ((a, b), m) in c0.iter_mut().zip(c1.iter_mut()).zip(m) {
            let (x, y) = (*a, *b);
            *a = m[0] * x + m[1] * y;
            *b = m[1] * x + m[2] * y;
        }
    }

    fn kinetic(&self, c0: &mut [Complex64], c1: &mut [Complex64]) {
        for c in [c0, c1] {
            self.spectral.forward(c);
            c.iter_mut().zip(&self.kinetic).for_each(|(v, k)| *v *= k);
            self.spectral.inverse_raw(c);
        }
    }

    /// Advance by `n` full steps.
    pub fn advance(&mut self, c0: &mut [Complex64], c1: &mut [Complex64], n: usize) {
        if n == 0 {
            return;
        }
        Self::potential(&self.half, c0, c1);
        for s in 0..n {
            self.kinetic(c0, c1);
            let m = if s + 1 == n { &self.half } else { &self.full };
            Self::potential(m, c0, c1);
        }
    }
}
