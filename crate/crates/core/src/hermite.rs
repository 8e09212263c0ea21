//! Harmonic-oscillator eigenfunctions by stable upward recursion.

use crate::model::HBAR;

/// `phi_n(q)` for `n = 0..=n_max` of the oscillator with frequency `omega`,
/// returned as `out[n][k]` over the sample points.
pub fn ho_eigenfunctions(omega: f64, n_max: usize, q: &[f64]) -> Vec<Vec<f64>> {
    let s = (omega / HBAR).sqrt();
    let norm = (omega / (std::f64::consts::PI * HBAR)).powf(0.25);
    let mut out = vec![vec![0.0; q.len()]; n_max + 1];
    for (k, &qk) in q.iter().enumerate() {
        let x = s * qk;
        let mut prev = 0.0;
        let mut cur = norm * (-0.5 * x * x).exp();
        out[0][k] = cur;
        for n in 1..=n_max {
            let nf = n as f64;
            let next = (2.0 / nf).sqrt() * x * cur - ((nf - 1.0) / nf).sqrt() * prev;
            prev = cur;
            cur = next;
            out[n][k] = cur;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_on_fine_grid() {
        let n = 4001;
        let h = 40.0 / (n - 1) as f64;
        let q: Vec<f64> = (0..n).map(|j| -20.0 + j as f64 * h).collect();
        let phi = ho_eigenfunctions(0.4, 30, &q);
        for a in 0..=30 {
            for b in 0..=30 {
                let s: f64 = phi[a].iter().zip(&phi[b]).map(|(x, y)| x * y).sum::<f64>() * h;
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12, "{a} {b} {s}");
            }
        }
    }

    #[test]
    fn first_excited_state_closed_form() {
        let w: f64 = 0.7;
        let q = [-1.3, 0.0, 0.4, 2.2];
        let phi = ho_eigenfunctions(w, 1, &q);
        for (k, &x) in q.iter().enumerate() {
            let g = (w / std::f64::consts::PI).powf(0.25) * (-0.5 * w * x * x).exp();
            assert!((phi[1][k] - (2.0 * w).sqrt() * x * g).abs() < 1e-15);
        }
    }
}
