//! Single-excitation emission into a quasi-continuum of modes.
//!
//! The state is `a |e, 0> + sum_a b_a |g, 1_a>`. Energies are measured from
//! the ground level with all modes empty, so `|e, 0>` has energy `w0` and
//! `|g, 1_a>` has energy `w_a`. Mode couplings follow from the model
//! Hamiltonian: `g_a = (d lambda) sqrt(hbar w_a / 2)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::HBAR;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Equally spaced cavity modes `w_a = a pi c / V` for a window of indices.
#[derive(Debug, Clone, PartialEq)]
pub struct WWModeSet {
    pub box_length: f64,
    pub light_speed: f64,
    /// Index `a` of the lowest retained mode (at least 1).
    pub first_index: usize,
    pub n_modes: usize,
    /// Uniform product of dipole matrix element and coupling strength.
    pub coupling: f64,
}

impl WWModeSet {
    pub fn new(
        box_length: f64,
        light_speed: f64,
        first_index: usize,
        n_modes: usize,
        coupling: f64,
    ) -> Result<Self> {
        if !(box_length > 0.0 && light_speed > 0.0) {
            return Err(Error::InvalidParams(format!(
                "box length and light speed must be positive, got {box_length}, {light_speed}"
            )));
        }
        if first_index == 0 || n_modes == 0 {
            return Err(Error::InvalidParams(
                "mode indices start at 1 and at least one mode is required".into(),
            ));
        }
        if !coupling.is_finite() {
            return Err(Error::InvalidParams(format!(
                "non-finite coupling {coupling}"
            )));
        }
        Ok(Self {
            box_length,
            light_speed,
            first_index,
            n_modes,
            coupling,
        })
    }

    /// Light speed for which the decay-rate formula equals the golden-rule
    /// rate of the couplings `g_a`.
    pub fn matched_light_speed(omega0: f64) -> f64 {
        (HBAR * omega0).sqrt()
    }

    /// Default quasi-continuum: spacing at most a tenth of the decay rate,
    /// `anchor` exactly on the mode grid, and a band symmetric about `w0`
    /// of half-width `min(30 Gamma, w0 - dw)`.
    pub fn quasi_continuum(omega0: f64, coupling: f64, anchor: f64) -> Result<Self> {
        if !(omega0 > 0.0) || coupling == 0.0 || !(anchor > 0.0) {
            return Err(Error::InvalidParams(
                "quasi-continuum needs positive w0, anchor and a nonzero coupling".into(),
            ));
        }
        let c = Self::matched_light_speed(omega0);
        let g0_sq = coupling * coupling * HBAR * omega0 / 2.0;
        let dw_max = (2.0 * PI * g0_sq / 10.0).sqrt();
        let m = (anchor / dw_max).ceil();
        let dw = anchor / m;
        let gamma = 2.0 * PI * g0_sq / dw;
        let half = (30.0 * gamma).min(omega0 - dw).max((anchor - omega0).abs());
        Self::with_band(omega0, coupling, PI * c / dw, c, half)
    }

    /// Modes of a box of length `box_length` covering `w0 +/- half_width`.
    pub fn with_band(
        omega0: f64,
        coupling: f64,
        box_length: f64,
        light_speed: f64,
        half_width: f64,
    ) -> Result<Self> {
        let dw = PI * light_speed / box_length;
        let lo = (((omega0 - half_width) / dw) - 1e-9).ceil().max(1.0) as usize;
        let hi = (((omega0 + half_width) / dw) + 1e-9).floor() as usize;
        if hi < lo {
            return Err(Error::InvalidParams("empty mode band".into()));
        }
        Self::new(box_length, light_speed, lo, hi - lo + 1, coupling)
    }

    pub fn spacing(&self) -> f64 {
        PI * self.light_speed / self.box_length
    }

    pub fn frequency(&self, k: usize) -> f64 {
        (self.first_index + k) as f64 * self.spacing()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_modes).map(|k| self.frequency(k)).collect()
    }

    pub fn mode_couplings(&self) -> Vec<f64> {
        self.frequencies()
            .iter()
            .map(|w| self.coupling * (HBAR * w / 2.0).sqrt())
            .collect()
    }

    /// `Gamma = (d lambda)^2 w0^2 V / (hbar c^3)`.
    pub fn decay_rate(&self, omega0: f64) -> f64 {
        self.coupling * self.coupling * omega0 * omega0 * self.box_length
            / (HBAR * self.light_speed.powi(3))
    }

    /// `2 pi g(w0)^2 / dw`.
    pub fn golden_rule_rate(&self, omega0: f64) -> f64 {
        PI * self.coupling * self.coupling * omega0 / (HBAR * self.spacing())
    }

    pub fn revival_time(&self) -> f64 {
        2.0 * PI / self.spacing()
    }

    /// Position of the mode with frequency `w`, if it lies on the grid.
    pub fn index_of(&self, w: f64) -> Option<usize> {
        let x = w / self.spacing() - self.first_index as f64;
        let k = x.round();
        ((x - k).abs() < 1e-6 && k >= 0.0 && (k as usize) < self.n_modes).then_some(k as usize)
    }

    pub fn covers(&self, omega0: f64) -> bool {
        let f = self.frequencies();
        f[0] <= omega0 && omega0 <= f[f.len() - 1]
    }
}

/// Amplitudes of the single-excitation state at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct WWCoefficients {
    pub time: f64,
    pub a: Complex64,
    pub b: Vec<Complex64>,
    pub a_dot: Complex64,
    pub b_dot: Vec<Complex64>,
    /// `1 - |a|^2 - sum |b|^2`.
    pub truncation_deficit: f64,
}

impl WWCoefficients {
    fn new(
        time: f64,
        a: Complex64,
        b: Vec<Complex64>,
        a_dot: Complex64,
        b_dot: Vec<Complex64>,
    ) -> Self {
        let deficit = 1.0 - a.norm_sqr() - b.iter().map(|x| x.norm_sqr()).sum::<f64>();
        Self {
            time,
            a,
            b,
            a_dot,
            b_dot,
            truncation_deficit: deficit,
        }
    }

    pub fn photon_probability(&self) -> f64 {
        self.b.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Closed-form amplitudes with the divergent level shift dropped.
pub fn ww_closed_form(modes: &WWModeSet, omega0: f64, t: f64) -> WWCoefficients {
    let gamma = modes.decay_rate(omega0);
    let lam = Complex64::new(-0.5 * gamma, -omega0);
    let a = (lam * t).exp();
    let a_dot = lam * a;
    let mut b = Vec::with_capacity(modes.n_modes);
    let mut b_dot = Vec::with_capacity(modes.n_modes);
    for (w, g) in modes.frequencies().iter().zip(modes.mode_couplings()) {
        if g == 0.0 {
            b.push(Complex64::new(0.0, 0.0));
            b_dot.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let z = -I * g / Complex64::new(-0.5 * gamma, w - omega0);
        let e2 = Complex64::from_polar(1.0, -w * t);
        b.push(z * (a - e2));
        b_dot.push(z * (a_dot + I * w * e2));
    }
    WWCoefficients::new(t, a, b, a_dot, b_dot)
}

/// Right-hand side in the frame rotating at `w0`.
fn rhs(g: &[f64], detuning: &[f64], y: &[Complex64], out: &mut [Complex64]) {
    let a = y[0];
    let mut s = Complex64::new(0.0, 0.0);
    for k in 0..g.len() {
        let bk = y[k + 1];
        s += bk * g[k];
        out[k + 1] = -I * (bk * detuning[k] + a * g[k]);
    }
    out[0] = -I * s;
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Tolerance of the adaptive integrator (absolute and relative).
const ODE_TOLERANCE: f64 = 1e-12;
/// Allowed norm drift of the truncated model.
pub const ODE_NORM_TOLERANCE: f64 = 1e-8;

/// Integrate the truncated single-excitation model exactly (no Markov or
/// rotating-wave step) with an adaptive Dormand-Prince 5(4) scheme.
pub fn ww_ode_integrate(
    modes: &WWModeSet,
    omega0: f64,
    t_grid: &[f64],
) -> Result<Vec<WWCoefficients>> {
    if t_grid.first().is_some_and(|&t| t < 0.0) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams(
            "time grid must increase from 0".into(),
        ));
    }
    let g = modes.mode_couplings();
    let det: Vec<f64> = modes.frequencies().iter().map(|w| w - omega0).collect();
    let n = g.len() + 1;
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    y[0] = Complex64::new(1.0, 0.0);
    let mut k = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    let mut t = 0.0;
    let max_rate = det.iter().fold(0.0f64, |m, d| m.max(d.abs()))
        + g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut h = 0.01 / max_rate.max(1e-12);
    let mut out = Vec::with_capacity(t_grid.len());
    rhs(&g, &det, &y, &mut k[0]);
    for &target in t_grid {
        while t < target {
            let step = h.min(target - t);
            if step < 1e-14 * target.max(1.0) {
                return Err(Error::StepUnderflow(t));
            }
            for s in 1..7 {
                for j in 0..n {
                    let mut acc = y[j];
                    for (r, a) in DP_A[s].iter().enumerate().take(s) {
                        if *a != 0.0 {
                            acc += k[r][j] * (step * a);
                        }
                    }
                    tmp[j] = acc;
                }
                let (done, rest) = k.split_at_mut(s);
                let _ = done;
                rhs(&g, &det, &tmp, &mut rest[0]);
            }
            let mut err: f64 = 0.0;
            let mut y_new = y.clone();
            for j in 0..n {
                let mut e = Complex64::new(0.0, 0.0);
                for s in 0..7 {
                    y_new[j] += k[s][j] * (step * DP_B[s]);
                    e += k[s][j] * (step * DP_E[s]);
                }
                let sc = ODE_TOLERANCE * (1.0 + y[j].norm().max(y_new[j].norm()));
                err = err.max(e.norm() / sc);
            }
            if err <= 1.0 {
                t += step;
                y = y_new;
                // First-same-as-last: stage 7 was evaluated at the new point.
                let last = k[6].clone();
                k[0] = last;
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = step * fac;
        }
        let norm: f64 = y.iter().map(|x| x.norm_sqr()).sum();
        if (norm - 1.0).abs() > ODE_NORM_TOLERANCE {
            return Err(Error::NormDrift {
                drift: (norm - 1.0).abs(),
                time: t,
            });
        }
        let mut dy = vec![Complex64::new(0.0, 0.0); n];
        rhs(&g, &det, &y, &mut dy);
        let rot = Complex64::from_polar(1.0, -omega0 * target);
        let lab = |v: Complex64, dv: Complex64| (v * rot, (dv - I * omega0 * v) * rot);
        let (a, a_dot) = lab(y[0], dy[0]);
        let (b, b_dot): (Vec<_>, Vec<_>) = (1..n).map(|j| lab(y[j], dy[j])).unzip();
        out.push(WWCoefficients::new(target, a, b, a_dot, b_dot));
    }
    Ok(out)
}

/// Mask threshold on the reduced marginal density.
pub const MASK_THRESHOLD: f64 = 1e-12;

/// The amplitude along the axis of mode `i` with every other displacement
/// at zero. All arrays share the common transverse factor
/// `prod_{j != i} (w_j / pi)^(1/4)`, whose logarithm is recorded separately.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub mode: usize,
    pub omega_i: f64,
    pub time: f64,
    pub q: Vec<f64>,
    pub psi: Vec<[Complex64; 2]>,
    pub d_psi: Vec<[Complex64; 2]>,
    pub d2_psi: Vec<[Complex64; 2]>,
    pub dt_psi: Vec<[Complex64; 2]>,
    /// `b_j sqrt(2 w_j / hbar)` for `j != i`: the transverse derivative of
    /// the ground component is this times the mode-i Gaussian.
    pub transverse_amplitudes: Vec<Complex64>,
    pub transverse_freqs: Vec<f64>,
    pub chi_abs: Vec<f64>,
    pub log_transverse_norm: f64,
    pub phi: Vec<[Complex64; 2]>,
    pub d_phi: Vec<[Complex64; 2]>,
    pub dt_phi: Vec<[Complex64; 2]>,
    /// `sum_{j != i} |D_j Phi|^2`.
    pub transverse_kinetic: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Normalized mode Gaussian.
pub(crate) fn gaussian(w: f64, q: f64) -> f64 {
    (w / (PI * HBAR)).powf(0.25) * (-0.5 * w * q * q / HBAR).exp()
}

pub fn cross_section_state(
    coeffs: &WWCoefficients,
    modes: &WWModeSet,
    i: usize,
    q: &[f64],
) -> Result<CrossSection> {
    if i >= modes.n_modes || coeffs.b.len() != modes.n_modes {
        return Err(Error::InvalidParams(format!(
            "mode index {i} outside a set of {} modes",
            modes.n_modes
        )));
    }
    let freqs = modes.frequencies();
    let wi = freqs[i];
    let si = (2.0 * wi / HBAR).sqrt();
    let (a, bi) = (coeffs.a, coeffs.b[i]);
    let (a_dot, bi_dot) = (coeffs.a_dot, coeffs.b_dot[i]);
    let mut transverse_amplitudes = Vec::with_capacity(freqs.len() - 1);
    let mut transverse_freqs = Vec::with_capacity(freqs.len() - 1);
    let mut log_norm = 0.0;
    let mut beta_sq = 0.0;
    for (j, &w) in freqs.iter().enumerate() {
        if j == i {
            continue;
        }
        let beta = coeffs.b[j] * (2.0 * w / HBAR).sqrt();
        beta_sq += beta.norm_sqr();
        transverse_amplitudes.push(beta);
        transverse_freqs.push(w);
        log_norm += 0.25 * (w / (PI * HBAR)).ln();
    }
    let n = q.len();
    let mut cs = CrossSection {
        mode: i,
        omega_i: wi,
        time: coeffs.time,
        q: q.to_vec(),
        psi: Vec::with_capacity(n),
        d_psi: Vec::with_capacity(n),
        d2_psi: Vec::with_capacity(n),
        dt_psi: Vec::with_capacity(n),
        transverse_amplitudes,
        transverse_freqs,
        chi_abs: Vec::with_capacity(n),
        log_transverse_norm: log_norm,
        phi: Vec::with_capacity(n),
        d_phi: Vec::with_capacity(n),
        dt_phi: Vec::with_capacity(n),
        transverse_kinetic: Vec::with_capacity(n),
        mask: Vec::with_capacity(n),
    };
    let nan2 = [Complex64::new(f64::NAN, f64::NAN); 2];
    for &x in q {
        let g = gaussian(wi, x);
        let g1 = -wi * x * g / HBAR;
        let g2 = (wi * wi * x * x / (HBAR * HBAR) - wi / HBAR) * g;
        let psi = [a * g, bi * si * x * g];
        let d = [a * g1, bi * si * (g + x * g1)];
        let dd = [a * g2, bi * si * (2.0 * g1 + x * g2)];
        let dt = [a_dot * g, bi_dot * si * x * g];
        let rho = psi[0].norm_sqr() + psi[1].norm_sqr();
        let valid = rho >= MASK_THRESHOLD;
        cs.psi.push(psi);
        cs.d_psi.push(d);
        cs.d2_psi.push(dd);
        cs.dt_psi.push(dt);
        cs.chi_abs.push(rho.sqrt());
        cs.mask.push(valid);
        if !valid {
            cs.phi.push(nan2);
            cs.d_phi.push(nan2);
            cs.dt_phi.push(nan2);
            cs.transverse_kinetic.push(f64::NAN);
            continue;
        }
        let r = rho.sqrt();
        let unit = |v: [Complex64; 2]| {
            let rv = (psi[0].conj() * v[0] + psi[1].conj() * v[1]).re / r;
            [v[0] / r - psi[0] * rv / rho, v[1] / r - psi[1] * rv / rho]
        };
        cs.phi.push([psi[0] / r, psi[1] / r]);
        cs.d_phi.push(unit(d));
        cs.dt_phi.push(unit(dt));
        cs.transverse_kinetic
            .push(psi[0].norm_sqr() * beta_sq * g * g / (rho * rho));
    }
    Ok(cs)
}

/// `|int Phi(q, 0)^dag Phi(q, t) dq|^2` normalized by the squared length of
/// the region valid in both cross-sections.
pub fn autocorr_phi(first: &CrossSection, current: &CrossSection) -> Result<f64> {
    if first.q != current.q {
        return Err(Error::InvalidParams(
            "cross-sections on different grids".into(),
        ));
    }
    let mut s = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for k in 0..first.q.len() {
        if first.mask[k] && current.mask[k] {
            let (u, v) = (first.phi[k], current.phi[k]);
            s += u[0].conj() * v[0] + u[1].conj() * v[1];
            count += 1;
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok((s / count as f64).norm_sqr().min(1.0))
}
