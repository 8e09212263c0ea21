//! Exact factorization `Psi(q) = chi(q) Phi_q` of a solution and the
//! decomposition of the photonic potential surface.
//!
//! The gauge is fixed by integrating the phase gradient
//! `Im(Psi^dag d Psi) / |Psi|^2` from the density maximum. Spatial
//! derivatives are spectral; the phase is integrated on a trigonometric
//! refinement of each grid line so that sharp conditional features (width
//! far below the grid spacing near full emission) are resolved.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{qbo_point, ModelParams, QGrid, QboSurfaces, SpinorField};
use crate::propagator::apply_hamiltonian;
use crate::spectral::{LineUpsampler, Spectral};
use crate::ww::{gaussian, CrossSection};

/// Nodes with `|chi|^2` below this are outside the validity mask.
pub const MASK_THRESHOLD: f64 = 1e-12;
/// Target product of refined spacing and local wavenumber.
const FINE_RESOLUTION: f64 = 0.1;
const MIN_UPSAMPLE: usize = 4;
const MAX_UPSAMPLE: usize = 256;
/// Difference-error estimate at which gauge checks stop refining.
const GAUGE_TARGET: f64 = 1e-10;
/// Refinement stops once `|A|` on a line is below this.
const RESIDUAL_TARGET: f64 = 1e-9;

type C2 = [Complex64; 2];

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn dotc(a: C2, b: C2) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

fn nsq(a: C2) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr()
}

/// Gauge-invariant kinetic pieces along one direction at one point.
#[derive(Debug, Clone, Copy)]
struct Directional {
    /// `|u'|^2 - f^2` with `u = Psi/|Psi|` and `f` the phase gradient.
    grad: f64,
    /// `-Re(u^dag u'') - f^2`.
    direct: f64,
    /// `Im(u^dag u'') - f'`, zero in exact arithmetic.
    imag: f64,
}

fn directional(psi: C2, d: C2, dd: C2) -> Directional {
    let rho = nsq(psi);
    let r = rho.sqrt();
    let g = dotc(psi, d);
    let rp = g.re / r;
    let f = g.im / rho;
    let d_sq = nsq(d);
    let grad = (d_sq - rp * rp) / rho - f * f;
    let gdd = dotc(psi, dd);
    let rpp = (d_sq + gdd.re - rp * rp) / r;
    let mut upp = [zero(); 2];
    for c in 0..2 {
        upp[c] = dd[c] / r - d[c] * (2.0 * rp / rho) - psi[c] * (rpp / rho)
            + psi[c] * (2.0 * rp * rp / (rho * r));
    }
    let u = [psi[0] / r, psi[1] / r];
    let uu = dotc(u, upp);
    let fp = (gdd.im * rho - g.im * 2.0 * g.re) / (rho * rho);
    Directional {
        grad,
        direct: -uu.re - f * f,
        imag: uu.im - fp,
    }
}

/// `d/dt` of `u = Psi/|Psi|`.
fn unit_rate(psi: C2, dt: C2) -> C2 {
    let rho = nsq(psi);
    let r = rho.sqrt();
    let rt = dotc(psi, dt).re / r;
    [
        dt[0] / r - psi[0] * (rt / rho),
        dt[1] / r - psi[1] * (rt / rho),
    ]
}

/// Spectral first and second derivatives per axis at the grid nodes.
struct GridDerivatives {
    d: Vec<Vec<C2>>,
    dd: Vec<Vec<C2>>,
}

fn grid_derivatives(psi: &SpinorField) -> GridDerivatives {
    let sp = Spectral::new(&psi.grid);
    let mut spectra = [psi.component(0), psi.component(1)];
    for s in &mut spectra {
        sp.forward(s);
    }
    let mut d = Vec::new();
    let mut dd = Vec::new();
    for axis in 0..psi.grid.dim() {
        let d0 = sp.derivative_from_spectrum(&spectra[0], axis, 1);
        let d1 = sp.derivative_from_spectrum(&spectra[1], axis, 1);
        let e0 = sp.derivative_from_spectrum(&spectra[0], axis, 2);
        let e1 = sp.derivative_from_spectrum(&spectra[1], axis, 2);
        d.push(d0.into_iter().zip(d1).map(|(a, b)| [a, b]).collect());
        dd.push(e0.into_iter().zip(e1).map(|(a, b)| [a, b]).collect());
    }
    GridDerivatives { d, dd }
}

/// Refinement factor for a line from the largest `|Psi'|/|Psi|` on it.
fn upsample_factor(psi: &[C2], d: &[C2], h: f64) -> usize {
    let mut k: f64 = 0.0;
    for (p, g) in psi.iter().zip(d) {
        let rho = nsq(*p);
        if rho >= MASK_THRESHOLD {
            k = k.max((nsq(*g) / rho).sqrt());
        }
    }
    ((k * h / FINE_RESOLUTION).ceil() as usize).clamp(MIN_UPSAMPLE, MAX_UPSAMPLE)
}

/// Phase and rate integrated along one grid line.
struct LineResult {
    s: Vec<f64>,
    ds_dt: Vec<f64>,
    reached: Vec<bool>,
    residual: Vec<f64>,
    factor: usize,
    fine: Option<FineLine>,
}

/// Refined samples kept for gauge-covariance checks.
struct FineLine {
    h: f64,
    psi: Vec<C2>,
    s: Vec<f64>,
    reached: Vec<bool>,
}

/// Fourth-order central derivative where neighbors are usable, lower order
/// otherwise.
fn fd_derivative(v: &[f64], ok: &[bool], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    for j in 0..n {
        if !ok[j] {
            continue;
        }
        let has = |o: isize| {
            let k = j as isize + o;
            k >= 0 && (k as usize) < n && ok[k as usize]
        };
        out[j] = if has(-2) && has(-1) && has(1) && has(2) {
            (v[j - 2] - 8.0 * v[j - 1] + 8.0 * v[j + 1] - v[j + 2]) / (12.0 * h)
        } else if has(-1) && has(1) {
            (v[j + 1] - v[j - 1]) / (2.0 * h)
        } else if has(1) {
            (v[j + 1] - v[j]) / h
        } else if has(-1) {
            (v[j] - v[j - 1]) / h
        } else {
            0.0
        };
    }
    out
}

/// Hermite-corrected trapezoid integration outward from `start`, stopping
/// at the first invalid node in each direction. With second derivatives the
/// quintic Hermite rule is used.
fn cumulative(
    f: &[f64],
    fp: &[f64],
    fpp: Option<&[f64]>,
    ok: &[bool],
    h: f64,
    start: usize,
    s0: f64,
) -> (Vec<f64>, Vec<bool>) {
    let n = f.len();
    let mut s = vec![f64::NAN; n];
    let mut reached = vec![false; n];
    if !ok[start] {
        return (s, reached);
    }
    s[start] = s0;
    reached[start] = true;
    let piece = |a: usize, b: usize| match fpp {
        Some(fpp) => {
            0.5 * h * (f[a] + f[b])
                + h * h / 10.0 * (fp[a] - fp[b])
                + h * h * h / 120.0 * (fpp[a] + fpp[b])
        }
        None => 0.5 * h * (f[a] + f[b]) + h * h / 12.0 * (fp[a] - fp[b]),
    };
    let mut j = start;
    while j + 1 < n && ok[j + 1] {
        s[j + 1] = s[j] + piece(j, j + 1);
        reached[j + 1] = true;
        j += 1;
    }
    let mut j = start;
    while j > 0 && ok[j - 1] {
        s[j - 1] = s[j] - piece(j - 1, j);
        reached[j - 1] = true;
        j -= 1;
    }
    (s, reached)
}

/// Tenth-order central first-derivative weights.
const FD_WEIGHTS: [f64; 5] = [
    5.0 / 6.0,
    -5.0 / 21.0,
    5.0 / 84.0,
    -5.0 / 504.0,
    1.0 / 1260.0,
];
const FD_REACH: usize = FD_WEIGHTS.len();

fn stencil_fits(j: usize, stride: usize, reached: &[bool]) -> bool {
    let r = FD_REACH * stride;
    j >= r && j + r < reached.len() && (j - r..=j + r).step_by(stride).all(|i| reached[i])
}

/// Stencil stride for the derivative of `v` at fine node `j`: strides double
/// from one refined cell up to one coarse cell and the stride whose estimate
/// agrees best with the next finer one is kept, balancing truncation against
/// roundoff of the interpolant in low-density regions.
fn select_stride(v: &[C2], j: usize, m: usize, hf: f64, reached: &[bool]) -> Option<(usize, f64)> {
    let a = |s: usize| central_diff(v, j, s, hf);
    let mut stride = 1;
    if !stencil_fits(j, stride, reached) {
        return None;
    }
    let mut prev = a(stride);
    let mut best = (f64::INFINITY, stride);
    while 2 * stride <= m && stencil_fits(j, 2 * stride, reached) {
        let cur = a(2 * stride);
        let e = (cur[0] - prev[0]).norm().max((cur[1] - prev[1]).norm());
        if e < best.0 {
            best = (e, stride);
        }
        stride *= 2;
        prev = cur;
    }
    Some((best.1, best.0))
}

/// Central difference at fine node `j` with nodes `stride` apart.
fn central_diff(v: &[C2], j: usize, stride: usize, hf: f64) -> C2 {
    let mut out = [zero(); 2];
    for c in 0..2 {
        let mut acc = zero();
        for (o, w) in FD_WEIGHTS.iter().enumerate() {
            let l = (o + 1) * stride;
            acc += (v[j + l][c] - v[j - l][c]) * *w;
        }
        out[c] = acc / (hf * stride as f64);
    }
    out
}

/// Integrate one line, doubling the refinement until the vector potential
/// left on the line drops below [`RESIDUAL_TARGET`] or stops improving.
#[allow(clippy::too_many_arguments)]
fn integrate_line(
    psi: &[C2],
    d: &[C2],
    rate: Option<&[C2]>,
    h: f64,
    start: usize,
    s0: f64,
    rate0: f64,
    keep_fine: bool,
) -> LineResult {
    let mut m = upsample_factor(psi, d, h);
    let mut best = integrate_line_at(m, psi, rate, h, start, s0, rate0, keep_fine);
    let worst = |r: &LineResult| {
        r.residual
            .iter()
            .filter(|a| a.is_finite())
            .fold(0.0f64, |x, a| x.max(a.abs()))
    };
    let mut err = worst(&best);
    while err > RESIDUAL_TARGET && 2 * m <= MAX_UPSAMPLE {
        m *= 2;
        let next = integrate_line_at(m, psi, rate, h, start, s0, rate0, keep_fine);
        let e = worst(&next);
        if e > 0.5 * err {
            if e < err {
                best = next;
            }
            break;
        }
        best = next;
        err = e;
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn integrate_line_at(
    m: usize,
    psi: &[C2],
    rate: Option<&[C2]>,
    h: f64,
    start: usize,
    s0: f64,
    rate0: f64,
    keep_fine: bool,
) -> LineResult {
    let n = psi.len();
    let up = LineUpsampler::new(n, h, m);
    let hf = up.fine_spacing();
    let fine = |comp: &dyn Fn(&C2) -> Complex64, order: u32, src: &[C2]| {
        let line: Vec<Complex64> = src.iter().map(comp).collect();
        up.evaluate(&up.spectrum(&line), order)
    };
    let join = |a: Vec<Complex64>, b: Vec<Complex64>| -> Vec<C2> {
        a.into_iter().zip(b).map(|(x, y)| [x, y]).collect()
    };
    let c0 = |v: &C2| v[0];
    let c1 = |v: &C2| v[1];
    let pf = join(fine(&c0, 0, psi), fine(&c1, 0, psi));
    let df = join(fine(&c0, 1, psi), fine(&c1, 1, psi));
    let nf = pf.len();
    let rho: Vec<f64> = pf.iter().map(|p| nsq(*p)).collect();
    let ok: Vec<bool> = rho.iter().map(|r| *r >= MASK_THRESHOLD).collect();
    let f: Vec<f64> = (0..nf)
        .map(|j| {
            if ok[j] {
                dotc(pf[j], df[j]).im / rho[j]
            } else {
                0.0
            }
        })
        .collect();
    let ddf = join(fine(&c0, 2, psi), fine(&c1, 2, psi));
    let d3f = join(fine(&c0, 3, psi), fine(&c1, 3, psi));
    let mut fp = vec![0.0; nf];
    let mut fpp = vec![0.0; nf];
    for j in 0..nf {
        if !ok[j] {
            continue;
        }
        let (r, p, d, dd) = (rho[j], pf[j], df[j], ddf[j]);
        let g = dotc(p, d).im;
        let g1 = dotc(p, dd).im;
        let g2 = (dotc(d, dd) + dotc(p, d3f[j])).im;
        let r1 = 2.0 * dotc(p, d).re;
        let r2 = 2.0 * (nsq(d) + dotc(p, dd).re);
        fp[j] = g1 / r - g * r1 / (r * r);
        fpp[j] =
            g2 / r - 2.0 * g1 * r1 / (r * r) - g * r2 / (r * r) + 2.0 * g * r1 * r1 / (r * r * r);
    }
    let (sf, reached_f) = cumulative(&f, &fp, Some(&fpp), &ok, hf, start * m, s0);

    let mut ds_dt = vec![f64::NAN; n];
    if let Some(rt) = rate {
        let tf = join(fine(&c0, 0, rt), fine(&c1, 0, rt));
        let tdf = join(fine(&c0, 1, rt), fine(&c1, 1, rt));
        let ft: Vec<f64> = (0..nf)
            .map(|j| {
                if !ok[j] {
                    return 0.0;
                }
                let g = dotc(pf[j], df[j]).im;
                let gt = (dotc(tf[j], df[j]) + dotc(pf[j], tdf[j])).im;
                let rt = 2.0 * dotc(pf[j], tf[j]).re;
                (gt * rho[j] - g * rt) / (rho[j] * rho[j])
            })
            .collect();
        let ftp = fd_derivative(&ft, &ok, hf);
        let (st, _) = cumulative(&ft, &ftp, None, &ok, hf, start * m, rate0);
        for k in 0..n {
            ds_dt[k] = st[k * m];
        }
    }

    let mut s = vec![f64::NAN; n];
    let mut reached = vec![false; n];
    let mut residual = vec![f64::NAN; n];
    for k in 0..n {
        let j = k * m;
        if !reached_f[j] {
            continue;
        }
        s[k] = sf[j];
        reached[k] = true;
        // A = Im(u^dag u') - S' with the phase slope from central differences
        if stencil_fits(j, 1, &reached_f) {
            let mut ds = 0.0;
            for (o, w) in FD_WEIGHTS.iter().enumerate() {
                ds += (sf[j + o + 1] - sf[j - o - 1]) * w;
            }
            residual[k] = f[j] - ds / hf;
        }
    }
    LineResult {
        s,
        ds_dt,
        reached,
        residual,
        factor: m,
        fine: keep_fine.then(|| FineLine {
            h: hf,
            psi: pf,
            s: sf,
            reached: reached_f,
        }),
    }
}

/// Gauge phase with its integration metadata.
#[derive(Debug, Clone)]
pub struct GaugePhase {
    pub phase: Vec<f64>,
    /// Nodes above the density threshold and reached by the integration path.
    pub mask: Vec<bool>,
    /// Flat index of the density maximum where the phase is pinned to zero.
    pub anchor: usize,
    /// `A` per axis; `NaN` where not evaluated.
    pub residual: Vec<[f64; 2]>,
    /// Largest refinement factor used.
    pub upsample: usize,
    /// 2-D only: largest disagreement, modulo `2 pi`, of the phase between
    /// the two integration orders.
    pub path_residual: f64,
}

fn anchor_index(psi: &SpinorField) -> usize {
    let rho = psi.density();
    let mut best = 0;
    for (k, r) in rho.iter().enumerate() {
        if *r > rho[best] {
            best = k;
        }
    }
    best
}

struct PhaseField {
    s: Vec<f64>,
    ds_dt: Vec<f64>,
    reached: Vec<bool>,
    residual: Vec<[f64; 2]>,
    upsample: usize,
}

fn extract_line(v: &[C2], start: usize, stride: usize, n: usize) -> Vec<C2> {
    (0..n).map(|k| v[start + k * stride]).collect()
}

/// Integrate along `first` axis through the anchor, then along the other
/// axis from that line.
fn phase_2d(
    psi: &SpinorField,
    der: &GridDerivatives,
    rate: Option<&[C2]>,
    anchor: usize,
    first: usize,
) -> PhaseField {
    let grid = &psi.grid;
    let (n0, n1) = (grid.axis(0).n_points, grid.axis(1).n_points);
    let (ai, aj) = (anchor / n1, anchor % n1);
    let len = grid.len();
    let mut field = PhaseField {
        s: vec![f64::NAN; len],
        ds_dt: vec![f64::NAN; len],
        reached: vec![false; len],
        residual: vec![[f64::NAN; 2]; len],
        upsample: 0,
    };
    let second = 1 - first;
    // (start, stride, count, position of anchor along line) for a line along `axis`
    let line_geom = |axis: usize, other_idx: usize| -> (usize, usize, usize) {
        if axis == 0 {
            (other_idx, n1, n0)
        } else {
            (other_idx * n1, 1, n1)
        }
    };
    let h = |axis: usize| grid.axis(axis).spacing();
    let anchor_pos = |axis: usize| if axis == 0 { ai } else { aj };
    let (st, sd, cnt) = line_geom(first, if first == 0 { aj } else { ai });
    let p = extract_line(&psi.values, st, sd, cnt);
    let d = extract_line(&der.d[first], st, sd, cnt);
    let r = rate.map(|r| extract_line(r, st, sd, cnt));
    let base = integrate_line(
        &p,
        &d,
        r.as_deref(),
        h(first),
        anchor_pos(first),
        0.0,
        0.0,
        false,
    );
    field.upsample = base.factor;
    for k in 0..cnt {
        field.residual[st + k * sd][first] = base.residual[k];
    }
    for k in 0..cnt {
        if !base.reached[k] {
            continue;
        }
        let (st2, sd2, cnt2) = line_geom(second, k);
        let p = extract_line(&psi.values, st2, sd2, cnt2);
        let d = extract_line(&der.d[second], st2, sd2, cnt2);
        let r = rate.map(|r| extract_line(r, st2, sd2, cnt2));
        let rate0 = if rate.is_some() { base.ds_dt[k] } else { 0.0 };
        let line = integrate_line(
            &p,
            &d,
            r.as_deref(),
            h(second),
            anchor_pos(second),
            base.s[k],
            rate0,
            false,
        );
        field.upsample = field.upsample.max(line.factor);
        for j in 0..cnt2 {
            let idx = st2 + j * sd2;
            field.s[idx] = line.s[j];
            field.ds_dt[idx] = line.ds_dt[j];
            field.reached[idx] = line.reached[j];
            field.residual[idx][second] = line.residual[j];
        }
    }
    field
}

fn phase_field(
    psi: &SpinorField,
    der: &GridDerivatives,
    rate: Option<&[C2]>,
    anchor: usize,
) -> PhaseField {
    match psi.grid.dim() {
        1 => {
            let h = psi.grid.axis(0).spacing();
            let line = integrate_line(&psi.values, &der.d[0], rate, h, anchor, 0.0, 0.0, false);
            PhaseField {
                s: line.s,
                ds_dt: line.ds_dt,
                reached: line.reached,
                residual: line.residual.iter().map(|a| [*a, f64::NAN]).collect(),
                upsample: line.factor,
            }
        }
        _ => phase_2d(psi, der, rate, anchor, 0),
    }
}

pub fn gauge_phase(psi: &SpinorField) -> Result<GaugePhase> {
    if psi.grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    let der = grid_derivatives(psi);
    let anchor = anchor_index(psi);
    let field = phase_field(psi, &der, None, anchor);
    let rho = psi.density();
    let mask: Vec<bool> = field
        .reached
        .iter()
        .zip(&rho)
        .map(|(r, d)| *r && *d >= MASK_THRESHOLD)
        .collect();
    let mut path_residual = 0.0;
    if psi.grid.dim() == 2 {
        let alt = phase_2d(psi, &der, None, anchor, 1);
        for k in 0..mask.len() {
            if mask[k] && alt.reached[k] {
                let d = (field.s[k] - alt.s[k] + PI).rem_euclid(2.0 * PI) - PI;
                path_residual = f64::max(path_residual, d.abs());
            }
        }
    }
    Ok(GaugePhase {
        phase: field.s,
        mask,
        anchor,
        residual: field.residual,
        upsample: field.upsample,
        path_residual,
    })
}

/// `chi Phi` factorization of one frame in the fixed gauge.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub time: f64,
    pub grid: QGrid,
    pub chi_abs: Vec<f64>,
    pub phase: Vec<f64>,
    pub phi: Vec<C2>,
    /// Vector potential per axis after gauge fixing (`NaN` where not
    /// evaluated). In 2-D only the integration directions are pinned: the
    /// first axis along the anchor line and the second axis everywhere.
    pub tdvp_residual: Vec<[f64; 2]>,
    pub mask: Vec<bool>,
    pub anchor: usize,
    pub upsample: usize,
    pub path_residual: f64,
    psi: SpinorField,
}

pub fn extract_conditional(psi: &SpinorField, gauge: &GaugePhase) -> Result<Factorization> {
    if gauge.phase.len() != psi.values.len() {
        return Err(Error::InvalidParams(
            "phase and amplitude lengths differ".into(),
        ));
    }
    let rho = psi.density();
    let mut phi = Vec::with_capacity(rho.len());
    for k in 0..rho.len() {
        if gauge.mask[k] {
            let w = Complex64::from_polar(1.0 / rho[k].sqrt(), -gauge.phase[k]);
            phi.push([psi.values[k][0] * w, psi.values[k][1] * w]);
        } else {
            phi.push([Complex64::new(f64::NAN, f64::NAN); 2]);
        }
    }
    Ok(Factorization {
        time: psi.time,
        grid: psi.grid.clone(),
        chi_abs: rho.iter().map(|r| r.sqrt()).collect(),
        phase: gauge.phase.clone(),
        phi,
        tdvp_residual: gauge.residual.clone(),
        mask: gauge.mask.clone(),
        anchor: gauge.anchor,
        upsample: gauge.upsample,
        path_residual: gauge.path_residual,
        psi: psi.clone(),
    })
}

/// Gauge phase followed by extraction.
pub fn factorize(psi: &SpinorField) -> Result<Factorization> {
    extract_conditional(psi, &gauge_phase(psi)?)
}

/// Identity checks of one factorization, maxima over the mask.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FactorizationReport {
    pub pnc: f64,
    pub reconstruction: f64,
    pub marginal: f64,
    pub zero_gauge: f64,
    pub norm_deviation: f64,
    pub valid_points: usize,
}

impl Factorization {
    pub fn psi(&self) -> &SpinorField {
        &self.psi
    }

    /// `chi = |chi| e^{iS}` at node `k`.
    pub fn chi(&self, k: usize) -> Complex64 {
        Complex64::from_polar(self.chi_abs[k], self.phase[k])
    }

    pub fn report(&self) -> FactorizationReport {
        let mut r = FactorizationReport::default();
        for k in 0..self.mask.len() {
            if !self.mask[k] {
                continue;
            }
            r.valid_points += 1;
            r.pnc = r.pnc.max((nsq(self.phi[k]) - 1.0).abs());
            let chi = self.chi(k);
            let psi = self.psi.values[k];
            let rec = ((chi * self.phi[k][0] - psi[0]).norm())
                .max((chi * self.phi[k][1] - psi[1]).norm());
            r.reconstruction = r.reconstruction.max(rec);
            r.marginal = r
                .marginal
                .max((self.chi_abs[k] * self.chi_abs[k] - nsq(psi)).abs());
            for a in self.tdvp_residual[k] {
                if a.is_finite() {
                    r.zero_gauge = r.zero_gauge.max(a.abs());
                }
            }
        }
        let total: f64 = self.chi_abs.iter().map(|c| c * c).sum::<f64>() * self.grid.cell_volume();
        r.norm_deviation = (total - 1.0).abs();
        r
    }
}

/// Source of the time derivative entering the gauge-dependent part.
pub enum TimeDerivative<'a> {
    /// `d Psi / dt = -i H Psi` evaluated on the frame itself.
    Hamiltonian(&'a ModelParams),
    /// Central difference of the conditional amplitude over neighboring
    /// frames, re-pinned to the current anchor.
    CentralDifference {
        prev: &'a Factorization,
        next: &'a Factorization,
    },
}

/// The potential surface and its components on one frame.
#[derive(Debug, Clone)]
pub struct SurfaceDecomposition {
    pub time: f64,
    pub eps_wbo: Vec<f64>,
    pub eps_kin: Vec<f64>,
    pub eps_gd: Vec<f64>,
    pub eps_total: Vec<f64>,
    /// The surface evaluated directly from the conditional amplitude and its
    /// second derivatives.
    pub eps_direct: Vec<f64>,
    /// Kinetic part without the factor one half.
    pub eps_kin_unhalved: Vec<f64>,
    pub c1_abs2: Vec<f64>,
    pub c2_abs2: Vec<f64>,
    pub mask: Vec<bool>,
    pub max_closure: f64,
    pub max_imag: f64,
    /// Closure and imaginary parts divided by `max(1, |eps_wbo| + |eps_kin| + |eps_gd|)`
    /// at each node; round-off makes the absolute forms grow with the surface.
    pub max_closure_scaled: f64,
    pub max_imag_scaled: f64,
    pub min_kin: f64,
    pub max_completeness: f64,
}

impl SurfaceDecomposition {
    fn with_len(n: usize, time: f64) -> Self {
        let nan = vec![f64::NAN; n];
        Self {
            time,
            eps_wbo: nan.clone(),
            eps_kin: nan.clone(),
            eps_gd: nan.clone(),
            eps_total: nan.clone(),
            eps_direct: nan.clone(),
            eps_kin_unhalved: nan.clone(),
            c1_abs2: nan.clone(),
            c2_abs2: nan,
            mask: vec![false; n],
            max_closure: 0.0,
            max_imag: 0.0,
            max_closure_scaled: 0.0,
            max_imag_scaled: 0.0,
            min_kin: f64::INFINITY,
            max_completeness: 0.0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn set(
        &mut self,
        k: usize,
        u: C2,
        surf: (f64, f64, [f64; 2], [f64; 2]),
        hqbo: [[f64; 2]; 2],
        grad: f64,
        direct: f64,
        kin_imag: f64,
        gd: f64,
        gd_direct: Complex64,
    ) {
        let (lower, upper, vl, vu) = surf;
        let c1 = (u[0] * vu[0] + u[1] * vu[1]).norm_sqr();
        let c2 = (u[0] * vl[0] + u[1] * vl[1]).norm_sqr();
        let wbo = c1 * upper + c2 * lower;
        let hu = [
            u[0] * hqbo[0][0] + u[1] * hqbo[0][1],
            u[0] * hqbo[1][0] + u[1] * hqbo[1][1],
        ];
        let wbo_direct = dotc(u, hu);
        let total = wbo + 0.5 * grad + gd;
        let direct_total = wbo_direct.re + 0.5 * direct + gd_direct.re;
        self.eps_wbo[k] = wbo;
        self.eps_kin[k] = 0.5 * grad;
        self.eps_kin_unhalved[k] = grad;
        self.eps_gd[k] = gd;
        self.eps_total[k] = total;
        self.eps_direct[k] = direct_total;
        self.c1_abs2[k] = c1;
        self.c2_abs2[k] = c2;
        self.mask[k] = true;
        let closure = (total - direct_total).abs();
        let imag = wbo_direct
            .im
            .abs()
            .max(0.5 * kin_imag.abs())
            .max(gd_direct.im.abs());
        let scale = (wbo.abs() + 0.5 * grad.abs() + gd.abs()).max(1.0);
        self.max_closure = self.max_closure.max(closure);
        self.max_imag = self.max_imag.max(imag);
        self.max_closure_scaled = self.max_closure_scaled.max(closure / scale);
        self.max_imag_scaled = self.max_imag_scaled.max(imag / scale);
        self.min_kin = self.min_kin.min(0.5 * grad);
        self.max_completeness = self.max_completeness.max((c1 + c2 - 1.0).abs());
    }
}

fn aligned_phi(f: &Factorization, anchor: usize) -> Result<Vec<C2>> {
    if !f.mask[anchor] {
        return Err(Error::Undefined(format!(
            "neighboring frame at t = {} is masked at the anchor",
            f.time
        )));
    }
    let w = Complex64::from_polar(1.0, f.phase[anchor]);
    Ok(f.phi.iter().map(|p| [p[0] * w, p[1] * w]).collect())
}

pub fn decompose_tdpes(
    fact: &Factorization,
    deriv: TimeDerivative<'_>,
    surfaces: &QboSurfaces,
    params: &ModelParams,
) -> Result<SurfaceDecomposition> {
    let psi = &fact.psi;
    let n = psi.values.len();
    if surfaces.upper.len() != n {
        return Err(Error::InvalidParams(
            "surfaces and frame lengths differ".into(),
        ));
    }
    let der = grid_derivatives(psi);
    let mut out = SurfaceDecomposition::with_len(n, fact.time);
    let pts = psi.grid.points();
    let dim = psi.grid.dim();

    enum Gd {
        Rate(Vec<C2>, Vec<f64>),
        Fd(Vec<C2>, Vec<C2>, f64),
    }
    let gd_source = match deriv {
        TimeDerivative::Hamiltonian(p) => {
            let hpsi = apply_hamiltonian(psi, p);
            let rate: Vec<C2> = hpsi
                .iter()
                .map(|v| {
                    [
                        v[0] * Complex64::new(0.0, -1.0),
                        v[1] * Complex64::new(0.0, -1.0),
                    ]
                })
                .collect();
            let field = phase_field(psi, &der, Some(&rate), fact.anchor);
            Gd::Rate(rate, field.ds_dt)
        }
        TimeDerivative::CentralDifference { prev, next } => {
            if prev.grid != fact.grid || next.grid != fact.grid {
                return Err(Error::InvalidParams("frames on different grids".into()));
            }
            let span = next.time - prev.time;
            if !(span > 0.0) {
                return Err(Error::InvalidParams(
                    "frames must be ordered in time".into(),
                ));
            }
            Gd::Fd(
                aligned_phi(prev, fact.anchor)?,
                aligned_phi(next, fact.anchor)?,
                span,
            )
        }
    };

    for k in 0..n {
        if !fact.mask[k] {
            continue;
        }
        let p = psi.values[k];
        let mut grad = 0.0;
        let mut direct = 0.0;
        let mut imag: f64 = 0.0;
        for a in 0..dim {
            let t = directional(p, der.d[a][k], der.dd[a][k]);
            grad += t.grad;
            direct += t.direct;
            imag = imag.max(t.imag.abs());
        }
        let r = nsq(p).sqrt();
        let u = [p[0] / r, p[1] / r];
        let (gd, gd_direct) = match &gd_source {
            Gd::Rate(rate, ds_dt) => {
                if !ds_dt[k].is_finite() {
                    continue;
                }
                let gd = dotc(p, rate[k]).im / (r * r) - ds_dt[k];
                let ut = unit_rate(p, rate[k]);
                let val = Complex64::new(0.0, -1.0) * dotc(u, ut) - ds_dt[k] * nsq(u);
                (gd, val)
            }
            Gd::Fd(prev, next, span) => {
                if !(prev[k][0].is_finite() && next[k][0].is_finite()) {
                    continue;
                }
                let dphi = [
                    (next[k][0] - prev[k][0]) / *span,
                    (next[k][1] - prev[k][1]) / *span,
                ];
                let val = Complex64::new(0.0, -1.0) * dotc(fact.phi[k], dphi);
                (val.re, val)
            }
        };
        let q = &pts[k][..dim];
        let s = (
            surfaces.lower[k],
            surfaces.upper[k],
            surfaces.eigvec_lower[k],
            surfaces.eigvec_upper[k],
        );
        out.set(
            k,
            u,
            s,
            params.qbo_matrix(q),
            grad,
            direct,
            imag,
            gd,
            gd_direct,
        );
    }
    Ok(out)
}

/// Largest relative change of the central-difference `eps_gd` between frame
/// spacings `s` and `2 s`; `frames` holds the frames at offsets
/// `-2s, -s, 0, s, 2s`.
pub fn frame_spacing_change(
    frames: [&Factorization; 5],
    surfaces: &QboSurfaces,
    params: &ModelParams,
) -> Result<f64> {
    let fine = decompose_tdpes(
        frames[2],
        TimeDerivative::CentralDifference {
            prev: frames[1],
            next: frames[3],
        },
        surfaces,
        params,
    )?;
    let coarse = decompose_tdpes(
        frames[2],
        TimeDerivative::CentralDifference {
            prev: frames[0],
            next: frames[4],
        },
        surfaces,
        params,
    )?;
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..fine.mask.len() {
        if fine.mask[k] && coarse.mask[k] {
            diff = diff.max((fine.eps_gd[k] - coarse.eps_gd[k]).abs());
            scale = scale.max(fine.eps_gd[k].abs());
        }
    }
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Abort when halving the frame spacing moves `eps_gd` by more than 1 %.
pub fn check_frame_spacing(
    frames: [&Factorization; 5],
    surfaces: &QboSurfaces,
    params: &ModelParams,
) -> Result<f64> {
    let change = frame_spacing_change(frames, surfaces, params)?;
    if change > 0.01 {
        return Err(Error::FrameSpacing(change));
    }
    Ok(change)
}

/// Decomposition along a single-excitation cross-section, where the phase
/// vanishes identically and every derivative is analytic.
pub fn decompose_cross_section(
    cs: &CrossSection,
    omega0: f64,
    coupling: f64,
) -> Result<SurfaceDecomposition> {
    let params = ModelParams::new(omega0, vec![coupling], vec![cs.omega_i])?;
    let n = cs.q.len();
    let mut out = SurfaceDecomposition::with_len(n, cs.time);
    for k in 0..n {
        if !cs.mask[k] {
            continue;
        }
        let p = cs.psi[k];
        let long = directional(p, cs.d_psi[k], cs.d2_psi[k]);
        let gauss = gaussian(cs.omega_i, cs.q[k]);
        let mut direct = long.direct;
        let mut imag = long.imag.abs();
        for (beta, w) in cs.transverse_amplitudes.iter().zip(&cs.transverse_freqs) {
            let d = [zero(), *beta * gauss];
            let dd = [p[0] * -*w, p[1] * -*w];
            let t = directional(p, d, dd);
            direct += t.direct;
            imag = imag.max(t.imag.abs());
        }
        let grad = long.grad + cs.transverse_kinetic[k];
        let r = nsq(p).sqrt();
        let u = [p[0] / r, p[1] / r];
        let gd = dotc(p, cs.dt_psi[k]).im / (r * r);
        let ut = unit_rate(p, cs.dt_psi[k]);
        let gd_direct = Complex64::new(0.0, -1.0) * dotc(u, ut);
        let sp = qbo_point(&params, &[cs.q[k]]);
        out.set(
            k,
            u,
            (sp.lower, sp.upper, sp.v_lower, sp.v_upper),
            params.qbo_matrix(&[cs.q[k]]),
            grad,
            direct,
            imag,
            gd,
            gd_direct,
        );
    }
    Ok(out)
}

/// Outcome of a gauge transformation `Phi -> Phi e^{i theta}`,
/// `chi -> chi e^{-i theta}`; maxima over nodes where the refined
/// neighborhood is valid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaugeReport {
    /// `|A' - A - theta'|` with `theta'` from the same difference stencil.
    pub a_shift_error: f64,
    pub reconstruction_change: f64,
    pub wbo_change: f64,
    /// Pointwise change of `|(-i d - A) Phi|^2 / 2`.
    pub kinetic_change: f64,
    pub checked_points: usize,
}

/// Per-node vector potentials before and after the transformation, for
/// inspection by callers.
#[derive(Debug, Clone)]
pub struct GaugeShift {
    pub q: Vec<f64>,
    pub a_before: Vec<f64>,
    pub a_after: Vec<f64>,
}

pub fn gauge_transform_check(
    fact: &Factorization,
    theta: &dyn Fn(f64) -> f64,
    params: &ModelParams,
) -> Result<(GaugeReport, GaugeShift)> {
    if fact.grid.dim() != 1 {
        return Err(Error::InvalidParams("gauge checks run on 1-D grids".into()));
    }
    let psi = &fact.psi;
    let der = grid_derivatives(psi);
    let axis = fact.grid.axis(0);
    let h = axis.spacing();
    let q = axis.coords();
    let n = q.len();
    let mut m = integrate_line(
        &psi.values,
        &der.d[0],
        None,
        h,
        fact.anchor,
        0.0,
        0.0,
        false,
    )
    .factor;

    // per node: difference-error estimate and the values it belongs to
    let mut best: Vec<Option<(f64, [f64; 3], C2, C2, C2, C2, f64)>> = vec![None; n];
    loop {
        let fine = integrate_line_at(m, &psi.values, None, h, fact.anchor, 0.0, 0.0, true)
            .fine
            .expect("fine line requested");
        let nf = fine.psi.len();
        let th: Vec<f64> = (0..nf)
            .map(|j| theta(axis.q_min + j as f64 * fine.h))
            .collect();
        let phi: Vec<C2> = (0..nf)
            .map(|j| {
                if !fine.reached[j] {
                    return [zero(); 2];
                }
                let w = Complex64::from_polar(1.0 / nsq(fine.psi[j]).sqrt(), -fine.s[j]);
                [fine.psi[j][0] * w, fine.psi[j][1] * w]
            })
            .collect();
        let phi2: Vec<C2> = phi
            .iter()
            .zip(&th)
            .map(|(p, t)| {
                let w = Complex64::from_polar(1.0, *t);
                [p[0] * w, p[1] * w]
            })
            .collect();
        let mut unsettled = false;
        for k in 0..n {
            let j = k * m;
            if !fact.mask[k] {
                continue;
            }
            let Some((stride, err)) = select_stride(&phi, j, m, fine.h, &fine.reached) else {
                continue;
            };
            if best[k].as_ref().is_some_and(|b| b.0 <= err) {
                continue;
            }
            let d1 = central_diff(&phi, j, stride, fine.h);
            let d2 = central_diff(&phi2, j, stride, fine.h);
            let mut tp = 0.0;
            for (o, w) in FD_WEIGHTS.iter().enumerate() {
                let l = (o + 1) * stride;
                tp += (th[j + l] - th[j - l]) * w;
            }
            tp /= fine.h * stride as f64;
            let a = [dotc(phi[j], d1).im, dotc(phi2[j], d2).im, tp];
            best[k] = Some((err, a, phi[j], phi2[j], d1, d2, th[j]));
            unsettled |= err > GAUGE_TARGET;
        }
        if !unsettled || 2 * m > MAX_UPSAMPLE {
            break;
        }
        m *= 2;
    }

    let mut report = GaugeReport::default();
    let mut shift = GaugeShift {
        q: Vec::new(),
        a_before: Vec::new(),
        a_after: Vec::new(),
    };
    for (k, b) in best.into_iter().enumerate() {
        let Some((_, [a1, a2, tp], p1, p2, d1, d2, th)) = b else {
            continue;
        };
        report.a_shift_error = report.a_shift_error.max((a2 - a1 - tp).abs());
        // chi' Phi' against chi Phi
        let chi = fact.chi(k);
        let chi2 = chi * Complex64::from_polar(1.0, -th);
        let rec = (chi2 * p2[0] - chi * p1[0])
            .norm()
            .max((chi2 * p2[1] - chi * p1[1]).norm());
        report.reconstruction_change = report.reconstruction_change.max(rec);
        let hq = params.qbo_matrix(&[q[k]]);
        let e = |u: C2| {
            let hu = [
                u[0] * hq[0][0] + u[1] * hq[0][1],
                u[0] * hq[1][0] + u[1] * hq[1][1],
            ];
            dotc(u, hu).re
        };
        report.wbo_change = report.wbo_change.max((e(p2) - e(p1)).abs());
        let kin = |u: C2, du: C2, a: f64| {
            let v = [
                du[0] - Complex64::new(0.0, a) * u[0],
                du[1] - Complex64::new(0.0, a) * u[1],
            ];
            0.5 * nsq(v)
        };
        report.kinetic_change = report
            .kinetic_change
            .max((kin(p2, d2, a2) - kin(p1, d1, a1)).abs());
        report.checked_points += 1;
        shift.q.push(q[k]);
        shift.a_before.push(a1);
        shift.a_after.push(a2);
    }
    Ok((report, shift))
}
