//! Derived quantities: autocorrelations, populations, photon numbers, field
//! expectation and Born-Huang coefficient profiles.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::factorization::Factorization;
use crate::model::{ModelParams, QGrid, QboSurfaces, SpinorField, HBAR};
use crate::propagator::Trajectory;
use crate::spectral::Spectral;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParams(format!(
                "{} times against {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("times must increase strictly".into()));
        }
        Ok(Self {
            name: name.into(),
            times,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time of the first interior local maximum above `threshold` reached
    /// after the series has dropped below it, i.e. the first revival.
    pub fn first_revival(&self, threshold: f64) -> Option<f64> {
        let v = &self.values;
        let start = v.iter().position(|x| *x < threshold)?;
        (start.max(1)..v.len().saturating_sub(1))
            .find(|&k| v[k] > threshold && v[k] >= v[k - 1] && v[k] > v[k + 1])
            .map(|k| self.times[k])
    }
}

/// `A_Psi(t) = |<Psi(0)|Psi(t)>|^2`.
pub fn autocorr_psi(traj: &Trajectory) -> Result<TimeSeries> {
    let first = traj
        .frames
        .first()
        .ok_or_else(|| Error::InvalidParams("empty trajectory".into()))?;
    let values = traj
        .frames
        .iter()
        .map(|f| first.inner(f).norm_sqr().min(1.0))
        .collect();
    TimeSeries::new("A_psi", traj.times(), values)
}

/// `|int Phi(q,0)^dag Phi(q,t) dq|^2` over the whole grid, normalized by the
/// squared measure of the region valid in both frames.
pub fn autocorr_phi_pair(first: &Factorization, current: &Factorization) -> Result<f64> {
    if first.grid != current.grid {
        return Err(Error::InvalidParams("frames on different grids".into()));
    }
    let mut s = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for k in 0..first.mask.len() {
        if first.mask[k] && current.mask[k] {
            let (a, b) = (first.phi[k], current.phi[k]);
            s += a[0].conj() * b[0] + a[1].conj() * b[1];
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Undefined(format!(
            "no common valid region at t = {}",
            current.time
        )));
    }
    Ok((s.norm() / count as f64).powi(2).min(1.0))
}

pub fn autocorr_phi_grid(facts: &[Factorization]) -> Result<TimeSeries> {
    let first = facts
        .first()
        .ok_or_else(|| Error::InvalidParams("no frames".into()))?;
    let values = facts
        .iter()
        .map(|f| autocorr_phi_pair(first, f))
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::new("A_phi", facts.iter().map(|f| f.time).collect(), values)
}

/// Per-mode field amplitude `w_a (d lambda)_a <q_a>` from the photonic
/// density; in units of the inverse dipole matrix element.
pub fn electric_field(grid: &QGrid, density: &[f64], params: &ModelParams) -> Vec<f64> {
    let pts = grid.points();
    let dv = grid.cell_volume();
    (0..params.n_modes())
        .map(|a| {
            let mean: f64 = pts.iter().zip(density).map(|(p, r)| p[a] * r).sum::<f64>() * dv;
            params.mode_freqs[a] * params.couplings[a] * mean
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Populations {
    pub excited_pop: f64,
    pub photon_numbers: Vec<f64>,
}

impl Populations {
    pub fn total_photons(&self) -> f64 {
        self.photon_numbers.iter().sum()
    }
}

/// Level population and `<(p^2/w + w q^2)/2> / hbar - 1/2` per mode with
/// spectral momenta.
pub fn populations_and_photons(frame: &SpinorField, params: &ModelParams) -> Populations {
    let grid = &frame.grid;
    let dv = grid.cell_volume();
    let sp = Spectral::new(grid);
    let pts = grid.points();
    let rho = frame.density();
    let comps = [frame.component(0), frame.component(1)];
    let photon_numbers = (0..params.n_modes())
        .map(|a| {
            let w = params.mode_freqs[a];
            let mut p2 = 0.0;
            for c in &comps {
                p2 += sp
                    .derivative(c, a, 1)
                    .iter()
                    .map(|d| d.norm_sqr())
                    .sum::<f64>();
            }
            let q2: f64 = pts.iter().zip(&rho).map(|(p, r)| p[a] * p[a] * r).sum();
            0.5 * (HBAR * HBAR * p2 * dv / w + w * q2 * dv) / HBAR - 0.5
        })
        .collect();
    Populations {
        excited_pop: frame.population(0),
        photon_numbers,
    }
}

/// `|C1|^2` (upper) and `|C2|^2` (lower) on the mask, `NaN` elsewhere.
pub fn bo_coefficient_profiles(
    fact: &Factorization,
    surfaces: &QboSurfaces,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = fact.phi.len();
    if surfaces.upper.len() != n {
        return Err(Error::InvalidParams(
            "surfaces and frame lengths differ".into(),
        ));
    }
    let mut c1 = vec![f64::NAN; n];
    let mut c2 = vec![f64::NAN; n];
    for k in 0..n {
        if !fact.mask[k] {
            continue;
        }
        let p = fact.phi[k];
        let (u, l) = (surfaces.eigvec_upper[k], surfaces.eigvec_lower[k]);
        c1[k] = (p[0] * u[0] + p[1] * u[1]).norm_sqr();
        c2[k] = (p[0] * l[0] + p[1] * l[1]).norm_sqr();
    }
    Ok((c1, c2))
}
