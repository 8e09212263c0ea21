//! Time propagation of the two-component amplitude on a displacement grid.

mod crank_nicolson;
mod split_operator;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ModelParams, QGrid, SpinorField};
use crate::spectral::Spectral;

pub use crank_nicolson::CrankNicolson;
pub use split_operator::SplitOperator;

/// Density allowed on the boundary nodes before a run is aborted.
pub const EDGE_DENSITY_LIMIT: f64 = 1e-10;
/// Allowed drift of the total norm over a run.
pub const NORM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    SplitOperator,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub save_stride: usize,
    pub method: Method,
}

impl PropagatorConfig {
    pub const DEFAULT_DT: f64 = 0.005;

    pub fn new(dt: f64, n_steps: usize, save_stride: usize, method: Method) -> Self {
        Self {
            dt,
            n_steps,
            save_stride,
            method,
        }
    }

    /// Split-operator run over `[0, t_end]` storing about `frames` frames;
    /// the step count is rounded to a whole number of strides.
    pub fn spanning(dt: f64, t_end: f64, frames: usize) -> Self {
        let total = (t_end / dt).round().max(1.0) as usize;
        let stride = (total / frames.max(1)).max(1);
        let n_steps = total.div_ceil(stride) * stride;
        Self::new(dt, n_steps, stride, Method::SplitOperator)
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.save_stride == 0 {
            return Err(Error::InvalidParams(
                "save_stride must be at least 1".into(),
            ));
        }
        let guard = self.dt * params.max_freq();
        if guard >= 0.5 {
            return Err(Error::StabilityGuard(guard));
        }
        Ok(())
    }

    pub fn frame_times(&self) -> Vec<f64> {
        (0..=self.n_steps / self.save_stride)
            .map(|k| (k * self.save_stride) as f64 * self.dt)
            .collect()
    }
}

/// Stored frames of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub frames: Vec<SpinorField>,
    pub config: PropagatorConfig,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    /// Index of the stored frame closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, f) in self.frames.iter().enumerate() {
            if (f.time - t).abs() < (self.frames[best].time - t).abs() {
                best = k;
            }
        }
        best
    }
}

pub(crate) fn check_dimensions(grid: &QGrid, params: &ModelParams) -> Result<()> {
    params.validate()?;
    if grid.dim() != params.n_modes() {
        return Err(Error::DimensionMismatch {
            grid: grid.dim(),
            modes: params.n_modes(),
        });
    }
    Ok(())
}

pub(crate) fn check_frame(frame: &SpinorField, norm0: f64) -> Result<()> {
    let drift = (frame.norm_sqr() - norm0).abs();
    if drift > NORM_TOLERANCE {
        return Err(Error::NormDrift {
            drift,
            time: frame.time,
        });
    }
    let edge = frame.edge_density();
    if edge > EDGE_DENSITY_LIMIT {
        return Err(Error::EdgeDensity {
            density: edge,
            time: frame.time,
        });
    }
    Ok(())
}

pub(crate) fn split(values: &[[Complex64; 2]]) -> (Vec<Complex64>, Vec<Complex64>) {
    values.iter().map(|v| (v[0], v[1])).unzip()
}

pub(crate) fn join(c0: &[Complex64], c1: &[Complex64]) -> Vec<[Complex64; 2]> {
    c0.iter().zip(c1).map(|(a, b)| [*a, *b]).collect()
}

pub fn propagate(
    initial: &SpinorField,
    params: &ModelParams,
    cfg: &PropagatorConfig,
) -> Result<Trajectory> {
    check_dimensions(&initial.grid, params)?;
    cfg.validate(params)?;
    let norm0 = initial.norm_sqr();
    if (norm0 - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NormDrift {
            drift: (norm0 - 1.0).abs(),
            time: initial.time,
        });
    }
    check_frame(initial, norm0)?;
    let grid = initial.grid.clone();
    let (mut c0, mut c1) = split(&initial.values);
    let mut frames = vec![initial.clone()];
    let blocks = cfg.n_steps / cfg.save_stride;
    let t0 = initial.time;
    let mut store = |k: usize, c0: &[Complex64], c1: &[Complex64]| -> Result<()> {
        let frame = SpinorField {
            grid: grid.clone(),
            values: join(c0, c1),
            time: t0 + (k * cfg.save_stride) as f64 * cfg.dt,
        };
        check_frame(&frame, norm0)?;
        frames.push(frame);
        Ok(())
    };
    match cfg.method {
        Method::SplitOperator => {
            let mut so = SplitOperator::new(params, &initial.grid, cfg.dt);
            for k in 1..=blocks {
                so.advance(&mut c0, &mut c1, cfg.save_stride);
                store(k, &c0, &c1)?;
            }
        }
        Method::CrankNicolson => {
            let mut cn = CrankNicolson::new(params, &initial.grid, cfg.dt);
            for k in 1..=blocks {
                cn.advance(&mut c0, &mut c1, cfg.save_stride)?;
                store(k, &c0, &c1)?;
            }
        }
    }
    Ok(Trajectory {
        frames,
        config: *cfg,
    })
}

/// `H psi` with a spectral kinetic term.
pub fn apply_hamiltonian(state: &SpinorField, params: &ModelParams) -> Vec<[Complex64; 2]> {
    let grid = &state.grid;
    let sp = Spectral::new(grid);
    let k2 = sp.k_squared();
    let (mut t0, mut t1) = split(&state.values);
    for c in [&mut t0, &mut t1] {
        sp.forward(c);
        c.iter_mut().zip(&k2).for_each(|(v, k)| *v *= 0.5 * k);
        sp.inverse(c);
    }
    let h = 0.5 * params.omega0;
    grid.points()
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let q = &p[..grid.dim()];
            let v = params.harmonic(q);
            let c = params.coupling_field(q);
            let [a, b] = state.values[j];
            [t0[j] + a * (v + h) + b * c, t1[j] + b * (v - h) + a * c]
        })
        .collect()
}

/// `<psi|H|psi>` on the grid.
pub fn energy_expectation(state: &SpinorField, params: &ModelParams) -> f64 {
    let hpsi = apply_hamiltonian(state, params);
    let s: f64 = state
        .values
        .iter()
        .zip(&hpsi)
        .map(|(a, b)| (a[0].conj() * b[0] + a[1].conj() * b[1]).re)
        .sum();
    s * state.grid.cell_volume()
}
