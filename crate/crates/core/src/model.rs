//! Model Hamiltonian, displacement grids, qBO surfaces and initial states.
//!
//! The Hamiltonian acting on the two-component amplitude is
//!
//! ```text
//! H = (w0/2) sz + sum_a [ -1/2 d_a^2 + 1/2 w_a^2 q_a^2 ] + sum_a w_a (d lambda)_a q_a sx
//! ```
//!
//! Component 0 is the excited level (diagonal energy `+w0/2`), component 1
//! the ground level.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Reduced Planck constant in atomic units.
pub const HBAR: f64 = 1.0;

/// Physical constants of the emitter and its photon modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Two-level splitting.
    pub omega0: f64,
    /// Per-mode products of dipole matrix element and coupling strength.
    pub couplings: Vec<f64>,
    /// Mode frequencies.
    pub mode_freqs: Vec<f64>,
}

impl ModelParams {
    pub fn new(omega0: f64, couplings: Vec<f64>, mode_freqs: Vec<f64>) -> Result<Self> {
        let p = Self {
            omega0,
            couplings,
            mode_freqs,
        };
        p.validate()?;
        Ok(p)
    }

    /// One mode resonant with the emitter.
    pub fn single_mode(omega0: f64, coupling: f64) -> Result<Self> {
        Self::new(omega0, vec![coupling], vec![omega0])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "omega0 must be positive, got {}",
                self.omega0
            )));
        }
        if self.mode_freqs.is_empty() {
            return Err(Error::InvalidParams("at least one mode is required".into()));
        }
        if self.couplings.len() != self.mode_freqs.len() {
            return Err(Error::InvalidParams(format!(
                "{} couplings for {} modes",
                self.couplings.len(),
                self.mode_freqs.len()
            )));
        }
        if let Some(w) = self
            .mode_freqs
            .iter()
            .find(|w| !(**w > 0.0 && w.is_finite()))
        {
            return Err(Error::InvalidParams(format!(
                "mode frequencies must be positive, got {w}"
            )));
        }
        if let Some(c) = self.couplings.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite coupling {c}")));
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        self.mode_freqs.len()
    }

    pub fn max_freq(&self) -> f64 {
        self.mode_freqs.iter().cloned().fold(0.0, f64::max)
    }

    /// Harmonic photon potential `1/2 sum w_a^2 q_a^2`.
    pub fn harmonic(&self, q: &[f64]) -> f64 {
        self.mode_freqs
            .iter()
            .zip(q)
            .map(|(w, q)| 0.5 * w * w * q * q)
            .sum()
    }

    /// Off-diagonal coupling `sum w_a (d lambda)_a q_a`.
    pub fn coupling_field(&self, q: &[f64]) -> f64 {
        self.mode_freqs
            .iter()
            .zip(&self.couplings)
            .zip(q)
            .map(|((w, c), q)| w * c * q)
            .sum()
    }

    /// Rotating-wave (Jaynes-Cummings) coupling of mode `alpha`.
    pub fn jc_coupling(&self, alpha: usize) -> f64 {
        self.couplings[alpha] * (HBAR * self.mode_freqs[alpha] / 2.0).sqrt()
    }

    /// Dense 2x2 qBO Hamiltonian at one displacement.
    pub fn qbo_matrix(&self, q: &[f64]) -> [[f64; 2]; 2] {
        let v = self.harmonic(q);
        let c = self.coupling_field(q);
        let h = 0.5 * self.omega0;
        [[v + h, c], [c, v - h]]
    }
}

/// One uniformly sampled coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub q_min: f64,
    pub q_max: f64,
    pub n_points: usize,
}

impl Axis {
    pub fn new(q_min: f64, q_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 16 {
            return Err(Error::InvalidGrid(format!(
                "need at least 16 points per axis, got {n_points}"
            )));
        }
        if !(q_max > q_min) || !q_min.is_finite() || !q_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "empty or non-finite range [{q_min}, {q_max}]"
            )));
        }
        if (q_max + q_min).abs() > 1e-12 * q_max.abs() {
            return Err(Error::InvalidGrid(format!(
                "axis must be symmetric, got [{q_min}, {q_max}]"
            )));
        }
        Ok(Self {
            q_min,
            q_max,
            n_points,
        })
    }

    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    pub fn spacing(&self) -> f64 {
        (self.q_max - self.q_min) / (self.n_points - 1) as f64
    }

    /// Node coordinates, mirrored so that `q[n-1-j] == -q[j]` bit for bit.
    pub fn coords(&self) -> Vec<f64> {
        let n = self.n_points;
        let h = self.spacing();
        let mut q: Vec<f64> = (0..n).map(|j| self.q_min + j as f64 * h).collect();
        for j in 0..n / 2 {
            q[n - 1 - j] = -q[j];
        }
        if n % 2 == 1 {
            q[n / 2] = 0.0;
        }
        q
    }

    /// Index of the node at `q = 0`, present for odd point counts.
    pub fn center(&self) -> Option<usize> {
        (self.n_points % 2 == 1).then_some(self.n_points / 2)
    }
}

/// A 1-D or 2-D displacement grid. Flat arrays are row-major with the
/// first axis slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct QGrid {
    axes: Vec<Axis>,
}

impl QGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "grids have one or two axes, got {}",
                axes.len()
            )));
        }
        Ok(Self { axes })
    }

    pub fn line(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(vec![Axis::symmetric(half_width, n_points)?])
    }

    pub fn square(half_width: f64, n_points: usize) -> Result<Self> {
        let a = Axis::symmetric(half_width, n_points)?;
        Self::new(vec![a, a])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, d: usize) -> &Axis {
        &self.axes[d]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n_points).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n_points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    /// Coordinates of every node; unused trailing entries are zero.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let c: Vec<Vec<f64>> = self.axes.iter().map(|a| a.coords()).collect();
        match c.len() {
            1 => c[0].iter().map(|&q| [q, 0.0]).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for &q0 in &c[0] {
                    for &q1 in &c[1] {
                        out.push([q0, q1]);
                    }
                }
                out
            }
        }
    }

    /// Flat indices of nodes on the outer boundary.
    pub fn boundary_indices(&self) -> Vec<usize> {
        match self.dim() {
            1 => vec![0, self.len() - 1],
            _ => {
                let (n0, n1) = (self.axes[0].n_points, self.axes[1].n_points);
                let mut idx = Vec::new();
                for i in 0..n0 {
                    for j in 0..n1 {
                        if i == 0 || j == 0 || i == n0 - 1 || j == n1 - 1 {
                            idx.push(i * n1 + j);
                        }
                    }
                }
                idx
            }
        }
    }

    /// Flat index of the origin when every axis has a center node.
    pub fn origin(&self) -> Option<usize> {
        match self.dim() {
            1 => self.axes[0].center(),
            _ => Some(self.axes[0].center()? * self.axes[1].n_points + self.axes[1].center()?),
        }
    }
}

/// Adiabatic (qBO) surfaces and eigenvectors sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QboSurfaces {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub eigvec_lower: Vec<[f64; 2]>,
    pub eigvec_upper: Vec<[f64; 2]>,
}

/// Surfaces and eigenvectors at one displacement, before sign fixing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QboPoint {
    pub lower: f64,
    pub upper: f64,
    pub v_lower: [f64; 2],
    pub v_upper: [f64; 2],
}

pub fn qbo_point(params: &ModelParams, q: &[f64]) -> QboPoint {
    let v = params.harmonic(q);
    let c = params.coupling_field(q);
    let h = 0.5 * params.omega0;
    let r = h.hypot(c);
    let theta = 0.5 * c.atan2(h);
    let (s, co) = theta.sin_cos();
    QboPoint {
        lower: v - r,
        upper: v + r,
        v_lower: [-s, co],
        v_upper: [co, s],
    }
}

pub fn qbo_surfaces(params: &ModelParams, grid: &QGrid) -> Result<QboSurfaces> {
    params.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidGrid("zero-length grid".into()));
    }
    if grid.dim() != params.n_modes() {
        return Err(Error::DimensionMismatch {
            grid: grid.dim(),
            modes: params.n_modes(),
        });
    }
    let pts = grid.points();
    let n = pts.len();
    let mut out = QboSurfaces {
        lower: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
        eigvec_lower: Vec::with_capacity(n),
        eigvec_upper: Vec::with_capacity(n),
    };
    for p in &pts {
        let s = qbo_point(params, &p[..grid.dim()]);
        out.lower.push(s.lower);
        out.upper.push(s.upper);
        out.eigvec_lower.push(s.v_lower);
        out.eigvec_upper.push(s.v_upper);
    }
    fix_signs(&mut out.eigvec_lower, grid);
    fix_signs(&mut out.eigvec_upper, grid);
    Ok(out)
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Seed with a positive leading component at the first node, then require a
/// positive overlap with the preceding node (along the row, or with the row
/// above for the first column).
fn fix_signs(v: &mut [[f64; 2]], grid: &QGrid) {
    let seed = v[0];
    if seed[0] < 0.0 || (seed[0] == 0.0 && seed[1] < 0.0) {
        v[0] = [-seed[0], -seed[1]];
    }
    let n1 = if grid.dim() == 2 {
        grid.axis(1).n_points
    } else {
        grid.len()
    };
    for k in 1..v.len() {
        let prev = if k % n1 == 0 { k - n1 } else { k - 1 };
        if dot2(v[k], v[prev]) < 0.0 {
            v[k] = [-v[k][0], -v[k][1]];
        }
    }
}

/// The two-component amplitude on a grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub grid: QGrid,
    pub values: Vec<[Complex64; 2]>,
    pub time: f64,
}

impl SpinorField {
    pub fn zeros(grid: QGrid, time: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![[Complex64::new(0.0, 0.0); 2]; n],
            time,
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v[0].norm_sqr() + v[1].norm_sqr())
            .collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.density().iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn normalize(&mut self) {
        let s = self.norm_sqr().sqrt();
        for v in &mut self.values {
            v[0] /= s;
            v[1] /= s;
        }
    }

    /// Grid quadrature of `<self|other>`.
    pub fn inner(&self, other: &SpinorField) -> Complex64 {
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a[0].conj() * b[0] + a[1].conj() * b[1])
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn component(&self, k: usize) -> Vec<Complex64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    /// Population of component `k`.
    pub fn population(&self, k: usize) -> f64 {
        self.values.iter().map(|v| v[k].norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Largest density on the outer boundary nodes.
    pub fn edge_density(&self) -> f64 {
        self.grid
            .boundary_indices()
            .into_iter()
            .map(|i| self.values[i][0].norm_sqr() + self.values[i][1].norm_sqr())
            .fold(0.0, f64::max)
    }
}

/// The two prepared initial states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    /// Vacuum times the upper qBO eigenvector at each displacement.
    QboExcited,
    /// Vacuum times the bare excited level.
    FactorizedExcited,
}

/// Normalized photon vacuum `prod_a (w_a/pi)^(1/4) exp(-w_a q_a^2 / 2)`.
pub fn vacuum_amplitude(mode_freqs: &[f64], q: &[f64]) -> f64 {
    mode_freqs
        .iter()
        .zip(q)
        .map(|(w, q)| {
            (w / (std::f64::consts::PI * HBAR)).powf(0.25) * (-0.5 * w * q * q / HBAR).exp()
        })
        .product()
}

pub fn build_initial_state(
    kind: InitialKind,
    params: &ModelParams,
    grid: &QGrid,
) -> Result<SpinorField> {
    let surf = qbo_surfaces(params, grid)?;
    let mut psi = SpinorField::zeros(grid.clone(), 0.0);
    for (k, p) in grid.points().iter().enumerate() {
        let chi = vacuum_amplitude(&params.mode_freqs, &p[..grid.dim()]);
        let v = match kind {
            InitialKind::QboExcited => surf.eigvec_upper[k],
            InitialKind::FactorizedExcited => [1.0, 0.0],
        };
        psi.values[k] = [
            Complex64::new(chi * v[0], 0.0),
            Complex64::new(chi * v[1], 0.0),
        ];
    }
    psi.normalize();
    Ok(psi)
}
