//! Dense number-basis representation of the model, used as an independent
//! reference for the grid propagators.
//!
//! Basis index layout: `level * P + photon`, with `level = 0` the excited
//! level, `P = (n_max + 1)^modes` and the photon index row-major over modes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermite::ho_eigenfunctions;
use crate::model::{ModelParams, QGrid, SpinorField, HBAR};
use crate::propagator::{check_dimensions, PropagatorConfig, Trajectory};

/// Population allowed in the two highest photon levels.
pub const CUTOFF_TOLERANCE: f64 = 1e-10;

/// Truncated displacement operator `(a + a^dag) / sqrt(2 w)`.
fn displacement(omega: f64, n_max: usize) -> DMatrix<f64> {
    let n = n_max + 1;
    let s = (HBAR / (2.0 * omega)).sqrt();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j + 1 {
            (i as f64).sqrt() * s
        } else if j == i + 1 {
            (j as f64).sqrt() * s
        } else {
            0.0
        }
    })
}

pub struct FockOracle {
    params: ModelParams,
    n_max: usize,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl FockOracle {
    pub fn new(params: &ModelParams, n_max: usize) -> Result<Self> {
        params.validate()?;
        if n_max < 10 {
            return Err(Error::InvalidParams(format!(
                "n_max must be at least 10, got {n_max}"
            )));
        }
        if params.n_modes() > 2 {
            return Err(Error::InvalidParams(
                "the number-basis oracle supports one or two modes".into(),
            ));
        }
        let h = Self::hamiltonian(params, n_max);
        let eig = SymmetricEigen::new(h);
        Ok(Self {
            params: params.clone(),
            n_max,
            eigvals: eig.eigenvalues,
            eigvecs: eig.eigenvectors,
        })
    }

    fn photon_dim(&self) -> usize {
        (self.n_max + 1).pow(self.params.n_modes() as u32)
    }

    pub fn dim(&self) -> usize {
        2 * self.photon_dim()
    }

    /// Occupation of every mode for a photon index.
    fn occupations(n_max: usize, modes: usize, idx: usize) -> Vec<usize> {
        let n = n_max + 1;
        match modes {
            1 => vec![idx],
            _ => vec![idx / n, idx % n],
        }
    }

    pub fn hamiltonian(params: &ModelParams, n_max: usize) -> DMatrix<f64> {
        let modes = params.n_modes();
        let n = n_max + 1;
        let p = n.pow(modes as u32);
        let mut h = DMatrix::zeros(2 * p, 2 * p);
        let xs: Vec<DMatrix<f64>> = params
            .mode_freqs
            .iter()
            .map(|&w| displacement(w, n_max))
            .collect();
        for i in 0..p {
            let occ_i = Self::occupations(n_max, modes, i);
            let e_ph: f64 = occ_i
                .iter()
                .zip(&params.mode_freqs)
                .map(|(&k, w)| w * (k as f64 + 0.5))
                .sum();
            h[(i, i)] = e_ph + 0.5 * params.omega0;
            h[(p + i, p + i)] = e_ph - 0.5 * params.omega0;
            for j in 0..p {
                let occ_j = Self::occupations(n_max, modes, j);
                let mut c = 0.0;
                for a in 0..modes {
                    let others_equal = (0..modes).all(|b| b == a || occ_i[b] == occ_j[b]);
                    if others_equal {
                        c += params.mode_freqs[a]
                            * params.couplings[a]
                            * xs[a][(occ_i[a], occ_j[a])];
                    }
                }
                h[(i, p + j)] = c;
                h[(p + i, j)] = c;
            }
        }
        h
    }

    pub fn evolve(&self, c0: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        let u = self.eigvecs.map(|x| Complex64::new(x, 0.0));
        let mut d = u.adjoint() * c0;
        for (k, v) in d.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, -self.eigvals[k] * t / HBAR);
        }
        u * d
    }

    fn basis_functions(&self, grid: &QGrid) -> Vec<Vec<Vec<f64>>> {
        grid.axes()
            .iter()
            .zip(&self.params.mode_freqs)
            .map(|(a, &w)| ho_eigenfunctions(w, self.n_max, &a.coords()))
            .collect()
    }

    /// Quadrature projection of a grid amplitude onto the basis.
    pub fn project(&self, state: &SpinorField) -> Result<DVector<Complex64>> {
        check_dimensions(&state.grid, &self.params)?;
        let phi = self.basis_functions(&state.grid);
        let p = self.photon_dim();
        let dv = state.grid.cell_volume();
        let n = self.n_max + 1;
        let mut c = DVector::zeros(2 * p);
        for s in 0..2 {
            match state.grid.dim() {
                1 => {
                    for k in 0..n {
                        let v: Complex64 = state
                            .values
                            .iter()
                            .zip(&phi[0][k])
                            .map(|(x, f)| x[s] * f)
                            .sum();
                        c[s * p + k] = v * dv;
                    }
                }
                _ => {
                    let (n0, n1) = (state.grid.axis(0).n_points, state.grid.axis(1).n_points);
                    // Contract the second axis first.
                    let mut partial = vec![Complex64::new(0.0, 0.0); n0 * n];
                    for i in 0..n0 {
                        for k in 0..n {
                            partial[i * n + k] = (0..n1)
                                .map(|j| state.values[i * n1 + j][s] * phi[1][k][j])
                                .sum();
                        }
                    }
                    for k0 in 0..n {
                        for k1 in 0..n {
                            let v: Complex64 =
                                (0..n0).map(|i| partial[i * n + k1] * phi[0][k0][i]).sum();
                            c[s * p + k0 * n + k1] = v * dv;
                        }
                    }
                }
            }
        }
        Ok(c)
    }

    /// Synthesize the grid amplitude of a coefficient vector.
    pub fn to_grid(&self, c: &DVector<Complex64>, grid: &QGrid, time: f64) -> Result<SpinorField> {
        check_dimensions(grid, &self.params)?;
        let phi = self.basis_functions(grid);
        let p = self.photon_dim();
        let n = self.n_max + 1;
        let mut out = SpinorField::zeros(grid.clone(), time);
        for s in 0..2 {
            match grid.dim() {
                1 => {
                    for (j, v) in out.values.iter_mut().enumerate() {
                        v[s] = (0..n).map(|k| c[s * p + k] * phi[0][k][j]).sum();
                    }
                }
                _ => {
                    let (n0, n1) = (grid.axis(0).n_points, grid.axis(1).n_points);
                    let mut partial = vec![Complex64::new(0.0, 0.0); n0 * n];
                    for i in 0..n0 {
                        for k1 in 0..n {
                            partial[i * n + k1] = (0..n)
                                .map(|k0| c[s * p + k0 * n + k1] * phi[0][k0][i])
                                .sum();
                        }
                    }
                    for i in 0..n0 {
                        for j in 0..n1 {
                            out.values[i * n1 + j][s] =
                                (0..n).map(|k1| partial[i * n + k1] * phi[1][k1][j]).sum();
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Population in the two highest levels of any mode.
    pub fn top_population(&self, c: &DVector<Complex64>) -> f64 {
        let p = self.photon_dim();
        let modes = self.params.n_modes();
        (0..2 * p)
            .filter(|&i| {
                Self::occupations(self.n_max, modes, i % p)
                    .iter()
                    .any(|&k| k + 1 >= self.n_max)
            })
            .map(|i| c[i].norm_sqr())
            .sum()
    }

    pub fn excited_population(&self, c: &DVector<Complex64>) -> f64 {
        (0..self.photon_dim()).map(|i| c[i].norm_sqr()).sum()
    }

    pub fn photon_numbers(&self, c: &DVector<Complex64>) -> Vec<f64> {
        let p = self.photon_dim();
        let modes = self.params.n_modes();
        let mut out = vec![0.0; modes];
        for i in 0..2 * p {
            let occ = Self::occupations(self.n_max, modes, i % p);
            for a in 0..modes {
                out[a] += occ[a] as f64 * c[i].norm_sqr();
            }
        }
        out
    }

    /// `<q_a>` per mode.
    pub fn displacement_expectation(&self, c: &DVector<Complex64>) -> Vec<f64> {
        let p = self.photon_dim();
        let modes = self.params.n_modes();
        let n = self.n_max + 1;
        let mut out = vec![0.0; modes];
        for a in 0..modes {
            let x = displacement(self.params.mode_freqs[a], self.n_max);
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..2 {
                for i in 0..p {
                    let occ = Self::occupations(self.n_max, modes, i);
                    if occ[a] + 1 >= n {
                        continue;
                    }
                    // j differs from i by one quantum in mode a.
                    let j = if modes == 1 {
                        i + 1
                    } else if a == 0 {
                        i + n
                    } else {
                        i + 1
                    };
                    let m = x[(occ[a], occ[a] + 1)];
                    acc += c[s * p + i].conj() * c[s * p + j] * m * 2.0;
                }
            }
            out[a] = acc.re;
        }
        out
    }

    pub fn energy(&self, c: &DVector<Complex64>) -> f64 {
        let u = self.eigvecs.map(|x| Complex64::new(x, 0.0));
        let d = u.adjoint() * c;
        d.iter()
            .zip(self.eigvals.iter())
            .map(|(v, e)| v.norm_sqr() * e)
            .sum()
    }

    /// Vacuum times the bare excited level.
    pub fn factorized_excited(&self) -> DVector<Complex64> {
        let mut c = DVector::zeros(self.dim());
        c[0] = Complex64::new(1.0, 0.0);
        c
    }

    /// Vacuum times the upper qBO eigenvector, built as functions of the
    /// truncated displacement operators acting on the vacuum.
    pub fn qbo_excited(&self) -> DVector<Complex64> {
        let modes = self.params.n_modes();
        let p = self.photon_dim();
        let eigs: Vec<SymmetricEigen<f64, nalgebra::Dyn>> = self
            .params
            .mode_freqs
            .iter()
            .map(|&w| SymmetricEigen::new(displacement(w, self.n_max)))
            .collect();
        let mut c = DVector::zeros(2 * p);
        let h = 0.5 * self.params.omega0;
        for kidx in 0..p {
            let ks = Self::occupations(self.n_max, modes, kidx);
            let x: Vec<f64> = (0..modes).map(|a| eigs[a].eigenvalues[ks[a]]).collect();
            let weight: f64 = (0..modes)
                .map(|a| eigs[a].eigenvectors[(0, ks[a])])
                .product();
            let theta = 0.5 * self.params.coupling_field(&x).atan2(h);
            let f = [theta.cos(), theta.sin()];
            for nidx in 0..p {
                let ns = Self::occupations(self.n_max, modes, nidx);
                let w: f64 = (0..modes)
                    .map(|a| eigs[a].eigenvectors[(ns[a], ks[a])])
                    .product();
                for s in 0..2 {
                    c[s * p + nidx] += Complex64::new(w * weight * f[s], 0.0);
                }
            }
        }
        let norm = c.norm();
        c / Complex64::new(norm, 0.0)
    }
}

/// Propagate in the number basis and map every stored frame back onto the
/// grid of `initial`.
pub fn fock_oracle_propagate(
    initial: &SpinorField,
    params: &ModelParams,
    cfg: &PropagatorConfig,
    n_max: usize,
) -> Result<Trajectory> {
    cfg.validate(params)?;
    let oracle = FockOracle::new(params, n_max)?;
    let c0 = oracle.project(initial)?;
    let mut frames = Vec::new();
    for t in cfg.frame_times() {
        let c = oracle.evolve(&c0, t);
        let top = oracle.top_population(&c);
        if top > CUTOFF_TOLERANCE {
            return Err(Error::CutoffTooSmall { population: top });
        }
        frames.push(oracle.to_grid(&c, &initial.grid, initial.time + t)?);
    }
    Ok(Trajectory {
        frames,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_initial_state, InitialKind};

    #[test]
    fn decoupled_vacuum_has_no_photons() {
        let p = ModelParams::single_mode(0.4, 0.0).unwrap();
        let o = FockOracle::new(&p, 12).unwrap();
        let c = o.evolve(&o.factorized_excited(), 123.0);
        assert!(o.photon_numbers(&c)[0].abs() < 1e-14);
        assert!((o.excited_population(&c) - 1.0).abs() < 1e-13);
        assert!((o.energy(&c) - 0.4).abs() < 1e-13);
    }

    #[test]
    fn grid_roundtrip() {
        let p = ModelParams::single_mode(0.4, 0.4).unwrap();
        let g = QGrid::line(20.0, 513).unwrap();
        let psi = build_initial_state(InitialKind::QboExcited, &p, &g).unwrap();
        let o = FockOracle::new(&p, 40).unwrap();
        let c = o.project(&psi).unwrap();
        let back = o.to_grid(&c, &g, 0.0).unwrap();
        let loss = 1.0 - psi.inner(&back).norm_sqr();
        // The qBO angle has complex singularities near the real axis, so
        // the number-basis tail decays slowly.
        assert!(loss < 1e-7, "{loss}");
        let f = build_initial_state(InitialKind::FactorizedExcited, &p, &g).unwrap();
        let back = o.to_grid(&o.project(&f).unwrap(), &g, 0.0).unwrap();
        assert!(1.0 - f.inner(&back).norm_sqr() < 1e-13);
    }

    #[test]
    fn qbo_state_matches_grid_construction() {
        let p = ModelParams::single_mode(0.4, 0.4).unwrap();
        let g = QGrid::line(20.0, 513).unwrap();
        let o = FockOracle::new(&p, 40).unwrap();
        let grid_q = build_initial_state(InitialKind::QboExcited, &p, &g).unwrap();
        let grid_f = build_initial_state(InitialKind::FactorizedExcited, &p, &g).unwrap();
        let ov_grid = grid_f.inner(&grid_q).norm_sqr();
        let fq = o.qbo_excited();
        let ov_fock = o.factorized_excited().dotc(&fq).norm_sqr();
        assert!(ov_grid < 1.0 - 1e-3);
        assert!((ov_grid - ov_fock).abs() < 1e-6, "{ov_grid} {ov_fock}");
        let mapped = o.to_grid(&fq, &g, 0.0).unwrap();
        let loss = 1.0 - grid_q.inner(&mapped).norm_sqr();
        assert!(loss < 1e-6, "{loss}");
    }

    #[test]
    fn half_rabi_period_emits_one_photon() {
        let p = ModelParams::single_mode(0.4, 0.01).unwrap();
        let o = FockOracle::new(&p, 10).unwrap();
        let g = p.jc_coupling(0);
        let period = std::f64::consts::PI / g;
        let c = o.evolve(&o.factorized_excited(), 0.5 * period);
        assert!((o.photon_numbers(&c)[0] - 1.0).abs() < 5e-2);
        let c = o.evolve(&o.factorized_excited(), period);
        assert!(o.excited_population(&c) > 0.95);
    }

    #[test]
    fn two_mode_hamiltonian_is_symmetric_and_couples_one_quantum() {
        let p = ModelParams::new(0.4, vec![0.1, 0.2], vec![0.4, 0.5]).unwrap();
        let h = FockOracle::hamiltonian(&p, 10);
        assert_eq!(h.nrows(), 2 * 121);
        assert!((&h - h.transpose()).abs().max() == 0.0);
        // excited vacuum couples to ground with one photon in either mode
        let pd = 121;
        let x1 = 0.4 * 0.1 * (1.0 / 0.8f64).sqrt();
        let x2 = 0.5 * 0.2 * (1.0 / 1.0f64).sqrt();
        assert!((h[(0, pd + 11)] - x1).abs() < 1e-15);
        assert!((h[(0, pd + 1)] - x2).abs() < 1e-15);
        assert_eq!(h[(0, pd + 12)], 0.0);
    }

    #[test]
    fn small_cutoff_is_detected() {
        let p = ModelParams::single_mode(0.4, 0.4).unwrap();
        let g = QGrid::line(20.0, 257).unwrap();
        let psi = build_initial_state(InitialKind::FactorizedExcited, &p, &g).unwrap();
        let cfg = PropagatorConfig::new(0.05, 2000, 200, crate::propagator::Method::SplitOperator);
        assert!(matches!(
            fock_oracle_propagate(&psi, &p, &cfg, 10),
            Err(Error::CutoffTooSmall { .. })
        ));
    }
}
