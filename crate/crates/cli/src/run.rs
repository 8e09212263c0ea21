//! Run orchestration for grid and single-excitation pipelines.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cavity_ef::factorization::{
    decompose_cross_section, decompose_tdpes, factorize, frame_spacing_change, Factorization,
    SurfaceDecomposition, TimeDerivative,
};
use cavity_ef::model::{qbo_point, Axis};
use cavity_ef::observables::{autocorr_phi_pair, electric_field, populations_and_photons};
use cavity_ef::ww::{
    autocorr_phi, cross_section_state, ww_closed_form, ww_ode_integrate, WWModeSet,
};
use cavity_ef::{
    build_initial_state, energy_expectation, propagate, qbo_surfaces, InitialKind, Method,
    ModelParams, PropagatorConfig, QGrid, QboSurfaces,
};

use crate::config::{
    Coefficients, InitialState, MethodName, Mode, Resolved, RunConfig, TimeDerivativeName,
};
use crate::error::{Result, RunError};
use crate::output::{
    snapshot_csv, snapshot_name, write_manifest, Manifest, Table, AUTOCORR_HEADER, DEBUG_HEADER,
    POPULATIONS_HEADER,
};

/// Invariant limits; a breach is recorded and makes the run exit with 3.
pub mod limits {
    pub const ENERGY_DRIFT: f64 = 1e-6;
    pub const PNC: f64 = 1e-10;
    pub const RECONSTRUCTION: f64 = 1e-12;
    pub const ZERO_GAUGE: f64 = 1e-8;
    /// Closure and imaginary parts are compared per node after dividing by
    /// the local surface magnitude (at least 1).
    pub const CLOSURE: f64 = 1e-6;
    pub const IMAG: f64 = 1e-10;
    pub const FRAME_SPACING: f64 = 1e-2;
}

/// Everything a finished run produced besides its files.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub resolved: Resolved,
    pub times: Vec<f64>,
    pub a_psi: Vec<f64>,
    pub a_phi: Vec<f64>,
    pub excited_pop: Vec<f64>,
    pub photon_number: Vec<f64>,
    pub e_field: Vec<f64>,
    pub diagnostics: BTreeMap<String, f64>,
    pub violations: Vec<String>,
    pub files: Vec<String>,
}

impl RunSummary {
    pub fn diagnostic(&self, key: &str) -> f64 {
        self.diagnostics.get(key).copied().unwrap_or(f64::NAN)
    }
}

/// Run `config`, writing into `output` or the configured directory.
///
/// Breached invariants are listed in the summary after all files are
/// written; errors raised while propagating still leave a manifest behind.
pub fn run(config: &RunConfig, output: Option<&Path>) -> Result<RunSummary> {
    let (resolved, defaults) = config.resolve()?;
    let dir = output.map_or_else(
        || PathBuf::from(&resolved.run.output_dir),
        Path::to_path_buf,
    );
    fs::create_dir_all(&dir)?;
    let result = match resolved.run.mode {
        Mode::WignerWeisskopf => run_ww(&resolved, &dir),
        _ => run_grid(&resolved, &dir),
    };
    match result {
        Ok(mut s) => {
            write_manifest(
                &dir,
                &Manifest {
                    status: if s.violations.is_empty() {
                        "ok"
                    } else {
                        "violation"
                    },
                    violations: &s.violations,
                    defaults_applied: &defaults,
                    files: &s.files,
                    diagnostics: &s.diagnostics,
                    config: &resolved,
                },
            )?;
            s.files.push("manifest.toml".into());
            Ok(s)
        }
        Err(e) => {
            write_manifest(
                &dir,
                &Manifest {
                    status: "failed",
                    violations: &[e.to_string()],
                    defaults_applied: &defaults,
                    files: &[],
                    diagnostics: &BTreeMap::new(),
                    config: &resolved,
                },
            )?;
            Err(e)
        }
    }
}

/// Map `f` over `0..n` on scoped threads, keeping the order.
fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |w| w.get())
        .min(n.max(1));
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        for (w, chunk) in slots.chunks_mut(n.div_ceil(workers).max(1)).enumerate() {
            let f = &f;
            let start = w * n.div_ceil(workers).max(1);
            s.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(start + i));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every slot filled"))
        .collect()
}

#[derive(Default)]
struct Extremes(BTreeMap<String, f64>);

impl Extremes {
    fn max(&mut self, key: &str, v: f64) {
        let e = self.0.entry(key.to_string()).or_insert(f64::NEG_INFINITY);
        if v > *e {
            *e = v;
        }
    }

    fn min(&mut self, key: &str, v: f64) {
        let e = self.0.entry(key.to_string()).or_insert(f64::INFINITY);
        if v < *e {
            *e = v;
        }
    }
}

fn check(violations: &mut Vec<String>, d: &BTreeMap<String, f64>, key: &str, limit: f64) {
    if let Some(v) = d.get(key) {
        if !(*v <= limit) {
            violations.push(format!("{key} = {v:.3e} exceeds {limit:.0e}"));
        }
    }
}

/// Rows of the snapshot and debug files for one frame.
struct Snapshot {
    columns: [Vec<f64>; 10],
    mask: Vec<bool>,
    debug: Option<[Vec<f64>; 4]>,
}

fn surface_columns(
    q: Vec<f64>,
    chi_abs2: Vec<f64>,
    dec: &SurfaceDecomposition,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: &[usize],
) -> [Vec<f64>; 10] {
    let pick = |v: &[f64]| rows.iter().map(|&k| v[k]).collect::<Vec<_>>();
    [
        q,
        chi_abs2,
        pick(&dec.c1_abs2),
        pick(&dec.c2_abs2),
        pick(&dec.eps_wbo),
        pick(&dec.eps_kin),
        pick(&dec.eps_gd),
        pick(&dec.eps_total),
        lower,
        upper,
    ]
}

struct FrameStats {
    a_phi: f64,
    pnc: f64,
    reconstruction: f64,
    marginal: f64,
    zero_gauge: f64,
    closure: [f64; 2],
    imag: [f64; 2],
    min_kin: f64,
    completeness: f64,
    path_residual: f64,
    upsample: usize,
    c2_origin: f64,
    surface_identity: f64,
    snapshot: Option<Snapshot>,
}

struct GridContext<'a> {
    params: &'a ModelParams,
    surfaces: &'a QboSurfaces,
    grid: &'a QGrid,
    /// Flat indices of the rows written to snapshots.
    rows: Vec<usize>,
    debug: bool,
}

impl GridContext<'_> {
    fn stats(
        &self,
        k: usize,
        fact: &Factorization,
        first: &Factorization,
        deriv: TimeDerivative<'_>,
        snapshot: bool,
    ) -> Result<FrameStats> {
        let rep = fact.report();
        let dec = decompose_tdpes(fact, deriv, self.surfaces, self.params)?;
        let origin = self.grid.origin();
        let c2_origin = origin.map_or(f64::NAN, |o| {
            if dec.mask[o] {
                dec.c2_abs2[o].sqrt()
            } else {
                f64::NAN
            }
        });
        let surface_identity = if k == 0 {
            (0..dec.mask.len())
                .filter(|&i| dec.mask[i])
                .map(|i| (dec.eps_wbo[i] - self.surfaces.upper[i]).abs())
                .fold(0.0, f64::max)
        } else {
            f64::NAN
        };
        let snapshot = snapshot.then(|| {
            let pts = self.grid.points();
            let q: Vec<f64> = self.rows.iter().map(|&i| pts[i][0]).collect();
            let pick = |v: &[f64]| self.rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let chi2: Vec<f64> = self
                .rows
                .iter()
                .map(|&i| fact.chi_abs[i] * fact.chi_abs[i])
                .collect();
            let columns = surface_columns(
                q.clone(),
                chi2,
                &dec,
                pick(&self.surfaces.lower),
                pick(&self.surfaces.upper),
                &self.rows,
            );
            let debug = self.debug.then(|| {
                let resid: Vec<f64> = self
                    .rows
                    .iter()
                    .map(|&i| fact.tdvp_residual[i][0])
                    .collect();
                [q, pick(&dec.eps_kin_unhalved), pick(&dec.eps_direct), resid]
            });
            Snapshot {
                columns,
                mask: self.rows.iter().map(|&i| dec.mask[i]).collect(),
                debug,
            }
        });
        Ok(FrameStats {
            a_phi: autocorr_phi_pair(first, fact)?,
            pnc: rep.pnc,
            reconstruction: rep.reconstruction,
            marginal: rep.marginal,
            zero_gauge: rep.zero_gauge,
            closure: [dec.max_closure, dec.max_closure_scaled],
            imag: [dec.max_imag, dec.max_imag_scaled],
            min_kin: dec.min_kin,
            completeness: dec.max_completeness,
            path_residual: fact.path_residual,
            upsample: fact.upsample,
            c2_origin,
            surface_identity,
            snapshot,
        })
    }
}

fn write_snapshots(
    dir: &Path,
    requested: &[f64],
    frames: &[usize],
    snaps: &BTreeMap<usize, Snapshot>,
    files: &mut Vec<String>,
) -> Result<()> {
    for (t, k) in requested.iter().zip(frames) {
        let s = &snaps[k];
        let name = snapshot_name(*t);
        fs::write(dir.join(&name), snapshot_csv(&s.columns, &s.mask))?;
        files.push(name);
        if let Some(d) = &s.debug {
            let name = format!("debug_{t:.3}.csv");
            Table::new(DEBUG_HEADER)
                .column(d[0].clone())
                .column(d[1].clone())
                .column(d[2].clone())
                .column(d[3].clone())
                .write(&dir.join(&name))?;
            files.push(name);
        }
    }
    Ok(())
}

fn run_grid(r: &Resolved, dir: &Path) -> Result<RunSummary> {
    let m = &r.model_params;
    let params = ModelParams::new(m.omega0, m.couplings.clone(), m.mode_freqs.clone())?;
    let axis = Axis::new(r.q_grid.q_min, r.q_grid.q_max, r.q_grid.n_points)?;
    let grid = QGrid::new(vec![axis; params.n_modes()])?;
    let kind = match r.run.initial_state {
        InitialState::QboExcited => InitialKind::QboExcited,
        InitialState::FactorizedExcited => InitialKind::FactorizedExcited,
    };
    let p = r.propagator_config.expect("grid runs resolve a propagator");
    let method = match p.method {
        MethodName::SplitOperator => Method::SplitOperator,
        MethodName::CrankNicolson => Method::CrankNicolson,
    };
    let cfg = PropagatorConfig::new(p.dt, p.n_steps, p.save_stride, method);
    cfg.validate(&params)?;
    let surfaces = qbo_surfaces(&params, &grid)?;
    let psi0 = build_initial_state(kind, &params, &grid)?;
    let traj = propagate(&psi0, &params, &cfg)?;
    let times = traj.times();
    let n = traj.frames.len();

    // two-mode snapshots are the cut through q2 = 0
    let rows: Vec<usize> = if grid.dim() == 1 {
        (0..grid.len()).collect()
    } else {
        let n1 = grid.axis(1).n_points;
        let c = grid
            .axis(1)
            .center()
            .ok_or_else(|| RunError::Config("two-mode snapshots need q2 = 0 on the grid".into()))?;
        (0..grid.axis(0).n_points).map(|i| i * n1 + c).collect()
    };
    let snap_frames: Vec<usize> = r
        .run
        .snapshot_times
        .iter()
        .map(|t| traj.nearest(*t))
        .collect();
    let ctx = GridContext {
        params: &params,
        surfaces: &surfaces,
        grid: &grid,
        rows,
        debug: r.run.debug,
    };

    let mut ext = Extremes::default();
    let first = factorize(&traj.frames[0])?;
    let stats: Vec<Result<FrameStats>> = match r.run.time_derivative {
        TimeDerivativeName::Hamiltonian => par_map(n, |k| {
            let fact = factorize(&traj.frames[k])?;
            ctx.stats(
                k,
                &fact,
                &first,
                TimeDerivative::Hamiltonian(&params),
                snap_frames.contains(&k),
            )
        }),
        TimeDerivativeName::CentralDifference => {
            let facts: Vec<Factorization> = par_map(n, |k| factorize(&traj.frames[k]))
                .into_iter()
                .collect::<std::result::Result<_, _>>()?;
            if n >= 5 {
                let changes = par_map(n - 4, |j| {
                    let k = j + 2;
                    frame_spacing_change(
                        [
                            &facts[k - 2],
                            &facts[k - 1],
                            &facts[k],
                            &facts[k + 1],
                            &facts[k + 2],
                        ],
                        &surfaces,
                        &params,
                    )
                });
                for c in changes {
                    ext.max("max_frame_spacing_change", c?);
                }
            }
            par_map(n, |k| {
                // end frames have only one neighbor and use the exact rate
                let deriv = if k == 0 || k + 1 == n {
                    TimeDerivative::Hamiltonian(&params)
                } else {
                    TimeDerivative::CentralDifference {
                        prev: &facts[k - 1],
                        next: &facts[k + 1],
                    }
                };
                ctx.stats(k, &facts[k], &facts[0], deriv, snap_frames.contains(&k))
            })
        }
    };

    let mut a_phi = Vec::with_capacity(n);
    let mut snaps = BTreeMap::new();
    for (k, s) in stats.into_iter().enumerate() {
        let s = s?;
        a_phi.push(s.a_phi);
        ext.max("max_pnc", s.pnc);
        ext.max("max_reconstruction", s.reconstruction);
        ext.max("max_marginal", s.marginal);
        ext.max("max_zero_gauge", s.zero_gauge);
        ext.max("max_closure", s.closure[0]);
        ext.max("max_closure_scaled", s.closure[1]);
        ext.max("max_imag", s.imag[0]);
        ext.max("max_imag_scaled", s.imag[1]);
        ext.min("min_eps_kin", s.min_kin);
        ext.max("max_completeness", s.completeness);
        ext.max("max_path_residual", s.path_residual);
        ext.max("max_upsample", s.upsample as f64);
        if s.c2_origin.is_finite() {
            ext.max("max_c2_origin", s.c2_origin);
        }
        if k == 0 && kind == InitialKind::QboExcited {
            ext.max("surface_identity_t0", s.surface_identity);
        }
        if let Some(snap) = s.snapshot {
            snaps.insert(k, snap);
        }
    }

    let psi0_energy = energy_expectation(&traj.frames[0], &params);
    let per_frame = par_map(n, |k| {
        let f = &traj.frames[k];
        let pops = populations_and_photons(f, &params);
        let field: f64 = electric_field(&grid, &f.density(), &params).iter().sum();
        let energy = energy_expectation(f, &params);
        let psi2_origin = grid.origin().map_or(f64::NAN, |o| f.values[o][1].norm());
        (
            pops,
            field,
            energy,
            f.norm_sqr(),
            f.edge_density(),
            psi2_origin,
        )
    });
    let mut excited_pop = Vec::with_capacity(n);
    let mut photon_number = Vec::with_capacity(n);
    let mut e_field = Vec::with_capacity(n);
    for (pops, field, energy, norm, edge, psi2) in per_frame {
        excited_pop.push(pops.excited_pop);
        photon_number.push(pops.total_photons());
        e_field.push(field);
        ext.max("max_norm_drift", (norm - 1.0).abs());
        ext.max(
            "max_energy_drift",
            ((energy - psi0_energy) / psi0_energy.abs().max(1e-300)).abs(),
        );
        ext.max("max_edge_density", edge);
        if psi2.is_finite() {
            ext.max("max_psi2_origin", psi2);
        }
    }
    let a_psi = cavity_ef::observables::autocorr_psi(&traj)?.values;

    let mut files = Vec::new();
    write_series(
        dir,
        &times,
        &a_psi,
        &a_phi,
        &excited_pop,
        &photon_number,
        &e_field,
        &mut files,
    )?;
    write_snapshots(dir, &r.run.snapshot_times, &snap_frames, &snaps, &mut files)?;

    let diagnostics = ext.0;
    let mut violations = Vec::new();
    check(
        &mut violations,
        &diagnostics,
        "max_energy_drift",
        limits::ENERGY_DRIFT,
    );
    check(&mut violations, &diagnostics, "max_pnc", limits::PNC);
    check(
        &mut violations,
        &diagnostics,
        "max_reconstruction",
        limits::RECONSTRUCTION,
    );
    check(
        &mut violations,
        &diagnostics,
        "max_zero_gauge",
        limits::ZERO_GAUGE,
    );
    check(
        &mut violations,
        &diagnostics,
        "max_closure_scaled",
        limits::CLOSURE,
    );
    // a differenced rate leaves an O(dt^2) imaginary part; the spacing
    // check guards that route instead
    if r.run.time_derivative == TimeDerivativeName::Hamiltonian {
        check(
            &mut violations,
            &diagnostics,
            "max_imag_scaled",
            limits::IMAG,
        );
    }
    check(
        &mut violations,
        &diagnostics,
        "max_frame_spacing_change",
        limits::FRAME_SPACING,
    );
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        resolved: r.clone(),
        times,
        a_psi,
        a_phi,
        excited_pop,
        photon_number,
        e_field,
        diagnostics,
        violations,
        files,
    })
}

#[allow(clippy::too_many_arguments)]
fn write_series(
    dir: &Path,
    t: &[f64],
    a_psi: &[f64],
    a_phi: &[f64],
    excited: &[f64],
    photons: &[f64],
    field: &[f64],
    files: &mut Vec<String>,
) -> Result<()> {
    Table::new(AUTOCORR_HEADER)
        .column(t.to_vec())
        .column(a_psi.to_vec())
        .column(a_phi.to_vec())
        .write(&dir.join("autocorr.csv"))?;
    Table::new(POPULATIONS_HEADER)
        .column(t.to_vec())
        .column(excited.to_vec())
        .column(photons.to_vec())
        .column(field.to_vec())
        .write(&dir.join("populations.csv"))?;
    files.push("autocorr.csv".into());
    files.push("populations.csv".into());
    Ok(())
}

fn run_ww(r: &Resolved, dir: &Path) -> Result<RunSummary> {
    let w = r.ww_mode_set.expect("ww runs resolve a mode set");
    let omega0 = r.model_params.omega0;
    let modes = WWModeSet::new(
        w.box_length,
        w.light_speed,
        w.first_index,
        w.n_modes,
        w.coupling,
    )?;
    let i = modes.index_of(w.cross_section_frequency).ok_or_else(|| {
        RunError::Config(format!(
            "cross_section_frequency {} is not a mode of the set (spacing {})",
            w.cross_section_frequency,
            modes.spacing()
        ))
    })?;
    let omega_i = modes.frequency(i);
    let n = w.n_frames + 1;
    let times: Vec<f64> = (0..n)
        .map(|k| w.t_end * k as f64 / w.n_frames as f64)
        .collect();
    let coeffs = match w.coefficients {
        Coefficients::ClosedForm => par_map(n, |k| ww_closed_form(&modes, omega0, times[k])),
        Coefficients::Ode => ww_ode_integrate(&modes, omega0, &times)?,
    };
    let q = Axis::new(r.q_grid.q_min, r.q_grid.q_max, r.q_grid.n_points)?.coords();
    let surf_params = ModelParams::new(omega0, vec![w.coupling], vec![omega_i])?;
    let (lower, upper): (Vec<f64>, Vec<f64>) = q
        .iter()
        .map(|x| {
            let p = qbo_point(&surf_params, &[*x]);
            (p.lower, p.upper)
        })
        .unzip();
    let snap_frames: Vec<usize> = r
        .run
        .snapshot_times
        .iter()
        .map(|t| ((t / w.t_end * w.n_frames as f64).round() as usize).min(n - 1))
        .collect();
    let rows: Vec<usize> = (0..q.len()).collect();

    let first = cross_section_state(&coeffs[0], &modes, i, &q)?;
    let stats = par_map(n, |k| -> Result<_> {
        let cs = cross_section_state(&coeffs[k], &modes, i, &q)?;
        let dec = decompose_cross_section(&cs, omega0, w.coupling)?;
        let a_phi = autocorr_phi(&first, &cs)?;
        let snap = snap_frames.contains(&k).then(|| {
            let chi2 = cs.chi_abs.iter().map(|c| c * c).collect();
            let columns =
                surface_columns(q.clone(), chi2, &dec, lower.clone(), upper.clone(), &rows);
            let debug = r.run.debug.then(|| {
                [
                    q.clone(),
                    dec.eps_kin_unhalved.clone(),
                    dec.eps_direct.clone(),
                    vec![0.0; q.len()],
                ]
            });
            Snapshot {
                columns,
                mask: dec.mask.clone(),
                debug,
            }
        });
        let ids = cross_section_identities(&cs);
        Ok((
            a_phi,
            [dec.max_closure, dec.max_closure_scaled],
            [dec.max_imag, dec.max_imag_scaled],
            dec.min_kin,
            dec.max_completeness,
            ids,
            snap,
        ))
    });

    let mut ext = Extremes::default();
    let mut a_phi = Vec::with_capacity(n);
    let mut snaps = BTreeMap::new();
    for (k, s) in stats.into_iter().enumerate() {
        let (ap, closure, imag, min_kin, completeness, ids, snap) = s?;
        a_phi.push(ap);
        ext.max("max_pnc", ids[0]);
        ext.max("max_reconstruction", ids[1]);
        ext.max("max_marginal", ids[2]);
        ext.max("max_zero_gauge", ids[3]);
        ext.max("max_closure", closure[0]);
        ext.max("max_closure_scaled", closure[1]);
        ext.max("max_imag", imag[0]);
        ext.max("max_imag_scaled", imag[1]);
        ext.min("min_eps_kin", min_kin);
        ext.max("max_completeness", completeness);
        ext.max("max_truncation_deficit", coeffs[k].truncation_deficit.abs());
        if let Some(s) = snap {
            snaps.insert(k, s);
        }
    }
    // the transverse vacuum factor is the same on every frame
    ext.0
        .insert("log_transverse_norm".into(), first.log_transverse_norm);
    ext.0.insert("decay_rate".into(), modes.decay_rate(omega0));
    ext.0.insert("cross_section_frequency".into(), omega_i);
    ext.0.insert("n_modes".into(), modes.n_modes as f64);

    let a_psi: Vec<f64> = coeffs.iter().map(|c| c.a.norm_sqr()).collect();
    let photons: Vec<f64> = coeffs.iter().map(|c| c.photon_probability()).collect();
    let mut files = Vec::new();
    write_series(
        dir,
        &times,
        &a_psi,
        &a_phi,
        &a_psi,
        &photons,
        &vec![0.0; n],
        &mut files,
    )?;
    write_snapshots(dir, &r.run.snapshot_times, &snap_frames, &snaps, &mut files)?;

    let diagnostics = ext.0;
    let mut violations = Vec::new();
    for (key, limit) in [
        ("max_pnc", limits::PNC),
        ("max_reconstruction", limits::RECONSTRUCTION),
        ("max_zero_gauge", limits::ZERO_GAUGE),
        ("max_closure_scaled", limits::CLOSURE),
        ("max_imag_scaled", limits::IMAG),
    ] {
        check(&mut violations, &diagnostics, key, limit);
    }
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        resolved: r.clone(),
        times,
        a_psi: a_psi.clone(),
        a_phi,
        excited_pop: a_psi,
        photon_number: photons,
        e_field: vec![0.0; n],
        diagnostics,
        violations,
        files,
    })
}

/// Identity checks on a cross-section with its vanishing gauge phase:
/// norm of `Phi`, `|chi Phi - Psi|`, `|chi|^2 - |Psi|^2` and the vector
/// potential `Im(Phi^dag dPhi)`, maxima over the mask.
fn cross_section_identities(cs: &cavity_ef::ww::CrossSection) -> [f64; 4] {
    let mut out = [0.0f64; 4];
    for k in 0..cs.q.len() {
        if !cs.mask[k] {
            continue;
        }
        let (p, d, psi) = (cs.phi[k], cs.d_phi[k], cs.psi[k]);
        let rho = psi[0].norm_sqr() + psi[1].norm_sqr();
        out[0] = out[0].max((p[0].norm_sqr() + p[1].norm_sqr() - 1.0).abs());
        let rec = (p[0] * cs.chi_abs[k] - psi[0])
            .norm()
            .max((p[1] * cs.chi_abs[k] - psi[1]).norm());
        out[1] = out[1].max(rec);
        out[2] = out[2].max((cs.chi_abs[k] * cs.chi_abs[k] - rho).abs());
        out[3] = out[3].max((p[0].conj() * d[0] + p[1].conj() * d[1]).im.abs());
    }
    out
}
