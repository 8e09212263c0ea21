//! Run configuration: TOML sections, overrides and default resolution.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SingleMode,
    TwoMode,
    WignerWeisskopf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    QboExcited,
    FactorizedExcited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    SplitOperator,
    CrankNicolson,
}

/// How `d Phi / dt` enters the gauge-dependent surface on grid runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDerivativeName {
    Hamiltonian,
    CentralDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficients {
    ClosedForm,
    Ode,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: Option<Mode>,
    pub initial_state: Option<InitialState>,
    pub output_dir: Option<String>,
    pub snapshot_times: Option<Vec<f64>>,
    pub time_derivative: Option<TimeDerivativeName>,
    /// Also write the kinetic term without the factor one half.
    pub debug: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub omega0: Option<f64>,
    pub couplings: Option<Vec<f64>>,
    pub mode_freqs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorSection {
    pub dt: Option<f64>,
    pub n_steps: Option<usize>,
    pub save_stride: Option<usize>,
    pub method: Option<MethodName>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WWSection {
    pub coupling: Option<f64>,
    pub cross_section_frequency: Option<f64>,
    pub t_end: Option<f64>,
    pub n_frames: Option<usize>,
    pub coefficients: Option<Coefficients>,
    pub box_length: Option<f64>,
    pub light_speed: Option<f64>,
    pub first_index: Option<usize>,
    pub n_modes: Option<usize>,
}

/// Configuration as written by the user; omitted keys take defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub model_params: ModelSection,
    #[serde(default)]
    pub q_grid: GridSection,
    #[serde(default)]
    pub propagator_config: PropagatorSection,
    #[serde(default)]
    pub ww_mode_set: WWSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Parse `text` after applying `section.key=value` overrides.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Ok(table.try_into()?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Values parse as TOML literals and fall back to plain strings.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

pub fn apply_override(table: &mut toml::Table, arg: &str) -> Result<()> {
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| RunError::Config(format!("override `{arg}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.len() != 2 || path.iter().any(|p| p.is_empty()) {
        return Err(RunError::Config(format!(
            "override key `{key}` must look like section.key"
        )));
    }
    let section = table
        .entry(path[0])
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let section = section
        .as_table_mut()
        .ok_or_else(|| RunError::Config(format!("`{}` is not a section", path[0])))?;
    section.insert(path[1].to_string(), parse_value(value.trim()));
    Ok(())
}

/// Every field concrete; what the run actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub run: ResolvedRun,
    pub model_params: ResolvedModel,
    pub q_grid: ResolvedGrid,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagator_config: Option<ResolvedPropagator>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ww_mode_set: Option<ResolvedWW>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub mode: Mode,
    pub initial_state: InitialState,
    pub output_dir: String,
    pub snapshot_times: Vec<f64>,
    pub time_derivative: TimeDerivativeName,
    pub debug: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedModel {
    pub omega0: f64,
    pub couplings: Vec<f64>,
    pub mode_freqs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedGrid {
    pub q_min: f64,
    pub q_max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPropagator {
    pub dt: f64,
    pub n_steps: usize,
    pub save_stride: usize,
    pub method: MethodName,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedWW {
    pub coupling: f64,
    pub cross_section_frequency: f64,
    pub t_end: f64,
    pub n_frames: usize,
    pub coefficients: Coefficients,
    pub box_length: f64,
    pub light_speed: f64,
    pub first_index: usize,
    pub n_modes: usize,
}

pub const DEFAULT_FRAMES: usize = 400;

struct Defaults(Vec<String>);

impl Defaults {
    fn take<T: std::fmt::Debug>(
        &mut self,
        key: &str,
        given: Option<T>,
        default: impl FnOnce() -> T,
    ) -> T {
        match given {
            Some(v) => v,
            None => {
                let v = default();
                self.0.push(format!("{key} = {v:?}"));
                v
            }
        }
    }
}

impl RunConfig {
    /// Fill in defaults and check cross-field consistency. Returns the
    /// resolved configuration and a line per default applied.
    pub fn resolve(&self) -> Result<(Resolved, Vec<String>)> {
        let mut d = Defaults(Vec::new());
        let mode = d.take("run.mode", self.run.mode, || Mode::SingleMode);
        let initial_state = d.take("run.initial_state", self.run.initial_state, || {
            if mode == Mode::WignerWeisskopf {
                InitialState::FactorizedExcited
            } else {
                InitialState::QboExcited
            }
        });
        // emission always starts from the excited emitter in the vacuum
        if mode == Mode::WignerWeisskopf && initial_state != InitialState::FactorizedExcited {
            return Err(RunError::Config(
                "wigner_weisskopf runs start from factorized_excited".into(),
            ));
        }
        let output_dir = d.take("run.output_dir", self.run.output_dir.clone(), || {
            "out".to_string()
        });
        let time_derivative = d.take("run.time_derivative", self.run.time_derivative, || {
            TimeDerivativeName::Hamiltonian
        });
        let debug = d.take("run.debug", self.run.debug, || false);

        let m = &self.model_params;
        let omega0 = d.take("model_params.omega0", m.omega0, || 0.4);
        let (def_c, def_f) = match mode {
            Mode::SingleMode => (vec![0.01], vec![omega0]),
            Mode::TwoMode => (vec![0.1, 0.1], vec![omega0, omega0 + 0.05]),
            Mode::WignerWeisskopf => (vec![], vec![]),
        };
        let (couplings, mode_freqs) = if mode == Mode::WignerWeisskopf {
            if m.couplings.is_some() || m.mode_freqs.is_some() {
                return Err(RunError::Config(
                    "wigner_weisskopf runs take their modes from [ww_mode_set]".into(),
                ));
            }
            (vec![], vec![])
        } else {
            (
                d.take("model_params.couplings", m.couplings.clone(), || def_c),
                d.take("model_params.mode_freqs", m.mode_freqs.clone(), || def_f),
            )
        };
        let want = match mode {
            Mode::SingleMode => 1,
            Mode::TwoMode => 2,
            Mode::WignerWeisskopf => 0,
        };
        if mode != Mode::WignerWeisskopf && (couplings.len() != want || mode_freqs.len() != want) {
            return Err(RunError::Config(format!(
                "{mode:?} needs {want} coupling(s) and mode frequency(ies)"
            )));
        }

        let g = &self.q_grid;
        let (lo, hi, n) = match mode {
            Mode::SingleMode => (-20.0, 20.0, 513),
            Mode::TwoMode => (-10.0, 10.0, 81),
            Mode::WignerWeisskopf => (-10.0, 10.0, 401),
        };
        let q_grid = ResolvedGrid {
            q_min: d.take("q_grid.q_min", g.q_min, || lo),
            q_max: d.take("q_grid.q_max", g.q_max, || hi),
            n_points: d.take("q_grid.n_points", g.n_points, || n),
        };

        let mut propagator_config = None;
        let mut ww_mode_set = None;
        let t_end;
        if mode == Mode::WignerWeisskopf {
            if self.propagator_config != PropagatorSection::default() {
                return Err(RunError::Config(
                    "wigner_weisskopf runs have no [propagator_config]".into(),
                ));
            }
            let w = &self.ww_mode_set;
            let coupling = d.take("ww_mode_set.coupling", w.coupling, || 0.01);
            let anchor = d.take(
                "ww_mode_set.cross_section_frequency",
                w.cross_section_frequency,
                || omega0,
            );
            let auto = cavity_ef::ww::WWModeSet::quasi_continuum(omega0, coupling, anchor)?;
            let box_length = d.take("ww_mode_set.box_length", w.box_length, || auto.box_length);
            let light_speed = d.take("ww_mode_set.light_speed", w.light_speed, || {
                auto.light_speed
            });
            let first_index = d.take("ww_mode_set.first_index", w.first_index, || {
                auto.first_index
            });
            let n_modes = d.take("ww_mode_set.n_modes", w.n_modes, || auto.n_modes);
            let modes = cavity_ef::ww::WWModeSet::new(
                box_length,
                light_speed,
                first_index,
                n_modes,
                coupling,
            )?;
            let gamma = modes.decay_rate(omega0);
            let te = d.take("ww_mode_set.t_end", w.t_end, || 12.0 / gamma);
            let n_frames = d.take("ww_mode_set.n_frames", w.n_frames, || DEFAULT_FRAMES);
            let coefficients = d.take("ww_mode_set.coefficients", w.coefficients, || {
                Coefficients::ClosedForm
            });
            if !(te > 0.0) || n_frames == 0 {
                return Err(RunError::Config(
                    "t_end and n_frames must be positive".into(),
                ));
            }
            t_end = te;
            ww_mode_set = Some(ResolvedWW {
                coupling,
                cross_section_frequency: anchor,
                t_end,
                n_frames,
                coefficients,
                box_length,
                light_speed,
                first_index,
                n_modes,
            });
        } else {
            if self.ww_mode_set != WWSection::default() {
                return Err(RunError::Config(
                    "[ww_mode_set] only applies to wigner_weisskopf runs".into(),
                ));
            }
            let p = &self.propagator_config;
            let dt = d.take("propagator_config.dt", p.dt, || {
                cavity_ef::PropagatorConfig::DEFAULT_DT
            });
            let n_steps = d.take("propagator_config.n_steps", p.n_steps, || {
                (800.0 / dt).round() as usize
            });
            let save_stride = d.take("propagator_config.save_stride", p.save_stride, || {
                (n_steps / DEFAULT_FRAMES).max(1)
            });
            let method = d.take("propagator_config.method", p.method, || {
                MethodName::SplitOperator
            });
            if n_steps == 0 || save_stride == 0 || n_steps % save_stride != 0 {
                return Err(RunError::Config(format!(
                    "n_steps ({n_steps}) must be a positive multiple of save_stride ({save_stride})"
                )));
            }
            t_end = n_steps as f64 * dt;
            propagator_config = Some(ResolvedPropagator {
                dt,
                n_steps,
                save_stride,
                method,
            });
        }
        let snapshot_times = d.take(
            "run.snapshot_times",
            self.run.snapshot_times.clone(),
            || (0..=4).map(|k| k as f64 * t_end / 4.0).collect(),
        );
        if let Some(t) = snapshot_times
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= t_end * (1.0 + 1e-12)))
        {
            return Err(RunError::Config(format!(
                "snapshot time {t} outside [0, {t_end}]"
            )));
        }
        let resolved = Resolved {
            run: ResolvedRun {
                mode,
                initial_state,
                output_dir,
                snapshot_times,
                time_derivative,
                debug,
            },
            model_params: ResolvedModel {
                omega0,
                couplings,
                mode_freqs,
            },
            q_grid,
            propagator_config,
            ww_mode_set,
        };
        Ok((resolved, d.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_single_mode_defaults() {
        let (r, defaults) = RunConfig::from_toml("").unwrap().resolve().unwrap();
        assert_eq!(r.run.mode, Mode::SingleMode);
        assert_eq!(r.model_params.couplings, vec![0.01]);
        let p = r.propagator_config.unwrap();
        assert_eq!(p.n_steps % p.save_stride, 0);
        assert_eq!(p.n_steps / p.save_stride, DEFAULT_FRAMES);
        assert!(defaults
            .iter()
            .any(|l| l.starts_with("propagator_config.dt")));
        assert_eq!(r.run.snapshot_times.len(), 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::from_toml("[model_params]\nomega = 0.4\n"),
            Err(RunError::Config(_))
        ));
        assert!(RunConfig::from_toml("[nonsense]\n").is_err());
    }

    #[test]
    fn overrides_parse_literals_and_strings() {
        let c = RunConfig::from_toml_with_overrides(
            "[run]\nmode = \"single_mode\"\n",
            &[
                "model_params.couplings=[0.1]".into(),
                "run.output_dir=runs/x".into(),
                "propagator_config.n_steps=1000".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.model_params.couplings, Some(vec![0.1]));
        assert_eq!(c.run.output_dir.as_deref(), Some("runs/x"));
        assert_eq!(c.propagator_config.n_steps, Some(1000));
        assert!(RunConfig::from_toml_with_overrides("", &["couplings=1".into()]).is_err());
        assert!(RunConfig::from_toml_with_overrides("", &["run.bogus=1".into()]).is_err());
    }

    #[test]
    fn inconsistent_sections_are_config_errors() {
        let two = "[run]\nmode = \"two_mode\"\n[model_params]\ncouplings = [0.1]\n";
        assert!(matches!(
            RunConfig::from_toml(two).unwrap().resolve(),
            Err(RunError::Config(_))
        ));
        let ww = "[run]\nmode = \"wigner_weisskopf\"\n[propagator_config]\ndt = 0.01\n";
        assert!(RunConfig::from_toml(ww).unwrap().resolve().is_err());
        let snap = "[run]\nsnapshot_times = [1e6]\n";
        assert!(RunConfig::from_toml(snap).unwrap().resolve().is_err());
        let stride = "[propagator_config]\nn_steps = 1000\nsave_stride = 3\n";
        assert!(RunConfig::from_toml(stride).unwrap().resolve().is_err());
        let qbo = "[run]\nmode = \"wigner_weisskopf\"\ninitial_state = \"qbo_excited\"\n";
        assert!(RunConfig::from_toml(qbo).unwrap().resolve().is_err());
    }

    #[test]
    fn ww_defaults_follow_the_quasi_continuum() {
        let (r, _) = RunConfig::from_toml("[run]\nmode = \"wigner_weisskopf\"\n")
            .unwrap()
            .resolve()
            .unwrap();
        let w = r.ww_mode_set.unwrap();
        assert!(w.n_modes > 100);
        assert!(r.propagator_config.is_none());
        assert_eq!(w.coefficients, Coefficients::ClosedForm);
        assert_eq!(r.run.initial_state, InitialState::FactorizedExcited);
    }

    #[test]
    fn round_trip_through_toml() {
        let c =
            RunConfig::from_toml("[run]\nmode = \"two_mode\"\n[q_grid]\nn_points = 65\n").unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}
