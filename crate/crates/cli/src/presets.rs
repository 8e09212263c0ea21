//! Named configurations.

use cavity_ef::ww::WWModeSet;

use crate::config::{
    Coefficients, GridSection, InitialState, MethodName, Mode, ModelSection, PropagatorSection,
    RunConfig, RunSection, WWSection,
};

pub const NAMES: [&str; 10] = [
    "sm-qbo-0.01",
    "sm-qbo-0.1",
    "sm-qbo-0.4",
    "sm-fact-0.01",
    "sm-fact-0.1",
    "sm-fact-0.4",
    "two-mode",
    "ww-on-resonant",
    "ww-off-resonant",
    "smoke-zero-coupling",
];

const OMEGA0: f64 = 0.4;
const DT: f64 = 0.005;

fn grid_run(
    name: &str,
    mode: Mode,
    initial: InitialState,
    couplings: Vec<f64>,
    freqs: Vec<f64>,
    grid: (f64, usize),
    t_end: f64,
    frames: usize,
    snapshots: Vec<f64>,
) -> RunConfig {
    let n_steps = (t_end / DT).round() as usize;
    RunConfig {
        run: RunSection {
            mode: Some(mode),
            initial_state: Some(initial),
            output_dir: Some(format!("runs/{name}")),
            snapshot_times: Some(snapshots),
            ..Default::default()
        },
        model_params: ModelSection {
            omega0: Some(OMEGA0),
            couplings: Some(couplings),
            mode_freqs: Some(freqs),
        },
        q_grid: GridSection {
            q_min: Some(-grid.0),
            q_max: Some(grid.0),
            n_points: Some(grid.1),
        },
        propagator_config: PropagatorSection {
            dt: Some(DT),
            n_steps: Some(n_steps),
            save_stride: Some(n_steps / frames),
            method: Some(MethodName::SplitOperator),
        },
        ww_mode_set: WWSection::default(),
    }
}

fn single_mode(name: &str, initial: InitialState, coupling: f64) -> RunConfig {
    // windows cover the first exchange (weak), several periods (medium) or
    // the loss of periodicity (strong)
    let (t_end, snaps) = match coupling {
        c if c < 0.05 => (800.0, vec![0.0, 100.0, 200.0, 351.0, 500.0, 702.0]),
        c if c < 0.2 => (300.0, vec![0.0, 17.5, 35.0, 52.5, 70.0, 150.0, 300.0]),
        _ => (2000.0, vec![0.0, 50.0, 250.0, 500.0, 1000.0, 2000.0]),
    };
    grid_run(
        name,
        Mode::SingleMode,
        initial,
        vec![coupling],
        vec![OMEGA0],
        (20.0, 513),
        t_end,
        400,
        snaps,
    )
}

fn ww(name: &str, omega_i: f64) -> RunConfig {
    let coupling = 0.01;
    let gamma = WWModeSet::quasi_continuum(OMEGA0, coupling, omega_i)
        .expect("valid mode set")
        .decay_rate(OMEGA0);
    RunConfig {
        run: RunSection {
            mode: Some(Mode::WignerWeisskopf),
            initial_state: Some(InitialState::FactorizedExcited),
            output_dir: Some(format!("runs/{name}")),
            snapshot_times: Some(
                [0.0, 1.0, 2.0, 5.0, 8.0, 12.0]
                    .iter()
                    .map(|k| k / gamma)
                    .collect(),
            ),
            ..Default::default()
        },
        model_params: ModelSection {
            omega0: Some(OMEGA0),
            ..Default::default()
        },
        q_grid: GridSection {
            q_min: Some(-10.0),
            q_max: Some(10.0),
            n_points: Some(401),
        },
        propagator_config: PropagatorSection::default(),
        ww_mode_set: WWSection {
            coupling: Some(coupling),
            cross_section_frequency: Some(omega_i),
            t_end: Some(12.0 / gamma),
            n_frames: Some(400),
            coefficients: Some(Coefficients::ClosedForm),
            ..Default::default()
        },
    }
}

pub fn preset(name: &str) -> Option<RunConfig> {
    use InitialState::{FactorizedExcited as Fact, QboExcited as Qbo};
    Some(match name {
        "sm-qbo-0.01" => single_mode(name, Qbo, 0.01),
        "sm-qbo-0.1" => single_mode(name, Qbo, 0.1),
        "sm-qbo-0.4" => single_mode(name, Qbo, 0.4),
        "sm-fact-0.01" => single_mode(name, Fact, 0.01),
        "sm-fact-0.1" => single_mode(name, Fact, 0.1),
        "sm-fact-0.4" => single_mode(name, Fact, 0.4),
        "two-mode" => grid_run(
            name,
            Mode::TwoMode,
            Qbo,
            vec![0.1, 0.1],
            vec![0.4, 0.45],
            (10.0, 81),
            200.0,
            200,
            vec![0.0, 50.0, 100.0, 150.0, 200.0],
        ),
        "ww-on-resonant" => ww(name, 0.4),
        "ww-off-resonant" => ww(name, 0.411),
        "smoke-zero-coupling" => {
            let mut c = single_mode(name, Qbo, 0.0);
            c.propagator_config.n_steps = Some(20000);
            c.propagator_config.save_stride = Some(200);
            c.run.snapshot_times = Some(vec![0.0, 50.0, 100.0]);
            c
        }
        _ => return None,
    })
}

/// Preset as TOML, ready to be edited and passed to `run`.
pub fn emit(name: &str) -> Option<String> {
    preset(name).map(|c| c.to_toml())
}
