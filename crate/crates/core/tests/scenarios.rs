use std::fs;
use std::path::{Path, PathBuf};

use chshear::config::{RunConfig, SweepSection};
use chshear::experiments::{cell_config, run_in_memory, run_scenario, sweep};
use chshear::integrators::TerminalStatus;

fn fixture(name: &str) -> RunConfig {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    RunConfig::load(&p).unwrap()
}

#[test]
fn hyperdiffusion_control_decays_at_eps_gamma() {
    let cfg = fixture("hyperdiffusion-control.toml");
    let out = run_in_memory(&cfg).unwrap();
    assert_eq!(out.trajectory.status, TerminalStatus::ReachedTEnd);
    let fit = out.status.tail_fit.unwrap();
    let want = cfg.params.epsilon * cfg.params.gamma;
    assert!((fit.rate / want - 1.0).abs() < 0.01, "{} vs {want}", fit.rate);
}

#[test]
fn blow_up_ends_above_threshold() {
    let cfg = fixture("unstable-noshear.toml");
    let out = run_in_memory(&cfg).unwrap();
    assert!(out.status.blow_up);
    assert!(out.status.tail_fit.is_none());
    let recs = &out.trajectory.records;
    let threshold = 1e3 * recs[0].l2;
    assert!(recs.last().unwrap().l2 > threshold);
    assert!(recs[..recs.len() - 1].iter().all(|r| r.l2 <= threshold));
}

#[test]
fn suppressed_run_splits_orthogonally() {
    let mut cfg = fixture("unstable-shear-suppressed.toml");
    cfg.bootstrap = None;
    let out = run_in_memory(&cfg).unwrap();
    assert_eq!(out.trajectory.status, TerminalStatus::ReachedTEnd);
    let two_pi = 2.0 * std::f64::consts::PI;
    for r in &out.trajectory.records {
        let lhs = r.l2 * r.l2;
        let rhs = r.mean_part_l2 * r.mean_part_l2 / two_pi + r.fluct_l2 * r.fluct_l2;
        assert!((lhs - rhs).abs() <= 1e-10 * lhs, "t = {}", r.t);
    }
    // the dissipation integrals never decrease
    for w in out.trajectory.records.windows(2) {
        assert!(w[1].dissipation >= w[0].dissipation);
        assert!(w[1].fluct_dissipation >= w[0].fluct_dissipation);
    }
}

fn small_base() -> RunConfig {
    let text = r#"
seed = 9
[grid]
nx = 32
ny = 32
[params]
epsilon = 0.5
gamma = 0.1
a = -1.0
b = 0.5
[shear]
profile = "cosine"
[initial_data]
kind = "seeded-random"
k_min = 1.0
k_max = 3.0
amp = 1.0
mean_frac = 0.2
[controller]
dt_init = 0.01
output_interval = 0.25
[outputs]
t_end = 10.0
"#;
    RunConfig::from_toml_str(text, Path::new(".")).unwrap()
}

#[test]
fn outputs_are_written_without_leftovers() {
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&small_base(), dir.path()).unwrap();
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, vec!["diagnostics.csv", "status.json"]);
    let status: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("status.json")).unwrap()).unwrap();
    assert_eq!(status["blow_up"], false);
    assert_eq!(status["terminal"]["status"], "reached_t_end");
}

#[test]
fn single_cell_sweep_equals_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = small_base();
    base.sweep = Some(SweepSection {
        a: vec![-0.5],
        amplitude: vec![4.0],
    });
    let cells = sweep(&base, dir.path(), Some(1)).unwrap();
    assert_eq!(cells.len(), 1);
    let direct = dir.path().join("direct");
    let out = run_scenario(&cell_config(&base, -0.5, 4.0), &direct).unwrap();
    assert_eq!(cells[0].final_l2, out.status.final_l2);
    assert_eq!(cells[0].status, out.status.status);
    let cell_csv = fs::read(dir.path().join("cells/a-5e-1_A4e0/diagnostics.csv")).unwrap();
    assert_eq!(cell_csv, fs::read(direct.join("diagnostics.csv")).unwrap());
}

#[test]
fn sweep_cells_without_cubic_term_reach_t_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = small_base();
    base.sweep = Some(SweepSection {
        a: vec![0.0],
        amplitude: vec![1.0, 10.0, 100.0],
    });
    let cells = sweep(&base, dir.path(), Some(2)).unwrap();
    assert_eq!(cells.len(), 3);
    for c in &cells {
        assert_eq!(c.status, "reached_t_end", "A = {}", c.amplitude);
        assert!(c.error.is_none());
    }
}

#[test]
fn failing_cell_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = small_base();
    // γ = 1/A = 0 is rejected when the cell is built
    base.sweep = Some(SweepSection {
        a: vec![0.0],
        amplitude: vec![f64::INFINITY, 2.0],
    });
    let cells = sweep(&base, dir.path(), Some(1)).unwrap();
    assert_eq!(cells[0].status, "reached_t_end");
    assert_eq!(cells[1].status, "error");
    assert!(cells[1].error.is_some());
    let map = fs::read_to_string(dir.path().join("map.csv")).unwrap();
    assert_eq!(map.lines().count(), 3);
}

#[test]
fn large_sine_blows_up_without_shear() {
    use chshear::integrators::{SimState, StepController, Stepper};
    use chshear::operators::{EquationForm, PhysicalParams, ShearProfile};
    use chshear::spectral::{Field, TorusGrid};

    let g = TorusGrid::new(64, 64).unwrap();
    let u0 = Field::from_fn(&g, |x, _| 4.0 * x.sin());
    let p = PhysicalParams::new(1e-2, 1.0, -1.0, 0.0, 0.0, EquationForm::Original).unwrap();
    let ctrl = StepController {
        dt_init: 1e-4,
        output_interval: 0.01,
        ..Default::default()
    };
    let traj = Stepper::new(&g, p, ShearProfile::none())
        .unwrap()
        .integrate(SimState::new(u0, 1e-4), 10.0, &ctrl)
        .unwrap();
    assert!(traj.status.is_blow_up(), "{:?}", traj.status);
}
