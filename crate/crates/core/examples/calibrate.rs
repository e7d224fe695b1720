//! Scans the unstable regime for the blow-up and suppression fixtures.
//!
//! `cargo run --release --example calibrate`
use std::time::Instant;

use chshear::integrators::{SimState, StepController, Stepper, TerminalStatus};
use chshear::operators::{EquationForm, PhysicalParams, ShearProfile};
use chshear::spectral::{Field, TorusGrid};

fn run(n: usize, p: PhysicalParams, v: ShearProfile, amp: f64, t_end: f64) -> (TerminalStatus, f64, f64) {
    let g = TorusGrid::new(n, n).unwrap();
    let u0 = Field::from_fn(&g, |x, _| amp * x.sin());
    let ctrl = StepController {
        dt_init: 1e-2,
        dt_max: 5e-2,
        output_interval: 0.5,
        ..Default::default()
    };
    let traj = Stepper::new(&g, p, v)
        .unwrap()
        .integrate(SimState::new(u0, 1e-2), t_end, &ctrl)
        .unwrap();
    let last = traj.records.last().unwrap();
    (traj.status, last.l2 / traj.records[0].l2, traj.final_state.t)
}

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().unwrap()).collect();
    let (eps, gamma) = (args.first().copied().unwrap_or(0.5), args.get(1).copied().unwrap_or(0.1));
    let p = PhysicalParams::new(eps, gamma, -1.0, 0.0, 0.0, EquationForm::Rescaled).unwrap();
    for amp in [1.0, 1.2, 1.5, 2.0, 3.0] {
        for n in [64, 128] {
            let t0 = Instant::now();
            let (s, ratio, t) = run(n, p, ShearProfile::none(), amp, 100.0);
            println!("eps {eps} gamma {gamma} amp {amp} n {n} noshear {s:?} ratio {ratio:.3e} t {t:.3} ({:.1?})", t0.elapsed());
        }
        let t0 = Instant::now();
        let (s, ratio, t) = run(64, p, ShearProfile::cosine(), amp, 100.0);
        println!("eps {eps} gamma {gamma} amp {amp} n 64 shear {s:?} ratio {ratio:.3e} t {t:.3} ({:.1?})", t0.elapsed());
    }
}
