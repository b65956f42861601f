use anls_wasm_demo::{GroundStateView, KernelView, Simulation, MAX_SIDE};

#[test]
fn ground_state_view_reports_a_converged_profile() {
    let gs = GroundStateView::solve(4.0, 64, 12.0).unwrap();
    assert_eq!(gs.n(), 64);
    assert_eq!(gs.density().len(), 64 * 64);
    assert!(gs.residual() < 1e-8);
    assert!((gs.c_star() - (7.0 / (3.0 * gs.c_opt())).powf(0.375)).abs() < 1e-12);
    let peak = gs.density().iter().cloned().fold(0.0, f64::max);
    assert_eq!(gs.density()[32 * 64 + 32], peak);
}

#[test]
fn ground_state_view_rejects_bad_input() {
    assert!(GroundStateView::solve(1.5, 64, 12.0).is_err());
    assert!(GroundStateView::solve(4.0, 100, 12.0).is_err());
    assert!(GroundStateView::solve(4.0, 2 * MAX_SIDE, 12.0).is_err());
}

#[test]
fn simulation_conserves_mass_and_flags_blowup() {
    let mut sim = Simulation::start(3.0, 1.0, 128, 15.0, 1e-3).unwrap();
    let m0 = sim.record().mass;
    sim.advance(50).unwrap();
    assert!((sim.time() - 0.05).abs() < 1e-12);
    assert!((sim.record().mass - m0).abs() < 1e-10 * m0);
    assert_eq!(sim.status(), "running");

    let mut sim = Simulation::start(6.0, 2.5, 64, 15.0, 1e-4).unwrap();
    for _ in 0..200 {
        sim.advance(10).unwrap();
        if sim.status() == "blowup" {
            break;
        }
    }
    assert_eq!(sim.status(), "blowup");
    let t = sim.time();
    sim.advance(10).unwrap();
    assert_eq!(sim.time(), t);
}

#[test]
fn kernel_view_is_positive_along_x_and_changes_sign_along_y() {
    let k = KernelView::sample(8.0, 16, 1e-10).unwrap();
    assert_eq!(k.coords().len(), 16);
    assert!(k.along_x_values().iter().all(|v| *v > 0.0));
    let ys = k.along_y_values();
    assert!(ys.windows(2).any(|w| w[0].signum() != w[1].signum()));
    assert!(KernelView::sample(-1.0, 16, 1e-10).is_err());
}
