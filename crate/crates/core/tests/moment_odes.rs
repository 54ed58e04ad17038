use coagbreak::io::config::RunConfig;
use coagbreak::io::pipeline::run_config;
use coagbreak::oracles::{moment_ode_reference, OracleScenario};

fn constant_kernel_run(e: f64) -> (RunConfig, coagbreak::Trajectory) {
    let scenario = OracleScenario::constant_kernel(e);
    let mut cfg = RunConfig::default();
    cfg.kernel = scenario.spec;
    cfg.test_mode = true;
    cfg.init = scenario.init;
    cfg.mesh.cells = 512;
    cfg.mesh.z_min = 1e-6;
    let traj = run_config(&cfg).unwrap();
    (cfg, traj)
}

#[test]
fn solver_moments_follow_the_closed_equations() {
    for e in [1.0, 0.5, 0.0] {
        let (cfg, traj) = constant_kernel_run(e);
        let first = traj.moments[0];
        let curves =
            moment_ode_reference(&cfg.kernel, (first.m0, first.m1, first.m2), 1.0, 2000).unwrap();
        assert!(curves.closed);
        let last = traj.moments.last().unwrap();
        let rel0 = (last.m0 - curves.m0_at(1.0)).abs() / curves.m0_at(1.0);
        let rel2 = (last.m2 - curves.m2_at(1.0)).abs() / curves.m2_at(1.0);
        assert!(
            rel0 < 2e-3,
            "E = {e}: M0 {} vs {}",
            last.m0,
            curves.m0_at(1.0)
        );
        assert!(
            rel2 < 2e-3,
            "E = {e}: M2 {} vs {}",
            last.m2,
            curves.m2_at(1.0)
        );
    }
}

#[test]
fn half_efficiency_does_not_conserve_particle_number() {
    let (_, traj) = constant_kernel_run(0.5);
    let m0: Vec<f64> = traj.moments.iter().map(|m| m.m0).collect();
    assert!(m0.windows(2).all(|w| w[1] < w[0]));
    // dM0/dt = -M0^2 / 4 from M0(0) = 1
    let expected = 1.0 / 1.25;
    assert!((m0.last().unwrap() - expected).abs() < 2e-3);
}
