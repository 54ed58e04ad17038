use coagbreak::grid::MeshKind;
use coagbreak::io::config::{parse_config, RunConfig};
use coagbreak::io::output::{moments_csv, parse_moments_csv, parse_trajectory_csv, trajectory_csv};
use coagbreak::io::pipeline::run_config;
use coagbreak::kernels::EfficiencyModel;
use coagbreak::solver::InitialDatum;
use proptest::prelude::*;

fn config() -> impl Strategy<Value = RunConfig> {
    (
        (0.1..3.0f64, 0.0..=0.5f64, 0.0..=0.5f64, 0.0..2.0f64),
        prop_oneof![
            (0.0..=1.0f64).prop_map(EfficiencyModel::Constant),
            Just(EfficiencyModel::RatioBounded),
            Just(EfficiencyModel::PureCoagulation),
        ],
        (1e-6..1e-2f64, 5.0..500.0f64, 8usize..2048, any::<bool>()),
        prop_oneof![
            (0.1..5.0f64, 0.1..5.0f64)
                .prop_map(|(amplitude, decay)| InitialDatum::Exponential { amplitude, decay }),
            (0.1..5.0f64, -0.4..0.4f64, 0.1..5.0f64).prop_map(|(amplitude, p, decay)| {
                InitialDatum::TruncatedPowerExp {
                    amplitude,
                    p,
                    decay,
                }
            }),
            (0.1..5.0f64, 0.5..5.0f64, 0.01..0.4f64).prop_map(|(amplitude, center, width)| {
                InitialDatum::Monodisperse {
                    amplitude,
                    center,
                    width,
                }
            }),
        ],
        (0.1..10.0f64, 1e-10..1e-4f64, 1usize..10, 1.0..20.0f64),
    )
        .prop_map(
            |((c, a, ap, th), eff, (z_min, n, cells, geo), init, (t_end, tol, every, z_o))| {
                let mut cfg = RunConfig::default();
                cfg.kernel.c = c;
                cfg.kernel.alpha = a;
                cfg.kernel.alpha_prime = ap;
                cfg.kernel.theta = th;
                cfg.kernel.efficiency = eff;
                cfg.mesh.z_min = z_min;
                cfg.mesh.n = n;
                cfg.mesh.cells = cells;
                cfg.mesh.kind = if geo {
                    MeshKind::Geometric
                } else {
                    MeshKind::Uniform
                };
                cfg.init = init;
                cfg.solver.t_end = t_end;
                cfg.solver.tol_step = tol;
                cfg.solver.record_every = every;
                cfg.verify.z_o = z_o;
                cfg
            },
        )
}

proptest! {
    #[test]
    fn emitted_config_parses_back_identically(cfg in config()) {
        let text = cfg.emit();
        let parsed = parse_config(&text);
        // the generator can produce inadmissible parameter sets; those must be rejected, not altered
        match (parsed, cfg.validate()) {
            (Ok(back), Ok(())) => {
                prop_assert_eq!(&back, &cfg);
                prop_assert_eq!(back.fingerprint(), cfg.fingerprint());
            }
            (Err(_), Err(_)) => {}
            (p, v) => prop_assert!(false, "parse {:?} vs validate {:?}", p.err(), v.err()),
        }
    }
}

#[test]
fn fingerprint_tracks_every_field() {
    let base = RunConfig::default();
    let mut other = base.clone();
    other.verify.perturbation = 0.02;
    assert_ne!(base.fingerprint(), other.fingerprint());
    assert_eq!(base.fingerprint().len(), 64);
}

#[test]
fn comments_and_defaults_are_accepted() {
    let cfg = parse_config("# defaults\n[mesh]\ncells = 128 # coarser\n").unwrap();
    let mut expected = RunConfig::default();
    expected.mesh.cells = 128;
    assert_eq!(cfg, expected);
}

#[test]
fn csv_outputs_round_trip_bitwise() {
    let mut cfg = RunConfig::default();
    cfg.mesh.cells = 48;
    let traj = run_config(&cfg).unwrap();

    let blocks = parse_trajectory_csv(&trajectory_csv(&traj)).unwrap();
    assert_eq!(blocks.len(), traj.snapshots.len());
    for (b, s) in blocks.iter().zip(&traj.snapshots) {
        assert_eq!(b.t.to_bits(), s.time.to_bits());
        assert_eq!(b.z, traj.mesh().centers());
        assert_eq!(b.g, s.values);
    }

    let moments = parse_moments_csv(&moments_csv(&traj)).unwrap();
    assert_eq!(moments, traj.moments);
}

#[test]
fn corrupt_csv_is_reported() {
    assert!(parse_trajectory_csv("t,z,g\n0,1\n").is_err());
    assert!(parse_trajectory_csv("time,z,g\n").is_err());
    assert!(parse_moments_csv("t,M_neg,M0,M1,M2,flux_out\n0,1,2,3,4,x\n").is_err());
}
