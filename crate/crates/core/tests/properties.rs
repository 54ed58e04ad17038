use std::sync::Arc;

use coagbreak::grid::{build_mesh, DensityField, Mesh, MeshKind};
use coagbreak::kernels::{breakage_p, p_moment, phi, EfficiencyModel, KernelSpec};
use coagbreak::operators::{brute_force_rhs, rhs, weak_moment_rate, CollisionOperator};
use coagbreak::verification::{moment, q_distance, tail_bound_check};
use proptest::prelude::*;

fn mesh(cells: usize) -> Arc<Mesh> {
    build_mesh(1e-3, 20.0, cells, MeshKind::Geometric).unwrap()
}

fn model() -> impl Strategy<Value = EfficiencyModel> {
    prop_oneof![
        (0.0..=1.0f64).prop_map(EfficiencyModel::Constant),
        Just(EfficiencyModel::RatioBounded),
        Just(EfficiencyModel::PureCoagulation),
    ]
}

fn spec() -> impl Strategy<Value = KernelSpec> {
    (0.1..2.0f64, 0.0..0.5f64, 0.0..0.5f64, model(), 0.0..2.0f64)
        .prop_map(|(c, a, ap, e, th)| KernelSpec::new(c, a, ap, e, th).unwrap())
}

fn field(mesh: Arc<Mesh>) -> impl Strategy<Value = DensityField> {
    let cells = mesh.len();
    (proptest::collection::vec(0.0..1.0f64, cells), 0.05..2.0f64).prop_map(move |(noise, decay)| {
        let values = noise
            .iter()
            .zip(mesh.centers())
            .map(|(u, z)| u * (-decay * z).exp())
            .collect();
        DensityField::new(mesh.clone(), values, 0.0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn collision_kernel_is_symmetric(s in spec(), z in 1e-3..50.0f64, w in 1e-3..50.0f64) {
        let a = phi(z, w, &s).unwrap();
        let b = phi(w, z, &s).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(b.abs()));
        prop_assert!(a >= 0.0);
        let ec = s.efficiency.coalescence(z, w);
        let eb = s.efficiency.breakage(z, w);
        prop_assert_eq!(ec, s.efficiency.coalescence(w, z));
        prop_assert!((0.0..=1.0).contains(&ec) && (ec + eb - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fragment_distribution_conserves_volume(theta in 0.0..3.0f64, s in 1e-2..100.0f64) {
        let n0 = p_moment(0.0, s, theta).unwrap();
        let n1 = p_moment(1.0, s, theta).unwrap();
        prop_assert!((n0 - (theta + 2.0) / (theta + 1.0)).abs() < 1e-12);
        prop_assert!((n1 - s).abs() < 1e-12 * s);
        prop_assert_eq!(breakage_p(1.5 * s, s / 2.0, s / 2.0, theta).unwrap(), 0.0);
    }

    #[test]
    fn fast_operator_matches_oracle(s in spec(), g in field(mesh(24))) {
        let fast = rhs(&g, &s).unwrap();
        let slow = brute_force_rhs(&g, &s).unwrap();
        let scale = slow.rhs.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for (a, b) in fast.rhs.iter().zip(&slow.rhs) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn operator_is_quadratic(s in spec(), g in field(mesh(24)), lambda in 0.1..10.0f64) {
        let op = CollisionOperator::new(g.mesh.clone(), &s).unwrap();
        let base = op.evaluate(&g.values).unwrap();
        let scaled: Vec<f64> = g.values.iter().map(|v| lambda * v).collect();
        let out = op.evaluate(&scaled).unwrap();
        for (a, b) in out.rhs.iter().zip(&base.rhs) {
            prop_assert!((a - lambda * lambda * b).abs() <= 1e-12 * (1.0 + (lambda * lambda * b).abs()));
        }
    }

    #[test]
    fn discrete_volume_balance(s in spec(), g in field(mesh(32))) {
        let out = rhs(&g, &s).unwrap();
        let mesh = &g.mesh;
        let dm1: f64 = out.rhs.iter().zip(mesh.centers()).zip(mesh.widths()).map(|((r, x), w)| r * x * w).sum();
        let scale: f64 = out.loss.iter().zip(mesh.centers()).zip(mesh.widths()).map(|((r, x), w)| r * x * w).sum();
        prop_assert!((dm1 + out.flux_out).abs() <= 1e-12 * scale.max(1e-300));
        let weak = weak_moment_rate(&g, &s, 1.0).unwrap();
        prop_assert!((weak + out.flux_out).abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn gain_terms_are_nonnegative(s in spec(), g in field(mesh(24))) {
        let out = rhs(&g, &s).unwrap();
        prop_assert!(out.gain_coag.iter().chain(&out.gain_break).chain(&out.loss).all(|v| *v >= 0.0));
        prop_assert!(out.flux_out >= 0.0);
    }

    #[test]
    fn q_distance_is_a_metric(g in field(mesh(24)), h in field(mesh(24)), k in field(mesh(24)), sigma1 in 0.5..0.99f64) {
        let gh = q_distance(&g, &h, sigma1).unwrap();
        prop_assert_eq!(q_distance(&g, &g, sigma1).unwrap(), 0.0);
        prop_assert!((gh - q_distance(&h, &g, sigma1).unwrap()).abs() <= 1e-14 * gh);
        let via = q_distance(&g, &k, sigma1).unwrap() + q_distance(&k, &h, sigma1).unwrap();
        prop_assert!(gh <= via * (1.0 + 1e-12));
    }

    #[test]
    fn tail_mass_is_bounded_by_moments(g in field(mesh(48)), beta in 0.01..15.0f64, r in 0.1..3.0f64) {
        let (lhs, rhs) = tail_bound_check(&g, beta, r).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
        prop_assert!(lhs <= moment(&g, 0.0) * (1.0 + 1e-12));
    }
}
