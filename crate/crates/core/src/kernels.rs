//! Collision kernel, coalescence/breakage efficiencies and the daughter
//! distribution produced by collisional breakage.
//!
//! The collision kernel is the two-exponent power law
//!
//! ```text
//! phi(z, z1) = c * (z^a * z1^a' + z^a' * z1^a),   0 < a, a' <= 1/2
//! ```
//!
//! and a colliding pair of total volume `s` breaks into daughters with density
//!
//! ```text
//! P(z | z1; z2) = (theta + 2) z^theta / s^(theta + 1),   0 <= z <= s = z1 + z2
//! ```
//!
//! which produces `(theta + 2) / (theta + 1)` fragments (two for the binary
//! case `theta = 0`) and conserves the pair's volume.

use crate::error::{Error, Result};

/// Split of a collision outcome into coalescence (`E`) and breakage (`E1 = 1 - E`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EfficiencyModel {
    /// `E = e0` everywhere.
    Constant(f64),
    /// `E(z, z1) = z z1 / (1 + z z1)`: small pairs tend to break, large pairs merge.
    RatioBounded,
    /// `E = 1`: every collision merges.
    PureCoagulation,
}

impl EfficiencyModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EfficiencyModel::Constant(e) if !(0.0..=1.0).contains(&e) => Err(Error::Domain(
                format!("constant efficiency must lie in [0, 1], got {e}"),
            )),
            _ => Ok(()),
        }
    }

    /// Coalescence efficiency `E(z, z1)`.
    #[inline]
    pub fn coalescence(&self, z: f64, z1: f64) -> f64 {
        match *self {
            EfficiencyModel::Constant(e) => e,
            EfficiencyModel::RatioBounded => {
                let p = z * z1;
                p / (1.0 + p)
            }
            EfficiencyModel::PureCoagulation => 1.0,
        }
    }

    /// Breakage efficiency `E1 = 1 - E`.
    #[inline]
    pub fn breakage(&self, z: f64, z1: f64) -> f64 {
        match *self {
            EfficiencyModel::PureCoagulation => 0.0,
            _ => 1.0 - self.coalescence(z, z1),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EfficiencyModel::Constant(_) => "constant",
            EfficiencyModel::RatioBounded => "ratio_bounded",
            EfficiencyModel::PureCoagulation => "pure_coagulation",
        }
    }
}

/// Parameters of the collision kernel and of the breakage distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub c: f64,
    pub alpha: f64,
    pub alpha_prime: f64,
    pub efficiency: EfficiencyModel,
    pub theta: f64,
}

impl KernelSpec {
    /// Builds a kernel inside the admissible class (`c >= 0`, exponents in `(0, 1/2]`).
    pub fn new(
        c: f64,
        alpha: f64,
        alpha_prime: f64,
        efficiency: EfficiencyModel,
        theta: f64,
    ) -> Result<Self> {
        let spec = KernelSpec {
            c,
            alpha,
            alpha_prime,
            efficiency,
            theta,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Constant kernel `phi == 1` with pure coagulation.
    ///
    /// This lies outside the admissible class (it needs zero exponents) and
    /// exists only so the solver can be compared with the classical
    /// closed-form Smoluchowski solution.
    pub fn constant_test_mode() -> Self {
        KernelSpec {
            c: 0.5,
            alpha: 0.0,
            alpha_prime: 0.0,
            efficiency: EfficiencyModel::PureCoagulation,
            theta: 0.0,
        }
    }

    pub fn is_test_mode(&self) -> bool {
        self.alpha == 0.0 && self.alpha_prime == 0.0
    }

    /// Full admissibility check, rejecting the constant test mode.
    pub fn validate(&self) -> Result<()> {
        join_problems(self.problems())
    }

    /// Checks that hold for every kernel the operators can evaluate,
    /// including the constant test mode.
    pub fn validate_evaluable(&self) -> Result<()> {
        join_problems(self.evaluable_problems())
    }

    pub fn problems(&self) -> Vec<String> {
        let mut problems = self.basic_problems();
        for (name, v) in [("alpha", self.alpha), ("alpha_prime", self.alpha_prime)] {
            if !(v > 0.0 && v <= 0.5) {
                problems.push(format!("{name} must lie in (0, 1/2], got {v}"));
            }
        }
        problems
    }

    pub fn evaluable_problems(&self) -> Vec<String> {
        let mut problems = self.basic_problems();
        if !(self.alpha >= 0.0 && self.alpha_prime >= 0.0) {
            problems.push("kernel exponents must be nonnegative".to_string());
        }
        problems
    }

    fn basic_problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.c >= 0.0 && self.c.is_finite()) {
            problems.push(format!(
                "c must be a nonnegative finite number, got {}",
                self.c
            ));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            problems.push(format!("theta must be >= 0, got {}", self.theta));
        }
        if let EfficiencyModel::Constant(e) = self.efficiency {
            if !(0.0..=1.0).contains(&e) {
                problems.push(format!("constant efficiency must lie in [0, 1], got {e}"));
            }
        }
        problems
    }

    /// Collision rate without input checks; both volumes must be nonnegative.
    #[inline]
    pub fn phi(&self, z: f64, z1: f64) -> f64 {
        let a = z.powf(self.alpha) * z1.powf(self.alpha_prime);
        let b = z.powf(self.alpha_prime) * z1.powf(self.alpha);
        self.c * (a + b)
    }

    /// Mean number of fragments per breakage event, `(theta + 2) / (theta + 1)`.
    pub fn fragments(&self) -> f64 {
        (self.theta + 2.0) / (self.theta + 1.0)
    }
}

fn join_problems(problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Domain(problems.join("; ")))
    }
}

fn check_volume(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be a nonnegative volume, got {v}"
        )))
    }
}

pub fn phi(z: f64, z1: f64, spec: &KernelSpec) -> Result<f64> {
    check_volume("z", z)?;
    check_volume("z1", z1)?;
    Ok(spec.phi(z, z1))
}

/// Kernel restricted to the open square `(0, n) x (0, n)`.
pub fn phi_truncated(z: f64, z1: f64, n: f64, spec: &KernelSpec) -> Result<f64> {
    let value = phi(z, z1, spec)?;
    let inside = |v: f64| v > 0.0 && v < n;
    Ok(if inside(z) && inside(z1) { value } else { 0.0 })
}

/// Returns `(E, E1)`.
pub fn efficiency(z: f64, z1: f64, model: &EfficiencyModel) -> (f64, f64) {
    (model.coalescence(z, z1), model.breakage(z, z1))
}

/// Daughter density `P(z | z1; z2)`.
pub fn breakage_p(z: f64, z1: f64, z2: f64, theta: f64) -> Result<f64> {
    check_volume("z", z)?;
    check_volume("z1", z1)?;
    check_volume("z2", z2)?;
    let s = z1 + z2;
    if s == 0.0 {
        return Err(Error::Domain(
            "breakage distribution is undefined for a pair of total volume 0".into(),
        ));
    }
    if z > s {
        return Ok(0.0);
    }
    Ok((theta + 2.0) * z.powf(theta) / s.powf(theta + 1.0))
}

/// Exact value of `int_0^s z^r P(z | z1; z2) dz = (theta + 2) / (r + theta + 1) * s^r`.
pub fn p_moment(r: f64, s: f64, theta: f64) -> Result<f64> {
    let limit = -1.0 - theta;
    if r <= limit {
        return Err(Error::DivergentIntegral { r, limit });
    }
    if !(s > 0.0) {
        return Err(Error::Domain(format!(
            "total volume must be positive, got {s}"
        )));
    }
    Ok((theta + 2.0) / (r + theta + 1.0) * s.powf(r))
}

/// Sharp constant in `int_0^s z^(-r*) P dz <= zeta * s^(-r*)` for binary breakage.
pub fn zeta_bound(r_star: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r_star) {
        return Err(Error::Domain(format!(
            "r* must lie in [0, 1), got {r_star}"
        )));
    }
    Ok(2.0 / (1.0 - r_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn half_spec(c: f64) -> KernelSpec {
        KernelSpec::new(c, 0.5, 0.5, EfficiencyModel::Constant(0.5), 0.0).unwrap()
    }

    /// Composite midpoint rule, written independently of the grid module.
    fn midpoint(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| f(a + (i as f64 + 0.5) * h))
            .sum::<f64>()
            * h
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(4.0, 1.0, &half_spec(1.0)).unwrap(), 4.0);
        assert_eq!(phi(0.0, 5.0, &half_spec(1.0)).unwrap(), 0.0);
        let spec = KernelSpec::new(0.5, 0.3, 0.5, EfficiencyModel::RatioBounded, 0.0).unwrap();
        assert_eq!(phi(2.0, 3.0, &spec).unwrap(), phi(3.0, 2.0, &spec).unwrap());
        assert!(matches!(phi(-1.0, 1.0, &spec), Err(Error::Domain(_))));
    }

    #[test]
    fn truncated_kernel_support() {
        let spec = half_spec(1.0);
        let n = 10.0;
        assert_eq!(phi_truncated(n + 1.0, 1.0, n, &spec).unwrap(), 0.0);
        assert_eq!(
            phi_truncated(n / 2.0, n / 2.0, n, &spec).unwrap(),
            spec.phi(n / 2.0, n / 2.0)
        );
        assert_eq!(phi_truncated(n, 1.0, n, &spec).unwrap(), 0.0);
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(
            efficiency(3.0, 7.0, &EfficiencyModel::Constant(0.7)),
            (0.7, 1.0 - 0.7)
        );
        assert_eq!(
            efficiency(3.0, 7.0, &EfficiencyModel::PureCoagulation),
            (1.0, 0.0)
        );
        assert_eq!(
            efficiency(1.0, 1.0, &EfficiencyModel::RatioBounded),
            (0.5, 0.5)
        );
        assert!(EfficiencyModel::Constant(1.5).validate().is_err());
    }

    #[test]
    fn breakage_p_examples() {
        for z in [0.0, 0.3, 1.0, 2.0] {
            assert_eq!(breakage_p(z, 1.0, 1.0, 0.0).unwrap(), 1.0);
        }
        assert_eq!(breakage_p(3.0, 1.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(breakage_p(0.5, 0.0, 0.0, 0.0).is_err());
        let n = midpoint(|z| breakage_p(z, 1.0, 1.0, 0.0).unwrap(), 0.0, 2.0, 1000);
        assert!((n - 2.0).abs() < 1e-12);
    }

    #[test]
    fn p_moment_examples() {
        assert_eq!(p_moment(1.0, 2.0, 0.0).unwrap(), 2.0);
        assert!((p_moment(2.0, 2.0, 0.0).unwrap() - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(p_moment(0.0, 5.0, 0.0).unwrap(), 2.0);
        assert!(matches!(
            p_moment(-1.0, 1.0, 0.0),
            Err(Error::DivergentIntegral { .. })
        ));
        assert!(p_moment(-1.2, 1.0, 0.5).is_ok());
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta_bound(0.0).unwrap(), 2.0);
        assert_eq!(zeta_bound(0.5).unwrap(), 4.0);
        assert!((zeta_bound(0.9).unwrap() - 20.0).abs() < 1e-12);
        assert!(zeta_bound(1.0).is_err());
        // analytic oracle: int_0^s z^(-r) (2/s) dz = 2/(1-r) s^(-r)
        for (r, s) in [(0.5f64, 3.0f64), (0.9, 0.2)] {
            let exact = 2.0 / s * s.powf(1.0 - r) / (1.0 - r);
            assert!((exact - zeta_bound(r).unwrap() * s.powf(-r)).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn validation_rejects_out_of_class_exponents() {
        let err = KernelSpec::new(1.0, 0.6, 0.5, EfficiencyModel::PureCoagulation, 0.0)
            .unwrap_err()
            .to_string();
        assert!(err.contains("alpha must lie in (0, 1/2]"), "{err}");
        assert!(KernelSpec::new(1.0, 0.0, 0.5, EfficiencyModel::PureCoagulation, 0.0).is_err());
        assert!(KernelSpec::constant_test_mode().validate().is_err());
        assert!(KernelSpec::constant_test_mode()
            .validate_evaluable()
            .is_ok());
        assert_eq!(KernelSpec::constant_test_mode().phi(3.0, 0.25), 1.0);
    }

    #[test]
    fn symmetry_and_partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = KernelSpec::new(0.8, 0.2, 0.45, EfficiencyModel::RatioBounded, 0.0).unwrap();
        for _ in 0..10_000 {
            let z: f64 = rng.gen_range(0.0..50.0);
            let z1: f64 = rng.gen_range(0.0..50.0);
            let z2: f64 = rng.gen_range(1e-6..50.0);
            assert_eq!(spec.phi(z, z1).to_bits(), spec.phi(z1, z).to_bits());
            let theta = rng.gen_range(0.0..3.0);
            assert_eq!(
                breakage_p(z, z1, z2, theta).unwrap().to_bits(),
                breakage_p(z, z2, z1, theta).unwrap().to_bits()
            );
            for model in [
                EfficiencyModel::Constant(rng.gen()),
                EfficiencyModel::RatioBounded,
                EfficiencyModel::PureCoagulation,
            ] {
                let (e, e1) = efficiency(z, z1, &model);
                assert!((0.0..=1.0).contains(&e));
                assert!((e + e1 - 1.0).abs() <= f64::EPSILON);
                assert_eq!(e, model.coalescence(z1, z));
            }
        }
    }

    #[test]
    fn quadrature_matches_p_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (z1, z2): (f64, f64) = (rng.gen_range(0.01..20.0), rng.gen_range(0.01..20.0));
            let s = z1 + z2;
            for r in [0.0, 1.0, 2.0] {
                let q = midpoint(
                    |z| z.powf(r) * breakage_p(z, z1, z2, 0.0).unwrap(),
                    0.0,
                    s,
                    10_000,
                );
                let exact = p_moment(r, s, 0.0).unwrap();
                assert!(
                    (q - exact).abs() <= 1e-6 * exact,
                    "r={r} s={s}: {q} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn negative_moment_bound_holds() {
        for r_star in [0.0, 0.25, 0.5, 0.75] {
            for s in [0.1, 1.0, 7.5] {
                // substitute z = s u^(1/(1-r*)) to remove the endpoint singularity
                let k = 1.0 / (1.0 - r_star);
                let q = midpoint(
                    |u: f64| {
                        let z = s * u.powf(k);
                        let dz = s * k * u.powf(k - 1.0);
                        z.powf(-r_star) * breakage_p(z, s / 2.0, s / 2.0, 0.0).unwrap() * dz
                    },
                    0.0,
                    1.0,
                    10_000,
                );
                let bound = zeta_bound(r_star).unwrap() * s.powf(-r_star);
                assert!(
                    q <= bound * (1.0 + 1e-6),
                    "r*={r_star}, s={s}: {q} > {bound}"
                );
            }
        }
    }
}
