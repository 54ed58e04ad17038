//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [kernel]
//! c = 1
//! alpha = 0.5
//! efficiency = constant
//! efficiency_param = 0.5
//!
//! [mesh]
//! cells = 256
//! ```
//!
//! Every key is optional and falls back to the default scenario. Numbers
//! may use decimal or scientific notation.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::grid::MeshKind;
use crate::kernels::{EfficiencyModel, KernelSpec};
use crate::solver::{InitialDatum, SolverConfig};
use crate::verification::SpaceParams;

/// Every problem found in a configuration, not just the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.problems.join("; "))
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshConfig {
    pub z_min: f64,
    pub n: f64,
    pub cells: usize,
    pub kind: MeshKind,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            z_min: 1e-4,
            n: 50.0,
            cells: 256,
            kind: MeshKind::Geometric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub operator_oracle: bool,
    pub mass_law: bool,
    pub moment_bounds: bool,
    pub uniform_bound: bool,
    pub equicontinuity: bool,
    pub tail_bound: bool,
    pub continuous_dependence: bool,
    /// Right end of the window `[0, Z°]` of the pointwise estimates.
    pub z_o: f64,
    /// Relative size of the perturbed initial datum.
    pub perturbation: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            operator_oracle: true,
            mass_law: true,
            moment_bounds: true,
            uniform_bound: true,
            equicontinuity: true,
            tail_bound: true,
            continuous_dependence: true,
            z_o: 10.0,
            perturbation: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    pub trajectory: String,
    pub moments: String,
    pub report: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            trajectory: "trajectory.csv".into(),
            moments: "moments.csv".into(),
            report: "report.txt".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    /// Constant kernel `phi == 2c` outside the admissible class; the
    /// exponents must then be 0.
    pub test_mode: bool,
    pub mesh: MeshConfig,
    pub space: SpaceParams,
    pub init: InitialDatum,
    pub solver: SolverConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel: KernelSpec {
                c: 1.0,
                alpha: 0.5,
                alpha_prime: 0.5,
                efficiency: EfficiencyModel::Constant(0.5),
                theta: 0.0,
            },
            test_mode: false,
            mesh: MeshConfig::default(),
            space: SpaceParams::default(),
            init: InitialDatum::default(),
            solver: SolverConfig::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

const MIN_CELLS: usize = 8;

impl RunConfig {
    /// Every violated constraint.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.test_mode {
            p.extend(self.kernel.evaluable_problems());
            if self.kernel.alpha != 0.0 || self.kernel.alpha_prime != 0.0 {
                p.push("test_mode requires alpha = alpha_prime = 0".into());
            }
        } else {
            p.extend(self.kernel.problems());
            p.extend(self.space.problems(&self.kernel));
        }
        let m = &self.mesh;
        if !(m.z_min > 0.0 && m.z_min.is_finite()) {
            p.push(format!("z_min must be positive, got {}", m.z_min));
        }
        if !(m.n > m.z_min && m.n.is_finite()) {
            p.push(format!(
                "n must be a finite volume above z_min, got {}",
                m.n
            ));
        }
        if m.cells < MIN_CELLS {
            p.push(format!(
                "cells must be at least {MIN_CELLS}, got {}",
                m.cells
            ));
        }
        p.extend(self.init.problems(self.space.sigma1));
        p.extend(self.solver.problems());
        let v = &self.verify;
        if !(v.z_o > 0.0 && v.z_o <= m.n) {
            p.push(format!("z_o = {} must lie in (0, n]", v.z_o));
        }
        if !(v.perturbation > 0.0 && v.perturbation.is_finite()) {
            p.push(format!(
                "perturbation must be positive, got {}",
                v.perturbation
            ));
        }
        for (name, value) in [
            ("dir", &self.output.dir),
            ("trajectory", &self.output.trajectory),
            ("moments", &self.output.moments),
            ("report", &self.output.report),
        ] {
            if value.is_empty() {
                p.push(format!("output {name} must not be empty"));
            }
        }
        p
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { problems })
        }
    }

    /// Canonical text form; parsing it yields an identical configuration.
    pub fn emit(&self) -> String {
        let k = &self.kernel;
        let (eff, eff_param) = match k.efficiency {
            EfficiencyModel::Constant(e) => ("constant", e),
            EfficiencyModel::RatioBounded => ("ratio_bounded", 0.0),
            EfficiencyModel::PureCoagulation => ("pure_coagulation", 1.0),
        };
        let mut s = String::new();
        let _ = writeln!(s, "[kernel]");
        let _ = writeln!(s, "c = {:?}", k.c);
        let _ = writeln!(s, "alpha = {:?}", k.alpha);
        let _ = writeln!(s, "alpha_prime = {:?}", k.alpha_prime);
        let _ = writeln!(s, "theta = {:?}", k.theta);
        let _ = writeln!(s, "efficiency = {eff}");
        let _ = writeln!(s, "efficiency_param = {eff_param:?}");
        let _ = writeln!(s, "test_mode = {}", self.test_mode);
        let m = &self.mesh;
        let _ = writeln!(s, "\n[mesh]");
        let _ = writeln!(s, "z_min = {:?}", m.z_min);
        let _ = writeln!(s, "n = {:?}", m.n);
        let _ = writeln!(s, "cells = {}", m.cells);
        let _ = writeln!(s, "kind = {}", m.kind.name());
        let _ = writeln!(s, "\n[space]");
        let _ = writeln!(s, "sigma1 = {:?}", self.space.sigma1);
        let _ = writeln!(s, "sigma2 = {:?}", self.space.sigma2);
        let _ = writeln!(s, "\n[init]");
        let _ = writeln!(s, "kind = {}", self.init.name());
        match self.init {
            InitialDatum::Exponential { amplitude, decay } => {
                let _ = writeln!(s, "amplitude = {amplitude:?}");
                let _ = writeln!(s, "decay = {decay:?}");
            }
            InitialDatum::TruncatedPowerExp {
                amplitude,
                p,
                decay,
            } => {
                let _ = writeln!(s, "amplitude = {amplitude:?}");
                let _ = writeln!(s, "p = {p:?}");
                let _ = writeln!(s, "decay = {decay:?}");
            }
            InitialDatum::Monodisperse {
                amplitude,
                center,
                width,
            } => {
                let _ = writeln!(s, "amplitude = {amplitude:?}");
                let _ = writeln!(s, "center = {center:?}");
                let _ = writeln!(s, "width = {width:?}");
            }
        }
        let c = &self.solver;
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "t_end = {:?}", c.t_end);
        let _ = writeln!(s, "dt_init = {:?}", c.dt_init);
        let _ = writeln!(s, "dt_max = {:?}", c.dt_max);
        let _ = writeln!(s, "safety = {:?}", c.safety);
        let _ = writeln!(s, "tol_step = {:?}", c.tol_step);
        let _ = writeln!(s, "negativity_tol = {:?}", c.negativity_tol);
        let _ = writeln!(s, "record_every = {}", c.record_every);
        let v = &self.verify;
        let _ = writeln!(s, "\n[verify]");
        let _ = writeln!(s, "operator_oracle = {}", v.operator_oracle);
        let _ = writeln!(s, "mass_law = {}", v.mass_law);
        let _ = writeln!(s, "moment_bounds = {}", v.moment_bounds);
        let _ = writeln!(s, "uniform_bound = {}", v.uniform_bound);
        let _ = writeln!(s, "equicontinuity = {}", v.equicontinuity);
        let _ = writeln!(s, "tail_bound = {}", v.tail_bound);
        let _ = writeln!(s, "continuous_dependence = {}", v.continuous_dependence);
        let _ = writeln!(s, "z_o = {:?}", v.z_o);
        let _ = writeln!(s, "perturbation = {:?}", v.perturbation);
        let o = &self.output;
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", o.dir);
        let _ = writeln!(s, "trajectory = {}", o.trajectory);
        let _ = writeln!(s, "moments = {}", o.moments);
        let _ = writeln!(s, "report = {}", o.report);
        s
    }

    /// Hex SHA-256 of the canonical text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.emit().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

const SECTIONS: [(&str, &[&str]); 7] = [
    (
        "kernel",
        &[
            "c",
            "alpha",
            "alpha_prime",
            "theta",
            "efficiency",
            "efficiency_param",
            "test_mode",
        ],
    ),
    ("mesh", &["z_min", "n", "cells", "kind"]),
    ("space", &["sigma1", "sigma2"]),
    (
        "init",
        &["kind", "amplitude", "decay", "p", "center", "width"],
    ),
    (
        "solver",
        &[
            "t_end",
            "dt_init",
            "dt_max",
            "safety",
            "tol_step",
            "negativity_tol",
            "record_every",
        ],
    ),
    (
        "verify",
        &[
            "operator_oracle",
            "mass_law",
            "moment_bounds",
            "uniform_bound",
            "equicontinuity",
            "tail_bound",
            "continuous_dependence",
            "z_o",
            "perturbation",
        ],
    ),
    ("output", &["dir", "trajectory", "moments", "report"]),
];

struct Entries<'a> {
    items: Vec<(&'a str, &'a str, &'a str, usize)>,
    problems: Vec<String>,
}

impl<'a> Entries<'a> {
    fn raw(&self, section: &str, key: &str) -> Option<(&'a str, usize)> {
        self.items
            .iter()
            .find(|(s, k, _, _)| *s == section && *k == key)
            .map(|&(_, _, v, line)| (v, line))
    }

    fn num(&mut self, section: &str, key: &str, default: f64) -> f64 {
        match self.raw(section, key) {
            None => default,
            Some((v, line)) => match v.parse::<f64>() {
                Ok(x) => x,
                Err(_) => {
                    self.problems.push(format!(
                        "line {line}: [{section}] {key} = `{v}` is not a number"
                    ));
                    default
                }
            },
        }
    }

    fn count(&mut self, section: &str, key: &str, default: usize) -> usize {
        match self.raw(section, key) {
            None => default,
            Some((v, line)) => match v.parse::<usize>() {
                Ok(x) => x,
                Err(_) => {
                    self.problems.push(format!(
                        "line {line}: [{section}] {key} = `{v}` is not a nonnegative integer"
                    ));
                    default
                }
            },
        }
    }

    fn flag(&mut self, section: &str, key: &str, default: bool) -> bool {
        match self.raw(section, key) {
            None => default,
            Some((v, line)) => match v {
                "true" | "yes" | "on" | "1" => true,
                "false" | "no" | "off" | "0" => false,
                _ => {
                    self.problems.push(format!(
                        "line {line}: [{section}] {key} = `{v}` is not a boolean"
                    ));
                    default
                }
            },
        }
    }

    fn text(&self, section: &str, key: &str, default: &str) -> String {
        self.raw(section, key)
            .map(|(v, _)| v)
            .unwrap_or(default)
            .to_string()
    }
}

/// Parses and validates a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut items = Vec::new();
    let mut problems = Vec::new();
    let mut seen = BTreeSet::new();
    let mut section: Option<&str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').map(str::trim);
            match name {
                Some(name) if SECTIONS.iter().any(|(s, _)| *s == name) => section = Some(name),
                Some(name) => {
                    problems.push(format!("line {line_no}: unknown section [{name}]"));
                    section = None;
                }
                None => problems.push(format!("line {line_no}: malformed section header `{line}`")),
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            problems.push(format!(
                "line {line_no}: expected `key = value`, got `{line}`"
            ));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section else {
            problems.push(format!(
                "line {line_no}: key `{key}` outside a known section"
            ));
            continue;
        };
        let known = SECTIONS
            .iter()
            .find(|(s, _)| *s == sec)
            .map(|(_, keys)| keys.contains(&key))
            .unwrap_or(false);
        if !known {
            problems.push(format!(
                "line {line_no}: unknown key `{key}` in section [{sec}]"
            ));
            continue;
        }
        if !seen.insert((sec, key)) {
            problems.push(format!(
                "line {line_no}: duplicate key `{key}` in section [{sec}]"
            ));
            continue;
        }
        items.push((sec, key, value, line_no));
    }

    let mut e = Entries { items, problems };
    let d = RunConfig::default();

    let eff_name = e.text("kernel", "efficiency", "constant");
    let eff_param = e.num("kernel", "efficiency_param", 0.5);
    let efficiency = match eff_name.as_str() {
        "constant" => EfficiencyModel::Constant(eff_param),
        "ratio_bounded" => EfficiencyModel::RatioBounded,
        "pure_coagulation" => EfficiencyModel::PureCoagulation,
        other => {
            e.problems.push(format!(
                "unknown efficiency `{other}` (expected constant, ratio_bounded or pure_coagulation)"
            ));
            d.kernel.efficiency
        }
    };
    let test_mode = e.flag("kernel", "test_mode", false);
    let (alpha_default, c_default) = if test_mode {
        (0.0, 0.5)
    } else {
        (d.kernel.alpha, d.kernel.c)
    };
    let kernel = KernelSpec {
        c: e.num("kernel", "c", c_default),
        alpha: e.num("kernel", "alpha", alpha_default),
        alpha_prime: e.num("kernel", "alpha_prime", alpha_default),
        efficiency,
        theta: e.num("kernel", "theta", d.kernel.theta),
    };

    let kind = match e.text("mesh", "kind", "geometric").as_str() {
        "geometric" => MeshKind::Geometric,
        "uniform" => MeshKind::Uniform,
        other => {
            e.problems.push(format!(
                "unknown mesh kind `{other}` (expected geometric or uniform)"
            ));
            MeshKind::Geometric
        }
    };
    let mesh = MeshConfig {
        z_min: e.num("mesh", "z_min", d.mesh.z_min),
        n: e.num("mesh", "n", d.mesh.n),
        cells: e.count("mesh", "cells", d.mesh.cells),
        kind,
    };
    let space = SpaceParams {
        sigma1: e.num("space", "sigma1", d.space.sigma1),
        sigma2: e.num("space", "sigma2", d.space.sigma2),
    };
    let amplitude = e.num("init", "amplitude", 1.0);
    let init = match e.text("init", "kind", "exponential").as_str() {
        "exponential" => InitialDatum::Exponential {
            amplitude,
            decay: e.num("init", "decay", 1.0),
        },
        "power_exp" => InitialDatum::TruncatedPowerExp {
            amplitude,
            p: e.num("init", "p", 0.25),
            decay: e.num("init", "decay", 1.0),
        },
        "monodisperse" => InitialDatum::Monodisperse {
            amplitude,
            center: e.num("init", "center", 1.0),
            width: e.num("init", "width", 0.1),
        },
        other => {
            e.problems.push(format!(
                "unknown initial datum `{other}` (expected exponential, power_exp or monodisperse)"
            ));
            d.init
        }
    };
    let solver = SolverConfig {
        t_end: e.num("solver", "t_end", d.solver.t_end),
        dt_init: e.num("solver", "dt_init", d.solver.dt_init),
        dt_max: e.num("solver", "dt_max", d.solver.dt_max),
        safety: e.num("solver", "safety", d.solver.safety),
        tol_step: e.num("solver", "tol_step", d.solver.tol_step),
        negativity_tol: e.num("solver", "negativity_tol", d.solver.negativity_tol),
        record_every: e.count("solver", "record_every", d.solver.record_every),
        neg_moment_order: space.sigma1,
    };
    let dv = d.verify;
    let verify = VerifyConfig {
        operator_oracle: e.flag("verify", "operator_oracle", dv.operator_oracle),
        mass_law: e.flag("verify", "mass_law", dv.mass_law),
        moment_bounds: e.flag("verify", "moment_bounds", dv.moment_bounds),
        uniform_bound: e.flag("verify", "uniform_bound", dv.uniform_bound),
        equicontinuity: e.flag("verify", "equicontinuity", dv.equicontinuity),
        tail_bound: e.flag("verify", "tail_bound", dv.tail_bound),
        continuous_dependence: e.flag("verify", "continuous_dependence", dv.continuous_dependence),
        z_o: e.num("verify", "z_o", dv.z_o),
        perturbation: e.num("verify", "perturbation", dv.perturbation),
    };
    let output = OutputConfig {
        dir: e.text("output", "dir", &d.output.dir),
        trajectory: e.text("output", "trajectory", &d.output.trajectory),
        moments: e.text("output", "moments", &d.output.moments),
        report: e.text("output", "report", &d.output.report),
    };

    let cfg = RunConfig {
        kernel,
        test_mode,
        mesh,
        space,
        init,
        solver,
        verify,
        output,
    };
    let mut problems = e.problems;
    problems.extend(cfg.problems());
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { problems })
    }
}

/// Reads and parses a configuration file.
pub fn load_config(path: &std::path::Path) -> crate::error::Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::error::Error::io(path, e))?;
    parse_config(&text).map_err(crate::error::Error::Config)
}
