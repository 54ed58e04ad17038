//! CSV trajectories, moment logs and flat verification reports.
//!
//! Floats are written with 17 significant digits so that reading a file
//! back reproduces every value bit for bit. Files are written to a
//! temporary sibling and renamed into place, so a failed write never
//! leaves a partial file behind.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::{MomentRecord, Trajectory};
use crate::verification::{BoundLedger, CheckReport};

fn num(s: &mut String, v: f64) {
    let _ = write!(s, "{v:.16e}");
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let x = traj.mesh().centers();
    let mut s = String::with_capacity(48 * x.len() * traj.snapshots.len() + 8);
    s.push_str("t,z,g\n");
    for snap in &traj.snapshots {
        for (z, g) in x.iter().zip(&snap.values) {
            num(&mut s, snap.time);
            s.push(',');
            num(&mut s, *z);
            s.push(',');
            num(&mut s, *g);
            s.push('\n');
        }
    }
    s
}

pub fn moments_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t,M_neg,M0,M1,M2,flux_out\n");
    for m in &traj.moments {
        for (i, v) in [m.t, m.m_neg, m.m0, m.m1, m.m2, m.flux_out]
            .iter()
            .enumerate()
        {
            if i > 0 {
                s.push(',');
            }
            num(&mut s, *v);
        }
        s.push('\n');
    }
    s
}

/// One block of a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRows {
    pub t: f64,
    pub z: Vec<f64>,
    pub g: Vec<f64>,
}

fn parse_row<const N: usize>(line: &str, line_no: usize, what: &'static str) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    let mut fields = line.split(',');
    for slot in out.iter_mut() {
        let field = fields.next().ok_or_else(|| Error::Parse {
            what,
            detail: format!("line {line_no}: expected {N} fields"),
        })?;
        *slot = field.trim().parse().map_err(|_| Error::Parse {
            what,
            detail: format!("line {line_no}: `{field}` is not a number"),
        })?;
    }
    if fields.next().is_some() {
        return Err(Error::Parse {
            what,
            detail: format!("line {line_no}: expected {N} fields"),
        });
    }
    Ok(out)
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<SnapshotRows>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "t,z,g")) => {}
        _ => {
            return Err(Error::Parse {
                what: "trajectory csv",
                detail: "missing `t,z,g` header".into(),
            })
        }
    }
    let mut blocks: Vec<SnapshotRows> = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let [t, z, g] = parse_row::<3>(line, i + 1, "trajectory csv")?;
        match blocks.last_mut() {
            Some(b) if b.t.to_bits() == t.to_bits() => {
                b.z.push(z);
                b.g.push(g);
            }
            _ => blocks.push(SnapshotRows {
                t,
                z: vec![z],
                g: vec![g],
            }),
        }
    }
    Ok(blocks)
}

pub fn parse_moments_csv(text: &str) -> Result<Vec<MomentRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "t,M_neg,M0,M1,M2,flux_out")) => {}
        _ => {
            return Err(Error::Parse {
                what: "moment csv",
                detail: "missing `t,M_neg,M0,M1,M2,flux_out` header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let [t, m_neg, m0, m1, m2, flux_out] = parse_row::<6>(line, i + 1, "moment csv")?;
        out.push(MomentRecord {
            t,
            m_neg,
            m0,
            m1,
            m2,
            flux_out,
        });
    }
    Ok(out)
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    write_atomic(path, &trajectory_csv(traj))
}

pub fn write_moments(traj: &Trajectory, path: &Path) -> Result<()> {
    write_atomic(path, &moments_csv(traj))
}

/// Outcome of a verification pipeline for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub fingerprint: String,
    pub checks: Vec<CheckReport>,
    pub ledger: Option<BoundLedger>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckReport> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// One `name=pass|fail margin=value` line per check, preceded by the
    /// configuration fingerprint and followed by ledger and detail lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "fingerprint={}", self.fingerprint);
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "fail" };
            let _ = writeln!(s, "{}={status} margin={:.16e}", c.name, c.margin);
        }
        if let Some(l) = &self.ledger {
            for (k, v) in [
                ("Gamma0", l.gamma0),
                ("Gamma1", l.gamma1),
                ("Gamma2_T", l.gamma2_t),
                ("Gamma_neg_T", l.gamma_neg_t),
                ("A0", l.a0),
                ("ln_S_T", l.ln_s_t),
                ("ln_C_emp", l.ln_c_emp),
                ("zeta", l.zeta),
            ] {
                let _ = writeln!(s, "ledger.{k}={v:.16e}");
            }
        }
        for c in &self.checks {
            for (k, v) in &c.details {
                let _ = writeln!(s, "detail.{}.{k}={v:.16e}", c.name);
            }
            for v in &c.violations {
                let _ = writeln!(s, "violation.{}={}", c.name, v.replace('\n', " "));
            }
        }
        s
    }
}

pub fn write_report(report: &VerificationReport, path: &Path) -> Result<()> {
    write_atomic(path, &report.to_text())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, MeshKind};
    use crate::kernels::{EfficiencyModel, KernelSpec};
    use crate::solver::{run, InitialDatum, SolverConfig};
    use crate::verification::moment_values;

    fn small_run(t_end: f64) -> Trajectory {
        let mesh = build_mesh(1e-3, 10.0, 16, MeshKind::Geometric).unwrap();
        let spec = KernelSpec::new(1.0, 0.5, 0.5, EfficiencyModel::Constant(0.5), 0.0).unwrap();
        let cfg = SolverConfig {
            t_end,
            ..SolverConfig::default()
        };
        run(&InitialDatum::default(), mesh, &spec, &cfg).unwrap()
    }

    #[test]
    fn trajectory_round_trip_is_bit_exact() {
        let traj = small_run(0.3);
        let blocks = parse_trajectory_csv(&trajectory_csv(&traj)).unwrap();
        assert_eq!(blocks.len(), traj.snapshots.len());
        for (b, s) in blocks.iter().zip(&traj.snapshots) {
            assert_eq!(b.t.to_bits(), s.time.to_bits());
            assert_eq!(b.g, s.values);
            assert_eq!(b.z, traj.mesh().centers());
        }
        let moments = parse_moments_csv(&moments_csv(&traj)).unwrap();
        assert_eq!(moments, traj.moments);
    }

    #[test]
    fn empty_horizon_has_one_block() {
        let traj = small_run(0.0);
        let blocks = parse_trajectory_csv(&trajectory_csv(&traj)).unwrap();
        assert_eq!(blocks.len(), 1);
        let moments = parse_moments_csv(&moments_csv(&traj)).unwrap();
        assert_eq!(moments[0].t, 0.0);
        assert_eq!(
            moments[0].m1,
            moment_values(&traj.initial().values, traj.mesh(), 1.0)
        );
    }

    #[test]
    fn atomic_write_replaces_and_reports_bad_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        let bad = dir.path().join("missing").join("a.txt");
        let err = write_atomic(&bad, "x").unwrap_err();
        assert!(err.to_string().contains("missing"));
        assert!(!bad.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn report_lines() {
        let mut ok = CheckReport::new("mass_law");
        ok.margin = 0.25;
        let mut bad = CheckReport::new("moment_bounds");
        bad.passed = false;
        bad.margin = 2.0;
        let rep = VerificationReport {
            fingerprint: "abc".into(),
            checks: vec![ok, bad],
            ledger: None,
        };
        let text = rep.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "fingerprint=abc");
        assert!(lines[1].starts_with("mass_law=pass margin=2.5"));
        assert!(lines[2].starts_with("moment_bounds=fail margin=2.0"));
        assert!(!rep.passed());
    }

    #[test]
    fn rejects_malformed_csv() {
        assert!(parse_trajectory_csv("x,y\n").is_err());
        assert!(parse_trajectory_csv("t,z,g\n1,2\n").is_err());
        assert!(parse_moments_csv("t,M_neg,M0,M1,M2,flux_out\n1,2,3,4,5,x\n").is_err());
    }
}
