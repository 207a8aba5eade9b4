//! CSV, JSON report, plot script and digest manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::scenario::{Cell, DataFile, ScenarioResult};
use crate::observables::Trajectory;
use crate::{Error, Result};

/// Column contract of every trajectory CSV.
pub const TRAJECTORY_HEADER: &str =
    "t,rho11_exact,re_rho01,im_rho01,abs_rho01_sq,entropy,purity,p_coupled,rho11_ham,abs_rho01_sq_ham";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

fn num(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("nan");
    } else {
        let _ = write!(out, "{v:.12e}");
    }
}

/// Render a trajectory. Every sample is re-validated first.
pub fn trajectory_csv(traj: &Trajectory, ham_rho11: &[f64], ham_coherence: &[f64]) -> Result<String> {
    let mut out = String::with_capacity(traj.len() * 200);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for (i, s) in traj.samples.iter().enumerate() {
        s.rho.validate().map_err(|e| Error::from(e).context(format!("sample at t = {}", s.t)))?;
        let row = [
            s.t,
            s.rho.rho11,
            s.rho.rho01.re,
            s.rho.rho01.im,
            s.coherence,
            s.entropy,
            s.purity,
            s.p_coupled,
            ham_rho11.get(i).copied().unwrap_or(f64::NAN),
            ham_coherence.get(i).copied().unwrap_or(f64::NAN),
        ];
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            num(&mut out, *v);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn table_csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            match v {
                Cell::Int(i) => {
                    let _ = write!(out, "{i}");
                }
                Cell::Real(x) => num(&mut out, *x),
            }
        }
        out.push('\n');
    }
    out
}

fn plot_script(result: &ScenarioResult) -> String {
    let mut s = String::from("# gnuplot script; run from this directory: gnuplot plot.gp\n");
    s.push_str("set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n");
    for f in &result.files {
        let name = f.name();
        let stem = name.trim_end_matches(".csv");
        match f {
            DataFile::Trajectory { .. } => {
                let _ = writeln!(
                    s,
                    "set output '{stem}_rho11.png'\nset xlabel 't [hbar/u]'\nplot '{name}' using 1:2 with lines title 'exact rho11', '' using 1:9 with lines dt 2 title 'HAM rho11'"
                );
                let _ = writeln!(
                    s,
                    "set output '{stem}_coherence.png'\nplot '{name}' using 1:5 with lines title 'exact |rho01|^2', '' using 1:10 with lines dt 2 title 'HAM |rho01|^2'"
                );
            }
            DataFile::Table { .. } if name == "kernel.csv" => {
                let _ = writeln!(s, "set output 'kernel.png'\nplot '{name}' using 1:4 with lines title '|f(t)|'");
            }
            DataFile::Table { .. } if name == "histogram.csv" => {
                let _ = writeln!(
                    s,
                    "set output 'histogram.png'\nset xlabel 'D'\nset style fill solid 0.5\nplot '{name}' using (($1+$2)/2):3 with boxes title 'members'"
                );
            }
            DataFile::Table { .. } if name == "sweep.csv" => {
                let _ = writeln!(
                    s,
                    "set output 'sweep.png'\nset logscale xy\nset xlabel 'N'\nplot '{name}' using 1:3 with linespoints title 'D^2'\nunset logscale"
                );
            }
            DataFile::Table { .. } => {}
        }
    }
    s
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], manifest: &mut Vec<ManifestEntry>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    manifest.push(ManifestEntry { file: name.to_string(), bytes: bytes.len(), sha256: hex_digest(bytes) });
    Ok(())
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Write every data file, `report.json`, `plot.gp` and `manifest.json`.
pub fn write_outputs(result: &ScenarioResult, out_dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io { path: out_dir.display().to_string(), source })?;
    let mut entries = Vec::new();
    for f in &result.files {
        let text = match f {
            DataFile::Trajectory { trajectory, ham_rho11, ham_coherence, .. } => {
                trajectory_csv(trajectory, ham_rho11, ham_coherence)?
            }
            DataFile::Table { header, rows, .. } => table_csv(header, rows),
        };
        write_file(out_dir, f.name(), text.as_bytes(), &mut entries)?;
    }
    let report = serde_json::to_string_pretty(&result.report).expect("report serializes");
    write_file(out_dir, "report.json", report.as_bytes(), &mut entries)?;
    write_file(out_dir, "plot.gp", plot_script(result).as_bytes(), &mut entries)?;

    let manifest = Manifest { files: entries };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = out_dir.join("manifest.json");
    fs::write(&path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_keeps_integers() {
        let rows = vec![vec![Cell::from(3usize), Cell::from(0.25)], vec![Cell::from(u64::MAX), Cell::from(f64::NAN)]];
        let s = table_csv(&["a", "b"], &rows);
        assert_eq!(s.lines().next(), Some("a,b"));
        assert!(s.contains("3,2.500000000000e-1"));
        assert!(s.contains("18446744073709551615,nan"));
    }

    #[test]
    fn digest_known_value() {
        assert_eq!(hex_digest(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
