//! Deterministic CSV/JSON emission with atomic file replacement.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use seaforge::{FrequencyResponseTable, SimTrace};
use serde::Serialize;

use crate::CliError;

/// 17 significant digits: enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub const BODE_HEADER: &str = "freq_hz,mag_db,phase_deg,re,im";
pub const TRACE_HEADER: &str = "t,q_des,q_j,q_m,dq_j,tau_k,tau_des,i_m";

/// Bode table as CSV. Rows that failed to evaluate keep their frequency and
/// leave the other cells empty; the number of such rows is returned.
pub fn bode_csv(table: &FrequencyResponseTable<f64>) -> (String, usize) {
    let mut s = String::with_capacity(table.len() * 100);
    s.push_str(BODE_HEADER);
    s.push('\n');
    let mut failed = 0;
    for i in 0..table.len() {
        let c = table.complex_values[i];
        if c.is_none() {
            failed += 1;
        }
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(table.frequencies_hz[i]),
            opt(table.magnitude_db[i]),
            opt(table.phase_deg[i]),
            opt(c.map(|c| c.re)),
            opt(c.map(|c| c.im)),
        );
    }
    (s, failed)
}

pub fn trace_csv(trace: &SimTrace<f64>) -> String {
    let mut s = String::with_capacity(trace.len() * 200);
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for i in 0..trace.len() {
        let row = [
            trace.time[i],
            trace.q_des[i],
            trace.q_j[i],
            trace.q_m[i],
            trace.dq_j[i],
            trace.tau_k[i],
            trace.tau_des[i],
            trace.i_m[i],
        ];
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// `gain_scale,phase_margin_deg`, empty margin cell when there is none.
pub fn sweep_csv(rows: &[(f64, Option<f64>)]) -> String {
    let mut s = String::from("gain_scale,phase_margin_deg\n");
    for &(gs, pm) in rows {
        let _ = writeln!(s, "{},{}", num(gs), opt(pm));
    }
    s
}

/// Pretty JSON with shortest round-trip numbers and a trailing newline.
pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to `dir/name` through a temporary file in `dir`, so a
/// reader never sees a half-written file.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        // temp files are created 0600
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644)).map_err(io)?;
    }
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(&path).map_err(|e| io(e.error))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn sweep_leaves_missing_margin_empty() {
        let s = sweep_csv(&[(1.0, Some(45.0)), (3.0, None)]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "gain_scale,phase_margin_deg");
        assert!(lines[2].ends_with(','));
    }
}
