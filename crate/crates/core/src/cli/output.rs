use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{Failure, EXIT_IO};
use crate::simulate::Trajectory;
use crate::system::phase_of;

pub const CSV_SCHEMA: &str = "rank-recur/trajectory/v1";

/// `n,x,phase` with 17 significant digits.
pub fn trajectory_csv(t: &Trajectory) -> String {
    values_csv(&t.values, t.period)
}

/// CSV for `x_1, x_2, ...` under forcing period `period`.
pub fn values_csv(values: &[f64], period: usize) -> String {
    let mut s = String::with_capacity(32 * (values.len() + 1));
    s.push_str("n,x,phase\n");
    for (i, x) in values.iter().enumerate() {
        let n = i + 1;
        let _ = writeln!(s, "{n},{x:.16e},{}", phase_of(n as i64, period));
    }
    s
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::new(EXIT_IO, format!("output: cannot create {}: {e}", dir.display())))
}

pub fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body)
        .map_err(|e| Failure::new(EXIT_IO, format!("output: cannot write {}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

/// Writes `report.json` into `dir`, if given.
pub fn write_report<T: Serialize>(dir: Option<&Path>, report: &T) -> Result<(), Failure> {
    if let Some(dir) = dir {
        ensure_dir(dir)?;
        write_file(&dir.join("report.json"), &to_json(report))?;
    }
    Ok(())
}

/// Compact rendering of a short value list.
pub fn fmt_values(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.12}")).collect();
    format!("[{}]", parts.join(", "))
}
