//! Report files: report.json, table.csv, curve_<task>_<predictor>.csv and
//! radar.csv. Numbers use Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{horizon_curve, EvalReport, HarnessError};
use crate::episodes::EpisodeError;

fn write_file(path: &Path, contents: &[u8], overwrite: bool) -> Result<(), HarnessError> {
    if !overwrite && path.exists() {
        return Err(EpisodeError::AlreadyExists(path.to_path_buf()).into());
    }
    fs::write(path, contents).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })
}

/// Table-1-shaped grid: one row per predictor, one column per task.
pub fn write_table(report: &EvalReport, dir: &Path, overwrite: bool) -> Result<PathBuf, HarnessError> {
    let tasks = report.tasks();
    let mut csv = String::from("predictor");
    for t in &tasks {
        write!(csv, ",{t}").unwrap();
    }
    csv.push('\n');
    for p in report.predictors() {
        csv.push_str(&p);
        for &t in &tasks {
            match report.cell(&p, t) {
                Some(c) => write!(csv, ",{}", c.mse).unwrap(),
                None => csv.push(','),
            }
        }
        csv.push('\n');
    }
    let path = dir.join("table.csv");
    write_file(&path, csv.as_bytes(), overwrite)?;
    Ok(path)
}

pub fn write_curves(report: &EvalReport, dir: &Path, overwrite: bool) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(dir)?;
    let mut paths = Vec::new();
    for cell in &report.cells {
        let mut csv = String::from("h,mse\n");
        for (h, e) in horizon_curve(cell) {
            writeln!(csv, "{h},{e}").unwrap();
        }
        let path = dir.join(format!("curve_{}_{}.csv", cell.task, cell.predictor));
        write_file(&path, csv.as_bytes(), overwrite)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Long format: task, predictor, ratio, normalized.
pub fn write_radar(report: &EvalReport, dir: &Path, overwrite: bool) -> Result<Option<PathBuf>, HarnessError> {
    let Some(radar) = &report.radar else { return Ok(None) };
    let mut csv = String::from("task,predictor,ratio,normalized\n");
    for (t, task) in radar.tasks.iter().enumerate() {
        for (p, pred) in radar.predictors.iter().enumerate() {
            writeln!(csv, "{task},{pred},{},{}", radar.ratios[t][p], radar.normalized[t][p]).unwrap();
        }
    }
    let path = dir.join("radar.csv");
    write_file(&path, csv.as_bytes(), overwrite)?;
    Ok(Some(path))
}

/// Writes every report artifact into `dir`.
pub fn write_report(report: &EvalReport, dir: &Path, overwrite: bool) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(dir)?;
    let mut json = serde_json::to_vec_pretty(report).expect("serializable report");
    json.push(b'\n');
    let path = dir.join("report.json");
    write_file(&path, &json, overwrite)?;
    let mut paths = vec![path, write_table(report, dir, overwrite)?];
    paths.extend(write_curves(report, dir, overwrite)?);
    paths.extend(write_radar(report, dir, overwrite)?);
    Ok(paths)
}

pub fn read_report(path: &Path) -> Result<EvalReport, HarnessError> {
    let bytes = fs::read(path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
    serde_json::from_slice(&bytes).map_err(|e| EpisodeError::format(path, e.to_string()).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{radar_ratios, Cell};
    use crate::tasks::TaskId;

    #[test]
    fn artifacts_round_trip() {
        let mut r = EvalReport::new(10, 3);
        for (p, m) in [("linear", 0.5), ("zoh", 1.25e-7)] {
            r.cells.push(Cell { predictor: p.into(), task: TaskId::Rotation, episodes: 2, mse: m, curve: vec![m / 2.0, m, 1.5 * m] });
        }
        r.radar = Some(radar_ratios(&r, "linear").unwrap());
        let dir = tempfile::tempdir().unwrap();
        let paths = write_report(&r, dir.path(), false).unwrap();
        assert_eq!(paths.len(), 5);
        assert_eq!(read_report(&paths[0]).unwrap(), r);
        let table = fs::read_to_string(dir.path().join("table.csv")).unwrap();
        assert_eq!(table, "predictor,rotation\nlinear,0.5\nzoh,0.000000125\n");
        let curve = fs::read_to_string(dir.path().join("curve_rotation_zoh.csv")).unwrap();
        assert_eq!(curve.lines().count(), 4);
        assert!(write_report(&r, dir.path(), false).is_err());
        assert!(write_report(&r, dir.path(), true).is_ok());
    }
}
