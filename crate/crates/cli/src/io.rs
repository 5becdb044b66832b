//! Input loading and output plumbing shared by the commands.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use stratshap::{ColumnKind, Dataset};

use crate::error::{io_at, CliError};

pub(crate) const DEFAULT_TARGET: &str = "y";

pub(crate) fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

pub(crate) fn kind_overrides(categorical: Option<&str>) -> HashMap<String, ColumnKind> {
    categorical
        .map(|c| split_list(c).map(|n| (n.to_string(), ColumnKind::Categorical)).collect())
        .unwrap_or_default()
}

/// Reads a CSV and drops the target column. An explicitly named target must
/// exist; the default `y` is dropped only when present.
pub(crate) fn read_features(
    path: &Path,
    kinds: &HashMap<String, ColumnKind>,
    target: Option<&str>,
) -> Result<Dataset, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("{}: file not found", path.display())));
    }
    let data = Dataset::read_csv_path(path, kinds)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let name = target.unwrap_or(DEFAULT_TARGET);
    match data.column_index(name) {
        Some(_) => Ok(data.without_column(name)?),
        None if target.is_some() && name != "none" => Err(CliError::config(format!(
            "target column `{name}` not found in {}",
            path.display()
        ))),
        None => Ok(data),
    }
}

/// Reorders `data` to the columns named in `names`.
pub(crate) fn align_columns(data: &Dataset, names: &[String], what: &str) -> Result<Dataset, CliError> {
    let idx = names
        .iter()
        .map(|n| {
            data.column_index(n)
                .ok_or_else(|| CliError::config(format!("{what} has no column `{n}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(data.select_columns(&idx)?)
}

/// Resolves a feature given by name or by zero-based index.
pub(crate) fn feature_index(spec: &str, names: &[String]) -> Result<usize, CliError> {
    let spec = spec.trim();
    if let Some(j) = names.iter().position(|n| n == spec) {
        return Ok(j);
    }
    match spec.parse::<usize>() {
        Ok(j) if j < names.len() => Ok(j),
        _ => Err(CliError::config(format!(
            "unknown feature `{spec}`; expected one of {names:?} or an index"
        ))),
    }
}

/// A file, or stdout when no path is given.
pub(crate) fn create_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io_at(dir))?;
            }
            Ok(Box::new(BufWriter::new(File::create(p).map_err(io_at(p))?)))
        }
        None => Ok(Box::new(BufWriter::new(std::io::stdout()))),
    }
}

/// Echo line placed at the top of CSV outputs.
pub(crate) fn config_comment(command: &str, config: &serde_json::Value) -> String {
    format!("# stratshap {command} {config}\n")
}

pub(crate) fn write_csv_rows<W: Write>(
    mut out: W,
    comment: &str,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    out.write_all(comment.as_bytes())?;
    let mut wtr = csv::Writer::from_writer(&mut out);
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    drop(wtr);
    out.flush()?;
    Ok(())
}

pub(crate) fn fmt_f64(v: f64) -> String {
    v.to_string()
}

pub(crate) fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    split_list(s)
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::config(format!("{what}: `{t}` is not a finite number")))
        })
        .collect()
}

pub(crate) fn parse_u64_list(s: &str, what: &str) -> Result<Vec<u64>, CliError> {
    split_list(s)
        .map(|t| {
            t.parse::<u64>()
                .map_err(|_| CliError::config(format!("{what}: `{t}` is not a non-negative integer")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_lookup_by_name_then_index() {
        let names = vec!["a".to_string(), "2".to_string(), "c".to_string()];
        assert_eq!(feature_index("c", &names).unwrap(), 2);
        assert_eq!(feature_index("2", &names).unwrap(), 1);
        assert_eq!(feature_index("0", &names).unwrap(), 0);
        assert_eq!(feature_index("9", &names).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn lists() {
        assert_eq!(parse_f64_list("1, -2.5,3", "beta").unwrap(), vec![1.0, -2.5, 3.0]);
        assert!(parse_f64_list("1,nan", "beta").is_err());
        assert_eq!(parse_u64_list("16,64", "P").unwrap(), vec![16, 64]);
    }

    #[test]
    fn target_handling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,b,y\n1,2,3\n").unwrap();
        let kinds = HashMap::new();
        let d = read_features(&path, &kinds, None).unwrap();
        assert_eq!(d.feature_names(), ["a", "b"]);
        let d = read_features(&path, &kinds, Some("b")).unwrap();
        assert_eq!(d.feature_names(), ["a", "y"]);
        let d = read_features(&path, &kinds, Some("none")).unwrap();
        assert_eq!(d.n_cols(), 3);
        assert_eq!(read_features(&path, &kinds, Some("z")).unwrap_err().exit_code(), 2);
        assert_eq!(read_features(&dir.path().join("missing.csv"), &kinds, None).unwrap_err().exit_code(), 3);
    }
}
