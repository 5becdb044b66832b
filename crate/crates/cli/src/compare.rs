//! `compare`: paired attributions from two report files with per-feature fits.

use std::io::Write;
use std::path::Path;

use serde_json::json;
use stratshap::report::FeatureFit;
use stratshap::{compare_reports, AttributionReport, Method};

use crate::args::CompareArgs;
use crate::error::CliError;
use crate::io::{config_comment, create_output, fmt_f64, write_csv_rows};

/// A report file read back: row ids and reports in file order.
#[derive(Debug, Clone)]
pub struct ReportFile {
    pub rows: Vec<usize>,
    pub reports: Vec<AttributionReport>,
}

/// Reads a CSV written by `explain`.
pub fn read_report_csv(path: &Path) -> Result<ReportFile, CliError> {
    let ctx = |msg: String| CliError::Io(format!("{}: {msg}", path.display()));
    let file = std::fs::File::open(path).map_err(|e| ctx(e.to_string()))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let header: Vec<String> = rdr.headers().map_err(|e| ctx(e.to_string()))?.iter().map(String::from).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ctx(format!("missing column `{name}`")))
    };
    let (c_row, c_method, c_pred, c_phi0) = (col("row")?, col("method")?, col("prediction")?, col("phi0")?);
    let features: Vec<(usize, String)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("phi_").map(|n| (i, n.to_string())))
        .collect();
    let names: Vec<String> = features.iter().map(|(_, n)| n.clone()).collect();

    let mut out = ReportFile { rows: Vec::new(), reports: Vec::new() };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ctx(e.to_string()))?;
        let num = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| ctx(format!("record {}: column `{}` is not a number", line + 1, header[i])))
        };
        let row: usize = rec
            .get(c_row)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ctx(format!("record {}: bad row id", line + 1)))?;
        let method: Method = serde_json::from_value(json!(rec.get(c_method).unwrap_or_default()))
            .map_err(|_| ctx(format!("record {}: unknown method", line + 1)))?;
        let phi = features.iter().map(|(i, _)| num(*i)).collect::<Result<Vec<_>, _>>()?;
        let report = AttributionReport::new(num(c_phi0)?, phi, num(c_pred)?, method).with_feature_names(names.clone());
        out.rows.push(row);
        out.reports.push(report);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub rows: Vec<usize>,
    pub fits: Vec<FeatureFit>,
}

pub fn run(args: &CompareArgs, stdout: &mut dyn Write) -> Result<CompareOutput, CliError> {
    let a = read_report_csv(&args.a)?;
    let b = read_report_csv(&args.b)?;
    if a.reports.is_empty() || b.reports.is_empty() {
        return Err(CliError::config("cannot compare empty reports"));
    }
    if a.rows != b.rows {
        return Err(CliError::config(format!(
            "{} and {} cover different instances",
            args.a.display(),
            args.b.display()
        )));
    }
    let cmp = compare_reports(&a.reports, &b.reports)?;
    let echo = json!({ "a": args.a, "b": args.b });

    let out = create_output(args.out.as_deref())?;
    let header: Vec<String> = ["row", "feature", "phi_a", "phi_b", "difference"].map(String::from).to_vec();
    write_csv_rows(
        out,
        &config_comment("compare", &echo),
        &header,
        cmp.rows.iter().map(|r| {
            vec![
                a.rows[r.instance].to_string(),
                r.feature.clone(),
                fmt_f64(r.phi_a),
                fmt_f64(r.phi_b),
                fmt_f64(r.difference),
            ]
        }),
    )?;

    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    if let Some(path) = &args.summary {
        let header: Vec<String> = ["feature", "slope", "intercept", "mean_abs_difference", "max_abs_difference"]
            .map(String::from)
            .to_vec();
        write_csv_rows(
            create_output(Some(path))?,
            &config_comment("compare-summary", &echo),
            &header,
            cmp.fits.iter().map(|f| {
                vec![
                    f.feature.clone(),
                    opt(f.slope),
                    opt(f.intercept),
                    fmt_f64(f.mean_abs_difference),
                    fmt_f64(f.max_abs_difference),
                ]
            }),
        )?;
    }
    writeln!(stdout, "{:<16} {:>10} {:>10} {:>12}", "feature", "slope", "intercept", "max_abs_diff")?;
    for f in &cmp.fits {
        let show = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        writeln!(
            stdout,
            "{:<16} {:>10} {:>10} {:>12.4e}",
            f.feature,
            show(f.slope),
            show(f.intercept),
            f.max_abs_difference
        )?;
    }
    Ok(CompareOutput { rows: a.rows, fits: cmp.fits })
}
