//! `convergence`: permutation-sampling error against exact values.
//!
//! The value function is tabulated once over all coalitions; sampling then
//! replays the table, which gives the same estimates as sampling the provider
//! directly at a fraction of the cost.

use std::io::Write;

use rayon::prelude::*;
use serde_json::json;
use stratshap::engine::{evaluate_all, shapley_from_table};
use stratshap::{
    permutation_shapley, ConditionalProvider, Model, MarginalProvider, PermutationOptions, TableGame, ValueFunction,
    DEFAULT_ENUMERATION_CAP,
};

use crate::args::{ConvergenceArgs, ValueArg};
use crate::error::CliError;
use crate::io::{config_comment, create_output, fmt_f64, kind_overrides, parse_u64_list, read_features, write_csv_rows};

/// Statistics for one permutation count.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub permutations: usize,
    /// Mean over runs of `max_j |phi_hat_j - phi_j|`.
    pub max_abs_error: f64,
    /// Mean over runs and features of the reported standard error.
    pub mean_stderr: f64,
    pub runs: usize,
}

/// Sampling statistics of `v` against its exact Shapley values.
pub fn study<V: ValueFunction + ?Sized>(
    v: &V,
    schedule: &[usize],
    seeds: &[u64],
    antithetic: bool,
) -> Result<Vec<ConvergenceRow>, CliError> {
    let m = v.n_features();
    if m > DEFAULT_ENUMERATION_CAP {
        return Err(CliError::config(format!(
            "{m} features exceed the exact cap {DEFAULT_ENUMERATION_CAP}; no exact reference"
        )));
    }
    let table = evaluate_all(v, DEFAULT_ENUMERATION_CAP)?;
    let exact = shapley_from_table(&table, m);
    let game = TableGame::new(m, table)?.conditional(v.is_conditional());
    schedule
        .iter()
        .map(|&p| {
            let per_run = seeds
                .par_iter()
                .map(|&seed| {
                    let r = permutation_shapley(&game, PermutationOptions { permutations: p, seed, antithetic })?;
                    let err = r.phi.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    let se = r.stderr.map(|s| s.iter().sum::<f64>() / m as f64).unwrap_or(f64::NAN);
                    Ok((err, se))
                })
                .collect::<stratshap::Result<Vec<_>>>()?;
            let n = per_run.len() as f64;
            Ok(ConvergenceRow {
                permutations: p,
                max_abs_error: per_run.iter().map(|r| r.0).sum::<f64>() / n,
                mean_stderr: per_run.iter().map(|r| r.1).sum::<f64>() / n,
                runs: per_run.len(),
            })
        })
        .collect()
}

pub fn run(args: &ConvergenceArgs, stdout: &mut dyn Write) -> Result<Vec<ConvergenceRow>, CliError> {
    let schedule: Vec<usize> = parse_u64_list(&args.schedule, "--schedule")?
        .into_iter()
        .map(|p| p as usize)
        .collect();
    if schedule.is_empty() || schedule.contains(&0) {
        return Err(CliError::config("--schedule needs permutation counts of at least 1"));
    }
    let seeds = match &args.seeds {
        Some(s) => parse_u64_list(s, "--seeds")?,
        None => (0..args.runs).map(|k| args.seed.wrapping_add(k)).collect(),
    };
    if seeds.is_empty() {
        return Err(CliError::config("at least one seed is needed"));
    }
    let model = Model::load(&args.model).map_err(|e| CliError::Io(format!("{}: {e}", args.model.display())))?;
    let kinds = kind_overrides(args.categorical.as_deref());
    let mut data = read_features(&args.data, &kinds, args.target.as_deref())?;
    if model.n_features() != data.n_cols() {
        return Err(CliError::config(format!(
            "model expects {} features, data has {}",
            model.n_features(),
            data.n_cols()
        )));
    }
    if args.instance >= data.n_rows() {
        return Err(CliError::config(format!("--instance {} out of range", args.instance)));
    }
    let x = data.feature_vector(args.instance);
    if let Some(n) = args.subsample {
        data = stratshap::valuefn::subsample_rows(&data, n, args.seed);
    }
    let antithetic = !args.no_antithetic;
    let rows = match args.value {
        ValueArg::Marginal => study(&MarginalProvider::new(&model, &x, &data)?, &schedule, &seeds, antithetic)?,
        ValueArg::Conditional => study(&ConditionalProvider::new(&model, &x, &data)?, &schedule, &seeds, antithetic)?,
    };

    let echo = json!({
        "model": args.model,
        "data": args.data,
        "instance": args.instance,
        "schedule": schedule,
        "seeds": seeds,
        "value": args.value,
        "subsample": args.subsample,
        "antithetic": antithetic,
    });
    let header: Vec<String> = ["permutations", "max_abs_error", "mean_stderr", "runs"].map(String::from).to_vec();
    let records = || {
        rows.iter().map(|r| {
            vec![
                r.permutations.to_string(),
                fmt_f64(r.max_abs_error),
                fmt_f64(r.mean_stderr),
                r.runs.to_string(),
            ]
        })
    };
    if let Some(path) = &args.out {
        write_csv_rows(create_output(Some(path))?, &config_comment("convergence", &echo), &header, records())?;
    }
    writeln!(stdout, "{:>12} {:>14} {:>14} {:>6}", "P", "max_abs_error", "mean_stderr", "runs")?;
    for r in &rows {
        writeln!(
            stdout,
            "{:>12} {:>14.6e} {:>14.6e} {:>6}",
            r.permutations, r.max_abs_error, r.mean_stderr, r.runs
        )?;
    }
    Ok(rows)
}
