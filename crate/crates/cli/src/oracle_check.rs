//! `oracle-check`: the engine against closed-form two-feature attributions.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratshap::oracle::{self, gamma, SplineCause, Table, TableExtras};
use stratshap::{asymmetric_shapley, exact_shapley, stratified_attribution, AttributionReport, Xi, DEFAULT_ENUMERATION_CAP};

use crate::args::OracleCheckArgs;
use crate::error::{io_at, CliError};

/// Largest deviation seen by one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub comparisons: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Default)]
struct Tracker {
    comparisons: usize,
    max: f64,
}

impl Tracker {
    fn add(&mut self, a: &AttributionReport, b: &AttributionReport, features: &[usize]) {
        self.push(a.phi0, b.phi0);
        for &j in features {
            self.push(a.phi[j], b.phi[j]);
        }
    }

    fn push(&mut self, a: f64, b: f64) {
        self.comparisons += 1;
        let d = (a - b).abs();
        // NaN counts as an unbounded deviation.
        self.max = if d.is_nan() { f64::INFINITY } else { self.max.max(d) };
    }
}

/// Runs every check over `cases` random coefficient/instance pairs.
pub fn checks(cases: usize, seed: u64, tolerance: f64, perturb_gamma: f64) -> Result<Vec<CheckRow>, CliError> {
    let mut t1 = Tracker::default();
    let mut t2 = Tracker::default();
    let mut t3 = Tracker::default();
    let mut t4 = Tracker::default();
    let mut t6 = Tracker::default();
    let mut equivalence = Tracker::default();
    let mut efficiency = Tracker::default();
    let mut xi_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let cap = DEFAULT_ENUMERATION_CAP;
    let none = TableExtras::default();

    for (p, x) in oracle::random_cases(cases, seed) {
        let e1 = exact_shapley(&oracle::value_functions_linear(&p, x)?)?;
        t1.add(&e1, &oracle::table_attributions(Table::T1, &p, x, none)?, &[0, 1]);
        let e2 = exact_shapley(&oracle::value_functions_constant(&p, x)?)?;
        t2.add(&e2, &oracle::table_attributions(Table::T2, &p, x, none)?, &[0, 1]);

        let game = oracle::stratum_game(&p, x)?;
        let cond = oracle::conditional_values(&p, x)?;
        let reference = p.beta0 + p.beta12 * (gamma() + perturb_gamma);
        for cause in SplineCause::BOTH {
            let (dir, rec) = (cause.stratum_direction(), cause.recipient());
            let own = stratified_attribution(&game, 1, dir, rec, Xi::OwnStratum, cap)?;
            t3.add(&own.stratum_report, &oracle::table_attributions(Table::T3, &p, x, none)?, &[0]);

            let xi = xi_rng.gen_range(-5.0..5.0);
            let s4 = stratified_attribution(&game, 1, dir, rec, Xi::Value(xi), cap)?;
            let extras = TableExtras { xi: Some(xi), direction: Some(cause) };
            t4.add(&s4.report, &oracle::table_attributions(Table::T4, &p, x, extras)?, &[0, 1]);

            let a6 = asymmetric_shapley(&cond, &cause.ordering(), Default::default())?;
            let extras = TableExtras { xi: None, direction: Some(cause) };
            t6.add(&a6, &oracle::table_attributions(Table::T6, &p, x, extras)?, &[0, 1]);

            let s = stratified_attribution(&game, 1, dir, rec, Xi::Value(reference), cap)?;
            equivalence.add(&s.report, &a6, &[0, 1]);

            for r in [&own.report, &s4.report, &a6, &s.report] {
                efficiency.push(r.efficiency_residual, 0.0);
            }
        }
        for r in [&e1, &e2] {
            efficiency.push(r.efficiency_residual, 0.0);
        }
    }

    let row = |name, t: Tracker| CheckRow {
        name,
        comparisons: t.comparisons,
        max_deviation: t.max,
        passed: t.max <= tolerance,
    };
    Ok(vec![
        row("T1", t1),
        row("T2", t2),
        row("T3", t3),
        row("T4", t4),
        row("T6", t6),
        row("equivalence", equivalence),
        row("efficiency", efficiency),
    ])
}

pub fn run(args: &OracleCheckArgs, stdout: &mut dyn Write) -> Result<Vec<CheckRow>, CliError> {
    if args.tolerance.is_nan() || args.tolerance < 0.0 {
        return Err(CliError::config("--tolerance must be a non-negative number"));
    }
    if args.cases == 0 {
        return Err(CliError::config("--cases must be at least 1"));
    }
    if let Some(path) = &args.export {
        let rows = oracle::golden_rows(args.cases, args.seed)?;
        let file = std::fs::File::create(path).map_err(io_at(path))?;
        oracle::write_golden_csv(&rows, std::io::BufWriter::new(file))?;
    }
    let rows = checks(args.cases, args.seed, args.tolerance, args.perturb_gamma)?;
    writeln!(stdout, "{:<12} {:>12} {:>14}  status", "check", "comparisons", "max_deviation")?;
    for r in &rows {
        writeln!(
            stdout,
            "{:<12} {:>12} {:>14.3e}  {}",
            r.name,
            r.comparisons,
            r.max_deviation,
            if r.passed { "ok" } else { "FAIL" }
        )?;
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(rows)
    } else {
        Err(CliError::Failed(format!(
            "checks above tolerance {:e}: {}",
            args.tolerance,
            failed.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes() {
        let rows = checks(100, 1, 1e-9, 0.0).unwrap();
        assert!(rows.iter().all(|r| r.passed), "{rows:?}");
    }

    #[test]
    fn perturbed_gamma_breaks_only_equivalence() {
        let rows = checks(100, 1, 1e-9, 1e-3).unwrap();
        for r in rows {
            assert_eq!(r.passed, r.name != "equivalence", "{r:?}");
        }
    }
}
