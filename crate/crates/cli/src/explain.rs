//! `explain`: one attribution report per input row.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use stratshap::engine::{evaluate_all, exact_marginal_with_stderr, stratified_explain_with_xi};
use stratshap::oracle::{self, gamma, region_of};
use stratshap::valuefn::{stratified_background, subsample_rows};
use stratshap::{
    asymmetric_shapley, exact_shapley_with_cap, permutation_shapley, stratified_attribution, AsymmetricOptions,
    AttributionReport, CausalOrdering, Coalition, ConditionalProvider, Dataset, Direction,
    MarginalProvider, Model, PermutationOptions, SplineParams, StratifiedConfig, StratumKey, StratumSpec,
    ValueFunction, Xi, XiChoice, DEFAULT_ENUMERATION_CAP,
};

use crate::args::{DirectionArg, ExplainArgs, FormatArg, MethodArg, ValueArg};
use crate::error::{io_at, CliError};
use crate::io::{
    align_columns, config_comment, create_output, feature_index, fmt_f64, kind_overrides, read_features,
    split_list, write_csv_rows,
};

const DEFAULT_PERMUTATIONS: usize = 1000;

/// Reads `--config` if given and lays the flags over it.
pub fn load_config(flags: ExplainArgs) -> Result<ExplainArgs, CliError> {
    let Some(path) = flags.config.clone() else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(&path).map_err(io_at(&path))?;
    let file: ExplainArgs = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
    };
    Ok(merge(flags, file))
}

fn merge(flags: ExplainArgs, file: ExplainArgs) -> ExplainArgs {
    macro_rules! pick {
        ($($f:ident),*) => {
            ExplainArgs { config: flags.config, $($f: flags.$f.or(file.$f)),* }
        };
    }
    pick!(
        data, model, method, value, background, subsample, seed, permutations, no_antithetic, cap,
        stratum_feature, stratum_key, direction, recipient, xi, ordering, categorical, target, stderr, trace,
        out, format, threads
    )
}

/// The fully resolved run configuration, echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct ExplainSettings {
    pub data: PathBuf,
    pub model: PathBuf,
    pub method: MethodArg,
    pub value: ValueArg,
    pub background: String,
    pub subsample: Option<usize>,
    pub seed: u64,
    pub permutations: usize,
    pub antithetic: bool,
    pub cap: usize,
    pub stratum_feature: Option<String>,
    pub stratum_key: Option<String>,
    pub direction: Option<DirectionArg>,
    pub recipient: Option<String>,
    pub xi: Option<String>,
    pub ordering: Option<Vec<Vec<String>>>,
    pub categorical: Vec<String>,
    pub target: Option<String>,
    pub stderr: bool,
    pub trace: bool,
    pub out: Option<PathBuf>,
    pub format: FormatArg,
    pub threads: Option<usize>,
}

enum Background {
    Analytic(SplineParams),
    Empirical(Dataset),
}

struct Stratified {
    cfg: StratifiedConfig,
    xi: Xi,
    /// Background rows grouped by stratum label, built once per run.
    strata: HashMap<String, Dataset>,
}

fn partition(bg: &Dataset, spec: &StratumSpec) -> HashMap<String, Dataset> {
    let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, row) in bg.rows().enumerate() {
        groups.entry(spec.label_of(row)).or_default().push(i);
    }
    groups.into_iter().map(|(k, idx)| (k, bg.take_rows(&idx))).collect()
}

struct Plan {
    settings: ExplainSettings,
    model: Model,
    data: Dataset,
    background: Background,
    ordering: Option<CausalOrdering>,
    stratified: Option<Stratified>,
}

/// One explained row.
#[derive(Debug, Clone)]
pub struct Explained {
    pub row: usize,
    pub prediction: f64,
    pub report: AttributionReport,
    pub stratum_phi0: Option<f64>,
    pub warning: Option<String>,
    pub trace: Option<Vec<(Vec<String>, f64)>>,
}

/// Result of a whole run: successes and per-row failures, both in row order.
#[derive(Debug)]
pub struct ExplainOutput {
    pub settings: ExplainSettings,
    pub rows: Vec<Explained>,
    pub errors: Vec<(usize, String)>,
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::config(format!("missing --{flag}")))
}

fn parse_stratum_key(s: &str) -> Result<StratumKey, CliError> {
    let bad = || CliError::config(format!("bad --stratum-key `{s}`; use identity, constant or bucket:<width>[:<origin>]"));
    match s.trim() {
        "identity" => Ok(StratumKey::Identity),
        "constant" => Ok(StratumKey::Constant),
        other => {
            let rest = other.strip_prefix("bucket:").ok_or_else(bad)?;
            let mut parts = rest.split(':');
            let width: f64 = parts.next().and_then(|w| w.parse().ok()).ok_or_else(bad)?;
            let origin: f64 = match parts.next() {
                Some(o) => o.parse().map_err(|_| bad())?,
                None => 0.0,
            };
            if parts.next().is_some() || !(width > 0.0 && width.is_finite() && origin.is_finite()) {
                return Err(bad());
            }
            Ok(StratumKey::Bucket { width, origin })
        }
    }
}

fn parse_xi(s: &str, data: &Dataset) -> Result<XiChoice, CliError> {
    let s = s.trim();
    let bad = |why: &str| CliError::config(format!("bad --xi `{s}`: {why}"));
    match s.split_once('=') {
        None => match s {
            "global-mean" => Ok(XiChoice::GlobalMean),
            "stratum-mean" => Ok(XiChoice::OwnStratumMean),
            _ => Err(bad("expected global-mean, stratum-mean[=<label>], explicit=<v> or representative=<row>")),
        },
        Some(("stratum-mean", label)) => Ok(XiChoice::StratumMean(label.trim().to_string())),
        Some(("explicit", v)) => v
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(XiChoice::Explicit)
            .ok_or_else(|| bad("not a finite number")),
        Some(("representative", row)) => {
            let i: usize = row.trim().parse().map_err(|_| bad("row must be an index"))?;
            if i >= data.n_rows() {
                return Err(bad("row out of range"));
            }
            Ok(XiChoice::Representative(data.feature_vector(i)))
        }
        Some(_) => Err(bad("unknown form")),
    }
}

fn parse_ordering(s: &str, names: &[String]) -> Result<(CausalOrdering, Vec<Vec<String>>), CliError> {
    let mut groups = Vec::new();
    let mut named = Vec::new();
    for group in s.split(';') {
        let members = split_list(group)
            .map(|f| feature_index(f, names))
            .collect::<Result<Vec<_>, _>>()?;
        named.push(members.iter().map(|&j| names[j].clone()).collect());
        groups.push(members);
    }
    let ordering = CausalOrdering::new(groups, names.len()).map_err(|e| CliError::config(format!("--ordering: {e}")))?;
    Ok((ordering, named))
}

fn spline_params(model: &Model) -> Option<SplineParams> {
    match model {
        Model::SplineLinear(p) | Model::SplineConstant(p) => Some(*p),
        _ => None,
    }
}

fn plan(args: ExplainArgs) -> Result<Plan, CliError> {
    let data_path = required(args.data.clone(), "data")?;
    let model_path = required(args.model.clone(), "model")?;
    let method = args.method.unwrap_or(MethodArg::Exact);
    let value = args.value.unwrap_or_default();
    let background_arg = required(args.background.clone(), "background").map_err(|_| {
        CliError::config("missing --background (a CSV path, or `analytic` for spline models)")
    })?;
    let cap = args.cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
    if let Some(0) = args.permutations {
        return Err(CliError::config("--permutations must be at least 1"));
    }
    if let Some(0) = args.threads {
        return Err(CliError::config("--threads must be at least 1"));
    }
    if let Some(0) = args.subsample {
        return Err(CliError::config("--subsample must be at least 1"));
    }

    let kinds = kind_overrides(args.categorical.as_deref());
    let model = Model::load(&model_path).map_err(|e| CliError::Io(format!("{}: {e}", model_path.display())))?;
    let data = read_features(&data_path, &kinds, args.target.as_deref())?;
    let names = data.feature_names().to_vec();
    if model.n_features() != names.len() {
        return Err(CliError::config(format!(
            "model expects {} features but {} has {} ({names:?})",
            model.n_features(),
            data_path.display(),
            names.len()
        )));
    }
    if method == MethodArg::Exact && names.len() > cap {
        return Err(CliError::config(format!(
            "{} features exceed the exact enumeration cap {cap}; raise --cap or use --method permutation",
            names.len()
        )));
    }

    let background = if background_arg == "analytic" {
        let p = spline_params(&model)
            .ok_or_else(|| CliError::config("--background analytic needs a two-feature spline model"))?;
        Background::Analytic(p)
    } else {
        let path = PathBuf::from(&background_arg);
        let bg = read_features(&path, &kinds, args.target.as_deref())?;
        let mut bg = align_columns(&bg, &names, "background")?;
        if bg.is_empty() {
            return Err(CliError::config("background has no rows"));
        }
        if method != MethodArg::Stratified {
            if let Some(n) = args.subsample {
                bg = subsample_rows(&bg, n, args.seed.unwrap_or(0));
            }
        }
        Background::Empirical(bg)
    };

    let mut ordering_names = None;
    let ordering = match (method, args.ordering.as_deref()) {
        (MethodArg::Asymmetric, None) => return Err(CliError::config("--method asymmetric needs --ordering")),
        (MethodArg::Asymmetric, Some(s)) => {
            let (o, n) = parse_ordering(s, &names)?;
            ordering_names = Some(n);
            Some(o)
        }
        _ => None,
    };

    let mut stratified = None;
    let mut subsample = args.subsample;
    let mut resolved_recipient = None;
    if method == MethodArg::Stratified {
        if value == ValueArg::Conditional {
            return Err(CliError::config("--method stratified uses marginal values within each stratum"));
        }
        let feature = feature_index(&required(args.stratum_feature.clone(), "stratum-feature")?, &names)?;
        let key = parse_stratum_key(args.stratum_key.as_deref().unwrap_or("identity"))?;
        let direction = match required(args.direction, "direction")? {
            DirectionArg::Cause => Direction::StratumIsCause,
            DirectionArg::Effect => Direction::StratumIsEffect,
        };
        let recipient = match (&args.recipient, direction) {
            (Some(r), _) => feature_index(r, &names)?,
            (None, Direction::StratumIsCause) => feature,
            (None, Direction::StratumIsEffect) => {
                return Err(CliError::config("--direction effect needs --recipient"));
            }
        };
        resolved_recipient = Some(names[recipient].clone());
        let xi_choice = parse_xi(args.xi.as_deref().unwrap_or("global-mean"), &data)?;
        let mut cfg = StratifiedConfig::new(StratumSpec { feature, key }, direction, recipient, xi_choice);
        if subsample.is_some() {
            cfg.subsample = subsample;
        }
        subsample = cfg.subsample;
        cfg.seed = args.seed.unwrap_or(0);
        cfg.cap = cap;
        cfg.with_stderr = args.stderr.unwrap_or(false);
        cfg.validate(names.len()).map_err(|e| CliError::config(e.to_string()))?;
        let xi = match &background {
            Background::Empirical(bg) => cfg.resolve_xi(&model, bg).map_err(|e| CliError::config(format!("--xi: {e}")))?,
            Background::Analytic(p) => {
                if feature != 1 || key != StratumKey::Identity {
                    return Err(CliError::config(
                        "analytic stratification is defined for the second feature with the identity key",
                    ));
                }
                analytic_xi(&cfg.xi, p, &model)?
            }
        };
        let strata = match &background {
            Background::Empirical(bg) => partition(bg, &cfg.stratum),
            Background::Analytic(_) => HashMap::new(),
        };
        stratified = Some(Stratified { cfg, xi, strata });
    }

    let settings = ExplainSettings {
        data: data_path,
        model: model_path,
        method,
        value,
        background: background_arg,
        subsample,
        seed: args.seed.unwrap_or(0),
        permutations: args.permutations.unwrap_or(DEFAULT_PERMUTATIONS),
        antithetic: !args.no_antithetic.unwrap_or(false),
        cap,
        stratum_feature: stratified.as_ref().map(|s| names[s.cfg.stratum.feature].clone()),
        stratum_key: stratified.as_ref().map(|_| args.stratum_key.clone().unwrap_or_else(|| "identity".into())),
        direction: if stratified.is_some() { args.direction } else { None },
        recipient: resolved_recipient,
        xi: stratified.as_ref().map(|_| args.xi.clone().unwrap_or_else(|| "global-mean".into())),
        ordering: ordering_names,
        categorical: args.categorical.as_deref().map(|c| split_list(c).map(String::from).collect()).unwrap_or_default(),
        target: args.target.clone(),
        stderr: args.stderr.unwrap_or(false),
        trace: args.trace.unwrap_or(false),
        out: args.out.clone(),
        format: args.format.unwrap_or_default(),
        threads: args.threads,
    };
    Ok(Plan {
        settings,
        model,
        data,
        background,
        ordering,
        stratified,
    })
}

/// `xi` under the closed-form spline distribution.
fn analytic_xi(choice: &XiChoice, p: &SplineParams, model: &Model) -> Result<Xi, CliError> {
    let stratum_mean = |x2: f64| -> Result<f64, CliError> {
        let x1 = if x2 > 0.5 { 1.0 } else { -1.0 };
        let game = oracle::stratum_game(p, [x1, x2])?;
        Ok(game.value(Coalition::from_members([1], 2)?)?)
    };
    Ok(match choice {
        // E f(X) on the manifold.
        XiChoice::GlobalMean => Xi::Value(p.beta0 + p.beta12 * gamma()),
        XiChoice::StratumMean(label) => match label.as_str() {
            "0" => Xi::Value(stratum_mean(0.0)?),
            "1" => Xi::Value(stratum_mean(1.0)?),
            other => return Err(CliError::config(format!("no analytic stratum `{other}`; strata are 0 and 1"))),
        },
        XiChoice::OwnStratumMean => Xi::OwnStratum,
        XiChoice::Representative(fv) => Xi::Value(model.predict(fv.values())?),
        XiChoice::Explicit(v) => Xi::Value(*v),
    })
}

fn trace_of<V: ValueFunction + ?Sized>(v: &V, names: &[String], cap: usize) -> stratshap::Result<Vec<(Vec<String>, f64)>> {
    let m = v.n_features();
    let table = evaluate_all(v, cap)?;
    Ok(table
        .into_iter()
        .enumerate()
        .map(|(bits, value)| {
            let c = Coalition::from_bits(bits as u64, m).expect("bits below 2^m");
            (c.members().map(|j| names[j].clone()).collect(), value)
        })
        .collect())
}

fn run_game<V: ValueFunction + ?Sized>(
    v: &V,
    plan: &Plan,
    trace: &mut Option<Vec<(Vec<String>, f64)>>,
) -> stratshap::Result<AttributionReport> {
    let s = &plan.settings;
    let sampling = PermutationOptions {
        permutations: s.permutations,
        seed: s.seed,
        antithetic: s.antithetic,
    };
    if s.trace {
        *trace = Some(trace_of(v, plan.data.feature_names(), s.cap)?);
    }
    match s.method {
        MethodArg::Exact => exact_shapley_with_cap(v, s.cap),
        MethodArg::Permutation => permutation_shapley(v, sampling),
        MethodArg::Asymmetric => asymmetric_shapley(
            v,
            plan.ordering.as_ref().expect("checked in plan"),
            AsymmetricOptions { cap: s.cap, sampling },
        ),
        MethodArg::Stratified => unreachable!("stratified runs take their own path"),
    }
}

fn explain_row(plan: &Plan, row: usize) -> stratshap::Result<Explained> {
    let x = plan.data.feature_vector(row);
    let names = plan.data.feature_names();
    let model = &plan.model;
    let prediction = model.predict(x.values())?;
    let s = &plan.settings;
    let mut trace = None;
    let mut stratum_phi0 = None;
    let mut warning = None;

    let report = match (&plan.background, &plan.stratified) {
        (Background::Analytic(p), strat) => {
            let xv = [x.values()[0], x.values()[1]];
            region_of(xv)?;
            if let Some(st) = strat {
                let game = oracle::stratum_game(p, xv)?;
                if s.trace {
                    trace = Some(trace_of(&game, names, s.cap)?);
                }
                let out = stratified_attribution(&game, 1, st.cfg.direction, st.cfg.recipient, st.xi, s.cap)?;
                stratum_phi0 = Some(out.stratum_report.phi0);
                warning = out.warning;
                out.report
            } else {
                let table = match (s.value, model) {
                    (ValueArg::Conditional, _) => oracle::conditional_values(p, xv)?,
                    (ValueArg::Marginal, Model::SplineConstant(_)) => oracle::value_functions_constant(p, xv)?,
                    (ValueArg::Marginal, _) => oracle::value_functions_linear(p, xv)?,
                };
                run_game(&table, plan, &mut trace)?
            }
        }
        (Background::Empirical(_), Some(st)) => {
            let label = st.cfg.stratum.label_of(x.values());
            let bg = st.strata.get(&label).ok_or(stratshap::Error::EmptyStratum(label))?;
            if s.trace {
                let stratum = stratified_background(bg, &st.cfg.stratum, &x)?;
                let mut provider = MarginalProvider::new(model, &x, &stratum)?;
                if let Some(n) = st.cfg.subsample {
                    provider = provider.with_subsample(n, st.cfg.seed);
                }
                trace = Some(trace_of(&provider, names, s.cap)?);
            }
            let out = stratified_explain_with_xi(model, &x, bg, &st.cfg, st.xi)?;
            stratum_phi0 = Some(out.stratum_report.phi0);
            warning = out.warning;
            out.report
        }
        (Background::Empirical(bg), None) => match s.value {
            ValueArg::Marginal => {
                let provider = MarginalProvider::new(model, &x, bg)?;
                if s.stderr && s.method == MethodArg::Exact {
                    if s.trace {
                        trace = Some(trace_of(&provider, names, s.cap)?);
                    }
                    exact_marginal_with_stderr(&provider, model, s.cap)?
                } else {
                    run_game(&provider, plan, &mut trace)?
                }
            }
            ValueArg::Conditional => {
                let provider = ConditionalProvider::new(model, &x, bg)?;
                run_game(&provider, plan, &mut trace)?
            }
        },
    };
    Ok(Explained {
        row,
        prediction,
        report: report.with_feature_names(names.to_vec()),
        stratum_phi0,
        warning,
        trace,
    })
}

/// Plans and runs every row; nothing is written.
pub fn compute(args: ExplainArgs) -> Result<ExplainOutput, CliError> {
    let plan = plan(args)?;
    let work = || {
        (0..plan.data.n_rows())
            .into_par_iter()
            .map(|i| explain_row(&plan, i).map_err(|e| (i, e.to_string())))
            .collect::<Vec<_>>()
    };
    let results = match plan.settings.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(format!("--threads: {e}")))?
            .install(work),
        None => work(),
    };
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(e) => rows.push(e),
            Err(e) => errors.push(e),
        }
    }
    Ok(ExplainOutput {
        settings: plan.settings,
        rows,
        errors,
    })
}

/// `explain`: computes, writes the report (and an error manifest when rows fail).
pub fn run(args: ExplainArgs) -> Result<ExplainOutput, CliError> {
    let args = load_config(args)?;
    let output = compute(args)?;
    let s = &output.settings;
    let echo = serde_json::to_value(s).expect("settings serialize");
    let out = create_output(s.out.as_deref())?;
    match s.format {
        FormatArg::Csv => write_report_csv(out, &echo, &output.rows)?,
        FormatArg::Json => write_report_json(out, &echo, &output.rows, &output.errors)?,
    }
    let warned = output.rows.iter().filter(|r| r.warning.is_some()).count();
    if warned > 0 {
        eprintln!("stratshap: warning: {warned} instances have a reference shift above 3x their in-stratum attribution range; see the warning column");
    }
    if !output.errors.is_empty() {
        let manifest = s.out.as_deref().map(manifest_path);
        let w: Box<dyn Write> = match &manifest {
            Some(p) => create_output(Some(p))?,
            None => Box::new(std::io::stderr()),
        };
        write_csv_rows(
            w,
            &config_comment("explain-errors", &echo),
            &["row".into(), "error".into()],
            output.errors.iter().map(|(i, e)| vec![i.to_string(), e.clone()]),
        )?;
        let total = output.rows.len() + output.errors.len();
        let location = manifest.map(|p| format!("; see {}", p.display())).unwrap_or_default();
        return Err(CliError::Failed(format!(
            "{} of {total} instances failed{location}",
            output.errors.len()
        )));
    }
    Ok(output)
}

/// `report.csv` becomes `report.errors.csv`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.errors.csv"))
}

fn write_report_csv(out: Box<dyn Write>, echo: &serde_json::Value, rows: &[Explained]) -> Result<(), CliError> {
    let names: Vec<String> = rows.first().map(|r| r.report.feature_names.clone()).unwrap_or_default();
    let with_se = rows.iter().any(|r| r.report.stderr.is_some());
    let stratified = rows.iter().any(|r| r.stratum_phi0.is_some());
    let mut header: Vec<String> = vec!["row".into(), "method".into(), "prediction".into(), "phi0".into()];
    header.extend(names.iter().map(|n| format!("phi_{n}")));
    header.push("efficiency_residual".into());
    if with_se {
        header.extend(names.iter().map(|n| format!("se_{n}")));
    }
    if stratified {
        header.extend(["stratum_phi0".into(), "warning".into()]);
    }
    let records = rows.iter().map(|r| {
        let mut rec = vec![
            r.row.to_string(),
            r.report.method.to_string(),
            fmt_f64(r.prediction),
            fmt_f64(r.report.phi0),
        ];
        rec.extend(r.report.phi.iter().copied().map(fmt_f64));
        rec.push(fmt_f64(r.report.efficiency_residual));
        if with_se {
            match &r.report.stderr {
                Some(se) => rec.extend(se.iter().copied().map(fmt_f64)),
                None => rec.extend(names.iter().map(|_| String::new())),
            }
        }
        if stratified {
            rec.push(r.stratum_phi0.map(fmt_f64).unwrap_or_default());
            rec.push(r.warning.clone().unwrap_or_default());
        }
        rec
    });
    write_csv_rows(out, &config_comment("explain", echo), &header, records)
}

fn write_report_json(
    mut out: Box<dyn Write>,
    echo: &serde_json::Value,
    rows: &[Explained],
    errors: &[(usize, String)],
) -> Result<(), CliError> {
    let reports: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            let mut v = json!({
                "row": r.row,
                "method": r.report.method,
                "prediction": r.prediction,
                "phi0": r.report.phi0,
                "features": r.report.feature_names,
                "phi": r.report.phi,
                "efficiency_residual": r.report.efficiency_residual,
            });
            let obj = v.as_object_mut().expect("object literal");
            if let Some(se) = &r.report.stderr {
                obj.insert("stderr".into(), json!(se));
            }
            if let Some(p) = r.stratum_phi0 {
                obj.insert("stratum_phi0".into(), json!(p));
            }
            if let Some(w) = &r.warning {
                obj.insert("warning".into(), json!(w));
            }
            if let Some(t) = &r.trace {
                let entries: Vec<_> = t.iter().map(|(c, v)| json!({"coalition": c, "value": v})).collect();
                obj.insert("trace".into(), json!(entries));
            }
            v
        })
        .collect();
    let errors: Vec<_> = errors.iter().map(|(i, e)| json!({"row": i, "error": e})).collect();
    let doc = json!({ "command": "explain", "config": echo, "reports": reports, "errors": errors });
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| CliError::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
