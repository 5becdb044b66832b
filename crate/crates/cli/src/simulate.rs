//! `simulate`: spline data on the manifold.

use serde_json::json;
use stratshap::oracle::sample_spline_data;
use stratshap::{Dataset, Model, SplineParams};

use crate::args::{ExtrapolationArg, SimulateArgs};
use crate::error::CliError;
use crate::io::{config_comment, create_output, fmt_f64, parse_f64_list, write_csv_rows};

pub fn parse_beta(s: &str) -> Result<SplineParams, CliError> {
    match parse_f64_list(s, "--beta")?[..] {
        [b0, b1, b12] => Ok(SplineParams::new(b0, b1, b12)),
        _ => Err(CliError::config(format!("--beta needs three values b0,b1,b12, got `{s}`"))),
    }
}

pub fn run(args: &SimulateArgs) -> Result<Dataset, CliError> {
    if args.n == 0 {
        return Err(CliError::config("--n must be at least 1"));
    }
    let p = parse_beta(&args.beta)?;
    let data = sample_spline_data(args.n, args.seed, &p)?;
    let echo = json!({
        "n": args.n,
        "seed": args.seed,
        "beta": [p.beta0, p.beta1, p.beta12],
        "extrapolation": args.extrapolation,
    });
    let out = create_output(args.out.as_deref())?;
    write_csv_rows(
        out,
        &config_comment("simulate", &echo),
        data.feature_names(),
        data.rows().map(|r| r.iter().copied().map(fmt_f64).collect()),
    )?;
    if let Some(path) = &args.model_out {
        let model = match args.extrapolation {
            ExtrapolationArg::Linear => Model::SplineLinear(p),
            ExtrapolationArg::Constant => Model::SplineConstant(p),
        };
        model.save(path)?;
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_needs_three_values() {
        assert_eq!(parse_beta("0,1,1").unwrap(), SplineParams::new(0.0, 1.0, 1.0));
        assert_eq!(parse_beta("1,2").unwrap_err().exit_code(), 2);
    }
}
