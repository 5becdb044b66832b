//! Attribution reports and paired comparisons between them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactMarginal,
    ExactConditional,
    Permutation,
    Asymmetric,
    Stratified,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::ExactMarginal => "exact-marginal",
            Method::ExactConditional => "exact-conditional",
            Method::Permutation => "permutation",
            Method::Asymmetric => "asymmetric",
            Method::Stratified => "stratified",
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, Method::Permutation)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `phi0` plus one attribution per feature.
///
/// `efficiency_residual` is `f(x*) - phi0 - sum(phi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub phi0: f64,
    pub phi: Vec<f64>,
    pub feature_names: Vec<String>,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<f64>>,
    pub efficiency_residual: f64,
}

impl AttributionReport {
    pub fn new(phi0: f64, phi: Vec<f64>, prediction: f64, method: Method) -> Self {
        let feature_names = crate::data::default_names(phi.len());
        let efficiency_residual = prediction - phi0 - phi.iter().sum::<f64>();
        AttributionReport {
            phi0,
            phi,
            feature_names,
            method,
            stderr: None,
            efficiency_residual,
        }
    }

    #[must_use]
    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.phi.len(), "one name per feature");
        self.feature_names = names;
        self
    }

    #[must_use]
    pub fn with_stderr(mut self, stderr: Vec<f64>) -> Self {
        assert_eq!(stderr.len(), self.phi.len(), "one standard error per feature");
        self.stderr = Some(stderr);
        self
    }

    pub fn n_features(&self) -> usize {
        self.phi.len()
    }

    /// `phi0 + sum(phi)`, i.e. the prediction the report explains.
    pub fn total(&self) -> f64 {
        self.phi0 + self.phi.iter().sum::<f64>()
    }
}

/// One feature's values across a set of paired reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedRow {
    pub instance: usize,
    pub feature: String,
    pub phi_a: f64,
    pub phi_b: f64,
    pub difference: f64,
}

/// Least-squares fit of `phi_b` on `phi_a` for one feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureFit {
    pub feature: String,
    /// `None` when `phi_a` is constant and the two sides disagree.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub mean_abs_difference: f64,
    pub max_abs_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<PairedRow>,
    pub fits: Vec<FeatureFit>,
}

impl Comparison {
    pub fn fit(&self, feature: &str) -> Option<&FeatureFit> {
        self.fits.iter().find(|f| f.feature == feature)
    }
}

/// Pairs `a[i]` with `b[i]` and fits `phi_b ~ phi_a` per feature across instances.
pub fn compare_reports(a: &[AttributionReport], b: &[AttributionReport]) -> Result<Comparison> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("no reports to compare".into()));
    }
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "{} reports paired with {}",
            a.len(),
            b.len()
        )));
    }
    let names = a[0].feature_names.clone();
    for (i, (ra, rb)) in a.iter().zip(b).enumerate() {
        if ra.feature_names != names || rb.feature_names != names {
            return Err(Error::InvalidArgument(format!(
                "report pair {i} has mismatched features"
            )));
        }
    }

    let mut rows = Vec::with_capacity(a.len() * names.len());
    for (i, (ra, rb)) in a.iter().zip(b).enumerate() {
        for (j, name) in names.iter().enumerate() {
            rows.push(PairedRow {
                instance: i,
                feature: name.clone(),
                phi_a: ra.phi[j],
                phi_b: rb.phi[j],
                difference: rb.phi[j] - ra.phi[j],
            });
        }
    }

    let fits = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let xs: Vec<f64> = a.iter().map(|r| r.phi[j]).collect();
            let ys: Vec<f64> = b.iter().map(|r| r.phi[j]).collect();
            let (slope, intercept) = least_squares(&xs, &ys);
            let diffs = xs.iter().zip(&ys).map(|(x, y)| (y - x).abs());
            let max_abs_difference = diffs.clone().fold(0.0, f64::max);
            let mean_abs_difference = diffs.sum::<f64>() / xs.len() as f64;
            FeatureFit {
                feature: name.clone(),
                slope,
                intercept,
                mean_abs_difference,
                max_abs_difference,
            }
        })
        .collect();

    Ok(Comparison { rows, fits })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        // A degenerate design still has a well-defined fit when both sides agree.
        if xs == ys {
            return (Some(1.0), Some(0.0));
        }
        return (None, None);
    }
    let slope = sxy / sxx;
    (Some(slope), Some(my - slope * mx))
}
