//! Value functions: the payoff `v(S)` of a coalition for one fixed instance.
//!
//! [`MarginalProvider`] replaces out-of-coalition features with background
//! values drawn unconditionally. [`ConditionalProvider`] averages the model over
//! background rows that match the instance on the in-coalition features.
//! [`stratified_background`] restricts a dataset to the instance's stratum.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coalition::{check_feature_count, Coalition};
use crate::data::{ColumnKind, Dataset, FeatureVector};
use crate::error::{Error, Result};
use crate::models::Model;

/// Default number of quantile bins used to match continuous features.
pub const DEFAULT_QUANTILE_BINS: usize = 20;

/// Default background subsample size for per-stratum backgrounds.
pub const DEFAULT_STRATUM_SUBSAMPLE: usize = 1000;

/// A cooperative game over `n_features` players for one explained instance.
///
/// `value` must be deterministic: the engine memoizes and may evaluate
/// coalitions concurrently.
pub trait ValueFunction: Sync {
    fn n_features(&self) -> usize;

    fn value(&self, coalition: Coalition) -> Result<f64>;

    /// True when `v(S)` conditions on the in-coalition features.
    fn is_conditional(&self) -> bool {
        false
    }

    fn feature_names(&self) -> Vec<String> {
        crate::data::default_names(self.n_features())
    }
}

impl<V: ValueFunction + ?Sized> ValueFunction for &V {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn value(&self, coalition: Coalition) -> Result<f64> {
        (**self).value(coalition)
    }
    fn is_conditional(&self) -> bool {
        (**self).is_conditional()
    }
    fn feature_names(&self) -> Vec<String> {
        (**self).feature_names()
    }
}

/// A game given by an explicit table of `2^M` values indexed by coalition bitset.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGame {
    n_features: usize,
    values: Vec<f64>,
    conditional: bool,
}

impl TableGame {
    pub fn new(n_features: usize, values: Vec<f64>) -> Result<Self> {
        check_feature_count(n_features)?;
        if n_features >= 31 || values.len() != 1usize << n_features {
            return Err(Error::InvalidArgument(format!(
                "a table game over {n_features} features needs 2^{n_features} values, got {}",
                values.len()
            )));
        }
        Ok(TableGame {
            n_features,
            values,
            conditional: false,
        })
    }

    #[must_use]
    pub fn conditional(mut self, yes: bool) -> Self {
        self.conditional = yes;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl ValueFunction for TableGame {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn value(&self, coalition: Coalition) -> Result<f64> {
        Ok(self.values[coalition.bits() as usize])
    }
    fn is_conditional(&self) -> bool {
        self.conditional
    }
}

fn check_instance(model: &Model, instance: &FeatureVector) -> Result<()> {
    let m = model.n_features();
    if instance.len() != m {
        return Err(Error::InvalidInput(format!(
            "instance has {} features, model expects {m}",
            instance.len()
        )));
    }
    check_feature_count(m)
}

fn check_background(model: &Model, background: &Dataset) -> Result<()> {
    if background.is_empty() {
        return Err(Error::EmptyBackground);
    }
    if background.n_cols() != model.n_features() {
        return Err(Error::InvalidInput(format!(
            "background has {} columns, model expects {}",
            background.n_cols(),
            model.n_features()
        )));
    }
    Ok(())
}

/// Seeded subsample without replacement; the kept rows stay in data order.
pub fn subsample_rows(data: &Dataset, size: usize, seed: u64) -> Dataset {
    if size >= data.n_rows() {
        return data.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, data.n_rows(), size).into_vec();
    idx.sort_unstable();
    data.take_rows(&idx)
}

/// Interventional value function, `v(S) = mean_b f(x*_S, b_notS)`.
#[derive(Debug, Clone)]
pub struct MarginalProvider<'m> {
    model: &'m Model,
    instance: Vec<f64>,
    names: Vec<String>,
    background: Dataset,
}

impl<'m> MarginalProvider<'m> {
    pub fn new(model: &'m Model, instance: &FeatureVector, background: &Dataset) -> Result<Self> {
        check_instance(model, instance)?;
        check_background(model, background)?;
        Ok(MarginalProvider {
            model,
            instance: instance.values().to_vec(),
            names: instance.feature_names().to_vec(),
            background: background.clone(),
        })
    }

    /// Replaces the background with a seeded subsample of `size` rows, drawn once.
    #[must_use]
    pub fn with_subsample(mut self, size: usize, seed: u64) -> Self {
        self.background = subsample_rows(&self.background, size, seed);
        self
    }

    pub fn background(&self) -> &Dataset {
        &self.background
    }

    pub fn instance(&self) -> &[f64] {
        &self.instance
    }

    pub fn prediction(&self) -> f64 {
        self.model.eval(&self.instance)
    }

    fn check(&self, coalition: Coalition) -> Result<()> {
        if coalition.n_features() != self.instance.len() {
            return Err(Error::InvalidArgument(format!(
                "coalition over {} features, provider has {}",
                coalition.n_features(),
                self.instance.len()
            )));
        }
        Ok(())
    }

    /// Calls `sink` with the prediction on each background row's hybrid vector.
    fn for_each_hybrid(&self, coalition: Coalition, mut sink: impl FnMut(f64)) {
        let replaced: Vec<usize> = (0..self.instance.len())
            .filter(|&j| !coalition.contains(j))
            .collect();
        let mut hybrid = self.instance.clone();
        for row in self.background.rows() {
            for &j in &replaced {
                hybrid[j] = row[j];
            }
            sink(self.model.eval(&hybrid));
        }
    }

    /// Per-background-row payoffs whose mean is `v(S)`.
    pub fn row_values(&self, coalition: Coalition) -> Result<Vec<f64>> {
        self.check(coalition)?;
        let mut out = Vec::with_capacity(self.background.n_rows());
        self.for_each_hybrid(coalition, |y| out.push(y));
        Ok(out)
    }
}

impl ValueFunction for MarginalProvider<'_> {
    fn n_features(&self) -> usize {
        self.instance.len()
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        self.check(coalition)?;
        if coalition.is_full() {
            return Ok(self.prediction());
        }
        // A constant payoff is returned as is, so a feature the model ignores
        // gets an exact zero even against the full coalition.
        let mut sum = 0.0;
        let mut first: Option<f64> = None;
        let mut constant = true;
        self.for_each_hybrid(coalition, |y| {
            sum += y;
            match first {
                None => first = Some(y),
                Some(f) => constant &= f.to_bits() == y.to_bits(),
            }
        });
        match first {
            Some(f) if constant => Ok(f),
            _ => Ok(sum / self.background.n_rows() as f64),
        }
    }

    fn feature_names(&self) -> Vec<String> {
        self.names.clone()
    }
}

/// How a background value is judged equal to the instance value for one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    Exact,
    Tolerance(f64),
    /// Same bin among `n` equal-frequency bins of the background column.
    QuantileBins(usize),
}

impl MatchRule {
    pub fn default_for(kind: ColumnKind) -> MatchRule {
        match kind {
            ColumnKind::Categorical => MatchRule::Exact,
            ColumnKind::Continuous => MatchRule::QuantileBins(DEFAULT_QUANTILE_BINS),
        }
    }
}

/// Observational value function, `v(S) = E[f(X) | X_S ~ x*_S]` over matching rows.
///
/// Matched rows keep their own out-of-coalition values; in-coalition features
/// are set to the instance values, so `v(full) = f(x*)`.
#[derive(Debug, Clone)]
pub struct ConditionalProvider<'m> {
    model: &'m Model,
    instance: Vec<f64>,
    names: Vec<String>,
    background: Dataset,
    rules: Vec<MatchRule>,
    /// Bit j set iff the row matches the instance on feature j.
    row_masks: Vec<u64>,
}

impl<'m> ConditionalProvider<'m> {
    /// Uses each column's declared kind to pick its match rule.
    pub fn new(model: &'m Model, instance: &FeatureVector, background: &Dataset) -> Result<Self> {
        let rules = background
            .kinds()
            .iter()
            .map(|&k| MatchRule::default_for(k))
            .collect();
        Self::with_rules(model, instance, background, rules)
    }

    pub fn with_rules(
        model: &'m Model,
        instance: &FeatureVector,
        background: &Dataset,
        rules: Vec<MatchRule>,
    ) -> Result<Self> {
        check_instance(model, instance)?;
        check_background(model, background)?;
        if rules.len() != instance.len() {
            return Err(Error::InvalidArgument(format!(
                "{} match rules for {} features",
                rules.len(),
                instance.len()
            )));
        }
        let x = instance.values();
        let mut row_masks = vec![0u64; background.n_rows()];
        for (j, rule) in rules.iter().enumerate() {
            let matcher: Box<dyn Fn(f64) -> bool> = match *rule {
                MatchRule::Exact => {
                    let target = x[j];
                    Box::new(move |v| v == target)
                }
                MatchRule::Tolerance(tol) => {
                    if tol.is_nan() || tol < 0.0 {
                        return Err(Error::InvalidArgument(format!("tolerance must be non-negative, got {tol}")));
                    }
                    let target = x[j];
                    Box::new(move |v| (v - target).abs() <= tol)
                }
                MatchRule::QuantileBins(bins) => {
                    if bins == 0 {
                        return Err(Error::InvalidArgument("zero quantile bins".into()));
                    }
                    let edges = quantile_edges(background.column(j).collect(), bins);
                    let target = bin_of(&edges, x[j]);
                    Box::new(move |v| bin_of(&edges, v) == target)
                }
            };
            for (mask, row) in row_masks.iter_mut().zip(background.rows()) {
                if matcher(row[j]) {
                    *mask |= 1 << j;
                }
            }
        }
        Ok(ConditionalProvider {
            model,
            instance: x.to_vec(),
            names: instance.feature_names().to_vec(),
            background: background.clone(),
            rules,
            row_masks,
        })
    }

    pub fn rules(&self) -> &[MatchRule] {
        &self.rules
    }

    /// Number of background rows matching the instance on `coalition`.
    pub fn matched_count(&self, coalition: Coalition) -> usize {
        let s = coalition.bits();
        self.row_masks.iter().filter(|&&m| m & s == s).count()
    }

    /// `(v(S), standard error, matched rows)` for coalitions short of the full set.
    pub fn value_with_stderr(&self, coalition: Coalition) -> Result<(f64, f64, usize)> {
        let ys = self.matched_predictions(coalition)?;
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = if ys.len() > 1 {
            ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok((mean, (var / n).sqrt(), ys.len()))
    }

    fn matched_predictions(&self, coalition: Coalition) -> Result<Vec<f64>> {
        let s = coalition.bits();
        let mut hybrid = self.instance.clone();
        let free: Vec<usize> = (0..self.instance.len())
            .filter(|&j| !coalition.contains(j))
            .collect();
        let mut out = Vec::new();
        for (row, &mask) in self.background.rows().zip(&self.row_masks) {
            if mask & s != s {
                continue;
            }
            for &j in &free {
                hybrid[j] = row[j];
            }
            out.push(self.model.eval(&hybrid));
        }
        if out.is_empty() {
            return Err(Error::EmptyConditioningSet(coalition));
        }
        Ok(out)
    }
}

impl ValueFunction for ConditionalProvider<'_> {
    fn n_features(&self) -> usize {
        self.instance.len()
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        if coalition.n_features() != self.instance.len() {
            return Err(Error::InvalidArgument("coalition width mismatch".into()));
        }
        if coalition.is_full() {
            return Ok(self.model.eval(&self.instance));
        }
        let ys = self.matched_predictions(coalition)?;
        Ok(ys.iter().sum::<f64>() / ys.len() as f64)
    }

    fn is_conditional(&self) -> bool {
        true
    }

    fn feature_names(&self) -> Vec<String> {
        self.names.clone()
    }
}

/// Interior cut points at the `k/bins` empirical quantiles (nearest rank).
fn quantile_edges(mut column: Vec<f64>, bins: usize) -> Vec<f64> {
    column.sort_by(f64::total_cmp);
    let n = column.len();
    (1..bins)
        .map(|k| column[((k * n) / bins).min(n - 1)])
        .collect()
}

/// Values equal to a cut point fall in the lower bin.
fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e < v)
}

/// Maps a stratum feature's value to its stratum label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StratumKey {
    /// One stratum per distinct raw value.
    #[default]
    Identity,
    /// Buckets `[origin + k*width, origin + (k+1)*width)`.
    Bucket { width: f64, origin: f64 },
    /// Everything in a single stratum.
    Constant,
}

impl StratumKey {
    pub fn label(&self, v: f64) -> String {
        match *self {
            StratumKey::Identity => format_label(v),
            StratumKey::Bucket { width, origin } => {
                let k = ((v - origin) / width).floor();
                format_label(origin + k * width)
            }
            StratumKey::Constant => "all".to_string(),
        }
    }
}

fn format_label(v: f64) -> String {
    // -0 and 0 are the same stratum
    if v == 0.0 {
        "0".to_string()
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumSpec {
    pub feature: usize,
    #[serde(default)]
    pub key: StratumKey,
}

impl StratumSpec {
    pub fn identity(feature: usize) -> Self {
        StratumSpec {
            feature,
            key: StratumKey::Identity,
        }
    }

    pub fn label_of(&self, row: &[f64]) -> String {
        self.key.label(row[self.feature])
    }

    fn check(&self, n_cols: usize) -> Result<()> {
        if self.feature >= n_cols {
            return Err(Error::InvalidArgument(format!(
                "stratum feature {} out of range for {n_cols} columns",
                self.feature
            )));
        }
        if let StratumKey::Bucket { width, origin } = self.key {
            if !(width > 0.0 && width.is_finite() && origin.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad bucket width {width}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for StratumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "feature {} ({:?})", self.feature, self.key)
    }
}

/// Rows whose stratum label equals `label`, in data order.
pub fn stratum_rows(data: &Dataset, spec: &StratumSpec, label: &str) -> Result<Dataset> {
    spec.check(data.n_cols())?;
    let idx: Vec<usize> = data
        .rows()
        .enumerate()
        .filter(|(_, r)| spec.label_of(r) == label)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyStratum(label.to_string()));
    }
    Ok(data.take_rows(&idx))
}

/// The background for `instance`: every row in the instance's stratum.
pub fn stratified_background(data: &Dataset, spec: &StratumSpec, instance: &FeatureVector) -> Result<Dataset> {
    spec.check(data.n_cols())?;
    if instance.len() != data.n_cols() {
        return Err(Error::InvalidInput(format!(
            "instance has {} features, data has {} columns",
            instance.len(),
            data.n_cols()
        )));
    }
    stratum_rows(data, spec, &spec.label_of(instance.values()))
}

/// Distinct stratum labels in order of first appearance.
pub fn stratum_labels(data: &Dataset, spec: &StratumSpec) -> Result<Vec<String>> {
    spec.check(data.n_cols())?;
    let mut seen = std::collections::HashSet::new();
    Ok(data
        .rows()
        .map(|r| spec.label_of(r))
        .filter(|l| seen.insert(l.clone()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SplineParams;

    fn names2() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    fn c(members: &[usize], m: usize) -> Coalition {
        Coalition::from_members(members.iter().copied(), m).unwrap()
    }

    /// X1 on a symmetric grid with X2 = I(X1 > 0) and, separately, both X2 values.
    fn exhaustive_grid() -> Dataset {
        let mut rows = Vec::new();
        for x1 in [-1.5, -0.5, 0.5, 1.5] {
            for x2 in [0.0, 1.0] {
                rows.push(vec![x1, x2]);
            }
        }
        Dataset::new(names2(), rows).unwrap()
    }

    #[test]
    fn marginal_full_and_empty() {
        let model = Model::SplineLinear(SplineParams::new(0.2, 1.0, 1.0));
        let x = FeatureVector::new(vec![0.7, 1.0], names2()).unwrap();
        let bg = exhaustive_grid();
        let v = MarginalProvider::new(&model, &x, &bg).unwrap();
        assert_eq!(v.value(Coalition::full(2)).unwrap(), model.predict(&[0.7, 1.0]).unwrap());
        let mean_bg: f64 = model.predict_batch(&bg).unwrap().iter().sum::<f64>() / bg.n_rows() as f64;
        assert!((v.value(Coalition::empty(2)).unwrap() - mean_bg).abs() < 1e-15);
    }

    #[test]
    fn marginal_linear_spline_matches_closed_form() {
        // Balanced X2 background: v({1}) = b0 + b1 x1 + b12 x1 / 2 = 1.5
        let model = Model::SplineLinear(SplineParams::new(0.0, 1.0, 1.0));
        let x = FeatureVector::new(vec![1.0, 1.0], names2()).unwrap();
        let v = MarginalProvider::new(&model, &x, &exhaustive_grid()).unwrap();
        assert!((v.value(c(&[0], 2)).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn marginal_constant_spline_matches_closed_form() {
        let model = Model::SplineConstant(SplineParams::new(0.0, 1.0, 1.0));
        let x = FeatureVector::new(vec![1.0, 1.0], names2()).unwrap();
        let v = MarginalProvider::new(&model, &x, &exhaustive_grid()).unwrap();
        assert!((v.value(c(&[0], 2)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_background_rejected() {
        let model = Model::SplineLinear(SplineParams::new(0.0, 1.0, 1.0));
        let x = FeatureVector::new(vec![1.0, 1.0], names2()).unwrap();
        let empty = Dataset::from_flat(names2(), vec![]).unwrap();
        assert!(matches!(MarginalProvider::new(&model, &x, &empty), Err(Error::EmptyBackground)));
        assert!(matches!(ConditionalProvider::new(&model, &x, &empty), Err(Error::EmptyBackground)));
    }

    #[test]
    fn subsample_is_seeded_and_ordered() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, 0.0]).collect();
        let ds = Dataset::new(names2(), rows).unwrap();
        let a = subsample_rows(&ds, 10, 7);
        let b = subsample_rows(&ds, 10, 7);
        assert_eq!(a, b);
        assert_eq!(a.n_rows(), 10);
        let col: Vec<f64> = a.column(0).collect();
        assert!(col.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample_rows(&ds, 500, 7).n_rows(), 100);
    }

    #[test]
    fn conditional_exact_match() {
        let model = Model::SplineLinear(SplineParams::new(0.0, 1.0, 1.0));
        let bg = Dataset::new(
            names2(),
            vec![vec![-1.0, 0.0], vec![-2.0, 0.0], vec![1.0, 1.0], vec![3.0, 1.0]],
        )
        .unwrap();
        let x = FeatureVector::new(vec![1.0, 1.0], names2()).unwrap();
        let v = ConditionalProvider::with_rules(&model, &x, &bg, vec![MatchRule::Exact; 2]).unwrap();
        // rows with x2 = 1: f = 2 x1 -> mean 4
        assert_eq!(v.value(c(&[1], 2)).unwrap(), 4.0);
        let mean: f64 = model.predict_batch(&bg).unwrap().iter().sum::<f64>() / 4.0;
        assert_eq!(v.value(Coalition::empty(2)).unwrap(), mean);
        assert_eq!(v.value(Coalition::full(2)).unwrap(), 2.0);

        let absent = FeatureVector::new(vec![1.0, 0.5], names2()).unwrap();
        let v = ConditionalProvider::with_rules(&model, &absent, &bg, vec![MatchRule::Exact; 2]).unwrap();
        assert!(matches!(v.value(c(&[1], 2)), Err(Error::EmptyConditioningSet(_))));
    }

    #[test]
    fn conditional_tolerance_and_bins() {
        let model = Model::Linear {
            intercept: 0.0,
            coefficients: vec![1.0, 0.0],
        };
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, 0.0]).collect();
        let bg = Dataset::new(names2(), rows).unwrap();
        let x = FeatureVector::new(vec![50.0, 0.0], names2()).unwrap();
        let tol = ConditionalProvider::with_rules(
            &model,
            &x,
            &bg,
            vec![MatchRule::Tolerance(2.0), MatchRule::Exact],
        )
        .unwrap();
        assert_eq!(tol.matched_count(c(&[0], 2)), 5);
        let bins = ConditionalProvider::with_rules(
            &model,
            &x,
            &bg,
            vec![MatchRule::QuantileBins(10), MatchRule::Exact],
        )
        .unwrap();
        assert_eq!(bins.matched_count(c(&[0], 2)), 10);
        assert_eq!(bins.matched_count(c(&[1], 2)), 100);
    }

    #[test]
    fn default_rules_follow_kinds() {
        let model = Model::SplineLinear(SplineParams::new(0.0, 1.0, 1.0));
        let bg = exhaustive_grid().with_kinds(vec![ColumnKind::Continuous, ColumnKind::Categorical]);
        let x = FeatureVector::new(vec![0.5, 1.0], names2()).unwrap();
        let v = ConditionalProvider::new(&model, &x, &bg).unwrap();
        assert_eq!(v.rules(), &[MatchRule::QuantileBins(DEFAULT_QUANTILE_BINS), MatchRule::Exact]);
    }

    #[test]
    fn stratified_background_selects_instance_stratum() {
        let bg = exhaustive_grid();
        let spec = StratumSpec::identity(1);
        let x = FeatureVector::new(vec![1.0, 1.0], names2()).unwrap();
        let s = stratified_background(&bg, &spec, &x).unwrap();
        assert_eq!(s.n_rows(), 4);
        assert!(s.column(1).all(|v| v == 1.0));
        let whole = StratumSpec {
            feature: 1,
            key: StratumKey::Constant,
        };
        assert_eq!(stratified_background(&bg, &whole, &x).unwrap(), bg);
        let unseen = FeatureVector::new(vec![1.0, 2.0], names2()).unwrap();
        match stratified_background(&bg, &spec, &unseen) {
            Err(Error::EmptyStratum(label)) => assert_eq!(label, "2"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(stratified_background(&bg, &StratumSpec::identity(5), &x).is_err());
    }

    #[test]
    fn bucket_labels() {
        let key = StratumKey::Bucket {
            width: 10.0,
            origin: 0.0,
        };
        assert_eq!(key.label(18.0), "10");
        assert_eq!(key.label(20.0), "20");
        assert_eq!(key.label(-0.5), "-10");
        assert_eq!(StratumKey::Identity.label(-0.0), "0");
        assert_eq!(StratumKey::Identity.label(2.5), "2.5");
    }
}
