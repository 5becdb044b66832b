//! Attribution algorithms over a [`ValueFunction`].
//!
//! * [`exact_shapley`]: full enumeration, each `v(S)` evaluated once.
//! * [`two_feature_shapley`]: closed form for two players.
//! * [`permutation_shapley`]: Monte Carlo over random orderings, antithetic by default.
//! * [`asymmetric_shapley`]: orderings restricted to a causal group order.
//! * [`stratified_attribution`] / [`stratified_explain`]: per-stratum marginal
//!   attributions followed by redistribution of the stratum reference to one
//!   recipient feature.
//!
//! All reductions run in a fixed order, so results do not depend on the
//! number of worker threads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::{check_feature_count, full_mask, insert_zero_bit, weight_table, Coalition, DEFAULT_ENUMERATION_CAP};
use crate::data::{Dataset, FeatureVector};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::report::{AttributionReport, Method};
use crate::valuefn::{stratified_background, stratum_rows, subsample_rows, MarginalProvider, StratumSpec, ValueFunction};

fn check_game_size(m: usize, cap: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("game has no features".into()));
    }
    check_feature_count(m)?;
    if m > cap || m >= 31 {
        return Err(Error::CapExceeded { features: m, cap });
    }
    Ok(())
}

/// Evaluates `v` on all `2^M` coalitions; entry `b` holds `v(S)` for bitset `b`.
pub fn evaluate_all<V: ValueFunction + ?Sized>(v: &V, cap: usize) -> Result<Vec<f64>> {
    let m = v.n_features();
    check_game_size(m, cap)?;
    (0..1u64 << m)
        .into_par_iter()
        .map(|bits| {
            let s = Coalition::from_bits_unchecked(bits, m);
            v.value(s).map_err(|e| e.at(s))
        })
        .collect()
}

/// Shapley values of a game given as a full table indexed by coalition bitset.
pub fn shapley_from_table(table: &[f64], n_features: usize) -> Vec<f64> {
    debug_assert_eq!(table.len(), 1 << n_features);
    let weights = weight_table(n_features);
    let half = 1u64 << (n_features - 1);
    (0..n_features)
        .into_par_iter()
        .map(|j| {
            let bit = 1u64 << j;
            let mut acc = 0.0;
            for i in 0..half {
                let s = insert_zero_bit(i, j);
                let w = weights[s.count_ones() as usize];
                acc += w * (table[(s | bit) as usize] - table[s as usize]);
            }
            acc
        })
        .collect()
}

fn exact_method<V: ValueFunction + ?Sized>(v: &V) -> Method {
    if v.is_conditional() {
        Method::ExactConditional
    } else {
        Method::ExactMarginal
    }
}

/// Exact Shapley values with the default enumeration cap.
pub fn exact_shapley<V: ValueFunction + ?Sized>(v: &V) -> Result<AttributionReport> {
    exact_shapley_with_cap(v, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_shapley_with_cap<V: ValueFunction + ?Sized>(v: &V, cap: usize) -> Result<AttributionReport> {
    let m = v.n_features();
    let table = evaluate_all(v, cap)?;
    let phi = shapley_from_table(&table, m);
    let full = table[full_mask(m) as usize];
    Ok(AttributionReport::new(table[0], phi, full, exact_method(v)).with_feature_names(v.feature_names()))
}

/// Two-player closed form.
pub fn two_feature_shapley(v_empty: f64, v1: f64, v2: f64, v12: f64) -> AttributionReport {
    let phi1 = 0.5 * (v12 - v2) + 0.5 * (v1 - v_empty);
    let phi2 = 0.5 * (v12 - v1) + 0.5 * (v2 - v_empty);
    AttributionReport::new(v_empty, vec![phi1, phi2], v12, Method::ExactMarginal)
}

/// Features in earlier groups causally precede features in later groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalOrdering {
    groups: Vec<Vec<usize>>,
}

impl CausalOrdering {
    /// The groups must partition `0..n_features`.
    pub fn new(groups: Vec<Vec<usize>>, n_features: usize) -> Result<Self> {
        if groups.is_empty() || groups.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("causal ordering needs non-empty groups".into()));
        }
        let mut seen = vec![false; n_features];
        for &j in groups.iter().flatten() {
            if j >= n_features {
                return Err(Error::InvalidArgument(format!(
                    "feature {j} out of range in causal ordering"
                )));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidArgument(format!(
                    "feature {j} appears twice in causal ordering"
                )));
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "feature {j} missing from causal ordering"
            )));
        }
        Ok(CausalOrdering { groups })
    }

    /// No ordering constraint at all.
    pub fn unordered(n_features: usize) -> Self {
        CausalOrdering {
            groups: vec![(0..n_features).collect()],
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n_features(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    fn largest_group(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationOptions {
    pub permutations: usize,
    pub seed: u64,
    /// Pair each sampled ordering with its reverse.
    pub antithetic: bool,
}

impl Default for PermutationOptions {
    fn default() -> Self {
        PermutationOptions {
            permutations: 1000,
            seed: 0,
            antithetic: true,
        }
    }
}

/// Monte Carlo Shapley estimate over uniformly random orderings.
///
/// Each sampled ordering (or antithetic pair) is one independent unit; the
/// reported standard errors are the unit spread over `sqrt(units)`. They are
/// omitted when fewer than two units were drawn.
pub fn permutation_shapley<V: ValueFunction + ?Sized>(v: &V, opts: PermutationOptions) -> Result<AttributionReport> {
    let m = v.n_features();
    if m == 0 {
        return Err(Error::InvalidArgument("game has no features".into()));
    }
    check_feature_count(m)?;
    let mut report = sample_orderings(v, &CausalOrdering::unordered(m), opts)?;
    report.method = Method::Permutation;
    Ok(report)
}

fn sample_orderings<V: ValueFunction + ?Sized>(
    v: &V,
    ordering: &CausalOrdering,
    opts: PermutationOptions,
) -> Result<AttributionReport> {
    if opts.permutations == 0 {
        return Err(Error::InvalidArgument("permutation count must be at least 1".into()));
    }
    let m = v.n_features();
    let eval = |s: Coalition| v.value(s).map_err(|e| e.at(s));
    let v_empty = eval(Coalition::empty(m))?;
    let v_full = eval(Coalition::full(m))?;

    // Marginal contributions along one ordering, added into `acc`.
    let walk = |order: &[usize], acc: &mut [f64]| -> Result<()> {
        let mut s = Coalition::empty(m);
        let mut prev = v_empty;
        for (pos, &j) in order.iter().enumerate() {
            s = s.with(j);
            let cur = if pos + 1 == m { v_full } else { eval(s)? };
            acc[j] += cur - prev;
            prev = cur;
        }
        Ok(())
    };

    let (pairs, singles) = if opts.antithetic {
        (opts.permutations / 2, opts.permutations % 2)
    } else {
        (0, opts.permutations)
    };
    let units = pairs + singles;

    // Unit u always draws from stream u of the seeded generator.
    let unit_means: Vec<Vec<f64>> = (0..units)
        .into_par_iter()
        .map(|u| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(u as u64);
            let order = draw_consistent(ordering, &mut rng);
            let mut acc = vec![0.0; m];
            walk(&order, &mut acc)?;
            if u < pairs {
                walk(&reverse_within_groups(ordering, &order), &mut acc)?;
                acc.iter_mut().for_each(|a| *a *= 0.5);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let total_weight = opts.permutations as f64;
    let mut phi = vec![0.0; m];
    for (u, mean) in unit_means.iter().enumerate() {
        let w = if u < pairs { 2.0 } else { 1.0 };
        for (p, x) in phi.iter_mut().zip(mean) {
            *p += w * x;
        }
    }
    phi.iter_mut().for_each(|p| *p /= total_weight);

    let mut report = AttributionReport::new(v_empty, phi, v_full, Method::Asymmetric).with_feature_names(v.feature_names());
    if units >= 2 {
        let n = units as f64;
        let stderr = (0..m)
            .map(|j| {
                let mean = unit_means.iter().map(|u| u[j]).sum::<f64>() / n;
                let var = unit_means.iter().map(|u| (u[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            })
            .collect();
        report = report.with_stderr(stderr);
    }
    Ok(report)
}

fn draw_consistent(ordering: &CausalOrdering, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order = Vec::with_capacity(ordering.n_features());
    for group in ordering.groups() {
        let start = order.len();
        order.extend_from_slice(group);
        order[start..].shuffle(rng);
    }
    order
}

fn reverse_within_groups(ordering: &CausalOrdering, order: &[usize]) -> Vec<usize> {
    let mut out = order.to_vec();
    let mut start = 0;
    for group in ordering.groups() {
        out[start..start + group.len()].reverse();
        start += group.len();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsymmetricOptions {
    /// Largest causal group enumerated exactly; larger groups switch to sampling.
    pub cap: usize,
    pub sampling: PermutationOptions,
}

impl Default for AsymmetricOptions {
    fn default() -> Self {
        AsymmetricOptions {
            cap: DEFAULT_ENUMERATION_CAP,
            sampling: PermutationOptions::default(),
        }
    }
}

/// Shapley values averaged only over orderings in which every earlier causal
/// group entirely precedes every later one.
///
/// Within group `k`, with all earlier groups already present, the members play
/// an ordinary Shapley game `u(T) = v(earlier ∪ T)`; enumeration therefore
/// costs `sum_k 2^|G_k|` evaluations.
pub fn asymmetric_shapley<V: ValueFunction + ?Sized>(
    v: &V,
    ordering: &CausalOrdering,
    opts: AsymmetricOptions,
) -> Result<AttributionReport> {
    let m = v.n_features();
    if ordering.n_features() != m {
        return Err(Error::InvalidArgument(format!(
            "ordering covers {} features, game has {m}",
            ordering.n_features()
        )));
    }
    check_feature_count(m)?;
    if ordering.largest_group() > opts.cap.min(30) {
        return sample_orderings(v, ordering, opts.sampling);
    }

    let mut phi = vec![0.0; m];
    let mut prefix = 0u64;
    let mut v_empty = None;
    let mut v_full = 0.0;
    for group in ordering.groups() {
        let k = group.len();
        let local: Vec<f64> = (0..1u64 << k)
            .into_par_iter()
            .map(|t| {
                let mut bits = prefix;
                for (i, &j) in group.iter().enumerate() {
                    if t & (1 << i) != 0 {
                        bits |= 1 << j;
                    }
                }
                let s = Coalition::from_bits_unchecked(bits, m);
                v.value(s).map_err(|e| e.at(s))
            })
            .collect::<Result<_>>()?;
        v_empty.get_or_insert(local[0]);
        v_full = local[local.len() - 1];
        for (i, p) in shapley_from_table(&local, k).into_iter().enumerate() {
            phi[group[i]] = p;
        }
        for &j in group {
            prefix |= 1 << j;
        }
    }
    let phi0 = v_empty.expect("ordering has at least one group");
    Ok(AttributionReport::new(phi0, phi, v_full, Method::Asymmetric).with_feature_names(v.feature_names()))
}

/// Per-background-row spread of exact marginal attributions.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalStderr {
    pub phi0: f64,
    pub phi: Vec<f64>,
}

#[derive(Default, Clone)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

/// Runs the single-reference game for every background row. `fixed`, when
/// set, is a feature that is always in the coalition (it sits outside the
/// game). The sink receives the row's reference payoff and its attributions
/// (`0` at the fixed feature).
fn per_row_attributions(
    provider: &MarginalProvider<'_>,
    model: &Model,
    fixed: Option<usize>,
    cap: usize,
    mut sink: impl FnMut(f64, &[f64]),
) -> Result<()> {
    let m = provider.n_features();
    let game_features: Vec<usize> = (0..m).filter(|&j| Some(j) != fixed).collect();
    let k = game_features.len();
    let x = provider.instance();
    if k == 0 {
        let zeros = vec![0.0; m];
        for row in provider.background().rows() {
            let mut hybrid = row.to_vec();
            if let Some(z) = fixed {
                hybrid[z] = x[z];
            }
            sink(model.eval(&hybrid), &zeros);
        }
        return Ok(());
    }
    check_game_size(k, cap)?;
    let mut hybrid = vec![0.0; m];
    let mut table = vec![0.0; 1 << k];
    let mut phi = vec![0.0; m];
    for row in provider.background().rows() {
        for (t, slot) in table.iter_mut().enumerate() {
            hybrid.copy_from_slice(row);
            if let Some(z) = fixed {
                hybrid[z] = x[z];
            }
            for (i, &j) in game_features.iter().enumerate() {
                if t & (1 << i) != 0 {
                    hybrid[j] = x[j];
                }
            }
            *slot = model.eval(&hybrid);
        }
        for (i, p) in shapley_from_table_seq(&table, k).into_iter().enumerate() {
            phi[game_features[i]] = p;
        }
        sink(table[0], &phi);
    }
    Ok(())
}

// Sequential twin of `shapley_from_table` for the per-row inner loop.
fn shapley_from_table_seq(table: &[f64], n_features: usize) -> Vec<f64> {
    let weights = weight_table(n_features);
    let half = 1u64 << (n_features - 1);
    (0..n_features)
        .map(|j| {
            let bit = 1u64 << j;
            (0..half)
                .map(|i| {
                    let s = insert_zero_bit(i, j);
                    weights[s.count_ones() as usize] * (table[(s | bit) as usize] - table[s as usize])
                })
                .sum()
        })
        .collect()
}

/// Monte Carlo standard errors of exact marginal attributions with respect to
/// the finite background sample.
///
/// The marginal Shapley value is the mean over background rows of the
/// single-reference Shapley values, so its standard error is the row spread
/// over `sqrt(N)`.
pub fn marginal_stderr(provider: &MarginalProvider<'_>, model: &Model, cap: usize) -> Result<MarginalStderr> {
    let m = provider.n_features();
    let mut w0 = Welford::default();
    let mut w = vec![Welford::default(); m];
    per_row_attributions(provider, model, None, cap, |base, phi| {
        w0.push(base);
        for (acc, p) in w.iter_mut().zip(phi) {
            acc.push(*p);
        }
    })?;
    Ok(MarginalStderr {
        phi0: w0.stderr(),
        phi: w.iter().map(Welford::stderr).collect(),
    })
}

/// Exact marginal attributions with background-sampling standard errors.
pub fn exact_marginal_with_stderr(provider: &MarginalProvider<'_>, model: &Model, cap: usize) -> Result<AttributionReport> {
    let report = exact_shapley_with_cap(provider, cap)?;
    let se = marginal_stderr(provider, model, cap)?;
    Ok(report.with_stderr(se.phi))
}

/// Which way causality runs between the stratum feature and the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Other features determine the stratum feature. It is redundant, gets zero,
    /// and the reference shift goes to a designated cause feature.
    StratumIsEffect,
    /// The stratum feature determines the others; it receives the reference shift.
    StratumIsCause,
}

/// How the constant reference `xi` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiChoice {
    /// Mean prediction over the whole dataset.
    GlobalMean,
    /// Mean prediction within the named stratum.
    StratumMean(String),
    /// The stratum reference of the explained instance's own stratum.
    OwnStratumMean,
    /// Prediction at a representative observation.
    Representative(FeatureVector),
    Explicit(f64),
}

/// A reference value ready for redistribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Xi {
    Value(f64),
    /// Use the stratum's own reference, so redistribution moves nothing.
    OwnStratum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedConfig {
    pub stratum: StratumSpec,
    pub direction: Direction,
    /// Feature receiving `phi0_s - xi`. Must equal the stratum feature when the
    /// stratum is the cause, and must differ from it when it is the effect.
    pub recipient: usize,
    pub xi: XiChoice,
    /// Per-stratum background subsample size; `None` keeps every stratum row.
    pub subsample: Option<usize>,
    pub seed: u64,
    pub cap: usize,
    /// Also compute background-sampling standard errors.
    pub with_stderr: bool,
}

impl StratifiedConfig {
    pub fn new(stratum: StratumSpec, direction: Direction, recipient: usize, xi: XiChoice) -> Self {
        StratifiedConfig {
            stratum,
            direction,
            recipient,
            xi,
            subsample: Some(crate::valuefn::DEFAULT_STRATUM_SUBSAMPLE),
            seed: 0,
            cap: DEFAULT_ENUMERATION_CAP,
            with_stderr: false,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        validate_redistribution(self.stratum.feature, self.direction, self.recipient, n_features)
    }

    /// Resolves `xi` against the full dataset. Callers explaining many
    /// instances should resolve once and reuse the result.
    pub fn resolve_xi(&self, model: &Model, data: &Dataset) -> Result<Xi> {
        match &self.xi {
            XiChoice::GlobalMean => Ok(Xi::Value(mean_prediction(model, data)?)),
            XiChoice::StratumMean(label) => {
                let rows = stratum_rows(data, &self.stratum, label)?;
                let rows = match self.subsample {
                    Some(n) => subsample_rows(&rows, n, self.seed),
                    None => rows,
                };
                Ok(Xi::Value(mean_prediction(model, &rows)?))
            }
            XiChoice::OwnStratumMean => Ok(Xi::OwnStratum),
            XiChoice::Representative(fv) => Ok(Xi::Value(model.predict(fv.values())?)),
            XiChoice::Explicit(x) => {
                if !x.is_finite() {
                    return Err(Error::InvalidArgument(format!("xi must be finite, got {x}")));
                }
                Ok(Xi::Value(*x))
            }
        }
    }
}

fn validate_redistribution(stratum: usize, direction: Direction, recipient: usize, m: usize) -> Result<()> {
    if stratum >= m || recipient >= m {
        return Err(Error::InvalidArgument(format!(
            "stratum feature {stratum} / recipient {recipient} out of range for {m} features"
        )));
    }
    match direction {
        Direction::StratumIsCause if recipient != stratum => Err(Error::InvalidArgument(
            "when the stratum is the cause, the recipient must be the stratum feature".into(),
        )),
        Direction::StratumIsEffect if recipient == stratum => Err(Error::InvalidArgument(
            "when the stratum is the effect, the recipient must be another feature".into(),
        )),
        _ => Ok(()),
    }
}

fn mean_prediction(model: &Model, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyBackground);
    }
    let preds = model.predict_batch(data)?;
    Ok(preds.iter().sum::<f64>() / preds.len() as f64)
}

/// Output of the stratified pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedExplanation {
    /// Final attributions with constant reference `xi`.
    pub report: AttributionReport,
    /// Per-stratum attributions before redistribution; `phi0` is the stratum reference.
    pub stratum_report: AttributionReport,
    pub xi: f64,
    /// Set when `|phi0_s - xi|` exceeds three times the in-stratum attribution range.
    pub warning: Option<String>,
}

/// A game with one feature forced into every coalition, played by the rest.
struct WithFixedFeature<'a, V: ?Sized> {
    inner: &'a V,
    fixed: usize,
}

impl<V: ValueFunction + ?Sized> ValueFunction for WithFixedFeature<'_, V> {
    fn n_features(&self) -> usize {
        self.inner.n_features() - 1
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        let m = self.inner.n_features();
        let bits = insert_zero_bit(coalition.bits(), self.fixed) | (1 << self.fixed);
        self.inner.value(Coalition::from_bits_unchecked(bits, m))
    }

    fn is_conditional(&self) -> bool {
        self.inner.is_conditional()
    }
}

/// Stratified attribution over a game whose background is already restricted
/// to the instance's stratum.
///
/// `stratum_game` is an `M`-feature game; the stratum feature is held at the
/// instance value and the remaining features play an exact Shapley game. The
/// stratum reference `phi0_s - xi` is then moved to `recipient`.
pub fn stratified_attribution<V: ValueFunction + ?Sized>(
    stratum_game: &V,
    stratum_feature: usize,
    direction: Direction,
    recipient: usize,
    xi: Xi,
    cap: usize,
) -> Result<StratifiedExplanation> {
    let m = stratum_game.n_features();
    validate_redistribution(stratum_feature, direction, recipient, m)?;
    let full = Coalition::full(m);
    let prediction = stratum_game.value(full).map_err(|e| e.at(full))?;

    let (phi0_s, mut phi) = if m == 1 {
        (prediction, vec![0.0])
    } else {
        let restricted = WithFixedFeature {
            inner: stratum_game,
            fixed: stratum_feature,
        };
        let local = exact_shapley_with_cap(&restricted, cap)?;
        let mut phi = local.phi;
        phi.insert(stratum_feature, 0.0);
        (local.phi0, phi)
    };
    let names = stratum_game.feature_names();
    let stratum_report =
        AttributionReport::new(phi0_s, phi.clone(), prediction, Method::Stratified).with_feature_names(names.clone());

    let xi = match xi {
        Xi::Value(x) => x,
        Xi::OwnStratum => phi0_s,
    };
    let shift = phi0_s - xi;
    phi[recipient] += shift;

    let spread = phi_range(&stratum_report.phi, stratum_feature);
    let warning = (shift.abs() > 3.0 * spread).then(|| {
        let msg = format!(
            "reference shift {shift:.6} exceeds 3x the in-stratum attribution range {spread:.6}; \
             xi = {xi} may distort attributions"
        );
        log::debug!("{msg}");
        msg
    });

    let report = AttributionReport::new(xi, phi, prediction, Method::Stratified).with_feature_names(names);
    Ok(StratifiedExplanation {
        report,
        stratum_report,
        xi,
        warning,
    })
}

/// Spread of the in-stratum attributions, including zero.
fn phi_range(phi: &[f64], skip: usize) -> f64 {
    let (lo, hi) = phi
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != skip)
        .fold((0.0f64, 0.0f64), |(lo, hi), (_, &p)| (lo.min(p), hi.max(p)));
    hi - lo
}

/// The full empirical stratified pipeline for one instance.
pub fn stratified_explain(
    model: &Model,
    instance: &FeatureVector,
    data: &Dataset,
    cfg: &StratifiedConfig,
) -> Result<StratifiedExplanation> {
    let xi = cfg.resolve_xi(model, data)?;
    stratified_explain_with_xi(model, instance, data, cfg, xi)
}

/// As [`stratified_explain`] with `xi` already resolved.
pub fn stratified_explain_with_xi(
    model: &Model,
    instance: &FeatureVector,
    data: &Dataset,
    cfg: &StratifiedConfig,
    xi: Xi,
) -> Result<StratifiedExplanation> {
    cfg.validate(model.n_features())?;
    let background = stratified_background(data, &cfg.stratum, instance)?;
    let mut provider = MarginalProvider::new(model, instance, &background)?;
    if let Some(n) = cfg.subsample {
        provider = provider.with_subsample(n, cfg.seed);
    }
    let mut out = stratified_attribution(
        &provider,
        cfg.stratum.feature,
        cfg.direction,
        cfg.recipient,
        xi,
        cfg.cap,
    )?;

    if cfg.with_stderr {
        let m = model.n_features();
        let moves_reference = !matches!(xi, Xi::OwnStratum);
        let mut w0 = Welford::default();
        let mut w_local = vec![Welford::default(); m];
        let mut w_final = vec![Welford::default(); m];
        let mut buf = vec![0.0; m];
        per_row_attributions(&provider, model, Some(cfg.stratum.feature), cfg.cap, |base, phi| {
            w0.push(base);
            buf.copy_from_slice(phi);
            for (acc, p) in w_local.iter_mut().zip(&buf) {
                acc.push(*p);
            }
            if moves_reference {
                buf[cfg.recipient] += base;
            }
            for (acc, p) in w_final.iter_mut().zip(&buf) {
                acc.push(*p);
            }
        })?;
        out.stratum_report = out.stratum_report.with_stderr(w_local.iter().map(Welford::stderr).collect());
        out.report = out.report.with_stderr(w_final.iter().map(Welford::stderr).collect());
    }
    Ok(out)
}

/// Standard error of the stratum reference for the instance's stratum background.
pub fn stratum_reference_stderr(model: &Model, instance: &FeatureVector, data: &Dataset, cfg: &StratifiedConfig) -> Result<f64> {
    let background = stratified_background(data, &cfg.stratum, instance)?;
    let mut provider = MarginalProvider::new(model, instance, &background)?;
    if let Some(n) = cfg.subsample {
        provider = provider.with_subsample(n, cfg.seed);
    }
    let mut hybrid = instance.values().to_vec();
    let z = cfg.stratum.feature;
    let mut w = Welford::default();
    for row in provider.background().rows() {
        hybrid.copy_from_slice(row);
        hybrid[z] = instance.values()[z];
        w.push(model.eval(&hybrid));
    }
    Ok(w.stderr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuefn::TableGame;

    fn game(values: Vec<f64>) -> TableGame {
        let m = values.len().trailing_zeros() as usize;
        TableGame::new(m, values).unwrap()
    }

    #[test]
    fn degenerate_single_feature() {
        let g = game(vec![1.0, 3.5]);
        let r = exact_shapley(&g).unwrap();
        assert_eq!(r.phi, vec![2.5]);
        assert_eq!(r.phi0, 1.0);
        let a = asymmetric_shapley(&g, &CausalOrdering::unordered(1), AsymmetricOptions::default()).unwrap();
        assert_eq!(a.phi, vec![2.5]);
        let p = permutation_shapley(&g, PermutationOptions { permutations: 3, ..Default::default() }).unwrap();
        assert_eq!(p.phi, vec![2.5]);
    }

    #[test]
    fn two_feature_zero_game() {
        let r = two_feature_shapley(0.0, 0.0, 0.0, 0.0);
        assert_eq!(r.phi, vec![0.0, 0.0]);
        assert_eq!(r.phi0, 0.0);
    }

    #[test]
    fn exact_respects_cap() {
        let g = TableGame::new(4, vec![0.0; 16]).unwrap();
        assert!(matches!(exact_shapley_with_cap(&g, 3), Err(Error::CapExceeded { features: 4, cap: 3 })));
    }

    #[test]
    fn ordering_validation() {
        assert!(CausalOrdering::new(vec![vec![0], vec![0, 1]], 2).is_err());
        assert!(CausalOrdering::new(vec![vec![0]], 2).is_err());
        assert!(CausalOrdering::new(vec![vec![0], vec![]], 1).is_err());
        assert!(CausalOrdering::new(vec![vec![2], vec![0]], 2).is_err());
        assert!(CausalOrdering::new(vec![vec![1], vec![0]], 2).is_ok());
    }

    #[test]
    fn chain_ordering_on_two_features() {
        // v = [v0, v1, v2, v12]
        let g = game(vec![0.5, 2.0, -1.0, 3.0]);
        let fwd = asymmetric_shapley(&g, &CausalOrdering::new(vec![vec![0], vec![1]], 2).unwrap(), Default::default()).unwrap();
        assert_eq!(fwd.phi, vec![1.5, 1.0]);
        let back = asymmetric_shapley(&g, &CausalOrdering::new(vec![vec![1], vec![0]], 2).unwrap(), Default::default()).unwrap();
        assert_eq!(back.phi, vec![4.0, -1.5]);
        assert_eq!(back.phi0, 0.5);
    }

    #[test]
    fn redistribution_rules_enforced() {
        let g = game(vec![0.0, 1.0, 2.0, 3.0]);
        assert!(stratified_attribution(&g, 1, Direction::StratumIsCause, 0, Xi::Value(0.0), 20).is_err());
        assert!(stratified_attribution(&g, 1, Direction::StratumIsEffect, 1, Xi::Value(0.0), 20).is_err());
    }

    #[test]
    fn own_stratum_xi_moves_nothing() {
        let g = game(vec![0.0, 1.0, 2.0, 5.0]);
        let out = stratified_attribution(&g, 1, Direction::StratumIsCause, 1, Xi::OwnStratum, 20).unwrap();
        assert_eq!(out.report, out.stratum_report);
        assert!(out.warning.is_none());
        // phi0_s = v({2}) = 2, phi1 = v12 - v2 = 3
        assert_eq!(out.stratum_report.phi0, 2.0);
        assert_eq!(out.stratum_report.phi, vec![3.0, 0.0]);
    }

    #[test]
    fn extreme_xi_warns() {
        let g = game(vec![0.0, 1.0, 2.0, 2.5]);
        let out = stratified_attribution(&g, 1, Direction::StratumIsCause, 1, Xi::Value(-100.0), 20).unwrap();
        assert!(out.warning.is_some());
        assert!((out.report.efficiency_residual).abs() < 1e-12);
    }

    #[test]
    fn provider_errors_carry_coalition() {
        struct Failing;
        impl ValueFunction for Failing {
            fn n_features(&self) -> usize {
                2
            }
            fn value(&self, c: Coalition) -> Result<f64> {
                if c.bits() == 0b10 {
                    Err(Error::EmptyConditioningSet(c))
                } else {
                    Ok(0.0)
                }
            }
        }
        let err = exact_shapley(&Failing).unwrap_err();
        match &err {
            Error::AtCoalition { coalition, .. } => assert_eq!(coalition.bits(), 0b10),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(err.root(), Error::EmptyConditioningSet(_)));
    }
}
