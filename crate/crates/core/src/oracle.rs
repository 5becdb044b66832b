//! Closed-form ground truth for the two-feature linear spline
//! `f = b0 + b1 x1 + b12 x1 x2` with `X1 ~ N(0, 1)` and `X2 = I(X1 > 0)`.
//!
//! The point `x1 = 0` belongs to the `x2 = 0` region everywhere. Table
//! attributions are only defined on the data manifold `x2 = I(x1 > 0)`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::data::Dataset;
use crate::engine::{CausalOrdering, Direction};
use crate::error::{Error, Result};
use crate::models::SplineParams;
use crate::report::{AttributionReport, Method};
use crate::valuefn::ValueFunction;

/// `E[X1 X2] = E[X1 I(X1 > 0)] = sqrt(1 / (2 pi))`.
pub fn gamma() -> f64 {
    (1.0 / (2.0 * PI)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineOracleConstants {
    pub gamma: f64,
    /// Pearson correlation of X1 and X2, `sqrt(2 / pi) = 2 gamma`.
    pub correlation: f64,
}

impl Default for SplineOracleConstants {
    fn default() -> Self {
        SplineOracleConstants {
            gamma: gamma(),
            correlation: (2.0 / PI).sqrt(),
        }
    }
}

/// Which side of the kink a manifold point sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `x1 <= 0, x2 = 0`
    Lower,
    /// `x1 > 0, x2 = 1`
    Upper,
}

pub fn region_of(x: [f64; 2]) -> Result<Region> {
    let [x1, x2] = x;
    if !x1.is_finite() {
        return Err(Error::InvalidInput(format!("x1 = {x1} is not finite")));
    }
    match (x1 > 0.0, x2) {
        (false, 0.0) => Ok(Region::Lower),
        (true, 1.0) => Ok(Region::Upper),
        _ => Err(Error::OffManifold { x1, x2 }),
    }
}

fn indicator(x1: f64) -> f64 {
    if x1 > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// The four payoffs of a two-feature game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub empty: f64,
    pub first: f64,
    pub second: f64,
    pub both: f64,
    #[serde(default)]
    pub conditional: bool,
}

impl ValueTable {
    pub fn as_array(&self) -> [f64; 4] {
        [self.empty, self.first, self.second, self.both]
    }
}

impl ValueFunction for ValueTable {
    fn n_features(&self) -> usize {
        2
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        if coalition.n_features() != 2 {
            return Err(Error::InvalidArgument("two-feature game".into()));
        }
        Ok(match coalition.bits() {
            0b00 => self.empty,
            0b01 => self.first,
            0b10 => self.second,
            _ => self.both,
        })
    }

    fn is_conditional(&self) -> bool {
        self.conditional
    }
}

fn prediction(p: &SplineParams, x: [f64; 2]) -> f64 {
    p.beta0 + p.beta1 * x[0] + p.beta12 * x[0] * x[1]
}

/// Marginal value functions under linear extrapolation, for any point.
pub fn value_functions_linear_unchecked(p: &SplineParams, x: [f64; 2]) -> ValueTable {
    let g = gamma();
    let x1 = x[0];
    ValueTable {
        empty: p.beta0 + p.beta12 * g,
        first: p.beta0 + p.beta1 * x1 + p.beta12 * x1 / 2.0,
        second: p.beta0,
        both: prediction(p, x),
        conditional: false,
    }
}

/// Marginal value functions of the linearly extrapolating spline.
pub fn value_functions_linear(p: &SplineParams, x: [f64; 2]) -> Result<ValueTable> {
    region_of(x)?;
    Ok(value_functions_linear_unchecked(p, x))
}

/// Marginal value functions under constant extrapolation, for any point.
pub fn value_functions_constant_unchecked(p: &SplineParams, x: [f64; 2]) -> ValueTable {
    let g = gamma();
    let [x1, x2] = x;
    ValueTable {
        empty: p.beta0 + p.beta12 * g,
        first: p.beta0 + p.beta1 * x1 / 2.0 + p.beta12 / 2.0 * x1 * indicator(x1),
        second: p.beta0 - 2.0 * p.beta1 * g * (0.5 - x2) + p.beta12 * g * x2,
        both: prediction(p, x),
        conditional: false,
    }
}

/// Marginal value functions of the constant-extrapolating (tree-like) spline.
pub fn value_functions_constant(p: &SplineParams, x: [f64; 2]) -> Result<ValueTable> {
    region_of(x)?;
    Ok(value_functions_constant_unchecked(p, x))
}

/// Observational value functions, `v(S) = E[f(X) | X_S = x*_S]`.
pub fn conditional_values(p: &SplineParams, x: [f64; 2]) -> Result<ValueTable> {
    region_of(x)?;
    let g = gamma();
    let [x1, x2] = x;
    let e_x2_given_x1 = indicator(x1);
    let e_x1_given_x2 = if x2 > 0.5 { 2.0 * g } else { -2.0 * g };
    Ok(ValueTable {
        empty: p.beta0 + p.beta12 * g,
        first: p.beta0 + p.beta1 * x1 + p.beta12 * x1 * e_x2_given_x1,
        second: p.beta0 + (p.beta1 + p.beta12 * x2) * e_x1_given_x2,
        both: prediction(p, x),
        conditional: true,
    })
}

/// The game restricted to the instance's region, with `X2` as stratum feature.
///
/// Only coalitions containing `X2` are meaningful; the others are `NaN`.
/// Within a region `X1` is half-normal with mean `+-2 gamma` and the model is
/// linear, so the stratum reference is `f` at that mean.
pub fn stratum_game(p: &SplineParams, x: [f64; 2]) -> Result<ValueTable> {
    let region = region_of(x)?;
    let half_normal_mean = match region {
        Region::Lower => -2.0 * gamma(),
        Region::Upper => 2.0 * gamma(),
    };
    Ok(ValueTable {
        empty: f64::NAN,
        first: f64::NAN,
        second: prediction(p, [half_normal_mean, x[1]]),
        both: prediction(p, x),
        conditional: false,
    })
}

/// Causal direction between the two spline features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplineCause {
    /// The sign of X1 determines X2.
    X1ToX2,
    /// X2 determines the sign of X1.
    X2ToX1,
}

impl SplineCause {
    pub const BOTH: [SplineCause; 2] = [SplineCause::X1ToX2, SplineCause::X2ToX1];

    /// Redistribution direction with X2 as the stratum feature.
    pub fn stratum_direction(self) -> Direction {
        match self {
            SplineCause::X1ToX2 => Direction::StratumIsEffect,
            SplineCause::X2ToX1 => Direction::StratumIsCause,
        }
    }

    /// Recipient of the stratum reference shift (X1 = 0, X2 = 1).
    pub fn recipient(self) -> usize {
        match self {
            SplineCause::X1ToX2 => 0,
            SplineCause::X2ToX1 => 1,
        }
    }

    pub fn ordering(self) -> CausalOrdering {
        let groups = match self {
            SplineCause::X1ToX2 => vec![vec![0], vec![1]],
            SplineCause::X2ToX1 => vec![vec![1], vec![0]],
        };
        CausalOrdering::new(groups, 2).expect("two singleton groups")
    }

    pub fn label(self) -> &'static str {
        match self {
            SplineCause::X1ToX2 => "x1->x2",
            SplineCause::X2ToX1 => "x2->x1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Table {
    /// Marginal, linear extrapolation.
    T1,
    /// Marginal, constant extrapolation.
    T2,
    /// Per-region attributions (no X2 attribution).
    T3,
    /// Stratified attributions after redistribution; needs a direction and `xi`.
    T4,
    /// Causal (asymmetric, conditional) attributions; needs a direction.
    T6,
}

impl Table {
    pub const ALL: [Table; 5] = [Table::T1, Table::T2, Table::T3, Table::T4, Table::T6];

    pub fn label(self) -> &'static str {
        match self {
            Table::T1 => "T1",
            Table::T2 => "T2",
            Table::T3 => "T3",
            Table::T4 => "T4",
            Table::T6 => "T6",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TableExtras {
    pub xi: Option<f64>,
    pub direction: Option<SplineCause>,
}

/// Closed-form attributions transcribed from the attribution tables.
pub fn table_attributions(which: Table, p: &SplineParams, x: [f64; 2], extras: TableExtras) -> Result<AttributionReport> {
    let region = region_of(x)?;
    let g = gamma();
    let SplineParams { beta0: b0, beta1: b1, beta12: b12 } = *p;
    let x1 = x[0];
    let f = prediction(p, x);
    let upper = region == Region::Upper;

    let need_direction = || {
        extras
            .direction
            .ok_or_else(|| Error::InvalidArgument(format!("table {} needs a causal direction", which.label())))
    };
    // Per-region reference and X1 attribution.
    let (t3_phi0, t3_phi1) = if upper {
        (b0 + 2.0 * (b1 + b12) * g, (b1 + b12) * (x1 - 2.0 * g))
    } else {
        (b0 - 2.0 * b1 * g, b1 * (x1 + 2.0 * g))
    };

    let (phi0, phi1, phi2, method) = match which {
        Table::T1 => {
            let phi0 = b0 + b12 * g;
            if upper {
                (phi0, (b1 + 0.75 * b12) * x1 - g * b12 / 2.0, b12 / 4.0 * x1 - g * b12 / 2.0, Method::ExactMarginal)
            } else {
                (phi0, (b1 + b12 / 4.0) * x1 - g * b12 / 2.0, -b12 / 4.0 * x1 - g * b12 / 2.0, Method::ExactMarginal)
            }
        }
        Table::T2 => {
            let phi0 = b0 + b12 * g;
            if upper {
                (
                    phi0,
                    3.0 * (b1 + b12) * x1 / 4.0 - (b12 + b1 / 2.0) * g,
                    (b1 + b12) * x1 / 4.0 + b1 * g / 2.0,
                    Method::ExactMarginal,
                )
            } else {
                (
                    phi0,
                    3.0 * b1 * x1 / 4.0 + (b1 - b12) * g / 2.0,
                    b1 * x1 / 4.0 - (b1 + b12) * g / 2.0,
                    Method::ExactMarginal,
                )
            }
        }
        Table::T3 => (t3_phi0, t3_phi1, 0.0, Method::Stratified),
        Table::T4 => {
            let xi = extras
                .xi
                .ok_or_else(|| Error::InvalidArgument("table T4 needs xi".into()))?;
            match need_direction()? {
                SplineCause::X1ToX2 => {
                    let phi1 = if upper { b0 + (b1 + b12) * x1 - xi } else { b0 + b1 * x1 - xi };
                    (xi, phi1, 0.0, Method::Stratified)
                }
                SplineCause::X2ToX1 => (xi, t3_phi1, t3_phi0 - xi, Method::Stratified),
            }
        }
        Table::T6 => {
            let phi0 = b0 + b12 * g;
            match need_direction()? {
                SplineCause::X1ToX2 => {
                    let phi1 = if upper { (b1 + b12) * x1 - b12 * g } else { b1 * x1 - b12 * g };
                    (phi0, phi1, 0.0, Method::Asymmetric)
                }
                SplineCause::X2ToX1 => {
                    let phi2 = if upper { (2.0 * b1 + b12) * g } else { -(2.0 * b1 + b12) * g };
                    (phi0, t3_phi1, phi2, Method::Asymmetric)
                }
            }
        }
    };
    Ok(AttributionReport::new(phi0, vec![phi1, phi2], f, method))
}

/// Standard normal draws by the Box–Muller transform over ChaCha8 uniforms.
///
/// Fixed algorithm: identical seeds give bit-identical samples across releases.
pub fn standard_normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        // 1 - U lies in (0, 1], keeping the logarithm finite.
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        out.push(r * theta.cos());
        out.push(r * theta.sin());
    }
    out.truncate(n);
    out
}

/// `n` rows of `(x1, x2, y)` with `x1 ~ N(0,1)`, `x2 = I(x1 > 0)` and `y = f(x1, x2)`.
pub fn sample_spline_data(n: usize, seed: u64, p: &SplineParams) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut values = Vec::with_capacity(3 * n);
    for x1 in standard_normals(n, seed) {
        let x2 = indicator(x1);
        values.extend([x1, x2, prediction(p, [x1, x2])]);
    }
    Dataset::from_flat(vec!["x1".into(), "x2".into(), "y".into()], values)
}

/// Random coefficients and on-manifold points for property checks.
///
/// Coefficients are uniform on `[-3, 3]`; `x1` is uniform on `[-3, 3]` and
/// `x2 = I(x1 > 0)`. Every tenth point is `x1 = 0` to exercise the boundary.
pub fn random_cases(n: usize, seed: u64) -> Vec<(SplineParams, [f64; 2])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let p = SplineParams::new(
                rng.gen_range(-3.0..=3.0),
                rng.gen_range(-3.0..=3.0),
                rng.gen_range(-3.0..=3.0),
            );
            let x1: f64 = if i % 10 == 9 { 0.0 } else { rng.gen_range(-3.0..=3.0) };
            (p, [x1, indicator(x1)])
        })
        .collect()
}

/// One closed-form row of the golden fixture set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRow {
    pub beta0: f64,
    pub beta1: f64,
    pub beta12: f64,
    pub x1: f64,
    pub x2: f64,
    pub table: String,
    pub direction: String,
    pub xi: String,
    pub phi0: f64,
    pub phi1: f64,
    pub phi2: f64,
}

/// Golden rows for every table at `n` random points. T4 uses
/// `xi = b0 + b12 * gamma`; T4 and T6 emit one row per direction.
pub fn golden_rows(n: usize, seed: u64) -> Result<Vec<GoldenRow>> {
    let mut rows = Vec::new();
    for (p, x) in random_cases(n, seed) {
        for table in Table::ALL {
            let directions: &[Option<SplineCause>] = match table {
                Table::T4 | Table::T6 => &[Some(SplineCause::X1ToX2), Some(SplineCause::X2ToX1)],
                _ => &[None],
            };
            for &direction in directions {
                let xi = (table == Table::T4).then(|| p.beta0 + p.beta12 * gamma());
                let r = table_attributions(table, &p, x, TableExtras { xi, direction })?;
                rows.push(GoldenRow {
                    beta0: p.beta0,
                    beta1: p.beta1,
                    beta12: p.beta12,
                    x1: x[0],
                    x2: x[1],
                    table: table.label().into(),
                    direction: direction.map(|d| d.label().to_string()).unwrap_or_default(),
                    xi: xi.map(|v| v.to_string()).unwrap_or_default(),
                    phi0: r.phi0,
                    phi1: r.phi[0],
                    phi2: r.phi[1],
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_golden_csv<W: Write>(rows: &[GoldenRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_golden_csv<R: std::io::Read>(reader: R) -> Result<Vec<GoldenRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn beta011() -> SplineParams {
        SplineParams::new(0.0, 1.0, 1.0)
    }

    #[test]
    fn constants() {
        let c = SplineOracleConstants::default();
        assert!((c.gamma - 0.398_942_280_4).abs() < 1e-10);
        assert!((c.correlation - 0.797_884_560_8).abs() < 1e-10);
        assert!((c.correlation - 2.0 * c.gamma).abs() < 1e-15);
    }

    #[test]
    fn linear_value_examples() {
        let g = gamma();
        let v = value_functions_linear(&beta011(), [1.0, 1.0]).unwrap();
        assert_eq!(v.as_array(), [g, 1.5, 0.0, 2.0]);
        let v = value_functions_linear(&beta011(), [-1.0, 0.0]).unwrap();
        assert_eq!(v.as_array(), [g, -1.5, 0.0, -1.0]);
        let v = value_functions_linear(&SplineParams::new(0.0, 1.0, 0.0), [2.5, 1.0]).unwrap();
        assert_eq!(v.as_array(), [0.0, 2.5, 0.0, 2.5]);
    }

    #[test]
    fn constant_value_examples() {
        let g = gamma();
        let v = value_functions_constant(&beta011(), [1.0, 1.0]).unwrap();
        assert!((v.first - 1.0).abs() < TOL);
        assert!((v.second - 2.0 * g).abs() < TOL);
        let v = value_functions_constant(&beta011(), [-1.0, 0.0]).unwrap();
        assert!((v.first + 0.5).abs() < TOL);
        assert!((v.second + g).abs() < TOL);
        let v = value_functions_constant(&SplineParams::new(1.25, 0.0, 0.0), [0.3, 1.0]).unwrap();
        assert_eq!(v.as_array(), [1.25; 4]);
    }

    #[test]
    fn conditional_value_examples() {
        let g = gamma();
        let v = conditional_values(&beta011(), [1.0, 1.0]).unwrap();
        assert_eq!(v.first, 2.0);
        assert!((v.second - 4.0 * g).abs() < TOL);
        let p = SplineParams::new(0.5, 2.0, -1.0);
        let v = conditional_values(&p, [-0.7, 0.0]).unwrap();
        assert!((v.first - (0.5 + 2.0 * -0.7)).abs() < TOL);
        let p = SplineParams::new(0.0, 1.5, 0.0);
        for x in [[1.0, 1.0], [-1.0, 0.0]] {
            let v = conditional_values(&p, x).unwrap();
            let sign = if x[1] > 0.5 { 1.0 } else { -1.0 };
            assert!((v.second - 1.5 * sign * 2.0 * g).abs() < TOL);
        }
    }

    #[test]
    fn off_manifold_rejected() {
        for x in [[1.0, 0.0], [-1.0, 1.0], [0.0, 1.0], [0.5, 0.5]] {
            assert!(matches!(value_functions_linear(&beta011(), x), Err(Error::OffManifold { .. })));
            assert!(matches!(table_attributions(Table::T1, &beta011(), x, TableExtras::default()), Err(Error::OffManifold { .. })));
        }
        assert_eq!(region_of([0.0, 0.0]).unwrap(), Region::Lower);
    }

    #[test]
    fn table_examples() {
        let g = gamma();
        let t1 = table_attributions(Table::T1, &beta011(), [1.0, 1.0], TableExtras::default()).unwrap();
        assert!((t1.phi0 - g).abs() < TOL);
        assert!((t1.phi[0] - (1.75 - g / 2.0)).abs() < TOL);
        assert!((t1.phi[0] - 1.550_529).abs() < 1e-6);
        assert!((t1.phi[1] - 0.050_529).abs() < 1e-6);
        let t2 = table_attributions(Table::T2, &beta011(), [1.0, 1.0], TableExtras::default()).unwrap();
        // 3/2 - 3 gamma / 2
        assert!((t2.phi[0] - (1.5 - 1.5 * g)).abs() < TOL);
        assert!((t2.phi[0] - 0.901_587).abs() < 1e-6);
        assert!((t2.phi[1] - 0.699_471).abs() < 1e-6);
        let t6 = table_attributions(
            Table::T6,
            &beta011(),
            [-1.0, 0.0],
            TableExtras {
                direction: Some(SplineCause::X1ToX2),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((t6.phi[0] + 1.0 + g).abs() < TOL);
        assert_eq!(t6.phi[1], 0.0);
        assert!(table_attributions(Table::T4, &beta011(), [1.0, 1.0], TableExtras::default()).is_err());
    }

    #[test]
    fn tables_are_efficient() {
        for (p, x) in random_cases(1000, 11) {
            let f = prediction(&p, x);
            for table in Table::ALL {
                for direction in SplineCause::BOTH {
                    let extras = TableExtras {
                        xi: Some(0.37),
                        direction: Some(direction),
                    };
                    let r = table_attributions(table, &p, x, extras).unwrap();
                    assert!((r.total() - f).abs() < TOL, "{table:?} {p:?} {x:?}");
                }
            }
        }
    }

    #[test]
    fn stratified_table_with_causal_xi_equals_causal_table() {
        for (p, x) in random_cases(1000, 12) {
            let xi = p.beta0 + p.beta12 * gamma();
            for direction in SplineCause::BOTH {
                let t4 = table_attributions(Table::T4, &p, x, TableExtras { xi: Some(xi), direction: Some(direction) }).unwrap();
                let t6 = table_attributions(Table::T6, &p, x, TableExtras { xi: None, direction: Some(direction) }).unwrap();
                assert!((t4.phi0 - t6.phi0).abs() < TOL);
                for j in 0..2 {
                    assert!((t4.phi[j] - t6.phi[j]).abs() < TOL, "{p:?} {x:?} {direction:?}");
                }
            }
        }
    }

    #[test]
    fn sampler_is_deterministic_and_on_manifold() {
        let p = beta011();
        let a = sample_spline_data(1000, 5, &p).unwrap();
        let b = sample_spline_data(1000, 5, &p).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_spline_data(1000, 6, &p).unwrap());
        for r in a.rows() {
            assert_eq!(r[1], indicator(r[0]));
            assert_eq!(r[2], prediction(&p, [r[0], r[1]]));
        }
        let one = sample_spline_data(1, 0, &p).unwrap();
        assert_eq!(one.n_rows(), 1);
        assert!(region_of([one.row(0)[0], one.row(0)[1]]).is_ok());
        assert!(sample_spline_data(0, 0, &p).is_err());
    }

    #[test]
    fn golden_csv_round_trip() {
        let rows = golden_rows(3, 1).unwrap();
        assert_eq!(rows.len(), 3 * 7);
        let mut buf = Vec::new();
        write_golden_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_golden_csv(buf.as_slice()).unwrap(), rows);
    }
}
