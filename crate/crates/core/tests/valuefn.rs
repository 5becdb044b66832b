mod common;

use common::{names, random_tree_ensemble, uniform_rows};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratshap::oracle::{self, gamma};
use stratshap::{
    exact_shapley, Coalition, ColumnKind, ConditionalProvider, Dataset, FeatureVector, MarginalProvider, Model,
    SplineParams, ValueFunction,
};

fn sum_of(a: &Model, b: &Model) -> Model {
    match (a, b) {
        (Model::TreeEnsemble(a), Model::TreeEnsemble(b)) => {
            let mut out = a.clone();
            out.base_score += b.base_score;
            out.trees.extend(b.trees.iter().cloned());
            Model::TreeEnsemble(out)
        }
        (
            Model::Linear { intercept: ia, coefficients: ca },
            Model::Linear { intercept: ib, coefficients: cb },
        ) => Model::Linear {
            intercept: ia + ib,
            coefficients: ca.iter().zip(cb).map(|(x, y)| x + y).collect(),
        },
        _ => unreachable!(),
    }
}

#[test]
fn marginal_value_is_linear_in_the_model() {
    let bg = Dataset::new(names(5), uniform_rows(300, 5, 1)).unwrap();
    let x = FeatureVector::new(uniform_rows(1, 5, 2).remove(0), names(5)).unwrap();
    let pairs = [
        (random_tree_ensemble(5, 6, 3, 3), random_tree_ensemble(5, 4, 2, 4)),
        (
            Model::Linear { intercept: 0.5, coefficients: vec![1.0, -2.0, 0.5, 0.0, 3.0] },
            Model::Linear { intercept: -1.0, coefficients: vec![0.25, 1.0, -0.5, 2.0, 0.0] },
        ),
    ];
    for (f, g) in &pairs {
        let fg = sum_of(f, g);
        let vf = MarginalProvider::new(f, &x, &bg).unwrap();
        let vg = MarginalProvider::new(g, &x, &bg).unwrap();
        let vfg = MarginalProvider::new(&fg, &x, &bg).unwrap();
        for bits in 0..32u64 {
            let s = Coalition::from_bits(bits, 5).unwrap();
            let lhs = vfg.value(s).unwrap();
            let rhs = vf.value(s).unwrap() + vg.value(s).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "{s}");
        }
        let (rf, rg, rfg) = (
            exact_shapley(&vf).unwrap(),
            exact_shapley(&vg).unwrap(),
            exact_shapley(&vfg).unwrap(),
        );
        for j in 0..5 {
            assert!((rfg.phi[j] - rf.phi[j] - rg.phi[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn marginal_value_ignores_background_row_order() {
    let model = random_tree_ensemble(4, 8, 3, 5);
    let rows = uniform_rows(200, 4, 6);
    let mut shuffled = rows.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(7));
    let x = FeatureVector::new(vec![0.1, -0.3, 0.8, 1.2], names(4)).unwrap();
    let a = Dataset::new(names(4), rows).unwrap();
    let b = Dataset::new(names(4), shuffled).unwrap();
    let ra = exact_shapley(&MarginalProvider::new(&model, &x, &a).unwrap()).unwrap();
    let rb = exact_shapley(&MarginalProvider::new(&model, &x, &b).unwrap()).unwrap();
    assert!((ra.phi0 - rb.phi0).abs() < 1e-12);
    for j in 0..4 {
        assert!((ra.phi[j] - rb.phi[j]).abs() < 1e-12);
    }
}

#[test]
fn conditional_agrees_with_marginal_under_independence() {
    // x1 continuous, x2 an independent fair coin.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<Vec<f64>> = (0..200_000)
        .map(|_| vec![rng.gen_range(-1.5..1.5), f64::from(rng.gen_bool(0.5) as u8)])
        .collect();
    let mut bg = Dataset::new(names(2), rows).unwrap();
    bg.set_kind(1, ColumnKind::Categorical);
    let model = random_tree_ensemble(2, 12, 3, 9);
    for x in [vec![0.4, 1.0], vec![-0.9, 0.0]] {
        let x = FeatureVector::new(x, names(2)).unwrap();
        let marginal = MarginalProvider::new(&model, &x, &bg).unwrap();
        let conditional = ConditionalProvider::new(&model, &x, &bg).unwrap();
        for bits in 0..4u64 {
            let s = Coalition::from_bits(bits, 2).unwrap();
            let (c, se, n) = conditional.value_with_stderr(s).unwrap();
            assert!(n > 0);
            let m = marginal.value(s).unwrap();
            assert!((c - m).abs() <= 3.0 * se + 1e-12, "{s}: {c} vs {m} (se {se})");
        }
    }
}

#[test]
fn conditional_expectation_on_the_spline_manifold() {
    let p = SplineParams::new(0.0, 1.0, 1.0);
    let data = oracle::sample_spline_data(1_000_000, 10, &p).unwrap();
    let mut bg = data.without_column("y").unwrap();
    bg.set_kind(1, ColumnKind::Categorical);
    let model = Model::SplineLinear(p);
    let x = FeatureVector::new(vec![1.0, 1.0], names(2)).unwrap();
    let v = ConditionalProvider::new(&model, &x, &bg).unwrap();
    let (mean, se, n) = v.value_with_stderr(Coalition::from_members([1], 2).unwrap()).unwrap();
    let expected = 4.0 * gamma();
    assert!((expected - 1.595_77).abs() < 1e-5);
    assert!(n > 490_000 && n < 510_000);
    assert!((mean - expected).abs() <= 3.0 * se, "{mean} vs {expected} (se {se})");
}

#[test]
fn sampler_moments() {
    let n = 1_000_000;
    let data = oracle::sample_spline_data(n, 11, &SplineParams::new(0.0, 1.0, 1.0)).unwrap();
    let x1: Vec<f64> = data.column(0).collect();
    let x2: Vec<f64> = data.column(1).collect();
    let nf = n as f64;
    let tol = 3.0 / nf.sqrt();
    let g = gamma();

    let e12 = x1.iter().zip(&x2).map(|(a, b)| a * b).sum::<f64>() / nf;
    assert!((e12 - g).abs() < tol, "E[X1 X2] = {e12}");

    let upper: Vec<f64> = x1.iter().zip(&x2).filter(|(_, b)| **b == 1.0).map(|(a, _)| *a).collect();
    let cond = upper.iter().sum::<f64>() / upper.len() as f64;
    assert!((cond - 2.0 * g).abs() < tol, "E[X1 | X2 = 1] = {cond}");

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m1, m2) = (mean(&x1), mean(&x2));
    let cov = x1.iter().zip(&x2).map(|(a, b)| (a - m1) * (b - m2)).sum::<f64>() / nf;
    let var = |v: &[f64], m: f64| v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / nf;
    let corr = cov / (var(&x1, m1) * var(&x2, m2)).sqrt();
    assert!((corr - (2.0 / std::f64::consts::PI).sqrt()).abs() < tol, "corr = {corr}");

    // Manifold holds row by row, and x1 = 0 falls in the lower region.
    assert!(x1.iter().zip(&x2).all(|(a, b)| *b == if *a > 0.0 { 1.0 } else { 0.0 }));
}
