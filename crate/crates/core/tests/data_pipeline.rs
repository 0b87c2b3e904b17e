use proptest::prelude::*;
use vdreg::{
    load_csv, run_chain, standardize, CovariateKind, Dataset, McmcConfig, ModelConfig, ModelKind, PredictiveQuery,
    Predictor, Prepared, Schema,
};

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (2usize..12).prop_flat_map(|n| {
        (
            proptest::collection::vec((proptest::option::of(-1e6f64..1e6), proptest::option::of(0u8..2), proptest::option::of(0u8..4)), n),
            proptest::collection::vec(-1e3f64..1e3, n),
        )
            .prop_map(|(cells, y)| {
                let rows: Vec<Vec<Option<f64>>> = cells
                    .into_iter()
                    .map(|(c, b, k)| vec![c, b.map(f64::from), k.map(f64::from)])
                    .collect();
                Dataset::new(
                    vec!["c".into(), "b".into(), "k".into()],
                    "y",
                    vec![CovariateKind::Continuous, CovariateKind::Binary, CovariateKind::Categorical],
                    &rows,
                    y,
                )
                .unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_roundtrip(d in arb_dataset(), token in prop::sample::select(vec!["NA", ".", "missing"])) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        d.write_csv(&path, token).unwrap();
        let mut schema = Schema::new("y", d.kinds().to_vec());
        schema.na_token = token.to_string();
        let back = load_csv(&path, &schema).unwrap();
        prop_assert_eq!(back.y(), d.y());
        for i in 0..d.n() {
            prop_assert_eq!(back.row(i), d.row(i));
        }
    }
}

#[test]
fn standardizing_twice_is_identity_on_the_second_pass() {
    let rows: Vec<Vec<Option<f64>>> = (0..30).map(|i| vec![if i % 5 == 0 { None } else { Some(3.0 + i as f64 * 1.7) }]).collect();
    let y: Vec<f64> = (0..30).map(|i| 100.0 - (i as f64).powi(2)).collect();
    let d = Dataset::new(vec!["x".into()], "y", vec![CovariateKind::Continuous], &rows, y).unwrap();
    let once = standardize(&d).unwrap().apply(&d);
    let s2 = standardize(&once).unwrap();
    assert!(s2.response.location.abs() < 1e-12 && (s2.response.scale - 1.0).abs() < 1e-12);
    let a = s2.covariates[0].unwrap();
    assert!(a.location.abs() < 1e-12 && (a.scale - 1.0).abs() < 1e-12);
}

#[test]
fn missing_values_never_reach_numeric_output() {
    let rows: Vec<Vec<Option<f64>>> = (0..24)
        .map(|i| {
            let t = i as f64;
            vec![(i % 3 != 0).then_some(t.sin()), (i % 4 != 1).then_some(t.cos() * 10.0), Some((i % 2) as f64)]
        })
        .collect();
    let y: Vec<f64> = (0..24).map(|i| (i as f64 * 0.3).sin() * 2.0).collect();
    let d = Dataset::new(
        vec!["a".into(), "b".into(), "c".into()],
        "y",
        vec![CovariateKind::Continuous, CovariateKind::Continuous, CovariateKind::Binary],
        &rows,
        y,
    )
    .unwrap();
    let prep = Prepared::new(&d).unwrap();
    let cfg = ModelConfig::defaults_for(d.kinds());
    for model in [ModelKind::VDReg, ModelKind::VDLReg] {
        let mcmc = McmcConfig { iterations: 400, burn_in: 100, thin: 3, model, ..Default::default() };
        let draws = run_chain(&prep, &cfg, &mcmc).unwrap();
        for dr in &draws.draws {
            for t in &dr.params {
                assert!(t.mu.is_finite() && t.sigma2.is_finite() && t.sigma2 > 0.0);
                assert!(t.beta.iter().all(|b| b.is_finite()));
            }
        }
        let pred = Predictor::new(&prep, &cfg, &draws, true, 1).unwrap();
        for i in 0..d.n() {
            let m = pred.predictive_mean(&PredictiveQuery::new(d.row(i))).unwrap();
            assert!(m.is_finite());
        }
    }
}
