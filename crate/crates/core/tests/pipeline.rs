use std::path::PathBuf;

use num_traits::{One, Zero};
use rlct::cli::{analyze, load_model, run, AnalyzeOptions};
use rlct::error::Error;
use rlct::jets::MultiIndex;
use rlct::normalize::{Assumption3Status, NormalizeConfig, VanishingOrder};
use rlct::rlct::{classify_two_param, lambda_r_ge_dm1, mixture_sigma, AnalysisReport, CheckStatus, Order, Semantics};
use rlct::scalar::{int, rat, Rational};

fn model(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(format!("{name}.model"))
}

fn run_model(name: &str) -> rlct::cli::Analysis {
    let (id, spec) = load_model(&model(name)).unwrap();
    analyze(&id, &spec, &AnalyzeOptions::default()).unwrap()
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["rlct"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(name: &str) -> String {
    model(name).to_string_lossy().into_owned()
}

#[test]
fn binomial_mixture_report() {
    let a = run_model("binmix_m2");
    let r = &a.report;
    assert_eq!((r.d, r.r), (2, 1));
    assert_eq!(r.vanishing_order, VanishingOrder::Finite(2));
    assert_eq!(r.lambda.0, rat(3, 4));
    assert_eq!(r.multiplicity, 1);
    assert_eq!(r.semantics, Semantics::ExactRLCTAtPoint);
    assert_eq!(r.assumption3, Assumption3Status::AllDirectionsII);
    assert!(r.verifications.iter().all(|v| v.status == CheckStatus::Pass));
    assert!(r.global);
    assert!(r.transforms.is_empty());
    let row = classify_two_param(&a.normalization).unwrap();
    assert_eq!((row.row, row.lambda.0), (2, rat(3, 4)));
}

#[test]
fn component_coordinates_need_one_shear() {
    let a = run_model("binmix_natural");
    let t = &a.report.transforms;
    assert_eq!(t.len(), 1);
    assert_eq!(t[0].targets, vec![0]);
    assert_eq!(t[0].coefficients[0].0, int(1));
    assert_eq!(t[0].monomial, MultiIndex::new(vec![0, 1]));
    assert_eq!(a.report.lambda.0, rat(3, 4));
    // same K as the pre-transformed file
    let b = run_model("binmix_m2");
    assert_eq!(a.k.poly, b.k.poly);
}

#[test]
fn mixture_family() {
    for h in 2..=5usize {
        let a = run_model(&format!("mixture_h{h}"));
        let r = &a.report;
        assert_eq!(r.lambda.0, rat(h as i64 + 1, 4), "H = {h}");
        assert_eq!(r.semantics, Semantics::ExactRLCTAtPoint);
        assert_eq!(a.table.as_ref().unwrap().lambda.as_ref().unwrap().0, r.lambda.0);
        let t = vec![rat(1, 2 * (h as i64 - 1)); h - 1];
        let sigma = mixture_sigma(&t).unwrap();
        assert!(sigma.positive_definite);
        let total: Rational = t.iter().cloned().sum();
        let prod: Rational = t.iter().cloned().product();
        assert_eq!(
            sigma.general_closed_form.0,
            num_traits::pow(Rational::one() - total, h - 2) * prod
        );
    }
}

#[test]
fn degenerate_mixture_is_only_an_upper_bound() {
    let a = run_model("mixture_degenerate");
    let r = &a.report;
    assert!(matches!(r.assumption3, Assumption3Status::DirectionIFound(_)));
    assert_eq!(r.semantics, Semantics::UpperBoundOnly);
    assert_eq!(r.lambda.0, int(1));
    assert!(!r.global);
    let s = mixture_sigma(&[rat(1, 2), rat(1, 2)]).unwrap();
    assert!(s.determinant.0.is_zero() && !s.positive_definite);
}

#[test]
fn regular_models() {
    let a = run_model("binomial_regular");
    assert_eq!((a.report.r, a.report.lambda.0.clone()), (1, rat(1, 2)));
    let a = run_model("categorical_regular");
    assert_eq!(a.report.lambda.0, int(1));
    let row = classify_two_param(&a.normalization).unwrap();
    assert_eq!((row.row, row.lambda.0, row.multiplicity), (1, int(1), 1));
}

#[test]
fn cubic_order() {
    let a = run_model("cubic_m3");
    assert_eq!(a.report.vanishing_order, VanishingOrder::Finite(3));
    assert_eq!(a.report.lambda.0, rat(2, 3));
    assert_eq!(a.report.semantics, Semantics::ExactRLCTAtPoint);
    let row = classify_two_param(&a.normalization).unwrap();
    assert_eq!(row.lambda.0, lambda_r_ge_dm1(2, Order::Finite(3)).unwrap());
}

#[test]
fn flat_direction_maxes_out() {
    let a = run_model("flat_direction");
    assert_eq!(a.report.vanishing_order, VanishingOrder::MaxedOut(6));
    assert_eq!(a.report.lambda.0, rat(1, 2));
    assert_eq!(a.report.semantics, Semantics::UpperBoundOnly);
    let row = classify_two_param(&a.normalization).unwrap();
    assert_eq!(row.row, 3);
    assert_eq!(row.geometry, "line {θ1=0}");

    let (id, spec) = load_model(&model("flat_direction")).unwrap();
    let opts = AnalyzeOptions {
        normalize: NormalizeConfig {
            m_cap: 3,
            ..Default::default()
        },
        ..Default::default()
    };
    let a = analyze(&id, &spec, &opts).unwrap();
    assert_eq!(a.report.vanishing_order, VanishingOrder::MaxedOut(3));
}

#[test]
fn classification_needs_two_parameters() {
    let a = run_model("mixture_h3");
    assert_eq!(classify_two_param(&a.normalization), Err(Error::WrongDimension(3)));
}

#[test]
fn cap_below_twice_the_order_is_rejected() {
    let (id, spec) = load_model(&model("binmix_m2")).unwrap();
    let opts = AnalyzeOptions {
        normalize: NormalizeConfig {
            cap: Some(3),
            ..Default::default()
        },
        ..Default::default()
    };
    assert!(matches!(analyze(&id, &spec, &opts), Err(Error::InvalidDims(_))));
}

#[test]
fn rank_zero_model_is_rejected() {
    let (id, spec) = load_model(&model("quadratic_only")).unwrap();
    assert_eq!(
        analyze(&id, &spec, &AnalyzeOptions::default()).unwrap_err(),
        Error::NotSemiRegular
    );
    let (code, _, err) = cli(&["analyze", &path("quadratic_only")]);
    assert_eq!(code, 1);
    assert!(err.contains("not semi-regular"));
}

#[test]
fn json_round_trip_and_text_agree() {
    let (code, out, _) = cli(&["analyze", "--json", &path("binmix_m2")]);
    assert_eq!(code, 0);
    let report: AnalysisReport = serde_json::from_str(&out).unwrap();
    assert_eq!(report, run_model("binmix_m2").report);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["lambda"]["num"], 3);
    assert_eq!(v["lambda"]["den"], 4);
    assert_eq!(v["semantics"], "ExactRLCTAtPoint");
    let (_, text, _) = cli(&["analyze", &path("binmix_m2")]);
    assert!(text.contains("lambda = 3/4 (multiplicity 1)"));

    for name in ["mixture_degenerate", "flat_direction", "binmix_natural"] {
        let (_, out, _) = cli(&["analyze", "--json", &path(name)]);
        let back: AnalysisReport = serde_json::from_str(&out).unwrap();
        assert_eq!(back, run_model(name).report);
    }
}

#[test]
fn blowup_table_layout() {
    let (code, out, _) = cli(&["blowup", &path("binmix_m2")]);
    assert_eq!(code, 0);
    let rows: Vec<Vec<&str>> = out
        .lines()
        .skip(1)
        .take(4)
        .map(|l| l.split_whitespace().take(4).collect())
        .collect();
    assert_eq!(rows[0], ["1", "(2,0)", "(1,0)", "1"]);
    assert_eq!(rows[1], ["2", "(0,2)", "(0,1)", "1"]);
    assert_eq!(rows[2], ["2>1", "(4,2)", "(2,1)", "3/4"]);
    assert_eq!(rows[3], ["2>2", "(0,4)", "(0,2)", "3/4"]);
    assert!(out.contains("overall lambda = 3/4 (multiplicity 1)"));
}

#[test]
fn other_subcommands() {
    let (code, out, _) = cli(&["ktaylor", "--json", &path("binmix_m2")]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["cap"], 6);
    let (code, out, _) = cli(&["verify", &path("second_order")]);
    assert_eq!(code, 0);
    assert!(out.contains("prop1: pass"));
    let (code, out, _) = cli(&[
        "fenergy",
        "--replicates",
        "4",
        "--grid",
        "16",
        "--n-schedule",
        "10,20,40",
        &path("binomial_regular"),
    ]);
    assert!(code == 0 || code == 2);
    assert!(out.contains("lambda_hat"));
}

#[test]
fn input_errors_exit_one() {
    assert_eq!(cli(&["analyze", "/nonexistent.model"]).0, 1);
    assert_eq!(cli(&["analyze", "--m-cap", "x", &path("binmix_m2")]).0, 1);
    assert_eq!(cli(&["frobnicate"]).0, 1);
    let dir = std::env::temp_dir().join("rlct-pipeline-test.model");
    std::fs::write(&dir, "params: a\ntheta_star: 0\noutcome x: 1/2 + a\noutcome y: 1/3 - a\n").unwrap();
    let (code, _, err) = cli(&["analyze", &dir.to_string_lossy()]);
    assert_eq!(code, 1, "{err}");
}
