use std::path::PathBuf;

use num_traits::Zero;
use rlct::cli::load_model;
use rlct::jets::MultiIndex;
use rlct::kseries::{g_enumerated, g_jet, g_value, verify_prop1, verify_prop_taylor};
use rlct::modelspec::ModelSpec;
use rlct::normalize::{normalize_model, NormalizeConfig, VanishingOrder};
use rlct::scalar::{int, Rational};

fn spec(name: &str) -> ModelSpec {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(format!("{name}.model"));
    load_model(&p).unwrap().1
}

fn d(f: &rlct::jets::Jet<Rational>, e: &[u32]) -> Rational {
    f.derivative_value(&MultiIndex::new(e.to_vec()))
}

#[test]
fn worked_g_values_when_first_derivatives_vanish() {
    let s = spec("second_order");
    for x in s.true_distribution().support() {
        let f = s.f_jet::<Rational>(x, 4).unwrap();
        assert!(d(&f, &[1, 0]).is_zero() && d(&f, &[0, 1]).is_zero());
        let log_p = f.neg();
        assert_eq!(g_value(&log_p, &[0, 1, 1]).unwrap(), int(0));
        let three = int(3) * d(&f, &[0, 2]) * d(&f, &[1, 1]);
        assert_eq!(g_value(&log_p, &[0, 1, 1, 1]).unwrap(), three);
    }
}

#[test]
fn binomial_mixture_g_values_in_normalized_coordinates() {
    // only ∂₂f vanishes here, so the θ1 factors survive
    let s = spec("binmix_m2");
    for x in s.true_distribution().support() {
        let f = s.f_jet::<Rational>(x, 4).unwrap();
        assert!(d(&f, &[0, 1]).is_zero());
        let log_p = f.neg();
        assert_eq!(g_value(&log_p, &[0, 1, 1]).unwrap(), d(&f, &[1, 0]) * d(&f, &[0, 2]));
        let expect = int(3) * d(&f, &[1, 1]) * d(&f, &[0, 2]) - d(&f, &[1, 0]) * d(&f, &[0, 3]);
        assert_eq!(g_value(&log_p, &[0, 1, 1, 1]).unwrap(), expect);
    }
}

#[test]
fn recurrence_matches_enumeration_on_shipped_models() {
    for name in ["binmix_m2", "mixture_h3", "cubic_m3", "second_order"] {
        let s = spec(name);
        let dim = s.dim();
        let x = s.true_distribution().support()[0];
        let log_p = s.f_jet::<Rational>(x, 4).unwrap().neg();
        for n in 1..=4 {
            for a in MultiIndex::of_degree(dim, n) {
                let idx = a.to_index_list();
                let rec = g_jet(&log_p, &idx).unwrap().constant_term();
                assert_eq!(rec, g_enumerated(&log_p, &idx).unwrap(), "{name} {idx:?}");
            }
        }
    }
}

#[test]
fn prop1_on_every_shipped_model() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let (_, s) = load_model(&entry.unwrap().path()).unwrap();
        let r = verify_prop1(&s, 4).unwrap();
        assert!(r.passed(), "{r:?}");
        n += 1;
    }
    assert!(n >= 10);
}

#[test]
fn prop_taylor_on_order_two_models() {
    for name in ["binmix_m2", "binmix_natural", "mixture_h2", "mixture_h3", "mixture_degenerate"] {
        let res = normalize_model(&spec(name), &NormalizeConfig::default()).unwrap();
        assert_eq!(res.m, VanishingOrder::Finite(2));
        let r = verify_prop_taylor(&res).unwrap();
        assert!(r.passed() && r.checked > 0, "{name}: {r:?}");
    }
}
