//! Invariants over generated affine MPECs and SVC instances.

use mpec_cq::bho::{BhoPoint, LambdaPsiPattern};
use mpec_cq::cq::{check_all, CqName, Verdict, DEFAULT_BIACTIVE_CAP};
use mpec_cq::fuzz::{generated_point, random_affine_case, random_bho_instance, AffineCase};
use mpec_cq::model::{check_feasibility, classify_active, AffineMap, AffineMpec, PointEvaluation, Tolerances};
use mpec_cq::report::digest;
use mpec_cq::stationarity::{classify_stationarity, StationarityClass};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn case(seed: u64) -> AffineCase {
    random_affine_case(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn verdicts(mpec: &AffineMpec, point: &[f64]) -> Vec<(CqName, Verdict)> {
    let tol = Tolerances::default();
    let eval = mpec.evaluate(point).unwrap();
    let active = classify_active(&eval, &tol).unwrap();
    let r = check_all(&eval, &active, &tol, DEFAULT_BIACTIVE_CAP).unwrap();
    r.verdicts.iter().map(|v| (v.cq, v.verdict)).collect()
}

fn strongest(mpec: &AffineMpec, point: &[f64], grad_f: &[f64]) -> StationarityClass {
    let tol = Tolerances::default();
    let eval = mpec.evaluate(point).unwrap();
    let active = classify_active(&eval, &tol).unwrap();
    classify_stationarity(&eval, &active, grad_f, &tol, DEFAULT_BIACTIVE_CAP).unwrap().strongest_class
}

/// Powers of two keep the scaled data exact.
fn scale_rows(map: &AffineMap, factors: &[f64]) -> AffineMap {
    AffineMap {
        matrix: map.matrix.iter().zip(factors.iter().cycle()).map(|(r, f)| r.iter().map(|x| x * f).collect()).collect(),
        offset: map.offset.iter().zip(factors.iter().cycle()).map(|(o, f)| o * f).collect(),
    }
}

fn permute_columns(map: &AffineMap, perm: &[usize]) -> AffineMap {
    AffineMap {
        matrix: map.matrix.iter().map(|r| perm.iter().map(|&k| r[k]).collect()).collect(),
        offset: map.offset.clone(),
    }
}

fn permute_rows(map: &AffineMap, perm: &[usize]) -> AffineMap {
    AffineMap {
        matrix: perm.iter().map(|&k| map.matrix[k].clone()).collect(),
        offset: perm.iter().map(|&k| map.offset[k]).collect(),
    }
}

fn shuffled(len: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..len).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn verdicts_ignore_positive_row_scaling(seed in any::<u64>(), exps in prop::collection::vec(-2i32..=2, 1..6)) {
        let c = case(seed);
        let f: Vec<f64> = exps.iter().map(|&e| 2f64.powi(e)).collect();
        let scaled = AffineMpec {
            n: c.mpec.n,
            g: scale_rows(&c.mpec.g, &f),
            h: scale_rows(&c.mpec.h, &f),
            comp_g: scale_rows(&c.mpec.comp_g, &f),
            comp_h: scale_rows(&c.mpec.comp_h, &f[1..].iter().chain(&f[..1]).copied().collect::<Vec<_>>()),
        };
        prop_assert_eq!(verdicts(&c.mpec, &c.point), verdicts(&scaled, &c.point));
    }

    #[test]
    fn verdicts_ignore_variable_and_pair_order(seed in any::<u64>(), pseed in any::<u64>()) {
        let c = case(seed);
        let vars = shuffled(c.mpec.n, pseed);
        let pairs = shuffled(c.mpec.comp_g.offset.len(), pseed ^ 1);
        let permuted = AffineMpec {
            n: c.mpec.n,
            g: permute_columns(&c.mpec.g, &vars),
            h: permute_columns(&c.mpec.h, &vars),
            comp_g: permute_rows(&permute_columns(&c.mpec.comp_g, &vars), &pairs),
            comp_h: permute_rows(&permute_columns(&c.mpec.comp_h, &vars), &pairs),
        };
        let point: Vec<f64> = vars.iter().map(|&k| c.point[k]).collect();
        prop_assert_eq!(verdicts(&c.mpec, &c.point), verdicts(&permuted, &point));
        let grad_f: Vec<f64> = vars.iter().map(|&k| c.grad_f[k]).collect();
        prop_assert_eq!(strongest(&c.mpec, &c.point, &c.grad_f), strongest(&permuted, &point, &grad_f));
    }

    #[test]
    fn stationarity_ignores_objective_scaling(seed in any::<u64>(), e in -3i32..=3) {
        let c = case(seed);
        let s = 2f64.powi(e);
        let scaled: Vec<f64> = c.grad_f.iter().map(|x| x * s).collect();
        prop_assert_eq!(strongest(&c.mpec, &c.point, &c.grad_f), strongest(&c.mpec, &c.point, &scaled));
    }

    #[test]
    fn lattice_and_monotonicity_hold(seed in any::<u64>()) {
        let c = case(seed);
        let tol = Tolerances::default();
        let eval = c.mpec.evaluate(&c.point).unwrap();
        prop_assert!(check_feasibility(&eval, &tol).unwrap().feasible);
        let active = classify_active(&eval, &tol).unwrap();
        let r = check_all(&eval, &active, &tol, DEFAULT_BIACTIVE_CAP).unwrap();
        prop_assert!(r.implication_violations.is_empty(), "{:?}", r.implication_violations);
        let st = classify_stationarity(&eval, &active, &c.grad_f, &tol, DEFAULT_BIACTIVE_CAP).unwrap();
        prop_assert!(st.monotonicity_violations.is_empty(), "{:?}", st.monotonicity_violations);
    }

    #[test]
    fn evaluation_records_round_trip(seed in any::<u64>()) {
        let c = case(seed);
        let eval = c.mpec.evaluate(&c.point).unwrap();
        let text = serde_json::to_string(&eval).unwrap();
        let back = PointEvaluation::from_json(&text).unwrap();
        prop_assert_eq!(&back, &eval);
        prop_assert_eq!(digest(&back), digest(&eval));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_points_are_feasible_and_classifiable(seed in any::<u64>(), k in 0usize..5) {
        let c = [0.01, 0.1, 1.0, 10.0, 100.0][k];
        let tol = Tolerances::default();
        let inst = random_bho_instance(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let p = generated_point(&inst, c, &tol).unwrap();
        prop_assert!(check_feasibility(&inst.evaluate(&p).unwrap(), &tol).unwrap().feasible);
        let pat: LambdaPsiPattern = mpec_cq::bho::classify_lambda_psi(&inst, &p, &tol).unwrap();
        let covered = pat.lambda1.len() + pat.lambda2.len() + pat.lambda3_plus.len() + pat.lambda3_c.len() + pat.lambda_u.len();
        prop_assert_eq!(covered, inst.n_train());

        let text = serde_json::to_string(&p).unwrap();
        prop_assert_eq!(BhoPoint::from_json(&text).unwrap(), p);
    }
}

#[test]
fn digest_is_stable_across_calls_and_key_order() {
    let a: serde_json::Value = serde_json::from_str(r#"{"b": [1, 2], "a": {"y": 1, "x": 2}}"#).unwrap();
    let b: serde_json::Value = serde_json::from_str(r#"{"a": {"x": 2, "y": 1}, "b": [1, 2]}"#).unwrap();
    assert_eq!(digest(&a), digest(&b));
    assert_eq!(digest(&a), digest(&a.clone()));
    assert_eq!(digest(&a).len(), 64);
}
