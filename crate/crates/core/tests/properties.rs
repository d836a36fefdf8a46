use bmcurrent::cone::classify;
use bmcurrent::evaluator::{evaluate_current, EvalOptions};
use bmcurrent::linalg::{dot, index_data, q, subsets, ExponentMatrix, Subset, Q};
use bmcurrent::mb::{eval_f, MbOptions};
use bmcurrent::oracle::{orientation_sign, residue_function_pn};
use bmcurrent::profile::RadialProfile;
use bmcurrent::structure::{decompose, sign_constant, MbSpec, PowerTerm, RationalRow};
use bmcurrent::testform::{Component, SeparableCoefficient, TestForm};
use num::complex::Complex64;
use num::rational::BigRational;
use num::{BigInt, Signed};
use proptest::prelude::*;

fn matrix_strategy(max_p: usize, max_n: usize) -> impl Strategy<Value = ExponentMatrix> {
    (1..=max_p)
        .prop_flat_map(move |p| (Just(p), p..=max_n))
        .prop_flat_map(|(p, n)| proptest::collection::vec(proptest::collection::vec(0u32..=3, n), p))
        .prop_filter_map("zero row", |rows| ExponentMatrix::new(rows).ok())
}

/// A component on `subset` whose degrees satisfy the angular rule.
fn matching_component(a: &ExponentMatrix, subset: &Subset, b: &[u32], profile: RadialProfile) -> Component {
    let sums = a.column_sums();
    let n = a.n();
    let b: Vec<u32> = (0..n).map(|m| b[m] + (sums[m] == 0 && subset.contains(m)) as u32).collect();
    let av = (0..n).map(|m| (sums[m] as i64 - subset.contains(m) as i64 + b[m] as i64) as u32).collect();
    Component {
        subset: subset.clone(),
        weight: Complex64::new(1.0, 0.0),
        coeff: SeparableCoefficient::uniform(av, b, profile),
    }
}

fn kernel_sign(p: usize) -> i32 {
    if (p * (p - 1) / 2) % 2 == 0 {
        1
    } else {
        -1
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn sign_constant_matches_orientation((n, p, pick) in (1usize..=8).prop_flat_map(|n| (Just(n), 1..=n, any::<prop::sample::Index>()))) {
        let all = subsets(n, p);
        let s = &all[pick.index(all.len())];
        prop_assert_eq!(sign_constant(s, p, n), kernel_sign(p) * orientation_sign(s, n));
    }

    #[test]
    fn cone_classification_is_scale_invariant(a in matrix_strategy(3, 5), scales in proptest::collection::vec(1i64..=9, 6)) {
        for s in subsets(a.n(), a.p()) {
            let normals: Vec<Vec<Q>> = s.indices().iter().map(|&k| a.column_q(k)).collect();
            let half = vec![q(-1); a.p()];
            let base = classify(&normals, &half);
            let scaled: Vec<Vec<Q>> = normals.iter().zip(&scales).map(|(v, &c)| v.iter().map(|x| x * q(c)).collect()).collect();
            let half2: Vec<Q> = half.iter().map(|x| x * q(scales[5])).collect();
            let other = classify(&scaled, &half2);
            prop_assert_eq!(&base.implicit, &other.implicit);
            prop_assert_eq!(base.interior_witness.is_some(), other.interior_witness.is_some());
        }
    }

    #[test]
    fn cone_classification_agrees_with_grid_search(a in matrix_strategy(3, 4)) {
        let p = a.p();
        let grid: Vec<Vec<Q>> = (0..9usize.pow(p as u32))
            .map(|mut code| (0..p).map(|_| { let v = (code % 9) as i64 - 4; code /= 9; q(v) }).collect())
            .collect();
        for s in subsets(a.n(), p) {
            let normals: Vec<Vec<Q>> = s.indices().iter().map(|&k| a.column_q(k)).collect();
            let class = classify(&normals, &vec![q(-1); p]);
            let feasible = |x: &Vec<Q>| normals.iter().all(|nv| !dot(nv, x).is_negative());
            let total = |x: &Vec<Q>| x.iter().fold(BigRational::from_integer(BigInt::from(0)), |acc, v| acc + v);
            match &class.interior_witness {
                Some(w) => {
                    prop_assert!(feasible(w));
                    prop_assert!(total(w).is_negative());
                }
                None => {
                    prop_assert!(grid.iter().all(|x| !(feasible(x) && total(x).is_negative())));
                    for &i in &class.implicit {
                        let strict = grid.iter().any(|x| feasible(x) && !total(x).is_positive() && dot(&normals[i], x).is_positive());
                        prop_assert!(!strict, "implicit normal {} of I = {} is strictly attainable", i, s);
                    }
                }
            }
        }
    }

    #[test]
    fn emitted_terms_satisfy_invariants(a in matrix_strategy(3, 5)) {
        let dec = decompose(&a).unwrap();
        for t in &dec.terms {
            prop_assert!(t.check_invariants().is_ok());
            let data = index_data(&a, &t.subset).unwrap();
            prop_assert_eq!(t.orientation, data.delta_sign());
        }
        prop_assert_eq!(dec.terms.len() + dec.skipped.len(), subsets(a.n(), a.p()).len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn pairing_is_linear(
        a in matrix_strategy(2, 2),
        b1 in proptest::collection::vec(0u32..=1, 2),
        b2 in proptest::collection::vec(0u32..=1, 2),
        r1 in 0.7f64..1.3, r2 in 0.7f64..1.3,
        w in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let subs = subsets(a.n(), a.p());
        let s1 = &subs[0];
        let s2 = subs.last().unwrap();
        let f = TestForm::new(a.n(), vec![matching_component(&a, s1, &b1, RadialProfile::bump(r1))]).unwrap();
        let g = TestForm::new(a.n(), vec![matching_component(&a, s2, &b2, RadialProfile::bump(r2))]).unwrap();
        let alpha = Complex64::new(w.0, w.1);
        let beta = Complex64::new(0.5, -1.0);
        let opts = EvalOptions::default();
        let ef = evaluate_current(&a, &f, &opts).unwrap().value;
        let eg = evaluate_current(&a, &g, &opts).unwrap().value;
        let combined = evaluate_current(&a, &f.combine(alpha, &g, beta).unwrap(), &opts).unwrap().value;
        let expected = alpha * ef + beta * eg;
        prop_assert!((combined - expected).norm() <= 1e-8 * (1.0 + expected.norm()), "{} vs {}", combined, expected);
    }

    #[test]
    fn shell_profiles_pair_to_zero(a in matrix_strategy(2, 3), b in proptest::collection::vec(0u32..=1, 3), inner in 0.1f64..0.6) {
        let profile = RadialProfile::Shell { radius: 1.0, inner };
        let comps: Vec<Component> = subsets(a.n(), a.p()).iter().map(|s| matching_component(&a, s, &b, profile.clone())).collect();
        let form = TestForm::new(a.n(), comps).unwrap();
        let v = evaluate_current(&a, &form, &EvalOptions::default()).unwrap().value;
        prop_assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn residue_function_is_constant_on_plateau(
        d in (1u32..=3, 1u32..=3, 0u32..=2),
        u in proptest::collection::vec(-3.0f64..-0.7, 4),
    ) {
        let a = ExponentMatrix::new(vec![vec![d.0, d.2], vec![0, d.1]]).unwrap();
        let s = Subset::from_one_based(&[1, 2], 2).unwrap();
        let plateau = RadialProfile::Plateau { radius: 1.0, flat: 0.6 };
        let form = TestForm::new(2, vec![matching_component(&a, &s, &[0, 0], plateau)]).unwrap();
        // ε from torus radii e^u inside the plateau.
        let eps = |u1: f64, u2: f64| {
            a.rows().iter().map(|r| (2.0 * (r[0] as f64 * u1 + r[1] as f64 * u2)).exp()).collect::<Vec<f64>>()
        };
        let x = residue_function_pn(&a, &eps(u[0], u[1]), &form).unwrap();
        let y = residue_function_pn(&a, &eps(u[2], u[3]), &form).unwrap();
        prop_assert!((x - y).norm() <= 1e-6 * x.norm().max(1e-12));
        // Only for a complete intersection does the point residue equal the current.
        if d.2 == 0 {
            let ev = evaluate_current(&a, &form, &EvalOptions::default()).unwrap().value;
            prop_assert!((ev - x).norm() <= 1e-6 * x.norm().max(1e-12), "{} vs {}", ev, x);
        }
    }

    #[test]
    fn mb_reflection_pair_matches_closed_form(k in 1i64..=4, den in 1i64..=2, lt in -4.0f64..4.0) {
        let c = BigRational::new(BigInt::from(k), BigInt::from(den));
        let spec = MbSpec {
            dim: 1,
            gamma_rows: vec![RationalRow(vec![c.clone()]), RationalRow(vec![-c.clone()])],
            power_exponents: vec![vec![PowerTerm { var: 1, exponent: q(1) }]],
        };
        let t = lt.exp();
        let v = eval_f(&spec, &[t], &MbOptions::default()).unwrap();
        let cf = k as f64 / den as f64;
        let u = t.powf(1.0 / cf);
        let exact = u / ((1.0 + u) * (1.0 + u)) / cf;
        prop_assert!((v.value - exact).abs() <= 1e-6 * exact, "{} vs {}", v.value, exact);
    }

    #[test]
    fn mb_flagship_factor_is_accurate(l1 in -3.0f64..3.0, l2 in -3.0f64..3.0) {
        let a = ExponentMatrix::new(vec![vec![1, 1, 0], vec![0, 1, 1]]).unwrap();
        let spec = decompose(&a).unwrap().terms[0].mb.clone().unwrap();
        let bases: Vec<f64> = spec.log_bases(&[l1, 0.0, l2]).iter().map(|v| v.exp()).collect();
        let v = eval_f(&spec, &bases, &MbOptions::default()).unwrap();
        prop_assert!(v.value.is_finite());
        prop_assert!(v.abs_error_estimate <= 1e-8 * v.value.abs().max(1e-12), "{:?}", v);
    }
}
