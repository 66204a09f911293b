mod common;

use std::sync::OnceLock;

use common::*;
use garling::embedding::{
    apply_P, apply_S, block_domination_check, build_embedding_plan, p_gamma, structural_checks,
    verify_embedding, y_functional, y_vector, EmbedCaps, EmbeddingPlan, GammaSpec, TriArray,
};
use garling::norms::{ellp_norm, garling_value};
use garling::{Error, FinSeq, Weight};
use proptest::prelude::*;

fn plan() -> &'static EmbeddingPlan {
    static PLAN: OnceLock<EmbeddingPlan> = OnceLock::new();
    PLAN.get_or_init(|| {
        build_embedding_plan(
            0.21,
            3,
            &Weight::power(0.5).unwrap(),
            2.0,
            EmbedCaps::default(),
        )
        .unwrap()
    })
}

/// The intervals `J_{i,n}` and the shifts `m_n`, recomputed from the kappas.
fn layout_oracle(kappas: &[Vec<usize>]) -> (Vec<Vec<(usize, usize)>>, Vec<usize>) {
    let mut intervals = Vec::new();
    let mut shifts = Vec::new();
    let mut end = 0;
    let mut m_n = 0;
    for kappa in kappas {
        let mut row = Vec::new();
        for &k in kappa {
            row.push((end + 1, end + k));
            end += k;
        }
        intervals.push(row);
        shifts.push(m_n);
        m_n += kappa.iter().max().unwrap();
    }
    (intervals, shifts)
}

#[test]
fn intervals_match_the_oracle() {
    let plan = plan();
    let (oracle, shifts) = layout_oracle(plan.kappas());
    assert_eq!(plan.level_shifts(), &shifts[..]);
    for n in 1..=plan.levels() {
        for i in 1..=n {
            assert_eq!(plan.interval(i, n).unwrap(), oracle[n - 1][i - 1]);
        }
    }
    assert!(plan.interval(0, 1).is_err());
    assert!(plan.interval(2, 1).is_err());
    assert_eq!(
        plan.total_length(),
        oracle.last().unwrap().last().unwrap().1
    );
    assert!((plan.t() - 1.21f64.sqrt()).abs() < 1e-15);
}

#[test]
fn hump_condition_holds_at_every_block() {
    let plan = plan();
    let w = plan.weight();
    let theta = plan.t().powf(-plan.p());
    for n in 1..=plan.levels() {
        let m_n = plan.level_shifts()[n - 1];
        for &k in &plan.kappas()[n - 1] {
            assert!(w.hump_ratio(m_n, k) >= theta);
        }
        let y = plan.level_vector(n).unwrap();
        assert!(garling_value(&y, w, plan.p()).unwrap() <= plan.t());
    }
}

#[test]
fn functionals_are_biorthogonal() {
    let plan = plan();
    let cells: Vec<(usize, usize)> = (1..=plan.levels())
        .flat_map(|n| (1..=n).map(move |i| (i, n)))
        .collect();
    for &(i, n) in &cells {
        let f = y_functional(plan, i, n).unwrap();
        for &(i2, n2) in &cells {
            let v = f.apply(&y_vector(plan, i2, n2).unwrap());
            let expected = if (i, n) == (i2, n2) { 1.0 } else { 0.0 };
            assert!(
                (v - expected).abs() <= 1e-12,
                "({i},{n}) on ({i2},{n2}) = {v}"
            );
        }
        let back = apply_P(plan, &y_vector(plan, i, n).unwrap()).unwrap();
        assert!(back.max_abs_diff(&TriArray::unit(plan.levels(), i, n)) <= 1e-12);
        let s = apply_S(plan, &TriArray::unit(plan.levels(), i, n)).unwrap();
        assert_eq!(s.canonical(), y_vector(plan, i, n).unwrap().canonical());
    }
    assert_eq!(
        apply_P(plan, &FinSeq::empty()).unwrap(),
        TriArray::zeros(plan.levels())
    );
}

#[test]
fn operator_preconditions() {
    let plan = plan();
    let far = FinSeq::indicator(&[plan.total_length() + 1]);
    assert!(matches!(
        apply_P(plan, &far),
        Err(Error::SupportOutOfRange(_))
    ));
    let wrong = TriArray::zeros(plan.levels() + 1);
    assert!(matches!(
        apply_S(plan, &wrong),
        Err(Error::ShapeMismatch(_))
    ));
    assert!(build_embedding_plan(0.0, 2, plan.weight(), 2.0, EmbedCaps::default()).is_err());
    assert!(matches!(
        build_embedding_plan(0.21, 3, plan.weight(), 2.0, EmbedCaps { k_cap: 1000 }),
        Err(Error::CapExceeded { .. })
    ));
}

#[test]
fn verification_is_seed_deterministic_and_catches_tampering() {
    let plan = plan();
    let a = verify_embedding(plan, 200, 11);
    let b = verify_embedding(plan, 200, 11);
    assert!(a.pass, "{a:#?}");
    assert_eq!(a, b);
    let names: Vec<&str> = a.checks.iter().map(|c| c.check.as_str()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for needed in [
        "biorthogonality",
        "p_bound",
        "s_bound",
        "p_s_identity",
        "partition",
        "hump_condition",
    ] {
        assert!(names.contains(&needed), "missing {needed}");
    }

    let mut rec = plan.to_record();
    rec.kappas[2][1] -= 7000;
    let tampered = EmbeddingPlan::from_record(rec).unwrap();
    let report = verify_embedding(&tampered, 50, 11);
    assert!(!report.check("hump_condition").unwrap().pass);
    assert!(!report.pass);

    let mut rec = plan.to_record();
    rec.intervals[1][0][1] += 1;
    let shifted = EmbeddingPlan::from_record(rec).unwrap();
    assert!(!structural_checks(&shifted).iter().all(|c| c.pass));
}

#[test]
fn single_level_plan_passes_trivially() {
    let w = Weight::log();
    let plan = build_embedding_plan(0.3, 1, &w, 1.0, EmbedCaps::default()).unwrap();
    assert_eq!(plan.level_shifts(), &[0]);
    assert!(structural_checks(&plan).iter().all(|c| c.pass));
    assert!(verify_embedding(&plan, 100, 1).pass);
}

#[test]
fn gamma_examples() {
    let w = Weight::power(0.5).unwrap();
    let gamma = GammaSpec::certify(vec![2, 3, 9], &w).unwrap();
    assert_eq!(gamma.partial_sums(), vec![0, 2, 5, 14]);
    assert!(p_gamma(&gamma, &w, 2.0, &FinSeq::empty())
        .unwrap()
        .is_zero());
    assert!(GammaSpec::new(vec![2, 3, 9], gamma.theta * 1.01, &w).is_err());
    assert!(GammaSpec::new(vec![2, 0], 0.1, &w).is_err());

    // Entry n is W_{k_n}^(1/p) times the w-weighted mean over block n.
    let f = FinSeq::new((1..=16).map(|j| (j as f64).sin()).collect());
    let got = p_gamma(&gamma, &w, 2.0, &f).unwrap();
    let closed = |j: usize| (j as f64).powf(-0.5);
    for (n, (&q0, &k)) in gamma.partial_sums().iter().zip(&gamma.lengths).enumerate() {
        let num: f64 = (q0 + 1..=q0 + k).map(|j| closed(j) * f.get(j)).sum();
        let den: f64 = (q0 + 1..=q0 + k).map(closed).sum();
        let expected = prefix_oracle(closed, k).sqrt() * num / den;
        assert!((got.get(n + 1) - expected).abs() <= 1e-12);
    }
}

#[test]
fn domination_examples() {
    let w = Weight::power(1.0).unwrap();
    let block = FinSeq::new(vec![0.5, 0.5]);
    let v = block_domination_check(&[block], 1.0, &[1.0], &w, 1.0).unwrap();
    assert!(v.holds && v.lhs <= 1.0);

    let units: Vec<FinSeq> = (1..=5).map(|j| FinSeq::indicator(&[2 * j])).collect();
    let b = [0.3, -1.2, 0.7, 2.0, -0.1];
    for p in [1.0, 2.0] {
        let v = block_domination_check(&units, 1.0, &b, &w, p).unwrap();
        assert!(v.holds);
        assert!(rel_err(v.rhs, ellp_norm(&FinSeq::new(b.to_vec()), p).unwrap()) <= 1e-15);
    }
    let overlapping = [FinSeq::indicator(&[2]), FinSeq::indicator(&[1])];
    assert!(block_domination_check(&overlapping, 1.0, &[1.0, 1.0], &w, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plan_level_blocks_dominate(b in prop::collection::vec(-3.0f64..3.0, 3)) {
        let plan = plan();
        let blocks: Vec<FinSeq> = (1..=3).map(|n| plan.level_vector(n).unwrap()).collect();
        let v = block_domination_check(&blocks, plan.t(), &b, plan.weight(), plan.p()).unwrap();
        prop_assert!(v.holds, "{v:?}");
    }

    #[test]
    fn s_then_p_is_the_identity(rows in prop::collection::vec(-2.0f64..2.0, 6)) {
        let plan = plan();
        let x = TriArray::from_rows(vec![rows[..1].to_vec(), rows[1..3].to_vec(), rows[3..6].to_vec()]).unwrap();
        let back = apply_P(plan, &apply_S(plan, &x).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&x) <= 1e-9);
        let sx = garling_value(&apply_S(plan, &x).unwrap(), plan.weight(), plan.p()).unwrap();
        prop_assert!(sx <= plan.t() * x.mixed_norm(plan.p()).unwrap() + 1e-9);
    }

    #[test]
    fn p_gamma_is_bounded(lengths in prop::collection::vec(1usize..40, 1..6), coeffs in prop::collection::vec(-1.0f64..1.0, 1..120), wi in 0usize..3, p in 1.0f64..3.0) {
        let (_, w, _) = &builtin_weights()[wi];
        let gamma = GammaSpec::certify(lengths, w).unwrap();
        let f = FinSeq::new(coeffs);
        let lhs = ellp_norm(&p_gamma(&gamma, w, p, &f).unwrap(), p).unwrap();
        prop_assert!(lhs <= gamma.theta.powf(-1.0 / p) * garling_value(&f, w, p).unwrap() + 1e-9);
    }
}
