use std::collections::BTreeMap;

use proptest::prelude::*;
use vmspos_core::cohort::{
    assign_positions, build_cohort_set, spacing_uncertainty_rate, CohortKind, CohortName,
    RandomConfig, RateBasis,
};
use vmspos_core::corpus::{build_corpus, FilterCriteria};
use vmspos_core::exec::Execution;
use vmspos_core::ivtff::{parse_document, strip_comments, tokenize_locus, Locus, MarkerConfig};
use vmspos_core::stats::length::{pearson_statistic, ContingencyTable, LengthBin};
use vmspos_core::stats::propensity::propensity_order;
use vmspos_core::stats::{
    binom_pmf, binomial_test_two_sided, chi2_independence, threshold_sweep, BetaPrior,
    LengthDistribution, Thresholds, Tilt, TokenPropensity,
};

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        8 => "[a-z]{1,7}",
        1 => Just("{ckh}y".to_string()),
        1 => Just("[d:o]ain".to_string()),
        1 => Just("ch?dy".to_string()),
        1 => Just("o@254;r".to_string()),
        1 => Just("cKhy".to_string()),
    ]
}

fn delimiter() -> impl Strategy<Value = String> {
    prop_oneof![
        6 => Just(".".to_string()),
        2 => Just(",".to_string()),
        1 => Just("<->".to_string()),
        1 => Just(".<!note>".to_string()),
        1 => Just("<->.".to_string()),
    ]
}

/// Locus text of `1..=8` words with optional edge gaps, comments and a
/// paragraph-end marker.
fn locus_text() -> impl Strategy<Value = String> {
    (
        prop::collection::vec((word(), delimiter()), 1..8),
        word(),
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(body, last, lead_gap, trail_gap, end)| {
            let mut s = String::new();
            if lead_gap {
                s.push_str("<->");
            }
            for (w, d) in body {
                s.push_str(&w);
                s.push_str(&d);
            }
            s.push_str(&last);
            if trail_gap {
                s.push_str("<->");
            }
            if end {
                s.push_str("<$>");
            }
            s
        })
}

fn locus(text: &str) -> Locus {
    Locus {
        folio_id: "f1r".into(),
        locus_number: 1,
        locus_type: "@P0".into(),
        transcriber_tag: String::new(),
        raw_text: text.into(),
        source_line: 2,
    }
}

fn document(lines: &[String]) -> String {
    let mut s = String::from("<f1r> <! $I=H $H=1>\n");
    for (i, l) in lines.iter().enumerate() {
        let ty = if i == 0 { "@P0" } else { "+P0" };
        s.push_str(&format!("<f1r.{},{ty}> {l}\n", i + 1));
    }
    s
}

proptest! {
    #[test]
    fn locus_round_trip_and_flag_locality(text in locus_text()) {
        let cfg = MarkerConfig::default();
        let t = tokenize_locus(&locus(&text), &cfg).unwrap();
        prop_assert_eq!(t.reassemble(), strip_comments(&text, &cfg));
        prop_assert_eq!(t.junctions.len(), t.tokens.len() + 1);
        for (i, tok) in t.tokens.iter().enumerate() {
            let left = &t.junctions[i];
            let right = &t.junctions[i + 1];
            prop_assert_eq!(tok.flags.uncertain_space_before, left.uncertain);
            prop_assert_eq!(tok.flags.uncertain_space_after, right.uncertain);
            prop_assert_eq!(tok.flags.follows_gap, left.gap);
            prop_assert_eq!(tok.flags.precedes_gap, right.gap);
        }
        for w in t.tokens.windows(2) {
            prop_assert_eq!(w[0].flags.uncertain_space_after, w[1].flags.uncertain_space_before);
            prop_assert_eq!(w[0].flags.precedes_gap, w[1].flags.follows_gap);
        }
    }

    #[test]
    fn parsing_is_deterministic(lines in prop::collection::vec(locus_text(), 1..6)) {
        let text = document(&lines);
        let cfg = MarkerConfig::default();
        let a = parse_document(text.as_bytes(), &cfg).unwrap();
        let b = parse_document(text.as_bytes(), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cohorts_partition_included_tokens(
        lines in prop::collection::vec(locus_text(), 1..8),
        seed in any::<u64>(),
    ) {
        let doc = parse_document(document(&lines).as_bytes(), &MarkerConfig::default()).unwrap();
        let (corpus, _) = build_corpus(&doc, &FilterCriteria::default(), Execution::Sequential).unwrap();
        let (par, _) = build_corpus(&doc, &FilterCriteria::default(), Execution::Parallel).unwrap();
        prop_assert_eq!(&corpus, &par);
        let ann = assign_positions(&corpus, Execution::Sequential);
        prop_assert_eq!(&ann, &assign_positions(&corpus, Execution::Parallel));

        let random = RandomConfig { seed, cohort_size: Some(0), count: 6 };
        let set = build_cohort_set(&corpus, &ann, &random).unwrap();
        let mut seen: BTreeMap<_, usize> = BTreeMap::new();
        for c in set.cohorts.iter().filter(|c| matches!(c.kind, CohortKind::Reference | CohortKind::Subject)) {
            for r in &c.members {
                *seen.entry(*r).or_default() += 1;
            }
        }
        for r in &set.dropped_multi_role {
            *seen.entry(*r).or_default() += 1;
        }
        prop_assert!(seen.values().all(|v| *v == 1));
        let included = corpus.token_refs().filter(|r| !corpus.token(*r).excluded()).count();
        prop_assert_eq!(seen.len(), included);

        let middle = set.get(CohortName::Middle).unwrap();
        for name in [CohortName::Second, CohortName::Fourth] {
            prop_assert!(set.get(name).unwrap().members.iter().all(|r| middle.members.binary_search(r).is_ok()));
        }

        let size = middle.len() / 2;
        let random = RandomConfig { seed, cohort_size: Some(size), count: 6 };
        let a = build_cohort_set(&corpus, &ann, &random).unwrap();
        let b = build_cohort_set(&corpus, &ann, &random).unwrap();
        prop_assert_eq!(&a, &b);
        for i in 1..=6 {
            let c = a.get(CohortName::Rand(i)).unwrap();
            prop_assert_eq!(c.len(), size);
            prop_assert!(c.members.iter().all(|r| middle.members.binary_search(r).is_ok()));
        }

        for ord in [2, 4] {
            let rate = spacing_uncertainty_rate(&corpus, &ann, ord, RateBasis::default());
            prop_assert!(rate.uncertain <= rate.designated);
        }
    }

    #[test]
    fn chi2_is_symmetric(
        a in prop::collection::btree_map(1u32..12, 1u64..400, 2..10),
        b in prop::collection::btree_map(1u32..12, 1u64..400, 2..10),
    ) {
        let da = LengthDistribution::from_counts(CohortName::Top, a).unwrap();
        let db = LengthDistribution::from_counts(CohortName::Last, b).unwrap();
        let t = Thresholds::default();
        let ab = chi2_independence(&da, &db, &t);
        let ba = chi2_independence(&db, &da, &t);
        match (ab, ba) {
            (Ok(x), Ok(y)) => {
                prop_assert!((x.statistic - y.statistic).abs() <= 1e-9 * x.statistic.max(1.0));
                prop_assert!((x.p_value - y.p_value).abs() <= 1e-9);
                prop_assert_eq!(x.dof, y.dof);
                prop_assert_eq!(x.bins, y.bins);
                prop_assert!((0.0..=1.0).contains(&x.p_value));
            }
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "asymmetric outcome {:?} / {:?}", x, y),
        }
    }

    #[test]
    fn chi2_statistic_scales_with_counts(
        cells in prop::collection::vec((1u64..200, 1u64..200), 2..8),
        factor in 2u64..20,
    ) {
        let table = |f: u64| ContingencyTable {
            bins: (0..cells.len() as u32).map(|i| LengthBin { lo: i + 1, hi: i + 1, open: false }).collect(),
            rows: [
                cells.iter().map(|c| c.0 * f).collect(),
                cells.iter().map(|c| c.1 * f).collect(),
            ],
        };
        let s1 = pearson_statistic(&table(1));
        let sf = pearson_statistic(&table(factor));
        prop_assert!((sf - factor as f64 * s1).abs() <= 1e-9 * sf.max(1.0));
    }

    #[test]
    fn binomial_p_is_a_probability(n in 1u64..3000, kf in 0.0f64..=1.0, p0 in 0.0001f64..0.9999) {
        let k = ((n as f64) * kf).round() as u64;
        let p = binomial_test_two_sided(k, n, p0).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(p >= binom_pmf(k, n, p0) * (1.0 - 1e-9));
    }

    #[test]
    fn propensity_rows_and_sweep(
        rows in prop::collection::vec((0u64..60, 0u64..400), 1..40),
        n_s in 60u64..200,
        n_r in 400u64..2000,
    ) {
        let t = Thresholds::default();
        let mut scan: Vec<TokenPropensity> = rows
            .iter()
            .enumerate()
            .filter(|(_, (ks, kr))| ks + kr > 0)
            .map(|(i, (ks, kr))| {
                TokenPropensity::evaluate(&format!("t{i}"), CohortName::After, (*ks, n_s), (*kr, n_r), &t, BetaPrior::UNIFORM).unwrap()
            })
            .collect();
        for r in &scan {
            prop_assert_eq!(r.significant, r.p_value <= t.p_threshold && r.log_bayes >= t.logb_threshold);
            if r.k_subject == 0 {
                prop_assert_eq!(r.propensity_ratio, 0.0);
                prop_assert_eq!(r.tilt, Tilt::Aversive);
            }
            let affin = (r.k_subject as f64 / r.n_subject as f64) > (r.k_ref as f64 / r.n_ref as f64);
            prop_assert_eq!(r.tilt == Tilt::Affinitive, affin);
            for (p_thr, b_thr, want) in [
                (t.p_threshold, f64::NEG_INFINITY, r.p_value <= t.p_threshold),
                (1.0, t.logb_threshold, r.log_bayes >= t.logb_threshold),
            ] {
                let relaxed = Thresholds { p_threshold: p_thr, logb_threshold: b_thr, ..t };
                let again = TokenPropensity::evaluate(&r.token, r.subject, (r.k_subject, r.n_subject), (r.k_ref, r.n_ref), &relaxed, BetaPrior::UNIFORM).unwrap();
                prop_assert_eq!(again.significant, want);
            }
        }
        scan.sort_by(propensity_order);
        for w in scan.windows(2) {
            prop_assert!(w[0].tilt <= w[1].tilt);
            if w[0].tilt == w[1].tilt {
                prop_assert!(w[0].strength() >= w[1].strength());
            }
        }
        let grid = [1e-8, 1e-5, 1e-3, 0.01, 0.05, 0.2, 1.0];
        let sweep = threshold_sweep(CohortName::After, &scan, &grid, 5.0).unwrap();
        for w in sweep.points.windows(2) {
            prop_assert!(w[0].p_only <= w[1].p_only);
            prop_assert!(w[0].combined <= w[1].combined);
        }
        prop_assert!(sweep.points.iter().all(|p| p.combined <= p.p_only));
        prop_assert_eq!(sweep.points.last().unwrap().p_only, scan.len());
    }
}
