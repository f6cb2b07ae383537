use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate};
use earlywarn_core::filters::{apply_filters, FilterPolicy, Rule};
use earlywarn_core::ingest::{ArchiveBuilder, DateRange, MessageRecord, RawRecord, UserProfile};
use earlywarn_core::stats::{
    ad_pvalue, extract_anomaly_periods, ks_statistic, ks_two_sample, loglog_fit, scan_day, AdInterpolation, Method,
    PValueCurve, ScanConfig, SeasonRef, TestConfig, WeightedSample,
};
use earlywarn_core::synth::{generate_corpus, RegionSlot, ScenarioSpec};
use earlywarn_core::timeseries::{positions, slice_positions, CountMode, DailySeries, Scope, SeriesKey};
use earlywarn_core::Language;
use proptest::prelude::*;

fn day(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn counts(max_len: usize) -> impl Strategy<Value = Vec<u64>> {
    proptest::collection::vec(0u64..20, 1..max_len).prop_filter("nonempty", |v| v.iter().any(|&c| c > 0))
}

fn series(start: NaiveDate, values: Vec<u64>) -> DailySeries {
    let key = SeriesKey { scope: Scope::AllCountries, keyword_set: "k".into(), mode: CountMode::Messages };
    DailySeries { key, start, values }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ks_is_symmetric(a in counts(40), b in counts(40)) {
        let (sa, sb) = (WeightedSample::from_day_counts(&a).unwrap(), WeightedSample::from_day_counts(&b).unwrap());
        prop_assert_eq!(ks_statistic(&sa, &sb).numerator, ks_statistic(&sb, &sa).numerator);
        for limit in [0, 10_000] {
            prop_assert_eq!(ks_two_sample(&sa, &sb, limit).p_value, ks_two_sample(&sb, &sa, limit).p_value);
        }
    }

    #[test]
    fn ad_pvalue_bounded_and_monotone(t1 in -5.0f64..20.0, t2 in -5.0f64..20.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        for m in [AdInterpolation::QuadraticLogFit, AdInterpolation::PiecewiseLogLinear] {
            let (p_lo, p_hi) = (ad_pvalue(lo, m), ad_pvalue(hi, m));
            prop_assert!((0.001..=0.25).contains(&p_lo) && (0.001..=0.25).contains(&p_hi));
            prop_assert!(p_hi <= p_lo);
        }
    }

    #[test]
    fn day_mean_lies_between_width_extremes(
        focal in proptest::collection::vec(0u64..8, 160),
        base in proptest::collection::vec(0u64..8, 160),
        w_min in 50u32..60,
        span in 0u32..10,
        method in prop_oneof![Just(Method::Ks), Just(Method::Ad)],
    ) {
        let f = series(day(2019, 10, 1), focal);
        let b = series(day(2018, 10, 1), base);
        let cfg = ScanConfig { w_min, w_max: w_min + span, method, test: TestConfig::default() };
        let scan = scan_day(
            SeasonRef { series: &f, year_label: 2020 },
            SeasonRef { series: &b, year_label: 2019 },
            day(2020, 1, 10),
            &cfg,
        ).unwrap();
        let tested: Vec<f64> = scan.p_values.iter().flatten().copied().collect();
        match scan.mean_p {
            None => prop_assert!(tested.is_empty()),
            Some(mean) => {
                let lo = tested.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = tested.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo - 1e-12 <= mean && mean <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn segments_nest_by_alpha(ps in proptest::collection::vec(proptest::option::of(0.0f64..1.0), 1..60), a1 in 0.001f64..0.5, a2 in 0.001f64..0.5) {
        let (small, large) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let dates: Vec<NaiveDate> = positions(day(2019, 12, 15), ps.len() as u32).collect();
        let curve = PValueCurve { dates, p_values: ps, widths_used: (50, 70), method: Method::Ks };
        let strict = extract_anomaly_periods(&curve, small).unwrap();
        let loose = extract_anomaly_periods(&curve, large).unwrap();
        for s in &strict {
            prop_assert!(loose.iter().any(|l| l.start_date <= s.start_date && s.end_date <= l.end_date));
            prop_assert!(s.min_p < small);
        }
        // Disjoint and ordered.
        for w in loose.windows(2) {
            prop_assert!(w[0].end_date < w[1].start_date);
        }
    }

    #[test]
    fn population_scaling_moves_only_the_intercept(
        pts in proptest::collection::vec((1e3f64..1e7, 1.0f64..1e4), 3..40),
        k in 0.01f64..100.0,
    ) {
        prop_assume!(pts.iter().any(|p| (p.0 / pts[0].0 - 1.0).abs() > 1e-6));
        let base = loglog_fit(&pts).unwrap();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x * k, y)).collect();
        let fit = loglog_fit(&scaled).unwrap();
        prop_assert!((fit.slope - base.slope).abs() < 1e-7);
        prop_assert!((fit.r2 - base.r2).abs() < 1e-7);
        prop_assert!((fit.intercept - (base.intercept - base.slope * k.ln())).abs() < 1e-6);
    }

    #[test]
    fn slicing_then_summing_matches_brute_force(
        values in proptest::collection::vec(0u64..100, 1..900),
        offset in prop_oneof![Just(151i64), -30i64..900],
        width in 1u32..120,
    ) {
        let start = day(2015, 10, 1);
        let s = series(start, values.clone());
        let from = start + Duration::days(offset);
        let sliced = slice_positions(&s, from, width);
        // Brute force: walk calendar days, folding 29 February into the day before.
        let mut want = 0u64;
        let mut covered = 0u32;
        // 29 February is not a position of its own; it belongs to 28 February.
        let mut d = if from.month() == 2 && from.day() == 29 { from - Duration::days(1) } else { from };
        while covered < width {
            let idx = (d - start).num_days();
            let at = |i: i64| if (0..values.len() as i64).contains(&i) { values[i as usize] } else { 0 };
            want += at(idx);
            if d.month() == 2 && d.day() == 28 {
                if let Some(leap) = NaiveDate::from_ymd_opt(d.year(), 2, 29) {
                    want += at((leap - start).num_days());
                    d = leap;
                }
            }
            covered += 1;
            d += Duration::days(1);
        }
        prop_assert_eq!(sliced.counts.len(), width as usize);
        prop_assert_eq!(sliced.counts.iter().sum::<u64>(), want);
    }
}

// ---------------------------------------------------------------------------
// filters

#[derive(Debug, Clone)]
struct Corpus {
    messages: Vec<MessageRecord>,
    users: BTreeMap<String, UserProfile>,
}

fn corpus() -> impl Strategy<Value = Corpus> {
    let texts = prop_oneof![
        Just("I have pneumonia again"),
        Just("pneumonia and coronavirus"),
        Just("see https://example.org pneumonia"),
        Just("la Chine et ma pneumonie"),
        Just("www.news.example COVID"),
        Just("fever for days"),
    ];
    let msg = (0usize..8, texts, 0i64..80, prop_oneof![Just(Language::En), Just(Language::Fr)]);
    (proptest::collection::vec(0u64..4000, 8), proptest::collection::vec(msg, 0..60)).prop_map(|(followers, msgs)| {
        let users = followers
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let id = format!("u{i}");
                let u = UserProfile {
                    author_id: id.clone(),
                    followers: f,
                    friends: 0,
                    statuses: 0,
                    location_text: String::new(),
                    coordinates: None,
                };
                (id, u)
            })
            .collect();
        let messages = msgs
            .into_iter()
            .enumerate()
            .map(|(i, (a, text, off, lang))| MessageRecord {
                message_id: i.to_string(),
                author_id: format!("u{a}"),
                posted_at: (day(2019, 12, 1) + Duration::days(off)).and_hms_opt(12, 0, 0).unwrap(),
                text: text.to_string(),
                language: lang,
                keyword_set: "pneumonia".into(),
            })
            .collect();
        Corpus { messages, users }
    })
}

fn ids(ms: &[MessageRecord]) -> Vec<String> {
    ms.iter().map(|m| m.message_id.clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn filters_are_idempotent(c in corpus()) {
        let p = FilterPolicy::default();
        let (once, s1) = apply_filters(&c.messages, &c.users, &p).unwrap();
        let (twice, s2) = apply_filters(&once, &c.users, &p).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(s2.dropped(), 0);
        prop_assert_eq!(s1.input_messages, s1.dropped() + s1.survivors_messages);
    }

    #[test]
    fn stricter_policy_keeps_a_subset(c in corpus(), cap_lo in 1u64..4000, cap_hi in 1u64..4000, kw in any::<bool>(), url in any::<bool>()) {
        let (lo, hi) = if cap_lo <= cap_hi { (cap_lo, cap_hi) } else { (cap_hi, cap_lo) };
        let loose = FilterPolicy { follower_cap: hi, keyword_filter: kw, url_filter: url, ..FilterPolicy::default() };
        let strict = FilterPolicy { follower_cap: lo, keyword_filter: true, url_filter: true, ..FilterPolicy::default() };
        let (kept_loose, _) = apply_filters(&c.messages, &c.users, &loose).unwrap();
        let (kept_strict, _) = apply_filters(&c.messages, &c.users, &strict).unwrap();
        let loose_ids = ids(&kept_loose);
        prop_assert!(ids(&kept_strict).iter().all(|id| loose_ids.contains(id)));
    }

    #[test]
    fn rule_order_changes_attribution_not_survivors(c in corpus(), perm in 0usize..6) {
        let orders = [
            [Rule::Url, Rule::Followers, Rule::Keyword],
            [Rule::Url, Rule::Keyword, Rule::Followers],
            [Rule::Followers, Rule::Url, Rule::Keyword],
            [Rule::Followers, Rule::Keyword, Rule::Url],
            [Rule::Keyword, Rule::Url, Rule::Followers],
            [Rule::Keyword, Rule::Followers, Rule::Url],
        ];
        let base = apply_filters(&c.messages, &c.users, &FilterPolicy::default()).unwrap();
        let p = FilterPolicy { rule_order: orders[perm], ..FilterPolicy::default() };
        let other = apply_filters(&c.messages, &c.users, &p).unwrap();
        prop_assert_eq!(&base.0, &other.0);
        prop_assert_eq!(base.1.dropped(), other.1.dropped());
    }
}

// ---------------------------------------------------------------------------
// ingest

fn raw_records() -> impl Strategy<Value = Vec<RawRecord>> {
    let rec = (0u32..30, 0u32..6, 0i64..40, any::<bool>(), prop_oneof![Just("en"), Just("de"), Just("xx")]);
    proptest::collection::vec(rec, 0..80).prop_map(|rs| {
        rs.into_iter()
            .map(|(id, user, off, good_time, lang)| RawRecord {
                id: Some(id.to_string()),
                user_id: Some(format!("u{user}")),
                created_at: Some(if good_time {
                    format!("{}T08:00:00Z", day(2019, 12, 10) + Duration::days(off))
                } else {
                    "yesterday".into()
                }),
                text: Some(format!("pneumonia {id}")),
                lang: Some(lang.into()),
                keyword_set: Some("pneumonia".into()),
                followers_count: Some(user as u64 * 10),
                ..RawRecord::default()
            })
            .collect()
    })
}

fn ingest(records: &[RawRecord]) -> earlywarn_core::ingest::Archive {
    let mut b = ArchiveBuilder::new(DateRange::new(day(2019, 12, 1), day(2020, 1, 31)).unwrap());
    for r in records {
        b.push(r);
    }
    b.finish(1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ingest_conserves_records(records in raw_records()) {
        let a = ingest(&records);
        let s = &a.stats;
        prop_assert_eq!(s.total_records, records.len() as u64);
        prop_assert_eq!(s.unique_messages + s.duplicates + s.rejected_malformed, s.total_records);
        let r = &s.rejections;
        prop_assert_eq!(r.syntax + r.missing_field + r.bad_timestamp + r.bad_language + r.out_of_range, s.rejected_malformed);
        prop_assert_eq!(a.messages.len() as u64, s.unique_messages);
        prop_assert_eq!(a.users.len() as u64, s.unique_users);
    }

    #[test]
    fn ingest_is_idempotent(records in raw_records()) {
        let a = ingest(&records);
        // Feeding back only the first occurrence of each accepted id.
        let kept: Vec<RawRecord> = a
            .messages
            .iter()
            .map(|m| records.iter().find(|r| r.id.as_deref() == Some(m.message_id.as_str()) && ingest(&[(*r).clone()]).messages.len() == 1).unwrap().clone())
            .collect();
        let b = ingest(&kept);
        prop_assert_eq!(&a.messages, &b.messages);
        prop_assert_eq!(b.stats.duplicates, 0);
    }

    #[test]
    fn ingest_ignores_order_of_distinct_records(records in raw_records(), seed in any::<u64>()) {
        let mut distinct: Vec<RawRecord> = Vec::new();
        for r in records {
            if !distinct.iter().any(|d| d.id == r.id) {
                distinct.push(r);
            }
        }
        let mut shuffled = distinct.clone();
        // Deterministic Fisher-Yates from the seed.
        let mut x = seed | 1;
        for i in (1..shuffled.len()).rev() {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            shuffled.swap(i, (x % (i as u64 + 1)) as usize);
        }
        let (a, b) = (ingest(&distinct), ingest(&shuffled));
        let mut ma = a.messages.clone();
        let mut mb = b.messages.clone();
        ma.sort();
        mb.sort();
        prop_assert_eq!(ma, mb);
        prop_assert_eq!(a.stats, b.stats);
    }
}

// ---------------------------------------------------------------------------
// synth

fn scenario(seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        seed,
        years: vec![2020],
        range: DateRange::new(day(2019, 12, 1), day(2020, 1, 31)).unwrap(),
        keyword_set: "pneumonia".into(),
        base_rate: [(Language::En, 12.0), (Language::It, 5.0)].into_iter().collect(),
        seasonal_amplitude: 0.4,
        surges: vec![],
        noise: Default::default(),
        region_mix: [
            (Language::En, vec![RegionSlot { region: Some("GB-ENG".into()), location: "London".into(), weight: 1 }]),
            (Language::It, vec![RegionSlot { region: None, location: "somewhere".into(), weight: 1 }]),
        ]
        .into_iter()
        .collect(),
        authors_per_slot: 20,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn synth_is_deterministic(seed in any::<u64>()) {
        let (l1, t1) = generate_corpus(&scenario(seed)).unwrap();
        let (l2, t2) = generate_corpus(&scenario(seed)).unwrap();
        prop_assert_eq!(l1, l2);
        prop_assert_eq!(t1, t2);
    }
}
