use proptest::prelude::*;
use smilekit_core::features::{read_features_csv, smile_features, write_features_csv, Feature};
use smilekit_core::ingest::{
    normalize_speech, parse_frame_table, parse_score_table, parse_speech_intervals, write_frame_table,
    write_score_table, write_speech_intervals,
};
use smilekit_core::segmentation::{initial_radius, r_value, remove_speech_confounded, segment_smiles};
use smilekit_core::stats::{anova_oneway, pearson_r, welch_t};
use smilekit_core::synthgen::{feature_corpus, generate_session, FeatureCorpusSpec};
use smilekit_core::{
    LandmarkConfig, Point, ScaleKind, ScoreTable, ScoreTableRow, SegmentationConfig, SessionInfo, Smile,
    SpeechInterval, SynthSpec, VisitMonth,
};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn coord() -> impl Strategy<Value = f64> {
    0.0..640.0f64
}

fn sample(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

fn intervals() -> impl Strategy<Value = Vec<SpeechInterval>> {
    prop::collection::vec((0.0..60.0f64, 0.0..2.0f64), 0..20)
        .prop_map(|v| v.into_iter().map(|(s, d)| SpeechInterval { start: s, end: s + d }).collect())
}

fn smiles_of(seed: u64) -> Vec<Smile> {
    let spec = SynthSpec {
        session_duration: 40.0,
        ..SynthSpec::default().clean()
    };
    let s = generate_session(&spec, "m1", VisitMonth::Six, seed).unwrap();
    segment_smiles(&s.series, &SegmentationConfig::default()).unwrap()
}

fn retime(s: &Smile, shift: f64, scale: f64) -> Smile {
    let t = |x: f64| x * scale + shift;
    Smile {
        onset_start: t(s.onset_start),
        onset_end: t(s.onset_end),
        offset_start: t(s.offset_start),
        offset_end: t(s.offset_end),
        r_trace: s.r_trace.iter().map(|&(ts, r)| (t(ts), r)).collect(),
        ..s.clone()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn r_ignores_translation_and_scale(
        n in (coord(), coord()), rt in (coord(), coord()), l in (coord(), coord()),
        d in (-200.0..200.0f64, -200.0..200.0f64), k in 0.2..5.0f64,
    ) {
        let (n, rt, l) = (Point::new(n.0, n.1), Point::new(rt.0, rt.1), Point::new(l.0, l.1));
        prop_assume!(rt.sub(l).norm() > 10.0);
        let r = |n: Point, rt: Point, l: Point| r_value(rt.sub(n), initial_radius(rt.sub(n), l.sub(n)).unwrap()).unwrap();
        let base = r(n, rt, l);
        let tr = |p: Point| Point::new(p.x + d.0, p.y + d.1);
        let sc = |p: Point| Point::new(k * p.x, k * p.y);
        prop_assert!(close(r(tr(n), tr(rt), tr(l)), base, 1e-12));
        prop_assert!(close(r(sc(n), sc(rt), sc(l)), base, 1e-12));
    }

    #[test]
    fn normalized_speech_is_sorted_disjoint_and_long(v in intervals()) {
        let out = normalize_speech(v.clone());
        for w in out.windows(2) {
            prop_assert!(w[0].end < w[1].start);
        }
        prop_assert!(out.iter().all(|s| s.duration() > 0.010));
        // Every long input interval stays covered, and normalizing is idempotent.
        for s in &v {
            if s.duration() > 0.010 + 1e-9 {
                prop_assert!(out.iter().any(|o| o.start <= s.start && s.end <= o.end));
            }
        }
        prop_assert_eq!(normalize_speech(out.clone()), out);
    }

    #[test]
    fn more_speech_never_keeps_more_smiles(seed in 0u64..50, a in intervals(), b in intervals()) {
        let smiles = smiles_of(seed);
        let a = normalize_speech(a);
        let ab = normalize_speech(a.iter().chain(&b).copied().collect());
        let (kept_a, _) = remove_speech_confounded(smiles.clone(), &a);
        let (kept_ab, removed) = remove_speech_confounded(smiles.clone(), &ab);
        prop_assert_eq!(kept_ab.len() + removed, smiles.len());
        prop_assert!(kept_ab.iter().all(|s| kept_a.iter().any(|k| k.onset_start == s.onset_start)));
        prop_assert!(kept_ab.iter().enumerate().all(|(i, s)| s.ordinal == i as u32 + 1));
    }

    #[test]
    fn features_follow_time_shift_and_scale(seed in 0u64..50, shift in -100.0..100.0f64, scale in 0.25..4.0f64) {
        for s in smiles_of(seed) {
            let base = smile_features(&s).unwrap();
            let shifted = smile_features(&retime(&s, shift, 1.0)).unwrap();
            let scaled = smile_features(&retime(&s, 0.0, scale)).unwrap();
            for f in Feature::ALL {
                prop_assert!(close(shifted.get(f), base.get(f), 1e-9), "{f:?} under shift");
                let want = match f {
                    Feature::MaxOnsetSpeed | Feature::MaxOffsetSpeed => base.get(f) / scale,
                    Feature::OnsetAmplitude | Feature::OffsetAmplitude => base.get(f),
                    _ => base.get(f) * scale,
                };
                prop_assert!(close(scaled.get(f), want, 1e-9), "{f:?} under scale");
            }
        }
    }

    #[test]
    fn welch_is_location_and_scale_free(a in sample(2..20), b in sample(2..20), c in -50.0..50.0f64, k in 0.1..10.0f64) {
        let base = welch_t(&a, &b).unwrap();
        let tf = |v: &[f64]| v.iter().map(|x| k * x + c).collect::<Vec<_>>();
        let moved = welch_t(&tf(&a), &tf(&b)).unwrap();
        prop_assert!(close(moved.t, base.t, 1e-8) && close(moved.p, base.p, 1e-8) && close(moved.d, base.d, 1e-8));
        let swapped = welch_t(&b, &a).unwrap();
        prop_assert!(close(swapped.t, -base.t, 1e-12) && close(swapped.p, base.p, 1e-12));
        prop_assert!((0.0..=1.0).contains(&base.p));
    }

    #[test]
    fn anova_is_location_and_scale_free(groups in prop::collection::vec(sample(2..8), 2..5), c in -50.0..50.0f64, k in 0.1..10.0f64) {
        let base = anova_oneway(&groups).unwrap();
        let moved: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|x| k * x + c).collect()).collect();
        let m = anova_oneway(&moved).unwrap();
        prop_assert!(close(m.f, base.f, 1e-8) && close(m.p, base.p, 1e-8));
        prop_assert!(close(m.partial_eta2, base.partial_eta2, 1e-8));
        prop_assert!((0.0..=1.0).contains(&base.partial_eta2));
    }

    #[test]
    fn pearson_is_affine_invariant(xy in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..30), c in -50.0..50.0f64, k in 0.1..10.0f64) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let base = pearson_r(&x, &y).unwrap();
        let kx: Vec<f64> = x.iter().map(|v| k * v + c).collect();
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert!(close(pearson_r(&kx, &y).unwrap(), base, 1e-9));
        prop_assert!(close(pearson_r(&x, &neg).unwrap(), -base, 1e-12));
        prop_assert!(close(pearson_r(&y, &x).unwrap(), base, 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tables_survive_a_write_parse_round_trip(seed in any::<u64>()) {
        let spec = SynthSpec { session_duration: 20.0, ..SynthSpec::default() };
        let s = generate_session(&spec, "m7", VisitMonth::Twelve, seed).unwrap();
        let mut buf = Vec::new();
        write_frame_table(&s.series, &mut buf).unwrap();
        let info = SessionInfo::new("m7", VisitMonth::Twelve, s.series.fps_nominal);
        let back = parse_frame_table(buf.as_slice(), &LandmarkConfig::default(), info).unwrap();
        prop_assert_eq!(back, s.series);

        let mut buf = Vec::new();
        write_speech_intervals(&s.speech, &mut buf).unwrap();
        prop_assert_eq!(parse_speech_intervals(buf.as_slice()).unwrap(), normalize_speech(s.speech.clone()));

        let mut scores = ScoreTable { columns: ScaleKind::ALL.to_vec(), ..Default::default() };
        let mut row = ScoreTableRow::new("m7", VisitMonth::Twelve);
        for (i, k) in ScaleKind::ALL.into_iter().enumerate() {
            row.set(k, (seed as i64 >> (i * 3)).rem_euclid(k.range().1 + 1)).unwrap();
        }
        scores.insert(row).unwrap();
        let mut buf = Vec::new();
        write_score_table(&scores, &mut buf).unwrap();
        prop_assert_eq!(parse_score_table(buf.as_slice()).unwrap(), scores);

        let (tables, _) = feature_corpus(&FeatureCorpusSpec { mothers: 3, ..Default::default() }, seed).unwrap();
        let mut buf = Vec::new();
        write_features_csv(&tables, &mut buf).unwrap();
        let nonempty: Vec<_> = tables.into_iter().filter(|t| t.count() > 0).collect();
        prop_assert_eq!(read_features_csv(buf.as_slice()).unwrap(), nonempty);
    }
}
