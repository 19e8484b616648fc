mod common;

use common::{load_fixture_records, TallyOracle};
use newsaffect::affect::{virtue_vice, AffectScorer, ScoringMode};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn fixture_matches_token_tally() {
    let records = load_fixture_records("affect_100.jsonl");
    assert_eq!(records.len(), 100);
    let oracle = TallyOracle::bundled();
    let scorer = AffectScorer::bundled_test();
    for (r, v) in records.iter().zip(scorer.score_all(&records)) {
        let t = oracle.tally(&r.text);
        for i in 0..8 {
            assert!(close(v.emotions[i], t.emotions[i]), "{} emotion {i}: {} vs {}", r.id, v.emotions[i], t.emotions[i]);
        }
        assert!(close(v.sentiment, t.sentiment), "{} sentiment", r.id);
        for k in 0..5 {
            assert!(close(v.moral_means[k], t.means[k]), "{} mean {k}", r.id);
            assert!(close(v.virtue[k], t.virtue[k]), "{} virtue {k}", r.id);
            assert!(close(v.vice[k], t.vice[k]), "{} vice {k}", r.id);
        }
    }
}

#[test]
fn fixture_edge_rows() {
    let records = load_fixture_records("affect_100.jsonl");
    let scorer = AffectScorer::bundled_test();
    for id in ["f000", "f001", "f002", "f003", "f004"] {
        let r = records.iter().find(|r| r.id == id).unwrap();
        let v = scorer.score_text(&r.text);
        assert_eq!(v.dims(), [0.0; 18], "{id}");
        assert_eq!(v.moral_means, [5.0; 5]);
        assert_eq!(v.sentiment, 0.0);
    }
    let rage = scorer.score_text("RAGE rage Rage");
    assert_eq!(rage.emotions[0], 1.0);
    assert_eq!(rage.sentiment, -1.0);
    let just = scorer.score_text("justice justice fraud");
    assert!(close(just.moral_means[1], 19.0 / 3.0));
    assert!(close(just.virtue[1], (19.0 / 3.0 - 5.0) / 5.0));
}

#[test]
fn moral_transform_boundaries() {
    let table = [(1.0, 0.8, 0.0), (3.0, 0.4, 0.0), (5.0, 0.0, 0.0), (7.0, 0.0, 0.4), (9.0, 0.0, 0.8)];
    for (m, vice, virtue) in table {
        assert_eq!(virtue_vice(m), (virtue, vice), "m = {m}");
    }
}

fn lexicon_words() -> Vec<&'static str> {
    vec![
        "rage", "fury", "dread", "panic", "happy", "smile", "grief", "weep", "shock", "wow", "honest", "reliable",
        "plan", "soon", "filthy", "vile", "nurture", "cruel", "justice", "fraud", "patriot", "traitor", "obey", "riot",
        "sacred", "defile", "city", "budget", "the", "and", "killed", "feared", "hopes",
    ]
}

proptest! {
    #[test]
    fn arbitrary_word_mixes_match_tally(idx in prop::collection::vec(0usize..33, 0..60)) {
        let words = lexicon_words();
        let text: Vec<&str> = idx.iter().map(|&i| words[i]).collect();
        let text = text.join(" ");
        let v = AffectScorer::bundled_test().score_text(&text);
        let t = TallyOracle::bundled().tally(&text);
        for i in 0..8 {
            prop_assert!(close(v.emotions[i], t.emotions[i]));
        }
        prop_assert!(close(v.sentiment, t.sentiment));
        for k in 0..5 {
            prop_assert!(close(v.virtue[k], t.virtue[k]) && close(v.vice[k], t.vice[k]));
        }
    }

    #[test]
    fn scores_stay_in_range(idx in prop::collection::vec(0usize..33, 0..60)) {
        let words = lexicon_words();
        let text = idx.iter().map(|&i| words[i]).collect::<Vec<_>>().join(" ");
        let v = AffectScorer::bundled_test().score_text(&text);
        prop_assert!(v.emotions.iter().all(|e| (0.0..=1.0).contains(e)));
        prop_assert!((-1.0..=1.0).contains(&v.sentiment));
        for k in 0..5 {
            prop_assert!(v.virtue[k] * v.vice[k] == 0.0);
            prop_assert!((0.0..=0.8).contains(&v.virtue[k]) && (0.0..=0.8).contains(&v.vice[k]));
        }
    }

    #[test]
    fn repeating_a_document_leaves_scores_unchanged(idx in prop::collection::vec(0usize..33, 1..30)) {
        let words = lexicon_words();
        let text = idx.iter().map(|&i| words[i]).collect::<Vec<_>>().join(" ");
        let s = AffectScorer::bundled_test();
        let once = s.score_text(&text);
        let twice = s.score_text(&format!("{text} {text}"));
        for (a, b) in once.dims().iter().zip(twice.dims()) {
            prop_assert!(close(*a, b));
        }
    }

    #[test]
    fn sentence_mode_on_one_sentence_equals_document_mode(idx in prop::collection::vec(0usize..33, 1..30)) {
        let words = lexicon_words();
        let text = idx.iter().map(|&i| words[i]).collect::<Vec<_>>().join(" ");
        let doc = AffectScorer::bundled_test().score_text(&text);
        let sent = AffectScorer::bundled_test().with_mode(ScoringMode::SentenceMean).score_text(&text);
        for (a, b) in doc.dims().iter().zip(sent.dims()) {
            prop_assert!(close(*a, b));
        }
    }
}
