//! Trains lasso area classifiers on hashtag-labelled posts and extends the
//! labels to every post.
//!
//! ```text
//! cargo run --release --example label_propagation -- [n_posts]
//! ```

use std::collections::BTreeMap;

use newsaffect::corpus::TweetRecord;
use newsaffect::synth::{generate, SynthSpec};
use newsaffect::textprep::{build_vocab, preprocess_with, to_bow, HashtagPolicy, TextResources, TokenizedDoc};
use newsaffect::themes::classify::area_targets;
use newsaffect::themes::{propagate_labels, train_area_classifiers, ClassifierParams};

fn main() -> newsaffect::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(6000);
    let spec = SynthSpec {
        n_tweets: n,
        seed: 5,
        ..SynthSpec::default()
    };
    let (corpus, _) = generate(&spec)?;

    // tag to area straight from the generator's pools
    let tag_areas: BTreeMap<String, String> = spec
        .areas
        .iter()
        .flat_map(|a| a.tags.iter().map(move |t| (t.clone(), a.name.clone())))
        .collect();
    let areas: Vec<String> = spec.areas.iter().map(|a| a.name.clone()).collect();

    let posts: Vec<&TweetRecord> = corpus.tweets().iter().filter(|t| t.reply_to.is_none()).collect();
    let res = TextResources::english();
    let docs: Vec<TokenizedDoc> = posts.iter().map(|t| preprocess_with(&t.text, &res, HashtagPolicy::Drop)).collect();
    let is_train: Vec<bool> = posts.iter().map(|t| t.hashtags.iter().any(|h| tag_areas.contains_key(h))).collect();
    let split = |want: bool| -> Vec<TokenizedDoc> {
        docs.iter().zip(&is_train).filter(|(_, &t)| t == want).map(|(d, _)| d.clone()).collect()
    };
    let (vocab, stats) = build_vocab(&split(true), &split(false), 20, 20)?;
    println!(
        "{} posts, {} with area hashtags, vocabulary {} ({:.1}% of volume)",
        posts.len(),
        is_train.iter().filter(|&&t| t).count(),
        vocab.len(),
        100.0 * stats.retained_volume
    );

    let rows: Vec<_> = docs.iter().map(|d| to_bow(d, &vocab)).collect();
    let train_posts: Vec<&TweetRecord> = posts.iter().zip(&is_train).filter(|(_, &t)| t).map(|(p, _)| *p).collect();
    let train_rows: Vec<_> = rows.iter().zip(&is_train).filter(|(_, &t)| t).map(|(r, _)| r.clone()).collect();
    let targets = area_targets(&train_posts, &tag_areas, &areas);
    let params = ClassifierParams {
        min_positives: 20,
        seed: 5,
        ..ClassifierParams::default()
    };
    let classifiers = train_area_classifiers(&train_rows, vocab.len(), &targets, params)?;
    println!("area            positives  lambda     cv precision  cv f1  nonzero");
    for c in &classifiers {
        println!(
            "{:<15} {:<10} {:<10.3e} {:<13.3} {:<6.3} {}",
            c.area,
            c.n_positive,
            c.lambda,
            c.cv.mean_precision(),
            c.cv.mean_f1(),
            c.weights.iter().filter(|w| **w != 0.0).count()
        );
    }

    let ids: Vec<String> = posts.iter().map(|t| t.id.clone()).collect();
    let labels = propagate_labels(&classifiers, &ids, &rows);
    let outlets: BTreeMap<String, String> = posts
        .iter()
        .filter_map(|t| t.outlet.as_ref().map(|o| (t.id.clone(), o.clone())))
        .collect();
    println!("coverage (% of outlet posts) for {}", labels.areas.join(", "));
    for (outlet, row) in labels.coverage(&outlets) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:5.1}")).collect();
        println!("{outlet:<12} {}", cells.join(" "));
    }
    Ok(())
}
