//! Regresses quantile-normalised engagement on post affect for synthetic
//! outlet posts and prints the likes model.

use newsaffect::affect::{AffectScorer, AffectVector};
use newsaffect::engage::{r2_grid, run_engagement_suite, FeatureTable, Group, Scheme, Source, SuiteParams, Target};
use newsaffect::synth::{generate, SynthSpec};

fn main() -> newsaffect::Result<()> {
    let (corpus, _) = generate(&SynthSpec {
        n_tweets: 10_000,
        seed: 8,
        ..SynthSpec::default()
    })?;
    let posts: Vec<_> = corpus.outlet_tweets().cloned().collect();
    let scorer = AffectScorer::bundled_test();
    let vectors: Vec<Option<AffectVector>> = scorer.score_all(&posts).into_iter().map(Some).collect();

    let mut table = FeatureTable::new(posts.iter().map(|t| t.id.clone()).collect());
    table.push_affect(Source::Text, &vectors)?;
    table.push_feature("followers", Group::Followers, posts.iter().map(|t| (t.follower_count as f64).ln_1p()).collect())?;
    table.push_target(Target::Replies, posts.iter().map(|t| t.reply_count as f64).collect())?;
    table.push_target(Target::Quotes, posts.iter().map(|t| t.quote_count as f64).collect())?;
    table.push_target(Target::Likes, posts.iter().map(|t| t.like_count as f64).collect())?;
    table.push_target(Target::Retweets, posts.iter().map(|t| t.retweet_count as f64).collect())?;

    let params = SuiteParams::default();
    for scheme in [Scheme::Emotions, Scheme::Morals] {
        let reports = run_engagement_suite(&table, scheme, &params)?;
        let Some(likes) = reports.iter().find(|r| r.target == Target::Likes) else {
            continue;
        };
        println!("{} -> likes: n={} adj R2={:.3}", scheme.name(), likes.n, likes.adj_r2);
        if !likes.dropped_vif.is_empty() {
            println!("  dropped for VIF: {}", likes.dropped_vif.join(", "));
        }
        for c in &likes.coefficients {
            let star = if c.significant { "*" } else { "" };
            println!("  {:<14} {:+.4} (se {:.4}, p {:.2e}){star}", c.feature, c.beta, c.se, c.p);
        }
    }

    let grid = r2_grid(&table, &params)?;
    let mut out = Vec::new();
    grid.write_csv(&mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}
