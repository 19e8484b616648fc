//! Embeds hashtags, clusters them with consensus K-means and compares the
//! clusters with the planted tag pools.
//!
//! ```text
//! cargo run --release --example hashtag_themes -- [n_posts] [seed]
//! ```

use std::collections::BTreeMap;

use newsaffect::synth::{generate, SynthSpec};
use newsaffect::themes::{
    consensus_cluster, select_hashtags, train_embedding, ConsensusParams, EmbeddingParams, HashtagFilter,
};

fn main() -> newsaffect::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(4000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);

    let spec = SynthSpec {
        n_tweets: n,
        n_days: 10,
        seed,
        ..SynthSpec::default()
    };
    let (corpus, _) = generate(&spec)?;
    let filter = HashtagFilter {
        min_per_day: 0.5,
        min_authors: 5,
    };
    let eligible = select_hashtags(&corpus, filter)?;
    println!("{} posts, {} eligible hashtags", corpus.len(), eligible.len());

    let emb = train_embedding(&corpus, &eligible, EmbeddingParams { seed, ..EmbeddingParams::default() })?;
    let model = consensus_cluster(
        &emb,
        ConsensusParams {
            k_max: 12,
            runs: 20,
            seed,
            ..ConsensusParams::default()
        },
    )?;
    for (k, pac) in model.pac_curve() {
        let mark = if k == model.chosen_k { " <" } else { "" };
        println!("K={k:<3} PAC={pac:.4}{mark}");
    }

    let pool: BTreeMap<&str, &str> = spec
        .areas
        .iter()
        .flat_map(|a| a.tags.iter().map(move |t| (t.as_str(), a.name.as_str())))
        .collect();
    let mut clusters: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (tag, c) in model.tags.iter().zip(&model.partition) {
        clusters.entry(*c).or_default().push(tag);
    }
    for (c, tags) in clusters {
        let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &tags {
            *votes.entry(pool.get(t).copied().unwrap_or("?")).or_default() += 1;
        }
        let (area, hits) = votes.iter().max_by_key(|(_, n)| **n).map(|(a, n)| (*a, *n)).unwrap_or(("?", 0));
        println!("cluster {c}: {} tags, {hits} from {area}: {}", tags.len(), tags.iter().take(6).copied().collect::<Vec<_>>().join(" "));
    }
    Ok(())
}
