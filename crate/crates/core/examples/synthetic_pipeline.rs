//! Runs every stage on a synthetic corpus, using the generator's tag pools
//! as the cluster merge map.
//!
//! ```text
//! cargo run --release --example synthetic_pipeline -- [workdir] [n_posts]
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use newsaffect::pipeline::{run, Command, RunOptions};
use newsaffect::synth::SynthSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("newsaffect-demo"));
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20_000);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("spec.toml"), format!("n_tweets = {n}\nseed = 1\n"))?;
    fs::write(
        dir.join("config.toml"),
        r#"seed = 1
output = "out"
[paths]
corpus = "out/synth/corpus.jsonl"
merge_map = "merge.tsv"
[synth]
spec = "spec.toml"
[themes]
min_authors = 5
k_max = 15
vocab_train_min = 20
vocab_rest_min = 20
"#,
    )?;
    let _ = fs::remove_file(dir.join("merge.tsv"));
    let opts = RunOptions {
        config: Some(dir.join("config.toml")),
        ..RunOptions::default()
    };
    let stage = |c: Command| -> newsaffect::Result<()> {
        let s = run(c, &opts)?;
        let notes: Vec<String> = s.summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{:<8} {}", c.name(), notes.join(" "));
        Ok(())
    };

    stage(Command::Synth)?;
    stage(Command::Score)?;
    stage(Command::Themes)?;
    write_merge_map(&dir)?;
    stage(Command::Themes)?;
    stage(Command::Factors)?;
    stage(Command::Regress)?;
    stage(Command::Report)?;
    println!("outputs in {}", dir.join("out").display());
    Ok(())
}

/// Majority planted area per cluster.
fn write_merge_map(dir: &std::path::Path) -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec::load(&dir.join("out/synth/spec.toml"))?;
    let pool: BTreeMap<&str, &str> = spec
        .areas
        .iter()
        .flat_map(|a| a.tags.iter().map(move |t| (t.as_str(), a.name.as_str())))
        .collect();
    let mut votes: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
    let mut reader = csv::Reader::from_path(dir.join("out/themes/clusters.csv"))?;
    for row in reader.records() {
        let row = row?;
        if let Some(area) = pool.get(&row[2]) {
            *votes.entry(row[0].parse()?).or_default().entry(area).or_default() += 1;
        }
    }
    let mut text = String::new();
    for (c, v) in votes {
        if let Some((area, _)) = v.into_iter().max_by_key(|&(a, n)| (n, std::cmp::Reverse(a))) {
            text.push_str(&format!("{c}\t{area}\n"));
        }
    }
    fs::write(dir.join("merge.tsv"), text)?;
    Ok(())
}
