//! Scores text with the bundled lexicons.
//!
//! ```text
//! cargo run --example score_text -- "Rage over the cruel verdict" "Nurture and protect"
//! echo "one post per line" | cargo run --example score_text -- --sentences
//! ```

use std::io::BufRead;

use newsaffect::affect::{AffectScorer, ScoringMode, AFFECT_DIMS};

fn main() {
    let mut sentences = false;
    let mut texts = Vec::new();
    for a in std::env::args().skip(1) {
        if a == "--sentences" {
            sentences = true;
        } else {
            texts.push(a);
        }
    }
    if texts.is_empty() {
        texts = std::io::stdin().lock().lines().map_while(Result::ok).collect();
    }

    let mode = if sentences { ScoringMode::SentenceMean } else { ScoringMode::Document };
    let scorer = AffectScorer::bundled_test().with_mode(mode);
    for text in &texts {
        let v = scorer.score_text(text);
        println!("{text:?}");
        let nonzero: Vec<String> = AFFECT_DIMS
            .iter()
            .zip(v.dims())
            .filter(|(_, x)| *x != 0.0)
            .map(|(d, x)| format!("{d}={x:.3}"))
            .collect();
        if nonzero.is_empty() {
            println!("  no affect");
        } else {
            println!("  {}", nonzero.join(" "));
        }
        println!("  sentiment={:.3} moral means={:?}", v.sentiment, v.moral_means);
    }
}
