//! Builds reply trees under outlet posts and averages reply sentiment.

use newsaffect::affect::{conversation_sentiment, AffectScorer, ReplyScope};
use newsaffect::corpus::{avg_conversation_size, build_conversations, outlet_roots, parse_jsonl};

const POSTS: &str = r#"{"id":"1","author":"herald","outlet":"herald","timestamp":1600000000,"text":"Council approves the new budget"}
{"id":"2","author":"ana","timestamp":1600000100,"text":"happy news, finally","reply_to":"1"}
{"id":"3","author":"ben","timestamp":1600000200,"text":"this is a fraud and a disgrace","reply_to":"1"}
{"id":"4","author":"ana","timestamp":1600000300,"text":"what fraud? smile a little","reply_to":"3"}
{"id":"5","author":"times","outlet":"times","timestamp":1600001000,"text":"Storm warning for the coast"}
{"id":"6","author":"cy","timestamp":1600001100,"text":"panic and dread here","reply_to":"5"}
{"id":"7","author":"dee","timestamp":1600001200,"text":"replying to a deleted post","reply_to":"99"}
"#;

fn main() -> newsaffect::Result<()> {
    let corpus = parse_jsonl(POSTS.as_bytes())?.corpus;
    let conv = build_conversations(&corpus, &outlet_roots(&corpus))?;
    let scorer = AffectScorer::bundled_test();

    println!("root outlet size whole_tree direct");
    for t in &conv.trees {
        let whole = conversation_sentiment(t, &corpus, &scorer, ReplyScope::WholeTree);
        let direct = conversation_sentiment(t, &corpus, &scorer, ReplyScope::DirectOnly);
        println!("{:<4} {:<6} {:<4} {:<10} {}", t.root, t.outlet, t.size(), fmt(whole), fmt(direct));
    }
    println!("dangling replies: {:?}", conv.dangling);
    for (outlet, s) in avg_conversation_size(&conv.trees) {
        println!("{outlet}: {s:?}");
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:+.3}")).unwrap_or_else(|| "-".into())
}
