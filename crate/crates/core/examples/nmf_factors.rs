//! Recovers planted affect factors with NMF and the elbow rule.
//!
//! ```text
//! cargo run --release --example nmf_factors -- [n_posts] [noise_sd]
//! ```

use std::time::Instant;

use newsaffect::affect::AFFECT_DIMS;
use newsaffect::factors::{select_k, NmfParams};
use newsaffect::synth::{planted_affect_matrix, SynthSpec};

fn main() -> newsaffect::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(5000);
    let sigma: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.01);

    let spec = SynthSpec::default();
    let h0 = spec.h0()?;
    let (x, _) = planted_affect_matrix(n, &h0, spec.concentration, sigma, 1)?;

    let start = Instant::now();
    let ks: Vec<usize> = (1..=AFFECT_DIMS.len()).collect();
    let (sel, models) = select_k(&x, &ks, NmfParams::default())?;
    println!("K   ev        iterations");
    for m in &models {
        println!("{:<3} {:.6}  {}", m.k, m.explained_variance, m.iterations);
    }
    println!("elbow at K = {} ({:.1?})", sel.chosen, start.elapsed());

    let model = models.iter().find(|m| m.k == sel.chosen).expect("chosen model");
    for c in 0..model.k {
        let mut top: Vec<(f64, &str)> = (0..AFFECT_DIMS.len()).map(|j| (model.h[(c, j)], AFFECT_DIMS[j])).collect();
        top.sort_by(|a, b| b.0.total_cmp(&a.0));
        let names: Vec<String> = top.iter().take(4).map(|(v, d)| format!("{d} {v:.2}")).collect();
        println!("NMF{}: {}", c + 1, names.join(", "));
    }
    Ok(())
}
