//! Prints a synthetic ranking dataset in raw `label<TAB>left<TAB>right` form.
//!
//! Usage: `cargo run --example synthetic -- [queries] [seed] > raw.tsv`

use textmatch::synthetic::{generate, to_raw_text, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut cfg = SyntheticConfig::default();
    if let Some(q) = args.next() {
        cfg.queries = q.parse()?;
    }
    if let Some(s) = args.next() {
        cfg.seed = s.parse()?;
    }
    print!("{}", to_raw_text(&generate(&cfg)?));
    Ok(())
}
