//! Writes synthetic records in the KDD Cup 99 format.
//!
//! ```text
//! cargo run --example synthetic_data -- records.txt [scale] [seed]
//! cargo run --bin alnid -- report --data records.txt --out run
//! ```

use alnid::synthetic::{generate_text, SyntheticConfig};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "synthetic_kdd.txt".into());
    let mut cfg = SyntheticConfig::default();
    if let Some(s) = args.next() {
        cfg.scale = s.parse().expect("scale is a number");
    }
    if let Some(s) = args.next() {
        cfg.seed = s.parse().expect("seed is an integer");
    }
    let text = generate_text(&cfg);
    std::fs::write(&path, &text)?;
    println!("wrote {} records to {path}", text.lines().count());
    Ok(())
}
