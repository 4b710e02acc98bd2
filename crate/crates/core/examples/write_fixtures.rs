//! Regenerates the synthetic scenario fixtures.
//!
//! cargo run -p ressim --example write_fixtures -- scenarios/

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "scenarios".into());
    ressim::scenario::fixtures::write_all(&dir)?;
    println!("fixtures written to {}", dir.display());
    Ok(())
}
