//! Regenerates `fixtures/calibration.json`: the frozen risk-ratio bands and
//! the testing constant `C_*` checked by the acceptance suite.
//!
//! Run with `cargo run --release --example calibrate`.

#[path = "../tests/common/grids.rs"]
mod grids;

use std::collections::BTreeMap;

use serde_json::json;
use sparse_functionals::harness::risk_sweep;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let started = std::time::Instant::now();
    let mut bands = BTreeMap::new();
    let mut grid = grids::risk_grid();
    grid.extend(grids::unknown_sigma_grid());
    for (id, ratio) in risk_sweep(&grid)?.max_ratios() {
        println!("{id:<40} {ratio:.4}");
        bands.insert(
            id,
            json!({ "measured": ratio, "lo": ratio / 10.0, "hi": ratio * 10.0 }),
        );
    }
    let c_star_ratio = risk_sweep(&[grids::c_star_config()])?.max_ratios()[0].1;
    let c_star = grids::C_STAR_FACTOR * c_star_ratio;
    println!("c_star = {c_star:.4}");

    let doc = json!({
        "seed": grids::SEED,
        "n_reps": grids::RISK_REPS,
        "c_star_ratio": c_star_ratio,
        "c_star": c_star,
        "bands": bands,
    });
    std::fs::write(grids::FIXTURE, serde_json::to_string_pretty(&doc)? + "\n")?;
    eprintln!("wrote {} in {:.1?}", grids::FIXTURE, started.elapsed());
    Ok(())
}
