//! Regenerates `tests/fixtures/pyramids/`: 20 synthetic age pyramids as
//! histogram CSVs plus an input manifest listing them.
//!
//!     cargo run -p wgpca --example make_pyramid_fixture [out_dir]

use std::path::PathBuf;

use wgpca::ingest::{
    histogram_csv, synthetic_pyramids, write_atomic, InputManifest, InputRecord, InputSource,
};

fn main() -> wgpca::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pyramids")
        });
    let pyramids = synthetic_pyramids(20, 100.0, 2024)?;
    let mut records = Vec::new();
    for (label, h) in &pyramids {
        let file = format!("{label}.csv");
        write_atomic(&out.join(&file), &histogram_csv(h)?)?;
        records.push(InputRecord {
            label: label.clone(),
            source: InputSource::Histogram { path: file.into() },
        });
    }
    let manifest = InputManifest {
        records,
        cap: Some(100.0),
    };
    write_atomic(
        &out.join("manifest.json"),
        &serde_json::to_vec_pretty(&manifest)?,
    )?;
    println!("wrote {} records to {}", pyramids.len(), out.display());
    Ok(())
}
