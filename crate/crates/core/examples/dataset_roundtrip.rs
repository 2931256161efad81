//! Writes a tiny generated dataset to disk, reads it back, and ingests the
//! same frames as if they came from a real sensor.

use tactile_hardness::dataset::{ingest, load_dataset, write_generated};
use tactile_hardness::Config;

fn main() {
    let mut cfg = Config::reference().clone();
    cfg.dataset.hardness_levels = 3;
    cfg.dataset.basic_human_per_level = 2;
    cfg.dataset.bad_contact_per_level = 0;
    cfg.dataset.complex_per_level = 0;
    cfg.dataset.robot_per_level = 1;
    cfg.dataset.complex_holdout_per_level = 0;
    cfg.dataset.simple_shape_per_level = 0;

    let dir = tempfile::tempdir().unwrap();
    let manifest = write_generated(&cfg, dir.path()).unwrap();
    println!("wrote {} sequences under {}", manifest.records.len(), dir.path().display());

    let ds = load_dataset(&dir.path().join("manifest.json")).unwrap();
    for (r, v) in ds.records.iter().zip(&ds.videos) {
        println!("  {:18} {:>6} {:2} frames", r.id, format!("{:?}", r.label.value()), v.len());
    }

    let raw = ingest(&dir.path().join("sequences"), None).unwrap();
    println!("ingested {} unlabelled sequences", raw.records.len());
}
