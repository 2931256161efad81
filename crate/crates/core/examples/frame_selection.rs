//! Picks the five network frames from a simulated press and lists the
//! truncated endpoints used for augmentation.

use tactile_hardness::mechanics::{IndenterShape, Shore00};
use tactile_hardness::pipeline::{contact_threshold, select_clip, truncate_endpoints};
use tactile_hardness::simcam::{human_press_profile, GroupTag, Simulator};
use tactile_hardness::Config;

fn main() {
    let cfg = Config::reference();
    let sim = Simulator::from_config(cfg).unwrap();
    let seq = sim
        .synth_sequence(
            &IndenterShape::Sphere { radius_mm: 14.0 },
            None,
            Shore00::new(50.0).unwrap(),
            &human_press_profile(9, &cfg.human),
            GroupTag::Basic,
        )
        .unwrap();
    let tau = contact_threshold(&cfg.pipeline, cfg.render.noise_sigma);
    let clip = select_clip(&seq, tau).expect("the press makes contact");
    println!("tau = {tau:.3}");
    println!("selected frames {:?} of {}", clip.source_indices, seq.frames.len());
    for &i in &clip.source_indices {
        println!("  frame {i:2}: intensity {:.4}", seq.intensity_series[i]);
    }
    let ends: Vec<usize> = truncate_endpoints(&seq.intensity_series, tau).into_iter().map(|(_, e)| e).collect();
    println!("{} augmentation endpoints: {ends:?}", ends.len());
}
