//! Simulates a human press and a robot press on the same textured cylinder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tactile_hardness::mechanics::{IndenterShape, Shore00};
use tactile_hardness::simcam::{human_press_profile, random_texture, robot_press_profile, GroupTag, Simulator};
use tactile_hardness::Config;

fn main() {
    let cfg = Config::reference();
    let sim = Simulator::from_config(cfg).unwrap();
    let texture = random_texture(&mut ChaCha8Rng::seed_from_u64(3), &cfg.texture);
    let shape = IndenterShape::Cylinder {
        radius_mm: 7.0,
        axis_angle_rad: 0.4,
    };
    let hardness = Shore00::new(35.0).unwrap();
    for profile in [human_press_profile(3, &cfg.human), robot_press_profile(3, &cfg.robot)] {
        let seq = sim
            .synth_sequence(&shape, texture.as_ref(), hardness, &profile, GroupTag::Basic)
            .unwrap();
        let series: Vec<String> = seq.intensity_series.iter().map(|v| format!("{v:.3}")).collect();
        println!(
            "{:?}: {} frames, peak force {:.2} N, saturated {}\n  intensity {}",
            profile.kind,
            seq.frames.len(),
            seq.force_n.iter().cloned().fold(0.0, f64::max),
            seq.saturated,
            series.join(" ")
        );
    }
}
