//! Generates a small dataset in memory, trains a narrow model for a few
//! hundred steps and scores the held-out hardness levels.

use tactile_hardness::dataset::generate_in_memory;
use tactile_hardness::pipeline::contact_threshold;
use tactile_hardness::traineval::{evaluate, make_split, train_from_scratch, SplitMode};
use tactile_hardness::Config;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut cfg = Config::reference().clone();
    cfg.dataset.basic_human_per_level = 6;
    cfg.dataset.bad_contact_per_level = 1;
    cfg.dataset.complex_per_level = 1;
    cfg.dataset.robot_per_level = 1;
    cfg.dataset.complex_holdout_per_level = 0;
    cfg.dataset.simple_shape_per_level = 0;
    cfg.training.iterations = 300;

    let ds = generate_in_memory(&cfg).unwrap();
    let split = make_split(&ds.records, SplitMode::UnseenHardness, &cfg).unwrap();
    let (model, report) = train_from_scratch(&cfg, &ds, &split.train).unwrap();
    let tau = contact_threshold(&cfg.pipeline, cfg.render.noise_sigma);
    let eval = evaluate(&model, &ds, &split.test, tau, "unseen_hardness").unwrap();
    println!(
        "{} parameters, final loss {:.4}",
        model.parameter_count(),
        report.loss_curve.last().unwrap()
    );
    println!("{}", eval.describe());
}
