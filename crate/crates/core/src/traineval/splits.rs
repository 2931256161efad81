//! Train/test partitions.
//!
//! Only labelled, human-pressed basic, bad-contact and training-ridge
//! sequences are ever trained on. Robot presses, held-out ridges and vessel
//! shapes are test-only.

use serde::Serialize;

use crate::config::Config;
use crate::dataset::{Label, SequenceRecord};
use crate::simcam::{GroupTag, ProfileKind};

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Seen shapes, every `stride`-th hardness level held out.
    UnseenHardness,
    /// Sphere and cylinder radii held out.
    UnseenShape,
    /// Train on human presses, test on robot presses.
    RobotProfile,
}

impl SplitMode {
    pub const ALL: [SplitMode; 3] = [SplitMode::UnseenHardness, SplitMode::UnseenShape, SplitMode::RobotProfile];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::UnseenHardness => "unseen_hardness",
            SplitMode::UnseenShape => "unseen_shape",
            SplitMode::RobotProfile => "robot_profile",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

struct Rules<'a> {
    cfg: &'a Config,
    held_radii: Vec<f64>,
}

impl<'a> Rules<'a> {
    fn new(cfg: &'a Config) -> Self {
        let radii = &cfg.dataset.radii_mm;
        let held_radii = cfg
            .splits
            .holdout_radius_indices
            .iter()
            .filter_map(|&i| radii.get(i).copied())
            .collect();
        Rules { cfg, held_radii }
    }

    fn held_level(&self, r: &SequenceRecord) -> bool {
        let s = &self.cfg.splits;
        r.level_index
            .is_some_and(|l| l % s.holdout_level_stride == s.holdout_level_offset % s.holdout_level_stride)
    }

    fn held_radius(&self, r: &SequenceRecord) -> bool {
        let Some(shape) = &r.shape else { return false };
        matches!(shape.family.as_str(), "sphere" | "cylinder")
            && shape.radius_mm.is_some_and(|rad| self.held_radii.contains(&rad))
    }

    fn labelled(r: &SequenceRecord) -> bool {
        r.label != Label::Unknown
    }

    fn human(r: &SequenceRecord) -> bool {
        r.profile == Some(ProfileKind::Human)
    }

    fn trainable(&self, r: &SequenceRecord) -> bool {
        let ridged_train = r.group == Some(GroupTag::ComplexShape) && r.shape.as_ref().is_some_and(|s| s.tag == "ridged");
        Self::labelled(r)
            && Self::human(r)
            && (matches!(r.group, Some(GroupTag::Basic | GroupTag::BadContact)) || ridged_train)
    }

    fn basic(r: &SequenceRecord, kind: ProfileKind) -> bool {
        Self::labelled(r) && r.group == Some(GroupTag::Basic) && r.profile == Some(kind)
    }
}

fn pick(records: &[SequenceRecord], keep: impl Fn(&SequenceRecord) -> bool) -> Vec<usize> {
    records.iter().enumerate().filter(|(_, r)| keep(r)).map(|(i, _)| i).collect()
}

fn nonempty(name: &str, v: Vec<usize>) -> Result<Vec<usize>, TrainError> {
    if v.is_empty() {
        Err(TrainError::EmptySplit(name.to_string()))
    } else {
        Ok(v)
    }
}

/// One of the three standalone evaluations.
pub fn make_split(records: &[SequenceRecord], mode: SplitMode, cfg: &Config) -> Result<Split, TrainError> {
    let rules = Rules::new(cfg);
    let (train, test) = match mode {
        SplitMode::UnseenHardness => (
            pick(records, |r| rules.trainable(r) && !rules.held_level(r)),
            pick(records, |r| Rules::basic(r, ProfileKind::Human) && rules.held_level(r)),
        ),
        SplitMode::UnseenShape => (
            pick(records, |r| rules.trainable(r) && !rules.held_radius(r)),
            pick(records, |r| Rules::basic(r, ProfileKind::Human) && rules.held_radius(r)),
        ),
        SplitMode::RobotProfile => (
            pick(records, |r| rules.trainable(r)),
            pick(records, |r| Rules::basic(r, ProfileKind::Robot)),
        ),
    };
    Ok(Split {
        train: nonempty(&format!("{} train", mode.as_str()), train)?,
        test: nonempty(&format!("{} test", mode.as_str()), test)?,
    })
}

/// A single training set that excludes both held-out levels and held-out
/// radii, so one trained model serves every test set.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub train: Vec<usize>,
    /// Seen shapes at held-out levels.
    pub unseen_hardness: Vec<usize>,
    /// Held-out radii at every level.
    pub unseen_shape: Vec<usize>,
    /// Robot presses on seen shapes at every level.
    pub robot: Vec<usize>,
    /// Ridged surfaces sharper than any trained on.
    pub complex_holdout: Vec<usize>,
    /// Vessel-like shapes; may be empty.
    pub simple_shapes: Vec<usize>,
}

pub fn combined_protocol(records: &[SequenceRecord], cfg: &Config) -> Result<Protocol, TrainError> {
    let rules = Rules::new(cfg);
    let holdout_ridge = |r: &SequenceRecord| {
        Rules::labelled(r) && r.shape.as_ref().is_some_and(|s| s.tag == "ridged_holdout")
    };
    Ok(Protocol {
        train: nonempty(
            "train",
            pick(records, |r| rules.trainable(r) && !rules.held_level(r) && !rules.held_radius(r)),
        )?,
        unseen_hardness: nonempty(
            "unseen_hardness",
            pick(records, |r| {
                Rules::basic(r, ProfileKind::Human) && rules.held_level(r) && !rules.held_radius(r)
            }),
        )?,
        unseen_shape: nonempty(
            "unseen_shape",
            pick(records, |r| Rules::basic(r, ProfileKind::Human) && rules.held_radius(r)),
        )?,
        robot: nonempty(
            "robot",
            pick(records, |r| Rules::basic(r, ProfileKind::Robot) && !rules.held_radius(r)),
        )?,
        complex_holdout: nonempty("complex_holdout", pick(records, holdout_ridge))?,
        simple_shapes: pick(records, |r| Rules::labelled(r) && r.group == Some(GroupTag::SimpleShape)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::plan_dataset;
    use crate::dataset::{PlannedShape, ShapeInfo};
    use std::collections::HashSet;

    /// Records with the metadata of the reference plan, without rendering.
    fn planned_records() -> Vec<SequenceRecord> {
        plan_dataset(Config::reference())
            .into_iter()
            .map(|p| {
                let shape = match &p.shape {
                    PlannedShape::Given(s) => ShapeInfo {
                        family: s.family().into(),
                        tag: s.tag(),
                        radius_mm: s.radius_mm(),
                    },
                    PlannedShape::Ridged { holdout } => ShapeInfo {
                        family: "height_field".into(),
                        tag: if *holdout { "ridged_holdout" } else { "ridged" }.into(),
                        radius_mm: None,
                    },
                    PlannedShape::Vessel => ShapeInfo {
                        family: "height_field".into(),
                        tag: "vessel".into(),
                        radius_mm: None,
                    },
                };
                SequenceRecord {
                    id: p.id,
                    frames_dir: String::new(),
                    frames: Vec::new(),
                    label: Label::Known(p.hardness),
                    group: Some(p.group),
                    profile: Some(p.kind),
                    shape: Some(shape),
                    level_index: Some(p.level_index),
                    seed: Some(p.seed),
                    saturated: false,
                }
            })
            .collect()
    }

    fn levels(records: &[SequenceRecord], idx: &[usize]) -> HashSet<usize> {
        idx.iter().filter_map(|&i| records[i].level_index).collect()
    }

    #[test]
    fn unseen_hardness_holds_out_four_of_sixteen_levels() {
        let recs = planned_records();
        let s = make_split(&recs, SplitMode::UnseenHardness, Config::reference()).unwrap();
        let (train, test) = (levels(&recs, &s.train), levels(&recs, &s.test));
        assert_eq!(train.len(), 12);
        assert_eq!(test.len(), 4);
        assert!(train.is_disjoint(&test));
    }

    #[test]
    fn unseen_shape_pairs_are_disjoint() {
        let recs = planned_records();
        let s = make_split(&recs, SplitMode::UnseenShape, Config::reference()).unwrap();
        let pairs = |idx: &[usize]| -> HashSet<String> {
            idx.iter()
                .filter_map(|&i| recs[i].shape.as_ref())
                .filter(|s| s.radius_mm.is_some())
                .map(|s| s.tag.clone())
                .collect()
        };
        let (train, test) = (pairs(&s.train), pairs(&s.test));
        assert!(!test.is_empty());
        assert!(train.is_disjoint(&test), "{:?}", train.intersection(&test).collect::<Vec<_>>());
    }

    #[test]
    fn robot_split_tests_only_robot_presses() {
        let recs = planned_records();
        let s = make_split(&recs, SplitMode::RobotProfile, Config::reference()).unwrap();
        assert!(s.test.iter().all(|&i| recs[i].profile == Some(ProfileKind::Robot)));
        assert!(s.train.iter().all(|&i| recs[i].profile == Some(ProfileKind::Human)));
    }

    #[test]
    fn protocol_sets_never_touch_the_training_set() {
        let recs = planned_records();
        let p = combined_protocol(&recs, Config::reference()).unwrap();
        let train: HashSet<_> = p.train.iter().collect();
        for test in [&p.unseen_hardness, &p.unseen_shape, &p.robot, &p.complex_holdout, &p.simple_shapes] {
            assert!(!test.is_empty());
            assert!(test.iter().all(|i| !train.contains(i)));
        }
        // Roughly a fifth of the training set is bad contact or ridged.
        let hard = p
            .train
            .iter()
            .filter(|&&i| recs[i].group != Some(GroupTag::Basic))
            .count() as f64;
        let share = hard / p.train.len() as f64;
        assert!((0.15..0.35).contains(&share), "{share}");
    }

    #[test]
    fn empty_split_is_an_error() {
        let mut recs = planned_records();
        recs.retain(|r| r.profile == Some(ProfileKind::Human));
        assert!(matches!(
            make_split(&recs, SplitMode::RobotProfile, Config::reference()),
            Err(TrainError::EmptySplit(_))
        ));
    }

    #[test]
    fn unlabelled_records_are_never_used() {
        let mut recs = planned_records();
        for r in &mut recs {
            r.label = Label::Unknown;
        }
        assert!(make_split(&recs, SplitMode::UnseenHardness, Config::reference()).is_err());
    }
}
