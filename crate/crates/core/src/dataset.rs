//! Dataset generation, the on-disk layout, and ingest of recorded presses.
//!
//! A dataset directory holds `manifest.json` and one folder per press with
//! numbered PNG frames. Simulated presses also carry a `meta.json` sidecar
//! with everything needed to reproduce them.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::config::Config;
use crate::mechanics::{IndenterShape, Shore00, SurfaceTexture};
use crate::pipeline::{contact_threshold, select_clip, PressVideo};
use crate::render::TactileFrame;
use crate::simcam::{
    bad_contact_profile, human_press_profile, random_texture, ridged_height_field, robot_press_profile,
    vessel_height_field, GroupTag, PressProfile, PressSequence, ProfileKind, RidgeParams, SimError, Simulator,
};

pub const MANIFEST_VERSION: u32 = 1;

/// Profiles tried per planned press before an unusable one is kept anyway.
const MAX_ATTEMPTS: u64 = 8;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("manifest format {found} is newer than the supported {supported}")]
    FutureVersion { found: u32, supported: u32 },
    #[error("duplicate sequence id `{0}`")]
    DuplicateId(String),
    #[error("label {value} for `{id}` is outside [0, 100]")]
    LabelRange { id: String, value: f64 },
    #[error("sequence `{0}` has no frames")]
    NoFrames(String),
    #[error("frames of `{id}` are not all {width}x{height}")]
    FrameSize { id: String, width: usize, height: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl ToString) -> DatasetError {
    DatasetError::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Ground truth for a press; recorded data may come without one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Known(Shore00),
    Unknown,
}

impl Label {
    pub fn value(self) -> Option<f64> {
        match self {
            Label::Known(h) => Some(h.value()),
            Label::Unknown => None,
        }
    }

    /// Parses a CSV or manifest cell: a number in `[0, 100]`, `unknown`, or
    /// an empty cell.
    pub fn parse(id: &str, text: &str) -> Result<Self, DatasetError> {
        let t = text.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("unknown") {
            return Ok(Label::Unknown);
        }
        let value: f64 = t.parse().map_err(|_| DatasetError::LabelRange {
            id: id.to_string(),
            value: f64::NAN,
        })?;
        Shore00::new(value)
            .map(Label::Known)
            .map_err(|_| DatasetError::LabelRange {
                id: id.to_string(),
                value,
            })
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Label::Known(h) => s.serialize_f64(h.value()),
            Label::Unknown => s.serialize_str("unknown"),
        }
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Shore00::new(v).map(Label::Known).map_err(serde::de::Error::custom),
            Raw::Text(t) if t == "unknown" => Ok(Label::Unknown),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad label `{t}`"))),
        }
    }
}

/// What a press was made against, as far as split logic cares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeInfo {
    pub family: String,
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_mm: Option<f64>,
}

impl ShapeInfo {
    fn of(shape: &IndenterShape, planned: &PlannedShape) -> Self {
        let tag = match planned {
            PlannedShape::Ridged { holdout: false } => "ridged".to_string(),
            PlannedShape::Ridged { holdout: true } => "ridged_holdout".to_string(),
            PlannedShape::Vessel => "vessel".to_string(),
            PlannedShape::Given(_) => shape.tag(),
        };
        ShapeInfo {
            family: shape.family().to_string(),
            tag,
            radius_mm: shape.radius_mm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: String,
    /// Folder holding the frames, relative to the dataset root.
    pub frames_dir: String,
    /// Frame file names in temporal order.
    pub frames: Vec<String>,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeInfo>,
    /// Position on the configured hardness grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    /// Base directory of `frames_dir`; relative paths are taken from the
    /// manifest's own directory.
    pub root: String,
    pub records: Vec<SequenceRecord>,
}

impl DatasetManifest {
    pub fn new(root: impl Into<String>, records: Vec<SequenceRecord>) -> Self {
        DatasetManifest {
            format_version: MANIFEST_VERSION,
            root: root.into(),
            records,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| format_err(path, e))?;
        fs::write(path, text).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format_err(path, e))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| format_err(path, "missing format_version"))? as u32;
        if found > MANIFEST_VERSION {
            return Err(DatasetError::FutureVersion {
                found,
                supported: MANIFEST_VERSION,
            });
        }
        let manifest: DatasetManifest = serde_json::from_value(value).map_err(|e| format_err(path, e))?;
        let mut seen = HashSet::new();
        for r in &manifest.records {
            if !seen.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateId(r.id.clone()));
            }
        }
        Ok(manifest)
    }

    /// Directory that `frames_dir` entries are relative to.
    pub fn resolve_root(&self, manifest_path: &Path) -> PathBuf {
        let root = Path::new(&self.root);
        if root.is_absolute() {
            root.to_path_buf()
        } else {
            manifest_path.parent().unwrap_or(Path::new(".")).join(root)
        }
    }
}

/// A press kept as 8-bit RGB frames, exactly as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredVideo {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Vec<u8>>,
    pub intensity: Vec<f64>,
}

impl StoredVideo {
    pub fn from_rgb8(id: &str, width: usize, height: usize, frames: Vec<Vec<u8>>) -> Result<Self, DatasetError> {
        if frames.is_empty() {
            return Err(DatasetError::NoFrames(id.to_string()));
        }
        if frames.iter().any(|f| f.len() != width * height * 3) {
            return Err(DatasetError::FrameSize {
                id: id.to_string(),
                width,
                height,
            });
        }
        let reference = TactileFrame::from_rgb8(width, height, &frames[0]);
        let intensity = frames
            .iter()
            .map(|f| {
                crate::render::mean_intensity_change(&TactileFrame::from_rgb8(width, height, f), &reference)
                    .expect("sizes checked above")
            })
            .collect();
        Ok(StoredVideo {
            width,
            height,
            frames,
            intensity,
        })
    }

    /// Frames of a simulated press are already quantised, so its intensity
    /// series carries over unchanged.
    pub fn from_sequence(seq: &PressSequence) -> Self {
        let f0 = &seq.frames[0];
        StoredVideo {
            width: f0.width,
            height: f0.height,
            frames: seq.frames.iter().map(|f| f.to_rgb8()).collect(),
            intensity: seq.intensity_series.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

impl PressVideo for StoredVideo {
    fn intensity_series(&self) -> &[f64] {
        &self.intensity
    }

    fn frame(&self, index: usize) -> TactileFrame {
        TactileFrame::from_rgb8(self.width, self.height, &self.frames[index])
    }
}

/// Records and their videos, index-aligned.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<SequenceRecord>,
    pub videos: Vec<StoredVideo>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: SequenceRecord, video: StoredVideo) {
        self.records.push(record);
        self.videos.push(video);
    }

    /// Subset by indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            videos: indices.iter().map(|&i| self.videos[i].clone()).collect(),
        }
    }
}

/// Shape as decided at planning time; height fields are drawn from the
/// press seed when the press is rendered.
#[derive(Debug, Clone, PartialEq)]
pub enum PlannedShape {
    Given(IndenterShape),
    Ridged { holdout: bool },
    Vessel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub id: String,
    pub group: GroupTag,
    pub kind: ProfileKind,
    pub bad_contact: bool,
    pub level_index: usize,
    pub hardness: Shore00,
    pub shape: PlannedShape,
    pub seed: u64,
}

fn basic_shape<R: Rng>(rng: &mut R, cfg: &Config) -> IndenterShape {
    let d = &cfg.dataset;
    // sphere, cylinder, flat, edge, corner
    let weights = WeightedIndex::new([3, 3, 2, 1, 1]).expect("constant weights");
    let radius = |rng: &mut R| d.radii_mm[rng.gen_range(0..d.radii_mm.len())];
    let angle = |rng: &mut R| rng.gen_range(0.0..std::f64::consts::PI);
    let span = |rng: &mut R, lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    match weights.sample(rng) {
        0 if !d.radii_mm.is_empty() => IndenterShape::Sphere { radius_mm: radius(rng) },
        1 if !d.radii_mm.is_empty() => IndenterShape::Cylinder {
            radius_mm: radius(rng),
            axis_angle_rad: angle(rng),
        },
        3 => IndenterShape::Edge {
            dihedral_rad: span(rng, d.edge_min_dihedral_deg, d.edge_max_dihedral_deg).to_radians(),
            tip_rounding_mm: cfg.gel.tip_rounding_mm,
            axis_angle_rad: angle(rng),
        },
        4 => IndenterShape::Corner {
            solid_angle_sr: span(rng, d.corner_min_solid_angle_sr, d.corner_max_solid_angle_sr),
            tip_rounding_mm: cfg.gel.tip_rounding_mm,
        },
        _ => IndenterShape::Flat,
    }
}

/// Every press of the configured dataset, in a fixed order. Depends only on
/// the config (including the run seed).
pub fn plan_dataset(cfg: &Config) -> Vec<SamplePlan> {
    let d = &cfg.dataset;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut plans = Vec::with_capacity(cfg.total_per_level() * d.hardness_levels);
    for (level, &h) in cfg.hardness_grid().iter().enumerate() {
        let hardness = Shore00::saturating(h);
        let groups: [(&str, usize, GroupTag, ProfileKind, bool); 6] = [
            ("basic", d.basic_human_per_level, GroupTag::Basic, ProfileKind::Human, false),
            ("bad", d.bad_contact_per_level, GroupTag::BadContact, ProfileKind::Human, true),
            ("complex", d.complex_per_level, GroupTag::ComplexShape, ProfileKind::Human, false),
            ("robot", d.robot_per_level, GroupTag::Basic, ProfileKind::Robot, false),
            ("holdout", d.complex_holdout_per_level, GroupTag::ComplexShape, ProfileKind::Human, false),
            ("simple", d.simple_shape_per_level, GroupTag::SimpleShape, ProfileKind::Human, false),
        ];
        for (name, count, group, kind, bad_contact) in groups {
            for k in 0..count {
                let shape = match name {
                    "complex" => PlannedShape::Ridged { holdout: false },
                    "holdout" => PlannedShape::Ridged { holdout: true },
                    "simple" => PlannedShape::Vessel,
                    _ => PlannedShape::Given(basic_shape(&mut rng, cfg)),
                };
                plans.push(SamplePlan {
                    id: format!("{name}_l{level:02}_{k:03}"),
                    group,
                    kind,
                    bad_contact,
                    level_index: level,
                    hardness,
                    shape,
                    seed: rng.gen(),
                });
            }
        }
    }
    plans
}

/// Renders one planned press. Profiles whose video cannot yield a clip are
/// redrawn a few times; the last attempt is kept regardless and left for the
/// consumer to reject.
pub fn synthesize(cfg: &Config, sim: &Simulator, plan: &SamplePlan) -> Result<(SequenceRecord, PressSequence), DatasetError> {
    let tau = contact_threshold(&cfg.pipeline, sim.noise_sigma);
    let mut shape_rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x05ba_9e00_f1e1_d000);
    let shape = match &plan.shape {
        PlannedShape::Given(s) => s.clone(),
        PlannedShape::Ridged { holdout } => {
            let params = if *holdout {
                RidgeParams::holdout(&cfg.dataset)
            } else {
                RidgeParams::training(&cfg.dataset)
            };
            IndenterShape::HeightField(ridged_height_field(&mut shape_rng, &params, sim.spec()))
        }
        PlannedShape::Vessel => IndenterShape::HeightField(vessel_height_field(&mut shape_rng, sim.spec())),
    };
    let mut attempt: u64 = 0;
    loop {
        let seed = plan.seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let profile = match (plan.kind, plan.bad_contact) {
            (ProfileKind::Robot, _) => robot_press_profile(seed, &cfg.robot),
            (ProfileKind::Human, true) => bad_contact_profile(seed, &cfg.human, &cfg.bad_contact),
            (ProfileKind::Human, false) => human_press_profile(seed, &cfg.human),
        };
        let texture = random_texture(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x7e47_0e00_0000_0001), &cfg.texture);
        let seq = sim.synth_sequence(&shape, texture.as_ref(), plan.hardness, &profile, plan.group)?;
        attempt += 1;
        let usable = select_clip(&seq, tau).is_ok();
        if usable || attempt >= MAX_ATTEMPTS {
            if !usable {
                log::warn!("{}: no usable clip after {attempt} profiles", plan.id);
            }
            let frames_dir = format!("sequences/{}", plan.id);
            let record = SequenceRecord {
                id: plan.id.clone(),
                frames_dir,
                frames: (0..seq.frames.len()).map(frame_name).collect(),
                label: Label::Known(plan.hardness),
                group: Some(plan.group),
                profile: Some(plan.kind),
                shape: Some(ShapeInfo::of(&shape, &plan.shape)),
                level_index: Some(plan.level_index),
                seed: Some(seed),
                saturated: seq.saturated,
            };
            return Ok((record, seq));
        }
    }
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:04}.png")
}

/// Generates the configured dataset in memory.
pub fn generate_in_memory(cfg: &Config) -> Result<Dataset, DatasetError> {
    let sim = Simulator::from_config(cfg)?;
    let mut out = Dataset::default();
    for plan in plan_dataset(cfg) {
        let (record, seq) = synthesize(cfg, &sim, &plan)?;
        out.push(record, StoredVideo::from_sequence(&seq));
    }
    Ok(out)
}

/// Sidecar written next to the frames of a simulated press.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub id: String,
    pub label: Label,
    pub group: GroupTag,
    pub profile: PressProfile,
    pub shape: ShapeInfo,
    /// Full parameters for analytic shapes; height fields are regenerated
    /// from the seed instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_params: Option<IndenterShape>,
    pub texture: Option<SurfaceTexture>,
    pub approach_mm: Vec<f64>,
    pub force_n: Vec<f64>,
    pub intensity_series: Vec<f64>,
    pub saturated: bool,
}

fn write_png(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<(), DatasetError> {
    image::save_buffer(path, rgb, width as u32, height as u32, image::ExtendedColorType::Rgb8)
        .map_err(|e| format_err(path, e))
}

fn read_png(path: &Path) -> Result<(usize, usize, Vec<u8>), DatasetError> {
    let img = image::open(path).map_err(|e| format_err(path, e))?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.into_raw()))
}

/// Writes one press under `root` following its record.
pub fn write_sequence(root: &Path, record: &SequenceRecord, seq: &PressSequence) -> Result<(), DatasetError> {
    let dir = root.join(&record.frames_dir);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    for (frame, name) in seq.frames.iter().zip(&record.frames) {
        write_png(&dir.join(name), frame.width, frame.height, &frame.to_rgb8())?;
    }
    let meta = SequenceMeta {
        id: record.id.clone(),
        label: record.label,
        group: seq.group,
        profile: seq.profile.clone(),
        shape: record.shape.clone().expect("simulated records carry a shape"),
        shape_params: (!matches!(seq.shape, IndenterShape::HeightField(_))).then(|| seq.shape.clone()),
        texture: seq.texture,
        approach_mm: seq.approach_mm.clone(),
        force_n: seq.force_n.clone(),
        intensity_series: seq.intensity_series.clone(),
        saturated: seq.saturated,
    };
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| format_err(&path, e))?;
    fs::write(&path, text).map_err(io_err(&path))
}

/// Generates the configured dataset into `out` and writes its manifest.
pub fn write_generated(cfg: &Config, out: &Path) -> Result<DatasetManifest, DatasetError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let sim = Simulator::from_config(cfg)?;
    let plans = plan_dataset(cfg);
    let mut records = Vec::with_capacity(plans.len());
    for (i, plan) in plans.iter().enumerate() {
        let (record, seq) = synthesize(cfg, &sim, plan)?;
        write_sequence(out, &record, &seq)?;
        records.push(record);
        if (i + 1) % 100 == 0 {
            log::info!("generated {}/{}", i + 1, plans.len());
        }
    }
    let manifest = DatasetManifest::new(".", records);
    manifest.save(&out.join("manifest.json"))?;
    Ok(manifest)
}

/// Reads the frames listed in a record.
pub fn load_video(root: &Path, record: &SequenceRecord) -> Result<StoredVideo, DatasetError> {
    let dir = root.join(&record.frames_dir);
    let mut size = None;
    let mut frames = Vec::with_capacity(record.frames.len());
    for name in &record.frames {
        let (w, h, rgb) = read_png(&dir.join(name))?;
        let (ew, eh) = *size.get_or_insert((w, h));
        if (w, h) != (ew, eh) {
            return Err(DatasetError::FrameSize {
                id: record.id.clone(),
                width: ew,
                height: eh,
            });
        }
        frames.push(rgb);
    }
    let (w, h) = size.ok_or_else(|| DatasetError::NoFrames(record.id.clone()))?;
    StoredVideo::from_rgb8(&record.id, w, h, frames)
}

/// Loads a manifest and every video it lists.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, DatasetError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest.resolve_root(manifest_path);
    let mut out = Dataset::default();
    for record in manifest.records {
        let video = load_video(&root, &record)?;
        out.push(record, video);
    }
    Ok(out)
}

/// Trailing run of digits in a file stem, used to order frames.
fn frame_number(name: &str) -> Option<u64> {
    let stem = Path::new(name).file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

/// PNG files of a directory in numeric frame order (`f2` before `f10`).
pub fn frame_files(dir: &Path) -> Result<Vec<String>, DatasetError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let is_png = Path::new(&name)
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && entry.path().is_file() {
            names.push(name);
        }
    }
    names.sort_by(|a, b| frame_number(a).cmp(&frame_number(b)).then_with(|| a.cmp(b)));
    Ok(names)
}

/// Reads a labels CSV with `id,label` rows. Labels may be `unknown`.
pub fn read_labels(path: &Path) -> Result<Vec<(String, Label)>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format_err(path, e))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| format_err(path, e))?;
        let (Some(id), Some(label)) = (row.get(0), row.get(1)) else {
            return Err(format_err(path, "expected `id,label` rows"));
        };
        if !seen.insert(id.to_string()) {
            return Err(DatasetError::DuplicateId(id.to_string()));
        }
        out.push((id.to_string(), Label::parse(id, label)?));
    }
    Ok(out)
}

/// Builds a manifest over recorded presses: every subfolder of `raw_dir`
/// holding PNG frames is one press, named after the folder. Presses missing
/// from the labels file are marked unknown.
pub fn ingest(raw_dir: &Path, labels: Option<&Path>) -> Result<DatasetManifest, DatasetError> {
    let root = fs::canonicalize(raw_dir).map_err(io_err(raw_dir))?;
    let mut dirs = Vec::new();
    for entry in fs::read_dir(&root).map_err(io_err(&root))? {
        let entry = entry.map_err(io_err(&root))?;
        if entry.path().is_dir() {
            dirs.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    dirs.sort_by(|a, b| frame_number(a).cmp(&frame_number(b)).then_with(|| a.cmp(b)));
    let labels = match labels {
        Some(p) => read_labels(p)?,
        None => Vec::new(),
    };
    let mut records = Vec::new();
    for id in dirs {
        let frames = frame_files(&root.join(&id))?;
        if frames.is_empty() {
            log::warn!("skipping {id}: no PNG frames");
            continue;
        }
        let label = labels
            .iter()
            .find(|(l, _)| *l == id)
            .map_or(Label::Unknown, |(_, l)| *l);
        records.push(SequenceRecord {
            id: id.clone(),
            frames_dir: id,
            frames,
            label,
            group: None,
            profile: None,
            shape: None,
            level_index: None,
            seed: None,
            saturated: false,
        });
    }
    for (id, _) in &labels {
        if !records.iter().any(|r| &r.id == id) {
            log::warn!("label for `{id}` has no matching frame folder");
        }
    }
    Ok(DatasetManifest::new(root.to_string_lossy(), records))
}

/// Reads a single press from a folder of numbered PNG frames.
pub fn load_video_dir(dir: &Path) -> Result<StoredVideo, DatasetError> {
    let id = dir.to_string_lossy().into_owned();
    let record = SequenceRecord {
        id: id.clone(),
        frames_dir: String::new(),
        frames: frame_files(dir)?,
        label: Label::Unknown,
        group: None,
        profile: None,
        shape: None,
        level_index: None,
        seed: None,
        saturated: false,
    };
    if record.frames.is_empty() {
        return Err(DatasetError::NoFrames(id));
    }
    load_video(dir, &record)
}
