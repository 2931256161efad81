//! Press videos: loading profiles for hand-held and gripper presses, and the
//! per-frame mechanics -> render loop that turns them into sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{BadContactSection, Config, DatasetSection, HumanSection, RobotSection, TextureSection};
use crate::mechanics::{
    contact_unchecked, gel_surface_at, ContactPair, ContactPose, ElasticBody, GelSpec, HeightField, IndenterShape,
    MechanicsError, ModulusMapping, Shore00, SurfaceTexture,
};
use crate::render::{add_noise, mean_intensity_change, RenderError, Renderer, TactileFrame};

/// Camera frame rate.
pub const FPS: f64 = 30.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Mechanics(#[from] MechanicsError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Human,
    Robot,
}

/// How the sensor is driven into the sample.
///
/// Human presses follow a normalised progress curve that reaches the target
/// force at its last frame; robot presses move at constant speed until the
/// force threshold is crossed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressProfile {
    pub kind: ProfileKind,
    pub lead_in_frames: usize,
    /// Human: exact loading length. Robot: upper bound.
    pub loading_frames: usize,
    /// Human only: approach as a fraction of the final approach, per loading
    /// frame; nondecreasing and ending at 1.
    pub progress: Vec<f64>,
    /// Robot only.
    pub speed_mm_per_s: f64,
    pub max_force_n: f64,
    pub tilt_rad: f64,
    pub tilt_azimuth_rad: f64,
    pub lateral_drift_mm_per_s: f64,
    pub drift_azimuth_rad: f64,
    pub center_offset_mm: (f64, f64),
    pub seed: u64,
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn random_offset<R: Rng>(rng: &mut R, max_radius: f64) -> (f64, f64) {
    let r = max_radius * rng.gen::<f64>().sqrt();
    let phi = uniform(rng, 0.0, std::f64::consts::TAU);
    (r * phi.cos(), r * phi.sin())
}

/// Hand-held press: jittered speed, unknown trajectory, small tilt and drift.
pub fn human_press_profile(seed: u64, cfg: &HumanSection) -> PressProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(cfg.min_frames..=cfg.max_frames);
    let lead_in = rng.gen_range(1..=cfg.max_lead_in_frames.max(1));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    // Smooth speed: a bell-shaped ramp times slowly varying multiplicative noise.
    let mut z = 0.0;
    let mut cumulative = 0.0;
    let mut raw = Vec::with_capacity(n);
    for k in 0..n {
        z = 0.7 * z + 0.3 * normal.sample(&mut rng);
        let ramp = 0.3 + (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).sin();
        let speed = (ramp * (1.0 + cfg.speed_jitter * z)).max(0.05);
        cumulative += speed;
        raw.push(cumulative);
    }
    let total = cumulative;
    let progress = raw.into_iter().map(|c| c / total).collect();
    PressProfile {
        kind: ProfileKind::Human,
        lead_in_frames: lead_in,
        loading_frames: n,
        progress,
        speed_mm_per_s: 0.0,
        max_force_n: uniform(&mut rng, cfg.min_force_n, cfg.max_force_n),
        tilt_rad: uniform(&mut rng, 0.0, cfg.max_tilt_rad),
        tilt_azimuth_rad: uniform(&mut rng, 0.0, std::f64::consts::TAU),
        lateral_drift_mm_per_s: uniform(&mut rng, 0.0, cfg.max_drift_mm_per_s),
        drift_azimuth_rad: uniform(&mut rng, 0.0, std::f64::consts::TAU),
        center_offset_mm: random_offset(&mut rng, cfg.max_center_offset_mm),
        seed,
    }
}

/// Gripper press: constant speed, force threshold, no tilt or drift.
pub fn robot_press_profile(seed: u64, cfg: &RobotSection) -> PressProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lead_in = rng.gen_range(1..=cfg.max_lead_in_frames.max(1));
    PressProfile {
        kind: ProfileKind::Robot,
        lead_in_frames: lead_in,
        loading_frames: cfg.max_frames,
        progress: Vec::new(),
        speed_mm_per_s: uniform(&mut rng, cfg.min_speed_mm_per_s, cfg.max_speed_mm_per_s),
        max_force_n: uniform(&mut rng, cfg.min_threshold_n, cfg.max_threshold_n),
        tilt_rad: 0.0,
        tilt_azimuth_rad: 0.0,
        lateral_drift_mm_per_s: 0.0,
        drift_azimuth_rad: 0.0,
        center_offset_mm: random_offset(&mut rng, cfg.max_center_offset_mm),
        seed,
    }
}

/// Human press with one of three faults: strong tilt, strong drift, or a
/// contact partly off the sensor.
pub fn bad_contact_profile(seed: u64, human: &HumanSection, bad: &BadContactSection) -> PressProfile {
    let mut p = human_press_profile(seed, human);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbad0_c047_ac70_0000);
    match rng.gen_range(0..3) {
        0 => p.tilt_rad = uniform(&mut rng, bad.min_tilt_rad, bad.max_tilt_rad),
        1 => p.lateral_drift_mm_per_s = uniform(&mut rng, bad.min_drift_mm_per_s, bad.max_drift_mm_per_s),
        _ => {
            let r = uniform(&mut rng, bad.min_off_center_mm, bad.max_off_center_mm);
            let phi = uniform(&mut rng, 0.0, std::f64::consts::TAU);
            p.center_offset_mm = (r * phi.cos(), r * phi.sin());
        }
    }
    p
}

impl PressProfile {
    /// Contact centre at frame `k`: offset, plus the tilt shift of the gel
    /// thickness, plus drift accumulated since first contact.
    pub fn center_at(&self, k: usize, thickness_mm: f64) -> (f64, f64) {
        let shift = self.tilt_rad.tan() * thickness_mm;
        let t = k.saturating_sub(self.lead_in_frames - 1) as f64 / FPS;
        let drift = self.lateral_drift_mm_per_s * t;
        (
            self.center_offset_mm.0 + shift * self.tilt_azimuth_rad.cos() + drift * self.drift_azimuth_rad.cos(),
            self.center_offset_mm.1 + shift * self.tilt_azimuth_rad.sin() + drift * self.drift_azimuth_rad.sin(),
        )
    }

    /// Robot approach at frame `k` (zero during the lead-in).
    pub fn robot_approach(&self, k: usize) -> f64 {
        k.saturating_sub(self.lead_in_frames - 1) as f64 * self.speed_mm_per_s / FPS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupTag {
    Basic,
    BadContact,
    SimpleShape,
    ComplexShape,
}

impl GroupTag {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupTag::Basic => "basic",
            GroupTag::BadContact => "bad_contact",
            GroupTag::SimpleShape => "simple_shape",
            GroupTag::ComplexShape => "complex_shape",
        }
    }
}

/// One simulated press.
#[derive(Debug, Clone)]
pub struct PressSequence {
    pub frames: Vec<TactileFrame>,
    /// Mean intensity change of every frame against `frames[0]`.
    pub intensity_series: Vec<f64>,
    pub label: Shore00,
    pub shape: IndenterShape,
    pub texture: Option<SurfaceTexture>,
    pub profile: PressProfile,
    pub group: GroupTag,
    pub approach_mm: Vec<f64>,
    pub force_n: Vec<f64>,
    /// The plan pushed the gel past its thickness and the video was cut short.
    pub saturated: bool,
}

impl PressSequence {
    /// Index of the last recorded frame.
    pub fn stop_index(&self) -> usize {
        self.frames.len() - 1
    }
}

/// Mechanics plus optics for one sensor.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub renderer: Renderer,
    pub mapping: ModulusMapping,
    pub gel: ElasticBody,
    pub noise_sigma: f64,
}

impl Simulator {
    pub fn from_config(cfg: &Config) -> Result<Self, SimError> {
        let spec = GelSpec::from_config(&cfg.gel)?;
        let mapping = ModulusMapping::from_config(&cfg.materials);
        let gel = mapping.body(spec.hardness)?;
        Ok(Simulator {
            renderer: Renderer::from_config(spec, &cfg.render),
            mapping,
            gel,
            noise_sigma: cfg.render.noise_sigma,
        })
    }

    pub fn spec(&self) -> &GelSpec {
        &self.renderer.spec
    }

    pub fn pair(&self, hardness: Shore00) -> Result<ContactPair, SimError> {
        Ok(ContactPair {
            gel: self.gel,
            object: self.mapping.body(hardness)?,
        })
    }

    fn force(&self, shape: &IndenterShape, pair: &ContactPair, approach: f64) -> Result<f64, SimError> {
        Ok(contact_unchecked(shape, pair, approach, self.spec())?.force_n)
    }

    /// Approach at which the contact force reaches `target`.
    fn approach_for_force(&self, shape: &IndenterShape, pair: &ContactPair, target: f64) -> Result<f64, SimError> {
        let mut hi = 0.5;
        while self.force(shape, pair, hi)? < target {
            hi *= 2.0;
            if hi > 1e3 {
                return Err(MechanicsError::InvalidApproach(hi).into());
            }
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.force(shape, pair, mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Planned approach per frame, before saturation is applied.
    fn plan(&self, shape: &IndenterShape, pair: &ContactPair, profile: &PressProfile) -> Result<Vec<f64>, SimError> {
        let lead = vec![0.0; profile.lead_in_frames.max(1)];
        match profile.kind {
            ProfileKind::Human => {
                let end = if profile.loading_frames == 0 {
                    0.0
                } else {
                    self.approach_for_force(shape, pair, profile.max_force_n)?
                };
                Ok(lead.into_iter().chain(profile.progress.iter().map(|p| p * end)).collect())
            }
            ProfileKind::Robot => {
                let mut plan = lead;
                let mut k = plan.len();
                while plan.len() < profile.lead_in_frames.max(1) + profile.loading_frames {
                    let d = profile.robot_approach(k);
                    plan.push(d);
                    if self.force(shape, pair, d)? >= profile.max_force_n {
                        break;
                    }
                    k += 1;
                }
                Ok(plan)
            }
        }
    }

    /// Renders a full press. Frames are quantised to 8 bits, as stored on
    /// disk, before intensities are measured.
    pub fn synth_sequence(
        &self,
        shape: &IndenterShape,
        texture: Option<&SurfaceTexture>,
        hardness: Shore00,
        profile: &PressProfile,
        group: GroupTag,
    ) -> Result<PressSequence, SimError> {
        shape.validate()?;
        let pair = self.pair(hardness)?;
        let spec = self.spec();
        let mut plan = self.plan(shape, &pair, profile)?;
        let limit = spec.thickness_mm / pair.gel_share();
        let valid = plan.iter().take_while(|d| **d <= limit).count();
        let saturated = valid < plan.len();
        if saturated {
            log::debug!(
                "press on {} at {:.1} Shore 00 reaches the gel thickness; cut at frame {}",
                shape.tag(),
                hardness.value(),
                valid - 1
            );
            plan.truncate(valid);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed ^ 0x5eed_0f00_0015_e000);
        let mut frames = Vec::with_capacity(plan.len());
        let mut forces = Vec::with_capacity(plan.len());
        for (k, &approach) in plan.iter().enumerate() {
            let state = contact_unchecked(shape, &pair, approach, spec)?;
            let pose = ContactPose {
                center_mm: profile.center_at(k, spec.thickness_mm),
            };
            let height = gel_surface_at(shape, &state, spec, &pose, texture)?;
            let mut frame = self.renderer.render(&height, &state, shape, &pose);
            add_noise(&mut frame, self.noise_sigma, &mut rng);
            frames.push(TactileFrame::from_rgb8(frame.width, frame.height, &frame.to_rgb8()));
            forces.push(state.force_n);
        }
        let intensity_series = frames
            .iter()
            .map(|f| mean_intensity_change(f, &frames[0]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PressSequence {
            frames,
            intensity_series,
            label: hardness,
            shape: shape.clone(),
            texture: texture.copied(),
            profile: profile.clone(),
            group,
            approach_mm: plan,
            force_n: forces,
            saturated,
        })
    }
}

/// Mold texture with a jittered orientation and a random phase.
pub fn random_texture<R: Rng>(rng: &mut R, cfg: &TextureSection) -> Option<SurfaceTexture> {
    let orientation = cfg.orientation_rad + uniform(rng, -cfg.orientation_jitter_rad, cfg.orientation_jitter_rad);
    let phase = uniform(rng, 0.0, std::f64::consts::TAU);
    cfg.enabled.then_some(SurfaceTexture {
        amplitude_mm: cfg.amplitude_mm,
        wavelength_mm: cfg.wavelength_mm,
        orientation_rad: orientation,
        phase_rad: phase,
    })
}

/// Parameters of a ridged sample surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeParams {
    pub min_amplitude_mm: f64,
    pub max_amplitude_mm: f64,
    pub min_wavelength_mm: f64,
    pub max_wavelength_mm: f64,
    pub min_sharpness: f64,
    pub max_sharpness: f64,
}

impl RidgeParams {
    pub fn training(d: &DatasetSection) -> Self {
        RidgeParams {
            min_amplitude_mm: d.ridge_min_amplitude_mm,
            max_amplitude_mm: d.ridge_max_amplitude_mm,
            min_wavelength_mm: d.ridge_min_wavelength_mm,
            max_wavelength_mm: d.ridge_max_wavelength_mm,
            min_sharpness: d.ridge_min_sharpness,
            max_sharpness: d.ridge_max_sharpness,
        }
    }

    pub fn holdout(d: &DatasetSection) -> Self {
        RidgeParams {
            min_amplitude_mm: d.holdout_ridge_min_amplitude_mm,
            max_amplitude_mm: d.holdout_ridge_max_amplitude_mm,
            min_sharpness: d.holdout_ridge_min_sharpness,
            max_sharpness: d.holdout_ridge_max_sharpness,
            ..RidgeParams::training(d)
        }
    }
}

/// Ridge cross-section on `[0, 1]`: flat valleys and crests whose width
/// shrinks as `sharpness` grows.
pub fn ridge_profile(phase: f64, sharpness: f64) -> f64 {
    (0.5 * (1.0 + phase.sin())).powf(sharpness)
}

/// Random ridged surface: a gentle dome carrying two or three families of
/// parallel ridges. Covers the sensing area with margin.
pub fn ridged_height_field<R: Rng>(rng: &mut R, params: &RidgeParams, spec: &GelSpec) -> HeightField {
    let pitch = 0.1;
    let cols = ((spec.sensing_area_mm.0 + 8.0) / pitch).ceil() as usize;
    let rows = ((spec.sensing_area_mm.1 + 8.0) / pitch).ceil() as usize;
    let dome_radius = uniform(rng, 20.0, 60.0);
    let families: Vec<(f64, f64, f64, f64, f64)> = (0..rng.gen_range(2..=3))
        .map(|_| {
            (
                uniform(rng, params.min_amplitude_mm, params.max_amplitude_mm),
                uniform(rng, params.min_wavelength_mm, params.max_wavelength_mm),
                uniform(rng, 0.0, std::f64::consts::PI),
                uniform(rng, 0.0, std::f64::consts::TAU),
                uniform(rng, params.min_sharpness, params.max_sharpness),
            )
        })
        .collect();
    let mut heights = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let x = (c as f64 - (cols as f64 - 1.0) / 2.0) * pitch;
            let y = (r as f64 - (rows as f64 - 1.0) / 2.0) * pitch;
            let mut h = -(x * x + y * y) / (2.0 * dome_radius);
            for &(amp, wl, angle, phase, sharp) in &families {
                let u = x * angle.cos() + y * angle.sin();
                h += amp * ridge_profile(std::f64::consts::TAU * u / wl + phase, sharp);
            }
            heights.push(h);
        }
    }
    HeightField::new(cols, rows, pitch, heights).expect("generated field is well formed")
}

/// Smooth vessel-like surface: a flat-topped frustum (round) or box
/// (square-ish) with rounded shoulders and sloped walls.
pub fn vessel_height_field<R: Rng>(rng: &mut R, spec: &GelSpec) -> HeightField {
    let pitch = 0.1;
    let cols = ((spec.sensing_area_mm.0 + 8.0) / pitch).ceil() as usize;
    let rows = ((spec.sensing_area_mm.1 + 8.0) / pitch).ceil() as usize;
    let top = uniform(rng, 3.0, 8.0);
    let slope = uniform(rng, 20f64.to_radians(), 45f64.to_radians()).tan();
    let shoulder = uniform(rng, 0.5, 1.5);
    // Exponent 2 gives a round top, larger values a rounded square.
    let p = if rng.gen_bool(0.5) { 2.0 } else { 6.0 };
    let angle = uniform(rng, 0.0, std::f64::consts::FRAC_PI_2);
    let (s, c) = angle.sin_cos();
    let mut heights = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for col in 0..cols {
            let x = (col as f64 - (cols as f64 - 1.0) / 2.0) * pitch;
            let y = (r as f64 - (rows as f64 - 1.0) / 2.0) * pitch;
            let (u, v) = (x * c + y * s, -x * s + y * c);
            let dist = (u.abs().powf(p) + v.abs().powf(p)).powf(1.0 / p);
            // Softplus keeps the shoulder smooth.
            let z = (dist - top) / shoulder;
            let excess = shoulder * if z > 30.0 { z } else { z.exp().ln_1p() };
            heights.push(-slope * excess);
        }
    }
    HeightField::new(cols, rows, pitch, heights).expect("generated field is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim() -> Simulator {
        Simulator::from_config(Config::reference()).unwrap()
    }

    fn sphere(r: f64) -> IndenterShape {
        IndenterShape::Sphere { radius_mm: r }
    }

    #[test]
    fn profiles_are_reproducible() {
        let c = Config::reference();
        assert_eq!(human_press_profile(9, &c.human), human_press_profile(9, &c.human));
        assert_eq!(robot_press_profile(9, &c.robot), robot_press_profile(9, &c.robot));
        assert_ne!(human_press_profile(9, &c.human), human_press_profile(10, &c.human));
    }

    #[test]
    fn human_frame_counts_and_tilt_stay_in_range() {
        let c = Config::reference();
        let mut hist = [0usize; 10];
        for seed in 0..1000 {
            let p = human_press_profile(seed, &c.human);
            assert!((20..=30).contains(&p.loading_frames));
            assert!(p.tilt_rad >= 0.0 && p.tilt_rad <= c.human.max_tilt_rad);
            hist[((p.tilt_rad / c.human.max_tilt_rad * 10.0) as usize).min(9)] += 1;
            assert!(p.progress.windows(2).all(|w| w[1] >= w[0]));
            assert!((p.progress.last().unwrap() - 1.0).abs() < 1e-12);
        }
        // Every decile of the allowed range is populated.
        assert!(hist.iter().all(|&n| n > 50), "{hist:?}");
    }

    #[test]
    fn robot_speed_and_threshold_in_range() {
        let c = Config::reference();
        for seed in 0..200 {
            let p = robot_press_profile(seed, &c.robot);
            assert!((5.0..=7.0).contains(&p.speed_mm_per_s));
            assert!((5.0..=9.0).contains(&p.max_force_n));
            assert_eq!(p.tilt_rad, 0.0);
            assert_eq!(p.lateral_drift_mm_per_s, 0.0);
        }
    }

    #[test]
    fn robot_approach_is_linear() {
        let mut p = robot_press_profile(3, &Config::reference().robot);
        p.speed_mm_per_s = 6.0;
        let first = p.lead_in_frames - 1;
        for k in 0..20 {
            let d = p.robot_approach(first + k);
            assert!((d - 0.2 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn robot_stops_at_first_threshold_crossing() {
        let s = sim();
        let c = Config::reference();
        let shape = IndenterShape::Cylinder {
            radius_mm: 10.0,
            axis_angle_rad: 0.3,
        };
        let h = Shore00::new(60.0).unwrap();
        let p = robot_press_profile(11, &c.robot);
        let seq = s.synth_sequence(&shape, None, h, &p, GroupTag::Basic).unwrap();
        assert!(!seq.saturated);
        // Recompute the force series from the closed form.
        let pair = s.pair(h).unwrap();
        let e_star = pair.e_star() * 1e-6;
        let length = s.spec().sensing_area_mm.0 / 0.3f64.cos();
        let length = length.min(s.spec().sensing_area_mm.1 / 0.3f64.sin());
        let stop = (0..)
            .find(|&k| std::f64::consts::FRAC_PI_4 * e_star * p.robot_approach(k) * length >= p.max_force_n)
            .unwrap();
        assert_eq!(seq.stop_index(), stop);
    }

    #[test]
    fn zero_length_press_is_one_flat_frame() {
        let s = sim();
        let mut p = human_press_profile(1, &Config::reference().human);
        p.loading_frames = 0;
        p.progress.clear();
        p.lead_in_frames = 1;
        let seq = s.synth_sequence(&sphere(10.0), None, Shore00::new(30.0).unwrap(), &p, GroupTag::Basic).unwrap();
        assert_eq!(seq.frames.len(), 1);
        assert_eq!(seq.intensity_series, vec![0.0]);
    }

    #[test]
    fn harder_sample_changes_the_image_more() {
        let s = sim();
        let c = Config::reference();
        let p = robot_press_profile(5, &c.robot);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tex = random_texture(&mut rng, &c.texture);
        let last = |h: f64| {
            let seq = s
                .synth_sequence(&sphere(10.0), tex.as_ref(), Shore00::new(h).unwrap(), &p, GroupTag::Basic)
                .unwrap();
            *seq.intensity_series.last().unwrap()
        };
        assert!(last(80.0) > last(10.0));
    }

    #[test]
    fn tilt_shifts_the_contact_patch() {
        let s = sim();
        let mut p = human_press_profile(4, &Config::reference().human);
        p.tilt_rad = 0.3;
        p.tilt_azimuth_rad = 0.0;
        p.lateral_drift_mm_per_s = 0.0;
        p.center_offset_mm = (0.0, 0.0);
        let k = p.lead_in_frames + p.loading_frames - 1;
        let pose = ContactPose {
            center_mm: p.center_at(k, s.spec().thickness_mm),
        };
        let pair = s.pair(Shore00::new(50.0).unwrap()).unwrap();
        let state = contact_unchecked(&sphere(10.0), &pair, 1.0, s.spec()).unwrap();
        let map = gel_surface_at(&sphere(10.0), &state, s.spec(), &pose, None).unwrap();
        let (cx, cy) = map.centroid_mm().unwrap();
        let expected = 0.3f64.tan() * 2.4;
        let offset = cx.hypot(cy);
        assert!((offset - expected).abs() < 0.2 * expected, "{offset} vs {expected}");
    }

    #[test]
    fn intensity_rises_during_loading() {
        let s = sim();
        let c = Config::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for seed in 0..4 {
            let p = human_press_profile(seed, &c.human);
            let tex = random_texture(&mut rng, &c.texture);
            let seq = s
                .synth_sequence(&sphere(14.0), tex.as_ref(), Shore00::new(40.0).unwrap(), &p, GroupTag::Basic)
                .unwrap();
            assert_eq!(seq.frames.len(), seq.intensity_series.len());
            let first = seq.intensity_series[p.lead_in_frames + 2];
            assert!(*seq.intensity_series.last().unwrap() > first);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let s = sim();
        let c = Config::reference();
        let p = human_press_profile(21, &c.human);
        let shape = sphere(7.0);
        let h = Shore00::new(33.0).unwrap();
        let a = s.synth_sequence(&shape, None, h, &p, GroupTag::Basic).unwrap();
        let b = s.synth_sequence(&shape, None, h, &p, GroupTag::Basic).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.intensity_series, b.intensity_series);
    }

    #[test]
    fn saturated_press_is_cut_short() {
        let s = sim();
        let mut p = human_press_profile(2, &Config::reference().human);
        p.max_force_n = 40.0;
        let seq = s
            .synth_sequence(&sphere(2.5), None, Shore00::new(87.0).unwrap(), &p, GroupTag::Basic)
            .unwrap();
        assert!(seq.saturated);
        assert!(seq.frames.len() < p.lead_in_frames + p.loading_frames);
        let limit = s.spec().thickness_mm / s.pair(seq.label).unwrap().gel_share();
        assert!(seq.approach_mm.iter().all(|d| *d <= limit));
    }

    #[test]
    fn ridge_sharpness_narrows_crests() {
        let width = |s: f64| {
            (0..1000)
                .filter(|i| ridge_profile(std::f64::consts::TAU * *i as f64 / 1000.0, s) > 0.5)
                .count()
        };
        assert!(width(6.0) < width(1.5));
        assert!(ridge_profile(std::f64::consts::FRAC_PI_2, 5.0) == 1.0);
    }
}
