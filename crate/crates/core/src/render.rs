//! Optical model of the sensor: Lambertian shading of the gel surface under
//! three coloured directional lights, with black markers drawn on top.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, RenderSection};
use crate::mechanics::{ContactPose, ContactState, GelSpec, HeightMap, IndenterShape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("frame resolution mismatch: {0}x{1} vs {2}x{3}")]
    ResolutionMismatch(usize, usize, usize, usize),
}

/// RGB image with channels in `[0, 1]`, stored row-major and interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl TactileFrame {
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        TactileFrame { width, height, data }
    }

    pub fn pixel(&self, col: usize, row: usize) -> [f64; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// 8-bit quantisation, as written to PNG.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Self {
        assert_eq!(bytes.len(), width * height * 3, "raw RGB buffer size");
        TactileFrame {
            width,
            height,
            data: bytes.iter().map(|b| *b as f64 / 255.0).collect(),
        }
    }
}

/// Unit surface normals on the height-map grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Normals {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

/// Normals `(-dh/dx, -dh/dy, 1)` normalised, from central differences with
/// one-sided differences on the border.
pub fn normals_from_height(h: &HeightMap) -> Normals {
    let (w, hh, p) = (h.width, h.height, h.pitch_mm);
    let diff = |lo: f64, hi: f64, span: usize| (hi - lo) / (span as f64 * p);
    let mut data = Vec::with_capacity(w * hh);
    for row in 0..hh {
        for col in 0..w {
            let (c0, c1) = (col.saturating_sub(1), (col + 1).min(w - 1));
            let (r0, r1) = (row.saturating_sub(1), (row + 1).min(hh - 1));
            let gx = if c1 > c0 { diff(h.at(c0, row), h.at(c1, row), c1 - c0) } else { 0.0 };
            let gy = if r1 > r0 { diff(h.at(col, r0), h.at(col, r1), r1 - r0) } else { 0.0 };
            let n = (gx * gx + gy * gy + 1.0).sqrt();
            data.push([-gx / n, -gy / n, 1.0 / n]);
        }
    }
    Normals {
        width: w,
        height: hh,
        data,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Light {
    /// Unit vector pointing from the surface towards the light.
    pub direction: [f64; 3],
    pub color: [f64; 3],
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightRig {
    pub lights: [Light; 3],
    pub ambient: [f64; 3],
}

impl Default for LightRig {
    fn default() -> Self {
        LightRig::from_config(&Config::reference().render)
    }
}

impl LightRig {
    /// Red, green and blue lights at the configured azimuths and a common
    /// elevation.
    pub fn from_config(r: &RenderSection) -> Self {
        let el = r.light_elevation_deg.to_radians();
        let colors = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let lights = std::array::from_fn(|k| {
            let az = r.light_azimuths_deg[k].to_radians();
            Light {
                direction: [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()],
                color: colors[k],
                gain: r.light_gain,
            }
        });
        LightRig {
            lights,
            ambient: r.ambient,
        }
    }

    fn radiance(&self, n: [f64; 3]) -> [f64; 3] {
        let mut out = self.ambient;
        for light in &self.lights {
            let d = light.direction;
            let lambert = (n[0] * d[0] + n[1] * d[1] + n[2] * d[2]).max(0.0);
            for c in 0..3 {
                out[c] += light.gain * light.color[c] * lambert;
            }
        }
        out.map(|v| v.clamp(0.0, 1.0))
    }

    /// Colour of undeformed gel.
    pub fn baseline(&self) -> [f64; 3] {
        self.radiance([0.0, 0.0, 1.0])
    }
}

pub fn shade(normals: &Normals, rig: &LightRig) -> TactileFrame {
    let mut data = Vec::with_capacity(normals.data.len() * 3);
    for n in &normals.data {
        data.extend_from_slice(&rig.radiance(*n));
    }
    TactileFrame {
        width: normals.width,
        height: normals.height,
        data,
    }
}

/// Marker dots at rest on a square lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerGrid {
    pub rest_positions: Vec<(f64, f64)>,
    pub dot_radius_mm: f64,
}

impl MarkerGrid {
    /// Lattice at the gel's marker pitch, centred on the sensing area.
    pub fn for_gel(spec: &GelSpec, dot_radius_mm: f64) -> Self {
        let pitch = spec.marker_pitch_mm;
        let nx = (spec.sensing_area_mm.0 / pitch).floor() as usize;
        let ny = (spec.sensing_area_mm.1 / pitch).floor() as usize;
        let mut rest_positions = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                rest_positions.push((
                    (i as f64 - (nx as f64 - 1.0) / 2.0) * pitch,
                    (j as f64 - (ny as f64 - 1.0) / 2.0) * pitch,
                ));
            }
        }
        MarkerGrid {
            rest_positions,
            dot_radius_mm,
        }
    }
}

/// In-plane marker motion law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerMotion {
    pub beta: f64,
    /// Lower bound on the length scale of the displacement field; a bonded
    /// layer cannot shear over less than its own thickness.
    pub min_spread_mm: f64,
}

impl MarkerMotion {
    /// Outward displacement at distance `r` from the contact centre (or axis):
    /// `beta * share * approach * (r/a) * exp((1 - (r/a)^2) / 2)`, peaking at
    /// `r = a` with value `beta * share * approach`.
    pub fn displacement(&self, state: &ContactState, r: f64) -> f64 {
        let scale = state.contact_radius_mm.max(self.min_spread_mm);
        if state.approach_mm == 0.0 || scale <= 0.0 {
            return 0.0;
        }
        let rho = r / scale;
        self.beta * state.gel_share * state.approach_mm * rho * (0.5 * (1.0 - rho * rho)).exp()
    }
}

/// Displaced marker positions for a press. Point contacts push markers
/// radially; line contacts push them normal to the axis.
pub fn advect_markers(
    grid: &MarkerGrid,
    motion: &MarkerMotion,
    state: &ContactState,
    shape: &IndenterShape,
    pose: &ContactPose,
) -> Vec<(f64, f64)> {
    let (cx, cy) = pose.center_mm;
    grid.rest_positions
        .iter()
        .map(|&(x, y)| {
            let (dx, dy) = (x - cx, y - cy);
            match shape.line_axis() {
                Some(axis) => {
                    let (s, c) = axis.sin_cos();
                    let (nx, ny) = (-s, c);
                    let d = dx * nx + dy * ny;
                    let u = motion.displacement(state, d.abs()) * d.signum();
                    (x + u * nx, y + u * ny)
                }
                None => {
                    let r = dx.hypot(dy);
                    if r == 0.0 {
                        return (x, y);
                    }
                    let u = motion.displacement(state, r);
                    (x + u * dx / r, y + u * dy / r)
                }
            }
        })
        .collect()
}

/// Draws anti-aliased black discs over the frame.
pub fn draw_markers(frame: &mut TactileFrame, spec: &GelSpec, positions: &[(f64, f64)], dot_radius_mm: f64) {
    let pitch = spec.pixel_pitch_mm();
    let radius_px = dot_radius_mm / pitch;
    let reach = radius_px + 1.0;
    for &(x, y) in positions {
        let cx = (x + spec.sensing_area_mm.0 / 2.0) / pitch - 0.5;
        let cy = (y + spec.sensing_area_mm.1 / 2.0) / pitch - 0.5;
        let c_lo = (cx - reach).floor().max(0.0) as usize;
        let r_lo = (cy - reach).floor().max(0.0) as usize;
        let c_hi = ((cx + reach).ceil() as isize).min(frame.width as isize - 1);
        let r_hi = ((cy + reach).ceil() as isize).min(frame.height as isize - 1);
        if c_hi < 0 || r_hi < 0 {
            continue;
        }
        for row in r_lo..=r_hi as usize {
            for col in c_lo..=c_hi as usize {
                let dist = (col as f64 - cx).hypot(row as f64 - cy);
                let coverage = (radius_px - dist + 0.5).clamp(0.0, 1.0);
                if coverage > 0.0 {
                    let i = 3 * (row * frame.width + col);
                    for v in &mut frame.data[i..i + 3] {
                        *v *= 1.0 - coverage;
                    }
                }
            }
        }
    }
}

/// Mean absolute per-channel difference between two frames.
pub fn mean_intensity_change(frame: &TactileFrame, reference: &TactileFrame) -> Result<f64, RenderError> {
    if frame.width != reference.width || frame.height != reference.height {
        return Err(RenderError::ResolutionMismatch(
            frame.width,
            frame.height,
            reference.width,
            reference.height,
        ));
    }
    let sum: f64 = frame.data.iter().zip(&reference.data).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / frame.data.len() as f64)
}

/// Adds zero-mean Gaussian pixel noise and re-clamps.
pub fn add_noise<R: Rng>(frame: &mut TactileFrame, sigma: f64, rng: &mut R) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for v in &mut frame.data {
        *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
    }
}

/// Everything needed to turn a height map into a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Renderer {
    pub spec: GelSpec,
    pub rig: LightRig,
    pub markers: MarkerGrid,
    pub motion: MarkerMotion,
    pub markers_enabled: bool,
}

impl Default for Renderer {
    fn default() -> Self {
        let c = Config::reference();
        Renderer::from_config(GelSpec::default(), &c.render)
    }
}

impl Renderer {
    pub fn from_config(spec: GelSpec, r: &RenderSection) -> Self {
        let markers = MarkerGrid::for_gel(&spec, r.marker_dot_radius_mm);
        let motion = MarkerMotion {
            beta: r.marker_beta,
            min_spread_mm: spec.thickness_mm,
        };
        Renderer {
            rig: LightRig::from_config(r),
            markers,
            motion,
            markers_enabled: r.markers_enabled,
            spec,
        }
    }

    /// Noise-free frame of a deformed gel.
    pub fn render(
        &self,
        height: &HeightMap,
        state: &ContactState,
        shape: &IndenterShape,
        pose: &ContactPose,
    ) -> TactileFrame {
        let mut frame = shade(&normals_from_height(height), &self.rig);
        if self.markers_enabled {
            let positions = advect_markers(&self.markers, &self.motion, state, shape, pose);
            draw_markers(&mut frame, &self.spec, &positions, self.markers.dot_radius_mm);
        }
        frame
    }

    /// Frame of the untouched gel.
    pub fn rest_frame(&self) -> TactileFrame {
        let (w, h) = self.spec.image_resolution_px;
        let mut frame = TactileFrame::filled(w, h, self.rig.baseline());
        if self.markers_enabled {
            draw_markers(&mut frame, &self.spec, &self.markers.rest_positions, self.markers.dot_radius_mm);
        }
        frame
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanics::{contact_for_shape, gel_surface, shore00_to_modulus, ContactPair, ElasticBody, Shore00};

    fn ramp(slope: f64) -> HeightMap {
        let mut m = HeightMap::zeros(12, 8, 0.2);
        for row in 0..8 {
            for col in 0..12 {
                m.data[row * 12 + col] = slope * col as f64 * 0.2;
            }
        }
        m
    }

    #[test]
    fn flat_height_gives_vertical_normals() {
        let n = normals_from_height(&HeightMap::zeros(5, 4, 0.1));
        assert!(n.data.iter().all(|v| *v == [0.0, 0.0, 1.0]));
    }

    #[test]
    fn ramp_normals_are_constant() {
        let s = 0.3;
        let n = normals_from_height(&ramp(s));
        let norm = (1.0f64 + s * s).sqrt();
        for v in &n.data {
            assert!((v[0] + s / norm).abs() < 1e-12 && v[1].abs() < 1e-12 && (v[2] - 1.0 / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn hemisphere_normals_match_analytic_sphere() {
        let (radius, pitch, n) = (4.0, 0.05, 200);
        let mut h = HeightMap::zeros(n, n, pitch);
        let centre = n as f64 / 2.0 * pitch;
        let pos = |i: usize| (i as f64 + 0.5) * pitch - centre;
        for row in 0..n {
            for col in 0..n {
                let r2 = pos(col).powi(2) + pos(row).powi(2);
                h.data[row * n + col] = (radius * radius - r2).max(0.0).sqrt();
            }
        }
        let normals = normals_from_height(&h);
        let mut checked = 0;
        for row in 0..n {
            for col in 0..n {
                let (x, y) = (pos(col), pos(row));
                let r = x.hypot(y);
                if r > 0.8 * radius {
                    continue;
                }
                let expected = [x / radius, y / radius, (radius * radius - r * r).sqrt() / radius];
                let got = normals.data[row * n + col];
                let err = (0..3).map(|k| (got[k] - expected[k]).powi(2)).sum::<f64>().sqrt();
                assert!(err < 0.02, "({x},{y}) err {err}");
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn flat_normals_shade_to_baseline() {
        let rig = LightRig::default();
        let frame = shade(&normals_from_height(&HeightMap::zeros(6, 5, 0.1)), &rig);
        let base = rig.baseline();
        for px in frame.data.chunks(3) {
            assert_eq!(px, base);
        }
    }

    #[test]
    fn doubling_light_weight_doubles_its_contribution() {
        let n = Normals {
            width: 1,
            height: 1,
            data: vec![[0.2, -0.1, (1.0f64 - 0.05).sqrt()]],
        };
        let mut rig = LightRig::default();
        rig.ambient = [0.0; 3];
        rig.lights[1].gain = 0.0;
        rig.lights[2].gain = 0.0;
        rig.lights[0].gain = 0.3;
        let one = shade(&n, &rig).data[0];
        rig.lights[0].gain = 0.6;
        let two = shade(&n, &rig).data[0];
        assert!(one > 0.0 && (two - 2.0 * one).abs() < 1e-15);
    }

    #[test]
    fn intensity_change_identity_and_offset() {
        let a = TactileFrame::filled(4, 3, [0.4, 0.5, 0.6]);
        assert_eq!(mean_intensity_change(&a, &a).unwrap(), 0.0);
        let b = TactileFrame::filled(4, 3, [0.5, 0.6, 0.7]);
        assert!((mean_intensity_change(&b, &a).unwrap() - 0.1).abs() < 1e-12);
        let c = TactileFrame::filled(5, 3, [0.5, 0.6, 0.7]);
        assert!(mean_intensity_change(&c, &a).is_err());
    }

    #[test]
    fn markers_rest_when_not_pressed() {
        let spec = GelSpec::default();
        let grid = MarkerGrid::for_gel(&spec, 0.25);
        let state = ContactState {
            approach_mm: 0.0,
            force_n: 0.0,
            contact_radius_mm: 0.0,
            gel_share: 0.5,
        };
        let motion = MarkerMotion {
            beta: 0.3,
            min_spread_mm: 2.4,
        };
        let moved = advect_markers(&grid, &motion, &state, &IndenterShape::Flat, &ContactPose::default());
        assert_eq!(moved, grid.rest_positions);
        assert_eq!(grid.rest_positions.len(), 14 * 10);
    }

    #[test]
    fn marker_displacement_peaks_at_contact_radius() {
        // d/dr [r/a exp((1 - r^2/a^2)/2)] = 0 at r = a, where it equals 1.
        let motion = MarkerMotion {
            beta: 0.3,
            min_spread_mm: 2.4,
        };
        let state = ContactState {
            approach_mm: 1.0,
            force_n: 1.0,
            contact_radius_mm: 4.0,
            gel_share: 0.8,
        };
        assert_eq!(motion.displacement(&state, 0.0), 0.0);
        let peak = motion.displacement(&state, 4.0);
        assert!((peak - 0.3 * 0.8 * 1.0).abs() < 1e-15);
        for r in [3.9, 3.99, 4.01, 4.1, 1.0, 7.0] {
            assert!(motion.displacement(&state, r) < peak);
        }
    }

    #[test]
    fn marker_displacement_scales_with_gel_share() {
        let spec = GelSpec::default();
        let gel = shore00_to_modulus(spec.hardness).unwrap();
        let soft = ContactPair {
            gel,
            object: shore00_to_modulus(Shore00::new(10.0).unwrap()).unwrap(),
        };
        let rigid = ContactPair {
            gel,
            object: ElasticBody::new(1e30, 0.49).unwrap(),
        };
        let shape = IndenterShape::Sphere { radius_mm: 10.0 };
        let r = Renderer::default();
        let max_disp = |pair: &ContactPair| {
            let s = contact_for_shape(&shape, pair, 1.0, &spec).unwrap();
            advect_markers(&r.markers, &r.motion, &s, &shape, &ContactPose::default())
                .iter()
                .zip(&r.markers.rest_positions)
                .map(|(a, b)| (a.0 - b.0).hypot(a.1 - b.1))
                .fold(0.0, f64::max)
        };
        let ratio = max_disp(&soft) / max_disp(&rigid);
        assert!((ratio - soft.gel_share() / rigid.gel_share()).abs() < 1e-12);
    }

    #[test]
    fn rigid_press_changes_image_more_than_soft() {
        let r = Renderer::default();
        let spec = &r.spec;
        let gel = shore00_to_modulus(spec.hardness).unwrap();
        let shape = IndenterShape::Sphere { radius_mm: 10.0 };
        let flat = r.rest_frame();
        let change = |object: ElasticBody| {
            let pair = ContactPair { gel, object };
            let s = contact_for_shape(&shape, &pair, 1.2, spec).unwrap();
            let h = gel_surface(&shape, &s, spec).unwrap();
            mean_intensity_change(&r.render(&h, &s, &shape, &ContactPose::default()), &flat).unwrap()
        };
        let soft = change(shore00_to_modulus(Shore00::new(10.0).unwrap()).unwrap());
        let hard = change(ElasticBody::new(1e30, 0.49).unwrap());
        assert!(hard > soft && soft > 0.0, "{hard} vs {soft}");
    }
}
