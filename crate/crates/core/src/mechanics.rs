//! Contact mechanics between the gel and a sample object.
//!
//! Hardness is mapped to a Young's modulus, the two bodies are combined into
//! an effective modulus, and the mutual approach is split between them in
//! proportion to their compliances. Only the gel's share of the deformation
//! is visible to the sensor, which is what makes soft samples look shallow
//! and flattened next to hard ones pressed equally far.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, GelSection, MaterialsSection};

/// Newtons per (Pa * mm^2).
const PA_MM2_TO_N: f64 = 1e-6;
/// Gap assigned to points the indenter never reaches.
const FAR_GAP_MM: f64 = 1.0e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanicsError {
    #[error("hardness {0} is outside the Shore 00 scale")]
    HardnessOutOfRange(f64),
    #[error("invalid elastic body: {0}")]
    InvalidBody(String),
    #[error("invalid indenter: {0}")]
    InvalidShape(String),
    #[error("invalid approach {0} mm")]
    InvalidApproach(f64),
    #[error("press too deep: gel indentation {depth_mm:.4} mm exceeds thickness {thickness_mm} mm")]
    Saturated { depth_mm: f64, thickness_mm: f64 },
    #[error("contact state does not match the indenter: {0}")]
    ShapeMismatch(String),
}

/// Durometer reading on the Shore 00 scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Shore00(f64);

impl Shore00 {
    pub fn new(value: f64) -> Result<Self, MechanicsError> {
        if value.is_finite() && (0.0..=100.0).contains(&value) {
            Ok(Shore00(value))
        } else {
            Err(MechanicsError::HardnessOutOfRange(value))
        }
    }

    /// Clamps into the scale; NaN maps to 0.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Shore00(0.0)
        } else {
            Shore00(value.clamp(0.0, 100.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Shore00 {
    type Error = MechanicsError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Shore00::new(v)
    }
}

impl From<Shore00> for f64 {
    fn from(h: Shore00) -> f64 {
        h.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticBody {
    pub youngs_modulus_pa: f64,
    pub poisson_ratio: f64,
}

impl ElasticBody {
    pub fn new(youngs_modulus_pa: f64, poisson_ratio: f64) -> Result<Self, MechanicsError> {
        if !(youngs_modulus_pa.is_finite() && youngs_modulus_pa > 0.0) {
            return Err(MechanicsError::InvalidBody(format!(
                "Young's modulus {youngs_modulus_pa} must be finite and positive"
            )));
        }
        if !(0.0..0.5).contains(&poisson_ratio) {
            return Err(MechanicsError::InvalidBody(format!(
                "Poisson ratio {poisson_ratio} outside [0, 0.5)"
            )));
        }
        Ok(ElasticBody {
            youngs_modulus_pa,
            poisson_ratio,
        })
    }

    /// (1 - nu^2) / E, in 1/Pa.
    pub fn compliance(&self) -> f64 {
        (1.0 - self.poisson_ratio * self.poisson_ratio) / self.youngs_modulus_pa
    }
}

/// Two-step empirical conversion: a linear map from Shore 00 to an
/// approximate Shore A reading, followed by the Gent relation
/// `E = 0.0981 (56 + 7.62336 S) / (0.137505 (254 - 2.54 S))` MPa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusMapping {
    pub shore_a_slope: f64,
    pub shore_a_offset: f64,
    pub poisson_ratio: f64,
}

impl Default for ModulusMapping {
    fn default() -> Self {
        ModulusMapping::from_config(&Config::reference().materials)
    }
}

impl ModulusMapping {
    pub fn from_config(m: &MaterialsSection) -> Self {
        ModulusMapping {
            shore_a_slope: m.shore_a_slope,
            shore_a_offset: m.shore_a_offset,
            poisson_ratio: m.poisson_ratio,
        }
    }

    pub fn shore_a(&self, h: f64) -> f64 {
        self.shore_a_slope * h + self.shore_a_offset
    }

    pub fn modulus_pa(&self, h: f64) -> f64 {
        gent_modulus_pa(self.shore_a(h))
    }

    pub fn body(&self, h: Shore00) -> Result<ElasticBody, MechanicsError> {
        let v = h.value();
        if !(v > 0.0 && v < 100.0) {
            return Err(MechanicsError::HardnessOutOfRange(v));
        }
        ElasticBody::new(self.modulus_pa(v), self.poisson_ratio)
    }

    /// Numerical inverse of [`ModulusMapping::modulus_pa`] by bisection.
    pub fn hardness_for_modulus(&self, youngs_modulus_pa: f64) -> Result<Shore00, MechanicsError> {
        let (mut lo, mut hi) = (1e-12, 100.0 - 1e-12);
        if !(youngs_modulus_pa > self.modulus_pa(lo) && youngs_modulus_pa < self.modulus_pa(hi)) {
            return Err(MechanicsError::InvalidBody(format!(
                "modulus {youngs_modulus_pa} Pa has no Shore 00 preimage"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.modulus_pa(mid) < youngs_modulus_pa {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Shore00::new(0.5 * (lo + hi))
    }
}

/// Gent relation, Shore A to Young's modulus in Pa.
pub fn gent_modulus_pa(shore_a: f64) -> f64 {
    1.0e6 * 0.0981 * (56.0 + 7.62336 * shore_a) / (0.137505 * (254.0 - 2.54 * shore_a))
}

/// Shore 00 to an elastic body with the reference mapping.
pub fn shore00_to_modulus(h: Shore00) -> Result<ElasticBody, MechanicsError> {
    ModulusMapping::default().body(h)
}

/// Hertz effective modulus: `1/E* = (1 - nu_g^2)/E_g + (1 - nu_o^2)/E_o`.
pub fn effective_modulus(gel: &ElasticBody, obj: &ElasticBody) -> f64 {
    1.0 / (gel.compliance() + obj.compliance())
}

/// Gel and sample in contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPair {
    pub gel: ElasticBody,
    pub object: ElasticBody,
}

impl ContactPair {
    pub fn e_star(&self) -> f64 {
        effective_modulus(&self.gel, &self.object)
    }

    /// Fraction of the mutual approach absorbed by the gel.
    pub fn gel_share(&self) -> f64 {
        let kg = self.gel.compliance();
        kg / (kg + self.object.compliance())
    }
}

/// Sample surface in contact with the gel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndenterShape {
    Sphere {
        radius_mm: f64,
    },
    Cylinder {
        radius_mm: f64,
        axis_angle_rad: f64,
    },
    Flat,
    Edge {
        dihedral_rad: f64,
        tip_rounding_mm: f64,
        axis_angle_rad: f64,
    },
    Corner {
        solid_angle_sr: f64,
        tip_rounding_mm: f64,
    },
    HeightField(HeightField),
}

/// Sample surface heights (mm, positive towards the gel) on a square grid
/// centred on the contact point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHeightField")]
pub struct HeightField {
    pub cols: usize,
    pub rows: usize,
    pub pitch_mm: f64,
    pub heights: Vec<f64>,
    #[serde(skip_serializing)]
    top: f64,
}

#[derive(Deserialize)]
struct RawHeightField {
    cols: usize,
    rows: usize,
    pitch_mm: f64,
    heights: Vec<f64>,
}

impl TryFrom<RawHeightField> for HeightField {
    type Error = MechanicsError;
    fn try_from(r: RawHeightField) -> Result<Self, MechanicsError> {
        HeightField::new(r.cols, r.rows, r.pitch_mm, r.heights)
    }
}

impl HeightField {
    pub fn new(cols: usize, rows: usize, pitch_mm: f64, heights: Vec<f64>) -> Result<Self, MechanicsError> {
        let top = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let f = HeightField {
            cols,
            rows,
            pitch_mm,
            heights,
            top,
        };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<(), MechanicsError> {
        if self.cols < 2 || self.rows < 2 || self.heights.len() != self.cols * self.rows {
            return Err(MechanicsError::InvalidShape("height field grid is not rectangular".into()));
        }
        if !(self.pitch_mm > 0.0) || self.heights.iter().any(|h| !h.is_finite()) {
            return Err(MechanicsError::InvalidShape("height field must be finite with positive pitch".into()));
        }
        Ok(())
    }

    pub fn max_height(&self) -> f64 {
        self.top
    }

    /// Bilinear height at a point relative to the field centre.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let fx = x / self.pitch_mm + (self.cols - 1) as f64 / 2.0;
        let fy = y / self.pitch_mm + (self.rows - 1) as f64 / 2.0;
        if fx < 0.0 || fy < 0.0 || fx > (self.cols - 1) as f64 || fy > (self.rows - 1) as f64 {
            return None;
        }
        let (c0, r0) = ((fx.floor() as usize).min(self.cols - 2), (fy.floor() as usize).min(self.rows - 2));
        let (tx, ty) = (fx - c0 as f64, fy - r0 as f64);
        let at = |c: usize, r: usize| self.heights[r * self.cols + c];
        let top = at(c0, r0) * (1.0 - tx) + at(c0 + 1, r0) * tx;
        let bottom = at(c0, r0 + 1) * (1.0 - tx) + at(c0 + 1, r0 + 1) * tx;
        Some(top * (1.0 - ty) + bottom * ty)
    }
}

/// Profile of a rounded wedge or cone: gap above the tip at lateral distance
/// `d` for a tip circle of radius `rho` and faces at `half_angle` from the
/// vertical.
fn rounded_tip_gap(d: f64, rho: f64, half_angle: f64) -> f64 {
    let d = d.abs();
    let (s, c) = half_angle.sin_cos();
    let d_tangent = rho * c;
    if d <= d_tangent {
        rho - (rho * rho - d * d).max(0.0).sqrt()
    } else {
        rho * (1.0 - s) + (d - d_tangent) * c / s
    }
}

/// Inverse of [`rounded_tip_gap`].
fn rounded_tip_distance(gap: f64, rho: f64, half_angle: f64) -> f64 {
    let (s, c) = half_angle.sin_cos();
    let gap_tangent = rho * (1.0 - s);
    if gap <= gap_tangent {
        (rho * rho - (rho - gap) * (rho - gap)).max(0.0).sqrt()
    } else {
        rho * c + (gap - gap_tangent) * s / c
    }
}

fn corner_half_angle(solid_angle_sr: f64) -> f64 {
    (1.0 - solid_angle_sr / (2.0 * std::f64::consts::PI)).acos()
}

impl IndenterShape {
    pub fn validate(&self) -> Result<(), MechanicsError> {
        let bad = |m: String| Err(MechanicsError::InvalidShape(m));
        match self {
            IndenterShape::Sphere { radius_mm } | IndenterShape::Cylinder { radius_mm, .. } => {
                if !(radius_mm.is_finite() && *radius_mm > 0.0) {
                    return bad(format!("radius {radius_mm} must be positive"));
                }
            }
            IndenterShape::Flat => {}
            IndenterShape::Edge {
                dihedral_rad,
                tip_rounding_mm,
                ..
            } => {
                if !(*dihedral_rad > 0.0 && *dihedral_rad < std::f64::consts::PI) || !(*tip_rounding_mm > 0.0) {
                    return bad("edge needs a dihedral in (0, pi) and positive rounding".into());
                }
            }
            IndenterShape::Corner {
                solid_angle_sr,
                tip_rounding_mm,
            } => {
                if !(*solid_angle_sr > 0.0 && *solid_angle_sr < 2.0 * std::f64::consts::PI) || !(*tip_rounding_mm > 0.0) {
                    return bad("corner needs a solid angle in (0, 2 pi) and positive rounding".into());
                }
            }
            IndenterShape::HeightField(f) => f.validate()?,
        }
        Ok(())
    }

    /// Short family name used in manifests and split logic.
    pub fn family(&self) -> &'static str {
        match self {
            IndenterShape::Sphere { .. } => "sphere",
            IndenterShape::Cylinder { .. } => "cylinder",
            IndenterShape::Flat => "flat",
            IndenterShape::Edge { .. } => "edge",
            IndenterShape::Corner { .. } => "corner",
            IndenterShape::HeightField(_) => "height_field",
        }
    }

    pub fn radius_mm(&self) -> Option<f64> {
        match self {
            IndenterShape::Sphere { radius_mm } | IndenterShape::Cylinder { radius_mm, .. } => Some(*radius_mm),
            _ => None,
        }
    }

    /// Human-readable tag, e.g. `sphere_r10`.
    pub fn tag(&self) -> String {
        match self.radius_mm() {
            Some(r) => format!("{}_r{}", self.family(), r),
            None => self.family().to_string(),
        }
    }

    /// True for contacts that extend along a line (displacements are normal
    /// to the axis rather than radial).
    pub fn line_axis(&self) -> Option<f64> {
        match self {
            IndenterShape::Cylinder { axis_angle_rad, .. } | IndenterShape::Edge { axis_angle_rad, .. } => {
                Some(*axis_angle_rad)
            }
            _ => None,
        }
    }

    /// Vertical gap between the undeformed sample surface and its lowest
    /// point, at an offset from the contact centre.
    pub fn gap(&self, dx: f64, dy: f64, spec: &GelSpec) -> f64 {
        match self {
            IndenterShape::Sphere { radius_mm } => (dx * dx + dy * dy) / (2.0 * radius_mm),
            IndenterShape::Cylinder {
                radius_mm,
                axis_angle_rad,
            } => {
                let d = perpendicular_distance(dx, dy, *axis_angle_rad);
                d * d / (2.0 * radius_mm)
            }
            IndenterShape::Flat => {
                let excess = ((dx * dx + dy * dy).sqrt() - spec.flat_footprint_radius_mm).max(0.0);
                excess * excess / (2.0 * spec.tip_rounding_mm)
            }
            IndenterShape::Edge {
                dihedral_rad,
                tip_rounding_mm,
                axis_angle_rad,
            } => rounded_tip_gap(
                perpendicular_distance(dx, dy, *axis_angle_rad),
                *tip_rounding_mm,
                dihedral_rad / 2.0,
            ),
            IndenterShape::Corner {
                solid_angle_sr,
                tip_rounding_mm,
            } => rounded_tip_gap((dx * dx + dy * dy).sqrt(), *tip_rounding_mm, corner_half_angle(*solid_angle_sr)),
            IndenterShape::HeightField(f) => match f.sample(dx, dy) {
                Some(h) => f.max_height() - h,
                None => FAR_GAP_MM,
            },
        }
    }
}

fn perpendicular_distance(dx: f64, dy: f64, axis_angle: f64) -> f64 {
    let (s, c) = axis_angle.sin_cos();
    -dx * s + dy * c
}

/// Sensor geometry and the gel's own material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GelSpec {
    pub hardness: Shore00,
    pub thickness_mm: f64,
    pub sensing_area_mm: (f64, f64),
    pub marker_pitch_mm: f64,
    pub image_resolution_px: (usize, usize),
    pub smoothing_width_mm: f64,
    pub flat_footprint_radius_mm: f64,
    pub tip_rounding_mm: f64,
}

impl Default for GelSpec {
    fn default() -> Self {
        GelSpec::from_config(&Config::reference().gel).expect("reference gel is valid")
    }
}

impl GelSpec {
    pub fn from_config(g: &GelSection) -> Result<Self, MechanicsError> {
        Ok(GelSpec {
            hardness: Shore00::new(g.hardness_shore00)?,
            thickness_mm: g.thickness_mm,
            sensing_area_mm: (g.sensing_width_mm, g.sensing_height_mm),
            marker_pitch_mm: g.marker_pitch_mm,
            image_resolution_px: (g.image_width_px, g.image_height_px),
            smoothing_width_mm: g.smoothing_width_mm,
            flat_footprint_radius_mm: g.flat_footprint_radius_mm,
            tip_rounding_mm: g.tip_rounding_mm,
        })
    }

    /// Millimetres per pixel along x.
    pub fn pixel_pitch_mm(&self) -> f64 {
        self.sensing_area_mm.0 / self.image_resolution_px.0 as f64
    }

    /// Pixel centre in sensor coordinates (origin at the image centre).
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        let p = self.pixel_pitch_mm();
        (
            (col as f64 + 0.5) * p - self.sensing_area_mm.0 / 2.0,
            (row as f64 + 0.5) * p - self.sensing_area_mm.1 / 2.0,
        )
    }

    pub fn half_diagonal_mm(&self) -> f64 {
        0.5 * self.sensing_area_mm.0.hypot(self.sensing_area_mm.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub approach_mm: f64,
    pub force_n: f64,
    pub contact_radius_mm: f64,
    pub gel_share: f64,
}

impl ContactState {
    pub fn gel_depth_mm(&self) -> f64 {
        self.gel_share * self.approach_mm
    }
}

/// Force and contact radius of a sphere on a half-space:
/// `F = 4/3 E* sqrt(R) d^(3/2)`, `a = sqrt(R d)`.
pub fn hertz_sphere(radius_mm: f64, e_star_pa: f64, approach_mm: f64) -> Result<(f64, f64), MechanicsError> {
    if !(approach_mm.is_finite() && approach_mm >= 0.0) {
        return Err(MechanicsError::InvalidApproach(approach_mm));
    }
    if !(radius_mm > 0.0) {
        return Err(MechanicsError::InvalidShape(format!("radius {radius_mm}")));
    }
    let force = 4.0 / 3.0 * e_star_pa * PA_MM2_TO_N * radius_mm.sqrt() * approach_mm.powf(1.5);
    Ok((force, (radius_mm * approach_mm).sqrt()))
}

/// Line-contact load per millimetre of a cylinder: `F' = pi/4 E* d`.
pub fn hertz_cylinder_per_mm(e_star_pa: f64, approach_mm: f64) -> f64 {
    std::f64::consts::FRAC_PI_4 * e_star_pa * PA_MM2_TO_N * approach_mm
}

/// Contact state for any indenter, rejecting presses that would push the gel
/// through its own thickness.
pub fn contact_for_shape(
    shape: &IndenterShape,
    pair: &ContactPair,
    approach_mm: f64,
    spec: &GelSpec,
) -> Result<ContactState, MechanicsError> {
    shape.validate()?;
    if !(approach_mm.is_finite() && approach_mm >= 0.0) {
        return Err(MechanicsError::InvalidApproach(approach_mm));
    }
    let depth = pair.gel_share() * approach_mm;
    if depth > spec.thickness_mm {
        return Err(MechanicsError::Saturated {
            depth_mm: depth,
            thickness_mm: spec.thickness_mm,
        });
    }
    contact_unchecked(shape, pair, approach_mm, spec)
}

/// Same force law as [`contact_for_shape`] without the validation and
/// saturation checks; used to extrapolate loading plans past the gel limit.
pub fn contact_unchecked(
    shape: &IndenterShape,
    pair: &ContactPair,
    approach_mm: f64,
    spec: &GelSpec,
) -> Result<ContactState, MechanicsError> {
    let gel_share = pair.gel_share();
    let e_star = pair.e_star();
    let d = approach_mm;
    let (force_n, radius) = match shape {
        IndenterShape::Sphere { radius_mm } => hertz_sphere(*radius_mm, e_star, d)?,
        IndenterShape::Cylinder {
            radius_mm,
            axis_angle_rad,
        } => {
            let length = chord_length(spec.sensing_area_mm, *axis_angle_rad);
            (hertz_cylinder_per_mm(e_star, d) * length, (radius_mm * d).sqrt())
        }
        IndenterShape::Flat => {
            let a = spec.flat_footprint_radius_mm;
            (2.0 * a * e_star * PA_MM2_TO_N * d, if d > 0.0 { a } else { 0.0 })
        }
        IndenterShape::Edge {
            dihedral_rad,
            tip_rounding_mm,
            ..
        } => {
            let (f, _) = hertz_sphere(*tip_rounding_mm, e_star, d)?;
            (f, rounded_tip_distance(d / 2.0, *tip_rounding_mm, dihedral_rad / 2.0))
        }
        IndenterShape::Corner {
            solid_angle_sr,
            tip_rounding_mm,
        } => {
            let (f, _) = hertz_sphere(*tip_rounding_mm, e_star, d)?;
            (
                f,
                rounded_tip_distance(d / 2.0, *tip_rounding_mm, corner_half_angle(*solid_angle_sr)),
            )
        }
        IndenterShape::HeightField(field) => winkler_contact(field, e_star, d, spec.thickness_mm),
    };
    Ok(ContactState {
        approach_mm,
        force_n,
        contact_radius_mm: radius.min(spec.half_diagonal_mm()),
        gel_share,
    })
}

/// Length of the line through the sensor centre at `angle`, clipped to the
/// sensing rectangle.
fn chord_length(area: (f64, f64), angle: f64) -> f64 {
    let (s, c) = angle.sin_cos();
    let along_x = if c.abs() > 1e-12 { area.0 / c.abs() } else { f64::INFINITY };
    let along_y = if s.abs() > 1e-12 { area.1 / s.abs() } else { f64::INFINITY };
    along_x.min(along_y)
}

/// Bed-of-springs load for an arbitrary surface: the gel layer pushes back
/// with `E*/t` per unit penetration and area.
fn winkler_contact(field: &HeightField, e_star: f64, approach: f64, thickness: f64) -> (f64, f64) {
    let top = field.max_height();
    let cell = field.pitch_mm * field.pitch_mm;
    let mut volume = 0.0;
    let mut patch_cells = 0usize;
    for h in &field.heights {
        let gap = top - h;
        volume += (approach - gap).max(0.0);
        if gap < approach / 2.0 {
            patch_cells += 1;
        }
    }
    let force = e_star * PA_MM2_TO_N / thickness * volume * cell;
    let radius = (patch_cells as f64 * cell / std::f64::consts::PI).sqrt();
    (force, radius)
}

/// Gel surface displacement (mm, positive into the gel) on the image grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    pub width: usize,
    pub height: usize,
    pub pitch_mm: f64,
    pub data: Vec<f64>,
}

impl HeightMap {
    pub fn zeros(width: usize, height: usize, pitch_mm: f64) -> Self {
        HeightMap {
            width,
            height,
            pitch_mm,
            data: vec![0.0; width * height],
        }
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Displacement-weighted centroid in sensor coordinates.
    pub fn centroid_mm(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for row in 0..self.height {
            for col in 0..self.width {
                let w = self.at(col, row);
                let x = (col as f64 + 0.5) * self.pitch_mm - self.width as f64 * self.pitch_mm / 2.0;
                let y = (row as f64 + 0.5) * self.pitch_mm - self.height as f64 * self.pitch_mm / 2.0;
                sx += w * x;
                sy += w * y;
                sw += w;
            }
        }
        (sw > 0.0).then(|| (sx / sw, sy / sw))
    }
}

/// Parallel mold grooves on the sample surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTexture {
    pub amplitude_mm: f64,
    pub wavelength_mm: f64,
    pub orientation_rad: f64,
    pub phase_rad: f64,
}

impl SurfaceTexture {
    /// Groove depth below the surface envelope, in `[-amplitude, 0]`.
    pub fn relief(&self, dx: f64, dy: f64) -> f64 {
        let (s, c) = self.orientation_rad.sin_cos();
        let u = dx * c + dy * s;
        let phase = 2.0 * std::f64::consts::PI * u / self.wavelength_mm + self.phase_rad;
        -self.amplitude_mm * 0.5 * (1.0 - phase.cos())
    }
}

/// Where the sample touches the sensor, in sensor coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactPose {
    pub center_mm: (f64, f64),
}

/// Centred, untextured gel surface.
pub fn gel_surface(shape: &IndenterShape, state: &ContactState, spec: &GelSpec) -> Result<HeightMap, MechanicsError> {
    gel_surface_at(shape, state, spec, &ContactPose::default(), None)
}

/// Gel surface for a contact at `pose`: inside the patch the gel follows the
/// (possibly textured) indenter, outside it the deformation decays through a
/// Gaussian of width `spec.smoothing_width_mm`; the result is scaled by the
/// gel's share of the approach.
pub fn gel_surface_at(
    shape: &IndenterShape,
    state: &ContactState,
    spec: &GelSpec,
    pose: &ContactPose,
    texture: Option<&SurfaceTexture>,
) -> Result<HeightMap, MechanicsError> {
    shape.validate()?;
    if !(state.approach_mm.is_finite() && state.approach_mm >= 0.0) {
        return Err(MechanicsError::ShapeMismatch(format!("approach {}", state.approach_mm)));
    }
    if !(state.gel_share > 0.0 && state.gel_share <= 1.0) {
        return Err(MechanicsError::ShapeMismatch(format!("gel share {}", state.gel_share)));
    }
    let (w, h) = spec.image_resolution_px;
    let pitch = spec.pixel_pitch_mm();
    let mut map = HeightMap::zeros(w, h, pitch);
    if state.approach_mm == 0.0 {
        return Ok(map);
    }
    let delta = state.approach_mm;
    let mut cap = vec![0.0; w * h];
    let mut relief = vec![0.0; w * h];
    for row in 0..h {
        for col in 0..w {
            let (x, y) = spec.pixel_center(col, row);
            let (dx, dy) = (x - pose.center_mm.0, y - pose.center_mm.1);
            let i = row * w + col;
            cap[i] = (delta - shape.gap(dx, dy, spec)).max(0.0);
            if let Some(t) = texture {
                if cap[i] > 0.0 {
                    let weight = (cap[i] / (2.0 * t.amplitude_mm)).min(1.0);
                    relief[i] = t.relief(dx, dy) * weight;
                }
            }
        }
    }
    let smoothed = gaussian_blur(&cap, w, h, spec.smoothing_width_mm / pitch);
    let limit = spec.thickness_mm;
    for (i, out) in map.data.iter_mut().enumerate() {
        let total = cap[i].max(smoothed[i]) + relief[i];
        *out = (state.gel_share * total).clamp(0.0, limit);
    }
    Ok(map)
}

/// Separable Gaussian blur with zero padding.
pub fn gaussian_blur(src: &[f64], width: usize, height: usize, sigma_px: f64) -> Vec<f64> {
    if sigma_px <= 0.0 {
        return src.to_vec();
    }
    let radius = (3.0 * sigma_px).ceil() as isize;
    let kernel: Vec<f64> = {
        let raw: Vec<f64> = (-radius..=radius)
            .map(|k| (-(k * k) as f64 / (2.0 * sigma_px * sigma_px)).exp())
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    };
    let mut tmp = vec![0.0; src.len()];
    for row in 0..height {
        let line = &src[row * width..(row + 1) * width];
        for col in 0..width {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let c = col as isize + k as isize - radius;
                if c >= 0 && (c as usize) < width {
                    acc += kv * line[c as usize];
                }
            }
            tmp[row * width + col] = acc;
        }
    }
    let mut out = vec![0.0; src.len()];
    for row in 0..height {
        for (k, kv) in kernel.iter().enumerate() {
            let r = row as isize + k as isize - radius;
            if r < 0 || r as usize >= height {
                continue;
            }
            let srow = &tmp[r as usize * width..(r as usize + 1) * width];
            let orow = &mut out[row * width..(row + 1) * width];
            for (o, s) in orow.iter_mut().zip(srow) {
                *o += kv * s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(h: f64) -> ElasticBody {
        shore00_to_modulus(Shore00::new(h).unwrap()).unwrap()
    }

    fn gel() -> ElasticBody {
        shore00_to_modulus(GelSpec::default().hardness).unwrap()
    }

    #[test]
    fn modulus_is_monotone_between_sample_extremes() {
        assert!(body(8.0).youngs_modulus_pa < body(87.0).youngs_modulus_pa);
        assert_eq!(body(17.0).poisson_ratio, 0.49);
    }

    #[test]
    fn modulus_at_50_matches_frozen_fixture() {
        // Shore A = 50 * 52/87 - 7 = 22.885057..., then Gent; evaluated
        // independently in double precision.
        let e = body(50.0).youngs_modulus_pa;
        assert!((e - 839_413.139_241_717_9).abs() < 1e-6, "{e}");
    }

    #[test]
    fn out_of_range_hardness_rejected() {
        assert!(Shore00::new(-1.0).is_err());
        assert!(Shore00::new(100.5).is_err());
        let m = ModulusMapping::default();
        assert!(matches!(m.body(Shore00::new(0.0).unwrap()), Err(MechanicsError::HardnessOutOfRange(_))));
        assert!(matches!(m.body(Shore00::new(100.0).unwrap()), Err(MechanicsError::HardnessOutOfRange(_))));
    }

    #[test]
    fn effective_modulus_limits() {
        let g = gel();
        let rigid = ElasticBody::new(1e30, 0.3).unwrap();
        let limit = g.youngs_modulus_pa / (1.0 - 0.49 * 0.49);
        assert!((effective_modulus(&g, &rigid) - limit).abs() / limit < 1e-12);
        let twin = effective_modulus(&g, &g);
        assert!((twin - g.youngs_modulus_pa / (2.0 * (1.0 - 0.49 * 0.49))).abs() / twin < 1e-14);
    }

    #[test]
    fn effective_modulus_brute_force_sum() {
        let a = ElasticBody::new(0.1e6, 0.49).unwrap();
        let b = ElasticBody::new(0.3e6, 0.49).unwrap();
        // Exact rational evaluation: 1 / (0.7599/1e5 + 0.7599/3e5).
        let expected = 1.0 / (0.7599 / 0.1e6 + 0.7599 / 0.3e6);
        assert!((effective_modulus(&a, &b) - expected).abs() < 1e-9);
        assert!((expected - 98_697.196_999_605_2).abs() < 1e-6);
    }

    #[test]
    fn hertz_zero_and_scaling() {
        assert_eq!(hertz_sphere(10.0, 2e5, 0.0).unwrap(), (0.0, 0.0));
        let (f1, a1) = hertz_sphere(10.0, 2e5, 0.7).unwrap();
        let (f2, a2) = hertz_sphere(10.0, 2e5, 1.4).unwrap();
        assert!((f2 / f1 - 2f64.powf(1.5)).abs() < 1e-12);
        assert!((a2 / a1 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn saturation_reported() {
        let pair = ContactPair {
            gel: gel(),
            object: body(80.0),
        };
        let spec = GelSpec::default();
        let err = contact_for_shape(&IndenterShape::Sphere { radius_mm: 10.0 }, &pair, 10.0, &spec).unwrap_err();
        assert!(matches!(err, MechanicsError::Saturated { .. }));
    }

    #[test]
    fn every_shape_has_zero_force_at_zero_approach() {
        let pair = ContactPair {
            gel: gel(),
            object: body(40.0),
        };
        let spec = GelSpec::default();
        for shape in sample_shapes() {
            let s = contact_for_shape(&shape, &pair, 0.0, &spec).unwrap();
            assert_eq!((s.force_n, s.contact_radius_mm), (0.0, 0.0), "{shape:?}");
            let s = contact_for_shape(&shape, &pair, 0.3, &spec).unwrap();
            assert!(s.force_n > 0.0 && s.contact_radius_mm > 0.0, "{shape:?}");
        }
    }

    pub(crate) fn sample_shapes() -> Vec<IndenterShape> {
        let field = {
            let n = 41;
            let heights = (0..n * n)
                .map(|i| {
                    let (x, y) = ((i % n) as f64 - 20.0, (i / n) as f64 - 20.0);
                    -(x * x + y * y) * 0.25 * 0.25 / 40.0 + 0.05 * (x * 0.8).cos()
                })
                .collect();
            HeightField::new(n, n, 0.25, heights).unwrap()
        };
        vec![
            IndenterShape::Sphere { radius_mm: 10.0 },
            IndenterShape::Cylinder {
                radius_mm: 10.0,
                axis_angle_rad: 0.4,
            },
            IndenterShape::Flat,
            IndenterShape::Edge {
                dihedral_rad: 1.6,
                tip_rounding_mm: 0.5,
                axis_angle_rad: 1.0,
            },
            IndenterShape::Corner {
                solid_angle_sr: 1.6,
                tip_rounding_mm: 0.5,
            },
            IndenterShape::HeightField(field),
        ]
    }

    #[test]
    fn zero_approach_gives_flat_surface() {
        let spec = GelSpec::default();
        let state = ContactState {
            approach_mm: 0.0,
            force_n: 0.0,
            contact_radius_mm: 0.0,
            gel_share: 0.4,
        };
        let map = gel_surface(&IndenterShape::Sphere { radius_mm: 5.0 }, &state, &spec).unwrap();
        assert!(map.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gel_share_scales_depth() {
        let spec = GelSpec::default();
        let g = gel();
        let rigid = ContactPair {
            gel: g,
            object: ElasticBody::new(1e30, 0.49).unwrap(),
        };
        let twin = ContactPair { gel: g, object: g };
        let shape = IndenterShape::Sphere { radius_mm: 10.0 };
        let hard = gel_surface(&shape, &contact_for_shape(&shape, &rigid, 1.0, &spec).unwrap(), &spec).unwrap();
        let soft = gel_surface(&shape, &contact_for_shape(&shape, &twin, 1.0, &spec).unwrap(), &spec).unwrap();
        assert!((soft.max() / hard.max() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rigid_sphere_profile_fixture() {
        // Pixel centres are offset by half a pitch from the sensor centre, so
        // use an odd grid where one pixel sits on the contact centre.
        let spec = GelSpec {
            image_resolution_px: (121, 91),
            sensing_area_mm: (121.0 * 0.15, 91.0 * 0.15),
            ..GelSpec::default()
        };
        let state = ContactState {
            approach_mm: 1.5,
            force_n: 1.0,
            contact_radius_mm: (25.0f64 * 1.5).sqrt(),
            gel_share: 1.0,
        };
        let map = gel_surface(&IndenterShape::Sphere { radius_mm: 25.0 }, &state, &spec).unwrap();
        assert!((map.at(60, 45) - 1.5).abs() < 1e-12);
        // r = sqrt(R d) = 6.1237 mm; probe the exact radius along x by
        // interpolating between neighbouring pixel centres.
        let r = (25.0f64 * 1.5).sqrt();
        let c = 60.0 + r / 0.15;
        let (c0, t) = (c.floor() as usize, c - c.floor());
        let v = map.at(c0, 45) * (1.0 - t) + map.at(c0 + 1, 45) * t;
        assert!((v - 0.75).abs() < 2e-3, "{v}");
    }

    #[test]
    fn mapping_round_trips_through_inverse() {
        let m = ModulusMapping::default();
        for h in [0.5, 8.0, 17.0, 42.0, 87.0, 99.5] {
            let back = m.hardness_for_modulus(m.modulus_pa(h)).unwrap().value();
            assert!((back - h).abs() / h < 1e-6, "{h} -> {back}");
        }
    }

    #[test]
    fn rounded_tip_inverse_is_consistent() {
        for half in [0.5, 0.8, 1.2] {
            for gap in [0.01, 0.1, 0.5, 2.0] {
                let d = rounded_tip_distance(gap, 0.5, half);
                assert!((rounded_tip_gap(d, 0.5, half) - gap).abs() < 1e-12);
            }
        }
    }
}
