//! Frame selection: reduce a press video to five baseline-subtracted frames
//! spaced evenly in intensity change between first contact and the peak.

use thiserror::Error;

use crate::config::PipelineSection;
use crate::render::TactileFrame;
use crate::simcam::PressSequence;

/// Number of frames fed to the network.
pub const CLIP_LEN: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("empty sequence")]
    Empty,
    #[error("no frame exceeds the contact threshold {tau}")]
    NoContact { tau: f64 },
    #[error("only {available} usable frames between start and end, need {CLIP_LEN}")]
    ClipTooShort { available: usize },
}

/// Anything that can hand out frames by index along with its intensity
/// series.
pub trait PressVideo {
    fn intensity_series(&self) -> &[f64];
    fn frame(&self, index: usize) -> TactileFrame;
}

impl PressVideo for PressSequence {
    fn intensity_series(&self) -> &[f64] {
        &self.intensity_series
    }

    fn frame(&self, index: usize) -> TactileFrame {
        self.frames[index].clone()
    }
}

/// Start threshold for a sensor with pixel noise `noise_sigma`.
pub fn contact_threshold(cfg: &PipelineSection, noise_sigma: f64) -> f64 {
    (cfg.tau_noise_multiple * noise_sigma).max(cfg.tau_floor)
}

/// First index whose intensity strictly exceeds `tau`.
pub fn find_start(series: &[f64], tau: f64) -> Result<usize, PipelineError> {
    if series.is_empty() {
        return Err(PipelineError::Empty);
    }
    series
        .iter()
        .position(|v| *v > tau)
        .ok_or(PipelineError::NoContact { tau })
}

/// Last index attaining the maximum intensity.
pub fn find_end(series: &[f64]) -> Result<usize, PipelineError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in series.iter().enumerate() {
        if best.map_or(true, |(_, b)| v >= b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i).ok_or(PipelineError::Empty)
}

/// Indices of the five frames: `start`, three frames nearest the quarter
/// quantiles of the intensity range, and `end`. Collisions are resolved by
/// advancing to the next unused frame; ties go to the earlier frame. A frame
/// is never taken so late that the remaining slots cannot be filled.
pub fn select_indices(series: &[f64], start: usize, end: usize) -> Result<[usize; CLIP_LEN], PipelineError> {
    if end >= series.len() || start >= end || end - start + 1 < CLIP_LEN || series[end] <= series[start] {
        return Err(PipelineError::ClipTooShort {
            available: end.saturating_sub(start) + 1,
        });
    }
    let (lo, hi) = (series[start], series[end]);
    let mut out = [start, 0, 0, 0, end];
    for j in 1..CLIP_LEN - 1 {
        let target = lo + (hi - lo) * j as f64 / (CLIP_LEN - 1) as f64;
        let mut nearest = start;
        for i in start..=end {
            if (series[i] - target).abs() < (series[nearest] - target).abs() {
                nearest = i;
            }
        }
        // Leave one frame for each remaining slot.
        out[j] = nearest.max(out[j - 1] + 1).min(end - (CLIP_LEN - 1 - j));
    }
    Ok(out)
}

/// Five selected frames with the start frame subtracted from each.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedClip {
    pub frames: Vec<TactileFrame>,
    pub source_indices: [usize; CLIP_LEN],
    pub endpoint_index: usize,
}

impl SelectedClip {
    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }
}

pub fn select_five<V: PressVideo + ?Sized>(video: &V, start: usize, end: usize) -> Result<SelectedClip, PipelineError> {
    let indices = select_indices(video.intensity_series(), start, end)?;
    let base = video.frame(start);
    let frames = indices
        .iter()
        .map(|&i| {
            let f = video.frame(i);
            TactileFrame {
                width: f.width,
                height: f.height,
                data: f.data.iter().zip(&base.data).map(|(a, b)| a - b).collect(),
            }
        })
        .collect();
    Ok(SelectedClip {
        frames,
        source_indices: indices,
        endpoint_index: end,
    })
}

/// Full selection on an untruncated video.
pub fn select_clip<V: PressVideo + ?Sized>(video: &V, tau: f64) -> Result<SelectedClip, PipelineError> {
    let series = video.intensity_series();
    let start = find_start(series, tau)?;
    let end = find_end(series)?;
    select_five(video, start, end)
}

/// Endpoints usable for augmentation, each paired with the common start.
///
/// An endpoint `e` qualifies when it lies more than three frames after the
/// start, its intensity is at least `2 tau`, and it is the last maximum of
/// the prefix ending at `e`, so the clip equals the one selected from a
/// press physically stopped at `e`.
pub fn truncate_endpoints(series: &[f64], tau: f64) -> Vec<(usize, usize)> {
    let Ok(start) = find_start(series, tau) else {
        return Vec::new();
    };
    let Ok(peak) = find_end(series) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut running_max = f64::NEG_INFINITY;
    for (e, &v) in series.iter().enumerate().take(peak + 1) {
        let is_last_max = v >= running_max;
        running_max = running_max.max(v);
        if e > start + 3 && v >= 2.0 * tau && is_last_max && v > series[start] {
            out.push((start, e));
        }
    }
    out
}

/// Clip of the press truncated after frame `end`.
pub fn clip_at_endpoint<V: PressVideo + ?Sized>(video: &V, tau: f64, end: usize) -> Result<SelectedClip, PipelineError> {
    let series = &video.intensity_series()[..=end.min(video.intensity_series().len().saturating_sub(1))];
    let start = find_start(series, tau)?;
    let end = find_end(series)?;
    select_five(video, start, end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Ramp {
        series: Vec<f64>,
    }

    impl PressVideo for Ramp {
        fn intensity_series(&self) -> &[f64] {
            &self.series
        }
        fn frame(&self, index: usize) -> TactileFrame {
            TactileFrame::filled(2, 1, [self.series[index]; 3])
        }
    }

    /// Independent oracle: every quantile is matched by scanning all frames
    /// and sorting by (distance, index).
    fn brute_force(series: &[f64], start: usize, end: usize) -> [usize; 5] {
        let (lo, hi) = (series[start], series[end]);
        let mut out = [start, 0, 0, 0, end];
        for j in 1..4 {
            let q = lo + (hi - lo) * j as f64 / 4.0;
            let mut cands: Vec<(f64, usize)> = (start..=end).map(|i| ((series[i] - q).abs(), i)).collect();
            cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut pick = cands[0].1;
            while pick <= out[j - 1] {
                pick += 1;
            }
            while pick + (4 - j) > end {
                pick -= 1;
            }
            out[j] = pick;
        }
        out
    }

    #[test]
    fn start_is_first_strict_crossing() {
        assert_eq!(find_start(&[0.0, 0.0, 0.2, 0.5], 0.1), Ok(2));
        assert_eq!(find_start(&[0.0; 4], 0.1), Err(PipelineError::NoContact { tau: 0.1 }));
        assert_eq!(find_start(&[0.0, 0.1, 0.2], 0.0), Ok(1));
        assert_eq!(find_start(&[], 0.0), Err(PipelineError::Empty));
    }

    #[test]
    fn end_is_last_peak() {
        assert_eq!(find_end(&[0.0, 0.3, 0.5, 0.5, 0.4]), Ok(3));
        assert_eq!(find_end(&[0.0, 0.1, 0.2, 0.3]), Ok(3));
    }

    #[test]
    fn linear_ramp_is_split_evenly() {
        let series: Vec<f64> = (0..25).map(|i| i as f64 * 0.01).collect();
        assert_eq!(select_indices(&series, 4, 24), Ok([4, 9, 14, 19, 24]));
    }

    #[test]
    fn five_frame_press_uses_everything() {
        let series = [0.0, 0.2, 0.25, 0.9, 1.0];
        assert_eq!(select_indices(&series, 0, 4), Ok([0, 1, 2, 3, 4]));
        assert!(matches!(
            select_indices(&series, 1, 4),
            Err(PipelineError::ClipTooShort { available: 4 })
        ));
    }

    #[test]
    fn convex_curve_skews_late_and_matches_oracle() {
        let series: Vec<f64> = (0..30).map(|i| (i as f64 / 29.0).powi(3)).collect();
        let got = select_indices(&series, 2, 29).unwrap();
        assert_eq!(got, brute_force(&series, 2, 29));
        // A cubic curve reaches its half-way intensity late in the press.
        assert!(got[2] > (2 + 29) / 2);
    }

    #[test]
    fn clip_is_baseline_subtracted() {
        let video = Ramp {
            series: (0..12).map(|i| i as f64 * 0.1).collect(),
        };
        let clip = select_clip(&video, 0.15).unwrap();
        assert_eq!(clip.source_indices[0], 2);
        assert!(clip.frames[0].data.iter().all(|v| *v == 0.0));
        assert!((clip.frames[4].data[0] - (1.1 - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn flat_video_has_no_contact_and_zero_clip() {
        let flat = Ramp { series: vec![0.0; 10] };
        assert!(matches!(select_clip(&flat, 0.05), Err(PipelineError::NoContact { .. })));
        let video = Ramp {
            series: vec![0.0, 0.2, 0.4, 0.6, 0.8],
        };
        // Subtracting a frame from itself yields zeros.
        let clip = select_five(&video, 0, 4).unwrap();
        assert!(clip.frames[0].data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn augmentation_endpoints() {
        assert!(truncate_endpoints(&[0.0, 0.01, 0.02, 0.03], 0.05).is_empty());
        let series: Vec<f64> = (0..26).map(|i| i as f64 * 0.02).collect();
        let ends = truncate_endpoints(&series, 0.05);
        // Start at 3 (0.06 > 0.05); endpoints 7..=25.
        assert_eq!(ends.first(), Some(&(3, 7)));
        assert_eq!(ends.len(), 19);
    }

    #[test]
    fn truncated_clip_equals_shorter_press() {
        let series: Vec<f64> = (0..26).map(|i| (i as f64 * 0.15).sin().abs() + i as f64 * 0.05).collect();
        let long = Ramp { series: series.clone() };
        for (_, e) in truncate_endpoints(&series, 0.05) {
            let short = Ramp {
                series: series[..=e].to_vec(),
            };
            let a = clip_at_endpoint(&long, 0.05, e);
            let b = select_clip(&short, 0.05);
            assert_eq!(a, b, "endpoint {e}");
            assert_eq!(a.unwrap().endpoint_index, e);
        }
    }

    #[test]
    fn duplicated_frames_select_the_same_frames() {
        let series: Vec<f64> = (0..20).map(|i| (i as f64 / 19.0).powf(1.7)).collect();
        let doubled: Vec<f64> = series.iter().flat_map(|v| [*v, *v]).collect();
        let a = select_clip(&Ramp { series }, 0.01).unwrap();
        let b = select_clip(&Ramp { series: doubled }, 0.01).unwrap();
        assert_eq!(a.frames, b.frames);
    }

    proptest! {
        #[test]
        fn indices_increase_within_bounds(
            steps in proptest::collection::vec(0.0f64..1.0, 5..60),
            start_frac in 0.0f64..0.5,
        ) {
            let mut acc = 0.0;
            let series: Vec<f64> = steps.iter().map(|s| { acc += s; acc }).collect();
            let end = find_end(&series).unwrap();
            let start = ((end as f64) * start_frac) as usize;
            if let Ok(idx) = select_indices(&series, start, end) {
                prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!(idx[0], start);
                prop_assert_eq!(idx[4], end);
            }
        }

        #[test]
        fn matches_brute_force_on_monotone_series(
            steps in proptest::collection::vec(0.001f64..1.0, 8..60),
        ) {
            let mut acc = 0.0;
            let series: Vec<f64> = steps.iter().map(|s| { acc += s; acc }).collect();
            let end = series.len() - 1;
            if let Ok(idx) = select_indices(&series, 0, end) {
                prop_assert_eq!(idx, brute_force(&series, 0, end));
            }
        }

        #[test]
        fn arbitrary_series_never_panics(series in proptest::collection::vec(-1.0f64..1.0, 0..40), tau in 0.0f64..0.5) {
            let _ = truncate_endpoints(&series, tau);
            if let (Ok(s), Ok(e)) = (find_start(&series, tau), find_end(&series)) {
                let _ = select_indices(&series, s, e);
            }
        }
    }
}
