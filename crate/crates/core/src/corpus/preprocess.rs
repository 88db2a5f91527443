use rand::seq::SliceRandom;
use rand::Rng;

use super::Label;
use crate::dsp::{FeatureMatrix, FrameConfig};
use crate::seed;
use crate::{Error, Result};

/// Where a segment came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentTag {
    pub utterance: String,
    /// Index of the augmentation variant (0 = baseline).
    pub variant: usize,
    pub label: Label,
}

/// A fixed-length slice of a feature matrix: the classifier's input unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub features: FeatureMatrix,
    pub tag: SegmentTag,
    /// First frame of the segment within its (cropped) source.
    pub start_frame: usize,
}

impl Segment {
    pub fn label(&self) -> Label {
        self.tag.label
    }

    pub fn config(&self) -> &FrameConfig {
        &self.features.config
    }

    fn sort_key(&self) -> (&str, usize, usize) {
        (&self.tag.utterance, self.tag.variant, self.start_frame)
    }
}

/// Crops every matrix to the shortest frame count in the list at a uniformly
/// drawn offset. Offsets are drawn in list order from `seed`.
pub fn random_crop(features: &[FeatureMatrix], seed_value: u64) -> Result<Vec<FeatureMatrix>> {
    if features.is_empty() {
        return Err(Error::invalid("random_crop needs at least one feature matrix"));
    }
    let target = features.iter().map(FeatureMatrix::frames).min().expect("non-empty");
    let mut rng = seed::rng(seed_value);
    Ok(features
        .iter()
        .map(|f| {
            let offset = rng.random_range(0..=f.frames() - target);
            f.slice_frames(offset, target)
        })
        .collect())
}

/// Consecutive non-overlapping segments; a trailing remainder is dropped.
pub fn segmentize(features: &FeatureMatrix, frames_per_segment: usize, tag: &SegmentTag) -> Result<Vec<Segment>> {
    if frames_per_segment == 0 {
        return Err(Error::invalid("frames_per_segment must be at least 1"));
    }
    Ok((0..features.frames() / frames_per_segment)
        .map(|i| Segment {
            features: features.slice_frames(i * frames_per_segment, frames_per_segment),
            tag: tag.clone(),
            start_frame: i * frames_per_segment,
        })
        .collect())
}

/// Equal numbers of class-0 and class-1 segments, sampled without
/// replacement and shuffled.
///
/// Input order does not matter: segments are put in canonical
/// (utterance, variant, start) order before any random draw.
pub fn balanced_sample(mut segments: Vec<Segment>, seed_value: u64) -> Result<Vec<Segment>> {
    segments.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let (mut pos, mut neg): (Vec<_>, Vec<_>) = segments.into_iter().partition(|s| s.label() == 1);
    if neg.is_empty() {
        return Err(Error::invalid("class 0 (control) has no segments"));
    }
    if pos.is_empty() {
        return Err(Error::invalid("class 1 (depressed) has no segments"));
    }
    let mut rng = seed::rng(seed_value);
    let keep = pos.len().min(neg.len());
    neg.shuffle(&mut rng);
    pos.shuffle(&mut rng);
    neg.truncate(keep);
    pos.truncate(keep);
    let mut out = neg;
    out.append(&mut pos);
    out.shuffle(&mut rng);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{FeatureKind, Matrix};

    fn feats(frames: usize, fill: f64) -> FeatureMatrix {
        let data = (0..frames * 2).map(|i| fill + i as f64).collect();
        FeatureMatrix {
            values: Matrix::from_vec(frames, 2, data),
            kind: FeatureKind::LogMel,
            config: FrameConfig::default(),
        }
    }

    fn tag(id: &str, label: Label) -> SegmentTag {
        SegmentTag { utterance: id.into(), variant: 0, label }
    }

    fn segments(pos: usize, neg: usize) -> Vec<Segment> {
        let mut out = Vec::new();
        for i in 0..pos {
            out.extend(segmentize(&feats(4, i as f64), 4, &tag(&format!("p{i}"), 1)).unwrap());
        }
        for i in 0..neg {
            out.extend(segmentize(&feats(4, i as f64), 4, &tag(&format!("n{i}"), 0)).unwrap());
        }
        out
    }

    #[test]
    fn crop_to_shortest() {
        let out = random_crop(&[feats(300, 0.0), feats(200, 1.0)], 3).unwrap();
        assert!(out.iter().all(|f| f.frames() == 200));
        assert_eq!(out[1], feats(200, 1.0));
        assert_eq!(out, random_crop(&[feats(300, 0.0), feats(200, 1.0)], 3).unwrap());
        let equal = [feats(50, 0.0), feats(50, 5.0)];
        assert_eq!(random_crop(&equal, 9).unwrap(), equal.to_vec());
        assert!(random_crop(&[], 0).is_err());
    }

    #[test]
    fn segment_counts() {
        let t = tag("u", 0);
        assert_eq!(segmentize(&feats(360, 0.0), 120, &t).unwrap().len(), 3);
        assert_eq!(segmentize(&feats(119, 0.0), 120, &t).unwrap().len(), 0);
        let s = segmentize(&feats(250, 0.0), 120, &t).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].start_frame, s[1].start_frame), (0, 120));
        assert_eq!(s[1].features.values.row(0), feats(250, 0.0).values.row(120));
        assert_eq!(s[1].features.values.row(119), feats(250, 0.0).values.row(239));
        assert!(segmentize(&feats(10, 0.0), 0, &t).is_err());
    }

    #[test]
    fn balancing() {
        let out = balanced_sample(segments(30, 10), 1).unwrap();
        assert_eq!(out.len(), 20);
        assert_eq!(out.iter().filter(|s| s.label() == 1).count(), 10);

        let out = balanced_sample(segments(5, 5), 1).unwrap();
        let mut ids: Vec<_> = out.iter().map(|s| s.tag.utterance.clone()).collect();
        ids.sort();
        let mut want: Vec<_> = segments(5, 5).iter().map(|s| s.tag.utterance.clone()).collect();
        want.sort();
        assert_eq!(ids, want);

        assert_eq!(balanced_sample(segments(30, 10), 8).unwrap(), balanced_sample(segments(30, 10), 8).unwrap());
    }

    #[test]
    fn balancing_ignores_input_order() {
        let mut reversed = segments(12, 7);
        reversed.reverse();
        assert_eq!(balanced_sample(reversed, 4).unwrap(), balanced_sample(segments(12, 7), 4).unwrap());
    }

    #[test]
    fn missing_class_is_named() {
        let err = balanced_sample(segments(3, 0), 0).unwrap_err().to_string();
        assert!(err.contains("class 0"), "{err}");
        let err = balanced_sample(segments(0, 3), 0).unwrap_err().to_string();
        assert!(err.contains("class 1"), "{err}");
    }
}
