//! Segmentation corruption and mask overlap measures.

use rand::Rng;

use super::render::{rng_for, STREAM_MASK};
use super::spec::NoiseModel;
use crate::geometry::{PointCloud, RigidTransform};
use crate::scene::{CameraIntrinsics, LabelImage};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskQuality {
    pub class_id: u8,
    /// `|pred ∩ true| / |pred|`; 1 when nothing is predicted.
    pub precision: f64,
    /// `|pred ∩ true| / |true|`; 1 when the class is absent.
    pub recall: f64,
}

/// Per-class precision and recall of `predicted` against `truth`, for every
/// class present in either.
pub fn mask_quality(truth: &LabelImage, predicted: &LabelImage) -> Vec<MaskQuality> {
    let mut classes = truth.classes();
    classes.extend(predicted.classes());
    classes.sort_unstable();
    classes.dedup();
    classes
        .into_iter()
        .map(|c| {
            let (mut tp, mut pred, mut tru) = (0usize, 0usize, 0usize);
            for (&t, &p) in truth.data.iter().zip(&predicted.data) {
                tp += (t == c && p == c) as usize;
                pred += (p == c) as usize;
                tru += (t == c) as usize;
            }
            let ratio = |n: usize, d: usize| if d == 0 { 1.0 } else { n as f64 / d as f64 };
            MaskQuality { class_id: c, precision: ratio(tp, pred), recall: ratio(tp, tru) }
        })
        .collect()
}

/// Grows every class into neighbouring background pixels within a square of
/// radius `k`. Where classes compete the lowest id wins.
pub fn dilate(labels: &LabelImage, k: usize) -> LabelImage {
    if k == 0 {
        return labels.clone();
    }
    let (w, h) = (labels.width, labels.height);
    let mut out = labels.clone();
    for v in 0..h {
        for u in 0..w {
            if labels.data[v * w + u] != 0 {
                continue;
            }
            let mut best = 0u8;
            for y in v.saturating_sub(k)..(v + k + 1).min(h) {
                for x in u.saturating_sub(k)..(u + k + 1).min(w) {
                    let l = labels.data[y * w + x];
                    if l != 0 && (best == 0 || l < best) {
                        best = l;
                    }
                }
            }
            out.data[v * w + u] = best;
        }
    }
    out
}

/// Clears class pixels with a differently labelled pixel within a square of
/// radius `k`. Pixels beyond the image border do not erode.
pub fn erode(labels: &LabelImage, k: usize) -> LabelImage {
    if k == 0 {
        return labels.clone();
    }
    let (w, h) = (labels.width, labels.height);
    let mut out = labels.clone();
    for v in 0..h {
        for u in 0..w {
            let l = labels.data[v * w + u];
            if l == 0 {
                continue;
            }
            'scan: for y in v.saturating_sub(k)..(v + k + 1).min(h) {
                for x in u.saturating_sub(k)..(u + k + 1).min(w) {
                    if labels.data[y * w + x] != l {
                        out.data[v * w + u] = 0;
                        break 'scan;
                    }
                }
            }
        }
    }
    out
}

/// Dilation, then erosion, then random flips to another label present in the
/// input (or background). Deterministic per seed.
pub fn corrupt_mask(labels: &LabelImage, noise: &NoiseModel, seed: u64) -> (LabelImage, Vec<MaskQuality>) {
    let mut out = erode(&dilate(labels, noise.mask_dilate), noise.mask_erode);
    if noise.mask_flip_rate > 0.0 {
        let mut palette = vec![0u8];
        palette.extend(labels.classes());
        let mut rng = rng_for(seed, 0, STREAM_MASK);
        for l in out.data.iter_mut() {
            if rng.random::<f64>() < noise.mask_flip_rate && palette.len() > 1 {
                let mut pick = palette[rng.random_range(0..palette.len() - 1)];
                if pick == *l {
                    pick = palette[palette.len() - 1];
                }
                *l = pick;
            }
        }
    }
    let quality = mask_quality(labels, &out);
    (out, quality)
}

/// Intersection over union of two boolean masks; 0 when both are empty.
pub fn iou(a: &[bool], b: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Pixel footprint of `cloud` placed at `pose`. Each point covers a square
/// of side `splat` meters at its depth (at least one pixel).
pub fn project_footprint(pose: &RigidTransform, cloud: &PointCloud, k: &CameraIntrinsics, splat: f64) -> Vec<bool> {
    let mut mask = vec![false; k.width * k.height];
    for p in cloud.points() {
        let q = pose.apply(p);
        if q.z <= 0.0 {
            continue;
        }
        let (u, v) = k.project(&q);
        let r = (0.5 * splat * k.fx / q.z).max(0.5);
        let (u0, u1) = ((u - r + 0.5).floor().max(0.0), (u + r - 0.5).ceil().min(k.width as f64 - 1.0));
        let (v0, v1) = ((v - r + 0.5).floor().max(0.0), (v + r - 0.5).ceil().min(k.height as f64 - 1.0));
        if u1 < u0 || v1 < v0 {
            continue;
        }
        for y in v0 as usize..=v1 as usize {
            for x in u0 as usize..=u1 as usize {
                mask[y * k.width + x] = true;
            }
        }
    }
    mask
}

/// IOU between the projected model and the pixels of `class_id` in `mask`.
pub fn iou_of_projection(
    pose: &RigidTransform,
    model: &PointCloud,
    k: &CameraIntrinsics,
    mask: &LabelImage,
    class_id: u8,
    splat: f64,
) -> f64 {
    let footprint = project_footprint(pose, model, k, splat);
    let class: Vec<bool> = mask.data.iter().map(|&l| l == class_id).collect();
    iou(&footprint, &class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disk(w: usize, h: usize, r: f64) -> LabelImage {
        let mut l = LabelImage::background(w, h);
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        for v in 0..h {
            for u in 0..w {
                if ((u as f64 - cx).powi(2) + (v as f64 - cy).powi(2)).sqrt() <= r {
                    l.data[v * w + u] = 1;
                }
            }
        }
        l
    }

    #[test]
    fn zero_corruption_is_identity() {
        let l = disk(40, 30, 8.0);
        let (out, q) = corrupt_mask(&l, &NoiseModel::none(), 1);
        assert_eq!(out, l);
        assert_eq!(q, vec![MaskQuality { class_id: 1, precision: 1.0, recall: 1.0 }]);
    }

    #[test]
    fn dilation_keeps_recall() {
        let l = disk(40, 30, 8.0);
        let noise = NoiseModel { mask_dilate: 3, ..NoiseModel::none() };
        let (out, q) = corrupt_mask(&l, &noise, 1);
        let true_px = l.data.iter().filter(|&&x| x == 1).count();
        let pred_px = out.data.iter().filter(|&&x| x == 1).count();
        assert_eq!(q[0].recall, 1.0);
        assert_eq!(q[0].precision, true_px as f64 / pred_px as f64);
        assert!(q[0].precision < 1.0);
    }

    #[test]
    fn erosion_keeps_precision() {
        let l = disk(40, 30, 8.0);
        let noise = NoiseModel { mask_erode: 3, ..NoiseModel::none() };
        let (out, q) = corrupt_mask(&l, &noise, 1);
        let true_px = l.data.iter().filter(|&&x| x == 1).count();
        let pred_px = out.data.iter().filter(|&&x| x == 1).count();
        assert_eq!(q[0].precision, 1.0);
        assert_eq!(q[0].recall, pred_px as f64 / true_px as f64);
        assert!(q[0].recall < 1.0);
    }

    #[test]
    fn erosion_matches_brute_definition() {
        let l = disk(21, 17, 6.0);
        let e = erode(&l, 2);
        for v in 0..17i64 {
            for u in 0..21i64 {
                let keep = l.get(u as usize, v as usize) == 1
                    && (-2..=2).all(|dy| {
                        (-2..=2).all(|dx| {
                            let (x, y) = (u + dx, v + dy);
                            x < 0 || y < 0 || x >= 21 || y >= 17 || l.get(x as usize, y as usize) == 1
                        })
                    });
                assert_eq!(e.get(u as usize, v as usize) == 1, keep);
            }
        }
    }

    #[test]
    fn iou_cases() {
        let n = 8;
        let left: Vec<bool> = (0..n).map(|i| i < 4).collect();
        let middle: Vec<bool> = (0..n).map(|i| (2..6).contains(&i)).collect();
        assert_eq!(iou(&left, &left), 1.0);
        assert_eq!(iou(&left, &left.iter().map(|x| !x).collect::<Vec<_>>()), 0.0);
        assert!((iou(&left, &middle) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou(&[false; 3], &[false; 3]), 0.0);
    }

    #[test]
    fn single_point_projection() {
        let k = CameraIntrinsics::new(100.0, 100.0, 5.0, 5.0, 10, 10).unwrap();
        let cloud = PointCloud::new(vec![crate::Point3::new(0.0, 0.0, 1.0)]).unwrap();
        let mut mask = LabelImage::background(10, 10);
        mask.data[5 * 10 + 5] = 3;
        assert_eq!(iou_of_projection(&RigidTransform::identity(), &cloud, &k, &mask, 3, 0.0), 1.0);
        // a 3 cm square at 1 m and f = 100 covers 3×3 pixels
        let fp = project_footprint(&RigidTransform::identity(), &cloud, &k, 0.03);
        assert_eq!(fp.iter().filter(|&&b| b).count(), 9);
    }

    proptest! {
        #[test]
        fn dilate_then_quality_bounds(seed in 0u64..200, k in 0usize..3, flip in 0.0f64..0.2) {
            let l = disk(24, 18, 5.0);
            let noise = NoiseModel { mask_dilate: k, mask_flip_rate: flip, ..NoiseModel::none() };
            let (_, q) = corrupt_mask(&l, &noise, seed);
            for m in q {
                prop_assert!((0.0..=1.0).contains(&m.precision));
                prop_assert!((0.0..=1.0).contains(&m.recall));
            }
        }
    }
}
