//! Depth back-projection, masked point clouds and centroid grasp points.
//!
//! Camera frame throughout: x right, y down, z forward, millimeters.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::BinaryMask;
use crate::scene::{CameraIntrinsics, RgbdFrame};

/// Default minimum number of points behind a grasp point.
pub const DEFAULT_MIN_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("mask is {mask_w}x{mask_h}, frame is {frame_w}x{frame_h}")]
    DimensionMismatch {
        mask_w: u32,
        mask_h: u32,
        frame_w: u32,
        frame_h: u32,
    },
    #[error("insufficient support: {support} points, need {min_points}")]
    InsufficientSupport { support: usize, min_points: usize },
    #[error("trim fraction {0} outside [0, 0.5)")]
    TrimFraction(f64),
}

/// Points in the camera frame. Every point has `z > 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPoint {
    #[serde(rename = "instance")]
    pub instance_name: String,
    #[serde(rename = "position_mm")]
    pub position: [f64; 3],
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConfig {
    pub min_points: usize,
    /// Fraction trimmed from each end of every axis before averaging.
    pub trim_fraction: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            min_points: DEFAULT_MIN_POINTS,
            trim_fraction: 0.0,
        }
    }
}

/// Lifts pixel `(u, v)` at depth `z` to the camera frame.
#[inline]
pub fn lift(k: &CameraIntrinsics, u: u32, v: u32, z: f64) -> [f64; 3] {
    [
        (f64::from(u) - k.cx) * z / k.fx,
        (f64::from(v) - k.cy) * z / k.fy,
        z,
    ]
}

/// Projects a camera-frame point back to (sub)pixel coordinates.
#[inline]
pub fn project(k: &CameraIntrinsics, p: [f64; 3]) -> (f64, f64) {
    (p[0] * k.fx / p[2] + k.cx, p[1] * k.fy / p[2] + k.cy)
}

/// Every pixel with a depth return, row-major.
pub fn backproject(frame: &RgbdFrame) -> PointCloud {
    let k = frame.intrinsics();
    let w = k.width as usize;
    let points = frame
        .depth()
        .iter()
        .enumerate()
        .filter(|(_, &z)| z > 0)
        .map(|(i, &z)| lift(k, (i % w) as u32, (i / w) as u32, f64::from(z)))
        .collect();
    PointCloud { points }
}

/// Lifted points of the mask's foreground pixels that have a depth return.
pub fn masked_cloud(frame: &RgbdFrame, mask: &BinaryMask) -> Result<PointCloud, GeometryError> {
    if mask.width() != frame.width() || mask.height() != frame.height() {
        return Err(GeometryError::DimensionMismatch {
            mask_w: mask.width(),
            mask_h: mask.height(),
            frame_w: frame.width(),
            frame_h: frame.height(),
        });
    }
    let k = frame.intrinsics();
    let w = k.width as usize;
    let depth = frame.depth();
    let points = mask
        .rle
        .foreground()
        .filter(|&i| depth[i] > 0)
        .map(|i| lift(k, (i % w) as u32, (i / w) as u32, f64::from(depth[i])))
        .collect();
    Ok(PointCloud { points })
}

/// Arithmetic mean of the cloud; errors when fewer than `min_points`.
pub fn centroid(cloud: &PointCloud, min_points: usize) -> Result<[f64; 3], GeometryError> {
    centroid_with(
        cloud,
        GeometryConfig {
            min_points,
            trim_fraction: 0.0,
        },
    )
}

/// Centroid with an optional per-axis trimmed mean.
pub fn centroid_with(
    cloud: &PointCloud,
    config: GeometryConfig,
) -> Result<[f64; 3], GeometryError> {
    let n = cloud.len();
    if n < config.min_points.max(1) {
        return Err(GeometryError::InsufficientSupport {
            support: n,
            min_points: config.min_points.max(1),
        });
    }
    if !(0.0..0.5).contains(&config.trim_fraction) {
        return Err(GeometryError::TrimFraction(config.trim_fraction));
    }
    let mut out = [0.0; 3];
    if config.trim_fraction == 0.0 {
        for p in &cloud.points {
            for (o, x) in out.iter_mut().zip(p) {
                *o += x;
            }
        }
        return Ok(out.map(|s| s / n as f64));
    }
    let cut = (n as f64 * config.trim_fraction) as usize;
    for (axis, o) in out.iter_mut().enumerate() {
        let mut values: Vec<f64> = cloud.points.iter().map(|p| p[axis]).collect();
        values.sort_by(f64::total_cmp);
        let kept = &values[cut..n - cut];
        *o = kept.iter().sum::<f64>() / kept.len() as f64;
    }
    Ok(out)
}

/// Grasp point of one named mask.
pub fn grasp_point(
    frame: &RgbdFrame,
    mask: &BinaryMask,
    name: &str,
    config: GeometryConfig,
) -> Result<GraspPoint, GeometryError> {
    let cloud = masked_cloud(frame, mask)?;
    let position = centroid_with(&cloud, config)?;
    Ok(GraspPoint {
        instance_name: name.into(),
        position,
        support: cloud.len(),
    })
}

/// Grasp points for every mask that has an instance name. Masks that fail
/// are returned alongside with their error.
pub fn grasp_points(
    frame: &RgbdFrame,
    masks: &[BinaryMask],
    config: GeometryConfig,
) -> (BTreeMap<String, GraspPoint>, Vec<(String, GeometryError)>) {
    let mut points = BTreeMap::new();
    let mut failures = Vec::new();
    for mask in masks {
        let Some(name) = mask.instance_name.as_deref() else {
            continue;
        };
        match grasp_point(frame, mask, name, config) {
            Ok(g) => {
                points.insert(name.into(), g);
            }
            Err(e) => failures.push((name.into(), e)),
        }
    }
    (points, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Rle;
    use alloc::vec;
    use proptest::prelude::*;

    fn frame(w: u32, h: u32, depth: Vec<u16>, fx: f64, cx: f64, cy: f64) -> RgbdFrame {
        let k = CameraIntrinsics::new(fx, fx, cx, cy, w, h).unwrap();
        RgbdFrame::new("d", depth, k).unwrap()
    }

    fn mask(rle: Rle) -> BinaryMask {
        BinaryMask {
            rle,
            label: "x".into(),
            instance_name: Some("x".into()),
        }
    }

    #[test]
    fn principal_point_ray() {
        let mut depth = vec![0u16; 640 * 480];
        depth[240 * 640 + 320] = 1000;
        let f = frame(640, 480, depth, 500.0, 320.0, 240.0);
        assert_eq!(backproject(&f).points, vec![[0.0, 0.0, 1000.0]]);
    }

    #[test]
    fn off_axis_pixel() {
        // (420 - 320) * 1000 / 500 = 200
        let mut depth = vec![0u16; 640 * 480];
        depth[240 * 640 + 420] = 1000;
        let f = frame(640, 480, depth, 500.0, 320.0, 240.0);
        assert_eq!(backproject(&f).points, vec![[200.0, 0.0, 1000.0]]);
    }

    #[test]
    fn zero_depth_skipped() {
        let f = frame(3, 2, vec![0; 6], 1.0, 0.0, 0.0);
        assert!(backproject(&f).is_empty());
    }

    #[test]
    fn masked_cloud_counts_valid_pixels() {
        // 4x4 frame; mask covers the left 2 columns; column 0 has no depth.
        let depth: Vec<u16> = (0..16).map(|i| if i % 4 == 0 { 0 } else { 900 }).collect();
        let f = frame(4, 4, depth, 2.0, 1.0, 1.0);
        let m = mask(Rle::rectangle(4, 4, [0, 0, 2, 4]));
        assert_eq!(masked_cloud(&f, &m).unwrap().len(), 4);
        let single = mask(Rle::rectangle(4, 4, [1, 1, 2, 2]));
        assert_eq!(masked_cloud(&f, &single).unwrap().len(), 1);
        let empty = mask(Rle::from_bits(4, 4, &[false; 16]).unwrap());
        assert!(masked_cloud(&f, &empty).unwrap().is_empty());
    }

    #[test]
    fn mask_size_must_match() {
        let f = frame(4, 4, vec![1; 16], 2.0, 1.0, 1.0);
        let m = mask(Rle::full(2, 2));
        assert!(matches!(
            masked_cloud(&f, &m),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn full_mask_equals_backprojection() {
        let depth: Vec<u16> = (0..20).map(|i| (i * 37 % 5) as u16 * 100).collect();
        let f = frame(5, 4, depth, 3.0, 2.0, 1.5);
        assert_eq!(
            masked_cloud(&f, &mask(Rle::full(5, 4))).unwrap(),
            backproject(&f)
        );
    }

    #[test]
    fn symmetric_box_centroid() {
        let c = [100.0, -50.0, 800.0];
        let mut points = Vec::new();
        for dx in [-30.0, -10.0, 10.0, 30.0] {
            for dy in [-20.0, 0.0, 20.0] {
                for dz in [-5.0, 5.0] {
                    points.push([c[0] + dx, c[1] + dy, c[2] + dz]);
                }
            }
        }
        let got = centroid(&PointCloud { points }, 20).unwrap();
        for i in 0..3 {
            assert!((got[i] - c[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn centroid_support_rules() {
        let one = PointCloud {
            points: vec![[1.0, 2.0, 3.0]],
        };
        assert_eq!(centroid(&one, 1).unwrap(), [1.0, 2.0, 3.0]);
        let five = PointCloud {
            points: vec![[1.0, 1.0, 1.0]; 5],
        };
        assert_eq!(
            centroid(&five, 20),
            Err(GeometryError::InsufficientSupport {
                support: 5,
                min_points: 20
            })
        );
    }

    #[test]
    fn trimmed_mean_drops_outliers() {
        let mut points = vec![[0.0, 0.0, 1000.0]; 18];
        points.push([5000.0, 0.0, 1000.0]);
        points.push([-5000.0, 0.0, 1000.0]);
        let cfg = GeometryConfig {
            min_points: 1,
            trim_fraction: 0.1,
        };
        assert_eq!(
            centroid_with(&PointCloud { points }, cfg).unwrap(),
            [0.0, 0.0, 1000.0]
        );
    }

    proptest! {
        #[test]
        fn reprojection_recovers_pixels(
            depth in proptest::collection::vec(0u16..5000, 24),
            fx in 50.0f64..900.0, fy in 50.0f64..900.0,
            cx in 0.0f64..6.0, cy in 0.0f64..4.0,
        ) {
            let k = CameraIntrinsics::new(fx, fy, cx, cy, 6, 4).unwrap();
            let f = RgbdFrame::new("d", depth.clone(), k).unwrap();
            let valid: Vec<usize> = (0..24).filter(|&i| depth[i] > 0).collect();
            let cloud = backproject(&f);
            prop_assert_eq!(cloud.len(), valid.len());
            for (p, &i) in cloud.points.iter().zip(&valid) {
                prop_assert!(p[2] > 0.0);
                let (u, v) = project(&k, *p);
                prop_assert!((u - (i % 6) as f64).abs() < 1e-9);
                prop_assert!((v - (i / 6) as f64).abs() < 1e-9);
            }
        }

        #[test]
        fn centroid_is_translation_equivariant(
            pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3, 1.0f64..5e3), 1..40),
            t in (-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3),
        ) {
            let cloud = PointCloud { points: pts.iter().map(|p| [p.0, p.1, p.2]).collect() };
            let shifted = PointCloud { points: pts.iter().map(|p| [p.0 + t.0, p.1 + t.1, p.2 + t.2]).collect() };
            let a = centroid(&cloud, 1).unwrap();
            let b = centroid(&shifted, 1).unwrap();
            for (i, d) in [t.0, t.1, t.2].iter().enumerate() {
                prop_assert!((b[i] - (a[i] + d)).abs() < 1e-6);
            }
        }

        #[test]
        fn masked_cloud_bounded_by_popcount(
            depth in proptest::collection::vec(0u16..3, 12),
            bits in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let f = frame(4, 3, depth.clone(), 1.0, 0.0, 0.0);
            let m = mask(Rle::from_bits(4, 3, &bits).unwrap());
            let n = masked_cloud(&f, &m).unwrap().len();
            let pop = m.rle.count_ones();
            prop_assert!(n <= pop);
            let all_valid = (0..12).filter(|&i| bits[i]).all(|i| depth[i] > 0);
            prop_assert_eq!(n == pop, all_valid);
        }
    }
}
