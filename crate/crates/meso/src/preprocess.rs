//! Landmark-driven face alignment and image → tensor normalization.
//!
//! Alignment maps the two eye landmarks onto fixed canonical positions in a
//! 256×256 frame via the closed-form two-point similarity transform, then
//! resamples the source with inverse-mapped bilinear interpolation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Side length of the canonical aligned frame.
pub const CANONICAL_SIZE: usize = 256;

/// Canonical left-eye position: (0.35·256, 0.40·256).
pub const CANONICAL_LEFT_EYE: [f64; 2] = [89.6, 102.4];

/// Canonical right-eye position: (0.65·256, 0.40·256).
pub const CANONICAL_RIGHT_EYE: [f64; 2] = [166.4, 102.4];

/// 8-bit RGB image, row-major, no padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("image extents must be ≥ 1, got {width}x{height}")));
        }
        if pixels.len() != 3 * width * height {
            return Err(Error::Shape(format!(
                "pixel buffer length {} does not match 3·{width}·{height}",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(3 * width * height);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        Self::new(width, height, pixels)
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = 3 * (y * self.width + x);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let o = 3 * (y * self.width + x);
        self.pixels[o..o + 3].copy_from_slice(&rgb);
    }
}

/// Eye-center landmarks in source-pixel coordinates (x right, y down).
/// Additional named points (nose tip, mouth center, ...) are carried but
/// unused by alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub left_eye: [f64; 2],
    pub right_eye: [f64; 2],
    pub extra: BTreeMap<String, [f64; 2]>,
}

impl LandmarkSet {
    pub fn new(left_eye: [f64; 2], right_eye: [f64; 2]) -> Self {
        Self { left_eye, right_eye, extra: BTreeMap::new() }
    }

    /// Parse the sidecar JSON: `{"left_eye":[x,y],"right_eye":[x,y],...}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("landmark sidecar: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Format("landmark sidecar: expected a JSON object".into()))?;
        let point = |key: &str| -> Result<[f64; 2]> {
            let arr = obj
                .get(key)
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Format(format!("landmark sidecar: missing point '{key}'")))?;
            match (arr.first().and_then(|v| v.as_f64()), arr.get(1).and_then(|v| v.as_f64())) {
                (Some(x), Some(y)) if arr.len() == 2 => Ok([x, y]),
                _ => Err(Error::Format(format!("landmark sidecar: '{key}' must be [x, y]"))),
            }
        };
        let left_eye = point("left_eye")?;
        let right_eye = point("right_eye")?;
        let mut extra = BTreeMap::new();
        for key in obj.keys() {
            if key != "left_eye" && key != "right_eye" {
                extra.insert(key.clone(), point(key)?);
            }
        }
        Ok(Self { left_eye, right_eye, extra })
    }
}

/// Similarity transform p ↦ scale·R(angle)·p + translation, with
/// R(θ) = [cos θ, sin θ; −sin θ, cos θ]. Positive angles therefore rotate
/// from the +x axis towards −y (upwards on screen in y-down coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub angle: f64,
    pub translation: [f64; 2],
}

impl SimilarityTransform {
    pub const IDENTITY: Self = Self { scale: 1.0, angle: 0.0, translation: [0.0, 0.0] };

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [
            self.scale * (c * p[0] + s * p[1]) + self.translation[0],
            self.scale * (-s * p[0] + c * p[1]) + self.translation[1],
        ]
    }

    /// Inverse map; composing with `apply` is the identity within 1e-9.
    pub fn inverse(&self) -> Self {
        let inv = Self {
            scale: 1.0 / self.scale,
            angle: -self.angle,
            translation: [0.0, 0.0],
        };
        let t = inv_rotate_scale(self, self.translation);
        Self { translation: [-t[0], -t[1]], ..inv }
    }
}

fn inv_rotate_scale(t: &SimilarityTransform, p: [f64; 2]) -> [f64; 2] {
    let (s, c) = (-t.angle).sin_cos();
    [
        (c * p[0] + s * p[1]) / t.scale,
        (-s * p[0] + c * p[1]) / t.scale,
    ]
}

/// Closed-form two-point alignment: the unique similarity transform taking
/// `left_eye` → [`CANONICAL_LEFT_EYE`] and `right_eye` →
/// [`CANONICAL_RIGHT_EYE`].
pub fn compute_alignment(landmarks: &LandmarkSet) -> Result<SimilarityTransform> {
    let [lx, ly] = landmarks.left_eye;
    let [rx, ry] = landmarks.right_eye;
    let dx = rx - lx;
    let dy = ry - ly;
    let dist = (dx * dx + dy * dy).sqrt();
    if dist < 1e-12 {
        return Err(Error::DegenerateLandmarks(
            "eye landmarks coincide; no similarity transform exists".into(),
        ));
    }
    let canonical_dist = CANONICAL_RIGHT_EYE[0] - CANONICAL_LEFT_EYE[0];
    let scale = canonical_dist / dist;
    // The canonical eye axis is horizontal, so the rotation is the source
    // eye-axis angle itself under the clockwise-positive R above.
    let angle = dy.atan2(dx);
    let mut t = SimilarityTransform { scale, angle, translation: [0.0, 0.0] };
    let mapped_left = t.apply(landmarks.left_eye);
    t.translation = [
        CANONICAL_LEFT_EYE[0] - mapped_left[0],
        CANONICAL_LEFT_EYE[1] - mapped_left[1],
    ];
    Ok(t)
}

fn bilinear(src: &Image, x: f64, y: f64) -> [u8; 3] {
    let x0 = x.floor();
    let y0 = y.floor();
    let wx = x - x0;
    let wy = y - y0;
    let mut acc = [0.0f64; 3];
    for (dy_, wy_) in [(0.0, 1.0 - wy), (1.0, wy)] {
        for (dx_, wx_) in [(0.0, 1.0 - wx), (1.0, wx)] {
            let weight = wx_ * wy_;
            if weight == 0.0 {
                continue;
            }
            let sx = x0 + dx_;
            let sy = y0 + dy_;
            // out-of-bounds taps sample black
            if sx < 0.0 || sy < 0.0 || sx >= src.width as f64 || sy >= src.height as f64 {
                continue;
            }
            let p = src.pixel(sx as usize, sy as usize);
            for ch in 0..3 {
                acc[ch] += weight * p[ch] as f64;
            }
        }
    }
    [
        (acc[0] + 0.5).floor().clamp(0.0, 255.0) as u8,
        (acc[1] + 0.5).floor().clamp(0.0, 255.0) as u8,
        (acc[2] + 0.5).floor().clamp(0.0, 255.0) as u8,
    ]
}

/// Resample into the 256×256 canonical frame: each output pixel samples the
/// source at `t⁻¹(output coord)` with bilinear interpolation; out-of-bounds
/// samples are black.
pub fn warp(image: &Image, t: &SimilarityTransform) -> Image {
    let inv = t.inverse();
    let side = CANONICAL_SIZE;
    let mut out = Image::filled(side, side, [0, 0, 0]).expect("canonical frame");
    for oy in 0..side {
        for ox in 0..side {
            let src = inv.apply([ox as f64, oy as f64]);
            out.set_pixel(ox, oy, bilinear(image, src[0], src[1]));
        }
    }
    out
}

/// Fallback for images without landmarks: crop the largest centered square
/// and rescale it to 256×256 (expressed as a pure-scale similarity warp).
pub fn center_crop_resize(image: &Image) -> Image {
    let side = image.width.min(image.height);
    let ox = (image.width - side) as f64 / 2.0;
    let oy = (image.height - side) as f64 / 2.0;
    let scale = CANONICAL_SIZE as f64 / side as f64;
    let t = SimilarityTransform {
        scale,
        angle: 0.0,
        translation: [-scale * ox, -scale * oy],
    };
    warp(image, &t)
}

/// Stack images into a `[N, 3, H, W]` tensor scaled to [0, 1]. All images
/// must share one size.
pub fn to_tensor(images: &[&Image]) -> Result<Tensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::Shape("to_tensor: empty image list".into()))?;
    let (w, h) = (first.width, first.height);
    let mut data = Vec::with_capacity(images.len() * 3 * w * h);
    for img in images {
        if img.width != w || img.height != h {
            return Err(Error::Shape(format!(
                "to_tensor: mixed image sizes {}x{} vs {w}x{h}",
                img.width, img.height
            )));
        }
        // channel-planar NCHW layout
        for ch in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    data.push(img.pixels[3 * (y * w + x) + ch] as f32 / 255.0);
                }
            }
        }
    }
    Tensor::from_vec(&[images.len(), 3, h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn canonical_eyes_give_identity() {
        let lm = LandmarkSet::new(CANONICAL_LEFT_EYE, CANONICAL_RIGHT_EYE);
        let t = compute_alignment(&lm).unwrap();
        assert!((t.scale - 1.0).abs() <= 1e-9);
        assert!(t.angle.abs() <= 1e-9);
        assert!(t.translation[0].abs() <= 1e-9);
        assert!(t.translation[1].abs() <= 1e-9);
    }

    #[test]
    fn double_distance_halves_scale() {
        let lm = LandmarkSet::new([0.0, 0.0], [153.6, 0.0]);
        let t = compute_alignment(&lm).unwrap();
        assert!((t.scale - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn vertical_eye_axis_rotates_minus_half_pi() {
        let lm = LandmarkSet::new([100.0, 200.0], [100.0, 100.0]);
        let t = compute_alignment(&lm).unwrap();
        assert!((t.angle + std::f64::consts::FRAC_PI_2).abs() <= 1e-9);
        let l = t.apply(lm.left_eye);
        let r = t.apply(lm.right_eye);
        assert!((l[0] - CANONICAL_LEFT_EYE[0]).abs() <= 1e-6);
        assert!((l[1] - CANONICAL_LEFT_EYE[1]).abs() <= 1e-6);
        assert!((r[0] - CANONICAL_RIGHT_EYE[0]).abs() <= 1e-6);
        assert!((r[1] - CANONICAL_RIGHT_EYE[1]).abs() <= 1e-6);
    }

    #[test]
    fn coincident_eyes_are_degenerate() {
        let lm = LandmarkSet::new([10.0, 10.0], [10.0, 10.0]);
        assert!(matches!(
            compute_alignment(&lm),
            Err(Error::DegenerateLandmarks(_))
        ));
    }

    #[test]
    fn inverse_composes_to_identity() {
        let t = SimilarityTransform { scale: 1.7, angle: 0.4, translation: [12.0, -3.5] };
        let inv = t.inverse();
        for p in [[0.0, 0.0], [100.0, 50.0], [-20.0, 400.0]] {
            let q = inv.apply(t.apply(p));
            assert!((q[0] - p[0]).abs() <= 1e-9);
            assert!((q[1] - p[1]).abs() <= 1e-9);
        }
    }

    fn checkerboard(side: usize, cell: usize) -> Image {
        let mut img = Image::filled(side, side, [0, 0, 0]).unwrap();
        for y in 0..side {
            for x in 0..side {
                if (x / cell + y / cell) % 2 == 0 {
                    img.set_pixel(x, y, [255, 210, 40]);
                }
            }
        }
        img
    }

    #[test]
    fn identity_warp_copies_256_image() {
        let img = checkerboard(256, 16);
        let out = warp(&img, &SimilarityTransform::IDENTITY);
        assert_eq!(out, img);
    }

    #[test]
    fn translation_leaves_black_band_at_entering_edge() {
        let img = Image::filled(256, 256, [90, 120, 200]).unwrap();
        let t = SimilarityTransform { scale: 1.0, angle: 0.0, translation: [10.0, 0.0] };
        let out = warp(&img, &t);
        for y in 0..256 {
            for x in 0..10 {
                assert_eq!(out.pixel(x, y), [0, 0, 0]);
            }
            for x in 10..256 {
                assert_eq!(out.pixel(x, y), [90, 120, 200]);
            }
        }
    }

    #[test]
    fn rotation_by_pi_twice_recovers_checkerboard() {
        let img = checkerboard(256, 8);
        // rotation by π about the pixel-grid center (127.5, 127.5)
        let rot = SimilarityTransform { scale: 1.0, angle: std::f64::consts::PI, translation: [255.0, 255.0] };
        let twice = warp(&warp(&img, &rot), &rot);
        for (a, b) in twice.pixels.iter().zip(&img.pixels) {
            assert!((*a as i16 - *b as i16).abs() <= 1, "{a} vs {b}");
        }
    }

    #[test]
    fn warp_output_is_always_canonical_size() {
        for (w, h) in [(31, 57), (256, 256), (640, 480)] {
            let img = Image::filled(w, h, [10, 20, 30]).unwrap();
            let out = warp(&img, &SimilarityTransform::IDENTITY);
            assert_eq!((out.width, out.height), (CANONICAL_SIZE, CANONICAL_SIZE));
        }
    }

    #[test]
    fn center_crop_of_square_256_is_identity() {
        let img = checkerboard(256, 32);
        assert_eq!(center_crop_resize(&img), img);
    }

    #[test]
    fn to_tensor_scales_by_255() {
        let mut img = Image::filled(2, 1, [0, 0, 0]).unwrap();
        img.set_pixel(0, 0, [255, 0, 128]);
        let t = to_tensor(&[&img]).unwrap();
        assert_eq!(t.shape(), &[1, 3, 1, 2]);
        // planar: R plane then G then B
        assert_eq!(t.data()[0], 1.0);
        assert_eq!(t.data()[2], 0.0);
        assert!((t.data()[4] - 128.0 / 255.0).abs() <= 1e-7);
    }

    #[test]
    fn alignment_maps_random_eye_pairs_onto_canonical_positions() {
        let mut rng = crate::rng::stream_from_seed(61);
        for _ in 0..100 {
            let left: [f64; 2] = [rng.gen_range(0.0..512.0), rng.gen_range(0.0..512.0)];
            let mut right = left;
            while (right[0] - left[0]).abs() + (right[1] - left[1]).abs() < 1e-3 {
                right = [rng.gen_range(0.0..512.0), rng.gen_range(0.0..512.0)];
            }
            let t = compute_alignment(&LandmarkSet::new(left, right)).unwrap();
            let l = t.apply(left);
            let r = t.apply(right);
            assert!((l[0] - CANONICAL_LEFT_EYE[0]).abs() <= 1e-6);
            assert!((l[1] - CANONICAL_LEFT_EYE[1]).abs() <= 1e-6);
            assert!((r[0] - CANONICAL_RIGHT_EYE[0]).abs() <= 1e-6);
            assert!((r[1] - CANONICAL_RIGHT_EYE[1]).abs() <= 1e-6);
        }
    }

    #[test]
    fn sidecar_json_parses_with_extras() {
        let lm = LandmarkSet::from_json(
            r#"{"left_eye":[100.5,120.0],"right_eye":[160.0,118.0],"nose_tip":[130.0,150.0]}"#,
        )
        .unwrap();
        assert_eq!(lm.left_eye, [100.5, 120.0]);
        assert_eq!(lm.extra.get("nose_tip"), Some(&[130.0, 150.0]));
        assert!(LandmarkSet::from_json("{}").is_err());
        assert!(LandmarkSet::from_json("not json").is_err());
    }

    proptest! {
        #[test]
        fn to_tensor_round_trips_bytes(
            bytes in proptest::collection::vec(0u8..=255, 12),
        ) {
            let img = Image::new(2, 2, bytes.clone()).unwrap();
            let t = to_tensor(&[&img]).unwrap();
            prop_assert!(t.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
            // ⌊255·v+0.5⌋ recovers every source byte
            for y in 0..2 {
                for x in 0..2 {
                    for ch in 0..3 {
                        let v = t.data()[ch * 4 + y * 2 + x];
                        let back = (255.0 * v + 0.5).floor() as u8;
                        prop_assert_eq!(back, bytes[3 * (y * 2 + x) + ch]);
                    }
                }
            }
        }
    }
}
