//! RGB-D frames to colored point clouds: semi-dense pixel selection,
//! pinhole back-projection and HSV + intensity-gradient labels.

use image::{GrayImage, Luma, RgbImage};
use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::kernels::ColorLabel;
use crate::rkhs::ColoredCloud;

/// Fewest points a usable frame must yield.
pub const MIN_POINTS: usize = 50;

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.fx, self.fy].iter().all(|f| f.is_finite() && *f > 0.0)
            && self.cx.is_finite()
            && self.cy.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid intrinsics {self:?}")))
        }
    }

    pub fn back_project(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        Vector3::new(depth * (u - self.cx) / self.fx, depth * (v - self.cy) / self.fy, depth)
    }

    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

/// One RGB-D frame; depth is row-major meters with 0 marking holes.
#[derive(Clone, Debug)]
pub struct Frame {
    pub timestamp: f64,
    pub intrinsics: Intrinsics,
    rgb: RgbImage,
    depth: Vec<f64>,
}

impl Frame {
    pub fn new(rgb: RgbImage, depth: Vec<f64>, timestamp: f64, intrinsics: Intrinsics) -> Result<Self> {
        intrinsics.validate()?;
        let (w, h) = rgb.dimensions();
        if w < 3 || h < 3 {
            return Err(Error::InvalidParameter(format!("frame too small: {w}x{h}")));
        }
        if depth.len() != (w as usize) * (h as usize) {
            return Err(Error::InvalidParameter(format!(
                "depth has {} values for a {w}x{h} image",
                depth.len()
            )));
        }
        Ok(Self {
            timestamp,
            intrinsics,
            rgb,
            depth,
        })
    }

    pub fn width(&self) -> u32 {
        self.rgb.width()
    }

    pub fn height(&self) -> u32 {
        self.rgb.height()
    }

    pub fn rgb(&self) -> &RgbImage {
        &self.rgb
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    pub fn depth_at(&self, u: u32, v: u32) -> f64 {
        self.depth[v as usize * self.width() as usize + u as usize]
    }

    fn gray(&self) -> Vec<f64> {
        self.rgb
            .pixels()
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionConfig {
    pub target_points: usize,
    /// Edge fallback engages below `fallback_fraction * target_points`.
    pub fallback_fraction: f64,
    /// Side of the square blocks used for adaptive thresholding, pixels.
    pub gradient_block: u32,
    /// Added to the block median gradient magnitude, in 0-255 intensity units.
    pub gradient_margin: f64,
    pub canny_low: f32,
    pub canny_high: f32,
    /// Valid depth window `[min, max]`, meters.
    pub depth_valid_range: (f64, f64),
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            target_points: 3000,
            fallback_fraction: 1.0 / 3.0,
            gradient_block: 32,
            gradient_margin: 7.0,
            canny_low: 50.0,
            canny_high: 100.0,
            depth_valid_range: (0.1, 10.0),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.target_points == 0 {
            return bad("target_points must be positive");
        }
        if !(self.fallback_fraction > 0.0 && self.fallback_fraction < 1.0) {
            return bad("fallback_fraction must lie in (0, 1)");
        }
        if self.gradient_block == 0 {
            return bad("gradient_block must be positive");
        }
        if !(self.gradient_margin >= 0.0) {
            return bad("gradient_margin must be non-negative");
        }
        if !(self.canny_low >= 0.0 && self.canny_high >= self.canny_low) {
            return bad("canny thresholds must satisfy 0 <= low <= high");
        }
        let (lo, hi) = self.depth_valid_range;
        if !(lo >= 0.0 && hi > lo) {
            return bad("depth_valid_range must satisfy 0 <= min < max");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub u: u32,
    pub v: u32,
}

/// Selected pixels and how they were found.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Sorted in raster order.
    pub pixels: Vec<Pixel>,
    pub from_gradient: usize,
    pub from_edges: usize,
    pub fallback_engaged: bool,
}

struct Gradients {
    width: usize,
    du: Vec<f64>,
    dv: Vec<f64>,
}

impl Gradients {
    /// Central differences on grayscale; zero on the image border.
    fn new(gray: &[f64], width: usize, height: usize) -> Self {
        let mut du = vec![0.0; gray.len()];
        let mut dv = vec![0.0; gray.len()];
        for v in 1..height - 1 {
            for u in 1..width - 1 {
                let i = v * width + u;
                du[i] = 0.5 * (gray[i + 1] - gray[i - 1]);
                dv[i] = 0.5 * (gray[i + width] - gray[i - width]);
            }
        }
        Self { width, du, dv }
    }

    fn magnitude(&self, i: usize) -> f64 {
        self.du[i].hypot(self.dv[i])
    }

    fn at(&self, p: Pixel) -> (f64, f64) {
        let i = p.v as usize * self.width + p.u as usize;
        (self.du[i].abs(), self.dv[i].abs())
    }
}

fn valid_depth(d: f64, range: (f64, f64)) -> bool {
    d.is_finite() && d >= range.0 && d <= range.1
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Block-adaptive gradient selection with an edge-detector fallback.
///
/// Never fails on texture: a frame with too few points comes back with a
/// short pixel list. See [`select_points`] for the checked version.
pub fn select_pixels(frame: &Frame, config: &SelectionConfig) -> Result<Selection> {
    config.validate()?;
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let gray = frame.gray();
    let grads = Gradients::new(&gray, w, h);
    let target = config.target_points;
    let block = config.gradient_block as usize;
    let (bw, bh) = (w.div_ceil(block), h.div_ceil(block));
    let budget = target.div_ceil(bw * bh);
    let usable = |u: usize, v: usize| {
        u > 0 && v > 0 && u < w - 1 && v < h - 1 && valid_depth(frame.depth[v * w + u], config.depth_valid_range)
    };

    let mut chosen = vec![false; w * h];
    let mut picked: Vec<usize> = Vec::new();
    let mut leftovers: Vec<(f64, usize)> = Vec::new();
    let mut mags = Vec::with_capacity(block * block);
    for by in 0..bh {
        for bx in 0..bw {
            let (u0, v0) = (bx * block, by * block);
            let (u1, v1) = ((u0 + block).min(w), (v0 + block).min(h));
            mags.clear();
            mags.extend((v0..v1).flat_map(|v| (u0..u1).map(move |u| (u, v))).map(|(u, v)| grads.magnitude(v * w + u)));
            let threshold = median(&mut mags) + config.gradient_margin;
            let mut candidates: Vec<(f64, usize)> = (v0..v1)
                .flat_map(|v| (u0..u1).map(move |u| (u, v)))
                .filter(|&(u, v)| usable(u, v))
                .map(|(u, v)| (grads.magnitude(v * w + u), v * w + u))
                .filter(|&(m, _)| m > threshold)
                .collect();
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let take = budget.min(candidates.len());
            picked.extend(candidates[..take].iter().map(|c| c.1));
            leftovers.extend_from_slice(&candidates[take..]);
        }
    }
    if picked.len() < target {
        leftovers.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let extra = (target - picked.len()).min(leftovers.len());
        picked.extend(leftovers[..extra].iter().map(|c| c.1));
    }
    picked.truncate(target);
    for &i in &picked {
        chosen[i] = true;
    }
    let from_gradient = picked.len();

    let fallback_engaged = (from_gradient as f64) < config.fallback_fraction * target as f64;
    let mut from_edges = 0;
    if fallback_engaged {
        let gray_image = GrayImage::from_fn(w as u32, h as u32, |u, v| {
            Luma([gray[v as usize * w + u as usize].round().clamp(0.0, 255.0) as u8])
        });
        let edges = imageproc::edges::canny(&gray_image, config.canny_low, config.canny_high);
        let edge_pixels: Vec<usize> = edges
            .enumerate_pixels()
            .filter(|(u, v, p)| p[0] > 0 && usable(*u as usize, *v as usize))
            .map(|(u, v, _)| v as usize * w + u as usize)
            .filter(|&i| !chosen[i])
            .collect();
        let deficit = target - from_gradient;
        let n = edge_pixels.len();
        let take = deficit.min(n);
        for k in 0..take {
            let i = edge_pixels[k * n / take];
            chosen[i] = true;
            picked.push(i);
        }
        from_edges = take;
    }

    picked.sort_unstable();
    Ok(Selection {
        pixels: picked
            .into_iter()
            .map(|i| Pixel {
                u: (i % w) as u32,
                v: (i / w) as u32,
            })
            .collect(),
        from_gradient,
        from_edges,
        fallback_engaged,
    })
}

/// [`select_pixels`], failing with `InsufficientPoints` below [`MIN_POINTS`].
pub fn select_points(frame: &Frame, config: &SelectionConfig) -> Result<Selection> {
    let selection = select_pixels(frame, config)?;
    if selection.pixels.len() < MIN_POINTS {
        return Err(Error::InsufficientPoints {
            found: selection.pixels.len(),
            required: MIN_POINTS,
        });
    }
    Ok(selection)
}

/// HSV with every channel in `[0, 1]`; hue is `degrees / 360`.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let saturation = if max == 0.0 { 0.0 } else { delta / max };
    [hue / 6.0, saturation, max]
}

/// Lifts pixels to 3-D with their labels. Gradient components are divided
/// by the largest gradient component among `pixels`.
pub fn back_project(frame: &Frame, pixels: &[Pixel]) -> Result<ColoredCloud> {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let grads = Gradients::new(&frame.gray(), w, h);
    let raw: Vec<(f64, f64)> = pixels.iter().map(|&p| grads.at(p)).collect();
    let scale = raw.iter().fold(0.0f64, |m, &(a, b)| m.max(a).max(b));
    let norm = |g: f64| if scale > 0.0 { g / scale } else { 0.0 };
    let mut points = Vec::with_capacity(pixels.len());
    let mut labels = Vec::with_capacity(pixels.len());
    for (&p, &(gu, gv)) in pixels.iter().zip(&raw) {
        let d = frame.depth_at(p.u, p.v);
        points.push(frame.intrinsics.back_project(p.u as f64, p.v as f64, d));
        let [hh, s, v] = rgb_to_hsv(frame.rgb.get_pixel(p.u, p.v).0);
        labels.push(ColorLabel([hh, s, v, norm(gu), norm(gv)]));
    }
    ColoredCloud::new(points, labels)
}

/// Selection followed by back-projection.
pub fn frame_to_cloud(frame: &Frame, config: &SelectionConfig) -> Result<(ColoredCloud, Selection)> {
    let selection = select_points(frame, config)?;
    let cloud = back_project(frame, &selection.pixels)?;
    Ok((cloud, selection))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    const K: Intrinsics = Intrinsics {
        fx: 525.0,
        fy: 525.0,
        cx: 319.5,
        cy: 239.5,
    };

    fn frame_from(rgb: RgbImage, depth: f64) -> Frame {
        let n = (rgb.width() * rgb.height()) as usize;
        Frame::new(rgb, vec![depth; n], 0.0, K).unwrap()
    }

    fn checkerboard(square: u32) -> RgbImage {
        RgbImage::from_fn(640, 480, |u, v| {
            if (u / square + v / square).is_multiple_of(2) {
                Rgb([230, 230, 230])
            } else {
                Rgb([20, 20, 20])
            }
        })
    }

    #[test]
    fn checkerboard_needs_no_fallback() {
        let cfg = SelectionConfig::default();
        let s = select_points(&frame_from(checkerboard(8), 1.5), &cfg).unwrap();
        assert!(!s.fallback_engaged);
        assert!(s.from_gradient as f64 >= 0.8 * cfg.target_points as f64, "{}", s.from_gradient);
        assert!(s.pixels.len() <= cfg.target_points);
    }

    #[test]
    fn uniform_gray_engages_fallback() {
        let cfg = SelectionConfig::default();
        let f = frame_from(RgbImage::from_pixel(640, 480, Rgb([128, 128, 128])), 2.0);
        let s = select_pixels(&f, &cfg).unwrap();
        assert!(s.fallback_engaged);
        assert_eq!(s.from_gradient, 0);
        assert!(matches!(select_points(&f, &cfg), Err(Error::InsufficientPoints { .. })));
    }

    #[test]
    fn low_texture_is_topped_up_from_edges() {
        // A faint rectangle: below the gradient margin, above the Canny thresholds.
        let img = RgbImage::from_fn(640, 480, |u, v| {
            let inside = (200..440).contains(&u) && (150..330).contains(&v);
            if inside { Rgb([140, 140, 140]) } else { Rgb([128, 128, 128]) }
        });
        let cfg = SelectionConfig { canny_low: 5.0, canny_high: 10.0, ..Default::default() };
        let s = select_points(&frame_from(img, 2.0), &cfg).unwrap();
        assert!(s.fallback_engaged);
        assert!(s.from_edges > 0);
        assert_eq!(s.pixels.len(), s.from_gradient + s.from_edges);
    }

    #[test]
    fn zero_depth_is_insufficient() {
        let f = frame_from(checkerboard(8), 0.0);
        assert!(matches!(
            select_points(&f, &SelectionConfig::default()),
            Err(Error::InsufficientPoints { found: 0, .. })
        ));
    }

    #[test]
    fn selection_is_deterministic_and_bounded() {
        let cfg = SelectionConfig { target_points: 500, ..Default::default() };
        let f = frame_from(checkerboard(5), 1.0);
        let a = frame_to_cloud(&f, &cfg).unwrap();
        let b = frame_to_cloud(&f, &cfg).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
        assert!(a.1.pixels.len() <= 600 && a.1.pixels.len() >= MIN_POINTS);
        assert!(a.0.labels().iter().all(ColorLabel::is_normalized));
    }

    #[test]
    fn principal_point_maps_onto_the_axis() {
        let k = Intrinsics { cx: 320.0, cy: 240.0, ..K };
        assert_eq!(k.back_project(320.0, 240.0, 2.5), Vector3::new(0.0, 0.0, 2.5));
    }

    #[test]
    fn projection_round_trip() {
        for (u, v, d) in [(0.0, 0.0, 0.5), (639.0, 479.0, 9.0), (123.0, 77.0, 1.3)] {
            let (pu, pv) = K.project(&K.back_project(u, v, d));
            assert!((pu - u).abs() < 1e-9 && (pv - v).abs() < 1e-9);
        }
    }

    #[test]
    fn hsv_reference_colors() {
        assert_eq!(rgb_to_hsv([255, 0, 0]), [0.0, 1.0, 1.0]);
        assert_eq!(rgb_to_hsv([0, 0, 0]), [0.0, 0.0, 0.0]);
        let [h, s, v] = rgb_to_hsv([0, 255, 0]);
        assert!((h - 1.0 / 3.0).abs() < 1e-15 && s == 1.0 && v == 1.0);
        let [h, _, _] = rgb_to_hsv([255, 0, 255]);
        assert!((h - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_depth() {
        assert!(Frame::new(checkerboard(8), vec![1.0; 10], 0.0, K).is_err());
        let bad = Intrinsics { fx: 0.0, ..K };
        assert!(Frame::new(checkerboard(8), vec![1.0; 640 * 480], 0.0, bad).is_err());
    }
}
