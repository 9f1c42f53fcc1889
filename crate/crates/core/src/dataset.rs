//! TUM RGB-D sequence ingestion: `rgb.txt` / `depth.txt` / `groundtruth.txt`
//! listings, timestamp association and the camera configuration file.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::{parse_trajectory, Trajectory, ASSOCIATION_TOLERANCE};
use crate::frame_pipeline::{Frame, Intrinsics};

/// Raw depth units per meter in TUM depth PNGs.
pub const TUM_DEPTH_SCALE: f64 = 5000.0;

/// Camera constants read from a `key = value` file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraConfig {
    pub intrinsics: Intrinsics,
    /// Raw depth units per meter.
    pub depth_scale: f64,
}

impl CameraConfig {
    /// Keys: `fx`, `fy`, `cx`, `cy` (required) and `depth_scale` (optional).
    /// `#` starts a comment.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let (mut fx, mut fy, mut cx, mut cy) = (None, None, None, None);
        let mut depth_scale = TUM_DEPTH_SCALE;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| err(format!("{:?}: {e}", value.trim())))?;
            match key.trim() {
                "fx" => fx = Some(value),
                "fy" => fy = Some(value),
                "cx" => cx = Some(value),
                "cy" => cy = Some(value),
                "depth_scale" => depth_scale = value,
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("missing key {k}"),
        };
        let intrinsics = Intrinsics {
            fx: fx.ok_or_else(|| missing("fx"))?,
            fy: fy.ok_or_else(|| missing("fy"))?,
            cx: cx.ok_or_else(|| missing("cx"))?,
            cy: cy.ok_or_else(|| missing("cy"))?,
        };
        intrinsics.validate()?;
        if !(depth_scale.is_finite() && depth_scale > 0.0) {
            return Err(Error::InvalidParameter(format!("depth_scale must be positive, got {depth_scale}")));
        }
        Ok(Self {
            intrinsics,
            depth_scale,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read_text(path)?, path)
    }

    pub fn to_config_string(&self) -> String {
        let k = &self.intrinsics;
        format!(
            "fx = {}\nfy = {}\ncx = {}\ncy = {}\ndepth_scale = {}\n",
            k.fx, k.fy, k.cx, k.cy, self.depth_scale
        )
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageEntry {
    pub stamp: f64,
    /// Relative to the sequence root.
    pub path: PathBuf,
}

/// Parses `timestamp path` rows, skipping `#` comments and blank lines.
pub fn parse_image_list(text: &str, path: &Path) -> Result<Vec<ImageEntry>> {
    let mut out: Vec<ImageEntry> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let mut fields = line.split_whitespace();
        let (Some(stamp), Some(file), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err(format!("expected `timestamp path`, got {line:?}")));
        };
        let stamp: f64 = stamp.parse().map_err(|e| err(format!("{stamp:?}: {e}")))?;
        if !stamp.is_finite() {
            return Err(err(format!("non-finite timestamp {stamp}")));
        }
        if let Some(prev) = out.last() {
            if stamp <= prev.stamp {
                return Err(err(format!("timestamp {stamp} does not increase (previous {})", prev.stamp)));
            }
        }
        out.push(ImageEntry {
            stamp,
            path: PathBuf::from(file),
        });
    }
    Ok(out)
}

/// Parsed listings of one sequence.
#[derive(Clone, Debug)]
pub struct SequenceIndex {
    pub root: PathBuf,
    pub camera: CameraConfig,
    pub rgb: Vec<ImageEntry>,
    pub depth: Vec<ImageEntry>,
    /// Absent when the sequence ships without ground truth.
    pub groundtruth: Option<Trajectory>,
    pub association_tolerance: f64,
}

pub fn load_sequence(root: impl AsRef<Path>, camera: CameraConfig) -> Result<SequenceIndex> {
    let root = root.as_ref();
    let list = |name: &str| {
        let p = root.join(name);
        parse_image_list(&read_text(&p)?, &p)
    };
    let rgb = list("rgb.txt")?;
    let depth = list("depth.txt")?;
    let gt_path = root.join("groundtruth.txt");
    let groundtruth = match read_text(&gt_path) {
        Ok(text) => Some(parse_trajectory(&text, &gt_path)?),
        Err(Error::MissingFile(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SequenceIndex {
        root: root.to_path_buf(),
        camera,
        rgb,
        depth,
        groundtruth,
        association_tolerance: ASSOCIATION_TOLERANCE,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FramePair {
    pub rgb: ImageEntry,
    pub depth: ImageEntry,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Association {
    /// Ordered by rgb timestamp.
    pub pairs: Vec<FramePair>,
    pub unmatched_rgb: usize,
}

/// Greedy global nearest-timestamp matching: candidate pairs closer than
/// `tolerance` are accepted in order of increasing time difference as long
/// as neither side is already used.
pub fn associate_stamps(a: &[f64], b: &[f64], tolerance: f64) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    let mut start = 0;
    for (i, &ta) in a.iter().enumerate() {
        while start < b.len() && b[start] < ta - tolerance {
            start += 1;
        }
        for (j, &tb) in b.iter().enumerate().skip(start) {
            if tb > ta + tolerance {
                break;
            }
            let diff = (ta - tb).abs();
            if diff < tolerance {
                candidates.push((diff, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut matches = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            matches.push((i, j));
        }
    }
    matches.sort_unstable();
    matches
}

pub fn associate(index: &SequenceIndex) -> Association {
    let rgb: Vec<f64> = index.rgb.iter().map(|e| e.stamp).collect();
    let depth: Vec<f64> = index.depth.iter().map(|e| e.stamp).collect();
    let matches = associate_stamps(&rgb, &depth, index.association_tolerance);
    Association {
        unmatched_rgb: rgb.len() - matches.len(),
        pairs: matches
            .into_iter()
            .map(|(i, j)| FramePair {
                rgb: index.rgb[i].clone(),
                depth: index.depth[j].clone(),
            })
            .collect(),
    }
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(image::open(path)?)
}

/// Decodes one associated pair; the frame is stamped with the rgb time.
pub fn load_frame(index: &SequenceIndex, pair: &FramePair) -> Result<Frame> {
    let rgb = open_image(&index.root.join(&pair.rgb.path))?.to_rgb8();
    let raw = open_image(&index.root.join(&pair.depth.path))?.to_luma16();
    if raw.dimensions() != rgb.dimensions() {
        return Err(Error::InvalidParameter(format!(
            "rgb {:?} and depth {:?} sizes differ",
            rgb.dimensions(),
            raw.dimensions()
        )));
    }
    let scale = index.camera.depth_scale;
    let depth = raw.pixels().map(|p| p[0] as f64 / scale).collect();
    Frame::new(rgb, depth, pair.rgb.stamp, index.camera.intrinsics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("rgb.txt")
    }

    #[test]
    fn comment_and_two_rows() {
        let e = parse_image_list("# color images\n1.0 rgb/1.png\n2.0 rgb/2.png\n", p()).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[1].path, PathBuf::from("rgb/2.png"));
    }

    #[test]
    fn non_monotonic_is_a_parse_error() {
        let r = parse_image_list("1.0 a.png\n# x\n0.5 b.png\n", p());
        assert!(matches!(r, Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_image_list("1.0\n", p()), Err(Error::Parse { line: 1, .. })));
        assert!(parse_image_list("abc a.png\n", p()).is_err());
    }

    #[test]
    fn identical_lists_match_one_to_one() {
        let t: Vec<f64> = (0..30).map(|k| k as f64 / 30.0).collect();
        let m = associate_stamps(&t, &t, 0.02);
        assert_eq!(m, (0..30).map(|k| (k, k)).collect::<Vec<_>>());
    }

    #[test]
    fn offset_within_tolerance_matches_all() {
        let a: Vec<f64> = (0..30).map(|k| k as f64 / 30.0).collect();
        let b: Vec<f64> = a.iter().map(|t| t + 0.015).collect();
        assert_eq!(associate_stamps(&a, &b, 0.02).len(), 30);
        assert!(associate_stamps(&a, &b, 0.01).is_empty());
    }

    #[test]
    fn closest_wins_contested_depth() {
        let m = associate_stamps(&[1.0, 1.01], &[1.009], 0.02);
        assert_eq!(m, vec![(1, 0)]);
    }

    #[test]
    fn camera_config_round_trip() {
        let text = "# fr1\nfx = 517.3\nfy=516.5\ncx = 318.6 # principal\ncy = 255.3\n";
        let c = CameraConfig::parse(text, Path::new("k.cfg")).unwrap();
        assert_eq!(c.depth_scale, 5000.0);
        assert_eq!(c.intrinsics.fy, 516.5);
        assert_eq!(CameraConfig::parse(&c.to_config_string(), Path::new("k")).unwrap(), c);
        assert!(CameraConfig::parse("fx = 1\n", Path::new("k")).is_err());
        assert!(matches!(
            CameraConfig::parse("fx = 1\nfz = 2\n", Path::new("k")),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn missing_listing_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("rgb.txt"), "1.0 a.png\n").unwrap();
        let cam = CameraConfig::parse("fx=1\nfy=1\ncx=0\ncy=0\n", Path::new("k")).unwrap();
        match load_sequence(dir.path(), cam) {
            Err(Error::MissingFile(p)) => assert!(p.ends_with("depth.txt")),
            other => panic!("{other:?}"),
        }
        std::fs::write(dir.path().join("depth.txt"), "1.01 d.png\n").unwrap();
        let idx = load_sequence(dir.path(), cam).unwrap();
        assert!(idx.groundtruth.is_none());
        let a = associate(&idx);
        assert_eq!(a.pairs.len(), 1);
        assert_eq!(a.unmatched_rgb, 0);
    }

    proptest! {
        #[test]
        fn association_is_injective_and_ordered(
            a in prop::collection::btree_set(0u32..5000, 1..80),
            b in prop::collection::btree_set(0u32..5000, 1..80),
        ) {
            let a: Vec<f64> = a.into_iter().map(|v| v as f64 * 1e-3).collect();
            let b: Vec<f64> = b.into_iter().map(|v| v as f64 * 1e-3).collect();
            let m = associate_stamps(&a, &b, 0.02);
            let mut seen = std::collections::HashSet::new();
            for w in m.windows(2) {
                prop_assert!(w[0].0 < w[1].0);
            }
            for &(i, j) in &m {
                prop_assert!(seen.insert(j));
                prop_assert!((a[i] - b[j]).abs() < 0.02);
            }
        }
    }
}
