//! Point clouds as functions in an RKHS.
//!
//! A cloud `X = {x_i}` with labels `l_i` becomes `f_X = sum_i l_i k(., x_i)`.
//! After kernelizing the label inner product, the inner product of two such
//! functions is `sum_ij k_c(l_i, l_j) k(x_i, z_j)`. Only pairs within the
//! support radius of the spatial kernel are kept; see
//! [`crate::kernels::support_radius`].

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::kernels::{se_kernel_from_sq_dist, support_radius_squared, ColorLabel, KernelParams};
use crate::lie::Pose;
use crate::reduce::{chunked_sum, map_indices};

/// Points with per-point color labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ColoredCloud {
    points: Vec<Vector3<f64>>,
    labels: Vec<ColorLabel>,
}

impl ColoredCloud {
    pub fn new(points: Vec<Vector3<f64>>, labels: Vec<ColorLabel>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidCloud("cloud is empty".into()));
        }
        if points.len() != labels.len() {
            return Err(Error::InvalidCloud(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidCloud(format!("point {i} is not finite")));
        }
        if let Some(i) = labels.iter().position(|l| !l.0.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidCloud(format!("label {i} is not finite")));
        }
        Ok(Self { points, labels })
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[ColorLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `h · cloud`; labels travel with their points.
    pub fn transformed(&self, h: &Pose) -> ColoredCloud {
        ColoredCloud {
            points: self.points.iter().map(|p| h.apply(p)).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let sum = self.points.iter().fold(Vector3::zeros(), |acc, p| acc + p);
        sum / self.points.len() as f64
    }
}

/// One retained `(i, j)` interaction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    /// Spatial kernel value `k(x_i, z_j)`.
    pub k: f64,
    /// Color coefficient `k_c(l_i, l_j)`.
    pub c: f64,
    /// `|x_i - z_j|^2`.
    pub dist_sq: f64,
}

/// Sparsified set of cross pairs, ordered by `(j, i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSet {
    pub entries: Vec<Pair>,
    /// Length-scale the spatial kernel values were computed with.
    pub ell_used: f64,
    /// Support radius used for the cut.
    pub radius: f64,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `<f_X, f_Z>`: `sum c_ij k_ij`.
    pub fn inner_product(&self) -> f64 {
        chunked_sum(&self.entries, |p| p.c * p.k)
    }

    /// `sum c_ij |x_i - z_j|^2 k_ij`, the building block of `dJ/d ell`.
    pub fn distance_weighted_sum(&self) -> f64 {
        chunked_sum(&self.entries, |p| p.c * p.dist_sq * p.k)
    }
}

/// Uniform voxel grid over a fixed cloud, with cell size equal to the query
/// radius so a radius query touches at most 27 cells.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl SpatialIndex {
    pub fn new(points: &[Vector3<f64>], radius: f64) -> Self {
        // Guard against degenerate radii producing astronomically many cells.
        let cell = radius.max(1e-9);
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, cells }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn key(p: &Vector3<f64>, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    /// Calls `f(i)` for every indexed point in the 27 cells around `q`.
    pub fn for_each_candidate(&self, q: &Vector3<f64>, mut f: impl FnMut(usize)) {
        let [cx, cy, cz] = Self::key(q, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&[cx + dx, cy + dy, cz + dz]) {
                        ids.iter().for_each(|&i| f(i));
                    }
                }
            }
        }
    }
}

/// Cross pairs using a prebuilt index over `x`. The index cell size must be
/// at least the support radius of `params`.
pub fn build_pairs_indexed(
    index: &SpatialIndex,
    x: &ColoredCloud,
    z: &ColoredCloud,
    params: &KernelParams,
) -> Result<PairSet> {
    let r2 = support_radius_squared(params.ell, params.tau);
    let radius = r2.sqrt();
    debug_assert!(index.cell_size() >= radius * (1.0 - 1e-12));
    let per_j = map_indices(z.len(), |j| {
        let zj = &z.points[j];
        let mut out = Vec::new();
        index.for_each_candidate(zj, |i| {
            let d2 = (x.points[i] - zj).norm_squared();
            if d2 <= r2 {
                out.push(Pair {
                    i,
                    j,
                    k: se_kernel_from_sq_dist(d2, params.sigma, params.ell),
                    c: params.color(&x.labels[i], &z.labels[j]),
                    dist_sq: d2,
                });
            }
        });
        out.sort_unstable_by_key(|p| p.i);
        out
    });
    let entries: Vec<Pair> = per_j.into_iter().flatten().collect();
    if entries.is_empty() {
        return Err(Error::EmptyPairSet { radius });
    }
    Ok(PairSet {
        entries,
        ell_used: params.ell,
        radius,
    })
}

/// All cross pairs between `x` and `z` (already moved by the current pose)
/// within the support radius.
pub fn build_pairs(x: &ColoredCloud, z: &ColoredCloud, params: &KernelParams) -> Result<PairSet> {
    let index = SpatialIndex::new(&x.points, params.support_radius());
    build_pairs_indexed(&index, x, z, params)
}

/// `<f_X, f_Z>` over a pair set.
pub fn inner_product(pairs: &PairSet) -> f64 {
    pairs.inner_product()
}

/// The three sums making up `J(h) = |f_X|^2 + |f_Z|^2 - 2 <f_X, h.f_Z>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostTerms {
    pub self_x: f64,
    pub self_z: f64,
    pub cross: f64,
}

impl CostTerms {
    pub fn cost(&self) -> f64 {
        self.self_x + self.self_z - 2.0 * self.cross
    }
}

/// `|f_X|^2` under the same sparsification as the cross term, diagonal
/// included.
pub fn self_inner_product(x: &ColoredCloud, params: &KernelParams) -> f64 {
    build_pairs(x, x, params)
        .map(|p| p.inner_product())
        .unwrap_or(0.0)
}

pub fn cost_terms(x: &ColoredCloud, z: &ColoredCloud, h: &Pose, params: &KernelParams) -> Result<CostTerms> {
    let moved = z.transformed(h);
    let cross = build_pairs(x, &moved, params)?.inner_product();
    Ok(CostTerms {
        self_x: self_inner_product(x, params),
        self_z: self_inner_product(z, params),
        cross,
    })
}

/// `J(h) = |f_X - h.f_Z|^2`.
pub fn cost(x: &ColoredCloud, z: &ColoredCloud, h: &Pose, params: &KernelParams) -> Result<f64> {
    cost_terms(x, z, h, params).map(|t| t.cost())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::Twist;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> ColoredCloud {
        let points = (0..n)
            .map(|_| Vector3::new(rng.random_range(-extent..extent), rng.random_range(-extent..extent), rng.random_range(-extent..extent)))
            .collect();
        let labels = (0..n)
            .map(|_| ColorLabel(std::array::from_fn(|_| rng.random_range(0.0..1.0))))
            .collect();
        ColoredCloud::new(points, labels).unwrap()
    }

    fn brute_force(x: &ColoredCloud, z: &ColoredCloud, params: &KernelParams) -> Vec<(usize, usize)> {
        let r2 = -2.0 * params.ell * params.ell * params.tau.ln();
        let mut out = Vec::new();
        for j in 0..z.len() {
            for i in 0..x.len() {
                if (x.points()[i] - z.points()[j]).norm_squared() <= r2 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn rejects_invalid_clouds() {
        assert!(ColoredCloud::new(vec![], vec![]).is_err());
        assert!(ColoredCloud::new(vec![Vector3::zeros()], vec![]).is_err());
        assert!(ColoredCloud::new(vec![Vector3::new(f64::NAN, 0.0, 0.0)], vec![ColorLabel::default()]).is_err());
    }

    #[test]
    fn identical_clouds_pair_on_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_cloud(&mut rng, 50, 10.0);
        // Points are far apart relative to ell so only diagonal pairs remain.
        let params = KernelParams { ell: 0.01, ..Default::default() };
        let pairs = build_pairs(&x, &x, &params).unwrap();
        assert_eq!(pairs.len(), 50);
        for p in &pairs.entries {
            assert_eq!(p.i, p.j);
            assert!((p.k - 0.01).abs() < 1e-17);
            assert_eq!(p.c, 1.0);
        }
        let params = KernelParams { ell: 100.0, ..Default::default() };
        let pairs = build_pairs(&x, &x, &params).unwrap();
        assert_eq!(pairs.len(), 50 * 50);
        assert!(pairs.entries.iter().filter(|p| p.i == p.j).all(|p| (p.k - 0.01).abs() < 1e-17 && p.c == 1.0));
    }

    #[test]
    fn distant_points_give_empty_pair_set() {
        let x = ColoredCloud::new(vec![Vector3::zeros()], vec![ColorLabel::default()]).unwrap();
        let z = ColoredCloud::new(vec![Vector3::new(1.0, 0.0, 0.0)], vec![ColorLabel::default()]).unwrap();
        let err = build_pairs(&x, &z, &KernelParams::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyPairSet { .. }));
    }

    #[test]
    fn index_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..5 {
            let x = random_cloud(&mut rng, 200, 0.5);
            let z = random_cloud(&mut rng, 200, 0.5);
            let params = KernelParams { ell: 0.03 + 0.02 * trial as f64, ..Default::default() };
            let got: Vec<_> = build_pairs(&x, &z, &params).unwrap().entries.iter().map(|p| (p.i, p.j)).collect();
            assert_eq!(got, brute_force(&x, &z, &params));
        }
    }

    #[test]
    fn single_coincident_pair() {
        let l = ColorLabel([0.1, 0.2, 0.3, 0.4, 0.5]);
        let x = ColoredCloud::new(vec![Vector3::new(0.1, 0.2, 1.0)], vec![l]).unwrap();
        let pairs = build_pairs(&x, &x, &KernelParams::default()).unwrap();
        assert!((inner_product(&pairs) - 0.01).abs() < 1e-17);
    }

    #[test]
    fn pairs_respect_threshold_and_are_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_cloud(&mut rng, 300, 0.4);
        let z = random_cloud(&mut rng, 300, 0.4);
        let params = KernelParams::default();
        let pairs = build_pairs(&x, &z, &params).unwrap();
        let floor = params.sigma * params.sigma * params.tau;
        let mut seen = std::collections::HashSet::new();
        for p in &pairs.entries {
            assert!(p.k >= floor * (1.0 - 1e-12));
            assert!(p.c > 0.0 && p.c <= 1.0);
            assert!(seen.insert((p.i, p.j)));
        }
    }

    #[test]
    fn identical_clouds_have_zero_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_cloud(&mut rng, 150, 0.3);
        let params = KernelParams::default();
        let terms = cost_terms(&x, &x, &Pose::identity(), &params).unwrap();
        assert_eq!(terms.cross, self_inner_product(&x, &params));
        assert!(terms.cost().abs() < 1e-12);
    }

    #[test]
    fn inner_product_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_cloud(&mut rng, 120, 0.3);
        let z = random_cloud(&mut rng, 140, 0.3);
        let params = KernelParams::default();
        let a = build_pairs(&x, &z, &params).unwrap().inner_product();
        let b = build_pairs(&z, &x, &params).unwrap().inner_product();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn cost_is_invariant_under_common_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_cloud(&mut rng, 150, 0.3);
        let z = random_cloud(&mut rng, 150, 0.3);
        let params = KernelParams::default();
        let h = Pose::exp(&Twist::new(Vector3::new(0.05, -0.02, 0.1), Vector3::new(0.02, 0.01, -0.03)));
        let g = Pose::exp(&Twist::new(Vector3::new(-0.4, 0.9, 0.3), Vector3::new(1.0, -2.0, 0.5)));
        let j0 = cost(&x, &z, &h, &params).unwrap();
        let conj = g.compose(&h).compose(&g.inverse());
        let j1 = cost(&x.transformed(&g), &z.transformed(&g), &conj, &params).unwrap();
        assert!((j0 - j1).abs() < 1e-9, "{j0} vs {j1}");
    }
}
