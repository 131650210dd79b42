//! Chief surface discretization, perception-cone visibility and clustering
//! of the points that are still uninspected.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Default chief radius (m).
pub const DEFAULT_CHIEF_RADIUS: f64 = 10.0;
/// Default requested number of surface points.
pub const DEFAULT_POINT_COUNT: usize = 100;
/// Upper bound on k for the uninspected-point clustering.
pub const MAX_CLUSTERS: usize = 10;
/// Lloyd iteration cap for the clustering.
pub const KMEANS_MAX_ITERS: usize = 50;

/// Points on the chief surface with their inspection flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionPointSet {
    points: Vec<Vector3<f64>>,
    inspected: Vec<bool>,
    radius: f64,
}

impl InspectionPointSet {
    /// Builds a set from explicit surface points; all start uninspected.
    pub fn from_points(points: Vec<Vector3<f64>>, radius: f64) -> Result<Self, GeometryError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidRadius(radius));
        }
        if points.is_empty() {
            return Err(GeometryError::ZeroPointCount);
        }
        let inspected = vec![false; points.len()];
        Ok(Self {
            points,
            inspected,
            radius,
        })
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn inspected(&self) -> &[bool] {
        &self.inspected
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn inspected_count(&self) -> usize {
        self.inspected.iter().filter(|&&f| f).count()
    }

    pub fn all_inspected(&self) -> bool {
        self.inspected.iter().all(|&f| f)
    }

    pub fn is_inspected(&self, idx: usize) -> bool {
        self.inspected[idx]
    }

    /// Marks a point inspected. Returns true when the flag was newly set.
    pub fn mark_inspected(&mut self, idx: usize) -> bool {
        !std::mem::replace(&mut self.inspected[idx], true)
    }

    pub fn reset_flags(&mut self) {
        self.inspected.iter_mut().for_each(|f| *f = false);
    }

    pub fn uninspected_points(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.points
            .iter()
            .zip(&self.inspected)
            .filter(|(_, &f)| !f)
            .map(|(p, _)| p)
    }
}

/// Near-equal-area point distribution on a sphere of radius `radius`.
///
/// The latitude/longitude cell construction runs on the unit sphere so the
/// resulting count depends only on `requested`; points are then scaled to
/// the chief radius. The returned count is generally close to, but not
/// exactly, `requested`. A single requested point is placed at the north
/// pole.
pub fn generate_sphere_points(
    requested: usize,
    radius: f64,
) -> Result<InspectionPointSet, GeometryError> {
    if requested == 0 {
        return Err(GeometryError::ZeroPointCount);
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(GeometryError::InvalidRadius(radius));
    }
    if requested == 1 {
        return InspectionPointSet::from_points(vec![Vector3::new(0.0, 0.0, radius)], radius);
    }

    let cell_area = 4.0 * PI / requested as f64;
    let cell_side = cell_area.sqrt();
    let rings = ((PI / cell_side).round() as usize).max(1);
    let d_theta = PI / rings as f64;
    let d_phi = cell_area / d_theta;

    let mut points = Vec::with_capacity(requested + requested / 5);
    for m in 0..rings {
        let theta = PI * (m as f64 + 0.5) / rings as f64;
        let (sin_t, cos_t) = theta.sin_cos();
        let per_ring = ((TAU * sin_t / d_phi).round() as usize).max(1);
        for k in 0..per_ring {
            let phi = TAU * k as f64 / per_ring as f64;
            let (sin_p, cos_p) = phi.sin_cos();
            points.push(radius * Vector3::new(sin_t * cos_p, sin_t * sin_p, cos_t));
        }
    }
    InspectionPointSet::from_points(points, radius)
}

/// Right-hand side of the perception-cone test exactly as the inequality is
/// usually written: `r_c [1 - (|p_a| - r_c) / |p_a|]`.
pub fn cone_threshold_expanded(agent_distance: f64, radius: f64) -> f64 {
    radius * (1.0 - (agent_distance - radius) / agent_distance)
}

/// Simplified cone threshold `r_c² / |p_a|`.
pub fn cone_threshold(agent_distance: f64, radius: f64) -> f64 {
    radius * radius / agent_distance
}

/// True when `point` lies on the part of the sphere facing the agent, i.e.
/// inside the horizon seen from `agent_pos`. Boundary points count as
/// visible.
pub fn in_perception_cone(agent_pos: &Vector3<f64>, point: &Vector3<f64>, radius: f64) -> bool {
    let dist = agent_pos.norm();
    agent_pos.dot(point) / dist >= cone_threshold(dist, radius)
}

/// Indices of every point inside the agent's perception cone.
pub fn visible_points(
    agent_pos: &Vector3<f64>,
    pts: &InspectionPointSet,
) -> Result<Vec<usize>, GeometryError> {
    let dist = agent_pos.norm();
    let radius = pts.radius();
    if !(dist > radius) {
        return Err(GeometryError::AgentInsideChief {
            distance: dist,
            radius,
        });
    }
    let los = agent_pos / dist;
    let threshold = cone_threshold(dist, radius);
    Ok(pts
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| los.dot(p) >= threshold)
        .map(|(i, _)| i)
        .collect())
}

/// Result of clustering the uninspected points.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// Unit vector toward the most populous cluster, or zero when nothing is
    /// left to inspect.
    pub direction: Vector3<f64>,
    pub cluster_sizes: Vec<usize>,
}

impl ClusterResult {
    fn empty() -> Self {
        Self {
            direction: Vector3::zeros(),
            cluster_sizes: Vec::new(),
        }
    }
}

/// Output of a Lloyd k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vector3<f64>>,
    pub assignments: Vec<usize>,
    pub sizes: Vec<usize>,
    pub iterations: usize,
}

/// k-means++ seeded Lloyd iterations over 3-D points.
///
/// `k` is clipped to the number of points. Empty clusters keep their
/// previous centroid.
pub fn kmeans(points: &[Vector3<f64>], k: usize, seed: u64, max_iters: usize) -> KMeans {
    let k = k.min(points.len());
    if k == 0 {
        return KMeans {
            centroids: Vec::new(),
            assignments: Vec::new(),
            sizes: Vec::new(),
            iterations: 0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| (p - centroids[0]).norm_squared())
        .collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, d) in nearest.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // all remaining points coincide with existing centroids
            rng.random_range(0..points.len())
        };
        let c = points[next];
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min((p - c).norm_squared());
        }
        centroids.push(c);
    }

    let mut assignments = vec![usize::MAX; points.len()];
    let mut iterations = 0;
    for _ in 0..max_iters.max(1) {
        iterations += 1;
        let mut changed = false;
        for (a, p) in assignments.iter_mut().zip(points) {
            let best = nearest_centroid(p, &centroids);
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        let mut sums = vec![Vector3::zeros(); k];
        let mut counts = vec![0usize; k];
        for (a, p) in assignments.iter().zip(points) {
            sums[*a] += p;
            counts[*a] += 1;
        }
        for ((c, s), n) in centroids.iter_mut().zip(&sums).zip(&counts) {
            if *n > 0 {
                *c = s / *n as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let mut sizes = vec![0usize; k];
    for a in &assignments {
        sizes[*a] += 1;
    }
    KMeans {
        centroids,
        assignments,
        sizes,
        iterations,
    }
}

fn nearest_centroid(p: &Vector3<f64>, centroids: &[Vector3<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = (p - c).norm_squared();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Direction to the largest cluster of uninspected points.
pub fn cluster_uninspected(pts: &InspectionPointSet, seed: u64) -> ClusterResult {
    let remaining: Vec<Vector3<f64>> = pts.uninspected_points().copied().collect();
    if remaining.is_empty() {
        return ClusterResult::empty();
    }
    let k = MAX_CLUSTERS.min(remaining.len());
    let km = kmeans(&remaining, k, seed, KMEANS_MAX_ITERS);
    // first maximum wins ties
    let mut largest = 0;
    for (i, s) in km.sizes.iter().enumerate() {
        if *s > km.sizes[largest] {
            largest = i;
        }
    }
    let centroid = km.centroids[largest];
    let norm = centroid.norm();
    let direction = if norm > 1e-9 * pts.radius() {
        centroid / norm
    } else {
        // centroid collapsed onto the chief centre; fall back to a member
        let member = km
            .assignments
            .iter()
            .position(|&a| a == largest)
            .map(|i| remaining[i])
            .unwrap_or(remaining[0]);
        member.normalize()
    };
    ClusterResult {
        direction,
        cluster_sizes: km.sizes,
    }
}
