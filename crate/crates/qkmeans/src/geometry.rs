//! Core vector math: K-means potential, centroids, nearest-center assignment.
//!
//! All distances are squared Euclidean, accumulated in `f64` in index order so
//! repeated runs produce bit-identical values. Types are immutable after
//! construction and safe to share across threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("center set is empty")]
    EmptyCenters,
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("non-finite coordinate in point")]
    NonFinite,
    #[error("gamma must be nonnegative, got {0}")]
    NegativeGamma(f64),
    #[error("point index {index} out of range for dataset of size {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

/// A point in d-dimensional Euclidean space. Coordinates are finite `f64`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.is_empty() {
            return Err(GeometryError::EmptyPointSet);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Squared Euclidean distance to `other`. Dimensions must already agree.
    pub fn sq_dist(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.coords.len(), other.coords.len());
        let mut acc = 0.0;
        for (a, b) in self.coords.iter().zip(other.coords.iter()) {
            let d = a - b;
            acc += d * d;
        }
        acc
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.sq_dist(other).sqrt()
    }
}

/// An indexed collection of points sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Point>,
    dim: usize,
}

impl Dataset {
    pub fn from_points(points: Vec<Point>) -> Result<Self, GeometryError> {
        let Some(first) = points.first() else {
            return Err(GeometryError::EmptyPointSet);
        };
        let dim = first.dim();
        for p in &points {
            if p.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        Ok(Self { points, dim })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, index: usize) -> &Point {
        &self.points[index]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }
}

/// K centroids plus an optional outlier-rejection radius.
///
/// When `gamma` is set, [`assign`] labels any point farther than `gamma` from
/// every center as an outlier. [`potential`] always ignores `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidSet {
    centers: Vec<Point>,
    gamma: Option<f64>,
}

impl CentroidSet {
    pub fn new(centers: Vec<Point>) -> Result<Self, GeometryError> {
        let Some(first) = centers.first() else {
            return Err(GeometryError::EmptyCenters);
        };
        let dim = first.dim();
        for c in &centers {
            if c.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
        }
        Ok(Self {
            centers,
            gamma: None,
        })
    }

    /// Attach an outlier-rejection radius. Infinity is allowed and means
    /// "never reject".
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self, GeometryError> {
        if gamma < 0.0 || gamma.is_nan() {
            return Err(GeometryError::NegativeGamma(gamma));
        }
        self.gamma = Some(gamma);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].dim()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn center(&self, i: usize) -> &Point {
        &self.centers[i]
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }
}

/// Per-point cluster label. `Outlier` is a distinct variant rather than a
/// reserved integer so it cannot be mistaken for a cluster index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Cluster(usize),
    Outlier,
}

impl Label {
    pub fn is_outlier(&self) -> bool {
        matches!(self, Label::Outlier)
    }

    pub fn cluster(&self) -> Option<usize> {
        match self {
            Label::Cluster(i) => Some(*i),
            Label::Outlier => None,
        }
    }
}

/// Labels for every point of a dataset, in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    labels: Vec<Label>,
}

impl Assignment {
    pub fn new(labels: Vec<Label>) -> Self {
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> Label {
        self.labels[index]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn outlier_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_outlier()).count()
    }
}

/// Index of the nearest center and the squared distance to it.
/// Ties break toward the lowest center index.
pub fn nearest_center(point: &Point, centers: &CentroidSet) -> (usize, f64) {
    let mut best = 0;
    let mut best_sq = point.sq_dist(centers.center(0));
    for (i, c) in centers.centers().iter().enumerate().skip(1) {
        let sq = point.sq_dist(c);
        if sq < best_sq {
            best = i;
            best_sq = sq;
        }
    }
    (best, best_sq)
}

fn check_dims(points: &Dataset, centers: &CentroidSet) -> Result<(), GeometryError> {
    if centers.k() == 0 {
        return Err(GeometryError::EmptyCenters);
    }
    if points.dim() != centers.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: points.dim(),
            got: centers.dim(),
        });
    }
    Ok(())
}

/// K-means potential: sum over points of the squared distance to the nearest
/// center. The `gamma` field of `centers` is ignored.
pub fn potential(points: &Dataset, centers: &CentroidSet) -> Result<f64, GeometryError> {
    check_dims(points, centers)?;
    let mut acc = 0.0;
    for p in points.points() {
        acc += nearest_center(p, centers).1;
    }
    Ok(acc)
}

/// Potential restricted to the points named by `indices` (duplicates allowed).
pub fn potential_over(
    points: &Dataset,
    indices: &[usize],
    centers: &CentroidSet,
) -> Result<f64, GeometryError> {
    check_dims(points, centers)?;
    let mut acc = 0.0;
    for &i in indices {
        if i >= points.len() {
            return Err(GeometryError::IndexOutOfRange {
                index: i,
                len: points.len(),
            });
        }
        acc += nearest_center(points.point(i), centers).1;
    }
    Ok(acc)
}

/// Coordinatewise arithmetic mean of a nonempty point slice.
pub fn centroid(points: &[Point]) -> Result<Point, GeometryError> {
    let Some(first) = points.first() else {
        return Err(GeometryError::EmptyPointSet);
    };
    let dim = first.dim();
    let mut sums = vec![0.0; dim];
    for p in points {
        if p.dim() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        for (s, c) in sums.iter_mut().zip(p.coords()) {
            *s += c;
        }
    }
    let n = points.len() as f64;
    for s in &mut sums {
        *s /= n;
    }
    Point::new(sums)
}

/// Mean of the dataset points named by `indices`, honoring multiplicity.
pub fn centroid_of(points: &Dataset, indices: &[usize]) -> Result<Point, GeometryError> {
    if indices.is_empty() {
        return Err(GeometryError::EmptyPointSet);
    }
    let dim = points.dim();
    let mut sums = vec![0.0; dim];
    for &i in indices {
        if i >= points.len() {
            return Err(GeometryError::IndexOutOfRange {
                index: i,
                len: points.len(),
            });
        }
        for (s, c) in sums.iter_mut().zip(points.point(i).coords()) {
            *s += c;
        }
    }
    let n = indices.len() as f64;
    for s in &mut sums {
        *s /= n;
    }
    Point::new(sums)
}

/// Assign every point to its nearest center, breaking ties toward the lowest
/// center index. With `gamma` set, points farther than `gamma` from every
/// center are labeled [`Label::Outlier`].
pub fn assign(points: &Dataset, centers: &CentroidSet) -> Result<Assignment, GeometryError> {
    check_dims(points, centers)?;
    let gamma_sq = centers.gamma().map(|g| g * g);
    let mut labels = Vec::with_capacity(points.len());
    for p in points.points() {
        let (idx, sq) = nearest_center(p, centers);
        let label = match gamma_sq {
            Some(gs) if sq > gs => Label::Outlier,
            _ => Label::Cluster(idx),
        };
        labels.push(label);
    }
    Ok(Assignment::new(labels))
}
