//! Synthetic ground-truth datasets: Gaussian mixtures with controlled size
//! imbalance and shell-separated outliers, structural property checks, and a
//! versioned dataset file format.
//!
//! Cluster points are sampled from isotropic Gaussians truncated at radius
//! `sigma * (sqrt(d) + 3)` so every cluster has a hard radius bound. Outliers
//! are placed on a shell at twice the largest per-cluster separation
//! threshold, measured from their nearest cluster centroid, which makes the
//! separation property hold by construction rather than with high probability.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{centroid_of, CentroidSet, Dataset, GeometryError, Label, Point};

/// Name of the generator PRNG, recorded in dataset headers.
pub const PRNG_NAME: &str = "chacha8";

/// Current dataset file format version.
pub const FORMAT_VERSION: u32 = 1;

/// Default `eps` used for separation thresholds when none is specified.
pub const DEFAULT_SEP_EPS: f64 = 0.1;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("infeasible mixture spec: {0}")]
    Infeasible(String),
    #[error("alpha must satisfy 1 <= alpha <= n/k, got {0}")]
    InvalidAlpha(f64),
    #[error("outlier fraction must lie in [0, 1), got {0}")]
    InvalidOutlierFraction(f64),
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("eps must lie in (0, 1), got {0}")]
    InvalidEps(f64),
    #[error("gamma-margin factor must exceed 1, got {0}")]
    InvalidMarginFactor(f64),
    #[error("ground truth carries no true centers")]
    MissingTrueCenters,
    #[error("ground truth has no clusters")]
    NoClusters,
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("label count {got} does not match dataset size {expected}")]
    LabelCountMismatch { expected: usize, got: usize },
    #[error("cluster index {index} out of range for k = {k}")]
    LabelOutOfRange { index: usize, k: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dataset file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Parameters of a synthetic Gaussian mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    /// Target imbalance; the smallest cluster gets `ceil(n(1-p_o)/(alpha k))` points.
    pub alpha: f64,
    /// Requested outlier fraction; the realized count is `round(n * p_o)`.
    pub p_o: f64,
    pub sigma: f64,
    /// Side length of the hypercube cluster centers are drawn from.
    pub center_spread: f64,
    /// Minimum pairwise center distance, in units of sigma.
    pub min_center_sep_sigmas: f64,
    /// `eps` used for the outlier separation thresholds.
    pub sep_eps: f64,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn new(n: usize, k: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            k,
            d,
            alpha: 1.0,
            p_o: 0.0,
            sigma: 0.05,
            center_spread: 2.0,
            min_center_sep_sigmas: 10.0,
            sep_eps: DEFAULT_SEP_EPS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.n == 0 || self.k == 0 || self.d == 0 {
            return Err(DatagenError::Infeasible(
                "n, k and d must all be positive".into(),
            ));
        }
        if !(self.alpha >= 1.0 && self.alpha <= self.n as f64 / self.k as f64) {
            return Err(DatagenError::InvalidAlpha(self.alpha));
        }
        if !(0.0..1.0).contains(&self.p_o) {
            return Err(DatagenError::InvalidOutlierFraction(self.p_o));
        }
        if self.sigma <= 0.0 || !self.sigma.is_finite() {
            return Err(DatagenError::InvalidSigma(self.sigma));
        }
        if !(0.0 < self.sep_eps && self.sep_eps < 1.0) {
            return Err(DatagenError::InvalidEps(self.sep_eps));
        }
        if self.center_spread <= 0.0 || self.min_center_sep_sigmas < 0.0 {
            return Err(DatagenError::Infeasible(
                "center_spread must be positive and min_center_sep_sigmas nonnegative".into(),
            ));
        }
        let fair = self.n as f64 * (1.0 - self.p_o) / (self.alpha * self.k as f64);
        if fair < 1.0 {
            return Err(DatagenError::Infeasible(format!(
                "n(1-p_o)/(alpha k) = {fair:.3} < 1; every cluster needs at least one point"
            )));
        }
        Ok(())
    }
}

/// Outlier separation quantities realized by a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationInfo {
    /// `eps` the thresholds were computed with.
    pub eps: f64,
    /// Smallest per-cluster threshold, i.e. the separation radius itself.
    pub gamma: f64,
    /// Per-cluster thresholds `radius_i + sqrt(eps * phi_i / s_i)`.
    pub per_cluster: Vec<f64>,
    /// Distance from every generated outlier to its nearest cluster centroid.
    pub shell_radius: f64,
    /// Largest `eps'` for which the separation property still holds, capped at 1.
    pub beta_squared: f64,
}

/// Hidden truth behind a dataset: per-point labels, cluster sizes, realized
/// outlier fraction, and the partition centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    labels: Vec<Label>,
    true_centers: Option<CentroidSet>,
    cluster_sizes: Vec<usize>,
    p_o: f64,
    separation: Option<SeparationInfo>,
}

impl GroundTruth {
    /// Build ground truth from per-point labels, recomputing cluster sizes
    /// and partition centroids. Every cluster index in `[0, k)` must occur.
    pub fn from_labels(
        dataset: &Dataset,
        labels: Vec<Label>,
        k: usize,
    ) -> Result<Self, DatagenError> {
        if labels.len() != dataset.len() {
            return Err(DatagenError::LabelCountMismatch {
                expected: dataset.len(),
                got: labels.len(),
            });
        }
        if k == 0 {
            return Err(DatagenError::NoClusters);
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        let mut outliers = 0usize;
        for (i, label) in labels.iter().enumerate() {
            match label {
                Label::Cluster(c) => {
                    if *c >= k {
                        return Err(DatagenError::LabelOutOfRange { index: *c, k });
                    }
                    members[*c].push(i);
                }
                Label::Outlier => outliers += 1,
            }
        }
        let mut centers = Vec::with_capacity(k);
        let mut sizes = Vec::with_capacity(k);
        for (c, m) in members.iter().enumerate() {
            if m.is_empty() {
                return Err(DatagenError::EmptyCluster(c));
            }
            sizes.push(m.len());
            centers.push(centroid_of(dataset, m)?);
        }
        Ok(Self {
            labels,
            true_centers: Some(CentroidSet::new(centers)?),
            cluster_sizes: sizes,
            p_o: outliers as f64 / dataset.len() as f64,
            separation: None,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Label {
        self.labels[index]
    }

    pub fn is_outlier(&self, index: usize) -> bool {
        self.labels[index].is_outlier()
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    pub fn p_o(&self) -> f64 {
        self.p_o
    }

    pub fn outlier_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_outlier()).count()
    }

    pub fn non_outlier_count(&self) -> usize {
        self.n() - self.outlier_count()
    }

    pub fn true_centers(&self) -> Option<&CentroidSet> {
        self.true_centers.as_ref()
    }

    pub fn separation(&self) -> Option<&SeparationInfo> {
        self.separation.as_ref()
    }

    /// Imbalance realized by the emitted cluster sizes.
    pub fn realized_alpha(&self) -> f64 {
        let s_min = *self.cluster_sizes.iter().min().expect("k >= 1") as f64;
        self.non_outlier_count() as f64 / (self.k() as f64 * s_min)
    }

    pub fn cluster_members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Label::Cluster(cluster))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn non_outlier_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_outlier())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn outlier_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_outlier())
            .map(|(i, _)| i)
            .collect()
    }

    /// Recompute and attach separation info for the given `eps`.
    pub fn with_separation(mut self, dataset: &Dataset, eps: f64) -> Result<Self, DatagenError> {
        let report = compute_gamma(dataset, &self, eps)?;
        let shell = self
            .outlier_indices()
            .iter()
            .map(|&o| {
                let centers = self.true_centers.as_ref().expect("centers present");
                centers
                    .centers()
                    .iter()
                    .map(|c| dataset.point(o).dist(c))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min);
        let beta_squared = beta_squared(dataset, &self, shell)?;
        self.separation = Some(SeparationInfo {
            eps,
            gamma: report.gamma,
            per_cluster: report.per_cluster_thresholds,
            shell_radius: shell,
            beta_squared,
        });
        Ok(self)
    }
}

/// Largest `eps'` (capped at 1) such that every cluster threshold computed
/// with `eps'` stays below the outlier shell distance.
fn beta_squared(
    dataset: &Dataset,
    truth: &GroundTruth,
    shell: f64,
) -> Result<f64, DatagenError> {
    if !shell.is_finite() {
        // No outliers: separation holds vacuously for any eps.
        return Ok(1.0);
    }
    let centers = truth
        .true_centers()
        .ok_or(DatagenError::MissingTrueCenters)?;
    let mut best = 1.0f64;
    for c in 0..truth.k() {
        let members = truth.cluster_members(c);
        let center = centers.center(c);
        let radius = members
            .iter()
            .map(|&i| dataset.point(i).dist(center))
            .fold(0.0, f64::max);
        let phi: f64 = members
            .iter()
            .map(|&i| dataset.point(i).sq_dist(center))
            .sum();
        if phi <= 0.0 {
            continue; // degenerate cluster, any eps works
        }
        let slack = shell - radius;
        if slack <= 0.0 {
            return Ok(0.0);
        }
        let eps_i = slack * slack * members.len() as f64 / phi;
        best = best.min(eps_i);
    }
    Ok((best * (1.0 - 1e-9)).min(1.0))
}

/// Outcome of [`compute_gamma`].
#[derive(Debug, Clone)]
pub struct GammaReport {
    /// `min_i threshold_i`, the separation radius.
    pub gamma: f64,
    pub per_cluster_thresholds: Vec<f64>,
    /// `(outlier index, cluster index)` pairs violating the threshold.
    pub violations: Vec<(usize, usize)>,
}

/// Per-cluster thresholds `max_y ||y - c_i|| + sqrt(eps phi_i / s_i)`, their
/// minimum, and every outlier that fails to clear some threshold.
pub fn compute_gamma(
    dataset: &Dataset,
    truth: &GroundTruth,
    eps: f64,
) -> Result<GammaReport, DatagenError> {
    if !(0.0 < eps && eps < 1.0) {
        return Err(DatagenError::InvalidEps(eps));
    }
    if truth.k() == 0 {
        return Err(DatagenError::NoClusters);
    }
    let mut thresholds = Vec::with_capacity(truth.k());
    for c in 0..truth.k() {
        let members = truth.cluster_members(c);
        if members.is_empty() {
            return Err(DatagenError::EmptyCluster(c));
        }
        let center = centroid_of(dataset, &members)?;
        let radius = members
            .iter()
            .map(|&i| dataset.point(i).dist(&center))
            .fold(0.0, f64::max);
        let phi: f64 = members
            .iter()
            .map(|&i| dataset.point(i).sq_dist(&center))
            .sum();
        thresholds.push(radius + (eps * phi / members.len() as f64).sqrt());
    }
    let gamma = thresholds.iter().copied().fold(f64::INFINITY, f64::min);

    let mut violations = Vec::new();
    let centers: Vec<Point> = (0..truth.k())
        .map(|c| centroid_of(dataset, &truth.cluster_members(c)))
        .collect::<Result<_, _>>()?;
    for o in truth.outlier_indices() {
        for (c, center) in centers.iter().enumerate() {
            if dataset.point(o).dist(center) <= thresholds[c] {
                violations.push((o, c));
            }
        }
    }
    Ok(GammaReport {
        gamma,
        per_cluster_thresholds: thresholds,
        violations,
    })
}

/// Check the margin property: for every pair of clusters `i != j`, every
/// `x in C_i`, `y in C_j` must satisfy `gamma ||x - c_i|| < ||y - c_i||`.
pub fn check_gamma_margin(
    dataset: &Dataset,
    truth: &GroundTruth,
    gamma: f64,
) -> Result<bool, DatagenError> {
    if gamma <= 1.0 || !gamma.is_finite() {
        return Err(DatagenError::InvalidMarginFactor(gamma));
    }
    let centers = truth
        .true_centers()
        .ok_or(DatagenError::MissingTrueCenters)?;
    for i in 0..truth.k() {
        let center = centers.center(i);
        let radius = truth
            .cluster_members(i)
            .iter()
            .map(|&x| dataset.point(x).dist(center))
            .fold(0.0, f64::max);
        // min over points of every other cluster (outliers are not cluster points)
        let mut min_cross = f64::INFINITY;
        for (y, label) in truth.labels().iter().enumerate() {
            if matches!(label, Label::Cluster(j) if *j != i) {
                min_cross = min_cross.min(dataset.point(y).dist(center));
            }
        }
        if min_cross.is_finite() && gamma * radius >= min_cross {
            return Ok(false);
        }
    }
    Ok(true)
}

fn sample_truncated_gaussian<R: Rng>(
    rng: &mut R,
    center: &[f64],
    sigma: f64,
    max_radius: f64,
) -> Vec<f64> {
    loop {
        let offsets: Vec<f64> = (0..center.len())
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z * sigma
            })
            .collect();
        let norm_sq: f64 = offsets.iter().map(|o| o * o).sum();
        if norm_sq.sqrt() <= max_radius {
            return center
                .iter()
                .zip(&offsets)
                .map(|(c, o)| c + o)
                .collect();
        }
    }
}

fn unit_direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// Cluster sizes: one cluster pinned at `s_min`, the remainder split equally
/// with largest remainders receiving one extra point. The pin is capped at
/// `floor(non_outliers / k)` so the allocation stays feasible when k does not
/// divide the point count; this costs at most one point of rounding slack.
fn allocate_sizes(non_outliers: usize, k: usize, alpha: f64) -> Result<Vec<usize>, DatagenError> {
    if k == 1 {
        return Ok(vec![non_outliers]);
    }
    let ceil_target = (non_outliers as f64 / (alpha * k as f64)).ceil() as usize;
    let s_min = ceil_target.min(non_outliers / k);
    if s_min == 0 {
        return Err(DatagenError::Infeasible(format!(
            "cannot allocate k = {k} clusters of at least s_min = {ceil_target} points \
             from {non_outliers} non-outliers"
        )));
    }
    let rest = non_outliers - s_min;
    let base = rest / (k - 1);
    let extras = rest % (k - 1);
    let mut sizes = Vec::with_capacity(k);
    sizes.push(s_min);
    for i in 0..k - 1 {
        sizes.push(base + usize::from(i < extras));
    }
    Ok(sizes)
}

/// Generate a dataset and its ground truth. Deterministic given the spec.
pub fn generate(spec: &MixtureSpec) -> Result<(Dataset, GroundTruth), DatagenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let outlier_count = (spec.n as f64 * spec.p_o).round() as usize;
    let non_outliers = spec.n - outlier_count;
    if non_outliers < spec.k {
        return Err(DatagenError::Infeasible(format!(
            "only {non_outliers} non-outliers for k = {} clusters",
            spec.k
        )));
    }
    let sizes = allocate_sizes(non_outliers, spec.k, spec.alpha)?;

    // Cluster centers: uniform in the hypercube, redrawn until pairwise
    // separation of min_center_sep_sigmas * sigma holds. A stuck center
    // (greedy placement can corner itself, especially in low dimension)
    // restarts the whole set.
    let min_sep = spec.min_center_sep_sigmas * spec.sigma;
    let half = spec.center_spread / 2.0;
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(spec.k);
    let mut restarts = 0u32;
    while centers.len() < spec.k {
        let mut attempts = 0u32;
        loop {
            let candidate: Vec<f64> = (0..spec.d).map(|_| rng.gen_range(-half..half)).collect();
            let ok = centers.iter().all(|c| {
                let d2: f64 = c
                    .iter()
                    .zip(&candidate)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d2.sqrt() >= min_sep
            });
            if ok {
                centers.push(candidate);
                break;
            }
            attempts += 1;
            if attempts > 1_000 {
                centers.clear();
                restarts += 1;
                if restarts > 1_000 {
                    return Err(DatagenError::Infeasible(format!(
                        "could not place {} centers at pairwise distance {:.4} \
                         inside a hypercube of side {:.4}",
                        spec.k, min_sep, spec.center_spread
                    )));
                }
                break;
            }
        }
    }

    let trunc_radius = spec.sigma * ((spec.d as f64).sqrt() + 3.0);
    let mut points: Vec<Point> = Vec::with_capacity(spec.n);
    let mut labels: Vec<Label> = Vec::with_capacity(spec.n);
    for (c, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            let coords = sample_truncated_gaussian(&mut rng, &centers[c], spec.sigma, trunc_radius);
            points.push(Point::new(coords)?);
            labels.push(Label::Cluster(c));
        }
    }

    // Realized partition centroids and separation thresholds.
    let mut realized_centers: Vec<Point> = Vec::with_capacity(spec.k);
    let mut thresholds: Vec<f64> = Vec::with_capacity(spec.k);
    {
        let mut start = 0usize;
        for &size in &sizes {
            let slice = &points[start..start + size];
            let center = crate::geometry::centroid(slice)?;
            let radius = slice.iter().map(|p| p.dist(&center)).fold(0.0, f64::max);
            let phi: f64 = slice.iter().map(|p| p.sq_dist(&center)).sum();
            thresholds.push(radius + (spec.sep_eps * phi / size as f64).sqrt());
            realized_centers.push(center);
            start += size;
        }
    }
    let shell = 2.0 * thresholds.iter().copied().fold(0.0, f64::max);

    // Outliers on the shell: nearest centroid sits at exactly `shell`.
    for _ in 0..outlier_count {
        let mut attempts = 0u32;
        loop {
            let j = rng.gen_range(0..spec.k);
            let dir = unit_direction(&mut rng, spec.d);
            let coords: Vec<f64> = realized_centers[j]
                .coords()
                .iter()
                .zip(&dir)
                .map(|(c, u)| c + shell * u)
                .collect();
            let candidate = Point::new(coords)?;
            let ok = realized_centers
                .iter()
                .enumerate()
                .all(|(l, c)| l == j || candidate.dist(c) >= shell);
            if ok {
                points.push(candidate);
                labels.push(Label::Outlier);
                break;
            }
            attempts += 1;
            if attempts > 100_000 {
                return Err(DatagenError::Infeasible(
                    "could not place outliers on the separation shell".into(),
                ));
            }
        }
    }

    let dataset = Dataset::from_points(points)?;
    let truth = GroundTruth::from_labels(&dataset, labels, spec.k)?
        .with_separation(&dataset, spec.sep_eps)?;

    // Post-condition: no outlier may sit inside any cluster threshold.
    let report = compute_gamma(&dataset, &truth, spec.sep_eps)?;
    if !report.violations.is_empty() {
        return Err(DatagenError::Infeasible(format!(
            "generated outliers violate separation thresholds: {:?}",
            report.violations
        )));
    }

    Ok((dataset, truth))
}

/// Header line of the dataset file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u32,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub p_o: f64,
    pub seed: u64,
    pub prng: String,
    pub sigma: f64,
}

impl DatasetHeader {
    pub fn for_spec(spec: &MixtureSpec, truth: &GroundTruth) -> Self {
        Self {
            version: FORMAT_VERSION,
            n: truth.n(),
            d: spec.d,
            k: spec.k,
            p_o: truth.p_o(),
            seed: spec.seed,
            prng: PRNG_NAME.to_string(),
            sigma: spec.sigma,
        }
    }
}

/// Write the dataset file: one JSON header line, then one CSV row per point
/// (`x_1,...,x_d,label`, label -1 for outliers). UTF-8, LF line endings.
pub fn write_dataset(
    path: &Path,
    dataset: &Dataset,
    truth: &GroundTruth,
    header: &DatasetHeader,
) -> Result<(), DatagenError> {
    let mut out = String::new();
    out.push_str(&serde_json::to_string(header).expect("header serializes"));
    out.push('\n');
    for (i, p) in dataset.points().iter().enumerate() {
        for c in p.coords() {
            write!(out, "{c},").expect("write to string");
        }
        let label = match truth.label(i) {
            Label::Cluster(c) => c as i64,
            Label::Outlier => -1,
        };
        writeln!(out, "{label}").expect("write to string");
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a dataset file written by [`write_dataset`]. Ground truth separation
/// info is recomputed with [`DEFAULT_SEP_EPS`] when the file contains outliers.
pub fn read_dataset(path: &Path) -> Result<(Dataset, GroundTruth, DatasetHeader), DatagenError> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| DatagenError::Malformed("empty file".into()))??;
    let header: DatasetHeader = serde_json::from_str(&header_line)
        .map_err(|e| DatagenError::Malformed(format!("bad header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(DatagenError::Malformed(format!(
            "unsupported format version {}",
            header.version
        )));
    }

    let mut points = Vec::with_capacity(header.n);
    let mut labels = Vec::with_capacity(header.n);
    let mut seen_clusters: HashSet<usize> = HashSet::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.d + 1 {
            return Err(DatagenError::Malformed(format!(
                "row {}: expected {} fields, got {}",
                lineno + 2,
                header.d + 1,
                fields.len()
            )));
        }
        let coords: Vec<f64> = fields[..header.d]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| DatagenError::Malformed(format!("row {}: {e}", lineno + 2)))
            })
            .collect::<Result<_, _>>()?;
        let label_raw: i64 = fields[header.d]
            .parse()
            .map_err(|e| DatagenError::Malformed(format!("row {}: {e}", lineno + 2)))?;
        let label = if label_raw < 0 {
            Label::Outlier
        } else {
            let c = label_raw as usize;
            if c >= header.k {
                return Err(DatagenError::Malformed(format!(
                    "row {}: cluster index {} out of range for k = {}",
                    lineno + 2,
                    c,
                    header.k
                )));
            }
            seen_clusters.insert(c);
            Label::Cluster(c)
        };
        points.push(Point::new(coords)?);
        labels.push(label);
    }
    if points.len() != header.n {
        return Err(DatagenError::Malformed(format!(
            "expected {} rows, got {}",
            header.n,
            points.len()
        )));
    }
    let dataset = Dataset::from_points(points)?;
    let mut truth = GroundTruth::from_labels(&dataset, labels, header.k)?;
    if truth.outlier_count() > 0 {
        truth = truth.with_separation(&dataset, DEFAULT_SEP_EPS)?;
    }
    Ok((dataset, truth, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn balanced_spec_gives_equal_sizes() {
        let spec = MixtureSpec::new(100, 4, 2, 7);
        let (_, truth) = generate(&spec).unwrap();
        assert_eq!(truth.cluster_sizes(), &[25, 25, 25, 25]);
        assert_eq!(truth.outlier_count(), 0);
    }

    #[test]
    fn imbalanced_spec_pins_s_min() {
        let mut spec = MixtureSpec::new(100, 4, 2, 7);
        spec.alpha = 2.0;
        let (_, truth) = generate(&spec).unwrap();
        let s_min = *truth.cluster_sizes().iter().min().unwrap();
        assert_eq!(s_min, 13); // ceil(100 / 8)
        let realized = truth.realized_alpha();
        assert!((realized - 100.0 / 52.0).abs() < 1e-12);
        assert!(realized <= 2.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = MixtureSpec::new(200, 3, 2, 42);
        spec.p_o = 0.1;
        let (ds1, t1) = generate(&spec).unwrap();
        let (ds2, t2) = generate(&spec).unwrap();
        assert_eq!(ds1, ds2);
        assert_eq!(t1.labels(), t2.labels());
    }

    #[test]
    fn infeasible_spec_is_rejected() {
        let mut spec = MixtureSpec::new(10, 4, 2, 1);
        spec.alpha = 0.5;
        assert!(matches!(generate(&spec), Err(DatagenError::InvalidAlpha(_))));

        let mut spec = MixtureSpec::new(8, 4, 2, 1);
        spec.alpha = 2.0;
        spec.p_o = 0.0;
        // n(1-p_o)/(alpha k) = 1 is feasible; shrink n to break it
        spec.n = 7;
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn gamma_margin_hand_example() {
        // Cluster A = {(0,0),(1,0)}, B = {(2,0)}.
        let ds = Dataset::from_points(vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0]), pt(&[2.0, 0.0])])
            .unwrap();
        let truth = GroundTruth::from_labels(
            &ds,
            vec![Label::Cluster(0), Label::Cluster(0), Label::Cluster(1)],
            2,
        )
        .unwrap();
        assert!(check_gamma_margin(&ds, &truth, 2.0).unwrap());
        assert!(!check_gamma_margin(&ds, &truth, 4.0).unwrap());
    }

    #[test]
    fn gamma_margin_singletons_at_distance() {
        let ds = Dataset::from_points(vec![pt(&[0.0, 0.0]), pt(&[10.0, 0.0])]).unwrap();
        let truth =
            GroundTruth::from_labels(&ds, vec![Label::Cluster(0), Label::Cluster(1)], 2).unwrap();
        assert!(check_gamma_margin(&ds, &truth, 2.0).unwrap());
    }

    #[test]
    fn gamma_margin_on_separated_mixtures() {
        // Centers at >= 20 sigma: margin 1.5 must hold essentially always.
        let mut hits = 0;
        for seed in 0..100 {
            let mut spec = MixtureSpec::new(200, 3, 2, seed);
            spec.min_center_sep_sigmas = 20.0;
            let (ds, truth) = generate(&spec).unwrap();
            if check_gamma_margin(&ds, &truth, 1.5).unwrap() {
                hits += 1;
            }
        }
        assert!(hits >= 99, "margin held in only {hits}/100 seeds");
    }

    #[test]
    fn compute_gamma_hand_example() {
        let ds = Dataset::from_points(vec![pt(&[0.0, 0.0]), pt(&[2.0, 0.0])]).unwrap();
        let truth =
            GroundTruth::from_labels(&ds, vec![Label::Cluster(0), Label::Cluster(0)], 1).unwrap();
        let report = compute_gamma(&ds, &truth, 0.5).unwrap();
        // radius 1, phi = 2, s = 2: 1 + sqrt(0.5 * 2 / 2) = 1 + sqrt(0.5)
        assert!((report.gamma - (1.0 + 0.5f64.sqrt())).abs() < 1e-12);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn compute_gamma_eps_to_zero_is_min_radius() {
        let mut spec = MixtureSpec::new(300, 3, 2, 5);
        spec.p_o = 0.1;
        let (ds, truth) = generate(&spec).unwrap();
        let report = compute_gamma(&ds, &truth, 1e-12).unwrap();
        let centers = truth.true_centers().unwrap();
        let min_radius = (0..truth.k())
            .map(|c| {
                truth
                    .cluster_members(c)
                    .iter()
                    .map(|&i| ds.point(i).dist(centers.center(c)))
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((report.gamma - min_radius).abs() < 1e-6 * min_radius.max(1.0));
    }

    #[test]
    fn generated_outliers_never_violate_thresholds() {
        for seed in 0..20 {
            let mut spec = MixtureSpec::new(400, 4, 3, seed);
            spec.p_o = 0.2;
            let (ds, truth) = generate(&spec).unwrap();
            let report = compute_gamma(&ds, &truth, spec.sep_eps).unwrap();
            assert!(report.violations.is_empty());
            let sep = truth.separation().unwrap();
            assert!(sep.shell_radius > sep.gamma);
            assert!(sep.beta_squared > 0.0);
        }
    }

    #[test]
    fn file_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut spec = MixtureSpec::new(150, 3, 4, 99);
        spec.p_o = 0.12;
        let (ds, truth) = generate(&spec).unwrap();
        let header = DatasetHeader::for_spec(&spec, &truth);
        write_dataset(&path, &ds, &truth, &header).unwrap();
        let (ds2, truth2, header2) = read_dataset(&path).unwrap();
        assert_eq!(ds, ds2);
        assert_eq!(truth.labels(), truth2.labels());
        assert_eq!(truth.cluster_sizes(), truth2.cluster_sizes());
        assert_eq!(truth.p_o(), truth2.p_o());
        assert_eq!(header, header2);

        // Writing again must be byte-identical.
        let path2 = dir.path().join("data2.csv");
        write_dataset(&path2, &ds2, &truth2, &header2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        /// Write-then-read reproduces points bit-exactly and truth exactly,
        /// for arbitrary feasible specs.
        #[test]
        fn file_round_trip_property(
            n in 50usize..300,
            k in 1usize..5,
            d in 1usize..4,
            p_o in 0.0f64..0.3,
            seed in 0u64..1000,
        ) {
            let mut spec = MixtureSpec::new(n, k, d, seed);
            spec.p_o = p_o;
            prop_assume!(spec.validate().is_ok());
            prop_assume!(n as f64 * (1.0 - p_o) >= k as f64);
            let (ds, truth) = generate(&spec).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("prop.csv");
            let header = DatasetHeader::for_spec(&spec, &truth);
            write_dataset(&path, &ds, &truth, &header).unwrap();
            let (ds2, truth2, header2) = read_dataset(&path).unwrap();
            prop_assert_eq!(&ds, &ds2);
            prop_assert_eq!(truth.labels(), truth2.labels());
            prop_assert_eq!(truth.cluster_sizes(), truth2.cluster_sizes());
            prop_assert_eq!(truth.p_o(), truth2.p_o());
            prop_assert_eq!(truth.true_centers(), truth2.true_centers());
            prop_assert_eq!(&header, &header2);
        }
    }

    #[test]
    fn missing_true_centers_is_an_error() {
        let ds = Dataset::from_points(vec![pt(&[0.0]), pt(&[1.0])]).unwrap();
        let mut truth =
            GroundTruth::from_labels(&ds, vec![Label::Cluster(0), Label::Cluster(0)], 1).unwrap();
        truth.true_centers = None;
        assert!(matches!(
            check_gamma_margin(&ds, &truth, 2.0),
            Err(DatagenError::MissingTrueCenters)
        ));
    }
}
