//! Noiseless query seeding: draw points uniformly with replacement, place
//! each by querying one representative per discovered cluster, and stop once
//! the K largest clusters each hold `ceil(K / (delta eps))` points.
//!
//! A drawn point is compared against representatives in cluster-creation
//! order (optionally nearest-estimated-centroid first); the first Same answer
//! places it, and a full sweep of Different answers opens a new cluster.
//! Drawing a representative itself is a free Same: the oracle does not accept
//! self-queries, and no information is gained.

use rand::Rng;
use thiserror::Error;

use crate::bounds::dixie_bound;
use crate::geometry::{centroid_of, Assignment, CentroidSet, Dataset, GeometryError};
use crate::oracle::{Answer, OracleError, OracleSession};
use crate::report::{
    misclassification_ratio, outlier_precision_recall, potential_metrics, ExperimentReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeOrder {
    /// Query representatives in cluster-creation order. The per-point query
    /// accounting of the complexity analysis assumes this order.
    Creation,
    /// Query the cluster with the nearest running centroid first.
    NearestCentroid,
}

#[derive(Debug, Clone)]
pub struct SeedConfig {
    pub k: usize,
    pub delta: f64,
    pub eps: f64,
    /// Hard cap on draws; exceeding it signals a mis-specified dataset.
    pub max_draws: Option<u64>,
    pub probe_order: ProbeOrder,
}

impl SeedConfig {
    pub fn new(k: usize, delta: f64, eps: f64) -> Result<Self, SeedError> {
        if k == 0 {
            return Err(SeedError::InvalidConfig("k must be >= 1".into()));
        }
        if !(0.0 < delta && delta < 1.0) || !(0.0 < eps && eps < 1.0) {
            return Err(SeedError::InvalidConfig(
                "delta and eps must lie in (0, 1)".into(),
            ));
        }
        Ok(Self {
            k,
            delta,
            eps,
            max_draws: None,
            probe_order: ProbeOrder::Creation,
        })
    }

    /// Seed points required per cluster: `ceil(k / (delta eps))`.
    pub fn points_per_cluster(&self) -> usize {
        (self.k as f64 / (self.delta * self.eps)).ceil() as usize
    }
}

/// Partial clusters accumulated while querying. Clusters hold point indices
/// in draw order, with repeats when the sampler re-draws a point; the
/// representative is always the first member.
#[derive(Debug, Clone, Default)]
pub struct ClusterSeeds {
    clusters: Vec<Vec<usize>>,
    representatives: Vec<usize>,
    // Running coordinate sums for the nearest-centroid probe order.
    sums: Vec<Vec<f64>>,
}

impl ClusterSeeds {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pre-seeded clusters; the representative is each cluster's first member.
    pub fn from_clusters(dataset: &Dataset, clusters: Vec<Vec<usize>>) -> Result<Self, SeedError> {
        let mut seeds = Self::new();
        for members in clusters {
            let Some(&rep) = members.first() else {
                return Err(SeedError::EmptyCluster);
            };
            seeds.clusters.push(Vec::new());
            seeds.representatives.push(rep);
            seeds.sums.push(vec![0.0; dataset.dim()]);
            let cluster = seeds.clusters.len() - 1;
            for member in members {
                seeds.push_member(dataset, cluster, member);
            }
        }
        Ok(seeds)
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn representatives(&self) -> &[usize] {
        &self.representatives
    }

    pub fn total_points(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Append a point to an existing cluster.
    pub(crate) fn join(&mut self, dataset: &Dataset, cluster: usize, point: usize) {
        self.push_member(dataset, cluster, point);
    }

    fn push_member(&mut self, dataset: &Dataset, cluster: usize, point: usize) {
        self.clusters[cluster].push(point);
        for (s, c) in self.sums[cluster]
            .iter_mut()
            .zip(dataset.point(point).coords())
        {
            *s += c;
        }
    }

    fn open_cluster(&mut self, dataset: &Dataset, point: usize) {
        self.clusters.push(Vec::new());
        self.representatives.push(point);
        self.sums.push(vec![0.0; dataset.dim()]);
        let cluster = self.clusters.len() - 1;
        self.push_member(dataset, cluster, point);
    }

    /// Cluster probe order for a drawn point.
    fn probe_sequence(&self, dataset: &Dataset, point: usize, order: ProbeOrder) -> Vec<usize> {
        let mut sequence: Vec<usize> = (0..self.clusters.len()).collect();
        if order == ProbeOrder::NearestCentroid {
            let coords = dataset.point(point).coords();
            let mut keyed: Vec<(f64, usize)> = sequence
                .iter()
                .map(|&c| {
                    let len = self.clusters[c].len() as f64;
                    let d2: f64 = self.sums[c]
                        .iter()
                        .zip(coords)
                        .map(|(s, x)| {
                            let diff = s / len - x;
                            diff * diff
                        })
                        .sum();
                    (d2, c)
                })
                .collect();
            keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            sequence = keyed.into_iter().map(|(_, c)| c).collect();
        }
        sequence
    }

    /// Sizes sorted descending.
    fn sizes_desc(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.clusters.iter().map(Vec::len).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("exceeded {max} draws with {found} clusters discovered")]
    MaxDrawsExceeded {
        max: u64,
        found: usize,
        partial: ClusterSeeds,
    },
    #[error("expected {expected} clusters, found {found}")]
    ClusterCountMismatch { expected: usize, found: usize },
    #[error("seed cluster is empty")]
    EmptyCluster,
    #[error("invalid seed config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Place a drawn point: scan representatives in probe order, join on the
/// first Same, open a new cluster after a full sweep of Different answers.
/// Returns the queries spent on this draw.
pub(crate) fn place_draw(
    session: &mut OracleSession,
    dataset: &Dataset,
    seeds: &mut ClusterSeeds,
    point: usize,
    order: ProbeOrder,
) -> Result<(u64, PlaceOutcome), OracleError> {
    let mut queries = 0u64;
    for cluster in seeds.probe_sequence(dataset, point, order) {
        let rep = seeds.representatives()[cluster];
        if rep == point {
            seeds.push_member(dataset, cluster, point);
            return Ok((queries, PlaceOutcome::Joined(cluster)));
        }
        queries += 1;
        if session.query(rep, point)? == Answer::Same {
            seeds.push_member(dataset, cluster, point);
            return Ok((queries, PlaceOutcome::Joined(cluster)));
        }
    }
    seeds.open_cluster(dataset, point);
    Ok((queries, PlaceOutcome::Opened))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PlaceOutcome {
    Joined(usize),
    Opened,
}

fn stop_reached(seeds: &ClusterSeeds, k: usize, m: usize) -> bool {
    if seeds.k() < k {
        return false;
    }
    let sizes = seeds.sizes_desc();
    sizes[k - 1] >= m
}

/// Draw uniformly with replacement until at least `k` clusters exist and the
/// `k` largest each hold `ceil(k/(delta eps))` points. Returns the seeds and
/// the total number of draws.
pub fn seed<R: Rng>(
    session: &mut OracleSession,
    dataset: &Dataset,
    cfg: &SeedConfig,
    rng: &mut R,
) -> Result<(ClusterSeeds, u64), SeedError> {
    seed_from(session, dataset, cfg, ClusterSeeds::new(), rng)
}

/// [`seed`] continued from pre-formed clusters.
pub fn seed_from<R: Rng>(
    session: &mut OracleSession,
    dataset: &Dataset,
    cfg: &SeedConfig,
    mut seeds: ClusterSeeds,
    rng: &mut R,
) -> Result<(ClusterSeeds, u64), SeedError> {
    let m = cfg.points_per_cluster();
    let mut draws = 0u64;
    while !stop_reached(&seeds, cfg.k, m) {
        if let Some(max) = cfg.max_draws {
            if draws >= max {
                let found = seeds.k();
                return Err(SeedError::MaxDrawsExceeded {
                    max,
                    found,
                    partial: seeds,
                });
            }
        }
        let point = rng.gen_range(0..dataset.len());
        draws += 1;
        place_draw(session, dataset, &mut seeds, point, cfg.probe_order)?;
    }
    Ok((seeds, draws))
}

/// Centroid of each seed cluster, in cluster-creation order.
pub fn estimate_centers(seeds: &ClusterSeeds, dataset: &Dataset) -> Result<CentroidSet, SeedError> {
    if seeds.k() == 0 {
        return Err(SeedError::EmptyCluster);
    }
    let centers = seeds
        .clusters()
        .iter()
        .map(|members| centroid_of(dataset, members))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CentroidSet::new(centers)?)
}

/// Seed, estimate centers, assign every point to its nearest center, and
/// report queries, draws, and quality metrics against the session's truth.
pub fn run_noiseless<R: Rng>(
    session: &mut OracleSession,
    dataset: &Dataset,
    cfg: &SeedConfig,
    rng: &mut R,
) -> Result<(CentroidSet, Assignment, ExperimentReport), SeedError> {
    let queries_before = session.query_count();
    let (seeds, draws) = seed(session, dataset, cfg, rng)?;
    if seeds.k() != cfg.k {
        return Err(SeedError::ClusterCountMismatch {
            expected: cfg.k,
            found: seeds.k(),
        });
    }
    let centers = estimate_centers(&seeds, dataset)?;
    let assignment = crate::geometry::assign(dataset, &centers)?;
    let queries = session.query_count() - queries_before;

    let truth = session.truth();
    let metrics = potential_metrics(dataset, truth, &centers)?;
    let mut report = ExperimentReport::base(0, 0);
    report.draws = draws;
    report.queries_total = queries;
    report.queries_phase1 = queries;
    report.potential_achieved = metrics.achieved;
    report.potential_reference = metrics.reference;
    report.potential_ratio = metrics.ratio;
    report.misclassification_ratio = misclassification_ratio(truth, &assignment, centers.k());
    let (precision, recall) = outlier_precision_recall(truth, &assignment);
    report.outlier_precision = precision;
    report.outlier_recall = recall;
    report.bound_values.insert(
        "dixie_query_bound".into(),
        cfg.k as f64 * dixie_bound(truth.realized_alpha(), cfg.k, cfg.points_per_cluster()),
    );
    Ok((centers, assignment, report))
}
