//! Two-phase noiseless seeding in the presence of outliers.
//!
//! Phase 1 draws points until K proto-clusters each hold two distinct
//! members. A pair of distinct Same-linked points can never include an
//! outlier (outlier queries always answer Different), so disposing of
//! singleton clusters afterwards removes every sampled outlier. Phase 2
//! continues Algorithm-style seeding from the K surviving clusters, throwing
//! away any draw that answers Different against all K representatives.
//! Unqueried points are finally assigned by nearest center, subject to an
//! outlier-rejection radius.
//!
//! Pairing counts distinct members rather than raw draws: re-drawing the same
//! index must not "pair" a singleton with itself, or a twice-drawn outlier
//! would survive disposal.

use rand::Rng;
use thiserror::Error;

use crate::bounds::thm_qkmwol;
use crate::geometry::{assign, Assignment, CentroidSet, Dataset, GeometryError, Label};
use crate::noiseless::{estimate_centers, ClusterSeeds, SeedConfig, SeedError};
use crate::oracle::{Answer, OracleError, OracleSession};
use crate::report::{
    misclassification_ratio, outlier_precision_recall, potential_metrics, ExperimentReport,
};

/// Proto-clusters accumulated by Phase 1.
#[derive(Debug, Clone, Default)]
pub struct PairSeedState {
    /// Point-index lists in draw order; repeats possible.
    pub proto_clusters: Vec<Vec<usize>>,
    /// Number of clusters holding at least two distinct members.
    pub paired_count: usize,
}

/// Queries spent on one draw, for per-draw accounting checks.
#[derive(Debug, Clone, Copy)]
pub struct DrawCost {
    pub point: u32,
    pub queries: u32,
}

#[derive(Debug)]
pub struct Phase1Outcome {
    pub state: PairSeedState,
    pub draws: u64,
    pub draw_log: Vec<DrawCost>,
}

#[derive(Debug)]
pub struct Phase2Outcome {
    pub seeds: ClusterSeeds,
    pub draws: u64,
    /// Draws that answered Different against every representative. Under a
    /// noiseless oracle these are exactly the sampled outliers.
    pub removed: Vec<usize>,
}

/// Outlier-rejection radius: a fixed value or a per-run estimate from the
/// seeded clusters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    Fixed(f64),
    Auto,
}

#[derive(Debug, Error)]
pub enum OutlierError {
    #[error("exceeded {max} draws in phase 1 with {paired} clusters paired")]
    Phase1MaxDraws {
        max: u64,
        paired: usize,
        partial: PairSeedState,
    },
    #[error("phase 1 must run against a noiseless oracle")]
    NoisySession,
    #[error(
        "eps = {eps} exceeds the separation margin beta^2 = {beta_squared} of the ground truth"
    )]
    EpsAboveBetaSquared { eps: f64, beta_squared: f64 },
    #[error(transparent)]
    Seed(#[from] SeedError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Phase 1: sample with replacement, querying one member of each existing
/// proto-cluster, until `k` clusters hold two distinct members each; then
/// dispose of every cluster that never paired.
pub fn phase1_pair_seed<R: Rng>(
    session: &mut OracleSession,
    dataset: &Dataset,
    k: usize,
    max_draws: Option<u64>,
    rng: &mut R,
) -> Result<Phase1Outcome, OutlierError> {
    if !session.is_noiseless() {
        return Err(OutlierError::NoisySession);
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut distinct: Vec<usize> = Vec::new();
    let mut paired = 0usize;
    let mut draws = 0u64;
    let mut draw_log = Vec::new();

    while paired < k {
        if let Some(max) = max_draws {
            if draws >= max {
                return Err(OutlierError::Phase1MaxDraws {
                    max,
                    paired,
                    partial: PairSeedState {
                        proto_clusters: clusters,
                        paired_count: paired,
                    },
                });
            }
        }
        let x = rng.gen_range(0..dataset.len());
        draws += 1;
        let mut queries = 0u32;
        let mut joined = false;
        for c in 0..clusters.len() {
            let rep = clusters[c][0];
            let same = if rep == x {
                true
            } else {
                queries += 1;
                session.query(rep, x)? == Answer::Same
            };
            if same {
                let is_new = !clusters[c].contains(&x);
                clusters[c].push(x);
                if is_new {
                    distinct[c] += 1;
                    if distinct[c] == 2 {
                        paired += 1;
                    }
                }
                joined = true;
                break;
            }
        }
        if !joined {
            clusters.push(vec![x]);
            distinct.push(1);
        }
        draw_log.push(DrawCost {
            point: x as u32,
            queries,
        });
    }

    // Dispose of clusters that never paired; sampled outliers are all here.
    let survivors: Vec<Vec<usize>> = clusters
        .into_iter()
        .zip(&distinct)
        .filter(|(_, d)| **d >= 2)
        .map(|(c, _)| c)
        .collect();
    debug_assert_eq!(survivors.len(), k);
    Ok(Phase1Outcome {
        state: PairSeedState {
            paired_count: survivors.len(),
            proto_clusters: survivors,
        },
        draws,
        draw_log,
    })
}

/// Phase 2: continue seeding from K outlier-free clusters. Each draw is
/// queried against the K representatives; a full sweep of Different answers
/// discards the draw. Terminates when every cluster holds
/// `ceil(k/(delta eps))` members.
pub fn phase2_filtered_seed<R: Rng>(
    session: &mut OracleSession,
    dataset: &Dataset,
    state: &PairSeedState,
    cfg: &SeedConfig,
    rng: &mut R,
) -> Result<Phase2Outcome, OutlierError> {
    let mut seeds = ClusterSeeds::from_clusters(dataset, state.proto_clusters.clone())?;
    let m = cfg.points_per_cluster();
    let mut draws = 0u64;
    let mut removed = Vec::new();

    while seeds.clusters().iter().any(|c| c.len() < m) {
        if let Some(max) = cfg.max_draws {
            if draws >= max {
                let found = seeds.k();
                return Err(SeedError::MaxDrawsExceeded {
                    max,
                    found,
                    partial: seeds,
                }
                .into());
            }
        }
        let y = rng.gen_range(0..dataset.len());
        draws += 1;
        let mut joined = false;
        for c in 0..seeds.k() {
            let rep = seeds.representatives()[c];
            let same = if rep == y {
                true
            } else {
                session.query(rep, y)? == Answer::Same
            };
            if same {
                seeds.join(dataset, c, y);
                joined = true;
                break;
            }
        }
        if !joined {
            removed.push(y);
        }
    }
    Ok(Phase2Outcome {
        seeds,
        draws,
        removed,
    })
}

/// Data-driven rejection radius: the smallest over clusters of
/// `max distance of queried points to the estimated centroid
///  + sqrt(eps * phi_hat / |S_i|)`.
pub fn auto_gamma(seeds: &ClusterSeeds, dataset: &Dataset, centers: &CentroidSet, eps: f64) -> f64 {
    let mut gamma = f64::INFINITY;
    for (i, members) in seeds.clusters().iter().enumerate() {
        let center = centers.center(i);
        let mut max_dist = 0.0f64;
        let mut phi = 0.0f64;
        for &p in members {
            let sq = dataset.point(p).sq_dist(center);
            phi += sq;
            max_dist = max_dist.max(sq.sqrt());
        }
        gamma = gamma.min(max_dist + (eps * phi / members.len() as f64).sqrt());
    }
    gamma
}

/// Full pipeline: pair-seed, filtered-seed, estimate centers, and assign all
/// points by nearest center within the rejection radius. Members of seed
/// clusters keep their oracle-confirmed cluster.
pub fn run_outlier<R: Rng>(
    session: &mut OracleSession,
    dataset: &Dataset,
    cfg: &SeedConfig,
    gamma: GammaMode,
    rng: &mut R,
) -> Result<(CentroidSet, Assignment, ExperimentReport), OutlierError> {
    if !session.is_noiseless() {
        return Err(OutlierError::NoisySession);
    }
    let truth = session.truth();
    if let Some(sep) = truth.separation() {
        if cfg.eps > sep.beta_squared {
            return Err(OutlierError::EpsAboveBetaSquared {
                eps: cfg.eps,
                beta_squared: sep.beta_squared,
            });
        }
    }

    let q0 = session.query_count();
    let phase1 = phase1_pair_seed(session, dataset, cfg.k, cfg.max_draws, rng)?;
    let q1 = session.query_count() - q0;
    let phase2 = phase2_filtered_seed(session, dataset, &phase1.state, cfg, rng)?;
    let q2 = session.query_count() - q0 - q1;

    let centers = estimate_centers(&phase2.seeds, dataset)?;
    let gamma_value = match gamma {
        GammaMode::Fixed(g) => g,
        GammaMode::Auto => auto_gamma(&phase2.seeds, dataset, &centers, cfg.eps),
    };
    let gated = centers.clone().with_gamma(gamma_value)?;
    let mut labels = assign(dataset, &gated)?.labels().to_vec();
    for (c, members) in phase2.seeds.clusters().iter().enumerate() {
        for &p in members {
            labels[p] = Label::Cluster(c);
        }
    }
    let assignment = Assignment::new(labels);

    let truth = session.truth();
    let metrics = potential_metrics(dataset, truth, &centers)?;
    let mut report = ExperimentReport::base(0, 0);
    report.draws = phase1.draws + phase2.draws;
    report.queries_phase1 = q1;
    report.queries_phase2 = q2;
    report.queries_total = q1 + q2;
    report.potential_achieved = metrics.achieved;
    report.potential_reference = metrics.reference;
    report.potential_ratio = metrics.ratio;
    report.misclassification_ratio = misclassification_ratio(truth, &assignment, centers.k());
    let (precision, recall) = outlier_precision_recall(truth, &assignment);
    report.outlier_precision = precision;
    report.outlier_recall = recall;
    if let Ok(bounds) = thm_qkmwol(
        truth.realized_alpha(),
        cfg.k,
        cfg.delta,
        cfg.eps,
        truth.p_o(),
    ) {
        report
            .bound_values
            .insert("thm_qkmwol_phase1".into(), bounds.phase1);
        report
            .bound_values
            .insert("thm_qkmwol_phase2".into(), bounds.phase2);
        report
            .bound_values
            .insert("thm_qkmwol_total".into(), bounds.total);
    }
    report.bound_values.insert("gamma_used".into(), gamma_value);
    Ok((centers, assignment, report))
}
