//! Cluster recovery from a persistently noisy oracle, and the sampling
//! wrappers that pick how many points to feed it.
//!
//! Recovery works in rounds. Each round queries every pair inside a random
//! subgraph of size N, keeps vertices whose +1-degree clears a threshold
//! T(|V'|), pairs vertices whose +1-neighborhoods differ by at most
//! theta(|V'|), extracts the transitively-closed groups that reach the size
//! threshold, and grows extracted clusters over the remaining candidates by
//! majority vote. Unextracted subgraph vertices are retained and the
//! subgraph is topped back up for the next round.
//!
//! Paper-scale constants make N astronomically large for desk-scale inputs,
//! so the constants are configurable: `Desk` keeps every functional form but
//! shrinks the constant factors to values that recover desk-scale clusters.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::bounds::{
    noisy_m_with_constant, noisy_outlier_params_with_constants, BoundsError,
};
use crate::geometry::{
    assign, centroid_of, Assignment, CentroidSet, Dataset, GeometryError, Label,
};
use crate::oracle::{Answer, OracleError, OracleMode, OracleSession};
use crate::outlier::auto_gamma;
use crate::report::{
    misclassification_ratio, outlier_precision_recall, potential_metrics, ExperimentReport,
};

/// Constant-factor preset for the recovery thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    /// The theorem constants.
    Paper,
    /// Desk-scale constants; same functional forms.
    Desk,
}

impl ScaleMode {
    pub fn name(&self) -> &'static str {
        match self {
            ScaleMode::Paper => "paper",
            ScaleMode::Desk => "desk",
        }
    }

    pub fn constants(&self) -> NoisyConstants {
        match self {
            ScaleMode::Paper => NoisyConstants {
                subgraph: 64.0,
                sample: 128.0,
                vote: 16.0,
                t_slack: 6.0,
                theta_slack: 2.0,
            },
            ScaleMode::Desk => NoisyConstants {
                subgraph: 2.0,
                sample: 8.0,
                vote: 4.0,
                t_slack: 1.0,
                theta_slack: 0.5,
            },
        }
    }
}

/// The five tunable constants of the recovery procedure.
///
/// Consistency requires `subgraph >= t_slack^2`: a cluster meeting the size
/// threshold `N/K` must also clear the degree threshold `T`.
#[derive(Debug, Clone, Copy)]
pub struct NoisyConstants {
    /// Factor of `N = subgraph * K^2 ln(n) / (1-2p_e)^4`.
    pub subgraph: f64,
    /// Factor of the sample-size condition `M/ln M >= sample * aK^2/(2p_e-1)^4`.
    pub sample: f64,
    /// Factor of the vote count `c = vote / (1-2p_e)^2`.
    pub vote: f64,
    /// Factor of the degree-threshold slack `sqrt(N ln n)/(1-2p_e)`.
    pub t_slack: f64,
    /// Factor of the neighborhood-difference slack `sqrt(N ln n)`.
    pub theta_slack: f64,
}

/// Resolved thresholds for one recovery run over `n_total` candidates.
#[derive(Debug, Clone)]
pub struct NoisyParams {
    pub p_e: f64,
    pub k: usize,
    pub n_total: usize,
    /// Subgraph size N.
    pub subgraph_size: usize,
    /// Distinct vertices queried per majority vote.
    pub vote_count: usize,
    /// Minimum group size extracted in the pairing phase.
    pub size_threshold: usize,
    pub scale: ScaleMode,
    constants: NoisyConstants,
}

impl NoisyParams {
    pub fn new(k: usize, n_total: usize, p_e: f64, scale: ScaleMode) -> Result<Self, NoisyError> {
        if k == 0 || n_total == 0 {
            return Err(NoisyError::InvalidParams(
                "k and candidate count must be positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&p_e) {
            return Err(NoisyError::InvalidParams(format!(
                "p_e must lie in [0, 1/2), got {p_e}"
            )));
        }
        let c = scale.constants();
        let beta4 = (1.0 - 2.0 * p_e).powi(4);
        let ln_n = (n_total as f64).ln().max(1.0);
        let subgraph_size = (c.subgraph * (k * k) as f64 * ln_n / beta4).ceil() as usize;
        let vote_count = (c.vote / (1.0 - 2.0 * p_e).powi(2) * ln_n).ceil() as usize;
        let size_threshold = (subgraph_size as f64 / k as f64).ceil() as usize;
        Ok(Self {
            p_e,
            k,
            n_total,
            subgraph_size,
            vote_count,
            size_threshold,
            scale,
            constants: c,
        })
    }

    /// Override the extraction threshold (used when the subgraph is padded
    /// to absorb outliers).
    pub fn with_size_threshold(mut self, threshold: usize) -> Self {
        self.size_threshold = threshold.max(1);
        self
    }

    fn slack_base(&self) -> f64 {
        (self.subgraph_size as f64 * (self.n_total as f64).ln().max(1.0)).sqrt()
    }

    /// Degree threshold `T(a) = p_e a + t_slack sqrt(N ln n)/(1-2p_e)`.
    pub fn t_threshold(&self, a: usize) -> f64 {
        self.p_e * a as f64 + self.constants.t_slack * self.slack_base() / (1.0 - 2.0 * self.p_e)
    }

    /// Difference threshold
    /// `theta(a) = 2 p_e (1-p_e) a + theta_slack sqrt(N ln n)`.
    pub fn theta_threshold(&self, a: usize) -> f64 {
        2.0 * self.p_e * (1.0 - self.p_e) * a as f64
            + self.constants.theta_slack * self.slack_base()
    }
}

#[derive(Debug, Error)]
pub enum NoisyError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("recovery requires a noisy-mode oracle session")]
    NotNoisySession,
    #[error("dataset contains {0} outliers; use the outlier-aware pipeline")]
    OutliersPresent(usize),
    #[error("sample size M = {m} exceeds the dataset size {n}; use desk scale or grow n")]
    SampleTooLarge { m: u64, n: usize },
    #[error("recovered only {found} clusters, need {need}")]
    InsufficientClusters {
        found: usize,
        need: usize,
        recovered: Vec<Vec<usize>>,
    },
    #[error("no progress after {rounds} recovery rounds")]
    RoundBoundExceeded { rounds: usize, found: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Seed(#[from] crate::noiseless::SeedError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Signed edge lookup with one oracle query per unordered pair, ever.
struct EdgeCache {
    cache: HashMap<u64, bool>,
}

impl EdgeCache {
    fn new() -> Self {
        Self {
            cache: HashMap::new(),
        }
    }

    fn same(
        &mut self,
        session: &mut OracleSession,
        u: usize,
        v: usize,
    ) -> Result<bool, OracleError> {
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let key = ((lo as u64) << 32) | hi as u64;
        if let Some(&same) = self.cache.get(&key) {
            return Ok(same);
        }
        let same = session.query(lo, hi)? == Answer::Same;
        self.cache.insert(key, same);
        Ok(same)
    }
}

/// +1 adjacency of the queried subgraph as row bitmaps.
struct SignedSubgraph {
    words: usize,
    bits: Vec<u64>,
}

impl SignedSubgraph {
    fn build(
        session: &mut OracleSession,
        edges: &mut EdgeCache,
        vertices: &[usize],
    ) -> Result<Self, OracleError> {
        let len = vertices.len();
        let words = len.div_ceil(64);
        let mut bits = vec![0u64; len * words];
        for i in 0..len {
            for j in (i + 1)..len {
                if edges.same(session, vertices[i], vertices[j])? {
                    bits[i * words + j / 64] |= 1 << (j % 64);
                    bits[j * words + i / 64] |= 1 << (i % 64);
                }
            }
        }
        let _ = len;
        Ok(Self { words, bits })
    }

    fn degree(&self, i: usize) -> u32 {
        self.bits[i * self.words..(i + 1) * self.words]
            .iter()
            .map(|w| w.count_ones())
            .sum()
    }

    /// `|N+(i) xor N+(j)|`; when the pair's own edge is +1, i and j each
    /// belong to exactly one of the two neighborhoods and count toward it.
    fn sym_diff(&self, i: usize, j: usize) -> u32 {
        let a = &self.bits[i * self.words..(i + 1) * self.words];
        let b = &self.bits[j * self.words..(j + 1) * self.words];
        a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
    }
}

/// Majority vote of `v` against up to `vote_count` distinct members of a
/// cluster. Ties do not join.
fn majority_same<R: Rng>(
    session: &mut OracleSession,
    edges: &mut EdgeCache,
    v: usize,
    members: &[usize],
    vote_count: usize,
    rng: &mut R,
) -> Result<bool, OracleError> {
    let votes = vote_count.min(members.len());
    let mut picked: Vec<usize> = members.to_vec();
    for i in 0..votes {
        let j = rng.gen_range(i..picked.len());
        picked.swap(i, j);
    }
    let mut yes = 0usize;
    for &m in picked.iter().take(votes) {
        if edges.same(session, v, m)? {
            yes += 1;
        }
    }
    Ok(2 * yes > votes)
}

/// Run the three-phase recovery over `candidates`, returning the clusters
/// that reached the extraction threshold, in extraction order.
pub fn recover_clusters<R: Rng>(
    session: &mut OracleSession,
    candidates: &[usize],
    params: &NoisyParams,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>, NoisyError> {
    if !matches!(session.mode(), OracleMode::Noisy { .. }) {
        return Err(NoisyError::NotNoisySession);
    }
    if candidates.is_empty() {
        return Err(NoisyError::InvalidParams("empty candidate set".into()));
    }
    let n_sub = params.subgraph_size;
    let round_bound = (candidates.len() * params.k).div_ceil(n_sub) + 1;

    let mut edges = EdgeCache::new();
    let mut unassigned: Vec<usize> = candidates.to_vec();
    let mut v_prime: Vec<usize> = Vec::new();
    let mut active: Vec<Vec<usize>> = Vec::new();
    let mut rounds = 0usize;

    loop {
        // Phase 1: top the subgraph up to N from the unassigned pool.
        let mut grew = false;
        while v_prime.len() < n_sub && !unassigned.is_empty() {
            let i = rng.gen_range(0..unassigned.len());
            v_prime.push(unassigned.swap_remove(i));
            grew = true;
        }
        if v_prime.is_empty() {
            break;
        }
        let graph = SignedSubgraph::build(session, &mut edges, &v_prime)?;
        let a = v_prime.len();

        // Phase 2: pair high-degree vertices with small neighborhood
        // differences, close transitively, extract groups of threshold size.
        let t = params.t_threshold(a);
        let theta = params.theta_threshold(a);
        let eligible: Vec<usize> = (0..a)
            .filter(|&i| graph.degree(i) as f64 >= t)
            .collect();
        let mut uf = UnionFind::new(a);
        for (pos, &i) in eligible.iter().enumerate() {
            for &j in &eligible[pos + 1..] {
                if graph.sym_diff(i, j) as f64 <= theta {
                    uf.union(i, j);
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for &i in &eligible {
            let root = uf.find(i);
            groups.entry(root).or_default().push(i);
        }
        let mut extracted: Vec<Vec<usize>> = groups
            .into_values()
            .filter(|g| g.len() >= params.size_threshold)
            .map(|g| g.iter().map(|&i| v_prime[i]).collect())
            .collect();
        extracted.sort_by_key(|g| g[0]);

        if !extracted.is_empty() {
            let extracted_flat: std::collections::HashSet<usize> =
                extracted.iter().flatten().copied().collect();
            v_prime.retain(|v| !extracted_flat.contains(v));
            active.extend(extracted);
        } else if !grew {
            // Same subgraph, same answers: further rounds cannot differ.
            break;
        }

        // Phase 3: grow every active cluster over candidates outside the
        // subgraph by majority vote.
        let mut still_unassigned = Vec::with_capacity(unassigned.len());
        'vertices: for &v in unassigned.iter() {
            for cluster in active.iter_mut() {
                if majority_same(session, &mut edges, v, cluster, params.vote_count, rng)? {
                    cluster.push(v);
                    continue 'vertices;
                }
            }
            still_unassigned.push(v);
        }
        unassigned = still_unassigned;

        rounds += 1;
        if unassigned.is_empty() && v_prime.is_empty() {
            break;
        }
        if rounds >= round_bound {
            if active.is_empty() {
                return Err(NoisyError::RoundBoundExceeded {
                    rounds,
                    found: 0,
                });
            }
            break;
        }
    }
    Ok(active)
}

fn sample_without_replacement<R: Rng>(n: usize, m: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(m <= n);
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    indices.truncate(m);
    indices
}

fn session_noise(session: &OracleSession) -> Result<f64, NoisyError> {
    match session.mode() {
        OracleMode::Noisy { p_e } => Ok(p_e),
        OracleMode::Noiseless => Err(NoisyError::NotNoisySession),
    }
}

/// Keep the `k` largest clusters, preserving extraction order among them.
fn k_largest(mut clusters: Vec<Vec<usize>>, k: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..clusters.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(clusters[i].len()));
    let mut keep: Vec<usize> = order.into_iter().take(k).collect();
    keep.sort_unstable();
    let mut kept = Vec::with_capacity(k);
    for i in keep {
        kept.push(std::mem::take(&mut clusters[i]));
    }
    kept
}

fn finish_report(
    dataset: &Dataset,
    session: &OracleSession,
    report: &mut ExperimentReport,
    centers: &CentroidSet,
    assignment: &Assignment,
) -> Result<(), GeometryError> {
    let truth = session.truth();
    let metrics = potential_metrics(dataset, truth, centers)?;
    report.potential_achieved = metrics.achieved;
    report.potential_reference = metrics.reference;
    report.potential_ratio = metrics.ratio;
    report.misclassification_ratio = misclassification_ratio(truth, assignment, centers.k());
    let (precision, recall) = outlier_precision_recall(truth, assignment);
    report.outlier_precision = precision;
    report.outlier_recall = recall;
    Ok(())
}

/// Sample `M` points without replacement, recover `k` clusters among them,
/// and assign the whole dataset to the recovered centroids.
#[allow(clippy::too_many_arguments)]
pub fn run_noisy<R: Rng>(
    session: &mut OracleSession,
    dataset: &Dataset,
    k: usize,
    delta: f64,
    eps: f64,
    alpha: f64,
    scale: ScaleMode,
    rng: &mut R,
) -> Result<(CentroidSet, Assignment, ExperimentReport), NoisyError> {
    let p_e = session_noise(session)?;
    let outliers = session.truth().outlier_count();
    if outliers > 0 {
        return Err(NoisyError::OutliersPresent(outliers));
    }
    let constants = scale.constants();
    let (m_tilde, m) = noisy_m_with_constant(alpha, k, delta, eps, p_e, constants.sample)?;
    if m as usize > dataset.len() {
        return Err(NoisyError::SampleTooLarge {
            m,
            n: dataset.len(),
        });
    }
    let q0 = session.query_count();
    let sampled = sample_without_replacement(dataset.len(), m as usize, rng);
    let params = NoisyParams::new(k, m as usize, p_e, scale)?;
    let recovered = recover_clusters(session, &sampled, &params, rng)?;
    if recovered.len() < k {
        return Err(NoisyError::InsufficientClusters {
            found: recovered.len(),
            need: k,
            recovered,
        });
    }
    let clusters = k_largest(recovered, k);
    let centers = CentroidSet::new(
        clusters
            .iter()
            .map(|c| centroid_of(dataset, c))
            .collect::<Result<Vec<_>, _>>()?,
    )?;
    let assignment = assign(dataset, &centers)?;

    let mut report = ExperimentReport::base(0, 0);
    report.draws = m;
    report.queries_total = session.query_count() - q0;
    report.queries_phase1 = report.queries_total;
    report.scale_mode = Some(scale.name().to_string());
    report.bound_values.insert("m_tilde".into(), m_tilde);
    report.bound_values.insert("m_sample".into(), m as f64);
    report
        .bound_values
        .insert("n_subgraph".into(), params.subgraph_size as f64);
    finish_report(dataset, session, &mut report, &centers, &assignment)?;
    Ok((centers, assignment, report))
}

/// Noisy recovery with outliers: a larger sample and a padded subgraph keep
/// enough non-outliers in play; outliers behave as singleton clusters, fall
/// below the extraction threshold, and lose every majority vote. Assignment
/// uses the data-driven rejection radius over the recovered clusters.
#[allow(clippy::too_many_arguments)]
pub fn run_noisy_outlier<R: Rng>(
    session: &mut OracleSession,
    dataset: &Dataset,
    k: usize,
    delta: f64,
    eps: f64,
    alpha: f64,
    p_o: f64,
    scale: ScaleMode,
    rng: &mut R,
) -> Result<(CentroidSet, Assignment, ExperimentReport), NoisyError> {
    let p_e = session_noise(session)?;
    let constants = scale.constants();
    let params_raw = noisy_outlier_params_with_constants(
        alpha,
        k,
        delta,
        eps,
        p_e,
        p_o,
        constants.sample,
        constants.subgraph,
    )?;
    let m = params_raw.m.ceil() as u64;
    if m as usize > dataset.len() {
        return Err(NoisyError::SampleTooLarge {
            m,
            n: dataset.len(),
        });
    }
    let n_sub = (params_raw.n.ceil() as usize).max(1);
    // The pad M - M_tilde absorbs outliers; only the base portion counts
    // toward the per-cluster extraction threshold.
    let base_n = (params_raw.n - (params_raw.m - params_raw.m_tilde)).max(1.0);
    let threshold = (base_n / k as f64).ceil() as usize;

    let q0 = session.query_count();
    let sampled = sample_without_replacement(dataset.len(), m as usize, rng);
    let mut params = NoisyParams::new(k, m as usize, p_e, scale)?.with_size_threshold(threshold);
    params.subgraph_size = n_sub;
    let recovered = recover_clusters(session, &sampled, &params, rng)?;
    if recovered.len() < k {
        return Err(NoisyError::InsufficientClusters {
            found: recovered.len(),
            need: k,
            recovered,
        });
    }
    let clusters = k_largest(recovered, k);
    let truth = session.truth();
    let contamination = clusters
        .iter()
        .flatten()
        .filter(|&&p| truth.is_outlier(p))
        .count();

    let centers = CentroidSet::new(
        clusters
            .iter()
            .map(|c| centroid_of(dataset, c))
            .collect::<Result<Vec<_>, _>>()?,
    )?;
    let seeds = crate::noiseless::ClusterSeeds::from_clusters(dataset, clusters.clone())?;
    let gamma = auto_gamma(&seeds, dataset, &centers, eps);
    let gated = centers.clone().with_gamma(gamma)?;
    let mut labels = assign(dataset, &gated)?.labels().to_vec();
    for (c, members) in clusters.iter().enumerate() {
        for &p in members {
            labels[p] = Label::Cluster(c);
        }
    }
    let assignment = Assignment::new(labels);

    let mut report = ExperimentReport::base(0, 0);
    report.draws = m;
    report.queries_total = session.query_count() - q0;
    report.queries_phase1 = report.queries_total;
    report.scale_mode = Some(scale.name().to_string());
    report.bound_values.insert("m_tilde".into(), params_raw.m_tilde);
    report.bound_values.insert("m_sample".into(), m as f64);
    report.bound_values.insert("n_subgraph".into(), n_sub as f64);
    report
        .bound_values
        .insert("recovered_outlier_contamination".into(), contamination as f64);
    report.bound_values.insert("gamma_used".into(), gamma);
    finish_report(dataset, session, &mut report, &centers, &assignment)?;
    Ok((centers, assignment, report))
}

/// Map a recovered clustering onto ground truth: Some(true cluster) when the
/// recovered clusters are label-pure and hit distinct true clusters.
pub fn purity_mapping(truth: &crate::datagen::GroundTruth, clusters: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut seen = std::collections::HashSet::new();
    let mut mapping = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let mut label = None;
        for &p in cluster {
            match truth.label(p) {
                Label::Cluster(c) => {
                    if *label.get_or_insert(c) != c {
                        return None;
                    }
                }
                Label::Outlier => return None,
            }
        }
        let l = label?;
        if !seen.insert(l) {
            return None;
        }
        mapping.push(l);
    }
    Some(mapping)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, MixtureSpec};
    use crate::oracle::OracleSession;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(n: usize, k: usize, p_o: f64, seed: u64) -> MixtureSpec {
        let mut s = MixtureSpec::new(n, k, 2, seed);
        s.p_o = p_o;
        s
    }

    #[test]
    fn zero_noise_recovers_exactly() {
        let (ds, truth) = generate(&spec(800, 4, 0.0, 3)).unwrap();
        let candidates: Vec<usize> = (0..ds.len()).collect();
        let mut session = OracleSession::noisy(&truth, 0.0, 1).unwrap();
        let params = NoisyParams::new(4, ds.len(), 0.0, ScaleMode::Desk).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let clusters = recover_clusters(&mut session, &candidates, &params, &mut rng).unwrap();
        assert_eq!(clusters.len(), 4);
        let mapping = purity_mapping(&truth, &clusters).expect("pure clusters");
        // Every candidate recovered: sizes match the truth partition.
        let mut sizes: Vec<usize> = clusters.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        let mut expected: Vec<usize> = truth.cluster_sizes().to_vec();
        expected.sort_unstable();
        assert_eq!(sizes, expected);
        assert_eq!(mapping.len(), 4);
    }

    #[test]
    fn paper_mode_params_follow_theorem_formulas() {
        let n = 5000usize;
        let p_e = 0.1;
        let params = NoisyParams::new(3, n, p_e, ScaleMode::Paper).unwrap();
        let ln_n = (n as f64).ln();
        let beta4 = (1.0 - 2.0 * p_e).powi(4);
        let expected_n = (64.0 * 9.0 * ln_n / beta4).ceil() as usize;
        assert_eq!(params.subgraph_size, expected_n);
        let expected_votes = (16.0 / (1.0 - 2.0 * p_e).powi(2) * ln_n).ceil() as usize;
        assert_eq!(params.vote_count, expected_votes);
        assert_eq!(
            params.size_threshold,
            (expected_n as f64 / 3.0).ceil() as usize
        );
        // T(a) = p_e a + 6 sqrt(N ln n)/(1-2p_e); theta(a) = 2p_e(1-p_e)a + 2 sqrt(N ln n).
        let base = (expected_n as f64 * ln_n).sqrt();
        let a = 1234usize;
        assert!((params.t_threshold(a) - (p_e * a as f64 + 6.0 * base / 0.8)).abs() < 1e-9);
        assert!(
            (params.theta_threshold(a) - (2.0 * p_e * 0.9 * a as f64 + 2.0 * base)).abs() < 1e-9
        );
    }

    #[test]
    fn zero_noise_thresholds_reduce_to_slack() {
        let params = NoisyParams::new(4, 1000, 0.0, ScaleMode::Desk).unwrap();
        let base = params.slack_base();
        assert_eq!(params.t_threshold(500), 1.0 * base);
        assert_eq!(params.theta_threshold(500), 0.5 * base);
    }

    #[test]
    fn subgraph_pairs_queried_exactly_once() {
        let (ds, truth) = generate(&spec(300, 2, 0.0, 7)).unwrap();
        let candidates: Vec<usize> = (0..ds.len()).collect();
        let mut session = OracleSession::noisy(&truth, 0.1, 2).unwrap();
        let params = NoisyParams::new(2, ds.len(), 0.1, ScaleMode::Desk).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        recover_clusters(&mut session, &candidates, &params, &mut rng).unwrap();
        assert_eq!(session.query_count(), session.distinct_pair_count());
    }

    #[test]
    fn moderate_noise_recovers_equal_clusters() {
        let (ds, truth) = generate(&spec(1000, 4, 0.0, 11)).unwrap();
        let candidates: Vec<usize> = (0..ds.len()).collect();
        let mut successes = 0;
        let trials = 10;
        for t in 0..trials {
            let mut session = OracleSession::noisy(&truth, 0.1, 100 + t).unwrap();
            let params = NoisyParams::new(4, ds.len(), 0.1, ScaleMode::Desk).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(200 + t);
            let clusters =
                recover_clusters(&mut session, &candidates, &params, &mut rng).unwrap();
            if clusters.len() == 4 && purity_mapping(&truth, &clusters).is_some() {
                successes += 1;
            }
        }
        assert!(successes >= 9, "recovered cleanly in {successes}/{trials}");
    }

    #[test]
    fn query_envelope_is_bounded_across_sizes() {
        let p_e = 0.1;
        let mut ratios = Vec::new();
        for (i, &n) in [500usize, 1000, 2000].iter().enumerate() {
            let (ds, truth) = generate(&spec(n, 2, 0.0, 13 + i as u64)).unwrap();
            let candidates: Vec<usize> = (0..ds.len()).collect();
            let mut session = OracleSession::noisy(&truth, p_e, 17).unwrap();
            let params = NoisyParams::new(2, n, p_e, ScaleMode::Desk).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(19);
            recover_clusters(&mut session, &candidates, &params, &mut rng).unwrap();
            let envelope =
                n as f64 * 4.0 * (n as f64).ln() / (1.0 - 2.0 * p_e).powi(4);
            ratios.push(session.query_count() as f64 / envelope);
        }
        let max = ratios.iter().copied().fold(0.0, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max <= 2.0, "query envelope ratio too large: {ratios:?}");
        assert!(max / min <= 3.0, "query envelope not flat: {ratios:?}");
    }

    #[test]
    fn run_noisy_reduces_cleanly_at_zero_noise() {
        let (ds, truth) = generate(&spec(3000, 2, 0.0, 23)).unwrap();
        let mut session = OracleSession::noisy(&truth, 0.0, 29).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (_, assignment, report) = run_noisy(
            &mut session,
            &ds,
            2,
            0.2,
            0.2,
            1.0,
            ScaleMode::Desk,
            &mut rng,
        )
        .unwrap();
        assert_eq!(report.misclassification_ratio, 0.0);
        assert_eq!(assignment.outlier_count(), 0);
        // Sampled-mean centroid factor with the realized min cluster take.
        let m_min = truth
            .cluster_sizes()
            .iter()
            .map(|&s| s * report.draws as usize / ds.len())
            .min()
            .unwrap();
        let factor = 1.0 + 1.0 / (0.2 * m_min as f64);
        assert!(
            report.potential_ratio <= factor,
            "ratio {} vs factor {factor}",
            report.potential_ratio
        );
    }

    #[test]
    fn run_noisy_errors_when_m_exceeds_n() {
        let (ds, truth) = generate(&spec(1000, 2, 0.0, 37)).unwrap();
        let mut session = OracleSession::noisy(&truth, 0.25, 41).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        match run_noisy(
            &mut session,
            &ds,
            2,
            0.1,
            0.1,
            1.0,
            ScaleMode::Paper,
            &mut rng,
        ) {
            Err(NoisyError::SampleTooLarge { m, n }) => {
                assert!(m > 1000);
                assert_eq!(n, 1000);
            }
            other => panic!("expected SampleTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn run_noisy_m_matches_bounds_module() {
        let (ds, truth) = generate(&spec(5000, 2, 0.0, 47)).unwrap();
        let mut session = OracleSession::noisy(&truth, 0.1, 53).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let (_, _, report) = run_noisy(
            &mut session,
            &ds,
            2,
            0.2,
            0.2,
            1.0,
            ScaleMode::Desk,
            &mut rng,
        )
        .unwrap();
        let (m_tilde, m) =
            noisy_m_with_constant(1.0, 2, 0.2, 0.2, 0.1, 8.0).unwrap();
        assert_eq!(report.bound_values["m_tilde"], m_tilde);
        assert_eq!(report.bound_values["m_sample"], m as f64);
        assert_eq!(report.draws, m);
    }

    #[test]
    fn run_noisy_end_to_end_desk() {
        let (ds, truth) = generate(&spec(5000, 2, 0.0, 61)).unwrap();
        let mut good = 0;
        let trials = 50;
        for t in 0..trials {
            let mut session = OracleSession::noisy(&truth, 0.1, 600 + t).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(700 + t);
            let (_, _, report) = run_noisy(
                &mut session,
                &ds,
                2,
                0.2,
                0.2,
                1.0,
                ScaleMode::Desk,
                &mut rng,
            )
            .unwrap();
            if report.potential_ratio <= 1.2 {
                good += 1;
            }
        }
        // delta = 0.2: the 1+eps factor must hold in at least 1 - delta of trials.
        assert!(good >= 40, "ratio held in {good}/{trials}");
    }

    #[test]
    fn run_noisy_outlier_filters_outliers() {
        let (ds, truth) = generate(&spec(8000, 3, 0.2, 67)).unwrap();
        let mut session = OracleSession::noisy(&truth, 0.1, 71).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let (_, _, report) = run_noisy_outlier(
            &mut session,
            &ds,
            3,
            0.2,
            0.2,
            1.0,
            0.2,
            ScaleMode::Desk,
            &mut rng,
        )
        .unwrap();
        assert_eq!(report.bound_values["recovered_outlier_contamination"], 0.0);
        assert!(report.potential_ratio <= 1.2);
        assert_eq!(report.outlier_recall, 1.0);
    }

    #[test]
    fn outlier_params_reduce_when_p_o_zero() {
        let a = noisy_outlier_params_with_constants(1.0, 2, 0.2, 0.2, 0.1, 0.0, 8.0, 2.0).unwrap();
        assert!((a.m - (2.0 * a.m_tilde + (4.0f64 / 0.2).ln() / 2.0)).abs() < 1e-9);
        assert!(a.n >= a.m - a.m_tilde);
    }

    #[test]
    fn hoeffding_sizing_keeps_enough_non_outliers() {
        // Among M sampled points, the non-outlier count reaches M_tilde with
        // probability at least 1 - delta/4.
        let p_o = 0.2;
        let delta = 0.2;
        let (ds, truth) = generate(&spec(8000, 3, p_o, 79)).unwrap();
        let params =
            noisy_outlier_params_with_constants(1.0, 3, delta, 0.2, 0.1, p_o, 8.0, 2.0).unwrap();
        let m = params.m.ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let mut hits = 0;
        let trials = 1000;
        for _ in 0..trials {
            let sampled = sample_without_replacement(ds.len(), m, &mut rng);
            let non_outliers = sampled.iter().filter(|&&p| !truth.is_outlier(p)).count();
            if non_outliers as f64 >= params.m_tilde {
                hits += 1;
            }
        }
        let rate = hits as f64 / trials as f64;
        assert!(rate >= 1.0 - delta / 4.0, "rate {rate}");
    }

    #[test]
    fn run_noisy_rejects_outlier_datasets() {
        let (ds, truth) = generate(&spec(2000, 2, 0.2, 91)).unwrap();
        let mut session = OracleSession::noisy(&truth, 0.1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            run_noisy(&mut session, &ds, 2, 0.2, 0.2, 1.0, ScaleMode::Desk, &mut rng),
            Err(NoisyError::OutliersPresent(_))
        ));
    }

    #[test]
    fn recovery_demands_noisy_session() {
        let (_ds, truth) = generate(&spec(200, 2, 0.0, 89)).unwrap();
        let mut session = OracleSession::noiseless(&truth);
        let params = NoisyParams::new(2, 200, 0.1, ScaleMode::Desk).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let candidates: Vec<usize> = (0..200).collect();
        assert!(matches!(
            recover_clusters(&mut session, &candidates, &params, &mut rng),
            Err(NoisyError::NotNoisySession)
        ));
    }
}
