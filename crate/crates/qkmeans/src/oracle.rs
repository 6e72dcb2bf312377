//! Simulated same-cluster oracles with persistent noise and query accounting.
//!
//! A noisy answer is the ground answer flipped by a Bernoulli(p_e) draw that
//! is a pure function of (session seed, unordered pair), so repeating a query
//! always returns the same answer without any per-pair memory. The mixer is
//! a splitmix64 chain over the pair key; its name is recorded in reports.

use std::collections::HashSet;

use thiserror::Error;

use crate::datagen::GroundTruth;
use crate::geometry::Label;

/// Name of the pair-keyed flip hash, recorded in experiment reports.
pub const PAIR_HASH_NAME: &str = "splitmix64-pair";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    Same,
    Different,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMode {
    Noiseless,
    Noisy { p_e: f64 },
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("self-query on point index {0}")]
    SelfQuery(usize),
    #[error("point index {index} out of range ({len} points)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("flip probability must lie in [0, 1/2), got {0}")]
    InvalidNoise(f64),
}

/// A query-answering session over one ground truth.
///
/// Counters are the only mutable state; answers themselves are pure in
/// (seed, pair). One session per trial; parallelism belongs at trial level.
pub struct OracleSession<'a> {
    truth: &'a GroundTruth,
    mode: OracleMode,
    seed: u64,
    query_count: u64,
    distinct_pair_count: u64,
    seen: HashSet<u64>,
}

impl<'a> OracleSession<'a> {
    pub fn noiseless(truth: &'a GroundTruth) -> Self {
        Self {
            truth,
            mode: OracleMode::Noiseless,
            seed: 0,
            query_count: 0,
            distinct_pair_count: 0,
            seen: HashSet::new(),
        }
    }

    pub fn noisy(truth: &'a GroundTruth, p_e: f64, seed: u64) -> Result<Self, OracleError> {
        if !(0.0..0.5).contains(&p_e) {
            return Err(OracleError::InvalidNoise(p_e));
        }
        Ok(Self {
            truth,
            mode: OracleMode::Noisy { p_e },
            seed,
            query_count: 0,
            distinct_pair_count: 0,
            seen: HashSet::new(),
        })
    }

    pub fn truth(&self) -> &GroundTruth {
        self.truth
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn is_noiseless(&self) -> bool {
        matches!(self.mode, OracleMode::Noiseless)
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    pub fn distinct_pair_count(&self) -> u64 {
        self.distinct_pair_count
    }

    /// Zero both counters and start a fresh distinct-pair epoch. Answers are
    /// unaffected: they depend only on the seed and the pair.
    pub fn reset_counters(&mut self) {
        self.query_count = 0;
        self.distinct_pair_count = 0;
        self.seen.clear();
    }

    /// Ask whether points `a` and `b` share a cluster. Both counters update;
    /// the answer for a given unordered pair never changes within a session.
    pub fn query(&mut self, a: usize, b: usize) -> Result<Answer, OracleError> {
        let n = self.truth.n();
        if a >= n {
            return Err(OracleError::IndexOutOfRange { index: a, len: n });
        }
        if b >= n {
            return Err(OracleError::IndexOutOfRange { index: b, len: n });
        }
        if a == b {
            return Err(OracleError::SelfQuery(a));
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let ground = ground_answer(self.truth, lo, hi);
        let answer = match self.mode {
            OracleMode::Noiseless => ground,
            OracleMode::Noisy { p_e } => {
                if flip(self.seed, lo as u64, hi as u64, p_e) {
                    toggle(ground)
                } else {
                    ground
                }
            }
        };
        self.query_count += 1;
        let key = ((lo as u64) << 32) | hi as u64;
        if self.seen.insert(key) {
            self.distinct_pair_count += 1;
        }
        Ok(answer)
    }
}

/// Truth-level answer: Same iff both points are non-outliers with equal
/// labels. Any pair involving an outlier answers Different.
pub fn ground_answer(truth: &GroundTruth, a: usize, b: usize) -> Answer {
    match (truth.label(a), truth.label(b)) {
        (Label::Cluster(i), Label::Cluster(j)) if i == j => Answer::Same,
        _ => Answer::Different,
    }
}

fn toggle(a: Answer) -> Answer {
    match a {
        Answer::Same => Answer::Different,
        Answer::Different => Answer::Same,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn pair_hash(seed: u64, lo: u64, hi: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = splitmix64(z ^ splitmix64(lo.wrapping_mul(0xD6E8_FEB8_6659_FD93)));
    z = splitmix64(z ^ splitmix64(hi.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)));
    splitmix64(z)
}

fn flip(seed: u64, lo: u64, hi: u64, p_e: f64) -> bool {
    // Top 53 bits give a uniform draw in [0, 1).
    let u = (pair_hash(seed, lo, hi) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    u < p_e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Dataset, Point};

    fn line_dataset(n: usize) -> Dataset {
        Dataset::from_points((0..n).map(|i| Point::new(vec![i as f64]).unwrap()).collect())
            .unwrap()
    }

    /// Two clusters of `half` points each, then `outliers` outlier points.
    fn truth_two_clusters(half: usize, outliers: usize) -> (Dataset, Vec<Label>) {
        let n = 2 * half + outliers;
        let ds = line_dataset(n);
        let mut labels = vec![Label::Cluster(0); half];
        labels.extend(vec![Label::Cluster(1); half]);
        labels.extend(vec![Label::Outlier; outliers]);
        (ds, labels)
    }

    #[test]
    fn noiseless_answers_follow_truth() {
        let (ds, labels) = truth_two_clusters(3, 2);
        let truth = GroundTruth::from_labels(&ds, labels, 2).unwrap();
        let mut session = OracleSession::noiseless(&truth);
        assert_eq!(session.query(0, 1).unwrap(), Answer::Same);
        assert_eq!(session.query(0, 3).unwrap(), Answer::Different);
        // Outliers always answer Different, even against each other.
        assert_eq!(session.query(0, 6).unwrap(), Answer::Different);
        assert_eq!(session.query(6, 7).unwrap(), Answer::Different);
        assert_eq!(session.query_count(), 4);
        assert_eq!(session.distinct_pair_count(), 4);
    }

    #[test]
    fn self_query_and_bad_index_error() {
        let (ds, labels) = truth_two_clusters(2, 0);
        let truth = GroundTruth::from_labels(&ds, labels, 2).unwrap();
        let mut session = OracleSession::noiseless(&truth);
        assert!(matches!(session.query(1, 1), Err(OracleError::SelfQuery(1))));
        assert!(matches!(
            session.query(0, 99),
            Err(OracleError::IndexOutOfRange { .. })
        ));
        assert_eq!(session.query_count(), 0);
    }

    #[test]
    fn invalid_noise_rejected() {
        let (ds, labels) = truth_two_clusters(2, 0);
        let truth = GroundTruth::from_labels(&ds, labels, 2).unwrap();
        assert!(OracleSession::noisy(&truth, 0.5, 1).is_err());
        assert!(OracleSession::noisy(&truth, -0.1, 1).is_err());
        assert!(OracleSession::noisy(&truth, 0.49, 1).is_ok());
    }

    #[test]
    fn noisy_answers_are_persistent() {
        let (ds, labels) = truth_two_clusters(50, 0);
        let truth = GroundTruth::from_labels(&ds, labels, 2).unwrap();
        let mut session = OracleSession::noisy(&truth, 0.3, 77).unwrap();
        let first = session.query(3, 40).unwrap();
        for _ in 0..999 {
            assert_eq!(session.query(3, 40).unwrap(), first);
        }
        assert_eq!(session.query_count(), 1000);
        assert_eq!(session.distinct_pair_count(), 1);
    }

    #[test]
    fn noisy_flip_frequency_matches_p_e() {
        // One cluster of 500 points: C(500,2) = 124750 ground-Same pairs.
        let n = 500;
        let ds = line_dataset(n);
        let labels = vec![Label::Cluster(0); n];
        let truth = GroundTruth::from_labels(&ds, labels, 1).unwrap();
        let mut session = OracleSession::noisy(&truth, 0.3, 4242).unwrap();
        let mut flipped = 0u64;
        let mut total = 0u64;
        for a in 0..n {
            for b in (a + 1)..n {
                if session.query(a, b).unwrap() == Answer::Different {
                    flipped += 1;
                }
                total += 1;
                if total >= 100_000 {
                    break;
                }
            }
            if total >= 100_000 {
                break;
            }
        }
        let rate = flipped as f64 / total as f64;
        assert!((rate - 0.3).abs() <= 0.01, "flip rate {rate}");
    }

    #[test]
    fn reset_preserves_answers() {
        let (ds, labels) = truth_two_clusters(20, 5);
        let truth = GroundTruth::from_labels(&ds, labels, 2).unwrap();
        let mut session = OracleSession::noisy(&truth, 0.2, 9).unwrap();
        let answers: Vec<Answer> = (1..6).map(|b| session.query(0, b).unwrap()).collect();
        assert_eq!(session.query_count(), 5);
        session.reset_counters();
        assert_eq!(session.query_count(), 0);
        assert_eq!(session.distinct_pair_count(), 0);
        let after: Vec<Answer> = (1..6).map(|b| session.query(0, b).unwrap()).collect();
        assert_eq!(answers, after);
    }

    #[test]
    fn query_is_symmetric() {
        let (ds, labels) = truth_two_clusters(30, 10);
        let truth = GroundTruth::from_labels(&ds, labels, 2).unwrap();
        let mut session = OracleSession::noisy(&truth, 0.25, 11).unwrap();
        for a in 0..20 {
            for b in (a + 1)..20 {
                assert_eq!(
                    session.query(a, b).unwrap(),
                    session.query(b, a).unwrap()
                );
            }
        }
    }

    #[test]
    fn noiseless_is_equivalence_on_non_outliers() {
        let (ds, labels) = truth_two_clusters(8, 4);
        let truth = GroundTruth::from_labels(&ds, labels, 2).unwrap();
        let mut session = OracleSession::noiseless(&truth);
        let n = 16; // non-outliers only
        // Transitivity: a~b and b~c implies a~c, brute force.
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if a == b || b == c || a == c {
                        continue;
                    }
                    let ab = session.query(a, b).unwrap();
                    let bc = session.query(b, c).unwrap();
                    let ac = session.query(a, c).unwrap();
                    if ab == Answer::Same && bc == Answer::Same {
                        assert_eq!(ac, Answer::Same);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_noise_equals_noiseless_on_every_pair() {
        let (ds, labels) = truth_two_clusters(90, 20); // n = 200
        let truth = GroundTruth::from_labels(&ds, labels, 2).unwrap();
        let mut clean = OracleSession::noiseless(&truth);
        let mut noisy = OracleSession::noisy(&truth, 0.0, 555).unwrap();
        for a in 0..truth.n() {
            for b in (a + 1)..truth.n() {
                assert_eq!(clean.query(a, b).unwrap(), noisy.query(a, b).unwrap());
            }
        }
    }

    #[test]
    fn distinct_pair_counter_tracks_unordered_pairs() {
        let (ds, labels) = truth_two_clusters(5, 0);
        let truth = GroundTruth::from_labels(&ds, labels, 2).unwrap();
        let mut session = OracleSession::noiseless(&truth);
        session.query(0, 1).unwrap();
        session.query(1, 0).unwrap();
        session.query(2, 3).unwrap();
        assert_eq!(session.query_count(), 3);
        assert_eq!(session.distinct_pair_count(), 2);
        assert!(session.query_count() >= session.distinct_pair_count());
    }
}
