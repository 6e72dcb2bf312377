//! Closed-form query-complexity bound evaluators and the Monte-Carlo
//! simulators that check them by domination.
//!
//! Every logarithm here is natural. Evaluators are pure functions; the
//! simulators are deterministic given their seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::geometry::{centroid, Point};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
}

fn require(cond: bool, msg: &str) -> Result<(), BoundsError> {
    if cond {
        Ok(())
    } else {
        Err(BoundsError::Domain(msg.to_string()))
    }
}

/// Expected draws needed to collect `m` complete sets of `k` coupon types
/// whose smallest probability is at least `1/(alpha k)`:
/// `2 alpha k (ln k + m ln 2)`.
pub fn dixie_bound(alpha: f64, k: usize, m: usize) -> f64 {
    2.0 * alpha * k as f64 * ((k as f64).ln() + m as f64 * std::f64::consts::LN_2)
}

/// The three terms of the two-phase outlier pipeline query bound.
#[derive(Debug, Clone, Copy)]
pub struct QkmwolBounds {
    /// Pairing-phase bound (coupon term plus the squared outlier term).
    pub phase1: f64,
    /// Filtered-seeding-phase bound.
    pub phase2: f64,
    pub total: f64,
}

/// Expected-query bound for the two-phase noiseless pipeline with outliers:
/// `2aK^2/(1-p_o) (ln K + 2 ln 2)
///  + 2 (aK p_o/(1-p_o) (ln 2K + 2 ln 2))^2
///  + 2aK/(1-p_o) (p_o + K(1-p_o)) (ln K + (K/(de) - 2) ln 2)`.
pub fn thm_qkmwol(
    alpha: f64,
    k: usize,
    delta: f64,
    eps: f64,
    p_o: f64,
) -> Result<QkmwolBounds, BoundsError> {
    require(alpha >= 1.0, "alpha must be >= 1")?;
    require(k >= 1, "k must be >= 1")?;
    require(0.0 < delta && delta < 1.0, "delta must lie in (0,1)")?;
    require(0.0 < eps && eps < 1.0, "eps must lie in (0,1)")?;
    require((0.0..1.0).contains(&p_o), "p_o must lie in [0,1)")?;
    let kf = k as f64;
    let ln2 = std::f64::consts::LN_2;
    let term1 = 2.0 * alpha * kf * kf / (1.0 - p_o) * (kf.ln() + 2.0 * ln2);
    let inner = alpha * kf * p_o / (1.0 - p_o) * ((2.0 * kf).ln() + 2.0 * ln2);
    let term2 = 2.0 * inner * inner;
    let m = kf / (delta * eps);
    let term3 =
        2.0 * alpha * kf / (1.0 - p_o) * (p_o + kf * (1.0 - p_o)) * (kf.ln() + (m - 2.0) * ln2);
    Ok(QkmwolBounds {
        phase1: term1 + term2,
        phase2: term3,
        total: term1 + term2 + term3,
    })
}

/// Bounds on the first and second moment of the time to collect `m` draws
/// from each of `k` types with min probability `(1 - p_o)/(alpha k)`:
/// `E[X] <= 2aK/(1-p_o) (ln K + m ln 2)` and
/// `E[X^2] <= (2aK/(1-p_o) (ln 2K + m ln 2))^2`. Requires `K 2^m >= e`.
pub fn erlang_max_moments(
    alpha: f64,
    k: usize,
    p_o: f64,
    m: usize,
) -> Result<(f64, f64), BoundsError> {
    require(alpha >= 1.0, "alpha must be >= 1")?;
    require(k >= 1, "k must be >= 1")?;
    require((0.0..1.0).contains(&p_o), "p_o must lie in [0,1)")?;
    let kf = k as f64;
    require(
        kf * 2f64.powi(m as i32) >= std::f64::consts::E,
        "requires K 2^m >= e",
    )?;
    let ln2 = std::f64::consts::LN_2;
    let scale = 2.0 * alpha * kf / (1.0 - p_o);
    let ex = scale * (kf.ln() + m as f64 * ln2);
    let ex2 = {
        let inner = scale * ((2.0 * kf).ln() + m as f64 * ln2);
        inner * inner
    };
    Ok((ex, ex2))
}

/// `M_tilde = max(6aK/(de), 8aK ln(3K/d))` and the smallest integer
/// `M >= max(M_tilde, 3)` with `M / ln M >= c_m a K^2 / (2 p_e - 1)^4`.
pub fn noisy_m_with_constant(
    alpha: f64,
    k: usize,
    delta: f64,
    eps: f64,
    p_e: f64,
    c_m: f64,
) -> Result<(f64, u64), BoundsError> {
    require(alpha >= 1.0, "alpha must be >= 1")?;
    require(k >= 1, "k must be >= 1")?;
    require(0.0 < delta && delta < 1.0, "delta must lie in (0,1)")?;
    require(0.0 < eps && eps < 1.0, "eps must lie in (0,1)")?;
    require((0.0..0.5).contains(&p_e), "p_e must lie in [0, 1/2)")?;
    let kf = k as f64;
    let m_tilde = (6.0 * alpha * kf / (delta * eps)).max(8.0 * alpha * kf * (3.0 * kf / delta).ln());
    let rhs = c_m * alpha * kf * kf / (2.0 * p_e - 1.0).powi(4);
    let cond = |m: u64| m as f64 / (m as f64).ln() >= rhs;

    // Smallest integer >= 3 satisfying the ratio condition; the ratio is
    // increasing on [3, inf), so bracket by doubling, then binary search.
    let mut lo = 3u64;
    let smallest_ratio_ok = if cond(lo) {
        lo
    } else {
        let mut hi = 6u64;
        while !cond(hi) {
            lo = hi;
            hi = hi.saturating_mul(2);
        }
        while lo + 1 < hi {
            let mid = lo + (hi - lo) / 2;
            if cond(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let m = smallest_ratio_ok.max(m_tilde.ceil() as u64).max(3);
    debug_assert!(cond(m) && m as f64 >= m_tilde);
    Ok((m_tilde, m))
}

/// [`noisy_m_with_constant`] with the theorem constant 128.
pub fn noisy_m(
    alpha: f64,
    k: usize,
    delta: f64,
    eps: f64,
    p_e: f64,
) -> Result<(f64, u64), BoundsError> {
    noisy_m_with_constant(alpha, k, delta, eps, p_e, 128.0)
}

/// Sample and subgraph sizes for the noisy pipeline with outliers.
#[derive(Debug, Clone, Copy)]
pub struct NoisyOutlierParams {
    pub m_tilde: f64,
    pub m: f64,
    pub n: f64,
}

/// `M_tilde = max(B ln B, 8aK/(de), 8aK ln(4K/d))` with
/// `B = c_m a K^2/(2p_e-1)^4`, then `M = 2 M_tilde/(1-p_o) + ln(4/d)/(2(1-p_o)^2)`
/// and `N = c_n K^2 ln M/(1-2p_e)^4 + M - M_tilde`.
#[allow(clippy::too_many_arguments)]
pub fn noisy_outlier_params_with_constants(
    alpha: f64,
    k: usize,
    delta: f64,
    eps: f64,
    p_e: f64,
    p_o: f64,
    c_m: f64,
    c_n: f64,
) -> Result<NoisyOutlierParams, BoundsError> {
    require(alpha >= 1.0, "alpha must be >= 1")?;
    require(k >= 1, "k must be >= 1")?;
    require(0.0 < delta && delta < 1.0, "delta must lie in (0,1)")?;
    require(0.0 < eps && eps < 1.0, "eps must lie in (0,1)")?;
    require((0.0..0.5).contains(&p_e), "p_e must lie in [0, 1/2)")?;
    require((0.0..1.0).contains(&p_o), "p_o must lie in [0,1)")?;
    let kf = k as f64;
    let b = c_m * alpha * kf * kf / (2.0 * p_e - 1.0).powi(4);
    let m_tilde = (b * b.ln())
        .max(8.0 * alpha * kf / (delta * eps))
        .max(8.0 * alpha * kf * (4.0 * kf / delta).ln());
    let m = 2.0 * m_tilde / (1.0 - p_o) + (4.0 / delta).ln() / (2.0 * (1.0 - p_o).powi(2));
    let n = c_n * kf * kf * m.ln() / (1.0 - 2.0 * p_e).powi(4) + m - m_tilde;
    Ok(NoisyOutlierParams { m_tilde, m, n })
}

/// [`noisy_outlier_params_with_constants`] with the theorem constants 128, 64.
pub fn noisy_outlier_params(
    alpha: f64,
    k: usize,
    delta: f64,
    eps: f64,
    p_e: f64,
    p_o: f64,
) -> Result<NoisyOutlierParams, BoundsError> {
    noisy_outlier_params_with_constants(alpha, k, delta, eps, p_e, p_o, 128.0, 64.0)
}

/// Alternative subgraph sizing for the outlier pipeline, which pads the
/// required non-outlier count per round instead of the whole sample:
/// `N' = (128 K^2 ln M + 4 sqrt(2) (1-2p_e)^2 K sqrt(ln M ln(5K/d)))
///       / ((1-2p_e)^4 (1-p_o))`,
/// `M = 2 M_tilde/(1-p_o) + ln(5/d)/(2(1-p_o)^2)` and
/// `N = 2 N'/(1-p_o) + ln(5K/d)/(2(1-p_o)^2)`. Evaluated as a formula only;
/// the pipeline itself uses the simpler first sizing.
pub fn noisy_outlier_params_alt(
    alpha: f64,
    k: usize,
    delta: f64,
    eps: f64,
    p_e: f64,
    p_o: f64,
) -> Result<NoisyOutlierParams, BoundsError> {
    require(alpha >= 1.0, "alpha must be >= 1")?;
    require(k >= 1, "k must be >= 1")?;
    require(0.0 < delta && delta < 1.0, "delta must lie in (0,1)")?;
    require(0.0 < eps && eps < 1.0, "eps must lie in (0,1)")?;
    require((0.0..0.5).contains(&p_e), "p_e must lie in [0, 1/2)")?;
    require((0.0..1.0).contains(&p_o), "p_o must lie in [0,1)")?;
    let kf = k as f64;
    let b = 128.0 * alpha * kf * kf / (2.0 * p_e - 1.0).powi(4);
    let m_tilde = (b * b.ln())
        .max(8.0 * alpha * kf / (delta * eps))
        .max(8.0 * alpha * kf * (4.0 * kf / delta).ln());
    let m = 2.0 * m_tilde / (1.0 - p_o) + (5.0 / delta).ln() / (2.0 * (1.0 - p_o).powi(2));
    let beta2 = (1.0 - 2.0 * p_e).powi(2);
    let n_prime = (128.0 * kf * kf * m.ln()
        + 4.0 * 2f64.sqrt() * beta2 * kf * (m.ln() * (5.0 * kf / delta).ln()).sqrt())
        / (beta2 * beta2 * (1.0 - p_o));
    let n = 2.0 * n_prime / (1.0 - p_o) + (5.0 * kf / delta).ln() / (2.0 * (1.0 - p_o).powi(2));
    Ok(NoisyOutlierParams { m_tilde, m, n })
}

/// Smallest-cluster size below which the one-pass approach loses its edge:
/// `n eps^3 / K^7`.
pub fn min_cluster_threshold(n: f64, k: usize, eps: f64) -> f64 {
    n * eps.powi(3) / (k as f64).powi(7)
}

/// KL divergence between Bernoulli(x) and Bernoulli(y), `0 ln 0 = 0`.
/// Requires `0 <= x <= y <= 1`.
pub fn kl_bernoulli(x: f64, y: f64) -> Result<f64, BoundsError> {
    require(
        (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) && x <= y,
        "requires 0 <= x <= y <= 1",
    )?;
    if x == y {
        return Ok(0.0);
    }
    let term1 = if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    let term2 = if x == 1.0 {
        0.0
    } else if y == 1.0 {
        f64::INFINITY
    } else {
        (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln()
    };
    Ok(term1 + term2)
}

/// Quadratic comparison value `(y - x)^2 / (2y)`; zero when both are zero.
pub fn kl_quadratic_bound(x: f64, y: f64) -> Result<f64, BoundsError> {
    require(
        (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) && x <= y,
        "requires 0 <= x <= y <= 1",
    )?;
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok((y - x) * (y - x) / (2.0 * y))
}

/// Success rates of the sampled-centroid potential inequality.
#[derive(Debug, Clone, Copy)]
pub struct CentroidCheck {
    /// Rate against the loose factor `1 + 1/(dm)`.
    pub loose_rate: f64,
    /// Rate against the without-replacement factor
    /// `1 + (1 - (m-1)/(|S|-1))/(dm)`; equals `loose_rate` when sampling
    /// with replacement.
    pub tight_rate: f64,
    pub loose_factor: f64,
    pub tight_factor: f64,
}

fn one_means_potential(points: &[Point], center: &Point) -> f64 {
    points.iter().map(|p| p.sq_dist(center)).sum()
}

/// Monte-Carlo check of the sampled-centroid potential inequality: sample `m`
/// points, take their mean, and test
/// `phi(S; mean) <= factor * phi*(S)` over `trials` repetitions.
pub fn verify_centroid_lemma(
    points: &[Point],
    m: usize,
    delta: f64,
    trials: u64,
    with_replacement: bool,
    seed: u64,
) -> Result<CentroidCheck, BoundsError> {
    require(!points.is_empty(), "point set is empty")?;
    require(m >= 1, "m must be >= 1")?;
    require(0.0 < delta && delta < 1.0, "delta must lie in (0,1)")?;
    require(trials >= 1, "trials must be >= 1")?;
    let n = points.len();
    if !with_replacement {
        require(m <= n, "m must not exceed |S| when sampling without replacement")?;
    }
    let full_mean = centroid(points).expect("nonempty");
    let phi_star = one_means_potential(points, &full_mean);
    let loose_factor = 1.0 + 1.0 / (delta * m as f64);
    let frac = if n > 1 {
        (m as f64 - 1.0) / (n as f64 - 1.0)
    } else {
        1.0
    };
    let tight_factor = if with_replacement {
        loose_factor
    } else {
        1.0 + (1.0 - frac) / (delta * m as f64)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut loose_hits = 0u64;
    let mut tight_hits = 0u64;
    for _ in 0..trials {
        let sample: Vec<Point> = if with_replacement {
            (0..m).map(|_| points[rng.gen_range(0..n)].clone()).collect()
        } else {
            for i in 0..m {
                let j = rng.gen_range(i..n);
                indices.swap(i, j);
            }
            indices[..m].iter().map(|&i| points[i].clone()).collect()
        };
        let mean = centroid(&sample).expect("m >= 1");
        let phi = one_means_potential(points, &mean);
        // Tiny relative slack guards the degenerate equality case m = |S|.
        if phi <= loose_factor * phi_star * (1.0 + 1e-12) {
            loose_hits += 1;
        }
        if phi <= tight_factor * phi_star * (1.0 + 1e-12) {
            tight_hits += 1;
        }
    }
    Ok(CentroidCheck {
        loose_rate: loose_hits as f64 / trials as f64,
        tight_rate: tight_hits as f64 / trials as f64,
        loose_factor,
        tight_factor,
    })
}

/// Coupled comparison of with- and without-replacement sampling.
#[derive(Debug, Clone, Copy)]
pub struct PairedCentroidCheck {
    pub with_replacement_loose_rate: f64,
    pub without_replacement_loose_rate: f64,
    pub without_replacement_tight_rate: f64,
}

/// Paired Monte-Carlo: per trial, draw iid indices until `m` distinct values
/// appear. The first `m` draws form the with-replacement sample and the `m`
/// distinct values form the without-replacement sample, so both marginals are
/// correct while the two success indicators stay strongly coupled.
pub fn centroid_lemma_paired(
    points: &[Point],
    m: usize,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<PairedCentroidCheck, BoundsError> {
    require(!points.is_empty(), "point set is empty")?;
    let n = points.len();
    require(m >= 1 && m <= n, "requires 1 <= m <= |S|")?;
    require(0.0 < delta && delta < 1.0, "delta must lie in (0,1)")?;
    let full_mean = centroid(points).expect("nonempty");
    let phi_star = one_means_potential(points, &full_mean);
    let loose_factor = 1.0 + 1.0 / (delta * m as f64);
    let frac = if n > 1 {
        (m as f64 - 1.0) / (n as f64 - 1.0)
    } else {
        1.0
    };
    let tight_factor = 1.0 + (1.0 - frac) / (delta * m as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wr_hits = 0u64;
    let mut wor_loose_hits = 0u64;
    let mut wor_tight_hits = 0u64;
    let mut seen = vec![false; n];
    for _ in 0..trials {
        seen.iter_mut().for_each(|s| *s = false);
        let mut wr_sample: Vec<usize> = Vec::with_capacity(m);
        let mut distinct: Vec<usize> = Vec::with_capacity(m);
        while distinct.len() < m {
            let i = rng.gen_range(0..n);
            if wr_sample.len() < m {
                wr_sample.push(i);
            }
            if !seen[i] {
                seen[i] = true;
                distinct.push(i);
            }
        }
        let eval = |sample: &[usize]| {
            let pts: Vec<Point> = sample.iter().map(|&i| points[i].clone()).collect();
            let mean = centroid(&pts).expect("m >= 1");
            one_means_potential(points, &mean)
        };
        let slack = 1.0 + 1e-12;
        if eval(&wr_sample) <= loose_factor * phi_star * slack {
            wr_hits += 1;
        }
        let phi_wor = eval(&distinct);
        if phi_wor <= loose_factor * phi_star * slack {
            wor_loose_hits += 1;
        }
        if phi_wor <= tight_factor * phi_star * slack {
            wor_tight_hits += 1;
        }
    }
    Ok(PairedCentroidCheck {
        with_replacement_loose_rate: wr_hits as f64 / trials as f64,
        without_replacement_loose_rate: wor_loose_hits as f64 / trials as f64,
        without_replacement_tight_rate: wor_tight_hits as f64 / trials as f64,
    })
}

/// Empirical tail probability vs the closed-form lower bound.
#[derive(Debug, Clone, Copy)]
pub struct HypergeomCheck {
    /// Empirical `P(min_i S_i >= m p_min / 2)`.
    pub empirical: f64,
    /// `1 - K exp(-m p_min / 8)`.
    pub bound: f64,
}

/// Draw `m` of `n` items without replacement, where item types have
/// frequencies `probs`, and check how often every type count reaches half its
/// expectation of the rarest type.
pub fn hypergeom_tail_check(
    n: usize,
    probs: &[f64],
    m: usize,
    trials: u64,
    seed: u64,
) -> Result<HypergeomCheck, BoundsError> {
    let k = probs.len();
    require(k >= 1, "need at least one type")?;
    require(m <= n, "m must not exceed n")?;
    let total: f64 = probs.iter().sum();
    require((total - 1.0).abs() < 1e-9, "probs must sum to 1")?;
    require(probs.iter().all(|p| *p > 0.0), "probs must be positive")?;

    // Integer type counts summing to n (largest remainders get the extras).
    let mut counts: Vec<usize> = probs.iter().map(|p| (p * n as f64).floor() as usize).collect();
    let mut assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ra = probs[a] * n as f64 - counts[a] as f64;
        let rb = probs[b] * n as f64 - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap()
    });
    let mut cursor = 0;
    while assigned < n {
        counts[order[cursor % k]] += 1;
        assigned += 1;
        cursor += 1;
    }

    let p_min = probs.iter().copied().fold(f64::INFINITY, f64::min);
    let target = (m as f64 * p_min / 2.0).ceil() as usize;
    let bound = 1.0 - k as f64 * (-(m as f64) * p_min / 8.0).exp();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..trials {
        let mut remaining = counts.clone();
        let mut left = n;
        let mut drawn = vec![0usize; k];
        for _ in 0..m {
            let mut pick = rng.gen_range(0..left);
            for (t, r) in remaining.iter_mut().enumerate() {
                if pick < *r {
                    *r -= 1;
                    drawn[t] += 1;
                    break;
                }
                pick -= *r;
            }
            left -= 1;
        }
        if drawn.iter().all(|&d| d >= target) {
            hits += 1;
        }
    }
    Ok(HypergeomCheck {
        empirical: hits as f64 / trials as f64,
        bound,
    })
}

/// Type probabilities with min probability `1/(alpha k)`: one rare type, the
/// rest equal.
pub fn skewed_type_probs(k: usize, alpha: f64) -> Vec<f64> {
    assert!(k >= 1 && alpha >= 1.0);
    if k == 1 {
        return vec![1.0];
    }
    let p_min = 1.0 / (alpha * k as f64);
    let rest = (1.0 - p_min) / (k as f64 - 1.0);
    let mut probs = vec![rest; k];
    probs[0] = p_min;
    probs
}

/// Mean draws until every type has been collected at least `m` times.
pub fn simulate_dixie_mean_draws(probs: &[f64], m: usize, trials: u64, seed: u64) -> f64 {
    let k = probs.len();
    let mut cumulative: Vec<f64> = Vec::with_capacity(k);
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total_draws = 0u64;
    for _ in 0..trials {
        let mut counts = vec![0usize; k];
        let mut incomplete = k;
        let mut draws = 0u64;
        while incomplete > 0 {
            let u: f64 = rng.gen();
            let t = cumulative.partition_point(|c| *c < u).min(k - 1);
            counts[t] += 1;
            if counts[t] == m {
                incomplete -= 1;
            }
            draws += 1;
        }
        total_draws += draws;
    }
    total_draws as f64 / trials as f64
}

/// Sample mean of `max_i X_i` and of its square, where `X_i` is a sum of `m`
/// exponentials with rate `rates[i]`.
pub fn simulate_erlang_max_moments(
    rates: &[f64],
    m: usize,
    draws: u64,
    seed: u64,
) -> Result<(f64, f64), BoundsError> {
    require(!rates.is_empty(), "need at least one rate")?;
    require(rates.iter().all(|r| *r > 0.0), "rates must be positive")?;
    let exps: Vec<Exp<f64>> = rates
        .iter()
        .map(|&r| Exp::new(r).map_err(|_| BoundsError::Domain("bad rate".into())))
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let mut max_x: f64 = 0.0;
        for exp in &exps {
            let x: f64 = (0..m).map(|_| exp.sample(&mut rng)).sum();
            max_x = max_x.max(x);
        }
        sum += max_x;
        sum_sq += max_x * max_x;
    }
    Ok((sum / draws as f64, sum_sq / draws as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dixie_bound_values() {
        assert!((dixie_bound(1.0, 1, 2) - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let b = dixie_bound(1.0, 5, 2);
        assert!((b - 10.0 * (5f64.ln() + 2.0 * std::f64::consts::LN_2)).abs() < 1e-12);
        assert!((b - 29.957).abs() < 1e-3);
    }

    #[test]
    fn dixie_simulation_is_dominated() {
        let probs = vec![0.2; 5];
        let mean = simulate_dixie_mean_draws(&probs, 2, 10_000, 7);
        let bound = dixie_bound(1.0, 5, 2);
        assert!(mean <= bound, "mean {mean} exceeds bound {bound}");
        // True expectation is 5 * integral of 1 - (1 - e^-s (1+s))^5 ~ 19.1.
        assert!((mean - 19.1).abs() < 0.6, "mean {mean} far from expected ~19.1");
    }

    #[test]
    fn qkmwol_bound_values() {
        // p_o = 0 kills the squared term.
        let b = thm_qkmwol(1.0, 2, 0.5, 0.5, 0.0).unwrap();
        let ln2 = std::f64::consts::LN_2;
        let expect1 = 8.0 * 3.0 * ln2;
        let expect3 = 8.0 * 7.0 * ln2;
        assert!((b.phase1 - expect1).abs() < 1e-12);
        assert!((b.phase2 - expect3).abs() < 1e-12);
        assert!((b.total - 55.45).abs() < 0.01);

        assert!(thm_qkmwol(1.0, 2, 0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn erlang_moment_values() {
        let (ex, ex2) = erlang_max_moments(1.0, 1, 0.0, 2).unwrap();
        assert!((ex - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((ex - 2.77).abs() < 0.01);
        assert!((ex2 - 17.3).abs() < 0.05);
        // K 2^m < e fails only for K = 1, m = 0 style inputs.
        assert!(erlang_max_moments(1.0, 1, 0.0, 0).is_err());
    }

    #[test]
    fn erlang_simulation_is_dominated() {
        let (ex, ex2) = erlang_max_moments(1.0, 4, 0.0, 2).unwrap();
        let rates = vec![0.25; 4];
        let (mean, mean_sq) = simulate_erlang_max_moments(&rates, 2, 100_000, 3).unwrap();
        assert!(mean <= ex, "mean {mean} vs bound {ex}");
        assert!(mean_sq <= ex2, "second moment {mean_sq} vs bound {ex2}");
    }

    #[test]
    fn noisy_m_spot_value() {
        let (m_tilde, m) = noisy_m(1.0, 1, 0.5, 0.5, 0.0).unwrap();
        assert!((m_tilde - 24.0).abs() < 1e-12);
        // Independent linear scan for the smallest M with M/ln M >= 128.
        let mut expect = 3u64;
        while (expect as f64) / (expect as f64).ln() < 128.0 {
            expect += 1;
        }
        assert_eq!(m, expect);
        assert!(m as f64 / (m as f64).ln() >= 128.0);
        assert!((m - 1) as f64 / ((m - 1) as f64).ln() < 128.0);
    }

    #[test]
    fn noisy_m_named_tuple() {
        // alpha=1, K=2, delta=eps=0.1, p_e=0.25: the coupon term dominates.
        let (m_tilde, m) = noisy_m(1.0, 2, 0.1, 0.1, 0.25).unwrap();
        assert!((m_tilde - 1200.0).abs() < 1e-9);
        let rhs = 128.0 * 4.0 / (0.5f64).powi(4);
        let mut scan = 1200u64;
        while (scan as f64) / (scan as f64).ln() < rhs {
            scan += 1;
        }
        assert_eq!(m, scan);
    }

    #[test]
    fn alt_outlier_params_are_finite_and_consistent() {
        let first = noisy_outlier_params(1.0, 2, 0.2, 0.2, 0.25, 0.2).unwrap();
        let second = noisy_outlier_params_alt(1.0, 2, 0.2, 0.2, 0.25, 0.2).unwrap();
        assert_eq!(first.m_tilde, second.m_tilde);
        assert!(second.m.is_finite() && second.n.is_finite());
        assert!(second.n > 0.0 && second.m > second.m_tilde);
    }

    #[test]
    fn noisy_m_rhs_scales_with_k_squared() {
        let rhs = |k: usize| 128.0 * (k * k) as f64 / (2.0 * 0.1 - 1.0f64).powi(4);
        assert!(rhs(2) >= 4.0 * rhs(1) - 1e-9);
        assert!(rhs(4) >= 4.0 * rhs(2) - 1e-9);
    }

    #[test]
    fn noisy_outlier_param_relations() {
        let p = noisy_outlier_params(1.0, 2, 0.2, 0.2, 0.25, 0.0).unwrap();
        let b = 128.0 * 4.0 / (0.5f64).powi(4);
        assert!((b - 8192.0).abs() < 1e-9);
        let expect_m_tilde = (b * b.ln()).max(400.0).max(16.0 * 40f64.ln());
        assert!((p.m_tilde - expect_m_tilde).abs() < 1e-9);
        // p_o = 0: M = 2 M_tilde + ln(4/delta)/2.
        assert!((p.m - (2.0 * p.m_tilde + (4.0f64 / 0.2).ln() / 2.0)).abs() < 1e-9);
        assert!(p.n >= p.m - p.m_tilde);

        let q = noisy_outlier_params(1.5, 3, 0.1, 0.3, 0.2, 0.4).unwrap();
        assert!(q.n >= q.m - q.m_tilde);
    }

    #[test]
    fn min_cluster_threshold_values() {
        assert!((min_cluster_threshold(1e6, 10, 0.1) - 1e-4).abs() < 1e-16);
        assert_eq!(min_cluster_threshold(1e6, 10, 0.0), 0.0);
        assert!((min_cluster_threshold(1e7, 10, 0.1) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn kl_values_and_domain() {
        assert_eq!(kl_bernoulli(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(kl_quadratic_bound(0.3, 0.3).unwrap(), 0.0);
        let kl = kl_bernoulli(0.1, 0.5).unwrap();
        assert!((kl - 0.3681).abs() < 1e-4);
        let q = kl_quadratic_bound(0.1, 0.5).unwrap();
        assert!((q - 0.16).abs() < 1e-12);
        assert!(kl >= q);
        assert!(kl_bernoulli(0.6, 0.5).is_err());
        assert_eq!(kl_bernoulli(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(kl_bernoulli(1.0, 1.0).unwrap(), 0.0);
        assert!(kl_bernoulli(0.5, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn kl_grid_dominates_quadratic() {
        for xi in 1..99 {
            for yi in xi..99 {
                let x = xi as f64 / 100.0;
                let y = yi as f64 / 100.0;
                let kl = kl_bernoulli(x, y).unwrap();
                let q = kl_quadratic_bound(x, y).unwrap();
                assert!(kl >= q, "kl({x},{y}) = {kl} < {q}");
                if xi != yi {
                    assert!(kl > q, "expected strict inequality at ({x},{y})");
                }
            }
        }
    }

    fn cube_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point::new(vec![rng.gen(), rng.gen(), rng.gen()]).unwrap())
            .collect()
    }

    #[test]
    fn centroid_lemma_rates() {
        let points = cube_points(60, 5);
        let check = verify_centroid_lemma(&points, 10, 0.1, 10_000, true, 11).unwrap();
        assert!(check.loose_rate >= 0.9, "rate {}", check.loose_rate);

        // m = |S| without replacement: the sample is the whole set.
        let exact = verify_centroid_lemma(&points, 60, 0.1, 100, false, 11).unwrap();
        assert_eq!(exact.tight_rate, 1.0);
        assert!(exact.tight_factor < exact.loose_factor);

        assert!(verify_centroid_lemma(&points, 61, 0.1, 10, false, 1).is_err());
    }

    #[test]
    fn paired_centroid_lemma_orders_rates() {
        let points = cube_points(60, 6);
        for (m, delta) in [(5usize, 0.2f64), (10, 0.1), (50, 0.05)] {
            let paired = centroid_lemma_paired(&points, m, delta, 10_000, 21).unwrap();
            assert!(
                paired.without_replacement_loose_rate >= paired.with_replacement_loose_rate,
                "m={m} delta={delta}: {:?}",
                paired
            );
            assert!(paired.without_replacement_tight_rate >= 1.0 - delta - 0.05);
        }
    }

    #[test]
    fn hypergeom_tail_examples() {
        // K = 1: every draw is the single type, so the event always holds.
        let single = hypergeom_tail_check(100, &[1.0], 30, 1000, 2).unwrap();
        assert_eq!(single.empirical, 1.0);
        assert!(single.empirical >= single.bound);

        let probs = [0.1, 0.2, 0.3, 0.4];
        let check = hypergeom_tail_check(10_000, &probs, 400, 2_000, 3).unwrap();
        assert!((check.bound - (1.0 - 4.0 * (-5.0f64).exp())).abs() < 1e-12);
        assert!(check.empirical >= check.bound - 0.01);

        // The bound is monotone increasing in m.
        let bound_at = |m: usize| 1.0 - 4.0 * (-(m as f64) * 0.1 / 8.0).exp();
        for m in (100..1000).step_by(100) {
            assert!(bound_at(m + 100) >= bound_at(m));
        }
    }

    #[test]
    fn skewed_probs_have_target_min() {
        let probs = skewed_type_probs(5, 2.0);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let min = probs.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((min - 0.1).abs() < 1e-12);
    }
}
