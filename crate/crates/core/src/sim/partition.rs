//! Partition strategy for quadratic cheap talk with a uniform prior.
//!
//! `[0, 1)` is cut into `K` equal blocks. Receivers outside a target set of
//! size `n0` learn the block containing the state; target receivers learn
//! the block containing the sender's bliss point `θ + b` (the last block
//! when that point exceeds 1).

use serde::{Deserialize, Serialize};

use crate::belief::{merge_breakpoints, PiecewiseDensity};
use crate::error::{Error, Result};
use crate::games::{Game, QuadraticCsParams};
use crate::sim::report::{ConditionalPayoffs, MessageStats, SimReport};
use crate::sim::rng::{ratio_standard_error, run_chunks, trial_rng, RNG_ALGORITHM};

/// Cells of the state grid used to compare target blocks with best replies.
pub const INCENTIVE_GRID: usize = 1000;

/// Largest audience the search for the incentive-compatible size visits.
const MAX_SEARCH_N: usize = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionStrategy {
    pub blocks: usize,
    pub b: f64,
    pub n: usize,
    pub n0: usize,
    /// `n0 / n`.
    pub gamma: f64,
    /// Interior block edges `j/K`, `j = 1..K`.
    edges: Vec<f64>,
    /// States where the target block changes: `j/K − b`.
    target_edges: Vec<f64>,
}

impl PartitionStrategy {
    /// Truthful block (1-based) containing `theta`.
    pub fn block_of(&self, theta: f64) -> usize {
        1 + self.edges.partition_point(|&e| e <= theta)
    }

    /// Block (1-based) whose midpoint is closest to `theta + b`, ties to the
    /// larger block.
    pub fn target_block_of(&self, theta: f64) -> usize {
        1 + self.target_edges.partition_point(|&e| e <= theta)
    }

    fn with_n(&self, n: usize) -> Self {
        Self {
            n,
            gamma: self.n0 as f64 / n as f64,
            ..self.clone()
        }
    }
}

/// Builds the partition strategy; `params.n` must be set.
pub fn build_cs_strategy(params: &QuadraticCsParams) -> Result<PartitionStrategy> {
    params.validate()?;
    let n = params
        .n
        .ok_or_else(|| Error::InvalidParams("partition strategy needs n".into()))?;
    let k = params.blocks;
    let edges: Vec<f64> = (1..k).map(|j| j as f64 / k as f64).collect();
    let target_edges = edges.iter().map(|e| e - params.b).collect();
    Ok(PartitionStrategy {
        blocks: k,
        b: params.b,
        n,
        n0: params.n0,
        gamma: params.n0 as f64 / n as f64,
        edges,
        target_edges,
    })
}

/// Exact posterior after hearing block `message_block`: density proportional
/// to `(1−γ)·1[block(θ)=k] + γ·1[target(θ)=k]`.
pub fn cs_posterior(
    strategy: &PartitionStrategy,
    message_block: usize,
) -> Result<PiecewiseDensity> {
    if message_block == 0 || message_block > strategy.blocks {
        return Err(Error::InvalidParams(format!(
            "block {message_block} outside 1..={}",
            strategy.blocks
        )));
    }
    let cuts: Vec<f64> = strategy
        .edges
        .iter()
        .chain(&strategy.target_edges)
        .copied()
        .filter(|x| *x > 0.0 && *x < 1.0)
        .collect();
    let breakpoints = merge_breakpoints(&[0.0, 1.0], &cuts);
    let levels: Vec<f64> = breakpoints
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let truthful = if strategy.block_of(mid) == message_block {
                1.0 - strategy.gamma
            } else {
                0.0
            };
            let targeted = if strategy.target_block_of(mid) == message_block {
                strategy.gamma
            } else {
                0.0
            };
            truthful + targeted
        })
        .collect();
    PiecewiseDensity::from_levels(breakpoints, levels)
}

/// Result of the incentive check at the strategy's audience size, plus the
/// smallest size (at fixed `n0`) that passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveReport {
    pub n: usize,
    pub passed: bool,
    /// Every posterior mean lies in its own block.
    pub means_in_blocks: bool,
    /// On every grid cell midpoint the closest posterior mean to `θ + b`
    /// belongs to the target block.
    pub argmin_matches: bool,
    /// Measure of states where the closest posterior mean and the target
    /// block disagree; positive whenever `γ > 0`.
    pub sliver_measure: f64,
    pub grid: usize,
    pub means: Vec<f64>,
    pub n_bar: Option<usize>,
}

fn check_at(strategy: &PartitionStrategy) -> Result<IncentiveReport> {
    let k = strategy.blocks;
    let means: Vec<f64> = (1..=k)
        .map(|j| cs_posterior(strategy, j).map(|d| d.expected_state()))
        .collect::<Result<_>>()?;
    let means_in_blocks = means.iter().enumerate().all(|(i, &m)| {
        let lo = i as f64 / k as f64;
        if i + 1 == k {
            m >= lo && m <= 1.0
        } else {
            m >= lo && m < strategy.edges[i]
        }
    });
    let argmin_matches = (0..INCENTIVE_GRID).all(|i| {
        let theta = (i as f64 + 0.5) / INCENTIVE_GRID as f64;
        let bliss = theta + strategy.b;
        let mut best = (f64::INFINITY, 0);
        for (j, m) in means.iter().enumerate() {
            let d = (bliss - m).powi(2);
            if d <= best.0 {
                best = (d, j + 1);
            }
        }
        best.1 == strategy.target_block_of(theta)
    });
    let clip = |x: f64| x.clamp(0.0, 1.0);
    let sliver_measure = (0..k.saturating_sub(1))
        .map(|j| {
            let switch = 0.5 * (means[j] + means[j + 1]) - strategy.b;
            (clip(switch) - clip(strategy.target_edges[j])).abs()
        })
        .sum();
    Ok(IncentiveReport {
        n: strategy.n,
        passed: means_in_blocks && argmin_matches,
        means_in_blocks,
        argmin_matches,
        sliver_measure,
        grid: INCENTIVE_GRID,
        means,
        n_bar: None,
    })
}

/// Checks receiver and sender incentives at the strategy's `n` and searches
/// the smallest passing `n` by doubling from `n0 + 1` and then bisecting.
pub fn cs_check_incentive(strategy: &PartitionStrategy) -> Result<IncentiveReport> {
    let mut report = check_at(strategy)?;
    let passes = |n: usize| -> Result<bool> { Ok(check_at(&strategy.with_n(n))?.passed) };
    let mut lo = strategy.n0;
    let mut hi = strategy.n0 + 1;
    let mut found = false;
    while hi <= MAX_SEARCH_N {
        if passes(hi)? {
            found = true;
            break;
        }
        lo = hi;
        hi *= 2;
    }
    if found {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if passes(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        report.n_bar = Some(hi);
    }
    Ok(report)
}

#[derive(Clone)]
struct Partial {
    sums: [f64; 4],
    counts: [u64; 2],
    /// Per block: Σb, Σb², Σbθ, Σb²θ, Σb²θ².
    block_sums: Vec<[f64; 5]>,
    payoff_sum: f64,
    min_persuaded: usize,
}

/// Simulates the partition strategy. Payoffs do not depend on which
/// receivers form the target set, so a trial only draws the state.
pub fn simulate_cs(
    strategy: &PartitionStrategy,
    params: &QuadraticCsParams,
    trials: u64,
    seed: u64,
) -> Result<SimReport> {
    let check = check_at(strategy)?;
    if !check.passed {
        return Err(Error::IncentiveCheckFailed(strategy.n));
    }
    let game = Game::quadratic_cs(QuadraticCsParams {
        n: Some(strategy.n),
        ..*params
    })?;
    let means = check.means;
    let (n, n0, k) = (strategy.n, strategy.n0, strategy.blocks);

    let partials = run_chunks(trials, |range| -> Result<Partial> {
        let mut part = Partial {
            sums: [0.0; 4],
            counts: [0; 2],
            block_sums: vec![[0.0; 5]; k],
            payoff_sum: 0.0,
            min_persuaded: n,
        };
        for t in range {
            let mut rng = trial_rng(seed, t);
            let theta: f64 = rand::Rng::gen(&mut rng);
            let truthful = strategy.block_of(theta);
            let target = strategy.target_block_of(theta);
            let groups: Vec<(usize, usize)> = if truthful == target {
                vec![(truthful, n)]
            } else {
                vec![(truthful, n - n0), (target, n0)]
            };
            let actions: Vec<(f64, usize)> =
                groups.iter().map(|&(blk, c)| (means[blk - 1], c)).collect();
            let payoff = game.sender_payoff_counts(&actions, Some(theta))?;
            let region = usize::from(theta + strategy.b > 1.0);
            part.sums[2 * region] += payoff;
            part.counts[region] += 1;
            part.payoff_sum += payoff;
            part.min_persuaded = part
                .min_persuaded
                .min(if truthful == target { n } else { n0 });
            for (blk, c) in groups {
                let b = c as f64;
                let s = &mut part.block_sums[blk - 1];
                s[0] += b;
                s[1] += b * b;
                s[2] += b * theta;
                s[3] += b * b * theta;
                s[4] += b * b * theta * theta;
            }
        }
        Ok(part)
    });
    let mut total = Partial {
        sums: [0.0; 4],
        counts: [0; 2],
        block_sums: vec![[0.0; 5]; k],
        payoff_sum: 0.0,
        min_persuaded: n,
    };
    for p in partials {
        let p = p?;
        for (acc, x) in total.sums.iter_mut().zip(p.sums) {
            *acc += x;
        }
        for (acc, x) in total.counts.iter_mut().zip(p.counts) {
            *acc += x;
        }
        for (acc, x) in total
            .block_sums
            .iter_mut()
            .flatten()
            .zip(p.block_sums.iter().flatten())
        {
            *acc += x;
        }
        total.payoff_sum += p.payoff_sum;
        total.min_persuaded = total.min_persuaded.min(p.min_persuaded);
    }

    let mut messages = Vec::new();
    let mut posterior_error: f64 = 0.0;
    for (j, s) in total.block_sums.iter().enumerate() {
        if s[0] == 0.0 {
            continue;
        }
        let r = s[2] / s[0];
        let residual = s[4] - 2.0 * r * s[3] + r * r * s[1];
        posterior_error = posterior_error.max((r - means[j]).abs());
        messages.push(MessageStats {
            message: format!("block_{}", j + 1),
            statistic: "posterior_mean".into(),
            recipients: s[0] as u64,
            analytic: vec![means[j]],
            empirical: vec![r],
            standard_error: vec![ratio_standard_error(residual, s[0], trials)],
        });
    }
    let mean_or_nan = |sum: f64, count: u64| {
        if count == 0 {
            f64::NAN
        } else {
            sum / count as f64
        }
    };
    let kf = k as f64;
    Ok(SimReport {
        trials,
        seed,
        rng: RNG_ALGORITHM.into(),
        n,
        target_size: n0,
        win_rate: None,
        mean_sender_payoff: total.payoff_sum / trials.max(1) as f64,
        empirical_posterior_error: posterior_error,
        min_persuaded_count: total.min_persuaded,
        messages,
        states: Vec::new(),
        mixture_error: None,
        conditional_payoffs: Some(ConditionalPayoffs {
            interior_trials: total.counts[0],
            interior_mean: mean_or_nan(total.sums[0], total.counts[0]),
            interior_bound: -1.0 / kf,
            overflow_trials: total.counts[1],
            overflow_mean: mean_or_nan(total.sums[2], total.counts[1]),
            overflow_bound: -(strategy.b + 1.0 / kf).powi(2),
            overflow_limit: -strategy.b * strategy.b,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(n: usize) -> QuadraticCsParams {
        QuadraticCsParams {
            b: 0.3,
            n: Some(n),
            n0: 1,
            blocks: 10,
        }
    }

    #[test]
    fn block_assignment() {
        let s = build_cs_strategy(&params(100)).unwrap();
        assert_eq!(s.block_of(0.12), 2);
        assert_eq!(s.target_block_of(0.12), 5);
        assert_eq!(s.target_block_of(0.8), 10);
        assert_eq!(s.block_of(1.0), 10);
        assert_eq!(s.block_of(0.0), 1);
        let one = build_cs_strategy(&QuadraticCsParams {
            blocks: 1,
            ..params(100)
        })
        .unwrap();
        assert_eq!((one.block_of(0.7), one.target_block_of(0.7)), (1, 1));
    }

    #[test]
    fn target_block_is_nearest_midpoint() {
        let s = build_cs_strategy(&params(100)).unwrap();
        for i in 0..1000 {
            let theta = (i as f64 + 0.5) / 1000.0;
            let bliss = theta + 0.3;
            let mut best = (f64::INFINITY, 0);
            for k in 1..=10 {
                let d = (bliss - (2 * k - 1) as f64 / 20.0).abs();
                if d <= best.0 {
                    best = (d, k);
                }
            }
            assert_eq!(s.target_block_of(theta), best.1, "theta {theta}");
        }
    }

    #[test]
    fn posterior_construction() {
        let s = build_cs_strategy(&params(100)).unwrap();
        let d = cs_posterior(&s, 5).unwrap();
        let g = s.gamma;
        // truthful part on [0.4, 0.5), targeted part on [0.1, 0.2)
        let norm = (1.0 - g) * 0.1 + g * 0.1;
        assert_abs_diff_eq!(d.density_at(0.45), (1.0 - g) / norm, epsilon = 1e-12);
        assert_abs_diff_eq!(d.density_at(0.15), g / norm, epsilon = 1e-12);
        assert_eq!(d.density_at(0.3), 0.0);
        assert_abs_diff_eq!(d.mass(0.0, 1.0), 1.0, epsilon = 1e-12);
        assert!(cs_posterior(&s, 0).is_err());
        assert!(cs_posterior(&s, 11).is_err());
    }

    #[test]
    fn posterior_support_and_vanishing_target_share() {
        let s = build_cs_strategy(&params(1 << 30)).unwrap();
        for k in 1..=10 {
            let d = cs_posterior(&s, k).unwrap();
            assert_abs_diff_eq!(
                d.expected_state(),
                (2 * k - 1) as f64 / 20.0,
                epsilon = 1e-6
            );
            for i in 0..1000 {
                let theta = (i as f64 + 0.5) / 1000.0;
                if d.density_at(theta) > 0.0 {
                    assert!(s.block_of(theta) == k || s.target_block_of(theta) == k);
                }
            }
        }
    }

    #[test]
    fn incentive_search_and_monotonicity() {
        let s = build_cs_strategy(&params(2)).unwrap();
        let report = cs_check_incentive(&s).unwrap();
        let n_bar = report.n_bar.expect("finite threshold");
        assert!(check_at(&s.with_n(n_bar)).unwrap().passed);
        assert!(!check_at(&s.with_n(n_bar - 1)).unwrap().passed);
        for n in (n_bar..n_bar * 4).step_by((n_bar / 16).max(1)) {
            assert!(check_at(&s.with_n(n)).unwrap().passed, "n = {n}");
        }
        let mut prev = f64::INFINITY;
        for n in [n_bar, 2 * n_bar, 4 * n_bar] {
            let sliver = check_at(&s.with_n(n)).unwrap().sliver_measure;
            assert!(sliver > 0.0 && sliver <= prev);
            prev = sliver;
        }
    }

    #[test]
    fn single_block_is_babbling() {
        let p = QuadraticCsParams {
            blocks: 1,
            ..params(10)
        };
        let s = build_cs_strategy(&p).unwrap();
        let report = simulate_cs(&s, &p, 20_000, 9).unwrap();
        // E[−(θ + b − 1/2)²] for θ uniform
        let expected = -((0.8f64.powi(3) - (-0.2f64).powi(3)) / 3.0);
        assert!((report.mean_sender_payoff - expected).abs() < 0.005);
    }

    #[test]
    fn small_simulation_meets_bounds() {
        let s = build_cs_strategy(&params(2)).unwrap();
        let n_bar = cs_check_incentive(&s).unwrap().n_bar.unwrap();
        let p = params(n_bar);
        let s = build_cs_strategy(&p).unwrap();
        let report = simulate_cs(&s, &p, 5000, 2).unwrap();
        let c = report.conditional_payoffs.unwrap();
        assert!(c.interior_mean >= c.interior_bound - 0.01);
        assert!(c.overflow_mean >= c.overflow_bound - 0.01);
        assert_eq!(
            simulate_cs(&build_cs_strategy(&params(2)).unwrap(), &params(2), 10, 0).unwrap_err(),
            Error::IncentiveCheckFailed(2)
        );
    }
}
