//! Random-target-audience strategy for a finite prior.
//!
//! A uniformly drawn set of `k` receivers always hears the persuasive
//! message `m′`. Every other receiver hears it with a state-dependent
//! probability chosen so that the marginal probability of `m′` in state `θ`
//! is `φ(θ) ∝ π(θ)/π₀(θ)`, which makes `π` the posterior after `m′`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attainable::is_attainable;
use crate::belief::{bayes_update, likelihood_ratio_bounds, FiniteBelief};
use crate::error::{Error, Result};
use crate::games::{pick_by_sunspot, Game};
use crate::sim::report::{MessageStats, SimReport, StateStats};
use crate::sim::rng::{ratio_standard_error, run_chunks, trial_rng, RNG_ALGORITHM};

/// Tolerance on the posterior produced by a freshly built strategy.
pub const BUILD_POSTERIOR_TOL: f64 = 1e-12;

/// Tolerance on the sender's gain from deviating.
pub const DEVIATION_TOL: f64 = 1e-9;

/// Payoff slack when classifying a trial as won.
const WIN_TOL: f64 = 1e-12;

/// The two messages of a targeted strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Message {
    /// The persuasive message `m′`.
    Persuade,
    /// The residual message `m″`.
    Other,
}

impl Message {
    pub fn label(self) -> &'static str {
        match self {
            Message::Persuade => "m_prime",
            Message::Other => "m_double_prime",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetedStrategy {
    pub n: usize,
    /// Target-set size.
    pub k: usize,
    /// `k / n`.
    pub gamma: f64,
    /// Marginal probability of `m′` per state.
    pub persuade_prob: Vec<f64>,
    /// Probability of `m′` for a receiver outside the target set.
    pub nontarget_prob: Vec<f64>,
    /// Posterior induced by `m′`.
    pub target: FiniteBelief,
}

/// Builds the strategy that delivers posterior `pi` to at least `k` of `n`
/// receivers in every state.
pub fn build_attaining_strategy(
    pi: &FiniteBelief,
    pi0: &FiniteBelief,
    n: usize,
    k: usize,
) -> Result<TargetedStrategy> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidParams(format!(
            "target size must satisfy 1 <= k <= n (k={k}, n={n})"
        )));
    }
    if pi.len() != pi0.len() {
        return Err(Error::DimensionMismatch {
            expected: pi0.len(),
            got: pi.len(),
        });
    }
    let gamma = k as f64 / n as f64;
    if !is_attainable(pi, pi0, gamma) {
        return Err(Error::NotAttainable(format!(
            "{:?} is not {gamma}-attainable from {:?}",
            pi.probs(),
            pi0.probs()
        )));
    }
    let (_, hi) = likelihood_ratio_bounds(pi, pi0)?;
    let mut persuade_prob = Vec::with_capacity(pi0.len());
    let mut nontarget_prob = Vec::with_capacity(pi0.len());
    for (&p, &q) in pi.probs().iter().zip(pi0.probs()) {
        if q == 0.0 {
            persuade_prob.push(gamma);
            nontarget_prob.push(0.0);
            continue;
        }
        let f = (p / q / hi).min(1.0);
        persuade_prob.push(f);
        let q = if k == n {
            1.0
        } else {
            ((f - gamma) / (1.0 - gamma)).clamp(0.0, 1.0)
        };
        nontarget_prob.push(if q <= BUILD_POSTERIOR_TOL { 0.0 } else { q });
    }
    let posterior = bayes_update(pi0, &persuade_prob)?;
    let err = posterior.max_abs_diff(pi);
    if err > BUILD_POSTERIOR_TOL {
        return Err(Error::NotAttainable(format!(
            "posterior after m' misses the target by {err:e}"
        )));
    }
    Ok(TargetedStrategy {
        n,
        k,
        gamma,
        persuade_prob,
        nontarget_prob,
        target: pi.clone(),
    })
}

/// Bayes posterior of a receiver who hears `message`.
pub fn analytic_posterior(
    strategy: &TargetedStrategy,
    pi0: &FiniteBelief,
    message: Message,
) -> Result<FiniteBelief> {
    match message {
        Message::Persuade => bayes_update(pi0, &strategy.persuade_prob),
        Message::Other => {
            let likelihood: Vec<f64> = strategy
                .persuade_prob
                .iter()
                .map(|f| (1.0 - f).max(0.0))
                .collect();
            bayes_update(pi0, &likelihood)
        }
    }
}

fn check_audience(strategy: &TargetedStrategy, game: &Game, pi0: &FiniteBelief) -> Result<()> {
    if game.audience().n != strategy.n {
        return Err(Error::AudienceMismatch {
            strategy: strategy.n,
            game: game.audience().n,
        });
    }
    if strategy.persuade_prob.len() != pi0.len() {
        return Err(Error::DimensionMismatch {
            expected: strategy.persuade_prob.len(),
            got: pi0.len(),
        });
    }
    Ok(())
}

/// Posteriors after `m′` and `m″`, the latter replaced by `offpath` when
/// `m″` is never sent. The flag reports whether `m″` is on path.
fn message_posteriors(
    strategy: &TargetedStrategy,
    pi0: &FiniteBelief,
    offpath: &FiniteBelief,
) -> Result<(FiniteBelief, FiniteBelief, bool)> {
    let persuade = analytic_posterior(strategy, pi0, Message::Persuade)?;
    match analytic_posterior(strategy, pi0, Message::Other) {
        Ok(other) => Ok((persuade, other, true)),
        Err(Error::ZeroProbabilityMessage) => Ok((persuade, offpath.clone(), false)),
        Err(e) => Err(e),
    }
}

#[derive(Default)]
struct Partial {
    trials_by_state: Vec<u64>,
    /// `[message][state]` sums of recipients and squared recipients.
    recipients: [Vec<u64>; 2],
    recipients_sq: [Vec<u128>; 2],
    payoff_sum: f64,
    wins: u64,
    min_persuaded: usize,
}

impl Partial {
    fn new(states: usize, n: usize) -> Self {
        Self {
            trials_by_state: vec![0; states],
            recipients: [vec![0; states], vec![0; states]],
            recipients_sq: [vec![0; states], vec![0; states]],
            payoff_sum: 0.0,
            wins: 0,
            min_persuaded: n,
        }
    }

    fn absorb(&mut self, other: Partial) {
        for s in 0..self.trials_by_state.len() {
            self.trials_by_state[s] += other.trials_by_state[s];
            for m in 0..2 {
                self.recipients[m][s] += other.recipients[m][s];
                self.recipients_sq[m][s] += other.recipients_sq[m][s];
            }
        }
        self.payoff_sum += other.payoff_sum;
        self.wins += other.wins;
        self.min_persuaded = self.min_persuaded.min(other.min_persuaded);
    }
}

/// Simulates the strategy with the prior as the off-path belief.
pub fn simulate(
    strategy: &TargetedStrategy,
    game: &Game,
    pi0: &FiniteBelief,
    trials: u64,
    seed: u64,
) -> Result<SimReport> {
    simulate_with_offpath(strategy, game, pi0, trials, seed, None)
}

/// Simulates `trials` independent plays. Each trial draws the state, a
/// uniform target set by partial Fisher–Yates, the non-target messages and
/// one shared sunspot, in that order, from its own stream.
pub fn simulate_with_offpath(
    strategy: &TargetedStrategy,
    game: &Game,
    pi0: &FiniteBelief,
    trials: u64,
    seed: u64,
    offpath: Option<&FiniteBelief>,
) -> Result<SimReport> {
    check_audience(strategy, game, pi0)?;
    let (post_persuade, post_other, other_on_path) =
        message_posteriors(strategy, pi0, offpath.unwrap_or(pi0))?;
    let favored = [
        game.favored_actions(&post_persuade)?,
        game.favored_actions(&post_other)?,
    ];
    let (n, k) = (strategy.n, strategy.k);
    let all_persuaded = game.sender_payoff_counts(&[(favored[0][0], n)], None)?;
    let states = pi0.len();

    let partials = run_chunks(trials, |range| -> Result<Partial> {
        let mut part = Partial::new(states, n);
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut is_target = vec![false; n];
        for t in range {
            let mut rng = trial_rng(seed, t);
            let theta = pi0.sample_index(rng.gen::<f64>());
            order.clear();
            order.extend(0..n);
            is_target.iter_mut().for_each(|x| *x = false);
            for i in 0..k {
                let j = rng.gen_range(i..n);
                order.swap(i, j);
                is_target[order[i]] = true;
            }
            let q = strategy.nontarget_prob[theta];
            let mut persuaded = k;
            for target in &is_target {
                if !target && rng.gen::<f64>() < q {
                    persuaded += 1;
                }
            }
            let omega = rng.gen::<f64>();
            let a_persuade = pick_by_sunspot(&favored[0], omega);
            let a_other = pick_by_sunspot(&favored[1], omega);
            let payoff = game
                .sender_payoff_counts(&[(a_persuade, persuaded), (a_other, n - persuaded)], None)?;

            part.trials_by_state[theta] += 1;
            for (m, count) in [persuaded, n - persuaded].into_iter().enumerate() {
                part.recipients[m][theta] += count as u64;
                part.recipients_sq[m][theta] += (count as u128) * (count as u128);
            }
            part.payoff_sum += payoff;
            if payoff >= all_persuaded - WIN_TOL {
                part.wins += 1;
            }
            part.min_persuaded = part.min_persuaded.min(persuaded);
        }
        Ok(part)
    });
    let mut total = Partial::new(states, n);
    for p in partials {
        total.absorb(p?);
    }

    let analytic = [post_persuade, post_other];
    let mut messages = Vec::new();
    let mut posterior_error: f64 = 0.0;
    for (m, message) in [Message::Persuade, Message::Other].into_iter().enumerate() {
        let sum_b: u64 = total.recipients[m].iter().sum();
        if sum_b == 0 || (m == 1 && !other_on_path) {
            continue;
        }
        let sum_b2: u128 = total.recipients_sq[m].iter().sum();
        let mut empirical = Vec::with_capacity(states);
        let mut standard_error = Vec::with_capacity(states);
        for s in 0..states {
            let r = total.recipients[m][s] as f64 / sum_b as f64;
            let own_sq = total.recipients_sq[m][s] as f64;
            let residual = own_sq * (1.0 - 2.0 * r) + r * r * sum_b2 as f64;
            empirical.push(r);
            standard_error.push(ratio_standard_error(residual, sum_b as f64, trials));
        }
        let tv = 0.5
            * empirical
                .iter()
                .zip(analytic[m].probs())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        posterior_error = posterior_error.max(tv);
        messages.push(MessageStats {
            message: message.label().into(),
            statistic: "posterior".into(),
            recipients: sum_b,
            analytic: analytic[m].probs().to_vec(),
            empirical,
            standard_error,
        });
    }

    let receiver_trials = (n as u64 * trials) as f64;
    let mut mixture_error: f64 = 0.0;
    for s in 0..states {
        let mix: f64 = (0..2)
            .map(|m| {
                total.recipients[m].iter().sum::<u64>() as f64 / receiver_trials
                    * analytic[m].probs()[s]
            })
            .sum();
        mixture_error = mixture_error.max((mix - pi0.probs()[s]).abs());
    }

    let state_stats = (0..states)
        .filter(|&s| total.trials_by_state[s] > 0)
        .map(|s| StateStats {
            state: s,
            trials: total.trials_by_state[s],
            persuade_prob: strategy.persuade_prob[s],
            message_frequency: total.recipients[0][s] as f64
                / (n as u64 * total.trials_by_state[s]) as f64,
        })
        .collect();

    Ok(SimReport {
        trials,
        seed,
        rng: RNG_ALGORITHM.into(),
        n,
        target_size: k,
        win_rate: Some(if trials == 0 {
            0.0
        } else {
            total.wins as f64 / trials as f64
        }),
        mean_sender_payoff: if trials == 0 {
            0.0
        } else {
            total.payoff_sum / trials as f64
        },
        empirical_posterior_error: posterior_error,
        min_persuaded_count: if trials == 0 { k } else { total.min_persuaded },
        messages,
        states: state_stats,
        mixture_error: Some(mixture_error),
        conditional_payoffs: None,
    })
}

/// Outcome of the receiver and sender equilibrium checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCheck {
    pub receiver_br_ok: bool,
    pub sender_deviation_gain: f64,
    pub tolerance: f64,
    pub certified: bool,
    pub persuade_action: f64,
    pub other_action: f64,
    /// Sender payoff when exactly `c` receivers hear `m′`, for `c = 0..=n`.
    pub payoff_by_count: Vec<f64>,
}

/// Checks that receivers best-respond at both posteriors and that no count
/// of `m′` recipients pays more than some count the strategy actually uses.
///
/// Payoffs depend on a message profile only through the number of `m′`
/// recipients, so the `n + 1` counts exhaust the sender's deviations within
/// this two-message class.
pub fn verify_equilibrium(
    strategy: &TargetedStrategy,
    game: &Game,
    pi0: &FiniteBelief,
    offpath: &FiniteBelief,
) -> Result<EquilibriumCheck> {
    check_audience(strategy, game, pi0)?;
    let (post_persuade, post_other, _) = message_posteriors(strategy, pi0, offpath)?;
    let mut receiver_br_ok = true;
    let mut chosen = [0.0; 2];
    for (slot, post) in chosen.iter_mut().zip([&post_persuade, &post_other]) {
        let br = game.br_set(post)?;
        let favored = game.favored_actions(post)?;
        receiver_br_ok &= !favored.is_empty()
            && favored
                .iter()
                .all(|a| br.iter().any(|b| (a - b).abs() <= 1e-12));
        *slot = favored[0];
    }
    let n = strategy.n;
    let payoff_by_count: Vec<f64> = (0..=n)
        .map(|c| game.sender_payoff_counts(&[(chosen[0], c), (chosen[1], n - c)], None))
        .collect::<Result<_>>()?;
    let best = payoff_by_count
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut gain: f64 = 0.0;
    for (s, &q) in strategy.nontarget_prob.iter().enumerate() {
        if pi0.probs()[s] == 0.0 {
            continue;
        }
        let on_path = if q == 0.0 {
            strategy.k..=strategy.k
        } else if q == 1.0 {
            n..=n
        } else {
            strategy.k..=n
        };
        let worst = payoff_by_count[on_path]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        gain = gain.max(best - worst);
    }
    Ok(EquilibriumCheck {
        receiver_br_ok,
        sender_deviation_gain: gain,
        tolerance: DEVIATION_TOL,
        certified: receiver_br_ok && gain <= DEVIATION_TOL,
        persuade_action: chosen[0],
        other_action: chosen[1],
        payoff_by_count,
    })
}
