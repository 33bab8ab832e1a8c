//! Random-target-audience strategy for a density prior on `[0, 1]`, and the
//! crowdfunding equilibrium built from it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attainable::{max_expected_state_uniform, MEMBERSHIP_RTOL};
use crate::belief::{merge_breakpoints, PiecewiseDensity, StepFunction};
use crate::error::{Error, Result};
use crate::games::{crowdfund_br, pick_by_sunspot, CrowdfundParams, Game};
use crate::sim::report::{MessageStats, SimReport};
use crate::sim::rng::{ratio_standard_error, run_chunks, trial_rng, RNG_ALGORITHM};
use crate::sim::targeted::{Message, BUILD_POSTERIOR_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTargetedStrategy {
    pub n: usize,
    pub k: usize,
    pub gamma: f64,
    pub target: PiecewiseDensity,
    /// Marginal probability of `m′` as a function of the state.
    pub persuade_prob: StepFunction,
    pub nontarget_prob: StepFunction,
}

/// Builds the strategy that delivers density `pi` to at least `k` of `n`
/// receivers for every state.
pub fn build_density_strategy(
    pi: &PiecewiseDensity,
    pi0: &PiecewiseDensity,
    n: usize,
    k: usize,
) -> Result<DensityTargetedStrategy> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidParams(format!(
            "target size must satisfy 1 <= k <= n (k={k}, n={n})"
        )));
    }
    let gamma = k as f64 / n as f64;
    let ratio = pi.ratio_to(pi0)?;
    let (lo, hi) = pi.ratio_bounds(pi0)?;
    if lo < gamma * hi * (1.0 - MEMBERSHIP_RTOL) {
        return Err(Error::NotAttainable(format!(
            "likelihood ratio range [{lo}, {hi}] is too wide for gamma {gamma}"
        )));
    }
    let persuade_prob = ratio.map(|r| (r / hi).min(1.0));
    let nontarget_prob = persuade_prob.map(|f| {
        if k == n {
            1.0
        } else {
            ((f - gamma) / (1.0 - gamma)).clamp(0.0, 1.0)
        }
    });
    let strategy = DensityTargetedStrategy {
        n,
        k,
        gamma,
        target: pi.clone(),
        persuade_prob,
        nontarget_prob,
    };
    let posterior = density_posterior(&strategy, pi0, Message::Persuade)?;
    let grid = merge_breakpoints(posterior.breakpoints(), pi.breakpoints());
    for w in grid.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let err = (posterior.density_at(mid) - pi.density_at(mid)).abs();
        if err > BUILD_POSTERIOR_TOL * pi.density_at(mid).max(1.0) {
            return Err(Error::NotAttainable(format!(
                "posterior after m' misses the target by {err:e}"
            )));
        }
    }
    Ok(strategy)
}

/// Exact posterior density after `message`.
pub fn density_posterior(
    strategy: &DensityTargetedStrategy,
    pi0: &PiecewiseDensity,
    message: Message,
) -> Result<PiecewiseDensity> {
    match message {
        Message::Persuade => pi0.update(&strategy.persuade_prob),
        Message::Other => pi0.update(&strategy.persuade_prob.map(|f| (1.0 - f).max(0.0))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrowdfundMode {
    /// Uninformative talk; the prior already induces positive pledges.
    Babbling,
    /// Targeted persuasion of `n′` receivers.
    Targeted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrowdfundEquilibrium {
    pub mode: CrowdfundMode,
    pub n: usize,
    /// Receivers guaranteed to hold the optimistic posterior.
    pub n_prime: usize,
    pub gamma: f64,
    /// Cutoff below which the optimistic posterior is down-weighted.
    pub theta1: f64,
    pub posterior_mean: f64,
    pub pledge: f64,
    /// Pledges guaranteed in every state.
    pub guaranteed_total: f64,
    pub eta_threshold: f64,
    pub sufficient_audience: f64,
    pub audience_sufficient: bool,
    /// `guaranteed_total >= eta_threshold`.
    pub check: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<DensityTargetedStrategy>,
}

/// Constructs an equilibrium that backs the project in every state when one
/// is available. Babbling is used when the prior mean already exceeds the
/// indifference mean `1/(1+ρ)`; otherwise `n′ = ceil(nρ²/4)` receivers are
/// targeted with the two-level posterior of largest mean.
pub fn crowdfund_equilibrium(params: &CrowdfundParams) -> Result<CrowdfundEquilibrium> {
    params.validate()?;
    let n = params.n;
    let prior = PiecewiseDensity::uniform();
    let sufficient_audience = params.sufficient_audience();
    let base = |mode, n_prime, gamma, theta1, mean: f64, strategy| {
        let pledge = crowdfund_br(params, mean);
        let guaranteed_total = n_prime as f64 * pledge;
        CrowdfundEquilibrium {
            mode,
            n,
            n_prime,
            gamma,
            theta1,
            posterior_mean: mean,
            pledge,
            guaranteed_total,
            eta_threshold: params.eta_threshold,
            sufficient_audience,
            audience_sufficient: n as f64 >= sufficient_audience,
            check: guaranteed_total >= params.eta_threshold,
            strategy,
        }
    };
    if crowdfund_br(params, prior.expected_state()) > 0.0 {
        return Ok(base(
            CrowdfundMode::Babbling,
            n,
            1.0,
            0.5,
            prior.expected_state(),
            None,
        ));
    }
    let n_prime = ((n as f64 * params.rho * params.rho / 4.0).ceil() as usize).clamp(1, n);
    let gamma = n_prime as f64 / n as f64;
    let opt = max_expected_state_uniform(gamma)?;
    let strategy = build_density_strategy(&opt.density, &prior, n, n_prime)?;
    Ok(base(
        CrowdfundMode::Targeted,
        n_prime,
        gamma,
        opt.theta1,
        opt.density.expected_state(),
        Some(strategy),
    ))
}

/// How trial states are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSampling {
    /// Independent draws from the uniform prior.
    Prior,
    /// Trial `t` uses the midpoint of cell `t mod G` of a `G`-cell grid.
    Grid(usize),
}

#[derive(Default)]
struct Partial {
    payoff_sum: f64,
    wins: u64,
    min_persuaded: usize,
    /// Per message: Σb, Σb², Σbθ, Σb²θ, Σb²θ².
    sums: [[f64; 5]; 2],
}

/// Simulates the crowdfunding equilibrium. Each trial draws the state, the
/// target set, the non-target messages and a shared sunspot from its own
/// stream; the project is backed iff total pledges reach the threshold.
pub fn simulate_crowdfund(
    eq: &CrowdfundEquilibrium,
    params: &CrowdfundParams,
    trials: u64,
    seed: u64,
    sampling: ThetaSampling,
) -> Result<SimReport> {
    let game = Game::crowdfund(*params)?;
    if eq.n != params.n {
        return Err(Error::AudienceMismatch {
            strategy: eq.n,
            game: params.n,
        });
    }
    if let ThetaSampling::Grid(0) = sampling {
        return Err(Error::InvalidParams(
            "theta grid needs at least one cell".into(),
        ));
    }
    let n = params.n;
    let prior = PiecewiseDensity::uniform();
    let (posteriors, k) = match &eq.strategy {
        Some(s) => {
            let other =
                density_posterior(s, &prior, Message::Other).unwrap_or_else(|_| prior.clone());
            (
                [density_posterior(s, &prior, Message::Persuade)?, other],
                s.k,
            )
        }
        None => ([prior.clone(), prior.clone()], n),
    };
    let favored = [
        game.favored_actions(&posteriors[0])?,
        game.favored_actions(&posteriors[1])?,
    ];

    let partials = run_chunks(trials, |range| -> Result<Partial> {
        let mut part = Partial {
            min_persuaded: n,
            ..Default::default()
        };
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut is_target = vec![false; n];
        for t in range {
            let mut rng = trial_rng(seed, t);
            let u = rng.gen::<f64>();
            let theta = match sampling {
                ThetaSampling::Prior => u,
                ThetaSampling::Grid(g) => ((t % g as u64) as f64 + 0.5) / g as f64,
            };
            let persuaded = match &eq.strategy {
                Some(s) => {
                    order.clear();
                    order.extend(0..n);
                    is_target.iter_mut().for_each(|x| *x = false);
                    for i in 0..k {
                        let j = rng.gen_range(i..n);
                        order.swap(i, j);
                        is_target[order[i]] = true;
                    }
                    let q = s.nontarget_prob.value_at(theta);
                    k + is_target
                        .iter()
                        .filter(|&&target| !target && rng.gen::<f64>() < q)
                        .count()
                }
                None => n,
            };
            let omega = rng.gen::<f64>();
            let groups = [
                (pick_by_sunspot(&favored[0], omega), persuaded),
                (pick_by_sunspot(&favored[1], omega), n - persuaded),
            ];
            let payoff = game.sender_payoff_counts(&groups, None)?;
            part.payoff_sum += payoff;
            if payoff >= 1.0 {
                part.wins += 1;
            }
            part.min_persuaded = part.min_persuaded.min(persuaded);
            for (m, count) in [persuaded, n - persuaded].into_iter().enumerate() {
                let b = count as f64;
                let s = &mut part.sums[m];
                s[0] += b;
                s[1] += b * b;
                s[2] += b * theta;
                s[3] += b * b * theta;
                s[4] += b * b * theta * theta;
            }
        }
        Ok(part)
    });
    let mut payoff_sum = 0.0;
    let mut wins = 0;
    let mut min_persuaded = n;
    let mut sums = [[0.0; 5]; 2];
    for p in partials {
        let p = p?;
        payoff_sum += p.payoff_sum;
        wins += p.wins;
        min_persuaded = min_persuaded.min(p.min_persuaded);
        for (acc, part) in sums.iter_mut().flatten().zip(p.sums.iter().flatten()) {
            *acc += part;
        }
    }

    let mut messages = Vec::new();
    let mut posterior_error: f64 = 0.0;
    let on_path = [true, eq.strategy.is_some()];
    for (m, message) in [Message::Persuade, Message::Other].into_iter().enumerate() {
        let s = sums[m];
        if s[0] == 0.0 || !on_path[m] {
            continue;
        }
        let r = s[2] / s[0];
        let residual = s[4] - 2.0 * r * s[3] + r * r * s[1];
        let analytic = posteriors[m].expected_state();
        posterior_error = posterior_error.max((r - analytic).abs());
        messages.push(MessageStats {
            message: message.label().into(),
            statistic: "posterior_mean".into(),
            recipients: s[0] as u64,
            analytic: vec![analytic],
            empirical: vec![r],
            standard_error: vec![ratio_standard_error(residual, s[0], trials)],
        });
    }
    let denom = trials.max(1) as f64;
    Ok(SimReport {
        trials,
        seed,
        rng: RNG_ALGORITHM.into(),
        n,
        target_size: k,
        win_rate: Some(wins as f64 / denom),
        mean_sender_payoff: payoff_sum / denom,
        empirical_posterior_error: posterior_error,
        min_persuaded_count: min_persuaded,
        messages,
        states: Vec::new(),
        mixture_error: None,
        conditional_payoffs: None,
    })
}
