//! Game models: a generic separable finite game and four applications
//! (supermajority election, bookie, crowdfunding, quadratic cheap talk).
//!
//! Actions are real numbers. For finite games an action is its index in the
//! action list. Binary-state games index the high state first, so a binary
//! belief is summarized by `p = probs[0]`.

use serde::{Deserialize, Serialize};

use crate::belief::{AudienceSpec, FiniteBelief, PiecewiseDensity, StateSpace};
use crate::error::{Error, Result};

/// Expected-utility tie tolerance when comparing actions.
pub const BR_TIE_TOL: f64 = 1e-10;

/// Tolerance for treating two sender utilities as equal.
const SENDER_TIE_TOL: f64 = 1e-12;

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidParams(format!(
            "{name} must lie in (0, 1), got {x}"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "{name} must be positive, got {x}"
        )));
    }
    Ok(())
}

/// Supermajority election: receivers vote for the sender iff `P(θ=1) ≥ eta`
/// and the sender needs a share `gamma` of the votes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectionParams {
    pub p0: f64,
    pub eta: f64,
    pub gamma: f64,
}

impl Default for ElectionParams {
    fn default() -> Self {
        Self {
            p0: 0.4,
            eta: 0.5,
            gamma: 0.5,
        }
    }
}

impl ElectionParams {
    pub fn validate(&self) -> Result<()> {
        check_open_unit("p0", self.p0)?;
        check_open_unit("eta", self.eta)?;
        check_open_unit("gamma", self.gamma)
    }

    /// Votes needed out of `n`: the smallest count that is at least `gamma·n`.
    pub fn pivotal_count(&self, n: usize) -> usize {
        let exact = self.gamma * n as f64;
        let rounded = exact.round();
        let count = if (exact - rounded).abs() < 1e-9 {
            rounded
        } else {
            exact.ceil()
        };
        (count as usize).clamp(1, n)
    }
}

/// Bookie: receivers bet on a binary event with net returns `rho1` (state 1)
/// and `rho0` (state 0); the sender values state-1 volume at weight `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BookieParams {
    pub w: f64,
    pub eta: f64,
    pub rho0: f64,
    pub rho1: f64,
}

impl Default for BookieParams {
    fn default() -> Self {
        Self {
            w: 0.5,
            eta: std::f64::consts::SQRT_2,
            rho0: 0.2,
            rho1: 0.5,
        }
    }
}

impl BookieParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("w", self.w)?;
        check_positive("rho0", self.rho0)?;
        check_positive("rho1", self.rho1)?;
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "eta must exceed 1, got {}",
                self.eta
            )));
        }
        if self.rho0 * self.rho1 >= 1.0 {
            return Err(Error::InvalidParams("rho0 * rho1 must be below 1".into()));
        }
        Ok(())
    }

    /// Lower edge of the positive-bet region.
    pub fn long_threshold(&self) -> f64 {
        1.0 / (1.0 + self.rho1)
    }

    /// Upper edge of the negative-bet region.
    pub fn short_threshold(&self) -> f64 {
        self.rho0 / (1.0 + self.rho0)
    }
}

/// Crowdfunding: `n` log-utility backers with wealth `w`; the project is
/// backed once total pledges reach `eta_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrowdfundParams {
    pub w: f64,
    pub rho: f64,
    pub eta_threshold: f64,
    pub n: usize,
}

impl Default for CrowdfundParams {
    fn default() -> Self {
        Self {
            w: 1.0,
            rho: 0.5,
            eta_threshold: 2.0,
            n: 96,
        }
    }
}

impl CrowdfundParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("w", self.w)?;
        check_positive("rho", self.rho)?;
        check_positive("eta_threshold", self.eta_threshold)?;
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be positive".into()));
        }
        Ok(())
    }

    /// Audience size above which the targeted construction is guaranteed.
    pub fn sufficient_audience(&self) -> f64 {
        12.0 * self.eta_threshold / (self.w * self.rho * self.rho)
    }
}

/// Quadratic cheap talk with bias `b`: receivers act at their posterior mean
/// and the sender's loss is averaged over the top `n0` actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticCsParams {
    pub b: f64,
    /// Audience size; `None` asks the caller to search for the smallest
    /// incentive-compatible size.
    pub n: Option<usize>,
    pub n0: usize,
    #[serde(rename = "K")]
    pub blocks: usize,
}

impl Default for QuadraticCsParams {
    fn default() -> Self {
        Self {
            b: 0.3,
            n: None,
            n0: 1,
            blocks: 10,
        }
    }
}

impl QuadraticCsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.25 && self.b.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "bias must exceed 1/4, got {}",
                self.b
            )));
        }
        if self.blocks == 0 {
            return Err(Error::InvalidParams("K must be at least 1".into()));
        }
        if self.n0 == 0 {
            return Err(Error::InvalidParams("n0 must be at least 1".into()));
        }
        if let Some(n) = self.n {
            if n <= self.n0 {
                return Err(Error::InvalidParams(format!(
                    "need n0 < n, got n0={} n={n}",
                    self.n0
                )));
            }
        }
        Ok(())
    }
}

/// Separable game with finitely many states and actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiniteGameRaw")]
pub struct FiniteGame {
    states: StateSpace,
    actions: Vec<String>,
    /// `receiver_utility[action][state]`.
    receiver_utility: Vec<Vec<f64>>,
    sender_utility: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FiniteGameRaw {
    states: StateSpace,
    actions: Vec<String>,
    receiver_utility: Vec<Vec<f64>>,
    sender_utility: Vec<f64>,
}

impl TryFrom<FiniteGameRaw> for FiniteGame {
    type Error = Error;
    fn try_from(raw: FiniteGameRaw) -> Result<Self> {
        FiniteGame::new(
            raw.states,
            raw.actions,
            raw.receiver_utility,
            raw.sender_utility,
        )
    }
}

impl FiniteGame {
    pub fn new(
        states: StateSpace,
        actions: Vec<String>,
        receiver_utility: Vec<Vec<f64>>,
        sender_utility: Vec<f64>,
    ) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidParams(
                "finite game needs at least one action".into(),
            ));
        }
        if receiver_utility.len() != actions.len() {
            return Err(Error::DimensionMismatch {
                expected: actions.len(),
                got: receiver_utility.len(),
            });
        }
        if sender_utility.len() != actions.len() {
            return Err(Error::DimensionMismatch {
                expected: actions.len(),
                got: sender_utility.len(),
            });
        }
        for row in &receiver_utility {
            if row.len() != states.len() {
                return Err(Error::DimensionMismatch {
                    expected: states.len(),
                    got: row.len(),
                });
            }
        }
        if receiver_utility
            .iter()
            .flatten()
            .chain(&sender_utility)
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidParams("utilities must be finite".into()));
        }
        Ok(Self {
            states,
            actions,
            receiver_utility,
            sender_utility,
        })
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    fn expected_utilities(&self, belief: &FiniteBelief) -> Result<Vec<f64>> {
        self.receiver_utility
            .iter()
            .map(|row| belief.dot(row))
            .collect()
    }
}

/// Which application a [`Game`] models.
#[derive(Debug, Clone, PartialEq)]
pub enum GameKind {
    Finite(FiniteGame),
    Election(ElectionParams),
    Bookie(BookieParams),
    Crowdfund(CrowdfundParams),
    QuadraticCs(QuadraticCsParams),
}

/// A receiver belief: finite vector or density on `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub enum Belief<'a> {
    Finite(&'a FiniteBelief),
    Density(&'a PiecewiseDensity),
}

impl<'a> From<&'a FiniteBelief> for Belief<'a> {
    fn from(b: &'a FiniteBelief) -> Self {
        Belief::Finite(b)
    }
}

impl<'a> From<&'a PiecewiseDensity> for Belief<'a> {
    fn from(b: &'a PiecewiseDensity) -> Self {
        Belief::Density(b)
    }
}

/// A game together with its audience.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    kind: GameKind,
    audience: AudienceSpec,
}

fn check_pivotal(audience: &AudienceSpec) -> Result<()> {
    if audience.n0 == 0 {
        return Err(Error::InvalidParams(
            "pivotal count n0 must be at least 1".into(),
        ));
    }
    Ok(())
}

impl Game {
    pub fn finite(game: FiniteGame, audience: AudienceSpec) -> Result<Self> {
        check_pivotal(&audience)?;
        Ok(Self {
            kind: GameKind::Finite(game),
            audience,
        })
    }

    /// Election with `n` voters; the pivotal count is `ceil(gamma·n)`.
    pub fn election(params: ElectionParams, n: usize) -> Result<Self> {
        params.validate()?;
        if n == 0 {
            return Err(Error::InvalidParams(
                "election needs at least one voter".into(),
            ));
        }
        let audience = AudienceSpec::new(n, params.pivotal_count(n))?;
        Ok(Self {
            kind: GameKind::Election(params),
            audience,
        })
    }

    pub fn bookie(params: BookieParams, audience: AudienceSpec) -> Result<Self> {
        params.validate()?;
        check_pivotal(&audience)?;
        Ok(Self {
            kind: GameKind::Bookie(params),
            audience,
        })
    }

    /// Crowdfunding with `params.n` backers. Every backer's pledge counts,
    /// so the pivotal count is the whole audience.
    pub fn crowdfund(params: CrowdfundParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            kind: GameKind::Crowdfund(params),
            audience: AudienceSpec::new(params.n, params.n)?,
        })
    }

    /// Quadratic cheap talk; requires `params.n` to be set.
    pub fn quadratic_cs(params: QuadraticCsParams) -> Result<Self> {
        params.validate()?;
        let n = params
            .n
            .ok_or_else(|| Error::InvalidParams("quadratic_cs game needs n".into()))?;
        Ok(Self {
            kind: GameKind::QuadraticCs(params),
            audience: AudienceSpec::new(n, params.n0)?,
        })
    }

    pub fn kind(&self) -> &GameKind {
        &self.kind
    }

    pub fn audience(&self) -> AudienceSpec {
        self.audience
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            GameKind::Finite(_) => "finite",
            GameKind::Election(_) => "election",
            GameKind::Bookie(_) => "bookie",
            GameKind::Crowdfund(_) => "crowdfund",
            GameKind::QuadraticCs(_) => "quadratic_cs",
        }
    }

    /// Finite state space, or `None` for games on `[0, 1]`.
    pub fn states(&self) -> Option<StateSpace> {
        match &self.kind {
            GameKind::Finite(g) => Some(g.states.clone()),
            GameKind::Election(_) | GameKind::Bookie(_) => Some(StateSpace::binary()),
            GameKind::Crowdfund(_) | GameKind::QuadraticCs(_) => None,
        }
    }

    /// `false` only for games whose per-receiver sender utility is not
    /// monotone in the action (the bookie).
    pub fn sender_utility_monotone(&self) -> bool {
        !matches!(self.kind, GameKind::Bookie(_))
    }

    /// Per-receiver sender utility `U_S(a)`.
    pub fn sender_utility(&self, action: f64) -> Result<f64> {
        match &self.kind {
            GameKind::Finite(g) => {
                let idx = action_index(action, g.actions.len())?;
                Ok(g.sender_utility[idx])
            }
            GameKind::Election(_) => Ok(if action >= 0.5 { 1.0 } else { 0.0 }),
            GameKind::Bookie(p) => Ok(bookie_sender_utility(p, action)),
            GameKind::Crowdfund(_) => Err(Error::NonSeparableGame("crowdfund")),
            GameKind::QuadraticCs(_) => Err(Error::NonSeparableGame("quadratic_cs")),
        }
    }

    fn check_finite_dims(&self, belief: &FiniteBelief) -> Result<()> {
        let expected = self.states().map(|s| s.len()).ok_or_else(|| {
            Error::UnsupportedGame(format!("{} takes a density belief", self.name()))
        })?;
        if belief.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: belief.len(),
            });
        }
        Ok(())
    }

    /// Receiver best responses, in increasing action order.
    pub fn br_set<'a>(&self, belief: impl Into<Belief<'a>>) -> Result<Vec<f64>> {
        match belief.into() {
            Belief::Finite(b) => {
                self.check_finite_dims(b)?;
                match &self.kind {
                    GameKind::Finite(g) => {
                        let eu = g.expected_utilities(b)?;
                        let best = eu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        Ok((0..eu.len())
                            .filter(|&i| eu[i] >= best - BR_TIE_TOL)
                            .map(|i| i as f64)
                            .collect())
                    }
                    GameKind::Election(params) => {
                        let gain = b.probs()[0] - params.eta;
                        Ok(if gain.abs() <= BR_TIE_TOL {
                            vec![0.0, 1.0]
                        } else if gain > 0.0 {
                            vec![1.0]
                        } else {
                            vec![0.0]
                        })
                    }
                    GameKind::Bookie(params) => Ok(vec![bookie_br(params, b.probs()[0])]),
                    GameKind::Crowdfund(_) | GameKind::QuadraticCs(_) => {
                        unreachable!("rejected by dimension check")
                    }
                }
            }
            Belief::Density(d) => match &self.kind {
                GameKind::Crowdfund(params) => Ok(vec![crowdfund_br(params, d.expected_state())]),
                GameKind::QuadraticCs(_) => Ok(vec![d.expected_state()]),
                _ => Err(Error::UnsupportedGame(format!(
                    "{} takes a finite belief",
                    self.name()
                ))),
            },
        }
    }

    /// Best response coordinated by the public sunspot `omega ∈ [0, 1)`:
    /// the sender-preferred responses are kept and `omega` picks among them.
    pub fn coordinated_action<'a>(&self, belief: impl Into<Belief<'a>>, omega: f64) -> Result<f64> {
        Ok(pick_by_sunspot(&self.favored_actions(belief)?, omega))
    }

    /// Best responses that maximize the sender's per-receiver utility; all
    /// best responses when that utility is not defined.
    pub fn favored_actions<'a>(&self, belief: impl Into<Belief<'a>>) -> Result<Vec<f64>> {
        let br = self.br_set(belief)?;
        match self.sender_utility(br[0]) {
            Ok(_) => {
                let utils: Vec<f64> = br
                    .iter()
                    .map(|&a| self.sender_utility(a))
                    .collect::<Result<_>>()?;
                let best = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(br
                    .iter()
                    .zip(&utils)
                    .filter(|(_, &u)| u >= best - SENDER_TIE_TOL)
                    .map(|(&a, _)| a)
                    .collect())
            }
            Err(Error::NonSeparableGame(_)) => Ok(br),
            Err(e) => Err(e),
        }
    }

    /// Belief parameters in `(0, 1)` where the binary best response changes.
    pub fn binary_breakpoints(&self) -> Result<Vec<f64>> {
        let mut points = match &self.kind {
            GameKind::Election(p) => vec![p.eta],
            GameKind::Bookie(p) => vec![p.short_threshold(), p.long_threshold()],
            GameKind::Finite(g) => {
                if g.states.len() != 2 {
                    return Err(Error::NonBinaryStateSpace(g.states.len()));
                }
                let u = &g.receiver_utility;
                let mut pts = Vec::new();
                for i in 0..u.len() {
                    for j in i + 1..u.len() {
                        // (u_i1 - u_j1) p + (u_i0 - u_j0)(1 - p) = 0
                        let d1 = u[i][0] - u[j][0];
                        let d0 = u[i][1] - u[j][1];
                        if d1 != d0 {
                            let p = d0 / (d0 - d1);
                            if p > 0.0 && p < 1.0 {
                                pts.push(p);
                            }
                        }
                    }
                }
                pts
            }
            GameKind::Crowdfund(_) | GameKind::QuadraticCs(_) => {
                return Err(Error::UnsupportedGame(format!(
                    "{} has a continuous state",
                    self.name()
                )))
            }
        };
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(points)
    }

    /// Sender payoff from an action profile given as `(action, count)` groups.
    /// `theta` is required only by the quadratic game.
    pub fn sender_payoff_counts(&self, groups: &[(f64, usize)], theta: Option<f64>) -> Result<f64> {
        let total: usize = groups.iter().map(|g| g.1).sum();
        if total != self.audience.n {
            return Err(Error::LengthMismatch {
                expected: self.audience.n,
                got: total,
            });
        }
        let n0 = self.audience.n0;
        match &self.kind {
            GameKind::Election(_) => {
                let votes: usize = groups.iter().filter(|g| g.0 >= 0.5).map(|g| g.1).sum();
                Ok(if votes >= n0 { 1.0 } else { 0.0 })
            }
            GameKind::Finite(_) | GameKind::Bookie(_) => {
                let mut utils: Vec<(f64, usize)> = groups
                    .iter()
                    .map(|&(a, c)| Ok((self.sender_utility(a)?, c)))
                    .collect::<Result<_>>()?;
                utils.sort_by(|x, y| y.0.total_cmp(&x.0));
                Ok(top_mean(&utils, n0))
            }
            GameKind::Crowdfund(p) => {
                let pledged: f64 = groups.iter().map(|&(a, c)| a * c as f64).sum();
                Ok(if pledged >= p.eta_threshold { 1.0 } else { 0.0 })
            }
            GameKind::QuadraticCs(p) => {
                let theta = theta.ok_or_else(|| {
                    Error::InvalidParams("quadratic payoff needs the state".into())
                })?;
                let mut sorted = groups.to_vec();
                sorted.sort_by(|x, y| y.0.total_cmp(&x.0));
                let losses: Vec<(f64, usize)> = sorted
                    .iter()
                    .map(|&(a, c)| (-(theta + p.b - a).powi(2), c))
                    .collect();
                Ok(top_mean(&losses, n0))
            }
        }
    }

    /// Sender payoff from an explicit action profile.
    pub fn sender_payoff(&self, actions: &[f64], theta: Option<f64>) -> Result<f64> {
        let groups: Vec<(f64, usize)> = actions.iter().map(|&a| (a, 1)).collect();
        self.sender_payoff_counts(&groups, theta)
    }
}

/// Element of a nonempty `choices` selected by `omega ∈ [0, 1)`.
pub fn pick_by_sunspot(choices: &[f64], omega: f64) -> f64 {
    let idx = ((omega * choices.len() as f64) as usize).min(choices.len() - 1);
    choices[idx]
}

/// Mean of the first `n0` entries of a run-length encoded list.
fn top_mean(sorted: &[(f64, usize)], n0: usize) -> f64 {
    let mut left = n0;
    let mut sum = 0.0;
    for &(u, c) in sorted {
        let take = c.min(left);
        sum += u * take as f64;
        left -= take;
        if left == 0 {
            break;
        }
    }
    sum / n0 as f64
}

fn action_index(action: f64, len: usize) -> Result<usize> {
    let idx = action as usize;
    if action < 0.0 || action.fract() != 0.0 || idx >= len {
        return Err(Error::InvalidParams(format!(
            "action {action} is not an index below {len}"
        )));
    }
    Ok(idx)
}

fn bookie_sender_utility(params: &BookieParams, bet: f64) -> f64 {
    if bet > 0.0 {
        params.eta * bet
    } else {
        -bet
    }
}

/// Strict check of `η/(1−η) < (1/γ₀)·p₀/(1−p₀)`.
pub fn election_win_attainable(params: &ElectionParams, gamma0: f64) -> bool {
    let lhs = params.eta / (1.0 - params.eta);
    let rhs = params.p0 / (1.0 - params.p0) / gamma0;
    lhs < rhs
}

/// Optimal bet at belief `p`: positive amounts bet on state 1, negative on
/// state 0, zero on `[rho0/(1+rho0), 1/(1+rho1)]`.
pub fn bookie_br(params: &BookieParams, p: f64) -> f64 {
    let w = params.w;
    if p >= params.long_threshold() {
        (w / params.rho1) * ((1.0 + params.rho1) * p - 1.0)
    } else if p <= params.short_threshold() {
        -(w / params.rho0) * ((1.0 + params.rho0) * (1.0 - p) - 1.0)
    } else {
        0.0
    }
}

/// Optimal pledge of a log-utility backer whose expected success
/// probability is `mean_theta`.
pub fn crowdfund_br(params: &CrowdfundParams, mean_theta: f64) -> f64 {
    ((params.w / params.rho) * (mean_theta * (1.0 + params.rho) - 1.0)).max(0.0)
}

/// Average squared loss of the top `n0` actions against the bliss point
/// `theta + b`. `actions` must hold exactly `n0` entries.
pub fn cs_sender_loss(params: &QuadraticCsParams, theta: f64, actions: &[f64]) -> Result<f64> {
    if actions.len() != params.n0 {
        return Err(Error::LengthMismatch {
            expected: params.n0,
            got: actions.len(),
        });
    }
    let total: f64 = actions.iter().map(|a| (theta + params.b - a).powi(2)).sum();
    Ok(-total / params.n0 as f64)
}
