//! Command implementations behind the `cheaptalk` binary.
//!
//! Each command turns a validated [`ExperimentConfig`] into an artifact
//! (CSV or JSON text) plus the list of checks it declares. Artifacts depend
//! only on the config, never on the thread count.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attainable::{
    binary_interval, extreme_points, max_expected_state_uniform, AttainablePolytope,
    BinaryInterval, UniformOptimum,
};
use crate::belief::{AudienceSpec, FiniteBelief};
use crate::config::{Command, ExperimentConfig, GameConfig};
use crate::envelopes::{CurveBundle, EquilibriumValueReport, ValueCurves};
use crate::error::{Error, Result};
use crate::games::{Game, QuadraticCsParams};
use crate::sim::{
    build_attaining_strategy, build_cs_strategy, crowdfund_equilibrium, cs_check_incentive,
    simulate_crowdfund, simulate_cs, simulate_with_offpath, verify_equilibrium,
    CrowdfundEquilibrium, EquilibriumCheck, IncentiveReport, SimReport, TargetedStrategy,
    ThetaSampling,
};

/// Environment variable that caps the worker threads.
pub const THREADS_ENV: &str = "THREADS";

/// Slack on the partition-strategy payoff bounds.
pub const CS_BOUND_TOL: f64 = 0.01;

/// Standard errors allowed between empirical and analytic posteriors.
pub const POSTERIOR_SE_MULTIPLE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Text to write plus the checks that decide the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifact: String,
    pub checks: Vec<CheckResult>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Machine-readable list of failed checks.
    pub fn failures_json(&self, command: Command) -> String {
        let failed: Vec<&CheckResult> = self.checks.iter().filter(|c| !c.passed).collect();
        serde_json::json!({"status": "failed", "command": command.name(), "failures": failed})
            .to_string()
    }
}

/// Machine-readable description of an error that stopped a command.
pub fn error_json(command: Option<Command>, err: &Error) -> String {
    serde_json::json!({
        "status": "error",
        "command": command.map(Command::name),
        "failures": [CheckResult::new("run", false, err.to_string())],
    })
    .to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttainableOutput {
    pub gamma0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<BinaryInterval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polytope: Option<AttainablePolytope>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniform: Option<UniformOptimum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuesOutput {
    pub game: String,
    pub resolution: usize,
    pub report: EquilibriumValueReport,
}

/// JSON document written by `simulate` and `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub command: Command,
    pub game: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<SimReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<TargetedStrategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crowdfund: Option<CrowdfundEquilibrium>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incentive: Option<IncentiveReport>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl RunOutput {
    fn new(command: Command, game: &GameConfig, checks: Vec<CheckResult>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            command,
            game: game.kind().into(),
            report: None,
            strategy: None,
            equilibrium: None,
            crowdfund: None,
            incentive: None,
            checks,
            passed,
        }
    }
}

/// Sizes the global worker pool from `THREADS` when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Error::Config(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("{THREADS_ENV}: {e}")))
}

/// Validates the config and runs its command.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    match config.validate()? {
        Command::Attainable => cmd_attainable(config),
        Command::Values => cmd_values(config),
        Command::Figure => cmd_figure(config),
        Command::Simulate => cmd_simulate(config),
        Command::Verify => cmd_verify(config),
    }
}

/// Writes the artifact to `path`, or to standard output when absent.
pub fn write_artifact(path: Option<&Path>, artifact: &str) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, artifact).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(artifact.as_bytes())
                .map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    text
}

fn wants_csv(config: &ExperimentConfig) -> bool {
    config
        .output
        .as_deref()
        .and_then(Path::extension)
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn game_config(config: &ExperimentConfig) -> Result<&GameConfig> {
    config
        .game
        .as_ref()
        .ok_or_else(|| Error::Config("missing field `game`".into()))
}

fn build_game(game: &GameConfig) -> Result<Game> {
    match game {
        GameConfig::Election { params, n } => Game::election(*params, *n),
        GameConfig::Bookie { params, n, n0 } => Game::bookie(*params, AudienceSpec::new(*n, *n0)?),
        GameConfig::Crowdfund { params } => Game::crowdfund(*params),
        GameConfig::QuadraticCs { params } => Game::quadratic_cs(*params),
        GameConfig::Finite { game, n, n0 } => {
            Game::finite(game.clone(), AudienceSpec::new(*n, *n0)?)
        }
    }
}

/// Finite prior from `prior`, falling back to the election's `p0`.
fn finite_prior(config: &ExperimentConfig, game: &GameConfig) -> Result<FiniteBelief> {
    match (&config.prior, game) {
        (Some(prior), _) => prior
            .finite()?
            .ok_or_else(|| Error::Config(format!("game `{}` needs a finite prior", game.kind()))),
        (None, GameConfig::Election { params, .. }) => FiniteBelief::binary(params.p0),
        (None, _) => Err(Error::Config(format!(
            "game `{}` requires field `prior`",
            game.kind()
        ))),
    }
}

/// Lists the attainable set: interval and vertices for finite priors, the
/// optimal two-level density for the uniform prior.
pub fn cmd_attainable(config: &ExperimentConfig) -> Result<Outcome> {
    let gamma0 = config
        .gamma0
        .ok_or_else(|| Error::Config("missing field `gamma0`".into()))?;
    let prior = config
        .prior
        .as_ref()
        .ok_or_else(|| Error::Config("missing field `prior`".into()))?;
    let output = match prior.finite()? {
        Some(pi0) => {
            let polytope = extreme_points(&pi0, gamma0)?;
            if wants_csv(config) {
                return Ok(Outcome {
                    artifact: polytope.vertices_csv(),
                    checks: Vec::new(),
                });
            }
            let interval = if pi0.len() == 2 {
                Some(binary_interval(pi0.probs()[0], gamma0)?)
            } else {
                None
            };
            AttainableOutput {
                gamma0,
                interval,
                polytope: Some(polytope),
                uniform: None,
            }
        }
        None => {
            let opt = max_expected_state_uniform(gamma0)?;
            if wants_csv(config) {
                let artifact = format!("theta1,value\n{},{}\n", opt.theta1, opt.value);
                return Ok(Outcome {
                    artifact,
                    checks: Vec::new(),
                });
            }
            AttainableOutput {
                gamma0,
                interval: None,
                polytope: None,
                uniform: Some(opt),
            }
        }
    };
    Ok(Outcome {
        artifact: to_json(&output),
        checks: Vec::new(),
    })
}

/// Value report for a binary-state game at one prior.
pub fn cmd_values(config: &ExperimentConfig) -> Result<Outcome> {
    let game_cfg = game_config(config)?;
    let game = build_game(game_cfg)?;
    let pi0 = finite_prior(config, game_cfg)?;
    if pi0.len() != 2 {
        return Err(Error::NonBinaryStateSpace(pi0.len()));
    }
    let gamma0 = config.gamma0.unwrap_or(game.audience().gamma0);
    let resolution = config.resolution();
    let report = ValueCurves::new(&game, resolution)?.report(pi0.probs()[0], gamma0)?;
    let output = ValuesOutput {
        game: game_cfg.kind().into(),
        resolution,
        report,
    };
    Ok(Outcome {
        artifact: to_json(&output),
        checks: Vec::new(),
    })
}

/// Curve bundle CSV for the bookie or election game.
pub fn cmd_figure(config: &ExperimentConfig) -> Result<Outcome> {
    let game_cfg = game_config(config)?;
    let defaults: Vec<f64> = match game_cfg {
        GameConfig::Bookie { .. } => vec![0.1, 1.0 / 3.0, 1.0],
        GameConfig::Election { params, .. } => vec![params.gamma],
        other => return Err(Error::UnsupportedGame(other.kind().into())),
    };
    let gammas = match (&config.gammas, config.gamma0) {
        (Some(list), _) => list.clone(),
        (None, Some(g)) => vec![g],
        (None, None) => defaults,
    };
    let game = build_game(game_cfg)?;
    let curves = ValueCurves::new(&game, config.resolution())?;
    let bundle = CurveBundle::new(&curves, &gammas)?;
    Ok(Outcome {
        artifact: bundle.to_csv(),
        checks: Vec::new(),
    })
}

fn targeted_setup(
    config: &ExperimentConfig,
    game_cfg: &GameConfig,
) -> Result<(Game, FiniteBelief, TargetedStrategy, FiniteBelief)> {
    let game = build_game(game_cfg)?;
    let pi0 = finite_prior(config, game_cfg)?;
    let audience = game.audience();
    let target = match &config.target {
        Some(t) => t
            .finite()?
            .ok_or_else(|| Error::Config("`target` must be a finite belief".into()))?,
        None if pi0.len() == 2 => {
            FiniteBelief::binary(binary_interval(pi0.probs()[0], audience.gamma0)?.hi)?
        }
        None => {
            return Err(Error::Config(
                "games with more than two states require field `target`".into(),
            ))
        }
    };
    let strategy = build_attaining_strategy(&target, &pi0, audience.n, audience.n0)?;
    let offpath = match &config.offpath {
        Some(v) => FiniteBelief::new(v.clone())?,
        None => pi0.clone(),
    };
    Ok((game, pi0, strategy, offpath))
}

fn certified_check(eq: &EquilibriumCheck) -> CheckResult {
    CheckResult::new(
        "equilibrium_certified",
        eq.certified,
        format!(
            "receiver_br_ok={}, sender_deviation_gain={:e}",
            eq.receiver_br_ok, eq.sender_deviation_gain
        ),
    )
}

fn posterior_check(report: &SimReport) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for m in &report.messages {
        for ((a, e), se) in m.analytic.iter().zip(&m.empirical).zip(&m.standard_error) {
            let diff = (a - e).abs();
            let ok = if se.is_finite() && *se > 0.0 {
                diff <= POSTERIOR_SE_MULTIPLE * se
            } else {
                diff <= 1e-12
            };
            passed &= ok;
            if se.is_finite() && *se > 0.0 {
                worst = worst.max(diff / se);
            }
        }
    }
    CheckResult::new(
        "posterior_within_3se",
        passed,
        format!("largest deviation {worst:.3} standard errors"),
    )
}

fn all_trials_check(name: &str, report: &SimReport) -> CheckResult {
    let rate = report.win_rate.unwrap_or(0.0);
    CheckResult::new(name, rate == 1.0, format!("rate {rate}"))
}

/// Election payoffs are win indicators, so a unit mean means every trial won.
fn election_won_check(report: &SimReport) -> CheckResult {
    let mean = report.mean_sender_payoff;
    CheckResult::new(
        "won_every_trial",
        mean == 1.0,
        format!("share of trials won {mean}"),
    )
}

fn bound_check(name: &str, trials: u64, mean: f64, bound: f64) -> CheckResult {
    let passed = trials == 0 || mean >= bound - CS_BOUND_TOL;
    CheckResult::new(
        name,
        passed,
        format!("mean {mean} over {trials} trials, bound {bound} - {CS_BOUND_TOL}"),
    )
}

/// Partition strategy at the configured `n`, or at the smallest passing `n`.
fn cs_setup(params: &QuadraticCsParams) -> Result<(QuadraticCsParams, IncentiveReport)> {
    let probe = QuadraticCsParams {
        n: Some(params.n.unwrap_or(params.n0 + 1)),
        ..*params
    };
    let report = cs_check_incentive(&build_cs_strategy(&probe)?)?;
    if params.n.is_some() {
        return Ok((probe, report));
    }
    let n_bar = report
        .n_bar
        .ok_or(Error::IncentiveCheckFailed(params.n0 + 1))?;
    let params = QuadraticCsParams {
        n: Some(n_bar),
        ..*params
    };
    let report = cs_check_incentive(&build_cs_strategy(&params)?)?;
    Ok((params, report))
}

fn incentive_check(report: &IncentiveReport) -> CheckResult {
    CheckResult::new(
        "incentive_compatible",
        report.passed,
        format!(
            "n={}, means_in_blocks={}, argmin_matches={}",
            report.n, report.means_in_blocks, report.argmin_matches
        ),
    )
}

fn crowdfund_check(eq: &CrowdfundEquilibrium) -> CheckResult {
    CheckResult::new(
        "guaranteed_total_reaches_threshold",
        eq.check,
        format!(
            "guaranteed {} vs threshold {}",
            eq.guaranteed_total, eq.eta_threshold
        ),
    )
}

/// Builds the strategy for the configured game and runs the seeded
/// simulation.
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<Outcome> {
    let game_cfg = game_config(config)?;
    let (trials, seed) = (config.trials(), config.seed());
    let output = match game_cfg {
        GameConfig::Crowdfund { params } => {
            let eq = crowdfund_equilibrium(params)?;
            let sampling = config
                .theta_grid
                .map_or(ThetaSampling::Prior, ThetaSampling::Grid);
            let report = simulate_crowdfund(&eq, params, trials, seed, sampling)?;
            let checks = vec![
                crowdfund_check(&eq),
                all_trials_check("backed_in_every_trial", &report),
            ];
            RunOutput {
                report: Some(report),
                crowdfund: Some(eq),
                ..RunOutput::new(Command::Simulate, game_cfg, checks)
            }
        }
        GameConfig::QuadraticCs { params } => {
            let (params, incentive) = cs_setup(params)?;
            let report = simulate_cs(&build_cs_strategy(&params)?, &params, trials, seed)?;
            let c = report
                .conditional_payoffs
                .as_ref()
                .expect("partition simulation reports conditional payoffs");
            let checks = vec![
                incentive_check(&incentive),
                bound_check(
                    "interior_payoff_bound",
                    c.interior_trials,
                    c.interior_mean,
                    c.interior_bound,
                ),
                bound_check(
                    "overflow_payoff_bound",
                    c.overflow_trials,
                    c.overflow_mean,
                    c.overflow_bound,
                ),
            ];
            RunOutput {
                report: Some(report),
                incentive: Some(incentive),
                ..RunOutput::new(Command::Simulate, game_cfg, checks)
            }
        }
        _ => {
            let (game, pi0, strategy, offpath) = targeted_setup(config, game_cfg)?;
            let explicit_offpath = config.offpath.as_ref().map(|_| &offpath);
            let report =
                simulate_with_offpath(&strategy, &game, &pi0, trials, seed, explicit_offpath)?;
            let eq = verify_equilibrium(&strategy, &game, &pi0, &offpath)?;
            let mut checks = vec![certified_check(&eq), posterior_check(&report)];
            if matches!(game_cfg, GameConfig::Election { .. }) {
                checks.push(election_won_check(&report));
            }
            RunOutput {
                report: Some(report),
                strategy: Some(strategy),
                equilibrium: Some(eq),
                ..RunOutput::new(Command::Simulate, game_cfg, checks)
            }
        }
    };
    Ok(Outcome {
        artifact: to_json(&output),
        checks: output.checks.clone(),
    })
}

/// Builds the strategy for the configured game and checks equilibrium
/// conditions without simulating.
pub fn cmd_verify(config: &ExperimentConfig) -> Result<Outcome> {
    let game_cfg = game_config(config)?;
    let output = match game_cfg {
        GameConfig::Crowdfund { params } => {
            let eq = crowdfund_equilibrium(params)?;
            RunOutput {
                crowdfund: Some(eq.clone()),
                ..RunOutput::new(Command::Verify, game_cfg, vec![crowdfund_check(&eq)])
            }
        }
        GameConfig::QuadraticCs { params } => {
            let (_, incentive) = cs_setup(params)?;
            let checks = vec![incentive_check(&incentive)];
            RunOutput {
                incentive: Some(incentive),
                ..RunOutput::new(Command::Verify, game_cfg, checks)
            }
        }
        _ => {
            let (game, pi0, strategy, offpath) = targeted_setup(config, game_cfg)?;
            let eq = verify_equilibrium(&strategy, &game, &pi0, &offpath)?;
            let checks = vec![certified_check(&eq)];
            RunOutput {
                strategy: Some(strategy),
                equilibrium: Some(eq),
                ..RunOutput::new(Command::Verify, game_cfg, checks)
            }
        }
    };
    Ok(Outcome {
        artifact: to_json(&output),
        checks: output.checks.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PriorConfig;
    use crate::games::ElectionParams;

    fn cfg(json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(json).unwrap()
    }

    #[test]
    fn attainable_binary_trivial_interval() {
        let out = run(&cfg(
            r#"{"command": "attainable", "prior": 0.4, "gamma0": 1.0}"#,
        ))
        .unwrap();
        let doc: AttainableOutput = serde_json::from_str(&out.artifact).unwrap();
        let iv = doc.interval.unwrap();
        assert_eq!((iv.lo, iv.hi), (0.4, 0.4));
    }

    #[test]
    fn attainable_hexagon_and_csv() {
        let mut c = cfg(
            r#"{"command": "attainable", "prior": [0.5, 0.3333333333333333, 0.16666666666666666], "gamma0": 0.5}"#,
        );
        let doc: AttainableOutput = serde_json::from_str(&run(&c).unwrap().artifact).unwrap();
        assert_eq!(doc.polytope.unwrap().vertices.len(), 6);
        c.output = Some("v.csv".into());
        let csv = run(&c).unwrap().artifact;
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("p0,p1,p2"));
    }

    #[test]
    fn attainable_uniform() {
        let out = run(&cfg(
            r#"{"command": "attainable", "prior": "uniform", "gamma0": 0.25}"#,
        ))
        .unwrap();
        let doc: AttainableOutput = serde_json::from_str(&out.artifact).unwrap();
        let u = doc.uniform.unwrap();
        assert!((u.theta1 - 2.0 / 3.0).abs() < 1e-12 && (u.value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn values_round_trip() {
        let out = run(&cfg(
            r#"{"command": "values", "game": {"election": {}}, "gamma0": 0.5}"#,
        ))
        .unwrap();
        let doc: ValuesOutput = serde_json::from_str(&out.artifact).unwrap();
        assert_eq!(doc.report.v_star, 1.0);
        assert_eq!(to_json(&doc), out.artifact);
    }

    #[test]
    fn figure_rejects_other_games() {
        let err = run(&cfg(r#"{"command": "figure", "game": {"crowdfund": {}}}"#)).unwrap_err();
        assert_eq!(err, Error::UnsupportedGame("crowdfund".into()));
    }

    #[test]
    fn figure_bookie_has_breakpoint_rows() {
        let out = run(&cfg(
            r#"{"command": "figure", "game": {"bookie": {}}, "resolution": 11}"#,
        ))
        .unwrap();
        let has_row = |p: f64| {
            out.artifact
                .lines()
                .skip(1)
                .any(|l| (l.split(',').next().unwrap().parse::<f64>().unwrap() - p).abs() < 1e-15)
        };
        assert!(has_row(1.0 / 6.0) && has_row(2.0 / 3.0));
    }

    #[test]
    fn simulate_election_passes_checks() {
        let out = run(&cfg(
            r#"{"command": "simulate", "game": {"election": {}}, "trials": 3000, "seed": 5}"#,
        ))
        .unwrap();
        assert!(out.passed(), "{:?}", out.checks);
        let doc: RunOutput = serde_json::from_str(&out.artifact).unwrap();
        assert_eq!(doc.report.as_ref().unwrap().win_rate, Some(1.0));
        assert_eq!(to_json(&doc), out.artifact);
    }

    #[test]
    fn forced_unattainable_target_is_an_error() {
        let mut c = cfg(
            r#"{"command": "simulate", "game": {"election": {"params": {"p0": 0.3}}}, "target": [0.5, 0.5]}"#,
        );
        assert!(matches!(run(&c).unwrap_err(), Error::NotAttainable(_)));
        c.target = Some(PriorConfig::Binary(0.5));
        assert!(matches!(run(&c).unwrap_err(), Error::NotAttainable(_)));
    }

    #[test]
    fn losing_target_fails_win_check() {
        let c = ExperimentConfig {
            command: Some(Command::Simulate),
            game: Some(GameConfig::Election {
                params: ElectionParams::default(),
                n: 10,
            }),
            target: Some(PriorConfig::Binary(0.45)),
            trials: Some(200),
            ..Default::default()
        };
        let out = run(&c).unwrap();
        assert!(!out.passed());
        assert!(out
            .failures_json(Command::Simulate)
            .contains("won_every_trial"));
    }

    #[test]
    fn verify_variants() {
        assert!(
            run(&cfg(r#"{"command": "verify", "game": {"election": {}}}"#))
                .unwrap()
                .passed()
        );
        assert!(
            run(&cfg(r#"{"command": "verify", "game": {"crowdfund": {}}}"#))
                .unwrap()
                .passed()
        );
        let out = run(&cfg(
            r#"{"command": "verify", "game": {"quadratic_cs": {}}}"#,
        ))
        .unwrap();
        assert!(out.passed());
        let doc: RunOutput = serde_json::from_str(&out.artifact).unwrap();
        assert!(doc.incentive.unwrap().n_bar.is_some());
    }

    #[test]
    fn bookie_needs_prior() {
        let err = run(&cfg(r#"{"command": "verify", "game": {"bookie": {}}}"#)).unwrap_err();
        assert!(err.to_string().contains("prior"));
        assert!(run(&cfg(
            r#"{"command": "verify", "game": {"bookie": {}}, "prior": 0.3}"#
        ))
        .is_ok());
    }
}
