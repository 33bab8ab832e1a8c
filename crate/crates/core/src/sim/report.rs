use serde::{Deserialize, Deserializer, Serialize};

// JSON writes NaN as null; read it back as NaN.
fn nullable_f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn nullable_f64_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Ok(Vec::<Option<f64>>::deserialize(d)?
        .into_iter()
        .map(|x| x.unwrap_or(f64::NAN))
        .collect())
}

/// Monte Carlo summary shared by every simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub trials: u64,
    pub seed: u64,
    pub rng: String,
    pub n: usize,
    /// Size of the target audience that always receives the persuasive message.
    pub target_size: usize,
    /// Share of trials whose payoff reaches the all-persuaded payoff.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub win_rate: Option<f64>,
    pub mean_sender_payoff: f64,
    /// Largest discrepancy between an empirical and an analytic posterior
    /// statistic over on-path messages: total variation for finite states,
    /// absolute error of the mean on `[0, 1]`.
    pub empirical_posterior_error: f64,
    /// Fewest receivers holding the persuasive posterior in any trial.
    pub min_persuaded_count: usize,
    pub messages: Vec<MessageStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<StateStats>,
    /// `max_θ |Σ_m freq(m)·posterior_m(θ) − prior(θ)|` with empirical message
    /// frequencies and analytic posteriors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixture_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditional_payoffs: Option<ConditionalPayoffs>,
}

/// Empirical versus analytic posterior of one message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageStats {
    pub message: String,
    /// `"posterior"` (per-state probabilities) or `"posterior_mean"`.
    pub statistic: String,
    /// Receiver-trial pairs that received this message.
    pub recipients: u64,
    pub analytic: Vec<f64>,
    #[serde(deserialize_with = "nullable_f64_vec")]
    pub empirical: Vec<f64>,
    /// Cluster-robust standard errors, one per entry of `empirical`; NaN
    /// with fewer than two chunks.
    #[serde(deserialize_with = "nullable_f64_vec")]
    pub standard_error: Vec<f64>,
}

/// Per-state message frequency for a finite prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStats {
    pub state: usize,
    pub trials: u64,
    /// Probability that a receiver gets the persuasive message in this state.
    pub persuade_prob: f64,
    /// Empirical share of receivers that got it.
    #[serde(deserialize_with = "nullable_f64")]
    pub message_frequency: f64,
}

/// Mean payoff split by whether the sender's bliss point is inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPayoffs {
    pub interior_trials: u64,
    #[serde(deserialize_with = "nullable_f64")]
    pub interior_mean: f64,
    pub interior_bound: f64,
    pub overflow_trials: u64,
    #[serde(deserialize_with = "nullable_f64")]
    pub overflow_mean: f64,
    /// Bound depending on the partition size.
    pub overflow_bound: f64,
    /// Partition-free limit of `overflow_bound`.
    pub overflow_limit: f64,
}
