//! Sender value curves for binary-state games and the equilibrium and
//! commitment values derived from them.
//!
//! `v0(p)` is the sender's best payoff when every receiver holds belief `p`.
//! The cheap-talk value is the attain operator applied to the quasiconcave
//! envelope of `v0`; the commitment value applies it to the concave envelope.

use serde::{Deserialize, Serialize};

use crate::attainable::binary_interval;
use crate::belief::FiniteBelief;
use crate::curve::{Knot, ValueCurve};
use crate::error::{Error, Result};
use crate::games::Game;

/// Grid size used when a caller does not choose one.
pub const DEFAULT_RESOLUTION: usize = 1001;

/// Margin by which the equilibrium value must beat `v0(p0)` to count as
/// effective transmission.
pub const TRANSMISSION_TOL: f64 = 1e-9;

/// One-sided limits closer than this to the knot value are snapped to it.
const LIMIT_SNAP_TOL: f64 = 1e-12;

/// Sender-favorable value `max_{a ∈ BR(belief)} U_S(a)`.
pub fn value_function(game: &Game, belief: &FiniteBelief) -> Result<f64> {
    game.br_set(belief)?
        .into_iter()
        .map(|a| game.sender_utility(a))
        .try_fold(f64::NEG_INFINITY, |m, u| Ok(m.max(u?)))
}

fn binary_value(game: &Game, p: f64) -> Result<f64> {
    value_function(game, &FiniteBelief::binary(p)?)
}

/// Samples `v0` on a uniform grid of `resolution` points with the game's
/// breakpoints inserted exactly. At a breakpoint the one-sided limits are
/// extrapolated from the adjacent open pieces.
pub fn sample_curve(game: &Game, resolution: usize) -> Result<ValueCurve> {
    if let Err(e @ Error::NonSeparableGame(_)) = game.sender_utility(0.0) {
        return Err(e);
    }
    let len = game.states().map(|s| s.len()).unwrap_or(0);
    if len != 2 {
        return Err(Error::NonBinaryStateSpace(len));
    }
    if resolution < 2 {
        return Err(Error::InvalidParams(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    let breakpoints = game.binary_breakpoints()?;
    let mut xs: Vec<f64> = (0..resolution)
        .map(|i| i as f64 / (resolution - 1) as f64)
        .filter(|x| breakpoints.iter().all(|b| (x - b).abs() > LIMIT_SNAP_TOL))
        .chain(breakpoints.iter().copied())
        .collect();
    xs.sort_by(f64::total_cmp);

    let mut knots = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        let value = binary_value(game, x)?;
        if !breakpoints.contains(&x) {
            knots.push(Knot::continuous(x, value));
            continue;
        }
        let snap = |v: f64| {
            if (v - value).abs() <= LIMIT_SNAP_TOL {
                value
            } else {
                v
            }
        };
        let (a, b) = (xs[i - 1], xs[i + 1]);
        let l1 = binary_value(game, a + (x - a) / 3.0)?;
        let l2 = binary_value(game, a + 2.0 * (x - a) / 3.0)?;
        let r1 = binary_value(game, x + (b - x) / 3.0)?;
        let r2 = binary_value(game, x + 2.0 * (b - x) / 3.0)?;
        knots.push(Knot {
            x,
            left: snap(2.0 * l2 - l1),
            value,
            right: snap(2.0 * r1 - r2),
        });
    }
    Ok(ValueCurve::new(knots, breakpoints))
}

pub fn qconv_envelope(curve: &ValueCurve) -> ValueCurve {
    curve.qconv()
}

pub fn conv_envelope(curve: &ValueCurve) -> ValueCurve {
    curve.conv()
}

/// Maximum of `curve` over the beliefs `gamma0`-attainable from `at`, with
/// the smallest maximizing belief parameter. At a degenerate prior only the
/// prior itself is attainable.
pub fn attain_operator(curve: &ValueCurve, gamma0: f64, at: f64) -> Result<(f64, f64)> {
    if !(gamma0 > 0.0 && gamma0 <= 1.0) {
        return Err(Error::InvalidFraction(gamma0));
    }
    if at <= 0.0 || at >= 1.0 {
        return Ok((curve.eval(at), at));
    }
    let iv = binary_interval(at, gamma0)?;
    Ok(curve.max_on(iv.lo, iv.hi))
}

/// Headline values at one prior and pivotal fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumValueReport {
    pub p0: f64,
    pub gamma0: f64,
    pub v0_at_prior: f64,
    pub qconv_at_prior: f64,
    pub v_star: f64,
    pub v_star_star: f64,
    pub benefit_excess_audience: f64,
    /// Equal to `benefit_excess_audience` by construction.
    pub benefit_private_communication: f64,
    pub witness_belief: FiniteBelief,
    pub effective_transmission: bool,
}

/// `v0` with both envelopes, computed once and queried at many priors.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueCurves {
    pub v0: ValueCurve,
    pub qconv: ValueCurve,
    pub conv: ValueCurve,
}

impl ValueCurves {
    pub fn new(game: &Game, resolution: usize) -> Result<Self> {
        let v0 = sample_curve(game, resolution)?;
        let qconv = v0.qconv();
        let conv = v0.conv();
        Ok(Self { v0, qconv, conv })
    }

    pub fn report(&self, p0: f64, gamma0: f64) -> Result<EquilibriumValueReport> {
        binary_interval(p0, gamma0)?;
        let v0_at_prior = self.v0.eval(p0);
        let qconv_at_prior = self.qconv.eval(p0);
        let (v_star, witness) = attain_operator(&self.qconv, gamma0, p0)?;
        let (v_star_star, _) = attain_operator(&self.conv, gamma0, p0)?;
        let benefit = v_star - qconv_at_prior;
        Ok(EquilibriumValueReport {
            p0,
            gamma0,
            v0_at_prior,
            qconv_at_prior,
            v_star,
            v_star_star,
            benefit_excess_audience: benefit,
            benefit_private_communication: benefit,
            witness_belief: FiniteBelief::binary(witness)?,
            effective_transmission: v_star > v0_at_prior + TRANSMISSION_TOL,
        })
    }
}

/// Equilibrium value report at the default resolution.
pub fn sender_optimal_value(game: &Game, p0: f64, gamma0: f64) -> Result<EquilibriumValueReport> {
    ValueCurves::new(game, DEFAULT_RESOLUTION)?.report(p0, gamma0)
}

/// Maximal payoff under commitment.
pub fn commitment_value(game: &Game, p0: f64, gamma0: f64) -> Result<f64> {
    Ok(sender_optimal_value(game, p0, gamma0)?.v_star_star)
}

/// Gain of the equilibrium value over the no-excess-audience benchmark.
pub fn benefit_excess_audience(game: &Game, p0: f64, gamma0: f64) -> Result<f64> {
    Ok(sender_optimal_value(game, p0, gamma0)?.benefit_excess_audience)
}

/// Whether some equilibrium beats the babbling payoff `v0(p0)`.
pub fn effective_transmission_possible(game: &Game, p0: f64, gamma0: f64) -> Result<bool> {
    Ok(sender_optimal_value(game, p0, gamma0)?.effective_transmission)
}

/// Rows behind the value-function figures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveBundle {
    pub gammas: Vec<f64>,
    pub rows: Vec<BundleRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleRow {
    pub p: f64,
    pub v0: f64,
    pub qconv: f64,
    pub conv: f64,
    pub attain_qconv: Vec<f64>,
    pub attain_conv: Vec<f64>,
}

impl CurveBundle {
    /// One row per abscissa; a jump contributes a left-limit row and a
    /// right-limit row. Abscissae are the knots of `v0` plus, for each `γ`,
    /// the priors whose attainable interval ends exactly at a breakpoint.
    /// Attain columns hold the operator's value at `p`.
    pub fn new(curves: &ValueCurves, gammas: &[f64]) -> Result<Self> {
        let mut xs: Vec<f64> = curves.v0.knots().iter().map(|k| k.x).collect();
        for &g in gammas {
            for &b in curves.v0.breakpoints() {
                // hi(p) = b and lo(p) = b respectively
                xs.push(b * g / (1.0 - b + b * g));
                xs.push(b / ((1.0 - b) * g + b));
            }
        }
        xs.retain(|x| (0.0..=1.0).contains(x));
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut rows = Vec::new();
        for x in xs {
            let (vl, vv, vr) = curves.v0.limits(x);
            let (ql, _, qr) = curves.qconv.limits(x);
            let (cl, _, cr) = curves.conv.limits(x);
            let mut attain_qconv = Vec::with_capacity(gammas.len());
            let mut attain_conv = Vec::with_capacity(gammas.len());
            for &g in gammas {
                attain_qconv.push(attain_operator(&curves.qconv, g, x)?.0);
                attain_conv.push(attain_operator(&curves.conv, g, x)?.0);
            }
            let jump = vl != vr || vv != vl || ql != qr || cl != cr;
            let sides: &[(f64, f64, f64)] = if jump {
                &[(vl, ql, cl), (vr, qr, cr)]
            } else {
                &[(vv, ql, cl)]
            };
            for &(v0, qconv, conv) in sides {
                rows.push(BundleRow {
                    p: x,
                    v0,
                    qconv,
                    conv,
                    attain_qconv: attain_qconv.clone(),
                    attain_conv: attain_conv.clone(),
                });
            }
        }
        Ok(Self {
            gammas: gammas.to_vec(),
            rows,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["p", "v0", "qconv", "conv"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.gammas.iter().map(|g| format!("attain_qconv[{g:.6}]")));
        header.extend(self.gammas.iter().map(|g| format!("attain_conv[{g:.6}]")));
        wtr.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.p.to_string(),
                r.v0.to_string(),
                r.qconv.to_string(),
                r.conv.to_string(),
            ];
            rec.extend(r.attain_qconv.iter().map(f64::to_string));
            rec.extend(r.attain_conv.iter().map(f64::to_string));
            wtr.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf8")
    }
}
