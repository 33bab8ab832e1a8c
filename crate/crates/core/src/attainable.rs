//! The set of `γ`-attainable posteriors: beliefs the sender can guarantee
//! are held by at least a fraction `γ` of the audience in every state.
//!
//! Membership is decided by the likelihood-ratio characterization:
//! `π ≪ π₀` and `dπ/dπ₀ ∈ [γc, c]` on the support of `π₀`. The polytope's
//! extreme points are indexed by a split of the prior's support into an
//! up-weighted block `E⁺` and a down-weighted remainder.

use serde::{Deserialize, Serialize};

use crate::belief::{likelihood_ratio_bounds, FiniteBelief, PiecewiseDensity};
use crate::error::{Error, Result};

/// Largest state space for which subsets are enumerated.
pub const MAX_ENUMERATED_STATES: usize = 20;

/// Relative slack on `ν_lo ≥ γ ν_hi` so that boundary points pass.
pub const MEMBERSHIP_RTOL: f64 = 1e-9;

/// L∞ tolerance used to merge coincident vertices.
pub const VERTEX_DEDUP_TOL: f64 = 1e-12;

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidFraction(gamma));
    }
    Ok(())
}

fn check_enumerable(len: usize) -> Result<()> {
    if len > MAX_ENUMERATED_STATES {
        return Err(Error::StateSpaceTooLarge(len));
    }
    Ok(())
}

/// Likelihood-ratio membership test for `Π(γ)` at prior `pi0`.
///
/// Returns `false` when `pi` charges a state the prior does not, or when the
/// two beliefs live on different state spaces.
pub fn is_attainable(pi: &FiniteBelief, pi0: &FiniteBelief, gamma: f64) -> bool {
    match likelihood_ratio_bounds(pi, pi0) {
        Ok((lo, hi)) => lo >= gamma * hi * (1.0 - MEMBERSHIP_RTOL),
        Err(_) => false,
    }
}

/// Brute-force membership test: `π₀(E) π(E') ≥ γ π₀(E') π(E)` for every
/// ordered pair of events. Exponential in the number of states; kept as an
/// independent oracle for [`is_attainable`].
pub fn is_attainable_eventpair(pi: &FiniteBelief, pi0: &FiniteBelief, gamma: f64) -> Result<bool> {
    if pi.len() != pi0.len() {
        return Err(Error::DimensionMismatch {
            expected: pi0.len(),
            got: pi.len(),
        });
    }
    check_enumerable(pi.len())?;
    let masses = |b: &FiniteBelief| {
        let p = b.probs();
        let mut m = vec![0.0; 1usize << p.len()];
        for mask in 1..m.len() {
            let low = mask.trailing_zeros() as usize;
            m[mask] = m[mask & (mask - 1)] + p[low];
        }
        m
    };
    let prior_mass = masses(pi0);
    let post_mass = masses(pi);
    for e in 0..prior_mass.len() {
        for e2 in 0..prior_mass.len() {
            let lhs = prior_mass[e] * post_mass[e2];
            let rhs = gamma * prior_mass[e2] * post_mass[e];
            if lhs < rhs * (1.0 - MEMBERSHIP_RTOL) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Closed interval of attainable `P(θ = 1)` for a binary state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryInterval {
    pub lo: f64,
    pub hi: f64,
}

impl BinaryInterval {
    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

/// `[p₀ / (p₀ + (1 − p₀)/γ), p₀ / (p₀ + (1 − p₀) γ)]`.
pub fn binary_interval(p0: f64, gamma: f64) -> Result<BinaryInterval> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::DegeneratePrior(p0));
    }
    check_gamma(gamma)?;
    Ok(BinaryInterval {
        lo: p0 / (p0 + (1.0 - p0) / gamma),
        hi: p0 / (p0 + (1.0 - p0) * gamma),
    })
}

/// Vertex set of `Π(γ)` for a finite prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttainablePolytope {
    pub prior: FiniteBelief,
    pub gamma: f64,
    /// Extreme points in subset-enumeration order. When the polytope
    /// collapses (γ = 1 or a degenerate prior) this is `[prior]`.
    pub vertices: Vec<FiniteBelief>,
}

impl AttainablePolytope {
    /// Vertices as a JSON array of belief vectors.
    pub fn vertices_json(&self) -> String {
        serde_json::to_string(&self.vertices).expect("beliefs serialize")
    }

    /// One vertex per row, columns `p_<label index>`.
    pub fn vertices_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> = (0..self.prior.len()).map(|i| format!("p{i}")).collect();
        wtr.write_record(&header).expect("in-memory write");
        for v in &self.vertices {
            wtr.write_record(v.probs().iter().map(|p| p.to_string()))
                .expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf8")
    }
}

/// Vertex induced by the up-weighted block `plus`.
fn vertex_for_block(pi0: &FiniteBelief, gamma: f64, plus: &[bool]) -> FiniteBelief {
    let weights: Vec<f64> = pi0
        .probs()
        .iter()
        .zip(plus)
        .map(|(p, up)| if *up { *p } else { gamma * p })
        .collect();
    FiniteBelief::from_weights(&weights).expect("block carries positive prior mass")
}

/// Enumerates the extreme points of `Π(γ)` over every nonempty proper
/// subset `E⁺` of the prior's support.
pub fn extreme_points(pi0: &FiniteBelief, gamma: f64) -> Result<AttainablePolytope> {
    check_gamma(gamma)?;
    check_enumerable(pi0.len())?;
    let support = pi0.support();
    let mut vertices: Vec<FiniteBelief> = Vec::new();
    let subsets = 1usize << support.len();
    for mask in 1..subsets.saturating_sub(1) {
        let mut plus = vec![false; pi0.len()];
        for (bit, &state) in support.iter().enumerate() {
            plus[state] = mask & (1 << bit) != 0;
        }
        let v = vertex_for_block(pi0, gamma, &plus);
        if vertices
            .iter()
            .all(|u| u.max_abs_diff(&v) > VERTEX_DEDUP_TOL)
        {
            vertices.push(v);
        }
    }
    if vertices.is_empty()
        || vertices
            .iter()
            .all(|v| v.max_abs_diff(pi0) <= VERTEX_DEDUP_TOL)
    {
        vertices = vec![pi0.clone()];
    }
    Ok(AttainablePolytope {
        prior: pi0.clone(),
        gamma,
        vertices,
    })
}

/// Maximizes `⟨weights, π⟩` over `Π(γ)`; ties go to the earliest vertex.
pub fn maximize_linear(
    pi0: &FiniteBelief,
    gamma: f64,
    weights: &[f64],
) -> Result<(f64, FiniteBelief)> {
    let poly = extreme_points(pi0, gamma)?;
    let mut best: Option<(f64, &FiniteBelief)> = None;
    for v in &poly.vertices {
        let value = v.dot(weights)?;
        match best {
            Some((b, _)) if value <= b + 1e-12 * b.abs().max(1.0) => {}
            _ => best = Some((value, v)),
        }
    }
    let (value, arg) = best.expect("polytope has at least one vertex");
    Ok((value, arg.clone()))
}

/// Attainable posterior maximizing the expected state under a uniform prior
/// on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformOptimum {
    pub theta1: f64,
    pub value: f64,
    pub density: PiecewiseDensity,
}

/// Objective `(γθ₁² + 1 − θ₁²) / (2(γθ₁ + 1 − θ₁))`: the mean of the
/// two-level posterior that down-weights `[0, θ₁)` by `γ`.
pub fn two_level_mean(gamma: f64, theta1: f64) -> f64 {
    (gamma * theta1 * theta1 + 1.0 - theta1 * theta1) / (2.0 * (gamma * theta1 + 1.0 - theta1))
}

/// Two-level density `γc` on `[0, θ₁)` and `c` on `[θ₁, 1]`.
pub fn two_level_density(gamma: f64, theta1: f64) -> Result<PiecewiseDensity> {
    let c0 = 1.0 / (gamma * theta1 + 1.0 - theta1);
    PiecewiseDensity::new(vec![0.0, theta1, 1.0], vec![gamma * c0, c0])
}

/// `θ₁ = 1/(1 + √γ)`, which is also the maximal expected state.
pub fn max_expected_state_uniform(gamma: f64) -> Result<UniformOptimum> {
    check_gamma(gamma)?;
    let theta1 = 1.0 / (1.0 + gamma.sqrt());
    Ok(UniformOptimum {
        theta1,
        value: theta1,
        density: two_level_density(gamma, theta1)?,
    })
}

/// Largest `γ` at which `pi_star` is attainable: `ν_lo / ν_hi`.
///
/// Requires `pi_star` and `pi0` to share their support.
pub fn first_best_threshold(pi0: &FiniteBelief, pi_star: &FiniteBelief) -> Result<f64> {
    let (lo, hi) = likelihood_ratio_bounds(pi_star, pi0)?;
    if let Some(i) = (0..pi0.len()).find(|&i| pi0.probs()[i] != 0.0 && pi_star.probs()[i] == 0.0) {
        return Err(Error::NotAbsolutelyContinuous(i));
    }
    Ok(lo / hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fb(p: &[f64]) -> FiniteBelief {
        FiniteBelief::new(p.to_vec()).unwrap()
    }

    fn example_prior() -> FiniteBelief {
        fb(&[0.5, 1.0 / 3.0, 1.0 / 6.0])
    }

    fn example_vertex() -> FiniteBelief {
        fb(&[1.0 / 3.0, 4.0 / 9.0, 2.0 / 9.0])
    }

    #[test]
    fn prior_always_attainable() {
        let p = example_prior();
        for g in [0.01, 0.3, 0.999, 1.0] {
            assert!(is_attainable(&p, &p, g));
            assert!(is_attainable_eventpair(&p, &p, g).unwrap());
        }
    }

    #[test]
    fn example_vertex_on_boundary() {
        assert!(is_attainable(&example_vertex(), &example_prior(), 0.5));
        assert!(!is_attainable(&example_vertex(), &example_prior(), 0.51));
        assert!(is_attainable_eventpair(&example_vertex(), &example_prior(), 0.5).unwrap());
        assert!(!is_attainable_eventpair(&example_vertex(), &example_prior(), 0.51).unwrap());
    }

    #[test]
    fn binary_lower_endpoint() {
        assert!(is_attainable(&fb(&[0.25, 0.75]), &fb(&[0.4, 0.6]), 0.5));
    }

    #[test]
    fn strictly_smaller_support_fails_eventpair() {
        let pi0 = fb(&[0.2, 0.3, 0.5]);
        let pi = fb(&[0.4, 0.6, 0.0]);
        assert!(!is_attainable_eventpair(&pi, &pi0, 0.01).unwrap());
        assert!(!is_attainable(&pi, &pi0, 0.01));
    }

    #[test]
    fn eventpair_size_cap() {
        let big = FiniteBelief::uniform(21).unwrap();
        assert_eq!(
            is_attainable_eventpair(&big, &big, 0.5),
            Err(Error::StateSpaceTooLarge(21))
        );
        assert_eq!(
            extreme_points(&big, 0.5).unwrap_err(),
            Error::StateSpaceTooLarge(21)
        );
    }

    #[test]
    fn binary_interval_examples() {
        assert_eq!(
            binary_interval(0.4, 1.0).unwrap(),
            BinaryInterval { lo: 0.4, hi: 0.4 }
        );
        let iv = binary_interval(0.4, 0.5).unwrap();
        assert_abs_diff_eq!(iv.lo, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(iv.hi, 4.0 / 7.0, epsilon = 1e-15);
        let pi0 = fb(&[0.4, 0.6]);
        for p in [iv.lo, iv.hi] {
            assert!(is_attainable(&FiniteBelief::binary(p).unwrap(), &pi0, 0.5));
        }
        assert!(!is_attainable(
            &FiniteBelief::binary(iv.lo - 1e-6).unwrap(),
            &pi0,
            0.5
        ));
        assert!(!is_attainable(
            &FiniteBelief::binary(iv.hi + 1e-6).unwrap(),
            &pi0,
            0.5
        ));
        assert_eq!(binary_interval(0.0, 0.5), Err(Error::DegeneratePrior(0.0)));
        assert_eq!(binary_interval(1.0, 0.5), Err(Error::DegeneratePrior(1.0)));
        assert_eq!(binary_interval(0.5, 0.0), Err(Error::InvalidFraction(0.0)));
    }

    #[test]
    fn hexagon_vertices() {
        let poly = extreme_points(&example_prior(), 0.5).unwrap();
        assert_eq!(poly.vertices.len(), 6);
        assert!(poly
            .vertices
            .iter()
            .all(|v| v.max_abs_diff(&example_prior()) > 1e-3));
        // E⁺ = {θ₂, θ₃}
        let v = vertex_for_block(&example_prior(), 0.5, &[false, true, true]);
        assert!(v.max_abs_diff(&example_vertex()) < 1e-12);
        assert!(poly
            .vertices
            .iter()
            .any(|u| u.max_abs_diff(&example_vertex()) < 1e-12));
        for v in &poly.vertices {
            assert!(is_attainable(v, &example_prior(), 0.5));
            assert!(!is_attainable(v, &example_prior(), 0.5 + 1e-6));
        }
    }

    #[test]
    fn collapse_at_gamma_one() {
        let poly = extreme_points(&example_prior(), 1.0).unwrap();
        assert_eq!(poly.vertices, vec![example_prior()]);
        let degenerate = fb(&[0.0, 1.0, 0.0]);
        assert_eq!(
            extreme_points(&degenerate, 0.3).unwrap().vertices,
            vec![degenerate]
        );
    }

    #[test]
    fn binary_vertices_are_interval_endpoints() {
        let poly = extreme_points(&fb(&[0.4, 0.6]), 0.5).unwrap();
        let mut ps: Vec<f64> = poly.vertices.iter().map(|v| v.probs()[0]).collect();
        ps.sort_by(f64::total_cmp);
        assert_eq!(ps.len(), 2);
        assert_abs_diff_eq!(ps[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(ps[1], 4.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_prior_dedups() {
        let poly = extreme_points(&FiniteBelief::uniform(4).unwrap(), 0.5).unwrap();
        assert_eq!(poly.vertices.len(), 14);
        let poly = extreme_points(&fb(&[0.5, 0.5]), 1.0).unwrap();
        assert_eq!(poly.vertices.len(), 1);
    }

    #[test]
    fn maximize_linear_examples() {
        let (value, arg) = maximize_linear(&example_prior(), 0.5, &[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(value, 17.0 / 9.0, epsilon = 1e-12);
        assert!(arg.max_abs_diff(&example_vertex()) < 1e-12);
        let poly = extreme_points(&example_prior(), 0.5).unwrap();
        let (value, arg) = maximize_linear(&example_prior(), 0.5, &[2.0, 2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(value, 2.0, epsilon = 1e-12);
        assert_eq!(arg, poly.vertices[0]);
        let (value, arg) = maximize_linear(&example_prior(), 1.0, &[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(
            value,
            example_prior().dot(&[1.0, 2.0, 3.0]).unwrap(),
            epsilon = 1e-15
        );
        assert_eq!(arg, example_prior());
    }

    #[test]
    fn uniform_optimum_examples() {
        let opt = max_expected_state_uniform(1.0).unwrap();
        assert_eq!((opt.theta1, opt.value), (0.5, 0.5));
        let opt = max_expected_state_uniform(0.25).unwrap();
        assert_abs_diff_eq!(opt.theta1, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(opt.density.expected_state(), 2.0 / 3.0, epsilon = 1e-14);
        // grid oracle over θ₁
        for gamma in [0.04, 0.25, 0.5, 1.0] {
            let (mut best_t, mut best_v) = (0.0, f64::NEG_INFINITY);
            for i in 0..=1_000_000 {
                let t = i as f64 / 1_000_000.0;
                let v = (gamma * t * t + 1.0 - t * t) / (2.0 * (gamma * t + 1.0 - t));
                if v > best_v {
                    best_t = t;
                    best_v = v;
                }
            }
            let opt = max_expected_state_uniform(gamma).unwrap();
            // objective is flat at γ = 1
            if gamma < 1.0 {
                assert!(
                    (opt.theta1 - best_t).abs() < 1e-5,
                    "gamma {gamma}: {} vs {best_t}",
                    opt.theta1
                );
            }
            assert!((opt.value - best_v).abs() < 1e-6);
            assert!((opt.density.expected_state() - opt.value).abs() < 1e-12);
        }
    }

    #[test]
    fn first_best_threshold_examples() {
        let p = fb(&[0.4, 0.6]);
        assert_eq!(first_best_threshold(&p, &p).unwrap(), 1.0);
        let star = fb(&[0.5, 0.5]);
        let g = first_best_threshold(&p, &star).unwrap();
        assert_abs_diff_eq!(g, 2.0 / 3.0, epsilon = 1e-15);
        assert!(is_attainable(&star, &p, g));
        assert!(!is_attainable(&star, &p, g + 1e-6));
        assert_eq!(
            first_best_threshold(&p, &fb(&[1.0, 0.0])),
            Err(Error::NotAbsolutelyContinuous(1))
        );
        assert_eq!(
            first_best_threshold(&fb(&[1.0, 0.0]), &p),
            Err(Error::NotAbsolutelyContinuous(1))
        );
    }

    fn belief(len: usize, zero_weight: u32) -> impl Strategy<Value = FiniteBelief> {
        prop::collection::vec(
            prop_oneof![zero_weight => Just(0.0), 6 => 0.01f64..1.0],
            len,
        )
        .prop_filter("nonzero", |w| w.iter().sum::<f64>() > 0.0)
        .prop_map(|w| FiniteBelief::from_weights(&w).unwrap())
    }

    proptest! {
        #[test]
        fn monotone_in_gamma(
            (pi0, g1, g2) in (2usize..6).prop_flat_map(|k| (belief(k, 1), 0.05f64..1.0, 0.05f64..1.0))
        ) {
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            for v in extreme_points(&pi0, hi).unwrap().vertices {
                prop_assert!(is_attainable(&v, &pi0, lo));
            }
        }

        #[test]
        fn convex_combinations_stay_attainable(
            (pi0, gamma, t, i, j, lam) in (2usize..6).prop_flat_map(|k| (belief(k, 0), 0.05f64..1.0, 0.0f64..1.0, 0usize..64, 0usize..64, 0.0f64..1.0))
        ) {
            let verts = extreme_points(&pi0, gamma).unwrap().vertices;
            let a = &verts[i % verts.len()];
            let b = &verts[j % verts.len()];
            let m = crate::belief::mix(&[a.clone(), b.clone()], &[lam, 1.0 - lam]).unwrap();
            prop_assert!(is_attainable(&m, &pi0, gamma));
            let m2 = crate::belief::mix(&[m, pi0.clone()], &[t, 1.0 - t]).unwrap();
            prop_assert!(is_attainable(&m2, &pi0, gamma));
        }

        #[test]
        fn vertex_optimality_of_linear_objectives(
            (pi0, gamma, w, pts) in (2usize..6).prop_flat_map(|k| (
                belief(k, 0), 0.05f64..1.0,
                prop::collection::vec(-5.0f64..5.0, k),
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, 64), 5),
            ))
        ) {
            let verts = extreme_points(&pi0, gamma).unwrap().vertices;
            let (best, _) = maximize_linear(&pi0, gamma, &w).unwrap();
            for coeffs in pts {
                let c: Vec<f64> = coeffs.iter().take(verts.len()).copied().collect();
                let total: f64 = c.iter().sum();
                if total <= 0.0 { continue; }
                let weights: Vec<f64> = c.iter().map(|x| x / total).collect();
                let p = crate::belief::mix(&verts, &weights).unwrap();
                prop_assert!(is_attainable(&p, &pi0, gamma));
                prop_assert!(best >= p.dot(&w).unwrap() - 1e-12);
            }
        }
    }
}
