//! Exact piecewise-linear value curves on `[0, 1]` with one-sided limits.
//!
//! A curve is a list of knots with strictly increasing abscissae. Between
//! consecutive knots `a` and `b` the curve is the segment from `a.right` to
//! `b.left`; at a knot it takes `value`, which is at least both one-sided
//! limits, so every curve is upper semicontinuous. Envelope operators map
//! such curves to such curves without resampling, which keeps them exact
//! for piecewise-linear inputs.

use serde::{Deserialize, Serialize};

/// Absolute slack on interval endpoints in [`ValueCurve::max_on`].
pub const INTERVAL_SLACK: f64 = 1e-12;

/// A curve vertex with its one-sided limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub x: f64,
    pub left: f64,
    pub value: f64,
    pub right: f64,
}

impl Knot {
    pub fn continuous(x: f64, value: f64) -> Self {
        Self {
            x,
            left: value,
            value,
            right: value,
        }
    }

    fn is_jump(&self) -> bool {
        self.left != self.value || self.right != self.value
    }
}

/// Upper semicontinuous piecewise-linear curve over a belief parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCurve {
    knots: Vec<Knot>,
    /// Abscissae where the underlying best response changes.
    breakpoints: Vec<f64>,
}

impl ValueCurve {
    /// Builds a curve, raising each knot value to the max of its limits.
    ///
    /// Panics if the abscissae are not strictly increasing or a value is not
    /// finite; callers construct knots from validated grids.
    pub fn new(mut knots: Vec<Knot>, breakpoints: Vec<f64>) -> Self {
        assert!(!knots.is_empty(), "curve needs at least one knot");
        assert!(
            knots.windows(2).all(|w| w[0].x < w[1].x),
            "knot abscissae must increase"
        );
        for k in &mut knots {
            assert!(
                k.left.is_finite() && k.value.is_finite() && k.right.is_finite(),
                "non-finite knot"
            );
            k.value = k.value.max(k.left).max(k.right);
        }
        Self { knots, breakpoints }
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn x_min(&self) -> f64 {
        self.knots[0].x
    }

    pub fn x_max(&self) -> f64 {
        self.knots[self.knots.len() - 1].x
    }

    /// Index of the first knot with abscissa `>= x`.
    fn locate(&self, x: f64) -> usize {
        self.knots.partition_point(|k| k.x < x)
    }

    /// `(left limit, value, right limit)` at `x`, clamped to the domain.
    pub fn limits(&self, x: f64) -> (f64, f64, f64) {
        let i = self.locate(x);
        if i < self.knots.len() && self.knots[i].x == x {
            let k = &self.knots[i];
            return (k.left, k.value, k.right);
        }
        if i == 0 {
            let v = self.knots[0].value;
            return (v, v, v);
        }
        if i == self.knots.len() {
            let v = self.knots[i - 1].value;
            return (v, v, v);
        }
        let (a, b) = (&self.knots[i - 1], &self.knots[i]);
        let t = (x - a.x) / (b.x - a.x);
        let v = a.right + t * (b.left - a.right);
        (v, v, v)
    }

    /// Curve value at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.limits(x).1
    }

    /// Largest knot value.
    pub fn max_value(&self) -> f64 {
        self.knots
            .iter()
            .map(|k| k.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Export as duplicated-breakpoint arrays: a jump knot contributes its
    /// left limit and right limit as two consecutive points.
    pub fn grid_values(&self) -> (Vec<f64>, Vec<f64>) {
        let mut grid = Vec::with_capacity(self.knots.len());
        let mut values = Vec::with_capacity(self.knots.len());
        for k in &self.knots {
            if k.is_jump() {
                grid.extend([k.x, k.x]);
                values.extend([k.left, k.right]);
            } else {
                grid.push(k.x);
                values.push(k.value);
            }
        }
        (grid, values)
    }

    fn mirrored(&self) -> Self {
        let knots = self
            .knots
            .iter()
            .rev()
            .map(|k| Knot {
                x: -k.x,
                left: k.right,
                value: k.value,
                right: k.left,
            })
            .collect();
        let breakpoints = self.breakpoints.iter().rev().map(|b| -b).collect();
        Self { knots, breakpoints }
    }

    /// `x ↦ sup_{y ≤ x} f(y)`.
    pub fn running_max_left(&self) -> Self {
        let mut out: Vec<Knot> = Vec::with_capacity(self.knots.len() + 4);
        let mut level = f64::NEG_INFINITY;
        for (i, k) in self.knots.iter().enumerate() {
            let left = if i == 0 {
                k.value
            } else {
                let a = &self.knots[i - 1];
                let (from, to) = (a.right, k.left);
                if to > level && from < level {
                    let x = a.x + (level - from) / (to - from) * (k.x - a.x);
                    if x > a.x && x < k.x {
                        out.push(Knot::continuous(x, level));
                    }
                }
                level.max(to)
            };
            level = level.max(left).max(k.value);
            out.push(Knot {
                x: k.x,
                left,
                value: level,
                right: level,
            });
        }
        Self {
            knots: out,
            breakpoints: self.breakpoints.clone(),
        }
    }

    /// `x ↦ sup_{y ≥ x} f(y)`.
    pub fn running_max_right(&self) -> Self {
        self.mirrored().running_max_left().mirrored()
    }

    /// Pointwise minimum, with knots inserted where the two curves cross.
    pub fn pointwise_min(&self, other: &Self) -> Self {
        let mut xs: Vec<f64> = self.knots.iter().chain(&other.knots).map(|k| k.x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut out: Vec<Knot> = Vec::with_capacity(xs.len() + 4);
        for (i, &x) in xs.iter().enumerate() {
            if i > 0 {
                let xa = xs[i - 1];
                let (_, _, fa) = self.limits(xa);
                let (_, _, ga) = other.limits(xa);
                let (fb, _, _) = self.limits(x);
                let (gb, _, _) = other.limits(x);
                let (da, db) = (fa - ga, fb - gb);
                if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                    let t = da / (da - db);
                    let xc = xa + t * (x - xa);
                    if xc > xa && xc < x {
                        let v = fa + t * (fb - fa);
                        out.push(Knot::continuous(xc, v));
                    }
                }
            }
            let (fl, fv, fr) = self.limits(x);
            let (gl, gv, gr) = other.limits(x);
            out.push(Knot {
                x,
                left: fl.min(gl),
                value: fv.min(gv),
                right: fr.min(gr),
            });
        }
        let mut breakpoints: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(&other.breakpoints)
            .copied()
            .collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Self {
            knots: out,
            breakpoints,
        }
    }

    /// Smallest upper semicontinuous quasiconcave majorant.
    pub fn qconv(&self) -> Self {
        self.running_max_left()
            .pointwise_min(&self.running_max_right())
    }

    /// Smallest concave majorant: upper hull of the knot values.
    pub fn conv(&self) -> Self {
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(self.knots.len());
        for k in &self.knots {
            let p = (k.x, k.value);
            while hull.len() >= 2 {
                let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
                if cross >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        let knots = hull
            .into_iter()
            .map(|(x, v)| Knot::continuous(x, v))
            .collect();
        Self {
            knots,
            breakpoints: self.breakpoints.clone(),
        }
    }

    /// Maximum over the closed interval `[lo, hi]` and its smallest maximizer.
    /// Knots within [`INTERVAL_SLACK`] outside the interval count as inside,
    /// so rounding in the endpoints never hides a breakpoint.
    pub fn max_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut best = (self.eval(lo), lo);
        let mut consider = |x: f64, v: f64| {
            if v > best.0 + 1e-12 {
                best = (v, x);
            }
        };
        for k in &self.knots[self.locate(lo - INTERVAL_SLACK)..] {
            if k.x >= hi + INTERVAL_SLACK {
                break;
            }
            if k.x > lo - INTERVAL_SLACK {
                consider(k.x, k.value);
            }
        }
        if hi > lo {
            consider(hi, self.eval(hi));
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step(eta: f64) -> ValueCurve {
        ValueCurve::new(
            vec![
                Knot::continuous(0.0, 0.0),
                Knot {
                    x: eta,
                    left: 0.0,
                    value: 1.0,
                    right: 1.0,
                },
                Knot::continuous(1.0, 1.0),
            ],
            vec![eta],
        )
    }

    fn from_points(points: &[(f64, f64)]) -> ValueCurve {
        ValueCurve::new(
            points
                .iter()
                .map(|&(x, v)| Knot::continuous(x, v))
                .collect(),
            vec![],
        )
    }

    #[test]
    fn eval_interpolates_between_one_sided_limits() {
        let c = step(0.5);
        assert_eq!(c.eval(0.25), 0.0);
        assert_eq!(c.eval(0.5), 1.0);
        assert_eq!(c.limits(0.5), (0.0, 1.0, 1.0));
        assert_eq!(c.eval(0.75), 1.0);
        let tent = from_points(&[(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)]);
        assert_eq!(tent.eval(0.25), 0.5);
    }

    #[test]
    fn monotone_curve_is_quasiconcave() {
        let c = step(0.5);
        let q = c.qconv();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert_eq!(q.eval(x), c.eval(x));
        }
    }

    #[test]
    fn v_shape_floods_to_constant() {
        let v = from_points(&[(0.0, 2.0), (0.5, 0.0), (1.0, 2.0)]);
        let q = v.qconv();
        for i in 0..=100 {
            assert_eq!(q.eval(i as f64 / 100.0), 2.0);
        }
        // unequal walls flood to the lower one
        let v = from_points(&[(0.0, 1.0), (0.5, 0.0), (1.0, 2.0)]);
        let q = v.qconv();
        assert_eq!(q.eval(0.5), 1.0);
        assert_eq!(q.eval(0.75), 1.0);
        assert!((q.eval(0.875) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn running_max_inserts_crossing() {
        let v = from_points(&[(0.0, 0.5), (0.5, 0.0), (1.0, 1.0)]);
        let m = v.running_max_left();
        assert!(m.knots().iter().any(|k| (k.x - 0.75).abs() < 1e-15));
        assert_eq!(m.eval(0.6), 0.5);
        assert!((m.eval(0.9) - 0.8).abs() < 1e-15);
        let r = v.running_max_right();
        assert_eq!(r.eval(0.2), 1.0);
    }

    #[test]
    fn conv_examples() {
        let tent = from_points(&[(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)]);
        assert_eq!(tent.conv(), tent);
        let c = step(0.5).conv();
        assert_eq!(c.eval(0.25), 0.5);
        assert_eq!(c.eval(0.5), 1.0);
        assert_eq!(c.eval(0.8), 1.0);
        assert_eq!(c.knots().len(), 3);
        let concave = from_points(
            &(0..=10)
                .map(|i| {
                    let x = i as f64 / 10.0;
                    (x, x * (1.0 - x))
                })
                .collect::<Vec<_>>(),
        );
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert!((concave.conv().eval(x) - concave.eval(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn max_on_ties_to_smallest() {
        let c = step(0.5);
        assert_eq!(c.max_on(0.25, 4.0 / 7.0), (1.0, 0.5));
        assert_eq!(c.max_on(0.6, 0.9), (1.0, 0.6));
        assert_eq!(c.max_on(0.1, 0.3), (0.0, 0.1));
        assert_eq!(c.max_on(0.4, 0.4), (0.0, 0.4));
    }

    #[test]
    fn grid_export_duplicates_jumps() {
        let (grid, values) = step(0.5).grid_values();
        assert_eq!(grid, vec![0.0, 0.5, 0.5, 1.0]);
        assert_eq!(values, vec![0.0, 0.0, 1.0, 1.0]);
    }

    fn random_curve() -> impl Strategy<Value = ValueCurve> {
        prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, 0u8..3), 2..12).prop_map(|pts| {
            let n = pts.len();
            let knots = pts
                .iter()
                .enumerate()
                .map(|(i, &(a, b, kind))| {
                    let x = i as f64 / (n - 1) as f64;
                    match kind {
                        0 => Knot::continuous(x, a),
                        1 => Knot {
                            x,
                            left: a,
                            value: a.max(b),
                            right: b,
                        },
                        _ => Knot {
                            x,
                            left: a,
                            value: a.max(b) + 0.5,
                            right: a,
                        },
                    }
                })
                .collect();
            ValueCurve::new(knots, vec![])
        })
    }

    fn probe(c: &ValueCurve) -> Vec<f64> {
        let mut xs: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        xs.extend(c.knots().iter().map(|k| k.x));
        xs
    }

    proptest! {
        #[test]
        fn envelope_chain(c in random_curve()) {
            let q = c.qconv();
            let v = c.conv();
            for x in probe(&c) {
                prop_assert!(c.eval(x) <= q.eval(x) + 1e-12);
                prop_assert!(q.eval(x) <= v.eval(x) + 1e-12);
            }
        }

        #[test]
        fn envelopes_idempotent(c in random_curve()) {
            let q = c.qconv();
            let qq = q.qconv();
            let v = c.conv();
            let vv = v.conv();
            for x in probe(&c) {
                prop_assert!((q.eval(x) - qq.eval(x)).abs() < 1e-12);
                prop_assert!((v.eval(x) - vv.eval(x)).abs() < 1e-12);
            }
        }

        #[test]
        fn qconv_is_quasiconcave(c in random_curve(), a in 0.0f64..1.0, b in 0.0f64..1.0, t in 0.0f64..1.0) {
            let q = c.qconv();
            let m = a + t * (b - a);
            prop_assert!(q.eval(m) >= q.eval(a).min(q.eval(b)) - 1e-12);
        }

        #[test]
        fn max_on_dominates_samples(c in random_curve(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (best, arg) = c.max_on(lo, hi);
            prop_assert!(arg >= lo - INTERVAL_SLACK && arg <= hi + INTERVAL_SLACK);
            prop_assert!((c.eval(arg) - best).abs() < 1e-12);
            for i in 0..=100 {
                let x = lo + (hi - lo) * i as f64 / 100.0;
                prop_assert!(c.eval(x) <= best + 1e-12);
            }
        }
    }
}
