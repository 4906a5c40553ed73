//! Coordinate selection.
//!
//! Uniform (UCD) and steepest (SCD, Gauss-Southwell) selection work on the
//! true gradient. The approximate rules work on a [`GradientEstimate`]: every
//! coordinate carries an estimate `g̃_i` and a radius `r_i` such that the true
//! gradient lies in `[g̃_i − r_i, g̃_i + r_i]`. From these intervals we derive
//! bounds on the selection score of each coordinate and keep only those
//! coordinates that cannot be provably worse than the average of the kept set.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{model_value, Regularizer};

/// Tracked gradient estimate `g̃` with error radii `r` (possibly `+∞`).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub g_tilde: Vec<f64>,
    pub radius: Vec<f64>,
}

impl GradientEstimate {
    /// `g̃ = 0`, `r = ∞`: nothing is known yet.
    pub fn unknown(n: usize) -> Self {
        Self {
            g_tilde: vec![0.0; n],
            radius: vec![f64::INFINITY; n],
        }
    }

    /// Exact initialization from a known gradient.
    pub fn exact(gradient: Vec<f64>) -> Self {
        let n = gradient.len();
        Self {
            g_tilde: gradient,
            radius: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.g_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g_tilde.is_empty()
    }

    /// Applies one step of size `gamma` on coordinate `active`.
    ///
    /// Passive coordinates move by `γ·g_j` and their radii grow by `|γ|·δ_j`;
    /// the active coordinate takes the estimate returned by the update rule.
    pub fn update(
        &mut self,
        active: usize,
        gamma: f64,
        estimates: &[f64],
        errors: &[f64],
        active_estimate: (f64, f64),
    ) -> Result<()> {
        if !gamma.is_finite() {
            return Err(Error::NonFinite("step size"));
        }
        if gamma != 0.0 {
            let step = gamma.abs();
            for (j, ((g, r), (&e, &d))) in self
                .g_tilde
                .iter_mut()
                .zip(self.radius.iter_mut())
                .zip(estimates.iter().zip(errors))
                .enumerate()
            {
                if j == active {
                    continue;
                }
                *g += gamma * e;
                *r += step * d;
            }
        }
        self.g_tilde[active] = active_estimate.0;
        self.radius[active] = active_estimate.1;
        Ok(())
    }
}

/// Range of `|y|` over the interval `[lo, hi]`, returned as `(min, max)`.
fn abs_range(lo: f64, hi: f64) -> (f64, f64) {
    let max = lo.abs().max(hi.abs());
    let min = if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else {
        lo.abs().min(hi.abs())
    };
    (min, max)
}

/// Lower and upper bounds on a non-negative per-coordinate score (by default
/// `|∇_i f|`).
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl Bounds {
    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }
}

/// `u_i = max(|g̃_i − r_i|, |g̃_i + r_i|)`, `ℓ_i = min |y|` over the interval.
pub fn compute_bounds(estimate: &GradientEstimate) -> Bounds {
    let (upper, lower) = estimate
        .g_tilde
        .iter()
        .zip(&estimate.radius)
        .map(|(&g, &r)| {
            if r.is_infinite() {
                (f64::INFINITY, 0.0)
            } else {
                let (lo, hi) = abs_range(g - r, g + r);
                (hi, lo)
            }
        })
        .unzip();
    Bounds { upper, lower }
}

/// Index set `I_t` together with the average `av(I)` that justified it.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
    pub average: f64,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    fn from_indices(indices: Vec<usize>, bounds: &Bounds) -> Self {
        let average =
            indices.iter().map(|&i| bounds.lower[i].powi(2)).sum::<f64>() / indices.len() as f64;
        Self { indices, average }
    }
}

/// Smallest prefix `I` of the coordinates sorted by `ℓ²` (descending) such
/// that every excluded `j` satisfies `u_j² < av(I) = mean_{i∈I} ℓ_i²`.
///
/// Any set passing that test contains the steepest coordinate. Runs in
/// `O(n log n)`.
pub fn active_set(bounds: &Bounds) -> ActiveSet {
    let n = bounds.len();
    assert!(n > 0, "active set of an empty problem");
    let lower_sq: Vec<f64> = bounds.lower.iter().map(|l| l * l).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lower_sq[b].total_cmp(&lower_sq[a]).then(a.cmp(&b)));

    let mut suffix_max = vec![f64::NEG_INFINITY; n + 1];
    for k in (0..n).rev() {
        let u = bounds.upper[order[k]];
        suffix_max[k] = suffix_max[k + 1].max(u * u);
    }

    let mut sum = 0.0;
    for k in 1..=n {
        sum += lower_sq[order[k - 1]];
        let average = sum / k as f64;
        if suffix_max[k] < average || k == n {
            let mut indices = order[..k].to_vec();
            indices.sort_unstable();
            return ActiveSet { indices, average };
        }
    }
    unreachable!()
}

/// `i ∈ [n]` uniformly at random.
pub fn select_ucd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> usize {
    rng.random_range(0..n)
}

/// Gauss-Southwell: `argmax_i |g_i|`, lowest index on ties.
pub fn select_scd(gradient: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, g) in gradient.iter().enumerate() {
        if g.abs() > best_val {
            best = i;
            best_val = g.abs();
        }
    }
    best
}

fn pick_tie<R: Rng + ?Sized>(ties: &[usize], rng: &mut R) -> usize {
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Uniform draw among `argmax_{i∈I} ℓ_i`.
pub fn select_ascd<R: Rng + ?Sized>(bounds: &Bounds, active: &ActiveSet, rng: &mut R) -> usize {
    let best = active
        .indices
        .iter()
        .map(|&i| bounds.lower[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = active
        .indices
        .iter()
        .copied()
        .filter(|&i| bounds.lower[i] == best)
        .collect();
    pick_tie(&ties, rng)
}

/// The `O(n)` heuristic active sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicVariant {
    /// `argmax_i u_i`
    UAscd,
    /// `argmax_i ℓ_i`
    LAscd,
    /// `{i | u_i ≥ max_j ℓ_j}`
    AAscd,
}

pub fn heuristic_active_set(variant: HeuristicVariant, bounds: &Bounds) -> ActiveSet {
    let argmax_of = |values: &[f64]| -> Vec<usize> {
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..values.len()).filter(|&i| values[i] == best).collect()
    };
    let indices = match variant {
        HeuristicVariant::UAscd => argmax_of(&bounds.upper),
        HeuristicVariant::LAscd => argmax_of(&bounds.lower),
        HeuristicVariant::AAscd => {
            let max_lower = bounds.lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..bounds.len())
                .filter(|&i| bounds.upper[i] >= max_lower)
                .collect()
        }
    };
    ActiveSet::from_indices(indices, bounds)
}

/// Bounds on `min_y V_i(x, y, ∇_i f(x))` for the GS-q rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GsqBounds {
    /// Lower bounds on the model minimum.
    pub v: Vec<f64>,
    /// Upper bounds on the model minimum.
    pub w: Vec<f64>,
    /// Model minimizer for the upper gradient bound.
    pub u_star: Vec<f64>,
    /// Model minimizer for the lower gradient bound.
    pub l_star: Vec<f64>,
}

/// Per-coordinate GS-q bounds from signed gradient bounds `ℓ = g̃ − r`,
/// `u = g̃ + r`.
///
/// `v_i = min(V(u*, u), V(ℓ*, ℓ))` holds because the model is linear in the
/// slope. `w_i` evaluates the model at the two endpoint minimizers under the
/// worst slope in the interval, and at `y = 0`.
pub fn gsq_bounds(estimate: &GradientEstimate, x: &[f64], l: f64, psi: &Regularizer) -> GsqBounds {
    let n = estimate.len();
    let mut out = GsqBounds {
        v: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        u_star: Vec::with_capacity(n),
        l_star: Vec::with_capacity(n),
    };
    for i in 0..n {
        let (g, r, xi) = (estimate.g_tilde[i], estimate.radius[i], x[i]);
        if r.is_infinite() {
            out.v.push(f64::NEG_INFINITY);
            out.w.push(psi.coordinate_value(xi));
            out.u_star.push(f64::NEG_INFINITY);
            out.l_star.push(f64::INFINITY);
            continue;
        }
        let (upper, lower) = (g + r, g - r);
        let u_star = psi.model_minimizer(xi, upper, l);
        let l_star = psi.model_minimizer(xi, lower, l);
        let v_u = model_value(xi, u_star, upper, l, psi);
        let v_l = model_value(xi, l_star, lower, l, psi);
        let omega_u = v_u + (u_star * (lower - upper)).max(0.0);
        let omega_l = v_l + (l_star * (upper - lower)).max(0.0);
        out.v.push(v_u.min(v_l));
        out.w.push(omega_u.min(omega_l).min(psi.coordinate_value(xi)));
        out.u_star.push(u_star);
        out.l_star.push(l_star);
    }
    out
}

/// Smallest prefix `I` of the coordinates sorted by `w` (ascending) such that
/// every excluded `j` has `v_j > av(I) = mean_{i∈I} w_i`.
pub fn gsq_active_set(gsq: &GsqBounds) -> ActiveSet {
    let n = gsq.w.len();
    assert!(n > 0, "active set of an empty problem");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| gsq.w[a].total_cmp(&gsq.w[b]).then(a.cmp(&b)));

    let mut suffix_min = vec![f64::INFINITY; n + 1];
    for k in (0..n).rev() {
        suffix_min[k] = suffix_min[k + 1].min(gsq.v[order[k]]);
    }
    let mut sum = 0.0;
    for k in 1..=n {
        sum += gsq.w[order[k - 1]];
        let average = sum / k as f64;
        if suffix_min[k] > average || k == n {
            let mut indices = order[..k].to_vec();
            indices.sort_unstable();
            return ActiveSet { indices, average };
        }
    }
    unreachable!()
}

/// Uniform draw among `argmin_{i∈I} w_i`.
pub fn select_gsq<R: Rng + ?Sized>(gsq: &GsqBounds, active: &ActiveSet, rng: &mut R) -> usize {
    let best = active
        .indices
        .iter()
        .map(|&i| gsq.w[i])
        .fold(f64::INFINITY, f64::min);
    let ties: Vec<usize> = active
        .indices
        .iter()
        .copied()
        .filter(|&i| gsq.w[i] == best)
        .collect();
    pick_tie(&ties, rng)
}

/// GS-s score: magnitude of the steepest directional derivative of
/// `f + λ|·|` along coordinate `i`.
pub fn gss_score(gradient: f64, xi: f64, psi: &Regularizer) -> f64 {
    match *psi {
        Regularizer::L1 { lambda } if xi != 0.0 => (gradient + lambda * xi.signum()).abs(),
        Regularizer::L1 { lambda } => (gradient.abs() - lambda).max(0.0),
        _ => gradient.abs(),
    }
}

/// Bounds on the GS-s score over gradient intervals `[g̃ − r, g̃ + r]`.
///
/// The score is convex in the gradient, so the maximum sits at an endpoint and
/// the minimum at the projection of the score's zero onto the interval.
pub fn gss_score_interval(
    estimate: &GradientEstimate,
    x: &[f64],
    psi: &Regularizer,
) -> Result<Bounds> {
    if let Regularizer::L2 { .. } = psi {
        return Err(Error::UnsupportedRegularizer("l2"));
    }
    let (upper, lower) = estimate
        .g_tilde
        .iter()
        .zip(&estimate.radius)
        .zip(x)
        .map(|((&g, &r), &xi)| {
            if r.is_infinite() {
                return (f64::INFINITY, 0.0);
            }
            let (lo, hi) = (g - r, g + r);
            let hi_score = gss_score(lo, xi, psi).max(gss_score(hi, xi, psi));
            let centre = match *psi {
                Regularizer::L1 { lambda } if xi != 0.0 => -lambda * xi.signum(),
                _ => 0.0,
            };
            let lo_score = gss_score(centre.clamp(lo, hi), xi, psi);
            (hi_score, lo_score)
        })
        .unzip();
    Ok(Bounds { upper, lower })
}

/// Bounds on `|y*_i|`, the length of the model step, for the GS-r rule.
///
/// The model minimizer is monotone in the slope, so `y*` lies between the
/// minimizers at the two gradient bounds.
pub fn gsr_bounds(estimate: &GradientEstimate, x: &[f64], l: f64, psi: &Regularizer) -> Bounds {
    let (upper, lower) = estimate
        .g_tilde
        .iter()
        .zip(&estimate.radius)
        .zip(x)
        .map(|((&g, &r), &xi)| {
            if r.is_infinite() {
                return (f64::INFINITY, 0.0);
            }
            let a = psi.model_minimizer(xi, g + r, l);
            let b = psi.model_minimizer(xi, g - r, l);
            let (lo, hi) = abs_range(a.min(b), a.max(b));
            (hi, lo)
        })
        .unzip();
    Bounds { upper, lower }
}

/// Coordinate selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Ucd,
    Scd,
    Ascd,
    UAscd,
    LAscd,
    AAscd,
    AscdGss,
    AscdGsq,
    AscdGsr,
}

impl Rule {
    pub const ALL: [Rule; 9] = [
        Rule::Ucd,
        Rule::Scd,
        Rule::Ascd,
        Rule::UAscd,
        Rule::LAscd,
        Rule::AAscd,
        Rule::AscdGss,
        Rule::AscdGsq,
        Rule::AscdGsr,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Rule::Ucd => "ucd",
            Rule::Scd => "scd",
            Rule::Ascd => "ascd",
            Rule::UAscd => "u-ascd",
            Rule::LAscd => "l-ascd",
            Rule::AAscd => "a-ascd",
            Rule::AscdGss => "ascd-gss",
            Rule::AscdGsq => "ascd-gsq",
            Rule::AscdGsr => "ascd-gsr",
        }
    }

    /// Whether the rule maintains a gradient estimate.
    pub fn tracks_estimate(&self) -> bool {
        !matches!(self, Rule::Ucd | Rule::Scd)
    }

    pub fn heuristic(&self) -> Option<HeuristicVariant> {
        match self {
            Rule::UAscd => Some(HeuristicVariant::UAscd),
            Rule::LAscd => Some(HeuristicVariant::LAscd),
            Rule::AAscd => Some(HeuristicVariant::AAscd),
            _ => None,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Rule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown rule `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::model_min;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bounds_from_sq(lower_sq: &[f64], upper_sq: &[f64]) -> Bounds {
        Bounds {
            lower: lower_sq.iter().map(|v| v.sqrt()).collect(),
            upper: upper_sq.iter().map(|v| v.sqrt()).collect(),
        }
    }

    fn valid(bounds: &Bounds, set: &[usize]) -> bool {
        let av = set.iter().map(|&i| bounds.lower[i].powi(2)).sum::<f64>() / set.len() as f64;
        (0..bounds.len())
            .filter(|j| !set.contains(j))
            .all(|j| bounds.upper[j].powi(2) < av)
    }

    /// Smallest valid subset size by exhaustive enumeration.
    fn brute_force_min(bounds: &Bounds) -> usize {
        let n = bounds.len();
        (1u32..(1 << n))
            .filter_map(|mask| {
                let set: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
                valid(bounds, &set).then_some(set.len())
            })
            .min()
            .unwrap_or(n)
    }

    #[test]
    fn bounds_examples() {
        let est = GradientEstimate {
            g_tilde: vec![2.0, -1.0, 0.0],
            radius: vec![0.5, 3.0, f64::INFINITY],
        };
        let b = compute_bounds(&est);
        assert_eq!(b.upper, vec![2.5, 4.0, f64::INFINITY]);
        assert_eq!(b.lower, vec![1.5, 0.0, 0.0]);
    }

    #[test]
    fn active_set_examples() {
        let b = compute_bounds(&GradientEstimate::unknown(5));
        assert_eq!(active_set(&b).indices, vec![0, 1, 2, 3, 4]);

        let b = bounds_from_sq(&[9.0, 4.0, 1.0], &[9.0, 4.0, 1.0]);
        let set = active_set(&b);
        assert_eq!(set.indices, vec![0]);
        assert_eq!(set.average, 9.0);
        assert_eq!(brute_force_min(&b), 1);

        let b = bounds_from_sq(&[9.0, 4.0, 1.0], &[9.0, 10.24, 1.0]);
        let set = active_set(&b);
        assert_eq!(set.indices, vec![0, 1]);
        assert!((set.average - 6.5).abs() < 1e-12);
        assert_eq!(brute_force_min(&b), 2);
    }

    #[test]
    fn zero_gradient_keeps_everything() {
        let b = compute_bounds(&GradientEstimate::exact(vec![0.0; 4]));
        assert_eq!(active_set(&b).len(), 4);
    }

    #[test]
    fn ucd_is_uniform_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_ucd(1, &mut rng), 0);
        let mut counts = [0usize; 10];
        for _ in 0..100_000 {
            counts[select_ucd(10, &mut rng)] += 1;
        }
        let sigma = (100_000.0 * 0.1 * 0.9f64).sqrt();
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 3.0 * sigma, "{counts:?}");
        }
        let a: Vec<usize> = {
            let mut r = ChaCha8Rng::seed_from_u64(7);
            (0..50).map(|_| select_ucd(13, &mut r)).collect()
        };
        let b: Vec<usize> = {
            let mut r = ChaCha8Rng::seed_from_u64(7);
            (0..50).map(|_| select_ucd(13, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn scd_examples() {
        assert_eq!(select_scd(&[0.0, 0.0, 3.0, 0.0]), 2);
        assert_eq!(select_scd(&[-5.0, 5.0]), 0);
    }

    #[test]
    fn ascd_with_exact_bounds_matches_scd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let g: Vec<f64> = (0..9).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b = compute_bounds(&GradientEstimate::exact(g.clone()));
            let set = active_set(&b);
            assert_eq!(select_ascd(&b, &set, &mut rng), select_scd(&g));
        }
    }

    #[test]
    fn ascd_uninitialized_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = compute_bounds(&GradientEstimate::unknown(4));
        let set = active_set(&b);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[select_ascd(&b, &set, &mut rng)] += 1;
        }
        let sigma = (40_000.0 * 0.25 * 0.75f64).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 - 10_000.0).abs() < 3.0 * sigma));
    }

    #[test]
    fn ascd_breaks_ties_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = Bounds {
            lower: vec![3.0, 3.0, 1.0],
            upper: vec![3.0, 3.0, 1.0],
        };
        let set = ActiveSet {
            indices: vec![0, 1, 2],
            average: 0.0,
        };
        let mut counts = [0usize; 3];
        for _ in 0..20_000 {
            counts[select_ascd(&b, &set, &mut rng)] += 1;
        }
        assert_eq!(counts[2], 0);
        let sigma = (20_000.0 * 0.25f64).sqrt();
        assert!((counts[0] as f64 - 10_000.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn heuristic_examples() {
        let b = Bounds {
            upper: vec![5.0, 4.0],
            lower: vec![1.0, 3.0],
        };
        assert_eq!(heuristic_active_set(HeuristicVariant::AAscd, &b).indices, vec![0, 1]);
        assert_eq!(heuristic_active_set(HeuristicVariant::UAscd, &b).indices, vec![0]);
        assert_eq!(heuristic_active_set(HeuristicVariant::LAscd, &b).indices, vec![1]);

        let g = vec![1.0, -7.0, 2.0];
        let b = compute_bounds(&GradientEstimate::exact(g.clone()));
        for v in [HeuristicVariant::UAscd, HeuristicVariant::LAscd, HeuristicVariant::AAscd] {
            assert!(heuristic_active_set(v, &b).contains(select_scd(&g)));
        }
    }

    #[test]
    fn update_examples() {
        let mut est = GradientEstimate {
            g_tilde: vec![0.0, 1.0],
            radius: vec![0.0, 2.0],
        };
        est.update(0, 0.5, &[0.0, 3.0], &[0.0, 4.0], (0.0, 0.0)).unwrap();
        assert_eq!(est.g_tilde[1], 2.5);
        assert_eq!(est.radius[1], 4.0);

        let before = est.clone();
        est.update(0, 0.0, &[0.0, 3.0], &[0.0, f64::INFINITY], (0.0, 0.0)).unwrap();
        assert_eq!(est, before);

        // a negative step must still grow the radius
        est.update(0, -1.0, &[0.0, 1.0], &[0.0, 1.0], (0.0, 0.0)).unwrap();
        assert_eq!(est.radius[1], 5.0);
    }

    #[test]
    fn gsq_hand_example() {
        let est = GradientEstimate {
            g_tilde: vec![1.5],
            radius: vec![0.5],
        };
        let q = gsq_bounds(&est, &[0.3], 1.0, &Regularizer::None);
        assert_eq!(q.u_star, vec![-2.0]);
        assert_eq!(q.l_star, vec![-1.0]);
        assert_eq!(q.v, vec![-2.0]);
        assert_eq!(q.w, vec![-0.5]);
    }

    #[test]
    fn gsq_exact_collapses() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for psi in [
            Regularizer::None,
            Regularizer::L1 { lambda: 0.7 },
            Regularizer::L2 { lambda: 0.7 },
        ] {
            let g: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = gsq_bounds(&GradientEstimate::exact(g.clone()), &x, 2.0, &psi);
            for i in 0..6 {
                let m = model_min(x[i], g[i], 2.0, &psi);
                assert!((q.v[i] - m).abs() < 1e-12);
                assert!((q.w[i] - m).abs() < 1e-12);
            }
            let set = gsq_active_set(&q);
            let exact_best = (0..6)
                .min_by(|&a, &b| q.w[a].total_cmp(&q.w[b]))
                .unwrap();
            assert!(set.contains(exact_best));
            assert_eq!(select_gsq(&q, &set, &mut rng), exact_best);
        }
    }

    #[test]
    fn gsq_active_set_example() {
        let q = GsqBounds {
            v: vec![-3.0, -1.0, 0.0],
            w: vec![-3.0, -1.0, 0.0],
            u_star: vec![0.0; 3],
            l_star: vec![0.0; 3],
        };
        let set = gsq_active_set(&q);
        assert_eq!(set.indices, vec![0]);
        assert_eq!(set.average, -3.0);
    }

    #[test]
    fn gsq_prefix_matches_brute_force_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let n = rng.random_range(1..=7);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..0.0)).collect();
            let w: Vec<f64> = v.iter().map(|&a| a + rng.random_range(0.0..2.0)).collect();
            let q = GsqBounds {
                v: v.clone(),
                w: w.clone(),
                u_star: vec![0.0; n],
                l_star: vec![0.0; n],
            };
            let set = gsq_active_set(&q);
            let ok = |s: &[usize]| {
                let av = s.iter().map(|&i| w[i]).sum::<f64>() / s.len() as f64;
                (0..n).filter(|j| !s.contains(j)).all(|j| v[j] > av)
            };
            assert!(ok(&set.indices));
            let best = (1u32..(1 << n))
                .filter_map(|mask| {
                    let s: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
                    ok(&s).then_some(s.len())
                })
                .min()
                .unwrap();
            assert!(set.len() >= best);
        }
    }

    #[test]
    fn gss_examples() {
        let l1 = Regularizer::L1 { lambda: 1.0 };
        assert_eq!(gss_score(3.0, 0.0, &l1), 2.0);
        assert_eq!(gss_score(-3.0, 1.0, &l1), 2.0);

        let est = GradientEstimate {
            g_tilde: vec![2.0, -1.0],
            radius: vec![0.5, 3.0],
        };
        let plain = gss_score_interval(&est, &[0.0, 0.0], &Regularizer::None).unwrap();
        assert_eq!(plain, compute_bounds(&est));
        let with_zero_lambda =
            gss_score_interval(&est, &[0.4, -2.0], &Regularizer::L1 { lambda: 0.0 }).unwrap();
        assert_eq!(with_zero_lambda, compute_bounds(&est));
        assert!(gss_score_interval(&est, &[0.0, 0.0], &Regularizer::L2 { lambda: 1.0 }).is_err());
    }

    #[test]
    fn gss_interval_contains_grid_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let g = rng.random_range(-4.0..4.0);
            let r = rng.random_range(0.0..3.0);
            let xi = [0.0, rng.random_range(-2.0..2.0)][rng.random_range(0..2)];
            let psi = Regularizer::L1 { lambda: rng.random_range(0.0..2.0) };
            let est = GradientEstimate {
                g_tilde: vec![g],
                radius: vec![r],
            };
            let b = gss_score_interval(&est, &[xi], &psi).unwrap();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for k in 0..=1000 {
                let s = gss_score(g - r + 2.0 * r * k as f64 / 1000.0, xi, &psi);
                lo = lo.min(s);
                hi = hi.max(s);
            }
            assert!(b.lower[0] <= lo + 1e-12 && lo <= b.lower[0] + 2.0 * r / 1000.0 + 1e-12);
            assert!((b.upper[0] - hi).abs() < 1e-12);
        }
    }

    #[test]
    fn gsr_examples() {
        let est = GradientEstimate::exact(vec![3.0, -2.0]);
        let b = gsr_bounds(&est, &[0.0, 0.0], 2.0, &Regularizer::None);
        assert_eq!(b.upper, vec![1.5, 1.0]);
        assert_eq!(b.lower, vec![1.5, 1.0]);

        // minimizers -2 and -1 → |y| ∈ [1, 2]
        let est = GradientEstimate {
            g_tilde: vec![1.5],
            radius: vec![0.5],
        };
        let b = gsr_bounds(&est, &[0.0], 1.0, &Regularizer::None);
        assert_eq!((b.lower[0], b.upper[0]), (1.0, 2.0));

        // minimizers -1 and 2 → straddles zero
        let est = GradientEstimate {
            g_tilde: vec![-0.5],
            radius: vec![1.5],
        };
        let b = gsr_bounds(&est, &[0.0], 1.0, &Regularizer::None);
        assert_eq!((b.lower[0], b.upper[0]), (0.0, 2.0));
    }

    #[test]
    fn rule_names_round_trip() {
        for r in Rule::ALL {
            assert_eq!(r.name().parse::<Rule>().unwrap(), r);
        }
        assert!("gs".parse::<Rule>().is_err());
    }

    proptest! {
        #[test]
        fn prefix_active_set_is_valid_and_contains_steepest(
            g in proptest::collection::vec(-10.0f64..10.0, 1..9),
            r in proptest::collection::vec(0.0f64..4.0, 9),
        ) {
            let est = GradientEstimate { g_tilde: g.clone(), radius: r[..g.len()].to_vec() };
            let b = compute_bounds(&est);
            let set = active_set(&b);
            prop_assert!(!set.is_empty());
            prop_assert!(valid(&b, &set.indices) || set.len() == g.len());
            let umax = (0..b.len()).max_by(|&a, &c| b.upper[a].total_cmp(&b.upper[c])).unwrap();
            prop_assert!(set.contains(umax));
            prop_assert!(set.len() >= brute_force_min(&b));
            // any gradient consistent with the intervals keeps its argmax inside
            let truth: Vec<f64> = g.iter().zip(&r).map(|(gi, ri)| gi + 0.5 * ri).collect();
            prop_assert!(set.contains(select_scd(&truth)));
        }
    }
}
