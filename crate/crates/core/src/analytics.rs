//! Closed-form shape estimators and the Monte-Carlo oracles that check them.
//!
//! Depth: a point stops at level `n` with expected probability
//! `prod_{i<n} a_i / prod_{j<=n} (1 + a_j)` where `a_k = alpha0 * lambda^k`.
//! Width: having passed a node, a point enters its `n`-th child (1-based)
//! with expected probability `gamma^(n-1) / (1 + gamma)^n`.
//! Specificity: a child's sigma is its parent's times a `Beta(p, q)` ratio.
//!
//! The variances describe the stick product along one root-to-level path
//! (for depth) or one sibling sequence (for width), i.e. the random mass
//! `nu_n * prod_{i<n} (1 - nu_i)` and `psi_n * prod_{j<n} (1 - psi_j)`.

use crate::error::{Error, Result};
use crate::kernel::{derive_child, KernelParams};
use crate::model::{GeneratorParams, Hierarchy, NodeDistribution};
use crate::sampling::RandomSource;
use crate::tssb::route;

fn alpha(alpha0: f64, lambda: f64, level: usize) -> f64 {
    alpha0 * lambda.powi(level as i32)
}

/// Expected fraction of points stopping at `level`.
pub fn expected_retention(alpha0: f64, lambda: f64, level: usize) -> f64 {
    let mut value = 1.0 / (1.0 + alpha0);
    for k in 1..=level {
        let prev = alpha(alpha0, lambda, k - 1);
        value *= prev / (1.0 + alpha(alpha0, lambda, k));
    }
    value
}

/// Variance of the stopping mass of one node at `level`.
pub fn retention_variance(alpha0: f64, lambda: f64, level: usize) -> f64 {
    if level == 0 {
        return alpha0 / ((1.0 + alpha0).powi(2) * (2.0 + alpha0));
    }
    let mut second = 2.0 / (1.0 + alpha(alpha0, lambda, level));
    for i in 0..level {
        second *= alpha(alpha0, lambda, i);
    }
    for j in 0..=level {
        second /= 2.0 + alpha(alpha0, lambda, j);
    }
    let mean = expected_retention(alpha0, lambda, level);
    second - mean * mean
}

/// Expected probability of entering child `index` (1-based) of a node the
/// point has already passed.
///
/// # Panics
/// If `index == 0`.
pub fn expected_child_selection(gamma: f64, index: usize) -> f64 {
    assert!(index >= 1, "child indices are 1-based");
    gamma.powi(index as i32 - 1) / (1.0 + gamma).powi(index as i32)
}

/// The alternative index-n width expression with `1 + alpha0 * lambda^j` in
/// the denominator, kept so the oracle can show it disagrees with sampling.
pub fn printed_child_selection(
    gamma: f64,
    alpha0: f64,
    lambda: f64,
    j: usize,
    index: usize,
) -> f64 {
    assert!(index >= 1, "child indices are 1-based");
    gamma.powi(index as i32 - 1) / (1.0 + alpha(alpha0, lambda, j)).powi(index as i32)
}

/// Probability mass beyond child `upto`: `(gamma / (1 + gamma))^upto`.
pub fn child_selection_tail(gamma: f64, upto: usize) -> f64 {
    (gamma / (1.0 + gamma)).powi(upto as i32)
}

/// Variance of the share of child `index` (1-based) in one sibling sequence.
pub fn child_selection_variance(gamma: f64, index: usize) -> f64 {
    assert!(index >= 1, "child indices are 1-based");
    if index == 1 {
        return gamma / ((1.0 + gamma).powi(2) * (2.0 + gamma));
    }
    let second =
        2.0 * gamma.powi(index as i32 - 1) / ((1.0 + gamma) * (2.0 + gamma).powi(index as i32));
    let mean = expected_child_selection(gamma, index);
    second - mean * mean
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaRatio {
    pub mean: f64,
    pub variance: f64,
}

/// Mean and variance of child sigma over parent sigma.
pub fn expected_sigma_ratio(p: f64, q: f64) -> SigmaRatio {
    let s = p + q;
    SigmaRatio {
        mean: p / s,
        variance: p * q / (s * s * (s + 1.0)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthRegime {
    /// alpha0 = 1 and lambda = 1: hard to predict.
    Chaotic,
    /// alpha0 <= 1, lambda <= 1: shallow, data at the top.
    ShallowTopHeavy,
    /// alpha0 <= 1, lambda > 1: deeper, most data still at the top.
    DeeperTopHeavy,
    /// alpha0 > 1, lambda < 1: deep, mass in the middle or lower levels.
    DeepMidMass,
    /// alpha0 > 1, lambda >= 1: deep, data at the top but spread out.
    DeepTopSpread,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthRegime {
    /// gamma = 1.
    Chaotic,
    /// gamma < 1: fewer children per node.
    Narrow,
    /// gamma > 1: more children per node.
    Wide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regime {
    pub depth: DepthRegime,
    pub width: WidthRegime,
}

impl std::fmt::Display for DepthRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DepthRegime::Chaotic => "chaotic",
            DepthRegime::ShallowTopHeavy => "shallow / top-heavy",
            DepthRegime::DeeperTopHeavy => "deeper / top-heavy",
            DepthRegime::DeepMidMass => "deep / mid-level mass",
            DepthRegime::DeepTopSpread => "deep / top-heavy, spread",
        })
    }
}

impl std::fmt::Display for WidthRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WidthRegime::Chaotic => "chaotic",
            WidthRegime::Narrow => "narrow",
            WidthRegime::Wide => "wide",
        })
    }
}

/// Qualitative shape from where (alpha0, lambda) and gamma sit relative to 1.
/// alpha0 = 1 with lambda != 1 is grouped with alpha0 < 1.
pub fn predict_regime(alpha0: f64, lambda: f64, gamma: f64) -> Regime {
    let depth = if alpha0 == 1.0 && lambda == 1.0 {
        DepthRegime::Chaotic
    } else if alpha0 <= 1.0 {
        if lambda <= 1.0 {
            DepthRegime::ShallowTopHeavy
        } else {
            DepthRegime::DeeperTopHeavy
        }
    } else if lambda < 1.0 {
        DepthRegime::DeepMidMass
    } else {
        DepthRegime::DeepTopSpread
    };
    let width = if gamma == 1.0 {
        WidthRegime::Chaotic
    } else if gamma < 1.0 {
        WidthRegime::Narrow
    } else {
        WidthRegime::Wide
    };
    Regime { depth, width }
}

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    /// Bernoulli frequency `hits / n`.
    pub fn frequency(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Estimate {
            mean: p,
            std_err: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }

    /// Distance to `expected` in standard errors.
    pub fn z(&self, expected: f64) -> f64 {
        if self.std_err == 0.0 {
            return if self.mean == expected {
                0.0
            } else {
                f64::INFINITY
            };
        }
        (self.mean - expected) / self.std_err
    }

    pub fn agrees(&self, expected: f64, sigmas: f64) -> bool {
        self.z(expected).abs() <= sigmas
    }
}

/// Per-level stopping frequencies over `samples` points, each routed through
/// its own freshly drawn tree so the draws are independent.
///
/// The router's depth guard is set just below the last reported level, so a
/// point that passes it ends the walk early and counts as deeper.
pub fn simulate_retention(
    alpha0: f64,
    lambda: f64,
    levels: usize,
    samples: usize,
    rng: &mut RandomSource,
) -> Result<Vec<Estimate>> {
    let params = GeneratorParams {
        n: 1,
        d: 1,
        alpha0,
        lambda,
        gamma: 1.0,
        max_depth: levels.saturating_sub(1).max(1),
        ..GeneratorParams::default()
    };
    params.validate()?;
    let mut hits = vec![0usize; levels];
    for _ in 0..samples {
        let mut h = Hierarchy::new(params.clone());
        let u = rng.uniform_open();
        match route(&mut h, rng, u) {
            Ok(outcome) => {
                let depth = outcome.destination.depth();
                if depth < levels {
                    hits[depth] += 1;
                }
            }
            Err(Error::DepthLimit { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(hits
        .into_iter()
        .map(|h| Estimate::frequency(h, samples))
        .collect())
}

/// Frequencies of the 1-based child index a passing point enters, for
/// indices `1..=indices`, each sample on fresh sticks.
///
/// Uses the router itself: the root's stop stick is pinned at the smallest
/// positive double so every point passes it, and `alpha0` is tiny so the
/// point stops in whichever child it selects.
pub fn simulate_child_selection(
    gamma: f64,
    indices: usize,
    samples: usize,
    rng: &mut RandomSource,
) -> Result<Vec<Estimate>> {
    let params = GeneratorParams {
        n: 1,
        d: 1,
        alpha0: 1e-12,
        lambda: 1.0,
        gamma,
        ..GeneratorParams::default()
    };
    params.validate()?;
    let mut hits = vec![0usize; indices];
    for _ in 0..samples {
        let mut h = Hierarchy::new(params.clone());
        h.get_mut(&[]).expect("root").nu = Some(f64::MIN_POSITIVE);
        let u = rng.uniform_open();
        let dest = route(&mut h, rng, u)?.destination;
        let first = dest.indices().first().copied().unwrap_or(u32::MAX) as usize;
        if first < indices {
            hits[first] += 1;
        }
    }
    Ok(hits
        .into_iter()
        .map(|h| Estimate::frequency(h, samples))
        .collect())
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Sample variance, over `replicates` independent chains, of the stopping
/// mass `nu_level * prod_{i<level} (1 - nu_i)`.
pub fn simulate_retention_variance(
    alpha0: f64,
    lambda: f64,
    level: usize,
    replicates: usize,
    rng: &mut RandomSource,
) -> Result<f64> {
    let mut masses = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let mut reach = 1.0;
        for i in 0..level {
            reach *= 1.0 - rng.beta_one(alpha(alpha0, lambda, i))?;
        }
        masses.push(reach * rng.beta_one(alpha(alpha0, lambda, level))?);
    }
    Ok(sample_variance(&masses))
}

/// Sample variance, over `replicates` sibling sequences, of the share of
/// child `index` (1-based): `psi_index * prod_{j<index} (1 - psi_j)`.
pub fn simulate_child_selection_variance(
    gamma: f64,
    index: usize,
    replicates: usize,
    rng: &mut RandomSource,
) -> Result<f64> {
    assert!(index >= 1, "child indices are 1-based");
    let mut shares = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let mut rest = 1.0;
        for _ in 1..index {
            rest *= 1.0 - rng.beta_one(gamma)?;
        }
        shares.push(rest * rng.beta_one(gamma)?);
    }
    Ok(sample_variance(&shares))
}

/// Empirical mean and variance of child/parent sigma with their standard
/// errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub mean: Estimate,
    pub variance: Estimate,
}

/// Draws `samples` children from a one-dimensional parent with the given
/// sigma through the kernel and summarises the sigma ratio.
pub fn simulate_sigma_ratio(
    kernel: &KernelParams,
    parent_sigma: f64,
    samples: usize,
    rng: &mut RandomSource,
) -> Result<RatioEstimate> {
    kernel.validate()?;
    let parent = NodeDistribution::isotropic(1, 0.0, parent_sigma);
    let ratios: Vec<f64> = (0..samples)
        .map(|_| derive_child(&parent, kernel, rng).sigmas[0] / parent_sigma)
        .collect();
    let n = samples as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let m2 = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let m4 = ratios.iter().map(|r| (r - mean).powi(4)).sum::<f64>() / n;
    Ok(RatioEstimate {
        mean: Estimate {
            mean,
            std_err: (m2 / n).sqrt(),
        },
        variance: Estimate {
            mean: m2,
            std_err: ((m4 - m2 * m2) / n).sqrt(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn retention_values() {
        assert_eq!(expected_retention(1.0, 0.3, 0), 0.5);
        assert!(close(expected_retention(5.0, 1.0, 1), 5.0 / 36.0));
        // 1 * 0.5 / (2 * 1.5 * 1.25)
        assert!(close(expected_retention(1.0, 0.5, 2), 0.5 / 3.75));
    }

    #[test]
    fn retention_variance_values() {
        assert!(close(retention_variance(1.0, 0.5, 0), 1.0 / 12.0));
        assert!(close(retention_variance(5.0, 0.5, 0), 5.0 / 252.0));
        // alpha0 = lambda = 1, level 1: E[X^2] = 2/(2*3) * 1/3 = 1/9, E[X] = 1/4
        assert!(close(
            retention_variance(1.0, 1.0, 1),
            1.0 / 9.0 - 1.0 / 16.0
        ));
    }

    #[test]
    fn child_selection_values() {
        assert_eq!(expected_child_selection(1.0, 1), 0.5);
        assert_eq!(expected_child_selection(1.0, 2), 0.25);
        assert!(close(expected_child_selection(0.2, 1), 1.0 / 1.2));
        assert!(close(child_selection_variance(1.0, 1), 1.0 / 12.0));
        assert!(close(child_selection_variance(0.2, 1), 0.2 / (1.44 * 2.2)));
        // gamma = 1, index 2: E[Y^2] = 2/(2*9) = 1/9, E[Y] = 1/4
        assert!(close(
            child_selection_variance(1.0, 2),
            1.0 / 9.0 - 1.0 / 16.0
        ));
    }

    #[test]
    fn sigma_ratio_values() {
        let r = expected_sigma_ratio(1.0, 5.0);
        assert!(close(r.mean, 1.0 / 6.0) && close(r.variance, 5.0 / 252.0));
        let r = expected_sigma_ratio(1.0, 1.0);
        assert!(close(r.mean, 0.5) && close(r.variance, 1.0 / 12.0));
        assert_eq!(expected_sigma_ratio(2.0, 2.0).mean, 0.5);
    }

    #[test]
    fn regimes() {
        use DepthRegime as D;
        use WidthRegime as W;
        let r = |a, l, g| {
            let x = predict_regime(a, l, g);
            (x.depth, x.width)
        };
        assert_eq!(r(1.0, 0.5, 0.2), (D::ShallowTopHeavy, W::Narrow));
        assert_eq!(r(25.0, 0.5, 1.0), (D::DeepMidMass, W::Chaotic));
        assert_eq!(r(1.0, 1.0, 1.0), (D::Chaotic, W::Chaotic));
        assert_eq!(r(0.5, 2.0, 3.0), (D::DeeperTopHeavy, W::Wide));
        assert_eq!(r(5.0, 1.0, 0.2), (D::DeepTopSpread, W::Narrow));
    }

    #[test]
    fn retention_partial_sums_bounded() {
        for &(a, l) in &[(1.0, 0.5), (1.0, 1.0), (5.0, 0.5), (25.0, 1.0), (0.3, 2.0)] {
            let mut sum = 0.0;
            for level in 0..=64 {
                let e = expected_retention(a, l, level);
                assert!((0.0..1.0).contains(&e));
                let next = sum + e;
                assert!(next >= sum);
                sum = next;
            }
            assert!(sum <= 1.0 + 1e-12, "({a},{l}) sums to {sum}");
        }
    }

    #[test]
    fn child_selection_sums_to_one() {
        for &g in &[0.2, 1.0, 5.0, 30.0] {
            let s: f64 = (1..=64).map(|n| expected_child_selection(g, n)).sum();
            assert!((s + child_selection_tail(g, 64) - 1.0).abs() < 1e-12);
        }
        for &g in &[0.2, 1.0] {
            let s: f64 = (1..=64).map(|n| expected_child_selection(g, n)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn estimate_z() {
        let e = Estimate::frequency(50, 100);
        assert_eq!(e.mean, 0.5);
        assert!((e.std_err - 0.05).abs() < 1e-15);
        assert!(e.agrees(0.6, 2.0));
        assert!(!e.agrees(0.7, 3.0));
    }

    #[test]
    fn small_retention_oracle() {
        let mut rng = RandomSource::new(21);
        let est = simulate_retention(1.0, 0.5, 3, 100_000, &mut rng).unwrap();
        for (level, e) in est.iter().enumerate() {
            let expected = expected_retention(1.0, 0.5, level);
            assert!(
                e.agrees(expected, 3.0),
                "level {level}: {e:?} vs {expected}"
            );
        }
    }

    #[test]
    fn small_width_oracle() {
        let mut rng = RandomSource::new(22);
        let est = simulate_child_selection(1.0, 3, 100_000, &mut rng).unwrap();
        for (k, e) in est.iter().enumerate() {
            let expected = expected_child_selection(1.0, k + 1);
            assert!(
                e.agrees(expected, 3.0),
                "index {}: {e:?} vs {expected}",
                k + 1
            );
        }
    }

    #[test]
    fn variance_oracles() {
        let mut rng = RandomSource::new(23);
        let v = simulate_retention_variance(1.0, 1.0, 1, 10_000, &mut rng).unwrap();
        let f = retention_variance(1.0, 1.0, 1);
        assert!((v - f).abs() / f < 0.05, "{v} vs {f}");
        let v = simulate_child_selection_variance(1.0, 2, 10_000, &mut rng).unwrap();
        let f = child_selection_variance(1.0, 2);
        assert!((v - f).abs() / f < 0.05, "{v} vs {f}");
    }
}
