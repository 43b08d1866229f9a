//! Two-dimensional skew system over the infinite-entropy tower: the tower
//! map horizontally, a contraction by `λ` vertically, and at each return a
//! jump into the column's slot `[λ + ... + λ^{R-1}, λ + ... + λ^R]`.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::counterexample::{build_counterexample_scheme, jacobian_side, CounterexampleParams, JacobianSide};
use crate::dynamics::Dynamics;
use crate::entropy::{finiteness_criterion, lyapunov_birkhoff, EstimatorReport, Verdict};
use crate::error::{Error, Result};
use crate::inducing::CellMap;
use crate::par::{map_indexed, stream_rng};
use crate::quad::KahanSum;
use crate::tower::{Tower, TowerState};

/// State `(x, ℓ, y)`: base point, level, stable coordinate.
pub type SkewState = (f64, u32, f64);

#[derive(Debug, Clone)]
pub struct SkewSystem {
    tower: Tower,
    lambda: f64,
    tower_mass: f64,
}

impl SkewSystem {
    pub fn new(params: &CounterexampleParams, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 0.5) {
            return Err(Error::InvalidParameter(format!("lambda must lie in (0, 1/2] (got {lambda})")));
        }
        let tower = Tower::with_map(build_counterexample_scheme(params)?, None);
        let tower_mass = tower.total_mass();
        Ok(SkewSystem { tower, lambda, tower_mass })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    /// `λ + λ² + ... + λ^{n-1}`.
    pub fn slot_start(&self, n: u32) -> f64 {
        let l = self.lambda;
        l * (1.0 - l.powi(n as i32 - 1)) / (1.0 - l)
    }

    /// Third-coordinate slot `[s_n, s_n + λ^n]` hit by returns from column `n`.
    pub fn slot(&self, n: u32) -> (f64, f64) {
        let s = self.slot_start(n);
        (s, s + self.lambda.powi(n as i32))
    }

    pub fn step(&self, (x, level, y): SkewState) -> Result<SkewState> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain { x: y, lo: 0.0, hi: 1.0 });
        }
        let (x2, l2) = self.tower.step((x, level))?;
        if l2 == 0 {
            let r = level + 1;
            Ok((x2, 0, self.slot_start(r) + self.lambda.powi(r as i32) * y))
        } else {
            Ok((x2, l2, self.lambda * y))
        }
    }

    /// Horizontal derivative: the unstable Jacobian.
    pub fn unstable_jacobian(&self, (x, level, _): SkewState) -> Result<f64> {
        self.tower.jacobian((x, level))
    }

    /// Vertical contraction factor of one step.
    pub fn stable_rate(&self, (x, level, _): SkewState) -> Result<f64> {
        let i = self.tower.scheme().cell_index(x)?;
        let r = self.tower.scheme().cells()[i].return_time;
        Ok(if level + 1 == r { self.lambda.powi(r as i32) } else { self.lambda })
    }

    /// Collapses the stable fibre.
    pub fn quotient_project(&self, (x, level, _): SkewState) -> TowerState {
        (x, level)
    }

    /// Largest return time whose slot width `λ^n` is still resolved next to
    /// `s_n ≈ 1` in double precision.
    pub fn resolvable_return_time(&self) -> u32 {
        let n = (-40.0 * 2f64.ln() / self.lambda.ln()).floor() as u32;
        n.clamp(3, self.tower.scheme().n_max())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> SkewState {
        let (x, l) = self.tower.sample_lebesgue(rng, self.tower_mass);
        (x, l, rng.random::<f64>())
    }

    /// Orbit dump `step, x, level, y`.
    pub fn write_orbit_csv<W: Write>(&self, start: SkewState, steps: usize, mut out: W) -> Result<()> {
        writeln!(out, "step,x,level,y")?;
        let mut s = start;
        for t in 0..=steps {
            writeln!(out, "{t},{:e},{},{:e}", s.0, s.1, s.2)?;
            if t < steps {
                s = self.step(s)?;
            }
        }
        Ok(())
    }
}

impl Dynamics for SkewSystem {
    type State = SkewState;

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> SkewState {
        self.sample(rng)
    }

    fn advance(&self, s: SkewState) -> Result<(SkewState, f64)> {
        let j = self.unstable_jacobian(s)?;
        Ok((self.step(s)?, j.ln()))
    }
}

// ---------------------------------------------------------------------------
// checks

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityWitness {
    pub column_a: u32,
    pub column_b: u32,
    pub image_a: SkewState,
    pub image_b: SkewState,
    pub gap: f64,
    pub minorant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityReport {
    pub lambda: f64,
    pub n_pairs: usize,
    pub max_column: u32,
    /// Smallest `gap / (λ^n y)` over cross-column pairs.
    pub min_gap_ratio: f64,
    pub violations: usize,
    pub witness: Option<InjectivityWitness>,
    pub slots_disjoint: bool,
    pub verdict: String,
}

/// Pairs of return-level points from distinct columns `n > k` sharing the
/// same horizontal image; the vertical gap of the images must be positive
/// and at least `λ^n y`. Every eighth pair instead takes two points of one
/// cell and checks horizontal separation.
pub fn injectivity_check(sys: &SkewSystem, n_pairs: usize, seed: u64) -> InjectivityReport {
    const CHUNK: usize = 8192;
    let scheme = sys.tower.scheme();
    let max_col = sys.resolvable_return_time();
    let (base_lo, base_hi) = scheme.base();
    let cell_of = |n: u32| scheme.cells().iter().position(|c| c.return_time == n).expect("column exists");
    let inverse = |i: usize, u: f64| match scheme.cells()[i].map {
        CellMap::Affine { slope, intercept } => (u - intercept) / slope,
        CellMap::Itinerary(_) => f64::NAN,
    };
    let parts: Vec<(f64, usize, Option<InjectivityWitness>)> = map_indexed(n_pairs.div_ceil(CHUNK), |c| {
        let mut rng = stream_rng(seed, c as u64);
        let mut min_ratio = f64::INFINITY;
        let mut violations = 0;
        let mut witness = None;
        for p in 0..CHUNK.min(n_pairs - c * CHUNK) {
            if p % 8 == 7 {
                let n = rng.random_range(2..=max_col);
                let cell = &scheme.cells()[cell_of(n)];
                let x1 = cell.lo + cell.len() * rng.random::<f64>();
                let x2 = cell.lo + cell.len() * rng.random::<f64>();
                let (y1, y2) = (rng.random::<f64>(), rng.random::<f64>());
                let (Ok(a), Ok(b)) = (sys.step((x1, n - 1, y1)), sys.step((x2, n - 1, y2))) else {
                    continue;
                };
                if x1 != x2 && a.0 == b.0 && a.2 == b.2 {
                    violations += 1;
                }
                continue;
            }
            let mut n = rng.random_range(2..=max_col);
            let mut k = rng.random_range(2..=max_col);
            while k == n {
                k = rng.random_range(2..=max_col);
            }
            if n < k {
                std::mem::swap(&mut n, &mut k);
            }
            let u = base_lo + (base_hi - base_lo) * rng.random::<f64>();
            let (cn, ck) = (cell_of(n), cell_of(k));
            let xn = inverse(cn, u);
            let xk = inverse(ck, u);
            let (y, z) = (rng.random::<f64>(), rng.random::<f64>());
            let (Ok(a), Ok(b)) = (sys.step((xn, n - 1, y)), sys.step((xk, k - 1, z))) else {
                continue;
            };
            let gap = a.2 - b.2;
            let minorant = sys.lambda.powi(n as i32) * y;
            if minorant > 0.0 {
                min_ratio = min_ratio.min(gap / minorant);
            }
            // rounding of s_n and λ^n y allows a few ulps of slack
            if gap <= 0.0 || gap < minorant - 4.0 * f64::EPSILON {
                violations += 1;
                if witness.is_none() {
                    witness = Some(InjectivityWitness { column_a: n, column_b: k, image_a: a, image_b: b, gap, minorant });
                }
            }
        }
        (min_ratio, violations, witness)
    });
    let mut min_ratio = f64::INFINITY;
    let mut violations = 0;
    let mut witness = None;
    for (r, v, w) in parts {
        min_ratio = min_ratio.min(r);
        violations += v;
        if witness.is_none() {
            witness = w;
        }
    }
    let slots_disjoint = slots_disjoint(sys, max_col);
    InjectivityReport {
        lambda: sys.lambda,
        n_pairs,
        max_column: max_col,
        min_gap_ratio: min_ratio,
        violations,
        witness,
        slots_disjoint,
        verdict: if violations == 0 && slots_disjoint { "pass" } else { "fail" }.into(),
    }
}

/// Return slots of columns `2..=max_col` are pairwise disjoint open
/// subintervals of `[0, 1]`.
pub fn slots_disjoint(sys: &SkewSystem, max_col: u32) -> bool {
    let slots: Vec<(f64, f64)> = (2..=max_col).map(|n| sys.slot(n)).collect();
    slots.iter().all(|&(a, b)| a >= 0.0 && b <= 1.0 + 1e-15 && a < b)
        && slots.windows(2).all(|w| w[0].1 <= w[1].0 + 1e-15)
}

/// Largest `|Θ(f(s)) - T(Θ(s))|` over `n` Lebesgue-random states; zero
/// means the quotient conjugacy holds bitwise.
pub fn quotient_conjugacy_residual(sys: &SkewSystem, n: usize, seed: u64) -> Result<f64> {
    let parts: Vec<Result<f64>> = map_indexed(n.div_ceil(4096), |c| {
        let mut rng = stream_rng(seed, c as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..4096.min(n - c * 4096) {
            let s = sys.sample(&mut rng);
            let lhs = sys.quotient_project(sys.step(s)?);
            let rhs = sys.tower.step(sys.quotient_project(s))?;
            let d = if lhs.1 == rhs.1 { (lhs.0 - rhs.0).abs() } else { f64::INFINITY };
            worst = worst.max(d);
        }
        Ok(worst)
    });
    parts.into_iter().try_fold(0.0f64, |acc, r| Ok(acc.max(r?)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewIntegralConfig {
    pub n_orbits: usize,
    pub n_iters: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for SkewIntegralConfig {
    fn default() -> Self {
        SkewIntegralConfig { n_orbits: 64, n_iters: 1_000_000, burn_in: 1_000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnstableIntegralReport {
    pub lambda: f64,
    pub n_max: u64,
    pub birkhoff: EstimatorReport,
    /// `(1/ρ) ∫ log J_F dν₀` of the truncated quotient.
    pub quotient_value: f64,
    pub agreement_sigmas: f64,
    /// Untruncated Jacobian integral with its bracket.
    pub jacobian_side: JacobianSide,
    pub entropy: EstimatorReport,
    /// `pass` when Birkhoff and quotient agree within 3σ, the Jacobian
    /// integral is finite and the entropy criterion diverges.
    pub verdict: String,
}

pub fn unstable_integral_report(
    sys: &SkewSystem,
    params: &CounterexampleParams,
    config: &SkewIntegralConfig,
) -> Result<UnstableIntegralReport> {
    let birkhoff = lyapunov_birkhoff(sys, config.n_orbits, config.n_iters, config.burn_in, config.seed)?;
    let scheme = sys.tower.scheme();
    let b = scheme.base_len();
    let (mut num, mut den) = (KahanSum::new(), KahanSum::new());
    for c in scheme.cells() {
        num.add(c.mass * (b / c.mass).ln());
        den.add(c.return_time as f64 * c.mass);
    }
    let quotient_value = num.value() / den.value();
    let sigmas = (birkhoff.value.unwrap_or(f64::NAN) - quotient_value).abs() / birkhoff.std_error.max(f64::MIN_POSITIVE);
    let side = jacobian_side(params);
    let entropy = finiteness_criterion(scheme);
    let ok = sigmas <= 3.0 && side.upper.is_finite() && entropy.verdict == Verdict::Divergent;
    Ok(UnstableIntegralReport {
        lambda: sys.lambda,
        n_max: params.n_max,
        birkhoff,
        quotient_value,
        agreement_sigmas: sigmas,
        jacobian_side: side,
        entropy,
        verdict: if ok { "pass" } else { "fail" }.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(lambda: f64) -> (CounterexampleParams, SkewSystem) {
        let p = CounterexampleParams::new(500).unwrap();
        let s = SkewSystem::new(&p, lambda).unwrap();
        (p, s)
    }

    #[test]
    fn step_cases() {
        let (_, sys) = system(0.5);
        let c2 = sys.tower().scheme().cells().iter().find(|c| c.return_time == 2).unwrap().clone();
        let x = 0.5 * (c2.lo + c2.hi);
        let y = 0.3;
        assert_eq!(sys.step((x, 0, y)).unwrap(), (x, 1, 0.5 * y));
        let fx = sys.tower().scheme().induced(x).unwrap().1;
        assert_eq!(sys.step((x, 1, y)).unwrap(), (fx, 0, 0.5 + 0.25 * y));
    }

    #[test]
    fn slots_for_half() {
        let (_, sys) = system(0.5);
        assert_eq!(sys.slot(2), (0.5, 0.75));
        assert_eq!(sys.slot(3), (0.75, 0.875));
        assert!(slots_disjoint(&sys, 40));
        let (_, quarter) = system(0.25);
        assert!(slots_disjoint(&quarter, 20));
    }

    #[test]
    fn gap_example() {
        // n = 3, k = 2, λ = 1/2, y = z = 1/2: gap = λ² + λ³ y - λ² z >= λ³ y
        let (_, sys) = system(0.5);
        let gap = (sys.slot_start(3) + 0.125 * 0.5) - (sys.slot_start(2) + 0.25 * 0.5);
        assert!(gap >= 1.0 / 16.0);
    }

    #[test]
    fn rejects_large_lambda() {
        let p = CounterexampleParams::new(10).unwrap();
        assert!(SkewSystem::new(&p, 0.6).is_err());
    }

    #[test]
    fn contraction_is_exact() {
        let (_, sys) = system(0.25);
        let c = sys.tower().scheme().cells().iter().find(|c| c.return_time == 4).unwrap().clone();
        let x = 0.5 * (c.lo + c.hi);
        let (mut a, mut b) = ((x, 0, 0.2), (x, 0, 0.6));
        for _ in 0..4 {
            let rate = sys.stable_rate(a).unwrap();
            let before = b.2 - a.2;
            a = sys.step(a).unwrap();
            b = sys.step(b).unwrap();
            assert!(((b.2 - a.2) - rate * before).abs() < 1e-15);
        }
    }

    #[test]
    fn injectivity_and_conjugacy() {
        let (_, sys) = system(0.5);
        let r = injectivity_check(&sys, 20_000, 4);
        assert_eq!(r.verdict, "pass", "{r:?}");
        assert!(r.min_gap_ratio >= 1.0 - 1e-6);
        assert_eq!(quotient_conjugacy_residual(&sys, 10_000, 5).unwrap(), 0.0);
    }
}
