//! Piecewise monotone C¹ maps with a singular set, and the concrete map zoo.
//!
//! A [`PiecewiseMap1D`] is an ordered list of [`Branch`]es whose open
//! domains tile the phase space; the branch endpoints form the singular
//! set. Branches are either affine or backed by a [`SmoothBranch`]
//! implementation that knows its value, derivative and inverse.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::roots::newton_bracketed;

/// Default clearance from the singular set.
pub const DEFAULT_CLEARANCE: f64 = 1e-12;

/// Default tolerance of implicit solves.
pub const DEFAULT_IMPLICIT_TOL: f64 = 1e-14;

/// A smooth, strictly monotone branch given in closed or implicit form.
pub trait SmoothBranch: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;
    /// Signed derivative.
    fn deriv(&self, x: f64) -> f64;
    fn inverse(&self, y: f64) -> Result<f64>;
}

#[derive(Debug, Clone)]
pub enum BranchFn {
    Affine { slope: f64, intercept: f64 },
    Smooth(Arc<dyn SmoothBranch>),
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    pub func: BranchFn,
}

impl Branch {
    pub fn affine(lo: f64, hi: f64, slope: f64, intercept: f64) -> Self {
        Branch { lo, hi, func: BranchFn::Affine { slope, intercept } }
    }

    /// Affine branch mapping `(lo, hi)` onto `(img_lo, img_hi)`; the image
    /// may be given in decreasing order for orientation-reversing branches.
    pub fn affine_onto(lo: f64, hi: f64, img_lo: f64, img_hi: f64) -> Self {
        let slope = (img_hi - img_lo) / (hi - lo);
        Branch::affine(lo, hi, slope, img_lo - slope * lo)
    }

    pub fn smooth(lo: f64, hi: f64, f: Arc<dyn SmoothBranch>) -> Self {
        Branch { lo, hi, func: BranchFn::Smooth(f) }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match &self.func {
            BranchFn::Affine { slope, intercept } => slope * x + intercept,
            BranchFn::Smooth(f) => f.value(x),
        }
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        match &self.func {
            BranchFn::Affine { slope, .. } => *slope,
            BranchFn::Smooth(f) => f.deriv(x),
        }
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        match &self.func {
            BranchFn::Affine { slope, intercept } => Ok((y - intercept) / slope),
            BranchFn::Smooth(f) => f.inverse(y),
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.func, BranchFn::Affine { .. })
    }

    /// +1 for increasing branches, -1 for decreasing ones.
    pub fn orientation(&self) -> f64 {
        let v0 = self.value(self.lo);
        let v1 = self.value(self.hi);
        if v1 >= v0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Image interval `(min, max)` from the endpoint limits.
    pub fn image(&self) -> (f64, f64) {
        let (a, b) = (self.value(self.lo), self.value(self.hi));
        (a.min(b), a.max(b))
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseSpace {
    Interval { lo: f64, hi: f64 },
    /// `[lo, hi]` with the endpoints identified.
    Circle { lo: f64, hi: f64 },
}

impl PhaseSpace {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            PhaseSpace::Interval { lo, hi } | PhaseSpace::Circle { lo, hi } => (lo, hi),
        }
    }

    pub fn length(&self) -> f64 {
        let (lo, hi) = self.bounds();
        hi - lo
    }
}

#[derive(Debug, Clone)]
pub struct PiecewiseMap1D {
    pub name: String,
    branches: Vec<Branch>,
    phase: PhaseSpace,
    singular_set: Vec<f64>,
    clearance: f64,
}

impl PiecewiseMap1D {
    /// Validates that the branch domains are ordered, disjoint and tile the
    /// phase space, and derives the singular set from their endpoints.
    pub fn new(name: impl Into<String>, branches: Vec<Branch>, phase: PhaseSpace) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidParameter("a map needs at least one branch".into()));
        }
        let (lo, hi) = phase.bounds();
        let tol = 1e-12 * (hi - lo).abs().max(1.0);
        if (branches[0].lo - lo).abs() > tol || (branches[branches.len() - 1].hi - hi).abs() > tol {
            return Err(Error::InvalidParameter("branch domains do not reach the phase-space endpoints".into()));
        }
        for (i, b) in branches.iter().enumerate() {
            if b.hi <= b.lo {
                return Err(Error::InvalidParameter(format!("branch {i} has an empty domain")));
            }
            if i + 1 < branches.len() && (branches[i + 1].lo - b.hi).abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "branches {i} and {} leave a gap or overlap",
                    i + 1
                )));
            }
        }
        let mut singular_set: Vec<f64> = Vec::with_capacity(branches.len() + 1);
        if let PhaseSpace::Interval { .. } = phase {
            singular_set.push(lo);
        }
        for b in branches.iter().skip(1) {
            singular_set.push(b.lo);
        }
        if let PhaseSpace::Interval { .. } = phase {
            singular_set.push(hi);
        }
        Ok(PiecewiseMap1D { name: name.into(), branches, phase, singular_set, clearance: DEFAULT_CLEARANCE })
    }

    pub fn with_clearance(mut self, clearance: f64) -> Self {
        self.clearance = clearance;
        self
    }

    /// Generic piecewise-linear constructor: each piece is
    /// `(lo, hi, image_at_lo, image_at_hi)`.
    pub fn piecewise_linear(name: impl Into<String>, phase: PhaseSpace, pieces: &[(f64, f64, f64, f64)]) -> Result<Self> {
        let branches = pieces.iter().map(|&(a, b, ya, yb)| Branch::affine_onto(a, b, ya, yb)).collect();
        PiecewiseMap1D::new(name, branches, phase)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn phase_space(&self) -> PhaseSpace {
        self.phase
    }

    pub fn singular_set(&self) -> &[f64] {
        &self.singular_set
    }

    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    /// Reduces circle coordinates to the fundamental domain; the upper
    /// endpoint is kept (it is the same point as the lower one).
    fn normalize(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.phase.bounds();
        match self.phase {
            PhaseSpace::Interval { .. } => {
                if x < lo || x > hi || !x.is_finite() {
                    Err(Error::OutOfDomain { x, lo, hi })
                } else {
                    Ok(x)
                }
            }
            PhaseSpace::Circle { .. } => {
                if !x.is_finite() {
                    return Err(Error::OutOfDomain { x, lo, hi });
                }
                if x >= lo && x <= hi {
                    return Ok(x);
                }
                let len = hi - lo;
                Ok(lo + (x - lo).rem_euclid(len))
            }
        }
    }

    /// Index of the branch containing `x`, honoring the singular clearance.
    pub fn locate(&self, x: f64) -> Result<usize> {
        let x = self.normalize(x)?;
        let s = &self.singular_set;
        let k = s.partition_point(|&p| p < x);
        let near = |i: usize| s.get(i).is_some_and(|&p| (p - x).abs() <= self.clearance);
        if near(k) || (k > 0 && near(k - 1)) {
            return Err(Error::SingularPoint { x, clearance: self.clearance });
        }
        let idx = self.branches.partition_point(|b| b.hi <= x);
        if idx < self.branches.len() {
            Ok(idx)
        } else {
            // upper endpoint of a circle's fundamental domain
            Ok(self.branches.len() - 1)
        }
    }

    /// Value and `|f'(x)|`.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let x = self.normalize(x)?;
        let b = &self.branches[self.locate(x)?];
        Ok((b.value(x), b.deriv(x).abs()))
    }

    pub fn apply(&self, x: f64) -> Result<f64> {
        self.eval(x).map(|(v, _)| v)
    }
}

// ---------------------------------------------------------------------------
// zoo

/// `x -> 2x mod 1` on `[0, 1]`.
pub fn doubling_map() -> PiecewiseMap1D {
    PiecewiseMap1D::new(
        "doubling",
        vec![Branch::affine(0.0, 0.5, 2.0, 0.0), Branch::affine(0.5, 1.0, 2.0, -1.0)],
        PhaseSpace::Interval { lo: 0.0, hi: 1.0 },
    )
    .expect("doubling map is well formed")
}

/// The neutral branch `g0(x) = x + 2^α x^(α+1)` of the intermittent map.
#[derive(Debug, Clone, Copy)]
pub struct LsvLeftBranch {
    pub alpha: f64,
    scale: f64,
}

impl LsvLeftBranch {
    pub fn new(alpha: f64) -> Self {
        LsvLeftBranch { alpha, scale: 2f64.powf(alpha) }
    }
}

impl SmoothBranch for LsvLeftBranch {
    #[inline]
    fn value(&self, x: f64) -> f64 {
        x + self.scale * x.powf(self.alpha + 1.0)
    }

    #[inline]
    fn deriv(&self, x: f64) -> f64 {
        1.0 + self.scale * (self.alpha + 1.0) * x.powf(self.alpha)
    }

    fn inverse(&self, y: f64) -> Result<f64> {
        if y <= 0.0 {
            return Ok(0.0);
        }
        // g0(x) >= x, so the preimage lies in [0, min(y, 1/2)]
        newton_bracketed(|x| self.value(x) - y, |x| self.deriv(x), 0.0, y.min(0.5), 1e-16)
    }
}

fn lsv_unchecked(alpha: f64) -> PiecewiseMap1D {
    PiecewiseMap1D::new(
        format!("lsv(alpha={alpha})"),
        vec![
            Branch::smooth(0.0, 0.5, Arc::new(LsvLeftBranch::new(alpha))),
            Branch::affine(0.5, 1.0, 2.0, -1.0),
        ],
        PhaseSpace::Interval { lo: 0.0, hi: 1.0 },
    )
    .expect("intermittent map is well formed")
}

/// Intermittent map with a neutral fixed point at 0; requires `0 < α < 1`.
pub fn lsv_map(alpha: f64) -> Result<PiecewiseMap1D> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "intermittent map needs 0 < alpha < 1 (got {alpha}); for alpha >= 1 the physical measure is the Dirac mass at 0"
        )));
    }
    Ok(lsv_unchecked(alpha))
}

/// One half of the Lorenz-like representative, `sign * (2^(1-α)|x|^(1-α) - 1/2)`.
#[derive(Debug, Clone, Copy)]
pub struct LorenzBranch {
    pub alpha: f64,
    pub sign: f64,
    scale: f64,
}

impl LorenzBranch {
    fn new(alpha: f64, sign: f64) -> Self {
        LorenzBranch { alpha, sign, scale: 2f64.powf(1.0 - alpha) }
    }
}

impl SmoothBranch for LorenzBranch {
    fn value(&self, x: f64) -> f64 {
        self.sign * (self.scale * x.abs().powf(1.0 - self.alpha) - 0.5)
    }

    fn deriv(&self, x: f64) -> f64 {
        self.scale * (1.0 - self.alpha) * x.abs().powf(-self.alpha)
    }

    fn inverse(&self, y: f64) -> Result<f64> {
        let u = (self.sign * y + 0.5) / self.scale;
        Ok(self.sign * u.max(0.0).powf(1.0 / (1.0 - self.alpha)))
    }
}

/// Full-branch Lorenz-like map on `[-1/2, 1/2]` with `f'(x) ~ |x|^(-α)`;
/// requires `0 < α < 1/2` so that `inf f' = 2(1 - α) > 1`.
pub fn lorenz_like_map(alpha: f64) -> Result<PiecewiseMap1D> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidParameter(format!("Lorenz-like map needs 0 < alpha < 1/2 (got {alpha})")));
    }
    PiecewiseMap1D::new(
        format!("lorenz(alpha={alpha})"),
        vec![
            Branch::smooth(-0.5, 0.0, Arc::new(LorenzBranch::new(alpha, -1.0))),
            Branch::smooth(0.0, 0.5, Arc::new(LorenzBranch::new(alpha, 1.0))),
        ],
        PhaseSpace::Interval { lo: -0.5, hi: 0.5 },
    )
}

/// Right half of the singular intermittent circle map; the left half is
/// obtained by odd symmetry (`sign = -1`).
///
/// For `0 <= x <= 2^-γ` the relation `x = 2^-γ (1 + f)^γ` is solved in
/// closed form; for `2^-γ < x <= 1` the relation `x = f + 2^-γ (1 - f)^γ`
/// is solved by safeguarded Newton iteration on `f ∈ [0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct SingularIntermittentBranch {
    pub gamma: f64,
    pub sign: f64,
    pub tol: f64,
    knee: f64,
}

impl SingularIntermittentBranch {
    fn new(gamma: f64, sign: f64, tol: f64) -> Self {
        SingularIntermittentBranch { gamma, sign, tol, knee: 2f64.powf(-gamma) }
    }

    /// Right-half relation `x = G(f)`.
    pub fn relation(&self, f: f64) -> f64 {
        if f <= 0.0 {
            self.knee * (1.0 + f).powf(self.gamma)
        } else {
            f + self.knee * (1.0 - f).powf(self.gamma)
        }
    }

    fn relation_deriv(&self, f: f64) -> f64 {
        if f <= 0.0 {
            self.gamma * self.knee * (1.0 + f).powf(self.gamma - 1.0)
        } else {
            1.0 - self.gamma * self.knee * (1.0 - f).powf(self.gamma - 1.0)
        }
    }

    fn solve_right(&self, x: f64) -> Result<f64> {
        if x <= self.knee {
            Ok(2.0 * x.powf(1.0 / self.gamma) - 1.0)
        } else if x >= 1.0 {
            Ok(1.0)
        } else {
            newton_bracketed(|f| self.relation(f) - x, |f| self.relation_deriv(f), 0.0, 1.0, self.tol)
        }
    }
}

impl SmoothBranch for SingularIntermittentBranch {
    fn value(&self, x: f64) -> f64 {
        let r = self.solve_right(self.sign * x).unwrap_or(f64::NAN);
        self.sign * r
    }

    fn deriv(&self, x: f64) -> f64 {
        let u = self.sign * x;
        if u <= self.knee {
            (2.0 / self.gamma) * u.powf(1.0 / self.gamma - 1.0)
        } else {
            let f = self.solve_right(u).unwrap_or(f64::NAN);
            1.0 / self.relation_deriv(f)
        }
    }

    fn inverse(&self, y: f64) -> Result<f64> {
        Ok(self.sign * self.relation(self.sign * y))
    }
}

/// Circle map on `[-1, 1]/~` with infinite derivative at `0±` and neutral
/// behaviour at `±1`; Lebesgue measure is invariant for every `γ > 1`.
pub fn singular_intermittent_map(gamma: f64, tol: f64) -> Result<PiecewiseMap1D> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("singular intermittent map needs gamma > 1 (got {gamma})")));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("implicit-solve tolerance must be positive (got {tol})")));
    }
    PiecewiseMap1D::new(
        format!("singular(gamma={gamma})"),
        vec![
            Branch::smooth(-1.0, 0.0, Arc::new(SingularIntermittentBranch::new(gamma, -1.0, tol))),
            Branch::smooth(0.0, 1.0, Arc::new(SingularIntermittentBranch::new(gamma, 1.0, tol))),
        ],
        PhaseSpace::Circle { lo: -1.0, hi: 1.0 },
    )
}

// ---------------------------------------------------------------------------
// two-dimensional skew product

/// `(x, y) -> (f_{α(y)}(x), φ(y))` on the unit square, with `α(y) = α0` on
/// `[0, p0]` and `α1` otherwise, and `φ` the full-branch affine map of the
/// two `y`-intervals onto `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SkewProductMap {
    pub alpha0: f64,
    pub alpha1: f64,
    pub p0: f64,
    fibers: [PiecewiseMap1D; 2],
    clearance: f64,
}

impl SkewProductMap {
    pub fn new(alpha0: f64, alpha1: f64, p0: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0 < alpha1 && alpha1 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "skew product needs 0 < alpha0 < alpha1 <= 1 (got {alpha0}, {alpha1})"
            )));
        }
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::InvalidParameter(format!("skew product needs p0 in (0, 1) (got {p0})")));
        }
        Ok(SkewProductMap {
            alpha0,
            alpha1,
            p0,
            fibers: [lsv_unchecked(alpha0), lsv_unchecked(alpha1)],
            clearance: DEFAULT_CLEARANCE,
        })
    }

    pub fn p1(&self) -> f64 {
        1.0 - self.p0
    }

    /// Fiber map used above `y`.
    pub fn fiber(&self, y: f64) -> &PiecewiseMap1D {
        if y <= self.p0 {
            &self.fibers[0]
        } else {
            &self.fibers[1]
        }
    }

    pub fn fiber_maps(&self) -> &[PiecewiseMap1D; 2] {
        &self.fibers
    }

    pub fn base_map(&self, y: f64) -> (f64, f64) {
        if y <= self.p0 {
            (y / self.p0, 1.0 / self.p0)
        } else {
            ((y - self.p0) / self.p1(), 1.0 / self.p1())
        }
    }

    /// Image point and `|det Df|`.
    pub fn eval(&self, x: f64, y: f64) -> Result<((f64, f64), f64)> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain { x: y, lo: 0.0, hi: 1.0 });
        }
        for s in [0.0, self.p0, 1.0] {
            if (y - s).abs() <= self.clearance {
                return Err(Error::SingularPoint { x: y, clearance: self.clearance });
            }
        }
        let (fx, dfx) = self.fiber(y).eval(x)?;
        let (gy, dgy) = self.base_map(y);
        Ok(((fx, gy), dfx * dgy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn doubling_eval() {
        let m = doubling_map();
        let (v, d) = m.eval(0.3).unwrap();
        assert_relative_eq!(v, 0.6);
        assert_eq!(d, 2.0);
    }

    #[test]
    fn lsv_examples() {
        let m = lsv_map(0.5).unwrap();
        // g0(1/2) = 1/2 + sqrt(2) (1/2)^1.5 = 1
        let g0 = &m.branches()[0];
        assert_relative_eq!(g0.value(0.5), 1.0, epsilon = 1e-15);
        assert_eq!(g0.value(0.0), 0.0);
        assert_eq!(g0.deriv(0.0), 1.0);
        let (v, d) = m.eval(0.75).unwrap();
        assert_relative_eq!(v, 0.5);
        assert_eq!(d, 2.0);
        let (v, d) = lsv_map(0.25).unwrap().eval(0.75).unwrap();
        assert_relative_eq!(v, 0.5);
        assert_eq!(d, 2.0);
    }

    #[test]
    fn lsv_rejects_alpha_at_least_one() {
        assert!(matches!(lsv_map(1.2), Err(Error::InvalidParameter(_))));
        assert!(lsv_map(1.0).is_err());
        assert!(lsv_map(0.0).is_err());
    }

    #[test]
    fn lorenz_examples() {
        let m = lorenz_like_map(0.25).unwrap();
        let right = &m.branches()[1];
        assert_relative_eq!(right.value(0.5), 0.5, epsilon = 1e-15);
        assert_relative_eq!(right.value(1e-300), -0.5, epsilon = 1e-12);
        assert_relative_eq!(m.branches()[0].value(-1e-300), 0.5, epsilon = 1e-12);
        let expected = 2f64.powf(0.75) * 0.75 * 4f64.powf(0.25);
        assert_relative_eq!(right.deriv(0.25), expected, epsilon = 1e-14);
        assert!(expected > 1.78 && expected < 1.79);
        assert!(matches!(m.eval(1e-13), Err(Error::SingularPoint { .. })));
        assert!(lorenz_like_map(0.5).is_err());
    }

    #[test]
    fn lorenz_inverse_roundtrip() {
        let m = lorenz_like_map(0.3).unwrap();
        for b in m.branches() {
            for &y in &[-0.49, -0.2, 0.0, 0.3, 0.49] {
                let x = b.inverse(y).unwrap();
                assert!(x >= b.lo && x <= b.hi);
                assert_relative_eq!(b.value(x), y, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn singular_intermittent_examples() {
        let m = singular_intermittent_map(2.0, DEFAULT_IMPLICIT_TOL).unwrap();
        let right = &m.branches()[1];
        // x = 2^-γ is the junction of the two implicit pieces: f = 0
        assert_relative_eq!(right.value(0.25), 0.0, epsilon = 1e-15);
        // x = 1 -> f = 1, identified with -1
        assert_relative_eq!(right.value(1.0), 1.0, epsilon = 1e-15);
        // 0.5 = f + (1 - f)^2 / 4  <=>  f^2 + 2f - 1 = 0
        assert_relative_eq!(right.value(0.5), 2f64.sqrt() - 1.0, epsilon = 1e-14);
        // odd symmetry
        assert_relative_eq!(m.apply(-0.5).unwrap(), -(2f64.sqrt() - 1.0), epsilon = 1e-14);
        // derivative blows up at 0+
        assert!(right.deriv(1e-10) > 1e4);
        assert!(singular_intermittent_map(1.0, 1e-14).is_err());
    }

    #[test]
    fn circle_endpoint_is_not_singular() {
        let m = singular_intermittent_map(2.0, DEFAULT_IMPLICIT_TOL).unwrap();
        assert_eq!(m.singular_set(), &[0.0]);
        assert!(m.eval(1.0).is_ok());
        assert!(m.eval(-1.0).is_ok());
    }

    #[test]
    fn skew_product_examples() {
        let s = SkewProductMap::new(0.2, 0.6, 0.5).unwrap();
        let ((x, y), _) = s.eval(0.25, 0.3).unwrap();
        let g0 = LsvLeftBranch::new(0.2);
        assert_relative_eq!(x, g0.value(0.25));
        assert_relative_eq!(y, 0.6, epsilon = 1e-15);
        assert_relative_eq!(s.base_map(0.5 - 1e-15).0, 1.0, epsilon = 1e-12);
        assert!(s.base_map(0.5 + 1e-15).0 < 1e-12);
        assert!(matches!(s.eval(0.5, 0.3), Err(Error::SingularPoint { .. })));
        assert!(matches!(s.eval(0.3, 0.5), Err(Error::SingularPoint { .. })));
        assert!(SkewProductMap::new(0.6, 0.2, 0.5).is_err());
        assert!(SkewProductMap::new(0.2, 0.6, 1.0).is_err());
        assert!(SkewProductMap::new(0.2, 1.0, 0.5).is_ok());
    }

    #[test]
    fn piecewise_linear_validation() {
        let phase = PhaseSpace::Interval { lo: 0.0, hi: 1.0 };
        assert!(PiecewiseMap1D::piecewise_linear("gap", phase, &[(0.0, 0.4, 0.0, 1.0), (0.5, 1.0, 0.0, 1.0)]).is_err());
        let tent = PiecewiseMap1D::piecewise_linear("tent", phase, &[(0.0, 0.5, 0.0, 1.0), (0.5, 1.0, 1.0, 0.0)]).unwrap();
        assert_eq!(tent.branches()[1].orientation(), -1.0);
        assert_relative_eq!(tent.apply(0.75).unwrap(), 0.5);
    }
}
