//! Affine inducing scheme with integrable return time but non-integrable
//! `R log J_F`, so the tower measure has infinite entropy while the
//! Jacobian integral stays finite.
//!
//! `φ(x) = -x log x`, `a_n = φ^{-1}(1/(n² log n))` for `n >= 2`, and the
//! cell `ω_n = (b_{n-1}, b_n)` with `b_n = a_2 + ... + a_n` returns after
//! `n` steps, mapped affinely onto the base.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inducing::{Cell, CellMap, DistortionConstants, InducingScheme, Projection, TailModel, TailWeight};
use crate::maps1d::{Branch, PhaseSpace, PiecewiseMap1D};
use crate::par::map_indexed;
use crate::quad::{gauss_legendre_composite, KahanSum};
use crate::roots::newton_bracketed;

pub fn phi(x: f64) -> f64 {
    -x * x.ln()
}

/// Solves `L - log L = c` on `L >= 1` (requires `c >= 1`).
fn solve_log_equation(c: f64) -> Result<f64> {
    if c == 1.0 {
        return Ok(1.0);
    }
    newton_bracketed(|l| l - l.ln() - c, |l| 1.0 - 1.0 / l, 1.0, 2.0 * c, 1e-15)
}

/// Inverse of `φ` on `(0, 1/e]`.
///
/// Written as `x = y / L` with `L = log(1/x)` solving `L - log L = log(1/y)`,
/// which keeps full relative precision for tiny `y`.
pub fn phi_inverse(y: f64) -> Result<f64> {
    let top = (-1.0f64).exp();
    if !(y > 0.0 && y <= top * (1.0 + 4.0 * f64::EPSILON)) {
        return Err(Error::OutOfDomain { x: y, lo: 0.0, hi: top });
    }
    let c = (-y.ln()).max(1.0);
    Ok(y / solve_log_equation(c)?)
}

/// `φ(a_n) = 1/(n² log n)`.
pub fn phi_of_a(n: u64) -> f64 {
    let nf = n as f64;
    1.0 / (nf * nf * nf.ln())
}

/// The sequences `a_n` and `b_n` up to `n_max`.
#[derive(Debug, Clone)]
pub struct CounterexampleParams {
    /// `a[n - 2] = a_n`.
    a: Vec<f64>,
    /// `b_partial[n - 2] = b_n`, compensated partial sums.
    b_partial: Vec<f64>,
    pub n_max: u64,
}

impl CounterexampleParams {
    pub fn new(n_max: u64) -> Result<Self> {
        if n_max < 3 {
            return Err(Error::InvalidParameter(format!("n_max must be at least 3 (got {n_max})")));
        }
        const CHUNK: usize = 1 << 14;
        let len = (n_max - 1) as usize;
        let chunks: Vec<Result<Vec<f64>>> = map_indexed(len.div_ceil(CHUNK), |c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(len);
            (start..end).map(|k| phi_inverse(phi_of_a(k as u64 + 2))).collect()
        });
        let mut a = Vec::with_capacity(len);
        for ch in chunks {
            a.extend(ch?);
        }
        let mut b_partial = Vec::with_capacity(len);
        let mut acc = KahanSum::new();
        for &x in &a {
            acc.add(x);
            b_partial.push(acc.value());
        }
        Ok(CounterexampleParams { a, b_partial, n_max })
    }

    /// `a_n` for `2 <= n <= n_max`.
    pub fn a(&self, n: u64) -> f64 {
        self.a[(n - 2) as usize]
    }

    /// `b_n` for `1 <= n <= n_max` (`b_1 = 0`).
    pub fn b_partial(&self, n: u64) -> f64 {
        if n < 2 {
            0.0
        } else {
            self.b_partial[(n - 2) as usize]
        }
    }

    /// Truncated `b = b_{n_max}`.
    pub fn b_trunc(&self) -> f64 {
        self.b_partial(self.n_max)
    }

    /// `Σ_{n > n_max} a_n <= 1/(n_max log² n_max)`.
    pub fn b_tail_bound(&self) -> f64 {
        tail_bound_mass(self.n_max)
    }

    /// Compensated `Σ_{n=2}^{N} w(n, a_n)`.
    pub fn partial_sum<W: Fn(u64, f64) -> f64>(&self, upto: u64, w: W) -> f64 {
        let mut acc = KahanSum::new();
        for n in 2..=upto.min(self.n_max) {
            acc.add(w(n, self.a(n)));
        }
        acc.value()
    }
}

// ---------------------------------------------------------------------------
// tail bounds

/// `Σ_{n>N} a_n <= ∫_N^∞ dt/(t² log² t) <= 1/(N log² N)`.
pub fn tail_bound_mass(n: u64) -> f64 {
    let nf = (n.max(2)) as f64;
    1.0 / (nf * nf.ln().powi(2))
}

/// `Σ_{n>N} n a_n <= ∫_N^∞ dt/(t log² t) = 1/log N`.
pub fn tail_bound_return_time(n: u64) -> f64 {
    1.0 / ((n.max(2)) as f64).ln()
}

/// Exponential integral `E1(x)` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER - x.ln() + sum
    } else {
        // modified Lentz on the continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// `∫_N^∞ dt/(t² log t) = E1(log N)`: the tail of `Σ φ(a_n)`.
pub fn phi_tail_integral(n: f64) -> f64 {
    exp_integral_e1(n.ln())
}

/// `L(w) = log(1/a(t))` at `t = e^{1/w}`.
fn log_inv_a_at(w: f64) -> f64 {
    solve_log_equation(2.0 / w - w.ln()).unwrap_or(f64::NAN)
}

/// `∫_N^∞ a(t) dt` with `a(t) = φ^{-1}(1/(t² log t))`, after `w = 1/log t`.
pub fn mass_tail_integral(n: f64) -> f64 {
    let top = 1.0 / n.ln();
    gauss_legendre_composite(|w| (-1.0 / w).exp() / (w * log_inv_a_at(w)), 0.0, top, 256)
}

/// `∫_N^∞ t a(t) dt`, after `w = 1/log t`.
pub fn return_time_tail_integral(n: f64) -> f64 {
    let top = 1.0 / n.ln();
    gauss_legendre_composite(|w| 1.0 / (w * log_inv_a_at(w)), 0.0, top, 256)
}

/// Tail bounds used by [`TailModel::Counterexample`].
pub(crate) fn tail_bound(_scheme: &InducingScheme, weight: TailWeight, n: u32) -> f64 {
    let n = u64::from(n.max(2));
    match weight {
        TailWeight::Mass => tail_bound_mass(n),
        TailWeight::ReturnTime => tail_bound_return_time(n),
        // log J_n = log(b/a_n) <= log(1/a_n) since b < 1, and a_n log(1/a_n) = φ(a_n)
        TailWeight::LogJacobian => phi_tail_integral(n as f64),
        TailWeight::ReturnTimeSquared | TailWeight::ReturnTimeLogJacobian => f64::INFINITY,
    }
}

/// Minorant for `Σ_{N<n<=M} n a_n log(b/a_n)`.
///
/// That sum equals `Σ 1/(n log n) + log b Σ n a_n`; with `n a_n <= n φ(a_n)/L`
/// for `L = log(1/a_{N+1})` and `log b < 0` it is at least
/// `log(log(M+1)/log(N+1)) (1 + log b / L)`.
pub fn r_log_j_increment_minorant(n: u64, m: u64, b: f64, a_next: f64) -> f64 {
    let l = -a_next.ln();
    let base = (((m + 1) as f64).ln() / ((n + 1) as f64).ln()).ln();
    base * (1.0 + b.ln() / l)
}

// ---------------------------------------------------------------------------
// scheme and interval layout

/// Offsets of the level-by-level layout: level `ℓ` is a copy of
/// `(b_ℓ, b)` placed at `offsets[ℓ] + (b_ℓ, b)`, directly after level `ℓ-1`.
fn level_offsets(p: &CounterexampleParams) -> Vec<f64> {
    let b = p.b_trunc();
    let levels = p.n_max as usize;
    let mut offsets = Vec::with_capacity(levels);
    let mut acc = KahanSum::new();
    offsets.push(0.0);
    for l in 1..levels {
        // offset_ℓ = offset_{ℓ-1} + b - b_ℓ
        acc.add(b - p.b_partial(l as u64));
        offsets.push(acc.value());
    }
    offsets
}

/// Affine inducing scheme on `Δ₀ = (0, b_{n_max})`.
///
/// Cells carry their exact mass `a_n`; the slope is `b/a_n` so that
/// `J_F · m(ω_n) = b` holds exactly even where `b_{n-1}`, `b_n` round.
pub fn build_counterexample_scheme(p: &CounterexampleParams) -> Result<InducingScheme> {
    let b = p.b_trunc();
    let mut cells = Vec::with_capacity(p.n_max as usize - 1);
    for n in 2..=p.n_max {
        let lo = p.b_partial(n - 1);
        let hi = p.b_partial(n);
        let slope = b / p.a(n);
        let mut cell = Cell::new(lo, hi, n as u32, CellMap::Affine { slope, intercept: -slope * lo });
        cell.mass = p.a(n);
        if hi > lo {
            cells.push(cell);
        }
    }
    if cells.len() as u64 != p.n_max - 1 {
        return Err(Error::InvalidParameter(format!(
            "n_max = {} resolves cells below double precision",
            p.n_max
        )));
    }
    InducingScheme::from_cells(
        format!("counterexample(n_max={})", p.n_max),
        (0.0, b),
        cells,
        None,
        0.0,
        DistortionConstants { c: 1.0, beta: 0.5 },
        TailModel::Counterexample,
        Projection::LevelLayout { offsets: level_offsets(p) },
    )
}

/// The tower as a piecewise-affine interval map on `(0, Σ n a_n)`: a
/// translation from each level to the next and an affine return branch
/// from `ω_{ℓ+1} ⊂` level `ℓ` onto level 0.
pub fn counterexample_interval_map(p: &CounterexampleParams) -> Result<PiecewiseMap1D> {
    let b = p.b_trunc();
    let offsets = level_offsets(p);
    let levels = p.n_max as usize;
    let mut branches = Vec::with_capacity(2 * levels);
    for (l, &off) in offsets.iter().enumerate() {
        let lvl_lo = p.b_partial(l as u64);
        let cut = p.b_partial(l as u64 + 1);
        if cut > lvl_lo {
            // ω_{ℓ+1} returns to the base: x -> (b/a) (x - b_ℓ)
            let slope = b / p.a(l as u64 + 1);
            branches.push(Branch::affine(off + lvl_lo, off + cut, slope, -slope * (off + lvl_lo)));
        }
        if l + 1 < levels {
            let shift = offsets[l + 1] - off;
            branches.push(Branch::affine(off + cut, off + b, 1.0, shift));
        }
    }
    let hi = offsets[levels - 1] + b;
    // cells shrink far below the default singular clearance
    Ok(PiecewiseMap1D::new(format!("counterexample_tower(n_max={})", p.n_max), branches, PhaseSpace::Interval {
        lo: 0.0,
        hi,
    })?
    .with_clearance(0.0))
}

// ---------------------------------------------------------------------------
// reports

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub sum_a: f64,
    pub sum_n_a: f64,
    pub sum_phi: f64,
    pub sum_n_phi: f64,
    /// Certified bounds on the remainders `Σ_{n>N}`.
    pub tail_a: f64,
    pub tail_n_a: f64,
    pub tail_phi: f64,
    /// Integral-test bracket for the partial sum of `φ(a_n)`.
    pub phi_bracket: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesVerdict {
    pub series: String,
    pub verdict: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub verdicts: Vec<SeriesVerdict>,
    /// `Σ_{N_1<n<=N_k} n φ(a_n)` against `log(log N_k / log N_1)`.
    pub log_log_increment: f64,
    pub log_log_prediction: f64,
}

impl ConvergenceReport {
    pub fn matches_expected(&self) -> bool {
        let expected = ["convergent", "convergent", "convergent", "divergent"];
        self.verdicts.len() == 4 && self.verdicts.iter().zip(expected).all(|(v, e)| v.verdict == e)
    }
}

/// Partial sums of `a_n`, `n a_n`, `φ(a_n)`, `n φ(a_n)` at each `N` with
/// convergence and divergence verdicts. `φ(a_n)` is taken from its
/// defining identity, not from the computed `a_n`.
pub fn lemma61_report(n_list: &[u64]) -> Result<ConvergenceReport> {
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] < 3 {
        return Err(Error::InvalidParameter("need at least three increasing N >= 3".into()));
    }
    let p = CounterexampleParams::new(*n_list.last().unwrap())?;
    let mut rows = Vec::with_capacity(n_list.len());
    let (mut sa, mut sna, mut sphi, mut snphi) = (KahanSum::new(), KahanSum::new(), KahanSum::new(), KahanSum::new());
    let mut n = 2u64;
    for &target in n_list {
        while n <= target {
            let a = p.a(n);
            let ph = phi_of_a(n);
            sa.add(a);
            sna.add(n as f64 * a);
            sphi.add(ph);
            snphi.add(n as f64 * ph);
            n += 1;
        }
        let first = phi_of_a(2);
        let nf = target as f64;
        // Σ_{3<=n<=N} g(n) ∈ [∫_3^{N+1} g, ∫_2^N g] for decreasing g
        let lo = first + phi_tail_integral(3.0) - phi_tail_integral(nf + 1.0);
        let hi = first + phi_tail_integral(2.0) - phi_tail_integral(nf);
        rows.push(ConvergenceRow {
            n: target,
            sum_a: sa.value(),
            sum_n_a: sna.value(),
            sum_phi: sphi.value(),
            sum_n_phi: snphi.value(),
            tail_a: tail_bound_mass(target),
            tail_n_a: tail_bound_return_time(target),
            tail_phi: phi_tail_integral(nf),
            phi_bracket: [lo, hi],
        });
    }
    let convergent = |name: &str, value: fn(&ConvergenceRow) -> f64, tail: fn(&ConvergenceRow) -> f64| {
        let worst = rows
            .windows(2)
            .map(|w| (value(&w[1]) - value(&w[0])) / tail(&w[0]))
            .fold(0.0, f64::max);
        let ok = worst <= 1.0 && rows.iter().all(|r| tail(r).is_finite());
        SeriesVerdict {
            series: name.into(),
            verdict: if ok { "convergent" } else { "inconclusive" }.into(),
            detail: format!("largest increment / tail bound = {worst:.3e}"),
        }
    };
    let mut verdicts = vec![
        convergent("sum a_n", |r| r.sum_a, |r| r.tail_a),
        convergent("sum n a_n", |r| r.sum_n_a, |r| r.tail_n_a),
        convergent("sum phi(a_n)", |r| r.sum_phi, |r| r.tail_phi),
    ];
    if let Some(v) = verdicts.get_mut(2) {
        let inside = rows.iter().all(|r| r.sum_phi >= r.phi_bracket[0] && r.sum_phi <= r.phi_bracket[1]);
        if !inside {
            v.verdict = "inconclusive".into();
            v.detail.push_str("; partial sum left its integral-test bracket");
        }
    }
    // Σ_{N<n<=M} 1/(n log n) >= ∫_{N+1}^{M+1} dt/(t log t)
    let mut div_ok = true;
    let mut slack = f64::INFINITY;
    for w in rows.windows(2) {
        let inc = w[1].sum_n_phi - w[0].sum_n_phi;
        let minorant = (((w[1].n + 1) as f64).ln() / ((w[0].n + 1) as f64).ln()).ln();
        slack = slack.min(inc - minorant);
        div_ok &= inc >= minorant;
    }
    for r in &rows {
        let floor = (r.n as f64).ln().ln() - 2f64.ln().ln() - 1.0;
        div_ok &= r.sum_n_phi >= floor;
    }
    verdicts.push(SeriesVerdict {
        series: "sum n phi(a_n)".into(),
        verdict: if div_ok { "divergent" } else { "inconclusive" }.into(),
        detail: format!("smallest increment - log-log minorant = {slack:.3e}"),
    });
    let first = &rows[0];
    let last = rows.last().unwrap();
    Ok(ConvergenceReport {
        log_log_increment: last.sum_n_phi - first.sum_n_phi,
        log_log_prediction: ((last.n as f64).ln() / (first.n as f64).ln()).ln(),
        rows,
        verdicts,
    })
}

/// `(1/ρ) ∫ log J_F dν₀ = (b log b + Σ φ(a_n)) / Σ n a_n` for the
/// untruncated system, with integral-test brackets on the three tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobianSide {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Same expression over the computed cells only.
    pub truncated_value: f64,
}

pub fn jacobian_side(p: &CounterexampleParams) -> JacobianSide {
    let n = p.n_max;
    let nf = n as f64;
    let b_n = p.b_trunc();
    let phi_n = p.partial_sum(n, |k, _| phi_of_a(k));
    let s1_n = p.partial_sum(n, |k, a| k as f64 * a);
    let b_rng = [b_n + mass_tail_integral(nf + 1.0), b_n + mass_tail_integral(nf)];
    let phi_rng = [phi_n + phi_tail_integral(nf + 1.0), phi_n + phi_tail_integral(nf)];
    let s1_rng = [s1_n + return_time_tail_integral(nf + 1.0), s1_n + return_time_tail_integral(nf)];
    let f = |b: f64, ph: f64, s1: f64| (b * b.ln() + ph) / s1;
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for &b in &b_rng {
        for &ph in &phi_rng {
            for &s1 in &s1_rng {
                let v = f(b, ph, s1);
                lower = lower.min(v);
                upper = upper.max(v);
            }
        }
    }
    let mid = |r: [f64; 2]| 0.5 * (r[0] + r[1]);
    JacobianSide {
        value: f(mid(b_rng), mid(phi_rng), mid(s1_rng)),
        lower,
        upper,
        truncated_value: f(b_n, phi_n, s1_n),
    }
}

/// CSV of `n, a_n, n a_n, φ(a_n), n φ(a_n)`.
pub fn write_sequence_csv<W: Write>(p: &CounterexampleParams, mut out: W) -> Result<()> {
    writeln!(out, "n,a_n,n_a_n,phi_a_n,n_phi_a_n")?;
    for n in 2..=p.n_max {
        let a = p.a(n);
        let ph = phi_of_a(n);
        let nf = n as f64;
        writeln!(out, "{n},{a:e},{:e},{ph:e},{:e}", nf * a, nf * ph)?;
    }
    Ok(())
}

/// Shared read-only handle used by the CLI and the skew system.
pub type SharedParams = Arc<CounterexampleParams>;
