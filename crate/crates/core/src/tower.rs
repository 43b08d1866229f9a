//! Tower extension `Δ = {(x, ℓ) : 0 <= ℓ < R(x)}` over an inducing scheme,
//! its invariant measure and the projection back to phase space.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inducing::{InducingScheme, Projection, TailModel, TailWeight};
use crate::maps1d::PiecewiseMap1D;
use crate::par::{map_indexed, stream_rng};
use crate::quad::{pairwise_sum, KahanSum};
use crate::ulam::{ulam_matrix_scheme, Grid, UlamDensity, ULAM_MAX_ITER, ULAM_TOL};

pub const DEFAULT_BINS: usize = 4096;

/// A point of the tower: base point and level.
pub type TowerState = (f64, u32);

#[derive(Debug, Clone)]
pub struct Tower {
    scheme: InducingScheme,
    map: Option<Arc<PiecewiseMap1D>>,
    /// `m({R > ℓ})` over the computed cells.
    level_lebesgue: Vec<f64>,
}

impl Tower {
    /// Tower over `scheme`; the projected map is the scheme's underlying map.
    pub fn new(scheme: InducingScheme) -> Self {
        let map = scheme.map().cloned();
        Tower::with_map(scheme, map)
    }

    /// Tower whose projection lands in the phase space of `map`.
    pub fn with_map(scheme: InducingScheme, map: Option<Arc<PiecewiseMap1D>>) -> Self {
        let mut masses = vec![0.0; scheme.n_max() as usize + 1];
        for c in scheme.cells() {
            masses[c.return_time as usize - 1] += c.mass;
        }
        // m(R > ℓ) = Σ_{n > ℓ} m(R = n)
        let mut level_lebesgue = vec![0.0; scheme.n_max() as usize];
        let mut acc = KahanSum::new();
        for l in (0..level_lebesgue.len()).rev() {
            acc.add(masses[l]);
            level_lebesgue[l] = acc.value();
        }
        Tower { scheme, map, level_lebesgue }
    }

    pub fn scheme(&self) -> &InducingScheme {
        &self.scheme
    }

    pub fn map(&self) -> Option<&Arc<PiecewiseMap1D>> {
        self.map.as_ref()
    }

    pub fn levels(&self) -> usize {
        self.level_lebesgue.len()
    }

    pub fn level_lebesgue(&self) -> &[f64] {
        &self.level_lebesgue
    }

    /// `m(Δ) = Σ_ℓ m({R > ℓ})`.
    pub fn total_mass(&self) -> f64 {
        let mut acc = KahanSum::new();
        self.level_lebesgue.iter().for_each(|&m| acc.add(m));
        acc.value()
    }

    /// `∫_{Δ₀} R dm` over the computed cells.
    pub fn integral_of_return_time(&self) -> f64 {
        let mut acc = KahanSum::new();
        for c in self.scheme.cells() {
            acc.add(c.return_time as f64 * c.mass);
        }
        acc.value()
    }

    fn check_level(&self, x: f64, level: u32) -> Result<usize> {
        let i = self.scheme.cell_index(x)?;
        let r = self.scheme.cells()[i].return_time;
        if level >= r {
            return Err(Error::InvalidLevel { level, return_time: r });
        }
        Ok(i)
    }

    /// `T(x, ℓ) = (x, ℓ+1)` below the top of the column, `(F(x), 0)` on it.
    pub fn step(&self, (x, level): TowerState) -> Result<TowerState> {
        let i = self.check_level(x, level)?;
        if level + 1 < self.scheme.cells()[i].return_time {
            Ok((x, level + 1))
        } else {
            Ok((self.scheme.cell_eval(i, x).0, 0))
        }
    }

    /// `J_T`: 1 below the top level, `J_F(x)` on it.
    pub fn jacobian(&self, (x, level): TowerState) -> Result<f64> {
        let i = self.check_level(x, level)?;
        if level + 1 < self.scheme.cells()[i].return_time {
            Ok(1.0)
        } else {
            Ok(self.scheme.cell_eval(i, x).1)
        }
    }

    /// `π(x, ℓ) = f^ℓ(x)`.
    pub fn project(&self, (x, level): TowerState) -> Result<f64> {
        let i = self.check_level(x, level)?;
        self.scheme.partial_orbit(i, x, level)
    }

    /// `|f(π(s)) - π(T(s))|`.
    pub fn semiconjugacy_residual(&self, s: TowerState) -> Result<f64> {
        let map = self
            .map
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("tower has no projected map".into()))?;
        let lhs = map.apply(self.project(s)?)?;
        let rhs = self.project(self.step(s)?)?;
        Ok((lhs - rhs).abs())
    }

    /// Largest semiconjugacy residual over `n` states drawn uniformly from
    /// the tower's Lebesgue measure. States whose projection is within the
    /// singular clearance are counted and skipped.
    pub fn max_semiconjugacy_residual(&self, n: usize, seed: u64) -> Result<(f64, usize)> {
        const CHUNK: usize = 4096;
        let total = self.total_mass();
        let parts: Vec<Result<(f64, usize)>> = map_indexed(n.div_ceil(CHUNK), |c| {
            let mut rng = stream_rng(seed, c as u64);
            let mut worst: f64 = 0.0;
            let mut skipped = 0;
            for _ in 0..CHUNK.min(n - c * CHUNK) {
                let s = self.sample_lebesgue(&mut rng, total);
                match self.semiconjugacy_residual(s) {
                    Ok(r) => worst = worst.max(r),
                    Err(Error::SingularPoint { .. }) | Err(Error::TruncatedCell { .. }) => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok((worst, skipped))
        });
        let mut worst: f64 = 0.0;
        let mut skipped = 0;
        for p in parts {
            let (w, s) = p?;
            worst = worst.max(w);
            skipped += s;
        }
        Ok((worst, skipped))
    }

    /// Point of the tower drawn from normalised Lebesgue measure.
    pub fn sample_lebesgue(&self, rng: &mut impl Rng, total: f64) -> TowerState {
        let mut t = rng.random::<f64>() * total;
        let mut level = 0;
        while level + 1 < self.level_lebesgue.len() && t >= self.level_lebesgue[level] {
            t -= self.level_lebesgue[level];
            level += 1;
        }
        // uniform point of {R > ℓ}: pick a cell by mass
        let cells = self.scheme.cells();
        let mut u = rng.random::<f64>() * self.level_lebesgue[level];
        for c in cells.iter().filter(|c| c.return_time as usize > level) {
            if u < c.mass {
                return (c.lo + c.len() * rng.random::<f64>(), level as u32);
            }
            u -= c.mass;
        }
        let c = cells.iter().rev().find(|c| c.return_time as usize > level).expect("non-empty level");
        (c.lo + c.len() * rng.random::<f64>(), level as u32)
    }

    /// Fraction of time spent on each level along `n_orbits` tower orbits of
    /// length `n_steps`, with the standard error across orbits.
    pub fn simulate_level_occupation(
        &self,
        n_orbits: usize,
        n_steps: usize,
        seed: u64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let levels = self.levels();
        let (lo, hi) = self.scheme.base();
        let runs: Vec<Result<Vec<f64>>> = map_indexed(n_orbits, |k| {
            let mut rng = stream_rng(seed, k as u64);
            let fresh = |rng: &mut rand_chacha::ChaCha8Rng| (lo + (hi - lo) * rng.random::<f64>(), 0u32);
            let mut s = fresh(&mut rng);
            let mut counts = vec![0.0; levels];
            let burn = n_steps / 10;
            let mut t = 0;
            while t < n_steps + burn {
                match self.step(s) {
                    Ok(next) => {
                        if t >= burn {
                            counts[s.1 as usize] += 1.0;
                        }
                        s = next;
                        t += 1;
                    }
                    Err(Error::TruncatedCell { .. }) => s = fresh(&mut rng),
                    Err(e) => return Err(e),
                }
            }
            Ok(counts.into_iter().map(|c| c / n_steps as f64).collect())
        });
        let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
        let nf = n_orbits as f64;
        let mut mean = vec![0.0; levels];
        let mut se = vec![0.0; levels];
        for l in 0..levels {
            let xs: Vec<f64> = runs.iter().map(|r| r[l]).collect();
            let m = pairwise_sum(&xs) / nf;
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
            mean[l] = m;
            se[l] = (var / nf).sqrt();
        }
        Ok((mean, se))
    }
}

// ---------------------------------------------------------------------------
// measures

/// How to obtain the induced map's invariant measure `ν₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BaseMethod {
    /// Normalised Lebesgue; exact for piecewise-linear onto branches.
    ExactLinear,
    Ulam { bins: usize },
    /// Empirical measure of `n` points of `F`-orbits after burn-in.
    Orbit { n: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    Uniform { lo: f64, hi: f64 },
    Ulam(UlamDensity),
    /// Equal-weight sorted sample points.
    Orbit { points: Vec<f64> },
}

/// Probability measure on the base.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMeasure {
    pub kind: MeasureKind,
}

impl BaseMeasure {
    pub fn representation(&self) -> &'static str {
        match self.kind {
            MeasureKind::Uniform { .. } => "closed_form",
            MeasureKind::Ulam(_) => "ulam",
            MeasureKind::Orbit { .. } => "orbit",
        }
    }

    /// `ν₀((a, b))`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        match &self.kind {
            MeasureKind::Uniform { lo, hi } => ((b.min(*hi) - a.max(*lo)) / (hi - lo)).max(0.0),
            MeasureKind::Ulam(d) => {
                let mut acc = 0.0;
                d.grid.split(a, b, |k, len| acc += d.density(k) * len);
                acc
            }
            MeasureKind::Orbit { points } => {
                let i = points.partition_point(|&p| p <= a);
                let j = points.partition_point(|&p| p < b);
                j.saturating_sub(i) as f64 / points.len() as f64
            }
        }
    }

    /// `∫_a^b g dν₀`.
    pub fn integrate<G: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut g: G) -> f64 {
        match &self.kind {
            MeasureKind::Uniform { lo, hi } => {
                let (a, b) = (a.max(*lo), b.min(*hi));
                if b <= a {
                    0.0
                } else {
                    crate::quad::gauss_legendre(g, a, b) / (hi - lo)
                }
            }
            MeasureKind::Ulam(d) => d.integrate_over(a, b, g),
            MeasureKind::Orbit { points } => {
                let i = points.partition_point(|&p| p <= a);
                let j = points.partition_point(|&p| p < b);
                let vals: Vec<f64> = points[i..j.max(i)].iter().map(|&x| g(x)).collect();
                pairwise_sum(&vals) / points.len() as f64
            }
        }
    }

    /// Bin masses on `grid`.
    pub fn histogram(&self, grid: Grid) -> Vec<f64> {
        (0..grid.bins).map(|k| self.mass(grid.edge(k), grid.edge(k + 1))).collect()
    }

    /// Largest density over the support (`None` for empirical measures).
    pub fn sup_density(&self) -> Option<f64> {
        match &self.kind {
            MeasureKind::Uniform { lo, hi } => Some(1.0 / (hi - lo)),
            MeasureKind::Ulam(d) => Some((0..d.grid.bins).map(|k| d.density(k)).fold(0.0, f64::max)),
            MeasureKind::Orbit { .. } => None,
        }
    }

    pub fn inf_density(&self) -> Option<f64> {
        match &self.kind {
            MeasureKind::Uniform { lo, hi } => Some(1.0 / (hi - lo)),
            MeasureKind::Ulam(d) => Some((0..d.grid.bins).map(|k| d.density(k)).fold(f64::INFINITY, f64::min)),
            MeasureKind::Orbit { .. } => None,
        }
    }
}

/// `ν₀` for the induced map of `scheme`.
pub fn base_invariant_measure(scheme: &InducingScheme, method: BaseMethod) -> Result<BaseMeasure> {
    let (lo, hi) = scheme.base();
    let kind = match method {
        BaseMethod::ExactLinear => {
            if let Some((i, _)) = scheme.cells().iter().enumerate().find(|(i, _)| !cell_is_linear(scheme, *i)) {
                return Err(Error::NonlinearJacobian { cell: i });
            }
            MeasureKind::Uniform { lo, hi }
        }
        BaseMethod::Ulam { bins } => {
            MeasureKind::Ulam(ulam_matrix_scheme(scheme, bins)?.fixed_point(ULAM_TOL, ULAM_MAX_ITER)?)
        }
        BaseMethod::Orbit { n, seed } => MeasureKind::Orbit { points: induced_orbit_points(scheme, n, seed)? },
    };
    Ok(BaseMeasure { kind })
}

fn cell_is_linear(scheme: &InducingScheme, i: usize) -> bool {
    let c = &scheme.cells()[i];
    let probe = [0.1, 0.5, 0.9].map(|t| scheme.cell_eval(i, c.lo + t * c.len()).1);
    probe.iter().all(|&j| (j / probe[0] - 1.0).abs() < 1e-12)
}

/// `n` points of `F`-orbits: 16 independent orbits, each after a burn-in of
/// 1000 returns, restarting from a fresh Lebesgue point whenever the orbit
/// enters an omitted cell.
fn induced_orbit_points(scheme: &InducingScheme, n: usize, seed: u64) -> Result<Vec<f64>> {
    const ORBITS: usize = 16;
    const BURN: usize = 1000;
    let (lo, hi) = scheme.base();
    let parts: Vec<Vec<f64>> = map_indexed(ORBITS, |k| {
        let mut rng = stream_rng(seed, k as u64);
        let count = n / ORBITS + usize::from(k < n % ORBITS);
        let mut out = Vec::with_capacity(count);
        let mut x = lo + (hi - lo) * rng.random::<f64>();
        let mut t = 0;
        while out.len() < count {
            match scheme.induced(x) {
                Ok((_, y, _)) => {
                    if t >= BURN {
                        out.push(x);
                    }
                    t += 1;
                    x = y;
                }
                Err(_) => x = lo + (hi - lo) * rng.random::<f64>(),
            }
        }
        out
    });
    let mut points: Vec<f64> = parts.into_iter().flatten().collect();
    points.sort_by(f64::total_cmp);
    Ok(points)
}

/// `ν` on the tower: `ν|Δ_ℓ = ν₀|{R>ℓ} / ρ` with `ν₀` conditioned on the
/// computed cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TowerMeasure {
    /// `ρ = Σ_ℓ ν₀({R > ℓ})`.
    pub rho: f64,
    /// `ρ` as `∫ R dν₀`, computed cell by cell.
    pub rho_by_return_time: f64,
    /// `ν(Δ_ℓ)`.
    pub level_masses: Vec<f64>,
    /// Conditioned `ν₀(ω_i)`.
    pub cell_masses: Vec<f64>,
    /// `ν₀` of the computed cells before conditioning.
    pub covered_mass: f64,
    pub representation: String,
}

pub fn tower_invariant_measure(tower: &Tower, nu0: &BaseMeasure) -> Result<TowerMeasure> {
    let scheme = tower.scheme();
    let raw: Vec<f64> = scheme.cells().iter().map(|c| cell_measure(nu0, c.lo, c.hi, c.mass, scheme)).collect();
    let covered = pairwise_sum(&raw);
    if covered <= 0.0 {
        return Err(Error::InvalidParameter("base measure gives no mass to the computed cells".into()));
    }
    let cell_masses: Vec<f64> = raw.iter().map(|m| m / covered).collect();
    let levels = tower.levels();
    let mut by_rt = vec![0.0; levels + 1];
    for (c, &m) in scheme.cells().iter().zip(&cell_masses) {
        by_rt[c.return_time as usize - 1] += m;
    }
    let mut sub = vec![0.0; levels];
    let mut acc = KahanSum::new();
    for l in (0..levels).rev() {
        acc.add(by_rt[l]);
        sub[l] = acc.value();
    }
    let mut rho_acc = KahanSum::new();
    sub.iter().for_each(|&m| rho_acc.add(m));
    let rho = rho_acc.value();
    let mut rt_acc = KahanSum::new();
    for (c, &m) in scheme.cells().iter().zip(&cell_masses) {
        rt_acc.add(c.return_time as f64 * m);
    }
    check_rho_convergence(scheme, &cell_masses, nu0)?;
    Ok(TowerMeasure {
        rho,
        rho_by_return_time: rt_acc.value(),
        level_masses: sub.iter().map(|m| m / rho).collect(),
        cell_masses,
        covered_mass: covered,
        representation: nu0.representation().into(),
    })
}

/// `ν₀(ω)`; cells below the resolution of a Ulam grid keep their exact
/// Lebesgue mass times the local density.
fn cell_measure(nu0: &BaseMeasure, lo: f64, hi: f64, mass: f64, _s: &InducingScheme) -> f64 {
    match &nu0.kind {
        MeasureKind::Uniform { lo: a, hi: b } => mass / (b - a),
        MeasureKind::Ulam(d) if hi - lo < d.grid.width() => d.density_at(0.5 * (lo + hi)) * mass,
        _ => nu0.mass(lo, hi),
    }
}

/// Cauchy test on `ρ`: the part of `∫ R dν₀` from cells with
/// `n_max/2 < R <= n_max` must stay below `max(1e-6, tail bound)`.
fn check_rho_convergence(scheme: &InducingScheme, cell_masses: &[f64], nu0: &BaseMeasure) -> Result<()> {
    let n = scheme.n_max();
    if n < 2 || scheme.tail_model() == TailModel::Exact {
        return Ok(());
    }
    let half = n / 2;
    let mut gap = KahanSum::new();
    for (c, &m) in scheme.cells().iter().zip(cell_masses) {
        if c.return_time > half {
            gap.add(c.return_time as f64 * m);
        }
    }
    let density = nu0.sup_density().unwrap_or(1.0 / scheme.base_len()).max(1.0 / scheme.base_len());
    let bound = (density * scheme.tail_bound(TailWeight::ReturnTime, half)).max(1e-6);
    let gap = gap.value();
    if gap.is_finite() && gap <= bound {
        Ok(())
    } else {
        Err(Error::RhoDivergent { gap, bound })
    }
}

/// Two-sided `∫ log J_T dν` against `(1/ρ) ∫ log J_F dν₀`. The left side
/// walks every level of every column with the tower Jacobian.
pub fn log_jacobian_two_sides(tower: &Tower, nu0: &BaseMeasure, nu: &TowerMeasure) -> Result<(f64, f64)> {
    let scheme = tower.scheme();
    let mut left = KahanSum::new();
    let mut right = KahanSum::new();
    let weight = 1.0 / nu.covered_mass;
    for (i, c) in scheme.cells().iter().enumerate() {
        right.add(cell_log_jacobian_integral(nu0, scheme, i) * weight);
        for level in 0..c.return_time {
            let integral = cell_integral(nu0, scheme, i, |x| {
                tower.jacobian((x, level)).map(f64::ln).unwrap_or(f64::NAN)
            });
            left.add(integral * weight);
        }
    }
    Ok((left.value() / nu.rho, right.value() / nu.rho))
}

/// `∫_{ω_i} log J_F dν₀`.
pub fn cell_log_jacobian_integral(nu0: &BaseMeasure, scheme: &InducingScheme, i: usize) -> f64 {
    cell_integral(nu0, scheme, i, |x| scheme.cell_log_jacobian(i, x))
}

fn cell_integral<G: FnMut(f64) -> f64>(nu0: &BaseMeasure, scheme: &InducingScheme, i: usize, mut g: G) -> f64 {
    let c = &scheme.cells()[i];
    match &nu0.kind {
        MeasureKind::Uniform { lo, hi } => {
            // exact mass keeps the rounding of lo/hi out of the integral
            crate::quad::gauss_legendre(&mut g, c.lo, c.hi) / c.len() * c.mass / (hi - lo)
        }
        MeasureKind::Ulam(d) if c.len() < d.grid.width() => {
            d.density_at(0.5 * (c.lo + c.hi)) * crate::quad::gauss_legendre(&mut g, c.lo, c.hi) / c.len() * c.mass
        }
        _ => nu0.integrate(c.lo, c.hi, g),
    }
}

/// `μ = π_* ν` as bin masses on `grid`.
///
/// Each cell is cut into pieces fine enough that every level's image of a
/// piece spans at most an eighth of a bin (capped at `1e5` pieces); the
/// `ν`-mass of a piece is spread uniformly over its image at each level.
pub fn pushforward_measure(tower: &Tower, nu0: &BaseMeasure, nu: &TowerMeasure, grid: Grid) -> Result<UlamDensity> {
    const CHUNK: usize = 16;
    let scheme = tower.scheme();
    let cells = scheme.cells();
    let h = grid.width();
    let layout = match scheme.projection() {
        Projection::LevelLayout { offsets } => Some(offsets.as_slice()),
        Projection::Itinerary => None,
    };
    let parts: Vec<Result<Vec<f64>>> = map_indexed(cells.len().div_ceil(CHUNK), |chunk| {
        let mut hist = vec![0.0; grid.bins];
        let hi = ((chunk + 1) * CHUNK).min(cells.len());
        for (i, c) in cells.iter().enumerate().take(hi).skip(chunk * CHUNK) {
            let r = c.return_time;
            let total = nu.cell_masses[i] / nu.rho;
            if total == 0.0 {
                continue;
            }
            // level extents from the endpoints
            let mut widest: f64 = c.len();
            if layout.is_none() {
                let (mut a, mut b) = (c.lo, c.hi);
                for l in 0..r.saturating_sub(1) {
                    a = scheme.advance_in_column(i, l, a);
                    b = scheme.advance_in_column(i, l, b);
                    widest = widest.max((b - a).abs());
                }
            }
            let k = ((8.0 * widest / h).ceil() as usize).clamp(1, 100_000);
            let xs: Vec<f64> = (0..=k).map(|j| c.lo + c.len() * j as f64 / k as f64).collect();
            let raw: Vec<f64> = xs.windows(2).map(|w| nu0.mass(w[0], w[1]).max(0.0)).collect();
            let raw_total = pairwise_sum(&raw);
            let weights: Vec<f64> = if raw_total > 0.0 {
                raw.iter().map(|m| m / raw_total * total).collect()
            } else {
                vec![total / k as f64; k]
            };
            let mut ys = xs.clone();
            for l in 0..r {
                if let Some(off) = layout {
                    for (y, x) in ys.iter_mut().zip(&xs) {
                        *y = off[l as usize] + x;
                    }
                }
                for (j, &w) in weights.iter().enumerate() {
                    spread(&mut hist, grid, ys[j], ys[j + 1], w);
                }
                if layout.is_none() && l + 1 < r {
                    for y in ys.iter_mut() {
                        *y = scheme.advance_in_column(i, l, *y);
                    }
                }
            }
        }
        Ok(hist)
    });
    let mut hists = Vec::with_capacity(parts.len());
    for p in parts {
        hists.push(p?);
    }
    let mut mass = vec![0.0; grid.bins];
    let mut column = vec![0.0; hists.len()];
    for (k, m) in mass.iter_mut().enumerate() {
        for (dst, hist) in column.iter_mut().zip(&hists) {
            *dst = hist[k];
        }
        *m = pairwise_sum(&column);
    }
    Ok(UlamDensity { grid, mass, iterations: 0, increment: 0.0 })
}

fn spread(hist: &mut [f64], grid: Grid, a: f64, b: f64, w: f64) {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if b - a <= 0.0 {
        if a >= grid.lo && a <= grid.hi {
            hist[grid.bin_of(a)] += w;
        }
        return;
    }
    let len = b - a;
    grid.split(a, b, |k, overlap| hist[k] += w * overlap / len);
}

/// CSV of a density, preceded by a one-line JSON header starting with `#`.
pub fn write_density_csv<W: Write, H: Serialize>(density: &UlamDensity, header: &H, mut out: W) -> Result<()> {
    writeln!(out, "# {}", serde_json::to_string(header)?)?;
    density.write_csv(out)
}
