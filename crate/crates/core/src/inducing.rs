//! Gibbs-Markov induced maps over a base interval.
//!
//! An [`InducingScheme`] is a truncated countable partition of the base
//! into cells with constant return time `R`. On each cell the induced map
//! `F = f^R` is either given by an itinerary of branches of an underlying
//! [`PiecewiseMap1D`] or directly as an affine map onto the base.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps1d::PiecewiseMap1D;
use crate::par::{map_indexed, stream_rng};
use crate::quad::KahanSum;
use crate::roots::bisect_newton;

/// Dynamics of the induced map on one cell.
#[derive(Debug, Clone)]
pub enum CellMap {
    /// Branch indices of the underlying map, in order of application.
    Itinerary(Vec<u32>),
    Affine { slope: f64, intercept: f64 },
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    pub return_time: u32,
    pub map: CellMap,
    /// Lebesgue measure of the cell. Equals `hi - lo` unless the cell
    /// carries an exactly known length that rounding of `lo`, `hi` would lose.
    pub mass: f64,
}

impl Cell {
    pub fn new(lo: f64, hi: f64, return_time: u32, map: CellMap) -> Self {
        Cell { lo, hi, return_time, map, mass: hi - lo }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

/// Distortion constants `(C, β)` a scheme declares for the Gibbs property.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionConstants {
    pub c: f64,
    pub beta: f64,
}

/// Asymptotic model for the omitted cells `R > n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    /// No omitted cells.
    Exact,
    /// `m(R > n) <= k n^-exponent` and `log J_F <= c0 + log_jacobian_slope * log n`,
    /// with `k` and `c0` fitted on the last computed cells.
    PowerLaw { exponent: f64, log_jacobian_slope: f64 },
    /// Infinite-entropy affine construction; bounds come from
    /// [`crate::counterexample`].
    Counterexample,
}

/// Weights for tail sums `Σ_{n>N} w(n) m(R = n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailWeight {
    Mass,
    ReturnTime,
    ReturnTimeSquared,
    LogJacobian,
    ReturnTimeLogJacobian,
}

/// Where the tower projection `π(x, ℓ) = f^ℓ(x)` is realised.
#[derive(Debug, Clone)]
pub enum Projection {
    /// Apply the first `ℓ` branches of the itinerary of the underlying map.
    Itinerary,
    /// The tower laid out level by level on the line: level `ℓ` starts at
    /// `offsets[ℓ]` and `π(x, ℓ) = offsets[ℓ] + x`.
    LevelLayout { offsets: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct InducingScheme {
    pub name: String,
    base: (f64, f64),
    /// Sorted by `lo`.
    cells: Vec<Cell>,
    map: Option<Arc<PiecewiseMap1D>>,
    tail_mass: f64,
    n_max: u32,
    distortion: DistortionConstants,
    tail: TailModel,
    projection: Projection,
}

/// Outcome of a separation-time computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeparationTime {
    Resolved { n: u32 },
    Unresolved { cap: u32, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    #[serde(rename = "fitted_C")]
    pub fitted_c: Option<f64>,
    pub fitted_beta: Option<f64>,
    /// Largest observed `|log J_F(x)/J_F(y)|`.
    pub max_ratio: f64,
    /// `(β, max log-ratio / β^s)` over the β grid.
    pub ratio_by_beta: Vec<(f64, f64)>,
    pub n_pairs: usize,
    pub unresolved_count: usize,
    pub declared: DistortionConstants,
    pub verdict: String,
}

impl InducingScheme {
    /// Assembles a scheme from explicit cells. Cells are sorted and checked
    /// for disjointness; `tail_mass` is the measure of the omitted cells.
    #[allow(clippy::too_many_arguments)]
    pub fn from_cells(
        name: impl Into<String>,
        base: (f64, f64),
        mut cells: Vec<Cell>,
        map: Option<Arc<PiecewiseMap1D>>,
        tail_mass: f64,
        distortion: DistortionConstants,
        tail: TailModel,
        projection: Projection,
    ) -> Result<Self> {
        cells.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for w in cells.windows(2) {
            if w[0].hi > w[1].lo + 1e-15 {
                return Err(Error::InvalidParameter(format!(
                    "cells ({}, {}) and ({}, {}) overlap",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        for c in &cells {
            if c.return_time == 0 || c.hi <= c.lo {
                return Err(Error::InvalidParameter("cells need positive length and return time".into()));
            }
            match (&c.map, &map) {
                (CellMap::Itinerary(it), Some(m)) => {
                    if it.len() != c.return_time as usize || it.iter().any(|&b| b as usize >= m.branches().len()) {
                        return Err(Error::InvalidParameter("itinerary inconsistent with return time".into()));
                    }
                }
                (CellMap::Itinerary(_), None) => {
                    return Err(Error::InvalidParameter("itinerary cells need an underlying map".into()));
                }
                _ => {}
            }
        }
        if matches!(projection, Projection::Itinerary) && map.is_none() {
            return Err(Error::InvalidParameter("itinerary projection needs an underlying map".into()));
        }
        let n_max = cells.iter().map(|c| c.return_time).max().unwrap_or(0);
        Ok(InducingScheme {
            name: name.into(),
            base,
            cells,
            map,
            tail_mass,
            n_max,
            distortion,
            tail,
            projection,
        })
    }

    pub fn base(&self) -> (f64, f64) {
        self.base
    }

    pub fn base_len(&self) -> f64 {
        self.base.1 - self.base.0
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn map(&self) -> Option<&Arc<PiecewiseMap1D>> {
        self.map.as_ref()
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn distortion(&self) -> DistortionConstants {
        self.distortion
    }

    pub fn tail_model(&self) -> TailModel {
        self.tail
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.cells.iter().all(|c| match &c.map {
            CellMap::Affine { .. } => true,
            CellMap::Itinerary(it) => {
                let m = self.map.as_ref().expect("validated");
                it.iter().all(|&b| m.branches()[b as usize].is_affine())
            }
        })
    }

    /// Index of the cell containing `x` (open cells).
    pub fn cell_index(&self, x: f64) -> Result<usize> {
        let k = self.cells.partition_point(|c| c.hi <= x);
        match self.cells.get(k) {
            Some(c) if c.contains(x) => Ok(k),
            _ => Err(Error::TruncatedCell { x }),
        }
    }

    /// `F(x)` and `J_F(x)` for `x` in cell `i`.
    pub fn cell_eval(&self, i: usize, x: f64) -> (f64, f64) {
        let cell = &self.cells[i];
        match &cell.map {
            CellMap::Affine { slope, intercept } => (slope * x + intercept, slope.abs()),
            CellMap::Itinerary(it) => {
                let m = self.map.as_ref().expect("validated");
                let mut y = x;
                let mut jac = 1.0;
                for &b in it {
                    let br = &m.branches()[b as usize];
                    jac *= br.deriv(y).abs();
                    y = br.value(y);
                }
                (y, jac)
            }
        }
    }

    /// `log J_F(x)` for `x` in cell `i`, accumulated as a sum of logs.
    pub fn cell_log_jacobian(&self, i: usize, x: f64) -> f64 {
        let cell = &self.cells[i];
        match &cell.map {
            CellMap::Affine { slope, .. } => slope.abs().ln(),
            CellMap::Itinerary(it) => {
                let m = self.map.as_ref().expect("validated");
                let mut y = x;
                let mut acc = 0.0;
                for &b in it {
                    let br = &m.branches()[b as usize];
                    acc += br.deriv(y).abs().ln();
                    y = br.value(y);
                }
                acc
            }
        }
    }

    /// Cell index, `F(x)` and `J_F(x)`.
    pub fn induced(&self, x: f64) -> Result<(usize, f64, f64)> {
        let i = self.cell_index(x)?;
        let (y, j) = self.cell_eval(i, x);
        Ok((i, y, j))
    }

    /// `f^ℓ(x)` for `x` in cell `i` and `ℓ <= R_i`, realised through the
    /// scheme's projection.
    pub fn partial_orbit(&self, i: usize, x: f64, level: u32) -> Result<f64> {
        let cell = &self.cells[i];
        if level > cell.return_time {
            return Err(Error::InvalidLevel { level, return_time: cell.return_time });
        }
        match (&self.projection, &cell.map) {
            (Projection::Itinerary, CellMap::Itinerary(it)) => {
                let m = self.map.as_ref().expect("validated");
                let mut y = x;
                for &b in &it[..level as usize] {
                    y = m.branches()[b as usize].value(y);
                }
                Ok(y)
            }
            (Projection::LevelLayout { offsets }, _) => {
                if level == cell.return_time {
                    let (y, _) = self.cell_eval(i, x);
                    Ok(offsets[0] + y)
                } else {
                    Ok(offsets[level as usize] + x)
                }
            }
            (Projection::Itinerary, CellMap::Affine { .. }) => {
                Err(Error::InvalidParameter("affine cells cannot be projected through an itinerary".into()))
            }
        }
    }

    /// Advances a point of the column over cell `i` from level `level` to
    /// `level + 1` in projected coordinates: `y = f^ℓ(x) ↦ f^{ℓ+1}(x)`.
    /// Only valid for itinerary projections and `level + 1 < R_i`.
    pub fn advance_in_column(&self, i: usize, level: u32, y: f64) -> f64 {
        match &self.cells[i].map {
            CellMap::Itinerary(it) => {
                let m = self.map.as_ref().expect("validated");
                m.branches()[it[level as usize] as usize].value(y)
            }
            CellMap::Affine { .. } => f64::NAN,
        }
    }

    /// Calls `visit(cell, preimages)` for every cell, where `preimages[k]`
    /// is the unique point of the cell mapped by `F` to `ys[k]`. All `ys`
    /// must lie in the base. Itinerary inverses are shared between cells
    /// whose reversed itineraries have a common prefix.
    pub fn for_each_cell_preimages<V: FnMut(usize, &[f64])>(&self, ys: &[f64], mut visit: V) -> Result<()> {
        let mut affine_buf = vec![0.0; ys.len()];
        let mut itinerary_cells: Vec<(usize, Vec<u32>)> = Vec::new();
        for (i, cell) in self.cells.iter().enumerate() {
            match &cell.map {
                CellMap::Affine { slope, intercept } => {
                    for (dst, &y) in affine_buf.iter_mut().zip(ys) {
                        *dst = (y - intercept) / slope;
                    }
                    visit(i, &affine_buf);
                }
                CellMap::Itinerary(it) => itinerary_cells.push((i, it.iter().rev().copied().collect())),
            }
        }
        if itinerary_cells.is_empty() {
            return Ok(());
        }
        let map = self.map.as_ref().expect("validated");
        itinerary_cells.sort_by(|a, b| a.1.cmp(&b.1));
        // stack[k] = ys pulled back through rev[0..=k]
        let mut stack: Vec<(u32, Vec<f64>)> = Vec::new();
        for (i, rev) in &itinerary_cells {
            let common = stack.iter().zip(rev.iter()).take_while(|((b, _), r)| b == *r).count();
            stack.truncate(common);
            for &b in &rev[common..] {
                let branch = &map.branches()[b as usize];
                let prev: &[f64] = stack.last().map_or(ys, |(_, v)| v.as_slice());
                let next = prev.iter().map(|&y| branch.inverse(y)).collect::<Result<Vec<f64>>>()?;
                stack.push((b, next));
            }
            visit(*i, &stack.last().expect("non-empty itinerary").1);
        }
        Ok(())
    }

    /// `Σ |ω_i| + tail_mass - |Δ₀|`.
    pub fn mass_defect(&self) -> f64 {
        let mut acc = KahanSum::new();
        for c in &self.cells {
            acc.add(c.mass);
        }
        acc.add(self.tail_mass);
        acc.value() - self.base_len()
    }

    /// Largest distance between the image of a cell's endpoints and the
    /// base endpoints (orientation-adjusted).
    pub fn markov_defect(&self) -> f64 {
        let (lo, hi) = self.base;
        let mut worst: f64 = 0.0;
        for (i, c) in self.cells.iter().enumerate() {
            let (a, _) = self.cell_eval(i, c.lo);
            let (b, _) = self.cell_eval(i, c.hi);
            let (img_lo, img_hi) = (a.min(b), a.max(b));
            worst = worst.max((img_lo - lo).abs()).max((img_hi - hi).abs());
        }
        worst
    }

    /// Lebesgue mass of `{R = n}` for `n = 1..=n_max` (index `n - 1`).
    pub fn return_time_masses(&self) -> Vec<f64> {
        let mut masses = vec![0.0; self.n_max as usize];
        for c in &self.cells {
            masses[c.return_time as usize - 1] += c.mass;
        }
        masses
    }

    /// Lebesgue mass of `{R > n}` for `n = 0..=n_max` (including the tail).
    pub fn tail_masses(&self) -> Vec<f64> {
        let masses = self.return_time_masses();
        let mut out = vec![0.0; masses.len() + 1];
        let mut acc = KahanSum::new();
        acc.add(self.tail_mass);
        out[masses.len()] = acc.value();
        for n in (0..masses.len()).rev() {
            acc.add(masses[n]);
            out[n] = acc.value();
        }
        out
    }

    /// Upper bound on `Σ_{n>N} w(n) m(R = n)` over all cells with return
    /// time above `N`, computed cells included, omitted cells modelled.
    pub fn tail_bound(&self, weight: TailWeight, n: u32) -> f64 {
        match self.tail {
            TailModel::Exact => {
                let mut acc = KahanSum::new();
                for (i, c) in self.cells.iter().enumerate() {
                    if c.return_time > n {
                        let r = c.return_time as f64;
                        let lj = self.cell_max_log_jacobian(i).max(0.0);
                        acc.add(c.mass * weight_value(weight, r, lj));
                    }
                }
                acc.value()
            }
            TailModel::PowerLaw { exponent, log_jacobian_slope } => {
                power_law_tail(self, weight, n, exponent, log_jacobian_slope)
            }
            TailModel::Counterexample => crate::counterexample::tail_bound(self, weight, n),
        }
    }

    /// Largest `log J_F` over a cell, sampled at its endpoints and midpoint.
    pub fn cell_max_log_jacobian(&self, i: usize) -> f64 {
        let c = &self.cells[i];
        let eps = 1e-9 * c.len();
        [c.lo + eps, 0.5 * (c.lo + c.hi), c.hi - eps]
            .iter()
            .map(|&x| self.cell_log_jacobian(i, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Separation time of `x` and `y` under `F`, capped at `cap`.
    pub fn separation_time(&self, x: f64, y: f64, cap: u32) -> SeparationTime {
        let (mut u, mut v) = (x, y);
        for n in 0..cap {
            let (iu, iv) = match (self.cell_index(u), self.cell_index(v)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    return SeparationTime::Unresolved {
                        cap,
                        reason: format!("orbit left the covered cells at step {n}"),
                    }
                }
            };
            if iu != iv {
                return SeparationTime::Resolved { n };
            }
            u = self.cell_eval(iu, u).0;
            v = self.cell_eval(iv, v).0;
        }
        SeparationTime::Unresolved { cap, reason: "iteration cap reached".into() }
    }

    /// Checks the Gibbs distortion bound on `n_pairs` random same-cell pairs.
    pub fn check_gibbs_markov(&self, n_pairs: usize, seed: u64) -> DistortionReport {
        const CAP: u32 = 60;
        const CHUNK: usize = 1024;
        let betas: Vec<f64> = (0..10).map(|k| 0.5 + 0.05 * k as f64).collect();
        let covered: f64 = self.cells.iter().map(Cell::len).sum();
        let chunks = n_pairs.div_ceil(CHUNK);
        let samples: Vec<Vec<(f64, Option<u32>)>> = map_indexed(chunks, |c| {
            use rand::Rng;
            let mut rng = stream_rng(seed, c as u64);
            let count = CHUNK.min(n_pairs - c * CHUNK);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                // cell chosen with probability proportional to its length
                let target = rng.random::<f64>() * covered;
                let i = self.cell_by_cumulative(target);
                let cell = &self.cells[i];
                let x = cell.lo + cell.len() * rng.random::<f64>();
                let y = cell.lo + cell.len() * rng.random::<f64>();
                if !cell.contains(x) || !cell.contains(y) {
                    out.push((0.0, None));
                    continue;
                }
                let ratio = (self.cell_log_jacobian(i, x) - self.cell_log_jacobian(i, y)).abs();
                let (fx, _) = self.cell_eval(i, x);
                let (fy, _) = self.cell_eval(i, y);
                let s = match self.separation_time(fx, fy, CAP) {
                    SeparationTime::Resolved { n } => Some(n),
                    SeparationTime::Unresolved { .. } => None,
                };
                out.push((ratio, s));
            }
            out
        });
        let mut max_ratio: f64 = 0.0;
        let mut unresolved = 0;
        let mut by_beta = vec![0.0f64; betas.len()];
        let mut declared_max: f64 = 0.0;
        for &(ratio, s) in samples.iter().flatten() {
            max_ratio = max_ratio.max(ratio);
            let Some(s) = s else {
                unresolved += 1;
                continue;
            };
            for (k, &b) in betas.iter().enumerate() {
                by_beta[k] = by_beta[k].max(ratio / b.powi(s as i32));
            }
            declared_max = declared_max.max(ratio / self.distortion.beta.powi(s as i32));
        }
        let fitted = betas.iter().zip(&by_beta).find(|(_, &c)| c < 1e3);
        let verdict = if declared_max <= self.distortion.c { "pass" } else { "fail" };
        DistortionReport {
            fitted_c: fitted.map(|(_, &c)| c),
            fitted_beta: fitted.map(|(&b, _)| b),
            max_ratio,
            ratio_by_beta: betas.iter().copied().zip(by_beta).collect(),
            n_pairs,
            unresolved_count: unresolved,
            declared: self.distortion,
            verdict: verdict.into(),
        }
    }

    fn cell_by_cumulative(&self, target: f64) -> usize {
        let mut acc = 0.0;
        for (i, c) in self.cells.iter().enumerate() {
            acc += c.len();
            if target < acc {
                return i;
            }
        }
        self.cells.len() - 1
    }
}

fn weight_value(weight: TailWeight, r: f64, log_j: f64) -> f64 {
    match weight {
        TailWeight::Mass => 1.0,
        TailWeight::ReturnTime => r,
        TailWeight::ReturnTimeSquared => r * r,
        TailWeight::LogJacobian => log_j,
        TailWeight::ReturnTimeLogJacobian => r * log_j,
    }
}

/// Tail sums under `m(R > n) <= k n^-p` and `log J_n <= c0 + c1 log n` for
/// `n > N`, via summation by parts.
fn power_law_tail(s: &InducingScheme, weight: TailWeight, n: u32, p: f64, c1: f64) -> f64 {
    let tails = s.tail_masses();
    let n_max = s.n_max as usize;
    let nn = (n as usize).min(n_max);
    let t = tails[nn];
    if t == 0.0 {
        return 0.0;
    }
    // fit k and c0 on the computed cells with return time in [N, n_max]
    let from = nn.max(1);
    let k = 1.25
        * (from..=n_max)
            .map(|j| tails[j] * (j as f64).powf(p))
            .fold(0.0, f64::max);
    let mut c0 = f64::NEG_INFINITY;
    for (i, c) in s.cells.iter().enumerate() {
        if (c.return_time as usize) >= from {
            c0 = c0.max(s.cell_max_log_jacobian(i) - c1 * (c.return_time as f64).ln());
        }
    }
    let c0 = if c0.is_finite() { c0 + 0.1 } else { 0.0 };
    let nf = nn as f64;
    let np1 = nf + 1.0;
    let sum_mass = t;
    let sum_r = np1 * t + k * nf.powf(1.0 - p) / (p - 1.0);
    let sum_log = t * np1.ln() + k * nf.powf(-p) / p;
    let q = p - 1.0;
    let sum_r_log = np1 * np1.ln() * t + k * nf.powf(-q) * (nf.ln() / q + 1.0 / (q * q) + 2.0 / q);
    match weight {
        TailWeight::Mass => sum_mass,
        TailWeight::ReturnTime => sum_r,
        TailWeight::ReturnTimeSquared => {
            if p <= 2.0 {
                f64::INFINITY
            } else {
                np1 * np1 * t + k * (2.0 * nf.powf(2.0 - p) / (p - 2.0) + 2.0 * nf.powf(1.0 - p) / (p - 1.0))
            }
        }
        TailWeight::LogJacobian => c0.max(0.0) * sum_mass + c1 * sum_log,
        TailWeight::ReturnTimeLogJacobian => c0.max(0.0) * sum_r + c1 * sum_r_log,
    }
}

/// Trivial scheme `R ≡ 1` over a full-branch Markov map: the cells are the
/// branch domains and `F = f`.
pub fn trivial_scheme(map: &PiecewiseMap1D) -> Result<InducingScheme> {
    let (lo, hi) = map.phase_space().bounds();
    let tol = 1e-8;
    let mut cells = Vec::with_capacity(map.branches().len());
    for (i, b) in map.branches().iter().enumerate() {
        let (a, c) = b.image();
        if (a - lo).abs() > tol || (c - hi).abs() > tol {
            return Err(Error::NotFullBranch { index: i, lo: a, hi: c });
        }
        cells.push(Cell::new(b.lo, b.hi, 1, CellMap::Itinerary(vec![i as u32])));
    }
    InducingScheme::from_cells(
        format!("trivial[{}]", map.name),
        (lo, hi),
        cells,
        Some(Arc::new(map.clone())),
        0.0,
        DistortionConstants { c: 1.0, beta: 0.5 },
        TailModel::Exact,
        Projection::Itinerary,
    )
}

/// First-return scheme of the intermittent map on `Δ₀ = (1/2, 1)`.
///
/// With `x_1 = 1/2` and `x_{n+1} = g0^{-1}(x_n)`, the cell with return time
/// `n >= 2` is `g1^{-1}((x_n, x_{n-1}))` and the cell with return time 1 is
/// `g1^{-1}((1/2, 1)) = (3/4, 1)`. Cells with `R > n_max` form the tail
/// `(1/2, (1 + x_{n_max})/2)`.
pub fn build_lsv_scheme(alpha: f64, n_max: u32) -> Result<InducingScheme> {
    let map = crate::maps1d::lsv_map(alpha)?;
    if n_max < 2 {
        return Err(Error::InvalidParameter(format!("n_max must be at least 2 (got {n_max})")));
    }
    let g0 = map.branches()[0].clone();
    // escape thresholds x_1 > x_2 > ... > x_{n_max}
    let mut xs = Vec::with_capacity(n_max as usize);
    xs.push(0.5);
    for _ in 1..n_max {
        let target = *xs.last().unwrap();
        let x = bisect_newton(|x| g0.value(x) - target, |x| g0.deriv(x), 0.0, target, 1e-14)?;
        xs.push(x);
    }
    let mut cells = Vec::with_capacity(n_max as usize);
    cells.push(Cell::new(0.75, 1.0, 1, CellMap::Itinerary(vec![1])));
    for n in 2..=n_max as usize {
        let lo = 0.5 * (1.0 + xs[n - 1]);
        let hi = 0.5 * (1.0 + xs[n - 2]);
        if hi <= lo {
            return Err(Error::InvalidParameter(format!(
                "n_max = {n_max} resolves cells below double precision for alpha = {alpha}"
            )));
        }
        let mut it = vec![0u32; n];
        it[0] = 1;
        cells.push(Cell::new(lo, hi, n as u32, CellMap::Itinerary(it)));
    }
    let tail_mass = 0.5 * xs[n_max as usize - 1];
    if tail_mass > 0.25 {
        return Err(Error::TruncationTooCoarse { tail_mass });
    }
    InducingScheme::from_cells(
        format!("lsv(alpha={alpha}, n_max={n_max})"),
        (0.5, 1.0),
        cells,
        Some(Arc::new(map)),
        tail_mass,
        DistortionConstants { c: 100.0, beta: 0.9 },
        TailModel::PowerLaw { exponent: 1.0 / alpha, log_jacobian_slope: 1.0 + 1.0 / alpha },
        Projection::Itinerary,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps1d::{doubling_map, lorenz_like_map, lsv_map, PhaseSpace};
    use approx::assert_relative_eq;

    #[test]
    fn lsv_first_cell_and_jacobian() {
        let s = build_lsv_scheme(0.5, 2).unwrap();
        let c1 = s.cells().iter().find(|c| c.return_time == 1).unwrap();
        assert_eq!((c1.lo, c1.hi), (0.75, 1.0));
        let (_, fx, j) = s.induced(0.8).unwrap();
        assert_relative_eq!(fx, 0.6, epsilon = 1e-15);
        assert_eq!(j, 2.0);
    }

    #[test]
    fn lsv_bookkeeping_and_markov() {
        for &alpha in &[0.3, 0.5, 0.8] {
            let s = build_lsv_scheme(alpha, 200).unwrap();
            assert!(s.mass_defect().abs() < 1e-10, "alpha {alpha}: {}", s.mass_defect());
            assert!(s.markov_defect() < 1e-8, "alpha {alpha}: {}", s.markov_defect());
            for w in s.cells().windows(2) {
                assert!(w[0].hi <= w[1].lo);
            }
        }
    }

    #[test]
    fn lsv_tail_mass_follows_power_law() {
        // m(R > n) ~ n^{-1/α}: the ratio at n = 100 vs 400 is close to 4^{1/α}
        let alpha = 0.5;
        let t100 = build_lsv_scheme(alpha, 100).unwrap().tail_mass();
        let t400 = build_lsv_scheme(alpha, 400).unwrap().tail_mass();
        let expected = 4f64.powf(1.0 / alpha);
        let ratio = t100 / t400;
        assert!((ratio / expected - 1.0).abs() < 0.3, "ratio {ratio} vs {expected}");
    }

    #[test]
    fn lsv_chain_rule_matches_jacobian() {
        let s = build_lsv_scheme(0.4, 60).unwrap();
        let m = lsv_map(0.4).unwrap();
        for (i, c) in s.cells().iter().enumerate() {
            let x = 0.5 * (c.lo + c.hi);
            let (fx, j) = s.cell_eval(i, x);
            let mut y = x;
            let mut prod = 1.0;
            for _ in 0..c.return_time {
                let (v, d) = m.eval(y).unwrap();
                prod *= d;
                y = v;
            }
            assert_relative_eq!(j, prod, max_relative = 1e-8);
            assert_relative_eq!(fx, y, max_relative = 1e-8);
            assert_relative_eq!(s.cell_log_jacobian(i, x), j.ln(), max_relative = 1e-12);
        }
    }

    #[test]
    fn recurrence_integrability_under_refinement() {
        let alpha = 0.5;
        let sums: Vec<(f64, InducingScheme)> = [100u32, 200, 400]
            .iter()
            .map(|&n| {
                let s = build_lsv_scheme(alpha, n).unwrap();
                let r: f64 = s.cells().iter().map(|c| c.return_time as f64 * c.len()).sum();
                (r, s)
            })
            .collect();
        for w in sums.windows(2) {
            let bound = w[0].1.tail_bound(TailWeight::ReturnTime, w[0].1.n_max());
            assert!((w[1].0 - w[0].0).abs() <= bound, "{} vs bound {bound}", (w[1].0 - w[0].0).abs());
        }
    }

    #[test]
    fn trivial_scheme_of_doubling_and_lorenz() {
        let s = trivial_scheme(&doubling_map()).unwrap();
        assert_eq!(s.cells().len(), 2);
        assert!(s.cells().iter().all(|c| c.return_time == 1));
        assert_eq!(s.induced(0.3).unwrap().2, 2.0);
        let l = trivial_scheme(&lorenz_like_map(0.25).unwrap()).unwrap();
        let bounds: Vec<(f64, f64)> = l.cells().iter().map(|c| (c.lo, c.hi)).collect();
        assert_eq!(bounds, vec![(-0.5, 0.0), (0.0, 0.5)]);
    }

    #[test]
    fn trivial_scheme_rejects_non_markov_map() {
        let m = PiecewiseMap1D::piecewise_linear(
            "short",
            PhaseSpace::Interval { lo: 0.0, hi: 1.0 },
            &[(0.0, 0.5, 0.0, 1.0), (0.5, 1.0, 0.0, 0.9)],
        )
        .unwrap();
        assert!(matches!(trivial_scheme(&m), Err(Error::NotFullBranch { index: 1, .. })));
    }

    #[test]
    fn separation_time_examples() {
        let s = trivial_scheme(&doubling_map()).unwrap();
        assert_eq!(s.separation_time(0.2, 0.7, 60), SeparationTime::Resolved { n: 0 });
        let x = 0.1;
        let y = 0.1 + 2f64.powi(-10);
        // binary oracle: first differing digit of x and y
        let digit = |v: f64, k: i32| ((v * 2f64.powi(k + 1)).floor() as u64) & 1;
        let first_diff = (0..60).find(|&k| digit(x, k) != digit(y, k)).unwrap() as u32;
        match s.separation_time(x, y, 60) {
            SeparationTime::Resolved { n } => {
                assert_eq!(n, first_diff);
                assert!(n == 9 || n == 10);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(s.separation_time(0.3, 0.3, 60), SeparationTime::Unresolved { cap: 60, .. }));
    }

    #[test]
    fn distortion_report_for_linear_and_lsv() {
        let s = trivial_scheme(&doubling_map()).unwrap();
        let r = s.check_gibbs_markov(2000, 1);
        assert_eq!(r.max_ratio, 0.0);
        assert_eq!(r.verdict, "pass");
        let lsv = build_lsv_scheme(0.5, 200).unwrap();
        let r = lsv.check_gibbs_markov(4000, 2);
        assert!(r.fitted_c.unwrap() < 1e3);
        assert!(r.fitted_beta.unwrap() < 1.0);
    }

    #[test]
    fn preimages_invert_the_induced_map() {
        let s = build_lsv_scheme(0.5, 40).unwrap();
        let ys: Vec<f64> = (1..20).map(|k| 0.5 + 0.5 * k as f64 / 20.0).collect();
        s.for_each_cell_preimages(&ys, |i, pre| {
            for (&x, &y) in pre.iter().zip(&ys) {
                let (fx, _) = s.cell_eval(i, x);
                assert!((fx - y).abs() < 1e-9, "cell {i}: F({x}) = {fx} != {y}");
                let c = &s.cells()[i];
                assert!(x >= c.lo - 1e-15 && x <= c.hi + 1e-15);
            }
        })
        .unwrap();
    }
}
