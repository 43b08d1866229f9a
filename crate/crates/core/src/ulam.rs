//! Ulam discretisation of transfer operators on a uniform bin grid.
//!
//! Entries are exact Lebesgue proportions: the preimage of each target bin
//! under each branch is an interval computed from branch inverses, and its
//! length is split across the source bins it overlaps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inducing::{CellMap, InducingScheme};
use crate::maps1d::PiecewiseMap1D;
use crate::quad::{gauss_legendre, pairwise_sum};

pub const ULAM_TOL: f64 = 1e-12;
pub const ULAM_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || hi <= lo || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("bad grid ({lo}, {hi}) with {bins} bins")));
        }
        Ok(Grid { lo, hi, bins })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn edge(&self, k: usize) -> f64 {
        if k == self.bins {
            self.hi
        } else {
            self.lo + self.width() * k as f64
        }
    }

    /// Bin containing `x`, clamped to the grid.
    pub fn bin_of(&self, x: f64) -> usize {
        let k = ((x - self.lo) / self.width()).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.bins - 1)
        }
    }

    /// Calls `visit(bin, overlap_length)` for every bin meeting `(a, b)`.
    pub fn split<V: FnMut(usize, f64)>(&self, a: f64, b: f64, mut visit: V) {
        let (a, b) = (a.max(self.lo), b.min(self.hi));
        if b <= a {
            return;
        }
        let first = self.bin_of(a);
        let last = self.bin_of(b);
        for k in first..=last {
            let lo = a.max(self.edge(k));
            let hi = b.min(self.edge(k + 1));
            if hi > lo {
                visit(k, hi - lo);
            }
        }
    }
}

/// Row-stochastic (up to leakage) transition matrix in CSR form by source bin.
#[derive(Debug, Clone)]
pub struct UlamMatrix {
    grid: Grid,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

struct Triplets {
    grid: Grid,
    entries: Vec<(u32, u32, f64)>,
}

impl Triplets {
    fn new(grid: Grid) -> Self {
        Triplets { grid, entries: Vec::new() }
    }

    /// Mass moved from the source interval `(a, b)` into target bin `j`.
    fn add_piece(&mut self, a: f64, b: f64, j: usize) {
        self.add_scaled_piece(a, b, j, 1.0, None);
    }

    /// As [`Triplets::add_piece`] with lengths multiplied by `scale`. When
    /// `exact` is given and the piece sits inside one source bin, it
    /// replaces the length `b - a`, which loses relative precision for
    /// pieces far shorter than their distance from the origin.
    fn add_scaled_piece(&mut self, a: f64, b: f64, j: usize, scale: f64, exact: Option<f64>) {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let h = self.grid.width();
        if let Some(len) = exact {
            let i = self.grid.bin_of(a);
            if i == self.grid.bin_of(b) {
                self.entries.push((i as u32, j as u32, len / h));
                return;
            }
        }
        let entries = &mut self.entries;
        self.grid.split(a, b, |i, len| entries.push((i as u32, j as u32, scale * len / h)));
    }

    fn finish(mut self) -> UlamMatrix {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; self.grid.bins + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(u32, u32)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i as usize + 1] += 1;
                last = Some((i, j));
            }
        }
        for k in 0..self.grid.bins {
            row_ptr[k + 1] += row_ptr[k];
        }
        UlamMatrix { grid: self.grid, row_ptr, cols, vals }
    }
}

/// Ulam matrix of an interval map on `bins` bins of its phase space.
pub fn ulam_matrix_map(map: &PiecewiseMap1D, bins: usize) -> Result<UlamMatrix> {
    let (lo, hi) = map.phase_space().bounds();
    let grid = Grid::new(lo, hi, bins)?;
    let mut t = Triplets::new(grid);
    for br in map.branches() {
        let (y_lo, y_hi) = br.image();
        let pre = |y: f64| -> Result<f64> {
            if y <= y_lo {
                Ok(if br.orientation() > 0.0 { br.lo } else { br.hi })
            } else if y >= y_hi {
                Ok(if br.orientation() > 0.0 { br.hi } else { br.lo })
            } else {
                br.inverse(y)
            }
        };
        let first = grid.bin_of(y_lo.max(lo));
        let last = grid.bin_of(y_hi.min(hi));
        for j in first..=last {
            let a = grid.edge(j).max(y_lo);
            let b = grid.edge(j + 1).min(y_hi);
            if b > a {
                t.add_piece(pre(a)?, pre(b)?, j);
            }
        }
    }
    Ok(t.finish())
}

/// Ulam matrix of the induced map `F` on `bins` bins of the base. Mass in
/// the omitted tail cells leaks and is restored by renormalisation.
/// Pieces are rescaled by `mass / (hi - lo)` so cells whose endpoints round
/// still carry their exact mass.
pub fn ulam_matrix_scheme(scheme: &InducingScheme, bins: usize) -> Result<UlamMatrix> {
    let (lo, hi) = scheme.base();
    let grid = Grid::new(lo, hi, bins)?;
    let ys: Vec<f64> = (0..=bins).map(|k| grid.edge(k)).collect();
    let mut t = Triplets::new(grid);
    let cells = scheme.cells();
    scheme.for_each_cell_preimages(&ys, |i, pre| {
        let c = &cells[i];
        let scale = if c.len() > 0.0 { c.mass / c.len() } else { 1.0 };
        let slope = match &c.map {
            CellMap::Affine { slope, .. } => Some(slope.abs()),
            CellMap::Itinerary(_) => None,
        };
        for j in 0..bins {
            let exact = slope.map(|k| (ys[j + 1] - ys[j]) / k);
            t.add_scaled_piece(pre[j], pre[j + 1], j, scale, exact);
        }
    })?;
    Ok(t.finish())
}

impl UlamMatrix {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `Σ_i w_i P_i` over matrices on the same grid.
    pub fn combine(parts: &[(f64, &UlamMatrix)]) -> Result<UlamMatrix> {
        let grid = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("nothing to combine".into()))?
            .1
            .grid;
        let mut t = Triplets::new(grid);
        for &(w, m) in parts {
            if m.grid != grid {
                return Err(Error::InvalidParameter("Ulam matrices on different grids".into()));
            }
            for i in 0..grid.bins {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    t.entries.push((i as u32, m.cols[k], w * m.vals[k]));
                }
            }
        }
        Ok(t.finish())
    }

    /// Row sums; `1 - row_sum` is the mass a bin leaks.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.grid.bins)
            .map(|i| pairwise_sum(&self.vals[self.row_ptr[i]..self.row_ptr[i + 1]]))
            .collect()
    }

    /// Pushes bin masses forward one step.
    pub fn apply(&self, mass: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.bins];
        for (i, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k] as usize] += m * self.vals[k];
            }
        }
        out
    }

    /// Power iteration from the uniform density, renormalising leaked mass,
    /// until the L¹ increment drops below `tol`.
    pub fn fixed_point(&self, tol: f64, max_iter: usize) -> Result<UlamDensity> {
        let n = self.grid.bins;
        let mut mass = vec![1.0 / n as f64; n];
        let mut increment = f64::INFINITY;
        for it in 1..=max_iter {
            let mut next = self.apply(&mass);
            let total = pairwise_sum(&next);
            if total <= 0.0 {
                return Err(Error::InvalidParameter("transfer matrix leaks all mass".into()));
            }
            next.iter_mut().for_each(|v| *v /= total);
            let diffs: Vec<f64> = next.iter().zip(&mass).map(|(a, b)| (a - b).abs()).collect();
            increment = pairwise_sum(&diffs);
            mass = next;
            if increment < tol {
                return Ok(UlamDensity { grid: self.grid, mass, iterations: it, increment });
            }
        }
        Err(Error::UlamNoConvergence { iterations: max_iter, increment })
    }

    pub fn stationary(&self) -> Result<UlamDensity> {
        self.fixed_point(ULAM_TOL, ULAM_MAX_ITER)
    }
}

/// Piecewise-constant probability density on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UlamDensity {
    pub grid: Grid,
    /// Probability mass per bin.
    pub mass: Vec<f64>,
    pub iterations: usize,
    pub increment: f64,
}

impl UlamDensity {
    pub fn uniform(grid: Grid) -> Self {
        UlamDensity { grid, mass: vec![1.0 / grid.bins as f64; grid.bins], iterations: 0, increment: 0.0 }
    }

    pub fn density(&self, bin: usize) -> f64 {
        self.mass[bin] / self.grid.width()
    }

    pub fn density_at(&self, x: f64) -> f64 {
        if x < self.grid.lo || x > self.grid.hi {
            0.0
        } else {
            self.density(self.grid.bin_of(x))
        }
    }

    /// `∫_a^b g ρ dx`, with an 8-point Gauss rule on each bin piece.
    pub fn integrate_over<G: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut g: G) -> f64 {
        let mut acc = 0.0;
        let grid = self.grid;
        grid.split(a, b, |k, _| {
            let lo = a.max(grid.edge(k));
            let hi = b.min(grid.edge(k + 1));
            acc += self.density(k) * gauss_legendre(&mut g, lo, hi);
        });
        acc
    }

    /// Largest `|ρ/ρ̄ - 1|` over bins, `ρ̄` the uniform density.
    pub fn sup_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / self.grid.bins as f64;
        self.mass.iter().map(|&m| (m / u - 1.0).abs()).fold(0.0, f64::max)
    }

    /// L¹ distance of bin masses to another density on the same grid.
    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        let d: Vec<f64> = self.mass.iter().zip(other).map(|(a, b)| (a - b).abs()).collect();
        pairwise_sum(&d)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_lo,bin_hi,density")?;
        for k in 0..self.grid.bins {
            writeln!(out, "{:e},{:e},{:e}", self.grid.edge(k), self.grid.edge(k + 1), self.density(k))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inducing::{build_lsv_scheme, trivial_scheme};
    use crate::maps1d::{doubling_map, lorenz_like_map, lsv_map, singular_intermittent_map};

    #[test]
    fn doubling_matrix_is_doubly_stochastic() {
        let m = ulam_matrix_map(&doubling_map(), 64).unwrap();
        for s in m.row_sums() {
            assert!((s - 1.0).abs() < 1e-14);
        }
        let d = m.stationary().unwrap();
        assert!(d.sup_deviation_from_uniform() < 1e-12);
    }

    #[test]
    fn singular_map_keeps_lebesgue() {
        let m = ulam_matrix_map(&singular_intermittent_map(2.0, 1e-14).unwrap(), 256).unwrap();
        let d = m.stationary().unwrap();
        assert!(d.sup_deviation_from_uniform() < 1e-6, "{}", d.sup_deviation_from_uniform());
    }

    #[test]
    fn lorenz_density_is_even() {
        let m = ulam_matrix_map(&lorenz_like_map(0.25).unwrap(), 200).unwrap();
        let d = m.stationary().unwrap();
        for k in 0..100 {
            assert!((d.mass[k] - d.mass[199 - k]).abs() < 1e-9);
        }
    }

    #[test]
    fn scheme_matrix_matches_map_matrix_for_trivial_scheme() {
        let map = lorenz_like_map(0.25).unwrap();
        let a = ulam_matrix_map(&map, 128).unwrap().stationary().unwrap();
        let b = ulam_matrix_scheme(&trivial_scheme(&map).unwrap(), 128).unwrap().stationary().unwrap();
        assert!(a.l1_distance(&b.mass) < 1e-9);
    }

    #[test]
    fn lsv_scheme_leaks_only_tail_mass() {
        let s = build_lsv_scheme(0.5, 100).unwrap();
        let m = ulam_matrix_scheme(&s, 256).unwrap();
        let leaked: f64 = m.row_sums().iter().map(|r| (1.0 - r) / 256.0 * s.base_len()).sum();
        assert!((leaked - s.tail_mass()).abs() < 1e-9, "{leaked} vs {}", s.tail_mass());
        let d = m.stationary().unwrap();
        assert!(d.mass.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn lsv_map_density_blows_up_at_zero() {
        let d = ulam_matrix_map(&lsv_map(0.5).unwrap(), 256).unwrap().stationary().unwrap();
        assert!(d.density(0) > 5.0 * d.density(255));
    }

    #[test]
    fn combine_is_linear() {
        let m = ulam_matrix_map(&doubling_map(), 32).unwrap();
        let c = UlamMatrix::combine(&[(0.25, &m), (0.75, &m)]).unwrap();
        for (a, b) in c.row_sums().iter().zip(m.row_sums()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
