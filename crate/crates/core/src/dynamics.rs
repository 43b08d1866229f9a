//! Orbit-level interface shared by the Monte Carlo estimators.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::maps1d::{PiecewiseMap1D, SkewProductMap};

/// A system that can be sampled and iterated one step at a time.
pub trait Dynamics: Sync {
    type State: Copy + Send;

    /// Draws a reference-measure (Lebesgue) random initial condition.
    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> Self::State;

    /// Next state together with `log |det Df|` at the current state.
    fn advance(&self, state: Self::State) -> Result<(Self::State, f64)>;

    /// Replacement for a state that hit the singular neighbourhood. The
    /// default draws a fresh start.
    fn recover(&self, _state: Self::State, rng: &mut ChaCha8Rng) -> Self::State {
        self.sample_initial(rng)
    }
}

/// Assigns a finite-alphabet symbol to each state.
pub trait Symbolizer<S>: Sync {
    fn alphabet(&self) -> usize;
    fn symbol(&self, state: &S) -> Option<usize>;
}

impl Dynamics for PiecewiseMap1D {
    type State = f64;

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> f64 {
        let (lo, hi) = self.phase_space().bounds();
        lo + (hi - lo) * rng.random::<f64>()
    }

    #[inline]
    fn advance(&self, x: f64) -> Result<(f64, f64)> {
        let (v, d) = self.eval(x)?;
        Ok((v, d.ln()))
    }
}

impl Dynamics for SkewProductMap {
    type State = (f64, f64);

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        (rng.random::<f64>(), rng.random::<f64>())
    }

    fn advance(&self, (x, y): (f64, f64)) -> Result<((f64, f64), f64)> {
        let (next, det) = self.eval(x, y)?;
        Ok((next, det.ln()))
    }

    /// Keeps `x` and redraws `y` when only the base coordinate is at fault.
    /// The future base digits are independent of the fiber state, so this
    /// preserves the stationary law of `x`.
    fn recover(&self, (x, _): (f64, f64), rng: &mut ChaCha8Rng) -> (f64, f64) {
        if self.fiber(0.0).eval(x).is_ok() {
            (x, rng.random::<f64>())
        } else {
            self.sample_initial(rng)
        }
    }
}

/// Finite partition of an interval into consecutive cells.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPartition {
    /// Cell boundaries, strictly increasing; cell `k` is `(edges[k], edges[k+1])`.
    edges: Vec<f64>,
}

impl IntervalPartition {
    /// Builds a partition from consecutive intervals, merging cells shorter
    /// than `10 * f64::EPSILON` into their left neighbour (or the right one
    /// for the first cell).
    pub fn from_intervals(cells: &[(f64, f64)]) -> Self {
        let mut edges = Vec::with_capacity(cells.len() + 1);
        if let Some(&(lo, _)) = cells.first() {
            edges.push(lo);
        }
        for &(_, hi) in cells {
            edges.push(hi);
        }
        let min_len = 10.0 * f64::EPSILON;
        let mut merged: Vec<f64> = Vec::with_capacity(edges.len());
        for &e in &edges {
            match merged.last() {
                Some(&last) if e - last < min_len && merged.len() > 1 => {
                    *merged.last_mut().unwrap() = e;
                }
                Some(&last) if e - last < min_len => {}
                _ => merged.push(e),
            }
        }
        IntervalPartition { edges: merged }
    }

    /// Partition by branch domains.
    pub fn from_map(map: &PiecewiseMap1D) -> Self {
        let cells: Vec<(f64, f64)> = map.branches().iter().map(|b| (b.lo, b.hi)).collect();
        IntervalPartition::from_intervals(&cells)
    }

    pub fn cells(&self) -> usize {
        self.edges.len().saturating_sub(1)
    }
}

impl Symbolizer<f64> for IntervalPartition {
    fn alphabet(&self) -> usize {
        self.cells()
    }

    fn symbol(&self, x: &f64) -> Option<usize> {
        let n = self.cells();
        if n == 0 || *x < self.edges[0] || *x > self.edges[n] {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= *x);
        Some(k.saturating_sub(1).min(n - 1))
    }
}

/// Four-cell partition of the skew product by `x = 1/2` and `y = p0`.
#[derive(Debug, Clone, Copy)]
pub struct SkewProductPartition {
    pub p0: f64,
}

impl Symbolizer<(f64, f64)> for SkewProductPartition {
    fn alphabet(&self) -> usize {
        4
    }

    fn symbol(&self, &(x, y): &(f64, f64)) -> Option<usize> {
        Some(usize::from(x > 0.5) * 2 + usize::from(y > self.p0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_symbols() {
        let p = IntervalPartition::from_intervals(&[(0.0, 0.5), (0.5, 1.0)]);
        assert_eq!(p.symbol(&0.2), Some(0));
        assert_eq!(p.symbol(&0.7), Some(1));
        assert_eq!(p.symbol(&1.0), Some(1));
        assert_eq!(p.symbol(&1.5), None);
    }

    #[test]
    fn degenerate_cells_are_merged() {
        let p = IntervalPartition::from_intervals(&[(0.0, 0.5), (0.5, 0.5 + 1e-17), (0.5 + 1e-17, 1.0)]);
        assert_eq!(p.cells(), 2);
    }
}
