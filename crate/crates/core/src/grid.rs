//! Frequency grids and adaptive maximization over them.
//!
//! Evaluations at independent frequencies run in parallel; every reduction
//! is done sequentially afterwards (max by value, ties to the smallest
//! frequency) so results do not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for treating two maxima as tied.
pub const TIE_RTOL: f64 = 1e-9;

/// Upper limit on refined local maxima per sweep.
const MAX_REFINED: usize = 32;

/// One-sided log-spaced grid `[omega_min, omega_max]`, optionally with ω = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub include_zero: bool,
    /// Refinement stops when the bracket is narrower than `refine_rtol · (1 + ω)`.
    pub refine_rtol: f64,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self { omega_min: 1e-4, omega_max: 1e4, points: 201, include_zero: true, refine_rtol: 1e-6 }
    }
}

impl FrequencyGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_min > 0.0 && self.omega_max > self.omega_min && self.omega_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid needs 0 < omega_min < omega_max, got [{}, {}]",
                self.omega_min, self.omega_max
            )));
        }
        if self.points < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 points".into()));
        }
        if !(self.refine_rtol > 0.0) {
            return Err(Error::InvalidParameter("refinement tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Log-spaced points (plus 0 first when requested), ascending.
    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points + 1);
        if self.include_zero {
            out.push(0.0);
        }
        out.extend(log_space(self.omega_min, self.omega_max, self.points));
        out
    }

    /// Width of the refined bracket around a peak at `omega`.
    pub fn resolution_at(&self, omega: f64) -> f64 {
        self.refine_rtol * (1.0 + omega.abs())
    }
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// A located maximum (or minimum) of a frequency function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub value: f64,
    pub omega: f64,
}

fn score(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NEG_INFINITY)
}

/// Maximizes `f` over the grid, refining each local maximum by ternary
/// search until its bracket is below the grid's refinement window.
///
/// `f` returns `Ok(None)` at frequencies where it is undefined (a pole of
/// the plant data); such points are skipped.
pub fn maximize<F>(grid: &FrequencyGrid, f: F) -> Result<Extremum>
where
    F: Fn(f64) -> Result<Option<f64>> + Sync,
{
    grid.validate()?;
    let pts = grid.points();
    let vals: Vec<Result<Option<f64>>> = pts.par_iter().map(|&w| f(w)).collect();
    let vals: Vec<Option<f64>> = vals.into_iter().collect::<Result<_>>()?;

    let n = pts.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = score(vals[i]);
            v.is_finite()
                && (i == 0 || v >= score(vals[i - 1]))
                && (i + 1 == n || v >= score(vals[i + 1]))
        })
        .collect();
    if peaks.is_empty() {
        return Err(Error::Internal("function is undefined on the whole grid".into()));
    }
    peaks.sort_by(|&a, &b| score(vals[b]).total_cmp(&score(vals[a])).then(a.cmp(&b)));
    peaks.truncate(MAX_REFINED);

    let refined: Vec<Result<Extremum>> = peaks
        .par_iter()
        .map(|&i| {
            let lo = pts[i.saturating_sub(1)];
            let hi = pts[(i + 1).min(n - 1)];
            let start = Extremum { value: score(vals[i]), omega: pts[i] };
            refine(&f, lo, hi, start, grid.refine_rtol)
        })
        .collect();
    let refined: Vec<Extremum> = refined.into_iter().collect::<Result<_>>()?;
    Ok(pick(&refined))
}

/// Minimizes `f` over the grid (maximizes its negation).
pub fn minimize<F>(grid: &FrequencyGrid, f: F) -> Result<Extremum>
where
    F: Fn(f64) -> Result<Option<f64>> + Sync,
{
    let e = maximize(grid, |w| Ok(f(w)?.map(|v| -v)))?;
    Ok(Extremum { value: -e.value, omega: e.omega })
}

/// Largest value; among values tied within [`TIE_RTOL`], the smallest ω.
pub fn pick(candidates: &[Extremum]) -> Extremum {
    let best = candidates.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    let floor = best - TIE_RTOL * best.abs();
    candidates
        .iter()
        .filter(|c| c.value >= floor)
        .min_by(|a, b| a.omega.total_cmp(&b.omega))
        .copied()
        .expect("non-empty candidate list")
}

fn refine<F>(f: &F, mut lo: f64, mut hi: f64, start: Extremum, rtol: f64) -> Result<Extremum>
where
    F: Fn(f64) -> Result<Option<f64>>,
{
    // Golden-section search: one new evaluation per step.
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut best = start;
    let note = |w: f64, v: f64, best: &mut Extremum| {
        if v.is_finite() && v > best.value {
            *best = Extremum { value: v, omega: w };
        }
    };
    let mut m1 = hi - INV_PHI * (hi - lo);
    let mut m2 = lo + INV_PHI * (hi - lo);
    let mut v1 = score(f(m1)?);
    let mut v2 = score(f(m2)?);
    note(m1, v1, &mut best);
    note(m2, v2, &mut best);
    while hi - lo > rtol * (1.0 + best.omega.abs()) {
        if v1 < v2 {
            lo = m1;
            (m1, v1) = (m2, v2);
            m2 = lo + INV_PHI * (hi - lo);
            v2 = score(f(m2)?);
            note(m2, v2, &mut best);
        } else {
            hi = m2;
            (m2, v2) = (m1, v1);
            m1 = hi - INV_PHI * (hi - lo);
            v1 = score(f(m1)?);
            note(m1, v1, &mut best);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_grid_shape() {
        let g = FrequencyGrid::default();
        let p = g.points();
        assert_eq!(p.len(), 202);
        assert_eq!(p[0], 0.0);
        assert_relative_eq!(p[1], 1e-4, max_relative = 1e-14);
        assert_eq!(*p.last().unwrap(), 1e4);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn finds_interior_peak() {
        let target = 2.345_678;
        let e = maximize(&FrequencyGrid::default(), |w| Ok(Some(-(w - target).powi(2)))).unwrap();
        assert!((e.omega - target).abs() < 1e-5);
    }

    #[test]
    fn finds_peak_at_zero() {
        let e = maximize(&FrequencyGrid::default(), |w| Ok(Some(1.0 / (w * w + 4.0)))).unwrap();
        assert_eq!(e.omega, 0.0);
        assert_eq!(e.value, 0.25);
    }

    #[test]
    fn skips_undefined_points() {
        let e = maximize(&FrequencyGrid::default(), |w| {
            Ok(if w == 0.0 { None } else { Some(-(w - 1.0).abs()) })
        })
        .unwrap();
        assert!((e.omega - 1.0).abs() < 1e-5);
    }

    #[test]
    fn ties_resolve_to_smallest_frequency() {
        let e = maximize(&FrequencyGrid::default(), |_| Ok(Some(1.0))).unwrap();
        assert_eq!(e.omega, 0.0);
    }

    #[test]
    fn minimize_negates() {
        let e = minimize(&FrequencyGrid::default(), |w| Ok(Some((w - 3.0).powi(2) + 1.0))).unwrap();
        assert!((e.omega - 3.0).abs() < 1e-5);
        assert_relative_eq!(e.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_grid() {
        let g = FrequencyGrid { omega_min: 0.0, ..Default::default() };
        assert!(maximize(&g, |_| Ok(Some(0.0))).is_err());
    }
}
