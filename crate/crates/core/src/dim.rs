//! Fractal dimension estimators over per-level covers.
//!
//! All limits are replaced by finite-window least-squares fits; the window
//! and the truncation depth L are explicit parameters. The covering
//! functionals come in two flavors: the single-level minimum (restricted to
//! whole levels at or below the start level, truncated at L) and the exact
//! mixed-level minimum computed by a tree DP over the digitized set. At
//! finite truncation every countable cover contains a finite subcover of no
//! larger cost, so the DP serves both the finite and countable variants.
//!
//! Critical exponents are located by bisection on the sign of the fitted
//! growth slope of log H^s_n versus n: below the exponent the functional
//! grows with n, above it the finest-level cover is optimal and the value is
//! flat in n.

use crate::curve::CurveFamily;
use crate::error::{Error, Result};
use crate::grid::{Cell, FractalStructure};
use crate::region::{digitize, RegionOracle, TransportedOracle};
use serde::Serialize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Growth slopes smaller than this count as flat when bisecting for the
/// critical exponent.
const SLOPE_EPS: f64 = 1e-9;

/// Per-level count and cover diameter of a digitized set.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LevelCount {
    pub n: u32,
    #[serde(rename = "N")]
    pub count: u64,
    pub diam: f64,
}

/// Counts N_n and cover diameters over a contiguous level range.
#[derive(Debug, Clone)]
pub struct CountSeries {
    pub structure: FractalStructure,
    pub source: String,
    pub entries: Vec<LevelCount>,
}

impl CountSeries {
    pub fn n_min(&self) -> u32 {
        self.entries.first().map_or(0, |e| e.n)
    }

    pub fn n_max(&self) -> u32 {
        self.entries.last().map_or(0, |e| e.n)
    }

    pub fn entry(&self, n: u32) -> Option<&LevelCount> {
        self.entries.iter().find(|e| e.n == n)
    }

    fn window_entries(&self, window: (u32, u32)) -> Result<Vec<&LevelCount>> {
        if window.0 > window.1 || window.0 < self.n_min() || window.1 > self.n_max() {
            return Err(Error::InvalidConfig {
                field: "window".to_string(),
                reason: format!(
                    "window {:?} outside series levels [{}, {}]",
                    window,
                    self.n_min(),
                    self.n_max()
                ),
            });
        }
        Ok(self
            .entries
            .iter()
            .filter(|e| e.n >= window.0 && e.n <= window.1)
            .collect())
    }

    pub fn is_empty_set(&self) -> bool {
        self.entries.iter().all(|e| e.count == 0)
    }
}

/// Digitize a set at every level in `n_min..=n_max` (in parallel) and record
/// counts and cover diameters.
pub fn count_series(
    oracle: &dyn RegionOracle,
    fs: FractalStructure,
    n_min: u32,
    n_max: u32,
    threads: usize,
) -> Result<CountSeries> {
    let levels: Vec<u32> = (n_min..=n_max).collect();
    let covers = parallel_map(&levels, threads, |&n| digitize(oracle, fs, n))?;
    let entries = levels
        .iter()
        .zip(&covers)
        .map(|(&n, cover)| {
            // uniform diameter law: the sup over intersecting cells is the
            // level diameter whenever the cover is nonempty
            let diam = if cover.is_empty() {
                0.0
            } else {
                fs.level_diam(n)
            };
            LevelCount {
                n,
                count: cover.len(),
                diam,
            }
        })
        .collect();
    Ok(CountSeries {
        structure: fs,
        source: oracle.name(),
        entries,
    })
}

/// Run `f` over items on up to `threads` scoped workers, preserving order.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(&T) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let workers = threads.max(1).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let slots: Vec<Mutex<Option<Result<R>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

// ---------------------------------------------------------------------------
// least squares
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub max_abs_residual: f64,
    pub slope_stderr: f64,
}

/// Unweighted ordinary least squares of y against x.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateFit {
            reason: format!("need at least 2 points, got {}", xs.len()),
        });
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|&x| (x - mean_x) * (x - mean_x)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit {
            reason: "constant abscissae".to_string(),
        });
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| y - (slope * x + intercept))
        .collect();
    let max_abs_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let slope_stderr = if xs.len() > 2 {
        let rss: f64 = residuals.iter().map(|r| r * r).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(Fit {
        slope,
        intercept,
        max_abs_residual,
        slope_stderr,
    })
}

// ---------------------------------------------------------------------------
// report types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LevelEntry {
    pub n: u32,
    #[serde(rename = "N")]
    pub count: u64,
    pub diam: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub residual: f64,
    pub slope_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReducedInfo {
    pub domain_value: f64,
    pub exponent_d: f64,
    pub product: f64,
    pub gap: f64,
}

/// One estimator run: fitted value, per-level data, fit diagnostics, and the
/// reduced-pipeline block when a curve family was involved.
#[derive(Debug, Clone, Serialize)]
pub struct DimReport {
    pub estimator: String,
    pub set: String,
    pub structure: String,
    /// None when the digitized set is empty (estimators are undefined).
    pub value: Option<f64>,
    pub verdict: String,
    pub window: (u32, u32),
    pub levels: Vec<LevelEntry>,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduced: Option<ReducedInfo>,
}

impl DimReport {
    fn undefined(estimator: &str, series: &CountSeries, window: (u32, u32)) -> Self {
        DimReport {
            estimator: estimator.to_string(),
            set: series.source.clone(),
            structure: series.structure.name(),
            value: None,
            verdict: "undefined-empty-set".to_string(),
            window,
            levels: series
                .entries
                .iter()
                .map(|e| LevelEntry {
                    n: e.n,
                    count: e.count,
                    diam: e.diam,
                    h: None,
                })
                .collect(),
            diagnostics: Diagnostics {
                residual: 0.0,
                slope_stderr: 0.0,
            },
            reduced: None,
        }
    }
}

// ---------------------------------------------------------------------------
// box-type estimators
// ---------------------------------------------------------------------------

fn fit_report(
    estimator: &str,
    series: &CountSeries,
    window: (u32, u32),
    xs: Vec<f64>,
    entries: Vec<&LevelCount>,
) -> Result<DimReport> {
    let ys: Vec<f64> = entries.iter().map(|e| (e.count as f64).ln()).collect();
    let fit = ols(&xs, &ys)?;
    Ok(DimReport {
        estimator: estimator.to_string(),
        set: series.source.clone(),
        structure: series.structure.name(),
        value: Some(fit.slope),
        verdict: "ok".to_string(),
        window,
        levels: series
            .entries
            .iter()
            .map(|e| LevelEntry {
                n: e.n,
                count: e.count,
                diam: e.diam,
                h: None,
            })
            .collect(),
        diagnostics: Diagnostics {
            residual: fit.max_abs_residual,
            slope_stderr: fit.slope_stderr,
        },
        reduced: None,
    })
}

/// Count exponent with the fixed denominator n·log 2, independent of the
/// structure's diameter law.
pub fn dim1(series: &CountSeries, window: (u32, u32)) -> Result<DimReport> {
    if series.is_empty_set() {
        return Ok(DimReport::undefined("dim1", series, window));
    }
    let entries = series.window_entries(window)?;
    if let Some(e) = entries.iter().find(|e| e.count == 0) {
        return Err(Error::EmptyCover { level: e.n });
    }
    let xs: Vec<f64> = entries
        .iter()
        .map(|e| e.n as f64 * std::f64::consts::LN_2)
        .collect();
    fit_report("dim1", series, window, xs, entries)
}

/// Count exponent against the cover diameter: slope of log N_n on
/// -log diam(F, Γ_n). On the cube structures this is the grid box-counting
/// dimension.
pub fn dim2(series: &CountSeries, window: (u32, u32)) -> Result<DimReport> {
    dim2_as(series, window, "dim2")
}

fn dim2_as(series: &CountSeries, window: (u32, u32), id: &str) -> Result<DimReport> {
    if series.is_empty_set() {
        return Ok(DimReport::undefined(id, series, window));
    }
    let entries = series.window_entries(window)?;
    if let Some(e) = entries.iter().find(|e| e.count == 0) {
        return Err(Error::EmptyCover { level: e.n });
    }
    if let Some(e) = entries.iter().find(|e| e.diam >= 1.0) {
        return Err(Error::InvalidConfig {
            field: "window".to_string(),
            reason: format!("cover diameter {} at level {} is not < 1", e.diam, e.n),
        });
    }
    let xs: Vec<f64> = entries.iter().map(|e| -e.diam.ln()).collect();
    fit_report(id, series, window, xs, entries)
}

// ---------------------------------------------------------------------------
// covering functionals
// ---------------------------------------------------------------------------

/// Minimum cost over single-level covers drawn from levels `start..=L` where
/// L is the series truncation: min_l N_l * diam_l^s. This is the truncated
/// proxy for the level-restricted covering functional.
pub fn single_level_min_cost(series: &CountSeries, s: f64, start: u32) -> Result<f64> {
    if start < series.n_min() || start > series.n_max() {
        return Err(Error::InvalidConfig {
            field: "n".to_string(),
            reason: format!(
                "start level {start} outside series [{}, {}]",
                series.n_min(),
                series.n_max()
            ),
        });
    }
    Ok(series
        .entries
        .iter()
        .filter(|e| e.n >= start)
        .map(|e| e.count as f64 * e.diam.powf(s))
        .fold(f64::INFINITY, f64::min))
}

/// Exact minimum of Σ diam(A_i)^s over covers of the digitized set by cells
/// from levels `start..=trunc`, by the tree recursion
/// cost(A) = min(diam(A)^s, Σ cost(children of A meeting F)).
pub fn mixed_level_min_cost(
    oracle: &dyn RegionOracle,
    fs: FractalStructure,
    s: f64,
    start: u32,
    trunc: u32,
) -> Result<f64> {
    if start > trunc {
        return Err(Error::InvalidConfig {
            field: "n".to_string(),
            reason: format!("start level {start} beyond truncation {trunc}"),
        });
    }
    fs.cell_count(trunc)?;
    let diam_pow: Vec<f64> = (0..=trunc).map(|l| fs.level_diam(l).powf(s)).collect();
    let root = fs.root();
    if !oracle.intersects(&root) {
        return Ok(0.0);
    }
    descend_sum(oracle, &root, start, trunc, &diam_pow)
}

/// Sum of subtree costs over the level-`start` cells meeting F below `cell`.
fn descend_sum(
    oracle: &dyn RegionOracle,
    cell: &Cell,
    start: u32,
    trunc: u32,
    diam_pow: &[f64],
) -> Result<f64> {
    if cell.level() == start {
        return subtree_cost(oracle, cell, trunc, diam_pow);
    }
    let mut total = 0.0;
    for child in cell.children()? {
        if oracle.intersects(&child) {
            total += descend_sum(oracle, &child, start, trunc, diam_pow)?;
        }
    }
    Ok(total)
}

/// min(diam^s of this cell, sum over intersecting children), recursively.
fn subtree_cost(
    oracle: &dyn RegionOracle,
    cell: &Cell,
    trunc: u32,
    diam_pow: &[f64],
) -> Result<f64> {
    let own = diam_pow[cell.level() as usize];
    if cell.level() == trunc {
        return Ok(own);
    }
    let mut sum = 0.0;
    let mut any = false;
    for child in cell.children()? {
        if oracle.intersects(&child) {
            any = true;
            sum += subtree_cost(oracle, &child, trunc, diam_pow)?;
        }
    }
    if !any {
        // an intersecting cell must keep intersecting somewhere below it,
        // otherwise child covers would not cover F
        return Err(Error::NonMonotoneOracle {
            oracle: oracle.name(),
            level: cell.level(),
            key: cell.key(),
        });
    }
    Ok(own.min(sum))
}

// ---------------------------------------------------------------------------
// s-sweeps and monotonicity
// ---------------------------------------------------------------------------

/// Grid of covering-functional values H^s_n for export and invariant checks.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    /// Which functional: "single-level" or "mixed-level".
    pub kind: String,
    pub truncation: u32,
    pub s_values: Vec<f64>,
    pub n_values: Vec<u32>,
    /// h[si][ni]
    pub h: Vec<Vec<f64>>,
}

impl SweepResult {
    /// Verify H is non-decreasing in n for fixed s and non-increasing in s
    /// for fixed n, up to relative rounding slack from re-associated sums.
    pub fn check_monotone(&self) -> std::result::Result<(), String> {
        let eps = 1e-12;
        for (si, row) in self.h.iter().enumerate() {
            for ni in 1..row.len() {
                if row[ni] < row[ni - 1] * (1.0 - eps) - f64::MIN_POSITIVE {
                    return Err(format!(
                        "H(s={}, n={}) = {} < H at previous level {}",
                        self.s_values[si], self.n_values[ni], row[ni], row[ni - 1]
                    ));
                }
            }
        }
        for si in 1..self.h.len() {
            for ni in 0..self.n_values.len() {
                if self.h[si][ni] > self.h[si - 1][ni] * (1.0 + eps) {
                    return Err(format!(
                        "H(s={}, n={}) = {} > H at smaller s {}",
                        self.s_values[si], self.n_values[ni], self.h[si][ni], self.h[si - 1][ni]
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn sweep_single_level(
    series: &CountSeries,
    s_values: &[f64],
    n_values: &[u32],
) -> Result<SweepResult> {
    let h = s_values
        .iter()
        .map(|&s| {
            n_values
                .iter()
                .map(|&n| single_level_min_cost(series, s, n))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kind: "single-level".to_string(),
        truncation: series.n_max(),
        s_values: s_values.to_vec(),
        n_values: n_values.to_vec(),
        h,
    })
}

pub fn sweep_mixed_level(
    oracle: &dyn RegionOracle,
    fs: FractalStructure,
    s_values: &[f64],
    n_values: &[u32],
    trunc: u32,
) -> Result<SweepResult> {
    let h = s_values
        .iter()
        .map(|&s| {
            n_values
                .iter()
                .map(|&n| mixed_level_min_cost(oracle, fs, s, n, trunc))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kind: "mixed-level".to_string(),
        truncation: trunc,
        s_values: s_values.to_vec(),
        n_values: n_values.to_vec(),
        h,
    })
}

// ---------------------------------------------------------------------------
// critical exponent
// ---------------------------------------------------------------------------

/// Outcome of the slope-sign bisection.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentResult {
    pub value: f64,
    pub bracket: (f64, f64),
    pub bracket_width: f64,
    /// True when the growth slope was already flat at the lower bracket end,
    /// i.e. the critical exponent is at or below it.
    pub at_lower_bracket: bool,
    pub iterations: u32,
}

/// Bisection on s over the sign of the fitted slope of log H^s_n versus n in
/// `window`: positive slope means s is below the critical exponent.
pub fn critical_exponent(
    mut h: impl FnMut(f64, u32) -> Result<f64>,
    window: (u32, u32),
    bracket: (f64, f64),
    tol: f64,
) -> Result<ExponentResult> {
    if window.0 >= window.1 {
        return Err(Error::InvalidConfig {
            field: "window".to_string(),
            reason: "slope window needs at least two levels".to_string(),
        });
    }
    if !(bracket.0 < bracket.1) || tol <= 0.0 {
        return Err(Error::InvalidConfig {
            field: "s-bracket".to_string(),
            reason: "need lo < hi and tol > 0".to_string(),
        });
    }
    let ns: Vec<u32> = (window.0..=window.1).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let mut slope_at = |s: f64| -> Result<f64> {
        let ys = ns
            .iter()
            .map(|&n| {
                let v = h(s, n)?;
                if v <= 0.0 {
                    return Err(Error::DegenerateFit {
                        reason: format!("H({s}, {n}) = {v} is not positive"),
                    });
                }
                Ok(v.ln())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(ols(&xs, &ys)?.slope)
    };

    let (mut lo, mut hi) = bracket;
    if slope_at(lo)? <= SLOPE_EPS {
        // the functional is already flat at the lower end: s* <= lo
        return Ok(ExponentResult {
            value: lo,
            bracket: (lo, lo),
            bracket_width: 0.0,
            at_lower_bracket: true,
            iterations: 0,
        });
    }
    if slope_at(hi)? > SLOPE_EPS {
        return Err(Error::NoSignChange {
            lo: bracket.0,
            hi: bracket.1,
        });
    }
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if slope_at(mid)? > SLOPE_EPS {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            break;
        }
    }
    Ok(ExponentResult {
        value: 0.5 * (lo + hi),
        bracket: (lo, hi),
        bracket_width: hi - lo,
        at_lower_bracket: false,
        iterations,
    })
}

// ---------------------------------------------------------------------------
// estimator front end
// ---------------------------------------------------------------------------

/// Estimator ids exposed by the library and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Grid box-counting dimension (diameter-denominator fit).
    BoxDim,
    Dim1,
    Dim2,
    Dim3,
    Dim4,
}

impl Estimator {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "box" => Ok(Estimator::BoxDim),
            "dim1" => Ok(Estimator::Dim1),
            "dim2" => Ok(Estimator::Dim2),
            "dim3" => Ok(Estimator::Dim3),
            "dim4" => Ok(Estimator::Dim4),
            other => Err(Error::InvalidConfig {
                field: "estimator".to_string(),
                reason: format!("unknown estimator '{other}'"),
            }),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Estimator::BoxDim => "box",
            Estimator::Dim1 => "dim1",
            Estimator::Dim2 => "dim2",
            Estimator::Dim3 => "dim3",
            Estimator::Dim4 => "dim4",
        }
    }

    /// Multiplier applied to the domain-side value in the reduced pipeline:
    /// the count-only estimator transfers with factor 1, all diameter-based
    /// estimators pick up the coupling exponent.
    pub fn transfer_factor(self, exponent: f64) -> f64 {
        match self {
            Estimator::Dim1 => 1.0,
            _ => exponent,
        }
    }
}

/// Shared knobs for one estimator run.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorParams {
    /// Truncation depth L (deepest digitized level).
    pub depth: u32,
    /// Fit / slope window, inclusive.
    pub window: (u32, u32),
    /// Bisection bracket for critical exponents.
    pub s_bracket: (f64, f64),
    /// Bisection tolerance.
    pub s_tol: f64,
    pub threads: usize,
}

impl EstimatorParams {
    /// Spec defaults: L = 10 except for 3-or-more-dimensional cubes (L = 6);
    /// window [3, L-1]; bracket slightly above the carrier dimension.
    pub fn defaults(fs: FractalStructure) -> Self {
        let depth = match fs {
            FractalStructure::Cube { dim } if dim >= 3 => 6,
            _ => 10,
        };
        EstimatorParams {
            depth,
            window: (3, depth - 1),
            s_bracket: (0.0, fs.carrier_dim() as f64 + 1.0),
            s_tol: 0.02,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.window.0 < 1 || self.window.1 > self.depth || self.window.0 >= self.window.1 {
            return Err(Error::InvalidConfig {
                field: "window".to_string(),
                reason: format!(
                    "window {:?} must lie within [1, depth={}] and contain two levels",
                    self.window, self.depth
                ),
            });
        }
        Ok(())
    }
}

/// Run one estimator directly on a digitized set.
pub fn estimate(
    oracle: &dyn RegionOracle,
    fs: FractalStructure,
    estimator: Estimator,
    params: &EstimatorParams,
) -> Result<DimReport> {
    params.validate()?;
    let series = count_series(oracle, fs, 1, params.depth, params.threads)?;
    match estimator {
        Estimator::Dim1 => dim1(&series, params.window),
        Estimator::Dim2 => dim2(&series, params.window),
        Estimator::BoxDim => dim2_as(&series, params.window, "box"),
        Estimator::Dim3 => {
            exponent_report(estimator, &series, params, |s, n| {
                single_level_min_cost(&series, s, n)
            })
        }
        Estimator::Dim4 => {
            exponent_report(estimator, &series, params, |s, n| {
                mixed_level_min_cost(oracle, fs, s, n, params.depth)
            })
        }
    }
}

fn exponent_report(
    estimator: Estimator,
    series: &CountSeries,
    params: &EstimatorParams,
    mut h: impl FnMut(f64, u32) -> Result<f64>,
) -> Result<DimReport> {
    if series.is_empty_set() {
        return Ok(DimReport::undefined(estimator.id(), series, params.window));
    }
    let result = critical_exponent(&mut h, params.window, params.s_bracket, params.s_tol)?;
    // fill the H column at the located exponent
    let levels = series
        .entries
        .iter()
        .map(|e| {
            let h_here = if e.n >= params.window.0 && e.n <= params.window.1 {
                Some(h(result.value, e.n)?)
            } else {
                None
            };
            Ok(LevelEntry {
                n: e.n,
                count: e.count,
                diam: e.diam,
                h: h_here,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DimReport {
        estimator: estimator.id().to_string(),
        set: series.source.clone(),
        structure: series.structure.name(),
        value: Some(result.value),
        verdict: if result.at_lower_bracket {
            "at-lower-bracket".to_string()
        } else {
            "ok".to_string()
        },
        window: params.window,
        levels,
        diagnostics: Diagnostics {
            residual: result.bracket_width,
            slope_stderr: 0.0,
        },
        reduced: None,
    })
}

/// The reduced pipeline: digitize F on the range side, transport the covers
/// through the curve, estimate on the domain side, and multiply by the
/// transfer factor; the direct range-side estimate and the gap between the
/// two are reported alongside.
pub fn reduced_dim(
    oracle: &dyn RegionOracle,
    cf: &CurveFamily,
    estimator: Estimator,
    params: &EstimatorParams,
) -> Result<DimReport> {
    params.validate()?;
    if cf.depth() < params.depth {
        return Err(Error::UnknownLevel {
            level: params.depth,
            max: cf.depth(),
        });
    }
    let direct = estimate(oracle, cf.range(), estimator, params)?;
    let transported = TransportedOracle::new(cf, oracle);
    let domain_report = estimate(&transported, cf.domain(), estimator, params)?;
    let (direct_value, domain_value) = match (direct.value, domain_report.value) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let mut report = direct;
            report.verdict = "undefined-empty-set".to_string();
            report.value = None;
            return Ok(report);
        }
    };
    let factor = estimator.transfer_factor(cf.exponent());
    let product = factor * domain_value;
    let mut report = direct;
    report.reduced = Some(ReducedInfo {
        domain_value,
        exponent_d: factor,
        product,
        gap: (direct_value - product).abs(),
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::{
        builtin_oracle, Cantor4ProductOracle, FullOracle, PointCloudOracle,
        SierpinskiDigitsOracle,
    };

    const LOG3_OVER_LOG2: f64 = 1.584962500721156;

    fn plane() -> FractalStructure {
        FractalStructure::cube(2)
    }

    fn series_for(oracle: &dyn RegionOracle, fs: FractalStructure, max: u32) -> CountSeries {
        count_series(oracle, fs, 1, max, 2).unwrap()
    }

    #[test]
    fn dim1_full_square_is_two() {
        let series = series_for(&FullOracle::new(plane()), plane(), 10);
        let report = dim1(&series, (3, 9)).unwrap();
        assert!((report.value.unwrap() - 2.0).abs() < 1e-9);
        assert!(report.diagnostics.residual < 1e-9);
    }

    #[test]
    fn dim1_gasket_digits_is_log3_over_log2() {
        let series = series_for(&SierpinskiDigitsOracle, plane(), 10);
        let report = dim1(&series, (3, 9)).unwrap();
        assert!((report.value.unwrap() - LOG3_OVER_LOG2).abs() < 1e-9);
    }

    #[test]
    fn dim2_examples() {
        let series = series_for(&FullOracle::new(plane()), plane(), 10);
        let report = dim2(&series, (4, 10)).unwrap();
        assert!((report.value.unwrap() - 2.0).abs() < 1e-9);
        assert!(report.diagnostics.residual < 1e-3);

        let series = series_for(&SierpinskiDigitsOracle, plane(), 10);
        let report = dim2(&series, (4, 10)).unwrap();
        assert!((report.value.unwrap() - LOG3_OVER_LOG2).abs() < 0.02);
    }

    #[test]
    fn dim2_of_transported_full_square_is_one() {
        let cf = CurveFamily::hilbert(2, 10).unwrap();
        let full = FullOracle::new(plane());
        let transported = TransportedOracle::new(&cf, &full);
        let series = series_for(&transported, cf.domain(), 10);
        // N_n = 4^n against diam 4^-n
        let report = dim2(&series, (3, 9)).unwrap();
        assert!((report.value.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dim1_transfers_with_factor_one() {
        let cf = CurveFamily::hilbert(2, 8).unwrap();
        let oracle = SierpinskiDigitsOracle;
        let direct = series_for(&oracle, plane(), 8);
        let transported = TransportedOracle::new(&cf, &oracle);
        let moved = series_for(&transported, cf.domain(), 8);
        let a = dim1(&direct, (2, 7)).unwrap().value.unwrap();
        let b = dim1(&moved, (2, 7)).unwrap().value.unwrap();
        assert_eq!(a, b, "identical counts and denominators must fit identically");
    }

    #[test]
    fn empty_set_gives_undefined_verdict() {
        let fs = plane();
        // a cloud with zero points digitizes to nothing
        let oracle = PointCloudOracle::new(fs, vec![], "nothing").unwrap();
        let series = series_for(&oracle, fs, 5);
        let report = dim1(&series, (2, 4)).unwrap();
        assert_eq!(report.verdict, "undefined-empty-set");
        assert!(report.value.is_none());
    }

    #[test]
    fn single_level_cost_examples() {
        let series = series_for(&FullOracle::new(plane()), plane(), 8);
        // s = 2: every level costs exactly N_l * diam^2 = 2
        for n in 1..=8 {
            let h = single_level_min_cost(&series, 2.0, n).unwrap();
            assert!((h - 2.0).abs() < 1e-12, "n={n}: {h}");
        }
        // s = 3: supercritical, minimized at the truncation level
        let h3_at_1 = single_level_min_cost(&series, 3.0, 1).unwrap();
        let expect = 4f64.powi(8) * plane().level_diam(8).powi(3);
        assert!((h3_at_1 - expect).abs() < 1e-12);

        // gasket digits at the critical s: constant (sqrt 2)^s
        let series = series_for(&SierpinskiDigitsOracle, plane(), 8);
        let s = LOG3_OVER_LOG2;
        let expect = 2f64.sqrt().powf(s);
        for n in 1..=8 {
            let h = single_level_min_cost(&series, s, n).unwrap();
            assert!((h - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn mixed_level_cost_full_square_normalization() {
        let fs = plane();
        let full = FullOracle::new(fs);
        for n in 1..=4 {
            for trunc in n..=6 {
                let h = mixed_level_min_cost(&full, fs, 2.0, n, trunc).unwrap();
                assert!((h - 2.0).abs() < 1e-12, "n={n} L={trunc}: {h}");
            }
        }
        // supercritical: deeper truncation shrinks the value
        let shallow = mixed_level_min_cost(&full, fs, 3.0, 2, 5).unwrap();
        let deep = mixed_level_min_cost(&full, fs, 3.0, 2, 8).unwrap();
        assert!(deep < shallow);
    }

    #[test]
    fn mixed_level_cost_is_bounded_by_single_level() {
        let fs = plane();
        let oracles: Vec<Box<dyn RegionOracle>> = vec![
            Box::new(FullOracle::new(fs)),
            Box::new(SierpinskiDigitsOracle),
            Box::new(Cantor4ProductOracle),
        ];
        for oracle in &oracles {
            let series = series_for(oracle.as_ref(), fs, 7);
            for &s in &[0.5, 1.0, 1.5, 2.0, 2.5] {
                for n in 1..=5 {
                    let dp = mixed_level_min_cost(oracle.as_ref(), fs, s, n, 7).unwrap();
                    let single = single_level_min_cost(&series, s, n).unwrap();
                    assert!(
                        dp <= single * (1.0 + 1e-12),
                        "{} s={s} n={n}: dp={dp} single={single}",
                        oracle.name()
                    );
                }
            }
        }
    }

    #[test]
    fn dp_never_beats_hand_built_covers() {
        let fs = plane();
        let oracle = SierpinskiDigitsOracle;
        let s = 1.2;
        // explicit mixed cover: split the first intersecting level-1 cell into
        // its level-2 children, keep the rest whole
        let cover_level_1 = digitize(&oracle, fs, 1).unwrap();
        let mut cost = 0.0;
        for (i, cell) in cover_level_1.cells().enumerate() {
            if i == 0 {
                for child in cell.children().unwrap() {
                    if oracle.intersects(&child) {
                        cost += child.diam().powf(s);
                    }
                }
            } else {
                cost += cell.diam().powf(s);
            }
        }
        let dp = mixed_level_min_cost(&oracle, fs, s, 1, 4).unwrap();
        assert!(dp <= cost * (1.0 + 1e-12));
    }

    #[test]
    fn sweep_monotonicity_holds() {
        let fs = plane();
        let oracle = SierpinskiDigitsOracle;
        let s_values = [0.5, 1.0, LOG3_OVER_LOG2, 2.0, 2.5];
        let n_values = [1, 2, 3, 4, 5];
        let sweep = sweep_mixed_level(&oracle, fs, &s_values, &n_values, 7).unwrap();
        sweep.check_monotone().unwrap();

        let series = series_for(&oracle, fs, 7);
        let sweep = sweep_single_level(&series, &s_values, &n_values).unwrap();
        sweep.check_monotone().unwrap();
    }

    #[test]
    fn critical_exponent_of_full_square() {
        let fs = plane();
        let full = FullOracle::new(fs);
        let result = critical_exponent(
            |s, n| mixed_level_min_cost(&full, fs, s, n, 8),
            (3, 7),
            (0.5, 3.0),
            0.02,
        )
        .unwrap();
        assert!((result.value - 2.0).abs() < 0.05, "{result:?}");
    }

    #[test]
    fn critical_exponent_of_a_point_is_zero() {
        let fs = plane();
        let oracle = PointCloudOracle::single_point(fs, vec![0.25, 0.75]).unwrap();
        let result = critical_exponent(
            |s, n| mixed_level_min_cost(&oracle, fs, s, n, 8),
            (3, 7),
            (0.0, 3.0),
            0.02,
        )
        .unwrap();
        assert_eq!(result.value, 0.0);
        assert!(result.at_lower_bracket);
    }

    #[test]
    fn no_sign_change_is_reported() {
        let fs = plane();
        let full = FullOracle::new(fs);
        let err = critical_exponent(
            |s, n| mixed_level_min_cost(&full, fs, s, n, 8),
            (3, 7),
            (0.5, 1.5),
            0.02,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }

    #[test]
    fn reduced_box_pipeline_on_the_gasket() {
        let cf = CurveFamily::hilbert(2, 10).unwrap();
        let params = EstimatorParams {
            depth: 10,
            window: (4, 10),
            s_bracket: (0.0, 3.0),
            s_tol: 0.02,
            threads: 2,
        };
        let report = reduced_dim(&SierpinskiDigitsOracle, &cf, Estimator::BoxDim, &params).unwrap();
        let direct = report.value.unwrap();
        let reduced = report.reduced.unwrap();
        assert!((direct - LOG3_OVER_LOG2).abs() < 0.02);
        assert!((reduced.product - LOG3_OVER_LOG2).abs() < 0.02);
        assert!(reduced.gap < 1e-6);
        assert_eq!(reduced.exponent_d, 2.0);
    }

    #[test]
    fn reduced_dim1_uses_factor_one() {
        let cf = CurveFamily::hilbert(2, 8).unwrap();
        let params = EstimatorParams {
            depth: 8,
            window: (3, 7),
            s_bracket: (0.0, 3.0),
            s_tol: 0.02,
            threads: 2,
        };
        let report = reduced_dim(&SierpinskiDigitsOracle, &cf, Estimator::Dim1, &params).unwrap();
        let reduced = report.reduced.unwrap();
        assert_eq!(reduced.exponent_d, 1.0);
        assert!(reduced.gap < 1e-12);
    }

    #[test]
    fn window_shift_changes_exact_fits_little() {
        let series = series_for(&SierpinskiDigitsOracle, plane(), 10);
        let a = dim2(&series, (3, 9)).unwrap().value.unwrap();
        let b = dim2(&series, (4, 10)).unwrap().value.unwrap();
        assert!((a - b).abs() < 0.01);
    }

    #[test]
    fn estimate_dispatches_and_validates() {
        let fs = plane();
        let oracle = builtin_oracle("full", fs, None).unwrap();
        let params = EstimatorParams {
            depth: 6,
            window: (2, 5),
            s_bracket: (0.5, 3.0),
            s_tol: 0.05,
            threads: 2,
        };
        for id in ["box", "dim1", "dim2", "dim3", "dim4"] {
            let est = Estimator::parse(id).unwrap();
            let report = estimate(oracle.as_ref(), fs, est, &params).unwrap();
            assert_eq!(report.estimator, id);
            let v = report.value.unwrap();
            assert!((v - 2.0).abs() < 0.1, "{id}: {v}");
        }
        let bad = EstimatorParams {
            window: (0, 5),
            ..params
        };
        assert!(estimate(oracle.as_ref(), fs, Estimator::Dim1, &bad).is_err());
    }
}
