//! Offline/online location error, overlap error and CDF summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::num::Real;

fn check_len<T>(est: &[T], truth: &[T]) -> Result<()> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch {
            est: est.len(),
            truth: truth.len(),
        });
    }
    Ok(())
}

/// Mean distance over frames where both trajectories are present; `None`
/// when there is no such frame.
pub fn offline_location_error<T: Real>(
    est: &[Option<Point2<T>>],
    truth: &[Option<Point2<T>>],
) -> Result<Option<T>> {
    check_len(est, truth)?;
    let (sum, n) = est
        .iter()
        .zip(truth)
        .filter_map(|(e, t)| Some(e.as_ref()?.distance(*t.as_ref()?)))
        .fold((T::zero(), 0usize), |(s, n), d| (s + d, n + 1));
    Ok((n > 0).then(|| sum / T::lit(n as f64)))
}

/// Presence-classification error of one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap<T> {
    pub overlap: T,
    pub fp_ratio: T,
    pub fn_ratio: T,
}

pub fn overlap_error<T: Real>(
    est: &[Option<Point2<T>>],
    truth: &[Option<Point2<T>>],
) -> Result<Overlap<T>> {
    check_len(est, truth)?;
    if est.is_empty() {
        return Err(Error::EmptyInput("trajectory"));
    }
    let fp = est
        .iter()
        .zip(truth)
        .filter(|(e, t)| e.is_some() && t.is_none())
        .count();
    let fneg = est
        .iter()
        .zip(truth)
        .filter(|(e, t)| e.is_none() && t.is_some())
        .count();
    let w = T::lit(est.len() as f64);
    let (fp_ratio, fn_ratio) = (T::lit(fp as f64) / w, T::lit(fneg as f64) / w);
    Ok(Overlap {
        overlap: fp_ratio + fn_ratio,
        fp_ratio,
        fn_ratio,
    })
}

/// Distance at the final frame; `None` (undefined) if either is absent there.
pub fn online_location_error<T: Real>(
    est: &[Option<Point2<T>>],
    truth: &[Option<Point2<T>>],
) -> Result<Option<T>> {
    check_len(est, truth)?;
    Ok(match (est.last(), truth.last()) {
        (Some(Some(e)), Some(Some(t))) => Some(e.distance(*t)),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cdf<T> {
    /// `(value, k / N)` for the sorted values.
    pub points: Vec<(T, T)>,
    pub median: T,
    pub p90: T,
}

/// Nearest-rank percentile of sorted values: the `ceil(q N)`-th value.
pub fn nearest_rank<T: Real>(sorted: &[T], q: f64) -> T {
    let n = sorted.len();
    let rank = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

pub fn cdf_series<T: Real>(values: &[T]) -> Result<Cdf<T>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("error values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("error value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = T::lit(sorted.len() as f64);
    let points = sorted
        .iter()
        .enumerate()
        .map(|(k, &v)| (v, T::lit((k + 1) as f64) / n))
        .collect();
    Ok(Cdf {
        points,
        median: nearest_rank(&sorted, 0.5),
        p90: nearest_rank(&sorted, 0.9),
    })
}

/// CSV with header `error_m,cdf`.
pub fn cdf_csv<T: Real>(cdf: &Cdf<T>) -> String {
    let mut out = String::from("error_m,cdf\n");
    for (v, c) in &cdf.points {
        out.push_str(&format!("{v},{c}\n"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowReport<T> {
    pub offline_location_error: Option<T>,
    pub overlap_error: T,
    pub fp_ratio: T,
    pub fn_ratio: T,
    pub online_location_error: Option<T>,
    pub frames_compared: usize,
}

pub fn window_report<T: Real>(
    est: &[Option<Point2<T>>],
    truth: &[Option<Point2<T>>],
) -> Result<WindowReport<T>> {
    let ov = overlap_error(est, truth)?;
    Ok(WindowReport {
        offline_location_error: offline_location_error(est, truth)?,
        overlap_error: ov.overlap,
        fp_ratio: ov.fp_ratio,
        fn_ratio: ov.fn_ratio,
        online_location_error: online_location_error(est, truth)?,
        frames_compared: est
            .iter()
            .zip(truth)
            .filter(|(e, t)| e.is_some() && t.is_some())
            .count(),
    })
}

/// Cross-window aggregate; undefined windows are counted, not averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub windows: usize,
    pub offline_mean: Option<f64>,
    pub offline_median: Option<f64>,
    pub offline_p90: Option<f64>,
    pub offline_undefined_windows: usize,
    pub online_mean: Option<f64>,
    pub online_median: Option<f64>,
    pub online_p90: Option<f64>,
    pub online_undefined_windows: usize,
    pub overlap_mean: Option<f64>,
    pub fp_mean: Option<f64>,
    pub fn_mean: Option<f64>,
    pub zero_overlap_fraction: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(reports: &[WindowReport<f64>]) -> Summary {
    let offline: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.offline_location_error)
        .collect();
    let online: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.online_location_error)
        .collect();
    let off_cdf = cdf_series(&offline).ok();
    let on_cdf = cdf_series(&online).ok();
    let overlaps: Vec<f64> = reports.iter().map(|r| r.overlap_error).collect();
    Summary {
        windows: reports.len(),
        offline_mean: mean(&offline),
        offline_median: off_cdf.as_ref().map(|c| c.median),
        offline_p90: off_cdf.as_ref().map(|c| c.p90),
        offline_undefined_windows: reports.len() - offline.len(),
        online_mean: mean(&online),
        online_median: on_cdf.as_ref().map(|c| c.median),
        online_p90: on_cdf.as_ref().map(|c| c.p90),
        online_undefined_windows: reports.len() - online.len(),
        overlap_mean: mean(&overlaps),
        fp_mean: mean(&reports.iter().map(|r| r.fp_ratio).collect::<Vec<_>>()),
        fn_mean: mean(&reports.iter().map(|r| r.fn_ratio).collect::<Vec<_>>()),
        zero_overlap_fraction: (!reports.is_empty())
            .then(|| overlaps.iter().filter(|&&o| o == 0.0).count() as f64 / reports.len() as f64),
    }
}
