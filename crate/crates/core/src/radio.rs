//! Log-normal shadowing radio model, its priors, and the radio likelihood.
//!
//! The expected RSS at distance `a` is `P0 - 10 n log10(a)`; measurements
//! scatter around it with Gaussian shadowing of std-dev `sigma` dB.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::num::{floor_log, Real};
use crate::types::{Basestation, BasestationId, RadioMeasurement};

/// Distances below this are clamped before taking logs (m).
pub const MIN_DISTANCE: f64 = 0.1;

/// Floor for fitted shadowing std-dev (dB).
pub const MIN_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioModel<T> {
    /// RSS at 1 m, dBm.
    #[serde(rename = "P0")]
    pub p0: T,
    /// Path-loss exponent.
    pub n: T,
    /// Shadowing std-dev, dB.
    pub sigma: T,
}

impl<T: Real> RadioModel<T> {
    pub fn new(p0: T, n: T, sigma: T) -> Result<Self> {
        let m = Self { p0, n, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.p0.is_finite() {
            return Err(Error::config("P0", "must be finite"));
        }
        if !(self.n > T::zero() && self.n.is_finite()) {
            return Err(Error::config("n", "must be > 0"));
        }
        if !(self.sigma > T::zero() && self.sigma.is_finite()) {
            return Err(Error::config("sigma", "must be > 0"));
        }
        Ok(())
    }
}

/// Raised-cosine priors on `P0` and `n`, the grid that searches them, and
/// the known shadowing std-dev shared by every grid model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig<T> {
    #[serde(rename = "P0_mode")]
    pub p0_mode: T,
    #[serde(rename = "P0_halfwidth")]
    pub p0_halfwidth: T,
    pub n_mode: T,
    pub n_halfwidth: T,
    #[serde(rename = "grid_step_P0")]
    pub grid_step_p0: T,
    pub grid_step_n: T,
    pub sigma: T,
}

impl<T: Real> Default for PriorConfig<T> {
    fn default() -> Self {
        Self {
            p0_mode: T::lit(-60.0),
            p0_halfwidth: T::lit(45.0),
            n_mode: T::lit(2.5),
            n_halfwidth: T::lit(4.0),
            grid_step_p0: T::lit(1.0),
            grid_step_n: T::lit(0.1),
            sigma: T::lit(4.0),
        }
    }
}

impl<T: Real> PriorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("radio.P0_halfwidth", self.p0_halfwidth),
            ("radio.n_halfwidth", self.n_halfwidth),
            ("radio.grid_step_P0", self.grid_step_p0),
            ("radio.grid_step_n", self.grid_step_n),
            ("radio.sigma", self.sigma),
        ];
        for (key, v) in checks {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::config(key, "must be > 0"));
            }
        }
        if !self.p0_mode.is_finite() || !self.n_mode.is_finite() {
            return Err(Error::config("radio.P0_mode", "modes must be finite"));
        }
        Ok(())
    }

    /// `log L_lambda` for independent priors on `P0` and `n`.
    pub fn log_prior(&self, model: &RadioModel<T>) -> T {
        raised_cosine_log_prior(model.p0, self.p0_mode, self.p0_halfwidth)
            + raised_cosine_log_prior(model.n, self.n_mode, self.n_halfwidth)
    }

    /// Model at the prior modes.
    pub fn mode_model(&self) -> RadioModel<T> {
        RadioModel {
            p0: self.p0_mode,
            n: self.n_mode,
            sigma: self.sigma,
        }
    }
}

/// Deterministic part of the shadowing model, dBm.
pub fn expected_rss<T: Real>(model: &RadioModel<T>, distance: T) -> T {
    model.p0 - model.n * path_loss_db(distance)
}

/// `10 log10(max(distance, 0.1))`.
#[inline]
pub fn path_loss_db<T: Real>(distance: T) -> T {
    T::lit(10.0) * distance.max(T::lit(MIN_DISTANCE)).log10()
}

/// Log-density of the raised cosine `(1 + cos(pi (x - mode) / s)) / (2 s)` on
/// `|x - mode| <= s`, floored at `ln(1e-300)` (including outside the support).
pub fn raised_cosine_log_prior<T: Real>(value: T, mode: T, halfwidth: T) -> T {
    let offset = value - mode;
    if !(offset.abs() <= halfwidth) {
        return T::log_floor();
    }
    let density = (T::one() + (T::PI() * offset / halfwidth).cos()) / (T::lit(2.0) * halfwidth);
    floor_log(density.ln())
}

#[inline]
fn gaussian_log_density<T: Real>(residual: T, sigma: T) -> T {
    let z = residual / sigma;
    -(sigma * T::TAU().sqrt()).ln() - T::lit(0.5) * z * z
}

fn basestation_map<T: Real>(basestations: &[Basestation<T>]) -> HashMap<&BasestationId, Point2<T>> {
    basestations.iter().map(|b| (&b.id, b.position)).collect()
}

/// `(rssi, 10 log10 d)` pairs for every radio sample on a frame with a
/// trajectory point, in `(frame, basestation)` order.
fn paired_samples<T: Real>(
    trajectory: &[Option<Point2<T>>],
    radio: &[RadioMeasurement<T>],
    basestations: &[Basestation<T>],
) -> Result<Vec<(T, T)>> {
    let aps = basestation_map(basestations);
    let mut order: Vec<&RadioMeasurement<T>> = radio.iter().collect();
    if !order
        .windows(2)
        .all(|w| (w[0].frame, &w[0].basestation) <= (w[1].frame, &w[1].basestation))
    {
        order.sort_by(|a, b| (a.frame, &a.basestation).cmp(&(b.frame, &b.basestation)));
    }
    let mut out = Vec::with_capacity(order.len());
    for m in order {
        let ap = *aps
            .get(&m.basestation)
            .ok_or_else(|| Error::UnknownBasestation(m.basestation.0.clone()))?;
        if let Some(Some(x)) = trajectory.get(m.frame.slot()) {
            out.push((m.rssi, path_loss_db(x.distance(ap))));
        }
    }
    Ok(out)
}

/// Radio likelihood `L^r`: the summed Gaussian log-densities of all samples on
/// non-empty frames, divided by `non_empty`, plus the model's log prior.
pub fn radio_score<T: Real>(
    trajectory: &[Option<Point2<T>>],
    radio: &[RadioMeasurement<T>],
    basestations: &[Basestation<T>],
    model: &RadioModel<T>,
    prior: &PriorConfig<T>,
    non_empty: usize,
) -> Result<T> {
    if non_empty == 0 {
        return Err(Error::EmptyHypothesis);
    }
    let samples = paired_samples(trajectory, radio, basestations)?;
    let sum: T = samples
        .iter()
        .map(|&(rssi, loss)| gaussian_log_density(rssi - (model.p0 - model.n * loss), model.sigma))
        .sum();
    Ok(sum / T::lit(non_empty as f64) + prior.log_prior(model))
}

/// Centered second-order statistics of the `(rssi, path loss)` pairs of one
/// trajectory, so any model's summed log-likelihood costs O(1).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RadioStats<T> {
    pub count: usize,
    pub mean_rssi: T,
    pub mean_loss: T,
    pub s_rr: T,
    pub s_rl: T,
    pub s_ll: T,
}

impl<T: Real> RadioStats<T> {
    pub fn collect(
        trajectory: &[Option<Point2<T>>],
        radio: &[RadioMeasurement<T>],
        basestations: &[Basestation<T>],
    ) -> Result<Self> {
        Ok(Self::from_pairs(&paired_samples(
            trajectory,
            radio,
            basestations,
        )?))
    }

    pub fn from_pairs(pairs: &[(T, T)]) -> Self {
        if pairs.is_empty() {
            return Self::default();
        }
        let n = T::lit(pairs.len() as f64);
        let mean_rssi = pairs.iter().map(|p| p.0).sum::<T>() / n;
        let mean_loss = pairs.iter().map(|p| p.1).sum::<T>() / n;
        let (mut s_rr, mut s_rl, mut s_ll) = (T::zero(), T::zero(), T::zero());
        for &(r, l) in pairs {
            let (dr, dl) = (r - mean_rssi, l - mean_loss);
            s_rr = s_rr + dr * dr;
            s_rl = s_rl + dr * dl;
            s_ll = s_ll + dl * dl;
        }
        Self {
            count: pairs.len(),
            mean_rssi,
            mean_loss,
            s_rr,
            s_rl,
            s_ll,
        }
    }

    /// Sum of squared residuals `sum (r - P0 + n l)^2`.
    pub fn squared_residuals(&self, p0: T, n: T) -> T {
        if self.count == 0 {
            return T::zero();
        }
        let offset = self.mean_rssi - p0 + n * self.mean_loss;
        T::lit(self.count as f64) * offset * offset
            + self.s_rr
            + T::lit(2.0) * n * self.s_rl
            + n * n * self.s_ll
    }

    /// Summed Gaussian log-density of all samples under `model`.
    pub fn log_likelihood(&self, model: &RadioModel<T>) -> T {
        let sigma = model.sigma;
        let ss = self.squared_residuals(model.p0, model.n);
        -T::lit(self.count as f64) * (sigma * T::TAU().sqrt()).ln()
            - ss / (T::lit(2.0) * sigma * sigma)
    }

    /// Same value as [`radio_score`] for the trajectory these stats came from.
    pub fn score(&self, model: &RadioModel<T>, prior: &PriorConfig<T>, non_empty: usize) -> T {
        self.log_likelihood(model) / T::lit(non_empty as f64) + prior.log_prior(model)
    }
}

/// Radio samples of one window resolved to basestation positions and
/// grouped by frame slot, in `(frame, basestation)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioIndex<T> {
    slots: Vec<Vec<(Point2<T>, T)>>,
    shift_rssi: T,
}

impl<T: Real> RadioIndex<T> {
    pub fn new(
        radio: &[RadioMeasurement<T>],
        basestations: &[Basestation<T>],
        window: usize,
    ) -> Result<Self> {
        let aps = basestation_map(basestations);
        let mut order: Vec<&RadioMeasurement<T>> = radio.iter().collect();
        order.sort_by(|a, b| (a.frame, &a.basestation).cmp(&(b.frame, &b.basestation)));
        let mut slots = vec![Vec::new(); window];
        let mut sum = T::zero();
        for m in &order {
            let ap = *aps
                .get(&m.basestation)
                .ok_or_else(|| Error::UnknownBasestation(m.basestation.0.clone()))?;
            if let Some(slot) = slots.get_mut(m.frame.slot()) {
                slot.push((ap, m.rssi));
                sum = sum + m.rssi;
            }
        }
        let shift_rssi = if order.is_empty() {
            T::zero()
        } else {
            sum / T::lit(order.len() as f64)
        };
        Ok(Self { slots, shift_rssi })
    }

    pub fn at(&self, slot: usize) -> &[(Point2<T>, T)] {
        self.slots.get(slot).map_or(&[], |v| v.as_slice())
    }

    pub fn moments(&self) -> RadioMoments<T> {
        RadioMoments {
            shift_rssi: self.shift_rssi,
            ..RadioMoments::default()
        }
    }
}

/// Shifted raw moments of `(rssi, path loss)` pairs; additive frame by frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RadioMoments<T> {
    count: usize,
    shift_rssi: T,
    s_r: T,
    s_l: T,
    s_rr: T,
    s_rl: T,
    s_ll: T,
}

/// Path-loss shift applied before accumulating (dB).
const SHIFT_LOSS: f64 = 10.0;

impl<T: Real> RadioMoments<T> {
    /// Adds the samples of one frame for a target at `x`.
    #[inline]
    pub fn add_frame(&mut self, x: Point2<T>, samples: &[(Point2<T>, T)]) {
        for &(ap, rssi) in samples {
            let r = rssi - self.shift_rssi;
            let l = path_loss_db(x.distance(ap)) - T::lit(SHIFT_LOSS);
            self.count += 1;
            self.s_r = self.s_r + r;
            self.s_l = self.s_l + l;
            self.s_rr = self.s_rr + r * r;
            self.s_rl = self.s_rl + r * l;
            self.s_ll = self.s_ll + l * l;
        }
    }

    pub fn stats(&self) -> RadioStats<T> {
        if self.count == 0 {
            return RadioStats::default();
        }
        let n = T::lit(self.count as f64);
        let (mr, ml) = (self.s_r / n, self.s_l / n);
        RadioStats {
            count: self.count,
            mean_rssi: mr + self.shift_rssi,
            mean_loss: ml + T::lit(SHIFT_LOSS),
            s_rr: (self.s_rr - n * mr * mr).max(T::zero()),
            s_rl: self.s_rl - n * mr * ml,
            s_ll: (self.s_ll - n * ml * ml).max(T::zero()),
        }
    }
}

/// A model with its data-independent score terms evaluated once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedModel<T> {
    pub model: RadioModel<T>,
    log_prior: T,
    log_norm: T,
    inv_two_var: T,
}

impl<T: Real> PreparedModel<T> {
    pub fn new(model: RadioModel<T>, prior: &PriorConfig<T>) -> Self {
        Self {
            model,
            log_prior: prior.log_prior(&model),
            log_norm: -(model.sigma * T::TAU().sqrt()).ln(),
            inv_two_var: T::one() / (T::lit(2.0) * model.sigma * model.sigma),
        }
    }

    pub fn prepare_all(models: &[RadioModel<T>], prior: &PriorConfig<T>) -> Vec<Self> {
        models.iter().map(|m| Self::new(*m, prior)).collect()
    }

    /// Same value as [`RadioStats::score`].
    #[inline]
    pub fn score(&self, stats: &RadioStats<T>, non_empty: usize) -> T {
        let ll = T::lit(stats.count as f64) * self.log_norm
            - stats.squared_residuals(self.model.p0, self.model.n) * self.inv_two_var;
        ll / T::lit(non_empty as f64) + self.log_prior
    }
}

fn axis<T: Real>(mode: T, halfwidth: T, step: T) -> Vec<T> {
    let k = (halfwidth / step + T::lit(1e-9))
        .floor()
        .to_i64()
        .unwrap_or(0)
        .max(0);
    (-k..=k).map(|i| mode + step * T::lit(i as f64)).collect()
}

/// Cartesian `(P0, n)` grid over the prior supports; `sigma` fixed.
/// Points with `n <= 0` are dropped.
pub fn model_grid<T: Real>(prior: &PriorConfig<T>) -> Vec<RadioModel<T>> {
    let p0s = axis(prior.p0_mode, prior.p0_halfwidth, prior.grid_step_p0);
    let ns: Vec<T> = axis(prior.n_mode, prior.n_halfwidth, prior.grid_step_n)
        .into_iter()
        .filter(|&n| n > T::zero())
        .collect();
    p0s.iter()
        .flat_map(|&p0| {
            ns.iter().map(move |&n| RadioModel {
                p0,
                n,
                sigma: prior.sigma,
            })
        })
        .collect()
}

/// Least-squares survey fit of `rssi` against `-10 log10(distance)`.
///
/// The intercept is `P0`, the slope `n`, and `sigma` the residual std-dev
/// (floored at 0.1 dB, which is what two-point fits return).
pub fn fit_reference_model<T: Real>(samples: &[(T, T)]) -> Result<RadioModel<T>> {
    if samples.len() < 2 {
        return Err(Error::DegenerateFit("need at least two samples".into()));
    }
    let pairs: Vec<(T, T)> = samples
        .iter()
        .map(|&(d, r)| (-path_loss_db(d), r))
        .collect();
    let n = T::lit(pairs.len() as f64);
    let mx = pairs.iter().map(|p| p.0).sum::<T>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<T>() / n;
    let sxx: T = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > T::zero()) {
        return Err(Error::DegenerateFit("all distances equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sigma = if pairs.len() > 2 {
        let ssr: T = pairs
            .iter()
            .map(|&(x, y)| {
                let e = y - intercept - slope * x;
                e * e
            })
            .sum();
        (ssr / T::lit(pairs.len() as f64 - 2.0)).sqrt()
    } else {
        T::zero()
    };
    if !(slope > T::zero()) {
        return Err(Error::DegenerateFit(format!(
            "non-positive path-loss exponent {slope}"
        )));
    }
    Ok(RadioModel {
        p0: intercept,
        n: slope,
        sigma: sigma.max(T::lit(MIN_SIGMA)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FrameIndex;
    use approx::assert_abs_diff_eq;

    fn paper_model() -> RadioModel<f64> {
        RadioModel::new(-64.0, 2.2, 4.0).unwrap()
    }

    #[test]
    fn expected_rss_examples() {
        assert_eq!(expected_rss(&paper_model(), 1.0), -64.0);
        assert_abs_diff_eq!(expected_rss(&paper_model(), 10.0), -86.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_rss(&paper_model(), 100.0), -108.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_clamped() {
        let m = paper_model();
        assert_eq!(expected_rss(&m, 0.0), expected_rss(&m, 0.1));
        assert_eq!(expected_rss(&m, -3.0), expected_rss(&m, 0.1));
    }

    #[test]
    fn raised_cosine_examples() {
        assert_abs_diff_eq!(
            raised_cosine_log_prior(3.0, 3.0, 2.0),
            (0.5f64).ln(),
            epsilon = 1e-12
        );
        assert_eq!(
            raised_cosine_log_prior(5.0, 3.0, 2.0),
            crate::num::LOG_DENSITY_FLOOR
        );
        assert_eq!(
            raised_cosine_log_prior(1.0, 3.0, 2.0),
            crate::num::LOG_DENSITY_FLOOR
        );
        assert_eq!(
            raised_cosine_log_prior(7.0, 3.0, 2.0),
            crate::num::LOG_DENSITY_FLOOR
        );
    }

    #[test]
    fn raised_cosine_integrates_to_one() {
        // Midpoint rule over the support.
        for (mode, s) in [(-60.0, 45.0), (2.5, 4.0), (0.0, 0.3)] {
            let n = 20_000;
            let h = 2.0 * s / n as f64;
            let total: f64 = (0..n)
                .map(|i| {
                    let x = mode - s + (i as f64 + 0.5) * h;
                    raised_cosine_log_prior(x, mode, s).exp() * h
                })
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn grid_cardinality() {
        let prior = PriorConfig::<f64> {
            p0_halfwidth: 15.0,
            n_halfwidth: 1.5,
            grid_step_p0: 1.0,
            grid_step_n: 0.1,
            ..PriorConfig::default()
        };
        assert_eq!(model_grid(&prior).len(), 961);
        let coarse = PriorConfig {
            grid_step_p0: 40.0,
            grid_step_n: 5.0,
            ..prior
        };
        let grid = model_grid(&coarse);
        assert_eq!(grid.len(), 1);
        assert_eq!(grid[0].p0, coarse.p0_mode);
        assert_eq!(grid[0].n, coarse.n_mode);
        for m in model_grid(&prior) {
            assert!(prior.log_prior(&m).is_finite());
        }
    }

    #[test]
    fn grid_drops_non_positive_exponents() {
        let prior = PriorConfig {
            n_mode: 1.0,
            n_halfwidth: 2.0,
            grid_step_n: 0.5,
            ..PriorConfig::default()
        };
        assert!(model_grid(&prior).iter().all(|m| m.n > 0.0));
    }

    #[test]
    fn default_grid_contains_survey_model() {
        let grid = model_grid(&PriorConfig::<f64>::default());
        assert!(grid
            .iter()
            .any(|m| (m.p0 + 64.0).abs() < 1e-9 && (m.n - 2.2).abs() < 1e-9));
    }

    fn one_ap() -> Vec<Basestation<f64>> {
        vec![Basestation {
            id: "a".into(),
            position: Point2::new(0.0, 0.0),
        }]
    }

    fn rad(f: usize, rssi: f64) -> RadioMeasurement<f64> {
        RadioMeasurement {
            frame: FrameIndex(f),
            basestation: "a".into(),
            rssi,
        }
    }

    #[test]
    fn zero_residual_frames_hit_the_gaussian_peak() {
        let m = paper_model();
        let traj: Vec<_> = (1..=3)
            .map(|k| Some(Point2::new(k as f64 * 2.0, 0.0)))
            .collect();
        let radio: Vec<_> = (1..=3)
            .map(|k| rad(k, expected_rss(&m, k as f64 * 2.0)))
            .collect();
        let prior = PriorConfig::default();
        let s = radio_score(&traj, &radio, &one_ap(), &m, &prior, 3).unwrap();
        let peak = -(4.0 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert_abs_diff_eq!(s, peak + prior.log_prior(&m), epsilon = 1e-12);
    }

    #[test]
    fn one_sigma_residual_costs_half_nat() {
        let m = paper_model();
        let traj = vec![Some(Point2::new(3.0, 0.0))];
        let radio = vec![rad(1, expected_rss(&m, 3.0) + 4.0)];
        let prior = PriorConfig::default();
        let s = radio_score(&traj, &radio, &one_ap(), &m, &prior, 1).unwrap() - prior.log_prior(&m);
        let peak = -(4.0 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert_abs_diff_eq!(s, peak - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn silent_frame_counts_in_normalisation_only() {
        let m = paper_model();
        let traj = vec![Some(Point2::new(3.0, 0.0)), Some(Point2::new(4.0, 0.0))];
        let radio = vec![rad(1, -70.0)];
        let prior = PriorConfig::default();
        let s = radio_score(&traj, &radio, &one_ap(), &m, &prior, 2).unwrap() - prior.log_prior(&m);
        let residual = -70.0 - expected_rss(&m, 3.0);
        let term = -(4.0 * (2.0 * std::f64::consts::PI).sqrt()).ln() - residual * residual / 32.0;
        assert_abs_diff_eq!(s, term / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_frames_contribute_nothing() {
        let m = paper_model();
        let traj = vec![None, Some(Point2::new(4.0, 0.0))];
        let radio = vec![rad(1, -10.0), rad(2, expected_rss(&m, 4.0))];
        let prior = PriorConfig::default();
        let s = radio_score(&traj, &radio, &one_ap(), &m, &prior, 1).unwrap() - prior.log_prior(&m);
        assert_abs_diff_eq!(
            s,
            -(4.0 * (2.0 * std::f64::consts::PI).sqrt()).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn unknown_basestation_rejected() {
        let traj = vec![Some(Point2::new(1.0, 1.0))];
        let radio = vec![RadioMeasurement {
            frame: FrameIndex(1),
            basestation: "zz".into(),
            rssi: -60.0,
        }];
        let err = radio_score(
            &traj,
            &radio,
            &one_ap(),
            &paper_model(),
            &PriorConfig::default(),
            1,
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown basestation"));
    }

    #[test]
    fn stats_route_matches_direct_sum() {
        let aps = vec![
            Basestation {
                id: "a".into(),
                position: Point2::new(0.0, 0.0),
            },
            Basestation {
                id: "b".into(),
                position: Point2::new(11.0, 12.0),
            },
        ];
        let traj: Vec<_> = (0..20)
            .map(|k| Some(Point2::new(1.0 + 0.4 * k as f64, 2.0 + 0.3 * k as f64)))
            .collect();
        let mut radio = Vec::new();
        for k in 0..20 {
            for (j, ap) in ["a", "b"].iter().enumerate() {
                let rssi = -60.0 - 3.0 * k as f64 * 0.1 + j as f64 * 2.5 + ((k * 7 + j) % 5) as f64;
                radio.push(RadioMeasurement {
                    frame: FrameIndex(k + 1),
                    basestation: (*ap).into(),
                    rssi,
                });
            }
        }
        let prior = PriorConfig::default();
        let stats = RadioStats::collect(&traj, &radio, &aps).unwrap();
        for m in model_grid(&prior).iter().step_by(97) {
            let direct = radio_score(&traj, &radio, &aps, m, &prior, 20).unwrap();
            assert_abs_diff_eq!(
                stats.score(m, &prior, 20),
                direct,
                epsilon = 1e-9 * direct.abs().max(1.0)
            );
        }
    }

    #[test]
    fn incremental_moments_match_two_pass_stats() {
        let aps = vec![
            Basestation {
                id: "a".into(),
                position: Point2::new(0.0, 0.0),
            },
            Basestation {
                id: "b".into(),
                position: Point2::new(11.0, 12.0),
            },
        ];
        let traj: Vec<_> = (0..30)
            .map(|k| {
                if k % 7 == 3 {
                    None
                } else {
                    Some(Point2::new(1.0 + 0.3 * k as f64, 9.0 - 0.2 * k as f64))
                }
            })
            .collect();
        let mut radio = Vec::new();
        for k in 0..30 {
            for ap in ["b", "a"] {
                let rssi = -55.0 - 0.7 * k as f64
                    + if ap == "a" { 3.0 } else { -2.0 }
                    + ((k * 13) % 7) as f64;
                radio.push(RadioMeasurement {
                    frame: FrameIndex(k + 1),
                    basestation: ap.into(),
                    rssi,
                });
            }
        }
        let reference = RadioStats::collect(&traj, &radio, &aps).unwrap();
        let index = RadioIndex::new(&radio, &aps, 30).unwrap();
        let mut m = index.moments();
        for (slot, x) in traj.iter().enumerate() {
            if let Some(x) = x {
                m.add_frame(*x, index.at(slot));
            }
        }
        let fast = m.stats();
        assert_eq!(fast.count, reference.count);
        let prior = PriorConfig::default();
        for model in model_grid(&prior).iter().step_by(53) {
            let a = reference.score(model, &prior, 26);
            let b = fast.score(model, &prior, 26);
            assert_abs_diff_eq!(a, b, epsilon = 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn prepared_models_score_like_stats() {
        let stats = RadioStats::from_pairs(&[(-70.0, 5.0), (-75.0, 7.5), (-62.0, 2.0)]);
        let prior = PriorConfig::default();
        for m in model_grid(&prior).iter().step_by(31) {
            let a = stats.score(m, &prior, 4);
            let b = PreparedModel::new(*m, &prior).score(&stats, 4);
            assert_abs_diff_eq!(a, b, epsilon = 1e-9 * f64::abs(a).max(1.0));
        }
    }

    #[test]
    fn fit_recovers_noiseless_model() {
        let m = paper_model();
        let samples: Vec<_> = [1.0, 2.0, 3.5, 7.0, 12.0]
            .iter()
            .map(|&d| (d, expected_rss(&m, d)))
            .collect();
        let fit = fit_reference_model(&samples).unwrap();
        assert_abs_diff_eq!(fit.p0, -64.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.n, 2.2, epsilon = 1e-9);
        assert_eq!(fit.sigma, MIN_SIGMA);
    }

    #[test]
    fn two_point_fit_is_exact_with_sigma_floor() {
        let fit = fit_reference_model(&[(1.0, -50.0), (10.0, -70.0)]).unwrap();
        assert_abs_diff_eq!(fit.p0, -50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.n, 2.0, epsilon = 1e-12);
        assert_eq!(fit.sigma, 0.1);
    }

    #[test]
    fn equal_distances_are_degenerate() {
        let err = fit_reference_model(&[(3.0, -50.0), (3.0, -52.0), (3.0, -51.0)]).unwrap_err();
        assert!(err.to_string().contains("degenerate fit"));
    }
}
