//! Constant-velocity Kalman filter and the visual likelihood of a hypothesis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::num::{floor_log, Real};
use crate::tree::Hypothesis;
use crate::types::{Detection, DetectionKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig<T> {
    /// White-acceleration noise std-dev (m/s^2).
    pub process_noise_accel: T,
    pub meas_noise_camera: T,
    pub meas_noise_synthetic: T,
    pub init_pos_std: T,
    pub init_vel_std: T,
    /// Probability of a camera detection while the target is in view.
    pub p_v: T,
}

impl<T: Real> Default for FilterConfig<T> {
    fn default() -> Self {
        Self {
            process_noise_accel: T::lit(0.5),
            meas_noise_camera: T::lit(0.3),
            meas_noise_synthetic: T::lit(0.9),
            init_pos_std: T::lit(0.5),
            init_vel_std: T::lit(1.0),
            p_v: T::lit(0.9),
        }
    }
}

impl<T: Real> FilterConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("filter.process_noise_accel", self.process_noise_accel),
            ("filter.meas_noise_camera", self.meas_noise_camera),
            ("filter.meas_noise_synthetic", self.meas_noise_synthetic),
            ("filter.init_pos_std", self.init_pos_std),
            ("filter.init_vel_std", self.init_vel_std),
        ];
        for (key, v) in positive {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::config(key, "std-dev must be > 0"));
            }
        }
        if !(self.p_v > T::zero() && self.p_v < T::one()) {
            return Err(Error::config("filter.p_v", "must be in (0, 1)"));
        }
        Ok(())
    }
}

pub type Mat4<T> = [[T; 4]; 4];

/// State `[x, y, vx, vy]` with its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState<T> {
    pub mean: [T; 4],
    pub cov: Mat4<T>,
}

impl<T: Real> FilterState<T> {
    /// Stationary state at `position` with the configured initial spread.
    pub fn initial(position: Point2<T>, cfg: &FilterConfig<T>) -> Self {
        let mut cov = [[T::zero(); 4]; 4];
        let pv = cfg.init_pos_std * cfg.init_pos_std;
        let vv = cfg.init_vel_std * cfg.init_vel_std;
        cov[0][0] = pv;
        cov[1][1] = pv;
        cov[2][2] = vv;
        cov[3][3] = vv;
        Self {
            mean: [position.x, position.y, T::zero(), T::zero()],
            cov,
        }
    }

    pub fn position(&self) -> Point2<T> {
        Point2::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> Point2<T> {
        Point2::new(self.mean[2], self.mean[3])
    }

    pub fn trace(&self) -> T {
        (0..4).map(|i| self.cov[i][i]).sum()
    }
}

/// Gaussian density of a measurement under the predicted innovation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Innovation<T> {
    /// Natural-log density, floored at `ln(1e-300)`.
    pub log_density: T,
    pub mahalanobis_sq: T,
}

impl<T: Real> Innovation<T> {
    pub fn density(&self) -> T {
        self.log_density.exp()
    }
}

fn symmetrize<T: Real>(m: &mut Mat4<T>) {
    let half = T::lit(0.5);
    for i in 0..4 {
        for j in (i + 1)..4 {
            let v = (m[i][j] + m[j][i]) * half;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
}

/// Constant-velocity prediction over `dt` seconds.
pub fn predict<T: Real>(state: &FilterState<T>, dt: T, cfg: &FilterConfig<T>) -> FilterState<T> {
    let [x, y, vx, vy] = state.mean;
    let mean = [x + dt * vx, y + dt * vy, vx, vy];

    // F P F^T with F = [[I, dt I], [0, I]].
    let p = &state.cov;
    let mut fp = *p;
    for j in 0..4 {
        fp[0][j] = p[0][j] + dt * p[2][j];
        fp[1][j] = p[1][j] + dt * p[3][j];
    }
    let mut cov = fp;
    for i in 0..4 {
        cov[i][0] = fp[i][0] + dt * fp[i][2];
        cov[i][1] = fp[i][1] + dt * fp[i][3];
    }

    let q = cfg.process_noise_accel * cfg.process_noise_accel;
    let dt2 = dt * dt;
    let pos = q * dt2 * dt2 / T::lit(4.0);
    let cross = q * dt2 * dt / T::lit(2.0);
    let vel = q * dt2;
    for axis in 0..2 {
        cov[axis][axis] = cov[axis][axis] + pos;
        cov[axis][axis + 2] = cov[axis][axis + 2] + cross;
        cov[axis + 2][axis] = cov[axis + 2][axis] + cross;
        cov[axis + 2][axis + 2] = cov[axis + 2][axis + 2] + vel;
    }
    symmetrize(&mut cov);
    FilterState { mean, cov }
}

/// Position measurement update (Joseph form).
///
/// Returns the posterior and the density of `z` under the prior innovation.
pub fn update<T: Real>(
    state: &FilterState<T>,
    z: Point2<T>,
    meas_std: T,
) -> Result<(FilterState<T>, Innovation<T>)> {
    if !z.is_finite() {
        return Err(Error::NonFinite("measurement".into()));
    }
    if !(meas_std > T::zero()) {
        return Err(Error::config("meas_std", "must be > 0"));
    }
    let r = meas_std * meas_std;
    let p = &state.cov;
    let (s00, s01, s11) = (p[0][0] + r, p[0][1], p[1][1] + r);
    let det = s00 * s11 - s01 * s01;
    let (i00, i01, i11) = (s11 / det, -s01 / det, s00 / det);

    let y = [z.x - state.mean[0], z.y - state.mean[1]];
    let maha = y[0] * (i00 * y[0] + i01 * y[1]) + y[1] * (i01 * y[0] + i11 * y[1]);
    let two_pi = T::TAU();
    let log_density = floor_log(-two_pi.ln() - T::lit(0.5) * det.ln() - T::lit(0.5) * maha);

    // K = P H^T S^-1, a 4x2 gain.
    let mut k = [[T::zero(); 2]; 4];
    for i in 0..4 {
        k[i][0] = p[i][0] * i00 + p[i][1] * i01;
        k[i][1] = p[i][0] * i01 + p[i][1] * i11;
    }
    let mut mean = state.mean;
    for i in 0..4 {
        mean[i] = mean[i] + k[i][0] * y[0] + k[i][1] * y[1];
    }

    // (I - K H) P (I - K H)^T + K R K^T
    let mut a = [[T::zero(); 4]; 4];
    for i in 0..4 {
        a[i][i] = T::one();
        a[i][0] = a[i][0] - k[i][0];
        a[i][1] = a[i][1] - k[i][1];
    }
    let mut ap = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            ap[i][j] = (0..4).map(|m| a[i][m] * p[m][j]).sum();
        }
    }
    let mut cov = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let apa: T = (0..4).map(|m| ap[i][m] * a[j][m]).sum();
            cov[i][j] = apa + r * (k[i][0] * k[j][0] + k[i][1] * k[j][1]);
        }
    }
    symmetrize(&mut cov);
    Ok((
        FilterState { mean, cov },
        Innovation {
            log_density,
            mahalanobis_sq: maha,
        },
    ))
}

/// Forward filter output for one hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun<T> {
    /// Posterior position `x_i^+` per frame; `None` on empty frames.
    pub trajectory: Vec<Option<Point2<T>>>,
    /// Mean per-detection visual log-likelihood `L^v`.
    pub visual_score: T,
    /// `|H|`.
    pub non_empty: usize,
}

/// Frame-by-frame filter state along one hypothesis.
///
/// Cloning a cursor and continuing it with different detections gives the
/// same numbers as filtering each sequence from scratch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterCursor<T> {
    state: Option<FilterState<T>>,
    total: T,
    non_empty: usize,
}

impl<T: Real> Default for FilterCursor<T> {
    fn default() -> Self {
        Self {
            state: None,
            total: T::zero(),
            non_empty: 0,
        }
    }
}

impl<T: Real> FilterCursor<T> {
    /// Consumes the next detection and returns the posterior position.
    ///
    /// An empty detection drops the state, so the next non-empty detection
    /// restarts the filter with itself as prior mean.
    pub fn step(
        &mut self,
        det: &Detection<T>,
        cfg: &FilterConfig<T>,
        frame_period: T,
    ) -> Result<Option<Point2<T>>> {
        let z = match det.position() {
            None => {
                self.state = None;
                return Ok(None);
            }
            Some(z) => z,
        };
        let (meas_std, log_prior) = match det.kind() {
            DetectionKind::Camera => (cfg.meas_noise_camera, cfg.p_v.ln()),
            _ => (cfg.meas_noise_synthetic, (T::one() - cfg.p_v).ln()),
        };
        let prior = match &self.state {
            Some(s) => predict(s, frame_period, cfg),
            None => FilterState::initial(z, cfg),
        };
        let (post, innov) = update(&prior, z, meas_std)?;
        self.total = self.total + log_prior + innov.log_density;
        self.non_empty += 1;
        self.state = Some(post);
        Ok(Some(post.position()))
    }

    pub fn non_empty(&self) -> usize {
        self.non_empty
    }

    /// `L^v` so far.
    pub fn visual_score(&self) -> Result<T> {
        if self.non_empty == 0 {
            return Err(Error::EmptyHypothesis);
        }
        Ok(self.total / T::lit(self.non_empty as f64))
    }
}

/// Runs the filter along `hypothesis` and scores it visually.
///
/// Empty frames are skipped; the filter restarts at the next non-empty
/// detection after any empty run, with the detection as its prior mean.
pub fn run_hypothesis_filter<T: Real>(
    hypothesis: &Hypothesis<T>,
    cfg: &FilterConfig<T>,
    frame_period: T,
) -> Result<FilterRun<T>> {
    let mut cursor = FilterCursor::default();
    let trajectory = hypothesis
        .detections()
        .iter()
        .map(|d| cursor.step(d, cfg, frame_period))
        .collect::<Result<Vec<_>>>()?;
    Ok(FilterRun {
        trajectory,
        visual_score: cursor.visual_score()?,
        non_empty: cursor.non_empty(),
    })
}
