//! Target tracking in the world frame.
//!
//! A single constant-velocity Kalman filter tracks the target's position and
//! velocity in `G`. Detections arrive at the (slow) detection rate and are
//! associated to the track by bounding-box IoU against the projected
//! prediction; the filter predicts at the (fast) control rate and corrects
//! whenever an associated detection yields a usable depth
//! (predict-many/update-on-arrival).
//!
//! The tracker also manages the detector's region of interest: after
//! [`TrackerConfig::n_consec`] consecutive detections the RoI window around
//! the last bounding box is activated; it deactivates when the track is
//! lost after [`TrackerConfig::n_miss`] consecutive missed frames and must
//! be re-armed by a fresh run of consecutive detections.

use nalgebra::{Matrix3, SMatrix, SVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::depth::{self, DepthPatch};
use crate::geometry::{camera_to_global, CameraIntrinsics, Point3, RigidTransform};

/// 6-vector `[x, y, z, vx, vy, vz]`.
pub type Vector6 = SVector<f64, 6>;
/// 6x6 covariance matrix.
pub type Matrix6 = SMatrix<f64, 6, 6>;

/// An axis-aligned bounding box in pixel coordinates, `(u, v)` top-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    /// Left edge, pixels.
    pub u: f64,
    /// Top edge, pixels.
    pub v: f64,
    /// Width, pixels. Positive.
    pub w: f64,
    /// Height, pixels. Positive.
    pub h: f64,
}

impl BBox {
    /// Builds a box from its center and size.
    pub fn from_center(cu: f64, cv: f64, w: f64, h: f64) -> Self {
        Self {
            u: cu - w / 2.0,
            v: cv - h / 2.0,
            w,
            h,
        }
    }

    /// Center `(u, v)` of the box.
    pub fn center(&self) -> (f64, f64) {
        (self.u + self.w / 2.0, self.v + self.h / 2.0)
    }

    /// Area in square pixels.
    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// One detector output: a bounding box with its center, the frame timestamp,
/// and the depth samples collected inside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Bounding box in the image.
    pub bbox: BBox,
    /// Box center u, pixels.
    pub center_u: f64,
    /// Box center v, pixels.
    pub center_v: f64,
    /// Frame time, seconds.
    pub timestamp: f64,
    /// Depth samples from inside the box.
    pub patch: DepthPatch,
}

impl Detection {
    /// True when the patch has samples but none inside the measurable
    /// range: the depth sensor saturated because the target is closer than
    /// `range_min` or farther than `range_max`.
    pub fn is_depth_saturated(&self) -> bool {
        !self.patch.is_empty() && self.patch.in_range_count() == 0
    }
}

/// Intersection-over-union of two boxes; 0 when disjoint, 1 when identical.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.u + a.w).min(b.u + b.w) - a.u.max(b.u);
    let iy = (a.v + a.h).min(b.v + b.h) - a.v.max(b.v);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.area() + b.area() - inter)
}

/// Picks the detection with the highest IoU against the predicted box.
/// Returns `None` when the list is empty or every IoU is zero (all
/// candidates rejected as false positives). Ties keep the earliest.
pub fn associate<'a>(detections: &'a [Detection], predicted: &BBox) -> Option<&'a Detection> {
    let mut best: Option<(&Detection, f64)> = None;
    for det in detections {
        let score = iou(&det.bbox, predicted);
        if score > 0.0 && best.map_or(true, |(_, s)| score > s) {
            best = Some((det, score));
        }
    }
    best.map(|(d, _)| d)
}

/// Expands the previous bounding box into a detector region of interest:
/// scaled symmetrically by `factor`, grown to at least `min_side` per side,
/// then shifted (size-preserving) to fit inside the image; sides longer
/// than the image are clipped to it.
pub fn roi(prev: &BBox, factor: f64, min_side: f64, image_w: f64, image_h: f64) -> BBox {
    let w = (prev.w * factor).max(min_side).min(image_w);
    let h = (prev.h * factor).max(min_side).min(image_h);
    let (cu, cv) = prev.center();
    let u = (cu - w / 2.0).clamp(0.0, image_w - w);
    let v = (cv - h / 2.0).clamp(0.0, image_h - h);
    BBox { u, v, w, h }
}

/// Noise parameters of the constant-velocity filter and its initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    /// Measurement noise standard deviation per axis, meters.
    pub sigma_meas: f64,
    /// White-noise acceleration density, meters/second^2.
    pub sigma_acc: f64,
    /// Initial position variance per axis, meters^2.
    pub initial_pos_var: f64,
    /// Initial velocity variance per axis, (meters/second)^2.
    pub initial_vel_var: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            sigma_meas: 0.3,
            sigma_acc: 3.0,
            initial_pos_var: 0.09,
            initial_vel_var: 25.0,
        }
    }
}

/// Kalman filter state: position and velocity in `G` with covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    /// `[x, y, z, vx, vy, vz]`, meters and meters/second.
    pub state: Vector6,
    /// Symmetric positive-definite covariance.
    pub covariance: Matrix6,
    /// Time of the last predict or update, seconds.
    pub last_update: f64,
    /// Frames since the last associated detection.
    pub consecutive_misses: u32,
}

impl TrackState {
    /// Initializes a track at a measured position with zero velocity.
    pub fn from_measurement(z: Point3, t: f64, cfg: &KalmanConfig) -> Self {
        let mut state = Vector6::zeros();
        state[0] = z.x;
        state[1] = z.y;
        state[2] = z.z;
        let mut covariance = Matrix6::zeros();
        for i in 0..3 {
            covariance[(i, i)] = cfg.initial_pos_var;
            covariance[(i + 3, i + 3)] = cfg.initial_vel_var;
        }
        Self {
            state,
            covariance,
            last_update: t,
            consecutive_misses: 0,
        }
    }

    /// Position part of the state.
    pub fn position(&self) -> Point3 {
        Point3::new(self.state[0], self.state[1], self.state[2])
    }

    /// Velocity part of the state, meters/second.
    pub fn velocity(&self) -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::new(self.state[3], self.state[4], self.state[5])
    }
}

fn transition(dt: f64) -> Matrix6 {
    let mut f = Matrix6::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

fn process_noise(dt: f64, sigma_acc: f64) -> Matrix6 {
    let q11 = dt.powi(4) / 4.0;
    let q12 = dt.powi(3) / 2.0;
    let q22 = dt * dt;
    let s = sigma_acc * sigma_acc;
    let mut q = Matrix6::zeros();
    for i in 0..3 {
        q[(i, i)] = s * q11;
        q[(i, i + 3)] = s * q12;
        q[(i + 3, i)] = s * q12;
        q[(i + 3, i + 3)] = s * q22;
    }
    q
}

/// Propagates the track by `dt` under the constant-velocity model.
pub fn predict(track: &TrackState, dt: f64, cfg: &KalmanConfig) -> TrackState {
    let f = transition(dt);
    let state = f * track.state;
    let p = f * track.covariance * f.transpose() + process_noise(dt, cfg.sigma_acc);
    TrackState {
        state,
        covariance: (p + p.transpose()) * 0.5,
        last_update: track.last_update + dt,
        consecutive_misses: track.consecutive_misses,
    }
}

/// Corrects the track with a position measurement, using the Joseph-form
/// covariance update for numerical symmetry. Resets the miss counter.
pub fn update(track: &TrackState, z: Point3, cfg: &KalmanConfig) -> TrackState {
    let r = Matrix3::identity() * cfg.sigma_meas * cfg.sigma_meas;
    let p = track.covariance;
    // S = H P H^T + R with H = [I 0].
    let s = p.fixed_view::<3, 3>(0, 0) + r;
    let Some(s_inv) = s.try_inverse() else {
        // Singular innovation covariance: degenerate configuration, keep
        // the prior but still count the detection.
        let mut t = track.clone();
        t.consecutive_misses = 0;
        return t;
    };
    let k = p.fixed_view::<6, 3>(0, 0) * s_inv;
    let innovation = z.coords - track.state.fixed_rows::<3>(0);
    let state = track.state + k * innovation;

    let mut kh = Matrix6::zeros();
    kh.view_mut((0, 0), (6, 3)).copy_from(&k);
    let a = Matrix6::identity() - kh;
    let p_new = a * p * a.transpose() + kh.fixed_view::<6, 3>(0, 0) * r * kh.fixed_view::<6, 3>(0, 0).transpose();

    TrackState {
        state,
        covariance: (p_new + p_new.transpose()) * 0.5,
        last_update: track.last_update,
        consecutive_misses: 0,
    }
}

/// Association and RoI bookkeeping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Consecutive missed frames before the track is declared lost.
    pub n_miss: u32,
    /// Consecutive detections required to (re)activate the RoI.
    pub n_consec: u32,
    /// RoI symmetric expansion factor over the last box.
    pub roi_factor: f64,
    /// Minimum RoI side, pixels.
    pub roi_min_side: f64,
    /// Association floor: overlap below this IoU does not continue an
    /// existing track, keeping image clutter from capturing it.
    pub min_association_iou: f64,
    /// Measurements farther than this from the predicted position are
    /// discarded as misses (meters); guards the estimation buffer against
    /// clutter that slipped past association.
    pub max_innovation_m: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            n_miss: 14,
            n_consec: 3,
            roi_factor: 2.0,
            roi_min_side: 608.0,
            min_association_iou: 0.1,
            max_innovation_m: 3.0,
        }
    }
}

/// Histogram depth-filter parameters used when converting a detection's
/// patch into a single depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthParams {
    /// Number of histogram bins.
    pub bin_count: usize,
    /// Bounding-box area fraction at or above which a fully saturated
    /// patch means "very close" rather than "beyond range".
    pub bbox_area_threshold: f64,
}

impl Default for DepthParams {
    fn default() -> Self {
        Self {
            bin_count: 40,
            bbox_area_threshold: 0.25,
        }
    }
}

/// Camera geometry for one frame: intrinsics plus the mount and body poses
/// needed to lift detections into `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameContext {
    /// Pinhole intrinsics of the detector camera.
    pub intrinsics: CameraIntrinsics,
    /// Camera-to-body transform `T_F_C`.
    pub t_f_c: RigidTransform,
    /// Body-to-world transform `T_G_F` at the frame time.
    pub t_g_f: RigidTransform,
}

/// A world-frame position measurement produced from one detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    /// Measured target position in `G`.
    pub point_g: Point3,
    /// Frame time, seconds.
    pub timestamp: f64,
    /// Depth came from the out-of-range fallback, not the histogram.
    pub saturated: bool,
    /// The track had at least `n_consec` consecutive detections when this
    /// measurement was made.
    pub confirmed: bool,
}

/// What happened during one detector frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepOutcome {
    /// World-frame measurement, when a detection was associated and usable.
    pub measurement: Option<Measurement>,
    /// A new track was initialized this frame.
    pub track_started: bool,
    /// The track was declared lost this frame.
    pub track_lost: bool,
}

/// Stateful per-frame tracking pipeline: associate, filter depth, lift to
/// `G`, correct the Kalman filter, and manage RoI state.
#[derive(Debug, Clone)]
pub struct TrackerPipeline {
    kalman: KalmanConfig,
    cfg: TrackerConfig,
    depth: DepthParams,
    track: Option<TrackState>,
    last_bbox: Option<BBox>,
    consecutive_detections: u32,
    roi_active: bool,
}

impl TrackerPipeline {
    /// Creates an empty pipeline (no track).
    pub fn new(kalman: KalmanConfig, cfg: TrackerConfig, depth: DepthParams) -> Self {
        Self {
            kalman,
            cfg,
            depth,
            track: None,
            last_bbox: None,
            consecutive_detections: 0,
            roi_active: false,
        }
    }

    /// Current track, if any.
    pub fn track(&self) -> Option<&TrackState> {
        self.track.as_ref()
    }

    /// Whether the RoI window is currently active.
    pub fn roi_active(&self) -> bool {
        self.roi_active
    }

    /// The active RoI window, when armed.
    pub fn roi_window(&self, image_w: f64, image_h: f64) -> Option<BBox> {
        if !self.roi_active {
            return None;
        }
        let prev = self.last_bbox.as_ref()?;
        Some(roi(prev, self.cfg.roi_factor, self.cfg.roi_min_side, image_w, image_h))
    }

    /// Advances the filter prediction to `now` (no-op without a track or
    /// when `now` is not ahead of the state).
    pub fn predict_to(&mut self, now: f64) {
        if let Some(track) = &self.track {
            let dt = now - track.last_update;
            if dt > 0.0 {
                self.track = Some(predict(track, dt, &self.kalman));
            }
        }
    }

    /// The predicted bounding box for association: the track position
    /// projected into the current camera, sized like the last box.
    fn predicted_bbox(&self, ctx: &FrameContext) -> Option<BBox> {
        let track = self.track.as_ref()?;
        let prev = self.last_bbox.as_ref()?;
        let t_g_c = ctx.t_g_f.compose(&ctx.t_f_c);
        let p_c = t_g_c.inverse().apply(track.position());
        let (u, v) = ctx.intrinsics.project(p_c)?;
        Some(BBox::from_center(u, v, prev.w, prev.h))
    }

    /// Extracts a single depth from a detection, with the saturation
    /// fallback. `None` means no usable depth (treated as a miss).
    fn detection_depth(&self, det: &Detection, ctx: &FrameContext) -> Option<(f64, bool)> {
        if det.patch.is_empty() {
            return None;
        }
        if det.is_depth_saturated() {
            let image_area = ctx.intrinsics.width as f64 * ctx.intrinsics.height as f64;
            let d = depth::out_of_range_depth(
                det.bbox.area() / image_area,
                self.depth.bbox_area_threshold,
                det.patch.range_min(),
                det.patch.range_max(),
            );
            return Some((d, true));
        }
        let hist = depth::build_histogram(&det.patch, self.depth.bin_count).ok()?;
        let d = depth::select_depth(&hist).ok()?;
        Some((d, false))
    }

    /// Processes one detector frame at time `now`. Prediction is advanced
    /// to `now` first; a usable associated detection corrects the filter
    /// and yields a world-frame measurement, a frame with none counts as a
    /// miss. Depth-filter no-data, sub-floor association overlap, and
    /// measurements outside the innovation gate are misses, not errors.
    pub fn step(&mut self, detections: &[Detection], now: f64, ctx: &FrameContext) -> StepOutcome {
        self.predict_to(now);
        let mut outcome = StepOutcome::default();

        let associated = match self.predicted_bbox(ctx) {
            Some(predicted) => associate(detections, &predicted)
                .filter(|det| iou(&det.bbox, &predicted) >= self.cfg.min_association_iou)
                .cloned(),
            None if self.track.is_none() => {
                // No track: initialize from the largest detection, the most
                // prominent candidate in frame.
                detections
                    .iter()
                    .max_by(|a, b| a.bbox.area().total_cmp(&b.bbox.area()))
                    .cloned()
            }
            // Track exists but projects behind the camera: nothing can
            // associate this frame.
            None => None,
        };

        let usable = associated.and_then(|det| {
            let (d, saturated) = self.detection_depth(&det, ctx)?;
            let (cu, cv) = (det.center_u, det.center_v);
            let p_c = ctx.intrinsics.backproject(cu, cv, d).ok()?;
            let p_g = camera_to_global(p_c, &ctx.t_f_c, &ctx.t_g_f);
            if let Some(track) = &self.track {
                // Innovation gate: the track is already predicted to `now`.
                if (p_g - track.position()).norm() > self.cfg.max_innovation_m {
                    return None;
                }
            }
            Some((det, p_g, saturated))
        });

        match usable {
            Some((det, p_g, saturated)) => {
                match &self.track {
                    Some(track) => self.track = Some(update(track, p_g, &self.kalman)),
                    None => {
                        self.track = Some(TrackState::from_measurement(p_g, now, &self.kalman));
                        outcome.track_started = true;
                    }
                }
                self.last_bbox = Some(det.bbox);
                self.consecutive_detections += 1;
                if self.consecutive_detections >= self.cfg.n_consec {
                    self.roi_active = true;
                }
                outcome.measurement = Some(Measurement {
                    point_g: p_g,
                    timestamp: now,
                    saturated,
                    confirmed: self.consecutive_detections >= self.cfg.n_consec,
                });
            }
            None => {
                self.consecutive_detections = 0;
                if let Some(track) = &mut self.track {
                    track.consecutive_misses += 1;
                    if track.consecutive_misses >= self.cfg.n_miss {
                        self.track = None;
                        self.last_bbox = None;
                        self.roi_active = false;
                        outcome.track_lost = true;
                    }
                }
            }
        }
        outcome
    }
}
