//! Kinematic single-track (bicycle) model referenced at the rear-axle center.
//!
//! The model is
//!
//! ```text
//! x' = v cos(psi)
//! y' = v sin(psi)
//! psi' = (v / L) tan(delta)
//! ```
//!
//! Motion primitives hold the input constant, so the closed-form circular arc
//! in [`arc_endpoint`] is exact and serves as the reference for the RK4
//! integrator used by [`simulate_primitive`].

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Default integration step for primitive simulation.
pub const DEFAULT_DT: f64 = 0.05;

/// Rear-axle state. Yaw is stored unwrapped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x_r: f64,
    pub y_r: f64,
    pub psi: f64,
}

impl Pose {
    pub const fn new(x_r: f64, y_r: f64, psi: f64) -> Self {
        Self { x_r, y_r, psi }
    }

    pub fn is_finite(&self) -> bool {
        self.x_r.is_finite() && self.y_r.is_finite() && self.psi.is_finite()
    }

    pub fn position(&self) -> Point {
        Point::new(self.x_r, self.y_r)
    }

    /// Point at signed distance `s` along the body's longitudinal axis.
    #[inline]
    pub fn transport(&self, s: f64) -> Point {
        let (sin, cos) = self.psi.sin_cos();
        Point::new(self.x_r + s * cos, self.y_r + s * sin)
    }
}

/// Constant input held for one primitive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlInput {
    /// Front steer angle, radians.
    pub delta_f: f64,
    /// Signed rear-axle speed, m/s. Negative is reverse.
    pub v_r: f64,
}

impl ControlInput {
    pub const fn new(delta_f: f64, v_r: f64) -> Self {
        Self { delta_f, v_r }
    }

    fn check(&self) -> Result<()> {
        if !self.delta_f.is_finite() || !self.v_r.is_finite() {
            return Err(Error::invalid("control input must be finite"));
        }
        if self.delta_f.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::invalid(format!(
                "steer angle {} is not inside (-pi/2, pi/2)",
                self.delta_f
            )));
        }
        Ok(())
    }
}

/// Vehicle geometry.
///
/// `length == wheelbase + rear_overhang + front_overhang` holds by
/// construction; `front_overhang` is always derived.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleParams {
    wheelbase: f64,
    length: f64,
    width: f64,
    rear_overhang: f64,
    front_overhang: f64,
    delta_max: f64,
}

impl VehicleParams {
    pub const DEFAULT_WHEELBASE: f64 = 2.896;
    pub const DEFAULT_LENGTH: f64 = 4.878;
    pub const DEFAULT_WIDTH: f64 = 1.935;
    pub const DEFAULT_DELTA_MAX: f64 = 0.75;

    /// Builds a vehicle. When `rear_overhang` is `None` the overhangs are split
    /// evenly.
    pub fn new(
        wheelbase: f64,
        length: f64,
        width: f64,
        rear_overhang: Option<f64>,
        delta_max: f64,
    ) -> Result<Self> {
        let all = [wheelbase, length, width, delta_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("vehicle parameters must be finite"));
        }
        if wheelbase <= 0.0 || width <= 0.0 {
            return Err(Error::invalid("wheelbase and width must be positive"));
        }
        if !(delta_max > 0.0 && delta_max < std::f64::consts::FRAC_PI_2) {
            return Err(Error::invalid("delta_max must lie in (0, pi/2)"));
        }
        let rear_overhang = rear_overhang.unwrap_or((length - wheelbase) / 2.0);
        let front_overhang = length - wheelbase - rear_overhang;
        if !rear_overhang.is_finite() || rear_overhang <= 0.0 || front_overhang <= 0.0 {
            return Err(Error::invalid(format!(
                "overhangs must be positive (rear {rear_overhang}, front {front_overhang})"
            )));
        }
        Ok(Self {
            wheelbase,
            length,
            width,
            rear_overhang,
            front_overhang,
            delta_max,
        })
    }

    pub fn with_delta_max(self, delta_max: f64) -> Result<Self> {
        Self::new(
            self.wheelbase,
            self.length,
            self.width,
            Some(self.rear_overhang),
            delta_max,
        )
    }

    pub fn wheelbase(&self) -> f64 {
        self.wheelbase
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn width(&self) -> f64 {
        self.width
    }
    pub fn rear_overhang(&self) -> f64 {
        self.rear_overhang
    }
    pub fn front_overhang(&self) -> f64 {
        self.front_overhang
    }
    pub fn delta_max(&self) -> f64 {
        self.delta_max
    }
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self::new(
            Self::DEFAULT_WHEELBASE,
            Self::DEFAULT_LENGTH,
            Self::DEFAULT_WIDTH,
            None,
            Self::DEFAULT_DELTA_MAX,
        )
        .expect("default vehicle is valid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose,
}

/// One simulated primitive. Sample times start at zero and increase strictly.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
    input: ControlInput,
}

impl Trajectory {
    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn input(&self) -> ControlInput {
        self.input
    }

    pub fn poses(&self) -> impl ExactSizeIterator<Item = Pose> + '_ {
        self.samples.iter().map(|s| s.pose)
    }

    pub fn first(&self) -> Pose {
        self.samples[0].pose
    }

    pub fn last(&self) -> Pose {
        self.samples[self.samples.len() - 1].pose
    }

    pub fn duration(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Builds a trajectory from externally supplied samples, checking the
    /// time-ordering invariants.
    pub fn from_samples(samples: Vec<TrajectorySample>, input: ControlInput) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("trajectory needs at least two samples"));
        }
        if samples[0].t != 0.0 {
            return Err(Error::invalid("trajectory must start at t = 0"));
        }
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::invalid("trajectory times must increase strictly"));
        }
        Ok(Self { samples, input })
    }
}

/// State derivative `(x', y', psi')`.
pub fn derivative(pose: Pose, u: ControlInput, vp: &VehicleParams) -> Result<(f64, f64, f64)> {
    if !pose.is_finite() {
        return Err(Error::invalid("pose must be finite"));
    }
    u.check()?;
    Ok(rates(pose.psi, u, vp.wheelbase))
}

#[inline]
fn rates(psi: f64, u: ControlInput, wheelbase: f64) -> (f64, f64, f64) {
    let (sin, cos) = psi.sin_cos();
    (
        u.v_r * cos,
        u.v_r * sin,
        u.v_r / wheelbase * u.delta_f.tan(),
    )
}

#[inline]
fn rk4(pose: Pose, u: ControlInput, wheelbase: f64, dt: f64) -> Pose {
    // psi' does not depend on the state, so only the heading stages differ.
    let (x1, y1, w) = rates(pose.psi, u, wheelbase);
    let (x2, y2, _) = rates(pose.psi + 0.5 * dt * w, u, wheelbase);
    let (x3, y3, _) = rates(pose.psi + 0.5 * dt * w, u, wheelbase);
    let (x4, y4, _) = rates(pose.psi + dt * w, u, wheelbase);
    Pose {
        x_r: pose.x_r + dt / 6.0 * (x1 + 2.0 * x2 + 2.0 * x3 + x4),
        y_r: pose.y_r + dt / 6.0 * (y1 + 2.0 * y2 + 2.0 * y3 + y4),
        psi: pose.psi + dt * w,
    }
}

/// One classical Runge-Kutta step of [`derivative`].
pub fn integrate_step(pose: Pose, u: ControlInput, vp: &VehicleParams, dt: f64) -> Result<Pose> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt must be positive"));
    }
    derivative(pose, u, vp)?;
    Ok(rk4(pose, u, vp.wheelbase, dt))
}

/// Exact endpoint of a constant-input primitive after `t` seconds.
pub fn arc_endpoint(pose: Pose, u: ControlInput, vp: &VehicleParams, t: f64) -> Pose {
    let omega = u.v_r / vp.wheelbase * u.delta_f.tan();
    if u.delta_f == 0.0 || omega == 0.0 {
        let (sin, cos) = pose.psi.sin_cos();
        return Pose::new(
            pose.x_r + u.v_r * t * cos,
            pose.y_r + u.v_r * t * sin,
            pose.psi,
        );
    }
    let psi = pose.psi + omega * t;
    let r = u.v_r / omega;
    Pose::new(
        pose.x_r + r * (psi.sin() - pose.psi.sin()),
        pose.y_r - r * (psi.cos() - pose.psi.cos()),
        psi,
    )
}

/// Number of integration steps in `duration`, requiring an integer multiple
/// of `dt` within 1e-9.
pub fn step_count(duration: f64, dt: f64) -> Result<usize> {
    if !(duration > 0.0 && dt > 0.0) || !duration.is_finite() || !dt.is_finite() {
        return Err(Error::invalid("duration and dt must be positive"));
    }
    let n = (duration / dt).round();
    if n < 1.0 || (n * dt - duration).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "duration {duration} is not an integer multiple of dt {dt}"
        )));
    }
    Ok(n as usize)
}

/// Simulates a constant-input primitive with fixed-step RK4.
pub fn simulate_primitive(
    pose: Pose,
    u: ControlInput,
    vp: &VehicleParams,
    duration: f64,
    dt: f64,
) -> Result<Trajectory> {
    let steps = step_count(duration, dt)?;
    derivative(pose, u, vp)?;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(TrajectorySample { t: 0.0, pose });
    let mut current = pose;
    for k in 1..=steps {
        current = rk4(current, u, vp.wheelbase, dt);
        samples.push(TrajectorySample {
            t: k as f64 * dt,
            pose: current,
        });
    }
    Ok(Trajectory { samples, input: u })
}

pub fn front_axle_position(pose: Pose, vp: &VehicleParams) -> Point {
    pose.transport(vp.wheelbase)
}

/// Offsets along the body axis, rear bumper to front bumper inclusive, with
/// consecutive gaps no larger than `spacing`.
#[derive(Clone, Debug)]
pub struct CenterlineOffsets {
    start: f64,
    step: f64,
    count: usize,
}

impl CenterlineOffsets {
    pub fn new(vp: &VehicleParams, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid("centerline spacing must be positive"));
        }
        let segments = (vp.length / spacing - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            start: -vp.rear_overhang,
            step: vp.length / segments as f64,
            count: segments + 1,
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Actual gap between consecutive points.
    pub fn gap(&self) -> f64 {
        self.step
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = f64> + Clone + '_ {
        let last = self.count - 1;
        // Pin the final offset so the front bumper is emitted exactly.
        let end = self.start + self.step * last as f64;
        (0..self.count).map(move |k| {
            if k == last {
                end
            } else {
                self.start + self.step * k as f64
            }
        })
    }

    pub fn points(&self, pose: Pose) -> impl Iterator<Item = Point> + '_ {
        let (sin, cos) = pose.psi.sin_cos();
        self.iter()
            .map(move |s| Point::new(pose.x_r + s * cos, pose.y_r + s * sin))
    }
}

/// Samples of the vehicle's longitudinal axis from rear bumper to front
/// bumper, both endpoints included.
pub fn centerline_points(pose: Pose, vp: &VehicleParams, spacing: f64) -> Result<Vec<Point>> {
    let offsets = CenterlineOffsets::new(vp, spacing)?;
    Ok(offsets.points(pose).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn vp() -> VehicleParams {
        VehicleParams::default()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // Values below were evaluated with mpmath at 30 digits.
    #[allow(clippy::excessive_precision)]
    const OMEGA_075: f64 = -0.321683860477925573606768907657;
    #[allow(clippy::excessive_precision)]
    const ARC_X_075: f64 = -0.982842264567107534294381633768;
    #[allow(clippy::excessive_precision)]
    const ARC_Y_075: f64 = 0.159459705296617395180332757238;

    #[test]
    fn derivative_examples() {
        let d = derivative(
            Pose::new(0.0, 0.0, 0.0),
            ControlInput::new(0.0, -1.0),
            &vp(),
        )
        .unwrap();
        assert_eq!(d, (-1.0, 0.0, 0.0));

        let d = derivative(
            Pose::new(0.0, 0.0, FRAC_PI_2),
            ControlInput::new(0.0, -1.0),
            &vp(),
        )
        .unwrap();
        assert!(close(d.0, 0.0, 1e-15) && close(d.1, -1.0, 1e-15) && d.2 == 0.0);

        let d = derivative(
            Pose::new(0.0, 0.0, 0.0),
            ControlInput::new(0.75, -1.0),
            &vp(),
        )
        .unwrap();
        assert!(close(d.0, -1.0, 1e-15));
        assert!(close(d.2, OMEGA_075, 1e-12), "{}", d.2);
    }

    #[test]
    fn derivative_rejects_non_finite() {
        let u = ControlInput::new(0.0, -1.0);
        assert!(derivative(Pose::new(f64::NAN, 0.0, 0.0), u, &vp()).is_err());
        assert!(derivative(
            Pose::new(0.0, 0.0, 0.0),
            ControlInput::new(f64::INFINITY, 1.0),
            &vp()
        )
        .is_err());
        assert!(derivative(
            Pose::new(0.0, 0.0, 0.0),
            ControlInput::new(FRAC_PI_2, 1.0),
            &vp()
        )
        .is_err());
    }

    #[test]
    fn integrate_step_examples() {
        let u = ControlInput::new(0.0, -1.0);
        let p = integrate_step(Pose::new(0.0, 0.0, 0.0), u, &vp(), 1.0).unwrap();
        assert_eq!(p, Pose::new(-1.0, 0.0, 0.0));

        let theta = 0.7;
        let p = integrate_step(Pose::new(5.0, 3.0, theta), u, &vp(), 0.5).unwrap();
        assert!(close(p.x_r, 5.0 - 0.5 * theta.cos(), 1e-12));
        assert!(close(p.y_r, 3.0 - 0.5 * theta.sin(), 1e-12));
        assert_eq!(p.psi, theta);

        let u = ControlInput::new(0.75, -1.0);
        let mut p = Pose::new(0.0, 0.0, 0.0);
        for _ in 0..20 {
            p = integrate_step(p, u, &vp(), 0.05).unwrap();
        }
        let exact = arc_endpoint(Pose::new(0.0, 0.0, 0.0), u, &vp(), 1.0);
        assert!(close(p.x_r, exact.x_r, 1e-5) && close(p.y_r, exact.y_r, 1e-5));
        assert!(close(p.psi, exact.psi, 1e-6));

        assert!(integrate_step(p, u, &vp(), 0.0).is_err());
        assert!(integrate_step(p, u, &vp(), -0.1).is_err());
    }

    #[test]
    fn arc_endpoint_examples() {
        let o = Pose::new(0.0, 0.0, 0.0);
        assert_eq!(
            arc_endpoint(o, ControlInput::new(0.0, -1.0), &vp(), 1.0),
            Pose::new(-1.0, 0.0, 0.0)
        );

        let p = arc_endpoint(o, ControlInput::new(0.75, -1.0), &vp(), 1.0);
        assert!(close(p.x_r, ARC_X_075, 1e-12));
        assert!(close(p.y_r, ARC_Y_075, 1e-12));
        assert!(close(p.psi, OMEGA_075, 1e-12));

        let period = 2.0 * PI / OMEGA_075.abs();
        let p = arc_endpoint(o, ControlInput::new(0.75, -1.0), &vp(), period);
        assert!(close(p.x_r, 0.0, 1e-12) && close(p.y_r, 0.0, 1e-12));
        assert!(close(p.psi, -2.0 * PI, 1e-12));
    }

    #[test]
    fn simulate_primitive_examples() {
        let o = Pose::new(0.0, 0.0, 0.0);
        let tr = simulate_primitive(o, ControlInput::new(0.0, -1.0), &vp(), 1.0, 0.05).unwrap();
        assert_eq!(tr.samples().len(), 21);
        assert_eq!(tr.first(), o);
        assert!(close(tr.last().x_r, -1.0, 1e-12) && tr.last().y_r == 0.0 && tr.last().psi == 0.0);

        let tr = simulate_primitive(o, ControlInput::new(0.75, -1.0), &vp(), 1.0, 0.05).unwrap();
        let e = tr.last();
        assert!(close(e.x_r, ARC_X_075, 1e-5) && close(e.y_r, ARC_Y_075, 1e-5));
        assert!(close(e.psi, OMEGA_075, 1e-6));

        let tr = simulate_primitive(o, ControlInput::new(-0.75, -1.0), &vp(), 1.0, 0.05).unwrap();
        let e = tr.last();
        assert!(close(e.x_r, ARC_X_075, 1e-5) && close(e.y_r, -ARC_Y_075, 1e-5));
        assert!(close(e.psi, -OMEGA_075, 1e-6));
    }

    #[test]
    fn simulate_primitive_rejects_non_multiple() {
        let u = ControlInput::new(0.0, -1.0);
        let o = Pose::new(0.0, 0.0, 0.0);
        assert!(simulate_primitive(o, u, &vp(), 1.01, 0.05).is_err());
        assert!(simulate_primitive(o, u, &vp(), 0.0, 0.05).is_err());
        assert!(simulate_primitive(o, u, &vp(), 1.0, 0.0).is_err());
        assert!(simulate_primitive(o, u, &vp(), 0.3, 0.1).is_ok());
    }

    #[test]
    fn sample_times_increase() {
        let tr = simulate_primitive(
            Pose::new(1.0, 2.0, 0.3),
            ControlInput::new(0.35, -1.0),
            &vp(),
            2.0,
            0.05,
        )
        .unwrap();
        assert_eq!(tr.samples()[0].t, 0.0);
        assert!(tr.samples().windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn front_axle_examples() {
        let p = front_axle_position(Pose::new(0.0, 0.0, 0.0), &vp());
        assert_eq!((p.x, p.y), (2.896, 0.0));
        let p = front_axle_position(Pose::new(0.0, 0.0, FRAC_PI_2), &vp());
        assert!(close(p.x, 0.0, 1e-15) && p.y == 2.896);
        let p = front_axle_position(Pose::new(1.0, 1.0, PI), &vp());
        assert!(close(p.x, -1.896, 1e-12) && close(p.y, 1.0, 1e-12));
    }

    #[test]
    fn centerline_examples() {
        let v = vp();
        assert!(close(v.rear_overhang(), 0.991, 1e-12));
        assert!(close(v.front_overhang(), 0.991, 1e-12));

        let pts = centerline_points(Pose::new(0.0, 0.0, 0.0), &v, 4.878).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(close(pts[0].x, -0.991, 1e-12) && pts[0].y == 0.0);
        assert!(close(pts[1].x, 3.887, 1e-12) && pts[1].y == 0.0);

        let pts = centerline_points(Pose::new(0.0, 0.0, 0.0), &v, 0.05).unwrap();
        assert!(pts.iter().all(|p| p.y == 0.0));
        assert!(pts
            .iter()
            .all(|p| p.x >= -0.991 - 1e-12 && p.x <= 3.887 + 1e-12));
        assert!(pts.windows(2).all(|w| w[1].x - w[0].x <= 0.05 + 1e-12));

        let pts = centerline_points(Pose::new(0.0, 0.0, FRAC_PI_2), &v, 0.05).unwrap();
        assert!(pts.iter().all(|p| p.x.abs() < 1e-15));

        assert!(centerline_points(Pose::new(0.0, 0.0, 0.0), &v, 0.0).is_err());
    }

    #[test]
    fn vehicle_params_validation() {
        assert!(VehicleParams::new(2.896, 4.878, 1.935, Some(2.0), 0.75).is_err());
        assert!(VehicleParams::new(2.896, 2.0, 1.935, None, 0.75).is_err());
        assert!(VehicleParams::new(2.896, 4.878, 0.0, None, 0.75).is_err());
        assert!(VehicleParams::new(2.896, 4.878, 1.935, None, 1.6).is_err());
        let v = VehicleParams::new(2.896, 4.878, 1.935, Some(0.8), 0.75).unwrap();
        assert!(close(v.front_overhang(), 4.878 - 2.896 - 0.8, 1e-12));
        assert!(close(
            v.wheelbase() + v.rear_overhang() + v.front_overhang(),
            v.length(),
            1e-12
        ));
    }
}
