//! Two-state longitudinal dynamics of the tiltwing in the inertial frame:
//! forward velocity and vertical velocity (positive down, so gravity
//! enters with a plus sign), driven by tilt angle and thrust.
//!
//! Position states are integrated a posteriori for logging only and play
//! no role in control.

use crate::aero::{self, AeroTable, AircraftParams, EPS_SPEED};
use crate::{Error, Result};

/// Velocity state in the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    /// Forward velocity [m/s].
    pub vx: f64,
    /// Vertical velocity [m/s], positive down.
    pub vz: f64,
}

impl State {
    pub fn new(vx: f64, vz: f64) -> Self {
        State { vx, vz }
    }
}

/// Control input: tiltwing angle and total thrust.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    /// Tiltwing angle [rad].
    pub tilt: f64,
    /// Thrust magnitude [N].
    pub thrust: f64,
}

impl ControlInput {
    pub fn new(tilt: f64, thrust: f64) -> Self {
        ControlInput { tilt, thrust }
    }
}

/// Additive force disturbance (gust) in inertial axes [N].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disturbance {
    pub wx: f64,
    pub wz: f64,
}

impl Disturbance {
    pub const ZERO: Disturbance = Disturbance { wx: 0.0, wz: 0.0 };
}

/// Logged position, integrated from the velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub z: f64,
}

impl Pose {
    pub fn advance(&self, s: &State, dt: f64) -> Pose {
        Pose {
            x: self.x + s.vx * dt,
            z: self.z + s.vz * dt,
        }
    }

    /// Altitude above the starting point (z is positive down).
    pub fn altitude(&self) -> f64 {
        -self.z
    }
}

/// Derived kinematic quantities: airspeed, flight-path angle, angle of
/// attack. The pitch attitude is held at zero by the inner loop, so
/// `alpha + gamma = tilt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub speed: f64,
    pub gamma: f64,
    pub alpha: f64,
}

/// Airspeed, flight-path angle and angle of attack at a state/input pair.
/// Near hover (speed below [`EPS_SPEED`]) the flight-path angle is
/// undefined and guarded to zero.
pub fn kinematics(s: &State, u: &ControlInput) -> Kinematics {
    let speed = s.vx.hypot(s.vz);
    let gamma = if speed < EPS_SPEED {
        0.0
    } else {
        -(s.vz / speed).clamp(-1.0, 1.0).asin()
    };
    Kinematics {
        speed,
        gamma,
        alpha: u.tilt - gamma,
    }
}

/// Net forces (f1, f2) [N] on the airframe: thrust, lift, drag and weight
/// resolved in inertial axes. The state derivative is (f + W)/m per channel.
pub fn net_forces(
    s: &State,
    u: &ControlInput,
    p: &AircraftParams,
    table: &AeroTable,
) -> Result<(f64, f64)> {
    if u.thrust < 0.0 {
        return Err(Error::domain(format!("thrust must be >= 0, got {}", u.thrust)));
    }
    let k = kinematics(s, u);
    let (lift, drag) = aero::lift_drag(k.speed, k.alpha, u.thrust, p, table)?;
    forces_from_lift_drag(u, &k, lift, drag, p)
}

/// Force resolution shared by the nominal plant and the gusty plant
/// (which substitutes primed lift/drag).
pub(crate) fn forces_from_lift_drag(
    u: &ControlInput,
    k: &Kinematics,
    lift: f64,
    drag: f64,
    p: &AircraftParams,
) -> Result<(f64, f64)> {
    // alpha + gamma = tilt identically under zero pitch
    let (sin_t, cos_t) = u.tilt.sin_cos();
    let (sin_g, cos_g) = k.gamma.sin_cos();
    let f1 = u.thrust * cos_t - drag * cos_g - lift * sin_g;
    let f2 = -u.thrust * sin_t + drag * sin_g - lift * cos_g + p.weight();
    if !f1.is_finite() || !f2.is_finite() {
        return Err(Error::domain("non-finite net force"));
    }
    Ok((f1, f2))
}

/// One forward-Euler step of the disturbed dynamics.
pub fn step_euler(
    s: &State,
    u: &ControlInput,
    w: &Disturbance,
    dt: f64,
    p: &AircraftParams,
    table: &AeroTable,
) -> Result<State> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    let (f1, f2) = net_forces(s, u, p, table)?;
    Ok(State {
        vx: s.vx + dt * (f1 + w.wx) / p.mass,
        vz: s.vz + dt * (f2 + w.wz) / p.mass,
    })
}

/// Which inequality a [`ConstraintViolation`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    VxRange,
    VzRange,
    ThrustRange,
    TiltRange,
    AccelX,
    AccelZ,
    TiltTorque,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintViolation {
    pub kind: ConstraintKind,
    /// Offending value in the constraint's native units.
    pub value: f64,
    /// Violated bound.
    pub bound: f64,
    /// Nonnegative violation magnitude.
    pub margin: f64,
}

/// Report of all violated box constraints at one simulated step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintReport {
    pub violations: Vec<ConstraintViolation>,
}

impl ConstraintReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

const CHECK_TOL: f64 = 1e-6;

/// Check velocity, thrust, tilt, finite-difference acceleration and tilt
/// torque boxes at tolerance 1e-6. `tilt_window` holds the last applied
/// tilt angles, newest last; the torque box uses the second-order forward
/// finite difference over the three most recent entries.
pub fn check_constraints(
    s: &State,
    u: &ControlInput,
    s_prev: Option<&State>,
    tilt_window: &[f64],
    p: &AircraftParams,
    dt: f64,
) -> ConstraintReport {
    let mut report = ConstraintReport::default();
    let mut check = |kind, value: f64, lo: f64, hi: f64| {
        if value < lo - CHECK_TOL {
            report.violations.push(ConstraintViolation {
                kind,
                value,
                bound: lo,
                margin: lo - value,
            });
        } else if value > hi + CHECK_TOL {
            report.violations.push(ConstraintViolation {
                kind,
                value,
                bound: hi,
                margin: value - hi,
            });
        }
    };
    check(ConstraintKind::VxRange, s.vx, p.vx_min, p.vx_max);
    check(ConstraintKind::VzRange, s.vz, p.vz_min, p.vz_max);
    check(ConstraintKind::ThrustRange, u.thrust, 0.0, p.thrust_max);
    check(ConstraintKind::TiltRange, u.tilt, p.tilt_min, p.tilt_max);
    if let Some(prev) = s_prev {
        check(
            ConstraintKind::AccelX,
            (s.vx - prev.vx) / dt,
            p.accel_min,
            p.accel_max,
        );
        check(
            ConstraintKind::AccelZ,
            (s.vz - prev.vz) / dt,
            p.accel_min,
            p.accel_max,
        );
    }
    if tilt_window.len() >= 3 {
        let n = tilt_window.len();
        let dd = (tilt_window[n - 1] - 2.0 * tilt_window[n - 2] + tilt_window[n - 3]) / (dt * dt);
        check(
            ConstraintKind::TiltTorque,
            p.wing_inertia * dd,
            p.torque_min,
            p.torque_max,
        );
    }
    report
}

/// Solve for the input that balances the dynamics at a given state and
/// target acceleration: f1 = m*ax, f2 = m*az (Newton iteration with
/// finite-difference Jacobian on the true table-based dynamics).
pub fn trim(
    s: &State,
    accel: (f64, f64),
    init: &ControlInput,
    p: &AircraftParams,
    table: &AeroTable,
) -> Result<ControlInput> {
    let target = (p.mass * accel.0, p.mass * accel.1);
    let mut u = *init;
    let mut best = (*init, f64::INFINITY);
    for _ in 0..80 {
        let (f1, f2) = net_forces(s, &u, p, table)?;
        let (r1, r2) = (f1 - target.0, f2 - target.1);
        let norm = r1.hypot(r2);
        if norm < best.1 {
            best = (u, norm);
        }
        if norm <= 1e-8 * p.weight() {
            return Ok(u);
        }
        let d_tilt = 1e-6;
        let d_thrust = 1e-3;
        let u_t = ControlInput::new(u.tilt + d_tilt, u.thrust);
        let u_f = ControlInput::new(u.tilt, u.thrust + d_thrust);
        let (f1t, f2t) = net_forces(s, &u_t, p, table)?;
        let (f1f, f2f) = net_forces(s, &u_f, p, table)?;
        let j11 = (f1t - f1) / d_tilt;
        let j12 = (f1f - f1) / d_thrust;
        let j21 = (f2t - f2) / d_tilt;
        let j22 = (f2f - f2) / d_thrust;
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-12 {
            return Err(Error::domain("singular trim Jacobian"));
        }
        let step_tilt = (r1 * j22 - r2 * j12) / det;
        let step_thrust = (j11 * r2 - j21 * r1) / det;
        // damped Newton keeps the iterate inside the input box
        let mut lambda = 1.0;
        loop {
            let cand = ControlInput::new(
                (u.tilt - lambda * step_tilt).clamp(p.tilt_min, p.tilt_max),
                (u.thrust - lambda * step_thrust).clamp(0.0, p.thrust_max),
            );
            let (c1, c2) = net_forces(s, &cand, p, table)?;
            if (c1 - target.0).hypot(c2 - target.1) < norm || lambda < 1e-3 {
                u = cand;
                break;
            }
            lambda *= 0.5;
        }
    }
    let (f1, f2) = net_forces(s, &best.0, p, table)?;
    let norm = (f1 - target.0).hypot(f2 - target.1);
    if norm <= 1e-6 * p.weight() {
        Ok(best.0)
    } else {
        Err(Error::domain(format!(
            "trim did not converge at state ({}, {}), residual {norm:.3} N",
            s.vx, s.vz
        )))
    }
}
