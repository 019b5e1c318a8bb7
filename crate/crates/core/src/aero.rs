//! Aerodynamic coefficient data, propeller-wake (momentum theory)
//! modelling and total lift/drag evaluation for a blown tiltwing.
//!
//! The wing sits partly in the propeller slipstream, so lift and drag are
//! a weighted sum of a blown contribution (evaluated at the effective
//! velocity and effective angle of attack induced by the wake) and an
//! unblown free-stream contribution.

use std::f64::consts::PI;
use std::path::Path;

use crate::{Error, Result};

/// Small airspeed below which flight-path-angle quantities are guarded.
pub const EPS_SPEED: f64 = 0.1;

/// Physical constants and constraint bounds of the vehicle.
///
/// Defaults correspond to a ~750 kg tiltwing with four propellers.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AircraftParams {
    /// Mass [kg].
    pub mass: f64,
    /// Gravitational acceleration [m/s^2].
    pub gravity: f64,
    /// Wing area [m^2].
    pub wing_area: f64,
    /// Rotor disk area per propeller [m^2].
    pub disk_area: f64,
    /// Number of propellers.
    pub prop_count: f64,
    /// Air density [kg/m^3].
    pub air_density: f64,
    /// Wing rotational inertia about the tilt axis [kg m^2].
    pub wing_inertia: f64,
    /// Wake velocity factor (far-wake/induced ratio, ~2 from momentum theory).
    pub wake_factor: f64,
    /// Fraction of the wing immersed in the propeller wake, in [0, 1].
    pub blown_fraction: f64,
    /// Thrust upper bound [N].
    pub thrust_max: f64,
    /// Tiltwing angle range [rad].
    pub tilt_min: f64,
    pub tilt_max: f64,
    /// Acceleration range for both velocity channels [m/s^2].
    pub accel_min: f64,
    pub accel_max: f64,
    /// Forward velocity range [m/s].
    pub vx_min: f64,
    pub vx_max: f64,
    /// Vertical velocity range [m/s] (positive down).
    pub vz_min: f64,
    pub vz_max: f64,
    /// Tilt actuator torque range [N m].
    pub torque_min: f64,
    pub torque_max: f64,
}

impl Default for AircraftParams {
    fn default() -> Self {
        AircraftParams {
            mass: 752.2,
            gravity: 9.81,
            wing_area: 8.93,
            disk_area: 2.83,
            prop_count: 4.0,
            air_density: 1.225,
            wing_inertia: 1100.0,
            wake_factor: 2.0,
            blown_fraction: 0.6,
            thrust_max: 8855.0,
            tilt_min: -10.0_f64.to_radians(),
            tilt_max: 100.0_f64.to_radians(),
            accel_min: -0.3 * 9.81,
            accel_max: 0.3 * 9.81,
            vx_min: 0.0,
            vx_max: 60.0,
            vz_min: -30.0,
            vz_max: 30.0,
            torque_min: -50.0,
            torque_max: 50.0,
        }
    }
}

impl AircraftParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("wing_area", self.wing_area),
            ("disk_area", self.disk_area),
            ("air_density", self.air_density),
            ("wing_inertia", self.wing_inertia),
            ("thrust_max", self.thrust_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.prop_count < 1.0 {
            return Err(Error::domain("prop_count must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.blown_fraction) {
            return Err(Error::domain("blown_fraction must lie in [0, 1]"));
        }
        let ranges = [
            ("tilt", self.tilt_min, self.tilt_max),
            ("accel", self.accel_min, self.accel_max),
            ("vx", self.vx_min, self.vx_max),
            ("vz", self.vz_min, self.vz_max),
            ("torque", self.torque_min, self.torque_max),
        ];
        for (name, lo, hi) in ranges {
            if !(lo < hi) {
                return Err(Error::domain(format!(
                    "{name} range must satisfy min < max, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Weight force m*g [N].
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Wrap an angle into the principal range [-pi, pi]. Identity (bit-exact)
/// for angles already in range.
pub fn wrap_angle(alpha: f64) -> f64 {
    if (-PI..=PI).contains(&alpha) {
        return alpha;
    }
    let mut a = (alpha + PI).rem_euclid(2.0 * PI) - PI;
    if a < -PI {
        a = PI;
    }
    a
}

/// Tabulated lift/drag coefficients over the full angle-of-attack circle.
#[derive(Debug, Clone, PartialEq)]
pub struct AeroTable {
    /// Strictly increasing angles of attack [rad], covering [-pi, pi].
    pub alpha: Vec<f64>,
    /// Lift coefficient samples.
    pub cl: Vec<f64>,
    /// Drag coefficient samples (nonnegative).
    pub cd: Vec<f64>,
}

impl AeroTable {
    pub fn new(alpha: Vec<f64>, cl: Vec<f64>, cd: Vec<f64>) -> Result<Self> {
        let t = AeroTable { alpha, cl, cd };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let n = self.alpha.len();
        if n < 3 || self.cl.len() != n || self.cd.len() != n {
            return Err(Error::domain("aero table needs >= 3 rows of equal length"));
        }
        if self.alpha.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("aero table angles must be strictly increasing"));
        }
        if self.alpha[0] > -PI + 1e-9 || self.alpha[n - 1] < PI - 1e-9 {
            return Err(Error::domain("aero table must cover [-pi, pi]"));
        }
        for (i, &cd) in self.cd.iter().enumerate() {
            if cd < 0.0 || !cd.is_finite() {
                return Err(Error::domain(format!("cd[{i}] = {cd} invalid")));
            }
        }
        if self.cl.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("cl contains non-finite entries"));
        }
        Ok(())
    }

    /// Pre-/post-stall coefficient model on a 1 degree grid over the full
    /// circle: thin-airfoil linear lift with quadratic polar below 15 deg,
    /// flat-plate behaviour beyond 25 deg, cosine-blended in between.
    pub fn default_table() -> Self {
        let blend_lo = 15.0_f64.to_radians();
        let blend_hi = 25.0_f64.to_radians();
        let mut alpha = Vec::with_capacity(361);
        let mut cl = Vec::with_capacity(361);
        let mut cd = Vec::with_capacity(361);
        for deg in -180..=180 {
            let a = (deg as f64).to_radians();
            let abs = a.abs();
            let pre_cl = 5.0 * a;
            let pre_cd = 0.02 + 0.05 * pre_cl * pre_cl;
            let post_cl = 2.0 * a.sin() * a.cos();
            let post_cd = 2.0 * a.sin() * a.sin();
            let (c_l, c_d) = if abs <= blend_lo {
                (pre_cl, pre_cd)
            } else if abs >= blend_hi {
                (post_cl, post_cd)
            } else {
                let t = (abs - blend_lo) / (blend_hi - blend_lo);
                let w = 0.5 * (1.0 - (PI * t).cos());
                ((1.0 - w) * pre_cl + w * post_cl, (1.0 - w) * pre_cd + w * post_cd)
            };
            alpha.push(a);
            cl.push(c_l);
            cd.push(c_d);
        }
        AeroTable { alpha, cl, cd }
    }

    /// Linear interpolation of (C_L, C_D) at `alpha` (wrapped to [-pi, pi]).
    /// Exact at grid nodes.
    pub fn lookup(&self, alpha: f64) -> Result<(f64, f64)> {
        if !alpha.is_finite() {
            return Err(Error::domain(format!("angle of attack {alpha} not finite")));
        }
        let a = wrap_angle(alpha);
        let n = self.alpha.len();
        // binary search for the bracketing segment
        let idx = match self.alpha.binary_search_by(|x| x.partial_cmp(&a).unwrap()) {
            Ok(i) => return Ok((self.cl[i], self.cd[i])),
            Err(i) => i,
        };
        let (i0, i1) = if idx == 0 {
            (0, 1)
        } else if idx >= n {
            (n - 2, n - 1)
        } else {
            (idx - 1, idx)
        };
        let t = (a - self.alpha[i0]) / (self.alpha[i1] - self.alpha[i0]);
        Ok((
            self.cl[i0] + t * (self.cl[i1] - self.cl[i0]),
            self.cd[i0] + t * (self.cd[i1] - self.cd[i0]),
        ))
    }

    /// Largest |dC_L/dalpha| over the table (segment slopes).
    pub fn max_abs_cl_slope(&self) -> f64 {
        self.alpha
            .windows(2)
            .zip(self.cl.windows(2))
            .map(|(a, c)| ((c[1] - c[0]) / (a[1] - a[0])).abs())
            .fold(0.0, f64::max)
    }

    /// Largest |dC_D/dalpha| over the table (segment slopes).
    pub fn max_abs_cd_slope(&self) -> f64 {
        self.alpha
            .windows(2)
            .zip(self.cd.windows(2))
            .map(|(a, c)| ((c[1] - c[0]) / (a[1] - a[0])).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_cl(&self) -> f64 {
        self.cl.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn max_cd(&self) -> f64 {
        self.cd.iter().fold(0.0, |m, &c| m.max(c))
    }

    /// Load from CSV with header `alpha_deg,cl,cd`.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::domain("empty aero table CSV"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["alpha_deg", "cl", "cd"] {
            return Err(Error::domain(format!(
                "aero CSV header must be alpha_deg,cl,cd, got {header:?}"
            )));
        }
        let mut alpha = Vec::new();
        let mut cl = Vec::new();
        let mut cd = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::domain(format!("aero CSV row {} malformed", i + 2)));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::domain(format!("bad number {s:?} in aero CSV")))
            };
            alpha.push(parse(fields[0])?.to_radians());
            cl.push(parse(fields[1])?);
            cd.push(parse(fields[2])?);
        }
        AeroTable::new(alpha, cl, cd)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha_deg,cl,cd\n");
        for i in 0..self.alpha.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.alpha[i].to_degrees(),
                self.cl[i],
                self.cd[i]
            ));
        }
        out
    }

    /// SHA-256 over the canonical CSV rendering; used to tie DC artifacts
    /// to the table they were sampled from.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.to_csv().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Low-order polynomial fit of the coefficient table over a limited
/// angle range: C_L ~ b0 + b1 a, C_D ~ a0 + a1 a + a2 a^2.
///
/// Consumed by the gust disturbance-bound formulas.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AeroPolyCoeffs {
    pub lift_b0: f64,
    pub lift_b1: f64,
    pub drag_a0: f64,
    pub drag_a1: f64,
    pub drag_a2: f64,
    /// Angle range [rad] over which the fit is valid.
    pub fit_range: (f64, f64),
    /// Largest relative residual of either fit over the range.
    pub max_rel_residual: f64,
}

/// Least-squares fit of the table coefficients by a linear lift and a
/// quadratic drag polynomial over `range`. The drag curvature is clamped
/// to be nonnegative (convex drag fit), refitting the remaining terms.
pub fn fit_poly_coeffs(table: &AeroTable, range: (f64, f64)) -> Result<AeroPolyCoeffs> {
    let (lo, hi) = range;
    if !(lo < hi) {
        return Err(Error::domain(format!("degenerate fit range [{lo}, {hi}]")));
    }
    if lo < table.alpha[0] - 1e-12 || hi > table.alpha[table.alpha.len() - 1] + 1e-12 {
        return Err(Error::domain("fit range outside table coverage"));
    }
    let idx: Vec<usize> = (0..table.alpha.len())
        .filter(|&i| table.alpha[i] >= lo - 1e-12 && table.alpha[i] <= hi + 1e-12)
        .collect();
    if idx.len() < 5 {
        return Err(Error::domain("need at least 5 grid points in fit range"));
    }
    let a: Vec<f64> = idx.iter().map(|&i| table.alpha[i]).collect();
    let cl: Vec<f64> = idx.iter().map(|&i| table.cl[i]).collect();
    let cd: Vec<f64> = idx.iter().map(|&i| table.cd[i]).collect();

    let lift = polyfit(&a, &cl, 1);
    let mut drag = polyfit(&a, &cd, 2);
    if drag[2] < 0.0 {
        let linear = polyfit(&a, &cd, 1);
        drag = vec![linear[0], linear[1], 0.0];
    }

    let mut max_rel = 0.0_f64;
    for k in 0..a.len() {
        let fit_cl = lift[0] + lift[1] * a[k];
        let fit_cd = drag[0] + drag[1] * a[k] + drag[2] * a[k] * a[k];
        let scale_cl = cl.iter().fold(0.0_f64, |m, c| m.max(c.abs())).max(1e-12);
        let scale_cd = cd.iter().fold(0.0_f64, |m, c| m.max(c.abs())).max(1e-12);
        max_rel = max_rel
            .max((fit_cl - cl[k]).abs() / scale_cl)
            .max((fit_cd - cd[k]).abs() / scale_cd);
    }
    if !max_rel.is_finite() {
        return Err(Error::domain("polynomial fit residual not finite"));
    }
    Ok(AeroPolyCoeffs {
        lift_b0: lift[0],
        lift_b1: lift[1],
        drag_a0: drag[0],
        drag_a1: drag[1],
        drag_a2: drag[2],
        fit_range: range,
        max_rel_residual: max_rel,
    })
}

/// Dense normal-equations polynomial least squares (low degree only).
fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Vec<f64> {
    let m = degree + 1;
    let mut ata = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut atb = nalgebra::DVector::<f64>::zeros(m);
    for (&xi, &yi) in x.iter().zip(y) {
        let mut pow = vec![1.0; m];
        for p in 1..m {
            pow[p] = pow[p - 1] * xi;
        }
        for r in 0..m {
            atb[r] += pow[r] * yi;
            for c in 0..m {
                ata[(r, c)] += pow[r] * pow[c];
            }
        }
    }
    ata.lu()
        .solve(&atb)
        .map(|v| v.iter().copied().collect())
        .expect("normal equations solvable for low-degree fit")
}

/// Flow quantities seen by the blown wing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    /// Free-stream airspeed magnitude [m/s].
    pub speed: f64,
    /// Free-stream angle of attack [rad].
    pub alpha: f64,
    /// Effective (blown) velocity over the wing [m/s].
    pub blown_speed: f64,
    /// Effective (blown) angle of attack [rad].
    pub blown_alpha: f64,
    /// Momentum-theory induced velocity at the disk [m/s].
    pub induced: f64,
}

/// Nonnegative root of the implicit momentum-theory equation
/// `rho*A*n*(V cos a + v_i)*(k_w v_i) - T = 0`.
///
/// The equation is quadratic in v_i; the positive root is evaluated in a
/// cancellation-free form and residual-checked, with a bisection fallback
/// if floating-point degradation is detected.
pub fn induced_velocity(speed: f64, alpha: f64, thrust: f64, p: &AircraftParams) -> Result<f64> {
    if !thrust.is_finite() || thrust < 0.0 {
        return Err(Error::domain(format!("thrust must be >= 0, got {thrust}")));
    }
    if !speed.is_finite() || !alpha.is_finite() {
        return Err(Error::domain("speed/alpha must be finite"));
    }
    if thrust == 0.0 {
        return Ok(0.0);
    }
    let c = p.air_density * p.disk_area * p.prop_count * p.wake_factor;
    let b = speed * alpha.cos();
    // v_i^2 + b v_i - T/c = 0
    let disc = (b * b + 4.0 * thrust / c).sqrt();
    let vi = if b >= 0.0 {
        // avoid cancellation between -b and +disc
        (2.0 * thrust / c) / (b + disc)
    } else {
        0.5 * (-b + disc)
    };
    let residual = |v: f64| c * (b + v) * v - thrust;
    // The closed form is exact to rounding; fall back to bisection if not.
    let tol = 1e-9 * thrust.max(1.0);
    if residual(vi).abs() <= tol {
        return Ok(vi);
    }
    let (mut lo, mut hi) = (0.0, vi.max(1.0) * 4.0 + b.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let refined = 0.5 * (lo + hi);
    if residual(refined).abs() <= tol {
        Ok(refined)
    } else {
        Err(Error::domain("induced velocity root did not converge"))
    }
}

/// Effective velocity and angle of attack of the wing inside the wake.
pub fn effective_flow(speed: f64, alpha: f64, thrust: f64, p: &AircraftParams) -> Result<FlowState> {
    let vi = induced_velocity(speed, alpha, thrust, p)?;
    let along = speed * alpha.cos() + p.wake_factor * vi;
    let across = speed * alpha.sin();
    let blown_speed = along.hypot(across);
    let blown_alpha = if blown_speed > 0.0 {
        across.atan2(along)
    } else {
        alpha
    };
    Ok(FlowState {
        speed,
        alpha,
        blown_speed,
        blown_alpha,
        induced: vi,
    })
}

/// Total lift and drag: weighted sum of blown and unblown contributions.
pub fn lift_drag(
    speed: f64,
    alpha: f64,
    thrust: f64,
    p: &AircraftParams,
    table: &AeroTable,
) -> Result<(f64, f64)> {
    if !speed.is_finite() || !alpha.is_finite() {
        return Err(Error::domain("speed/alpha must be finite"));
    }
    let flow = effective_flow(speed, alpha, thrust, p)?;
    let (cl_u, cd_u) = table.lookup(alpha)?;
    let q_unblown = 0.5 * (1.0 - p.blown_fraction) * p.air_density * p.wing_area * speed * speed;
    let (lift_blown, drag_blown) = if p.blown_fraction == 0.0 {
        (0.0, 0.0)
    } else {
        let (cl_b, cd_b) = table.lookup(flow.blown_alpha)?;
        let q_blown = 0.5
            * p.blown_fraction
            * p.air_density
            * p.wing_area
            * flow.blown_speed
            * flow.blown_speed;
        (q_blown * cl_b, q_blown * cd_b)
    };
    Ok((lift_blown + q_unblown * cl_u, drag_blown + q_unblown * cd_u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params() -> AircraftParams {
        AircraftParams::default()
    }

    #[test]
    fn default_params_are_valid() {
        params().validate().unwrap();
    }

    #[test]
    fn lookup_exact_at_nodes() {
        let t = AeroTable::default_table();
        for &i in &[0usize, 90, 180, 255, 360] {
            let (cl, cd) = t.lookup(t.alpha[i]).unwrap();
            assert_eq!(cl, t.cl[i]);
            assert_eq!(cd, t.cd[i]);
        }
    }

    #[test]
    fn lookup_midpoint_is_mean_of_neighbours() {
        let t = AeroTable::default_table();
        let i = 200;
        let mid = 0.5 * (t.alpha[i] + t.alpha[i + 1]);
        let (cl, cd) = t.lookup(mid).unwrap();
        assert_relative_eq!(cl, 0.5 * (t.cl[i] + t.cl[i + 1]), max_relative = 1e-12);
        assert_relative_eq!(cd, 0.5 * (t.cd[i] + t.cd[i + 1]), max_relative = 1e-12);
    }

    #[test]
    fn lookup_flat_plate_at_90_deg() {
        // Flat-plate regime: C_L = 2 sin cos = 0, C_D = 2 sin^2 = 2 (table max).
        let t = AeroTable::default_table();
        let (cl, cd) = t.lookup(90.0_f64.to_radians()).unwrap();
        assert_abs_diff_eq!(cl, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cd, 2.0, epsilon = 1e-12);
        assert_eq!(cd, t.max_cd());
    }

    #[test]
    fn lookup_rejects_non_finite() {
        let t = AeroTable::default_table();
        assert!(t.lookup(f64::NAN).is_err());
    }

    #[test]
    fn lookup_bounded_by_neighbouring_samples() {
        let t = AeroTable::default_table();
        for i in 0..t.alpha.len() - 1 {
            let a = t.alpha[i] + 0.37 * (t.alpha[i + 1] - t.alpha[i]);
            let (cl, cd) = t.lookup(a).unwrap();
            let (lo, hi) = (t.cl[i].min(t.cl[i + 1]), t.cl[i].max(t.cl[i + 1]));
            assert!(cl >= lo - 1e-12 && cl <= hi + 1e-12);
            let (lo, hi) = (t.cd[i].min(t.cd[i + 1]), t.cd[i].max(t.cd[i + 1]));
            assert!(cd >= lo - 1e-12 && cd <= hi + 1e-12);
        }
    }

    #[test]
    fn fit_recovers_exact_linear_lift() {
        let alpha: Vec<f64> = (-180..=180).map(|d| (d as f64).to_radians()).collect();
        let cl: Vec<f64> = alpha.iter().map(|a| 0.1 + 5.0 * a).collect();
        let cd = vec![0.02; alpha.len()];
        let t = AeroTable::new(alpha, cl, cd).unwrap();
        let c = fit_poly_coeffs(&t, (-0.3, 0.3)).unwrap();
        assert_abs_diff_eq!(c.lift_b0, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(c.lift_b1, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_recovers_exact_quadratic_drag() {
        let alpha: Vec<f64> = (-180..=180).map(|d| (d as f64).to_radians()).collect();
        let cl: Vec<f64> = alpha.iter().map(|a| 5.0 * a).collect();
        let cd: Vec<f64> = alpha.iter().map(|a| 0.02 + 0.3 * a * a).collect();
        let t = AeroTable::new(alpha, cl, cd).unwrap();
        let c = fit_poly_coeffs(&t, (-0.3, 0.3)).unwrap();
        assert_abs_diff_eq!(c.drag_a0, 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(c.drag_a1, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.drag_a2, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate_range() {
        let t = AeroTable::default_table();
        assert!(fit_poly_coeffs(&t, (0.4, 0.4)).is_err());
        assert!(fit_poly_coeffs(&t, (0.5, 0.2)).is_err());
    }

    // Regression values for the default table over [-10 deg, 30 deg],
    // computed by an independent normal-equations solve (see
    // `oracle_polyfit` below) and frozen.
    #[test]
    fn fit_default_table_regression() {
        let t = AeroTable::default_table();
        let range = (-10.0_f64.to_radians(), 30.0_f64.to_radians());
        let c = fit_poly_coeffs(&t, range).unwrap();

        let idx: Vec<usize> = (0..t.alpha.len())
            .filter(|&i| t.alpha[i] >= range.0 - 1e-12 && t.alpha[i] <= range.1 + 1e-12)
            .collect();
        let a: Vec<f64> = idx.iter().map(|&i| t.alpha[i]).collect();
        let cl: Vec<f64> = idx.iter().map(|&i| t.cl[i]).collect();
        let cd: Vec<f64> = idx.iter().map(|&i| t.cd[i]).collect();
        let lift = oracle_polyfit(&a, &cl, 1);
        let drag = oracle_polyfit(&a, &cd, 2);
        assert_relative_eq!(c.lift_b0, lift[0], max_relative = 1e-9);
        assert_relative_eq!(c.lift_b1, lift[1], max_relative = 1e-9);
        assert_relative_eq!(c.drag_a0, drag[0], max_relative = 1e-9);
        assert_relative_eq!(c.drag_a1, drag[1], max_relative = 1e-9);
        assert_relative_eq!(c.drag_a2, drag[2], max_relative = 1e-9);
        assert!(c.drag_a2 >= 0.0);
        assert!(c.max_rel_residual.is_finite());
    }

    /// Independent Gaussian-elimination normal-equations solve.
    fn oracle_polyfit(x: &[f64], y: &[f64], degree: usize) -> Vec<f64> {
        let m = degree + 1;
        let mut aug = vec![vec![0.0; m + 1]; m];
        for (&xi, &yi) in x.iter().zip(y) {
            let mut pw = vec![1.0; m];
            for p in 1..m {
                pw[p] = pw[p - 1] * xi;
            }
            for r in 0..m {
                for c in 0..m {
                    aug[r][c] += pw[r] * pw[c];
                }
                aug[r][m] += pw[r] * yi;
            }
        }
        // Gaussian elimination with partial pivoting
        for col in 0..m {
            let piv = (col..m).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs())).unwrap();
            aug.swap(col, piv);
            for r in 0..m {
                if r != col {
                    let f = aug[r][col] / aug[col][col];
                    for c in col..=m {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
        (0..m).map(|r| aug[r][m] / aug[r][r]).collect()
    }

    #[test]
    fn induced_velocity_zero_thrust() {
        let p = params();
        assert_eq!(induced_velocity(0.0, 0.0, 0.0, &p).unwrap(), 0.0);
        assert_eq!(induced_velocity(40.0, 0.5, 0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn induced_velocity_static_thrust_closed_form() {
        // V = 0: v_i = sqrt(T / (k_w rho A n)), T = 8855 N.
        let p = params();
        let t = 8855.0;
        let vi = induced_velocity(0.0, 0.0, t, &p).unwrap();
        let expected = (t / (p.wake_factor * p.air_density * p.disk_area * p.prop_count)).sqrt();
        assert_relative_eq!(vi, expected, max_relative = 1e-12);
        let c = p.air_density * p.disk_area * p.prop_count;
        let res = c * (0.0 + vi) * (p.wake_factor * vi) - t;
        assert!(res.abs() <= 1e-9 * t.max(1.0));
    }

    #[test]
    fn induced_velocity_forward_flight_residual() {
        let p = params();
        let (v, a, t) = (40.0, 5.0_f64.to_radians(), 2000.0);
        let vi = induced_velocity(v, a, t, &p).unwrap();
        let c = p.air_density * p.disk_area * p.prop_count;
        let res = c * (v * a.cos() + vi) * (p.wake_factor * vi) - t;
        assert!(res.abs() <= 1e-9 * t, "residual {res}");

        // bisection oracle on the same residual
        let f = |vi: f64| c * (v * a.cos() + vi) * (p.wake_factor * vi) - t;
        let (mut lo, mut hi) = (0.0_f64, 100.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert_relative_eq!(vi, 0.5 * (lo + hi), max_relative = 1e-9);
    }

    #[test]
    fn induced_velocity_monotone_in_thrust() {
        let p = params();
        let mut prev = -1.0;
        for i in 0..50 {
            let t = 50.0 + 175.0 * i as f64;
            let vi = induced_velocity(25.0, 0.3, t, &p).unwrap();
            assert!(vi > prev);
            prev = vi;
        }
    }

    #[test]
    fn induced_velocity_rejects_negative_thrust() {
        assert!(induced_velocity(10.0, 0.0, -1.0, &params()).is_err());
    }

    #[test]
    fn effective_flow_unblown_limit() {
        let p = params();
        let f = effective_flow(31.0, 0.22, 0.0, &p).unwrap();
        assert_eq!(f.induced, 0.0);
        assert_relative_eq!(f.blown_speed, 31.0, max_relative = 1e-12);
        assert_relative_eq!(f.blown_alpha, 0.22, max_relative = 1e-12);
    }

    #[test]
    fn effective_flow_pure_axial_wake() {
        let p = params();
        let t = 4000.0;
        let f = effective_flow(0.0, 1.0, t, &p).unwrap();
        assert_abs_diff_eq!(f.blown_alpha, 0.0, epsilon = 1e-12);
        let expected = (2.0 * t / (p.air_density * p.disk_area * p.prop_count)).sqrt();
        assert_relative_eq!(f.blown_speed, expected, max_relative = 1e-9);
    }

    #[test]
    fn effective_flow_consistency_residuals() {
        // All three wake relations must hold simultaneously.
        let p = params();
        let (v, a, t) = (30.0, 60.0_f64.to_radians(), 4000.0);
        let f = effective_flow(v, a, t, &p).unwrap();
        let r1 = f.blown_speed * f.blown_alpha.cos() - (v * a.cos() + p.wake_factor * f.induced);
        let r2 = f.blown_speed * f.blown_alpha.sin() - v * a.sin();
        let r3 = f.blown_speed.powi(2)
            - (v * v + 2.0 * t / (p.air_density * p.disk_area * p.prop_count));
        assert!(r1.abs() <= 1e-7 * f.blown_speed.max(1.0), "r1 {r1}");
        assert!(r2.abs() <= 1e-7 * f.blown_speed.max(1.0), "r2 {r2}");
        assert!(r3.abs() <= 1e-7 * f.blown_speed.powi(2).max(1.0), "r3 {r3}");
        assert!(f.blown_alpha.abs() <= a.abs());
        assert!(f.blown_speed >= v);
    }

    #[test]
    fn lift_drag_reduces_to_classical_when_unblown() {
        let mut p = params();
        p.blown_fraction = 0.0;
        let t = AeroTable::default_table();
        let (v, a) = (40.0, 0.04);
        let (l, d) = lift_drag(v, a, 1500.0, &p, &t).unwrap();
        let (cl, cd) = t.lookup(a).unwrap();
        let q = 0.5 * (1.0 - p.blown_fraction) * p.air_density * p.wing_area * v * v;
        assert_eq!(l, q * cl);
        assert_eq!(d, q * cd);
    }

    #[test]
    fn lift_drag_zero_at_rest_without_thrust() {
        let p = params();
        let t = AeroTable::default_table();
        let (l, d) = lift_drag(0.0, 0.3, 0.0, &p, &t).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn lift_drag_compositional_regression() {
        // Straight-line evaluation of the wake and force chain, step by step.
        let p = params();
        let t = AeroTable::default_table();
        let (v, a, thrust) = (40.0, 2.0_f64.to_radians(), 1000.0);
        let (l, d) = lift_drag(v, a, thrust, &p, &t).unwrap();

        let c = p.air_density * p.disk_area * p.prop_count * p.wake_factor;
        let b = v * a.cos();
        let vi = 0.5 * (-b + (b * b + 4.0 * thrust / c).sqrt());
        let along = b + p.wake_factor * vi;
        let across = v * a.sin();
        let ve = along.hypot(across);
        let ae = across.atan2(along);
        let (cl_b, cd_b) = t.lookup(ae).unwrap();
        let (cl_u, cd_u) = t.lookup(a).unwrap();
        let qb = 0.5 * p.blown_fraction * p.air_density * p.wing_area * ve * ve;
        let qu = 0.5 * (1.0 - p.blown_fraction) * p.air_density * p.wing_area * v * v;
        assert_relative_eq!(l, qb * cl_b + qu * cl_u, max_relative = 1e-9);
        assert_relative_eq!(d, qb * cd_b + qu * cd_u, max_relative = 1e-9);
        assert!(d >= 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let t = AeroTable::default_table();
        let csv = t.to_csv();
        let back = AeroTable::from_csv(&csv).unwrap();
        for i in 0..t.alpha.len() {
            assert_relative_eq!(t.alpha[i], back.alpha[i], max_relative = 1e-12);
            assert_relative_eq!(t.cl[i], back.cl[i], max_relative = 1e-12);
        }
        assert_eq!(t.checksum(), back.checksum());
    }

    #[test]
    fn wrap_angle_principal_range() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI).abs(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-3.0 * PI).abs(), PI, epsilon = 1e-12);
        assert_eq!(wrap_angle(0.3), 0.3);
        assert_abs_diff_eq!(wrap_angle(2.0 * PI + 0.1), 0.1, epsilon = 1e-12);
        for i in 0..100 {
            let a = -40.0 + 0.8 * i as f64;
            let w = wrap_angle(a);
            assert!((-PI..=PI).contains(&w));
        }
    }
}
