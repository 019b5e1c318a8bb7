//! Offline difference-of-convex decomposition of the dynamics.
//!
//! Each force channel f(V_x, V_z, i_w, T) is approximated by a polynomial
//! in Gram form, f ~ y(x)' P y(x) over a monomial vector y, fitted by
//! least squares on samples of the nonlinear model. The Gram matrix is
//! then split as P = Q - R such that both g = y'Qy and h = y'Ry have
//! positive semidefinite Hessians, giving f = g - h with g, h convex.
//! The controller consumes the split through [`DcSplit::eval`].
//!
//! All fitting and splitting happens in variables affinely scaled to
//! [-1, 1]^4; thrust and angles differ by four orders of magnitude and
//! unscaled Gram fits are numerically ill-conditioned.

mod artifact;
mod basis;
mod fit;
mod split;

pub use artifact::DcArtifact;
pub use basis::MonomialBasis;
pub use fit::{fit_gram, sample_dynamics, GramPoly, SampleSet};
pub use split::{dc_split, verify_split, DcSplit, SplitReport};

use crate::aero::AircraftParams;
use crate::{Error, Result};

/// Which dynamics channel a fit or split belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ForceChannel {
    /// Net horizontal force f1.
    Horizontal,
    /// Net vertical force f2 (includes weight).
    Vertical,
}

impl ForceChannel {
    pub fn label(&self) -> &'static str {
        match self {
            ForceChannel::Horizontal => "f1",
            ForceChannel::Vertical => "f2",
        }
    }
}

/// Operating box in physical variables (V_x, V_z, i_w, T).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OperatingBox {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl OperatingBox {
    /// Box spanned by the vehicle's state and input constraint ranges.
    pub fn from_params(p: &AircraftParams) -> Self {
        OperatingBox {
            lo: [p.vx_min, p.vz_min, p.tilt_min, 0.0],
            hi: [p.vx_max, p.vz_max, p.tilt_max, p.thrust_max],
        }
    }

    pub fn contains(&self, x: &[f64; 4], slack: f64) -> bool {
        (0..4).all(|i| x[i] >= self.lo[i] - slack && x[i] <= self.hi[i] + slack)
    }
}

/// Affine map between physical variables and the scaled [-1, 1]^4 cube.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VarScaling {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl VarScaling {
    pub fn from_box(b: &OperatingBox) -> Result<Self> {
        for i in 0..4 {
            if !(b.lo[i] < b.hi[i]) {
                return Err(Error::domain(format!(
                    "degenerate scaling range on variable {i}: [{}, {}]",
                    b.lo[i], b.hi[i]
                )));
            }
        }
        Ok(VarScaling { lo: b.lo, hi: b.hi })
    }

    pub fn to_scaled(&self, x: &[f64; 4]) -> [f64; 4] {
        let mut s = [0.0; 4];
        for i in 0..4 {
            s[i] = 2.0 * (x[i] - self.lo[i]) / (self.hi[i] - self.lo[i]) - 1.0;
        }
        s
    }

    pub fn to_physical(&self, s: &[f64; 4]) -> [f64; 4] {
        let mut x = [0.0; 4];
        for i in 0..4 {
            x[i] = self.lo[i] + 0.5 * (s[i] + 1.0) * (self.hi[i] - self.lo[i]);
        }
        x
    }

    /// d(scaled_i)/d(physical_i).
    pub fn gain(&self, i: usize) -> f64 {
        2.0 / (self.hi[i] - self.lo[i])
    }
}
