//! Sampling of the nonlinear dynamics and Gram-form least squares.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ForceChannel, MonomialBasis, OperatingBox, VarScaling};
use crate::aero::{AeroTable, AircraftParams};
use crate::dynamics::{net_forces, ControlInput, State};
use crate::{Error, Result};

/// Samples (x_s, F_s) of one force channel over the operating box.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub channel: ForceChannel,
    pub box_: OperatingBox,
    /// Physical sample points (V_x, V_z, i_w, T).
    pub points: Vec<[f64; 4]>,
    pub values: Vec<f64>,
}

/// Draw `n_samples` seeded uniform samples of the channel force over the
/// box. Deterministic for a fixed seed.
pub fn sample_dynamics(
    channel: ForceChannel,
    n_samples: usize,
    box_: &OperatingBox,
    seed: u64,
    p: &AircraftParams,
    table: &AeroTable,
) -> Result<SampleSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_samples);
    let mut values = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut x = [0.0; 4];
        for i in 0..4 {
            x[i] = if box_.hi[i] > box_.lo[i] {
                rng.gen_range(box_.lo[i]..=box_.hi[i])
            } else {
                box_.lo[i]
            };
        }
        let s = State::new(x[0], x[1]);
        let u = ControlInput::new(x[2], x[3]);
        let (f1, f2) = net_forces(&s, &u, p, table)?;
        let f = match channel {
            ForceChannel::Horizontal => f1,
            ForceChannel::Vertical => f2,
        };
        points.push(x);
        values.push(f);
    }
    Ok(SampleSet {
        channel,
        box_: box_.clone(),
        points,
        values,
    })
}

/// Polynomial fit of one channel in Gram form over scaled variables.
#[derive(Debug, Clone)]
pub struct GramPoly {
    pub channel: ForceChannel,
    pub basis: MonomialBasis,
    pub scaling: VarScaling,
    /// Symmetric Gram matrix P: f ~ y(s)' P y(s) in scaled variables s.
    pub matrix: DMatrix<f64>,
    /// mean(|F_s - fit|) / mean(|F_s|) over the fit samples.
    pub mean_rel_error: f64,
    /// max |F_s - fit| over the fit samples [N].
    pub max_abs_error: f64,
    /// True when the normal system was rank-deficient and a ridge term
    /// was applied.
    pub degenerate: bool,
}

impl GramPoly {
    /// Evaluate the fitted polynomial at a physical point.
    pub fn eval_physical(&self, x: &[f64; 4]) -> f64 {
        let s = self.scaling.to_scaled(x);
        let y = self.basis.eval(&s);
        (y.transpose() * &self.matrix * y)[(0, 0)]
    }
}

/// Solve the symmetric-Gram least squares min_P sum_s (F_s - y'Py)^2.
///
/// The free unknowns are the upper-triangular entries of P; the normal
/// equations are formed explicitly (the basis is small) and solved by
/// Cholesky, with a 1e-10 ridge fallback if the system is singular.
pub fn fit_gram(samples: &SampleSet, basis: &MonomialBasis) -> Result<GramPoly> {
    let dim = basis.len();
    let n_free = dim * (dim + 1) / 2;
    if samples.points.len() < n_free {
        return Err(Error::domain(format!(
            "need at least {n_free} samples to fit {dim}x{dim} symmetric Gram matrix"
        )));
    }
    let scaling = VarScaling::from_box(&samples.box_)?;

    // regressor row: phi_ab = y_a y_b (a == b) or 2 y_a y_b (a < b)
    let mut ata = DMatrix::<f64>::zeros(n_free, n_free);
    let mut atb = DVector::<f64>::zeros(n_free);
    let mut phi = DVector::<f64>::zeros(n_free);
    for (x, &f) in samples.points.iter().zip(&samples.values) {
        let y = basis.eval(&scaling.to_scaled(x));
        let mut idx = 0;
        for a in 0..dim {
            for b in a..dim {
                phi[idx] = if a == b { y[a] * y[b] } else { 2.0 * y[a] * y[b] };
                idx += 1;
            }
        }
        ata.ger(1.0, &phi, &phi, 1.0);
        atb.axpy(f, &phi, 1.0);
    }

    let mut degenerate = false;
    let coeffs = match ata.clone().cholesky() {
        Some(ch) => ch.solve(&atb),
        None => {
            degenerate = true;
            let mut ridged = ata;
            for i in 0..n_free {
                ridged[(i, i)] += 1e-10;
            }
            ridged
                .cholesky()
                .ok_or_else(|| Error::domain("Gram normal system singular even with ridge"))?
                .solve(&atb)
        }
    };

    let mut matrix = DMatrix::<f64>::zeros(dim, dim);
    let mut idx = 0;
    for a in 0..dim {
        for b in a..dim {
            matrix[(a, b)] = coeffs[idx];
            matrix[(b, a)] = coeffs[idx];
            idx += 1;
        }
    }

    let mut sum_abs_err = 0.0;
    let mut sum_abs_val = 0.0;
    let mut max_abs_error = 0.0_f64;
    for (x, &f) in samples.points.iter().zip(&samples.values) {
        let y = basis.eval(&scaling.to_scaled(x));
        let fit = (y.transpose() * &matrix * &y)[(0, 0)];
        let err = (fit - f).abs();
        sum_abs_err += err;
        sum_abs_val += f.abs();
        max_abs_error = max_abs_error.max(err);
    }
    let mean_rel_error = sum_abs_err / sum_abs_val.max(1e-12);

    Ok(GramPoly {
        channel: samples.channel,
        basis: basis.clone(),
        scaling,
        matrix,
        mean_rel_error,
        max_abs_error,
        degenerate,
    })
}
