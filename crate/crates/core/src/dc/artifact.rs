//! Persistence of the offline decomposition so the controller never
//! refits online.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    dc_split, fit_gram, sample_dynamics, DcSplit, ForceChannel, MonomialBasis, OperatingBox,
    VarScaling,
};
use crate::aero::{AeroTable, AircraftParams};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelArtifact {
    pub channel: ForceChannel,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub sigma: f64,
    pub mean_rel_error: f64,
    pub max_abs_error: f64,
}

/// Self-describing decomposition file: basis exponents, variable scaling
/// and the Gram matrices of both channels, tied to the aero table by a
/// checksum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DcArtifact {
    pub format_version: u32,
    pub aero_table_checksum: String,
    pub n_vars: usize,
    pub half_degree: usize,
    pub exponents: Vec<Vec<u32>>,
    pub box_lo: [f64; 4],
    pub box_hi: [f64; 4],
    pub n_samples: usize,
    pub seed: u64,
    pub channels: Vec<ChannelArtifact>,
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Artifact("non-square matrix in artifact".into()));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

impl DcArtifact {
    /// Sample both force channels, fit and split them, and package the
    /// result. Deterministic for a fixed seed.
    pub fn build(
        table: &AeroTable,
        params: &AircraftParams,
        n_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let box_ = OperatingBox::from_params(params);
        let basis = MonomialBasis::new(4, 1)?;
        let mut channels = Vec::new();
        for (offset, channel) in [ForceChannel::Horizontal, ForceChannel::Vertical]
            .into_iter()
            .enumerate()
        {
            let samples = sample_dynamics(
                channel,
                n_samples,
                &box_,
                seed.wrapping_add(offset as u64),
                params,
                table,
            )?;
            let gp = fit_gram(&samples, &basis)?;
            let split = dc_split(&gp)?;
            channels.push(ChannelArtifact {
                channel,
                p: matrix_to_rows(&split.p),
                q: matrix_to_rows(&split.q),
                r: matrix_to_rows(&split.r),
                sigma: split.sigma,
                mean_rel_error: split.mean_rel_error,
                max_abs_error: split.max_abs_error,
            });
        }
        Ok(DcArtifact {
            format_version: FORMAT_VERSION,
            aero_table_checksum: table.checksum(),
            n_vars: 4,
            half_degree: 1,
            exponents: basis.exponents.clone(),
            box_lo: box_.lo,
            box_hi: box_.hi,
            n_samples,
            seed,
            channels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Artifact(format!("serialise: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let artifact: DcArtifact = serde_json::from_str(&text)
            .map_err(|e| Error::Artifact(format!("parse {}: {e}", path.display())))?;
        if artifact.format_version != FORMAT_VERSION {
            return Err(Error::Artifact(format!(
                "unsupported artifact format version {}",
                artifact.format_version
            )));
        }
        Ok(artifact)
    }

    /// Fail unless the artifact was built from `table`.
    pub fn check_table(&self, table: &AeroTable) -> Result<()> {
        let sum = table.checksum();
        if sum != self.aero_table_checksum {
            return Err(Error::Artifact(format!(
                "aero table checksum mismatch: artifact {}..., table {}...",
                &self.aero_table_checksum[..12.min(self.aero_table_checksum.len())],
                &sum[..12]
            )));
        }
        Ok(())
    }

    /// Reconstruct the splits. The stored exponents must agree with the
    /// canonical basis ordering.
    pub fn to_splits(&self) -> Result<Vec<DcSplit>> {
        let basis = MonomialBasis::new(self.n_vars, self.half_degree)?;
        if basis.exponents != self.exponents {
            return Err(Error::Artifact(
                "artifact exponent ordering does not match canonical basis".into(),
            ));
        }
        let box_ = OperatingBox {
            lo: self.box_lo,
            hi: self.box_hi,
        };
        let scaling = VarScaling::from_box(&box_)?;
        self.channels
            .iter()
            .map(|ch| {
                Ok(DcSplit {
                    channel: ch.channel,
                    basis: basis.clone(),
                    scaling: scaling.clone(),
                    p: rows_to_matrix(&ch.p)?,
                    q: rows_to_matrix(&ch.q)?,
                    r: rows_to_matrix(&ch.r)?,
                    sigma: ch.sigma,
                    mean_rel_error: ch.mean_rel_error,
                    max_abs_error: ch.max_abs_error,
                })
            })
            .collect()
    }

    pub fn operating_box(&self) -> OperatingBox {
        OperatingBox {
            lo: self.box_lo,
            hi: self.box_hi,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_save_load_round_trip() {
        let table = AeroTable::default_table();
        let params = AircraftParams::default();
        let artifact = DcArtifact::build(&table, &params, 400, 5).unwrap();
        assert_eq!(artifact.channels.len(), 2);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dc.json");
        artifact.save(&path).unwrap();
        let loaded = DcArtifact::load(&path).unwrap();
        loaded.check_table(&table).unwrap();
        let splits = loaded.to_splits().unwrap();
        assert_eq!(splits.len(), 2);
        for (s, ch) in splits.iter().zip(&artifact.channels) {
            assert_eq!(s.channel, ch.channel);
            let identity = (&s.q - &s.r - &s.p).abs().max();
            assert!(identity <= 1e-12);
        }
    }

    #[test]
    fn checksum_mismatch_detected() {
        let table = AeroTable::default_table();
        let params = AircraftParams::default();
        let artifact = DcArtifact::build(&table, &params, 400, 5).unwrap();
        let mut other = table.clone();
        other.cl[10] += 0.01;
        assert!(artifact.check_table(&other).is_err());
    }

    #[test]
    fn deterministic_rebuild() {
        let table = AeroTable::default_table();
        let params = AircraftParams::default();
        let a = DcArtifact::build(&table, &params, 400, 5).unwrap();
        let b = DcArtifact::build(&table, &params, 400, 5).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
