//! Numerical tolerances, collected in one place.
//!
//! Every routine that needs a threshold takes it explicitly, either as a
//! scalar argument or through a [`Tolerances`] value. The names accepted by
//! [`Tolerances::set`] are the ones the command line exposes via
//! `--tol name=value`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max-entry deviation from self-adjointness accepted on input.
    pub herm: f64,
    /// `|V*V - I|` accepted for isometries.
    pub iso: f64,
    /// Residual accepted for a finite-interior witness.
    pub witness: f64,
    /// `|Y - V*(I (x) X)V|` accepted for a hull point.
    pub hull_witness: f64,
    /// Slack on the smallest eigenvalue in PSD tests.
    pub psd: f64,
    /// Relative singular-value cutoff for commutant nullspaces.
    pub rank: f64,
    /// Minimum gap between distinct absolute values of a diagonal sequence.
    pub dist: f64,
    /// Eigenvalue gap below which clusters merge when splitting a commutant.
    pub cluster: f64,
    /// Two-sided equality check of the contraction lift.
    pub equality: f64,
    /// Spectral distance used by the unitary-equivalence probe.
    pub probe: f64,
    /// Matrix-affine identity residual.
    pub affine: f64,
    /// Threshold a non-affine control must exceed to count as detected.
    pub nonaffine: f64,
    /// Block-decomposition identity residual for pencil evaluation.
    pub ucp: f64,
    /// Slack for the monotonicity check of convergence sweeps.
    pub monotone: f64,
    /// Entry magnitude treated as nonzero when reading coordinate supports.
    pub support: f64,
    /// Compression residual accepted for canonical dilations.
    pub dilation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-12,
            iso: 1e-10,
            witness: 1e-10,
            hull_witness: 1e-9,
            psd: 1e-9,
            rank: 1e-8,
            dist: 1e-6,
            cluster: 1e-6,
            equality: 1e-9,
            probe: 1e-8,
            affine: 1e-10,
            nonaffine: 0.1,
            ucp: 1e-10,
            monotone: 1e-12,
            support: 1e-9,
            dilation: 1e-10,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 16] = [
        "herm",
        "iso",
        "witness",
        "hull_witness",
        "psd",
        "rank",
        "dist",
        "cluster",
        "equality",
        "probe",
        "affine",
        "nonaffine",
        "ucp",
        "monotone",
        "support",
        "dilation",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "herm" => &mut self.herm,
            "iso" => &mut self.iso,
            "witness" => &mut self.witness,
            "hull_witness" => &mut self.hull_witness,
            "psd" => &mut self.psd,
            "rank" => &mut self.rank,
            "dist" => &mut self.dist,
            "cluster" => &mut self.cluster,
            "equality" => &mut self.equality,
            "probe" => &mut self.probe,
            "affine" => &mut self.affine,
            "nonaffine" => &mut self.nonaffine,
            "ucp" => &mut self.ucp,
            "monotone" => &mut self.monotone,
            "support" => &mut self.support,
            "dilation" => &mut self.dilation,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance `{name}` must be a finite nonnegative number, got {value}"
            )));
        }
        let slot = self.slot(name).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown tolerance `{name}` (known: {})",
                Self::NAMES.join(", ")
            ))
        })?;
        *slot = value;
        Ok(())
    }

    /// Parses `name=value`.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (name, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected name=value, got `{assignment}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("tolerance value `{value}` is not a number")))?;
        self.set(name.trim(), value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_is_settable() {
        let mut t = Tolerances::default();
        for name in Tolerances::NAMES {
            t.set(name, 0.5).unwrap();
        }
        assert_eq!(t.rank, 0.5);
        assert_eq!(t.support, 0.5);
    }

    #[test]
    fn unknown_and_malformed_assignments_are_rejected() {
        let mut t = Tolerances::default();
        assert!(t.apply_assignment("rank=1e-7").is_ok());
        assert_eq!(t.rank, 1e-7);
        assert!(t.apply_assignment("bogus=1").is_err());
        assert!(t.apply_assignment("rank").is_err());
        assert!(t.apply_assignment("rank=abc").is_err());
        assert!(t.apply_assignment("rank=-1").is_err());
    }
}
