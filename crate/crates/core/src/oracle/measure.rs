//! Mixed discrete measures on a bounded interval: a uniform grid of cell
//! masses plus two boundary atoms created by projection.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("grid mismatch between measures")]
    GridMismatch,
    #[error("mass conservation violated: drift {0:e}")]
    MassConservation(f64),
    #[error("grid must have at least 512 cells, got {0}")]
    GridTooCoarse(usize),
}

/// Law of a projected iterate: cell masses on [lo, hi] plus boundary atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedMeasure1D {
    pub lo: f64,
    pub hi: f64,
    pub density: Vec<f64>,
    pub atom_left: f64,
    pub atom_right: f64,
}

impl MixedMeasure1D {
    pub fn point_mass(lo: f64, hi: f64, n: usize, at: f64) -> Self {
        let mut density = vec![0.0; n];
        let w = (hi - lo) / n as f64;
        let idx = (((at - lo) / w) as usize).min(n - 1);
        density[idx] = 1.0;
        Self {
            lo,
            hi,
            density,
            atom_left: 0.0,
            atom_right: 0.0,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() + self.atom_left + self.atom_right
    }

    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.density.len() as f64
    }

    pub fn mean(&self) -> f64 {
        let w = self.cell_width();
        let mut acc = self.atom_left * self.lo + self.atom_right * self.hi;
        for (i, &m) in self.density.iter().enumerate() {
            acc += m * (self.lo + (i as f64 + 0.5) * w);
        }
        acc / self.total_mass()
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.density.len() == other.density.len()
    }
}

/// Rényi divergence between two mixed measures on the same grid, computed in
/// log space. Returns +infinity when P has mass at a point where Q has none.
pub fn renyi_divergence_mixed(
    p: &MixedMeasure1D,
    q: &MixedMeasure1D,
    alpha: f64,
) -> Result<f64, OracleError> {
    if !p.same_grid(q) {
        return Err(OracleError::GridMismatch);
    }
    let pairs = p
        .density
        .iter()
        .zip(&q.density)
        .map(|(&a, &b)| (a, b))
        .chain([(p.atom_left, q.atom_left), (p.atom_right, q.atom_right)]);

    let mut terms: Vec<f64> = Vec::with_capacity(p.density.len() + 2);
    let mut max_t = f64::NEG_INFINITY;
    for (pm, qm) in pairs {
        if pm == 0.0 {
            continue;
        }
        if qm == 0.0 {
            return Ok(f64::INFINITY);
        }
        let t = alpha * pm.ln() + (1.0 - alpha) * qm.ln();
        max_t = max_t.max(t);
        terms.push(t);
    }
    if terms.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = terms.iter().map(|&t| (t - max_t).exp()).sum();
    Ok(((max_t + sum.ln()) / (alpha - 1.0)).max(0.0))
}

/// Larger of the two divergence directions.
pub fn symmetric_renyi(
    p: &MixedMeasure1D,
    q: &MixedMeasure1D,
    alpha: f64,
) -> Result<f64, OracleError> {
    Ok(renyi_divergence_mixed(p, q, alpha)?.max(renyi_divergence_mixed(q, p, alpha)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn discretized_gaussian(mean: f64, lo: f64, hi: f64, n: usize) -> MixedMeasure1D {
        let w = (hi - lo) / n as f64;
        let pdf = |x: f64| (-(x - mean) * (x - mean) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let density: Vec<f64> = (0..n)
            .map(|i| pdf(lo + (i as f64 + 0.5) * w) * w)
            .collect();
        let body: f64 = density.iter().sum();
        // push the tails into the atoms, split by side
        let tail = 1.0 - body;
        MixedMeasure1D {
            lo,
            hi,
            density,
            atom_left: tail / 2.0,
            atom_right: tail / 2.0,
        }
    }

    #[test]
    fn identical_measures_have_zero_divergence() {
        let p = discretized_gaussian(0.0, -8.0, 8.0, 2048);
        assert_eq!(renyi_divergence_mixed(&p, &p, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn shifted_gaussians_match_closed_form() {
        // D_2(N(0,1) || N(0.5,1)) = 2 * 0.25 / 2 = 0.25
        let p = discretized_gaussian(0.0, -10.0, 10.5, 8192);
        let q = discretized_gaussian(0.5, -10.0, 10.5, 8192);
        let d = renyi_divergence_mixed(&p, &q, 2.0).unwrap();
        assert!((d - 0.25).abs() < 1e-4, "{d}");
    }

    #[test]
    fn missing_support_is_infinite() {
        let mut p = MixedMeasure1D::point_mass(-0.5, 0.5, 512, 0.0);
        let q = MixedMeasure1D::point_mass(-0.5, 0.5, 512, 0.3);
        assert_eq!(renyi_divergence_mixed(&p, &q, 2.0).unwrap(), f64::INFINITY);
        p.atom_left = 0.5;
        p.density.iter_mut().for_each(|m| *m *= 0.5);
        assert_eq!(renyi_divergence_mixed(&p, &q, 2.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let p = MixedMeasure1D::point_mass(-0.5, 0.5, 512, 0.0);
        let q = MixedMeasure1D::point_mass(-0.5, 0.5, 1024, 0.0);
        assert_eq!(
            renyi_divergence_mixed(&p, &q, 2.0),
            Err(OracleError::GridMismatch)
        );
    }

    #[test]
    fn point_mass_bookkeeping() {
        let p = MixedMeasure1D::point_mass(-0.5, 0.5, 512, 0.1);
        assert!((p.total_mass() - 1.0).abs() < 1e-15);
        assert!((p.mean() - 0.1).abs() < 1e-3);
    }
}
