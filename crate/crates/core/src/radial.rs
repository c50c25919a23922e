//! One-dimensional radial problem in `H¹_r(ℝᴺ)` for any `N ≥ 2`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::flow::{default_seeds, multi_start, FlowConfig, FlowResult};
use crate::grid::{ReducedGrid, Sector, SymmetryConfig};
use crate::nonlinearity::NonlinearitySpec;
use crate::testmaps::{FamilyAudit, TestFamily};

/// A reduced grid in the radial sector.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    grid: Arc<ReducedGrid>,
}

impl RadialGrid {
    pub fn new(dim: usize, n: usize, len: f64) -> Result<Self> {
        let grid = ReducedGrid::new(SymmetryConfig::radial(dim)?, &[n], len)?;
        Ok(Self { grid: Arc::new(grid) })
    }

    pub fn from_grid(grid: Arc<ReducedGrid>) -> Result<Self> {
        if grid.config.sector != Sector::Radial {
            return Err(Error::SectorMismatch { expected: "radial" });
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &Arc<ReducedGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.config.dim
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.grid.len_nodes()).map(|i| self.grid.radius(i)).collect()
    }
}

/// Ground-level minimization on the radial grid from the built-in seeds.
pub fn radial_minimize(m: f64, spec: &NonlinearitySpec, rgrid: &RadialGrid, cfg: &FlowConfig) -> Result<FlowResult> {
    let seeds = default_seeds(rgrid.grid(), spec, m)?;
    multi_start(m, spec, rgrid.grid(), &seeds, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTestmapReport {
    pub audit: FamilyAudit,
    /// `min_s sup_σ I(γ̄ˢ)` over the sampled `s`.
    pub upper_bound: f64,
    pub s_at_min: f64,
}

/// Calibrates the radial plateau family for `k` and audits it at mass `m`.
pub fn radial_testmap_audit(
    k: usize,
    m: f64,
    spec: &NonlinearitySpec,
    dim: usize,
    n_samples: usize,
    s_values: &[f64],
) -> Result<RadialTestmapReport> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let fam = TestFamily::calibrate(k, spec, SymmetryConfig::radial(dim)?, n_samples)?;
    let audit = fam.audit(m, n_samples, s_values)?;
    let (i, upper_bound) = audit
        .sup_energy
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InvalidConfig("no s values".into()))?;
    Ok(RadialTestmapReport {
        s_at_min: s_values[i],
        upper_bound,
        audit,
    })
}

/// `U(r₁, r₂, r₃) = u(|(r₁, r₂, r₃)|)` on a block grid of the same dimension.
/// The result is symmetric under the block swap, so it is never a valid seed
/// in the odd sector; it serves to compare the two discretizations.
pub fn embed_profile(u: &Field, target: &Arc<ReducedGrid>) -> Result<Field> {
    if u.grid().config.sector != Sector::Radial {
        return Err(Error::SectorMismatch { expected: "radial" });
    }
    if target.config.dim != u.dim() {
        return Err(Error::InvalidConfig(format!(
            "dimension mismatch: profile in {}, target in {}",
            u.dim(),
            target.config.dim
        )));
    }
    Field::from_fn(target.clone(), |c| {
        let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        u.interpolate([r, 0.0, 0.0])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{certify, Tolerances};
    use crate::testmaps::log_grid;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn rejects_wrong_sector() {
        let g = Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[16], 1.0).unwrap());
        assert!(RadialGrid::from_grid(g).is_err());
        assert!(RadialGrid::new(1, 10, 1.0).is_err());
    }

    #[test]
    fn ground_state_is_one_signed() {
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let rg = RadialGrid::new(4, 801, 120.0).unwrap();
        let r = radial_minimize(1.0, &spec, &rg, &FlowConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.energy() < 0.0 && r.mu > 0.0);
        let v = r.minimizer.values();
        let sign = v[1].signum();
        assert!(v.iter().all(|x| x * sign >= -1e-12));
        let cert = certify(&r.minimizer, 1.0, &spec, &Tolerances::default()).unwrap();
        assert!(cert.passed && cert.pohozaev_rel < 1e-2, "{cert:?}");
    }

    #[test]
    fn radial_three_dimensions() {
        let spec = NonlinearitySpec::pure_power(3.0, 3).unwrap();
        let rg = RadialGrid::new(3, 401, 60.0).unwrap();
        let r = radial_minimize(40.0, &spec, &rg, &FlowConfig::default()).unwrap();
        assert!(r.converged && r.energy() < 0.0 && r.mu > 0.0);
    }

    #[test]
    fn embedding_preserves_integrals() {
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let rg = RadialGrid::new(4, 801, 12.0).unwrap();
        let u = Field::from_fn(rg.grid().clone(), |c| (-c[0] * c[0] / 2.0).exp()).unwrap();
        let block = Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[161], 12.0 / 2f64.sqrt()).unwrap());
        let e = embed_profile(&u, &block).unwrap();
        let a = u.energy(&spec);
        let b = e.energy(&spec);
        assert!(rel(b.mass, a.mass) < 1e-2, "{} {}", b.mass, a.mass);
        assert!(rel(b.kinetic, a.kinetic) < 1e-2, "{} {}", b.kinetic, a.kinetic);
        assert!(rel(b.potential, a.potential) < 1e-2, "{} {}", b.potential, a.potential);
        assert!(e.symmetry_residual() > 0.1);
    }

    #[test]
    fn plateau_family() {
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let rep = radial_testmap_audit(1, 1.0, &spec, 4, 2, &log_grid(1e-4, 1.0, 17)).unwrap();
        assert!(rep.audit.passes, "{:?}", rep.audit);
        assert_eq!(rep.audit.max_oddness_residual, 0.0);
        assert!((rep.audit.max_sup_norm - rep.audit.zeta).abs() < 1e-12);
        assert!(rep.audit.min_potential >= 1.0);
        assert!(rep.upper_bound < 0.0);
        let two = radial_testmap_audit(2, 1.0, &spec, 4, 16, &log_grid(1e-4, 1.0, 17)).unwrap();
        assert!(two.audit.passes && two.upper_bound < 0.0);
    }
}
