//! Necessary conditions for candidate solutions: Pohozaev identity,
//! Euler–Lagrange residual, sign of the multiplier, antisymmetry, sign change
//! and nonradiality. Also the coercivity scan `I ≥ ¼ kinetic - C`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{random_smooth, EnergyReport, Field};
use crate::grid::{ReducedGrid, Sector};
use crate::nonlinearity::NonlinearitySpec;

pub const CERTIFICATE_SCHEMA: &str = "normsol.certificate/1";

/// `P(u) = (N-2)/(2N) kinetic + ½ μ mass - ∫F(u)`.
pub fn pohozaev(u: &Field, mu: f64, spec: &NonlinearitySpec) -> f64 {
    let r = u.energy(spec);
    pohozaev_of(&r, mu, u.dim())
}

pub fn pohozaev_of(r: &EnergyReport, mu: f64, dim: usize) -> f64 {
    let n = dim as f64;
    (n - 2.0) / (2.0 * n) * r.kinetic + 0.5 * mu * r.mass - r.potential
}

/// `|P| / (|kinetic| + |μ| mass + |potential|)`, zero for the zero field.
pub fn pohozaev_rel_of(r: &EnergyReport, dim: usize) -> f64 {
    let p = pohozaev_of(r, r.mu, dim);
    let scale = r.kinetic.abs() + r.mu.abs() * r.mass + r.potential.abs();
    if scale > 0.0 {
        p.abs() / scale
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub pohozaev_rel: f64,
    /// Absolute bound on the weighted EL residual; `None` means `1e-5 max(1, m)`.
    pub el_residual: Option<f64>,
    pub antisym: f64,
    /// Relative mass mismatch accepted by [`certify`].
    pub mass_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pohozaev_rel: 1e-2,
            el_residual: None,
            antisym: 1e-10,
            mass_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionCertificate {
    pub schema: String,
    pub sector: Sector,
    pub energy: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub mu: f64,
    pub pohozaev_abs: f64,
    pub pohozaev_rel: f64,
    pub el_residual: f64,
    pub antisym_residual: f64,
    pub sign_changing: bool,
    pub nonradiality: f64,
    /// Relative gap in `I - P = kinetic/N - ½ μ mass`.
    pub identity_gap: f64,
    pub passed: bool,
}

pub fn certify(u: &Field, m: f64, spec: &NonlinearitySpec, tol: &Tolerances) -> Result<SolutionCertificate> {
    let r = u.energy(spec);
    if !(m > 0.0) || ((r.mass - m) / m).abs() > tol.mass_rel {
        return Err(Error::MassMismatch {
            expected: m,
            found: r.mass,
        });
    }
    let grid = u.grid();
    let dim = u.dim();
    let n = dim as f64;
    let p = pohozaev_of(&r, r.mu, dim);
    let el = u.el_operator(spec, r.mu);
    let el_residual = el.l2_norm();
    let sector = grid.config.sector;
    let antisym_residual = u.symmetry_residual();
    let sup = u.sup_norm();
    let theta = 1e-8 * sup;
    let (lo, hi) = u
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let sign_changing = lo < -theta && hi > theta;
    let nonradiality = match sector {
        Sector::X2Reduced => grid.radial_profile(u.values())?.deviation,
        Sector::Radial => 0.0,
    };
    let lhs = r.energy - p;
    let rhs = r.kinetic / n - 0.5 * r.mu * r.mass;
    let identity_gap = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    let pohozaev_rel = pohozaev_rel_of(&r, dim);
    let el_tol = tol.el_residual.unwrap_or(1e-5 * m.max(1.0));
    let mut passed = pohozaev_rel <= tol.pohozaev_rel && el_residual <= el_tol && (r.energy >= 0.0 || r.mu > 0.0);
    if sector == Sector::X2Reduced {
        passed &= antisym_residual <= tol.antisym && sign_changing;
    }
    Ok(SolutionCertificate {
        schema: CERTIFICATE_SCHEMA.to_string(),
        sector,
        energy: r.energy,
        mass: r.mass,
        kinetic: r.kinetic,
        potential: r.potential,
        mu: r.mu,
        pohozaev_abs: p.abs(),
        pohozaev_rel,
        el_residual,
        antisym_residual,
        sign_changing,
        nonradiality,
        identity_gap,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivitySample {
    pub length: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub m: f64,
    pub n_samples: usize,
    /// `max(¼ kinetic - I, 0)` over the samples.
    pub c_empirical: f64,
    pub violations: usize,
    /// Largest `(¼ kinetic - I)/kinetic` over the top kinetic decile.
    pub top_decile_ratio: f64,
    pub decile_passed: bool,
    pub finite: bool,
    pub passed: bool,
    pub samples: Vec<CoercivitySample>,
}

/// Random smooth field of mass `mass` with a length scale drawn log-uniformly
/// from `[3h, L/6]`.
pub(crate) fn random_scale_field(grid: &Arc<ReducedGrid>, rng: &mut ChaCha8Rng, mass: f64) -> Result<Field> {
    let lo = (3.0 * grid.h_min()).ln();
    let hi = (grid.len / 6.0).ln();
    if !(hi > lo) {
        return Err(Error::DomainTooSmall("grid too coarse for a scale sweep".into()));
    }
    let length = Uniform::new(lo, hi).expect("nonempty range").sample(rng).exp();
    random_smooth(grid, rng, length).normalize_mass(mass)
}

/// Random smooth fields with mass in `(0, m]` and length scales log-uniform
/// over `[3h, L/6]`; the scale range probes concentration as far as the grid
/// resolves it.
pub fn coercivity_scan(
    spec: &NonlinearitySpec,
    grid: &Arc<ReducedGrid>,
    m: f64,
    n_samples: usize,
    rng_seed: u64,
) -> Result<CoercivityReport> {
    if n_samples < 10 {
        return Err(Error::InvalidConfig(format!(
            "coercivity scan needs at least 10 samples, got {n_samples}"
        )));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidConfig(format!("mass must be positive, got {m}")));
    }
    let lo = (3.0 * grid.h_min()).ln();
    let hi = (grid.len / 6.0).ln();
    if !(hi > lo) {
        return Err(Error::DomainTooSmall("grid too coarse for a scale sweep".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let log_len = Uniform::new(lo, hi).expect("nonempty range");
    let frac = Uniform::new_inclusive(0.1, 1.0).expect("nonempty range");
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let length = log_len.sample(&mut rng).exp();
        // Every other sample sits exactly on the sphere S_m.
        let mass = if i % 2 == 0 { m } else { m * frac.sample(&mut rng) };
        let u = random_smooth(grid, &mut rng, length).normalize_mass(mass)?;
        let r = u.energy(spec);
        samples.push(CoercivitySample {
            length,
            mass: r.mass,
            kinetic: r.kinetic,
            energy: r.energy,
        });
    }
    let gap = |s: &CoercivitySample| 0.25 * s.kinetic - s.energy;
    let c_empirical = samples.iter().map(gap).fold(0.0, f64::max);
    let violations = samples
        .iter()
        .filter(|s| s.energy < 0.25 * s.kinetic - c_empirical - 1e-12)
        .count();
    let mut by_kinetic: Vec<&CoercivitySample> = samples.iter().collect();
    by_kinetic.sort_by(|a, b| b.kinetic.total_cmp(&a.kinetic));
    let top = (n_samples / 10).max(1);
    let top_decile_ratio = by_kinetic[..top]
        .iter()
        .map(|s| gap(s) / s.kinetic)
        .fold(f64::NEG_INFINITY, f64::max);
    let decile_passed = top_decile_ratio <= 0.0;
    let finite = c_empirical.is_finite();
    Ok(CoercivityReport {
        m,
        n_samples,
        c_empirical,
        violations,
        top_decile_ratio,
        decile_passed,
        finite,
        passed: finite && violations == 0 && decile_passed,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{bump_pair_seed, minimize, FlowConfig};
    use crate::grid::SymmetryConfig;

    fn x2(n: usize, len: f64) -> Arc<ReducedGrid> {
        Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[n], len).unwrap())
    }

    fn zero_f() -> NonlinearitySpec {
        NonlinearitySpec::truncated(NonlinearitySpec::pure_power(2.5, 4).unwrap(), 1e-300).unwrap()
    }

    #[test]
    fn pohozaev_of_zero() {
        let g = x2(16, 2.0);
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        assert_eq!(pohozaev(&Field::zeros(g), 3.0, &spec), 0.0);
    }

    #[test]
    fn certify_rejects_mass_mismatch() {
        let g = x2(16, 2.0);
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        assert!(matches!(
            certify(&Field::zeros(g), 1.0, &spec, &Tolerances::default()),
            Err(Error::MassMismatch { .. })
        ));
    }

    #[test]
    fn identity_holds_for_random_fields() {
        let g = x2(48, 8.0);
        let spec = NonlinearitySpec::power_difference(2.5, 3.5, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let u = random_smooth(&g, &mut rng, 2.0).normalize_mass(3.0).unwrap();
            let c = certify(&u, 3.0, &spec, &Tolerances::default()).unwrap();
            assert!(c.identity_gap < 1e-10, "{}", c.identity_gap);
            assert!(c.sign_changing);
            let again = certify(&u, 3.0, &spec, &Tolerances::default()).unwrap();
            assert_eq!(c, again);
        }
    }

    #[test]
    fn converged_minimizer_certifies() {
        let g = x2(64, 200.0);
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let seed = bump_pair_seed(&g, 1.0, 40.0, 20.0).unwrap();
        let r = minimize(&seed, 1.0, &spec, &FlowConfig::default()).unwrap();
        assert!(r.converged);
        let c = certify(&r.minimizer, 1.0, &spec, &Tolerances::default()).unwrap();
        assert!(c.passed, "{c:?}");
        assert!(c.mu > 0.0 && c.energy < 0.0);
        assert!(c.nonradiality > 0.99);
        assert_eq!(c.schema, CERTIFICATE_SCHEMA);
    }

    #[test]
    fn radial_certificate_skips_sector_checks() {
        let g = Arc::new(ReducedGrid::new(SymmetryConfig::radial(4).unwrap(), &[64], 10.0).unwrap());
        let u = Field::from_fn(g, |c| (-c[0] * c[0]).exp())
            .unwrap()
            .normalize_mass(1.0)
            .unwrap();
        let c = certify(&u, 1.0, &zero_f(), &Tolerances::default()).unwrap();
        assert!(!c.sign_changing);
        assert_eq!(c.antisym_residual, 0.0);
        assert_eq!(c.nonradiality, 0.0);
    }

    #[test]
    fn coercivity_with_zero_f() {
        let g = x2(48, 30.0);
        let rep = coercivity_scan(&zero_f(), &g, 1.0, 20, 7).unwrap();
        assert_eq!(rep.c_empirical, 0.0);
        assert!(rep.passed);
        assert!(matches!(
            coercivity_scan(&zero_f(), &g, 1.0, 5, 7),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn coercivity_pure_power() {
        let g = x2(96, 60.0);
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let rep = coercivity_scan(&spec, &g, 1.0, 40, 11).unwrap();
        assert!(rep.finite && rep.violations == 0);
        assert!(rep.decile_passed, "{}", rep.top_decile_ratio);
    }
}
