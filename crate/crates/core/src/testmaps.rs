//! Explicit odd families `π_k`, `γ_{m,k}` and `γˢ_{m,k}` in the antisymmetric
//! sector, used as certificates of negative energy and as flow seeds.
//!
//! `π_k[σ](x) = τ_{k,R}[σ](|x|) χ(r1 - r2)`. For `k = 1` the radial factor is
//! `σ` times a plateau of height `ζ` on `B_R`; for `k ≥ 2` it is a stack of
//! `k` equal-volume shells inside `B_R`, shell `i` carrying the amplitude
//! `ζ sign(σ_i) min(1, √k |σ_i|)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{ReducedGrid, Sector, SymmetryConfig};
use crate::nonlinearity::{check_hypotheses, NonlinearitySpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMapConfig {
    pub k: usize,
    /// Plateau radius `R`.
    pub radius: f64,
    pub zeta: f64,
    /// Width of the `χ` transition.
    pub ramp: f64,
}

impl TestMapConfig {
    pub fn new(k: usize, radius: f64, zeta: f64) -> Self {
        Self {
            k,
            radius,
            zeta,
            ramp: 1.0,
        }
    }

    pub fn validate(&self, spec: &NonlinearitySpec) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 {
            return bad("family dimension k must be at least 1".into());
        }
        if !(self.radius > 2.0 * (self.k as f64 + 1.0)) {
            return bad(format!(
                "plateau radius {} must exceed 2(k+1) = {}",
                self.radius,
                2 * (self.k + 1)
            ));
        }
        if !(self.zeta > 0.0 && spec.big_f(self.zeta) > 0.0) {
            return bad(format!("plateau height {} needs zeta > 0 and F(zeta) > 0", self.zeta));
        }
        if !(self.ramp > 0.0) {
            return bad(format!("ramp must be positive, got {}", self.ramp));
        }
        Ok(())
    }

    /// Smallest admissible radius for dimension `k`.
    pub fn min_radius(k: usize) -> f64 {
        2.0 * (k as f64 + 1.0) + 0.25
    }
}

/// Odd `C¹` cutoff: cubic smoothstep on `|t| ≤ ramp`, `sign(t)` beyond.
pub fn chi(t: f64, ramp: f64) -> f64 {
    if t >= ramp {
        1.0
    } else if t <= -ramp {
        -1.0
    } else {
        t * (3.0 * ramp * ramp - t * t) / (2.0 * ramp * ramp * ramp)
    }
}

fn plateau(r: f64, radius: f64, zeta: f64) -> f64 {
    if r <= radius {
        zeta
    } else if r < radius + 1.0 {
        zeta * (radius + 1.0 - r)
    } else {
        0.0
    }
}

/// `ζ` on `B_R`, linear to zero on `[R, R+1]`, as a function of `|x|`.
pub fn plateau_radial(radius: f64, zeta: f64, grid: &Arc<ReducedGrid>) -> Result<Field> {
    if radius + 1.0 >= grid.len {
        return Err(Error::DomainTooSmall(format!(
            "plateau needs R + 1 < L, got R = {radius}, L = {}",
            grid.len
        )));
    }
    let values = (0..grid.len_nodes())
        .map(|idx| plateau(grid.radius(idx), radius, zeta))
        .collect();
    Field::new(grid.clone(), values)
}

/// Radial factor `τ_{k,R}[σ](r)`.
pub fn tau(sigma: &[f64], cfg: &TestMapConfig, dim: usize, r: f64) -> f64 {
    let k = sigma.len();
    if k == 1 {
        return sigma[0].signum() * plateau(r, cfg.radius, cfg.zeta);
    }
    if r >= cfg.radius + 1.0 {
        return 0.0;
    }
    let amp = |i: usize| {
        let s = sigma[i];
        if s == 0.0 {
            0.0
        } else {
            cfg.zeta * s.signum() * (s.abs() * (k as f64).sqrt()).min(1.0)
        }
    };
    if r >= cfg.radius {
        return amp(k - 1) * (cfg.radius + 1.0 - r);
    }
    let edges: Vec<f64> = (0..=k)
        .map(|i| cfg.radius * (i as f64 / k as f64).powf(1.0 / dim as f64))
        .collect();
    let min_width = edges.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let half = 0.5 * (0.5 * min_width).min(1.0);
    for i in 1..k {
        let e = edges[i];
        if (r - e).abs() < half {
            let t = (r - (e - half)) / (2.0 * half);
            let (a, b) = (amp(i - 1), amp(i));
            return a + (b - a) * t;
        }
    }
    let shell = edges[1..k].iter().take_while(|&&e| r >= e).count();
    amp(shell)
}

/// `π_k[σ]` at reduced coordinates: `τ(|x|) χ(r1 - r2)` in the x2 sector,
/// plain `τ(r)` in the radial sector.
fn pi_value(sigma: &[f64], cfg: &TestMapConfig, dim: usize, sector: Sector, c: [f64; 3]) -> f64 {
    match sector {
        Sector::Radial => tau(sigma, cfg, dim, c[0]),
        Sector::X2Reduced => {
            let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            let t = tau(sigma, cfg, dim, r);
            if t == 0.0 {
                return 0.0;
            }
            t * chi(c[0] - c[1], cfg.ramp)
        }
    }
}

fn check_sigma(sigma: &[f64], k: usize) -> Result<()> {
    if sigma.len() != k {
        return Err(Error::InvalidConfig(format!(
            "sigma must have {k} components, got {}",
            sigma.len()
        )));
    }
    let n2: f64 = sigma.iter().map(|s| s * s).sum();
    if (n2 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "sigma must be a unit vector, |sigma|² = {n2}"
        )));
    }
    Ok(())
}

/// `π_k[σ]` sampled on a grid; in the radial sector the `χ` factor is dropped.
pub fn pi_k(sigma: &[f64], cfg: &TestMapConfig, grid: &Arc<ReducedGrid>, spec: &NonlinearitySpec) -> Result<Field> {
    cfg.validate(spec)?;
    check_sigma(sigma, cfg.k)?;
    if cfg.radius + 1.0 >= grid.len {
        return Err(Error::DomainTooSmall(format!(
            "test map needs R + 1 < L, got R = {}, L = {}",
            cfg.radius, grid.len
        )));
    }
    let (dim, sector) = (grid.config.dim, grid.config.sector);
    Field::from_fn(grid.clone(), |c| pi_value(sigma, cfg, dim, sector, c))
}

/// Dilation factor `λ = m^{-1/N} ‖π‖^{2/N}` with `γ(x) = π(λx)`.
pub fn dilation_factor(pi_mass: f64, m: f64, dim: usize) -> f64 {
    (pi_mass / m).powf(1.0 / dim as f64)
}

/// `γ_{m,k}[σ]` sampled on `grid`; `‖π‖` is taken from the same grid and the
/// result is renormalized to mass `m`.
pub fn gamma_mk(
    sigma: &[f64],
    m: f64,
    cfg: &TestMapConfig,
    grid: &Arc<ReducedGrid>,
    spec: &NonlinearitySpec,
) -> Result<Field> {
    let pi = pi_k(sigma, cfg, grid, spec)?;
    let lambda = dilation_factor(pi.mass(), m, grid.config.dim);
    let (dim, sector) = (grid.config.dim, grid.config.sector);
    let g = Field::from_fn(grid.clone(), |c| {
        pi_value(sigma, cfg, dim, sector, [lambda * c[0], lambda * c[1], lambda * c[2]])
    })?;
    g.normalize_mass(m)
}

/// Quadrature data of one family member on its native grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberStats {
    pub mass: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub sup_norm: f64,
}

/// A calibrated family on a grid that resolves `π_k`.
#[derive(Debug, Clone)]
pub struct TestFamily {
    pub cfg: TestMapConfig,
    pub spec: NonlinearitySpec,
    pub grid: Arc<ReducedGrid>,
}

/// Nodes per axis of the native grid used by [`TestFamily::calibrate`].
pub const NATIVE_NODES: usize = 161;

/// Smallest `s` the native grid must hold for the rescaling cross-check.
const CROSSCHECK_S: f64 = 0.7;

impl TestFamily {
    pub fn new(cfg: TestMapConfig, spec: NonlinearitySpec, grid: Arc<ReducedGrid>) -> Result<Self> {
        cfg.validate(&spec)?;
        if cfg.radius + 1.0 >= grid.len {
            return Err(Error::DomainTooSmall(format!(
                "test map needs R + 1 < L, got R = {}, L = {}",
                cfg.radius, grid.len
            )));
        }
        Ok(Self { cfg, spec, grid })
    }

    /// Grows `R` from `2(k+1)` until every sampled member has `∫F(π) ≥ 1`,
    /// building a fresh native grid for each trial radius.
    pub fn calibrate(k: usize, spec: &NonlinearitySpec, sym: SymmetryConfig, n_samples: usize) -> Result<Self> {
        let zeta = check_hypotheses(spec, sym.dim)?.zeta_or_err()?;
        let samples = sphere_samples(k, n_samples.max(2 * k));
        let mut radius = TestMapConfig::min_radius(k);
        let cap = 64.0 * TestMapConfig::min_radius(k);
        while radius <= cap {
            let len = (radius + 1.0) / CROSSCHECK_S + 1.0;
            let grid = Arc::new(ReducedGrid::new(sym, &[NATIVE_NODES], len)?);
            let fam = Self::new(TestMapConfig::new(k, radius, zeta), spec.clone(), grid)?;
            if fam.min_potential(&samples)? >= 1.0 {
                return Ok(fam);
            }
            radius *= 1.25;
        }
        Err(Error::CalibrationFailed(format!(
            "no plateau radius up to {cap:.1} gives F-integral >= 1 for k = {k}"
        )))
    }

    /// Calibrates on a fixed grid, searching `R ≤ L - 1`.
    pub fn calibrate_on(k: usize, spec: &NonlinearitySpec, grid: Arc<ReducedGrid>, n_samples: usize) -> Result<Self> {
        let zeta = check_hypotheses(spec, grid.config.dim)?.zeta_or_err()?;
        let samples = sphere_samples(k, n_samples.max(2 * k));
        let mut radius = TestMapConfig::min_radius(k);
        while radius + 1.0 < grid.len {
            let fam = Self::new(TestMapConfig::new(k, radius, zeta), spec.clone(), grid.clone())?;
            if fam.min_potential(&samples)? >= 1.0 {
                return Ok(fam);
            }
            radius += 0.5;
        }
        Err(Error::CalibrationFailed(format!(
            "no plateau radius below L - 1 = {} gives F-integral >= 1 for k = {k}",
            grid.len - 1.0
        )))
    }

    fn min_potential(&self, samples: &[Vec<f64>]) -> Result<f64> {
        let stats: Result<Vec<MemberStats>> = samples.par_iter().map(|s| self.stats(s)).collect();
        Ok(stats?.iter().map(|s| s.potential).fold(f64::INFINITY, f64::min))
    }

    pub fn dim(&self) -> usize {
        self.grid.config.dim
    }

    pub fn pi(&self, sigma: &[f64]) -> Result<Field> {
        pi_k(sigma, &self.cfg, &self.grid, &self.spec)
    }

    pub fn stats(&self, sigma: &[f64]) -> Result<MemberStats> {
        let pi = self.pi(sigma)?;
        let r = pi.energy(&self.spec);
        Ok(MemberStats {
            mass: r.mass,
            kinetic: r.kinetic,
            potential: r.potential,
            sup_norm: pi.sup_norm(),
        })
    }

    /// `I(γˢ_{m,k}[σ]) = ½ s² λ^{2-N} K(π) - (λs)^{-N} ∫F(s^{N/2} π)`.
    pub fn energy_gamma_s(&self, sigma: &[f64], m: f64, s: f64) -> Result<f64> {
        let pi = self.pi(sigma)?;
        Ok(self.energy_gamma_s_of(&pi, m, s))
    }

    fn energy_gamma_s_of(&self, pi: &Field, m: f64, s: f64) -> f64 {
        let (kin, pot) = self.parts_gamma_s_of(pi, m, s);
        0.5 * kin - pot
    }

    /// Kinetic energy and `∫F` of `γˢ_{m,k}[σ]` by exact scaling.
    pub fn parts_gamma_s(&self, sigma: &[f64], m: f64, s: f64) -> Result<(f64, f64)> {
        let pi = self.pi(sigma)?;
        Ok(self.parts_gamma_s_of(&pi, m, s))
    }

    fn parts_gamma_s_of(&self, pi: &Field, m: f64, s: f64) -> (f64, f64) {
        let n = self.dim() as f64;
        let lambda = dilation_factor(pi.mass(), m, self.dim());
        let amp = s.powf(n / 2.0);
        let pot: f64 = self
            .grid
            .weights()
            .iter()
            .zip(pi.values())
            .filter(|(w, v)| **w > 0.0 && **v != 0.0)
            .map(|(w, v)| w * self.spec.big_f(amp * v))
            .sum();
        (s * s * lambda.powf(2.0 - n) * pi.kinetic(), (lambda * s).powf(-n) * pot)
    }

    /// `γˢ_{m,k}[σ]` sampled on another grid of the same sector, renormalized to mass `m`.
    pub fn gamma_s_on(&self, sigma: &[f64], m: f64, s: f64, target: &Arc<ReducedGrid>) -> Result<Field> {
        if target.config != self.grid.config {
            return Err(Error::InvalidConfig(
                "target grid has a different symmetry setting".into(),
            ));
        }
        check_sigma(sigma, self.cfg.k)?;
        let pi = self.pi(sigma)?;
        let (dim, sector) = (self.dim(), self.grid.config.sector);
        let scale = dilation_factor(pi.mass(), m, dim) * s;
        let amp = s.powf(dim as f64 / 2.0);
        let f = Field::from_fn(target.clone(), |c| {
            amp * pi_value(
                sigma,
                &self.cfg,
                dim,
                sector,
                [scale * c[0], scale * c[1], scale * c[2]],
            )
        })?;
        f.normalize_mass(m)
    }

    /// `λ = m^{-1/N} ‖π_k[σ]‖^{2/N}`.
    pub fn dilation(&self, sigma: &[f64], m: f64) -> Result<f64> {
        Ok(dilation_factor(self.pi(sigma)?.mass(), m, self.dim()))
    }

    /// `s` for which the support of `γˢ_{m,k}` has radius `target_radius`.
    pub fn s_for_support(&self, sigma: &[f64], m: f64, target_radius: f64) -> Result<f64> {
        let pi = self.pi(sigma)?;
        let lambda = dilation_factor(pi.mass(), m, self.dim());
        Ok((self.cfg.radius + 1.0) / (lambda * target_radius))
    }

    /// `g_k(m) = ½ α β^{(2-N)/N} m^{(N-2)/N} - m/β'` from sampled `α = max K(π)`,
    /// `β = min ‖π‖²`, `β' = max ‖π‖²`, together with the largest sampled
    /// `I(γ_{m,k}[σ])`.
    pub fn energy_bound(&self, m: f64, samples: &[Vec<f64>]) -> Result<EnergyBound> {
        let n = self.dim() as f64;
        let stats: Result<Vec<MemberStats>> = samples.par_iter().map(|s| self.stats(s)).collect();
        let stats = stats?;
        let alpha = stats.iter().map(|s| s.kinetic).fold(0.0, f64::max);
        let beta = stats.iter().map(|s| s.mass).fold(f64::INFINITY, f64::min);
        let beta_p = stats.iter().map(|s| s.mass).fold(0.0, f64::max);
        let bound = 0.5 * alpha * beta.powf((2.0 - n) / n) * m.powf((n - 2.0) / n) - m / beta_p;
        let max_energy = stats
            .iter()
            .map(|s| 0.5 * m.powf((n - 2.0) / n) * s.kinetic / s.mass.powf((n - 2.0) / n) - m * s.potential / s.mass)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(EnergyBound {
            alpha,
            beta,
            beta_prime: beta_p,
            bound,
            max_energy,
        })
    }

    pub fn audit(&self, m: f64, n_samples: usize, s_values: &[f64]) -> Result<FamilyAudit> {
        let k = self.cfg.k;
        if n_samples < 2 * k {
            return Err(Error::InvalidConfig(format!(
                "need at least 2k = {} samples, got {n_samples}",
                2 * k
            )));
        }
        let samples = sphere_samples(k, n_samples);
        let members: Vec<Result<(Field, Field)>> = samples
            .par_iter()
            .map(|s| {
                let neg: Vec<f64> = s.iter().map(|x| -x).collect();
                Ok((self.pi(s)?, self.pi(&neg)?))
            })
            .collect();
        let mut min_potential = f64::INFINITY;
        let mut max_sup: f64 = 0.0;
        let mut max_odd: f64 = 0.0;
        let mut max_sym: f64 = 0.0;
        let mut fields = Vec::with_capacity(members.len());
        for mres in members {
            let (p, q) = mres?;
            min_potential = min_potential.min(p.energy(&self.spec).potential);
            max_sup = max_sup.max(p.sup_norm());
            max_sym = max_sym.max(p.symmetry_residual());
            let odd = p
                .values()
                .iter()
                .zip(q.values())
                .fold(0.0f64, |a, (x, y)| a.max((x + y).abs()));
            max_odd = max_odd.max(odd);
            fields.push(p);
        }
        let sup_energy: Vec<f64> = s_values
            .par_iter()
            .map(|&s| {
                fields
                    .iter()
                    .map(|p| self.energy_gamma_s_of(p, m, s))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let mut order: Vec<usize> = (0..s_values.len()).collect();
        order.sort_by(|&a, &b| s_values[a].total_cmp(&s_values[b]));
        let mut s_star = None;
        for &i in &order {
            if sup_energy[i] < 0.0 {
                s_star = Some(s_values[i]);
            } else {
                break;
            }
        }
        let bound = self.energy_bound(m, &samples)?;
        let sup_bound = match self.grid.config.sector {
            Sector::X2Reduced => 2.0 * self.cfg.zeta,
            Sector::Radial => self.cfg.zeta,
        };
        let passes = max_odd == 0.0 && max_sup <= sup_bound && min_potential >= 1.0 && max_sym <= 1e-12;
        Ok(FamilyAudit {
            k,
            radius: self.cfg.radius,
            zeta: self.cfg.zeta,
            m,
            n_samples: samples.len(),
            min_potential,
            max_sup_norm: max_sup,
            max_oddness_residual: max_odd,
            max_symmetry_residual: max_sym,
            s_values: s_values.to_vec(),
            sup_energy,
            s_star,
            bound,
            passes,
        })
    }

    /// Relative gap between [`Field::rescale_s`] energies on the native grid
    /// and the exact scaling formula at `λ = 1`.
    pub fn rescale_crosscheck(&self, sigma: &[f64], s: f64) -> Result<f64> {
        if !(CROSSCHECK_S..=1.0).contains(&s) {
            return Err(Error::InvalidConfig(format!(
                "cross-check needs s in [{CROSSCHECK_S}, 1], got {s}"
            )));
        }
        let pi = self.pi(sigma)?;
        let m = pi.mass();
        let direct = pi.rescale_s(s).energy(&self.spec).energy;
        let formula = self.energy_gamma_s_of(&pi, m, s);
        Ok(((direct - formula) / formula).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBound {
    pub alpha: f64,
    pub beta: f64,
    pub beta_prime: f64,
    /// `g_k(m)`.
    pub bound: f64,
    /// `max_σ I(γ_{m,k}[σ])` over the samples.
    pub max_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAudit {
    pub k: usize,
    pub radius: f64,
    pub zeta: f64,
    pub m: f64,
    pub n_samples: usize,
    pub min_potential: f64,
    pub max_sup_norm: f64,
    pub max_oddness_residual: f64,
    pub max_symmetry_residual: f64,
    pub s_values: Vec<f64>,
    /// `sup_σ I(γˢ_{m,k}[σ])` for each entry of `s_values`.
    pub sup_energy: Vec<f64>,
    /// Largest sampled `s` below which every sampled sup is negative.
    pub s_star: Option<f64>,
    pub bound: EnergyBound,
    pub passes: bool,
}

/// Log-spaced `s` values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Family audit with a freshly calibrated family; see [`TestFamily::audit`].
pub fn family_audit(
    cfg: &TestMapConfig,
    m: f64,
    n_samples: usize,
    grid: &Arc<ReducedGrid>,
    spec: &NonlinearitySpec,
) -> Result<FamilyAudit> {
    let fam = TestFamily::new(*cfg, spec.clone(), grid.clone())?;
    fam.audit(m, n_samples, &log_grid(1e-4, 1.0, 25))
}

/// Points on `S^{k-1}`: the `±e_i` vertices, then antipodal pairs of
/// equally spaced (k = 2) or Halton-based (k ≥ 3) points, `n` in total
/// (rounded up to even). `k = 1` always gives `{+1, -1}`.
pub fn sphere_samples(k: usize, n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        out.push(e.clone());
        e[i] = -1.0;
        out.push(e);
    }
    if k == 1 {
        return out;
    }
    let pairs = n.saturating_sub(2 * k).div_ceil(2);
    if k == 2 {
        for j in 0..pairs {
            // Offset by half a step so vertices are not repeated.
            let th = std::f64::consts::PI * (j as f64 + 0.5) / pairs as f64;
            let (s, c) = th.sin_cos();
            out.push(vec![c, s]);
            out.push(vec![-c, -s]);
        }
        return out;
    }
    let normal = Normal::standard();
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let mut j = 1u64;
    while out.len() < 2 * k + 2 * pairs {
        let v: Vec<f64> = (0..k)
            .map(|d| normal.inverse_cdf(halton(j, PRIMES[d % PRIMES.len()])))
            .collect();
        j += 1;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let p: Vec<f64> = v.iter().map(|x| x / norm).collect();
        out.push(p.iter().map(|x| -x).collect());
        out.push(p);
    }
    out
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}
