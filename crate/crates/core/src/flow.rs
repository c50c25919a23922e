//! Mass-constrained minimization of `I` on `S_m` intersected with the
//! symmetry sector: projected gradient descent with backtracking.
//!
//! Each step moves along the tangent part of a (by default preconditioned)
//! gradient, antisymmetrizes, and rescales back onto the sphere.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{fill_axis_ghosts, l2_gradient_into, random_smooth, EnergyReport, Field};
use crate::grid::{ReducedGrid, Sector};
use crate::nonlinearity::NonlinearitySpec;
use crate::precond::SobolevPreconditioner;
use crate::testmaps::{log_grid, TestFamily};

/// Metric in which the gradient is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    /// Plain weighted L²; explicit and stiff, needs `dt ~ h²`.
    L2,
    /// `⟨u, v⟩_w + c ⟨∇u, ∇v⟩`. `c = None` picks `m / kinetic(u0)`.
    Sobolev { c: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Initial step; `None` picks `0.1 h²` for L² and `c` for the Sobolev metric.
    pub dt0: Option<f64>,
    pub backtrack: f64,
    /// Absolute tolerance on the weighted norm of the tangent gradient;
    /// `None` means `1e-6 m`.
    pub tol_grad: Option<f64>,
    pub tol_energy: f64,
    pub max_iter: usize,
    pub record_history: bool,
    pub metric: Metric,
    /// Energies above `-vanish_tol` count as the zero level; `None` means
    /// `1e-5 max(1, m)`.
    pub vanish_tol: Option<f64>,
    /// Iterations over which a non-negative energy plateau is detected.
    pub vanish_window: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt0: None,
            backtrack: 0.5,
            tol_grad: None,
            tol_energy: 1e-13,
            max_iter: 200_000,
            record_history: false,
            metric: Metric::Sobolev { c: None },
            vanish_tol: None,
            vanish_window: 200,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if let Some(dt) = self.dt0 {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt0 must be positive, got {dt}"));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad(format!("backtrack must lie in (0, 1), got {}", self.backtrack));
        }
        if let Some(t) = self.tol_grad {
            if !(t > 0.0) {
                return bad(format!("tol_grad must be positive, got {t}"));
            }
        }
        if !(self.tol_energy > 0.0) {
            return bad(format!("tol_energy must be positive, got {}", self.tol_energy));
        }
        if let Some(t) = self.vanish_tol {
            if !(t > 0.0) {
                return bad(format!("vanish_tol must be positive, got {t}"));
            }
        }
        if let Metric::Sobolev { c: Some(c) } = self.metric {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("sobolev weight must be positive, got {c}"));
            }
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        Ok(())
    }

    pub fn tol_grad_for(&self, m: f64) -> f64 {
        self.tol_grad.unwrap_or(1e-6 * m)
    }

    pub fn vanish_tol_for(&self, m: f64) -> f64 {
        self.vanish_tol.unwrap_or(1e-5 * m.max(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    /// Energy stuck at the zero level with vanishing kinetic energy or a flat plateau.
    Vanishing,
    /// Line search could not decrease the energy any further.
    Stalled,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub minimizer: Field,
    pub report: EnergyReport,
    pub converged: bool,
    pub iterations: usize,
    pub history: Option<Vec<HistoryEntry>>,
    pub mu: f64,
    /// Weighted norm of the final tangent gradient.
    pub grad_norm: f64,
    pub termination: Termination,
    /// Final energy sits at the zero level: the infimum is not attained there.
    pub vanishing_regime: bool,
}

impl FlowResult {
    pub fn energy(&self) -> f64 {
        self.report.energy
    }
}

/// Shared per-grid state of the flow.
pub struct FlowWorkspace {
    grid: Arc<ReducedGrid>,
    precond: Option<(f64, SobolevPreconditioner)>,
}

impl FlowWorkspace {
    pub fn new(grid: Arc<ReducedGrid>) -> Self {
        Self { grid, precond: None }
    }

    fn preconditioner(&mut self, c: f64) -> &SobolevPreconditioner {
        let stale = match &self.precond {
            Some((c0, _)) => (*c0 - c).abs() > 1e-12 * c.abs(),
            None => true,
        };
        if stale {
            self.precond = Some((c, SobolevPreconditioner::new(&self.grid, c)));
        }
        &self.precond.as_ref().unwrap().1
    }
}

fn project(grid: &ReducedGrid, values: &mut [f64], m: f64) -> Result<()> {
    if grid.config.sector == Sector::X2Reduced {
        grid.antisymmetrize_in_place(values)?;
    }
    let mass = grid.inner(values, values);
    if !(mass > 0.0) {
        return Err(Error::ZeroField);
    }
    let s = (m / mass).sqrt();
    values.iter_mut().for_each(|v| *v *= s);
    fill_axis_ghosts(grid, values);
    Ok(())
}

pub fn minimize(u0: &Field, m: f64, spec: &NonlinearitySpec, config: &FlowConfig) -> Result<FlowResult> {
    let mut ws = FlowWorkspace::new(u0.grid().clone());
    minimize_in(&mut ws, u0, m, spec, config)
}

pub fn minimize_in(
    ws: &mut FlowWorkspace,
    u0: &Field,
    m: f64,
    spec: &NonlinearitySpec,
    config: &FlowConfig,
) -> Result<FlowResult> {
    config.validate()?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidConfig(format!("mass must be positive, got {m}")));
    }
    if !Arc::ptr_eq(u0.grid(), &ws.grid) && **u0.grid() != *ws.grid {
        return Err(Error::InvalidConfig("seed lives on a different grid".into()));
    }
    let grid = ws.grid.clone();
    if u0.mass() == 0.0 {
        return Err(Error::ZeroInitial);
    }
    let mut u = u0.values().to_vec();
    project(&grid, &mut u, m).map_err(|_| Error::ZeroInitial)?;

    let tol_grad = config.tol_grad_for(m);
    let vanish_tol = config.vanish_tol_for(m);
    let n = u.len();
    let as_field = |v: Vec<f64>| Field::new(grid.clone(), v);

    let mut field = as_field(u.clone())?;
    let mut rep = field.energy(spec);
    let c = match config.metric {
        Metric::L2 => None,
        Metric::Sobolev { c: Some(c) } => Some(c),
        Metric::Sobolev { c: None } => Some(if rep.kinetic > 0.0 { m / rep.kinetic } else { 1.0 }),
    };
    let precond = c.map(|c| ws.preconditioner(c).clone());
    let mut dt = config.dt0.unwrap_or_else(|| match c {
        Some(c) => c,
        None => 0.1 * grid.h_min().powi(2),
    });
    let dt_min = dt * 1e-14;

    let mut g = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut history = config.record_history.then(Vec::new);
    let mut energies: Vec<f64> = Vec::new();
    let mut small_kinetic_run = 0usize;
    let mut termination = Termination::MaxIter;
    let mut grad_norm;
    let mut iterations = 0;

    loop {
        l2_gradient_into(&grid, spec, &u, &mut g);
        let dof = grid.dof_mask();
        for i in 0..n {
            gt[i] = if dof[i] { g[i] + rep.mu * u[i] } else { 0.0 };
        }
        grad_norm = grid.norm(&gt);
        if let Some(h) = history.as_mut() {
            h.push(HistoryEntry {
                iteration: iterations,
                energy: rep.energy,
                grad_norm,
            });
        }
        energies.push(rep.energy);
        if grad_norm <= tol_grad {
            termination = Termination::Converged;
            break;
        }
        if rep.kinetic < 1e-8 && rep.energy.abs() < vanish_tol {
            small_kinetic_run += 1;
            if small_kinetic_run >= 100 {
                termination = Termination::Vanishing;
                break;
            }
        } else {
            small_kinetic_run = 0;
        }
        let w = config.vanish_window;
        if w > 0 && energies.len() > w && rep.energy >= -vanish_tol {
            let drop = energies[energies.len() - 1 - w] - rep.energy;
            if drop <= 1e-6 * rep.energy.abs().max(vanish_tol) {
                termination = Termination::Vanishing;
                break;
            }
        }
        if iterations >= config.max_iter {
            break;
        }

        match &precond {
            Some(p) => d.copy_from_slice(&p.apply(&gt)),
            None => d.copy_from_slice(&gt),
        }
        let along = grid.inner(&u, &d) / m;
        for i in 0..n {
            if dof[i] {
                d[i] -= along * u[i];
            }
        }
        let slope = grid.inner(&gt, &d);
        if !(slope > 0.0) {
            termination = Termination::Stalled;
            break;
        }

        if let Some((u_prev, d_prev)) = &prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for ((i, &w_i), &is_dof) in grid.weights().iter().enumerate().zip(dof) {
                if !is_dof {
                    continue;
                }
                let s = u[i] - u_prev[i];
                let y = d[i] - d_prev[i];
                ss += w_i * s * s;
                sy += w_i * s * y;
            }
            if sy > 0.0 && ss > 0.0 {
                dt = (ss / sy).clamp(dt * 1e-3, dt * 1e3);
            }
        }

        let mut trial = vec![0.0; n];
        let mut accepted: Option<(Field, EnergyReport)> = None;
        loop {
            for i in 0..n {
                trial[i] = u[i] - dt * d[i];
            }
            project(&grid, &mut trial, m)?;
            let f_try = as_field(trial.clone())?;
            let r_try = f_try.energy(spec);
            if r_try.energy <= rep.energy - 1e-4 * dt * slope {
                accepted = Some((f_try, r_try));
                break;
            }
            dt *= config.backtrack;
            if dt < dt_min {
                if r_try.energy <= rep.energy + config.tol_energy * m.max(1.0) {
                    accepted = Some((f_try, r_try));
                }
                break;
            }
        }
        iterations += 1;
        match accepted {
            Some((f_new, r_new)) => {
                let stalled = dt < dt_min;
                prev = Some((std::mem::replace(&mut u, f_new.values().to_vec()), d.clone()));
                field = f_new;
                rep = r_new;
                if stalled {
                    termination = Termination::Stalled;
                    l2_gradient_into(&grid, spec, &u, &mut g);
                    grad_norm = tangent_norm(&grid, &g, &u, rep.mu);
                    break;
                }
            }
            None => {
                termination = Termination::Stalled;
                break;
            }
        }
    }

    let vanishing_regime = termination == Termination::Vanishing || rep.energy >= -vanish_tol;
    let converged = termination == Termination::Converged && !vanishing_regime;
    Ok(FlowResult {
        minimizer: field,
        mu: rep.mu,
        report: rep,
        converged,
        iterations,
        history,
        grad_norm,
        termination,
        vanishing_regime,
    })
}

fn tangent_norm(grid: &ReducedGrid, g: &[f64], u: &[f64], mu: f64) -> f64 {
    let t: Vec<f64> = g
        .iter()
        .zip(u)
        .zip(grid.dof_mask())
        .map(|((g, u), &d)| if d { g + mu * u } else { 0.0 })
        .collect();
    grid.norm(&t)
}

/// Runs [`minimize`] from every seed in parallel and keeps the lowest energy;
/// near-ties go to the smaller tangent gradient.
pub fn multi_start(
    m: f64,
    spec: &NonlinearitySpec,
    grid: &Arc<ReducedGrid>,
    seeds: &[Field],
    config: &FlowConfig,
) -> Result<FlowResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("multi_start needs at least one seed".into()));
    }
    config.validate()?;
    let results: Vec<Result<FlowResult>> = seeds
        .par_iter()
        .map(|s| {
            let mut ws = FlowWorkspace::new(grid.clone());
            minimize_in(&mut ws, s, m, spec, config)
        })
        .collect();
    select_best(results)
}

pub(crate) fn select_best(results: Vec<Result<FlowResult>>) -> Result<FlowResult> {
    let n = results.len();
    let mut best: Option<FlowResult> = None;
    for r in results.into_iter().flatten() {
        best = Some(match best {
            None => r,
            Some(b) => {
                let tie = 1e-12 * b.energy().abs().max(1e-300);
                if r.energy() < b.energy() - tie
                    || ((r.energy() - b.energy()).abs() <= tie && r.grad_norm < b.grad_norm)
                {
                    r
                } else {
                    b
                }
            }
        });
    }
    best.ok_or(Error::AllFailed(n))
}

/// Antisymmetrized Gaussian pair centred at `(c, c/2)` and `(c/2, c)`, mass `m`.
pub fn bump_pair_seed(grid: &Arc<ReducedGrid>, m: f64, center: f64, width: f64) -> Result<Field> {
    if grid.config.sector != Sector::X2Reduced {
        return Err(Error::SectorMismatch { expected: "x2" });
    }
    let w2 = width * width;
    let bump = |a: f64, b: f64| (-(a * a + b * b) / (2.0 * w2)).exp();
    let f = Field::from_fn(grid.clone(), |r| {
        bump(r[0] - center, r[1] - 0.5 * center) - bump(r[0] - 0.5 * center, r[1] - center)
    })?;
    f.normalize_mass(m)
}

/// Centred Gaussian of width `width` (radial sector), mass `m`.
pub fn gaussian_seed(grid: &Arc<ReducedGrid>, m: f64, width: f64) -> Result<Field> {
    let w2 = width * width;
    let f = Field::from_fn(grid.clone(), |r| {
        (-(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]) / (2.0 * w2)).exp()
    })?;
    f.normalize_mass(m)
}

/// Random smooth seed of length scale `length` drawn from `rng_seed`, mass `m`.
pub fn random_seed(grid: &Arc<ReducedGrid>, m: f64, length: f64, rng_seed: u64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    random_smooth(grid, &mut rng, length).normalize_mass(m)
}

/// Support radii of the test-map seeds, as fractions of `L`.
const TESTMAP_SEED_SUPPORT: [f64; 2] = [0.25, 0.5];

/// Default seed set at mass `m`.
///
/// x2 sector: the bump pair at `(L/5, L/10)` plus `γˢ_{m,1}[+1]` at the
/// energy-minimizing `s` (when its support fits) and at support radii
/// `L/4`, `L/2`. Radial sector: two centred Gaussians. Test-map seeds are
/// skipped when no family can be calibrated for `spec`.
pub fn default_seeds(grid: &Arc<ReducedGrid>, spec: &NonlinearitySpec, m: f64) -> Result<Vec<Field>> {
    let len = grid.len;
    match grid.config.sector {
        Sector::Radial => Ok(vec![
            gaussian_seed(grid, m, len / 10.0)?,
            gaussian_seed(grid, m, len / 5.0)?,
        ]),
        Sector::X2Reduced => {
            let mut seeds = vec![bump_pair_seed(grid, m, len / 5.0, len / 10.0)?];
            if let Ok(fam) = TestFamily::calibrate(1, spec, grid.config, 2) {
                let sigma = [1.0];
                let s_fit = fam.s_for_support(&sigma, m, 0.9 * len)?;
                let best = log_grid(s_fit, 1e3 * s_fit, 61)
                    .into_iter()
                    .map(|s| (fam.energy_gamma_s(&sigma, m, s), s))
                    .filter_map(|(e, s)| e.ok().map(|e| (e, s)))
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                let mut s_values: Vec<f64> = TESTMAP_SEED_SUPPORT
                    .iter()
                    .map(|f| fam.s_for_support(&sigma, m, f * len))
                    .collect::<Result<_>>()?;
                if let Some((_, s)) = best {
                    // Keep the support at least a few cells wide.
                    if (fam.cfg.radius + 1.0) / (fam.dilation(&sigma, m)? * s) > 4.0 * grid.h_min() {
                        s_values.insert(0, s);
                    }
                }
                for s in s_values {
                    seeds.push(fam.gamma_s_on(&sigma, m, s, grid)?);
                }
            }
            Ok(seeds)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SymmetryConfig;

    fn setup(n: usize, len: f64) -> (Arc<ReducedGrid>, NonlinearitySpec) {
        let g = Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[n], len).unwrap());
        (g, NonlinearitySpec::pure_power(2.5, 4).unwrap())
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        let bad = [
            FlowConfig {
                dt0: Some(0.0),
                ..Default::default()
            },
            FlowConfig {
                backtrack: 1.0,
                ..Default::default()
            },
            FlowConfig {
                tol_grad: Some(-1.0),
                ..Default::default()
            },
            FlowConfig {
                max_iter: 0,
                ..Default::default()
            },
            FlowConfig {
                metric: Metric::Sobolev { c: Some(0.0) },
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn zero_seed_rejected() {
        let (g, spec) = setup(24, 30.0);
        let z = Field::zeros(g);
        assert!(matches!(
            minimize(&z, 1.0, &spec, &FlowConfig::default()),
            Err(Error::ZeroInitial)
        ));
    }

    #[test]
    fn converges_and_restarts_at_fixed_point() {
        let (g, spec) = setup(40, 80.0);
        let seed = bump_pair_seed(&g, 1.0, 16.0, 8.0).unwrap();
        let cfg = FlowConfig {
            record_history: true,
            ..Default::default()
        };
        let r = minimize(&seed, 1.0, &spec, &cfg).unwrap();
        assert!(r.converged, "{:?} after {} its", r.termination, r.iterations);
        assert!(r.report.energy < 0.0 && r.mu > 0.0);
        assert!((r.report.mass - 1.0).abs() < 1e-12);
        assert!(r.minimizer.symmetry_residual() < 1e-12);
        let h = r.history.as_ref().unwrap();
        assert!(h.windows(2).all(|w| w[1].energy <= w[0].energy + cfg.tol_energy));
        let again = minimize(&r.minimizer, 1.0, &spec, &cfg).unwrap();
        assert!(again.converged && again.iterations <= 2, "{}", again.iterations);

        let el = r.minimizer.el_operator(&spec, r.mu);
        let dof = g.dof_mask();
        let masked: Vec<f64> = el
            .values()
            .iter()
            .zip(dof)
            .map(|(v, &d)| if d { *v } else { 0.0 })
            .collect();
        assert!(g.norm(&masked) <= cfg.tol_grad_for(1.0) * (1.0 + r.minimizer.l2_norm()));
    }

    #[test]
    fn sign_flip_equivariance_and_multistart() {
        let (g, spec) = setup(32, 80.0);
        let seed = bump_pair_seed(&g, 1.0, 16.0, 8.0).unwrap();
        let cfg = FlowConfig::default();
        let a = minimize(&seed, 1.0, &spec, &cfg).unwrap();
        let b = minimize(&seed.scaled(-1.0), 1.0, &spec, &cfg).unwrap();
        assert!((a.energy() - b.energy()).abs() <= 1e-10 * a.energy().abs().max(1.0));
        let single = multi_start(1.0, &spec, &g, std::slice::from_ref(&seed), &cfg).unwrap();
        assert_eq!(single.energy(), a.energy());
        let with_known = multi_start(1.0, &spec, &g, &[seed.clone(), a.minimizer.clone()], &cfg).unwrap();
        assert!(with_known.energy() <= a.energy());
        assert!(matches!(
            multi_start(1.0, &spec, &g, &[], &cfg),
            Err(Error::InvalidConfig(_))
        ));
        let z = Field::zeros(g.clone());
        assert!(matches!(
            multi_start(1.0, &spec, &g, &[z], &cfg),
            Err(Error::AllFailed(1))
        ));
    }

    #[test]
    fn default_seed_sets() {
        let (g, spec) = setup(32, 200.0);
        let seeds = default_seeds(&g, &spec, 1.0).unwrap();
        assert!(seeds.len() >= 3);
        for s in &seeds {
            assert!((s.mass() - 1.0).abs() < 1e-12);
            assert!(s.symmetry_residual() < 1e-12);
        }
        let rg = Arc::new(ReducedGrid::new(SymmetryConfig::radial(4).unwrap(), &[64], 100.0).unwrap());
        assert_eq!(default_seeds(&rg, &spec, 1.0).unwrap().len(), 2);
    }

    #[test]
    fn l2_metric_agrees() {
        let (g, spec) = setup(24, 60.0);
        let seed = bump_pair_seed(&g, 1.0, 14.0, 7.0).unwrap();
        let sob = minimize(&seed, 1.0, &spec, &FlowConfig::default()).unwrap();
        let l2 = minimize(
            &seed,
            1.0,
            &spec,
            &FlowConfig {
                metric: Metric::L2,
                tol_grad: Some(1e-5),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(
            (sob.energy() - l2.energy()).abs() < 1e-5 * sob.energy().abs(),
            "{} {}",
            sob.energy(),
            l2.energy()
        );
    }
}
