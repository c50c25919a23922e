//! The curve `m ↦ E_m`, its monotonicity and subadditivity audits, the
//! threshold `m*`, test-map upper bounds for the minimax levels `E_{m,k}`,
//! and the small-mass positivity audit.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{pohozaev_rel_of, random_scale_field};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::flow::{default_seeds, multi_start, FlowConfig, FlowResult};
use crate::grid::{ReducedGrid, SymmetryConfig};
use crate::nonlinearity::{check_hypotheses, mass_critical_exponent, NonlinearitySpec};
use crate::testmaps::{sphere_samples, TestFamily};

/// Energies at or above `-eps_zero(m)` count as the zero level.
pub fn eps_zero(m: f64) -> f64 {
    1e-5 * m.max(1.0)
}

/// Energies at or below `-eps_neg(m)` are clearly negative.
pub fn eps_neg(m: f64) -> f64 {
    1e-3 * m.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyClass {
    Negative,
    Zero,
    Ambiguous,
}

pub fn classify(energy: f64, m: f64) -> EnergyClass {
    if energy <= -eps_neg(m) {
        EnergyClass::Negative
    } else if energy >= -eps_zero(m) {
        EnergyClass::Zero
    } else {
        EnergyClass::Ambiguous
    }
}

/// Produces fresh seeds of mass `m` on a grid.
pub type SeedFn<'a> = dyn Fn(&Arc<ReducedGrid>, f64) -> Result<Vec<Field>> + Sync + 'a;

fn builtin_seeds(spec: &NonlinearitySpec) -> impl Fn(&Arc<ReducedGrid>, f64) -> Result<Vec<Field>> + Sync + '_ {
    move |g, m| default_seeds(g, spec, m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmPoint {
    pub m: f64,
    pub energy: f64,
    pub attained: bool,
    pub vanishing_regime: bool,
    pub converged: bool,
    pub mu: f64,
    pub pohozaev_rel: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Lowest energy among the seeds handed to the flow.
    pub best_seed_energy: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: NonlinearitySpec,
    pub symmetry: SymmetryConfig,
    pub n: Vec<usize>,
    pub len: f64,
    pub flow: FlowConfig,
}

impl Provenance {
    fn new(spec: &NonlinearitySpec, grid: &ReducedGrid, flow: &FlowConfig) -> Self {
        Self {
            spec: spec.clone(),
            symmetry: grid.config,
            n: grid.shape(),
            len: grid.len,
            flow: flow.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmCurve {
    pub points: Vec<EmPoint>,
    pub provenance: Provenance,
    #[serde(skip)]
    pub minimizers: Vec<Option<Field>>,
}

impl EmCurve {
    pub fn m_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.m).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.energy).collect()
    }

    /// CSV with columns `m,E,attained,vanishing,converged,mu,pohozaev_rel`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,E,attained,vanishing,converged,mu,pohozaev_rel\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:e},{:e},{},{},{},{:e},{:e}\n",
                p.m, p.energy, p.attained, p.vanishing_regime, p.converged, p.mu, p.pohozaev_rel
            ));
        }
        out
    }
}

fn point_from(m: f64, r: &FlowResult, best_seed_energy: f64, dim: usize) -> EmPoint {
    EmPoint {
        m,
        energy: r.report.energy,
        attained: r.converged && r.report.energy < -eps_zero(m),
        vanishing_regime: r.vanishing_regime,
        converged: r.converged,
        mu: r.mu,
        pohozaev_rel: pohozaev_rel_of(&r.report, dim),
        grad_norm: r.grad_norm,
        iterations: r.iterations,
        best_seed_energy,
        error: None,
    }
}

fn validate_masses(m_grid: &[f64]) -> Result<()> {
    if m_grid.is_empty() {
        return Err(Error::InvalidConfig("mass grid is empty".into()));
    }
    if m_grid.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::InvalidConfig("masses must be positive and finite".into()));
    }
    if m_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("mass grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Warm start: `w = u(t^{-1/N} ·)` with `t = m_next/m_prev`.
pub fn warm_start(u: &Field, m_prev: f64, m_next: f64) -> Field {
    u.dilate_space((m_next / m_prev).powf(1.0 / u.dim() as f64))
}

pub fn em_curve(m_grid: &[f64], spec: &NonlinearitySpec, grid: &Arc<ReducedGrid>, cfg: &FlowConfig) -> Result<EmCurve> {
    em_curve_with(m_grid, spec, grid, cfg, &builtin_seeds(spec))
}

/// Sweeps `m_grid` in order; each point runs [`multi_start`] on the warm start
/// from the previous point plus fresh seeds. Failures are recorded per point.
pub fn em_curve_with(
    m_grid: &[f64],
    spec: &NonlinearitySpec,
    grid: &Arc<ReducedGrid>,
    cfg: &FlowConfig,
    seeds: &SeedFn,
) -> Result<EmCurve> {
    validate_masses(m_grid)?;
    cfg.validate()?;
    let dim = grid.config.dim;
    let mut points = Vec::with_capacity(m_grid.len());
    let mut minimizers = Vec::with_capacity(m_grid.len());
    let mut prev: Option<(f64, Field)> = None;
    for &m in m_grid {
        let mut pool = Vec::new();
        if let Some((mp, u)) = &prev {
            let w = warm_start(u, *mp, m);
            if w.mass() > 0.0 {
                pool.push(w);
            }
        }
        let fresh_err = match seeds(grid, m) {
            Ok(s) => {
                pool.extend(s);
                None
            }
            Err(e) => Some(e.to_string()),
        };
        let best_seed_energy = pool
            .iter()
            .filter_map(|s| s.normalize_mass(m).ok())
            .map(|s| s.energy(spec).energy)
            .fold(f64::INFINITY, f64::min);
        let outcome = if pool.is_empty() {
            Err(Error::AllFailed(0))
        } else {
            multi_start(m, spec, grid, &pool, cfg)
        };
        match outcome {
            Ok(r) => {
                let mut p = point_from(m, &r, best_seed_energy, dim);
                p.error = fresh_err;
                points.push(p);
                prev = Some((m, r.minimizer.clone()));
                minimizers.push(Some(r.minimizer));
            }
            Err(e) => {
                points.push(EmPoint {
                    m,
                    energy: f64::NAN,
                    attained: false,
                    vanishing_regime: false,
                    converged: false,
                    mu: f64::NAN,
                    pohozaev_rel: f64::NAN,
                    grad_norm: f64::NAN,
                    iterations: 0,
                    best_seed_energy,
                    error: Some(e.to_string()),
                });
                minimizers.push(None);
            }
        }
    }
    Ok(EmCurve {
        points,
        provenance: Provenance::new(spec, grid, cfg),
        minimizers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneAudit {
    pub passed: bool,
    pub tol: f64,
    /// Largest `E(m_{i+1}) - E(m_i)`; `-inf` for a single point.
    pub worst_increase: f64,
    /// Indices `i + 1` at which `E` rose by more than `tol`.
    pub violations: Vec<usize>,
}

/// Checks `E(m_{i+1}) ≤ E(m_i) + tol` over consecutive points with energies.
pub fn check_monotone(curve: &EmCurve, tol: f64) -> MonotoneAudit {
    check_monotone_values(&curve.energies(), tol)
}

pub fn check_monotone_values(energies: &[f64], tol: f64) -> MonotoneAudit {
    let valid: Vec<(usize, f64)> = energies
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, e)| e.is_finite())
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for w in valid.windows(2) {
        let rise = w[1].1 - w[0].1;
        worst = worst.max(rise);
        if rise > tol {
            violations.push(w[1].0);
        }
    }
    MonotoneAudit {
        passed: violations.is_empty(),
        tol,
        worst_increase: worst,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictMargin {
    pub s: f64,
    pub m: f64,
    /// `(m/s) E(s) - E(m)`; positive when the inequality is strict.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityAudit {
    pub passed: bool,
    pub tol: f64,
    /// Largest `E(m) - (m/s) E(s)`.
    pub worst_excess: f64,
    pub violations: Vec<(usize, usize)>,
    pub strict_margins: Vec<StrictMargin>,
}

/// Checks `E(m) ≤ (m/s) E(s) + tol` for every pair `s < m` on the curve.
pub fn subadditivity_audit(curve: &EmCurve, tol: f64) -> SubadditivityAudit {
    let attained: Vec<bool> = curve.points.iter().map(|p| p.attained).collect();
    subadditivity_values(&curve.m_values(), &curve.energies(), &attained, tol)
}

pub fn subadditivity_values(ms: &[f64], es: &[f64], attained: &[bool], tol: f64) -> SubadditivityAudit {
    let mut worst = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    let mut strict_margins = Vec::new();
    for i in 0..ms.len() {
        if !es[i].is_finite() {
            continue;
        }
        for j in i + 1..ms.len() {
            if !es[j].is_finite() {
                continue;
            }
            let scaled = ms[j] / ms[i] * es[i];
            let excess = es[j] - scaled;
            worst = worst.max(excess);
            if excess > tol {
                violations.push((i, j));
            }
            if attained[i] && es[i] < -eps_neg(ms[i]) {
                strict_margins.push(StrictMargin {
                    s: ms[i],
                    m: ms[j],
                    margin: -excess,
                });
            }
        }
    }
    SubadditivityAudit {
        passed: violations.is_empty(),
        tol,
        worst_excess: worst,
        violations,
        strict_margins,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MStarRegime {
    /// Both endpoints sit at the zero level.
    ZeroEverywhereTested,
    PositiveThreshold,
    /// Already negative at `m_lo`: `m* ≤ m_lo`.
    ZeroThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MStarEval {
    pub m: f64,
    pub energy: f64,
    /// Raw class before any refinement.
    pub raw_class: EnergyClass,
    /// Class used by the bisection.
    pub class: EnergyClass,
    pub refined: bool,
    pub converged: bool,
    pub vanishing_regime: bool,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MStarResult {
    pub m_star: f64,
    pub bracket: (f64, f64),
    pub tol: f64,
    pub regime: MStarRegime,
    pub evaluations: Vec<MStarEval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MStarOptions {
    /// Re-solve ambiguous points once on the refined grid.
    pub refine: bool,
}

impl Default for MStarOptions {
    fn default() -> Self {
        Self { refine: true }
    }
}

struct Classifier<'a> {
    spec: &'a NonlinearitySpec,
    grid: &'a Arc<ReducedGrid>,
    fine: Option<Arc<ReducedGrid>>,
    cfg: &'a FlowConfig,
    opts: MStarOptions,
    seeds: &'a SeedFn<'a>,
    /// Minimizer at the smallest mass classified negative so far.
    anchor: Option<(f64, Field)>,
    evals: Vec<MStarEval>,
}

impl Classifier<'_> {
    fn solve(&self, grid: &Arc<ReducedGrid>, m: f64) -> Result<FlowResult> {
        let mut pool = Vec::new();
        if let Some((ma, u)) = &self.anchor {
            let w = warm_start(u, *ma, m);
            let w = if Arc::ptr_eq(w.grid(), grid) {
                w
            } else {
                w.transfer(grid)?
            };
            if w.mass() > 0.0 {
                pool.push(w);
            }
        }
        pool.extend((self.seeds)(grid, m)?);
        multi_start(m, self.spec, grid, &pool, self.cfg)
    }

    fn classify(&mut self, m: f64) -> Result<EnergyClass> {
        let r = self.solve(self.grid, m)?;
        let raw = classify(r.report.energy, m);
        let mut res = r;
        let mut refined = false;
        let mut class = raw;
        if raw == EnergyClass::Ambiguous && self.opts.refine {
            if self.fine.is_none() {
                self.fine = Some(Arc::new(self.grid.refined()?));
            }
            let fine = self.fine.clone().unwrap();
            let mut pool = vec![res.minimizer.transfer(&fine)?];
            pool.extend((self.seeds)(&fine, m)?);
            res = multi_start(m, self.spec, &fine, &pool, self.cfg)?;
            refined = true;
            class = classify(res.report.energy, m);
        }
        if class == EnergyClass::Ambiguous {
            // Below the zero band: count as negative.
            class = EnergyClass::Negative;
        }
        if class == EnergyClass::Negative && !refined {
            let replace = self.anchor.as_ref().is_none_or(|(ma, _)| m < *ma);
            if replace {
                self.anchor = Some((m, res.minimizer.clone()));
            }
        }
        self.evals.push(MStarEval {
            m,
            energy: res.report.energy,
            raw_class: raw,
            class,
            refined,
            converged: res.converged,
            vanishing_regime: res.vanishing_regime,
            mu: res.mu,
        });
        Ok(class)
    }
}

pub fn mstar_bisect(
    spec: &NonlinearitySpec,
    grid: &Arc<ReducedGrid>,
    cfg: &FlowConfig,
    m_lo: f64,
    m_hi: f64,
    tol: f64,
) -> Result<MStarResult> {
    mstar_bisect_with(
        spec,
        grid,
        cfg,
        m_lo,
        m_hi,
        tol,
        MStarOptions::default(),
        &builtin_seeds(spec),
    )
}

/// Bisection on the zero/negative classification of `E(m)`.
///
/// Ambiguous energies in `(-eps_neg, -eps_zero)` are re-solved once on the
/// refined grid; if still ambiguous they count as negative.
#[allow(clippy::too_many_arguments)]
pub fn mstar_bisect_with(
    spec: &NonlinearitySpec,
    grid: &Arc<ReducedGrid>,
    cfg: &FlowConfig,
    m_lo: f64,
    m_hi: f64,
    tol: f64,
    opts: MStarOptions,
    seeds: &SeedFn,
) -> Result<MStarResult> {
    if !(m_lo > 0.0 && m_hi.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "bracket must be positive and finite, got {m_lo} and {m_hi}"
        )));
    }
    if m_hi <= m_lo {
        return Err(Error::InconsistentBracket(format!(
            "m_lo = {m_lo} is not below m_hi = {m_hi}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tol must be positive, got {tol}")));
    }
    cfg.validate()?;
    let mut c = Classifier {
        spec,
        grid,
        fine: None,
        cfg,
        opts,
        seeds,
        anchor: None,
        evals: Vec::new(),
    };
    // The upper end first, so its minimizer can seed everything below.
    let hi_class = c.classify(m_hi)?;
    let lo_class = c.classify(m_lo)?;
    use EnergyClass::*;
    let done = |c: Classifier, regime, m_star, bracket| MStarResult {
        m_star,
        bracket,
        tol,
        regime,
        evaluations: c.evals,
    };
    match (lo_class, hi_class) {
        (Zero, Zero) => return Ok(done(c, MStarRegime::ZeroEverywhereTested, m_hi, (m_hi, f64::INFINITY))),
        (Negative, Negative) => return Ok(done(c, MStarRegime::ZeroThreshold, 0.0, (0.0, m_lo))),
        (Negative, Zero) => {
            return Err(Error::InconsistentBracket(format!(
                "E({m_lo}) is negative but E({m_hi}) is at the zero level"
            )))
        }
        _ => {}
    }
    let (mut lo, mut hi) = (m_lo, m_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match c.classify(mid)? {
            Negative => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(done(c, MStarRegime::PositiveThreshold, 0.5 * (lo + hi), (lo, hi)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmkBound {
    pub k: usize,
    /// `min_s sup_σ I(γˢ_{m,k}[σ])` over the sampled `σ` and `s`.
    pub bound: f64,
    pub s_at_min: f64,
    pub radius: f64,
    pub n_samples: usize,
    /// `sup_σ I(γˢ)` at each `s` of the grid.
    pub curve: Vec<(f64, f64)>,
}

/// Number of sphere samples used for dimension `k`.
pub fn default_sphere_samples(k: usize) -> usize {
    if k <= 3 {
        64.max(2 * k)
    } else {
        16 * k
    }
}

/// Upper bounds for `E_{m,k}`, `k = 1..=k_max`, from calibrated test maps.
pub fn emk_upper_bounds(
    m: f64,
    k_max: usize,
    spec: &NonlinearitySpec,
    grid: &ReducedGrid,
    s_grid: &[f64],
) -> Result<Vec<EmkBound>> {
    if k_max == 0 {
        return Err(Error::InvalidConfig("k_max must be at least 1".into()));
    }
    if s_grid.is_empty() || s_grid.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidConfig("s grid must be nonempty and positive".into()));
    }
    (1..=k_max)
        .map(|k| {
            let n = default_sphere_samples(k);
            let fam = TestFamily::calibrate(k, spec, grid.config, n)?;
            let audit = fam.audit(m, n, s_grid)?;
            let (i, bound) = audit
                .sup_energy
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty s grid");
            Ok(EmkBound {
                k,
                bound,
                s_at_min: s_grid[i],
                radius: fam.cfg.radius,
                n_samples: audit.n_samples,
                curve: s_grid.iter().copied().zip(audit.sup_energy.iter().copied()).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallMassReport {
    pub m: f64,
    pub n_random: usize,
    pub c_f: f64,
    /// Largest sampled `∫|u|^{2+4/N} / (m^{2/N} kinetic)`.
    pub gn_empirical: f64,
    /// `C_f Ĉ m^{2/N}`.
    pub condition_value: f64,
    pub condition_in_force: bool,
    /// Smallest `I - ¼ kinetic` over the samples.
    pub min_margin: f64,
    pub violations: usize,
    pub passed: bool,
}

/// Checks `I(u) ≥ ¼ kinetic(u)` on random fields of mass `m` whenever the
/// empirical Gagliardo–Nirenberg condition `C_f Ĉ m^{2/N} ≤ ¼` holds.
pub fn small_mass_positivity(
    spec: &NonlinearitySpec,
    grid: &Arc<ReducedGrid>,
    m: f64,
    n_random: usize,
    rng_seed: u64,
) -> Result<SmallMassReport> {
    let dim = grid.config.dim;
    let hyp = check_hypotheses(spec, dim)?;
    if !hyp.cond_12 {
        return Err(Error::ConditionNotMet(
            "the nonlinearity is not mass-critical at the origin".into(),
        ));
    }
    let c_f = hyp
        .c_f
        .ok_or_else(|| Error::ConditionNotMet("no finite constant C_f".into()))?;
    if n_random == 0 {
        return Err(Error::InvalidConfig("need at least one random field".into()));
    }
    let pbar = mass_critical_exponent(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut gn: f64 = 0.0;
    let mut margins = Vec::with_capacity(n_random);
    for _ in 0..n_random {
        let u = random_scale_field(grid, &mut rng, m)?;
        let r = u.energy(spec);
        let lp: Vec<f64> = u.values().iter().map(|v| v.abs().powf(pbar)).collect();
        let lp = grid.quadrature(&lp)?;
        if r.kinetic > 0.0 {
            gn = gn.max(lp / (m.powf(2.0 / dim as f64) * r.kinetic));
        }
        margins.push(r.energy - 0.25 * r.kinetic);
    }
    let condition_value = c_f * gn * m.powf(2.0 / dim as f64);
    let condition_in_force = condition_value <= 0.25;
    let violations = margins.iter().filter(|&&x| x < -1e-12).count();
    Ok(SmallMassReport {
        m,
        n_random,
        c_f,
        gn_empirical: gn,
        condition_value,
        condition_in_force,
        min_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
        violations,
        passed: !condition_in_force || violations == 0,
    })
}

/// Standard `s` grid for test-map bounds.
pub fn default_s_grid() -> Vec<f64> {
    crate::testmaps::log_grid(1e-4, 10.0, 41)
}

/// Sphere samples used by [`emk_upper_bounds`]; exposed for reporting.
pub fn emk_samples(k: usize) -> Vec<Vec<f64>> {
    sphere_samples(k, default_sphere_samples(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SymmetryConfig;

    fn curve(ms: &[f64], es: &[f64]) -> EmCurve {
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let grid = ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[16], 1.0).unwrap();
        EmCurve {
            points: ms
                .iter()
                .zip(es)
                .map(|(&m, &e)| EmPoint {
                    m,
                    energy: e,
                    attained: e < 0.0,
                    vanishing_regime: e >= 0.0,
                    converged: e < 0.0,
                    mu: 0.0,
                    pohozaev_rel: 0.0,
                    grad_norm: 0.0,
                    iterations: 0,
                    best_seed_energy: e,
                    error: None,
                })
                .collect(),
            provenance: Provenance::new(&spec, &grid, &FlowConfig::default()),
            minimizers: vec![],
        }
    }

    #[test]
    fn thresholds_and_classes() {
        assert_eq!(eps_zero(0.5), 1e-5);
        assert_eq!(eps_neg(10.0), 1e-2);
        assert_eq!(classify(-1.0, 1.0), EnergyClass::Negative);
        assert_eq!(classify(1.0, 1.0), EnergyClass::Zero);
        assert_eq!(classify(-1e-6, 1.0), EnergyClass::Zero);
        assert_eq!(classify(-1e-4, 1.0), EnergyClass::Ambiguous);
    }

    #[test]
    fn monotone_audit() {
        let ms = [1.0, 2.0, 3.0, 4.0];
        assert!(check_monotone(&curve(&ms, &[0.0; 4]), 1e-4).passed);
        let dec = check_monotone(&curve(&ms, &[-1.0, -2.0, -3.0, -4.0]), 1e-4);
        assert!(dec.passed && dec.violations.is_empty());
        let bump = check_monotone(&curve(&ms, &[-1.0, -2.0, -2.0 + 2e-4, -4.0]), 1e-4);
        assert!(!bump.passed);
        assert_eq!(bump.violations, vec![2]);
    }

    #[test]
    fn subadditivity() {
        assert!(subadditivity_audit(&curve(&[1.0, 2.0, 3.0], &[0.0; 3]), 1e-4).passed);
        let bad = subadditivity_audit(&curve(&[1.0, 2.0], &[-1.0, -1.5]), 1e-4);
        assert!(!bad.passed && bad.violations == vec![(0, 1)]);
        let good = subadditivity_audit(&curve(&[1.0, 2.0], &[-1.0, -3.0]), 1e-4);
        assert!(good.passed);
        assert_eq!(good.strict_margins.len(), 1);
        assert!(good.strict_margins[0].margin > 0.0);
    }

    #[test]
    fn csv_columns() {
        let c = curve(&[1.0], &[-0.5]);
        let csv = c.to_csv();
        assert!(csv.starts_with("m,E,attained,vanishing,converged,mu,pohozaev_rel\n"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn mass_grid_validation() {
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let g = Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[16], 1.0).unwrap());
        for bad in [vec![], vec![1.0, 1.0], vec![-1.0]] {
            assert!(em_curve(&bad, &spec, &g, &FlowConfig::default()).is_err());
        }
    }

    #[test]
    fn singleton_curve_matches_multi_start() {
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let g = Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[48], 200.0).unwrap());
        let cfg = FlowConfig::default();
        let c = em_curve(&[1.0], &spec, &g, &cfg).unwrap();
        let seeds = default_seeds(&g, &spec, 1.0).unwrap();
        let r = multi_start(1.0, &spec, &g, &seeds, &cfg).unwrap();
        assert_eq!(c.points[0].energy, r.report.energy);
        assert!(c.points[0].attained && c.points[0].converged);
    }

    #[test]
    fn warm_start_dominance() {
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let g = Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[48], 200.0).unwrap());
        let none: &SeedFn = &|_, _| Ok(vec![]);
        let cfg = FlowConfig::default();
        let first = em_curve(&[1.0], &spec, &g, &cfg).unwrap();
        let u = first.minimizers[0].clone().unwrap();
        let seeded: &SeedFn = &move |_, m| Ok(vec![u.normalize_mass(m)?]);
        let c = em_curve_with(&[1.0, 1.5], &spec, &g, &cfg, seeded).unwrap();
        assert!(c.points[1].energy <= c.points[1].best_seed_energy);
        let empty = em_curve_with(&[1.0], &spec, &g, &cfg, none).unwrap();
        assert!(empty.points[0].error.is_some() && empty.points[0].energy.is_nan());
    }

    #[test]
    fn bisection_regimes() {
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let g = Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[32], 120.0).unwrap());
        let cfg = FlowConfig::default();
        let r = mstar_bisect_with(
            &spec,
            &g,
            &cfg,
            2.0,
            4.0,
            0.1,
            MStarOptions { refine: false },
            &builtin_seeds(&spec),
        )
        .unwrap();
        assert_eq!(r.regime, MStarRegime::ZeroThreshold);
        assert_eq!(r.m_star, 0.0);
        assert!(matches!(
            mstar_bisect(&spec, &g, &cfg, 2.0, 1.0, 0.1),
            Err(Error::InconsistentBracket(_))
        ));
    }

    #[test]
    fn emk_bounds_pure_power() {
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let g = ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[16], 1.0).unwrap();
        let b = emk_upper_bounds(1.0, 2, &spec, &g, &default_s_grid()).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|x| x.bound < 0.0));
        // Kinetic s² growth wins for large s.
        assert!(b[0].curve.last().unwrap().1 > 0.0);
        assert!(emk_upper_bounds(1.0, 0, &spec, &g, &default_s_grid()).is_err());
    }

    #[test]
    fn small_mass_audit() {
        let g = Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[48], 30.0).unwrap());
        let crit = NonlinearitySpec::power_difference(3.0, 3.5, 4).unwrap();
        let small = small_mass_positivity(&crit, &g, 1.0, 20, 1).unwrap();
        assert!(small.condition_in_force, "{small:?}");
        assert!(small.passed && small.violations == 0);
        let big = small_mass_positivity(&crit, &g, 1e6, 20, 1).unwrap();
        assert!(!big.condition_in_force && big.passed);
        let sub = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        assert!(matches!(
            small_mass_positivity(&sub, &g, 1.0, 5, 1),
            Err(Error::ConditionNotMet(_))
        ));
    }
}
