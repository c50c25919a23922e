use std::sync::Arc;

use normsol::diagnostics::{certify, SolutionCertificate, Tolerances};
use normsol::field::Field;
use normsol::flow::{bump_pair_seed, default_seeds, gaussian_seed, multi_start, random_seed, FlowResult, HistoryEntry};
use normsol::grid::{ReducedGrid, Sector};
use normsol::io::{field_to_bytes, read_field};
use normsol::radial::{radial_minimize, RadialGrid};
use normsol::survey::{
    check_monotone, default_s_grid, default_sphere_samples, em_curve, emk_upper_bounds, mstar_bisect_with,
    subadditivity_audit, EmPoint, EmkBound, MStarOptions, MonotoneAudit, Provenance, SubadditivityAudit,
};
use normsol::testmaps::{sphere_samples, EnergyBound, FamilyAudit, TestFamily};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Outputs;

fn grid_of(cfg: &RunConfig) -> Result<Arc<ReducedGrid>, CliError> {
    Ok(Arc::new(cfg.grid()?))
}

fn seeds_for(cfg: &RunConfig, grid: &Arc<ReducedGrid>, m: f64) -> Result<Vec<Field>, CliError> {
    let len = grid.len;
    let seeds = match cfg.seed.as_str() {
        "builtin:default" => default_seeds(grid, &cfg.spec, m)?,
        "builtin:bump" => match grid.config.sector {
            Sector::X2Reduced => vec![bump_pair_seed(grid, m, len / 5.0, len / 10.0)?],
            Sector::Radial => vec![gaussian_seed(grid, m, len / 10.0)?],
        },
        "builtin:random" => vec![random_seed(grid, m, len / 10.0, cfg.rng_seed)?],
        other if other.starts_with("builtin:") => {
            return Err(CliError::Config(vec![format!(
                "seed: unknown builtin '{other}' (default, bump, random)"
            )]))
        }
        path => {
            let path = path.strip_prefix("file:").unwrap_or(path);
            let u = read_field(path)?;
            let u = if u.grid().as_ref() == grid.as_ref() {
                u
            } else {
                u.transfer(grid)?
            };
            vec![u.normalize_mass(m)?]
        }
    };
    Ok(seeds)
}

#[derive(Serialize)]
struct SolveReport {
    schema: &'static str,
    sector: Sector,
    m: f64,
    energy: f64,
    mu: f64,
    mass: f64,
    kinetic: f64,
    potential: f64,
    converged: bool,
    vanishing_regime: bool,
    termination: normsol::flow::Termination,
    iterations: usize,
    grad_norm: f64,
    certificate: SolutionCertificate,
}

pub fn solve(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let grid = grid_of(cfg)?;
    let m = cfg.m;
    let r: FlowResult = if grid.config.sector == Sector::Radial && cfg.seed == "builtin:default" {
        radial_minimize(m, &cfg.spec, &RadialGrid::from_grid(grid.clone())?, &cfg.flow)?
    } else {
        let seeds = seeds_for(cfg, &grid, m)?;
        multi_start(m, &cfg.spec, &grid, &seeds, &cfg.flow)?
    };
    let cert = certify(&r.minimizer, m, &cfg.spec, &Tolerances::default())?;
    out.bytes("minimizer.nsf", &field_to_bytes(&r.minimizer)?)?;
    if let Some(h) = &r.history {
        if cfg.format.csv() {
            out.bytes("history.csv", history_csv(h).as_bytes())?;
        }
    }
    out.json("certificate.json", &cert)?;
    out.json(
        "solve.json",
        &SolveReport {
            schema: "normsol.solve/1",
            sector: grid.config.sector,
            m,
            energy: r.report.energy,
            mu: r.mu,
            mass: r.report.mass,
            kinetic: r.report.kinetic,
            potential: r.report.potential,
            converged: r.converged,
            vanishing_regime: r.vanishing_regime,
            termination: r.termination,
            iterations: r.iterations,
            grad_norm: r.grad_norm,
            certificate: cert,
        },
    )
}

fn history_csv(h: &[HistoryEntry]) -> String {
    let mut s = String::from("iteration,energy,grad_norm\n");
    for e in h {
        s.push_str(&format!("{},{:e},{:e}\n", e.iteration, e.energy, e.grad_norm));
    }
    s
}

pub fn mass_grid(from: f64, to: f64, points: usize, log: bool) -> Vec<f64> {
    if points == 1 {
        return vec![from];
    }
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            if log {
                (from.ln() + t * (to.ln() - from.ln())).exp()
            } else {
                from + t * (to - from)
            }
        })
        .collect()
}

#[derive(Serialize)]
struct SweepReport<'a> {
    schema: &'static str,
    points: &'a [EmPoint],
    monotone: MonotoneAudit,
    subadditivity: SubadditivityAudit,
    provenance: &'a Provenance,
}

pub fn sweep(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let grid = grid_of(cfg)?;
    let ms = mass_grid(cfg.m_from, cfg.m_to, cfg.points, cfg.log);
    let curve = em_curve(&ms, &cfg.spec, &grid, &cfg.flow)?;
    if cfg.format.csv() {
        out.bytes("em_curve.csv", curve.to_csv().as_bytes())?;
    }
    out.json(
        "sweep.json",
        &SweepReport {
            schema: "normsol.sweep/1",
            points: &curve.points,
            monotone: check_monotone(&curve, cfg.audit_tol),
            subadditivity: subadditivity_audit(&curve, cfg.audit_tol),
            provenance: &curve.provenance,
        },
    )
}

#[derive(Serialize)]
struct MStarReport {
    schema: &'static str,
    m_lo: f64,
    m_hi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<normsol::survey::MStarResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorReport>,
}

#[derive(Serialize)]
struct ErrorReport {
    kind: String,
    message: String,
}

fn error_kind(e: &normsol::Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or("Error")
        .to_string()
}

pub fn mstar(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let (Some(m_lo), Some(m_hi)) = (cfg.m_lo, cfg.m_hi) else {
        let mut errs = Vec::new();
        if cfg.m_lo.is_none() {
            errs.push("m_lo: required by mstar".to_string());
        }
        if cfg.m_hi.is_none() {
            errs.push("m_hi: required by mstar".to_string());
        }
        return Err(CliError::Config(errs));
    };
    let grid = grid_of(cfg)?;
    let tol = cfg.tol.unwrap_or(1e-2 * m_lo);
    let spec = &cfg.spec;
    let seeds = move |g: &Arc<ReducedGrid>, m: f64| default_seeds(g, spec, m);
    let res = mstar_bisect_with(
        spec,
        &grid,
        &cfg.flow,
        m_lo,
        m_hi,
        tol,
        MStarOptions { refine: cfg.refine },
        &seeds,
    );
    let (result, error) = match &res {
        Ok(r) => (Some(r.clone()), None),
        Err(e) => (
            None,
            Some(ErrorReport {
                kind: error_kind(e),
                message: e.to_string(),
            }),
        ),
    };
    out.json(
        "mstar.json",
        &MStarReport {
            schema: "normsol.mstar/1",
            m_lo,
            m_hi,
            result,
            error,
        },
    )?;
    res.map(|_| ()).map_err(CliError::from)
}

#[derive(Serialize)]
struct EmkReport<'a> {
    schema: &'static str,
    m: f64,
    bounds: &'a [EmkBound],
}

pub fn emk(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let bounds = emk_upper_bounds(cfg.m, cfg.kmax, &cfg.spec, &grid, &default_s_grid())?;
    if cfg.format.csv() {
        let mut csv = String::from("k,bound,s_at_min,radius,n_samples\n");
        for b in &bounds {
            csv.push_str(&format!(
                "{},{:e},{:e},{:e},{}\n",
                b.k, b.bound, b.s_at_min, b.radius, b.n_samples
            ));
        }
        out.bytes("emk.csv", csv.as_bytes())?;
    }
    out.json(
        "emk.json",
        &EmkReport {
            schema: "normsol.emk/1",
            m: cfg.m,
            bounds: &bounds,
        },
    )
}

#[derive(Serialize)]
struct TestmapReport {
    schema: &'static str,
    sector: Sector,
    audit: FamilyAudit,
    energy_bound: EnergyBound,
}

pub fn verify_testmap(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let samples = cfg.samples.unwrap_or_else(|| default_sphere_samples(cfg.k));
    let fam = TestFamily::calibrate(cfg.k, &cfg.spec, cfg.symmetry, samples)?;
    let audit = fam.audit(cfg.m, samples, &default_s_grid())?;
    let energy_bound = fam.energy_bound(cfg.m, &sphere_samples(cfg.k, samples))?;
    out.json(
        "testmap.json",
        &TestmapReport {
            schema: "normsol.testmap/1",
            sector: cfg.symmetry.sector,
            audit,
            energy_bound,
        },
    )
}

pub fn certify_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let Some(input) = &cfg.input else {
        return Err(CliError::Config(vec!["input: required by certify".into()]));
    };
    let u = read_field(input)?;
    if u.dim() != cfg.spec.dim {
        return Err(CliError::Config(vec![format!(
            "dimension.N = {} but the field file is in dimension {}",
            cfg.spec.dim,
            u.dim()
        )]));
    }
    let cert = certify(&u, cfg.m, &cfg.spec, &Tolerances::default())?;
    out.json("certificate.json", &cert)
}
