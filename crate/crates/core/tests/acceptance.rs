//! Acceptance suite. One line per criterion; run with
//! `cargo test -p normsol --test acceptance`.
//!
//! Criteria listed in `KNOWN_FAILURES` are evaluated exactly like the others
//! and reported as `FAIL (known)`; they do not fail the process.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use normsol::diagnostics::{certify, coercivity_scan, Tolerances};
use normsol::field::Field;
use normsol::flow::{default_seeds, multi_start, random_seed, FlowConfig, FlowResult};
use normsol::grid::{ReducedGrid, SymmetryConfig};
use normsol::nonlinearity::NonlinearitySpec;
use normsol::radial::{radial_minimize, RadialGrid};
use normsol::survey::{
    check_monotone, default_s_grid, default_sphere_samples, em_curve, emk_upper_bounds, eps_neg, mstar_bisect,
    subadditivity_audit, EnergyClass, MStarRegime,
};
use normsol::testmaps::TestFamily;
use serde_json::Value;

const KNOWN_FAILURES: &[u32] = &[7];

const GROUND_N: usize = 128;
const GROUND_L: f64 = 200.0;
const SWEEP_POINTS: usize = 8;
const AUDIT_TOL: f64 = 1e-4;

type Outcome = Result<(bool, String), String>;

#[derive(Default)]
struct Shared {
    ground: Option<FlowResult>,
    sweep_csv: Option<String>,
}

fn pure_power() -> NonlinearitySpec {
    NonlinearitySpec::pure_power(2.5, 4).unwrap()
}

fn x2(n: usize, len: f64) -> Arc<ReducedGrid> {
    Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[n], len).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn golden() -> Result<Value, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden.json");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn golden_f64(section: &str, key: &str) -> Result<f64, String> {
    golden()?[section][key]
        .as_f64()
        .ok_or_else(|| format!("golden.json lacks {section}.{key}"))
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let el = t.elapsed();
    (el < limit, format!("{:.1}s/{}s", el.as_secs_f64(), limit.as_secs()))
}

fn quadrature() -> Outcome {
    let t = Instant::now();
    let g = x2(256, 12.0);
    let v = g.sample(|c| (-(c[0] * c[0] + c[1] * c[1])).exp());
    let err = rel(g.quadrature(&v).map_err(|e| e.to_string())?, PI * PI);
    let (fast, time) = within(t, Duration::from_secs(1));
    Ok((err <= 1e-4 && fast, format!("rel err {err:.2e}, {time}")))
}

fn gradient() -> Outcome {
    let t = Instant::now();
    let spec = pure_power();
    let mut worst: f64 = 0.0;
    for n in [64, 128] {
        let g = x2(n, 6.0);
        for i in 0..20u64 {
            let u = random_seed(&g, 1.0, 1.5, 1000 + 2 * i).map_err(|e| e.to_string())?;
            let mut v = random_seed(&g, 1.0, 1.5, 1001 + 2 * i).map_err(|e| e.to_string())?;
            v.fill_axis_ghosts();
            let eps = 1e-4;
            let ip = u.l2_gradient(&spec).inner(&v);
            let fd = (u.axpy(eps, &v).energy(&spec).energy - u.axpy(-eps, &v).energy(&spec).energy) / (2.0 * eps);
            worst = worst.max(rel(ip, fd));
        }
    }
    let (fast, time) = within(t, Duration::from_secs(10));
    Ok((worst <= 1e-5 && fast, format!("worst rel {worst:.2e}, {time}")))
}

fn scaling_errors(n: usize) -> f64 {
    let spec = pure_power();
    let g = x2(n, 12.0);
    let u = Field::from_fn(g, |c| {
        let a = (c[0] - 2.0).powi(2) + (c[1] - 1.0).powi(2);
        let b = (c[0] - 1.0).powi(2) + (c[1] - 2.0).powi(2);
        2.0 * ((-a).exp() - (-b).exp())
    })
    .unwrap();
    let ru = u.energy(&spec);
    let mut worst: f64 = 0.0;
    for t in [0.8f64, 1.25] {
        let rv = u.dilate_space(t).energy(&spec);
        let predicted = t.powi(4) * ru.energy + 0.5 * t.powi(2) * (1.0 - t * t) * ru.kinetic;
        worst = worst.max(rel(rv.energy, predicted));
    }
    for s in [0.5, 0.8] {
        let v = u.rescale_s(s);
        worst = worst.max(rel(v.mass(), u.mass()));
        worst = worst.max(rel(v.kinetic(), s * s * u.kinetic()));
    }
    worst
}

fn scaling() -> Outcome {
    let coarse = scaling_errors(128);
    let fine = scaling_errors(256);
    let ok = coarse <= 2e-2 && fine <= 1e-2 && fine < coarse;
    Ok((ok, format!("128² {coarse:.2e}, 256² {fine:.2e}")))
}

fn ground(shared: &mut Shared) -> Outcome {
    let t = Instant::now();
    let spec = pure_power();
    let g = x2(GROUND_N, GROUND_L);
    let seeds = default_seeds(&g, &spec, 1.0).map_err(|e| e.to_string())?;
    let r = multi_start(1.0, &spec, &g, &seeds, &FlowConfig::default()).map_err(|e| e.to_string())?;
    let (fast, time) = within(t, Duration::from_secs(300));
    let c = certify(&r.minimizer, 1.0, &spec, &Tolerances::default()).map_err(|e| e.to_string())?;
    let golden = golden_f64("ground", "energy");
    let gap = golden.as_ref().map(|&e0| rel(r.energy(), e0)).unwrap_or(f64::NAN);
    let ok = r.converged
        && c.passed
        && c.energy < 0.0
        && c.mu > 0.0
        && c.pohozaev_rel <= 1e-2
        && c.antisym_residual <= 1e-10
        && c.sign_changing
        && c.nonradiality >= 0.99
        && gap <= 0.02
        && fast;
    let detail = format!(
        "E {:.6e}, mu {:.4e}, P_rel {:.1e}, antisym {:.1e}, nonrad {:.3}, vs golden {}, {time}",
        c.energy,
        c.mu,
        c.pohozaev_rel,
        c.antisym_residual,
        c.nonradiality,
        match golden {
            Ok(_) => format!("{gap:.2e}"),
            Err(e) => e,
        },
    );
    shared.ground = Some(r);
    Ok((ok, detail))
}

fn sweep_csv() -> Result<(String, bool, bool), String> {
    let step = (4.0 - 0.25) / (SWEEP_POINTS - 1) as f64;
    let ms: Vec<f64> = (0..SWEEP_POINTS).map(|i| 0.25 + step * i as f64).collect();
    let curve =
        em_curve(&ms, &pure_power(), &x2(GROUND_N, GROUND_L), &FlowConfig::default()).map_err(|e| e.to_string())?;
    let mono = check_monotone(&curve, AUDIT_TOL).passed;
    let sub = subadditivity_audit(&curve, AUDIT_TOL).passed;
    Ok((curve.to_csv(), mono, sub))
}

fn sweep(shared: &mut Shared) -> Outcome {
    let t = Instant::now();
    let (csv, mono, sub) = sweep_csv()?;
    let (fast, time) = within(t, Duration::from_secs(1800));
    shared.sweep_csv = Some(csv);
    Ok((
        mono && sub && fast,
        format!("monotone {mono}, subadditive {sub}, {time}"),
    ))
}

fn threshold() -> Outcome {
    let spec = NonlinearitySpec::power_difference(3.0, 3.5, 4).map_err(|e| e.to_string())?;
    let r = mstar_bisect(
        &spec,
        &x2(GROUND_N, GROUND_L),
        &FlowConfig::default(),
        1000.0,
        30000.0,
        100.0,
    )
    .map_err(|e| e.to_string())?;
    let (lo, hi) = r.bracket;
    let width_ok = hi - lo <= 0.05 * r.m_star;
    let below_ok = r
        .evaluations
        .iter()
        .filter(|e| e.m <= lo)
        .all(|e| e.class == EnergyClass::Zero && e.vanishing_regime);
    let above_ok = r
        .evaluations
        .iter()
        .filter(|e| e.m >= hi)
        .all(|e| e.energy < 0.0 && e.mu > 0.0);
    let golden = golden_f64("mstar", "m_star");
    let gap = golden.as_ref().map(|&g| rel(r.m_star, g)).unwrap_or(f64::NAN);
    let ok = r.regime == MStarRegime::PositiveThreshold && width_ok && below_ok && above_ok && gap <= 0.10;
    Ok((
        ok,
        format!(
            "m* {:.1} in [{lo:.1}, {hi:.1}], {:?}, below {below_ok}, above {above_ok}, vs golden {}",
            r.m_star,
            r.regime,
            match golden {
                Ok(_) => format!("{gap:.2e}"),
                Err(e) => e,
            },
        ),
    ))
}

fn zero_threshold() -> Outcome {
    let spec = pure_power();
    let g = x2(GROUND_N, GROUND_L);
    let mut worst = Vec::new();
    let mut ok = true;
    for m in [0.05, 0.1, 0.25, 0.5, 1.0] {
        let seeds = default_seeds(&g, &spec, m).map_err(|e| e.to_string())?;
        let r = multi_start(m, &spec, &g, &seeds, &FlowConfig::default()).map_err(|e| e.to_string())?;
        let pass = r.energy() <= -eps_neg(m);
        ok &= pass;
        worst.push(format!("E({m})={:.2e}{}", r.energy(), if pass { "" } else { "!" }));
    }
    Ok((ok, format!("{}; needs <= -{:.0e}", worst.join(" "), eps_neg(1.0))))
}

fn testmaps() -> Outcome {
    let t = Instant::now();
    let spec = pure_power();
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [1, 2] {
        let n = default_sphere_samples(k);
        let fam = TestFamily::calibrate(k, &spec, SymmetryConfig::x2(4, 2).unwrap(), n).map_err(|e| e.to_string())?;
        let a = fam.audit(1.0, n, &default_s_grid()).map_err(|e| e.to_string())?;
        let pass = a.max_oddness_residual == 0.0
            && a.max_sup_norm <= 2.0 * a.zeta
            && a.min_potential >= 1.0
            && a.sup_energy.iter().any(|&e| e < 0.0);
        ok &= pass;
        parts.push(format!(
            "k={k}: odd {:.0e}, sup {:.3}/{:.3}, min F {:.3}, s* {:?}",
            a.max_oddness_residual,
            a.max_sup_norm,
            2.0 * a.zeta,
            a.min_potential,
            a.s_star
        ));
    }
    let (fast, time) = within(t, Duration::from_secs(120));
    Ok((ok && fast, format!("{}, {time}", parts.join("; "))))
}

fn emk(shared: &Shared) -> Outcome {
    let e_m = shared.ground.as_ref().ok_or("needs criterion 4")?.energy();
    let b = emk_upper_bounds(1.0, 2, &pure_power(), &x2(GROUND_N, GROUND_L), &default_s_grid())
        .map_err(|e| e.to_string())?;
    let ok = b[0].bound >= e_m - 1e-6 && b.iter().all(|x| x.bound < 0.0);
    Ok((
        ok,
        format!(
            "bound(1) {:.3e}, bound(2) {:.3e}, E_m {e_m:.3e}",
            b[0].bound, b[1].bound
        ),
    ))
}

fn radial(shared: &Shared) -> Outcome {
    let e_x2 = shared.ground.as_ref().ok_or("needs criterion 4")?.energy();
    let t = Instant::now();
    let spec = pure_power();
    let rg = RadialGrid::new(4, 801, 120.0).map_err(|e| e.to_string())?;
    let r = radial_minimize(1.0, &spec, &rg, &FlowConfig::default()).map_err(|e| e.to_string())?;
    let (fast, time) = within(t, Duration::from_secs(60));
    let c = certify(&r.minimizer, 1.0, &spec, &Tolerances::default()).map_err(|e| e.to_string())?;
    let ok = r.converged && c.energy < 0.0 && c.mu > 0.0 && c.pohozaev_rel <= 1e-2 && c.energy <= e_x2 + 1e-3 && fast;
    Ok((
        ok,
        format!(
            "E_rad {:.4e}, mu {:.3e}, P_rel {:.1e}, E_x2 {e_x2:.4e}, {time}",
            c.energy, c.mu, c.pohozaev_rel
        ),
    ))
}

fn coercivity() -> Outcome {
    let rep = coercivity_scan(&pure_power(), &x2(64, 40.0), 1.0, 200, 7).map_err(|e| e.to_string())?;
    Ok((
        rep.violations == 0 && rep.decile_passed && rep.passed,
        format!(
            "violations {}, C {:.3e}, top-decile ratio {:.3e}",
            rep.violations, rep.c_empirical, rep.top_decile_ratio
        ),
    ))
}

fn determinism(shared: &Shared) -> Outcome {
    let first = shared.sweep_csv.as_ref().ok_or("needs criterion 5")?;
    let (second, _, _) = sweep_csv()?;
    Ok((first.as_bytes() == second.as_bytes(), format!("{} bytes", first.len())))
}

fn main() -> ExitCode {
    let mut shared = Shared::default();
    let mut unexpected = 0;
    let mut report = |id: u32, name: &str, outcome: Outcome| {
        let known = KNOWN_FAILURES.contains(&id);
        let (passed, detail) = match outcome {
            Ok(x) => x,
            Err(e) => (false, format!("error: {e}")),
        };
        let mark = match (passed, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("criterion {id:>2} {name:<22} {mark:<12} {detail}");
    };
    report(1, "quadrature", quadrature());
    report(2, "gradient", gradient());
    report(3, "scaling", scaling());
    let o = ground(&mut shared);
    report(4, "nonradial ground", o);
    let o = sweep(&mut shared);
    report(5, "energy curve", o);
    report(6, "threshold", threshold());
    report(7, "zero threshold", zero_threshold());
    report(8, "test maps", testmaps());
    report(9, "minimax bounds", emk(&shared));
    report(10, "radial sector", radial(&shared));
    report(11, "coercivity", coercivity());
    report(12, "determinism", determinism(&shared));
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    }
}
