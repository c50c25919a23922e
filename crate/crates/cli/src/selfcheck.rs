//! Built-in invariant suite: quadrature oracles, gradient checks, scaling
//! identities and a lossless field-file round trip.

use std::f64::consts::PI;
use std::sync::Arc;

use normsol::diagnostics::coercivity_scan;
use normsol::field::Field;
use normsol::flow::random_seed;
use normsol::grid::{ReducedGrid, SymmetryConfig};
use normsol::io::{field_from_bytes, field_to_bytes};
use normsol::nonlinearity::NonlinearitySpec;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfcheckReport {
    pub schema: &'static str,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn check(name: &str, value: f64, tol: f64) -> Check {
    Check {
        name: name.to_string(),
        value,
        tol,
        passed: value.is_finite() && value <= tol,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn x2(n: usize, len: f64) -> normsol::Result<Arc<ReducedGrid>> {
    Ok(Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2)?, &[n], len)?))
}

fn gaussian_quadrature() -> normsol::Result<Vec<Check>> {
    let g = x2(256, 12.0)?;
    let v = g.sample(|c| (-(c[0] * c[0] + c[1] * c[1])).exp());
    let x2_err = rel(g.quadrature(&v)?, PI * PI);
    let r = ReducedGrid::new(SymmetryConfig::radial(3)?, &[801], 12.0)?;
    let v = r.sample(|c| (-c[0] * c[0]).exp());
    let radial_err = rel(r.quadrature(&v)?, PI.powf(1.5));
    Ok(vec![
        check("quadrature_gaussian_x2_n4", x2_err, 1e-4),
        check("quadrature_gaussian_radial_n3", radial_err, 1e-4),
    ])
}

fn gradient(rng_seed: u64) -> normsol::Result<Check> {
    let spec = NonlinearitySpec::pure_power(2.5, 4)?;
    let g = x2(64, 6.0)?;
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let u = random_seed(&g, 1.0, 1.5, rng_seed.wrapping_add(2 * i))?;
        let mut v = random_seed(&g, 1.0, 1.5, rng_seed.wrapping_add(2 * i + 1))?;
        v.fill_axis_ghosts();
        let eps = 1e-4;
        let ip = u.l2_gradient(&spec).inner(&v);
        let fd = (u.axpy(eps, &v).energy(&spec).energy - u.axpy(-eps, &v).energy(&spec).energy) / (2.0 * eps);
        worst = worst.max(rel(ip, fd));
    }
    Ok(check("gradient_vs_central_difference", worst, 1e-5))
}

fn scaling() -> normsol::Result<Vec<Check>> {
    let spec = NonlinearitySpec::pure_power(2.5, 4)?;
    let g = x2(128, 12.0)?;
    let u = Field::from_fn(g.clone(), |c| {
        let a = (c[0] - 2.0).powi(2) + (c[1] - 1.0).powi(2);
        let b = (c[0] - 1.0).powi(2) + (c[1] - 2.0).powi(2);
        2.0 * ((-a).exp() - (-b).exp())
    })?;
    let ru = u.energy(&spec);
    let mut dil: f64 = 0.0;
    for t in [0.8f64, 1.25] {
        let rv = u.dilate_space(t).energy(&spec);
        let predicted = t.powi(4) * ru.energy + 0.5 * t.powi(2) * (1.0 - t * t) * ru.kinetic;
        dil = dil.max(rel(rv.energy, predicted));
    }
    let v = u.rescale_s(0.5);
    Ok(vec![
        check("dilation_identity", dil, 2e-2),
        check("rescale_mass_invariant", rel(v.mass(), u.mass()), 2e-2),
        check("rescale_kinetic_quadratic", rel(v.kinetic(), 0.25 * u.kinetic()), 2e-2),
    ])
}

fn round_trip(rng_seed: u64) -> normsol::Result<Check> {
    let g = x2(40, 5.0)?;
    let u = random_seed(&g, 1.0, 1.0, rng_seed)?;
    let v = field_from_bytes(&field_to_bytes(&u)?)?;
    let same = u
        .values()
        .iter()
        .zip(v.values())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    Ok(check("field_file_round_trip", if same { 0.0 } else { 1.0 }, 0.0))
}

fn coercivity(rng_seed: u64) -> normsol::Result<Check> {
    let spec = NonlinearitySpec::pure_power(2.5, 4)?;
    let g = x2(48, 40.0)?;
    let rep = coercivity_scan(&spec, &g, 1.0, 40, rng_seed)?;
    Ok(check("coercivity_violations", rep.violations as f64, 0.0))
}

pub fn run(rng_seed: u64) -> SelfcheckReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, r: normsol::Result<Vec<Check>>| match r {
        Ok(c) => checks.extend(c),
        Err(e) => checks.push(Check {
            name: format!("{name}: {e}"),
            value: f64::NAN,
            tol: 0.0,
            passed: false,
        }),
    };
    push("quadrature", gaussian_quadrature());
    push("gradient", gradient(rng_seed).map(|c| vec![c]));
    push("scaling", scaling());
    push("round_trip", round_trip(rng_seed).map(|c| vec![c]));
    push("coercivity", coercivity(rng_seed).map(|c| vec![c]));
    let passed = checks.iter().all(|c| c.passed);
    SelfcheckReport {
        schema: "normsol.selfcheck/1",
        checks,
        passed,
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn suite_passes() {
        let r = super::run(0);
        assert!(r.passed, "{:#?}", r.checks);
    }
}
