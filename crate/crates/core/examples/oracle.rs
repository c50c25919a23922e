//! Fine-grid reference runs behind the golden values in `tests/data/golden.json`.
//!
//! Usage: `cargo run --release --example oracle -- [ground|radial|mstar|all]`

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use normsol::flow::{default_seeds, multi_start, FlowConfig};
use normsol::grid::{ReducedGrid, SymmetryConfig};
use normsol::nonlinearity::NonlinearitySpec;
use normsol::radial::{radial_minimize, RadialGrid};
use normsol::survey::mstar_bisect;
use serde_json::{json, Map, Value};

const GOLDEN: &str = "tests/data/golden.json";

type Job = fn() -> normsol::Result<Value>;

fn ground() -> normsol::Result<Value> {
    let spec = NonlinearitySpec::pure_power(2.5, 4)?;
    let (n, len) = (512, 200.0);
    let g = Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2)?, &[n], len)?);
    let seeds = default_seeds(&g, &spec, 1.0)?;
    let r = multi_start(1.0, &spec, &g, &seeds, &FlowConfig::default())?;
    assert!(r.converged, "reference run did not converge");
    Ok(json!({
        "model": "pure_power", "p": 2.5, "N": 4, "M": 2, "m": 1.0, "n": n, "L": len,
        "energy": r.energy(), "mu": r.mu, "iterations": r.iterations,
    }))
}

fn radial() -> normsol::Result<Value> {
    let spec = NonlinearitySpec::pure_power(2.5, 4)?;
    let (n, len) = (8001, 200.0);
    let r = radial_minimize(1.0, &spec, &RadialGrid::new(4, n, len)?, &FlowConfig::default())?;
    assert!(r.converged, "reference run did not converge");
    Ok(json!({
        "model": "pure_power", "p": 2.5, "N": 4, "m": 1.0, "n": n, "L": len,
        "energy": r.energy(), "mu": r.mu,
    }))
}

fn mstar() -> normsol::Result<Value> {
    let spec = NonlinearitySpec::power_difference(3.0, 3.5, 4)?;
    let (n, len) = (256, 200.0);
    let (lo, hi, tol) = (1000.0, 30000.0, 50.0);
    let g = Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2)?, &[n], len)?);
    let r = mstar_bisect(&spec, &g, &FlowConfig::default(), lo, hi, tol)?;
    Ok(json!({
        "model": "power_difference", "p": 3.0, "q": 3.5, "N": 4, "M": 2, "n": n, "L": len,
        "m_lo": lo, "m_hi": hi, "tol": tol,
        "m_star": r.m_star, "bracket": [r.bracket.0, r.bracket.1], "regime": r.regime,
        "evaluations": r.evaluations.len(),
    }))
}

fn main() -> normsol::Result<()> {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(GOLDEN);
    let mut golden: Map<String, Value> = std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    golden.insert("schema".into(), json!("normsol.golden/1"));
    let jobs: [(&str, Job); 3] = [("ground", ground), ("radial", radial), ("mstar", mstar)];
    for (name, job) in jobs {
        if which != "all" && which != name {
            continue;
        }
        let t = Instant::now();
        let v = job()?;
        eprintln!("{name}: {v} ({:.1?})", t.elapsed());
        golden.insert(name.into(), v);
        let mut text = serde_json::to_string_pretty(&golden)?;
        text.push('\n');
        std::fs::write(&path, text)?;
    }
    Ok(())
}
