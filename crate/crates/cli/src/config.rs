//! Run configuration: a flat map of dotted keys assembled from defaults, an
//! optional TOML file and command-line overrides, then validated in one pass.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use normsol::flow::{FlowConfig, Metric};
use normsol::grid::{Sector, SymmetryConfig};
use normsol::nonlinearity::{try_truncate, NonlinearitySpec};
use toml::Value;

use crate::error::CliError;

/// Environment variable that overrides `output.dir`.
pub const OUT_DIR_ENV: &str = "NORMSOL_OUT";

pub type FlatConfig = BTreeMap<String, Value>;

/// Every accepted key with its default, if any.
const KEYS: &[(&str, Option<&str>)] = &[
    ("nonlinearity.kind", Some("\"pure_power\"")),
    ("nonlinearity.p", Some("2.5")),
    ("nonlinearity.q", None),
    ("nonlinearity.truncate", Some("false")),
    ("dimension.N", Some("4")),
    ("dimension.M", Some("2")),
    ("sector", Some("\"x2\"")),
    ("grid.n", Some("128")),
    ("grid.L", Some("200.0")),
    ("flow.dt0", None),
    ("flow.tol_grad", None),
    ("flow.tol_energy", Some("1e-13")),
    ("flow.max_iter", Some("200000")),
    ("flow.backtrack", Some("0.5")),
    ("flow.metric", Some("\"sobolev\"")),
    ("flow.sobolev_c", None),
    ("flow.vanish_tol", None),
    ("flow.record_history", Some("false")),
    ("m", Some("1.0")),
    ("seed", Some("\"builtin:default\"")),
    ("m_from", Some("0.25")),
    ("m_to", Some("4.0")),
    ("points", Some("8")),
    ("log", Some("false")),
    ("audit_tol", Some("1e-4")),
    ("m_lo", None),
    ("m_hi", None),
    ("tol", None),
    ("refine", Some("true")),
    ("k", Some("1")),
    ("kmax", Some("2")),
    ("samples", None),
    ("input", None),
    ("output.dir", Some("\"normsol-out\"")),
    ("output.format", Some("\"both\"")),
    ("rng_seed", Some("0")),
    ("threads", None),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: FlatConfig,
    pub spec: NonlinearitySpec,
    pub symmetry: SymmetryConfig,
    pub n: Vec<usize>,
    pub len: f64,
    pub flow: FlowConfig,
    pub m: f64,
    pub seed: String,
    pub m_from: f64,
    pub m_to: f64,
    pub points: usize,
    pub log: bool,
    pub audit_tol: f64,
    pub m_lo: Option<f64>,
    pub m_hi: Option<f64>,
    pub tol: Option<f64>,
    pub refine: bool,
    pub k: usize,
    pub kmax: usize,
    pub samples: Option<usize>,
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub rng_seed: u64,
    pub threads: Option<usize>,
}

fn parse_literal(s: &str) -> Value {
    match toml::from_str::<toml::Table>(&format!("v = {s}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(s.to_string()),
    }
}

fn flatten(prefix: &str, table: toml::Table, out: &mut FlatConfig) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other);
            }
        }
    }
}

pub fn defaults() -> FlatConfig {
    KEYS.iter()
        .filter_map(|(k, d)| d.map(|d| (k.to_string(), parse_literal(d))))
        .collect()
}

/// Assembles and validates in one pass; all problems are reported together.
pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let (map, mut errors) = assemble(file, overrides);
    match RunConfig::from_map(map) {
        Ok(cfg) if errors.is_empty() => Ok(cfg),
        Ok(_) => Err(CliError::Config(errors)),
        Err(CliError::Config(more)) => {
            errors.extend(more);
            Err(CliError::Config(errors))
        }
        Err(e) => Err(e),
    }
}

/// Defaults, then the file, then overrides, then the output directory from
/// the environment unless given on the command line. Unknown keys are dropped
/// and reported.
fn assemble(file: Option<&Path>, overrides: &[(String, String)]) -> (FlatConfig, Vec<String>) {
    let mut map = defaults();
    let mut errors = Vec::new();
    if let Some(path) = file {
        match std::fs::read_to_string(path) {
            Ok(text) => match toml::from_str::<toml::Table>(&text) {
                Ok(t) => flatten("", t, &mut map),
                Err(e) => errors.push(format!("{}: {e}", path.display())),
            },
            Err(e) => errors.push(format!("{}: {e}", path.display())),
        }
    }
    let cli_out = overrides.iter().any(|(k, _)| k == "output.dir");
    if !cli_out {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            map.insert("output.dir".into(), Value::String(dir));
        }
    }
    for (k, v) in overrides {
        map.insert(k.clone(), parse_literal(v));
    }
    map.retain(|k, _| {
        let known = KEYS.iter().any(|(name, _)| name == k);
        if !known {
            errors.push(format!("unknown key '{k}'"));
        }
        known
    });
    (map, errors)
}

/// Canonical TOML rendering of the flat map, one `key = value` per line.
pub fn render(map: &FlatConfig) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

struct Reader<'a> {
    map: &'a FlatConfig,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn float(&mut self, key: &str) -> Option<f64> {
        match self.map.get(key) {
            None => None,
            Some(Value::Float(f)) => Some(*f),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(v) => {
                self.errors.push(format!("{key}: expected a number, got {v}"));
                None
            }
        }
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        let v = self.float(key)?;
        if v > 0.0 && v.is_finite() {
            Some(v)
        } else {
            self.errors.push(format!("{key}: must be positive, got {v}"));
            None
        }
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.map.get(key) {
            None => None,
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(v) => {
                self.errors
                    .push(format!("{key}: expected a non-negative integer, got {v}"));
                None
            }
        }
    }

    fn count(&mut self, key: &str) -> Option<usize> {
        let v = self.uint(key)?;
        if v == 0 {
            self.errors.push(format!("{key}: must be at least 1"));
            None
        } else {
            Some(v as usize)
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        match self.map.get(key) {
            None => None,
            Some(Value::Boolean(b)) => Some(*b),
            Some(v) => {
                self.errors.push(format!("{key}: expected true or false, got {v}"));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.map.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                self.errors.push(format!("{key}: expected a string, got {v}"));
                None
            }
        }
    }

    fn sizes(&mut self, key: &str) -> Option<Vec<usize>> {
        match self.map.get(key) {
            None => None,
            Some(Value::Integer(i)) if *i > 0 => Some(vec![*i as usize]),
            Some(Value::Array(a)) => {
                let v: Option<Vec<usize>> = a
                    .iter()
                    .map(|x| x.as_integer().filter(|i| *i > 0).map(|i| i as usize))
                    .collect();
                if v.is_none() {
                    self.errors.push(format!("{key}: expected positive integers"));
                }
                v
            }
            Some(v) => {
                self.errors
                    .push(format!("{key}: expected an integer or a list, got {v}"));
                None
            }
        }
    }
}

impl RunConfig {
    pub fn from_map(map: FlatConfig) -> Result<Self, CliError> {
        let mut r = Reader {
            map: &map,
            errors: Vec::new(),
        };
        let dim = r.count("dimension.N");
        let block = r.count("dimension.M");
        let sector = r.string("sector").and_then(|s| match s.parse::<Sector>() {
            Ok(s) => Some(s),
            Err(e) => {
                r.errors.push(format!("sector: {e}"));
                None
            }
        });
        let symmetry = match (dim, block, sector) {
            (Some(dim), Some(block), Some(sector)) => {
                let c = SymmetryConfig {
                    dim,
                    block: if sector == Sector::Radial { 0 } else { block },
                    sector,
                };
                match c.validate() {
                    Ok(()) => Some(c),
                    Err(e) => {
                        r.errors.push(format!("dimension: {e}"));
                        None
                    }
                }
            }
            _ => None,
        };

        let kind = r.string("nonlinearity.kind");
        let p = r.float("nonlinearity.p");
        let q = r.float("nonlinearity.q");
        let truncate = r.boolean("nonlinearity.truncate").unwrap_or(false);
        let spec = match (kind.as_deref(), dim) {
            (Some(kind), Some(dim)) => {
                let built = match (kind, p, q) {
                    ("pure_power", Some(p), _) => NonlinearitySpec::pure_power(p, dim).map_err(|e| e.to_string()),
                    ("power_difference", Some(p), Some(q)) => {
                        NonlinearitySpec::power_difference(p, q, dim).map_err(|e| e.to_string())
                    }
                    ("power_difference", _, None) => Err("power_difference needs nonlinearity.q".to_string()),
                    ("pure_power" | "power_difference", None, _) => Err("missing nonlinearity.p".to_string()),
                    (other, _, _) => Err(format!("unknown kind '{other}'")),
                };
                let built = if truncate {
                    built.and_then(|s| try_truncate(&s).map_err(|e| e.to_string()))
                } else {
                    built
                };
                match built {
                    Ok(s) => Some(s),
                    Err(e) => {
                        r.errors.push(format!("nonlinearity: {e}"));
                        None
                    }
                }
            }
            _ => None,
        };

        let n = r.sizes("grid.n");
        let len = r.positive("grid.L");
        let (n, len) = match (symmetry, n, len) {
            (Some(sym), Some(n), Some(len)) => {
                let n = if n.len() == 1 {
                    vec![n[0]; sym.reduced_dims()]
                } else {
                    n
                };
                match normsol::grid::ReducedGrid::new(sym, &n, len) {
                    Ok(_) => (Some(n), Some(len)),
                    Err(e) => {
                        r.errors.push(format!("grid: {e}"));
                        (None, None)
                    }
                }
            }
            _ => (None, None),
        };

        let mut flow = FlowConfig {
            dt0: r.positive("flow.dt0"),
            tol_grad: r.positive("flow.tol_grad"),
            vanish_tol: r.positive("flow.vanish_tol"),
            ..FlowConfig::default()
        };
        if let Some(t) = r.positive("flow.tol_energy") {
            flow.tol_energy = t;
        }
        if let Some(it) = r.count("flow.max_iter") {
            flow.max_iter = it;
        }
        if let Some(b) = r.float("flow.backtrack") {
            flow.backtrack = b;
        }
        flow.record_history = r.boolean("flow.record_history").unwrap_or(false);
        let c = r.positive("flow.sobolev_c");
        match r.string("flow.metric").as_deref() {
            Some("sobolev") | None => flow.metric = Metric::Sobolev { c },
            Some("l2") => flow.metric = Metric::L2,
            Some(other) => r
                .errors
                .push(format!("flow.metric: expected sobolev or l2, got '{other}'")),
        }
        if let Err(e) = flow.validate() {
            r.errors.push(format!("flow: {e}"));
        }

        let m = r.positive("m");
        let seed = r.string("seed");
        let m_from = r.positive("m_from");
        let m_to = r.positive("m_to");
        if let (Some(a), Some(b)) = (m_from, m_to) {
            if b < a {
                r.errors.push(format!("m_to ({b}) must not be below m_from ({a})"));
            }
        }
        let points = r.count("points");
        let log = r.boolean("log");
        let audit_tol = r.positive("audit_tol");
        let m_lo = r.positive("m_lo");
        let m_hi = r.positive("m_hi");
        let tol = r.positive("tol");
        let refine = r.boolean("refine");
        let k = r.count("k");
        let kmax = r.count("kmax");
        let samples = r.count("samples");
        let input = r.string("input").map(PathBuf::from);
        let out_dir = r.string("output.dir").map(PathBuf::from);
        let format = r.string("output.format").and_then(|f| match f.as_str() {
            "json" => Some(OutputFormat::Json),
            "csv" => Some(OutputFormat::Csv),
            "both" => Some(OutputFormat::Both),
            other => {
                r.errors
                    .push(format!("output.format: expected json, csv or both, got '{other}'"));
                None
            }
        });
        let rng_seed = r.uint("rng_seed");
        let threads = r.count("threads");

        if !r.errors.is_empty() {
            return Err(CliError::Config(r.errors));
        }
        // Every required value is present once no error was recorded.
        Ok(Self {
            spec: spec.expect("validated"),
            symmetry: symmetry.expect("validated"),
            n: n.expect("validated"),
            len: len.expect("validated"),
            flow,
            m: m.expect("default"),
            seed: seed.expect("default"),
            m_from: m_from.expect("default"),
            m_to: m_to.expect("default"),
            points: points.expect("default"),
            log: log.expect("default"),
            audit_tol: audit_tol.expect("default"),
            m_lo,
            m_hi,
            tol,
            refine: refine.expect("default"),
            k: k.expect("default"),
            kmax: kmax.expect("default"),
            samples,
            input,
            out_dir: out_dir.expect("default"),
            format: format.expect("default"),
            rng_seed: rng_seed.expect("default"),
            threads,
            raw: map,
        })
    }

    pub fn grid(&self) -> normsol::Result<normsol::grid::ReducedGrid> {
        normsol::grid::ReducedGrid::new(self.symmetry, &self.n, self.len)
    }
}
