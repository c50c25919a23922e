//! Model nonlinearities `f`, their primitives `F`, and decidable checks of the
//! structural hypotheses the solver relies on.
//!
//! Three families are supported:
//!
//! * `PowerDifference(p, q)`: `f(t) = |t|^{p-2} t - |t|^{q-2} t` with `2 < p < q < 2N/(N-2)`,
//! * `PurePower(p)`: `f(t) = |t|^{p-2} t` with `2 < p < 2 + 4/N`,
//! * `Truncated(base, zeta1)`: `base` on `[-zeta1, zeta1]` and zero outside.
//!
//! Restricting to closed-form families keeps every hypothesis check an
//! exponent comparison instead of a numerical limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound of the scan used to pick the positivity witness.
pub const DEFAULT_T_MAX: f64 = 4.0;
/// Number of scan points on `(0, t_max]`.
pub const SCAN_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearityKind {
    PowerDifference { p: f64, q: f64 },
    PurePower { p: f64 },
    Truncated { base: Box<NonlinearitySpec>, zeta1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    #[serde(flatten)]
    pub kind: NonlinearityKind,
    /// Spatial dimension used for the criticality thresholds.
    pub dim: usize,
}

/// Mass-critical exponent `2 + 4/N`.
pub fn mass_critical_exponent(dim: usize) -> f64 {
    2.0 + 4.0 / dim as f64
}

/// Sobolev critical exponent `2N/(N-2)`, infinite for `N <= 2`.
pub fn sobolev_exponent(dim: usize) -> f64 {
    if dim <= 2 {
        f64::INFINITY
    } else {
        2.0 * dim as f64 / (dim as f64 - 2.0)
    }
}

#[inline]
fn signed_pow(t: f64, e: f64) -> f64 {
    // |t|^e * sign(t); exact oddness under t -> -t.
    let a = t.abs().powf(e);
    if t < 0.0 {
        -a
    } else {
        a
    }
}

impl NonlinearitySpec {
    pub fn power_difference(p: f64, q: f64, dim: usize) -> Result<Self> {
        let crit = sobolev_exponent(dim);
        if !(p.is_finite() && q.is_finite()) || !(2.0 < p && p < q && q < crit) {
            return Err(Error::InvalidNonlinearity(format!(
                "power_difference requires 2 < p < q < {crit}, got p = {p}, q = {q}"
            )));
        }
        Ok(Self {
            kind: NonlinearityKind::PowerDifference { p, q },
            dim,
        })
    }

    pub fn pure_power(p: f64, dim: usize) -> Result<Self> {
        let crit = mass_critical_exponent(dim);
        if !p.is_finite() || !(2.0 < p && p < crit) {
            return Err(Error::InvalidNonlinearity(format!(
                "pure_power requires 2 < p < {crit}, got p = {p}"
            )));
        }
        Ok(Self {
            kind: NonlinearityKind::PurePower { p },
            dim,
        })
    }

    /// Wraps `base` so that `f` vanishes for `|t| > zeta1`.
    pub fn truncated(base: NonlinearitySpec, zeta1: f64) -> Result<Self> {
        if !(zeta1 > 0.0 && zeta1.is_finite()) {
            return Err(Error::InvalidNonlinearity(format!(
                "truncation point must be positive, got {zeta1}"
            )));
        }
        let dim = base.dim;
        Ok(Self {
            kind: NonlinearityKind::Truncated {
                base: Box::new(base),
                zeta1,
            },
            dim,
        })
    }

    /// Re-checks the constructor invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            NonlinearityKind::PowerDifference { p, q } => Self::power_difference(*p, *q, self.dim).map(|_| ()),
            NonlinearityKind::PurePower { p } => Self::pure_power(*p, self.dim).map(|_| ()),
            NonlinearityKind::Truncated { base, zeta1 } => {
                base.validate()?;
                if base.dim != self.dim {
                    return Err(Error::InvalidNonlinearity(
                        "truncated base has a different dimension".into(),
                    ));
                }
                Self::truncated((**base).clone(), *zeta1).map(|_| ())
            }
        }
    }

    /// `f(t)`.
    pub fn f(&self, t: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::PowerDifference { p, q } => {
                let a = t.abs();
                let v = a.powf(p - 1.0) - a.powf(q - 1.0);
                if t < 0.0 {
                    -v
                } else {
                    v
                }
            }
            NonlinearityKind::PurePower { p } => signed_pow(t, p - 1.0),
            NonlinearityKind::Truncated { base, zeta1 } => {
                if t.abs() > *zeta1 {
                    0.0
                } else {
                    base.f(t)
                }
            }
        }
    }

    /// `F(t) = ∫_0^t f`.
    pub fn big_f(&self, t: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::PowerDifference { p, q } => {
                let a = t.abs();
                a.powf(*p) / p - a.powf(*q) / q
            }
            NonlinearityKind::PurePower { p } => t.abs().powf(*p) / p,
            NonlinearityKind::Truncated { base, zeta1 } => base.big_f(t.abs().min(*zeta1)),
        }
    }

    /// Exponent of the leading small-`t` term of `f(t) t`.
    fn leading_exponent(&self) -> f64 {
        match &self.kind {
            NonlinearityKind::PowerDifference { p, .. } | NonlinearityKind::PurePower { p } => *p,
            NonlinearityKind::Truncated { base, .. } => base.leading_exponent(),
        }
    }

    /// `δ(ε)` such that `|f(t)/t| <= ε` whenever `0 < |t| <= δ(ε)`.
    pub fn small_t_delta(&self, eps: f64) -> f64 {
        let p = self.leading_exponent();
        let d = eps.powf(1.0 / (p - 2.0));
        match &self.kind {
            // |t|^{p-2} - |t|^{q-2} lies in [0, |t|^{p-2}] for |t| <= 1.
            NonlinearityKind::PowerDifference { .. } => d.min(1.0),
            NonlinearityKind::PurePower { .. } => d,
            NonlinearityKind::Truncated { base, .. } => base.small_t_delta(eps),
        }
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Truncated { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub f1: bool,
    pub f2: bool,
    pub f3: bool,
    pub f4: bool,
    pub f5: bool,
    /// `F(t)/|t|^{2+4/N} -> +inf` as `t -> 0`.
    pub cond_11: bool,
    /// `limsup F(t)/|t|^{2+4/N} < inf` as `t -> 0`.
    pub cond_12: bool,
    /// Maximizer of `F` on the scan, present only when `f4` holds.
    pub zeta: Option<f64>,
    /// `sup F(t)/|t|^{2+4/N}`; `None` (infinite) unless `cond_12` holds.
    pub c_f: Option<f64>,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.f1 && self.f2 && self.f3 && self.f4 && self.f5
    }

    /// Refuses specs with any failed hypothesis.
    pub fn require_all(&self) -> Result<()> {
        if self.all_hold() {
            Ok(())
        } else {
            Err(Error::InvalidNonlinearity(format!(
                "hypotheses not satisfied: f1={} f2={} f3={} f4={} f5={}",
                self.f1, self.f2, self.f3, self.f4, self.f5
            )))
        }
    }

    pub fn zeta_or_err(&self) -> Result<f64> {
        self.zeta
            .ok_or_else(|| Error::InvalidNonlinearity("no positivity witness for F".into()))
    }
}

/// Evaluates the structural hypotheses with the default scan bound.
pub fn check_hypotheses(spec: &NonlinearitySpec, dim: usize) -> Result<HypothesisReport> {
    check_hypotheses_with(spec, dim, DEFAULT_T_MAX)
}

pub fn check_hypotheses_with(spec: &NonlinearitySpec, dim: usize, t_max: f64) -> Result<HypothesisReport> {
    if dim < 2 {
        return Err(Error::InvalidConfig(format!("dimension must be >= 2, got {dim}")));
    }
    if !(t_max > 0.0) {
        return Err(Error::InvalidConfig(format!("t_max must be positive, got {t_max}")));
    }
    spec.validate()?;
    let kappa = mass_critical_exponent(dim);
    let sobolev = sobolev_exponent(dim);

    let (f1, f2, f3) = family_flags(spec, kappa, sobolev);
    // Odd by construction for every family.
    let f5 = true;

    let zeta = scan_maximizer(spec, t_max);
    let f4 = zeta.is_some();

    let p = spec.leading_exponent();
    let cond_11 = p < kappa;
    let cond_12 = !cond_11;
    let c_f = if cond_12 { Some(sup_ratio(spec, kappa)) } else { None };

    Ok(HypothesisReport {
        f1,
        f2,
        f3,
        f4,
        f5,
        cond_11,
        cond_12,
        zeta,
        c_f,
    })
}

fn family_flags(spec: &NonlinearitySpec, kappa: f64, sobolev: f64) -> (bool, bool, bool) {
    match &spec.kind {
        // f t = |t|^p - |t|^q -> -inf, growth |t|^{q-1} with q < 2*.
        NonlinearityKind::PowerDifference { p, q } => (true, *p > 2.0, *q < sobolev),
        // f t / |t|^kappa = |t|^{p - kappa} -> 0 iff p < kappa.
        NonlinearityKind::PurePower { p } => (true, *p > 2.0, *p < kappa && *p < sobolev),
        NonlinearityKind::Truncated { base, zeta1 } => {
            let (_, f2, _) = family_flags(base, kappa, sobolev);
            // Continuity at the cut requires f(zeta1) = 0.
            let scale = base.f(zeta1 * 0.5).abs().max(f64::MIN_POSITIVE);
            let f1 = base.f(*zeta1).abs() <= 1e-9 * scale.max(1.0);
            (f1, f2, true)
        }
    }
}

fn scan_maximizer(spec: &NonlinearitySpec, t_max: f64) -> Option<f64> {
    let mut best_t = 0.0;
    let mut best_v = 0.0;
    for i in 1..=SCAN_POINTS {
        let t = i as f64 * t_max / SCAN_POINTS as f64;
        let v = spec.big_f(t);
        if v > best_v {
            best_v = v;
            best_t = t;
        }
    }
    (best_v > 0.0).then_some(best_t)
}

/// Closed-form `sup_{t != 0} F(t)/|t|^kappa` under `cond_12`.
fn sup_ratio(spec: &NonlinearitySpec, kappa: f64) -> f64 {
    match &spec.kind {
        NonlinearityKind::PowerDifference { p, q } => {
            if (*p - kappa).abs() <= 1e-12 {
                1.0 / p
            } else {
                pd_ratio(*p, *q, kappa, pd_ratio_argmax(*p, *q, kappa))
            }
        }
        NonlinearityKind::PurePower { p } => {
            if (*p - kappa).abs() <= 1e-12 {
                1.0 / p
            } else {
                f64::INFINITY
            }
        }
        NonlinearityKind::Truncated { base, zeta1 } => match &base.kind {
            NonlinearityKind::PowerDifference { p, q } => {
                if (*p - kappa).abs() <= 1e-12 {
                    1.0 / p
                } else {
                    let t = pd_ratio_argmax(*p, *q, kappa).min(*zeta1);
                    pd_ratio(*p, *q, kappa, t)
                }
            }
            _ => sup_ratio(base, kappa),
        },
    }
}

fn pd_ratio(p: f64, q: f64, kappa: f64, t: f64) -> f64 {
    t.powf(p - kappa) / p - t.powf(q - kappa) / q
}

fn pd_ratio_argmax(p: f64, q: f64, kappa: f64) -> f64 {
    // d/dt [t^{p-k}/p - t^{q-k}/q] = 0
    ((q * (p - kappa)) / (p * (q - kappa))).powf(1.0 / (q - p))
}

/// Truncation at the first zero of `f` at or beyond the positivity witness.
///
/// Returns `NoZeroFound` when `f` keeps its sign on `[zeta, t_max]`.
pub fn try_truncate(spec: &NonlinearitySpec) -> Result<NonlinearitySpec> {
    try_truncate_with(spec, DEFAULT_T_MAX)
}

pub fn try_truncate_with(spec: &NonlinearitySpec, t_max: f64) -> Result<NonlinearitySpec> {
    if spec.is_truncated() {
        return Ok(spec.clone());
    }
    let report = check_hypotheses_with(spec, spec.dim, t_max)?;
    let zeta = report.zeta_or_err()?;
    if spec.f(zeta) == 0.0 {
        return NonlinearitySpec::truncated(spec.clone(), zeta);
    }
    // The witness comes from a grid, so the sign change may sit one cell below it.
    let step = t_max / SCAN_POINTS as f64;
    let from = (zeta - step).max(step);
    let mut lo = from;
    let mut f_lo = spec.f(lo);
    let n = ((t_max - from) / step).ceil() as usize;
    for i in 1..=n {
        let hi = (from + i as f64 * step).min(t_max);
        let f_hi = spec.f(hi);
        if f_hi == 0.0 {
            return NonlinearitySpec::truncated(spec.clone(), hi);
        }
        if f_lo.signum() != f_hi.signum() {
            let root = bisect(|t| spec.f(t), lo, hi);
            return NonlinearitySpec::truncated(spec.clone(), root);
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(Error::NoZeroFound { from, to: t_max })
}

/// Like [`try_truncate`] but returns the spec unchanged when `f` has no zero.
pub fn truncate(spec: &NonlinearitySpec) -> Result<NonlinearitySpec> {
    match try_truncate(spec) {
        Err(Error::NoZeroFound { .. }) => Ok(spec.clone()),
        other => other,
    }
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return mid;
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
