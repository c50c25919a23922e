//! Discretized fields on a [`ReducedGrid`] and the energy functional
//! `I(u) = ½∫|∇u|² - ∫F(u)` restricted to the sphere `‖u‖² = m`.
//!
//! The kinetic term is the edge-midpoint quadratic form
//! `K(u) = Σ_axes Σ_edges ω r_{i+1/2}^a (u_{i+1} - u_i)² / h · Π_other w`,
//! and the reduced Laplacian is its exact weighted gradient, so
//! `⟨-Δu, v⟩_w = ½ dK(u)[v]` holds to rounding. In the interior this is the
//! conservative second-order stencil for `∂²u + (a/r)∂u` on every axis.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ReducedGrid, Sector};
use crate::nonlinearity::NonlinearitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `‖u‖²_{L²}`.
    pub mass: f64,
    /// `∫|∇u|²`.
    pub kinetic: f64,
    /// `∫F(u)`.
    pub potential: f64,
    /// `½ kinetic - potential`.
    pub energy: f64,
    /// `(fu_u - kinetic)/mass`, zero for the zero field.
    pub mu: f64,
    /// `∫f(u)u`.
    pub fu_u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<ReducedGrid>,
    values: Vec<f64>,
}

impl Field {
    /// Wraps node values; the Dirichlet boundary `r_i = L` is set to zero.
    pub fn new(grid: Arc<ReducedGrid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len_nodes() {
            return Err(Error::ShapeMismatch {
                expected: grid.len_nodes(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("field values must be finite".into()));
        }
        zero_boundary(&grid, &mut values);
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<ReducedGrid>) -> Self {
        let n = grid.len_nodes();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `g(r1, r2, r3)` on the grid.
    pub fn from_fn(grid: Arc<ReducedGrid>, g: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let v = grid.sample(g);
        Self::new(grid, v)
    }

    pub fn grid(&self) -> &Arc<ReducedGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[cfg(test)]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn dim(&self) -> usize {
        self.grid.config.dim
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// `self + a * other` (same grid).
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Weighted inner product with another field on the same grid.
    pub fn inner(&self, other: &Field) -> f64 {
        self.grid.inner(&self.values, &other.values)
    }

    /// Weighted L² norm.
    pub fn l2_norm(&self) -> f64 {
        self.grid.norm(&self.values)
    }

    pub fn mass(&self) -> f64 {
        self.grid.inner(&self.values, &self.values)
    }

    pub fn kinetic(&self) -> f64 {
        kinetic_form(&self.grid, &self.values)
    }

    pub fn energy(&self, spec: &NonlinearitySpec) -> EnergyReport {
        let mass = self.mass();
        let kinetic = self.kinetic();
        let mut potential = 0.0;
        let mut fu_u = 0.0;
        for (&w, &u) in self.grid.weights().iter().zip(&self.values) {
            if w == 0.0 || u == 0.0 {
                continue;
            }
            potential += w * spec.big_f(u);
            fu_u += w * spec.f(u) * u;
        }
        let mu = if mass > 0.0 { (fu_u - kinetic) / mass } else { 0.0 };
        EnergyReport {
            mass,
            kinetic,
            potential,
            energy: 0.5 * kinetic - potential,
            mu,
            fu_u,
        }
    }

    /// `-Δu + μu - f(u)`; on zero-weight axis nodes the singular term
    /// `(a/r)∂u` is replaced by its limit `a ∂²u`.
    pub fn el_operator(&self, spec: &NonlinearitySpec, mu: f64) -> Field {
        let mut out = vec![0.0; self.values.len()];
        neg_laplacian_with_axis(&self.grid, &self.values, &mut out);
        for ((o, &u), &is_bd) in out.iter_mut().zip(&self.values).zip(boundary_mask(&self.grid).iter()) {
            if is_bd {
                *o = 0.0;
            } else {
                *o += mu * u - spec.f(u);
            }
        }
        Field {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// L² gradient `-Δu - f(u)` of the discrete energy with respect to the
    /// unknowns; zero on nodes that are not unknowns.
    pub fn l2_gradient(&self, spec: &NonlinearitySpec) -> Field {
        let mut out = vec![0.0; self.values.len()];
        l2_gradient_into(&self.grid, spec, &self.values, &mut out);
        Field {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// `√(m / mass(u)) u`.
    pub fn normalize_mass(&self, m: f64) -> Result<Field> {
        if !(m > 0.0) {
            return Err(Error::InvalidConfig(format!("target mass must be positive, got {m}")));
        }
        let mass = self.mass();
        if !(mass > 0.0) {
            return Err(Error::ZeroField);
        }
        Ok(self.scaled((m / mass).sqrt()))
    }

    /// `v(r) = u(r/t)` by multilinear interpolation; zero beyond the domain.
    pub fn dilate_space(&self, t: f64) -> Field {
        if t == 1.0 {
            return self.clone();
        }
        let inv = 1.0 / t;
        self.resample(|c| self.interpolate([c[0] * inv, c[1] * inv, c[2] * inv]))
    }

    /// `v(r) = s^{N/2} u(s r)`: mass-preserving, kinetic scales by `s²`.
    pub fn rescale_s(&self, s: f64) -> Field {
        if s == 1.0 {
            return self.clone();
        }
        let amp = s.powf(self.dim() as f64 / 2.0);
        self.resample(|c| amp * self.interpolate([c[0] * s, c[1] * s, c[2] * s]))
    }

    fn resample(&self, g: impl Fn([f64; 3]) -> f64) -> Field {
        let mut values = self.grid.sample(g);
        zero_boundary(&self.grid, &mut values);
        Field {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Interpolates onto another grid of the same symmetry setting.
    pub fn transfer(&self, target: &Arc<ReducedGrid>) -> Result<Field> {
        if target.config != self.grid.config {
            return Err(Error::InvalidConfig(
                "target grid has a different symmetry setting".into(),
            ));
        }
        let mut values = target.sample(|c| self.interpolate(c));
        zero_boundary(target, &mut values);
        Ok(Field {
            grid: target.clone(),
            values,
        })
    }

    /// Multilinear interpolation at reduced coordinates; zero outside `[0, L]^d`.
    pub fn interpolate(&self, q: [f64; 3]) -> f64 {
        let g = &*self.grid;
        let shape = g.shape3();
        let mut lo = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for (ax, axis) in g.axes.iter().enumerate() {
            let x = q[ax];
            if !(x >= 0.0) || x > g.len {
                return 0.0;
            }
            let pos = x / axis.h;
            let i = (pos.floor() as usize).min(axis.n - 2);
            lo[ax] = i;
            frac[ax] = pos - i as f64;
        }
        let mut acc = 0.0;
        let corners = 1usize << g.dims();
        for c in 0..corners {
            let mut w = 1.0;
            let mut ijk = [0usize; 3];
            for ax in 0..g.dims() {
                let up = (c >> ax) & 1 == 1;
                ijk[ax] = lo[ax] + up as usize;
                w *= if up { frac[ax] } else { 1.0 - frac[ax] };
            }
            if w != 0.0 {
                acc += w * self.values[(ijk[0] * shape[1] + ijk[1]) * shape[2] + ijk[2]];
            }
        }
        acc
    }

    /// Projects onto the swap-odd subspace (no-op in the radial sector).
    pub fn antisymmetrized(&self) -> Field {
        match self.grid.config.sector {
            Sector::X2Reduced => Field {
                grid: self.grid.clone(),
                values: self.grid.antisymmetrize(&self.values).expect("x2 grid"),
            },
            Sector::Radial => self.clone(),
        }
    }

    /// Distance to the swap-odd subspace; zero in the radial sector.
    pub fn symmetry_residual(&self) -> f64 {
        match self.grid.config.sector {
            Sector::X2Reduced => self.grid.symmetry_residual(&self.values).expect("x2 grid"),
            Sector::Radial => 0.0,
        }
    }

    /// Sets zero-weight axis nodes from the even extrapolation `(4u_1 - u_2)/3`.
    pub fn fill_axis_ghosts(&mut self) {
        fill_axis_ghosts(&self.grid, &mut self.values);
    }
}

/// Smooth random field: three Gaussian bumps of width `~length` placed in
/// `[0, 1.5 length]^d`, projected onto the sector; never identically zero.
pub fn random_smooth<R: Rng + ?Sized>(grid: &Arc<ReducedGrid>, rng: &mut R, length: f64) -> Field {
    let d = grid.dims();
    loop {
        let bumps: Vec<([f64; 3], f64, f64)> = (0..3)
            .map(|_| {
                let mut c = [0.0; 3];
                for x in c.iter_mut().take(d) {
                    *x = rng.random_range(0.0..1.5) * length;
                }
                (c, rng.random_range(0.4..0.8) * length, rng.random_range(-1.0..1.0))
            })
            .collect();
        let values = grid.sample(|x| {
            bumps
                .iter()
                .map(|(c, w, a)| {
                    let r2: f64 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum();
                    a * (-r2 / (w * w)).exp()
                })
                .sum()
        });
        let f = Field::new(grid.clone(), values)
            .expect("finite samples")
            .antisymmetrized();
        if f.mass() > 0.0 {
            return f;
        }
    }
}

fn strides(shape: [usize; 3]) -> [usize; 3] {
    [shape[1] * shape[2], shape[2], 1]
}

#[inline]
fn unravel(idx: usize, shape: [usize; 3]) -> [usize; 3] {
    [idx / (shape[1] * shape[2]), (idx / shape[2]) % shape[1], idx % shape[2]]
}

fn boundary_mask(grid: &ReducedGrid) -> Vec<bool> {
    let shape = grid.shape3();
    (0..grid.len_nodes())
        .map(|idx| {
            let ijk = unravel(idx, shape);
            grid.axes.iter().enumerate().any(|(ax, a)| ijk[ax] + 1 == a.n)
        })
        .collect()
}

pub(crate) fn zero_boundary(grid: &ReducedGrid, values: &mut [f64]) {
    let shape = grid.shape3();
    let st = strides(shape);
    for (ax, a) in grid.axes.iter().enumerate() {
        let last = a.n - 1;
        for idx in 0..values.len() {
            if (idx / st[ax]) % shape[ax] == last {
                values[idx] = 0.0;
            }
        }
    }
}

pub(crate) fn fill_axis_ghosts(grid: &ReducedGrid, values: &mut [f64]) {
    let shape = grid.shape3();
    let st = strides(shape);
    for (ax, a) in grid.axes.iter().enumerate() {
        if !a.has_ghost() {
            continue;
        }
        let s = st[ax];
        for idx in 0..values.len() {
            if (idx / s).is_multiple_of(shape[ax]) {
                values[idx] = (4.0 * values[idx + s] - values[idx + 2 * s]) / 3.0;
            }
        }
    }
}

/// Edge-midpoint kinetic form `∫|∇u|²`.
pub(crate) fn kinetic_form(grid: &ReducedGrid, u: &[f64]) -> f64 {
    let shape = grid.shape3();
    let st = strides(shape);
    let d = grid.dims();
    let one = [1.0];
    let w_of = |ax: usize| -> &[f64] {
        if ax < d {
            &grid.axes[ax].weights
        } else {
            &one
        }
    };
    let mut total = 0.0;
    for ax in 0..d {
        let e = &grid.axes[ax].stiffness;
        let mut sum = 0.0;
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                for k in 0..shape[2] {
                    let ijk = [i, j, k];
                    let ia = ijk[ax];
                    if ia + 1 >= shape[ax] || e[ia] == 0.0 {
                        continue;
                    }
                    let mut other = 1.0;
                    for b in 0..3 {
                        if b != ax {
                            other *= w_of(b)[if b < d { ijk[b] } else { 0 }];
                        }
                    }
                    if other == 0.0 {
                        continue;
                    }
                    let idx = (i * shape[1] + j) * shape[2] + k;
                    let du = u[idx + st[ax]] - u[idx];
                    sum += e[ia] * du * du * other;
                }
            }
        }
        total += sum;
    }
    grid.omega * total
}

/// `-Δu` on unknowns (conservative stencil), zero elsewhere.
pub(crate) fn neg_laplacian_into(grid: &ReducedGrid, u: &[f64], out: &mut [f64]) {
    let shape = grid.shape3();
    let st = strides(shape);
    let dof = grid.dof_mask();
    for (idx, o) in out.iter_mut().enumerate() {
        if !dof[idx] {
            *o = 0.0;
            continue;
        }
        let ijk = unravel(idx, shape);
        let mut acc = 0.0;
        for (ax, a) in grid.axes.iter().enumerate() {
            let i = ijk[ax];
            let s = st[ax];
            let mut t = a.stiffness[i] * (u[idx] - u[idx + s]);
            if i > 0 {
                t += a.stiffness[i - 1] * (u[idx] - u[idx - s]);
            }
            acc += t / a.weights[i];
        }
        *o = acc;
    }
}

/// Like [`neg_laplacian_into`] but also fills zero-weight axis nodes with the
/// axis-limit stencil `-(1 + a) 2(u_1 - u_0)/h²` along the singular axis.
fn neg_laplacian_with_axis(grid: &ReducedGrid, u: &[f64], out: &mut [f64]) {
    neg_laplacian_into(grid, u, out);
    let shape = grid.shape3();
    let st = strides(shape);
    let dof = grid.dof_mask();
    for idx in 0..out.len() {
        if dof[idx] {
            continue;
        }
        let ijk = unravel(idx, shape);
        if grid.axes.iter().enumerate().any(|(ax, a)| ijk[ax] + 1 == a.n) {
            out[idx] = 0.0;
            continue;
        }
        let mut acc = 0.0;
        for (ax, a) in grid.axes.iter().enumerate() {
            let i = ijk[ax];
            let s = st[ax];
            if i == 0 && a.has_ghost() {
                let h2 = a.h * a.h;
                acc -= (1.0 + a.exponent as f64) * 2.0 * (u[idx + s] - u[idx]) / h2;
            } else {
                let mut t = a.stiffness[i] * (u[idx] - u[idx + s]);
                if i > 0 {
                    t += a.stiffness[i - 1] * (u[idx] - u[idx - s]);
                }
                acc += t / a.weights[i];
            }
        }
        out[idx] = acc;
    }
}

pub(crate) fn l2_gradient_into(grid: &ReducedGrid, spec: &NonlinearitySpec, u: &[f64], out: &mut [f64]) {
    neg_laplacian_into(grid, u, out);
    for ((o, &x), &d) in out.iter_mut().zip(u).zip(grid.dof_mask()) {
        if d {
            *o -= spec.f(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SymmetryConfig;
    use crate::nonlinearity::NonlinearitySpec;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize, len: f64) -> Arc<ReducedGrid> {
        Arc::new(ReducedGrid::new(SymmetryConfig::x2(4, 2).unwrap(), &[n], len).unwrap())
    }

    fn gaussian(g: &Arc<ReducedGrid>) -> Field {
        Field::from_fn(g.clone(), |c| (-(c[0] * c[0] + c[1] * c[1]) / 2.0).exp()).unwrap()
    }

    fn random_anti(g: &Arc<ReducedGrid>, rng: &mut ChaCha8Rng, scale: f64) -> Field {
        random_smooth(g, rng, scale)
    }

    #[test]
    fn gaussian_mass_and_kinetic() {
        let g = grid(192, 12.0);
        let u = gaussian(&g);
        assert_relative_eq!(u.mass(), PI * PI, max_relative = 1e-3);
        assert_relative_eq!(u.kinetic(), 2.0 * PI * PI, max_relative = 1e-2);
        assert_eq!(Field::zeros(g.clone()).mass(), 0.0);
        assert_eq!(Field::zeros(g).kinetic(), 0.0);
    }

    #[test]
    fn kinetic_second_order() {
        let err = |n: usize| {
            let g = grid(n, 8.0);
            (gaussian(&g).kinetic() - 2.0 * PI * PI).abs()
        };
        let (e1, e2) = (err(33), err(65));
        let ratio = e1 / e2;
        assert!(ratio > 3.3 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn normalize_mass_cases() {
        let g = grid(32, 4.0);
        let u = gaussian(&g);
        let v = u.normalize_mass(2.0).unwrap();
        assert_relative_eq!(v.mass(), 2.0, max_relative = 1e-14);
        let w = v.normalize_mass(2.0).unwrap();
        for (a, b) in v.values().iter().zip(w.values()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-15);
        }
        let four = u.scaled(2.0 / u.mass().sqrt());
        let half = four.normalize_mass(1.0).unwrap();
        assert_relative_eq!(
            half.values()[g.index(3, 5, 0)],
            0.5 * four.values()[g.index(3, 5, 0)],
            max_relative = 1e-14
        );
        assert!(matches!(Field::zeros(g).normalize_mass(1.0), Err(Error::ZeroField)));
    }

    #[test]
    fn energy_report_identities() {
        let g = grid(48, 6.0);
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let r0 = Field::zeros(g.clone()).energy(&spec);
        assert_eq!(r0, EnergyReport::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let u = random_anti(&g, &mut rng, 2.0);
            let r = u.energy(&spec);
            assert_eq!(r.energy, 0.5 * r.kinetic - r.potential);
            assert_eq!(r.mu, (r.fu_u - r.kinetic) / r.mass);
            assert!(r.potential >= 0.0);
        }
    }

    #[test]
    fn laplacian_of_gaussian_pointwise() {
        // Truncation at a tiny cut makes f vanish on the sampled values.
        let zero_f = NonlinearitySpec::truncated(NonlinearitySpec::pure_power(2.5, 4).unwrap(), 1e-300).unwrap();
        let max_err = |n: usize| {
            let g = grid(n, 8.0);
            let u = gaussian(&g);
            let r = u.el_operator(&zero_f, 0.0);
            let mut worst: f64 = 0.0;
            for idx in 0..g.len_nodes() {
                let c = g.coords(idx);
                if c[0] < 0.5 || c[1] < 0.5 || c[0] > 4.0 || c[1] > 4.0 {
                    continue;
                }
                let s = c[0] * c[0] + c[1] * c[1];
                let exact = (4.0 - s) * (-s / 2.0).exp();
                worst = worst.max((r.values()[idx] - exact).abs());
            }
            worst
        };
        let (e1, e2) = (max_err(65), max_err(129));
        assert!(e2 < 5e-3, "{e2}");
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn axis_limit_stencil_near_origin() {
        let zero_f = NonlinearitySpec::truncated(NonlinearitySpec::pure_power(2.5, 4).unwrap(), 1e-300).unwrap();
        let g = grid(129, 8.0);
        let u = gaussian(&g);
        let r = u.el_operator(&zero_f, 0.0);
        // -Δu(0) = 4 for the 4D Gaussian.
        assert!((r.values()[g.index(0, 0, 0)] - 4.0).abs() < 5e-2, "{}", r.values()[0]);
        assert_eq!(Field::zeros(g.clone()).el_operator(&zero_f, 1.0).sup_norm(), 0.0);
    }

    #[test]
    fn gradient_matches_central_difference() {
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let g = grid(64, 6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let u = random_anti(&g, &mut rng, 2.0);
            let mut v = random_anti(&g, &mut rng, 2.0);
            fill_axis_ghosts(&g, v.values_mut());
            let eps = 1e-4;
            let ip = u.l2_gradient(&spec).inner(&v);
            let fd = (u.axpy(eps, &v).energy(&spec).energy - u.axpy(-eps, &v).energy(&spec).energy) / (2.0 * eps);
            assert!(((ip - fd) / fd).abs() < 1e-5, "{ip} vs {fd}");
        }
        assert_eq!(Field::zeros(g).l2_gradient(&spec).sup_norm(), 0.0);
    }

    #[test]
    fn operators_preserve_antisymmetry() {
        let spec = NonlinearitySpec::power_difference(2.5, 3.5, 4).unwrap();
        let g = grid(40, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_anti(&g, &mut rng, 2.0);
        assert!(u.l2_gradient(&spec).symmetry_residual() < 1e-12);
        assert!(u.el_operator(&spec, 0.3).symmetry_residual() < 1e-12);
        assert!(u.dilate_space(1.2).symmetry_residual() < 1e-12);
        assert!(u.rescale_s(0.7).symmetry_residual() < 1e-12);
    }

    fn smooth_compact(g: &Arc<ReducedGrid>) -> Field {
        Field::from_fn(g.clone(), |c| {
            let a = (c[0] - 2.0).powi(2) + (c[1] - 1.0).powi(2);
            let b = (c[0] - 1.0).powi(2) + (c[1] - 2.0).powi(2);
            let bump = |s: f64| if s < 2.25 { (1.0 - s / 2.25).powi(4) } else { 0.0 };
            bump(a) - bump(b)
        })
        .unwrap()
    }

    #[test]
    fn dilation_mass_ratio() {
        let g = grid(128, 8.0);
        let u = smooth_compact(&g);
        assert_eq!(u.dilate_space(1.0), u);
        let v = u.dilate_space(1.25);
        assert_relative_eq!(v.mass() / u.mass(), 1.25f64.powi(4), max_relative = 1e-2);
    }

    #[test]
    fn dilation_energy_identity() {
        let spec = NonlinearitySpec::pure_power(2.5, 4).unwrap();
        let g = grid(128, 8.0);
        let u = smooth_compact(&g).scaled(2.0);
        let ru = u.energy(&spec);
        for t in [0.8f64, 1.25] {
            let rv = u.dilate_space(t).energy(&spec);
            let predicted = t.powi(4) * ru.energy + 0.5 * t.powi(2) * (1.0 - t * t) * ru.kinetic;
            assert_relative_eq!(rv.energy, predicted, max_relative = 2e-2);
        }
    }

    #[test]
    fn s_rescaling_laws() {
        let g = grid(128, 8.0);
        let u = smooth_compact(&g);
        assert_eq!(u.rescale_s(1.0), u);
        let v = u.rescale_s(0.5);
        assert_relative_eq!(v.kinetic() / u.kinetic(), 0.25, max_relative = 1e-2);
        assert_relative_eq!(v.mass(), u.mass(), max_relative = 1e-2);
    }

    #[test]
    fn boundary_is_zeroed() {
        let g = grid(16, 2.0);
        let u = Field::from_fn(g.clone(), |_| 1.0).unwrap();
        let shape = g.shape3();
        for idx in 0..g.len_nodes() {
            let ijk = unravel(idx, shape);
            if ijk[0] == 15 || ijk[1] == 15 {
                assert_eq!(u.values()[idx], 0.0);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn mass_positive_unless_zero(seed in 0u64..1000, scale in 0.5f64..3.0) {
                let g = grid(24, 5.0);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u = random_anti(&g, &mut rng, scale);
                let on_support = u.values().iter().zip(g.weights()).any(|(v, w)| *w > 0.0 && *v != 0.0);
                prop_assert_eq!(u.mass() > 0.0, on_support);
                prop_assert!(u.kinetic() >= 0.0);
            }
        }
    }
}
