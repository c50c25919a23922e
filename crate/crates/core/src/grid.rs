//! Symmetry sectors and the reduced block-radial grid.
//!
//! A function invariant under `O(M) x O(M) x O(N-2M)` depends only on
//! `(r1, r2, r3) = (|x1|, |x2|, |x3|)`, and integrals over `R^N` become
//! weighted integrals over `[0, L]^d` with weight
//! `ω r1^{M-1} r2^{M-1} r3^{N-2M-1}`. The radial sector is the `d = 1` case
//! with weight `ω_{N-1} r^{N-1}`.
//!
//! Node weights use the trapezoid rule with a third-order Gregory correction
//! at `r = 0` on axes with an odd exponent, where the integrand `r^a g(r)` is
//! odd and the plain rule loses accuracy. Nodes at `r = 0` on axes with a
//! positive exponent carry zero weight and are not unknowns; nodes at `r = L`
//! carry the Dirichlet value zero.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// `O(M) x O(M) x O(N-2M)`-invariant functions, odd under `x1 <-> x2`.
    #[serde(rename = "x2")]
    X2Reduced,
    Radial,
}

impl Sector {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sector::X2Reduced => "x2",
            Sector::Radial => "radial",
        }
    }
}

impl std::str::FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x2" | "x2_reduced" => Ok(Sector::X2Reduced),
            "radial" => Ok(Sector::Radial),
            other => Err(Error::InvalidConfig(format!("unknown sector '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryConfig {
    /// Ambient dimension `N`.
    pub dim: usize,
    /// Block dimension `M`; ignored in the radial sector.
    pub block: usize,
    pub sector: Sector,
}

impl SymmetryConfig {
    pub fn x2(dim: usize, block: usize) -> Result<Self> {
        let c = Self {
            dim,
            block,
            sector: Sector::X2Reduced,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn radial(dim: usize) -> Result<Self> {
        let c = Self {
            dim,
            block: 0,
            sector: Sector::Radial,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self.sector {
            Sector::X2Reduced => {
                if self.dim < 4 || self.block < 2 || 2 * self.block > self.dim {
                    return Err(Error::InvalidConfig(format!(
                        "x2 sector needs N >= 4, M >= 2, 2M <= N (got N = {}, M = {})",
                        self.dim, self.block
                    )));
                }
            }
            Sector::Radial => {
                if self.dim < 2 {
                    return Err(Error::InvalidConfig(format!(
                        "radial sector needs N >= 2 (got N = {})",
                        self.dim
                    )));
                }
            }
        }
        Ok(())
    }

    /// Weight exponents of the reduced axes.
    pub fn exponents(&self) -> Vec<u32> {
        match self.sector {
            Sector::X2Reduced => {
                let m1 = (self.block - 1) as u32;
                let mut e = vec![m1, m1];
                if self.dim > 2 * self.block {
                    e.push((self.dim - 2 * self.block - 1) as u32);
                }
                e
            }
            Sector::Radial => vec![(self.dim - 1) as u32],
        }
    }

    /// Angular factor `ω` of the reduced measure.
    pub fn omega(&self) -> f64 {
        match self.sector {
            Sector::X2Reduced => {
                let om = sphere_area(self.block - 1);
                let mut w = om * om;
                if self.dim > 2 * self.block {
                    w *= sphere_area(self.dim - 2 * self.block - 1);
                }
                w
            }
            Sector::Radial => sphere_area(self.dim - 1),
        }
    }

    pub fn reduced_dims(&self) -> usize {
        self.exponents().len()
    }
}

/// Surface area of the unit sphere `S^l` in `R^{l+1}`.
pub fn sphere_area(l: usize) -> f64 {
    let h = (l as f64 + 1.0) / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// One reduced axis: node spacing, 1D quadrature weights and edge stiffnesses.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub n: usize,
    pub h: f64,
    pub exponent: u32,
    /// `r_i^a h c_i` with trapezoid/Gregory factors `c_i`.
    pub weights: Vec<f64>,
    /// `r_{i+1/2}^a / h` for the edge `(i, i+1)`; zero for the edge touching a
    /// zero-weight axis node.
    pub stiffness: Vec<f64>,
}

impl Axis {
    fn new(n: usize, len: f64, exponent: u32) -> Self {
        let h = len / (n - 1) as f64;
        let mut corr = vec![1.0; n];
        corr[n - 1] = 0.5;
        if exponent % 2 == 1 {
            corr[0] = 3.0 / 8.0;
            corr[1] = 7.0 / 6.0;
            corr[2] = 23.0 / 24.0;
        } else {
            corr[0] = 0.5;
        }
        let weights = (0..n)
            .map(|i| (i as f64 * h).powi(exponent as i32) * h * corr[i])
            .collect();
        let stiffness = (0..n - 1)
            .map(|i| {
                if i == 0 && exponent > 0 {
                    0.0
                } else {
                    ((i as f64 + 0.5) * h).powi(exponent as i32) / h
                }
            })
            .collect();
        Self {
            n,
            h,
            exponent,
            weights,
            stiffness,
        }
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// Whether node `i` is an unknown (not the Dirichlet end nor a zero-weight axis node).
    #[inline]
    pub fn is_dof(&self, i: usize) -> bool {
        i + 1 < self.n && !(i == 0 && self.exponent > 0)
    }

    #[inline]
    pub fn has_ghost(&self) -> bool {
        self.exponent > 0
    }
}

/// Uniform tensor grid on `[0, L]^d` with precomputed quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedGrid {
    pub config: SymmetryConfig,
    pub len: f64,
    pub omega: f64,
    pub axes: Vec<Axis>,
    /// Shape padded to three axes with trailing ones.
    shape3: [usize; 3],
    weights: Vec<f64>,
    dof: Vec<bool>,
}

impl ReducedGrid {
    /// Builds the grid; `n_per_axis` may hold one entry (broadcast) or one per axis.
    pub fn new(config: SymmetryConfig, n_per_axis: &[usize], len: f64) -> Result<Self> {
        config.validate()?;
        let exps = config.exponents();
        let d = exps.len();
        let ns: Vec<usize> = match n_per_axis.len() {
            1 => vec![n_per_axis[0]; d],
            k if k == d => n_per_axis.to_vec(),
            k => return Err(Error::InvalidConfig(format!("expected 1 or {d} grid sizes, got {k}"))),
        };
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "domain radius must be positive, got {len}"
            )));
        }
        if let Some(n) = ns.iter().find(|&&n| n < 16) {
            return Err(Error::InvalidConfig(format!(
                "need at least 16 points per axis, got {n}"
            )));
        }
        if config.sector == Sector::X2Reduced && ns[0] != ns[1] {
            return Err(Error::InvalidConfig(format!(
                "x2 sector needs n1 = n2 for the swap symmetry, got {} and {}",
                ns[0], ns[1]
            )));
        }
        let axes: Vec<Axis> = ns.iter().zip(&exps).map(|(&n, &a)| Axis::new(n, len, a)).collect();
        let omega = config.omega();
        let mut shape3 = [1usize; 3];
        for (s, a) in shape3.iter_mut().zip(&axes) {
            *s = a.n;
        }
        let total: usize = shape3.iter().product();
        let mut weights = vec![0.0; total];
        let mut dof = vec![false; total];
        let ax = |k: usize| axes.get(k);
        for i in 0..shape3[0] {
            for j in 0..shape3[1] {
                for k in 0..shape3[2] {
                    let idx = (i * shape3[1] + j) * shape3[2] + k;
                    let mut w = omega * axes[0].weights[i];
                    let mut is_dof = axes[0].is_dof(i);
                    if let Some(a) = ax(1) {
                        w *= a.weights[j];
                        is_dof &= a.is_dof(j);
                    }
                    if let Some(a) = ax(2) {
                        w *= a.weights[k];
                        is_dof &= a.is_dof(k);
                    }
                    weights[idx] = w;
                    dof[idx] = is_dof;
                }
            }
        }
        Ok(Self {
            config,
            len,
            omega,
            axes,
            shape3,
            weights,
            dof,
        })
    }

    /// Same domain with every spacing halved (`n -> 2n - 1`).
    pub fn refined(&self) -> Result<Self> {
        let ns: Vec<usize> = self.axes.iter().map(|a| 2 * a.n - 1).collect();
        Self::new(self.config, &ns, self.len)
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn shape3(&self) -> [usize; 3] {
        self.shape3
    }

    pub fn len_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dof_mask(&self) -> &[bool] {
        &self.dof
    }

    /// Smallest spacing over the axes.
    pub fn h_min(&self) -> f64 {
        self.axes.iter().map(|a| a.h).fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.shape3[1] + j) * self.shape3[2] + k
    }

    /// Reduced coordinates `(r1, r2, r3)` of a node; missing axes read as zero.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let k = idx % self.shape3[2];
        let j = (idx / self.shape3[2]) % self.shape3[1];
        let i = idx / (self.shape3[1] * self.shape3[2]);
        let mut c = [0.0; 3];
        for (ax, (slot, ii)) in self.axes.iter().zip(c.iter_mut().zip([i, j, k])) {
            *slot = ax.coord(ii);
        }
        c
    }

    /// Distance `|x|` of the lifted point.
    pub fn radius(&self, idx: usize) -> f64 {
        let c = self.coords(idx);
        (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
    }

    /// Samples `g(r1, r2, r3)` at every node.
    pub fn sample(&self, g: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        (0..self.len_nodes()).map(|idx| g(self.coords(idx))).collect()
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len_nodes() {
            Err(Error::ShapeMismatch {
                expected: self.len_nodes(),
                got: values.len(),
            })
        } else {
            Ok(())
        }
    }

    /// `Σ w_i v_i`, the integral over `R^N` of the lifted function.
    pub fn quadrature(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values)?;
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }

    /// Weighted inner product `Σ w_i a_i b_i`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// Closed-form volume of the reduced box image `ω Π L^{a+1}/(a+1)`.
    pub fn box_volume(&self) -> f64 {
        self.omega
            * self
                .axes
                .iter()
                .map(|a| self.len.powi(a.exponent as i32 + 1) / (a.exponent as f64 + 1.0))
                .product::<f64>()
    }

    fn require_x2(&self) -> Result<()> {
        if self.config.sector == Sector::X2Reduced {
            Ok(())
        } else {
            Err(Error::SectorMismatch { expected: "x2" })
        }
    }

    /// Index of the node with `r1` and `r2` exchanged.
    #[inline]
    pub fn swapped(&self, idx: usize) -> usize {
        let n2 = self.shape3[1];
        let n3 = self.shape3[2];
        let k = idx % n3;
        let j = (idx / n3) % n2;
        let i = idx / (n2 * n3);
        self.index(j, i, k)
    }

    /// Projector onto functions odd under `r1 <-> r2`: `(u - u∘swap)/2`.
    pub fn antisymmetrize(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.require_x2()?;
        self.check_len(values)?;
        Ok((0..values.len())
            .map(|idx| 0.5 * (values[idx] - values[self.swapped(idx)]))
            .collect())
    }

    /// In-place variant of [`Self::antisymmetrize`].
    pub fn antisymmetrize_in_place(&self, values: &mut [f64]) -> Result<()> {
        let v = self.antisymmetrize(values)?;
        values.copy_from_slice(&v);
        Ok(())
    }

    /// Weighted L2 norm of the symmetric part `(u + u∘swap)/2`.
    pub fn symmetry_residual(&self, values: &[f64]) -> Result<f64> {
        self.require_x2()?;
        self.check_len(values)?;
        let sym: Vec<f64> = (0..values.len())
            .map(|idx| 0.5 * (values[idx] + values[self.swapped(idx)]))
            .collect();
        Ok(self.norm(&sym))
    }

    /// Spherical average of the lifted function and the relative deviation from it.
    pub fn radial_profile(&self, values: &[f64]) -> Result<RadialProfile> {
        self.require_x2()?;
        self.check_len(values)?;
        let bin = 0.5 * self.h_min();
        let r_max = self.len * (self.dims() as f64).sqrt();
        let nbins = (r_max / bin).ceil() as usize + 1;
        let mut num = vec![0.0; nbins];
        let mut den = vec![0.0; nbins];
        for (idx, (&w, &v)) in self.weights.iter().zip(values).enumerate() {
            if w == 0.0 {
                continue;
            }
            let b = ((self.radius(idx) / bin).floor() as usize).min(nbins - 1);
            num[b] += w * v;
            den[b] += w;
        }
        let radii: Vec<f64> = (0..nbins).map(|b| (b as f64 + 0.5) * bin).collect();
        let profile: Vec<f64> = num
            .iter()
            .zip(&den)
            .map(|(n, d)| if *d > 0.0 { n / d } else { 0.0 })
            .collect();
        let occupied: Vec<usize> = (0..nbins).filter(|&b| den[b] > 0.0).collect();
        // Piecewise-linear interpolation of the bin averages in |x|.
        let eval = |r: f64| -> f64 {
            if occupied.is_empty() {
                return 0.0;
            }
            let pos = occupied.partition_point(|&b| radii[b] <= r);
            if pos == 0 {
                return profile[occupied[0]];
            }
            if pos == occupied.len() {
                return profile[occupied[pos - 1]];
            }
            let (b0, b1) = (occupied[pos - 1], occupied[pos]);
            let t = (r - radii[b0]) / (radii[b1] - radii[b0]);
            profile[b0] * (1.0 - t) + profile[b1] * t
        };
        let diff: Vec<f64> = (0..values.len())
            .map(|idx| values[idx] - eval(self.radius(idx)))
            .collect();
        let norm_u = self.norm(values);
        let deviation = if norm_u <= 1e-300 {
            0.0
        } else {
            self.norm(&diff) / norm_u
        };
        Ok(RadialProfile {
            radii,
            values: profile,
            deviation,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    /// Bin centers in `|x|`.
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// `‖u - u_rad‖ / ‖u‖`, zero for the zero field.
    pub deviation: f64,
}
