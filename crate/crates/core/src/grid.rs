//! Bounded domains with homogeneous Dirichlet data, their finite-difference
//! discretization, and the low Dirichlet eigenpairs.
//!
//! Every grid is a vertex-centered finite-volume discretization: each unknown
//! carries a control volume (its quadrature weight) and neighbouring unknowns
//! are coupled through face conductances. This makes `-Δ` self-adjoint in the
//! weighted inner product and lets the kinetic energy be written exactly as a
//! sum of squared differences.
//!
//! * `Interval(L)`: nodes `x_i = i h`, `i = 1..=n`, `h = L/(n+1)`.
//! * `Rectangle(Lx, Ly)`: tensor product of two intervals with `n` nodes each.
//! * `RadialBall(R, N)`: radial nodes `r_i = i h`, `i = 0..=n`, `h = R/(n+1)`.
//!   The node at the origin is an interior point of the ball, so a radial
//!   field holds `n + 1` values. The weights are exact shell volumes and the
//!   origin closure is the reflection `f'(0) = 0`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real or complex nodal values.
pub trait Scalar:
    Copy
    + Default
    + Send
    + Sync
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Mul<f64, Output = Self>
    + 'static
{
    fn from_re(x: f64) -> Self;
    fn abs_sq(self) -> f64;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn modulus(self) -> f64 {
        self.abs_sq().sqrt()
    }
}

impl Scalar for f64 {
    fn from_re(x: f64) -> Self {
        x
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
}

/// Surface measure of the unit sphere `S^{N-1}` in `R^N`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        d => 2.0 * PI / (d as f64 - 2.0) * unit_sphere_area(d - 2),
    }
}

/// A bounded domain with homogeneous Dirichlet boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
    RadialBall { radius: f64, dim: usize },
}

impl Domain {
    /// Spatial dimension of the physical domain.
    pub fn dim(&self) -> usize {
        match *self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
            Domain::RadialBall { dim, .. } => dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            Domain::Interval { length } if !ok(length) => Err(Error::InvalidDomain(format!(
                "interval length must be positive, got {length}"
            ))),
            Domain::Rectangle { lx, ly } if !ok(lx) || !ok(ly) => Err(Error::InvalidDomain(
                format!("rectangle extents must be positive, got ({lx}, {ly})"),
            )),
            Domain::RadialBall { radius, .. } if !ok(radius) => Err(Error::InvalidDomain(
                format!("ball radius must be positive, got {radius}"),
            )),
            Domain::RadialBall { dim: 0, .. } => {
                Err(Error::InvalidDomain("ball dimension must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Lebesgue measure `|Ω|`.
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length,
            Domain::Rectangle { lx, ly } => lx * ly,
            Domain::RadialBall { radius, dim } => {
                unit_sphere_area(dim) * radius.powi(dim as i32) / dim as f64
            }
        }
    }

    /// Compact textual form used in CSV headers, e.g. `interval(length=3.14)`.
    pub fn descriptor(&self) -> String {
        match *self {
            Domain::Interval { length } => format!("interval(length={length})"),
            Domain::Rectangle { lx, ly } => format!("rectangle(lx={lx},ly={ly})"),
            Domain::RadialBall { radius, dim } => {
                format!("radial_ball(radius={radius},dim={dim})")
            }
        }
    }

    pub fn from_descriptor(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('(')
            .ok_or_else(|| Error::Parse(format!("bad domain descriptor `{s}`")))?;
        if !s.ends_with(')') {
            return Err(Error::Parse(format!("bad domain descriptor `{s}`")));
        }
        let kind = &s[..open];
        let mut args = std::collections::BTreeMap::new();
        for kv in s[open + 1..s.len() - 1].split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad domain argument `{kv}`")))?;
            args.insert(k.trim().to_string(), v.trim().to_string());
        }
        let num = |key: &str| -> Result<f64> {
            args.get(key)
                .ok_or_else(|| Error::Parse(format!("missing `{key}` in `{s}`")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("`{key}`: {e}")))
        };
        let d = match kind {
            "interval" => Domain::Interval { length: num("length")? },
            "rectangle" => Domain::Rectangle { lx: num("lx")?, ly: num("ly")? },
            "radial_ball" => Domain::RadialBall {
                radius: num("radius")?,
                dim: args
                    .get("dim")
                    .ok_or_else(|| Error::Parse(format!("missing `dim` in `{s}`")))?
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("`dim`: {e}")))?,
            },
            other => return Err(Error::Parse(format!("unknown domain kind `{other}`"))),
        };
        d.validate()?;
        Ok(d)
    }
}

/// Tridiagonal finite-volume operator on a line of unknowns.
///
/// `K f` has entries `c_{i-1/2}(f_i - f_{i-1}) + c_{i+1/2}(f_i - f_{i+1}) + V_i q_i f_i`
/// with zero ghost values past the ends; `-Δ f = V^{-1} K f`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Chain {
    pub weights: Vec<f64>,
    /// Conductance to the zero ghost on the left (0 for a reflecting end).
    pub left: f64,
    /// Conductances between consecutive unknowns, length `m - 1`.
    pub inner: Vec<f64>,
    pub right: f64,
    /// Optional zeroth-order term `q`, e.g. a centrifugal potential.
    pub potential: Option<Vec<f64>>,
}

impl Chain {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn cond_left(&self, i: usize) -> f64 {
        if i == 0 {
            self.left
        } else {
            self.inner[i - 1]
        }
    }

    fn cond_right(&self, i: usize) -> f64 {
        if i + 1 == self.len() {
            self.right
        } else {
            self.inner[i]
        }
    }

    /// `(-Δ f)_i`.
    fn neg_laplacian<T: Scalar>(&self, f: &[T], out: &mut [T]) {
        let m = self.len();
        for i in 0..m {
            let fl = if i == 0 { T::default() } else { f[i - 1] };
            let fr = if i + 1 == m { T::default() } else { f[i + 1] };
            let mut k = (f[i] - fl) * self.cond_left(i) + (f[i] - fr) * self.cond_right(i);
            k = k * (1.0 / self.weights[i]);
            if let Some(q) = &self.potential {
                k += f[i] * q[i];
            }
            out[i] = k;
        }
    }

    fn kinetic<T: Scalar>(&self, f: &[T]) -> f64 {
        let m = self.len();
        let mut s = self.left * f[0].abs_sq() + self.right * f[m - 1].abs_sq();
        for i in 0..m - 1 {
            s += self.inner[i] * (f[i + 1] - f[i]).abs_sq();
        }
        if let Some(q) = &self.potential {
            for i in 0..m {
                s += self.weights[i] * q[i] * f[i].abs_sq();
            }
        }
        s
    }

    /// Solves `(a I + b (D + (-Δ))) x = rhs` by the Thomas algorithm.
    fn solve<T: Scalar>(&self, a: T, b: T, diag: Option<&[f64]>, rhs: &[T]) -> Vec<T> {
        let m = self.len();
        let mut lower = vec![T::default(); m];
        let mut main = vec![T::default(); m];
        let mut upper = vec![T::default(); m];
        let mut d = vec![T::default(); m];
        for i in 0..m {
            let v = self.weights[i];
            let mut zero_order = 0.0;
            if let Some(q) = &self.potential {
                zero_order += q[i];
            }
            if let Some(dg) = diag {
                zero_order += dg[i];
            }
            main[i] = a * v + b * (v * zero_order + self.cond_left(i) + self.cond_right(i));
            if i > 0 {
                lower[i] = -(b * self.inner[i - 1]);
            }
            if i + 1 < m {
                upper[i] = -(b * self.inner[i]);
            }
            d[i] = rhs[i] * v;
        }
        thomas(&lower, &main, &upper, &mut d);
        d
    }
}

/// In-place tridiagonal solve; `d` holds the right-hand side on entry and the
/// solution on exit.
fn thomas<T: Scalar>(lower: &[T], main: &[T], upper: &[T], d: &mut [T]) {
    let m = d.len();
    let mut c = vec![T::default(); m];
    let mut beta = main[0];
    c[0] = upper[0] / beta;
    d[0] = d[0] / beta;
    for i in 1..m {
        beta = main[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / beta;
        d[i] = (d[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..m - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
}

/// Tensor-product stencil on a rectangle, diagonalized by the discrete sine
/// transform.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tensor {
    pub n: usize,
    pub hx: f64,
    pub hy: f64,
    /// Orthogonal symmetric DST-I matrix, row-major `n × n`.
    pub sine: Vec<f64>,
    pub eig_x: Vec<f64>,
    pub eig_y: Vec<f64>,
}

impl Tensor {
    fn new(n: usize, hx: f64, hy: f64) -> Self {
        let np1 = (n + 1) as f64;
        let scale = (2.0 / np1).sqrt();
        let mut sine = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                sine[j * n + k] = scale * (PI * ((j + 1) * (k + 1)) as f64 / np1).sin();
            }
        }
        let eig = |h: f64| -> Vec<f64> {
            (1..=n)
                .map(|k| {
                    let s = (PI * k as f64 / (2.0 * np1)).sin();
                    4.0 * s * s / (h * h)
                })
                .collect()
        };
        Tensor { n, hx, hy, sine, eig_x: eig(hx), eig_y: eig(hy) }
    }

    fn neg_laplacian<T: Scalar>(&self, f: &[T], out: &mut [T]) {
        let n = self.n;
        let (ix, iy) = (1.0 / (self.hx * self.hx), 1.0 / (self.hy * self.hy));
        for i in 0..n {
            for j in 0..n {
                let c = f[i * n + j];
                let w = if i > 0 { f[(i - 1) * n + j] } else { T::default() };
                let e = if i + 1 < n { f[(i + 1) * n + j] } else { T::default() };
                let s = if j > 0 { f[i * n + j - 1] } else { T::default() };
                let nn = if j + 1 < n { f[i * n + j + 1] } else { T::default() };
                out[i * n + j] = (c * 2.0 - w - e) * ix + (c * 2.0 - s - nn) * iy;
            }
        }
    }

    fn kinetic<T: Scalar>(&self, f: &[T]) -> f64 {
        let n = self.n;
        let (cx, cy) = (self.hy / self.hx, self.hx / self.hy);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let c = f[i * n + j];
                let e = if i + 1 < n { f[(i + 1) * n + j] } else { T::default() };
                let nn = if j + 1 < n { f[i * n + j + 1] } else { T::default() };
                s += cx * (e - c).abs_sq() + cy * (nn - c).abs_sq();
                if i == 0 {
                    s += cx * c.abs_sq();
                }
                if j == 0 {
                    s += cy * c.abs_sq();
                }
            }
        }
        s
    }

    /// `S F S` for an `n × n` row-major array (its own inverse).
    fn transform<T: Scalar>(&self, f: &[T]) -> Vec<T> {
        let n = self.n;
        let mut tmp = vec![T::default(); n * n];
        for k in 0..n {
            let row = &mut tmp[k * n..(k + 1) * n];
            for i in 0..n {
                let s = self.sine[k * n + i];
                let src = &f[i * n..(i + 1) * n];
                for (t, &v) in row.iter_mut().zip(src) {
                    *t += v * s;
                }
            }
        }
        let mut out = vec![T::default(); n * n];
        for k in 0..n {
            let dst = &mut out[k * n..(k + 1) * n];
            for j in 0..n {
                let t = tmp[k * n + j];
                let srow = &self.sine[j * n..(j + 1) * n];
                for (o, &s) in dst.iter_mut().zip(srow) {
                    *o += t * s;
                }
            }
        }
        out
    }

    /// Solves `(a I + b(-Δ)) x = rhs` exactly in sine space.
    fn solve_const<T: Scalar>(&self, a: T, b: T, rhs: &[T]) -> Vec<T> {
        let n = self.n;
        let mut hat = self.transform(rhs);
        for k in 0..n {
            for l in 0..n {
                let den = a + b * (self.eig_x[k] + self.eig_y[l]);
                hat[k * n + l] = hat[k * n + l] / den;
            }
        }
        self.transform(&hat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layout {
    Chain(Chain),
    Tensor(Tensor),
}

/// A uniform discretization of a [`Domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    n: usize,
    h: [f64; 2],
    weights: Vec<f64>,
    boundary_weight: f64,
    layout: Layout,
}

/// Serializable identity of a grid: rebuilding from it reproduces the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub domain: Domain,
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        build_grid(self.domain, self.n)
    }
}

/// Builds the uniform grid with `n` nodes per axis (plus the axis node for
/// radial grids).
pub fn build_grid(domain: Domain, n: usize) -> Result<Arc<Grid>> {
    domain.validate()?;
    if n < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 nodes per axis, got {n}")));
    }
    let grid = match domain {
        Domain::Interval { length } => {
            let h = length / (n + 1) as f64;
            let c = 1.0 / h;
            Grid {
                domain,
                n,
                h: [h, 0.0],
                weights: vec![h; n],
                boundary_weight: h,
                layout: Layout::Chain(Chain {
                    weights: vec![h; n],
                    left: c,
                    inner: vec![c; n - 1],
                    right: c,
                    potential: None,
                }),
            }
        }
        Domain::Rectangle { lx, ly } => {
            let hx = lx / (n + 1) as f64;
            let hy = ly / (n + 1) as f64;
            let w = hx * hy;
            Grid {
                domain,
                n,
                h: [hx, hy],
                weights: vec![w; n * n],
                boundary_weight: lx * ly - (n * n) as f64 * w,
                layout: Layout::Tensor(Tensor::new(n, hx, hy)),
            }
        }
        Domain::RadialBall { radius, dim } => {
            let h = radius / (n + 1) as f64;
            let (weights, inner, right) = radial_volumes(dim, h, n + 1);
            let boundary_weight = domain.measure() - weights.iter().sum::<f64>();
            Grid {
                domain,
                n,
                h: [h, 0.0],
                weights: weights.clone(),
                boundary_weight,
                layout: Layout::Chain(Chain {
                    weights,
                    left: 0.0,
                    inner,
                    right,
                    potential: None,
                }),
            }
        }
    };
    Ok(Arc::new(grid))
}

/// Control volumes and face conductances of the vertex-centered radial grid
/// `r_i = i h`, `i = 0..m`, with the Dirichlet node at `r = m h`.
fn radial_volumes(dim: usize, h: f64, m: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let area = unit_sphere_area(dim);
    let d = dim as i32;
    let ball = |r: f64| area * r.powi(d) / dim as f64;
    let face = |r: f64| area * r.powi(d - 1) / h;
    let weights = (0..m)
        .map(|i| {
            let r = i as f64 * h;
            if i == 0 {
                ball(0.5 * h)
            } else {
                ball(r + 0.5 * h) - ball(r - 0.5 * h)
            }
        })
        .collect();
    let inner = (0..m - 1).map(|i| face((i as f64 + 0.5) * h)).collect();
    let right = face((m as f64 - 0.5) * h);
    (weights, inner, right)
}

impl Grid {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Nodes per axis as requested at construction.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh spacing `(hx, hy)`; `hy = 0` on one-dimensional layouts.
    pub fn h(&self) -> [f64; 2] {
        self.h
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { domain: self.domain, n: self.n }
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Quadrature weight of every unknown.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total quadrature measure, boundary nodes included. Equals `|Ω|`.
    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.boundary_weight
    }

    /// Physical coordinates of node `i`: `(x, y)` on a rectangle, `(x, 0)` on
    /// an interval and `(r, 0)` on a radial grid.
    pub fn coords(&self, i: usize) -> [f64; 2] {
        match self.domain {
            Domain::Interval { .. } => [(i + 1) as f64 * self.h[0], 0.0],
            Domain::Rectangle { .. } => {
                let (ix, iy) = (i / self.n, i % self.n);
                [(ix + 1) as f64 * self.h[0], (iy + 1) as f64 * self.h[1]]
            }
            Domain::RadialBall { .. } => [i as f64 * self.h[0], 0.0],
        }
    }

    /// Euclidean distance between nodes `i` and `j`, measured in the physical
    /// domain (radial grids use the radial coordinate).
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords(i), self.coords(j));
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    /// `(-Δ f)` on raw nodal values.
    pub fn neg_laplacian_values<T: Scalar>(&self, f: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); f.len()];
        match &self.layout {
            Layout::Chain(c) => c.neg_laplacian(f, &mut out),
            Layout::Tensor(t) => t.neg_laplacian(f, &mut out),
        }
        out
    }

    /// `∫|∇f|²` as the quadratic form of the stencil.
    pub fn kinetic_values<T: Scalar>(&self, f: &[T]) -> f64 {
        match &self.layout {
            Layout::Chain(c) => c.kinetic(f),
            Layout::Tensor(t) => t.kinetic(f),
        }
    }

    pub fn mass_values<T: Scalar>(&self, f: &[T]) -> f64 {
        f.iter().zip(&self.weights).map(|(v, w)| w * v.abs_sq()).sum()
    }

    /// `Σ V_i f_i conj(g_i)`.
    pub fn inner_values<T: Scalar>(&self, f: &[T], g: &[T]) -> T {
        let mut s = T::default();
        for ((a, b), &w) in f.iter().zip(g).zip(&self.weights) {
            s += *a * b.conj() * w;
        }
        s
    }

    /// Solves `(a I + b (-Δ)) x = rhs`.
    pub fn solve_shifted<T: Scalar>(&self, a: T, b: T, rhs: &[T]) -> Vec<T> {
        match &self.layout {
            Layout::Chain(c) => c.solve(a, b, None, rhs),
            Layout::Tensor(t) => t.solve_const(a, b, rhs),
        }
    }

    /// Solves `(a I + b (D + (-Δ))) x = rhs` for a nonnegative diagonal `D`,
    /// `a, b > 0`. Direct on one-dimensional layouts; preconditioned conjugate
    /// gradients on rectangles.
    pub fn solve_shifted_diag(&self, a: f64, b: f64, diag: &[f64], rhs: &[f64]) -> Vec<f64> {
        match &self.layout {
            Layout::Chain(c) => c.solve(a, b, Some(diag), rhs),
            Layout::Tensor(t) => {
                let mean = diag.iter().sum::<f64>() / diag.len() as f64;
                if diag.iter().all(|&d| d == mean) {
                    return t.solve_const(a + b * mean, b, rhs);
                }
                self.pcg(a, b, diag, mean, rhs, t)
            }
        }
    }

    fn pcg(&self, a: f64, b: f64, diag: &[f64], mean: f64, rhs: &[f64], t: &Tensor) -> Vec<f64> {
        let apply = |x: &[f64]| -> Vec<f64> {
            let lap = self.neg_laplacian_values(x);
            x.iter()
                .zip(&lap)
                .zip(diag)
                .map(|((xi, li), di)| a * xi + b * (di * xi + li))
                .collect()
        };
        let precond = |r: &[f64]| t.solve_const(a + b * mean, b, r);
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
        let mut x = precond(rhs);
        let ax = apply(&x);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let bnorm = dot(rhs, rhs).sqrt().max(f64::MIN_POSITIVE);
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for _ in 0..500 {
            if dot(&r, &r).sqrt() <= 1e-14 * bnorm {
                break;
            }
            let ap = apply(&p);
            let alpha = rz / dot(&p, &ap);
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            z = precond(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..p.len() {
                p[i] = z[i] + beta * p[i];
            }
        }
        x
    }
}

/// Samples of a real or complex function at the unknowns of a grid. Values at
/// the Dirichlet boundary are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T = f64> {
    grid: Arc<Grid>,
    values: Vec<T>,
}

pub type ComplexField = Field<Complex64>;

pub(crate) fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if std::ptr::eq(a, b) || (a.domain == b.domain && a.n == b.n) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

impl<T: Scalar> Field<T> {
    pub fn new(grid: Arc<Grid>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![T::default(); grid.len()];
        Field { grid, values }
    }

    /// Samples `f` at every node coordinate.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let values = self.values.iter().map(|&v| v * s).collect();
        Field { grid: self.grid.clone(), values }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    pub(crate) fn check_same_grid(&self, other: &Field<T>) -> Result<()> {
        same_grid(&self.grid, &other.grid)
    }
}

impl Field<f64> {
    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

/// `Δf` with homogeneous Dirichlet closure.
pub fn laplacian_apply<T: Scalar>(grid: &Grid, f: &Field<T>) -> Result<Field<T>> {
    same_grid(grid, &f.grid)?;
    let values = grid.neg_laplacian_values(&f.values).into_iter().map(|v| -v).collect();
    Ok(Field { grid: f.grid.clone(), values })
}

pub fn inner_l2<T: Scalar>(grid: &Grid, f: &Field<T>, g: &Field<T>) -> Result<T> {
    same_grid(grid, &f.grid)?;
    same_grid(grid, &g.grid)?;
    Ok(grid.inner_values(&f.values, &g.values))
}

/// `∫|f|²`.
pub fn mass<T: Scalar>(grid: &Grid, f: &Field<T>) -> Result<f64> {
    same_grid(grid, &f.grid)?;
    Ok(grid.mass_values(&f.values))
}

/// `∫|∇f|²`, equal to `⟨-Δf, f⟩`.
pub fn kinetic<T: Scalar>(grid: &Grid, f: &Field<T>) -> Result<f64> {
    same_grid(grid, &f.grid)?;
    Ok(grid.kinetic_values(&f.values))
}

/// An L²-normalized Dirichlet eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub phi: Field<f64>,
}

const EIG_TOL: f64 = 1e-12;
const EIG_RESIDUAL_TOL: f64 = 1e-10;
const EIG_MAX_ITER: usize = 20_000;

/// Deterministic start vector: a positive ramp over the node index, so that
/// it overlaps every eigenvector generically (a symmetric start would miss
/// the antisymmetric modes).
fn start_vector(m: usize) -> Vec<f64> {
    (0..m).map(|i| 1.0 + 0.5 * i as f64 / m as f64).collect()
}

/// Inverse iteration with weighted Gram-Schmidt deflation for the `k` lowest
/// eigenpairs of a self-adjoint positive operator given through its inverse.
fn inverse_iteration(
    weights: &[f64],
    k: usize,
    inverse: impl Fn(&[f64]) -> Vec<f64>,
    apply: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let dot = |u: &[f64], v: &[f64]| -> f64 {
        u.iter().zip(v).zip(weights).map(|((a, b), w)| a * b * w).sum()
    };
    let mut found: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut x = start_vector(weights.len());
        let mut lambda_prev = f64::INFINITY;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..EIG_MAX_ITER {
            for (_, v) in &found {
                let c = dot(&x, v);
                x.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
            let nrm = dot(&x, &x).sqrt();
            x.iter_mut().for_each(|a| *a /= nrm);
            let ax = apply(&x);
            let lambda = dot(&ax, &x);
            residual = ax
                .iter()
                .zip(&x)
                .zip(weights)
                .map(|((a, b), w)| w * (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt()
                / lambda.abs();
            if (lambda - lambda_prev).abs() <= EIG_TOL * lambda.abs()
                && residual <= EIG_RESIDUAL_TOL
            {
                found.push((lambda, x.clone()));
                converged = true;
                break;
            }
            lambda_prev = lambda;
            x = inverse(&x);
        }
        if !converged {
            return Err(Error::NoConvergence { iterations: EIG_MAX_ITER, residual });
        }
    }
    Ok(found)
}

/// The `k` lowest eigenpairs of the discrete Dirichlet Laplacian, increasing,
/// L²-normalized, with `φ₁ > 0` and `φ₂` oriented so that its positive part
/// carries the larger mass.
///
/// On a radial grid these are the radially symmetric eigenpairs only; see
/// [`domain_eigenvalues`] for the true `λ₂` of the ball.
pub fn principal_eigenpairs(grid: &Arc<Grid>, k: usize) -> Result<Vec<EigenPair>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let inverse = |x: &[f64]| grid.solve_shifted(0.0, 1.0, x);
    let apply = |x: &[f64]| grid.neg_laplacian_values(x);
    let raw = inverse_iteration(grid.weights(), k, inverse, apply)?;
    let mut out = Vec::with_capacity(k);
    for (idx, (lambda, mut v)) in raw.into_iter().enumerate() {
        orient(grid.weights(), &mut v, idx == 0);
        out.push(EigenPair { lambda, phi: Field { grid: grid.clone(), values: v } });
    }
    Ok(out)
}

fn orient(weights: &[f64], v: &mut [f64], principal: bool) {
    let flip = if principal {
        v.iter().sum::<f64>() < 0.0
    } else {
        let (mut pos, mut neg) = (0.0, 0.0);
        for (x, w) in v.iter().zip(weights) {
            if *x > 0.0 {
                pos += w * x * x;
            } else {
                neg += w * x * x;
            }
        }
        if (pos - neg).abs() <= 1e-10 * (pos + neg) {
            v.iter().find(|x| x.abs() > 1e-14).is_some_and(|x| *x < 0.0)
        } else {
            neg > pos
        }
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// First Dirichlet eigenvalue of the `ℓ = 1` angular sector of the ball,
/// discretized on the same radial nodes (origin pinned to zero).
fn ball_first_odd_eigenvalue(grid: &Grid) -> Result<f64> {
    let Domain::RadialBall { dim, .. } = grid.domain else {
        return Err(Error::InvalidGrid("not a radial grid".into()));
    };
    let Layout::Chain(c) = &grid.layout else { unreachable!() };
    let h = grid.h[0];
    let m = c.weights.len() - 1;
    let area = unit_sphere_area(dim);
    let chain = Chain {
        weights: c.weights[1..].to_vec(),
        left: area * (0.5 * h).powi(dim as i32 - 1) / h,
        inner: c.inner[1..].to_vec(),
        right: c.right,
        potential: Some(
            (1..=m).map(|i| (dim as f64 - 1.0) / (i as f64 * h).powi(2)).collect(),
        ),
    };
    let inverse = |x: &[f64]| chain.solve(0.0, 1.0, None, x);
    let apply = |x: &[f64]| {
        let mut out = vec![0.0; x.len()];
        chain.neg_laplacian(x, &mut out);
        out
    };
    Ok(inverse_iteration(&chain.weights, 1, inverse, apply)?[0].0)
}

/// `(λ₁(Ω), λ₂(Ω))` of the discrete Dirichlet Laplacian. On radial grids `λ₂`
/// is the smaller of the second radial eigenvalue and the first `ℓ = 1`
/// eigenvalue.
pub fn domain_eigenvalues(grid: &Arc<Grid>) -> Result<(f64, f64)> {
    let pairs = principal_eigenpairs(grid, 2)?;
    let (l1, mut l2) = (pairs[0].lambda, pairs[1].lambda);
    if matches!(grid.domain, Domain::RadialBall { .. }) {
        l2 = l2.min(ball_first_odd_eigenvalue(grid)?);
    }
    Ok((l1, l2))
}

/// Writes a field as CSV: commented header rows (domain descriptor, `n`, `h`)
/// followed by one value per line (`re,im` for complex fields).
pub fn field_to_csv<T: CsvScalar>(field: &Field<T>) -> String {
    let g = &field.grid;
    let mut s = String::new();
    s.push_str(&format!("# domain={}\n", g.domain.descriptor()));
    s.push_str(&format!("# n={}\n", g.n));
    s.push_str(&format!("# h={},{}\n", g.h[0], g.h[1]));
    s.push_str(T::HEADER);
    s.push('\n');
    for v in &field.values {
        v.write_csv(&mut s);
        s.push('\n');
    }
    s
}

/// Parses the format written by [`field_to_csv`], rebuilding the grid.
pub fn field_from_csv<T: CsvScalar>(text: &str) -> Result<Field<T>> {
    let mut domain = None;
    let mut n = None;
    let mut values = Vec::new();
    let mut seen_header = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header row `{line}`")))?;
            match k.trim() {
                "domain" => domain = Some(Domain::from_descriptor(v)?),
                "n" => {
                    n = Some(v.trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?)
                }
                _ => {}
            }
            continue;
        }
        if !seen_header {
            if line != T::HEADER {
                return Err(Error::Parse(format!("expected column header `{}`", T::HEADER)));
            }
            seen_header = true;
            continue;
        }
        values.push(T::parse_csv(line)?);
    }
    let domain = domain.ok_or_else(|| Error::Parse("missing domain header".into()))?;
    let n = n.ok_or_else(|| Error::Parse("missing n header".into()))?;
    Field::new(build_grid(domain, n)?, values)
}

/// Scalars with a CSV representation.
pub trait CsvScalar: Scalar {
    const HEADER: &'static str;
    fn write_csv(&self, out: &mut String);
    fn parse_csv(s: &str) -> Result<Self>;
}

impl CsvScalar for f64 {
    const HEADER: &'static str = "value";
    fn write_csv(&self, out: &mut String) {
        out.push_str(&format!("{self:?}"));
    }
    fn parse_csv(s: &str) -> Result<Self> {
        s.trim().parse().map_err(|e| Error::Parse(format!("`{s}`: {e}")))
    }
}

impl CsvScalar for Complex64 {
    const HEADER: &'static str = "re,im";
    fn write_csv(&self, out: &mut String) {
        out.push_str(&format!("{:?},{:?}", self.re, self.im));
    }
    fn parse_csv(s: &str) -> Result<Self> {
        let (a, b) = s.split_once(',').ok_or_else(|| Error::Parse(format!("`{s}`")))?;
        Ok(Complex64::new(f64::parse_csv(a)?, f64::parse_csv(b)?))
    }
}
