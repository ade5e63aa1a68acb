//! Renormalized AHPL maps in rescaled coordinates: domain pairs, escape fields,
//! periodic points, orbit expansion, inverse branches and curve pullbacks.
//!
//! At level `n` the map is `G(z) = λ⁻¹ F^q(λ z)` with `F` the extension of the base map,
//! `q = q_n`, `λ = λ_n`, and `V = D(0, c_V)`, which is `D(0, c_V|λ_n|)` before rescaling.

use alloc::vec::Vec;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::extension::{AHExtension, JetSource, PlanarMap, Polynomial};
use crate::hyperbolic::HyperbolicDomain;
use crate::matcalc::{det2, iterate_jet2, mat2_mul, Jet2, Mat2};
use crate::scalar::{DoubleDouble, Scalar};
use crate::unimodal::RenormalizationTower;

/// Values beyond this modulus are treated as escaped during iteration.
const BLOWUP: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainOptions {
    pub c_v: f64,
    /// Points on `∂V` per lap of the boundary trace.
    pub trace_points: usize,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Required `dist(U, ∂V)` relative to `c_V`.
    pub gap: f64,
}

impl Default for DomainOptions {
    fn default() -> Self {
        Self { c_v: 2.0, trace_points: 4096, newton_tol: 1e-12, max_newton: 50, gap: 1e-3 }
    }
}

/// Level-`n` AHPL map with its traced domain `U`.
#[derive(Debug, Clone)]
pub struct AHPLMap<B> {
    pub ext: AHExtension<B>,
    /// Exact polynomial form of `F` when the truncation reproduces it.
    pub poly: Option<Polynomial>,
    pub level: usize,
    pub q: u64,
    pub lambda: f64,
    pub c_v: f64,
    pub degree: u32,
    /// `G(0)`.
    pub critical_value: C64,
    /// Leading coefficient of `G(x) − G(0) ≈ g x^d` along ℝ.
    pub critical_coefficient: f64,
    pub u_curve: Vec<C64>,
    pub winding: i64,
    /// Inscribed and circumscribed round-annulus bounds on `mod(V ∖ U)`.
    pub modulus_bounds: (f64, f64),
    pub symmetry_residual: f64,
}

impl<B> AHPLMap<B> {
    pub fn modulus_estimate(&self) -> f64 {
        self.modulus_bounds.0
    }

    pub fn v_domain(&self) -> HyperbolicDomain {
        HyperbolicDomain::Disk { center: C64::new(0.0, 0.0), radius: self.c_v }
    }

    pub fn y_domain(&self) -> HyperbolicDomain {
        HyperbolicDomain::SlitDisk { center: 0.0, radius: self.c_v }
    }

    pub fn in_v(&self, z: C64) -> bool {
        z.norm() < self.c_v
    }

    pub fn in_u(&self, z: C64) -> bool {
        self.in_v(z) && winding_number(&self.u_curve, z) != 0
    }
}

fn conformal(c: C64) -> Mat2 {
    [[c.re, -c.im], [c.im, c.re]]
}

fn solve2(m: &Mat2, r: C64) -> Option<C64> {
    let det = det2(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some(C64::new((m[1][1] * r.re - m[0][1] * r.im) / det, (m[0][0] * r.im - m[1][0] * r.re) / det))
}

/// Winding number of a closed polyline around `p`.
pub fn winding_number(curve: &[C64], p: C64) -> i64 {
    let mut total = 0.0;
    let n = curve.len();
    for i in 0..n {
        let a = curve[i] - p;
        let b = curve[(i + 1) % n] - p;
        total += (b / a).arg();
    }
    libm::round(total / core::f64::consts::TAU) as i64
}

/// Winding number of a sequence of values around 0, following the closed loop.
fn value_winding(vals: &[C64]) -> i64 {
    winding_number(vals, C64::new(0.0, 0.0))
}

pub fn euclidean_diameter(pts: &[C64]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max((pts[i] - pts[j]).norm());
        }
    }
    d
}

/// Diameter via the bounding set of extreme points, `O(n)` candidates then exact.
pub fn fast_diameter(pts: &[C64]) -> f64 {
    if pts.len() <= 256 {
        return euclidean_diameter(pts);
    }
    // extreme points along 64 directions bound the diameter from below, exactly at the hull
    let mut ext = Vec::with_capacity(128);
    for k in 0..64 {
        let t = core::f64::consts::PI * k as f64 / 64.0;
        let dir = C64::new(libm::cos(t), libm::sin(t));
        let key = |z: &C64| z.re * dir.re + z.im * dir.im;
        let mut lo = pts[0];
        let mut hi = pts[0];
        for z in pts {
            if key(z) < key(&lo) {
                lo = *z;
            }
            if key(z) > key(&hi) {
                hi = *z;
            }
        }
        ext.push(lo);
        ext.push(hi);
    }
    euclidean_diameter(&ext)
}

/// Resamples a closed polyline to `n` points by arc length.
pub fn resample_closed(curve: &[C64], n: usize) -> Vec<C64> {
    let m = curve.len();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    for i in 0..m {
        let l = (curve[(i + 1) % m] - curve[i]).norm();
        cum.push(cum[i] + l);
    }
    let total = cum[m];
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let s = total * k as f64 / n as f64;
        while seg + 1 < m && cum[seg + 1] <= s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        out.push(curve[seg] + (curve[(seg + 1) % m] - curve[seg]) * t);
    }
    out
}

impl<B: JetSource> AHPLMap<B> {
    /// `G(z)`; escaped orbits return a value of modulus `∞`.
    pub fn map(&self, z: C64) -> C64 {
        let mut w = z * self.lambda;
        match &self.poly {
            Some(p) => {
                for _ in 0..self.q {
                    w = p.eval_complex(w);
                    if !(w.norm_sqr() < BLOWUP) {
                        return C64::new(f64::INFINITY, 0.0);
                    }
                }
            }
            None => {
                for _ in 0..self.q {
                    w = match self.ext.eval(w) {
                        Ok(v) => v,
                        Err(_) => return C64::new(f64::INFINITY, 0.0),
                    };
                    if !(w.norm_sqr() < BLOWUP) {
                        return C64::new(f64::INFINITY, 0.0);
                    }
                }
            }
        }
        w / self.lambda
    }

    /// `G(z)` and its real Jacobian.
    pub fn map_jet1(&self, z: C64) -> Result<(C64, Mat2)> {
        let mut w = z * self.lambda;
        match &self.poly {
            Some(p) => {
                let mut d = C64::new(1.0, 0.0);
                for step in 0..self.q {
                    d *= p.derivative_complex(w);
                    w = p.eval_complex(w);
                    if !(w.norm_sqr() < BLOWUP) || !(d.norm_sqr() < BLOWUP) {
                        return Err(Error::OrbitEscaped { step: step as usize });
                    }
                }
                Ok((w / self.lambda, conformal(d)))
            }
            None => {
                let mut d = [[1.0, 0.0], [0.0, 1.0]];
                for step in 0..self.q {
                    let (v, j) = self.ext.jet1(w)?;
                    d = mat2_mul(&j, &d);
                    w = v;
                    if !(w.norm_sqr() < BLOWUP) {
                        return Err(Error::OrbitEscaped { step: step as usize });
                    }
                }
                Ok((w / self.lambda, d))
            }
        }
    }

    /// Second-order jet of `G` by the iterate formula.
    pub fn map_jet2(&self, z: C64) -> Result<Jet2> {
        let provider = |p: [f64; 2]| -> Result<Jet2> {
            match &self.poly {
                Some(poly) => poly.jet2(C64::new(p[0], p[1])),
                None => self.ext.jet2(C64::new(p[0], p[1])),
            }
        };
        let lam = self.lambda;
        let j = iterate_jet2(&provider, [z.re * lam, z.im * lam], self.q as usize)?;
        let mut d2 = j.d2;
        d2.iter_mut().flatten().for_each(|v| *v *= lam);
        Ok(Jet2 { value: [j.value[0] / lam, j.value[1] / lam], d: j.d, d2 })
    }

    /// `G^k(z)` and `D(G^k)(z)`.
    pub fn iterate_jet1(&self, z: C64, k: usize) -> Result<(C64, Mat2)> {
        let mut w = z;
        let mut d = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..k {
            let (v, j) = self.map_jet1(w)?;
            d = mat2_mul(&j, &d);
            w = v;
        }
        Ok((w, d))
    }

    /// Newton solve of `G(z) = target` from `z0`. Stops at the step tolerance or, once the
    /// residual is below `1e-9·c_V`, when steps stop contracting at the rounding floor.
    pub fn solve_preimage_from(&self, target: C64, z0: C64) -> Result<C64> {
        let mut z = z0;
        let tol = self.c_v * 1e-14;
        let mut last = f64::INFINITY;
        for it in 0..60 {
            let (w, d) = self.map_jet1(z)?;
            let res = (w - target).norm();
            let step = solve2(&d, w - target).ok_or(Error::NoConvergence { iterations: it })?;
            let s = step.norm();
            if s <= tol || (s > 0.5 * last && res < 1e-9 * self.c_v) {
                return Ok(z);
            }
            z -= step;
            last = s;
            if !(z.norm() < 4.0 * self.c_v) {
                return Err(Error::NoConvergence { iterations: it });
            }
        }
        Err(Error::NoConvergence { iterations: 60 })
    }

    /// Preimage of `w ∈ V` in `U` on branch `branch mod d`, by homotopy from the critical value.
    pub fn preimage(&self, w: C64, branch: usize) -> Result<C64> {
        let c1 = self.critical_value;
        if (w - c1).norm() == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let d = self.degree as f64;
        let t0 = 1e-6f64;
        let root = |t: f64| {
            let dw = (w - c1) * t / self.critical_coefficient;
            let r = dw.powf(1.0 / d);
            r * C64::from_polar(1.0, core::f64::consts::TAU * branch as f64 / d)
        };
        let mut z = root(t0);
        let steps = 48;
        for k in 0..=steps {
            let t = t0 * libm::pow(1.0 / t0, k as f64 / steps as f64);
            let target = c1 + (w - c1) * t;
            z = self.solve_preimage_from(target, z)?;
        }
        Ok(z)
    }

    /// Continuation from `z0 ∈ G⁻¹(a)` to a preimage of `b`, subdividing when Newton struggles.
    fn continue_preimage(&self, z0: C64, a: C64, b: C64, depth: u32) -> Result<C64> {
        let (_, d) = self.map_jet1(z0)?;
        if let Some(pred) = solve2(&d, b - a) {
            let guess = z0 + pred;
            if let Ok(z) = self.solve_preimage_from(b, guess) {
                if (z - guess).norm() <= 0.25 * pred.norm() + 1e-12 * self.c_v {
                    return Ok(z);
                }
            }
        }
        if depth == 0 {
            return Err(Error::BranchAmbiguity);
        }
        let mid = (a + b) * 0.5;
        let zm = self.continue_preimage(z0, a, mid, depth - 1)?;
        self.continue_preimage(zm, mid, b, depth - 1)
    }

    /// Traces a preimage of a closed curve starting at `z0 ∈ G⁻¹(curve[0])`, for `laps` laps.
    fn trace_preimage(&self, curve: &[C64], z0: C64, laps: usize) -> Result<Vec<C64>> {
        let n = curve.len();
        let mut out = Vec::with_capacity(n * laps);
        let mut z = z0;
        for k in 0..n * laps {
            out.push(z);
            let a = curve[k % n];
            let b = curve[(k + 1) % n];
            z = self.continue_preimage(z, a, b, 16).map_err(|_| Error::TraceStalled { step: k })?;
            if !self.in_v(z) {
                return Err(Error::PullbackEscaped { step: k });
            }
        }
        if (z - z0).norm() > 1e-6 * self.c_v {
            return Err(Error::BranchAmbiguity);
        }
        Ok(out)
    }

    /// Component of `G⁻¹(curve)` around `base`; a curve around the critical value lifts to one
    /// curve traversed `d` times.
    pub fn pullback_curve(&self, curve: &[C64], base: C64) -> Result<Vec<C64>> {
        let laps = self.degree as usize;
        if winding_number(curve, self.critical_value) != 0 {
            let z0 = self.preimage(curve[0], 0)?;
            return self.trace_preimage(curve, z0, laps);
        }
        for branch in 0..laps {
            let z0 = self.preimage(curve[0], branch)?;
            let c = self.trace_preimage(curve, z0, 1)?;
            if winding_number(&c, base) != 0 {
                return Ok(c);
            }
        }
        Err(Error::BranchAmbiguity)
    }

    /// Exit time: number of iterates that stay in `V`, capped at `max_iter`.
    pub fn escape_time(&self, z: C64, max_iter: u32) -> u32 {
        if !self.in_v(z) {
            return 0;
        }
        let mut w = z;
        for j in 0..max_iter {
            w = self.map(w);
            if !self.in_v(w) {
                return j;
            }
        }
        max_iter
    }
}

/// Complex double-double.
#[derive(Debug, Clone, Copy)]
struct CDD {
    re: DoubleDouble,
    im: DoubleDouble,
}

impl CDD {
    fn from(z: C64) -> Self {
        Self { re: DoubleDouble::from_f64(z.re), im: DoubleDouble::from_f64(z.im) }
    }

    fn to_c64(self) -> C64 {
        C64::new(self.re.to_f64(), self.im.to_f64())
    }

    fn mul(self, o: Self) -> Self {
        Self { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }

    fn scale(self, s: DoubleDouble) -> Self {
        Self { re: self.re * s, im: self.im * s }
    }
}

impl core::ops::Sub for CDD {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { re: self.re - o.re, im: self.im - o.im }
    }
}

/// `G(z)` on the polynomial path in double-double.
fn map_dd(p: &Polynomial, q: u64, lambda: f64, z: CDD) -> CDD {
    let lam = DoubleDouble::from_f64(lambda);
    let mut w = z.scale(lam);
    for _ in 0..q {
        let mut acc = CDD::from(C64::new(*p.coeffs.last().unwrap_or(&0.0), 0.0));
        for c in p.coeffs.iter().rev().skip(1) {
            acc = acc.mul(w);
            acc.re = acc.re + DoubleDouble::from_f64(*c);
        }
        w = acc;
    }
    let inv = DoubleDouble::one() / lam;
    w.scale(inv)
}

/// Rescaled map data needed before domains exist.
fn bare_map<B: JetSource + Clone>(ext: &AHExtension<B>, poly: Option<Polynomial>, level: usize, q: u64, lambda: f64, c_v: f64, degree: u32) -> AHPLMap<B> {
    AHPLMap {
        ext: ext.clone(),
        poly,
        level,
        q,
        lambda,
        c_v,
        degree,
        critical_value: C64::new(0.0, 0.0),
        critical_coefficient: 1.0,
        u_curve: Vec::new(),
        winding: 0,
        modulus_bounds: (0.0, 0.0),
        symmetry_residual: 0.0,
    }
}

/// Builds `U_n ⋐ V_n` at level `n` of the tower by pulling back `∂V_n`.
pub fn build_domains<B: JetSource + Clone>(
    ext: &AHExtension<B>,
    exact: Option<Polynomial>,
    tower: &RenormalizationTower,
    n: usize,
    degree: u32,
    opts: &DomainOptions,
) -> Result<AHPLMap<B>> {
    if !(opts.c_v > 1.0) {
        return Err(Error::InvalidArgument("c_V must exceed 1"));
    }
    let lvl = tower.level(n)?;
    let poly = exact.filter(|p| p.degree() <= ext.m);
    let mut g = bare_map(ext, poly, n, lvl.q, lvl.lambda, opts.c_v, degree);
    g.critical_value = g.map(C64::new(0.0, 0.0));
    let h = 1e-3;
    g.critical_coefficient = (g.map(C64::new(h, 0.0)).re - g.critical_value.re) / Scalar::powi(h, degree);
    if !g.in_v(g.critical_value) || g.critical_coefficient == 0.0 {
        return Err(Error::DomainsTouch { margin: opts.c_v - g.critical_value.norm() });
    }

    // Positive real preimage of −c_V: first crossing of G(x) = −c_V walking outward from 0.
    let target = C64::new(-opts.c_v, 0.0);
    let gx = |x: f64| g.map(C64::new(x, 0.0)).re;
    let dx = 1e-3 * opts.c_v;
    let mut x = 0.0;
    let xmax = 4.0 * opts.c_v;
    while gx(x + dx) > -opts.c_v {
        x += dx;
        if x > xmax {
            return Err(Error::PullbackEscaped { step: 0 });
        }
    }
    let (mut lo, mut hi) = (x, x + dx);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gx(mid) > -opts.c_v {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    let x0 = g.solve_preimage_from(target, C64::new(0.5 * (lo + hi), 0.0)).unwrap_or(C64::new(0.5 * (lo + hi), 0.0));
    let margin = opts.c_v - x0.norm();
    if margin <= opts.gap * opts.c_v {
        return Err(Error::DomainsTouch { margin });
    }

    let circle: Vec<C64> = (0..opts.trace_points)
        .map(|k| -C64::from_polar(opts.c_v, core::f64::consts::TAU * k as f64 / opts.trace_points as f64))
        .collect();
    let curve = g.trace_preimage(&circle, x0, degree as usize)?;

    let mut rmin = f64::INFINITY;
    let mut rmax = 0.0f64;
    for z in &curve {
        rmin = rmin.min(z.norm());
        rmax = rmax.max(z.norm());
    }
    let margin = opts.c_v - rmax;
    if margin <= opts.gap * opts.c_v {
        return Err(Error::DomainsTouch { margin });
    }
    let values: Vec<C64> = curve.iter().map(|&z| g.map(z)).collect();
    let winding = value_winding(&values);
    if winding != degree as i64 {
        return Err(Error::WindingMismatch { expected: degree as i64, found: winding });
    }
    let m = curve.len();
    let symmetry = (1..m).map(|k| (curve[k] - curve[m - k].conj()).norm()).fold(0.0, f64::max);
    g.u_curve = curve;
    g.winding = winding;
    g.modulus_bounds = (libm::log(opts.c_v / rmax), libm::log(opts.c_v / rmin));
    g.symmetry_residual = symmetry;
    Ok(g)
}

/// Rectangular pixel grid, symmetric about its center row when `center.im == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub center: C64,
    pub half_width: f64,
    pub half_height: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn covering(c_v: f64, nx: usize, ny: usize) -> Self {
        Self { center: C64::new(0.0, 0.0), half_width: c_v, half_height: c_v, nx, ny }
    }

    /// Pixel center of column `i`, row `j`; row 0 is the top.
    pub fn point(&self, i: usize, j: usize) -> C64 {
        let fx = if self.nx > 1 { (2 * i) as f64 - (self.nx - 1) as f64 } else { 0.0 };
        let fy = if self.ny > 1 { (self.ny - 1) as f64 - (2 * j) as f64 } else { 0.0 };
        let sx = if self.nx > 1 { self.half_width / (self.nx - 1) as f64 } else { 0.0 };
        let sy = if self.ny > 1 { self.half_height / (self.ny - 1) as f64 } else { 0.0 };
        C64::new(self.center.re + fx * sx, self.center.im + fy * sy)
    }
}

/// Escape-time field, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeField {
    pub grid: Grid,
    pub max_iter: u32,
    pub times: Vec<u32>,
}

impl EscapeField {
    pub fn at(&self, i: usize, j: usize) -> u32 {
        self.times[j * self.grid.nx + i]
    }

    pub fn non_escaping_fraction(&self) -> f64 {
        self.times.iter().filter(|&&t| t == self.max_iter).count() as f64 / self.times.len() as f64
    }

    /// Fraction of pixels whose full 3×3 neighborhood never escapes.
    pub fn interior_fraction(&self) -> f64 {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        if nx < 3 || ny < 3 {
            return 0.0;
        }
        let mut count = 0usize;
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let all = (j - 1..=j + 1).all(|jj| (i - 1..=i + 1).all(|ii| self.at(ii, jj) == self.max_iter));
                if all {
                    count += 1;
                }
            }
        }
        count as f64 / (nx * ny) as f64
    }
}

/// Escape field computed row by row.
pub fn filled_julia<B: JetSource>(g: &AHPLMap<B>, grid: Grid, max_iter: u32) -> EscapeField {
    let mut times = Vec::with_capacity(grid.nx * grid.ny);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            times.push(g.escape_time(grid.point(i, j), max_iter));
        }
    }
    EscapeField { grid, max_iter, times }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Expanding,
    NonExpanding,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicPoint {
    pub z: C64,
    pub period: u32,
    pub derivative: Mat2,
    /// Eigenvalue moduli, ascending.
    pub eigen_moduli: (f64, f64),
    pub classification: Classification,
    /// Real multiplier when the point lies on ℝ.
    pub real_multiplier: Option<f64>,
    pub residual: f64,
}

pub const TOL_EIG: f64 = 1e-9;

/// Eigenvalue moduli of a real 2×2 matrix, ascending.
pub fn eigen_moduli(a: &Mat2) -> (f64, f64) {
    let tr = a[0][0] + a[1][1];
    let det = det2(a);
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = libm::sqrt(disc);
        // stable pair of real roots
        let r1 = -0.5 * (tr + if tr >= 0.0 { s } else { -s });
        let (e1, e2) = if r1 != 0.0 { (r1, det / r1) } else { (0.5 * (tr + s), 0.5 * (tr - s)) };
        let (a1, a2) = (e1.abs(), e2.abs());
        if a1 <= a2 {
            (a1, a2)
        } else {
            (a2, a1)
        }
    } else {
        let m = libm::sqrt(det);
        (m, m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicReport {
    pub points: Vec<PeriodicPoint>,
    pub seeds: usize,
    pub failures: usize,
}

impl<B: JetSource> AHPLMap<B> {
    /// Newton on `G^p(z) − z` from one seed, with the same stall rule as the preimage solver.
    pub fn newton_periodic(&self, p: u32, seed: C64) -> Result<C64> {
        let mut z = seed;
        let tol = 1e-14 * self.c_v;
        let mut last = f64::INFINITY;
        for it in 0..50 {
            let (w, d) = self.iterate_jet1(z, p as usize)?;
            let m = [[d[0][0] - 1.0, d[0][1]], [d[1][0], d[1][1] - 1.0]];
            let step = solve2(&m, w - z).ok_or(Error::NoConvergence { iterations: it })?;
            let s = step.norm();
            if s <= tol || (s > 0.5 * last && (w - z).norm() < 1e-7 * self.c_v) {
                return Ok(z);
            }
            z -= step;
            last = s;
            if !self.in_v(z) {
                return Err(Error::NoConvergence { iterations: it });
            }
        }
        Err(Error::NoConvergence { iterations: 50 })
    }

    /// `G^k(z) − z` in double-double on the polynomial path, binary64 otherwise.
    pub fn periodic_residual(&self, z: C64, k: u32) -> Result<C64> {
        match &self.poly {
            Some(p) => {
                let mut w = CDD::from(z);
                for _ in 0..k {
                    w = map_dd(p, self.q, self.lambda, w);
                }
                Ok((w - CDD::from(z)).to_c64())
            }
            None => Ok(self.iterate_jet1(z, k as usize)?.0 - z),
        }
    }

    /// Newton refinement with double-double residuals; the identity on the generic path.
    pub fn polish_periodic(&self, z: C64, k: u32) -> Result<C64> {
        let Some(p) = &self.poly else {
            return Ok(z);
        };
        let (_, d) = self.iterate_jet1(z, k as usize)?;
        let m = [[d[0][0] - 1.0, d[0][1]], [d[1][0], d[1][1] - 1.0]];
        let mut x = CDD::from(z);
        for _ in 0..4 {
            let mut w = x;
            for _ in 0..k {
                w = map_dd(p, self.q, self.lambda, w);
            }
            let r = (w - x).to_c64();
            let step = solve2(&m, r).ok_or(Error::NoConvergence { iterations: 0 })?;
            x = x - CDD::from(step);
        }
        Ok(x.to_c64())
    }

    /// Classifies a converged point, reducing to its minimal period.
    pub fn periodic_point(&self, z: C64, p: u32) -> Result<PeriodicPoint> {
        let scale = self.c_v;
        let z = self.polish_periodic(z, p)?;
        let mut period = p;
        for k in 1..=p {
            if p % k == 0 {
                if self.periodic_residual(z, k)?.norm() < 1e-9 * scale {
                    period = k;
                    break;
                }
            }
        }
        let (_, d) = self.iterate_jet1(z, period as usize)?;
        let residual = self.periodic_residual(z, period)?.norm();
        let eig = eigen_moduli(&d);
        let classification = if eig.0 > 1.0 + TOL_EIG { Classification::Expanding } else { Classification::NonExpanding };
        let real = z.im.abs() <= 1e-12 * scale;
        Ok(PeriodicPoint {
            z,
            period,
            derivative: d,
            eigen_moduli: eig,
            classification,
            real_multiplier: if real { Some(d[0][0]) } else { None },
            residual,
        })
    }

    /// Periodic points in `U` of period dividing `p` from the given seeds, deduplicated in seed order.
    pub fn find_periodic(&self, p: u32, seeds: &[C64]) -> Result<PeriodicReport> {
        if p == 0 {
            return Err(Error::InvalidArgument("period must be positive"));
        }
        let found: Vec<Option<C64>> = seeds.iter().map(|&s| self.newton_periodic(p, s).ok()).collect();
        self.collect_periodic(p, seeds.len(), &found)
    }

    /// Seeds from cycles of inverse branches, one per word in `{0, …, d−1}^p`.
    pub fn branch_seeds(&self, p: u32, cycles: usize) -> Vec<C64> {
        let d = self.degree as usize;
        let words = d.pow(p);
        let mut out = Vec::with_capacity(words);
        'word: for word in 0..words {
            let mut z = C64::new(0.1, 0.1);
            for _ in 0..cycles {
                let mut w = word;
                for _ in 0..p {
                    z = match self.preimage(z, w % d) {
                        Ok(v) => v,
                        Err(_) => continue 'word,
                    };
                    w /= d;
                }
            }
            out.push(z);
        }
        out
    }

    fn orbit_in_u(&self, z: C64, period: u32) -> bool {
        let mut w = z;
        for _ in 0..period {
            if !self.in_u(w) {
                return false;
            }
            w = self.map(w);
        }
        true
    }

    /// Deduplicates Newton results (in seed order) and classifies them.
    pub fn collect_periodic(&self, p: u32, seeds: usize, found: &[Option<C64>]) -> Result<PeriodicReport> {
        let mut pts: Vec<PeriodicPoint> = Vec::new();
        let mut failures = 0;
        for z in found {
            let Some(z) = *z else {
                failures += 1;
                continue;
            };
            if pts.iter().any(|q| (q.z - z).norm() < 1e-8 * self.c_v) {
                continue;
            }
            match self.periodic_point(z, p) {
                Ok(pp) if pp.residual < 1e-10 * self.c_v && self.orbit_in_u(z, pp.period) => pts.push(pp),
                _ => failures += 1,
            }
        }
        Ok(PeriodicReport { points: pts, seeds, failures })
    }
}

/// `n×n` grid seeds over the square circumscribing `V`, plus extra real seeds.
pub fn grid_seeds(c_v: f64, n: usize, real: &[f64]) -> Vec<C64> {
    let mut s = Vec::with_capacity(n * n + real.len());
    for j in 0..n {
        for i in 0..n {
            let x = -c_v + 2.0 * c_v * (i as f64 + 0.5) / n as f64;
            let y = -c_v + 2.0 * c_v * (j as f64 + 0.5) / n as f64;
            if x * x + y * y < c_v * c_v {
                s.push(C64::new(x, y));
            }
        }
    }
    s.extend(real.iter().filter(|x| x.abs() < c_v).map(|&x| C64::new(x, 0.0)));
    s
}

/// Endpoints of the tower intervals of levels `n..=n+extra`, rescaled by `λ_n` and inside `V`.
pub fn real_seeds(tower: &RenormalizationTower, n: usize, extra: usize, c_v: f64) -> Result<Vec<f64>> {
    let lam = tower.level(n)?.lambda;
    let mut out = Vec::new();
    for m in n..=(n + extra).min(tower.depth()) {
        for iv in &tower.level(m)?.intervals {
            for x in [iv.0 / lam, iv.1 / lam] {
                if x.abs() < c_v && !out.iter().any(|y: &f64| (y - x).abs() < 1e-12) {
                    out.push(x);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    /// `r_k` for `k = 1..=steps`.
    pub ratios: Vec<f64>,
    pub eta_hat: f64,
    /// Least-squares slope of `log r_k` over the last third.
    pub tail_slope: f64,
    pub tail_increasing: bool,
}

impl<B: JetSource> AHPLMap<B> {
    /// `r_k = |DG^k(z)v|_Y / |v|_Y` with `Y = V ∖ ℝ`.
    pub fn orbit_expansion(&self, z: C64, v: [f64; 2], steps: usize) -> Result<ExpansionReport> {
        let y = self.y_domain();
        let margin = 1e-13 * self.c_v;
        if z.im.abs() <= margin {
            return Err(Error::OrbitHitRealAxis { step: 0 });
        }
        let rho0 = y.rho(z)? * libm::hypot(v[0], v[1]);
        let mut w = z;
        let mut dv = C64::new(v[0], v[1]);
        let mut ratios = Vec::with_capacity(steps);
        for k in 1..=steps {
            let (next, d) = self.map_jet1(w).map_err(|_| Error::OrbitEscaped { step: k })?;
            if !self.in_v(next) {
                return Err(Error::OrbitEscaped { step: k });
            }
            if next.im.abs() <= margin {
                return Err(Error::OrbitHitRealAxis { step: k });
            }
            dv = C64::new(d[0][0] * dv.re + d[0][1] * dv.im, d[1][0] * dv.re + d[1][1] * dv.im);
            w = next;
            ratios.push(y.rho(w)? * dv.norm() / rho0);
        }
        let eta_hat = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let start = ratios.len() - ratios.len() / 3;
        let (tail_slope, tail_increasing) = if ratios.len() - start >= 2 {
            let xs: Vec<f64> = (start..ratios.len()).map(|k| k as f64).collect();
            let ys: Vec<f64> = ratios[start..].iter().map(|r| libm::log(*r)).collect();
            let s = crate::extension::linear_fit(&xs, &ys).0;
            (s, s > 0.0 && ratios[ratios.len() - 1] > ratios[start])
        } else {
            (f64::NAN, false)
        };
        Ok(ExpansionReport { ratios, eta_hat, tail_slope, tail_increasing })
    }

    /// Backward orbit `z_depth, …, z_1` of a real point `w0 > G(0)` under seeded branch choices;
    /// returns the chain with `G(z_{k}) = z_{k−1}`, starting point last-computed first.
    pub fn backward_chain(&self, w0: f64, branches: &[usize]) -> Result<Vec<C64>> {
        let mut chain = Vec::with_capacity(branches.len());
        let mut w = C64::new(w0, 0.0);
        for &b in branches {
            w = self.preimage(w, b)?;
            chain.push(w);
        }
        Ok(chain)
    }

    /// Seeded corpus: `w0` uniform in `(G(0), w_hi)`, random branches, expansion along the
    /// forward orbit of the deepest preimage.
    pub fn expansion_corpus(&self, w_hi: f64, count: usize, depth: usize, seed: u64) -> Result<Vec<ExpansionReport>> {
        if depth < 2 || w_hi <= self.critical_value.re {
            return Err(Error::InvalidArgument("corpus needs depth >= 2 and w_hi above G(0)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = self.critical_value.re;
        (0..count)
            .map(|_| {
                let w0 = lo + (w_hi - lo) * rng.gen::<f64>();
                let branches: Vec<usize> = (0..depth).map(|_| rng.gen_range(0..self.degree as usize)).collect();
                let chain = self.backward_chain(w0, &branches)?;
                self.orbit_expansion(chain[depth - 1], [1.0, 0.0], depth - 1)
            })
            .collect()
    }
}

/// Scale strips `W_k`: `λ^k/(αM) ≤ |Im z| < λ^{k−1}/(αM)` with `λ = M⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleIndex {
    pub alpha: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// `W_0 = U ∖ U_α`, `|Im z| > (αM)⁻¹`.
    Outer,
    Strip(u32),
    /// `z` on ℝ, below every strip.
    Real,
}

impl ScaleIndex {
    pub fn new(alpha: f64, m: f64) -> Result<Self> {
        if !(alpha > 1.0 && m > 1.0) {
            return Err(Error::InvalidArgument("scale index needs α > 1 and M > 1"));
        }
        Ok(Self { alpha, m })
    }

    pub fn lambda(&self) -> f64 {
        1.0 / self.m
    }

    pub fn classify(&self, z: C64) -> Scale {
        let y = z.im.abs();
        if y == 0.0 {
            return Scale::Real;
        }
        let am = self.alpha * self.m;
        let s = am * y;
        if s > 1.0 {
            return Scale::Outer;
        }
        let lam = self.lambda();
        let t = libm::log(s) / libm::log(lam);
        let mut k = (libm::ceil(t) as i64).max(1);
        // settle rounding at strip boundaries with the defining inequalities
        let lower = |k: i64| Scalar::powi(lam, k as u32) / am;
        while k > 1 && y >= lower(k - 1) {
            k -= 1;
        }
        while y < lower(k) {
            k += 1;
        }
        Scale::Strip(k as u32)
    }
}
