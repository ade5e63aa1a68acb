//! Asymptotically holomorphic extensions by truncated vertical Taylor sums.
//!
//! `F(x+iy) = Σ_{k≤m} c_k(x) (iy)^k` with `c_k = f^(k)/k!`, so `∂̄F = ½(m+1) c_{m+1}(x) (iy)^m`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::matcalc::{Jet2, Mat2};
use crate::scalar::Scalar;
use crate::unimodal::{binomial, Renormalized, UnimodalMap};

/// Highest Taylor order any source is asked for.
pub const MAX_ORDER: usize = 24;

/// `|∂F|` below this is treated as a critical point.
pub const CRITICAL_TOL: f64 = 1e-14;

/// Real map exposing Taylor coefficients `c_k(x) = f^(k)(x)/k!`.
pub trait JetSource {
    /// Writes `c_0..=c_n` into `out[..=n]`.
    fn taylor(&self, x: f64, n: usize, out: &mut [f64]) -> Result<()>;

    /// Highest order with a defined derivative.
    fn max_order(&self) -> usize {
        usize::MAX
    }
}

impl JetSource for UnimodalMap {
    fn taylor(&self, x: f64, n: usize, out: &mut [f64]) -> Result<()> {
        for (k, c) in out.iter_mut().enumerate().take(n + 1) {
            *c = self.taylor_coefficient(x, k);
        }
        Ok(())
    }
}

/// Real polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative_complex(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, (j, &c)| acc * z + c * j as f64)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }
}

impl From<UnimodalMap> for Polynomial {
    fn from(f: UnimodalMap) -> Self {
        let mut coeffs = vec![0.0; f.d as usize + 1];
        coeffs[0] = 1.0;
        coeffs[f.d as usize] = -f.a;
        Self { coeffs }
    }
}

impl JetSource for Polynomial {
    fn taylor(&self, x: f64, n: usize, out: &mut [f64]) -> Result<()> {
        for (k, c) in out.iter_mut().enumerate().take(n + 1) {
            let mut acc = 0.0;
            for j in (k..self.coeffs.len()).rev() {
                acc = acc * x + binomial(j, k) * self.coeffs[j];
            }
            *c = acc;
        }
        Ok(())
    }
}

fn series_mul(a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = out.len();
    for (k, o) in out.iter_mut().enumerate() {
        *o = (0..=k).map(|i| a[i] * b[k - i]).sum();
    }
    debug_assert!(a.len() >= n && b.len() >= n);
}

impl JetSource for Renormalized {
    fn taylor(&self, x: f64, n: usize, out: &mut [f64]) -> Result<()> {
        if n > MAX_ORDER {
            return Err(Error::InsufficientJets { needed: n, available: MAX_ORDER });
        }
        let lam = self.lambda_f64();
        let len = n + 1;
        let d = self.base.d as usize;
        let mut s = vec![0.0; len];
        s[0] = lam * x;
        if len > 1 {
            s[1] = lam;
        }
        let mut coeff = vec![0.0; d + 1];
        let mut delta = vec![0.0; len];
        let mut power = vec![0.0; len];
        let mut tmp = vec![0.0; len];
        for _ in 0..self.q {
            let s0 = s[0];
            for (k, c) in coeff.iter_mut().enumerate() {
                *c = self.base.taylor_coefficient(s0, k);
            }
            delta.copy_from_slice(&s);
            delta[0] = 0.0;
            power.iter_mut().for_each(|p| *p = 0.0);
            power[0] = 1.0;
            s.iter_mut().for_each(|v| *v = 0.0);
            for &c in coeff.iter() {
                for (v, p) in s.iter_mut().zip(power.iter()) {
                    *v += c * p;
                }
                series_mul(&power, &delta, &mut tmp);
                power.copy_from_slice(&tmp);
            }
        }
        for (o, v) in out.iter_mut().zip(s.iter()) {
            *o = v / lam;
        }
        Ok(())
    }
}

/// Base map plus `ε |x|^{p}`, a finitely smooth perturbation for robustness checks.
#[derive(Debug, Clone, Copy)]
pub struct Perturbed<B> {
    pub base: B,
    pub eps: f64,
    pub power: f64,
}

impl<B: JetSource> Perturbed<B> {
    /// Exponent `m + ½`, so derivatives of order `m + 1` blow up at 0.
    pub fn for_order(base: B, eps: f64, m: usize) -> Self {
        Self { base, eps, power: m as f64 + 0.5 }
    }
}

impl<B: JetSource> JetSource for Perturbed<B> {
    fn taylor(&self, x: f64, n: usize, out: &mut [f64]) -> Result<()> {
        self.base.taylor(x, n, out)?;
        if self.eps == 0.0 {
            return Ok(());
        }
        let ax = x.abs();
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        let mut binom = 1.0;
        for (k, o) in out.iter_mut().enumerate().take(n + 1) {
            let e = self.power - k as f64;
            if ax == 0.0 && e < 0.0 {
                return Err(Error::InsufficientJets { needed: k, available: k - 1 });
            }
            let term = if ax == 0.0 { if e == 0.0 { 1.0 } else { 0.0 } } else { libm::pow(ax, e) };
            *o += self.eps * binom * term * Scalar::powi(sign, k as u32);
            binom *= (self.power - k as f64) / (k + 1) as f64;
        }
        Ok(())
    }

    fn max_order(&self) -> usize {
        self.base.max_order()
    }
}

/// A smooth planar map with first and second derivatives and a Beltrami coefficient.
pub trait PlanarMap {
    fn eval(&self, z: C64) -> Result<C64>;
    /// Value and real Jacobian `[[u_x, u_y], [v_x, v_y]]`.
    fn jet1(&self, z: C64) -> Result<(C64, Mat2)>;
    fn jet2(&self, z: C64) -> Result<Jet2>;
    /// `(∂F, ∂̄F)`.
    fn wirtinger(&self, z: C64) -> Result<(C64, C64)> {
        let (_, d) = self.jet1(z)?;
        Ok(wirtinger_from_matrix(&d))
    }
}

/// `∂ = ½(F_x − iF_y)` and `∂̄ = ½(F_x + iF_y)` from a real Jacobian.
pub fn wirtinger_from_matrix(d: &Mat2) -> (C64, C64) {
    let fx = C64::new(d[0][0], d[1][0]);
    let fy = C64::new(d[0][1], d[1][1]);
    let i = C64::new(0.0, 1.0);
    ((fx - i * fy) * 0.5, (fx + i * fy) * 0.5)
}

/// Beltrami coefficient and dilatation of a real 2×2 derivative.
pub fn mu_and_k_from_matrix(d: &Mat2) -> Result<(C64, f64)> {
    let (dz, dzb) = wirtinger_from_matrix(d);
    mu_and_k_from_wirtinger(dz, dzb, 0.0, 0.0)
}

fn mu_and_k_from_wirtinger(dz: C64, dzb: C64, x: f64, y: f64) -> Result<(C64, f64)> {
    if dz.norm() < CRITICAL_TOL {
        return Err(Error::CriticalPoint { x, y });
    }
    let mu = dzb / dz;
    let a = mu.norm();
    let k = if a < 1.0 { (1.0 + a) / (1.0 - a) } else { f64::INFINITY };
    Ok((mu, k))
}

pub fn to_c64(z: [f64; 2]) -> C64 {
    C64::new(z[0], z[1])
}

pub fn from_c64(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

/// Truncated vertical Taylor extension of a real jet source.
#[derive(Debug, Clone)]
pub struct AHExtension<B> {
    pub base: B,
    pub m: usize,
}

/// Builds the order-`m` extension; needs derivatives through order `m + 1`.
pub fn extend<B: JetSource>(base: B, m: usize) -> Result<AHExtension<B>> {
    if m < 2 {
        return Err(Error::InvalidArgument("truncation order must be at least 2"));
    }
    if m + 2 > MAX_ORDER {
        return Err(Error::InsufficientJets { needed: m + 2, available: MAX_ORDER });
    }
    if base.max_order() < m + 1 {
        return Err(Error::InsufficientJets { needed: m + 1, available: base.max_order() });
    }
    Ok(AHExtension { base, m })
}

/// Powers `(iy)^k` for `k = 0..=n`.
fn ipowers(y: f64, n: usize) -> [C64; MAX_ORDER + 1] {
    let mut p = [C64::new(0.0, 0.0); MAX_ORDER + 1];
    p[0] = C64::new(1.0, 0.0);
    let iy = C64::new(0.0, y);
    for k in 1..=n {
        p[k] = p[k - 1] * iy;
    }
    p
}

impl<B: JetSource> AHExtension<B> {
    fn coeffs(&self, x: f64, n: usize) -> Result<[f64; MAX_ORDER + 1]> {
        let mut c = [0.0; MAX_ORDER + 1];
        self.base.taylor(x, n, &mut c)?;
        Ok(c)
    }

    /// `∂̄F` by the closed form `½(m+1) c_{m+1}(x) (iy)^m`.
    pub fn dbar_closed_form(&self, z: C64) -> Result<C64> {
        let c = self.coeffs(z.re, self.m + 1)?;
        let p = ipowers(z.im, self.m);
        Ok(p[self.m] * (0.5 * (self.m + 1) as f64 * c[self.m + 1]))
    }

    /// `(μ, K)` at `z`.
    pub fn mu_and_k(&self, z: C64) -> Result<(C64, f64)> {
        let (dz, _) = self.wirtinger(z)?;
        let dzb = self.dbar_closed_form(z)?;
        mu_and_k_from_wirtinger(dz, dzb, z.re, z.im)
    }

    /// Jet of `F` as a planar map.
    pub fn jacobian_jet(&self, z: C64) -> Result<Jet2> {
        self.jet2(z)
    }

    /// `|F(z̄) − conj F(z)|`.
    pub fn symmetry_residual(&self, z: C64) -> Result<f64> {
        Ok((self.eval(z.conj())? - self.eval(z)?.conj()).norm())
    }

    /// Largest `|y|` keeping `|∂̄F| ≤ margin` on `[x_lo, x_hi]`, from the closed form.
    pub fn quasiregular_height(&self, x_lo: f64, x_hi: f64, margin: f64, samples: usize) -> Result<f64> {
        let n = samples.max(2);
        let mut sup = 0.0f64;
        for i in 0..n {
            let x = x_lo + (x_hi - x_lo) * i as f64 / (n - 1) as f64;
            let c = self.coeffs(x, self.m + 1)?;
            sup = sup.max(c[self.m + 1].abs() * (self.m + 1) as f64);
        }
        if sup == 0.0 {
            return Ok(f64::INFINITY);
        }
        // sup|f^(m+1)|/m! = (m+1) sup|c_{m+1}|
        Ok(libm::pow(margin / sup, 1.0 / self.m as f64))
    }
}

impl<B: JetSource> PlanarMap for AHExtension<B> {
    fn eval(&self, z: C64) -> Result<C64> {
        let c = self.coeffs(z.re, self.m)?;
        let p = ipowers(z.im, self.m);
        Ok((0..=self.m).map(|k| p[k] * c[k]).sum())
    }

    fn jet1(&self, z: C64) -> Result<(C64, Mat2)> {
        let m = self.m;
        let c = self.coeffs(z.re, m + 1)?;
        let p = ipowers(z.im, m);
        let i = C64::new(0.0, 1.0);
        let mut w = C64::new(0.0, 0.0);
        let mut fx = C64::new(0.0, 0.0);
        let mut fy = C64::new(0.0, 0.0);
        for k in 0..=m {
            w += p[k] * c[k];
            fx += p[k] * ((k + 1) as f64 * c[k + 1]);
            if k >= 1 {
                fy += i * p[k - 1] * (k as f64 * c[k]);
            }
        }
        Ok((w, [[fx.re, fy.re], [fx.im, fy.im]]))
    }

    fn jet2(&self, z: C64) -> Result<Jet2> {
        let m = self.m;
        let c = self.coeffs(z.re, m + 2)?;
        let p = ipowers(z.im, m);
        let i = C64::new(0.0, 1.0);
        let zero = C64::new(0.0, 0.0);
        let (mut w, mut fx, mut fy, mut fxx, mut fxy, mut fyy) = (zero, zero, zero, zero, zero, zero);
        for k in 0..=m {
            let kf = k as f64;
            w += p[k] * c[k];
            fx += p[k] * ((kf + 1.0) * c[k + 1]);
            fxx += p[k] * ((kf + 1.0) * (kf + 2.0) * c[k + 2]);
            if k >= 1 {
                fy += i * p[k - 1] * (kf * c[k]);
                fxy += i * p[k - 1] * (kf * (kf + 1.0) * c[k + 1]);
            }
            if k >= 2 {
                fyy -= p[k - 2] * (kf * (kf - 1.0) * c[k]);
            }
        }
        Ok(Jet2 {
            value: [w.re, w.im],
            d: [[fx.re, fy.re], [fx.im, fy.im]],
            d2: [[fxx.re, fxy.re, fxy.re, fyy.re], [fxx.im, fxy.im, fxy.im, fyy.im]],
        })
    }

    fn wirtinger(&self, z: C64) -> Result<(C64, C64)> {
        let (_, d) = self.jet1(z)?;
        Ok(wirtinger_from_matrix(&d))
    }
}

/// Rectangle `[x_lo, x_hi] × [y_lo, y_hi]` with `0 < y_lo < y_hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strip {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

/// Log-log fit of `|μ|` against `|Im z|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    /// `exp` of the fitted intercept.
    pub constant: f64,
    /// `sup |μ| / |y|^m` over the samples.
    pub sup_ratio: f64,
    pub samples: usize,
}

impl OrderFit {
    pub fn passes(&self, m: usize, tol: f64) -> bool {
        (self.slope - m as f64).abs() < tol
    }
}

/// Least-squares slope and intercept.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits the decay order of `μ` on a product grid of `x` columns and log-spaced heights.
pub fn verify_order<B: JetSource>(ext: &AHExtension<B>, strip: Strip, samples: usize) -> Result<OrderFit> {
    if !(strip.y_lo > 0.0 && strip.y_hi > strip.y_lo && strip.x_hi >= strip.x_lo) {
        return Err(Error::InvalidArgument("strip must satisfy 0 < y_lo < y_hi"));
    }
    let nx = (libm::sqrt(samples as f64) as usize).max(1);
    let ny = (samples / nx).max(2);
    let (l0, l1) = (libm::log(strip.y_lo), libm::log(strip.y_hi));
    let mut lx = Vec::with_capacity(nx * ny);
    let mut ly = Vec::with_capacity(nx * ny);
    let mut sup_ratio = 0.0f64;
    for ix in 0..nx {
        let x = if nx == 1 {
            0.5 * (strip.x_lo + strip.x_hi)
        } else {
            strip.x_lo + (strip.x_hi - strip.x_lo) * ix as f64 / (nx - 1) as f64
        };
        for iy in 0..ny {
            let ly_val = l0 + (l1 - l0) * iy as f64 / (ny - 1) as f64;
            let y = libm::exp(ly_val);
            let (mu, _) = ext.mu_and_k(C64::new(x, y))?;
            let a = mu.norm();
            if a < 1e-300 {
                continue;
            }
            sup_ratio = sup_ratio.max(a / Scalar::powi(y, ext.m as u32));
            lx.push(ly_val);
            ly.push(libm::log(a));
        }
    }
    if lx.len() < 2 {
        return Err(Error::DegenerateSamples);
    }
    let (slope, intercept) = linear_fit(&lx, &ly);
    Ok(OrderFit { slope, constant: libm::exp(intercept), sup_ratio, samples: lx.len() })
}

/// Holomorphic polynomial lifted to the plane, for exact comparisons.
impl PlanarMap for Polynomial {
    fn eval(&self, z: C64) -> Result<C64> {
        Ok(self.eval_complex(z))
    }

    fn jet1(&self, z: C64) -> Result<(C64, Mat2)> {
        let w = self.eval_complex(z);
        let c = self.derivative_complex(z);
        Ok((w, [[c.re, -c.im], [c.im, c.re]]))
    }

    fn jet2(&self, z: C64) -> Result<Jet2> {
        let w = self.eval_complex(z);
        let c1 = self.derivative_complex(z);
        let dd = Polynomial::new(self.coeffs.iter().enumerate().skip(1).map(|(j, &c)| c * j as f64).collect());
        let c2 = dd.derivative_complex(z);
        Ok(Jet2::from_holomorphic([w.re, w.im], [c1.re, c1.im], [c2.re, c2.im]))
    }
}
