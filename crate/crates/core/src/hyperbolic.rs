//! Poincaré densities and distances, hyperbolic norms and Jacobians, McMullen's Φ,
//! and empirical checks of quasi-isometry estimates.

use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::extension::linear_fit;
use crate::matcalc::{det2, mat2_vec, singular_values2, Mat2};

/// `½ log 2`; the bound `Φ(s) < 1 − e^{−2s}/3` is claimed above it.
pub const PHI_BOUND_MIN_S: f64 = 0.346_573_590_279_972_65;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperbolicDomain {
    UnitDisk,
    Disk { center: C64, radius: f64 },
    /// `ℂ ∖ ℝ`, two half-planes.
    SlitPlane,
    /// `D(center, radius) ∖ ℝ` with real center, two half-disks.
    SlitDisk { center: f64, radius: f64 },
}

/// Chart image with its complex derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub w: C64,
    pub dw: C64,
    /// `+1` upper component, `-1` lower, `0` for connected domains.
    pub component: i8,
}

/// `arccosh(1 + x)` without cancellation for small `x`.
fn acosh1p(x: f64) -> f64 {
    libm::log1p(x + libm::sqrt(x * (x + 2.0)))
}

/// Upper half-disk of radius 1 to the upper half-plane: `s = ((1+ζ)/(1−ζ))²`.
fn half_disk_to_half_plane(zeta: C64) -> (C64, C64) {
    let one = C64::new(1.0, 0.0);
    let u = (one + zeta) / (one - zeta);
    let du = 2.0 / ((one - zeta) * (one - zeta));
    let s = u * u;
    // Im s = 2 Re u Im u with both factors formed without cancellation.
    let den = (one - zeta).norm_sqr();
    let re_u = (1.0 - zeta.norm_sqr()) / den;
    let im_u = 2.0 * zeta.im / den;
    (C64::new(s.re, 2.0 * re_u * im_u), 2.0 * u * du)
}

impl HyperbolicDomain {
    fn component(&self, z: C64) -> Result<i8> {
        match *self {
            Self::UnitDisk => {
                if z.norm() < 1.0 {
                    Ok(0)
                } else {
                    Err(Error::OutsideDomain { x: z.re, y: z.im })
                }
            }
            Self::Disk { center, radius } => {
                if (z - center).norm() < radius {
                    Ok(0)
                } else {
                    Err(Error::OutsideDomain { x: z.re, y: z.im })
                }
            }
            Self::SlitPlane => match z.im {
                y if y > 0.0 => Ok(1),
                y if y < 0.0 => Ok(-1),
                _ => Err(Error::OnSlit { x: z.re }),
            },
            Self::SlitDisk { center, radius } => {
                if (z - center).norm() >= radius {
                    return Err(Error::OutsideDomain { x: z.re, y: z.im });
                }
                match z.im {
                    y if y > 0.0 => Ok(1),
                    y if y < 0.0 => Ok(-1),
                    _ => Err(Error::OnSlit { x: z.re }),
                }
            }
        }
    }

    pub fn contains(&self, z: C64) -> bool {
        self.component(z).is_ok()
    }

    /// Point of the upper half-plane with `|ds/dz|`, for the slit variants.
    fn half_plane_chart(&self, z: C64) -> Result<(C64, f64, i8)> {
        let comp = self.component(z)?;
        let zu = if comp < 0 { z.conj() } else { z };
        match *self {
            Self::SlitPlane => Ok((zu, 1.0, comp)),
            Self::SlitDisk { center, radius } => {
                let (s, ds) = half_disk_to_half_plane((zu - center) / radius);
                Ok((s, ds.norm() / radius, comp))
            }
            _ => Err(Error::InvalidArgument("half-plane chart needs a slit domain")),
        }
    }

    /// Conformal chart to the unit disk on the component of `z`.
    pub fn chart(&self, z: C64) -> Result<ChartPoint> {
        let comp = self.component(z)?;
        match *self {
            Self::UnitDisk => Ok(ChartPoint { w: z, dw: C64::new(1.0, 0.0), component: 0 }),
            Self::Disk { center, radius } => {
                Ok(ChartPoint { w: (z - center) / radius, dw: C64::new(1.0 / radius, 0.0), component: 0 })
            }
            Self::SlitPlane | Self::SlitDisk { .. } => {
                let zu = if comp < 0 { z.conj() } else { z };
                let (s, ds) = match *self {
                    Self::SlitPlane => (zu, C64::new(1.0, 0.0)),
                    Self::SlitDisk { center, radius } => {
                        let (s, ds) = half_disk_to_half_plane((zu - center) / radius);
                        (s, ds / radius)
                    }
                    _ => unreachable!(),
                };
                let i = C64::new(0.0, 1.0);
                let w = (s - i) / (s + i);
                let dw = 2.0 * i / ((s + i) * (s + i)) * ds;
                if comp < 0 {
                    Ok(ChartPoint { w: w.conj(), dw: dw.conj(), component: comp })
                } else {
                    Ok(ChartPoint { w, dw, component: comp })
                }
            }
        }
    }

    /// Poincaré density, curvature −1.
    pub fn rho(&self, z: C64) -> Result<f64> {
        match *self {
            Self::UnitDisk => {
                self.component(z)?;
                Ok(2.0 / (1.0 - z.norm_sqr()))
            }
            Self::Disk { center, radius } => {
                self.component(z)?;
                Ok(2.0 * radius / (radius * radius - (z - center).norm_sqr()))
            }
            Self::SlitPlane | Self::SlitDisk { .. } => {
                let (s, ds, _) = self.half_plane_chart(z)?;
                Ok(ds / s.im)
            }
        }
    }

    /// Density through the disk chart, `ρ_𝔻(χ(z))·|χ′(z)|`.
    pub fn rho_via_chart(&self, z: C64) -> Result<f64> {
        let c = self.chart(z)?;
        Ok(2.0 * c.dw.norm() / (1.0 - c.w.norm_sqr()))
    }

    /// Hyperbolic distance; `∞` across components.
    pub fn dist(&self, z: C64, w: C64) -> Result<f64> {
        match *self {
            Self::UnitDisk | Self::Disk { .. } => {
                let a = self.chart(z)?.w;
                let b = self.chart(w)?.w;
                Ok(disk_distance(a, b))
            }
            Self::SlitPlane | Self::SlitDisk { .. } => {
                let (s1, _, c1) = self.half_plane_chart(z)?;
                let (s2, _, c2) = self.half_plane_chart(w)?;
                if c1 != c2 {
                    return Ok(f64::INFINITY);
                }
                Ok(acosh1p((s1 - s2).norm_sqr() / (2.0 * s1.im * s2.im)))
            }
        }
    }

    /// Distance through the disk chart and the disk formula.
    pub fn dist_via_chart(&self, z: C64, w: C64) -> Result<f64> {
        let a = self.chart(z)?;
        let b = self.chart(w)?;
        if a.component != b.component {
            return Ok(f64::INFINITY);
        }
        Ok(disk_distance(a.w, b.w))
    }

    /// Largest pairwise distance of a finite set.
    pub fn diameter(&self, pts: &[C64]) -> Result<f64> {
        let mut d = 0.0f64;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d = d.max(self.dist(pts[i], pts[j])?);
            }
        }
        Ok(d)
    }

    /// `|v|_Y = ρ(z)|v|`.
    pub fn vector_norm(&self, z: C64, v: [f64; 2]) -> Result<f64> {
        Ok(self.rho(z)? * libm::hypot(v[0], v[1]))
    }

    /// `|DF(z)v|_Y / |v|_Y`.
    pub fn derivative_ratio(&self, z: C64, fz: C64, d: &Mat2, v: [f64; 2]) -> Result<f64> {
        derivative_ratio_between(self, self, z, fz, d, v)
    }

    /// Smallest and largest `|DF(z)v|_Y / |v|_Y` over directions.
    pub fn distortion(&self, z: C64, fz: C64, d: &Mat2) -> Result<(f64, f64)> {
        if det2(d) <= 0.0 {
            return Err(Error::NotDiffeo { x: z.re, y: z.im });
        }
        let k = self.rho(fz)? / self.rho(z)?;
        let (smax, smin) = singular_values2(d);
        Ok((k * smin, k * smax))
    }

    /// `det DF · (ρ(Fz)/ρ(z))²`.
    pub fn hyperbolic_jacobian(&self, z: C64, fz: C64, d: &Mat2) -> Result<f64> {
        hyperbolic_jacobian_between(self, self, z, fz, d)
    }
}

/// `|DF(z)v|_Y / |v|_X` for a map from `source` into `target`.
pub fn derivative_ratio_between(
    source: &HyperbolicDomain,
    target: &HyperbolicDomain,
    z: C64,
    fz: C64,
    d: &Mat2,
    v: [f64; 2],
) -> Result<f64> {
    let dv = mat2_vec(d, v);
    Ok(target.rho(fz)? * libm::hypot(dv[0], dv[1]) / (source.rho(z)? * libm::hypot(v[0], v[1])))
}

/// `det DF · (ρ_Y(Fz)/ρ_X(z))²` for a map from `source` into `target`.
pub fn hyperbolic_jacobian_between(
    source: &HyperbolicDomain,
    target: &HyperbolicDomain,
    z: C64,
    fz: C64,
    d: &Mat2,
) -> Result<f64> {
    let k = target.rho(fz)? / source.rho(z)?;
    Ok(det2(d) * k * k)
}

/// `diam(E) + log(2/δ)`: bounds `d_𝔻(z, w)` for `w ∈ E ∋ 0` and `1 − |z| ≥ δ`.
pub fn distance_to_root_bound(diam: f64, delta: f64) -> f64 {
    diam + libm::log(2.0 / delta)
}

/// Distance in the unit disk via `cosh d = 1 + 2|a−b|²/((1−|a|²)(1−|b|²))`.
pub fn disk_distance(a: C64, b: C64) -> f64 {
    let x = 2.0 * (a - b).norm_sqr() / ((1.0 - a.norm_sqr()) * (1.0 - b.norm_sqr()));
    acosh1p(x)
}

/// `1 − Φ(s) = Σ_{k≥1} 2t^{2k}/(4k²−1)` with `t = e^{-s}`.
pub fn mcmullen_phi_deficit(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveArgument { value: s });
    }
    let t = libm::exp(-s);
    if t > 0.5 {
        return Ok(1.0 - phi_direct(s));
    }
    let t2 = t * t;
    let mut p = t2;
    let mut sum = 0.0;
    let mut k = 1.0f64;
    while p > 0.0 {
        let term = 2.0 * p / (4.0 * k * k - 1.0);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        p *= t2;
        k += 1.0;
    }
    Ok(sum)
}

fn phi_direct(s: f64) -> f64 {
    let t = libm::exp(-s);
    libm::sinh(s) * 2.0 * libm::atanh(t)
}

/// `Φ(s) = sinh(s) log((1+e^{−s})/(1−e^{−s}))`.
pub fn mcmullen_phi(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveArgument { value: s });
    }
    if libm::exp(-s) > 0.5 {
        Ok(phi_direct(s))
    } else {
        Ok(1.0 - mcmullen_phi_deficit(s)?)
    }
}

/// `1 − Φ(s) − e^{−2s}/3`, positive where the simplified bound holds.
pub fn phi_bound_margin(s: f64) -> Result<f64> {
    Ok(mcmullen_phi_deficit(s)? - libm::exp(-2.0 * s) / 3.0)
}

/// Upper bounds on `mod(𝔻 ∖ D(z, r))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusBounds {
    /// `log((1 − |z|² + |z|r)/r)`.
    pub bound: f64,
    /// `log(2/r)`.
    pub simple: f64,
}

pub fn mod_disk_minus_disk(z: C64, r: f64) -> Result<ModulusBounds> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveArgument { value: r });
    }
    let a = z.norm();
    if r >= 1.0 - a {
        return Err(Error::RadiusTooLarge { r, limit: 1.0 - a });
    }
    Ok(ModulusBounds { bound: libm::log((1.0 - a * a + a * r) / r), simple: libm::log(2.0 / r) })
}

/// `log(5/δ)`, the bound for `r = δ r_z` with `r_z = (1 − |z|)/2`.
pub fn mod_bound_delta(delta: f64) -> f64 {
    libm::log(5.0 / delta)
}

/// Hyperbolic translation along `(−1, 1)` taking `a` to `b`: `ζ ↦ (ζ − c)/(1 − cζ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskTranslation {
    pub c: f64,
}

impl DiskTranslation {
    pub fn new(a: f64, b: f64) -> Self {
        Self { c: (a - b) / (1.0 - a * b) }
    }

    pub fn eval(&self, z: C64) -> C64 {
        (z - self.c) / (1.0 - self.c * z)
    }

    pub fn derivative(&self, z: C64) -> C64 {
        let q = 1.0 - self.c * z;
        C64::new(1.0 - self.c * self.c, 0.0) / (q * q)
    }

    pub fn second_derivative(&self, z: C64) -> C64 {
        let q = 1.0 - self.c * z;
        C64::new(2.0 * self.c * (1.0 - self.c * self.c), 0.0) / (q * q * q)
    }
}

/// `B_θ(t) = 3(2 + 180 e^{1/(θe)} C₀ t)²`.
pub fn b_theta(theta: f64, c0: f64, t: f64) -> f64 {
    let inner = 2.0 + 180.0 * libm::exp(1.0 / (theta * core::f64::consts::E)) * c0 * t;
    3.0 * inner * inner
}

/// `A_θ(α, m) = B_θ(1040 α⁷ m²)`.
pub fn a_theta(theta: f64, c0: f64, alpha: f64, m: f64) -> f64 {
    b_theta(theta, c0, 1040.0 * libm::pow(alpha, 7.0) * m * m)
}

/// `|φ″/φ′| · dist(z, ∂V) / 4`, at most 1 for univalent `φ`.
pub fn koebe_ratio(d1: C64, d2: C64, dist_to_boundary: f64) -> f64 {
    (d2 / d1).norm() * dist_to_boundary / 4.0
}

/// Fitted constant for one value of θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaFit {
    pub theta: f64,
    pub constant: f64,
    /// Held-out worst of `excess − C·scale^{exponent}`, non-positive when the fit holds.
    pub worst_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiIsometryReport {
    /// Log-log slope of the excess against the control variable.
    pub exponent: f64,
    pub fits: Vec<ThetaFit>,
    pub samples: usize,
}

impl QuasiIsometryReport {
    pub fn passes(&self, slack: f64) -> bool {
        self.fits.iter().all(|f| f.worst_violation <= slack)
    }
}

/// `max(hi − 1, 1/lo − 1)` of the hyperbolic distortion at `z`.
pub fn distortion_excess(domain: &HyperbolicDomain, z: C64, fz: C64, d: &Mat2) -> Result<f64> {
    let (lo, hi) = domain.distortion(z, fz, d)?;
    Ok((hi - 1.0).max(1.0 / lo - 1.0).max(0.0))
}

/// Measured dilatation `K − 1` of a derivative.
pub fn dilatation_excess(d: &Mat2) -> f64 {
    let (smax, smin) = singular_values2(d);
    smax / smin - 1.0
}

fn fit_family(xs: &[f64], es: &[f64], thetas: &[f64], power: impl Fn(f64) -> f64) -> QuasiIsometryReport {
    let pos: Vec<(f64, f64)> = xs.iter().zip(es).filter(|(x, e)| **x > 0.0 && **e > 0.0).map(|(x, e)| (*x, *e)).collect();
    let exponent = if pos.len() >= 2 {
        let lx: Vec<f64> = pos.iter().map(|p| libm::log(p.0)).collect();
        let le: Vec<f64> = pos.iter().map(|p| libm::log(p.1)).collect();
        linear_fit(&lx, &le).0
    } else {
        f64::NAN
    };
    let fits = thetas
        .iter()
        .map(|&theta| {
            let p = power(theta);
            // fit on even-indexed samples, validate on odd ones
            let mut c = 0.0f64;
            for (x, e) in xs.iter().zip(es).step_by(2) {
                if *x > 0.0 {
                    c = c.max(e / libm::pow(*x, p));
                }
            }
            let mut worst = f64::NEG_INFINITY;
            for (x, e) in xs.iter().zip(es).skip(1).step_by(2) {
                worst = worst.max(e - c * libm::pow(*x, p));
            }
            ThetaFit { theta, constant: c, worst_violation: worst }
        })
        .collect();
    QuasiIsometryReport { exponent, fits, samples: xs.len() }
}

/// Small-dilatation mode: for each family parameter, `δ = sup(K − 1)` and the worst
/// distortion excess over `points`, then `excess ≤ C_θ δ^{1−θ}`.
pub fn verify_small_dilatation<F>(
    domain: &HyperbolicDomain,
    family: F,
    params: &[f64],
    points: &[C64],
    thetas: &[f64],
) -> Result<QuasiIsometryReport>
where
    F: Fn(f64, C64) -> (C64, Mat2),
{
    let mut deltas = Vec::with_capacity(params.len());
    let mut excess = Vec::with_capacity(params.len());
    for &eps in params {
        let mut dmax = 0.0f64;
        let mut emax = 0.0f64;
        for &z in points {
            let (fz, d) = family(eps, z);
            if !domain.contains(fz) {
                continue;
            }
            dmax = dmax.max(dilatation_excess(&d));
            emax = emax.max(distortion_excess(domain, z, fz, &d)?);
        }
        deltas.push(dmax);
        excess.push(emax);
    }
    Ok(fit_family(&deltas, &excess, thetas, |t| 1.0 - t))
}

/// Asymptotically holomorphic mode: `excess(z) ≤ C_θ |Im z|^{(r−1)(1−θ)}` pointwise.
pub fn verify_asymptotic<F>(
    domain: &HyperbolicDomain,
    map: F,
    r: f64,
    points: &[C64],
    thetas: &[f64],
) -> Result<QuasiIsometryReport>
where
    F: Fn(C64) -> (C64, Mat2),
{
    let mut ys = Vec::with_capacity(points.len());
    let mut es = Vec::with_capacity(points.len());
    for &z in points {
        let (fz, d) = map(z);
        if !domain.contains(fz) {
            continue;
        }
        ys.push(z.im.abs());
        es.push(distortion_excess(domain, z, fz, &d)?);
    }
    Ok(fit_family(&ys, &es, thetas, |t| (r - 1.0) * (1.0 - t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LOG3: f64 = 1.098_612_288_668_109_8;

    fn c(x: f64, y: f64) -> C64 {
        C64::new(x, y)
    }

    #[test]
    fn unit_disk_reference_values() {
        let d = HyperbolicDomain::UnitDisk;
        assert_eq!(d.rho(c(0.0, 0.0)).unwrap(), 2.0);
        assert!((d.dist(c(0.0, 0.0), c(0.5, 0.0)).unwrap() - LOG3).abs() < 1e-12);
        assert_eq!(d.dist(c(0.3, 0.2), c(0.3, 0.2)).unwrap(), 0.0);
        assert!(d.rho(c(1.0, 0.0)).is_err());
    }

    #[test]
    fn slit_plane_density() {
        let d = HyperbolicDomain::SlitPlane;
        assert_eq!(d.rho(c(3.0, -0.25)).unwrap(), 4.0);
        assert_eq!(d.rho(c(3.0, 0.0)), Err(Error::OnSlit { x: 3.0 }));
        assert_eq!(d.dist(c(0.0, 1.0), c(0.0, -1.0)).unwrap(), f64::INFINITY);
        assert!((d.dist(c(0.0, 1.0), c(0.0, 3.0)).unwrap() - LOG3).abs() < 1e-12);
    }

    #[test]
    fn slit_disk_sandwich_example() {
        let d = HyperbolicDomain::SlitDisk { center: 0.0, radius: 1.0 };
        let (y, yw) = (0.01, 0.5);
        let rho = d.rho(c(0.0, y)).unwrap();
        assert!(1.0 / y <= rho);
        assert!(rho <= (1.0 / y) / (1.0 - 0.5 * y / yw));
        assert_eq!(d.dist(c(0.1, 0.2), c(0.1, -0.2)).unwrap(), f64::INFINITY);
        assert_eq!(d.rho(c(0.5, 0.0)), Err(Error::OnSlit { x: 0.5 }));
        assert!(matches!(d.rho(c(0.9, 0.9)), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn sandwich_on_random_points() {
        let d = HyperbolicDomain::SlitDisk { center: 0.3, radius: 2.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 2000 {
            let w = c(rng.gen_range(-1.7..2.3), rng.gen_range(0.0..1.0));
            if (w - 0.3).norm() + w.im > 2.0 || w.im == 0.0 {
                continue;
            }
            let z = c(w.re, rng.gen_range(0.0..=1.0) * w.im);
            if z.im <= 0.0 {
                continue;
            }
            let rho = d.rho(z).unwrap();
            let hi = (1.0 / z.im) / (1.0 - 0.5 * z.im / w.im);
            assert!(rho >= (1.0 / z.im) * (1.0 - 1e-12) && rho <= hi * (1.0 + 1e-12));
            checked += 1;
        }
    }

    #[test]
    fn inclusion_contracts() {
        let x = HyperbolicDomain::Disk { center: c(0.0, 0.0), radius: 0.5 };
        let y = HyperbolicDomain::UnitDisk;
        let z = c(0.0, 0.0);
        let id = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(derivative_ratio_between(&x, &y, z, z, &id, [0.6, -0.8]).unwrap(), 0.5);
        assert_eq!(hyperbolic_jacobian_between(&x, &y, z, z, &id).unwrap(), 0.25);
        for &w in &[c(0.1, 0.2), c(-0.3, 0.0), c(0.0, -0.45)] {
            assert!(x.rho(w).unwrap() > y.rho(w).unwrap());
        }
    }

    #[test]
    fn identity_and_automorphism_are_isometries() {
        let d = HyperbolicDomain::UnitDisk;
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let z = c(0.2, -0.4);
        assert_eq!(d.derivative_ratio(z, z, &id, [0.3, 0.7]).unwrap(), 1.0);
        let t = DiskTranslation::new(0.3, -0.5);
        let fz = t.eval(z);
        let dz = t.derivative(z);
        let m = [[dz.re, -dz.im], [dz.im, dz.re]];
        assert!((d.hyperbolic_jacobian(z, fz, &m).unwrap() - 1.0).abs() < 1e-12);
        assert!((d.derivative_ratio(z, fz, &m, [1.0, -2.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chart_is_an_isometry() {
        let d = HyperbolicDomain::SlitDisk { center: -0.2, radius: 1.5 };
        for &z in &[c(0.1, 0.3), c(-1.0, -0.2), c(1.1, 0.05), c(-0.2, 1.4)] {
            let ch = d.chart(z).unwrap();
            let m = [[ch.dw.re, -ch.dw.im], [ch.dw.im, ch.dw.re]];
            let ratio = HyperbolicDomain::UnitDisk.rho(ch.w).unwrap() * ch.dw.norm() / d.rho(z).unwrap();
            assert!((ratio - 1.0).abs() < 1e-10);
            assert!(det2(&m) > 0.0);
            assert!((d.rho_via_chart(z).unwrap() / d.rho(z).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_reference_values() {
        assert!((mcmullen_phi(1.0).unwrap() - 0.907_181_087_447_929_8).abs() < 1e-14);
        assert!(mcmullen_phi(1e-8).unwrap() < 1e-6);
        assert_eq!(mcmullen_phi(60.0).unwrap(), 1.0);
        assert_eq!(mcmullen_phi(0.0), Err(Error::NonPositiveArgument { value: 0.0 }));
        assert!((PHI_BOUND_MIN_S - 0.5 * core::f64::consts::LN_2).abs() < 1e-16);
    }

    #[test]
    fn phi_series_matches_closed_form() {
        for &s in &[0.7, 1.0, 2.0, 5.0] {
            let direct = 1.0 - phi_direct(s);
            assert!((mcmullen_phi_deficit(s).unwrap() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn phi_bound_on_grid() {
        let n = 10_000;
        for i in 1..=n {
            let s = PHI_BOUND_MIN_S + (20.0 - PHI_BOUND_MIN_S) * i as f64 / n as f64;
            assert!(phi_bound_margin(s).unwrap() > 0.0, "s={s}");
        }
    }

    #[test]
    fn modulus_bounds() {
        let b = mod_disk_minus_disk(c(0.0, 0.0), 0.2).unwrap();
        assert!((b.bound - libm::log(5.0)).abs() < 1e-15);
        let b = mod_disk_minus_disk(c(0.5, 0.0), 0.1).unwrap();
        assert!((b.bound - libm::log(8.0)).abs() < 1e-14);
        assert!(b.bound <= b.simple);
        assert_eq!(mod_disk_minus_disk(c(0.5, 0.0), 0.5), Err(Error::RadiusTooLarge { r: 0.5, limit: 0.5 }));
        let z = c(0.3, 0.4);
        let delta = 0.25;
        let r = delta * 0.5 * (1.0 - z.norm());
        assert!(mod_disk_minus_disk(z, r).unwrap().bound <= mod_bound_delta(delta));
    }

    #[test]
    fn diameter_plus_log_bound() {
        let d = HyperbolicDomain::UnitDisk;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut e = alloc::vec![c(0.0, 0.0)];
            for _ in 0..5 {
                let r = rng.gen_range(0.0..0.95);
                let t = rng.gen_range(0.0..core::f64::consts::TAU);
                e.push(C64::from_polar(r, t));
            }
            let diam = d.diameter(&e).unwrap();
            let delta = rng.gen_range(0.01..1.0);
            let r = rng.gen_range(0.0..=(1.0 - delta));
            let z = C64::from_polar(r, rng.gen_range(0.0..core::f64::consts::TAU));
            for &w in &e {
                assert!(d.dist(z, w).unwrap() <= distance_to_root_bound(diam, delta) + 1e-12);
            }
        }
    }

    #[test]
    fn log_one_over_delta_is_too_small() {
        // E = {0}, |z| = 1 − δ: the distance is log((2 − δ)/δ) > log(1/δ).
        let d = HyperbolicDomain::UnitDisk;
        let delta = 0.5;
        let dist = d.dist(c(1.0 - delta, 0.0), c(0.0, 0.0)).unwrap();
        assert!((dist - LOG3).abs() < 1e-12);
        assert!(dist > libm::log(1.0 / delta));
        assert!(dist <= distance_to_root_bound(0.0, delta));
    }

    #[test]
    fn translation_derivative_bounds() {
        let d = HyperbolicDomain::UnitDisk;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = rng.gen_range(0.0..0.99);
            let b = rng.gen_range(0.0..0.99);
            let alpha = (d.rho(c(a, 0.0)).unwrap() / d.rho(c(b, 0.0)).unwrap()).max(d.rho(c(b, 0.0)).unwrap() / d.rho(c(a, 0.0)).unwrap());
            let t = DiskTranslation::new(a, b);
            assert!((t.eval(c(a, 0.0)) - c(b, 0.0)).norm() < 1e-12);
            let ra = 0.5 * (1.0 - a);
            for _ in 0..20 {
                let zeta = c(a, 0.0) + C64::from_polar(rng.gen_range(0.0..ra), rng.gen_range(0.0..core::f64::consts::TAU));
                let dp = t.derivative(zeta).norm();
                assert!(dp >= 1.0 / (2.0 * alpha) - 1e-12 && dp <= 4.0 * alpha * alpha + 1e-12);
                assert!(t.second_derivative(zeta).norm() <= 16.0 * alpha.powi(3) + 1e-12);
            }
        }
    }

    #[test]
    fn b_theta_is_monotone() {
        let mut prev = 0.0;
        for i in 0..50 {
            let v = b_theta(0.3, 1.0, i as f64 * 0.1);
            assert!(v > prev);
            prev = v;
        }
        assert!(a_theta(0.3, 1.0, 2.0, 3.0) > b_theta(0.3, 1.0, 1e5));
    }

    #[test]
    fn koebe_on_univalent_maps() {
        // φ(z) = 1/(z − p) is univalent on the unit disk for |p| > 1.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let p = C64::from_polar(rng.gen_range(1.01..3.0), rng.gen_range(0.0..core::f64::consts::TAU));
            let z = C64::from_polar(rng.gen_range(0.0..0.99), rng.gen_range(0.0..core::f64::consts::TAU));
            let q = z - p;
            let d1 = -1.0 / (q * q);
            let d2 = 2.0 / (q * q * q);
            assert!(koebe_ratio(d1, d2, 1.0 - z.norm()) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn dilatation_sandwich_for_affine_maps() {
        let d = HyperbolicDomain::SlitPlane;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let eps = rng.gen_range(0.0..0.3);
            let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(0.01..1.0));
            let fz = z + eps * z.conj();
            let m = [[1.0 + eps, 0.0], [0.0, 1.0 - eps]];
            let k = (1.0 + eps) / (1.0 - eps);
            let jh = d.hyperbolic_jacobian(z, fz, &m).unwrap();
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let r = d.derivative_ratio(z, fz, &m, v).unwrap();
            assert!(jh / k <= r * r * (1.0 + 1e-12) && r * r <= k * jh * (1.0 + 1e-12));
        }
    }

    #[test]
    fn identity_has_no_excess() {
        let d = HyperbolicDomain::SlitDisk { center: 0.0, radius: 1.0 };
        let pts: Vec<C64> = (1..20).map(|i| c(0.01 * i as f64, 0.02 * i as f64)).collect();
        let rep = verify_asymptotic(&d, |z| (z, [[1.0, 0.0], [0.0, 1.0]]), 4.0, &pts, &[0.1]).unwrap();
        assert_eq!(rep.fits[0].constant, 0.0);
        assert!(rep.passes(1e-9));
    }

    #[test]
    fn small_dilatation_exponent() {
        let d = HyperbolicDomain::SlitDisk { center: 0.0, radius: 1.0 };
        let pts: Vec<C64> = (0..64).map(|i| c(-0.05 + 0.1 * (i % 8) as f64 / 7.0, 1e-3 + 0.02 * (i / 8) as f64)).collect();
        let params: Vec<f64> = (0..16).map(|i| 1e-3 * libm::pow(0.7, i as f64)).collect();
        let family = |eps: f64, z: C64| (z + eps * z.conj(), [[1.0 + eps, 0.0], [0.0, 1.0 - eps]]);
        for theta in [0.1, 0.3, 0.5] {
            let rep = verify_small_dilatation(&d, family, &params, &pts, &[theta]).unwrap();
            assert!(rep.exponent >= 1.0 - theta - 0.1 && rep.exponent <= 1.0 + 1e-3, "{}", rep.exponent);
            assert!(rep.passes(1e-9));
            assert!(rep.fits[0].constant <= a_theta(theta, 1.0, 2.0, 3.0));
        }
    }

    #[test]
    fn asymptotic_mode_exponent() {
        let r = 4.0;
        let eps = 0.5;
        let map = |z: C64| {
            let y = z.im;
            let ay = y.abs();
            (c(z.re, y + eps * y * libm::pow(ay, r - 1.0)), [[1.0, 0.0], [0.0, 1.0 + r * eps * libm::pow(ay, r - 1.0)]])
        };
        let d = HyperbolicDomain::SlitPlane;
        let pts: Vec<C64> = (0..33).map(|i| c(0.1, 1e-3 * libm::pow(1.15, i as f64))).collect();
        let rep = verify_asymptotic(&d, map, r, &pts, &[0.0, 0.2, 0.5]).unwrap();
        assert!((rep.exponent - (r - 1.0)).abs() < 0.05, "{}", rep.exponent);
        assert!(rep.passes(1e-9));
    }

    #[test]
    fn folding_map_is_not_a_diffeo() {
        let d = HyperbolicDomain::SlitPlane;
        assert!(matches!(d.distortion(c(0.0, 1.0), c(0.0, 1.0), &[[1.0, 0.0], [0.0, -1.0]]), Err(Error::NotDiffeo { .. })));
    }

    proptest! {
        #[test]
        fn slit_disk_is_smaller_than_half_plane(x in -0.99f64..0.99, y in 1e-6f64..0.99) {
            let d = HyperbolicDomain::SlitDisk { center: 0.0, radius: 1.0 };
            prop_assume!(x * x + y * y < 0.999);
            prop_assert!(d.rho(c(x, y)).unwrap() > 1.0 / y);
            prop_assert!(d.rho(c(x, -y)).unwrap() == d.rho(c(x, y)).unwrap());
        }

        #[test]
        fn two_chart_formulations_agree(x1 in -0.9f64..0.9, y1 in 1e-3f64..0.4, x2 in -0.9f64..0.9, y2 in 1e-3f64..0.4) {
            let d = HyperbolicDomain::SlitDisk { center: 0.0, radius: 1.0 };
            let (a, b) = (c(x1, y1), c(x2, y2));
            prop_assume!(a.norm() < 0.95 && b.norm() < 0.95);
            let r1 = d.rho(a).unwrap();
            prop_assert!((d.rho_via_chart(a).unwrap() / r1 - 1.0).abs() < 1e-10);
            let d1 = d.dist(a, b).unwrap();
            prop_assert!((d.dist_via_chart(a, b).unwrap() - d1).abs() < 1e-9 * d1.max(1.0));
        }

        #[test]
        fn distance_is_a_metric(x1 in -0.9f64..0.9, y1 in -0.4f64..0.4, x2 in -0.9f64..0.9, y2 in -0.4f64..0.4, x3 in -0.9f64..0.9, y3 in -0.4f64..0.4) {
            let d = HyperbolicDomain::UnitDisk;
            let (a, b, e) = (c(x1, y1), c(x2, y2), c(x3, y3));
            prop_assume!(a.norm() < 0.99 && b.norm() < 0.99 && e.norm() < 0.99);
            let ab = d.dist(a, b).unwrap();
            prop_assert!((ab - d.dist(b, a).unwrap()).abs() < 1e-12 * ab.max(1.0));
            prop_assert!(ab <= d.dist(a, e).unwrap() + d.dist(e, b).unwrap() + 1e-12);
        }

        #[test]
        fn phi_is_monotone(s in 1e-3f64..30.0, ds in 1e-3f64..1.0) {
            prop_assert!(mcmullen_phi(s).unwrap() <= mcmullen_phi(s + ds).unwrap());
        }
    }
}
