//! Puzzle-style diagnostics: equipotential nests, external rays of unicritical polynomials,
//! shrinking of pieces around precritical points, and kneading comparisons.

use alloc::vec::Vec;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ahpl::{fast_diameter, resample_closed, winding_number, AHPLMap};
use crate::error::{Error, Result};
use crate::extension::{linear_fit, JetSource, Polynomial};
use crate::scalar::{DoubleDouble, Scalar};
use crate::unimodal::{EvenMap, RenormalizationTower, UnimodalMap};

pub const TOL_LAND: f64 = 1e-6;

/// Orientation-preserving fixed point `β_n` of `f^{q_n}` and its multiplier, by double-double
/// Newton on the rescaled map from the endpoint `−1`.
pub fn beta_fixed_point(tower: &RenormalizationTower, n: usize) -> Result<(f64, f64)> {
    let g = tower.renormalized(n)?;
    let mut x = DoubleDouble::from_f64(-1.0);
    let mut last = f64::INFINITY;
    for it in 0..100 {
        let j = g.jet(x);
        let step = (j[0] - x) / (j[1] - DoubleDouble::one());
        x = x - step;
        let s = step.to_f64().abs();
        // stop once steps reach the rounding floor of the rescaled map
        if s < 1e-24 && (s >= 0.5 * last || s < 1e-30) {
            let mult = g.jet(x)[1].to_f64();
            let lam = tower.level(n)?.lambda_dd;
            return Ok(((lam * x).to_f64(), mult));
        }
        last = s;
        if it > 0 && !(x.to_f64().abs() < 10.0) {
            break;
        }
    }
    Err(Error::NoConvergence { iterations: 100 })
}

/// Kneading symbols: `-1`, `0`, `+1` for left of, at, and right of the critical point.
pub fn itinerary<M: Fn(f64) -> f64>(f: M, start: f64, len: usize, bound: f64) -> Result<Vec<i8>> {
    let mut x = start;
    let mut out = Vec::with_capacity(len);
    for index in 0..len {
        if !(x.abs() <= bound) {
            return Err(Error::OrbitLeftInterval { index });
        }
        out.push(if x > 0.0 {
            1
        } else if x < 0.0 {
            -1
        } else {
            0
        });
        x = f(x);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyReport {
    pub length: usize,
    pub first_disagreement: Option<usize>,
}

/// Compares kneading itineraries of the critical values of the AHPL real trace and a polynomial.
pub fn conjugacy_evidence<B: JetSource>(g: &AHPLMap<B>, poly: &Polynomial, length: usize) -> Result<ConjugacyReport> {
    let a = itinerary(|x| g.map(C64::new(x, 0.0)).re, g.critical_value.re, length, g.c_v)?;
    let bound = 2.0 + poly.coeffs.iter().map(|c| c.abs()).sum::<f64>();
    let b = itinerary(|x| poly.eval(x), poly.eval(0.0), length, bound)?;
    let first = a.iter().zip(&b).position(|(x, y)| x != y);
    Ok(ConjugacyReport { length, first_disagreement: first })
}

fn circle(center: C64, radius: f64, n: usize) -> Vec<C64> {
    (0..n).map(|k| center + C64::from_polar(radius, core::f64::consts::TAU * k as f64 / n as f64)).collect()
}

/// Nest of closed curves `X_j = ∂ comp G^{−j}(V)` around a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Nest {
    pub curves: Vec<Vec<C64>>,
    pub euclid_diam: Vec<f64>,
    /// Diameters in the hyperbolic metric of `V`.
    pub hyp_diam: Vec<f64>,
}

impl Nest {
    /// Ratios of successive diameter decrements.
    pub fn increment_ratios(&self) -> Vec<f64> {
        let d = &self.euclid_diam;
        (2..d.len()).map(|j| (d[j - 1] - d[j]) / (d[j - 2] - d[j - 1])).collect()
    }
}

/// Pulls `∂V` back `depth` times around `base`, keeping at most `points` vertices per curve.
pub fn equipotential_nest<B: JetSource>(g: &AHPLMap<B>, base: C64, depth: usize, points: usize) -> Result<Nest> {
    if !g.in_v(base) {
        return Err(Error::PullbackEscaped { step: 0 });
    }
    let v = g.v_domain();
    let mut cur = circle(C64::new(0.0, 0.0), g.c_v, points);
    let mut nest = Nest { curves: Vec::new(), euclid_diam: Vec::new(), hyp_diam: Vec::new() };
    for step in 0..=depth {
        if step > 0 {
            let next = g.pullback_curve(&cur, base)?;
            cur = resample_closed(&next, points);
            if winding_number(&cur, base) == 0 {
                return Err(Error::PullbackEscaped { step });
            }
        }
        nest.euclid_diam.push(fast_diameter(&cur));
        let coarse: Vec<C64> = if step == 0 {
            // ∂V itself is at infinite hyperbolic distance
            Vec::new()
        } else {
            resample_closed(&cur, 256)
        };
        nest.hyp_diam.push(if coarse.is_empty() { f64::INFINITY } else { v.diameter(&coarse)? });
        nest.curves.push(cur.clone());
    }
    Ok(nest)
}

/// External ray of `1 − a z^d`, traced in the Böttcher coordinate of the conjugate `w^d + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub angle: Angle,
    /// Ray points in the coordinate of `1 − a z^d`, outward to inward.
    pub points: Vec<C64>,
    /// Potential levels traced before the points reached binary64 resolution.
    pub resolved_levels: usize,
    /// Diameter of the last third of the points.
    pub tail_diameter: f64,
    pub landing: Option<C64>,
}

/// Points per potential level.
pub const RAY_SHARPNESS: usize = 16;
const RAY_ESCAPE: f64 = 1e3;

fn unicritical(f: &UnimodalMap) -> (f64, f64) {
    // z = κw turns 1 − a z^d into w^d + c with aκ^{d−1} = −1, c = 1/κ
    let d = f.d as f64;
    let kappa = -libm::pow(f.a, -1.0 / (d - 1.0));
    (kappa, 1.0 / kappa)
}

/// External angle `num/den` in turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Angle {
    pub num: u64,
    pub den: u64,
}

impl Angle {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num >= den {
            return Err(Error::InvalidArgument("angle must be num/den in [0, 1)"));
        }
        Ok(Self { num, den })
    }

    pub fn turns(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `d·t mod 1`.
    pub fn multiply(&self, d: u32) -> Self {
        let num = ((self.num as u128 * d as u128) % self.den as u128) as u64;
        Self { num, den: self.den }
    }

    /// Period under `t ↦ d·t mod 1`, up to `max`.
    pub fn period(&self, d: u32, max: u32) -> Option<u32> {
        let mut t = *self;
        for p in 1..=max {
            t = t.multiply(d);
            if t.num * self.den == self.num * t.den {
                return Some(p);
            }
        }
        None
    }
}

/// Ray of angle `angle ∈ [0, 1)` over at most `levels` potential levels, each dividing the
/// potential by `d`.
pub fn polynomial_ray(f: &UnimodalMap, angle: Angle, levels: usize) -> Result<Ray> {
    let d = f.d;
    let (kappa, c) = unicritical(f);
    let iterate = |w: C64, n: usize| -> (C64, C64) {
        let mut z = w;
        let mut dz = C64::new(1.0, 0.0);
        for _ in 0..n {
            dz *= z.powu(d - 1) * d as f64;
            z = z.powu(d) + c;
        }
        (z, dz)
    };
    let g0 = libm::log(RAY_ESCAPE);
    let mut w = C64::from_polar(RAY_ESCAPE, core::f64::consts::TAU * angle.turns());
    let mut pts = alloc::vec![w * kappa];
    let total = levels * RAY_SHARPNESS;
    for k in 1..=total {
        let n = k.div_ceil(RAY_SHARPNESS);
        let pot = g0 * libm::pow(d as f64, -(k as f64) / RAY_SHARPNESS as f64);
        let mut t = angle;
        for _ in 0..n {
            t = t.multiply(d);
        }
        let radius = pot * libm::pow(d as f64, n as f64);
        let target = C64::from_polar(libm::exp(radius), core::f64::consts::TAU * t.turns());
        let mut ok = false;
        let mut last = f64::INFINITY;
        for _ in 0..60 {
            let (p, dp) = iterate(w, n);
            let step = (p - target) / dp;
            let s = step.norm();
            // converged, or stalled at the rounding floor with a small relative residual
            if s <= 1e-15 * w.norm() || (s > 0.5 * last && (p - target).norm() < 1e-8 * target.norm()) {
                ok = true;
                break;
            }
            w -= step;
            last = s;
            if !(w.norm() < 1e6) {
                break;
            }
        }
        if !ok {
            // the ray has reached binary64 resolution near its landing point
            if k <= RAY_SHARPNESS {
                return Err(Error::NoConvergence { iterations: k });
            }
            break;
        }
        pts.push(w * kappa);
    }
    let resolved_levels = (pts.len() - 1) / RAY_SHARPNESS;
    let tail = &pts[pts.len() - pts.len() / 3..];
    let tail_diameter = fast_diameter(tail);
    let landing = (tail_diameter < TOL_LAND).then(|| *pts.last().unwrap());
    Ok(Ray { angle, points: pts, resolved_levels, tail_diameter, landing })
}

/// Newton refinement of a landing point as a periodic point of period `p`; returns the point,
/// the residual `|f^p(z) − z|` and the multiplier modulus.
pub fn refine_landing(f: &UnimodalMap, z0: C64, p: u32) -> Result<(C64, f64, f64)> {
    let poly: Polynomial = (*f).into();
    let orbit = |z: C64| {
        let mut w = z;
        let mut dw = C64::new(1.0, 0.0);
        for _ in 0..p {
            dw *= poly.derivative_complex(w);
            w = poly.eval_complex(w);
        }
        (w, dw)
    };
    let mut z = z0;
    for _ in 0..50 {
        let (w, dw) = orbit(z);
        let step = (w - z) / (dw - 1.0);
        z -= step;
        if step.norm() < 1e-15 {
            break;
        }
    }
    let (w, dw) = orbit(z);
    Ok((z, (w - z).norm(), dw.norm()))
}

/// Shrinking of pieces `comp_z G^{−k}(V_{n+j})` around precritical points `z`, `G^k(z) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkSample {
    pub z: C64,
    /// `k` with `G^k(z) = 0`.
    pub depth: usize,
    pub diameters: Vec<f64>,
    /// `exp` of the fitted slope of `log diam` against `j`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkReport {
    pub samples: Vec<ShrinkSample>,
    /// Attempts rejected because the pullback escaped or the point stayed on ℝ.
    pub rejected: usize,
}

impl ShrinkReport {
    pub fn max_ratio(&self) -> f64 {
        self.samples.iter().map(|s| s.ratio).fold(0.0, f64::max)
    }
}

/// Backward orbit of 0 with seeded branches. Leaves ℝ after `min_depth`, then
/// takes up to three more seeded steps (preimages of non-real points stay off ℝ).
fn precritical_chain<B: JetSource>(g: &AHPLMap<B>, rng: &mut ChaCha8Rng, min_depth: usize, max_depth: usize) -> Option<Vec<C64>> {
    let mut chain = alloc::vec![C64::new(0.0, 0.0)];
    let mut w = chain[0];
    let mut stop = None;
    for k in 1..=max_depth {
        let b = rng.gen_range(0..g.degree as usize);
        w = g.preimage(w, b).ok()?;
        chain.push(w);
        if stop.is_none() && k >= min_depth && w.im.abs() > 1e-3 * g.c_v {
            stop = Some((k + rng.gen_range(0..=3)).min(max_depth));
        }
        if stop == Some(k) {
            chain.reverse();
            return Some(chain);
        }
    }
    None
}

/// Piece diameters for `j = 1..=depth` at each of `count` precritical samples.
pub fn shrinking_diagnostic<B: JetSource>(
    g: &AHPLMap<B>,
    tower: &RenormalizationTower,
    count: usize,
    depth: usize,
    points: usize,
    seed: u64,
) -> Result<ShrinkReport> {
    let samples = precritical_samples(g, count, seed);
    let radii = piece_radii(g, tower, depth)?;
    let mut out = ShrinkReport { samples: Vec::new(), rejected: 0 };
    for chain in samples {
        match shrink_sample(g, &chain, &radii, points) {
            Ok(s) => out.samples.push(s),
            Err(_) => out.rejected += 1,
        }
    }
    Ok(out)
}

/// Seeded precritical orbits `z = z_0, …, z_k = 0`, off ℝ at `z_0`.
pub fn precritical_samples<B: JetSource>(g: &AHPLMap<B>, count: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 64 * count {
        attempts += 1;
        if let Some(c) = precritical_chain(g, &mut rng, 2, 12) {
            out.push(c);
        }
    }
    out
}

/// `c_V |λ_{n+j}/λ_n|` for `j = 1..=depth`, limited by the tower depth.
pub fn piece_radii<B>(g: &AHPLMap<B>, tower: &RenormalizationTower, depth: usize) -> Result<Vec<f64>> {
    let n = g.level;
    let top = (n + depth).min(tower.depth());
    if top <= n + 1 {
        return Err(Error::LevelMissing { level: n + 2 });
    }
    let lam = tower.level(n)?.lambda;
    (n + 1..=top).map(|m| Ok(g.c_v * (tower.level(m)?.lambda / lam).abs())).collect()
}

/// Diameters of the pulled-back pieces along one precritical orbit.
pub fn shrink_sample<B: JetSource>(g: &AHPLMap<B>, chain: &[C64], radii: &[f64], points: usize) -> Result<ShrinkSample> {
    let k = chain.len() - 1;
    let mut diameters = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut cur = circle(C64::new(0.0, 0.0), r, points);
        for i in (0..k).rev() {
            let next = g.pullback_curve(&cur, chain[i])?;
            cur = resample_closed(&next, points);
        }
        diameters.push(fast_diameter(&cur));
    }
    let xs: Vec<f64> = (0..diameters.len()).map(|j| j as f64).collect();
    let ys: Vec<f64> = diameters.iter().map(|d| libm::log(*d)).collect();
    let ratio = libm::exp(linear_fit(&xs, &ys).0);
    Ok(ShrinkSample { z: chain[0], depth: k, diameters, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ahpl::{build_domains, DomainOptions};
    use crate::extension::extend;
    use crate::unimodal::{build_tower, feigenbaum_parameter, TowerOptions};

    fn map_at(a: f64, level: usize, depth: usize) -> (AHPLMap<UnimodalMap>, RenormalizationTower) {
        let f = UnimodalMap::quadratic(a);
        let tower = build_tower(&f, depth, TowerOptions::default()).unwrap();
        let opts = DomainOptions { trace_points: 512, ..DomainOptions::default() };
        (build_domains(&extend(f, 3).unwrap(), Some(f.into()), &tower, level, 2, &opts).unwrap(), tower)
    }

    #[test]
    fn chebyshev_beta() {
        let f = UnimodalMap::quadratic(2.0);
        let tower = build_tower(&f, 0, TowerOptions::default()).unwrap();
        let (b, m) = beta_fixed_point(&tower, 0).unwrap();
        assert!((b + 1.0).abs() < 1e-15);
        assert!((m - 4.0).abs() < 1e-14);
    }

    #[test]
    fn beta_bounds_the_invariant_interval() {
        let a = feigenbaum_parameter(2, 1e-12).unwrap();
        let f = UnimodalMap::quadratic(a);
        let tower = build_tower(&f, 10, TowerOptions::default()).unwrap();
        for n in 0..=10 {
            let (b, m) = beta_fixed_point(&tower, n).unwrap();
            let lam = tower.level(n).unwrap().lambda;
            assert!(m > 1.0);
            assert!(b.abs() > lam.abs());
            let g = tower.renormalized(n).unwrap();
            let r = (b / lam).abs();
            for k in 0..=64 {
                let x = -r + 2.0 * r * k as f64 / 64.0;
                assert!(g.eval(DoubleDouble::from_f64(x)).to_f64().abs() <= r * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn itineraries() {
        let f = UnimodalMap::quadratic(1.7);
        let p: Polynomial = f.into();
        let (g, _) = map_at(1.7, 0, 0);
        assert_eq!(conjugacy_evidence(&g, &p, 500).unwrap().first_disagreement, None);
        let other: Polynomial = UnimodalMap::quadratic(1.701).into();
        assert!(conjugacy_evidence(&g, &other, 500).unwrap().first_disagreement.is_some());
        assert!(matches!(itinerary(|x| 3.0 * x, 1.0, 10, 2.0), Err(Error::OrbitLeftInterval { index: 1 })));
    }

    #[test]
    fn chebyshev_rays_land_at_beta_and_its_preimage() {
        let f = UnimodalMap::quadratic(2.0);
        let r0 = polynomial_ray(&f, Angle::new(0, 1).unwrap(), 40).unwrap();
        let z = r0.landing.unwrap();
        assert!((z + 1.0).norm() < 1e-6);
        let (z, res, mult) = refine_landing(&f, z, 1).unwrap();
        assert!((z + 1.0).norm() < 1e-14 && res < 1e-14 && (mult - 4.0).abs() < 1e-12);
        let r1 = polynomial_ray(&f, Angle::new(1, 2).unwrap(), 40).unwrap();
        assert!((r1.landing.unwrap() - 1.0).norm() < 1e-6);
        // points of the zero ray lie on (−∞, −1)
        assert!(r0.points.iter().all(|p| p.im.abs() < 1e-12 && p.re < -1.0));
    }

    #[test]
    fn rays_are_functorial() {
        let f = UnimodalMap::quadratic(1.4);
        let p: Polynomial = f.into();
        let a = polynomial_ray(&f, Angle::new(1, 7).unwrap(), 12).unwrap();
        let b = polynomial_ray(&f, Angle::new(2, 7).unwrap(), 12).unwrap();
        for k in RAY_SHARPNESS..a.points.len().min(b.points.len() + RAY_SHARPNESS) {
            let img = p.eval_complex(a.points[k]);
            assert!((img - b.points[k - RAY_SHARPNESS]).norm() < 1e-9 * img.norm().max(1.0));
        }
    }

    #[test]
    fn feigenbaum_alpha_rays() {
        let a = feigenbaum_parameter(2, 1e-12).unwrap();
        let f = UnimodalMap::quadratic(a);
        let alpha = refine_landing(&f, C64::new(0.56, 0.0), 1).unwrap().0;
        for (num, den, p) in [(0, 1, 1), (1, 3, 2), (2, 3, 2)] {
            let t = Angle::new(num, den).unwrap();
            assert_eq!(t.period(2, 10), Some(p));
            let r = polynomial_ray(&f, t, 80).unwrap();
            let z = r.landing.expect("ray lands");
            let (z, res, mult) = refine_landing(&f, z, p).unwrap();
            assert!(res < 1e-8 && mult > 1.0, "t={num}/{den} res={res} mult={mult}");
            if den == 3 {
                // both rays of period two land at the fixed point α
                assert!((z - alpha).norm() < 1e-8);
            }
        }
        assert_eq!(Angle::new(1, 2).unwrap().period(2, 10), None);
        assert!(Angle::new(3, 3).is_err());
    }

    #[test]
    fn chebyshev_nest_converges_to_the_segment() {
        let (g, _) = map_at(2.0, 0, 0);
        let nest = equipotential_nest(&g, C64::new(0.0, 0.0), 5, 512).unwrap();
        for w in nest.euclid_diam.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        for j in 1..nest.curves.len() {
            for z in &nest.curves[j] {
                assert!(winding_number(&nest.curves[j - 1], *z) != 0);
            }
        }
        assert!(nest.euclid_diam[5] > 2.0);
        assert!(nest.euclid_diam[5] - 2.0 < 0.5 * (nest.euclid_diam[1] - 2.0));
        // X_1 is U
        for z in &nest.curves[1] {
            assert!(((1.0 - 2.0 * z * z).norm() - 2.0).abs() < 1e-3);
        }
    }

    #[test]
    fn shrinking_at_shallow_level() {
        let a = feigenbaum_parameter(2, 1e-12).unwrap();
        let (g, tower) = map_at(a, 2, 8);
        let rep = shrinking_diagnostic(&g, &tower, 4, 5, 96, 7).unwrap();
        assert_eq!(rep.samples.len(), 4);
        assert!(rep.max_ratio() < 0.95, "{rep:?}");
    }
}
