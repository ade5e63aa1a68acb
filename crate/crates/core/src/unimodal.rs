//! Even unimodal maps `1 - a|x|^d`, renormalization detection, towers and parameter search.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::{DoubleDouble, Scalar};

pub const FAMILY_ID: &str = "one-minus-a-x-to-d";

/// An even map with a single critical point at 0, decreasing in |x| on its domain.
pub trait EvenMap {
    fn eval<S: Scalar>(&self, x: S) -> S;
    /// Value and derivatives of order 1..=3.
    fn jet<S: Scalar>(&self, x: S) -> [S; 4];
}

/// `f(x) = 1 - a x^d` with `d` even.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnimodalMap {
    pub a: f64,
    pub d: u32,
}

impl UnimodalMap {
    pub fn new(a: f64, d: u32) -> Result<Self> {
        if d < 2 || d % 2 != 0 {
            return Err(Error::InvalidArgument("critical order must be even and >= 2"));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidArgument("parameter must be positive"));
        }
        Ok(Self { a, d })
    }

    pub fn quadratic(a: f64) -> Self {
        Self { a, d: 2 }
    }

    /// Taylor coefficient of order `k` at `x`, i.e. `f^(k)(x) / k!`.
    pub fn taylor_coefficient(&self, x: f64, k: usize) -> f64 {
        let d = self.d as usize;
        if k == 0 {
            return 1.0 - self.a * Scalar::powi(x, self.d);
        }
        if k > d {
            return 0.0;
        }
        -self.a * binomial(d, k) * Scalar::powi(x, (d - k) as u32)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

impl EvenMap for UnimodalMap {
    fn eval<S: Scalar>(&self, x: S) -> S {
        S::one() - S::from_f64(self.a) * x.powi(self.d)
    }

    fn jet<S: Scalar>(&self, x: S) -> [S; 4] {
        let a = S::from_f64(self.a);
        let d = self.d;
        let df = d as f64;
        let f0 = S::one() - a * x.powi(d);
        let f1 = -a * S::from_f64(df) * x.powi(d - 1);
        let f2 = -a * S::from_f64(df * (df - 1.0)) * x.powi(d - 2);
        let f3 = if d >= 3 {
            -a * S::from_f64(df * (df - 1.0) * (df - 2.0)) * x.powi(d - 3)
        } else {
            S::zero()
        };
        [f0, f1, f2, f3]
    }
}

/// Third-order jet of `f ∘ u` given the jet of `u` and derivatives of `f` at `u`.
pub fn compose_jet3<S: Scalar>(f: [S; 4], u: [S; 4]) -> [S; 4] {
    let three = S::from_f64(3.0);
    [
        f[0],
        f[1] * u[1],
        f[2] * u[1] * u[1] + f[1] * u[2],
        f[3] * u[1] * u[1] * u[1] + three * f[2] * u[1] * u[2] + f[1] * u[3],
    ]
}

/// `x ↦ λ⁻¹ f^q(λ x)`, evaluated by iterating the base map.
#[derive(Debug, Clone, Copy)]
pub struct Renormalized {
    pub base: UnimodalMap,
    pub q: u64,
    pub lambda: DoubleDouble,
}

impl Renormalized {
    pub fn identity_level(base: UnimodalMap) -> Self {
        Self { base, q: 1, lambda: DoubleDouble::one() }
    }

    pub fn lambda_f64(&self) -> f64 {
        self.lambda.to_f64()
    }

    fn lambda_as<S: Scalar>(&self) -> S {
        S::from_f64(self.lambda.hi) + S::from_f64(self.lambda.lo)
    }
}

impl EvenMap for Renormalized {
    fn eval<S: Scalar>(&self, x: S) -> S {
        let lam: S = self.lambda_as();
        let mut y = lam * x;
        for _ in 0..self.q {
            y = self.base.eval(y);
        }
        y / lam
    }

    fn jet<S: Scalar>(&self, x: S) -> [S; 4] {
        let lam: S = self.lambda_as();
        let mut u = [lam * x, lam, S::zero(), S::zero()];
        for _ in 0..self.q {
            u = compose_jet3(self.base.jet(u[0]), u);
        }
        [u[0] / lam, u[1] / lam, u[2] / lam, u[3] / lam]
    }
}

/// Exact image of `[lo, hi]` under an even map decreasing in |x|.
pub fn interval_image<S: Scalar, M: EvenMap>(g: &M, lo: S, hi: S) -> (S, S) {
    let zero = S::zero();
    if lo <= zero && zero <= hi {
        let m = if -lo > hi { -lo } else { hi };
        (g.eval(m), g.eval(zero))
    } else if lo > zero {
        (g.eval(hi), g.eval(lo))
    } else {
        (g.eval(-lo), g.eval(-hi))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DetectOptions {
    pub p_max: u32,
    pub slack: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self { p_max: 64, slack: 1e-13 }
    }
}

fn qualifies<M: EvenMap>(g: &M, p: u32, slack: f64) -> Option<DoubleDouble> {
    let mut lam = DoubleDouble::zero();
    for _ in 0..p {
        lam = g.eval(lam);
    }
    let r = lam.abs();
    let zero = DoubleDouble::zero();
    let (mut lo, mut hi) = (zero, r);
    for _ in 1..p {
        let (l, h) = interval_image(g, lo, hi);
        if l < zero && zero < h {
            return None;
        }
        lo = l;
        hi = h;
    }
    let (l, h) = interval_image(g, lo, hi);
    let s = DoubleDouble::from_f64(slack);
    if l >= -r - s && h <= r + s {
        Some(lam)
    } else {
        None
    }
}

fn detect_dd<M: EvenMap>(g: &M, opts: DetectOptions) -> Result<Option<(u32, DoubleDouble)>> {
    for p in 2..=opts.p_max {
        if let Some(lam) = qualifies(g, p, opts.slack) {
            if lam.to_f64() == 0.0 {
                return Err(Error::SuperstableDegenerate { period: p });
            }
            return Ok(Some((p, lam)));
        }
    }
    Ok(None)
}

/// Smallest period `p > 1` of a renormalization of `g`, with `λ = g^p(0)`.
pub fn detect_renormalization<M: EvenMap>(g: &M, opts: DetectOptions) -> Result<Option<(u32, f64)>> {
    Ok(detect_dd(g, opts)?.map(|(p, l)| (p, l.to_f64())))
}

/// Whether period `p` passes the renormalization predicate for `g`; periods above the cap are rejected.
pub fn check_period<M: EvenMap>(g: &M, p: u32, opts: DetectOptions) -> Result<Option<f64>> {
    if p > opts.p_max {
        return Err(Error::PeriodCapExceeded { p_max: opts.p_max });
    }
    if p < 2 {
        return Err(Error::InvalidArgument("period must exceed 1"));
    }
    Ok(qualifies(g, p, opts.slack).map(|l| l.to_f64()))
}

/// `Rf` for a single renormalization step of the base map.
pub fn renormalize(f: &UnimodalMap, opts: DetectOptions) -> Result<Renormalized> {
    let g = Renormalized::identity_level(*f);
    match detect_dd(&g, opts)? {
        Some((p, lam)) => Ok(Renormalized { base: *f, q: p as u64, lambda: lam }),
        None => Err(Error::NotRenormalizable { level: 0 }),
    }
}

#[derive(Debug, Clone)]
pub struct TowerLevel {
    pub n: usize,
    /// Period of `R^n f`; unknown for the deepest level.
    pub a: Option<u32>,
    pub q: u64,
    pub lambda: f64,
    pub lambda_dd: DoubleDouble,
    /// `Δ_{i,n}` for `0 <= i < q`, empty when intervals were not requested.
    pub intervals: Vec<(f64, f64)>,
}

impl TowerLevel {
    pub fn renormalized(&self, base: UnimodalMap) -> Renormalized {
        Renormalized { base, q: self.q, lambda: self.lambda_dd }
    }
}

#[derive(Debug, Clone)]
pub struct RenormalizationTower {
    pub base: UnimodalMap,
    pub levels: Vec<TowerLevel>,
}

#[derive(Debug, Clone, Copy)]
pub struct TowerOptions {
    pub detect: DetectOptions,
    pub precision_floor: f64,
    pub with_intervals: bool,
}

impl Default for TowerOptions {
    fn default() -> Self {
        Self { detect: DetectOptions::default(), precision_floor: 1e-12, with_intervals: true }
    }
}

impl RenormalizationTower {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> Result<&TowerLevel> {
        self.levels.get(n).ok_or(Error::LevelMissing { level: n })
    }

    pub fn periods(&self) -> Vec<u32> {
        self.levels.iter().filter_map(|l| l.a).collect()
    }

    pub fn renormalized(&self, n: usize) -> Result<Renormalized> {
        Ok(self.level(n)?.renormalized(self.base))
    }

    /// Largest pairwise interior overlap among the intervals of level `n`.
    pub fn overlap_residual(&self, n: usize) -> Result<f64> {
        let mut iv = self.level(n)?.intervals.clone();
        iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
        let mut worst = 0.0f64;
        let mut reach = f64::NEG_INFINITY;
        for &(lo, hi) in &iv {
            if reach > lo {
                worst = worst.max(reach.min(hi) - lo);
            }
            reach = reach.max(hi);
        }
        Ok(worst)
    }

    /// Largest amount by which an interval of level `n + 1` sticks out of its parent.
    pub fn nesting_residual(&self, n: usize) -> Result<f64> {
        let parent = self.level(n)?;
        let child = self.level(n + 1)?;
        let mut worst = 0.0f64;
        for (i, &(lo, hi)) in child.intervals.iter().enumerate() {
            let (plo, phi) = parent.intervals[i % parent.intervals.len()];
            worst = worst.max(plo - lo).max(hi - phi);
        }
        Ok(worst)
    }
}

fn level_intervals(f: &UnimodalMap, q: u64, r: DoubleDouble) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(q as usize);
    let (mut lo, mut hi) = (-r, r);
    for _ in 0..q {
        out.push((lo.to_f64(), hi.to_f64()));
        let (l, h) = interval_image(f, lo, hi);
        lo = l;
        hi = h;
    }
    out
}

fn critical_value_dd(f: &UnimodalMap, q: u64) -> DoubleDouble {
    let mut x = DoubleDouble::zero();
    for _ in 0..q {
        x = f.eval(x);
    }
    x
}

/// Renormalization tower of depth `depth` (levels `0..=depth`).
pub fn build_tower(f: &UnimodalMap, depth: usize, opts: TowerOptions) -> Result<RenormalizationTower> {
    let mut levels = vec![TowerLevel {
        n: 0,
        a: None,
        q: 1,
        lambda: 1.0,
        lambda_dd: DoubleDouble::one(),
        intervals: if opts.with_intervals { vec![(-1.0, 1.0)] } else { Vec::new() },
    }];
    for n in 0..depth {
        let g = levels[n].renormalized(*f);
        let (p, _) = detect_dd(&g, opts.detect)?.ok_or(Error::NotRenormalizable { level: n })?;
        let q = levels[n].q * p as u64;
        let lam = critical_value_dd(f, q);
        if lam.abs().to_f64() < opts.precision_floor {
            return Err(Error::PrecisionExhausted { level: n + 1, lambda: lam.to_f64() });
        }
        levels[n].a = Some(p);
        let intervals = if opts.with_intervals { level_intervals(f, q, lam.abs()) } else { Vec::new() };
        levels.push(TowerLevel { n: n + 1, a: None, q, lambda: lam.to_f64(), lambda_dd: lam, intervals });
    }
    let tower = RenormalizationTower { base: *f, levels };
    if opts.with_intervals {
        let tol = 1e-13;
        for n in 0..=depth {
            if tower.overlap_residual(n)? > tol {
                return Err(Error::NotRenormalizable { level: n });
            }
            if n < depth && tower.nesting_residual(n)? > tol {
                return Err(Error::NotRenormalizable { level: n });
            }
        }
    }
    Ok(tower)
}

/// Target combinatorics for [`find_parameter`].
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Exactly these first periods.
    Prefix(Vec<u32>),
    /// The infinite sequence repeating this pattern.
    Periodic(Vec<u32>),
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub bracket: (f64, f64),
    pub tol: f64,
    pub max_levels: usize,
    pub max_period_log2: u32,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { bracket: (0.75, 2.0), tol: 1e-12, max_levels: 24, max_period_log2: 22 }
    }
}

fn critical_orbit_da(a: DoubleDouble, d: u32, q: u64) -> (DoubleDouble, DoubleDouble) {
    let mut x = DoubleDouble::zero();
    let mut dx = DoubleDouble::zero();
    let df = DoubleDouble::from_f64(d as f64);
    for _ in 0..q {
        let xd1 = x.powi(d - 1);
        let xd = xd1 * x;
        let ndx = -xd - a * df * xd1 * dx;
        x = DoubleDouble::one() - a * xd;
        dx = ndx;
    }
    (x, dx)
}

fn critical_orbit_f64(a: f64, d: u32, q: u64) -> f64 {
    let f = UnimodalMap { a, d };
    let mut x = 0.0f64;
    for _ in 0..q {
        x = f.eval(x);
    }
    x
}

fn bisect_root(d: u32, q: u64, mut lo: DoubleDouble, mut hi: DoubleDouble) -> DoubleDouble {
    let flo = critical_orbit_da(lo, d, q).0;
    let lo_sign = flo.hi > 0.0;
    let two = DoubleDouble::from_f64(2.0);
    for _ in 0..110 {
        let mid = (lo + hi) / two;
        if (hi - lo).to_f64() <= 1e-30 * mid.to_f64().abs() {
            break;
        }
        let fm = critical_orbit_da(mid, d, q).0;
        if fm.hi == 0.0 {
            return mid;
        }
        if (fm.hi > 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / two
}

fn newton_root(d: u32, q: u64, guess: DoubleDouble, max_step: f64) -> Option<DoubleDouble> {
    let mut a = guess;
    for _ in 0..60 {
        let (g, dg) = critical_orbit_da(a, d, q);
        if dg.to_f64() == 0.0 {
            return None;
        }
        let step = g / dg;
        a = a - step;
        if (a - guess).abs().to_f64() > max_step {
            return None;
        }
        if step.abs().to_f64() <= 1e-26 * a.to_f64().abs() {
            return Some(a);
        }
    }
    let (g, _) = critical_orbit_da(a, d, q);
    if g.abs().to_f64() < 1e-20 {
        Some(a)
    } else {
        None
    }
}

/// Whether the superstable parameter `a` has exactly the combinatorics `periods`.
fn superstable_matches(d: u32, a: f64, periods: &[u32]) -> bool {
    let k = periods.len();
    let f = UnimodalMap { a, d };
    let opts = TowerOptions { precision_floor: 1e-13, with_intervals: false, ..TowerOptions::default() };
    let Ok(tower) = build_tower(&f, k - 1, opts) else {
        return false;
    };
    if tower.periods() != periods[..k - 1] {
        return false;
    }
    let g = tower.levels[k - 1].renormalized(f);
    let want = periods[k - 1];
    let dopts = DetectOptions { p_max: want.max(2), ..DetectOptions::default() };
    match detect_dd(&g, dopts) {
        Err(Error::SuperstableDegenerate { period }) => period == want,
        Ok(Some((p, _))) => p == want,
        _ => false,
    }
}

fn period_product(periods: &[u32]) -> Option<u64> {
    periods.iter().try_fold(1u64, |acc, &p| acc.checked_mul(p as u64))
}

/// Superstable parameter with the given combinatorics, scanning `(lo, hi)` from the left.
fn scan_superstable(d: u32, periods: &[u32], lo: f64, hi: f64, samples: usize) -> Option<DoubleDouble> {
    let q = period_product(periods)?;
    let h = (hi - lo) / samples as f64;
    let mut prev_a = lo + 0.5 * h;
    let mut prev = critical_orbit_f64(prev_a, d, q);
    for i in 1..samples {
        let a = lo + (i as f64 + 0.5) * h;
        let v = critical_orbit_f64(a, d, q);
        if (v > 0.0) != (prev > 0.0) {
            let root = bisect_root(d, q, DoubleDouble::from_f64(prev_a), DoubleDouble::from_f64(a));
            if superstable_matches(d, root.to_f64(), periods) {
                return Some(root);
            }
        }
        prev = v;
        prev_a = a;
    }
    None
}

fn scan_samples(q: u64) -> usize {
    (4096usize).max(64 * q as usize)
}

/// Parameter of `1 - a x^d` realizing the target combinatorics.
pub fn find_parameter(d: u32, target: &Target, opts: SearchOptions) -> Result<f64> {
    let (lo, hi) = opts.bracket;
    if !(lo < hi) {
        return Err(Error::BracketInvalid { lo, hi });
    }
    match target {
        Target::Prefix(periods) => {
            if periods.is_empty() {
                return Ok(0.5 * (lo + hi));
            }
            if periods.iter().any(|&p| p < 2 || p > DetectOptions::default().p_max) {
                return Err(Error::PeriodCapExceeded { p_max: DetectOptions::default().p_max });
            }
            let q = period_product(periods).ok_or(Error::BracketInvalid { lo, hi })?;
            if q > 1 << 12 {
                return Err(Error::InvalidArgument("prefix period product too large for scanning"));
            }
            let s = scan_superstable(d, periods, lo, hi, scan_samples(q))
                .ok_or(Error::BracketInvalid { lo, hi })?;
            let mut next = periods.clone();
            next.push(2);
            let s0 = s.to_f64();
            let right = scan_superstable(d, &next, s0 + 1e-12, hi, scan_samples(2 * q))
                .ok_or(Error::BracketInvalid { lo, hi })?;
            let a = 0.5 * (s0 + right.to_f64());
            let f = UnimodalMap { a, d };
            let tower = build_tower(&f, periods.len(), TowerOptions::default())?;
            if tower.periods() != *periods {
                return Err(Error::BracketInvalid { lo, hi });
            }
            Ok(a)
        }
        Target::Periodic(pattern) => {
            let s = cascade_dd(d, pattern, opts)?;
            Ok(aitken(&s).to_f64())
        }
    }
}

fn cascade_dd(d: u32, pattern: &[u32], opts: SearchOptions) -> Result<Vec<DoubleDouble>> {
    let (lo, hi) = opts.bracket;
    if pattern.is_empty() || pattern.iter().any(|&p| p < 2) {
        return Err(Error::InvalidArgument("pattern must be non-empty with periods >= 2"));
    }
    let periods_at = |k: usize| -> Vec<u32> { (0..k).map(|i| pattern[i % pattern.len()]).collect() };
    let mut s: Vec<DoubleDouble> = Vec::new();
    for k in 1..=opts.max_levels {
        let periods = periods_at(k);
        let q = period_product(&periods).ok_or(Error::BracketInvalid { lo, hi })?;
        if q > 1u64 << opts.max_period_log2 {
            break;
        }
        let root = if s.len() < 3 {
            let from = s.last().map(|x| x.to_f64() + 1e-12).unwrap_or(lo);
            scan_superstable(d, &periods, from, hi, scan_samples(q.min(1 << 10)))
        } else {
            let n = s.len();
            let g1 = s[n - 1] - s[n - 2];
            let g0 = s[n - 2] - s[n - 3];
            let guess = s[n - 1] + g1 * (g1 / g0);
            newton_root(d, q, guess, 0.5 * g1.abs().to_f64())
                .filter(|r| superstable_matches(d, r.to_f64(), &periods))
                .or_else(|| {
                    let span = 3.0 * g1.abs().to_f64();
                    let base = s[n - 1].to_f64();
                    scan_superstable(d, &periods, base + 1e-15, base + span, 512)
                        .or_else(|| scan_superstable(d, &periods, base - span, base - 1e-15, 512))
                })
        };
        let Some(root) = root else {
            if s.is_empty() {
                return Err(Error::BracketInvalid { lo, hi });
            }
            break;
        };
        s.push(root);
        let n = s.len();
        if n >= 4 {
            let change = (aitken(&s[..n]) - aitken(&s[..n - 1])).abs().to_f64();
            let floor = 4.0 * f64::EPSILON * root.to_f64().abs();
            // Past this gap the f64 parameter no longer resolves the combinatorics check.
            let gap = (s[n - 1] - s[n - 2]).abs().to_f64();
            if change < (1e-3 * opts.tol).max(floor) || gap < 1e4 * floor {
                break;
            }
        }
    }
    Ok(s)
}

fn aitken(s: &[DoubleDouble]) -> DoubleDouble {
    let n = s.len();
    if n < 3 {
        return s[n - 1];
    }
    let d1 = s[n - 1] - s[n - 2];
    let d0 = s[n - 2] - s[n - 3];
    let denom = d1 - d0;
    if denom.to_f64() == 0.0 {
        return s[n - 1];
    }
    s[n - 1] - d1 * d1 / denom
}

/// Superstable parameters of the cascade repeating `pattern`, up to the search limits.
pub fn cascade_superstables(d: u32, pattern: &[u32], opts: SearchOptions) -> Result<Vec<f64>> {
    Ok(cascade_dd(d, pattern, opts)?.iter().map(|x| x.to_f64()).collect())
}

/// Parameter of the period-doubling limit of `1 - a x^d`.
pub fn feigenbaum_parameter(d: u32, tol: f64) -> Result<f64> {
    find_parameter(d, &Target::Periodic(vec![2]), SearchOptions { tol, ..SearchOptions::default() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: &impl Fn(DoubleDouble) -> DoubleDouble, x: f64, h: f64, order: usize) -> f64 {
        let x = DoubleDouble::from_f64(x);
        let hh = DoubleDouble::from_f64(h);
        let two = DoubleDouble::from_f64(2.0);
        let v = match order {
            1 => (f(x + hh) - f(x - hh)) / (two * hh),
            2 => (f(x + hh) - two * f(x) + f(x - hh)) / (hh * hh),
            _ => {
                (f(x + two * hh) - two * f(x + hh) + two * f(x - hh) - f(x - two * hh))
                    / (two * hh * hh * hh)
            }
        };
        v.to_f64()
    }

    #[test]
    fn normalization_and_evenness() {
        for d in [2u32, 4, 6] {
            let f = UnimodalMap::new(1.3, d).unwrap();
            assert_eq!(f.eval(0.0), 1.0);
            assert_eq!(f.jet(0.0f64)[1], 0.0);
            for i in 0..200 {
                let x = -1.0 + i as f64 / 100.0;
                assert!((f.eval(x) - f.eval(-x)).abs() < 1e-14);
                let y = f.eval(x);
                assert!((-1.0..=1.0).contains(&y));
            }
        }
    }

    #[test]
    fn critical_order_lower_bound() {
        let f = UnimodalMap::new(1.4, 4).unwrap();
        for i in 1..100 {
            let x = i as f64 / 100.0;
            assert!(f.jet(x)[1].abs() >= 1.4 * 4.0 * x.powi(3) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        for d in [2u32, 4, 6] {
            let f = UnimodalMap::new(1.37, d).unwrap();
            let e = |x: DoubleDouble| f.eval(x);
            for i in 0..=36 {
                let x = -0.9 + 0.05 * i as f64;
                let j = f.jet(x);
                for k in 1..=3 {
                    let num = fd(&e, x, 1e-5, k);
                    let scale = j[k].abs().max(1.0);
                    assert!((num - j[k]).abs() / scale < 1e-6, "d={d} k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn renormalizable_example() {
        let f = UnimodalMap::quadratic(1.3);
        let (p, lam) = detect_renormalization(&f, DetectOptions::default()).unwrap().unwrap();
        assert_eq!(p, 2);
        assert!((lam + 0.3).abs() < 1e-15);
        let (lo, hi) = interval_image(&f, -0.3, 0.3);
        let (lo, hi) = interval_image(&f, lo, hi);
        assert!((lo + 0.3).abs() < 1e-15);
        assert!((hi + 0.0136).abs() < 1e-4);
    }

    #[test]
    fn chebyshev_not_renormalizable() {
        let f = UnimodalMap::quadratic(2.0);
        assert_eq!(detect_renormalization(&f, DetectOptions::default()).unwrap(), None);
    }

    #[test]
    fn superstable_is_an_error() {
        let f = UnimodalMap::quadratic(1.0);
        assert_eq!(
            detect_renormalization(&f, DetectOptions::default()),
            Err(Error::SuperstableDegenerate { period: 2 })
        );
    }

    #[test]
    fn period_cap() {
        let f = UnimodalMap::quadratic(1.3);
        let opts = DetectOptions { p_max: 8, ..DetectOptions::default() };
        assert_eq!(check_period(&f, 9, opts), Err(Error::PeriodCapExceeded { p_max: 8 }));
        assert!(check_period(&f, 2, opts).unwrap().is_some());
    }

    #[test]
    fn renormalize_one_step() {
        let f = UnimodalMap::quadratic(1.3);
        let g = renormalize(&f, DetectOptions::default()).unwrap();
        assert_eq!(g.eval(0.0f64), 1.0);
        assert_eq!(g.jet(0.0f64)[1], 0.0);
        let want = (1.0 - 1.3 * (1.0 - 1.3 * 0.09f64).powi(2)) / -0.3;
        assert!((g.eval(1.0f64) - want).abs() < 1e-14);
        assert!((g.eval(1.0f64) - 0.04537).abs() < 1e-4);
    }

    #[test]
    fn renormalized_jets_match_finite_differences() {
        let f = UnimodalMap::quadratic(1.3);
        let g = renormalize(&f, DetectOptions::default()).unwrap();
        let e = |x: DoubleDouble| g.eval(x);
        for i in 0..=18 {
            let x = -0.9 + 0.1 * i as f64;
            let j = g.jet(x);
            for k in 1..=3 {
                assert!((fd(&e, x, 1e-5, k) - j[k]).abs() < 1e-6 * j[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn depth_zero_tower() {
        let t = build_tower(&UnimodalMap::quadratic(1.3), 0, TowerOptions::default()).unwrap();
        assert_eq!(t.levels.len(), 1);
        assert_eq!(t.levels[0].q, 1);
        assert_eq!(t.levels[0].lambda, 1.0);
        assert_eq!(t.levels[0].intervals, vec![(-1.0, 1.0)]);
    }

    #[test]
    fn superstable_cascade_values() {
        let opts = SearchOptions { max_levels: 3, ..SearchOptions::default() };
        let s = cascade_superstables(2, &[2], opts).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-14);
        assert!((s[1] - 1.3107026413).abs() < 1e-8);
        assert!((s[2] - 1.3815474844).abs() < 1e-8);
    }

    #[test]
    fn empty_prefix_returns_midpoint() {
        let a = find_parameter(2, &Target::Prefix(vec![]), SearchOptions::default()).unwrap();
        assert_eq!(a, 1.375);
    }

    #[test]
    fn period_two_window() {
        let a = find_parameter(2, &Target::Prefix(vec![2]), SearchOptions::default()).unwrap();
        assert!(a > 0.75 && a < 1.401155189);
        let t = build_tower(&UnimodalMap::quadratic(a), 1, TowerOptions::default()).unwrap();
        assert_eq!(t.periods(), vec![2]);
    }

    #[test]
    fn invalid_bracket() {
        let opts = SearchOptions { bracket: (0.1, 0.7), ..SearchOptions::default() };
        assert!(matches!(
            find_parameter(2, &Target::Prefix(vec![2]), opts),
            Err(Error::BracketInvalid { .. })
        ));
    }
}
