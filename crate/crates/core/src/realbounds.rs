//! Real a priori bounds: nested ratios, the sums S_n and S_n*, derivative comparability, C² norms.

use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{DoubleDouble, Scalar};
use crate::sum::NeumaierSum;
use crate::unimodal::{EvenMap, RenormalizationTower, UnimodalMap};

fn len(iv: (f64, f64)) -> f64 {
    iv.1 - iv.0
}

/// Euclidean distance from the critical point 0 to the interval.
pub fn dist_to_critical(iv: (f64, f64)) -> f64 {
    if iv.0 <= 0.0 && 0.0 <= iv.1 {
        0.0
    } else {
        iv.0.abs().min(iv.1.abs())
    }
}

fn intervals(tower: &RenormalizationTower, n: usize) -> Result<&[(f64, f64)]> {
    let lvl = tower.level(n)?;
    if lvl.intervals.is_empty() {
        return Err(Error::LevelMissing { level: n });
    }
    Ok(&lvl.intervals)
}

/// Minimum and maximum of `|Δ|/|Δ*|` over intervals of level `n + 1` and their parents.
pub fn scaling_ratios(tower: &RenormalizationTower, n: usize) -> Result<(f64, f64)> {
    let parent = intervals(tower, n)?;
    let child = intervals(tower, n + 1)?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (i, &c) in child.iter().enumerate() {
        let r = len(c) / len(parent[i % parent.len()]);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// Number of level `n + 1` intervals inside each level `n` interval.
pub fn children_per_parent(tower: &RenormalizationTower, n: usize) -> Result<Vec<usize>> {
    let parent = intervals(tower, n)?;
    let child = intervals(tower, n + 1)?;
    let mut counts = alloc::vec![0usize; parent.len()];
    for &(lo, hi) in child {
        for (k, &(plo, phi)) in parent.iter().enumerate() {
            if lo >= plo - 1e-13 && hi <= phi + 1e-13 {
                counts[k] += 1;
                break;
            }
        }
    }
    Ok(counts)
}

fn sn_terms(iv: &[(f64, f64)]) -> impl DoubleEndedIterator<Item = f64> + '_ {
    iv.iter().skip(1).map(|&d| len(d) / dist_to_critical(d))
}

/// `S_n = Σ_{Δ ≠ Δ_{0,n}} |Δ| / d(0, Δ)`.
pub fn compute_sn(tower: &RenormalizationTower, n: usize) -> Result<f64> {
    let mut s = NeumaierSum::new();
    sn_terms(intervals(tower, n)?).for_each(|t| s.add(t));
    Ok(s.value())
}

/// `S_n` summed in reverse order, for order-independence checks.
pub fn compute_sn_reversed(tower: &RenormalizationTower, n: usize) -> Result<f64> {
    let mut s = NeumaierSum::new();
    sn_terms(intervals(tower, n)?).rev().for_each(|t| s.add(t));
    Ok(s.value())
}

/// `S_n* = Σ_{i=1}^{q_n-1} |Δ_i|²/|Δ_{i+1}| · d(0,Δ_i)^{d-2}`, with `Δ_{q_n}` read as `Δ_0`.
pub fn compute_sn_star(tower: &RenormalizationTower, n: usize, d: u32) -> Result<f64> {
    let iv = intervals(tower, n)?;
    let q = iv.len();
    let mut s = NeumaierSum::new();
    for i in 1..q {
        let next = iv[(i + 1) % q];
        let l = len(iv[i]);
        s.add(l * l / len(next) * Scalar::powi(dist_to_critical(iv[i]), d - 2));
    }
    Ok(s.value())
}

/// Largest `C₀` with `|f'(x)| ≥ C₀|x|^{d-1}` on a uniform grid of `[-1, 1]`.
pub fn fit_c0(f: &UnimodalMap, grid: usize) -> f64 {
    let mut c0 = f64::INFINITY;
    for k in 0..=grid {
        let x = -1.0 + 2.0 * k as f64 / grid as f64;
        if x == 0.0 {
            continue;
        }
        let v = f.jet(x)[1].abs() / Scalar::powi(x.abs(), f.d - 1);
        c0 = c0.min(v);
    }
    c0
}

#[derive(Debug, Clone, Copy)]
pub struct ComparabilityOptions {
    pub points_per_interval: usize,
    pub max_pairs: usize,
    pub seed: u64,
}

impl Default for ComparabilityOptions {
    fn default() -> Self {
        Self { points_per_interval: 8, max_pairs: 200, seed: 0x5eed }
    }
}

fn pair_from_index(mut k: usize, m: usize) -> (usize, usize) {
    // Enumerates pairs (i, j) with 1 <= i < j <= m row by row.
    let mut i = 1;
    loop {
        let row = m - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
        i += 1;
    }
}

/// `max{|(f^{j-i})'(x)|·|Δ_i|/|Δ_j|, reciprocal}` over one pair and the sample points of `Δ_i`.
pub fn comparability_for_pair(
    tower: &RenormalizationTower,
    n: usize,
    i: usize,
    j: usize,
    points: usize,
) -> Result<f64> {
    let iv = intervals(tower, n)?;
    let f = tower.base;
    let (lo, hi) = iv[i];
    let scale = len(iv[i]) / len(iv[j]);
    let mut worst = 1.0f64;
    for s in 0..points {
        let x0 = lo + (hi - lo) * (s as f64 + 0.5) / points as f64;
        let mut x = x0;
        let mut der = 1.0f64;
        for _ in i..j {
            der *= f.jet(x)[1];
            x = f.eval(x);
        }
        let v = der.abs() * scale;
        worst = worst.max(v).max(1.0 / v);
    }
    Ok(worst)
}

/// `K̂_n` over all pairs `1 <= i < j <= q_n - 1`, or a seeded subsample of them.
pub fn derivative_comparability(
    tower: &RenormalizationTower,
    n: usize,
    opts: ComparabilityOptions,
) -> Result<f64> {
    let q = intervals(tower, n)?.len();
    if q < 3 {
        return Ok(1.0);
    }
    let m = q - 1;
    let total = m * (m - 1) / 2;
    let picks: Vec<usize> = if total <= opts.max_pairs {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ n as u64);
        let mut v = sample(&mut rng, total, opts.max_pairs).into_vec();
        v.sort_unstable();
        v
    };
    let mut k_hat = 1.0f64;
    for k in picks {
        let (i, j) = pair_from_index(k, m);
        k_hat = k_hat.max(comparability_for_pair(tower, n, i, j, opts.points_per_interval)?);
    }
    Ok(k_hat)
}

/// Grid on `[-1, 1]`: `base` uniform points plus 4x refinement within `1/64` of 0 and ±1.
pub fn norm_grid(base: usize) -> Vec<f64> {
    let mut xs = Vec::with_capacity(base + base / 8 + 8);
    for k in 0..base {
        xs.push(-1.0 + 2.0 * k as f64 / (base - 1) as f64);
    }
    let h = 2.0 / (base - 1) as f64 / 4.0;
    let width = 1.0 / 64.0;
    let count = (width / h) as usize;
    xs.push(0.0);
    for &c in &[-1.0f64, 0.0, 1.0] {
        for k in 1..=count {
            for sgn in [-1.0, 1.0] {
                let x = c + sgn * k as f64 * h;
                if (-1.0..=1.0).contains(&x) {
                    xs.push(x);
                }
            }
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    xs.dedup();
    xs
}

/// `(‖R^n f‖_{C⁰}, ‖R^n f‖_{C¹}, ‖R^n f‖_{C²})` on `[-1, 1]`, each the max over derivative orders up to k.
pub fn renorm_c2_norm(
    tower: &RenormalizationTower,
    n: usize,
    grid: &[f64],
    precision_floor: f64,
) -> Result<(f64, f64, f64)> {
    let lvl = tower.level(n)?;
    if lvl.lambda.abs() < precision_floor {
        return Err(Error::PrecisionExhausted { level: n, lambda: lvl.lambda });
    }
    let g = lvl.renormalized(tower.base);
    let mut sup = [0.0f64; 3];
    for &x in grid {
        let j = g.jet(DoubleDouble::from_f64(x));
        for k in 0..3 {
            sup[k] = sup[k].max(j[k].to_f64().abs());
        }
    }
    let c0 = sup[0];
    let c1 = c0.max(sup[1]);
    let c2 = c1.max(sup[2]);
    Ok((c0, c1, c2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub n: usize,
    pub q: u64,
    pub lambda: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub k_hat: f64,
    pub s_n: f64,
    pub s_n_star: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone)]
pub struct BoundsOptions {
    pub comparability: ComparabilityOptions,
    pub grid_points: usize,
    pub precision_floor: f64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self { comparability: ComparabilityOptions::default(), grid_points: 4096, precision_floor: 1e-12 }
    }
}

/// Report for level `n`; requires level `n + 1` for the nested ratios.
pub fn bounds_report(tower: &RenormalizationTower, n: usize, opts: &BoundsOptions) -> Result<BoundsReport> {
    let (alpha_hat, beta_hat) = scaling_ratios(tower, n)?;
    let grid = norm_grid(opts.grid_points);
    let (c0, c1, c2) = renorm_c2_norm(tower, n, &grid, opts.precision_floor)?;
    let lvl = tower.level(n)?;
    Ok(BoundsReport {
        n,
        q: lvl.q,
        lambda: lvl.lambda,
        alpha_hat,
        beta_hat,
        k_hat: derivative_comparability(tower, n, opts.comparability)?,
        s_n: compute_sn(tower, n)?,
        s_n_star: compute_sn_star(tower, n, tower.base.d)?,
        c0,
        c1,
        c2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unimodal::{build_tower, TowerOptions};

    const A_STAR: f64 = 1.4011551890920506;

    fn tower(depth: usize) -> RenormalizationTower {
        build_tower(&UnimodalMap::quadratic(A_STAR), depth, TowerOptions::default()).unwrap()
    }

    #[test]
    fn first_level_sums_by_hand() {
        let t = tower(2);
        let lam = 1.0 - A_STAR;
        let left = 1.0 - A_STAR * lam * lam;
        let s1 = compute_sn(&t, 1).unwrap();
        assert!((s1 - (1.0 - left) / left).abs() < 1e-14);
        assert!((s1 - 0.291).abs() < 1e-3);
        let star = compute_sn_star(&t, 1, 2).unwrap();
        assert!((star - (1.0 - left).powi(2) / (2.0 * lam.abs())).abs() < 1e-14);
        assert!((star - 0.0631).abs() < 5e-4);
        assert_eq!(compute_sn(&t, 0).unwrap(), 0.0);
    }

    #[test]
    fn ratios_inside_unit_interval() {
        let t = tower(9);
        for n in 0..9 {
            let (a, b) = scaling_ratios(&t, n).unwrap();
            assert!(0.0 < a && a <= b && b < 1.0);
            assert!(children_per_parent(&t, n).unwrap().iter().all(|&c| c == 2));
        }
        let central = t.levels[9].lambda.abs() / t.levels[8].lambda.abs();
        assert!((central - 0.3995).abs() < 1e-4);
    }

    #[test]
    fn mean_value_point_gives_unit_ratio() {
        let t = tower(4);
        let iv = &t.levels[4].intervals;
        let f = t.base;
        let (i, j) = (3usize, 4usize);
        let mut below = false;
        let mut above = false;
        for s in 0..256 {
            let x = iv[i].0 + (iv[i].1 - iv[i].0) * (s as f64 + 0.5) / 256.0;
            let v = f.jet(x)[1].abs() * len(iv[i]) / len(iv[j]);
            below |= v <= 1.0;
            above |= v >= 1.0;
        }
        assert!(below && above);
    }

    #[test]
    fn single_midpoint_sample() {
        let t = tower(3);
        let iv = &t.levels[3].intervals;
        let mid = 0.5 * (iv[1].0 + iv[1].1);
        let want = t.base.jet(mid)[1].abs() * len(iv[1]) / len(iv[2]);
        let got = comparability_for_pair(&t, 3, 1, 2, 1).unwrap();
        assert!((got - want.max(1.0 / want)).abs() < 1e-15);
    }

    #[test]
    fn pair_enumeration_covers_all_pairs() {
        let m = 7;
        let total = m * (m - 1) / 2;
        let pairs: Vec<_> = (0..total).map(|k| pair_from_index(k, m)).collect();
        let mut expected = Vec::new();
        for i in 1..m {
            for j in i + 1..=m {
                expected.push((i, j));
            }
        }
        assert_eq!(pairs, expected);
    }

    #[test]
    fn base_map_norms() {
        let t = build_tower(&UnimodalMap::quadratic(1.4), 0, TowerOptions::default()).unwrap();
        let (c0, c1, c2) = renorm_c2_norm(&t, 0, &norm_grid(4096), 1e-12).unwrap();
        assert_eq!(c0, 1.0);
        assert!((c1 - 2.8).abs() < 1e-14);
        assert!((c2 - 2.8).abs() < 1e-14);
    }

    #[test]
    fn star_sum_dominated_by_sn() {
        let t = tower(8);
        let c0 = fit_c0(&t.base, 4096);
        assert!((c0 - 2.0 * A_STAR).abs() < 1e-12);
        for n in 1..=8 {
            assert!(compute_sn_star(&t, n, 2).unwrap() <= compute_sn(&t, n).unwrap() / c0);
        }
    }

    #[test]
    fn reversed_summation_agrees() {
        let t = tower(10);
        for n in 1..=10 {
            let a = compute_sn(&t, n).unwrap();
            let b = compute_sn_reversed(&t, n).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }
}
