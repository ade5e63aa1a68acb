//! Expansion certificates: the constants `K1`, `K2`, the lower bounds `ξ_n`, the threshold on
//! `r`, sampled checks of the controlled-map conditions, and chain expansion constants.

use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use crate::ahpl::AHPLMap;
use crate::error::{Error, Result};
use crate::extension::{mu_and_k_from_matrix, JetSource};
use crate::hyperbolic::mcmullen_phi_deficit;
use crate::matcalc::{op_norm2, op_norm24, singular_values2, Mat2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub alpha: f64,
    pub delta: f64,
    pub theta: f64,
    /// The control constant `M`; `λ = M⁻¹`.
    pub m: f64,
    pub n0: u32,
    pub r: f64,
    pub c_alpha: f64,
    pub c_theta: f64,
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        if self.n0 < 2 {
            return Err(Error::InvalidN0 { n0: self.n0 });
        }
        if !(self.alpha > 1.0) {
            return Err(Error::InvalidArgument("alpha must exceed 1"));
        }
        if !(self.m > 1.0) {
            return Err(Error::InvalidArgument("M must exceed 1"));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::InvalidArgument("theta must lie in [0, 1)"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidArgument("delta must be positive"));
        }
        if !(self.r > 1.0) {
            return Err(Error::InvalidArgument("r must exceed 1"));
        }
        if !(self.c_alpha >= 0.0 && self.c_theta > 0.0) {
            return Err(Error::InvalidArgument("constants must be non-negative"));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        1.0 / self.m
    }

    /// `(1 − 1/(2α))⁻¹`.
    pub fn a_factor(&self) -> f64 {
        2.0 * self.alpha / (2.0 * self.alpha - 1.0)
    }

    /// `(r − 1)(1 − θ)`.
    pub fn decay(&self) -> f64 {
        (self.r - 1.0) * (1.0 - self.theta)
    }
}

pub fn compute_k1(p: &ControlParams) -> f64 {
    libm::exp(log_k1(p))
}

fn log_k1(p: &ControlParams) -> f64 {
    -libm::log(3.0) - 2.0 * p.c_alpha - 2.0 * p.a_factor() * libm::log(p.m)
}

pub fn compute_k2(p: &ControlParams) -> f64 {
    libm::exp(log_k2(p))
}

fn log_k2(p: &ControlParams) -> f64 {
    libm::log(p.c_theta) - p.decay() * libm::log(p.alpha * p.m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiEntry {
    pub n: u32,
    /// `ξ_n` in binary64; rounds to 1 once both corrections underflow.
    pub value: f64,
    /// `log(ξ_n − 1)` when `ξ_n > 1`.
    pub log_excess: Option<f64>,
}

impl XiEntry {
    pub fn exceeds_one(&self) -> bool {
        self.log_excess.is_some()
    }
}

/// `ξ_n = (1 + K1 λ^{2nA})(1 − K2 λ^{(n−1)(r−1)(1−θ)})`, with the excess over 1 in log form.
pub fn compute_xi(p: &ControlParams, n: u32) -> XiEntry {
    let l = libm::log(p.m);
    let la = log_k1(p) - 2.0 * n as f64 * p.a_factor() * l;
    let lb = log_k2(p) - (n as f64 - 1.0) * p.decay() * l;
    let a = libm::exp(la);
    let b = libm::exp(lb);
    // ξ − 1 = a(1 − b) − b = a[(1 − b) − b/a]
    let inner = (1.0 - b) - libm::exp(lb - la);
    let log_excess = if inner > 0.0 { Some(la + libm::log(inner)) } else { None };
    XiEntry { n, value: (1.0 + a) * (1.0 - b), log_excess }
}

pub fn xi_table(p: &ControlParams, n_max: u32) -> Result<Vec<XiEntry>> {
    p.validate()?;
    Ok((p.n0..=n_max).map(|n| compute_xi(p, n)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    /// `1 + 4 n0 α / ((n0 − 1)(1 − θ)(2α − 1))`.
    pub rhs: f64,
    pub margin: f64,
}

impl Threshold {
    pub fn passes(&self) -> bool {
        self.margin > 0.0
    }
}

pub fn threshold_rhs(n0: u32, theta: f64, alpha: f64) -> Result<f64> {
    if n0 < 2 {
        return Err(Error::InvalidN0 { n0 });
    }
    let n0 = n0 as f64;
    Ok(1.0 + 4.0 * n0 * alpha / ((n0 - 1.0) * (1.0 - theta) * (2.0 * alpha - 1.0)))
}

pub fn check_threshold(p: &ControlParams) -> Result<Threshold> {
    p.validate()?;
    let rhs = threshold_rhs(p.n0, p.theta, p.alpha)?;
    Ok(Threshold { rhs, margin: p.r - rhs })
}

/// `4α(n0(n − 1) − n(n0 − 1))`, positive for `n > n0`.
pub fn auxiliary_margin(alpha: f64, n0: u32, n: u32) -> f64 {
    let (n0, n) = (n0 as f64, n as f64);
    4.0 * alpha * (n0 * (n - 1.0) - n * (n0 - 1.0))
}

/// `log` of `M(λ^{n−1}/(αM))^{r−1}`.
pub fn log_lower_bound_term(p: &ControlParams, n: u32) -> f64 {
    let l = libm::log(p.m);
    l - (p.r - 1.0) * ((n as f64 - 1.0) * l + libm::log(p.alpha * p.m))
}

/// Smallest `N ≥ n0` with `1 + M(λ^{n−1}/(αM))^{r−1} ≤ ξ_n` for all `n ≥ N`.
///
/// Scans to `n_max`; beyond it the inequality persists when `r − 1 ≥ 2A`, because both sides
/// decay geometrically and the bound decays faster. Returns `None` otherwise.
pub fn minimal_n(p: &ControlParams, n_max: u32) -> Result<Option<u32>> {
    p.validate()?;
    if p.r - 1.0 < 2.0 * p.a_factor() {
        return Ok(None);
    }
    let holds = |n: u32| compute_xi(p, n).log_excess.is_some_and(|e| log_lower_bound_term(p, n) <= e);
    if !holds(n_max) {
        return Ok(None);
    }
    let mut n = n_max;
    while n > p.n0 && holds(n - 1) {
        n -= 1;
    }
    Ok(Some(n))
}

/// One sampled condition of the controlled-map definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub id: &'static str,
    pub pass: bool,
    pub measured: Vec<(&'static str, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub params: ControlParams,
    pub k1: f64,
    pub k2: f64,
    pub xi: Vec<XiEntry>,
    pub threshold_margin: f64,
    pub minimal_n: Option<u32>,
    pub conditions: Vec<Condition>,
}

impl CertificateReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }
}

/// Report with the arithmetic only, for parameter sweeps.
pub fn arithmetic_report(p: &ControlParams, n_max: u32) -> Result<CertificateReport> {
    let t = check_threshold(p)?;
    Ok(CertificateReport {
        params: *p,
        k1: compute_k1(p),
        k2: compute_k2(p),
        xi: xi_table(p, n_max)?,
        threshold_margin: t.margin,
        minimal_n: minimal_n(p, n_max.max(p.n0))?,
        conditions: Vec::new(),
    })
}

/// Sampled measurements of a map on `U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    pub c2_norm: f64,
    pub sup_dilatation: f64,
    pub sup_mu: f64,
    /// `sup |μ| / |Im z|^{r−1}`.
    pub mu_decay: f64,
}

/// Grid points inside `U`, rows symmetric about ℝ.
pub fn sample_u<B>(g: &AHPLMap<B>, n: usize) -> Vec<C64> {
    let (mut xr, mut yr) = (0.0f64, 0.0f64);
    for z in &g.u_curve {
        xr = xr.max(z.re.abs());
        yr = yr.max(z.im.abs());
    }
    let mut out = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let x = xr * ((2 * i + 1) as f64 / n as f64 - 1.0);
            let y = yr * ((2 * j + 1) as f64 / n as f64 - 1.0);
            let z = C64::new(x, y);
            if g.in_u(z) {
                out.push(z);
            }
        }
    }
    out
}

/// `C²` norm, dilatation and Beltrami decay of `G` over `U` samples off ℝ.
pub fn measure<B: JetSource>(g: &AHPLMap<B>, r: f64, samples: usize) -> Result<Measurements> {
    let mut m = Measurements { c2_norm: 0.0, sup_dilatation: 1.0, sup_mu: 0.0, mu_decay: 0.0 };
    for z in sample_u(g, samples) {
        let j = g.map_jet2(z)?;
        let d: Mat2 = j.d;
        let c0 = libm::hypot(j.value[0], j.value[1]);
        m.c2_norm = m.c2_norm.max(c0).max(op_norm2(&d)).max(op_norm24(&j.d2));
        if let Ok((mu, k)) = mu_and_k_from_matrix(&d) {
            m.sup_dilatation = m.sup_dilatation.max(k);
            m.sup_mu = m.sup_mu.max(mu.norm());
            if z.im != 0.0 {
                m.mu_decay = m.mu_decay.max(mu.norm() / libm::pow(z.im.abs(), r - 1.0));
            }
        }
    }
    Ok(m)
}

/// Hyperbolic diameter in `Y` of the upper component of `U ∖ U_α`.
pub fn outer_diameter<B>(g: &AHPLMap<B>, alpha: f64, m: f64, samples: usize) -> Result<f64> {
    let cut = 1.0 / (alpha * m);
    let pts: Vec<C64> = sample_u(g, samples).into_iter().filter(|z| z.im > cut).collect();
    let boundary: Vec<C64> = g.u_curve.iter().step_by(16).map(|z| *z * (1.0 - 1e-9)).filter(|z| z.im > cut).collect();
    let all: Vec<C64> = pts.into_iter().chain(boundary).collect();
    g.y_domain().diameter(&all)
}

/// Checks conditions (i)–(vii) on samples. The qc diffeomorphism of the Stoilow factorization is
/// the identity when `μ ≡ 0` on the samples; otherwise (vi) is not measurable and fails.
pub fn check_controlled<B: JetSource>(g: &AHPLMap<B>, p: &ControlParams, samples: usize) -> Result<CertificateReport> {
    let mut rep = arithmetic_report(p, 200)?;
    let meas = measure(g, p.r, samples)?;
    let holomorphic = meas.sup_mu == 0.0;
    let mut c = Vec::with_capacity(7);

    let diam_v = 2.0 * g.c_v;
    let modulus = g.modulus_estimate();
    c.push(Condition {
        id: "i",
        pass: diam_v <= p.m && modulus >= 1.0 / p.m,
        measured: alloc::vec![("diam_v", diam_v), ("modulus", modulus)],
    });
    c.push(Condition { id: "ii", pass: meas.c2_norm <= p.m, measured: alloc::vec![("c2_norm", meas.c2_norm)] });
    c.push(Condition {
        id: "iii",
        pass: meas.sup_dilatation <= 1.0 + p.delta,
        measured: alloc::vec![("sup_k", meas.sup_dilatation)],
    });
    c.push(Condition { id: "iv", pass: meas.mu_decay <= p.m, measured: alloc::vec![("mu_decay", meas.mu_decay)] });

    // (v): D(x + iαy, α|y|) ⊂ V ∖ ℝ for z ∈ U_α
    let cut = 1.0 / (p.alpha * p.m);
    let mut worst: f64 = 0.0;
    for z in sample_u(g, samples).into_iter().chain(g.u_curve.iter().copied()) {
        if z.im != 0.0 && z.im.abs() <= cut {
            let za = C64::new(z.re, p.alpha * z.im);
            worst = worst.max((za.norm() + p.alpha * z.im.abs()) / g.c_v);
        }
    }
    c.push(Condition { id: "v", pass: worst < 1.0, measured: alloc::vec![("max_reach", worst)] });

    c.push(Condition {
        id: "vi",
        pass: holomorphic && 1.0 / p.m <= 1.0 && 1.0 <= p.m,
        measured: alloc::vec![("im_ratio", if holomorphic { 1.0 } else { f64::NAN }), ("rho_ratio", if holomorphic { 1.0 } else { f64::NAN })],
    });

    // Φ(s) < 1 − Cθ δ^{1−θ} compared as log(1 − Φ(s)) > log(Cθ δ^{1−θ})
    let diam = outer_diameter(g, p.alpha, p.m, samples)?;
    let s = diam + 2.0 * p.n0 as f64 * libm::log(p.m);
    let log_deficit = libm::log(mcmullen_phi_deficit(s)?);
    let log_gap = libm::log(p.c_theta) + (1.0 - p.theta) * libm::log(p.delta);
    c.push(Condition {
        id: "vii",
        pass: log_deficit > log_gap,
        measured: alloc::vec![
            ("diam_y", diam),
            ("log_phi_deficit", log_deficit),
            ("log_gap", log_gap),
            ("diam_minus_log_alpha", diam - libm::log(p.alpha)),
        ],
    });
    rep.conditions = c;
    Ok(rep)
}

/// Pullback chain sampled pointwise: `layers[j+1][i] = G(layers[j][i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub layers: Vec<Vec<C64>>,
}

impl Chain {
    /// Images of `samples` points on a circle around `center`, plus the center itself.
    pub fn sample<B: JetSource>(g: &AHPLMap<B>, center: C64, radius: f64, steps: usize, samples: usize) -> Result<Self> {
        let mut first = alloc::vec![center];
        first.extend((0..samples).map(|k| center + C64::from_polar(radius, core::f64::consts::TAU * k as f64 / samples as f64)));
        let mut layers = alloc::vec![first];
        for step in 0..steps {
            let next: Vec<C64> = layers[step].iter().map(|&z| g.map(z)).collect();
            if next.iter().any(|z| !g.in_v(*z)) {
                return Err(Error::OrbitEscaped { step: step + 1 });
            }
            layers.push(next);
        }
        Ok(Self { layers })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConstant {
    /// Largest `c` with `log|DG^n v|_Y ≥ c · log K_{G^n}` on every chain; `∞` when all `K = 1`.
    pub c: f64,
    pub sup_log_k: f64,
    pub inf_log_norm: f64,
}

pub fn chain_expansion_constant<B: JetSource>(g: &AHPLMap<B>, chains: &[Chain]) -> Result<ChainConstant> {
    let y = g.y_domain();
    let tol = 1e-8 * g.c_v;
    let mut out = ChainConstant { c: f64::INFINITY, sup_log_k: 0.0, inf_log_norm: f64::INFINITY };
    for (ci, chain) in chains.iter().enumerate() {
        let n = chain.layers.len().saturating_sub(1);
        if n == 0 {
            return Err(Error::ChainInvalid { chain: ci, step: 0 });
        }
        for j in 0..n {
            let (a, b) = (&chain.layers[j], &chain.layers[j + 1]);
            if a.len() != b.len() || a.iter().zip(b).any(|(z, w)| (g.map(*z) - *w).norm() > tol) {
                return Err(Error::ChainInvalid { chain: ci, step: j });
            }
        }
        let mut sup_k: f64 = 0.0;
        let mut inf_norm = f64::INFINITY;
        for (i, &z) in chain.layers[0].iter().enumerate() {
            let (_, d) = g.iterate_jet1(z, n)?;
            let (_, k) = mu_and_k_from_matrix(&d)?;
            sup_k = sup_k.max(libm::log(k));
            let smin = singular_values2(&d).1;
            let w = chain.layers[n][i];
            inf_norm = inf_norm.min(libm::log(smin * y.rho(w)? / y.rho(z)?));
        }
        out.sup_log_k = out.sup_log_k.max(sup_k);
        out.inf_log_norm = out.inf_log_norm.min(inf_norm);
        if sup_k > 0.0 {
            out.c = out.c.min(inf_norm / sup_k);
        } else if inf_norm < 0.0 {
            out.c = f64::NEG_INFINITY;
        }
    }
    Ok(out)
}
