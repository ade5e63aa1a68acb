//! First and second derivatives of planar maps: Kronecker products, chain rule, iterates.
//!
//! `D2` is stored with row `k` equal to the row-vectorized Hessian of component `k`,
//! `[∂xx, ∂xy, ∂yx, ∂yy]`, the layout in which `D²(φ∘ψ) = D²φ·(Dψ⊗Dψ) + Dφ·D²ψ` holds
//! as a plain matrix identity. [`Jet2::block_layout`] gives the side-by-side Hessian view.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];
pub type Mat24 = [[f64; 4]; 2];
pub type Mat4 = [[f64; 4]; 4];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn mat2_vec(a: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

pub fn det2(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut k = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    k[2 * i + p][2 * j + q] = a[i][j] * b[p][q];
                }
            }
        }
    }
    k
}

fn mul_24_4(a: &Mat24, b: &Mat4) -> Mat24 {
    let mut c = [[0.0; 4]; 2];
    for i in 0..2 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn mul_2_24(a: &Mat2, b: &Mat24) -> Mat24 {
    let mut c = [[0.0; 4]; 2];
    for i in 0..2 {
        for j in 0..4 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn add_24(a: &Mat24, b: &Mat24) -> Mat24 {
    let mut c = *a;
    for i in 0..2 {
        for j in 0..4 {
            c[i][j] += b[i][j];
        }
    }
    c
}

/// Singular values `(σ_max, σ_min)` of a 2×2 matrix as `|p| ± |q|`, where
/// `Av = p v + q v̄` in complex notation.
pub fn singular_values2(a: &Mat2) -> (f64, f64) {
    let p = libm::hypot(a[0][0] + a[1][1], a[1][0] - a[0][1]) * 0.5;
    let q = libm::hypot(a[0][0] - a[1][1], a[1][0] + a[0][1]) * 0.5;
    (p + q, (p - q).abs())
}

pub fn op_norm2(a: &Mat2) -> f64 {
    singular_values2(a).0
}

/// Singular values of a square matrix by one-sided Jacobi rotations, descending.
pub fn singular_values4(a: &Mat4, tol: f64) -> [f64; 4] {
    let mut u = *a;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..4 {
            for q in p + 1..4 {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for row in u.iter() {
                    alpha += row[p] * row[p];
                    beta += row[q] * row[q];
                    gamma += row[p] * row[q];
                }
                if gamma == 0.0 {
                    continue;
                }
                let scale = libm::sqrt(alpha * beta);
                if scale > 0.0 {
                    off = off.max(gamma.abs() / scale);
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for row in u.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
            }
        }
        if off < tol {
            break;
        }
    }
    let mut sv = [0.0; 4];
    for (j, s) in sv.iter_mut().enumerate() {
        *s = libm::sqrt(u.iter().map(|r| r[j] * r[j]).sum::<f64>());
    }
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    sv
}

pub fn op_norm4(a: &Mat4) -> f64 {
    singular_values4(a, 1e-13)[0]
}

/// Operator norm of a 2×4 matrix via the 2×2 Gram matrix `A Aᵀ`.
pub fn op_norm24(a: &Mat24) -> f64 {
    let g00: f64 = a[0].iter().map(|x| x * x).sum();
    let g11: f64 = a[1].iter().map(|x| x * x).sum();
    let g01: f64 = (0..4).map(|k| a[0][k] * a[1][k]).sum();
    let tr = g00 + g11;
    let det = g00 * g11 - g01 * g01;
    let disc = libm::sqrt((tr * tr - 4.0 * det).max(0.0));
    libm::sqrt(0.5 * (tr + disc))
}

/// Value, first and second derivative of a planar map at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub value: [f64; 2],
    pub d: Mat2,
    pub d2: Mat24,
}

impl Jet2 {
    pub fn linear(value: [f64; 2], d: Mat2) -> Self {
        Self { value, d, d2: [[0.0; 4]; 2] }
    }

    /// Jet of a holomorphic map with `f(z) = w`, `f'(z) = c1`, `f''(z) = c2`, as complex pairs.
    pub fn from_holomorphic(w: [f64; 2], c1: [f64; 2], c2: [f64; 2]) -> Self {
        let (a, b) = (c1[0], c1[1]);
        let (g, h) = (c2[0], c2[1]);
        Self {
            value: w,
            d: [[a, -b], [b, a]],
            d2: [[g, -h, -h, -g], [h, g, g, -h]],
        }
    }

    /// Hessian of component `k` as a 2×2 matrix.
    pub fn hessian(&self, k: usize) -> Mat2 {
        let r = self.d2[k];
        [[r[0], r[1]], [r[2], r[3]]]
    }

    /// `[H_u | H_v]`, the two Hessians side by side.
    pub fn block_layout(&self) -> Mat24 {
        let (hu, hv) = (self.hessian(0), self.hessian(1));
        [[hu[0][0], hu[0][1], hv[0][0], hv[0][1]], [hu[1][0], hu[1][1], hv[1][0], hv[1][1]]]
    }

    /// Largest `|∂xy - ∂yx|` over both components.
    pub fn symmetry_residual(&self) -> f64 {
        (self.d2[0][1] - self.d2[0][2]).abs().max((self.d2[1][1] - self.d2[1][2]).abs())
    }
}

/// Jet of `φ∘ψ` at `z` from the jet of `φ` at `ψ(z)` and the jet of `ψ` at `z`.
pub fn compose_jet2(outer: &Jet2, inner: &Jet2) -> Jet2 {
    let d = mat2_mul(&outer.d, &inner.d);
    let first = mul_24_4(&outer.d2, &kron(&inner.d, &inner.d));
    let second = mul_2_24(&outer.d, &inner.d2);
    Jet2 { value: outer.value, d, d2: add_24(&first, &second) }
}

/// Source of second-order jets of a planar map.
pub trait JetProvider {
    fn jet2(&self, z: [f64; 2]) -> Result<Jet2>;
}

impl<F: Fn([f64; 2]) -> Result<Jet2>> JetProvider for F {
    fn jet2(&self, z: [f64; 2]) -> Result<Jet2> {
        self(z)
    }
}

fn orbit_jets<P: JetProvider>(p: &P, z: [f64; 2], k: usize) -> Result<Vec<Jet2>> {
    let mut jets = Vec::with_capacity(k);
    let mut w = z;
    for step in 0..k {
        let j = p.jet2(w).map_err(|e| match e {
            Error::OutsideDomain { .. } | Error::OrbitEscaped { .. } => Error::OrbitEscaped { step },
            other => other,
        })?;
        w = j.value;
        jets.push(j);
    }
    Ok(jets)
}

/// Jet of `φ^k` at `z` by the iterate formula with prefix and suffix products of `Dφ`.
pub fn iterate_jet2<P: JetProvider>(p: &P, z: [f64; 2], k: usize) -> Result<Jet2> {
    if k == 0 {
        return Ok(Jet2::linear(z, IDENTITY));
    }
    let jets = orbit_jets(p, z, k)?;
    // prefix[j] = Dφ^j(z_0), suffix[j] = Dφ^{k-j}(z_j).
    let mut prefix = Vec::with_capacity(k + 1);
    prefix.push(IDENTITY);
    for j in 0..k {
        let next = mat2_mul(&jets[j].d, &prefix[j]);
        prefix.push(next);
    }
    let mut suffix = alloc::vec![IDENTITY; k + 1];
    for j in (0..k).rev() {
        suffix[j] = mat2_mul(&suffix[j + 1], &jets[j].d);
    }
    let last = &jets[k - 1];
    let pk = &prefix[k - 1];
    let mut d2 = mul_24_4(&last.d2, &kron(pk, pk));
    for j in 1..k {
        let pj = &prefix[j - 1];
        let term = mul_2_24(&suffix[j], &mul_24_4(&jets[j - 1].d2, &kron(pj, pj)));
        d2 = add_24(&d2, &term);
    }
    Ok(Jet2 { value: last.value, d: prefix[k], d2 })
}

/// Jet of `φ^k` by folding [`compose_jet2`].
pub fn fold_jet2<P: JetProvider>(p: &P, z: [f64; 2], k: usize) -> Result<Jet2> {
    let jets = orbit_jets(p, z, k)?;
    let mut acc = Jet2::linear(z, IDENTITY);
    for j in &jets {
        acc = compose_jet2(j, &acc);
    }
    Ok(acc)
}

/// Default finite-difference step `ε^{1/3}·max(1, |z|)`.
pub fn default_step(z: [f64; 2]) -> f64 {
    libm::cbrt(f64::EPSILON) * libm::hypot(z[0], z[1]).max(1.0)
}

/// Central-difference jet; the evaluator returns `None` outside its domain.
pub fn fd_jet2<F: Fn([f64; 2]) -> Option<[f64; 2]>>(f: F, z: [f64; 2], h: f64) -> Result<Jet2> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step must be positive"));
    }
    let at = |dx: f64, dy: f64| f([z[0] + dx, z[1] + dy]).ok_or(Error::StencilOutsideDomain);
    let c = at(0.0, 0.0)?;
    let xp = at(h, 0.0)?;
    let xm = at(-h, 0.0)?;
    let yp = at(0.0, h)?;
    let ym = at(0.0, -h)?;
    let pp = at(h, h)?;
    let pm = at(h, -h)?;
    let mp = at(-h, h)?;
    let mm = at(-h, -h)?;
    let mut d = [[0.0; 2]; 2];
    let mut d2 = [[0.0; 4]; 2];
    for k in 0..2 {
        d[k][0] = (xp[k] - xm[k]) / (2.0 * h);
        d[k][1] = (yp[k] - ym[k]) / (2.0 * h);
        let xx = (xp[k] - 2.0 * c[k] + xm[k]) / (h * h);
        let yy = (yp[k] - 2.0 * c[k] + ym[k]) / (h * h);
        let xy = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * h);
        d2[k] = [xx, xy, xy, yy];
    }
    Ok(Jet2 { value: c, d, d2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(z: [f64; 2]) -> Result<Jet2> {
        let w = [z[0] * z[0] - z[1] * z[1], 2.0 * z[0] * z[1]];
        Ok(Jet2::from_holomorphic(w, [2.0 * z[0], 2.0 * z[1]], [2.0, 0.0]))
    }

    fn power_jet(z: [f64; 2], n: i32) -> Jet2 {
        let c = num_complex::Complex64::new(z[0], z[1]);
        let w = c.powi(n);
        let d1 = c.powi(n - 1) * n as f64;
        let d2 = c.powi(n - 2) * (n * (n - 1)) as f64;
        Jet2::from_holomorphic([w.re, w.im], [d1.re, d1.im], [d2.re, d2.im])
    }

    fn close(a: &Jet2, b: &Jet2, tol: f64) -> bool {
        let mut ok = (a.value[0] - b.value[0]).abs() < tol && (a.value[1] - b.value[1]).abs() < tol;
        for i in 0..2 {
            for j in 0..2 {
                ok &= (a.d[i][j] - b.d[i][j]).abs() < tol;
            }
            for j in 0..4 {
                ok &= (a.d2[i][j] - b.d2[i][j]).abs() < tol;
            }
        }
        ok
    }

    #[test]
    fn kron_identities() {
        let i4 = kron(&IDENTITY, &IDENTITY);
        let s = kron(&[[2.0, 0.0], [0.0, 2.0]], &[[3.0, 0.0], [0.0, 3.0]]);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(i4[i][j], if i == j { 1.0 } else { 0.0 });
                assert_eq!(s[i][j], if i == j { 6.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn jacobi_matches_closed_form_on_kron() {
        let a = [[1.0, 2.0], [-0.5, 3.0]];
        let b = [[0.3, -1.0], [2.0, 0.1]];
        let k = op_norm4(&kron(&a, &b));
        assert!((k - op_norm2(&a) * op_norm2(&b)).abs() < 1e-12 * k);
    }

    #[test]
    fn singular_values_near_identity() {
        let e = 1e-12;
        let (smax, smin) = singular_values2(&[[1.0 + e, 0.0], [0.0, 1.0]]);
        assert!(((smax - 1.0) / e - 1.0).abs() < 1e-3);
        assert_eq!(smin, 1.0);
        let (smax, smin) = singular_values2(&[[0.0, -3.0], [2.0, 0.0]]);
        assert_eq!((smax, smin), (3.0, 2.0));
    }

    #[test]
    fn linear_maps_compose_flat() {
        let a = Jet2::linear([1.0, 2.0], [[1.0, 2.0], [3.0, 4.0]]);
        let b = Jet2::linear([0.0, 0.0], [[0.5, -1.0], [2.0, 0.0]]);
        assert_eq!(compose_jet2(&a, &b).d2, [[0.0; 4]; 2]);
    }

    #[test]
    fn square_of_square_is_fourth_power() {
        let z = [1.0, 0.0];
        let inner = square(z).unwrap();
        let outer = square(inner.value).unwrap();
        let c = compose_jet2(&outer, &inner);
        assert!(close(&c, &power_jet(z, 4), 1e-12));
        assert_eq!(c.d, [[4.0, 0.0], [0.0, 4.0]]);
        assert_eq!(c.d2[0][0], 12.0);
    }

    #[test]
    fn third_iterate_of_square() {
        let z = [1.0, 0.0];
        assert!(close(&iterate_jet2(&square, z, 3).unwrap(), &power_jet(z, 8), 1e-10));
        let z = [0.7, 0.4];
        assert!(close(&iterate_jet2(&square, z, 3).unwrap(), &power_jet(z, 8), 1e-10));
    }

    #[test]
    fn first_iterate_is_the_jet() {
        let z = [0.3, -0.2];
        assert_eq!(iterate_jet2(&square, z, 1).unwrap(), square(z).unwrap());
    }

    #[test]
    fn block_layout_view() {
        let j = square([0.0, 0.0]).unwrap();
        assert_eq!(j.block_layout(), [[2.0, 0.0, 0.0, 2.0], [0.0, -2.0, 2.0, 0.0]]);
    }

    #[test]
    fn escape_is_reported_with_step() {
        let bounded = |z: [f64; 2]| {
            if z[0].hypot(z[1]) > 2.0 {
                Err(Error::OutsideDomain { x: z[0], y: z[1] })
            } else {
                square(z)
            }
        };
        assert_eq!(iterate_jet2(&bounded, [1.5, 0.0], 4), Err(Error::OrbitEscaped { step: 1 }));
    }

    #[test]
    fn fd_on_linear_and_square() {
        let lin = |z: [f64; 2]| Some([2.0 * z[0] - z[1], 0.5 * z[0] + 3.0 * z[1]]);
        let j = fd_jet2(lin, [0.3, 0.1], 1e-3).unwrap();
        assert!((j.d[0][0] - 2.0).abs() < 1e-12 && (j.d[1][1] - 3.0).abs() < 1e-12);
        assert!(j.d2.iter().flatten().all(|x| x.abs() < 1e-3));
        let sq = |z: [f64; 2]| square(z).ok().map(|j| j.value);
        let j = fd_jet2(sq, [1.0, 1.0], 1e-4).unwrap();
        assert!((j.d[0][0] - 2.0).abs() < 1e-7 && (j.d[1][0] - 2.0).abs() < 1e-7);
        assert!((j.d[0][1] + 2.0).abs() < 1e-7);
    }

    #[test]
    fn fd_outside_domain() {
        let f = |z: [f64; 2]| if z[0] > 0.0 { Some(z) } else { None };
        assert_eq!(fd_jet2(f, [0.0, 0.0], 1e-3), Err(Error::StencilOutsideDomain));
    }

    #[test]
    fn fd_second_derivative_converges_quadratically() {
        let cube = |z: [f64; 2]| {
            let c = num_complex::Complex64::new(z[0], z[1]);
            let w = c * c * c + c.exp();
            Some([w.re, w.im])
        };
        let z = [0.4, 0.3];
        let c = num_complex::Complex64::new(z[0], z[1]);
        let exact = c * 6.0 + c.exp();
        let err = |h: f64| {
            let j = fd_jet2(cube, z, h).unwrap();
            (j.d2[0][0] - exact.re).abs() + (j.d2[1][0] - exact.im).abs()
        };
        let ratio = err(2e-3) / err(1e-3);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    fn mat() -> impl Strategy<Value = Mat2> {
        prop::array::uniform2(prop::array::uniform2(-3.0f64..3.0))
    }

    proptest! {
        #[test]
        fn kron_norm_submultiplicative(a in mat(), b in mat()) {
            let k = op_norm4(&kron(&a, &b));
            prop_assert!(k <= op_norm2(&a) * op_norm2(&b) * (1.0 + 1e-12) + 1e-14);
        }

        #[test]
        fn product_norm_submultiplicative(a in mat(), b in mat()) {
            prop_assert!(op_norm2(&mat2_mul(&a, &b)) <= op_norm2(&a) * op_norm2(&b) * (1.0 + 1e-12) + 1e-14);
        }

        #[test]
        fn composition_keeps_hessians_symmetric(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let j = iterate_jet2(&square, [x * 0.9, y * 0.9], 3).unwrap();
            let scale = j.d2.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(j.symmetry_residual() <= 1e-12 * scale);
        }
    }
}
