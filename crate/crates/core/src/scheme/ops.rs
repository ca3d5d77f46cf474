//! Discrete operators of one implicit step.
//!
//! The 4-Laplacian lives on cell faces: on the x-face between nodes p and
//! p+1 the gradient is ((w[p+1]-w[p])/h, mean of the nodal y-derivatives,
//! mean of the nodal z-derivatives). With P(w) = sum_f (h^3/3) |g_f|^4 / 4
//! the operator -div(|grad w|^2 grad w) is the nodal gradient of P, so it is
//! monotone and sums to zero.

use crate::field::{gradient, gradient_adjoint, Grid3, ScalarField, VectorField};

/// Visits every face with (axis, lower node, upper node).
fn for_each_face(g: &Grid3, mut f: impl FnMut(usize, usize, usize)) {
    let n = g.n();
    let strides = g.strides();
    for axis in 0..3 {
        let s = strides[axis];
        for idx in 0..g.len() {
            if g.ijk(idx)[axis] + 1 < n {
                f(axis, idx, idx + s);
            }
        }
    }
}

#[inline]
fn face_vector(axis: usize, p: usize, q: usize, w: &[f64], gw: &VectorField, h: f64) -> [f64; 3] {
    let mut v = [0.0; 3];
    for (c, vc) in v.iter_mut().enumerate() {
        *vc = if c == axis {
            (w[q] - w[p]) / h
        } else {
            0.5 * (gw.component(c)[p] + gw.component(c)[q])
        };
    }
    v
}

/// Accumulates M_f^T t for one face into the nodal output (normal part) and
/// the tangential collector (applied through grad^T afterwards).
#[inline]
fn scatter_face(axis: usize, p: usize, q: usize, t: [f64; 3], h: f64, out: &mut [f64], tang: &mut VectorField) {
    out[p] -= t[axis] / h;
    out[q] += t[axis] / h;
    for (c, &tc) in t.iter().enumerate() {
        if c != axis {
            tang.component_mut(c)[p] += 0.5 * tc;
            tang.component_mut(c)[q] += 0.5 * tc;
        }
    }
}

/// Nodal -div(|grad w|^2 grad w) in the face discretization.
pub fn p_laplacian4(w: &ScalarField) -> ScalarField {
    let g = *w.grid();
    let h = g.h();
    let gw = gradient(w);
    let wv = w.values();
    let mut out = vec![0.0; g.len()];
    let mut tang = VectorField::zeros(g);
    for_each_face(&g, |axis, p, q| {
        let v = face_vector(axis, p, q, wv, &gw, h);
        let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        scatter_face(axis, p, q, [s * v[0], s * v[1], s * v[2]], h, &mut out, &mut tang);
    });
    finish(g, out, &tang)
}

/// Hessian of the face energy at w applied to v.
pub fn p_laplacian4_hessian(w: &ScalarField, gw: &VectorField, v: &ScalarField) -> ScalarField {
    let g = *w.grid();
    let h = g.h();
    let gv = gradient(v);
    let (wv, vv) = (w.values(), v.values());
    let mut out = vec![0.0; g.len()];
    let mut tang = VectorField::zeros(g);
    for_each_face(&g, |axis, p, q| {
        let a = face_vector(axis, p, q, wv, gw, h);
        let b = face_vector(axis, p, q, vv, &gv, h);
        let s = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
        let d = 2.0 * (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
        let t = [s * b[0] + d * a[0], s * b[1] + d * a[1], s * b[2] + d * a[2]];
        scatter_face(axis, p, q, t, h, &mut out, &mut tang);
    });
    finish(g, out, &tang)
}

/// Normal-direction part of the Hessian diagonal (preconditioner only).
pub fn p_laplacian4_diagonal(w: &ScalarField) -> Vec<f64> {
    let g = *w.grid();
    let h = g.h();
    let gw = gradient(w);
    let mut diag = vec![0.0; g.len()];
    for_each_face(&g, |axis, p, q| {
        let a = face_vector(axis, p, q, w.values(), &gw, h);
        let s = a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + 2.0 * a[axis] * a[axis];
        let d = s / (3.0 * h * h);
        diag[p] += d;
        diag[q] += d;
    });
    diag
}

fn finish(g: Grid3, mut out: Vec<f64>, tang: &VectorField) -> ScalarField {
    let t = gradient_adjoint(tang);
    for (o, tv) in out.iter_mut().zip(t.values()) {
        *o = (*o + tv) / 3.0;
    }
    ScalarField::from_vec(g, out).expect("grid length")
}

/// Discrete W^{1,4} energy: sum w^4 h^3 + sum_f (h^3/3) |g_f|^4.
pub fn w14_energy(w: &ScalarField) -> f64 {
    let g = *w.grid();
    let h = g.h();
    let h3 = g.cell_volume();
    let gw = gradient(w);
    let mut faces = 0.0;
    for_each_face(&g, |axis, p, q| {
        let v = face_vector(axis, p, q, w.values(), &gw, h);
        let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        faces += s * s;
    });
    w.values().iter().map(|x| x.powi(4)).sum::<f64>() * h3 + faces * h3 / 3.0
}

/// Entropy-variable flux u (a grad w - b), where b stands for grad a.
pub fn flux(u: &ScalarField, gw: &VectorField, a: &ScalarField, b: &VectorField) -> VectorField {
    let g = *u.grid();
    let mut comps = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
    for idx in 0..g.len() {
        let (uu, aa) = (u.values()[idx], a.values()[idx]);
        for (c, comp) in comps.iter_mut().enumerate() {
            comp[idx] = uu * (aa * gw.component(c)[idx] - b.component(c)[idx]);
        }
    }
    VectorField::from_components(g, comps).expect("grid length")
}
