//! Matrix-free conjugate gradients for the symmetric positive
//! (semi-)definite operators assembled from grid stencils.

use crate::error::Result;

/// Solves `A x = b` from `x = 0` until `‖r‖ ≤ rel_tol·‖b‖`; returns the
/// iterate and the iteration count. On a semidefinite operator the iterate
/// converges to the least-squares solution on the range.
pub(crate) fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; rhs.len()];
    let tol = rel_tol * dot(rhs, rhs).sqrt();
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut iters = 0;
    while rr.sqrt() > tol && iters < max_iter {
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        rr = rr_new;
        iters += 1;
    }
    Ok((x, iters))
}
