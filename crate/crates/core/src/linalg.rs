//! Small matrix-free linear algebra: conjugate gradients, symmetric
//! tridiagonal eigenpairs (Sturm bisection plus inverse iteration) and a
//! Lanczos driver for the lowest eigenpairs of symmetric operators.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    math::sqrt(dot(x, x))
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(x: &mut [f64], s: f64) {
    for v in x {
        *v *= s;
    }
}

/// Deterministic, non-degenerate start vector.
fn seed_vector(n: usize, salt: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = (i + 1) as f64 * 0.618_033_988_749_894_8 + salt as f64 * 0.414_213_562_373_095;
            1.0 + 0.5 * math::sin(7.0 * t) + 0.25 * math::cos(3.0 * t * t)
        })
        .collect()
}

/// Outcome of [`conjugate_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b − Ax‖/‖b‖`, recomputed from scratch.
    pub relative_residual: f64,
}

/// Solves `Ax = b` for symmetric positive-definite `A` given as a closure
/// `op(x, out)` writing `out = Ax`.
pub fn conjugate_gradient<F>(mut op: F, b: &[f64], tol: f64, max_iter: usize) -> Result<CgSolution>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let target = tol * bnorm;
    let mut it = 0;
    while it < max_iter {
        if math::sqrt(rr) <= target {
            // Confirm against the true residual before stopping.
            op(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            rr = dot(&r, &r);
            if math::sqrt(rr) <= target {
                break;
            }
            p.copy_from_slice(&r);
        }
        op(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        it += 1;
    }
    op(&x, &mut ap);
    let res = math::sqrt(b.iter().zip(&ap).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum::<f64>()) / bnorm;
    if res <= tol {
        Ok(CgSolution {
            x,
            iterations: it,
            relative_residual: res,
        })
    } else {
        Err(Error::PoissonNotConverged {
            iterations: it,
            residual: res,
        })
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::SizeMismatch {
                expected: diag.len().saturating_sub(1),
                found: off.len(),
            });
        }
        Ok(SymTridiagonal { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += math::abs(self.off[i - 1]);
            }
            if i + 1 < n {
                r += math::abs(self.off[i]);
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn pivmin(&self) -> f64 {
        let emax = self.off.iter().fold(1.0f64, |m, e| m.max(e * e));
        f64::MIN_POSITIVE * emax
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if math::abs(q) < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            if math::abs(q) < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `index`-th smallest eigenvalue by bisection.
    pub fn eigenvalue(&self, index: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        lo -= 1e-12 * span;
        hi += 1e-12 * span;
        for _ in 0..256 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + self.pivmin() {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Lowest `k` eigenpairs, eigenvectors of unit Euclidean norm.
    pub fn lowest(&self, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let k = k.min(self.len());
        let values: Vec<f64> = (0..k).map(|i| self.eigenvalue(i)).collect();
        let (lo, hi) = self.gershgorin();
        let tnorm = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        for (i, &lambda) in values.iter().enumerate() {
            let cluster: Vec<usize> = (0..i)
                .filter(|&j| math::abs(values[j] - lambda) < 1e-3 * tnorm)
                .collect();
            let v = self.inverse_iteration(lambda, i, &cluster, &vectors, tnorm);
            vectors.push(v);
        }
        (values, vectors)
    }

    fn inverse_iteration(
        &self,
        lambda: f64,
        salt: usize,
        cluster: &[usize],
        done: &[Vec<f64>],
        tnorm: f64,
    ) -> Vec<f64> {
        let n = self.len();
        if n == 1 {
            return vec![1.0];
        }
        let lu = ShiftedTridiagonalLu::new(self, lambda, tnorm);
        let mut v = seed_vector(n, salt);
        let nv = norm(&v);
        scale(&mut v, 1.0 / nv);
        let mut tmp = vec![0.0; n];
        for _ in 0..6 {
            lu.solve(&mut v);
            for &j in cluster {
                let c = dot(&v, &done[j]);
                axpy(-c, &done[j], &mut v);
            }
            let nv = norm(&v);
            if !(nv > 0.0 && nv.is_finite()) {
                v = seed_vector(n, salt + 17);
                let nv = norm(&v);
                scale(&mut v, 1.0 / nv);
                continue;
            }
            scale(&mut v, 1.0 / nv);
            self.apply(&v, &mut tmp);
            axpy(-lambda, &v, &mut tmp);
            if norm(&tmp) <= 64.0 * f64::EPSILON * tnorm * math::sqrt(n as f64) {
                break;
            }
        }
        v
    }
}

/// LU factorization with partial pivoting of `T − λI` (tridiagonal, so `U`
/// gets one extra superdiagonal).
struct ShiftedTridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedTridiagonalLu {
    fn new(t: &SymTridiagonal, lambda: f64, tnorm: f64) -> Self {
        let n = t.len();
        let mut d: Vec<f64> = t.diag.iter().map(|v| v - lambda).collect();
        let mut dl = t.off.clone();
        let mut du = t.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if math::abs(d[i]) >= math::abs(dl[i]) {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        // Exact singularity is what inverse iteration aims for; nudge zero
        // pivots so the solve stays finite.
        let tiny = f64::EPSILON * tnorm;
        for v in &mut d {
            if math::abs(*v) < tiny {
                *v = if *v < 0.0 { -tiny } else { tiny };
            }
        }
        ShiftedTridiagonalLu {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Lowest eigenpairs of a symmetric operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Lowest `k` eigenpairs of the symmetric operator `op` of dimension `n`,
/// by Lanczos with full reorthogonalization and explicit restarts.
///
/// Convergence means `‖Ax − θx‖ ≤ tol·max|θ|` for every returned pair.
pub fn lanczos_lowest<F>(n: usize, k: usize, mut op: F, start: Option<&[f64]>, tol: f64) -> Result<Eigenpairs>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let k = k.min(n);
    if k == 0 {
        return Ok(Eigenpairs {
            values: Vec::new(),
            vectors: Vec::new(),
        });
    }
    let max_dim = n.min(k * 40 + 260);
    let mut v0 = match start {
        Some(s) if norm(s) > 0.0 => s.to_vec(),
        _ => seed_vector(n, 0),
    };
    let mut last_residual = f64::INFINITY;
    for restart in 0..40 {
        let nv = norm(&v0);
        scale(&mut v0, 1.0 / nv);
        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; n];
        let mut result: Option<(Vec<f64>, Vec<Vec<f64>>)> = None;
        for j in 0..max_dim {
            op(&basis[j], &mut w);
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
            }
            let b = norm(&w);
            let dim = j + 1;
            let anorm = alpha.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(b);
            let exhausted = b <= 1e-13 * anorm || dim == n;
            if dim >= k && (dim % 8 == 0 || exhausted || dim == max_dim) {
                let t = SymTridiagonal::new(alpha.clone(), beta.clone())?;
                let (theta, y) = t.lowest(k);
                let scale_ref = theta.iter().fold(anorm, |m, v| m.max(v.abs()));
                let worst = y.iter().map(|yi| math::abs(b * yi[dim - 1])).fold(0.0f64, f64::max);
                last_residual = worst / scale_ref;
                if worst <= tol * scale_ref || exhausted || dim == max_dim {
                    result = Some((theta, y));
                    if worst <= tol * scale_ref || exhausted {
                        break;
                    }
                }
            }
            if exhausted || dim == max_dim {
                break;
            }
            scale(&mut w, 1.0 / b);
            beta.push(b);
            basis.push(w.clone());
        }
        let (theta, y) = match result {
            Some(r) => r,
            None => break,
        };
        let vectors: Vec<Vec<f64>> = y
            .iter()
            .map(|yi| {
                let mut x = vec![0.0; n];
                for (q, c) in basis.iter().zip(yi) {
                    axpy(*c, q, &mut x);
                }
                let nx = norm(&x);
                scale(&mut x, 1.0 / nx);
                x
            })
            .collect();
        // Verify with true residuals; the Lanczos estimate can be optimistic.
        let mut worst: f64 = 0.0;
        let scale_ref = theta.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
        let mut ax = vec![0.0; n];
        for (x, &t) in vectors.iter().zip(&theta) {
            op(x, &mut ax);
            axpy(-t, x, &mut ax);
            worst = worst.max(norm(&ax));
        }
        let anorm = scale_ref.max(alpha.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        last_residual = worst / anorm;
        if worst <= tol * anorm || basis.len() == n {
            return Ok(Eigenpairs { values: theta, vectors });
        }
        // Restart from the sum of the wanted Ritz vectors.
        v0 = vec![0.0; n];
        for (i, x) in vectors.iter().enumerate() {
            axpy(1.0 + 0.1 * (i + restart) as f64, x, &mut v0);
        }
    }
    Err(Error::EigenNotConverged {
        residual: last_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    #[test]
    fn bisection_matches_closed_form() {
        let n = 50;
        let t = laplacian_1d(n);
        for k in 0..5 {
            let exact = 2.0 - 2.0 * (core::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((t.eigenvalue(k) - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn inverse_iteration_vectors_are_orthonormal_eigenvectors() {
        let n = 40;
        let t = SymTridiagonal::new((0..n).map(|i| (i as f64 * 0.3).sin() * 3.0).collect(), vec![0.7; n - 1]).unwrap();
        let (vals, vecs) = t.lowest(6);
        let mut tmp = vec![0.0; n];
        for (i, v) in vecs.iter().enumerate() {
            t.apply(v, &mut tmp);
            axpy(-vals[i], v, &mut tmp);
            assert!(norm(&tmp) < 1e-12);
            for w in &vecs[..i] {
                assert!(dot(v, w).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cg_solves_spd_system() {
        let t = laplacian_1d(30);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).cos()).collect();
        let sol = conjugate_gradient(|x, out| t.apply(x, out), &b, 1e-12, 200).unwrap();
        assert!(sol.relative_residual <= 1e-12);
        let zero = conjugate_gradient(|x, out| t.apply(x, out), &[0.0; 30], 1e-12, 200).unwrap();
        assert!(zero.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cg_reports_failure() {
        let t = laplacian_1d(100);
        let b = vec![1.0; 100];
        assert!(matches!(
            conjugate_gradient(|x, out| t.apply(x, out), &b, 1e-14, 3),
            Err(Error::PoissonNotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn lanczos_agrees_with_bisection() {
        let n = 300;
        let t = SymTridiagonal::new(
            (0..n).map(|i| 0.001 * (i as f64 - 150.0).powi(2)).collect(),
            vec![-1.0; n - 1],
        )
        .unwrap();
        let pairs = lanczos_lowest(n, 3, |x, out| t.apply(x, out), None, 1e-12).unwrap();
        for i in 0..3 {
            assert!((pairs.values[i] - t.eigenvalue(i)).abs() < 1e-9);
        }
    }
}
