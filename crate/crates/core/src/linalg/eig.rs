//! Extreme eigenvalues of symmetric operators: Lanczos with full
//! reorthogonalization, largest Ritz value extracted from the tridiagonal
//! matrix by Sturm-sequence bisection.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::dense::DenseMatrix;
use crate::linalg::norms::LinearOp;
use crate::scalar::Scalar;

const LANCZOS_MAX_STEPS: usize = 500;
const LANCZOS_SEED: u64 = 0x517a_11ce_5eed_c0de;

/// Largest eigenvalue of a symmetric operator.
pub fn symmetric_max_eigenvalue<T: Scalar>(op: &impl LinearOp<T>, tol: T) -> Result<T> {
    let n = op.op_rows();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "eigenvalue of an empty operator".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_SEED);
    let mut q: Vec<Vec<T>> = Vec::new();
    let mut v: Vec<T> = (0..n)
        .map(|_| T::of(rng.random::<f64>() - 0.5))
        .collect();
    normalize(&mut v);
    q.push(v.clone());
    let mut alphas: Vec<T> = Vec::new();
    let mut betas: Vec<T> = Vec::new();
    let mut w = vec![T::zero(); n];
    let mut prev = T::nan();
    let steps = LANCZOS_MAX_STEPS.min(n);
    for k in 0..steps {
        op.apply(&q[k], &mut w);
        let alpha = dot(&w, &q[k]);
        alphas.push(alpha);
        // w -= alpha q_k + beta_{k-1} q_{k-1}, then full reorthogonalization
        for (wi, qi) in w.iter_mut().zip(&q[k]) {
            *wi = *wi - alpha * *qi;
        }
        if k > 0 {
            let beta_prev = betas[k - 1];
            for (wi, qi) in w.iter_mut().zip(&q[k - 1]) {
                *wi = *wi - beta_prev * *qi;
            }
        }
        for qk in &q {
            let c = dot(&w, qk);
            for (wi, qi) in w.iter_mut().zip(qk) {
                *wi = *wi - c * *qi;
            }
        }
        let lam = tridiag_max_eigenvalue(&alphas, &betas);
        let scale = lam.abs().max(T::one());
        if k > 0 && (lam - prev).abs() <= tol * scale {
            return Ok(lam);
        }
        prev = lam;
        let beta = norm(&w);
        if beta <= T::epsilon() * scale {
            // exact invariant subspace reached
            return Ok(lam);
        }
        betas.push(beta);
        let mut next = w.clone();
        for x in next.iter_mut() {
            *x = *x / beta;
        }
        q.push(next);
    }
    Err(Error::NonConvergence {
        what: "Lanczos eigenvalue iteration",
        iterations: steps,
        estimate: prev.to_f64_lossy(),
        gap: f64::NAN,
    })
}

/// Largest eigenvalue of the symmetric part (m + m^T)/2.
pub fn symmetric_part_max_eigenvalue<T: Scalar>(m: &DenseMatrix<T>, tol: T) -> Result<T> {
    m.require_square("symmetric_part_max_eigenvalue input")?;
    let s = m.symmetric_part();
    symmetric_max_eigenvalue(&s, tol)
}

/// Smallest eigenvalue of a symmetric operator.
pub fn symmetric_min_eigenvalue<T: Scalar>(m: &DenseMatrix<T>, tol: T) -> Result<T> {
    let mut neg = m.clone();
    neg.scale(-T::one());
    Ok(-symmetric_max_eigenvalue(&neg, tol)?)
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by bisection on the
/// Sturm sequence count.
fn tridiag_max_eigenvalue<T: Scalar>(alphas: &[T], betas: &[T]) -> T {
    let k = alphas.len();
    debug_assert!(betas.len() + 1 >= k);
    if k == 1 {
        return alphas[0];
    }
    // Gershgorin bounds
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..k {
        let bl = if i > 0 { betas[i - 1].abs() } else { T::zero() };
        let br = if i < k - 1 { betas[i].abs() } else { T::zero() };
        lo = lo.min(alphas[i] - bl - br);
        hi = hi.max(alphas[i] + bl + br);
    }
    let target = k - 1; // eigenvalues strictly below x must reach k-1
    for _ in 0..120 {
        let mid = (lo + hi) * T::half();
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count_below(alphas, betas, mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) * T::half()
}

/// Number of eigenvalues strictly less than x.
fn sturm_count_below<T: Scalar>(alphas: &[T], betas: &[T], x: T) -> usize {
    let k = alphas.len();
    let tiny = T::min_positive_value();
    let mut count = 0usize;
    let mut d = alphas[0] - x;
    if d < T::zero() {
        count += 1;
    }
    for i in 1..k {
        let b2 = betas[i - 1] * betas[i - 1];
        let denom = if d.abs() < tiny {
            if d >= T::zero() {
                tiny
            } else {
                -tiny
            }
        } else {
            d
        };
        d = alphas[i] - x - b2 / denom;
        if d < T::zero() {
            count += 1;
        }
    }
    count
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn norm<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

fn normalize<T: Scalar>(v: &mut [T]) {
    let n = norm(v);
    if n > T::zero() {
        for x in v.iter_mut() {
            *x = *x / n;
        }
    }
}
