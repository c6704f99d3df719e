//! Matrix exponential: order-13 Pade approximant with scaling and squaring.
//! A single fixed order keeps results bit-reproducible across inputs.

use crate::error::Result;
use crate::linalg::dense::DenseMatrix;
use crate::linalg::lu::lu_factorize;
use crate::scalar::Scalar;

const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// e^m for a square matrix.
pub fn matrix_exponential<T: Scalar>(m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    m.require_square("matrix_exponential input")?;
    let n = m.rows();
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let norm1 = m.norm_one().to_f64_lossy();
    let s = if norm1 > THETA_13 {
        (norm1 / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let mut a = m.clone();
    if s > 0 {
        a.scale(T::one() / T::of((2.0f64).powi(s as i32)));
    }

    let b: Vec<T> = PADE_13.iter().map(|&c| T::of(c)).collect();
    let ident = DenseMatrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    // u = a * (a6*(b13 a6 + b11 a4 + b9 a2) + b7 a6 + b5 a4 + b3 a2 + b1 I)
    let mut inner = DenseMatrix::zeros(n, n);
    inner.add_scaled(b[13], &a6);
    inner.add_scaled(b[11], &a4);
    inner.add_scaled(b[9], &a2);
    let mut u = a6.matmul(&inner);
    u.add_scaled(b[7], &a6);
    u.add_scaled(b[5], &a4);
    u.add_scaled(b[3], &a2);
    u.add_scaled(b[1], &ident);
    let u = a.matmul(&u);

    // v = a6*(b12 a6 + b10 a4 + b8 a2) + b6 a6 + b4 a4 + b2 a2 + b0 I
    let mut inner = DenseMatrix::zeros(n, n);
    inner.add_scaled(b[12], &a6);
    inner.add_scaled(b[10], &a4);
    inner.add_scaled(b[8], &a2);
    let mut v = a6.matmul(&inner);
    v.add_scaled(b[6], &a6);
    v.add_scaled(b[4], &a4);
    v.add_scaled(b[2], &a2);
    v.add_scaled(b[0], &ident);

    // solve (v - u) r = (v + u)
    let mut vm = v.clone();
    vm.add_scaled(-T::one(), &u);
    let mut vp = v;
    vp.add_scaled(T::one(), &u);
    let f = lu_factorize(&vm)?;
    let mut r = f.solve_matrix(&vp);
    for _ in 0..s {
        r = r.matmul(&r);
    }
    Ok(r)
}
