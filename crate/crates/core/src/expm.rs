//! Dense matrix exponential (Padé 13 with scaling and squaring).

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::scalar::{Complex, Real};

const PADE13: [f64; 14] = [
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
const THETA13: f64 = 5.371920351148152;

fn norm1<T: Real>(a: &Mat<Complex<T>>) -> T {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).fold(T::zero(), |s, i| s + a[(i, j)].norm()))
        .fold(T::zero(), |m, v| m.max(v))
}

/// `Σ cᵢ Mᵢ (+ c_id · 1)`.
fn combine<T: Real>(terms: &[(f64, &Mat<Complex<T>>)], id: f64) -> Mat<Complex<T>> {
    let n = terms[0].1.nrows();
    Mat::from_fn(n, n, |i, j| {
        let mut v = Complex::new(if i == j { T::lit(id) } else { T::zero() }, T::zero());
        for (c, m) in terms {
            v += m[(i, j)] * T::lit(*c);
        }
        v
    })
}

pub(crate) fn expm<T: Real>(a: &Mat<Complex<T>>) -> Mat<Complex<T>> {
    let n = a.nrows();
    let nrm = norm1(a).to_f64_lossy();
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = T::lit(0.5f64.powi(s));
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = combine(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], 0.0);
    let u_even = &a6 * &inner_u + combine(&[(b[7], &a6), (b[5], &a4), (b[3], &a2)], b[1]);
    let u = &a * &u_even;
    let inner_v = combine(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], 0.0);
    let v = &a6 * &inner_v + combine(&[(b[6], &a6), (b[4], &a4), (b[2], &a2)], b[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}
