//! Dense complex linear algebra used by the reference oracles.

use nalgebra::{DMatrix, DVector};

use crate::prelude::*;
use crate::{Error, Result};

/// Below this dimension the direct complex product is faster than the split.
const SPLIT_PRODUCT_MIN_DIM: usize = 32;

/// Complex matrix product.
///
/// Large products are carried out as four real products on the real and
/// imaginary parts, which lets nalgebra use its optimized real kernel.
pub fn matmul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul dimension mismatch");
    if a.nrows().max(a.ncols()).max(b.ncols()) < SPLIT_PRODUCT_MIN_DIM {
        return a * b;
    }
    let ar = a.map(|z| z.re);
    let ai = a.map(|z| z.im);
    let br = b.map(|z| z.re);
    let bi = b.map(|z| z.im);
    let rr = &ar * &br;
    let ii = &ai * &bi;
    let ri = &ar * &bi;
    let ir = &ai * &br;
    DMatrix::from_fn(a.nrows(), b.ncols(), |r, c| {
        C64::new(rr[(r, c)] - ii[(r, c)], ri[(r, c)] + ir[(r, c)])
    })
}

pub fn matvec(a: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), v.len(), "matvec dimension mismatch");
    let mut out = vec![C64::new(0.0, 0.0); a.nrows()];
    for (c, &x) in v.iter().enumerate() {
        if x == C64::new(0.0, 0.0) {
            continue;
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o += a[(r, c)] * x;
        }
    }
    out
}

/// Maximum absolute column sum.
pub fn one_norm(a: &DMatrix<C64>) -> f64 {
    (0..a.ncols())
        .map(|c| a.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
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
const THETA: [f64; 5] = [1.495585217958292e-2, 2.53939833006323e-1, 9.504178996162932e-1, 2.097847961257068, 5.371920351148152];

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant (degree 3 to 13 chosen from the 1-norm).
pub fn expm(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite);
    }
    let ident = DMatrix::<C64>::identity(n, n);
    let norm = one_norm(a);

    let low_orders: [&[f64]; 4] = [&PADE3, &PADE5, &PADE7, &PADE9];
    for (coeffs, &theta) in low_orders.iter().zip(THETA.iter()) {
        if norm <= theta {
            return pade_low(a, coeffs, &ident);
        }
    }

    let s = if norm > THETA[4] { (norm / THETA[4]).log2().ceil().max(0.0) as i32 } else { 0 };
    let scaled = a.map(|z| z / 2f64.powi(s));
    let mut r = pade13(&scaled, &ident)?;
    for _ in 0..s {
        r = matmul(&r, &r);
    }
    Ok(r)
}

fn pade_low(a: &DMatrix<C64>, b: &[f64], ident: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let a2 = matmul(a, a);
    let mut even = ident.map(|z| z * b[0]);
    let mut odd = ident.map(|z| z * b[1]);
    let mut power = ident.clone();
    let mut k = 2;
    while k < b.len() {
        power = matmul(&power, &a2);
        even += power.map(|z| z * b[k]);
        odd += power.map(|z| z * b[k + 1]);
        k += 2;
    }
    let u = matmul(a, &odd);
    solve_pade(&u, &even)
}

fn pade13(a: &DMatrix<C64>, ident: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let b = &PADE13;
    let a2 = matmul(a, a);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a4, &a2);
    let sc = |m: &DMatrix<C64>, s: f64| m.map(|z| z * s);

    let inner_u = sc(&a6, b[13]) + sc(&a4, b[11]) + sc(&a2, b[9]);
    let u_poly = matmul(&a6, &inner_u) + sc(&a6, b[7]) + sc(&a4, b[5]) + sc(&a2, b[3]) + sc(ident, b[1]);
    let u = matmul(a, &u_poly);

    let inner_v = sc(&a6, b[12]) + sc(&a4, b[10]) + sc(&a2, b[8]);
    let v = matmul(&a6, &inner_v) + sc(&a6, b[6]) + sc(&a4, b[4]) + sc(&a2, b[2]) + sc(ident, b[0]);
    solve_pade(&u, &v)
}

fn solve_pade(u: &DMatrix<C64>, v: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::InvalidArgument("singular Padé denominator in expm".into()))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    vals
}

/// Spectral form `Q diag(w) Q^dagger` of a Hermitian matrix, used to apply
/// `exp(-iGt)` at many times without recomputing an exponential.
#[derive(Clone, Debug)]
pub struct HermitianEvolver {
    vectors: DMatrix<C64>,
    values: Vec<f64>,
}

impl HermitianEvolver {
    pub fn new(g: &DMatrix<C64>) -> Result<Self> {
        if g.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        let eig = nalgebra::SymmetricEigen::new(g.clone());
        Ok(Self { vectors: eig.eigenvectors, values: eig.eigenvalues.iter().copied().collect() })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// `exp(-iGt) v`.
    pub fn apply(&self, t: f64, v: &[C64]) -> Vec<C64> {
        let q = &self.vectors;
        let dim = self.values.len();
        let mut coeffs = vec![C64::new(0.0, 0.0); dim];
        for (j, c) in coeffs.iter_mut().enumerate() {
            let col = q.column(j);
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in col.iter().zip(v) {
                acc += a.conj() * b;
            }
            let (s, co) = (-self.values[j] * t).sin_cos();
            *c = acc * C64::new(co, s);
        }
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for (j, c) in coeffs.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(q.column(j).iter()) {
                *o += a * c;
            }
        }
        out
    }
}

pub fn to_dvector(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}
