//! Small dense linear algebra: the Padé matrix exponential, spectral radius,
//! and compensated (double-double) kernels for the affine moment maps.
//!
//! The one-cycle maps near a resonance are close to a 3x3 Jordan block, so
//! `I - A` can have a condition number around 1e12. Plain double arithmetic
//! then loses most digits in both the closed form and long iterations; the
//! compensated kernels here keep the working precision near 1e-16 relative
//! to the floating-point map itself.

use nalgebra::{Matrix2, Matrix3, SMatrix, Vector3};

use crate::error::{Error, Result};

pub type Mat2 = Matrix2<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

const PADE_7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];

const PADE_9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];

const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

// Backward-error bounds for the [m/m] approximants (double precision).
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068e0;
const THETA_13: f64 = 5.371_920_351_148_152e0;

fn norm1<const N: usize>(a: &SMatrix<f64, N, N>) -> f64 {
    (0..N)
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` by scaling and squaring with a diagonal Padé approximant of
/// order 7, 9 or 13, chosen from the 1-norm of `a`.
pub fn expm<const N: usize>(a: &SMatrix<f64, N, N>) -> Result<SMatrix<f64, N, N>> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("matrix exponential of a non-finite matrix"));
    }
    let eye = SMatrix::<f64, N, N>::identity();
    let norm = norm1(a);

    let (u, v, squarings) = if norm <= THETA_9 {
        let a2 = a * a;
        let b: &[f64] = if norm <= THETA_7 { &PADE_7 } else { &PADE_9 };
        // odd/even split: U = A * sum b_{2j+1} A^{2j}, V = sum b_{2j} A^{2j}
        let mut power = eye;
        let mut odd = SMatrix::<f64, N, N>::zeros();
        let mut even = SMatrix::<f64, N, N>::zeros();
        for pair in b.chunks(2) {
            even += power * pair[0];
            odd += power * pair[1];
            power *= a2;
        }
        (a * odd, even, 0u32)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0);
        if s > 1000.0 {
            return Err(Error::numeric(format!(
                "matrix exponential overflow: norm {norm:.3e}"
            )));
        }
        let s = s as i32;
        let a = a * 2f64.powi(-s);
        let b = &PADE_13;
        let a2 = a * a;
        let a4 = a2 * a2;
        let a6 = a4 * a2;
        let u_inner = a6 * (a6 * b[13] + a4 * b[11] + a2 * b[9])
            + a6 * b[7]
            + a4 * b[5]
            + a2 * b[3]
            + eye * b[1];
        let u = a * u_inner;
        let v = a6 * (a6 * b[12] + a4 * b[10] + a2 * b[8])
            + a6 * b[6]
            + a4 * b[4]
            + a2 * b[2]
            + eye * b[0];
        (u, v, s as u32)
    };

    let p = v + u;
    let q = v - u;
    // generic N is small; the dynamic LU keeps the bounds simple
    let solved = nalgebra::DMatrix::from_column_slice(N, N, q.as_slice())
        .lu()
        .solve(&nalgebra::DMatrix::from_column_slice(N, N, p.as_slice()))
        .ok_or_else(|| Error::numeric("singular Padé denominator"))?;
    let mut r = SMatrix::<f64, N, N>::from_column_slice(solved.as_slice());
    for _ in 0..squarings {
        r = r * r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric(format!(
            "matrix exponential overflow: norm {norm:.3e}"
        )));
    }
    Ok(r)
}

/// `exp(u t)` for a 3x3 generator.
pub fn expm3(u: &Mat3, t: f64) -> Result<Mat3> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("expm3: time must be finite and >= 0, got {t}")));
    }
    expm(&(u * t))
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Mat3) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// 1-norm condition number, infinite when singular.
pub fn condition_number(m: &Mat3) -> f64 {
    match m.try_inverse() {
        Some(inv) => norm1(m) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// `m^n` by repeated squaring.
pub fn matrix_power(m: &Mat3, mut n: u64) -> Mat3 {
    let mut result = Mat3::identity();
    let mut base = *m;
    while n > 0 {
        if n & 1 == 1 {
            result *= base;
        }
        base = base * base;
        n >>= 1;
    }
    result
}

/// `ad - bc` with one rounding error (Kahan's fma trick).
pub fn det2(m: &Mat2) -> f64 {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let w = b * c;
    let err = (-b).mul_add(c, w);
    let f = a.mul_add(d, -w);
    f + err
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Running sum carrying its rounding error (Ogita–Rump–Oishi `Sum2`).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    err: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.sum, x);
        self.sum = s;
        self.err += e;
    }

    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        let (p, pe) = two_prod(a, b);
        self.add(p);
        self.err += pe;
    }

    /// Normalized (hi, lo) pair.
    #[inline]
    pub fn split(&self) -> (f64, f64) {
        two_sum(self.sum, self.err)
    }

    pub fn value(&self) -> f64 {
        self.sum + self.err
    }
}

/// A 3-vector stored as unevaluated sums `hi + lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdVec3 {
    pub hi: Vec3,
    pub lo: Vec3,
}

impl DdVec3 {
    pub fn new(v: Vec3) -> Self {
        DdVec3 { hi: v, lo: Vec3::zeros() }
    }

    pub fn value(&self) -> Vec3 {
        self.hi + self.lo
    }

    /// `a * self + b`, with `a` and `b` taken as exact.
    pub fn affine(&self, a: &Mat3, b: &Vec3) -> DdVec3 {
        let mut hi = Vec3::zeros();
        let mut lo = Vec3::zeros();
        for i in 0..3 {
            let mut acc = CompensatedSum::default();
            for j in 0..3 {
                acc.add_product(a[(i, j)], self.hi[j]);
            }
            acc.add(b[i]);
            let tail: f64 = (0..3).map(|j| a[(i, j)] * self.lo[j]).sum();
            acc.err += tail;
            let (h, l) = acc.split();
            hi[i] = h;
            lo[i] = l;
        }
        DdVec3 { hi, lo }
    }
}

/// Solves `(I - a) x = b` by LU with mixed-precision iterative refinement;
/// the residual is accumulated in compensated arithmetic.
pub fn solve_identity_minus(a: &Mat3, b: &Vec3) -> Result<Vec3> {
    let lu = (Mat3::identity() - a).lu();
    let mut x = lu
        .solve(b)
        .ok_or_else(|| Error::numeric("I - A is singular"))?;
    for _ in 0..8 {
        let mut r = Vec3::zeros();
        for i in 0..3 {
            let mut acc = CompensatedSum::default();
            acc.add(b[i]);
            acc.add(-x[i]);
            for j in 0..3 {
                acc.add_product(a[(i, j)], x[j]);
            }
            r[i] = acc.value();
        }
        let dx = lu
            .solve(&r)
            .ok_or_else(|| Error::numeric("I - A is singular"))?;
        x += dx;
        if dx.norm() <= f64::EPSILON * x.norm() {
            break;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite solution of (I - A) x = b"));
    }
    Ok(x)
}
