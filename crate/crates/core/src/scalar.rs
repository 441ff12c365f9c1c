//! Floating-point abstraction over the two evaluation precisions.
//!
//! Training and inference run in `f32`; gradient checking and oracle
//! comparisons run the same code paths in `f64`.

use std::fmt::Debug;
use std::iter::Sum;

pub trait Scalar:
    num_traits::Float + Debug + Default + Send + Sync + Sum + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// Hyperbolic tangent on the hot path. `f64` uses the libm call; `f32`
    /// uses a polynomial exponential accurate to ~1e-7, which keeps the
    /// training loop out of scalar libm calls.
    fn fast_tanh(self) -> Self {
        self.tanh()
    }

    /// Dense row-major matrix multiply `c = a * b` with optional transposes
    /// expressed through strides. `m x k` times `k x n`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

/// `tanh|x| = (E - 1)/(E + 1)` with `E = e^{2|x|}` evaluated as
/// `2^n · e^u`, `u ∈ [-ln2/2, ln2/2]`, via a degree-6 Taylor polynomial.
/// Max relative error ≈ 1e-7.
/// Branch-free so slice-wide `map` calls autovectorize. Inputs are finite by
/// construction (the tape rejects non-finite op outputs before they can flow
/// onward); infinities saturate to ±1 via the clamp.
#[inline(always)]
fn fast_tanh_f32(x: f32) -> f32 {
    let z = (x.abs() * (2.0 * std::f32::consts::LOG2_E)).min(25.0);
    // round-to-nearest via truncation; z is non-negative by construction
    let n = (z + 0.5) as i32;
    let u = (z - n as f32) * std::f32::consts::LN_2;
    let p = 1.0
        + u * (1.0
            + u * (0.5 + u * (1.0 / 6.0 + u * (1.0 / 24.0 + u * (1.0 / 120.0 + u / 720.0)))));
    let e = f32::from_bits(p.to_bits().wrapping_add((n as u32) << 23));
    let t = (e - 1.0) / (e + 1.0);
    t.copysign(x)
}

/// Logistic function in the tanh-based form used throughout the crate.
pub fn sigmoid<T: Scalar>(v: T) -> T {
    let half = T::from_f64(0.5);
    half * ((v * half).fast_tanh() + T::one())
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn fast_tanh(self) -> Self {
        fast_tanh_f32(self)
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}
