//! Hot loops: matrix product, transpose and tanh.
//!
//! None of these use fused multiply-add or libm, so every result is the same
//! on every target regardless of which SIMD variant runs.

/// `c = a * b` for row-major `a: m x k`, `b: k x n`, `c: m x n`.
pub(crate) fn gemm(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k);
    gemm_dispatch(a, Strides { row: k, inner: 1 }, b, c, m, k, n);
}

/// `c = a^T * b` for row-major `a: k x m`, `b: k x n`, `c: m x n`.
pub(crate) fn gemm_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k);
    gemm_dispatch(a, Strides { row: 1, inner: m }, b, c, m, k, n);
}

/// Element `(r, p)` of the left operand is `a[r * row + p * inner]`.
#[derive(Clone, Copy)]
struct Strides {
    row: usize,
    inner: usize,
}

fn gemm_dispatch(a: &[f64], s: Strides, b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: feature presence checked above.
            unsafe { gemm_avx512(a, s, b, c, m, k, n) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: feature presence checked above.
            unsafe { gemm_avx2(a, s, b, c, m, k, n) };
            return;
        }
    }
    gemm_body::<4, 8>(a, s, b, c, m, k, n);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn gemm_avx512(a: &[f64], s: Strides, b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    gemm_body::<8, 16>(a, s, b, c, m, k, n)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gemm_avx2(a: &[f64], s: Strides, b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    gemm_body::<4, 8>(a, s, b, c, m, k, n)
}

const KC: usize = 256;

// Register-blocked MR x NR tiles over KC-long slices of the inner index.
// Partial sums go back through `c` between slices, and each product is
// rounded before it is added, so every tile size and slice length is
// bitwise identical to the scalar loop.
#[inline(always)]
fn gemm_body<const MR: usize, const NR: usize>(
    a: &[f64],
    s: Strides,
    b: &[f64],
    c: &mut [f64],
    m: usize,
    k: usize,
    n: usize,
) {
    let at = |r: usize, p: usize| a[r * s.row + p * s.inner];
    let m_full = m - m % MR;
    let n_full = n - n % NR;
    let mut p0 = 0;
    while p0 < k.max(1) {
        let p1 = (p0 + KC).min(k);
        for i in (0..m_full).step_by(MR) {
            for j in (0..n_full).step_by(NR) {
                let mut acc = [[0.0f64; NR]; MR];
                if p0 > 0 {
                    for (r, acc_r) in acc.iter_mut().enumerate() {
                        acc_r.copy_from_slice(&c[(i + r) * n + j..(i + r) * n + j + NR]);
                    }
                }
                for p in p0..p1 {
                    let b_row: &[f64; NR] = b[p * n + j..p * n + j + NR].try_into().unwrap();
                    for (r, acc_r) in acc.iter_mut().enumerate() {
                        let av = at(i + r, p);
                        for q in 0..NR {
                            acc_r[q] += av * b_row[q];
                        }
                    }
                }
                for (r, acc_r) in acc.iter().enumerate() {
                    c[(i + r) * n + j..(i + r) * n + j + NR].copy_from_slice(acc_r);
                }
            }
        }
        p0 = p1.max(p0 + 1);
    }
    for r in m_full..m {
        for j in (0..n_full).step_by(NR) {
            let mut acc = [0.0f64; NR];
            for p in 0..k {
                let av = at(r, p);
                let b_row: &[f64; NR] = b[p * n + j..p * n + j + NR].try_into().unwrap();
                for q in 0..NR {
                    acc[q] += av * b_row[q];
                }
            }
            c[r * n + j..r * n + j + NR].copy_from_slice(&acc);
        }
    }
    if n_full == n {
        return;
    }
    if s.inner == 1 {
        for r in 0..m {
            for j in n_full..n {
                let mut sum = 0.0;
                for p in 0..k {
                    sum += at(r, p) * b[p * n + j];
                }
                c[r * n + j] = sum;
            }
        }
    } else {
        let mut col = vec![0.0f64; m];
        for j in n_full..n {
            col.fill(0.0);
            for p in 0..k {
                let bv = b[p * n + j];
                for (r, acc) in col.iter_mut().enumerate() {
                    *acc += at(r, p) * bv;
                }
            }
            for (r, v) in col.iter().enumerate() {
                c[r * n + j] = *v;
            }
        }
    }
}

/// `dst = src^T` for row-major `src: rows x cols`.
pub(crate) fn transpose(src: &[f64], dst: &mut [f64], rows: usize, cols: usize) {
    const B: usize = 16;
    assert_eq!(src.len(), rows * cols);
    assert_eq!(dst.len(), rows * cols);
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// `tanh` applied elementwise.
pub(crate) fn tanh_slice(src: &[f64], dst: &mut [f64]) {
    assert_eq!(src.len(), dst.len());
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: feature presence checked above.
            unsafe { tanh_avx512(src, dst) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: feature presence checked above.
            unsafe { tanh_avx2(src, dst) };
            return;
        }
    }
    tanh_body(src, dst);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn tanh_avx512(src: &[f64], dst: &mut [f64]) {
    tanh_body(src, dst)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn tanh_avx2(src: &[f64], dst: &mut [f64]) {
    tanh_body(src, dst)
}

#[inline(always)]
fn tanh_body(src: &[f64], dst: &mut [f64]) {
    for (d, &x) in dst.iter_mut().zip(src) {
        *d = tanh(x);
    }
}

// Cephes rational approximations.
const TANH_P: [f64; 3] = [
    -9.643_991_794_250_523e-1,
    -9.928_772_310_019_185e1,
    -1.614_687_684_417_084_5e3,
];
const TANH_Q: [f64; 3] = [
    1.128_116_784_916_329_3e2,
    2.235_488_390_601_004_5e3,
    4.844_063_053_251_255e3,
];
const EXP_P: [f64; 3] = [
    1.261_771_930_748_105_9e-4,
    3.029_944_077_074_419_6e-2,
    9.999_999_999_999_999e-1,
];
const EXP_Q: [f64; 4] = [
    3.001_985_051_386_644_6e-6,
    2.524_483_403_496_841e-3,
    2.272_655_482_081_550_3e-1,
    2.0,
];
const LN2_HI: f64 = 6.931_457_519_531_25e-1;
const LN2_LO: f64 = 1.428_606_820_309_417_2e-6;
// 1.5 * 2^52: adding it rounds to an integer held in the low mantissa bits.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;

/// `e^y` for `0 <= y <= 44`, branch-free.
#[inline(always)]
fn exp_small_range(y: f64) -> f64 {
    let shifted = y * std::f64::consts::LOG2_E + ROUND_MAGIC;
    let n = shifted - ROUND_MAGIC;
    let n_bits = shifted.to_bits().wrapping_sub(ROUND_MAGIC.to_bits());
    let r = y - n * LN2_HI - n * LN2_LO;
    let rr = r * r;
    let px = r * ((EXP_P[0] * rr + EXP_P[1]) * rr + EXP_P[2]);
    let qx = ((EXP_Q[0] * rr + EXP_Q[1]) * rr + EXP_Q[2]) * rr + EXP_Q[3];
    let m = 1.0 + 2.0 * (px / (qx - px));
    f64::from_bits(m.to_bits().wrapping_add(n_bits << 52))
}

/// Hyperbolic tangent accurate to a few ulps, using only basic arithmetic.
#[inline(always)]
pub(crate) fn tanh(x: f64) -> f64 {
    let a = x.abs();
    let z = x * x;
    let p = (TANH_P[0] * z + TANH_P[1]) * z + TANH_P[2];
    let q = ((z + TANH_Q[0]) * z + TANH_Q[1]) * z + TANH_Q[2];
    let small = x + x * z * (p / q);
    // tanh(22) rounds to 1, so clamping keeps the exponent in range.
    let e = exp_small_range(2.0 * if a < 22.0 { a } else { 22.0 });
    let large = (1.0 - 2.0 / (e + 1.0)).copysign(x);
    let r = if a < 0.625 { small } else { large };
    if x.is_nan() || x == 0.0 {
        x
    } else {
        r
    }
}
