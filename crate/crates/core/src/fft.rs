//! Multi-dimensional FFT helpers. Transforms always run in `f64`.

use num_complex::Complex;
use rustfft::FftPlanner;

pub(crate) type C64 = Complex<f64>;

/// In-place unnormalized DFT of a row-major array with the given shape,
/// one axis at a time.
pub(crate) fn fft_nd(data: &mut [C64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    debug_assert_eq!(total, data.len());
    for (axis, &len) in shape.iter().enumerate() {
        if len == 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let stride: usize = shape[axis + 1..].iter().product();
        let mut line = vec![C64::new(0.0, 0.0); len];
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for base in 0..total {
            // `base` must be the first element of a line along `axis`.
            if (base / stride) % len != 0 {
                continue;
            }
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = data[base + k * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (k, v) in line.iter().enumerate() {
                data[base + k * stride] = *v;
            }
        }
    }
}

/// Linear (non-periodic) convolution `out[i] = Σ_j k[i - j] f[j]` on an
/// `n^d` grid. `kernel` holds offsets `m ∈ (-(n-1))..=(n-1)` per axis at
/// index `m + n - 1`, row-major over a `(2n-1)^d` box.
pub(crate) fn convolve_linear(f: &[f64], kernel: &[f64], dim: usize, n: usize) -> Vec<f64> {
    let padded = 2 * n;
    let shape = vec![padded; dim];
    let total = padded.pow(dim as u32);
    let kw = 2 * n - 1;
    let mut fa = vec![C64::new(0.0, 0.0); total];
    let mut ka = vec![C64::new(0.0, 0.0); total];
    for (flat, &v) in f.iter().enumerate() {
        fa[remap(flat, dim, n, padded, |i| i)] = C64::new(v, 0.0);
    }
    for (flat, &v) in kernel.iter().enumerate() {
        // Offset m = i - (n - 1), wrapped modulo the padded length.
        let t = remap(flat, dim, kw, padded, |i| (i + padded + 1 - n) % padded);
        ka[t] = C64::new(v, 0.0);
    }
    fft_nd(&mut fa, &shape, false);
    fft_nd(&mut ka, &shape, false);
    for (a, b) in fa.iter_mut().zip(&ka) {
        *a *= b;
    }
    fft_nd(&mut fa, &shape, true);
    let scale = 1.0 / total as f64;
    (0..f.len())
        .map(|flat| fa[remap(flat, dim, n, padded, |i| i)].re * scale)
        .collect()
}

/// Maps a row-major index on a `from^d` box to a `to^d` box, transforming
/// each coordinate with `g`.
fn remap(flat: usize, dim: usize, from: usize, to: usize, g: impl Fn(usize) -> usize) -> usize {
    let mut rest = flat;
    let mut idx = [0usize; crate::grid::MAX_DIM];
    for k in (0..dim).rev() {
        idx[k] = rest % from;
        rest /= from;
    }
    idx[..dim].iter().fold(0, |acc, &i| acc * to + g(i))
}

/// Signed frequency index of FFT bin `k` for length `n`: `0..n/2` then
/// `-n/2..0`.
pub(crate) fn signed_frequency(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}
