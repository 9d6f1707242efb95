//! Operators under test: multipliers, principal-value and smoothly truncated
//! Calderón–Zygmund kernels, commutators and pseudodifferential operators.

mod kernel;
mod symbol;

pub use kernel::{
    certify_kernel, smooth_cutoff, Certification, KernelFormula, KernelSpec, CUTOFF_MAX_SLOPE,
};
pub use symbol::{SymbolKind, SymbolSpec};

use std::fmt;

use rayon::prelude::*;

use crate::fft::convolve_linear;
use crate::grid::{CubeFamily, SampledFunction, UniformGrid, MAX_DIM};
use crate::maximal::{hl_maximal, oscillations, MaximalParams};
use crate::norms::weighted_norm_sampled;
use crate::weights::{eval_weight, WeightSpec};
use crate::{lit, Error, Real, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorSpec<T> {
    Identity,
    /// Pointwise multiplication by `b`.
    Multiply(SampledFunction<T>),
    /// Principal-value convolution with a singular kernel.
    Cz(KernelSpec<T>),
    /// Kernel multiplied by the smooth cutoff `χ(|x - y| / η)`.
    TruncatedCz { kernel: KernelSpec<T>, eta: T },
    /// `C_b f = T(b f) - b T f`.
    Commutator { b: SampledFunction<T>, inner: Box<OperatorSpec<T>> },
    Pseudo(SymbolSpec<T>),
    /// `outer ∘ inner`.
    Compose { outer: Box<OperatorSpec<T>>, inner: Box<OperatorSpec<T>> },
}

impl<T: Real> OperatorSpec<T> {
    pub fn commutator(b: SampledFunction<T>, inner: OperatorSpec<T>) -> Result<Self> {
        if matches!(inner, OperatorSpec::Commutator { .. }) {
            return Err(Error::invalid("nested commutators are not supported"));
        }
        Ok(OperatorSpec::Commutator { b, inner: Box::new(inner) })
    }

    pub fn compose(outer: OperatorSpec<T>, inner: OperatorSpec<T>) -> Self {
        OperatorSpec::Compose { outer: Box::new(outer), inner: Box::new(inner) }
    }

    /// Certified regularity constant `C_K` of the operator's kernel.
    pub fn regularity(&self) -> Result<T> {
        match self {
            OperatorSpec::Identity | OperatorSpec::Multiply(_) => Ok(T::zero()),
            OperatorSpec::Cz(k) => Ok(k.regularity),
            OperatorSpec::TruncatedCz { kernel, .. } => Ok(kernel.truncated_regularity()),
            OperatorSpec::Pseudo(s) => Ok(s.sup_abs()),
            other => Err(Error::MissingCertification(other.to_string())),
        }
    }
}

impl<T: Real> fmt::Display for OperatorSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorSpec::Identity => write!(f, "identity"),
            OperatorSpec::Multiply(b) => write!(f, "multiply({})", b.label()),
            OperatorSpec::Cz(k) => write!(f, "cz[{k}]"),
            OperatorSpec::TruncatedCz { kernel, eta } => write!(f, "cz[{kernel}; eta={eta}]"),
            OperatorSpec::Commutator { b, inner } => write!(f, "[{inner}, {}]", b.label()),
            OperatorSpec::Pseudo(s) => write!(f, "pseudo[{s}]"),
            OperatorSpec::Compose { outer, inner } => write!(f, "{outer} o {inner}"),
        }
    }
}

/// Kernel weights `k(m h) h^d` for offsets `m ∈ (-(N-1))..=(N-1)` per axis,
/// row-major over the `(2N-1)^d` offset box. The diagonal weight is zero.
fn kernel_weights<T: Real>(kernel: &KernelSpec<T>, eta: Option<T>, grid: &UniformGrid<T>) -> Result<Vec<T>> {
    if kernel.dim != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), found: kernel.dim });
    }
    let d = grid.dim();
    let n = grid.points_per_axis();
    let h = grid.spacing();
    if let Some(eta) = eta {
        if !(eta >= h + h) {
            return Err(Error::Unresolvable { eta: eta.to_f64_lossy(), spacing: h.to_f64_lossy() });
        }
    }
    let width = 2 * n - 1;
    let total = width.pow(d as u32);
    let volume = grid.cell_volume();
    let weights = (0..total)
        .into_par_iter()
        .map(|t| {
            let mut rest = t;
            let mut z = [T::zero(); MAX_DIM];
            for k in (0..d).rev() {
                let m = (rest % width) as i64 - (n as i64 - 1);
                rest /= width;
                z[k] = T::from_i64(m).expect("offset") * h;
            }
            let v = match eta {
                Some(e) => kernel.eval_truncated(&z[..d], e),
                None => kernel.eval(&z[..d]),
            };
            v * volume
        })
        .collect();
    Ok(weights)
}

fn convolve_fast<T: Real>(f: &SampledFunction<T>, weights: &[T]) -> Vec<T> {
    let g = f.grid();
    let fv: Vec<f64> = f.samples().iter().map(|v| v.to_f64_lossy()).collect();
    let kv: Vec<f64> = weights.iter().map(|v| v.to_f64_lossy()).collect();
    convolve_linear(&fv, &kv, g.dim(), g.points_per_axis())
        .into_iter()
        .map(lit)
        .collect()
}

/// Direct sum over offset pairs `±m`, so opposite cells around the excluded
/// diagonal are combined before accumulation.
fn convolve_direct<T: Real>(f: &SampledFunction<T>, weights: &[T]) -> Vec<T> {
    let g = f.grid();
    let d = g.dim();
    let n = g.points_per_axis() as i64;
    let width = 2 * n - 1;
    let total = weights.len();
    let centre = (total - 1) / 2;
    let fv = f.samples();
    let offsets: Vec<[i64; MAX_DIM]> = (centre + 1..total)
        .map(|t| {
            let mut rest = t as i64;
            let mut m = [0i64; MAX_DIM];
            for k in (0..d).rev() {
                m[k] = rest % width - (n - 1);
                rest /= width;
            }
            m
        })
        .collect();
    (0..g.len())
        .into_par_iter()
        .map(|cell| {
            let idx = g.multi_index(cell);
            let fetch = |m: &[i64; MAX_DIM], sign: i64| -> T {
                let mut flat = 0i64;
                for k in 0..d {
                    let j = idx[k] as i64 - sign * m[k];
                    if j < 0 || j >= n {
                        return T::zero();
                    }
                    flat = flat * n + j;
                }
                fv[flat as usize]
            };
            let mut acc = T::zero();
            for (s, m) in offsets.iter().enumerate() {
                let t = centre + 1 + s;
                acc += weights[t] * fetch(m, 1) + weights[total - 1 - t] * fetch(m, -1);
            }
            acc
        })
        .collect()
}

fn multiply<T: Real>(b: &SampledFunction<T>, f: &SampledFunction<T>) -> Result<SampledFunction<T>> {
    b.grid().ensure_same(f.grid(), "multiplier vs function")?;
    Ok(SampledFunction::from_parts(
        f.grid().clone(),
        b.samples().iter().zip(f.samples()).map(|(&x, &y)| x * y).collect(),
        format!("{}*{}", b.label(), f.label()),
    ))
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Fast,
    Direct,
}

fn apply_with<T: Real>(op: &OperatorSpec<T>, f: &SampledFunction<T>, mode: Mode) -> Result<SampledFunction<T>> {
    let label = format!("({op}) {}", f.label());
    let out = match op {
        OperatorSpec::Identity => return Ok(f.clone()),
        OperatorSpec::Multiply(b) => return multiply(b, f),
        OperatorSpec::Cz(k) | OperatorSpec::TruncatedCz { kernel: k, .. } => {
            let eta = match op {
                OperatorSpec::TruncatedCz { eta, .. } => Some(*eta),
                _ => None,
            };
            let w = kernel_weights(k, eta, f.grid())?;
            match mode {
                Mode::Fast => convolve_fast(f, &w),
                Mode::Direct => convolve_direct(f, &w),
            }
        }
        OperatorSpec::Commutator { b, inner } => {
            if matches!(**inner, OperatorSpec::Commutator { .. }) {
                return Err(Error::invalid("nested commutators are not supported"));
            }
            b.grid().ensure_same(f.grid(), "commutator symbol vs function")?;
            if b.is_constant() {
                return Ok(SampledFunction::zeros(f.grid()).with_label(label));
            }
            let tbf = apply_with(inner, &multiply(b, f)?, mode)?;
            let tf = apply_with(inner, f, mode)?;
            tbf.samples()
                .iter()
                .zip(tf.samples())
                .zip(b.samples())
                .map(|((&x, &y), &bb)| x - bb * y)
                .collect()
        }
        OperatorSpec::Pseudo(s) => {
            return match mode {
                Mode::Fast => s.apply(f),
                Mode::Direct => s.apply_direct(f),
            }
        }
        OperatorSpec::Compose { outer, inner } => {
            return apply_with(outer, &apply_with(inner, f, mode)?, mode)
        }
    };
    SampledFunction::new(f.grid().clone(), out, label)
}

/// Applies `op` to `f`. Convolution kernels and pseudodifferential symbols
/// go through FFTs; a commutator with constant `b` returns exact zeros.
pub fn apply<T: Real>(op: &OperatorSpec<T>, f: &SampledFunction<T>) -> Result<SampledFunction<T>> {
    apply_with(op, f, Mode::Fast)
}

/// Same operator evaluated by direct summation, used as the oracle for
/// [`apply`].
pub fn apply_direct<T: Real>(op: &OperatorSpec<T>, f: &SampledFunction<T>) -> Result<SampledFunction<T>> {
    apply_with(op, f, Mode::Direct)
}

/// `‖b‖_* = max_Q ⨍_Q |b - b_Q|` over the family.
pub fn bmo_norm<T: Real>(b: &SampledFunction<T>, family: &CubeFamily<T>) -> Result<T> {
    family.ensure_nonempty()?;
    family.grid().ensure_same(b.grid(), "function vs cube family")?;
    Ok(oscillations(b.samples(), family).into_iter().fold(T::zero(), T::max))
}

/// `b_j`: `b` convolved with a normalized Gaussian of standard deviation
/// `2^{-j}`, then multiplied by `1 - χ(|x| / 2^j)` so it vanishes beyond
/// radius `2^{j+1}`.
pub fn mollify_truncate<T: Real>(b: &SampledFunction<T>, j: i32) -> Result<SampledFunction<T>> {
    let g = b.grid();
    let sigma = lit::<T>(2f64.powi(-j));
    let radius = lit::<T>(2f64.powi(j));
    let h = g.spacing();
    let reach = (lit::<T>(5.0) * sigma / h).ceil().to_usize().unwrap_or(0);
    let taps: Vec<T> = (0..=reach)
        .map(|m| {
            let x = T::from_count(m) * h / sigma;
            (-(x * x) / lit(2.0)).exp()
        })
        .collect();
    let norm = taps[0] + lit::<T>(2.0) * taps[1..].iter().copied().sum::<T>();
    let taps: Vec<T> = taps.iter().map(|&t| t / norm).collect();
    let mut v = b.samples().to_vec();
    let d = g.dim();
    let n = g.points_per_axis();
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let src = v.clone();
        for (cell, out) in v.iter_mut().enumerate() {
            let i = (cell / stride) % n;
            let mut acc = taps[0] * src[cell];
            for (m, &w) in taps.iter().enumerate().skip(1) {
                if i >= m {
                    acc += w * src[cell - m * stride];
                }
                if i + m < n {
                    acc += w * src[cell + m * stride];
                }
            }
            *out = acc;
        }
    }
    let mut x = [T::zero(); MAX_DIM];
    for (cell, val) in v.iter_mut().enumerate() {
        g.center(cell, &mut x);
        let r: T = x[..d].iter().map(|&c| c * c).sum::<T>().sqrt();
        *val *= T::one() - smooth_cutoff(r / radius);
    }
    SampledFunction::new(g.clone(), v, format!("{}_{j}", b.label()))
}

/// `j ↦ ‖b - b_j‖_*` for the given scales.
pub fn cmo_distance<T: Real>(
    b: &SampledFunction<T>,
    family: &CubeFamily<T>,
    scales: &[i32],
) -> Result<Vec<(i32, T)>> {
    scales
        .iter()
        .map(|&j| {
            let bj = mollify_truncate(b, j)?;
            let diff = b.zip_with(&bj, "b-b_j", |x, y| x - y)?;
            Ok((j, bmo_norm(&diff, family)?))
        })
        .collect()
}

/// Largest central-difference gradient norm of `b` (one-sided at the box
/// faces).
pub fn gradient_sup<T: Real>(b: &SampledFunction<T>) -> T {
    let g = b.grid();
    let (d, n) = (g.dim(), g.points_per_axis());
    let h = g.spacing();
    let v = b.samples();
    let mut best = T::zero();
    for cell in 0..v.len() {
        let idx = g.multi_index(cell);
        let mut g2 = T::zero();
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            let i = idx[axis];
            let (lo, hi, span) = match (i > 0, i + 1 < n) {
                (true, true) => (cell - stride, cell + stride, h + h),
                (false, true) => (cell, cell + stride, h),
                (true, false) => (cell - stride, cell, h),
                (false, false) => (cell, cell, T::one()),
            };
            let dv = (v[hi] - v[lo]) / span;
            g2 += dv * dv;
        }
        best = best.max(g2.sqrt());
    }
    best
}

#[derive(Clone, Debug)]
pub struct CzoEstimate<T> {
    /// `max ‖Tf‖_2 / ‖f‖_2` over the probes.
    pub l2_envelope: T,
    /// Certified `C_K`.
    pub regularity: T,
    pub total: T,
}

/// Empirical `‖T‖_{L^2}` envelope plus the certified regularity constant.
pub fn czo_norm_estimate<T: Real>(
    op: &OperatorSpec<T>,
    probes: &[SampledFunction<T>],
) -> Result<CzoEstimate<T>> {
    let regularity = op.regularity()?;
    if probes.is_empty() {
        return Err(Error::EmptyProbes);
    }
    let mut env = T::zero();
    for f in probes {
        let one = SampledFunction::constant(f.grid(), T::one(), "1")?;
        let nf = weighted_norm_sampled(f, lit(2.0), &one)?;
        if nf == T::zero() {
            continue;
        }
        env = env.max(weighted_norm_sampled(&apply(op, f)?, lit(2.0), &one)? / nf);
    }
    Ok(CzoEstimate { l2_envelope: env, regularity, total: env + regularity })
}

#[derive(Clone, Debug)]
pub struct TruncationReport<T> {
    /// `(η, max |C_b f - C_b^η f| / (η ‖∇b‖_∞ Mf))` per level.
    pub levels: Vec<(T, T)>,
    pub fitted: T,
    /// Largest ratio between fitted constants at consecutive levels.
    pub spread: T,
    pub stable: bool,
    pub gradient: T,
}

/// Fits the truncation constant in `|C_b f - C_b^η f| ≲ η ‖∇b‖_∞ Mf`.
pub fn truncation_error_check<T: Real>(
    kernel: &KernelSpec<T>,
    etas: &[T],
    b: &SampledFunction<T>,
    probes: &[SampledFunction<T>],
    family: &CubeFamily<T>,
) -> Result<TruncationReport<T>> {
    if probes.is_empty() {
        return Err(Error::EmptyProbes);
    }
    let gradient = gradient_sup(b);
    if b.is_constant() || gradient == T::zero() {
        return Ok(TruncationReport {
            levels: etas.iter().map(|&e| (e, T::zero())).collect(),
            fitted: T::zero(),
            spread: T::one(),
            stable: true,
            gradient,
        });
    }
    let full = OperatorSpec::commutator(b.clone(), OperatorSpec::Cz(kernel.clone()))?;
    let params = MaximalParams::new(family);
    let base: Vec<(SampledFunction<T>, SampledFunction<T>)> = probes
        .iter()
        .map(|f| Ok((apply(&full, f)?, hl_maximal(f, &params)?)))
        .collect::<Result<_>>()?;
    let mut levels = Vec::with_capacity(etas.len());
    for &eta in etas {
        let trunc = OperatorSpec::commutator(
            b.clone(),
            OperatorSpec::TruncatedCz { kernel: kernel.clone(), eta },
        )?;
        let mut worst = T::zero();
        for (f, (cf, mf)) in probes.iter().zip(&base) {
            let ct = apply(&trunc, f)?;
            for (cell, ((&a, &t), &m)) in cf.samples().iter().zip(ct.samples()).zip(mf.samples()).enumerate() {
                let num = (a - t).abs();
                if m == T::zero() {
                    if num > T::zero() {
                        return Err(Error::Inconsistent(format!(
                            "Mf vanishes at cell {cell} where the truncation error is {num}"
                        )));
                    }
                    continue;
                }
                worst = worst.max(num / (eta * gradient * m));
            }
        }
        levels.push((eta, worst));
    }
    let fitted = levels.iter().map(|l| l.1).fold(T::zero(), T::max);
    let spread = levels
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).max(w[1].1 / w[0].1))
        .fold(T::one(), T::max);
    let lo = levels.iter().map(|l| l.1).fold(T::infinity(), T::min);
    Ok(TruncationReport {
        stable: fitted <= lit::<T>(2.0) * lo,
        levels,
        fitted,
        spread,
        gradient,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundOutcome<T> {
    Fitted(T),
    /// `‖b‖_* = 0`: both sides vanish.
    Degenerate,
}

impl<T: Real> BoundOutcome<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            BoundOutcome::Fitted(v) => Some(*v),
            BoundOutcome::Degenerate => None,
        }
    }
}

/// `max_f ‖C_b f‖_{L^2(w)} / (‖b‖_* ‖M(Mf)‖_{L^2(w)})`.
pub fn commutator_weighted_bound_check<T: Real>(
    b: &SampledFunction<T>,
    inner: &OperatorSpec<T>,
    w: &WeightSpec<T>,
    probes: &[SampledFunction<T>],
    family: &CubeFamily<T>,
) -> Result<BoundOutcome<T>> {
    if probes.is_empty() {
        return Err(Error::EmptyProbes);
    }
    let bmo = bmo_norm(b, family)?;
    if bmo == T::zero() {
        return Ok(BoundOutcome::Degenerate);
    }
    let op = OperatorSpec::commutator(b.clone(), inner.clone())?;
    let ws = eval_weight(w, b.grid())?;
    let params = MaximalParams::new(family);
    let two = lit::<T>(2.0);
    let mut best = T::zero();
    for f in probes {
        let cf = apply(&op, f)?;
        let m2 = hl_maximal(&hl_maximal(f, &params)?, &params)?;
        let den = bmo * weighted_norm_sampled(&m2, two, &ws)?;
        if den > T::zero() {
            best = best.max(weighted_norm_sampled(&cf, two, &ws)? / den);
        }
    }
    Ok(BoundOutcome::Fitted(best))
}
