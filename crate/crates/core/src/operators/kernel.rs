//! Convolution-type singular kernels `K(x, y) = k(x - y)`.

use crate::{lit, Error, Real, Result};

/// Smooth ramp equal to 0 on `[0, 1]` and 1 on `[2, ∞)`, built from
/// `ψ(s) = exp(-1/s)` as `ψ(t-1) / (ψ(t-1) + ψ(2-t))`.
pub fn smooth_cutoff<T: Real>(t: T) -> T {
    let one = T::one();
    if t <= one {
        return T::zero();
    }
    if t >= one + one {
        return one;
    }
    let psi = |s: T| if s > T::zero() { (-s.recip()).exp() } else { T::zero() };
    let a = psi(t - one);
    a / (a + psi(one + one - t))
}

/// Largest slope of [`smooth_cutoff`], attained at `t = 3/2`.
pub const CUTOFF_MAX_SLOPE: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFormula {
    /// `z_j / |z|^{d+1}`; in one dimension the Hilbert kernel `1/z`.
    Riesz { component: usize },
}

/// Singular kernel on `R^dim` with its regularity constant `C_K`:
/// `|k(z)| ≤ C_K |z|^{-d}` and `|∇k(z)| ≤ C_K |z|^{-d-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec<T> {
    pub formula: KernelFormula,
    pub dim: usize,
    pub regularity: T,
}

impl<T: Real> KernelSpec<T> {
    /// Riesz kernel with its analytic constant `C_K = max(1, d) = d`:
    /// the gradient of `z_j |z|^{-d-1}` has norm at most `d |z|^{-d-1}`.
    pub fn riesz(dim: usize, component: usize) -> Result<Self> {
        if component >= dim {
            return Err(Error::invalid(format!(
                "Riesz component {component} out of range for dimension {dim}"
            )));
        }
        Ok(Self {
            formula: KernelFormula::Riesz { component },
            dim,
            regularity: T::from_count(dim),
        })
    }

    /// Regularity constant of `k(z) χ(|z|/η)`: the cutoff adds at most
    /// `max|χ'| · 2 = 4` because `χ'` lives on `η ≤ |z| ≤ 2η`.
    pub fn truncated_regularity(&self) -> T {
        self.regularity + lit(2.0 * CUTOFF_MAX_SLOPE)
    }

    pub fn eval(&self, z: &[T]) -> T {
        match self.formula {
            KernelFormula::Riesz { component } => {
                let r2: T = z.iter().map(|&c| c * c).sum();
                if r2 == T::zero() {
                    return T::zero();
                }
                let r = r2.sqrt();
                z[component] / r.powi(self.dim as i32 + 1)
            }
        }
    }

    pub fn eval_truncated(&self, z: &[T], eta: T) -> T {
        let r: T = z.iter().map(|&c| c * c).sum::<T>().sqrt();
        let chi = smooth_cutoff(r / eta);
        if chi == T::zero() {
            T::zero()
        } else {
            self.eval(z) * chi
        }
    }

    pub fn is_odd(&self) -> bool {
        matches!(self.formula, KernelFormula::Riesz { .. })
    }
}

impl<T: Real> std::fmt::Display for KernelSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.formula {
            KernelFormula::Riesz { component } => {
                write!(f, "riesz(d={}, j={component}, C_K={})", self.dim, self.regularity)
            }
        }
    }
}

/// Worst observed ratios of the size and gradient bounds to `C_K` on
/// log-spaced separations and a fixed set of directions.
#[derive(Clone, Debug)]
pub struct Certification<T> {
    pub size_ratio: T,
    pub gradient_ratio: T,
    pub samples: usize,
}

impl<T: Real> Certification<T> {
    pub fn holds(&self, tolerance: T) -> bool {
        self.size_ratio <= T::one() + tolerance && self.gradient_ratio <= T::one() + tolerance
    }
}

/// Spot-checks the declared constant. Gradients use central differences
/// with a relative step, so the check carries `O(step^2)` error.
pub fn certify_kernel<T: Real>(
    kernel: &KernelSpec<T>,
    eta: Option<T>,
    constant: T,
) -> Certification<T> {
    let d = kernel.dim;
    let eval = |z: &[T]| match eta {
        Some(e) => kernel.eval_truncated(z, e),
        None => kernel.eval(z),
    };
    let directions = directions::<T>(d);
    let mut size_ratio = T::zero();
    let mut gradient_ratio = T::zero();
    let mut samples = 0;
    let scale = eta.unwrap_or(T::one());
    for k in 0..=48 {
        let r = scale * lit::<T>(2f64.powf(-3.0 + k as f64 * 6.0 / 48.0));
        for dir in &directions {
            let z: Vec<T> = dir.iter().map(|&c| c * r).collect();
            let val = eval(&z);
            size_ratio = size_ratio.max(val.abs() * r.powi(d as i32) / constant);
            let step = r * lit(1e-5);
            let mut grad2 = T::zero();
            let mut zp = z.clone();
            for i in 0..d {
                zp[i] = z[i] + step;
                let up = eval(&zp);
                zp[i] = z[i] - step;
                let down = eval(&zp);
                zp[i] = z[i];
                let g = (up - down) / (step + step);
                grad2 += g * g;
            }
            gradient_ratio = gradient_ratio.max(grad2.sqrt() * r.powi(d as i32 + 1) / constant);
            samples += 1;
        }
    }
    Certification { size_ratio, gradient_ratio, samples }
}

/// Unit directions: coordinate axes, diagonals and a few generic angles.
fn directions<T: Real>(d: usize) -> Vec<Vec<T>> {
    if d == 1 {
        return vec![vec![T::one()], vec![-T::one()]];
    }
    let mut out = Vec::new();
    let count = 64;
    for k in 0..count {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
        let mut v = vec![T::zero(); d];
        v[0] = lit(theta.cos());
        v[1] = lit(theta.sin());
        out.push(v);
    }
    if d > 2 {
        for axis in 2..d {
            let mut v = vec![T::zero(); d];
            v[axis] = T::one();
            out.push(v);
            let mut w = vec![lit::<T>(1.0 / (d as f64).sqrt()); d];
            w[axis] = -w[axis];
            out.push(w);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_profile() {
        assert_eq!(smooth_cutoff(0.5f64), 0.0);
        assert_eq!(smooth_cutoff(1.0f64), 0.0);
        assert_eq!(smooth_cutoff(2.0f64), 1.0);
        assert!((smooth_cutoff(1.5f64) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        let mut slope: f64 = 0.0;
        for k in 1..=10_000 {
            let t = 1.0 + k as f64 / 10_000.0;
            let v = smooth_cutoff(t);
            assert!(v >= prev);
            slope = slope.max((v - prev) * 10_000.0);
            prev = v;
        }
        assert!(slope <= CUTOFF_MAX_SLOPE + 1e-3 && slope > CUTOFF_MAX_SLOPE - 1e-2);
    }

    #[test]
    fn riesz_certification() {
        for d in [1, 2] {
            let k = KernelSpec::<f64>::riesz(d, 0).unwrap();
            let c = certify_kernel(&k, None, k.regularity);
            assert!(c.holds(1e-6), "{c:?}");
            assert!(c.gradient_ratio > 0.99);
            let t = certify_kernel(&k, Some(0.5), k.truncated_regularity());
            assert!(t.holds(1e-6), "{t:?}");
        }
    }

    #[test]
    fn understated_constant_fails() {
        let k = KernelSpec::<f64>::riesz(2, 1).unwrap();
        assert!(!certify_kernel(&k, None, 1.0).holds(1e-6));
    }

    #[test]
    fn bad_component_rejected() {
        assert!(KernelSpec::<f64>::riesz(2, 2).is_err());
    }
}
