//! Pseudodifferential symbols and the discrete quantization
//! `T_σ f(x) = (2π)^{-d} Σ_ξ σ(x, ξ) f̂(ξ) e^{i x·ξ} Δξ`
//! on the dual lattice `ξ_k = 2π k / (N h)`.

use std::f64::consts::PI;

use crate::fft::{fft_nd, signed_frequency, C64};
use crate::grid::{SampledFunction, UniformGrid, MAX_DIM};
use crate::{lit, Error, Real, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum SymbolKind<T> {
    /// `σ ≡ c`; with `c = 1` the identity operator.
    Constant(T),
    /// `σ(x, ξ) = exp(-(|x|^2 + |ξ|^2) / s^2)`.
    CordesGaussian { scale: T },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSpec<T> {
    pub kind: SymbolKind<T>,
    pub dim: usize,
}

/// Physicists' Hermite polynomials up to degree 2.
fn hermite<T: Real>(n: u8, t: T) -> T {
    match n {
        0 => T::one(),
        1 => lit::<T>(2.0) * t,
        2 => lit::<T>(4.0) * t * t - lit(2.0),
        _ => unreachable!("derivative orders above 2 are not tracked"),
    }
}

impl<T: Real> SymbolSpec<T> {
    pub fn constant(value: T, dim: usize) -> Self {
        Self { kind: SymbolKind::Constant(value), dim }
    }

    pub fn cordes_gaussian(scale: T, dim: usize) -> Self {
        Self { kind: SymbolKind::CordesGaussian { scale }, dim }
    }

    pub fn eval(&self, x: &[T], xi: &[T]) -> T {
        self.x_factor(x) * self.xi_factor(xi)
    }

    fn x_factor(&self, x: &[T]) -> T {
        match &self.kind {
            SymbolKind::Constant(c) => *c,
            SymbolKind::CordesGaussian { scale } => {
                let r2: T = x.iter().map(|&c| c * c).sum();
                (-r2 / (*scale * *scale)).exp()
            }
        }
    }

    fn xi_factor(&self, xi: &[T]) -> T {
        match &self.kind {
            SymbolKind::Constant(_) => T::one(),
            SymbolKind::CordesGaussian { scale } => {
                let r2: T = xi.iter().map(|&c| c * c).sum();
                (-r2 / (*scale * *scale)).exp()
            }
        }
    }

    /// Exact `|∂_x^α ∂_ξ^β σ(x, ξ)|`.
    pub fn derivative_magnitude(&self, alpha: &[u8], beta: &[u8], x: &[T], xi: &[T]) -> T {
        match &self.kind {
            SymbolKind::Constant(c) => {
                if alpha.iter().chain(beta).all(|&o| o == 0) {
                    c.abs()
                } else {
                    T::zero()
                }
            }
            SymbolKind::CordesGaussian { scale } => {
                let s = *scale;
                let mut v = T::one();
                for (orders, point) in [(alpha, x), (beta, xi)] {
                    for (&o, &t) in orders.iter().zip(point) {
                        v *= (hermite(o, t / s) / s.powi(o as i32)).abs() * (-(t * t) / (s * s)).exp();
                    }
                }
                v
            }
        }
    }

    /// Envelope `C_{α,β}(x, ξ)` in `|∂_x^α ∂_ξ^β σ| ≤ C_{α,β}(x, ξ) (1 + |ξ|)^{-|β|}`.
    pub fn envelope(&self, alpha: &[u8], beta: &[u8], x: &[T], xi: &[T]) -> T {
        let order: i32 = beta.iter().map(|&o| o as i32).sum();
        let r: T = xi.iter().map(|&c| c * c).sum::<T>().sqrt();
        self.derivative_magnitude(alpha, beta, x, xi) * (T::one() + r).powi(order)
    }

    /// Whether the envelopes tend to zero as `|x|^2 + |ξ|^2 → ∞`.
    pub fn envelopes_decay(&self) -> bool {
        match &self.kind {
            SymbolKind::Constant(c) => *c == T::zero(),
            SymbolKind::CordesGaussian { .. } => true,
        }
    }

    /// Largest `sup |σ|`, used as the kernel-free regularity term.
    pub fn sup_abs(&self) -> T {
        match &self.kind {
            SymbolKind::Constant(c) => c.abs(),
            SymbolKind::CordesGaussian { .. } => T::one(),
        }
    }

    /// Largest ratio of a finite-difference derivative estimate to the
    /// declared bound `C_{α,β}(x, ξ)(1+|ξ|)^{-|β|}`, over all `|α|, |β| ≤ 2`
    /// and a deterministic set of sample points. Points where the bound is
    /// below `1e-3` are compared in absolute terms against that floor.
    pub fn verify_envelopes(&self) -> T {
        let d = self.dim;
        let step = match &self.kind {
            SymbolKind::CordesGaussian { scale } => *scale * lit(1e-2),
            SymbolKind::Constant(_) => lit(1e-2),
        };
        let indices = multi_indices(d);
        let mut worst = T::zero();
        for p in 0..12 {
            let mut x = vec![T::zero(); d];
            let mut xi = vec![T::zero(); d];
            for k in 0..d {
                x[k] = lit(((p * 7 + k * 3) % 11) as f64 * 0.37 - 1.6);
                xi[k] = lit(((p * 5 + k * 2) % 13) as f64 * 0.41 - 2.3);
            }
            for alpha in &indices {
                for beta in &indices {
                    let fd = self.finite_difference(alpha, beta, &x, &xi, step).abs();
                    let r: T = xi.iter().map(|&c| c * c).sum::<T>().sqrt();
                    let order: i32 = beta.iter().map(|&o| o as i32).sum();
                    let bound = self.envelope(alpha, beta, &x, &xi) / (T::one() + r).powi(order);
                    worst = worst.max(fd / bound.max(lit(1e-3)));
                }
            }
        }
        worst
    }

    fn finite_difference(&self, alpha: &[u8], beta: &[u8], x: &[T], xi: &[T], step: T) -> T {
        let d = self.dim;
        let orders: Vec<u8> = alpha.iter().chain(beta).copied().collect();
        let mut point: Vec<T> = x.iter().chain(xi).copied().collect();
        let mut total = T::zero();
        let mut offsets = vec![0i32; 2 * d];
        stencil(&orders, 0, &mut offsets, T::one(), step, &mut |offs, weight| {
            for k in 0..2 * d {
                point[k] = if k < d { x[k] } else { xi[k - d] } + step * T::from_i32(offs[k]).expect("small");
            }
            total += weight * self.eval(&point[..d], &point[d..]);
        });
        total
    }

    /// `T_σ f` via FFT. Both catalog symbols factor as `a(x) m(ξ)`, so the
    /// operator is `a · F^{-1}(m · F f)`. The real part is returned.
    pub fn apply(&self, f: &SampledFunction<T>) -> Result<SampledFunction<T>> {
        self.check_grid(f.grid())?;
        let g = f.grid();
        let (d, n) = (g.dim(), g.points_per_axis());
        let h = g.spacing().to_f64_lossy();
        let mut data: Vec<C64> = f.samples().iter().map(|v| C64::new(v.to_f64_lossy(), 0.0)).collect();
        let shape = vec![n; d];
        fft_nd(&mut data, &shape, false);
        let dual = 2.0 * PI / (n as f64 * h);
        let mut xi = [T::zero(); MAX_DIM];
        for (flat, v) in data.iter_mut().enumerate() {
            let idx = g.multi_index(flat);
            for k in 0..d {
                xi[k] = lit(signed_frequency(idx[k], n) as f64 * dual);
            }
            *v *= self.xi_factor(&xi[..d]).to_f64_lossy();
        }
        fft_nd(&mut data, &shape, true);
        let scale = 1.0 / g.len() as f64;
        let mut x = [T::zero(); MAX_DIM];
        let out = data
            .iter()
            .enumerate()
            .map(|(flat, v)| {
                g.center(flat, &mut x);
                lit::<T>(v.re * scale) * self.x_factor(&x[..d])
            })
            .collect();
        SampledFunction::new(g.clone(), out, format!("T_sigma {}", f.label()))
    }

    /// Direct `O(N^{2d})` evaluation of the quantization formula, for oracle
    /// comparison. Does not assume the symbol factors.
    pub fn apply_direct(&self, f: &SampledFunction<T>) -> Result<SampledFunction<T>> {
        self.check_grid(f.grid())?;
        let g = f.grid();
        let (d, n) = (g.dim(), g.points_per_axis());
        let h = g.spacing().to_f64_lossy();
        let dual = 2.0 * PI / (n as f64 * h);
        let cells = g.len();
        let coords: Vec<[f64; MAX_DIM]> = (0..cells)
            .map(|c| {
                let mut x = [T::zero(); MAX_DIM];
                g.center(c, &mut x);
                let mut out = [0.0; MAX_DIM];
                for k in 0..d {
                    out[k] = x[k].to_f64_lossy();
                }
                out
            })
            .collect();
        let freqs: Vec<[f64; MAX_DIM]> = (0..cells)
            .map(|c| {
                let idx = g.multi_index(c);
                let mut out = [0.0; MAX_DIM];
                for k in 0..d {
                    out[k] = (idx[k] as i64 - (n / 2) as i64) as f64 * dual;
                }
                out
            })
            .collect();
        let dot = |a: &[f64; MAX_DIM], b: &[f64; MAX_DIM]| (0..d).map(|k| a[k] * b[k]).sum::<f64>();
        let hd = h.powi(d as i32);
        let fhat: Vec<C64> = freqs
            .iter()
            .map(|xi| {
                f.samples()
                    .iter()
                    .zip(&coords)
                    .map(|(v, x)| C64::from_polar(v.to_f64_lossy() * hd, -dot(x, xi)))
                    .sum()
            })
            .collect();
        let dxi = (dual / (2.0 * PI)).powi(d as i32);
        let out = coords
            .iter()
            .map(|x| {
                let xt: Vec<T> = x[..d].iter().map(|&c| lit(c)).collect();
                let s: C64 = freqs
                    .iter()
                    .zip(&fhat)
                    .map(|(xi, fh)| {
                        let xit: Vec<T> = xi[..d].iter().map(|&c| lit(c)).collect();
                        let sigma = self.eval(&xt, &xit).to_f64_lossy();
                        fh * C64::from_polar(sigma, dot(x, xi))
                    })
                    .sum();
                lit::<T>(s.re * dxi)
            })
            .collect();
        SampledFunction::new(g.clone(), out, format!("T_sigma {}", f.label()))
    }

    fn check_grid(&self, g: &UniformGrid<T>) -> Result<()> {
        if g.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: g.dim() });
        }
        Ok(())
    }
}

impl<T: Real> std::fmt::Display for SymbolSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            SymbolKind::Constant(c) => write!(f, "const-symbol({c}; d={})", self.dim),
            SymbolKind::CordesGaussian { scale } => {
                write!(f, "cordes-gaussian(s={scale}; d={})", self.dim)
            }
        }
    }
}

/// All multi-indices of length `d` with total order at most 2.
fn multi_indices(d: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![0u8; d]];
    for i in 0..d {
        let mut a = vec![0u8; d];
        a[i] = 1;
        out.push(a.clone());
        a[i] = 2;
        out.push(a);
        for j in i + 1..d {
            let mut b = vec![0u8; d];
            b[i] = 1;
            b[j] = 1;
            out.push(b);
        }
    }
    out
}

/// Tensor-product central difference stencil for the given orders.
fn stencil<T: Real>(
    orders: &[u8],
    k: usize,
    offsets: &mut Vec<i32>,
    weight: T,
    step: T,
    visit: &mut impl FnMut(&[i32], T),
) {
    if k == orders.len() {
        visit(offsets, weight);
        return;
    }
    let taps: &[(i32, f64)] = match orders[k] {
        0 => &[(0, 1.0)],
        1 => &[(1, 0.5), (-1, -0.5)],
        _ => &[(1, 1.0), (0, -2.0), (-1, 1.0)],
    };
    for &(o, c) in taps {
        offsets[k] = o;
        let w = weight * lit::<T>(c) / step.powi(orders[k] as i32);
        stencil(orders, k + 1, offsets, w, step, visit);
    }
    offsets[k] = 0;
}
