//! Weighted Lebesgue norms and the mixed norm `L^p_u L^q_v`.
//!
//! All integrals are midpoint Riemann sums on the grid lattice.

use rayon::prelude::*;

use crate::grid::{SampledFunction, UniformGrid};
use crate::weights::{eval_weight, WeightSpec};
use crate::{Error, Real, Result};

/// Exponents and weights of `L^p_u(R^n) L^q_v(R^m)`: inner norm in the last
/// `m` coordinates, outer norm in the first `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedNormParams<T> {
    pub p: T,
    pub q: T,
    pub u: WeightSpec<T>,
    pub v: WeightSpec<T>,
}

impl<T: Real> MixedNormParams<T> {
    pub fn unweighted(p: T, q: T, n: usize, m: usize) -> Self {
        Self { p, q, u: WeightSpec::unit(n), v: WeightSpec::unit(m) }
    }
}

fn check_exponent<T: Real>(p: T) -> Result<()> {
    if !(p >= T::one() && p.is_finite()) {
        return Err(Error::invalid(format!("norm exponent must lie in [1, inf), got {p}")));
    }
    Ok(())
}

fn lp_sum<T: Real>(values: &[T], weights: &[T], p: T) -> T {
    values
        .iter()
        .zip(weights)
        .map(|(&f, &w)| f.abs().powf(p) * w)
        .sum()
}

/// `(Σ |f|^p w h^d)^{1/p}`.
pub fn weighted_norm<T: Real>(f: &SampledFunction<T>, p: T, w: &WeightSpec<T>) -> Result<T> {
    let ws = eval_weight(w, f.grid())?;
    weighted_norm_sampled(f, p, &ws)
}

pub fn weighted_norm_sampled<T: Real>(
    f: &SampledFunction<T>,
    p: T,
    w: &SampledFunction<T>,
) -> Result<T> {
    check_exponent(p)?;
    f.grid().ensure_same(w.grid(), "function vs weight")?;
    Ok((lp_sum(f.samples(), w.samples(), p) * f.grid().cell_volume()).powf(p.recip()))
}

/// `G(x) = (∫ |f(x, y)|^q v(y) dy)^{1/q}` on the first `dim - v.dim()` axes.
pub fn inner_norm<T: Real>(
    f: &SampledFunction<T>,
    q: T,
    v: &WeightSpec<T>,
) -> Result<SampledFunction<T>> {
    check_exponent(q)?;
    let d = f.grid().dim();
    let m = v.dim();
    if d < 2 || m == 0 || m >= d {
        return Err(Error::invalid(format!(
            "inner norm needs a product grid: dim {d}, inner weight dim {m}"
        )));
    }
    let outer = f.grid().with_dim(d - m)?;
    let inner = f.grid().with_dim(m)?;
    let vs = eval_weight(v, &inner)?;
    let g = row_norms(f.samples(), vs.samples(), q, inner.cell_volume());
    SampledFunction::new(outer, g, format!("||{}||_(L^{q}_v)", f.label()))
}

fn row_norms<T: Real>(f: &[T], v: &[T], q: T, volume: T) -> Vec<T> {
    let inv = q.recip();
    f.par_chunks(v.len())
        .map(|row| (lp_sum(row, v, q) * volume).powf(inv))
        .collect()
}

/// `‖f‖_{L^p_u L^q_v}`.
pub fn mixed_norm<T: Real>(f: &SampledFunction<T>, params: &MixedNormParams<T>) -> Result<T> {
    MixedNorm::new(f.grid(), params)?.norm(f)
}

/// Mixed-norm evaluator with the weights sampled once.
#[derive(Clone, Debug)]
pub struct MixedNorm<T> {
    grid: UniformGrid<T>,
    p: T,
    q: T,
    u: Vec<T>,
    v: Vec<T>,
    outer_volume: T,
    inner_volume: T,
}

impl<T: Real> MixedNorm<T> {
    pub fn new(grid: &UniformGrid<T>, params: &MixedNormParams<T>) -> Result<Self> {
        check_exponent(params.p)?;
        check_exponent(params.q)?;
        let (n, m) = (params.u.dim(), params.v.dim());
        if n + m != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), found: n + m });
        }
        let outer = grid.with_dim(n)?;
        let inner = grid.with_dim(m)?;
        Ok(Self {
            grid: grid.clone(),
            p: params.p,
            q: params.q,
            u: eval_weight(&params.u, &outer)?.into_samples(),
            v: eval_weight(&params.v, &inner)?.into_samples(),
            outer_volume: outer.cell_volume(),
            inner_volume: inner.cell_volume(),
        })
    }

    /// Weights supplied as samples: `u` on the outer grid, `v` on the inner.
    pub fn from_samples(
        grid: &UniformGrid<T>,
        outer_dim: usize,
        p: T,
        q: T,
        u: &[T],
        v: &[T],
    ) -> Result<Self> {
        check_exponent(p)?;
        check_exponent(q)?;
        if outer_dim == 0 || outer_dim >= grid.dim() {
            return Err(Error::invalid(format!("outer dimension {outer_dim} does not split the grid")));
        }
        let outer = grid.with_dim(outer_dim)?;
        let inner = grid.with_dim(grid.dim() - outer_dim)?;
        if u.len() != outer.len() || v.len() != inner.len() {
            return Err(Error::invalid("weight sample counts do not match the factor grids"));
        }
        Ok(Self {
            grid: grid.clone(),
            p,
            q,
            u: u.to_vec(),
            v: v.to_vec(),
            outer_volume: outer.cell_volume(),
            inner_volume: inner.cell_volume(),
        })
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn exponents(&self) -> (T, T) {
        (self.p, self.q)
    }

    pub fn norm(&self, f: &SampledFunction<T>) -> Result<T> {
        self.grid.ensure_same(f.grid(), "mixed norm")?;
        Ok(self.norm_slice(f.samples()))
    }

    pub(crate) fn norm_slice(&self, f: &[T]) -> T {
        let g = row_norms(f, &self.v, self.q, self.inner_volume);
        (lp_sum(&g, &self.u, self.p) * self.outer_volume).powf(self.p.recip())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_norm() {
        let g = UniformGrid::new(2, 2.0, 8).unwrap();
        let mut s = vec![0.0; 64];
        s[27] = 1.0;
        let f = SampledFunction::new(g.clone(), s, "cell").unwrap();
        for p in [1.0, 2.0, 3.5] {
            let n = weighted_norm(&f, p, &WeightSpec::unit(2)).unwrap();
            assert!((n - 0.5f64.powf(2.0 / p)).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_l2_norm() {
        let g = UniformGrid::new(1, 8.0, 4096).unwrap();
        let f = SampledFunction::sample(&g, "gauss", |x: &[f64]| (-x[0] * x[0]).exp()).unwrap();
        let n = weighted_norm(&f, 2.0, &WeightSpec::unit(1)).unwrap();
        assert!((n - (std::f64::consts::PI / 2.0).powf(0.25)).abs() < 1e-6);
    }

    #[test]
    fn homogeneity() {
        let g = UniformGrid::new(1, 4.0, 64).unwrap();
        let f = SampledFunction::sample(&g, "f", |x: &[f64]| x[0].sin()).unwrap();
        let w = WeightSpec::unit(1);
        let a = weighted_norm(&f, 2.0, &w).unwrap();
        let b = weighted_norm(&f.scaled(-2.0), 2.0, &w).unwrap();
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn separable_inner_norm() {
        let g = UniformGrid::new(2, 2.0, 16).unwrap();
        let gx = |x: f64| (x * 1.3).cos() - 0.2;
        let hy = |y: f64| (-y * y).exp();
        let f = SampledFunction::sample(&g, "g(x)h(y)", |x| gx(x[0]) * hy(x[1])).unwrap();
        let v = WeightSpec::power(1.0 / 3.0, 1);
        let gi = inner_norm(&f, 3.0, &v).unwrap();
        let g1 = g.with_dim(1).unwrap();
        let h = SampledFunction::sample(&g1, "h", |y| hy(y[0])).unwrap();
        let hn = weighted_norm(&h, 3.0, &v).unwrap();
        for (i, &val) in gi.samples().iter().enumerate() {
            let expect = gx(g1.coordinate(i)).abs() * hn;
            assert!((val - expect).abs() <= 1e-13 * (1.0 + expect));
        }
    }

    #[test]
    fn inner_norm_rejects_one_dimensional_input() {
        let g = UniformGrid::new(1, 2.0, 16).unwrap();
        let f = SampledFunction::zeros(&g);
        assert!(inner_norm(&f, 2.0, &WeightSpec::unit(1)).is_err());
    }

    #[test]
    fn unit_box_mixed_norm() {
        let g = UniformGrid::<f64>::new(2, 2.0, 16).unwrap();
        let f = SampledFunction::sample(&g, "chi", |x| {
            if (0.0..1.0).contains(&x[0]) && (0.0..1.0).contains(&x[1]) { 1.0 } else { 0.0 }
        })
        .unwrap();
        for (p, q) in [(2.0, 3.0), (1.0, 4.0), (3.0, 1.5)] {
            let params = MixedNormParams::unweighted(p, q, 1, 1);
            assert!((mixed_norm(&f, &params).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn mixed_equals_outer_of_inner() {
        let g = UniformGrid::new(2, 4.0, 32).unwrap();
        let f = SampledFunction::sample(&g, "f", |x: &[f64]| (x[0] * 0.7).sin() + (x[1] * x[0]).cos()).unwrap();
        let params = MixedNormParams {
            p: 2.0,
            q: 3.0,
            u: WeightSpec::power(0.5, 1),
            v: WeightSpec::power(1.0 / 3.0, 1),
        };
        let m = mixed_norm(&f, &params).unwrap();
        let gi = inner_norm(&f, 3.0, &params.v).unwrap();
        let w = weighted_norm(&gi, 2.0, &params.u).unwrap();
        assert!((m - w).abs() <= 1e-12 * m);
    }
}
