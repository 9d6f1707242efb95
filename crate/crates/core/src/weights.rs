//! Weights and their Muckenhoupt constants.
//!
//! Every supremum "over cubes" is taken over an explicit [`CubeFamily`].
//! Averages use midpoint quadrature over the cells of a cube, so the cell
//! volume cancels and all means are plain arithmetic means of samples.

use std::fmt;

use rayon::prelude::*;

use crate::boxsum::{BoxSums, RangeMin};
use crate::grid::{Cube, CubeFamily, SampledFunction, UniformGrid, MAX_DIM};
use crate::maximal::interval_maximal;
use crate::{lit, Error, Real, Result};

/// Description of a weight on `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightSpec<T> {
    Constant { value: T, dim: usize },
    /// `|x - center|^exponent`.
    Power { exponent: T, center: Vec<T> },
    /// `max(1, |x - center|)^exponent`.
    ClippedPower { exponent: T, center: Vec<T> },
    /// `u(x) v(y)` on `R^{n+m}`.
    Product(Box<WeightSpec<T>>, Box<WeightSpec<T>>),
    Sampled(SampledFunction<T>),
    /// Weight produced by the Rubio de Francia construction, kept by value
    /// together with the identifier of the recipe that produced it.
    Generated { id: String, samples: SampledFunction<T> },
}

impl<T: Real> WeightSpec<T> {
    pub fn unit(dim: usize) -> Self {
        WeightSpec::Constant { value: T::one(), dim }
    }

    pub fn power(exponent: T, dim: usize) -> Self {
        WeightSpec::Power { exponent, center: vec![T::zero(); dim] }
    }

    pub fn clipped_power(exponent: T, dim: usize) -> Self {
        WeightSpec::ClippedPower { exponent, center: vec![T::zero(); dim] }
    }

    pub fn product(u: WeightSpec<T>, v: WeightSpec<T>) -> Self {
        WeightSpec::Product(Box::new(u), Box::new(v))
    }

    pub fn dim(&self) -> usize {
        match self {
            WeightSpec::Constant { dim, .. } => *dim,
            WeightSpec::Power { center, .. } | WeightSpec::ClippedPower { center, .. } => {
                center.len()
            }
            WeightSpec::Product(u, v) => u.dim() + v.dim(),
            WeightSpec::Sampled(f) | WeightSpec::Generated { samples: f, .. } => f.grid().dim(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            WeightSpec::Constant { .. } => true,
            WeightSpec::Power { exponent, .. } | WeightSpec::ClippedPower { exponent, .. } => {
                *exponent == T::zero()
            }
            WeightSpec::Product(u, v) => u.is_constant() && v.is_constant(),
            WeightSpec::Sampled(f) | WeightSpec::Generated { samples: f, .. } => f.is_constant(),
        }
    }
}

impl<T: Real> fmt::Display for WeightSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Constant { value, dim } => write!(f, "const({value}; d={dim})"),
            WeightSpec::Power { exponent, center } => write!(f, "|x-{center:?}|^{exponent}"),
            WeightSpec::ClippedPower { exponent, center } => {
                write!(f, "max(1,|x-{center:?}|)^{exponent}")
            }
            WeightSpec::Product(u, v) => write!(f, "({u}) x ({v})"),
            WeightSpec::Sampled(s) => write!(f, "sampled({})", s.label()),
            WeightSpec::Generated { id, .. } => write!(f, "rdf({id})"),
        }
    }
}

/// Distance from cell `i` to `c` along one axis. When `c` sits on the
/// half-cell lattice the difference is formed in lattice units first, so a
/// lattice shift of the center reproduces shifted samples bit for bit.
fn axis_offset<T: Real>(grid: &UniformGrid<T>, i: usize, c: T) -> T {
    let unit = grid.half_width() / T::from_count(grid.points_per_axis());
    let cu = c / unit;
    if cu.fract() == T::zero() && cu.abs() < lit(1e15) {
        let odd = T::from_i64(2 * i as i64 + 1 - grid.points_per_axis() as i64).expect("index");
        (odd - cu) * unit
    } else {
        grid.coordinate(i) - c
    }
}

fn radial<T: Real>(grid: &UniformGrid<T>, cell: usize, center: &[T]) -> T {
    let idx = grid.multi_index(cell);
    (0..grid.dim())
        .map(|k| {
            let t = axis_offset(grid, idx[k], center[k]);
            t * t
        })
        .sum::<T>()
        .sqrt()
}

fn check_positive<T: Real>(f: &SampledFunction<T>) -> Result<()> {
    match f.samples().iter().position(|&v| !(v > T::zero() && v.is_finite())) {
        Some(cell) => Err(Error::NonPositiveWeight { cell, label: f.label().to_string() }),
        None => Ok(()),
    }
}

/// Samples `w` at the cell centers of `grid`, rejecting non-positive values.
pub fn eval_weight<T: Real>(w: &WeightSpec<T>, grid: &UniformGrid<T>) -> Result<SampledFunction<T>> {
    if w.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), found: w.dim() });
    }
    let label = w.to_string();
    let out = match w {
        WeightSpec::Constant { value, .. } => {
            SampledFunction::new(grid.clone(), vec![*value; grid.len()], label)?
        }
        WeightSpec::Power { exponent, center } => {
            let s = (0..grid.len()).map(|c| radial(grid, c, center).powf(*exponent)).collect();
            SampledFunction::new(grid.clone(), s, label)?
        }
        WeightSpec::ClippedPower { exponent, center } => {
            let s = (0..grid.len())
                .map(|c| radial(grid, c, center).max(T::one()).powf(*exponent))
                .collect();
            SampledFunction::new(grid.clone(), s, label)?
        }
        WeightSpec::Product(u, v) => {
            let su = eval_weight(u, &grid.with_dim(u.dim())?)?;
            let sv = eval_weight(v, &grid.with_dim(v.dim())?)?;
            let m = sv.samples().len();
            let s = (0..grid.len())
                .map(|c| su.samples()[c / m] * sv.samples()[c % m])
                .collect();
            SampledFunction::new(grid.clone(), s, label)?
        }
        WeightSpec::Sampled(f) | WeightSpec::Generated { samples: f, .. } => {
            grid.ensure_same(f.grid(), "sampled weight")?;
            f.clone()
        }
    };
    check_positive(&out)?;
    Ok(out)
}

/// Value of an analytic weight at an arbitrary point. Sampled and generated
/// weights only exist on their grid and are rejected.
pub fn eval_weight_at<T: Real>(w: &WeightSpec<T>, x: &[T]) -> Result<T> {
    if w.dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: w.dim(), found: x.len() });
    }
    let dist = |center: &[T]| -> T {
        x.iter().zip(center).map(|(&a, &c)| (a - c) * (a - c)).sum::<T>().sqrt()
    };
    match w {
        WeightSpec::Constant { value, .. } => Ok(*value),
        WeightSpec::Power { exponent, center } => Ok(dist(center).powf(*exponent)),
        WeightSpec::ClippedPower { exponent, center } => {
            Ok(dist(center).max(T::one()).powf(*exponent))
        }
        WeightSpec::Product(u, v) => {
            let n = u.dim();
            Ok(eval_weight_at(u, &x[..n])? * eval_weight_at(v, &x[n..])?)
        }
        WeightSpec::Sampled(_) | WeightSpec::Generated { .. } => Err(Error::invalid(format!(
            "weight {w} has no closed form off its grid"
        ))),
    }
}

/// Parallel argmax with ties resolved toward the smallest index.
pub(crate) fn par_argmax<T: Real>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> (T, usize) {
    (0..n)
        .into_par_iter()
        .map(|i| (f(i), i))
        .reduce(|| (T::neg_infinity(), usize::MAX), better)
}

pub(crate) fn better<T: Real>(a: (T, usize), b: (T, usize)) -> (T, usize) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Index of the first cube with the given start in the exhaustive ordering.
fn exhaustive_start(n: usize, a: usize) -> usize {
    a * n - a * a.saturating_sub(1) / 2
}

/// Estimated `A_p` constant together with its supremizing cube.
#[derive(Clone, Debug)]
pub struct ApReport<T> {
    pub p: T,
    pub constant: T,
    pub argmax_cube: Cube,
    /// Policy of the family the supremum ranged over.
    pub family: String,
    pub family_size: usize,
    /// `[σ]_{A_{p'}}` for `σ = w^{1-p'}` on the same family.
    pub dual_constant: T,
}

pub fn conjugate<T: Real>(p: T) -> T {
    p / (p - T::one())
}

fn check_exponent<T: Real>(p: T) -> Result<()> {
    if !(p > T::one() && p.is_finite()) {
        return Err(Error::invalid(format!("exponent must lie in (1, inf), got {p}")));
    }
    Ok(())
}

/// `[w]_{A_p}` over `family`.
pub fn ap_constant<T: Real>(w: &WeightSpec<T>, p: T, family: &CubeFamily<T>) -> Result<ApReport<T>> {
    let ws = eval_weight(w, family.grid())?;
    ap_constant_sampled(&ws, p, family)
}

pub fn ap_constant_sampled<T: Real>(
    w: &SampledFunction<T>,
    p: T,
    family: &CubeFamily<T>,
) -> Result<ApReport<T>> {
    check_exponent(p)?;
    family.ensure_nonempty()?;
    family.grid().ensure_same(w.grid(), "weight vs cube family")?;
    check_positive(w)?;
    let pc = conjugate(p);
    let e = T::one() - pc;
    let sigma: Vec<T> = w.samples().iter().map(|&x| dual_power(x, e)).collect();
    let wv = w.samples();
    let pm1 = p - T::one();
    let pcm1 = pc - T::one();
    let ((constant, index), (dual_constant, _)) = if w.is_constant() {
        // Every cube attains equality in Jensen; skip the rounding of running sums.
        ((T::one(), 0), (T::one(), 0))
    } else if family.is_exhaustive_1d() {
        let n = wv.len();
        let per_start: Vec<((T, usize), (T, usize))> = (0..n)
            .into_par_iter()
            .map(|a| {
                let (mut sa, mut sb) = (T::zero(), T::zero());
                let mut best = (T::neg_infinity(), usize::MAX);
                let mut best_dual = (T::neg_infinity(), usize::MAX);
                let base = exhaustive_start(n, a);
                for b in a..n {
                    sa += wv[b];
                    sb += sigma[b];
                    let len = T::from_count(b - a + 1);
                    let (ma, mb) = (sa / len, sb / len);
                    let i = base + b - a;
                    best = better(best, (ma * mb.powf(pm1), i));
                    best_dual = better(best_dual, (mb * ma.powf(pcm1), i));
                }
                (best, best_dual)
            })
            .collect();
        per_start.into_iter().fold(
            ((T::neg_infinity(), usize::MAX), (T::neg_infinity(), usize::MAX)),
            |acc, x| (better(acc.0, x.0), better(acc.1, x.1)),
        )
    } else {
        let g = family.grid();
        let sw = BoxSums::new(g.dim(), g.points_per_axis(), wv);
        let ss = BoxSums::new(g.dim(), g.points_per_axis(), &sigma);
        let main = par_argmax(family.len(), |i| {
            let q = family.get(i);
            sw.mean(&q) * ss.mean(&q).powf(pm1)
        });
        let dual = par_argmax(family.len(), |i| {
            let q = family.get(i);
            ss.mean(&q) * sw.mean(&q).powf(pcm1)
        });
        (main, dual)
    };
    Ok(ApReport {
        p,
        constant,
        argmax_cube: family.get(index),
        family: family.policy().to_string(),
        family_size: family.len(),
        dual_constant,
    })
}

/// `w^e`, computed as an exact reciprocal when `e = -1`.
fn dual_power<T: Real>(x: T, e: T) -> T {
    if e == -T::one() {
        x.recip()
    } else {
        x.powf(e)
    }
}

/// `[w]_{A_1}`: largest ratio of the mean of `w` to its minimum over a cube.
pub fn a1_constant<T: Real>(w: &WeightSpec<T>, family: &CubeFamily<T>) -> Result<T> {
    let ws = eval_weight(w, family.grid())?;
    a1_constant_sampled(&ws, family)
}

pub fn a1_constant_sampled<T: Real>(w: &SampledFunction<T>, family: &CubeFamily<T>) -> Result<T> {
    family.ensure_nonempty()?;
    family.grid().ensure_same(w.grid(), "weight vs cube family")?;
    check_positive(w)?;
    let wv = w.samples();
    if family.is_exhaustive_1d() {
        let n = wv.len();
        let best = (0..n)
            .into_par_iter()
            .map(|a| {
                let (mut s, mut lo, mut hi) = (T::zero(), T::infinity(), T::zero());
                let mut best = T::zero();
                for b in a..n {
                    s += wv[b];
                    lo = lo.min(wv[b]);
                    hi = hi.max(wv[b]);
                    let mean = (s / T::from_count(b - a + 1)).max(lo).min(hi);
                    best = best.max(mean / lo);
                }
                best
            })
            .reduce(T::zero, T::max);
        return Ok(best);
    }
    let g = family.grid();
    let n = g.points_per_axis();
    let sums = BoxSums::new(g.dim(), n, wv);
    let rmq = (g.dim() == 1).then(|| {
        let neg: Vec<T> = wv.iter().map(|&v| -v).collect();
        (RangeMin::new(wv), RangeMin::new(&neg))
    });
    // Means are clamped to the sample range so constant weights give exactly 1.
    let (best, _) = par_argmax(family.len(), |i| {
        let q = family.get(i);
        let (lo, hi) = match &rmq {
            Some((rmin, rmax)) => {
                let (s, len) = (q.corner()[0] as usize, q.extent()[0] as usize);
                (rmin.min(s, len), -rmax.min(s, len))
            }
            None => {
                let (mut lo, mut hi) = (T::infinity(), T::zero());
                q.for_each_cell(n, |c| {
                    lo = lo.min(wv[c]);
                    hi = hi.max(wv[c]);
                });
                (lo, hi)
            }
        };
        sums.mean(&q).max(lo).min(hi) / lo
    });
    Ok(best)
}

/// Fujii–Wilson `A_∞` constant with its supremizing cube.
#[derive(Clone, Debug)]
pub struct AinfReport<T> {
    pub constant: T,
    pub argmax_cube: Cube,
    pub family: String,
    pub family_size: usize,
}

impl<T: Real> AinfReport<T> {
    /// Boundary convention used by the inner maximal function.
    pub const CONVENTION: &'static str =
        "inner maximal function restricted to family cubes inside the grid box";
}

/// `sup_Q (1/w(Q)) ∫_Q M(w χ_Q)` where `M` ranges over the cubes of the
/// same family. For the exhaustive 1-D family the inner maximal function is
/// computed exactly from the subintervals of `Q`, which dominate every
/// interval that sticks out of `Q`.
pub fn ainf_constant<T: Real>(w: &WeightSpec<T>, family: &CubeFamily<T>) -> Result<AinfReport<T>> {
    let ws = eval_weight(w, family.grid())?;
    ainf_constant_sampled(&ws, family)
}

pub fn ainf_constant_sampled<T: Real>(
    w: &SampledFunction<T>,
    family: &CubeFamily<T>,
) -> Result<AinfReport<T>> {
    family.ensure_covers()?;
    family.grid().ensure_same(w.grid(), "weight vs cube family")?;
    check_positive(w)?;
    let wv = w.samples();
    let (constant, index) = if family.is_exhaustive_1d() {
        par_argmax(family.len(), |i| {
            let q = family.get(i);
            let (a, len) = (q.corner()[0] as usize, q.extent()[0] as usize);
            let local = &wv[a..a + len];
            let m = interval_maximal(local);
            m.iter().copied().sum::<T>() / local.iter().copied().sum::<T>()
        })
    } else {
        let g = family.grid();
        let n = g.points_per_axis();
        let sums = BoxSums::new(g.dim(), n, wv);
        let cubes: Vec<Cube> = family.iter().collect();
        par_argmax(cubes.len(), |i| {
            let q = cubes[i];
            let mut local = vec![T::zero(); q.cells()];
            for inner in &cubes {
                if let Some(cap) = q.intersect(inner) {
                    let v = sums.sum(&cap) / T::from_count(inner.cells());
                    for_each_local(&q, &cap, |j| {
                        if v > local[j] {
                            local[j] = v;
                        }
                    });
                }
            }
            local.iter().copied().sum::<T>() / sums.sum(&q)
        })
    };
    Ok(AinfReport {
        constant,
        argmax_cube: family.get(index),
        family: family.policy().to_string(),
        family_size: family.len(),
    })
}

/// Visits the cells of `sub` (a box inside `outer`) by their row-major
/// position within `outer`.
fn for_each_local(outer: &Cube, sub: &Cube, mut f: impl FnMut(usize)) {
    let d = outer.dim();
    let mut rel = [0usize; MAX_DIM];
    for k in 0..d {
        rel[k] = (sub.corner()[k] - outer.corner()[k]) as usize;
    }
    let shape: Vec<usize> = outer.extent().iter().map(|&e| e as usize).collect();
    let local = Cube::from_extents(&rel[..d], &sub.extent().iter().map(|&e| e as usize).collect::<Vec<_>>());
    // Row-major traversal of `local` inside a box of shape `shape`.
    let mut idx = [0usize; MAX_DIM];
    idx[..d].copy_from_slice(&rel[..d]);
    loop {
        let flat = (0..d).fold(0, |acc, k| acc * shape[k] + idx[k]);
        f(flat);
        let mut k = d;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < (local.corner()[k] + local.extent()[k]) as usize {
                break;
            }
            idx[k] = local.corner()[k] as usize;
        }
    }
}

#[derive(Clone, Debug)]
pub struct OpennessReport<T> {
    pub p: T,
    pub epsilon: T,
    pub ap_constant: T,
    pub p_minus_eps_constant: T,
    /// `[w]_{A_{p-ε}} / (2^{p-1} [w]_{A_p})`; at most one when openness holds.
    pub ratio_vs_bound: T,
    /// `[σ]_{A_∞}` used for `ε`; absent for `p = 2`, where `[w]_{A_2}` is used.
    pub sigma_ainf: Option<T>,
}

/// Dimensional constant `2^{d+1}` of the openness and reverse Hölder exponents.
pub fn dimensional_constant<T: Real>(dim: usize) -> T {
    T::from_count(1usize << (dim + 1))
}

pub fn openness_check<T: Real>(
    w: &WeightSpec<T>,
    p: T,
    family: &CubeFamily<T>,
) -> Result<OpennessReport<T>> {
    let ws = eval_weight(w, family.grid())?;
    openness_check_sampled(&ws, p, family)
}

pub fn openness_check_sampled<T: Real>(
    w: &SampledFunction<T>,
    p: T,
    family: &CubeFamily<T>,
) -> Result<OpennessReport<T>> {
    check_exponent(p)?;
    let cd = dimensional_constant::<T>(w.grid().dim());
    let ap = ap_constant_sampled(w, p, family)?;
    let two = lit::<T>(2.0);
    let (epsilon, sigma_ainf) = if p == two {
        (T::one() / (cd * ap.constant), None)
    } else {
        let e = T::one() - conjugate(p);
        let sigma = w.map("sigma", |x| x.powf(e))?;
        let s = ainf_constant_sampled(&sigma, family)?.constant;
        ((p - T::one()) / (cd * s), Some(s))
    };
    if !(epsilon > T::zero() && epsilon < p - T::one()) {
        return Err(Error::Inconsistent(format!(
            "openness exponent {epsilon} outside (0, p - 1) for p = {p}"
        )));
    }
    let lower = ap_constant_sampled(w, p - epsilon, family)?.constant;
    Ok(OpennessReport {
        p,
        epsilon,
        ap_constant: ap.constant,
        p_minus_eps_constant: lower,
        ratio_vs_bound: lower / (two.powf(p - T::one()) * ap.constant),
        sigma_ainf,
    })
}

#[derive(Clone, Debug)]
pub struct ReverseHolderReport<T> {
    pub ainf_constant: T,
    pub r_w: T,
    /// `max_Q (⨍_Q w^r)^{1/r} / ⨍_Q w`; at most two when the inequality holds.
    pub worst_ratio: T,
    pub argmax_cube: Cube,
}

/// Reverse Hölder check at `r_w = 1 + 1/(2^{d+1}[w]_{A_∞} - 1)`. When
/// `ainf` is `None` the constant is estimated on `family` first.
pub fn reverse_holder_check<T: Real>(
    w: &WeightSpec<T>,
    family: &CubeFamily<T>,
    ainf: Option<T>,
) -> Result<ReverseHolderReport<T>> {
    let ws = eval_weight(w, family.grid())?;
    reverse_holder_check_sampled(&ws, family, ainf)
}

pub fn reverse_holder_check_sampled<T: Real>(
    w: &SampledFunction<T>,
    family: &CubeFamily<T>,
    ainf: Option<T>,
) -> Result<ReverseHolderReport<T>> {
    family.ensure_nonempty()?;
    let ainf = match ainf {
        Some(a) => a,
        None => ainf_constant_sampled(w, family)?.constant,
    };
    let cd = dimensional_constant::<T>(w.grid().dim());
    let r = T::one() + T::one() / (cd * ainf - T::one());
    let g = family.grid();
    let wr: Vec<T> = w.samples().iter().map(|&x| x.powf(r)).collect();
    let sw = BoxSums::new(g.dim(), g.points_per_axis(), w.samples());
    let sr = BoxSums::new(g.dim(), g.points_per_axis(), &wr);
    let (worst, index) = par_argmax(family.len(), |i| {
        let q = family.get(i);
        sr.mean(&q).powf(r.recip()) / sw.mean(&q)
    });
    Ok(ReverseHolderReport {
        ainf_constant: ainf,
        r_w: r,
        worst_ratio: worst,
        argmax_cube: family.get(index),
    })
}

/// Slacks `RHS - LHS` of the two elementary `A_p` inequalities on a cube `q`
/// with subset `e` (flat cell indices inside `q`):
/// `⨍_Q g ≤ [w]^{1/p} ((1/w(Q)) ∫_Q g^p w)^{1/p}` and
/// `w(Q) ≤ [w] (|Q|/|E|)^p w(E)`.
pub fn elementary_ap_checks<T: Real>(
    w: &SampledFunction<T>,
    p: T,
    constant: T,
    g: &SampledFunction<T>,
    q: &Cube,
    e: &[usize],
) -> Result<(T, T)> {
    check_exponent(p)?;
    w.grid().ensure_same(g.grid(), "weight vs test function")?;
    if e.is_empty() {
        return Err(Error::invalid("subset E is empty"));
    }
    let n = w.grid().points_per_axis();
    let (wv, gv) = (w.samples(), g.samples());
    if gv.iter().any(|&x| x < T::zero()) {
        return Err(Error::invalid("test function must be nonnegative"));
    }
    let (mut g_sum, mut gpw, mut wq) = (T::zero(), T::zero(), T::zero());
    let mut inside = vec![false; w.grid().len()];
    q.for_each_cell(n, |c| {
        g_sum += gv[c];
        gpw += gv[c].powf(p) * wv[c];
        wq += wv[c];
        inside[c] = true;
    });
    let mut we = T::zero();
    for &c in e {
        if !inside.get(c).copied().unwrap_or(false) {
            return Err(Error::invalid(format!("cell {c} of E is not inside Q")));
        }
        we += wv[c];
    }
    let cells = T::from_count(q.cells());
    let lhs1 = g_sum / cells;
    let rhs1 = constant.powf(p.recip()) * (gpw / wq).powf(p.recip());
    let rhs2 = constant * (cells / T::from_count(e.len())).powf(p) * we;
    Ok((rhs1 - lhs1, rhs2 - wq))
}

#[derive(Clone, Debug)]
pub struct ProductCheck<T> {
    pub product_constant: T,
    pub u_constant: T,
    pub v_constant: T,
    /// `[u][v] - [u⊗v]`, nonnegative when the product bound holds.
    pub slack: T,
}

/// Compares `[u⊗v]_{A_q}` over the product family `fu × fv` with `[u][v]`.
pub fn product_constant_check<T: Real>(
    u: &WeightSpec<T>,
    v: &WeightSpec<T>,
    q: T,
    fu: &CubeFamily<T>,
    fv: &CubeFamily<T>,
) -> Result<ProductCheck<T>> {
    let cu = ap_constant(u, q, fu)?.constant;
    let cv = ap_constant(v, q, fv)?.constant;
    let fam = CubeFamily::product(fu, fv)?;
    let uv = WeightSpec::product(u.clone(), v.clone());
    let cp = ap_constant(&uv, q, &fam)?.constant;
    Ok(ProductCheck {
        product_constant: cp,
        u_constant: cu,
        v_constant: cv,
        slack: cu * cv - cp,
    })
}

/// A pair of weights with certified constants, `u ∈ A_p(R^n)`, `v ∈ A_q(R^m)`.
#[derive(Clone, Debug)]
pub struct CertifiedPair<T> {
    pub id: String,
    pub u: WeightSpec<T>,
    pub v: WeightSpec<T>,
    pub p: T,
    pub q: T,
    pub u_constant: T,
    pub v_constant: T,
}

impl<T: Real> CertifiedPair<T> {
    /// Certifies `u` and `v` on the given families.
    pub fn certify(
        id: impl Into<String>,
        u: WeightSpec<T>,
        v: WeightSpec<T>,
        p: T,
        q: T,
        fu: &CubeFamily<T>,
        fv: &CubeFamily<T>,
    ) -> Result<Self> {
        let u_constant = ap_constant(&u, p, fu)?.constant;
        let v_constant = ap_constant(&v, q, fv)?.constant;
        Ok(Self { id: id.into(), u, v, p, q, u_constant, v_constant })
    }

    pub fn max_constant(&self) -> T {
        self.u_constant.max(self.v_constant)
    }

    pub fn product(&self) -> WeightSpec<T> {
        WeightSpec::product(self.u.clone(), self.v.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cube_family, FamilyPolicy};

    fn grid1(l: f64, n: usize) -> UniformGrid<f64> {
        UniformGrid::new(1, l, n).unwrap()
    }

    fn exhaustive(l: f64, n: usize) -> CubeFamily<f64> {
        cube_family(&grid1(l, n), FamilyPolicy::Exhaustive1d).unwrap()
    }

    #[test]
    fn unit_weight_constants() {
        let fam = exhaustive(8.0, 64);
        let one = WeightSpec::unit(1);
        for p in [1.5, 2.0, 3.0] {
            let r = ap_constant(&one, p, &fam).unwrap();
            assert!((r.constant - 1.0).abs() < 1e-9);
            assert!((r.dual_constant - 1.0).abs() < 1e-9);
        }
        assert_eq!(a1_constant(&one, &fam).unwrap(), 1.0);
        let ainf = ainf_constant(&one, &fam).unwrap().constant;
        assert!((1.0..1.0 + 1e-12).contains(&ainf));
    }

    #[test]
    fn power_weight_is_positive_and_symmetric() {
        let g = grid1(8.0, 1024);
        let w = eval_weight(&WeightSpec::power(0.5, 1), &g).unwrap();
        let s = w.samples();
        assert!(s.iter().all(|&v| v > 0.0));
        for i in 0..1024 {
            assert_eq!(s[i], s[1023 - i]);
        }
    }

    #[test]
    fn product_weight_rows_constant_in_y() {
        let g = UniformGrid::new(2, 4.0, 16).unwrap();
        let w = WeightSpec::product(WeightSpec::power(0.5, 1), WeightSpec::unit(1));
        let s = eval_weight(&w, &g).unwrap();
        for row in s.samples().chunks(16) {
            assert!(row.iter().all(|&v| v == row[0]));
        }
    }

    #[test]
    fn nonpositive_weight_rejected_with_cell() {
        let g = grid1(1.0, 4);
        let w = WeightSpec::Power { exponent: 1.0, center: vec![0.25] };
        match eval_weight(&w, &g) {
            Err(Error::NonPositiveWeight { cell, .. }) => assert_eq!(cell, 2),
            other => panic!("unexpected {other:?}"),
        }
        let bad = WeightSpec::Constant { value: -1.0, dim: 1 };
        assert!(eval_weight(&bad, &g).is_err());
    }

    #[test]
    fn empty_family_rejected() {
        let g = grid1(1.0, 8);
        let fam = cube_family(&g, FamilyPolicy::Dyadic).unwrap().filtered(|_| false);
        assert!(matches!(
            ap_constant(&WeightSpec::unit(1), 2.0, &fam),
            Err(Error::EmptyFamily)
        ));
    }

    #[test]
    fn root_weight_exceeds_symmetric_value() {
        let fam = exhaustive(8.0, 512);
        let r = ap_constant(&WeightSpec::power(0.5, 1), 2.0, &fam).unwrap();
        assert!(r.constant >= 4.0 / 3.0 - 1e-3, "{}", r.constant);
        assert!(r.constant < 1.5);
    }

    #[test]
    fn p_two_duality() {
        let fam = exhaustive(8.0, 256);
        let g = fam.grid().clone();
        let w = eval_weight(&WeightSpec::power(0.5, 1), &g).unwrap();
        let sigma = w.map("1/w", |x| 1.0 / x).unwrap();
        let a = ap_constant_sampled(&w, 2.0, &fam).unwrap();
        let b = ap_constant_sampled(&sigma, 2.0, &fam).unwrap();
        assert!((a.constant - b.constant).abs() < 1e-12 * a.constant);
        assert!((a.constant - a.dual_constant).abs() < 1e-12 * a.constant);
    }

    #[test]
    fn lattice_shift_reproduces_samples() {
        let g = grid1(8.0, 64);
        let w0 = eval_weight(&WeightSpec::power(0.5, 1), &g).unwrap();
        let w2 = eval_weight(&WeightSpec::Power { exponent: 0.5, center: vec![2.0] }, &g).unwrap();
        // 2.0 is eight cells: w2[i] = w0[i - 8].
        for i in 8..64 {
            assert_eq!(w2.samples()[i], w0.samples()[i - 8]);
        }
    }

    #[test]
    fn a1_matches_scan_for_clipped_power() {
        let fam = exhaustive(8.0, 128);
        let w = eval_weight(&WeightSpec::clipped_power(-0.5, 1), fam.grid()).unwrap();
        let got = a1_constant_sampled(&w, &fam).unwrap();
        let s = w.samples();
        let mut best: f64 = 0.0;
        for a in 0..128 {
            for b in a..128 {
                let seg = &s[a..=b];
                let mean = seg.iter().sum::<f64>() / seg.len() as f64;
                let lo = seg.iter().cloned().fold(f64::INFINITY, f64::min);
                best = best.max(mean / lo);
            }
        }
        assert!((got - best).abs() <= 1e-12 * best);
        let dy = cube_family(fam.grid(), FamilyPolicy::Dyadic).unwrap();
        assert!(a1_constant_sampled(&w, &dy).unwrap() <= got + 1e-12);
    }

    #[test]
    fn ainf_below_a2_for_root_weight() {
        let fam = exhaustive(8.0, 128);
        let w = WeightSpec::power(0.5, 1);
        let a2 = ap_constant(&w, 2.0, &fam).unwrap().constant;
        let ainf = ainf_constant(&w, &fam).unwrap().constant;
        assert!(ainf >= 1.0 && ainf <= a2 + 1e-9, "{ainf} vs {a2}");
    }

    #[test]
    fn ainf_general_family_matches_exhaustive_path() {
        let g = grid1(4.0, 32);
        let ex = cube_family(&g, FamilyPolicy::Exhaustive1d).unwrap();
        let listed = ex.filtered(|_| true);
        assert!(!listed.is_exhaustive_1d());
        let w = WeightSpec::power(0.7, 1);
        let a = ainf_constant(&w, &ex).unwrap().constant;
        let b = ainf_constant(&w, &listed).unwrap().constant;
        assert!((a - b).abs() < 1e-12 * a, "{a} vs {b}");
    }

    #[test]
    fn openness_for_unit_weight() {
        let g = UniformGrid::new(1, 4.0, 32).unwrap();
        let fam = cube_family(&g, FamilyPolicy::Exhaustive1d).unwrap();
        let r = openness_check(&WeightSpec::<f64>::unit(1), 2.0, &fam).unwrap();
        assert!((r.epsilon - 0.25).abs() < 1e-12);
        assert!((r.p_minus_eps_constant - 1.0).abs() < 1e-12);
        assert!((r.ratio_vs_bound - 0.5).abs() < 1e-12);
    }

    #[test]
    fn openness_general_p_uses_sigma() {
        let fam = exhaustive(4.0, 64);
        let r = openness_check(&WeightSpec::power(0.3, 1), 3.0, &fam).unwrap();
        assert!(r.sigma_ainf.is_some());
        assert!(r.ratio_vs_bound <= 1.0);
    }

    #[test]
    fn reverse_holder_bounds() {
        let fam = exhaustive(8.0, 128);
        let one = reverse_holder_check(&WeightSpec::unit(1), &fam, None).unwrap();
        assert!((one.worst_ratio - 1.0).abs() < 1e-12);
        for w in [WeightSpec::power(0.5, 1), WeightSpec::clipped_power(3.0, 1)] {
            let r = reverse_holder_check(&w, &fam, None).unwrap();
            assert!(r.worst_ratio <= 2.0 + 1e-6, "{w}: {}", r.worst_ratio);
        }
    }

    #[test]
    fn elementary_checks_trivial_cases() {
        let g = grid1(4.0, 16);
        let one = SampledFunction::constant(&g, 1.0, "1").unwrap();
        let q = Cube::new(&[4], 6);
        let all: Vec<usize> = (4..10).collect();
        let (s1, s2) = elementary_ap_checks(&one, 2.0, 1.0, &one, &q, &all).unwrap();
        assert!(s1.abs() < 1e-12 && s2.abs() < 1e-12);
        let e: Vec<usize> = vec![5, 6];
        let chi = SampledFunction::sample(&g, "chiE", |x| {
            let i = ((x[0] + 4.0) / 0.5) as usize;
            if i == 5 || i == 6 { 1.0 } else { 0.0 }
        })
        .unwrap();
        let (s1, _) = elementary_ap_checks(&one, 2.0, 1.0, &chi, &q, &e).unwrap();
        assert!(s1 >= 0.0);
        assert!(elementary_ap_checks(&one, 2.0, 1.0, &one, &q, &[]).is_err());
        assert!(elementary_ap_checks(&one, 2.0, 1.0, &one, &q, &[0]).is_err());
    }

    #[test]
    fn product_constant_equality_with_unit_factor() {
        let g = grid1(4.0, 32);
        let fam = cube_family(&g, FamilyPolicy::Exhaustive1d).unwrap();
        let r = product_constant_check(
            &WeightSpec::power(0.5, 1),
            &WeightSpec::unit(1),
            2.0,
            &fam,
            &fam,
        )
        .unwrap();
        assert!(r.slack.abs() < 1e-9 * r.u_constant);
    }
}
