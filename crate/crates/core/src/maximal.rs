//! Uncentered Hardy–Littlewood and sharp maximal operators over cube families.
//!
//! Cube means are clamped to the range of the samples they average. The
//! clamp never changes a mathematically valid mean, and it makes constants
//! exact fixed points in floating point.

use rayon::prelude::*;

use crate::grid::{Cube, CubeFamily, SampledFunction};
use crate::norms::{weighted_norm_sampled, MixedNorm, MixedNormParams};
use crate::weights::{eval_weight, WeightSpec};
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug)]
pub struct MaximalParams<'a, T> {
    pub delta: T,
    pub family: &'a CubeFamily<T>,
}

impl<'a, T: Real> MaximalParams<'a, T> {
    pub fn new(family: &'a CubeFamily<T>) -> Self {
        Self { delta: T::one(), family }
    }

    pub fn with_delta(family: &'a CubeFamily<T>, delta: T) -> Self {
        Self { delta, family }
    }

    fn validate(&self, f: &SampledFunction<T>) -> Result<()> {
        if !(self.delta > T::zero() && self.delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        self.family.grid().ensure_same(f.grid(), "function vs cube family")?;
        self.family.ensure_covers()
    }
}

#[inline]
fn clamped_mean<T: Real>(sum: T, len: usize, lo: T, hi: T) -> T {
    (sum / T::from_count(len)).max(lo).min(hi)
}

/// Maximal function of `v` over all subintervals of `0..v.len()`.
///
/// For each start `s` the running means over `[s, e]` are folded into a
/// suffix maximum, which is the best interval starting at `s` that contains
/// a given point. The result is `O(N^2)` and reproduces the brute-force
/// reference bit for bit, since every mean is formed by the same left-to-right
/// accumulation.
pub(crate) fn interval_maximal<T: Real>(v: &[T]) -> Vec<T> {
    let n = v.len();
    let mut out = vec![T::zero(); n];
    let mut means = vec![T::zero(); n];
    for s in 0..n {
        scan_start(v, s, &mut means, &mut out);
    }
    out
}

fn scan_start<T: Real>(v: &[T], s: usize, means: &mut [T], out: &mut [T]) {
    let n = v.len();
    let (mut sum, mut lo, mut hi) = (T::zero(), T::infinity(), T::neg_infinity());
    for e in s..n {
        sum += v[e];
        lo = lo.min(v[e]);
        hi = hi.max(v[e]);
        means[e] = clamped_mean(sum, e - s + 1, lo, hi);
    }
    let mut best = T::neg_infinity();
    for e in (s..n).rev() {
        best = best.max(means[e]);
        if best > out[e] {
            out[e] = best;
        }
    }
}

fn interval_maximal_par<T: Real>(v: &[T]) -> Vec<T> {
    let n = v.len();
    (0..n)
        .into_par_iter()
        .fold(
            || (vec![T::zero(); n], vec![T::zero(); n]),
            |(mut out, mut means), s| {
                scan_start(v, s, &mut means, &mut out);
                (out, means)
            },
        )
        .map(|(out, _)| out)
        .reduce(|| vec![T::zero(); n], elementwise_max)
}

fn elementwise_max<T: Real>(mut a: Vec<T>, b: Vec<T>) -> Vec<T> {
    for (x, y) in a.iter_mut().zip(b) {
        if y > *x {
            *x = y;
        }
    }
    a
}

/// Sum, minimum and maximum of `v` over the cells of `q`.
fn cube_stats<T: Real>(v: &[T], q: &Cube, n: usize) -> (T, T, T) {
    let (mut sum, mut lo, mut hi) = (T::zero(), T::infinity(), T::neg_infinity());
    q.for_each_cell(n, |c| {
        sum += v[c];
        lo = lo.min(v[c]);
        hi = hi.max(v[c]);
    });
    (sum, lo, hi)
}

/// Scatters one value per cube onto its cells, keeping the maximum.
fn scatter_max<T: Real>(family: &CubeFamily<T>, values: &[T]) -> Vec<T> {
    let g = family.grid();
    let n = g.points_per_axis();
    let mut out = vec![T::neg_infinity(); g.len()];
    for (q, &val) in family.iter().zip(values) {
        q.for_each_cell(n, |c| {
            if val > out[c] {
                out[c] = val;
            }
        });
    }
    out
}

fn maximal_of<T: Real>(v: &[T], family: &CubeFamily<T>) -> Vec<T> {
    if family.is_exhaustive_1d() {
        return interval_maximal_par(v);
    }
    let n = family.grid().points_per_axis();
    let means: Vec<T> = (0..family.len())
        .into_par_iter()
        .map(|i| {
            let q = family.get(i);
            let (sum, lo, hi) = cube_stats(v, &q, n);
            clamped_mean(sum, q.cells(), lo, hi)
        })
        .collect();
    scatter_max(family, &means)
}

fn power_transform<T: Real>(f: &[T], delta: T) -> Vec<T> {
    if delta == T::one() {
        f.iter().map(|x| x.abs()).collect()
    } else {
        f.iter().map(|x| x.abs().powf(delta)).collect()
    }
}

fn root_transform<T: Real>(v: Vec<T>, delta: T) -> Vec<T> {
    if delta == T::one() {
        v
    } else {
        let inv = delta.recip();
        v.into_iter().map(|x| x.powf(inv)).collect()
    }
}

/// `M_δ f = (M |f|^δ)^{1/δ}`; plain `M` when `δ = 1`.
pub fn hl_maximal<T: Real>(
    f: &SampledFunction<T>,
    params: &MaximalParams<'_, T>,
) -> Result<SampledFunction<T>> {
    params.validate(f)?;
    let v = power_transform(f.samples(), params.delta);
    let m = root_transform(maximal_of(&v, params.family), params.delta);
    Ok(SampledFunction::from_parts(
        f.grid().clone(),
        m,
        format!("M_{} {}", params.delta, f.label()),
    ))
}

/// Mean oscillation `⨍_Q |v - v_Q|` for every cube of the family.
pub(crate) fn oscillations<T: Real>(v: &[T], family: &CubeFamily<T>) -> Vec<T> {
    let n = family.grid().points_per_axis();
    (0..family.len())
        .into_par_iter()
        .map(|i| {
            let q = family.get(i);
            let (sum, lo, hi) = cube_stats(v, &q, n);
            if lo == hi {
                return T::zero();
            }
            let mean = clamped_mean(sum, q.cells(), lo, hi);
            let mut dev = T::zero();
            q.for_each_cell(n, |c| dev += (v[c] - mean).abs());
            dev / T::from_count(q.cells())
        })
        .collect()
}

fn sharp_of<T: Real>(v: &[T], family: &CubeFamily<T>) -> Vec<T> {
    let osc = oscillations(v, family);
    scatter_max(family, &osc)
}

/// `M^#_δ f = (M^#(|f|^δ))^{1/δ}`.
pub fn sharp_maximal<T: Real>(
    f: &SampledFunction<T>,
    params: &MaximalParams<'_, T>,
) -> Result<SampledFunction<T>> {
    params.validate(f)?;
    let v = power_transform(f.samples(), params.delta);
    let m = root_transform(sharp_of(&v, params.family), params.delta);
    Ok(SampledFunction::from_parts(
        f.grid().clone(),
        m,
        format!("M#_{} {}", params.delta, f.label()),
    ))
}

/// `M^# f` of the signed function, without taking absolute values first.
pub fn sharp_maximal_signed<T: Real>(
    f: &SampledFunction<T>,
    family: &CubeFamily<T>,
) -> Result<SampledFunction<T>> {
    MaximalParams::new(family).validate(f)?;
    Ok(SampledFunction::from_parts(
        f.grid().clone(),
        sharp_of(f.samples(), family),
        format!("M# {}", f.label()),
    ))
}

/// Direct evaluation from the definitions, for oracle comparisons.
pub mod reference {
    use super::*;

    /// `O(N^3)` maximal function over all subintervals of a 1-D sample vector.
    pub fn interval_maximal_brute<T: Real>(v: &[T]) -> Vec<T> {
        let n = v.len();
        (0..n)
            .map(|x| {
                let mut best = T::neg_infinity();
                for s in 0..=x {
                    let (mut sum, mut lo, mut hi) = (T::zero(), T::infinity(), T::neg_infinity());
                    for e in s..n {
                        sum += v[e];
                        lo = lo.min(v[e]);
                        hi = hi.max(v[e]);
                        if e >= x {
                            best = best.max(clamped_mean(sum, e - s + 1, lo, hi));
                        }
                    }
                }
                best
            })
            .collect()
    }

    /// Maximal function by looping over every cube that contains each cell.
    pub fn hl_maximal_brute<T: Real>(f: &SampledFunction<T>, family: &CubeFamily<T>) -> Vec<T> {
        let g = f.grid();
        let n = g.points_per_axis();
        let v: Vec<T> = f.samples().iter().map(|x| x.abs()).collect();
        (0..g.len())
            .map(|cell| {
                let idx = g.multi_index(cell);
                family
                    .iter()
                    .filter(|q| q.contains(&idx))
                    .map(|q| {
                        let (sum, lo, hi) = cube_stats(&v, &q, n);
                        clamped_mean(sum, q.cells(), lo, hi)
                    })
                    .fold(T::zero(), T::max)
            })
            .collect()
    }

    /// Signed sharp maximal function by direct double loops.
    pub fn sharp_maximal_brute<T: Real>(f: &SampledFunction<T>, family: &CubeFamily<T>) -> Vec<T> {
        let g = f.grid();
        let n = g.points_per_axis();
        let v = f.samples();
        (0..g.len())
            .map(|cell| {
                let idx = g.multi_index(cell);
                family
                    .iter()
                    .filter(|q| q.contains(&idx))
                    .map(|q| {
                        let mut cells = Vec::new();
                        q.for_each_cell(n, |c| cells.push(v[c]));
                        let mean = cells.iter().copied().sum::<T>() / T::from_count(cells.len());
                        cells.iter().map(|&x| (x - mean).abs()).sum::<T>()
                            / T::from_count(cells.len())
                    })
                    .fold(T::zero(), T::max)
            })
            .collect()
    }
}

/// Largest `‖Mf‖_{L^p(w)} / ‖f‖_{L^p(w)}` over the probes: a lower envelope
/// for the operator norm of `M` on `L^p(w)`.
pub fn muckenhoupt_ratio<T: Real>(
    p: T,
    w: &WeightSpec<T>,
    probes: &[SampledFunction<T>],
    family: &CubeFamily<T>,
) -> Result<T> {
    if probes.is_empty() {
        return Err(Error::EmptyProbes);
    }
    let ws = eval_weight(w, family.grid())?;
    let params = MaximalParams::new(family);
    let mut best = T::zero();
    for f in probes {
        let denom = weighted_norm_sampled(f, p, &ws)?;
        if denom == T::zero() {
            return Err(Error::invalid(format!("probe `{}` has zero norm", f.label())));
        }
        let mf = hl_maximal(f, &params)?;
        best = best.max(weighted_norm_sampled(&mf, p, &ws)? / denom);
    }
    Ok(best)
}

/// Outcome of a Fefferman–Stein ratio evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FsOutcome<T> {
    Ratio(T),
    /// `M_δ^# f` vanishes identically, so the ratio is undefined.
    Degenerate,
}

impl<T: Real> FsOutcome<T> {
    pub fn ratio(&self) -> Option<T> {
        match self {
            FsOutcome::Ratio(r) => Some(*r),
            FsOutcome::Degenerate => None,
        }
    }
}

fn fs_outcome<T: Real>(num: T, den: T) -> FsOutcome<T> {
    if den == T::zero() {
        FsOutcome::Degenerate
    } else {
        FsOutcome::Ratio(num / den)
    }
}

/// `‖M_δ f‖_{L^p(w)} / ‖M_δ^# f‖_{L^p(w)}`.
pub fn fefferman_stein_ratio<T: Real>(
    f: &SampledFunction<T>,
    p: T,
    delta: T,
    w: &WeightSpec<T>,
    family: &CubeFamily<T>,
) -> Result<FsOutcome<T>> {
    let params = MaximalParams::with_delta(family, delta);
    let ws = eval_weight(w, f.grid())?;
    let num = weighted_norm_sampled(&hl_maximal(f, &params)?, p, &ws)?;
    let den = weighted_norm_sampled(&sharp_maximal(f, &params)?, p, &ws)?;
    Ok(fs_outcome(num, den))
}

/// Mixed-norm version: `‖M_δ f‖_{L^p_u L^q_v} / ‖M_δ^# f‖_{L^p_u L^q_v}`.
pub fn fefferman_stein_ratio_mixed<T: Real>(
    f: &SampledFunction<T>,
    norm: &MixedNormParams<T>,
    delta: T,
    family: &CubeFamily<T>,
) -> Result<FsOutcome<T>> {
    let params = MaximalParams::with_delta(family, delta);
    let mn = MixedNorm::new(f.grid(), norm)?;
    let num = mn.norm(&hl_maximal(f, &params)?)?;
    let den = mn.norm(&sharp_maximal(f, &params)?)?;
    Ok(fs_outcome(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cube_family, FamilyPolicy, UniformGrid};

    fn setup(l: f64, n: usize) -> (UniformGrid<f64>, CubeFamily<f64>) {
        let g = UniformGrid::new(1, l, n).unwrap();
        let fam = cube_family(&g, FamilyPolicy::Exhaustive1d).unwrap();
        (g, fam)
    }

    #[test]
    fn constant_is_fixed_point() {
        let (g, fam) = setup(4.0, 64);
        let f = SampledFunction::constant(&g, 0.1, "c").unwrap();
        let m = hl_maximal(&f, &MaximalParams::new(&fam)).unwrap();
        assert!(m.samples().iter().all(|&v| v == 0.1));
        let s = sharp_maximal_signed(&f, &fam).unwrap();
        assert!(s.samples().iter().all(|&v| v == 0.0));
        let dy = cube_family(&g, FamilyPolicy::Dyadic).unwrap();
        let m = hl_maximal(&f, &MaximalParams::new(&dy)).unwrap();
        assert!(m.samples().iter().all(|&v| v == 0.1));
    }

    #[test]
    fn indicator_profile() {
        let (g, fam) = setup(4.0, 256);
        let f = SampledFunction::sample(&g, "chi", |x| if x[0].abs() <= 1.0 { 1.0 } else { 0.0 })
            .unwrap();
        let m = hl_maximal(&f, &MaximalParams::new(&fam)).unwrap();
        let h = g.spacing();
        for (i, &v) in m.samples().iter().enumerate() {
            let x = g.coordinate(i).abs();
            if x <= 1.0 {
                assert_eq!(v, 1.0);
            } else {
                // The best interval runs from the far end of the support to the cell edge.
                let expect = 2.0 / (x + h / 2.0 + 1.0);
                assert!((v - expect).abs() <= 2.0 * h, "x={x}: {v} vs {expect}");
            }
        }
    }

    #[test]
    fn fast_matches_brute_exactly() {
        let v: Vec<f64> = (0..97).map(|i| ((i * 7919 % 101) as f64 / 13.0).sin().abs()).collect();
        assert_eq!(interval_maximal(&v), reference::interval_maximal_brute(&v));
        assert_eq!(interval_maximal_par(&v), interval_maximal(&v));
    }

    #[test]
    fn dominates_absolute_value_and_sharp() {
        let (g, fam) = setup(4.0, 128);
        let f = SampledFunction::sample(&g, "f", |x| (3.0 * x[0]).sin() * (-x[0] * x[0]).exp()).unwrap();
        let m = hl_maximal(&f, &MaximalParams::new(&fam)).unwrap();
        let s = sharp_maximal_signed(&f, &fam).unwrap();
        for i in 0..128 {
            assert!(m.samples()[i] >= f.samples()[i].abs());
            assert!(s.samples()[i] <= 2.0 * m.samples()[i] + 1e-15);
        }
    }

    #[test]
    fn sign_function_oscillation() {
        let (g, fam) = setup(4.0, 256);
        let f = SampledFunction::sample(&g, "sign", |x| x[0].signum()).unwrap();
        let s = sharp_maximal_signed(&f, &fam).unwrap();
        assert_eq!(s.samples()[127], 1.0);
        assert_eq!(s.samples()[128], 1.0);
        assert!(s.samples().iter().all(|&v| v == 1.0));
        let brute = reference::sharp_maximal_brute(&f, &fam);
        for (a, b) in s.samples().iter().zip(&brute) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_one_is_plain_operator() {
        let (g, fam) = setup(2.0, 64);
        let f = SampledFunction::sample(&g, "f", |x| (x[0] * 2.0).cos().abs()).unwrap();
        let a = hl_maximal(&f, &MaximalParams::new(&fam)).unwrap();
        let b = hl_maximal(&f, &MaximalParams::with_delta(&fam, 1.0)).unwrap();
        assert_eq!(a.samples(), b.samples());
        let c = sharp_maximal(&f, &MaximalParams::new(&fam)).unwrap();
        let d = sharp_maximal_signed(&f, &fam).unwrap();
        assert_eq!(c.samples(), d.samples());
    }

    #[test]
    fn uncovered_family_rejected() {
        let g = UniformGrid::new(2, 2.0, 16).unwrap();
        let fam = cube_family(&g, FamilyPolicy::Dyadic)
            .unwrap()
            .filtered(|q| q.corner()[0] == 0 && q.extent()[0] < 16);
        let f = SampledFunction::zeros(&g);
        assert!(matches!(
            hl_maximal(&f, &MaximalParams::new(&fam)),
            Err(Error::Uncovered { .. })
        ));
    }

    #[test]
    fn general_family_matches_brute() {
        let g = UniformGrid::<f64>::new(2, 2.0, 8).unwrap();
        let fam = cube_family(&g, FamilyPolicy::ShiftedDyadic).unwrap();
        let f = SampledFunction::sample(&g, "f", |x| x[0] * x[1] - 0.3).unwrap();
        let m = hl_maximal(&f, &MaximalParams::new(&fam)).unwrap();
        assert_eq!(m.samples(), &reference::hl_maximal_brute(&f, &fam)[..]);
        let s = sharp_maximal_signed(&f, &fam).unwrap();
        for (a, b) in s.samples().iter().zip(reference::sharp_maximal_brute(&f, &fam)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fefferman_stein_constant_is_degenerate() {
        let (g, fam) = setup(2.0, 64);
        let f = SampledFunction::constant(&g, 3.0, "c").unwrap();
        let r = fefferman_stein_ratio(&f, 2.0, 1.0, &WeightSpec::unit(1), &fam).unwrap();
        assert_eq!(r, FsOutcome::Degenerate);
    }

    #[test]
    fn fefferman_stein_scale_invariant() {
        let (g, fam) = setup(4.0, 128);
        let f = SampledFunction::sample(&g, "bump", |x| (-4.0 * x[0] * x[0]).exp()).unwrap();
        let w = WeightSpec::power(0.5, 1);
        let a = fefferman_stein_ratio(&f, 2.0, 0.5, &w, &fam).unwrap().ratio().unwrap();
        let b = fefferman_stein_ratio(&f.scaled(3.7), 2.0, 0.5, &w, &fam).unwrap().ratio().unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn muckenhoupt_ratio_unit_weight() {
        let (g, fam) = setup(8.0, 256);
        let probes: Vec<_> = [0.5, 1.0, 2.0]
            .iter()
            .map(|s| SampledFunction::sample(&g, "g", |x| (-(x[0] / s).powi(2)).exp()).unwrap())
            .collect();
        let r = muckenhoupt_ratio(2.0, &WeightSpec::unit(1), &probes, &fam).unwrap();
        assert!(r >= 1.0);
        assert!(muckenhoupt_ratio(2.0, &WeightSpec::unit(1), &[], &fam).is_err());
    }
}
