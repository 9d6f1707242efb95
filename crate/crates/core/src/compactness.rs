//! Fréchet–Kolmogorov diagnostics for operators on weighted (mixed) Lebesgue
//! spaces.
//!
//! The unit ball is replaced by a finite adversarial [`ProbeFamily`]. Every
//! PASS verdict is relative to that family; FAIL verdicts name a witness.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::grid::{SampledFunction, UniformGrid, MAX_DIM};
use crate::norms::{MixedNorm, MixedNormParams};
use crate::operators::{apply, OperatorSpec};
use crate::weights::{eval_weight, eval_weight_at, CertifiedPair, WeightSpec};
use crate::{lit, Error, Real, Result};

/// Norm in which profiles are measured: `L^p(w)` or `L^p_u L^q_v`.
#[derive(Clone, Debug)]
pub enum ActiveNorm<T> {
    Weighted { p: T, w: Vec<T>, volume: T },
    Mixed(MixedNorm<T>),
}

impl<T: Real> ActiveNorm<T> {
    pub fn weighted(grid: &UniformGrid<T>, p: T, w: &WeightSpec<T>) -> Result<Self> {
        if !(p >= T::one() && p.is_finite()) {
            return Err(Error::invalid(format!("exponent {p} outside [1, inf)")));
        }
        Ok(ActiveNorm::Weighted {
            p,
            w: eval_weight(w, grid)?.into_samples(),
            volume: grid.cell_volume(),
        })
    }

    pub fn mixed(grid: &UniformGrid<T>, params: &MixedNormParams<T>) -> Result<Self> {
        Ok(ActiveNorm::Mixed(MixedNorm::new(grid, params)?))
    }

    /// `L^p_u L^q_v` with `u` on the leading axes, or `L^p(u)` when `v` is
    /// zero-dimensional is not representable, so `v` must have `dim >= 1`.
    pub fn from_pair(grid: &UniformGrid<T>, pair: &CertifiedPair<T>) -> Result<Self> {
        Self::mixed(
            grid,
            &MixedNormParams { p: pair.p, q: pair.q, u: pair.u.clone(), v: pair.v.clone() },
        )
    }

    pub fn norm(&self, f: &SampledFunction<T>) -> Result<T> {
        match self {
            ActiveNorm::Weighted { w, .. } if w.len() != f.samples().len() => {
                Err(Error::invalid("function does not live on the norm's grid"))
            }
            ActiveNorm::Mixed(m) => m.norm(f),
            _ => Ok(self.norm_slice(f.samples())),
        }
    }

    fn norm_slice(&self, f: &[T]) -> T {
        match self {
            ActiveNorm::Weighted { p, w, volume } => {
                let s: T = f.iter().zip(w).map(|(&x, &wt)| x.abs().powf(*p) * wt).sum();
                (s * *volume).powf(p.recip())
            }
            ActiveNorm::Mixed(m) => m.norm_slice(f),
        }
    }
}

/// Recipe for a probe family: Gaussians of width `2^{-j}` centered at the
/// listed points, each optionally modulated by
/// `Π_k cos(ω (x_k - x_min))` with `ω = π / (2^m h)`. `m = 0` is the top
/// lattice frequency, where the modulation is `(-1)^{i_1 + ... + i_d}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRecipe<T> {
    pub scales: Vec<i32>,
    pub centers: Vec<Vec<T>>,
    /// Extra lattice-aligned centers drawn from `[-L/2, L/2]^d`.
    pub random_centers: usize,
    pub modulations: Vec<Option<u32>>,
    pub seed: u64,
}

impl<T: Real> ProbeRecipe<T> {
    /// Widths `1, 1/2, 1/4`, the origin plus two random centers, and
    /// modulations none, `m = 0, 1, 2`.
    pub fn standard(dim: usize, seed: u64) -> Self {
        Self {
            scales: vec![0, 1, 2],
            centers: vec![vec![T::zero(); dim]],
            random_centers: 2,
            modulations: vec![None, Some(0), Some(1), Some(2)],
            seed,
        }
    }
}

/// Finite surrogate for the unit ball.
#[derive(Clone, Debug)]
pub struct ProbeFamily<T> {
    grid: UniformGrid<T>,
    probes: Vec<SampledFunction<T>>,
    ids: Vec<String>,
}

impl<T: Real> ProbeFamily<T> {
    /// Raw (unnormalized) probes in recipe order: center, then scale, then
    /// modulation.
    pub fn generate(grid: &UniformGrid<T>, recipe: &ProbeRecipe<T>) -> Result<Self> {
        let d = grid.dim();
        if recipe.scales.is_empty() || recipe.modulations.is_empty() {
            return Err(Error::EmptyProbes);
        }
        let mut centers = recipe.centers.clone();
        if let Some(c) = centers.iter().find(|c| c.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: c.len() });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
        let h = grid.spacing();
        let half = grid.points_per_axis() as i64 / 4;
        for _ in 0..recipe.random_centers {
            centers.push(
                (0..d)
                    .map(|_| T::from_i64(rng.gen_range(-half..=half)).expect("index") * h)
                    .collect(),
            );
        }
        let x0 = grid.coordinate(0);
        let mut probes = Vec::new();
        let mut ids = Vec::new();
        for c in &centers {
            for &j in &recipe.scales {
                let s = lit::<T>(2f64.powi(-j));
                for &m in &recipe.modulations {
                    let omega = m.map(|m| T::PI() / (lit::<T>(2f64.powi(m as i32)) * h));
                    let f = SampledFunction::sample(grid, "", |x| {
                        let r2: T = x.iter().zip(c).map(|(&a, &b)| (a - b) * (a - b)).sum();
                        let mut v = (-r2 / (lit::<T>(2.0) * s * s)).exp();
                        if let Some(om) = omega {
                            for &xk in x {
                                v *= (om * (xk - x0)).cos();
                            }
                        }
                        v
                    })?;
                    let c_txt: Vec<String> = c.iter().map(|v| format!("{v}")).collect();
                    let id = match m {
                        Some(m) => format!("gauss(2^-{j})@({})*cos(pi/2^{m}h)", c_txt.join(",")),
                        None => format!("gauss(2^-{j})@({})", c_txt.join(",")),
                    };
                    probes.push(f.with_label(id.clone()));
                    ids.push(id);
                }
            }
        }
        Ok(Self { grid: grid.clone(), probes, ids })
    }

    /// Wraps explicit functions; ids are their labels.
    pub fn from_functions(grid: &UniformGrid<T>, probes: Vec<SampledFunction<T>>) -> Result<Self> {
        if probes.is_empty() {
            return Err(Error::EmptyProbes);
        }
        for f in &probes {
            grid.ensure_same(f.grid(), "probe")?;
        }
        let ids = probes.iter().map(|f| f.label().to_string()).collect();
        Ok(Self { grid: grid.clone(), probes, ids })
    }

    /// Rescales every probe to norm 1. Probes with zero norm are dropped.
    pub fn normalized(&self, norm: &ActiveNorm<T>) -> Result<Self> {
        let mut probes = Vec::with_capacity(self.probes.len());
        let mut ids = Vec::with_capacity(self.ids.len());
        for (f, id) in self.probes.iter().zip(&self.ids) {
            let n = norm.norm(f)?;
            if n > T::zero() {
                probes.push(f.scaled(n.recip()).with_label(id.clone()));
                ids.push(id.clone());
            }
        }
        if probes.is_empty() {
            return Err(Error::EmptyProbes);
        }
        Ok(Self { grid: self.grid.clone(), probes, ids })
    }

    /// True when every probe has norm within `tol` of 1.
    pub fn is_normalized(&self, norm: &ActiveNorm<T>, tol: T) -> Result<bool> {
        for f in &self.probes {
            if (norm.norm(f)? - T::one()).abs() > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn probes(&self) -> &[SampledFunction<T>] {
        &self.probes
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Thresholds crossed for every probe of the family.
    Pass,
    /// The translation modulus stays above a fixed fraction of the bound at
    /// every tested shift.
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS (relative to probe family)",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Radii, shifts and thresholds for a profile.
#[derive(Clone, Debug)]
pub struct ProfileParams<T> {
    /// Increasing tail radii.
    pub radii: Vec<T>,
    /// Increasing shifts in cells, applied along each axis in turn.
    pub shifts: Vec<usize>,
    pub epsilon: T,
    /// FAIL when the modulus is at least this fraction of the bound at
    /// every shift.
    pub floor_fraction: T,
}

impl<T: Real> ProfileParams<T> {
    pub fn new(radii: Vec<T>, shifts: Vec<usize>, epsilon: T) -> Result<Self> {
        if radii.is_empty() || shifts.is_empty() {
            return Err(Error::invalid("radius and shift lists must be nonempty"));
        }
        if radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("radii must be strictly increasing"));
        }
        if shifts[0] == 0 || shifts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("shifts must be positive and strictly increasing"));
        }
        Ok(Self { radii, shifts, epsilon, floor_fraction: lit(0.5) })
    }

    fn check(&self, grid: &UniformGrid<T>) -> Result<()> {
        match self.shifts.last() {
            Some(&s) if s >= grid.points_per_axis() => {
                Err(Error::invalid(format!("shift of {s} cells leaves the box")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompactnessProfile<T> {
    /// `max_f ‖Tf‖`.
    pub bound_k: T,
    /// `(R, max_f ‖χ_{|x|>R} Tf‖)`.
    pub tail_curve: Vec<(T, T)>,
    /// `(|h|, max_f max_axis ‖Tf - Tf(· + h e_k)‖)`.
    pub modulus_curve: Vec<(T, T)>,
    pub epsilon: T,
    pub verdict: Verdict,
    /// Probe attaining the modulus at the smallest shift.
    pub witness: Option<String>,
}

impl<T: Real> CompactnessProfile<T> {
    /// Smallest tested `R` from which the tail stays below `eps·bound_K`.
    pub fn r_star(&self, eps: T) -> Option<T> {
        let cut = eps * self.bound_k;
        let mut best = None;
        for &(r, v) in self.tail_curve.iter().rev() {
            if v > cut {
                break;
            }
            best = Some(r);
        }
        best
    }

    /// Largest tested `|h|` up to which the modulus stays below `eps·bound_K`.
    pub fn delta_star(&self, eps: T) -> Option<T> {
        let cut = eps * self.bound_k;
        let mut best = None;
        for &(h, v) in &self.modulus_curve {
            if v > cut {
                break;
            }
            best = Some(h);
        }
        best
    }
}

/// `g(x) - g(x + c e_axis)` on the cells where both points lie in the box,
/// zero elsewhere. Values of `g` beyond the box are unknown rather than
/// zero, so the comparison is restricted to the overlap `Ω ∩ (Ω - h)`.
pub fn shift_difference<T: Real>(g: &SampledFunction<T>, axis: usize, c: usize) -> Vec<T> {
    let grid = g.grid();
    let n = grid.points_per_axis();
    let stride = n.pow((grid.dim() - 1 - axis) as u32);
    let v = g.samples();
    (0..v.len())
        .map(|cell| {
            if (cell / stride) % n + c < n {
                v[cell] - v[cell + c * stride]
            } else {
                T::zero()
            }
        })
        .collect()
}

struct ProbeCurves<T> {
    bound: T,
    tails: Vec<T>,
    moduli: Vec<T>,
}

fn probe_curves<T: Real>(
    out: &SampledFunction<T>,
    scale: T,
    norm: &ActiveNorm<T>,
    params: &ProfileParams<T>,
) -> ProbeCurves<T> {
    let d = out.grid().dim();
    let bound = norm.norm_slice(out.samples()) * scale;
    let tails = params
        .radii
        .iter()
        .map(|&r| norm.norm_slice(out.tail_restrict(r).samples()) * scale)
        .collect();
    let moduli = params
        .shifts
        .iter()
        .map(|&c| {
            let mut worst = T::zero();
            for axis in 0..d {
                worst = worst.max(norm.norm_slice(&shift_difference(out, axis, c)) * scale);
            }
            worst
        })
        .collect();
    ProbeCurves { bound, tails, moduli }
}

/// Assembles a profile from precomputed outputs `T f_i`, each multiplied by
/// `scales[i]` (the reciprocal input norm).
fn assemble<T: Real>(
    outputs: &[SampledFunction<T>],
    scales: &[T],
    ids: &[String],
    norm: &ActiveNorm<T>,
    params: &ProfileParams<T>,
) -> CompactnessProfile<T> {
    let curves: Vec<ProbeCurves<T>> = outputs
        .par_iter()
        .zip(scales.par_iter())
        .map(|(out, &s)| probe_curves(out, s, norm, params))
        .collect();
    let bound_k = curves.iter().map(|c| c.bound).fold(T::zero(), T::max);
    let h = outputs[0].grid().spacing();
    let tail_curve = params
        .radii
        .iter()
        .enumerate()
        .map(|(k, &r)| (r, curves.iter().map(|c| c.tails[k]).fold(T::zero(), T::max)))
        .collect::<Vec<_>>();
    let modulus_curve = params
        .shifts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            (T::from_count(c) * h, curves.iter().map(|cv| cv.moduli[k]).fold(T::zero(), T::max))
        })
        .collect::<Vec<_>>();
    let mut witness = None;
    let mut top = T::neg_infinity();
    for (c, id) in curves.iter().zip(ids) {
        if c.moduli[0] > top {
            top = c.moduli[0];
            witness = Some(id.clone());
        }
    }
    let cut = params.epsilon * bound_k;
    let min_tail = tail_curve.iter().map(|t| t.1).fold(T::infinity(), T::min);
    let min_mod = modulus_curve.iter().map(|t| t.1).fold(T::infinity(), T::min);
    let verdict = if min_tail <= cut && min_mod <= cut {
        Verdict::Pass
    } else if bound_k > T::zero() && min_mod >= params.floor_fraction * bound_k {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    CompactnessProfile {
        bound_k,
        tail_curve,
        modulus_curve,
        epsilon: params.epsilon,
        verdict,
        witness,
    }
}

fn outputs<T: Real>(op: &OperatorSpec<T>, probes: &ProbeFamily<T>) -> Result<Vec<SampledFunction<T>>> {
    probes.probes().par_iter().map(|f| apply(op, f)).collect()
}

/// Profile of `op` over an already normalized probe family.
pub fn fk_profile<T: Real>(
    op: &OperatorSpec<T>,
    probes: &ProbeFamily<T>,
    norm: &ActiveNorm<T>,
    params: &ProfileParams<T>,
) -> Result<CompactnessProfile<T>> {
    if probes.is_empty() {
        return Err(Error::EmptyProbes);
    }
    params.check(probes.grid())?;
    // 1e-9 in double precision; a few ulps of the norm in single.
    let tol = lit::<T>(1e-9).max(T::epsilon() * lit(64.0));
    if !probes.is_normalized(norm, tol)? {
        return Err(Error::invalid("probes are not normalized in the active norm"));
    }
    let outs = outputs(op, probes)?;
    let ones = vec![T::one(); outs.len()];
    Ok(assemble(&outs, &ones, probes.ids(), norm, params))
}

/// Per-threshold summary across a catalog.
#[derive(Clone, Debug)]
pub struct ThresholdRow<T> {
    pub epsilon: T,
    /// `(R*, δ*)` per catalog member, in catalog order.
    pub stars: Vec<(Option<T>, Option<T>)>,
    /// `max/min` of `R*` across the catalog when every member has one.
    pub r_ratio: Option<T>,
    pub delta_ratio: Option<T>,
    pub uniform: bool,
}

#[derive(Clone, Debug)]
pub struct UniformCompactnessReport<T> {
    pub k_cap: T,
    pub per_weight: Vec<(String, CompactnessProfile<T>)>,
    pub thresholds: Vec<ThresholdRow<T>>,
    /// Pointwise maxima of the per-weight curves.
    pub tail_envelope: Vec<(T, T)>,
    pub modulus_envelope: Vec<(T, T)>,
    /// Largest `bound_K` over the catalog.
    pub phi_empirical: T,
    pub verdict: Verdict,
}

/// Threshold list and allowed spread for [`uniform_sweep`].
#[derive(Clone, Debug)]
pub struct SweepParams<T> {
    pub epsilons: Vec<T>,
    pub ratio_factor: T,
}

impl<T: Real> Default for SweepParams<T> {
    fn default() -> Self {
        Self {
            epsilons: [0.5, 0.2, 0.1, 0.05].iter().map(|&e| lit(e)).collect(),
            ratio_factor: lit(4.0),
        }
    }
}

fn spread<T: Real>(values: impl Iterator<Item = Option<T>>) -> Option<T> {
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for v in values {
        let v = v?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo > T::zero() && lo.is_finite()).then(|| hi / lo)
}

/// Profiles `op` under every catalog pair with the probes renormalized per
/// pair, and summarizes the thresholds `R*` and `δ*` across the catalog.
/// The verdict is read at `profile.epsilon`, which must appear in the list.
pub fn uniform_sweep<T: Real>(
    op: &OperatorSpec<T>,
    catalog: &[CertifiedPair<T>],
    k_cap: T,
    probes: &ProbeFamily<T>,
    profile: &ProfileParams<T>,
    sweep: &SweepParams<T>,
) -> Result<UniformCompactnessReport<T>> {
    if catalog.is_empty() {
        return Err(Error::invalid("empty weight catalog"));
    }
    if probes.is_empty() {
        return Err(Error::EmptyProbes);
    }
    if let Some(pair) = catalog.iter().find(|p| p.max_constant() > k_cap) {
        return Err(Error::invalid(format!(
            "catalog member {} has constant {} above the cap {k_cap}",
            pair.id,
            pair.max_constant()
        )));
    }
    profile.check(probes.grid())?;
    let grid = probes.grid();
    let outs = outputs(op, probes)?;
    let per_weight: Vec<(String, CompactnessProfile<T>)> = catalog
        .par_iter()
        .map(|pair| {
            let norm = ActiveNorm::from_pair(grid, pair)?;
            let mut scales = Vec::with_capacity(outs.len());
            for f in probes.probes() {
                let n = norm.norm(f)?;
                if n == T::zero() {
                    return Err(Error::invalid(format!("probe {} has zero norm", f.label())));
                }
                scales.push(n.recip());
            }
            Ok((pair.id.clone(), assemble(&outs, &scales, probes.ids(), &norm, profile)))
        })
        .collect::<Result<_>>()?;
    let thresholds: Vec<ThresholdRow<T>> = sweep
        .epsilons
        .iter()
        .map(|&eps| {
            let stars: Vec<_> =
                per_weight.iter().map(|(_, p)| (p.r_star(eps), p.delta_star(eps))).collect();
            let r_ratio = spread(stars.iter().map(|s| s.0));
            let delta_ratio = spread(stars.iter().map(|s| s.1));
            let uniform = matches!((r_ratio, delta_ratio), (Some(a), Some(b)) if a <= sweep.ratio_factor && b <= sweep.ratio_factor);
            ThresholdRow { epsilon: eps, stars, r_ratio, delta_ratio, uniform }
        })
        .collect();
    let envelope = |pick: fn(&CompactnessProfile<T>) -> &Vec<(T, T)>| -> Vec<(T, T)> {
        let first = pick(&per_weight[0].1);
        (0..first.len())
            .map(|k| {
                let v = per_weight.iter().map(|(_, p)| pick(p)[k].1).fold(T::zero(), T::max);
                (first[k].0, v)
            })
            .collect()
    };
    let tail_envelope = envelope(|p| &p.tail_curve);
    let modulus_envelope = envelope(|p| &p.modulus_curve);
    let phi_empirical = per_weight.iter().map(|(_, p)| p.bound_k).fold(T::zero(), T::max);
    let verdict = match thresholds.iter().find(|r| r.epsilon == profile.epsilon) {
        Some(row) if row.uniform => Verdict::Pass,
        _ if per_weight.iter().all(|(_, p)| p.verdict == Verdict::Fail) => Verdict::Fail,
        _ => Verdict::Inconclusive,
    };
    Ok(UniformCompactnessReport {
        k_cap,
        per_weight,
        thresholds,
        tail_envelope,
        modulus_envelope,
        phi_empirical,
        verdict,
    })
}

/// `(K_cap, φ)` sorted by cap, made nondecreasing by a running maximum.
pub fn phi_envelope<T: Real>(reports: &[UniformCompactnessReport<T>]) -> Vec<(T, T)> {
    let mut pts: Vec<(T, T)> = reports.iter().map(|r| (r.k_cap, r.phi_empirical)).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite caps"));
    let mut run = T::zero();
    for p in &mut pts {
        run = run.max(p.1);
        p.1 = run;
    }
    pts
}

/// `j ↦ max_{norm, f} ‖Tf - T_j f‖ / ‖f‖` over raw probes.
pub fn uniform_approx_check<T: Real>(
    op: &OperatorSpec<T>,
    approximants: &[(i32, OperatorSpec<T>)],
    norms: &[ActiveNorm<T>],
    probes: &ProbeFamily<T>,
) -> Result<Vec<(i32, T)>> {
    if probes.is_empty() {
        return Err(Error::EmptyProbes);
    }
    if norms.is_empty() {
        return Err(Error::invalid("no norms to measure in"));
    }
    if approximants.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::invalid("approximant indices must be strictly increasing"));
    }
    let base = outputs(op, probes)?;
    let inv: Vec<Vec<T>> = norms
        .iter()
        .map(|n| probes.probes().iter().map(|f| Ok(n.norm(f)?.recip())).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    approximants
        .iter()
        .map(|(j, tj)| {
            let errs: Vec<T> = probes
                .probes()
                .par_iter()
                .zip(base.par_iter())
                .enumerate()
                .map(|(i, (f, tf))| {
                    let a = apply(tj, f)?;
                    let diff: Vec<T> =
                        tf.samples().iter().zip(a.samples()).map(|(&x, &y)| x - y).collect();
                    let mut worst = T::zero();
                    for (n, s) in norms.iter().zip(&inv) {
                        if s[i].is_finite() {
                            worst = worst.max(n.norm_slice(&diff) * s[i]);
                        }
                    }
                    Ok(worst)
                })
                .collect::<Result<_>>()?;
            Ok((*j, errs.into_iter().fold(T::zero(), T::max)))
        })
        .collect()
}

/// Exponents derived from a certified `[w]_{A_2}` on `R^d`.
#[derive(Clone, Copy, Debug)]
pub struct ProofExponents<T> {
    /// `1 / (2^{d+1} [w]_{A_2})`.
    pub epsilon: T,
    /// `2 - ε`.
    pub q: T,
    /// `1 / (1 - ε)`, so `r_1' = 1/ε`.
    pub r1: T,
    /// `1 + 1/(2^{d+1}[w]_{A_2} - 1)`, so `r_2' = 2^{d+1}[w]_{A_2}`.
    pub r2: T,
}

impl<T: Real> ProofExponents<T> {
    pub fn new(dim: usize, a2: T) -> Self {
        let c = lit::<T>(2f64.powi(dim as i32 + 1)) * a2;
        let epsilon = c.recip();
        Self {
            epsilon,
            q: lit::<T>(2.0) - epsilon,
            r1: (T::one() - epsilon).recip(),
            r2: T::one() + (c - T::one()).recip(),
        }
    }

    pub fn r1_conjugate(&self) -> T {
        self.r1 / (self.r1 - T::one())
    }

    pub fn r2_conjugate(&self) -> T {
        self.r2 / (self.r2 - T::one())
    }
}

#[derive(Clone, Debug)]
pub struct ProofQuantities<T> {
    pub r0: T,
    /// Volume `|h|` of the sets `B_x`.
    pub h: T,
    pub r: T,
    pub exponents: ProofExponents<T>,
    /// Inner (`x ∈ 3B_0`) and outer parts of the first estimate.
    pub e1_inner: T,
    pub e1_outer: T,
    pub e1: T,
    pub e2: T,
    pub i: T,
    pub ii: T,
    /// `2 [w]_{A_2} |4B_0|^{1+1/r_1} |h|^{1/r_1'}`.
    pub bound_i: T,
    /// `[w]^3 |4B_0|^2 R_1^{d(q-2)} |h|^{1/r_2'}` with `R_1 = 3R_0`, up to a constant.
    pub bound_ii: T,
    /// `[w]^3 R^{d(q-2)} R_0^{qd}`, up to a constant.
    pub bound_e2: T,
}

/// Precomputed integrals for [`proof_quantities`]. `B_0` is the cube
/// `[-R_0, R_0]^d`, and the grid box is exactly `4B_0`.
#[derive(Clone, Debug)]
pub struct ProofSetup<T> {
    w: WeightSpec<T>,
    grid: UniformGrid<T>,
    a2: T,
    r0: T,
    exponents: ProofExponents<T>,
    samples: Vec<T>,
    /// Vertex table of `∫_{[-L, v]} w^{-1}`, `(N+1)^d` entries.
    cumulative: Vec<T>,
    neg_r1_4b0: T,
    w_3b0: T,
    neg_r2_4b0: T,
    decay_out_3b0: T,
    inv_ball_r0: T,
}

/// Cells per half-side in each dyadic shell of the whole-space quadrature.
fn shell_resolution(dim: usize) -> usize {
    match dim {
        1 => 256,
        2 => 32,
        3 => 8,
        _ => 4,
    }
}

/// `∫_{‖x‖_∞ > a, keep(x)} w(x) |x|^{-2d} dx` by midpoint rule on dyadic
/// cube shells, summed until a shell contributes below `1e-14` of the total.
fn outer_integral<T: Real>(w: &WeightSpec<T>, dim: usize, a: T, keep: impl Fn(&[T]) -> bool + Sync) -> Result<T> {
    let m = shell_resolution(dim);
    let side = 4 * m;
    let count = side.pow(dim as u32);
    let mut total = T::zero();
    for k in 0..2000 {
        let inner = a * lit::<T>(2f64.powi(k));
        let cell = inner / T::from_count(m);
        let shell: T = (0..count)
            .into_par_iter()
            .map(|flat| {
                let mut rest = flat;
                let mut x = [T::zero(); MAX_DIM];
                let mut inside = true;
                for c in (0..dim).rev() {
                    let i = rest % side;
                    rest /= side;
                    inside &= (m..3 * m).contains(&i);
                    x[c] = (T::from_count(2 * i + 1) - T::from_count(side)) * cell / lit(2.0);
                }
                if inside || !keep(&x[..dim]) {
                    return Ok(T::zero());
                }
                let r2: T = x[..dim].iter().map(|&c| c * c).sum();
                Ok(eval_weight_at(w, &x[..dim])? / r2.powi(dim as i32))
            })
            .collect::<Result<Vec<T>>>()?
            .into_iter()
            .sum::<T>()
            * cell.powi(dim as i32);
        total += shell;
        if k >= 4 && shell <= lit::<T>(1e-14) * total {
            return Ok(total);
        }
    }
    Err(Error::Inconsistent(format!("outer integral of {w} did not converge")))
}

impl<T: Real> ProofSetup<T> {
    pub fn new(w: &WeightSpec<T>, grid: &UniformGrid<T>, a2: T, r0: T) -> Result<Self> {
        let d = grid.dim();
        if w.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: w.dim() });
        }
        if !(r0 > T::one()) {
            return Err(Error::invalid(format!("B_0 radius {r0} must exceed 1")));
        }
        let slack = lit::<T>(1e-12).max(T::epsilon() * lit(16.0));
        if (grid.half_width() - lit::<T>(4.0) * r0).abs() > slack * r0 {
            return Err(Error::invalid("the grid box must be 4B_0"));
        }
        let n = grid.points_per_axis();
        let cells3 = lit::<T>(3.0) * r0 / grid.spacing();
        if (cells3 - cells3.round()).abs() > lit::<T>(1e-9).max(slack * cells3) || n % 8 != 0 {
            return Err(Error::invalid("3B_0 is not a union of grid cells"));
        }
        if !(a2 >= T::one()) {
            return Err(Error::invalid(format!("A_2 constant {a2} below 1")));
        }
        let exponents = ProofExponents::new(d, a2);
        let samples = eval_weight(w, grid)?.into_samples();
        let vol = grid.cell_volume();
        let lo = n / 8;
        let hi = n - lo;
        let in_3b0 = |cell: usize| {
            let idx = grid.multi_index(cell);
            idx[..d].iter().all(|&i| (lo..hi).contains(&i))
        };
        let neg_r1_4b0 = samples.iter().map(|&v| v.powf(-exponents.r1)).sum::<T>() * vol;
        let neg_r2_4b0 = samples.iter().map(|&v| v.powf(-exponents.r2)).sum::<T>() * vol;
        let w_3b0 = (0..grid.len()).filter(|&c| in_3b0(c)).map(|c| samples[c]).sum::<T>() * vol;
        let inv_ball_r0 = (0..grid.len())
            .filter(|&c| grid.center_norm(c) < r0)
            .map(|c| samples[c].recip())
            .sum::<T>()
            * vol;
        let decay_out_3b0 = outer_integral(w, d, lit::<T>(3.0) * r0, |_| true)?;
        let cumulative = cumulative_table(grid, &samples);
        Ok(Self {
            w: w.clone(),
            grid: grid.clone(),
            a2,
            r0,
            exponents,
            samples,
            cumulative,
            neg_r1_4b0,
            w_3b0,
            neg_r2_4b0,
            decay_out_3b0,
            inv_ball_r0,
        })
    }

    pub fn exponents(&self) -> ProofExponents<T> {
        self.exponents
    }

    /// `∫_{B ∩ 4B_0} w^{-1}` for the axis-parallel box `[a, b]`, exact for
    /// the piecewise-constant weight.
    fn inverse_box(&self, a: &[T], b: &[T]) -> T {
        let d = self.grid.dim();
        let mut total = T::zero();
        for bits in 0..(1usize << d) {
            let mut corner = [T::zero(); MAX_DIM];
            let mut sign = T::one();
            for k in 0..d {
                if bits >> k & 1 == 1 {
                    corner[k] = b[k];
                } else {
                    corner[k] = a[k];
                    sign = -sign;
                }
            }
            total += sign * self.cumulative_at(&corner[..d]);
        }
        total
    }

    fn cumulative_at(&self, x: &[T]) -> T {
        let d = self.grid.dim();
        let n = self.grid.points_per_axis();
        let l = self.grid.half_width();
        let h = self.grid.spacing();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [T::zero(); MAX_DIM];
        for k in 0..d {
            let t = ((x[k] + l) / h).max(T::zero()).min(T::from_count(n));
            let i = t.floor().to_usize().expect("index").min(n - 1);
            base[k] = i;
            frac[k] = t - T::from_count(i);
        }
        let mut v = T::zero();
        for bits in 0..(1usize << d) {
            let mut weight = T::one();
            let mut flat = 0;
            for k in 0..d {
                let up = bits >> k & 1;
                weight *= if up == 1 { frac[k] } else { T::one() - frac[k] };
                flat = flat * (n + 1) + base[k] + up;
            }
            if weight != T::zero() {
                v += weight * self.cumulative[flat];
            }
        }
        v
    }

    fn weight_at_index(&self, idx: &[i64], x: &[T]) -> Result<T> {
        let n = self.grid.points_per_axis() as i64;
        if idx.iter().all(|&i| (0..n).contains(&i)) {
            let flat = idx.iter().fold(0i64, |acc, &i| acc * n + i);
            Ok(self.samples[flat as usize])
        } else {
            eval_weight_at(&self.w, x)
        }
    }

    pub fn evaluate(&self, h: T, r: T) -> Result<ProofQuantities<T>> {
        if !(h > T::zero() && h.is_finite()) {
            return Err(Error::invalid(format!("|h| = {h} must be positive")));
        }
        if !(r > self.r0) {
            return Err(Error::invalid(format!("R = {r} must exceed R_0 = {}", self.r0)));
        }
        let d = self.grid.dim();
        let di = d as i32;
        let e = self.exponents;
        let vol4 = (lit::<T>(8.0) * self.r0).powi(di);
        let i = self.neg_r1_4b0.powf(e.r1.recip()) * self.w_3b0 * h.powf(e.r1_conjugate().recip());
        let ii = self.neg_r2_4b0.powf(e.r2.recip())
            * self.decay_out_3b0
            * h.powf(e.r2_conjugate().recip());
        let r_over = r / T::from_count(d).sqrt();
        let decay_out_r = outer_integral(&self.w, d, r_over, |x| {
            x.iter().map(|&c| c * c).sum::<T>() > r * r
        })?;
        let e2 = (self.inv_ball_r0 * decay_out_r).sqrt();
        let (e1_inner, e1_outer) = self.e1(h)?;
        let a3 = self.a2.powi(3);
        let r1_big = lit::<T>(3.0) * self.r0;
        Ok(ProofQuantities {
            r0: self.r0,
            h,
            r,
            exponents: e,
            e1_inner,
            e1_outer,
            e1: e1_inner + e1_outer,
            e2,
            i,
            ii,
            bound_i: lit::<T>(2.0)
                * self.a2
                * vol4.powf(T::one() + e.r1.recip())
                * h.powf(e.r1_conjugate().recip()),
            bound_ii: a3
                * vol4.powi(2)
                * r1_big.powf(T::from_count(d) * (e.q - lit(2.0)))
                * h.powf(e.r2_conjugate().recip()),
            bound_e2: a3
                * r.powf(T::from_count(d) * (e.q - lit(2.0)))
                * self.r0.powf(e.q * T::from_count(d)),
        })
    }

    /// Both parts of the first estimate with `B_x` the cube of volume `|h|`
    /// centered at `x`. Centers run over the grid lattice extended past the
    /// box far enough for `B_x` to still meet `4B_0`.
    fn e1(&self, h: T) -> Result<(T, T)> {
        let d = self.grid.dim();
        let n = self.grid.points_per_axis() as i64;
        let sp = self.grid.spacing();
        let half_side = h.powf(T::from_count(d).recip()) / lit(2.0);
        let extra = (half_side / sp).ceil().to_i64().expect("extent") + 1;
        let width = n + 2 * extra;
        let lo3 = n / 8;
        let hi3 = n - lo3;
        let l = self.grid.half_width();
        let total = width.pow(d as u32) as usize;
        let parts: Vec<(T, T)> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut rest = flat as i64;
                let mut idx = [0i64; MAX_DIM];
                let mut x = [T::zero(); MAX_DIM];
                let mut a = [T::zero(); MAX_DIM];
                let mut b = [T::zero(); MAX_DIM];
                for k in (0..d).rev() {
                    idx[k] = rest % width - extra;
                    rest /= width;
                    x[k] = T::from_i64(2 * idx[k] + 1 - n).expect("index") * l / T::from_i64(n).expect("n");
                    a[k] = x[k] - half_side;
                    b[k] = x[k] + half_side;
                }
                let inner = self.inverse_box(&a[..d], &b[..d]);
                if inner == T::zero() {
                    return Ok((T::zero(), T::zero()));
                }
                let wx = self.weight_at_index(&idx[..d], &x[..d])?;
                if idx[..d].iter().all(|&i| (lo3..hi3).contains(&i)) {
                    Ok((inner * wx, T::zero()))
                } else {
                    let r2: T = x[..d].iter().map(|&c| c * c).sum();
                    Ok((T::zero(), inner * wx / r2.powi(d as i32)))
                }
            })
            .collect::<Result<_>>()?;
        let vol = self.grid.cell_volume();
        let (p, q) = parts.into_iter().fold((T::zero(), T::zero()), |acc, v| (acc.0 + v.0, acc.1 + v.1));
        Ok((p * vol, q * vol))
    }
}

fn cumulative_table<T: Real>(grid: &UniformGrid<T>, samples: &[T]) -> Vec<T> {
    let d = grid.dim();
    let n = grid.points_per_axis();
    let m = n + 1;
    let vol = grid.cell_volume();
    let mut c = vec![T::zero(); m.pow(d as u32)];
    for (cell, &v) in samples.iter().enumerate() {
        let idx = grid.multi_index(cell);
        let flat = idx[..d].iter().fold(0, |acc, &i| acc * m + i + 1);
        c[flat] = v.recip() * vol;
    }
    for axis in 0..d {
        let stride = m.pow((d - 1 - axis) as u32);
        for flat in 0..c.len() {
            if (flat / stride) % m != 0 {
                let prev = c[flat - stride];
                c[flat] += prev;
            }
        }
    }
    c
}

/// One evaluation of the proof quantities; see [`ProofSetup`].
pub fn proof_quantities<T: Real>(
    w: &WeightSpec<T>,
    grid: &UniformGrid<T>,
    a2: T,
    r0: T,
    h: T,
    r: T,
) -> Result<ProofQuantities<T>> {
    ProofSetup::new(w, grid, a2, r0)?.evaluate(h, r)
}
