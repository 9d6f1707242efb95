//! Weight catalogs and empirical extrapolation envelopes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::compactness::ActiveNorm;
use crate::grid::{CubeFamily, SampledFunction};
use crate::maximal::{hl_maximal, muckenhoupt_ratio, MaximalParams};
use crate::weights::{ap_constant, CertifiedPair, WeightSpec};
use crate::{lit, Error, Real, Result};

/// Safety factor applied to the empirical `‖M‖` before building `Rh`.
pub const NORM_MARGIN: f64 = 1.25;

/// Output of [`rdf_weight`].
#[derive(Clone, Debug)]
pub struct RdfWeight<T> {
    pub weight: WeightSpec<T>,
    /// `NORM_MARGIN` times the probe estimate of `‖M‖_{L^p(w)}`.
    pub operator_norm: T,
    pub k_max: usize,
    /// `max_x M^{k+1}h / ((2‖M‖)^{k+1} Rh)` with `k = k_max`, which bounds
    /// the excess in `M(Rh) ≤ 2‖M‖ Rh (1 + slack)`.
    pub slack: T,
    /// Observed `max_x M(Rh) / (2‖M‖ Rh) - 1`, floored at zero.
    pub observed_excess: T,
}

/// `Rh = Σ_{k=0}^{k_max} M^k h / (2‖M‖)^k` with `‖M‖` estimated on
/// `L^p(w)` from `h` and the extra probes.
pub fn rdf_weight<T: Real>(
    h: &SampledFunction<T>,
    p: T,
    w: &WeightSpec<T>,
    k_max: usize,
    family: &CubeFamily<T>,
    probes: &[SampledFunction<T>],
) -> Result<RdfWeight<T>> {
    if k_max < 1 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    if h.samples().iter().any(|&v| v < T::zero()) {
        return Err(Error::invalid("h must be nonnegative"));
    }
    if h.samples().iter().all(|&v| v == T::zero()) {
        return Err(Error::invalid("h vanishes identically"));
    }
    let mut all = vec![h.clone()];
    all.extend_from_slice(probes);
    let norm = muckenhoupt_ratio(p, w, &all, family)?.max(T::one()) * lit(NORM_MARGIN);
    let two_m = norm + norm;
    let params = MaximalParams::new(family);
    let mut term = h.samples().to_vec();
    let mut rh = term.clone();
    let mut current = h.clone();
    let mut scale = T::one();
    for _ in 0..k_max {
        current = hl_maximal(&current, &params)?;
        scale = scale / two_m;
        term = current.samples().to_vec();
        for (r, &t) in rh.iter_mut().zip(&term) {
            *r += t * scale;
        }
    }
    let next = hl_maximal(&current, &params)?;
    let tail_scale = scale / two_m;
    let slack = next
        .samples()
        .iter()
        .zip(&rh)
        .map(|(&m, &r)| m * tail_scale / r)
        .fold(T::zero(), T::max);
    let rh_fn = SampledFunction::new(h.grid().clone(), rh, format!("R[{}]", h.label()))?;
    let m_rh = hl_maximal(&rh_fn, &params)?;
    let observed_excess = m_rh
        .samples()
        .iter()
        .zip(rh_fn.samples())
        .map(|(&m, &r)| m / (two_m * r) - T::one())
        .fold(T::zero(), T::max);
    let id = format!("rdf({}, k={k_max}, |M|={})", h.label(), norm);
    Ok(RdfWeight {
        weight: WeightSpec::Generated { id, samples: rh_fn },
        operator_norm: norm,
        k_max,
        slack,
        observed_excess,
    })
}

/// Result of [`catalog_generate`].
#[derive(Clone, Debug)]
pub struct Catalog<T> {
    pub k_cap: T,
    pub pairs: Vec<CertifiedPair<T>>,
    pub attempts: usize,
    /// Set when fewer than the requested pairs certified within budget.
    pub warning: Option<String>,
}

/// Candidate draws allowed per requested pair.
pub const ATTEMPTS_PER_PAIR: usize = 50;

fn random_bumps<T: Real>(family: &CubeFamily<T>, rng: &mut ChaCha8Rng, tag: usize) -> Result<SampledFunction<T>> {
    let l = family.grid().half_width().to_f64_lossy();
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..3)
        .map(|_| {
            let c = (0..family.grid().dim()).map(|_| rng.gen_range(-0.6 * l..0.6 * l)).collect();
            (c, rng.gen_range(0.05 * l..0.3 * l), rng.gen_range(0.2..1.0))
        })
        .collect();
    SampledFunction::sample(family.grid(), format!("bumps{tag}"), |x| {
        let mut v = 0.0;
        for (c, s, a) in &bumps {
            let r2: f64 = x.iter().zip(c).map(|(xi, ci)| (xi.to_f64_lossy() - ci).powi(2)).sum();
            v += a * (-r2 / (2.0 * s * s)).exp();
        }
        lit(v)
    })
}

fn draw_weight<T: Real>(
    p: T,
    family: &CubeFamily<T>,
    rng: &mut ChaCha8Rng,
    tag: usize,
) -> Result<WeightSpec<T>> {
    let n = family.grid().dim() as f64;
    let pf = p.to_f64_lossy();
    let lo = -0.8 * n;
    let hi = 0.8 * n * (pf - 1.0);
    match rng.gen_range(0..4) {
        0 => Ok(WeightSpec::Constant { value: lit(rng.gen_range(0.5..2.0)), dim: n as usize }),
        1 => Ok(WeightSpec::power(lit(rng.gen_range(lo..hi)), n as usize)),
        2 => Ok(WeightSpec::clipped_power(lit(rng.gen_range(lo..hi)), n as usize)),
        _ => {
            let h1 = random_bumps(family, rng, 2 * tag)?;
            let h2 = random_bumps(family, rng, 2 * tag + 1)?;
            let unit = WeightSpec::unit(family.grid().dim());
            let w1 = rdf_weight(&h1, p, &unit, 8, family, &[])?.weight;
            let w2 = rdf_weight(&h2, p, &unit, 8, family, &[])?.weight;
            let (WeightSpec::Generated { samples: s1, id: i1 }, WeightSpec::Generated { samples: s2, id: i2 }) = (w1, w2) else {
                unreachable!("rdf_weight returns generated weights")
            };
            let s = s1.zip_with(&s2, "u", |a, b| a * b.powf(T::one() - p))?;
            Ok(WeightSpec::Generated { id: format!("{i1}*{i2}^(1-p)"), samples: s })
        }
    }
}

/// Draws candidate pairs `(u, v)` from a seeded stream, certifies
/// `[u]_{A_p}` on `fu` and `[v]_{A_q}` on `fv`, and keeps those with both
/// constants at most `k_cap`. Candidates mix constants, power and clipped
/// power weights, and factorized weights `w_1 w_2^{1-p}` with `w_i` from
/// [`rdf_weight`].
pub fn catalog_generate<T: Real>(
    k_cap: T,
    p: T,
    q: T,
    count: usize,
    seed: u64,
    fu: &CubeFamily<T>,
    fv: &CubeFamily<T>,
) -> Result<Catalog<T>> {
    if !(k_cap >= T::one()) {
        return Err(Error::invalid(format!("K_cap = {k_cap} must be at least 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count);
    let budget = ATTEMPTS_PER_PAIR * count;
    let mut attempts = 0;
    while pairs.len() < count && attempts < budget {
        let u = draw_weight(p, fu, &mut rng, 2 * attempts)?;
        let v = draw_weight(q, fv, &mut rng, 2 * attempts + 1)?;
        attempts += 1;
        let cu = ap_constant(&u, p, fu)?.constant;
        if cu > k_cap {
            continue;
        }
        let cv = ap_constant(&v, q, fv)?.constant;
        if cv > k_cap {
            continue;
        }
        pairs.push(CertifiedPair {
            id: format!("pair{attempts}"),
            u,
            v,
            p,
            q,
            u_constant: cu,
            v_constant: cv,
        });
    }
    let warning = (pairs.len() < count).then(|| {
        format!("only {} of {count} pairs certified under K = {k_cap} in {attempts} attempts", pairs.len())
    });
    Ok(Catalog { k_cap, pairs, attempts, warning })
}

/// Running supremum of norm ratios over nested catalogs.
#[derive(Clone, Debug)]
pub struct RatioEnvelope<T> {
    pub axis: Vec<T>,
    /// `max` over every catalog with cap `<= axis[k]`.
    pub values: Vec<T>,
    /// Per-cap maxima before the running supremum.
    pub per_cap: Vec<T>,
    /// Largest certified constant seen at each cap.
    pub certified: Vec<T>,
    pub context: String,
}

impl<T: Real> RatioEnvelope<T> {
    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }
}

/// `envelope(K) = max ‖g‖ / ‖f‖` over pairs `(f, g)` and every catalog pair
/// of cap at most `K`, in the mixed norm `L^p_u L^q_v`.
pub fn extrapolation_envelope<T: Real>(
    pairs: &[(SampledFunction<T>, SampledFunction<T>)],
    catalogs: &[Catalog<T>],
    context: impl Into<String>,
) -> Result<RatioEnvelope<T>> {
    if pairs.is_empty() {
        return Err(Error::EmptyProbes);
    }
    let grid = pairs[0].0.grid().clone();
    let mut order: Vec<usize> = (0..catalogs.len()).collect();
    order.sort_by(|&a, &b| catalogs[a].k_cap.partial_cmp(&catalogs[b].k_cap).expect("finite caps"));
    let mut axis = Vec::new();
    let mut per_cap = Vec::new();
    let mut certified = Vec::new();
    for &c in &order {
        let cat = &catalogs[c];
        let ratios: Vec<T> = cat
            .pairs
            .par_iter()
            .map(|pair| {
                let norm = ActiveNorm::from_pair(&grid, pair)?;
                let mut best = T::zero();
                for (f, g) in pairs {
                    let nf = norm.norm(f)?;
                    if nf == T::zero() {
                        return Err(Error::invalid(format!("pair input {} has zero norm", f.label())));
                    }
                    best = best.max(norm.norm(g)? / nf);
                }
                Ok(best)
            })
            .collect::<Result<_>>()?;
        axis.push(cat.k_cap);
        per_cap.push(ratios.into_iter().fold(T::zero(), T::max));
        certified.push(cat.pairs.iter().map(|p| p.max_constant()).fold(T::zero(), T::max));
    }
    let mut run = T::zero();
    let values = per_cap
        .iter()
        .map(|&v| {
            run = run.max(v);
            run
        })
        .collect();
    Ok(RatioEnvelope { axis, values, per_cap, certified, context: context.into() })
}
