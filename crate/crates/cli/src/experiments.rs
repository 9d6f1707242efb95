//! One driver per experiment kind. Each returns a [`Report`]; outputs are
//! ordered by config order so the artifacts are reproducible.

use rayon::prelude::*;
use serde_json::{json, Value};
use wmix::compactness::{
    fk_profile, phi_envelope, uniform_approx_check, uniform_sweep, ActiveNorm, ProbeFamily,
    ProfileParams, ProofSetup, SweepParams, Verdict,
};
use wmix::extrapolation::{catalog_generate, extrapolation_envelope, Catalog, RatioEnvelope};
use wmix::fit::loglog_slope;
use wmix::grid::{CubeFamily, FamilyPolicy, SampledFunction, UniformGrid};
use wmix::maximal::{fefferman_stein_ratio_mixed, hl_maximal, MaximalParams};
use wmix::norms::MixedNormParams;
use wmix::operators::{
    apply, bmo_norm, commutator_weighted_bound_check, mollify_truncate, truncation_error_check,
    OperatorSpec, SymbolSpec,
};
use wmix::weights::{
    ainf_constant, ap_constant, openness_check, reverse_holder_check, CertifiedPair, WeightSpec,
};

use crate::config::{ExperimentConfig, FamilyConfig, Kind, OperatorConfig};
use crate::report::{num, opt, Plot, Report, Table};
use crate::RunError;

/// Largest relative change of a Fefferman–Stein ratio under `N ↦ 2N`.
pub const FS_STABILITY: f64 = 0.1;
/// Relative tolerance on fitted decay slopes.
pub const SLOPE_TOLERANCE: f64 = 0.2;
/// Allowed max/min spread of the fitted mollification constants.
pub const MOLLIFY_SPREAD: f64 = 2.0;
/// Tolerance on the closed-form bound for `I`.
pub const BOUND_I_TOLERANCE: f64 = 1e-3;
/// Deviation of `σ ≡ 1` from the identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

pub fn run_kind(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    match cfg.kind {
        Kind::ApConstants => ap_constants(cfg),
        Kind::OpennessRh => openness_rh(cfg),
        Kind::FeffermanStein => fefferman_stein(cfg),
        Kind::FkProfile => fk(cfg),
        Kind::UniformSweep => sweep(cfg),
        Kind::CommutatorSteps => commutator_steps(cfg),
        Kind::PseudoCompactness => pseudo(cfg),
        Kind::ProofQuantities => proof(cfg),
        Kind::ExtrapolationEnvelope => envelopes(cfg),
    }
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

/// `FAIL` if any part failed, else `INCONCLUSIVE` if any part was, else `PASS`.
fn combine(parts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Pass;
    for v in parts {
        match v {
            Verdict::Fail => return Verdict::Fail,
            Verdict::Inconclusive => out = Verdict::Inconclusive,
            Verdict::Pass => {}
        }
    }
    out
}

fn pass_if(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn finish(report: &mut Report, v: Verdict) {
    report.verdict = match v {
        Verdict::Pass => "PASS (relative to probe and cube families)".into(),
        other => verdict_word(other).into(),
    };
}

struct Setup {
    grid: UniformGrid<f64>,
    family: CubeFamily<f64>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup, RunError> {
    let grid = cfg.grid.build()?;
    let family = cfg.family.build(&grid)?;
    Ok(Setup { grid, family })
}

fn weights(cfg: &ExperimentConfig, dim: usize) -> Result<Vec<WeightSpec<f64>>, RunError> {
    cfg.weights.iter().map(|w| w.build(dim)).collect()
}

fn factor_family(
    grid: &UniformGrid<f64>,
    dim: usize,
    policy: &FamilyConfig,
) -> Result<CubeFamily<f64>, RunError> {
    let g = grid.with_dim(dim)?;
    let policy = match (policy, dim) {
        (FamilyConfig::Exhaustive1d, d) if d > 1 => FamilyPolicy::Dyadic,
        (p, _) => p.policy(),
    };
    Ok(CubeFamily::new(&g, policy)?)
}

fn factor_families(cfg: &ExperimentConfig, grid: &UniformGrid<f64>) -> Result<(CubeFamily<f64>, CubeFamily<f64>), RunError> {
    let policy = cfg.catalog.as_ref().map(|c| c.factor_family.clone()).unwrap_or(FamilyConfig::Exhaustive1d);
    let n = cfg.u_dim();
    Ok((factor_family(grid, n, &policy)?, factor_family(grid, grid.dim() - n, &policy)?))
}

fn inline_pairs(cfg: &ExperimentConfig, grid: &UniformGrid<f64>) -> Result<Vec<CertifiedPair<f64>>, RunError> {
    let (fu, fv) = factor_families(cfg, grid)?;
    let n = cfg.u_dim();
    cfg.pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let u = p.u.build(n)?;
            let v = p.v.build(grid.dim() - n)?;
            Ok(CertifiedPair::certify(format!("inline{i}"), u, v, cfg.p, cfg.q, &fu, &fv)?)
        })
        .collect()
}

fn catalogs(cfg: &ExperimentConfig, grid: &UniformGrid<f64>) -> Result<Vec<Catalog<f64>>, RunError> {
    let Some(c) = &cfg.catalog else { return Ok(Vec::new()) };
    let (fu, fv) = factor_families(cfg, grid)?;
    c.k_caps
        .iter()
        .map(|&k| Ok(catalog_generate(k, cfg.p, cfg.q, c.count, cfg.seed, &fu, &fv)?))
        .collect()
}

fn catalog_json(cats: &[Catalog<f64>]) -> Value {
    Value::Array(
        cats.iter()
            .map(|c| {
                json!({
                    "k_cap": c.k_cap,
                    "attempts": c.attempts,
                    "warning": c.warning,
                    "pairs": c.pairs.iter().map(pair_json).collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

fn pair_json(p: &CertifiedPair<f64>) -> Value {
    json!({
        "id": p.id,
        "u": p.u.to_string(),
        "v": p.v.to_string(),
        "p": p.p,
        "q": p.q,
        "u_constant": p.u_constant,
        "v_constant": p.v_constant,
    })
}

fn probes(cfg: &ExperimentConfig, grid: &UniformGrid<f64>) -> Result<ProbeFamily<f64>, RunError> {
    Ok(ProbeFamily::generate(grid, &cfg.probe_config().recipe(grid.dim(), cfg.seed))?)
}

fn operator(cfg: &ExperimentConfig, grid: &UniformGrid<f64>) -> Result<OperatorSpec<f64>, RunError> {
    match &cfg.operator {
        Some(op) => op.build(grid),
        None => Err(RunError::Config("operator missing".into())),
    }
}

fn ap_constants(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let s = setup(cfg)?;
    let ws = weights(cfg, s.grid.dim())?;
    let ps = if cfg.p_list.is_empty() { vec![1.5, 2.0, 3.0] } else { cfg.p_list.clone() };
    let mut report = Report::new();
    let mut table = Table::new("ap_constants", &["weight", "p", "ap_constant", "dual_constant", "argmax_cube", "family_size"]);
    let mut ainf = Table::new("ainf_constants", &["weight", "ainf_constant", "argmax_cube"]);
    let mut plot = Plot::new("ap_constants", "A_p constants", "p", "[w]_{A_p}");
    let mut entries = Vec::new();
    for w in &ws {
        let rows: Vec<_> = ps.par_iter().map(|&p| ap_constant(w, p, &s.family)).collect::<Result<_, _>>()?;
        let mut pts = Vec::new();
        for r in &rows {
            if r.constant < 1.0 - cfg.tolerance {
                report.violations.push(format!("[{w}]_A_{} = {} below 1", r.p, r.constant));
            }
            table.push(vec![
                w.to_string(),
                num(r.p),
                num(r.constant),
                num(r.dual_constant),
                format!("{:?}+{:?}", r.argmax_cube.corner(), r.argmax_cube.extent()),
                r.family_size.to_string(),
            ]);
            pts.push((r.p, r.constant));
            entries.push(json!({ "weight": w.to_string(), "p": r.p, "constant": r.constant, "dual_constant": r.dual_constant }));
        }
        let a = ainf_constant(w, &s.family)?;
        ainf.push(vec![w.to_string(), num(a.constant), format!("{:?}+{:?}", a.argmax_cube.corner(), a.argmax_cube.extent())]);
        entries.push(json!({ "weight": w.to_string(), "ainf_constant": a.constant }));
        plot.add(w.to_string(), pts);
    }
    report.set("constants", Value::Array(entries));
    report.tables = vec![table, ainf];
    report.plots = vec![plot];
    finish(&mut report, Verdict::Pass);
    Ok(report)
}

fn openness_rh(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let s = setup(cfg)?;
    let ws = weights(cfg, s.grid.dim())?;
    let ps = if cfg.p_list.is_empty() { vec![2.0] } else { cfg.p_list.clone() };
    let mut report = Report::new();
    let mut open = Table::new("openness", &["weight", "p", "epsilon", "ap_constant", "p_minus_eps_constant", "ratio_vs_bound"]);
    let mut rh = Table::new("reverse_holder", &["weight", "ainf_constant", "r_w", "worst_ratio"]);
    let mut plot = Plot::new("openness_rh", "Openness and reverse Hoelder ratios", "weight index", "ratio / bound");
    let (mut po, mut pr) = (Vec::new(), Vec::new());
    let mut entries = Vec::new();
    let mut ok = true;
    for (i, w) in ws.iter().enumerate() {
        let rhr = reverse_holder_check(w, &s.family, None)?;
        ok &= rhr.worst_ratio <= 2.0 + cfg.tolerance;
        rh.push(vec![w.to_string(), num(rhr.ainf_constant), num(rhr.r_w), num(rhr.worst_ratio)]);
        pr.push((i as f64, rhr.worst_ratio / 2.0));
        for &p in &ps {
            let o = openness_check(w, p, &s.family)?;
            ok &= o.ratio_vs_bound <= 1.0 + cfg.tolerance;
            open.push(vec![w.to_string(), num(p), num(o.epsilon), num(o.ap_constant), num(o.p_minus_eps_constant), num(o.ratio_vs_bound)]);
            po.push((i as f64, o.ratio_vs_bound));
            entries.push(json!({
                "weight": w.to_string(), "p": p, "epsilon": o.epsilon, "ap_constant": o.ap_constant,
                "p_minus_eps_constant": o.p_minus_eps_constant, "ratio_vs_bound": o.ratio_vs_bound,
                "rh_worst_ratio": rhr.worst_ratio, "r_w": rhr.r_w, "ainf_constant": rhr.ainf_constant,
            }));
        }
    }
    plot.add("openness", po);
    plot.add("reverse Hoelder / 2", pr);
    report.set("weights", Value::Array(entries));
    report.tables = vec![open, rh];
    report.plots = vec![plot];
    finish(&mut report, pass_if(ok));
    Ok(report)
}

fn fefferman_stein(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let coarse = cfg.grid.build()?;
    let fine = UniformGrid::new(coarse.dim(), coarse.half_width(), 2 * coarse.points_per_axis())?;
    let pc = cfg.probe_config();
    if pc.random_centers > 0 || pc.modulations.iter().any(|m| m.is_some()) {
        return Err(RunError::Config(
            "fefferman-stein compares grids, so probes need explicit centers and no modulation".into(),
        ));
    }
    let deltas = if cfg.delta_list.is_empty() { vec![0.5, 1.0] } else { cfg.delta_list.clone() };
    let n = cfg.u_dim();
    let grids = [coarse, fine];
    let mut ratios: Vec<Vec<Option<f64>>> = Vec::new();
    let mut labels = Vec::new();
    for g in &grids {
        let family = cfg.family.build(g)?;
        let mut fs = ProbeFamily::generate(g, &pc.recipe(g.dim(), cfg.seed))?.probes().to_vec();
        fs.push(SampledFunction::constant(g, 1.0, "const")?);
        let mut tasks = Vec::new();
        for (pi, pair) in cfg.pairs.iter().enumerate() {
            let params = MixedNormParams { p: cfg.p, q: cfg.q, u: pair.u.build(n)?, v: pair.v.build(g.dim() - n)? };
            for (fi, f) in fs.iter().enumerate() {
                for &d in &deltas {
                    tasks.push((pi, fi, d, params.clone(), f));
                }
            }
        }
        let out: Vec<Option<f64>> = tasks
            .par_iter()
            .map(|(_, _, d, params, f)| Ok(fefferman_stein_ratio_mixed(f, params, *d, &family)?.ratio()))
            .collect::<Result<_, RunError>>()?;
        if labels.is_empty() {
            labels = tasks.iter().map(|(pi, fi, d, _, f)| (*pi, *fi, *d, f.label().to_string())).collect();
        }
        ratios.push(out);
    }
    let mut report = Report::new();
    let mut table = Table::new("fefferman_stein", &["pair", "probe", "delta", "ratio_n", "ratio_2n", "relative_change", "degenerate"]);
    let mut plot = Plot::new("fefferman_stein", "Fefferman-Stein ratio under N-doubling", "case", "ratio");
    let (mut pn, mut p2n) = (Vec::new(), Vec::new());
    let mut worst: f64 = 0.0;
    let mut finite = true;
    let mut degenerate = 0;
    for (k, (pi, _, d, label)) in labels.iter().enumerate() {
        let (a, b) = (ratios[0][k], ratios[1][k]);
        let change = match (a, b) {
            (Some(a), Some(b)) => {
                finite &= a.is_finite() && b.is_finite();
                pn.push((k as f64, a));
                p2n.push((k as f64, b));
                Some((b - a).abs() / a)
            }
            (None, None) => {
                degenerate += 1;
                None
            }
            _ => {
                report.violations.push(format!("degeneracy of {label} changed under refinement"));
                None
            }
        };
        if let Some(c) = change {
            worst = worst.max(c);
        }
        table.push(vec![format!("inline{pi}"), label.clone(), num(*d), opt(a), opt(b), opt(change), (a.is_none()).to_string()]);
    }
    plot.add(format!("N = {}", grids[0].points_per_axis()), pn);
    plot.add(format!("N = {}", grids[1].points_per_axis()), p2n);
    report.set("worst_relative_change", json!(worst));
    report.set("stability_tolerance", json!(FS_STABILITY));
    report.set("all_finite", json!(finite));
    report.set("degenerate_cases", json!(degenerate));
    report.set("cases", json!(labels.len()));
    report.tables = vec![table];
    report.plots = vec![plot];
    finish(&mut report, pass_if(finite && worst <= FS_STABILITY));
    Ok(report)
}

fn profile_params(cfg: &ExperimentConfig) -> Result<ProfileParams<f64>, RunError> {
    Ok(ProfileParams::new(cfg.r_list.clone(), cfg.shifts.clone(), cfg.epsilon)?)
}

fn resolve_pairs(cfg: &ExperimentConfig, grid: &UniformGrid<f64>) -> Result<(Vec<CertifiedPair<f64>>, Vec<Catalog<f64>>), RunError> {
    let mut pairs = inline_pairs(cfg, grid)?;
    let cats = catalogs(cfg, grid)?;
    for c in &cats {
        pairs.extend(c.pairs.iter().cloned());
    }
    Ok((pairs, cats))
}

struct ProfileRow {
    pair: String,
    profile: wmix::Profile,
}

fn profiles(
    op: &OperatorSpec<f64>,
    pairs: &[CertifiedPair<f64>],
    raw: &ProbeFamily<f64>,
    params: &ProfileParams<f64>,
) -> Result<Vec<ProfileRow>, RunError> {
    pairs
        .iter()
        .map(|pair| {
            let norm = ActiveNorm::from_pair(raw.grid(), pair)?;
            let probes = raw.normalized(&norm)?;
            Ok(ProfileRow { pair: pair.id.clone(), profile: fk_profile(op, &probes, &norm, params)? })
        })
        .collect()
}

fn profile_tables(rows: &[ProfileRow], tag: &str, eps: f64, report: &mut Report) -> Vec<Value> {
    let mut tail = Table::new(&format!("{tag}_tail"), &["pair", "radius", "tail", "tail_over_bound"]);
    let mut modulus = Table::new(&format!("{tag}_modulus"), &["pair", "shift", "modulus", "modulus_over_bound"]);
    let mut pt = Plot::new(&format!("{tag}_tail"), "Tail curves", "R", "tail / K");
    let mut pm = Plot::new(&format!("{tag}_modulus"), "Translation modulus", "|h|", "modulus / K");
    let mut out = Vec::new();
    for r in rows {
        let p = &r.profile;
        for &(x, v) in &p.tail_curve {
            tail.push(vec![r.pair.clone(), num(x), num(v), num(v / p.bound_k)]);
        }
        for &(x, v) in &p.modulus_curve {
            modulus.push(vec![r.pair.clone(), num(x), num(v), num(v / p.bound_k)]);
        }
        pt.add(r.pair.clone(), p.tail_curve.iter().map(|&(x, v)| (x, v / p.bound_k)).collect());
        pm.add(r.pair.clone(), p.modulus_curve.iter().map(|&(x, v)| (x, v / p.bound_k)).collect());
        out.push(json!({
            "pair": r.pair,
            "bound_k": p.bound_k,
            "verdict": verdict_word(p.verdict),
            "witness": p.witness,
            "r_star": p.r_star(eps),
            "delta_star": p.delta_star(eps),
            "modulus_one_cell_over_bound": p.modulus_curve.first().map(|m| m.1 / p.bound_k),
        }));
    }
    report.tables.push(tail);
    report.tables.push(modulus);
    report.plots.push(pt);
    report.plots.push(pm);
    out
}

fn fk(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let s = setup(cfg)?;
    let op = operator(cfg, &s.grid)?;
    let (pairs, cats) = resolve_pairs(cfg, &s.grid)?;
    let raw = probes(cfg, &s.grid)?;
    let rows = profiles(&op, &pairs, &raw, &profile_params(cfg)?)?;
    let mut report = Report::new();
    let entries = profile_tables(&rows, "fk", cfg.epsilon, &mut report);
    report.set("operator", json!(op.to_string()));
    report.set("probe_ids", json!(raw.ids()));
    report.set("catalogs", catalog_json(&cats));
    report.set("profiles", Value::Array(entries));
    finish(&mut report, combine(rows.iter().map(|r| r.profile.verdict)));
    Ok(report)
}

fn sweep(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let s = setup(cfg)?;
    let op = operator(cfg, &s.grid)?;
    let cats = catalogs(cfg, &s.grid)?;
    let raw = probes(cfg, &s.grid)?;
    let params = profile_params(cfg)?;
    let mut sp = SweepParams::default();
    if !cfg.epsilon_list.is_empty() {
        sp.epsilons = cfg.epsilon_list.clone();
    }
    if !sp.epsilons.contains(&cfg.epsilon) {
        sp.epsilons.push(cfg.epsilon);
    }
    let mut report = Report::new();
    let mut thresholds = Table::new("sweep_thresholds", &["k_cap", "epsilon", "r_ratio", "delta_ratio", "uniform"]);
    let mut stars = Table::new("sweep_stars", &["k_cap", "pair", "epsilon", "r_star", "delta_star"]);
    let mut tail = Plot::new("sweep_tail_envelope", "Tail envelope per cap", "R", "tail / K");
    let mut modulus = Plot::new("sweep_modulus_envelope", "Modulus envelope per cap", "|h|", "modulus / K");
    let mut reports = Vec::new();
    let mut entries = Vec::new();
    for cat in &cats {
        if cat.pairs.is_empty() {
            return Err(RunError::Precondition(format!("catalog at K = {} is empty", cat.k_cap)));
        }
        let r = uniform_sweep(&op, &cat.pairs, cat.k_cap, &raw, &params, &sp)?;
        let k = r.phi_empirical;
        for row in &r.thresholds {
            thresholds.push(vec![num(r.k_cap), num(row.epsilon), opt(row.r_ratio), opt(row.delta_ratio), row.uniform.to_string()]);
            for ((id, _), (rs, ds)) in r.per_weight.iter().zip(&row.stars) {
                stars.push(vec![num(r.k_cap), id.clone(), num(row.epsilon), opt(*rs), opt(*ds)]);
            }
        }
        tail.add(format!("K = {}", r.k_cap), r.tail_envelope.iter().map(|&(x, v)| (x, v / k)).collect());
        modulus.add(format!("K = {}", r.k_cap), r.modulus_envelope.iter().map(|&(x, v)| (x, v / k)).collect());
        let rows: Vec<ProfileRow> =
            r.per_weight.iter().map(|(id, p)| ProfileRow { pair: id.clone(), profile: p.clone() }).collect();
        let per = profile_tables(&rows, &format!("sweep_k{}", r.k_cap), cfg.epsilon, &mut report);
        entries.push(json!({
            "k_cap": r.k_cap,
            "phi_empirical": r.phi_empirical,
            "verdict": verdict_word(r.verdict),
            "thresholds": r.thresholds.iter().map(|t| json!({
                "epsilon": t.epsilon, "r_ratio": t.r_ratio, "delta_ratio": t.delta_ratio, "uniform": t.uniform,
                "stars": t.stars,
            })).collect::<Vec<_>>(),
            "profiles": per,
        }));
        reports.push(r);
    }
    let phi = phi_envelope(&reports);
    let mut phi_plot = Plot::new("sweep_phi", "Empirical bound per cap", "K_cap", "phi");
    phi_plot.add("phi", phi.clone());
    report.set("operator", json!(op.to_string()));
    report.set("probe_ids", json!(raw.ids()));
    report.set("catalogs", catalog_json(&cats));
    report.set("caps", Value::Array(entries));
    report.set("phi_envelope", json!(phi));
    report.tables.insert(0, stars);
    report.tables.insert(0, thresholds);
    report.plots.insert(0, phi_plot);
    report.plots.insert(0, modulus);
    report.plots.insert(0, tail);
    finish(&mut report, combine(reports.iter().map(|r| r.verdict)));
    Ok(report)
}

fn commutator_steps(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let s = setup(cfg)?;
    let Some(OperatorConfig::Commutator { b, inner }) = &cfg.operator else {
        return Err(RunError::Config("commutator-steps needs a commutator operator".into()));
    };
    let b = b.build(&s.grid)?;
    let inner = inner.build(&s.grid)?;
    let kernel = match &inner {
        OperatorSpec::Cz(k) | OperatorSpec::TruncatedCz { kernel: k, .. } => k.clone(),
        _ => return Err(RunError::Config("commutator-steps needs a kernel operator inside".into())),
    };
    let cats = catalogs(cfg, &s.grid)?;
    let cat = &cats[0];
    let raw = probes(cfg, &s.grid)?;
    let norms: Vec<ActiveNorm<f64>> =
        cat.pairs.iter().map(|p| ActiveNorm::from_pair(&s.grid, p)).collect::<Result<_, _>>()?;
    let mut report = Report::new();

    // Principal value against smooth truncations.
    let mut etas = cfg.eta_list.clone();
    etas.sort_by(|a, b| b.partial_cmp(a).expect("finite eta"));
    let pv = OperatorSpec::commutator(b.clone(), OperatorSpec::Cz(kernel.clone()))?;
    let approximants: Vec<(i32, OperatorSpec<f64>)> = etas
        .iter()
        .enumerate()
        .map(|(i, &eta)| {
            Ok((i as i32, OperatorSpec::commutator(b.clone(), OperatorSpec::TruncatedCz { kernel: kernel.clone(), eta })?))
        })
        .collect::<Result<_, RunError>>()?;
    let errors = uniform_approx_check(&pv, &approximants, &norms, &raw)?;
    let curve: Vec<(f64, f64)> = errors.iter().map(|&(i, e)| (etas[i as usize], e)).collect();
    let slope = loglog_slope(&curve).map(|s| s.0);
    let slope_ok = slope.is_some_and(|s| (s - 1.0).abs() <= SLOPE_TOLERANCE);
    let pointwise = truncation_error_check(&kernel, &etas, &b, raw.probes(), &s.family)?;
    let mut trunc = Table::new("truncation", &["eta", "approx_error", "pointwise_constant"]);
    for (&(eta, e), &(_, c)) in curve.iter().zip(&pointwise.levels) {
        trunc.push(vec![num(eta), num(e), num(c)]);
    }
    let mut tp = Plot::new("truncation", "Truncation error", "eta", "error").log_log();
    tp.add("sup error", curve.clone());

    // Mollified symbols b_j.
    let mut moll = Table::new("mollification", &["j", "error", "bmo_distance", "fitted"]);
    let mut fitted = Vec::new();
    for &j in &cfg.j_list {
        let bj = mollify_truncate(&b, j)?;
        let diff = b.zip_with(&bj, "b-b_j", |x, y| x - y)?;
        let bmo = bmo_norm(&diff, &s.family)?;
        let opj = OperatorSpec::commutator(bj, inner.clone())?;
        let op = OperatorSpec::commutator(b.clone(), inner.clone())?;
        let e = uniform_approx_check(&op, &[(j, opj)], &norms, &raw)?[0].1;
        let f = if bmo > 0.0 { Some(e / (bmo * cat.k_cap * cat.k_cap)) } else { None };
        moll.push(vec![j.to_string(), num(e), num(bmo), opt(f)]);
        fitted.push((j, e, bmo, f));
    }
    let fs: Vec<f64> = fitted.iter().filter_map(|x| x.3).collect();
    let spread = if fs.is_empty() {
        None
    } else {
        Some(fs.iter().cloned().fold(f64::MIN, f64::max) / fs.iter().cloned().fold(f64::MAX, f64::min))
    };
    let spread_ok = cfg.j_list.is_empty() || spread.is_some_and(|s| s <= MOLLIFY_SPREAD);
    let mut mp = Plot::new("mollification", "Mollified symbol error", "||b - b_j||_*", "error").log_log();
    mp.add("error", fitted.iter().map(|x| (x.2, x.1)).collect());

    // Weighted bound per catalog pair.
    let mut bounds = Table::new("weighted_bound", &["pair", "fitted_constant"]);
    let mut bound_json = Vec::new();
    for pair in &cat.pairs {
        let w = pair.product();
        let v = commutator_weighted_bound_check(&b, &inner, &w, raw.probes(), &s.family)?.value();
        bounds.push(vec![pair.id.clone(), opt(v)]);
        bound_json.push(json!({ "pair": pair.id, "fitted": v }));
    }

    report.set("catalog", catalog_json(std::slice::from_ref(cat)));
    report.set("truncation", json!({
        "levels": curve,
        "slope": slope,
        "slope_target": 1.0,
        "slope_tolerance": SLOPE_TOLERANCE,
        "pointwise_fitted": pointwise.fitted,
        "pointwise_stable": pointwise.stable,
        "gradient_sup": pointwise.gradient,
    }));
    report.set("mollification", json!({
        "levels": fitted.iter().map(|x| json!({"j": x.0, "error": x.1, "bmo_distance": x.2, "fitted": x.3})).collect::<Vec<_>>(),
        "spread": spread,
        "allowed_spread": MOLLIFY_SPREAD,
    }));
    report.set("weighted_bound", Value::Array(bound_json));
    report.tables = vec![trunc, moll, bounds];
    report.plots = vec![tp, mp];
    finish(&mut report, pass_if(slope_ok && spread_ok));
    Ok(report)
}

fn pseudo(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let s = setup(cfg)?;
    let d = s.grid.dim();
    let op = match &cfg.operator {
        Some(op) => op.build(&s.grid)?,
        None => OperatorSpec::Pseudo(SymbolSpec::cordes_gaussian(2.0, d)),
    };
    let identity = OperatorSpec::Pseudo(SymbolSpec::constant(1.0, d));
    let (pairs, cats) = resolve_pairs(cfg, &s.grid)?;
    let raw = probes(cfg, &s.grid)?;
    let mut deviation: f64 = 0.0;
    for f in raw.probes() {
        let g = apply(&identity, f)?;
        for (a, b) in g.samples().iter().zip(f.samples()) {
            deviation = deviation.max((a - b).abs());
        }
    }
    let params = profile_params(cfg)?;
    let rows = profiles(&op, &pairs, &raw, &params)?;
    let id_rows = profiles(&identity, &pairs, &raw, &params)?;
    let mut report = Report::new();
    let main = profile_tables(&rows, "pseudo", cfg.epsilon, &mut report);
    let ctrl = profile_tables(&id_rows, "identity_symbol", cfg.epsilon, &mut report);
    let id_fail = id_rows.iter().all(|r| r.profile.verdict == Verdict::Fail);
    let id_ok = deviation <= IDENTITY_TOLERANCE;
    report.set("operator", json!(op.to_string()));
    report.set("identity_symbol_deviation", json!(deviation));
    report.set("identity_symbol_reproduces_identity", json!(id_ok));
    report.set("catalogs", catalog_json(&cats));
    report.set("profiles", Value::Array(main));
    report.set("identity_symbol_profiles", Value::Array(ctrl));
    report.set("identity_symbol_fails", json!(id_fail));
    let v = if !id_ok || !id_fail {
        Verdict::Fail
    } else {
        combine(rows.iter().map(|r| r.profile.verdict))
    };
    finish(&mut report, v);
    Ok(report)
}

fn proof(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let s = setup(cfg)?;
    let ws = weights(cfg, s.grid.dim())?;
    let r0 = cfg.r0.expect("validated");
    let mut report = Report::new();
    let mut hs = cfg.h_list.clone();
    hs.sort_by(|a, b| b.partial_cmp(a).expect("finite h"));
    let mut rs = cfg.r_list.clone();
    rs.sort_by(|a, b| a.partial_cmp(b).expect("finite R"));
    let mut hq = Table::new("proof_h", &["weight", "h", "i", "bound_i", "ii", "bound_ii", "e1_inner", "e1_outer", "e1"]);
    let mut rq = Table::new("proof_r", &["weight", "r", "e2", "bound_e2"]);
    let mut ph = Plot::new("proof_h", "I and II against |h|", "|h|", "value").log_log();
    let mut pr = Plot::new("proof_r", "E2 against R", "R", "E2").log_log();
    let mut entries = Vec::new();
    let mut verdicts = Vec::new();
    for w in &ws {
        let a2 = ap_constant(w, 2.0, &s.family)?.constant;
        let setup = ProofSetup::new(w, &s.grid, a2, r0)?;
        let e = setup.exponents();
        let at_h: Vec<_> = hs.iter().map(|&h| setup.evaluate(h, rs[0])).collect::<Result<_, _>>()?;
        let at_r: Vec<_> = rs.iter().map(|&r| setup.evaluate(hs[0], r)).collect::<Result<_, _>>()?;
        let mut bound_ok = true;
        for q in &at_h {
            bound_ok &= q.i <= q.bound_i * (1.0 + BOUND_I_TOLERANCE);
            hq.push(vec![w.to_string(), num(q.h), num(q.i), num(q.bound_i), num(q.ii), num(q.bound_ii), num(q.e1_inner), num(q.e1_outer), num(q.e1)]);
        }
        for q in &at_r {
            rq.push(vec![w.to_string(), num(q.r), num(q.e2), num(q.bound_e2)]);
        }
        let i_curve: Vec<(f64, f64)> = at_h.iter().map(|q| (q.h, q.i)).collect();
        let ii_curve: Vec<(f64, f64)> = at_h.iter().map(|q| (q.h, q.ii)).collect();
        let e2_curve: Vec<(f64, f64)> = at_r.iter().map(|q| (q.r, q.e2)).collect();
        let d = s.grid.dim() as f64;
        let targets = [1.0 / e.r1_conjugate(), 1.0 / e.r2_conjugate(), d * (e.q - 2.0) / 2.0];
        let slopes = [
            loglog_slope(&i_curve).map(|x| x.0),
            loglog_slope(&ii_curve).map(|x| x.0),
            loglog_slope(&e2_curve).map(|x| x.0),
        ];
        let matches: Vec<bool> = slopes
            .iter()
            .zip(&targets)
            .map(|(s, t)| s.is_some_and(|s| (s - t).abs() <= SLOPE_TOLERANCE * t.abs()))
            .collect();
        // Ratio of the fitted constant in each `≲` bound, reported only.
        let fit_ii = at_h.iter().map(|q| q.ii / q.bound_ii).fold(0.0, f64::max);
        let fit_e2 = at_r.iter().map(|q| q.e2 / q.bound_e2).fold(0.0, f64::max);
        ph.add(format!("I {w}"), i_curve);
        ph.add(format!("II {w}"), ii_curve);
        pr.add(format!("E2 {w}"), e2_curve);
        verdicts.push(pass_if(bound_ok && matches.iter().all(|&m| m)));
        entries.push(json!({
            "weight": w.to_string(),
            "a2": a2,
            "r0": r0,
            "exponents": { "epsilon": e.epsilon, "q": e.q, "r1": e.r1, "r2": e.r2, "r1_conjugate": e.r1_conjugate(), "r2_conjugate": e.r2_conjugate() },
            "bound_i_holds": bound_ok,
            "slopes": { "i": slopes[0], "ii": slopes[1], "e2": slopes[2] },
            "slope_targets": { "i": targets[0], "ii": targets[1], "e2": targets[2] },
            "slope_matches": { "i": matches[0], "ii": matches[1], "e2": matches[2] },
            "fitted_constant_ii": fit_ii,
            "fitted_constant_e2": fit_e2,
        }));
    }
    report.set("weights", Value::Array(entries));
    report.tables = vec![hq, rq];
    report.plots = vec![ph, pr];
    finish(&mut report, combine(verdicts));
    Ok(report)
}

fn envelopes(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let s = setup(cfg)?;
    let d = s.grid.dim();
    let cats = catalogs(cfg, &s.grid)?;
    let raw = probes(cfg, &s.grid)?;
    let symbol_op = match &cfg.operator {
        Some(op) => op.build(&s.grid)?,
        None => OperatorSpec::Pseudo(SymbolSpec::cordes_gaussian(2.0, d)),
    };
    let params = MaximalParams::new(&s.family);
    let fs = raw.probes();
    let ident: Vec<_> = fs.iter().map(|f| (f.clone(), f.clone())).collect();
    let maximal: Vec<_> = fs
        .par_iter()
        .map(|f| Ok((f.clone(), hl_maximal(f, &params)?)))
        .collect::<Result<_, RunError>>()?;
    let sym: Vec<_> = fs.iter().map(|f| Ok((f.clone(), apply(&symbol_op, f)?))).collect::<Result<_, RunError>>()?;
    let envs: Vec<(&str, RatioEnvelope<f64>)> = vec![
        ("identity", extrapolation_envelope(&ident, &cats, "(f, f)")?),
        ("maximal", extrapolation_envelope(&maximal, &cats, "(f, Mf)")?),
        ("operator", extrapolation_envelope(&sym, &cats, format!("(f, {symbol_op} f)"))?),
    ];
    let mut report = Report::new();
    let mut table = Table::new("envelopes", &["pairs", "k_cap", "per_cap", "envelope", "certified_max"]);
    let mut plot = Plot::new("envelopes", "Extrapolation envelopes", "K", "envelope");
    let mut entries = Vec::new();
    let mut ok = true;
    for (name, e) in &envs {
        for k in 0..e.axis.len() {
            table.push(vec![name.to_string(), num(e.axis[k]), num(e.per_cap[k]), num(e.values[k]), num(e.certified[k])]);
        }
        let finite = e.values.iter().all(|v| v.is_finite());
        ok &= finite && e.is_nondecreasing();
        if *name == "identity" {
            ok &= e.values.iter().all(|&v| v == 1.0);
        }
        plot.add(e.context.clone(), e.axis.iter().cloned().zip(e.values.iter().cloned()).collect());
        entries.push(json!({
            "pairs": name,
            "context": e.context,
            "k_caps": e.axis,
            "envelope": e.values,
            "per_cap": e.per_cap,
            "certified_max": e.certified,
            "finite": finite,
            "nondecreasing": e.is_nondecreasing(),
        }));
    }
    report.set("catalogs", catalog_json(&cats));
    report.set("envelopes", Value::Array(entries));
    report.tables = vec![table];
    report.plots = vec![plot];
    finish(&mut report, pass_if(ok));
    Ok(report)
}
