//! The core runs on `f32` as well; results track the `f64` ones.

use wmix::compactness::{fk_profile, ActiveNorm, ProbeFamily, ProbeRecipe, ProfileParams};
use wmix::grid::{cube_family, FamilyPolicy, SampledFunction};
use wmix::maximal::{hl_maximal, MaximalParams};
use wmix::operators::{apply, KernelSpec, OperatorSpec};
use wmix::weights::{ap_constant, WeightSpec};
use wmix::{Function, Function32, Grid, Grid32};

#[test]
fn ap_constant_agrees_with_double() {
    let g32 = Grid32::new(1, 4.0, 256).unwrap();
    let g64 = Grid::new(1, 4.0, 256).unwrap();
    let a = ap_constant(&WeightSpec::power(0.5f32, 1), 2.0, &cube_family(&g32, FamilyPolicy::Exhaustive1d).unwrap())
        .unwrap()
        .constant;
    let b = ap_constant(&WeightSpec::power(0.5f64, 1), 2.0, &cube_family(&g64, FamilyPolicy::Exhaustive1d).unwrap())
        .unwrap()
        .constant;
    assert!((a as f64 - b).abs() <= 1e-4 * b, "{a} vs {b}");
}

#[test]
fn maximal_and_kernel_agree_with_double() {
    let g32 = Grid32::new(2, 2.0, 16).unwrap();
    let g64 = Grid::new(2, 2.0, 16).unwrap();
    let bump = |x: &[f32]| (-(x[0] * x[0] + x[1] * x[1])).exp();
    let f32s: Function32 = SampledFunction::sample(&g32, "g", bump).unwrap();
    let f64s: Function = SampledFunction::sample(&g64, "g", |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();

    let fam32 = cube_family(&g32, FamilyPolicy::Dyadic).unwrap();
    let fam64 = cube_family(&g64, FamilyPolicy::Dyadic).unwrap();
    let m32 = hl_maximal(&f32s, &MaximalParams::new(&fam32)).unwrap();
    let m64 = hl_maximal(&f64s, &MaximalParams::new(&fam64)).unwrap();
    for (a, b) in m32.samples().iter().zip(m64.samples()) {
        assert!((*a as f64 - b).abs() <= 1e-5);
    }

    let t32 = apply(&OperatorSpec::Cz(KernelSpec::riesz(2, 0).unwrap()), &f32s).unwrap();
    let t64 = apply(&OperatorSpec::Cz(KernelSpec::riesz(2, 0).unwrap()), &f64s).unwrap();
    for (a, b) in t32.samples().iter().zip(t64.samples()) {
        assert!((*a as f64 - b).abs() <= 1e-4);
    }
}

#[test]
fn identity_profile_runs_in_single_precision() {
    let g = Grid32::new(2, 4.0, 16).unwrap();
    let norm = ActiveNorm::weighted(&g, 2.0, &WeightSpec::unit(2)).unwrap();
    let probes = ProbeFamily::generate(&g, &ProbeRecipe::standard(2, 1)).unwrap().normalized(&norm).unwrap();
    let params = ProfileParams::new(vec![1.0, 2.0], vec![1, 2], 0.1).unwrap();
    let prof = fk_profile(&OperatorSpec::Identity, &probes, &norm, &params).unwrap();
    assert!(prof.modulus_curve[0].1 >= 1.0);
}

#[test]
fn proof_setup_accepts_single_precision_grid() {
    let g = Grid32::new(2, 5.0, 80).unwrap();
    let setup = wmix::compactness::ProofSetup::new(&WeightSpec::power(0.5f32, 2), &g, 1.2, 1.25).unwrap();
    let q = setup.evaluate(0.125, 2.5).unwrap();
    assert!(q.i.is_finite() && q.i <= q.bound_i * 1.001);
}
