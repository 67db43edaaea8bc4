use proptest::prelude::*;

use critbif::continuation::{
    continue_branch, default_bracket, detect_bifurcation, second_block_singular_values, ContinuationOptions, RadialSolver,
};
use critbif::systems::SystemFamily;

fn families(dim: usize) -> Vec<SystemFamily> {
    vec![
        SystemFamily::schrodinger(0.5, dim).unwrap(),
        SystemFamily::schrodinger(1.0, dim).unwrap(),
        SystemFamily::gross_pitaevskii(dim).unwrap(),
        SystemFamily::druet_hebey(dim).unwrap(),
    ]
}

#[test]
fn detection_accuracy_across_families() {
    for dim in 3..=5 {
        for fam in families(dim) {
            for n in 0..=3 {
                let bracket = default_bracket(&fam, n).unwrap();
                let d = detect_bifurcation(&fam, n, bracket, 200).unwrap();
                let err = (d.alpha - fam.alpha_star(n)).abs();
                assert!(err <= 1e-6, "{fam} n={n}: {err:e}");
                assert!(d.alpha >= bracket.0 && d.alpha <= bracket.1);
                assert!(d.nullvector_cosine > 0.999, "{fam} n={n}");
            }
        }
    }
}

#[test]
fn class_projection_isolates_the_kernel() {
    for dim in 3..=5 {
        let fam = SystemFamily::druet_hebey(dim).unwrap();
        for n in 0..=3 {
            let solver = RadialSolver::new(&fam, n, 128).unwrap();
            let sv = second_block_singular_values(&solver, fam.alpha_star(n)).unwrap();
            assert!(sv[1] >= 1e3 * sv[0], "N={dim} n={n}: {:?}", &sv[..2]);
        }
    }
}

#[test]
fn branches_in_other_families() {
    let opts = ContinuationOptions { steps: 8, ..Default::default() };
    for (fam, n) in [
        (SystemFamily::druet_hebey(4).unwrap(), 1),
        (SystemFamily::druet_hebey(5).unwrap(), 2),
        (SystemFamily::schrodinger(0.5, 3).unwrap(), 3),
    ] {
        let b = continue_branch(&fam, n, &opts).unwrap();
        assert!(b.is_complete(), "{fam} n={n}: {:?}", b.arms.iter().map(|a| &a.termination).collect::<Vec<_>>());
        for p in b.ordered_points() {
            assert!(p.residual <= 1e-9 && p.min_margin > 0.0);
        }
        let pts = &b.arm(1).unwrap().points;
        let ratio = |i: usize| pts[i].z1_remainder / pts[i].eps.abs();
        assert!(ratio(0) < ratio(pts.len() - 1), "{fam} n={n}");
    }
}

#[test]
fn branch_serializes_losslessly() {
    let fam = SystemFamily::gross_pitaevskii(3).unwrap();
    let opts = ContinuationOptions { grid_size: 32, detect_grid_size: 32, steps: 3, ..Default::default() };
    let b = continue_branch(&fam, 2, &opts).unwrap();
    let text = serde_json::to_string(&b).unwrap();
    let back: critbif::continuation::Branch = serde_json::from_str(&text).unwrap();
    assert_eq!(back, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn swapping_components_keeps_residual(
        a in proptest::collection::vec(-0.3f64..0.3, 4),
        b in proptest::collection::vec(-0.3f64..0.3, 4),
        alpha in -1.0f64..3.0,
    ) {
        let fam = SystemFamily::gross_pitaevskii(4).unwrap();
        let solver = RadialSolver::new(&fam, 1, 32).unwrap();
        let c = critbif::specfun::bubble_peak(4);
        let z1: Vec<f64> = solver.grid.nodes.iter().map(|t| c * (a[0] + a[1] * t + a[2] * t * t + a[3] * t * t * t)).collect();
        let z2: Vec<f64> = solver.grid.nodes.iter().map(|t| c * (b[0] + b[1] * t + b[2] * t * t + b[3] * t * t * t) * 0.5).collect();
        let neg: Vec<f64> = z2.iter().map(|x| -x).collect();
        let (r1, r2) = solver.residual_full(alpha, &z1, &z2).unwrap();
        let (s1, s2) = solver.residual_full(alpha, &z1, &neg).unwrap();
        for j in 0..32 {
            prop_assert!((r1[j] - s1[j]).abs() <= 1e-12 * c);
            prop_assert!((r2[j] + s2[j]).abs() <= 1e-12 * c);
        }
    }
}
