mod common;

use ckm_core::cutloop::{rectangle_lp_exhaustive, LoopConfig};
use ckm_core::instance::gen_gap_groups;
use ckm_core::lpcore::{build_basic_lp, solve_lp};
use common::{random_colocated, random_split, reference_lp};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + b.abs())
}

#[test]
fn basic_lp_matches_reference_on_colocated_instances() {
    for seed in 0..40 {
        let inst = random_colocated(seed, 7);
        let ours = solve_lp(&inst, &build_basic_lp(&inst), 1e-7).unwrap();
        ours.check_basic(&inst, 1e-7).unwrap();
        let reference = reference_lp(&inst, false);
        assert!(close(ours.objective, reference), "seed {seed}: {} vs {reference}", ours.objective);
    }
}

#[test]
fn basic_lp_matches_reference_on_split_instances() {
    for seed in 0..30 {
        let (nf, nc) = (2 + seed as usize % 4, 2 + seed as usize % 5);
        let u = 1 + seed as usize % 3;
        let k = nc.div_ceil(u).max(1);
        let inst = random_split(seed, nf.max(k), nc, u, k);
        let ours = solve_lp(&inst, &build_basic_lp(&inst), 1e-7).unwrap();
        let reference = reference_lp(&inst, false);
        assert!(close(ours.objective, reference), "seed {seed}: {} vs {reference}", ours.objective);
    }
}

// The cut loop with exhaustive separation must land on the same value as an
// LP that lists every rectangle row up front.
#[test]
fn rectangle_loop_matches_fully_listed_lp() {
    let mut lifted = 0;
    for seed in 0..30 {
        let nf = 2 + seed as usize % 2;
        let nc = 2 + seed as usize % 3;
        let u = 1 + seed as usize % 3;
        let k = nc.div_ceil(u);
        let inst = random_split(seed + 100, nf.max(k), nc, u, k);
        let res = rectangle_lp_exhaustive(&inst, &LoopConfig::default()).unwrap();
        let reference = reference_lp(&inst, true);
        assert!(close(res.lp_final, reference), "seed {seed}: {} vs {reference}", res.lp_final);
        if res.lp_final > res.lp_basic + 1e-6 {
            lifted += 1;
        }
    }
    println!("{lifted} of 30 instances lifted by rectangle rows");
}

#[test]
fn groups_u2_rectangle_value_matches_reference() {
    let inst = gen_gap_groups(2).unwrap();
    let res = rectangle_lp_exhaustive(&inst, &LoopConfig::default()).unwrap();
    assert!(res.lp_basic.abs() < 1e-9);
    let reference = reference_lp(&inst, true);
    assert!(reference > 1e-6);
    assert!(close(res.lp_final, reference), "{} vs {reference}", res.lp_final);
}
