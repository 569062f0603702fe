//! End-to-end acceptance checks, one line per criterion.
//!
//! Run with `cargo test -p pnn-core --test acceptance`.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::Rng;

use pnn_core::catalog::{ah_expected_dim, table1_architectures, AH_EXCEPTIONS, TABLE1};
use pnn_core::dimension::{conjecture_sweep, jacobian, neurovariety_dim, DimOptions, SweepOptions};
use pnn_core::learning_degree::eddeg_polar_sum;
use pnn_core::linalg::Mat;
use pnn_core::membership::{
    manifold_member_222, member, random_image, variety_member_22k, Answer, MembershipVerdict,
};
use pnn_core::network::{apply_symmetry, coefficients, Architecture, SymmetryElement, WeightVector};
use pnn_core::rng::{derive_seed, seeded};
use pnn_core::scalar::{Rational, Scalar};
use pnn_core::training::{census, run_experiment, ExperimentConfig};

use common::{finite_difference_gap, same_matrix, small_architectures, symbolic_jacobian};

type Outcome = Result<String, String>;

fn arch(s: &str) -> Architecture {
    s.parse().expect("valid architecture")
}

fn dim_of(a: &Architecture) -> Result<pnn_core::dimension::DimensionReport, String> {
    neurovariety_dim(a, &DimOptions::default()).map_err(|e| format!("{a}: {e}"))
}

fn table_reproduction() -> Outcome {
    let start = Instant::now();
    for (a, row) in table1_architectures().iter().zip(TABLE1.iter()) {
        let rep = dim_of(a)?;
        if (rep.dim, rep.edim, rep.ambient) != (row.3, row.4, row.5) {
            return Err(format!(
                "{a}: got dim {} edim {} ambient {}, expected {} {} {}",
                rep.dim, rep.edim, rep.ambient, row.3, row.4, row.5
            ));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(120) {
        return Err(format!("27 rows took {elapsed:?}"));
    }
    Ok("27/27 rows match".into())
}

fn defective_single_output() -> Outcome {
    for &(d0, d1, r, _) in AH_EXCEPTIONS.iter() {
        let a = Architecture::new(vec![d0, d1, 1], r).unwrap();
        let rep = dim_of(&a)?;
        if rep.defect != 1 {
            return Err(format!("{a}: defect {} (dim {}, edim {})", rep.defect, rep.dim, rep.edim));
        }
    }
    let mut rng = seeded(2024);
    let mut checked = Vec::new();
    while checked.len() < 10 {
        let d0 = rng.random_range(1..=5usize);
        let d1 = rng.random_range(1..=8usize);
        let r = rng.random_range(2..=4u32);
        let a = Architecture::new(vec![d0, d1, 1], r).unwrap();
        let exceptional = AH_EXCEPTIONS.iter().any(|e| (e.0, e.1, e.2) == (d0, d1, r))
            || ah_expected_dim(d0, d1, r) != a.expected_dim();
        if exceptional || checked.contains(&a) {
            continue;
        }
        let rep = dim_of(&a)?;
        if rep.defect != 0 {
            return Err(format!("{a}: defect {}", rep.defect));
        }
        checked.push(a);
    }
    let names: Vec<String> = checked.iter().map(Architecture::to_string).collect();
    Ok(format!("4 exceptions with defect 1; defect 0 on {}", names.join(", ")))
}

fn width_one_collapse() -> Outcome {
    for (s, expected) in [("2-1-2-1:2", 2), ("2-1-2-1:3", 2), ("2-1-2-1:4", 2), ("3-1-5-1:3", 3)] {
        let rep = dim_of(&arch(s))?;
        if rep.dim != expected {
            return Err(format!("{s}: dim {} expected {expected}", rep.dim));
        }
    }
    Ok("all four dimensions match".into())
}

fn ed_degree_identity() -> Outcome {
    let start = Instant::now();
    for k in 2..=100usize {
        let got = eddeg_polar_sum(k).map_err(|e| e.to_string())?;
        let kk = BigInt::from(k);
        let expected = BigInt::from(8) * &kk * &kk - BigInt::from(12) * &kk + BigInt::from(3);
        if got != expected {
            return Err(format!("k = {k}: {got} vs {expected}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("k = 2..100 in {:.2}s", elapsed.as_secs_f64()))
}

fn jacobian_correctness() -> Outcome {
    let all = small_architectures(3, &[2, 3], 3, 50);
    for (i, a) in all.iter().enumerate() {
        let mut rng = seeded(derive_seed(55, 0, i as u64));
        let w = WeightVector::<Rational>::random(a, &mut rng);
        let rep = jacobian(a, &w, derive_seed(55, 1, i as u64)).map_err(|e| format!("{a}: {e}"))?;
        if !same_matrix(&rep, &symbolic_jacobian(a, &w)) {
            return Err(format!("{a}: interpolated Jacobian differs from the symbolic one"));
        }
    }
    let mut rng = seeded(56);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let a = &all[rng.random_range(0..all.len())];
        let w = WeightVector::<f64>::random(a, &mut rng);
        let x: Vec<f64> = (0..a.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gap = finite_difference_gap(a, &w, &x);
        if gap >= 1e-5 {
            return Err(format!("{a}: backprop vs finite differences gap {gap:e}"));
        }
        worst = worst.max(gap);
    }
    Ok(format!("{} architectures exact; 200 gradients within {worst:.1e}", all.len()))
}

fn accepted(v: &MembershipVerdict) -> bool {
    v.in_variety && v.in_manifold != Answer::No
}

fn membership_soundness() -> Outcome {
    let cases = [
        "3-2-1:2", "4-2-1:2", "4-3-1:2", "2-1-3:2", "3-1-2:3", "2-2-2:2", "2-2-3:2", "2-2-4:2", "2-3-1:2", "2-3-2:2",
    ];
    for (t, s) in cases.iter().enumerate() {
        let a = arch(s);
        let mut rng = seeded(derive_seed(66, t as u64, 0));
        for i in 0..1000 {
            let img = random_image::<Rational, _>(&a, &mut rng).map_err(|e| e.to_string())?;
            let v = member(&a, &img, 0.0, i).map_err(|e| format!("{a}: {e}"))?;
            if !accepted(&v) {
                return Err(format!("{a}: image {i} rejected ({:?})", v.certificate));
            }
            if a.widths() == [2, 2, 2] && manifold_member_222(&img.as_matrix(), 0.0).unwrap().in_manifold != Answer::Yes {
                return Err(format!("{a}: image {i} rejected by the two-output test"));
            }
        }
    }
    let c: Mat<Rational> = Mat::from_rows(&[
        vec![Rational::from_i64(1), Rational::from_i64(0), Rational::from_i64(-1)],
        vec![Rational::from_i64(0), Rational::from_i64(1), Rational::from_i64(0)],
    ]);
    let v = manifold_member_222(&c, 0.0).map_err(|e| e.to_string())?;
    if v.in_manifold != Answer::No || !v.in_variety || !variety_member_22k(&c, 0.0).unwrap() {
        return Err(format!("counterexample misclassified: {v:?}"));
    }
    Ok(format!("{} tests x 1000 images accepted; counterexample rejected by the manifold test only", cases.len()))
}

fn symmetry_invariance() -> Outcome {
    let archs = [
        "2-2-3:2", "3-2-1:2", "2-3-2:3", "2-1-2-1:3", "3-1-5-1:3", "2-2-2-2:2", "1-3-2-1:3", "3-3-3:2", "2-3-3-2:2",
        "4-2-3:2", "2-2-2-2-2:2", "3-2-2-1:3",
    ];
    for (t, s) in archs.iter().enumerate() {
        let a = arch(s);
        let mut rng = seeded(derive_seed(77, t as u64, 0));
        let w = WeightVector::<Rational>::random(&a, &mut rng);
        let base = coefficients(&a, &w).map_err(|e| e.to_string())?;
        for i in 0..100 {
            let g = SymmetryElement::<Rational>::random(&a, &mut rng);
            let moved = apply_symmetry(&a, &w, &g).map_err(|e| e.to_string())?;
            if coefficients(&a, &moved).map_err(|e| e.to_string())? != base {
                return Err(format!("{a}: group element {i} changes the coefficients"));
            }
        }
    }
    Ok(format!("{} architectures x 100 elements, exact", archs.len()))
}

fn experiment_reproduction() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::desk();
    let runs = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let c = census(&runs, &cfg).map_err(|e| e.to_string())?;
    let rank_two: Vec<_> = c.rank_two().collect();
    if rank_two.len() != 1 {
        return Err(format!("{} rank-2 clusters", rank_two.len()));
    }
    let best = rank_two[0];
    let top = c.clusters.iter().map(|k| k.frequency).max().unwrap_or(0);
    if best.frequency != top {
        return Err(format!("rank-2 cluster has {} runs, the largest has {top}", best.frequency));
    }
    match &best.local_min {
        Some(v) if v.is_local_min => {}
        other => return Err(format!("rank-2 cluster fails the local-min check: {other:?}")),
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30 * 60) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "{} runs, {} clusters, rank-2 cluster has {} runs and is a local minimum",
        runs.len(),
        c.clusters.len(),
        best.frequency
    ))
}

fn conjecture_sweep_check() -> Outcome {
    let reports = conjecture_sweep(&SweepOptions::default()).map_err(|e| e.to_string())?;
    if let Some(bad) = reports.iter().find(|r| r.defect != 0) {
        return Err(format!("{} is defective: dim {} edim {}", bad.arch, bad.dim, bad.edim));
    }
    Ok(format!("{} architectures, no defects", reports.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("table1 reproduction", table_reproduction),
        ("defective single-output cases", defective_single_output),
        ("width-1 collapse", width_one_collapse),
        ("ED-degree identity", ed_degree_identity),
        ("Jacobian correctness", jacobian_correctness),
        ("membership soundness", membership_soundness),
        ("symmetry invariance", symmetry_invariance),
        ("experiment reproduction", experiment_reproduction),
        ("conjecture sweep", conjecture_sweep_check),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {} {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
