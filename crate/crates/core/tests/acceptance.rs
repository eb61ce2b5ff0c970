//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use maxplus_dre::duality::{dual_transform_bruteforce, DualQuad};
use maxplus_dre::grid::GridSpec;
use maxplus_dre::instances::{random_between, random_feasible_retry, FeasibleInstance};
use maxplus_dre::io::to_json;
use maxplus_dre::limit::run_limit_sweep;
use maxplus_dre::problem::problem_document;
use maxplus_dre::riccati::{dp_evaluate_bruteforce, riccati_iterate, GridEstimate, QuadFunction};
use maxplus_dre::semigroup::{
    dual_pipeline, eval_kernel, gamma_transform, kernel_convolution_bruteforce, pi_transform, psi_p, q_sequence,
    semigroup_element, star, xi_transform, SemigroupTable,
};
use maxplus_dre::{DreError, DualityConfig, Kind, ProblemData, Result, SemigroupElement, Strategy, SymMat, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20;
const HORIZON: usize = 20;
const LAW_HORIZON: usize = 16;

struct Outcome {
    passed: bool,
    detail: String,
}

fn pass_if(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn failure(e: DreError) -> Outcome {
    Outcome {
        passed: false,
        detail: format!("error: {e}"),
    }
}

fn tol() -> Tolerances {
    Tolerances::default()
}

/// 50 instances cycling n = 1..4, each with a full-rank input matrix.
fn instances() -> Vec<FeasibleInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..50)
        .map(|i| {
            let n = i % 4 + 1;
            random_feasible_retry(&mut rng, n, n, 0.9, HORIZON, &tol(), 200).expect("feasible instance")
        })
        .collect()
}

fn upper_bound(lam: &SemigroupTable, k: usize) -> SymMat {
    lam.get(k).unwrap().hessian.b22.neg()
}

struct Built {
    lam: SemigroupTable,
    theta: SemigroupTable,
}

fn build(inst: &FeasibleInstance, horizon: usize) -> Result<Built> {
    Ok(Built {
        lam: SemigroupTable::build(Kind::Lambda, horizon, &inst.prob, &inst.m, &tol())?,
        theta: SemigroupTable::build(Kind::Theta, horizon, &inst.prob, &inst.m, &tol())?,
    })
}

/// Max relative deviation of the primal map and the dual pipeline from the
/// direct recursion over k ≤ 20, three initial conditions per instance.
fn representation(insts: &[FeasibleInstance], built: &[Built]) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let (mut primal, mut dual) = (0.0f64, 0.0f64);
    for (inst, b) in insts.iter().zip(built) {
        let upper = upper_bound(&b.lam, HORIZON);
        for _ in 0..3 {
            let p0 = random_between(&mut rng, &inst.m, &upper, 0.05, 0.95);
            let path = riccati_iterate(&p0, HORIZON, &inst.prob, &tol())?;
            for k in 1..=HORIZON {
                let direct = path.get(k).ok_or(DreError::PivotLost { margin: f64::NAN })?;
                let p = psi_p(&b.lam.get(k).unwrap().hessian, &p0, &tol())?;
                let d = dual_pipeline(&b.theta.get(k).unwrap().hessian, &p0, &inst.m, &tol())?;
                primal = primal.max(p.rel_distance(direct));
                dual = dual.max(d.rel_distance(direct));
            }
        }
    }
    Ok((primal, dual))
}

fn criterion_semigroup_law(insts: &[FeasibleInstance]) -> Result<f64> {
    let mut worst = 0.0f64;
    for inst in &insts[..10] {
        for kind in [Kind::Lambda, Kind::Theta] {
            let table = SemigroupTable::build(kind, LAW_HORIZON, &inst.prob, &inst.m, &tol())?;
            for k1 in 1..LAW_HORIZON {
                for k2 in 1..=(LAW_HORIZON - k1) {
                    let product = table.get(k1).unwrap().compose(table.get(k2).unwrap(), &tol())?;
                    worst = worst.max(product.hessian.rel_distance(&table.get(k1 + k2).unwrap().hessian));
                }
            }
        }
    }
    Ok(worst)
}

fn criterion_triangle(insts: &[FeasibleInstance], built: &[Built]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (inst, b) in insts.iter().zip(built) {
        let q = q_sequence(&inst.prob, &inst.m, LAW_HORIZON, &tol())?;
        for k in 1..=LAW_HORIZON {
            let theta = &b.theta.get(k).unwrap().hessian;
            let lam = &b.lam.get(k).unwrap().hessian;
            worst = worst
                .max(gamma_transform(theta, &inst.m, &tol())?.rel_distance(&q[k]))
                .max(pi_transform(lam, &inst.m, &tol())?.rel_distance(&q[k]))
                .max(xi_transform(theta, &inst.m, &tol())?.rel_distance(lam));
        }
    }
    Ok(worst)
}

fn criterion_q_structure(insts: &[FeasibleInstance]) -> Result<Outcome> {
    let (mut first_block, mut increment, mut above_m) = (0.0f64, f64::INFINITY, f64::INFINITY);
    for inst in insts {
        let q = q_sequence(&inst.prob, &inst.m, HORIZON, &tol())?;
        let path = riccati_iterate(&inst.m, HORIZON, &inst.prob, &tol())?;
        for (k, qk) in q.iter().enumerate() {
            let r = path.get(k).ok_or(DreError::PivotLost { margin: f64::NAN })?;
            first_block = first_block.max(qk.b11.rel_distance(r));
        }
        for w in q.windows(2) {
            increment = increment.min(w[1].b22.sub(&w[0].b22).min_eigenvalue());
        }
        let gap = q[1].b22.sub(&inst.m);
        above_m = above_m.min(gap.min_eigenvalue() - tol().margin_for(&gap));
    }
    Ok(pass_if(
        first_block <= 1e-10 && increment >= -1e-10 && above_m > 0.0,
        format!(
            "max |Q11 - R_k(M)| rel = {first_block:.3e} (<= 1e-10), min eig increment = {increment:.3e} (>= -1e-10), min eig (Q1_22 - M) beyond margin = {above_m:.3e} (> 0)"
        ),
    ))
}

fn criterion_monotonicity(insts: &[FeasibleInstance], built: &[Built]) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut worst = f64::INFINITY;
    let mut compared = 0usize;
    let mut truncated = 0usize;
    for i in 0..100 {
        let inst = &insts[i % insts.len()];
        let n = inst.prob.state_dim();
        let upper = upper_bound(&built[i % insts.len()].lam, HORIZON);
        // Wider than the admissible box so that some paths stop early.
        let lo = inst.m.sub(&SymMat::identity(n));
        let hi = upper.add(&SymMat::identity(n).scale(0.5));
        let p1 = random_between(&mut rng, &lo, &hi, 0.0, 1.0);
        let p2 = random_between(&mut rng, &p1, &p1.add(&SymMat::identity(n)), 0.0, 1.0);
        let a = riccati_iterate(&p1, HORIZON, &inst.prob, &tol())?;
        let b = riccati_iterate(&p2, HORIZON, &inst.prob, &tol())?;
        let common = a.steps.len().min(b.steps.len());
        if common < HORIZON + 1 {
            truncated += 1;
        }
        for k in 0..common {
            worst = worst.min(b.steps[k].sub(&a.steps[k]).min_eigenvalue());
            compared += 1;
        }
    }
    Ok(pass_if(
        worst >= -1e-9,
        format!("min eig R_k(P2) - R_k(P1) = {worst:.3e} (>= -1e-9) over {compared} pairs of iterates, {truncated} truncated paths"),
    ))
}

/// Retries a grid oracle with a doubled box while the maximizer sits on the
/// boundary.
fn with_growing_box<F>(mut f: F) -> Result<GridEstimate>
where
    F: FnMut(&GridSpec) -> Result<GridEstimate>,
{
    let mut half = 4.0;
    loop {
        match f(&GridSpec::with_half_width(half)) {
            Err(DreError::SearchBoxTooSmall { .. }) if half < 4096.0 => half *= 2.0,
            other => return other,
        }
    }
}

fn criterion_oracles() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut insts = Vec::new();
    for _ in 0..10 {
        insts.push(random_feasible_retry(&mut rng, 1, 1, 0.9, 8, &tol(), 200).expect("scalar instance"));
    }
    for _ in 0..5 {
        insts.push(random_feasible_retry(&mut rng, 2, 2, 0.9, 8, &tol(), 200).expect("planar instance"));
    }
    // Worst excess of |grid − exact| over the certified bound, per oracle.
    let mut excess = [f64::NEG_INFINITY; 3];
    let mut evaluations = 0usize;
    for inst in &insts {
        let n = inst.prob.state_dim();
        let lam = SemigroupTable::build(Kind::Lambda, 8, &inst.prob, &inst.m, &tol())?;
        let upper = upper_bound(&lam, 1);
        let point = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        for _ in 0..10 {
            let omega = random_between(&mut rng, &inst.m, &upper, 0.05, 0.95);
            let x = point(&mut rng);
            let exact = riccati_iterate(&omega, 1, &inst.prob, &tol())?
                .get(1)
                .ok_or(DreError::PivotLost { margin: f64::NAN })?
                .half_quadratic_form(&x);
            let f = QuadFunction::new(omega.clone());
            let est = with_growing_box(|g| dp_evaluate_bruteforce(&f, &x, &inst.prob, g))?;
            excess[0] = excess[0].max((est.value - exact).abs() - est.bound);

            let z = point(&mut rng);
            let dual = DualQuad::from_primal(&f, &inst.m, &tol())?;
            let est = with_growing_box(|g| dual_transform_bruteforce(&f, &inst.m, &z, g, &tol()))?;
            excess[1] = excess[1].max((est.value - dual.eval(&z)).abs() - est.bound);

            let k1 = rng.gen_range(1..=4);
            let k2 = rng.gen_range(1..=4);
            let (a, b) = (lam.get(k1).unwrap(), lam.get(k2).unwrap());
            let product = SemigroupElement {
                kind: Kind::Lambda,
                k: k1 + k2,
                hessian: star(&a.hessian, &b.hessian, &tol())?,
            };
            let (x, y) = (point(&mut rng), point(&mut rng));
            let est = with_growing_box(|g| kernel_convolution_bruteforce(&a.hessian, &b.hessian, &x, &y, g, &tol()))?;
            excess[2] = excess[2].max((est.value - eval_kernel(&product, &x, &y)?).abs() - est.bound);
            evaluations += 1;
        }
    }
    Ok(pass_if(
        excess.iter().all(|&e| e <= 0.0),
        format!(
            "{evaluations} points x 3 oracles; worst (|grid - exact| - bound): dp = {:.3e}, dual transform = {:.3e}, kernel convolution = {:.3e} (<= 0)",
            excess[0], excess[1], excess[2]
        ),
    ))
}

fn scalar_instance() -> (ProblemData, SymMat) {
    (ProblemData::scalar(0.5, 1.0, 0.1, 1.0).unwrap(), SymMat::scalar(-1.0))
}

fn criterion_existence_boundary() -> Result<Outcome> {
    let (prob, m) = scalar_instance();
    let step = 0.01;
    let mut details = Vec::new();
    let mut passed = true;
    for k in [3usize, 5, 10] {
        let lam22 = semigroup_element(Kind::Lambda, k, &prob, &m, Strategy::Sequential, &tol())?.hessian.b22.to_rows()[0][0];
        let start = -lam22 - 1.0;
        let (mut first_stop, mut first_pivot) = (None, None);
        for i in 0..=300usize {
            let p0 = start + i as f64 * step;
            if first_stop.is_none() && !riccati_iterate(&SymMat::scalar(p0), k, &prob, &tol())?.reached(k) {
                first_stop = Some(i);
            }
            if first_pivot.is_none() && lam22 + p0 >= 0.0 {
                first_pivot = Some(i);
            }
        }
        let ok = matches!((first_stop, first_pivot), (Some(a), Some(b)) if a.abs_diff(b) <= 1);
        passed &= ok;
        details.push(format!("k={k}: direct recursion stops at sweep index {first_stop:?}, Lambda_22 + P0 >= 0 from index {first_pivot:?}"));
    }
    Ok(pass_if(passed, details.join("; ")))
}

fn criterion_limit() -> Result<Outcome> {
    let (prob, _) = scalar_instance();
    let sweep = run_limit_sweep(&prob, 3, &[1.0, 10.0, 100.0], &tol())?;
    let all_feasible = sweep.points.iter().all(|p| p.feasible);
    let d: Vec<String> = sweep
        .points
        .iter()
        .map(|p| format!("d({}) = {}", p.m, p.distance.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into())))
        .collect();
    let first = sweep.points.first().and_then(|p| p.distance);
    let last = sweep.points.last().and_then(|p| p.distance);
    Ok(pass_if(
        all_feasible && matches!((first, last), (Some(a), Some(b)) if b < a),
        d.join(", "),
    ))
}

fn scratch_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("maxplus-dre-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_maxplus-dre"))
        .args(args)
        .output()
        .expect("run binary");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_determinism(insts: &[FeasibleInstance]) -> Result<Outcome> {
    let dir = scratch_dir();
    let inst = insts.iter().find(|i| i.prob.state_dim() == 2).expect("planar instance");
    let input = dir.join("problem.json");
    let cfg = DualityConfig {
        m: inst.m.clone(),
        horizon: HORIZON,
    };
    std::fs::write(&input, problem_document(&inst.prob, &cfg)).expect("write problem");
    let lam = SemigroupTable::build(Kind::Lambda, 10, &inst.prob, &inst.m, &tol())?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let p0s: Vec<Vec<Vec<f64>>> = (0..8)
        .map(|_| random_between(&mut rng, &inst.m, &upper_bound(&lam, 10), 0.05, 0.95).to_rows())
        .collect();
    let p0_arg = to_json(&p0s);
    let input_arg = input.to_str().unwrap();
    let runs = [
        vec!["solve", "--input", input_arg, "--k", "10", "--p0", p0_arg.trim()],
        vec!["semigroup", "--input", input_arg, "--k", "1,2,5,10", "--kind", "all"],
    ];
    let mut identical = true;
    let mut exit_codes = Vec::new();
    for args in &runs {
        let (c1, o1) = run_cli(args);
        let (c2, o2) = run_cli(args);
        identical &= o1 == o2 && !o1.is_empty();
        exit_codes.extend([c1, c2]);
    }
    std::fs::remove_dir_all(&dir).ok();

    let mut worst = 0.0f64;
    for inst in insts {
        for kind in [Kind::Lambda, Kind::Theta] {
            let d = semigroup_element(kind, HORIZON, &inst.prob, &inst.m, Strategy::Doubling, &tol())?;
            let s = semigroup_element(kind, HORIZON, &inst.prob, &inst.m, Strategy::Sequential, &tol())?;
            worst = worst.max(d.hessian.rel_distance(&s.hessian));
        }
    }
    Ok(pass_if(
        identical && exit_codes.iter().all(|&c| c == 0) && worst <= 1e-10,
        format!("repeated CLI outputs identical = {identical}, exit codes {exit_codes:?}; doubling vs sequential max rel = {worst:.3e} (<= 1e-10)"),
    ))
}

fn main() {
    let started = Instant::now();
    let insts = instances();
    let built: Vec<Built> = insts
        .iter()
        .map(|i| build(i, HORIZON).expect("semigroup tables on a feasible instance"))
        .collect();
    let representation = representation(&insts, &built);

    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push((
        "1 primal representation",
        match &representation {
            Ok((p, _)) => pass_if(*p <= 1e-8, format!("max rel deviation = {p:.3e} (<= 1e-8), 50 instances x 3 P0, k <= 20")),
            Err(e) => failure(e.clone()),
        },
    ));
    results.push((
        "2 dual pipeline",
        match &representation {
            Ok((_, d)) => pass_if(*d <= 1e-8, format!("max rel deviation = {d:.3e} (<= 1e-8), 50 instances x 3 P0, k <= 20")),
            Err(e) => failure(e.clone()),
        },
    ));
    results.push((
        "3 semigroup law",
        criterion_semigroup_law(&insts)
            .map(|w| pass_if(w <= 1e-8, format!("max rel deviation = {w:.3e} (<= 1e-8), 10 instances, Lambda and Theta, k1+k2 <= 16")))
            .unwrap_or_else(failure),
    ));
    results.push((
        "4 commutation triangle",
        criterion_triangle(&insts, &built)
            .map(|w| pass_if(w <= 1e-8, format!("max rel deviation = {w:.3e} (<= 1e-8), k <= 16")))
            .unwrap_or_else(failure),
    ));
    results.push(("5 structure of Q", criterion_q_structure(&insts).unwrap_or_else(failure)));
    results.push(("6 monotonicity", criterion_monotonicity(&insts, &built).unwrap_or_else(failure)));
    results.push(("7 brute-force oracles", criterion_oracles().unwrap_or_else(failure)));
    results.push(("8 existence boundary", criterion_existence_boundary().unwrap_or_else(failure)));
    results.push(("9 limit trend", criterion_limit().unwrap_or_else(failure)));
    results.push(("10 determinism", criterion_determinism(&insts).unwrap_or_else(failure)));

    println!();
    for (name, outcome) in &results {
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{status} [{name}] {}", outcome.detail);
    }
    let failed = results.iter().filter(|(_, o)| !o.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
