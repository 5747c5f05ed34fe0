//! Acceptance gate. Each test checks one criterion and writes a single
//! `criterion N: PASS|FAIL ...` line to stderr (bypassing output capture).

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use ftfp_core::gamma::{chebyshev_sides, gamma_scan};
use ftfp_core::instance::{four_by_four_example, generate_euclidean, generate_near_far};
use ftfp_core::lp::{cost_breakdown, four_by_four_primal, solve_lp};
use ftfp_core::oracle::{brute_force_opt, enumerate_rounding_expectation, OracleConfig};
use ftfp_core::partition::{
    check_dual_edges, partition, partition_close_far, verify_properties, verify_properties_cf,
};
use ftfp_core::pipeline::{partition_residual, prepare, Prepared};
use ftfp_core::rational::{int, ratio, to_f64};
use ftfp_core::reduction::recombine;
use ftfp_core::rounding::{estimate, validate_integral, Algorithm, RoundingPlan};
use ftfp_core::{FtfpInstance, IntegralSolution, Rational};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAMMA: f64 = 1.575;

fn gamma() -> Rational {
    ratio(63, 40)
}

fn report(n: u32, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n}: {verdict} {detail}");
    assert!(pass, "criterion {n} failed: {detail}");
}

type Generator = fn(usize, usize, u32, u64) -> FtfpInstance;

/// Shape cycles through every `(|F|, |C|, r_max)` in the box as `k` grows.
fn shaped(gen: Generator, k: u64, max_f: u64, max_c: u64, max_r: u64, seed: u64) -> FtfpInstance {
    let nf = 1 + k % max_f;
    let nc = 1 + (k / max_f) % max_c;
    let r = 1 + (k / (max_f * max_c)) % max_r;
    gen(nf as usize, nc as usize, r as u32, seed)
}

/// The first `count` near/far instances whose LP optimum is fractional, so
/// the residual is non-empty.
fn fractional(
    count: usize,
    max_f: u64,
    max_c: u64,
    max_r: u64,
    seed: u64,
) -> Vec<(FtfpInstance, Prepared)> {
    let mut out = Vec::with_capacity(count);
    let mut k = 0u64;
    while out.len() < count {
        let inst = shaped(generate_near_far, k, max_f, max_c, max_r, seed + k);
        k += 1;
        let prep = prepare(&inst).expect("instance prepares");
        if prep.reduction.residual_instance.num_clients() > 0 {
            out.push((inst, prep));
        }
    }
    out
}

/// 500 grid instances and 500 fractional near/far instances, prepared once.
fn suite() -> &'static [(FtfpInstance, Prepared)] {
    static SUITE: OnceLock<Vec<(FtfpInstance, Prepared)>> = OnceLock::new();
    SUITE.get_or_init(|| {
        let mut all: Vec<(FtfpInstance, Prepared)> = (0..500u64)
            .map(|k| {
                let inst = shaped(generate_euclidean, k, 6, 5, 4, 1_000 + k);
                let prep = prepare(&inst).expect("suite instance prepares");
                (inst, prep)
            })
            .collect();
        all.extend(fractional(500, 6, 5, 4, 1_000));
        all
    })
}

fn plan_for(prep: &Prepared, algo: Algorithm) -> Option<RoundingPlan> {
    partition_residual(prep, algo, &gamma())
        .expect("residual partitions")
        .map(|p| p.plan(algo).expect("plan builds"))
}

fn full_solution(prep: &Prepared, plan: Option<&RoundingPlan>, seed: u64) -> IntegralSolution {
    let red = &prep.reduction;
    let residual = match plan {
        Some(plan) => plan.round(seed),
        None => ftfp_core::rounding::empty_solution(&red.residual_instance),
    };
    recombine(red, &residual).expect("recombine accepts rounder output")
}

#[test]
fn criterion_01_worked_example() {
    let start = Instant::now();
    let inst = four_by_four_example();
    let sol = solve_lp(&inst).unwrap();
    let mut ok = sol.primal == four_by_four_primal();
    ok &= sol.dual.alpha.iter().all(|a| *a == ratio(4, 3));
    ok &= sol.costs.lp_value == ratio(28, 3);

    let ps = partition(&inst, &sol.primal, &sol.dual).unwrap();
    let third = ratio(1, 3);
    let ybar: Vec<Rational> = ps.facilities.iter().map(|f| f.ybar.clone()).collect();
    ok &= ybar
        == vec![
            int(1),
            third.clone(),
            third.clone(),
            third.clone(),
            third.clone(),
        ];
    let sites: Vec<usize> = ps.facilities.iter().map(|f| f.site).collect();
    ok &= sites == vec![0, 1, 2, 3, 0];
    let clients: Vec<usize> = ps.demands.iter().map(|d| d.client).collect();
    ok &= clients == vec![0, 1, 1, 2, 2, 3, 3];
    ok &= ps.primaries == vec![0, 1];
    let assigned: Vec<usize> = ps.demands.iter().map(|d| d.assigned_to).collect();
    ok &= assigned == vec![0, 1, 0, 1, 0, 1, 0];
    let expected: [&[(usize, Rational)]; 7] = [
        &[(1, third.clone()), (2, third.clone()), (3, third.clone())],
        &[(0, int(1))],
        &[(2, third.clone()), (3, third.clone()), (4, third.clone())],
        &[(0, int(1))],
        &[(1, third.clone()), (3, third.clone()), (4, third.clone())],
        &[(0, int(1))],
        &[(1, third.clone()), (2, third.clone()), (4, third.clone())],
    ];
    for (d, want) in ps.demands.iter().zip(expected) {
        let got: Vec<(usize, Rational)> = d.xbar.iter().map(|(&m, v)| (m, v.clone())).collect();
        ok &= got == want.to_vec();
    }
    let elapsed = start.elapsed();
    ok &= elapsed.as_secs_f64() < 1.0;
    report(
        1,
        ok,
        format!("LP*=28/3, 5 facilities, 7 demands, primaries {{1',2'}} in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_property_suites() {
    let start = Instant::now();
    let g = gamma();
    let mut violations = Vec::new();
    let mut partitioned = 0;
    for (k, (inst, prep)) in suite().iter().enumerate() {
        let red = &prep.reduction;
        if red.residual_instance.num_clients() == 0 {
            continue;
        }
        partitioned += 1;
        let (rinst, rprimal, rdual) = (
            &red.residual_instance,
            &red.residual_fractional,
            &prep.residual_dual,
        );
        let ps = partition(rinst, rprimal, rdual).unwrap();
        violations.extend(
            verify_properties(&ps, rprimal, rdual)
                .into_iter()
                .map(|v| format!("#{k} {v}")),
        );
        let cfp = partition_close_far(rinst, rprimal, &g).unwrap();
        violations.extend(
            verify_properties_cf(&cfp)
                .into_iter()
                .map(|v| format!("#{k} cf {v}")),
        );
        violations.extend(
            check_dual_edges(&cfp.base, rdual)
                .into_iter()
                .map(|v| format!("#{k} cf {v}")),
        );
        // Facility count against the input's site count.
        let r = u64::from(rinst.max_demand());
        let c = rinst.num_clients() as u64;
        let bound = inst.num_sites() as u64 + 2 * r * c * c;
        for (label, count) in [
            ("plain", ps.facilities.len()),
            ("cf", cfp.base.facilities.len()),
        ] {
            if count as u64 > bound {
                violations.push(format!("#{k} {label} FB: {count} > {bound}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = violations.is_empty() && elapsed.as_secs() < 300;
    report(
        2,
        ok,
        format!(
            "{} instances ({partitioned} with a residual), {} violations{}, {elapsed:.2?}",
            suite().len(),
            violations.len(),
            violations
                .first()
                .map(|v| format!(" e.g. {v}"))
                .unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_03_feasibility() {
    let instances: Vec<Prepared> = fractional(100, 6, 5, 4, 50_000)
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    let mut checked = 0u64;
    let mut failures = Vec::new();
    for algo in Algorithm::ALL {
        for (k, prep) in instances.iter().enumerate() {
            let plan = plan_for(prep, algo);
            for seed in 0..100u64 {
                let sol = full_solution(prep, plan.as_ref(), seed);
                checked += 1;
                if let Some(v) = validate_integral(&prep.instance, &sol).first() {
                    failures.push(format!("{algo} #{k} seed {seed}: {v}"));
                }
            }
        }
    }
    report(
        3,
        failures.is_empty(),
        format!(
            "{checked} solutions, {} infeasible{}",
            failures.len(),
            failures
                .first()
                .map(|f| format!(" e.g. {f}"))
                .unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_04_expectation_vs_oracle() {
    const TRIALS: u64 = 100_000;
    const BOUND: u64 = 1 << 14;
    let mut used = 0;
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut k = 0u64;
    while used < 24 && k < 20_000 {
        let inst = shaped(generate_near_far, k, 4, 4, 3, 90_000 + k);
        k += 1;
        let prep = prepare(&inst).unwrap();
        let plans: Vec<RoundingPlan> = Algorithm::ALL
            .iter()
            .filter_map(|&a| plan_for(&prep, a))
            .collect();
        if plans.len() < 3
            || plans
                .iter()
                .any(|p| p.outcome_count() > u128::from(BOUND) || p.outcome_count() < 2)
        {
            continue;
        }
        used += 1;
        for plan in &plans {
            let exact = enumerate_rounding_expectation(plan, BOUND).unwrap();
            let est = estimate(plan, TRIALS, 7 + k);
            let diff = (est.mean_cost - to_f64(&exact.total)).abs();
            let tol = 4.0 * est.se_cost + 1e-9 * est.mean_cost.abs().max(1.0);
            if est.se_cost > 0.0 {
                worst = worst.max(diff / est.se_cost);
            }
            if diff > tol {
                failures.push(format!(
                    "{} #{k}: |{} - {}| > {tol}",
                    plan.algorithm,
                    est.mean_cost,
                    to_f64(&exact.total)
                ));
            }
        }
    }
    report(
        4,
        used >= 20 && failures.is_empty(),
        format!("{used} instances x 3 rounders, {TRIALS} trials, worst |diff|/se = {worst:.2}, {} misses", failures.len()),
    );
}

fn ratio_suite() -> Vec<Prepared> {
    fractional(30, 6, 5, 4, 70_000)
        .into_iter()
        .map(|(_, p)| p)
        .collect()
}

#[test]
fn criterion_05_ratio_bounds() {
    const TRIALS: u64 = 10_000;
    let bound = |algo: Algorithm| match algo {
        Algorithm::Egup => 3.0,
        Algorithm::Echs => 1.0 + 2.0 / std::f64::consts::E,
        Algorithm::Ebgs => GAMMA,
    };
    let mut failures = Vec::new();
    let mut worst = [0.0f64; 3];
    let suite = ratio_suite();
    for (k, prep) in suite.iter().enumerate() {
        let red = &prep.reduction;
        let base = red.integral_part();
        let (bf, bc) = (to_f64(&base.facility_cost), to_f64(&base.connection_cost));
        let lp = to_f64(&prep.lp.costs.lp_value);
        let residual_f =
            to_f64(&cost_breakdown(&red.residual_instance, &red.residual_fractional).facility_cost);
        for (a, algo) in Algorithm::ALL.into_iter().enumerate() {
            let Some(plan) = plan_for(prep, algo) else {
                // Integral optimum: the pipeline returns it unchanged.
                if to_f64(&base.total_cost) > lp * (1.0 + 1e-12) {
                    failures.push(format!("{algo} #{k}: integral part above LP*"));
                }
                continue;
            };
            let residual = estimate(&plan, TRIALS, 11 + k as u64);
            let full = residual.shifted(bf, bc);
            let limit = bound(algo) * lp + 3.0 * full.se_cost + 1e-9;
            worst[a] = worst[a].max(full.mean_cost / lp);
            if full.mean_cost > limit {
                failures.push(format!("{algo} #{k}: mean {} > {limit}", full.mean_cost));
            }
            let target_f = match algo {
                Algorithm::Egup => None,
                Algorithm::Echs => Some(residual_f),
                Algorithm::Ebgs => Some(GAMMA * residual_f),
            };
            if let Some(target) = target_f {
                let diff = (residual.mean_facility - target).abs();
                if diff > 3.0 * residual.se_facility + 1e-9 * target.max(1.0) {
                    failures.push(format!(
                        "{algo} #{k}: mean_F {} vs {target} (se {})",
                        residual.mean_facility, residual.se_facility
                    ));
                }
            }
        }
    }
    report(
        5,
        failures.is_empty(),
        format!(
            "{} instances, worst mean/LP* egup {:.3} echs {:.3} ebgs {:.3}, {} misses{}",
            suite.len(),
            worst[0],
            worst[1],
            worst[2],
            failures.len(),
            failures
                .first()
                .map(|f| format!(" e.g. {f}"))
                .unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_06_indirection() {
    const TRIALS: u64 = 10_000;
    let suite = ratio_suite();
    let mut lines = Vec::new();
    let mut ok = true;
    for (algo, limit) in [
        (Algorithm::Echs, (-1.0f64).exp()),
        (Algorithm::Ebgs, (-GAMMA).exp()),
    ] {
        let (mut hits, mut total) = (0u64, 0u64);
        for (k, prep) in suite.iter().enumerate() {
            if let Some(plan) = plan_for(prep, algo) {
                let est = estimate(&plan, TRIALS, 23 + k as u64);
                hits += est.indirect_count;
                total += est.non_primary_count;
            }
        }
        let p = if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        };
        let se = if total == 0 {
            0.0
        } else {
            (p * (1.0 - p) / total as f64).sqrt()
        };
        ok &= total > 0 && p <= limit + 3.0 * se;
        lines.push(format!("{algo} {p:.4} (se {se:.4}, limit {limit:.4})"));
    }
    report(6, ok, lines.join(", "));
}

#[test]
fn criterion_07_demand_reduction() {
    let mut failures = Vec::new();
    for (k, (inst, prep)) in suite().iter().enumerate() {
        let red = &prep.reduction;
        let nf = inst.num_sites() as u32;
        if let Some(j) = red.residual_demand.iter().position(|&r| r > nf) {
            failures.push(format!(
                "#{k}: residual demand {} > |F| = {nf} at client {j}",
                red.residual_demand[j]
            ));
        }
        // x̂ + ẋ = x*, ŷ + ẏ = y* on the completed instance.
        let primal = &prep.completed_primal;
        for i in 0..red.instance.num_sites() {
            let y =
                Rational::from_integer(red.integral_y[i].into()) + &red.residual_fractional.y[i];
            if y != primal.y[i] {
                failures.push(format!("#{k}: y mismatch at site {i}"));
            }
            for j in 0..red.instance.num_clients() {
                let dot = red
                    .residual_clients
                    .iter()
                    .position(|&c| c == j)
                    .map(|c| red.residual_fractional.x[i][c].clone());
                let x = Rational::from_integer(red.integral_x[i][j].into())
                    + dot.unwrap_or_else(Rational::zero);
                if x != primal.x[i][j] {
                    failures.push(format!("#{k}: x mismatch at ({i},{j})"));
                }
            }
        }
        let base = red.integral_part();
        let frac = cost_breakdown(&red.residual_instance, &red.residual_fractional).lp_value;
        if &base.total_cost + &frac != prep.lp.costs.lp_value {
            failures.push(format!(
                "#{k}: integral + residual LP cost differs from LP*"
            ));
        }
        let plan = plan_for(prep, Algorithm::Echs);
        let residual = match &plan {
            Some(p) => p.round(k as u64),
            None => ftfp_core::rounding::empty_solution(&red.residual_instance),
        };
        let sol = recombine(red, &residual).unwrap();
        if sol.total_cost != &base.total_cost + &residual.total_cost {
            failures.push(format!("#{k}: recombined cost is not the sum of its parts"));
        }
        if !validate_integral(inst, &sol).is_empty() {
            failures.push(format!("#{k}: recombined solution infeasible"));
        }
    }
    report(
        7,
        failures.is_empty(),
        format!(
            "{} instances, {} failures{}",
            suite().len(),
            failures.len(),
            failures
                .first()
                .map(|f| format!(" e.g. {f}"))
                .unwrap_or_default()
        ),
    );
}

/// `(LP* <= OPT <= every rounded cost, best-of-100 EBGS <= 1.575 LP*)`.
fn sandwich(inst: &FtfpInstance, prep: &Prepared, label: &str, failures: &mut Vec<String>) -> bool {
    let lp = &prep.lp.costs.lp_value;
    let opt = brute_force_opt(inst, &OracleConfig::default())
        .unwrap()
        .total_cost;
    if *lp > opt {
        failures.push(format!("{label}: LP* > OPT"));
    }
    let mut ebgs_ok = false;
    for algo in Algorithm::ALL {
        let plan = plan_for(prep, algo);
        let mut best: Option<Rational> = None;
        for seed in 0..100u64 {
            let cost = full_solution(prep, plan.as_ref(), seed).total_cost;
            if cost < opt {
                failures.push(format!("{algo} {label}: rounded cost below OPT"));
            }
            if best.as_ref().is_none_or(|b| cost < *b) {
                best = Some(cost);
            }
        }
        if algo == Algorithm::Ebgs {
            ebgs_ok = best.unwrap() <= &gamma() * lp;
        }
    }
    ebgs_ok
}

#[test]
fn criterion_08_oracle_sandwich() {
    let mut cases: Vec<(String, FtfpInstance, Prepared)> = Vec::new();
    for (name, gen) in [
        ("grid", generate_euclidean as Generator),
        ("near-far", generate_near_far),
    ] {
        for nf in 1..=3usize {
            for nc in 1..=3usize {
                for r in 1..=2u32 {
                    for s in 0..40u64 {
                        let seed =
                            30_000 + 1_000 * (nf as u64 * 10 + nc as u64) + 100 * u64::from(r) + s;
                        let inst = gen(nf, nc, r, seed);
                        let prep = prepare(&inst).unwrap();
                        cases.push((format!("{name} {nf}x{nc} r{r} seed {seed}"), inst, prep));
                    }
                }
            }
        }
    }
    for (k, (inst, prep)) in fractional(60, 3, 3, 2, 200_000).into_iter().enumerate() {
        cases.push((format!("fractional #{k}"), inst, prep));
    }
    let with_residual = cases
        .iter()
        .filter(|(_, _, p)| p.reduction.residual_instance.num_clients() > 0)
        .count();
    let mut failures = Vec::new();
    let good = cases
        .iter()
        .filter(|(label, inst, prep)| sandwich(inst, prep, label, &mut failures))
        .count();
    let share = good as f64 / cases.len() as f64;
    report(
        8,
        failures.is_empty() && share >= 0.99,
        format!(
            "{} instances ({with_residual} fractional), best-of-100 EBGS within 1.575 LP* on {:.1}%, {} sandwich failures",
            cases.len(),
            100.0 * share,
            failures.len()
        ),
    );
}

#[test]
fn criterion_09_gamma_scan() {
    let scan = gamma_scan(1.4, 1.7, 0.001);
    let ok = (scan.argmin - 1.575).abs() <= 1e-3 && (scan.min - 1.575).abs() <= 1e-3;
    report(
        9,
        ok,
        format!("argmin {:.4}, min-max {:.4}", scan.argmin, scan.min),
    );
}

#[test]
fn criterion_10_chained_product_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    let mut tight = 0;
    for _ in 0..1000 {
        let k = rng.gen_range(1..=8);
        let mut d: Vec<Rational> = (0..k)
            .map(|_| ratio(rng.gen_range(0..=1000), rng.gen_range(1..=7)))
            .collect();
        d.sort();
        let g: Vec<Rational> = (0..k)
            .map(|_| {
                let q = rng.gen_range(1..=20);
                ratio(rng.gen_range(1..=q), q)
            })
            .collect();
        let (lhs, rhs) = chebyshev_sides(&d, &g);
        if lhs > rhs {
            violations += 1;
        }
        if lhs == rhs {
            tight += 1;
        }
    }
    report(
        10,
        violations == 0,
        format!("1000 instances, {violations} violations, {tight} tight"),
    );
}
