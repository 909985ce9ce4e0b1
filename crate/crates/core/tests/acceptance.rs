//! End-to-end acceptance checks. Each test prints one `PASS` or `FAIL` line
//! straight to stdout (bypassing libtest capture) and then asserts.

use std::collections::HashSet;
use std::f64::consts::{FRAC_2_SQRT_PI, FRAC_PI_2, PI};
use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use wcs_core::experiments::presets::{preset, Scale};
use wcs_core::experiments::{run_experiment, write_outputs};
use wcs_core::guarantees::{measurement_quantity, prior_support_direct, prior_support_quantities, truncation_bound};
use wcs_core::index_sets::{build_tensor_product, build_total_degree, random_lower_set};
use wcs_core::measurement::draw_samples;
use wcs_core::poly_basis::{eval_univariate, intrinsic_weight};
use wcs_core::reconstruction::oracle_coefficients;
use wcs_core::weights::{intrinsic_weights, weights_from_strategy};
use wcs_core::*;

fn report(name: &str, pass: bool, detail: String) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{verdict} {name}: {detail}");
    pass
}

/// Orthonormal Chebyshev polynomial via the trigonometric form.
fn cheb(k: u32, t: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        2f64.sqrt() * (k as f64 * t.acos()).cos()
    }
}

/// Orthonormal Legendre polynomial via Bonnet's recurrence.
fn leg(k: u32, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if k == 0 {
        return 1.0;
    }
    for n in 1..k {
        let n = n as f64;
        let p2 = ((2.0 * n + 1.0) * t * p1 - n * p0) / (n + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (2.0 * k as f64 + 1.0).sqrt() * p1
}

fn planted(rng: &mut ChaCha20Rng, n: usize, s: usize, within: usize) -> Vec<f64> {
    let mut c = vec![0.0; n];
    let mut placed = 0;
    while placed < s {
        let j = rng.random_range(0..within);
        if c[j] == 0.0 {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            c[j] = sign * rng.random_range(0.5..1.5);
            placed += 1;
        }
    }
    c
}

#[test]
fn oracle_equivalence() {
    let start = Instant::now();
    let (m, n) = (10, 30);
    let mut worst = 0.0f64;
    let mut converged = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal) / (m as f64).sqrt());
        let x = DVector::from_vec(planted(&mut rng, n, 3, n));
        let y = &a * &x;
        let w = WeightVector::custom((0..n).map(|_| rng.random_range(0.5..4.0)).collect()).unwrap();
        let fo = solve_weighted_bpdn(&a, &y, &w, 0.0, &SolverOptions::default()).unwrap();
        let lp = solve_lp_oracle(&a, &y, &w).unwrap();
        converged += fo.converged as usize;
        worst = worst.max((fo.objective - lp.objective).abs() / lp.objective);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-6 && secs < 60.0;
    let detail =
        format!("worst relative objective gap {worst:.1e} over 100 instances, {converged}/100 converged, {secs:.1}s");
    assert!(report("oracle_equivalence", pass, detail));
}

#[test]
fn interpolation_property() {
    let spec = BasisSpec::new(Scenario::CC, 1).unwrap();
    let set = build_tensor_product(1, 500).unwrap();
    let f = |t: f64| (1.0 + 3.0 * t) / (1.0 + 50.0 * t * t);
    let mut ok = 0;
    let mut worst = 0.0f64;
    for trial in 0..50u64 {
        let samples = draw_samples(&spec, 80, 7000 + trial).unwrap();
        let system = MeasurementSystem::build(samples, set.clone(), |t| f(t[0]), 0.0, NoiseModel::Sphere, 0).unwrap();
        let r = solve_weighted_bpdn(
            system.matrix(),
            system.data(),
            &WeightVector::unit(set.len()),
            0.0,
            &SolverOptions::default(),
        )
        .unwrap();
        let defect = system
            .samples()
            .points()
            .iter()
            .map(|p| {
                let t = p.coords()[0];
                let approx: f64 = r.coefficients.iter().enumerate().map(|(k, c)| c * cheb(k as u32, t)).sum();
                (approx - f(t)).abs()
            })
            .fold(0.0, f64::max);
        worst = worst.max(defect);
        ok += (defect <= 1e-6) as usize;
    }
    let detail = format!("{ok}/50 trials with defect <= 1e-6, worst {worst:.1e}");
    assert!(report("interpolation_property", ok >= 48, detail));
}

#[test]
fn sparse_recovery_scaling() {
    let spec = BasisSpec::new(Scenario::CC, 1).unwrap();
    let set = build_tensor_product(1, 200).unwrap();
    let unit = WeightVector::unit(set.len());
    let successes = |m: usize| -> usize {
        (0..50u64)
            .filter(|&trial| {
                let mut rng = ChaCha20Rng::seed_from_u64(1000 + trial);
                let c = planted(&mut rng, set.len(), 5, set.len());
                let f = TargetFunction::expansion("planted", spec, set.clone(), c.clone()).unwrap();
                let samples = draw_samples(&spec, m, trial).unwrap();
                let system =
                    MeasurementSystem::build(samples, set.clone(), f.as_fn(), 0.0, NoiseModel::Sphere, 0).unwrap();
                let r =
                    solve_weighted_bpdn(system.matrix(), system.data(), &unit, 0.0, &SolverOptions::default()).unwrap();
                let err: f64 = r.coefficients.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                err < 1e-5
            })
            .count()
    };
    let (hi, lo) = (successes(60), successes(12));
    let detail = format!("m=60 recovered {hi}/50, m=12 recovered {lo}/50");
    assert!(report("sparse_recovery_scaling", hi >= 45 && lo <= 20, detail));
}

#[test]
fn weighted_ordering() {
    let config = preset("fig1_cc", Scale::Fast).unwrap();
    let out = run_experiment(&config).unwrap();
    let at = |m: usize, alpha: f64| {
        out.summary.iter().find(|s| s.m == m && s.alpha == Some(alpha)).expect("summary row").geomean_linf_error
    };
    let last = *config.m_values.last().unwrap();
    let mut pass = at(last, 2.0) < at(last, 0.0);
    let mut parts = Vec::new();
    for &m in &config.m_values {
        let (e0, e2) = (at(m, 0.0), at(m, 2.0));
        pass &= e2 <= 1.5 * e0;
        parts.push(format!("m={m} {e2:.2e}/{e0:.2e}"));
    }
    let detail = format!("alpha=2 vs alpha=0 geomean Linf: {}", parts.join(", "));
    assert!(report("weighted_ordering", pass, detail));
}

#[test]
fn lower_set_bounds() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let mut violations = 0;
    let mut mismatches = 0;
    for _ in 0..500 {
        let d = rng.random_range(1..=4usize);
        let s = rng.random_range(1..=30usize);
        let set = random_lower_set(d, s, rng.random()).unwrap();
        let members: HashSet<Vec<u32>> = set.iter().map(|i| i.entries().to_vec()).collect();
        let lower = members.iter().all(|i| {
            (0..d).filter(|&j| i[j] > 0).all(|j| {
                let mut down = i.clone();
                down[j] -= 1;
                members.contains(&down)
            })
        });
        assert!(lower && members.len() == s);
        let sf = s as f64;
        let nnz = |i: &Vec<u32>| i.iter().filter(|&&k| k > 0).count() as i32;
        let cc: f64 = members.iter().map(|i| 2f64.powi(nnz(i))).sum();
        let lu: f64 = members.iter().map(|i| i.iter().map(|&k| 2.0 * k as f64 + 1.0).product::<f64>()).sum();
        let kd: f64 = members.iter().map(|i| (4.0 / PI).powi(nnz(i))).sum();
        violations += (cc > sf.powf(3f64.ln() / 2f64.ln())) as usize;
        violations += (lu > sf * sf) as usize;
        violations += (kd > sf.powf((1.0 + 4.0 / PI).ln() / 2f64.ln())) as usize;
        // the library's |Delta|_u must agree with the independent sums
        for (scenario, expected) in
            [(Scenario::CC, cc), (Scenario::LU, lu), (Scenario::LC, FRAC_PI_2.powi(d as i32) * kd)]
        {
            let u = intrinsic_weights(&set, &BasisSpec::new(scenario, d).unwrap()).unwrap();
            let card: f64 = u.values().iter().map(|v| v * v).sum();
            mismatches += ((card - expected).abs() > 1e-9 * expected) as usize;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = violations == 0 && mismatches == 0 && secs < 30.0;
    let detail =
        format!("500 lower sets, {violations} bound violations, {mismatches} |Delta|_u mismatches, {secs:.1}s");
    assert!(report("lower_set_bounds", pass, detail));
}

#[test]
fn prior_support_formula() {
    let full = build_total_degree(2, 7).unwrap();
    let n = full.len();
    let mut rng = ChaCha20Rng::seed_from_u64(404);
    let pick = |rng: &mut ChaCha20Rng, count: usize| -> Vec<usize> {
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.len() < count {
            let j = rng.random_range(0..n);
            if !chosen.contains(&j) {
                chosen.push(j);
            }
        }
        chosen
    };
    let (mut cases, mut worst, mut predicate_failures) = (0, 0.0f64, 0);
    while cases < 100 {
        let (s_len, g_len) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let delta_pos = pick(&mut rng, s_len);
        let gamma_pos = pick(&mut rng, g_len);
        let gamma: f64 = rng.random_range(0.05..0.95);
        let (s, g) = (delta_pos.len() as f64, gamma_pos.len() as f64);
        let overlap = delta_pos.iter().filter(|j| gamma_pos.contains(j)).count() as f64;
        // |Delta u Gamma|_w with w^2 = gamma on Gamma
        if (s - overlap) + gamma * g < 1.0 {
            continue;
        }
        cases += 1;
        let as_set = |pos: &[usize]| IndexSet::from_indices(2, pos.iter().map(|&j| full.indices()[j].clone())).unwrap();
        let (delta, gamma_set) = (as_set(&delta_pos), as_set(&gamma_pos));
        let union = delta.union(&gamma_set).unwrap();
        let w: Vec<f64> = full.iter().map(|i| if gamma_set.contains(i) { gamma.sqrt() } else { 1.0 }).collect();
        let direct =
            measurement_quantity(&union, &full, &WeightVector::unit(n), &WeightVector::custom(w).unwrap()).unwrap();
        let unweighted = measurement_quantity(&delta, &full, &WeightVector::unit(n), &WeightVector::unit(n)).unwrap();
        let (rho, sigma) = (overlap / g, g / s);
        let closed = (2.0 + sigma * (1.0 + gamma - 2.0 * rho)) * s;
        let r = prior_support_quantities(&delta, &gamma_set, gamma).unwrap();
        let via_helper = prior_support_direct(&delta, &gamma_set, gamma).unwrap();
        for v in [direct, r.m_weighted, via_helper] {
            worst = worst.max((v - closed).abs());
        }
        worst = worst.max((unweighted - 2.0 * s).abs()).max((r.m_unweighted - 2.0 * s).abs());
        let expected = rho > (1.0 + gamma) / 2.0;
        predicate_failures += (r.weighted_is_smaller != expected || (direct < unweighted) != expected) as usize;
    }
    let pass = worst <= 1e-12 && predicate_failures == 0;
    let detail = format!("100 triples, worst |closed - direct| {worst:.1e}, {predicate_failures} predicate failures");
    assert!(report("prior_support_formula", pass, detail));
}

#[test]
fn intrinsic_weight_formulas() {
    // 840 = lcm(1..=8), so every Chebyshev extremum up to degree 8 is a node
    let nodes: Vec<f64> = (1..100_800).map(|j| (PI * j as f64 / 100_800.0).cos()).collect();
    let grid_max = |f: &dyn Fn(f64) -> f64| nodes.iter().map(|&t| f(t).abs()).fold(0.0, f64::max);
    let cheb_max: Vec<f64> = (0..=8).map(|k| grid_max(&|t| cheb(k, t))).collect();
    let leg_max: Vec<f64> = (0..=8).map(|k| grid_max(&|t| leg(k, t))).collect();
    let mut worst = 0.0f64;
    for d in 1..=3usize {
        for idx in build_tensor_product(d, 8).unwrap().iter() {
            let e = idx.entries();
            // |phi_i| is a product of univariate factors, so its sup is the product of sups
            let grid_cc: f64 = e.iter().map(|&k| cheb_max[k as usize]).product();
            let grid_lu: f64 = e.iter().map(|&k| leg_max[k as usize]).product();
            let nnz = e.iter().filter(|&&k| k > 0).count() as f64;
            let formula_cc = 2f64.powf(nnz / 2.0);
            let formula_lu: f64 = e.iter().map(|&k| (2.0 * k as f64 + 1.0).sqrt()).product();
            let lib_cc = intrinsic_weight(&BasisSpec::new(Scenario::CC, d).unwrap(), idx).unwrap();
            let lib_lu = intrinsic_weight(&BasisSpec::new(Scenario::LU, d).unwrap(), idx).unwrap();
            for (a, b) in [(grid_cc, formula_cc), (grid_lu, formula_lu), (lib_cc, formula_cc), (lib_lu, formula_lu)] {
                worst = worst.max((a / b - 1.0).abs());
            }
        }
    }
    let bound = FRAC_2_SQRT_PI;
    let uniform: Vec<f64> = (0..100_000).map(|j| -1.0 + 2.0 * (j as f64 + 0.5) / 100_000.0).collect();
    let mut envelope = 0.0f64;
    for k in 0..=50u32 {
        for &t in &uniform {
            let lib = eval_univariate(Family::Legendre, k as usize, t).unwrap();
            assert!((lib - leg(k, t)).abs() <= 1e-9 * (1.0 + lib.abs()));
            envelope = envelope.max((1.0 - t * t).powf(0.25) * leg(k, t).abs());
        }
    }
    let pass = worst <= 1e-3 && envelope < bound;
    let detail =
        format!("worst relative gap {worst:.1e} for |i|_inf <= 8, d <= 3; LC envelope max {envelope:.6} < {bound:.6}");
    assert!(report("intrinsic_weight_formulas", pass, detail));
}

#[test]
fn truncation_bound_machinery() {
    let spec = BasisSpec::new(Scenario::CC, 1).unwrap();
    let strategy = WeightStrategy::PolynomialGrowth { alpha: 1.0 };
    let opts = SolverOptions::default();
    let k200 = build_tensor_product(1, 200).unwrap();
    let wide = build_tensor_product(1, 400).unwrap();
    let w200 = weights_from_strategy(&strategy, &k200, &spec).unwrap();
    let w_wide = weights_from_strategy(&strategy, &wide, &spec).unwrap();
    let mut ranks_ok = true;
    let mut worst_excess = f64::NEG_INFINITY;
    for seed in 0..50u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(500 + seed);
        let x = planted(&mut rng, wide.len(), 5, 20);
        let f = TargetFunction::expansion("planted", spec, wide.clone(), x.clone()).unwrap();
        let samples = draw_samples(&spec, 50, seed).unwrap();
        let truncated =
            MeasurementSystem::build(samples.clone(), k200.clone(), f.as_fn(), 0.0, NoiseModel::Sphere, 0).unwrap();
        let untruncated =
            MeasurementSystem::build(samples, wide.clone(), f.as_fn(), 0.0, NoiseModel::Sphere, 0).unwrap();
        let t = truncation_bound(&truncated, &w200, None).unwrap();
        ranks_ok &= t.rank_r == 50 && t.sigma_r > 0.0;
        let xk = solve_weighted_bpdn(truncated.matrix(), truncated.data(), &w200, 0.0, &opts).unwrap();
        let xu = solve_weighted_bpdn(untruncated.matrix(), untruncated.data(), &w_wide, 0.0, &opts).unwrap();
        let err = |z: &[f64]| -> f64 {
            (0..wide.len()).map(|i| w_wide.values()[i] * (x[i] - z.get(i).copied().unwrap_or(0.0)).abs()).sum()
        };
        let tolerance = opts.obj_tol * (1.0 + w_wide.weighted_l1(&x));
        worst_excess = worst_excess.max(err(&xk.coefficients) - err(&xu.coefficients) - tolerance);
    }

    // nonzero tail: (1 + ||P_K w|| / sigma_r) ||x - P_K x||_{1,w} shrinks with K
    let f = TargetFunction::new("runge", 1, |t| (1.0 + 3.0 * t[0]) / (1.0 + 50.0 * t[0] * t[0]));
    let far = build_tensor_product(1, 1000).unwrap();
    let x_far = oracle_coefficients(&f, &spec, &far, None).unwrap();
    let w_far = weights_from_strategy(&strategy, &far, &spec).unwrap();
    let mut terms = Vec::new();
    for k in [50u32, 100, 200] {
        let set = build_tensor_product(1, k).unwrap();
        let w = weights_from_strategy(&strategy, &set, &spec).unwrap();
        let tail: f64 = (set.len()..far.len()).map(|i| w_far.values()[i] * x_far[i].abs()).sum();
        let mut log_sum = 0.0;
        for seed in 0..10u64 {
            let samples = draw_samples(&spec, 50, 900 + seed).unwrap();
            let system = MeasurementSystem::build(samples, set.clone(), f.as_fn(), 0.0, NoiseModel::Sphere, 0).unwrap();
            log_sum += (truncation_bound(&system, &w, None).unwrap().bound_factor * tail).ln();
        }
        terms.push((log_sum / 10.0).exp());
    }
    let decreasing = terms.windows(2).all(|p| p[1] < p[0]);
    let pass = ranks_ok && worst_excess <= 0.0 && decreasing;
    let detail = format!(
        "rank 50 and sigma_r > 0 in all 50 seeds: {ranks_ok}; worst excess over tolerance {worst_excess:.1e}; \
         tail term for K = 50, 100, 200: {:.2e}, {:.2e}, {:.2e}",
        terms[0], terms[1], terms[2]
    );
    assert!(report("truncation_bound_machinery", pass, detail));
}

#[test]
fn gram_concentration() {
    let spec = BasisSpec::new(Scenario::CC, 1).unwrap();
    let (m, s) = (2000usize, 10usize);
    let mut ok = 0;
    let mut worst = 0.0f64;
    for trial in 0..50u64 {
        let samples = draw_samples(&spec, m, 3000 + trial).unwrap();
        // CC rows carry no density rescaling
        let a = DMatrix::from_fn(m, s, |r, k| cheb(k as u32, samples.points()[r].coords()[0]) / (m as f64).sqrt());
        let g = a.transpose() * &a - DMatrix::<f64>::identity(s, s);
        let dev = g.symmetric_eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
        ok += (dev < 0.25) as usize;
    }
    let detail = format!("{ok}/50 trials with ||A_D^T A_D - I|| < 0.25, worst {worst:.3}");
    assert!(report("gram_concentration", ok * 100 >= 95 * 50, detail));
}

#[test]
fn determinism() {
    let config = preset("fig2_lc_d4_degree", Scale::Fast).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for run in ["first", "second"] {
        let out = run_experiment(&config).unwrap();
        let path = dir.path().join(run);
        write_outputs(&path, &config, &out).unwrap();
        files.push(std::fs::read(path.join("results.csv")).unwrap());
    }
    let pass = files[0] == files[1] && !files[0].is_empty();
    let detail = format!("{} results.csv identical across two runs ({} bytes)", config.name.unwrap(), files[0].len());
    assert!(report("determinism", pass, detail));
}
