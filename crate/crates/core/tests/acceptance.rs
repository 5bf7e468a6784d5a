//! Acceptance criteria, one PASS/FAIL line each. Run with `--nocapture` to
//! see the lines; the test fails if any criterion fails.

use halfsign_core::cusp::{agreement, build_cusp_triple, extract_coeffs, ContourSpec, Cusp, CuspTriple, FormEvaluator};
use halfsign_core::expsums::verify::{verify, VerifyCase, VerifyReport};
use halfsign_core::qforms::{build_desk_form, check_vanishing_propagation, eigencheck, HalfIntegralForm};
use halfsign_core::signs::{
    count_sign_changes, find_n0, kernel_sign_scan, meansq_fit, squarefree_signchange_growth, validate_report,
    window_scan, IndexSet, ProgressionSums,
};
use halfsign_core::voronoi::{mean_value_exponent, mean_value_metric, progression_two_route, residual_decay};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

const IDENTITY_TOL: f64 = 1e-9;
const MIN_TUPLES_A: u64 = 10_000;
const SUITE_BUDGET: Duration = Duration::from_secs(120);
const VORONOI_BUDGET: Duration = Duration::from_secs(300);
const CUSP_TOLERANCE: f64 = 1e-6;
const DECAY_SLOPE: (f64, f64) = (-0.65, -0.35);
const DECAY_CENTRES: [f64; 3] = [1e3, 4e3, 1e4];
const DECAY_WIDTH: usize = 64;
const TWO_ROUTE_TOL: f64 = 1e-9;
const MEAN_VALUE_SLACK: f64 = 0.05;
const MEAN_VALUE_STABILITY: f64 = 0.20;
const MEAN_VALUE_FROM: usize = 100;
const RHO: f64 = 1.0 / 6.0;
const MEANSQ_DRIFT: f64 = 0.10;
const MEANSQ_SLOPE_MAX: f64 = 0.9;
const RANDOM_SEQUENCES: usize = 1000;
const WINDOW_RANGE: (usize, usize) = (1_000, 100_000);
const COUNT_FACTOR: f64 = 0.5;
const GROWTH_SLACK: f64 = 0.1;
const KERNEL_FRACTION: f64 = 0.9;
const KERNEL_T_MIN: f64 = 1.0;
const N_LARGE: usize = 110_000;
const N_FORM_CHECK: usize = 10_000;
const SEED: u64 = 0x5eed;

fn large_form() -> &'static HalfIntegralForm {
    static F: OnceLock<HalfIntegralForm> = OnceLock::new();
    F.get_or_init(|| build_desk_form(N_LARGE).unwrap())
}

fn triple() -> &'static CuspTriple {
    static T: OnceLock<CuspTriple> = OnceLock::new();
    T.get_or_init(|| build_cusp_triple(large_form(), &ContourSpec::default(), CUSP_TOLERANCE).unwrap())
}

struct Line {
    id: u32,
    passed: bool,
    detail: String,
}

fn report(id: u32, passed: bool, detail: String) -> Line {
    println!("{} {id}: {detail}", if passed { "PASS" } else { "FAIL" });
    Line { id, passed, detail }
}

fn run_case(case: VerifyCase) -> VerifyReport {
    verify(case, &case.default_bounds()).unwrap()
}

fn summary(r: &VerifyReport) -> String {
    format!("{} checked={} violations={} max_err={:.2e}", r.case, r.checked, r.violations, r.max_abs_err)
}

fn criterion_1() -> Line {
    let t0 = Instant::now();
    let runs: Vec<VerifyReport> = [VerifyCase::A, VerifyCase::B, VerifyCase::C].into_iter().map(run_case).collect();
    let elapsed = t0.elapsed();
    let restricted = run_case(VerifyCase::CRestricted);
    let ok = runs.iter().all(|r| r.passed() && r.max_abs_err < IDENTITY_TOL)
        && runs[0].checked >= MIN_TUPLES_A
        && elapsed < SUITE_BUDGET;
    let mut detail: Vec<String> = runs.iter().map(summary).collect();
    detail.push(format!("[{}]", summary(&restricted)));
    detail.push(format!("{:.1}s", elapsed.as_secs_f64()));
    report(1, ok, format!("identity suite; {}", detail.join("; ")))
}

fn criterion_2() -> Line {
    let runs: Vec<VerifyReport> = [VerifyCase::D, VerifyCase::E, VerifyCase::Kbound].into_iter().map(run_case).collect();
    let ok = runs.iter().all(|r| r.violations == 0);
    let detail: Vec<String> = runs
        .iter()
        .map(|r| format!("{} max_ratio={:.3}", summary(r), r.max_ratio.unwrap_or(0.0)))
        .collect();
    report(2, ok, format!("Weil/Salié bounds; {}", detail.join("; ")))
}

fn criterion_3() -> Line {
    let r = run_case(VerifyCase::Kform);
    report(3, r.passed() && r.max_abs_err < IDENTITY_TOL, format!("Salié closed form; {}", summary(&r)))
}

fn criterion_4() -> Line {
    let r = run_case(VerifyCase::CbVanishing);
    report(4, r.violations == 0, format!("c_b vanishing; {}", summary(&r)))
}

fn criterion_5() -> Line {
    let form = build_desk_form(N_FORM_CHECK).unwrap();
    let series = form.exact().unwrap();
    let checks: Vec<_> = [3u64, 5, 7].iter().map(|&p| eigencheck(series, form.ell(), p).unwrap()).collect();
    let vanishing = check_vanishing_propagation(series.coeffs(), (N_FORM_CHECK as f64).sqrt() as u64);
    let ok = checks.iter().all(|c| c.passed() && c.max_residual == 0) && vanishing.violations.is_empty();
    let eig: Vec<String> = checks
        .iter()
        .map(|c| format!("p={} omega={:?} residual={}", c.p, c.omega, c.max_residual))
        .collect();
    report(
        5,
        ok,
        format!(
            "desk form N={N_FORM_CHECK}; {}; multiplicativity pairs={} violations={}",
            eig.join(", "),
            vanishing.pairs_checked,
            vanishing.violations.len()
        ),
    )
}

fn criterion_6() -> Line {
    let form = large_form();
    let t = triple();
    let ev = FormEvaluator::new(form, ContourSpec::default().tail_bound).unwrap();
    let x = extract_coeffs(Cusp::F, &ContourSpec::default(), &ev, CUSP_TOLERANCE).unwrap();
    let zeros = vec![0.0; form.n_max() + 1];
    let inv = agreement(&x, form.lambdas(), &zeros, &zeros);
    let h = &t.h_contours;
    let ok = inv.passed && h.passed && h.max_imag_ratio <= 1.0;
    report(
        6,
        ok,
        format!(
            "cusp extraction n<={}; self-inversion ratio={:.3}; h two-contour ratio={:.3}, Im/err={:.3}; h kind={:?}",
            inv.n_max, inv.max_ratio, h.max_ratio, h.max_imag_ratio, t.h.kind
        ),
    )
}

fn criterion_7() -> Line {
    let t = triple();
    let t0 = Instant::now();
    let ms: Vec<usize> = (6..=12).map(|k| 1usize << k).collect();
    let mut slopes = Vec::new();
    let mut slopes_ok = true;
    for &xc in &DECAY_CENTRES {
        let fit = residual_decay(xc, DECAY_WIDTH, &ms, 1, 0, t).unwrap();
        let s = fit.slope.unwrap_or(f64::NAN);
        slopes_ok &= s >= DECAY_SLOPE.0 && s <= DECAY_SLOPE.1;
        slopes.push(format!("x={xc}: slope={s:.3} over M<={}", fit.ms.last().unwrap()));
    }
    let mut routes = 0;
    let mut routes_ok = true;
    let mut worst: f64 = 0.0;
    for q in (1..=45u64).step_by(2) {
        for a in 0..q {
            for x in [1e2, 1e3, 1e4] {
                let r = progression_two_route(x, a, q, &t.f).unwrap();
                routes += 1;
                worst = worst.max(r.discrepancy / r.scale);
                routes_ok &= r.discrepancy < TWO_ROUTE_TOL * r.scale;
            }
        }
    }
    let elapsed = t0.elapsed();
    report(
        7,
        slopes_ok && routes_ok && elapsed < VORONOI_BUDGET,
        format!(
            "Voronoi residual decay d=1, target [{}, {}]; {}; two-route {} cases worst rel={:.1e}; {:.1}s",
            DECAY_SLOPE.0,
            DECAY_SLOPE.1,
            slopes.join(", "),
            routes,
            worst,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Line {
    let e = mean_value_exponent(RHO, MEAN_VALUE_SLACK);
    let f = &triple().f;
    let a = mean_value_metric(f, MEAN_VALUE_FROM, 5_000, e).unwrap();
    let b = mean_value_metric(f, MEAN_VALUE_FROM, 10_000, e).unwrap();
    let drift = (b.max_ratio / a.max_ratio - 1.0).abs();
    report(
        8,
        drift <= MEAN_VALUE_STABILITY,
        format!(
            "partial-sum growth exponent {e:.4} from x={MEAN_VALUE_FROM}; max ratio {:.4} (at {}) for X=5000, {:.4} (at {}) for X=10000; drift {:.1}%",
            a.max_ratio,
            a.argmax,
            b.max_ratio,
            b.argmax,
            100.0 * drift
        ),
    )
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<usize> {
    (0..points)
        .map(|i| (lo * (hi / lo).powf(i as f64 / (points - 1) as f64)).round() as usize)
        .collect()
}

fn criterion_9() -> Line {
    let f = &triple().f;
    let small = meansq_fit(f, &log_grid(1e2, 1e4, 25)).unwrap();
    let large = meansq_fit(f, &log_grid(1e2, 1e5, 25)).unwrap();
    let drift = (large.d_fit / small.d_fit - 1.0).abs();
    let slope = large.slope_resid.unwrap_or(f64::NAN);
    let ok = small.d_fit > 0.0 && large.d_fit > 0.0 && drift <= MEANSQ_DRIFT && slope <= MEANSQ_SLOPE_MAX;
    report(
        9,
        ok,
        format!(
            "mean square; D_fit={:.5} (x<=1e4), {:.5} (x<=1e5), drift {:.2}%; residual slope {slope:.3}",
            small.d_fit,
            large.d_fit,
            100.0 * drift
        ),
    )
}

/// Pairs `i < j` of members with opposite signs and only zeros in between.
fn brute_count(values: &[f64], set: &IndexSet) -> Vec<(usize, usize)> {
    let members: Vec<usize> = (1..values.len()).filter(|&n| set.contains(n)).collect();
    let mut out = Vec::new();
    for (a, &i) in members.iter().enumerate() {
        for (b, &j) in members.iter().enumerate().skip(a + 1) {
            if values[i] * values[j] < 0.0 && members[a + 1..b].iter().all(|&k| values[k] == 0.0) {
                out.push((i, j));
            }
        }
    }
    out
}

fn criterion_10() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    for _ in 0..RANDOM_SEQUENCES {
        let len = rng.gen_range(1..=80);
        let mut v = vec![0.0];
        v.extend((0..len).map(|_| [-1.5, -0.25, 0.0, 0.0, 0.5, 2.0][rng.gen_range(0..6)]));
        let q = rng.gen_range(1..=6u64);
        let set = match rng.gen_range(0..3) {
            0 => IndexSet::all(len),
            1 => IndexSet::squarefree(len),
            _ => IndexSet::progression(rng.gen_range(0..q), q, len).unwrap(),
        };
        let r = count_sign_changes(&v, &set, len).unwrap();
        if r.intervals != brute_count(&v, &set) || !validate_report(&v, &r).is_empty() {
            mismatches += 1;
        }
    }
    let values = large_form().lambdas();
    let set = IndexSet::all(values.len() - 1);
    let probe = window_scan(values, &set, WINDOW_RANGE.0, WINDOW_RANGE.1, 0.0).unwrap();
    let (windows_ok, c_star, count, needed) = match probe.c0_star {
        Some(c) => {
            let scan = window_scan(values, &set, WINDOW_RANGE.0, WINDOW_RANGE.1, c).unwrap();
            let total = count_sign_changes(values, &set, WINDOW_RANGE.1).unwrap().count;
            let needed = COUNT_FACTOR * (WINDOW_RANGE.1 as f64).sqrt() / c;
            (scan.failure_count == 0, c, total, needed)
        }
        None => (false, f64::NAN, 0, f64::NAN),
    };
    let grid = log_grid(1e3, 1e5, 12);
    let growth = squarefree_signchange_growth(values, &grid, RHO).unwrap();
    let exponent = growth.exponent.unwrap_or(f64::NAN);
    let target = growth.predicted - GROWTH_SLACK;
    let ok = mismatches == 0 && windows_ok && count as f64 >= needed && exponent >= target;
    report(
        10,
        ok,
        format!(
            "sign changes; {RANDOM_SEQUENCES} random sequences, {mismatches} mismatches; c0*={c_star:.4} (worst x={}), count={count} >= {needed:.1}; squarefree exponent {exponent:.3} >= {target:.3}",
            probe.worst_x
        ),
    )
}

fn criterion_11() -> Line {
    let t = triple();
    let n0 = find_n0(1, 0, &t.h, t.ell).unwrap();
    let sums = ProgressionSums::new(0, 1, &t.f).unwrap();
    let scan = kernel_sign_scan(&n0.params, &sums, KERNEL_T_MIN).unwrap();
    let first = scan.rows.first().map_or(f64::NAN, |r| r.t);
    let last = scan.rows.last().map_or(f64::NAN, |r| r.t);
    report(
        11,
        scan.fraction_opposite >= KERNEL_FRACTION && !scan.rows.is_empty(),
        format!(
            "kernel detector n0={} alpha={:.3}; {} of {} t_m in [{first:.3}, {last:.3}] with J+ J- < 0 ({:.1}%)",
            n0.params.n0,
            n0.params.alpha,
            scan.rows.iter().filter(|r| r.opposite).count(),
            scan.rows.len(),
            100.0 * scan.fraction_opposite
        ),
    )
}

#[test]
fn acceptance() {
    let lines = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
    ];
    let failed: Vec<String> = lines
        .iter()
        .filter(|l| !l.passed)
        .map(|l| format!("{}: {}", l.id, l.detail))
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}

/// Mean square of `λ_f` is linear in `x` on `[10³, 10⁵]`.
#[test]
fn mean_square_is_linear() {
    let f = &triple().f;
    let grid = log_grid(1e3, 1e5, 20);
    let fit = meansq_fit(f, &grid).unwrap();
    let xs: Vec<f64> = grid.iter().map(|&x| x as f64).collect();
    let slope = halfsign_core::numeric::loglog_slope(&xs, &fit.sums).unwrap();
    assert!((slope - 1.0).abs() <= 0.05, "slope {slope}");
}

/// Mean square of `λ_h` grows linearly over its whole range.
#[test]
fn mean_square_of_h_is_linear() {
    let h = &triple().h;
    let top = h.n_max();
    let grid = log_grid((top as f64 / 100.0).max(10.0), top as f64, 12);
    let fit = meansq_fit(h, &grid).unwrap();
    let xs: Vec<f64> = grid.iter().map(|&x| x as f64).collect();
    let slope = halfsign_core::numeric::loglog_slope(&xs, &fit.sums).unwrap();
    assert!((slope - 1.0).abs() <= 0.1, "slope {slope}");
}
