//! Acceptance suite. Runs every criterion in sequence (wall-clock limits are
//! part of the criteria) and prints one PASS/FAIL line per criterion.

use std::f64::consts::LN_2;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use inducing_entropy::counterexample::{
    build_counterexample_scheme, jacobian_side, lemma61_report, CounterexampleParams,
};
use inducing_entropy::dynamics::IntervalPartition;
use inducing_entropy::entropy::{
    block_entropy, entropy_formula_report, finiteness_criterion, lyapunov_birkhoff, rohlin_entropy_ulam,
    FormulaConfig, Verdict,
};
use inducing_entropy::inducing::{build_lsv_scheme, trivial_scheme};
use inducing_entropy::maps1d::{doubling_map, lorenz_like_map, lsv_map, singular_intermittent_map, PiecewiseMap1D};
use inducing_entropy::skew2d::{
    injectivity_check, quotient_conjugacy_residual, slots_disjoint, unstable_integral_report, SkewIntegralConfig,
    SkewSystem,
};
use inducing_entropy::tower::{
    base_invariant_measure, log_jacobian_two_sides, pushforward_measure, tower_invariant_measure, BaseMethod, Tower,
};
use inducing_entropy::ulam::{ulam_matrix_map, Grid};

const SEED: u64 = 1;

/// One checked quantity inside a criterion.
struct Check {
    label: String,
    ok: bool,
    detail: String,
}

fn check(label: impl Into<String>, ok: bool, detail: impl Into<String>) -> Check {
    Check { label: label.into(), ok, detail: detail.into() }
}

type Criterion = fn() -> Vec<Check>;

fn main() {
    let criteria: [(&str, Duration, Criterion); 8] = [
        ("doubling-map exactness", Duration::from_secs(10), doubling),
        ("cross-estimator agreement", Duration::from_secs(3 * 300), cross_estimator),
        ("partial sums of the counterexample sequence", Duration::from_secs(60), partial_sums),
        ("formula failure with a finite Jacobian integral", Duration::from_secs(120), formula_failure),
        ("measure machinery identities", Duration::from_secs(300), measure_machinery),
        ("Lebesgue invariance of the singular map", Duration::from_secs(300), lebesgue_invariance),
        ("skew-system structure", Duration::from_secs(300), skew_structure),
        ("Gibbs distortion", Duration::from_secs(60), distortion),
    ];
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let checks = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(c) => c,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                vec![check("run", false, format!("panicked: {msg}"))]
            }
        };
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let ok = in_time && checks.iter().all(|c| c.ok);
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {}: {} - {} ({:.1} s, limit {} s)",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            name,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        for c in &checks {
            println!("    [{}] {}: {}", if c.ok { "ok" } else { "FAIL" }, c.label, c.detail);
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn doubling() -> Vec<Check> {
    let map = doubling_map();
    let scheme = trivial_scheme(&map).unwrap();
    let rohlin = rohlin_entropy_ulam(&scheme, 4096).unwrap().value.unwrap();
    let birkhoff = lyapunov_birkhoff(&map, 64, 1_000_000, 10_000, SEED).unwrap().value.unwrap();
    let partition = IntervalPartition::from_map(&map);
    let blocks = block_entropy(&map, &partition, 12, 16, 1_000_000, SEED + 1).unwrap();
    let mut checks = vec![
        check("rohlin = log 2", (rohlin - LN_2).abs() <= 1e-12, format!("error {:.2e}", (rohlin - LN_2).abs())),
        check(
            "birkhoff = log 2",
            (birkhoff - LN_2).abs() <= 1e-3,
            format!("error {:.2e}", (birkhoff - LN_2).abs()),
        ),
    ];
    let worst = blocks
        .rows
        .iter()
        .map(|r| ((r.h_over_n - LN_2).abs() / r.std_error, r.n))
        .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let all_in = blocks.rows.iter().all(|r| (r.h_over_n - LN_2).abs() <= 2.0 * r.std_error);
    checks.push(check(
        "H_n/n = log 2 within 2 sigma, n <= 12",
        all_in && blocks.rows.len() == 12,
        format!("largest deviation {:.2} sigma at n = {}", worst.0, worst.1),
    ));
    checks
}

fn cross_estimator() -> Vec<Check> {
    let config = FormulaConfig { block_n: 0, seed: SEED, ..FormulaConfig::default() };
    let cases: Vec<(String, PiecewiseMap1D, inducing_entropy::inducing::InducingScheme)> = vec![
        {
            let m = lorenz_like_map(0.25).unwrap();
            let s = trivial_scheme(&m).unwrap();
            ("lorenz alpha=0.25".into(), m, s)
        },
        ("lsv alpha=0.3".into(), lsv_map(0.3).unwrap(), build_lsv_scheme(0.3, 400).unwrap()),
        ("lsv alpha=0.5".into(), lsv_map(0.5).unwrap(), build_lsv_scheme(0.5, 400).unwrap()),
    ];
    let mut checks = Vec::new();
    for (name, map, scheme) in cases {
        let start = Instant::now();
        let r = entropy_formula_report::<_, IntervalPartition>(&name, &map, &scheme, None, &config).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let rohlin = &r.rohlin;
        let birkhoff = r.birkhoff.as_ref().unwrap();
        let cmp = r.comparison.as_ref().unwrap();
        let se_ok = birkhoff.std_error < 0.01 * birkhoff.value.unwrap().abs()
            && rohlin.std_error < 0.01 * rohlin.value.unwrap().abs();
        checks.push(check(
            name,
            r.verdict == "pass" && se_ok && secs < 300.0,
            format!(
                "rohlin {:.6} (trunc {:.1e}), birkhoff {:.6} +- {:.1e}, |diff| {:.1e} <= {:.1e}, {:.0} s",
                rohlin.value.unwrap(),
                rohlin.truncation_bound,
                birkhoff.value.unwrap(),
                birkhoff.std_error,
                cmp.difference,
                cmp.allowed,
                secs
            ),
        ));
    }
    checks
}

fn partial_sums() -> Vec<Check> {
    let doublings: Vec<u64> = (0..=10).rev().map(|k| 1_000_000u64 >> k).collect();
    let d = lemma61_report(&doublings).unwrap();
    let in_bracket = d.rows.iter().all(|r| r.sum_phi >= r.phi_bracket[0] && r.sum_phi <= r.phi_bracket[1]);
    let worst_ratio = d
        .rows
        .windows(2)
        .map(|w| (w[1].sum_n_a - w[0].sum_n_a) / w[0].tail_n_a)
        .fold(0.0, f64::max);
    let decades = lemma61_report(&[1_000, 10_000, 100_000, 1_000_000]).unwrap();
    let first = &decades.rows[0];
    let last = decades.rows.last().unwrap();
    let increment = last.sum_n_phi - first.sum_n_phi;
    let predicted = ((1e6f64).ln() / (1e3f64).ln()).ln();
    let rel = (increment - predicted).abs() / predicted;
    vec![
        check("sum phi(a_n) inside its integral-test bracket", in_bracket, format!("{} levels", d.rows.len())),
        check(
            "sum n a_n increments under the 1/log N tail bound",
            worst_ratio <= 1.0,
            format!("largest increment/bound {worst_ratio:.3}"),
        ),
        check(
            "sum n phi(a_n) from 1e3 to 1e6 = log 2 within 15%",
            rel <= 0.15,
            format!("increment {increment:.4} vs {predicted:.4} ({:.1}%)", 100.0 * rel),
        ),
        check(
            "verdicts (conv, conv, conv, div)",
            decades.matches_expected(),
            decades.verdicts.iter().map(|v| v.verdict.as_str()).collect::<Vec<_>>().join(", "),
        ),
    ]
}

fn three_figures(values: &[f64]) -> bool {
    let round = |v: f64| format!("{v:.2e}");
    values.windows(2).all(|w| round(w[0]) == round(w[1]))
}

fn formula_failure() -> Vec<Check> {
    let mut checks = Vec::new();
    let mut scheme_values = Vec::new();
    let mut skew_values = Vec::new();
    for &n in &[10_000u64, 100_000, 1_000_000] {
        let p = CounterexampleParams::new(n).unwrap();
        let scheme = build_counterexample_scheme(&p).unwrap();
        let f = finiteness_criterion(&scheme);
        let side = jacobian_side(&p);
        scheme_values.push(side.value);
        checks.push(check(
            format!("scheme, n_max = {n}"),
            f.verdict == Verdict::Divergent && side.upper.is_finite(),
            format!("criterion {:?}, Jacobian side {:.6} in [{:.6}, {:.6}]", f.verdict, side.value, side.lower, side.upper),
        ));
        let sys = SkewSystem::new(&p, 0.5).unwrap();
        let ic = SkewIntegralConfig { n_orbits: 16, n_iters: 200_000, burn_in: 1_000, seed: SEED };
        let u = unstable_integral_report(&sys, &p, &ic).unwrap();
        skew_values.push(u.jacobian_side.value);
        checks.push(check(
            format!("skew system, n_max = {n}"),
            u.entropy.verdict == Verdict::Divergent && u.jacobian_side.upper.is_finite(),
            format!(
                "criterion {:?}, unstable integral {:.6}, birkhoff {:.4} +- {:.1e}",
                u.entropy.verdict,
                u.jacobian_side.value,
                u.birkhoff.value.unwrap(),
                u.birkhoff.std_error
            ),
        ));
    }
    checks.push(check(
        "Jacobian side stable to 3 significant figures",
        three_figures(&scheme_values) && three_figures(&skew_values),
        format!("{scheme_values:.6?}"),
    ));
    checks
}

fn measure_machinery() -> Vec<Check> {
    let mut checks = Vec::new();

    // level masses against the sequence itself, uniform base measure
    let p = CounterexampleParams::new(100_000).unwrap();
    let tower = Tower::new(build_counterexample_scheme(&p).unwrap());
    let nu0 = base_invariant_measure(tower.scheme(), BaseMethod::ExactLinear).unwrap();
    let nu = tower_invariant_measure(&tower, &nu0).unwrap();
    let total_a = p.partial_sum(p.n_max, |_, a| a);
    let rho = p.partial_sum(p.n_max, |n, a| n as f64 * a) / total_a;
    // suffix[l] = Σ_{n > l} a_n, summed from the top
    let mut suffix = vec![0.0; p.n_max as usize + 1];
    for n in (2..=p.n_max).rev() {
        suffix[n as usize - 1] = suffix[n as usize] + p.a(n);
    }
    suffix[0] = suffix[1];
    let mut worst: f64 = 0.0;
    for (l, &m) in nu.level_masses.iter().enumerate() {
        worst = worst.max((m - suffix[l] / total_a / rho).abs());
    }
    checks.push(check(
        "level masses nu0(R > l)/rho (sequence scheme)",
        worst <= 1e-8 && (nu.rho - rho).abs() <= 1e-8 * rho,
        format!("worst {worst:.1e}, rho {:.6}", nu.rho),
    ));

    // LSV alpha = 0.5 tower with a Ulam base measure
    let scheme = build_lsv_scheme(0.5, 200).unwrap();
    let tower = Tower::new(scheme);
    let nu0 = base_invariant_measure(tower.scheme(), BaseMethod::Ulam { bins: 4096 }).unwrap();
    let nu = tower_invariant_measure(&tower, &nu0).unwrap();
    let mut worst: f64 = 0.0;
    for (l, &m) in nu.level_masses.iter().enumerate() {
        let above: f64 = tower
            .scheme()
            .cells()
            .iter()
            .zip(&nu.cell_masses)
            .filter(|(c, _)| c.return_time as usize > l)
            .map(|(_, &w)| w)
            .sum();
        worst = worst.max((m - above / nu.rho_by_return_time).abs());
    }
    checks.push(check("level masses nu0(R > l)/rho (LSV)", worst <= 1e-8, format!("worst {worst:.1e}")));

    let (residual, skipped) = tower.max_semiconjugacy_residual(100_000, SEED).unwrap();
    checks.push(check(
        "semiconjugacy f(pi) - pi(T) on 1e5 states",
        residual < 1e-9,
        format!("worst {residual:.1e}, {skipped} skipped"),
    ));

    let (left, right) = log_jacobian_two_sides(&tower, &nu0, &nu).unwrap();
    checks.push(check(
        "tower Jacobian integral two ways",
        (left - right).abs() <= 1e-8,
        format!("{left:.10} vs {right:.10}"),
    ));

    let grid = Grid::new(0.0, 1.0, 1024).unwrap();
    let mu = pushforward_measure(&tower, &nu0, &nu, grid).unwrap();
    let moved = ulam_matrix_map(&lsv_map(0.5).unwrap(), 1024).unwrap().apply(&mu.mass);
    let l1 = mu.l1_distance(&moved);
    checks.push(check("transfer-operator residual of mu (L1, 1024 bins)", l1 < 1e-2, format!("{l1:.2e}")));
    checks
}

/// `∫_0^1 log f'` on dyadic panels, split at the C¹ point `2^-γ`.
fn quadrature_of_log_derivative(map: &PiecewiseMap1D) -> f64 {
    let mut acc = 0.0;
    let mut hi = 1.0f64;
    // [0, 2^-35] holds less than 1e-9 of the integral and reaches into
    // the singular clearance
    for _ in 0..35 {
        let lo = 0.5 * hi;
        acc += inducing_entropy::quad::gauss_legendre_composite(|x| map.eval(x).unwrap().1.ln(), lo, hi, 16);
        hi = lo;
    }
    acc
}

fn lebesgue_invariance() -> Vec<Check> {
    let map = singular_intermittent_map(2.0, 1e-14).unwrap();
    let density = ulam_matrix_map(&map, 1024).unwrap().stationary().unwrap();
    let dev = density.sup_deviation_from_uniform();
    let exact = quadrature_of_log_derivative(&map);
    let b = lyapunov_birkhoff(&map, 64, 1_000_000, 10_000, SEED).unwrap();
    let v = b.value.unwrap();
    vec![
        check("Ulam density uniform within 2%", dev <= 0.02, format!("sup deviation {:.2e}", dev)),
        check(
            "Birkhoff vs quadrature of log f' within 3 sigma",
            (v - exact).abs() <= 3.0 * b.std_error,
            format!("{v:.6} +- {:.1e} vs {exact:.6}", b.std_error),
        ),
    ]
}

fn skew_structure() -> Vec<Check> {
    let p = CounterexampleParams::new(100_000).unwrap();
    let mut checks = Vec::new();
    for &lambda in &[0.25, 0.5] {
        let sys = SkewSystem::new(&p, lambda).unwrap();
        let r = injectivity_check(&sys, 1_000_000, SEED);
        checks.push(check(
            format!("injectivity, lambda = {lambda}"),
            r.verdict == "pass" && r.violations == 0 && r.min_gap_ratio >= 1.0 - 1e-9,
            format!("{} pairs, min gap / minorant {:.6}", r.n_pairs, r.min_gap_ratio),
        ));
        let residual = quotient_conjugacy_residual(&sys, 100_000, SEED).unwrap();
        checks.push(check(format!("quotient conjugacy, lambda = {lambda}"), residual == 0.0, format!("{residual:e}")));
        let cols = sys.resolvable_return_time();
        checks.push(check(
            format!("slot disjointness, lambda = {lambda}"),
            slots_disjoint(&sys, cols),
            format!("columns up to {cols}"),
        ));
    }
    checks
}

fn distortion() -> Vec<Check> {
    let lsv = build_lsv_scheme(0.5, 200).unwrap().check_gibbs_markov(10_000, SEED);
    let mut checks = vec![check(
        "LSV alpha=0.5 fitted C < 1e3 at some beta < 1",
        matches!((lsv.fitted_c, lsv.fitted_beta), (Some(c), Some(b)) if c < 1e3 && b < 1.0),
        format!("C {:?} at beta {:?}, {} unresolved", lsv.fitted_c, lsv.fitted_beta, lsv.unresolved_count),
    )];
    let linear = [
        ("doubling", trivial_scheme(&doubling_map()).unwrap()),
        ("sequence scheme", build_counterexample_scheme(&CounterexampleParams::new(1_000).unwrap()).unwrap()),
    ];
    for (name, s) in linear {
        assert!(s.is_piecewise_linear());
        let r = s.check_gibbs_markov(10_000, SEED);
        checks.push(check(format!("{name}: log-ratio identically 0"), r.max_ratio == 0.0, format!("{:e}", r.max_ratio)));
    }
    checks
}
