//! Property tests for the map zoo, inducing schemes, towers, the sequence
//! scheme and the skew system.

use std::f64::consts::LN_2;

use proptest::prelude::*;

use inducing_entropy::counterexample::{
    build_counterexample_scheme, phi, phi_inverse, CounterexampleParams,
};
use inducing_entropy::dynamics::IntervalPartition;
use inducing_entropy::entropy::block_entropy;
use inducing_entropy::inducing::{build_lsv_scheme, TailWeight};
use inducing_entropy::maps1d::{
    doubling_map, lorenz_like_map, lsv_map, singular_intermittent_map, PiecewiseMap1D, DEFAULT_IMPLICIT_TOL,
};
use inducing_entropy::skew2d::{slots_disjoint, SkewSystem};
use inducing_entropy::tower::{
    base_invariant_measure, log_jacobian_two_sides, pushforward_measure, tower_invariant_measure, BaseMethod,
    MeasureKind, Tower,
};
use inducing_entropy::ulam::{ulam_matrix_scheme, Grid};

fn zoo() -> Vec<PiecewiseMap1D> {
    vec![
        doubling_map(),
        lsv_map(0.3).unwrap(),
        lsv_map(0.7).unwrap(),
        lorenz_like_map(0.25).unwrap(),
        lorenz_like_map(0.45).unwrap(),
        singular_intermittent_map(2.0, DEFAULT_IMPLICIT_TOL).unwrap(),
        singular_intermittent_map(1.5, DEFAULT_IMPLICIT_TOL).unwrap(),
    ]
}

/// Point of the phase space at relative position `u`.
fn at(map: &PiecewiseMap1D, u: f64) -> f64 {
    let (lo, hi) = map.phase_space().bounds();
    lo + (hi - lo) * u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn images_stay_in_phase_space(k in 0usize..7, u in 0.0f64..1.0) {
        let map = &zoo()[k];
        let (lo, hi) = map.phase_space().bounds();
        if let Ok((v, d)) = map.eval(at(map, u)) {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{} maps to {v}", map.name);
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn derivative_matches_central_difference(k in 0usize..7, u in 0.0f64..1.0) {
        let map = &zoo()[k];
        let x = at(map, u);
        let h = 1e-7;
        // away from branch ends, where the curvature of the intermittent and
        // singular branches blows up, and from the C¹-only knee of the implicit map
        let near_edge = map.branches().iter().any(|b| (x - b.lo).abs() < 1e-3 || (x - b.hi).abs() < 1e-3);
        let knee = if k >= 5 { 2f64.powf(-[2.0, 1.5][k - 5]) } else { f64::NAN };
        prop_assume!(!near_edge && (knee.is_nan() || (x.abs() - knee).abs() >= 1e-6));
        let (_, d) = map.eval(x).unwrap();
        let (fp, _) = map.eval(x + h).unwrap();
        let (fm, _) = map.eval(x - h).unwrap();
        let fd = ((fp - fm) / (2.0 * h)).abs();
        prop_assert!((fd - d).abs() <= 1e-6 * d.max(1.0) + 1e-6, "{}: x {x}, f' {d}, fd {fd}", map.name);
    }

    #[test]
    fn implicit_solve_is_self_consistent(gamma in 1.05f64..4.0, x in 1e-6f64..1.0) {
        let tol = DEFAULT_IMPLICIT_TOL;
        let map = singular_intermittent_map(gamma, tol).unwrap();
        let c = 2f64.powf(-gamma);
        let (f, _) = map.eval(x).unwrap();
        // lower piece gives f in [-1, 0], upper piece f in (0, 1]
        let back = if f <= 0.0 { c * (1.0 + f).powf(gamma) } else { f + c * (1.0 - f).powf(gamma) };
        prop_assert!((x <= c) == (f <= 0.0) || (x - c).abs() < 1e-12);
        prop_assert!((back - x).abs() <= 10.0 * tol.max(f64::EPSILON * x), "gamma {gamma}, x {x}, back {back}");
    }

    #[test]
    fn lsv_branches_are_increasing(alpha in 0.05f64..0.95, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let map = lsv_map(alpha).unwrap();
        let (x, y) = if u < v { (u, v) } else { (v, u) };
        prop_assume!(y - x > 1e-9);
        let same_branch = (x < 0.5) == (y < 0.5);
        if let (Ok((fx, _)), Ok((fy, _))) = (map.eval(x), map.eval(y)) {
            if same_branch {
                prop_assert!(fx < fy);
            }
        }
    }

    #[test]
    fn phi_inverse_round_trip(e in -15.0f64..0.0) {
        let y = 10f64.powf(e).min((-1.0f64).exp());
        let x = phi_inverse(y).unwrap();
        prop_assert!(x > 0.0 && x <= (-1.0f64).exp() + 1e-15);
        prop_assert!((phi(x) - y).abs() <= 1e-14 * y, "y {y}, phi(x) {}", phi(x));
    }

    #[test]
    fn lsv_scheme_bookkeeping(alpha in 0.2f64..0.8, n_max in 20u32..150) {
        let s = build_lsv_scheme(alpha, n_max).unwrap();
        prop_assert!(s.mass_defect() < 1e-10, "mass defect {}", s.mass_defect());
        // endpoint rounding is amplified by the induced Jacobian on the smallest cells
        let j_max = (0..s.cells().len()).map(|i| s.cell_max_log_jacobian(i)).fold(0.0, f64::max).exp();
        let bound = 1e-8f64.max(4.0 * f64::EPSILON * j_max * s.base_len());
        prop_assert!(s.markov_defect() < bound, "markov defect {} > {bound}", s.markov_defect());
    }

    #[test]
    fn chain_rule_on_lsv_scheme(alpha in 0.2f64..0.8, pick in 0.0f64..1.0, t in 0.01f64..0.99) {
        let s = build_lsv_scheme(alpha, 60).unwrap();
        let i = ((s.cells().len() - 1) as f64 * pick) as usize;
        let c = &s.cells()[i];
        let x = c.lo + t * c.len();
        let map = s.map().unwrap();
        let (_, fx, jac) = s.induced(x).unwrap();
        let mut y = x;
        let mut prod = 1.0;
        for _ in 0..c.return_time {
            let (v, d) = map.eval(y).unwrap();
            prod *= d;
            y = v;
        }
        prop_assert!((jac - prod).abs() <= 1e-8 * jac);
        prop_assert!((fx - y).abs() <= 1e-8);
    }

    #[test]
    fn semiconjugacy_on_random_tower_states(alpha in 0.2f64..0.8, seed in 0u64..1000) {
        let t = Tower::new(build_lsv_scheme(alpha, 80).unwrap());
        let (worst, _) = t.max_semiconjugacy_residual(2_000, seed).unwrap();
        prop_assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn skew_slots_are_disjoint(lambda in 0.01f64..=0.5) {
        let p = CounterexampleParams::new(200).unwrap();
        let sys = SkewSystem::new(&p, lambda).unwrap();
        prop_assert!(slots_disjoint(&sys, sys.resolvable_return_time()));
    }

    #[test]
    fn skew_contraction_is_measured(lambda in 0.05f64..=0.5, y in 0.0f64..1.0, z in 0.0f64..1.0, pick in 2u32..30) {
        let p = CounterexampleParams::new(200).unwrap();
        let sys = SkewSystem::new(&p, lambda).unwrap();
        let c = sys.tower().scheme().cells().iter().find(|c| c.return_time == pick).unwrap().clone();
        let x = 0.5 * (c.lo + c.hi);
        let (mut a, mut b) = ((x, 0u32, y), (x, 0u32, z));
        let before = (z - y).abs();
        for _ in 0..pick {
            a = sys.step(a).unwrap();
            b = sys.step(b).unwrap();
        }
        // one full column: λ on each of the pick - 1 climbing steps, λ^pick on the return
        let expected = lambda.powi(2 * pick as i32 - 1) * before;
        prop_assert!(((b.2 - a.2).abs() - expected).abs() <= 4.0 * f64::EPSILON, "{} vs {expected}", (b.2 - a.2).abs());
        prop_assert_eq!(a.0, b.0);
    }
}

#[test]
fn phi_inverse_on_log_grid() {
    let top = (-1.0f64).exp();
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let y = 1e-15 * (top / 1e-15).powf(k as f64 / 999.0);
        let x = phi_inverse(y).unwrap();
        worst = worst.max((phi(x) - y).abs() / y);
    }
    assert!(worst <= 1e-14, "{worst}");
}

#[test]
fn sequence_obeys_its_tail_identity() {
    let p = CounterexampleParams::new(100_000).unwrap();
    for n in 3..=p.n_max {
        let nf = n as f64;
        assert!(nf * p.a(n) <= 1.0 / (nf * nf.ln().powi(2)), "n = {n}");
    }
}

#[test]
fn implicit_map_tends_to_doubling() {
    let m = singular_intermittent_map(1.001, DEFAULT_IMPLICIT_TOL).unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..1000 {
        let x = -1.0 + 2.0 * k as f64 / 1000.0;
        if x.abs() < 1e-9 {
            continue;
        }
        let (f, _) = m.eval(x).unwrap();
        // the γ = 1 limit: slope-2 full branches x -> 2x - 1 on (0, 1], odd extension
        let d = if x > 0.0 { 2.0 * x - 1.0 } else { 2.0 * x + 1.0 };
        let gap = (f - d).abs();
        worst = worst.max(gap);
    }
    assert!(worst < 1e-2, "{worst}");
}

#[test]
fn recurrence_is_integrable() {
    for &alpha in &[0.3, 0.5] {
        let sums: Vec<(u32, f64)> = [100u32, 200, 400]
            .iter()
            .map(|&n| {
                let s = build_lsv_scheme(alpha, n).unwrap();
                (n, s.cells().iter().map(|c| c.return_time as f64 * c.len()).sum())
            })
            .collect();
        for w in sums.windows(2) {
            let s = build_lsv_scheme(alpha, w[0].0).unwrap();
            let bound = s.tail_bound(TailWeight::ReturnTime, w[0].0);
            assert!(w[1].1 - w[0].1 <= bound, "alpha {alpha}: {} > {bound}", w[1].1 - w[0].1);
        }
    }
}

#[test]
fn base_density_and_jacobian_are_comparable() {
    // ν₀(ω) J_F(x) in [1/C₂, C₂] with one C₂ for all cells
    let s = build_lsv_scheme(0.5, 200).unwrap();
    let nu0 = base_invariant_measure(&s, BaseMethod::Ulam { bins: 2048 }).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (i, c) in s.cells().iter().enumerate().step_by(1).take(1000) {
        for t in [0.1, 0.5, 0.9] {
            let x = c.lo + t * c.len();
            let m = match &nu0.kind {
                MeasureKind::Ulam(d) if c.len() < d.grid.width() => d.density_at(x) * c.mass,
                _ => nu0.mass(c.lo, c.hi),
            };
            let v = m * s.cell_log_jacobian(i, x).exp();
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    assert!(lo > 0.0 && hi.is_finite());
    assert!(hi / lo < 100.0, "spread {}", hi / lo);
    assert!(nu0.inf_density().unwrap() > 0.0);
}

#[test]
fn level_occupation_matches_simulation() {
    let t = Tower::new(build_lsv_scheme(0.5, 100).unwrap());
    let nu0 = base_invariant_measure(t.scheme(), BaseMethod::Ulam { bins: 2048 }).unwrap();
    let nu = tower_invariant_measure(&t, &nu0).unwrap();
    let (mean, se) = t.simulate_level_occupation(32, 200_000, 11).unwrap();
    for l in 0..10 {
        let tol = 3.0 * se[l] + 1e-3 * nu.level_masses[l];
        assert!((mean[l] - nu.level_masses[l]).abs() <= tol, "level {l}: {} vs {}", mean[l], nu.level_masses[l]);
    }
}

#[test]
fn tower_volume_two_ways() {
    let t = Tower::new(build_lsv_scheme(0.5, 300).unwrap());
    let bound = t.scheme().tail_bound(TailWeight::ReturnTime, 300);
    assert!((t.total_mass() - t.integral_of_return_time()).abs() <= 1e-10 + bound);
}

#[test]
fn tower_integral_matches_pushforward() {
    // ∫ log J_T dν against ∫ log |f'| dμ with μ = π_* ν on a grid
    let s = build_lsv_scheme(0.5, 200).unwrap();
    let map = s.map().unwrap().clone();
    let t = Tower::new(s);
    let nu0 = base_invariant_measure(t.scheme(), BaseMethod::Ulam { bins: 4096 }).unwrap();
    let nu = tower_invariant_measure(&t, &nu0).unwrap();
    let (left, _) = log_jacobian_two_sides(&t, &nu0, &nu).unwrap();
    let mut values = Vec::new();
    for bins in [1024, 2048] {
        let mu = pushforward_measure(&t, &nu0, &nu, Grid::new(0.0, 1.0, bins).unwrap()).unwrap();
        values.push(mu.integrate_over(0.0, 1.0, |x| map.eval(x).map(|(_, d)| d.ln()).unwrap_or(0.0)));
    }
    let err = (values[0] - values[1]).abs();
    assert!((left - values[1]).abs() <= 3.0 * err + 1e-3, "{left} vs {values:?}");
}

#[test]
fn induced_jacobian_is_at_least_one() {
    let s = build_lsv_scheme(0.5, 200).unwrap();
    for (i, c) in s.cells().iter().enumerate() {
        assert!(s.cell_log_jacobian(i, c.lo + 0.5 * c.len()) >= 0.0);
    }
}

#[test]
fn uniform_is_invariant_for_sequence_scheme() {
    let p = CounterexampleParams::new(2_000).unwrap();
    let s = build_counterexample_scheme(&p).unwrap();
    let m = ulam_matrix_scheme(&s, 512).unwrap();
    let uniform = vec![1.0 / 512.0; 512];
    let moved = m.apply(&uniform);
    let total: f64 = moved.iter().sum();
    let worst = moved.iter().map(|v| (v / total - 1.0 / 512.0).abs()).fold(0.0, f64::max);
    assert!(worst * 512.0 <= 1e-12, "{worst}");
    // exact operator: Σ_n (1/b)(a_n/b) = 1/b
    let total = p.partial_sum(p.n_max, |_, a| a);
    assert!((total / p.b_trunc() - 1.0).abs() <= 1e-12);
}

#[test]
fn block_entropy_is_nonincreasing() {
    let map = lorenz_like_map(0.25).unwrap();
    let p = IntervalPartition::from_map(&map);
    let r = block_entropy(&map, &p, 8, 8, 200_000, 4).unwrap();
    for w in r.rows.windows(2) {
        let slack = 2.0 * (w[0].std_error + w[1].std_error);
        assert!(w[1].h_over_n <= w[0].h_over_n + slack, "{:?} -> {:?}", w[0], w[1]);
    }
    assert!((r.rows[0].h_over_n - LN_2).abs() < 0.01);
}
