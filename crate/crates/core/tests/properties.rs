//! Property tests over kernels, runs, fronts and plans.

use proptest::prelude::*;

use relay_rd::experiments::scenarios;
use relay_rd::experiments::{
    build_sequences_thm1, build_sequences_thm2, check_plan1, check_plan2, Thm1Options, Thm2Margins,
};
use relay_rd::fronts;
use relay_rd::kernels::{FourierProfile, Kernels, ThresholdDomain, TruncationPolicy};
use relay_rd::solver::{EventKind, TimeSeries};

fn kern() -> Kernels {
    Kernels::new(
        ThresholdDomain::new(0.05, 0.25).unwrap(),
        TruncationPolicy::default(),
    )
}

fn xs(n: usize) -> Vec<f64> {
    (0..=n).map(|j| 0.05 + 0.2 * j as f64 / n as f64).collect()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for j in 1..n {
        acc += f(a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tail_is_a_decreasing_fraction(tau in 0.002f64..0.5) {
        let k = kern();
        let mut prev = f64::INFINITY;
        for x in xs(400) {
            let p = k.interval_tail(x, tau).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p), "{x} {p}");
            prop_assert!(p <= prev + 1e-12);
            prev = p;
        }
    }

    #[test]
    fn tail_decreases_in_time(x in 0.05f64..0.25, tau in 0.002f64..0.4, dtau in 1e-4f64..0.1) {
        let k = kern();
        prop_assert!(k.interval_tail(x, tau + dtau).unwrap() <= k.interval_tail(x, tau).unwrap() + 1e-12);
    }

    #[test]
    fn kernel_decays_away_from_hi(tau in 0.002f64..0.5) {
        let k = kern();
        let vals: Vec<f64> = xs(400).into_iter().map(|x| k.interval(x, tau).unwrap()).collect();
        prop_assert!(vals.windows(2).all(|p| p[1] >= p[0] - 1e-10));
        let mass = simpson(|x| k.interval(x, tau).unwrap(), 0.05, 0.25, 2000);
        prop_assert!((mass - 1.0).abs() < 1e-10, "{mass}");
    }

    #[test]
    fn cosine_series_keeps_mass(vals in proptest::collection::vec(0.0f64..5.0, 20), s in 1e-3f64..0.05) {
        let dom = ThresholdDomain::new(0.05, 0.25).unwrap();
        let faces: Vec<f64> = xs(20);
        let prof = FourierProfile::from_cells(dom, &faces, &vals, 10).unwrap();
        let m = simpson(|x| prof.evaluate(x, s, 1.0, 0.0).unwrap(), 0.05, 0.25, 4000);
        prop_assert!((m - prof.mass()).abs() < 1e-10 * prof.mass().max(1.0), "{m} {}", prof.mass());
    }
}

fn random_run(seed: u64) -> TimeSeries {
    let mut sc = scenarios::randomized(seed, 1).unwrap().pop().unwrap();
    let (lo, hi) = (sc.sim.params.domain.lo, sc.sim.params.domain.hi);
    sc.opts.probes = vec![lo + 0.5 * (hi - lo), lo + 0.8 * (hi - lo)];
    sc.sim.run(&sc.data, &sc.opts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn fronts_move_right_and_only_the_leftmost(seed in 0u64..10_000) {
        let s = random_run(seed);
        let tracks = fronts::track(&s).unwrap();
        for t in &tracks {
            prop_assert!(t.trajectory.windows(2).all(|p| p[1].1 >= p[0].1), "track {}", t.id);
        }
        for p in s.records.windows(2) {
            let quiet = !s.events.iter().any(|e| {
                e.t > p[0].t && e.t <= p[1].t && matches!(e.kind, EventKind::Birth | EventKind::Collision | EventKind::Exit)
            });
            let (a, b) = (&p[0].cfg.fronts, &p[1].cfg.fronts);
            if quiet && a.len() == b.len() && !a.is_empty() {
                prop_assert_eq!(&a[1..], &b[1..], "t = {}", p[1].t);
            }
        }
    }

    #[test]
    fn certified_fronts_never_die(seed in 0u64..10_000) {
        let s = random_run(seed);
        let tracks = fronts::track(&s).unwrap();
        for &x in &s.probes {
            if let Some(c) = fronts::certify_from_probe(&tracks, &s, x, 5e-3) {
                for id in &c.certified {
                    let t = tracks.iter().find(|t| t.id == *id).unwrap();
                    prop_assert!(t.death.is_none(), "track {id} certified at {x} but died");
                }
            }
        }
    }

    #[test]
    fn built_plans_pass_the_dense_check(n in 1usize..=3, margin in 0.02f64..0.1, mu in 0.1f64..0.3) {
        let k = kern();
        let opts = Thm1Options { margin, ..Default::default() };
        if let Ok(plan) = build_sequences_thm1(&k, n, &opts) {
            prop_assert!(check_plan1(&k, &plan, 1000).unwrap().pass());
        }
        let m = Thm2Margins { margin: margin.min(0.1), ..Default::default() };
        if let Ok(plan) = build_sequences_thm2(n, mu, &m) {
            prop_assert!(check_plan2(&plan, 1000).unwrap().pass());
        }
    }
}

/// Halving the step and doubling the cells should not grow the change in
/// front positions by more than a factor of two. Finer levels sit on the
/// ~1e-6 floor set by event localization.
#[test]
fn fronts_converge_under_refinement() {
    let finals: Vec<Vec<f64>> = [(100, 8e-2), (200, 4e-2), (400, 2e-2), (800, 1e-2)]
        .iter()
        .map(|&(n, dt)| {
            let mut sc = scenarios::concentrated(1e-4, 12.0).unwrap();
            let mut p = sc.sim.params.clone();
            p.grid_n = n;
            p.dt_max = dt;
            sc.sim = relay_rd::solver::Simulation::new(p).unwrap();
            sc.data =
                relay_rd::solver::InitialData::bump(&sc.sim.grid, 1e-3, 1e-2, 0.249, sc.data.r0.clone())
                    .unwrap();
            sc.sim
                .run(&sc.data, &sc.opts)
                .unwrap()
                .records
                .last()
                .unwrap()
                .cfg
                .fronts
                .clone()
        })
        .collect();
    assert!(finals.iter().all(|f| f.len() == finals[0].len()), "{finals:?}");
    let change = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let c: Vec<f64> = finals.windows(2).map(|p| change(&p[0], &p[1])).collect();
    assert!(c.windows(2).all(|p| p[1] < 2.0 * p[0]), "{c:?} {finals:?}");
}
