use std::f64::consts::PI;

use proptest::prelude::*;

use mms_lab::contraction::{
    chebyshev_samples, mcp_check, necklace_schedule, SCALAR_D_MAX, SCALAR_T_MAX,
};
use mms_lab::generators::{
    circle_space, euclidean_ball_grid, hawaiian_truncation, segment_space, Bead, Earring, Necklace,
    NecklaceParams,
};
use mms_lab::regularity::{epsilon_regular_scan, gh_exact, gh_lower_bound, ScanOptions, Verdict};
use mms_lab::symmetry::{
    compose, displacement, enumerate_isometries, fixed_set, generate_subgroup, Subgroup,
    DEFAULT_ISO_TOL,
};
use mms_lab::transport::{
    lift_to_geodesic_plan, pushforward_at, run_competitor, solve_w2, CompetitorOptions,
};
use mms_lab::{BallKind, FiniteMMS, GeodesicFinder, GeodesicOptions, Measure, Meta, Point};

fn plane(c: &[(f64, f64)]) -> FiniteMMS {
    let pts = c
        .iter()
        .enumerate()
        .map(|(i, p)| Point::at(i, vec![p.0, p.1]))
        .collect();
    FiniteMMS::from_fn(pts, vec![1.0; c.len()], Meta::default(), |i, j| {
        ((c[i].0 - c[j].0).powi(2) + (c[i].1 - c[j].1).powi(2)).sqrt()
    })
    .unwrap()
}

fn coords(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), n)
}

fn measure_on(n: usize) -> impl Strategy<Value = Measure> {
    prop::collection::vec(0.0..1.0f64, n).prop_filter_map("empty", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-3)
            .then(|| Measure::new(w.iter().enumerate().map(|(i, &m)| (i, m / total))).unwrap())
    })
}

fn w2(s: &FiniteMMS, a: &Measure, b: &Measure) -> f64 {
    solve_w2(s, a, b).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn w2_is_a_metric(c in coords(6..=6), a in measure_on(6), b in measure_on(6), m in measure_on(6)) {
        let s = plane(&c);
        prop_assert!((w2(&s, &a, &b) - w2(&s, &b, &a)).abs() < 1e-9);
        prop_assert!(w2(&s, &a, &a).abs() < 1e-12);
        let (ab, bm, am) = (w2(&s, &a, &b).sqrt(), w2(&s, &b, &m).sqrt(), w2(&s, &a, &m).sqrt());
        prop_assert!(am <= ab + bm + 1e-9);
    }

    #[test]
    fn w2_scales_quadratically(c in coords(5..=5), a in measure_on(5), b in measure_on(5), r in 0.1..10.0f64) {
        let s = plane(&c);
        let scaled = s.scale(r).unwrap();
        prop_assert!((w2(&scaled, &a, &b) - w2(&s, &a, &b) / (r * r)).abs() < 1e-9);
    }

    #[test]
    fn lift_keeps_marginals(a in measure_on(12), b in measure_on(12)) {
        let s = circle_space(1.0, 12).unwrap();
        let (_, cp) = solve_w2(&s, &a, &b).unwrap();
        let plan = lift_to_geodesic_plan(&s, &cp, 1).unwrap();
        prop_assert!(pushforward_at(&plan, 0.0, &s).unwrap().max_defect(&a) < 1e-12);
        prop_assert!(pushforward_at(&plan, 1.0, &s).unwrap().max_defect(&b) < 1e-12);
        // total mass is conserved at every time
        for t in [0.1, 0.5, 0.9] {
            prop_assert!((pushforward_at(&plan, t, &s).unwrap().total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_commutes_with_scale(c in coords(3..=12), center in 0usize..3, r in 0.05..1.5f64, f in 0.1..10.0f64) {
        let s = plane(&c);
        let scaled = s.scale(f).unwrap();
        prop_assert_eq!(s.ball_indices(center, r, BallKind::Closed), scaled.ball_indices(center, r / f, BallKind::Closed));
    }

    #[test]
    fn geodesic_lengths_and_restriction(pitch in 0.05..0.3f64, a in 0usize..100, b in 0usize..100, s0 in 0.0..0.5f64, t0 in 0.5..1.0f64) {
        let s = circle_space(1.0, (2.0 * PI / pitch) as usize).unwrap();
        let (a, b) = (a % s.len(), b % s.len());
        let finder = GeodesicFinder::new(&s, GeodesicOptions::default());
        for g in finder.between(a, b, 4).unwrap() {
            prop_assert_eq!(s.dist(g.evaluate(0.0).unwrap(), g.evaluate(1.0).unwrap()), g.length());
            let r = g.restrict(s0, t0).unwrap();
            prop_assert_eq!(r.evaluate(0.0).unwrap(), g.evaluate(s0).unwrap());
            prop_assert_eq!(r.evaluate(1.0).unwrap(), g.evaluate(t0).unwrap());
        }
    }

    #[test]
    fn gh_symmetry_bounds_and_triangle(x in coords(2..=5), y in coords(2..=5), z in coords(2..=5)) {
        let (x, y, z) = (plane(&x), plane(&y), plane(&z));
        let (xy, w) = gh_exact(&x, &y).unwrap();
        let (yx, _) = gh_exact(&y, &x).unwrap();
        prop_assert!((xy - yx).abs() < 1e-12);
        prop_assert_eq!(w.distortion / 2.0, xy);
        prop_assert!(gh_lower_bound(&x, &y) <= xy + 1e-12);
        let (yz, _) = gh_exact(&y, &z).unwrap();
        let (xz, _) = gh_exact(&x, &z).unwrap();
        prop_assert!(xz <= xy + yz + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn generators_validate(pitch in 0.02..0.2f64, n in 1usize..5, res in 4usize..24, r in 0.3..1.0f64) {
        prop_assert!(segment_space(pitch).unwrap().validate().is_valid());
        prop_assert!(hawaiian_truncation(n, res).unwrap().validate().is_valid());
        prop_assert!(euclidean_ball_grid(2, r, r / 4.0).unwrap().validate().is_valid());
        let neck = Necklace::new(NecklaceParams { beads: vec![Bead { x: 0.6, r: 0.8 }], pitch, fiber_cells: None }).unwrap();
        prop_assert!(neck.space().validate().is_valid());
    }

    #[test]
    fn empty_necklace_is_the_segment(pitch in 0.01..0.5f64) {
        let a = segment_space(pitch).unwrap();
        let b = Necklace::new(NecklaceParams { beads: vec![], pitch, fiber_cells: None }).unwrap().into_space();
        prop_assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            prop_assert_eq!(a.row(i), b.row(i));
            prop_assert_eq!(a.weight(i), b.weight(i));
        }
    }

    #[test]
    fn earring_truncations_nest(n in 2usize..5, res in 4usize..16) {
        let big = hawaiian_truncation(n, res).unwrap();
        let small = hawaiian_truncation(n - 1, res).unwrap();
        for i in 0..small.len() {
            for j in 0..small.len() {
                prop_assert_eq!(small.dist(i, j), big.dist(i, j));
            }
        }
    }

    #[test]
    fn competitor_preserves_marginals_and_cost(lo in 2usize..10, len in 1usize..6, xj in 1usize..16) {
        let e = Earring::new(3, 16).unwrap();
        let f = e.reflection(1);
        let x = e.point(1, xj);
        prop_assume!(f[x] != x);
        let a: Vec<usize> = (lo..lo + len).map(|j| e.point(2, j)).collect();
        let run = run_competitor(e.space(), &f, &a, x, &CompetitorOptions::default(), 1e-9).unwrap();
        prop_assert!(run.report.marginals_equal && run.report.cost_equal);
    }

    #[test]
    fn mcp_at_one_is_tight_on_a(first in 10usize..30, len in 2usize..20) {
        let s = segment_space(PI / 100.0).unwrap();
        let a: Vec<usize> = (first..first + len).collect();
        let mu1 = Measure::normalized_restriction(&s, &a).unwrap();
        let (_, c) = solve_w2(&s, &Measure::dirac(0), &mu1).unwrap();
        let plan = lift_to_geodesic_plan(&s, &c, 1).unwrap();
        let r = mcp_check(&s, 0, &a, &plan, &[1.0], 1e-15).unwrap();
        let cells: Vec<usize> = r.records.iter().map(|c| c.cell).collect();
        prop_assert_eq!(cells, a);
        prop_assert!(r.records.iter().all(|c| c.slack.abs() < 1e-15));
    }

    #[test]
    fn schedule_stays_in_the_scalar_domain(zx in 0.34..0.45f64, ax in 1.05..1.15f64, k in 1usize..4) {
        let n = Necklace::new(NecklaceParams {
            beads: vec![Bead { x: 0.4, r: 0.3 }, Bead { x: 1.1, r: 0.3 }],
            pitch: 0.005,
            fiber_cells: None,
        }).unwrap();
        let z = n.column(n.nearest_column(zx)).cells.start + 1;
        let col = n.column(n.nearest_column(ax)).cells.clone();
        prop_assume!(col.len() > k);
        let a: Vec<usize> = (col.start..col.start + k).collect();
        let s = necklace_schedule(&n, z, &a).unwrap();
        prop_assert!(s.params.length <= SCALAR_D_MAX);
        prop_assert!(s.params.t_hat <= SCALAR_T_MAX);
        for t in chebyshev_samples(9, &[]) {
            prop_assert!((pushforward_at(&s.plan, t, n.space()).unwrap().total() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn isometry_group_laws_on_earring() {
    let e = Earring::new(3, 12).unwrap();
    let s = e.space();
    let en = enumerate_isometries(s, DEFAULT_ISO_TOL, 1 << 20);
    let maps: Vec<Vec<usize>> = en.maps.iter().map(|m| m.perm.clone()).collect();
    let id: Vec<usize> = (0..s.len()).collect();
    assert!(maps.contains(&id));
    let group = Subgroup {
        elements: maps.clone(),
        generators: Vec::new(),
        closed: true,
    };
    assert!(group.verify_closed());
    for g in &maps {
        // fixed and moved cells partition the mass
        let fix = fixed_set(s, g, 0.0);
        let moved: f64 = (0..s.len())
            .filter(|&i| g[i] != i)
            .map(|i| s.weight(i))
            .sum();
        assert!((fix.measure + moved - s.total_mass()).abs() < 1e-12);
        for h in &maps {
            let both: Vec<usize> = fix.cells.iter().copied().filter(|i| h[*i] == *i).collect();
            let gh = fixed_set(s, &compose(g, h), 0.0).cells;
            assert!(both.iter().all(|i| gh.contains(i)));
        }
        // equal permutations give equal pushforwards
        let mu = Measure::normalized_restriction(s, &(1..6).collect::<Vec<_>>()).unwrap();
        assert_eq!(
            mu.pushforward(g).unwrap(),
            mu.pushforward(&g.clone()).unwrap()
        );
    }
}

#[test]
fn displacement_is_monotone() {
    let e = Earring::new(3, 12).unwrap();
    let s = e.space();
    let small = generate_subgroup(s.len(), &[e.reflection(3)], 64);
    let big = generate_subgroup(s.len(), &[e.reflection(3), e.reflection(2)], 64);
    let mut prev = 0.0;
    for k in 1..40 {
        let r = 0.1 * k as f64;
        let d = displacement(s, &big, r, Earring::BASE).unwrap();
        assert!(d >= prev);
        assert!(d >= displacement(s, &small, r, Earring::BASE).unwrap());
        prev = d;
    }
}

#[test]
fn scan_is_monotone_in_eps() {
    let s = segment_space(PI / 400.0).unwrap();
    let x = s.nearest_point(&[0.7, 0.0]).unwrap();
    let opts = ScanOptions {
        r_samples: 4,
        ..ScanOptions::default()
    };
    let mut seen_in = false;
    for eps in [0.02, 0.05, 0.1, 0.2, 0.4] {
        let v = epsilon_regular_scan(&s, x, eps, 0.3, &[1], &opts)
            .unwrap()
            .verdict(1)
            .unwrap();
        assert!(!seen_in || v == Verdict::In);
        seen_in |= v == Verdict::In;
    }
    assert!(seen_in);
}
