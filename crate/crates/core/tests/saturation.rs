mod common;

use ietgraph::graph::MetricGraph;
use ietgraph::radical::RadicalLength;
use ietgraph::saturation::{
    coverage_gap, permanent_saturation_moment, simulate_swarm, triangle_position, Direction, SimCaps, Swarm,
};
use proptest::prelude::*;

fn integer_triangle() -> MetricGraph {
    let one = || RadicalLength::integer(1).unwrap();
    MetricGraph::new(
        vec!["A".into(), "B".into(), "C".into()],
        vec![
            ("A".into(), "B".into(), one()),
            ("B".into(), "C".into(), one()),
            ("C".into(), "A".into(), one()),
        ],
        None,
    )
    .unwrap()
}

fn grid_check(g: &MetricGraph, v: &str, t: f64, h: f64) {
    let mut swarm = Swarm::new(g, v, &SimCaps::default()).unwrap();
    swarm.advance_to(t);
    let set = swarm.phase_set();
    let per_edge: Vec<Vec<(f64, f64)>> = set
        .per_edge
        .iter()
        .map(|ps| ps.iter().map(|p| (p.theta, p.birth)).collect())
        .collect();
    let positions = common::positions_at(&set.lengths, &per_edge, t);
    let oracle = common::grid_gap(swarm.topology(), &positions, h);
    let got = swarm.coverage(t).global;
    // the grid can only underestimate, and by at most h
    assert!(
        got >= oracle - 1e-9 && got - oracle <= h + 1e-9,
        "t={t}: {got} vs grid {oracle}"
    );
}

#[test]
fn k4_gap_matches_grid() {
    grid_check(&MetricGraph::k4(), "A", 50.0, 1e-4);
}

#[test]
fn triangle_and_star_gap_match_grid() {
    for t in [0.5, 4.0, 17.3] {
        grid_check(&MetricGraph::triangle(), "A", t, 1e-4);
        grid_check(&MetricGraph::star5(), "O", t, 1e-4);
    }
}

#[test]
fn spawns_happen_at_shared_vertices() {
    let g = MetricGraph::k4();
    let mut swarm = Swarm::new(&g, "A", &SimCaps::default()).unwrap().with_spawn_log();
    swarm.advance_to(25.0);
    let topo = swarm.topology().clone();
    let run = swarm.finish();
    assert!(!run.spawns.is_empty());
    let vertex_of = |e: usize, pos: f64, l: f64| -> Option<usize> {
        if pos.abs() < 1e-9 * l.max(1.0) {
            Some(topo.ends[e].0)
        } else if (pos - l).abs() < 1e-9 * l.max(1.0) {
            Some(topo.ends[e].1)
        } else {
            None
        }
    };
    for s in &run.spawns {
        let lp = topo.lengths[s.parent_edge];
        let lc = topo.lengths[s.edge];
        let parent_at = vertex_of(s.parent_edge, triangle_position(s.time - s.parent_theta, lp), lp);
        let child_at = vertex_of(s.edge, triangle_position(s.time - s.theta, lc), lc);
        assert!(parent_at.is_some(), "{s:?}");
        assert_eq!(parent_at, child_at, "{s:?}");
    }
    // births recorded in the phase set agree with the log
    for s in &run.spawns {
        let ps = &run.phases.per_edge[s.edge];
        assert!(ps.iter().any(|p| (p.birth - s.time).abs() < 1e-12), "{s:?}");
    }
}

#[test]
fn commensurable_triangle_suppresses_and_stays_finite() {
    let g = integer_triangle();
    let a = simulate_swarm(&g, "A", 40.0, &SimCaps::default()).unwrap();
    let b = simulate_swarm(&g, "A", 120.0, &SimCaps::default()).unwrap();
    assert!(b.suppressed > 0);
    assert!(!b.truncated);
    assert_eq!(a.phases.len(), b.phases.len());
}

#[test]
fn phase_cap_truncates() {
    let caps = SimCaps {
        max_phases: 50,
        ..SimCaps::default()
    };
    let run = simulate_swarm(&MetricGraph::k4(), "A", 200.0, &caps).unwrap();
    assert!(run.truncated);
    assert!(run.phases.len() <= 50);
}

#[test]
fn bad_inputs_are_rejected() {
    let g = MetricGraph::k4();
    assert!(Swarm::new(&g, "Z", &SimCaps::default()).is_err());
    let caps = SimCaps {
        first_edge: Some("BC".into()),
        ..SimCaps::default()
    };
    assert!(Swarm::new(&g, "A", &caps).is_err());
    assert!(simulate_swarm(&g, "A", 0.0, &SimCaps::default()).is_err());
    assert!(permanent_saturation_moment(&g, "A", 0.0, 10.0, 1.0, &SimCaps::default()).is_err());
}

#[test]
fn timeline_events_alternate() {
    let tl = permanent_saturation_moment(&MetricGraph::k4(), "A", 0.5, 40.0, 5.0, &SimCaps::default()).unwrap();
    assert!(!tl.events.is_empty());
    assert_eq!(tl.events[0].direction, Direction::ToSaturated);
    for pair in tl.events.windows(2) {
        assert!(pair[0].time < pair[1].time);
        assert_ne!(pair[0].direction, pair[1].direction);
    }
    for ev in &tl.events {
        match ev.direction {
            Direction::ToSaturated => assert!(ev.global_gap <= 0.5),
            Direction::ToUnsaturated => assert!(ev.global_gap > 0.5),
        }
    }
    if let Some(t) = tl.permanent_moment {
        assert_eq!(t, tl.events.last().unwrap().time);
    }
}

#[test]
fn huge_epsilon_saturates_immediately() {
    let g = MetricGraph::triangle();
    let total: f64 = g.edges().iter().map(|e| e.length.to_f64()).sum();
    let tl = permanent_saturation_moment(&g, "A", total, 10.0, 1.0, &SimCaps::default()).unwrap();
    assert_eq!(tl.permanent_moment, Some(0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gap_is_one_lipschitz(t in 0.0f64..20.0, dt in 0.0f64..0.5) {
        let g = MetricGraph::triangle();
        let mut swarm = Swarm::new(&g, "A", &SimCaps::default()).unwrap();
        swarm.advance_to(t + dt);
        let a = swarm.coverage(t).global;
        let b = swarm.coverage(t + dt).global;
        prop_assert!((a - b).abs() <= dt + 1e-9, "{} {}", a, b);
    }

    #[test]
    fn more_phases_never_widen_the_gap(t in 1.0f64..15.0, pick in 0usize..1000) {
        let g = MetricGraph::k4();
        let mut swarm = Swarm::new(&g, "A", &SimCaps::default()).unwrap();
        swarm.advance_to(t);
        let full = swarm.phase_set();
        let mut fewer = full.clone();
        let sizes: Vec<usize> = fewer.per_edge.iter().map(|p| p.len()).collect();
        let total: usize = sizes.iter().sum();
        let mut k = pick % total;
        for (e, &n) in sizes.iter().enumerate() {
            if k < n {
                fewer.per_edge[e].remove(k);
                break;
            }
            k -= n;
        }
        let topo = swarm.topology();
        prop_assert!(coverage_gap(topo, &fewer, t).global >= coverage_gap(topo, &full, t).global - 1e-12);
    }
}
