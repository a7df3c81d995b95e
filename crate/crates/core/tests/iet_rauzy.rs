#![allow(clippy::needless_range_loop)]

mod common;

use ietgraph::iet::{is_irreducible, IetData};
use ietgraph::rauzy::{rauzy_class, run_path, run_path_exact, step};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matmul(a: &[Vec<u64>], b: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let d = a.len();
    (0..d)
        .map(|i| (0..d).map(|j| (0..d).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn random_iet(seed: u64, d: usize) -> IetData {
    IetData::random_irreducible(d, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn worked_evaluations() {
    let t = IetData::from_strings("ABCDE", "CDEBA", &[0.1, 0.15, 0.2, 0.25, 0.3]).unwrap();
    let oracle = common::slot_eval(t.top(), t.bottom(), t.lengths(), 0.05);
    assert!((t.evaluate(0.05).unwrap() - oracle).abs() < 1e-15);
    assert!((oracle - 0.95).abs() < 1e-12);
    let r = IetData::from_strings("AB", "BA", &[0.4, 0.6]).unwrap();
    assert!((r.evaluate(0.1).unwrap() - 0.7).abs() < 1e-15);
    assert!((r.evaluate(0.5).unwrap() - 0.1).abs() < 1e-15);
}

#[test]
fn irreducibility_examples() {
    assert!(!is_irreducible(&[0, 1], &[0, 1]));
    assert!(is_irreducible(&[0, 1, 2, 3, 4], &[2, 3, 4, 1, 0]));
    // brute force over prefixes
    for k in 1..5 {
        let top: Vec<usize> = (0..k).collect();
        let mut bottom: Vec<usize> = [2, 3, 4, 1, 0][..k].to_vec();
        bottom.sort();
        assert_ne!(top, bottom);
    }
}

#[test]
fn idoc_examples() {
    let half = IetData::from_strings("AB", "BA", &[0.5, 0.5]).unwrap();
    let rep = half.idoc_witness(100, 1e-12);
    assert_eq!(rep.violation.unwrap().step, 2);
    let g = IetData::golden_rotation().normalized();
    assert!(g.idoc_witness(10_000, 1e-10).passed());
    let swap = IetData::from_strings("AB", "BA", &[0.3, 0.3]).unwrap();
    assert!(!swap.idoc_witness(10, 1e-12).passed());
}

#[test]
fn complexity_examples() {
    let g = IetData::golden_rotation();
    let p = g.factor_complexity(0.1, 20, 100_000).unwrap();
    assert!(!p.undersampled);
    assert!(p.p.iter().enumerate().all(|(k, &v)| v == k + 2));
    let s = |n: u32| (n as f64).sqrt();
    let t3 = IetData::from_strings("ABC", "CBA", &[s(2), s(3), s(5)]).unwrap();
    assert_eq!(t3.factor_complexity(0.0, 5, 200_000).unwrap().p[4], 11);
    let t4 = IetData::from_strings("ABCD", "DCBA", &[s(2), s(3), s(5), s(7)]).unwrap();
    assert_eq!(t4.factor_complexity(0.0, 10, 400_000).unwrap().p[9], 31);
}

#[test]
fn golden_q_and_heights() {
    let t = IetData::golden_rotation();
    let trace = run_path_exact(&t, &common::golden_exact(), 100, 0.0).unwrap();
    assert_eq!(trace.q(0, 0).unwrap().to_exact().unwrap(), vec![vec![1, 0], vec![0, 1]]);
    let q2 = trace.q(0, 2).unwrap().to_exact().unwrap();
    assert_eq!(q2, vec![vec![2, 1], vec![1, 1]]);
    assert_eq!(q2.iter().flatten().sum::<u64>(), 5);
    assert_eq!(trace.heights(0).unwrap().exact.unwrap(), vec![1, 1]);
    assert_eq!(trace.heights(2).unwrap().exact.unwrap(), vec![3, 2]);
    let types: Vec<u8> = trace.steps.iter().map(|s| s.step_type).collect();
    assert_eq!(types.len(), 100);
    assert!(types.windows(2).all(|w| w[0] != w[1]));
}

#[test]
fn single_step_heights_and_constant() {
    let t = IetData::from_strings("ABCDE", "CDEBA", &[0.1, 0.15, 0.2, 0.25, 0.3]).unwrap();
    let trace = run_path(&t, 1, 0.0).unwrap();
    assert_eq!(trace.heights(1).unwrap().exact.unwrap(), vec![2, 1, 1, 1, 1]);
    let diag = trace.balance_and_diophantine(0.5);
    assert!((diag.c_eps - 6.0 / 5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn golden_diagnostics_are_finite() {
    let t = IetData::golden_rotation();
    let trace = run_path_exact(&t, &common::golden_exact(), 50, 0.0).unwrap();
    let diag = trace.balance_and_diophantine(0.5);
    assert!(diag.c_eps.is_finite() && diag.c_eps > 0.0);
    assert!(diag.c_prime_eps.is_finite());
    assert!(diag.height_constant > 0.0);
    // ‖Z‖ = 3 and ‖Q(0)‖ = 2, so the maximum sits at n = 0
    assert!((diag.c_eps - 3.0 / 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn k4_cycle_diagnostics() {
    use ietgraph::graph::MetricGraph;
    use ietgraph::reduction::{build_iet_from_graph, CyclePolicy};
    let r = build_iet_from_graph(&MetricGraph::k4(), &CyclePolicy::Cycle("a1".into())).unwrap();
    let trace = run_path(&r.iet, 200, 0.0).unwrap_or_else(|e| match e {
        ietgraph::rauzy::RauzyError::Degenerate { partial, .. } => *partial,
        other => panic!("{other}"),
    });
    let diag = trace.balance_and_diophantine(0.3);
    assert!(diag.c_eps.is_finite() && diag.c_prime_eps.is_finite());
}

#[test]
fn golden_sandwich() {
    let t = IetData::golden_rotation();
    let trace = run_path_exact(&t, &common::golden_exact(), 40, 0.0).unwrap();
    assert!(trace.return_time_sandwich(2, 0.1, 0.5).unwrap().holds());
    let r0 = trace.return_time_sandwich(0, 0.3, 0.3).unwrap();
    assert!(r0.return_time.unwrap() >= 1 && r0.lower == 1.0);
}

#[test]
fn degenerate_step_is_an_error() {
    let t = IetData::from_strings("AB", "BA", &[0.5, 0.5]).unwrap();
    assert!(step(&t).is_err());
}

#[test]
fn small_classes() {
    assert_eq!(rauzy_class(&[0, 1], &[1, 0]).unwrap().len(), 1);
    let c = rauzy_class(&[0, 1, 2], &[2, 1, 0]).unwrap();
    let oracle = common::class_bfs(&[2, 1, 0]);
    assert_eq!(c.len(), oracle.len());
    assert!(oracle.iter().all(|b| c.contains(b)));
    assert!(rauzy_class(&[0, 1], &[0, 1]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluation_matches_slot_oracle(seed in 0u64..10_000, d in 2usize..7, u in 0.0f64..1.0) {
        let t = random_iet(seed, d);
        let x = u * t.total();
        let y = t.evaluate(x).unwrap();
        prop_assert!((y - common::slot_eval(t.top(), t.bottom(), t.lengths(), x)).abs() < 1e-12);
        prop_assert!((t.evaluate_inverse(y).unwrap() - x).abs() < 1e-12);
    }

    #[test]
    fn preimages_preserve_measure(seed in 0u64..10_000, d in 2usize..7, a in 0.0f64..1.0, w in 0.0f64..1.0) {
        let t = random_iet(seed, d);
        let (lo, hi) = (a * t.total(), (a + w * (1.0 - a)) * t.total());
        // T⁻¹J is the union over letters of the translated overlap with the bottom slot
        let mut measure = 0.0;
        let mut start = 0.0;
        for &b in t.bottom() {
            let end = start + t.lengths()[b];
            measure += (hi.min(end) - lo.max(start)).max(0.0);
            start = end;
        }
        prop_assert!((measure - (hi - lo)).abs() < 1e-12);
    }

    #[test]
    fn cocycle_and_reconstruction(seed in 0u64..10_000, d in 2usize..9) {
        let t = random_iet(seed, d);
        let Ok(trace) = run_path(&t, 60, 0.0) else { return Ok(()); };
        let n = trace.len();
        prop_assert!(trace.max_reconstruction_error < 1e-8);
        let k = n / 2;
        let q_mn = trace.q(0, n).unwrap().to_exact().unwrap();
        let split = matmul(&trace.q(0, k).unwrap().to_exact().unwrap(), &trace.q(k, n).unwrap().to_exact().unwrap());
        prop_assert_eq!(q_mn, split);
        let mut prev = trace.q(0, 0).unwrap().to_exact().unwrap();
        for m in 1..=n {
            let q = trace.q(0, m).unwrap().to_exact().unwrap();
            prop_assert!(q.iter().flatten().zip(prev.iter().flatten()).all(|(a, b)| a >= b));
            prev = q;
        }
        prop_assert!(trace.heights(n).unwrap().identity_error < 1e-9);
    }

    #[test]
    fn elementary_matrix_relation(seed in 0u64..10_000, d in 2usize..9) {
        let mut t = random_iet(seed, d);
        for _ in 0..20 {
            let Ok((next, s)) = step(&t) else { break; };
            let z = s.z(d);
            for i in 0..d {
                let back: f64 = (0..d).map(|j| z[i][j] as f64 * next.lengths()[j]).sum();
                prop_assert!((back - t.lengths()[i]).abs() <= 1e-10 * t.lengths()[i].max(1e-300));
            }
            let off: u64 = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| z[i][j]).sum();
            prop_assert_eq!(off, 1);
            t = next;
        }
    }

    #[test]
    fn classes_have_two_in_and_two_out(seed in 0u64..10_000, d in 2usize..7) {
        let t = random_iet(seed, d);
        let c = rauzy_class(t.top(), t.bottom()).unwrap();
        let oracle = common::class_bfs(&ietgraph::rauzy::reduce(t.top(), t.bottom()));
        prop_assert_eq!(c.len(), oracle.len());
        let mut out = vec![0; c.len()];
        let mut inn = vec![0; c.len()];
        for &(a, b, _) in &c.edges {
            out[a] += 1;
            inn[b] += 1;
        }
        prop_assert!(out.iter().all(|&k| k == 2));
        prop_assert!(inn.iter().all(|&k| k == 2));
    }
}
