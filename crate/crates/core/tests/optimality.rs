mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfcut::oracle::{brute_force_minimize, energy, Energy};
use surfcut::{assemble_graph, recover_surfaces, solve_min_cut, CapacityScale, Labeling, Problem};

use common::random_instance;

fn check_against_oracle(problem: &Problem, what: &str) {
    let graph = assemble_graph(problem, CapacityScale::DEFAULT).unwrap();
    let cut = solve_min_cut(&graph).unwrap();
    let result = recover_surfaces(&cut, &graph, problem).unwrap();
    let tol = (cut.severed.len() as f64 + 1.0) / CapacityScale::DEFAULT.as_f64();
    let (_, best) = brute_force_minimize(problem).unwrap();
    let achieved = energy(problem, &result.labels).unwrap().finite().expect("feasible");
    assert!((result.energy - best).abs() <= tol, "{what}: reported {} vs oracle {best}", result.energy);
    assert!((achieved - result.energy).abs() <= tol, "{what}: achieved {achieved} vs reported {}", result.energy);
    assert!(achieved >= best - 1e-9, "{what}: beat the oracle");
    assert_eq!(result.separation_violations(problem.separation()), 0, "{what}");
}

#[test]
fn irregular_single_surface() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..40 {
        let inst = random_instance(&mut rng, 4, 6, 1, true);
        check_against_oracle(&inst.problem, &format!("#{i}: {}", inst.description));
    }
}

#[test]
fn irregular_two_surfaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..30 {
        let inst = random_instance(&mut rng, 3, 5, 2, true);
        check_against_oracle(&inst.problem, &format!("#{i}: {}", inst.description));
    }
}

#[test]
fn three_surfaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for i in 0..10 {
        let inst = random_instance(&mut rng, 2, 4, 3, i % 2 == 0);
        check_against_oracle(&inst.problem, &format!("#{i}: {}", inst.description));
    }
}

#[test]
fn cost_offsets_do_not_change_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 4, 6, 2, true);
        let p = &inst.problem;
        let shift = rng.random_range(-50.0..50.0);
        let shifted = Problem::new(
            p.costs().iter().map(|c| c.map(|v| v + shift).unwrap()).collect(),
            p.mappings().to_vec(),
            p.penalties().to_vec(),
            p.separation().clone(),
        )
        .unwrap();
        let a = surfcut::segment(p, CapacityScale::DEFAULT).unwrap();
        let b = surfcut::segment(&shifted, CapacityScale::DEFAULT).unwrap();
        assert_eq!(a.labels, b.labels);
        let expected = a.energy + shift * (p.surfaces() * p.columns()) as f64;
        assert!((b.energy - expected).abs() < 1e-6 * expected.abs().max(1.0));
    }
}

/// Every labeling maps to a cut; feasible ones cost exactly their quantized
/// energy, infeasible ones sever a sentinel arc.
#[test]
fn every_labeling_cut_prices_its_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 3, 5, 2, true);
        let p = &inst.problem;
        let g = assemble_graph(p, CapacityScale::DEFAULT).unwrap();
        let scale = g.scale.as_f64();
        for _ in 0..30 {
            let labels: Labeling = (0..p.surfaces())
                .map(|_| (0..p.columns()).map(|_| rng.random_range(0..p.levels())).collect())
                .collect();
            let side = |n: usize| {
                if n == g.network.source {
                    return true;
                }
                if n == g.network.sink {
                    return false;
                }
                let (i, a, z) = g.layout.locate(n).unwrap();
                z <= labels[i][a]
            };
            let severed: Vec<_> = g.arcs().iter().filter(|a| side(a.from) && !side(a.to)).collect();
            let capacity: u128 = severed.iter().map(|a| a.capacity as u128).sum();
            match energy(p, &labels).unwrap() {
                Energy::Finite(e) => {
                    let tol = (severed.len() as f64 + 1.0) / scale;
                    let priced = capacity as f64 / scale + g.energy_offset();
                    assert!((priced - e).abs() <= tol, "{priced} vs {e}");
                    assert!(capacity < g.sentinel as u128);
                }
                Energy::Infeasible => assert!(capacity >= g.sentinel as u128),
            }
        }
    }
}

#[test]
fn infeasible_gap_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let inst = random_instance(&mut rng, 2, 4, 2, true);
    let p = &inst.problem;
    let too_far = p.mappings().iter().map(|m| m.at(p.levels() - 1) - m.at(0)).fold(0.0, f64::max) + 1.0;
    let p = Problem::new(
        p.costs().to_vec(),
        p.mappings().to_vec(),
        p.penalties().to_vec(),
        surfcut::SeparationConstraint::new(vec![too_far]).unwrap(),
    )
    .unwrap();
    let err = surfcut::segment(&p, CapacityScale::DEFAULT).unwrap_err();
    assert!(matches!(err.root(), surfcut::Error::Infeasible));
    assert!(matches!(brute_force_minimize(&p), Err(surfcut::Error::Infeasible)));
}
