//! Properties of the cycle family of random stable plants.

use fcs_mpc::limit_cycle::{
    cycle_cost, cycle_from_inputs, input_sequence_from_index, optimal_limit_cycle, CycleCriterion, CycleNorm,
    PERIODICITY_TOL,
};
use fcs_mpc::model::{DiscreteSystem, InputVector};
use fcs_mpc::numerics::{spectral_radius, Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_stable(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DiscreteSystem {
    let a = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let a = &a * (rng.gen_range(0.1..0.95) / spectral_radius(&a).unwrap());
    let b = Matrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    let c = Matrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0));
    DiscreteSystem::new(a, b, c, 1.0).unwrap()
}

fn criterion(y_ref: f64, norm: CycleNorm) -> CycleCriterion {
    CycleCriterion::new(Vector::from_element(1, y_ref), Matrix::identity(1, 1), norm).unwrap()
}

#[test]
fn every_cycle_of_short_period_is_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let n = rng.gen_range(2..=5);
        let sys = random_stable(&mut rng, n, 2);
        for p in 1..=4 {
            for c in 1..=4u64.pow(p as u32) {
                let inputs = input_sequence_from_index(c, 2, p).unwrap();
                let cycle = cycle_from_inputs(&sys, &inputs).unwrap();
                assert_eq!(cycle.inputs(), &inputs[..]);
                assert!(cycle.verify(&sys).unwrap() <= PERIODICITY_TOL);
                for i in 0..p {
                    let next = sys.step(cycle.state_at(i), cycle.input_at(i)).unwrap();
                    let err = (next - cycle.state_at(i + 1)).amax();
                    assert!(err <= 1e-10 * cycle.state_at(i + 1).amax().max(1.0));
                }
            }
        }
    }
}

#[test]
fn rotating_the_inputs_rotates_the_cycle_and_keeps_its_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let sys = random_stable(&mut rng, 3, 2);
        let p = rng.gen_range(2..=6);
        let inputs: Vec<InputVector> = (0..p).map(|_| InputVector::from_code(rng.gen_range(0..4), 2)).collect();
        let cycle = cycle_from_inputs(&sys, &inputs).unwrap();
        let shift = rng.gen_range(1..p);
        let mut shifted_inputs = inputs.clone();
        shifted_inputs.rotate_left(shift);
        let direct = cycle_from_inputs(&sys, &shifted_inputs).unwrap();
        let rotated = cycle.rotated(shift);
        assert_eq!(rotated.inputs(), direct.inputs());
        for (a, b) in rotated.states().iter().zip(direct.states()) {
            assert!((a - b).amax() <= 1e-12 * b.amax().max(1.0));
        }
        let crit = criterion(0.3, CycleNorm::TwoNorm);
        let (c1, c2) = (cycle_cost(&cycle, &crit, &sys.c).unwrap(), cycle_cost(&direct, &crit, &sys.c).unwrap());
        assert!((c1 - c2).abs() <= 1e-12 * c1.max(1.0));
    }
}

#[test]
fn zero_input_cycle_sits_at_the_origin() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in 1..=5 {
        let sys = random_stable(&mut rng, 4, 2);
        let cycle = cycle_from_inputs(&sys, &vec![InputVector::zeros(2); p]).unwrap();
        assert!(cycle.states().iter().all(|x| x.amax() == 0.0));
    }
}

#[test]
fn search_returns_a_minimiser_with_the_smallest_index_among_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..20 {
        let n = rng.gen_range(2..=4);
        let sys = random_stable(&mut rng, n, 2);
        let p = rng.gen_range(1..=4);
        let norm = [CycleNorm::TwoNorm, CycleNorm::OneNorm, CycleNorm::InfNorm][rng.gen_range(0..3)];
        let crit = criterion(rng.gen_range(-1.0..1.0), norm);
        let best = optimal_limit_cycle(&sys, &crit, p).unwrap();
        let best_cost = cycle_cost(&best, &crit, &sys.c).unwrap();
        let threshold = best_cost + fcs_mpc::TIE_RELATIVE_TOLERANCE * best_cost;
        for c in 1..=4u64.pow(p as u32) {
            let cycle = cycle_from_inputs(&sys, &input_sequence_from_index(c, 2, p).unwrap()).unwrap();
            let cost = cycle_cost(&cycle, &crit, &sys.c).unwrap();
            assert!(cost >= best_cost - 1e-12 * best_cost.max(1.0));
            if c < best.index() {
                assert!(cost > threshold, "index {c} ties with the winner {}", best.index());
            }
        }
    }
}

#[test]
fn zero_reference_selects_the_zero_cycle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let sys = random_stable(&mut rng, 3, 2);
    let best = optimal_limit_cycle(&sys, &criterion(0.0, CycleNorm::TwoNorm), 3).unwrap();
    assert_eq!(best.index(), 1);
    assert!(best.inputs().iter().all(|u| u.code() == 0));
}

#[test]
fn period_one_search_picks_the_best_constant_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..20 {
        let sys = random_stable(&mut rng, 3, 2);
        let crit = criterion(rng.gen_range(-2.0..2.0), CycleNorm::TwoNorm);
        let best = optimal_limit_cycle(&sys, &crit, 1).unwrap();
        let costs: Vec<f64> = (0..4)
            .map(|code| {
                let cycle = cycle_from_inputs(&sys, &[InputVector::from_code(code, 2)]).unwrap();
                cycle_cost(&cycle, &crit, &sys.c).unwrap()
            })
            .collect();
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(costs[best.inputs()[0].code()] <= min * (1.0 + 1e-9));
    }
}
