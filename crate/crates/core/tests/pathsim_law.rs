use waitent::estimators::stats;
use waitent::exact;
use waitent::fixtures;
use waitent::model::stationary_of;
use waitent::pathsim::{
    discretize, jump_pair_counts, simulate, Initial, LazyDiscretizer, MarkovSource, Role, Seed,
    Simulator, SymbolSource,
};

#[test]
fn first_holding_time_is_exponential() {
    let x = fixtures::two_state(1.5, 2.0);
    let sim = Simulator::new(&x).unwrap();
    let holds: Vec<f64> = (0..4000)
        .map(|i| {
            let t = sim
                .run(50.0, Initial::State(0), &mut Seed::new(3, i).rng(Role::X))
                .unwrap();
            t.jump_times()[0]
        })
        .collect();
    let d = stats::ks_statistic(&holds, |v| 1.0 - (-1.5 * v).exp());
    assert!(stats::ks_p_value(d, holds.len() as f64) > 0.001, "D = {d}");
}

#[test]
fn occupation_and_flux_match_stationary_law() {
    let x = fixtures::biased_cycle(0.8);
    let mu = stationary_of(&x).unwrap();
    let t = 2e5;
    let traj = simulate(&x, t, &mut Seed::new(9, 0).rng(Role::X), Initial::Stationary).unwrap();
    let mut occ = [0.0; 3];
    for (s, dt) in traj.holding_intervals(t) {
        occ[s] += dt;
    }
    for s in 0..3 {
        assert!((occ[s] / t - mu.prob(s)).abs() < 0.01);
    }
    let flux = exact::stationary_flux(&x).unwrap();
    for ((a, b), k) in jump_pair_counts(&traj, t).unwrap() {
        let rate = k as f64 / t;
        assert!((rate - flux[(a, b)]).abs() < 0.02 * flux[(a, b)].max(0.05), "{a}->{b}: {rate}");
    }
}

#[test]
fn discretized_path_has_exp_delta_l_transitions() {
    let x = fixtures::two_state(1.0, 2.0);
    let delta = 0.3;
    // closed form for two states
    let s = 3.0f64;
    let p01 = 1.0 / s * (1.0 - (-s * delta).exp());
    let p10 = 2.0 / s * (1.0 - (-s * delta).exp());
    let traj = simulate(&x, 3e4, &mut Seed::new(1, 0).rng(Role::X), Initial::Stationary).unwrap();
    let path = discretize(&traj, delta, 100_000).unwrap();
    let mut counts = [[0u64; 2]; 2];
    for w in path.symbols.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    let f01 = counts[0][1] as f64 / (counts[0][0] + counts[0][1]) as f64;
    let f10 = counts[1][0] as f64 / (counts[1][0] + counts[1][1]) as f64;
    assert!((f01 - p01).abs() < 0.01, "{f01} vs {p01}");
    assert!((f10 - p10).abs() < 0.015, "{f10} vs {p10}");
}

#[test]
fn lazy_discretizer_and_markov_source_agree_in_law() {
    let x = fixtures::biased_cycle(0.9);
    let delta = 0.4;
    let m = 3000;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..m {
        let mut r1 = Seed::new(5, i).rng(Role::Target);
        let mut s1 = LazyDiscretizer::new(&x, delta, Initial::State(0), &mut r1).unwrap();
        // symbol at index 5
        let v1 = (0..6).map(|_| s1.next_symbol().unwrap()).last().unwrap();
        let mut r2 = Seed::new(6, i).rng(Role::Target);
        let mut s2 = MarkovSource::new(&x, delta, Initial::State(0), &mut r2).unwrap();
        let v2 = (0..6).map(|_| s2.next_symbol().unwrap()).last().unwrap();
        a.push(v1 as f64);
        b.push(v2 as f64);
    }
    let p = exact::discretized_transition_matrix(&x, 5.0 * delta).unwrap();
    for s in 0..3 {
        let fa = a.iter().filter(|&&v| v == s as f64).count() as f64 / m as f64;
        let fb = b.iter().filter(|&&v| v == s as f64).count() as f64 / m as f64;
        assert!((fa - p[(0, s)]).abs() < 0.035, "lazy {fa} vs {}", p[(0, s)]);
        assert!((fb - p[(0, s)]).abs() < 0.035, "markov {fb} vs {}", p[(0, s)]);
    }
}

#[test]
fn seeds_are_reproducible_and_roles_independent() {
    let x = fixtures::two_state(1.0, 2.0);
    let s = Seed::new(11, 4);
    let a = simulate(&x, 100.0, &mut s.rng(Role::X), Initial::Stationary).unwrap();
    let b = simulate(&x, 100.0, &mut s.rng(Role::X), Initial::Stationary).unwrap();
    let c = simulate(&x, 100.0, &mut s.rng(Role::XPrime), Initial::Stationary).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn trajectory_csv_round_trip() {
    let x = fixtures::biased_cycle(0.7);
    let traj = simulate(&x, 20.0, &mut Seed::new(2, 0).rng(Role::X), Initial::Stationary).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, x.states(), Some(Seed::new(2, 0))).unwrap();
    let back = waitent::pathsim::Trajectory::read_csv(&buf[..], x.states()).unwrap();
    assert_eq!(back.initial_state(), traj.initial_state());
    assert_eq!(back.post_jump_states(), traj.post_jump_states());
    assert_eq!(back.horizon(), traj.horizon());
    for (p, q) in back.jump_times().iter().zip(traj.jump_times()) {
        assert_eq!(p, q);
    }
}
