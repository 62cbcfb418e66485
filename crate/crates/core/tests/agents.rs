use motor_design::agents::{oracle_shortest, play, Agent, GreedyAgent, OracleAgent, RandomAgent};
use motor_design::catalog::{builtin_catalog, feasible_points, standard_catalog, MachineVariant};
use motor_design::env::{Action, DesignEnv, DoneCause, RewardConfig, NUM_ACTIONS};
use motor_design::error::Result;
use motor_design::surrogate::{evaluate_point, LatticePoint};

fn catalog() -> Vec<MachineVariant> {
    standard_catalog(2024, &[1, 2, 3]).unwrap()
}

#[test]
fn every_variant_has_a_certified_feasible_point() {
    for v in catalog() {
        let base = v.base().unwrap();
        assert!(v.feasible_exists);
        let witness = feasible_points(&base, &v).next().expect("feasible point");
        assert!(base.contains(witness));
        let start = v.initial_point().unwrap();
        assert!(base.contains(start));
        assert_eq!(base.design(start), v.initial_design);
    }
}

#[test]
fn oracle_witnesses_replay_to_a_win() {
    let mut env = DesignEnv::new(RewardConfig::default()).unwrap();
    for v in catalog() {
        let r = oracle_shortest(&v).unwrap();
        let steps = r.shortest_steps.expect("reachable");
        assert_eq!(r.witness.len() as u32, steps);
        env.reset(&v).unwrap();
        if steps == 0 {
            assert!(env.flags().is_clear());
            continue;
        }
        for (k, &a) in r.witness.iter().enumerate() {
            let s = env.step(a).unwrap();
            assert!(!s.info.clamped && !s.info.revisit);
            assert_eq!(s.done, k + 1 == r.witness.len());
        }
        assert_eq!(env.done(), Some(DoneCause::Win));
    }
}

/// No action sequence shorter than the BFS answer reaches a feasible point.
#[test]
fn oracle_is_optimal_on_short_paths() {
    for v in catalog().iter().step_by(4).take(20) {
        let steps = oracle_shortest(v).unwrap().shortest_steps.unwrap();
        let base = v.base().unwrap();
        let start = v.initial_point().unwrap();
        let limit = steps.min(6);
        let mut frontier = vec![start];
        for depth in 0..limit {
            for &p in &frontier {
                assert!(
                    !v.is_feasible(&evaluate_point(&base, p)),
                    "{} feasible at depth {depth} < {steps}",
                    v.label()
                );
            }
            frontier = frontier
                .iter()
                .flat_map(|&p| Action::ALL.iter().filter_map(move |a| a.apply(p, &base)))
                .collect();
            frontier.sort_by_key(|p: &LatticePoint| (p.length, p.turns, p.tooth_tip));
            frontier.dedup();
        }
        if steps <= 6 {
            assert!(frontier.iter().any(|&p| v.is_feasible(&evaluate_point(&base, p))));
        }
    }
}

#[test]
fn random_actions_are_uniform() {
    struct Counting {
        inner: RandomAgent,
        counts: [usize; NUM_ACTIONS],
    }
    impl Agent for Counting {
        fn name(&self) -> &'static str {
            "counting"
        }
        fn act(&mut self, env: &DesignEnv) -> Result<Action> {
            let a = self.inner.act(env)?;
            self.counts[a.index()] += 1;
            Ok(a)
        }
    }
    let variants = catalog();
    let mut agent = Counting {
        inner: RandomAgent::new(99),
        counts: [0; NUM_ACTIONS],
    };
    let mut env = DesignEnv::new(RewardConfig::default()).unwrap();
    for e in 0..1000 {
        env.reset(&variants[e % variants.len()]).unwrap();
        play(&mut env, &mut agent).unwrap();
    }
    let total: usize = agent.counts.iter().sum();
    for c in agent.counts {
        let share = c as f64 / total as f64;
        assert!((share - 1.0 / 6.0).abs() < 0.01, "{:?}", agent.counts);
    }
}

#[test]
fn greedy_is_deterministic_and_oracle_always_wins() {
    let mut env = DesignEnv::new(RewardConfig::default()).unwrap();
    for v in catalog().iter().step_by(3) {
        env.reset(v).unwrap();
        let a = play(&mut env, &mut GreedyAgent).unwrap();
        env.reset(v).unwrap();
        assert_eq!(play(&mut env, &mut GreedyAgent).unwrap(), a);

        env.reset(v).unwrap();
        let o = play(&mut env, &mut OracleAgent::default()).unwrap();
        assert!(o.won());
        let best = oracle_shortest(v).unwrap().shortest_steps.unwrap().max(1);
        assert_eq!(o.steps(), best);
        if a.won() {
            assert!(a.steps() >= best);
        }
    }
}

#[test]
fn lattice_sizes() {
    for base in builtin_catalog() {
        assert_eq!(base.lattice_points().count(), base.lattice_size());
        assert!(base.contains(LatticePoint::ORIGIN));
    }
}
