//! Property tests over the public API.

use covswitch::mldm::HistoryWindow;
use covswitch::motion::{discrepancy, smooth_kinodynamic, transition_cost};
use covswitch::planners::{utility, walk_rewards};
use covswitch::risk::policy_risk;
use covswitch::roadmap::{build_local_irm, NodeKind, RoadmapGraph, Scope};
use covswitch::world::{sense, CaveParams, MazeParams, Occupancy, SubwayParams, TerrainRisk};
use covswitch::{
    astar, cvar, decide, edge_risk, p_hat, plan_local, BeliefGrid, Candidate, Cell, GeneratorParams, Grid,
    KinodynamicSpec, Point, Pose, RewardModel, RiskCache, RiskConfig, RiskField, SensorSpec, SwitchConfig,
    WorldModel,
};
use proptest::prelude::*;
use std::sync::Arc;

fn candidate(scope: Scope) -> impl Strategy<Value = Candidate> {
    (0.0..50.0f64, 0u32..=10, 0.0..4.0f64, 0.0..4.0f64).prop_map(move |(u, h, j, d)| Candidate {
        scope,
        utility: u,
        risk: j,
        discrepancy: d,
        h: h as f64,
    })
}

fn switch_config() -> impl Strategy<Value = SwitchConfig> {
    (0.1..3.0f64, 0.1..3.0f64).prop_map(|(j, d)| SwitchConfig {
        j_max: j,
        d_max: d,
        ..SwitchConfig::default()
    })
}

fn small_graph() -> impl Strategy<Value = (RoadmapGraph, usize)> {
    (2usize..=7, any::<u64>(), 1usize..=4).prop_map(|(n, seed, horizon)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut g = RoadmapGraph::new(Scope::Local, horizon);
        for i in 0..n {
            g.add_node(Cell::new(i as i32, 0), NodeKind::Lattice, rng.random_range(0.0..4.0));
        }
        for i in 1..n {
            let j = rng.random_range(0..i);
            g.add_edge(j, i, rng.random_range(0.5..2.0), rng.random_range(0.0..1.0), Vec::new());
        }
        for i in 0..n {
            for j in i + 1..n {
                if g.edge_between(i, j).is_none() && rng.random_bool(0.3) {
                    g.add_edge(i, j, rng.random_range(0.5..2.0), rng.random_range(0.0..1.0), Vec::new());
                }
            }
        }
        g.robot = rng.random_range(0..n);
        (g, horizon)
    })
}

fn open_world(w: usize, h: usize, obstacles: &[(i32, i32)]) -> WorldModel {
    let mut occ = Grid::filled(w, h, Occupancy::Free);
    for &(x, y) in obstacles {
        if (x, y) != (0, 0) {
            occ.set(Cell::new(x, y), Occupancy::Obstacle);
        }
    }
    WorldModel::new(
        0.5,
        occ,
        Grid::filled(w, h, TerrainRisk::default()),
        Cell::new(0, 0),
        0,
        GeneratorParams::Handmade { name: "prop".into() },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn argmax_is_respected_without_override(l in candidate(Scope::Local), g in candidate(Scope::Global), cfg in switch_config()) {
        let d = decide(Some(&l), Some(&g), &cfg).unwrap();
        let (ls, gs) = (d.local.as_ref().unwrap().score, d.global.as_ref().unwrap().score);
        if !d.overridden {
            let best = if d.chosen == Scope::Local { ls } else { gs };
            prop_assert!(best >= ls.max(gs));
        }
        prop_assert_eq!(d.argmax, if gs > ls { Scope::Global } else { Scope::Local });
    }

    #[test]
    fn override_is_sound(l in candidate(Scope::Local), g in candidate(Scope::Global), cfg in switch_config()) {
        let d = decide(Some(&l), Some(&g), &cfg).unwrap();
        let winner = if d.argmax == Scope::Local { l } else { g };
        let violates = winner.risk > cfg.j_max || winner.discrepancy > cfg.d_max;
        prop_assert_eq!(d.overridden, violates);
        prop_assert_eq!(d.reason.is_some(), violates);
        let both_ok = [l, g].iter().all(|c| c.risk <= cfg.j_max && c.discrepancy <= cfg.d_max);
        if both_ok {
            prop_assert!(!d.overridden);
        }
    }

    #[test]
    fn single_candidate_is_kept(c in candidate(Scope::Global), cfg in switch_config()) {
        let d = decide(None, Some(&c), &cfg).unwrap();
        prop_assert_eq!(d.chosen, Scope::Global);
        prop_assert!(!d.overridden);
    }

    #[test]
    fn decisions_are_pure(l in candidate(Scope::Local), g in candidate(Scope::Global), cfg in switch_config()) {
        prop_assert_eq!(decide(Some(&l), Some(&g), &cfg).unwrap(), decide(Some(&l), Some(&g), &cfg).unwrap());
    }

    #[test]
    fn p_hat_is_finite_and_monotone(h in 0u32..20, j in 0.0..10.0f64, d in 0.0..10.0f64, dj in 0.0..5.0f64) {
        let cfg = SwitchConfig::default();
        let p = p_hat(h as f64, j, d, &cfg);
        prop_assert!(p.is_finite() && p >= 0.0);
        prop_assert!(p_hat(h as f64, j + dj, d, &cfg) <= p);
        prop_assert!(p_hat(h as f64, j, d + dj, &cfg) <= p);
        prop_assert!(p_hat(h as f64 + 1.0, j, d, &cfg) >= p);
    }

    #[test]
    fn history_window_counts_recent_successes(cap in 1usize..12, flags in prop::collection::vec(any::<bool>(), 0..40)) {
        let mut w = HistoryWindow::new(cap).unwrap();
        for &f in &flags {
            w.record(f);
        }
        let start = flags.len().saturating_sub(cap);
        prop_assert_eq!(w.h(), flags[start..].iter().filter(|&&f| f).count());
        prop_assert!(w.len() <= cap);
    }

    #[test]
    fn cvar_bounds(samples in prop::collection::vec(0.0..100.0f64, 1..200), a1 in 0.01..0.99f64, a2 in 0.01..0.99f64) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let c_lo = cvar(&samples, lo).unwrap();
        let c_hi = cvar(&samples, hi).unwrap();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        prop_assert!(c_lo <= c_hi + 1e-12);
        prop_assert!(c_lo >= mean - 1e-9);
        prop_assert!(mean >= 0.0);
    }

    #[test]
    fn edge_risk_is_deterministic_and_symmetric(seed in any::<u64>(), mu in 0.0..2.0f64, sigma in 0.0..1.0f64, x in 1i32..6, y in 0i32..6) {
        let field = RiskField::new(Grid::filled(8, 8, TerrainRisk::new(mu, sigma)), RiskConfig::default(), seed).unwrap();
        let (a, b) = (Cell::new(0, 0), Cell::new(x, y));
        let r = edge_risk(&field, a, b).unwrap();
        prop_assert_eq!(r, edge_risk(&field, a, b).unwrap());
        prop_assert_eq!(r, edge_risk(&field, b, a).unwrap());
        prop_assert!(r >= 0.0);
    }

    #[test]
    fn policy_risk_is_additive((graph, horizon) in small_graph()) {
        let reward = RewardModel::default();
        if let Some(p) = plan_local(&graph, &reward, horizon, usize::MAX) {
            let j = policy_risk(&p, &graph).unwrap();
            prop_assert_eq!(j, p.risk);
            for split in 1..p.edges.len() {
                let head: f64 = p.edges[..split].iter().map(|&e| graph.edges[e].risk).sum();
                let tail: f64 = p.edges[split..].iter().map(|&e| graph.edges[e].risk).sum();
                prop_assert!((head + tail - j).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn local_policy_is_consistent_walk((graph, horizon) in small_graph()) {
        let reward = RewardModel::default();
        if let Some(p) = plan_local(&graph, &reward, horizon, usize::MAX) {
            prop_assert_eq!(p.nodes[0], graph.robot);
            prop_assert!(p.edges.len() <= horizon);
            let (edges, rewards) = walk_rewards(&graph, &p.nodes, &reward).unwrap();
            prop_assert_eq!(&edges, &p.edges);
            prop_assert_eq!(&rewards, &p.step_rewards);
            prop_assert!((utility(&rewards, reward.gamma_local) - p.utility).abs() <= 1e-9);
            prop_assert_eq!(Some(p.clone()), plan_local(&graph, &reward, horizon, usize::MAX));
        }
    }

    #[test]
    fn local_argmax_survives_reward_scaling((graph, horizon) in small_graph(), k in 0.1..10.0f64) {
        let reward = RewardModel::default();
        let a = plan_local(&graph, &reward, horizon, usize::MAX);
        let b = plan_local(&graph, &reward.scaled(k), horizon, usize::MAX);
        match (a, b) {
            (Some(a), Some(b)) => {
                prop_assert!((b.utility - k * a.utility).abs() <= 1e-9 * (1.0 + b.utility.abs()));
            }
            (None, None) => {}
            (a, b) => prop_assert!(false, "scaling changed existence: {:?} vs {:?}", a.is_some(), b.is_some()),
        }
    }

    #[test]
    fn astar_path_is_valid(obstacles in prop::collection::vec((0i32..12, 0i32..12), 0..40), gx in 0i32..12, gy in 0i32..12) {
        let world = open_world(12, 12, &obstacles);
        let belief = BeliefGrid::fully_known(&world);
        let risk = RiskField::from_world(&world, RiskConfig::default(), 0).unwrap();
        let goal = Cell::new(gx, gy);
        if let Some(p) = astar(&belief, &risk, Cell::new(0, 0), goal, 1.0) {
            prop_assert_eq!(p.cells[0], Cell::new(0, 0));
            prop_assert_eq!(*p.cells.last().unwrap(), goal);
            let fixed: u64 = p.cells.windows(2).map(|w| transition_cost(&belief, &risk, w[0], w[1], 1.0).unwrap()).sum();
            prop_assert_eq!((p.cost * 1e6).round() as u64, fixed);
            prop_assert!(p.cells.iter().all(|c| world.is_free(*c)));
        }
    }

    #[test]
    fn straight_reference_has_no_discrepancy(len in 2usize..12, dir in 0usize..8) {
        let world = open_world(30, 30, &[]);
        let belief = BeliefGrid::fully_known(&world);
        let (dx, dy) = [(1, 0), (0, 1), (1, 1), (-1, 1), (-1, 0), (0, -1), (-1, -1), (1, -1)][dir];
        let start = Cell::new(15, 15);
        let reference: Vec<Point> = (0..len as i32)
            .map(|k| Point::center_of(start.offset(k * dx, k * dy), 0.5))
            .collect();
        let exec = smooth_kinodynamic(&reference, &KinodynamicSpec::default(), &belief);
        prop_assert_eq!(discrepancy(&reference, &exec).unwrap(), 0.0);
    }

    #[test]
    fn generators_are_deterministic(seed in 0u64..1000) {
        let params = [
            GeneratorParams::Maze(MazeParams::new(25, 25, 0.5)),
            GeneratorParams::Subway(SubwayParams::new(4, 4.0, 8.0)),
            GeneratorParams::Cave(CaveParams::new(30, 30, 0.3)),
        ];
        for p in &params {
            let a = p.generate(seed).unwrap();
            prop_assert_eq!(&a, &p.generate(seed).unwrap());
            let reach = a.reachable_free_count() as f64;
            prop_assert!(reach >= 0.95 * a.free_cell_count() as f64);
        }
    }

    #[test]
    fn belief_agrees_with_ground_truth(seed in 0u64..200, steps in prop::collection::vec((0i32..40, 0i32..40), 1..8)) {
        let world = GeneratorParams::Cave(CaveParams::new(40, 40, 0.3)).generate(seed).unwrap();
        let mut belief = BeliefGrid::for_world(&world);
        let sensor = SensorSpec::default();
        let mut last = 0;
        for (x, y) in steps {
            let c = Cell::new(x, y);
            if !world.is_free(c) {
                continue;
            }
            sense(&world, &mut belief, &Pose::at_cell(c, world.cell_size()), &sensor).unwrap();
            prop_assert!(belief.covered_count() >= last);
            last = belief.covered_count();
        }
        for c in world.occupancy().cells() {
            if belief.is_free(c) {
                prop_assert!(world.is_free(c));
            }
            if belief.is_obstacle(c) {
                prop_assert!(world.is_obstacle(c));
            }
        }
    }

    #[test]
    fn local_irm_is_bounded_and_connected(seed in 0u64..100, radius in 1.0..6.0f64) {
        let world = GeneratorParams::Cave(CaveParams::new(40, 40, 0.3)).generate(seed).unwrap();
        let mut belief = BeliefGrid::for_world(&world);
        let sensor = SensorSpec::default();
        let pose = Pose::at_cell(world.spawn(), world.cell_size());
        sense(&world, &mut belief, &pose, &sensor).unwrap();
        let field = RiskField::from_world(&world, RiskConfig::default(), seed).unwrap();
        let mut cache = RiskCache::new(Arc::new(field));
        let g = build_local_irm(&belief, &mut cache, world.spawn(), radius, 10, &sensor).unwrap();
        let side = 2.0 * radius / world.cell_size() + 1.0;
        prop_assert!(g.nodes.len() as f64 <= side * side);
        prop_assert!(g.is_connected());
        prop_assert!(g.nodes.iter().all(|n| belief.is_free(n.cell)));
    }
}
