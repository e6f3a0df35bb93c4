//! Persistence formats: world JSON, graph JSON, TOML configs.

use covswitch::roadmap::{build_local_irm, GlobalIrm, GlobalIrmConfig};
use covswitch::sim::load_batch;
use covswitch::world::{load_world, save_world, sense, CaveParams, MazeParams, SubwayParams, WorldDocument};
use covswitch::{
    BeliefGrid, Error, GeneratorParams, PlannerKind, Pose, RiskCache, RiskConfig, RiskField, RoadmapGraph,
    RunConfig, SensorSpec, WorldModel,
};
use std::sync::Arc;

fn worlds() -> Vec<WorldModel> {
    vec![
        GeneratorParams::Maze(MazeParams::new(31, 31, 0.6)).generate(5).unwrap(),
        GeneratorParams::Subway(SubwayParams::new(5, 4.0, 9.0)).generate(5).unwrap(),
        GeneratorParams::Cave(CaveParams::new(40, 30, 0.4)).generate(5).unwrap(),
    ]
}

#[test]
fn world_json_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for (i, w) in worlds().into_iter().enumerate() {
        let path = dir.path().join(format!("w{i}.json"));
        save_world(&w, &path).unwrap();
        let back = load_world(&path).unwrap();
        assert_eq!(back, w);
        for (a, b) in w.terrain().as_slice().iter().zip(back.terrain().as_slice()) {
            assert_eq!(a.mu.to_bits(), b.mu.to_bits());
            assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
        }
        // Saving the loaded world reproduces the file byte for byte.
        let again = dir.path().join(format!("w{i}-again.json"));
        save_world(&back, &again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn world_json_rejects_truncated_arrays() {
    let w = &worlds()[0];
    let mut doc = WorldDocument::from(w);
    doc.mu.pop();
    assert!(matches!(WorldModel::try_from(doc), Err(Error::Malformed { .. })));
}

#[test]
fn file_generator_loads_saved_world() {
    let dir = tempfile::tempdir().unwrap();
    let w = &worlds()[1];
    let path = dir.path().join("w.json");
    save_world(w, &path).unwrap();
    let params = GeneratorParams::File {
        path: path.to_string_lossy().into_owned(),
    };
    let loaded = params.generate(999).unwrap();
    assert_eq!(loaded.occupancy(), w.occupancy());
    assert_eq!(loaded.spawn(), w.spawn());
}

#[test]
fn graph_json_round_trip() {
    let w = &worlds()[2];
    let mut belief = BeliefGrid::for_world(w);
    let sensor = SensorSpec::default();
    sense(w, &mut belief, &Pose::at_cell(w.spawn(), w.cell_size()), &sensor).unwrap();
    let field = RiskField::from_world(w, RiskConfig::default(), 1).unwrap();
    let mut cache = RiskCache::new(Arc::new(field));

    let local = build_local_irm(&belief, &mut cache, w.spawn(), 4.0, 10, &sensor).unwrap();
    let mut girm = GlobalIrm::new(GlobalIrmConfig::default(), w.spawn());
    girm.update(&belief, w.spawn(), &mut cache);
    for g in [&local, girm.graph()] {
        let text = g.to_json().unwrap();
        let back = RoadmapGraph::from_json(&text).unwrap();
        assert_eq!(&back, g);
        for n in 0..g.nodes.len() {
            assert_eq!(back.neighbors(n), g.neighbors(n));
        }
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["nodes"].is_array() && v["edges"].is_array());
    }
}

#[test]
fn graph_json_rejects_dangling_edges() {
    let text = r#"{"scope":"local","horizon":3,"robot":0,
        "nodes":[{"id":0,"cell":{"x":0,"y":0},"kind":"robot","info_gain":0.0}],
        "edges":[{"id":0,"from":0,"to":4,"length":1.0,"risk":0.0}]}"#;
    assert!(matches!(RoadmapGraph::from_json(text), Err(Error::Malformed { .. })));
}

#[test]
fn run_config_toml_round_trip() {
    let mut cfg = RunConfig::new(
        PlannerKind::Hcp,
        GeneratorParams::Subway(SubwayParams::new(6, 5.0, 10.0)),
        17,
        900,
    );
    cfg.switch.j_max = Some(0.25);
    cfg.reward.gamma_global = 0.8;
    let text = cfg.to_toml().unwrap();
    let back = RunConfig::from_toml(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
}

#[test]
fn config_errors_are_config_errors() {
    let bad = [
        // unknown key
        "planner = \"mldm\"\nstep_budget = 10\nbogus = 1\n[world]\ngenerator = \"cave\"\nwidth = 20\nheight = 20\nrisk_intensity = 0.1\n",
        // unknown planner
        "planner = \"astar\"\nstep_budget = 10\n[world]\ngenerator = \"cave\"\nwidth = 20\nheight = 20\nrisk_intensity = 0.1\n",
        // out-of-range discount
        "planner = \"mldm\"\nstep_budget = 10\n[world]\ngenerator = \"cave\"\nwidth = 20\nheight = 20\nrisk_intensity = 0.1\n[reward]\ngamma_local = 1.5\n",
        // zero budget
        "planner = \"mldm\"\nstep_budget = 0\n[world]\ngenerator = \"cave\"\nwidth = 20\nheight = 20\nrisk_intensity = 0.1\n",
        "not toml at all [",
    ];
    for text in bad {
        assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))), "accepted: {text}");
    }
}

#[test]
fn shipped_configs_load() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let maze = load_batch(&root.join("maze.toml")).unwrap();
    assert_eq!(maze.len(), 4);
    assert!(maze.iter().all(|c| c.world.kind() == "maze" && c.step_budget == 600));
    let planners: Vec<_> = maze.iter().map(|c| c.planner).collect();
    assert_eq!(planners, PlannerKind::ALL.to_vec());
    assert_eq!(load_batch(&root.join("subway.toml")).unwrap().len(), 4);
    assert_eq!(load_batch(&root.join("run.toml")).unwrap().len(), 1);
}

#[test]
fn batch_directory_of_configs() {
    let dir = tempfile::tempdir().unwrap();
    for (name, planner) in [("b.toml", "hcp"), ("a.toml", "nbv")] {
        std::fs::write(
            dir.path().join(name),
            format!("planner = \"{planner}\"\nstep_budget = 30\n[world]\ngenerator = \"cave\"\nwidth = 20\nheight = 20\nrisk_intensity = 0.1\n"),
        )
        .unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let cfgs = load_batch(dir.path()).unwrap();
    // Sorted by file name.
    assert_eq!(cfgs.iter().map(|c| c.planner).collect::<Vec<_>>(), [PlannerKind::Nbv, PlannerKind::Hcp]);
}
