use std::path::Path;

use stringnet::network::{AlphaSpec, BoundaryKind};
use stringnet_cli::commands::Sweep;
use stringnet_cli::{exit, RunConfig};

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let cfg = RunConfig::load(&path).unwrap();
        let again = RunConfig::from_json(&cfg.to_json(), "round trip").unwrap();
        let (a, b) = (cfg.network().unwrap(), again.network().unwrap());
        let (ta, tb) = (&a.tree, &b.tree);
        assert_eq!(ta.node_count(), tb.node_count());
        assert_eq!(ta.root_bc(), tb.root_bc());
        for n in 0..ta.node_count() {
            assert_eq!(ta.label(n), tb.label(n));
            assert_eq!(ta.alpha(n), tb.alpha(n));
            assert_eq!(ta.children(n), tb.children(n));
            if n > 0 {
                assert_eq!(ta.parent_node(n), tb.parent_node(n));
                assert_eq!(ta.speed(n).to_bits(), tb.speed(n).to_bits());
            }
        }
        assert_eq!(ta, tb);
        assert_eq!(a.rescaled, b.rescaled);
        assert_eq!(cfg.initial_data(&a).unwrap(), again.initial_data(&b).unwrap());
        assert_eq!(RunConfig { source: again.source.clone(), ..cfg }, again);
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn alpha_forms() {
    let base = r#"{"network": {"nodes": 4, "edges": [
        {"from": 0, "to": 1, "speed": 1}, {"from": 1, "to": 2, "speed": 1}, {"from": 1, "to": 3, "speed": 1}],
        "alpha": ALPHA, "root_bc": "dirichlet"}}"#;
    let parse = |a: &str| RunConfig::from_json(&base.replace("ALPHA", a), "t").unwrap();
    assert_eq!(parse("0.5").network.alpha, AlphaSpec::Uniform(0.5));
    assert!(matches!(parse("\"fts\"").network.alpha, AlphaSpec::Rule(_)));
    let per_node = parse(r#"{"1": 1.0}"#);
    assert_eq!(per_node.network().unwrap().tree.alpha(1), Some(1.0));
    assert_eq!(per_node.network.root_bc, BoundaryKind::Dirichlet);
    let bad = RunConfig::from_json(&base.replace("ALPHA", r#"{"one": 1.0}"#), "t").unwrap_err();
    assert_eq!(bad.exit_code(), exit::CONFIG);
}

#[test]
fn errors_name_the_field() {
    let text = r#"{"network": {"nodes": 2, "edges": [{"from": 0, "to": 1, "speed": "fast"}],
        "alpha": 0, "root_bc": "dirichlet"}}"#;
    let err = RunConfig::from_json(text, "net.json").unwrap_err().to_string();
    assert!(err.starts_with("net.json: network.edges[0].speed:"), "{err}");

    let text = r#"{"network": {"nodes": 2, "edges": [{"from": 0, "to": 1, "speed": 1}],
        "alpha": 0, "root_bc": "dirichlet"},
        "initial": {"edges": [{"edge": [0, 1], "displacement": {"kind": "gaussian", "center": 0.02, "width": 0.1, "amplitude": 1}}]}}"#;
    let cfg = RunConfig::from_json(text, "net.json").unwrap();
    let err = cfg.initial_data(&cfg.network().unwrap()).unwrap_err().to_string();
    assert!(err.contains("initial.edges[0].displacement"), "{err}");
}

#[test]
fn initial_data_follows_labels() {
    // Root neighbour is label 2, so internal numbering differs from labels.
    let text = r#"{"network": {"nodes": 3, "edges": [{"from": 2, "to": 1, "speed": 1}, {"from": 0, "to": 2, "speed": 2}],
        "alpha": 0, "root_bc": "neumann"},
        "initial": {"edges": [{"edge": [1, 2], "velocity": {"kind": "sine", "mode": 2, "amplitude": 1}}]}}"#;
    let cfg = RunConfig::from_json(text, "t").unwrap();
    let net = cfg.network().unwrap();
    let id = net.edge_between(2, 1).unwrap();
    assert_eq!(net.endpoints(id), (2, 1));
    assert_eq!(net.tree.speed(id), 1.0);
    let data = cfg.initial_data(&net).unwrap();
    assert_ne!(data.edge(id).velocity, stringnet::charsim::Profile::Zero);
    assert_eq!(data.edge(3 - id).velocity, stringnet::charsim::Profile::Zero);
    assert!(net.edge_between(0, 1).is_none());
}

#[test]
fn sweep_grammar() {
    let s = Sweep::parse("alpha1=-1:2.5:0.5").unwrap();
    assert_eq!(s.alpha1.unwrap(), [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5]);
    assert!(s.alpha2.is_none());
    let s = Sweep::parse("alpha1=0:1:0.5, alpha2=2:2:1").unwrap();
    assert_eq!((s.alpha1.unwrap().len(), s.alpha2.unwrap()), (3, vec![2.0]));
    for bad in ["", "beta=0:1:1", "alpha1=0:1", "alpha1=1:0:0.1", "alpha1=0:1:0", "alpha1=0:1:1,alpha1=0:1:1"] {
        assert!(Sweep::parse(bad).is_err(), "{bad}");
    }
}
