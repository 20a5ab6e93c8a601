use gridrestore::bnb::{solve_milp, BnbOptions};
use gridrestore::formulation::*;
use gridrestore::milp::MilpStatus;
use gridrestore::netgraph::{preassign_ders, NetworkModel, PreassignRule};
use gridrestore::uncertainty::{sample_scenarios, BudgetSpec, LineModes, RepairMode, RepairModeTable};
use gridrestore::netgraph::LineKey;
use std::time::Instant;

fn net6() -> NetworkModel {
    let json = r#"{
        "nodes": [
            {"id":1,"load":0.0,"priority":0.0,"max_gen":10.0,"substation":true},
            {"id":2,"load":1.0,"priority":1.0,"max_gen":0.0},
            {"id":3,"load":1.0,"priority":1.0,"max_gen":0.0},
            {"id":4,"load":1.0,"priority":2.0,"max_gen":0.0},
            {"id":5,"load":1.0,"priority":1.0,"max_gen":0.0},
            {"id":6,"load":1.0,"priority":3.0,"max_gen":0.0}
        ],
        "edges": [
            {"from":1,"to":2,"max_flow":10.0},
            {"from":1,"to":3,"max_flow":10.0},
            {"from":3,"to":4,"max_flow":10.0,"damaged":true},
            {"from":1,"to":5,"max_flow":10.0,"damaged":true},
            {"from":5,"to":6,"max_flow":10.0}
        ]
    }"#;
    let mut net = NetworkModel::from_json(json).unwrap();
    let picked = preassign_ders(&net, &net.damaged_indices(), &PreassignRule::default());
    net.mark_candidates(&picked);
    net
}

#[test]
fn solve_toy_extensive() {
    let net = net6();
    let table = RepairModeTable {
        lines: vec![
            LineModes { line: LineKey::new(1,5), modes: vec![
                RepairMode { mean_resource: 5.0, scale: 3.0 },
                RepairMode { mean_resource: 10.0, scale: 1.0 }]},
            LineModes { line: LineKey::new(3,4), modes: vec![
                RepairMode { mean_resource: 5.0, scale: 3.0 },
                RepairMode { mean_resource: 10.0, scale: 1.0 }]},
        ],
        shape: 2.0, sigma: 1.0, saturation: (1.0, 15.0),
    };
    let scen = sample_scenarios(&table, 2, 4, &BudgetSpec::Constant(12.0), 7).unwrap();
    let fleet = FleetSpec { ders: vec![DerSpec { id: 0, capacity: 5.0,
        travel: vec![TravelTime { from: 4, to: 5, steps: 2 }]}]};
    let risk = RiskConfig { lambda: 1.0, alpha: 0.8 };
    let p = build_extensive(&net, &scen, &fleet, &risk, 4).unwrap();
    eprintln!("vars={} rows={}", p.num_vars(), p.num_rows());
    let t0 = Instant::now();
    let sol = solve_milp(&p, &BnbOptions::default());
    eprintln!("status={:?} obj={} nodes={} time={:?}", sol.status, sol.objective, sol.node_count, t0.elapsed());
    assert_eq!(sol.status, MilpStatus::Optimal);
    assert!(p.check_point(&sol.values, 1e-6).is_empty());
}

#[test]
fn profile_toy() {
    let net = net6();
    let table = RepairModeTable {
        lines: vec![
            LineModes { line: LineKey::new(1,5), modes: vec![
                RepairMode { mean_resource: 5.0, scale: 3.0 },
                RepairMode { mean_resource: 10.0, scale: 1.0 }]},
            LineModes { line: LineKey::new(3,4), modes: vec![
                RepairMode { mean_resource: 5.0, scale: 3.0 },
                RepairMode { mean_resource: 10.0, scale: 1.0 }]},
        ],
        shape: 2.0, sigma: 1.0, saturation: (1.0, 15.0),
    };
    let scen = sample_scenarios(&table, 2, 4, &BudgetSpec::Constant(12.0), 7).unwrap();
    let fleet = FleetSpec { ders: vec![DerSpec { id: 0, capacity: 5.0,
        travel: vec![TravelTime { from: 4, to: 5, steps: 2 }]}]};
    let risk = RiskConfig { lambda: 1.0, alpha: 0.8 };
    let p = build_extensive(&net, &scen, &fleet, &risk, 4).unwrap();
    let lp = gridrestore::simplex::solve_lp(&p, &gridrestore::simplex::SimplexOptions::default());
    eprintln!("root LP: obj={} iters={}", lp.objective, lp.iterations);
    let sol = solve_milp(&p, &BnbOptions::default());
    for r in sol.log.iter().take(30) {
        eprintln!("t={:.2} nodes={} inc={:.4} bound={:.4} gap={:.4}", r.elapsed_s, r.nodes, r.incumbent, r.best_bound, r.gap);
    }
    eprintln!("...final: {:?} nodes={}", sol.objective, sol.node_count);
}
