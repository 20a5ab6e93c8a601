//! MILP builders: the extensive two-stage form with a CVaR tail term, the
//! wait-and-see and mean-value single-scenario variants, and per-scenario
//! Lagrangian subproblems for dual decomposition.
//!
//! Internally everything minimizes; restoration maximization is encoded
//! with negative objective coefficients and reports convert back to
//! restored units. First-stage columns are the repair-mode binaries
//! `x[line][mode]` and the tail threshold `nu`; everything else is
//! second stage, per scenario.
//!
//! Row families, per scenario unless noted:
//! - mode choice (first stage): at most one repair mode per damaged line;
//! - DER routing: one docking node per unit, one unit per node, travel-time
//!   exclusion windows, and output capped by docking status;
//! - repair scheduling: resource assignment fires exactly when a mode is
//!   chosen, repair-in-progress/operable accounting, operable status is
//!   monotone, completion within the horizon, duration at least the sampled
//!   repair time, and a per-step resource budget linearized exactly via the
//!   instance-derived bound on the mode resource;
//! - radiality (shared across scenarios): a fictitious copy of the intact
//!   topology must pick node-count-minus-one edges carrying a unit of flow
//!   to every non-substation node, and live switches are capped by both the
//!   fictitious edge choice and operable status;
//! - operation: nodal power balance with restored load, flow caps in both
//!   directions, DER injection consistency, and monotone load pickup;
//! - risk: per-scenario restoration accounting plus the tail-excess row
//!   `rest[s] + nu + Delta[s] >= 0` with `Delta[s] >= 0`.

use crate::milp::{MilpProblem, Sense, VarKind};
use crate::netgraph::{LineKey, NetworkModel, NodeId};
use crate::uncertainty::{BudgetSpec, RepairModeTable, Scenario, ScenarioSet};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("network has {0} substations; the radiality encoding needs exactly one")]
    SubstationCount(usize),
    #[error("undamaged topology is disconnected; every node must reach the substation")]
    DisconnectedNominal,
    #[error("no damaged lines; nothing to schedule")]
    NoDamage,
    #[error("node {node}: load profile shorter than horizon step {step}")]
    LoadTooShort { node: NodeId, step: u32 },
    #[error("scenario {scenario} is missing realization for line {line} mode {mode}")]
    MissingRealization {
        scenario: usize,
        line: LineKey,
        mode: u32,
    },
    #[error("horizon mismatch: scenario set has {set}, requested {requested}")]
    HorizonMismatch { set: u32, requested: u32 },
    #[error("DER {der}: travel time missing for candidate pair ({from},{to})")]
    MissingTravel { der: u32, from: NodeId, to: NodeId },
    #[error("DER {der}: travel time for ({from},{to}) must be at least 1 step")]
    BadTravel { der: u32, from: NodeId, to: NodeId },
    #[error("DER {der}: capacity must be positive")]
    BadCapacity { der: u32 },
    #[error("risk config: {0}")]
    BadRisk(String),
    #[error("dual term has {got} repair-mode coefficients, expected {expected}")]
    DualDimension { got: usize, expected: usize },
    #[error("bilinear upper bound must be finite and positive, got {0}")]
    UnboundedBilinear(f64),
    #[error(transparent)]
    Uncertainty(#[from] crate::uncertainty::UncertaintyError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TravelTime {
    pub from: NodeId,
    pub to: NodeId,
    pub steps: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerSpec {
    pub id: u32,
    pub capacity: f64,
    #[serde(default)]
    pub travel: Vec<TravelTime>,
}

impl DerSpec {
    /// Travel steps between two nodes; entries are symmetric.
    pub fn travel_steps(&self, from: NodeId, to: NodeId) -> Option<u32> {
        self.travel
            .iter()
            .find(|t| (t.from, t.to) == (from, to) || (t.from, t.to) == (to, from))
            .map(|t| t.steps)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FleetSpec {
    pub ders: Vec<DerSpec>,
}

impl FleetSpec {
    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self, BuildError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn validate(&self, candidates: &[NodeId]) -> Result<(), BuildError> {
        for der in &self.ders {
            if !(der.capacity > 0.0) {
                return Err(BuildError::BadCapacity { der: der.id });
            }
            for &i in candidates {
                for &j in candidates {
                    if i == j {
                        continue;
                    }
                    match der.travel_steps(i, j) {
                        None => {
                            return Err(BuildError::MissingTravel {
                                der: der.id,
                                from: i,
                                to: j,
                            })
                        }
                        Some(0) => {
                            return Err(BuildError::BadTravel {
                                der: der.id,
                                from: i,
                                to: j,
                            })
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        Ok(())
    }
}

/// CVaR weight and significance level for the risk-averse objective.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RiskConfig {
    pub lambda: f64,
    pub alpha: f64,
}

impl RiskConfig {
    pub fn risk_neutral() -> Self {
        RiskConfig {
            lambda: 0.0,
            alpha: 0.8,
        }
    }

    pub fn validate(&self) -> Result<(), BuildError> {
        if self.lambda < 0.0 {
            return Err(BuildError::BadRisk(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(BuildError::BadRisk(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Structured column names; shared vocabulary between the builders, the
/// solvers, the CLI outputs, and the tests.
pub mod names {
    use crate::netgraph::{LineKey, NodeId};

    pub fn x(line: LineKey, mode: u32) -> String {
        format!("x[{line}][{mode}]")
    }
    pub fn nu() -> String {
        "nu".to_string()
    }
    pub fn alpha(g: u32, i: NodeId, t: u32, s: usize) -> String {
        format!("alpha[{g}][{i}][{t}][{s}]")
    }
    pub fn pg_der(g: u32, t: u32, s: usize) -> String {
        format!("Pgd[{g}][{t}][{s}]")
    }
    pub fn pg_node(i: NodeId, t: u32, s: usize) -> String {
        format!("Pg[{i}][{t}][{s}]")
    }
    pub fn gen(i: NodeId, t: u32, s: usize) -> String {
        format!("G[{i}][{t}][{s}]")
    }
    pub fn flow(line: LineKey, t: u32, s: usize) -> String {
        format!("P[{line}][{t}][{s}]")
    }
    pub fn load_on(i: NodeId, t: u32, s: usize) -> String {
        format!("o[{i}][{t}][{s}]")
    }
    pub fn assign(line: LineKey, t: u32, s: usize) -> String {
        format!("phi[{line}][{t}][{s}]")
    }
    pub fn action(line: LineKey, t: u32, s: usize) -> String {
        format!("a[{line}][{t}][{s}]")
    }
    pub fn operable(line: LineKey, t: u32, s: usize) -> String {
        format!("mu[{line}][{t}][{s}]")
    }
    pub fn switch(line: LineKey, t: u32, s: usize) -> String {
        format!("beta[{line}][{t}][{s}]")
    }
    pub fn fict_edge(line: LineKey, t: u32) -> String {
        format!("eps[{line}][{t}]")
    }
    pub fn fict_flow(line: LineKey, t: u32) -> String {
        format!("f[{line}][{t}]")
    }
    pub fn mode_resource(line: LineKey, s: usize) -> String {
        format!("w[{line}][{s}]")
    }
    pub fn resource_use(line: LineKey, t: u32, s: usize) -> String {
        format!("z[{line}][{t}][{s}]")
    }
    pub fn excess(s: usize) -> String {
        format!("Delta[{s}]")
    }
    pub fn restoration(s: usize) -> String {
        format!("rest[{s}]")
    }
}

/// One first-stage repair-mode binary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XComponent {
    pub line: LineKey,
    pub mode: u32,
    pub name: String,
}

/// First-stage component order: damaged lines ascending by key, modes
/// ascending. This order is the contract for multipliers and branching.
pub fn x_components(
    net: &NetworkModel,
    reference: &Scenario,
) -> Result<Vec<XComponent>, BuildError> {
    let ctx = Ctx::new(net, reference, None)?;
    Ok(ctx.components())
}

/// Additional per-scenario objective terms from the nonanticipativity
/// multipliers, already projected onto this scenario's copies.
#[derive(Debug, Clone, Default)]
pub struct ScenarioDualTerm {
    pub x_coeffs: Vec<f64>,
    pub nu_coeff: f64,
}

struct Ctx<'a> {
    net: &'a NetworkModel,
    horizon: u32,
    /// Damaged lines ascending by key: (edge index, key, mode count).
    damaged: Vec<(usize, LineKey, u32)>,
    candidates: Vec<NodeId>,
    substation: NodeId,
    node_ids: Vec<NodeId>,
    /// Upper bound on per-scenario weighted restoration.
    restoration_cap: f64,
    /// Initially isolated components: (member nodes, candidate members,
    /// boundary damaged line keys). Powers the island-energization rows.
    islands: Vec<(Vec<NodeId>, Vec<NodeId>, Vec<LineKey>)>,
}

impl<'a> Ctx<'a> {
    fn new(
        net: &'a NetworkModel,
        reference: &Scenario,
        horizon: Option<u32>,
    ) -> Result<Self, BuildError> {
        if net.substation_ids.len() != 1 {
            return Err(BuildError::SubstationCount(net.substation_ids.len()));
        }
        let substation = *net.substation_ids.iter().next().unwrap();
        if net
            .connected_components(&std::collections::BTreeSet::new())
            .len()
            != 1
        {
            return Err(BuildError::DisconnectedNominal);
        }
        let horizon = horizon.unwrap_or(reference.budget.len() as u32);
        let modes = reference.modes_by_line();
        let mut damaged = Vec::new();
        for (idx, line) in net.lines.iter().enumerate() {
            if !line.damaged {
                continue;
            }
            let key = line.key();
            let mode_count = *modes.get(&key).ok_or(BuildError::MissingRealization {
                scenario: reference.id,
                line: key,
                mode: 1,
            })?;
            damaged.push((idx, key, mode_count));
        }
        if damaged.is_empty() {
            return Err(BuildError::NoDamage);
        }
        damaged.sort_by_key(|&(_, key, _)| key);
        let node_ids = net.node_ids();
        let mut restoration_cap = 0.0;
        for bus in &net.buses {
            for t in 1..=horizon {
                let p = bus
                    .load
                    .at(t)
                    .ok_or(BuildError::LoadTooShort { node: bus.id, step: t })?;
                restoration_cap += bus.priority * p;
            }
        }
        let candidates = net.candidate_ids();
        // Initially isolated components and their damaged boundary; in a
        // forest every edge leaving a component is damaged, so a load in an
        // island is only servable once a DER docks inside or a boundary
        // line becomes operable.
        let damage_set: std::collections::BTreeSet<usize> =
            damaged.iter().map(|&(idx, _, _)| idx).collect();
        let mut islands = Vec::new();
        for comp in net.connected_components(&damage_set) {
            if comp.contains(&substation) {
                continue;
            }
            let members: Vec<NodeId> = comp.iter().copied().collect();
            let cand_members: Vec<NodeId> = candidates
                .iter()
                .copied()
                .filter(|c| comp.contains(c))
                .collect();
            let boundary: Vec<LineKey> = damaged
                .iter()
                .filter(|&&(idx, _, _)| {
                    let l = &net.lines[idx];
                    comp.contains(&l.from) || comp.contains(&l.to)
                })
                .map(|&(_, key, _)| key)
                .collect();
            islands.push((members, cand_members, boundary));
        }
        Ok(Ctx {
            net,
            horizon,
            damaged,
            candidates,
            substation,
            node_ids,
            restoration_cap,
            islands,
        })
    }

    fn components(&self) -> Vec<XComponent> {
        let mut out = Vec::new();
        for &(_, key, mode_count) in &self.damaged {
            for r in 1..=mode_count {
                out.push(XComponent {
                    line: key,
                    mode: r,
                    name: names::x(key, r),
                });
            }
        }
        out
    }

    fn load(&self, i: NodeId, t: u32) -> f64 {
        self.net.bus(i).unwrap().load.at(t).unwrap()
    }

    fn priority(&self, i: NodeId) -> f64 {
        self.net.bus(i).unwrap().priority
    }

    /// Checks every damaged (line, mode) realization exists and warns once
    /// when a sampled duration cannot complete within the horizon.
    fn check_scenario(&self, s: &Scenario) -> Result<(), BuildError> {
        let mut warned = false;
        for &(_, key, mode_count) in &self.damaged {
            for r in 1..=mode_count {
                let draw = s.draw(key, r).ok_or(BuildError::MissingRealization {
                    scenario: s.id,
                    line: key,
                    mode: r,
                })?;
                if draw.duration > self.horizon && !warned {
                    eprintln!(
                        "warning: scenario {}: repair of {} mode {} needs {} steps, horizon is {}",
                        s.id, key, r, draw.duration, self.horizon
                    );
                    warned = true;
                }
            }
        }
        Ok(())
    }
}

/// Adds first-stage repair-mode binaries and their choice rows.
fn add_first_stage(p: &mut MilpProblem, ctx: &Ctx) -> Vec<usize> {
    let mut cols = Vec::new();
    for &(_, key, mode_count) in &ctx.damaged {
        for r in 1..=mode_count {
            cols.push(p.add_var(names::x(key, r), 0.0, 1.0, VarKind::Binary));
        }
    }
    let mut k = 0;
    for &(_, key, mode_count) in &ctx.damaged {
        let coeffs: Vec<(usize, f64)> =
            (0..mode_count).map(|i| (cols[k + i as usize], 1.0)).collect();
        k += mode_count as usize;
        p.add_row(format!("mode_choice[{key}]"), coeffs, Sense::Le, 1.0);
    }
    cols
}

/// Adds the fictitious radiality network: binary edge picks `eps`, flows
/// `f` bounded by node-count-minus-one, the edge-count row, and a unit
/// inflow at every non-substation node.
fn add_fictitious_network(p: &mut MilpProblem, ctx: &Ctx) {
    let n = ctx.node_ids.len() as f64;
    let big = n - 1.0;
    for line in &ctx.net.lines {
        for t in 1..=ctx.horizon {
            p.add_var(names::fict_edge(line.key(), t), 0.0, 1.0, VarKind::Binary);
        }
    }
    for line in &ctx.net.lines {
        for t in 1..=ctx.horizon {
            p.add_var(names::fict_flow(line.key(), t), -big, big, VarKind::Continuous);
        }
    }
    for t in 1..=ctx.horizon {
        let coeffs = ctx
            .net
            .lines
            .iter()
            .map(|l| (p.col(&names::fict_edge(l.key(), t)).unwrap(), 1.0))
            .collect();
        p.add_row(format!("eps_count[{t}]"), coeffs, Sense::Eq, big);
    }
    for &i in &ctx.node_ids {
        if i == ctx.substation {
            continue;
        }
        for t in 1..=ctx.horizon {
            let mut coeffs = Vec::new();
            for l in &ctx.net.lines {
                let f = p.col(&names::fict_flow(l.key(), t)).unwrap();
                if l.to == i {
                    coeffs.push((f, 1.0));
                } else if l.from == i {
                    coeffs.push((f, -1.0));
                }
            }
            p.add_row(format!("fict_balance[{i}][{t}]"), coeffs, Sense::Eq, 1.0);
        }
    }
    for l in &ctx.net.lines {
        for t in 1..=ctx.horizon {
            let f = p.col(&names::fict_flow(l.key(), t)).unwrap();
            let e = p.col(&names::fict_edge(l.key(), t)).unwrap();
            p.add_row(
                format!("fict_cap_pos[{}][{t}]", l.key()),
                vec![(f, 1.0), (e, -big)],
                Sense::Le,
                0.0,
            );
            p.add_row(
                format!("fict_cap_neg[{}][{t}]", l.key()),
                vec![(f, -1.0), (e, -big)],
                Sense::Le,
                0.0,
            );
        }
    }
}

/// Big-M linearization of `z = a * w` for binary `a` and `w in [0, w_upper]`.
/// Adds the `z` column and four rows; at any feasible integer point `z`
/// equals the product exactly.
pub fn linearize_bilinear(
    p: &mut MilpProblem,
    a_col: usize,
    w_col: usize,
    w_upper: f64,
    z_name: &str,
) -> Result<usize, BuildError> {
    if !w_upper.is_finite() || w_upper <= 0.0 {
        return Err(BuildError::UnboundedBilinear(w_upper));
    }
    let z = p.add_var(z_name.to_string(), 0.0, w_upper, VarKind::Continuous);
    p.add_row(format!("{z_name}:nonneg"), vec![(z, 1.0)], Sense::Ge, 0.0);
    p.add_row(
        format!("{z_name}:cap_a"),
        vec![(z, 1.0), (a_col, -w_upper)],
        Sense::Le,
        0.0,
    );
    p.add_row(
        format!("{z_name}:cap_w"),
        vec![(z, 1.0), (w_col, -1.0)],
        Sense::Le,
        0.0,
    );
    p.add_row(
        format!("{z_name}:tight"),
        vec![(w_col, 1.0), (z, -1.0), (a_col, w_upper)],
        Sense::Le,
        w_upper,
    );
    Ok(z)
}

/// Adds all second-stage variables and rows for one scenario. First-stage
/// x columns are passed in; the fictitious network must already exist.
fn add_scenario_stage(
    p: &mut MilpProblem,
    ctx: &Ctx,
    fleet: &FleetSpec,
    scen: &Scenario,
    x_cols: &[usize],
) -> Result<(), BuildError> {
    let s = scen.id;
    let horizon = ctx.horizon;
    let cap = ctx.restoration_cap;
    let total_der_cap: f64 = fleet.ders.iter().map(|d| d.capacity).sum();

    // Columns.
    for der in &fleet.ders {
        for &i in &ctx.candidates {
            for t in 1..=horizon {
                p.add_var(names::alpha(der.id, i, t, s), 0.0, 1.0, VarKind::Binary);
            }
        }
    }
    for der in &fleet.ders {
        for t in 1..=horizon {
            p.add_var(
                names::pg_der(der.id, t, s),
                0.0,
                der.capacity,
                VarKind::Continuous,
            );
        }
    }
    for &i in &ctx.candidates {
        for t in 1..=horizon {
            p.add_var(
                names::pg_node(i, t, s),
                0.0,
                total_der_cap.max(0.0),
                VarKind::Continuous,
            );
        }
    }
    for bus in &ctx.net.buses {
        if bus.substation {
            for t in 1..=horizon {
                p.add_var(names::gen(bus.id, t, s), 0.0, bus.max_gen, VarKind::Continuous);
            }
        }
    }
    for line in &ctx.net.lines {
        for t in 1..=horizon {
            p.add_var(
                names::flow(line.key(), t, s),
                -line.max_flow,
                line.max_flow,
                VarKind::Continuous,
            );
        }
    }
    for &i in &ctx.node_ids {
        for t in 1..=horizon {
            p.add_var(names::load_on(i, t, s), 0.0, 1.0, VarKind::Binary);
        }
    }
    for &(_, key, _) in &ctx.damaged {
        for t in 1..=horizon {
            p.add_var(names::assign(key, t, s), 0.0, 1.0, VarKind::Binary);
        }
    }
    for &(_, key, _) in &ctx.damaged {
        for t in 1..=horizon {
            p.add_var(names::action(key, t, s), 0.0, 1.0, VarKind::Binary);
        }
    }
    for &(_, key, _) in &ctx.damaged {
        for t in 1..=horizon {
            p.add_var(names::operable(key, t, s), 0.0, 1.0, VarKind::Binary);
        }
    }
    for line in &ctx.net.lines {
        for t in 1..=horizon {
            p.add_var(names::switch(line.key(), t, s), 0.0, 1.0, VarKind::Binary);
        }
    }
    for &(_, key, mode_count) in &ctx.damaged {
        let w_upper: f64 = (1..=mode_count)
            .map(|r| scen.draw(key, r).unwrap().resource)
            .sum();
        p.add_var(names::mode_resource(key, s), 0.0, w_upper, VarKind::Continuous);
    }
    p.add_var(names::restoration(s), 0.0, cap, VarKind::Continuous);

    // DER routing rows.
    for der in &fleet.ders {
        for t in 1..=horizon {
            let coeffs: Vec<(usize, f64)> = ctx
                .candidates
                .iter()
                .map(|&i| (p.col(&names::alpha(der.id, i, t, s)).unwrap(), 1.0))
                .collect();
            p.add_row(
                format!("der_one_node[{}][{t}][{s}]", der.id),
                coeffs,
                Sense::Le,
                1.0,
            );
        }
    }
    for &i in &ctx.candidates {
        for t in 1..=horizon {
            let coeffs: Vec<(usize, f64)> = fleet
                .ders
                .iter()
                .map(|d| (p.col(&names::alpha(d.id, i, t, s)).unwrap(), 1.0))
                .collect();
            p.add_row(
                format!("der_one_per_node[{i}][{t}][{s}]"),
                coeffs,
                Sense::Le,
                1.0,
            );
        }
    }
    for der in &fleet.ders {
        for &i in &ctx.candidates {
            for &j in &ctx.candidates {
                if i == j {
                    continue;
                }
                let tr = der.travel_steps(i, j).expect("validated");
                for tau in 1..=tr {
                    for t in 1..=horizon.saturating_sub(tau) {
                        let ai = p.col(&names::alpha(der.id, i, t, s)).unwrap();
                        let aj = p.col(&names::alpha(der.id, j, t + tau, s)).unwrap();
                        p.add_row(
                            format!("der_travel[{}][{i}][{j}][{t}][{tau}][{s}]", der.id),
                            vec![(ai, 1.0), (aj, 1.0)],
                            Sense::Le,
                            1.0,
                        );
                    }
                }
            }
        }
    }
    for der in &fleet.ders {
        for t in 1..=horizon {
            let mut coeffs = vec![(p.col(&names::pg_der(der.id, t, s)).unwrap(), 1.0)];
            for &i in &ctx.candidates {
                coeffs.push((
                    p.col(&names::alpha(der.id, i, t, s)).unwrap(),
                    -der.capacity,
                ));
            }
            p.add_row(format!("der_cap[{}][{t}][{s}]", der.id), coeffs, Sense::Le, 0.0);
        }
    }

    // Repair scheduling rows.
    let x_col = |key: LineKey, r: u32| -> usize {
        let mut k = 0usize;
        for &(_, other, mode_count) in &ctx.damaged {
            if other == key {
                return x_cols[k + (r - 1) as usize];
            }
            k += mode_count as usize;
        }
        unreachable!("damaged line lookup");
    };
    for &(_, key, mode_count) in &ctx.damaged {
        let mut coeffs: Vec<(usize, f64)> = (1..=horizon)
            .map(|t| (p.col(&names::assign(key, t, s)).unwrap(), 1.0))
            .collect();
        for r in 1..=mode_count {
            coeffs.push((x_col(key, r), -1.0));
        }
        p.add_row(format!("rc_assign[{key}][{s}]"), coeffs, Sense::Eq, 0.0);
    }
    for &(_, key, _) in &ctx.damaged {
        for t in 1..=horizon {
            let mut coeffs = vec![
                (p.col(&names::action(key, t, s)).unwrap(), 1.0),
                (p.col(&names::operable(key, t, s)).unwrap(), 1.0),
            ];
            for tau in 1..=t {
                coeffs.push((p.col(&names::assign(key, tau, s)).unwrap(), -1.0));
            }
            p.add_row(format!("rc_progress[{key}][{t}][{s}]"), coeffs, Sense::Eq, 0.0);
        }
    }
    for &(_, key, _) in &ctx.damaged {
        for t in 1..horizon {
            let m0 = p.col(&names::operable(key, t, s)).unwrap();
            let m1 = p.col(&names::operable(key, t + 1, s)).unwrap();
            p.add_row(
                format!("rc_mono[{key}][{t}][{s}]"),
                vec![(m0, 1.0), (m1, -1.0)],
                Sense::Le,
                0.0,
            );
        }
    }
    for &(_, key, _) in &ctx.damaged {
        // sum_t t*phi + sum_t a <= sum_t t*(mu_t - mu_{t-1}), with mu_0 = 0
        // telescoping to T*mu_T - sum_{t<T} mu_t.
        let mut coeffs = Vec::new();
        for t in 1..=horizon {
            coeffs.push((p.col(&names::assign(key, t, s)).unwrap(), t as f64));
            coeffs.push((p.col(&names::action(key, t, s)).unwrap(), 1.0));
        }
        coeffs.push((
            p.col(&names::operable(key, horizon, s)).unwrap(),
            -(horizon as f64),
        ));
        for t in 1..horizon {
            coeffs.push((p.col(&names::operable(key, t, s)).unwrap(), 1.0));
        }
        p.add_row(format!("rc_completion[{key}][{s}]"), coeffs, Sense::Le, 0.0);
    }
    for &(_, key, mode_count) in &ctx.damaged {
        let mut coeffs: Vec<(usize, f64)> = (1..=mode_count)
            .map(|r| (x_col(key, r), scen.draw(key, r).unwrap().duration as f64))
            .collect();
        for t in 1..=horizon {
            coeffs.push((p.col(&names::action(key, t, s)).unwrap(), -1.0));
        }
        p.add_row(format!("rc_duration[{key}][{s}]"), coeffs, Sense::Le, 0.0);
    }
    for &(_, key, mode_count) in &ctx.damaged {
        // Operable no earlier than the chosen mode's duration allows:
        // assignment happens at step 1 or later, so completion is at
        // earliest 1 + duration.
        for t in 1..=horizon {
            let mut coeffs = vec![(p.col(&names::operable(key, t, s)).unwrap(), 1.0)];
            for r in 1..=mode_count {
                if scen.draw(key, r).unwrap().duration < t {
                    coeffs.push((x_col(key, r), -1.0));
                }
            }
            p.add_row(format!("rc_earliest[{key}][{t}][{s}]"), coeffs, Sense::Le, 0.0);
        }
    }
    for &(_, key, mode_count) in &ctx.damaged {
        let mut coeffs = vec![(p.col(&names::mode_resource(key, s)).unwrap(), 1.0)];
        for r in 1..=mode_count {
            coeffs.push((x_col(key, r), -scen.draw(key, r).unwrap().resource));
        }
        p.add_row(format!("w_def[{key}][{s}]"), coeffs, Sense::Eq, 0.0);
    }
    for &(_, key, mode_count) in &ctx.damaged {
        let w_upper: f64 = (1..=mode_count)
            .map(|r| scen.draw(key, r).unwrap().resource)
            .sum();
        let w_col_idx = p.col(&names::mode_resource(key, s)).unwrap();
        for t in 1..=horizon {
            let a_col = p.col(&names::action(key, t, s)).unwrap();
            linearize_bilinear(p, a_col, w_col_idx, w_upper, &names::resource_use(key, t, s))?;
        }
    }
    for t in 1..=horizon {
        let coeffs: Vec<(usize, f64)> = ctx
            .damaged
            .iter()
            .map(|&(_, key, _)| (p.col(&names::resource_use(key, t, s)).unwrap(), 1.0))
            .collect();
        p.add_row(
            format!("budget[{t}][{s}]"),
            coeffs,
            Sense::Le,
            scen.budget[(t - 1) as usize],
        );
    }

    // Radiality rows.
    for &(_, key, _) in &ctx.damaged {
        for t in 1..=horizon {
            let b = p.col(&names::switch(key, t, s)).unwrap();
            let m = p.col(&names::operable(key, t, s)).unwrap();
            p.add_row(
                format!("switch_oper[{key}][{t}][{s}]"),
                vec![(b, 1.0), (m, -1.0)],
                Sense::Le,
                0.0,
            );
        }
    }
    for line in &ctx.net.lines {
        for t in 1..=horizon {
            let b = p.col(&names::switch(line.key(), t, s)).unwrap();
            let e = p.col(&names::fict_edge(line.key(), t)).unwrap();
            p.add_row(
                format!("switch_fict[{}][{t}][{s}]", line.key()),
                vec![(b, 1.0), (e, -1.0)],
                Sense::Le,
                0.0,
            );
        }
    }

    // Operation rows.
    for &i in &ctx.node_ids {
        let is_candidate = ctx.candidates.contains(&i);
        let is_substation = ctx.net.bus(i).unwrap().substation;
        for t in 1..=horizon {
            let mut coeffs = Vec::new();
            for line in &ctx.net.lines {
                let f = p.col(&names::flow(line.key(), t, s)).unwrap();
                if line.to == i {
                    coeffs.push((f, 1.0));
                } else if line.from == i {
                    coeffs.push((f, -1.0));
                }
            }
            if is_candidate {
                coeffs.push((p.col(&names::pg_node(i, t, s)).unwrap(), 1.0));
            }
            if is_substation {
                coeffs.push((p.col(&names::gen(i, t, s)).unwrap(), 1.0));
            }
            let demand = ctx.load(i, t);
            if demand != 0.0 {
                coeffs.push((p.col(&names::load_on(i, t, s)).unwrap(), -demand));
            }
            p.add_row(format!("balance[{i}][{t}][{s}]"), coeffs, Sense::Eq, 0.0);
        }
    }
    for line in &ctx.net.lines {
        for t in 1..=horizon {
            let f = p.col(&names::flow(line.key(), t, s)).unwrap();
            let b = p.col(&names::switch(line.key(), t, s)).unwrap();
            p.add_row(
                format!("flow_pos[{}][{t}][{s}]", line.key()),
                vec![(f, 1.0), (b, -line.max_flow)],
                Sense::Le,
                0.0,
            );
            p.add_row(
                format!("flow_neg[{}][{t}][{s}]", line.key()),
                vec![(f, -1.0), (b, -line.max_flow)],
                Sense::Le,
                0.0,
            );
        }
    }
    for &i in &ctx.candidates {
        for t in 1..=horizon {
            let mut coeffs = vec![(p.col(&names::pg_node(i, t, s)).unwrap(), 1.0)];
            for der in &fleet.ders {
                coeffs.push((
                    p.col(&names::alpha(der.id, i, t, s)).unwrap(),
                    -der.capacity,
                ));
            }
            p.add_row(format!("der_node_cap[{i}][{t}][{s}]"), coeffs, Sense::Le, 0.0);
        }
    }
    for t in 1..=horizon {
        let mut coeffs: Vec<(usize, f64)> = ctx
            .candidates
            .iter()
            .map(|&i| (p.col(&names::pg_node(i, t, s)).unwrap(), 1.0))
            .collect();
        for der in &fleet.ders {
            coeffs.push((p.col(&names::pg_der(der.id, t, s)).unwrap(), -1.0));
        }
        p.add_row(format!("der_dispatch[{t}][{s}]"), coeffs, Sense::Eq, 0.0);
    }
    for &i in &ctx.node_ids {
        for t in 1..horizon {
            let o0 = p.col(&names::load_on(i, t, s)).unwrap();
            let o1 = p.col(&names::load_on(i, t + 1, s)).unwrap();
            p.add_row(
                format!("load_mono[{i}][{t}][{s}]"),
                vec![(o0, 1.0), (o1, -1.0)],
                Sense::Le,
                0.0,
            );
        }
    }
    // Island energization: load in an initially isolated component needs a
    // DER docked inside it or an operable boundary line.
    for (members, cand_members, boundary) in &ctx.islands {
        for &i in members {
            for t in 1..=horizon {
                let mut coeffs = vec![(p.col(&names::load_on(i, t, s)).unwrap(), 1.0)];
                for der in &fleet.ders {
                    for &j in cand_members {
                        coeffs.push((p.col(&names::alpha(der.id, j, t, s)).unwrap(), -1.0));
                    }
                }
                for &l in boundary {
                    coeffs.push((p.col(&names::operable(l, t, s)).unwrap(), -1.0));
                }
                p.add_row(format!("island_source[{i}][{t}][{s}]"), coeffs, Sense::Le, 0.0);
            }
        }
    }

    // Restoration accounting.
    let mut coeffs = vec![(p.col(&names::restoration(s)).unwrap(), 1.0)];
    for &i in &ctx.node_ids {
        let w = ctx.priority(i);
        for t in 1..=horizon {
            let c = w * ctx.load(i, t);
            if c != 0.0 {
                coeffs.push((p.col(&names::load_on(i, t, s)).unwrap(), -c));
            }
        }
    }
    p.add_row(format!("restoration[{s}]"), coeffs, Sense::Eq, 0.0);
    Ok(())
}

/// Deterministic-equivalent (extensive) form over the whole scenario set,
/// with the risk-averse objective
/// `min lambda*(nu + sum_s p_s*Delta_s/(1-alpha)) - sum_s p_s*rest_s`.
pub fn build_extensive(
    net: &NetworkModel,
    scenarios: &ScenarioSet,
    fleet: &FleetSpec,
    risk: &RiskConfig,
    horizon: u32,
) -> Result<MilpProblem, BuildError> {
    scenarios.validate()?;
    risk.validate()?;
    if scenarios.horizon != horizon {
        return Err(BuildError::HorizonMismatch {
            set: scenarios.horizon,
            requested: horizon,
        });
    }
    let ctx = Ctx::new(net, &scenarios.scenarios[0], Some(horizon))?;
    fleet.validate(&ctx.candidates)?;
    for s in &scenarios.scenarios {
        ctx.check_scenario(s)?;
    }

    let mut p = MilpProblem::new();
    let x_cols = add_first_stage(&mut p, &ctx);
    let nu = p.add_var(
        names::nu(),
        -ctx.restoration_cap,
        ctx.restoration_cap,
        VarKind::Continuous,
    );
    add_fictitious_network(&mut p, &ctx);
    for scen in &scenarios.scenarios {
        add_scenario_stage(&mut p, &ctx, fleet, scen, &x_cols)?;
        let delta = p.add_var(
            names::excess(scen.id),
            0.0,
            ctx.restoration_cap,
            VarKind::Continuous,
        );
        let rest = p.col(&names::restoration(scen.id)).unwrap();
        p.add_row(
            format!("cvar_excess[{}]", scen.id),
            vec![(rest, 1.0), (nu, 1.0), (delta, 1.0)],
            Sense::Ge,
            0.0,
        );
        p.add_objective(delta, scen.probability * risk.lambda / (1.0 - risk.alpha));
        p.add_objective(rest, -scen.probability);
    }
    p.add_objective(nu, risk.lambda);
    Ok(p)
}

/// Wait-and-see problem: one scenario with its own first-stage columns and
/// no risk rows (risk statistics are applied afterwards over the
/// distribution of per-scenario optima).
pub fn build_ws_problem(
    net: &NetworkModel,
    scenario: &Scenario,
    fleet: &FleetSpec,
    horizon: u32,
) -> Result<MilpProblem, BuildError> {
    let ctx = Ctx::new(net, scenario, Some(horizon))?;
    fleet.validate(&ctx.candidates)?;
    ctx.check_scenario(scenario)?;
    if scenario.budget.len() < horizon as usize {
        return Err(crate::uncertainty::UncertaintyError::BadBudgetLength {
            got: scenario.budget.len(),
            need: horizon as usize,
        }
        .into());
    }
    let mut p = MilpProblem::new();
    let x_cols = add_first_stage(&mut p, &ctx);
    add_fictitious_network(&mut p, &ctx);
    add_scenario_stage(&mut p, &ctx, fleet, scenario, &x_cols)?;
    let rest = p.col(&names::restoration(scenario.id)).unwrap();
    p.add_objective(rest, -1.0);
    Ok(p)
}

/// Mean-value problem: the wait-and-see build on the expected scenario.
/// Returns the problem together with the scenario it was built from so the
/// first-stage decision can be evaluated against the real scenario set.
pub fn build_ev_problem(
    net: &NetworkModel,
    table: &RepairModeTable,
    fleet: &FleetSpec,
    horizon: u32,
    budget: &BudgetSpec,
) -> Result<(MilpProblem, Scenario), BuildError> {
    let mean = crate::uncertainty::expected_scenario(table, horizon, budget)?;
    let p = build_ws_problem(net, &mean, fleet, horizon)?;
    Ok((p, mean))
}

/// Per-scenario Lagrangian subproblem with its own first-stage copies.
/// With `dual = None` (no variable splitting) the objective is the plain
/// probability-weighted stand-alone scenario objective; with a dual term
/// the projected multiplier coefficients are added on the copies.
pub fn build_scenario_subproblem(
    net: &NetworkModel,
    scenario: &Scenario,
    fleet: &FleetSpec,
    risk: &RiskConfig,
    horizon: u32,
    dual: Option<&ScenarioDualTerm>,
) -> Result<MilpProblem, BuildError> {
    risk.validate()?;
    let ctx = Ctx::new(net, scenario, Some(horizon))?;
    fleet.validate(&ctx.candidates)?;
    ctx.check_scenario(scenario)?;
    let mut p = MilpProblem::new();
    let x_cols = add_first_stage(&mut p, &ctx);
    let nu = p.add_var(
        names::nu(),
        -ctx.restoration_cap,
        ctx.restoration_cap,
        VarKind::Continuous,
    );
    add_fictitious_network(&mut p, &ctx);
    add_scenario_stage(&mut p, &ctx, fleet, scenario, &x_cols)?;
    let delta = p.add_var(
        names::excess(scenario.id),
        0.0,
        ctx.restoration_cap,
        VarKind::Continuous,
    );
    let rest = p.col(&names::restoration(scenario.id)).unwrap();
    p.add_row(
        format!("cvar_excess[{}]", scenario.id),
        vec![(rest, 1.0), (nu, 1.0), (delta, 1.0)],
        Sense::Ge,
        0.0,
    );
    let prob = scenario.probability;
    p.add_objective(nu, prob * risk.lambda);
    p.add_objective(delta, prob * risk.lambda / (1.0 - risk.alpha));
    p.add_objective(rest, -prob);
    if let Some(term) = dual {
        if term.x_coeffs.len() != x_cols.len() {
            return Err(BuildError::DualDimension {
                got: term.x_coeffs.len(),
                expected: x_cols.len(),
            });
        }
        for (k, &col) in x_cols.iter().enumerate() {
            p.add_objective(col, term.x_coeffs[k]);
        }
        p.add_objective(nu, term.nu_coeff);
    }
    Ok(p)
}

/// Reads the per-scenario restoration values out of a solution vector.
pub fn restoration_by_scenario(
    problem: &MilpProblem,
    values: &[f64],
    scenarios: &ScenarioSet,
) -> Vec<f64> {
    scenarios
        .scenarios
        .iter()
        .map(|s| {
            let col = problem.col(&names::restoration(s.id)).unwrap();
            values[col]
        })
        .collect()
}

/// First-stage repair choice read back from a solution: line -> chosen mode
/// (1-based); damaged lines with no chosen mode are omitted.
pub fn chosen_modes(
    problem: &MilpProblem,
    values: &[f64],
    components: &[XComponent],
) -> BTreeMap<LineKey, u32> {
    let mut out = BTreeMap::new();
    for c in components {
        if let Ok(col) = problem.col(&c.name) {
            if values[col] > 0.5 {
                out.insert(c.line, c.mode);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::LpStatus;
    use crate::netgraph::{preassign_ders, PreassignRule};
    use crate::simplex::{solve_lp, SimplexOptions};
    use crate::uncertainty::RepairRealization;

    pub(crate) fn six_node_candidates() -> NetworkModel {
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

    pub(crate) fn toy_fleet() -> FleetSpec {
        FleetSpec {
            ders: vec![DerSpec {
                id: 0,
                capacity: 5.0,
                travel: vec![TravelTime {
                    from: 4,
                    to: 5,
                    steps: 2,
                }],
            }],
        }
    }

    fn toy_scenario(
        id: usize,
        probability: f64,
        durations: [u32; 4],
        resources: [f64; 4],
    ) -> Scenario {
        let keys = [
            (LineKey::new(1, 5), 1),
            (LineKey::new(1, 5), 2),
            (LineKey::new(3, 4), 1),
            (LineKey::new(3, 4), 2),
        ];
        Scenario {
            id,
            probability,
            repairs: keys
                .iter()
                .zip(durations.iter().zip(resources.iter()))
                .map(|(&(line, mode), (&duration, &resource))| RepairRealization {
                    line,
                    mode,
                    duration,
                    resource,
                })
                .collect(),
            budget: vec![12.0; 4],
        }
    }

    pub(crate) fn toy_scenarios() -> ScenarioSet {
        ScenarioSet {
            schema: 1,
            seed: 7,
            horizon: 4,
            scenarios: vec![
                toy_scenario(0, 0.5, [3, 1, 2, 1], [5.0, 10.0, 5.0, 10.0]),
                toy_scenario(1, 0.5, [4, 2, 3, 1], [6.0, 11.0, 5.5, 9.0]),
            ],
        }
    }

    #[test]
    fn toy_extensive_matches_hand_tally() {
        // Hand-derived for D=2 damaged lines x 2 modes, T=4, S=2, N=6, L=5,
        // two candidate nodes, one DER with travel 2 between candidates,
        // one substation.
        //
        // Variables: x 4; nu 1; eps 5*4=20; f 20; per scenario: alpha 2*4=8,
        // Pgd 4, Pg 8, G 4, P 20, o 24, phi 8, a 8, mu 8, beta 20, w 2,
        // z 8, rest 1, Delta 1 -> 124. Total = 45 + 2*124 = 293.
        //
        // Rows: mode choice 2; eps_count 4; fict_balance 5*4=20;
        // fict caps 2*20=40; per scenario: der_one_node 4,
        // der_one_per_node 2*4=8, der_travel 2 pairs * (3+2) = 10,
        // der_cap 4, rc_assign 2, rc_progress 8, rc_mono 6,
        // rc_completion 2, rc_earliest 2*4=8, rc_duration 2, w_def 2,
        // z rows 4*8=32, budget 4, switch_oper 8, switch_fict 20,
        // balance 24, flow caps 40, der_node_cap 8, der_dispatch 4,
        // load_mono 18, island_source (3 island nodes)*4=12,
        // restoration 1, cvar_excess 1 -> 228. Total = 66 + 2*228 = 522.
        let net = six_node_candidates();
        let scen = toy_scenarios();
        let fleet = toy_fleet();
        let risk = RiskConfig {
            lambda: 1.0,
            alpha: 0.8,
        };
        let p = build_extensive(&net, &scen, &fleet, &risk, 4).unwrap();
        assert_eq!(p.num_vars(), 293);
        assert_eq!(p.num_rows(), 522);
        let binaries = p
            .variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count();
        // x 4 + eps 20 + per scenario (alpha 8 + o 24 + phi 8 + a 8 + mu 8
        // + beta 20) = 24 + 2*76 = 176.
        assert_eq!(binaries, 176);
    }

    #[test]
    fn lambda_zero_silences_risk_columns() {
        let net = six_node_candidates();
        let scen = toy_scenarios();
        let p = build_extensive(&net, &scen, &toy_fleet(), &RiskConfig::risk_neutral(), 4)
            .unwrap();
        let nu = p.col("nu").unwrap();
        assert_eq!(p.objective[nu], 0.0);
        for s in 0..2 {
            let d = p.col(&names::excess(s)).unwrap();
            assert_eq!(p.objective[d], 0.0);
        }
    }

    #[test]
    fn lp_relaxation_is_feasible_and_bounded() {
        let net = six_node_candidates();
        let scen = toy_scenarios();
        let risk = RiskConfig {
            lambda: 1.0,
            alpha: 0.8,
        };
        let p = build_extensive(&net, &scen, &toy_fleet(), &risk, 4).unwrap();
        let sol = solve_lp(&p, &SimplexOptions::default());
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(p.check_rows(&sol.values, 1e-6).is_empty());
        // The relaxation cannot beat full restoration of every load.
        assert!(sol.objective >= -2.0 * 32.0);
    }

    #[test]
    fn linearization_fixes_z_exactly() {
        // Exhaustive over a in {0,1} and w in {0, w_upper/2, 7}: the rows
        // pin z to a*w whichever way the objective pushes it.
        let w_upper = 15.0;
        for a_fix in [0.0, 1.0] {
            for w_fix in [0.0, w_upper / 2.0, 7.0] {
                let mut p = MilpProblem::new();
                let a = p.add_var("a", a_fix, a_fix, VarKind::Binary);
                let w = p.add_var("w", w_fix, w_fix, VarKind::Continuous);
                let z = linearize_bilinear(&mut p, a, w, w_upper, "z").unwrap();
                for dir in [1.0, -1.0] {
                    let mut q = p.clone();
                    q.set_objective(z, dir);
                    let sol = solve_lp(&q, &SimplexOptions::default());
                    assert_eq!(sol.status, LpStatus::Optimal);
                    assert!(
                        (sol.values[z] - a_fix * w_fix).abs() < 1e-9,
                        "a={a_fix} w={w_fix} dir={dir}: z={}",
                        sol.values[z]
                    );
                }
            }
        }
    }

    #[test]
    fn subproblem_with_zero_multipliers_is_standalone() {
        let net = six_node_candidates();
        let scen = toy_scenarios();
        let risk = RiskConfig {
            lambda: 0.5,
            alpha: 0.8,
        };
        let standalone =
            build_scenario_subproblem(&net, &scen.scenarios[0], &toy_fleet(), &risk, 4, None)
                .unwrap();
        let zeroed = build_scenario_subproblem(
            &net,
            &scen.scenarios[0],
            &toy_fleet(),
            &risk,
            4,
            Some(&ScenarioDualTerm {
                x_coeffs: vec![0.0; 4],
                nu_coeff: 0.0,
            }),
        )
        .unwrap();
        assert_eq!(standalone.objective, zeroed.objective);
    }

    #[test]
    fn dual_dimension_mismatch_is_rejected() {
        let net = six_node_candidates();
        let scen = toy_scenarios();
        let err = build_scenario_subproblem(
            &net,
            &scen.scenarios[0],
            &toy_fleet(),
            &RiskConfig::risk_neutral(),
            4,
            Some(&ScenarioDualTerm {
                x_coeffs: vec![0.0; 3],
                nu_coeff: 0.0,
            }),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            BuildError::DualDimension {
                got: 3,
                expected: 4
            }
        ));
    }

    #[test]
    fn x_component_order_is_line_then_mode() {
        let net = six_node_candidates();
        let scen = toy_scenarios();
        let comps = x_components(&net, &scen.scenarios[0]).unwrap();
        let labels: Vec<&str> = comps.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(labels, ["x[1-5][1]", "x[1-5][2]", "x[3-4][1]", "x[3-4][2]"]);
    }

    #[test]
    fn missing_travel_is_rejected() {
        let net = six_node_candidates();
        let scen = toy_scenarios();
        let fleet = FleetSpec {
            ders: vec![DerSpec {
                id: 0,
                capacity: 5.0,
                travel: vec![],
            }],
        };
        let err =
            build_extensive(&net, &scen, &fleet, &RiskConfig::risk_neutral(), 4).unwrap_err();
        assert!(matches!(err, BuildError::MissingTravel { .. }));
    }
}
