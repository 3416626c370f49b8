//! Independent constraint checker.
//!
//! Every constraint is evaluated directly from the solution variables and
//! the instance; nothing here consults the construction or routing code.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::instance::PlanningInstance;
use crate::model::{LinkId, Solution};

/// Absolute tolerance for real-valued comparisons (bandwidth units).
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintId {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
    C10,
    C11,
    C12,
    C13,
    C14,
    C15,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 15] = [
        ConstraintId::C1,
        ConstraintId::C2,
        ConstraintId::C3,
        ConstraintId::C4,
        ConstraintId::C5,
        ConstraintId::C6,
        ConstraintId::C7,
        ConstraintId::C8,
        ConstraintId::C9,
        ConstraintId::C10,
        ConstraintId::C11,
        ConstraintId::C12,
        ConstraintId::C13,
        ConstraintId::C14,
        ConstraintId::C15,
    ];

    pub fn description(self) -> &'static str {
        match self {
            ConstraintId::C1 => "DP assigned to at most one site",
            ConstraintId::C2 => "DP assigned only to an installed covering site",
            ConstraintId::C3 => "at most R incident links per node",
            ConstraintId::C4 => "at most K channels per link",
            ConstraintId::C5 => "channel used on at most one outgoing link per node",
            ConstraintId::C6 => "channel used by at most one incident link per node",
            ConstraintId::C7 => "link needs connectivity and the channel at an endpoint",
            ConstraintId::C8 => "active channels bounded by R z_j",
            ConstraintId::C9 => "assigned demand within C_max",
            ConstraintId::C10 => "link flow within link capacity",
            ConstraintId::C11 => "flow conservation",
            ConstraintId::C12 => "gateway within A hops of every loaded AP",
            ConstraintId::C13 => "internet flow only at gateways, bounded by M",
            ConstraintId::C14 => "every installed node has at least two links",
            ConstraintId::C15 => "variable domains and role structure",
        }
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintEntry {
    pub id: ConstraintId,
    pub description: String,
    pub satisfied: bool,
    /// Offending index tuples; their meaning depends on the constraint.
    pub violations: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub feasible: bool,
    pub entries: Vec<ConstraintEntry>,
}

impl ConstraintReport {
    pub fn entry(&self, id: ConstraintId) -> &ConstraintEntry {
        &self.entries[id as usize]
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    pub fn violated(&self) -> impl Iterator<Item = &ConstraintEntry> {
        self.entries.iter().filter(|e| !e.satisfied)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            write!(
                f,
                "{:<4} {:<5} {}",
                e.id,
                if e.satisfied { "ok" } else { "FAIL" },
                e.description
            )?;
            if !e.satisfied {
                write!(f, " {:?}", &e.violations[..e.violations.len().min(8)])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Collector(BTreeMap<ConstraintId, Vec<Vec<usize>>>);

impl Collector {
    fn flag(&mut self, id: ConstraintId, idx: Vec<usize>) {
        self.0.entry(id).or_default().push(idx);
    }

    fn finish(mut self) -> ConstraintReport {
        let entries: Vec<_> = ConstraintId::ALL
            .iter()
            .map(|&id| {
                let mut violations = self.0.remove(&id).unwrap_or_default();
                violations.sort();
                violations.dedup();
                ConstraintEntry {
                    id,
                    description: id.description().to_string(),
                    satisfied: violations.is_empty(),
                    violations,
                }
            })
            .collect();
        ConstraintReport {
            feasible: entries.iter().all(|e| e.satisfied),
            entries,
        }
    }
}

/// Evaluates C1–C15 on `solution`.
pub fn check_constraints(solution: &Solution, instance: &PlanningInstance) -> ConstraintReport {
    use ConstraintId::*;

    let s = instance.num_sites();
    let n = instance.num_dps();
    let k_max = instance.channels;
    let r_max = instance.radios;
    let a = instance.coverage();
    let b = instance.connectivity();
    let mut out = Collector::default();

    // C15 first: the remaining checks only look at in-range entries.
    let lengths_ok = solution.num_sites() == s
        && solution.access_point.len() == s
        && solution.relay.len() == s
        && solution.gateway.len() == s
        && solution.internet_flow.len() == s;
    if !lengths_ok || solution.num_dps() != n || solution.num_channels() != k_max {
        out.flag(C15, vec![]);
        return out.finish();
    }
    for j in 0..s {
        let z = solution.installed[j];
        let (ap, relay, gw) = (
            solution.access_point[j],
            solution.relay[j],
            solution.gateway[j],
        );
        if z != (ap || relay) || (ap && relay) || (gw && !z) {
            out.flag(C15, vec![j]);
        }
        let f = solution.internet_flow[j];
        if !(f.is_finite() && f >= 0.0) {
            out.flag(C15, vec![j]);
        }
    }
    let in_range_link = |l: &LinkId| l.from < s && l.to < s && l.channel < k_max;
    for &(i, j) in &solution.assignment {
        if i >= n || j >= s {
            out.flag(C15, vec![i, j]);
        }
    }
    for &(j, k) in &solution.channel_use {
        if j >= s || k >= k_max {
            out.flag(C15, vec![j, k]);
        }
    }
    for l in &solution.links {
        if !in_range_link(l) {
            out.flag(C15, vec![l.from, l.to, l.channel]);
        }
    }
    for (l, &v) in &solution.flows {
        if !in_range_link(l) || !(v.is_finite() && v >= 0.0) {
            out.flag(C15, vec![l.from, l.to, l.channel]);
        }
    }

    let links: Vec<LinkId> = solution
        .links
        .iter()
        .copied()
        .filter(in_range_link)
        .collect();

    // C1, C2, C9
    let mut hosts = vec![0usize; n];
    let mut demand = vec![0.0; s];
    for &(i, j) in &solution.assignment {
        if i >= n || j >= s {
            continue;
        }
        hosts[i] += 1;
        demand[j] += instance.traffic(i);
        if !(a.get(i, j) && solution.installed[j]) {
            out.flag(C2, vec![i, j]);
        }
    }
    for (i, &h) in hosts.iter().enumerate() {
        if h > 1 {
            out.flag(C1, vec![i]);
        }
    }
    for (j, &d) in demand.iter().enumerate() {
        if d > instance.max_capacity + FEASIBILITY_TOL {
            out.flag(C9, vec![j]);
        }
    }

    // C3, C14: undirected incident-link counts.
    let mut degree = vec![0usize; s];
    for l in &links {
        degree[l.from] += 1;
        if l.to != l.from {
            degree[l.to] += 1;
        }
    }
    for (j, &d) in degree.iter().enumerate() {
        if d > r_max {
            out.flag(C3, vec![j]);
        }
        if solution.installed[j] && d < 2 {
            out.flag(C14, vec![j]);
        }
    }

    // C4: channels per ordered pair.
    let mut per_pair: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for l in &links {
        *per_pair.entry((l.from, l.to)).or_default() += 1;
    }
    for (&(j, l), &c) in &per_pair {
        if c > k_max {
            out.flag(C4, vec![j, l]);
        }
    }

    // C5: outgoing per (node, channel); C6: incoming + outgoing per (node, channel).
    let mut outgoing = vec![0usize; s * k_max];
    let mut incident = vec![0usize; s * k_max];
    for l in &links {
        outgoing[l.from * k_max + l.channel] += 1;
        incident[l.from * k_max + l.channel] += 1;
        incident[l.to * k_max + l.channel] += 1;
    }
    for j in 0..s {
        for k in 0..k_max {
            if outgoing[j * k_max + k] > 1 {
                out.flag(C5, vec![j, k]);
            }
            if incident[j * k_max + k] > 1 {
                out.flag(C6, vec![j, k]);
            }
        }
    }

    // C7: 2 L_jl^k <= b_jl (w_j^k + w_l^k)
    let uses = |j: usize, k: usize| solution.channel_use.contains(&(j, k));
    for l in &links {
        let rhs = if b.get(l.from, l.to) {
            uses(l.from, l.channel) as usize + uses(l.to, l.channel) as usize
        } else {
            0
        };
        if 2 > rhs {
            out.flag(C7, vec![l.from, l.to, l.channel]);
        }
    }

    // C8
    let mut active = vec![0usize; s];
    for &(j, k) in &solution.channel_use {
        if j < s && k < k_max {
            active[j] += 1;
        }
    }
    for (j, &a) in active.iter().enumerate() {
        if a > r_max * solution.installed[j] as usize {
            out.flag(C8, vec![j]);
        }
    }

    // C10, C11
    let mut balance = demand.clone();
    for (l, &v) in &solution.flows {
        if !in_range_link(l) {
            continue;
        }
        let cap = if solution.links.contains(l) {
            instance.link_capacity(l.from, l.to, l.channel)
        } else {
            0.0
        };
        if v > cap + FEASIBILITY_TOL {
            out.flag(C10, vec![l.from, l.to, l.channel]);
        }
        balance[l.from] -= v;
        balance[l.to] += v;
    }
    for (j, (&b, &f)) in balance.iter().zip(&solution.internet_flow).enumerate() {
        if (b - f).abs() > FEASIBILITY_TOL {
            out.flag(C11, vec![j]);
        }
    }

    // C12: every AP carrying demand reaches some gateway within A hops.
    let gateways: Vec<usize> = (0..s).filter(|&j| solution.gateway[j]).collect();
    let loaded_aps: Vec<usize> = (0..s)
        .filter(|&j| solution.access_point[j] && demand[j] > 0.0)
        .collect();
    if !loaded_aps.is_empty() {
        let mut adjacency = vec![Vec::new(); s];
        for l in &links {
            adjacency[l.from].push(l.to);
            adjacency[l.to].push(l.from);
        }
        let hops = multi_source_hops(&adjacency, &gateways);
        for ap in loaded_aps {
            match hops[ap] {
                Some(h) if h <= instance.hop_bound => {}
                _ => out.flag(C12, vec![ap]),
            }
        }
    }

    // C13
    for j in 0..s {
        let bound = if solution.gateway[j] {
            instance.big_m
        } else {
            0.0
        };
        if solution.internet_flow[j] > bound + FEASIBILITY_TOL {
            out.flag(C13, vec![j]);
        }
    }

    out.finish()
}

fn multi_source_hops(adjacency: &[Vec<usize>], sources: &[usize]) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    let mut queue = VecDeque::new();
    for &g in sources {
        dist[g] = Some(0);
        queue.push_back(g);
    }
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        for &v in &adjacency[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}
