//! Flow routing over established links, hop distances and flow-balance
//! diagnostics.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::PlanningInstance;
use crate::model::{LinkId, Solution, FEASIBILITY_TOL};

/// Marks a pair of sites with no established path between them.
pub const UNREACHABLE: usize = usize::MAX;

/// All-pairs hop counts over the undirected established-link graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMatrix {
    size: usize,
    h: Vec<usize>,
}

impl HopMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Hop count from `j` to `l`, or [`UNREACHABLE`].
    pub fn get(&self, j: usize, l: usize) -> usize {
        self.h[j * self.size + l]
    }

    pub fn reachable(&self, j: usize, l: usize) -> bool {
        self.get(j, l) != UNREACHABLE
    }

    pub fn row(&self, j: usize) -> &[usize] {
        &self.h[j * self.size..(j + 1) * self.size]
    }
}

/// One source site's route to the gateway that absorbs its demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingTrace {
    pub ap_site: usize,
    pub gateway_site: usize,
    /// Site sequence from the AP to the gateway, both inclusive.
    pub path: Vec<usize>,
    pub demand: f64,
}

impl RoutingTrace {
    pub fn hops(&self) -> usize {
        self.path.len() - 1
    }
}

fn undirected_adjacency(solution: &Solution) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); solution.num_sites()];
    for l in &solution.links {
        adjacency[l.from].push(l.to);
        adjacency[l.to].push(l.from);
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }
    adjacency
}

fn bfs(adjacency: &[Vec<usize>], source: usize, out: &mut [usize]) {
    out.iter_mut().for_each(|d| *d = UNREACHABLE);
    out[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if out[v] == UNREACHABLE {
                out[v] = out[u] + 1;
                queue.push_back(v);
            }
        }
    }
}

pub fn hop_distances(solution: &Solution) -> HopMatrix {
    let s = solution.num_sites();
    let adjacency = undirected_adjacency(solution);
    let mut h = vec![UNREACHABLE; s * s];
    for j in 0..s {
        bfs(&adjacency, j, &mut h[j * s..(j + 1) * s]);
    }
    HopMatrix { size: s, h }
}

/// Working state while routing: every link's current orientation and load.
struct LinkState {
    /// `(a, b, channel)` with `a < b` (or `a == b`), orientation and load.
    entries: Vec<LinkSlot>,
    /// Link indices touching each site, sorted by (neighbor, channel).
    by_site: Vec<Vec<usize>>,
}

struct LinkSlot {
    from: usize,
    to: usize,
    channel: usize,
    load: f64,
    capacity: f64,
}

impl LinkState {
    fn new(solution: &Solution, instance: &PlanningInstance) -> Self {
        let mut entries: Vec<LinkSlot> = solution
            .links
            .iter()
            .map(|l| LinkSlot {
                from: l.from,
                to: l.to,
                channel: l.channel,
                load: 0.0,
                capacity: instance.link_capacity(l.from, l.to, l.channel),
            })
            .collect();
        entries.sort_by_key(|e| (e.from.min(e.to), e.from.max(e.to), e.channel));
        let mut by_site = vec![Vec::new(); solution.num_sites()];
        for (idx, e) in entries.iter().enumerate() {
            by_site[e.from].push(idx);
            if e.to != e.from {
                by_site[e.to].push(idx);
            }
        }
        let other = |idx: usize, j: usize| {
            let e = &entries[idx];
            if e.from == j {
                e.to
            } else {
                e.from
            }
        };
        for (j, list) in by_site.iter_mut().enumerate() {
            list.sort_by_key(|&idx| (other(idx, j), entries[idx].channel));
        }
        LinkState { entries, by_site }
    }

    fn other(&self, idx: usize, j: usize) -> usize {
        let e = &self.entries[idx];
        if e.from == j {
            e.to
        } else {
            e.from
        }
    }

    /// Lowest-channel link able to carry `demand` from `u` to `v`.
    ///
    /// A loaded link keeps its orientation; flow may not be pushed against it.
    fn usable(&self, u: usize, v: usize, demand: f64) -> Option<usize> {
        self.by_site[u].iter().copied().find(|&idx| {
            let e = &self.entries[idx];
            self.other(idx, u) == v
                && u != v
                && (e.load == 0.0 || e.from == u)
                && e.load + demand <= e.capacity + FEASIBILITY_TOL
        })
    }

    fn push(&mut self, u: usize, v: usize, demand: f64) {
        let idx = self.usable(u, v, demand).expect("path edge was usable");
        let e = &mut self.entries[idx];
        if e.from != u {
            std::mem::swap(&mut e.from, &mut e.to);
        }
        e.load += demand;
    }

    /// Lexicographically smallest shortest usable path `source -> target`.
    fn shortest_path(&self, source: usize, target: usize, demand: f64) -> Option<Vec<usize>> {
        let s = self.by_site.len();
        // Distances to `target`, following usable edges backwards.
        let mut dist = vec![UNREACHABLE; s];
        dist[target] = 0;
        let mut queue = VecDeque::from([target]);
        while let Some(v) = queue.pop_front() {
            if v == source {
                break;
            }
            for &idx in &self.by_site[v] {
                let u = self.other(idx, v);
                if dist[u] == UNREACHABLE && self.usable(u, v, demand).is_some() {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        if dist[source] == UNREACHABLE {
            return None;
        }
        let mut path = vec![source];
        let mut u = source;
        while u != target {
            let next = self.by_site[u]
                .iter()
                .map(|&idx| self.other(idx, u))
                .filter(|&v| dist[v] != UNREACHABLE && dist[v] + 1 == dist[u])
                .find(|&v| self.usable(u, v, demand).is_some())?;
            path.push(next);
            u = next;
        }
        Some(path)
    }
}

/// Routes every site's assigned demand, unsplit, to a gateway and fills in
/// `f` and `F`.
///
/// Sources are handled in increasing site order. Gateways are tried nearest
/// first by hop count over established links (ties by index); for each, the
/// lexicographically smallest shortest path with spare capacity is taken if
/// it is within the hop bound. A loaded link is never traversed against its
/// flow, so stored link orientation always matches the flow direction.
pub fn route_flows(
    solution: &mut Solution,
    instance: &PlanningInstance,
) -> Result<Vec<RoutingTrace>> {
    solution.clear_flows();
    let demand = solution.site_demands(instance);
    let gateways: Vec<usize> = solution.gateway_sites().collect();
    let mut state = LinkState::new(solution, instance);
    let adjacency = undirected_adjacency(solution);
    let mut hops = vec![UNREACHABLE; solution.num_sites()];
    let mut traces = Vec::new();

    for (source, &d) in demand.iter().enumerate() {
        if d <= 0.0 {
            continue;
        }
        bfs(&adjacency, source, &mut hops);
        let mut order: Vec<usize> = gateways
            .iter()
            .copied()
            .filter(|&g| hops[g] <= instance.hop_bound)
            .collect();
        order.sort_by_key(|&g| (hops[g], g));

        let route = order.into_iter().find_map(|g| {
            let path = state.shortest_path(source, g, d)?;
            (path.len() - 1 <= instance.hop_bound).then_some((g, path))
        });
        let Some((gateway, path)) = route else {
            solution.clear_flows();
            return Err(Error::RoutingInfeasible { site: source });
        };
        for hop in path.windows(2) {
            state.push(hop[0], hop[1], d);
        }
        solution.internet_flow[gateway] += d;
        traces.push(RoutingTrace {
            ap_site: source,
            gateway_site: gateway,
            path,
            demand: d,
        });
    }

    solution.links = state
        .entries
        .iter()
        .map(|e| {
            // Idle links go back to lower-index-first orientation.
            if e.load == 0.0 && e.from > e.to {
                LinkId::new(e.to, e.from, e.channel)
            } else {
                LinkId::new(e.from, e.to, e.channel)
            }
        })
        .collect();
    solution.flows = state
        .entries
        .iter()
        .filter(|e| e.load > 0.0)
        .map(|e| (LinkId::new(e.from, e.to, e.channel), e.load))
        .collect();
    Ok(traces)
}

/// `Σ_i T_i x_ij + Σ_l Σ_k (f_jl^k + f_lj^k) - F_j`, the balance expression
/// taken term by term with both flow directions added.
///
/// Diagnostic only: adding inflow and outflow does not express
/// conservation. See [`canonical_flow_residual`] for the conserved form.
pub fn literal_flow_balance(solution: &Solution, instance: &PlanningInstance, j: usize) -> f64 {
    let demand: f64 = solution
        .assignment
        .iter()
        .filter(|&&(_, site)| site == j)
        .map(|&(i, _)| instance.traffic(i))
        .sum();
    let through: f64 = solution
        .flows
        .iter()
        .filter(|(l, _)| l.touches(j))
        .map(|(_, &v)| v)
        .sum();
    demand + through - solution.internet_flow[j]
}

/// `demand + inflow - outflow - F_j`; zero at every node of a routed solution.
pub fn canonical_flow_residual(solution: &Solution, instance: &PlanningInstance, j: usize) -> f64 {
    let demand: f64 = solution
        .assignment
        .iter()
        .filter(|&&(_, site)| site == j)
        .map(|&(i, _)| instance.traffic(i))
        .sum();
    let mut residual = demand - solution.internet_flow[j];
    for (l, &v) in &solution.flows {
        if l.to == j {
            residual += v;
        }
        if l.from == j {
            residual -= v;
        }
    }
    residual
}

/// Largest absolute canonical residual over all sites.
pub fn max_flow_residual(solution: &Solution, instance: &PlanningInstance) -> f64 {
    (0..solution.num_sites())
        .map(|j| canonical_flow_residual(solution, instance, j).abs())
        .fold(0.0, f64::max)
}

/// `(site, F)` for every gateway-flagged site, in site order.
pub fn gateway_throughputs(solution: &Solution) -> Vec<(usize, f64)> {
    solution
        .gateway_sites()
        .map(|j| (j, solution.internet_flow[j]))
        .collect()
}
