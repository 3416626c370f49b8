//! Randomized construction of feasible solutions: AP placement, relay
//! placement, backbone repair, gateway selection, channel assignment and
//! routing, retried as a whole on failure.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{route_flows, RoutingTrace};
use crate::instance::PlanningInstance;
use crate::model::{check_constraints, LinkId, Solution, FEASIBILITY_TOL};

/// How many gateways the construction flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayCount {
    /// `max(1, ceil(assigned demand / C_max))`, capped at the installed count.
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructConfig {
    pub gateways: GatewayCount,
    pub max_retries: usize,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        ConstructConfig {
            gateways: GatewayCount::Auto,
            max_retries: 200,
        }
    }
}

/// Installs APs at random covering sites until no unassigned DP can be served.
///
/// Existing APs with spare capacity take part in the draw, so the same routine
/// refills a solution whose APs were partly removed.
pub fn place_access_points<R: Rng + ?Sized>(
    solution: &mut Solution,
    instance: &PlanningInstance,
    rng: &mut R,
) {
    let cov = instance.coverage();
    let c_max = instance.max_capacity;
    let mut load = solution.site_demands(instance);
    let mut assigned: Vec<bool> = (0..instance.num_dps())
        .map(|i| solution.is_assigned(i))
        .collect();

    let fits = |load: f64, i: usize| load + instance.traffic(i) <= c_max + FEASIBILITY_TOL;
    loop {
        let candidates: Vec<usize> = (0..instance.num_sites())
            .filter(|&j| solution.access_point[j] || !solution.installed[j])
            .filter(|&j| {
                cov.dps_covered_by(j)
                    .iter()
                    .any(|&i| !assigned[i] && fits(load[j], i))
            })
            .collect();
        if candidates.is_empty() {
            break;
        }
        let j = candidates[rng.gen_range(0..candidates.len())];
        solution.install_ap(j);
        for &i in cov.dps_covered_by(j) {
            if !assigned[i] && fits(load[j], i) {
                assigned[i] = true;
                load[j] += instance.traffic(i);
                solution.assignment.insert((i, j));
            }
        }
    }
}

/// Gives every AP up to its class target of installed grid neighbors
/// (corner 2, edge 3, internal 4), adding relays north, east, south, west.
pub fn place_relays(solution: &mut Solution, instance: &PlanningInstance) -> Result<()> {
    let aps: Vec<usize> = solution.ap_sites().collect();
    for ap in aps {
        let neighbors = instance.grid_neighbors(ap);
        let target = instance
            .classify_site(ap)?
            .relay_target()
            .min(neighbors.len());
        let mut have = neighbors.iter().filter(|&&l| solution.installed[l]).count();
        for &l in &neighbors {
            if have >= target {
                break;
            }
            if !solution.installed[l] {
                solution.install_relay(l);
                have += 1;
            }
        }
    }
    Ok(())
}

fn installed_components(solution: &Solution, instance: &PlanningInstance) -> Vec<Vec<usize>> {
    let b = instance.connectivity();
    let mut seen = vec![false; solution.num_sites()];
    let mut components = Vec::new();
    for start in solution.installed_sites() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in b.neighbors(u) {
                if solution.installed[v] && !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Joins the installed-node graph into one component with relay chains and
/// adds relays until every installed node has two installed b-neighbors.
pub fn connect_backbone(solution: &mut Solution, instance: &PlanningInstance) -> Result<()> {
    let b = instance.connectivity();
    let s = instance.num_sites();
    loop {
        let components = installed_components(solution, instance);
        if components.len() > 1 {
            // Shortest chain of uninstalled sites from the first component to any other.
            let first = &components[0];
            let mut parent = vec![usize::MAX; s];
            let mut in_first = vec![false; s];
            let mut queue = VecDeque::new();
            for &j in first {
                in_first[j] = true;
                parent[j] = j;
                queue.push_back(j);
            }
            let mut reached = None;
            'search: while let Some(u) = queue.pop_front() {
                for &v in b.neighbors(u) {
                    if parent[v] != usize::MAX {
                        continue;
                    }
                    parent[v] = u;
                    if solution.installed[v] {
                        reached = Some(v);
                        break 'search;
                    }
                    queue.push_back(v);
                }
            }
            let Some(mut v) = reached else {
                return Err(Error::Construction(format!(
                    "component containing site {} cannot be joined to the rest",
                    first[0]
                )));
            };
            while !in_first[parent[v]] {
                v = parent[v];
                solution.install_relay(v);
            }
            continue;
        }

        let installed_neighbors =
            |sol: &Solution, j: usize| b.neighbors(j).iter().filter(|&&l| sol.installed[l]).count();
        let deficient = solution
            .installed_sites()
            .find(|&j| installed_neighbors(solution, j) < 2);
        let Some(j) = deficient else {
            return Ok(());
        };
        let pick = b
            .neighbors(j)
            .iter()
            .copied()
            .filter(|&l| !solution.installed[l])
            .max_by_key(|&l| (installed_neighbors(solution, l), std::cmp::Reverse(l)));
        match pick {
            Some(l) => solution.install_relay(l),
            None => {
                return Err(Error::Construction(format!(
                    "site {j} has fewer than two potential neighbors"
                )))
            }
        }
    }
}

/// Flags installed nodes as gateways uniformly at random.
pub fn select_gateways<R: Rng + ?Sized>(
    solution: &mut Solution,
    instance: &PlanningInstance,
    rng: &mut R,
    count: GatewayCount,
) -> Result<()> {
    let installed: Vec<usize> = solution.installed_sites().collect();
    let count = match count {
        GatewayCount::Auto => default_gateway_count(solution, instance).min(installed.len()),
        GatewayCount::Fixed(c) => {
            if c == 0 || c > installed.len() {
                return Err(Error::Parameter(format!(
                    "gateway count {c} must be between 1 and the {} installed nodes",
                    installed.len()
                )));
            }
            c
        }
    };
    solution.gateway.iter_mut().for_each(|g| *g = false);
    for idx in sample(rng, installed.len(), count) {
        solution.gateway[installed[idx]] = true;
    }
    Ok(())
}

/// Routes flows; in `Auto` mode a stranded site triggers one more uniformly
/// random gateway among the installed nodes and a fresh routing pass.
pub fn route_with_gateway_growth<R: Rng + ?Sized>(
    solution: &mut Solution,
    instance: &PlanningInstance,
    rng: &mut R,
    count: GatewayCount,
) -> Result<Vec<RoutingTrace>> {
    loop {
        match route_flows(solution, instance) {
            Err(Error::RoutingInfeasible { site }) if count == GatewayCount::Auto => {
                let spare: Vec<usize> = solution
                    .installed_sites()
                    .filter(|&j| !solution.gateway[j])
                    .collect();
                if spare.is_empty() {
                    return Err(Error::RoutingInfeasible { site });
                }
                solution.gateway[spare[rng.gen_range(0..spare.len())]] = true;
            }
            other => return other,
        }
    }
}

/// `max(1, ceil(assigned demand / C_max))`.
pub fn default_gateway_count(solution: &Solution, instance: &PlanningInstance) -> usize {
    let demand = solution.assigned_demand(instance);
    (((demand / instance.max_capacity) - FEASIBILITY_TOL).ceil() as usize).max(1)
}

/// Establishes links between installed b-neighbors and colors them.
///
/// All candidate links are taken first. Nodes above `R` incident links
/// drop links (preferring ones that do not disconnect the backbone, then the
/// neighbor with the most links) as long as the neighbor keeps two. The
/// survivors get the lowest channel free at both endpoints, in increasing
/// `(j, l)` order. Links are oriented lower index first.
pub fn assign_channels(solution: &mut Solution, instance: &PlanningInstance) -> Result<()> {
    solution.clear_network();
    let b = instance.connectivity();
    let s = instance.num_sites();
    let mut adjacency: Vec<BTreeSet<usize>> = (0..s)
        .map(|j| {
            if solution.installed[j] {
                b.neighbors(j)
                    .iter()
                    .copied()
                    .filter(|&l| solution.installed[l] && l != j)
                    .collect()
            } else {
                BTreeSet::new()
            }
        })
        .collect();

    for u in 0..s {
        while adjacency[u].len() > instance.radios {
            let victim = adjacency[u]
                .iter()
                .copied()
                .filter(|&v| adjacency[v].len() > 2)
                .min_by_key(|&v| {
                    (
                        is_bridge(&adjacency, u, v),
                        std::cmp::Reverse(adjacency[v].len()),
                        v,
                    )
                });
            let Some(v) = victim else {
                return Err(Error::Channelization { site: u });
            };
            adjacency[u].remove(&v);
            adjacency[v].remove(&u);
        }
    }

    let mut used = vec![vec![false; instance.channels]; s];
    for j in 0..s {
        for &l in adjacency[j].range(j + 1..) {
            let k = (0..instance.channels)
                .find(|&k| !used[j][k] && !used[l][k])
                .ok_or(Error::Channelization { site: j })?;
            used[j][k] = true;
            used[l][k] = true;
            solution.links.insert(LinkId::new(j, l, k));
            solution.channel_use.insert((j, k));
            solution.channel_use.insert((l, k));
        }
    }

    match solution.installed_sites().find(|&j| adjacency[j].len() < 2) {
        Some(site) => Err(Error::Channelization { site }),
        None => Ok(()),
    }
}

fn is_bridge(adjacency: &[BTreeSet<usize>], u: usize, v: usize) -> bool {
    let mut seen = vec![false; adjacency.len()];
    seen[u] = true;
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        for &y in &adjacency[x] {
            if (x == u && y == v) || seen[y] {
                continue;
            }
            if y == v {
                return false;
            }
            seen[y] = true;
            queue.push_back(y);
        }
    }
    true
}

/// Channels plus routing on a solution whose roles, assignments and
/// gateways are already fixed.
pub fn build_network(
    solution: &mut Solution,
    instance: &PlanningInstance,
) -> Result<Vec<RoutingTrace>> {
    assign_channels(solution, instance)?;
    route_flows(solution, instance)
}

/// One pass of the full pipeline from an empty solution.
pub fn construct_once<R: Rng + ?Sized>(
    instance: &PlanningInstance,
    rng: &mut R,
    gateways: GatewayCount,
) -> Result<(Solution, Vec<RoutingTrace>)> {
    let mut solution = Solution::for_instance(instance);
    place_access_points(&mut solution, instance, rng);
    place_relays(&mut solution, instance)?;
    connect_backbone(&mut solution, instance)?;
    select_gateways(&mut solution, instance, rng, gateways)?;
    assign_channels(&mut solution, instance)?;
    let traces = route_with_gateway_growth(&mut solution, instance, rng, gateways)?;
    let report = check_constraints(&solution, instance);
    if !report.feasible {
        let ids: Vec<String> = report.violated().map(|e| e.id.to_string()).collect();
        return Err(Error::Construction(format!(
            "constructed plan violates {}",
            ids.join(", ")
        )));
    }
    Ok((solution, traces))
}

/// Runs the pipeline until it yields a solution passing every constraint.
pub fn construct_feasible<R: Rng + ?Sized>(
    instance: &PlanningInstance,
    rng: &mut R,
    config: &ConstructConfig,
) -> Result<Solution> {
    construct_feasible_traced(instance, rng, config).map(|(s, _)| s)
}

pub fn construct_feasible_traced<R: Rng + ?Sized>(
    instance: &PlanningInstance,
    rng: &mut R,
    config: &ConstructConfig,
) -> Result<(Solution, Vec<RoutingTrace>)> {
    if config.max_retries == 0 {
        return Err(Error::Parameter("max_retries must be at least 1".into()));
    }
    let mut last = None;
    for _ in 0..config.max_retries {
        match construct_once(instance, rng, config.gateways) {
            Ok(found) => return Ok(found),
            Err(e) if e.is_retryable() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::ConstructionExhausted {
        attempts: config.max_retries,
        cause: Box::new(last.expect("at least one attempt ran")),
    })
}
