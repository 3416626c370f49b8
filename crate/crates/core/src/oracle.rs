//! Exhaustive enumeration of feasible plans on tiny instances and the exact
//! Pareto front they span, used to check the optimizer.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::construct::default_gateway_count;
use crate::error::{Error, Result};
use crate::flow::route_flows;
use crate::instance::PlanningInstance;
use crate::model::{
    check_constraints, dominates_unchecked, CoverageMode, LinkId, Metrics, ModelVariant,
    ObjectiveVector, Solution, FEASIBILITY_TOL,
};
use crate::mopso::ParetoArchive;

pub const MAX_SITES: usize = 6;
pub const MAX_DPS: usize = 8;
pub const MAX_CHANNELS: usize = 3;

/// Per-site load and per-DP host of one assignment.
type AssignmentClass = (Vec<f64>, Vec<Option<usize>>);

/// Objective vectors closer than this in every component are the same point.
pub const MATCH_TOL: f64 = 1e-9;

/// Which part of the solution space is enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnumerationScope {
    /// Plans the construction and mutation operators can produce: DPs are
    /// hosted only by APs, every AP hosts at least one DP, no DP is left
    /// unassigned while a non-saturated covering site exists, each site pair
    /// carries at most one link, and at least the default number of gateways
    /// is flagged.
    #[default]
    Policy,
    /// Every role, gateway, assignment and multi-channel link configuration.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationLimits {
    pub scope: EnumerationScope,
    pub coverage_mode: CoverageMode,
    /// Stop after this many feasible solutions.
    pub max_solutions: Option<usize>,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            scope: EnumerationScope::Policy,
            coverage_mode: CoverageMode::Assigned,
            max_solutions: None,
        }
    }
}

fn guard(instance: &PlanningInstance) -> Result<()> {
    let (s, n, k) = (instance.num_sites(), instance.num_dps(), instance.channels);
    if s > MAX_SITES || n > MAX_DPS || k > MAX_CHANNELS {
        return Err(Error::GuardRefused(format!(
            "instance has {s} sites, {n} DPs, {k} channels; enumeration is limited to at most \
             {MAX_SITES} sites, {MAX_DPS} DPs and {MAX_CHANNELS} channels"
        )));
    }
    Ok(())
}

/// Distinct per-site load vectors reachable by assigning DPs to `aps`,
/// each with one representative assignment and the set of unassigned DPs.
fn assignment_classes(
    instance: &PlanningInstance,
    aps: &[bool],
    scope: EnumerationScope,
) -> Vec<AssignmentClass> {
    let s = instance.num_sites();
    let n = instance.num_dps();
    let cov = instance.coverage();
    // key: (load bits, unassigned mask) -> representative
    type Key = (Vec<u64>, u32);
    let mut states: BTreeMap<Key, (Vec<f64>, Vec<Option<usize>>)> = BTreeMap::new();
    states.insert((vec![0; s], 0), (vec![0.0; s], vec![None; n]));
    for i in 0..n {
        let t = instance.traffic(i);
        let mut next: BTreeMap<Key, (Vec<f64>, Vec<Option<usize>>)> = BTreeMap::new();
        for ((_, mask), (load, assign)) in states {
            next.entry((load.iter().map(|v| v.to_bits()).collect(), mask | (1 << i)))
                .or_insert_with(|| (load.clone(), assign.clone()));
            for &j in cov.sites_covering(i) {
                if !aps[j] || load[j] + t > instance.max_capacity + FEASIBILITY_TOL {
                    continue;
                }
                let mut l2 = load.clone();
                l2[j] += t;
                let mut a2 = assign.clone();
                a2[i] = Some(j);
                next.entry((l2.iter().map(|v| v.to_bits()).collect(), mask))
                    .or_insert((l2, a2));
            }
        }
        states = next;
    }

    states
        .into_iter()
        .filter(|((_, mask), (load, _))| match scope {
            EnumerationScope::Full => true,
            EnumerationScope::Policy => {
                let every_ap_used = (0..s).all(|j| !aps[j] || load[j] > 0.0);
                let maximal = (0..n).filter(|i| mask & (1 << i) != 0).all(|i| {
                    cov.sites_covering(i).iter().all(|&j| {
                        aps[j]
                            && load[j] + instance.traffic(i)
                                > instance.max_capacity + FEASIBILITY_TOL
                    })
                });
                every_ap_used && maximal
            }
        })
        .map(|(_, v)| v)
        .collect()
}

/// Link sets over installed b-neighbor pairs giving every installed node
/// between 2 and R links, each link with a set of channels such that no
/// node sees a channel twice. Channel relabelings are collapsed when all
/// links share one capacity.
fn link_configurations(
    instance: &PlanningInstance,
    installed: &[bool],
    scope: EnumerationScope,
) -> Vec<Vec<LinkId>> {
    let s = instance.num_sites();
    let b = instance.connectivity();
    let pairs: Vec<(usize, usize)> = (0..s)
        .filter(|&j| installed[j])
        .flat_map(|j| {
            b.neighbors(j)
                .iter()
                .copied()
                .filter(move |&l| l > j)
                .map(move |l| (j, l))
        })
        .filter(|&(_, l)| installed[l])
        .collect();
    let k = instance.channels;
    // Channel sets a pair may carry.
    let options: Vec<Vec<usize>> = (1u32..(1 << k))
        .filter(|m| scope == EnumerationScope::Full || m.count_ones() == 1)
        .map(|m| (0..k).filter(|c| m & (1 << c) != 0).collect())
        .collect();
    let collapse = instance.link_capacity.is_empty();

    let mut out = Vec::new();
    let mut used = vec![0u32; s];
    let mut degree = vec![0usize; s];
    let mut links = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        idx: usize,
        pairs: &[(usize, usize)],
        options: &[Vec<usize>],
        instance: &PlanningInstance,
        installed: &[bool],
        collapse: bool,
        next_label: usize,
        used: &mut [u32],
        degree: &mut [usize],
        links: &mut Vec<LinkId>,
        out: &mut Vec<Vec<LinkId>>,
    ) {
        if idx == pairs.len() {
            if (0..installed.len()).all(|j| !installed[j] || degree[j] >= 2) {
                out.push(links.clone());
            }
            return;
        }
        recurse(
            idx + 1,
            pairs,
            options,
            instance,
            installed,
            collapse,
            next_label,
            used,
            degree,
            links,
            out,
        );
        let (j, l) = pairs[idx];
        for chans in options {
            let mask: u32 = chans.iter().map(|&c| 1 << c).sum();
            if used[j] & mask != 0 || used[l] & mask != 0 {
                continue;
            }
            if degree[j] + chans.len() > instance.radios
                || degree[l] + chans.len() > instance.radios
            {
                continue;
            }
            // Unused channels are interchangeable: new labels are taken in order.
            let mut labels = next_label;
            if collapse {
                let mut ok = true;
                for &c in chans {
                    if c == labels {
                        labels += 1;
                    } else if c > labels {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    continue;
                }
            }
            used[j] |= mask;
            used[l] |= mask;
            degree[j] += chans.len();
            degree[l] += chans.len();
            for &c in chans {
                links.push(LinkId::new(j, l, c));
            }
            recurse(
                idx + 1,
                pairs,
                options,
                instance,
                installed,
                collapse,
                labels,
                used,
                degree,
                links,
                out,
            );
            links.truncate(links.len() - chans.len());
            used[j] &= !mask;
            used[l] &= !mask;
            degree[j] -= chans.len();
            degree[l] -= chans.len();
        }
    }
    let start = if collapse { 0 } else { instance.channels };
    recurse(
        0,
        &pairs,
        &options,
        instance,
        installed,
        collapse,
        start,
        &mut used,
        &mut degree,
        &mut links,
        &mut out,
    );
    out
}

/// Visits every feasible solution in the chosen scope, in a fixed order.
pub fn for_each_feasible<F>(
    instance: &PlanningInstance,
    limits: &EnumerationLimits,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(&Solution, &Metrics) -> ControlFlow<()>,
{
    guard(instance)?;
    let s = instance.num_sites();
    let scope = limits.scope;
    let mut link_cache: BTreeMap<Vec<bool>, Vec<Vec<LinkId>>> = BTreeMap::new();
    let mut assign_cache: BTreeMap<Vec<bool>, Vec<AssignmentClass>> = BTreeMap::new();
    let mut yielded = 0usize;

    // roles: 0 empty, 1 AP, 2 relay
    for code in 0..3usize.pow(s as u32) {
        let mut roles = vec![0u8; s];
        let mut c = code;
        for r in roles.iter_mut() {
            *r = (c % 3) as u8;
            c /= 3;
        }
        let installed: Vec<bool> = roles.iter().map(|&r| r != 0).collect();
        let aps: Vec<bool> = roles.iter().map(|&r| r == 1).collect();
        let installed_sites: Vec<usize> = (0..s).filter(|&j| installed[j]).collect();

        let link_sets = link_cache
            .entry(installed.clone())
            .or_insert_with(|| link_configurations(instance, &installed, scope));
        if link_sets.is_empty() {
            continue;
        }
        let classes = assign_cache
            .entry(aps.clone())
            .or_insert_with(|| assignment_classes(instance, &aps, scope));

        for (load, assignment) in classes.iter() {
            let mut base = Solution::for_instance(instance);
            for &j in &installed_sites {
                if aps[j] {
                    base.install_ap(j);
                } else {
                    base.install_relay(j);
                }
            }
            for (i, host) in assignment.iter().enumerate() {
                if let Some(j) = host {
                    base.assignment.insert((i, *j));
                }
            }
            let min_gateways = match scope {
                EnumerationScope::Full => 0,
                EnumerationScope::Policy if installed_sites.is_empty() => 0,
                EnumerationScope::Policy => {
                    default_gateway_count(&base, instance).min(installed_sites.len())
                }
            };
            debug_assert_eq!(base.site_demands(instance), *load);

            for gmask in 0u32..(1 << installed_sites.len()) {
                if (gmask.count_ones() as usize) < min_gateways {
                    continue;
                }
                let mut with_gw = base.clone();
                for (bit, &j) in installed_sites.iter().enumerate() {
                    with_gw.gateway[j] = gmask & (1 << bit) != 0;
                }
                for links in link_sets.iter() {
                    let mut sol = with_gw.clone();
                    for &l in links {
                        sol.links.insert(l);
                        sol.channel_use.insert((l.from, l.channel));
                        sol.channel_use.insert((l.to, l.channel));
                    }
                    if route_flows(&mut sol, instance).is_err() {
                        continue;
                    }
                    if !check_constraints(&sol, instance).feasible {
                        continue;
                    }
                    let metrics = Metrics::measure(&sol, instance, limits.coverage_mode);
                    yielded += 1;
                    if visit(&sol, &metrics).is_break() {
                        return Ok(());
                    }
                    if limits.max_solutions.is_some_and(|m| yielded >= m) {
                        return Ok(());
                    }
                }
            }
        }
    }
    Ok(())
}

/// Every feasible solution in scope with its objective vector.
pub fn enumerate_feasible(
    instance: &PlanningInstance,
    variant: ModelVariant,
    limits: &EnumerationLimits,
) -> Result<Vec<(Solution, ObjectiveVector)>> {
    let mut out = Vec::new();
    for_each_feasible(instance, limits, |sol, m| {
        out.push((sol.clone(), m.objectives(variant)));
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Non-dominated, deduplicated objective vectors, sorted lexicographically.
pub fn pareto_filter(points: &[ObjectiveVector]) -> Vec<ObjectiveVector> {
    let mut front: Vec<ObjectiveVector> = Vec::new();
    for p in points {
        if front
            .iter()
            .any(|f| dominates_unchecked(&f.0, &p.0) || f.approx_eq(p, MATCH_TOL))
        {
            continue;
        }
        front.retain(|f| !dominates_unchecked(&p.0, &f.0));
        front.push(p.clone());
    }
    front.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    front
}

/// The exact front of a tiny instance for one model variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueFront {
    pub instance_hash: String,
    pub variant: ModelVariant,
    pub scope: EnumerationScope,
    pub points: Vec<ObjectiveVector>,
}

pub fn true_pareto_front(
    instance: &PlanningInstance,
    variant: ModelVariant,
    limits: &EnumerationLimits,
) -> Result<TrueFront> {
    let mut front: Vec<ObjectiveVector> = Vec::new();
    for_each_feasible(instance, limits, |_, m| {
        let p = m.objectives(variant);
        if !front
            .iter()
            .any(|f| dominates_unchecked(&f.0, &p.0) || f.approx_eq(&p, MATCH_TOL))
        {
            front.retain(|f| !dominates_unchecked(&p.0, &f.0));
            front.push(p);
        }
        ControlFlow::Continue(())
    })?;
    Ok(TrueFront {
        instance_hash: instance.content_hash(),
        variant,
        scope: limits.scope,
        points: pareto_filter(&front),
    })
}

/// Fronts for several variants of one instance, as stored in fixture files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontFixture {
    pub instance_hash: String,
    pub fronts: Vec<TrueFront>,
}

impl FrontFixture {
    pub fn front(&self, variant: ModelVariant) -> Option<&TrueFront> {
        self.fronts.iter().find(|f| f.variant == variant)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fixture serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Share of archive points not dominated by any true front point.
    pub on_front_fraction: f64,
    /// Share of true front points matched by an archive point.
    pub front_coverage_fraction: f64,
    /// Archive points dominated by some true front point.
    pub violations: Vec<ObjectiveVector>,
    pub archive_size: usize,
    pub front_size: usize,
}

pub fn verify_points(
    variant: ModelVariant,
    points: &[ObjectiveVector],
    truth: &TrueFront,
) -> Result<VerificationReport> {
    if variant != truth.variant {
        return Err(Error::VariantMismatch {
            archive: variant.to_string(),
            truth: truth.variant.to_string(),
        });
    }
    let violations: Vec<ObjectiveVector> = points
        .iter()
        .filter(|p| truth.points.iter().any(|t| dominates_unchecked(&t.0, &p.0)))
        .cloned()
        .collect();
    let on_front_fraction = if points.is_empty() {
        1.0
    } else {
        (points.len() - violations.len()) as f64 / points.len() as f64
    };
    let matched = truth
        .points
        .iter()
        .filter(|t| points.iter().any(|p| p.approx_eq(t, MATCH_TOL)))
        .count();
    let front_coverage_fraction = if truth.points.is_empty() {
        1.0
    } else {
        matched as f64 / truth.points.len() as f64
    };
    Ok(VerificationReport {
        on_front_fraction,
        front_coverage_fraction,
        violations,
        archive_size: points.len(),
        front_size: truth.points.len(),
    })
}

pub fn verify_archive(archive: &ParetoArchive, truth: &TrueFront) -> Result<VerificationReport> {
    verify_points(archive.variant(), &archive.objective_vectors(), truth)
}

/// Distinct objective vectors of a solution list (used by order-independence checks).
pub fn objective_set(points: &[(Solution, ObjectiveVector)]) -> BTreeSet<Vec<u64>> {
    points
        .iter()
        .map(|(_, o)| o.0.iter().map(|v| v.to_bits()).collect())
        .collect()
}
