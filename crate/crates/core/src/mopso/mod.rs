//! Multi-objective swarm search: a population of feasible plans explored by
//! mutation and reconstruction, feeding a bounded Pareto archive kept
//! diverse by crowding distance.

mod archive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::{
    assign_channels, connect_backbone, construct_feasible, default_gateway_count,
    place_access_points, place_relays, route_with_gateway_growth, ConstructConfig, GatewayCount,
};
use crate::error::{Error, Result};
use crate::instance::PlanningInstance;
use crate::model::{
    check_constraints, dominates_unchecked, CoverageMode, Metrics, ModelVariant, ObjectiveVector,
    Solution, FEASIBILITY_TOL,
};

pub use archive::{
    cheapest_solution, crowding_distance, ArchiveEntry, ArchiveFile, ArchiveFileEntry,
    ParetoArchive, DUPLICATE_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MopsoConfig {
    pub swarm_size: usize,
    /// Generations, counting the initial swarm as generation 0.
    pub gmax: usize,
    /// Per-AP removal and per-gateway move probability.
    pub mutation: f64,
    pub archive_capacity: usize,
    pub seed: u64,
    pub variant: ModelVariant,
    pub coverage_mode: CoverageMode,
    pub construct: ConstructConfig,
    /// Mutation attempts before a particle keeps its current solution.
    pub mutation_retries: usize,
    /// Evaluate particles on the rayon pool.
    pub parallel: bool,
    /// Cross each particle with an archive leader before mutating.
    pub recombine: bool,
}

impl Default for MopsoConfig {
    fn default() -> Self {
        MopsoConfig {
            swarm_size: 50,
            gmax: 100,
            mutation: 0.1,
            archive_capacity: 100,
            seed: 0,
            variant: ModelVariant::Lglb,
            coverage_mode: CoverageMode::Assigned,
            construct: ConstructConfig::default(),
            mutation_retries: 10,
            parallel: true,
            recombine: false,
        }
    }
}

impl MopsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size == 0 {
            return Err(Error::Parameter("swarm size must be at least 1".into()));
        }
        if self.gmax == 0 {
            return Err(Error::Parameter("gmax must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation) {
            return Err(Error::Parameter(format!(
                "mutation factor {} outside [0, 1]",
                self.mutation
            )));
        }
        if self.archive_capacity == 0 {
            return Err(Error::Parameter(
                "archive capacity must be at least 1".into(),
            ));
        }
        if self.construct.max_retries == 0 || self.mutation_retries == 0 {
            return Err(Error::Parameter("retry budgets must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub current: Solution,
    pub metrics: Metrics,
    pub objectives: ObjectiveVector,
    pub personal_best: (Solution, Metrics, ObjectiveVector),
    rng: ChaCha8Rng,
}

impl Particle {
    fn new(current: Solution, metrics: Metrics, variant: ModelVariant, rng: ChaCha8Rng) -> Self {
        let objectives = metrics.objectives(variant);
        Particle {
            personal_best: (current.clone(), metrics, objectives.clone()),
            current,
            metrics,
            objectives,
            rng,
        }
    }

    /// Moves to `next`; the personal best follows unless it dominates `next`.
    fn advance(&mut self, next: Solution, metrics: Metrics, variant: ModelVariant) {
        self.objectives = metrics.objectives(variant);
        self.metrics = metrics;
        self.current = next;
        if !dominates_unchecked(&self.personal_best.2 .0, &self.objectives.0) {
            self.personal_best = (self.current.clone(), self.metrics, self.objectives.clone());
        }
    }
}

/// Independent random stream for particle `index`.
pub fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Best values in the archive after one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub archive_size: usize,
    pub min_cost: u64,
    pub max_coverage: u64,
    pub max_link_residual: f64,
    pub min_gateway_balance: f64,
}

impl GenerationStats {
    fn of(generation: usize, archive: &ParetoArchive) -> Self {
        let m = archive.entries().iter().map(|e| e.metrics);
        GenerationStats {
            generation,
            archive_size: archive.len(),
            min_cost: m.clone().map(|m| m.cost).min().unwrap_or(0),
            max_coverage: m.clone().map(|m| m.coverage).max().unwrap_or(0),
            max_link_residual: m
                .clone()
                .map(|m| m.link_residual)
                .reduce(f64::max)
                .unwrap_or(0.0),
            min_gateway_balance: m.map(|m| m.gateway_balance).reduce(f64::min).unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub archive: ParetoArchive,
    pub stats: Vec<GenerationStats>,
    pub particles: Vec<Particle>,
}

/// Applies one mutation and rebuilds the network around it.
///
/// Each AP is removed with probability `mutation` and relays are re-derived
/// from the surviving APs; unserved DPs then get new APs, each DP moves to
/// another covering AP with probability `mutation`, relays and backbone
/// are rebuilt, surviving gateway flags each move with probability
/// `mutation`, the gateway budget is refilled, one gateway is added and one
/// surplus gateway dropped, each with probability `mutation` (`Auto` count
/// only), and channels and flows are recomputed. Infeasible outcomes are retried; after `retries` failures the
/// input is returned unchanged.
pub fn mutate<R: Rng + ?Sized>(
    solution: &Solution,
    instance: &PlanningInstance,
    mutation: f64,
    rng: &mut R,
    gateways: GatewayCount,
    retries: usize,
) -> Solution {
    for _ in 0..retries {
        if let Some(next) = mutate_once(solution.clone(), instance, mutation, rng, gateways) {
            return next;
        }
    }
    solution.clone()
}

fn mutate_once<R: Rng + ?Sized>(
    mut sol: Solution,
    instance: &PlanningInstance,
    mutation: f64,
    rng: &mut R,
    gateways: GatewayCount,
) -> Option<Solution> {
    let old_gateways: Vec<usize> = sol.gateway_sites().collect();
    let aps: Vec<usize> = sol.ap_sites().collect();
    for j in aps {
        if rng.gen_bool(mutation) {
            sol.uninstall(j);
        }
    }
    let relays: Vec<usize> = (0..sol.num_sites()).filter(|&j| sol.relay[j]).collect();
    for j in relays {
        sol.uninstall(j);
    }
    sol.gateway.iter_mut().for_each(|g| *g = false);
    sol.clear_network();

    place_access_points(&mut sol, instance, rng);
    reassign_demand_points(&mut sol, instance, mutation, rng);
    place_relays(&mut sol, instance).ok()?;
    connect_backbone(&mut sol, instance).ok()?;

    for g in old_gateways {
        if !sol.installed[g] {
            continue;
        }
        if rng.gen_bool(mutation) {
            let spare: Vec<usize> = sol
                .installed_sites()
                .filter(|&j| !sol.gateway[j] && j != g)
                .collect();
            if !spare.is_empty() {
                sol.gateway[spare[rng.gen_range(0..spare.len())]] = true;
                continue;
            }
        }
        sol.gateway[g] = true;
    }
    let budget = match gateways {
        GatewayCount::Auto => default_gateway_count(&sol, instance),
        GatewayCount::Fixed(c) => c,
    }
    .min(sol.count_installed());
    let add_gateway = |sol: &mut Solution, rng: &mut R| {
        let spare: Vec<usize> = sol.installed_sites().filter(|&j| !sol.gateway[j]).collect();
        if !spare.is_empty() {
            sol.gateway[spare[rng.gen_range(0..spare.len())]] = true;
        }
    };
    let drop_gateway = |sol: &mut Solution, rng: &mut R| {
        let flagged: Vec<usize> = sol.gateway_sites().collect();
        sol.gateway[flagged[rng.gen_range(0..flagged.len())]] = false;
    };
    while sol.count_gateways() < budget {
        add_gateway(&mut sol, rng);
    }
    match gateways {
        GatewayCount::Fixed(c) => {
            while sol.count_gateways() > c {
                drop_gateway(&mut sol, rng);
            }
        }
        GatewayCount::Auto => {
            // The gateway count itself drifts, never below the demand-based budget.
            if rng.gen_bool(mutation) {
                add_gateway(&mut sol, rng);
            }
            if sol.count_gateways() > budget && rng.gen_bool(mutation) {
                drop_gateway(&mut sol, rng);
            }
        }
    }

    assign_channels(&mut sol, instance).ok()?;
    route_with_gateway_growth(&mut sol, instance, rng, gateways).ok()?;
    check_constraints(&sol, instance).feasible.then_some(sol)
}

/// Moves each assigned DP, with probability `mutation`, to a uniformly
/// random other covering AP with room for it. A DP stays if it is the last
/// one on its AP.
fn reassign_demand_points<R: Rng + ?Sized>(
    sol: &mut Solution,
    instance: &PlanningInstance,
    mutation: f64,
    rng: &mut R,
) {
    let mut load = sol.site_demands(instance);
    let mut hosted = vec![0usize; sol.num_sites()];
    for &(_, j) in &sol.assignment {
        hosted[j] += 1;
    }
    let pairs: Vec<(usize, usize)> = sol.assignment.iter().copied().collect();
    for (i, from) in pairs {
        if !rng.gen_bool(mutation) || hosted[from] < 2 {
            continue;
        }
        let t = instance.traffic(i);
        let targets: Vec<usize> = instance
            .coverage()
            .sites_covering(i)
            .iter()
            .copied()
            .filter(|&j| {
                j != from
                    && sol.access_point[j]
                    && load[j] + t <= instance.max_capacity + FEASIBILITY_TOL
            })
            .collect();
        if targets.is_empty() {
            continue;
        }
        let to = targets[rng.gen_range(0..targets.len())];
        sol.assignment.remove(&(i, from));
        sol.assignment.insert((i, to));
        load[from] -= t;
        load[to] += t;
        hosted[from] -= 1;
        hosted[to] += 1;
    }
}

/// Child taking, site by site, the AP (with its DPs) and gateway flag of a
/// randomly chosen parent. Relays and links are left for reconstruction;
/// a gateway flag on a site that ends up uninstalled is dropped there.
fn recombine<R: Rng + ?Sized>(a: &Solution, b: &Solution, rng: &mut R) -> Solution {
    let mut child = Solution::empty(a.num_sites(), a.num_dps(), a.num_channels());
    let mut taken = vec![false; a.num_dps()];
    for j in 0..a.num_sites() {
        let parent = if rng.gen_bool(0.5) { a } else { b };
        if parent.access_point[j] {
            child.install_ap(j);
            for &(i, site) in &parent.assignment {
                if site == j && !taken[i] {
                    taken[i] = true;
                    child.assignment.insert((i, j));
                }
            }
        }
        child.gateway[j] = parent.gateway[j];
    }
    child
}

fn evolve(
    particle: &mut Particle,
    instance: &PlanningInstance,
    config: &MopsoConfig,
    leaders: &[Solution],
) {
    let rng = &mut particle.rng;
    let base = if config.recombine && !leaders.is_empty() {
        let guide = if rng.gen_bool(0.5) {
            &leaders[rng.gen_range(0..leaders.len())]
        } else {
            &particle.personal_best.0
        };
        let child = recombine(&particle.current, guide, rng);
        // Rebuild the child without further AP removal so it is feasible.
        mutate_once(child, instance, 0.0, rng, config.construct.gateways)
            .unwrap_or_else(|| particle.current.clone())
    } else {
        particle.current.clone()
    };
    let next = mutate(
        &base,
        instance,
        config.mutation,
        &mut particle.rng,
        config.construct.gateways,
        config.mutation_retries,
    );
    let metrics = Metrics::measure(&next, instance, config.coverage_mode);
    particle.advance(next, metrics, config.variant);
}

/// Runs the optimizer; generation 0 is the constructed initial swarm.
pub fn run(instance: &PlanningInstance, config: &MopsoConfig) -> Result<RunResult> {
    config.validate()?;
    let init = |index: usize| -> Result<Particle> {
        let mut rng = particle_rng(config.seed, index);
        let solution = construct_feasible(instance, &mut rng, &config.construct)?;
        let metrics = Metrics::measure(&solution, instance, config.coverage_mode);
        Ok(Particle::new(solution, metrics, config.variant, rng))
    };
    let mut particles: Vec<Particle> = if config.parallel {
        (0..config.swarm_size)
            .into_par_iter()
            .map(init)
            .collect::<Result<_>>()?
    } else {
        (0..config.swarm_size).map(init).collect::<Result<_>>()?
    };

    let mut archive = ParetoArchive::new(config.archive_capacity, config.variant)?;
    for p in &particles {
        archive.update(&p.current, p.metrics);
    }
    let mut stats = vec![GenerationStats::of(0, &archive)];

    for generation in 1..config.gmax {
        archive.sort_by_crowding();
        let leaders: Vec<Solution> = if config.recombine {
            let top = archive.len().div_ceil(10).max(1);
            archive.entries()[..top]
                .iter()
                .map(|e| e.solution.clone())
                .collect()
        } else {
            Vec::new()
        };
        if config.parallel {
            particles
                .par_iter_mut()
                .for_each(|p| evolve(p, instance, config, &leaders));
        } else {
            particles
                .iter_mut()
                .for_each(|p| evolve(p, instance, config, &leaders));
        }
        for p in &particles {
            archive.update(&p.current, p.metrics);
        }
        debug_assert!(archive.is_pairwise_nondominated());
        stats.push(GenerationStats::of(generation, &archive));
    }
    archive.sort_by_crowding();
    Ok(RunResult {
        archive,
        stats,
        particles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_grid_instance, GridSpec, RadioParams};

    fn small() -> PlanningInstance {
        build_grid_instance(&GridSpec::new(4, 4, 40), &RadioParams::default(), 8).unwrap()
    }

    fn quick(variant: ModelVariant) -> MopsoConfig {
        MopsoConfig {
            swarm_size: 6,
            gmax: 8,
            variant,
            seed: 3,
            ..MopsoConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(MopsoConfig::default().validate().is_ok());
        for bad in [
            MopsoConfig {
                swarm_size: 0,
                ..MopsoConfig::default()
            },
            MopsoConfig {
                gmax: 0,
                ..MopsoConfig::default()
            },
            MopsoConfig {
                mutation: 1.5,
                ..MopsoConfig::default()
            },
            MopsoConfig {
                archive_capacity: 0,
                ..MopsoConfig::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn zero_mutation_is_identity() {
        let inst = small();
        let mut rng = particle_rng(1, 0);
        let sol = construct_feasible(&inst, &mut rng, &ConstructConfig::default()).unwrap();
        let same = mutate(&sol, &inst, 0.0, &mut rng, GatewayCount::Auto, 5);
        assert_eq!(same, sol);
    }

    #[test]
    fn full_mutation_stays_feasible() {
        let inst = small();
        let mut rng = particle_rng(2, 0);
        let mut sol = construct_feasible(&inst, &mut rng, &ConstructConfig::default()).unwrap();
        for _ in 0..20 {
            sol = mutate(&sol, &inst, 1.0, &mut rng, GatewayCount::Auto, 10);
            assert!(check_constraints(&sol, &inst).feasible);
        }
    }

    #[test]
    fn seeded_mutation_is_deterministic() {
        let inst = small();
        let sol = construct_feasible(&inst, &mut particle_rng(4, 0), &ConstructConfig::default())
            .unwrap();
        let a = mutate(
            &sol,
            &inst,
            0.3,
            &mut particle_rng(9, 0),
            GatewayCount::Auto,
            10,
        );
        let b = mutate(
            &sol,
            &inst,
            0.3,
            &mut particle_rng(9, 0),
            GatewayCount::Auto,
            10,
        );
        assert_eq!(a, b);
    }

    #[test]
    fn single_particle_single_generation() {
        let inst = small();
        let config = MopsoConfig {
            swarm_size: 1,
            gmax: 1,
            ..quick(ModelVariant::Lglb)
        };
        let result = run(&inst, &config).unwrap();
        assert_eq!(result.archive.len(), 1);
        assert_eq!(
            result.archive.entries()[0].objectives,
            result.particles[0].objectives
        );
        assert_eq!(result.stats.len(), 1);
    }

    #[test]
    fn archive_is_sound_and_best_cost_never_regresses() {
        let inst = small();
        for variant in ModelVariant::ALL {
            let result = run(&inst, &quick(variant)).unwrap();
            assert!(result.archive.is_pairwise_nondominated());
            for e in result.archive.entries() {
                assert!(check_constraints(&e.solution, &inst).feasible);
                assert_eq!(e.objectives.len(), variant.objective_count());
            }
            assert!(result
                .stats
                .windows(2)
                .all(|w| w[1].min_cost <= w[0].min_cost));
        }
    }

    #[test]
    fn serial_and_parallel_agree() {
        let inst = small();
        let serial = run(
            &inst,
            &MopsoConfig {
                parallel: false,
                ..quick(ModelVariant::Lglb)
            },
        )
        .unwrap();
        let parallel = run(
            &inst,
            &MopsoConfig {
                parallel: true,
                ..quick(ModelVariant::Lglb)
            },
        )
        .unwrap();
        assert_eq!(serial.archive, parallel.archive);
        assert_eq!(serial.stats, parallel.stats);
    }

    #[test]
    fn recombination_mode_runs_feasibly() {
        let inst = small();
        let result = run(
            &inst,
            &MopsoConfig {
                recombine: true,
                ..quick(ModelVariant::Llb)
            },
        )
        .unwrap();
        assert!(result.archive.is_pairwise_nondominated());
        for e in result.archive.entries() {
            assert!(check_constraints(&e.solution, &inst).feasible);
        }
    }
}
