use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    dominates_unchecked, CoverageMode, Metrics, ModelVariant, ObjectiveVector, Solution,
    SolutionFile,
};

/// Objective vectors closer than this in every component count as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-9;

/// Crowding distance of every vector in a front.
///
/// Per objective the entries are ordered by value (ties by position); the
/// two ends get infinity and interior entries add the normalized gap between
/// their neighbors. Objectives with zero range contribute nothing.
pub fn crowding_distance(vectors: &[ObjectiveVector]) -> Vec<f64> {
    let n = vectors.len();
    let mut cd = vec![0.0; n];
    if n == 0 {
        return cd;
    }
    let m = vectors[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    for obj in 0..m {
        order.sort_by(|&a, &b| {
            vectors[a].0[obj]
                .total_cmp(&vectors[b].0[obj])
                .then(a.cmp(&b))
        });
        let lo = vectors[order[0]].0[obj];
        let hi = vectors[order[n - 1]].0[obj];
        cd[order[0]] = f64::INFINITY;
        cd[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n.saturating_sub(1) {
            let gap = vectors[order[w + 1]].0[obj] - vectors[order[w - 1]].0[obj];
            cd[order[w]] += gap / range;
        }
    }
    cd
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub solution: Solution,
    pub metrics: Metrics,
    pub objectives: ObjectiveVector,
    pub crowding: f64,
}

/// Bounded set of mutually non-dominated feasible solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoArchive {
    capacity: usize,
    variant: ModelVariant,
    entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new(capacity: usize, variant: ModelVariant) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Parameter(
                "archive capacity must be at least 1".into(),
            ));
        }
        Ok(ParetoArchive {
            capacity,
            variant,
            entries: Vec::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn objective_vectors(&self) -> Vec<ObjectiveVector> {
        self.entries.iter().map(|e| e.objectives.clone()).collect()
    }

    /// Offers a feasible, evaluated candidate. Returns whether it was kept.
    pub fn update(&mut self, solution: &Solution, metrics: Metrics) -> bool {
        let objectives = metrics.objectives(self.variant);
        let rejected = self.entries.iter().any(|e| {
            dominates_unchecked(&e.objectives.0, &objectives.0)
                || e.objectives.approx_eq(&objectives, DUPLICATE_TOL)
        });
        if rejected {
            return false;
        }
        self.entries
            .retain(|e| !dominates_unchecked(&objectives.0, &e.objectives.0));
        self.entries.push(ArchiveEntry {
            solution: solution.clone(),
            metrics,
            objectives: objectives.clone(),
            crowding: 0.0,
        });
        self.refresh_crowding();
        if self.entries.len() > self.capacity {
            // The cheapest entry is never evicted, so the best cost cannot regress.
            let keep = cheapest_index(&self.entries);
            let victim = self
                .entries
                .iter()
                .enumerate()
                .filter(|&(i, _)| Some(i) != keep)
                .min_by(|(ia, a), (ib, b)| a.crowding.total_cmp(&b.crowding).then(ib.cmp(ia)))
                .map(|(i, _)| i)
                .expect("archive is non-empty");
            self.entries.remove(victim);
            self.refresh_crowding();
        }
        // The candidate may itself have been evicted.
        self.entries.iter().any(|e| e.objectives == objectives)
    }

    pub fn refresh_crowding(&mut self) {
        let cd = crowding_distance(&self.objective_vectors());
        for (e, d) in self.entries.iter_mut().zip(cd) {
            e.crowding = d;
        }
    }

    /// Orders entries by decreasing crowding distance (stable).
    pub fn sort_by_crowding(&mut self) {
        self.refresh_crowding();
        self.entries
            .sort_by(|a, b| b.crowding.total_cmp(&a.crowding));
    }

    /// Exhaustive pairwise check; true when no entry dominates another.
    pub fn is_pairwise_nondominated(&self) -> bool {
        self.entries.iter().enumerate().all(|(i, a)| {
            self.entries
                .iter()
                .enumerate()
                .all(|(j, b)| i == j || !dominates_unchecked(&a.objectives.0, &b.objectives.0))
        })
    }

    pub fn to_file(&self, coverage_mode: CoverageMode) -> ArchiveFile {
        ArchiveFile {
            variant: self.variant,
            coverage_mode,
            capacity: self.capacity,
            entries: self
                .entries
                .iter()
                .map(|e| ArchiveFileEntry {
                    objectives: e.objectives.clone(),
                    metrics: e.metrics,
                    crowding: e.crowding.is_finite().then_some(e.crowding),
                    solution: SolutionFile::from(&e.solution),
                })
                .collect(),
        }
    }

    pub fn to_json(&self, coverage_mode: CoverageMode) -> String {
        serde_json::to_string_pretty(&self.to_file(coverage_mode)).expect("archive serializes")
    }
}

fn cheapest_index(entries: &[ArchiveEntry]) -> Option<usize> {
    entries
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.metrics
                .cost
                .cmp(&b.metrics.cost)
                .then(b.metrics.coverage.cmp(&a.metrics.coverage))
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
}

/// Entry with minimum cost; ties go to higher coverage, then lower position.
pub fn cheapest_solution(archive: &ParetoArchive) -> Result<&ArchiveEntry> {
    cheapest_index(&archive.entries)
        .map(|i| &archive.entries[i])
        .ok_or(Error::EmptyArchive)
}

/// On-disk archive layout. Infinite crowding distances are written as `null`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchiveFile {
    pub variant: ModelVariant,
    pub coverage_mode: CoverageMode,
    pub capacity: usize,
    pub entries: Vec<ArchiveFileEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchiveFileEntry {
    pub objectives: ObjectiveVector,
    pub metrics: Metrics,
    pub crowding: Option<f64>,
    pub solution: SolutionFile,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector(v.to_vec())
    }

    fn metrics(cost: u64, coverage: u64) -> Metrics {
        Metrics {
            cost,
            coverage,
            link_residual: 0.0,
            gateway_balance: 0.0,
        }
    }

    #[test]
    fn crowding_examples() {
        assert_eq!(crowding_distance(&[ov(&[3.0])]), vec![f64::INFINITY]);
        let cd = crowding_distance(&[ov(&[0.0]), ov(&[5.0]), ov(&[10.0])]);
        assert_eq!(cd, vec![f64::INFINITY, 1.0, f64::INFINITY]);
        let same = vec![ov(&[1.0, 2.0]); 4];
        assert_eq!(
            crowding_distance(&same),
            vec![f64::INFINITY, 0.0, 0.0, f64::INFINITY]
        );
    }

    #[test]
    fn archive_insertions() {
        let sol = Solution::empty(1, 0, 1);
        let mut archive = ParetoArchive::new(10, ModelVariant::Cov).unwrap();
        assert!(archive.update(&sol, metrics(10, 100)));
        assert_eq!(archive.len(), 1);
        assert!(!archive.update(&sol, metrics(11, 90)));
        assert!(!archive.update(&sol, metrics(10, 100)));
        assert!(archive.update(&sol, metrics(8, 90)));
        assert_eq!(archive.len(), 2);
        assert!(archive.update(&sol, metrics(7, 120)));
        assert_eq!(archive.len(), 1);
        assert_eq!(archive.entries()[0].metrics.cost, 7);
    }

    #[test]
    fn capacity_evicts_most_crowded() {
        let sol = Solution::empty(1, 0, 1);
        let mut archive = ParetoArchive::new(3, ModelVariant::Cov).unwrap();
        for (c, v) in [(1, 10), (5, 50), (9, 90), (6, 60)] {
            archive.update(&sol, metrics(c, v));
        }
        let costs: Vec<u64> = archive.entries().iter().map(|e| e.metrics.cost).collect();
        assert_eq!(costs.len(), 3);
        assert!(costs.contains(&1) && costs.contains(&9));
    }

    #[test]
    fn cheapest_tie_rules() {
        let sol = Solution::empty(1, 0, 1);
        let mut archive = ParetoArchive::new(10, ModelVariant::Lglb).unwrap();
        assert!(matches!(
            cheapest_solution(&archive),
            Err(Error::EmptyArchive)
        ));
        archive.update(&sol, metrics(9, 200));
        archive.update(
            &sol,
            Metrics {
                cost: 6,
                coverage: 180,
                link_residual: 5.0,
                gateway_balance: 0.0,
            },
        );
        assert_eq!(cheapest_solution(&archive).unwrap().metrics.cost, 6);
        archive.update(
            &sol,
            Metrics {
                cost: 6,
                coverage: 200,
                link_residual: 0.0,
                gateway_balance: 0.0,
            },
        );
        let best = cheapest_solution(&archive).unwrap();
        assert_eq!((best.metrics.cost, best.metrics.coverage), (6, 200));
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(ParetoArchive::new(0, ModelVariant::Cov).is_err());
    }

    fn front(points: Vec<(u8, u8)>) -> Vec<ObjectiveVector> {
        points
            .into_iter()
            .map(|(a, b)| ov(&[a as f64, b as f64]))
            .collect()
    }

    proptest! {
        #[test]
        fn removing_interior_never_lowers_crowding(points in prop::collection::vec((0u8..20, 0u8..20), 3..12), pick in 0usize..12) {
            let vectors = front(points);
            let cd = crowding_distance(&vectors);
            let interior: Vec<usize> = (0..vectors.len()).filter(|&i| cd[i].is_finite()).collect();
            prop_assume!(!interior.is_empty());
            let victim = interior[pick % interior.len()];
            let mut rest = vectors.clone();
            rest.remove(victim);
            let after = crowding_distance(&rest);
            let before: Vec<f64> = cd.iter().enumerate().filter(|&(i, _)| i != victim).map(|(_, &d)| d).collect();
            for (b, a) in before.iter().zip(&after) {
                prop_assert!(*a >= *b - 1e-12, "{b} -> {a}");
            }
        }

        #[test]
        fn archive_stays_nondominated_and_bounded(points in prop::collection::vec((0u64..15, 0u64..15, 0u8..5), 1..60), cap in 1usize..8) {
            let sol = Solution::empty(1, 0, 1);
            let mut archive = ParetoArchive::new(cap, ModelVariant::Llb).unwrap();
            for (c, v, l) in points {
                archive.update(&sol, Metrics { cost: c, coverage: v, link_residual: l as f64, gateway_balance: 0.0 });
                prop_assert!(archive.len() <= cap);
                prop_assert!(archive.is_pairwise_nondominated());
            }
        }
    }
}
