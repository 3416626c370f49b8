use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::PlanningInstance;
use crate::model::Solution;

/// Which objectives a run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// cost, coverage
    Cov,
    /// cost, coverage, link balance
    Llb,
    /// cost, coverage, gateway balance
    Glb,
    /// all four
    Lglb,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::Cov,
        ModelVariant::Llb,
        ModelVariant::Glb,
        ModelVariant::Lglb,
    ];

    pub fn uses_link_balance(self) -> bool {
        matches!(self, ModelVariant::Llb | ModelVariant::Lglb)
    }

    pub fn uses_gateway_balance(self) -> bool {
        matches!(self, ModelVariant::Glb | ModelVariant::Lglb)
    }

    pub fn objective_count(self) -> usize {
        2 + self.uses_link_balance() as usize + self.uses_gateway_balance() as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Cov => "cov",
            ModelVariant::Llb => "llb",
            ModelVariant::Glb => "glb",
            ModelVariant::Lglb => "lglb",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cov" => Ok(ModelVariant::Cov),
            "llb" => Ok(ModelVariant::Llb),
            "glb" => Ok(ModelVariant::Glb),
            "lglb" => Ok(ModelVariant::Lglb),
            _ => Err(Error::UnknownMode(s.to_string())),
        }
    }
}

/// How the coverage objective counts clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageMode {
    /// `Σ_ij x_ij`: clients actually assigned.
    #[default]
    Assigned,
    /// `Σ_i Σ_j a_ij r_j` as the formula is printed.
    Literal,
}

impl FromStr for CoverageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "assigned" => Ok(CoverageMode::Assigned),
            "literal" => Ok(CoverageMode::Literal),
            _ => Err(Error::UnknownMode(s.to_string())),
        }
    }
}

impl fmt::Display for CoverageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoverageMode::Assigned => "assigned",
            CoverageMode::Literal => "literal",
        })
    }
}

/// Objective values in minimization orientation, ordered
/// (cost, coverage, link, gateway) and filtered by variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(pub Vec<f64>);

impl ObjectiveVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Componentwise equality within `tol`.
    pub fn approx_eq(&self, other: &ObjectiveVector, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl fmt::Display for ObjectiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// All four raw objective values, in their natural orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub cost: u64,
    pub coverage: u64,
    pub link_residual: f64,
    pub gateway_balance: f64,
}

impl Metrics {
    pub fn measure(solution: &Solution, instance: &PlanningInstance, mode: CoverageMode) -> Self {
        Metrics {
            cost: evaluate_cost(solution),
            coverage: coverage_count(solution, instance, mode),
            link_residual: evaluate_link_balance(solution, instance),
            gateway_balance: evaluate_gateway_balance(solution),
        }
    }

    pub fn objectives(&self, variant: ModelVariant) -> ObjectiveVector {
        let mut v = vec![self.cost as f64, -(self.coverage as f64)];
        if variant.uses_link_balance() {
            v.push(-self.link_residual);
        }
        if variant.uses_gateway_balance() {
            v.push(self.gateway_balance);
        }
        ObjectiveVector(v)
    }
}

/// `Σ_j (n_j + r_j + g_j)`; a gateway node counts its base role plus the flag.
pub fn evaluate_cost(solution: &Solution) -> u64 {
    (solution.count_aps() + solution.count_relays() + solution.count_gateways()) as u64
}

fn coverage_count(solution: &Solution, instance: &PlanningInstance, mode: CoverageMode) -> u64 {
    match mode {
        CoverageMode::Assigned => solution.assignment.len() as u64,
        CoverageMode::Literal => {
            let a = instance.coverage();
            (0..solution.num_sites())
                .filter(|&j| solution.relay[j])
                .map(|j| a.dps_covered_by(j).len() as u64)
                .sum()
        }
    }
}

/// Coverage objective; `mode` is `"assigned"` or `"literal"`.
pub fn evaluate_coverage(
    solution: &Solution,
    instance: &PlanningInstance,
    mode: &str,
) -> Result<u64> {
    Ok(coverage_count(solution, instance, mode.parse()?))
}

/// Minimum residual capacity `C_jl^k - f_jl^k` over established links;
/// 0 when no link exists.
pub fn evaluate_link_balance(solution: &Solution, instance: &PlanningInstance) -> f64 {
    solution
        .links
        .iter()
        .map(|l| instance.link_capacity(l.from, l.to, l.channel) - solution.flow(l))
        .reduce(f64::min)
        .unwrap_or(0.0)
}

/// `sqrt(Σ F_l² / Σ F_l)`; 0 when no traffic reaches a gateway.
pub fn gateway_balance(internet_flow: &[f64]) -> f64 {
    let total: f64 = internet_flow.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let squares: f64 = internet_flow.iter().map(|f| f * f).sum();
    (squares / total).sqrt()
}

pub fn evaluate_gateway_balance(solution: &Solution) -> f64 {
    gateway_balance(&solution.internet_flow)
}

pub fn evaluate(
    solution: &Solution,
    instance: &PlanningInstance,
    variant: ModelVariant,
    mode: CoverageMode,
) -> ObjectiveVector {
    Metrics::measure(solution, instance, mode).objectives(variant)
}

/// Pareto dominance under minimization.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(dominates_unchecked(&a.0, &b.0))
}

/// Dominance on equal-length slices.
#[inline]
pub fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_grid_instance, GridSpec, RadioParams};
    use crate::model::LinkId;
    use proptest::prelude::*;

    fn three_by_three() -> PlanningInstance {
        build_grid_instance(&GridSpec::new(3, 3, 10), &RadioParams::default(), 2).unwrap()
    }

    #[test]
    fn cost_is_literal_sum() {
        let mut sol = Solution::empty(9, 0, 11);
        for j in [0, 1, 2] {
            sol.install_ap(j);
        }
        sol.install_relay(3);
        sol.install_relay(4);
        sol.gateway[4] = true;
        assert_eq!(evaluate_cost(&sol), 6);
        assert_eq!(evaluate_cost(&Solution::empty(9, 0, 11)), 0);
        let mut all = Solution::empty(36, 0, 11);
        (0..36).for_each(|j| all.install_ap(j));
        assert_eq!(evaluate_cost(&all), 36);
    }

    #[test]
    fn coverage_modes() {
        let inst = three_by_three();
        let empty = Solution::for_instance(&inst);
        assert_eq!(evaluate_coverage(&empty, &inst, "assigned").unwrap(), 0);
        assert_eq!(evaluate_coverage(&empty, &inst, "literal").unwrap(), 0);
        assert!(matches!(
            evaluate_coverage(&empty, &inst, "bogus"),
            Err(Error::UnknownMode(_))
        ));

        let mut one_relay = Solution::for_instance(&inst);
        one_relay.install_relay(4);
        let covered = inst.coverage().dps_covered_by(4).len() as u64;
        assert_eq!(
            evaluate_coverage(&one_relay, &inst, "literal").unwrap(),
            covered
        );

        let mut assigned = Solution::for_instance(&inst);
        assigned.install_ap(4);
        for &i in inst.coverage().dps_covered_by(4) {
            assigned.assignment.insert((i, 4));
        }
        assert_eq!(
            evaluate_coverage(&assigned, &inst, "assigned").unwrap(),
            covered
        );
    }

    #[test]
    fn link_balance_is_min_residual() {
        let inst = three_by_three();
        let mut sol = Solution::for_instance(&inst);
        assert_eq!(evaluate_link_balance(&sol, &inst), 0.0);
        let a = LinkId::new(0, 1, 0);
        let b = LinkId::new(1, 2, 1);
        sol.links.insert(a);
        sol.links.insert(b);
        assert_eq!(evaluate_link_balance(&sol, &inst), 54.0);
        sol.flows.insert(a, 44.0);
        sol.flows.insert(b, 50.0);
        assert_eq!(evaluate_link_balance(&sol, &inst), 4.0);
    }

    #[test]
    fn gateway_balance_arithmetic() {
        assert!((gateway_balance(&[10.0, 10.0]) - 10f64.sqrt()).abs() <= 1e-12);
        assert!((gateway_balance(&[20.0, 0.0]) - 20f64.sqrt()).abs() <= 1e-12);
        assert_eq!(gateway_balance(&[0.0, 0.0]), 0.0);
        for c in [1.0, 4.0, 9.0] {
            for m in 1..6 {
                let f = vec![c; m];
                assert!((gateway_balance(&f) - f64::sqrt(c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orientation_and_filtering() {
        let m = Metrics {
            cost: 6,
            coverage: 200,
            link_residual: 4.0,
            gateway_balance: 10f64.sqrt(),
        };
        assert_eq!(
            m.objectives(ModelVariant::Lglb).0,
            vec![6.0, -200.0, -4.0, 10f64.sqrt()]
        );
        assert_eq!(m.objectives(ModelVariant::Cov).0, vec![6.0, -200.0]);
        assert_eq!(m.objectives(ModelVariant::Llb).0, vec![6.0, -200.0, -4.0]);
        assert_eq!(
            m.objectives(ModelVariant::Glb).0,
            vec![6.0, -200.0, 10f64.sqrt()]
        );
        for v in ModelVariant::ALL {
            assert_eq!(m.objectives(v).len(), v.objective_count());
        }
    }

    #[test]
    fn dominance_examples() {
        let v = |x: &[f64]| ObjectiveVector(x.to_vec());
        assert!(dominates(&v(&[1.0, -5.0]), &v(&[2.0, -5.0])).unwrap());
        assert!(!dominates(&v(&[1.0, -5.0]), &v(&[2.0, -6.0])).unwrap());
        assert!(!dominates(&v(&[1.0, -5.0]), &v(&[1.0, -5.0])).unwrap());
        assert!(matches!(
            dominates(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0i32..4).prop_map(f64::from), 3)
    }

    proptest! {
        #[test]
        fn dominance_is_a_strict_order(a in vec3(), b in vec3(), c in vec3()) {
            prop_assert!(!dominates_unchecked(&a, &a));
            if dominates_unchecked(&a, &b) {
                prop_assert!(!dominates_unchecked(&b, &a));
                if dominates_unchecked(&b, &c) {
                    prop_assert!(dominates_unchecked(&a, &c));
                }
            }
        }

        #[test]
        fn cost_is_permutation_invariant(roles in prop::collection::vec(0u8..3, 12), gws in prop::collection::vec(any::<bool>(), 12), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut sol = Solution::empty(12, 0, 4);
            for (j, &r) in roles.iter().enumerate() {
                match r {
                    1 => sol.install_ap(j),
                    2 => sol.install_relay(j),
                    _ => {}
                }
                sol.gateway[j] = r != 0 && gws[j];
            }
            let mut perm: Vec<usize> = (0..12).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut moved = Solution::empty(12, 0, 4);
            for (j, &p) in perm.iter().enumerate() {
                moved.installed[p] = sol.installed[j];
                moved.access_point[p] = sol.access_point[j];
                moved.relay[p] = sol.relay[j];
                moved.gateway[p] = sol.gateway[j];
            }
            prop_assert_eq!(evaluate_cost(&sol), evaluate_cost(&moved));
        }
    }
}
