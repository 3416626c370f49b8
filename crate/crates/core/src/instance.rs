//! Planning instances: candidate sites on a grid, demand points, radio
//! parameters, and the coverage/connectivity matrices derived from them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Version tag written to and required from instance files.
pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

/// A client location with its traffic demand (Mb/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandPoint {
    pub x: f64,
    pub y: f64,
    pub traffic: f64,
}

/// Per-link capacity override; absent entries default to `C_max`.
/// Overrides are symmetric in `(j, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkCapacity {
    pub j: usize,
    pub l: usize,
    pub k: usize,
    pub capacity: f64,
}

/// How the coverage and connectivity matrices are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MatrixMode {
    /// Disk model: distances against `coverage_radius` / `backbone_range`.
    #[default]
    Geometric,
    /// Seeded Bernoulli draws with the given density.
    Random { density: f64 },
}

impl MatrixMode {
    fn is_geometric(&self) -> bool {
        matches!(self, MatrixMode::Geometric)
    }
}

/// Position class of a candidate site on its grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteClass {
    Corner,
    Edge,
    Internal,
}

impl SiteClass {
    /// Number of neighbors the relay placement step fills around an AP
    /// of this class.
    pub fn relay_target(self) -> usize {
        match self {
            SiteClass::Corner => 2,
            SiteClass::Edge => 3,
            SiteClass::Internal => 4,
        }
    }
}

/// `a[i][j] = 1` iff DP `i` is covered by CS `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMatrix {
    n: usize,
    s: usize,
    bits: Vec<bool>,
    by_dp: Vec<Vec<usize>>,
    by_site: Vec<Vec<usize>>,
}

impl CoverageMatrix {
    fn from_fn(n: usize, s: usize, mut covers: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = vec![false; n * s];
        let mut by_dp = vec![Vec::new(); n];
        let mut by_site = vec![Vec::new(); s];
        for i in 0..n {
            for j in 0..s {
                if covers(i, j) {
                    bits[i * s + j] = true;
                    by_dp[i].push(j);
                    by_site[j].push(i);
                }
            }
        }
        CoverageMatrix {
            n,
            s,
            bits,
            by_dp,
            by_site,
        }
    }

    pub fn dps(&self) -> usize {
        self.n
    }

    pub fn sites(&self) -> usize {
        self.s
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.s + j]
    }

    /// Sites covering DP `i`, increasing.
    pub fn sites_covering(&self, i: usize) -> &[usize] {
        &self.by_dp[i]
    }

    /// DPs covered by site `j`, increasing.
    pub fn dps_covered_by(&self, j: usize) -> &[usize] {
        &self.by_site[j]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// `b[j][l] = 1` iff sites `j` and `l` can be wirelessly connected.
/// Symmetric with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    s: usize,
    bits: Vec<bool>,
    adjacency: Vec<Vec<usize>>,
}

impl ConnectivityMatrix {
    fn from_fn(s: usize, mut connected: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = vec![false; s * s];
        for j in 0..s {
            for l in (j + 1)..s {
                if connected(j, l) {
                    bits[j * s + l] = true;
                    bits[l * s + j] = true;
                }
            }
        }
        let adjacency = (0..s)
            .map(|j| (0..s).filter(|&l| bits[j * s + l]).collect())
            .collect();
        ConnectivityMatrix { s, bits, adjacency }
    }

    pub fn sites(&self) -> usize {
        self.s
    }

    #[inline]
    pub fn get(&self, j: usize, l: usize) -> bool {
        self.bits[j * self.s + l]
    }

    /// Sites connectable to `j`, increasing.
    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.adjacency[j]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug)]
struct Derived {
    coverage: CoverageMatrix,
    connectivity: ConnectivityMatrix,
    capacities: BTreeMap<(usize, usize, usize), f64>,
}

/// Lazily derived data; never serialized and ignored by equality.
#[derive(Debug, Default)]
struct DerivedCache(OnceLock<Derived>);

impl Clone for DerivedCache {
    fn clone(&self) -> Self {
        DerivedCache::default()
    }
}

impl PartialEq for DerivedCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// Immutable description of one planning problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningInstance {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    /// Site positions, row-major over the grid.
    pub sites: Vec<[f64; 2]>,
    pub demand_points: Vec<DemandPoint>,
    pub coverage_radius: f64,
    pub backbone_range: f64,
    /// Radio interfaces per node.
    #[serde(rename = "R")]
    pub radios: usize,
    /// Channels per radio interface.
    #[serde(rename = "K")]
    pub channels: usize,
    /// Radio interface capacity.
    #[serde(rename = "C_max")]
    pub max_capacity: f64,
    /// Hop bound between a gateway and the APs it serves.
    #[serde(rename = "A")]
    pub hop_bound: usize,
    /// Gateway flow bound.
    #[serde(rename = "M")]
    pub big_m: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub link_capacity: Vec<LinkCapacity>,
    #[serde(default, skip_serializing_if = "MatrixMode::is_geometric")]
    pub matrices: MatrixMode,
    #[serde(skip)]
    derived: DerivedCache,
}

/// Grid geometry and demand sampling for [`build_grid_instance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub n_dps: usize,
    /// Defaults to `spacing`.
    pub coverage_radius: Option<f64>,
    /// Defaults to `spacing`.
    pub backbone_range: Option<f64>,
    pub matrices: MatrixMode,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, n_dps: usize) -> Self {
        GridSpec {
            rows,
            cols,
            spacing: 1.0,
            n_dps,
            coverage_radius: None,
            backbone_range: None,
            matrices: MatrixMode::Geometric,
        }
    }

    pub fn with_spacing(mut self, spacing: f64) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn with_coverage_radius(mut self, radius: f64) -> Self {
        self.coverage_radius = Some(radius);
        self
    }

    pub fn with_backbone_range(mut self, range: f64) -> Self {
        self.backbone_range = Some(range);
        self
    }

    pub fn with_matrices(mut self, mode: MatrixMode) -> Self {
        self.matrices = mode;
        self
    }
}

/// Traffic and radio parameters shared by every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Uniform per-DP traffic `T_i`.
    pub traffic: f64,
    pub capacity: f64,
    pub radios: usize,
    pub channels: usize,
    pub hop_bound: usize,
    /// Defaults to `n * max T_i`.
    pub big_m: Option<f64>,
}

impl Default for RadioParams {
    /// T_i = 2 Mb/s, C_max = 54 Mb/s, R = A = 3, K = 11.
    fn default() -> Self {
        RadioParams {
            traffic: 2.0,
            capacity: 54.0,
            radios: 3,
            channels: 11,
            hop_bound: 3,
            big_m: None,
        }
    }
}

/// Builds a grid instance with uniformly scattered demand points.
pub fn build_grid_instance(
    grid: &GridSpec,
    radio: &RadioParams,
    seed: u64,
) -> Result<PlanningInstance> {
    if grid.rows < 2 || grid.cols < 2 {
        return Err(Error::Parameter(format!(
            "grid must be at least 2x2, got {}x{}",
            grid.rows, grid.cols
        )));
    }
    if grid.n_dps == 0 {
        return Err(Error::Parameter(
            "at least one demand point is required".into(),
        ));
    }
    if !(grid.spacing > 0.0 && grid.spacing.is_finite()) {
        return Err(Error::Parameter(format!(
            "spacing must be positive, got {}",
            grid.spacing
        )));
    }
    if radio.channels < radio.radios {
        return Err(Error::Parameter(format!(
            "channels K={} must be at least radios R={}",
            radio.channels, radio.radios
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (grid.cols - 1) as f64 * grid.spacing;
    let height = (grid.rows - 1) as f64 * grid.spacing;
    let sites = (0..grid.rows * grid.cols)
        .map(|j| {
            let (r, c) = (j / grid.cols, j % grid.cols);
            [c as f64 * grid.spacing, r as f64 * grid.spacing]
        })
        .collect();
    let demand_points = (0..grid.n_dps)
        .map(|_| DemandPoint {
            x: rng.gen::<f64>() * width,
            y: rng.gen::<f64>() * height,
            traffic: radio.traffic,
        })
        .collect::<Vec<_>>();

    let big_m = radio.big_m.unwrap_or(grid.n_dps as f64 * radio.traffic);

    let instance = PlanningInstance {
        rows: grid.rows,
        cols: grid.cols,
        spacing: grid.spacing,
        sites,
        demand_points,
        coverage_radius: grid.coverage_radius.unwrap_or(grid.spacing),
        backbone_range: grid.backbone_range.unwrap_or(grid.spacing),
        radios: radio.radios,
        channels: radio.channels,
        max_capacity: radio.capacity,
        hop_bound: radio.hop_bound,
        big_m,
        seed,
        link_capacity: Vec::new(),
        matrices: grid.matrices,
        derived: DerivedCache::default(),
    };
    instance.validate()?;
    Ok(instance)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl PlanningInstance {
    /// Number of candidate sites `s`.
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    /// Number of demand points `n`.
    pub fn num_dps(&self) -> usize {
        self.demand_points.len()
    }

    pub fn traffic(&self, i: usize) -> f64 {
        self.demand_points[i].traffic
    }

    pub fn total_demand(&self) -> f64 {
        self.demand_points.iter().map(|d| d.traffic).sum()
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let s = self.rows * self.cols;
        if s == 0 {
            return Err(Error::Validation("grid has no sites".into()));
        }
        if self.sites.len() != s {
            return Err(Error::Validation(format!(
                "expected {} sites for a {}x{} grid, found {}",
                s,
                self.rows,
                self.cols,
                self.sites.len()
            )));
        }
        if self.radios == 0 {
            return Err(Error::Validation("R must be at least 1".into()));
        }
        if self.channels < self.radios {
            return Err(Error::Validation(format!(
                "K={} must be at least R={}",
                self.channels, self.radios
            )));
        }
        if self.hop_bound == 0 {
            return Err(Error::Validation("A must be at least 1".into()));
        }
        positive("spacing", self.spacing)?;
        positive("coverage_radius", self.coverage_radius)?;
        positive("backbone_range", self.backbone_range)?;
        positive("C_max", self.max_capacity)?;
        for (i, dp) in self.demand_points.iter().enumerate() {
            positive(&format!("traffic of DP {i}"), dp.traffic)?;
            if !(dp.x.is_finite() && dp.y.is_finite()) {
                return Err(Error::Validation(format!(
                    "DP {i} has a non-finite position"
                )));
            }
        }
        let total = self.total_demand();
        if !(self.big_m.is_finite() && self.big_m >= total - 1e-9) {
            return Err(Error::Validation(format!(
                "M={} is below total demand {}",
                self.big_m, total
            )));
        }
        for o in &self.link_capacity {
            if o.j >= s || o.l >= s || o.k >= self.channels || o.j == o.l {
                return Err(Error::Validation(format!(
                    "link capacity override ({}, {}, {}) is out of range",
                    o.j, o.l, o.k
                )));
            }
            if !(o.capacity >= 0.0 && o.capacity.is_finite()) {
                return Err(Error::Validation(format!(
                    "link capacity override ({}, {}, {}) must be nonnegative",
                    o.j, o.l, o.k
                )));
            }
        }
        if let MatrixMode::Random { density } = self.matrices {
            if !(0.0..=1.0).contains(&density) {
                return Err(Error::Validation(format!(
                    "random matrix density must lie in [0, 1], got {density}"
                )));
            }
        }
        Ok(())
    }

    fn derived(&self) -> &Derived {
        self.derived.0.get_or_init(|| Derived {
            coverage: compute_coverage_matrix(self),
            connectivity: compute_connectivity_matrix(self),
            capacities: self
                .link_capacity
                .iter()
                .map(|o| ((o.j.min(o.l), o.j.max(o.l), o.k), o.capacity))
                .collect(),
        })
    }

    /// Cached coverage matrix.
    pub fn coverage(&self) -> &CoverageMatrix {
        &self.derived().coverage
    }

    /// Cached connectivity matrix.
    pub fn connectivity(&self) -> &ConnectivityMatrix {
        &self.derived().connectivity
    }

    /// `C_jl^k`, symmetric in `(j, l)`.
    pub fn link_capacity(&self, j: usize, l: usize, k: usize) -> f64 {
        self.derived()
            .capacities
            .get(&(j.min(l), j.max(l), k))
            .copied()
            .unwrap_or(self.max_capacity)
    }

    /// `(row, col)` of site `j`.
    pub fn grid_position(&self, j: usize) -> (usize, usize) {
        (j / self.cols, j % self.cols)
    }

    /// Grid 4-neighbors of `j` in north, east, south, west order.
    pub fn grid_neighbors(&self, j: usize) -> Vec<usize> {
        let (r, c) = self.grid_position(j);
        let mut out = Vec::with_capacity(4);
        if r > 0 {
            out.push(j - self.cols);
        }
        if c + 1 < self.cols {
            out.push(j + 1);
        }
        if r + 1 < self.rows {
            out.push(j + self.cols);
        }
        if c > 0 {
            out.push(j - 1);
        }
        out
    }

    /// Class of site `j` from its row/column membership on the grid boundary.
    pub fn classify_site(&self, j: usize) -> Result<SiteClass> {
        let s = self.num_sites();
        if j >= s {
            return Err(Error::IndexOutOfRange { index: j, len: s });
        }
        let (r, c) = self.grid_position(j);
        let on_row_boundary = r == 0 || r + 1 == self.rows;
        let on_col_boundary = c == 0 || c + 1 == self.cols;
        Ok(match (on_row_boundary, on_col_boundary) {
            (true, true) => SiteClass::Corner,
            (true, false) | (false, true) => SiteClass::Edge,
            (false, false) => SiteClass::Internal,
        })
    }

    /// Short content hash of the serialized instance.
    pub fn content_hash(&self) -> String {
        let text = self.to_json().expect("instance serializes");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Versioned<'a> {
            version: u32,
            #[serde(flatten)]
            instance: &'a PlanningInstance,
        }
        serde_json::to_string_pretty(&Versioned {
            version: INSTANCE_SCHEMA_VERSION,
            instance: self,
        })
        .map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == INSTANCE_SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Schema(format!(
                    "unsupported instance version {v}, expected {INSTANCE_SCHEMA_VERSION}"
                )))
            }
            None => return Err(Error::Schema("missing instance version".into())),
        }
        let instance: PlanningInstance =
            serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        instance.validate()?;
        Ok(instance)
    }
}

impl fmt::Display for PlanningInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} grid, {} DPs, R={}, K={}, C_max={}, A={}",
            self.rows,
            self.cols,
            self.num_dps(),
            self.radios,
            self.channels,
            self.max_capacity,
            self.hop_bound
        )
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Derives `a_ij`: geometric by default, seeded Bernoulli in random mode.
pub fn compute_coverage_matrix(instance: &PlanningInstance) -> CoverageMatrix {
    let (n, s) = (instance.num_dps(), instance.num_sites());
    match instance.matrices {
        MatrixMode::Geometric => CoverageMatrix::from_fn(n, s, |i, j| {
            let dp = &instance.demand_points[i];
            distance([dp.x, dp.y], instance.sites[j]) <= instance.coverage_radius
        }),
        MatrixMode::Random { density } => {
            let mut rng = ChaCha8Rng::seed_from_u64(instance.seed ^ 0xc0fe_a11c);
            CoverageMatrix::from_fn(n, s, |_, _| rng.gen_bool(density))
        }
    }
}

/// Derives `b_jl`: geometric by default, seeded Bernoulli in random mode.
pub fn compute_connectivity_matrix(instance: &PlanningInstance) -> ConnectivityMatrix {
    let s = instance.num_sites();
    match instance.matrices {
        MatrixMode::Geometric => ConnectivityMatrix::from_fn(s, |j, l| {
            distance(instance.sites[j], instance.sites[l]) <= instance.backbone_range
        }),
        MatrixMode::Random { density } => {
            let mut rng = ChaCha8Rng::seed_from_u64(instance.seed ^ 0xb0b_1e55);
            ConnectivityMatrix::from_fn(s, |_, _| rng.gen_bool(density))
        }
    }
}

pub fn classify_site(instance: &PlanningInstance, j: usize) -> Result<SiteClass> {
    instance.classify_site(j)
}

pub fn save_instance(instance: &PlanningInstance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, instance.to_json()?)?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<PlanningInstance> {
    let text = std::fs::read_to_string(path)?;
    PlanningInstance::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard(rows: usize, cols: usize) -> PlanningInstance {
        build_grid_instance(&GridSpec::new(rows, cols, 200), &RadioParams::default(), 1).unwrap()
    }

    #[test]
    fn standard_settings_build() {
        let inst = standard(6, 6);
        assert_eq!(inst.num_sites(), 36);
        assert_eq!(inst.num_dps(), 200);
        assert!(inst.demand_points.iter().all(|d| d.traffic == 2.0));
        assert_eq!(inst.max_capacity, 54.0);
        assert_eq!((inst.radios, inst.channels, inst.hop_bound), (3, 11, 3));
        assert_eq!(inst.big_m, 400.0);
    }

    #[test]
    fn two_by_two_is_all_corners() {
        let inst =
            build_grid_instance(&GridSpec::new(2, 2, 3), &RadioParams::default(), 4).unwrap();
        assert_eq!(inst.num_sites(), 4);
        for j in 0..4 {
            assert_eq!(inst.classify_site(j).unwrap(), SiteClass::Corner);
        }
    }

    #[test]
    fn degenerate_grid_rejected() {
        let err = build_grid_instance(&GridSpec::new(1, 5, 3), &RadioParams::default(), 0);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn channels_below_radios_rejected() {
        let radio = RadioParams {
            radios: 3,
            channels: 2,
            ..RadioParams::default()
        };
        let err = build_grid_instance(&GridSpec::new(3, 3, 3), &radio, 0);
        assert!(matches!(err, Err(Error::Parameter(_))));
        let radio = RadioParams {
            radios: 2,
            channels: 2,
            ..RadioParams::default()
        };
        assert!(build_grid_instance(&GridSpec::new(2, 2, 3), &radio, 0).is_ok());
    }

    #[test]
    fn classify_three_by_three() {
        let inst =
            build_grid_instance(&GridSpec::new(3, 3, 1), &RadioParams::default(), 0).unwrap();
        assert_eq!(inst.classify_site(0).unwrap(), SiteClass::Corner);
        assert_eq!(inst.classify_site(1).unwrap(), SiteClass::Edge);
        assert_eq!(inst.classify_site(4).unwrap(), SiteClass::Internal);
        assert!(matches!(
            inst.classify_site(9),
            Err(Error::IndexOutOfRange { index: 9, len: 9 })
        ));
    }

    #[test]
    fn class_counts_match_grid_formula() {
        for (r, c) in [(2, 2), (2, 5), (3, 3), (6, 6), (7, 4), (10, 10)] {
            let inst =
                build_grid_instance(&GridSpec::new(r, c, 1), &RadioParams::default(), 0).unwrap();
            let mut counts = [0usize; 3];
            for j in 0..inst.num_sites() {
                match inst.classify_site(j).unwrap() {
                    SiteClass::Corner => counts[0] += 1,
                    SiteClass::Edge => counts[1] += 1,
                    SiteClass::Internal => counts[2] += 1,
                }
            }
            assert_eq!(
                counts,
                [4, 2 * (r - 2) + 2 * (c - 2), (r - 2) * (c - 2)],
                "{r}x{c}"
            );
        }
    }

    #[test]
    fn colocated_dp_is_covered() {
        let mut inst = standard(3, 3);
        inst.demand_points[0] = DemandPoint {
            x: 1.0,
            y: 1.0,
            traffic: 2.0,
        };
        let a = compute_coverage_matrix(&inst);
        assert!(a.get(0, 4));
    }

    #[test]
    fn tiny_radius_covers_nothing() {
        let grid = GridSpec::new(4, 4, 50).with_coverage_radius(1e-12);
        let inst = build_grid_instance(&grid, &RadioParams::default(), 3).unwrap();
        assert_eq!(compute_coverage_matrix(&inst).count_ones(), 0);
    }

    #[test]
    fn diagonal_radius_covers_whole_cell() {
        let grid = GridSpec::new(2, 2, 20).with_coverage_radius(2f64.sqrt());
        let inst = build_grid_instance(&grid, &RadioParams::default(), 9).unwrap();
        let a = compute_coverage_matrix(&inst);
        for i in 0..inst.num_dps() {
            let dp = inst.demand_points[i];
            for j in 0..4 {
                let d =
                    ((dp.x - inst.sites[j][0]).powi(2) + (dp.y - inst.sites[j][1]).powi(2)).sqrt();
                assert!(d <= 2f64.sqrt());
                assert!(a.get(i, j));
            }
        }
    }

    #[test]
    fn backbone_at_spacing_is_grid_adjacency() {
        let inst = standard(5, 4);
        let b = compute_connectivity_matrix(&inst);
        for j in 0..inst.num_sites() {
            let mut grid = inst.grid_neighbors(j);
            grid.sort_unstable();
            assert_eq!(b.neighbors(j), grid.as_slice());
        }
    }

    #[test]
    fn backbone_below_spacing_is_empty() {
        let grid = GridSpec::new(4, 4, 1).with_backbone_range(0.99);
        let inst = build_grid_instance(&grid, &RadioParams::default(), 0).unwrap();
        assert_eq!(compute_connectivity_matrix(&inst).count_ones(), 0);
    }

    #[test]
    fn backbone_at_diagonal_is_eight_neighborhood() {
        let grid = GridSpec::new(4, 5, 1).with_backbone_range(2f64.sqrt());
        let inst = build_grid_instance(&grid, &RadioParams::default(), 0).unwrap();
        let b = compute_connectivity_matrix(&inst);
        for j in 0..inst.num_sites() {
            for l in 0..inst.num_sites() {
                let (rj, cj) = inst.grid_position(j);
                let (rl, cl) = inst.grid_position(l);
                let king = j != l && rj.abs_diff(rl) <= 1 && cj.abs_diff(cl) <= 1;
                assert_eq!(b.get(j, l), king, "({j},{l})");
            }
        }
    }

    #[test]
    fn same_seed_same_demand() {
        let a = standard(6, 6);
        let b = standard(6, 6);
        assert_eq!(a.demand_points, b.demand_points);
        let c = build_grid_instance(&GridSpec::new(6, 6, 200), &RadioParams::default(), 2).unwrap();
        assert_ne!(a.demand_points, c.demand_points);
    }

    #[test]
    fn random_matrices_are_seeded_and_symmetric() {
        let grid = GridSpec::new(4, 4, 30).with_matrices(MatrixMode::Random { density: 0.3 });
        let inst = build_grid_instance(&grid, &RadioParams::default(), 5).unwrap();
        let again = build_grid_instance(&grid, &RadioParams::default(), 5).unwrap();
        assert_eq!(inst.coverage(), again.coverage());
        let b = inst.connectivity();
        for j in 0..16 {
            assert!(!b.get(j, j));
            for l in 0..16 {
                assert_eq!(b.get(j, l), b.get(l, j));
            }
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        let mut inst = standard(7, 7);
        inst.link_capacity.push(LinkCapacity {
            j: 0,
            l: 1,
            k: 2,
            capacity: 11.5,
        });
        save_instance(&inst, &path).unwrap();
        let back = load_instance(&path).unwrap();
        assert_eq!(back, inst);
        for (a, b) in inst.demand_points.iter().zip(&back.demand_points) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        assert_eq!(back.link_capacity(1, 0, 2), 11.5);
        assert_eq!(back.link_capacity(1, 0, 1), 54.0);
    }

    #[test]
    fn truncated_file_is_schema_error() {
        let text = standard(3, 3).to_json().unwrap();
        let err = PlanningInstance::from_json(&text[..text.len() / 2]);
        assert!(matches!(err, Err(Error::Schema(_))));
    }

    #[test]
    fn wrong_version_is_schema_error() {
        let text =
            standard(3, 3)
                .to_json()
                .unwrap()
                .replacen("\"version\": 1", "\"version\": 7", 1);
        assert!(matches!(
            PlanningInstance::from_json(&text),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn file_with_k_below_r_fails_validation() {
        let text = standard(3, 3)
            .to_json()
            .unwrap()
            .replacen("\"K\": 11", "\"K\": 2", 1);
        assert!(matches!(
            PlanningInstance::from_json(&text),
            Err(Error::Validation(_))
        ));
    }
}
