use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::PlanningInstance;

/// A directed link `from -> to` on `channel` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId {
    pub from: usize,
    pub to: usize,
    pub channel: usize,
}

impl LinkId {
    pub fn new(from: usize, to: usize, channel: usize) -> Self {
        LinkId { from, to, channel }
    }

    pub fn reversed(self) -> Self {
        LinkId {
            from: self.to,
            to: self.from,
            channel: self.channel,
        }
    }

    pub fn touches(&self, j: usize) -> bool {
        self.from == j || self.to == j
    }

    /// The endpoint that is not `j`.
    pub fn other(&self, j: usize) -> usize {
        if self.from == j {
            self.to
        } else {
            self.from
        }
    }
}

/// Full variable assignment of one plan.
///
/// Each installed node is exactly one of AP or relay; the gateway flag
/// overlays an installed node. Links are stored once, oriented along the
/// direction their flow travels.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// `z_j`
    pub installed: Vec<bool>,
    /// `n_j`
    pub access_point: Vec<bool>,
    /// `r_j`
    pub relay: Vec<bool>,
    /// `g_j`
    pub gateway: Vec<bool>,
    /// `x_ij` as `(dp, site)` pairs.
    pub assignment: BTreeSet<(usize, usize)>,
    /// `w_j^k` as `(site, channel)` pairs.
    pub channel_use: BTreeSet<(usize, usize)>,
    /// `L_jl^k`
    pub links: BTreeSet<LinkId>,
    /// `f_jl^k`, positive entries only.
    pub flows: BTreeMap<LinkId, f64>,
    /// `F_j`
    pub internet_flow: Vec<f64>,
    num_dps: usize,
    num_channels: usize,
}

impl Solution {
    pub fn empty(sites: usize, dps: usize, channels: usize) -> Self {
        Solution {
            installed: vec![false; sites],
            access_point: vec![false; sites],
            relay: vec![false; sites],
            gateway: vec![false; sites],
            assignment: BTreeSet::new(),
            channel_use: BTreeSet::new(),
            links: BTreeSet::new(),
            flows: BTreeMap::new(),
            internet_flow: vec![0.0; sites],
            num_dps: dps,
            num_channels: channels,
        }
    }

    pub fn for_instance(instance: &PlanningInstance) -> Self {
        Solution::empty(instance.num_sites(), instance.num_dps(), instance.channels)
    }

    pub fn num_sites(&self) -> usize {
        self.installed.len()
    }

    pub fn num_dps(&self) -> usize {
        self.num_dps
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn install_ap(&mut self, j: usize) {
        self.installed[j] = true;
        self.access_point[j] = true;
        self.relay[j] = false;
    }

    pub fn install_relay(&mut self, j: usize) {
        self.installed[j] = true;
        self.relay[j] = true;
        self.access_point[j] = false;
    }

    /// Clears every role at `j` and drops DPs assigned there.
    pub fn uninstall(&mut self, j: usize) {
        self.installed[j] = false;
        self.access_point[j] = false;
        self.relay[j] = false;
        self.gateway[j] = false;
        self.assignment.retain(|&(_, site)| site != j);
    }

    pub fn installed_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.installed
            .iter()
            .enumerate()
            .filter(|(_, &z)| z)
            .map(|(j, _)| j)
    }

    pub fn ap_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.access_point
            .iter()
            .enumerate()
            .filter(|(_, &n)| n)
            .map(|(j, _)| j)
    }

    pub fn gateway_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.gateway
            .iter()
            .enumerate()
            .filter(|(_, &g)| g)
            .map(|(j, _)| j)
    }

    pub fn count_installed(&self) -> usize {
        self.installed.iter().filter(|&&z| z).count()
    }

    pub fn count_aps(&self) -> usize {
        self.access_point.iter().filter(|&&n| n).count()
    }

    pub fn count_relays(&self) -> usize {
        self.relay.iter().filter(|&&r| r).count()
    }

    pub fn count_gateways(&self) -> usize {
        self.gateway.iter().filter(|&&g| g).count()
    }

    /// Sites hosting DP `i`.
    pub fn hosts_of(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .range((i, 0)..=(i, usize::MAX))
            .map(|&(_, j)| j)
    }

    pub fn is_assigned(&self, i: usize) -> bool {
        self.hosts_of(i).next().is_some()
    }

    /// `Σ_i T_i x_ij` for every site.
    pub fn site_demands(&self, instance: &PlanningInstance) -> Vec<f64> {
        let mut demand = vec![0.0; self.num_sites()];
        for &(i, j) in &self.assignment {
            demand[j] += instance.traffic(i);
        }
        demand
    }

    pub fn assigned_demand(&self, instance: &PlanningInstance) -> f64 {
        self.assignment
            .iter()
            .map(|&(i, _)| instance.traffic(i))
            .sum()
    }

    /// Established links incident to each site, counting a link once per endpoint.
    pub fn link_degrees(&self) -> Vec<usize> {
        let mut degree = vec![0; self.num_sites()];
        for link in &self.links {
            degree[link.from] += 1;
            if link.to != link.from {
                degree[link.to] += 1;
            }
        }
        degree
    }

    pub fn flow(&self, link: &LinkId) -> f64 {
        self.flows.get(link).copied().unwrap_or(0.0)
    }

    /// Drops channels, links and flows; keeps roles and assignments.
    pub fn clear_network(&mut self) {
        self.channel_use.clear();
        self.links.clear();
        self.clear_flows();
    }

    pub fn clear_flows(&mut self) {
        self.flows.clear();
        self.internet_flow.iter_mut().for_each(|f| *f = 0.0);
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&SolutionFile::from(self))
            .map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SolutionFile =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Solution::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk layout: dense role vectors and `F`, sparse `x`, `L` and `f`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub sites: usize,
    pub dps: usize,
    pub channels: usize,
    pub z: Vec<u8>,
    pub n_ap: Vec<u8>,
    pub r: Vec<u8>,
    pub g: Vec<u8>,
    /// `[dp, site]`
    pub x: Vec<[usize; 2]>,
    /// `[site, channel]`
    pub w: Vec<[usize; 2]>,
    /// `[from, to, channel]`
    #[serde(rename = "L")]
    pub links: Vec<[usize; 3]>,
    /// `[from, to, channel, flow]`
    pub f: Vec<(usize, usize, usize, f64)>,
    #[serde(rename = "F")]
    pub internet_flow: Vec<f64>,
}

fn bits(v: &[bool]) -> Vec<u8> {
    v.iter().map(|&b| b as u8).collect()
}

fn unbits(name: &str, v: &[u8], len: usize) -> Result<Vec<bool>> {
    if v.len() != len {
        return Err(Error::Schema(format!(
            "{name} has length {}, expected {len}",
            v.len()
        )));
    }
    v.iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Schema(format!(
                "{name} holds non-binary value {other}"
            ))),
        })
        .collect()
}

impl From<&Solution> for SolutionFile {
    fn from(s: &Solution) -> Self {
        SolutionFile {
            sites: s.num_sites(),
            dps: s.num_dps,
            channels: s.num_channels,
            z: bits(&s.installed),
            n_ap: bits(&s.access_point),
            r: bits(&s.relay),
            g: bits(&s.gateway),
            x: s.assignment.iter().map(|&(i, j)| [i, j]).collect(),
            w: s.channel_use.iter().map(|&(j, k)| [j, k]).collect(),
            links: s.links.iter().map(|l| [l.from, l.to, l.channel]).collect(),
            f: s.flows
                .iter()
                .map(|(l, &v)| (l.from, l.to, l.channel, v))
                .collect(),
            internet_flow: s.internet_flow.clone(),
        }
    }
}

impl TryFrom<SolutionFile> for Solution {
    type Error = Error;

    fn try_from(file: SolutionFile) -> Result<Self> {
        let s = file.sites;
        if file.internet_flow.len() != s {
            return Err(Error::Schema(format!(
                "F has length {}, expected {s}",
                file.internet_flow.len()
            )));
        }
        Ok(Solution {
            installed: unbits("z", &file.z, s)?,
            access_point: unbits("n_ap", &file.n_ap, s)?,
            relay: unbits("r", &file.r, s)?,
            gateway: unbits("g", &file.g, s)?,
            assignment: file.x.iter().map(|&[i, j]| (i, j)).collect(),
            channel_use: file.w.iter().map(|&[j, k]| (j, k)).collect(),
            links: file
                .links
                .iter()
                .map(|&[a, b, k]| LinkId::new(a, b, k))
                .collect(),
            flows: file
                .f
                .iter()
                .map(|&(a, b, k, v)| (LinkId::new(a, b, k), v))
                .collect(),
            internet_flow: file.internet_flow,
            num_dps: file.dps,
            num_channels: file.channels,
        })
    }
}
