//! Per-round cluster-head election.
//!
//! HetEng scores a node against its neighborhood: the base probability is
//! scaled by the node's energy relative to the neighbor mean, by its energy
//! relative to the neighbor sample deviation, and (in the weighted form) by
//! its degree relative to the expected degree. Three boolean conditions
//! derived from the same quantities decide the node's status each
//! iteration. LEACH and HEED are provided as baselines behind the same
//! [`ElectionStrategy`] interface.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{average_density, NeighborIndex, Neighborhood, NeighborhoodStats, Node, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElectionError {
    #[error("own energy must be positive, got {0}")]
    NonPositiveEnergy(f64),
    #[error("expected degree must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("unknown election strategy `{0}` (expected heteng, leach or heed)")]
    UnknownStrategy(String),
    #[error("invalid election parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectionParams {
    /// Base cluster-head probability.
    pub c_prob: f64,
    pub max_iterations: u32,
    /// Statistics below this are treated as zero.
    pub epsilon_energy: f64,
    pub cluster_radius: f64,
}

impl Default for ElectionParams {
    fn default() -> Self {
        Self {
            c_prob: 0.05,
            max_iterations: 20,
            epsilon_energy: 1e-9,
            cluster_radius: 25.0,
        }
    }
}

impl ElectionParams {
    pub fn validate(&self) -> Result<(), ElectionError> {
        if !(self.c_prob > 0.0 && self.c_prob <= 1.0) {
            return Err(ElectionError::InvalidParams("c_prob must lie in (0, 1]".into()));
        }
        if self.max_iterations < 1 {
            return Err(ElectionError::InvalidParams("max_iterations must be >= 1".into()));
        }
        if !(self.epsilon_energy > 0.0) {
            return Err(ElectionError::InvalidParams("epsilon_energy must be > 0".into()));
        }
        if !(self.cluster_radius > 0.0 && self.cluster_radius.is_finite()) {
            return Err(ElectionError::InvalidParams("cluster_radius must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChStatus {
    Final,
    Tentative,
    Regular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConditionVector {
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
}

impl ConditionVector {
    pub const fn new(c1: bool, c2: bool, c3: bool) -> Self {
        Self { c1, c2, c3 }
    }

    pub fn count(&self) -> usize {
        [self.c1, self.c2, self.c3].iter().filter(|&&c| c).count()
    }
}

/// Energy-vs-mean and energy-vs-deviation factors, with the neutral value 1
/// substituted wherever the neighborhood statistic is degenerate.
pub fn energy_factors(own_energy: f64, stats: &NeighborhoodStats, epsilon: f64) -> (f64, f64) {
    let ratio = if stats.degree == 0 || stats.mean_energy < epsilon {
        1.0
    } else {
        own_energy / stats.mean_energy
    };
    let deviation = if stats.sample_stddev < epsilon {
        1.0
    } else {
        own_energy / stats.sample_stddev
    };
    (ratio, deviation)
}

/// Unweighted score; may exceed 1 (cap before sampling with it).
pub fn heteng_probability(
    own_energy: f64,
    stats: &NeighborhoodStats,
    params: &ElectionParams,
) -> Result<f64, ElectionError> {
    if !(own_energy > 0.0) {
        return Err(ElectionError::NonPositiveEnergy(own_energy));
    }
    let (ratio, deviation) = energy_factors(own_energy, stats, params.epsilon_energy);
    Ok(params.c_prob * ratio * deviation)
}

pub fn degree_factor(degree: usize, d_avg: f64) -> f64 {
    (degree as f64 / d_avg).min(1.0)
}

/// Score scaled by `min(degree / d_avg, 1)`.
pub fn heteng_weighted_probability(
    own_energy: f64,
    stats: &NeighborhoodStats,
    d_avg: f64,
    params: &ElectionParams,
) -> Result<f64, ElectionError> {
    if !(d_avg > 0.0) {
        return Err(ElectionError::NonPositiveDensity(d_avg));
    }
    Ok(heteng_probability(own_energy, stats, params)? * degree_factor(stats.degree, d_avg))
}

pub fn evaluate_conditions(
    own_energy: f64,
    stats: &NeighborhoodStats,
    d_avg: f64,
    params: &ElectionParams,
    random_draw: f64,
) -> ConditionVector {
    let (ratio, deviation) = energy_factors(own_energy, stats, params.epsilon_energy);
    ConditionVector {
        c1: random_draw <= params.c_prob,
        c2: ratio * deviation >= 1.0,
        c3: d_avg > 0.0 && stats.degree as f64 / d_avg >= 1.0,
    }
}

/// Isolated nodes take the role outright; otherwise any two conditions make
/// a final head, the random condition alone a tentative one.
pub fn resolve_status(conditions: ConditionVector, degree: usize) -> ChStatus {
    if degree == 0 || conditions.count() >= 2 {
        ChStatus::Final
    } else if conditions == ConditionVector::new(true, false, false) {
        ChStatus::Tentative
    } else {
        ChStatus::Regular
    }
}

/// Read-only view of the alive part of the network taken at the start of a
/// round. Vectors are indexed by node id; dead nodes carry empty entries.
#[derive(Debug, Clone)]
pub struct ElectionSnapshot {
    alive: Vec<NodeId>,
    energy: Vec<f64>,
    neighborhoods: Vec<Neighborhood>,
    cluster_neighbors: Vec<Vec<NodeId>>,
    d_avg: Vec<f64>,
}

impl ElectionSnapshot {
    /// `nodes[i].id` must equal `i`.
    pub fn capture(nodes: &[Node], field_area: f64, cluster_radius: f64) -> Self {
        debug_assert!(nodes.iter().enumerate().all(|(i, n)| n.id == i));
        let index = NeighborIndex::of_alive(nodes);
        let alive: Vec<NodeId> = nodes.iter().filter(|n| n.alive).map(|n| n.id).collect();
        let mut neighborhoods = vec![Neighborhood::default(); nodes.len()];
        let mut cluster_neighbors = vec![Vec::new(); nodes.len()];
        let mut d_avg = vec![0.0; nodes.len()];
        for &id in &alive {
            let node = &nodes[id];
            neighborhoods[id] = index.neighborhood(node, nodes);
            cluster_neighbors[id] = if node.comm_radius == cluster_radius {
                neighborhoods[id].neighbors.clone()
            } else {
                index.within(&node.position, cluster_radius, Some(id))
            };
            d_avg[id] = average_density(node.comm_radius, alive.len(), field_area).unwrap_or(0.0);
        }
        Self {
            alive,
            energy: nodes
                .iter()
                .map(|n| if n.alive { n.residual_energy } else { 0.0 })
                .collect(),
            neighborhoods,
            cluster_neighbors,
            d_avg,
        }
    }

    /// Alive ids, ascending.
    pub fn alive(&self) -> &[NodeId] {
        &self.alive
    }

    pub fn energy(&self, id: NodeId) -> f64 {
        self.energy[id]
    }

    pub fn stats(&self, id: NodeId) -> &NeighborhoodStats {
        &self.neighborhoods[id].stats
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.neighborhoods[id].neighbors
    }

    /// Alive nodes within the cluster radius, ascending.
    pub fn cluster_neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.cluster_neighbors[id]
    }

    pub fn d_avg(&self, id: NodeId) -> f64 {
        self.d_avg[id]
    }

    pub fn id_space(&self) -> usize {
        self.energy.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectionOutcome {
    /// Final status of every alive node, ascending by id. Only `Final` and
    /// `Regular` survive the election; `Tentative` is transient.
    pub statuses: Vec<(NodeId, ChStatus)>,
    pub iterations_used: u32,
    /// Per iteration, each competing node's probability that iteration.
    pub ch_probability_trace: Vec<Vec<(NodeId, f64)>>,
    /// Per iteration, the nodes that took part (and so broadcast).
    pub competitors: Vec<Vec<NodeId>>,
}

impl ElectionOutcome {
    pub fn heads(&self) -> Vec<NodeId> {
        self.statuses
            .iter()
            .filter(|(_, s)| *s == ChStatus::Final)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn head_count(&self) -> usize {
        self.statuses.iter().filter(|(_, s)| *s == ChStatus::Final).count()
    }

    pub fn status_of(&self, id: NodeId) -> Option<ChStatus> {
        self.statuses
            .binary_search_by_key(&id, |(i, _)| *i)
            .ok()
            .map(|pos| self.statuses[pos].1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Absent,
    Undecided,
    Head,
    Settled,
}

fn finish(
    snap: &ElectionSnapshot,
    phase: &[Phase],
    leftover: ChStatus,
    mut iterations: u32,
    mut trace: Vec<Vec<(NodeId, f64)>>,
    mut competitors: Vec<Vec<NodeId>>,
) -> ElectionOutcome {
    if iterations == 0 && !snap.alive.is_empty() {
        // every node was isolated: one (silent) iteration
        iterations = 1;
        trace.push(Vec::new());
        competitors.push(Vec::new());
    }
    let statuses = snap
        .alive
        .iter()
        .map(|&id| {
            let s = match phase[id] {
                Phase::Head => ChStatus::Final,
                Phase::Settled => ChStatus::Regular,
                Phase::Undecided => leftover,
                Phase::Absent => unreachable!("alive node without phase"),
            };
            (id, s)
        })
        .collect();
    ElectionOutcome {
        statuses,
        iterations_used: iterations,
        ch_probability_trace: trace,
        competitors,
    }
}

fn initial_phases(snap: &ElectionSnapshot) -> Vec<Phase> {
    let mut phase = vec![Phase::Absent; snap.id_space()];
    for &id in &snap.alive {
        phase[id] = if snap.stats(id).degree == 0 {
            Phase::Head
        } else {
            Phase::Undecided
        };
    }
    phase
}

fn cover_undecided(snap: &ElectionSnapshot, phase: &mut [Phase], ids: &[NodeId]) {
    for &id in ids {
        if phase[id] == Phase::Undecided && snap.cluster_neighbors(id).iter().any(|&j| phase[j] == Phase::Head) {
            phase[id] = Phase::Settled;
        }
    }
}

/// Iterative HetEng election.
///
/// Each iteration every undecided node draws once (ascending id order),
/// evaluates the three conditions with its current probability and
/// resolves a status. Final and Regular are settled; Tentative nodes stay
/// undecided and double their probability for the next iteration. After
/// all nodes have resolved, tentative nodes within the cluster radius of a
/// head become members. Nodes still tentative after `max_iterations` end as
/// `Regular`.
pub fn heteng_election<R: Rng + ?Sized>(
    snap: &ElectionSnapshot,
    params: &ElectionParams,
    rng: &mut R,
) -> ElectionOutcome {
    let mut phase = initial_phases(snap);
    let mut multiplier = vec![1.0f64; snap.id_space()];
    let mut trace = Vec::new();
    let mut competitors = Vec::new();
    let mut iterations = 0;

    while iterations < params.max_iterations {
        let undecided: Vec<NodeId> = snap
            .alive
            .iter()
            .copied()
            .filter(|&id| phase[id] == Phase::Undecided)
            .collect();
        if undecided.is_empty() {
            break;
        }
        iterations += 1;

        let mut probs = Vec::with_capacity(undecided.len());
        let mut new_heads = Vec::new();
        for &id in &undecided {
            let effective = ElectionParams {
                c_prob: (params.c_prob * multiplier[id]).min(1.0),
                ..*params
            };
            let (energy, stats, d_avg) = (snap.energy(id), snap.stats(id), snap.d_avg(id));
            let draw = rng.random::<f64>();
            let conditions = evaluate_conditions(energy, stats, d_avg, &effective, draw);
            let grade = heteng_weighted_probability(energy, stats, d_avg, &effective)
                .map(|p| p.min(1.0))
                .unwrap_or(0.0);
            probs.push((id, grade));
            match resolve_status(conditions, stats.degree) {
                ChStatus::Final => new_heads.push(id),
                ChStatus::Tentative => multiplier[id] *= 2.0,
                ChStatus::Regular => phase[id] = Phase::Settled,
            }
        }
        for id in new_heads {
            phase[id] = Phase::Head;
        }
        cover_undecided(snap, &mut phase, &undecided);
        trace.push(probs);
        competitors.push(undecided);
    }

    finish(snap, &phase, ChStatus::Regular, iterations, trace, competitors)
}

pub fn run_heteng_election(snap: &ElectionSnapshot, params: &ElectionParams, seed: u64) -> ElectionOutcome {
    heteng_election(snap, params, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Rounds per LEACH epoch, `ceil(1 / p)`.
pub fn leach_epoch_length(p: f64) -> u64 {
    ((1.0 / p) - 1e-9).ceil().max(1.0) as u64
}

/// `p / (1 - p (r mod ceil(1/p)))` for a node that has not served in the
/// current epoch, capped at 1.
pub fn leach_threshold(p: f64, round_index: u64) -> f64 {
    let r = (round_index % leach_epoch_length(p)) as f64;
    (p / (1.0 - p * r)).min(1.0)
}

/// LEACH self-election; remembers who served in the current epoch.
#[derive(Debug, Clone)]
pub struct Leach {
    p: f64,
    served_in_epoch: Vec<Option<u64>>,
}

impl Leach {
    pub fn new(p: f64, node_count: usize) -> Result<Self, ElectionError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(ElectionError::InvalidParams("LEACH p must lie in (0, 1)".into()));
        }
        Ok(Self {
            p,
            served_in_epoch: vec![None; node_count],
        })
    }

    pub fn is_eligible(&self, id: NodeId, round_index: u64) -> bool {
        let epoch = round_index / leach_epoch_length(self.p);
        self.served_in_epoch.get(id).copied().flatten() != Some(epoch)
    }

    pub fn elect<R: Rng + ?Sized>(
        &mut self,
        snap: &ElectionSnapshot,
        round_index: u64,
        rng: &mut R,
    ) -> ElectionOutcome {
        if self.served_in_epoch.len() < snap.id_space() {
            self.served_in_epoch.resize(snap.id_space(), None);
        }
        let epoch = round_index / leach_epoch_length(self.p);
        let threshold = leach_threshold(self.p, round_index);
        let mut statuses = Vec::with_capacity(snap.alive.len());
        let mut probs = Vec::with_capacity(snap.alive.len());
        for &id in &snap.alive {
            let draw = rng.random::<f64>();
            let t = if self.is_eligible(id, round_index) {
                threshold
            } else {
                0.0
            };
            probs.push((id, t));
            let status = if draw < t {
                self.served_in_epoch[id] = Some(epoch);
                ChStatus::Final
            } else {
                ChStatus::Regular
            };
            statuses.push((id, status));
        }
        ElectionOutcome {
            statuses,
            iterations_used: 1,
            ch_probability_trace: vec![probs],
            competitors: vec![snap.alive.clone()],
        }
    }
}

pub fn run_leach_election(
    snap: &ElectionSnapshot,
    round_index: u64,
    p: f64,
    seed: u64,
) -> Result<ElectionOutcome, ElectionError> {
    let mut leach = Leach::new(p, snap.id_space())?;
    Ok(leach.elect(snap, round_index, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// `c_prob * residual / e_max`, clamped to `[p_min, 1]`.
pub fn heed_initial_probability(c_prob: f64, residual: f64, e_max: f64, p_min: f64) -> f64 {
    (c_prob * residual / e_max).clamp(p_min, 1.0)
}

/// HEED baseline.
///
/// Every undecided node doubles its probability each iteration. Below 1 a
/// successful draw makes it a (sticky) tentative head; once its probability
/// reaches 1 it becomes final unless a final head already covers it or an
/// undecided tentative neighbor has priority. Ties go to tentative nodes,
/// then higher starting probability, then lower id. Nodes still uncovered
/// at `max_iterations` declare themselves final.
pub fn heed_election<R: Rng + ?Sized>(
    snap: &ElectionSnapshot,
    params: &ElectionParams,
    e_max: f64,
    p_min: f64,
    rng: &mut R,
) -> ElectionOutcome {
    let mut phase = initial_phases(snap);
    let n = snap.id_space();
    let mut initial = vec![0.0f64; n];
    let mut prob = vec![0.0f64; n];
    for &id in &snap.alive {
        initial[id] = heed_initial_probability(params.c_prob, snap.energy(id), e_max, p_min);
        prob[id] = initial[id];
    }
    let mut tentative = vec![false; n];
    let mut trace = Vec::new();
    let mut competitors = Vec::new();
    let mut iterations = 0;

    while iterations < params.max_iterations {
        let undecided: Vec<NodeId> = snap
            .alive
            .iter()
            .copied()
            .filter(|&id| phase[id] == Phase::Undecided)
            .collect();
        if undecided.is_empty() {
            break;
        }
        iterations += 1;

        let mut probs = Vec::with_capacity(undecided.len());
        let mut candidates = Vec::new();
        for &id in &undecided {
            let draw = rng.random::<f64>();
            probs.push((id, prob[id]));
            if prob[id] >= 1.0 {
                candidates.push(id);
            } else if draw <= prob[id] {
                tentative[id] = true;
            }
        }
        candidates.sort_by(|&a, &b| {
            tentative[b]
                .cmp(&tentative[a])
                .then(initial[b].total_cmp(&initial[a]))
                .then(a.cmp(&b))
        });
        for id in candidates {
            let neighbors = snap.cluster_neighbors(id);
            if neighbors.iter().any(|&j| phase[j] == Phase::Head) {
                phase[id] = Phase::Settled;
            } else if tentative[id] || !neighbors.iter().any(|&j| phase[j] == Phase::Undecided && tentative[j]) {
                phase[id] = Phase::Head;
            }
        }
        cover_undecided(snap, &mut phase, &undecided);
        for &id in &undecided {
            if phase[id] == Phase::Undecided {
                prob[id] = (prob[id] * 2.0).min(1.0);
            }
        }
        trace.push(probs);
        competitors.push(undecided);
    }

    finish(snap, &phase, ChStatus::Final, iterations, trace, competitors)
}

pub fn run_heed_election(
    snap: &ElectionSnapshot,
    e_max: f64,
    params: &ElectionParams,
    p_min: f64,
    seed: u64,
) -> ElectionOutcome {
    heed_election(snap, params, e_max, p_min, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Election algorithm selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[serde(rename = "heteng")]
    HetEng,
    Leach,
    Heed,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::HetEng, Algorithm::Leach, Algorithm::Heed];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::HetEng => "heteng",
            Algorithm::Leach => "leach",
            Algorithm::Heed => "heed",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = ElectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "heteng" => Ok(Algorithm::HetEng),
            "leach" => Ok(Algorithm::Leach),
            "heed" => Ok(Algorithm::Heed),
            other => Err(ElectionError::UnknownStrategy(other.to_string())),
        }
    }
}

/// Common interface the round loop drives.
pub trait ElectionStrategy: Send {
    fn algorithm(&self) -> Algorithm;

    fn elect(&mut self, snap: &ElectionSnapshot, round_index: u64, rng: &mut ChaCha8Rng) -> ElectionOutcome;
}

#[derive(Debug, Clone)]
pub struct HetEngStrategy {
    pub params: ElectionParams,
}

impl ElectionStrategy for HetEngStrategy {
    fn algorithm(&self) -> Algorithm {
        Algorithm::HetEng
    }

    fn elect(&mut self, snap: &ElectionSnapshot, _round: u64, rng: &mut ChaCha8Rng) -> ElectionOutcome {
        heteng_election(snap, &self.params, rng)
    }
}

impl ElectionStrategy for Leach {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Leach
    }

    fn elect(&mut self, snap: &ElectionSnapshot, round: u64, rng: &mut ChaCha8Rng) -> ElectionOutcome {
        Leach::elect(self, snap, round, rng)
    }
}

#[derive(Debug, Clone)]
pub struct HeedStrategy {
    pub params: ElectionParams,
    pub e_max: f64,
    pub p_min: f64,
}

impl ElectionStrategy for HeedStrategy {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Heed
    }

    fn elect(&mut self, snap: &ElectionSnapshot, _round: u64, rng: &mut ChaCha8Rng) -> ElectionOutcome {
        heed_election(snap, &self.params, self.e_max, self.p_min, rng)
    }
}

/// Strategy instance for one simulation run. LEACH uses `c_prob` as its
/// desired head fraction.
pub fn build_strategy(
    algorithm: Algorithm,
    params: ElectionParams,
    e_max: f64,
    heed_p_min: f64,
    node_count: usize,
) -> Result<Box<dyn ElectionStrategy>, ElectionError> {
    params.validate()?;
    Ok(match algorithm {
        Algorithm::HetEng => Box::new(HetEngStrategy { params }),
        Algorithm::Leach => Box::new(Leach::new(params.c_prob, node_count)?),
        Algorithm::Heed => {
            if !(e_max > 0.0) {
                return Err(ElectionError::InvalidParams("HEED e_max must be > 0".into()));
            }
            if !(heed_p_min > 0.0 && heed_p_min <= 1.0) {
                return Err(ElectionError::InvalidParams("HEED p_min must lie in (0, 1]".into()));
            }
            Box::new(HeedStrategy {
                params,
                e_max,
                p_min: heed_p_min,
            })
        }
    })
}
