//! The round loop: election, cluster formation, TDMA data frames, drain.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, EnergyDistribution, EnergyInit, ScenarioConfig};
use crate::election::{
    build_strategy, Algorithm, ChStatus, ElectionError, ElectionOutcome, ElectionSnapshot, ElectionStrategy,
};
use crate::energy::{aggregate_payload, select_profile, EnergyLedger, LinkChoice};
use crate::metrics::{self, average_series, AveragedRoundMetrics, MetricsError, RoundMetrics};
use crate::topology::{place_nodes, NeighborIndex, Node, NodeId, Point, TopologyError};

/// Battery size standing in for an unlimited supply.
pub const INFINITE_ENERGY: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("node ids must equal their index (node at {index} has id {id})")]
    NodeIds { index: usize, id: NodeId },
}

/// splitmix64 finalizer, used to derive independent generator streams.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ENERGY_STREAM: u64 = 0x454e_4552_4759;

fn election_stream(algorithm: Algorithm) -> u64 {
    match algorithm {
        Algorithm::HetEng => 0x4845_5445_4e47,
        Algorithm::Leach => 0x004c_4541_4348,
        Algorithm::Heed => 0x4845_4544,
    }
}

/// Seeds for one run. Placement and batteries depend only on the run, so
/// every algorithm sees the same network; election draws get their own
/// per-algorithm stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub placement: u64,
    pub energy: u64,
    pub election: u64,
}

impl RunSeeds {
    pub fn derive(base_seed: u64, run_index: u32, algorithm: Algorithm) -> Self {
        let run_seed = base_seed.wrapping_add(run_index as u64);
        Self {
            placement: run_seed,
            energy: mix_seed(run_seed, ENERGY_STREAM),
            election: mix_seed(run_seed, election_stream(algorithm)),
        }
    }
}

/// Initial batteries for `count` nodes. Unlimited nodes get
/// [`INFINITE_ENERGY`].
pub fn init_energies(count: usize, spec: &EnergyInit, seed: u64) -> Result<Vec<f64>, SimError> {
    if count == 0 {
        return Err(TopologyError::ZeroCount.into());
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut energies = match spec.distribution {
        EnergyDistribution::Constant { joules } => vec![joules; count],
        EnergyDistribution::Uniform { min, max } => (0..count)
            .map(|_| if max > min { rng.random_range(min..=max) } else { min })
            .collect(),
        EnergyDistribution::TwoTier { base, fraction, alpha } => {
            let advanced = (fraction * count as f64).round() as usize;
            let mut e = vec![base; count];
            for i in index::sample(&mut rng, count, advanced.min(count)) {
                e[i] = base * (1.0 + alpha);
            }
            e
        }
    };
    let unlimited = (spec.infinite_fraction * count as f64).round() as usize;
    if unlimited > 0 {
        for i in index::sample(&mut rng, count, unlimited.min(count)) {
            energies[i] = INFINITE_ENERGY;
        }
    }
    Ok(energies)
}

/// Who sends where during the data phase of one round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterAssignment {
    pub member_of: BTreeMap<NodeId, NodeId>,
    pub heads: BTreeSet<NodeId>,
    pub direct: BTreeSet<NodeId>,
}

impl ClusterAssignment {
    /// Checks the structural invariants against the current node states.
    pub fn check(&self, nodes: &[Node], cluster_radius: f64) -> Result<(), String> {
        for n in nodes.iter().filter(|n| n.alive && !self.heads.contains(&n.id)) {
            let member = self.member_of.contains_key(&n.id);
            let direct = self.direct.contains(&n.id);
            if member == direct {
                return Err(format!("node {} is member={member} direct={direct}", n.id));
            }
        }
        for (&m, &h) in &self.member_of {
            if !self.heads.contains(&h) {
                return Err(format!("node {m} joined non-head {h}"));
            }
            if nodes[m].distance_to(&nodes[h]) > cluster_radius {
                return Err(format!("node {m} is out of range of head {h}"));
            }
        }
        Ok(())
    }
}

/// Each alive regular node joins the nearest alive final head within
/// `cluster_radius` (lower id on ties) or goes straight to the sink.
pub fn form_clusters(nodes: &[Node], outcome: &ElectionOutcome, cluster_radius: f64) -> ClusterAssignment {
    let heads: BTreeSet<NodeId> = outcome.heads().into_iter().filter(|&id| nodes[id].alive).collect();
    let index = NeighborIndex::build(heads.iter().map(|&id| (id, nodes[id].position)), cluster_radius);
    let mut out = ClusterAssignment {
        heads,
        ..Default::default()
    };
    for &(id, status) in &outcome.statuses {
        if status == ChStatus::Final || !nodes[id].alive {
            continue;
        }
        let here = nodes[id].position;
        let nearest = index
            .within(&here, cluster_radius, None)
            .into_iter()
            .map(|h| (here.distance_sq(&nodes[h].position), h))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match nearest {
            Some((_, h)) => {
                out.member_of.insert(id, h);
            }
            None => {
                out.direct.insert(id);
            }
        }
    }
    out
}

/// What dissipated energy was spent on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// Election broadcasts and their reception.
    Election,
    /// Member frames to their head, both ends.
    Cluster,
    /// Head aggregates and direct transmissions to the sink.
    Sink,
}

/// Dissipated energy split by [`CostKind`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub election: f64,
    pub cluster: f64,
    pub sink: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Ledgers {
    election: EnergyLedger,
    cluster: EnergyLedger,
    sink: EnergyLedger,
}

impl Ledgers {
    fn charge(&mut self, kind: CostKind, node: &mut Node, amount: f64) -> f64 {
        match kind {
            CostKind::Election => self.election.charge(node, amount),
            CostKind::Cluster => self.cluster.charge(node, amount),
            CostKind::Sink => self.sink.charge(node, amount),
        }
    }

    fn total(&self) -> f64 {
        let mut all = EnergyLedger::default();
        for part in [self.election.total(), self.cluster.total(), self.sink.total()] {
            all.record(part);
        }
        all.total()
    }
}

/// Everything that happened in one round.
#[derive(Debug, Clone)]
pub struct RoundReport {
    pub metrics: RoundMetrics,
    pub outcome: Option<ElectionOutcome>,
    pub clusters: ClusterAssignment,
}

/// One simulation run.
pub struct Simulation {
    config: ScenarioConfig,
    algorithm: Algorithm,
    nodes: Vec<Node>,
    ledger: Ledgers,
    initial_total: f64,
    strategy: Box<dyn ElectionStrategy>,
    rng: ChaCha8Rng,
    round: u64,
    coverage_cache: Option<(usize, f64)>,
    escalations: u64,
}

impl Simulation {
    /// Build the network for run `run_index` of `config`.
    pub fn new(config: &ScenarioConfig, algorithm: Algorithm, run_index: u32) -> Result<Self, SimError> {
        config.validate()?;
        let seeds = RunSeeds::derive(config.seed, run_index, algorithm);
        let positions = place_nodes(&config.field, config.node_count, config.placement, seeds.placement)?;
        let energies = init_energies(config.node_count, &config.energy, seeds.energy)?;
        let nodes = positions
            .into_iter()
            .zip(energies)
            .enumerate()
            .map(|(id, (pos, e))| {
                let mut n = Node::new(id, pos, e, config.comm_radius);
                n.non_depleting = e >= INFINITE_ENERGY;
                n
            })
            .collect();
        Self::from_nodes(config, algorithm, nodes, seeds.election)
    }

    /// Run over a hand-built network. Node ids must equal their index.
    pub fn from_nodes(
        config: &ScenarioConfig,
        algorithm: Algorithm,
        nodes: Vec<Node>,
        election_seed: u64,
    ) -> Result<Self, SimError> {
        if let Some((index, n)) = nodes.iter().enumerate().find(|(i, n)| n.id != *i) {
            return Err(SimError::NodeIds { index, id: n.id });
        }
        let e_max = nodes
            .iter()
            .filter(|n| !n.non_depleting)
            .map(|n| n.initial_energy)
            .fold(0.0, f64::max);
        let e_max = if e_max > 0.0 { e_max } else { INFINITE_ENERGY };
        let strategy = build_strategy(algorithm, config.election, e_max, config.heed_p_min, nodes.len())?;
        let mut initial = EnergyLedger::default();
        for n in &nodes {
            initial.record(n.residual_energy);
        }
        Ok(Self {
            config: config.clone(),
            algorithm,
            nodes,
            ledger: Ledgers::default(),
            initial_total: initial.total(),
            strategy,
            rng: ChaCha8Rng::seed_from_u64(election_seed),
            round: 0,
            coverage_cache: None,
            escalations: 0,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn dissipated(&self) -> f64 {
        self.ledger.total()
    }

    pub fn initial_total(&self) -> f64 {
        self.initial_total
    }

    pub fn breakdown(&self) -> EnergyBreakdown {
        EnergyBreakdown {
            election: self.ledger.election.total(),
            cluster: self.ledger.cluster.total(),
            sink: self.ledger.sink.total(),
        }
    }

    /// Links that had to use a profile beyond its rated range.
    pub fn escalations(&self) -> u64 {
        self.escalations
    }

    /// `|initial - (residual + dissipated)| / initial`.
    pub fn conservation_error(&self) -> f64 {
        let mut residual = EnergyLedger::default();
        for n in &self.nodes {
            residual.record(n.residual_energy);
        }
        let balance = residual.total() + self.ledger.total();
        (self.initial_total - balance).abs() / self.initial_total.max(f64::MIN_POSITIVE)
    }

    pub fn alive_count(&self) -> usize {
        metrics::alive_count(&self.nodes)
    }

    fn link(&mut self, bits: u64, distance: f64) -> LinkChoice<'_> {
        let choice =
            select_profile(&self.config.profiles, bits, distance).expect("validated config has at least one profile");
        if choice.escalated {
            if self.escalations == 0 {
                log::warn!(
                    "no radio profile reaches {distance:.1} m; using `{}` beyond its range",
                    choice.profile.name
                );
            }
            self.escalations += 1;
        }
        choice
    }

    /// Send `bits` from `from` to `to` (a node or the sink). Returns whether
    /// the sender could pay for the whole transmission; the receiver pays
    /// reception only if the sender did.
    fn transmit(&mut self, kind: CostKind, from: NodeId, to: Option<NodeId>, dest: Point, bits: u64) -> bool {
        let distance = self.nodes[from].position.distance(&dest);
        let (tx, rx) = {
            let choice = self.link(bits, distance);
            (choice.tx_energy, choice.profile.elec_energy * bits as f64)
        };
        let paid = self.ledger.charge(kind, &mut self.nodes[from], tx);
        if paid < tx {
            return false;
        }
        if let Some(r) = to {
            if !self.nodes[r].alive {
                return false;
            }
            let got = self.ledger.charge(kind, &mut self.nodes[r], rx);
            return got >= rx;
        }
        true
    }

    fn election_broadcasts(&mut self, snap: &ElectionSnapshot, outcome: &ElectionOutcome) {
        let bits = self.config.packet.broadcast_bits();
        let range = self.config.election.cluster_radius;
        let (tx, rx) = {
            let choice = self.link(bits, range);
            (choice.tx_energy, choice.profile.elec_energy * bits as f64)
        };
        let competed: BTreeSet<NodeId> = outcome.competitors.iter().flatten().copied().collect();
        // heads that skipped the competition still announce themselves once
        let announcements: Vec<NodeId> = outcome
            .heads()
            .into_iter()
            .filter(|id| !competed.contains(id))
            .collect();
        let senders = outcome.competitors.iter().flatten().chain(&announcements);
        for &id in senders {
            if !self.nodes[id].alive {
                continue;
            }
            self.ledger.charge(CostKind::Election, &mut self.nodes[id], tx);
            for &j in snap.cluster_neighbors(id) {
                if self.nodes[j].alive {
                    self.ledger.charge(CostKind::Election, &mut self.nodes[j], rx);
                }
            }
        }
    }

    fn data_phase(&mut self, clusters: &ClusterAssignment) {
        let sink = self.config.field.sink();
        let packet = self.config.packet;
        let frame_bits = packet.frame_bits();
        let mut orphaned: BTreeSet<NodeId> = BTreeSet::new();
        for _ in 0..self.config.frames_per_round {
            let mut received: BTreeMap<NodeId, u64> = BTreeMap::new();
            for (&member, &head) in &clusters.member_of {
                if !self.nodes[member].alive {
                    continue;
                }
                if !self.nodes[head].alive || orphaned.contains(&member) {
                    // head died earlier this round
                    orphaned.insert(member);
                    self.transmit(CostKind::Sink, member, None, sink, frame_bits);
                    continue;
                }
                let dest = self.nodes[head].position;
                if self.transmit(CostKind::Cluster, member, Some(head), dest, frame_bits) {
                    *received.entry(head).or_default() += packet.data_bits();
                }
            }
            for &head in &clusters.heads {
                if !self.nodes[head].alive {
                    continue;
                }
                let payload = packet.data_bits() + received.get(&head).copied().unwrap_or(0);
                let bits = aggregate_payload(&packet, payload);
                self.transmit(CostKind::Sink, head, None, sink, bits);
            }
            for &id in &clusters.direct {
                if self.nodes[id].alive {
                    self.transmit(CostKind::Sink, id, None, sink, frame_bits);
                }
            }
        }
    }

    fn coverage(&mut self) -> f64 {
        // nodes only die, so an unchanged alive count means an unchanged set
        let alive = self.alive_count();
        if let Some((count, value)) = self.coverage_cache {
            if count == alive {
                return value;
            }
        }
        let value = metrics::coverage_fraction(&self.nodes, &self.config.field, self.config.coverage_grid_step)
            .expect("validated grid step");
        self.coverage_cache = Some((alive, value));
        value
    }

    pub fn run_round(&mut self) -> RoundReport {
        self.round += 1;
        if self.alive_count() == 0 {
            return RoundReport {
                metrics: RoundMetrics::dead(self.round),
                outcome: None,
                clusters: ClusterAssignment::default(),
            };
        }
        let snap = ElectionSnapshot::capture(
            &self.nodes,
            self.config.field.area(),
            self.config.election.cluster_radius,
        );
        let outcome = self.strategy.elect(&snap, self.round - 1, &mut self.rng);
        self.election_broadcasts(&snap, &outcome);

        let clusters = form_clusters(&self.nodes, &outcome, self.config.election.cluster_radius);
        debug_assert_eq!(clusters.check(&self.nodes, self.config.election.cluster_radius), Ok(()));
        self.data_phase(&clusters);

        let competing = snap.alive().len();
        let ch_fraction = match metrics::ch_fraction(&outcome, competing) {
            Ok(f) => f,
            // LEACH can elect nobody; everyone then reports to the sink
            Err(MetricsError::NoClusterHeads(_)) => 0.0,
            Err(e) => unreachable!("{e}"),
        };
        let metrics = RoundMetrics {
            round: self.round,
            alive_count: self.alive_count(),
            total_residual: metrics::total_residual(&self.nodes),
            coverage_fraction: self.coverage(),
            ch_fraction,
            election_iterations: outcome.iterations_used,
        };
        RoundReport {
            metrics,
            outcome: Some(outcome),
            clusters,
        }
    }

    /// Run the configured number of rounds; rounds after network death are
    /// reported as zero rows.
    pub fn run(mut self) -> Vec<RoundMetrics> {
        let mut series = Vec::with_capacity(self.config.rounds as usize);
        while self.round < self.config.rounds {
            if self.alive_count() == 0 {
                self.round += 1;
                series.push(RoundMetrics::dead(self.round));
                continue;
            }
            series.push(self.run_round().metrics);
        }
        series
    }
}

/// Per-run series and their element-wise mean for one algorithm.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub algorithm: Algorithm,
    pub runs: Vec<Vec<RoundMetrics>>,
    pub mean: Vec<AveragedRoundMetrics>,
}

/// Execute `config.runs` independent runs (in parallel) and average them.
pub fn run_simulation(config: &ScenarioConfig, algorithm: Algorithm) -> Result<SimulationReport, SimError> {
    config.validate()?;
    let sims = (0..config.runs)
        .map(|r| Simulation::new(config, algorithm, r))
        .collect::<Result<Vec<_>, _>>()?;
    let runs: Vec<Vec<RoundMetrics>> = sims.into_par_iter().map(Simulation::run).collect();
    let mean = average_series(&runs)?;
    Ok(SimulationReport { algorithm, runs, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::election::ElectionParams;
    use crate::energy::{PacketSpec, RadioProfile};
    use crate::topology::FieldSpec;
    use approx::assert_relative_eq;

    fn single_profile_config() -> ScenarioConfig {
        ScenarioConfig {
            profiles: vec![RadioProfile::first_order("ref", 1_000.0)],
            frames_per_round: 1,
            ..ScenarioConfig::default()
        }
    }

    fn outcome_with(heads: &[NodeId], n: usize) -> ElectionOutcome {
        ElectionOutcome {
            statuses: (0..n)
                .map(|i| {
                    (
                        i,
                        if heads.contains(&i) {
                            ChStatus::Final
                        } else {
                            ChStatus::Regular
                        },
                    )
                })
                .collect(),
            iterations_used: 1,
            ch_probability_trace: vec![],
            competitors: vec![],
        }
    }

    #[test]
    fn energies_constant_uniform_two_tier() {
        let constant = EnergyInit {
            distribution: EnergyDistribution::Constant { joules: 1.0 },
            infinite_fraction: 0.0,
        };
        assert_eq!(init_energies(3, &constant, 1).unwrap(), vec![1.0; 3]);

        let uniform = EnergyInit::default();
        let a = init_energies(300, &uniform, 42).unwrap();
        assert_eq!(a.len(), 300);
        assert!(a.iter().all(|e| (0.5..=2.0).contains(e)));
        assert_eq!(a, init_energies(300, &uniform, 42).unwrap());

        let tiers = EnergyInit {
            distribution: EnergyDistribution::TwoTier {
                base: 1.0,
                fraction: 0.1,
                alpha: 1.0,
            },
            infinite_fraction: 0.0,
        };
        let e = init_energies(100, &tiers, 9).unwrap();
        assert_eq!(e.iter().filter(|&&x| x == 2.0).count(), 10);
        assert_eq!(e.iter().filter(|&&x| x == 1.0).count(), 90);

        let unlimited = EnergyInit {
            infinite_fraction: 0.05,
            ..constant
        };
        let e = init_energies(100, &unlimited, 3).unwrap();
        assert_eq!(e.iter().filter(|&&x| x == INFINITE_ENERGY).count(), 5);

        assert!(init_energies(0, &constant, 1).is_err());
        let negative = EnergyInit {
            distribution: EnergyDistribution::Uniform { min: -1.0, max: 1.0 },
            infinite_fraction: 0.0,
        };
        assert!(init_energies(5, &negative, 1).is_err());
    }

    #[test]
    fn cluster_formation_rules() {
        let mk = |pts: &[(f64, f64)]| -> Vec<Node> {
            pts.iter()
                .enumerate()
                .map(|(i, &(x, y))| Node::new(i, Point::new(x, y), 1.0, 25.0))
                .collect()
        };
        // single option
        let nodes = mk(&[(50.0, 50.0), (60.0, 50.0)]);
        let c = form_clusters(&nodes, &outcome_with(&[0], 2), 25.0);
        assert_eq!(c.member_of.get(&1), Some(&0));
        assert!(c.direct.is_empty());

        // equidistant heads 3 and 7: lower id wins
        let mut pts = vec![(0.0, 0.0); 8];
        pts[0] = (50.0, 50.0);
        pts[3] = (30.0, 50.0);
        pts[7] = (70.0, 50.0);
        for (i, p) in pts.iter_mut().enumerate() {
            if ![0, 3, 7].contains(&i) {
                *p = (5.0 + i as f64, 95.0);
            }
        }
        let nodes = mk(&pts);
        let c = form_clusters(&nodes, &outcome_with(&[3, 7], 8), 25.0);
        assert_eq!(c.member_of.get(&0), Some(&3));

        // out of range
        let nodes = mk(&[(0.0, 0.0), (40.0, 0.0)]);
        let c = form_clusters(&nodes, &outcome_with(&[1], 2), 25.0);
        assert!(c.direct.contains(&0));
        assert_eq!(c.heads.iter().copied().collect::<Vec<_>>(), vec![1]);
        c.check(&nodes, 25.0).unwrap();
    }

    #[test]
    fn isolated_node_round_costs() {
        // one node: skips the competition but announces itself, then one
        // frame forwarding its own compressed payload to the sink
        let config = single_profile_config();
        let nodes = vec![Node::new(0, Point::new(50.0, 50.0), 1.0, 25.0)];
        let mut sim = Simulation::from_nodes(&config, Algorithm::HetEng, nodes, 1).unwrap();
        let report = sim.run_round();
        let outcome = report.outcome.unwrap();
        assert_eq!(outcome.head_count(), 1);
        assert_eq!(outcome.iterations_used, 1);
        let profile = &config.profiles[0];
        let bits = aggregate_payload(&PacketSpec::default(), 800);
        assert_eq!(bits, 840);
        let expected = profile.tx_energy(200, 25.0) + profile.tx_energy(bits, 125.0);
        assert_relative_eq!(sim.dissipated(), expected, max_relative = 1e-12);
        assert_relative_eq!(sim.nodes()[0].residual_energy, 1.0 - expected, max_relative = 1e-12);
        assert_eq!(report.metrics.ch_fraction, 1.0);
        assert_eq!(report.metrics.alive_count, 1);
    }

    #[test]
    fn pair_round_costs_by_hand() {
        // A (10 J) and B (1 J) 10 m apart; A wins, B joins it
        let config = single_profile_config();
        let nodes = vec![
            Node::new(0, Point::new(40.0, 100.0), 10.0, 25.0),
            Node::new(1, Point::new(50.0, 100.0), 1.0, 25.0),
        ];
        let mut sim = Simulation::from_nodes(&config, Algorithm::HetEng, nodes, 5).unwrap();
        let report = sim.run_round();
        let p = &config.profiles[0];
        let outcome = report.outcome.unwrap();
        assert_eq!(outcome.heads(), vec![0]);
        assert_eq!(report.clusters.member_of.get(&1), Some(&0));
        // both broadcast once at 25 m, each hears the other
        let bcast = p.tx_energy(200, 25.0) + p.elec_energy * 200.0;
        let member = p.tx_energy(1000, 10.0);
        let head = p.elec_energy * 1000.0
            + p.tx_energy(
                aggregate_payload(&PacketSpec::default(), 1600),
                Point::new(40.0, 100.0).distance(&config.field.sink()),
            );
        let b_used = 1.0 - sim.nodes()[1].residual_energy;
        let a_used = 10.0 - sim.nodes()[0].residual_energy;
        assert_relative_eq!(b_used, bcast + member, max_relative = 1e-9);
        assert_relative_eq!(a_used, bcast + head, max_relative = 1e-9);
        assert!(sim.conservation_error() < 1e-12);
        let split = sim.breakdown();
        assert_relative_eq!(split.election, 2.0 * bcast, max_relative = 1e-9);
        assert_relative_eq!(split.cluster, member + p.elec_energy * 1000.0, max_relative = 1e-9);
        assert_relative_eq!(split.sink, head - p.elec_energy * 1000.0, max_relative = 1e-9);
    }

    #[test]
    fn dead_network_round_is_noop() {
        let config = single_profile_config();
        let mut node = Node::new(0, Point::new(1.0, 1.0), 1.0, 25.0);
        node.drain(1.0);
        let mut sim = Simulation::from_nodes(&config, Algorithm::Leach, vec![node], 1).unwrap();
        let r = sim.run_round();
        assert_eq!(r.metrics, RoundMetrics::dead(1));
        assert!(r.outcome.is_none());
        assert_eq!(sim.dissipated(), 0.0);
    }

    #[test]
    fn weak_head_death_orphans_members() {
        // head has just enough for a frame or two; members fall back to the
        // sink once it is gone and nothing is charged to the dead head
        let mut config = single_profile_config();
        config.frames_per_round = 5;
        config.election = ElectionParams {
            c_prob: 0.05,
            ..ElectionParams::default()
        };
        let nodes = vec![
            Node::new(0, Point::new(50.0, 90.0), 2e-3, 25.0),
            Node::new(1, Point::new(55.0, 90.0), 1e-4, 25.0),
            Node::new(2, Point::new(45.0, 90.0), 1e-4, 25.0),
        ];
        let mut sim = Simulation::from_nodes(&config, Algorithm::HetEng, nodes, 3).unwrap();
        let r = sim.run_round();
        assert!(r.outcome.unwrap().heads().contains(&0));
        assert!(sim.nodes().iter().all(|n| n.residual_energy >= 0.0));
        assert!(sim.conservation_error() < 1e-12);
    }

    #[test]
    fn seeds_share_placement_across_algorithms() {
        let a = RunSeeds::derive(42, 3, Algorithm::HetEng);
        let b = RunSeeds::derive(42, 3, Algorithm::Leach);
        assert_eq!(a.placement, b.placement);
        assert_eq!(a.energy, b.energy);
        assert_ne!(a.election, b.election);
        assert_eq!(a.placement, 45);
    }

    #[test]
    fn small_simulation_is_deterministic_and_conserving() {
        let config = ScenarioConfig {
            node_count: 60,
            rounds: 30,
            runs: 2,
            field: FieldSpec::default(),
            ..ScenarioConfig::default()
        };
        for alg in Algorithm::ALL {
            let a = run_simulation(&config, alg).unwrap();
            let b = run_simulation(&config, alg).unwrap();
            assert_eq!(a.runs, b.runs);
            assert_eq!(a.runs.len(), 2);
            assert_eq!(a.mean.len(), 30);

            let mut sim = Simulation::new(&config, alg, 0).unwrap();
            for _ in 0..30 {
                sim.run_round();
                assert!(sim.conservation_error() < 1e-9);
            }
        }
    }

    #[test]
    fn single_run_mean_is_the_run() {
        let config = ScenarioConfig {
            node_count: 40,
            rounds: 10,
            runs: 1,
            ..ScenarioConfig::default()
        };
        let report = run_simulation(&config, Algorithm::Heed).unwrap();
        let as_avg: Vec<AveragedRoundMetrics> = report.runs[0].iter().map(Into::into).collect();
        assert_eq!(report.mean, as_avg);
    }

    #[test]
    fn early_stop_pads_with_zero_rows() {
        let config = ScenarioConfig {
            node_count: 5,
            rounds: 40,
            runs: 1,
            energy: EnergyInit {
                distribution: EnergyDistribution::Constant { joules: 0.01 },
                infinite_fraction: 0.0,
            },
            ..ScenarioConfig::default()
        };
        let series = Simulation::new(&config, Algorithm::Leach, 0).unwrap().run();
        assert_eq!(series.len(), 40);
        let last = series.last().unwrap();
        assert_eq!(*last, RoundMetrics::dead(40));
        assert!(series.windows(2).all(|w| w[1].round == w[0].round + 1));
    }
}
