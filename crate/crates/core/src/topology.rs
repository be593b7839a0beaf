//! Sensor field, node placement and fixed-radius neighbor discovery.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("node count must be at least 1")]
    ZeroCount,
    #[error("field dimensions must be positive and finite, got {width} x {height}")]
    InvalidField { width: f64, height: f64 },
    #[error("sink position must be finite")]
    InvalidSink,
    #[error("area must be positive, got {0}")]
    NonPositiveArea(f64),
    #[error("communication radius must be non-negative, got {0}")]
    NegativeRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// Rectangular deployment area anchored at the origin, plus the sink location.
/// The sink may sit outside the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    width: f64,
    height: f64,
    sink: Point,
}

impl FieldSpec {
    pub fn new(width: f64, height: f64, sink: Point) -> Result<Self, TopologyError> {
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
            return Err(TopologyError::InvalidField { width, height });
        }
        if !(sink.x.is_finite() && sink.y.is_finite()) {
            return Err(TopologyError::InvalidSink);
        }
        Ok(Self { width, height, sink })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn sink(&self) -> Point {
        self.sink
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            width: 100.0,
            height: 100.0,
            sink: Point::new(50.0, 175.0),
        }
    }
}

/// A battery-powered device.
///
/// `alive` is kept equal to `residual_energy > 0`; all mutation goes through
/// [`Node::drain`], which is the only way energy leaves a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub position: Point,
    pub initial_energy: f64,
    pub residual_energy: f64,
    pub comm_radius: f64,
    pub alive: bool,
    /// Mains-like devices modeled with a huge finite battery. Excluded from
    /// the residual-energy metric.
    pub non_depleting: bool,
}

impl Node {
    pub fn new(id: NodeId, position: Point, energy: f64, comm_radius: f64) -> Self {
        Self {
            id,
            position,
            initial_energy: energy,
            residual_energy: energy,
            comm_radius,
            alive: energy > 0.0,
            non_depleting: false,
        }
    }

    pub fn distance_to(&self, other: &Node) -> f64 {
        self.position.distance(&other.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    #[default]
    Uniform,
    /// Near-square lattice at cell centers. Deterministic regardless of seed.
    Grid,
}

/// Scatter `count` positions over the field.
pub fn place_nodes(
    field: &FieldSpec,
    count: usize,
    placement: Placement,
    seed: u64,
) -> Result<Vec<Point>, TopologyError> {
    if count == 0 {
        return Err(TopologyError::ZeroCount);
    }
    // Deserialized values bypass `FieldSpec::new`.
    FieldSpec::new(field.width, field.height, field.sink)?;

    let points = match placement {
        Placement::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| Point::new(rng.random::<f64>() * field.width, rng.random::<f64>() * field.height))
                .collect()
        }
        Placement::Grid => {
            let aspect = field.width / field.height;
            let cols = ((count as f64 * aspect).sqrt().ceil() as usize).max(1);
            let rows = count.div_ceil(cols);
            let dx = field.width / cols as f64;
            let dy = field.height / rows as f64;
            (0..count)
                .map(|i| {
                    let (r, c) = (i / cols, i % cols);
                    Point::new((c as f64 + 0.5) * dx, (r as f64 + 0.5) * dy)
                })
                .collect()
        }
    };
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NeighborhoodStats {
    pub neighbor_count: usize,
    pub mean_energy: f64,
    pub sample_stddev: f64,
    pub degree: usize,
}

impl NeighborhoodStats {
    /// Mean and sample standard deviation (n - 1 denominator) of the given
    /// energies. Fewer than two samples give a deviation of 0.
    pub fn from_energies(energies: &[f64]) -> Self {
        let n = energies.len();
        if n == 0 {
            return Self::default();
        }
        let mean = energies.iter().sum::<f64>() / n as f64;
        let stddev = if n >= 2 {
            let ss: f64 = energies.iter().map(|e| (e - mean) * (e - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            neighbor_count: n,
            mean_energy: mean,
            sample_stddev: stddev,
            degree: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Neighborhood {
    pub stats: NeighborhoodStats,
    /// Ascending by id.
    pub neighbors: Vec<NodeId>,
}

fn neighborhood_from_ids(ids: Vec<NodeId>, energy_of: impl Fn(NodeId) -> f64) -> Neighborhood {
    let energies: Vec<f64> = ids.iter().map(|&id| energy_of(id)).collect();
    Neighborhood {
        stats: NeighborhoodStats::from_energies(&energies),
        neighbors: ids,
    }
}

/// Alive nodes other than `node` within its communication radius (closed
/// ball), with statistics over their residual energies.
///
/// Linear scan; [`NeighborIndex`] answers the same query for whole networks.
pub fn neighbors_of(node: &Node, all_nodes: &[Node]) -> Neighborhood {
    let r2 = node.comm_radius * node.comm_radius;
    let mut ids: Vec<NodeId> = all_nodes
        .iter()
        .filter(|other| other.id != node.id && other.alive && node.position.distance_sq(&other.position) <= r2)
        .map(|other| other.id)
        .collect();
    ids.sort_unstable();
    let energy = |id: NodeId| {
        all_nodes
            .iter()
            .find(|n| n.id == id)
            .map(|n| n.residual_energy)
            .unwrap_or(0.0)
    };
    neighborhood_from_ids(ids, energy)
}

/// Expected neighbor count under uniform density: `pi R^2 * devices / area`.
pub fn average_density(comm_radius: f64, device_count: usize, area: f64) -> Result<f64, TopologyError> {
    if !(area > 0.0) {
        return Err(TopologyError::NonPositiveArea(area));
    }
    if comm_radius < 0.0 {
        return Err(TopologyError::NegativeRadius(comm_radius));
    }
    Ok(PI * comm_radius * comm_radius * device_count as f64 / area)
}

/// Uniform bucket grid over node positions for fixed-radius queries.
///
/// Holds positions for a snapshot of nodes; ids must be unique. Queries
/// return ids in ascending order so results are bit-identical to the
/// linear scan.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    cell: f64,
    origin: Point,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<(NodeId, Point)>>,
}

impl NeighborIndex {
    pub fn build(points: impl IntoIterator<Item = (NodeId, Point)>, cell: f64) -> Self {
        let pts: Vec<(NodeId, Point)> = points.into_iter().collect();
        let cell = if cell > 0.0 && cell.is_finite() { cell } else { 1.0 };
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        if let Some((_, first)) = pts.first() {
            (min_x, min_y, max_x, max_y) = (first.x, first.y, first.x, first.y);
        }
        for (_, p) in &pts {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        let cols = ((max_x - min_x) / cell).floor() as usize + 1;
        let rows = ((max_y - min_y) / cell).floor() as usize + 1;
        let mut index = Self {
            cell,
            origin: Point::new(min_x, min_y),
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
        };
        for (id, p) in pts {
            let (c, r) = index.cell_of(&p);
            index.buckets[r * cols + c].push((id, p));
        }
        index
    }

    /// Index over the alive nodes of `nodes`, bucketed at their largest radius.
    pub fn of_alive(nodes: &[Node]) -> Self {
        let cell = nodes
            .iter()
            .filter(|n| n.alive)
            .map(|n| n.comm_radius)
            .fold(0.0, f64::max);
        Self::build(nodes.iter().filter(|n| n.alive).map(|n| (n.id, n.position)), cell)
    }

    fn cell_of(&self, p: &Point) -> (usize, usize) {
        let c = ((p.x - self.origin.x) / self.cell).floor().max(0.0) as usize;
        let r = ((p.y - self.origin.y) / self.cell).floor().max(0.0) as usize;
        (c.min(self.cols - 1), r.min(self.rows - 1))
    }

    /// Ids within `radius` of `center` (closed ball), ascending, excluding
    /// `exclude` if given.
    pub fn within(&self, center: &Point, radius: f64, exclude: Option<NodeId>) -> Vec<NodeId> {
        let r2 = radius * radius;
        let reach = (radius / self.cell).ceil() as i64;
        let cx = ((center.x - self.origin.x) / self.cell).floor() as i64;
        let cy = ((center.y - self.origin.y) / self.cell).floor() as i64;
        let mut out = Vec::new();
        for r in (cy - reach).max(0)..=(cy + reach).min(self.rows as i64 - 1) {
            for c in (cx - reach).max(0)..=(cx + reach).min(self.cols as i64 - 1) {
                for (id, p) in &self.buckets[r as usize * self.cols + c as usize] {
                    if Some(*id) != exclude && center.distance_sq(p) <= r2 {
                        out.push(*id);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Same result as [`neighbors_of`]; `nodes` must be indexed by id.
    pub fn neighborhood(&self, node: &Node, nodes: &[Node]) -> Neighborhood {
        let ids = self.within(&node.position, node.comm_radius, Some(node.id));
        neighborhood_from_ids(ids, |id| nodes[id].residual_energy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn node(id: NodeId, x: f64, y: f64, e: f64, r: f64) -> Node {
        Node::new(id, Point::new(x, y), e, r)
    }

    #[test]
    fn placement_inside_field_and_reproducible() {
        let field = FieldSpec::default();
        let a = place_nodes(&field, 300, Placement::Uniform, 42).unwrap();
        let b = place_nodes(&field, 300, Placement::Uniform, 42).unwrap();
        assert_eq!(a.len(), 300);
        assert!(a.iter().all(|p| field.contains(p)));
        assert_eq!(a, b);
        let c = place_nodes(&field, 300, Placement::Uniform, 43).unwrap();
        assert_ne!(a, c);

        let one = place_nodes(&field, 1, Placement::Uniform, 7).unwrap();
        assert_eq!(one.len(), 1);
        assert!(field.contains(&one[0]));
    }

    #[test]
    fn grid_placement_covers_field() {
        let field = FieldSpec::new(100.0, 50.0, Point::new(0.0, 0.0)).unwrap();
        let pts = place_nodes(&field, 50, Placement::Grid, 0).unwrap();
        assert_eq!(pts.len(), 50);
        assert!(pts.iter().all(|p| field.contains(p)));
    }

    #[test]
    fn placement_rejects_bad_input() {
        let field = FieldSpec::default();
        assert_eq!(
            place_nodes(&field, 0, Placement::Uniform, 1),
            Err(TopologyError::ZeroCount)
        );
        assert!(FieldSpec::new(0.0, 10.0, Point::new(0.0, 0.0)).is_err());
        assert!(FieldSpec::new(10.0, -1.0, Point::new(0.0, 0.0)).is_err());
        assert!(FieldSpec::new(10.0, 10.0, Point::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn neighbor_stats_two_neighbors() {
        let nodes = vec![
            node(0, 0.0, 0.0, 1.0, 25.0),
            node(1, 10.0, 0.0, 2.0, 25.0),
            node(2, 20.0, 0.0, 4.0, 25.0),
        ];
        let hood = neighbors_of(&nodes[0], &nodes);
        assert_eq!(hood.neighbors, vec![1, 2]);
        assert_eq!(hood.stats.degree, 2);
        assert_eq!(hood.stats.neighbor_count, 2);
        assert_relative_eq!(hood.stats.mean_energy, 3.0);
        assert_relative_eq!(hood.stats.sample_stddev, 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn neighbor_stats_degenerate() {
        let lonely = vec![node(0, 0.0, 0.0, 1.0, 25.0), node(1, 90.0, 90.0, 3.0, 25.0)];
        let hood = neighbors_of(&lonely[0], &lonely);
        assert_eq!(hood.stats, NeighborhoodStats::default());

        let pair = vec![node(0, 0.0, 0.0, 1.0, 25.0), node(1, 5.0, 0.0, 5.0, 25.0)];
        let hood = neighbors_of(&pair[0], &pair);
        assert_eq!(hood.stats.degree, 1);
        assert_eq!(hood.stats.mean_energy, 5.0);
        assert_eq!(hood.stats.sample_stddev, 0.0);
    }

    #[test]
    fn boundary_distance_counts_and_dead_excluded() {
        let mut nodes = vec![
            node(0, 0.0, 0.0, 1.0, 25.0),
            node(1, 25.0, 0.0, 1.0, 25.0),
            node(2, 0.0, 10.0, 1.0, 25.0),
        ];
        nodes[2].alive = false;
        nodes[2].residual_energy = 0.0;
        let hood = neighbors_of(&nodes[0], &nodes);
        assert_eq!(hood.neighbors, vec![1]);
    }

    #[test]
    fn average_density_values() {
        assert_relative_eq!(
            average_density(25.0, 300, 10_000.0).unwrap(),
            58.904_862_254_808_6,
            epsilon = 1e-9
        );
        assert_eq!(average_density(0.0, 300, 10_000.0).unwrap(), 0.0);
        assert_relative_eq!(average_density(10.0, 100, 10_000.0).unwrap(), PI, epsilon = 1e-12);
        assert!(average_density(25.0, 300, 0.0).is_err());
        assert!(average_density(25.0, 300, -5.0).is_err());
    }

    #[test]
    fn average_density_scaling() {
        let base = average_density(7.0, 40, 900.0).unwrap();
        assert_relative_eq!(average_density(7.0, 80, 900.0).unwrap(), 2.0 * base, epsilon = 1e-12);
        assert_relative_eq!(average_density(14.0, 40, 900.0).unwrap(), 4.0 * base, epsilon = 1e-12);
    }

    #[test]
    fn index_empty_and_single() {
        let idx = NeighborIndex::build(std::iter::empty(), 10.0);
        assert!(idx.within(&Point::new(0.0, 0.0), 50.0, None).is_empty());
        let idx = NeighborIndex::build([(3, Point::new(5.0, 5.0))], 10.0);
        assert_eq!(idx.within(&Point::new(0.0, 0.0), 8.0, None), vec![3]);
        assert!(idx.within(&Point::new(0.0, 0.0), 8.0, Some(3)).is_empty());
    }
}
