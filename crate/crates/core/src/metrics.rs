//! Per-round network metrics and cross-run averaging.

use serde::Serialize;
use thiserror::Error;

use crate::election::ElectionOutcome;
use crate::topology::{FieldSpec, Node};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no alive nodes")]
    NoAliveNodes,
    #[error("election produced no cluster heads among {0} alive nodes")]
    NoClusterHeads(usize),
    #[error("grid step must be positive, got {0}")]
    InvalidGridStep(f64),
    #[error("nothing to average")]
    EmptySeriesList,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RoundMetrics {
    pub round: u64,
    pub alive_count: usize,
    pub total_residual: f64,
    pub coverage_fraction: f64,
    pub ch_fraction: f64,
    pub election_iterations: u32,
}

impl RoundMetrics {
    /// Row for a round in which the whole network is already dead.
    pub fn dead(round: u64) -> Self {
        Self {
            round,
            ..Self::default()
        }
    }
}

/// Element-wise mean of several runs' metrics for one round.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AveragedRoundMetrics {
    pub round: u64,
    pub alive_count: f64,
    pub total_residual: f64,
    pub coverage_fraction: f64,
    pub ch_fraction: f64,
    pub election_iterations: f64,
}

impl From<&RoundMetrics> for AveragedRoundMetrics {
    fn from(m: &RoundMetrics) -> Self {
        Self {
            round: m.round,
            alive_count: m.alive_count as f64,
            total_residual: m.total_residual,
            coverage_fraction: m.coverage_fraction,
            ch_fraction: m.ch_fraction,
            election_iterations: m.election_iterations as f64,
        }
    }
}

pub fn alive_count(nodes: &[Node]) -> usize {
    nodes.iter().filter(|n| n.residual_energy > 0.0).count()
}

/// Residual energy of depleting nodes; non-depleting ones are reported by
/// [`non_depleting_residual`].
pub fn total_residual(nodes: &[Node]) -> f64 {
    nodes
        .iter()
        .filter(|n| !n.non_depleting)
        .map(|n| n.residual_energy)
        .sum()
}

pub fn non_depleting_residual(nodes: &[Node]) -> f64 {
    nodes
        .iter()
        .filter(|n| n.non_depleting)
        .map(|n| n.residual_energy)
        .sum()
}

/// Grid sample points: centers of `step`-sized cells tiling `[0, len]`,
/// the last cell clipped to the field.
fn sample_axis(len: f64, step: f64) -> Vec<f64> {
    let cells = ((len / step) - 1e-9).ceil().max(1.0) as usize;
    (0..cells)
        .map(|i| {
            let lo = i as f64 * step;
            let hi = ((i + 1) as f64 * step).min(len);
            0.5 * (lo + hi)
        })
        .collect()
}

/// Fraction of grid sample points within communication range of at least
/// one alive node.
pub fn coverage_fraction(nodes: &[Node], field: &FieldSpec, grid_step: f64) -> Result<f64, MetricsError> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(MetricsError::InvalidGridStep(grid_step));
    }
    let xs = sample_axis(field.width(), grid_step);
    let ys = sample_axis(field.height(), grid_step);
    let (nx, ny) = (xs.len(), ys.len());
    let mut covered = vec![false; nx * ny];

    // index of the first sample >= v
    let lower = |axis: &[f64], v: f64| axis.partition_point(|&s| s < v);
    for node in nodes.iter().filter(|n| n.alive) {
        let r = node.comm_radius;
        let r2 = r * r;
        let (px, py) = (node.position.x, node.position.y);
        let (x0, x1) = (lower(&xs, px - r), lower(&xs, px + r + 1e-12));
        let (y0, y1) = (lower(&ys, py - r), lower(&ys, py + r + 1e-12));
        for j in y0..y1 {
            let dy = ys[j] - py;
            let row = &mut covered[j * nx..(j + 1) * nx];
            for i in x0..x1 {
                let dx = xs[i] - px;
                if dx * dx + dy * dy <= r2 {
                    row[i] = true;
                }
            }
        }
    }
    let hits = covered.iter().filter(|&&c| c).count();
    Ok(hits as f64 / (nx * ny) as f64)
}

/// Share of alive nodes that ended the election as final heads.
pub fn ch_fraction(outcome: &ElectionOutcome, alive_count: usize) -> Result<f64, MetricsError> {
    if alive_count == 0 {
        return Err(MetricsError::NoAliveNodes);
    }
    match outcome.head_count() {
        0 => Err(MetricsError::NoClusterHeads(alive_count)),
        heads => Ok(heads as f64 / alive_count as f64),
    }
}

/// Element-wise mean across equally long series.
pub fn average_series(series: &[Vec<RoundMetrics>]) -> Result<Vec<AveragedRoundMetrics>, MetricsError> {
    let first = series.first().ok_or(MetricsError::EmptySeriesList)?;
    if let Some(bad) = series.iter().find(|s| s.len() != first.len()) {
        return Err(MetricsError::LengthMismatch(first.len(), bad.len()));
    }
    let k = series.len() as f64;
    let out = (0..first.len())
        .map(|i| {
            let mut acc = AveragedRoundMetrics {
                round: first[i].round,
                ..Default::default()
            };
            for s in series {
                let m = &s[i];
                acc.alive_count += m.alive_count as f64;
                acc.total_residual += m.total_residual;
                acc.coverage_fraction += m.coverage_fraction;
                acc.ch_fraction += m.ch_fraction;
                acc.election_iterations += m.election_iterations as f64;
            }
            acc.alive_count /= k;
            acc.total_residual /= k;
            acc.coverage_fraction /= k;
            acc.ch_fraction /= k;
            acc.election_iterations /= k;
            acc
        })
        .collect();
    Ok(out)
}
