//! CSV series and run manifests.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use crate::config::ScenarioConfig;
use crate::election::Algorithm;
use crate::metrics::{AveragedRoundMetrics, RoundMetrics};

pub const CSV_HEADER: &str = "round,alive_count,total_residual_j,coverage_fraction,ch_fraction,election_iterations";

/// Shortest decimal with 9 significant digits, trailing zeros dropped.
pub fn format_sig(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return if value == 0.0 { "0".into() } else { value.to_string() };
    }
    let exp = value.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{value:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{value:.8e}");
        let (mantissa, exponent) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exponent}")
    }
}

/// A metrics row that can be written as CSV.
pub trait CsvRow {
    fn csv_line(&self) -> String;
}

impl CsvRow for RoundMetrics {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.round,
            self.alive_count,
            format_sig(self.total_residual),
            format_sig(self.coverage_fraction),
            format_sig(self.ch_fraction),
            self.election_iterations
        )
    }
}

impl CsvRow for AveragedRoundMetrics {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.round,
            format_sig(self.alive_count),
            format_sig(self.total_residual),
            format_sig(self.coverage_fraction),
            format_sig(self.ch_fraction),
            format_sig(self.election_iterations)
        )
    }
}

pub fn write_csv<W: Write, R: CsvRow>(mut out: W, rows: &[R]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    out.flush()
}

pub fn write_csv_file<R: CsvRow>(path: &Path, rows: &[R]) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(io::BufWriter::new(file), rows)
}

/// Manifest text: a `[run]` table describing the invocation followed by the
/// fully resolved scenario.
pub fn manifest(
    config: &ScenarioConfig,
    config_path: Option<&Path>,
    out_dir: &Path,
    algorithms: &[Algorithm],
    unix_time: u64,
) -> String {
    let mut s = String::from("[run]\n");
    if let Some(p) = config_path {
        let _ = writeln!(s, "config = {}", toml_str(&p.display().to_string()));
    }
    let _ = writeln!(s, "out_dir = {}", toml_str(&out_dir.display().to_string()));
    let names: Vec<String> = algorithms.iter().map(|a| toml_str(a.name())).collect();
    let _ = writeln!(s, "algorithms = [{}]", names.join(", "));
    let _ = writeln!(s, "created_unix = {unix_time}");
    let _ = writeln!(s, "version = {}", toml_str(env!("CARGO_PKG_VERSION")));
    s.push_str("\n[scenario]\n");
    s.push_str(&scenario_section(config));
    s
}

fn toml_str(v: &str) -> String {
    toml::Value::String(v.to_string()).to_string()
}

// Nest the scenario document under `[scenario]`.
fn scenario_section(config: &ScenarioConfig) -> String {
    let doc: toml::Table = config.to_toml().parse().expect("scenario serializes to valid TOML");
    let mut wrapper = toml::Table::new();
    wrapper.insert("scenario".into(), toml::Value::Table(doc));
    let text = toml::to_string(&wrapper).expect("table serializes");
    // drop the header we already emitted
    text.strip_prefix("[scenario]\n").map(str::to_string).unwrap_or(text)
}
