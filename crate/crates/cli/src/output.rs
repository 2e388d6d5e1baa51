//! Result rendering with a provenance header.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{Format, ScenarioConfig, Tolerances};
use crate::error::CliError;
use crate::exec::{Outcome, TransferRow, TRANSFER_COLUMNS};

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub kind: &'static str,
    /// SHA-256 of the raw config bytes.
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    /// Seconds since the Unix epoch; the only field that varies between reruns.
    pub generated_at_unix: u64,
}

impl Provenance {
    pub fn new(raw_config: &[u8], cfg: &ScenarioConfig) -> Self {
        let digest = Sha256::digest(raw_config);
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        let tolerances = match cfg {
            ScenarioConfig::Transfer(c) => Some(c.tolerances.clone()),
            ScenarioConfig::Sweep(c) => Some(c.tolerances.clone()),
            _ => None,
        };
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            core_version: cascade_core::VERSION,
            kind: cfg.kind(),
            config_sha256,
            tolerances,
            generated_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

pub fn render(outcome: &Outcome, prov: &Provenance, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => render_json(outcome, prov),
        Format::Csv => render_csv(outcome, prov),
    }
}

fn render_json(outcome: &Outcome, prov: &Provenance) -> Result<String, CliError> {
    let result = match outcome {
        Outcome::Transfer { report, .. } => serde_json::to_value(report)?,
        Outcome::Protocol(r) => serde_json::to_value(r)?,
        Outcome::Validity(r) => serde_json::to_value(r)?,
        Outcome::Sweep(rows) => serde_json::to_value(rows)?,
    };
    let mut text = serde_json::to_string_pretty(&json!({ "provenance": prov, "result": result }))?;
    text.push('\n');
    Ok(text)
}

fn header_lines(prov: &Provenance) -> Result<String, CliError> {
    let mut s = format!(
        "# {} {} (core {})\n# kind: {}\n# config_sha256: {}\n",
        prov.tool, prov.version, prov.core_version, prov.kind, prov.config_sha256
    );
    if let Some(t) = &prov.tolerances {
        s.push_str(&format!("# tolerances: {}\n", serde_json::to_string(t)?));
    }
    s.push_str(&format!("# generated_at_unix: {}\n", prov.generated_at_unix));
    Ok(s)
}

fn table<R: Serialize>(columns: &[&str], rows: &[R]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(columns)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

#[derive(Serialize)]
struct StepRow<'a> {
    index: usize,
    operation: &'a str,
    parameters: String,
    post_norm: f64,
    p_up: Option<f64>,
    p_down: Option<f64>,
    terms: usize,
}

#[derive(Serialize)]
struct CheckRow<'a> {
    name: &'a str,
    lhs: f64,
    rhs: f64,
    ratio: f64,
    direction: String,
    pass_threshold: f64,
    marginal_threshold: f64,
    verdict: String,
}

fn render_csv(outcome: &Outcome, prov: &Provenance) -> Result<String, CliError> {
    let mut out = header_lines(prov)?;
    let body = match outcome {
        Outcome::Transfer { row, .. } => table(&TRANSFER_COLUMNS, std::slice::from_ref::<TransferRow>(row))?,
        Outcome::Sweep(rows) => table(&TRANSFER_COLUMNS, rows)?,
        Outcome::Protocol(r) => {
            out.push_str(&format!("# success_probability: {}\n", r.success_probability));
            if let Some(o) = r.target_overlap {
                out.push_str(&format!("# target_overlap: {o}\n"));
            }
            let rows: Vec<StepRow> = r
                .steps
                .iter()
                .enumerate()
                .map(|(i, s)| StepRow {
                    index: i,
                    operation: &s.operation,
                    parameters: s
                        .parameters
                        .iter()
                        .map(|(k, v)| format!("{k}={v}"))
                        .collect::<Vec<_>>()
                        .join(";"),
                    post_norm: s.post_norm,
                    p_up: s.branch_probabilities.map(|b| b.up),
                    p_down: s.branch_probabilities.map(|b| b.down),
                    terms: s.state.terms().len(),
                })
                .collect();
            table(
                &["index", "operation", "parameters", "post_norm", "p_up", "p_down", "terms"],
                &rows,
            )?
        }
        Outcome::Validity(r) => {
            out.push_str(&format!("# overall: {}\n", r.overall));
            let rows: Vec<CheckRow> = r
                .entries
                .iter()
                .map(|e| CheckRow {
                    name: &e.name,
                    lhs: e.lhs,
                    rhs: e.rhs,
                    ratio: e.ratio,
                    direction: serde_json::to_value(e.direction)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                    pass_threshold: e.pass_threshold,
                    marginal_threshold: e.marginal_threshold,
                    verdict: e.verdict.to_string(),
                })
                .collect();
            table(
                &["name", "lhs", "rhs", "ratio", "direction", "pass_threshold", "marginal_threshold", "verdict"],
                &rows,
            )?
        }
    };
    out.push_str(&body);
    Ok(out)
}
