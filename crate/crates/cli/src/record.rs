//! Self-describing result records and their export.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use charsum_core::charsums::GaussTableExport;
use charsum_core::equidist::{write_scan_csv, write_scan_tsv, ScanResult};
use charsum_core::moments::{MomentDecomposition, MomentRecord};
use serde::{Deserialize, Serialize};

use crate::suites::{BilinearRow, GaussRow, HypergeomSummary, IdentityRow, MomentRow};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    FieldInfo,
    Gauss,
    Verify,
    Moment,
    Bilinear,
    Equidist,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: Command,
    /// Every input that affects the payload, seed included. The worker
    /// count and cache directory are left out since they cannot.
    pub params: BTreeMap<String, serde_json::Value>,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
}

impl ExperimentManifest {
    pub fn start(command: Command, params: BTreeMap<String, serde_json::Value>) -> Self {
        let now = timestamp();
        Self {
            command,
            params,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: now.clone(),
            finished: now,
        }
    }

    pub fn finish(&mut self) {
        self.finished = timestamp();
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// One named comparison of a measured value against its threshold.
/// Findings are recorded but do not affect the exit status.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub finding: bool,
}

impl Check {
    /// `measured ≤ threshold`.
    pub fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            pass: measured <= threshold,
            measured,
            threshold,
            finding: false,
        }
    }

    /// A violation count that must be zero.
    pub fn none(name: &str, violations: usize) -> Self {
        Self::at_most(name, violations as f64, 0.0)
    }

    pub fn as_finding(mut self) -> Self {
        self.finding = true;
        self
    }

    pub fn is_failure(&self) -> bool {
        !self.pass && !self.finding
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldInfo {
    pub p: u64,
    pub n: u32,
    pub q: u64,
    pub modulus: Option<Vec<u64>>,
    pub generator: u32,
    pub quadratic_char: Option<u32>,
    /// `Tr(g^k)` for `k < min(q-1, 16)`.
    pub generator_power_traces: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BilinearReport {
    pub q: u64,
    pub x: Vec<u32>,
    pub y: Vec<u32>,
    pub kappa: u32,
    pub s: u32,
    pub value: [f64; 2],
    pub abs: f64,
    pub bound: f64,
    pub ratio: f64,
    pub holder_ln_lhs: f64,
    pub holder_ln_rhs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    FieldInfo(FieldInfo),
    Gauss(GaussTableExport),
    Identities {
        rows: Vec<IdentityRow>,
        gauss: Vec<GaussRow>,
    },
    Hypergeom(HypergeomSummary),
    Moments {
        rows: Vec<MomentRow>,
    },
    BilinearScan {
        rows: Vec<BilinearRow>,
    },
    Moment {
        record: MomentRecord,
        decomposition: MomentDecomposition,
    },
    Bilinear(BilinearReport),
    Scan(ScanResult),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRecord {
    pub manifest: ExperimentManifest,
    pub payload: Payload,
    pub checks: Vec<Check>,
}

impl ResultRecord {
    pub fn passed(&self) -> bool {
        !self.checks.iter().any(Check::is_failure)
    }

    /// The payload and checks as JSON, i.e. everything but the manifest.
    pub fn payload_json(&self) -> String {
        serde_json::to_string(&(&self.payload, &self.checks)).expect("records serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    /// Scan payloads only. A tab-separated `ln q, ln d_star` file is written
    /// next to the CSV with extension `.tsv`.
    Csv,
}

pub fn export_results(record: &ResultRecord, format: ExportFormat, path: &Path) -> Result<(), CliError> {
    match format {
        ExportFormat::Json => {
            let mut out = BufWriter::new(File::create(path)?);
            serde_json::to_writer_pretty(&mut out, record)?;
            writeln!(out)?;
            out.flush()?;
        }
        ExportFormat::Csv => {
            let Payload::Scan(scan) = &record.payload else {
                return Err(CliError::Usage("CSV export needs an equidist scan".into()));
            };
            let mut out = BufWriter::new(File::create(path)?);
            write_scan_csv(scan, &mut out)?;
            out.flush()?;
            let mut tsv = BufWriter::new(File::create(path.with_extension("tsv"))?);
            write_scan_tsv(scan, &mut tsv)?;
            tsv.flush()?;
        }
    }
    Ok(())
}
