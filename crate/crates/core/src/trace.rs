//! Line-delimited JSON traces: a header line, then one record per timestep.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engines::{EngineKind, StepReport, Verdicts};
use crate::market::{HistoryError, MarketShape, MatchHistory, Mode, Pair};
use crate::rational::{serde_pq_opt, Rational};

pub const TRACE_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read or write trace: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace has no header line")]
    MissingHeader,
    #[error("unsupported trace format {0} (expected {TRACE_FORMAT})")]
    Format(u32),
    #[error("trace record {index} has t = {got}, expected {expected}")]
    OutOfOrder { index: usize, expected: u64, got: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: u32,
    pub engine: EngineKind,
    pub mode: Mode,
    #[serde(with = "serde_pq_opt", default)]
    pub a: Option<Rational>,
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    /// `[n_index, m_index]` pairs.
    pub matches: Vec<[usize; 2]>,
    #[serde(with = "serde_pq_opt", default)]
    pub weight: Option<Rational>,
    pub iterations: usize,
    pub verdicts: Verdicts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_envy_free: Option<bool>,
}

impl From<&StepReport> for TraceRecord {
    fn from(r: &StepReport) -> Self {
        TraceRecord {
            t: r.t,
            matches: r.events.iter().map(|p| [p.n, p.m]).collect(),
            weight: r.weight,
            iterations: r.iterations,
            verdicts: r.verdicts,
            stage_envy_free: r.stage_envy_free,
        }
    }
}

impl TraceRecord {
    pub fn pairs(&self) -> Vec<Pair> {
        self.matches.iter().map(|&[n, m]| Pair::new(n, m)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(engine: EngineKind, shape: MarketShape, a: Option<Rational>) -> Self {
        Trace {
            header: TraceHeader {
                format: TRACE_FORMAT,
                engine,
                mode: engine.mode(),
                a,
                n: shape.n,
                m: shape.m,
            },
            records: Vec::new(),
        }
    }

    pub fn from_reports(engine: EngineKind, shape: MarketShape, a: Option<Rational>, reports: &[StepReport]) -> Self {
        let mut trace = Trace::new(engine, shape, a);
        trace.records = reports.iter().map(TraceRecord::from).collect();
        trace
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(TraceError::MissingHeader)?;
        let header: TraceHeader = serde_json::from_str(header).map_err(|source| TraceError::Json {
            line: hline + 1,
            source,
        })?;
        if header.format != TRACE_FORMAT {
            return Err(TraceError::Format(header.format));
        }
        let mut records = Vec::new();
        for (k, line) in lines {
            let record: TraceRecord =
                serde_json::from_str(line).map_err(|source| TraceError::Json { line: k + 1, source })?;
            let expected = records.len() as u64 + 1;
            if record.t != expected {
                return Err(TraceError::OutOfOrder {
                    index: records.len(),
                    expected,
                    got: record.t,
                });
            }
            records.push(record);
        }
        Ok(Trace { header, records })
    }

    pub fn read(path: &Path) -> Result<Self, TraceError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), TraceError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    /// The confirmed matches as a history in `mode`.
    pub fn history(&self, shape: MarketShape, mode: Mode) -> Result<MatchHistory, HistoryError> {
        let mut h = MatchHistory::new(shape, mode);
        for r in &self.records {
            h.push(r.t, r.pairs())?;
        }
        Ok(h)
    }
}
