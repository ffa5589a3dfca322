use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sir_core::{LatencySummary, Timestamp};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no requests recorded for `{endpoint}` in the window")]
    NoData { endpoint: String },
    #[error("request log i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One served request. `latency` is seconds spent inside the handler, from
/// parameter parsing to the serialized body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestLogRecord {
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    pub latency: f64,
    pub ts: Timestamp,
    pub status: u16,
}

#[derive(Debug, Default)]
pub struct RequestLog {
    records: Vec<RequestLogRecord>,
    sink: Option<File>,
}

impl RequestLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Appends to `path`; earlier records in the file are not loaded.
    pub fn to_file(path: impl AsRef<Path>) -> Result<Self, StatsError> {
        let sink = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            records: Vec::new(),
            sink: Some(sink),
        })
    }

    pub fn push(&mut self, record: RequestLogRecord) {
        if let Some(sink) = &mut self.sink {
            let line = serde_json::to_string(&record).expect("records serialize");
            // losing a latency sample is not worth failing the request
            let _ = writeln!(sink, "{line}");
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[RequestLogRecord] {
        &self.records
    }

    /// Latency statistics for successful requests to `endpoint` with
    /// `after <= ts <= until`.
    pub fn latency_summary(
        &self,
        endpoint: &str,
        window: Option<(Timestamp, Timestamp)>,
    ) -> Result<LatencySummary, StatsError> {
        let samples: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.endpoint == endpoint && r.status < 400)
            .filter(|r| window.is_none_or(|(after, until)| r.ts >= after && r.ts <= until))
            .map(|r| r.latency)
            .collect();
        LatencySummary::from_samples(&samples).ok_or_else(|| StatsError::NoData {
            endpoint: endpoint.to_string(),
        })
    }
}
