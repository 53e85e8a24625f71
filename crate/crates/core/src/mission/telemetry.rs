use serde::Serialize;
use std::io::Write;

use super::MissionError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TelemetryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub yaw: f64,
    pub active_task: String,
    /// Events raised by the agent at this row, `;`-separated.
    pub events: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRow {
    pub t: f64,
    pub source: String,
    pub agent: Option<usize>,
    pub event: String,
    pub detail: String,
}

/// Samples from a single-behaviour run: the distance it is about (camera to
/// ball, or between the pair), the ball's bearing off the nose and the velocity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub distance_m: f64,
    pub yaw_offset_deg: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

/// Column names, so an empty file still gets its header.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

impl CsvRow for TelemetryRow {
    const HEADER: &'static [&'static str] = &["t", "x", "y", "z", "vx", "vy", "vz", "yaw", "active_task", "events"];
}

impl CsvRow for EventRow {
    const HEADER: &'static [&'static str] = &["t", "source", "agent", "event", "detail"];
}

impl CsvRow for TraceRow {
    const HEADER: &'static [&'static str] = &["t", "distance_m", "yaw_offset_deg", "vx", "vy", "vz"];
}

pub fn write_csv<W: Write, T: CsvRow>(w: W, rows: &[T]) -> Result<(), MissionError> {
    let mut wr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wr.write_record(T::HEADER)?;
    }
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub(crate) fn csv_bytes<T: CsvRow>(rows: &[T]) -> Result<Vec<u8>, MissionError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(buf)
}
