//! Trace CSV: one row per record, fixed header, empty field for absent values.

use std::path::Path;

use dcprox::{IterateRecord, Trace};

use crate::CliError;

pub const HEADER: [&str; 12] = [
    "k",
    "f",
    "d_norm",
    "m_k",
    "eta_k",
    "grad_res",
    "sum_d_sq",
    "energy_lo",
    "energy_hi",
    "lyapunov",
    "coupling_norm",
    "wall_time_s",
];

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub f: f64,
    pub d_norm: f64,
    pub m_k: Option<u32>,
    pub eta_k: Option<f64>,
    pub grad_res: Option<f64>,
    pub sum_d_sq: Option<f64>,
    pub energy_lo: Option<f64>,
    pub energy_hi: Option<f64>,
    pub lyapunov: Option<f64>,
    pub coupling_norm: Option<f64>,
    pub wall_time_s: Option<f64>,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl TraceRow {
    pub fn from_record(r: &IterateRecord, keep_time: bool) -> Self {
        TraceRow {
            k: r.k,
            f: r.f_x,
            d_norm: r.d_norm,
            m_k: r.m_k,
            eta_k: r.eta_k,
            grad_res: r.grad_residual,
            sum_d_sq: r.sum_d_sq,
            energy_lo: r.energy.first().copied(),
            energy_hi: r.energy.last().copied(),
            lyapunov: r.lyapunov,
            coupling_norm: r.coupling_norm,
            wall_time_s: if keep_time { r.wall_time_s } else { None },
        }
    }

    fn fields(&self) -> [String; 12] {
        [
            self.k.to_string(),
            fmt_f64(self.f),
            fmt_f64(self.d_norm),
            self.m_k.map(|m| m.to_string()).unwrap_or_default(),
            opt(self.eta_k),
            opt(self.grad_res),
            opt(self.sum_d_sq),
            opt(self.energy_lo),
            opt(self.energy_hi),
            opt(self.lyapunov),
            opt(self.coupling_norm),
            opt(self.wall_time_s),
        ]
    }
}

pub fn to_csv_bytes(trace: &Trace, keep_time: bool) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).map_err(io_err)?;
    for r in &trace.records {
        w.write_record(TraceRow::from_record(r, keep_time).fields()).map_err(io_err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn io_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn malformed(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::MalformedTrace(format!("line {line}: {msg}"))
}

fn parse_opt<T: std::str::FromStr>(s: &str, line: usize, col: &str) -> Result<Option<T>, CliError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| malformed(line, format!("bad {col} value {s:?}")))
}

fn parse_req<T: std::str::FromStr>(s: &str, line: usize, col: &str) -> Result<T, CliError> {
    parse_opt(s, line, col)?.ok_or_else(|| malformed(line, format!("missing {col}")))
}

pub fn parse_csv(bytes: &[u8]) -> Result<Vec<TraceRow>, CliError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = rd.headers().map_err(|e| malformed(1, e))?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(malformed(1, "header does not match the trace format"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| malformed(line, e))?;
        if rec.len() != HEADER.len() {
            return Err(malformed(line, format!("expected {} fields, got {}", HEADER.len(), rec.len())));
        }
        let row = TraceRow {
            k: parse_req(&rec[0], line, "k")?,
            f: parse_req(&rec[1], line, "f")?,
            d_norm: parse_req(&rec[2], line, "d_norm")?,
            m_k: parse_opt(&rec[3], line, "m_k")?,
            eta_k: parse_opt(&rec[4], line, "eta_k")?,
            grad_res: parse_opt(&rec[5], line, "grad_res")?,
            sum_d_sq: parse_opt(&rec[6], line, "sum_d_sq")?,
            energy_lo: parse_opt(&rec[7], line, "energy_lo")?,
            energy_hi: parse_opt(&rec[8], line, "energy_hi")?,
            lyapunov: parse_opt(&rec[9], line, "lyapunov")?,
            coupling_norm: parse_opt(&rec[10], line, "coupling_norm")?,
            wall_time_s: parse_opt(&rec[11], line, "wall_time_s")?,
        };
        if row.k != rows.len() {
            return Err(malformed(line, format!("expected k = {}, got {}", rows.len(), row.k)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::MalformedTrace("trace has no rows".into()));
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<TraceRow>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::MalformedTrace(format!("{}: {e}", path.display())))?;
    parse_csv(&bytes)
}

/// A value-only trace for the rate diagnostics.
pub fn rows_to_trace(label: &str, rows: &[TraceRow]) -> Trace {
    let mut t = Trace::from_values(label, &rows.iter().map(|r| r.f).collect::<Vec<_>>());
    for (rec, row) in t.records.iter_mut().zip(rows) {
        rec.d_norm = row.d_norm;
        rec.grad_residual = row.grad_res;
        rec.sum_d_sq = row.sum_d_sq;
    }
    t
}
