//! Time-series CSV with the frozen column order of [`CSV_COLUMNS`].

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::diagnostics::{DiagnosticsRow, TimeSeries, CSV_COLUMNS};
use crate::dynamics::{Observer, SimState};
use crate::error::Result;

pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    /// Writes the header immediately.
    pub fn new(inner: W) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(inner);
        writer.write_record(CSV_COLUMNS)?;
        Ok(Self { writer })
    }

    pub fn write_row(&mut self, row: &DiagnosticsRow) -> Result<()> {
        self.writer.serialize(row)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer.into_inner().map_err(|e| e.into_error().into())
    }
}

impl CsvSink<File> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(File::create(path)?)
    }
}

impl<W: Write> Observer for CsvSink<W> {
    fn on_row(&mut self, row: &DiagnosticsRow) -> Result<()> {
        self.write_row(row)
    }
}

pub fn write_time_series<W: Write>(series: &TimeSeries, inner: W) -> Result<()> {
    let mut sink = CsvSink::new(inner)?;
    for row in &series.rows {
        sink.write_row(row)?;
    }
    sink.flush()
}

/// Reads a CSV written by [`CsvSink`], rejecting any other header.
pub fn read_time_series<R: Read>(inner: R) -> Result<TimeSeries> {
    let mut reader = csv::Reader::from_reader(inner);
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(crate::error::Error::Trajectory(format!(
            "unexpected CSV header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<DiagnosticsRow>, _>>()?;
    Ok(TimeSeries { rows })
}

/// Forwards every event to both observers.
pub struct Tee<'a, A: Observer, B: Observer> {
    pub first: &'a mut A,
    pub second: &'a mut B,
}

impl<A: Observer, B: Observer> Observer for Tee<'_, A, B> {
    fn on_row(&mut self, row: &DiagnosticsRow) -> Result<()> {
        self.first.on_row(row)?;
        self.second.on_row(row)
    }

    fn on_snapshot(&mut self, state: &SimState) -> Result<()> {
        self.first.on_snapshot(state)?;
        self.second.on_snapshot(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN_HEADER: &str = "t,mass,energy,energy_alt,dissipation_accum,energy_residual,min_phi,max_phi,delta_sep,mu_linf,inner_iters,dt_used\n";

    fn row(t: f64) -> DiagnosticsRow {
        DiagnosticsRow {
            t,
            mass: 1e-17,
            energy: -0.123456789012345,
            energy_alt: -0.12345678901234501,
            dissipation_accum: 3.0e-5,
            energy_residual: -2.5e-18,
            min_phi: -0.7,
            max_phi: 0.71,
            delta_sep: 0.29,
            mu_linf: 1.25,
            inner_iters: 17,
            dt_used: 1e-3,
        }
    }

    #[test]
    fn golden_header() {
        let out = CsvSink::new(Vec::new()).unwrap().into_inner().unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), GOLDEN_HEADER);
    }

    #[test]
    fn rows_round_trip_exactly() {
        let series = TimeSeries {
            rows: vec![row(0.0), row(0.1 + 0.2)],
        };
        let mut buf = Vec::new();
        write_time_series(&series, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(GOLDEN_HEADER));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(read_time_series(buf.as_slice()).unwrap(), series);
    }

    #[test]
    fn foreign_header_rejected() {
        assert!(read_time_series("a,b\n1,2\n".as_bytes()).is_err());
    }
}
