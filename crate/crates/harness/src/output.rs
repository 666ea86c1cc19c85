use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::config::OutputFormat;
use crate::experiment::TrialRecord;
use crate::HarnessError;

pub const CSV_HEADER: &str = "trial,seed,K,M,pattern,snr_db,method,value,iterations,converged,runtime_ms";

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

/// Writes records to `path`. Both formats use the same field names.
pub fn emit_results(records: &[TrialRecord], path: &Path, format: OutputFormat) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Config("no records to write".into()));
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        OutputFormat::Csv => write_csv(records, &mut out).map_err(|e| io_err(path, e))?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, records).map_err(|e| io_err(path, e))?;
            out.write_all(b"\n").map_err(|e| io_err(path, e))?;
        }
    }
    out.flush().map_err(|e| io_err(path, e))
}

pub fn read_results(path: &Path, format: OutputFormat) -> Result<Vec<TrialRecord>, HarnessError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    match format {
        OutputFormat::Csv => csv::Reader::from_reader(BufReader::new(file))
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| io_err(path, e)),
        OutputFormat::Json => serde_json::from_reader(BufReader::new(file)).map_err(|e| io_err(path, e)),
    }
}
