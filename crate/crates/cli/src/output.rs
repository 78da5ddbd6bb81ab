//! CSV writers. Numbers use 17 significant digits so runs can be compared
//! byte for byte.

use std::path::Path;

use soliton_flow::asymptotics::AsymptoticFit;
use soliton_flow::monitors::MonitorReport;

use crate::CliError;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn io(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Internal(format!("{}: {e}", path.display()))
}

/// Numeric table with a header row.
pub fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(io(path))?;
    for row in rows {
        w.write_record(row.into_iter().map(num)).map_err(io(path))?;
    }
    w.flush().map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

pub fn write_monitors(path: &Path, reports: &[MonitorReport]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["name", "verdict", "worst_margin", "worst_location", "notes"]).map_err(io(path))?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.verdict.to_string(),
            num(r.worst_margin),
            num(r.worst_location),
            r.notes.clone(),
        ])
        .map_err(io(path))?;
    }
    w.flush().map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

pub fn write_fits(path: &Path, fits: &[AsymptoticFit]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "quantity",
        "model_form",
        "fitted_params",
        "window_start",
        "window_end",
        "residual_rms",
        "target",
        "deviation",
        "ok",
    ])
    .map_err(io(path))?;
    for f in fits {
        let params: Vec<String> = f.fitted_params.iter().copied().map(num).collect();
        w.write_record([
            f.quantity.clone(),
            f.model_form.to_string(),
            params.join(";"),
            num(f.window.0),
            num(f.window.1),
            num(f.residual_rms),
            opt(f.target),
            opt(f.deviation),
            f.ok.map(|b| b.to_string()).unwrap_or_default(),
        ])
        .map_err(io(path))?;
    }
    w.flush().map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}
