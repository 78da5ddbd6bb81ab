//! `critical-points` subcommand.

use std::path::Path;

use soliton_flow::phase::{critical_points_with_shell_samples, residual_norm};
use soliton_flow::OrbitModel;

use crate::config::RunConfig;
use crate::output::num;
use crate::CliError;

/// A preset name, or `key=value` pairs separated by `;` using the `model.*`
/// config keys without their prefix, e.g. `dims=1,2;lambdas=0,1`.
pub fn parse_model(spec: &str) -> Result<OrbitModel, CliError> {
    if !spec.contains('=') {
        return OrbitModel::preset(spec).ok_or_else(|| CliError::Config(format!("unknown preset `{spec}`")));
    }
    let text: String = spec.split(';').filter(|s| !s.trim().is_empty()).map(|kv| format!("model.{}\n", kv.trim())).collect();
    Ok(RunConfig::parse(&text, None)?.model)
}

pub fn write(model: &OrbitModel, shell_samples: usize, seed: u64, out: &Path) -> Result<usize, CliError> {
    let points = critical_points_with_shell_samples(model, shell_samples, seed).map_err(|e| match e {
        soliton_flow::Error::ModelMismatch(m) => CliError::Validation(m),
        other => CliError::Internal(other.to_string()),
    })?;
    let r = model.factor_count();
    let mut header = vec!["family".to_string()];
    header.extend((1..=r).map(|i| format!("X{i}")));
    header.extend((1..=r).map(|i| format!("Y{i}")));
    header.extend(["W", "residual", "eigenvalues"].map(String::from));

    let io = |e: csv::Error| CliError::Internal(format!("{}: {e}", out.display()));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(out).map_err(io)?;
    w.write_record(&header).map_err(io)?;
    for p in &points {
        let mut row = vec![p.family.tag()];
        row.extend(p.coords.to_vector().into_iter().map(num));
        let res = residual_norm(&p.coords, model).map_err(|e| CliError::Internal(e.to_string()))?;
        row.push(num(res));
        let ev: Vec<String> = p
            .eigenvalues
            .iter()
            .flatten()
            .map(|z| format!("{}{:+.16e}i", num(z.re), z.im))
            .collect();
        row.push(ev.join(";"));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(points.len())
}
