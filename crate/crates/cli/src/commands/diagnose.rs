use std::io::Write;
use std::path::Path;

use serde::Serialize;

use otinfer_core::data::load_chain;
use otinfer_core::mcmc::{component_labels, posterior_summary, ChainOutput};

use crate::args::DiagnoseArgs;
use crate::error::CliError;
use crate::manifest::ManifestBuilder;

use super::{load_latent_state, save_json};

pub fn run(args: DiagnoseArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("diagnose");
    manifest.input(&args.chain)?;
    let (output, config) = load_chain(&args.chain)?;
    if output.samples.is_empty() {
        return Err(CliError::data(format!(
            "chain {} holds no retained samples",
            args.chain.display()
        )));
    }

    let first = &output.samples[0];
    let dims = (first.u.len(), first.v.len(), first.theta.len());
    let labels = component_labels(dims.0, dims.1, dims.2);
    let selected = select_components(args.components.as_deref(), &labels, dims)?;

    let dir = args.out.resolve_dir();
    std::fs::create_dir_all(&dir)?;
    let name = match &args.out.name {
        Some(name) => name.clone(),
        None => args
            .chain
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "chain".into()),
    };

    let running_path = dir.join(format!("{name}.running_means.csv"));
    write_running_means(&running_path, &output, &labels, &selected)?;

    let summaries = posterior_summary(&output, args.bins.max(1))?;
    let hist_path = dir.join(format!("{name}.histograms.json"));
    let picked: Vec<_> = selected.iter().map(|&c| summaries[c].clone()).collect();
    save_json(&hist_path, &picked)?;

    let accept_path = dir.join(format!("{name}.acceptance.json"));
    save_json(
        &accept_path,
        &serde_json::json!({
            "accept": output.accept,
            "rates": {
                "overall": output.accept.overall_rate(),
                "u": output.accept.u.rate(),
                "v": output.accept.v.rate(),
                "theta": output.accept.theta.rate(),
            },
            "in_box_rates": {
                "overall": output.accept.overall_metropolis_rate(),
                "u": output.accept.u.metropolis_rate(),
                "v": output.accept.v.metropolis_rate(),
                "theta": output.accept.theta.metropolis_rate(),
            },
            "solver_failures": output.solver_failures,
            "config": config,
        }),
    )?;

    let misfit_path = dir.join(format!("{name}.misfit.csv"));
    write_misfit(&misfit_path, &output)?;

    manifest
        .output(&running_path)
        .output(&hist_path)
        .output(&accept_path)
        .output(&misfit_path);

    let mut written = vec![
        running_path.clone(),
        hist_path.clone(),
        accept_path.clone(),
        misfit_path.clone(),
    ];

    if let Some(truth_path) = &args.truth {
        manifest.input(truth_path)?;
        let truth = load_latent_state(truth_path)?;
        let truth_components = truth.normalized_components()?;
        if truth_components.len() != labels.len() {
            return Err(CliError::data(format!(
                "truth state has {} normalized components, chain has {}",
                truth_components.len(),
                labels.len()
            )));
        }
        let coverage_path = dir.join(format!("{name}.coverage.json"));
        write_coverage(&coverage_path, &summaries, &truth_components)?;
        manifest.output(&coverage_path);
        written.push(coverage_path);
    }

    let manifest_path = dir.join(format!("{name}.diagnose.manifest.json"));
    manifest.write(&manifest_path)?;
    written.push(manifest_path);
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Parse `u0,v3,theta2`-style component lists; default is the first three
/// components of each block.
fn select_components(
    requested: Option<&str>,
    labels: &[String],
    dims: (usize, usize, usize),
) -> Result<Vec<usize>, CliError> {
    match requested {
        None => {
            let (n_u, n_v, n_theta) = dims;
            let mut picked = Vec::new();
            picked.extend(0..n_u.min(3));
            picked.extend((0..n_v.min(3)).map(|i| n_u + i));
            picked.extend((0..n_theta.min(3)).map(|i| n_u + n_v + i));
            Ok(picked)
        }
        Some(requested) => {
            let mut picked = Vec::new();
            for token in requested.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let idx = labels.iter().position(|l| l == token).ok_or_else(|| {
                    CliError::usage(format!(
                        "unknown component {token:?}; valid labels are u0..u{}, v0..v{}, theta0..theta{}",
                        dims.0 - 1,
                        dims.1 - 1,
                        dims.2.saturating_sub(1),
                    ))
                })?;
                picked.push(idx);
            }
            if picked.is_empty() {
                return Err(CliError::usage("--components selected nothing"));
            }
            Ok(picked)
        }
    }
}

fn write_running_means(
    path: &Path,
    output: &ChainOutput,
    labels: &[String],
    selected: &[usize],
) -> Result<(), CliError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<&str> = selected.iter().map(|&c| labels[c].as_str()).collect();
    writeln!(file, "sample,{}", header.join(","))
        .map_err(|e| CliError::data(format!("write {}: {e}", path.display())))?;
    for (row_idx, row) in output.running_means.iter().enumerate() {
        let values: Vec<String> = selected.iter().map(|&c| format!("{:?}", row[c])).collect();
        writeln!(file, "{row_idx},{}", values.join(","))
            .map_err(|e| CliError::data(format!("write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn write_misfit(path: &Path, output: &ChainOutput) -> Result<(), CliError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "iteration,misfit")
        .map_err(|e| CliError::data(format!("write {}: {e}", path.display())))?;
    for (iteration, phi) in output.misfit_trace.iter().enumerate() {
        writeln!(file, "{},{phi:?}", iteration + 1)
            .map_err(|e| CliError::data(format!("write {}: {e}", path.display())))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CoverageRow {
    label: String,
    truth: f64,
    lower: f64,
    upper: f64,
    covered: bool,
}

fn write_coverage(
    path: &Path,
    summaries: &[otinfer_core::mcmc::ComponentSummary],
    truth_components: &[f64],
) -> Result<(), CliError> {
    let rows: Vec<CoverageRow> = summaries
        .iter()
        .zip(truth_components)
        .map(|(s, &t)| CoverageRow {
            label: s.label.clone(),
            truth: t,
            lower: s.quantiles.q025,
            upper: s.quantiles.q975,
            covered: s.quantiles.q025 <= t && t <= s.quantiles.q975,
        })
        .collect();
    let covered = rows.iter().filter(|r| r.covered).count();
    save_json(
        path,
        &serde_json::json!({
            "components": rows,
            "covered": covered,
            "total": rows.len(),
            "covered_fraction": covered as f64 / rows.len() as f64,
        }),
    )
}
