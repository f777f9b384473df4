use std::io::Write;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Model};
use crate::compound::LossRate;
use crate::error::Result;
use crate::limit::{self, GbarEstimate};
use crate::stochastic::{self, SimSettings};
use crate::{fluid, CompoundParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CellValue {
    pub mean_window: f64,
    pub goodput: f64,
    pub ci_halfwidth: Option<f64>,
    /// Relative error of `mean_window` against the baseline column.
    pub rel_error: Option<f64>,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub model: Model,
    /// `Err` carries the failure reason; other cells are unaffected.
    pub outcome: std::result::Result<CellValue, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub p: f64,
    pub cells: Vec<Cell>,
}

impl ResultRow {
    pub fn get(&self, model: Model) -> Option<&CellValue> {
        self.cells
            .iter()
            .find(|c| c.model == model)
            .and_then(|c| c.outcome.as_ref().ok())
    }

    pub fn all_ok(&self) -> bool {
        self.cells.iter().all(|c| c.outcome.is_ok())
    }
}

fn compute_cell(
    model: Model,
    p: f64,
    config: &ExperimentConfig,
    seed: u64,
    gbar: &std::result::Result<GbarEstimate, String>,
) -> std::result::Result<CellValue, String> {
    let params: &CompoundParams = &config.params;
    let q = LossRate::new(p).map_err(|e| e.to_string())?;
    let cell = |mean_window: f64, ci: Option<f64>, notes: String| CellValue {
        mean_window,
        goodput: stochastic::goodput(mean_window, p, params),
        ci_halfwidth: ci,
        rel_error: None,
        notes,
    };
    match model {
        Model::Fluid => Ok(cell(
            fluid::fluid_avg_window(q, params),
            None,
            String::new(),
        )),
        Model::Sim => {
            let settings = SimSettings {
                n_rounds: config.sim.n_rounds,
                warmup_rounds: config.sim.warmup_rounds(),
                seed,
                stream: 0,
            };
            let est = stochastic::simulate_replicas(q, &settings, config.sim.replicas, params)
                .map_err(|e| e.to_string())?;
            Ok(cell(
                est.mean_window,
                Some(est.ci_halfwidth),
                format!(
                    "replicas={} rounds={} losses={}",
                    config.sim.replicas, est.n_rounds, est.n_losses
                ),
            ))
        }
        Model::Stationary => {
            let dist = stochastic::stationary_auto(q, params).map_err(|e| e.to_string())?;
            Ok(cell(
                dist.mean(),
                None,
                format!(
                    "w_max={} tail_mass={:.3e} iterations={}",
                    dist.w_max,
                    dist.tail_mass(),
                    dist.iterations
                ),
            ))
        }
        Model::Approx => {
            let est = gbar.as_ref().map_err(|e| format!("limit chain: {e}"))?;
            Ok(cell(
                limit::approx_avg_window(q, est.mean_g, params),
                None,
                format!(
                    "mean_g={:.6} coefficient={:.6}",
                    est.mean_g,
                    est.coefficient()
                ),
            ))
        }
    }
}

/// Evaluate every selected model at every loss rate. A failing cell records
/// its reason and does not stop the others.
pub fn run_tables(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let seed = config.effective_seed()?;

    let gbar = if config.models.contains(&Model::Approx) {
        limit::estimate_mean_gbar(
            config.limit.n,
            config.limit.burn_in,
            config.limit.v0,
            seed,
            &config.params,
        )
        .map_err(|e| e.to_string())
    } else {
        Err("not requested".to_string())
    };

    let jobs: Vec<(f64, Model)> = config
        .p_list
        .iter()
        .flat_map(|&p| config.models.iter().map(move |&m| (p, m)))
        .collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(p, model)| Cell {
            model,
            outcome: compute_cell(model, p, config, seed, &gbar),
        })
        .collect();

    let per_row = config.models.len();
    let mut rows: Vec<ResultRow> = config
        .p_list
        .iter()
        .zip(cells.chunks(per_row))
        .map(|(&p, chunk)| ResultRow {
            p,
            cells: chunk.to_vec(),
        })
        .collect();

    if let Some(base) = config.baseline {
        for row in &mut rows {
            let Some(reference) = row.get(base).map(|c| c.mean_window) else {
                continue;
            };
            for cell in &mut row.cells {
                if let Ok(v) = &mut cell.outcome {
                    v.rel_error = Some((v.mean_window - reference) / reference);
                }
            }
        }
    }
    Ok(rows)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV with columns `p,model,mean_window_packets,goodput_pkts_per_sec,ci_halfwidth,notes`.
/// Reference values from the config are appended as extra rows.
pub fn write_tables_csv<W: Write>(
    rows: &[ResultRow],
    config: &ExperimentConfig,
    out: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "p",
        "model",
        "mean_window_packets",
        "goodput_pkts_per_sec",
        "ci_halfwidth",
        "notes",
    ])?;
    for row in rows {
        for cell in &row.cells {
            match &cell.outcome {
                Ok(v) => {
                    let mut notes = v.notes.clone();
                    if let (Some(err), Some(base)) = (v.rel_error, config.baseline) {
                        if !notes.is_empty() {
                            notes.push(' ');
                        }
                        notes.push_str(&format!("rel_err_vs_{}={err:.6}", base.name()));
                    }
                    wtr.write_record([
                        row.p.to_string(),
                        cell.model.name().to_string(),
                        v.mean_window.to_string(),
                        v.goodput.to_string(),
                        fmt_opt(v.ci_halfwidth),
                        notes,
                    ])?;
                }
                Err(reason) => wtr.write_record([
                    row.p.to_string(),
                    cell.model.name().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("failed: {reason}"),
                ])?,
            }
        }
    }
    for r in &config.reference {
        wtr.write_record([
            r.p.to_string(),
            r.label.clone(),
            r.mean_window.to_string(),
            stochastic::goodput(r.mean_window, r.p, &config.params).to_string(),
            String::new(),
            "reference".to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Two aligned markdown tables: mean window, then goodput.
pub fn write_tables_md<W: Write>(
    rows: &[ResultRow],
    config: &ExperimentConfig,
    mut out: W,
) -> Result<()> {
    let reference_label = config.reference.first().map(|r| r.label.clone());
    let mut headers: Vec<String> = vec!["p".into()];
    if let Some(label) = &reference_label {
        headers.push(label.clone());
    }
    headers.extend(config.models.iter().map(|m| m.name().to_string()));

    for (title, goodput) in [
        ("Average window (packets)", false),
        ("Goodput (packets/s)", true),
    ] {
        let mut table: Vec<Vec<String>> = Vec::new();
        for row in rows {
            let mut line = vec![format!("{:e}", row.p)];
            if reference_label.is_some() {
                let r = config.reference.iter().find(|r| r.p == row.p);
                line.push(r.map_or(String::from("-"), |r| {
                    let v = if goodput {
                        stochastic::goodput(r.mean_window, r.p, &config.params)
                    } else {
                        r.mean_window
                    };
                    format!("{v:.2}")
                }));
            }
            for cell in &row.cells {
                line.push(match &cell.outcome {
                    Ok(v) => format!("{:.2}", if goodput { v.goodput } else { v.mean_window }),
                    Err(_) => "failed".into(),
                });
            }
            table.push(line);
        }
        let widths: Vec<usize> = (0..headers.len())
            .map(|i| {
                table
                    .iter()
                    .map(|l| l[i].len())
                    .chain([headers[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let render = |cols: &[String]| {
            let cells: Vec<String> = cols
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}", w = *w))
                .collect();
            format!("| {} |", cells.join(" | "))
        };
        writeln!(out, "### {title}\n")?;
        writeln!(out, "{}", render(&headers))?;
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        writeln!(out, "|-{}-|", rule.join("-|-"))?;
        for line in &table {
            writeln!(out, "{}", render(line))?;
        }
        writeln!(out)?;
    }
    Ok(())
}
