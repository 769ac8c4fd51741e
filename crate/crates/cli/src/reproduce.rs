//! Figure recipes: compositions of experiments whose artifacts land in one
//! directory with a `summary.json` of headline scalars.

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiments::{bell_report, cooling_run, execute, record, retherm_run, transfer_report, Experiment, Scalars};
use crate::ledger::LedgerEntry;
use crate::output::Artifacts;
use hotlink_core::tomography::TomographySettings;
use hotlink_core::units::{NS, US};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2b,
    Fig3c,
    Fig3d,
    Fig4b,
    Fig4f,
    FigS3bd,
    FigS8,
    FigS10,
    FigS11,
}

impl Figure {
    pub const ALL: [Figure; 9] = [
        Figure::Fig2b,
        Figure::Fig3c,
        Figure::Fig3d,
        Figure::Fig4b,
        Figure::Fig4f,
        Figure::FigS3bd,
        Figure::FigS8,
        Figure::FigS10,
        Figure::FigS11,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2b => "fig2b",
            Figure::Fig3c => "fig3c",
            Figure::Fig3d => "fig3d",
            Figure::Fig4b => "fig4b",
            Figure::Fig4f => "fig4f",
            Figure::FigS3bd => "figS3bd",
            Figure::FigS8 => "figS8",
            Figure::FigS10 => "figS10",
            Figure::FigS11 => "figS11",
        }
    }
}

impl FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Figure::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let names: Vec<_> = Figure::ALL.iter().map(|f| f.name()).collect();
            CliError::Usage(format!("unknown figure `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

fn single(exp: Experiment, cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    execute(exp, cfg, arts)
}

fn merged(parts: &[(&str, Scalars)]) -> Scalars {
    parts
        .iter()
        .flat_map(|(prefix, s)| s.iter().map(move |(k, v)| (format!("{prefix}.{k}"), *v)))
        .collect()
}

fn at(cfg: &ExperimentConfig, t_hot: f64) -> ExperimentConfig {
    ExperimentConfig {
        t_hot_k: t_hot,
        ..cfg.clone()
    }
}

/// Cooling and rethermalization time constants at every ladder temperature.
fn fig_s8(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    let mut rows = Vec::new();
    let mut scalars = Scalars::new();
    for row in &cfg.ladder {
        let c = at(cfg, row.t_hot_k);
        let (_, _, cool) = cooling_run(&c)?;
        let re = retherm_run(&c)?;
        let r = vec![row.t_hot_k, cool.tau() / NS, re.fit_alone.tau() / US, re.fit_coupled.tau() / US];
        scalars.insert(format!("tau_cool_ns@{}K", row.t_hot_k), r[1]);
        scalars.insert(format!("tau_alone_us@{}K", row.t_hot_k), r[2]);
        scalars.insert(format!("tau_coupled_us@{}K", row.t_hot_k), r[3]);
        rows.push(r);
    }
    arts.csv("time_constants.csv", &["t_hot_K", "tau_cool_ns", "tau_alone_us", "tau_coupled_us"], rows)?;
    Ok(scalars)
}

/// Process and Bell fidelities at every ladder temperature.
fn fig_s11(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    let settings = TomographySettings {
        confusion: cfg.confusion()?,
    };
    let mut rows = Vec::new();
    let mut scalars = Scalars::new();
    for row in &cfg.ladder {
        let c = at(cfg, row.t_hot_k);
        let model = c.system_model(row);
        let chi = transfer_report(&model, &settings)?;
        let bell = bell_report(&c, &model, &settings)?;
        scalars.insert(format!("process_fidelity@{}K", row.t_hot_k), chi.fidelity);
        scalars.insert(format!("bell_fidelity@{}K", row.t_hot_k), bell.fidelity);
        arts.json(&format!("chi_{}K.json", row.t_hot_k), &chi.chi)?;
        arts.json(&format!("rho_{}K.json", row.t_hot_k), &bell.rho)?;
        rows.push(vec![row.t_hot_k, chi.fidelity, bell.fidelity]);
    }
    arts.csv("fidelities.csv", &["t_hot_K", "process_fidelity", "bell_fidelity"], rows)?;
    Ok(scalars)
}

pub fn build(fig: Figure, cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Scalars, CliError> {
    match fig {
        Figure::Fig2b => single(Experiment::KappaSweep, cfg, arts),
        Figure::Fig3c => single(Experiment::Cooling, cfg, arts),
        Figure::Fig3d => single(Experiment::Retherm, cfg, arts),
        Figure::Fig4b => single(Experiment::Transfer, cfg, arts),
        Figure::Fig4f => single(Experiment::Bell, cfg, arts),
        Figure::FigS3bd => {
            let sweep = execute(Experiment::KappaSweep, cfg, arts)?;
            let modes = execute(Experiment::Modes, cfg, arts)?;
            Ok(merged(&[("sweep", sweep), ("modes", modes)]))
        }
        Figure::FigS8 => fig_s8(cfg, arts),
        Figure::FigS10 => single(Experiment::SteadyScan, cfg, arts),
        Figure::FigS11 => fig_s11(cfg, arts),
    }
}

/// Writes the bundle for `fig` under `out/<fig>/` and records it.
pub fn reproduce_figure(fig: Figure, cfg: &ExperimentConfig, out: &Path) -> Result<LedgerEntry, CliError> {
    let mut arts = Artifacts::new(&out.join(fig.name()))?;
    let scalars = build(fig, cfg, &mut arts)?;
    arts.json("summary.json", &scalars)?;
    record(out, &format!("reproduce:{}", fig.name()), cfg, scalars, arts)
}
