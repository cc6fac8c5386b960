//! The pipeline stages behind each subcommand. Every `cmd_*` function writes
//! its outputs under an output directory and also returns them in memory.

use std::fmt;
use std::path::Path;

use koopman_kkl::dataset::{generate_pairs, generate_scatter, load_pairs, load_scatter, save_pairs, save_scatter, SamplingSpec, ScatterSpec, SnapshotPairs};
use koopman_kkl::dynamics::estimate_period;
use koopman_kkl::injection::{build_lattice, fit_injection, InjectionModel};
use koopman_kkl::inverse::{fit_inverse, KrrModel};
use koopman_kkl::observer::{error_report, run_observer, save_run, ErrorReport, ObserverConfig, ObserverRun};
use koopman_kkl::PolyBasis;
use ndarray::Array2;

use crate::artifact::{ModelArtifact, Provenance};
use crate::config::{KrrSource, Period, PipelineConfig};
use crate::error::CliError;

pub const PAIRS_FILE: &str = "pairs.csv";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const MODEL_FILE: &str = "model.json";
pub const RUN_FILE: &str = "run.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Datasets {
    pub pairs: SnapshotPairs<f64>,
    pub scatter: Array2<f64>,
}

impl fmt::Display for Datasets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "snapshot pairs: {} rows", self.pairs.len())?;
        write!(f, "scatter points: {} rows", self.scatter.nrows())
    }
}

pub fn generate(cfg: &PipelineConfig) -> Result<Datasets, CliError> {
    let field = cfg.field()?;
    let spec = SamplingSpec {
        n_traj: cfg.sampling.n_traj,
        duration: cfg.sampling.duration,
        dt: cfg.sampling.dt,
        init_mean: cfg.sampling.init_mean.clone(),
        init_std: cfg.sampling.init_std,
        filters: cfg.trajectory_filters()?,
        seed: cfg.seed,
        max_attempts: cfg.sampling.max_attempts,
    };
    let pairs = generate_pairs(field.as_ref(), &cfg.output_map(), &spec, &cfg.integrator())?;
    let scatter = generate_scatter(&ScatterSpec {
        count: cfg.krr.count,
        mean: cfg.krr.mean.clone(),
        std: cfg.krr.std,
        filters: cfg.scatter_filters()?,
        seed: cfg.scatter_seed(),
        max_attempts: cfg.sampling.max_attempts,
    })?;
    Ok(Datasets {
        pairs,
        scatter: scatter.points,
    })
}

pub fn cmd_generate(cfg: &PipelineConfig, out_dir: &Path) -> Result<Datasets, CliError> {
    let data = generate(cfg)?;
    ensure_dir(out_dir)?;
    save_pairs(&data.pairs, &out_dir.join(PAIRS_FILE))?;
    save_scatter(data.scatter.view(), &out_dir.join(SCATTER_FILE))?;
    Ok(data)
}

/// The configured period, or the estimate from the configured probe.
pub fn resolve_period(cfg: &PipelineConfig) -> Result<f64, CliError> {
    match cfg.lattice.period {
        Period::Fixed(p) => Ok(p),
        Period::Keyword(_) => {
            let field = cfg.field()?;
            Ok(estimate_period(
                field.as_ref(),
                &cfg.lattice.probe,
                cfg.lattice.settle,
                cfg.lattice.observe,
                &cfg.integrator(),
            )?)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub period: f64,
    pub real_defects: Vec<f64>,
    pub imag_defects: Vec<f64>,
    pub fit_rmse: Vec<f64>,
    /// `fit_rmse / rms(y)` per component.
    pub relative_residual: Vec<f64>,
    pub krr_training_rmse: f64,
    pub krr_points: usize,
}

impl fmt::Display for FitDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "period: {}", self.period)?;
        let list = |v: &[f64]| v.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(" ");
        writeln!(f, "real factor defects: {}", list(&self.real_defects))?;
        writeln!(f, "imag factor defects: {}", list(&self.imag_defects))?;
        for (j, (r, rel)) in self.fit_rmse.iter().zip(&self.relative_residual).enumerate() {
            writeln!(f, "component {}: fit_rmse {r:.6e} (relative {rel:.6e})", j + 1)?;
        }
        write!(f, "inverse map: {} points, training rmse {:.6e}", self.krr_points, self.krr_training_rmse)
    }
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub injection: InjectionModel<f64>,
    pub krr: KrrModel<f64>,
    pub artifact: ModelArtifact,
    pub diagnostics: FitDiagnostics,
}

pub fn fit(cfg: &PipelineConfig, pairs: &SnapshotPairs<f64>, scatter: Option<&Array2<f64>>) -> Result<FitOutput, CliError> {
    let period = resolve_period(cfg)?;
    let lattice = build_lattice(cfg.lattice.mu_real, std::f64::consts::TAU / period, cfg.lattice.m_max, cfg.lattice.n_max)?;
    lattice.check_admissible(&cfg.injection.lambdas)?;
    let basis = PolyBasis::new(pairs.n_x(), cfg.basis.degree)?;
    let injection = fit_injection(&basis, pairs, &lattice, &cfg.injection.lambdas, cfg.injection.ridge)?;

    let krr_x = match cfg.krr.source {
        KrrSource::Scatter => scatter
            .ok_or_else(|| CliError::Config("krr.source = \"scatter\" needs a scatter file".into()))?
            .clone(),
        KrrSource::Pairs => pairs.x.clone(),
    };
    let krr = fit_inverse(&injection, krr_x.view(), cfg.krr.length_scale, cfg.krr.xi, cfg.kernel()?)?;

    let rms_y = (pairs.y.iter().map(|v| v * v).sum::<f64>() / pairs.len() as f64).sqrt();
    let diagnostics = FitDiagnostics {
        period,
        real_defects: injection.factors.real.iter().map(|f| f.defect).collect(),
        imag_defects: injection.factors.imag.iter().map(|f| f.defect).collect(),
        fit_rmse: injection.fit_rmse.clone(),
        relative_residual: injection.fit_rmse.iter().map(|r| r / rms_y).collect(),
        krr_training_rmse: krr.training_rmse(krr_x.view())?,
        krr_points: krr_x.nrows(),
    };
    let artifact = ModelArtifact::new(&injection, &krr, Provenance::now(cfg.hash(), cfg.seed));
    Ok(FitOutput {
        injection,
        krr,
        artifact,
        diagnostics,
    })
}

pub fn cmd_fit(
    cfg: &PipelineConfig,
    pairs_path: &Path,
    scatter_path: &Path,
    out_dir: &Path,
) -> Result<FitOutput, CliError> {
    let pairs = load_pairs(pairs_path)?;
    let scatter = match cfg.krr.source {
        KrrSource::Scatter => Some(load_scatter(scatter_path)?),
        KrrSource::Pairs => None,
    };
    let out = fit(cfg, &pairs, scatter.as_ref())?;
    ensure_dir(out_dir)?;
    out.artifact.save(&out_dir.join(MODEL_FILE))?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub run: ObserverRun<f64>,
    pub report: ErrorReport<f64>,
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.report;
        writeln!(f, "samples = {}", self.run.t.len())?;
        writeln!(f, "window_start = {}", r.window_start)?;
        writeln!(f, "max_err_state = {}", r.max_err_state)?;
        writeln!(f, "window_max_err_state = {}", r.window_max_err_state)?;
        writeln!(f, "window_mean_err_state = {}", r.window_mean_err_state)?;
        writeln!(f, "max_err_z = {}", r.max_err_z)?;
        write!(f, "max_hull_dist = {}", r.max_hull_dist)
    }
}

pub fn observe(cfg: &PipelineConfig, injection: &InjectionModel<f64>, krr: &KrrModel<f64>) -> Result<Observation, CliError> {
    if cfg.injection.lambdas != injection.lambdas {
        return Err(CliError::Config(format!(
            "injection.lambdas {:?} differ from the model's {:?}",
            cfg.injection.lambdas, injection.lambdas
        )));
    }
    let field = cfg.field()?;
    let ocfg = ObserverConfig {
        lambdas: cfg.injection.lambdas.clone(),
        x0_true: cfg.observer.x0_true.clone(),
        x0_hat: cfg.observer.x0_hat.clone(),
        duration: cfg.observer.duration,
        dt: cfg.observer.dt,
    };
    let run = run_observer(field.as_ref(), &cfg.output_map(), injection, krr, &ocfg, &cfg.integrator())?;
    let report = error_report(&run);
    Ok(Observation { run, report })
}

fn write_observation(obs: &Observation, out_dir: &Path) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    save_run(&obs.run, &out_dir.join(RUN_FILE))?;
    let path = out_dir.join(SUMMARY_FILE);
    std::fs::write(&path, format!("{obs}\n")).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn cmd_observe(cfg: &PipelineConfig, model_path: &Path, out_dir: &Path) -> Result<Observation, CliError> {
    let artifact = ModelArtifact::load(model_path)?;
    let (injection, krr) = artifact.models().map_err(|message| CliError::Artifact {
        path: model_path.display().to_string(),
        message,
    })?;
    let obs = observe(cfg, &injection, &krr)?;
    write_observation(&obs, out_dir)?;
    Ok(obs)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub data: Datasets,
    pub fit: FitOutput,
    pub observation: Observation,
}

pub fn cmd_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> Result<PipelineOutput, CliError> {
    let data = cmd_generate(cfg, out_dir)?;
    let fit = fit(cfg, &data.pairs, Some(&data.scatter))?;
    fit.artifact.save(&out_dir.join(MODEL_FILE))?;
    let observation = observe(cfg, &fit.injection, &fit.krr)?;
    write_observation(&observation, out_dir)?;
    Ok(PipelineOutput { data, fit, observation })
}
