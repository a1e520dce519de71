//! Command-line front end: one subcommand per experiment in the study.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tdlas_tomo::harness::artifacts::{
    field_from_csv, field_to_csv, heatmap_svg, layout_svg, line_plot_svg, multi_line_plot_svg,
    ArtifactWriter, Palette,
};
use tdlas_tomo::harness::config::ExperimentConfig;
use tdlas_tomo::harness::runner::{Experiment, SeedRun};
use tdlas_tomo::harness::sweeps::{run_gamma_mu_sweep, run_lambda_sweep, run_snr_sweep};
use tdlas_tomo::phantom::add_noise;
use tdlas_tomo::solvers::ReconstructionResult;
use tdlas_tomo::{Result, TomoError};

#[derive(Parser)]
#[command(name = "tomo", about = "Two-line absorption tomography: simulation, reconstruction and sweeps", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured algorithm ("sart", "retro" or "both").
    #[arg(long)]
    algo: Option<String>,
    /// Override the operating SNR in dB.
    #[arg(long)]
    snr_db: Option<f64>,
    /// Override the base noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread count (defaults to the core count). Outputs are
    /// identical for any value.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(algo) = &self.algo {
            cfg.algorithm = algo.clone();
        }
        if let Some(snr) = self.snr_db {
            cfg.noise.snr_db = snr;
        }
        if let Some(seed) = self.seed {
            cfg.noise.base_seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        if let Some(jobs) = self.jobs {
            // ignore the error if a pool already exists (e.g. under tests)
            let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample the configured phantom on the reconstruction grid.
    Phantom(Common),
    /// Forward-project the phantom on the fine grid, optionally noisy.
    Project(Common),
    /// Reconstruct one noisy realisation with the selected algorithm(s).
    Reconstruct(Common),
    /// Evaluate metrics for every seed and algorithm, with aggregates.
    Metrics(Common),
    /// SART regularisation sweep: mean IE per lambda per phantom.
    SweepLambda(Common),
    /// RETRO (gamma, mu) surface: mean IE per combination per phantom.
    SweepGammaMu(Common),
    /// Metric-versus-SNR comparison of both algorithms.
    SweepSnr(Common),
    /// Emit the beam/RoI layout as an SVG file.
    RenderLayout(Common),
    /// Re-render a previously written field CSV as an image.
    RenderField {
        #[command(flatten)]
        common: Common,
        /// Field CSV produced by this tool (reconstruction grid).
        #[arg(long)]
        input: PathBuf,
        /// "grey" or "heat".
        #[arg(long, default_value = "grey")]
        palette: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Phantom(c) => cmd_phantom(&c),
        Command::Project(c) => cmd_project(&c),
        Command::Reconstruct(c) => cmd_reconstruct(&c),
        Command::Metrics(c) => cmd_metrics(&c),
        Command::SweepLambda(c) => cmd_sweep_lambda(&c),
        Command::SweepGammaMu(c) => cmd_sweep_gamma_mu(&c),
        Command::SweepSnr(c) => cmd_sweep_snr(&c),
        Command::RenderLayout(c) => cmd_render_layout(&c),
        Command::RenderField { common, input, palette } => cmd_render_field(&common, &input, &palette),
    }
}

fn parse_palette(name: &str) -> Result<Palette> {
    match name {
        "grey" | "gray" => Ok(Palette::Grey),
        "heat" => Ok(Palette::Heat),
        other => Err(TomoError::Config(format!("unknown palette '{other}' (grey|heat)"))),
    }
}

/// The phantoms a sweep covers: the three presets, or just the
/// configured one when it is an inline blob list.
fn sweep_phantoms(cfg: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
    if cfg.phantom.preset.is_some() {
        ["phantom1", "phantom2", "phantom3"]
            .iter()
            .map(|name| {
                let mut c = cfg.clone();
                c.phantom.preset = Some((*name).into());
                c.phantom.blobs.clear();
                ((*name).to_string(), c)
            })
            .collect()
    } else {
        vec![("custom".to_string(), cfg.clone())]
    }
}

fn phantom_label(cfg: &ExperimentConfig) -> String {
    cfg.phantom.preset.clone().unwrap_or_else(|| "custom".into())
}

fn cmd_phantom(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let exp = Experiment::prepare(cfg)?;
    let mut w = ArtifactWriter::new(&exp.config.output_dir)?;
    let (temperature, concentration) = exp.phantom.sample_field(&exp.ops.grid);
    w.write("truth_temperature.csv", field_to_csv(&temperature))?;
    w.write("truth_concentration.csv", field_to_csv(&concentration))?;
    w.write_field_image("truth_temperature", &temperature, Palette::Heat)?;
    w.write_field_image("truth_concentration", &concentration, Palette::Grey)?;
    let manifest = w.finish()?;
    println!(
        "phantom {}: {} active pixels, wrote {}",
        phantom_label(&exp.config),
        exp.ops.grid.n_active(),
        manifest.display()
    );
    Ok(())
}

fn cmd_project(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let exp = Experiment::prepare(cfg)?;
    let snr = exp.config.noise.snr_db;
    let ms = if snr.is_finite() {
        add_noise(&exp.noiseless, snr, exp.config.noise.base_seed, exp.config.noise.model)
    } else {
        exp.noiseless.clone()
    };
    let mut w = ArtifactWriter::new(&exp.config.output_dir)?;
    w.write("measurements.csv", ms.to_csv())?;
    let manifest = w.finish()?;
    println!(
        "projected {} beams at {} dB, wrote {}",
        ms.len(),
        snr,
        manifest.display()
    );
    Ok(())
}

fn write_reconstruction(
    w: &mut ArtifactWriter,
    prefix: &str,
    result: &ReconstructionResult,
) -> Result<()> {
    w.write(&format!("{prefix}/temperature.csv"), field_to_csv(&result.temperature))?;
    w.write(&format!("{prefix}/concentration.csv"), field_to_csv(&result.concentration))?;
    w.write(&format!("{prefix}/a1.csv"), field_to_csv(&result.a1))?;
    w.write(&format!("{prefix}/a2.csv"), field_to_csv(&result.a2))?;
    w.write_field_image(&format!("{prefix}/temperature"), &result.temperature, Palette::Heat)?;
    w.write_field_image(&format!("{prefix}/temperature_grey"), &result.temperature, Palette::Grey)?;
    w.write(&format!("{prefix}/diagnostics.txt"), format!("{:#?}\n", result.info))?;
    Ok(())
}

fn metrics_header() -> &'static str {
    "phantom,algorithm,seed,ie,dl,cve,os\n"
}

fn metrics_row(phantom: &str, algorithm: &str, run: &SeedRun) -> String {
    format!(
        "{phantom},{algorithm},{},{},{},{},{}\n",
        run.seed, run.metrics.ie, run.metrics.dl, run.metrics.cve, run.metrics.os
    )
}

fn blob_rows(phantom: &str, algorithm: &str, run: &SeedRun, out: &mut String) {
    for (i, b) in run.metrics.blobs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{phantom},{algorithm},{},{i},{},{},{},{},{},{},{}",
            run.seed,
            b.true_center.0,
            b.true_center.1,
            b.recon_centroid.0,
            b.recon_centroid.1,
            b.dislocation,
            b.centroid_value_error,
            b.degenerate
        );
    }
}

fn cmd_reconstruct(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let exp = Experiment::prepare(cfg)?;
    let label = phantom_label(&exp.config);
    let seed = exp.config.noise.base_seed;
    let snr = exp.config.noise.snr_db;
    let mut w = ArtifactWriter::new(&exp.config.output_dir)?;
    let mut metrics = String::from(metrics_header());
    for name in exp.selected_algorithms() {
        let algo = exp.algorithm(name)?;
        let run = exp.run_one(&algo, snr, seed)?;
        write_reconstruction(&mut w, name, &run.result)?;
        metrics.push_str(&metrics_row(&label, name, &run));
        println!(
            "{name}: ie={:.4} dl={:.4} cve={:.4} os={:.4}",
            run.metrics.ie, run.metrics.dl, run.metrics.cve, run.metrics.os
        );
    }
    w.write("metrics.csv", metrics)?;
    let manifest = w.finish()?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn cmd_metrics(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let exp = Experiment::prepare(cfg)?;
    let label = phantom_label(&exp.config);
    let seeds = exp.config.noise.seeds();
    let snr = exp.config.noise.snr_db;
    let mut per_seed = String::from(metrics_header());
    let mut blobs = String::from(
        "phantom,algorithm,seed,blob,true_x,true_y,rec_x,rec_y,dislocation,cve,degenerate\n",
    );
    let mut summary = String::from("phantom,algorithm,stat,ie,dl,cve,os\n");
    for name in exp.selected_algorithms() {
        let algo = exp.algorithm(name)?;
        let agg = exp.mean_metrics(&algo, snr, &seeds)?;
        for &seed in &seeds {
            let run = exp.run_one(&algo, snr, seed)?;
            per_seed.push_str(&metrics_row(&label, name, &run));
            blob_rows(&label, name, &run, &mut blobs);
        }
        for (stat, m) in [("mean", agg.mean), ("std", agg.std)] {
            let _ = writeln!(summary, "{label},{name},{stat},{},{},{},{}", m.ie, m.dl, m.cve, m.os);
        }
        println!(
            "{name}: mean ie={:.4} dl={:.4} cve={:.4} os={:.4} over {} seeds",
            agg.mean.ie,
            agg.mean.dl,
            agg.mean.cve,
            agg.mean.os,
            seeds.len()
        );
    }
    let mut w = ArtifactWriter::new(&exp.config.output_dir)?;
    w.write("metrics.csv", per_seed)?;
    w.write("blob_detail.csv", blobs)?;
    w.write("metrics_summary.csv", summary)?;
    let manifest = w.finish()?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn cmd_sweep_lambda(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let grid = cfg.sweep.lambda.grid();
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    let mut csv = String::from("phantom,lambda,mean_ie,std_ie\n");
    for (label, pcfg) in sweep_phantoms(&cfg) {
        let exp = Experiment::prepare(pcfg)?;
        let sweep = run_lambda_sweep(&exp, &grid)?;
        for p in &sweep.points {
            let _ = writeln!(csv, "{label},{},{},{}", p.lambda, p.mean_ie, p.std_ie);
        }
        let points: Vec<(f64, f64)> = sweep.points.iter().map(|p| (p.lambda, p.mean_ie)).collect();
        w.write(
            &format!("lambda_sweep_{label}.svg"),
            line_plot_svg(&points, "lambda (log scale)", "mean IE"),
        )?;
        println!(
            "{label}: argmin lambda = {:.4e}, mean IE = {:.4}",
            sweep.argmin_lambda, sweep.min_mean_ie
        );
    }
    w.write("lambda_sweep.csv", csv)?;
    let manifest = w.finish()?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn cmd_sweep_gamma_mu(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let (gammas, mus) = (cfg.sweep.gamma.clone(), cfg.sweep.mu.clone());
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    let mut csv = String::from("phantom,gamma,mu,mean_ie\n");
    for (label, pcfg) in sweep_phantoms(&cfg) {
        let exp = Experiment::prepare(pcfg)?;
        let sweep = run_gamma_mu_sweep(&exp, &gammas, &mus)?;
        for p in &sweep.points {
            let _ = writeln!(csv, "{label},{},{},{}", p.gamma, p.mu, p.mean_ie);
        }
        let values: Vec<f64> = sweep.points.iter().map(|p| p.mean_ie).collect();
        w.write(&format!("gamma_mu_{label}.svg"), heatmap_svg(&gammas, &mus, &values))?;
        println!(
            "{label}: argmin (gamma, mu) = ({:.4e}, {:.4e}), mean IE = {:.4}",
            sweep.argmin.0, sweep.argmin.1, sweep.min_mean_ie
        );
    }
    w.write("gamma_mu_sweep.csv", csv)?;
    let manifest = w.finish()?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn cmd_sweep_snr(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let grid = cfg.sweep.snr_db.clone();
    let points = run_snr_sweep(&cfg, &grid)?;
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    let mut csv = String::from("snr_db,algorithm,ie,dl,cve,os\n");
    for p in &points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            p.snr_db, p.algorithm, p.metrics.ie, p.metrics.dl, p.metrics.cve, p.metrics.os
        );
    }
    w.write("snr_sweep.csv", csv)?;
    for (metric, pick) in [
        ("ie", (|m: &tdlas_tomo::harness::runner::MetricsSummary| m.ie) as fn(_) -> f64),
        ("dl", |m| m.dl),
        ("cve", |m| m.cve),
        ("os", |m| m.os),
    ] {
        let series: Vec<(String, Vec<(f64, f64)>)> = ["sart", "retro"]
            .iter()
            .map(|algo| {
                let pts = points
                    .iter()
                    .filter(|p| p.algorithm == *algo)
                    .map(|p| (p.snr_db, pick(&p.metrics)))
                    .collect();
                (algo.to_string(), pts)
            })
            .collect();
        w.write(
            &format!("snr_{metric}.svg"),
            multi_line_plot_svg(&series, "SNR (dB)", metric),
        )?;
    }
    let manifest = w.finish()?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn cmd_render_layout(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let svg = layout_svg(&cfg.geometry)?;
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    let path = w.write("layout.svg", svg)?;
    w.finish()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_render_field(common: &Common, input: &PathBuf, palette: &str) -> Result<()> {
    let cfg = common.load()?;
    let palette = parse_palette(palette)?;
    let ops = tdlas_tomo::solvers::Operators::build(&cfg.geometry, cfg.grid.recon_pixel_size_cm)?;
    let text = std::fs::read_to_string(input)?;
    let field = field_from_csv(&text, &ops.grid)?;
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("field")
        .to_string();
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    w.write_field_image(&stem, &field, palette)?;
    let manifest = w.finish()?;
    println!("wrote {}", manifest.display());
    Ok(())
}
