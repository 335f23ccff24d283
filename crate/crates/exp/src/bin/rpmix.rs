use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rpmix::classifier::{cluster_analysis, ingest, train};
use rpmix::em::{centers_recovered, rp_em, run_em, EmOptions};
use rpmix::synthesis::{make_mixture, CovarianceMode, MixtureSpec};
use rpmix::{Dataset64, LabeledDataset64, Mixture64, Projection64};
use rpmix_exp::config::parse_restriction;
use rpmix_exp::{Experiment, ExperimentConfig, Value};

const CSV_COLUMNS: &str = "\
REPORT CSV (experiment <name>, written to <out>/<name>.csv):
  kind,<group columns>,trial,seed,<measures>
  kind is `trial` for per-trial rows; aggregate rows follow with kind one of
  mean, sd (sample, n-1), min, median, max and empty trial/seed fields.
  Trial t uses seed = base_seed + t.

  fig3          groups: n         measures: original_separation, projected_separation
  fig4          groups: k         measures: d, original_separation, projected_separation
  fig5          groups: E, n      measures: projected_eccentricity
  fig6          groups: d         measures: projected_eccentricity
  fig7          groups: method    measures: min_separation, max_separation, s<i>_<j> per pair
                (pca or rp)       also fig7_pca_table.csv, fig7_rp_table.csv: mean k x k tables
  fig8,         groups: n         measures: regular_success, rp_success (0/1, centers within a
  second-em                         third of the trace-radius), regular_failed, rp_failed,
                                    regular_iterations, rp_low_iterations, rp_high_iterations,
                                    regular_test_loglik, rp_test_loglik (-inf on failure),
                                    rp_beat, exact_match (0/1, relative tolerance 1e-9)
  fig9          groups: d         measures: accuracy
                also fig9_clusters_raw.csv, fig9_clusters_d<d>.csv:
                class,<class labels...>,eccentricity (separation table + eccentricity)
  pca-collapse  groups: k         measures: original_separation, pca_low_separation (k/2-1 dims),
                                    pca_full_separation (k/2 dims), rp_separation, rp_d

OTHER OUTPUTS:
  synth     mixture.json; points.csv (header x0..x<n-1>); labeled.csv (label,x_1..x_n, no header)
  project   projection.json; projected.csv (header x0..x<d-1>)
  em        model.json; trace.csv (iteration,loglik)
  classify  model.json; predictions.csv (label,predicted);
            clusters_raw.csv, clusters_projected.csv (class,<labels...>,eccentricity)

CONFIG FILE (--config, TOML):
  experiment = \"fig5\"
  trials = 40
  base_seed = 0
  [overrides]
  E = [50, 100]
  n = [25, 100]
  d = 20
Override keys: n, k, c, E, d, train_size, test_size, restriction (full-distinct |
shared-full), classes, data_path, test_path; each experiment accepts a subset.";

#[derive(Parser)]
#[command(name = "rpmix", version, about = "Random projection and EM for Gaussian mixtures", after_long_help = CSV_COLUMNS)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a separated mixture and sample from it.
    Synth(SynthArgs),
    /// Project a point CSV with a random or PCA map.
    Project(ProjectArgs),
    /// Fit a mixture with EM or RP+EM.
    Em(EmArgs),
    /// Train and evaluate the per-class mixture classifier.
    Classify(ClassifyArgs),
    /// Run a named experiment and write its CSV report.
    #[command(after_long_help = CSV_COLUMNS)]
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Spherical,
    Diagonal,
    Rotated,
    Shared,
}

impl From<ModeArg> for CovarianceMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Spherical => CovarianceMode::SphericalShared,
            ModeArg::Diagonal => CovarianceMode::DiagonalDistinct,
            ModeArg::Rotated => CovarianceMode::RotatedDistinct,
            ModeArg::Shared => CovarianceMode::FullShared,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Pairwise separation.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Eccentricity of every covariance.
    #[arg(long = "ecc", default_value_t = 1.0)]
    eccentricity: f64,
    #[arg(long, value_enum, default_value = "spherical")]
    mode: ModeArg,
    /// Number of points to sample.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rp,
    Uniform,
    Pca,
}

#[derive(Args)]
struct ProjectArgs {
    /// Point CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    d: usize,
    #[arg(long, value_enum, default_value = "rp")]
    method: MethodArg,
}

#[derive(Args)]
struct EmArgs {
    /// Point CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k: usize,
    /// full-distinct or shared-full.
    #[arg(long, default_value = "full-distinct")]
    restriction: String,
    /// Fit in a random d-dimensional projection first (RP+EM).
    #[arg(long)]
    rp_d: Option<usize>,
    /// True mixture JSON, to report center recovery.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Label-first training CSV.
    #[arg(long)]
    train: PathBuf,
    /// Label-first test CSV (default: every fifth training point is held out).
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    d: usize,
    /// Gaussians per class.
    #[arg(long, default_value_t = 5)]
    per_class_k: usize,
    /// Ignore class priors when scoring.
    #[arg(long)]
    no_priors: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// fig3, fig4, fig5, fig6, fig7, fig8, second-em, fig9, pca-collapse
    name: Option<String>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trials per group (default depends on the experiment).
    #[arg(long)]
    trials: Option<usize>,
    /// Extra override, `key=value` (lists as `1,2,3`); repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    match cli.command {
        Command::Synth(a) => synth(a, cli.seed, &cli.out),
        Command::Project(a) => project(a, cli.seed, &cli.out),
        Command::Em(a) => em(a, cli.seed, &cli.out),
        Command::Classify(a) => classify(a, cli.seed, &cli.out),
        Command::Experiment(a) => experiment(a, cli.seed, &cli.out),
    }
}

fn write(path: PathBuf, body: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn synth(a: SynthArgs, seed: u64, out: &Path) -> Result<()> {
    let spec = MixtureSpec {
        n: a.n,
        k: a.k,
        c: a.c,
        eccentricity: a.eccentricity,
        covariance_mode: a.mode.into(),
        seed,
    };
    let mix: Mixture64 = make_mixture(&spec)?;
    let (points, labels) = mix.sample_labeled(a.samples, rpmix::random::child_seed(seed, 9));
    println!("separation {}", mix.separation()?);
    write(out.join("mixture.json"), mix.to_json())?;
    write(out.join("points.csv"), points.to_csv(true))?;
    write(
        out.join("labeled.csv"),
        LabeledDataset64::new(points, labels)?.to_csv(),
    )?;
    Ok(())
}

fn read_points(path: &Path) -> Result<Dataset64> {
    Dataset64::read_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn project(a: ProjectArgs, seed: u64, out: &Path) -> Result<()> {
    let data = read_points(&a.data)?;
    let p = match a.method {
        MethodArg::Rp => Projection64::random_orthonormal(data.dim(), a.d, seed)?,
        MethodArg::Uniform => Projection64::random_uniform(data.dim(), a.d, seed)?,
        MethodArg::Pca => Projection64::pca(&data, a.d)?,
    };
    write(out.join("projection.json"), p.to_json())?;
    write(
        out.join("projected.csv"),
        p.project_data(&data)?.to_csv(true),
    )?;
    Ok(())
}

fn em(a: EmArgs, seed: u64, out: &Path) -> Result<()> {
    let Some(restriction) = parse_restriction(&a.restriction) else {
        bail!(
            "unknown restriction {:?}; use full-distinct or shared-full",
            a.restriction
        );
    };
    let data = read_points(&a.data)?;
    let opts = EmOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        ..EmOptions::default()
    };
    let fit = match a.rp_d {
        Some(d) => {
            let res = rp_em(&data, a.k, d, restriction, seed, &opts)?;
            println!(
                "low-dimensional EM: {} iterations, converged {}",
                res.low.iterations, res.low.converged
            );
            res.high
        }
        None => run_em(&data, a.k, restriction, seed, &opts)?,
    };
    println!(
        "iterations {} converged {} rescues {} loglik {}",
        fit.iterations,
        fit.converged,
        fit.rescues,
        fit.final_loglik()
    );
    if let Some(truth_path) = &a.truth {
        let text = std::fs::read_to_string(truth_path)
            .with_context(|| format!("reading {}", truth_path.display()))?;
        let truth = Mixture64::from_json(&text)?;
        let (ok, errors) = centers_recovered(&fit.model, &truth)?;
        println!("centers recovered {ok}; matched errors {errors:?}");
    }
    write(out.join("model.json"), fit.model.to_json())?;
    write(out.join("trace.csv"), fit.trace_csv())?;
    Ok(())
}

fn classify(a: ClassifyArgs, seed: u64, out: &Path) -> Result<()> {
    let all: LabeledDataset64 =
        ingest(&a.train).with_context(|| format!("reading {}", a.train.display()))?;
    let (train_set, test_set) = match &a.test {
        Some(p) => (
            all,
            ingest(p).with_context(|| format!("reading {}", p.display()))?,
        ),
        None => rpmix_exp::experiments::split_every_fifth(&all)?,
    };
    let model = train(&train_set, a.d, a.per_class_k, seed, &EmOptions::default())?;
    let use_priors = !a.no_priors;
    let accuracy = model.evaluate_with(&test_set, use_priors)?;
    println!(
        "trained on {} points, tested on {}: accuracy {accuracy:.4}",
        train_set.len(),
        test_set.len()
    );
    let predicted = model.predict_all(test_set.points(), use_priors)?;
    let mut body = String::from("label,predicted\n");
    for (l, p) in test_set.labels().iter().zip(predicted) {
        body.push_str(&format!("{l},{p}\n"));
    }
    write(out.join("model.json"), model.to_json())?;
    write(out.join("predictions.csv"), body)?;
    write(
        out.join("clusters_raw.csv"),
        cluster_analysis(&train_set, None)?.to_csv(),
    )?;
    write(
        out.join("clusters_projected.csv"),
        cluster_analysis(&train_set, Some(model.projection()))?.to_csv(),
    )?;
    Ok(())
}

fn experiment(a: ExperimentArgs, seed: u64, out: &Path) -> Result<()> {
    let mut config = match (&a.config, &a.name) {
        (Some(path), name) => {
            let c = ExperimentConfig::from_file(path)?;
            if let Some(name) = name {
                let wanted: Experiment = name.parse()?;
                if wanted != c.experiment {
                    bail!(
                        "config file selects {} but the command line asks for {wanted}",
                        c.experiment
                    );
                }
            }
            c
        }
        (None, Some(name)) => ExperimentConfig::new(name.parse()?),
        (None, None) => bail!("name an experiment or pass --config"),
    };
    if a.config.is_none() || seed != 0 {
        config.base_seed = seed;
    }
    if a.trials.is_some() {
        config.trials = a.trials;
    }
    for kv in &a.set {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects key=value, got {kv:?}");
        };
        config
            .overrides
            .insert(k.trim().to_string(), v.parse::<Value>()?);
    }
    let report = rpmix_exp::run(&config)?;
    print!("{}", report.summary());
    for p in report.write(out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
