use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use synthdrive_cli::{
    load_file_config, parse_ratio, run_bench, run_eval, run_filter, run_generate, run_mix,
    run_sample, run_split, run_stats, BenchConfig, CliError, EvalRequest, FilterMode,
    GenerateConfig,
};
use synthdrive_core::eval::ApMode;
use synthdrive_core::render::Weather;
use synthdrive_core::DEFAULT_SEED;

#[derive(Parser)]
#[command(
    name = "synthdrive",
    version,
    about = "Synthetic driving-scene dataset generator and detection evaluation tools"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a scripted drive into a multi-channel dataset tree
    Generate(GenerateArgs),
    /// Summarize dataset composition as JSON
    Stats(StatsArgs),
    /// Keep objects passing a predicate; drop emptied images
    Filter(FilterArgs),
    /// Deterministic train:test split of a dataset
    Split(SplitArgs),
    /// Merge datasets under distinct namespaces
    Mix(MixArgs),
    /// Deterministic random subset of a dataset
    Sample(SampleArgs),
    /// Score detections against ground truth, or compare AP tables
    Eval(EvalArgs),
    /// Report render throughput on the built-in city
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output dataset root
    #[arg(long)]
    out: PathBuf,
    /// JSON file supplying any subset of the flags below; flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario preset: pe01, pe02, or pe03
    #[arg(long)]
    preset: Option<String>,
    /// OSM XML or layout JSON map file (default: built-in grid city)
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    /// Horizontal field of view, degrees
    #[arg(long)]
    fov: Option<f64>,
    /// sunny, cloudy, rainy, or foggy
    #[arg(long)]
    weather: Option<String>,
    /// Hour of day in [0, 24)
    #[arg(long)]
    time_of_day: Option<f64>,
    /// Exponential fog density, 1/meters
    #[arg(long)]
    fog_beta: Option<f64>,
    /// Worker threads; 0 uses all cores
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Keep objects with inclusive pixel area >= this
    #[arg(long)]
    min_area: Option<u32>,
    /// Keep only unoccluded, untruncated objects
    #[arg(long)]
    fully_visible: bool,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out_train: PathBuf,
    #[arg(long)]
    out_test: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Train:test ratio, e.g. 3:1
    #[arg(long)]
    ratio: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct MixArgs {
    /// Repeated NS=PATH pairs; ids become NS_originalid
    #[arg(long = "dataset", value_name = "NS=PATH")]
    datasets: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth dataset root (with --detections)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// JSON-lines detections: {"image_id", "class", "bbox", "score"}
    #[arg(long)]
    detections: Option<PathBuf>,
    /// JSON map of label to reference AP; adds a rate-of-descent section
    #[arg(long)]
    reference_ap: Option<PathBuf>,
    /// JSON map of label to measured AP; descent-only mode, no dataset
    #[arg(long)]
    measured_ap: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iou: Option<f64>,
    /// voc2007_11pt or continuous
    #[arg(long)]
    ap_mode: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario preset steering scene density
    #[arg(long)]
    preset: Option<String>,
}

fn resolve_generate(args: GenerateArgs) -> Result<GenerateConfig, CliError> {
    let file = load_file_config(args.config.as_deref())?;
    let defaults = GenerateConfig::default();
    let weather_name = args.weather.or(file.weather);
    let weather = match weather_name {
        Some(name) => Weather::from_str(&name).map_err(CliError::Config)?,
        None => defaults.weather,
    };
    Ok(GenerateConfig {
        out: args.out,
        preset: args.preset.or(file.preset).unwrap_or(defaults.preset),
        map: args.map.or(file.map),
        frames: args.frames.or(file.frames).unwrap_or(defaults.frames),
        seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        width: args.width.or(file.width).unwrap_or(defaults.width),
        height: args.height.or(file.height).unwrap_or(defaults.height),
        fov_h: args.fov.or(file.fov).unwrap_or(defaults.fov_h),
        weather,
        time_of_day: args.time_of_day.or(file.time_of_day).unwrap_or(defaults.time_of_day),
        fog_beta: args.fog_beta.or(file.fog_beta).unwrap_or(defaults.fog_beta),
        jobs: args.jobs.or(file.jobs).unwrap_or(defaults.jobs),
    })
}

fn resolve_eval(args: EvalArgs) -> Result<EvalRequest, CliError> {
    let file = load_file_config(args.config.as_deref())?;
    let ap_mode = match args.ap_mode.or(file.ap_mode) {
        Some(name) => ApMode::from_str(&name).map_err(CliError::Config)?,
        None => ApMode::Voc2007,
    };
    Ok(EvalRequest {
        dataset: args.dataset,
        detections: args.detections,
        reference_ap: args.reference_ap,
        measured_ap: args.measured_ap,
        iou_threshold: args.iou.or(file.iou_threshold).unwrap_or(0.5),
        ap_mode,
    })
}

fn parse_namespaces(raw: &[String]) -> Result<Vec<(String, PathBuf)>, CliError> {
    raw.iter()
        .map(|pair| {
            let (ns, path) = pair.split_once('=').ok_or_else(|| {
                CliError::Config(format!("invalid --dataset '{pair}': expected NS=PATH"))
            })?;
            if ns.is_empty() || path.is_empty() {
                return Err(CliError::Config(format!(
                    "invalid --dataset '{pair}': namespace and path must be non-empty"
                )));
            }
            Ok((ns.to_string(), PathBuf::from(path)))
        })
        .collect()
}

/// Print without panicking when the reader hangs up mid-stream (stdout piped
/// to head, say); there is nothing useful left to do then.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout();
    if out.write_all(text.as_bytes()).and_then(|()| out.flush()).is_err() {
        std::process::exit(0);
    }
}

fn print_report(report: &serde_json::Value) {
    emit(&format!("{}\n", serde_json::to_string_pretty(report).expect("serializable")));
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Generate(args) => {
            let cfg = resolve_generate(args)?;
            let manifest = run_generate(&cfg)?;
            print_report(&manifest);
        }
        Cmd::Stats(args) => print_report(&run_stats(&args.dataset)?),
        Cmd::Filter(args) => {
            let file = load_file_config(args.config.as_deref())?;
            let min_area = args.min_area.or(file.min_area);
            let mode = match (min_area, args.fully_visible) {
                (Some(a), false) => FilterMode::MinArea(a),
                (None, true) => FilterMode::FullyVisible,
                (Some(_), true) => {
                    return Err(CliError::Config(
                        "choose one of --min-area and --fully-visible, not both".into(),
                    ))
                }
                (None, false) => {
                    return Err(CliError::Config(
                        "filter needs --min-area N or --fully-visible".into(),
                    ))
                }
            };
            print_report(&run_filter(&args.dataset, &args.out, mode)?);
        }
        Cmd::Split(args) => {
            let file = load_file_config(args.config.as_deref())?;
            let ratio_text = args.ratio.or(file.ratio).unwrap_or_else(|| "3:1".into());
            let ratio = parse_ratio(&ratio_text)?;
            let seed = args.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
            print_report(&run_split(&args.dataset, &args.out_train, &args.out_test, ratio, seed)?);
        }
        Cmd::Mix(args) => {
            let parts = parse_namespaces(&args.datasets)?;
            print_report(&run_mix(&parts, &args.out)?);
        }
        Cmd::Sample(args) => {
            let file = load_file_config(args.config.as_deref())?;
            let count = args.count.or(file.count).ok_or_else(|| {
                CliError::Config("sample needs --count N (flag or config)".into())
            })?;
            let seed = args.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
            print_report(&run_sample(&args.dataset, &args.out, count, seed)?);
        }
        Cmd::Eval(args) => {
            let req = resolve_eval(args)?;
            let report = run_eval(&req)?;
            for warning in &report.warnings {
                eprintln!("warning: {warning}");
            }
            emit(&report.text);
            print_report(&report.json);
        }
        Cmd::Bench(args) => {
            let file = load_file_config(args.config.as_deref())?;
            let defaults = BenchConfig::default();
            let cfg = BenchConfig {
                width: args.width.or(file.width).unwrap_or(defaults.width),
                height: args.height.or(file.height).unwrap_or(defaults.height),
                frames: args.frames.or(file.frames).unwrap_or(defaults.frames),
                seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
                preset: args.preset.or(file.preset).unwrap_or(defaults.preset),
            };
            print_report(&run_bench(&cfg)?);
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
