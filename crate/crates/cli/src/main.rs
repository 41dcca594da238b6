use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Numbered color tags to virtual tours: projection, detection, reading,
/// tour assembly, synthetic data and evaluation.
#[derive(Debug, Parser)]
#[command(name = "tagtour", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render printable tag images.
    GenTags(GenTagsArgs),
    /// Split an equirectangular panorama into six cube faces.
    ToCubemap(ToCubemapArgs),
    /// Reassemble an equirectangular panorama from six cube faces.
    ToEquirect(ToEquirectArgs),
    /// Find tags on cube faces.
    Detect(DetectArgs),
    /// Read tag numbers from detections.
    Recognize(RecognizeArgs),
    /// Turn readings into a tour graph.
    BuildTour(BuildTourArgs),
    /// Generate a synthetic dataset with labels.
    Synth(SynthArgs),
    /// Score readings against ground truth.
    Eval(EvalArgs),
    /// Run to-cubemap, detect, recognize and build-tour over one property.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Pipeline configuration (JSON); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cube face side in pixels.
    #[arg(long)]
    face_size: Option<u32>,
}

#[derive(Debug, Args)]
struct GenTagsArgs {
    /// Tag numbers, e.g. `1-5,9`. Defaults to all twenty.
    #[arg(long)]
    numbers: Option<String>,
    /// Side of each tag image in pixels.
    #[arg(long, default_value_t = 512)]
    side: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ToCubemapArgs {
    /// Equirectangular PNG.
    input: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for `<stem>_<face>.png`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ToEquirectArgs {
    /// Directory holding `<stem>_<face>.png`.
    #[arg(long)]
    faces: PathBuf,
    #[arg(long)]
    stem: String,
    #[arg(long, default_value_t = 4096)]
    width: u32,
    #[arg(long, default_value_t = 2048)]
    height: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ImportKind {
    Yolo,
    Json,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Directory of `<stem>_<face>.png` face images.
    #[arg(long)]
    faces: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Use external detections instead of the color detector.
    #[arg(long)]
    import: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "yolo")]
    import_format: ImportKind,
    /// Prefix image ids with `<property>/`.
    #[arg(long)]
    property: Option<String>,
    /// Output detections.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RecognizeArgs {
    #[arg(long)]
    faces: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output readings.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BuildTourArgs {
    #[arg(long)]
    readings: PathBuf,
    /// Property manifest (JSON). Defaults to file order in `--panos`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory with the panorama images.
    #[arg(long)]
    panos: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output tour.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Dataset configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_properties: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// gt.json written by `synth`.
    #[arg(long)]
    gt: PathBuf,
    /// readings.json files; image ids must match the ground truth.
    #[arg(long, required = true, num_args = 1..)]
    pred: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Also report the 0.50:0.95 threshold average.
    #[arg(long)]
    coco_range: bool,
    /// Include the per-property breakdown.
    #[arg(long)]
    per_property: bool,
    /// Output report.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Property directory with panorama PNGs.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for tour.json and readings.json.
    #[arg(long)]
    out: PathBuf,
}

fn init_threads() {
    if let Ok(v) = std::env::var("TAGTOUR_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring TAGTOUR_THREADS={v}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_threads();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // core errors already embed their source text
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let s = cause.to_string();
                if !msg.contains(&s) {
                    msg = format!("{msg}: {s}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
