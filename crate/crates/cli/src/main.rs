use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sfc_event::detect::EventWindow;
use sfc_event::eval::{
    crossing_frame_count, generate_crossing, generate_static, generate_vertical_mover, match_and_score, StartSide,
};
use sfc_event::features::Variant;
use sfc_event::grid::make_grid;
use sfc_event::media_io::tables::{
    format_events, format_features, format_flow_means, format_metrics, format_morton, parse_events, parse_features,
    parse_morton, MortonTable, ScenarioEvent,
};
use sfc_event::media_io::{
    format_annotations, read_annotations, read_flow, read_pgm_sequence, read_saliency, write_fseq, FlowSequence,
    FseqPayload, MediaError,
};
use sfc_event::pipeline::stages::{cnn_stage, detect_stage, encode_stage, flow_fields, of_stage};
use sfc_event::pipeline::{
    emit_stripes, read_frame_input, run_pipeline, ConfigError, PipelineConfig, PipelineError, StageError,
    StripeFormat, StripeOptions,
};

#[derive(Parser)]
#[command(name = "sfc-event", version, about = "Traffic event retrieval with grid features and Z-order codes")]
struct Cli {
    /// More log output (-v debug, -vv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

/// Configuration shared by the stage commands: an optional TOML file plus
/// `key=value` overrides, which win.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set flow.levels=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, ConfigError> {
        match &self.config {
            Some(path) => PipelineConfig::load(path, &self.set),
            None => PipelineConfig::from_toml("", &self.set, Path::new("")),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotFormat {
    Svg,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneKind {
    Crossing,
    Static,
    Vertical,
}

#[derive(Subcommand)]
enum Command {
    /// Pack a directory of frame_%06d.pgm files into an FSEQ file.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Store 32-bit float intensities instead of 8-bit.
        #[arg(long)]
        float: bool,
    },
    /// Dense optical flow between consecutive frames.
    Flow {
        /// FSEQ file or PGM directory.
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Flow features per grid cell from a flow FSEQ file.
    OfFeatures {
        #[arg(long)]
        flow: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write the per-cell mean flow.
        #[arg(long)]
        means: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Saliency features per grid cell from a saliency FSEQ file.
    CnnFeatures {
        #[arg(long)]
        saliency: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Quantize feature vectors into Morton codes.
    Encode {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Detect crossing events in a Morton stream.
    Detect {
        #[arg(long)]
        morton: PathBuf,
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score an events CSV against annotations.
    Eval {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Throughput to report in the fps column.
        #[arg(long)]
        fps: Option<f64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Plot a Morton stream.
    Stripes {
        #[arg(long)]
        morton: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "svg")]
        format: PlotFormat,
        /// Also mark the active cells of every frame.
        #[arg(long)]
        overlay: bool,
        /// Leave the generation time out of the SVG.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Run every scenario of a config end to end.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Scenarios processed concurrently.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write a synthetic scene with its ground truth and a config to run it.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "crossing")]
        kind: SceneKind,
        #[arg(long, default_value_t = 112)]
        width: usize,
        #[arg(long, default_value_t = 84)]
        height: usize,
        /// Defaults to enough frames for a complete crossing.
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value = "left")]
        side: StartSide,
        #[arg(long, default_value_t = 4.0)]
        speed: f32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Joins the cause chain, skipping causes a message already spells out.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(p) = cause.downcast_ref::<PipelineError>() {
            return p.exit_code() as u8;
        }
        if cause.is::<ConfigError>() {
            return 1;
        }
        if cause.is::<MediaError>() {
            return 2;
        }
        if cause.is::<StageError>() {
            return 3;
        }
    }
    3
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| MediaError::Io { path: path.to_path_buf(), source: e })
        .map_err(Into::into)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Convert { input, output, float } => {
            let seq = read_pgm_sequence(&input)?;
            log::info!("{} frames of {}x{}", seq.len(), seq.width(), seq.height());
            let payload = if float { FseqPayload::GrayF32(seq) } else { FseqPayload::Gray8(seq) };
            write_fseq(&payload, &output)?;
        }
        Command::Flow { frames, output, cfg } => {
            let cfg = cfg.load()?;
            let seq = read_frame_input(&frames)?;
            let fields = flow_fields(seq.frames(), &cfg.flow)?;
            let flow = FlowSequence::new(seq.width(), seq.height(), fields)?;
            write_fseq(&FseqPayload::Flow(flow), &output)?;
        }
        Command::OfFeatures { flow, output, means, cfg } => {
            let cfg = cfg.load()?;
            let seq = read_flow(&flow)?;
            let grid = make_grid(seq.width(), seq.height(), &cfg.grid).map_err(StageError::from)?;
            let (cell_means, feats) = of_stage(seq.fields(), grid, &cfg.of)?;
            write(&output, &format_features(Variant::Of, &feats))?;
            if let Some(path) = means {
                write(&path, &format_flow_means(&cell_means))?;
            }
        }
        Command::CnnFeatures { saliency, output, cfg } => {
            let cfg = cfg.load()?;
            let seq = read_saliency(&saliency)?;
            let grid = make_grid(seq.width(), seq.height(), &cfg.grid).map_err(StageError::from)?;
            let feats = cnn_stage(seq.maps(), &grid, &cfg.saliency)?;
            write(&output, &format_features(Variant::Cnn, &feats))?;
        }
        Command::Encode { features, output, cfg } => {
            let cfg = cfg.load()?;
            let (variant, feats) = parse_features(&read_text(&features)?, &features)?;
            let quantizer = cfg.quantizer.build(variant)?;
            let records = encode_stage(&feats, &quantizer)?;
            write(&output, &format_morton(&MortonTable { variant, quantizer, records }))?;
        }
        Command::Detect { morton, scenario, output, cfg } => {
            let cfg = cfg.load()?;
            let table = parse_morton(&read_text(&morton)?, &morton)?;
            let events = detect_stage(&table.records, &table.quantizer, &cfg.detect, table.variant)?;
            log::info!("{scenario}: {} events", events.len());
            let rows: Vec<ScenarioEvent> = events
                .into_iter()
                .map(|event| ScenarioEvent { scenario_id: scenario.clone(), event })
                .collect();
            write(&output, &format_events(&rows))?;
        }
        Command::Eval { events, annotations, output, fps, cfg } => {
            let cfg = cfg.load()?;
            let rows = parse_events(&read_text(&events)?, &events)?;
            let truth = read_annotations(&annotations)?;
            let variant = rows.first().map_or(cfg.variant, |r| r.event.variant);
            if let Some(r) = rows.iter().find(|r| r.event.variant != variant) {
                bail!(MediaError::Parse {
                    path: events,
                    line: 0,
                    reason: format!("mixed variants {variant} and {}", r.event.variant),
                });
            }
            let mut predicted: BTreeMap<String, Vec<EventWindow>> = BTreeMap::new();
            for r in rows {
                predicted.entry(r.scenario_id).or_default().push(r.event);
            }
            let mut report = match_and_score(variant, &predicted, &truth, cfg.iou_threshold)
                .map_err(PipelineError::from)?;
            report.fps = fps;
            log::info!(
                "tp {} fp {} tn {} fn {}, f1 {:.3}, mean IoU {:.3}",
                report.tp, report.fp, report.tn, report.fn_, report.f1, report.mean_iou
            );
            write(&output, &format_metrics(&[report]))?;
        }
        Command::Stripes { morton, output, format, overlay, no_timestamp } => {
            let table = parse_morton(&read_text(&morton)?, &morton)?;
            let timestamp = (!no_timestamp).then(|| {
                let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
                format!("at unix time {secs}")
            });
            let format = match format {
                PlotFormat::Svg => StripeFormat::Svg,
                PlotFormat::Csv => StripeFormat::Csv,
            };
            let plot = emit_stripes(&table, &StripeOptions { format, overlay, timestamp }).map_err(StageError::from)?;
            write(&output, &plot)?;
        }
        Command::Run { mut cfg, jobs } => {
            if let Some(j) = jobs {
                cfg.set.push(format!("jobs={j}"));
            }
            let cfg = cfg.load()?;
            let summary = run_pipeline(&cfg)?;
            let events: usize = summary.scenarios.iter().map(|s| s.events.len()).sum();
            log::info!("{} scenarios, {events} events, written to {}", summary.scenarios.len(), cfg.output.display());
            if let Some(m) = &summary.metrics {
                log::info!(
                    "f1 {:.3}, sensitivity {:.3}, specificity {:.3}, mean IoU {:.3}",
                    m.f1, m.sensitivity, m.specificity, m.mean_iou
                );
            }
        }
        Command::Synth { output, kind, width, height, frames, side, speed, seed } => {
            let count = frames.unwrap_or_else(|| crossing_frame_count(width, speed));
            let scene = match kind {
                SceneKind::Crossing => generate_crossing(width, height, count, side, speed, seed),
                SceneKind::Static => generate_static(width, height, count, seed),
                SceneKind::Vertical => generate_vertical_mover(width, height, count, speed, seed),
            }
            .map_err(PipelineError::from)?;
            std::fs::create_dir_all(&output).with_context(|| format!("creating {}", output.display()))?;
            write_fseq(&FseqPayload::GrayF32(scene.frames), output.join("frames.fseq"))?;
            write_fseq(&FseqPayload::GrayF32(scene.saliency.into()), output.join("saliency.fseq"))?;
            write(&output.join("truth.csv"), &format_annotations(std::slice::from_ref(&scene.truth)))?;
            let config = format!(
                "variant = \"of\"\noutput = \"out\"\nannotations = \"truth.csv\"\n\n[[scenario]]\nid = \"{}\"\nframes = \"frames.fseq\"\nsaliency = \"saliency.fseq\"\n",
                scene.truth.scenario_id
            );
            write(&output.join("config.toml"), &config)?;
            log::info!("{count} frames of {width}x{height} written to {}", output.display());
        }
    }
    Ok(())
}
