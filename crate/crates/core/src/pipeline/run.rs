use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;

use crate::detect::EventWindow;
use crate::eval::{match_and_score, throughput, EvalError, MetricsReport};
use crate::features::{CellFeatureVector, Variant};
use crate::flow::{FlowError, FlowEstimator};
use crate::grid::{make_grid, GridError};
use crate::media_io::tables::{format_events, format_features, format_metrics, format_morton, MortonTable, ScenarioEvent};
use crate::media_io::{
    read_annotations, read_flow, read_frames, read_pgm_sequence, read_saliency, FlowSequence, FrameSequence, MediaError,
    SaliencySequence,
};
use crate::zorder::{MortonRecord, Quantizer};

use super::config::{ConfigError, PipelineConfig, ScenarioInput};
use super::stages::{cnn_stage, detect_stage, timed, OfStage, StageError, StageTimes};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Input {
        context: String,
        #[source]
        source: MediaError,
    },
    #[error("scenario `{scenario}`, {stage} stage: {source}")]
    Stage {
        scenario: String,
        stage: &'static str,
        #[source]
        source: StageError,
    },
    #[error("scoring: {0}")]
    Eval(#[from] EvalError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl PipelineError {
    /// Process exit status: 1 for configuration problems, 2 for bad inputs,
    /// 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Input { .. } | PipelineError::Eval(_) => 2,
            PipelineError::Stage { source, .. } => match source {
                StageError::Grid(GridError::DegenerateCell(_)) => 1,
                StageError::Grid(GridError::GeometryMismatch { .. })
                | StageError::Flow(FlowError::GeometryMismatch(..) | FlowError::EmptyFrame) => 2,
                _ => 3,
            },
            PipelineError::Output { .. } | PipelineError::Internal(_) => 3,
        }
    }

    pub fn input(context: impl std::fmt::Display, source: MediaError) -> Self {
        PipelineError::Input {
            context: context.to_string(),
            source,
        }
    }
}

fn stage_err<'a>(scenario: &'a str, stage: &'static str) -> impl Fn(StageError) -> PipelineError + 'a {
    move |source| PipelineError::Stage {
        scenario: scenario.to_string(),
        stage,
        source,
    }
}

/// Decoded inputs of one scenario.
#[derive(Clone, Debug)]
pub enum ScenarioData {
    Frames(FrameSequence),
    Flow(FlowSequence),
    Saliency(SaliencySequence),
}

impl ScenarioData {
    fn dims(&self) -> (usize, usize) {
        match self {
            ScenarioData::Frames(s) => (s.width(), s.height()),
            ScenarioData::Flow(s) => (s.width(), s.height()),
            ScenarioData::Saliency(s) => (s.width(), s.height()),
        }
    }

    /// Source frames covered by the input.
    pub fn frame_count(&self) -> usize {
        match self {
            ScenarioData::Frames(s) => s.len(),
            ScenarioData::Flow(s) if s.is_empty() => 0,
            ScenarioData::Flow(s) => s.len() + 1,
            ScenarioData::Saliency(s) => s.len(),
        }
    }
}

/// Reads a frame sequence from an FSEQ file or a PGM directory.
pub fn read_frame_input(path: &Path) -> Result<FrameSequence, MediaError> {
    if path.is_dir() {
        read_pgm_sequence(path)
    } else {
        read_frames(path)
    }
}

/// Decodes the input the configured variant needs.
pub fn load_scenario(input: &ScenarioInput, variant: Variant) -> Result<ScenarioData, PipelineError> {
    let ctx = |p: &Path| format!("scenario `{}`: {}", input.id, p.display());
    let missing = || ConfigError::Invalid(format!("scenario `{}` lacks input for {variant}", input.id));
    match variant {
        Variant::Of => match (&input.flow, &input.frames) {
            (Some(p), _) => read_flow(p).map(ScenarioData::Flow).map_err(|e| PipelineError::input(ctx(p), e)),
            (None, Some(p)) => read_frame_input(p)
                .map(ScenarioData::Frames)
                .map_err(|e| PipelineError::input(ctx(p), e)),
            (None, None) => Err(missing().into()),
        },
        Variant::Cnn => {
            let p = input.saliency.as_ref().ok_or_else(missing)?;
            read_saliency(p)
                .map(ScenarioData::Saliency)
                .map_err(|e| PipelineError::input(ctx(p), e))
        }
    }
}

/// Everything one scenario produced.
#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub id: String,
    pub variant: Variant,
    pub frame_count: usize,
    pub features: Vec<CellFeatureVector>,
    pub records: Vec<MortonRecord>,
    pub events: Vec<EventWindow>,
    pub times: StageTimes,
}

/// Runs one scenario frame by frame. Input decoding is not timed.
pub fn run_scenario(id: &str, data: &ScenarioData, cfg: &PipelineConfig) -> Result<ScenarioOutput, PipelineError> {
    let variant = match data {
        ScenarioData::Saliency(_) => Variant::Cnn,
        _ => Variant::Of,
    };
    let quantizer = cfg.quantizer.build(variant)?;
    let (w, h) = data.dims();
    let grid = make_grid(w, h, &cfg.grid).map_err(|e| stage_err(id, "grid")(e.into()))?;
    let mut times = StageTimes::default();
    let mut features = Vec::with_capacity(data.frame_count());
    let mut records = Vec::with_capacity(data.frame_count());

    let mut emit = |fv: CellFeatureVector, times: &mut StageTimes| -> Result<(), PipelineError> {
        let code = timed(&mut times.encode, || quantizer.encode(&fv.values)).map_err(|e| stage_err(id, "encode")(e.into()))?;
        records.push(MortonRecord { frame: fv.frame, code });
        features.push(fv);
        Ok(())
    };

    match data {
        ScenarioData::Frames(seq) => {
            let mut est = FlowEstimator::new(cfg.flow.clone()).map_err(|e| stage_err(id, "flow")(e.into()))?;
            let mut stage = OfStage::new(grid, &cfg.of).map_err(stage_err(id, "features"))?;
            for frame in seq.frames() {
                let field = timed(&mut times.flow, || est.push(frame)).map_err(|e| stage_err(id, "flow")(e.into()))?;
                let Some(field) = field else { continue };
                let means = timed(&mut times.grid, || stage.means(&field)).map_err(stage_err(id, "grid"))?;
                let fv = timed(&mut times.features, || stage.features(means)).map_err(stage_err(id, "features"))?;
                emit(fv, &mut times)?;
            }
        }
        ScenarioData::Flow(seq) => {
            let mut stage = OfStage::new(grid, &cfg.of).map_err(stage_err(id, "features"))?;
            for field in seq.fields() {
                let means = timed(&mut times.grid, || stage.means(field)).map_err(stage_err(id, "grid"))?;
                let fv = timed(&mut times.features, || stage.features(means)).map_err(stage_err(id, "features"))?;
                emit(fv, &mut times)?;
            }
        }
        ScenarioData::Saliency(seq) => {
            let feats = timed(&mut times.features, || cnn_stage(seq.maps(), &grid, &cfg.saliency))
                .map_err(stage_err(id, "features"))?;
            for fv in feats {
                emit(fv, &mut times)?;
            }
        }
    }

    let events = timed(&mut times.detect, || detect_stage(&records, &quantizer, &cfg.detect, variant))
        .map_err(stage_err(id, "detect"))?;
    let out = ScenarioOutput {
        id: id.to_string(),
        variant,
        frame_count: data.frame_count(),
        features,
        records,
        events,
        times,
    };
    log_times(&out);
    Ok(out)
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn log_times(out: &ScenarioOutput) {
    let t = &out.times;
    log::info!(
        "{}: {} frames, flow {:.1} ms, grid {:.1} ms, features {:.1} ms, encode {:.1} ms, detect {:.1} ms, {} events",
        out.id,
        out.frame_count,
        ms(t.flow),
        ms(t.grid),
        ms(t.features),
        ms(t.encode),
        ms(t.detect),
        out.events.len()
    );
}

/// Result of a whole run, scenarios ordered by id.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub scenarios: Vec<ScenarioOutput>,
    pub metrics: Option<MetricsReport>,
    /// Frames per second over all scenarios, when timing is enabled.
    pub fps: Option<f64>,
}

impl RunSummary {
    pub fn events(&self) -> Vec<ScenarioEvent> {
        self.scenarios
            .iter()
            .flat_map(|s| {
                s.events.iter().map(|e| ScenarioEvent {
                    scenario_id: s.id.clone(),
                    event: e.clone(),
                })
            })
            .collect()
    }
}

fn write(path: PathBuf, text: &str) -> Result<(), PipelineError> {
    std::fs::write(&path, text).map_err(|source| PipelineError::Output { path, source })
}

fn create_dir(path: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(path).map_err(|source| PipelineError::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the per-scenario feature and Morton streams.
pub fn write_scenario(dir: &Path, out: &ScenarioOutput, quantizer: &Quantizer) -> Result<(), PipelineError> {
    create_dir(dir)?;
    write(dir.join("features.csv"), &format_features(out.variant, &out.features))?;
    let table = MortonTable {
        variant: out.variant,
        quantizer: quantizer.clone(),
        records: out.records.clone(),
    };
    write(dir.join("morton.csv"), &format_morton(&table))
}

/// Runs every configured scenario and writes all artifacts under
/// `cfg.output`: `<id>/features.csv`, `<id>/morton.csv`, `events.csv` and,
/// when annotations are given, `metrics.csv`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let truth = cfg
        .annotations
        .as_ref()
        .map(|p| read_annotations(p).map_err(|e| PipelineError::input("annotations", e)))
        .transpose()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    let mut scenarios = pool.install(|| {
        cfg.scenarios
            .par_iter()
            .map(|input| {
                let data = load_scenario(input, cfg.variant)?;
                run_scenario(&input.id, &data, cfg)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    scenarios.sort_by(|a, b| a.id.cmp(&b.id));

    let fps = if cfg.timing {
        let frames: usize = scenarios.iter().map(|s| s.frame_count).sum();
        let secs: f64 = scenarios.iter().map(|s| s.times.total().as_secs_f64()).sum();
        throughput(frames, secs).ok()
    } else {
        None
    };

    let metrics = match truth {
        Some(truth) => {
            let ids: BTreeSet<&str> = scenarios.iter().map(|s| s.id.as_str()).collect();
            let truth: Vec<_> = truth.into_iter().filter(|t| ids.contains(t.scenario_id.as_str())).collect();
            let predicted: BTreeMap<String, Vec<EventWindow>> =
                scenarios.iter().map(|s| (s.id.clone(), s.events.clone())).collect();
            let mut report = match_and_score(cfg.variant, &predicted, &truth, cfg.iou_threshold)?;
            report.fps = fps;
            Some(report)
        }
        None => None,
    };

    let quantizer = cfg.quantizer.build(cfg.variant)?;
    create_dir(&cfg.output)?;
    for s in &scenarios {
        write_scenario(&cfg.output.join(&s.id), s, &quantizer)?;
    }
    let summary = RunSummary {
        scenarios,
        metrics,
        fps,
    };
    write(cfg.output.join("events.csv"), &format_events(&summary.events()))?;
    if let Some(m) = &summary.metrics {
        write(cfg.output.join("metrics.csv"), &format_metrics(std::slice::from_ref(m)))?;
    }
    if let Some(f) = fps {
        log::info!("throughput {f:.2} frames/s");
    }
    Ok(summary)
}
