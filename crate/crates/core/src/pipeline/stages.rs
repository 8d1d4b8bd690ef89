//! Stage functions shared by the streaming runner and the per-stage
//! commands, so both paths compute the same values.

use std::time::{Duration, Instant};

use crate::detect::{activations_from_codes, detect_events, DetectError, DetectParams, EventWindow};
use crate::features::{saliency_vector, CellFeatureVector, FeatureError, OfExtractor, OfParams, SaliencyParams, Variant};
use crate::flow::{FlowError, FlowEstimator, FlowField, FlowParams};
use crate::grid::{cell_mean_flow, cell_mean_saliency, FlowMeans, GridError, RoiGrid};
use crate::image::GrayImage;
use crate::zorder::{MortonRecord, Quantizer, ZorderError};

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Code(#[from] ZorderError),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

/// Wall-clock time spent in each stage of one scenario.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimes {
    pub flow: Duration,
    pub grid: Duration,
    pub features: Duration,
    pub encode: Duration,
    pub detect: Duration,
}

impl StageTimes {
    pub fn total(&self) -> Duration {
        self.flow + self.grid + self.features + self.encode + self.detect
    }
}

pub(crate) fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}

/// Flow between each pair of consecutive frames.
pub fn flow_fields(frames: &[GrayImage], params: &FlowParams) -> Result<Vec<FlowField>, StageError> {
    let mut est = FlowEstimator::new(params.clone())?;
    let mut out = Vec::with_capacity(frames.len().saturating_sub(1));
    for f in frames {
        out.extend(est.push(f)?);
    }
    Ok(out)
}

/// Streaming flow-feature stage. Field `k` describes the motion from frame
/// `k` to frame `k + 1` and is labelled with the later frame, so a stream
/// of `N` frames gives rows for frames `1..N`.
pub struct OfStage {
    grid: RoiGrid,
    extractor: OfExtractor,
    next_frame: usize,
}

impl OfStage {
    pub fn new(grid: RoiGrid, params: &OfParams) -> Result<Self, StageError> {
        Ok(Self {
            grid,
            extractor: OfExtractor::new(params.clone())?,
            next_frame: 1,
        })
    }

    pub fn means(&mut self, field: &FlowField) -> Result<FlowMeans, StageError> {
        let m = cell_mean_flow(field, &self.grid, self.next_frame)?;
        self.next_frame += 1;
        Ok(m)
    }

    pub fn features(&mut self, means: FlowMeans) -> Result<CellFeatureVector, StageError> {
        Ok(self.extractor.push(means)?)
    }
}

pub fn of_stage(fields: &[FlowField], grid: RoiGrid, params: &OfParams) -> Result<(Vec<FlowMeans>, Vec<CellFeatureVector>), StageError> {
    let mut stage = OfStage::new(grid, params)?;
    let means = fields.iter().map(|f| stage.means(f)).collect::<Result<Vec<_>, _>>()?;
    let feats = means.iter().map(|m| stage.features(*m)).collect::<Result<_, _>>()?;
    Ok((means, feats))
}

/// Saliency features, one row per map starting at frame 0.
pub fn cnn_stage(maps: &[GrayImage], grid: &RoiGrid, params: &SaliencyParams) -> Result<Vec<CellFeatureVector>, StageError> {
    params.validate()?;
    maps.iter()
        .enumerate()
        .map(|(t, map)| Ok(saliency_vector(&cell_mean_saliency(map, grid, t)?, params)))
        .collect()
}

pub fn encode_stage(features: &[CellFeatureVector], quantizer: &Quantizer) -> Result<Vec<MortonRecord>, StageError> {
    features
        .iter()
        .map(|f| {
            Ok(MortonRecord {
                frame: f.frame,
                code: quantizer.encode(&f.values)?,
            })
        })
        .collect()
}

pub fn detect_stage(
    records: &[MortonRecord],
    quantizer: &Quantizer,
    params: &DetectParams,
    variant: Variant,
) -> Result<Vec<EventWindow>, StageError> {
    params.validate()?;
    let frames = activations_from_codes(records, quantizer)?;
    Ok(detect_events(&frames, params, variant))
}
