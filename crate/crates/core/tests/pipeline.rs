use sfc_event::detect::Direction;
use sfc_event::eval::{crossing_frame_count, generate_crossing, generate_static, temporal_iou, StartSide};
use sfc_event::features::Variant;
use sfc_event::media_io::{format_annotations, write_fseq, FlowSequence, FrameSequence, FseqPayload, GroundTruthEvent};
use sfc_event::pipeline::{run_pipeline, run_scenario, stages, PipelineConfig, ScenarioData};

const W: usize = 112;
const H: usize = 84;

fn cnn_config() -> PipelineConfig {
    PipelineConfig {
        variant: Variant::Cnn,
        timing: false,
        ..PipelineConfig::default()
    }
}

#[test]
fn saliency_variant_finds_crossings() {
    for (side, dir) in [(StartSide::Left, Direction::LeftToRight), (StartSide::Right, Direction::RightToLeft)] {
        let scene = generate_crossing(W, H, crossing_frame_count(W, 4.0), side, 4.0, 5).unwrap();
        let data = ScenarioData::Saliency(scene.saliency);
        let out = run_scenario("s", &data, &cnn_config()).unwrap();
        assert_eq!(out.features.len(), out.frame_count);
        assert_eq!(out.events.len(), 1, "{side}: {:?}", out.events);
        let e = &out.events[0];
        assert_eq!(e.direction, dir);
        let iou = temporal_iou(scene.truth.window().unwrap(), (e.start_frame as i64, e.end_frame as i64));
        assert!(iou >= 0.5, "{side}: IoU {iou}");
    }
    let quiet = generate_static(W, H, 50, 5).unwrap();
    let out = run_scenario("q", &ScenarioData::Saliency(quiet.saliency), &cnn_config()).unwrap();
    assert!(out.events.is_empty(), "{:?}", out.events);
}

#[test]
fn precomputed_flow_matches_frames() {
    let scene = generate_crossing(W, H, 40, StartSide::Left, 5.0, 8).unwrap();
    let cfg = PipelineConfig {
        timing: false,
        ..PipelineConfig::default()
    };
    let fields = stages::flow_fields(scene.frames.frames(), &cfg.flow).unwrap();
    let flow = FlowSequence::new(W, H, fields).unwrap();
    let a = run_scenario("a", &ScenarioData::Frames(scene.frames), &cfg).unwrap();
    let b = run_scenario("a", &ScenarioData::Flow(flow), &cfg).unwrap();
    assert_eq!(a.frame_count, b.frame_count);
    assert_eq!(a.features, b.features);
    assert_eq!(a.records, b.records);
    assert_eq!(a.features.first().map(|f| f.frame), Some(1));
}

fn write_frames(path: &std::path::Path, seq: FrameSequence) {
    write_fseq(&FseqPayload::GrayF32(seq), path).unwrap();
}

#[test]
fn config_file_run_scores_both_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cross = generate_crossing(W, H, crossing_frame_count(W, 5.0), StartSide::Right, 5.0, 4).unwrap();
    let still = generate_static(W, H, 50, 4).unwrap();
    let truth = vec![
        GroundTruthEvent {
            scenario_id: "cross".into(),
            ..cross.truth.clone()
        },
        GroundTruthEvent::none("still"),
    ];
    std::fs::create_dir(dir.join("data")).unwrap();
    for (id, scene) in [("cross", cross), ("still", still)] {
        write_frames(&dir.join(format!("data/{id}.fseq")), scene.frames);
        write_frames(&dir.join(format!("data/{id}_sal.fseq")), scene.saliency.into());
    }
    std::fs::write(dir.join("data/truth.csv"), format_annotations(&truth)).unwrap();
    let config = dir.join("run.toml");
    std::fs::write(
        &config,
        r#"
output = "out"
annotations = "data/truth.csv"
timing = false

[[scenario]]
id = "still"
frames = "data/still.fseq"
saliency = "data/still_sal.fseq"

[[scenario]]
id = "cross"
frames = "data/cross.fseq"
saliency = "data/cross_sal.fseq"
"#,
    )
    .unwrap();

    for (variant, out) in [("of", "out_of"), ("cnn", "out_cnn")] {
        let overrides = [format!("variant={variant}"), format!("output={out}")];
        let cfg = PipelineConfig::load(&config, &overrides).unwrap();
        let summary = run_pipeline(&cfg).unwrap();
        let ids: Vec<&str> = summary.scenarios.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["cross", "still"]);
        let m = summary.metrics.expect("annotations were given");
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (1, 0, 1, 0), "{variant}");
        assert!(m.mean_iou >= 0.5, "{variant}: IoU {}", m.mean_iou);
        assert_eq!(m.fps, None);
        for file in ["events.csv", "metrics.csv", "cross/features.csv", "still/morton.csv"] {
            assert!(dir.join(out).join(file).is_file(), "{variant}: {file} missing");
        }
    }
}
