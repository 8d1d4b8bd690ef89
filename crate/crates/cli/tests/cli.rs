use std::path::Path;
use std::process::{Command, Output};

use sfc_event::media_io::{write_fseq, FrameSequence, FseqPayload};

fn sfc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfc-event"))
        .current_dir(dir)
        .args(["--quiet"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = sfc(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn stage_commands_match_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--output", "scene", "--speed", "6", "--side", "right", "--seed", "3"]);
    ok(d, &["run", "--config", "scene/config.toml", "--set", "timing=false"]);
    let id = "crossing_right_6_3";

    ok(d, &["flow", "--frames", "scene/frames.fseq", "--output", "flow.fseq"]);
    ok(d, &["of-features", "--flow", "flow.fseq", "--output", "features.csv", "--means", "means.csv"]);
    ok(d, &["encode", "--features", "features.csv", "--output", "morton.csv"]);
    ok(d, &["detect", "--morton", "morton.csv", "--scenario", id, "--output", "events.csv"]);
    ok(d, &["eval", "--events", "events.csv", "--annotations", "scene/truth.csv", "--output", "metrics.csv"]);

    let run = d.join("scene/out");
    assert_eq!(read(d.join("features.csv")), read(run.join(id).join("features.csv")));
    assert_eq!(read(d.join("morton.csv")), read(run.join(id).join("morton.csv")));
    assert_eq!(read(d.join("events.csv")), read(run.join("events.csv")));
    assert_eq!(read(d.join("metrics.csv")), read(run.join("metrics.csv")));

    let events = read(d.join("events.csv"));
    assert_eq!(events.lines().count(), 2, "{events}");
    assert!(events.contains(",right_to_left,"), "{events}");
    assert!(read(d.join("means.csv")).starts_with("frame,c1u,c1v,"));
}

#[test]
fn saliency_stage_matches_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--output", "scene", "--speed", "5"]);
    ok(d, &["run", "--config", "scene/config.toml", "--set", "variant=cnn", "--set", "timing=false"]);
    ok(d, &["cnn-features", "--saliency", "scene/saliency.fseq", "--output", "features.csv"]);
    ok(d, &["encode", "--features", "features.csv", "--output", "morton.csv"]);
    let run = d.join("scene/out/crossing_left_5_1");
    assert_eq!(read(d.join("features.csv")), read(run.join("features.csv")));
    assert_eq!(read(d.join("morton.csv")), read(run.join("morton.csv")));
}

#[test]
fn stripes_plot_counts_marks() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let morton = "# variant=of dims=6 bits=8 ranges=0:180,0:180,0:180,0:180,0:180,0:180\nframe,code\n4,0\n5,1\n6,2\n7,3\n8,0\n";
    std::fs::write(d.join("m.csv"), morton).unwrap();
    ok(d, &["stripes", "--morton", "m.csv", "--output", "p.svg", "--no-timestamp"]);
    ok(d, &["stripes", "--morton", "m.csv", "--output", "p.csv", "--format", "csv"]);
    assert_eq!(read(d.join("p.svg")).matches("<circle").count(), 3);
    assert_eq!(read(d.join("p.csv")).lines().count(), 4);

    std::fs::write(d.join("bad.csv"), morton.replace("7,3", "7,x")).unwrap();
    let out = sfc(d, &["stripes", "--morton", "bad.csv", "--output", "q.svg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6"));
}

#[test]
fn empty_sequence_runs_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let empty = FrameSequence::new(96, 96, Vec::new()).unwrap();
    write_fseq(&FseqPayload::Gray8(empty), d.join("empty.fseq")).unwrap();
    std::fs::write(
        d.join("run.toml"),
        "[[scenario]]\nid = \"e\"\nframes = \"empty.fseq\"\n",
    )
    .unwrap();
    ok(d, &["run", "--config", "run.toml"]);
    assert_eq!(read(d.join("out/events.csv")).lines().count(), 1);
    let morton = read(d.join("out/e/morton.csv"));
    assert_eq!(morton.lines().count(), 2, "{morton}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("cnn.toml"), "variant = \"cnn\"\n[[scenario]]\nid = \"a\"\nframes = \"f.fseq\"\n").unwrap();
    assert_eq!(sfc(d, &["run", "--config", "cnn.toml"]).status.code(), Some(1));
    assert_eq!(sfc(d, &["run", "--set", "flow.winsize=4"]).status.code(), Some(1));
    assert_eq!(sfc(d, &["no-such-command"]).status.code(), Some(1));

    std::fs::write(d.join("junk.fseq"), b"XXXX0000").unwrap();
    let out = sfc(d, &["flow", "--frames", "junk.fseq", "--output", "o.fseq"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
    assert_eq!(sfc(d, &["--help"]).status.code(), Some(0));
}
