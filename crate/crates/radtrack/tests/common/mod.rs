//! Runs the built binary against a small desk-scale configuration.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

/// A grid small enough for quick CFAR runs, with per-axis windows that fit
/// its ten z cells.
pub const SMALL_CONFIG: &str = "\
[polar]
range_bins = 80
range_res = 0.5
azimuth_bins = 41
azimuth_offset_deg = -20
elevation_bins = 13
elevation_offset_deg = -6
doppler_bins = 4

[grid]
x_min = 5
x_max = 35
y_min = -10
y_max = 10
z_min = -2
z_max = 2

[cfar]
training = 6
guard = 2
training_z = 3
guard_z = 1

[scenario]
spawn_x_min = 10
spawn_x_max = 30
spawn_y_min = -6
spawn_y_max = 6
fov_x_min = 7
fov_x_max = 33
fov_y_min = -8
fov_y_max = 8
num_objects = 4
";

pub fn radtrack(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radtrack"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs `args` and panics with stderr unless it exits 0.
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = radtrack(dir, args);
    assert!(
        out.status.success(),
        "radtrack {:?} failed with {:?}: {}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// One invocation of every subcommand, each consuming what earlier ones
/// wrote. Returns `(name, args, files written)`.
pub fn pipeline_steps() -> Vec<(&'static str, Vec<&'static str>, Vec<&'static str>)> {
    vec![
        (
            "simulate",
            vec!["simulate", "--config", "small.cfg", "--out", "sim", "--seed", "3", "--frames", "20", "--tensor-frames", "2"],
            vec!["sim/labels.jsonl", "sim/detections.jsonl", "sim/tensors/frame_00000.rt4d", "sim/tensors/frame_00001.rt4d"],
        ),
        (
            "cfar",
            vec![
                "cfar", "--config", "small.cfg", "--input", "sim/tensors/frame_00001.rt4d", "--out", "points.jsonl",
                "--labels", "sim/labels.jsonl", "--frame", "1", "--labels-out", "counted.jsonl",
            ],
            vec!["points.jsonl", "counted.jsonl"],
        ),
        (
            "heatmap",
            vec!["heatmap", "--config", "small.cfg", "--labels", "counted.jsonl", "--frame", "1", "--out", "heat.rt4d", "--pgm", "heat.pgm"],
            vec!["heat.rt4d", "heat.pgm"],
        ),
        (
            "track",
            vec!["track", "--config", "small.cfg", "--dets", "sim/detections.jsonl", "--out", "tracks.jsonl"],
            vec!["tracks.jsonl"],
        ),
        (
            "eval-det",
            vec!["eval-det", "--config", "small.cfg", "--dets", "sim/detections.jsonl", "--labels", "sim/labels.jsonl", "--report", "json", "--summary", "det.json"],
            vec!["det.json"],
        ),
        (
            "eval-mot",
            vec!["eval-mot", "--config", "small.cfg", "--tracks", "tracks.jsonl", "--labels", "sim/labels.jsonl", "--summary", "mot.json"],
            vec!["mot.json"],
        ),
        (
            "demo",
            vec![
                "demo", "--config", "small.cfg", "--labels", "sim/labels.jsonl", "--tracks", "tracks.jsonl",
                "--tensor", "sim/tensors/frame_00001.rt4d", "--points", "points.jsonl", "--frame", "1", "--out", "demo.ppm",
            ],
            vec!["demo.ppm"],
        ),
    ]
}

/// A fresh directory holding the small configuration.
pub fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.cfg"), SMALL_CONFIG).unwrap();
    dir
}
