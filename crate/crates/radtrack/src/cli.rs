use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use radtrack_core::cfar::{annotate_visibility, cfar_detect, CfarPointSet};
use radtrack_core::grid::{
    doppler_collapse, polar_to_cartesian, CartesianGridSpec, DopplerReduce, GridSpec, RadarTensor,
};
use radtrack_core::metrics::{ApAccumulator, ClassBox, IdBox, IouKind, MotAccumulator, ScoredBox};
use radtrack_core::sim::{corrupt_detections, generate_scenario, render_polar_tensor, CorruptionConfig};
use radtrack_core::targets::{render_heatmap, BevGrid, LabelObject};
use radtrack_core::tracker::MultiClassTracker;

use crate::config::{parse_box_cost, parse_collapse, PipelineConfig};
use crate::error::{CliError, Result};
use crate::formats::{
    read_detections, read_jsonl, read_labels, read_tracks, write_jsonl, DetectionRecord, LabelRecord,
    PointRecord, TrackRecord,
};
use crate::fsutil::write_atomic;
use crate::image::{gray_from_grid, id_color, Rgb};
use crate::rt4d;

#[derive(Debug, Parser)]
#[command(name = "radtrack", version, about = "Radar CFAR, heatmap targets, tracking and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario: labels, detections and optional tensors.
    Simulate(SimulateArgs),
    /// Run CFAR on a tensor and write the detected points.
    Cfar(CfarArgs),
    /// Render the BEV heatmap target of one labelled frame.
    Heatmap(HeatmapArgs),
    /// Track detections over a sequence.
    Track(TrackArgs),
    /// Average precision of detections against labels.
    EvalDet(EvalDetArgs),
    /// CLEAR-MOT and identity metrics of tracks against labels.
    EvalMot(EvalMotArgs),
    /// Draw a BEV overlay of one frame as a PPM image.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Pipeline configuration file (sectioned key = value).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig> {
        match &self.config {
            Some(p) => PipelineConfig::load(p),
            None => Ok(PipelineConfig::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Seed for both the scenario and the detection corruption.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub objects: Option<usize>,
    /// Render polar tensors for the first N frames.
    #[arg(long, default_value_t = 0, value_name = "N")]
    pub tensor_frames: usize,
    /// Emit detections equal to the labels.
    #[arg(long)]
    pub clean: bool,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct CfarArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Input RT4D tensor; polar input is resampled onto the [grid] first.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Output points (JSONL).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Training half-width on every axis.
    #[arg(long)]
    pub n: Option<usize>,
    /// Guard half-width on every axis.
    #[arg(long)]
    pub g: Option<usize>,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    /// Doppler reduction: max, mean or sum.
    #[arg(long)]
    pub collapse: Option<String>,
    /// Labels to annotate with per-object point counts.
    #[arg(long, value_name = "FILE", requires = "labels_out")]
    pub labels: Option<PathBuf>,
    /// Frame of `--labels` the tensor belongs to.
    #[arg(long, default_value_t = 0)]
    pub frame: u64,
    #[arg(long, value_name = "FILE", requires = "labels")]
    pub labels_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_name = "FILE")]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub frame: u64,
    /// Output RT4D tensor; the Doppler axis holds the classes.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also write the class channels stacked top to bottom as a PGM.
    #[arg(long, value_name = "FILE")]
    pub pgm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_name = "FILE")]
    pub dets: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Sequence length when trailing frames have no detections.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Box cost: diou or iou.
    #[arg(long)]
    pub box_cost: Option<String>,
    #[arg(long)]
    pub no_appearance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct ReportArgs {
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub report: ReportFormat,
    /// Also write the JSON summary to this file.
    #[arg(long, value_name = "FILE")]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalDetArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_name = "FILE")]
    pub dets: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub labels: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct EvalMotArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_name = "FILE")]
    pub tracks: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub labels: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub tracks: Option<PathBuf>,
    /// Background tensor, shown as a max projection.
    #[arg(long, value_name = "FILE")]
    pub tensor: Option<PathBuf>,
    /// CFAR points (JSONL) drawn over the background.
    #[arg(long, value_name = "FILE")]
    pub points: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub frame: u64,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Cfar(a) => cfar(&a),
        Command::Heatmap(a) => heatmap(&a),
        Command::Track(a) => track(&a),
        Command::EvalDet(a) => eval_det(&a),
        Command::EvalMot(a) => eval_mot(&a),
        Command::Demo(a) => demo(&a),
    }
}

fn arg_err(e: String) -> CliError {
    CliError::Argument(e)
}

fn checked(cfg: PipelineConfig) -> Result<PipelineConfig> {
    cfg.validate().map_err(arg_err)?;
    Ok(cfg)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(s) = a.seed {
        cfg.scenario.seed = s;
        cfg.corruption.seed = s;
    }
    if let Some(f) = a.frames {
        cfg.scenario.frames = f;
    }
    if let Some(n) = a.objects {
        cfg.scenario.num_objects = n;
    }
    let cfg = checked(cfg)?;
    let scenario = generate_scenario(&cfg.scenario)?;
    let corruption = if a.clean { CorruptionConfig::none() } else { cfg.corruption };

    let mut labels = Vec::new();
    let mut dets = Vec::new();
    for (f, frame) in scenario.frames.iter().enumerate() {
        labels.extend(frame.iter().map(|l| LabelRecord::new(f as u64, l, false)));
        let d = corrupt_detections(frame, &corruption, f as u64)?;
        dets.extend(d.iter().map(|d| DetectionRecord::new(f as u64, d)));
    }
    write_jsonl(&a.out.join("labels.jsonl"), &labels)?;
    write_jsonl(&a.out.join("detections.jsonl"), &dets)?;

    let velocities = scenario.velocities();
    let rendered = a.tensor_frames.min(scenario.frames.len());
    for f in 0..rendered {
        let r = render_polar_tensor(&scenario.frames[f], &velocities, &cfg.polar, &cfg.scenario, f as u64)?;
        rt4d::write(&a.out.join("tensors").join(format!("frame_{f:05}.rt4d")), &r.tensor)?;
        if r.skipped > 0 {
            eprintln!("frame {f}: {} label(s) outside the polar field of view", r.skipped);
        }
    }
    println!(
        "{} frames, {} labels, {} detections, {} tensors",
        scenario.frames.len(),
        labels.len(),
        dets.len(),
        rendered
    );
    Ok(())
}

/// Cartesian tensor of `path`, resampling polar input onto the config grid.
fn load_cartesian(path: &Path, cfg: &PipelineConfig) -> Result<RadarTensor> {
    let t = rt4d::read(path)?;
    match t.spec() {
        GridSpec::Cartesian(_) => Ok(t),
        GridSpec::Polar(_) => Ok(polar_to_cartesian(&t, &cfg.grid, cfg.interpolation)?),
    }
}

fn cfar(a: &CfarArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(n) = a.n {
        cfg.cfar.training = [n; 3];
    }
    if let Some(g) = a.g {
        cfg.cfar.guard = [g; 3];
    }
    if let Some(v) = a.alpha1 {
        cfg.cfar.alpha1 = v;
    }
    if let Some(v) = a.alpha2 {
        cfg.cfar.alpha2 = v;
    }
    if let Some(c) = &a.collapse {
        cfg.cfar.collapse = parse_collapse(c).map_err(arg_err)?;
    }
    let cfg = checked(cfg)?;
    let tensor = load_cartesian(&a.input, &cfg)?;
    let points = cfar_detect(&tensor, &cfg.cfar)?;
    let records: Vec<PointRecord> = points.iter().map(PointRecord::from).collect();
    write_jsonl(&a.out, &records)?;
    println!("{} points", records.len());

    if let (Some(src), Some(dst)) = (&a.labels, &a.labels_out) {
        let recs: Vec<LabelRecord> = read_jsonl(src)?;
        let mut out = Vec::with_capacity(recs.len());
        for (i, r) in recs.iter().enumerate() {
            if r.frame != a.frame {
                out.push(r.clone());
                continue;
            }
            let mut label = [r
                .to_label()
                .map_err(|e| CliError::malformed(src, format!("record {}: {e}", i + 1)))?];
            annotate_visibility(&mut label, &points);
            out.push(LabelRecord::new(r.frame, &label[0], true));
        }
        write_jsonl(dst, &out)?;
    }
    Ok(())
}

fn frame_of<T: Clone>(frames: &[Vec<T>], frame: u64) -> Vec<T> {
    frames.get(frame as usize).cloned().unwrap_or_default()
}

fn heatmap(a: &HeatmapArgs) -> Result<()> {
    let cfg = checked(a.config.load()?)?;
    let labels = frame_of(&read_labels(&a.labels, None)?, a.frame);
    let grid = BevGrid::from_cartesian(&cfg.grid);
    let rendered = render_heatmap(&labels, &grid, &cfg.heatmap)?;
    let hm = &rendered.heatmap;
    // One z slab covering the whole height, classes on the Doppler axis.
    let spec = CartesianGridSpec {
        voxel_size: [
            cfg.grid.extents.z_max - cfg.grid.extents.z_min,
            cfg.grid.voxel_size[1],
            cfg.grid.voxel_size[2],
        ],
        extents: cfg.grid.extents,
        doppler_bins: hm.classes,
    };
    let data = hm.data.iter().map(|v| *v as f32).collect();
    let tensor = RadarTensor::new(GridSpec::Cartesian(spec), data)?;
    rt4d::write(&a.out, &tensor)?;
    if let Some(p) = &a.pgm {
        let mut stacked = Vec::with_capacity(hm.data.len());
        // Class 0 on top: gray_from_grid flips rows, so feed channels last first.
        for c in (0..hm.classes).rev() {
            stacked.extend_from_slice(hm.channel(c));
        }
        let img = gray_from_grid(&stacked, hm.rows * hm.classes, hm.cols, 1.0);
        write_atomic(p, &img.encode_pgm())?;
    }
    println!("{} objects rendered, {} skipped", labels.len() - rendered.skipped, rendered.skipped);
    Ok(())
}

fn track(a: &TrackArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(c) = &a.box_cost {
        cfg.tracker.box_cost = parse_box_cost(c).map_err(arg_err)?;
    }
    if a.no_appearance {
        cfg.tracker.use_appearance = false;
    }
    if a.frames.is_some_and(|f| f as u64 > crate::formats::MAX_FRAMES) {
        return Err(arg_err(format!("--frames must not exceed {}", crate::formats::MAX_FRAMES)));
    }
    let cfg = checked(cfg)?;
    let frames = read_detections(&a.dets, a.frames)?;
    let mut tracker = MultiClassTracker::new(cfg.tracker)?;
    let mut out = Vec::new();
    for (f, dets) in frames.iter().enumerate() {
        let tracks = tracker.step(dets)?;
        out.extend(tracks.iter().map(|t| TrackRecord::new(f as u64, t)));
    }
    write_jsonl(&a.out, &out)?;
    println!("{} frames, {} track boxes", frames.len(), out.len());
    Ok(())
}

/// Machine-readable evaluation summary; fields a subcommand does not
/// compute are null.
#[derive(Debug, Default, Serialize)]
pub struct Summary {
    pub ap_3d: Option<f64>,
    pub ap_bev: Option<f64>,
    pub mota: Option<f64>,
    pub idf1: Option<f64>,
    pub fp: Option<usize>,
    #[serde(rename = "fn")]
    pub fn_: Option<usize>,
    pub ids: Option<usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub classes: BTreeMap<String, ClassAp>,
}

#[derive(Debug, Serialize)]
pub struct ClassAp {
    pub ap_3d: f64,
    pub ap_bev: f64,
}

fn emit(summary: &Summary, text: String, args: &ReportArgs) -> Result<()> {
    let json = serde_json::to_string(summary).expect("summary serializes");
    match args.report {
        ReportFormat::Json => println!("{json}"),
        ReportFormat::Text => print!("{text}"),
    }
    if let Some(p) = &args.summary {
        write_atomic(p, format!("{json}\n").as_bytes())?;
    }
    Ok(())
}

fn threshold(cfg: &PipelineConfig, args: &ReportArgs) -> Result<f64> {
    let t = args.iou_threshold.unwrap_or(cfg.iou_threshold);
    if !(t > 0.0 && t <= 1.0) {
        return Err(arg_err("--iou-threshold must lie in (0, 1]".into()));
    }
    Ok(t)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn eval_det(a: &EvalDetArgs) -> Result<()> {
    let cfg = checked(a.config.load()?)?;
    let thr = threshold(&cfg, &a.report)?;
    let dets = read_detections(&a.dets, None)?;
    let labels = read_labels(&a.labels, None)?;
    let n = dets.len().max(labels.len());
    let mut acc3 = ApAccumulator::new(IouKind::ThreeD, thr);
    let mut accb = ApAccumulator::new(IouKind::Bev, thr);
    for f in 0..n {
        let d: Vec<ScoredBox> = dets
            .get(f)
            .map(|v| {
                v.iter()
                    .map(|d| ScoredBox {
                        bbox: d.bbox,
                        class_id: d.class_id,
                        score: d.score,
                    })
                    .collect()
            })
            .unwrap_or_default();
        let g: Vec<ClassBox> = labels
            .get(f)
            .map(|v| {
                v.iter()
                    .map(|l| ClassBox {
                        bbox: l.bbox,
                        class_id: l.class_id,
                    })
                    .collect()
            })
            .unwrap_or_default();
        acc3.add_frame(&d, &g);
        accb.add_frame(&d, &g);
    }
    let ap3 = acc3.average_precision();
    let apb = accb.average_precision();
    let classes: BTreeMap<String, ClassAp> = ap3
        .iter()
        .map(|(c, v)| {
            (
                c.to_string(),
                ClassAp {
                    ap_3d: *v,
                    ap_bev: apb.get(c).copied().unwrap_or(0.0),
                },
            )
        })
        .collect();
    let summary = Summary {
        ap_3d: mean(ap3.values().copied()),
        ap_bev: mean(apb.values().copied()),
        classes,
        ..Summary::default()
    };
    let mut text = format!("detection AP (IoU >= {thr}, 40-point)\n");
    for (c, v) in &summary.classes {
        text += &format!("  class {c}: AP3D {:.4}  APBEV {:.4}\n", v.ap_3d, v.ap_bev);
    }
    match (summary.ap_3d, summary.ap_bev) {
        (Some(a3), Some(ab)) => text += &format!("  mean:    AP3D {a3:.4}  APBEV {ab:.4}\n"),
        _ => text += "  no ground truth\n",
    }
    emit(&summary, text, &a.report)
}

fn eval_mot(a: &EvalMotArgs) -> Result<()> {
    let cfg = checked(a.config.load()?)?;
    let thr = threshold(&cfg, &a.report)?;
    let tracks = read_tracks(&a.tracks, None)?;
    let labels = read_labels(&a.labels, None)?;
    let n = tracks.len().max(labels.len());
    let mut acc = MotAccumulator::new(thr);
    for f in 0..n {
        let gt: Vec<IdBox> = labels
            .get(f)
            .map(|v| v.iter().map(|l| IdBox { id: l.track_id, bbox: l.bbox }).collect())
            .unwrap_or_default();
        let hyp: Vec<IdBox> = tracks
            .get(f)
            .map(|v| v.iter().map(|t| IdBox { id: t.id, bbox: t.bbox }).collect())
            .unwrap_or_default();
        acc.update(&gt, &hyp)
            .map_err(|e| CliError::malformed(&a.tracks, format!("frame {f}: {e}")))?;
    }
    let s = acc.summary()?;
    let summary = Summary {
        mota: Some(s.mota),
        idf1: Some(s.idf1),
        fp: Some(s.fp),
        fn_: Some(s.fn_),
        ids: Some(s.idsw),
        ..Summary::default()
    };
    let text = format!(
        "tracking (BEV IoU >= {thr})\n  MOTA {:.4}\n  IDF1 {:.4}\n  FP {}  FN {}  IDSW {}  GT {}\n",
        s.mota, s.idf1, s.fp, s.fn_, s.idsw, s.gt
    );
    emit(&summary, text, &a.report)
}

fn demo(a: &DemoArgs) -> Result<()> {
    let cfg = checked(a.config.load()?)?;
    let grid = BevGrid::from_cartesian(&cfg.grid);
    let (rows, cols) = (grid.rows, grid.cols);
    let mut img = match &a.tensor {
        Some(p) => {
            let t = doppler_collapse(&load_cartesian(p, &cfg)?, DopplerReduce::Max);
            let [nz, ny, nx] = t.spec().spatial_dims();
            let mut bev = vec![0.0f64; ny * nx];
            for iz in 0..nz {
                for iy in 0..ny {
                    for ix in 0..nx {
                        let v = (1.0 + t.get(0, iz, iy, ix) as f64).ln();
                        let cell = &mut bev[iy * nx + ix];
                        *cell = cell.max(v);
                    }
                }
            }
            let top = bev.iter().cloned().fold(0.0, f64::max);
            gray_from_grid(&bev, ny, nx, top).to_rgb()
        }
        None => Rgb {
            width: cols,
            height: rows,
            pixels: vec![[0, 0, 0]; rows * cols],
        },
    };
    if let Some(p) = &a.points {
        let recs: Vec<PointRecord> = read_jsonl(p)?;
        let set = CfarPointSet {
            points: recs.iter().map(Into::into).collect(),
        };
        for pt in set.iter() {
            let (u, v) = grid.to_cells(pt.x, pt.y);
            if grid.contains_cells(u, v) {
                let (x, y) = (u.floor() as i64, img.height as i64 - 1 - v.floor() as i64);
                img.line((x, y), (x, y), [255, 255, 255]);
            }
        }
    }
    let labels: Vec<LabelObject> = match &a.labels {
        Some(p) => frame_of(&read_labels(p, None)?, a.frame),
        None => Vec::new(),
    };
    for l in &labels {
        img.draw_box(&grid, &l.bbox, [255, 255, 255]);
    }
    if let Some(p) = &a.tracks {
        for t in frame_of(&read_tracks(p, None)?, a.frame) {
            img.draw_box(&grid, &t.bbox, id_color(t.id));
        }
    }
    write_atomic(&a.out, &img.encode_ppm())?;
    println!("{}x{} image written", img.width, img.height);
    Ok(())
}
