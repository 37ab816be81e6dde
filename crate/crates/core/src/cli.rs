//! Command-line front end. Exit codes: 0 success, 1 acceptance failure,
//! 2 usage, configuration or I/O error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::bench::{
    builtin_mesh, default_suite, run_benchmark, BenchOptions, BenchReport, NoiseModel, ObjectLibrary, SceneSpec,
    SuiteParams, BUILTIN_OBJECTS,
};
use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::geometry::pose_error;
use crate::model::cache::{cache_key, load_or_build};
use crate::model::{load_mesh, CropParams, MeshModel};
use crate::pipeline::report::strip_timing;
use crate::pipeline::{Mode, PipelineConfig, Status};
use crate::sequence::{write_sequence, FrameSequence};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ACCEPTANCE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "segpose", version, about = "Multi-hypothesis ICP pose estimation from segmented depth")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// 2 mm depth noise, exact masks.
    Clean,
    /// No noise at all.
    Noiseless,
    /// Masks dilated by 8 px (false positives, lower precision).
    Dilate,
    /// Masks eroded by 8 px (false negatives, lower recall).
    Erode,
    /// Smooth 5 mm depth distortion on object surfaces.
    Deform,
}

impl Suite {
    pub fn noise(self) -> NoiseModel {
        let d = NoiseModel::default();
        match self {
            Suite::Clean => d,
            Suite::Noiseless => NoiseModel::none(),
            Suite::Dilate => NoiseModel { mask_dilate: 8, ..d },
            Suite::Erode => NoiseModel { mask_erode: 8, ..d },
            Suite::Deform => NoiseModel { deformation_amplitude: 0.005, deformation_wavelength: 0.08, ..d },
        }
    }

    fn name(self) -> &'static str {
        match self {
            Suite::Clean => "clean",
            Suite::Noiseless => "noiseless",
            Suite::Dilate => "dilate",
            Suite::Erode => "erode",
            Suite::Deform => "deform",
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Precompute the crop cache of one or more meshes.
    Crops {
        meshes: Vec<PathBuf>,
        /// Optional `[crops]` section with views, sample_count, leaf, seed.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "crops")]
        output: PathBuf,
        /// Class id of the first mesh; later meshes count up.
        #[arg(long, default_value_t = 1)]
        class: u8,
        #[arg(long)]
        views: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        leaf: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate poses over a frame sequence directory.
    Run {
        /// `[pipeline]`, `[crops]` and one `[object]` section per class.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Report directory; reports go to stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Accepted for uniformity with the other commands; `run` draws no random numbers.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Evaluate on synthetic scenes against ground truth.
    Bench {
        /// Scene files; alternatively use --suite.
        specs: Vec<PathBuf>,
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[arg(long, default_value_t = 60)]
        scenes: usize,
        #[arg(long, default_value_t = 3)]
        frames: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Optional `[pipeline]`, `[crops]` and `[object]` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Exit 1 below this success rate.
        #[arg(long, default_value_t = 0.8)]
        min_success_rate: f64,
    },
    /// Render a synthetic scene into a frame sequence directory plus a run config.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Suite::Clean)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        scene_index: usize,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run_command(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn run_command(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Crops { meshes, config, output, class, views, samples, leaf, seed } => {
            let cfg = match &config {
                Some(p) => ConfigFile::load(p)?,
                None => ConfigFile::parse("")?,
            };
            let mut params = crop_params(&cfg)?;
            params.n_views = views.unwrap_or(params.n_views);
            params.sample_count = samples.unwrap_or(params.sample_count);
            params.leaf = leaf.unwrap_or(params.leaf);
            params.seed = seed.unwrap_or(params.seed);
            cmd_crops(&meshes, class, &params, &output)
        }
        Command::Run { config, input, output, workers, seed: _, format } => {
            cmd_run(&config, &input, output.as_deref(), workers, format)
        }
        Command::Bench { specs, suite, scenes, frames, seed, config, output, workers, format, min_success_rate } => {
            let cfg = match &config {
                Some(p) => ConfigFile::load(p)?,
                None => ConfigFile::parse("")?,
            };
            let specs = if !specs.is_empty() {
                specs.iter().map(|p| SceneSpec::load(p)).collect::<Result<Vec<_>>>()?
            } else if let Some(s) = suite {
                default_suite(&suite_params(s, scenes, frames, seed))
            } else {
                return Err(Error::Config("no scene specs given (pass files or --suite)".into()));
            };
            cmd_bench(&specs, &cfg, config.as_deref(), output.as_deref(), workers, format, min_success_rate)
        }
        Command::Synth { output, spec, suite, scene_index, frames, seed } => {
            let mut spec = match spec {
                Some(p) => SceneSpec::load(&p)?,
                None => {
                    let params = suite_params(suite, scene_index + 1, frames.unwrap_or(3), seed);
                    default_suite(&params).swap_remove(scene_index)
                }
            };
            if let Some(f) = frames {
                spec.frames = f;
            }
            cmd_synth(&spec, &output)
        }
    }
}

pub fn suite_params(suite: Suite, scenes: usize, frames: usize, seed: u64) -> SuiteParams {
    SuiteParams {
        name: suite.name().into(),
        scenes,
        frames,
        seed,
        noise: suite.noise(),
        ..Default::default()
    }
}

fn crop_params(cfg: &ConfigFile) -> Result<CropParams> {
    let d = CropParams::default();
    let Some(s) = cfg.section("crops") else {
        return Ok(d);
    };
    Ok(CropParams {
        n_views: s.parse_or("views", d.n_views)?,
        sample_count: s.parse_or("sample_count", d.sample_count)?,
        leaf: s.parse_or("leaf", d.leaf)?,
        seed: s.parse_or("seed", d.seed)?,
    })
}

fn summary_line(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key}={value}");
}

pub fn cmd_crops(meshes: &[PathBuf], first_class: u8, params: &CropParams, output: &Path) -> Result<i32> {
    if meshes.is_empty() {
        return Err(Error::Config("no mesh files given".into()));
    }
    let mut total = 0;
    for (i, path) in meshes.iter().enumerate() {
        let class = first_class
            .checked_add(i as u8)
            .ok_or_else(|| Error::Config("class ids exceed 255".into()))?;
        let mesh = load_mesh(path, class)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
        let dir = if meshes.len() == 1 { output.to_path_buf() } else { output.join(stem) };
        let model = load_or_build(&mesh, params, &dir)?;
        total += model.crops.len();
        println!(
            "class={class} mesh={} dir={} crops={} model_points={} key={}",
            path.display(),
            dir.display(),
            model.crops.len(),
            model.cloud.len(),
            cache_key(&mesh, params)
        );
    }
    let mut s = String::new();
    summary_line(&mut s, "meshes", meshes.len());
    summary_line(&mut s, "crops", total);
    print!("{s}");
    Ok(EXIT_OK)
}

/// Objects declared in `[object]` sections: `class`, then `mesh = <path>` or
/// `shape = <builtin name>`, and optionally `crops = <cache dir>`. Paths are
/// relative to the config file.
pub fn load_objects(cfg: &ConfigFile, base: &Path, params: &CropParams) -> Result<ObjectLibrary> {
    let mut lib = ObjectLibrary::default();
    for s in cfg.sections_named("object") {
        let class: u8 = s.require("class")?;
        let mesh: MeshModel = match (s.get("mesh"), s.get("shape")) {
            (Some(m), _) => load_mesh(&base.join(m), class)?,
            (None, Some(name)) => builtin_mesh(name, class)
                .ok_or_else(|| Error::Config(format!("unknown shape {name:?}")))?,
            _ => return Err(Error::Config(format!("[object] at line {}: needs mesh or shape", s.line))),
        };
        let model = match s.get("crops") {
            Some(dir) => load_or_build(&mesh, params, &base.join(dir))?,
            None => crate::model::build_object_model(&mesh, params)?,
        };
        if lib.models.contains_key(&class) {
            return Err(Error::Config(format!("class {class} declared twice")));
        }
        lib.insert(mesh, model)?;
    }
    Ok(lib)
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

const RUN_CSV_HEADER: &str = "frame,class_id,mode,status,crop_id,qw,qx,qy,qz,tx,ty,tz,score,pos_var,ms_segment,ms_acquire,ms_track";

fn report_csv(frame: usize, o: &crate::pipeline::ObjectReport) -> String {
    let pose = o.pose.map_or(vec!["nan".to_string(); 7], |p| p.to_seven().iter().map(|v| format!("{v:.9}")).collect());
    format!(
        "{frame},{},{},{},{},{},{:.6},{},{:.3},{:.3},{:.3}",
        o.class_id,
        o.mode.as_str(),
        o.status,
        o.crop_id.map_or("".into(), |c| c.to_string()),
        pose.join(","),
        o.score,
        o.position_variance.map_or("".into(), |v| format!("{v:.6e}")),
        o.ms_segment,
        o.ms_acquire,
        o.ms_track
    )
}

pub fn cmd_run(config: &Path, input: &Path, output: Option<&Path>, workers: Option<usize>, format: Format) -> Result<i32> {
    let cfg_file = ConfigFile::load(config)?;
    let mut cfg = PipelineConfig::from_config(&cfg_file)?;
    if let Some(w) = workers {
        cfg.workers = w;
        cfg.validate()?;
    }
    let params = CropParams { n_views: cfg.n_crops, ..crop_params(&cfg_file)? };
    let lib = load_objects(&cfg_file, &base_dir(config), &params)?;
    if lib.models.is_empty() {
        return Err(Error::Config(format!("{}: no [object] sections", config.display())));
    }
    let seq = FrameSequence::open(input, cfg.frame_dt)?;
    let truth = seq.truth()?;
    let mut pipeline = lib.pipeline(cfg, seq.intrinsics)?;

    let mut lines = Vec::new();
    if format == Format::Csv {
        lines.push(RUN_CSV_HEADER.to_string());
    }
    let mut modes: BTreeMap<u8, Mode> = BTreeMap::new();
    let (mut acquired, mut tracked, mut errors, mut transitions, mut frame_errors) = (0, 0, 0, 0, 0);
    let (mut ms_acq, mut ms_trk, mut ms_frame) = (Vec::new(), Vec::new(), Vec::new());
    let (mut evaluated, mut successes) = (0usize, 0usize);
    for i in 0..seq.len() {
        let t = Instant::now();
        let frame = match seq.load_frame(i) {
            Ok(f) => f,
            Err(e) => {
                log::error!("frame {i}: {e}");
                frame_errors += 1;
                continue;
            }
        };
        let report = match pipeline.process_frame(&frame) {
            Ok(r) => r,
            Err(e) => {
                log::error!("frame {i}: {e}");
                frame_errors += 1;
                continue;
            }
        };
        ms_frame.push(t.elapsed().as_secs_f64() * 1e3);
        for o in &report.objects {
            let prev = modes.insert(o.class_id, o.mode).unwrap_or(Mode::Acquisition);
            if prev != o.mode {
                transitions += 1;
                log::info!("frame {i} class {}: {} -> {}", o.class_id, prev.as_str(), o.mode.as_str());
            }
            match &o.status {
                Status::Acquired => acquired += 1,
                Status::Tracked => tracked += 1,
                Status::Error(_) => errors += 1,
                _ => {}
            }
            if o.ms_acquire > 0.0 {
                ms_acq.push(o.ms_acquire);
            }
            if o.ms_track > 0.0 {
                ms_trk.push(o.ms_track);
            }
            if let (Some(p), Some((_, _, t))) = (o.pose, truth.iter().find(|(f, c, _)| *f == i && *c == o.class_id)) {
                evaluated += 1;
                successes += pose_error(&p, t).is_success() as usize;
            }
            lines.push(match format {
                Format::Text => o.to_line(report.frame),
                Format::Csv => report_csv(report.frame, o),
            });
        }
    }

    let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
    match output {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let name = match format {
                Format::Text => "reports.txt",
                Format::Csv => "reports.csv",
            };
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        None => print!("{body}"),
    }
    let reports = lines.len() - (format == Format::Csv) as usize;
    let mut s = String::new();
    summary_line(&mut s, "frames", seq.len());
    summary_line(&mut s, "frame_errors", frame_errors);
    summary_line(&mut s, "reports", reports);
    summary_line(&mut s, "acquired", acquired);
    summary_line(&mut s, "tracked", tracked);
    summary_line(&mut s, "errors", errors);
    summary_line(&mut s, "transitions", transitions);
    if evaluated > 0 {
        summary_line(&mut s, "evaluated", evaluated);
        summary_line(&mut s, "success_rate", format!("{:.4}", successes as f64 / evaluated as f64));
    }
    summary_line(&mut s, "ms_acquire_mean", format!("{:.3}", mean(&ms_acq)));
    summary_line(&mut s, "ms_track_mean", format!("{:.3}", mean(&ms_trk)));
    summary_line(&mut s, "ms_frame_mean", format!("{:.3}", mean(&ms_frame)));
    print!("{s}");
    Ok(EXIT_OK)
}

fn bench_text(report: &BenchReport) -> String {
    report
        .records
        .iter()
        .map(|r| {
            let e = r.error.map_or("position_error=nan geodesic_angle=nan".to_string(), |e| {
                format!("position_error={:.6} geodesic_angle={:.4}", e.position_error, e.geodesic_angle)
            });
            format!(
                "scene={} frame={} class={} mode={} status={} score={:.6} visibility={:.4} success={} {e} ms_acquire={:.3} ms_track={:.3}\n",
                r.scene,
                r.frame,
                r.class_id,
                r.mode.as_str(),
                r.status,
                r.score,
                r.visibility,
                r.success as u8,
                r.ms_acquire,
                r.ms_track
            )
        })
        .collect()
}

pub fn cmd_bench(
    specs: &[SceneSpec],
    cfg_file: &ConfigFile,
    config_path: Option<&Path>,
    output: Option<&Path>,
    workers: Option<usize>,
    format: Format,
    min_success_rate: f64,
) -> Result<i32> {
    if specs.is_empty() {
        return Err(Error::Config("empty scene list".into()));
    }
    let mut cfg = PipelineConfig::from_config(cfg_file)?;
    let params = CropParams { n_views: cfg.n_crops, ..crop_params(cfg_file)? };
    let lib = if cfg_file.sections_named("object").next().is_some() {
        load_objects(cfg_file, &config_path.map(base_dir).unwrap_or_default(), &params)?
    } else {
        let meshes = BUILTIN_OBJECTS.iter().map(|&(c, n)| builtin_mesh(n, c).expect("builtin")).collect();
        ObjectLibrary::build(meshes, &params)?
    };
    let workers = workers.unwrap_or(cfg.workers);
    cfg.workers = 1;
    let options = BenchOptions { workers, ..Default::default() };
    let report = run_benchmark(specs, &lib, &cfg, &options)?;
    if let Some(dir) = output {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (name, body) = match format {
            Format::Csv => ("records.csv", report.to_csv()),
            Format::Text => ("records.txt", bench_text(&report)),
        };
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        let p = dir.join("summary.txt");
        fs::write(&p, report.summary.to_text()).map_err(|e| Error::io(&p, e))?;
    }
    let pass = report.summary.success_rate >= min_success_rate;
    let mut s = report.summary.to_text();
    summary_line(&mut s, "scenes", specs.len());
    summary_line(&mut s, "min_success_rate", min_success_rate);
    summary_line(&mut s, "pass", pass as u8);
    print!("{s}");
    Ok(if pass { EXIT_OK } else { EXIT_ACCEPTANCE })
}

pub fn cmd_synth(spec: &SceneSpec, output: &Path) -> Result<i32> {
    spec.validate()?;
    let mut lib = ObjectLibrary::default();
    let mut cfg_text = String::from("[pipeline]\n");
    for o in &spec.objects {
        let name = BUILTIN_OBJECTS
            .iter()
            .find(|(c, _)| *c == o.class_id)
            .map(|(_, n)| *n)
            .or((o.class_id == crate::bench::suite::SYMMETRIC_CLASS).then_some("cylinder"))
            .ok_or_else(|| Error::Config(format!("class {} has no built-in shape", o.class_id)))?;
        let mesh = builtin_mesh(name, o.class_id).expect("builtin");
        // rendering only needs the mesh; crops are built by `run`
        lib.meshes.insert(o.class_id, mesh);
        let _ = write!(cfg_text, "[object]\nclass = {}\nshape = {name}\ncrops = crops/{name}\n", o.class_id);
    }
    let frames = output.join("frames");
    write_sequence(&frames, spec, &lib)?;
    let write = |name: &str, text: &str| {
        let p = output.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("run.cfg", &cfg_text)?;
    write("scene.txt", &spec.to_config_text())?;
    let mut s = String::new();
    summary_line(&mut s, "frames", spec.frames);
    summary_line(&mut s, "objects", spec.objects.len());
    summary_line(&mut s, "sequence", frames.display());
    summary_line(&mut s, "config", output.join("run.cfg").display());
    print!("{s}");
    Ok(EXIT_OK)
}

/// Report lines with timing fields removed; used to compare runs.
pub fn comparable(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("ms_"))
        .map(strip_timing)
        .collect::<Vec<_>>()
        .join("\n")
}
