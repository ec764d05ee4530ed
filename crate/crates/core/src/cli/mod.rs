//! The `mlcraist` command line.
//!
//! Exit codes: `0` success, `2` bad configuration or arguments, `3`
//! non-finite values during training, `4` unreadable or missing files.
//!
//! `MLCRAIST_THREADS` bounds the number of images processed concurrently by
//! `infer`; setting `MLCRAIST_DETERMINISTIC` (to anything but `0`) forces a
//! single thread. Training always runs on one thread.

pub mod config_file;
mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::blocks::AfbMode;
use crate::checkpoint;
use crate::error::{Error, Result};
use crate::image_io::{load_rgb, save_rgb};
use crate::metrics::{evaluate, Scores};
use crate::model::{param_delta, Ablation, MlCraist, ModelConfig};
use crate::ops::bicubic_resize;
use crate::tensor::Tensor;
use crate::train::data::png_files;
use crate::train::{degrade, train, Dataset, TrainConfig};
use crate::wavelet::{dwt2_haar, idwt2_haar, SubBandSet};

pub use manifest::{MetricRow, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "mlcraist", version, about = "Wavelet cross-attention super-resolution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model on a directory of high-resolution PNGs.
    Train(TrainArgs),
    /// Upscale images with a checkpoint (or plain bicubic).
    Infer(InferArgs),
    /// Score restored images against ground truth.
    Eval(EvalArgs),
    /// Print parameter counts for a checkpoint or configuration.
    Inspect(InspectArgs),
    /// Write the Haar sub-bands of an image.
    Dwt(DwtArgs),
}

#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    /// key = value configuration file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scale: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub n_scatb: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub dwt_levels: Option<usize>,
    #[arg(long)]
    pub afb_mode: Option<AfbMode>,
    /// none, afb-add, afb-concat, no-cab, no-lhfib or dwt-level1.
    #[arg(long)]
    pub ablation: Option<Ablation>,
    /// The 48-channel preset as the starting point.
    #[arg(long)]
    pub lite: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Directory of high-resolution PNG images.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for model.ckpt, loss.log and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional held-out PNGs scored against bicubic after training.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Reuse the configuration recorded in a previous run's manifest.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_halving_period: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub log_every: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Bicubic,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Input PNG files or directories of PNGs.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Required with --baseline; otherwise must match the checkpoint.
    #[arg(long)]
    pub scale: Option<usize>,
    /// Ignore the model and emit plain upscaling.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Restored images.
    #[arg(long)]
    pub sr: PathBuf,
    /// Ground-truth images with matching file names.
    #[arg(long)]
    pub gt: PathBuf,
    /// Pixels removed from each side before scoring; use the scale factor.
    #[arg(long, default_value_t = 0)]
    pub border: usize,
    /// Where to write the CSV results.
    #[arg(long, default_value = "results.csv")]
    pub results: PathBuf,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct DwtArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Reconstruct and report the maximum error.
    #[arg(long)]
    pub verify: bool,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::Format(_) => 2,
        Error::NonFinite(_) => 3,
        Error::Io { .. } | Error::Image { .. } => 4,
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut out = std::io::stdout().lock();
    match execute(cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Train(a) => cmd_train(a, out),
        Command::Infer(a) => cmd_infer(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Inspect(a) => cmd_inspect(a, out),
        Command::Dwt(a) => cmd_dwt(a, out),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Worker threads for image-parallel work.
pub fn thread_count() -> usize {
    let deterministic = std::env::var("MLCRAIST_DETERMINISTIC").is_ok_and(|v| !v.is_empty() && v != "0");
    if deterministic {
        return 1;
    }
    std::env::var("MLCRAIST_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn resolve_model(args: &ModelArgs, train: &mut TrainConfig) -> Result<ModelConfig> {
    let mut cfg = if args.lite {
        ModelConfig::lite(4)
    } else {
        ModelConfig::default()
    };
    if let Some(path) = &args.config {
        config_file::apply(&config_file::read(path)?, &mut cfg, train)?;
    }
    overlay_model(args, &mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn overlay_model(args: &ModelArgs, cfg: &mut ModelConfig) {
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { cfg.$f = v; })* };
    }
    set!(scale, width, n_scatb, heads, window, dwt_levels, afb_mode);
    if let Some(a) = args.ablation {
        *cfg = cfg.clone().with_ablation(a);
    }
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut tc = TrainConfig::default();
    let mut mc = match &a.manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            tc = m.train;
            m.model
        }
        None => resolve_model(&a.model, &mut tc)?,
    };
    overlay_model(&a.model, &mut mc);
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => { $(if let Some(v) = a.$flag { tc.$field = v; })* };
    }
    set!(iters => total_iters, batch_size => batch_size, patch_size => patch_size,
         lr => base_lr, seed => seed, log_every => log_every);
    if a.lr_halving_period.is_some() {
        tc.lr_halving_period = a.lr_halving_period;
    }
    mc.validate()?;
    tc.validate()?;

    let data = Dataset::from_dir(&a.data, mc.scale)?;
    data.check_patch(tc.patch_size)?;
    create_dir(&a.out)?;
    let started_at = now_secs();
    let log_path = a.out.join("loss.log");
    let mut log = std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut model = MlCraist::new(mc.clone(), tc.seed)?;
    writeln!(
        out,
        "training {} parameters for {} iterations on {} images",
        model.param_count(),
        tc.total_iters,
        data.len()
    )
    .map_err(io_err)?;
    train(&mut model, &data, &tc, |line| {
        writeln!(log, "{line}").map_err(|e| Error::io(&log_path, e))?;
        writeln!(out, "{line}").map_err(io_err)
    })?;
    let ckpt = a.out.join("model.ckpt");
    checkpoint::save(&model, &ckpt)?;

    let mut metrics = Vec::new();
    if let Some(val) = &a.val {
        for path in png_files(val)? {
            let hr = load_rgb(&path)?;
            let lr = degrade(&hr, mc.scale)?;
            let hr = crate::train::data::crop_to_multiple(&hr, mc.scale)?;
            let (h, w) = (hr.shape().h(), hr.shape().w());
            let sr = clamp01(&model.forward(&lr)?);
            let bic = clamp01(&bicubic_resize(&lr, h, w)?);
            let name = file_name(&path);
            metrics.push(MetricRow::new(&name, evaluate(&sr, &hr, mc.scale)?));
            metrics.push(MetricRow::new(&format!("{name} (bicubic)"), evaluate(&bic, &hr, mc.scale)?));
        }
        print_table(out, &metrics)?;
    }
    let manifest = RunManifest {
        model: mc,
        train: tc.clone(),
        seed: tc.seed,
        started_at,
        finished_at: now_secs(),
        checkpoint: ckpt.clone(),
        loss_log: log_path,
        metrics,
    };
    manifest.write(&a.out.join("manifest.json"))?;
    writeln!(out, "wrote {}", ckpt.display()).map_err(io_err)
}

fn clamp01(t: &Tensor) -> Tensor {
    t.map(|v| v.clamp(0.0, 1.0))
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            files.extend(png_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn cmd_infer(a: InferArgs, out: &mut dyn Write) -> Result<()> {
    let model = match (&a.baseline, &a.checkpoint) {
        (Some(Baseline::Bicubic), _) => None,
        (None, Some(path)) => Some(checkpoint::load(path)?),
        (None, None) => return Err(Error::Config("--checkpoint is required unless --baseline is given".into())),
    };
    let scale = match (&model, a.scale) {
        (Some(m), Some(s)) if s != m.scale() => {
            return Err(Error::Config(format!(
                "checkpoint upscales by {} but --scale {s} was requested",
                m.scale()
            )))
        }
        (Some(m), _) => m.scale(),
        (None, Some(s)) if s >= 1 => s,
        (None, _) => return Err(Error::Config("--baseline needs --scale".into())),
    };
    let files = expand_inputs(&a.input)?;
    create_dir(&a.out)?;
    let upscale = |path: &PathBuf| -> Result<PathBuf> {
        let lr = load_rgb(path)?;
        let (h, w) = (lr.shape().h(), lr.shape().w());
        let sr = match &model {
            Some(m) => m.forward(&lr)?,
            None => bicubic_resize(&lr, scale * h, scale * w)?,
        };
        let dst = a.out.join(file_name(path));
        save_rgb(&dst, &sr)?;
        Ok(dst)
    };
    let threads = thread_count().min(files.len()).max(1);
    let results: Vec<Result<PathBuf>> = if threads == 1 {
        files.iter().map(upscale).collect()
    } else {
        let chunk = files.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = files
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(upscale).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("inference worker panicked"))
                .collect()
        })
    };
    for r in results {
        writeln!(out, "wrote {}", r?.display()).map_err(io_err)?;
    }
    Ok(())
}

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn print_table(out: &mut dyn Write, rows: &[MetricRow]) -> Result<()> {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
    writeln!(out, "{:<width$}  {:>9}  {:>8}  {:>8}", "name", "psnr_y", "ssim_y", "epi").map_err(io_err)?;
    for r in rows {
        writeln!(
            out,
            "{:<width$}  {:>9}  {:>8}  {:>8}",
            r.name,
            fmt_metric(r.psnr_y),
            fmt_metric(r.ssim_y),
            fmt_metric(r.epi)
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let files = png_files(&a.sr)?;
    if files.is_empty() {
        return Err(Error::Config(format!("no PNG images in {}", a.sr.display())));
    }
    let mut rows = Vec::new();
    for path in &files {
        let name = file_name(path);
        let gt_path = a.gt.join(&name);
        if !gt_path.is_file() {
            return Err(Error::io(
                &gt_path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no ground-truth counterpart"),
            ));
        }
        let (sr, gt) = (load_rgb(path)?, load_rgb(&gt_path)?);
        if sr.shape() != gt.shape() {
            return Err(Error::Config(format!(
                "{name}: restored image is {} but ground truth is {}",
                sr.shape(),
                gt.shape()
            )));
        }
        rows.push(MetricRow::new(&name, evaluate(&sr, &gt, a.border)?));
    }
    let n = rows.len() as f64;
    let mean = MetricRow::new(
        "mean",
        Scores {
            psnr_y: rows.iter().map(|r| r.psnr_y).sum::<f64>() / n,
            ssim_y: rows.iter().map(|r| r.ssim_y).sum::<f64>() / n,
            epi: rows.iter().map(|r| r.epi).sum::<f64>() / n,
        },
    );
    rows.push(mean);
    print_table(out, &rows)?;
    let mut csv = String::from("name,psnr_y,ssim_y,epi\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.name, fmt_metric(r.psnr_y), fmt_metric(r.ssim_y), fmt_metric(r.epi)));
    }
    checkpoint::write_atomic(&a.results, csv.as_bytes())?;
    writeln!(out, "wrote {}", a.results.display()).map_err(io_err)
}

fn cmd_inspect(a: InspectArgs, out: &mut dyn Write) -> Result<()> {
    let model = match &a.checkpoint {
        Some(path) => checkpoint::load(path)?,
        None => MlCraist::new(resolve_model(&a.model, &mut TrainConfig::default())?, 0)?,
    };
    let cfg = &model.config;
    writeln!(
        out,
        "scale {} width {} blocks {} heads {} window {} fusion {} cross-attention {} wavelet-branches {} levels {}",
        cfg.scale, cfg.width, cfg.n_scatb, cfg.heads, cfg.window, cfg.afb_mode, cfg.use_cab, cfg.use_lhfib, cfg.dwt_levels
    )
    .map_err(io_err)?;
    for (name, n) in model.module_counts() {
        writeln!(out, "{name:<10} {n:>10}").map_err(io_err)?;
    }
    writeln!(out, "{:<10} {:>10}", "total", model.param_count()).map_err(io_err)?;
    for (sa, sb) in [(2, 3), (3, 4)] {
        writeln!(out, "delta x{sa}->x{sb} {}", param_delta(sa, sb, cfg.width)).map_err(io_err)?;
    }
    Ok(())
}

/// Map a band to `[0, 1]` for display: LL by `1 / 2^level`, detail bands
/// by `0.5 + v / (2 max|v|)`, an all-zero detail band to flat 0.5.
fn normalize_band(t: &Tensor, detail: bool, level: usize) -> (Tensor, f32, f32) {
    if !detail {
        let k = 1.0 / (1u32 << level) as f32;
        return (t.map(|v| v * k), k, 0.0);
    }
    let m = t.data().iter().fold(0f32, |a, &v| a.max(v.abs()));
    if m == 0.0 {
        return (Tensor::full(t.shape(), 0.5), 0.0, 0.5);
    }
    let k = 0.5 / m;
    (t.map(|v| 0.5 + v * k), k, 0.5)
}

fn pad_even(t: &Tensor) -> Result<Tensor> {
    let [_, _, h, w] = t.dims();
    crate::ops::pad_replicate(t, h + h % 2, w + w % 2)
}

fn cmd_dwt(a: DwtArgs, out: &mut dyn Write) -> Result<()> {
    if a.levels == 0 {
        return Err(Error::Config("--levels must be at least 1".into()));
    }
    let img = load_rgb(&a.input)?;
    create_dir(&a.out)?;
    let mut current = img.clone();
    let mut levels: Vec<(SubBandSet, [usize; 2])> = Vec::new();
    for level in 1..=a.levels {
        let [_, _, h, w] = current.dims();
        if h < 2 || w < 2 {
            return Err(Error::Config(format!("image too small for {} levels", a.levels)));
        }
        let bands = dwt2_haar(&pad_even(&current)?)?;
        for (name, band, detail) in [
            ("LL", &bands.ll, false),
            ("LH", &bands.lh, true),
            ("HL", &bands.hl, true),
            ("HH", &bands.hh, true),
        ] {
            let (shown, k, offset) = normalize_band(band, detail, level);
            let path = a.out.join(format!("level{level}_{name}.png"));
            save_rgb(&path, &shown)?;
            writeln!(out, "{} scale {k} offset {offset}", path.display()).map_err(io_err)?;
        }
        current = bands.ll.clone();
        levels.push((bands, [h, w]));
    }
    if a.verify {
        let mut rec = current;
        for (bands, [h, w]) in levels.iter().rev() {
            let full = idwt2_haar(&SubBandSet {
                ll: rec,
                ..bands.clone()
            })?;
            rec = crate::ops::crop(&full, *h, *w)?;
        }
        let err = rec.max_abs_diff(&img);
        writeln!(out, "max reconstruction error {err:e}").map_err(io_err)?;
        if err >= 1e-5 {
            return Err(Error::InvalidArgument(format!("reconstruction error {err:e} exceeds 1e-5")));
        }
    }
    Ok(())
}
