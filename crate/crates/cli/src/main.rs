//! Command-line front end: train, render, edit, stitch, eval, and the
//! bundled synthetic scene generator.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad input data, 3 numerical
//! failure during training or rendering.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use descry_core::io;
use descry_core::io::scenedir;
use descry_core::net::OmegaNet;
use descry_core::scene::{DescriptorTable, PointCloud, Scene};
use descry_core::train::{
    self, metrics, FixedFeatureNet, OptimState, TrainConfig, TrainView, DEFAULT_LR_DESC,
    DEFAULT_LR_THETA,
};
use descry_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "descry",
    version,
    about = "Point-based neural renderer: trains per-point descriptors plus a decoder \
             network, then renders, edits, and stitches the learned scenes."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train descriptors and decoder weights on posed images.
    Train(TrainArgs),
    /// Render one camera view from a checkpoint.
    Render(RenderArgs),
    /// Apply a JSON edit script to a checkpoint's point set.
    Edit(EditArgs),
    /// Merge scene B into scene A under a rigid alignment.
    Stitch(StitchArgs),
    /// Score a checkpoint against ground-truth frames.
    Eval(EvalArgs),
    /// Write the built-in synthetic tabletop dataset.
    Synth(SynthArgs),
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Point cloud (PLY, ascii or binary little-endian).
    #[arg(long)]
    scene: PathBuf,
    /// Camera list (JSON array of {id, fx, fy, cx, cy, width, height, R, t}).
    #[arg(long)]
    cams: PathBuf,
    /// Directory of ground-truth frames named {id:04}.png.
    #[arg(long)]
    images: PathBuf,
    /// Checkpoint directory to (over)write.
    #[arg(long)]
    out: PathBuf,
    /// Square patch side in pixels.
    #[arg(long, default_value_t = 256)]
    patch: usize,
    /// Patches drawn per optimizer step.
    #[arg(long, default_value_t = 10)]
    patches_per_iter: usize,
    /// Fraction of images (worst first) trained each epoch.
    #[arg(long, default_value_t = 0.8)]
    mc_ratio: f64,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Decoder channel widths, finest level first.
    #[arg(long, value_parser = parse_widths, default_value = "16,32,64,128")]
    widths: Widths,
    /// Neural descriptor length per point.
    #[arg(long, default_value_t = 8)]
    desc_dim: usize,
    /// Keep only every Q-th point of the cloud.
    #[arg(long)]
    decimate: Option<usize>,
}

#[derive(clap::Args)]
struct RenderArgs {
    /// Checkpoint directory produced by `train`.
    #[arg(long)]
    ckpt: PathBuf,
    /// Camera file and record id, as cams.json:ID.
    #[arg(long)]
    cam: String,
    /// Output PNG path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct EditArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// JSON array of {op: move|remove, box: {min, max}, transform?: {R, t}}.
    #[arg(long)]
    script: PathBuf,
    /// Checkpoint directory for the edited scene.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct StitchArgs {
    /// Base checkpoint; its decoder weights carry over to the output.
    #[arg(long)]
    a: PathBuf,
    /// Checkpoint merged into A.
    #[arg(long)]
    b: PathBuf,
    /// Rigid transform {R, t} taking B's points into A's frame.
    #[arg(long)]
    align: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    cams: PathBuf,
    /// Directory of ground-truth frames named {id:04}.png.
    #[arg(long)]
    images: PathBuf,
    /// Report JSON output path.
    #[arg(long)]
    report: PathBuf,
    /// Which frames count as test frames.
    #[arg(long, value_enum, default_value_t = Protocol::Every10)]
    protocol: Protocol,
}

#[derive(clap::Args)]
struct SynthArgs {
    /// Output directory; receives scene.ply, cams.json and images/.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    views: usize,
    /// Square frame side in pixels.
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Protocol {
    /// Every 10th frame.
    Every10,
    /// Every 10th frame, discarding the five frames on either side of
    /// each 100-frame boundary.
    Every100Discard5,
}

impl Protocol {
    fn selects(self, index: usize) -> bool {
        match self {
            Protocol::Every10 => index % 10 == 0,
            Protocol::Every100Discard5 => {
                let near_boundary = index % 100 < 5 || index % 100 > 94;
                index % 10 == 0 && !near_boundary
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            Protocol::Every10 => "every10",
            Protocol::Every100Discard5 => "every100discard5",
        }
    }
}

type Widths = [usize; descry_core::camera::LEVELS];

fn parse_widths(s: &str) -> std::result::Result<Widths, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != descry_core::camera::LEVELS {
        return Err(format!(
            "expected {} comma-separated widths, got {}",
            descry_core::camera::LEVELS,
            parts.len()
        ));
    }
    let mut out = [0usize; descry_core::camera::LEVELS];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("bad width {part:?}: {e}"))?;
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; only real mistakes exit 1.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let run = match cli.cmd {
        Command::Train(args) => cmd_train(args),
        Command::Render(args) => cmd_render(args),
        Command::Edit(args) => cmd_edit(args),
        Command::Stitch(args) => cmd_stitch(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn frame_path(dir: &Path, id: u32) -> PathBuf {
    dir.join(format!("{id:04}.png"))
}

fn load_views(cams: &Path, images: &Path) -> Result<Vec<TrainView>> {
    let cameras = io::read_cameras(cams)?;
    cameras
        .into_iter()
        .map(|(id, cam)| {
            let img = io::read_image(&frame_path(images, id))?;
            TrainView::new(id, cam, img)
        })
        .collect()
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let (cloud, _colors) = io::read_ply(&args.scene)?;
    let cloud = match args.decimate {
        None | Some(1) => cloud,
        Some(0) => return Err(Error::validation("--decimate must be at least 1")),
        Some(q) => {
            let kept: Vec<_> = cloud
                .positions()
                .iter()
                .step_by(q)
                .copied()
                .collect();
            eprintln!(
                "[train] decimation 1/{q}: {} of {} points kept",
                kept.len(),
                cloud.len()
            );
            PointCloud::new(kept)?
        }
    };
    let views = load_views(&args.cams, &args.images)?;

    let name = args
        .scene
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".to_string());
    let descriptors = DescriptorTable::init_uniform(cloud.len(), args.desc_dim, args.seed)?;
    let mut scene = Scene::new(&name, cloud, descriptors)?;
    let mut net = OmegaNet::<f32>::init(args.desc_dim, args.widths, args.seed)?;
    let feature_net = FixedFeatureNet::<f32>::standard();
    let mut optim = OptimState::new(&net, &scene.descriptors, DEFAULT_LR_THETA, DEFAULT_LR_DESC);
    let cfg = TrainConfig {
        epochs: args.epochs,
        patches_per_iter: args.patches_per_iter,
        patch_width: args.patch,
        patch_height: args.patch,
        mc_ratio: args.mc_ratio,
        seed: args.seed,
        ..TrainConfig::default()
    };

    eprintln!(
        "[train] {} points, {} views, {} epochs, patch {}x{}",
        scene.len(),
        views.len(),
        cfg.epochs,
        cfg.patch_width,
        cfg.patch_height
    );
    let mut last_scores = Vec::new();
    let log = train::fit(
        &mut scene,
        &mut net,
        &feature_net,
        &views,
        &mut optim,
        &cfg,
        |epoch, _, _, scores| {
            eprintln!("[train] epoch {} of {} done", epoch + 1, cfg.epochs);
            last_scores = scores.to_vec();
            Ok(())
        },
    )?;

    scenedir::save_checkpoint(&args.out, &scene, &net)?;
    scenedir::write_scores(&args.out, &last_scores)?;
    scenedir::append_log(&args.out, &log)?;
    if let Some(rec) = log.last() {
        eprintln!("[train] {} steps, final loss {:.6}", rec.step, rec.loss);
    }
    eprintln!("[train] checkpoint written to {}", args.out.display());
    Ok(())
}

/// Splits "cams.json:ID" into the camera file and the record id.
fn parse_cam_ref(spec: &str) -> Result<(PathBuf, u32)> {
    let (path, id) = spec.rsplit_once(':').ok_or_else(|| {
        Error::validation(format!("--cam expects FILE:ID, got {spec:?}"))
    })?;
    let id = id
        .parse::<u32>()
        .map_err(|_| Error::validation(format!("--cam record id {id:?} is not a number")))?;
    Ok((PathBuf::from(path), id))
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let (cam_path, cam_id) = parse_cam_ref(&args.cam)?;
    let (scene, net, _) = scenedir::load_checkpoint(&args.ckpt)?;
    let cameras = io::read_cameras(&cam_path)?;
    let cam = io::camera_by_id(&cameras, cam_id)?;
    let image = descry_core::net::render_scene(&net, &scene, cam)?;
    io::write_image(&args.out, &image)?;
    eprintln!("[render] wrote {}", args.out.display());
    Ok(())
}

fn cmd_edit(args: EditArgs) -> Result<()> {
    let (scene, net, _) = scenedir::load_checkpoint(&args.ckpt)?;
    let ops = io::read_edit_script(&args.script)?;
    let edited = io::apply_edit_script(&scene, &ops)?;
    eprintln!(
        "[edit] {} operations: {} -> {} points",
        ops.len(),
        scene.len(),
        edited.len()
    );
    scenedir::save_checkpoint(&args.out, &edited, &net)?;
    Ok(())
}

fn cmd_stitch(args: StitchArgs) -> Result<()> {
    let (scene_a, net_a, meta_a) = scenedir::load_checkpoint(&args.a)?;
    let (scene_b, net_b, meta_b) = scenedir::load_checkpoint(&args.b)?;
    if meta_a.descriptor_dim != meta_b.descriptor_dim || meta_a.widths != meta_b.widths {
        return Err(Error::validation(format!(
            "checkpoints disagree on architecture: dim {} widths {:?} vs dim {} widths {:?}",
            meta_a.descriptor_dim, meta_a.widths, meta_b.descriptor_dim, meta_b.widths
        )));
    }
    let same_theta = net_a
        .named_tensors()
        .iter()
        .zip(net_b.named_tensors())
        .all(|((_, ta), (_, tb))| {
            ta.data().iter().map(|v| v.to_bits()).eq(tb.data().iter().map(|v| v.to_bits()))
        });
    if !same_theta {
        eprintln!("[stitch] warning: decoder weights differ; keeping {}'s", args.a.display());
    }
    let align = io::read_transform(&args.align)?;
    let merged = descry_core::edit::stitch(&scene_a, &scene_b, &align)?;
    eprintln!(
        "[stitch] {} + {} -> {} points",
        scene_a.len(),
        scene_b.len(),
        merged.len()
    );
    scenedir::save_checkpoint(&args.out, &merged, &net_a)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct FrameReport {
    id: u32,
    psnr: f64,
    ssim: f64,
    feature_loss: f64,
}

#[derive(serde::Serialize)]
struct EvalReport {
    protocol: String,
    frames: Vec<FrameReport>,
    mean_psnr: f64,
    mean_ssim: f64,
    mean_feature_loss: f64,
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (scene, net, _) = scenedir::load_checkpoint(&args.ckpt)?;
    let cameras = io::read_cameras(&args.cams)?;
    let feature_net = FixedFeatureNet::<f32>::standard();

    let mut frames = Vec::new();
    for (index, (id, cam)) in cameras.iter().enumerate() {
        if !args.protocol.selects(index) {
            continue;
        }
        let gt = io::read_image(&frame_path(&args.images, *id))?;
        let rendered = descry_core::net::render_scene(&net, &scene, cam)?;
        frames.push(FrameReport {
            id: *id,
            psnr: metrics::psnr(&rendered, &gt)?,
            ssim: metrics::ssim(&rendered, &gt)?,
            feature_loss: train::perceptual_distance(&feature_net, &rendered, &gt)?,
        });
    }
    if frames.is_empty() {
        return Err(Error::validation(format!(
            "protocol {} selects none of the {} frames",
            args.protocol.name(),
            cameras.len()
        )));
    }

    let n = frames.len() as f64;
    let report = EvalReport {
        protocol: args.protocol.name().to_string(),
        mean_psnr: frames.iter().map(|f| f.psnr).sum::<f64>() / n,
        mean_ssim: frames.iter().map(|f| f.ssim).sum::<f64>() / n,
        mean_feature_loss: frames.iter().map(|f| f.feature_loss).sum::<f64>() / n,
        frames,
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::parse(&args.report, format!("report serialization failed: {e}")))?;
    std::fs::write(&args.report, text).map_err(|e| Error::io(&args.report, e))?;
    eprintln!(
        "[eval] {} frames, mean PSNR {:.3} dB, mean SSIM {:.4}",
        report.frames.len(),
        report.mean_psnr,
        report.mean_ssim
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    if args.size < 16 {
        return Err(Error::validation("--size must be at least 16"));
    }
    let bundle = descry_core::synth::tabletop(args.views, args.size, args.size, args.seed)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let colors: Vec<[u8; 3]> = bundle
        .colors
        .iter()
        .map(|rgb| rgb.map(|v| (v * 255.0).round() as u8))
        .collect();
    io::write_ply(&args.out.join("scene.ply"), &bundle.scene.cloud, Some(&colors), true)?;
    io::write_cameras(&args.out.join("cams.json"), &bundle.cameras)?;
    let img_dir = args.out.join("images");
    std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    for ((id, _), image) in bundle.cameras.iter().zip(&bundle.images) {
        io::write_image(&frame_path(&img_dir, *id), image)?;
    }
    eprintln!(
        "[synth] {} points, {} views at {}x{} written to {}",
        bundle.scene.len(),
        bundle.cameras.len(),
        args.size,
        args.size,
        args.out.display()
    );
    Ok(())
}
