use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pointbrush_core::registration::CorrespondenceMode;
use pointbrush_core::synthetic::{generate_synthetic_sequence, SceneSpec};
use pointbrush_core::{PropagationParams, Session};
use tokio::sync::RwLock;

#[derive(Parser)]
#[command(name = "pointbrush", version, about = "Label RGB point-cloud sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a sequence directory.
    Info { dir: PathBuf },
    /// Generate a synthetic sequence with ground-truth masks under truth/.
    Gen {
        spec: PathBuf,
        dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write frame 0's ground truth as its label mask.
        #[arg(long)]
        label_first: bool,
    },
    /// Propagate labels from one frame to another and save the masks.
    Propagate {
        dir: PathBuf,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Write the per-step reports as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Serve the labeling HTTP API for a sequence.
    Serve {
        dir: PathBuf,
        #[arg(long, env = "POINTBRUSH_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Export every frame's labels.
    Export {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Output file; stdout if omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Spatial,
    Color,
}

impl From<Mode> for CorrespondenceMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Spatial => CorrespondenceMode::Spatial,
            Mode::Color => CorrespondenceMode::Color,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
}

/// Overrides for the session's saved propagation parameters.
#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    assign_radius: Option<f64>,
    #[arg(long)]
    max_correspondence_distance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    min_points_per_label: Option<usize>,
    #[arg(long)]
    seed_icp: Option<u64>,
}

impl ParamArgs {
    fn apply(&self, mode: Option<Mode>, base: &PropagationParams) -> PropagationParams {
        let mut p = base.clone();
        if let Some(m) = mode {
            p.icp.mode = m.into();
        }
        if let Some(v) = self.assign_radius {
            p.assign_radius = v;
        }
        if let Some(v) = self.max_correspondence_distance {
            p.icp.max_correspondence_distance = v;
        }
        if let Some(v) = self.max_iterations {
            p.icp.max_iterations = v;
        }
        if let Some(v) = self.min_points_per_label {
            p.min_points_per_label = v;
        }
        if let Some(v) = self.seed_icp {
            p.icp.seed = v;
        }
        p
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Info { dir } => info(dir),
        Command::Gen {
            spec,
            dir,
            frames,
            seed,
            label_first,
        } => gen(spec, dir, frames, seed, label_first),
        Command::Propagate {
            dir,
            from,
            to,
            mode,
            report,
            params,
        } => propagate(dir, from, to, mode, report, params),
        Command::Serve {
            dir,
            port,
            host,
            mode,
            params,
        } => serve(dir, SocketAddr::new(host, port), mode, params),
        Command::Export { dir, format, output } => export(dir, format, output),
    }
}

fn info(dir: PathBuf) -> Result<()> {
    let session = Session::open(&dir).with_context(|| format!("opening {}", dir.display()))?;
    let info = session.info();
    println!("frames: {}", info.frame_count);
    println!("fps: {}", info.fps);
    for (i, entry) in session.sequence().frames().iter().enumerate() {
        let mask = session.mask(i)?;
        let labeled = mask.as_slice().iter().filter(|&&l| l != 0).count();
        println!(
            "{:>6}  {}  t={}us  points={}  labeled={}",
            i, entry.file_name, entry.timestamp_us, entry.point_count, labeled
        );
    }
    println!("palette:");
    for e in session.palette().entries() {
        let [r, g, b] = e.color.0;
        println!("  {:>3}  {}  #{r:02x}{g:02x}{b:02x}", e.id, e.name);
    }
    Ok(())
}

fn gen(spec: PathBuf, dir: PathBuf, frames: usize, seed: u64, label_first: bool) -> Result<()> {
    let text = fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
    let scene: SceneSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
    let synthetic = generate_synthetic_sequence(&scene, frames, seed)?;
    let sequence = synthetic.write_to(&dir)?;
    if label_first {
        sequence.write_mask(0, &synthetic.truth_masks[0])?;
    }
    println!("wrote {} frames to {}", sequence.len(), dir.display());
    Ok(())
}

fn propagate(
    dir: PathBuf,
    from: usize,
    to: usize,
    mode: Option<Mode>,
    report: Option<PathBuf>,
    args: ParamArgs,
) -> Result<()> {
    let mut session = Session::open(&dir).with_context(|| format!("opening {}", dir.display()))?;
    let params = args.apply(mode, session.params());
    params.validate()?;
    let reports = session.run_propagation_with(from, to, &params)?;
    session.save()?;
    for r in &reports {
        for (label, l) in &r.labels {
            let status = match (&l.failed, &l.reason) {
                (true, Some(reason)) => format!("FAILED ({reason})"),
                (true, None) => "FAILED".to_string(),
                (false, _) => format!("rmse={:.6}", l.icp_rmse.unwrap_or(f64::NAN)),
            };
            println!(
                "{} -> {}  label {label}: transferred={} lost={} {status}",
                r.from.unwrap_or(from),
                r.to.unwrap_or(to),
                l.transferred,
                l.lost
            );
        }
    }
    if let Some(path) = report {
        let json = serde_json::to_string_pretty(&reports)?;
        fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn serve(dir: PathBuf, addr: SocketAddr, mode: Option<Mode>, args: ParamArgs) -> Result<()> {
    let mut session = Session::open(&dir).with_context(|| format!("opening {}", dir.display()))?;
    let params = args.apply(mode, session.params());
    session.set_params(params)?;
    session.save()?;
    let app = pointbrush::router(Arc::new(RwLock::new(session)));

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("serving {} on http://{}", dir.display(), listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn export(dir: PathBuf, format: Format, output: Option<PathBuf>) -> Result<()> {
    let session = Session::open(&dir).with_context(|| format!("opening {}", dir.display()))?;
    let labels = session.export()?;
    let text = match format {
        Format::Json => serde_json::to_string(&labels)?,
    };
    match output {
        Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
