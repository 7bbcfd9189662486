//! Command implementations behind the `ethica-ar` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use ethica_ar_core::classroom::Classroom;
use ethica_ar_core::game::{load_question_bank, QuestionBank, StudentId};
use ethica_ar_core::progress::{
    format_report_table, progress_report, read_events, replay, EventLog, ProgressReport, StoreError,
};
use ethica_ar_core::sim::{simulate, SimProfile, SimVision};
use ethica_ar_core::vision::{detect, render_marker, DetectionParams, GrayImage, MarkerSpec};
use ethica_ar_core::Emotion;
use ethica_ar_service::{AppState, ServiceConfig, ADDR_ENV, DEFAULT_ADDR};

#[derive(Debug, Parser)]
#[command(name = "ethica-ar", version, about = "Emotion flashcard quiz: cards, detection, simulation and service")]
pub struct Cli {
    /// Question bank JSON (defaults to the built-in Justice bank).
    #[arg(long, global = true, value_name = "FILE")]
    pub bank: Option<PathBuf>,
    /// Detection parameters JSON.
    #[arg(long, global = true, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Debug logging.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write printable card images, one PNG per emotion.
    Cards(CardsArgs),
    /// Detect cards in an image file. Exits 1 when nothing is found.
    DetectImage(DetectArgs),
    /// Play one full session per simulated student and write the event log.
    Simulate(SimulateArgs),
    /// Progress reports from an event log.
    Report(ReportArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct CardsArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Pixels per marker module.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..=200))]
    pub module_px: u32,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    pub students: usize,
    /// Probability of raising a probable emotion.
    #[arg(long, default_value_t = 0.8)]
    pub accuracy: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub log: PathBuf,
    /// Submit answers directly instead of rendering and detecting a card frame.
    #[arg(long)]
    pub no_camera: bool,
    /// Replace an existing log file.
    #[arg(long)]
    pub overwrite: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_name = "FILE")]
    pub log: PathBuf,
    #[arg(long, value_name = "ID")]
    pub student: Option<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = ADDR_ENV, default_value = DEFAULT_ADDR)]
    pub addr: String,
    #[arg(long, value_name = "FILE", default_value = "events.jsonl")]
    pub log: PathBuf,
    /// Directory served at `/` (the classroom UI build).
    #[arg(long = "static", value_name = "DIR")]
    pub static_dir: Option<PathBuf>,
}

/// A failed command with the process exit code to report.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: anyhow::Error) -> Self {
        Self { code, error }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::new(2, error)
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn load_bank(path: Option<&Path>) -> anyhow::Result<Arc<QuestionBank>> {
    let bank = match path {
        None => QuestionBank::shipped(),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            load_question_bank(&text).with_context(|| format!("loading bank {}", p.display()))?
        }
    };
    Ok(Arc::new(bank))
}

fn load_params(path: Option<&Path>) -> anyhow::Result<DetectionParams> {
    match path {
        None => Ok(DetectionParams::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            DetectionParams::from_json(&text).with_context(|| format!("loading params {}", p.display()))
        }
    }
}

pub fn run(cli: Cli) -> CmdResult {
    let Cli {
        bank, params, command, ..
    } = cli;
    match command {
        Command::Cards(a) => cards(&a, &mut std::io::stdout()),
        Command::DetectImage(a) => detect_image(&a, &load_params(params.as_deref())?, &mut std::io::stdout()),
        Command::Simulate(a) => simulate_cmd(&a, load_bank(bank.as_deref())?, params.as_deref(), &mut std::io::stdout()),
        Command::Report(a) => report(&a, load_bank(bank.as_deref())?, &mut std::io::stdout()),
        Command::Serve(a) => serve(&a, load_bank(bank.as_deref())?, load_params(params.as_deref())?),
    }
}

fn out(w: &mut impl std::io::Write, text: &str) -> anyhow::Result<()> {
    w.write_all(text.as_bytes()).context("writing output")
}

pub fn cards(args: &CardsArgs, w: &mut impl std::io::Write) -> CmdResult {
    let spec = MarkerSpec::default().with_module_size(args.module_px as usize);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut listing = String::new();
    for card in Emotion::ALL {
        let path = args.out.join(format!("card_{}.png", card.name()));
        render_marker(&spec, card)
            .save_png(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        let _ = writeln!(listing, "{}", path.display());
    }
    let side = spec.rendered_side_px();
    let mut note = String::new();
    let _ = writeln!(note, "dictionary_seed = {}", spec.seed);
    let _ = writeln!(note, "grid_modules = 6");
    let _ = writeln!(note, "module_px = {}", spec.module_size_px);
    let _ = writeln!(note, "quiet_zone_modules = {}", spec.quiet_zone);
    let _ = writeln!(note, "image_px = {side}");
    for card in Emotion::ALL {
        let _ = writeln!(note, "codeword_{} = {:#06x}", card.name(), spec.codeword(card).0);
    }
    let _ = writeln!(
        note,
        "\nPrint with square pixels, scaled so each image is at least 5 cm wide,\n\
         and keep the white margin. Place the card picture beside the marker,\n\
         never over it."
    );
    let sidecar = args.out.join("cards.txt");
    fs::write(&sidecar, note).with_context(|| format!("writing {}", sidecar.display()))?;
    let _ = writeln!(listing, "{}", sidecar.display());
    out(w, &listing)?;
    Ok(ExitCode::SUCCESS)
}

pub fn detect_image(args: &DetectArgs, params: &DetectionParams, w: &mut impl std::io::Write) -> CmdResult {
    let frame = GrayImage::load(&args.file).with_context(|| format!("cannot read image {}", args.file.display()))?;
    let detections = detect(&frame, &MarkerSpec::default(), params);
    if args.json {
        let text = serde_json::to_string_pretty(&detections).context("encoding detections")?;
        out(w, &format!("{text}\n"))?;
    } else if detections.is_empty() {
        out(w, "no cards detected\n")?;
    } else {
        let mut text = String::new();
        for d in &detections {
            let corners: Vec<String> = d.quad.corners.iter().map(|p| format!("({:.1}, {:.1})", p.x, p.y)).collect();
            let _ = writeln!(
                text,
                "{:<9} confidence {:.3}  rotation {}  corners {}",
                d.card.name(),
                d.confidence,
                d.rotation,
                corners.join(" ")
            );
        }
        out(w, &text)?;
    }
    Ok(if detections.is_empty() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

pub fn simulate_cmd(
    args: &SimulateArgs,
    bank: Arc<QuestionBank>,
    params: Option<&Path>,
    w: &mut impl std::io::Write,
) -> CmdResult {
    let profile = SimProfile {
        students: args.students,
        accuracy: args.accuracy,
        seed: args.seed,
    };
    profile.validate().map_err(|e| anyhow!(e))?;
    if args.log.exists() && fs::metadata(&args.log).map(|m| m.len() > 0).unwrap_or(false) {
        if !args.overwrite {
            return Err(anyhow!("{} already exists; pass --overwrite to replace it", args.log.display()).into());
        }
        fs::remove_file(&args.log).with_context(|| format!("removing {}", args.log.display()))?;
    }
    let log = EventLog::open(&args.log, Arc::clone(&bank)).with_context(|| format!("opening {}", args.log.display()))?;
    let mut room = Classroom::new(log);
    let vision = SimVision {
        params: load_params(params)?,
        ..SimVision::default()
    };
    let outcome = simulate(&profile, &mut room, (!args.no_camera).then_some(&vision)).map_err(|e| anyhow!(e))?;
    tracing::info!(
        events = room.log().len(),
        manual_fallbacks = outcome.manual_fallbacks,
        misreads = outcome.misreads,
        "simulation finished"
    );
    if args.json {
        let text = serde_json::to_string_pretty(&outcome).context("encoding reports")?;
        out(w, &format!("{text}\n"))?;
    } else {
        out(w, &format_report_table(&outcome.reports))?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Reports for one student, or every registered student in roster order.
pub fn reports_from_log(
    log: &Path,
    bank: Arc<QuestionBank>,
    student: Option<&str>,
) -> Result<Vec<ProgressReport>, Failure> {
    let events = read_events(log).map_err(|e| anyhow!(e).context(format!("reading {}", log.display())))?;
    let world = replay(&events, bank).map_err(|e| anyhow!(e).context(format!("replaying {}", log.display())))?;
    let ids: Vec<StudentId> = match student {
        Some(id) => vec![StudentId(id.to_string())],
        None => world
            .classes
            .values()
            .flat_map(|r| r.students.iter().map(|s| s.student_id.clone()))
            .collect(),
    };
    ids.iter()
        .map(|id| {
            progress_report(id, &world).map_err(|e| match e {
                StoreError::UnknownEntity(_) => Failure::new(1, anyhow!(e)),
                other => Failure::from(anyhow!(other)),
            })
        })
        .collect()
}

pub fn report(args: &ReportArgs, bank: Arc<QuestionBank>, w: &mut impl std::io::Write) -> CmdResult {
    let reports = reports_from_log(&args.log, bank, args.student.as_deref())?;
    if args.json {
        let text = serde_json::to_string_pretty(&reports).context("encoding reports")?;
        out(w, &format!("{text}\n"))?;
    } else {
        out(w, &format_report_table(&reports))?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn serve(args: &ServeArgs, bank: Arc<QuestionBank>, params: DetectionParams) -> CmdResult {
    let log = EventLog::open(&args.log, bank).with_context(|| format!("opening {}", args.log.display()))?;
    let config = ServiceConfig {
        params,
        static_dir: args.static_dir.clone(),
        ..ServiceConfig::default()
    };
    let state = AppState::new(Classroom::new(log), config);
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .with_context(|| format!("binding {}", args.addr))?;
        let addr = listener.local_addr().context("reading bound address")?;
        tracing::info!(%addr, log = %args.log.display(), "serving");
        println!("listening on http://{addr}");
        ethica_ar_service::serve(listener, state).await.context("serving")
    })?;
    Ok(ExitCode::SUCCESS)
}
