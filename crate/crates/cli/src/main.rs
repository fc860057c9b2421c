use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use idi_core::content::{BindingRole, BindingTarget, ContentKind};
use idi_core::physics::{JointType, Resistance};
use idi_core::slicer::CutPlane;
use idi_core::widgets::{ScreenSubtype, WidgetCategory};

mod commands;

use commands::{CliError, Outcome};

/// Segment scanned meshes, rig joints, bind widgets and content, and replay
/// interactions deterministically.
#[derive(Parser)]
#[command(name = "idi", version)]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a scene from an OBJ or glTF mesh.
    Import(ImportArgs),
    /// Cut a segment in two with a plane.
    Slice(SliceArgs),
    /// Split a segment into its connected pieces.
    Split(SplitArgs),
    /// Spectral segmentation of a segment.
    Segment(SegmentArgs),
    #[command(subcommand)]
    Joint(JointCommand),
    #[command(subcommand)]
    Widget(WidgetCommand),
    #[command(subcommand)]
    Content(ContentCommand),
    /// Run an event script and write trajectory, effects and report.
    Simulate(SimulateArgs),
    /// Check a scene file; exits 1 if it has violations.
    Validate(SceneArg),
    /// Serve the authoring API on 127.0.0.1.
    Serve(ServeArgs),
    #[command(subcommand)]
    Demo(DemoCommand),
}

#[derive(Args)]
pub struct SceneArg {
    pub scene: PathBuf,
}

#[derive(Args)]
pub struct ImportArgs {
    pub mesh: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Scene name (defaults to the mesh file stem).
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args)]
pub struct SliceArgs {
    pub scene: PathBuf,
    #[arg(long)]
    pub segment: String,
    /// Point and normal: px,py,pz,nx,ny,nz
    #[arg(long, allow_hyphen_values = true, value_parser = parse_plane)]
    pub plane: CutPlane,
}

#[derive(Args)]
pub struct SplitArgs {
    pub scene: PathBuf,
    #[arg(long)]
    pub segment: String,
}

#[derive(Args)]
pub struct SegmentArgs {
    pub scene: PathBuf,
    /// Segment to cluster; may be omitted when the scene has one.
    #[arg(long)]
    pub segment: Option<String>,
    /// Pick k from the eigengap (the default).
    #[arg(long, conflicts_with = "k")]
    pub auto: bool,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Weight of geodesic against angular distance.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum JointCommand {
    /// Attach a joint between a base and a movable segment.
    Add(JointAddArgs),
    Remove(JointRemoveArgs),
}

#[derive(Args)]
pub struct JointAddArgs {
    pub scene: PathBuf,
    #[arg(long = "type", value_parser = parse_from_str::<JointType>)]
    pub joint_type: JointType,
    #[arg(long)]
    pub base: String,
    #[arg(long)]
    pub movable: String,
    #[arg(long, default_value = "low", value_parser = parse_from_str::<Resistance>)]
    pub resistance: Resistance,
    /// Infer anchor and axes from the shared interface (the default when
    /// neither is given).
    #[arg(long, conflicts_with_all = ["anchor", "axes"])]
    pub auto_frame: bool,
    /// x,y,z
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec::<3>)]
    pub anchor: Option<[f64; 3]>,
    /// Nine numbers: axis a, axis b, axis c.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec::<9>)]
    pub axes: Option<[f64; 9]>,
}

#[derive(Args)]
pub struct JointRemoveArgs {
    pub scene: PathBuf,
    #[arg(long)]
    pub joint: String,
}

#[derive(Subcommand)]
enum WidgetCommand {
    /// Spawn a knob, screen, slider or button.
    Add(WidgetAddArgs),
    /// Attach a widget to a segment, keeping its world position.
    Attach(WidgetAttachArgs),
    /// Make a widget invisible (it keeps working).
    Hide(WidgetHideArgs),
}

#[derive(Args)]
pub struct WidgetAddArgs {
    pub scene: PathBuf,
    #[arg(long, value_parser = parse_from_str::<WidgetCategory>)]
    pub category: WidgetCategory,
    #[arg(long, value_parser = parse_from_str::<ScreenSubtype>)]
    pub subtype: Option<ScreenSubtype>,
    /// World position x,y,z
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec::<3>)]
    pub at: Option<[f64; 3]>,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Segment to attach to right away.
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub detents: Option<u32>,
    /// Continuous knob instead of detented.
    #[arg(long)]
    pub continuous: bool,
    /// Action name echoed in effects.
    #[arg(long)]
    pub action: Option<String>,
}

#[derive(Args)]
pub struct WidgetAttachArgs {
    pub scene: PathBuf,
    #[arg(long)]
    pub widget: String,
    #[arg(long)]
    pub segment: String,
}

#[derive(Args)]
pub struct WidgetHideArgs {
    pub scene: PathBuf,
    #[arg(long)]
    pub widget: String,
    /// Make it visible again instead.
    #[arg(long)]
    pub show: bool,
}

#[derive(Subcommand)]
enum ContentCommand {
    /// Copy a media file into the scene's content store.
    Import(ContentImportArgs),
    /// Bind content to the scene, a segment or a widget.
    Bind(ContentBindArgs),
}

#[derive(Args)]
pub struct ContentImportArgs {
    pub scene: PathBuf,
    pub file: PathBuf,
    #[arg(long, value_parser = parse_from_str::<ContentKind>)]
    pub kind: Option<ContentKind>,
    /// Free text stored with the item.
    #[arg(long)]
    pub annotation: Option<String>,
}

#[derive(Args)]
pub struct ContentBindArgs {
    pub scene: PathBuf,
    #[arg(long)]
    pub content: String,
    /// scene, segment:<id> or widget:<id>
    #[arg(long, default_value = "scene", value_parser = parse_from_str::<BindingTarget>)]
    pub target: BindingTarget,
    /// playback-source or annotation
    #[arg(long, default_value = "playback-source", value_parser = parse_from_str::<BindingRole>)]
    pub role: BindingRole,
}

#[derive(Args)]
pub struct SimulateArgs {
    pub scene: PathBuf,
    #[arg(long)]
    pub script: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = idi_service::DEFAULT_PORT)]
    pub port: u16,
    /// Scene to open; `POST /save` writes back to it.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = idi_service::DEFAULT_FRAME_EVERY)]
    pub frame_every: u64,
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Write the television mesh, three videos and the event script.
    TvAssets { dir: PathBuf },
}

fn parse_plane(s: &str) -> Result<CutPlane, String> {
    s.parse::<CutPlane>().map_err(|e| e.to_string())
}

fn parse_from_str<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn parse_vec<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let vals: Vec<f64> =
        s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    if !vals.iter().all(|v| v.is_finite()) {
        return Err("values must be finite".into());
    }
    vals.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn dispatch(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Import(a) => commands::import(a),
        Command::Slice(a) => commands::slice(a),
        Command::Split(a) => commands::split(a),
        Command::Segment(a) => commands::segment(a),
        Command::Joint(JointCommand::Add(a)) => commands::joint_add(a),
        Command::Joint(JointCommand::Remove(a)) => commands::joint_remove(a),
        Command::Widget(WidgetCommand::Add(a)) => commands::widget_add(a),
        Command::Widget(WidgetCommand::Attach(a)) => commands::widget_attach(a),
        Command::Widget(WidgetCommand::Hide(a)) => commands::widget_hide(a),
        Command::Content(ContentCommand::Import(a)) => commands::content_import(a),
        Command::Content(ContentCommand::Bind(a)) => commands::content_bind(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Validate(a) => commands::validate(a),
        Command::Serve(a) => commands::serve(a),
        Command::Demo(DemoCommand::TvAssets { dir }) => commands::tv_assets(&dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let json = cli.json;
    match dispatch(cli) {
        Ok(out) => {
            if json {
                println!("{}", out.json);
            } else if !out.text.is_empty() {
                println!("{}", out.text.trim_end());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.message());
            for line in e.details() {
                eprintln!("  {line}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
