use std::process::ExitCode;

use clap::{Parser, Subcommand};
use palletproj_cli::commands::{self, exit_code};

/// Pallet detection and localization in equirectangular warehouse images.
#[derive(Parser, Debug)]
#[command(name = "palletproj", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ray-cast a scene file into a panorama plus ground-truth poses.
    Render(commands::RenderArgs),
    /// Write a preset scene file.
    Scene(commands::SceneArgs),
    /// Resample a panorama onto a plane.
    Project(commands::ProjectArgs),
    /// Find pallets on the shelf-front plane.
    Detect(commands::DetectArgs),
    /// Refine an initial pose: yaw from the horizontal plane, then depth.
    Localize(commands::LocalizeArgs),
    /// Print the default pipeline config.
    DefaultConfig(commands::DefaultConfigArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_PARSE } else { commands::EXIT_OK });
        }
    };
    let result = commands::init_threads(std::env::var("PALLETPROJ_THREADS").ok()).and_then(|()| match &cli.command {
        Command::Render(a) => commands::render(a),
        Command::Scene(a) => commands::scene(a),
        Command::Project(a) => commands::project(a),
        Command::Detect(a) => commands::detect(a),
        Command::Localize(a) => commands::localize(a),
        Command::DefaultConfig(a) => commands::default_config(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
