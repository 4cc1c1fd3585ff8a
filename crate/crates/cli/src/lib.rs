//! Command-line experiment runner for mask-ensemble uncertainty
//! estimation. See `README.md` at the workspace root for the subcommand
//! and configuration reference.

pub mod commands;
pub mod config;

use masksembles_core::error::Error;

use config::{parse_flags, Config};

pub const USAGE: &str = "\
usage: masksembles <command> [--config file] [--key value]...

commands:
  masks             generate a mask pool, write it, print its properties
  train             train a model, write checkpoint + loss history
  eval              evaluate a checkpoint on in-distribution + OOD CSVs
  sweep-transition  single-model -> ensemble transition experiment
  sweep-surface     size/IoU surface over (N, S) grids
  sweep-diversity   pairwise diversity vs accuracy sweep

common flags: --seed <u64>  --out <dir, or file for masks>  --config <key=value file>
";

/// Runs a full command line (without the program name); returns the
/// process exit code: 0 success, 2 validation/usage/file-format error,
/// 3 runtime or training failure.
pub fn run(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(output) => {
            print!("{output}");
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_) | Error::Shape { .. } | Error::Format { .. } | Error::Io(_) => 2,
        Error::NonFinite(_) | Error::Diverged { .. } => 3,
    }
}

fn dispatch(args: &[String]) -> masksembles_core::Result<String> {
    let Some(command) = args.first() else {
        return Err(Error::validation(format!("missing command\n{USAGE}")));
    };
    let flags = parse_flags(&args[1..])?;

    let mut cfg = Config::default();
    // --config loads first so explicit flags override file values.
    for (key, value) in &flags {
        if key == "config" {
            cfg = Config::from_file(std::path::Path::new(value))?;
        }
    }
    for (key, value) in &flags {
        if key != "config" {
            cfg.set(key, value);
        }
    }

    use commands::{check_flag_keys, DATA_KEYS, GRID_KEYS, MODEL_KEYS, TRAIN_KEYS};
    match command.as_str() {
        "masks" => {
            check_flag_keys(&flags, &[commands::masks_cmd::KEYS])?;
            commands::masks_cmd::run(&cfg)
        }
        "train" => {
            check_flag_keys(
                &flags,
                &[
                    commands::train_cmd::KEYS,
                    DATA_KEYS,
                    TRAIN_KEYS,
                    MODEL_KEYS,
                    GRID_KEYS,
                ],
            )?;
            commands::train_cmd::run(&cfg)
        }
        "eval" => {
            check_flag_keys(&flags, &[commands::eval_cmd::KEYS])?;
            commands::eval_cmd::run(&cfg)
        }
        "sweep-transition" => {
            check_flag_keys(
                &flags,
                &[
                    commands::sweep_transition::KEYS,
                    DATA_KEYS,
                    TRAIN_KEYS,
                    GRID_KEYS,
                ],
            )?;
            commands::sweep_transition::run(&cfg)
        }
        "sweep-surface" => {
            check_flag_keys(&flags, &[commands::sweep_surface::KEYS])?;
            commands::sweep_surface::run(&cfg)
        }
        "sweep-diversity" => {
            check_flag_keys(
                &flags,
                &[commands::sweep_diversity::KEYS, DATA_KEYS, TRAIN_KEYS],
            )?;
            commands::sweep_diversity::run(&cfg)
        }
        other => Err(Error::validation(format!(
            "unknown command {other:?}\n{USAGE}"
        ))),
    }
}
