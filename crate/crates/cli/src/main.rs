mod args;
mod commands;
mod output;

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Parser;
use limsup_core::ErrorClass;
use serde_json::{json, Map, Value};

use args::Cli;
use output::Artifacts;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let started = Instant::now();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let name = cli.command.name();

    let mut config = commands::defaults(name);
    config.extend(cli.command.flag_map()?);
    if let Some(seed) = cli.seed {
        config.insert("seed".into(), json!(seed));
    }
    if let Some(path) = &cli.config {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.extend(config_from_file(file, name)?);
    }
    let seed = match config.get("seed") {
        Some(v) => v
            .as_u64()
            .context("seed must be a 64-bit unsigned integer")?,
        None => 0,
    };
    config.insert("seed".into(), json!(seed));

    let mut artifacts = Artifacts::create(&cli.out_dir)?;
    let mut resolved = commands::run(name, Value::Object(config), &mut artifacts)?;
    if let Value::Object(map) = &mut resolved {
        map.insert("seed".into(), json!(seed));
    }
    let manifest = artifacts.finish(name, resolved, seed, started.elapsed())?;
    eprintln!(
        "[limsup] wrote {} artifacts and {} to {}",
        manifest.artifacts.len(),
        output::MANIFEST,
        cli.out_dir.display()
    );
    Ok(())
}

/// A plain config object, or a run manifest whose `config` is replayed.
fn config_from_file(file: Value, command: &str) -> anyhow::Result<Map<String, Value>> {
    let Value::Object(mut map) = file else {
        bail!("config file must hold a JSON object");
    };
    if let (Some(Value::String(recorded)), Some(_)) = (map.get("command"), map.get("config")) {
        if recorded != command {
            bail!("manifest was written by `{recorded}`, not `{command}`");
        }
        return match map.remove("config") {
            Some(Value::Object(config)) => Ok(config),
            _ => bail!("manifest config must be a JSON object"),
        };
    }
    Ok(map)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<limsup_core::Error>() {
            return match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Numeric => 3,
                ErrorClass::Resource => 4,
            };
        }
        if cause.is::<std::io::Error>() {
            return 1;
        }
    }
    2
}
