use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};
use pvm_harness::config::KEYS;
use pvm_harness::metrics::{block_centres, read_columns, smooth_curve};
use pvm_harness::plot::line_plot;
use pvm_harness::train::{EPOCHS_CSV, TEST_CSV, TRAIN_CSV};
use pvm_harness::{HarnessError, Result, RunConfig};

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn with_config_args(mut cmd: Command) -> Command {
    cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .short('c')
            .value_name("FILE")
            .help("key = value configuration file"),
    );
    for (key, help) in KEYS {
        let name: &'static str = Box::leak(flag_name(key).into_boxed_str());
        cmd = cmd.arg(Arg::new(*key).long(name).value_name("VALUE").help(*help));
    }
    cmd
}

fn cli() -> Command {
    Command::new("pvm")
        .about("Predictive vision model: data generation, training, evaluation and the saccade demo")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_config_args(Command::new("gen-data").about("Render training and test sets")))
        .subcommand(with_config_args(Command::new("train").about("Train, evaluating after every epoch")))
        .subcommand(with_config_args(Command::new("eval").about("Evaluate a checkpoint on the test sets")))
        .subcommand(with_config_args(Command::new("demo").about("Closed-loop saccade demo on a static scene")))
        .subcommand(
            with_config_args(Command::new("plot").about("Draw smoothed error curves of a run as P6 images"))
                .arg(
                    Arg::new("compare")
                        .long("compare")
                        .value_name("DIR")
                        .help("second run directory drawn in the same plot"),
                )
                .arg(
                    Arg::new("window")
                        .long("window")
                        .value_name("FRAMES")
                        .value_parser(clap::value_parser!(usize))
                        .help("smoothing window (default: one epoch of training frames)"),
                )
        )
}

/// Defaults, then the config file, then PVM_SEED, then flags.
fn build_config(m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => RunConfig::from_file(Path::new(path))?,
        None => RunConfig::default(),
    };
    if let Ok(seed) = std::env::var("PVM_SEED") {
        cfg.set("seed", &seed)
            .map_err(|e| HarnessError::Config(format!("PVM_SEED: {e}")))?;
    }
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn plot(cfg: &RunConfig, m: &ArgMatches) -> Result<()> {
    let window = m
        .get_one::<usize>("window")
        .copied()
        .unwrap_or(cfg.train_sets.max(1) * cfg.frames_per_set)
        .max(1);
    let colors = [[0.8, 0.1, 0.1], [0.1, 0.3, 0.8]];
    let mut dirs: Vec<PathBuf> = vec![cfg.output_dir.clone()];
    if let Some(c) = m.get_one::<String>("compare") {
        dirs.push(c.into());
    }
    for (file, column) in [(TRAIN_CSV, "mse_image"), (TRAIN_CSV, "mse_all"), (TEST_CSV, "mse_image")] {
        let mut curves = Vec::new();
        for d in &dirs {
            let col = read_columns(d.join(file), &[column])?.remove(0);
            curves.push(smooth_curve(&col, window.min(col.len().max(1))));
        }
        let series: Vec<(&[f64], [f32; 3])> = curves.iter().zip(colors).map(|(c, col)| (c.as_slice(), col)).collect();
        let img = line_plot(&series, 640, 360);
        let out = cfg
            .output_dir
            .join(format!("{}_{column}.ppm", file.trim_end_matches(".csv")));
        img.save_ppm(&out)?;
        println!("wrote {}", out.display());
        for (d, c) in dirs.iter().zip(&curves) {
            if file == TRAIN_CSV {
                let epochs: Vec<String> = block_centres(c, window).iter().map(|v| format!("{v:.6}")).collect();
                println!("  {} {column} per epoch: {}", d.display(), epochs.join(" "));
            }
        }
    }
    let summary = cfg.output_dir.join(EPOCHS_CSV);
    if let Ok(text) = std::fs::read_to_string(&summary) {
        print!("{text}");
    }
    Ok(())
}

fn run(m: &ArgMatches) -> Result<()> {
    let (name, sub) = m.subcommand().expect("subcommand required");
    let cfg = build_config(sub)?;
    match name {
        "gen-data" => {
            let (train, test) = pvm_harness::generate_data(&cfg)?;
            println!(
                "wrote {} training sets to {} and {} test sets to {}",
                train.len(),
                cfg.train_dir.display(),
                test.len(),
                cfg.test_dir.display()
            );
        }
        "train" => {
            let s = pvm_harness::train(&cfg)?;
            for e in &s.epochs {
                println!(
                    "epoch {}: train mse_image {:.6} mse_all {:.6} | test mse_image {:.6} mse_all {:.6}",
                    e.epoch, e.train.mse_image, e.train.mse_all, e.test.mse_image, e.test.mse_all
                );
            }
        }
        "eval" => {
            let r = pvm_harness::eval(&cfg)?;
            println!("test mse_image {:.6} mse_all {:.6} over {} frames", r.mse_image, r.mse_all, r.frames);
        }
        "demo" => {
            let s = pvm_harness::demo(&cfg)?;
            println!(
                "{} steps, {} saccades, {} fixation switches ({:.2} per 1000 steps)",
                s.steps,
                s.triggers,
                s.switches,
                s.switch_rate()
            );
        }
        "plot" => plot(&cfg, sub)?,
        _ => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let matches = cli().get_matches();
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
