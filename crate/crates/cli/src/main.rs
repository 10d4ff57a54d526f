mod commands;
mod config;
mod exit;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::config::{Settings, KEYS};
use crate::exit::CliError;

const COMMANDS: &[(&str, &str)] = &[
    ("preprocess", "normalize a raw JSONL corpus into <out>/corpus.jsonl"),
    ("train-embeddings", "train skip-gram word embeddings"),
    ("train-pv", "train PV-DM and PV-DBOW paragraph vector models"),
    ("train", "train a classifier (--mode we, pv-we or svm)"),
    ("evaluate", "score trained models on the test corpus"),
    ("predict", "classify --text or an --input JSONL file"),
    (
        "case-study",
        "move carrier sentences to the end and compare predictions",
    ),
    ("synth", "generate a synthetic corpus with known sentiment positions"),
];

fn cli() -> Command {
    let mut cmd = Command::new("sentivec")
        .about("Document sentiment classification with word embeddings and paragraph vectors")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("key = value settings file; flags override it"),
        );
    for (key, default, help) in KEYS {
        let help = if default.is_empty() {
            help.to_string()
        } else {
            format!("{help} [default: {default}]")
        };
        cmd = cmd.arg(
            Arg::new(*key)
                .long(*key)
                .global(true)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .help(help),
        );
    }
    for (name, about) in COMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

fn flags(m: &ArgMatches) -> BTreeMap<String, String> {
    KEYS.iter()
        .filter_map(|(key, _, _)| m.get_one::<String>(key).map(|v| (key.to_string(), v.clone())))
        .collect()
}

fn run(matches: ArgMatches) -> Result<String, CliError> {
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let config = sub.get_one::<String>("config").map(PathBuf::from);
    let settings = Settings::resolve(config.as_deref(), flags(sub))?;
    match name {
        "preprocess" => commands::preprocess(&settings),
        "train-embeddings" => commands::train_embeddings(&settings),
        "train-pv" => commands::train_pv_cmd(&settings),
        "train" => commands::train(&settings),
        "evaluate" => commands::evaluate(&settings),
        "predict" => commands::predict(&settings),
        "case-study" => commands::case_study_cmd(&settings),
        "synth" => commands::synth(&settings),
        other => unreachable!("unregistered subcommand {other}"),
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(matches) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
