//! `docmt`: corpus generation, two-stage training, translation and
//! evaluation for context-adaptive document translation.

mod args;
mod commands;

use args::CliError;

const COMMANDS: &[(&str, &str)] = &[
    ("gen-corpus", "generate a synthetic document corpus with context labels"),
    ("pretrain", "sentence-level pretraining stage"),
    ("finetune", "document-level finetuning with the context predictor"),
    ("translate", "translate a corpus with a trained checkpoint"),
    ("bleu", "corpus BLEU between hypothesis and reference files"),
    ("stats", "option-selection statistics of a trained predictor"),
    ("timing", "decode-timing report across context policies"),
    ("gradcheck", "finite-difference check of the training gradient"),
    ("ablate", "train and score the component-removal ladder"),
];

fn global_usage() -> String {
    let mut out = String::from("usage: docmt <command> [--config PATH] [--KEY VALUE]...\n\ncommands:\n");
    for (name, about) in COMMANDS {
        out.push_str(&format!("  {name:<11} {about}\n"));
    }
    out.push_str("\nrun `docmt <command> --help` for that command's keys\n");
    out
}

fn real_main() -> i32 {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let Some(cmd) = argv.first().map(String::as_str) else {
        eprint!("{}", global_usage());
        return 2;
    };
    if cmd == "--help" || cmd == "-h" || cmd == "help" {
        print!("{}", global_usage());
        return 0;
    }
    let Some(spec) = commands::spec_for(cmd) else {
        eprintln!("error: unknown command {cmd:?}");
        eprint!("{}", global_usage());
        return 2;
    };
    let inv = match args::parse_args(&spec, &argv[1..]) {
        Ok(inv) => inv,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprint!("{}", spec.usage());
            return 2;
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    if inv.help {
        print!("{}", spec.usage());
        return 0;
    }
    let resolved = match args::resolve(&spec, &inv) {
        Ok(r) => r,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprint!("{}", spec.usage());
            return 2;
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    match commands::run(cmd, &resolved) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprint!("{}", spec.usage());
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn main() {
    std::process::exit(real_main());
}
