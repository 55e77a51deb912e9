//! End-to-end tests of the compiled binary: exit codes, usage errors,
//! config layering, artifact round-trips, and run-to-run determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::OnceLock;

fn docmt(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_docmt"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn docmt")
}

fn run_ok(args: &[&str]) -> String {
    let out = docmt(args, &[]);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const MODEL: &[&str] = &[
    "--model.d_model",
    "16",
    "--model.n_heads",
    "2",
    "--model.d_ff",
    "16",
    "--model.enc_layers",
    "1",
    "--model.dec_layers",
    "1",
];

const BUDGET: &[&str] = &[
    "--train.max_steps",
    "25",
    "--train.warmup",
    "10",
    "--train.batch_size",
    "8",
    "--train.log_every",
    "0",
];

const SIZES: &[&str] = &[
    "--synth.n_docs",
    "8",
    "--synth.doc_len",
    "3",
    "--synth.vocab_size",
    "30",
];

/// One generated corpus trained through both stages, shared by every test
/// that needs a checkpoint. Nothing here mutates the fixture files.
struct Fixture {
    _dir: tempfile::TempDir,
    corpus: String,
    vocab: String,
    labels: String,
    pre: String,
    fine: String,
}

fn fixture() -> &'static Fixture {
    static FIX: OnceLock<Fixture> = OnceLock::new();
    FIX.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
        let corpus = path("train.txt");
        let vocab = path("vocab.txt");
        let labels = path("labels.txt");
        let pre = path("pre.ckpt");
        let fine = path("fine.ckpt");
        run_ok(&[
            &["gen-corpus", "--seed", "9"],
            SIZES,
            &["--io.corpus", &corpus, "--io.vocab", &vocab, "--io.labels", &labels],
        ]
        .concat());
        run_ok(&[
            &[
                "pretrain",
                "--seed",
                "9",
                "--io.corpus",
                &corpus,
                "--io.vocab",
                &vocab,
                "--io.ckpt",
                &pre,
            ],
            MODEL,
            BUDGET,
        ]
        .concat());
        // Architecture comes from the checkpoint; model flags stay off.
        run_ok(&[
            &[
                "finetune",
                "--seed",
                "9",
                "--io.corpus",
                &corpus,
                "--io.vocab",
                &vocab,
                "--io.init",
                &pre,
                "--io.ckpt",
                &fine,
            ],
            BUDGET,
        ]
        .concat());
        Fixture { _dir: dir, corpus, vocab, labels, pre, fine }
    })
}

#[test]
fn no_arguments_exit_with_usage() {
    let out = docmt(&[], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("usage: docmt"));
}

#[test]
fn help_lists_commands_and_exits_zero() {
    let out = docmt(&["--help"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["gen-corpus", "pretrain", "finetune", "translate", "bleu", "ablate"] {
        assert!(text.contains(name), "help misses {name}");
    }
}

#[test]
fn unknown_command_is_rejected() {
    let out = docmt(&["frobnicate"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("frobnicate"));
}

#[test]
fn unknown_flag_is_rejected() {
    let out = docmt(&["gen-corpus", "--bogus", "1"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("bogus"));
}

#[test]
fn positional_arguments_are_rejected() {
    let out = docmt(&["bleu", "hyp.txt"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_value_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let out = docmt(
        &[
            "gen-corpus",
            "--seed",
            "abc",
            "--io.corpus",
            &path("c.txt"),
            "--io.vocab",
            &path("v.txt"),
            "--io.labels",
            &path("l.txt"),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("seed"));
}

#[test]
fn translate_without_checkpoint_is_a_usage_error() {
    let fix = fixture();
    let out = docmt(
        &[
            "translate",
            "--io.vocab",
            &fix.vocab,
            "--io.corpus",
            &fix.corpus,
            "--io.out",
            "unused.txt",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("missing required --io.ckpt"));
    assert!(err.contains("usage: docmt translate"));
}

#[test]
fn gen_corpus_is_deterministic_across_runs() {
    let make = || {
        let dir = tempfile::tempdir().unwrap();
        let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
        let (c, v, l) = (path("c.txt"), path("v.txt"), path("l.txt"));
        run_ok(&[
            &["gen-corpus", "--seed", "41"],
            SIZES,
            &["--io.corpus", &c, "--io.vocab", &v, "--io.labels", &l],
        ]
        .concat());
        (
            dir,
            fs::read(&c).unwrap(),
            fs::read(&v).unwrap(),
            fs::read(&l).unwrap(),
        )
    };
    let (_d1, c1, v1, l1) = make();
    let (_d2, c2, v2, l2) = make();
    assert_eq!(c1, c2);
    assert_eq!(v1, v2);
    assert_eq!(l1, l2);
}

#[test]
fn translate_is_deterministic_and_bleu_round_trips() {
    let fix = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("hyp.txt").to_str().unwrap().to_string();
    let args = [
        "translate",
        "--io.ckpt",
        &fix.fine,
        "--io.vocab",
        &fix.vocab,
        "--io.corpus",
        &fix.corpus,
        "--io.out",
        &out_path,
    ];
    let stdout1 = run_ok(&args);
    let bytes1 = fs::read(&out_path).unwrap();
    let stdout2 = run_ok(&args);
    let bytes2 = fs::read(&out_path).unwrap();
    assert_eq!(stdout1, stdout2);
    assert_eq!(bytes1, bytes2);
    assert!(stdout1.contains("translate.policy = adaptive"));

    // The hypothesis file scores against the corpus it came from.
    let scored =
        run_ok(&["bleu", "--io.hyp", &out_path, "--io.ref", &fix.corpus]);
    assert!(scored.contains("bleu.pairs = 24"), "unexpected:\n{scored}");
    assert!(scored.contains("bleu.score = "));
}

#[test]
fn bleu_identity_is_perfect() {
    let fix = fixture();
    let out = run_ok(&["bleu", "--io.hyp", &fix.corpus, "--io.ref", &fix.corpus]);
    assert!(out.contains("BLEU = 100.00"), "unexpected:\n{out}");
    assert!(out.contains("bleu.pairs = 24"));
}

#[test]
fn commands_never_mutate_input_files() {
    let fix = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("hyp.txt").to_str().unwrap().to_string();
    let snapshot = || {
        (
            fs::read(&fix.corpus).unwrap(),
            fs::read(&fix.vocab).unwrap(),
            fs::read(&fix.labels).unwrap(),
            fs::read(&fix.fine).unwrap(),
        )
    };
    let before = snapshot();
    run_ok(&[
        "translate",
        "--io.ckpt",
        &fix.fine,
        "--io.vocab",
        &fix.vocab,
        "--io.corpus",
        &fix.corpus,
        "--io.out",
        &out_path,
    ]);
    run_ok(&["stats", "--io.ckpt", &fix.fine, "--io.vocab", &fix.vocab, "--io.corpus", &fix.corpus]);
    run_ok(&["bleu", "--io.hyp", &fix.corpus, "--io.ref", &fix.corpus]);
    assert_eq!(before, snapshot());
}

#[test]
fn config_layers_resolve_flag_over_env_over_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let cfg = path("run.cfg");
    fs::write(
        &cfg,
        format!(
            "# layered run\nseed = 5\nsynth.n_docs = 4\nsynth.doc_len = 3\n\
             synth.vocab_size = 30\nio.corpus = {}\nio.vocab = {}\nio.labels = {}\n",
            path("c.txt"),
            path("v.txt"),
            path("l.txt")
        ),
    )
    .unwrap();

    let with_env = |args: &[&str], envs: &[(&str, &str)]| {
        let out = docmt(args, envs);
        assert!(out.status.success(), "{}", stderr_of(&out));
        String::from_utf8(out.stdout).unwrap()
    };
    let flag = with_env(
        &["gen-corpus", "--config", &cfg, "--seed", "7"],
        &[("DOCMT_SEED", "6")],
    );
    assert!(flag.contains("\nseed = 7\n"));
    let env = with_env(&["gen-corpus", "--config", &cfg], &[("DOCMT_SEED", "6")]);
    assert!(env.contains("\nseed = 6\n"));
    let file = with_env(&["gen-corpus", "--config", &cfg], &[]);
    assert!(file.contains("\nseed = 5\n"));

    // Prefixed variables for keys this command does not own are ignored.
    let other = with_env(&["gen-corpus", "--config", &cfg], &[("DOCMT_TRAIN_LR", "9")]);
    assert!(other.contains("\nseed = 5\n"));
    assert!(!other.contains("train.lr"));
}

#[test]
fn explicit_model_flags_conflict_with_init() {
    let fix = fixture();
    let out = docmt(
        &[
            "finetune",
            "--io.corpus",
            &fix.corpus,
            "--io.vocab",
            &fix.vocab,
            "--io.init",
            &fix.pre,
            "--io.ckpt",
            "unused.ckpt",
            "--model.d_model",
            "16",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("conflicts with --io.init"));
}

#[test]
fn stats_reports_counts_and_percentages() {
    let fix = fixture();
    let out = run_ok(&[
        "stats",
        "--io.ckpt",
        &fix.fine,
        "--io.vocab",
        &fix.vocab,
        "--io.corpus",
        &fix.corpus,
    ]);
    assert!(out.contains("option"));
    assert!(out.contains('%'));
    assert!(out.contains("stats.total = 24"));
    for i in 0..3 {
        assert!(out.contains(&format!("stats.option{i}.label")));
    }
}

#[test]
fn timing_reports_each_fixed_mode_and_adaptive() {
    let fix = fixture();
    let out = run_ok(&[
        "timing",
        "--io.ckpt",
        &fix.fine,
        "--io.vocab",
        &fix.vocab,
        "--io.corpus",
        &fix.corpus,
    ]);
    for mode in ["fixed:pre", "fixed:pos", "fixed:empty"] {
        assert!(out.contains(mode), "missing {mode}:\n{out}");
    }
    assert!(out.contains("timing.row3.mode = adaptive"));
}

#[test]
fn gradcheck_passes_on_a_small_sample() {
    let out = run_ok(&[
        &["gradcheck", "--seed", "7", "--check.samples", "10"],
        MODEL,
    ]
    .concat());
    assert!(out.contains("gradcheck PASS"));
}

#[test]
fn ablate_runs_the_full_ladder_deterministically() {
    let args = [
        &[
            "ablate",
            "--seed",
            "3",
            "--synth.n_docs",
            "6",
            "--synth.doc_len",
            "3",
            "--ablate.pretrain_steps",
            "12",
            "--model.d_model",
            "16",
            "--model.n_heads",
            "2",
            "--model.d_ff",
            "16",
            "--model.enc_layers",
            "1",
            "--model.dec_layers",
            "3",
        ][..],
        &["--train.max_steps", "12", "--train.warmup", "10", "--train.batch_size", "8"][..],
    ]
    .concat();
    let first = run_ok(&args);
    let second = run_ok(&args);
    assert_eq!(first, second);
    let labels = ["full", "w/o L_uni", "w/o L_div", "w/o Doc tips"];
    let mut last = 0;
    for (i, label) in labels.iter().enumerate() {
        let line = format!("ablate.row{i}.label = {label}");
        let at = first.find(&line).unwrap_or_else(|| panic!("missing {line:?}"));
        assert!(at >= last, "rows out of order");
        last = at;
    }
}

#[test]
fn ablate_switches_select_ladder_rows() {
    let out = run_ok(&[
        "ablate",
        "--seed",
        "3",
        "--no-div",
        "--synth.n_docs",
        "6",
        "--synth.doc_len",
        "3",
        "--ablate.pretrain_steps",
        "12",
        "--train.max_steps",
        "12",
        "--train.warmup",
        "10",
        "--train.batch_size",
        "8",
        "--model.d_model",
        "16",
        "--model.n_heads",
        "2",
        "--model.d_ff",
        "16",
        "--model.enc_layers",
        "1",
        "--model.dec_layers",
        "3",
    ]);
    assert!(out.contains("ablate.row0.label = full"));
    assert!(out.contains("ablate.row1.label = w/o L_div"));
    assert!(!out.contains("w/o L_uni"));
    assert!(!out.contains("row2"));
}

#[test]
fn checkpoint_round_trips_architecture() {
    let fix = fixture();
    // The finetuned checkpoint echoes the architecture it was trained
    // with, not command-line defaults.
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("hyp.txt").to_str().unwrap().to_string();
    let out = run_ok(&[
        "translate",
        "--io.ckpt",
        &fix.fine,
        "--io.vocab",
        &fix.vocab,
        "--io.corpus",
        &fix.corpus,
        "--io.out",
        &out_path,
    ]);
    assert!(out.contains("model.d_model = 16"));
    assert!(out.contains("model.enc_layers = 1"));
    assert!(out.contains("model.vocab_size = 30"));
}
