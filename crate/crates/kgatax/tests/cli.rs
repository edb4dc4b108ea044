use std::fs;
use std::path::Path;

use kgatax::cli::run_command;
use kgatax::error::exit;
use kgatax::report::{EPOCHS_FILE, EPOCH_HEADER, EVAL_CSV_FILE, EVAL_JSON_FILE, GRID_FILE, MODEL_FILE};
use kgatax::synth::{generate, SynthSpec};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("kgatax").chain(args.iter().copied());
    let code = run_command(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const SMALL: &[&str] = &[
    "--set", "dim=8", "--set", "layer_dims=4", "--set", "epochs=3", "--set", "batch_size=256", "--set",
    "pretrain_epochs=1", "--set", "lr=0.01",
];

fn synth_dir(root: &Path) -> String {
    let d = root.join("data");
    generate(&SynthSpec::default(), 5).write_dir(&d).unwrap();
    d.to_str().unwrap().to_owned()
}

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run_owned(args: &[String]) -> (i32, String, String) {
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn gradcheck_passes() {
    let (code, out, _) = run(&["gradcheck"]);
    assert_eq!(code, exit::OK, "{out}");
    assert!(out.contains("overall max_rel_err"));
    assert!(!out.contains("FAIL"));
}

#[test]
fn train_eval_recommend_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth_dir(tmp.path());
    let out = tmp.path().join("run");
    let out_s = out.to_str().unwrap();

    let (code, stdout, _) = run(&["prepare", "--data-dir", &data]);
    assert_eq!(code, exit::OK);
    assert!(stdout.contains("entities\t") && stdout.contains("ckg_triples\t"));

    let (code, _, err) = run_owned(&with(&["train", "--data-dir", &data, "--out", out_s], SMALL));
    assert_eq!(code, exit::OK, "{err}");
    assert!(out.join(MODEL_FILE).exists());
    let epochs = fs::read_to_string(out.join(EPOCHS_FILE)).unwrap();
    assert!(epochs.contains("# dim=8\n"), "config echoed");
    let rows: Vec<&str> = epochs.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], EPOCH_HEADER);
    assert_eq!(rows.len(), 4);

    let (code, _, err) = run(&["eval", "--data-dir", &data, "--out", out_s, "--k", "5,10"]);
    assert_eq!(code, exit::OK, "{err}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(EVAL_JSON_FILE)).unwrap()).unwrap();
    assert_eq!(json["config"]["dim"], "8");
    assert_eq!(json["seed"], 42);
    let r10 = json["recall"]["@10"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&r10));
    let csv = fs::read_to_string(out.join(EVAL_CSV_FILE)).unwrap();
    assert!(csv.contains("user,recall@5,recall@10,ndcg@5,ndcg@10,auc"));

    let (code, stdout, err) = run(&["recommend", "--data-dir", &data, "--out", out_s, "--user", "u1", "--k", "5"]);
    assert_eq!(code, exit::OK, "{err}");
    let scores: Vec<f64> = stdout
        .lines()
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(scores.len(), 5);
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    let (code, _, err) = run(&["recommend", "--data-dir", &data, "--out", out_s, "--user", "nobody"]);
    assert_eq!(code, exit::DATA, "{err}");
}

#[test]
fn gridsearch_cartesian_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth_dir(tmp.path());
    let out = tmp.path().join("grid");
    let args = with(
        &[
            "gridsearch",
            "--data-dir",
            &data,
            "--out",
            out.to_str().unwrap(),
            "--set",
            "grid.lr=0.001,0.0001",
            "--set",
            "grid.dim=8,16",
        ],
        SMALL,
    );
    let (code, _, err) = run_owned(&args);
    assert_eq!(code, exit::OK, "{err}");
    let csv = fs::read_to_string(out.join(GRID_FILE)).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",*")).count(), 1);
}

#[test]
fn grid_guard_refuses_large_sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth_dir(tmp.path());
    let (code, _, err) = run(&["gridsearch", "--data-dir", &data, "--max-cells", "10"]);
    assert_eq!(code, exit::CONFIG);
    assert!(err.contains("768"), "{err}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth_dir(tmp.path());
    assert_eq!(run(&["train", "--data-dir", &data, "--set", "dim=banana"]).0, exit::CONFIG);
    assert_eq!(run(&["train", "--data-dir", &data, "--set", "nonsense=1"]).0, exit::CONFIG);
    assert_eq!(run(&["train"]).0, exit::CONFIG);
    assert_eq!(run(&["frobnicate"]).0, exit::CONFIG);
    let missing = tmp.path().join("nope");
    assert_eq!(run(&["train", "--data-dir", missing.to_str().unwrap()]).0, exit::DATA);
    assert_eq!(
        run(&["eval", "--data-dir", &data, "--model", missing.to_str().unwrap()]).0,
        exit::DATA
    );
    let out = tmp.path().join("div");
    let args = with(
        &["train", "--data-dir", &data, "--out", out.to_str().unwrap(), "--set", "lr=1e300", "--set", "l2=1e300"],
        SMALL,
    );
    let (code, _, err) = run_owned(&args);
    assert_eq!(code, exit::DIVERGED, "{err}");
    assert!(err.contains("epoch"), "{err}");
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    fs::write(&cfg, "# comment\ndim=32\nseed=9\n").unwrap();
    let cli = <kgatax::cli::Cli as clap::Parser>::try_parse_from([
        "kgatax",
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "dim=16",
        "--seed",
        "3",
    ])
    .unwrap();
    let rc = cli.run_config().unwrap();
    assert_eq!((rc.model.dim, rc.model.seed), (16, 3));
}
