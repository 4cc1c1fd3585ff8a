//! Subcommand behavior through the real binary: artifacts, exit codes,
//! and byte-for-byte reproducibility.

use std::path::Path;
use std::process::{Command, Output};

use masksembles_core::masks::MaskSet;
use masksembles_core::metrics::{MetricsReport, ReliabilityDiagram};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_masksembles"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().to_string(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort();
    entries
}

// Small-but-real training settings shared by the reproducibility tests.
const TINY_TRAIN: &[&str] = &[
    "--epochs",
    "4",
    "--count_per_class",
    "24",
    "--test_count_per_class",
    "24",
    "--m",
    "8",
    "--batch_size",
    "8",
];

#[test]
fn masks_writes_a_parseable_file_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pool.txt");
    let out = run_ok(&[
        "masks",
        "--n",
        "4",
        "--m",
        "2",
        "--s",
        "2",
        "--seed",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("expected_size 3.75"), "{stdout}");
    assert!(
        stdout.contains("expected_iou 0.3333333333333333"),
        "{stdout}"
    );
    let set = MaskSet::read_from(&path).unwrap();
    assert_eq!(set.n(), 4);
    for row in set.iter_rows() {
        assert_eq!(row.iter().map(|&b| b as usize).sum::<usize>(), 2);
    }
}

#[test]
fn masks_single_all_ones_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.txt");
    run_ok(&[
        "masks",
        "--n",
        "1",
        "--m",
        "3",
        "--s",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "111");
}

#[test]
fn invalid_scale_exits_2_with_message() {
    let out = bin()
        .args(["masks", "--s", "0.5", "--out", "/tmp/unused_masks.txt"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("s must be >= 1"), "{stderr}");
}

#[test]
fn unknown_command_exits_2() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mistyped_flag_exits_2() {
    let out = bin().args(["train", "--epoch", "10"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("unknown flag --epoch"), "{stderr}");
}

#[test]
fn missing_checkpoint_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "eval",
            "--checkpoint",
            dir.path().join("absent.ckpt").to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exploding_learning_rate_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "train",
            "--lr",
            "1e300",
            "--epochs",
            "3",
            "--count_per_class",
            "16",
        ])
        .args(["--m", "8", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("diverged"), "{stderr}");
}

#[test]
fn train_twice_is_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        run_ok(
            &[
                &[
                    "train",
                    "--seed",
                    "11",
                    "--out",
                    dir.path().to_str().unwrap(),
                ],
                TINY_TRAIN,
            ]
            .concat(),
        );
    }
    assert_eq!(read_dir_bytes(dir_a.path()), read_dir_bytes(dir_b.path()));
}

#[test]
fn zero_learning_rate_keeps_initial_weights() {
    let dir_zero = tempfile::tempdir().unwrap();
    let dir_ref = tempfile::tempdir().unwrap();
    // lr=0 for many epochs must equal lr=0 for one epoch: both are the
    // untouched seeded initialization.
    for (dir, epochs) in [(&dir_zero, "6"), (&dir_ref, "1")] {
        run_ok(&[
            "train",
            "--seed",
            "4",
            "--lr",
            "0",
            "--epochs",
            epochs,
            "--count_per_class",
            "16",
            "--m",
            "8",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
    }
    let a = std::fs::read(dir_zero.path().join("model.ckpt")).unwrap();
    let b = std::fs::read(dir_ref.path().join("model.ckpt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fixed_width_training_keeps_the_hidden_width() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "train", "--seed", "8", "--fixed_width", "true", "--hidden", "12", "--s", "3",
        "--epochs", "2", "--count_per_class", "16", "--test_count_per_class", "16",
        "--batch_size", "8", "--out", dir.path().to_str().unwrap(),
    ]);
    let model = masksembles_core::MasksemblesMlp::load(&dir.path().join("model.ckpt")).unwrap();
    assert_eq!(model.widths(), &[2, 12, 2]);
    assert!(!model.mask_set().trimmed());
    // m = round(12 / 3)
    assert_eq!(model.mask_set().spec().m(), 4);
}

#[test]
fn eval_report_matches_score_dump_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let out_flag = dir.path().to_str().unwrap();
    run_ok(&[&["train", "--seed", "2", "--out", out_flag], TINY_TRAIN].concat());
    run_ok(&["eval", "--out", out_flag]);

    // The loss history parses as (epoch, loss) pairs in order.
    let history = std::fs::read_to_string(dir.path().join("loss_history.csv")).unwrap();
    assert_eq!(history.lines().next().unwrap(), "epoch,loss");
    for (i, line) in history.lines().skip(1).enumerate() {
        let (epoch, loss) = line.split_once(',').unwrap();
        assert_eq!(epoch.parse::<usize>().unwrap(), i);
        assert!(loss.parse::<f64>().unwrap().is_finite());
    }

    let report_text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let row = report_text.lines().nth(1).unwrap();
    let report = MetricsReport::from_csv_row(row, "report.csv").unwrap();
    assert_eq!(report.tag, "eval:entropy");
    assert_eq!(report.wall_time_s, 0.0);

    // Offline recomputation from the dumped scores.
    let scores_text = std::fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    let mut scores = Vec::new();
    let mut flags = Vec::new();
    for line in scores_text.lines().skip(1) {
        let (s, o) = line.split_once(',').unwrap();
        scores.push(s.parse::<f64>().unwrap());
        flags.push(o == "1");
    }
    let roc = masksembles_core::metrics::roc_auc(&scores, &flags).unwrap();
    let pr = masksembles_core::metrics::pr_auc(&scores, &flags).unwrap();
    assert_eq!(roc, report.roc_auc);
    assert_eq!(pr, report.pr_auc);

    let diagram_text = std::fs::read_to_string(dir.path().join("reliability.csv")).unwrap();
    let diagram = ReliabilityDiagram::from_csv(&diagram_text, "reliability.csv").unwrap();
    assert_eq!(diagram.num_bins(), 15);

    // Evaluating the same checkpoint again gives identical rows.
    let first = read_dir_bytes(dir.path());
    run_ok(&["eval", "--out", out_flag]);
    assert_eq!(first, read_dir_bytes(dir.path()));
}

#[test]
fn eval_maxprob_records_the_flag_in_the_tag() {
    let dir = tempfile::tempdir().unwrap();
    let out_flag = dir.path().to_str().unwrap();
    run_ok(&[&["train", "--seed", "3", "--out", out_flag], TINY_TRAIN].concat());
    run_ok(&[
        "eval", "--score", "maxprob", "--tag", "shift", "--out", out_flag,
    ]);
    let report_text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report_text.contains("shift:maxprob"), "{report_text}");
}

#[test]
fn config_file_feeds_commands_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(&cfg_path, "n = 3\nm = 2\ns = 2.0\nseed = 9\n").unwrap();
    let pool = dir.path().join("pool.txt");
    run_ok(&[
        "masks",
        "--config",
        cfg_path.to_str().unwrap(),
        "--n",
        "5",
        "--out",
        pool.to_str().unwrap(),
    ]);
    let set = MaskSet::read_from(&pool).unwrap();
    assert_eq!(set.n(), 5); // flag wins
    assert_eq!(set.spec().m(), 2); // file value
    assert_eq!(set.spec().seed(), 9);
}

#[test]
fn sweep_surface_columns_and_reproducibility() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let args = [
        "sweep-surface",
        "--seed",
        "21",
        "--m",
        "64",
        "--iou_seeds",
        "8",
        "--n_values",
        "1,2,4",
        "--s_values",
        "1,2,3",
    ];
    for dir in [&dir_a, &dir_b] {
        run_ok(&[&args[..], &["--out", dir.path().to_str().unwrap()]].concat());
    }
    assert_eq!(read_dir_bytes(dir_a.path()), read_dir_bytes(dir_b.path()));

    let text = std::fs::read_to_string(dir_a.path().join("surface.csv")).unwrap();
    let rows =
        masksembles_cli::commands::sweep_surface::SurfaceRow::parse_csv(&text, "surface.csv")
            .unwrap();
    assert_eq!(rows.len(), 9);
    let corner = rows.iter().find(|r| r.n == 1 && r.s == 1.0).unwrap();
    assert_eq!(corner.relative_size, 1.0);
    assert_eq!(corner.analytical_size, 1.0);
    for row in &rows {
        let spec = masksembles_core::MaskSpec::new(row.n, 64, row.s, 0).unwrap();
        assert_eq!(row.analytical_size, spec.expected_size() / 64.0);
        assert_eq!(
            row.analytical_iou,
            masksembles_core::expected_iou(row.s).unwrap()
        );
    }
    // IoU depends on S only: compare across N (single-mask rows excepted).
    for s in [2.0, 3.0] {
        let at_n: Vec<f64> = rows
            .iter()
            .filter(|r| r.s == s && r.n >= 2)
            .map(|r| r.empirical_iou)
            .collect();
        for pair in at_n.windows(2) {
            assert!(
                (pair[0] - pair[1]).abs() <= 0.02,
                "IoU at s={s} varies with n: {at_n:?}"
            );
        }
    }
}

#[test]
fn sweep_transition_tiny_run_is_reproducible_and_parseable() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let args = [
        "sweep-transition",
        "--seed",
        "5",
        "--epochs",
        "4",
        "--count_per_class",
        "16",
        "--test_count_per_class",
        "16",
        "--m",
        "8",
        "--batch_size",
        "8",
        "--s_values",
        "1.5",
        "--ensemble_members",
        "2",
        "--grid_res_x",
        "9",
        "--grid_res_y",
        "5",
    ];
    for dir in [&dir_a, &dir_b] {
        run_ok(&[&args[..], &["--out", dir.path().to_str().unwrap()]].concat());
    }
    assert_eq!(read_dir_bytes(dir_a.path()), read_dir_bytes(dir_b.path()));

    let summary = std::fs::read_to_string(dir_a.path().join("transition_summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "s,accuracy,mean_entropy_in,mean_entropy_ood,model_size"
    );
    let labels: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, vec!["single", "ensemble", "1.5"]);
    for label in labels {
        assert!(dir_a.path().join(format!("entropy_{label}.csv")).exists());
    }
    let grid = std::fs::read_to_string(dir_a.path().join("entropy_single.csv")).unwrap();
    assert_eq!(
        grid.lines().next().unwrap(),
        "x0,x1,in_distribution,entropy"
    );
    assert_eq!(grid.lines().count(), 1 + 9 * 5);
}

#[test]
fn sweep_diversity_tiny_run_has_zero_single_diversity() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "sweep-diversity",
        "--seed",
        "6",
        "--epochs",
        "4",
        "--count_per_class",
        "16",
        "--test_count_per_class",
        "32",
        "--m",
        "8",
        "--batch_size",
        "8",
        "--s_values",
        "2,3",
        "--ensemble_members",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(dir.path().join("diversity.csv")).unwrap();
    let rows =
        masksembles_cli::commands::sweep_diversity::DiversityRow::parse_csv(&text, "diversity.csv")
            .unwrap();
    let single: Vec<_> = rows.iter().filter(|r| r.s == "single").collect();
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].diversity, 0.0);
    assert_eq!(single[0].pair_id, "0-0");
    // N=4 masked cells contribute 6 pairs each, the 2-member ensemble 1.
    assert_eq!(rows.iter().filter(|r| r.s == "2").count(), 6);
    assert_eq!(rows.iter().filter(|r| r.s == "ensemble").count(), 1);
    for row in &rows {
        assert_eq!(row.diversity_min, 0.0);
        assert!(row.diversity <= row.diversity_max + 1e-12);
    }
}
