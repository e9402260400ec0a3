use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn uavnav(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavnav"))
        .args(args)
        .current_dir(cwd)
        .env_remove("UAVNAV_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Overrides for a training run that takes well under a second.
const TINY: &[&str] = &[
    "--preset",
    "smoke",
    "--set",
    "training.max_episodes=2",
    "--set",
    "env.t_max=20",
    "--set",
    "training.warmup_transitions=10",
    "--set",
    "training.batch_size=8",
    "--set",
    "training.update_times=2",
    "--set",
    "camera.width=16",
    "--set",
    "camera.height=16",
    "--set",
    "network.hidden=16",
    "--set",
    "network.filters=4",
    "--quiet",
];

fn train_tiny(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    uavnav(&args, dir)
}

#[test]
fn train_then_eval_then_info() {
    let tmp = tempfile::tempdir().unwrap();
    let out = train_tiny(tmp.path(), &["--out", "run", "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("run");
    for f in [
        "metrics.csv",
        "config.toml",
        "checkpoint/agent.toml",
        "checkpoint/actor.ckpt",
    ] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let echoed = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(echoed.contains("seed = 4"));

    let eval = uavnav(
        &[
            "eval",
            "--checkpoint",
            "run",
            "-n",
            "3",
            "--density",
            "0.04",
            "--episodes",
            "2",
            "--t-max",
            "30",
            "--out",
            "ev",
        ],
        tmp.path(),
    );
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(stdout(&eval).contains("success rate"));
    for f in [
        "report.jsonl",
        "report.txt",
        "episodes.jsonl",
        "trajectories/episode_0001.csv",
    ] {
        assert!(tmp.path().join("ev").join(f).is_file(), "{f} missing");
    }

    let info = uavnav(&["info", "run/checkpoint"], tmp.path());
    assert!(info.status.success());
    let text = stdout(&info);
    assert!(text.contains("format v1"));
    assert!(text.contains("conv0.weight"));
    assert!(text.contains("update_step"));
    assert!(text.contains("[training]"));
}

#[test]
fn default_output_goes_under_the_env_root() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["train"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--seed", "2"]);
    let out = Command::new(env!("CARGO_BIN_EXE_uavnav"))
        .args(&args)
        .current_dir(tmp.path())
        .env("UAVNAV_OUT", "outputs")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("outputs/train-seed2/metrics.csv").is_file());
}

#[test]
fn baseline_eval_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str| {
        let o = uavnav(
            &[
                "eval",
                "--baseline",
                "straight",
                "--scenario",
                "circle",
                "-n",
                "4",
                "--episodes",
                "2",
                "--t-max",
                "100",
                "--out",
                dir,
            ],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(tmp.path().join(dir).join("episodes.jsonl")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn render_writes_a_16_bit_pgm() {
    let tmp = tempfile::tempdir().unwrap();
    let o = uavnav(
        &[
            "render",
            "--scenario",
            "circle",
            "-n",
            "6",
            "--uav",
            "2",
            "--width",
            "20",
            "--height",
            "10",
            "--out",
            "img/d.pgm",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = fs::read(tmp.path().join("img/d.pgm")).unwrap();
    let header = b"P5\n20 10\n65535\n";
    assert!(bytes.starts_with(header));
    assert_eq!(bytes.len(), header.len() + 20 * 10 * 2);
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["bogus"],
        &["eval"],
        &["eval", "--baseline", "hover", "--density", "-1"],
        &["train", "--set", "training.nope=1"],
        &["train", "--set", "training.batch_size=0"],
        &["render", "--scenario", "circle", "-n", "3", "--radius", "0"],
    ];
    for args in cases {
        let o = uavnav(args, tmp.path());
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let missing = tmp.path().join("missing.toml");
    let o = uavnav(&["train", "--config", missing.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergent_training_exits_with_three_and_leaves_a_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let o = train_tiny(
        tmp.path(),
        &[
            "--out",
            "run",
            "--set",
            "sac.critic_lr=1e30",
            "--set",
            "training.max_episodes=4",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("run/nan_dump.txt").is_file());
}

#[test]
fn help_lists_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let o = uavnav(&["--help"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for sub in ["train", "eval", "render", "info"] {
        assert!(text.contains(sub), "{sub}");
    }
}
