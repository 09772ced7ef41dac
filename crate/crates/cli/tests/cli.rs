use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lexrl::automata::{parse_hoa, print_hoa};
use lexrl::fixtures;
use lexrl::learn::{product_fingerprint, Checkpoint, QTriple, Schedule};
use lexrl::oracle::{all_actions, analyze, exact_crafted_q, max_qoc_return, Crafted};
use lexrl::product::{build_product, build_product_with, Construction, ProductPolicy};
use lexrl_cli::commands::{self, OracleOutput, VerifyReport};
use lexrl_cli::config::{ExperimentConfig, Overrides};
use lexrl_cli::render::{self, PolicyExport};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("lexrl-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn lexrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexrl"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn cfg(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_string()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn identical_runs_give_byte_identical_artifacts() {
    let d = scratch("det");
    for run in ["a", "b"] {
        ok(lexrl(&[
            "run",
            &cfg("toy.cfg"),
            "--episodes",
            "60",
            "--out",
            path(&d.join(run)),
        ]));
    }
    for f in [
        commands::CHECKPOINT,
        commands::STATS,
        commands::POLICY,
        commands::EVAL,
        commands::MANIFEST,
    ] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let m: commands::Manifest =
        serde_json::from_slice(&fs::read(d.join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(m.seed, 1);
    assert_eq!(m.episodes, 60);
    assert_eq!(m.artifacts.len(), 4);
    assert!(m.config.contains("episodes = 60"));
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn zero_episodes_write_zero_tables() {
    let d = scratch("zero");
    ok(lexrl(&[
        "run",
        &cfg("toy.cfg"),
        "--episodes",
        "0",
        "--out",
        path(&d),
    ]));
    let ck = Checkpoint::load(&d.join(commands::CHECKPOINT)).unwrap();
    let p = build_product(
        &fixtures::toy_mdp(),
        &fixtures::toy_safety(),
        &fixtures::toy_ldba(),
    )
    .unwrap();
    assert_eq!(ck.episode, 0);
    assert_eq!(ck.q, QTriple::zeros(&p));
    assert!(ck.visits.iter().all(|&v| v == 0));
    let stats = fs::read_to_string(d.join(commands::STATS)).unwrap();
    assert_eq!(stats.lines().count(), 1);
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn bundled_case_study_matches_the_library_pipeline() {
    let r =
        ExperimentConfig::load(&configs().join("case-study.cfg"), &Overrides::default()).unwrap();
    let b = r.build().unwrap();
    let lib = build_product(
        &fixtures::case_study_mdp(),
        &fixtures::case_study_safety(),
        &fixtures::case_study_ldba(),
    )
    .unwrap();
    assert_eq!(product_fingerprint(&b.product), product_fingerprint(&lib));
    assert_eq!(b.product.full_size(), 270);
    let full = build_product_with(
        &fixtures::case_study_mdp(),
        &fixtures::case_study_safety(),
        &fixtures::case_study_ldba(),
        Construction::Full,
    )
    .unwrap();
    assert_eq!(full.num_states(), 270);
    assert_eq!(b.hyper.epsilon, Schedule::decay(0.5, 0.005, 4000));

    let scaled = Overrides {
        paper_scale: true,
        ..Default::default()
    };
    let r = ExperimentConfig::load(&configs().join("case-study.cfg"), &scaled).unwrap();
    assert_eq!(
        (r.config.episodes, r.config.horizon, r.config.eval_episodes),
        (128_000, 1000, 10_000)
    );
    assert_eq!(
        r.build().unwrap().hyper.alpha,
        Schedule::decay(0.5, 0.05, 128_000)
    );
}

#[test]
fn paper_scale_needs_a_table() {
    let out = lexrl(&["run", &cfg("toy.cfg"), "--paper-scale"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("paper_scale"));
}

/// Oracle-exact tables read with small thresholds agree with the oracle on
/// every state.
#[test]
fn verify_exact_tables_agree_everywhere() {
    let d = scratch("exact");
    ok(lexrl(&[
        "run",
        &cfg("case-study.cfg"),
        "--episodes",
        "0",
        "--out",
        path(&d),
    ]));
    let ck_path = d.join(commands::CHECKPOINT);
    let mut ck = Checkpoint::load(&ck_path).unwrap();
    let p = build_product(
        &fixtures::case_study_mdp(),
        &fixtures::case_study_safety(),
        &fixtures::case_study_ldba(),
    )
    .unwrap();
    let r = analyze(&p);
    let v = max_qoc_return(&p, &r.a_psi_phi);
    ck.q = QTriple {
        psi: exact_crafted_q(&p, Crafted::Safety, 1e-4, &all_actions(&p)).q,
        psi_phi: exact_crafted_q(&p, Crafted::Buchi, 1e-2, &r.a_psi).q,
        reward: v.q.clone(),
    };
    ck.hyper.tau_psi = Schedule::constant(1e-2);
    ck.hyper.tau_phi = Schedule::constant(1e-2);
    ck.hyper.upsilon = Schedule::constant(0.05);
    ck.save(&ck_path).unwrap();
    let before = fs::read(&ck_path).unwrap();

    let report = d.join("verify.json");
    let text = ok(lexrl(&[
        "verify",
        &cfg("case-study.cfg"),
        path(&ck_path),
        "--at",
        "<(0,5),0,2>",
        "--report",
        path(&report),
    ]));
    let rep: VerifyReport = serde_json::from_str(&text).unwrap();
    assert_eq!(
        rep,
        serde_json::from_slice::<VerifyReport>(&fs::read(&report).unwrap()).unwrap()
    );
    assert_eq!(rep.a_psi.fraction, 1.0);
    assert_eq!(rep.a_psi_phi.fraction, 1.0);
    assert!(rep.disagreements.is_empty());
    assert!((rep.greedy_safety - 1.0).abs() < 1e-9);
    assert!((rep.optimal_return - 88.0).abs() < 0.5);
    assert!(
        rep.return_gap >= -1e-9 && rep.return_gap < 5.0,
        "{}",
        rep.return_gap
    );
    assert_eq!(fs::read(&ck_path).unwrap(), before);
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn verify_rejects_a_checkpoint_for_another_product() {
    let d = scratch("mismatch");
    ok(lexrl(&[
        "run",
        &cfg("toy.cfg"),
        "--episodes",
        "1",
        "--out",
        path(&d),
    ]));
    let ck = d.join(commands::CHECKPOINT);
    let before = fs::read(&ck).unwrap();
    let out = lexrl(&["verify", &cfg("case-study.cfg"), path(&ck)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("another product"));
    assert_eq!(fs::read(&ck).unwrap(), before);
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn toy_run_agrees_on_frequent_states() {
    let d = scratch("toy");
    ok(lexrl(&["run", &cfg("toy.cfg"), "--out", path(&d)]));
    let text = ok(lexrl(&[
        "verify",
        &cfg("toy.cfg"),
        path(&d.join(commands::CHECKPOINT)),
    ]));
    let rep: VerifyReport = serde_json::from_str(&text).unwrap();
    assert!(rep.frequent_a_psi.total > 0);
    assert!(
        rep.frequent_a_psi.fraction >= 0.95,
        "{:?}",
        rep.frequent_a_psi
    );
    assert!(
        rep.frequent_a_psi_phi.fraction >= 0.95,
        "{:?}",
        rep.frequent_a_psi_phi
    );
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn several_runs_get_their_own_directories() {
    let d = scratch("runs");
    let text = ok(lexrl(&[
        "run",
        &cfg("toy.cfg"),
        "--episodes",
        "20",
        "--runs",
        "3",
        "--out",
        path(&d),
    ]));
    assert_eq!(text.lines().filter(|l| l.starts_with("seed ")).count(), 3);
    for s in 1..=3 {
        let m: commands::Manifest =
            serde_json::from_slice(&fs::read(d.join(format!("seed-{s}/manifest.json"))).unwrap())
                .unwrap();
        assert_eq!(m.seed, s);
    }
    let a = fs::read(d.join("seed-1/checkpoint.json")).unwrap();
    assert_ne!(a, fs::read(d.join("seed-2/checkpoint.json")).unwrap());
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn render_matches_golden_files() {
    let d = scratch("render");
    let stdout = ok(lexrl(&[
        "render",
        path(&golden("toy_policy.json")),
        "--out",
        path(&d),
    ]));
    let want = fs::read_to_string(golden("toy_policy.txt")).unwrap();
    assert_eq!(stdout, want);
    assert_eq!(fs::read_to_string(d.join("policy.txt")).unwrap(), want);
    assert_eq!(
        fs::read_to_string(d.join("policy.csv")).unwrap(),
        fs::read_to_string(golden("toy_policy.csv")).unwrap()
    );
    assert!(fs::read_to_string(d.join("policy.svg"))
        .unwrap()
        .starts_with("<svg"));
    fs::remove_dir_all(&d).unwrap();
}

/// The return-optimal lexicographic policy jumps the automaton at the
/// reward cell.
#[test]
fn optimal_case_study_policy_shows_the_jump_at_the_reward_cell() {
    let p = build_product(
        &fixtures::case_study_mdp(),
        &fixtures::case_study_safety(),
        &fixtures::case_study_ldba(),
    )
    .unwrap();
    let r = analyze(&p);
    let v = max_qoc_return(&p, &r.a_psi_phi);
    let q = QTriple {
        psi: vec![0.0; p.num_pairs()],
        psi_phi: vec![0.0; p.num_pairs()],
        reward: v.q.clone(),
    };
    let e = PolicyExport::new(&p, &ProductPolicy::pure(&v.policy), &q);
    let s = e.states.iter().find(|s| s.name == "<(0,5),0,0>").unwrap();
    assert_eq!(s.dominant, "eps_2");
    let text = render::ascii(&e).unwrap();
    let layer: Vec<&str> = text.split("\n\n").next().unwrap().lines().collect();
    assert_eq!(layer[0], "layer q_psi=0 q_phi=0");
    let cell = layer[1].split('|').nth(6).unwrap();
    assert!(cell.contains("ε2"), "{cell:?}");
}

#[test]
fn oracle_command_reports_case_study_probabilities() {
    let text = ok(lexrl(&["oracle", &cfg("case-study.cfg")]));
    let o: OracleOutput = serde_json::from_str(&text).unwrap();
    assert_eq!(o.full_size, 270);
    let init = o
        .report
        .states
        .iter()
        .find(|s| s.state == o.report.initial)
        .unwrap();
    assert!((init.pr_safety - 1.0).abs() < 1e-9);
    assert!((init.pr_buchi - 0.64).abs() < 1e-9);
    assert!(o.optimal_return > 0.0);
}

#[test]
fn translate_prints_tables_and_hoa() {
    let table = ok(lexrl(&["translate", "[](!(d & X d))", "--props", "d"]));
    assert!(table.starts_with("states 3 initial 0"), "{table}");
    assert_eq!(table.lines().filter(|l| l.contains("reject")).count(), 1);
    let hoa = ok(lexrl(&[
        "translate",
        "[](!(d & X d))",
        "--props",
        "d",
        "--hoa",
    ]));
    let a = parse_hoa(&hoa).unwrap();
    assert_eq!(a.num_states(), 3);
    assert_eq!(print_hoa(&a), hoa);
    assert!(!lexrl(&["translate", "[]<>d", "--props", "d"])
        .status
        .success());
}
