//! Command-level tests: dataset generation, vocabulary build, report/ablate
//! table layout, rendering, and process exit codes. Heavy artifacts are built
//! once and shared.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use anchorplan_cli::commands::{self, AblateAxis, EvalArgs};
use anchorplan_cli::config::RunConfig;
use anchorplan_cli::dataset;
use anchorplan_core::diffusion::eval::InitMode;

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("apn_cli_{}_{name}", std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config(root: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.dataset_dir = root.join("data");
    cfg.vocab_path = root.join("vocab.json");
    cfg.checkpoint_path = root.join("model.ckpt");
    cfg.out_dir = root.join("out");
    cfg.seed = 11;
    cfg.scenarios_per_template = 4;
    cfg.epochs = 2;
    cfg
}

/// Shared small pipeline: 24 scenarios, 2 epochs, one evaluation.
struct Fixture {
    cfg: RunConfig,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let root = workdir("fixture");
        let cfg = small_config(&root);
        commands::cmd_gen_data(&cfg, None, None).unwrap();
        commands::cmd_build_vocab(&cfg).unwrap();
        commands::cmd_train(&cfg).unwrap();
        commands::cmd_eval(&cfg, &EvalArgs::default()).unwrap();
        Fixture { cfg }
    })
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn gen_data_is_byte_identical_and_manifest_counts_add_up() {
    let root = workdir("gendata");
    let mut cfg = small_config(&root);
    cfg.scenarios_per_template = 3;
    let dir_a = root.join("a");
    let dir_b = root.join("b");
    commands::cmd_gen_data(&cfg, Some(&dir_a), None).unwrap();
    commands::cmd_gen_data(&cfg, Some(&dir_b), None).unwrap();

    let manifest = dataset::load_manifest(&dir_a).unwrap();
    assert_eq!(manifest.entries.len(), 6 * 3);

    // identical file sets with identical bytes
    let mut names: Vec<String> = manifest.entries.iter().map(|e| e.file.clone()).collect();
    names.push("manifest.json".into());
    for name in names {
        let a = std::fs::read(dir_a.join(&name)).unwrap();
        let b = std::fs::read(dir_b.join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn generated_scenarios_pass_schema_validation() {
    let root = workdir("schema");
    let cfg = small_config(&root);
    commands::cmd_gen_data(&cfg, None, None).unwrap();
    let scenarios = dataset::load_scenarios(&cfg.dataset_dir, &cfg.world).unwrap();
    assert_eq!(scenarios.len(), 24);
    for s in &scenarios {
        s.validate(&cfg.world).unwrap();
    }
}

#[test]
fn vocabulary_file_roundtrips_with_metadata() {
    let f = fixture();
    let (vocab, _) = commands::load_vocab(&f.cfg.vocab_path).unwrap();
    assert_eq!(vocab.anchors.len(), f.cfg.planner.k_static);
    let text = read(&f.cfg.vocab_path);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["corpus_hash"].is_string());
    assert_eq!(v["k"], 16);
}

#[test]
fn expert_eval_scores_near_perfect_per_template() {
    let f = fixture();
    let mut cfg = f.cfg.clone();
    cfg.out_dir = workdir("expert_eval");
    let args = EvalArgs {
        expert_agent: true,
        report_name: "expert.csv".into(),
        ..Default::default()
    };
    let outcome = commands::cmd_eval(&cfg, &args).unwrap();
    for template in anchorplan_core::scene::Template::all() {
        let rows: Vec<_> = outcome
            .reports
            .iter()
            .filter(|r| r.scenario_id.starts_with(template.name()))
            .collect();
        assert!(!rows.is_empty());
        let mean = rows.iter().map(|r| r.epdms).sum::<f64>() / rows.len() as f64;
        assert!(mean >= 0.9, "{}: {mean}", template.name());
    }
    let csv = read(&cfg.out_dir.join("expert.csv"));
    assert!(csv.starts_with("scenario_id,NC,DAC,DDC,TL,EP,TTC,LK,HC,EC,EPDMS"));
    assert!(csv.lines().last().unwrap().starts_with("mean,"));
}

#[test]
fn eval_report_and_plans_are_written() {
    let f = fixture();
    let report = read(&f.cfg.out_dir.join("report.csv"));
    assert_eq!(report.lines().count(), 1 + 24 + 1); // header + rows + mean
    let manifest = dataset::load_manifest(&f.cfg.dataset_dir).unwrap();
    for entry in &manifest.entries {
        assert!(f
            .cfg
            .out_dir
            .join("plans")
            .join(format!("{}.json", entry.id))
            .exists());
    }
}

#[test]
fn eval_with_noise_init_is_supported() {
    let f = fixture();
    let mut cfg = f.cfg.clone();
    cfg.out_dir = workdir("noise_eval");
    let args = EvalArgs {
        init: InitMode::Noise,
        report_name: "noise.csv".into(),
        save_plans: false,
        ..Default::default()
    };
    let outcome = commands::cmd_eval(&cfg, &args).unwrap();
    assert_eq!(outcome.reports.len(), 24);
}

#[test]
fn ablate_tables_have_expected_layout() {
    let f = fixture();
    let mut cfg = f.cfg.clone();
    cfg.out_dir = workdir("ablate");
    let steps_path = commands::cmd_ablate(&cfg, AblateAxis::Steps, None).unwrap();
    let csv = read(&steps_path);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "steps,NC,DAC,DDC,TL,EP,TTC,LK,HC,EC,EPDMS");
    assert_eq!(lines.len(), 6);
    for (i, line) in lines[1..].iter().enumerate() {
        assert!(line.starts_with(&format!("{},", i + 1)));
    }

    let heads_path = commands::cmd_ablate(&cfg, AblateAxis::Heads, None).unwrap();
    let csv = read(&heads_path);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "bev,obj,map,vlm,NC,DAC,DDC,TL,EP,TTC,LK,HC,EC,EPDMS");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0,0,0,0,"));
    assert!(lines[2].starts_with("1,0,0,0,"));
    assert!(lines[5].starts_with("1,1,1,1,"));
}

#[test]
fn render_produces_wellformed_svg_with_twenty_anchors() {
    let f = fixture();
    let manifest = dataset::load_manifest(&f.cfg.dataset_dir).unwrap();
    let id = &manifest.entries[0].id;
    let path = commands::cmd_render(&f.cfg, id, None, None).unwrap();
    let svg = read(&path);

    // well-formedness: tags balance and coordinates are finite
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    let opens = svg.matches("<polyline").count() + svg.matches("<polygon").count();
    let closes = svg.matches("/>").count() + svg.matches("</").count();
    assert!(opens > 0 && closes >= opens);
    assert!(!svg.contains("NaN") && !svg.contains("inf"));

    // hybrid anchor set: 20 anchor polylines, 4 of them dynamic
    assert_eq!(svg.matches("class=\"anchor ").count(), 20);
    assert_eq!(svg.matches("anchor-dynamic").count(), 4);
    assert_eq!(svg.matches("class=\"selected\"").count(), 1);
    assert_eq!(svg.matches("class=\"expert\"").count(), 1);
}

#[test]
fn rendered_selected_path_inverts_back_to_plan_waypoints() {
    let f = fixture();
    let manifest = dataset::load_manifest(&f.cfg.dataset_dir).unwrap();
    let id = &manifest.entries[3].id;
    let path = commands::cmd_render(&f.cfg, id, None, None).unwrap();
    let svg = read(&path);

    let record: commands::PlanRecord = serde_json::from_str(&read(
        &f.cfg.out_dir.join("plans").join(format!("{id}.json")),
    ))
    .unwrap();
    let scenario: anchorplan_core::scene::Scenario = serde_json::from_str(&read(
        &f.cfg.dataset_dir.join("scenarios").join(format!("{id}.json")),
    ))
    .unwrap();
    let vt = anchorplan_cli::svg::ViewTransform::fit(&scenario, 8.0, 20.0);

    let line = svg
        .lines()
        .find(|l| l.contains("class=\"selected\""))
        .unwrap();
    let points_attr = line.split("points=\"").nth(1).unwrap();
    let points_str = points_attr.split('"').next().unwrap();
    let points: Vec<(f64, f64)> = points_str
        .split(' ')
        .map(|p| {
            let mut it = p.split(',');
            (
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    let selected = record.plan.selected_trajectory();
    assert_eq!(points.len(), selected.waypoints.len());
    for ((sx, sy), w) in points.iter().zip(&selected.waypoints) {
        let world = vt.from_svg(*sx, *sy);
        // svg coordinates are printed with 3 decimals
        assert!((world.x - w.x).abs() < 1e-2, "{} vs {}", world.x, w.x);
        assert!((world.y - w.y).abs() < 1e-2);
    }
}

#[test]
fn render_unknown_scenario_is_a_prerequisite_error() {
    let f = fixture();
    let err = commands::cmd_render(&f.cfg, "no-such-id", None, None).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn report_command_prints_summary() {
    let f = fixture();
    let text = commands::cmd_report(&f.cfg.out_dir.join("report.csv")).unwrap();
    assert!(text.contains("EPDMS"));
    assert!(text.contains("NC"));
}

#[test]
fn binary_exit_codes_follow_the_contract() {
    let bin = env!("CARGO_BIN_EXE_anchorplan");
    let root = workdir("exitcodes");

    // missing prerequisite: eval without a dataset
    let out = Command::new(bin)
        .args(["--out"])
        .arg(root.join("o1"))
        .args(["eval"])
        .current_dir(&root)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(last).expect("machine readable error");
    assert_eq!(parsed["code"], 3);

    // config error: unparseable config file
    let bad = root.join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let out = Command::new(bin)
        .args(["--config"])
        .arg(&bad)
        .args(["gen-data"])
        .current_dir(&root)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    // config error: invalid ablation axis
    let out = Command::new(bin)
        .args(["ablate", "--axis", "bogus"])
        .current_dir(&root)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn checkpoint_vocab_hash_mismatch_is_rejected() {
    let f = fixture();
    let root = workdir("hash_mismatch");
    let mut cfg = f.cfg.clone();
    cfg.out_dir = root.join("out");
    // rebuild the vocabulary from a different dataset: hash changes
    let other_data = root.join("data2");
    let mut cfg2 = cfg.clone();
    cfg2.dataset_dir = other_data.clone();
    cfg2.vocab_path = root.join("vocab2.json");
    cfg2.seed = 99;
    commands::cmd_gen_data(&cfg2, None, None).unwrap();
    commands::cmd_build_vocab(&cfg2).unwrap();

    cfg.vocab_path = cfg2.vocab_path.clone();
    let err = commands::cmd_eval(&cfg, &EvalArgs::default()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}
