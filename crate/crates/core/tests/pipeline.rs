mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use menuplan::embed::MatchStage;
use menuplan::pipeline::{exit, run_pipeline, Artifacts, PipelineConfig, PipelineError, Stage};
use menuplan::planner::{PlanError, SolutionFile};
use menuplan::{EmbeddingProvider, TrigramHasher};

fn cli(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_menuplan")).args(args).arg("--config").arg(config).output().unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().expect("stderr line")).unwrap()
}

#[test]
fn full_run_writes_every_report_and_is_reproducible() {
    let (dir, config) = common::small_fixture();
    let config = PipelineConfig::load(&config).unwrap();
    let first = run_pipeline(&config);
    assert!(first.failure.is_none(), "{:?}", first.failure);
    assert_eq!(first.exit_code(), exit::SUCCESS);
    let stages: Vec<Stage> = first.stages.iter().map(|s| s.stage).collect();
    assert_eq!(stages, [Stage::Ingest, Stage::Match, Stage::Nutrition, Stage::Pricing, Stage::Plan]);

    let solution = first.solution.as_ref().unwrap();
    assert!(solution.solution.optimal);
    assert!(solution.audit.passed());
    assert_eq!(solution.solution.selected.len(), 4);

    let written: SolutionFile =
        serde_json::from_str(&fs::read_to_string(first.artifact("plan_solution.json").unwrap()).unwrap()).unwrap();
    assert_eq!(&written, solution);

    let out = dir.path().join("out");
    let snapshot: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    assert_eq!(snapshot.len(), 12);
    let second = run_pipeline(&config);
    assert!(second.failure.is_none());
    for (name, bytes) in snapshot {
        assert_eq!(fs::read(out.join(&name)).unwrap(), bytes, "{name} changed between runs");
    }
}

#[test]
fn report_files_have_expected_headers() {
    let (dir, config) = common::small_fixture();
    run_pipeline(&PipelineConfig::load(&config).unwrap());
    let header = |f: &str| fs::read_to_string(dir.path().join("out").join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("price_report.csv"), "recipe_id,category,predicted_cost,percent_change");
    assert_eq!(header("review_queue.csv"), "ingredient_text,rank,mfd_id,score");
    assert_eq!(header("matches.csv"), "ingredient_text,mfd_id,score,stage,decided_by");
    assert_eq!(header("rejections.csv"), "file,line,kind,record_id,field,message");
    assert!(header("nutrition_report.csv").starts_with("recipe_id,category,calories,protein,"));
    let report = fs::read_to_string(dir.path().join("out/price_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 9);
}

#[test]
fn artifacts_carry_through_fixture_values() {
    let (_dir, config) = common::small_fixture();
    let a = Artifacts::compute(&PipelineConfig::load(&config).unwrap()).unwrap();
    assert_eq!(a.snapshot.recipes.len(), 8);
    assert_eq!(a.profiles.len(), 8);
    assert_eq!(a.costs.len(), 8);
    // Twelve of nineteen ingredients were confirmed by review; the rest
    // cleared the threshold.
    let reviewed = a.matches.records.iter().filter(|r| r.stage == MatchStage::ReviewedTop5).count();
    assert_eq!((a.matches.records.len(), reviewed), (19, 12));

    // Lentil soup: 192 g lentils, 128 g carrots, 110 g onion, 1 g salt over 6 servings.
    let lentil = &a.profiles["r08"];
    let expected = (192.0 * 24.6 + 128.0 * 0.9 + 110.0 * 1.1) / 100.0 / 6.0;
    assert!((lentil.protein - expected).abs() < 1e-9, "{} vs {expected}", lentil.protein);

    // Beef chili, 1 lb ground beef: P(B) = 2/3 over 4.10 and 4.25, Beef +6.8 %.
    let beef = a.price_book.get("ground beef 80 20").unwrap();
    assert!((beef.buy_probability - 2.0 / 3.0).abs() < 1e-12);
    assert!((beef.mean_unit_price - 4.175).abs() < 1e-12);
    let c = a.costs["r01"];
    assert!(c.predicted > c.estimated);
}

#[test]
fn unmatched_ingredient_halts_before_nutrition() {
    let (dir, config) = common::small_fixture();
    common::rewrite(&dir.path().join("recipes.csv"), |s| s + "r09,Odd Bake,Beef,2,,0,Zzyzx quorbl,1,cup,\n");
    let result = run_pipeline(&PipelineConfig::load(&config).unwrap());
    let failure = result.failure.unwrap();
    assert_eq!(failure.stage, Stage::Match);
    assert!(matches!(failure.error, PipelineError::Unresolved { count: 1, .. }));
    assert_eq!(failure.error.exit_code(), exit::VALIDATION);
    assert!(!dir.path().join("out/nutrition_report.csv").exists());
    let queue = fs::read_to_string(dir.path().join("out/review_queue.csv")).unwrap();
    assert_eq!(queue.lines().count(), 6);
}

#[test]
fn infeasible_bounds_fail_only_the_plan_stage() {
    let (_dir, config) = common::small_fixture();
    common::rewrite(&config, |s| s.replace("p_min = 15.0", "p_min = 500.0"));
    let result = run_pipeline(&PipelineConfig::load(&config).unwrap());
    assert_eq!(result.stages.iter().filter(|s| s.ok).count(), 4);
    let failure = result.failure.unwrap();
    assert_eq!(failure.stage, Stage::Plan);
    match &failure.error {
        PipelineError::Plan(PlanError::Infeasible(why)) => assert_eq!(why.constraint(), "protein"),
        other => panic!("{other:?}"),
    }
    assert_eq!(failure.error.exit_code(), exit::INFEASIBLE);
}

#[test]
fn schema_violation_is_reported_and_blocks() {
    let (dir, config) = common::small_fixture();
    common::rewrite(&dir.path().join("recipes.csv"), |s| s.replacen("r01,Beef Chili,Beef,4", "r01,Beef Chili,Beef,zero", 1));
    let out = cli(&["ingest"], &config);
    assert_eq!(out.status.code(), Some(exit::VALIDATION));
    assert_eq!(stderr_json(&out)["error"], "SchemaViolation");
    let rejections = fs::read_to_string(dir.path().join("out/rejections.csv")).unwrap();
    assert!(rejections.contains("r01") && rejections.contains("servings"), "{rejections}");
}

#[test]
fn missing_input_file_exits_with_io_code() {
    let (dir, config) = common::small_fixture();
    fs::remove_file(dir.path().join("invoices.csv")).unwrap();
    let out = cli(&["pipeline"], &config);
    assert_eq!(out.status.code(), Some(exit::IO));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "FileUnreadable");
    assert_eq!(err["stage"], "ingest");
}

#[test]
fn config_rejects_unknown_keys_and_resolves_relative_paths() {
    let (dir, config) = common::small_fixture();
    let loaded = PipelineConfig::load(&config).unwrap();
    assert_eq!(loaded.resolve(&loaded.recipes), dir.path().join("recipes.csv"));
    assert_eq!(loaded.m, 4);
    common::rewrite(&config, |s| s + "colour = \"blue\"\n");
    let err = PipelineConfig::load(&config).unwrap_err();
    assert!(err.to_string().contains("colour"), "{err}");
    let out = cli(&["ingest"], &config);
    assert_eq!(out.status.code(), Some(exit::VALIDATION));
    assert_eq!(stderr_json(&out)["error"], "InvalidConfig");
}

#[test]
fn cli_stage_commands_succeed_on_the_fixture() {
    let (dir, config) = common::small_fixture();
    for cmd in ["ingest", "match", "nutrition", "price", "report"] {
        let out = cli(&[cmd], &config);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let _: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    }
    let report: serde_json::Value = serde_json::from_slice(&cli(&["report"], &config).stdout).unwrap();
    assert_eq!(report["matching"]["ingredients"], 19);
    assert_eq!(report["corpus"]["recipes"], 8);
    assert!(dir.path().join("out/price_history.csv").is_file());
}

#[test]
fn cli_plan_overrides_and_problem_files() {
    let (dir, config) = common::small_fixture();
    let out = cli(&["plan", "--m", "8"], &config);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let solution: SolutionFile = serde_json::from_str(&fs::read_to_string(dir.path().join("out/plan_solution.json")).unwrap()).unwrap();
    assert_eq!(solution.solution.selected.len(), 8);

    let out = cli(&["plan", "--f-max", "0"], &config);
    assert_eq!(out.status.code(), Some(exit::INFEASIBLE));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "Infeasible");
    assert!(err["detail"].as_str().unwrap().contains("fat:"), "{err}");

    // Solving a saved problem directly.
    let problem = dir.path().join("out/plan_problem.json");
    let saved = dir.path().join("solved.json");
    let out = Command::new(env!("CARGO_BIN_EXE_menuplan"))
        .args(["plan", "--problem"])
        .arg(&problem)
        .args(["--m", "4", "--f-max", "30", "--out"])
        .arg(&saved)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let direct: SolutionFile = serde_json::from_str(&fs::read_to_string(saved).unwrap()).unwrap();
    assert_eq!(direct.solution.selected.len(), 4);
    assert!(direct.solution.optimal);
}

#[test]
fn precomputed_vectors_reproduce_the_builtin_matches() {
    let (dir, config) = common::small_fixture();
    let builtin = Artifacts::compute(&PipelineConfig::load(&config).unwrap()).unwrap();
    let mut texts: Vec<String> = builtin.snapshot.distinct_ingredients().into_iter().collect();
    texts.extend(builtin.snapshot.nutrition.iter().map(|e| menuplan::text::normalize(&e.description)));
    let mut tsv = String::new();
    for t in &texts {
        let v = TrigramHasher.embed(t).unwrap();
        let vals: Vec<String> = v.values().iter().map(|x| x.to_string()).collect();
        tsv.push_str(&format!("{t}\t{}\n", vals.join(" ")));
    }
    fs::write(dir.path().join("vectors.tsv"), tsv).unwrap();
    common::rewrite(&config, |s| s + "vectors = \"vectors.tsv\"\n");
    let loaded = Artifacts::compute(&PipelineConfig::load(&config).unwrap()).unwrap();
    assert_eq!(loaded.matches, builtin.matches);
}
