use std::fs;
use std::path::Path;
use std::process::Command;

use vnembed::sim::{EmbedderKind, Sample};
use vnembed_cli::experiment::Trace;
use vnembed_cli::output::{read_csv, read_json, read_samples, write_json};
use vnembed_cli::scaling::{rows, run_batches};
use vnembed_cli::{run_experiment, verify_dir, Aggregate, Estimate, ExperimentSpec, Overrides};

const SMALL: &str = r#"
name = "small"
replications = 3
seed_base = 11

[base]
time_limit_s = "none"
work_limit = 5000

[base.workload]
n_arrivals = 30

[[cells]]
name = "pg"
embedder = "pathgen"

[[cells]]
name = "greedy"
embedder = "gnmsp"
"#;

#[test]
fn presets_encode_the_evaluation_setup() {
    let small = ExperimentSpec::preset("paper-small").unwrap();
    assert_eq!(small.replications, 20);
    assert_eq!(small.cells.len(), 3);
    for c in &small.cells {
        let cfg = &c.config;
        assert_eq!(cfg.substrate.n_nodes, 20);
        assert_eq!((cfg.substrate.hs, cfg.substrate.ls), (500.0, 500.0));
        assert_eq!((cfg.substrate.alpha, cfg.substrate.beta, cfg.substrate.m_neighbors), (0.15, 0.2, 3));
        assert_eq!((cfg.substrate.cap_min, cfg.substrate.cap_max), (50, 100));
        assert_eq!((cfg.workload.vn_size_min, cfg.workload.vn_size_max), (3, 10));
        assert_eq!(cfg.workload.arrival_rate, 1.0 / 3.0);
        assert_eq!(cfg.workload.mean_lifetime, 60.0);
        assert_eq!(cfg.workload.n_arrivals, 1500);
        assert_eq!((cfg.workload.cpu_min, cfg.workload.cpu_max), (2, 10));
        assert_eq!((cfg.workload.bw_min, cfg.workload.bw_max), (10, 20));
        assert_eq!((cfg.workload.dev_min, cfg.workload.dev_max), (100.0, 150.0));
        assert_eq!(cfg.workload.m_neighbors, 2);
        assert_eq!(cfg.iterations, 1);
    }
    let large = ExperimentSpec::preset("paper-large").unwrap();
    for c in &large.cells {
        assert_eq!(c.config.substrate.n_nodes, 100);
        assert_eq!((c.config.workload.vn_size_min, c.config.workload.vn_size_max), (15, 25));
    }
    assert!(ExperimentSpec::preset("paper-medium").is_none());
}

#[test]
fn spec_files_merge_onto_the_preset() {
    let spec = ExperimentSpec::from_toml(SMALL).unwrap();
    assert_eq!(spec.replications, 3);
    assert_eq!(spec.cells[0].config.embedder, EmbedderKind::Pathgen);
    assert_eq!(spec.cells[1].config.embedder, EmbedderKind::Gnmsp);
    for c in &spec.cells {
        assert_eq!(c.config.time_limit_s, None);
        assert_eq!(c.config.work_limit, Some(5000));
        assert_eq!(c.config.workload.n_arrivals, 30);
        assert_eq!(c.config.workload.mean_lifetime, 60.0);
    }
    assert_eq!(spec.config(&spec.cells[1], 2).seed, 13);

    let cell_level =
        SMALL.replace("name = \"greedy\"", "name = \"greedy\"\niterations = 4\nsubstrate = { n_nodes = 12 }");
    let spec = ExperimentSpec::from_toml(&cell_level).unwrap();
    assert_eq!(spec.cells[1].config.iterations, 4);
    assert_eq!(spec.cells[1].config.substrate.n_nodes, 12);
    assert_eq!(spec.cells[1].config.substrate.cap_max, 100);
    assert_eq!(spec.cells[0].config.substrate.n_nodes, 20);
}

#[test]
fn invalid_specs_are_rejected() {
    for bad in [
        SMALL.replace("replications = 3", "replications = 0"),
        SMALL.replace("name = \"greedy\"", "name = \"pg\""),
        SMALL.replace("n_arrivals = 30", "n_arivals = 30"),
        SMALL.replace("embedder = \"gnmsp\"", "embedder = \"random\""),
        SMALL.replace("[base]", "preset = \"nowhere\"\n[base]"),
        SMALL.replace("[base]", "[base]\nsample_interval = 0.0"),
        SMALL.replace("[base]", "[scaling]\nsizes = [30, 20]\nrequests = 2\n[base]"),
    ] {
        assert!(ExperimentSpec::from_toml(&bad).is_err(), "accepted:\n{bad}");
    }
    let mut spec = ExperimentSpec::from_toml(SMALL).unwrap();
    assert!(spec.apply(&Overrides { replications: Some(0), ..Default::default() }).is_err());
}

#[test]
fn one_cell_one_replication_writes_one_csv_and_the_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::from_toml(SMALL).unwrap();
    spec.cells.truncate(1);
    spec.replications = 1;
    let agg = run_experiment(&spec, dir.path(), Some(1)).unwrap();
    assert!(agg.complete);
    let csvs: Vec<_> = fs::read_dir(dir.path().join("pg"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("run-") && n.ends_with(".csv"))
        .collect();
    assert_eq!(csvs, vec!["run-0.csv".to_string()]);
    assert!(dir.path().join("aggregate.json").is_file());
    let first = fs::read_to_string(dir.path().join("pg/run-0.csv")).unwrap();
    assert!(first.starts_with(&format!("# vnembed {} schema 1 samples cell pg seed 11\n", vnembed_cli::VERSION)));
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn aggregate_matches_offline_reaggregation() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::from_toml(SMALL).unwrap();
    let agg = run_experiment(&spec, dir.path(), Some(1)).unwrap();
    let on_disk: Aggregate = read_json(&dir.path().join("aggregate.json")).unwrap();
    assert_eq!(on_disk, agg);
    // Student t quantile for 0.975 with 2 degrees of freedom.
    let t2 = 4.302652729911275;
    for cell in &agg.cells {
        let runs: Vec<Vec<Sample>> =
            (0..3).map(|k| read_samples(&dir.path().join(format!("{}/run-{k}.csv", cell.name))).unwrap()).collect();
        let acc: Vec<f64> = runs.iter().map(|r| r.last().unwrap().acceptance_ratio).collect();
        let link: Vec<f64> =
            runs.iter().map(|r| mean(&r.iter().map(|s| s.link_utilization).collect::<Vec<_>>())).collect();
        let cost: Vec<f64> = runs.iter().map(|r| r.last().unwrap().cost).collect();
        for (xs, est) in [(&acc, &cell.acceptance_ratio), (&link, &cell.link_utilization), (&cost, &cell.cost)] {
            let m = mean(xs);
            let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 2.0).sqrt();
            let want = t2 * sd / 3f64.sqrt();
            assert!((est.mean - m).abs() <= 1e-12 * m.abs().max(1.0));
            assert!((est.half_width.unwrap() - want).abs() <= 1e-9 * want.max(1.0), "{est:?} vs {want}");
            assert_eq!(est.n, 3);
        }
        let requests: Vec<vnembed_cli::experiment::RequestRow> =
            read_csv(&dir.path().join(format!("{}/requests-0.csv", cell.name))).unwrap();
        assert_eq!(requests.len(), 30);
        assert_eq!(cell.requests, 90);
    }
    assert!(verify_dir(dir.path(), false).unwrap().ok());
}

#[test]
fn estimate_edge_cases() {
    assert_eq!(Estimate::of(&[]), Estimate { mean: 0.0, half_width: None, n: 0 });
    assert_eq!(Estimate::of(&[2.5]), Estimate { mean: 2.5, half_width: None, n: 1 });
    let e = Estimate::of(&[1.0, 2.0, 3.0, 4.0]);
    // t(0.975, 3) = 3.182446305284263, sd = sqrt(5/3).
    assert!((e.half_width.unwrap() - 3.182446305284263 * (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
    assert_eq!(Estimate::of(&[7.0; 5]).half_width, Some(0.0));
}

#[test]
fn outputs_are_deterministic_except_timing() {
    let spec = ExperimentSpec::from_toml(SMALL).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&spec, a.path(), Some(1)).unwrap();
    run_experiment(&spec, b.path(), Some(2)).unwrap();
    for cell in ["pg", "greedy"] {
        for k in 0..3 {
            let csv = format!("{cell}/run-{k}.csv");
            assert_eq!(fs::read(a.path().join(&csv)).unwrap(), fs::read(b.path().join(&csv)).unwrap());
            let ta: Trace = read_json(&a.path().join(format!("{cell}/run-{k}.json"))).unwrap();
            let tb: Trace = read_json(&b.path().join(format!("{cell}/run-{k}.json"))).unwrap();
            assert_eq!(vnembed_cli::verify::strip_timing(&ta.metrics), vnembed_cli::verify::strip_timing(&tb.metrics));
        }
    }
}

fn tamper(path: &Path, f: impl FnOnce(&mut Trace)) {
    let mut t: Trace = read_json(path).unwrap();
    f(&mut t);
    write_json(path, &t).unwrap();
}

#[test]
fn verify_catches_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::from_toml(SMALL).unwrap();
    spec.replications = 1;
    run_experiment(&spec, dir.path(), Some(1)).unwrap();
    let clean = verify_dir(dir.path(), true).unwrap();
    assert!(clean.ok(), "{:?}", clean.violations);
    assert_eq!((clean.runs, clean.replayed), (2, 2));

    let trace = dir.path().join("pg/run-0.json");
    let original = fs::read(&trace).unwrap();
    tamper(&trace, |t| {
        let r = t.metrics.requests.iter_mut().find(|r| r.accepted).unwrap();
        let e = r.embedding.as_mut().unwrap();
        e.node_map.swap(0, 1);
    });
    assert!(!verify_dir(dir.path(), false).unwrap().ok());

    fs::write(&trace, &original).unwrap();
    tamper(&trace, |t| t.metrics.samples[1].revenue += 1.0);
    assert!(!verify_dir(dir.path(), false).unwrap().ok());

    fs::write(&trace, &original).unwrap();
    tamper(&trace, |t| {
        let r = t.metrics.requests.iter_mut().find(|r| r.accepted).unwrap();
        r.accepted = false;
        r.embedding = None;
    });
    assert!(!verify_dir(dir.path(), false).unwrap().ok());

    fs::write(&trace, &original).unwrap();
    let agg_path = dir.path().join("aggregate.json");
    let mut agg: Aggregate = read_json(&agg_path).unwrap();
    agg.cells[0].acceptance_ratio.mean += 0.01;
    write_json(&agg_path, &agg).unwrap();
    assert!(!verify_dir(dir.path(), false).unwrap().ok());
}

#[test]
fn scaling_rows_and_censoring() {
    let text = SMALL.replace("embedder = \"gnmsp\"", "embedder = \"vineopt\"\nwork_limit = 2");
    let mut spec = ExperimentSpec::from_toml(&text).unwrap();
    spec.replications = 2;
    spec.scaling.sizes = vec![15];
    spec.scaling.requests = 4;
    let batches = run_batches(&spec, Some(1)).unwrap();
    assert_eq!(batches.len(), 4);
    let table = rows(&spec, &batches);
    assert_eq!(table.len(), 2);
    let vine = &table[1];
    assert_eq!((vine.size, vine.requests, vine.replications), (15, 8, 2));
    // Requests with candidates cannot be solved in two simplex iterations.
    let solvable = batches
        .iter()
        .filter(|b| b.cell == "greedy")
        .flat_map(|b| &b.requests)
        .filter(|r| r.simplex_iterations.is_some())
        .count();
    assert_eq!(vine.censored, solvable);
    assert!(vine.censored > 0);

    spec.cells.truncate(1);
    assert_eq!(rows(&spec, &run_batches(&spec, Some(1)).unwrap()).len(), 1);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vnembed"))
}

#[test]
fn binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("small.toml");
    fs::write(&spec_path, SMALL).unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args([
            "run",
            spec_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--replications",
            "1",
            "--arrivals",
            "10",
            "--seed",
            "5",
        ])
        .args(["--work-limit", "5000", "--time-limit-s", "none"])
        .status()
        .unwrap();
    assert!(status.success());
    let trace: Trace = read_json(&out.join("pg/run-0.json")).unwrap();
    assert_eq!((trace.config.seed, trace.config.workload.n_arrivals), (5, 10));
    assert_eq!((trace.config.work_limit, trace.config.time_limit_s), (Some(5000), None));
    assert!(bin().args(["verify", out.to_str().unwrap(), "--rerun"]).status().unwrap().success());

    let inst = dir.path().join("inst.json");
    assert!(bin()
        .args(["gen", "--nodes", "8", "--arrivals", "3", "--out", inst.to_str().unwrap()])
        .status()
        .unwrap()
        .success());
    let doc: serde_json::Value = read_json(&inst).unwrap();
    assert_eq!(doc["workload"]["requests"].as_array().unwrap().len(), 3);
    assert_eq!(doc["config"]["substrate"]["n_nodes"], 8);

    assert!(!bin().args(["run", "no-such-preset"]).status().unwrap().success());
}
