use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cvst::estimators::{Ordering, Stat};
use cvst::grid::GridSpec;
use cvst::oracles::{OracleCurve, OracleMethod};
use cvst_cli::commands::{self, EstimateInput};
use cvst_cli::config::{ExperimentConfig, Overrides};
use cvst_cli::fieldio::{read_binary, read_field, read_points, read_raw, write_field};
use cvst_cli::manifest::{files_on_disk, RunManifest, Status};
use cvst_cli::tables::{read_envelopes, write_oracles};
use sha2::{Digest, Sha256};

const BOOLEAN: &str = r#"
[model]
kind = "boolean-pair"
lambda = 1.0
r = 0.3

[grid]
x_max = 4.0
y_max = 4.0
h = 0.1

[run]
replicates = 6
seed = 11
t_max = 1.0
t_steps = 5
"#;

const GAMMA: &str = r#"
[model]
kind = "compound"
law = { kind = "linked", scale = 1.0, base = { kind = "gamma", shape = 2.0, rate = 2.0 } }

[grid]
x_max = 6.0
y_max = 6.0
h = 0.1

[run]
replicates = 80
seed = 5
t_max = 1.0
t_steps = 4
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn cvst(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cvst"));
    c.args(args).env_remove("CVST_JOBS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    files_on_disk(dir)
        .unwrap()
        .into_iter()
        .filter(|f| f.ends_with(".csv") || f.ends_with(".field"))
        .map(|f| {
            let bytes = std::fs::read(dir.join(&f)).unwrap();
            (f, bytes)
        })
        .collect()
}

fn assert_manifest_complete(dir: &Path) -> RunManifest {
    let m = RunManifest::read(dir).unwrap();
    let listed: Vec<String> = m.files.iter().map(|f| f.path.clone()).collect();
    assert_eq!(listed, files_on_disk(dir).unwrap(), "orphan or missing files in {}", dir.display());
    for f in &m.files {
        let bytes = std::fs::read(dir.join(&f.path)).unwrap();
        assert_eq!(f.sha256, format!("{:x}", Sha256::digest(&bytes)), "{}", f.path);
    }
    m
}

#[test]
fn outputs_do_not_depend_on_the_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "b.toml", BOOLEAN);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(cvst(&["--jobs", "1", "estimate", "--config", s(&cfg), "--out", s(&a)], &[]).status.success());
    assert!(cvst(&["estimate", "--config", s(&cfg), "--out", s(&b)], &[("CVST_JOBS", "3")]).status.success());
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert!(fa.iter().any(|(f, _)| f == "envelope.csv"));
    assert_eq!(fa, fb);
    assert_eq!(RunManifest::read(&a).unwrap().config_hash, RunManifest::read(&b).unwrap().config_hash);
}

#[test]
fn reruns_reproduce_identical_files_and_complete_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(BOOLEAN, "inline").unwrap();
    let out = dir.path().join("sim");
    commands::simulate(&cfg, &out).unwrap();
    let m = assert_manifest_complete(&out);
    assert_eq!(m.status, Status::Complete);
    assert_eq!(m.replicates.len(), 6);
    assert_eq!(m.replicates[2].stream_base, 2 << 16);
    let first = csv_files(&out);
    commands::simulate(&cfg, &out).unwrap();
    assert_manifest_complete(&out);
    assert_eq!(first, csv_files(&out));
}

#[test]
fn estimates_from_stored_realizations_match_direct_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(BOOLEAN, "inline").unwrap();
    let (sim, from_dir, direct) = (dir.path().join("sim"), dir.path().join("e1"), dir.path().join("e2"));
    commands::simulate(&cfg, &sim).unwrap();
    commands::estimate(EstimateInput::Realizations(sim.clone(), Overrides::default()), &from_dir).unwrap();
    commands::estimate(EstimateInput::Config(Box::new(cfg)), &direct).unwrap();
    assert_manifest_complete(&from_dir);
    assert_eq!(csv_files(&from_dir), csv_files(&direct));
    let curves = commands::read_estimate_curves(&direct, Stat::K12, Ordering::TwoOne).unwrap();
    assert_eq!(curves.len(), 6);
    assert!(curves.iter().all(|c| c.ordering == Ordering::TwoOne && c.t.len() == 5));
}

#[test]
fn replicate_grid_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(BOOLEAN, "inline").unwrap();
    let sim = dir.path().join("sim");
    commands::simulate(&cfg, &sim).unwrap();
    let other = GridSpec::new(0.0, 4.0, 0.0, 4.0, 0.2, 0.0).unwrap();
    write_field(&sim.join("rep-0003/psi2.field"), &cvst::Field::constant(other, 1.0).unwrap()).unwrap();
    let out = dir.path().join("est");
    let e = commands::estimate(EstimateInput::Realizations(sim, Overrides::default()), &out).unwrap_err();
    let msg = format!("{e:#}");
    assert!(msg.contains("grid mismatch in replicate 3"), "{msg}");
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.status, Status::Failed);
    assert!(m.error.unwrap().contains("replicate 3"));
    assert_manifest_complete(&out);
}

#[test]
fn unknown_keys_fail_with_the_key_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[model]\nkind = \"wr-mixture\"\nbeta1 = 1.0\nbeta2 = 1.0\nbeta3 = 1.0\nr = 1.0\n";
    let cfg = write_config(dir.path(), "wr.toml", text);
    let out = dir.path().join("never");
    let o = cvst(&["simulate", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("beta3") && err.contains("wr.toml"), "{err}");
    assert!(!out.exists(), "nothing runs before the config validates");
}

#[test]
fn constant_compound_fields_are_identically_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[model]\nkind = \"compound\"\nlaw = { kind = \"constant\", c1 = 1.0, c2 = 1.0 }\n\
                [grid]\nx_max = 3.0\ny_max = 2.0\nh = 0.1\n[run]\nreplicates = 1\nt_max = 0.5\nt_steps = 2\n";
    let cfg = ExperimentConfig::parse(text, "inline").unwrap();
    let out = dir.path().join("sim");
    commands::simulate(&cfg, &out).unwrap();
    let grid = cfg.grid_spec();
    for f in ["rep-0000/psi1.field", "rep-0000/psi2.field"] {
        let psi = read_field(&out.join(f), &grid).unwrap();
        assert!(psi.values().iter().all(|&v| v == 1.0), "{f}");
    }
    assert!(!out.join("rep-0000/x1.field").exists());
    assert_manifest_complete(&out);
}

#[test]
fn wr_realizations_are_cross_hard_core() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[model]\nkind = \"wr-mixture\"\nbeta1 = 1.0\nbeta2 = 1.0\nr = 1.0\n\
                [grid]\nx_max = 5.0\ny_max = 5.0\nh = 0.05\n[run]\nreplicates = 1\nseed = 3\nt_max = 1.0\nt_steps = 4\n";
    let cfg = ExperimentConfig::parse(text, "inline").unwrap();
    let out = dir.path().join("sim");
    commands::simulate(&cfg, &out).unwrap();
    let rep = out.join("rep-0000");
    let (g1, g2) = (read_points(&rep.join("points1.csv")).unwrap(), read_points(&rep.join("points2.csv")).unwrap());
    assert!(!g1.is_empty() && !g2.is_empty());
    for a in &g1 {
        for b in &g2 {
            assert!(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() >= 1.0);
        }
    }
    let grid = cfg.grid_spec();
    let (x1, x2) = (read_binary(&rep.join("x1.field"), &grid).unwrap(), read_binary(&rep.join("x2.field"), &grid).unwrap());
    assert!(x1.count() > 0 && x2.count() > 0);
    assert!(x1.values().iter().zip(x2.values()).all(|(a, b)| !(*a && *b)));
}

#[test]
fn field_files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::new(-1.0, 2.0, 0.5, 1.5, 0.25, 0.0).unwrap();
    let values: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.37).sin() / 3.0).collect();
    let f = cvst::Field::signed(g, values).unwrap();
    let p = dir.path().join("f.field");
    write_field(&p, &f).unwrap();
    assert_eq!(std::fs::metadata(&p).unwrap().len(), 64 + 8 * g.len() as u64);
    let back = read_field(&p, &g).unwrap();
    assert_eq!(back, f);
    let (h, raw) = read_raw(&p).unwrap();
    assert!(h.signed && (h.nx, h.ny) == (12, 4));
    assert_eq!(raw[g.index(3, 1)], f.get(3, 1));
    assert!(read_field(&p, &GridSpec::new(-1.0, 2.0, 0.5, 1.5, 0.5, 0.0).unwrap()).is_err());
}

#[test]
fn compare_passes_a_correct_run_and_flags_halved_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", GAMMA);
    let half = write_config(dir.path(), "half.toml", &GAMMA.replace("t_steps = 4", "t_steps = 4\np1_scale = 0.5"));
    for (cfg, name, code) in [(&good, "good", 0), (&half, "half", 3)] {
        let est = dir.path().join(name);
        assert!(cvst(&["estimate", "--config", s(cfg), "--out", s(&est)], &[]).status.success());
        let report = dir.path().join(format!("{name}-report"));
        let o = cvst(&["compare", "--estimate", s(&est), "--out", s(&report)], &[]);
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert_eq!(o.status.code(), Some(code), "{stdout}");
        assert_manifest_complete(&report);
    }
    let report = commands::compare(&dir.path().join("half"), &dir.path().join("half"), None, None).unwrap();
    let k = report.curves.iter().find(|c| c.stat == Stat::K12).unwrap();
    let ratio = k.rows.last().map(|r| r.mean.unwrap() / r.oracle).unwrap();
    assert!((ratio - 4.0).abs() < 1.0, "K12 inflated by {ratio}");
}

#[test]
fn identical_curves_compare_with_zero_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(BOOLEAN, "inline").unwrap();
    let est = dir.path().join("est");
    commands::estimate(EstimateInput::Config(Box::new(cfg)), &est).unwrap();
    let envs = read_envelopes(&est.join("envelope.csv")).unwrap();
    let pooled = read_envelopes(&est.join("pooled.csv")).unwrap();
    let fake: Vec<OracleCurve> = envs
        .iter()
        .filter(|e| e.stat == Stat::K12 || e.stat == Stat::J12)
        .map(|e| {
            let centre = if e.stat == Stat::J12 { pooled.iter().find(|p| p.ordering == e.ordering).unwrap() } else { e };
            OracleCurve {
                stat: e.stat,
                ordering: e.ordering,
                t: e.t.clone(),
                values: centre.mean.iter().map(|m| m.unwrap()).collect(),
                method: OracleMethod::ClosedForm,
            }
        })
        .collect();
    let odir = dir.path().join("oracle");
    std::fs::create_dir(&odir).unwrap();
    write_oracles(&odir.join("oracle.csv"), &fake).unwrap();
    let report = commands::compare(&est, &odir, None, None).unwrap();
    assert!(report.passed);
    assert_eq!(report.curves.len(), 4);
    for c in &report.curves {
        assert_eq!(c.max_relative_deviation, Some(0.0));
        assert_eq!(c.max_z, Some(0.0));
    }
}

#[test]
fn compare_rejects_mismatched_t_grids() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(BOOLEAN, "inline").unwrap();
    let est = dir.path().join("est");
    commands::estimate(EstimateInput::Config(Box::new(cfg.clone())), &est).unwrap();
    let mut other = cfg;
    other.apply(&Overrides { t_steps: Some(4), ..Overrides::default() }).unwrap();
    let odir = dir.path().join("oracle");
    commands::oracle(&other, &odir).unwrap();
    let e = commands::compare(&est, &odir, None, None).unwrap_err();
    assert!(format!("{e:#}").contains("grid mismatch"), "{e:#}");
}

#[test]
fn wr_models_have_no_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "wr.toml", "[model]\nkind = \"dual-wr\"\nbeta1 = 0.25\nbeta2 = 0.25\nr = 1.0\n");
    let out = dir.path().join("o");
    let o = cvst(&["oracle", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no oracle is available for the dual-wr model"));
    let m = assert_manifest_complete(&out);
    assert_eq!(m.status, Status::Failed);
    assert!(!out.join("oracle.csv").exists());
}

#[test]
fn boolean_oracles_are_independence_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(BOOLEAN, "inline").unwrap();
    let out = dir.path().join("o");
    commands::oracle(&cfg, &out).unwrap();
    let text = std::fs::read_to_string(out.join("oracle.csv")).unwrap();
    assert!(text.starts_with("stat,ordering,t,value,replicate,method\n"));
    let k1 = text.lines().find(|l| l.starts_with("K12,12,1,")).unwrap();
    let v: f64 = k1.split(',').nth(3).unwrap().parse().unwrap();
    assert!((v - std::f64::consts::PI).abs() < 1e-9, "{k1}");
    assert!(text.lines().filter(|l| l.starts_with("J12,")).all(|l| l.split(',').nth(3) == Some("1")));
}

#[test]
fn reproduce_figure_records_its_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig");
    let args = ["reproduce-figure", "thinning", "--out", s(&out), "--replicates", "2", "--h", "0.2", "--t-steps", "5"];
    let o = cvst(&args, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = assert_manifest_complete(&out);
    assert_eq!(m.command, "reproduce-figure thinning");
    assert_eq!(m.defaults["replicates"], "2");
    assert_eq!(m.defaults["t_max"], "2");
    assert_eq!(m.model, "thinning-field");
    for f in ["rep-0000/psi1.field", "rep-0000/x2.field", "envelope.csv", "oracle.csv", "curves/L12_21.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}
