//! The subcommands, as library functions.
//!
//! Each command writes into its own output directory through
//! [`Outputs`]. Replicates are computed in parallel chunks and written in
//! replicate order from the calling thread, so outputs do not depend on the
//! thread count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use cvst::estimators::{pooled_ratio, Envelope, Ordering, Stat, StatCurve};
use cvst::measure::{MeasurePair, P1Source};
use cvst::models::{
    collect_curves, envelopes, realization_curves, CoverageFunctions, P1Mode, PreparedModel, Realization,
    ReplicateCurves,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Overrides};
use crate::fieldio::{read_binary, read_field, write_binary, write_field, write_points};
use crate::manifest::{Outputs, ReplicateSeed, RunManifest, Status};
use crate::tables::{read_envelopes, read_oracles, write_curves, write_envelopes, write_oracles, OracleTable};

/// Replicates computed concurrently before their results are written.
const WRITE_CHUNK: usize = 16;

pub const CONFIG_FILE: &str = "config.toml";
pub const ENVELOPE_FILE: &str = "envelope.csv";
pub const POOLED_FILE: &str = "pooled.csv";
pub const ORACLE_FILE: &str = "oracle.csv";
pub const COMPARE_FILE: &str = "compare.csv";

fn manifest(command: &str, cfg: &ExperimentConfig, defaults: BTreeMap<String, String>) -> RunManifest {
    let seed = cfg.run.seed;
    RunManifest {
        command: command.into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        model: cfg.model.name().into(),
        master_seed: seed,
        replicates: (0..cfg.run.replicates)
            .map(|r| ReplicateSeed { replicate: r, master: seed, stream_base: (r as u64) << 16 })
            .collect(),
        defaults,
        notes: Vec::new(),
        status: Status::Running,
        error: None,
        wall_time_secs: 0.0,
        files: Vec::new(),
    }
}

fn rep_dir(rep: u32) -> PathBuf {
    PathBuf::from(format!("rep-{rep:04}"))
}

fn curve_file(stat: Stat, ordering: Ordering) -> PathBuf {
    PathBuf::from("curves").join(format!("{}_{}.csv", stat.name(), ordering.name()))
}

/// Runs `f` over replicate ids in parallel chunks, handing results to
/// `sink` in replicate order. Stops at the first error.
fn for_each_ordered<T: Send>(
    replicates: u32,
    f: impl Fn(u32) -> Result<T> + Sync,
    mut sink: impl FnMut(T) -> Result<()>,
) -> Result<()> {
    let ids: Vec<u32> = (0..replicates).collect();
    for chunk in ids.chunks(WRITE_CHUNK) {
        let results: Vec<Result<T>> = chunk.par_iter().map(|&r| f(r)).collect();
        for r in results {
            sink(r?)?;
        }
    }
    Ok(())
}

fn source_of(mode: P1Mode) -> P1Source {
    match mode {
        P1Mode::Analytic => P1Source::Analytic,
        P1Mode::PlugIn | P1Mode::VolumeFraction => P1Source::PlugIn,
    }
}

fn curves_of(cfg: &ExperimentConfig, real: &Realization, m: &MeasurePair<f64>) -> Result<ReplicateCurves> {
    let sets = real.sets.as_ref().map(|(a, b)| (a, b));
    let curves = realization_curves(m, sets, &cfg.t_values(), cfg.run.denominator, cfg.run.j_floor)
        .with_context(|| format!("estimating replicate {}", real.replicate))?;
    Ok(ReplicateCurves { replicate: real.replicate, curves: curves.into_iter().map(|c| c.with_replicate(real.replicate)).collect() })
}

fn write_realization(outs: &mut Outputs, real: &Realization) -> Result<()> {
    let dir = rep_dir(real.replicate);
    write_field(&outs.file(dir.join("psi1.field"))?, &real.psi.0)?;
    write_field(&outs.file(dir.join("psi2.field"))?, &real.psi.1)?;
    if let Some((x1, x2)) = &real.sets {
        write_binary(&outs.file(dir.join("x1.field"))?, x1)?;
        write_binary(&outs.file(dir.join("x2.field"))?, x2)?;
    }
    if let Some((g1, g2)) = &real.points {
        write_points(&outs.file(dir.join("points1.csv"))?, g1)?;
        write_points(&outs.file(dir.join("points2.csv"))?, g2)?;
    }
    Ok(())
}

fn write_coverage(outs: &mut Outputs, p1: &CoverageFunctions) -> Result<()> {
    write_field(&outs.file("p1.field")?, &p1.p1)?;
    write_field(&outs.file("p2.field")?, &p1.p2)
}

/// Writes per-replicate realizations and the shared coverage functions.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let model = PreparedModel::new(cfg.model, cfg.grid_spec())?;
    let mut outs = Outputs::begin(out, manifest("simulate", cfg, BTreeMap::new()))?;
    let result = simulate_into(cfg, &model, &mut outs);
    outs.finish(result)
}

fn simulate_into(cfg: &ExperimentConfig, model: &PreparedModel, outs: &mut Outputs) -> Result<()> {
    outs.write_text(CONFIG_FILE, &cfg.to_toml())?;
    let run = &cfg.run;
    let p1 = model.resolve_p1(cfg.p1_mode(), run.seed, run.replicates, run.p1_scale)?;
    write_coverage(outs, &p1)?;
    for_each_ordered(run.replicates, |r| Ok(model.realize(run.seed, r)?), |real| write_realization(outs, &real))
}

/// Where `estimate` reads its replicates from.
pub enum EstimateInput {
    /// Simulate the replicates of a config.
    Config(Box<ExperimentConfig>),
    /// Read the output of `simulate`; only the t grid may be overridden.
    Realizations(PathBuf, Overrides),
}

/// Writes replicate curves, envelopes, pooled J and, when available and
/// enabled, oracle curves.
pub fn estimate(input: EstimateInput, out: &Path) -> Result<()> {
    match input {
        EstimateInput::Config(cfg) => run_figure("estimate", cfg.as_ref(), out, BTreeMap::new(), false),
        EstimateInput::Realizations(dir, o) => {
            let mut cfg = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
            if o.seed.is_some() || o.replicates.is_some() || o.h.is_some() {
                bail!("--seed, --replicates and --h cannot change stored realizations");
            }
            cfg.apply(&o)?;
            let mut outs = Outputs::begin(out, manifest("estimate", &cfg, BTreeMap::new()))?;
            outs.manifest_mut().notes.push(format!("realizations read from {}", dir.display()));
            let result = estimate_from_dir(&cfg, &dir, &mut outs);
            outs.finish(result)
        }
    }
}

fn estimate_from_dir(cfg: &ExperimentConfig, dir: &Path, outs: &mut Outputs) -> Result<()> {
    outs.write_text(CONFIG_FILE, &cfg.to_toml())?;
    let grid = cfg.grid_spec();
    let source = source_of(cfg.p1_mode());
    let p1 = CoverageFunctions {
        p1: read_field(&dir.join("p1.field"), &grid).context("grid mismatch")?,
        p2: read_field(&dir.join("p2.field"), &grid).context("grid mismatch")?,
        source,
    };
    let has_sets = cfg.model.has_sets();
    let load = |rep: u32| -> Result<ReplicateCurves> {
        let d = dir.join(rep_dir(rep));
        ensure!(d.is_dir(), "missing replicate directory {}", d.display());
        let read = |name: &str| read_field(&d.join(name), &grid).with_context(|| format!("grid mismatch in replicate {rep}"));
        let sets = if has_sets {
            let rb = |name: &str| read_binary(&d.join(name), &grid).with_context(|| format!("grid mismatch in replicate {rep}"));
            Some((rb("x1.field")?, rb("x2.field")?))
        } else {
            None
        };
        let real = Realization { replicate: rep, psi: (read("psi1.field")?, read("psi2.field")?), sets, points: None };
        let m = MeasurePair::new(real.psi.0.clone(), real.psi.1.clone(), p1.p1.clone(), p1.p2.clone(), source)?;
        curves_of(cfg, &real, &m)
    };
    let mut runs = Vec::with_capacity(cfg.run.replicates as usize);
    for_each_ordered(cfg.run.replicates, load, |r| {
        runs.push(r);
        Ok(())
    })?;
    write_estimates(cfg, &runs, outs)
}

/// The estimate outputs of a config, simulated on the fly.
///
/// With `keep_first`, the first realization is also written for plotting.
fn run_figure(
    command: &str,
    cfg: &ExperimentConfig,
    out: &Path,
    defaults: BTreeMap<String, String>,
    keep_first: bool,
) -> Result<()> {
    let model = PreparedModel::new(cfg.model, cfg.grid_spec())?;
    let mut outs = Outputs::begin(out, manifest(command, cfg, defaults))?;
    let result = (|| {
        outs.write_text(CONFIG_FILE, &cfg.to_toml())?;
        let run = &cfg.run;
        let p1 = model.resolve_p1(cfg.p1_mode(), run.seed, run.replicates, run.p1_scale)?;
        let mut runs = Vec::with_capacity(run.replicates as usize);
        let mut first = None;
        for_each_ordered(
            run.replicates,
            |r| {
                let real = model.realize(run.seed, r)?;
                let curves = curves_of(cfg, &real, &model.measure(&real, &p1)?)?;
                Ok((curves, (keep_first && r == 0).then_some(real)))
            },
            |(curves, real)| {
                runs.push(curves);
                first = first.take().or(real);
                Ok(())
            },
        )?;
        if let Some(real) = first {
            write_coverage(&mut outs, &p1)?;
            write_realization(&mut outs, &real)?;
        }
        write_estimates(cfg, &runs, &mut outs)
    })();
    outs.finish(result)
}

fn write_estimates(cfg: &ExperimentConfig, runs: &[ReplicateCurves], outs: &mut Outputs) -> Result<()> {
    let first = runs.first().context("no replicates")?;
    for c in &first.curves {
        let all = collect_curves(runs, c.stat, c.ordering);
        write_curves(&outs.file(curve_file(c.stat, c.ordering))?, &all)?;
    }
    if runs.len() >= 2 {
        write_envelopes(&outs.file(ENVELOPE_FILE)?, &envelopes(runs, cfg.run.envelope_level)?)?;
        let mut pooled = Vec::new();
        for o in [Ordering::OneTwo, Ordering::TwoOne] {
            let p = pooled_ratio(&collect_curves(runs, Stat::L12, o), &collect_curves(runs, Stat::L2, o))?;
            pooled.push(Envelope {
                stat: Stat::J12,
                ordering: o,
                t: p.t.clone(),
                mean: p.value.clone(),
                lower: p.value.clone(),
                upper: p.value,
                se: p.se,
                count: vec![runs.len(); p.t.len()],
                level: f64::NAN,
            });
        }
        write_envelopes(&outs.file(POOLED_FILE)?, &pooled)?;
    } else {
        outs.manifest_mut().notes.push("a single replicate has no envelope".into());
    }
    if cfg.output.emit_oracle {
        match cfg.model.oracles(&cfg.t_values()) {
            Ok(o) => write_oracles(&outs.file(ORACLE_FILE)?, &o)?,
            Err(cvst::Error::NoOracle { model }) => {
                outs.manifest_mut().notes.push(format!("no oracle is available for the {model} model"))
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// Writes the oracle curves of a config on its t grid.
pub fn oracle(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let mut outs = Outputs::begin(out, manifest("oracle", cfg, BTreeMap::new()))?;
    let result = (|| {
        outs.write_text(CONFIG_FILE, &cfg.to_toml())?;
        let o = cfg.model.oracles(&cfg.t_values())?;
        write_oracles(&outs.file(ORACLE_FILE)?, &o)
    })();
    outs.finish(result)
}

/// Runs a built-in figure experiment, recording the tool's defaults.
pub fn reproduce_figure(name: &str, cfg: &ExperimentConfig, out: &Path, defaults: BTreeMap<String, String>) -> Result<()> {
    run_figure(&format!("reproduce-figure {name}"), cfg, out, defaults, true)
}

/// One row of a comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    pub oracle: f64,
    pub mean: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub inside: bool,
    /// Is the row subject to the thresholds?
    pub checked: bool,
    pub relative_deviation: Option<f64>,
    /// `|mean − oracle| / max(se, se_floor · |oracle|)`.
    pub z: Option<f64>,
}

/// Comparison of one statistic and ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveComparison {
    pub stat: Stat,
    pub ordering: Ordering,
    pub method: String,
    pub rows: Vec<CompareRow>,
    pub inside_fraction: f64,
    pub max_relative_deviation: Option<f64>,
    pub max_z: Option<f64>,
    /// Were thresholds applied? Unchecked curves always pass.
    pub checked: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub curves: Vec<CurveComparison>,
    pub passed: bool,
}

impl CompareReport {
    pub fn render(&self) -> String {
        let mut s =
            format!("{:<12} {:<8} {:>8} {:>12} {:>8}  {}\n", "stat", "ordering", "inside", "max_rel_dev", "max_z", "status");
        let num = |v: Option<f64>, p: usize| v.map(|d| format!("{d:.p$}")).unwrap_or_else(|| "-".into());
        for c in &self.curves {
            let status = match (c.checked, c.passed) {
                (false, _) => "reported",
                (true, true) => "ok",
                (true, false) => "VIOLATED",
            };
            s += &format!(
                "{:<12} {:<8} {:>8.3} {:>12} {:>8}  {status}\n",
                c.stat.name(),
                c.ordering.name(),
                c.inside_fraction,
                num(c.max_relative_deviation, 6),
                num(c.max_z, 2)
            );
        }
        s += if self.passed { "all thresholds met\n" } else { "thresholds violated\n" };
        s
    }
}

fn same_t(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
}

/// Compares the envelopes in `estimate_dir` with the oracles in
/// `oracle_dir`. J₁₂ means are taken from the pooled ratio when present.
///
/// Thresholds come from `thresholds`, else from the estimate's config copy.
pub fn compare(
    estimate_dir: &Path,
    oracle_dir: &Path,
    thresholds: Option<&ExperimentConfig>,
    out: Option<&Path>,
) -> Result<CompareReport> {
    let envs = read_envelopes(&estimate_dir.join(ENVELOPE_FILE))?;
    let pooled_path = estimate_dir.join(POOLED_FILE);
    let pooled = if pooled_path.is_file() { read_envelopes(&pooled_path)? } else { Vec::new() };
    let oracles = read_oracles(&oracle_dir.join(ORACLE_FILE))?;
    let own;
    let cfg = match thresholds {
        Some(c) => c,
        None => {
            own = ExperimentConfig::load(&estimate_dir.join(CONFIG_FILE))?;
            &own
        }
    };
    let limits = &cfg.compare;
    let mut curves = Vec::new();
    for o in &oracles {
        let env = envs
            .iter()
            .find(|e| e.stat == o.stat && e.ordering == o.ordering)
            .with_context(|| format!("no estimate of {} ordering {}", o.stat, o.ordering.name()))?;
        if !same_t(&env.t, &o.t) {
            bail!(cvst::Error::GridMismatch(format!(
                "t grids of the {} {} estimate and oracle differ",
                o.stat,
                o.ordering.name()
            )));
        }
        let centre = match o.stat {
            Stat::J12 => pooled.iter().find(|p| p.ordering == o.ordering).unwrap_or(env),
            _ => env,
        };
        curves.push(compare_curve(o, env, centre, limits, cfg.compare_t_min()));
    }
    let report = CompareReport { passed: curves.iter().all(|c| c.passed), curves };
    if let Some(out) = out {
        write_report(&report, cfg, out)?;
    }
    Ok(report)
}

/// `env` gives the envelope and `centre` the mean and its standard error.
fn compare_curve(
    o: &OracleTable,
    env: &Envelope,
    centre: &Envelope,
    limits: &crate::config::CompareConfig,
    t_min: f64,
) -> CurveComparison {
    let checked = limits.checks(o.stat);
    let rows: Vec<CompareRow> = (0..o.t.len())
        .map(|k| {
            let oracle = o.values[k];
            let mean = centre.mean[k];
            let se = centre.se[k].map(|s| s.max(limits.se_floor * oracle.abs()));
            CompareRow {
                t: o.t[k],
                oracle,
                mean,
                lower: env.lower[k],
                upper: env.upper[k],
                inside: env.contains(k, oracle),
                checked: checked && o.t[k] >= t_min,
                relative_deviation: mean.map(|m| (m - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE)),
                z: mean.zip(se).map(|(m, s)| if m == oracle { 0.0 } else { (m - oracle).abs() / s }),
            }
        })
        .collect();
    let scored: Vec<&CompareRow> = rows.iter().filter(|r| r.checked || !checked).collect();
    let inside_fraction = scored.iter().filter(|r| r.inside).count() as f64 / scored.len().max(1) as f64;
    let max_relative_deviation = scored.iter().filter_map(|r| r.relative_deviation).reduce(f64::max);
    let max_z = scored.iter().filter_map(|r| r.z).reduce(f64::max);
    let inside_ok = limits.min_inside_fraction.is_none_or(|f| inside_fraction >= f);
    let dev_ok =
        limits.max_relative_deviation.is_none_or(|d| scored.iter().all(|r| r.relative_deviation.is_some_and(|x| x <= d)));
    let z_ok = limits.max_z.is_none_or(|z| scored.iter().all(|r| r.z.is_some_and(|x| x <= z)));
    CurveComparison {
        stat: o.stat,
        ordering: o.ordering,
        method: o.method.clone(),
        rows,
        inside_fraction,
        max_relative_deviation,
        max_z,
        checked,
        passed: !checked || (inside_ok && dev_ok && z_ok),
    }
}

fn write_report(report: &CompareReport, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let mut outs = Outputs::begin(out, manifest("compare", cfg, BTreeMap::new()))?;
    let result = (|| {
        let p = outs.file(COMPARE_FILE)?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&p)?;
        w.write_record([
            "stat",
            "ordering",
            "t",
            "oracle",
            "mean",
            "lower",
            "upper",
            "inside",
            "checked",
            "relative_deviation",
            "z",
            "method",
        ])?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &report.curves {
            for r in &c.rows {
                w.write_record([
                    c.stat.name(),
                    c.ordering.name(),
                    &r.t.to_string(),
                    &r.oracle.to_string(),
                    &cell(r.mean),
                    &cell(r.lower),
                    &cell(r.upper),
                    if r.inside { "true" } else { "false" },
                    if r.checked { "true" } else { "false" },
                    &cell(r.relative_deviation),
                    &cell(r.z),
                    &c.method,
                ])?;
            }
        }
        w.flush()?;
        outs.write_text("summary.txt", &report.render())
    })();
    outs.finish(result)
}

/// Reads the curves written by `estimate` for one statistic and ordering.
pub fn read_estimate_curves(dir: &Path, stat: Stat, ordering: Ordering) -> Result<Vec<StatCurve>> {
    crate::tables::read_curves(&dir.join(curve_file(stat, ordering)))
}
