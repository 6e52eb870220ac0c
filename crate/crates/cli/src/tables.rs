//! CSV tables of curves, envelopes and oracle values.
//!
//! All tables are UTF-8 with LF line endings. Floats use Rust's shortest
//! round-trip formatting, and missing values are empty cells.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use cvst::estimators::{Envelope, Ordering, Stat, StatCurve};
use cvst::oracles::OracleCurve;

pub const CURVE_HEADER: [&str; 5] = ["stat", "ordering", "t", "value", "replicate"];
pub const ORACLE_HEADER: [&str; 6] = ["stat", "ordering", "t", "value", "replicate", "method"];
pub const ENVELOPE_HEADER: [&str; 8] = ["stat", "ordering", "t", "mean", "lower", "upper", "se", "count"];

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("writing {}", path.display()))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new().from_path(path).with_context(|| format!("reading {}", path.display()))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_cell(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        Ok(Some(s.parse().map_err(|e| anyhow!("bad number {s:?}: {e}"))?))
    }
}

fn parse_key(stat: &str, ordering: &str) -> Result<(Stat, Ordering)> {
    let s = Stat::parse(stat).ok_or_else(|| anyhow!("unknown statistic {stat:?}"))?;
    let o = Ordering::parse(ordering).ok_or_else(|| anyhow!("unknown ordering {ordering:?}"))?;
    Ok((s, o))
}

/// Writes replicate curves as long-format rows, in the given order.
pub fn write_curves<'a>(path: &Path, curves: impl IntoIterator<Item = &'a StatCurve>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CURVE_HEADER)?;
    for c in curves {
        let rep = c.replicate.map(|r| r.to_string()).unwrap_or_default();
        for (t, v) in c.t.iter().zip(&c.values) {
            w.write_record([c.stat.name(), c.ordering.name(), &t.to_string(), &cell(*v), &rep])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a curve table back, one curve per `(stat, ordering, replicate)`
/// run of consecutive rows.
pub fn read_curves(path: &Path) -> Result<Vec<StatCurve>> {
    let mut out: Vec<StatCurve> = Vec::new();
    for (line, row) in reader(path)?.records().enumerate() {
        let row = row?;
        let ctx = || format!("{} row {}", path.display(), line + 2);
        let (stat, ordering) = parse_key(&row[0], &row[1]).with_context(ctx)?;
        let t: f64 = row[2].parse().with_context(ctx)?;
        let value = parse_cell(&row[3]).with_context(ctx)?;
        let replicate = if row[4].is_empty() { None } else { Some(row[4].parse().with_context(ctx)?) };
        match out.last_mut() {
            Some(c) if c.stat == stat && c.ordering == ordering && c.replicate == replicate => {
                c.t.push(t);
                c.values.push(value);
            }
            _ => {
                let mut c = StatCurve::new(stat, vec![t], vec![value]).with_ordering(ordering);
                c.replicate = replicate;
                out.push(c);
            }
        }
    }
    Ok(out)
}

pub fn write_oracles(path: &Path, oracles: &[OracleCurve]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ORACLE_HEADER)?;
    for c in oracles {
        let method = c.method.tag();
        for (t, v) in c.t.iter().zip(&c.values) {
            w.write_record([c.stat.name(), c.ordering.name(), &t.to_string(), &cell(Some(*v)), "", &method])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// An oracle table read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleTable {
    pub stat: Stat,
    pub ordering: Ordering,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub method: String,
}

pub fn read_oracles(path: &Path) -> Result<Vec<OracleTable>> {
    let mut out: Vec<OracleTable> = Vec::new();
    for (line, row) in reader(path)?.records().enumerate() {
        let row = row?;
        let ctx = || format!("{} row {}", path.display(), line + 2);
        let (stat, ordering) = parse_key(&row[0], &row[1]).with_context(ctx)?;
        let t: f64 = row[2].parse().with_context(ctx)?;
        let value: f64 = row[3].parse().with_context(ctx)?;
        match out.last_mut() {
            Some(o) if o.stat == stat && o.ordering == ordering => {
                o.t.push(t);
                o.values.push(value);
            }
            _ => out.push(OracleTable { stat, ordering, t: vec![t], values: vec![value], method: row[5].to_string() }),
        }
    }
    Ok(out)
}

pub fn write_envelopes(path: &Path, envs: &[Envelope]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ENVELOPE_HEADER)?;
    for e in envs {
        for k in 0..e.t.len() {
            w.write_record([
                e.stat.name(),
                e.ordering.name(),
                &e.t[k].to_string(),
                &cell(e.mean[k]),
                &cell(e.lower[k]),
                &cell(e.upper[k]),
                &cell(e.se[k]),
                &e.count[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an envelope table; the level is not stored and is set to NaN.
pub fn read_envelopes(path: &Path) -> Result<Vec<Envelope>> {
    let mut out: Vec<Envelope> = Vec::new();
    for (line, row) in reader(path)?.records().enumerate() {
        let row = row?;
        let ctx = || format!("{} row {}", path.display(), line + 2);
        let (stat, ordering) = parse_key(&row[0], &row[1]).with_context(ctx)?;
        let t: f64 = row[2].parse().with_context(ctx)?;
        let [mean, lower, upper, se] = [3, 4, 5, 6].map(|k| parse_cell(&row[k]));
        let count: usize = row[7].parse().with_context(ctx)?;
        let env = match out.last_mut() {
            Some(e) if e.stat == stat && e.ordering == ordering => e,
            _ => {
                out.push(Envelope {
                    stat,
                    ordering,
                    t: vec![],
                    mean: vec![],
                    lower: vec![],
                    upper: vec![],
                    se: vec![],
                    count: vec![],
                    level: f64::NAN,
                });
                out.last_mut().unwrap()
            }
        };
        env.t.push(t);
        env.mean.push(mean.with_context(ctx)?);
        env.lower.push(lower.with_context(ctx)?);
        env.upper.push(upper.with_context(ctx)?);
        env.se.push(se.with_context(ctx)?);
        env.count.push(count);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_round_trip_with_missing_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let a = StatCurve::new(Stat::J12, vec![0.1, 0.2], vec![Some(0.5), None]).with_replicate(3);
        let b = StatCurve::new(Stat::J12, vec![0.1, 0.2], vec![Some(1.0 / 3.0), Some(2.0)])
            .with_ordering(Ordering::TwoOne)
            .with_replicate(3);
        write_curves(&p, [&a, &b]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.starts_with("stat,ordering,t,value,replicate\nJ12,12,0.1,0.5,3\nJ12,12,0.2,,3\n"));
        let back = read_curves(&p).unwrap();
        assert_eq!(back, vec![a, b]);
    }
}
