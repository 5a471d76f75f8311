//! CSV and JSON writers for experiment reports.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

use super::{ExperimentReport, HistogramBin};

/// Identifies the inputs an artifact was produced from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub base_seed: u64,
}

impl Provenance {
    /// Comment line that opens every CSV artifact.
    pub fn header(&self) -> String {
        format!("# config_hash={} base_seed={}", self.config_hash, self.base_seed)
    }
}

fn num(x: f64) -> String {
    format!("{x:.14e}")
}

/// Long format `n,stat,target,value`; targets are `v`, `gamma1`…`gammad`
/// and `lambda`.
pub fn write_report_csv<W: Write>(report: &ExperimentReport, prov: &Provenance, mut out: W) -> Result<()> {
    writeln!(out, "{}", prov.header())?;
    writeln!(out, "n,stat,target,value")?;
    for s in &report.sizes {
        for (stat, v) in s.value.fields() {
            writeln!(out, "{},{stat},v,{}", s.n, num(v))?;
        }
        for (i, g) in s.gamma.iter().enumerate() {
            for (stat, v) in g.fields() {
                writeln!(out, "{},{stat},gamma{},{}", s.n, i + 1, num(v))?;
            }
        }
        writeln!(out, "{},mean,lambda,{}", s.n, num(s.lambda_mean))?;
        writeln!(out, "{},active_fraction,constraint,{}", s.n, num(s.active_fraction))?;
        if let Some(dist) = s.oracle_distance {
            writeln!(out, "{},oracle_distance,gamma,{}", s.n, num(dist))?;
        }
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], prov: &Provenance, mut out: W) -> Result<()> {
    writeln!(out, "{}", prov.header())?;
    writeln!(out, "bin_left,bin_right,count")?;
    for b in bins {
        writeln!(out, "{},{},{}", num(b.bin_left), num(b.bin_right), b.count)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_hash: &'a str,
    base_seed: u64,
    report: &'a T,
}

/// Pretty JSON `{config_hash, base_seed, report}`.
pub fn write_report_json<W: Write, T: Serialize>(body: &T, prov: &Provenance, mut out: W) -> Result<()> {
    let env = Envelope {
        config_hash: &prov.config_hash,
        base_seed: prov.base_seed,
        report: body,
    };
    serde_json::to_writer_pretty(&mut out, &env)?;
    writeln!(out)?;
    Ok(())
}
