//! Artifact directory layout: manifest, traces, mean curves, summary, plot.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use smnl::simulator::{write_mean_curve_csv, Aggregate, ExperimentConfig};

use crate::plot::{regret_svg, Series};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MEAN_CURVES_FILE: &str = "mean_curves.csv";
pub const PLOT_FILE: &str = "regret.svg";

/// Everything needed to re-run a command bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub replication_seeds: Vec<u64>,
    pub files: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    name: &'a str,
    horizon: u64,
    replications: usize,
    seed: u64,
    results: &'a [Aggregate],
}

/// File-name-safe version of a label.
pub fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn series_label(a: &Aggregate) -> String {
    if a.scenario == "default" {
        a.policy.clone()
    } else {
        format!("{} {}", a.policy, a.scenario)
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes all artifacts and returns the manifest that was stored.
pub fn write_artifacts(
    out: &Path,
    command: &str,
    config: &ExperimentConfig,
    aggs: &[Aggregate],
    mean_curves: bool,
) -> Result<Manifest> {
    let traces_dir = out.join("traces");
    fs::create_dir_all(&traces_dir).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let mut files = Vec::new();

    for a in aggs {
        for (rep, trace) in a.traces.iter().enumerate() {
            let name = format!("traces/{}__{}__rep{rep:02}.csv", slug(&a.scenario), slug(&a.policy));
            let mut w = create(&out.join(&name))?;
            trace.write_csv(&mut w)?;
            w.flush()?;
            files.push(name);
        }
    }

    if mean_curves {
        let mut w = create(&out.join(MEAN_CURVES_FILE))?;
        let labels: Vec<String> = aggs.iter().map(series_label).collect();
        write!(w, "t")?;
        for l in &labels {
            write!(w, ",{}", l.replace(',', ";"))?;
        }
        writeln!(w)?;
        let len = aggs.iter().map(|a| a.mean_curve.len()).min().unwrap_or(0);
        for k in 0..len {
            write!(w, "{}", k + 1)?;
            for a in aggs {
                write!(w, ",{}", a.mean_curve[k])?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        files.push(MEAN_CURVES_FILE.into());

        for a in aggs {
            let name = format!("mean_{}__{}.csv", slug(&a.scenario), slug(&a.policy));
            let mut w = create(&out.join(&name))?;
            write_mean_curve_csv(&a.mean_curve, &mut w)?;
            w.flush()?;
            files.push(name);
        }

        let series: Vec<Series<'_>> = aggs
            .iter()
            .map(|a| Series {
                label: series_label(a),
                values: &a.mean_curve,
            })
            .collect();
        let title = format!("{}: mean cumulative regret over {} replications", config.name, config.replications);
        fs::write(out.join(PLOT_FILE), regret_svg(&title, &series))
            .with_context(|| format!("cannot write {}", out.join(PLOT_FILE).display()))?;
        files.push(PLOT_FILE.into());
    }

    let summary = Summary {
        name: &config.name,
        horizon: config.horizon,
        replications: config.replications,
        seed: config.seed,
        results: aggs,
    };
    fs::write(out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("cannot write {}", out.join(SUMMARY_FILE).display()))?;
    files.push(SUMMARY_FILE.into());

    let manifest = Manifest {
        tool: "smnl".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config: config.clone(),
        replication_seeds: aggs.first().map(|a| a.replication_seeds.clone()).unwrap_or_default(),
        files,
    };
    fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", out.join(MANIFEST_FILE).display()))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(slug("v~U[0,0.1]"), "v_U_0_0.1_");
        assert_eq!(slug("algorithm1"), "algorithm1");
    }
}
