//! CSV writers. Every file starts with one `#` comment line naming the tool
//! version and the configuration.

use std::io::Write;

use crate::error::{Error, Result};
use crate::experiments::toy::ToyTrajectory;
use crate::experiments::{CurvePoint, ExperimentConfig, Heatmap, TrialRecord};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn header<W: Write>(out: &mut W, description: &str) -> Result<()> {
    writeln!(out, "# supstab {VERSION} {description}")?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn alpha_label(inv: f64) -> String {
    if inv == 0.0 {
        "inf".into()
    } else {
        (1.0 / inv).to_string()
    }
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    inner.flush()?;
    Ok(())
}

/// One row per trial and exponent.
pub fn write_records<W: Write>(mut out: W, cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<()> {
    header(&mut out, &cfg.describe())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "k", "identifiable", "alpha", "inv_alpha", "excess_size", "injective", "mu"])
        .map_err(csv_error)?;
    for r in records {
        for o in &r.outcomes {
            w.write_record([
                r.seed.to_string(),
                r.k.to_string(),
                r.identifiable.to_string(),
                alpha_label(o.inv_alpha),
                o.inv_alpha.to_string(),
                opt(o.excess_size),
                o.injective.to_string(),
                opt(o.mu),
            ])
            .map_err(csv_error)?;
        }
    }
    finish(w)
}

/// Failed solves, one row per trial and exponent (or per trial when the
/// instance itself failed).
pub fn write_failures<W: Write>(mut out: W, cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<()> {
    header(&mut out, &cfg.describe())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "k", "inv_alpha", "error"]).map_err(csv_error)?;
    for r in records {
        if let Some(e) = &r.error {
            w.write_record([r.seed.to_string(), r.k.to_string(), String::new(), e.clone()])
                .map_err(csv_error)?;
        }
        for o in &r.outcomes {
            if let Some(e) = &o.error {
                w.write_record([r.seed.to_string(), r.k.to_string(), o.inv_alpha.to_string(), e.clone()])
                    .map_err(csv_error)?;
            }
        }
    }
    finish(w)
}

/// Wide table: `k` first, then one probability column per `(1/alpha, s_e)`.
pub fn write_curves<W: Write>(mut out: W, cfg: &ExperimentConfig, curves: &[CurvePoint]) -> Result<()> {
    header(&mut out, &cfg.describe())?;
    let mut columns: Vec<(f64, Option<usize>)> = Vec::new();
    let mut ks: Vec<usize> = Vec::new();
    for c in curves {
        if !columns.contains(&(c.inv_alpha, c.s_e)) {
            columns.push((c.inv_alpha, c.s_e));
        }
        if !ks.contains(&c.k) {
            ks.push(c.k);
        }
    }
    ks.sort_unstable();
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["k".to_string()];
    for (inv, s_e) in &columns {
        let s = s_e.map_or("inf".to_string(), |s| s.to_string());
        head.push(format!("inv_alpha={inv};s_e={s}"));
    }
    w.write_record(&head).map_err(csv_error)?;
    for k in ks {
        let mut row = vec![k.to_string()];
        for col in &columns {
            let p = curves.iter().find(|c| c.k == k && (c.inv_alpha, c.s_e) == *col);
            row.push(opt(p.map(|c| c.probability)));
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    finish(w)
}

/// Long table with confidence bands: one row per `(1/alpha, s_e, k)`.
pub fn write_curve_points<W: Write>(mut out: W, cfg: &ExperimentConfig, curves: &[CurvePoint]) -> Result<()> {
    header(&mut out, &cfg.describe())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "inv_alpha", "s_e", "trials", "successes", "probability", "ci_low", "ci_high"])
        .map_err(csv_error)?;
    for c in curves {
        w.write_record([
            c.k.to_string(),
            c.inv_alpha.to_string(),
            c.s_e.map_or("inf".to_string(), |s| s.to_string()),
            c.trials.to_string(),
            c.successes.to_string(),
            c.probability.to_string(),
            c.ci_low.to_string(),
            c.ci_high.to_string(),
        ])
        .map_err(csv_error)?;
    }
    finish(w)
}

/// `1/alpha` first, then one column per `k`, then the transition sparsity.
pub fn write_heatmap<W: Write>(mut out: W, cfg: &ExperimentConfig, heatmap: &Heatmap) -> Result<()> {
    header(&mut out, &format!("{} s_e={}", cfg.describe(), heatmap.s_e))?;
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["inv_alpha".to_string()];
    head.extend(heatmap.k_values.iter().map(|k| format!("k={k}")));
    head.push("transition_k".into());
    w.write_record(&head).map_err(csv_error)?;
    for ((inv, row), t) in heatmap.inv_alpha.iter().zip(&heatmap.probability).zip(heatmap.transitions()) {
        let mut line = vec![inv.to_string()];
        line.extend(row.iter().map(|p| p.to_string()));
        line.push(opt(t));
        w.write_record(&line).map_err(csv_error)?;
    }
    finish(w)
}

/// One row per `(tau, index)`.
pub fn write_toy<W: Write>(mut out: W, toy: &ToyTrajectory) -> Result<()> {
    let a = &toy.analysis;
    header(
        &mut out,
        &format!(
            "toy requested_seed={} seed={} n={} m={} delta={} c1={} c2={} x_min={}",
            toy.requested_seed,
            toy.seed,
            a.instance.phi.cols(),
            a.instance.phi.rows(),
            toy.delta,
            a.constants.c1,
            a.constants.c2,
            a.x_min
        ),
    )?;
    let j = a.extended_support();
    let corr = toy.correlations();
    let x0 = &a.instance.x0;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tau", "index", "x0", "solution", "predicted", "in_support", "in_extended_support", "correlation"])
        .map_err(csv_error)?;
    for p in &toy.points {
        for i in 0..x0.len() {
            w.write_record([
                p.tau.to_string(),
                i.to_string(),
                x0[i].to_string(),
                p.solution[i].to_string(),
                p.predicted[i].to_string(),
                p.support.contains(&i).to_string(),
                j.contains(&i).to_string(),
                corr[i].to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::AlphaOutcome;

    fn record() -> TrialRecord {
        TrialRecord {
            seed: 3,
            k: 2,
            identifiable: true,
            outcomes: vec![
                AlphaOutcome {
                    inv_alpha: 0.0,
                    excess_size: Some(4),
                    injective: true,
                    mu: Some(0.25),
                    error: None,
                },
                AlphaOutcome {
                    inv_alpha: 0.5,
                    excess_size: None,
                    injective: false,
                    mu: None,
                    error: Some("boom, \"quoted\"".into()),
                },
            ],
            error: None,
        }
    }

    #[test]
    fn records_layout() {
        let mut buf = Vec::new();
        write_records(&mut buf, &ExperimentConfig::desk(), &[record()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# supstab "));
        assert_eq!(lines[1], "seed,k,identifiable,alpha,inv_alpha,excess_size,injective,mu");
        assert_eq!(lines[2], "3,2,true,inf,0,4,true,0.25");
        assert_eq!(lines[3], "3,2,true,2,0.5,,false,");
    }

    #[test]
    fn failures_are_quoted() {
        let mut buf = Vec::new();
        write_failures(&mut buf, &ExperimentConfig::desk(), &[record()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 1);
        assert_eq!(&rows[0][3], "boom, \"quoted\"");
    }

    #[test]
    fn heatmap_layout() {
        let h = Heatmap {
            s_e: 0,
            inv_alpha: vec![0.0, 1.0],
            k_values: vec![2, 4],
            probability: vec![vec![0.5, 0.25], vec![0.0, 0.0]],
        };
        let mut buf = Vec::new();
        write_heatmap(&mut buf, &ExperimentConfig::desk(), &h).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(lines, vec!["inv_alpha,k=2,k=4,transition_k", "0,0.5,0.25,2", "1,0,0,"]);
    }
}
