use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use hausdorff::mellin::{apply_hausdorff, GridFunction, LogGrid};
use hausdorff::spectral::{
    classify_from, noncompactness_probe, norm_bound, operator_norm_from, spectrum_from, SGrid,
    SymbolSamples,
};
use hausdorff::symbol::{Axis, GridSpec};
use hausdorff::verify::run_suite;
use hausdorff::{
    discretize_measure, parse_config, Execution, FunctionSpec, NodeSet, OperatorSpec, SymbolGrid,
};
use serde_json::json;

use crate::{Command, Common, Format, FunctionArgs};

pub enum Failure {
    /// Bad arguments, unreadable files, invalid specs, numerical errors.
    Input(anyhow::Error),
    /// Names of the failed verify checks.
    Check(Vec<String>),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

type Outcome = Result<(), Failure>;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Symbol(c) => symbol(&c),
        Command::Norm(c) => norm(&c),
        Command::Spectrum {
            common,
            tol,
            candidates,
        } => spectrum(&common, tol, candidates.as_deref()),
        Command::Classify { common, tol } => classify(&common, tol),
        Command::Apply { common, function } => apply(&common, &function),
        Command::Verify(c) => verify(&c),
        Command::ProbeCompactness {
            common,
            sizes,
            threshold,
        } => probe(&common, &sizes, threshold),
    }
}

/// A parsed spec with its discretized measure.
struct Loaded {
    spec: OperatorSpec,
    nodes: NodeSet,
}

fn load(c: &Common) -> anyhow::Result<Loaded> {
    let text =
        fs::read_to_string(&c.spec).with_context(|| format!("cannot read {}", c.spec.display()))?;
    let mut spec =
        parse_config(&text).with_context(|| format!("invalid spec {}", c.spec.display()))?;
    if let Some(f) = c.max_frequency {
        spec.quadrature = spec.quadrature.with_max_frequency(f);
        spec.quadrature.validate()?;
    }
    let nodes = discretize_measure(&spec, &spec.quadrature)
        .with_context(|| format!("cannot discretize {}", c.spec.display()))?;
    Ok(Loaded { spec, nodes })
}

fn execution(c: &Common) -> Execution {
    if c.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn s_grid(c: &Common, n: usize) -> anyhow::Result<SGrid> {
    let mut grid = SGrid::default_for(n);
    if c.s_max.is_some() || c.s_count.is_some() {
        let axis = grid.axes[0];
        grid.axes =
            vec![Axis::symmetric(c.s_max.unwrap_or(axis.max), c.s_count.unwrap_or(axis.count)); n];
    }
    if let Some(far) = &c.far_field {
        grid.far_field = far
            .iter()
            .filter(|v| !v.trim().is_empty())
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| anyhow!("bad far-field magnitude {v:?}"))
            })
            .collect::<anyhow::Result<_>>()?;
    }
    grid = grid.with_execution(execution(c));
    grid.validate()?;
    Ok(grid)
}

fn log_grid(c: &Common, n: usize) -> anyhow::Result<LogGrid> {
    let d = LogGrid::default_for(n);
    let a = d.axes[0];
    Ok(LogGrid::new(
        n,
        c.log_min.unwrap_or(a.t_min),
        c.log_max.unwrap_or(a.t_max),
        c.log_points.unwrap_or(a.m),
    )?)
}

/// Render into memory, then write the file (or stdout) once.
fn emit(
    c: &Common,
    default: Format,
    render: impl FnOnce(Format, &mut Vec<u8>) -> anyhow::Result<()>,
) -> Outcome {
    let mut buf = Vec::new();
    render(c.format.unwrap_or(default), &mut buf)?;
    match &c.output {
        Some(path) => {
            fs::write(path, &buf).with_context(|| format!("cannot write {}", path.display()))?
        }
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn write_json(buf: &mut Vec<u8>, value: &impl serde::Serialize) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *buf, value)?;
    buf.push(b'\n');
    Ok(())
}

fn symbol(c: &Common) -> Outcome {
    let l = load(c)?;
    let sg = s_grid(c, l.spec.n)?;
    let grid = GridSpec {
        axes: sg.axes.clone(),
    };
    let sym = SymbolGrid::compute(&l.nodes, &grid, execution(c))?;
    emit(c, Format::Csv, |format, buf| match format {
        Format::Csv => Ok(sym.write_csv(buf)?),
        Format::Json => {
            let points: Vec<_> = sym
                .points
                .iter()
                .map(|p| json!({"s": p.s, "coeffs": p.coeffs.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>()}))
                .collect();
            write_json(
                buf,
                &json!({"name": l.spec.name, "structure": sym.tag.as_str(), "points": points}),
            )
        }
    })
}

fn samples(c: &Common, l: &Loaded) -> anyhow::Result<SymbolSamples> {
    Ok(SymbolSamples::compute(
        &l.spec,
        &l.nodes,
        &s_grid(c, l.spec.n)?,
    )?)
}

fn norm(c: &Common) -> Outcome {
    let l = load(c)?;
    let report = operator_norm_from(&samples(c, &l)?, norm_bound(&l.spec, &l.nodes));
    emit(c, Format::Json, |format, buf| match format {
        Format::Json => write_json(buf, &report),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["quantity", "value"])?;
            w.write_record(["norm", &report.norm.to_string()])?;
            w.write_record(["bound", &report.bound.to_string()])?;
            for (k, s) in report.argmax_s.iter().enumerate() {
                w.write_record([format!("argmax_s_{}", k + 1), s.to_string()])?;
            }
            w.write_record([
                "sup_distance_from_identity",
                &report.sup_distance_from_identity.to_string(),
            ])?;
            w.flush()?;
            Ok(())
        }
    })
}

fn spectrum(c: &Common, tol: f64, candidates: Option<&Path>) -> Outcome {
    let l = load(c)?;
    let est = spectrum_from(&samples(c, &l)?, tol);
    if let Some(path) = candidates {
        let mut w = csv::Writer::from_path(path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(["re", "im", "measure", "cells"])?;
        for p in &est.point_spectrum {
            w.write_record([
                p.re.to_string(),
                p.im.to_string(),
                p.measure.to_string(),
                p.cells.to_string(),
            ])?;
        }
        w.flush()?;
    }
    emit(c, Format::Csv, |format, buf| match format {
        Format::Csv => Ok(est.write_csv(buf)?),
        Format::Json => write_json(buf, &est),
    })
}

fn classify(c: &Common, tol: f64) -> Outcome {
    let l = load(c)?;
    let report = classify_from(&samples(c, &l)?, tol);
    emit(c, Format::Json, |format, buf| match format {
        Format::Json => write_json(buf, &report),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["property", "holds", "value"])?;
            let rows = [
                ("self_adjoint", &report.self_adjoint),
                ("positive", &report.positive),
                ("unitary", &report.unitary),
                ("invertible", &report.invertible),
                ("non_zero", &report.non_zero),
            ];
            for (name, wit) in rows {
                w.write_record([
                    name.to_string(),
                    wit.holds.to_string(),
                    wit.value.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
    })
}

fn parse_pair<'a>(text: &'a str, what: &str) -> anyhow::Result<(&'a str, &'a str)> {
    text.split_once(':')
        .ok_or_else(|| anyhow!("{what} must look like A:B, got {text:?}"))
}

fn apply(c: &Common, f: &FunctionArgs) -> Outcome {
    let l = load(c)?;
    let n = l.spec.n;
    let lg = log_grid(c, n)?;
    let pieces: Vec<(usize, &str)> = f
        .pieces
        .iter()
        .map(|p| {
            let (oct, expr) = parse_pair(p, "--piece")?;
            Ok((
                oct.trim()
                    .parse()
                    .map_err(|_| anyhow!("bad octant in {p:?}"))?,
                expr,
            ))
        })
        .collect::<anyhow::Result<_>>()?;
    let support: Vec<(f64, f64)> = if f.support.is_empty() {
        lg.axes.iter().map(|a| (a.t_min, a.t_max)).collect()
    } else {
        f.support
            .iter()
            .map(|b| {
                let (lo, hi) = parse_pair(b, "--support")?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| anyhow!("bad bound in {b:?}"))
                };
                Ok((parse(lo)?, parse(hi)?))
            })
            .collect::<anyhow::Result<_>>()?
    };
    let fs = FunctionSpec::new(n, &pieces, support)?;
    let g = GridFunction::from_spec(&fs, &lg)?;
    if f.x_count < 1 {
        return Err(anyhow!("--x-count must be positive").into());
    }
    let axis: Vec<f64> = (0..f.x_count)
        .map(|k| {
            if f.x_count == 1 {
                f.x_min
            } else {
                f.x_min + (f.x_max - f.x_min) * k as f64 / (f.x_count - 1) as f64
            }
        })
        .collect();
    let total = f.x_count.pow(n as u32);
    let xs: Vec<Vec<f64>> = (0..total)
        .map(|mut flat| {
            let mut x = vec![0.0; n];
            for l in (0..n).rev() {
                x[l] = axis[flat % f.x_count];
                flat /= f.x_count;
            }
            x
        })
        .collect();
    let values = apply_hausdorff(&l.spec, &l.nodes, &g, &xs)?;
    emit(c, Format::Csv, |format, buf| match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(buf);
            let mut header: Vec<String> = FunctionSpec::variable_names(n);
            header.extend(["re".to_string(), "im".to_string()]);
            w.write_record(&header)?;
            for (x, v) in xs.iter().zip(&values) {
                let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                row.push(v.re.to_string());
                row.push(v.im.to_string());
                w.write_record(&row)?;
            }
            w.flush()?;
            Ok(())
        }
        Format::Json => {
            let points: Vec<_> = xs
                .iter()
                .zip(&values)
                .map(|(x, v)| json!({"x": x, "re": v.re, "im": v.im}))
                .collect();
            write_json(buf, &json!({"points": points}))
        }
    })
}

fn verify(c: &Common) -> Outcome {
    let l = load(c)?;
    let n = l.spec.n;
    let report = run_suite(&l.spec, &l.nodes, &s_grid(c, n)?, &log_grid(c, n)?)?;
    emit(c, Format::Json, |format, buf| match format {
        Format::Json => write_json(buf, &report),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["check", "value", "threshold", "passed", "detail"])?;
            for ch in &report.checks {
                w.write_record([
                    ch.name.to_string(),
                    ch.value.to_string(),
                    ch.threshold.to_string(),
                    ch.passed.to_string(),
                    ch.detail.clone(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
    })?;
    for ch in &report.checks {
        let tag = if ch.passed { "ok" } else { "FAILED" };
        eprintln!(
            "{:<18} {:>12.3e} <= {:<9.1e} {tag}",
            ch.name, ch.value, ch.threshold
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check(
            report.failures().map(|c| c.name.to_string()).collect(),
        ))
    }
}

fn probe(c: &Common, sizes: &[usize], threshold: f64) -> Outcome {
    let l = load(c)?;
    let p = noncompactness_probe(&l.spec, sizes, threshold)?;
    emit(c, Format::Json, |format, buf| match format {
        Format::Json => write_json(buf, &p),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["size", "count_above_threshold"])?;
            for (s, k) in p.sizes.iter().zip(&p.counts) {
                w.write_record([s.to_string(), k.to_string()])?;
            }
            w.flush()?;
            Ok(())
        }
    })
}
