//! Parameter sweeps over config paths, with optional per-point optimization.

use rayon::prelude::*;

use crate::config::{self, as_f64, Optimize, Overrides, ScenarioConfig};
use crate::format::{Cell, Table};
use crate::run::{run, scalar, scalar_column};
use crate::CliError;

pub struct SweepResult {
    pub table: Table,
    /// Worst failure among the points, if any.
    pub failure: Option<CliError>,
}

fn cartesian(axes: &[Vec<toml::Value>]) -> Vec<Vec<toml::Value>> {
    axes.iter().fold(vec![vec![]], |acc, vals| {
        acc.iter().flat_map(|prefix| vals.iter().map(move |v| [prefix.as_slice(), std::slice::from_ref(v)].concat())).collect()
    })
}

fn point_config(base: &toml::Value, assign: &[(String, toml::Value)]) -> Result<(toml::Value, ScenarioConfig), CliError> {
    let mut v = base.clone();
    for (path, val) in assign {
        config::set_path(&mut v, path, val.clone())?;
    }
    let cfg = config::parse(v.clone())?;
    Ok((v, cfg))
}

fn scalars_at(cfg: &ScenarioConfig, names: &[String], ov: Overrides) -> Result<Vec<f64>, CliError> {
    let out = run(cfg, ov)?;
    if !out.invariants.within {
        return Err(CliError::Invariant(format!("{:?}", out.invariants)));
    }
    names.iter().map(|s| scalar(&out, s)).collect()
}

/// Golden-section search on the log of `opt.param`; returns (argmax, scalars there).
fn optimize(value: &toml::Value, opt: &Optimize, names: &[String], ov: Overrides) -> Result<(f64, Vec<f64>), CliError> {
    let scale = match &opt.scale_with {
        Some(p) => config::get_path(value, p).and_then(as_f64).ok_or_else(|| CliError::Parse(format!("scale_with path '{p}' is not a number")))?,
        None => 1.0,
    };
    let (lo, hi) = (opt.lo * scale, opt.hi * scale);
    if !(lo > 0.0 && hi > lo) {
        return Err(CliError::Parse("optimize bracket must satisfy 0 < lo < hi".into()));
    }
    let mut all = vec![opt.objective.clone()];
    all.extend(names.iter().cloned());
    let eval = |lx: f64| -> Result<Vec<f64>, CliError> {
        let (_, cfg) = point_config(value, &[(opt.param.clone(), toml::Value::Float(lx.exp()))])?;
        scalars_at(&cfg, &all, ov)
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    while b - a > opt.tol {
        if fc[0] > fd[0] {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d)?;
        }
    }
    let (x, f) = if fc[0] > fd[0] { (c, fc) } else { (d, fd) };
    Ok((x.exp(), f))
}

fn render(v: &toml::Value) -> Cell {
    match as_f64(v) {
        Some(x) => Cell::Num(x),
        None => Cell::Text(v.to_string().replace(',', ";")),
    }
}

pub fn sweep(base: &toml::Value, ov: Overrides) -> Result<SweepResult, CliError> {
    let cfg = config::parse(base.clone())?;
    let sw = cfg.sweep.clone().ok_or_else(|| CliError::Parse(format!("scenario '{}' has no [sweep] section", cfg.name)))?;
    let axes: Vec<Vec<toml::Value>> = sw.axes.iter().map(|a| a.points()).collect::<Result<_, _>>()?;
    let names: Vec<String> = sw.axes.iter().map(|a| a.param.clone()).collect();

    let mut columns: Vec<String> = names.iter().map(|p| p.rsplit('.').next().unwrap().to_string()).collect();
    if let Some(opt) = &sw.optimize {
        columns.push(format!("opt_{}", opt.param.rsplit('.').next().unwrap()));
        columns.push(scalar_column(&opt.objective));
    }
    columns.extend(sw.scalars.iter().map(|s| scalar_column(s)));
    columns.push("status".into());
    let width = columns.len() - 1;

    let points = cartesian(&axes);
    let results: Vec<Result<Vec<f64>, CliError>> = points
        .par_iter()
        .map(|pt| {
            let assign: Vec<(String, toml::Value)> = names.iter().cloned().zip(pt.iter().cloned()).collect();
            let (value, cfg) = point_config(base, &assign)?;
            match &sw.optimize {
                Some(opt) => {
                    let (x, s) = optimize(&value, opt, &sw.scalars, ov)?;
                    Ok([vec![x], s].concat())
                }
                None => scalars_at(&cfg, &sw.scalars, ov),
            }
        })
        .collect();

    let mut failure: Option<CliError> = None;
    let mut rows = Vec::with_capacity(points.len());
    for (pt, res) in points.iter().zip(results) {
        let mut row: Vec<Cell> = pt.iter().map(render).collect();
        match res {
            Ok(vals) => {
                row.extend(vals.into_iter().map(Cell::Num));
                row.push(Cell::Text("ok".into()));
            }
            Err(e) => {
                row.resize(width, Cell::Num(f64::NAN));
                row.push(Cell::Text(e.status().into()));
                eprintln!("sweep point {:?}: {e}", pt.iter().map(|v| v.to_string()).collect::<Vec<_>>());
                if failure.as_ref().map_or(true, |f| e.exit_code() > f.exit_code()) {
                    failure = Some(e);
                }
            }
        }
        rows.push(row);
    }
    let mut comments = vec![format!("scenario: {}", cfg.name)];
    if !cfg.description.is_empty() {
        comments.push(cfg.description.clone());
    }
    Ok(SweepResult { table: Table { comments, columns, rows }, failure })
}
