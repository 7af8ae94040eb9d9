//! One row per (case, a, corrector).

use std::fs;
use std::io;
use std::path::Path;

use nehari_shape::oracle::fd::{fd_trajectory_derivatives, FdDerivatives};
use nehari_shape::shapederiv::second_order;
use nehari_shape::{format_sci, CorrectorSpec, DerivativeReport, ProblemSpec, QuadratureRule, RectangleCase};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{expressions, CorrectorId, OnlyFilter, ScenarioConfig};

pub const REPORT_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "case,f,theta,a,corrector,first_order,second_order,q_u,q_v,vv0,gamma_star,fast_path";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Job {
    pub case: RectangleCase,
    pub a: f64,
    pub corrector: CorrectorId,
}

#[derive(Clone, Debug, Serialize)]
pub struct RowData {
    pub derivatives: DerivativeReport,
    pub fd: Option<FdDerivatives>,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub job: Job,
    pub result: Result<RowData, String>,
}

/// Jobs in `(case, a, corrector)` order, as listed in the config.
pub fn jobs(cfg: &ScenarioConfig, only: &OnlyFilter) -> Vec<Job> {
    let heights = cfg.a_values();
    let mut out = Vec::new();
    for &case in &cfg.cases {
        for &a in &heights {
            for &corrector in &cfg.correctors {
                if only.matches(case, a, corrector) {
                    out.push(Job { case, a, corrector });
                }
            }
        }
    }
    out
}

pub fn rule(cfg: &ScenarioConfig, a: f64) -> nehari_shape::Result<QuadratureRule> {
    QuadratureRule::new(a, cfg.quad_panels, cfg.quad_panels, cfg.quad_order)
}

pub fn build_corrector(
    id: CorrectorId,
    case: RectangleCase,
    spec: &ProblemSpec,
    rule: &QuadratureRule,
) -> nehari_shape::Result<CorrectorSpec> {
    let a = rule.a();
    match id {
        CorrectorId::YTimesU => Ok(CorrectorSpec::y_times_u(spec)),
        CorrectorId::Phi(m, k) => CorrectorSpec::eigenmode(m, k, a),
        CorrectorId::W(m, k) => CorrectorSpec::fourier_optimal(spec, &case.deformation(a), rule, m, k),
        CorrectorId::OptimalAnalytic => CorrectorSpec::analytic_optimal(case, a),
    }
}

pub fn run_job(cfg: &ScenarioConfig, job: Job) -> Result<RowData, String> {
    let inner = || -> nehari_shape::Result<RowData> {
        let rule = rule(cfg, job.a)?;
        let spec = ProblemSpec::rectangle_eigenvalue(job.a)?;
        let field = job.case.deformation(job.a);
        let corrector = build_corrector(job.corrector, job.case, &spec, &rule)?;
        let derivatives = second_order(&spec, &field, &rule, &corrector)?;
        let fd = if cfg.oracle_fd && corrector.field().is_some() {
            Some(fd_trajectory_derivatives(&spec, &field, &rule, &corrector, cfg.fd_step)?)
        } else {
            None
        };
        Ok(RowData { derivatives, fd })
    };
    inner().map_err(|e| e.to_string())
}

pub fn run_sweep(cfg: &ScenarioConfig, only: &OnlyFilter) -> Vec<Row> {
    jobs(cfg, only)
        .into_par_iter()
        .map(|job| Row {
            job,
            result: run_job(cfg, job),
        })
        .collect()
}

pub fn csv_line(row: &Row) -> String {
    let Job { case, a, corrector } = row.job;
    let (f, theta) = expressions(case);
    let head = format!("{},{},{},{},{corrector}", case.id(), f.as_str(), theta.as_str(), format_sci(a));
    match &row.result {
        Ok(data) => {
            let r = &data.derivatives;
            let nums = [r.first_order, r.second_order, r.q_u, r.q_v, r.vv0, r.gamma_star]
                .map(format_sci)
                .join(",");
            format!("{head},{nums},{}", r.fast_path.as_str())
        }
        Err(_) => format!("{head}{}", ",error".repeat(7)),
    }
}

pub fn csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&csv_line(row));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Quadrature {
    panels: usize,
    order: usize,
}

#[derive(Serialize)]
struct Oracle<'a> {
    fd: Option<&'a FdDerivatives>,
}

#[derive(Serialize)]
pub struct JsonReport<'a> {
    report_version: u32,
    case: &'static str,
    f: &'static str,
    theta: &'static str,
    a: f64,
    corrector: String,
    quadrature: Quadrature,
    status: &'static str,
    error: Option<&'a str>,
    derivatives: Option<&'a DerivativeReport>,
    oracle: Oracle<'a>,
}

pub fn json_report<'a>(cfg: &ScenarioConfig, row: &'a Row) -> JsonReport<'a> {
    let (f, theta) = expressions(row.job.case);
    let (status, error, derivatives, fd) = match &row.result {
        Ok(d) => ("ok", None, Some(&d.derivatives), d.fd.as_ref()),
        Err(e) => ("error", Some(e.as_str()), None, None),
    };
    JsonReport {
        report_version: REPORT_VERSION,
        case: row.job.case.id(),
        f: f.as_str(),
        theta: theta.as_str(),
        a: row.job.a,
        corrector: row.job.corrector.to_string(),
        quadrature: Quadrature {
            panels: cfg.quad_panels,
            order: cfg.quad_order,
        },
        status,
        error,
        derivatives,
        oracle: Oracle { fd },
    }
}

pub fn json_file_name(job: &Job) -> String {
    format!("{}_a{:.6}_{}.json", job.case.id(), job.a, job.corrector)
}

/// One pretty-printed report per row in `dir`.
pub fn write_json(cfg: &ScenarioConfig, rows: &[Row], dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for row in rows {
        let text = serde_json::to_string_pretty(&json_report(cfg, row)).map_err(io::Error::other)?;
        fs::write(dir.join(json_file_name(&row.job)), text + "\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig::parse("cases = iv\na_start = 1.0\na_stop = 1.0\ncorrectors = optimal_analytic, phi_1_2\n")
            .unwrap()
    }

    #[test]
    fn analytic_corrector_row_at_unit_height() {
        let cfg = small();
        let rows = run_sweep(&cfg, &OnlyFilter::default());
        assert_eq!(rows.len(), 2);
        let d = rows[0].result.as_ref().unwrap();
        assert!(d.derivatives.second_order.abs() <= 1e-8);
        assert!(d.fd.is_none());
        assert!(rows[1].result.as_ref().unwrap().fd.is_some());
    }

    #[test]
    fn unsupported_rows_are_marked() {
        let cfg = ScenarioConfig::parse("cases = i\na_stop = 1.0\ncorrectors = optimal_analytic\n").unwrap();
        let rows = run_sweep(&cfg, &OnlyFilter::default());
        assert!(rows[0].result.is_err());
        let line = csv_line(&rows[0]);
        assert!(line.ends_with("error,error,error,error,error,error,error"), "{line}");
        assert_eq!(line.split(',').count(), CSV_HEADER.split(',').count());
    }

    #[test]
    fn report_has_version() {
        let cfg = small();
        let rows = run_sweep(&cfg, &OnlyFilter::default());
        let v = serde_json::to_value(json_report(&cfg, &rows[1])).unwrap();
        assert_eq!(v["report_version"], 1);
        assert_eq!(v["corrector"], "phi_1_2");
        assert!(v["derivatives"]["second_order"].is_number());
        assert!(v["oracle"]["fd"]["d2"].is_number());
    }
}
