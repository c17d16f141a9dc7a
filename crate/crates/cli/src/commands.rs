//! Subcommand implementations. Every command writes one JSON report, and
//! the report is written before a failed check turns into an exit code.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use weylat::models::{ModelKind, ModelSpec};
use weylat::response::{
    hall_invariant, invariance_probe, local_current, model_chern, model_chern_occupied, sum_local_current,
    total_current, total_current_oracle, write_current_csv, HallResult, ProbeReport,
};
use weylat::suite::{axiom_suite, SuiteReport};
use weylat::{buot_symbol, continuum_symbol, weyl_symbol, Flavor, LatticeOperator};

use crate::config::{Config, QuadratureConfig, SweepConfig, SCHEMA_VERSION};
use crate::{CliError, OperatorChoice};

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_report<T: Serialize>(path: Option<&Path>, report: &T) -> Result<(), CliError> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, report).map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Header<'a> {
    command: &'a str,
    version: u32,
    seed: u64,
}

impl<'a> Header<'a> {
    fn new(command: &'a str, cfg: &Config) -> Self {
        Self {
            command,
            version: SCHEMA_VERSION,
            seed: cfg.seed,
        }
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    suite: SuiteReport,
}

pub fn verify(cfg: &Config, out: Option<&Path>) -> Result<(), CliError> {
    let g = cfg.geometry()?;
    let suite = axiom_suite(&g, cfg.verify.trials, cfg.seed, cfg.tolerance.axioms)?;
    let passed = suite.passed;
    let failed: Vec<String> = suite.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    write_report(
        out,
        &VerifyReport {
            header: Header::new("verify", cfg),
            suite,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}

pub fn symbols(cfg: &Config, flavor: &str, op: OperatorChoice, out: Option<&Path>) -> Result<(), CliError> {
    let flavor: Flavor = flavor.parse()?;
    let operator = match op {
        OperatorChoice::Identity => LatticeOperator::identity(&cfg.geometry()?),
        OperatorChoice::Shift => {
            let g = cfg.geometry()?;
            let mut steps = vec![0; g.dim()];
            steps[0] = 1;
            LatticeOperator::translation(&g, &steps)?
        }
        OperatorChoice::Random => LatticeOperator::random(&cfg.geometry()?, cfg.seed, None),
        OperatorChoice::Hamiltonian => {
            let m = cfg.model()?;
            m.hamiltonian(cfg.resolve_mu(m)?)?
        }
    };
    let sym = match flavor {
        Flavor::W => weyl_symbol(&operator),
        Flavor::B => buot_symbol(&operator),
        Flavor::C => continuum_symbol(&operator),
        Flavor::Series => {
            return Err(CliError::Config("series symbols are built from coefficient series, not operators".into()))
        }
    };
    let mut w = sink(out)?;
    sym.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct Oracle {
    pub mesh: [usize; 2],
    pub band_chern: Vec<i64>,
    pub occupied_bands: usize,
    pub occupied_chern: i64,
}

/// Link-variable Chern numbers of the unperturbed model, when it is periodic
/// and the chemical potential separates whole bands.
fn oracle(model: &ModelSpec, mu: f64, mesh: [usize; 2]) -> Result<Option<Oracle>, CliError> {
    match model.supercell() {
        Some(c) if c.len() == 2 => {}
        _ => return Ok(None),
    }
    let clean = model.clean_hamiltonian(mu)?;
    let ev = clean.eigenvalues()?;
    let occupied = ev.iter().filter(|&&e| e < 0.0).count();
    let per_band = ev.len() / model.bands();
    if occupied % per_band != 0 {
        return Ok(None);
    }
    let bands = occupied / per_band;
    let occupied_chern = model_chern_occupied(model, mesh, bands)?;
    let band_chern = model_chern(model, mesh).unwrap_or_default();
    Ok(Some(Oracle {
        mesh,
        band_chern,
        occupied_bands: bands,
        occupied_chern,
    }))
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureReport {
    pub nodes: usize,
    pub scale: f64,
    pub estimated_error: Option<f64>,
}

fn quadrature_report(q: &QuadratureConfig, r: &HallResult) -> QuadratureReport {
    QuadratureReport {
        nodes: q.nodes,
        scale: q.scale,
        estimated_error: r.quadrature_error,
    }
}

#[derive(Serialize)]
struct HallReport<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    model: &'a ModelSpec,
    mu: f64,
    hall: HallResult,
    quadrature: QuadratureReport,
    oracle: Option<Oracle>,
    quantized: bool,
    oracle_agrees: Option<bool>,
}

pub fn hall(cfg: &Config, out: Option<&Path>) -> Result<(), CliError> {
    let model = cfg.model()?;
    let mu = cfg.resolve_mu(model)?;
    let h = model.hamiltonian(mu)?;
    let quad = cfg.quadrature.build()?;
    let r = hall_invariant(&h, 0.0, &quad, cfg.quadrature.error_estimate)?;
    let oracle = oracle(model, mu, cfg.chern_mesh)?;
    let quantized = r.distance_to_integer < cfg.tolerance.quantization;
    let oracle_agrees = oracle.as_ref().map(|o| o.occupied_chern == r.nearest_integer);
    let report = HallReport {
        header: Header::new("hall", cfg),
        model,
        mu,
        quadrature: quadrature_report(&cfg.quadrature, &r),
        hall: r.clone(),
        oracle,
        quantized,
        oracle_agrees,
    };
    write_report(out, &report)?;
    if let Some(e) = r.quadrature_error.filter(|&e| e > cfg.tolerance.quadrature) {
        return Err(CliError::Numerical(format!("quadrature error estimate {e:.3e}")));
    }
    if oracle_agrees == Some(false) {
        return Err(CliError::Verification(format!(
            "Hall invariant {:.6} rounds to {}, link-variable oracle gives {}",
            r.invariant,
            r.nearest_integer,
            report.oracle.as_ref().map_or(0, |o| o.occupied_chern)
        )));
    }
    if !quantized {
        return Err(CliError::Verification(format!(
            "Hall invariant {:.6} is {:.3e} away from an integer",
            r.invariant, r.distance_to_integer
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct CurrentReport<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    model: &'a ModelSpec,
    mu: f64,
    quadrature_nodes: usize,
    total_current: Vec<f64>,
    operator_oracle: Vec<f64>,
    local_sum: Vec<f64>,
    max_abs_local: Vec<f64>,
    max_oracle_deviation: f64,
}

pub fn current(cfg: &Config, out: Option<&Path>, csv: Option<&Path>) -> Result<(), CliError> {
    let model = cfg.model()?;
    let mu = cfg.resolve_mu(model)?;
    let h = model.hamiltonian(mu)?;
    let g = h.geometry().clone();
    let quad = cfg.quadrature.build()?;
    let local = local_current(&h, 0.0, &quad)?;
    let total = total_current(&h, 0.0, &quad)?;
    let oracle = total_current_oracle(&h, 0.0)?;
    let dev = total.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if let Some(p) = csv {
        write_current_csv(&g, &local, sink(Some(p))?)?;
    }
    write_report(
        out,
        &CurrentReport {
            header: Header::new("current", cfg),
            model,
            mu,
            quadrature_nodes: quad.len(),
            local_sum: sum_local_current(&g, &local),
            max_abs_local: local.iter().map(|r| r.iter().fold(0.0, |m: f64, v| m.max(v.abs()))).collect(),
            total_current: total,
            operator_oracle: oracle,
            max_oracle_deviation: dev,
        },
    )?;
    if dev > cfg.tolerance.current {
        return Err(CliError::Verification(format!("total current differs from the operator trace by {dev:.3e}")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub mu: f64,
    pub flux: Option<[i64; 2]>,
    pub hall: Option<HallResult>,
    pub oracle_chern: Option<i64>,
    pub error: Option<String>,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    model: &'a ModelSpec,
    quadrature_nodes: usize,
    rows: Vec<SweepRow>,
}

fn with_flux(model: &ModelSpec, p: i64, q: i64) -> Result<ModelSpec, CliError> {
    let mut m = model.clone();
    m.model = match m.model {
        ModelKind::Hofstadter { t, .. } => ModelKind::Hofstadter { t, p, q },
        ModelKind::Inhomogeneous { t, amplitude, .. } => ModelKind::Inhomogeneous { t, p, q, amplitude },
        _ => return Err(CliError::Config("flux sweeps need a hofstadter or inhomogeneous model".into())),
    };
    Ok(m)
}

fn sweep_point(cfg: &Config, model: &ModelSpec, mu: Option<f64>, flux: Option<[i64; 2]>) -> SweepRow {
    let quad = cfg.quadrature.build();
    let attempt = || -> Result<(f64, HallResult, Option<i64>), CliError> {
        let mu = match mu {
            Some(v) => v,
            None => cfg.resolve_mu(model)?,
        };
        let h = model.hamiltonian(mu)?;
        let r = hall_invariant(&h, 0.0, quad.as_ref().map_err(|e| CliError::Config(e.to_string()))?, false)?;
        let o = oracle(model, mu, cfg.chern_mesh).ok().flatten().map(|o| o.occupied_chern);
        Ok((mu, r, o))
    };
    match attempt() {
        Ok((mu, r, o)) => SweepRow {
            mu,
            flux,
            hall: Some(r),
            oracle_chern: o,
            error: None,
        },
        Err(e) => SweepRow {
            mu: mu.unwrap_or(f64::NAN),
            flux,
            hall: None,
            oracle_chern: None,
            error: Some(e.to_string()),
        },
    }
}

pub fn sweep(cfg: &Config, out: Option<&Path>, csv: Option<&Path>) -> Result<(), CliError> {
    let model = cfg.model()?;
    let plan = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs a \"sweep\" block".into()))?;
    let rows: Vec<SweepRow> = match plan {
        SweepConfig::Mu(values) => values.iter().map(|&mu| sweep_point(cfg, model, Some(mu), None)).collect(),
        SweepConfig::Flux(values) => values
            .iter()
            .map(|&[p, q]| {
                let m = with_flux(model, p, q)?;
                Ok(sweep_point(cfg, &m, None, Some([p, q])))
            })
            .collect::<Result<_, CliError>>()?,
    };
    if let Some(path) = csv {
        let mut w = sink(Some(path))?;
        writeln!(w, "mu,p,q,invariant,nearest_integer,oracle_chern,error")?;
        for r in &rows {
            let (p, q) = r.flux.map_or((String::new(), String::new()), |[p, q]| (p.to_string(), q.to_string()));
            let (n, k) = r.hall.as_ref().map_or((String::new(), String::new()), |h| {
                (format!("{:.15e}", h.invariant), h.nearest_integer.to_string())
            });
            let o = r.oracle_chern.map_or(String::new(), |c| c.to_string());
            let e = r.error.as_deref().unwrap_or("").replace(',', ";");
            writeln!(w, "{},{p},{q},{n},{k},{o},{e}", r.mu)?;
        }
        w.flush()?;
    }
    write_report(
        out,
        &SweepReport {
            header: Header::new("sweep", cfg),
            model,
            quadrature_nodes: cfg.quadrature.nodes,
            rows,
        },
    )
}

#[derive(Serialize)]
struct ProbeOutput<'a> {
    #[serde(flatten)]
    header: Header<'a>,
    model: &'a ModelSpec,
    mu: f64,
    quadrature_nodes: usize,
    #[serde(flatten)]
    probe: ProbeReport,
    hall_within_tolerance: bool,
    current_within_tolerance: bool,
}

pub fn probe(cfg: &Config, out: Option<&Path>) -> Result<(), CliError> {
    let model = cfg.model()?;
    let plan = cfg
        .probe
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs a \"probe\" block".into()))?;
    let mu = cfg.resolve_mu(model)?;
    let h = model.hamiltonian(mu)?;
    let quad = cfg.quadrature.build()?;
    let report = invariance_probe(&h, &plan.eps, plan.trials, cfg.seed, &quad)?;
    write_report(
        out,
        &ProbeOutput {
            header: Header::new("probe", cfg),
            model,
            mu,
            quadrature_nodes: quad.len(),
            hall_within_tolerance: report.max_hall_deviation < cfg.tolerance.quantization,
            current_within_tolerance: report.max_current_deviation < cfg.tolerance.current,
            probe: report,
        },
    )
}
