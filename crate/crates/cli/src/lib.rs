//! Batch driver: configuration parsing, subcommands and exit codes.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::Config;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const VERIFICATION: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Verification(_) => exit::VERIFICATION,
            CliError::Numerical(_) => exit::NUMERICAL,
        }
    }
}

impl From<weylat::Error> for CliError {
    fn from(e: weylat::Error) -> Self {
        use weylat::Error as E;
        let msg = e.to_string();
        match e {
            E::GapClosed { .. } | E::Singular | E::NonConvergence(_) | E::BandCrossing(_) => CliError::Numerical(msg),
            E::Reconstruction(_) => CliError::Verification(msg),
            _ => CliError::Config(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "weylat", version, about = "Exact lattice Wigner-Weyl calculus and Hall response")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Report path, overriding the configuration's `output`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the symbol axiom suite on seeded random operators.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Export a symbol of a named operator as CSV.
    Symbols {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "W")]
        flavor: String,
        #[arg(long, value_enum, default_value_t = OperatorChoice::Identity)]
        op: OperatorChoice,
    },
    /// Hall invariant with quadrature diagnostics and the link-variable oracle.
    Hall {
        #[command(flatten)]
        common: Common,
    },
    /// Local and total currents, compared with the operator-trace oracle.
    Current {
        #[command(flatten)]
        common: Common,
        /// Write the local current field here as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Hall invariant over a list of chemical potentials or fluxes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Write the scan as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Hall invariant and total current under seeded perturbations.
    Probe {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OperatorChoice {
    Identity,
    /// Translation by one physical site along the first axis.
    Shift,
    /// Seeded random operator.
    Random,
    /// The configured model Hamiltonian `H − μ`.
    Hamiltonian,
}

/// Execute a parsed command line; the error carries the exit code.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Verify { common }
        | Command::Symbols { common, .. }
        | Command::Hall { common }
        | Command::Current { common, .. }
        | Command::Sweep { common, .. }
        | Command::Probe { common } => common,
    };
    let cfg = Config::load(&common.config)?;
    if let Some(n) = cfg.threads {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = common.output.clone().or_else(|| cfg.output.clone());
    match &cli.command {
        Command::Verify { .. } => commands::verify(&cfg, out.as_deref()),
        Command::Symbols { flavor, op, .. } => commands::symbols(&cfg, flavor, *op, out.as_deref()),
        Command::Hall { .. } => commands::hall(&cfg, out.as_deref()),
        Command::Current { csv, .. } => commands::current(&cfg, out.as_deref(), csv.as_deref()),
        Command::Sweep { csv, .. } => commands::sweep(&cfg, out.as_deref(), csv.as_deref()),
        Command::Probe { .. } => commands::probe(&cfg, out.as_deref()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    struct Scratch(PathBuf);

    impl Scratch {
        fn new(tag: &str) -> Self {
            let dir = std::env::temp_dir().join(format!("weylat-cli-{tag}-{}", std::process::id()));
            std::fs::create_dir_all(&dir).unwrap();
            Scratch(dir)
        }

        fn file(&self, name: &str, text: &str) -> PathBuf {
            let p = self.0.join(name);
            std::fs::write(&p, text).unwrap();
            p
        }
    }

    impl Drop for Scratch {
        fn drop(&mut self) {
            std::fs::remove_dir_all(&self.0).ok();
        }
    }

    fn invoke(args: &[&str], config: &Path, out: &Path) -> Result<(), CliError> {
        let mut argv = vec!["weylat"];
        argv.extend_from_slice(args);
        let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
        argv.extend_from_slice(&["--config", c, "--output", o]);
        run(Cli::try_parse_from(argv).unwrap())
    }

    fn code(r: Result<(), CliError>) -> i32 {
        r.map_or_else(|e| e.exit_code(), |_| exit::OK)
    }

    fn report(path: &Path) -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    const CHAIN: &str = r#"{"version": 1, "seed": 3, "geometry": {"sites": [4], "internal_dim": 2}, "verify": {"trials": 5}}"#;

    fn model_config(model: &str, extra: &str) -> String {
        format!(r#"{{"version": 1, "seed": 3, "model": {model}, "quadrature": {{"nodes": 16}}{extra}}}"#)
    }

    #[test]
    fn config_defaults_and_schema_errors() {
        let c = Config::parse(CHAIN).unwrap();
        assert_eq!(c.quadrature.nodes, 64);
        assert_eq!(c.tolerance.axioms, 1e-10);
        assert_eq!(c.geometry().unwrap().internal_dim(), 2);
        for bad in [
            r#"{"version": 2, "seed": 1}"#,
            r#"{"version": 1}"#,
            r#"{"version": 1, "seed": 1, "colour": 1}"#,
            r#"{"version": 1, "seed": 1, "threads": 0}"#,
            r#"{"version": 1, "seed": 1, "geometry": {"sites": [3]}}"#,
        ] {
            let e = Config::parse(bad).and_then(|c| c.geometry().map(|_| ()));
            assert_eq!(code(e), exit::CONFIG, "{bad}");
        }
        let mu = Config::parse(r#"{"version": 1, "seed": 1, "mu": {"gap": 2}}"#).unwrap();
        assert_eq!(mu.mu, Some(config::MuConfig::Gap { gap: 2 }));
        let sweep = Config::parse(r#"{"version": 1, "seed": 1, "sweep": {"parameter": "flux", "values": [[1, 3]]}}"#);
        assert_eq!(sweep.unwrap().sweep, Some(config::SweepConfig::Flux(vec![[1, 3]])));
    }

    #[test]
    fn verify_exit_codes() {
        let s = Scratch::new("verify");
        let out = s.0.join("report.json");
        let cfg = s.file("chain.json", CHAIN);
        assert_eq!(code(invoke(&["verify"], &cfg, &out)), exit::OK);
        let r = report(&out);
        assert_eq!(r["command"], "verify");
        assert_eq!(r["suite"]["passed"], true);
        assert_eq!(r["suite"]["checks"].as_array().unwrap().len(), 5);

        let strict = s.file("strict.json", &CHAIN.replace("\"verify\"", "\"tolerance\": {\"axioms\": 1e-300}, \"verify\""));
        assert_eq!(code(invoke(&["verify"], &strict, &out)), exit::VERIFICATION);
        assert_eq!(report(&out)["suite"]["passed"], false);

        assert_eq!(code(invoke(&["verify"], &s.0.join("missing.json"), &out)), exit::CONFIG);
    }

    #[test]
    fn buot_identity_export() {
        let s = Scratch::new("symbols");
        let out = s.0.join("b.csv");
        let cfg = s.file("chain.json", r#"{"version": 1, "seed": 1, "geometry": {"sites": [4]}}"#);
        invoke(&["symbols", "--flavor", "B", "--op", "identity"], &cfg, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x_index,p_index,orb_a,orb_b,x0,p0,re,im"));
        let mut rows = 0;
        for line in lines {
            let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert!((f[6] - (1.0 + (std::f64::consts::PI * f[4]).cos()) / 2.0).abs() < 1e-12);
            assert!(f[7].abs() < 1e-12);
            rows += 1;
        }
        assert_eq!(rows, 8 * 4);
        let e = invoke(&["symbols", "--flavor", "series"], &cfg, &out);
        assert_eq!(code(e), exit::CONFIG);
        let e = invoke(&["symbols", "--flavor", "Q"], &cfg, &out);
        assert_eq!(code(e), exit::CONFIG);
    }

    #[test]
    fn hall_reports_and_exit_codes() {
        let s = Scratch::new("hall");
        let out = s.0.join("hall.json");
        let trivial = r#"{"sites": [4, 4], "model": {"kind": "stacked_dimers", "t1": 1.0, "t2": 0.2, "ty": 0.3}}"#;
        let cfg = s.file("trivial.json", &model_config(trivial, ""));
        assert_eq!(code(invoke(&["hall"], &cfg, &out)), exit::OK);
        let r = report(&out);
        assert!(r["hall"]["invariant"].as_f64().unwrap().abs() < 1e-2);
        assert_eq!(r["oracle"]["occupied_chern"], 0);
        assert_eq!(r["oracle_agrees"], true);

        let free = r#"{"sites": [4, 4], "model": {"kind": "hofstadter", "t": 1.0, "p": 0, "q": 1}}"#;
        let cfg = s.file("free.json", &model_config(free, ""));
        assert_eq!(code(invoke(&["hall"], &cfg, &out)), exit::NUMERICAL);

        let cfg = s.file("flux.json", &model_config(r#"{"sites": [4, 4], "model": {"kind": "hofstadter", "t": 1.0, "p": 1, "q": 3}}"#, ""));
        assert_eq!(code(invoke(&["hall"], &cfg, &out)), exit::CONFIG);
    }

    #[test]
    fn current_sweep_and_probe() {
        let s = Scratch::new("current");
        let out = s.0.join("r.json");
        let csv = s.0.join("j.csv");
        let qwz = r#"{"sites": [4, 4], "model": {"kind": "qwz", "m": 1.0}}"#;
        let cfg = s.file("qwz.json", &model_config(qwz, r#", "sweep": {"parameter": "mu", "values": [0.0, 0.1]}, "probe": {"eps": [0.0, 0.01], "trials": 1}"#));

        let argv = ["weylat", "current", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--csv", csv.to_str().unwrap()];
        run(Cli::try_parse_from(argv).unwrap()).unwrap();
        let r = report(&out);
        assert!(r["max_oracle_deviation"].as_f64().unwrap() < 1e-8);
        assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 64);

        invoke(&["sweep"], &cfg, &out).unwrap();
        let rows = report(&out)["rows"].as_array().unwrap().clone();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r["error"].is_null() && r["oracle_chern"].as_i64().is_some()));

        invoke(&["probe"], &cfg, &out).unwrap();
        let r = report(&out);
        assert_eq!(r["rows"].as_array().unwrap().len(), 2);
        assert!(r["max_hall_deviation"].as_f64().unwrap() < 1e-2);

        let bare = s.file("bare.json", &model_config(qwz, ""));
        assert_eq!(code(invoke(&["sweep"], &bare, &out)), exit::CONFIG);
        assert_eq!(code(invoke(&["probe"], &bare, &out)), exit::CONFIG);
    }

    #[test]
    fn command_line_shape() {
        assert!(Cli::try_parse_from(["weylat", "hall"]).is_err());
        assert!(Cli::try_parse_from(["weylat", "symbols", "--config", "c.json", "--op", "bogus"]).is_err());
        let c = Cli::try_parse_from(["weylat", "symbols", "--config", "c.json", "--op", "shift"]).unwrap();
        assert!(matches!(c.command, Command::Symbols { op: OperatorChoice::Shift, .. }));
    }
}
