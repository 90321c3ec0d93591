//! The `qkdrate` command-line tool.
//!
//! Every command builds its output in memory and writes it once, to `--out` or
//! standard output, so reports are byte-stable for a given config and seed.

pub mod config;
pub mod format;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qkdrate_core::scenario::poisson_breakdown;
use qkdrate_core::simulator::{compare_with_analytic, recover_single_photon, Estimate};
use qkdrate_core::{
    distance_sweep, empirical_breakdown, rate_alice, rate_bob, rate_gllp, rate_improved, rate_shor_preskill,
    run_simulation, simulate_decoy_run, threshold_bit_error, Protocol, QkdError, RateBreakdown, SourceModel,
};

pub use config::RunConfig;
use format::sig;

/// Digits in human-readable summaries.
const SUMMARY_DIGITS: usize = 4;
/// Digits in sweep CSV output.
const CSV_DIGITS: usize = 10;
/// |z| above this fails `simulate`.
const Z_LIMIT: f64 = 3.0;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or file paths. Exit code 2.
    #[error("{0}")]
    Invalid(String),
    /// A check or inversion failed. Exit code 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<QkdError> for CliError {
    fn from(e: QkdError) -> Self {
        match e {
            QkdError::Infeasible(_) => CliError::Failed(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qkdrate", version, about = "Key rates, thresholds and distance limits for BB84, six-state and PBC00")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Config file; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Simulation seed (simulation.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write output here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// One flag per config key.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// protocol.name: bb84, six-state or pbc00.
    #[arg(long, global = true)]
    pub protocol: Option<String>,
    /// source.kind: single-photon or poissonian.
    #[arg(long, global = true)]
    pub source: Option<String>,
    #[arg(long = "mean_photon_number", global = true)]
    pub mean_photon_number: Option<f64>,
    /// Comma-separated decoy intensities.
    #[arg(long = "decoy_mu", global = true, value_delimiter = ',')]
    pub decoy_mu: Option<Vec<f64>>,
    #[arg(long = "attenuation_db_per_km", global = true)]
    pub attenuation_db_per_km: Option<f64>,
    #[arg(long = "length_km", global = true)]
    pub length_km: Option<f64>,
    #[arg(long = "length_min_km", global = true)]
    pub length_min_km: Option<f64>,
    #[arg(long = "length_max_km", global = true)]
    pub length_max_km: Option<f64>,
    #[arg(long = "step_km", global = true)]
    pub step_km: Option<f64>,
    #[arg(long = "e_x_sq", global = true)]
    pub e_x_sq: Option<f64>,
    #[arg(long = "dark_count_prob", global = true)]
    pub dark_count_prob: Option<f64>,
    #[arg(long = "n_pulses", global = true)]
    pub n_pulses: Option<u64>,
    /// simulation.eve: none or intercept-resend.
    #[arg(long, global = true)]
    pub eve: Option<String>,
    #[arg(long = "simulated_dark_count_prob", global = true)]
    pub simulated_dark_count_prob: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate breakdown and all five key rates at link.length_km.
    #[command(allow_negative_numbers = true)]
    Rate,
    /// Bit error thresholds as CSV (protocol,e_x_sq,threshold).
    #[command(allow_negative_numbers = true)]
    Threshold(ThresholdArgs),
    /// Both rate bounds over the length grid as CSV.
    #[command(allow_negative_numbers = true)]
    Sweep,
    /// Monte Carlo tallies against the analytic breakdown; fails if any |z| > 3.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Recover p_sq and e_x_sq from simulated decoy-state runs.
    #[command(allow_negative_numbers = true)]
    Decoy,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Single-photon error rates; defaults to link.e_x_sq.
    #[arg(value_name = "E_X_SQ")]
    pub e_x_sq: Vec<f64>,
    /// Tabulate every protocol instead of protocol.name.
    #[arg(long)]
    pub all_protocols: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Also write raw tallies (category,count,bit_errors) to this CSV file.
    #[arg(long, value_name = "PATH")]
    pub tally: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        set(&mut cfg.protocol.name, &self.protocol);
        set(&mut cfg.source.kind, &self.source);
        set(&mut cfg.source.mean_photon_number, &self.mean_photon_number);
        set(&mut cfg.source.decoy_mu, &self.decoy_mu);
        set(&mut cfg.link.attenuation_db_per_km, &self.attenuation_db_per_km);
        set(&mut cfg.link.length_km, &self.length_km);
        set(&mut cfg.link.length_min_km, &self.length_min_km);
        set(&mut cfg.link.length_max_km, &self.length_max_km);
        set(&mut cfg.link.step_km, &self.step_km);
        set(&mut cfg.link.e_x_sq, &self.e_x_sq);
        set(&mut cfg.detector.dark_count_prob, &self.dark_count_prob);
        set(&mut cfg.simulation.n_pulses, &self.n_pulses);
        set(&mut cfg.simulation.eve, &self.eve);
        if self.simulated_dark_count_prob.is_some() {
            cfg.simulation.simulated_dark_count_prob = self.simulated_dark_count_prob;
        }
    }
}

/// Loads the config file (if any) and applies flag overrides.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    global.overrides.apply(&mut cfg);
    if let Some(seed) = global.seed {
        cfg.simulation.seed = seed;
    }
    Ok(cfg)
}

/// Command output. `failed` carries the reason for exit code 1; the body is
/// still written.
#[derive(Debug, Default)]
pub struct Report {
    pub body: String,
    pub failed: Option<String>,
}

impl From<String> for Report {
    fn from(body: String) -> Self {
        Report { body, failed: None }
    }
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let cfg = resolve_config(&cli.global)?;
    match &cli.command {
        Command::Rate => cmd_rate(&cfg).map(Report::from),
        Command::Threshold(args) => cmd_threshold(&cfg, &args.e_x_sq, args.all_protocols).map(Report::from),
        Command::Sweep => cmd_sweep(&cfg).map(Report::from),
        Command::Simulate(args) => cmd_simulate(&cfg, args.tally.as_deref()),
        Command::Decoy => cmd_decoy(&cfg).map(Report::from),
    }
}

fn emit(body: &str, out: Option<&Path>) -> Result<(), CliError> {
    use std::io::Write;
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::Invalid(format!("--out {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Failed(format!("stdout: {e}"))),
    }
}

/// Runs a parsed command line and maps the outcome to an exit code.
pub fn run(cli: Cli) -> ExitCode {
    let result = execute(&cli).and_then(|report| {
        emit(&report.body, cli.global.out.as_deref())?;
        match report.failed {
            Some(msg) => Err(CliError::Failed(msg)),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn s4(x: f64) -> String {
    sig(x, SUMMARY_DIGITS)
}

fn source_label(source: &SourceModel) -> String {
    match source {
        SourceModel::SinglePhoton => "single-photon".into(),
        SourceModel::Poissonian { mean_photon_number } => format!("poissonian (mu = {})", s4(*mean_photon_number)),
    }
}

fn push_row(out: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(out, "{key:<20}{value}").unwrap();
}

fn breakdown_rows(b: &RateBreakdown) -> [(&'static str, f64); 10] {
    [
        ("p_c", b.p_c()),
        ("p_sq", b.p_sq),
        ("p_mq", b.p_mq),
        ("p_emp", b.p_emp),
        ("p_dk", b.p_dk),
        ("omega0", b.omega0),
        ("omega1", b.omega1),
        ("e_x", b.e_x),
        ("e_x_sq", b.e_x_sq),
        ("e_x_single", b.e_x_single),
    ]
}

/// Breakdown and the five rates for one scenario.
pub fn cmd_rate(cfg: &RunConfig) -> Result<String, CliError> {
    let scn = cfg.scenario()?;
    let spec = &scn.protocol;
    let b = scn.breakdown()?;
    let mut out = String::new();
    push_row(&mut out, "protocol", spec.name());
    push_row(&mut out, "source", source_label(&scn.source));
    push_row(&mut out, "length_km", s4(scn.link.length_km));
    push_row(&mut out, "eta", s4(scn.transmittance()));
    push_row(&mut out, "dark_count_prob", s4(scn.detector.dark_count_prob));
    for (k, v) in breakdown_rows(&b) {
        push_row(&mut out, k, s4(v));
    }
    let rates = [
        ("rate_shor_preskill", rate_shor_preskill(b.p_c(), b.e_x, spec)?),
        ("rate_gllp", rate_gllp(&b, spec)?),
        ("rate_bob", rate_bob(&b, spec)?),
        ("rate_alice", rate_alice(&b, spec)?),
        ("rate_improved", rate_improved(&b, spec)?),
    ];
    for (k, v) in rates {
        push_row(&mut out, k, s4(v));
    }
    Ok(out)
}

/// CSV `protocol,e_x_sq,threshold`; `none` where no error rate gives a key.
pub fn cmd_threshold(cfg: &RunConfig, e_x_sq: &[f64], all_protocols: bool) -> Result<String, CliError> {
    let protocols: Vec<Protocol> = if all_protocols {
        Protocol::ALL.to_vec()
    } else {
        vec![cfg.protocol()?]
    };
    let values = if e_x_sq.is_empty() { vec![cfg.link.e_x_sq] } else { e_x_sq.to_vec() };
    if let Some(bad) = values.iter().find(|e| !(0.0..=0.5).contains(*e)) {
        return Err(CliError::Invalid(format!("e_x_sq: {bad} is not in [0, 0.5]")));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Failed(e.to_string());
    w.write_record(["protocol", "e_x_sq", "threshold"]).map_err(csv_err)?;
    for p in protocols {
        let spec = p.spec();
        for &e in &values {
            let t = match threshold_bit_error(&spec, e)? {
                Some(t) => t.to_string(),
                None => "none".into(),
            };
            w.write_record([p.as_str().to_string(), e.to_string(), t]).map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub const SWEEP_HEADER: [&str; 11] = [
    "length_km", "eta", "p_c", "p_sq", "p_mq", "p_dk", "omega0", "omega1", "e_x", "rate_old", "rate_new",
];

/// CSV of both bounds over the configured length grid. `rate_old` is the
/// GLLP-style rate and `rate_new` the dark-count-aware one.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<String, CliError> {
    let scn = cfg.scenario()?;
    let (lo, hi, step) = cfg.length_range()?;
    let rows = distance_sweep(&scn, lo, hi, step)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Failed(e.to_string());
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for r in rows {
        let b = &r.breakdown;
        let fields = [
            r.length_km, r.eta, b.p_c(), b.p_sq, b.p_mq, b.p_dk, b.omega0, b.omega1, b.e_x, r.rate_gllp, r.rate_improved,
        ];
        w.write_record(fields.iter().map(|&x| sig(x, CSV_DIGITS))).map_err(csv_err)?;
    }
    finish_csv(w)
}

fn estimate(e: &Estimate) -> String {
    format!("{} +/- {}", s4(e.value), s4(e.std_error))
}

/// Empirical-versus-analytic report. Sets `failed` if any |z| exceeds 3.
pub fn cmd_simulate(cfg: &RunConfig, tally: Option<&Path>) -> Result<Report, CliError> {
    let analytic_scn = cfg.scenario()?;
    let sim_scn = cfg.simulated_scenario()?;
    let eve = cfg.eve()?;
    let n = cfg.n_pulses()?;
    let seed = cfg.simulation.seed;
    let analytic = analytic_scn.breakdown()?;
    let stats = run_simulation(&sim_scn, eve, n, seed)?;
    if let Some(path) = tally {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::Invalid(format!("--tally {}: {e}", path.display())))?;
        stats
            .write_tally_csv(file)
            .map_err(|e| CliError::Failed(format!("--tally {}: {e}", path.display())))?;
    }
    let emp = empirical_breakdown(&stats);
    let checks = compare_with_analytic(&stats, &analytic);

    let mut out = String::new();
    push_row(&mut out, "protocol", analytic_scn.protocol.name());
    push_row(&mut out, "source", source_label(&analytic_scn.source));
    push_row(&mut out, "length_km", s4(analytic_scn.link.length_km));
    push_row(&mut out, "eve", &cfg.simulation.eve);
    push_row(&mut out, "pulses", n);
    push_row(&mut out, "seed", seed);
    push_row(&mut out, "dark_count_prob", s4(analytic_scn.detector.dark_count_prob));
    push_row(&mut out, "simulated_dark", s4(sim_scn.detector.dark_count_prob));
    out.push('\n');
    writeln!(out, "{:<12}{:<26}{}", "field", "empirical", "analytic").unwrap();
    let empirical = [
        ("p_c", emp.p_c),
        ("p_sq", emp.p_sq),
        ("p_mq", emp.p_mq),
        ("p_emp", emp.p_emp),
        ("p_dk", emp.p_dk),
        ("omega0", emp.omega0),
        ("omega1", emp.omega1),
        ("e_x", emp.e_x),
        ("e_x_sq", emp.e_x_sq),
        ("e_x_single", emp.e_x_single),
    ];
    for ((name, e), (_, a)) in empirical.iter().zip(breakdown_rows(&analytic)) {
        writeln!(out, "{:<12}{:<26}{}", name, estimate(e), s4(a)).unwrap();
    }
    out.push('\n');
    writeln!(out, "{:<12}{:<12}{:<12}{:<12}{}", "check", "empirical", "analytic", "std_error", "z").unwrap();
    for c in &checks {
        writeln!(
            out,
            "{:<12}{:<12}{:<12}{:<12}{}",
            c.field,
            s4(c.empirical),
            s4(c.analytic),
            s4(c.std_error),
            s4(c.z)
        )
        .unwrap();
    }
    if emp.insufficient_statistics {
        out.push_str("warning: insufficient statistics (an observed category has fewer than 100 events)\n");
    }
    let outliers: Vec<&str> = checks.iter().filter(|c| !c.within(Z_LIMIT)).map(|c| c.field).collect();
    let failed = if outliers.is_empty() {
        out.push_str("result: PASS\n");
        None
    } else {
        let msg = format!("|z| > 3 for {}", outliers.join(", "));
        writeln!(out, "result: FAIL ({msg})").unwrap();
        Some(msg)
    };
    Ok(Report { body: out, failed })
}

/// Decoy-state recovery of `p_sq` and `e_x_sq` at the signal intensity
/// `source.mean_photon_number`, which is added to the run list if absent.
pub fn cmd_decoy(cfg: &RunConfig) -> Result<String, CliError> {
    let protocol = cfg.protocol()?;
    if protocol == Protocol::Pbc00 {
        return Err(CliError::Invalid(
            "protocol.name: decoy recovery supports bb84 and six-state".into(),
        ));
    }
    let mu_bar = cfg.mean_photon_number()?;
    let mut mus = cfg.decoy_mu()?;
    if !mus.iter().any(|&m| m == mu_bar) {
        mus.insert(0, mu_bar);
    }
    let base = cfg.scenario_for_source(SourceModel::Poissonian {
        mean_photon_number: mu_bar,
    })?;
    let n = cfg.n_pulses()?;
    let seed = cfg.simulation.seed;
    let runs = simulate_decoy_run(&base, &mus, n, seed)?;
    let rec = recover_single_photon(&base, &runs)?;
    let truth = poisson_breakdown(&base)?;
    let signal = runs.iter().find(|r| r.mu == mu_bar).expect("signal run present");
    let cat1 = empirical_breakdown(&signal.stats).p_sq;

    let mut out = String::new();
    push_row(&mut out, "protocol", protocol.as_str());
    push_row(&mut out, "mu_bar", s4(mu_bar));
    push_row(
        &mut out,
        "decoy_mu",
        mus.iter().map(|&m| s4(m)).collect::<Vec<_>>().join(","),
    );
    push_row(&mut out, "length_km", s4(base.link.length_km));
    push_row(&mut out, "eta", s4(base.transmittance()));
    push_row(&mut out, "dark_count_prob", s4(base.detector.dark_count_prob));
    push_row(&mut out, "pulses_per_mu", n);
    push_row(&mut out, "seed", seed);
    out.push('\n');
    push_row(&mut out, "p_c_omega1", estimate(&rec.p_c_omega1));
    push_row(&mut out, "e_x_single", estimate(&rec.e_x_single));
    push_row(&mut out, "single_qubit_rate", estimate(&cat1));
    out.push('\n');
    writeln!(out, "{:<12}{:<26}{:<12}{}", "quantity", "recovered", "true", "z").unwrap();
    for (name, e, t) in [("p_sq", rec.p_sq, truth.p_sq), ("e_x_sq", rec.e_x_sq, base.e_x_sq)] {
        let z = if e.std_error > 0.0 { (e.value - t) / e.std_error } else { 0.0 };
        writeln!(out, "{:<12}{:<26}{:<12}{}", name, estimate(&e), s4(t), s4(z)).unwrap();
    }
    Ok(out)
}
