use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use irshp::joint::{write_trace_csv, MmInit};
use irshp::SystemConfig;
use irshp_bench::experiments::{
    convergence, oracle_check, sweep, tiny_config, uncertainty_sweep, write_oracle_csv,
    write_uncertainty_csv,
};
use irshp_bench::schemes::{run_scheme, BenchSettings, SchemeId, TrialCache};
use irshp_bench::scenario::{draw_trial, LinkBudget, Scenario};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "irshp", version, about = "Double-IRS Alamouti hybrid precoding experiments")]
struct Cli {
    #[command(flatten)]
    system: SystemArgs,
    #[command(subcommand)]
    command: Command,
}

/// Overrides on top of Table 1 (or the `[system]` table of `--config`).
#[derive(Args)]
struct SystemArgs {
    /// TOML file with a `[system]` table and optional `[[scenario]]` entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    n_rf: Option<usize>,
    #[arg(long, global = true)]
    r1: Option<usize>,
    #[arg(long, global = true)]
    r2: Option<usize>,
    #[arg(long, global = true)]
    pt_dbm: Option<f64>,
    #[arg(long, global = true)]
    sigma2: Option<f64>,
    #[arg(long, global = true)]
    gt_dbi: Option<f64>,
    #[arg(long, global = true)]
    l_b: Option<usize>,
    #[arg(long, global = true)]
    l_i: Option<usize>,
    #[arg(long, global = true)]
    d_hb: Option<f64>,
    #[arg(long, global = true)]
    d_hi: Option<f64>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One draw, one or more schemes.
    Run {
        #[arg(long, default_value = "first")]
        scenario: String,
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Reference SNR in dB; the configured noise power is used when absent.
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Mean rate against SNR over paired draws.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "first")]
        scenarios: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0,5,10,15,20")]
        snr_db: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        trials: u64,
        /// Per-run CSV (gains, residuals, objective traces).
        #[arg(long)]
        trials_out: Option<PathBuf>,
        /// One column per scenario and scheme instead of one row per cell.
        #[arg(long)]
        wide: bool,
    },
    /// Rate of the nominal design on perturbed channels.
    Uncertainty {
        #[arg(long, default_value = "first")]
        scenario: String,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,1")]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,5,10,15,20,25")]
        snr_db: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        trials: u64,
    },
    /// Outer-loop trace of the first subproblem.
    Convergence {
        #[arg(long, default_value = "first")]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long, value_enum, default_value_t = InitArg::Ones)]
        init: InitArg,
        #[arg(long, default_value_t = 50)]
        max_outer: usize,
    },
    /// Tiny instances against exhaustive 16-level phase search.
    Oracle {
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 16)]
        levels: usize,
        #[arg(long, default_value_t = 0.95)]
        threshold: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Ones,
    Alternating,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    system: Option<SystemConfig>,
    scenario: Vec<Scenario>,
}

struct Setup {
    cfg: SystemConfig,
    scenarios: Vec<Scenario>,
    seed: u64,
}

impl Setup {
    fn scenario(&self, name: &str) -> irshp::Result<Scenario> {
        if let Some(s) = self.scenarios.iter().find(|s| s.name == name) {
            return Ok(s.clone());
        }
        if name == "config" {
            return Scenario::from_config(&self.cfg);
        }
        Scenario::preset(name)
    }
}

fn setup(a: &SystemArgs) -> Result<Setup, String> {
    let file: FileConfig = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            toml::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => FileConfig::default(),
    };
    let mut cfg = file.system.unwrap_or_else(SystemConfig::table1);
    macro_rules! over {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { cfg.$f = v; })* };
    }
    over!(m, n_rf, r1, r2, pt_dbm, sigma2, gt_dbi, l_b, l_i, d_hb, d_hi, seed);
    let cfg = cfg.validate().map_err(|e| e.to_string())?;
    Ok(Setup {
        seed: cfg.seed,
        cfg,
        scenarios: file.scenario,
    })
}

fn parse_schemes(names: &[String]) -> irshp::Result<Vec<SchemeId>> {
    if names.is_empty() {
        return Ok(SchemeId::ALL.to_vec());
    }
    names.iter().map(|s| s.parse()).collect()
}

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cli: Cli) -> Result<bool, String> {
    let s = setup(&cli.system)?;
    let settings = BenchSettings::default();
    let err = |e: irshp::Error| e.to_string();
    let io_err = |e: io::Error| e.to_string();
    let mut out = sink(&cli.system.out).map_err(io_err)?;
    let mut complete = true;
    match cli.command {
        Command::Run {
            scenario,
            schemes,
            trial,
            snr_db,
        } => {
            let sc = s.scenario(&scenario).map_err(err)?;
            let schemes = parse_schemes(&schemes).map_err(err)?;
            let seeds = irshp::SeedStream::new(s.seed).trial(trial);
            let (cfg, ch) = draw_trial(&s.cfg, &sc, &seeds).map_err(err)?;
            let budget = LinkBudget::new(&s.cfg);
            let sigma2 = snr_db.map_or(cfg.sigma2, |x| budget.sigma2_for(x));
            let p = budget.received_power();
            let mut cache = TrialCache::default();
            writeln!(out, "scenario,scheme,trial,gain,snr,rate,rank1_residual,rank2_residual,decomposition_residual")
                .map_err(io_err)?;
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            for scheme in schemes {
                match run_scheme(scheme, &ch, cfg.n_rf, &seeds, &settings, &mut cache) {
                    Ok(r) => writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        sc.name,
                        scheme,
                        trial,
                        r.gain,
                        r.snr(p, sigma2),
                        r.rate(p, sigma2, settings.half_rate),
                        opt(r.rank1_residual),
                        opt(r.rank2_residual),
                        opt(r.decomposition_residual)
                    )
                    .map_err(io_err)?,
                    Err(e) => {
                        complete = false;
                        eprintln!("{scheme}: {e}");
                    }
                }
            }
        }
        Command::Sweep {
            scenarios,
            schemes,
            snr_db,
            trials,
            trials_out,
            wide,
        } => {
            if trials == 0 {
                return Err("--trials must be >= 1".into());
            }
            let scs = scenarios
                .iter()
                .map(|n| s.scenario(n))
                .collect::<irshp::Result<Vec<_>>>()
                .map_err(err)?;
            let schemes = parse_schemes(&schemes).map_err(err)?;
            let res = sweep(&s.cfg, &scs, &schemes, &snr_db, trials, s.seed, &settings).map_err(err)?;
            if wide {
                res.write_wide_csv(&mut out).map_err(io_err)?;
            } else {
                res.write_csv(&mut out).map_err(io_err)?;
            }
            if let Some(p) = trials_out {
                let mut f = sink(&Some(p)).map_err(io_err)?;
                res.write_trials_csv(&mut f).map_err(io_err)?;
            }
            for f in &res.failures {
                eprintln!("{} {} trial {}: {}", f.scenario, f.scheme, f.trial, f.message);
            }
            complete = res.failures.is_empty();
        }
        Command::Uncertainty {
            scenario,
            alphas,
            snr_db,
            trials,
        } => {
            let sc = s.scenario(&scenario).map_err(err)?;
            let rows =
                uncertainty_sweep(&s.cfg, &sc, &alphas, &snr_db, trials, s.seed, &settings).map_err(err)?;
            write_uncertainty_csv(&rows, &mut out).map_err(io_err)?;
        }
        Command::Convergence {
            scenario,
            trial,
            init,
            max_outer,
        } => {
            let sc = s.scenario(&scenario).map_err(err)?;
            let init = match init {
                InitArg::Ones => MmInit::Ones,
                InitArg::Alternating => MmInit::Alternating,
            };
            let mm = irshp::joint::MmSettings {
                max_outer,
                ..settings.mm.clone()
            };
            let rep = convergence(&s.cfg, &sc, trial, s.seed, init, &mm).map_err(err)?;
            write_trace_csv(&mut out, &rep).map_err(io_err)?;
            eprintln!(
                "{} outer iterations, converged: {}, objective {}",
                rep.iterations, rep.converged, rep.objective
            );
        }
        Command::Oracle {
            trials,
            levels,
            threshold,
        } => {
            let rows = oracle_check(&tiny_config(), levels, trials, s.seed, &settings).map_err(err)?;
            write_oracle_csv(&rows, threshold, &mut out).map_err(io_err)?;
            let pass = rows.iter().filter(|r| r.ratio() >= threshold).count();
            eprintln!("{pass}/{} trials within {threshold} of the oracle", rows.len());
        }
    }
    out.flush().map_err(io_err)?;
    Ok(complete)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
