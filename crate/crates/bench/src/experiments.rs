//! Monte-Carlo sweeps over paired channel draws, the mismatch study, the
//! convergence trace and the exhaustive tiny-instance check.

use std::collections::BTreeMap;
use std::io::{self, Write};

use irshp::alamouti::{achievable_rate, cascaded_channel, mismatched_sinr, optimal_precoder, snr, PhaseConfig};
use irshp::channel::{generate_channels, LinkLosses};
use irshp::joint::{run_first_subproblem, MmInit, MmReport, MmSettings};
use irshp::{Channels, Result, SeedStream, StreamId, SystemConfig};

use crate::scenario::{draw_trial, LinkBudget, Scenario};
use crate::schemes::{run_scheme, BenchSettings, SchemeId, SolveReport, TrialCache};

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: String,
    pub scheme: SchemeId,
    pub snr_db: f64,
    pub mean_rate: f64,
    pub stderr: f64,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub scenario: String,
    pub scheme: SchemeId,
    pub trial: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// `(scenario, trial, report)` for every successful run.
    pub reports: Vec<(String, u64, SolveReport)>,
    pub failures: Vec<Failure>,
}

impl SweepResult {
    pub fn row(&self, scenario: &str, scheme: SchemeId, snr_db: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.scheme == scheme && r.snr_db == snr_db)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "scenario,scheme,snr_db,mean_rate,stderr,trials,failures")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.scenario, r.scheme, r.snr_db, r.mean_rate, r.stderr, r.trials, r.failures
            )?;
        }
        Ok(())
    }

    /// Gnuplot-friendly layout: one line per SNR, one mean-rate column per
    /// `scenario:scheme` pair.
    pub fn write_wide_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let mut cols: Vec<(&str, SchemeId)> = Vec::new();
        let mut snrs: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !cols.contains(&(r.scenario.as_str(), r.scheme)) {
                cols.push((r.scenario.as_str(), r.scheme));
            }
            if !snrs.contains(&r.snr_db) {
                snrs.push(r.snr_db);
            }
        }
        snrs.sort_by(f64::total_cmp);
        write!(out, "snr_db")?;
        for (sc, s) in &cols {
            write!(out, ",{sc}:{s}")?;
        }
        writeln!(out)?;
        for snr in snrs {
            write!(out, "{snr}")?;
            for (sc, s) in &cols {
                match self.row(sc, *s, snr) {
                    Some(r) => write!(out, ",{}", r.mean_rate)?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// One line per run: gains, residuals and the objective trace
    /// (`;`-separated).
    pub fn write_trials_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(
            out,
            "scenario,scheme,trial,seed,gain,rank1_residual,rank2_residual,decomposition_residual,trace"
        )?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for (sc, t, r) in &self.reports {
            let trace: Vec<String> = r.trace.iter().map(|v| v.to_string()).collect();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                sc,
                r.scheme,
                t,
                r.seed,
                r.gain,
                opt(r.rank1_residual),
                opt(r.rank2_residual),
                opt(r.decomposition_residual),
                trace.join(";")
            )?;
        }
        for f in &self.failures {
            writeln!(out, "{},{},{},,,,,,error: {}", f.scenario, f.scheme, f.trial, f.message.replace(',', ";"))?;
        }
        Ok(())
    }
}

/// Rate of every `(scenario, scheme, SNR)` cell over `n_trials` paired draws.
/// Trial `t` of every scenario and scheme uses the stream
/// `SeedStream::new(master).trial(t)`.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    base: &SystemConfig,
    scenarios: &[Scenario],
    schemes: &[SchemeId],
    snr_grid_db: &[f64],
    n_trials: u64,
    master: u64,
    settings: &BenchSettings,
) -> Result<SweepResult> {
    let budget = LinkBudget::new(base);
    let root = SeedStream::new(master);
    let mut out = SweepResult::default();
    let mut gains: BTreeMap<(String, SchemeId), Vec<f64>> = BTreeMap::new();
    let mut fails: BTreeMap<(String, SchemeId), usize> = BTreeMap::new();
    for sc in scenarios {
        for t in 0..n_trials {
            let seeds = root.trial(t);
            let (cfg, ch) = draw_trial(base, sc, &seeds)?;
            let mut cache = TrialCache::default();
            for &s in schemes {
                match run_scheme(s, &ch, cfg.n_rf, &seeds, settings, &mut cache) {
                    Ok(r) => {
                        gains.entry((sc.name.clone(), s)).or_default().push(r.gain);
                        out.reports.push((sc.name.clone(), t, r));
                    }
                    Err(e) => {
                        *fails.entry((sc.name.clone(), s)).or_default() += 1;
                        out.failures.push(Failure {
                            scenario: sc.name.clone(),
                            scheme: s,
                            trial: t,
                            message: e.to_string(),
                        });
                    }
                }
            }
        }
    }
    let p = budget.received_power();
    for sc in scenarios {
        for &s in schemes {
            let key = (sc.name.clone(), s);
            let g = gains.get(&key).cloned().unwrap_or_default();
            for &snr_db in snr_grid_db {
                let sigma2 = budget.sigma2_for(snr_db);
                let rates: Vec<f64> = g
                    .iter()
                    .map(|x| achievable_rate(p / (2.0 * sigma2) * x, settings.half_rate))
                    .collect();
                let (mean_rate, stderr) = mean_stderr(&rates);
                out.rows.push(SweepRow {
                    scenario: sc.name.clone(),
                    scheme: s,
                    snr_db,
                    mean_rate,
                    stderr,
                    trials: rates.len(),
                    failures: fails.get(&key).copied().unwrap_or(0),
                });
            }
        }
    }
    out.rows.sort_by(|a, b| {
        (a.scenario.as_str(), a.scheme)
            .cmp(&(b.scenario.as_str(), b.scheme))
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyRow {
    pub alpha: f64,
    pub snr_db: f64,
    pub mean_rate: f64,
    pub stderr: f64,
    pub trials: usize,
}

pub fn write_uncertainty_csv<W: Write>(rows: &[UncertaintyRow], out: &mut W) -> io::Result<()> {
    writeln!(out, "alpha,snr_db,mean_rate,stderr,trials")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.alpha, r.snr_db, r.mean_rate, r.stderr, r.trials)?;
    }
    Ok(())
}

/// Designs the hybrid system on the nominal channels of each draw, then
/// evaluates it on `H + α E` with `E` one fixed CN(0,1) draw per trial, so
/// the curves for different `α` are paired. The combiner keeps the nominal
/// effective channel; the rate is the mean over both symbols.
#[allow(clippy::too_many_arguments)]
pub fn uncertainty_sweep(
    base: &SystemConfig,
    scenario: &Scenario,
    alphas: &[f64],
    snr_grid_db: &[f64],
    n_trials: u64,
    master: u64,
    settings: &BenchSettings,
) -> Result<Vec<UncertaintyRow>> {
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(irshp::Error::InvalidConfig(vec![format!("alpha must be >= 0 (got {a})")]));
    }
    let budget = LinkBudget::new(base);
    let p = budget.received_power();
    let root = SeedStream::new(master);
    let mut rates = vec![vec![Vec::new(); snr_grid_db.len()]; alphas.len()];
    for t in 0..n_trials {
        let seeds = root.trial(t);
        let (cfg, ch) = draw_trial(base, scenario, &seeds)?;
        let mut cache = TrialCache::default();
        run_scheme(SchemeId::ProposedHP, &ch, cfg.n_rf, &seeds, settings, &mut cache)?;
        let phases = &cache.fd.as_ref().unwrap().phases;
        let f = cache.hybrid.as_ref().unwrap().product();
        let g_nom = cascaded_channel(&ch, phases) * &f;
        for (ai, &alpha) in alphas.iter().enumerate() {
            let g_true = if alpha == 0.0 {
                None
            } else {
                let pert = ch.perturb(alpha, &mut seeds.rng(StreamId::Perturbation))?;
                Some(cascaded_channel(&pert, phases) * &f)
            };
            for (si, &snr_db) in snr_grid_db.iter().enumerate() {
                let sigma2 = budget.sigma2_for(snr_db);
                let r = match &g_true {
                    None => achievable_rate(snr(&g_nom, p, sigma2)?, settings.half_rate),
                    Some(g) => {
                        let (s1, s2) = mismatched_sinr(&g_nom, g, p, sigma2)?;
                        0.5 * (achievable_rate(s1, settings.half_rate)
                            + achievable_rate(s2, settings.half_rate))
                    }
                };
                rates[ai][si].push(r);
            }
        }
    }
    let mut rows = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        for (si, &snr_db) in snr_grid_db.iter().enumerate() {
            let (mean_rate, stderr) = mean_stderr(&rates[ai][si]);
            rows.push(UncertaintyRow {
                alpha,
                snr_db,
                mean_rate,
                stderr,
                trials: rates[ai][si].len(),
            });
        }
    }
    Ok(rows)
}

/// Outer-loop trace of the first subproblem on one draw.
pub fn convergence(
    base: &SystemConfig,
    scenario: &Scenario,
    trial: u64,
    master: u64,
    init: MmInit,
    mm: &MmSettings,
) -> Result<MmReport> {
    let seeds = SeedStream::new(master).trial(trial);
    let (_, ch) = draw_trial(base, scenario, &seeds)?;
    let settings = MmSettings {
        init,
        ..mm.clone()
    };
    Ok(run_first_subproblem(&ch, &settings, None, false)?.1)
}

/// Best `‖G‖_F²` over every phase vector with entries on the `levels`-point
/// grid, each paired with its optimal precoder. Returns the gain and phases.
pub fn small_instance_oracle(ch: &Channels, levels: usize) -> Result<(f64, PhaseConfig<f64>)> {
    let n = ch.total_elements();
    if n > 4 || levels == 0 {
        return Err(irshp::Error::Unsupported(format!(
            "exhaustive search needs at most 4 elements (got {n})"
        )));
    }
    let step = std::f64::consts::TAU / levels as f64;
    let total = levels.pow(n as u32);
    let mut best = (f64::NEG_INFINITY, PhaseConfig::ones(ch.r1(), ch.r2()));
    for code in 0..total {
        let mut c = code;
        let theta: Vec<f64> = (0..n)
            .map(|_| {
                let k = c % levels;
                c /= levels;
                k as f64 * step
            })
            .collect();
        let p = PhaseConfig::from_angles(&theta, ch.r1())?;
        let (_, g) = optimal_precoder(ch, &p)?;
        if g > best.0 {
            best = (g, p);
        }
    }
    Ok(best)
}

/// The tiny configuration used for exhaustive checks: `M = 2`, one element
/// per surface.
pub fn tiny_config() -> SystemConfig {
    SystemConfig {
        m: 2,
        n_rf: 2,
        r1: 1,
        r2: 1,
        ..SystemConfig::table1()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub trial: u64,
    pub oracle_gain: f64,
    pub pipeline_gain: f64,
}

impl OracleRow {
    pub fn ratio(&self) -> f64 {
        self.pipeline_gain / self.oracle_gain
    }
}

pub fn write_oracle_csv<W: Write>(rows: &[OracleRow], threshold: f64, out: &mut W) -> io::Result<()> {
    writeln!(out, "trial,oracle_gain,pipeline_gain,ratio,pass")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.trial,
            r.oracle_gain,
            r.pipeline_gain,
            r.ratio(),
            r.ratio() >= threshold
        )?;
    }
    Ok(())
}

/// Pipeline (proposed, fully digital) against the 16-level exhaustive oracle
/// on `n_trials` tiny draws.
pub fn oracle_check(
    cfg: &SystemConfig,
    levels: usize,
    n_trials: u64,
    master: u64,
    settings: &BenchSettings,
) -> Result<Vec<OracleRow>> {
    let cfg = cfg.clone().validate()?;
    let root = SeedStream::new(master);
    let mut rows = Vec::new();
    for t in 0..n_trials {
        let seeds = root.trial(t);
        let ch: Channels = generate_channels(&cfg, &LinkLosses::uniform(0.0, 0.0), &seeds)?;
        let (oracle_gain, _) = small_instance_oracle(&ch, levels)?;
        let mut cache = TrialCache::default();
        let r = run_scheme(SchemeId::ProposedFD, &ch, cfg.n_rf, &seeds, settings, &mut cache)?;
        rows.push(OracleRow {
            trial: t,
            oracle_gain,
            pipeline_gain: r.gain,
        });
    }
    Ok(rows)
}
