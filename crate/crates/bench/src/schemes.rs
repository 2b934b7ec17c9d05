//! The proposed pipeline and the comparison schemes, each reduced to the
//! effective gain `‖G‖_F²` it achieves on one channel draw.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use irshp::alamouti::{
    achievable_rate, cascaded_channel, effective_channel, optimal_precoder, PhaseConfig,
};
use irshp::hybrid::{run_second_subproblem, HybridSettings, PrecoderSet};
use irshp::joint::{
    extract_phases, extract_precoder, objective_y2, phase_coordinate_ascent, run_first_subproblem,
    LiftedVars, MmReport, MmSettings,
};
use irshp::linalg::frob_sq;
use irshp::{CMat, Channels, Error, Result, SeedStream, StreamId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SchemeId {
    ProposedHP,
    ProposedFD,
    UpperBoundHP,
    UpperBoundFD,
    NoBeamforming,
    AntennaSelection,
    RandomIRS,
    SDR,
}

impl SchemeId {
    pub const ALL: [SchemeId; 8] = [
        SchemeId::ProposedHP,
        SchemeId::ProposedFD,
        SchemeId::UpperBoundHP,
        SchemeId::UpperBoundFD,
        SchemeId::NoBeamforming,
        SchemeId::AntennaSelection,
        SchemeId::RandomIRS,
        SchemeId::SDR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::ProposedHP => "proposed-hp",
            SchemeId::ProposedFD => "proposed-fd",
            SchemeId::UpperBoundHP => "upper-bound-hp",
            SchemeId::UpperBoundFD => "upper-bound-fd",
            SchemeId::NoBeamforming => "no-beamforming",
            SchemeId::AntennaSelection => "antenna-selection",
            SchemeId::RandomIRS => "random-irs",
            SchemeId::SDR => "sdr",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchSettings {
    pub mm: MmSettings,
    pub hybrid: HybridSettings,
    /// Halve the rate (two slots per symbol pair).
    pub half_rate: bool,
}

/// Outcome of one scheme on one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub scheme: SchemeId,
    pub seed: u64,
    /// Objective after each outer iteration, where the scheme iterates.
    pub trace: Vec<f64>,
    /// `‖G‖_F²` of the returned variables (lifted objective for the bounds).
    pub gain: f64,
    pub rank1_residual: Option<f64>,
    pub rank2_residual: Option<f64>,
    /// `‖F − F_RF F_BB‖_F / ‖F‖_F` for hybrid schemes.
    pub decomposition_residual: Option<f64>,
    pub wall_time_s: f64,
}

impl SolveReport {
    /// `(P_t / 2σ²) ‖G‖_F²` with `P_t` the power after the reference loss.
    pub fn snr(&self, received_power: f64, sigma2: f64) -> f64 {
        received_power / (2.0 * sigma2) * self.gain
    }

    pub fn rate(&self, received_power: f64, sigma2: f64, half_rate: bool) -> f64 {
        achievable_rate(self.snr(received_power, sigma2), half_rate)
    }
}

/// Proposed design of one draw.
#[derive(Debug, Clone)]
pub struct ProposedFd {
    pub phases: PhaseConfig<f64>,
    pub f: CMat,
    pub vars: LiftedVars<f64>,
    pub report: MmReport,
}

/// Results shared between schemes of the same draw.
#[derive(Debug, Clone, Default)]
pub struct TrialCache {
    pub fd: Option<ProposedFd>,
    pub hybrid: Option<PrecoderSet<f64>>,
    pub relaxed: Option<(LiftedVars<f64>, MmReport)>,
}

/// Exact fully digital optimum for fixed phases.
pub fn fd_oracle_for_fixed_phases(
    ch: &Channels,
    phases: &PhaseConfig<f64>,
    pt: f64,
    sigma2: f64,
) -> Result<(CMat, f64)> {
    let (f, _) = optimal_precoder(ch, phases)?;
    let snr = irshp::alamouti::snr(&(cascaded_channel(ch, phases) * &f), pt, sigma2)?;
    Ok((f, snr))
}

fn gain(ch: &Channels, phases: &PhaseConfig<f64>, f: &CMat) -> Result<f64> {
    Ok(frob_sq(&effective_channel(ch, phases, f)?))
}

fn proposed_fd<'a>(
    ch: &Channels,
    settings: &BenchSettings,
    cache: &'a mut TrialCache,
) -> Result<&'a ProposedFd> {
    if cache.fd.is_none() {
        let (vars, report) = run_first_subproblem(ch, &settings.mm, None, false)?;
        let f = extract_precoder(&vars.w)?;
        let phases = extract_phases(&vars.q, ch, &f)?;
        cache.fd = Some(ProposedFd {
            phases,
            f,
            vars,
            report,
        });
    }
    Ok(cache.fd.as_ref().unwrap())
}

fn hybrid<'a>(
    ch: &Channels,
    n_rf: usize,
    settings: &BenchSettings,
    cache: &'a mut TrialCache,
) -> Result<(&'a ProposedFd, &'a PrecoderSet<f64>)> {
    if cache.hybrid.is_none() {
        let fd = proposed_fd(ch, settings, cache)?;
        let (set, _) = run_second_subproblem(&fd.f, n_rf, &settings.hybrid)?;
        cache.hybrid = Some(set);
    }
    Ok((cache.fd.as_ref().unwrap(), cache.hybrid.as_ref().unwrap()))
}

/// Relaxed run warm-started from the proposed lift, so its value never falls
/// below the proposed design.
fn relaxed<'a>(
    ch: &Channels,
    settings: &BenchSettings,
    cache: &'a mut TrialCache,
) -> Result<&'a (LiftedVars<f64>, MmReport)> {
    if cache.relaxed.is_none() {
        let fd = proposed_fd(ch, settings, cache)?;
        let start = LiftedVars::from_solution(&fd.phases, &fd.f);
        let mm = MmSettings {
            engine: settings.mm.engine,
            ..MmSettings::relaxed()
        };
        cache.relaxed = Some(run_first_subproblem(ch, &mm, Some(&start), false)?);
    }
    Ok(cache.relaxed.as_ref().unwrap())
}

fn mm_trace(r: &MmReport) -> Vec<f64> {
    r.trace.iter().map(|t| t.y2).collect()
}

/// `F = √2 [v1, 0]` restricted to the two antennas whose columns of
/// `H_I Φ H_B` are strongest.
fn selected_precoder(ch: &Channels, phases: &PhaseConfig<f64>) -> CMat {
    let h = cascaded_channel(ch, phases);
    let mut idx: Vec<usize> = (0..h.ncols()).collect();
    idx.sort_by(|&a, &b| {
        h.column(b)
            .norm_squared()
            .total_cmp(&h.column(a).norm_squared())
            .then(a.cmp(&b))
    });
    let keep = &idx[..2.min(idx.len())];
    let sub = CMat::from_fn(h.nrows(), keep.len(), |i, j| h[(i, keep[j])]);
    let e = irshp::linalg::HermitianEigen::new(&(sub.adjoint() * &sub));
    let mut f = CMat::zeros(h.ncols(), 2);
    for (j, &col) in keep.iter().enumerate() {
        f[(col, 0)] = e.vectors[(j, 0)] * std::f64::consts::SQRT_2;
    }
    f
}

/// Runs `scheme` on one draw. `n_rf` is the RF chain count for hybrid
/// schemes; `seeds` are the trial streams (random phases come from their own
/// stream).
pub fn run_scheme(
    scheme: SchemeId,
    ch: &Channels,
    n_rf: usize,
    seeds: &SeedStream,
    settings: &BenchSettings,
    cache: &mut TrialCache,
) -> Result<SolveReport> {
    let start = Instant::now();
    let mut out = SolveReport {
        scheme,
        seed: seeds.master(),
        trace: Vec::new(),
        gain: 0.0,
        rank1_residual: None,
        rank2_residual: None,
        decomposition_residual: None,
        wall_time_s: 0.0,
    };
    match scheme {
        SchemeId::ProposedFD => {
            let fd = proposed_fd(ch, settings, cache)?;
            out.gain = gain(ch, &fd.phases, &fd.f)?;
            out.trace = mm_trace(&fd.report);
            out.rank1_residual = Some(fd.report.rank1_residual);
            out.rank2_residual = Some(fd.report.rank2_residual);
        }
        SchemeId::ProposedHP => {
            let (fd, set) = hybrid(ch, n_rf, settings, cache)?;
            out.gain = gain(ch, &fd.phases, &set.product())?;
            out.trace = mm_trace(&fd.report);
            out.rank1_residual = Some(fd.report.rank1_residual);
            out.rank2_residual = Some(fd.report.rank2_residual);
            out.decomposition_residual = Some(set.relative_residual());
        }
        SchemeId::UpperBoundFD => {
            let (_, rep) = relaxed(ch, settings, cache)?;
            out.gain = rep.objective;
            out.trace = mm_trace(rep);
            out.rank1_residual = Some(rep.rank1_residual);
            out.rank2_residual = Some(rep.rank2_residual);
        }
        SchemeId::UpperBoundHP => {
            hybrid(ch, n_rf, settings, cache)?;
            relaxed(ch, settings, cache)?;
            let set = cache.hybrid.as_ref().unwrap();
            let (vars, rep) = cache.relaxed.as_ref().unwrap();
            let p = set.product();
            out.gain = objective_y2(&vars.q, &(&p * p.adjoint()), ch)?;
            out.trace = mm_trace(rep);
            out.rank1_residual = Some(rep.rank1_residual);
            out.decomposition_residual = Some(set.relative_residual());
        }
        SchemeId::SDR => {
            let (vars, rep) = relaxed(ch, settings, cache)?;
            let f = extract_precoder(&vars.w)?;
            let phases = extract_phases(&vars.q, ch, &f)?;
            out.gain = gain(ch, &phases, &f)?;
            out.trace = mm_trace(rep);
            out.rank1_residual = Some(rep.rank1_residual);
            out.rank2_residual = Some(rep.rank2_residual);
        }
        SchemeId::NoBeamforming => {
            let mut f = CMat::zeros(ch.m(), 2);
            f[(0, 0)] = 1.0.into();
            f[(1.min(ch.m() - 1), 1)] = 1.0.into();
            let fd_phases = proposed_fd(ch, settings, cache)?.phases.clone();
            let mut best = (f64::NEG_INFINITY, None);
            for p0 in [PhaseConfig::ones(ch.r1(), ch.r2()), fd_phases] {
                let p = phase_coordinate_ascent(ch, &f, &p0, 200)?;
                let g = gain(ch, &p, &f)?;
                if g > best.0 {
                    best = (g, Some(p));
                }
            }
            out.gain = best.0;
        }
        SchemeId::AntennaSelection => {
            let mut phases = proposed_fd(ch, settings, cache)?.phases.clone();
            let mut f = selected_precoder(ch, &phases);
            let mut g = gain(ch, &phases, &f)?;
            out.trace.push(g);
            for _ in 0..20 {
                let p = phase_coordinate_ascent(ch, &f, &phases, 1)?;
                let f_new = selected_precoder(ch, &p);
                let g_new = gain(ch, &p, &f_new)?;
                if !(g_new > g * (1.0 + 1e-9)) {
                    break;
                }
                phases = p;
                f = f_new;
                g = g_new;
                out.trace.push(g);
            }
            out.gain = g;
        }
        SchemeId::RandomIRS => {
            let mut rng = seeds.rng(StreamId::RandomPhases);
            let phases = PhaseConfig::random(ch.r1(), ch.r2(), &mut rng);
            let (f, _) = optimal_precoder(ch, &phases)?;
            out.gain = gain(ch, &phases, &f)?;
        }
    }
    out.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}
