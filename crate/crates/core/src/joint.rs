//! First subproblem: joint phase-shift and fully digital precoder design via
//! the lifted variables `Q` (phases) and `W = F F^H` (precoder), solved by
//! majorization-minimization with difference-of-convex rank penalties.
//!
//! Lift convention: `diag(x)^H H̃ diag(x) = H̃ ⊙ conj(x x^H)`, so a phase
//! vector `φ` lifts to `Q = conj(φ) conj(φ)^H`.

use std::io::Write;

use nalgebra::{Complex, DMatrix};

use crate::alamouti::{effective_channel, PhaseConfig};
use crate::channel::ChannelSet;
use crate::convex::{solve, Affine, ConvexProblem, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{
    expect_dims, frob, frob_sq, hermitian_part, outer, re_trace, re_trace_product, unit_phases,
    HermitianEigen,
};
use crate::scalar::{cabs, ComplexMat, Real};

/// Relaxed phase and precoder matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVars<T: Real> {
    /// `2R x 2R`, PSD, unit diagonal.
    pub q: ComplexMat<T>,
    /// `M x M`, PSD, trace 2.
    pub w: ComplexMat<T>,
}

impl<T: Real> LiftedVars<T> {
    /// Default starting point: all-ones phases and isotropic precoder.
    pub fn initial(total_elements: usize, m: usize) -> Self {
        let one = Complex::new(T::one(), T::zero());
        Self {
            q: ComplexMat::from_element(total_elements, total_elements, one),
            w: ComplexMat::identity(m, m).scale(T::lit(2.0) / T::from_usize(m).unwrap()),
        }
    }

    /// Rank-one/rank-two lift of a concrete `(φ, F)`.
    pub fn from_solution(phases: &PhaseConfig<T>, f: &ComplexMat<T>) -> Self {
        let x = phases.phi().map(|z| z.conj());
        Self {
            q: outer(&x),
            w: hermitian_part(&(f * f.adjoint())),
        }
    }
}

/// `H̃ ⊙ Q`.
pub fn lift_a<T: Real>(q: &ComplexMat<T>, hi_tilde: &ComplexMat<T>) -> Result<ComplexMat<T>> {
    expect_dims(q, hi_tilde.nrows(), hi_tilde.ncols(), "Q vs H_I^H H_I")?;
    Ok(q.component_mul(hi_tilde))
}

/// `H_B W H_B^H`.
pub fn lift_b<T: Real>(w: &ComplexMat<T>, hb: &ComplexMat<T>) -> Result<ComplexMat<T>> {
    expect_dims(w, hb.ncols(), hb.ncols(), "W vs H_B")?;
    Ok(hermitian_part(&(hb * w * hb.adjoint())))
}

/// `Tr((H̃ ⊙ Q)(H_B W H_B^H))`, which equals `‖G‖_F²` on rank-one/two lifts.
pub fn objective_y2<T: Real>(q: &ComplexMat<T>, w: &ComplexMat<T>, ch: &ChannelSet<T>) -> Result<T> {
    let a = lift_a(q, &ch.hi_tilde)?;
    let b = lift_b(w, &ch.hb)?;
    Ok(re_trace_product(&a, &b))
}

/// `Tr(AB) = −½‖A‖² − ½‖B‖² + ½‖A+B‖²` for Hermitian `A`, `B`.
pub fn ia_split<T: Real>(a: &ComplexMat<T>, b: &ComplexMat<T>) -> Result<(T, T, T)> {
    crate::linalg::check_hermitian(a)?;
    crate::linalg::check_hermitian(b)?;
    expect_dims(b, a.nrows(), a.ncols(), "IA split operands")?;
    let half = T::lit(0.5);
    Ok((-half * frob_sq(a), -half * frob_sq(b), half * frob_sq(&(a + b))))
}

/// `S1(Q, W) = ½‖H̃⊙Q + H_B W H_B^H‖²`.
pub fn s1<T: Real>(q: &ComplexMat<T>, w: &ComplexMat<T>, ch: &ChannelSet<T>) -> Result<T> {
    let a = lift_a(q, &ch.hi_tilde)?;
    let b = lift_b(w, &ch.hb)?;
    Ok(T::lit(0.5) * frob_sq(&(a + b)))
}

/// First-order expansion of `S1` at `(Q_i, W_i)`:
/// `S̃1(Q, W) = S1(Q_i, W_i) + Re Tr(𝒜 (Q − Q_i)) + Re Tr(ℬ (W − W_i))`
/// with `𝒜 = (A_i + B_i) ⊙ conj(H̃)` and `ℬ = H_B^H (A_i + B_i) H_B`.
#[derive(Debug, Clone)]
pub struct Surrogate<T: Real> {
    pub script_a: ComplexMat<T>,
    pub script_b: ComplexMat<T>,
    pub constant: T,
    qi: ComplexMat<T>,
    wi: ComplexMat<T>,
}

impl<T: Real> Surrogate<T> {
    pub fn value(&self, q: &ComplexMat<T>, w: &ComplexMat<T>) -> T {
        self.constant
            + re_trace_product(&self.script_a, &(q - &self.qi))
            + re_trace_product(&self.script_b, &(w - &self.wi))
    }

    /// Linear part only: `Re Tr(𝒜 ΔQ) + Re Tr(ℬ ΔW)`.
    pub fn directional(&self, dq: &ComplexMat<T>, dw: &ComplexMat<T>) -> T {
        re_trace_product(&self.script_a, dq) + re_trace_product(&self.script_b, dw)
    }
}

pub fn mm_surrogate<T: Real>(
    qi: &ComplexMat<T>,
    wi: &ComplexMat<T>,
    ch: &ChannelSet<T>,
) -> Result<Surrogate<T>> {
    let sum = lift_a(qi, &ch.hi_tilde)? + lift_b(wi, &ch.hb)?;
    let script_a = hermitian_part(&sum.component_mul(&ch.hi_tilde.map(|z| z.conj())));
    let script_b = hermitian_part(&(ch.hb.adjoint() * &sum * &ch.hb));
    Ok(Surrogate {
        script_a,
        script_b,
        constant: T::lit(0.5) * frob_sq(&sum),
        qi: qi.clone(),
        wi: wi.clone(),
    })
}

/// `Tr(Q) − ‖Q_i‖₂ − Re Tr(u u^H (Q − Q_i))`, `u` the top eigenvector of `Q_i`.
pub fn penalty_g1<T: Real>(q: &ComplexMat<T>, qi: &ComplexMat<T>) -> T {
    let e = HermitianEigen::new(qi);
    let u = e.top_vector();
    let uu = outer(&u);
    re_trace(q) - e.values[0] - re_trace_product(&uu, &(q - qi))
}

/// `Tr(W) − (λ1 + λ2)(W_i) − Σ_j Re Tr(u_j u_j^H (W − W_i))` over the top two
/// eigenvectors of `W_i`.
pub fn penalty_g2<T: Real>(w: &ComplexMat<T>, wi: &ComplexMat<T>) -> T {
    let e = HermitianEigen::new(wi);
    let k = 2.min(wi.nrows());
    let proj = top_projector(&e, k);
    re_trace(w) - e.top_sum(k) - re_trace_product(&proj, &(w - wi))
}

fn top_projector<T: Real>(e: &HermitianEigen<T>, k: usize) -> ComplexMat<T> {
    let v = e.vectors.columns(0, k);
    v * v.adjoint()
}

/// `Tr(Q) − λ_max(Q)`.
pub fn dc_penalty_rank1<T: Real>(q: &ComplexMat<T>) -> T {
    re_trace(q) - HermitianEigen::new(q).values[0]
}

/// `Tr(W) − (λ1 + λ2)(W)`.
pub fn dc_penalty_rank2<T: Real>(w: &ComplexMat<T>) -> T {
    re_trace(w) - HermitianEigen::new(w).top_sum(2)
}

/// `(Tr(Q) − λ_max)/Tr(Q)`.
pub fn rank1_residual<T: Real>(q: &ComplexMat<T>) -> T {
    (dc_penalty_rank1(q) / re_trace(q)).max(T::zero())
}

/// `(Tr(W) − λ1 − λ2)/Tr(W)`.
pub fn rank2_residual<T: Real>(w: &ComplexMat<T>) -> T {
    (dc_penalty_rank2(w) / re_trace(w)).max(T::zero())
}

/// Starting point of the outer loop when none is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmInit {
    /// `Q = 1 1^H`, `W = (2/M) I`.
    Ones,
    /// Lift of an alternating ascent on `(φ, F)`: optimal precoder for the
    /// current phases, then coordinate ascent on the phases.
    Alternating,
}

/// How the rank constraints are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMode {
    /// DC penalties with an increasing weight.
    Penalized,
    /// Rank constraints dropped (penalty weight identically zero).
    Relaxed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmSettings {
    pub max_outer: usize,
    /// Relative change of the true objective for convergence.
    pub objective_tol: f64,
    /// Relative rank residual each lifted matrix must reach.
    pub rank_tol: f64,
    /// Penalty share of the surrogate at the first iteration.
    pub initial_penalty_ratio: f64,
    /// Factor applied to `1/η` while the rank target is missed.
    pub penalty_growth: f64,
    pub mode: RankMode,
    pub init: MmInit,
    /// Rescale the channels so both lifted terms start at unit norm.
    pub balance: bool,
    pub engine: SolverSettings,
}

impl Default for MmSettings {
    fn default() -> Self {
        Self {
            max_outer: 50,
            objective_tol: 1e-4,
            rank_tol: 1e-3,
            initial_penalty_ratio: 0.1,
            penalty_growth: 2.0,
            mode: RankMode::Penalized,
            init: MmInit::Alternating,
            balance: true,
            // inner solves may stop early: the engine keeps its start when
            // that is better, so each outer step still cannot lose ground
            engine: SolverSettings {
                max_iters: 300,
                ..SolverSettings::default()
            },
        }
    }
}

impl MmSettings {
    pub fn relaxed() -> Self {
        Self {
            mode: RankMode::Relaxed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.max_outer == 0 {
            bad.push("max_outer must be >= 1".to_string());
        }
        if !(self.objective_tol > 0.0) || !(self.rank_tol > 0.0) {
            bad.push("MM tolerances must be > 0".to_string());
        }
        if !(self.initial_penalty_ratio > 0.0) {
            bad.push("initial_penalty_ratio must be > 0".to_string());
        }
        if !(self.penalty_growth >= 1.0) {
            bad.push("penalty_growth must be >= 1".to_string());
        }
        if let Err(Error::InvalidConfig(v)) = self.engine.validate() {
            bad.extend(v);
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

/// Channels rescaled for conditioning: `H̃ ← a H̃`, `H_B ← b H_B`, so the
/// objective scales by `a b²`.
#[derive(Debug, Clone)]
struct Scaled<T: Real> {
    ch: ChannelSet<T>,
    factor: T,
    q_weights: DMatrix<T>,
    g_vectors: ComplexMat<T>,
    w_weights: DMatrix<T>,
}

impl<T: Real> Scaled<T> {
    fn new(ch: &ChannelSet<T>, start: &LiftedVars<T>, balance: bool) -> Result<Self> {
        let (a, b) = if balance {
            let na = frob(&lift_a(&start.q, &ch.hi_tilde)?);
            let nb = frob(&lift_b(&start.w, &ch.hb)?);
            if !(na > T::zero()) || !(nb > T::zero()) {
                return Err(Error::DegenerateChannel(na.min(nb).as_f64()));
            }
            (T::one() / na, (T::one() / nb).sqrt())
        } else {
            (T::one(), T::one())
        };
        let mut s = ch.clone();
        s.hi_tilde = ch.hi_tilde.scale(a);
        s.hb = ch.hb.scale(b);
        let q_weights = s.hi_tilde.map(|z| z.norm_sqr());
        let g = HermitianEigen::new(&(s.hb.adjoint() * &s.hb));
        let lam: Vec<T> = g.values.iter().map(|&l| l.max(T::zero())).collect();
        let m = lam.len();
        let w_weights = DMatrix::from_fn(m, m, |i, j| lam[i] * lam[j]);
        Ok(Self {
            ch: s,
            factor: a * b * b,
            q_weights,
            g_vectors: g.vectors,
            w_weights,
        })
    }
}

/// Snapshot of the outer loop.
#[derive(Debug, Clone)]
pub struct MmState<T: Real> {
    pub iteration: usize,
    pub vars: LiftedVars<T>,
    /// Penalty weight `1/η` in the rescaled units used by the solver.
    pub inv_eta: T,
}

/// One row of the outer-loop trace, in original channel units.
#[derive(Debug, Clone, PartialEq)]
pub struct MmIterate {
    pub iteration: usize,
    /// True objective `𝒴2` at the new iterate.
    pub y2: f64,
    /// Surrogate `𝒴̃2` (without penalties) at the new iterate.
    pub surrogate: f64,
    pub g1: f64,
    pub g2: f64,
    /// Penalty weight `1/η` used for this iteration.
    pub inv_eta: f64,
    /// `𝒴2 − (1/η)(DC penalties)` at the previous iterate.
    pub penalized_before: f64,
    /// Same quantity at the new iterate, same `η`.
    pub penalized_after: f64,
    pub rank1_residual: f64,
    pub rank2_residual: f64,
    pub violation_q: f64,
    pub violation_w: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

#[derive(Debug, Clone)]
pub struct MmReport {
    pub trace: Vec<MmIterate>,
    pub converged: bool,
    /// Outer iterations executed.
    pub iterations: usize,
    /// Final true objective.
    pub objective: f64,
    pub rank1_residual: f64,
    pub rank2_residual: f64,
    /// Objective scale applied internally (`a b²`).
    pub scale: f64,
}

/// One concave P5 solve at the state's expansion point. `fixed_w` skips the
/// precoder block.
pub fn solve_p5_iteration<T: Real>(
    state: &MmState<T>,
    ch: &ChannelSet<T>,
    settings: &MmSettings,
    fixed_w: bool,
) -> Result<(MmState<T>, MmIterate)> {
    let scaled = Scaled::new(ch, &LiftedVars::initial(ch.total_elements(), ch.m()), settings.balance)?;
    p5_step(state, &scaled, settings, fixed_w)
}

fn p5_step<T: Real>(
    state: &MmState<T>,
    sc: &Scaled<T>,
    settings: &MmSettings,
    fixed_w: bool,
) -> Result<(MmState<T>, MmIterate)> {
    let (qi, wi) = (&state.vars.q, &state.vars.w);
    let zeta = state.inv_eta;
    let sur = mm_surrogate(qi, wi, &sc.ch)?;

    let eq = HermitianEigen::new(qi);
    let uq = outer(&eq.top_vector());
    let cq = &sur.script_a + uq.scale(zeta);
    let pq = ConvexProblem::new(cq, sc.q_weights.clone(), Affine::UnitDiagonal)?;
    let sq = solve(&pq, Some(qi), None, &settings.engine)?;

    let (w_new, w_iters, w_conv) = if fixed_w {
        (wi.clone(), 0, true)
    } else {
        let ew = HermitianEigen::new(wi);
        let pw = top_projector(&ew, 2.min(wi.nrows()));
        let cw = &sur.script_b + pw.scale(zeta);
        let v = &sc.g_vectors;
        let cw_rot = hermitian_part(&(v.adjoint() * cw * v));
        let wi_rot = hermitian_part(&(v.adjoint() * wi * v));
        let prob = ConvexProblem::new(cw_rot, sc.w_weights.clone(), Affine::Trace(T::lit(2.0)))?;
        let sw = solve(&prob, Some(&wi_rot), None, &settings.engine)?;
        (
            hermitian_part(&(v * &sw.x * v.adjoint())),
            sw.iterations,
            sw.status == SolveStatus::Converged,
        )
    };
    let q_new = sq.x;

    let f = sc.factor;
    let y2_new = re_trace_product(&lift_a(&q_new, &sc.ch.hi_tilde)?, &lift_b(&w_new, &sc.ch.hb)?);
    let y2_old = re_trace_product(&lift_a(qi, &sc.ch.hi_tilde)?, &lift_b(wi, &sc.ch.hb)?);
    let half = T::lit(0.5);
    let y2_tilde = -half * frob_sq(&lift_a(&q_new, &sc.ch.hi_tilde)?)
        - half * frob_sq(&lift_b(&w_new, &sc.ch.hb)?)
        + sur.value(&q_new, &w_new);
    let pen = |q: &ComplexMat<T>, w: &ComplexMat<T>| dc_penalty_rank1(q) + dc_penalty_rank2(w);
    let before = (y2_old - zeta * pen(qi, wi)) / f;
    let after = (y2_new - zeta * pen(&q_new, &w_new)) / f;
    let row = MmIterate {
        iteration: state.iteration + 1,
        y2: (y2_new / f).as_f64(),
        surrogate: (y2_tilde / f).as_f64(),
        g1: penalty_g1(&q_new, qi).as_f64(),
        g2: penalty_g2(&w_new, wi).as_f64(),
        inv_eta: (zeta / f).as_f64(),
        penalized_before: before.as_f64(),
        penalized_after: after.as_f64(),
        rank1_residual: rank1_residual(&q_new).as_f64(),
        rank2_residual: rank2_residual(&w_new).as_f64(),
        violation_q: Affine::UnitDiagonal.violation(&q_new).as_f64(),
        violation_w: Affine::Trace(T::lit(2.0)).violation(&w_new).as_f64(),
        inner_iterations: sq.iterations + w_iters,
        inner_converged: sq.status == SolveStatus::Converged && w_conv,
    };
    let next = MmState {
        iteration: state.iteration + 1,
        vars: LiftedVars { q: q_new, w: w_new },
        inv_eta: zeta,
    };
    Ok((next, row))
}

/// Runs the MM outer loop from `start` (default: [`LiftedVars::initial`]).
/// With `fixed_w` the precoder block stays at `start.w`.
pub fn run_first_subproblem<T: Real>(
    ch: &ChannelSet<T>,
    settings: &MmSettings,
    start: Option<&LiftedVars<T>>,
    fixed_w: bool,
) -> Result<(LiftedVars<T>, MmReport)> {
    settings.validate()?;
    let n = ch.total_elements();
    let m = ch.m();
    let init = match start {
        Some(s) => {
            expect_dims(&s.q, n, n, "initial Q")?;
            expect_dims(&s.w, m, m, "initial W")?;
            s.clone()
        }
        None => match settings.init {
            MmInit::Ones => LiftedVars::initial(n, m),
            MmInit::Alternating => {
                let (p, f) = alternating_start(ch, 100, 1e-10)?;
                let mut v = LiftedVars::from_solution(&p, &f);
                if fixed_w {
                    v.w = LiftedVars::initial(n, m).w;
                }
                v
            }
        },
    };
    let sc = Scaled::new(ch, &init, settings.balance)?;
    let rank_ok = |v: &LiftedVars<T>| {
        rank1_residual(&v.q).as_f64() < settings.rank_tol
            && (fixed_w || rank2_residual(&v.w).as_f64() < settings.rank_tol)
    };
    let zeta0 = match settings.mode {
        RankMode::Relaxed => T::zero(),
        RankMode::Penalized => {
            let y = re_trace_product(&lift_a(&init.q, &sc.ch.hi_tilde)?, &lift_b(&init.w, &sc.ch.hb)?);
            let p = dc_penalty_rank1(&init.q) + if fixed_w { T::zero() } else { dc_penalty_rank2(&init.w) };
            let denom = if p > T::lit(1e-12) {
                p
            } else {
                T::from_usize(n + 2).unwrap()
            };
            T::lit(settings.initial_penalty_ratio) * y.abs_val().max(T::lit(1e-12)) / denom
        }
    };
    let mut state = MmState {
        iteration: 0,
        vars: init,
        inv_eta: zeta0,
    };
    let mut trace = Vec::new();
    let mut converged = false;
    let mut prev = re_trace_product(
        &lift_a(&state.vars.q, &sc.ch.hi_tilde)?,
        &lift_b(&state.vars.w, &sc.ch.hb)?,
    ) / sc.factor;
    let penalized = settings.mode == RankMode::Penalized;
    let mut best = (penalized && rank_ok(&state.vars)).then(|| (prev, state.vars.clone()));
    for _ in 0..settings.max_outer {
        let (next, row) = p5_step(&state, &sc, settings, fixed_w)?;
        let y = T::lit(row.y2);
        let rel = (y - prev).abs_val() / y.abs_val().max(T::lit(1e-300));
        prev = y;
        trace.push(row);
        state = next;
        if penalized && rank_ok(&state.vars) && !best.as_ref().is_some_and(|(b, _)| y <= *b) {
            best = Some((y, state.vars.clone()));
        }
        let ranks = settings.mode == RankMode::Relaxed || rank_ok(&state.vars);
        if rel.as_f64() < settings.objective_tol && ranks {
            converged = true;
            break;
        }
        if !ranks {
            state.inv_eta *= T::lit(settings.penalty_growth);
        }
    }
    // the penalty may be raised mid-run, so the last rank-exact iterate is not
    // always the best one seen
    let vars = match best {
        Some((b, v)) if !rank_ok(&state.vars) || b > prev => v,
        _ => state.vars,
    };
    let report = MmReport {
        iterations: trace.len(),
        converged,
        objective: objective_y2(&vars.q, &vars.w, ch)?.as_f64(),
        rank1_residual: rank1_residual(&vars.q).as_f64(),
        rank2_residual: rank2_residual(&vars.w).as_f64(),
        scale: sc.factor.as_f64(),
        trace,
    };
    Ok((vars, report))
}

/// Coordinate ascent on `φ^H R φ`, `R = H̃ ⊙ (H_B F F^H H_B^H)^T`, which is
/// `‖G‖_F²` for fixed `F`. Each coordinate takes its exact maximizer.
pub fn phase_coordinate_ascent<T: Real>(
    ch: &ChannelSet<T>,
    f: &ComplexMat<T>,
    phases: &PhaseConfig<T>,
    sweeps: usize,
) -> Result<PhaseConfig<T>> {
    expect_dims(f, ch.m(), 2, "precoder must be M x 2")?;
    let n = ch.total_elements();
    let hf = &ch.hb * f;
    let b = &hf * hf.adjoint();
    let r = ComplexMat::from_fn(n, n, |i, j| ch.hi_tilde[(i, j)] * b[(j, i)]);
    let mut phi = phases.phi().clone();
    let mut acc = &r * &phi;
    for _ in 0..sweeps {
        let mut moved = false;
        for i in 0..n {
            let s = acc[i] - r[(i, i)] * phi[i];
            let mag = cabs(s);
            if !(mag > T::zero()) {
                continue;
            }
            let new = s.unscale(mag);
            let delta = new - phi[i];
            if cabs(delta) > T::tol(1e-15) {
                moved = true;
                for k in 0..n {
                    acc[k] += r[(k, i)] * delta;
                }
                phi[i] = new;
            }
        }
        if !moved {
            break;
        }
    }
    PhaseConfig::new(unit_phases(&phi), phases.r1())
}

/// Alternates [`crate::alamouti::optimal_precoder`] with one phase sweep,
/// starting from all-ones phases, until `‖G‖_F²` improves by less than `tol`
/// (relative) or `max_iters` rounds.
pub fn alternating_start<T: Real>(
    ch: &ChannelSet<T>,
    max_iters: usize,
    tol: f64,
) -> Result<(PhaseConfig<T>, ComplexMat<T>)> {
    let mut p = PhaseConfig::ones(ch.r1(), ch.r2());
    let (mut f, mut g) = crate::alamouti::optimal_precoder(ch, &p)?;
    for _ in 0..max_iters {
        let p_new = phase_coordinate_ascent(ch, &f, &p, 1)?;
        let (f_new, g_new) = crate::alamouti::optimal_precoder(ch, &p_new)?;
        let gain = (g_new - g) / g.max(T::lit(1e-300));
        if g_new >= g {
            p = p_new;
            f = f_new;
            g = g_new;
        }
        if !(gain.as_f64() > tol) {
            break;
        }
    }
    Ok((p, f))
}

/// Phases from the top eigenvector `u` of `Q`: the better of `u/|u|` and its
/// conjugate under `F`, judged by `‖G‖_F²`.
pub fn extract_phases<T: Real>(
    q: &ComplexMat<T>,
    ch: &ChannelSet<T>,
    f: &ComplexMat<T>,
) -> Result<PhaseConfig<T>> {
    let u = HermitianEigen::new(q).top_vector();
    let direct = PhaseConfig::new(unit_phases(&u), ch.r1())?;
    let conj = PhaseConfig::new(direct.phi().map(|z| z.conj()), ch.r1())?;
    let ga = frob_sq(&effective_channel(ch, &direct, f)?);
    let gb = frob_sq(&effective_channel(ch, &conj, f)?);
    Ok(if gb > ga { conj } else { direct })
}

/// `F = [√λ1 u1, √λ2 u2]` rescaled to `‖F‖_F² = 2`.
pub fn extract_precoder<T: Real>(w: &ComplexMat<T>) -> Result<ComplexMat<T>> {
    if !w.is_square() || w.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            context: "extract_precoder",
            expected: "square, non-empty".into(),
            actual: crate::error::dims(w.nrows(), w.ncols()),
        });
    }
    let e = HermitianEigen::new(w);
    let m = w.nrows();
    let mut f = ComplexMat::zeros(m, 2);
    for j in 0..2.min(m) {
        let s = e.values[j].max(T::zero()).sqrt();
        f.set_column(j, &e.vectors.column(j).scale(s));
    }
    let p = frob_sq(&f);
    if !(p > T::zero()) {
        return Err(Error::ZeroPower);
    }
    Ok(f.scale((T::lit(2.0) / p).sqrt()))
}

/// Writes the outer-loop trace as CSV.
pub fn write_trace_csv<W: Write>(out: &mut W, report: &MmReport) -> std::io::Result<()> {
    writeln!(
        out,
        "iteration,y2,surrogate,g1,g2,inv_eta,penalized_before,penalized_after,rank1_residual,rank2_residual,violation_q,violation_w,inner_iterations,inner_converged"
    )?;
    for r in &report.trace {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            r.iteration,
            r.y2,
            r.surrogate,
            r.g1,
            r.g2,
            r.inv_eta,
            r.penalized_before,
            r.penalized_after,
            r.rank1_residual,
            r.rank2_residual,
            r.violation_q,
            r.violation_w,
            r.inner_iterations,
            r.inner_converged
        )?;
    }
    Ok(())
}

/// Maximum entrywise deviation of `|φ_r|` from one.
pub fn unit_modulus_violation<T: Real>(phi: &crate::scalar::ComplexVec<T>) -> T {
    phi.iter()
        .map(|z| (cabs(*z) - T::one()).abs_val())
        .fold(T::zero(), |a, b| a.max(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_psd;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn ia_split_identity_example() {
        let i2 = ComplexMat::<f64>::identity(2, 2);
        let (a, b, s) = ia_split(&i2, &i2).unwrap();
        assert_eq!((a, b, s), (-1.0, -1.0, 4.0));
        assert_eq!(a + b + s, 2.0);
    }

    #[test]
    fn ones_mask_and_identity_channel() {
        let h = ComplexMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(3.0, 0.0)]);
        let ones = ComplexMat::from_element(2, 2, c(1.0, 0.0));
        assert_eq!(lift_a(&ones, &h).unwrap(), h);
        let q = ComplexMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.3, 0.2), c(0.3, -0.2), c(1.0, 0.0)]);
        assert_eq!(lift_a(&q, &ComplexMat::identity(2, 2)).unwrap(), ComplexMat::identity(2, 2));
    }

    #[test]
    fn penalty_examples() {
        let i2 = ComplexMat::<f64>::identity(2, 2);
        assert!((penalty_g1(&i2, &i2) - 1.0).abs() < 1e-14);
        let w = ComplexMat::<f64>::identity(3, 3).scale(2.0 / 3.0);
        assert!((penalty_g2(&w, &w) - 2.0 / 3.0).abs() < 1e-14);
        let x = nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)]);
        let q = outer(&x);
        assert!(penalty_g1(&q, &q).abs() < 1e-12);
    }

    #[test]
    fn extract_precoder_rank_one() {
        let u = nalgebra::DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let w = outer(&u).scale(2.0);
        let f = extract_precoder(&w).unwrap();
        assert!((frob_sq(&f) - 2.0).abs() < 1e-14);
        assert!(f.column(1).norm() < 1e-7);
        assert!(frob(&(&f * f.adjoint() - w)) < 1e-8);
    }

    #[test]
    fn initial_point_is_feasible() {
        let v = LiftedVars::<f64>::initial(6, 4);
        assert!(is_psd(&v.q) && is_psd(&v.w));
        assert!((re_trace(&v.w) - 2.0).abs() < 1e-15);
        assert!(rank1_residual(&v.q).abs() < 1e-12);
    }
}
