//! Second subproblem: factor a fully digital precoder `F` into a unit-modulus
//! analog part `F_RF` and a digital part `F_BB` by alternating minimization
//! of `‖F − F_RF F_BB‖_F`.

use nalgebra::Complex;

use crate::convex::{solve, Affine, ConvexProblem, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{expect_dims, frob, frob_sq, hermitian_part, re_trace_product};
use crate::scalar::{cabs, cis, ComplexMat, Real};

/// Condition number of `F_RF^H F_RF` beyond which the digital update refuses.
pub const MAX_CONDITION: f64 = 1e10;
/// Coordinate coefficients below this magnitude leave the entry unchanged.
pub const COORD_TOL: f64 = 1e-14;
/// Relative residual treated as an exact fit; below it the AO iterates only
/// move by rounding noise.
pub const EXACT_FIT: f64 = 1e-10;

/// `F`, its hybrid factors and the power normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet<T: Real> {
    /// `M x 2` fully digital target.
    pub f: ComplexMat<T>,
    /// `M x N_RF`, unit-modulus entries.
    pub f_rf: ComplexMat<T>,
    /// `N_RF x 2`, normalized.
    pub f_bb: ComplexMat<T>,
    pub beta: T,
}

impl<T: Real> PrecoderSet<T> {
    /// `F_RF F_BB`.
    pub fn product(&self) -> ComplexMat<T> {
        &self.f_rf * &self.f_bb
    }

    /// `‖F − F_RF F_BB‖_F / ‖F‖_F`.
    pub fn relative_residual(&self) -> T {
        frob(&(&self.f - self.product())) / frob(&self.f)
    }
}

/// `F̃_BB = (F_RF^H F_RF)^{-1} F_RF^H F`.
pub fn digital_update<T: Real>(f_rf: &ComplexMat<T>, f: &ComplexMat<T>) -> Result<ComplexMat<T>> {
    expect_dims(f, f_rf.nrows(), f.ncols(), "F rows vs F_RF rows")?;
    let gram = hermitian_part(&(f_rf.adjoint() * f_rf));
    let e = crate::linalg::HermitianEigen::new(&gram);
    let n = e.values.len();
    if n == 0 {
        return Err(Error::RankDeficient(f64::INFINITY));
    }
    let (hi, lo) = (e.values[0], e.values[n - 1]);
    let cond = if lo > T::zero() {
        (hi / lo).as_f64()
    } else {
        f64::INFINITY
    };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient(cond));
    }
    let inv = e.reconstruct_with(|l| T::one() / l);
    Ok(inv * f_rf.adjoint() * f)
}

/// `β = sqrt(2 / Tr(F̃_BB^H F_RF^H F_RF F̃_BB))` and `F_BB = β F̃_BB`.
pub fn normalize_beta<T: Real>(
    f_rf: &ComplexMat<T>,
    f_bb_unnorm: &ComplexMat<T>,
) -> Result<(T, ComplexMat<T>)> {
    let p = frob_sq(&(f_rf * f_bb_unnorm));
    if !(p > T::zero()) {
        return Err(Error::ZeroPower);
    }
    let beta = (T::lit(2.0) / p).sqrt();
    Ok((beta, f_bb_unnorm.scale(beta)))
}

/// `Tr(F_RF D F_RF^H − F_RF F̃_BB F^H − F F̃_BB^H F_RF^H)` with
/// `D = F̃_BB F̃_BB^H`; equals `‖F − F_RF F̃_BB‖² − ‖F‖²`.
pub fn analog_objective<T: Real>(
    f_rf: &ComplexMat<T>,
    f_bb_unnorm: &ComplexMat<T>,
    f: &ComplexMat<T>,
) -> T {
    let p = f_rf * f_bb_unnorm;
    frob_sq(&p) - T::lit(2.0) * re_trace_product(&p, &f.adjoint())
}

/// One row-major sweep of exact per-entry minimization of the analog
/// objective: entry `x` sees `2 Re(x conj(c)) + const` with
/// `c = (F_RF D − F F̃_BB^H)_{mn} − x D_nn`, minimized by `x = −c/|c|`.
pub fn analog_coordinate_update<T: Real>(
    f_rf: &ComplexMat<T>,
    f_bb_unnorm: &ComplexMat<T>,
    f: &ComplexMat<T>,
) -> Result<ComplexMat<T>> {
    expect_dims(f_bb_unnorm, f_rf.ncols(), f.ncols(), "F_BB vs F_RF and F")?;
    let d = f_bb_unnorm * f_bb_unnorm.adjoint();
    let p = f * f_bb_unnorm.adjoint();
    let mut x = f_rf.clone();
    let mut xd = &x * &d;
    let (m, n_rf) = (x.nrows(), x.ncols());
    let tol = T::lit(COORD_TOL);
    for row in 0..m {
        for col in 0..n_rf {
            let old = x[(row, col)];
            let c = xd[(row, col)] - p[(row, col)] - old * d[(col, col)];
            let mag = cabs(c);
            if !(mag >= tol) {
                continue;
            }
            let new = -c.unscale(mag);
            let delta = new - old;
            for k in 0..n_rf {
                xd[(row, k)] += delta * d[(col, k)];
            }
            x[(row, col)] = new;
        }
    }
    Ok(x)
}

/// Lifted analog problem: `M_mat` over `[q | r]` blocks of sizes `N_RF` and `M`.
#[derive(Debug, Clone)]
pub struct LiftedAnalog<T: Real> {
    pub m_mat: ComplexMat<T>,
    pub n_rf: usize,
    pub m: usize,
}

/// `M_mat = [[F̃_BB F̃_BB^H, −F̃_BB F^H/√M], [−F F̃_BB^H/√M, 0]]`.
pub fn build_lift<T: Real>(
    f_bb_unnorm: &ComplexMat<T>,
    f: &ComplexMat<T>,
    m: usize,
) -> Result<LiftedAnalog<T>> {
    expect_dims(f, m, f_bb_unnorm.ncols(), "F vs F_BB columns")?;
    let n_rf = f_bb_unnorm.nrows();
    let k = -T::one() / T::from_usize(m).unwrap().sqrt();
    let mut mm = ComplexMat::zeros(n_rf + m, n_rf + m);
    mm.view_mut((0, 0), (n_rf, n_rf))
        .copy_from(&(f_bb_unnorm * f_bb_unnorm.adjoint()));
    let off = (f_bb_unnorm * f.adjoint()).scale(k);
    mm.view_mut((0, n_rf), (n_rf, m)).copy_from(&off);
    mm.view_mut((n_rf, 0), (m, n_rf)).copy_from(&off.adjoint());
    Ok(LiftedAnalog { m_mat: mm, n_rf, m })
}

impl<T: Real> LiftedAnalog<T> {
    /// `X = F̃ F̃^H` with `F̃ = [F̄^H; I_M]`, `F̄ = F_RF/√M`.
    pub fn lift_x(&self, f_rf: &ComplexMat<T>) -> Result<ComplexMat<T>> {
        expect_dims(f_rf, self.m, self.n_rf, "F_RF vs lift")?;
        let bar = f_rf.unscale(T::from_usize(self.m).unwrap().sqrt());
        let mut ft = ComplexMat::zeros(self.n_rf + self.m, self.m);
        ft.view_mut((0, 0), (self.n_rf, self.m)).copy_from(&bar.adjoint());
        ft.view_mut((self.n_rf, 0), (self.m, self.m))
            .copy_from(&ComplexMat::identity(self.m, self.m));
        Ok(&ft * ft.adjoint())
    }

    /// `Re Tr(M_mat X)`.
    pub fn value(&self, x: &ComplexMat<T>) -> T {
        re_trace_product(&self.m_mat, x)
    }

    /// Unit-modulus analog precoder read from the `X_{r,q}` block.
    pub fn read_analog(&self, x: &ComplexMat<T>) -> ComplexMat<T> {
        let block = x.view((self.n_rf, 0), (self.m, self.n_rf));
        block.map(|z| {
            let r = cabs(z);
            if r > T::zero() {
                z.unscale(r)
            } else {
                Complex::new(T::one(), T::zero())
            }
        })
    }
}

/// Convex relaxation of the lifted analog problem: minimize `Tr(M_mat X)` over
/// `X ⪰ 0`, unit diagonal, `X_{r,r} = I`. The analog precoder is read from
/// the off-diagonal block and projected to unit modulus.
pub fn solve_sdr_analog<T: Real>(
    lift: &LiftedAnalog<T>,
    settings: &SolverSettings,
) -> Result<(ComplexMat<T>, SolveStatus)> {
    let prob = ConvexProblem::linear(
        -lift.m_mat.clone(),
        Affine::UnitDiagonalIdentityBlock {
            start: lift.n_rf,
            len: lift.m,
        },
    )?;
    let sol = solve(&prob, None, None, settings)?;
    Ok((lift.read_analog(&sol.x), sol.status))
}

/// How the analog precoder is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalogInit {
    /// Phases of the columns of `F`; DFT columns where `F` has none.
    Phases,
    /// Convex relaxation of the lifted problem built from the phase init.
    Sdr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridSettings {
    pub max_iters: usize,
    /// Relative change of the residual that stops the alternation.
    pub tol: f64,
    pub init: AnalogInit,
    pub engine: SolverSettings,
}

impl Default for HybridSettings {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-5,
            init: AnalogInit::Phases,
            engine: SolverSettings::default(),
        }
    }
}

/// Decomposition diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridReport {
    pub iterations: usize,
    /// `‖F − F_RF F̃_BB‖/‖F‖` after each digital update (before normalization).
    pub residual_trace: Vec<f64>,
    /// `‖F − F_RF F_BB‖/‖F‖` after normalization.
    pub residual: f64,
    pub beta: f64,
    /// `max |1 − |[F_RF]_{mn}||`.
    pub unit_modulus_violation: f64,
    /// Iteration budget exhausted before the residual settled.
    pub stagnated: bool,
    /// The relaxation failed and the phase init was used instead.
    pub sdr_fallback: bool,
}

impl HybridReport {
    pub fn csv_header() -> &'static str {
        "iterations,residual,beta,unit_modulus_violation,stagnated"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{}",
            self.iterations, self.residual, self.beta, self.unit_modulus_violation, self.stagnated
        )
    }
}

fn dft_column<T: Real>(m: usize, k: usize) -> Vec<Complex<T>> {
    (0..m)
        .map(|i| {
            let theta = std::f64::consts::TAU * ((i * k) % m) as f64 / m as f64;
            cis(T::lit(theta))
        })
        .collect()
}

/// Default analog start: phases of each nonzero column of `F`, then DFT
/// columns; falls back to a pure DFT matrix if that start is ill-conditioned.
pub fn initial_analog<T: Real>(f: &ComplexMat<T>, n_rf: usize) -> ComplexMat<T> {
    let m = f.nrows();
    let mut out = ComplexMat::zeros(m, n_rf);
    let mut next_dft = 1;
    for col in 0..n_rf {
        let src = (col < f.ncols())
            .then(|| f.column(col))
            .filter(|c| c.iter().all(|z| cabs(*z) > T::lit(1e-12) * frob(f)));
        match src {
            Some(c) => {
                for i in 0..m {
                    out[(i, col)] = c[i].unscale(cabs(c[i]));
                }
            }
            None => {
                let d = dft_column(m, next_dft);
                next_dft += 1;
                for i in 0..m {
                    out[(i, col)] = d[i];
                }
            }
        }
    }
    if digital_update(&out, f).is_err() {
        for col in 0..n_rf {
            let d = dft_column(m, col);
            for i in 0..m {
                out[(i, col)] = d[i];
            }
        }
    }
    out
}

fn max_modulus_error<T: Real>(a: &ComplexMat<T>) -> T {
    a.iter()
        .map(|z| (cabs(*z) - T::one()).abs_val())
        .fold(T::zero(), |x, y| x.max(y))
}

/// Alternates digital updates with analog coordinate sweeps, normalizing once
/// at the end.
pub fn run_second_subproblem<T: Real>(
    f: &ComplexMat<T>,
    n_rf: usize,
    settings: &HybridSettings,
) -> Result<(PrecoderSet<T>, HybridReport)> {
    let m = f.nrows();
    if n_rf == 0 || n_rf > m {
        return Err(Error::InvalidConfig(vec![format!(
            "N_RF must lie in 1..={m} (got {n_rf})"
        )]));
    }
    let fnorm = frob(f);
    if !(fnorm > T::zero()) {
        return Err(Error::ZeroPower);
    }
    let mut f_rf = initial_analog(f, n_rf);
    let mut sdr_fallback = false;
    if settings.init == AnalogInit::Sdr {
        let bb = digital_update(&f_rf, f)?;
        let lift = build_lift(&bb, f, m)?;
        match solve_sdr_analog(&lift, &settings.engine) {
            Ok((cand, _)) if digital_update(&cand, f).is_ok() => f_rf = cand,
            _ => sdr_fallback = true,
        }
    }
    let mut trace = Vec::new();
    let mut bb = digital_update(&f_rf, f)?;
    let mut stagnated = true;
    for _ in 0..settings.max_iters {
        let res = frob(&(f - &f_rf * &bb)) / fnorm;
        let prev = trace.last().copied();
        trace.push(res.as_f64());
        if let Some(p) = prev {
            let change = (p - res.as_f64()).abs() / p.max(f64::MIN_POSITIVE);
            if change < settings.tol || res.as_f64() <= EXACT_FIT {
                stagnated = false;
                break;
            }
        } else if res.as_f64() <= EXACT_FIT {
            stagnated = false;
            break;
        }
        f_rf = analog_coordinate_update(&f_rf, &bb, f)?;
        bb = digital_update(&f_rf, f)?;
    }
    let (beta, f_bb) = normalize_beta(&f_rf, &bb)?;
    let set = PrecoderSet {
        f: f.clone(),
        f_rf,
        f_bb,
        beta,
    };
    let report = HybridReport {
        iterations: trace.len(),
        residual: set.relative_residual().as_f64(),
        residual_trace: trace,
        beta: beta.as_f64(),
        unit_modulus_violation: max_modulus_error(&set.f_rf).as_f64(),
        stagnated,
        sdr_fallback,
    };
    Ok((set, report))
}
