//! Dense convex machinery for the lifted subproblems: PSD and affine
//! projections, Dykstra's alternating projections, and an ADMM solver for
//!
//! ```text
//! maximize   <C, X> − ½ Σ_ij w_ij |X_ij|²
//! subject to X ⪰ 0,  X ∈ affine set
//! ```
//!
//! with `<A, B> = Re Σ conj(A_ij) B_ij`, `C` Hermitian and `w` symmetric
//! nonnegative. Quadratics of the form `‖G^{1/2} X G^{1/2}‖²` reduce to
//! this shape after rotating into the eigenbasis of `G`.

use nalgebra::{Complex, DMatrix};

use crate::error::{dims, Error, Result};
use crate::linalg::{check_hermitian, frob, hermitian_part, inner, HermitianEigen};
use crate::scalar::{ComplexMat, Real};

/// Affine part of the feasible set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Affine<T: Real> {
    /// `X_ii = 1` for all `i`.
    UnitDiagonal,
    /// `Tr(X) = t`.
    Trace(T),
    /// `X_ii = 1` and the principal block `[start, start + len)` equals `I`.
    UnitDiagonalIdentityBlock { start: usize, len: usize },
}

impl<T: Real> Affine<T> {
    fn check(&self, n: usize) -> Result<()> {
        match *self {
            Affine::UnitDiagonal => Ok(()),
            Affine::Trace(t) => {
                if t >= T::zero() && t.is_finite() && (n > 0 || t == T::zero()) {
                    Ok(())
                } else {
                    Err(Error::Infeasible(format!(
                        "trace {} incompatible with the PSD cone",
                        t.as_f64()
                    )))
                }
            }
            Affine::UnitDiagonalIdentityBlock { start, len } => {
                if start + len <= n {
                    Ok(())
                } else {
                    Err(Error::Infeasible(format!(
                        "identity block [{start}, {}) exceeds dimension {n}",
                        start + len
                    )))
                }
            }
        }
    }

    fn in_block(&self, i: usize, j: usize) -> bool {
        match *self {
            Affine::UnitDiagonalIdentityBlock { start, len } => {
                (start..start + len).contains(&i) && (start..start + len).contains(&j)
            }
            _ => false,
        }
    }

    /// Frobenius distance from `x` to the affine set.
    pub fn violation(&self, x: &ComplexMat<T>) -> T {
        let n = x.nrows();
        let one = Complex::new(T::one(), T::zero());
        match *self {
            Affine::UnitDiagonal => (0..n)
                .map(|i| (x[(i, i)] - one).norm_sqr())
                .fold(T::zero(), |a, b| a + b)
                .sqrt(),
            Affine::Trace(t) => {
                let d = x.trace().re - t;
                d.abs_val() / T::from_usize(n.max(1)).unwrap().sqrt()
            }
            Affine::UnitDiagonalIdentityBlock { .. } => {
                let mut acc = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            acc += (x[(i, i)] - one).norm_sqr();
                        } else if self.in_block(i, j) {
                            acc += x[(i, j)].norm_sqr();
                        }
                    }
                }
                acc.sqrt()
            }
        }
    }
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped.
pub fn project_psd<T: Real>(a: &ComplexMat<T>) -> Result<ComplexMat<T>> {
    check_hermitian(a)?;
    Ok(psd_clip(a))
}

fn psd_clip<T: Real>(a: &ComplexMat<T>) -> ComplexMat<T> {
    let e = HermitianEigen::new(a);
    if e.values.iter().all(|&l| l >= T::zero()) {
        return hermitian_part(a);
    }
    hermitian_part(&e.reconstruct_with(|l| l.max(T::zero())))
}

/// Exact Frobenius projection onto the affine set.
pub fn project_affine<T: Real>(a: &ComplexMat<T>, set: Affine<T>) -> Result<ComplexMat<T>> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "affine projection",
            expected: "square".into(),
            actual: dims(a.nrows(), a.ncols()),
        });
    }
    set.check(n)?;
    let mut out = a.clone();
    match set {
        Affine::UnitDiagonal => {
            for i in 0..n {
                out[(i, i)] = Complex::new(T::one(), T::zero());
            }
        }
        Affine::Trace(t) => {
            if n > 0 {
                let shift = (t - a.trace().re) / T::from_usize(n).unwrap();
                for i in 0..n {
                    out[(i, i)].re += shift;
                }
            }
        }
        Affine::UnitDiagonalIdentityBlock { .. } => {
            for i in 0..n {
                out[(i, i)] = Complex::new(T::one(), T::zero());
                for j in 0..n {
                    if i != j && set.in_block(i, j) {
                        out[(i, j)] = Complex::new(T::zero(), T::zero());
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Dykstra's alternating projections onto `PSD ∩ affine`; returns the limit
/// estimate and the affine violation of the PSD iterate after every pass.
pub fn dykstra_project<T: Real>(
    a: &ComplexMat<T>,
    set: Affine<T>,
    passes: usize,
) -> Result<(ComplexMat<T>, Vec<T>)> {
    check_hermitian(a)?;
    set.check(a.nrows())?;
    let n = a.nrows();
    let mut x = a.clone();
    let mut p = ComplexMat::zeros(n, n);
    let mut q = ComplexMat::zeros(n, n);
    let mut history = Vec::with_capacity(passes);
    for _ in 0..passes {
        let y = project_affine(&(&x + &p), set)?;
        p = &x + &p - &y;
        let next = psd_clip(&(&y + &q));
        q = &y + &q - &next;
        x = next;
        history.push(set.violation(&x));
    }
    Ok((x, history))
}

/// Concave problem `max <C, X> − ½ Σ w_ij |X_ij|²` over `PSD ∩ affine`.
#[derive(Debug, Clone)]
pub struct ConvexProblem<T: Real> {
    pub linear: ComplexMat<T>,
    pub weights: DMatrix<T>,
    pub affine: Affine<T>,
}

impl<T: Real> ConvexProblem<T> {
    pub fn new(linear: ComplexMat<T>, weights: DMatrix<T>, affine: Affine<T>) -> Result<Self> {
        let n = linear.nrows();
        check_hermitian(&linear)?;
        if weights.nrows() != n || weights.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "quadratic weights",
                expected: dims(n, n),
                actual: dims(weights.nrows(), weights.ncols()),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[(i, j)];
                if !(w >= T::zero()) || !w.is_finite() {
                    return Err(Error::Infeasible(format!(
                        "quadratic weight ({i},{j}) = {} is not a concave term",
                        w.as_f64()
                    )));
                }
                if (w - weights[(j, i)]).abs_val() > T::tol(1e-12) * (T::one() + w) {
                    return Err(Error::NotHermitian((w - weights[(j, i)]).as_f64()));
                }
            }
        }
        affine.check(n)?;
        Ok(Self {
            linear: hermitian_part(&linear),
            weights,
            affine,
        })
    }

    /// Purely linear objective.
    pub fn linear(linear: ComplexMat<T>, affine: Affine<T>) -> Result<Self> {
        let n = linear.nrows();
        Self::new(linear, DMatrix::zeros(n, n), affine)
    }

    pub fn dim(&self) -> usize {
        self.linear.nrows()
    }

    pub fn value(&self, x: &ComplexMat<T>) -> T {
        let quad = self
            .weights
            .iter()
            .zip(x.iter())
            .fold(T::zero(), |a, (w, z)| a + *w * z.norm_sqr());
        inner(&self.linear, x) - quad * T::lit(0.5)
    }

    /// `argmin_X −<C,X> + ½Σw|X|² + ρ/2 ‖X − V‖²` over the affine set.
    fn x_update(&self, v: &ComplexMat<T>, rho: T) -> ComplexMat<T> {
        let n = self.dim();
        let mut x = ComplexMat::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let d = self.weights[(i, j)] + rho;
                x[(i, j)] = (self.linear[(i, j)] + v[(i, j)].scale(rho)).unscale(d);
            }
        }
        match self.affine {
            Affine::UnitDiagonal => {
                for i in 0..n {
                    x[(i, i)] = Complex::new(T::one(), T::zero());
                }
            }
            Affine::Trace(t) => {
                let mut tr = T::zero();
                let mut inv = T::zero();
                for i in 0..n {
                    tr += x[(i, i)].re;
                    inv += T::one() / (self.weights[(i, i)] + rho);
                }
                let nu = (t - tr) / inv;
                for i in 0..n {
                    x[(i, i)] = Complex::new(x[(i, i)].re + nu / (self.weights[(i, i)] + rho), T::zero());
                }
            }
            set @ Affine::UnitDiagonalIdentityBlock { .. } => {
                for i in 0..n {
                    x[(i, i)] = Complex::new(T::one(), T::zero());
                    for j in 0..n {
                        if i != j && set.in_block(i, j) {
                            x[(i, j)] = Complex::new(T::zero(), T::zero());
                        }
                    }
                }
            }
        }
        x
    }

    /// Scaled-dual estimate `ρU` at a feasible `x0`: the objective gradient
    /// `C − w ⊙ x0` minus the affine multiplier that best annihilates `x0`,
    /// pushed into the negative semidefinite cone.
    fn dual_guess(&self, x0: &ComplexMat<T>) -> ComplexMat<T> {
        let n = self.dim();
        let mut s = self.linear.clone();
        for (z, (w, x)) in s.iter_mut().zip(self.weights.iter().zip(x0.iter())) {
            *z -= x.scale(*w);
        }
        let sx = &s * x0;
        match self.affine {
            Affine::Trace(_) => {
                let tr = x0.trace().re;
                if tr > T::zero() {
                    let nu = sx.trace().re / tr;
                    for i in 0..n {
                        s[(i, i)].re -= nu;
                    }
                }
            }
            Affine::UnitDiagonal | Affine::UnitDiagonalIdentityBlock { .. } => {
                for i in 0..n {
                    let d = x0[(i, i)].re;
                    if d > T::zero() {
                        s[(i, i)].re -= sx[(i, i)].re / d;
                    }
                }
            }
        }
        -psd_clip(&-hermitian_part(&s))
    }

    /// Maps a PSD matrix into the affine set while keeping it PSD: diagonal
    /// congruence for unit-diagonal sets, uniform scaling for the trace set.
    pub fn repair(&self, z: &ComplexMat<T>) -> ComplexMat<T> {
        let n = self.dim();
        match self.affine {
            Affine::Trace(t) => {
                let tr = z.trace().re;
                if tr > T::zero() {
                    z.scale(t / tr)
                } else {
                    ComplexMat::identity(n, n).scale(t / T::from_usize(n.max(1)).unwrap())
                }
            }
            Affine::UnitDiagonal | Affine::UnitDiagonalIdentityBlock { .. } => {
                let floor = T::lit(f64::MIN_POSITIVE).max(T::default_epsilon() * T::lit(1e-20));
                let s: Vec<T> = (0..n)
                    .map(|i| {
                        let d = z[(i, i)].re;
                        if d > floor {
                            T::one() / d.sqrt()
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                let mut out = ComplexMat::from_fn(n, n, |i, j| z[(i, j)].scale(s[i] * s[j]));
                for (i, si) in s.iter().enumerate() {
                    out[(i, i)] = Complex::new(T::one(), T::zero());
                    if *si == T::zero() {
                        for j in 0..n {
                            if j != i {
                                out[(i, j)] = Complex::new(T::zero(), T::zero());
                                out[(j, i)] = Complex::new(T::zero(), T::zero());
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iters: usize,
    /// Relative change of the PSD iterate between iterations.
    pub primal_tol: f64,
    /// Relative distance between the affine and PSD iterates.
    pub feas_tol: f64,
    /// Initial ADMM penalty relative to `‖C‖_F/‖X_0‖_F + max w`.
    pub rho: f64,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    /// Rebalance `rho` every this many iterations (0 disables).
    pub adapt_every: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            primal_tol: 1e-6,
            feas_tol: 1e-7,
            rho: 4.0,
            relaxation: 1.6,
            adapt_every: 0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.max_iters == 0 {
            bad.push("max_iters must be >= 1".to_string());
        }
        if !(self.primal_tol > 0.0) || !(self.feas_tol > 0.0) {
            bad.push("tolerances must be > 0".to_string());
        }
        if !(self.rho > 0.0) {
            bad.push("rho must be > 0".to_string());
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            bad.push("relaxation must lie in (0, 2)".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
}

/// ADMM state that can seed the next solve of a nearby problem.
#[derive(Debug, Clone)]
pub struct AdmmState<T: Real> {
    pub z: ComplexMat<T>,
    pub u: ComplexMat<T>,
    pub rho: T,
}

#[derive(Debug, Clone)]
pub struct Solution<T: Real> {
    /// Feasible point: PSD and inside the affine set up to rounding.
    pub x: ComplexMat<T>,
    pub value: T,
    pub status: SolveStatus,
    pub iterations: usize,
    /// `‖X − Z‖_F / max(1, ‖Z‖_F)` at exit, before repair.
    pub splitting_gap: T,
    /// Affine violation of the returned point.
    pub violation: T,
    /// Whether the supplied feasible start was kept because it scored higher.
    pub kept_start: bool,
    pub state: AdmmState<T>,
}

/// Solves `problem` by ADMM. `start` is a feasible fallback (returned when the
/// solver's own answer scores lower); `warm` seeds the splitting variables.
pub fn solve<T: Real>(
    problem: &ConvexProblem<T>,
    start: Option<&ComplexMat<T>>,
    warm: Option<&AdmmState<T>>,
    settings: &SolverSettings,
) -> Result<Solution<T>> {
    settings.validate()?;
    let n = problem.dim();
    let (mut z, mut u, mut rho) = match warm {
        Some(w) if w.z.nrows() == n && w.u.nrows() == n => (w.z.clone(), w.u.clone(), w.rho),
        _ => {
            let z0 = match start {
                Some(s) => s.clone(),
                None => problem.repair(&ComplexMat::identity(n, n)),
            };
            let wmax = problem.weights.iter().fold(T::zero(), |a, &b| a.max(b));
            let mut scale = frob(&problem.linear) / frob(&z0).max(T::lit(1e-300)) + wmax;
            if !(scale > T::zero()) || !scale.is_finite() {
                scale = T::one();
            }
            let rho = T::lit(settings.rho) * scale;
            let u0 = match start {
                Some(s) => problem.dual_guess(s).scale(T::one() / rho),
                None => ComplexMat::zeros(n, n),
            };
            (z0, u0, rho)
        }
    };
    let alpha = T::lit(settings.relaxation);
    let one_minus = T::one() - alpha;
    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    let mut gap = T::zero();
    let mut x = z.clone();
    for k in 1..=settings.max_iters {
        iterations = k;
        x = problem.x_update(&(&z - &u), rho);
        let xr = x.scale(alpha) + z.scale(one_minus);
        let z_prev = z;
        z = psd_clip(&(&xr + &u));
        u += &xr - &z;
        let scale = frob(&z).max(T::one());
        gap = frob(&(&x - &z)) / scale;
        let step = frob(&(&z - &z_prev)) / scale;
        if !gap.is_finite() || !step.is_finite() {
            return Err(Error::Diverged { iterations: k });
        }
        if step < T::tol(settings.primal_tol) && gap < T::tol(settings.feas_tol) {
            status = SolveStatus::Converged;
            break;
        }
        if settings.adapt_every > 0 && k % settings.adapt_every == 0 {
            let dual = step * rho;
            let ten = T::lit(10.0);
            if gap > ten * dual {
                rho *= T::lit(2.0);
                u = u.scale(T::lit(0.5));
            } else if dual > ten * gap {
                rho *= T::lit(0.5);
                u = u.scale(T::lit(2.0));
            }
        }
    }
    let _ = x;
    let mut sol = problem.repair(&z);
    let mut value = problem.value(&sol);
    let mut kept_start = false;
    if let Some(s) = start {
        let v0 = problem.value(s);
        if v0 > value || !value.is_finite() {
            sol = s.clone();
            value = v0;
            kept_start = true;
        }
    }
    if !value.is_finite() {
        return Err(Error::Diverged { iterations });
    }
    Ok(Solution {
        violation: problem.affine.violation(&sol),
        x: sol,
        value,
        status,
        iterations,
        splitting_gap: gap,
        kept_start,
        state: AdmmState { z, u, rho },
    })
}
