//! Alamouti space-time coding over the IRS-assisted channel: encoding,
//! effective channel, combining, and the SNR/rate objective.

use nalgebra::Complex;
use rand::Rng;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{expect_dims, frob_sq};
use crate::scalar::{cabs, cis, ComplexMat, ComplexVec, Real};

/// Unit-modulus tolerance on phase entries (f64).
pub const UNIT_MODULUS_TOL: f64 = 1e-12;
/// `‖G‖_F` at or below which combining is refused.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// `[[s1, -s2*], [s2, s1*]]`; rows are streams, columns are time slots.
pub fn encode<T: Real>(s1: Complex<T>, s2: Complex<T>) -> ComplexMat<T> {
    ComplexMat::from_row_slice(2, 2, &[s1, -s2.conj(), s2, s1.conj()])
}

/// Reflection coefficients of both surfaces, stacked `[φ_1; φ_2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig<T: Real> {
    phi: ComplexVec<T>,
    r1: usize,
}

impl<T: Real> PhaseConfig<T> {
    pub fn new(phi: ComplexVec<T>, r1: usize) -> Result<Self> {
        if r1 > phi.len() {
            return Err(Error::DimensionMismatch {
                context: "phase split",
                expected: format!("R1 <= {}", phi.len()),
                actual: format!("R1 = {r1}"),
            });
        }
        let tol = T::tol(UNIT_MODULUS_TOL);
        if let Some(z) = phi.iter().find(|z| (cabs(**z) - T::one()).abs_val() > tol) {
            return Err(Error::Infeasible(format!(
                "phase entry has modulus {}",
                cabs(*z).as_f64()
            )));
        }
        Ok(Self { phi, r1 })
    }

    pub fn from_angles(theta: &[T], r1: usize) -> Result<Self> {
        Self::new(ComplexVec::from_iterator(theta.len(), theta.iter().map(|&t| cis(t))), r1)
    }

    /// All reflections equal to 1.
    pub fn ones(r1: usize, r2: usize) -> Self {
        Self {
            phi: ComplexVec::from_element(r1 + r2, Complex::new(T::one(), T::zero())),
            r1,
        }
    }

    /// Independent uniform phases.
    pub fn random<R: Rng + ?Sized>(r1: usize, r2: usize, rng: &mut R) -> Self {
        let phi = ComplexVec::from_fn(r1 + r2, |_, _| {
            cis(T::lit(rng.random::<f64>() * std::f64::consts::TAU))
        });
        Self { phi, r1 }
    }

    pub fn phi(&self) -> &ComplexVec<T> {
        &self.phi
    }

    pub fn phi_1(&self) -> ComplexVec<T> {
        self.phi.rows(0, self.r1).into_owned()
    }

    pub fn phi_2(&self) -> ComplexVec<T> {
        self.phi.rows(self.r1, self.phi.len() - self.r1).into_owned()
    }

    pub fn r1(&self) -> usize {
        self.r1
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// `diag(φ) H`, i.e. row `i` of `h` scaled by `φ_i`.
fn scale_rows<T: Real>(phi: &ComplexVec<T>, h: &ComplexMat<T>) -> ComplexMat<T> {
    let mut out = h.clone();
    for (i, p) in phi.iter().enumerate() {
        for z in out.row_mut(i).iter_mut() {
            *z *= *p;
        }
    }
    out
}

fn check_inputs<T: Real>(
    ch: &ChannelSet<T>,
    phases: &PhaseConfig<T>,
    f: &ComplexMat<T>,
) -> Result<()> {
    if phases.len() != ch.total_elements() || phases.r1() != ch.r1() {
        return Err(Error::DimensionMismatch {
            context: "phase vector vs surfaces",
            expected: format!("{} + {}", ch.r1(), ch.r2()),
            actual: format!("{} + {}", phases.r1(), phases.len() - phases.r1()),
        });
    }
    expect_dims(f, ch.m(), 2, "precoder must be M x 2")
}

/// The cascaded channel operator `H_I diag(φ) H_B` (`2 x M`).
pub fn cascaded_channel<T: Real>(ch: &ChannelSet<T>, phases: &PhaseConfig<T>) -> ComplexMat<T> {
    &ch.hi * scale_rows(phases.phi(), &ch.hb)
}

/// `G = H_I diag(φ) H_B F` from the stacked channels.
pub fn effective_channel<T: Real>(
    ch: &ChannelSet<T>,
    phases: &PhaseConfig<T>,
    f: &ComplexMat<T>,
) -> Result<ComplexMat<T>> {
    check_inputs(ch, phases, f)?;
    Ok(cascaded_channel(ch, phases) * f)
}

/// `G = H_I1 diag(φ_1) H_B1 F + H_I2 diag(φ_2) H_B2 F`.
pub fn effective_channel_unstacked<T: Real>(
    ch: &ChannelSet<T>,
    phases: &PhaseConfig<T>,
    f: &ComplexMat<T>,
) -> Result<ComplexMat<T>> {
    check_inputs(ch, phases, f)?;
    let h1 = &ch.hi1 * scale_rows(&phases.phi_1(), &ch.hb1) * f;
    let h2 = &ch.hi2 * scale_rows(&phases.phi_2(), &ch.hb2) * f;
    Ok(h1 + h2)
}

/// Best fully digital precoder for fixed phases: `F = √2 [v1, 0]` with `v1`
/// the top right-singular vector of `H_I diag(φ) H_B`. Returns `F` and
/// `‖G‖_F² = 2 σ1²`.
pub fn optimal_precoder<T: Real>(
    ch: &ChannelSet<T>,
    phases: &PhaseConfig<T>,
) -> Result<(ComplexMat<T>, T)> {
    if phases.len() != ch.total_elements() {
        return Err(Error::DimensionMismatch {
            context: "phase vector vs surfaces",
            expected: ch.total_elements().to_string(),
            actual: phases.len().to_string(),
        });
    }
    let h = cascaded_channel(ch, phases);
    let e = crate::linalg::HermitianEigen::new(&(h.adjoint() * &h));
    let two = T::lit(2.0);
    let mut f = ComplexMat::zeros(ch.m(), 2);
    f.set_column(0, &e.vectors.column(0).scale(two.sqrt()));
    Ok((f, two * e.values[0].max(T::zero())))
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::Infeasible(format!("noise power must be > 0 (got {sigma2})")))
    }
}

/// Post-combining SNR `(P_t / 2σ²) ‖G‖_F²`, equal for both symbols.
pub fn snr<T: Real>(g: &ComplexMat<T>, pt: f64, sigma2: f64) -> Result<T> {
    check_sigma2(sigma2)?;
    Ok(frob_sq(g) * T::lit(pt / (2.0 * sigma2)))
}

/// Per-user terms `(P_t / 2σ²)(|g_i1|² + |g_i2|²)`, one per row of `G`.
pub fn per_user_snr<T: Real>(g: &ComplexMat<T>, pt: f64, sigma2: f64) -> Result<Vec<T>> {
    check_sigma2(sigma2)?;
    let k = T::lit(pt / (2.0 * sigma2));
    Ok(g.row_iter()
        .map(|r| r.iter().fold(T::zero(), |a, z| a + z.norm_sqr()) * k)
        .collect())
}

/// Sum of the per-user terms; the same scalar as [`snr`].
pub fn sum_snr_two_users<T: Real>(g: &ComplexMat<T>, pt: f64, sigma2: f64) -> Result<T> {
    Ok(per_user_snr(g, pt, sigma2)?
        .into_iter()
        .fold(T::zero(), |a, b| a + b))
}

fn degenerate<T: Real>(g: &ComplexMat<T>) -> Result<T> {
    let e = frob_sq(g);
    if !(e.sqrt() > T::lit(DEGENERATE_TOL)) {
        return Err(Error::DegenerateChannel(e.sqrt().as_f64()));
    }
    Ok(e)
}

/// Linear combining of `Y = G S + N` (columns are slots):
/// `ŝ1 = (g1^H y1 + y2^H g2)/‖G‖²`, `ŝ2 = (g2^H y1 − y2^H g1)/‖G‖²`.
pub fn mrc_decode<T: Real>(
    y: &ComplexMat<T>,
    g: &ComplexMat<T>,
) -> Result<(Complex<T>, Complex<T>)> {
    expect_dims(g, y.nrows(), 2, "effective channel vs received block")?;
    expect_dims(y, g.nrows(), 2, "received block must have two slots")?;
    let e = degenerate(g)?;
    let (g1, g2) = (g.column(0), g.column(1));
    let (y1, y2) = (y.column(0), y.column(1));
    let s1 = g1.dotc(&y1) + y2.dotc(&g2);
    let s2 = g2.dotc(&y1) - y2.dotc(&g1);
    Ok((s1.unscale(e), s2.unscale(e)))
}

/// SINR of both symbols when the combiner uses `g_nominal` but the signal
/// propagates through `g_true`. Reduces to [`snr`] when the two agree.
pub fn mismatched_sinr<T: Real>(
    g_nominal: &ComplexMat<T>,
    g_true: &ComplexMat<T>,
    pt: f64,
    sigma2: f64,
) -> Result<(T, T)> {
    check_sigma2(sigma2)?;
    expect_dims(g_true, g_nominal.nrows(), g_nominal.ncols(), "true vs nominal channel")?;
    expect_dims(g_nominal, g_nominal.nrows(), 2, "effective channel must have two streams")?;
    let e = degenerate(g_nominal)?;
    let (g1, g2) = (g_nominal.column(0), g_nominal.column(1));
    let (t1, t2) = (g_true.column(0), g_true.column(1));
    let a1 = g1.dotc(&t1) + t2.dotc(&g2);
    let b1 = g1.dotc(&t2) - t1.dotc(&g2);
    let a2 = g2.dotc(&t2) + t1.dotc(&g1);
    let b2 = g2.dotc(&t1) - t2.dotc(&g1);
    let p = T::lit(pt / 2.0);
    let noise = T::lit(sigma2) * e;
    let sinr = |a: Complex<T>, b: Complex<T>| p * a.norm_sqr() / (p * b.norm_sqr() + noise);
    Ok((sinr(a1, b1), sinr(a2, b2)))
}

/// `log2(1 + SNR)`, halved when `half_rate` is set.
pub fn achievable_rate<T: Real>(snr: T, half_rate: bool) -> T {
    let r = (T::one() + snr.max(T::zero())).log2();
    if half_rate {
        r * T::lit(0.5)
    } else {
        r
    }
}
