//! Extended Saleh-Valenzuela mmWave channels over uniform planar arrays, and
//! the stacked double-IRS channel set used by the optimizers.

use std::io::{BufRead, Write};

use nalgebra::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{SeedStream, StreamId, SystemConfig, UpaDims};
use crate::error::{dims, Error, Result};
use crate::linalg::{expect_dims, hermitian_part};
use crate::scalar::{cis, ComplexMat, ComplexVec, Real};

/// One planar array: grid plus element spacing and carrier wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub dims: UpaDims,
    pub spacing: f64,
    pub wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(dims: UpaDims, spacing: f64, wavelength: f64) -> Self {
        Self {
            dims,
            spacing,
            wavelength,
        }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn response<T: Real>(&self, azimuth: T, elevation: T) -> Result<ComplexVec<T>> {
        upa_response(
            azimuth,
            elevation,
            self.dims,
            T::lit(self.spacing),
            T::lit(self.wavelength),
        )
    }
}

/// Unit-norm UPA steering vector.
///
/// Element `(m, n)` (horizontal index `m < W`, vertical index `n < H`) sits at
/// position `n * W + m` and carries phase
/// `2π d/λ (m sin ψ sin β + n cos β)`; the vector is scaled by `1/√(WH)`.
pub fn upa_response<T: Real>(
    azimuth: T,
    elevation: T,
    dims: UpaDims,
    spacing: T,
    wavelength: T,
) -> Result<ComplexVec<T>> {
    if !azimuth.is_finite() || !elevation.is_finite() {
        return Err(Error::NonFinite("steering angles"));
    }
    if dims.width == 0 || dims.height == 0 {
        return Err(Error::DimensionMismatch {
            context: "upa_response",
            expected: "W, H >= 1".into(),
            actual: dims_str(dims),
        });
    }
    let k = T::two_pi() * spacing / wavelength;
    let horiz = azimuth.sin() * elevation.sin();
    let vert = elevation.cos();
    let scale = T::one() / T::from_usize(dims.len()).unwrap().sqrt();
    let mut a = ComplexVec::zeros(dims.len());
    for n in 0..dims.height {
        for m in 0..dims.width {
            let phase =
                k * (T::from_usize(m).unwrap() * horiz + T::from_usize(n).unwrap() * vert);
            a[n * dims.width + m] = cis(phase).scale(scale);
        }
    }
    Ok(a)
}

fn dims_str(d: UpaDims) -> String {
    format!("{}x{}", d.width, d.height)
}

/// One propagation path of a Saleh-Valenzuela channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGain<T: Real> {
    pub gain: Complex<T>,
    /// Azimuth and elevation of arrival, radians.
    pub aoa: (T, T),
    /// Azimuth and elevation of departure, radians.
    pub aod: (T, T),
}

/// The random draw behind one channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGains<T: Real> {
    pub paths: Vec<PathGain<T>>,
    /// `sqrt(n_rx n_tx / L)`.
    pub kappa: T,
    pub path_loss_db: f64,
}

/// Samples `CN(0, variance)`.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex<T> {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(T::lit(s * re), T::lit(s * im))
}

fn open_elevation<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let b = rng.random::<f64>() * std::f64::consts::PI;
        if b > 0.0 {
            return b;
        }
    }
}

/// Draws `L` paths: gains `CN(0, κ² 10^{-PL/10})`, azimuths uniform on
/// `[0, 2π)`, elevations uniform on `(0, π)`.
pub fn draw_paths<T: Real, R: Rng + ?Sized>(
    n_rx: usize,
    n_tx: usize,
    paths: usize,
    path_loss_db: f64,
    rng: &mut R,
) -> Result<PathGains<T>> {
    if paths == 0 || n_rx == 0 || n_tx == 0 {
        return Err(Error::DimensionMismatch {
            context: "draw_paths",
            expected: "n_rx, n_tx, L >= 1".into(),
            actual: format!("n_rx={n_rx} n_tx={n_tx} L={paths}"),
        });
    }
    let kappa2 = (n_rx * n_tx) as f64 / paths as f64;
    let variance = kappa2 * 10f64.powf(-0.1 * path_loss_db);
    let two_pi = std::f64::consts::TAU;
    let drawn = (0..paths)
        .map(|_| {
            let gain = complex_gaussian(rng, variance);
            let aoa = (rng.random::<f64>() * two_pi, open_elevation(rng));
            let aod = (rng.random::<f64>() * two_pi, open_elevation(rng));
            PathGain {
                gain,
                aoa: (T::lit(aoa.0), T::lit(aoa.1)),
                aod: (T::lit(aod.0), T::lit(aod.1)),
            }
        })
        .collect();
    Ok(PathGains {
        paths: drawn,
        kappa: T::lit(kappa2.sqrt()),
        path_loss_db,
    })
}

/// `Σ_q α_q a_r(ψ_q^r, β_q^r) a_t(ψ_q^t, β_q^t)^H`.
pub fn synthesize<T: Real>(
    gains: &PathGains<T>,
    rx: &ArrayGeometry,
    tx: &ArrayGeometry,
) -> Result<ComplexMat<T>> {
    let mut h = ComplexMat::zeros(rx.len(), tx.len());
    for p in &gains.paths {
        let ar = rx.response(p.aoa.0, p.aoa.1)?;
        let at = tx.response(p.aod.0, p.aod.1)?;
        h += (ar * at.adjoint()) * p.gain;
    }
    Ok(h)
}

/// One `rx.len() x tx.len()` Saleh-Valenzuela channel with `paths` paths.
pub fn gen_sv_channel<T: Real, R: Rng + ?Sized>(
    rx: &ArrayGeometry,
    tx: &ArrayGeometry,
    paths: usize,
    path_loss_db: f64,
    rng: &mut R,
) -> Result<ComplexMat<T>> {
    let gains = draw_paths(rx.len(), tx.len(), paths, path_loss_db, rng)?;
    synthesize(&gains, rx, tx)
}

/// Per-link losses in dB, already net of any antenna gain. IRS-user links
/// carry one loss per user row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkLosses {
    pub bs_irs1_db: f64,
    pub bs_irs2_db: f64,
    pub irs1_users_db: [f64; 2],
    pub irs2_users_db: [f64; 2],
}

impl LinkLosses {
    pub fn uniform(bs_irs_db: f64, irs_users_db: f64) -> Self {
        Self {
            bs_irs1_db: bs_irs_db,
            bs_irs2_db: bs_irs_db,
            irs1_users_db: [irs_users_db; 2],
            irs2_users_db: [irs_users_db; 2],
        }
    }

    /// Absolute losses of the configured geometry, transmit gain credited to
    /// the BS-side hops.
    pub fn from_config(cfg: &SystemConfig) -> Self {
        let pl = cfg.path_loss();
        Self::uniform(pl.loss_db(cfg.d_hb) - cfg.gt_dbi, pl.loss_db(cfg.d_hi))
    }

    /// Same losses with `reference_db` removed from every cascade, i.e. the
    /// BS-side hops are shifted by `bs_ref_db` and the user-side hops by
    /// `user_ref_db`.
    pub fn relative_to(&self, bs_ref_db: f64, user_ref_db: f64) -> Self {
        Self {
            bs_irs1_db: self.bs_irs1_db - bs_ref_db,
            bs_irs2_db: self.bs_irs2_db - bs_ref_db,
            irs1_users_db: self.irs1_users_db.map(|x| x - user_ref_db),
            irs2_users_db: self.irs2_users_db.map(|x| x - user_ref_db),
        }
    }
}

/// The four base channels plus their stacked forms.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T: Real> {
    /// BS -> IRS 1, `R1 x M`.
    pub hb1: ComplexMat<T>,
    /// BS -> IRS 2, `R2 x M`.
    pub hb2: ComplexMat<T>,
    /// IRS 1 -> users, `2 x R1`.
    pub hi1: ComplexMat<T>,
    /// IRS 2 -> users, `2 x R2`.
    pub hi2: ComplexMat<T>,
    /// `[H_B1; H_B2]`, `(R1+R2) x M`.
    pub hb: ComplexMat<T>,
    /// `[H_I1, H_I2]`, `2 x (R1+R2)`.
    pub hi: ComplexMat<T>,
    /// `H_I^H H_I`, Hermitian PSD of rank at most 2.
    pub hi_tilde: ComplexMat<T>,
}

impl<T: Real> ChannelSet<T> {
    /// Stacks the four base channels after checking their shapes agree.
    pub fn assemble(
        hb1: ComplexMat<T>,
        hb2: ComplexMat<T>,
        hi1: ComplexMat<T>,
        hi2: ComplexMat<T>,
    ) -> Result<Self> {
        let m = hb1.ncols();
        let (r1, r2) = (hb1.nrows(), hb2.nrows());
        expect_dims(&hb2, r2, m, "H_B2 columns must match H_B1")?;
        expect_dims(&hi1, 2, r1, "H_I1 must be 2 x R1")?;
        expect_dims(&hi2, 2, r2, "H_I2 must be 2 x R2")?;
        for h in [&hb1, &hb2, &hi1, &hi2] {
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite("channel matrix"));
            }
        }
        let r = r1 + r2;
        let mut hb = ComplexMat::zeros(r, m);
        hb.rows_mut(0, r1).copy_from(&hb1);
        hb.rows_mut(r1, r2).copy_from(&hb2);
        let mut hi = ComplexMat::zeros(2, r);
        hi.columns_mut(0, r1).copy_from(&hi1);
        hi.columns_mut(r1, r2).copy_from(&hi2);
        let hi_tilde = hermitian_part(&(hi.adjoint() * &hi));
        Ok(Self {
            hb1,
            hb2,
            hi1,
            hi2,
            hb,
            hi,
            hi_tilde,
        })
    }

    /// [`ChannelSet::assemble`] plus a check against the configured sizes.
    pub fn assemble_for(
        cfg: &SystemConfig,
        hb1: ComplexMat<T>,
        hb2: ComplexMat<T>,
        hi1: ComplexMat<T>,
        hi2: ComplexMat<T>,
    ) -> Result<Self> {
        expect_dims(&hb1, cfg.r1, cfg.m, "H_B1 vs config")?;
        expect_dims(&hb2, cfg.r2, cfg.m, "H_B2 vs config")?;
        Self::assemble(hb1, hb2, hi1, hi2)
    }

    /// Transmit antennas `M`.
    pub fn m(&self) -> usize {
        self.hb.ncols()
    }

    pub fn r1(&self) -> usize {
        self.hb1.nrows()
    }

    pub fn r2(&self) -> usize {
        self.hb2.nrows()
    }

    /// `R1 + R2`.
    pub fn total_elements(&self) -> usize {
        self.hb.nrows()
    }

    /// Adds `alpha ΔH`, `ΔH` entries i.i.d. `CN(0, 1)`, independently to each
    /// of the four base channels (drawn in the order H_B1, H_B2, H_I1, H_I2)
    /// and restacks.
    pub fn perturb<R: Rng + ?Sized>(&self, alpha: f64, rng: &mut R) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Infeasible(format!(
                "perturbation scale must be >= 0 (got {alpha})"
            )));
        }
        let a = T::lit(alpha);
        let mut bump = |h: &ComplexMat<T>| {
            let mut out = h.clone();
            for z in out.iter_mut() {
                let d: Complex<T> = complex_gaussian(rng, 1.0);
                *z += d.scale(a);
            }
            out
        };
        let hb1 = bump(&self.hb1);
        let hb2 = bump(&self.hb2);
        let hi1 = bump(&self.hi1);
        let hi2 = bump(&self.hi2);
        Self::assemble(hb1, hb2, hi1, hi2)
    }

    /// Lossless conversion between precisions (through `f64`).
    pub fn cast<U: Real>(&self) -> ChannelSet<U> {
        let c = |h: &ComplexMat<T>| h.map(|z| Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64())));
        ChannelSet::assemble(c(&self.hb1), c(&self.hb2), c(&self.hi1), c(&self.hi2))
            .expect("shapes preserved")
    }
}

/// Draws the four channels of `cfg` under `losses` from the channel streams
/// of `seeds`.
pub fn generate_channels<T: Real>(
    cfg: &SystemConfig,
    losses: &LinkLosses,
    seeds: &SeedStream,
) -> Result<ChannelSet<T>> {
    let geo = |d: UpaDims| ArrayGeometry::new(d, cfg.spacing, cfg.wavelength);
    let bs = geo(cfg.bs_grid());
    let irs1 = geo(cfg.irs1_grid());
    let irs2 = geo(cfg.irs2_grid());
    let users = geo(cfg.user_grid());
    let hb1 = gen_sv_channel(
        &irs1,
        &bs,
        cfg.l_b,
        losses.bs_irs1_db,
        &mut seeds.rng(StreamId::ChannelBs1),
    )?;
    let hb2 = gen_sv_channel(
        &irs2,
        &bs,
        cfg.l_b,
        losses.bs_irs2_db,
        &mut seeds.rng(StreamId::ChannelBs2),
    )?;
    let user_link = |irs: &ArrayGeometry, per_user: [f64; 2], id| -> Result<ComplexMat<T>> {
        let mut h = gen_sv_channel(&users, irs, cfg.l_i, 0.0, &mut seeds.rng(id))?;
        for (row, db) in per_user.iter().enumerate() {
            let amp = T::lit(10f64.powf(-db / 20.0));
            h.row_mut(row).scale_mut(amp);
        }
        Ok(h)
    };
    let hi1 = user_link(&irs1, losses.irs1_users_db, StreamId::ChannelIrs1)?;
    let hi2 = user_link(&irs2, losses.irs2_users_db, StreamId::ChannelIrs2)?;
    ChannelSet::assemble_for(cfg, hb1, hb2, hi1, hi2)
}

fn fmt_complex(re: f64, im: f64) -> String {
    if im.is_sign_negative() {
        format!("{re:e}-{:e}j", -im)
    } else {
        format!("{re:e}+{im:e}j")
    }
}

fn parse_complex(tok: &str) -> Result<(f64, f64)> {
    let err = || Error::Parse(format!("bad complex token `{tok}`"));
    let body = tok.strip_suffix('j').ok_or_else(err)?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(err)?;
    let re = body[..split].parse::<f64>().map_err(|_| err())?;
    let im = body[split..].parse::<f64>().map_err(|_| err())?;
    Ok((re, im))
}

/// Writes `rows cols` then one row per line of `re±imj` tokens. Values are
/// printed in shortest round-trip exponent form, so `f64` data survives a
/// write/read cycle bit-exactly.
pub fn write_matrix<T: Real, W: Write>(out: &mut W, h: &ComplexMat<T>) -> std::io::Result<()> {
    writeln!(out, "{} {}", h.nrows(), h.ncols())?;
    for i in 0..h.nrows() {
        let row: Vec<String> = (0..h.ncols())
            .map(|j| fmt_complex(h[(i, j)].re.as_f64(), h[(i, j)].im.as_f64()))
            .collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

fn next_content_line<R: BufRead>(input: &mut R) -> Result<Option<String>> {
    let mut line = String::new();
    loop {
        line.clear();
        let n = input
            .read_line(&mut line)
            .map_err(|e| Error::Parse(e.to_string()))?;
        if n == 0 {
            return Ok(None);
        }
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            return Ok(Some(t.to_string()));
        }
    }
}

/// Reads one matrix written by [`write_matrix`]; `#` lines are comments.
pub fn read_matrix<T: Real, R: BufRead>(input: &mut R) -> Result<ComplexMat<T>> {
    let header = next_content_line(input)?.ok_or_else(|| Error::Parse("missing header".into()))?;
    let hd: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse(format!("bad header `{header}`")))?;
    let [rows, cols] = hd[..] else {
        return Err(Error::Parse(format!("bad header `{header}`")));
    };
    let mut h = ComplexMat::zeros(rows, cols);
    for i in 0..rows {
        let line = next_content_line(input)?
            .ok_or_else(|| Error::Parse(format!("missing row {i} of {}", dims(rows, cols))))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != cols {
            return Err(Error::Parse(format!(
                "row {i} has {} entries, expected {cols}",
                toks.len()
            )));
        }
        for (j, t) in toks.iter().enumerate() {
            let (re, im) = parse_complex(t)?;
            h[(i, j)] = Complex::new(T::lit(re), T::lit(im));
        }
    }
    Ok(h)
}

/// Writes the four base channels (H_B1, H_B2, H_I1, H_I2) as consecutive
/// matrix blocks.
pub fn write_channel_set<T: Real, W: Write>(out: &mut W, ch: &ChannelSet<T>) -> std::io::Result<()> {
    for (name, h) in [("H_B1", &ch.hb1), ("H_B2", &ch.hb2), ("H_I1", &ch.hi1), ("H_I2", &ch.hi2)] {
        writeln!(out, "# {name}")?;
        write_matrix(out, h)?;
    }
    Ok(())
}

pub fn read_channel_set<T: Real, R: BufRead>(input: &mut R) -> Result<ChannelSet<T>> {
    let hb1 = read_matrix(input)?;
    let hb2 = read_matrix(input)?;
    let hi1 = read_matrix(input)?;
    let hi2 = read_matrix(input)?;
    ChannelSet::assemble(hb1, hb2, hi1, hi2)
}
