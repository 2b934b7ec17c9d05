//! Scenario configuration, unit conversions and deterministic RNG streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carrier used for the default wavelength (28 GHz).
pub const DEFAULT_CARRIER_HZ: f64 = 28e9;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Uniform planar array grid, `width x height` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpaDims {
    pub width: usize,
    pub height: usize,
}

impl UpaDims {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Near-square factorization `n = width * height` with `width >= height`
    /// and `height` the largest divisor not exceeding `sqrt(n)`.
    pub fn near_square(n: usize) -> Self {
        let mut h = (n as f64).sqrt().floor() as usize;
        while h > 1 && n % h != 0 {
            h -= 1;
        }
        let h = h.max(1);
        Self::new(n / h, h)
    }
}

/// Path-loss model `PL(D) = a + 10 b log10(D)` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub a: f64,
    pub b: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self { a: 61.4, b: 2.0 }
    }
}

impl PathLossModel {
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        self.a + 10.0 * self.b * distance_m.log10()
    }
}

/// Every scenario parameter. Powers are given in dBm / dBi at the interface
/// and converted with [`SystemConfig::pt_watts`] where needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Transmit antennas.
    pub m: usize,
    /// RF chains.
    pub n_rf: usize,
    /// Users / streams; the Alamouti code fixes this to 2.
    pub k: usize,
    /// Elements of IRS 1.
    pub r1: usize,
    /// Elements of IRS 2.
    pub r2: usize,
    /// Transmit power, dBm.
    pub pt_dbm: f64,
    /// Noise power, watts.
    pub sigma2: f64,
    /// Transmit antenna gain, dBi.
    pub gt_dbi: f64,
    /// Paths per BS-IRS link.
    pub l_b: usize,
    /// Paths per IRS-user link.
    pub l_i: usize,
    /// BS-IRS distance, metres.
    pub d_hb: f64,
    /// IRS-user distance, metres.
    pub d_hi: f64,
    /// Carrier wavelength, metres.
    pub wavelength: f64,
    /// Element spacing, metres.
    pub spacing: f64,
    pub pl_a: f64,
    pub pl_b: f64,
    /// Grid dimensions; `None` selects [`UpaDims::near_square`].
    pub bs_dims: Option<UpaDims>,
    pub irs1_dims: Option<UpaDims>,
    pub irs2_dims: Option<UpaDims>,
    pub user_dims: Option<UpaDims>,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::table1()
    }
}

impl SystemConfig {
    /// The reference simulation parameters: M=10, N_RF=2, K=2, R=25 per IRS,
    /// 30 dBm, 49 dBi, 5 paths per link, 30 m hops.
    pub fn table1() -> Self {
        let wavelength = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ;
        Self {
            m: 10,
            n_rf: 2,
            k: 2,
            r1: 25,
            r2: 25,
            pt_dbm: 30.0,
            sigma2: 1e-11,
            gt_dbi: 49.0,
            l_b: 5,
            l_i: 5,
            d_hb: 30.0,
            d_hi: 30.0,
            wavelength,
            spacing: wavelength / 2.0,
            pl_a: PathLossModel::default().a,
            pl_b: PathLossModel::default().b,
            bs_dims: None,
            irs1_dims: None,
            irs2_dims: None,
            user_dims: None,
            seed: 1,
        }
    }

    pub fn pt_watts(&self) -> f64 {
        dbm_to_watts(self.pt_dbm)
    }

    pub fn path_loss(&self) -> PathLossModel {
        PathLossModel {
            a: self.pl_a,
            b: self.pl_b,
        }
    }

    /// Total reflecting elements `R1 + R2` (the stacked dimension).
    pub fn total_elements(&self) -> usize {
        self.r1 + self.r2
    }

    pub fn bs_grid(&self) -> UpaDims {
        self.bs_dims.unwrap_or_else(|| UpaDims::near_square(self.m))
    }

    pub fn irs1_grid(&self) -> UpaDims {
        self.irs1_dims.unwrap_or_else(|| UpaDims::near_square(self.r1))
    }

    pub fn irs2_grid(&self) -> UpaDims {
        self.irs2_dims.unwrap_or_else(|| UpaDims::near_square(self.r2))
    }

    pub fn user_grid(&self) -> UpaDims {
        self.user_dims.unwrap_or_else(|| UpaDims::near_square(self.k))
    }

    /// Returns `self` iff every invariant holds, otherwise the full list of
    /// violations.
    pub fn validate(self) -> Result<Self> {
        let mut v = Vec::new();
        if self.k != 2 {
            v.push(format!("K must be 2 for the Alamouti code (got {})", self.k));
        }
        if self.n_rf < self.k {
            v.push(format!("N_RF ({}) must be at least K ({})", self.n_rf, self.k));
        }
        if self.n_rf > self.m {
            v.push(format!("N_RF ({}) must not exceed M ({})", self.n_rf, self.m));
        }
        if self.m == 0 {
            v.push("M must be positive".into());
        }
        if self.r1 == 0 || self.r2 == 0 {
            v.push(format!("R1, R2 must be >= 1 (got {}, {})", self.r1, self.r2));
        }
        if self.l_b == 0 || self.l_i == 0 {
            v.push("path counts must be >= 1".into());
        }
        for (name, x) in [
            ("sigma2", self.sigma2),
            ("d_hb", self.d_hb),
            ("d_hi", self.d_hi),
            ("wavelength", self.wavelength),
            ("spacing", self.spacing),
        ] {
            if !(x.is_finite() && x > 0.0) {
                v.push(format!("{name} must be finite and > 0 (got {x})"));
            }
        }
        for (name, x) in [
            ("pt_dbm", self.pt_dbm),
            ("gt_dbi", self.gt_dbi),
            ("pl_a", self.pl_a),
            ("pl_b", self.pl_b),
        ] {
            if !x.is_finite() {
                v.push(format!("{name} must be finite (got {x})"));
            }
        }
        for (name, dims, n) in [
            ("bs_dims", self.bs_dims, self.m),
            ("irs1_dims", self.irs1_dims, self.r1),
            ("irs2_dims", self.irs2_dims, self.r2),
            ("user_dims", self.user_dims, self.k),
        ] {
            if let Some(d) = dims {
                if d.len() != n {
                    v.push(format!(
                        "{name} {}x{} does not hold {n} elements",
                        d.width, d.height
                    ));
                }
            }
        }
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(v))
        }
    }
}

/// Deterministic family of RNG streams derived from one master seed.
///
/// Each `(trial, purpose)` pair maps to its own ChaCha stream, so adding a
/// consumer never shifts the numbers another consumer sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    master: u64,
}

/// Stream identifiers for the independent random consumers of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamId {
    ChannelBs1 = 1,
    ChannelBs2 = 2,
    ChannelIrs1 = 3,
    ChannelIrs2 = 4,
    Perturbation = 5,
    RandomPhases = 6,
    Solver = 7,
    Noise = 8,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Seed stream of trial `trial` (paired across schemes and scenarios).
    pub fn trial(&self, trial: u64) -> SeedStream {
        // splitmix64 step keeps neighbouring trials decorrelated
        let mut z = self
            .master
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(trial.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        SeedStream::new(z ^ (z >> 31))
    }

    pub fn rng(&self, id: StreamId) -> ChaCha8Rng {
        self.rng_raw(id as u64)
    }

    pub fn rng_raw(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(stream);
        rng
    }
}
