//! Reproducible i.i.d. standard normal potentials `{ω_x}`.
//!
//! Site `x` (storage index `i`) draws the `i`-th 64-bit output of a ChaCha8
//! stream keyed by the seed. The word is mapped to an open uniform
//! `u = (⌊w / 2^12⌋ + 1/2) · 2^{-52} ∈ (0, 1)` and then through the inverse
//! normal CDF of Wichura's algorithm AS241 (`PPND16`, about 1e-16 relative
//! accuracy). Everything is plain IEEE arithmetic, so fields are identical on
//! every platform and independent of the order in which sites are visited.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{ComplexField, LatticeSpec, Representation};

/// Stream used for potentials; random phases use streams `1, 2, ...`.
pub const POTENTIAL_STREAM: u64 = 0;

/// ChaCha8 generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Open-interval uniform from 64 random bits.
pub fn open_uniform(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Inverse standard normal CDF, algorithm AS241 (PPND16).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    if p.is_nan() || p <= 0.0 || p >= 1.0 {
        return if p == 0.0 {
            f64::NEG_INFINITY
        } else if p == 1.0 {
            f64::INFINITY
        } else {
            f64::NAN
        };
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// One realisation of the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderField {
    spec: LatticeSpec,
    seed: Option<u64>,
    omega: Vec<f64>,
}

impl DisorderField {
    /// A hand-built potential (no seed), e.g. a single-site impurity.
    pub fn from_values(spec: LatticeSpec, omega: Vec<f64>) -> Result<Self> {
        if omega.len() != spec.sites() {
            return Err(Error::SpecMismatch(format!(
                "{} potential values for {} sites",
                omega.len(),
                spec.sites()
            )));
        }
        Ok(Self {
            spec,
            seed: None,
            omega,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.omega
    }

    pub fn max_abs(&self) -> f64 {
        self.omega.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// Audit dump: `d,L,seed` header line, then one `omega` value per site.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "d,L,seed")?;
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{}", self.spec.dim(), self.spec.side(), seed)?;
        writeln!(w, "omega")?;
        for x in &self.omega {
            writeln!(w, "{x}")?;
        }
        Ok(())
    }
}

pub fn sample_disorder(spec: &LatticeSpec, seed: u64) -> DisorderField {
    let mut rng = stream_rng(seed, POTENTIAL_STREAM);
    let omega = (0..spec.sites())
        .map(|_| normal_quantile(open_uniform(rng.next_u64())))
        .collect();
    DisorderField {
        spec: *spec,
        seed: Some(seed),
        omega,
    }
}

/// `(η V_ω f)(x) = η ω_x f(x)`.
pub fn multiply_potential(f: &ComplexField, w: &DisorderField, eta: f64) -> Result<ComplexField> {
    f.expect(Representation::Position)?;
    if f.spec() != w.spec() {
        return Err(Error::SpecMismatch(format!("{} vs {}", f.spec(), w.spec())));
    }
    let values: Vec<Complex64> = f
        .values()
        .iter()
        .zip(&w.omega)
        .map(|(z, om)| z * (eta * om))
        .collect();
    ComplexField::from_values(*f.spec(), Representation::Position, values)
}
