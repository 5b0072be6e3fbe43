//! Periodic lattice `Λ_L = [-L/2, L/2)^d ∩ Z^d`, its dual grid `Λ_L / L ⊂ T^d`,
//! the nearest-neighbour dispersion and the discrete Fourier transform
//!
//! ```text
//! f̂(p) = Σ_x e^{-2πi p·x} f(x),      f(x) = L^{-d} Σ_p e^{2πi p·x} f̂(p).
//! ```
//!
//! Grid points (both position and momentum) are stored in lexicographic order
//! of their integer index `k ∈ [-L/2, L/2)^d`, last axis fastest. Array slot
//! `i` on an axis corresponds to `k = i - L/2`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, BufRead, Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Cubic periodic lattice of even side length `L` in `d` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    d: usize,
    side: usize,
}

impl LatticeSpec {
    pub fn new(d: usize, side: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidLattice("dimension must be at least 1".into()));
        }
        if side < 2 || side % 2 != 0 {
            return Err(Error::InvalidLattice(format!(
                "side length must be even and at least 2, got {side}"
            )));
        }
        side.checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidLattice("site count overflows".into()))?;
        Ok(Self { d, side })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// `L^d`.
    pub fn sites(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    /// Integer coordinates in `[-L/2, L/2)^d` of the point stored at `index`.
    pub fn coords(&self, index: usize) -> Vec<i64> {
        unravel(index, self.d, self.side)
    }

    /// Storage index of integer coordinates, reduced modulo `L`.
    pub fn index(&self, coords: &[i64]) -> usize {
        ravel(coords, self.side)
    }

    /// Dual-lattice momentum `k / L` of the point stored at `index`.
    pub fn momentum(&self, index: usize) -> Vec<f64> {
        let l = self.side as f64;
        self.coords(index)
            .into_iter()
            .map(|k| k as f64 / l)
            .collect()
    }

    /// Index of the point `-k` (the negated momentum or position).
    pub fn negate(&self, index: usize) -> usize {
        let c: Vec<i64> = self.coords(index).into_iter().map(|k| -k).collect();
        self.index(&c)
    }

    pub fn dual_grid(&self) -> MomentumGrid {
        MomentumGrid {
            d: self.d,
            side: self.side,
        }
    }
}

impl fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} L={}", self.d, self.side)
    }
}

fn unravel(mut index: usize, d: usize, side: usize) -> Vec<i64> {
    let half = (side / 2) as i64;
    let mut out = vec![0i64; d];
    for a in (0..d).rev() {
        out[a] = (index % side) as i64 - half;
        index /= side;
    }
    out
}

fn ravel(coords: &[i64], side: usize) -> usize {
    let l = side as i64;
    let half = l / 2;
    coords.iter().fold(0usize, |acc, &k| {
        let slot = (k + half).rem_euclid(l) as usize;
        acc * side + slot
    })
}

/// A symmetric momentum grid `{k/n : k ∈ [-n/2, n/2)^d}` on the torus with
/// uniform weight `n^{-d}`. Used both as the dual lattice (`n = L`) and as
/// the continuum resolution of the Boltzmann solvers (`n = M`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MomentumGrid {
    d: usize,
    side: usize,
}

impl MomentumGrid {
    /// Continuum discretisation with `m` points per axis (`m` even).
    pub fn continuum(d: usize, m: usize) -> Result<Self> {
        let spec = LatticeSpec::new(d, m)?;
        Ok(spec.dual_grid())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of every point; the weights sum to one.
    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let n = self.side as f64;
        unravel(index, self.d, self.side)
            .into_iter()
            .map(|k| k as f64 / n)
            .collect()
    }

    pub fn integer_coords(&self, index: usize) -> Vec<i64> {
        unravel(index, self.d, self.side)
    }

    pub fn index_of(&self, coords: &[i64]) -> usize {
        ravel(coords, self.side)
    }

    pub fn negate(&self, index: usize) -> usize {
        let c: Vec<i64> = self.integer_coords(index).into_iter().map(|k| -k).collect();
        self.index_of(&c)
    }

    /// Flattened list of all points, `d` components each.
    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).flat_map(|i| self.point(i)).collect()
    }

    /// As a lattice spec with the same shape (grids are always valid specs).
    pub fn as_spec(&self) -> LatticeSpec {
        LatticeSpec {
            d: self.d,
            side: self.side,
        }
    }
}

/// `E(p) = Σ_j cos(2π p_j)`.
pub fn dispersion(p: &[f64]) -> f64 {
    p.iter().map(|&pj| (2.0 * PI * pj).cos()).sum()
}

/// `cos(2π k/n)` for slots `i = k + n/2`, built so that the table is exactly
/// even in `k` and exactly odd under `k -> k + n/2`.
fn cos_table(n: usize) -> Vec<f64> {
    let half = n / 2;
    let mut base = vec![0.0; half + 1]; // k = 0..=n/2
    for k in 0..=half {
        let twice = 2 * k;
        base[k] = if twice * 2 == n {
            0.0
        } else if twice * 2 < n {
            (2.0 * PI * k as f64 / n as f64).cos()
        } else {
            f64::NAN
        };
    }
    for k in 0..=half {
        if base[k].is_nan() {
            base[k] = -base[half - k];
        }
    }
    (0..n)
        .map(|i| {
            let k = i as i64 - half as i64;
            base[k.unsigned_abs() as usize]
        })
        .collect()
}

/// The dispersion tabulated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTable {
    grid: MomentumGrid,
    energies: Vec<f64>,
}

impl DispersionTable {
    pub fn new(grid: MomentumGrid) -> Self {
        let table = cos_table(grid.side);
        let d = grid.d;
        let side = grid.side;
        let energies = (0..grid.len())
            .map(|mut idx| {
                let mut slots = vec![0usize; d];
                for a in (0..d).rev() {
                    slots[a] = idx % side;
                    idx /= side;
                }
                slots.iter().map(|&s| table[s]).sum()
            })
            .collect();
        Self { grid, energies }
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, index: usize) -> f64 {
        self.energies[index]
    }

    pub fn range(&self) -> (f64, f64) {
        self.energies
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            })
    }
}

/// Grid point of `Λ_L^*` whose box `q + [-1/(2L), 1/(2L))^d` contains `p`.
///
/// Returns the storage index and the momentum itself. Points whose box wraps
/// past `+1/2` are mapped to `-1/2`.
pub fn nearest_momentum(p: &[f64], spec: &LatticeSpec) -> (usize, Vec<f64>) {
    assert_eq!(p.len(), spec.d, "momentum dimension does not match lattice");
    let l = spec.side as f64;
    let coords: Vec<i64> = p.iter().map(|&x| (x * l + 0.5).floor() as i64).collect();
    let index = spec.index(&coords);
    (index, spec.momentum(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Position,
    Momentum,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Position => "position",
            Representation::Momentum => "momentum",
        }
    }
}

/// A one-particle wavefunction on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    spec: LatticeSpec,
    repr: Representation,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(spec: LatticeSpec, repr: Representation) -> Self {
        Self {
            spec,
            repr,
            values: vec![Complex64::new(0.0, 0.0); spec.sites()],
        }
    }

    pub fn from_values(
        spec: LatticeSpec,
        repr: Representation,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        if values.len() != spec.sites() {
            return Err(Error::SpecMismatch(format!(
                "{} values for a lattice with {} sites",
                values.len(),
                spec.sites()
            )));
        }
        Ok(Self { spec, repr, values })
    }

    /// Kronecker delta at the point with integer coordinates `coords`.
    pub fn delta(spec: LatticeSpec, repr: Representation, coords: &[i64]) -> Self {
        let mut f = Self::zeros(spec, repr);
        f.values[spec.index(coords)] = Complex64::new(1.0, 0.0);
        f
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn expect(&self, repr: Representation) -> Result<()> {
        if self.repr == repr {
            Ok(())
        } else {
            Err(Error::WrongRepresentation {
                expected: repr.name(),
                found: self.repr.name(),
            })
        }
    }

    /// Squared L² norm; momentum fields use the measure `L^{-d} Σ_p`, so the
    /// value does not depend on the representation.
    pub fn norm_sqr(&self) -> f64 {
        let s: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        match self.repr {
            Representation::Position => s,
            Representation::Momentum => s / self.spec.sites() as f64,
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch(format!(
                "{} vs {}",
                self.spec, other.spec
            )));
        }
        if self.repr != other.repr {
            return Err(Error::WrongRepresentation {
                expected: self.repr.name(),
                found: other.repr.name(),
            });
        }
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(match self.repr {
            Representation::Position => s,
            Representation::Momentum => s / self.spec.sites() as f64,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "d,L,representation")?;
        writeln!(w, "{},{},{}", self.spec.d, self.spec.side, self.repr.name())?;
        writeln!(w, "re,im")?;
        for z in &self.values {
            writeln!(w, "{},{}", z.re, z.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut lines = r.lines();
        let mut next = || -> io::Result<String> {
            lines
                .next()
                .unwrap_or_else(|| Err(bad("unexpected end of file")))
        };
        if next()?.trim() != "d,L,representation" {
            return Err(bad("missing field header"));
        }
        let head = next()?;
        let parts: Vec<&str> = head.trim().split(',').collect();
        if parts.len() != 3 {
            return Err(bad("malformed field header"));
        }
        let d: usize = parts[0].parse().map_err(|_| bad("bad d"))?;
        let side: usize = parts[1].parse().map_err(|_| bad("bad L"))?;
        let repr = match parts[2] {
            "position" => Representation::Position,
            "momentum" => Representation::Momentum,
            _ => return Err(bad("bad representation")),
        };
        let spec = LatticeSpec::new(d, side).map_err(|e| bad(&e.to_string()))?;
        if next()?.trim() != "re,im" {
            return Err(bad("missing value header"));
        }
        let mut values = Vec::with_capacity(spec.sites());
        for _ in 0..spec.sites() {
            let line = next()?;
            let (re, im) = line
                .trim()
                .split_once(',')
                .ok_or_else(|| bad("bad value"))?;
            values.push(Complex64::new(
                re.parse().map_err(|_| bad("bad real part"))?,
                im.parse().map_err(|_| bad("bad imaginary part"))?,
            ));
        }
        Self::from_values(spec, repr, values).map_err(|e| bad(&e.to_string()))
    }

    /// Little-endian binary layout: `d: u32, L: u32, repr: u8` followed by
    /// `(re, im)` pairs of `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + 16 * self.values.len());
        out.extend_from_slice(&(self.spec.d as u32).to_le_bytes());
        out.extend_from_slice(&(self.spec.side as u32).to_le_bytes());
        out.push(match self.repr {
            Representation::Position => 0,
            Representation::Momentum => 1,
        });
        for z in &self.values {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut u32buf = [0u8; 4];
        bytes.read_exact(&mut u32buf)?;
        let d = u32::from_le_bytes(u32buf) as usize;
        bytes.read_exact(&mut u32buf)?;
        let side = u32::from_le_bytes(u32buf) as usize;
        let mut tag = [0u8; 1];
        bytes.read_exact(&mut tag)?;
        let repr = match tag[0] {
            0 => Representation::Position,
            1 => Representation::Momentum,
            _ => return Err(bad("bad representation tag")),
        };
        let spec = LatticeSpec::new(d, side).map_err(|e| bad(&e.to_string()))?;
        let mut values = Vec::with_capacity(spec.sites());
        let mut f = [0u8; 8];
        for _ in 0..spec.sites() {
            bytes.read_exact(&mut f)?;
            let re = f64::from_le_bytes(f);
            bytes.read_exact(&mut f)?;
            let im = f64::from_le_bytes(f);
            values.push(Complex64::new(re, im));
        }
        if !bytes.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Self::from_values(spec, repr, values).map_err(|e| bad(&e.to_string()))
    }
}

/// Reusable multi-dimensional FFT in the lattice convention.
///
/// Internally the transform runs on "raw" arrays: position values multiplied
/// by `(-1)^{Σ m_a}` and momentum values multiplied by `(-1)^{Σ j_a + dL/2}`
/// (slot indices `m`, `j`). With these signs the centred transform is a plain
/// FFT, and since both sign patterns are diagonal they commute with any
/// diagonal propagator factor.
pub struct FourierPlan {
    spec: LatticeSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    pos_sign: Vec<f64>,
    mom_sign: Vec<f64>,
}

impl fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierPlan")
            .field("spec", &self.spec)
            .finish()
    }
}

/// Scratch space for [`FourierPlan`]; one per worker thread.
#[derive(Debug, Default)]
pub struct FftWorkspace {
    lines: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FourierPlan {
    pub fn new(spec: LatticeSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(spec.side);
        let inverse = planner.plan_fft_inverse(spec.side);
        let side = spec.side;
        let d = spec.d;
        let shift = if (d * side / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let parity = |mut idx: usize| {
            let mut s = 0usize;
            for _ in 0..d {
                s += idx % side;
                idx /= side;
            }
            if s % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        };
        let pos_sign: Vec<f64> = (0..spec.sites()).map(parity).collect();
        let mom_sign = pos_sign.iter().map(|s| s * shift).collect();
        Self {
            spec,
            forward,
            inverse,
            pos_sign,
            mom_sign,
        }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn workspace(&self) -> FftWorkspace {
        let scratch_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        FftWorkspace {
            lines: vec![Complex64::new(0.0, 0.0); self.spec.sites()],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn forward(&self, f: &ComplexField) -> Result<ComplexField> {
        f.expect(Representation::Position)?;
        self.check_spec(f)?;
        let mut values = f.values.clone();
        let mut ws = self.workspace();
        self.forward_in_place(&mut values, &mut ws);
        Ok(ComplexField {
            spec: self.spec,
            repr: Representation::Momentum,
            values,
        })
    }

    pub fn inverse(&self, g: &ComplexField) -> Result<ComplexField> {
        g.expect(Representation::Momentum)?;
        self.check_spec(g)?;
        let mut values = g.values.clone();
        let mut ws = self.workspace();
        self.inverse_in_place(&mut values, &mut ws);
        Ok(ComplexField {
            spec: self.spec,
            repr: Representation::Position,
            values,
        })
    }

    /// Centred position values to centred momentum values.
    pub fn forward_in_place(&self, values: &mut [Complex64], ws: &mut FftWorkspace) {
        self.to_raw_position(values);
        self.raw_forward(values, ws);
        self.from_raw_momentum(values);
    }

    /// Centred momentum values to centred position values (normalised).
    pub fn inverse_in_place(&self, values: &mut [Complex64], ws: &mut FftWorkspace) {
        self.to_raw_momentum(values);
        self.raw_inverse(values, ws);
        self.from_raw_position(values);
    }

    pub(crate) fn to_raw_position(&self, v: &mut [Complex64]) {
        v.iter_mut().zip(&self.pos_sign).for_each(|(z, s)| *z *= *s);
    }

    pub(crate) fn from_raw_position(&self, v: &mut [Complex64]) {
        self.to_raw_position(v)
    }

    pub(crate) fn to_raw_momentum(&self, v: &mut [Complex64]) {
        v.iter_mut().zip(&self.mom_sign).for_each(|(z, s)| *z *= *s);
    }

    pub(crate) fn from_raw_momentum(&self, v: &mut [Complex64]) {
        self.to_raw_momentum(v)
    }

    /// Unnormalised forward FFT of a raw array.
    pub(crate) fn raw_forward(&self, v: &mut [Complex64], ws: &mut FftWorkspace) {
        self.transform_axes(v, ws, &*self.forward);
    }

    /// Inverse FFT of a raw array including the `L^{-d}` normalisation.
    pub(crate) fn raw_inverse(&self, v: &mut [Complex64], ws: &mut FftWorkspace) {
        self.transform_axes(v, ws, &*self.inverse);
        let norm = 1.0 / self.spec.sites() as f64;
        v.iter_mut().for_each(|z| *z *= norm);
    }

    /// Inverse FFT of a raw array without the `L^{-d}` factor.
    pub(crate) fn raw_inverse_unscaled(&self, v: &mut [Complex64], ws: &mut FftWorkspace) {
        self.transform_axes(v, ws, &*self.inverse);
    }

    fn check_spec(&self, f: &ComplexField) -> Result<()> {
        if f.spec != self.spec {
            return Err(Error::SpecMismatch(format!(
                "{} vs plan {}",
                f.spec, self.spec
            )));
        }
        Ok(())
    }

    fn transform_axes(&self, v: &mut [Complex64], ws: &mut FftWorkspace, fft: &dyn Fft<f64>) {
        let side = self.spec.side;
        let n = v.len();
        debug_assert_eq!(n, self.spec.sites());
        if ws.lines.len() != n {
            *ws = self.workspace();
        }
        for axis in 0..self.spec.d {
            let stride = side.pow((self.spec.d - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(v, &mut ws.scratch);
                continue;
            }
            let block = side * stride;
            // gather every line along `axis` contiguously
            let mut line = 0;
            for outer in (0..n).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let dst = &mut ws.lines[line * side..(line + 1) * side];
                    for (k, slot) in dst.iter_mut().enumerate() {
                        *slot = v[base + k * stride];
                    }
                    line += 1;
                }
            }
            fft.process_with_scratch(&mut ws.lines, &mut ws.scratch);
            let mut line = 0;
            for outer in (0..n).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let src = &ws.lines[line * side..(line + 1) * side];
                    for (k, z) in src.iter().enumerate() {
                        v[base + k * stride] = *z;
                    }
                    line += 1;
                }
            }
        }
    }
}

pub fn forward_transform(f: &ComplexField) -> Result<ComplexField> {
    FourierPlan::new(f.spec).forward(f)
}

pub fn inverse_transform(g: &ComplexField) -> Result<ComplexField> {
    FourierPlan::new(g.spec).inverse(g)
}

/// Validates that a slice of real values lives on `grid`.
pub(crate) fn check_len(name: &'static str, len: usize, grid: &MomentumGrid) -> Result<()> {
    if len != grid.len() {
        return Err(invalid(
            name,
            format!("{len} values for a grid with {} points", grid.len()),
        ));
    }
    Ok(())
}
