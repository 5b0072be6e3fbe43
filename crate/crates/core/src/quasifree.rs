//! Two-point matrices `M_jl = ⟨f_{j,t}, J g_{l,t}⟩` per disorder realisation,
//! their determinants (the 2r-point functions of a quasifree state) and the
//! gap `|E[det M] − det E[M]|` of the disorder-averaged state.

use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagrams::wick::weighted_overlap;
use crate::disorder::{sample_disorder, DisorderField};
use crate::ensemble::{ordered_map_fold, EnsemblePlan};
use crate::error::{invalid, Error, Result};
use crate::lattice::{ComplexField, LatticeSpec, Representation};
use crate::micro::{Direction, EvolutionParams, Evolver, InitialProfile};

/// Largest `r` accepted by [`quasifreeness_gap`].
pub const DEFAULT_MAX_R: usize = 4;

/// Momentum-space test functions `f_1..f_r` and `g_1..g_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionSet {
    fs: Vec<ComplexField>,
    gs: Vec<ComplexField>,
}

/// Periodic Gaussian `exp(-|p - c|² / (2 w²))` on the dual grid, with
/// `|p - c|` the torus distance, scaled so that `L^{-d} Σ_p |f(p)|² = 1`.
pub fn gaussian_bump(spec: LatticeSpec, centre: &[f64], width: f64) -> Result<ComplexField> {
    if centre.len() != spec.dim() {
        return Err(invalid(
            "centre",
            format!(
                "has {} components, lattice has d = {}",
                centre.len(),
                spec.dim()
            ),
        ));
    }
    if !(width.is_finite() && width > 0.0) {
        return Err(invalid(
            "width",
            format!("must be finite and > 0, got {width}"),
        ));
    }
    let mut values: Vec<Complex64> = (0..spec.sites())
        .map(|i| {
            let r2: f64 = spec
                .momentum(i)
                .iter()
                .zip(centre)
                .map(|(p, c)| {
                    let mut dp = p - c;
                    dp -= dp.round();
                    dp * dp
                })
                .sum();
            Complex64::new((-r2 / (2.0 * width * width)).exp(), 0.0)
        })
        .collect();
    let norm = (values.iter().map(|z| z.norm_sqr()).sum::<f64>() / spec.sites() as f64).sqrt();
    if norm == 0.0 {
        return Err(invalid("width", "bump vanishes on the grid"));
    }
    values.iter_mut().for_each(|z| *z /= norm);
    ComplexField::from_values(spec, Representation::Momentum, values)
}

impl TestFunctionSet {
    pub fn new(fs: Vec<ComplexField>, gs: Vec<ComplexField>) -> Result<Self> {
        if fs.is_empty() || fs.len() != gs.len() {
            return Err(invalid(
                "test functions",
                format!("need r ≥ 1 of each, got {} f and {} g", fs.len(), gs.len()),
            ));
        }
        let spec = *fs[0].spec();
        for h in fs.iter().chain(&gs) {
            h.expect(Representation::Momentum)?;
            if *h.spec() != spec {
                return Err(Error::SpecMismatch(format!(
                    "test functions on {:?} and {:?}",
                    spec,
                    h.spec()
                )));
            }
            if !h
                .values()
                .iter()
                .all(|z| z.re.is_finite() && z.im.is_finite())
            {
                return Err(invalid("test functions", "non-finite value"));
            }
        }
        Ok(Self { fs, gs })
    }

    /// Normalised Gaussian bumps with the given centres and common width.
    pub fn bumps(
        spec: LatticeSpec,
        f_centres: &[Vec<f64>],
        g_centres: &[Vec<f64>],
        width: f64,
    ) -> Result<Self> {
        let make = |cs: &[Vec<f64>]| -> Result<Vec<ComplexField>> {
            cs.iter().map(|c| gaussian_bump(spec, c, width)).collect()
        };
        Self::new(make(f_centres)?, make(g_centres)?)
    }

    pub fn r(&self) -> usize {
        self.fs.len()
    }

    pub fn spec(&self) -> &LatticeSpec {
        self.fs[0].spec()
    }

    pub fn fs(&self) -> &[ComplexField] {
        &self.fs
    }

    pub fn gs(&self) -> &[ComplexField] {
        &self.gs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointMatrix {
    pub matrix: DMatrix<Complex64>,
    pub eta: f64,
    pub t: f64,
    pub seed: Option<u64>,
}

fn check_inputs(
    tset: &TestFunctionSet,
    j: &InitialProfile,
    params: &EvolutionParams,
) -> Result<()> {
    if tset.spec() != params.spec() {
        return Err(Error::SpecMismatch(format!(
            "test functions on {:?}, evolution on {:?}",
            tset.spec(),
            params.spec()
        )));
    }
    if j.grid().as_spec() != *params.spec() {
        return Err(Error::GridMismatch(format!(
            "profile grid {:?} is not the dual grid of {:?}",
            j.grid(),
            params.spec()
        )));
    }
    Ok(())
}

fn assemble(
    evolver: &Evolver,
    tset: &TestFunctionSet,
    j: &[f64],
    w: &DisorderField,
) -> Result<DMatrix<Complex64>> {
    let evolve_all = |hs: &[ComplexField]| -> Result<Vec<ComplexField>> {
        hs.iter().map(|h| evolver.evolve(h, w)).collect()
    };
    let ft = evolve_all(tset.fs())?;
    let gt = evolve_all(tset.gs())?;
    let r = tset.r();
    Ok(DMatrix::from_fn(r, r, |a, b| {
        weighted_overlap(&ft[a], j, &gt[b])
    }))
}

/// `M_jl = L^{-d} Σ_p J(p) conj(f_{j,t}(p)) g_{l,t}(p)` for one realisation.
pub fn two_point_matrix(
    tset: &TestFunctionSet,
    j: &InitialProfile,
    w: &DisorderField,
    params: &EvolutionParams,
) -> Result<TwoPointMatrix> {
    check_inputs(tset, j, params)?;
    let evolver = Evolver::new(params, Direction::Forward);
    Ok(TwoPointMatrix {
        matrix: assemble(&evolver, tset, j.values(), w)?,
        eta: params.eta(),
        t: params.t(),
        seed: w.seed(),
    })
}

fn det(m: &DMatrix<Complex64>) -> Complex64 {
    match m.nrows() {
        0 => Complex64::new(1.0, 0.0),
        1 => m[(0, 0)],
        _ => m.determinant(),
    }
}

/// `det M`, the 2r-point function `ρ_t(a^+(f_r)…a^+(f_1) a(g_1)…a(g_r))` of
/// the quasifree state with two-point matrix `M`.
pub fn point_function_2r(m: &TwoPointMatrix) -> Result<Complex64> {
    if !m.matrix.is_square() {
        return Err(invalid(
            "matrix",
            format!("{}×{} is not square", m.matrix.nrows(), m.matrix.ncols()),
        ));
    }
    Ok(det(&m.matrix))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub r: usize,
    pub d: usize,
    pub side: usize,
    pub eta: f64,
    pub t: f64,
    pub n_realizations: usize,
    pub e_det: Complex64,
    pub det_e: Complex64,
    pub gap: f64,
    pub stderr: f64,
}

impl GapReport {
    pub const CSV_HEADER: &'static str =
        "r,d,L,eta,T,t,n_realizations,E_det_re,E_det_im,det_E_re,det_E_im,gap,stderr";

    /// CSV row; `macro_time` fills the `T` column.
    pub fn write_csv_row<W: Write>(&self, mut w: W, macro_time: f64) -> io::Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.r,
            self.d,
            self.side,
            self.eta,
            macro_time,
            self.t,
            self.n_realizations,
            self.e_det.re,
            self.e_det.im,
            self.det_e.re,
            self.det_e.im,
            self.gap,
            self.stderr
        )
    }
}

/// Complex sums of `x_i − x_0`, so identical samples average to `x_0`
/// exactly.
#[derive(Debug, Clone)]
struct ShiftedSums {
    reference: Vec<Complex64>,
    sum: Vec<Complex64>,
    n: usize,
}

impl ShiftedSums {
    fn push(&mut self, x: &[Complex64]) {
        if self.n == 0 {
            self.reference = x.to_vec();
            self.sum = vec![Complex64::new(0.0, 0.0); x.len()];
        }
        for ((s, r), v) in self.sum.iter_mut().zip(&self.reference).zip(x) {
            *s += v - r;
        }
        self.n += 1;
    }

    fn mean(&self) -> Vec<Complex64> {
        let n = self.n as f64;
        self.reference
            .iter()
            .zip(&self.sum)
            .map(|(r, s)| r + s / n)
            .collect()
    }
}

/// Estimates `E[det M]` and `det E[M]` on the same realisations. The standard
/// error of the difference comes from the delta method: per realisation,
/// `det M_i − Σ_jl C_jl (M_i)_jl` with `C` the cofactor matrix of `E[M]`.
pub fn quasifreeness_gap(
    tset: &TestFunctionSet,
    j: &InitialProfile,
    plan: &EnsemblePlan,
    params: &EvolutionParams,
) -> Result<GapReport> {
    plan.check()?;
    check_inputs(tset, j, params)?;
    let r = tset.r();
    if r > DEFAULT_MAX_R {
        return Err(Error::SizeGuard(format!(
            "r = {r}, at most {DEFAULT_MAX_R}"
        )));
    }
    let evolver = Evolver::new(params, Direction::Forward);
    let sample = |i: usize| -> Result<(DMatrix<Complex64>, Complex64)> {
        let w = sample_disorder(params.spec(), plan.seed(i));
        let m = assemble(&evolver, tset, j.values(), &w)?;
        let dm = det(&m);
        Ok((m, dm))
    };
    let samples = ordered_map_fold(
        plan.n_realizations,
        sample,
        Ok(Vec::with_capacity(plan.n_realizations)),
        |acc: Result<Vec<_>>, s| {
            let mut acc = acc?;
            acc.push(s?);
            Ok(acc)
        },
    )?;

    let mut sums = ShiftedSums {
        reference: Vec::new(),
        sum: Vec::new(),
        n: 0,
    };
    let mut row = Vec::with_capacity(r * r + 1);
    for (m, dm) in &samples {
        row.clear();
        row.push(*dm);
        row.extend(m.iter().copied());
        sums.push(&row);
    }
    let means = sums.mean();
    let e_det = means[0];
    let mean_m = DMatrix::from_column_slice(r, r, &means[1..]);
    let det_e = det(&mean_m);

    let cof = cofactors(&mean_m);
    let linear: Vec<Complex64> = samples
        .iter()
        .map(|(m, dm)| {
            dm - m
                .iter()
                .zip(cof.iter())
                .map(|(a, c)| a * c)
                .sum::<Complex64>()
        })
        .collect();
    let stderr = complex_stderr(&linear);

    Ok(GapReport {
        r,
        d: params.spec().dim(),
        side: params.spec().side(),
        eta: params.eta(),
        t: params.t(),
        n_realizations: plan.n_realizations,
        e_det,
        det_e,
        gap: (e_det - det_e).norm(),
        stderr,
    })
}

/// `C_jl = ∂ det / ∂ M_jl`, in the same column-major layout as `m`.
fn cofactors(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let r = m.nrows();
    if r == 1 {
        return DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    }
    DMatrix::from_fn(r, r, |a, b| {
        let minor = m.clone().remove_row(a).remove_column(b);
        let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
        det(&minor) * sign
    })
}

/// `sqrt(se_re² + se_im²)` with shifted sums.
fn complex_stderr(xs: &[Complex64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let x0 = xs[0];
    let nf = n as f64;
    let mean = x0 + xs.iter().map(|x| x - x0).sum::<Complex64>() / nf;
    let var: f64 = xs.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (nf - 1.0);
    (var / nf).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> LatticeSpec {
        LatticeSpec::new(1, 16).unwrap()
    }

    fn profile(spec: LatticeSpec) -> InitialProfile {
        InitialProfile::fermi_dirac(spec.dual_grid(), 2.0, 0.5).unwrap()
    }

    fn two_bumps(spec: LatticeSpec) -> TestFunctionSet {
        TestFunctionSet::bumps(
            spec,
            &[vec![0.1], vec![-0.2]],
            &[vec![0.15], vec![-0.1]],
            0.08,
        )
        .unwrap()
    }

    #[test]
    fn bumps_are_normalised() {
        let f = gaussian_bump(spec(), &[0.3], 0.1).unwrap();
        assert!((f.norm_sqr() - 1.0).abs() < 1e-13);
        assert!(gaussian_bump(spec(), &[0.3, 0.1], 0.1).is_err());
        assert!(gaussian_bump(spec(), &[0.3], 0.0).is_err());
    }

    #[test]
    fn free_disjoint_support_gives_zero() {
        let s = spec();
        let indicator = |k: usize| {
            let mut v = vec![Complex64::new(0.0, 0.0); s.sites()];
            v[k] = Complex64::new(1.0, 0.0);
            ComplexField::from_values(s, Representation::Momentum, v).unwrap()
        };
        let tset = TestFunctionSet::new(
            vec![indicator(2), indicator(3)],
            vec![indicator(5), indicator(9)],
        )
        .unwrap();
        let params = EvolutionParams::new(s, 0.0, 3.0, 0.1).unwrap();
        let w = sample_disorder(&s, 4);
        let m = two_point_matrix(&tset, &profile(s), &w, &params).unwrap();
        assert!(m.matrix.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn orthonormal_at_time_zero_is_identity() {
        let s = spec();
        let j = InitialProfile::constant(s.dual_grid(), 1.0).unwrap();
        let fs: Vec<ComplexField> = [1usize, 6, 11]
            .iter()
            .map(|&k| {
                let mut v = vec![Complex64::new(0.0, 0.0); s.sites()];
                v[k] = Complex64::new(4.0, 0.0);
                ComplexField::from_values(s, Representation::Momentum, v).unwrap()
            })
            .collect();
        let tset = TestFunctionSet::new(fs.clone(), fs).unwrap();
        let params = EvolutionParams::new(s, 0.7, 0.0, 0.1).unwrap();
        let m = two_point_matrix(&tset, &j, &sample_disorder(&s, 1), &params).unwrap();
        let id = DMatrix::<Complex64>::identity(3, 3);
        assert!((&m.matrix - id).norm() < 1e-13);
        assert!((point_function_2r(&m).unwrap() - 1.0).norm() < 1e-13);
    }

    #[test]
    fn hermitian_when_gs_equal_fs() {
        let s = spec();
        let tset =
            TestFunctionSet::bumps(s, &[vec![0.1], vec![-0.2]], &[vec![0.1], vec![-0.2]], 0.1)
                .unwrap();
        let params = EvolutionParams::new(s, 0.5, 2.0, 0.05).unwrap();
        let m = two_point_matrix(&tset, &profile(s), &sample_disorder(&s, 8), &params).unwrap();
        assert!((&m.matrix - m.matrix.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn one_by_one_determinant_is_the_entry() {
        let m = TwoPointMatrix {
            matrix: DMatrix::from_element(1, 1, Complex64::new(0.3, -0.7)),
            eta: 0.0,
            t: 0.0,
            seed: None,
        };
        assert_eq!(point_function_2r(&m).unwrap(), Complex64::new(0.3, -0.7));
        let rect = TwoPointMatrix {
            matrix: DMatrix::from_element(1, 2, Complex64::new(1.0, 0.0)),
            ..m
        };
        assert!(point_function_2r(&rect).is_err());
    }

    #[test]
    fn cofactors_are_determinant_gradient() {
        let m = DMatrix::from_fn(3, 3, |a, b| {
            Complex64::new((a * 3 + b) as f64 * 0.37 - 1.0, ((a + 2 * b) as f64).sin())
        });
        let c = cofactors(&m);
        let h = 1e-6;
        for a in 0..3 {
            for b in 0..3 {
                let mut mp = m.clone();
                mp[(a, b)] += h;
                let mut mm = m.clone();
                mm[(a, b)] -= h;
                let fd = (det(&mp) - det(&mm)) / (2.0 * h);
                assert!((fd - c[(a, b)]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn exact_nulls() {
        let s = spec();
        let j = profile(s);
        let plan = EnsemblePlan::new(11, 20).unwrap();
        let tset = two_bumps(s);
        let free = EvolutionParams::new(s, 0.0, 2.0, 0.05).unwrap();
        let r = quasifreeness_gap(&tset, &j, &plan, &free).unwrap();
        assert_eq!(r.gap, 0.0);
        let frozen = EvolutionParams::new(s, 0.5, 0.0, 0.05).unwrap();
        assert_eq!(
            quasifreeness_gap(&tset, &j, &plan, &frozen).unwrap().gap,
            0.0
        );
        let single = TestFunctionSet::bumps(s, &[vec![0.1]], &[vec![0.15]], 0.08).unwrap();
        let coupled = EvolutionParams::new(s, 0.5, 2.0, 0.05).unwrap();
        let r1 = quasifreeness_gap(&single, &j, &plan, &coupled).unwrap();
        assert_eq!(r1.gap, 0.0);
        assert!(r1.stderr < 1e-14);
    }

    #[test]
    fn coupled_gap_is_positive() {
        let s = spec();
        let plan = EnsemblePlan::new(5, 64).unwrap();
        let params = EvolutionParams::new(s, 0.5, 2.0, 0.05).unwrap();
        let r = quasifreeness_gap(&two_bumps(s), &profile(s), &plan, &params).unwrap();
        assert!(r.gap > 0.0 && r.stderr > 0.0, "{r:?}");
    }

    #[test]
    fn csv_row_shape() {
        let s = spec();
        let plan = EnsemblePlan::new(5, 4).unwrap();
        let params = EvolutionParams::new(s, 0.5, 2.0, 0.05).unwrap();
        let r = quasifreeness_gap(&two_bumps(s), &profile(s), &plan, &params).unwrap();
        let mut buf = Vec::new();
        r.write_csv_row(&mut buf, 0.5).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(
            line.trim().split(',').count(),
            GapReport::CSV_HEADER.split(',').count()
        );
    }
}
