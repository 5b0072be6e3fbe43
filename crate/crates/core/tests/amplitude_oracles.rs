//! Single-line amplitudes against direct momentum sums with brute-force time
//! integrals, derived from `E[ω̂(a) conj ω̂(b)] = L^d δ_{ab}` by hand.

use kinetic_core::diagrams::{amplitude, pairing_sum, AmplitudeParams, FeynmanGraph};
use kinetic_core::lattice::{dispersion, ComplexField, LatticeSpec, Representation};
use kinetic_core::micro::InitialProfile;
use num_complex::Complex64;

const ETA: f64 = 0.5;
const T: f64 = 2.0;
const NODES: usize = 40_000;

fn field(spec: LatticeSpec, centre: f64, width: f64, tilt: f64) -> ComplexField {
    let values = (0..spec.sites())
        .map(|i| {
            let p = spec.momentum(i)[0];
            let mut dp = p - centre;
            dp -= dp.round();
            Complex64::from_polar((-dp * dp / (2.0 * width * width)).exp(), tilt * p)
        })
        .collect();
    ComplexField::from_values(spec, Representation::Momentum, values).unwrap()
}

fn midpoint(f: impl Fn(f64) -> Complex64) -> Complex64 {
    let h = T / NODES as f64;
    (0..NODES)
        .map(|k| f((k as f64 + 0.5) * h))
        .sum::<Complex64>()
        * h
}

fn setup() -> (
    LatticeSpec,
    ComplexField,
    ComplexField,
    InitialProfile,
    Vec<f64>,
) {
    let spec = LatticeSpec::new(1, 8).unwrap();
    let f = field(spec, 0.1, 0.15, 0.4);
    let g = field(spec, -0.05, 0.2, -0.3);
    let j = InitialProfile::fermi_dirac(spec.dual_grid(), 2.0, 0.5).unwrap();
    let e = (0..spec.sites())
        .map(|i| dispersion(&spec.momentum(i)))
        .collect();
    (spec, f, g, j, e)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn rung_matches_direct_sum() {
    let (spec, f, g, j, e) = setup();
    let n = spec.sites();
    let l = n as f64;
    // E f^(1)(p)^* g^(1)(p) = η² L^{-d} Σ_k |I(p,k)|² conj f(k) g(k),
    // I(p,k) = ∫_0^t e^{-i(t-s)E(p) - i s E(k)} ds.
    let mut oracle = Complex64::new(0.0, 0.0);
    for p in 0..n {
        let mut inner = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let i_pk = midpoint(|s| Complex64::from_polar(1.0, -(T - s) * e[p] - s * e[k]));
            inner += f.values()[k].conj() * g.values()[k] * i_pk.norm_sqr();
        }
        oracle += j.values()[p] * inner / l;
    }
    oracle *= ETA * ETA / l;

    let graph = FeynmanGraph::single_line(1, 1, &[(1, 2)]).unwrap();
    let params = AmplitudeParams {
        eta: ETA,
        t: T,
        h: 1e-3,
    };
    let amp = amplitude(&graph, &f, &g, &j, params).unwrap();
    assert!(rel(amp, oracle) < 1e-4, "{amp} vs {oracle}");
    let sum = pairing_sum(&[(1, 1)], &[f], &[g], &j, params).unwrap();
    assert_eq!(sum, amp);
}

#[test]
fn recollision_matches_direct_sum() {
    let (spec, f, g, j, e) = setup();
    let n = spec.sites();
    let l = n as f64;
    // E f^(2)(p) = −η² f(p) L^{-d} Σ_k K(p,k),
    // K(p,k) = ∫_0^t (t−u) e^{−i(t−u)E(p) − i u E(k)} du,
    // and g_t(p) = e^{−itE(p)} g(p), f_t^(0)(p) = e^{−itE(p)} f(p).
    let mut oracle = Complex64::new(0.0, 0.0);
    for p in 0..n {
        let k_sum: Complex64 = (0..n)
            .map(|k| midpoint(|u| (T - u) * Complex64::from_polar(1.0, -(T - u) * e[p] - u * e[k])))
            .sum();
        let f2 = -ETA * ETA * f.values()[p] * k_sum / l;
        let gt = Complex64::from_polar(1.0, -T * e[p]) * g.values()[p];
        oracle += j.values()[p] * f2.conj() * gt;
    }
    oracle /= l;

    let graph = FeynmanGraph::single_line(2, 0, &[(1, 2)]).unwrap();
    let params = AmplitudeParams {
        eta: ETA,
        t: T,
        h: 1e-3,
    };
    let amp = amplitude(&graph, &f, &g, &j, params).unwrap();
    assert!(rel(amp, oracle) < 1e-4, "{amp} vs {oracle}");
}

#[test]
fn quadrature_converges_at_second_order() {
    let (_, f, g, j, _) = setup();
    let graph = FeynmanGraph::single_line(2, 2, &[(1, 3), (2, 4)]).unwrap();
    let at = |h| amplitude(&graph, &f, &g, &j, AmplitudeParams { eta: ETA, t: T, h }).unwrap();
    let (a, b, c) = (at(0.04), at(0.02), at(0.01));
    let ratio = (a - b).norm() / (b - c).norm();
    assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
}
