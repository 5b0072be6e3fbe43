use kinetic_core::ensemble::EnsemblePlan;
use kinetic_core::lattice::LatticeSpec;
use kinetic_core::micro::{momentum_covariance, momentum_density, EvolutionParams, InitialProfile};

#[test]
fn mass_is_conserved_and_values_stay_physical() {
    let spec = LatticeSpec::new(3, 16).unwrap();
    let j = InitialProfile::fermi_dirac(spec.dual_grid(), 2.0, 0.5).unwrap();
    let params = EvolutionParams::new(spec, 0.5, 4.0, 0.05).unwrap();
    let plan = EnsemblePlan::new(41, 24).unwrap();
    let est = momentum_density(&j, &plan, &params, 2).unwrap();
    let mass0 = j.as_distribution().mass();
    // every random-phase sample carries the mass of J exactly
    assert!((est.mass() - mass0).abs() < 1e-10 * mass0);
    for (f, se) in est.mean.iter().zip(&est.stderr) {
        assert!(*f >= -4.0 * se && *f <= 1.0 + 4.0 * se);
    }
}

#[test]
fn off_diagonal_entries_average_to_zero() {
    let spec = LatticeSpec::new(1, 16).unwrap();
    let j = InitialProfile::fermi_dirac(spec.dual_grid(), 2.0, 0.5).unwrap();
    let params = EvolutionParams::new(spec, 0.5, 3.0, 0.05).unwrap();
    let plan = EnsemblePlan::new(5, 1000).unwrap();
    let pairs = [(3, 4), (8, 9), (0, 8), (5, 12), (8, 8)];
    let cov = momentum_covariance(&j, &plan, &params, 1, &pairs).unwrap();
    for (&(p, q), (mean, se)) in pairs.iter().zip(&cov) {
        if p != q {
            assert!(mean.norm() < 4.0 * se, "({p},{q}): {mean} ± {se}");
        } else {
            assert!(mean.re > 0.0 && mean.im.abs() < 1e-12);
        }
    }
}
