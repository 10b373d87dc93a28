//! Values frozen from an independent dense computation (numpy `eigvalsh` and
//! `solve`) and closed forms.

use schurloc_core::follow::{EnergyFollower, FollowOptions, Sign};
use schurloc_core::linalg;
use schurloc_core::model::sites_of;
use schurloc_core::multiscale::{fundamental_certificate, resonance_probability_exact};
use schurloc_core::schur::{schur_complement, BlockPartition};
use schurloc_core::*;

fn reference_chain() -> Instance {
    let lat = Lattice::new(vec![4]).unwrap();
    let field = DisorderField::from_values(lat, vec![0.3, -0.7, 0.1, 0.9], 0).unwrap();
    Instance::new(field, ModelParams::new(0.01).unwrap())
}

const REFERENCE_SPECTRUM: [f64; 8] = [
    -1.3456321755964704,
    -1.2215303663791672,
    -1.0435872722072779,
    -1.004322267651205,
    1.0043222676512038,
    1.0435872722072776,
    1.2215303663791681,
    1.34563217559647,
];

#[test]
fn spectrum_matches_reference() {
    let eig = reference_chain().hamiltonian.eigenvalues();
    for (a, b) in eig.iter().zip(REFERENCE_SPECTRUM) {
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }
}

#[test]
fn schur_complement_matches_reference() {
    let inst = reference_chain();
    let keep = sites_of(&PositionSet::new(vec![2]));
    let part = BlockPartition::new(&inst.hamiltonian, &keep).unwrap();
    let f = schur_complement(&part, 1.2).unwrap().f;
    let expected = [0.09845778572862841, 0.9977788760849879, 0.9977788760849879, -0.10378580843242811];
    for (a, b) in f.entries().iter().zip(expected) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn resonance_probability_reference() {
    let p = resonance_probability_exact(2f64.sqrt(), 0.1);
    assert!((p - 0.14726481981486117).abs() < 1e-15);
}

#[test]
fn follow_reaches_every_reference_eigenvalue() {
    let inst = reference_chain();
    let f = EnergyFollower::new(&inst, FollowOptions::default());
    let (rep, _) = f.sweep_all_eigenvalues().unwrap();
    assert!(rep.complete(), "{rep:?}");
    for c in &rep.coverage {
        assert!(REFERENCE_SPECTRUM.iter().any(|r| (r - c.lambda).abs() < 1e-13));
    }
}

#[test]
fn reconstructed_eigenvector_matches_dense() {
    let lat = Lattice::new(vec![8]).unwrap();
    let inst = Instance::new(DisorderField::sample(lat, 31, 0), ModelParams::new(1e-3).unwrap());
    let (vals, vecs) = linalg::sym_eigen(inst.hamiltonian.entries());
    let f = EnergyFollower::new(&inst, FollowOptions::default());
    for x in 0..8 {
        for t in f.follow(x, Sign::Plus).unwrap().iter().filter(|t| t.is_converged()) {
            let r = f.reconstruct_eigenfunction(t).unwrap();
            let a = (0..vals.len()).min_by(|&i, &j| (vals[i] - r.lambda0).abs().total_cmp(&(vals[j] - r.lambda0).abs())).unwrap();
            let overlap: f64 = r.vector.iter().zip(vecs.column(a).iter()).map(|(p, q)| p * q).sum();
            assert!(overlap.abs() >= 1.0 - 1e-8);
            assert!(r.residual <= 1e-8);
        }
    }
}

#[test]
fn certificate_on_reference_chain() {
    let inst = reference_chain();
    let rep = fundamental_certificate(&inst, inst.field.t(2)).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert_eq!(rep.counts.full, 2);
}

#[test]
fn singleton_energy_stays_near_bare_level() {
    let lat = Lattice::new(vec![10]).unwrap();
    let mut u = vec![1.0; 10];
    u[4] = 0.0;
    let inst = Instance::new(DisorderField::from_values(lat, u, 0).unwrap(), ModelParams::new(1e-3).unwrap());
    let f = EnergyFollower::new(&inst, FollowOptions::default());
    let t = inst.field.t(4);
    for tr in f.follow(4, Sign::Plus).unwrap() {
        for e in &tr.energies {
            assert!((e - t).abs() <= 2.0 * 1e-3);
        }
    }
}
