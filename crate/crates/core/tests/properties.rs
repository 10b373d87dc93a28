use nalgebra::DMatrix;
use proptest::prelude::*;
use schurloc_core::follow::{EnergyFollower, FollowOptions};
use schurloc_core::lattice::components_at_scale;
use schurloc_core::linalg;
use schurloc_core::model::{bare_levels, sites_of};
use schurloc_core::multiscale::{matching_keep_set, resonance_probability_exact, Multiscale};
use schurloc_core::schur::{lift_eigenvector, schur_complement, BlockPartition};
use schurloc_core::stats::{estimate_dos, estimate_min_spacing_cdf};
use schurloc_core::*;

fn field(u: Vec<f64>) -> DisorderField {
    let lat = Lattice::new(vec![u.len()]).unwrap();
    DisorderField::from_values(lat, u, 0).unwrap()
}

fn chain(u: Vec<f64>, gamma: f64) -> Instance {
    Instance::new(field(u), ModelParams::new(gamma).unwrap())
}

fn subset(n: usize, mask: u64) -> PositionSet {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn components_partition_and_coarsen(w in 1usize..7, h in 1usize..6, mask in any::<u64>(), s1 in 1u64..4, extra in 0u64..4) {
        let lat = Lattice::new(vec![w, h]).unwrap();
        let s = subset(w * h, mask);
        let fine = components_at_scale(&s, s1, &lat);
        let coarse = components_at_scale(&s, s1 + extra, &lat);
        let mut all: Vec<usize> = fine.iter().flat_map(|b| b.positions().iter()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, s.as_slice().to_vec());
        for b in &fine {
            prop_assert_eq!(coarse.iter().filter(|c| b.positions().is_subset(c.positions())).count(), 1);
        }
    }

    #[test]
    fn schur_determinant_identity(u in prop::collection::vec(-1.0f64..1.0, 2..6), mask in 1u64..63, lambda in -2.0f64..2.0, gamma in 0.0f64..0.2) {
        let inst = chain(u.clone(), gamma);
        let keep = subset(u.len(), mask);
        prop_assume!(!keep.is_empty());
        let part = BlockPartition::new(&inst.hamiltonian, &sites_of(&keep)).unwrap();
        let d = part.d();
        prop_assume!(d.nrows() == 0 || linalg::spectral_gap(&d, lambda) > 1e-3);
        let f = schur_complement(&part, lambda).unwrap();
        let shift = |m: &DMatrix<f64>| m - DMatrix::identity(m.nrows(), m.nrows()) * lambda;
        let lhs = shift(inst.hamiltonian.entries()).determinant();
        let rhs = shift(&d).determinant() * shift(f.f.entries()).determinant();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn eigenvalues_of_h_are_fixed_points_and_lift(u in prop::collection::vec(-1.0f64..1.0, 2..6), mask in 1u64..63, gamma in 1e-4f64..0.05) {
        let inst = chain(u.clone(), gamma);
        let keep = subset(u.len(), mask);
        prop_assume!(!keep.is_empty());
        let part = BlockPartition::new(&inst.hamiltonian, &sites_of(&keep)).unwrap();
        let d = part.d();
        for lambda in inst.hamiltonian.eigenvalues() {
            if d.nrows() > 0 && linalg::spectral_gap(&d, lambda) < 1e-2 {
                continue;
            }
            let f = schur_complement(&part, lambda).unwrap();
            let (vals, vecs) = linalg::sym_eigen(f.f.entries());
            let p = (0..vals.len()).min_by(|&a, &b| (vals[a] - lambda).abs().total_cmp(&(vals[b] - lambda).abs())).unwrap();
            prop_assert!((vals[p] - lambda).abs() < 1e-10);
            let lifted = lift_eigenvector(&part, lambda, &vecs.column(p).into_owned(), 1e-8).unwrap();
            let v = lifted.vector.normalize();
            prop_assert!((inst.hamiltonian.entries() * &v - &v * lambda).norm() < 1e-9);
        }
    }

    #[test]
    fn weyl_bound_around_bare_levels(u in prop::collection::vec(-1.0f64..1.0, 1..8), gamma in 0.0f64..0.1) {
        let inst = chain(u.clone(), gamma);
        let mut bare: Vec<f64> = u.iter().flat_map(|&x| { let (a, b) = bare_levels(x); [a, b] }).collect();
        bare.sort_by(f64::total_cmp);
        for (l, b) in inst.hamiltonian.eigenvalues().iter().zip(&bare) {
            prop_assert!((l - b).abs() <= 2.0 * gamma + 1e-12);
        }
    }

    #[test]
    fn matching_keep_set_bounds_coupling(w in 1usize..7, h in 1usize..5, mask in any::<u64>(), gamma in 1e-4f64..0.1) {
        let lat = Lattice::new(vec![w, h]).unwrap();
        let seed = subset(w * h, mask);
        let keep = matching_keep_set(&seed, &lat);
        prop_assert!(seed.is_subset(&keep));
        let inst = Instance::new(DisorderField::sample(lat, 3, 0), ModelParams::new(gamma).unwrap());
        let part = BlockPartition::new(&inst.hamiltonian, &sites_of(&keep)).unwrap();
        prop_assert!(linalg::spectral_norm(&part.b()) <= gamma * (1.0 + 1e-12));
    }

    #[test]
    fn resonance_probability_is_a_probability(e in -2.0f64..2.0, eps in 1e-4f64..0.5) {
        let p = resonance_probability_exact(e, eps);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(p <= 3.0 * eps.sqrt() + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn resonant_sets_are_nested(seed in any::<u64>(), e in 1.0f64..1.4) {
        let lat = Lattice::new(vec![12]).unwrap();
        let inst = Instance::new(DisorderField::sample(lat, seed, 0), ModelParams::new(1e-3).unwrap());
        if let Ok(states) = Multiscale::new(&inst).run(e, 6) {
            for w in states.windows(2) {
                prop_assert!(w[1].resonant.is_subset(&w[0].resonant));
                prop_assert_eq!(w[1].k, w[0].k + 1);
            }
        }
    }

    #[test]
    fn traces_keep_window_nesting(seed in any::<u64>()) {
        let lat = Lattice::new(vec![6]).unwrap();
        let inst = Instance::new(DisorderField::sample(lat, seed, 0), ModelParams::new(1e-3).unwrap());
        let f = EnergyFollower::new(&inst, FollowOptions::default());
        let sc = *f.constants();
        let (_, traces) = f.sweep_all_eigenvalues().unwrap();
        for t in traces.iter().filter(|t| t.is_converged()) {
            for j in 0..t.energies.len() {
                for k in j + 1..t.energies.len() {
                    prop_assert!((t.energies[k] - t.energies[j]).abs() < sc.eps_k(j + 1) / 2.0);
                }
                if j + 1 < t.energies.len() {
                    prop_assert!((t.energies[j + 1] - t.energies[j]).abs() <= sc.eps_k(j + 1) / 3.0);
                }
            }
        }
    }

    #[test]
    fn spacing_cdf_is_monotone(seed in any::<u64>()) {
        let lat = Lattice::new(vec![4]).unwrap();
        let p = ModelParams::new(1e-3).unwrap();
        let grid = [1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3, 1.0];
        let cdf = estimate_min_spacing_cdf(&lat, &p, &grid, 100, seed).unwrap();
        prop_assert!(cdf.windows(2).all(|w| w[0].value <= w[1].value));
    }
}

#[test]
fn estimators_are_deterministic() {
    let lat = Lattice::new(vec![8]).unwrap();
    let p = ModelParams::new(1e-3).unwrap();
    let a = estimate_dos(&lat, &p, 1.1, 0.1, 300, 5).unwrap();
    let b = estimate_dos(&lat, &p, 1.1, 0.1, 300, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(DisorderField::sample(lat.clone(), 1, 2), DisorderField::sample(lat, 1, 2));
}
