use std::f64::consts::PI;

use faer::Mat;
use proptest::prelude::*;
use qce_core::amol::{build_hamiltonian, AmolParams, LatticeGrid, SpinScale};
use qce_core::entanglement::{linear_entropy, partial_trace, purity, Bipartition};
use qce_core::kicked_top::{floquet_operator, KickedTopParams, PairReducer};
use qce_core::linalg::{self, commutator, expm_hermitian, max_abs, unitarity_residual};
use qce_core::spin::{build_spin_operators, SpinSpace};
use qce_core::C64;

fn state(d: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d).prop_filter_map("zero vector", |v| {
        let mut psi: Vec<C64> = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        (linalg::norm(&psi) > 1e-3).then(|| {
            linalg::normalize(&mut psi);
            psi
        })
    })
}

fn hermitian(d: usize) -> impl Strategy<Value = Mat<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_map(move |v| {
        let a = Mat::from_fn(d, d, |r, c| C64::new(v[r * d + c].0, v[r * d + c].1));
        Mat::from_fn(d, d, |r, c| 0.5 * (a[(r, c)] + a[(c, r)].conj()))
    })
}

fn kron_apply(u1: &Mat<C64>, u2: &Mat<C64>, psi: &[C64]) -> Vec<C64> {
    let (d1, d2) = (u1.nrows(), u2.nrows());
    let mut out = vec![C64::new(0.0, 0.0); d1 * d2];
    for a in 0..d1 {
        for b in 0..d2 {
            for c in 0..d1 {
                for d in 0..d2 {
                    out[a * d2 + b] += u1[(a, c)] * u2[(b, d)] * psi[c * d2 + d];
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_stays_within_bounds(psi in state(12)) {
        for (dims, keep) in [((3, 4), 0), ((3, 4), 1), ((2, 6), 0)] {
            let bip = Bipartition::Tensor { dims, keep };
            let s = bip.entropy(&psi).unwrap();
            prop_assert!(s >= 0.0 && s <= bip.max_entropy() + 1e-12, "S = {} for dims {:?}", s, dims);
        }
    }

    #[test]
    fn subsystem_purities_agree(psi in state(15)) {
        let a = purity(partial_trace(&psi, (3, 5), 0).unwrap().as_ref()).unwrap();
        let b = purity(partial_trace(&psi, (3, 5), 1).unwrap().as_ref()).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn local_unitaries_leave_entropy_unchanged(psi in state(12), h1 in hermitian(3), h2 in hermitian(4), t in -3.0f64..3.0) {
        let u1 = expm_hermitian(h1.as_ref(), t).unwrap();
        let u2 = expm_hermitian(h2.as_ref(), -0.7 * t).unwrap();
        let moved = kron_apply(&u1, &u2, &psi);
        let before = linear_entropy(partial_trace(&psi, (3, 4), 0).unwrap().as_ref()).unwrap();
        let after = linear_entropy(partial_trace(&moved, (3, 4), 0).unwrap().as_ref()).unwrap();
        prop_assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn pair_entropy_is_bounded(psi in state(9)) {
        let bip = Bipartition::QubitPair(PairReducer::new(SpinSpace::from_twice(8).unwrap()).unwrap());
        let s = bip.entropy(&psi).unwrap();
        prop_assert!((0.0..=0.75 + 1e-12).contains(&s));
    }

    #[test]
    fn su2_algebra_holds(twice_f in 1u32..=40) {
        let ops = build_spin_operators(SpinSpace::from_twice(twice_f).unwrap());
        let i = C64::new(0.0, 1.0);
        let [x, y, z] = ops.components();
        let cyc = [(x, y, z), (y, z, x), (z, x, y)];
        for (a, b, c) in cyc {
            let lhs = commutator(a, b);
            let rhs = Mat::from_fn(c.nrows(), c.ncols(), |r, k| i * c[(r, k)]);
            prop_assert!(max_abs((&lhs - &rhs).as_ref()) < 1e-12);
        }
    }

    #[test]
    fn floquet_operators_are_unitary(kappa in 0.0f64..10.0, p_rot in 0.0f64..PI, twice_j in 2u32..=60) {
        let p = KickedTopParams::new(kappa, p_rot, 1.0, twice_j as f64 / 2.0).unwrap();
        prop_assert!(unitarity_residual(floquet_operator(&p).unwrap().as_ref()) < 1e-10);
    }
}

#[test]
fn lattice_propagator_is_unitary() {
    let params = AmolParams::cesium_reference(SpinScale::Full);
    let h = build_hamiltonian(&params, &LatticeGrid::new(128, 1).unwrap()).unwrap();
    for t in [1e-3, 0.05, 0.3] {
        let u = expm_hermitian(h.as_ref(), t).unwrap();
        assert!(unitarity_residual(u.as_ref()) < 1e-10);
    }
}
