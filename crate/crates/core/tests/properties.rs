use std::sync::Arc;

use proptest::prelude::*;

use lrising::cluster::xi_site;
use lrising::contour::{group_contours, group_contours_shuffled, group_triangles};
use lrising::geometry::{external_large, ground_state_of, reconstruct_spins};
use lrising::intervals::{family_energy, interval_family_energy, merge_gain, Interval};
use lrising::sampler::{transition_probability, Dynamics, EnsembleSpec};
use lrising::spins::bulk_energy;
use lrising::{build_kernel, build_triangles, hamiltonian, Kernel, ModelParams, SpinConfig, Triangle};

fn spins(max_l: usize) -> impl Strategy<Value = Vec<i8>> {
    (0..=max_l).prop_flat_map(|l| prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 2 * l + 1))
}

fn kernel(l: usize, alpha: f64, j: f64) -> Arc<Kernel> {
    Arc::new(Kernel::with_range(alpha, j, 2 * l + 2))
}

/// Ordered, disjoint intervals inside `[-l, l]` with at least one plus site between them.
fn intervals(l: i64) -> impl Strategy<Value = Vec<Interval>> {
    prop::collection::btree_set(-l..=l, 2..10).prop_map(|pts| {
        let pts: Vec<i64> = pts.into_iter().collect();
        let mut out: Vec<Interval> = Vec::new();
        for w in pts.chunks_exact(2) {
            let iv = Interval::new(w[0], w[1]);
            if out.last().map_or(true, |p| p.hi + 1 < iv.lo) {
                out.push(iv);
            }
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn energy_nonnegative_zero_only_all_plus(s in spins(7), alpha in 0.05f64..0.55, j in 0.0f64..20.0) {
        let l = s.len() / 2;
        let h = hamiltonian(&s, &kernel(l, alpha, j));
        if s.iter().all(|&x| x == 1) {
            prop_assert!(h.abs() < 1e-12);
        } else {
            prop_assert!(h > 0.0);
        }
    }

    #[test]
    fn energy_is_affine_in_j(s in spins(7), j in 0.0f64..20.0) {
        let l = s.len() / 2;
        let flips = build_triangles(&s).len() as f64 * 2.0;
        let h0 = hamiltonian(&s, &kernel(l, 0.3, 0.0));
        let h = hamiltonian(&s, &kernel(l, 0.3, j));
        prop_assert!((h - h0 - j * flips).abs() < 1e-9 * h.max(1.0));
    }

    #[test]
    fn bulk_term_is_flip_symmetric(s in spins(8)) {
        let l = s.len() / 2;
        let k = kernel(l, 0.3, 10.0);
        let neg: Vec<i8> = s.iter().map(|&x| -x).collect();
        prop_assert!((bulk_energy(&s, &k) - bulk_energy(&neg, &k)).abs() < 1e-9);
    }

    #[test]
    fn flip_delta_matches_recomputation(s in spins(10), site in any::<prop::sample::Index>()) {
        let l = s.len() / 2;
        let k = kernel(l, 0.3, 10.0);
        let mut c = SpinConfig::from_spins(s.clone(), k.clone()).unwrap();
        let idx = site.index(s.len());
        let before = hamiltonian(&s, &k);
        let d = c.flip_at(idx);
        let after = hamiltonian(c.spins(), &k);
        prop_assert!((after - before - d).abs() < 1e-9 * after.abs().max(1.0));
        let back = c.flip_at(idx);
        prop_assert!((d + back).abs() < 1e-12 * d.abs().max(1.0));
        prop_assert!(c.cache_drift() < 1e-12);
    }

    #[test]
    fn interval_energy_is_hamiltonian(f in intervals(20)) {
        let k = kernel(20, 0.3, 10.0);
        let e = interval_family_energy(&f, &k, 20).unwrap().total;
        let s = lrising::intervals::intervals_to_spins(&f, 20).unwrap();
        prop_assert!((e - hamiltonian(&s, &k)).abs() < 1e-9 * e.max(1.0));
    }

    #[test]
    fn merging_lowers_energy(f in intervals(300)) {
        prop_assume!(f.len() >= 2);
        let k = kernel(300, 0.3, 10.0);
        prop_assert!(merge_gain(&f, &k) > 0.0);
        let e = family_energy(&f, &k);
        for g in 1..f.len() {
            if f[g].lo - f[g - 1].hi > 2 {
                let moved: Vec<Interval> = f.iter().enumerate()
                    .map(|(q, iv)| if q >= g { Interval::new(iv.lo - 1, iv.hi - 1) } else { *iv })
                    .collect();
                prop_assert!(family_energy(&moved, &k) < e);
            }
        }
    }

    #[test]
    fn triangles_round_trip(s in spins(40)) {
        let l = s.len() / 2;
        let f = build_triangles(&s);
        prop_assert_eq!(reconstruct_spins(&f, l).unwrap(), s.clone());
        prop_assert!(f.invariants_hold());
        prop_assert_eq!(build_triangles(&s), f);
    }

    #[test]
    fn external_large_are_external_and_large(s in spins(30), thr in 0.0f64..8.0) {
        let f = build_triangles(&s);
        let e = external_large(&f, thr);
        for t in &e {
            prop_assert!(t.mass() as f64 > thr);
            prop_assert!(f.triangles().iter().all(|u| !u.contains(t)));
        }
        for (k, t) in f.triangles().iter().enumerate() {
            if f.is_external(k) && t.mass() as f64 > thr {
                prop_assert!(e.contains(t));
            }
        }
    }

    #[test]
    fn contours_partition_and_separate(s in spins(60)) {
        let f = build_triangles(&s);
        let g = group_contours(&f, 14.0);
        let mut all = g.all_triangles();
        all.sort();
        prop_assert_eq!(&all[..], f.triangles());
        prop_assert!(g.violations().is_empty());
    }

    #[test]
    fn contours_do_not_depend_on_merge_order(s in spins(40), seed in any::<u64>()) {
        let f = build_triangles(&s);
        prop_assert_eq!(group_contours_shuffled(&f, 14.0, seed), group_contours(&f, 14.0));
    }

    #[test]
    fn contours_are_local(a in spins(6), b in spins(6)) {
        // two blocks far apart group independently
        let fa = build_triangles(&a);
        let fb = build_triangles(&b);
        let ma = fa.total_mass().max(1);
        let mb = fb.total_mass().max(1);
        let shift = (14 * (ma + mb).pow(3)) as i64 + 40;
        let moved: Vec<Triangle> = fb.triangles().iter().map(|t| Triangle::new(t.i + shift, t.j + shift)).collect();
        let mut union = fa.triangles().to_vec();
        union.extend(&moved);
        let g = group_triangles(&union, 14.0);
        let ga = group_triangles(fa.triangles(), 14.0);
        let gb = group_triangles(&moved, 14.0);
        prop_assert_eq!(g.len(), ga.len() + gb.len());
        for c in ga.contours.iter().chain(&gb.contours) {
            prop_assert!(g.contours.contains(c));
        }
    }

    #[test]
    fn ground_state_of_single_triangle(lo in -6i64..6, len in 1i64..6) {
        let hi = (lo + len - 1).min(6);
        let t = Triangle::from_base(lo, hi);
        let s = ground_state_of(&[t], 6).unwrap();
        for (k, &x) in s.iter().enumerate() {
            let site = k as i64 - 6;
            prop_assert_eq!(x, if site >= lo && site <= hi { -1 } else { 1 });
        }
    }

    #[test]
    fn xi_site_is_flip_weight(lo in -7i64..4, len in 1i64..6, x in -9i64..=9, beta in 0.1f64..2.0) {
        let hi = (lo + len - 1).min(8);
        let t = Triangle::from_base(lo, hi);
        prop_assume!(!t.in_sf(x));
        let p = ModelParams::new(0.3, 5.0, beta, 9).unwrap();
        let k = Arc::new(build_kernel(&p).unwrap());
        let c = SpinConfig::from_spins(ground_state_of(&[t], 9).unwrap(), k).unwrap();
        let expect = (-beta * c.flip_delta(x as isize).unwrap()).exp();
        let got = xi_site(x, &[t], &p).unwrap();
        prop_assert!((got / expect - 1.0).abs() < 1e-10);
    }

    #[test]
    fn metropolis_is_reversible(s in spins(6), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>(), beta in 0.0f64..2.0) {
        let l = s.len() / 2;
        let k = kernel(l, 0.3, 2.0);
        let c = SpinConfig::from_spins(s.clone(), k).unwrap();
        let (x, y) = (a.index(s.len()), b.index(s.len()));
        let free = EnsembleSpec::free(1, 0);
        let mut d = c.clone();
        d.flip_at(x);
        let dh = d.energy() - c.energy();
        let fwd = transition_probability(&c, &free, beta, x, None);
        let back = transition_probability(&d, &free, beta, x, None);
        prop_assert!((fwd / back - (-beta * dh).exp()).abs() < 1e-10 * (-beta * dh).exp().max(1.0));
        if s[x] != s[y] {
            let ex = EnsembleSpec { dynamics: Dynamics::FixedExchange, ..free };
            let mut e = c.clone();
            e.flip_at(x);
            e.flip_at(y);
            prop_assert_eq!(e.total_spin(), c.total_spin());
            let dh = e.energy() - c.energy();
            let fwd = transition_probability(&c, &ex, beta, x, Some(y));
            let back = transition_probability(&e, &ex, beta, x, Some(y));
            prop_assert!((fwd / back - (-beta * dh).exp()).abs() < 1e-10 * (-beta * dh).exp().max(1.0));
        }
    }
}

#[test]
fn energy_positive_on_every_l7_configuration() {
    let k = kernel(7, 0.3, 10.0);
    for code in 1u32..1 << 15 {
        let s: Vec<i8> = (0..15).map(|b| if code >> b & 1 == 1 { -1 } else { 1 }).collect();
        assert!(hamiltonian(&s, &k) > 0.0, "{code}");
    }
    assert!(hamiltonian(&[1; 15], &k).abs() < 1e-12);
}
