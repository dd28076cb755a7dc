//! Randomized invariants.

use pfsense::amisim::{read_ami_csv, write_ami_csv, AmiSeries};
use pfsense::estimation::{single_bus_lsq, tikhonov_fit, tikhonov_objective, AmiDeltas};
use pfsense::lowrank::{complete_nuclear, MaskedMatrix};
use pfsense::netmodel::{
    build_admittance, case_to_json, parse_json_case, Branch, Bus, BusKind, Generator, NetworkCase,
};
use pfsense::numkit::{eigenvalues, read_matrix_csv, spectral_norm, svt, write_matrix_csv};
use pfsense::observability::{alpha_min_curve_for, k_inverse, k_of_alpha};
use pfsense::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(rows: usize, cols: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_case(n: usize, seed: u64, taps: bool) -> NetworkCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buses = (0..n)
        .map(|i| Bus {
            id: i as i64 + 1,
            kind: if i == 0 { BusKind::Slack } else { BusKind::Pq },
            p_load: rng.random_range(0.0..20.0),
            q_load: rng.random_range(-5.0..10.0),
            g_shunt: rng.random_range(0.0..0.5),
            b_shunt: rng.random_range(-1.0..1.0),
            v_init: 1.0,
            theta_init: 0.0,
            base_kv: 12.47,
        })
        .collect();
    let mut branches = Vec::new();
    let edge = |rng: &mut ChaCha8Rng, f: usize, t: usize| Branch {
        from_bus: f as i64 + 1,
        to_bus: t as i64 + 1,
        r: rng.random_range(0.001..0.05),
        x: rng.random_range(0.01..0.2),
        b_charging: rng.random_range(0.0..0.05),
        tap: if taps { rng.random_range(0.9..1.1) } else { 0.0 },
        shift: 0.0,
        status: rng.random_bool(0.9) || t == f + 1,
    };
    for t in 1..n {
        let f = rng.random_range(0..t);
        branches.push(edge(&mut rng, f, t));
    }
    for _ in 0..n / 2 {
        let (f, t) = (rng.random_range(0..n), rng.random_range(0..n));
        if f != t {
            branches.push(edge(&mut rng, f, t));
        }
    }
    let gens = vec![Generator { bus: 1, p_gen: 0.0, q_gen: 0.0, v_set: 1.0, status: true }];
    NetworkCase::new(format!("random{seed}"), 100.0, buses, branches, gens).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_norm_is_submultiplicative(seed in any::<u64>(), m in 1usize..7, k in 1usize..7, n in 1usize..7) {
        let a = uniform(m, k, seed);
        let b = uniform(k, n, seed.wrapping_add(1));
        prop_assert!(spectral_norm(&(&a * &b)) <= spectral_norm(&a) * spectral_norm(&b) * (1.0 + 1e-12));
    }

    #[test]
    fn svt_soft_thresholds_diagonals(d in prop::array::uniform3(-3.0f64..3.0), tau in 0.0f64..2.0) {
        let x = svt(&Mat::from_diagonal(&nalgebra::DVector::from_row_slice(&d)), tau);
        for i in 0..3 {
            let want = d[i].signum() * (d[i].abs() - tau).max(0.0);
            prop_assert!((x[(i, i)] - want).abs() < 1e-12);
            for j in 0..3 {
                if i != j {
                    prop_assert!(x[(i, j)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn k_inverse_undoes_k(alpha in 1e-3f64..=1.0) {
        prop_assert!((k_inverse(k_of_alpha(alpha).unwrap()) - alpha).abs() < 1e-12);
    }

    #[test]
    fn alpha_curve_is_nondecreasing(dk in 0.0f64..5.0, pts in 2usize..60) {
        let grid: Vec<f64> = (1..=pts).map(|i| i as f64 / pts as f64).collect();
        let c = alpha_min_curve_for(dk, &grid).unwrap();
        prop_assert!(c.windows(2).all(|w| w[0].1 <= w[1].1 + 1e-15));
        prop_assert!(c.iter().all(|(a, b)| b <= a));
    }

    #[test]
    fn single_bus_matches_cramer(seed in any::<u64>(), rows in 2usize..8) {
        let s = uniform(rows, 2, seed);
        let dv = uniform(rows, 1, seed ^ 7);
        let (a11, a12, a22) = (s.column(0).dot(&s.column(0)), s.column(0).dot(&s.column(1)), s.column(1).dot(&s.column(1)));
        let (b1, b2) = (s.column(0).dot(&dv.column(0)), s.column(1).dot(&dv.column(0)));
        let det = a11 * a22 - a12 * a12;
        prop_assume!(det > 1e-6);
        let (x, y) = single_bus_lsq(&s, dv.as_slice()).unwrap();
        prop_assert!((x - (a22 * b1 - a12 * b2) / det).abs() < 1e-12 * (1.0 + x.abs()));
        prop_assert!((y - (a11 * b2 - a12 * b1) / det).abs() < 1e-12 * (1.0 + y.abs()));
    }

    #[test]
    fn matrix_csv_round_trips(seed in any::<u64>(), m in 1usize..6, n in 1usize..6, scale in -300i32..300) {
        let a = uniform(m, n, seed) * 10f64.powi(scale);
        prop_assert_eq!(read_matrix_csv(&write_matrix_csv(&a)).unwrap(), a);
    }

    #[test]
    fn ami_csv_round_trips(seed in any::<u64>(), m in 1usize..5, n in 1usize..5) {
        let s = AmiSeries {
            m,
            n,
            buses: (0..n as i64).map(|b| 3 * b + 2).collect(),
            v: uniform(m, n, seed).add_scalar(1.0),
            p: uniform(m, n, seed ^ 1),
            q: uniform(m, n, seed ^ 2),
            noise_sigma: 0.0,
            seed: 0,
            step_minutes: 15.0,
        };
        let back = read_ami_csv(&write_ami_csv(&s)).unwrap();
        prop_assert_eq!(&back.buses, &s.buses);
        prop_assert_eq!((&back.v, &back.p, &back.q), (&s.v, &s.p, &s.q));
    }

    #[test]
    fn case_json_round_trips(seed in any::<u64>(), n in 2usize..9, taps in any::<bool>()) {
        let case = random_case(n, seed, taps);
        prop_assert_eq!(parse_json_case(&case_to_json(&case)).unwrap(), case);
    }

    #[test]
    fn untapped_admittance_is_symmetric(seed in any::<u64>(), n in 2usize..9) {
        let y = build_admittance(&random_case(n, seed, false)).unwrap();
        prop_assert!((&y.g - y.g.transpose()).amax() == 0.0);
        prop_assert!((&y.b - y.b.transpose()).amax() == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn eigenvalues_of_transpose_agree(seed in any::<u64>()) {
        let a = uniform(20, 20, seed);
        let key = |z: &pfsense::C64| (z.re, z.im.abs());
        let mut e: Vec<_> = eigenvalues(&a).unwrap().iter().map(key).collect();
        let mut f: Vec<_> = eigenvalues(&a.transpose()).unwrap().iter().map(key).collect();
        e.sort_by(|x, y| x.partial_cmp(y).unwrap());
        f.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in e.iter().zip(&f) {
            prop_assert!((x.0 - y.0).abs() < 1e-8 && (x.1 - y.1).abs() < 1e-8, "{:?} {:?}", x, y);
        }
    }

    #[test]
    fn ridge_fit_is_a_minimizer(seed in any::<u64>(), n in 1usize..4, extra in 0usize..6, lambda in 0.0f64..1.0) {
        let dx = uniform(2 * n + extra + 1, 2 * n, seed);
        let dv = uniform(2 * n + extra + 1, n, seed ^ 3);
        let d = AmiDeltas { dp: dx.columns(0, n).into_owned(), dq: dx.columns(n, n).into_owned(), dx, dv };
        let s = tikhonov_fit(&d, Some(lambda)).unwrap();
        let best = tikhonov_objective(&d, &s, lambda);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let e = Mat::from_fn(n, 2 * n, |_, _| rng.random_range(-1.0..1.0));
            let e = e.normalize() * 1e-3;
            prop_assert!(tikhonov_objective(&d, &(&s + e), lambda) >= best - 1e-12 * best.max(1.0));
        }
    }

    #[test]
    fn nuclear_objective_never_increases(seed in any::<u64>(), frac in 0.2f64..0.9, lambda in 1e-4f64..0.5) {
        let truth = uniform(5, 10, seed);
        let mm = MaskedMatrix::sample(&truth, frac, seed).unwrap();
        let r = complete_nuclear(&mm, lambda, 0.02, 300, 1e-12).unwrap();
        prop_assert!(r.max_objective_increase() <= 0.0);
        prop_assert!(mm.known_deviation(&r.s_hat) <= 0.02 + 1e-12);
    }
}
