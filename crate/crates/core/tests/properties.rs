use nbmf_core::anneal::{solve_exact, solve_pgd_round, solve_ra, AnnealSchedule, ExactConfig};
use nbmf_core::io::{format_matrix, parse_matrix};
use nbmf_core::metrics::{hamming, histogram};
use nbmf_core::model::{column_error, BinaryVector, Matrix, NonnegMatrix, RngSpec};
use nbmf_core::pgd::PgdConfig;
use nbmf_core::qubo::{build_qubo, qubo_to_ising, spin_of, QuboInstance};
use proptest::prelude::*;

fn bits_of(code: u32, k: usize) -> BinaryVector {
    BinaryVector::from_bools((0..k).map(|i| code >> i & 1 == 1))
}

fn column_problem(max_k: usize) -> impl Strategy<Value = (NonnegMatrix, Vec<f64>)> {
    (1..=max_k, 1usize..=8).prop_flat_map(|(k, m)| {
        (
            prop::collection::vec(0.0..3.0f64, m * k),
            prop::collection::vec(0.0..5.0f64, m),
        )
            .prop_map(move |(w, v)| (NonnegMatrix::new(m, k, w).unwrap(), v))
    })
}

fn binary(len: usize) -> impl Strategy<Value = BinaryVector> {
    prop::collection::vec(any::<bool>(), len).prop_map(BinaryVector::from_bools)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qubo_energy_plus_offset_is_the_residual((w, v) in column_problem(8)) {
        let q = build_qubo(&w, &v).unwrap();
        let k = w.cols();
        for code in 0..(1u32 << k) {
            let h = bits_of(code, k);
            let lhs = q.energy(&h).unwrap() + q.offset();
            let rhs = column_error(w.as_matrix(), &v, &h.to_f64()).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0), "{} vs {}", lhs, rhs);
        }
    }

    #[test]
    fn ising_shares_the_argmin((w, v) in column_problem(7)) {
        let q = build_qubo(&w, &v).unwrap();
        let ising = qubo_to_ising(&q);
        let k = q.size();
        let mut best = (f64::INFINITY, 0u32);
        for code in 0..(1u32 << k) {
            let h = bits_of(code, k);
            let spins: Vec<i8> = h.bits().iter().map(|&b| spin_of(b)).collect();
            let e_q = q.energy(&h).unwrap();
            let e_s = ising.energy(&spins).unwrap();
            prop_assert!((e_q - e_s).abs() <= 1e-9 * e_q.abs().max(1.0));
            if e_q < best.0 {
                best = (e_q, code);
            }
        }
        let exact = solve_exact(&q, &ExactConfig::default()).unwrap();
        prop_assert!(exact.best_energy <= best.0 + 1e-9 * best.0.abs().max(1.0));
    }

    #[test]
    fn hamming_is_a_metric(x in binary(12), y in binary(12), z in binary(12)) {
        let d = |a: &BinaryVector, b: &BinaryVector| hamming(a, b).unwrap();
        prop_assert_eq!(d(&x, &x), 0);
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z));
        prop_assert_eq!(d(&x, &y) == 0, x == y);
    }

    #[test]
    fn histogram_conserves_count(values in prop::collection::vec(0.0..=1.0f64, 0..200), bins in 1usize..30) {
        let h = histogram(&values, bins).unwrap();
        prop_assert_eq!(h.iter().sum::<usize>(), values.len());
    }

    #[test]
    fn csv_round_trip(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let mut rng = RngSpec::new(seed, 0).rng();
        let m = Matrix::from_fn(rows, cols, |_, _| rand::Rng::random::<f64>(&mut rng) * 1e3 - 5e2);
        let back = parse_matrix(format_matrix(&m).as_bytes()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn qubo_text_round_trip((w, v) in column_problem(6)) {
        let q = build_qubo(&w, &v).unwrap();
        let back = QuboInstance::parse_text(&q.to_text()).unwrap();
        for code in 0..(1u32 << q.size()) {
            let h = bits_of(code, q.size());
            let (a, b) = (q.energy(&h).unwrap(), back.energy(&h).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        prop_assert_eq!(back.offset(), q.offset());
    }

    #[test]
    fn ra_never_worsens((w, v) in column_problem(10), seed in any::<u64>(), d in 0.0..=1.0f64) {
        let q = build_qubo(&w, &v).unwrap();
        let mut rng = RngSpec::new(seed, 1).rng();
        let init = BinaryVector::from_bools((0..q.size()).map(|_| rand::Rng::random::<bool>(&mut rng)));
        let schedule = AnnealSchedule { reads: 2, sweeps_total: 12, reversal_distance: d, ..AnnealSchedule::reverse_default() };
        let out = solve_ra(&q, &init, &schedule, RngSpec::new(seed, 2)).unwrap();
        prop_assert!(out.best_energy <= q.energy(&init).unwrap());
    }
}

#[test]
fn relaxation_beats_random_feasible_points() {
    for seed in 0..20 {
        let mut rng = RngSpec::new(seed, 3).rng();
        let (m, k) = (12, 5);
        let w = NonnegMatrix::new(m, k, (0..m * k).map(|_| rand::Rng::random::<f64>(&mut rng)).collect()).unwrap();
        let v: Vec<f64> = (0..m).map(|_| 3.0 * rand::Rng::random::<f64>(&mut rng)).collect();
        let (_, relaxed) = solve_pgd_round(&w, &v, None, &PgdConfig::default()).unwrap();
        let f_star = column_error(w.as_matrix(), &v, &relaxed).unwrap();
        for _ in 0..2000 {
            let x: Vec<f64> = (0..k).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let f = column_error(w.as_matrix(), &v, &x).unwrap();
            assert!(f_star <= f + 1e-9, "seed {seed}: {f_star} > {f}");
        }
    }
}

#[test]
fn orthonormal_basis_relaxation_is_a_clip() {
    // Disjoint nonnegative supports give orthonormal columns; the box optimum is clip(Wᵀv).
    let s = 0.5_f64.sqrt();
    let w = NonnegMatrix::from_rows(&[
        vec![s, 0.0, 0.0],
        vec![s, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.6],
        vec![0.0, 0.0, 0.8],
    ])
    .unwrap();
    for v in [
        vec![0.3, 0.1, 2.0, 0.0, 0.5],
        vec![0.0, 0.0, 0.0, 0.0, 0.0],
        vec![1.0, 1.0, 0.4, 0.2, 0.1],
    ] {
        let wtv = w.as_matrix().t_mul_vec(&v).unwrap();
        let expected: Vec<f64> = wtv.iter().map(|x| x.clamp(0.0, 1.0)).collect();
        let (_, relaxed) = solve_pgd_round(&w, &v, None, &PgdConfig::default()).unwrap();
        for (a, b) in relaxed.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-6, "{relaxed:?} vs {expected:?}");
        }
    }
}

#[test]
fn gamma_matches_the_analytic_cdf() {
    use statrs::distribution::{ContinuousCDF, Gamma};
    let n = 20_000;
    for (i, rho) in [0.5, 10.0].into_iter().enumerate() {
        let mut x = nbmf_core::datagen::sample_gamma(rho, 1.0, n, RngSpec::new(40 + i as u64, 0)).unwrap();
        x.sort_by(f64::total_cmp);
        let cdf = Gamma::new(rho, 1.0).unwrap();
        let ks = x
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let f = cdf.cdf(v);
                (f - j as f64 / n as f64).abs().max(((j + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        let critical = 1.628 / (n as f64).sqrt();
        assert!(ks < critical, "rho {rho}: D = {ks} >= {critical}");
    }
}
