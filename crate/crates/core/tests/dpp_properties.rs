use dppmc::dpp::{
    all_subsets, combinations, conditional_inclusion, elementary_symmetric, enumerate_k_dpp_distribution,
    lensemble_subset_probability, marginal_inclusion_probability, sample_dpp, sample_k_dpp,
};
use dppmc::rng::seeded;
use dppmc::{LEnsemble, MarginalKernel};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn minor(m: &DMatrix<f64>, s: &[usize]) -> f64 {
    if s.is_empty() {
        return 1.0;
    }
    DMatrix::from_fn(s.len(), s.len(), |a, b| m[(s[a], s[b])]).determinant()
}

/// L = A Aᵀ with A of shape n × n, entries from the strategy.
fn ensemble() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..=6).prop_flat_map(|n| {
        prop::collection::vec(-1.5f64..1.5, n * n).prop_map(move |v| {
            let a = DMatrix::from_vec(n, n, v);
            &a * a.transpose()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn minors_sum_to_normalizer(m in ensemble()) {
        let n = m.nrows();
        let total: f64 = all_subsets(n).iter().map(|s| minor(&m, s)).sum();
        let det = (&m + DMatrix::identity(n, n)).determinant();
        prop_assert!((total - det).abs() <= 1e-9 * det);

        let l = LEnsemble::new(m.clone()).unwrap();
        let p: f64 = all_subsets(n).iter().map(|s| lensemble_subset_probability(&l, s).unwrap()).sum();
        prop_assert!((p - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn marginal_minors_match_subset_law(m in ensemble()) {
        let n = m.nrows();
        let det = (&m + DMatrix::identity(n, n)).determinant();
        let k = LEnsemble::new(m.clone()).unwrap().to_marginal();
        for a in all_subsets(n) {
            let oracle: f64 = all_subsets(n)
                .iter()
                .filter(|s| a.iter().all(|i| s.contains(i)))
                .map(|s| minor(&m, s) / det)
                .sum();
            let got = marginal_inclusion_probability(&k, &a).unwrap();
            prop_assert!((got - oracle).abs() <= 1e-9, "A={:?}: {} vs {}", a, got, oracle);
        }
    }

    #[test]
    fn kernel_round_trip(m in ensemble()) {
        let n = m.nrows();
        let shifted = &m + DMatrix::identity(n, n) * 0.1;
        let l = LEnsemble::new(shifted.clone()).unwrap();
        let k = l.to_marginal();
        let oracle = &shifted * (&shifted + DMatrix::identity(n, n)).try_inverse().unwrap();
        prop_assert!((k.matrix() - &oracle).amax() <= 1e-9);
        let back = k.to_l_ensemble().unwrap();
        prop_assert!((back.matrix() - &shifted).amax() <= 1e-6 * shifted.amax().max(1.0));
    }

    #[test]
    fn elementary_symmetric_matches_brute_force(values in prop::collection::vec(0.0f64..3.0, 1..8)) {
        let n = values.len();
        let table = elementary_symmetric(&values, n).unwrap();
        for (k, row) in table.iter().enumerate() {
            let brute: f64 = combinations(n, k).iter().map(|s| s.iter().map(|&i| values[i]).product::<f64>()).sum();
            prop_assert!((row[n] - brute).abs() <= 1e-10 * brute.max(1.0));
        }
    }

    #[test]
    fn k_dpp_law_is_normalized_minors(m in ensemble(), pick in 0usize..6) {
        let n = m.nrows();
        let k = 1 + pick % n;
        let l = LEnsemble::new(m.clone()).unwrap();
        let law = enumerate_k_dpp_distribution(&l, k).unwrap();
        let total: f64 = combinations(n, k).iter().map(|s| minor(&m, s)).sum();
        for s in combinations(n, k) {
            prop_assert!((law[&s] - minor(&m, &s) / total).abs() <= 1e-9);
        }
    }

    #[test]
    fn k_dpp_draws_have_k_distinct_items(m in ensemble(), pick in 0usize..6, seed in any::<u64>()) {
        let n = m.nrows();
        let k = 1 + pick % n;
        let l = LEnsemble::new(m).unwrap();
        let mut rng = seeded(seed);
        for _ in 0..20 {
            let mut s = sample_k_dpp(&l, k, &mut rng).unwrap();
            prop_assert_eq!(s.len(), k);
            s.sort_unstable();
            s.dedup();
            prop_assert_eq!(s.len(), k);
            prop_assert!(s.iter().all(|&i| i < n));
        }
    }

    #[test]
    fn conditioning_never_raises_inclusion(m in ensemble()) {
        let k = LEnsemble::new(m).unwrap().to_marginal();
        let n = k.n_items();
        for i in 0..n {
            for j in 0..n {
                if i != j && k.matrix()[(j, j)] > 1e-9 {
                    let cond = conditional_inclusion(&k, i, j).unwrap();
                    prop_assert!(cond <= k.matrix()[(i, i)] + 1e-9);
                }
            }
        }
    }
}

#[test]
fn marginal_sampler_inclusion_frequencies() {
    let k = MarginalKernel::new(DMatrix::from_row_slice(
        3,
        3,
        &[0.6, 0.2, 0.1, 0.2, 0.5, 0.0, 0.1, 0.0, 0.3],
    ))
    .unwrap();
    let draws = 100_000;
    let mut rng = seeded(5);
    let mut hits = [0usize; 3];
    let mut pair01 = 0usize;
    for _ in 0..draws {
        let s = sample_dpp(&k, &mut rng);
        for &i in &s {
            hits[i] += 1;
        }
        if s.contains(&0) && s.contains(&1) {
            pair01 += 1;
        }
    }
    for (i, &hit) in hits.iter().enumerate() {
        let p = k.matrix()[(i, i)];
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((hit as f64 / draws as f64 - p).abs() <= 4.0 * se);
    }
    let p01 = 0.6 * 0.5 - 0.2 * 0.2;
    let se = (p01 * (1.0 - p01) / draws as f64).sqrt();
    assert!((pair01 as f64 / draws as f64 - p01).abs() <= 4.0 * se);
}
