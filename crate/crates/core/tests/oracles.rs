//! Library results against independent reference computations.

use iboss_core::baselines::{draw, leverage_scores, make_plan, SubsamplingMethod};
use iboss_core::criteria::subsampling_lower_bound;
use iboss_core::estimation::{normal_quantile, ols_fit};
use iboss_core::select::quotas;
use iboss_core::{iboss_dopt, DataMatrix, Matrix, SelectionMode, SelectionSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Gauss-Jordan inverse with partial pivoting.
fn gauss_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let q = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..q).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..q {
        let piv = (c..q).max_by(|&x, &y| m[x][c].abs().partial_cmp(&m[y][c].abs()).unwrap()).unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..q {
            if r != c {
                let f = m[r][c];
                let pivot_row = m[c].clone();
                m[r].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    m.into_iter().map(|r| r[q..].to_vec()).collect()
}

fn design_row(data: &DataMatrix, i: usize) -> Vec<f64> {
    std::iter::once(1.0).chain((0..data.p()).map(|j| data.column(j)[i])).collect()
}

fn normal_equation_fit(data: &DataMatrix, rows: &[usize]) -> Vec<f64> {
    let q = data.p() + 1;
    let mut xtx = vec![vec![0.0; q]; q];
    let mut xty = vec![0.0; q];
    for &i in rows {
        let x = design_row(data, i);
        for a in 0..q {
            xty[a] += x[a] * data.response()[i];
            for b in 0..q {
                xtx[a][b] += x[a] * x[b];
            }
        }
    }
    let inv = gauss_inverse(&xtx);
    (0..q).map(|a| (0..q).map(|b| inv[a][b] * xty[b]).sum()).collect()
}

fn sorted_selection(cols: &[Vec<f64>], k: usize, sequential: bool) -> Vec<usize> {
    let n = cols[0].len();
    let mut taken = vec![false; n];
    let mut out = Vec::new();
    for (j, q) in quotas(k, cols.len()).into_iter().enumerate() {
        let mut rows: Vec<usize> = (0..n).filter(|&i| !(sequential && taken[i])).collect();
        rows.sort_by(|&a, &b| cols[j][a].partial_cmp(&cols[j][b]).unwrap().then(a.cmp(&b)));
        let (low, rest) = rows.split_at(q.lower);
        let mut rest = rest.to_vec();
        rest.sort_by(|&a, &b| cols[j][b].partial_cmp(&cols[j][a]).unwrap().then(a.cmp(&b)));
        for &i in low.iter().chain(&rest[..q.upper]) {
            taken[i] = true;
            out.push(i);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, usize)> {
    (1usize..5, 12usize..120).prop_flat_map(|(p, n)| {
        let cols = proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, n), p);
        let y = proptest::collection::vec(-10.0f64..10.0, n);
        (cols, y, (2 * p).max(p + 2)..=n)
    })
}

fn tied_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
    (1usize..5, 8usize..80).prop_flat_map(|(p, n)| {
        let cols = proptest::collection::vec(proptest::collection::vec(-3i8..3, n), p)
            .prop_map(|c| c.into_iter().map(|col| col.into_iter().map(f64::from).collect()).collect());
        (cols, 2 * p..=n)
    })
}

proptest! {
    #[test]
    fn subdata_ols_matches_normal_equations((cols, y, k) in instance()) {
        let data = DataMatrix::from_columns(cols, y).unwrap();
        let sub = iboss_dopt(&data, &SelectionSpec::new(k, SelectionMode::Sequential)).unwrap();
        let fit = ols_fit(&sub).unwrap();
        let oracle = normal_equation_fit(&data, sub.indices());
        let scale = oracle.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for (a, b) in fit.coefficients().iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn selection_matches_full_sort((cols, k) in tied_instance()) {
        let data = DataMatrix::from_columns(cols.clone(), vec![0.0; cols[0].len()]).unwrap();
        let seq = iboss_dopt(&data, &SelectionSpec::new(k, SelectionMode::Sequential)).unwrap();
        prop_assert_eq!(seq.indices().to_vec(), sorted_selection(&cols, k, true));
        let par = iboss_dopt(&data, &SelectionSpec::new(k, SelectionMode::ParallelMerge)).unwrap();
        prop_assert_eq!(par.indices().to_vec(), sorted_selection(&cols, k, false));
    }
}

fn fifty_by_two() -> DataMatrix {
    let z1: Vec<f64> = (0..50).map(|i| ((i * 17) % 50) as f64 / 10.0 - 2.0).collect();
    let z2: Vec<f64> = (0..50).map(|i| (((i * 7) % 23) as f64).sqrt() + 0.1 * i as f64).collect();
    DataMatrix::from_columns(vec![z1, z2], vec![0.0; 50]).unwrap()
}

fn outer_sum(data: &DataMatrix, weight: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
    let q = data.p() + 1;
    let mut s = vec![vec![0.0; q]; q];
    for i in 0..data.n() {
        let x = design_row(data, i);
        let w = weight(i);
        for a in 0..q {
            for b in 0..q {
                s[a][b] += w * x[a] * x[b];
            }
        }
    }
    s
}

fn assert_close(m: &Matrix, oracle: &[Vec<f64>], rel: f64) {
    let scale = oracle.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for (a, row) in oracle.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            assert!((m[(a, b)] - v).abs() <= rel * scale, "({a},{b}): {} vs {v}", m[(a, b)]);
        }
    }
}

#[test]
fn leverage_bound_has_hat_matrix_form() {
    let data = fifty_by_two();
    let (n, p, k, sigma2, prob) = (50.0, 2.0, 10, 3.0, 0.97);
    let xtx_inv = gauss_inverse(&outer_sum(&data, |_| 1.0));
    let h = |i: usize| {
        let x = design_row(&data, i);
        (0..3).map(|a| (0..3).map(|b| x[a] * xtx_inv[a][b] * x[b]).sum::<f64>()).sum::<f64>()
    };
    let scores = leverage_scores(&data).unwrap();
    for (i, s) in scores.iter().enumerate() {
        assert!((s - h(i)).abs() < 1e-12);
    }

    // Σ x xᵀ (XᵀX)⁻¹ x xᵀ = Σ h_ii x xᵀ
    let inner = gauss_inverse(&outer_sum(&data, h));
    let expected: Vec<Vec<f64>> = inner
        .iter()
        .map(|r| r.iter().map(|v| v * (p + 1.0) * sigma2 * prob / k as f64).collect())
        .collect();
    let lev = make_plan(&data, SubsamplingMethod::Lev).unwrap();
    assert_close(&subsampling_lower_bound(&data, &lev, k, prob, sigma2).unwrap(), &expected, 1e-10);
    let levunw = make_plan(&data, SubsamplingMethod::Levunw).unwrap();
    assert_close(&subsampling_lower_bound(&data, &levunw, k, prob, sigma2).unwrap(), &expected, 1e-10);

    let alpha = 0.3;
    let mixed = gauss_inverse(&outer_sum(&data, |i| alpha * h(i) / (p + 1.0) + (1.0 - alpha) / n));
    let expected: Vec<Vec<f64>> = mixed
        .iter()
        .map(|r| r.iter().map(|v| v * sigma2 * prob / k as f64).collect())
        .collect();
    let slev = make_plan(&data, SubsamplingMethod::Slev { alpha }).unwrap();
    assert_close(&subsampling_lower_bound(&data, &slev, k, prob, sigma2).unwrap(), &expected, 1e-10);
}

/// Φ(x) from the Maclaurin series of erf, summed until terms vanish.
fn phi_series(x: f64) -> f64 {
    let t = x / std::f64::consts::SQRT_2;
    let mut term = t;
    let mut sum = t;
    let mut n = 0.0;
    while term.abs() > 1e-18 * sum.abs() {
        n += 1.0;
        term *= -t * t / n;
        sum += term / (2.0 * n + 1.0);
    }
    0.5 * (1.0 + 2.0 / std::f64::consts::PI.sqrt() * sum)
}

fn quantile_by_bisection(prob: f64) -> f64 {
    let (mut lo, mut hi) = (-6.0, 6.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi_series(mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn normal_quantile_against_series() {
    for prob in [0.75, 0.9, 0.95, 0.975, 0.995, 0.5, 0.1, 0.025] {
        let q = normal_quantile(prob);
        assert!((q - quantile_by_bisection(prob)).abs() < 1e-9, "{prob}: {q}");
    }
    assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-6);
    assert!((normal_quantile(0.75) - 0.674490).abs() < 1e-6);
}

#[test]
fn uniform_draw_counts_have_binomial_mean() {
    let n = 10_000;
    let data = DataMatrix::from_columns(vec![(0..n).map(|i| i as f64).collect()], vec![0.0; n]).unwrap();
    let plan = make_plan(&data, SubsamplingMethod::Uni).unwrap();
    let (k, reps) = (100, 100_000);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut hits = 0u64;
    for _ in 0..reps {
        let d = draw(&plan, k, &mut rng).unwrap();
        hits += d.entries().iter().find(|(row, _)| *row == 0).map_or(0, |&(_, c)| c as u64);
    }
    let pi = 1.0 / n as f64;
    let mean = hits as f64 / reps as f64;
    let sd = (k as f64 * pi * (1.0 - pi) / reps as f64).sqrt();
    assert!((mean - k as f64 * pi).abs() <= 3.0 * sd, "mean {mean}");
}
