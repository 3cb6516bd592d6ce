//! Distributional checks of the engine's random operators against exact laws.

use lshade_fht::engine::{crossover, pbest_count, select_indices, AlgoState, Donor, Individual};
use lshade_fht::rng::{Purpose, StreamRng};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

/// Upper-tail p-value of Pearson's statistic.
fn chi_square_p(observed: &[usize], expected: &[f64]) -> f64 {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let df = (observed.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

fn state(n: usize, archived: usize) -> AlgoState {
    let pop = (0..n)
        .map(|j| Individual { x: vec![j as f64], f: j as f64 })
        .collect();
    let mut s = AlgoState::new(pop, 6, archived);
    s.archive = (0..archived).map(|j| vec![-(j as f64)]).collect();
    s
}

#[test]
fn donor_selection_is_uniform_on_each_pool() {
    let (n, a, p) = (20, 7, 0.2);
    let st = state(n, a);
    let m = pbest_count(p, n);
    let draws = 200_000;
    let mut rng = StreamRng::new(11).stream(Purpose::Indices, 0, 0);
    for i in [0, 13] {
        let mut b_counts = vec![0; n];
        let mut r1_counts = vec![0; n];
        let mut r2_counts = vec![0; n + a];
        let mut k_counts = vec![0; 6];
        for _ in 0..draws {
            let s = select_indices(&st, i, p, &mut rng).unwrap();
            assert!(s.r1 != i && s.r1 != s.b);
            let r2 = match s.r2 {
                Donor::Pop(j) => {
                    assert!(j != i && j != s.b && j != s.r1);
                    j
                }
                Donor::Archive(j) => n + j,
            };
            b_counts[s.b] += 1;
            r1_counts[s.r1] += 1;
            r2_counts[r2] += 1;
            k_counts[s.k] += 1;
        }
        // lower objective = better rank, so the p-best set is 0..m
        assert!(b_counts[m..].iter().all(|&c| c == 0));
        let b = &b_counts[..m];
        assert!(chi_square_p(b, &vec![draws as f64 / m as f64; m]) > 1e-4);
        assert!(chi_square_p(&k_counts, &[draws as f64 / 6.0; 6]) > 1e-4);
        // exact expected counts: mixture over (b, r1)
        let mut exp_r2 = vec![0.0; n + a];
        let mut exp_r1 = vec![0.0; n];
        for bb in 0..m {
            let r1_pool: Vec<usize> = (0..n).filter(|&j| j != i && j != bb).collect();
            for &r1 in &r1_pool {
                let w = draws as f64 / m as f64 / r1_pool.len() as f64;
                exp_r1[r1] += w;
                let r2_pool: Vec<usize> = (0..n + a).filter(|&j| j != i && j != bb && j != r1).collect();
                for &r2 in &r2_pool {
                    exp_r2[r2] += w / r2_pool.len() as f64;
                }
            }
        }
        let keep = |c: &[usize], e: &[f64]| -> (Vec<usize>, Vec<f64>) {
            c.iter().zip(e).filter(|(_, &e)| e > 0.0).map(|(&c, &e)| (c, e)).unzip()
        };
        let (o, e) = keep(&r1_counts, &exp_r1);
        assert!(chi_square_p(&o, &e) > 1e-4);
        let (o, e) = keep(&r2_counts, &exp_r2);
        assert!(chi_square_p(&o, &e) > 1e-4);
        assert_eq!(r1_counts[i], 0);
        assert_eq!(r2_counts[i], 0);
    }
}

#[test]
fn mutant_coordinate_count_is_one_plus_binomial() {
    let d = 9;
    let v = vec![1.0; d];
    let x = vec![0.0; d];
    let draws = 100_000;
    for (t, cr) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let mut rng = StreamRng::new(12).stream(Purpose::Crossover, t as u64, 0);
        let mut counts = vec![0usize; d + 1];
        let mut forced = vec![0usize; d];
        for _ in 0..draws {
            let c = crossover(&v, &x, cr, &mut rng);
            assert_eq!(c.u.iter().filter(|&&u| u == 1.0).count(), c.mutant_count);
            assert_eq!(c.u[c.forced], 1.0);
            counts[c.mutant_count] += 1;
            forced[c.forced] += 1;
        }
        assert_eq!(counts[0], 0);
        let bin = Binomial::new(cr, (d - 1) as u64).unwrap();
        // pool sparse tail cells so every expected count is at least 5
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let (mut co, mut ce) = (0usize, 0.0);
        for k in 1..=d {
            co += counts[k];
            ce += draws as f64 * bin.pmf((k - 1) as u64);
            if ce >= 5.0 {
                o.push(co);
                e.push(ce);
                co = 0;
                ce = 0.0;
            }
        }
        *o.last_mut().unwrap() += co;
        *e.last_mut().unwrap() += ce;
        assert!(chi_square_p(&o, &e) > 1e-4, "cr = {cr}: {counts:?}");
        assert!(chi_square_p(&forced, &vec![draws as f64 / d as f64; d]) > 1e-4);
    }
}
