use ragtune_core::surrogate::{GpModel, Hyperparameters, JointPosterior};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn hyper(lengthscales: Vec<f64>, output_scale: f64, noise_variance: f64) -> Hyperparameters {
    Hyperparameters { lengthscales, output_scale, noise_variance }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

fn matern(a: &[f64], b: &[f64], ls: &[f64], sf2: f64) -> f64 {
    let r = a.iter().zip(b).zip(ls).map(|((x, y), l)| ((x - y) / l).powi(2)).sum::<f64>().sqrt();
    let s = 5f64.sqrt() * r;
    sf2 * (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        let piv = a[c][c];
        a[c].iter_mut().for_each(|v| *v /= piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                let row_c = a[c].clone();
                a[r].iter_mut().zip(&row_c).for_each(|(v, w)| *v -= f * w);
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

#[test]
fn interpolates_linear_function() {
    let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 / 4.0]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x[0] - 1.0).collect();
    let m = GpModel::fit(&xs, &ys, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for (x, y) in xs.iter().zip(&ys) {
        let (mean, _) = m.posterior(x).unwrap();
        assert!((mean - y).abs() < 1e-6, "{mean} vs {y}");
    }
}

#[test]
fn recovers_sine() {
    let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (2.0 * std::f64::consts::PI * x[0]).sin()).collect();
    let m = GpModel::fit(&xs, &ys, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let mse = (0..100)
        .map(|i| {
            let x = (i as f64 + 0.5) / 100.0;
            let (mean, _) = m.posterior(&[x]).unwrap();
            (mean - (2.0 * std::f64::consts::PI * x).sin()).powi(2)
        })
        .sum::<f64>()
        / 100.0;
    assert!(mse.sqrt() < 0.05, "rmse {}", mse.sqrt());
}

#[test]
fn matches_direct_predictive_formula() {
    let xs = vec![vec![0.1, 0.7], vec![0.5, 0.2], vec![0.9, 0.9]];
    let ys = [4.0, -2.5, 1.25];
    let ls = vec![0.4, 0.7];
    let (sf2, sn2) = (1.3, 0.05);
    let m = GpModel::with_hyperparameters(&xs, &ys, hyper(ls.clone(), sf2, sn2)).unwrap();

    let mean_y = ys.iter().sum::<f64>() / 3.0;
    let sd_y = (ys.iter().map(|y| (y - mean_y).powi(2)).sum::<f64>() / 2.0).sqrt();
    let z: Vec<f64> = ys.iter().map(|y| (y - mean_y) / sd_y).collect();
    let diag = sn2 + m.jitter();
    let k: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| matern(&xs[i], &xs[j], &ls, sf2) + if i == j { diag } else { 0.0 }).collect())
        .collect();
    let kinv = invert(&k);
    for x in [[0.3, 0.3], [0.1, 0.7], [0.95, 0.05]] {
        let ks: Vec<f64> = xs.iter().map(|xi| matern(xi, &x, &ls, sf2)).collect();
        let w: Vec<f64> = (0..3).map(|i| (0..3).map(|j| kinv[i][j] * ks[j]).sum()).collect();
        let mu = mean_y + sd_y * w.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        let var = sd_y * sd_y * (sf2 - w.iter().zip(&ks).map(|(a, b)| a * b).sum::<f64>() + sn2);
        let (mean, variance) = m.posterior(&x).unwrap();
        assert!((mean - mu).abs() < 1e-8, "{mean} vs {mu}");
        assert!((variance - var).abs() < 1e-8, "{variance} vs {var}");
    }
}

#[test]
fn lml_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let d = rng.random_range(1..5);
        let n = rng.random_range(4..15);
        let xs = random_points(&mut rng, n, d);
        let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let mut theta: Vec<f64> = (0..d).map(|_| rng.random_range(-2.5..1.0)).collect();
        theta.push(rng.random_range(-1.5..1.5));
        theta.push(rng.random_range(-7.0..-0.5));
        let lml = |t: &[f64]| {
            GpModel::with_hyperparameters(&xs, &ys, Hyperparameters::from_log(t))
                .unwrap()
                .log_marginal_likelihood()
                .unwrap()
        };
        let (_, grad) = lml(&theta);
        let h = 1e-5;
        let fd: Vec<f64> = (0..theta.len())
            .map(|i| {
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[i] += h;
                dn[i] -= h;
                (lml(&up).0 - lml(&dn).0) / (2.0 * h)
            })
            .collect();
        let err = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        assert!(err / scale < 1e-4, "relative error {} at {theta:?}", err / scale);
    }
}

#[test]
fn single_point_lml_closed_form() {
    let m = GpModel::with_hyperparameters(&[vec![0.3, 0.6]], &[7.5], hyper(vec![0.2, 0.9], 0.8, 0.1)).unwrap();
    let (value, grad) = m.log_marginal_likelihood().unwrap();
    let total = 0.8 + 0.1 + m.jitter();
    let expected = -0.5 * (2.0 * std::f64::consts::PI * total).ln();
    assert!((value - expected).abs() < 1e-12);
    // centred target: only the log-determinant term moves
    assert!((grad[2] + 0.5 * 0.8 / total).abs() < 1e-12);
    assert!((grad[3] + 0.5 * 0.1 / total).abs() < 1e-12);
}

#[test]
fn noise_scan_peaks_near_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 200;
    let xs = random_points(&mut rng, n, 2);
    let ys: Vec<f64> = (0..n).map(|_| 0.7 * rng.sample::<f64, _>(StandardNormal)).collect();
    let grid: Vec<f64> = (-6..=6).map(|k| 2f64.powi(k)).collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&noise| {
            GpModel::with_hyperparameters(&xs, &ys, hyper(vec![0.05, 0.05], 1e-4, noise))
                .unwrap()
                .log_marginal_likelihood()
                .unwrap()
                .0
        })
        .collect();
    let peak = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(values[..=peak].windows(2).all(|w| w[1] > w[0]));
    assert!(values[peak..].windows(2).all(|w| w[1] < w[0]));
    // standardized targets have unit variance
    assert!((0.5..=2.0).contains(&grid[peak]), "peak at {}", grid[peak]);
    assert!(values[5] > values[4]);
}

#[test]
fn training_input_with_floor_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs = random_points(&mut rng, 8, 3);
    let ys: Vec<f64> = xs.iter().map(|x| x[0] * 4.0 - x[1] + x[2] * x[2]).collect();
    let m = GpModel::with_hyperparameters(&xs, &ys, hyper(vec![0.5; 3], 1.0, 1e-8)).unwrap();
    let (_, scale) = m.standardization();
    for (x, y) in xs.iter().zip(&ys) {
        let (mean, var) = m.posterior(x).unwrap();
        assert!((mean - y).abs() < 1e-5);
        assert!(var / (scale * scale) < 1e-6);
    }
}

#[test]
fn reverts_to_prior_far_away() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let xs = random_points(&mut rng, 10, 2);
    let ys: Vec<f64> = xs.iter().map(|x| 50.0 + 10.0 * x[0] - 4.0 * x[1]).collect();
    let (sf2, sn2) = (0.9, 0.01);
    let m = GpModel::with_hyperparameters(&xs, &ys, hyper(vec![0.3, 0.3], sf2, sn2)).unwrap();
    let (mu, scale) = m.standardization();
    let (mean, var) = m.posterior(&[40.0, -35.0]).unwrap();
    assert!((mean - mu).abs() <= 0.01 * mu.abs());
    let prior = (sf2 + sn2) * scale * scale;
    assert!((var - prior).abs() <= 0.01 * prior);
}

#[test]
fn variance_is_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs = random_points(&mut rng, 15, 4);
    let ys: Vec<f64> = (0..15).map(|_| rng.random::<f64>()).collect();
    let h = hyper(vec![0.3, 0.6, 1.0, 2.0], 2.0, 0.01);
    let m = GpModel::with_hyperparameters(&xs, &ys, h.clone()).unwrap();
    let (_, scale) = m.standardization();
    let cap = (h.output_scale + h.noise_variance) * scale * scale + 1e-8;
    for x in random_points(&mut rng, 300, 4) {
        let (_, var) = m.posterior(&x).unwrap();
        assert!((0.0..=cap).contains(&var));
    }
}

#[test]
fn conditioning_on_mean_value_never_adds_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let mut xs = random_points(&mut rng, 6, 2);
        let mut ys: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let h = hyper(vec![0.4, 0.4], 1.0, 0.05);
        let m = GpModel::with_hyperparameters(&xs, &ys, h.clone()).unwrap();
        let x: Vec<f64> = (0..2).map(|_| rng.random()).collect();
        let (mean, before) = m.posterior(&x).unwrap();
        xs.push(x.clone());
        ys.push(mean);
        // keep the standardization fixed so variances are comparable
        let (mu, scale) = m.standardization();
        let z: Vec<f64> = ys.iter().map(|y| (y - mu) / scale).collect();
        let m2 = GpModel::with_hyperparameters(&xs, &z, h).unwrap();
        let (_, s2) = m2.standardization();
        let (_, after) = m2.posterior(&x).unwrap();
        assert!(after / (s2 * s2) <= before / (scale * scale) + 1e-12);
    }
}

#[test]
fn affine_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let xs = random_points(&mut rng, 9, 3);
    let ys: Vec<f64> = (0..9).map(|_| rng.random::<f64>() * 5.0).collect();
    let h = hyper(vec![0.5, 0.8, 0.3], 1.1, 0.02);
    let base = GpModel::with_hyperparameters(&xs, &ys, h.clone()).unwrap();
    for (a, b) in [(2e4, -3.0), (-3.5, 1e3), (1e-3, 0.5)] {
        let t: Vec<f64> = ys.iter().map(|y| a * y + b).collect();
        let m = GpModel::with_hyperparameters(&xs, &t, h.clone()).unwrap();
        for x in random_points(&mut rng, 20, 3) {
            let (m0, v0) = base.posterior(&x).unwrap();
            let (m1, v1) = m.posterior(&x).unwrap();
            assert!((m1 - (a * m0 + b)).abs() <= 1e-8 * (a * m0 + b).abs().max(1.0));
            assert!((v1 - a * a * v0).abs() <= 1e-8 * (a * a * v0).max(1e-300));
        }
    }
}

#[test]
fn draws_match_posterior_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let xs = random_points(&mut rng, 7, 2);
    let ys: Vec<f64> = xs.iter().map(|x| x[0].sin() + 3.0 * x[1]).collect();
    let m = GpModel::with_hyperparameters(&xs, &ys, hyper(vec![0.3, 0.5], 1.0, 0.01)).unwrap();
    let x = vec![0.42, 0.77];
    let (mu, var) = m.latent_posterior(&x).unwrap();
    let n = 10_000;
    let draws = m.sample_posterior(std::slice::from_ref(&x), n, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let vals: Vec<f64> = draws.iter().map(|d| d[0]).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let sample_var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - mu).abs() < 3.0 * (var / n as f64).sqrt());
    assert!((sample_var - var).abs() < 3.0 * var * (2.0 / (n - 1) as f64).sqrt());
}

#[test]
fn extension_reproduces_joint_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let xs = random_points(&mut rng, 10, 2);
    let ys: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
    let m = GpModel::with_hyperparameters(&xs, &ys, hyper(vec![0.3, 0.4], 1.0, 0.05)).unwrap();
    let base = random_points(&mut rng, 4, 2);
    let x = vec![0.5, 0.5];
    let joint = JointPosterior::new(&m, &base).unwrap();
    let ext = joint.extend(&m, &x).unwrap();
    let (mu, var) = m.latent_posterior(&x).unwrap();
    assert!((ext.mean - mu).abs() < 1e-10);
    let total = ext.weights.iter().map(|w| w * w).sum::<f64>() + ext.residual_sd.powi(2);
    assert!((total - var).abs() < 1e-6 * var.max(1e-6));

    // empirical covariance between the base and x from extended draws
    let n = 20_000;
    let mut z_rng = ChaCha8Rng::seed_from_u64(2);
    let mut prod = 0.0;
    let mut sums = (0.0, 0.0);
    for _ in 0..n {
        let z: Vec<f64> = (0..joint.unique_len()).map(|_| z_rng.sample(StandardNormal)).collect();
        let b = joint.draw(&z);
        let e: f64 = z_rng.sample(StandardNormal);
        let v = ext.mean + ext.weights.iter().zip(&z).map(|(w, zi)| w * zi).sum::<f64>() + ext.residual_sd * e;
        prod += b[0] * v;
        sums.0 += b[0];
        sums.1 += v;
    }
    let cov = prod / n as f64 - sums.0 * sums.1 / (n as f64).powi(2);
    let full = m.sample_posterior(&[base[0].clone(), x.clone()], n, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let (a, b): (Vec<f64>, Vec<f64>) = full.iter().map(|d| (d[0], d[1])).unzip();
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let cov_ref = a.iter().zip(&b).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / n as f64;
    assert!((cov - cov_ref).abs() < 0.05 * var.max(1e-3), "{cov} vs {cov_ref}");
}
