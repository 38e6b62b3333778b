use hetsnn::es::{
    antithetic_gradient, es_gradient, es_step, es_update, evaluate_population, pgpe_apply,
    pgpe_population, pgpe_step, Algorithm, Direction, EsConfig, EsError, EsState, Fitness,
    FitnessError, FnFitness, SIGMA_MAX, SIGMA_MIN,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Plain ES estimate of dL/dtheta at a 1-D point from `m` samples.
fn estimate_1d(l: impl Fn(f64) -> f64, theta: f64, sigma: f64, m: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(Vec<f64>, f64)> = normals(&mut rng, m)
        .into_iter()
        .map(|e| (vec![e], l(theta + sigma * e)))
        .collect();
    es_gradient(sigma, &samples).unwrap()[0]
}

#[test]
fn equal_losses_give_zero_gradient() {
    let samples = vec![
        (vec![0.3, -1.0], 2.0),
        (vec![1.1, 0.4], 2.0),
        (vec![-0.7, 2.0], 2.0),
    ];
    assert_eq!(es_gradient(0.1, &samples).unwrap(), vec![0.0, 0.0]);
    assert!(matches!(es_gradient(0.1, &[]), Err(EsError::EmptyBatch)));
}

#[test]
fn quadratic_estimate_is_within_five_percent() {
    let g = estimate_1d(|t| t * t, 1.0, 0.1, 100_000, 1);
    assert!((g - 2.0).abs() <= 0.05 * 2.0, "{g}");
}

#[test]
fn linear_estimate_is_unbiased() {
    let c = -1.7;
    let g = estimate_1d(|t| c * t, 0.3, 0.5, 1_000_000, 2);
    // the estimate is c times the sample variance of eps: sd ~ |c| sqrt(2/M)
    let three_sd = 3.0 * c.abs() * (2.0f64 / 1e6).sqrt();
    assert!((g - c).abs() <= three_sd, "{g}");
    assert!((g - c).abs() <= 0.01 * c.abs());
}

#[test]
fn update_examples() {
    let cfg = EsConfig::default();
    let st = EsState::new(vec![1.0], &cfg);
    assert_eq!(
        es_update(&st, &[0.0], 0.1, Direction::Minimize)
            .unwrap()
            .center,
        vec![1.0]
    );
    let next = es_update(&st, &[2.0], 0.1, Direction::Minimize).unwrap();
    assert!((next.center[0] - 0.8).abs() < 1e-15);
    let up = es_update(&st, &[2.0], 0.1, Direction::Maximize).unwrap();
    assert!((up.center[0] - 1.2).abs() < 1e-15);

    let mut s = st;
    let mut steps = 0;
    while s.center[0].abs() >= 1e-3 {
        let g = 2.0 * s.center[0];
        s = es_update(&s, &[g], 0.1, Direction::Minimize).unwrap();
        steps += 1;
    }
    assert!(steps <= 100, "{steps}");
    assert!(es_update(&s, &[1.0, 2.0], 0.1, Direction::Minimize).is_err());
}

#[test]
fn antithetic_pairs_cancel_at_the_optimum() {
    // anisotropic quadratic bowl centred at the origin
    let a = [1.0, 3.0, 0.5, 2.0];
    let bowl =
        FnFitness(move |x: &[f64], _| -x.iter().zip(&a).map(|(x, a)| a * x * x).sum::<f64>());
    let cfg = EsConfig {
        population: 16,
        ..EsConfig::default()
    };
    let gens = 10_000u64;
    let mut mean_update = vec![0.0; 4];
    let mut st = EsState::new(vec![0.0; 4], &cfg);
    for g in 0..gens {
        st.generation = g;
        let (next, _) = pgpe_step(&st, &cfg, &bowl).unwrap();
        for (m, (n, c)) in mean_update
            .iter_mut()
            .zip(next.center.iter().zip(&st.center))
        {
            *m += (n - c) / gens as f64;
        }
    }
    let bound = 3.0 / ((gens as f64) * cfg.population as f64).sqrt();
    for m in &mean_update {
        assert!(m.abs() <= bound, "{mean_update:?}");
    }
}

#[test]
fn antithetic_estimator_has_lower_variance_than_plain_es() {
    // near the optimum of the sphere, where the even part of the fitness dominates
    let dim = 8;
    let m = 32;
    let sigma = 0.1;
    let center = vec![0.05; dim];
    let trials = 1000;
    let reward = |x: &[f64]| -sphere(x);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut plain = Vec::with_capacity(trials);
    let mut anti = Vec::with_capacity(trials);
    for _ in 0..trials {
        let samples: Vec<(Vec<f64>, f64)> = (0..m)
            .map(|_| {
                let e = normals(&mut rng, dim);
                let x: Vec<f64> = center.iter().zip(&e).map(|(c, e)| c + sigma * e).collect();
                (e, reward(&x))
            })
            .collect();
        plain.push(es_gradient(sigma, &samples).unwrap());
        let pairs: Vec<(Vec<f64>, f64, f64)> = (0..m / 2)
            .map(|_| {
                let e = normals(&mut rng, dim);
                let xp: Vec<f64> = center.iter().zip(&e).map(|(c, e)| c + sigma * e).collect();
                let xm: Vec<f64> = center.iter().zip(&e).map(|(c, e)| c - sigma * e).collect();
                (e, reward(&xp), reward(&xm))
            })
            .collect();
        anti.push(antithetic_gradient(&vec![sigma; dim], &pairs).unwrap());
    }
    let total_var = |v: &[Vec<f64>]| -> f64 {
        (0..dim)
            .map(|d| {
                let mean = v.iter().map(|g| g[d]).sum::<f64>() / v.len() as f64;
                v.iter().map(|g| (g[d] - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
            })
            .sum()
    };
    let (vp, va) = (total_var(&plain), total_var(&anti));
    assert!(va < vp, "antithetic {va} vs plain {vp}");
}

const SPHERE_DIM: usize = 32;

fn sphere_run(threads: usize) -> Vec<(f64, f64, f64)> {
    let cfg = EsConfig {
        direction: Direction::Minimize,
        seed: 2024,
        ..EsConfig::default()
    };
    let fit = FnFitness(|x: &[f64], _| sphere(x));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| {
        let mut st = EsState::new(vec![1.0; SPHERE_DIM], &cfg);
        let mut out = Vec::new();
        for _ in 0..300 {
            let (next, stats) = pgpe_step(&st, &cfg, &fit).unwrap();
            st = next;
            out.push((sphere(&st.center), stats.fitness_mean, stats.sigma_mean));
        }
        out
    })
}

#[test]
fn sphere_converges_with_defaults() {
    let run = sphere_run(2);
    let first = run
        .iter()
        .position(|r| r.0 < 1e-2)
        .expect("never reached 1e-2");
    assert!(first < 300);
    // golden values of this seed
    assert_eq!(
        first, GOLDEN_FIRST_GENERATION,
        "first generation below 1e-2"
    );
    let g20 = run[19].0;
    assert!(
        (g20 - GOLDEN_FITNESS_AT_20).abs() <= 1e-9 * GOLDEN_FITNESS_AT_20,
        "{g20:e}"
    );
    assert!(run.last().unwrap().0 < 1e-20);

    let mut best = f64::INFINITY;
    let mut best_curve = Vec::new();
    for r in &run {
        best = best.min(r.0);
        best_curve.push(best);
    }
    assert!(best_curve.windows(2).all(|w| w[1] <= w[0]));
    assert!(best_curve[299] < best_curve[0] * 1e-3);
}

const GOLDEN_FIRST_GENERATION: usize = 11;
const GOLDEN_FITNESS_AT_20: f64 = 4.4188432715947835e-5;

#[test]
fn runs_are_identical_across_thread_counts() {
    assert_eq!(sphere_run(1)[..40], sphere_run(4)[..40]);
}

#[test]
fn sigma_is_clamped() {
    let cfg = EsConfig {
        population: 64,
        lr_sigma: 10.0,
        ..EsConfig::default()
    };
    // a steep penalty on spread drives sigma down, a steep reward drives it up
    let mut st = EsState::new(vec![0.0], &cfg);
    st.sigma = vec![SIGMA_MIN];
    let narrow = FnFitness(|x: &[f64], _| -1e12 * x[0] * x[0]);
    let (next, _) = pgpe_step(&st, &cfg, &narrow).unwrap();
    assert_eq!(next.sigma[0], SIGMA_MIN);

    st.sigma = vec![0.5];
    let wide = FnFitness(|x: &[f64], _| 1e6 * x[0] * x[0]);
    let (next, stats) = pgpe_step(&st, &cfg, &wide).unwrap();
    assert_eq!(next.sigma[0], SIGMA_MAX);
    assert_eq!(stats.sigma_mean, SIGMA_MAX);
}

struct Counter;

impl Fitness for Counter {
    fn evaluate(&self, genome: &[f64], seed: u64) -> Result<f64, FitnessError> {
        if genome[0] < 0.0 {
            return Err("negative genome".into());
        }
        Ok(genome[0] + (seed % 7) as f64)
    }
}

#[test]
fn evaluation_contract() {
    let genomes: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
    let det = FnFitness(|x: &[f64], _| 3.0 * x[0]);
    let f = evaluate_population(&genomes, &det, 1, 9, 0).unwrap();
    for (i, v) in f.iter().enumerate() {
        assert_eq!(*v, 3.0 * i as f64);
    }

    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = one.install(|| evaluate_population(&genomes, &Counter, 3, 11, 5).unwrap());
    let b = four.install(|| evaluate_population(&genomes, &Counter, 3, 11, 5).unwrap());
    assert_eq!(a, b);
    let c = evaluate_population(&genomes, &Counter, 3, 11, 6).unwrap();
    assert_ne!(a, c);

    let mut bad = genomes.clone();
    bad[17][0] = -1.0;
    match evaluate_population(&bad, &Counter, 1, 0, 0) {
        Err(EsError::Fitness { member, .. }) => assert_eq!(member, 17),
        other => panic!("{other:?}"),
    }
}

#[test]
fn vanilla_es_descends_sphere() {
    let cfg = EsConfig {
        algorithm: Algorithm::VanillaEs,
        population: 101,
        direction: Direction::Minimize,
        lr_center: 0.05,
        seed: 3,
        ..EsConfig::default()
    };
    let fit = FnFitness(|x: &[f64], _| sphere(x));
    let mut st = EsState::new(vec![1.0; 4], &cfg);
    for _ in 0..100 {
        st = es_step(&st, &cfg, &fit).unwrap().0;
    }
    assert!(sphere(&st.center) < 0.05, "{}", sphere(&st.center));
    assert!(st.sigma.iter().all(|&s| s == 0.1));
}

#[test]
fn rank_shaping_is_invariant_to_monotone_transforms() {
    let cfg = EsConfig {
        population: 32,
        rank_shaping: true,
        ..EsConfig::default()
    };
    let st = EsState::new(vec![0.3, -0.2, 0.1], &cfg);
    let (genomes, eps) = pgpe_population(&st, cfg.population);
    let raw: Vec<f64> = genomes.iter().map(|g| -sphere(g)).collect();
    let squashed: Vec<f64> = raw.iter().map(|r| r.exp() * 5.0 - 2.0).collect();
    let a = pgpe_apply(&st, &cfg, &eps, &raw).unwrap().0;
    let b = pgpe_apply(&st, &cfg, &eps, &squashed).unwrap().0;
    assert_eq!(a.center, b.center);
    assert_eq!(a.sigma, b.sigma);
}
