use hetsnn::analysis::{
    digamma, firing_stats, fit_gamma, fit_lognormal, gamma_log_likelihood, gamma_moments,
    halfcheetah_report, read_coalition_csv, read_samples_csv, sample_neurons, shapley_exact,
    trigamma, write_firing_csv, write_fit_csv, write_shapley_csv, COALITIONS,
};
use hetsnn::neuron::{LayerRecord, Property, StepRecord, Trajectory};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal};

fn gamma_samples(shape: f64, scale: f64, n: usize, seed: u64) -> Vec<f64> {
    let d = Gamma::new(shape, scale).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn lognormal_samples(shape: f64, scale: f64, n: usize, seed: u64) -> Vec<f64> {
    let d = LogNormal::new(scale.ln(), shape).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn digamma_agrees_with_statrs() {
    for i in 1..2000 {
        let x = i as f64 * 0.013;
        let ours = digamma(x);
        let theirs = statrs::function::gamma::digamma(x);
        assert!(
            (ours - theirs).abs() <= 1e-12 * (1.0 + theirs.abs()),
            "x={x}: {ours} vs {theirs}"
        );
    }
}

#[test]
fn trigamma_is_the_derivative_of_digamma() {
    for i in 1..400 {
        let x = i as f64 * 0.05;
        let h = 1e-5 * x.max(1.0);
        let fd = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
        assert!((fd - trigamma(x)).abs() <= 1e-6 * trigamma(x), "x={x}");
    }
}

#[test]
fn recovers_reference_lognormal() {
    let f = fit_lognormal(&lognormal_samples(0.27, 21.1, 100_000, 1)).unwrap();
    assert!(rel(f.shape, 0.27) <= 0.02, "{f:?}");
    assert!(rel(f.scale, 21.1) <= 0.02, "{f:?}");
}

#[test]
fn recovers_reference_gamma() {
    let f = fit_gamma(&gamma_samples(1.85, 11.7, 100_000, 2)).unwrap();
    assert!(f.converged);
    assert!(rel(f.shape, 1.85) <= 0.05, "{f:?}");
    assert!(rel(f.scale, 11.7) <= 0.05, "{f:?}");
}

#[test]
fn exponential_data_fit_shape_one() {
    let f = fit_gamma(&gamma_samples(1.0, 14.6, 100_000, 3)).unwrap();
    assert!((f.shape - 1.0).abs() <= 0.03, "{f:?}");
}

#[test]
fn estimates_improve_with_sample_size() {
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[9] + v[10]) / 2.0
    };
    let err = |n: usize, gamma: bool| -> f64 {
        median(
            (0..20)
                .map(|t| {
                    if gamma {
                        rel(
                            fit_gamma(&gamma_samples(1.85, 11.7, n, 100 + t))
                                .unwrap()
                                .shape,
                            1.85,
                        )
                    } else {
                        rel(
                            fit_lognormal(&lognormal_samples(0.27, 21.1, n, 200 + t))
                                .unwrap()
                                .shape,
                            0.27,
                        )
                    }
                })
                .collect(),
        )
    };
    for gamma in [true, false] {
        assert!(err(100_000, gamma) < err(1_000, gamma));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lognormal_scale_equivariance(seed in any::<u64>(), c in 0.01f64..100.0) {
        let x = lognormal_samples(0.5, 3.0, 200, seed);
        let y: Vec<f64> = x.iter().map(|v| v * c).collect();
        let (a, b) = (fit_lognormal(&x).unwrap(), fit_lognormal(&y).unwrap());
        prop_assert!((a.shape - b.shape).abs() <= 1e-10 * a.shape);
        prop_assert!((b.scale - c * a.scale).abs() <= 1e-10 * b.scale);
    }

    #[test]
    fn gamma_mle_beats_moments(seed in any::<u64>(), shape in 0.3f64..8.0, scale in 0.1f64..30.0) {
        let x = gamma_samples(shape, scale, 300, seed);
        let f = fit_gamma(&x).unwrap();
        let (k0, t0) = gamma_moments(&x).unwrap();
        prop_assert!(f.log_likelihood >= gamma_log_likelihood(&x, k0, t0) - 1e-9);
    }
}

// --- Shapley ------------------------------------------------------------

fn random_game(rng: &mut ChaCha8Rng) -> [f64; COALITIONS] {
    std::array::from_fn(|_| rng.random_range(-100.0..100.0))
}

fn values(v: &[f64; COALITIONS]) -> [f64; 4] {
    shapley_exact(&v.map(Some)).unwrap().values
}

#[test]
fn shapley_axioms_on_random_games() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let v = random_game(&mut rng);
        let r = shapley_exact(&v.map(Some)).unwrap();
        assert!(r.efficiency_residual.abs() < 1e-9);

        // additivity
        let w = random_game(&mut rng);
        let sum: [f64; COALITIONS] = std::array::from_fn(|s| v[s] + w[s]);
        let (a, b, c) = (values(&v), values(&w), values(&sum));
        for i in 0..4 {
            assert!((c[i] - a[i] - b[i]).abs() < 1e-9);
        }

        // dummy: player p never changes the value
        let p = rng.random_range(0..4);
        let mut d = v;
        for s in 0..COALITIONS {
            if s & (1 << p) != 0 {
                d[s] = d[s & !(1 << p)];
            }
        }
        assert!(values(&d)[p].abs() < 1e-9);

        // symmetry: swapping players i and j leaves v unchanged
        let i = rng.random_range(0..4);
        let j = (i + rng.random_range(1..4)) % 4;
        let swap = |s: usize| {
            let (bi, bj) = ((s >> i) & 1, (s >> j) & 1);
            (s & !(1 << i) & !(1 << j)) | (bj << i) | (bi << j)
        };
        let mut sym = v;
        for s in 0..COALITIONS {
            let t = swap(s);
            if t > s {
                let m = (v[s] + v[t]) / 2.0;
                sym[s] = m;
                sym[t] = m;
            }
        }
        let sv = values(&sym);
        assert!((sv[i] - sv[j]).abs() < 1e-9);
    }
}

#[test]
fn membrane_time_constant_dominates_the_ablation() {
    let r = halfcheetah_report(0.0);
    assert_eq!(r.top(), Property::TauM, "{:?}", r.values);
    assert!(r.efficiency_residual.abs() < 1e-9);
    assert!((r.values.iter().sum::<f64>() - 4221.0).abs() < 1e-9);
    assert_eq!(r.input_sd.unwrap()[15], 413.0);
    let n = r.normalized();
    assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

// --- firing rates -----------------------------------------------------------

/// Two neurons in one layer; `pattern[t]` gives their spikes at step `t`.
fn spike_traj(pattern: &[[bool; 2]]) -> Trajectory {
    Trajectory {
        initial_v: vec![vec![0.0, 0.0]],
        steps: pattern
            .iter()
            .map(|s| StepRecord {
                input: vec![],
                layers: vec![LayerRecord {
                    current: vec![0.0; 2],
                    u: vec![0.0; 2],
                    v: vec![0.0; 2],
                    s: s.to_vec(),
                }],
            })
            .collect(),
    }
}

#[test]
fn firing_rate_fixture() {
    let class0 = vec![
        spike_traj(&[[true, false], [true, false], [false, false], [true, false]]),
        spike_traj(&[
            [false, false],
            [true, false],
            [false, false],
            [false, false],
        ]),
    ];
    let class1 = vec![spike_traj(&[
        [true, true],
        [true, true],
        [true, true],
        [true, true],
    ])];
    let t = firing_stats(&[class0, class1], &[0, 1]).unwrap();
    assert_eq!(t.rates, vec![vec![0.5, 1.0], vec![0.0, 1.0]]);

    let silent = vec![spike_traj(&[[false, false]; 3])];
    assert_eq!(
        firing_stats(std::slice::from_ref(&silent), &[1]).unwrap().rates,
        vec![vec![0.0]]
    );
    assert!(firing_stats(&[silent.clone(), vec![]], &[0]).is_err());
    assert!(firing_stats(&[silent], &[2]).is_err());

    let mut buf = Vec::new();
    write_firing_csv(&mut buf, &t).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "neuron,class_0,class_1\n0,0.5,1\n1,0,1\n"
    );

    let s = sample_neurons(100, 32, 4);
    assert_eq!(s.len(), 32);
    assert!(s.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(s, sample_neurons(100, 32, 4));
}

// --- CSV --------------------------------------------------------------------

#[test]
fn csv_inputs() {
    let samples = read_samples_csv("tau_m_ms\n20.5\n\n13\n# note\n7.25\n".as_bytes()).unwrap();
    assert_eq!(samples, vec![20.5, 13.0, 7.25]);
    assert!(read_samples_csv("1\nabc\n".as_bytes()).is_err());

    let text = "mask,mean,sd\n0000,0\n1000,3967,171\n0100,101,24\n";
    let (table, sd) = read_coalition_csv(text.as_bytes()).unwrap();
    assert_eq!(table[0], Some(0.0));
    assert_eq!(table[1], Some(3967.0));
    assert_eq!(table[2], Some(101.0));
    assert_eq!(table[3], None);
    assert_eq!(sd.unwrap()[1], 171.0);
    let err = shapley_exact(&table).unwrap_err();
    assert!(err.to_string().contains("{tau_m, v_th}"), "{err}");
    assert!(read_coalition_csv("1000,1\n10x0,2\n".as_bytes()).is_err());
}

#[test]
fn csv_outputs() {
    let x = gamma_samples(2.0, 3.0, 500, 9);
    let (g, l) = (fit_gamma(&x).unwrap(), fit_lognormal(&x).unwrap());
    let mut buf = Vec::new();
    write_fit_csv(&mut buf, &[("run".into(), g, l)]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "distribution,parameter,run");
    assert!(lines[1].starts_with("gamma,shape,"));
    assert!(lines[4].starts_with("lognormal,shape,"));

    let mut buf = Vec::new();
    write_shapley_csv(&mut buf, &halfcheetah_report(0.0)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("property,value,normalized\ntau_m,"));
    assert_eq!(text.lines().count(), 5);
}
