use std::path::{Path, PathBuf};
use std::process::Command;

use hetsnn::analysis::{read_coalition_csv, COALITIONS};
use hetsnn::es::load_checkpoint;
use hetsnn::experiment::{
    config_hash, fitdist, genome_csv, gradcheck, run_ablate, run_compare, run_train,
    shapley_from_csv, solve_width, stats, ExperimentConfig, Method, Metadata, Optimizer, Task,
    TrainTarget,
};
use hetsnn::neuron::{NetworkSpec, Property, TrainableMask};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/mnist-subset")
}

fn memory_config(n: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.experiment.task = Task::Memory;
    c.experiment.name = "mem".into();
    c.network.hidden = vec![32];
    c.network.input_gain = 4.0;
    c.env.memory_length = n;
    c.es.population = 64;
    c.es.generations = 50;
    c.es.rank_shaping = true;
    c.es.sigma0 = 0.2;
    c.es.lr_center = 0.5;
    c
}

fn classify_config() -> ExperimentConfig {
    let d = data_dir();
    let mut c = ExperimentConfig::default();
    c.experiment.task = Task::Classify;
    c.network.hidden = vec![16];
    c.network.input_gain = 4.0;
    c.env.train_images = Some(d.join("train-images-idx3-ubyte"));
    c.env.train_labels = Some(d.join("train-labels-idx1-ubyte"));
    c.env.test_images = Some(d.join("test-images-idx3-ubyte"));
    c.env.test_labels = Some(d.join("test-labels-idx1-ubyte"));
    c.env.train_limit = Some(40);
    c.es.population = 4;
    c.es.generations = 2;
    c
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn header(p: &Path) -> String {
    read(p).lines().next().unwrap_or("").to_string()
}

#[test]
fn sphere_defaults_write_one_row_per_generation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::default();
    assert_eq!(cfg.experiment.task, Task::Sphere);
    let s = run_train(&cfg, dir.path()).unwrap();
    let curves = read(&dir.path().join("curves.csv"));
    assert_eq!(curves.lines().count() - 1, cfg.es.generations as usize);
    assert!(s.final_reward < 1e-2, "sphere loss {}", s.final_reward);
}

#[test]
fn memory_length_one_is_solved() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_train(&memory_config(1), dir.path()).unwrap();
    assert!(s.final_reward >= 0.95, "final reward {}", s.final_reward);
}

#[test]
fn curves_are_identical_across_runs_and_thread_counts() {
    let cfg = {
        let mut c = memory_config(5);
        c.es.generations = 8;
        c
    };
    let mut outputs = Vec::new();
    for threads in [1, 1, 3] {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_train(&cfg, dir.path())).unwrap();
        outputs.push(std::fs::read(dir.path().join("curves.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn run_directory_is_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = memory_config(3);
    cfg.es.generations = 12;
    run_train(&cfg, dir.path()).unwrap();
    for f in ["config.toml", "curves.csv", "timing.csv", "genome.csv", "network.json", "metadata.json", "checkpoint.bin"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let saved = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(saved, cfg);
    let meta: Metadata = serde_json::from_str(&read(&dir.path().join("metadata.json"))).unwrap();
    assert_eq!(meta.config_sha256, config_hash(&cfg));
    assert_eq!(meta.seed, cfg.experiment.seed);
    assert_eq!(meta.episodes, 12 * 64 * 2);

    let again = tempfile::tempdir().unwrap();
    run_train(&saved, again.path()).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("curves.csv")).unwrap(),
        std::fs::read(again.path().join("curves.csv")).unwrap()
    );

    let state = load_checkpoint(std::fs::File::open(dir.path().join("checkpoint.bin")).unwrap()).unwrap();
    assert_eq!(state.generation, 12);
    let net: NetworkSpec = serde_json::from_str(&read(&dir.path().join("network.json"))).unwrap();
    assert_eq!(hetsnn::neuron::genome_pack(&net), state.center);
}

#[test]
fn width_solver_hits_the_parameter_budget() {
    let tau = TrainableMask::from_bits(1);
    let h = solve_width(16_384, TrainTarget::Neurons, tau, 784, 10).unwrap();
    let total = h + 10;
    assert!(total.abs_diff(16_384) <= 1, "{total} trainables");

    let all = TrainableMask::ALL;
    let h = solve_width(16_384, TrainTarget::Neurons, all, 784, 10).unwrap();
    assert!((4 * (h + 10)).abs_diff(16_384) <= 4);

    let h = solve_width(4_096, TrainTarget::Weights, all, 784, 10).unwrap();
    assert!((h * 794).abs_diff(4_096) <= 794 / 2);

    assert!(solve_width(16_384, TrainTarget::Neurons, TrainableMask::NONE, 784, 10).is_err());
}

#[test]
fn ablation_covers_fifteen_masks_and_feeds_shapley() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = memory_config(2);
    cfg.es.generations = 2;
    cfg.es.population = 8;
    cfg.experiment.repeats = 2;
    cfg.ablate.param_budget = Some(48);
    let rows = run_ablate(&cfg, dir.path()).unwrap();
    assert_eq!(rows.len(), 15);
    let masks: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.mask.as_str()).collect();
    assert_eq!(masks.len(), 15);
    for r in &rows {
        let m = TrainableMask::parse_bit_string(&r.mask).unwrap();
        assert_eq!(r.runs, 2);
        assert_eq!(r.trainable_params, m.count() * (r.hidden + 2));
        assert!(r.trainable_params.abs_diff(48) <= m.count() * 2, "{r:?}");
    }
    assert_eq!(read(&dir.path().join("ablate_runs.csv")).lines().count(), 31);

    let (table, sd) = read_coalition_csv(std::fs::File::open(dir.path().join("ablate.csv")).unwrap()).unwrap();
    assert!(table[0].is_none());
    assert_eq!(table.iter().filter(|x| x.is_some()).count(), COALITIONS - 1);
    assert!(sd.is_some());
    let report = shapley_from_csv(&dir.path().join("ablate.csv"), Some(-1.0), dir.path()).unwrap();
    assert!(report.efficiency_residual.abs() < 1e-9);
}

#[test]
fn empty_masks_are_rejected() {
    let mut cfg = memory_config(2);
    cfg.ablate.masks = vec!["0000".into()];
    assert!(cfg.validate().is_err());
    let mut cfg = memory_config(2);
    cfg.ablate.masks = vec!["1000".into(), "1000".into()];
    assert!(cfg.validate().is_err());
    let mut cfg = memory_config(2);
    cfg.network.trainable = "0000".into();
    assert!(cfg.validate().is_err());
    cfg.network.train = TrainTarget::Weights;
    assert!(cfg.validate().is_ok());
}

#[test]
fn compare_spends_equal_budgets_on_sixteen_series() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.experiment.task = Task::Cartpole;
    cfg.network.hidden = vec![4];
    cfg.compare.horizons = vec![5, 10, 15, 20];
    let summary = run_compare(&cfg, dir.path()).unwrap();
    assert_eq!(summary.len(), 16);
    for s in &summary {
        assert_eq!(s.episodes, 3840, "{s:?}");
        assert!(s.final_return <= s.horizon as f64);
    }
    let tidy = read(&dir.path().join("compare.csv"));
    let mut series = std::collections::BTreeSet::new();
    let mut es_rows = 0;
    for line in tidy.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        series.insert((f[0].to_string(), f[1].to_string()));
        if f[1].starts_with("es_") {
            es_rows += 1;
        }
    }
    assert_eq!(series.len(), 16);
    assert_eq!(es_rows, 2 * 4 * 30);
    assert_eq!(Method::ALL.len(), 4);
}

#[test]
fn compare_rejects_other_tasks_and_uneven_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = memory_config(2);
    assert!(run_compare(&cfg, dir.path()).is_err());
    let mut cfg = ExperimentConfig::default();
    cfg.experiment.task = Task::Cartpole;
    cfg.compare.episode_budget = 1000;
    assert!(run_compare(&cfg, dir.path()).is_err());
}

#[test]
fn fitdist_on_a_genome_dump_gives_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut net = NetworkSpec::with_defaults(&[2, 40, 2], 1).unwrap();
    for (i, p) in net.params[0].iter_mut().enumerate() {
        p.tau_raw = -1.0 - 0.05 * i as f64;
    }
    let path = dir.path().join("genome.csv");
    std::fs::write(&path, genome_csv(&net).unwrap()).unwrap();
    let rows = fitdist(&[&path], None, Some(0), 10, dir.path()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].distribution, "gamma");
    assert_eq!(rows[1].distribution, "lognormal");
    assert!(rows.iter().all(|r| r.n == 40));
    assert_eq!(read(&dir.path().join("fit_hist.csv")).lines().count(), 11);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x\n1.0\n2.0\noops\n").unwrap();
    let err = fitdist(&[&bad], None, None, 10, dir.path()).unwrap_err().to_string();
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn shapley_from_fifteen_rows_and_an_empty_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ablation.csv");
    let mut text = String::from("mask,mean,sd\n");
    for bits in 1..16u8 {
        let m = TrainableMask::from_bits(bits);
        let v: f64 = m.properties().map(|p| [4.0, 1.0, 2.0, 3.0][p.index()]).sum();
        text.push_str(&format!("{},{v},0.5\n", m.to_bit_string()));
    }
    std::fs::write(&path, &text).unwrap();
    let r = shapley_from_csv(&path, Some(0.0), dir.path()).unwrap();
    for (got, want) in r.values.iter().zip([4.0, 1.0, 2.0, 3.0]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!(r.top(), Property::TauM);
    assert_eq!(read(&dir.path().join("shapley.csv")).lines().count(), 5);

    let err = shapley_from_csv(&path, None, dir.path()).unwrap_err().to_string();
    assert!(err.contains("{}"), "{err}");
}

#[test]
fn stats_on_a_classification_run() {
    let run = tempfile::tempdir().unwrap();
    let cfg = classify_config();
    let s = run_train(&cfg, run.path()).unwrap();
    assert!(s.test_accuracy.is_some() && s.train_accuracy.is_some());
    let out = tempfile::tempdir().unwrap();
    let table = stats(run.path(), 3, 12, 7, out.path()).unwrap();
    assert_eq!(table.neurons.len(), 12);
    assert!(table.rates.iter().all(|r| r.len() == 10));
    assert!(table.rates.iter().flatten().all(|&x| (0.0..=1.0).contains(&x)));
    let text = read(&out.path().join("firing.csv"));
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn golden_csv_headers() {
    let es = tempfile::tempdir().unwrap();
    let mut cfg = memory_config(2);
    cfg.es.generations = 1;
    run_train(&cfg, es.path()).unwrap();
    assert_eq!(
        header(&es.path().join("curves.csv")),
        "generation,episodes,fitness_mean,fitness_max,fitness_min,sigma_mean,center_fitness,excluded"
    );
    assert_eq!(header(&es.path().join("timing.csv")), "row,seconds");
    assert_eq!(header(&es.path().join("genome.csv")), "layer,neuron,tau_m_ms,v_th,v_rest,r_ohm");

    let rl = tempfile::tempdir().unwrap();
    cfg.experiment.optimizer = Optimizer::BpttReinforce;
    cfg.bptt.updates = 2;
    cfg.bptt.batch = 4;
    run_train(&cfg, rl.path()).unwrap();
    assert_eq!(
        header(&rl.path().join("curves.csv")),
        "update,episodes,reward_mean,reward_max,reward_min,grad_norm"
    );

    let sup = tempfile::tempdir().unwrap();
    let mut cfg = classify_config();
    cfg.experiment.optimizer = Optimizer::BpttSupervised;
    cfg.bptt.updates = 2;
    cfg.bptt.batch = 4;
    run_train(&cfg, sup.path()).unwrap();
    assert_eq!(header(&sup.path().join("curves.csv")), "update,examples,loss,accuracy,grad_norm");

    let out = tempfile::tempdir().unwrap();
    fitdist(&[&es.path().join("genome.csv")], None, None, 5, out.path()).unwrap();
    assert_eq!(
        header(&out.path().join("fit.csv")),
        "source,distribution,shape,scale,log_likelihood,n,skewness,converged,degenerate"
    );
    assert_eq!(
        header(&out.path().join("fit_hist.csv")),
        "source,bin_left,bin_right,count,density,gamma_pdf,lognormal_pdf"
    );
}

#[test]
fn compare_and_ablate_headers() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.experiment.task = Task::Cartpole;
    cfg.network.hidden = vec![2];
    cfg.compare.horizons = vec![3];
    cfg.compare.methods = vec![Method::EsNeuron, Method::BpWeight];
    cfg.compare.episode_budget = 32;
    cfg.compare.es_population = 16;
    run_compare(&cfg, dir.path()).unwrap();
    assert_eq!(
        header(&dir.path().join("compare.csv")),
        "horizon,method,seed,lr,surrogate,alpha,step,episodes,reward_mean"
    );
    assert_eq!(
        header(&dir.path().join("summary.csv")),
        "horizon,method,seed,lr,surrogate,alpha,episodes,final_return,final_reward"
    );

    let mut cfg = memory_config(1);
    cfg.es.generations = 1;
    cfg.es.population = 4;
    cfg.ablate.masks = vec!["1001".into()];
    run_ablate(&cfg, dir.path()).unwrap();
    assert_eq!(
        header(&dir.path().join("ablate.csv")),
        "mask,mean,sd,coalition,hidden,trainable_params,runs"
    );
    assert_eq!(read(&dir.path().join("ablate.csv")).lines().nth(1).unwrap().split(',').nth(3), Some("\"{tau_m"));
}

#[test]
fn reinforce_and_supervised_runs_are_deterministic() {
    let mut cfg = memory_config(3);
    cfg.experiment.optimizer = Optimizer::BpttReinforce;
    cfg.bptt.updates = 5;
    cfg.bptt.batch = 6;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_train(&cfg, a.path()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    pool.install(|| run_train(&cfg, b.path())).unwrap();
    assert_eq!(
        std::fs::read(a.path().join("curves.csv")).unwrap(),
        std::fs::read(b.path().join("curves.csv")).unwrap()
    );

    let mut cfg = classify_config();
    cfg.experiment.optimizer = Optimizer::BpttSupervised;
    cfg.network.train = TrainTarget::Weights;
    cfg.bptt.updates = 3;
    cfg.bptt.batch = 5;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_train(&cfg, a.path()).unwrap();
    run_train(&cfg, b.path()).unwrap();
    assert_eq!(
        std::fs::read(a.path().join("curves.csv")).unwrap(),
        std::fs::read(b.path().join("curves.csv")).unwrap()
    );
}

#[test]
fn config_validation() {
    assert!(ExperimentConfig::from_toml("[experiment]\nbogus = 1\n").is_err());
    assert!(ExperimentConfig::from_toml("[experiment]\ntask = \"maze\"\n").is_err());

    let mut c = memory_config(2);
    c.experiment.optimizer = Optimizer::BpttSupervised;
    assert!(c.validate().is_err());
    let mut c = ExperimentConfig::default();
    c.experiment.optimizer = Optimizer::BpttReinforce;
    assert!(c.validate().is_err());
    let mut c = classify_config();
    c.env.train_images = Some(PathBuf::from("/nonexistent/images"));
    assert!(c.validate().is_err());
    let mut c = memory_config(2);
    c.experiment.optimizer = Optimizer::BpttReinforce;
    c.network.readout = hetsnn::neuron::ReadoutMode::SpikeCount;
    assert!(c.validate().is_err());
    let mut c = memory_config(2);
    c.neuron.tau_m_ms = 4.0;
    assert!(c.validate().is_err());

    let c = classify_config();
    assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
}

#[test]
fn shipped_profiles_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&p)
                .and_then(|c| c.validate())
                .unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 6);
}

#[test]
fn gradcheck_passes() {
    let r = gradcheck(40, 3, 1e-8).unwrap();
    assert_eq!(r.failures, 0, "max error {}", r.max_rel_err);
    assert_eq!(r.contraction_violations, 0);
    assert!(r.detached_steps > 0);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hetsnn"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[experiment]\ntask = \"memory\"\noptimizer = \"bptt_supervised\"\n").unwrap();
    let st = cli().args(["train", "--config"]).arg(&bad).status().unwrap();
    assert!(!st.success());

    let good = dir.path().join("good.toml");
    std::fs::write(
        &good,
        "[experiment]\nname = \"s\"\n[es]\ngenerations = 3\npopulation = 8\n[env]\nsphere_dim = 4\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    let st = cli()
        .args(["--threads", "1", "train", "--seed", "5", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let meta: Metadata = serde_json::from_str(&read(&out.join("metadata.json"))).unwrap();
    assert_eq!(meta.seed, 5);

    let env_dir = dir.path().join("env_out");
    let st = cli()
        .env("HSNN_OUT_DIR", &env_dir)
        .args(["train", "--config"])
        .arg(&good)
        .status()
        .unwrap();
    assert!(st.success());
    assert!(env_dir.join("s/curves.csv").is_file());

    let st = cli().args(["gradcheck", "--cases", "5"]).status().unwrap();
    assert!(st.success());
    let st = cli().args(["shapley", "--halfcheetah", "--out"]).arg(dir.path()).status().unwrap();
    assert!(st.success());
    assert!(read(&dir.path().join("shapley.csv")).starts_with("property,value,normalized"));
    let st = cli().args(["fitdist", "/nonexistent.csv"]).status().unwrap();
    assert!(!st.success());
}
