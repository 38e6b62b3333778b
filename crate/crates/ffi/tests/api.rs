use std::ffi::{c_void, CStr, CString};
use std::ptr;

use hetsnn_ffi::*;

fn last_error() -> String {
    let p = hsnn_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn network(sizes: &[usize]) -> *mut HsnnNetwork {
    let mut net = ptr::null_mut();
    let st = unsafe { hsnn_network_new(sizes.as_ptr(), sizes.len(), 7, &mut net) };
    assert_eq!(st, HsnnStatus::Ok);
    net
}

#[test]
fn network_lifecycle_and_genome_round_trip() {
    let net = network(&[3, 5, 2]);
    unsafe {
        assert_eq!(hsnn_network_input_dim(net), 3);
        assert_eq!(hsnn_network_output_dim(net), 2);
        let n = hsnn_network_genome_len(net);
        assert_eq!(n, 4 * 7);
        let mut g = vec![0.0; n];
        assert_eq!(hsnn_network_get_genome(net, g.as_mut_ptr(), n), HsnnStatus::Ok);
        g[0] += 0.5;
        assert_eq!(hsnn_network_set_genome(net, g.as_ptr(), n), HsnnStatus::Ok);
        let mut back = vec![0.0; n];
        hsnn_network_get_genome(net, back.as_mut_ptr(), n);
        assert_eq!(back, g);

        assert_eq!(hsnn_network_set_trainable(net, 0b0001), HsnnStatus::Ok);
        assert_eq!(hsnn_network_genome_len(net), 7);
        assert_eq!(hsnn_network_set_trainable(net, 0), HsnnStatus::InvalidArgument);

        let mut small = vec![0.0; 2];
        assert_eq!(
            hsnn_network_get_genome(net, small.as_mut_ptr(), 2),
            HsnnStatus::BufferTooSmall
        );
        assert!(last_error().contains("needed"));
        hsnn_network_free(net);
        hsnn_network_free(ptr::null_mut());
    }
}

#[test]
fn run_matches_the_rust_simulator() {
    let sizes = [2, 6, 3];
    let net = network(&sizes);
    let steps = 10;
    let inputs: Vec<f64> = (0..steps * 2).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut out = vec![0.0; steps * 3];
    let st = unsafe { hsnn_network_set_input_gain(net, 4.0) };
    assert_eq!(st, HsnnStatus::Ok);
    let st = unsafe { hsnn_network_run(net, inputs.as_ptr(), steps, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, HsnnStatus::Ok);

    let mut spec = hetsnn::neuron::NetworkSpec::with_defaults(&sizes, 7).unwrap();
    spec.input_gain = 4.0;
    let rows: Vec<Vec<f64>> = inputs.chunks(2).map(<[f64]>::to_vec).collect();
    let (ys, _) = hetsnn::neuron::forward(&spec, &rows).unwrap();
    assert_eq!(out, ys.concat());

    let st = unsafe { hsnn_network_run(net, inputs.as_ptr(), steps, out.as_mut_ptr(), 3) };
    assert_eq!(st, HsnnStatus::BufferTooSmall);
    let mut bad = inputs.clone();
    bad[3] = f64::NAN;
    let st = unsafe { hsnn_network_run(net, bad.as_ptr(), steps, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, HsnnStatus::Simulation);
    unsafe { hsnn_network_free(net) };
}

#[test]
fn null_and_invalid_arguments_set_an_error() {
    let mut net = ptr::null_mut();
    let st = unsafe { hsnn_network_new(ptr::null(), 2, 0, &mut net) };
    assert_eq!(st, HsnnStatus::NullPointer);
    assert!(last_error().contains("layer_sizes"));
    let sizes = [4usize];
    let st = unsafe { hsnn_network_new(sizes.as_ptr(), 1, 0, &mut net) };
    assert_eq!(st, HsnnStatus::InvalidArgument);
    assert!(net.is_null());

    let path = CString::new("/nonexistent/network.json").unwrap();
    let st = unsafe { hsnn_network_load_json(path.as_ptr(), &mut net) };
    assert_eq!(st, HsnnStatus::Io);

    let ok = network(&[1, 1]);
    assert!(hsnn_last_error_message().is_null());
    unsafe { hsnn_network_free(ok) };
}

#[test]
fn load_json_written_by_the_core() {
    let dir = tempfile::tempdir().unwrap();
    let spec = hetsnn::neuron::NetworkSpec::with_defaults(&[2, 3, 2], 9).unwrap();
    let path = dir.path().join("network.json");
    std::fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { hsnn_network_load_json(c.as_ptr(), &mut net) }, HsnnStatus::Ok);
    let mut g = vec![0.0; 20];
    unsafe {
        assert_eq!(hsnn_network_get_genome(net, g.as_mut_ptr(), 20), HsnnStatus::Ok);
        hsnn_network_free(net);
    }
    assert_eq!(g, hetsnn::neuron::genome_pack(&spec));
}

unsafe extern "C" fn neg_sphere(g: *const f64, n: usize, _seed: u64, calls: *mut c_void) -> f64 {
    *(calls as *mut usize) += 1;
    -std::slice::from_raw_parts(g, n).iter().map(|x| x * x).sum::<f64>()
}

#[test]
fn pgpe_step_improves_and_matches_ask_tell() {
    let mut cfg = hsnn_pgpe_config_default();
    cfg.population = 16;
    cfg.seed = 3;
    let center = [1.0; 4];
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(hsnn_pgpe_new(&cfg, center.as_ptr(), 4, &mut a), HsnnStatus::Ok);
        assert_eq!(hsnn_pgpe_new(&cfg, center.as_ptr(), 4, &mut b), HsnnStatus::Ok);
        let mut calls = 0usize;
        let mut stats = HsnnGenerationStats::default();
        for g in 0..50 {
            let st = hsnn_pgpe_step(a, Some(neg_sphere), &mut calls as *mut usize as *mut c_void, &mut stats);
            assert_eq!(st, HsnnStatus::Ok);
            assert_eq!(stats.generation, g);

            let mut pop = vec![0.0; 16 * 4];
            assert_eq!(hsnn_pgpe_ask(b, pop.as_mut_ptr(), pop.len()), HsnnStatus::Ok);
            let fit: Vec<f64> = pop.chunks(4).map(|x| -x.iter().map(|v| v * v).sum::<f64>()).collect();
            assert_eq!(hsnn_pgpe_tell(b, fit.as_ptr(), fit.len(), ptr::null_mut()), HsnnStatus::Ok);
        }
        assert_eq!(calls, 50 * 16);
        assert_eq!(hsnn_pgpe_generation(a), 50);
        let (mut ca, mut cb) = ([0.0; 4], [0.0; 4]);
        hsnn_pgpe_center(a, ca.as_mut_ptr(), 4);
        hsnn_pgpe_center(b, cb.as_mut_ptr(), 4);
        assert_eq!(ca, cb);
        assert!(ca.iter().map(|x| x * x).sum::<f64>() < 0.5);
        let mut sigma = [0.0; 4];
        assert_eq!(hsnn_pgpe_sigma(a, sigma.as_mut_ptr(), 4), HsnnStatus::Ok);
        assert!(sigma.iter().all(|s| *s > 0.0));

        assert_eq!(hsnn_pgpe_tell(b, center.as_ptr(), 4, ptr::null_mut()), HsnnStatus::InvalidArgument);
        assert_eq!(hsnn_pgpe_step(a, None, ptr::null_mut(), ptr::null_mut()), HsnnStatus::NullPointer);
        hsnn_pgpe_free(a);
        hsnn_pgpe_free(b);
    }
}

#[test]
fn pgpe_rejects_odd_population() {
    let mut cfg = hsnn_pgpe_config_default();
    cfg.population = 7;
    let mut es = ptr::null_mut();
    let st = unsafe { hsnn_pgpe_new(&cfg, [0.0].as_ptr(), 1, &mut es) };
    assert_eq!(st, HsnnStatus::InvalidArgument);
    assert!(last_error().contains("even"));
}

#[test]
fn analysis_functions() {
    let xs: Vec<f64> = (1..200).map(|i| 1.0 + (i as f64 * 0.1).sin().abs() * 3.0).collect();
    let mut fit = HsnnFit::default();
    unsafe {
        assert_eq!(hsnn_fit_gamma(xs.as_ptr(), xs.len(), &mut fit), HsnnStatus::Ok);
        let r = hetsnn::analysis::fit_gamma(&xs).unwrap();
        assert_eq!((fit.shape, fit.scale, fit.n), (r.shape, r.scale, r.n));
        assert_eq!(hsnn_fit_lognormal(xs.as_ptr(), xs.len(), &mut fit), HsnnStatus::Ok);
        assert_eq!(hsnn_fit_gamma(xs.as_ptr(), 1, &mut fit), HsnnStatus::Analysis);

        let table: Vec<f64> = (0..16u32).map(|b| b.count_ones() as f64).collect();
        let mut v = [0.0; 4];
        let mut res = 1.0;
        assert_eq!(hsnn_shapley(table.as_ptr(), v.as_mut_ptr(), &mut res), HsnnStatus::Ok);
        assert_eq!(v, [1.0; 4]);
        assert_eq!(res, 0.0);

        assert_eq!(hsnn_shapley_halfcheetah(0.0, v.as_mut_ptr()), HsnnStatus::Ok);
        assert!(v[0] > v[1] && v[0] > v[2] && v[0] > v[3]);
        assert_eq!(hsnn_shapley_halfcheetah(f64::NAN, v.as_mut_ptr()), HsnnStatus::InvalidArgument);
    }
    let ver = unsafe { CStr::from_ptr(hsnn_version()) };
    assert_eq!(ver.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
