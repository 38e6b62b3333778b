//! C interface to `hetsnn`.
//!
//! Every fallible function returns an [`HsnnStatus`]; on failure the message
//! is available from [`hsnn_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function. Panics never
//! cross the boundary: they are reported as `HSNN_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hetsnn::analysis::{fit_gamma, fit_lognormal, halfcheetah_report, shapley_exact, COALITIONS, PLAYERS};
use hetsnn::es::{
    episode_seed, pgpe_apply, pgpe_population, Direction, EsConfig, EsState, GenerationStats,
};
use hetsnn::neuron::{
    forward, genome_len, genome_pack, genome_unpack, NetworkSpec, ReadoutMode, TrainableMask,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsnnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Simulation = 3,
    Optimizer = 4,
    Analysis = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

struct Fail(HsnnStatus, String);

impl Fail {
    fn new(status: HsnnStatus, msg: impl std::fmt::Display) -> Self {
        Self(status, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HsnnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HsnnStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            HsnnStatus::Panic
        }
    }
}

fn null(name: &str) -> Fail {
    Fail::new(HsnnStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn handle_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(name))
}

fn want(got: usize, need: usize, name: &str) -> Result<(), Fail> {
    if got < need {
        return Err(Fail::new(
            HsnnStatus::BufferTooSmall,
            format!("`{name}` holds {got} values, {need} needed"),
        ));
    }
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hsnn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hsnn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Feedforward LIF network.
pub struct HsnnNetwork {
    spec: NetworkSpec,
}

/// Creates a network with seeded random weights and default neuron parameters.
///
/// `layer_sizes[0]` is the input width; each further entry is a neuron layer.
///
/// # Safety
/// `layer_sizes` must point to `n_layers` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_new(
    layer_sizes: *const usize,
    n_layers: usize,
    seed: u64,
    out: *mut *mut HsnnNetwork,
) -> HsnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sizes = slice(layer_sizes, n_layers, "layer_sizes")?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Fail::new(
                HsnnStatus::InvalidArgument,
                "need at least two positive layer sizes",
            ));
        }
        let spec = NetworkSpec::with_defaults(sizes, seed)
            .map_err(|e| Fail::new(HsnnStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(HsnnNetwork { spec }));
        Ok(())
    })
}

/// Loads a network saved as `network.json` by the training commands.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_load_json(
    path: *const c_char,
    out: *mut *mut HsnnNetwork,
) -> HsnnStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Fail::new(HsnnStatus::InvalidArgument, e))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Fail::new(HsnnStatus::Io, format!("{path}: {e}")))?;
        let spec: NetworkSpec = serde_json::from_str(&text)
            .map_err(|e| Fail::new(HsnnStatus::InvalidArgument, format!("{path}: {e}")))?;
        spec.validate()
            .map_err(|e| Fail::new(HsnnStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(HsnnNetwork { spec }));
        Ok(())
    })
}

/// # Safety
/// `net` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_free(net: *mut HsnnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_input_dim(net: *const HsnnNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.spec.input_dim())
}

/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_output_dim(net: *const HsnnNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.spec.output_dim())
}

/// Number of values in the neuron-parameter genome under the current mask.
///
/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_genome_len(net: *const HsnnNetwork) -> usize {
    net.as_ref().map_or(0, |n| genome_len(&n.spec))
}

/// Sets which neuron properties belong to the genome: bit 0 tau_m, bit 1
/// v_th, bit 2 v_rest, bit 3 R.
///
/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_set_trainable(net: *mut HsnnNetwork, bits: u8) -> HsnnStatus {
    guard(|| {
        let net = handle_mut(net, "net")?;
        if bits == 0 || bits > 0b1111 {
            return Err(Fail::new(
                HsnnStatus::InvalidArgument,
                format!("mask bits {bits:#06b} must select 1 to 4 properties"),
            ));
        }
        net.spec.trainable = TrainableMask::from_bits(bits);
        Ok(())
    })
}

/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_set_input_gain(net: *mut HsnnNetwork, gain: f64) -> HsnnStatus {
    guard(|| {
        let net = handle_mut(net, "net")?;
        if !gain.is_finite() {
            return Err(Fail::new(HsnnStatus::InvalidArgument, "gain must be finite"));
        }
        net.spec.input_gain = gain;
        Ok(())
    })
}

/// Selects the readout: `false` for membrane potential, `true` for spike counts.
///
/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_set_spike_readout(net: *mut HsnnNetwork, spikes: bool) -> HsnnStatus {
    guard(|| {
        let net = handle_mut(net, "net")?;
        net.spec.readout = if spikes {
            ReadoutMode::SpikeCount
        } else {
            ReadoutMode::MembranePotential
        };
        Ok(())
    })
}

/// Copies the genome into `buf`, which must hold `hsnn_network_genome_len` values.
///
/// # Safety
/// `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_get_genome(
    net: *const HsnnNetwork,
    buf: *mut f64,
    len: usize,
) -> HsnnStatus {
    guard(|| {
        let net = handle(net, "net")?;
        let g = genome_pack(&net.spec);
        want(len, g.len(), "buf")?;
        slice_mut(buf, len, "buf")?[..g.len()].copy_from_slice(&g);
        Ok(())
    })
}

/// # Safety
/// `genome` must point to `len` readable values.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_set_genome(
    net: *mut HsnnNetwork,
    genome: *const f64,
    len: usize,
) -> HsnnStatus {
    guard(|| {
        let net = handle_mut(net, "net")?;
        let g = slice(genome, len, "genome")?;
        net.spec = genome_unpack(&net.spec, g).map_err(|e| Fail::new(HsnnStatus::InvalidArgument, e))?;
        Ok(())
    })
}

/// Simulates `steps` steps from rest. `inputs` is row-major `steps x input_dim`;
/// `outputs` receives row-major `steps x output_dim`.
///
/// # Safety
/// Buffers must hold the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn hsnn_network_run(
    net: *const HsnnNetwork,
    inputs: *const f64,
    steps: usize,
    outputs: *mut f64,
    outputs_len: usize,
) -> HsnnStatus {
    guard(|| {
        let net = handle(net, "net")?;
        let (n_in, n_out) = (net.spec.input_dim(), net.spec.output_dim());
        let x = slice(inputs, steps * n_in, "inputs")?;
        want(outputs_len, steps * n_out, "outputs")?;
        let out = slice_mut(outputs, outputs_len, "outputs")?;
        let rows: Vec<Vec<f64>> = x.chunks(n_in.max(1)).map(<[f64]>::to_vec).collect();
        let (ys, _) = forward(&net.spec, &rows).map_err(|e| Fail::new(HsnnStatus::Simulation, e))?;
        for (dst, y) in out.chunks_mut(n_out).zip(&ys) {
            dst.copy_from_slice(y);
        }
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HsnnPgpeConfig {
    /// Even number of perturbed genomes per generation.
    pub population: usize,
    pub sigma0: f64,
    pub lr_center: f64,
    pub lr_sigma: f64,
    pub seed: u64,
    pub rank_shaping: bool,
    /// Ascend when true, descend when false.
    pub maximize: bool,
    pub episodes_per_genome: usize,
}

/// Defaults used by the Rust API.
#[no_mangle]
pub extern "C" fn hsnn_pgpe_config_default() -> HsnnPgpeConfig {
    let d = EsConfig::default();
    HsnnPgpeConfig {
        population: d.population,
        sigma0: d.sigma0,
        lr_center: d.lr_center,
        lr_sigma: d.lr_sigma,
        seed: d.seed,
        rank_shaping: d.rank_shaping,
        maximize: d.direction == Direction::Maximize,
        episodes_per_genome: d.episodes_per_genome,
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HsnnGenerationStats {
    pub generation: u64,
    pub fitness_mean: f64,
    pub fitness_max: f64,
    pub fitness_min: f64,
    pub sigma_mean: f64,
    pub excluded: usize,
}

impl From<GenerationStats> for HsnnGenerationStats {
    fn from(s: GenerationStats) -> Self {
        Self {
            generation: s.generation,
            fitness_mean: s.fitness_mean,
            fitness_max: s.fitness_max,
            fitness_min: s.fitness_min,
            sigma_mean: s.sigma_mean,
            excluded: s.excluded,
        }
    }
}

/// Fitness callback: `(genome, dim, episode_seed, user_data) -> fitness`.
/// Non-finite returns exclude the member's antithetic pair.
pub type HsnnFitnessFn = Option<unsafe extern "C" fn(*const f64, usize, u64, *mut c_void) -> f64>;

/// Genomes of a generation and their noise vectors.
type Population = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// PGPE optimizer state. `ask` yields the population of the current
/// generation; `tell` applies its fitnesses and advances one generation.
pub struct HsnnPgpe {
    cfg: EsConfig,
    state: EsState,
    pending: Option<Population>,
}

impl HsnnPgpe {
    fn population(&mut self) -> &Population {
        let (state, population) = (&self.state, self.cfg.population);
        self.pending.get_or_insert_with(|| pgpe_population(state, population))
    }

    fn tell(&mut self, fitness: &[f64]) -> Result<HsnnGenerationStats, Fail> {
        let (_, eps) = self.population();
        let eps = eps.clone();
        let (next, stats) = pgpe_apply(&self.state, &self.cfg, &eps, fitness)
            .map_err(|e| Fail::new(HsnnStatus::Optimizer, e))?;
        self.state = next;
        self.pending = None;
        Ok(stats.into())
    }
}

/// # Safety
/// `center` must point to `dim` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsnn_pgpe_new(
    config: *const HsnnPgpeConfig,
    center: *const f64,
    dim: usize,
    out: *mut *mut HsnnPgpe,
) -> HsnnStatus {
    guard(|| {
        let c = handle(config, "config")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if dim == 0 {
            return Err(Fail::new(HsnnStatus::InvalidArgument, "dimension must be positive"));
        }
        let center = slice(center, dim, "center")?.to_vec();
        let cfg = EsConfig {
            population: c.population,
            sigma0: c.sigma0,
            lr_center: c.lr_center,
            lr_sigma: c.lr_sigma,
            seed: c.seed,
            rank_shaping: c.rank_shaping,
            direction: if c.maximize {
                Direction::Maximize
            } else {
                Direction::Minimize
            },
            episodes_per_genome: c.episodes_per_genome,
            ..EsConfig::default()
        };
        cfg.validate().map_err(|e| Fail::new(HsnnStatus::InvalidArgument, e))?;
        let state = EsState::new(center, &cfg);
        *out = Box::into_raw(Box::new(HsnnPgpe {
            cfg,
            state,
            pending: None,
        }));
        Ok(())
    })
}

/// # Safety
/// `es` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn hsnn_pgpe_free(es: *mut HsnnPgpe) {
    if !es.is_null() {
        drop(Box::from_raw(es));
    }
}

/// # Safety
/// `es` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsnn_pgpe_dim(es: *const HsnnPgpe) -> usize {
    es.as_ref().map_or(0, |e| e.state.dim())
}

/// Completed generations.
///
/// # Safety
/// `es` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsnn_pgpe_generation(es: *const HsnnPgpe) -> u64 {
    es.as_ref().map_or(0, |e| e.state.generation)
}

/// # Safety
/// `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn hsnn_pgpe_center(es: *const HsnnPgpe, buf: *mut f64, len: usize) -> HsnnStatus {
    guard(|| {
        let es = handle(es, "es")?;
        want(len, es.state.dim(), "buf")?;
        slice_mut(buf, len, "buf")?[..es.state.dim()].copy_from_slice(&es.state.center);
        Ok(())
    })
}

/// # Safety
/// `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn hsnn_pgpe_sigma(es: *const HsnnPgpe, buf: *mut f64, len: usize) -> HsnnStatus {
    guard(|| {
        let es = handle(es, "es")?;
        want(len, es.state.dim(), "buf")?;
        slice_mut(buf, len, "buf")?[..es.state.dim()].copy_from_slice(&es.state.sigma);
        Ok(())
    })
}

/// Writes the current generation's genomes, row-major `population x dim`,
/// interleaved as `+0, -0, +1, -1, ...`. Repeated calls return the same rows
/// until `hsnn_pgpe_tell`.
///
/// # Safety
/// `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn hsnn_pgpe_ask(es: *mut HsnnPgpe, buf: *mut f64, len: usize) -> HsnnStatus {
    guard(|| {
        let es = handle_mut(es, "es")?;
        let need = es.cfg.population * es.state.dim();
        want(len, need, "buf")?;
        let out = slice_mut(buf, len, "buf")?;
        let dim = es.state.dim();
        for (dst, g) in out.chunks_mut(dim).zip(&es.population().0) {
            dst.copy_from_slice(g);
        }
        Ok(())
    })
}

/// Applies fitnesses in `ask` order and advances one generation.
///
/// # Safety
/// `fitness` must point to `len` readable values; `stats` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hsnn_pgpe_tell(
    es: *mut HsnnPgpe,
    fitness: *const f64,
    len: usize,
    stats: *mut HsnnGenerationStats,
) -> HsnnStatus {
    guard(|| {
        let es = handle_mut(es, "es")?;
        if len != es.cfg.population {
            return Err(Fail::new(
                HsnnStatus::InvalidArgument,
                format!("{len} fitness values for population {}", es.cfg.population),
            ));
        }
        let s = es.tell(slice(fitness, len, "fitness")?)?;
        if !stats.is_null() {
            *stats = s;
        }
        Ok(())
    })
}

/// Runs one generation, calling `fitness` serially for each member and
/// episode with the counter-based episode seed.
///
/// # Safety
/// `fitness` must be safe to call with the arguments described on
/// [`HsnnFitnessFn`]; `stats` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hsnn_pgpe_step(
    es: *mut HsnnPgpe,
    fitness: HsnnFitnessFn,
    user_data: *mut c_void,
    stats: *mut HsnnGenerationStats,
) -> HsnnStatus {
    guard(|| {
        let es = handle_mut(es, "es")?;
        let f = fitness.ok_or_else(|| null("fitness"))?;
        let (seed, generation, episodes) = (es.state.seed, es.state.generation, es.cfg.episodes_per_genome);
        let values: Vec<f64> = es
            .population()
            .0
            .iter()
            .enumerate()
            .map(|(m, g)| {
                (0..episodes)
                    .map(|ep| f(g.as_ptr(), g.len(), episode_seed(seed, generation, m as u64, ep as u64), user_data))
                    .sum::<f64>()
                    / episodes as f64
            })
            .collect();
        let s = es.tell(&values)?;
        if !stats.is_null() {
            *stats = s;
        }
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HsnnFit {
    pub shape: f64,
    pub scale: f64,
    pub log_likelihood: f64,
    pub n: usize,
    pub converged: bool,
    pub degenerate: bool,
}

unsafe fn fit_with(
    samples: *const f64,
    n: usize,
    out: *mut HsnnFit,
    fit: fn(&[f64]) -> Result<hetsnn::analysis::FitResult, hetsnn::analysis::AnalysisError>,
) -> HsnnStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        let r = fit(slice(samples, n, "samples")?).map_err(|e| Fail::new(HsnnStatus::Analysis, e))?;
        *out = HsnnFit {
            shape: r.shape,
            scale: r.scale,
            log_likelihood: r.log_likelihood,
            n: r.n,
            converged: r.converged,
            degenerate: r.degenerate,
        };
        Ok(())
    })
}

/// Maximum-likelihood gamma fit; `scale` is theta.
///
/// # Safety
/// `samples` must point to `n` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsnn_fit_gamma(samples: *const f64, n: usize, out: *mut HsnnFit) -> HsnnStatus {
    fit_with(samples, n, out, fit_gamma)
}

/// Maximum-likelihood lognormal fit; `shape` is sigma, `scale` is exp(mu).
///
/// # Safety
/// `samples` must point to `n` readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsnn_fit_lognormal(samples: *const f64, n: usize, out: *mut HsnnFit) -> HsnnStatus {
    fit_with(samples, n, out, fit_lognormal)
}

/// Exact Shapley values over the four neuron properties. `table` holds 16
/// coalition values indexed by mask bits; `values` receives 4 entries.
///
/// # Safety
/// `table` must point to 16 readable values, `values` to 4 writable ones;
/// `residual` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hsnn_shapley(
    table: *const f64,
    values: *mut f64,
    residual: *mut f64,
) -> HsnnStatus {
    guard(|| {
        let t = slice(table, COALITIONS, "table")?;
        let out = slice_mut(values, PLAYERS, "values")?;
        let full: [Option<f64>; COALITIONS] = std::array::from_fn(|i| Some(t[i]));
        let r = shapley_exact(&full).map_err(|e| Fail::new(HsnnStatus::Analysis, e))?;
        out.copy_from_slice(&r.values);
        if !residual.is_null() {
            *residual = r.efficiency_residual;
        }
        Ok(())
    })
}

/// Shapley values of the bundled HalfCheetah ablation table.
///
/// # Safety
/// `values` must point to 4 writable values.
#[no_mangle]
pub unsafe extern "C" fn hsnn_shapley_halfcheetah(empty_value: f64, values: *mut f64) -> HsnnStatus {
    guard(|| {
        if !empty_value.is_finite() {
            return Err(Fail::new(HsnnStatus::InvalidArgument, "empty value must be finite"));
        }
        let out = slice_mut(values, PLAYERS, "values")?;
        out.copy_from_slice(&halfcheetah_report(empty_value).values);
        Ok(())
    })
}
