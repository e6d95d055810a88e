//! C ABI over the simulator.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free` function. Every fallible call returns a
//! [`DpsnnStatus`]. When the most recent call on a thread failed, its
//! description is available from [`dpsnn_last_error_message`].
//! Strings returned by the library are freed with [`dpsnn_string_free`].
//! Functions never unwind across the boundary; a panic becomes
//! [`DpsnnStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use minidpsnn::exchange::{pack_packets, unpack_packet, AxonalSpike, Hop, MAX_SPIKES_PER_PACKET};
use minidpsnn::harness::{attach_energy, run_simulation, RunConfig, RunReport};
use minidpsnn::instrumentation::{
    integrate_energy, per_event_energy, PowerSample, PowerSampleSeries,
};
use minidpsnn::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpsnnStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument value or string encoding.
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    /// Network construction or the run itself failed.
    Simulation = 5,
    Packet = 6,
    Energy = 7,
    Serialization = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Run configuration handle.
pub struct DpsnnConfig {
    inner: RunConfig,
}

/// Run report handle.
pub struct DpsnnReport {
    inner: RunReport,
}

/// Headline figures of a report, by value.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DpsnnSummary {
    pub n_neurons: u32,
    pub n_ranks: u32,
    pub steps: u32,
    pub spike_count: u64,
    pub synaptic_events: u64,
    pub delivered_events: u64,
    pub simulated_seconds: f64,
    pub wall_seconds: f64,
    pub mean_rate_hz: f64,
    pub realtime_ratio: f64,
    /// 1 when wall time did not exceed simulated time.
    pub realtime_pass: u8,
    pub packets: u64,
    pub payload_bytes: u64,
    pub mean_packet_bytes: f64,
    pub max_packet_bytes: u64,
    pub packets_per_rank: f64,
    pub payload_bytes_per_rank: f64,
    pub computation_fraction: f64,
    pub memory_fraction: f64,
    pub communication_fraction: f64,
    pub synchronization_fraction: f64,
    pub raster_hash: u64,
    /// 1 when energy figures are attached; the two fields below are 0 otherwise.
    pub has_energy: u8,
    pub joules: f64,
    pub microjoules_per_event: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DpsnnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => DpsnnStatus::Config,
            Error::Io { .. } => DpsnnStatus::Io,
            Error::Packet(_) => DpsnnStatus::Packet,
            Error::Energy(_) => DpsnnStatus::Energy,
            Error::Json(_) | Error::Csv(_) => DpsnnStatus::Serialization,
            _ => DpsnnStatus::Simulation,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: DpsnnStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Clears the thread's error, runs `f` without letting a panic escape, and
/// records any failure.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DpsnnStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DpsnnStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
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
            DpsnnStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(DpsnnStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DpsnnStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(DpsnnStatus::NullPointer, format!("{name} is null")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(DpsnnStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(DpsnnStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| fail(DpsnnStatus::Serialization, "string contains a NUL byte"))
}

fn series(t: &[f64], watts: &[f64]) -> Result<PowerSampleSeries, Failure> {
    if t.len() != watts.len() {
        return Err(fail(
            DpsnnStatus::InvalidArgument,
            "time and power arrays differ in length",
        ));
    }
    let samples = t
        .iter()
        .zip(watts)
        .map(|(&t, &watts)| PowerSample { t, watts })
        .collect();
    Ok(PowerSampleSeries::new(samples)?)
}

/// Description of the failure of the most recent call on this thread, or
/// NULL if it succeeded. Valid until the next library call on the thread.
#[no_mangle]
pub extern "C" fn dpsnn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn dpsnn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dpsnn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration: 4x4 grid of 1250-neuron columns on one rank.
#[no_mangle]
pub unsafe extern "C" fn dpsnn_config_new(out: *mut *mut DpsnnConfig) -> DpsnnStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = Box::into_raw(Box::new(DpsnnConfig {
            inner: RunConfig::default(),
        }));
        Ok(())
    })
}

/// The 10k-neuron, 3 s network used for energy-to-solution runs.
#[no_mangle]
pub unsafe extern "C" fn dpsnn_config_energy_benchmark(out: *mut *mut DpsnnConfig) -> DpsnnStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = Box::into_raw(Box::new(DpsnnConfig {
            inner: RunConfig::energy_benchmark(),
        }));
        Ok(())
    })
}

/// Reads a sectioned `key = value` config file.
#[no_mangle]
pub unsafe extern "C" fn dpsnn_config_load(
    path: *const c_char,
    out: *mut *mut DpsnnConfig,
) -> DpsnnStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = mut_arg(out, "out")?;
        let inner = RunConfig::from_ini_path(Path::new(path))?;
        *out = Box::into_raw(Box::new(DpsnnConfig { inner }));
        Ok(())
    })
}

/// Parses config text in the same format as [`dpsnn_config_load`].
#[no_mangle]
pub unsafe extern "C" fn dpsnn_config_parse(
    text: *const c_char,
    out: *mut *mut DpsnnConfig,
) -> DpsnnStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = mut_arg(out, "out")?;
        let inner = RunConfig::from_ini_str(text)?;
        *out = Box::into_raw(Box::new(DpsnnConfig { inner }));
        Ok(())
    })
}

/// Sets one key, e.g. `("run", "ranks", "4")` or `("grid", "size", "8x8")`.
/// The config is left unchanged on failure.
#[no_mangle]
pub unsafe extern "C" fn dpsnn_config_set(
    config: *mut DpsnnConfig,
    section: *const c_char,
    key: *const c_char,
    value: *const c_char,
) -> DpsnnStatus {
    guard(|| {
        let config = mut_arg(config, "config")?;
        let (section, key, value) = (
            str_arg(section, "section")?,
            str_arg(key, "key")?,
            str_arg(value, "value")?,
        );
        let mut next = config.inner.clone();
        next.set(section, key, value)?;
        config.inner = next;
        Ok(())
    })
}

/// The config in file form; free with [`dpsnn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn dpsnn_config_to_ini(
    config: *const DpsnnConfig,
    out: *mut *mut c_char,
) -> DpsnnStatus {
    guard(|| {
        let config = ref_arg(config, "config")?;
        let out = mut_arg(out, "out")?;
        *out = into_c_string(config.inner.to_ini_string())?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dpsnn_config_free(config: *mut DpsnnConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Builds the network and runs it to completion.
#[no_mangle]
pub unsafe extern "C" fn dpsnn_run(
    config: *const DpsnnConfig,
    out: *mut *mut DpsnnReport,
) -> DpsnnStatus {
    guard(|| {
        let config = ref_arg(config, "config")?;
        let out = mut_arg(out, "out")?;
        config.inner.validate()?;
        let inner = run_simulation(&config.inner)?;
        *out = Box::into_raw(Box::new(DpsnnReport { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dpsnn_report_free(report: *mut DpsnnReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[no_mangle]
pub unsafe extern "C" fn dpsnn_report_summary(
    report: *const DpsnnReport,
    out: *mut DpsnnSummary,
) -> DpsnnStatus {
    guard(|| {
        let r = &ref_arg(report, "report")?.inner;
        let out = mut_arg(out, "out")?;
        let p = &r.phases.pooled;
        let t = &r.traffic;
        let hash = u64::from_str_radix(&r.raster_hash, 16)
            .map_err(|_| fail(DpsnnStatus::Serialization, "malformed raster hash"))?;
        *out = DpsnnSummary {
            n_neurons: r.n_neurons,
            n_ranks: r.config.n_ranks,
            steps: r.steps,
            spike_count: r.spike_count,
            synaptic_events: r.synaptic_events_total,
            delivered_events: r.delivered_events,
            simulated_seconds: r.simulated_seconds,
            wall_seconds: r.wall_seconds,
            mean_rate_hz: r.mean_rate_hz,
            realtime_ratio: r.realtime.ratio,
            realtime_pass: u8::from(r.realtime.pass),
            packets: t.packets,
            payload_bytes: t.payload_bytes,
            mean_packet_bytes: t.mean_packet_bytes,
            max_packet_bytes: t.max_packet_bytes,
            packets_per_rank: t.packets_per_rank,
            payload_bytes_per_rank: t.payload_bytes_per_rank,
            computation_fraction: p.computation,
            memory_fraction: p.memory_management,
            communication_fraction: p.communication,
            synchronization_fraction: p.synchronization,
            raster_hash: hash,
            has_energy: u8::from(r.energy.is_some()),
            joules: r.energy.map_or(0.0, |e| e.joules),
            microjoules_per_event: r.energy.map_or(0.0, |e| e.microjoules_per_event),
        };
        Ok(())
    })
}

/// The full report as JSON (the `run` schema of the command-line tool);
/// free with [`dpsnn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn dpsnn_report_to_json(
    report: *const DpsnnReport,
    out: *mut *mut c_char,
) -> DpsnnStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        let out = mut_arg(out, "out")?;
        let json = serde_json::to_string(&minidpsnn::harness::AnyReport::Run(r.inner.clone()))
            .map_err(Error::from)?;
        *out = into_c_string(json)?;
        Ok(())
    })
}

/// Reads a single-run JSON report.
#[no_mangle]
pub unsafe extern "C" fn dpsnn_report_from_json(
    json: *const c_char,
    out: *mut *mut DpsnnReport,
) -> DpsnnStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        let out = mut_arg(out, "out")?;
        let inner = match serde_json::from_str(json).map_err(Error::from)? {
            minidpsnn::harness::AnyReport::Run(r) => r,
            minidpsnn::harness::AnyReport::Scaling(_) => {
                return Err(fail(
                    DpsnnStatus::InvalidArgument,
                    "expected a single-run report",
                ))
            }
        };
        *out = Box::into_raw(Box::new(DpsnnReport { inner }));
        Ok(())
    })
}

/// Attaches energy figures from `n` power samples (seconds, watts) covering
/// the whole run, net of `baseline_watts`.
#[no_mangle]
pub unsafe extern "C" fn dpsnn_report_attach_energy(
    report: *mut DpsnnReport,
    t: *const f64,
    watts: *const f64,
    n: usize,
    baseline_watts: f64,
) -> DpsnnStatus {
    guard(|| {
        let r = mut_arg(report, "report")?;
        let s = series(slice_arg(t, n, "t")?, slice_arg(watts, n, "watts")?)?;
        attach_energy(&mut r.inner, &s, None, baseline_watts)?;
        Ok(())
    })
}

/// Joules over `[t0, t1]` of a piecewise-linear power trace.
#[no_mangle]
pub unsafe extern "C" fn dpsnn_integrate_energy(
    t: *const f64,
    watts: *const f64,
    n: usize,
    t0: f64,
    t1: f64,
    out_joules: *mut f64,
) -> DpsnnStatus {
    guard(|| {
        let out = mut_arg(out_joules, "out_joules")?;
        let s = series(slice_arg(t, n, "t")?, slice_arg(watts, n, "watts")?)?;
        *out = integrate_energy(&s, t0, t1)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dpsnn_per_event_energy(
    joules: f64,
    events: u64,
    out_microjoules: *mut f64,
) -> DpsnnStatus {
    guard(|| {
        let out = mut_arg(out_microjoules, "out_microjoules")?;
        *out = per_event_energy(joules, events)?;
        Ok(())
    })
}

fn hop_from(h: u8) -> Result<Hop, Failure> {
    Ok(match h {
        0 => Hop::Direct,
        1 => Hop::Gather,
        2 => Hop::Relay,
        3 => Hop::Scatter,
        _ => {
            return Err(fail(
                DpsnnStatus::InvalidArgument,
                format!("hop {h} is not 0..=3"),
            ))
        }
    })
}

/// Encodes one packet of `n` spikes (`sources[i]` fired at `steps[i]`,
/// sorted by source) into `buf`. `n` must not exceed 63; the encoded length
/// is stored in `out_len` (also when `buf` is too small).
#[no_mangle]
pub unsafe extern "C" fn dpsnn_packet_encode(
    step: u32,
    hop: u8,
    sources: *const u32,
    steps: *const u32,
    n: usize,
    buf: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> DpsnnStatus {
    guard(|| {
        let out_len = mut_arg(out_len, "out_len")?;
        let hop = hop_from(hop)?;
        if n > MAX_SPIKES_PER_PACKET {
            return Err(fail(
                DpsnnStatus::InvalidArgument,
                format!("{n} spikes exceed the {MAX_SPIKES_PER_PACKET} a packet holds"),
            ));
        }
        let (src, st) = (
            slice_arg(sources, n, "sources")?,
            slice_arg(steps, n, "steps")?,
        );
        if src.windows(2).any(|w| w[0] > w[1]) {
            return Err(fail(DpsnnStatus::InvalidArgument, "sources must be sorted"));
        }
        let spikes: Vec<AxonalSpike> = src
            .iter()
            .zip(st)
            .map(|(&s, &t)| AxonalSpike::new(s, t))
            .collect();
        let mut packets = pack_packets(step, hop, &spikes);
        let bytes = packets.remove(0);
        *out_len = bytes.len();
        if cap < bytes.len() {
            return Err(fail(
                DpsnnStatus::BufferTooSmall,
                format!("packet needs {} bytes, buffer holds {cap}", bytes.len()),
            ));
        }
        if buf.is_null() {
            return Err(fail(DpsnnStatus::NullPointer, "buf is null"));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
        Ok(())
    })
}

/// Decodes a packet. Spikes go to `sources`/`steps` (room for `cap`); their
/// count is stored in `out_n`, also when the arrays are too small.
#[no_mangle]
pub unsafe extern "C" fn dpsnn_packet_decode(
    buf: *const u8,
    len: usize,
    out_step: *mut u32,
    out_hop: *mut u8,
    sources: *mut u32,
    steps: *mut u32,
    cap: usize,
    out_n: *mut usize,
) -> DpsnnStatus {
    guard(|| {
        let bytes = slice_arg(buf, len, "buf")?;
        let (out_step, out_hop, out_n) = (
            mut_arg(out_step, "out_step")?,
            mut_arg(out_hop, "out_hop")?,
            mut_arg(out_n, "out_n")?,
        );
        let p = unpack_packet(bytes).map_err(Error::from)?;
        *out_step = p.step;
        *out_hop = p.hop as u8;
        *out_n = p.spikes.len();
        if p.spikes.len() > cap {
            return Err(fail(
                DpsnnStatus::BufferTooSmall,
                format!("packet holds {} spikes, arrays hold {cap}", p.spikes.len()),
            ));
        }
        if !p.spikes.is_empty() && (sources.is_null() || steps.is_null()) {
            return Err(fail(DpsnnStatus::NullPointer, "spike arrays are null"));
        }
        for (i, s) in p.spikes.iter().enumerate() {
            *sources.add(i) = s.source;
            *steps.add(i) = s.step;
        }
        Ok(())
    })
}
