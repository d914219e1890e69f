//! C ABI over the simulator.
//!
//! Every fallible function returns a [`MabcStatus`] and writes its result
//! through an out-pointer. On failure a message is stored per thread and can
//! be read with [`mabc_last_error_message`]. Handles ([`MabcScenario`],
//! [`MabcRun`], [`MabcNode`]) are opaque and must be released with their
//! matching `*_free` function; strings returned by the library must be
//! released with [`mabc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mabc::dynamics::ValueMessage;
use mabc::harness::config::Expectations;
use mabc::harness::library::builtin;
use mabc::harness::{build_report, run_scenario, RunOutput, ScenarioConfig};
use mabc::protocol::{
    admission_test, average, count_relative, reduce, step_round, LogEntry, NodeState, ProtocolParams, ValueLog,
};
use mabc::trace::Trace;
use mabc::NodeId;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MabcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument was outside its domain.
    InvalidArgument = 3,
    /// The scenario text or name could not be turned into a valid scenario.
    Config = 4,
    /// The protocol step rejected its input.
    Protocol = 5,
    /// Simulation or analysis failed.
    Simulation = 6,
    /// A trace could not be parsed.
    Parse = 7,
    /// Node or round not present in the run.
    NotFound = 8,
    /// A Rust panic was caught at the boundary.
    Panic = 9,
}

/// Protocol parameters, as passed to [`mabc_node_step`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MabcParams {
    pub n: usize,
    pub f: usize,
    pub rc: u64,
    pub epsilon: f64,
}

impl From<MabcParams> for ProtocolParams {
    fn from(p: MabcParams) -> Self {
        ProtocolParams { n: p.n, f: p.f, rc: p.rc, epsilon: p.epsilon }
    }
}

/// One value received by a node in the current round.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MabcMessage {
    pub sender: u32,
    pub value: f64,
}

/// A scenario ready to run.
pub struct MabcScenario(ScenarioConfig);

/// The trace and report of one finished run.
pub struct MabcRun(RunOutput);

/// A single correct node driven one round at a time by the caller.
pub struct MabcNode(NodeState);

struct Failure {
    status: MabcStatus,
    message: String,
}

impl Failure {
    fn new(status: MabcStatus, message: impl ToString) -> Self {
        Failure { status, message: message.to_string() }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MabcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MabcStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(&f.message);
            f.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("panic: {msg}"));
            MabcStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(MabcStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    non_null(p, what)?;
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(MabcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|e| Failure::new(MabcStatus::Simulation, e))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mabc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mabc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn mabc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Whether `n >= 3f + 1`.
#[no_mangle]
pub extern "C" fn mabc_meets_cardinality(n: usize, f: usize) -> bool {
    ProtocolParams { n, f, rc: 1, epsilon: 1.0 }.meets_cardinality()
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_scenario_from_toml(toml: *const c_char, out: *mut *mut MabcScenario) -> MabcStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = str_arg(toml, "toml")?;
        let cfg = ScenarioConfig::from_toml(text).map_err(|e| Failure::new(MabcStatus::Config, e))?;
        cfg.validate().map_err(|e| Failure::new(MabcStatus::Config, e))?;
        *out = Box::into_raw(Box::new(MabcScenario(cfg)));
        Ok(())
    })
}

/// Loads one of the bundled scenarios by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_scenario_builtin(name: *const c_char, out: *mut *mut MabcScenario) -> MabcStatus {
    guard(|| {
        non_null(out, "out")?;
        let name = str_arg(name, "name")?;
        let cfg = builtin(name).map_err(|e| Failure::new(MabcStatus::Config, e))?;
        *out = Box::into_raw(Box::new(MabcScenario(cfg)));
        Ok(())
    })
}

/// Replaces the seed of a scenario.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mabc_scenario_set_seed(scenario: *mut MabcScenario, seed: u64) -> MabcStatus {
    guard(|| {
        non_null(scenario, "scenario")?;
        (*scenario).0.seed = seed;
        Ok(())
    })
}

/// Releases a scenario handle. Null is ignored.
///
/// # Safety
/// `scenario` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn mabc_scenario_free(scenario: *mut MabcScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulates the scenario and runs every checker over the trace.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_run(scenario: *const MabcScenario, out: *mut *mut MabcRun) -> MabcStatus {
    guard(|| {
        non_null(scenario, "scenario")?;
        non_null(out, "out")?;
        let output = run_scenario(&(*scenario).0).map_err(|e| Failure::new(MabcStatus::Simulation, e))?;
        *out = Box::into_raw(Box::new(MabcRun(output)));
        Ok(())
    })
}

/// Releases a run handle. Null is ignored.
///
/// # Safety
/// `run` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn mabc_run_free(run: *mut MabcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of simulated rounds.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_run_rounds(run: *const MabcRun, out: *mut u64) -> MabcStatus {
    guard(|| {
        non_null(run, "run")?;
        non_null(out, "out")?;
        *out = (*run).0.trace.last_round();
        Ok(())
    })
}

/// Whether the run converged and, if so, at which common new starting
/// round (`0` otherwise).
///
/// # Safety
/// `run` must be a live handle; `converged` and `at_round` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mabc_run_converged(
    run: *const MabcRun,
    converged: *mut bool,
    at_round: *mut u64,
) -> MabcStatus {
    guard(|| {
        non_null(run, "run")?;
        non_null(converged, "converged")?;
        non_null(at_round, "at_round")?;
        let c = &(*run).0.report.convergence;
        *converged = c.reached;
        *at_round = c.at_round.unwrap_or(0);
        Ok(())
    })
}

/// Whether every range check and scenario expectation passed.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_run_passed(run: *const MabcRun, out: *mut bool) -> MabcStatus {
    guard(|| {
        non_null(run, "run")?;
        non_null(out, "out")?;
        *out = (*run).0.report.passed;
        Ok(())
    })
}

/// Value of correct node `node` at the start of `round`; round `R + 1` is
/// the final value.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_run_value(run: *const MabcRun, node: u32, round: u64, out: *mut f64) -> MabcStatus {
    guard(|| {
        non_null(run, "run")?;
        non_null(out, "out")?;
        let v =
            (*run).0.trace.value(NodeId(node), round).ok_or_else(|| {
                Failure::new(MabcStatus::NotFound, format!("no value for node {node} at round {round}"))
            })?;
        *out = v;
        Ok(())
    })
}

/// The trace as JSON Lines. Free the result with [`mabc_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_run_trace_jsonl(run: *const MabcRun, out: *mut *mut c_char) -> MabcStatus {
    guard(|| {
        non_null(run, "run")?;
        non_null(out, "out")?;
        *out = into_c_string((*run).0.trace.to_jsonl_string())?;
        Ok(())
    })
}

/// The run report as JSON. Free the result with [`mabc_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_run_report_json(run: *const MabcRun, out: *mut *mut c_char) -> MabcStatus {
    guard(|| {
        non_null(run, "run")?;
        non_null(out, "out")?;
        *out = into_c_string((*run).0.report.to_json())?;
        Ok(())
    })
}

/// Runs the checkers over a JSON Lines trace and returns the report as
/// JSON. Free the result with [`mabc_string_free`].
///
/// # Safety
/// `trace_jsonl` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_check_trace(trace_jsonl: *const c_char, out: *mut *mut c_char) -> MabcStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = str_arg(trace_jsonl, "trace_jsonl")?;
        let trace = Trace::read_jsonl(text.as_bytes()).map_err(|e| Failure::new(MabcStatus::Parse, e))?;
        let report =
            build_report(&Expectations::default(), &trace).map_err(|e| Failure::new(MabcStatus::Simulation, e))?;
        *out = into_c_string(report.to_json())?;
        Ok(())
    })
}

/// Creates a node with an empty log at round 1.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_node_new(id: u32, value: f64, out: *mut *mut MabcNode) -> MabcStatus {
    guard(|| {
        non_null(out, "out")?;
        let state = NodeState::new(NodeId(id), value).map_err(|e| Failure::new(MabcStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(MabcNode(state)));
        Ok(())
    })
}

/// Releases a node handle. Null is ignored.
///
/// # Safety
/// `node` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn mabc_node_free(node: *mut MabcNode) {
    if !node.is_null() {
        drop(Box::from_raw(node));
    }
}

/// Executes the protocol part of `round`: merges `inbox` into the log, and
/// recomputes the value when the admission test passes. On error the node
/// is left unchanged. `updated` may be null.
///
/// # Safety
/// `node` must be a live handle; `inbox` must point to `len` messages (or
/// be null with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn mabc_node_step(
    node: *mut MabcNode,
    params: MabcParams,
    round: u64,
    inbox: *const MabcMessage,
    len: usize,
    updated: *mut bool,
) -> MabcStatus {
    guard(|| {
        non_null(node, "node")?;
        let params = ProtocolParams::from(params);
        params.validate().map_err(|e| Failure::new(MabcStatus::InvalidArgument, e))?;
        let state = &mut (*node).0;
        let msgs: Vec<ValueMessage> = slice_arg(inbox, len, "inbox")?
            .iter()
            .map(|m| ValueMessage { sender: NodeId(m.sender), receiver: state.id, value: m.value, round })
            .collect();
        let outcome = step_round(state, &msgs, round, &params).map_err(|e| Failure::new(MabcStatus::Protocol, e))?;
        if !updated.is_null() {
            *updated = outcome.updated();
        }
        *state = outcome.state;
        Ok(())
    })
}

/// Current value of a node.
///
/// # Safety
/// `node` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_node_value(node: *const MabcNode, out: *mut f64) -> MabcStatus {
    guard(|| {
        non_null(node, "node")?;
        non_null(out, "out")?;
        *out = (*node).0.value;
        Ok(())
    })
}

/// Number of entries currently retained in the node's log.
///
/// # Safety
/// `node` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mabc_node_log_len(node: *const MabcNode, out: *mut usize) -> MabcStatus {
    guard(|| {
        non_null(node, "node")?;
        non_null(out, "out")?;
        *out = (*node).0.log.len();
        Ok(())
    })
}

/// Counts logged values `>= own` (`x`) and `<= own` (`y`).
///
/// # Safety
/// `values` must point to `len` doubles (or be null with `len == 0`); `x`
/// and `y` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mabc_count_relative(
    values: *const f64,
    len: usize,
    own: f64,
    x: *mut usize,
    y: *mut usize,
) -> MabcStatus {
    guard(|| {
        non_null(x, "x")?;
        non_null(y, "y")?;
        let (a, b) = count_relative(&log_of(slice_arg(values, len, "values")?)?, own);
        *x = a;
        *y = b;
        Ok(())
    })
}

/// Reduces a log and averages the survivors with `own`. Entry `k` is
/// treated as coming from sender `k + 1`, which decides ties. When the
/// admission test fails `*updated` is false and `*out` is `own`.
///
/// # Safety
/// `values` must point to `len` doubles (or be null with `len == 0`);
/// `updated` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mabc_reduce_average(
    values: *const f64,
    len: usize,
    own: f64,
    f: usize,
    updated: *mut bool,
    out: *mut f64,
) -> MabcStatus {
    guard(|| {
        non_null(updated, "updated")?;
        non_null(out, "out")?;
        if !own.is_finite() {
            return Err(Failure::new(MabcStatus::InvalidArgument, "own value is not finite"));
        }
        let log = log_of(slice_arg(values, len, "values")?)?;
        let (x, y) = count_relative(&log, own);
        if admission_test(x, y, f) {
            let red = reduce(&log, f, x, y, own).map_err(|e| Failure::new(MabcStatus::Protocol, e))?;
            *updated = true;
            *out = average(&red.survivors, own);
        } else {
            *updated = false;
            *out = own;
        }
        Ok(())
    })
}

fn log_of(values: &[f64]) -> Result<ValueLog, Failure> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Failure::new(MabcStatus::InvalidArgument, "log values must be finite"));
    }
    let len = u32::try_from(values.len()).map_err(|_| Failure::new(MabcStatus::InvalidArgument, "log too long"))?;
    Ok((0..len).map(|k| LogEntry { sender: NodeId(k + 1), value: values[k as usize], recv_round: 1 }).collect())
}
