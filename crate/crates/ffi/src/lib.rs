//! C ABI over `lord_core`.
//!
//! Every fallible function returns a [`LordStatus`]; on failure the message is
//! kept per thread and can be read with [`lord_last_error`]. Handles are
//! opaque, created by `*_new`/`*_load` and released by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lord_core::embedding::{BackendConfig, BackendKind, EmbeddingError, EmbeddingVector};
use lord_core::obs::{build_kinematics, compute_ttc, describe_text, render_frame, FRAME_SIZE, FEATURES};
use lord_core::ppo::{checkpoint_load, policy_forward, sample_action, PolicyParams, PpoError};
use lord_core::reward::{cosine_similarity, grad_reward, lord_reward, RewardEngine, RewardSpec};
use lord_core::sim::{reset, step_observed, EnvConfig, MetaAction, SimError, WorldState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bytes in one rendered 224×224 RGB frame.
pub const LORD_FRAME_BYTES: usize = 150_528;
const _: () = assert!(LORD_FRAME_BYTES == FRAME_SIZE * FRAME_SIZE * 3);
pub const LORD_ACTION_COUNT: usize = 5;
pub const LORD_TTC_THRESHOLD: f64 = 5.0;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LordStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Spawn = 4,
    Lifecycle = 5,
    Embedding = 6,
    Unavailable = 7,
    Persistence = 8,
    Numerical = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LordStepResult {
    /// Reward of the attached spec, NaN when none is attached.
    pub reward: f64,
    pub ego_x: f64,
    pub ego_speed: f64,
    pub step_index: u32,
    pub collided: bool,
    pub terminated: bool,
    pub truncated: bool,
}

/// Simulator instance with an optional reward.
pub struct LordEnv {
    config: EnvConfig,
    world: Option<WorldState>,
    reward: Option<RewardEngine>,
}

/// Trained policy with its own sampling stream.
pub struct LordPolicy {
    params: PolicyParams,
    rng: ChaCha8Rng,
}

struct Failure(LordStatus, String);

type FfiResult<T = ()> = Result<T, Failure>;

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let status = match e {
            SimError::Config(_) => LordStatus::Config,
            SimError::Spawn { .. } => LordStatus::Spawn,
            SimError::Lifecycle(_) => LordStatus::Lifecycle,
        };
        Failure(status, e.to_string())
    }
}

impl From<EmbeddingError> for Failure {
    fn from(e: EmbeddingError) -> Self {
        let status = match e {
            EmbeddingError::Input(_) => LordStatus::InvalidArgument,
            EmbeddingError::Availability(_) => LordStatus::Unavailable,
            EmbeddingError::Interface(_) | EmbeddingError::Protocol(_) => LordStatus::Embedding,
        };
        Failure(status, e.to_string())
    }
}

impl From<PpoError> for Failure {
    fn from(e: PpoError) -> Self {
        match e {
            PpoError::Env(e) => e.into(),
            PpoError::Embedding(e) => e.into(),
            PpoError::Input(m) => Failure(LordStatus::InvalidArgument, m),
            PpoError::Numerical(m) => Failure(LordStatus::Numerical, m),
            PpoError::Persistence(m) => Failure(LordStatus::Persistence, m),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn guard(f: impl FnOnce() -> FfiResult) -> LordStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LordStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LordStatus::Panic
        }
    }
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn null(what: &str) -> Failure {
    Failure(LordStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> FfiResult<&'a str> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| Failure(LordStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(ptr: *mut T, what: &str) -> FfiResult<&'a mut T> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a, T>(ptr: *mut T, len: usize, needed: usize, what: &str) -> FfiResult<&'a mut [T]> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(Failure(LordStatus::BufferTooSmall, format!("{what} holds {len}, needs {needed}")));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, needed))
}

unsafe fn in_vector(ptr: *const f64, dim: usize, what: &str) -> FfiResult<EmbeddingVector> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(EmbeddingVector::new(std::slice::from_raw_parts(ptr, dim).to_vec())?)
}

/// Copies `text` plus a NUL terminator; `needed` receives the full size.
unsafe fn write_c_string(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> FfiResult {
    if !needed.is_null() {
        *needed = text.len() + 1;
    }
    let out = out_slice(buf.cast::<u8>(), len, text.len() + 1, "buffer")?;
    out[..text.len()].copy_from_slice(text.as_bytes());
    out[text.len()] = 0;
    Ok(())
}

impl LordEnv {
    fn world(&self) -> FfiResult<&WorldState> {
        self.world.as_ref().ok_or_else(|| Failure(LordStatus::Lifecycle, "call lord_env_reset first".into()))
    }
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn lord_status_name(status: LordStatus) -> *const c_char {
    let name: &'static CStr = match status {
        LordStatus::Ok => c"ok",
        LordStatus::NullPointer => c"null pointer",
        LordStatus::InvalidArgument => c"invalid argument",
        LordStatus::Config => c"configuration error",
        LordStatus::Spawn => c"spawn error",
        LordStatus::Lifecycle => c"lifecycle error",
        LordStatus::Embedding => c"embedding error",
        LordStatus::Unavailable => c"embedding service unavailable",
        LordStatus::Persistence => c"persistence error",
        LordStatus::Numerical => c"numerical error",
        LordStatus::BufferTooSmall => c"buffer too small",
        LordStatus::Panic => c"internal panic",
    };
    name.as_ptr()
}

#[no_mangle]
pub extern "C" fn lord_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message size
/// including the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lord_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}

/// Creates an environment from a TOML `key = value` config, or the default
/// config when `config_toml` is null. The world is empty until reset.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lord_env_new(config_toml: *const c_char, out: *mut *mut LordEnv) -> LordStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config =
            if config_toml.is_null() { EnvConfig::default() } else { EnvConfig::from_toml_str(str_arg(config_toml, "config")?)? };
        config.validate()?;
        *out = Box::into_raw(Box::new(LordEnv { config, world: None, reward: None }));
        Ok(())
    })
}

/// Creates an evaluation environment for a setting name such as
/// `lane-4-density-2`.
///
/// # Safety
/// `setting` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lord_env_new_setting(setting: *const c_char, out: *mut *mut LordEnv) -> LordStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = EnvConfig::for_setting(str_arg(setting, "setting")?)?;
        *out = Box::into_raw(Box::new(LordEnv { config, world: None, reward: None }));
        Ok(())
    })
}

/// # Safety
/// `env` must be null or a handle from `lord_env_new*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lord_env_free(env: *mut LordEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Attaches a reward spec given as TOML (e.g. `kind = "grad"`). A non-null
/// `endpoint` selects the remote embedding service instead of the
/// reference backends. Takes effect from the next reset.
///
/// # Safety
/// `env` must be a live handle; strings must be NUL-terminated or null
/// where allowed.
#[no_mangle]
pub unsafe extern "C" fn lord_env_set_reward(
    env: *mut LordEnv,
    spec_toml: *const c_char,
    endpoint: *const c_char,
) -> LordStatus {
    guard(|| {
        let env = handle(env, "env")?;
        let spec: RewardSpec = toml::from_str(str_arg(spec_toml, "spec")?)
            .map_err(|e| Failure(LordStatus::Config, format!("reward spec: {e}")))?;
        let backend = if endpoint.is_null() {
            BackendConfig::default()
        } else {
            BackendConfig {
                kind: BackendKind::Remote,
                endpoint: Some(str_arg(endpoint, "endpoint")?.to_owned()),
                ..BackendConfig::default()
            }
        };
        env.reward = Some(RewardEngine::new(spec, |m| backend.build(m))?);
        env.world = None;
        Ok(())
    })
}

/// Starts a new episode from `seed`.
///
/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lord_env_reset(env: *mut LordEnv, seed: u64) -> LordStatus {
    guard(|| {
        let env = handle(env, "env")?;
        let world = reset(&env.config, seed)?;
        if let Some(r) = env.reward.as_mut() {
            r.reset(&world);
        }
        env.world = Some(world);
        Ok(())
    })
}

/// Advances one policy step with meta-action `action` (0 lane left, 1 idle,
/// 2 lane right, 3 faster, 4 slower).
///
/// # Safety
/// `env` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lord_env_step(env: *mut LordEnv, action: u32, out: *mut LordStepResult) -> LordStatus {
    guard(|| {
        let env = handle(env, "env")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let action = MetaAction::from_index(action as usize)
            .ok_or_else(|| Failure(LordStatus::InvalidArgument, format!("action {action} is not in 0..5")))?;
        let world = env.world.as_mut().ok_or_else(|| Failure(LordStatus::Lifecycle, "call lord_env_reset first".into()))?;
        let outcome = match env.reward.as_mut() {
            Some(r) => step_observed(world, action, |w| r.observe_substep(w))?,
            None => step_observed(world, action, |_| {})?,
        };
        let reward = match env.reward.as_mut() {
            Some(r) => r.reward(world, &outcome)?,
            None => f64::NAN,
        };
        *out = LordStepResult {
            reward,
            ego_x: outcome.ego_x,
            ego_speed: outcome.ego_speed,
            step_index: outcome.step_index as u32,
            collided: outcome.collided,
            terminated: outcome.terminated,
            truncated: outcome.truncated,
        };
        Ok(())
    })
}

/// Number of reals in a kinematics observation (rows × 8).
///
/// # Safety
/// `env` must be null or a live handle; null gives 0.
#[no_mangle]
pub unsafe extern "C" fn lord_env_observation_len(env: *const LordEnv) -> usize {
    env.as_ref().map_or(0, |e| e.config.observed_vehicles * FEATURES)
}

/// Writes the row-major kinematics observation of the current state.
///
/// # Safety
/// `env` must be a live handle; `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lord_env_observation(env: *mut LordEnv, buf: *mut f64, len: usize) -> LordStatus {
    guard(|| {
        let obs = build_kinematics(handle(env, "env")?.world()?);
        out_slice(buf, len, obs.as_slice().len(), "buffer")?.copy_from_slice(obs.as_slice());
        Ok(())
    })
}

/// Writes the text observation of the current state as a C string.
/// `needed` (nullable) receives the required size including the NUL, also
/// on `BUFFER_TOO_SMALL`.
///
/// # Safety
/// `env` must be a live handle; `buf` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lord_env_text(env: *mut LordEnv, buf: *mut c_char, len: usize, needed: *mut usize) -> LordStatus {
    guard(|| {
        let text = describe_text(&compute_ttc(handle(env, "env")?.world()?), LORD_TTC_THRESHOLD);
        write_c_string(text.as_str(), buf, len, needed)
    })
}

/// Writes the 224×224 RGB frame (row-major, `LORD_FRAME_BYTES` bytes).
///
/// # Safety
/// `env` must be a live handle; `buf` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lord_env_render(env: *mut LordEnv, buf: *mut u8, len: usize) -> LordStatus {
    guard(|| {
        let frame = render_frame(handle(env, "env")?.world()?);
        out_slice(buf, len, LORD_FRAME_BYTES, "buffer")?.copy_from_slice(frame.as_bytes());
        Ok(())
    })
}

/// Loads a policy checkpoint; `seed` starts its action-sampling stream.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lord_policy_load(path: *const c_char, seed: u64, out: *mut *mut LordPolicy) -> LordStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = checkpoint_load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(LordPolicy { params, rng: ChaCha8Rng::seed_from_u64(seed) }));
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle from `lord_policy_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lord_policy_free(policy: *mut LordPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Action probabilities and state value for a raw kinematics observation.
///
/// # Safety
/// `obs` valid for `len` doubles, `probs` for `LORD_ACTION_COUNT` doubles,
/// `value` nullable.
#[no_mangle]
pub unsafe extern "C" fn lord_policy_evaluate(
    policy: *mut LordPolicy,
    obs: *const f64,
    len: usize,
    probs: *mut f64,
    value: *mut f64,
) -> LordStatus {
    guard(|| {
        let policy = handle(policy, "policy")?;
        if obs.is_null() {
            return Err(null("obs"));
        }
        if len % FEATURES != 0 {
            return Err(Failure(LordStatus::InvalidArgument, format!("observation length {len} is not a multiple of {FEATURES}")));
        }
        let state = lord_core::obs::KinematicsObs::from_flat(len / FEATURES, std::slice::from_raw_parts(obs, len).to_vec())
            .ok_or_else(|| Failure(LordStatus::InvalidArgument, "bad observation".into()))?;
        let (p, v) = policy_forward(&policy.params, &state)?;
        out_slice(probs, LORD_ACTION_COUNT, p.len(), "probs")?.copy_from_slice(&p);
        if let Some(value) = value.as_mut() {
            *value = v;
        }
        Ok(())
    })
}

/// Samples an action for the environment's current state.
///
/// # Safety
/// Both handles must be live; `action` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lord_policy_act(policy: *mut LordPolicy, env: *mut LordEnv, action: *mut u32) -> LordStatus {
    guard(|| {
        let policy = handle(policy, "policy")?;
        let action = action.as_mut().ok_or_else(|| null("action"))?;
        let state = build_kinematics(handle(env, "env")?.world()?);
        let (probs, _) = policy_forward(&policy.params, &state)?;
        *action = sample_action(&probs, &mut policy.rng).0.index() as u32;
        Ok(())
    })
}

/// Cosine similarity of two `dim`-long vectors.
///
/// # Safety
/// `a` and `b` valid for `dim` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lord_cosine_similarity(a: *const f64, b: *const f64, dim: usize, out: *mut f64) -> LordStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = cosine_similarity(&in_vector(a, dim, "a")?, &in_vector(b, dim, "b")?)?;
        Ok(())
    })
}

/// Opposite-goal reward `1 - cos(obs, goal)`.
///
/// # Safety
/// `obs` and `goal` valid for `dim` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lord_opposite_reward(obs: *const f64, goal: *const f64, dim: usize, out: *mut f64) -> LordStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lord_reward(&in_vector(obs, dim, "obs")?, &in_vector(goal, dim, "goal")?)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn lord_grad_reward(ego_speed: f64, crashed: bool) -> f64 {
    grad_reward(ego_speed, crashed)
}
