//! C ABI over `mlgsc-core`.
//!
//! Conventions:
//!
//! * Every fallible call returns an [`MlgscStatus`]. On failure a message is
//!   stored per thread; read it with [`mlgsc_last_error_message`].
//! * Handles ([`MlgscConfig`], [`MlgscScene`], [`MlgscModel`]) are opaque,
//!   created through out-pointers, and released with their `_free` function.
//!   Passing NULL to a `_free` function is a no-op.
//! * Strings returned to the caller are freed with [`mlgsc_string_free`].
//! * Panics never cross the boundary; they surface as `MLGSC_STATUS_PANIC`.
//!
//! The header `include/mlgsc.h` is generated by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use mlgsc_core::config::RunConfig;
use mlgsc_core::data::{HsiCube, LabelMap};
use mlgsc_core::pipeline::{build_scene_views, cluster_state, load_scene, prepare_scene, train_views, Scene};
use mlgsc_core::trainer::TrainState;
use mlgsc_core::views::MultiView;
use mlgsc_core::Error;

/// Result of every fallible call. Codes 2, 3 and 4 match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MlgscStatus {
    Ok = 0,
    NullArgument = 1,
    Config = 2,
    Data = 3,
    Numeric = 4,
    InvalidUtf8 = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Run configuration (TOML-backed).
pub struct MlgscConfig {
    inner: RunConfig,
}

/// A prepared scene with its graph views built.
pub struct MlgscScene {
    scene: Scene,
    views: MultiView,
}

/// Trained parameters, optimizer moments and loss history.
pub struct MlgscModel {
    state: TrainState,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MlgscMetrics {
    pub oa: f64,
    pub nmi: f64,
    pub kappa: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure {
    status: MlgscStatus,
    message: String,
}

impl Failure {
    fn new(status: MlgscStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn null(arg: &str) -> Self {
        Self::new(MlgscStatus::NullArgument, format!("`{arg}` is NULL"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            2 => MlgscStatus::Config,
            3 => MlgscStatus::Data,
            _ => MlgscStatus::Numeric,
        };
        Self::new(status, e.to_string())
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> MlgscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MlgscStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            MlgscStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(MlgscStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| Failure::null(name))
}

unsafe fn put<T>(out: *mut *mut T, value: T, name: &str) -> FfiResult {
    if out.is_null() {
        return Err(Failure::null(name));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mlgsc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failure on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mlgsc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Built-in defaults: the synthetic 30×30×20 three-class scene.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_config_new_default(out: *mut *mut MlgscConfig) -> MlgscStatus {
    guard(|| {
        put(
            out,
            MlgscConfig {
                inner: RunConfig::default(),
            },
            "out",
        )
    })
}

/// Parses and validates a TOML run config.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_config_from_toml(toml: *const c_char, out: *mut *mut MlgscConfig) -> MlgscStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        let inner = RunConfig::from_toml_str(text)?;
        put(out, MlgscConfig { inner }, "out")
    })
}

/// Serializes the config; free the result with `mlgsc_string_free`.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_config_to_toml(cfg: *const MlgscConfig, out: *mut *mut c_char) -> MlgscStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let text = CString::new(cfg.inner.to_toml_string()).expect("TOML has no NUL bytes");
        *out = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_config_set_seed(cfg: *mut MlgscConfig, seed: u64) -> MlgscStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| Failure::null("cfg"))?;
        cfg.inner.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_config_set_epochs(cfg: *mut MlgscConfig, epochs: usize) -> MlgscStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| Failure::null("cfg"))?;
        let mut next = cfg.inner.clone();
        next.train.epochs = epochs;
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_config_free(cfg: *mut MlgscConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

fn finish_scene(cfg: &RunConfig, scene: Scene) -> FfiResult<MlgscScene> {
    let views = build_scene_views(cfg, &scene)?;
    Ok(MlgscScene { scene, views })
}

/// Loads (or synthesizes) the scene the config describes and builds its views.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_scene_load(cfg: *const MlgscConfig, out: *mut *mut MlgscScene) -> MlgscStatus {
    guard(|| {
        let cfg = &ref_arg(cfg, "cfg")?.inner;
        let scene = finish_scene(cfg, load_scene(cfg)?)?;
        put(out, scene, "out")
    })
}

/// Builds a scene from caller memory. `cube` holds `height * width * bands`
/// values, band-interleaved by pixel. `labels` holds `height * width` class
/// ids (0 = background) or is NULL to cluster every pixel without metrics.
/// The config's crop, if any, still applies.
///
/// # Safety
/// `cube` (and `labels` when non-NULL) must point to arrays of the stated
/// lengths; `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_scene_from_arrays(
    cfg: *const MlgscConfig,
    cube: *const f32,
    height: usize,
    width: usize,
    bands: usize,
    labels: *const u16,
    out: *mut *mut MlgscScene,
) -> MlgscStatus {
    guard(|| {
        let cfg = &ref_arg(cfg, "cfg")?.inner;
        if cube.is_null() {
            return Err(Failure::null("cube"));
        }
        let pixels = height
            .checked_mul(width)
            .ok_or_else(|| Failure::new(MlgscStatus::Data, "height * width overflows"))?;
        let len = pixels
            .checked_mul(bands)
            .ok_or_else(|| Failure::new(MlgscStatus::Data, "cube size overflows"))?;
        let values = std::slice::from_raw_parts(cube, len).iter().map(|&v| v as f64).collect();
        let hsi = HsiCube::new(height, width, bands, values)?;
        let gt = if labels.is_null() {
            None
        } else {
            Some(LabelMap::new(height, width, std::slice::from_raw_parts(labels, pixels).to_vec())?)
        };
        let scene = finish_scene(cfg, prepare_scene(cfg, hsi, gt)?)?;
        put(out, scene, "out")
    })
}

/// Scene height and width (after cropping) and the number of clustered pixels.
///
/// # Safety
/// `scene` must be a live handle; each out-pointer may be NULL.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_scene_dims(
    scene: *const MlgscScene,
    height: *mut usize,
    width: *mut usize,
    nodes: *mut usize,
) -> MlgscStatus {
    guard(|| {
        let s = ref_arg(scene, "scene")?;
        if let Some(h) = height.as_mut() {
            *h = s.views.height;
        }
        if let Some(w) = width.as_mut() {
            *w = s.views.width;
        }
        if let Some(n) = nodes.as_mut() {
            *n = s.views.num_nodes();
        }
        Ok(())
    })
}

/// # Safety
/// `scene` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_scene_free(scene: *mut MlgscScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Trains for the configured number of epochs.
///
/// # Safety
/// `cfg` and `scene` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_train(
    cfg: *const MlgscConfig,
    scene: *const MlgscScene,
    out: *mut *mut MlgscModel,
) -> MlgscStatus {
    guard(|| {
        let cfg = &ref_arg(cfg, "cfg")?.inner;
        let s = ref_arg(scene, "scene")?;
        let state = train_views(cfg, &s.views)?;
        put(out, MlgscModel { state }, "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_model_load(path: *const c_char, out: *mut *mut MlgscModel) -> MlgscStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let state = TrainState::load(&path)?;
        put(out, MlgscModel { state }, "out")
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_model_save(model: *const MlgscModel, path: *const c_char) -> MlgscStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        m.state.save(&path)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `epochs` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_model_epochs(model: *const MlgscModel, epochs: *mut usize) -> MlgscStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let out = epochs.as_mut().ok_or_else(|| Failure::null("epochs"))?;
        *out = m.state.epoch;
        Ok(())
    })
}

/// Copies the per-epoch total loss into `out`, which must hold at least
/// `mlgsc_model_epochs` values; `MLGSC_STATUS_BUFFER_TOO_SMALL` otherwise.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_model_loss_history(model: *const MlgscModel, out: *mut f64, len: usize) -> MlgscStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let h = &m.state.history;
        if len < h.len() {
            return Err(Failure::new(
                MlgscStatus::BufferTooSmall,
                format!("history has {} entries, buffer holds {len}", h.len()),
            ));
        }
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let dst = std::slice::from_raw_parts_mut(out, h.len());
        for (d, r) in dst.iter_mut().zip(h) {
            *d = r.total;
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_model_free(model: *mut MlgscModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Spectral clustering on the trained coefficients. Writes the cluster map
/// (`height * width` entries, 0 = background, clusters from 1) into `map`.
/// When the scene carries ground truth, `metrics` (if non-NULL) receives
/// OA / NMI / Kappa and `has_metrics` (if non-NULL) is set to true.
///
/// # Safety
/// Handles must be live; `map` must hold `map_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn mlgsc_cluster(
    cfg: *const MlgscConfig,
    scene: *const MlgscScene,
    model: *const MlgscModel,
    map: *mut u16,
    map_len: usize,
    metrics: *mut MlgscMetrics,
    has_metrics: *mut bool,
) -> MlgscStatus {
    guard(|| {
        let cfg = &ref_arg(cfg, "cfg")?.inner;
        let s = ref_arg(scene, "scene")?;
        let m = ref_arg(model, "model")?;
        let needed = s.views.height * s.views.width;
        if map_len < needed {
            return Err(Failure::new(
                MlgscStatus::BufferTooSmall,
                format!("map needs {needed} entries, buffer holds {map_len}"),
            ));
        }
        if map.is_null() {
            return Err(Failure::null("map"));
        }
        let outcome = cluster_state(cfg, &s.scene, &s.views, &m.state)?;
        std::slice::from_raw_parts_mut(map, needed).copy_from_slice(outcome.map.labels());
        if let Some(flag) = has_metrics.as_mut() {
            *flag = outcome.metrics.is_some();
        }
        if let (Some(dst), Some(r)) = (metrics.as_mut(), &outcome.metrics) {
            *dst = MlgscMetrics {
                oa: r.oa,
                nmi: r.nmi,
                kappa: r.kappa,
            };
        }
        Ok(())
    })
}
