//! C interface to detxplain.
//!
//! Objects cross the boundary as opaque handles created by `dx_*_new` /
//! `dx_explain` and released by the matching `dx_*_free`. Every fallible
//! call returns a [`DxStatus`]; on failure [`dx_last_error`] describes the
//! problem until the next call on the same thread. Panics never unwind
//! into C: they surface as [`DxStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use detxplain::detectors::{Detector, DetectorConfig, MiniCnn, MiniCnnWeights, SyntheticDetector};
use detxplain::explain::{Explainer, ImageContext, Method, MethodParams, Outcome};
use detxplain::metrics::{bbox_metric, drop_increase, ebpg, iou_metric};
use detxplain::{BBox, Error, Image, SaliencyMap};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Numeric = 5,
    /// A stage-2 method was asked to explain an image without detections.
    NoDetection = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DxDetectorKind {
    Synthetic = 0,
    MiniCnn = 1,
}

/// Half-open pixel box `[x1, x2) x [y1, y2)` with a score (ignored on input).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DxBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
    pub score: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DxPlausibility {
    pub ebpg: f64,
    pub iou: f64,
    pub bbox: f64,
}

pub struct DxDetector(Box<dyn Detector>);

pub struct DxImage(Image);

pub struct DxSaliency(SaliencyMap);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail {
    status: DxStatus,
    message: String,
}

impl Fail {
    fn new(status: DxStatus, message: impl Into<String>) -> Self {
        Fail {
            status,
            message: message.into(),
        }
    }

    fn null(arg: &str) -> Self {
        Fail::new(DxStatus::NullPointer, format!("`{arg}` is NULL"))
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidArgument(_) => DxStatus::InvalidArgument,
            Error::Config(_) => DxStatus::Config,
            Error::Data(_) | Error::Io { .. } | Error::Generation(_) => DxStatus::Data,
            Error::DegenerateInput(_) | Error::Numeric(_) => DxStatus::Numeric,
        };
        Fail::new(status, e.to_string())
    }
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DxStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DxStatus::Ok,
        Ok(Err(fail)) => {
            set_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_error("internal panic");
            DxStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, arg: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::null(arg))
}

unsafe fn put<T>(out: *mut T, arg: &str, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::null(arg));
    }
    out.write(value);
    Ok(())
}

fn to_bbox(b: &DxBox) -> Result<BBox, Fail> {
    Ok(BBox::new(b.x1 as usize, b.y1 as usize, b.x2 as usize, b.y2 as usize)?)
}

fn from_bbox(b: BBox, score: f64) -> DxBox {
    DxBox {
        x1: b.x1 as u32,
        y1: b.y1 as u32,
        x2: b.x2 as u32,
        y2: b.y2 as u32,
        score,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. Valid until the next `dx_*` call on this thread.
#[no_mangle]
pub extern "C" fn dx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a detector for `height x width` images (multiples of 4),
/// otherwise at default settings.
///
/// # Safety
/// `out` must be NULL or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn dx_detector_new(
    kind: DxDetectorKind,
    height: usize,
    width: usize,
    out: *mut *mut DxDetector,
) -> DxStatus {
    guard(|| {
        let cfg = DetectorConfig {
            input_size: (height, width),
            ..DetectorConfig::default()
        };
        let det: Box<dyn Detector> = match kind {
            DxDetectorKind::Synthetic => Box::new(SyntheticDetector::new(cfg)?),
            DxDetectorKind::MiniCnn => Box::new(MiniCnn::new(cfg, MiniCnnWeights::default())?),
        };
        put(out, "out", Box::into_raw(Box::new(DxDetector(det))))
    })
}

/// # Safety
/// `det` must be NULL or a handle from [`dx_detector_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dx_detector_free(det: *mut DxDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// Copies a row-major grayscale image with values in `[0, 1]`.
///
/// # Safety
/// `data` must point to `height * width` readable doubles; `out` must be
/// valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn dx_image_new(height: usize, width: usize, data: *const f64, out: *mut *mut DxImage) -> DxStatus {
    guard(|| {
        if data.is_null() {
            return Err(Fail::null("data"));
        }
        let n = height
            .checked_mul(width)
            .ok_or_else(|| Fail::new(DxStatus::InvalidArgument, "image size overflows"))?;
        let values = std::slice::from_raw_parts(data, n).to_vec();
        let img = Image::new(height, width, values)?;
        put(out, "out", Box::into_raw(Box::new(DxImage(img))))
    })
}

/// # Safety
/// `img` must be NULL or a handle from [`dx_image_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dx_image_free(img: *mut DxImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Image-level confidence (largest stage-2 score).
///
/// # Safety
/// Handles must be live; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn dx_detector_score(det: *const DxDetector, img: *const DxImage, out: *mut f64) -> DxStatus {
    guard(|| {
        let score = get(det, "det")?.0.score(&get(img, "img")?.0)?;
        put(out, "out", score)
    })
}

/// Final detections, best first. `*count` receives the number found;
/// when it exceeds `capacity` nothing is copied and
/// [`DxStatus::BufferTooSmall`] is returned.
///
/// # Safety
/// `boxes` must be valid for writing `capacity` boxes (may be NULL when
/// `capacity` is 0); `count` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn dx_detect(
    det: *const DxDetector,
    img: *const DxImage,
    boxes: *mut DxBox,
    capacity: usize,
    count: *mut usize,
) -> DxStatus {
    guard(|| {
        let found = get(det, "det")?.0.detect(&get(img, "img")?.0)?;
        put(count, "count", found.len())?;
        if found.len() > capacity {
            return Err(Fail::new(
                DxStatus::BufferTooSmall,
                format!("{} detections do not fit in {capacity} slots", found.len()),
            ));
        }
        if !found.is_empty() {
            if boxes.is_null() {
                return Err(Fail::null("boxes"));
            }
            for (i, d) in found.iter().enumerate() {
                boxes.add(i).write(from_bbox(d.bbox, d.score));
            }
        }
        Ok(())
    })
}

/// Explains `img` with the named method (`gradcam`, `gradcampp`, `lrp`,
/// `adasise`, `rise`, `drise`, `lime`, `kde`, `dm`) at default parameters.
/// D-RISE explains the top detection.
///
/// # Safety
/// Handles must be live; `method` must be a NUL-terminated string; `out`
/// must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn dx_explain(
    det: *const DxDetector,
    img: *const DxImage,
    method: *const c_char,
    seed: u64,
    out: *mut *mut DxSaliency,
) -> DxStatus {
    guard(|| {
        let det = &get(det, "det")?.0;
        let img = &get(img, "img")?.0;
        if method.is_null() {
            return Err(Fail::null("method"));
        }
        let name = CStr::from_ptr(method)
            .to_str()
            .map_err(|_| Fail::new(DxStatus::InvalidArgument, "method name is not UTF-8"))?;
        let method: Method = name.parse()?;
        let explainer = Explainer::new(det.as_ref(), &[method], MethodParams::default().seeded(seed))?;
        let ctx = ImageContext::new(det.as_ref(), img)?;
        let ex = explainer.explain(method, img, &ctx, 0)?;
        match ex.outcome {
            Outcome::NoDetection => Err(Fail::new(DxStatus::NoDetection, format!("{method}: no detection"))),
            Outcome::Maps { mut maps, .. } => {
                if out.is_null() {
                    return Err(Fail::null("out"));
                }
                let map = maps.swap_remove(0);
                put(out, "out", Box::into_raw(Box::new(DxSaliency(map))))
            }
        }
    })
}

/// # Safety
/// `s` must be a live saliency handle; `height` and `width` must be valid
/// for writing.
#[no_mangle]
pub unsafe extern "C" fn dx_saliency_dims(s: *const DxSaliency, height: *mut usize, width: *mut usize) -> DxStatus {
    guard(|| {
        let s = &get(s, "s")?.0;
        put(height, "height", s.height)?;
        put(width, "width", s.width)
    })
}

/// Row-major values owned by the handle; NULL when `s` is NULL. Valid
/// until [`dx_saliency_free`].
///
/// # Safety
/// `s` must be NULL or a live saliency handle.
#[no_mangle]
pub unsafe extern "C" fn dx_saliency_values(s: *const DxSaliency) -> *const f64 {
    s.as_ref().map_or(ptr::null(), |s| s.0.values.as_ptr())
}

/// # Safety
/// `s` must be NULL or a handle from [`dx_explain`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dx_saliency_free(s: *mut DxSaliency) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// EBPG, IoU and Bbox of a map against `n` ground-truth boxes (`n >= 1`).
///
/// # Safety
/// `s` must be live; `gt` must point to `n` readable boxes; `out` must be
/// valid for writing.
#[no_mangle]
pub unsafe extern "C" fn dx_plausibility(s: *const DxSaliency, gt: *const DxBox, n: usize, out: *mut DxPlausibility) -> DxStatus {
    guard(|| {
        let s = &get(s, "s")?.0;
        if gt.is_null() {
            return Err(Fail::null("gt"));
        }
        if n == 0 {
            return Err(Fail::new(DxStatus::InvalidArgument, "plausibility needs at least one ground-truth box"));
        }
        let boxes = std::slice::from_raw_parts(gt, n)
            .iter()
            .map(to_bbox)
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(b) = boxes.iter().find(|b| !b.fits(s.height, s.width)) {
            return Err(Fail::new(DxStatus::InvalidArgument, format!("box {:?} lies outside the map", b.to_array())));
        }
        let value = |v: Option<f64>| v.expect("ground truth is non-empty");
        put(
            out,
            "out",
            DxPlausibility {
                ebpg: value(ebpg(s, &boxes)),
                iou: value(iou_metric(s, &boxes)),
                bbox: value(bbox_metric(s, &boxes)),
            },
        )
    })
}

/// Drop (percent) and Increase of the detector when `s` weights the image.
/// Fails with [`DxStatus::InvalidArgument`] when the original score is 0.
///
/// # Safety
/// Handles must be live; `drop_pct` and `increased` must be valid for
/// writing.
#[no_mangle]
pub unsafe extern "C" fn dx_drop_increase(
    det: *const DxDetector,
    img: *const DxImage,
    s: *const DxSaliency,
    drop_pct: *mut f64,
    increased: *mut bool,
) -> DxStatus {
    guard(|| {
        let f = drop_increase(get(det, "det")?.0.as_ref(), &get(img, "img")?.0, &get(s, "s")?.0)?
            .ok_or_else(|| Fail::new(DxStatus::InvalidArgument, "original score is 0"))?;
        put(drop_pct, "drop_pct", f.drop)?;
        put(increased, "increased", f.increased)
    })
}
