//! Post-processing of candidate detections.
//!
//! The pipeline runs three stages in a fixed order: a confidence gate, a
//! container-geometry check on the box aspect ratio, and greedy
//! non-maximum suppression. Every stage only drops detections; boxes and
//! scores pass through untouched.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("invalid bounding box ({u_min}, {v_min}, {u_max}, {v_max}): extent must be positive and finite")]
    InvalidBox {
        u_min: f64,
        v_min: f64,
        u_max: f64,
        v_max: f64,
    },
    #[error("confidence {0} is outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("ratio band ({lo}, {hi}) must satisfy 0 < lo < hi")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("ratio bands for {0} and {1} overlap")]
    OverlappingBands(ContainerClass, ContainerClass),
    #[error("no aspect-ratio band is configured for class {0}")]
    UnassignedClass(ContainerClass),
}

/// Axis-aligned box in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    u_min: f64,
    v_min: f64,
    u_max: f64,
    v_max: f64,
}

impl BBox {
    pub fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> Result<Self, DetectError> {
        let finite = [u_min, v_min, u_max, v_max].iter().all(|x| x.is_finite());
        if !finite || u_max <= u_min || v_max <= v_min || !(u_max - u_min).is_finite() {
            return Err(DetectError::InvalidBox {
                u_min,
                v_min,
                u_max,
                v_max,
            });
        }
        Ok(Self {
            u_min,
            v_min,
            u_max,
            v_max,
        })
    }

    pub fn from_center(uc: f64, vc: f64, width: f64, height: f64) -> Result<Self, DetectError> {
        Self::new(uc - width / 2.0, vc - height / 2.0, uc + width / 2.0, vc + height / 2.0)
    }

    pub fn u_min(&self) -> f64 {
        self.u_min
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.width() / self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.u_min + self.u_max), 0.5 * (self.v_min + self.v_max))
    }
}

/// Known plant-container shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainerClass {
    Circular,
    Rectangular,
}

impl ContainerClass {
    pub const ALL: [ContainerClass; 2] = [ContainerClass::Circular, ContainerClass::Rectangular];
}

impl fmt::Display for ContainerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContainerClass::Circular => f.write_str("circular"),
            ContainerClass::Rectangular => f.write_str("rectangular"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub cls: ContainerClass,
    conf: f64,
}

impl Detection {
    pub fn new(bbox: BBox, cls: ContainerClass, conf: f64) -> Result<Self, DetectError> {
        if !(0.0..=1.0).contains(&conf) {
            return Err(DetectError::InvalidConfidence(conf));
        }
        Ok(Self { bbox, cls, conf })
    }

    pub fn conf(&self) -> f64 {
        self.conf
    }
}

/// Open interval of accepted width/height ratios. Both ends are excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioBand {
    pub lo: f64,
    pub hi: f64,
}

impl RatioBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self, DetectError> {
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(DetectError::InvalidBand { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, ratio: f64) -> bool {
        self.lo < ratio && ratio < self.hi
    }

    fn overlaps(&self, other: &RatioBand) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }
}

/// Per-class aspect-ratio bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<ContainerClass, RatioBand>",
    into = "BTreeMap<ContainerClass, RatioBand>"
)]
pub struct GeometryBands {
    bands: BTreeMap<ContainerClass, RatioBand>,
}

impl GeometryBands {
    pub fn new(bands: BTreeMap<ContainerClass, RatioBand>) -> Result<Self, DetectError> {
        for band in bands.values() {
            RatioBand::new(band.lo, band.hi)?;
        }
        let entries: Vec<_> = bands.iter().collect();
        for (i, (ca, a)) in entries.iter().enumerate() {
            for (cb, b) in &entries[i + 1..] {
                if a.overlaps(b) {
                    return Err(DetectError::OverlappingBands(**ca, **cb));
                }
            }
        }
        Ok(Self { bands })
    }

    pub fn band(&self, cls: ContainerClass) -> Result<RatioBand, DetectError> {
        self.bands.get(&cls).copied().ok_or(DetectError::UnassignedClass(cls))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ContainerClass, RatioBand)> + '_ {
        self.bands.iter().map(|(c, b)| (*c, *b))
    }
}

impl Default for GeometryBands {
    /// Circular pots in (0.9, 1.1), rectangular pots in (1.2, 1.5).
    fn default() -> Self {
        let mut bands = BTreeMap::new();
        bands.insert(ContainerClass::Circular, RatioBand { lo: 0.9, hi: 1.1 });
        bands.insert(ContainerClass::Rectangular, RatioBand { lo: 1.2, hi: 1.5 });
        Self { bands }
    }
}

impl TryFrom<BTreeMap<ContainerClass, RatioBand>> for GeometryBands {
    type Error = DetectError;

    fn try_from(bands: BTreeMap<ContainerClass, RatioBand>) -> Result<Self, Self::Error> {
        Self::new(bands)
    }
}

impl From<GeometryBands> for BTreeMap<ContainerClass, RatioBand> {
    fn from(g: GeometryBands) -> Self {
        g.bands
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmsMode {
    #[default]
    ClassAgnostic,
    PerClass,
}

fn check_threshold(t: f64) -> Result<(), DetectError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(DetectError::InvalidThreshold(t))
    }
}

/// Keeps detections with `conf >= threshold`, in input order.
pub fn confidence_gate(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.conf >= threshold).copied().collect()
}

/// True iff the box aspect ratio lies strictly inside the band of its class.
pub fn aspect_ratio_valid(det: &Detection, bands: &GeometryBands) -> Result<bool, DetectError> {
    Ok(bands.band(det.cls)?.contains(det.bbox.aspect_ratio()))
}

/// Intersection over union. Boxes that only share an edge have IoU 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.u_max.min(b.u_max) - a.u_min.max(b.u_min);
    let ih = a.v_max.min(b.v_max) - a.v_min.max(b.v_min);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Class-agnostic greedy non-maximum suppression.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    nms_with_mode(dets, iou_threshold, NmsMode::ClassAgnostic)
}

/// Greedy suppression: repeatedly keep the highest-confidence remaining
/// detection and drop every other one whose IoU with it exceeds the
/// threshold. Equal confidences keep their input order. The result is
/// sorted by descending confidence.
pub fn nms_with_mode(dets: &[Detection], iou_threshold: f64, mode: NmsMode) -> Vec<Detection> {
    let mut order: Vec<Detection> = dets.to_vec();
    order.sort_by(|a, b| b.conf.total_cmp(&a.conf));

    let mut kept: Vec<Detection> = Vec::with_capacity(order.len());
    for cand in order {
        let suppressed = kept.iter().any(|k| {
            let comparable = match mode {
                NmsMode::ClassAgnostic => true,
                NmsMode::PerClass => k.cls == cand.cls,
            };
            comparable && iou(&k.bbox, &cand.bbox) > iou_threshold
        });
        if !suppressed {
            kept.push(cand);
        }
    }
    kept
}

/// Thresholds and bands for [`enhanced_detection`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub conf_threshold: f64,
    pub iou_threshold: f64,
    pub nms_mode: NmsMode,
    pub bands: GeometryBands,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            conf_threshold: 0.5,
            iou_threshold: 0.3,
            nms_mode: NmsMode::ClassAgnostic,
            bands: GeometryBands::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        check_threshold(self.conf_threshold)?;
        check_threshold(self.iou_threshold)
    }

    pub fn run(&self, dets: &[Detection]) -> Result<Vec<Detection>, DetectError> {
        self.validate()?;
        let gated = confidence_gate(dets, self.conf_threshold);
        let mut shaped = Vec::with_capacity(gated.len());
        for det in gated {
            if aspect_ratio_valid(&det, &self.bands)? {
                shaped.push(det);
            }
        }
        Ok(nms_with_mode(&shaped, self.iou_threshold, self.nms_mode))
    }
}

/// Confidence gate, then geometry check, then NMS.
pub fn enhanced_detection(
    dets: &[Detection],
    bands: &GeometryBands,
    conf_threshold: f64,
    iou_threshold: f64,
) -> Result<Vec<Detection>, DetectError> {
    PipelineConfig {
        conf_threshold,
        iou_threshold,
        nms_mode: NmsMode::ClassAgnostic,
        bands: bands.clone(),
    }
    .run(dets)
}
