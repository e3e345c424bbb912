//! Stochastic stand-in for the trained container detector.
//!
//! The profile's accuracy and false-positive rate describe what survives the
//! post-processing pipeline. Raw frames therefore also carry the boxes the
//! pipeline is expected to remove: low-confidence misses, misses whose shape
//! falls between the ratio bands, duplicates of true pots, and spurious boxes
//! of which a fixed share have implausible shapes.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::environment::DetectorProfile;
use super::layout::PotShape;
use crate::detect::{BBox, ContainerClass, Detection, GeometryBands};

/// Ratio interval that lies between the two container bands.
const OFF_BAND: (f64, f64) = (1.11, 1.19);
/// Distance kept between spurious boxes and real pots, mm.
const SPURIOUS_CLEARANCE: f64 = 130.0;
const SPURIOUS_SIZE_PX: (f64, f64) = (300.0, 800.0);
const RATIO_SIGMA: f64 = 0.02;
const SIZE_SIGMA: f64 = 0.02;

/// Image extent and scale of the sensing pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewGeometry {
    pub width_px: f64,
    pub height_px: f64,
    /// mm per pixel.
    pub scale: f64,
}

impl Default for ViewGeometry {
    fn default() -> Self {
        Self {
            width_px: 4000.0,
            height_px: 4000.0,
            scale: 0.1,
        }
    }
}

impl ViewGeometry {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        (0.0..=self.width_px).contains(&u) && (0.0..=self.height_px).contains(&v)
    }
}

/// A real pot as it appears in the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotInView {
    pub pot_id: usize,
    pub u: f64,
    pub v: f64,
    pub shape: PotShape,
}

/// Raw detector output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub detections: Vec<Detection>,
    /// Index into the truth list for each detection, `None` for spurious
    /// boxes.
    pub sources: Vec<Option<usize>>,
    pub latency_ms: f64,
}

fn interior(bands: &GeometryBands, cls: ContainerClass) -> (f64, f64) {
    let b = bands.band(cls).expect("bands cover every container class");
    (b.lo + 0.01, b.hi - 0.01)
}

fn nominal_ratio(shape: &PotShape) -> f64 {
    let (a, b) = shape.extent();
    a.max(b) / a.min(b)
}

pub fn simulate_detection<R: Rng + ?Sized>(
    truth: &[PotInView],
    profile: &DetectorProfile,
    view: &ViewGeometry,
    bands: &GeometryBands,
    rng: &mut R,
) -> Frame {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut detections = Vec::new();
    let mut sources = Vec::new();
    let mut push = |det: Detection, src: Option<usize>| {
        detections.push(det);
        sources.push(src);
    };

    for (i, pot) in truth.iter().enumerate() {
        let cls = pot.shape.class();
        let (_, short) = pot.shape.extent();
        let h = short / view.scale * (1.0 + SIZE_SIGMA * unit.sample(rng));
        let noise = profile.center_noise_px;
        let uc = pot.u + noise * unit.sample(rng);
        let vc = pot.v + noise * unit.sample(rng);

        if rng.random_bool(profile.accuracy) {
            let (lo, hi) = interior(bands, cls);
            let ratio = (nominal_ratio(&pot.shape) * (1.0 + RATIO_SIGMA * unit.sample(rng))).clamp(lo, hi);
            let conf = rng.random_range(0.6..0.99);
            let bbox = BBox::from_center(uc, vc, h * ratio, h).expect("positive size");
            push(Detection::new(bbox, cls, conf).expect("conf in range"), Some(i));
            if rng.random_bool(profile.duplicate_rate) {
                let jitter = 0.05 * h;
                let du = rng.random_range(-jitter..jitter);
                let dv = rng.random_range(-jitter..jitter);
                let k = rng.random_range(0.95..1.05);
                let dup = BBox::from_center(uc + du, vc + dv, h * ratio * k, h * k).expect("positive size");
                let dconf = rng.random_range(0.5..conf);
                push(Detection::new(dup, cls, dconf).expect("conf in range"), Some(i));
            }
        } else {
            match rng.random_range(0..3u8) {
                0 => {}
                1 => {
                    let (lo, hi) = interior(bands, cls);
                    let ratio = rng.random_range(lo..hi);
                    let conf = rng.random_range(0.05..0.45);
                    let bbox = BBox::from_center(uc, vc, h * ratio, h).expect("positive size");
                    push(Detection::new(bbox, cls, conf).expect("conf in range"), Some(i));
                }
                _ => {
                    let ratio = rng.random_range(OFF_BAND.0..OFF_BAND.1);
                    let conf = rng.random_range(0.5..0.95);
                    let bbox = BBox::from_center(uc, vc, h * ratio, h).expect("positive size");
                    push(Detection::new(bbox, cls, conf).expect("conf in range"), Some(i));
                }
            }
        }
    }

    let raw_rate = profile.fp_rate / (1.0 - profile.aspect_rejection);
    if raw_rate > 0.0 && rng.random_bool(raw_rate.min(1.0)) {
        let clearance = SPURIOUS_CLEARANCE / view.scale;
        for _ in 0..64 {
            let u = rng.random_range(0.0..view.width_px);
            let v = rng.random_range(0.0..view.height_px);
            if truth.iter().any(|p| (p.u - u).hypot(p.v - v) < clearance) {
                continue;
            }
            let cls = ContainerClass::ALL[rng.random_range(0..ContainerClass::ALL.len())];
            let ratio = if rng.random_bool(1.0 - profile.aspect_rejection) {
                let (lo, hi) = interior(bands, cls);
                rng.random_range(lo..hi)
            } else {
                rng.random_range(OFF_BAND.0..OFF_BAND.1)
            };
            let h = rng.random_range(SPURIOUS_SIZE_PX.0..SPURIOUS_SIZE_PX.1);
            let conf = rng.random_range(0.5..0.95);
            let bbox = BBox::from_center(u, v, h * ratio, h).expect("positive size");
            push(Detection::new(bbox, cls, conf).expect("conf in range"), None);
            break;
        }
    }

    Frame {
        detections,
        sources,
        latency_ms: profile.inference_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::PipelineConfig;
    use crate::sim::rng::{stream_rng, Stream};

    fn profile(accuracy: f64, fp_rate: f64) -> DetectorProfile {
        DetectorProfile {
            accuracy,
            fp_rate,
            inference_time: 32.0,
            center_noise_px: 30.0,
            duplicate_rate: 0.0,
            aspect_rejection: 0.34,
        }
    }

    fn one_pot() -> Vec<PotInView> {
        vec![PotInView {
            pot_id: 7,
            u: 2000.0,
            v: 2000.0,
            shape: PotShape::Circular { diameter: 100.0 },
        }]
    }

    #[test]
    fn perfect_detector_returns_true_pots() {
        let mut rng = stream_rng(1, Stream::Detector);
        for _ in 0..200 {
            let f = simulate_detection(
                &one_pot(),
                &profile(1.0, 0.0),
                &ViewGeometry::default(),
                &GeometryBands::default(),
                &mut rng,
            );
            assert_eq!(f.sources, vec![Some(0)]);
            assert_eq!(f.latency_ms, 32.0);
        }
    }

    #[test]
    fn blind_detector_passes_nothing_through_pipeline() {
        let mut rng = stream_rng(2, Stream::Detector);
        let pipe = PipelineConfig::default();
        for _ in 0..500 {
            let f = simulate_detection(
                &one_pot(),
                &profile(0.0, 0.0),
                &ViewGeometry::default(),
                &GeometryBands::default(),
                &mut rng,
            );
            assert!(pipe.run(&f.detections).unwrap().is_empty());
        }
    }

    #[test]
    fn rectangular_pots_pass_geometry_check() {
        let mut rng = stream_rng(3, Stream::Detector);
        let pipe = PipelineConfig::default();
        let truth = vec![PotInView {
            pot_id: 0,
            u: 2000.0,
            v: 2000.0,
            shape: PotShape::Rectangular {
                length: 120.0,
                width: 80.0,
            },
        }];
        for _ in 0..200 {
            let f = simulate_detection(
                &truth,
                &profile(1.0, 0.0),
                &ViewGeometry::default(),
                &GeometryBands::default(),
                &mut rng,
            );
            assert_eq!(pipe.run(&f.detections).unwrap().len(), 1);
        }
    }
}
