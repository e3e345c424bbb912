use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::layout::PotShape;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpModel {
    /// mL/s.
    pub flow_rate: f64,
    /// Fractional excess delivered by the pump over the commanded volume.
    pub dispense_overshoot: f64,
    /// Radius of the spray footprint at the pot rim, mm.
    pub spray_radius: f64,
}

impl Default for PumpModel {
    fn default() -> Self {
        Self {
            flow_rate: 25.0,
            dispense_overshoot: 0.05,
            spray_radius: 20.0,
        }
    }
}

impl PumpModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.flow_rate.is_finite() && self.flow_rate > 0.0) {
            return Err(SimError::invalid("pump.flow_rate", "must be positive"));
        }
        if !(self.dispense_overshoot.is_finite() && self.dispense_overshoot > -1.0) {
            return Err(SimError::invalid("pump.dispense_overshoot", "must exceed -1"));
        }
        if !(self.spray_radius.is_finite() && self.spray_radius > 0.0) {
            return Err(SimError::invalid("pump.spray_radius", "must be positive"));
        }
        Ok(())
    }

    /// Seconds the pump runs to push out `volume`.
    pub fn duration(&self, volume: f64) -> f64 {
        volume / self.flow_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispensed {
    pub dispensed: f64,
    pub delivered: f64,
}

/// Area shared by two disks whose centers are `d` apart.
pub fn circle_overlap(r1: f64, r2: f64, d: f64) -> f64 {
    let d = d.abs();
    if d >= r1 + r2 {
        return 0.0;
    }
    let small = r1.min(r2);
    if d <= (r1 - r2).abs() {
        return PI * small * small;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.sqrt()
}

// Integral of sqrt(r^2 - t^2).
fn half_chord_integral(r: f64, t: f64) -> f64 {
    let t = t.clamp(-r, r);
    0.5 * (t * (r * r - t * t).max(0.0).sqrt() + r * r * (t / r).asin())
}

/// Area of the origin-centered disk of radius `r` with `X <= x` and `Y <= y`.
fn quadrant_area(r: f64, x: f64, y: f64) -> f64 {
    let xe = x.min(r);
    if xe <= -r || y <= -r {
        return 0.0;
    }
    let s = |p: f64, q: f64| {
        let (p, q) = (p.max(-r), q.min(xe));
        if q > p {
            half_chord_integral(r, q) - half_chord_integral(r, p)
        } else {
            0.0
        }
    };
    let len = |p: f64, q: f64| (q.min(xe) - p.max(-r)).max(0.0);
    if y >= r {
        return 2.0 * s(-r, r);
    }
    let a = (r * r - y * y).sqrt();
    // Inside |X| < a the column runs from -sqrt(r^2 - X^2) up to y.
    let middle = y * len(-a, a) + s(-a, a);
    if y >= 0.0 {
        middle + 2.0 * (s(-r, -a) + s(a, r))
    } else {
        middle
    }
}

/// Area of a disk centered at (cx, cy) inside the rectangle
/// `[x0, x1] x [y0, y1]`.
pub fn disk_rect_overlap(r: f64, cx: f64, cy: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let g = |x: f64, y: f64| quadrant_area(r, x - cx, y - cy);
    (g(x1, y1) - g(x0, y1) - g(x1, y0) + g(x0, y0)).max(0.0)
}

/// Fraction of a spray disk of radius `spray_radius`, offset by `offset`
/// from the pot center, that lands inside the pot opening.
pub fn capture_fraction(spray_radius: f64, offset: (f64, f64), pot: &PotShape) -> f64 {
    let disk = PI * spray_radius * spray_radius;
    let inside = match *pot {
        PotShape::Circular { diameter } => circle_overlap(spray_radius, diameter / 2.0, offset.0.hypot(offset.1)),
        PotShape::Rectangular { length, width } => disk_rect_overlap(
            spray_radius,
            offset.0,
            offset.1,
            -length / 2.0,
            length / 2.0,
            -width / 2.0,
            width / 2.0,
        ),
    };
    (inside / disk).clamp(0.0, 1.0)
}

/// Pump the commanded volume with the pump's overshoot and count what lands
/// in the pot when the nozzle is off by `offset` mm.
pub fn dispense(
    pump: &PumpModel,
    target_volume: f64,
    offset: (f64, f64),
    pot: &PotShape,
) -> Result<Dispensed, SimError> {
    if !(target_volume.is_finite() && target_volume > 0.0) {
        return Err(SimError::invalid("target_volume", "must be positive"));
    }
    let dispensed = target_volume * (1.0 + pump.dispense_overshoot);
    Ok(Dispensed {
        dispensed,
        delivered: dispensed * capture_fraction(pump.spray_radius, offset, pot),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CIRCLE: PotShape = PotShape::Circular { diameter: 100.0 };
    const RECT: PotShape = PotShape::Rectangular {
        length: 120.0,
        width: 80.0,
    };

    #[test]
    fn centered_small_spray_is_fully_captured() {
        let pump = PumpModel {
            dispense_overshoot: 0.0,
            ..PumpModel::default()
        };
        let d = dispense(&pump, 100.0, (0.0, 0.0), &CIRCLE).unwrap();
        assert_eq!(d.dispensed, 100.0);
        assert_eq!(d.delivered, 100.0);
    }

    #[test]
    fn far_miss_delivers_nothing() {
        let pump = PumpModel::default();
        let d = dispense(&pump, 100.0, (70.0, 0.0), &CIRCLE).unwrap();
        assert_eq!(d.delivered, 0.0);
        assert_eq!(capture_fraction(20.0, (0.0, 80.0), &RECT), 0.0);
    }

    #[test]
    fn rejects_non_positive_volume() {
        assert!(dispense(&PumpModel::default(), 0.0, (0.0, 0.0), &CIRCLE).is_err());
    }

    #[test]
    fn half_plane_cut() {
        // Disk centered on a rectangle edge, rectangle much larger than it.
        let a = disk_rect_overlap(10.0, 0.0, 0.0, -100.0, 100.0, 0.0, 100.0);
        assert!((a - PI * 50.0).abs() < 1e-9);
        let a = disk_rect_overlap(10.0, 0.0, 0.0, 0.0, 100.0, 0.0, 100.0);
        assert!((a - PI * 25.0).abs() < 1e-9);
    }

    #[test]
    fn strip_cut_matches_segment_formula() {
        // Radius 50 disk in a 120 x 80 opening loses two circular segments.
        let seg = 2500.0 * (0.8f64).acos() - 40.0 * 30.0;
        let expect = 1.0 - 2.0 * seg / (PI * 2500.0);
        assert!((capture_fraction(50.0, (0.0, 0.0), &RECT) - expect).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn capture_bounded_and_monotone(r in 1.0..80.0f64, e in 0.0..150.0f64, de in 0.0..10.0f64, ang in 0.0..std::f64::consts::TAU) {
            for pot in [CIRCLE, RECT] {
                let (c, s) = (ang.cos(), ang.sin());
                let near = capture_fraction(r, (e * c, e * s), &pot);
                let far = capture_fraction(r, ((e + de) * c, (e + de) * s), &pot);
                prop_assert!((0.0..=1.0).contains(&near));
                prop_assert!(far <= near + 1e-12);
            }
        }

        #[test]
        fn delivered_never_exceeds_dispensed(e in 0.0..200.0f64, over in 0.0..0.2f64, r in 5.0..80.0f64) {
            let pump = PumpModel { dispense_overshoot: over, spray_radius: r, ..PumpModel::default() };
            for pot in [CIRCLE, RECT] {
                let d = dispense(&pump, 100.0, (e, 0.0), &pot).unwrap();
                prop_assert!(d.delivered <= d.dispensed);
            }
        }
    }
}
