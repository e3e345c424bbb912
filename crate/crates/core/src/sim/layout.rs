use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::detect::ContainerClass;

/// Pot opening footprint, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotShape {
    Circular { diameter: f64 },
    Rectangular { length: f64, width: f64 },
}

impl PotShape {
    pub fn class(&self) -> ContainerClass {
        match self {
            PotShape::Circular { .. } => ContainerClass::Circular,
            PotShape::Rectangular { .. } => ContainerClass::Rectangular,
        }
    }

    /// Footprint (along-image-u, along-image-v), mm.
    pub fn extent(&self) -> (f64, f64) {
        match *self {
            PotShape::Circular { diameter } => (diameter, diameter),
            PotShape::Rectangular { length, width } => (length, width),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let (a, b) = self.extent();
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(SimError::invalid("pot_shape", "dimensions must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pot {
    pub id: usize,
    /// World position of the pot center, mm.
    pub x: f64,
    pub y: f64,
    pub shape: PotShape,
}

/// How the pots are placed along the route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayoutSpec {
    /// Rows x columns at fixed spacing, visited row by row in alternating
    /// direction.
    Grid { rows: usize, cols: usize, spacing: f64 },
    /// A meandering route: each step is drawn from `[min_step, max_step]`
    /// and turns by at most `max_turn` degrees. Every pot keeps at least
    /// `min_spacing` from all others.
    RandomPath {
        pots: usize,
        min_step: f64,
        max_step: f64,
        max_turn: f64,
        min_spacing: f64,
        max_attempts: usize,
    },
}

impl LayoutSpec {
    pub fn pot_count(&self) -> usize {
        match *self {
            LayoutSpec::Grid { rows, cols, .. } => rows * cols,
            LayoutSpec::RandomPath { pots, .. } => pots,
        }
    }

    pub fn min_spacing(&self) -> f64 {
        match *self {
            LayoutSpec::Grid { spacing, .. } => spacing,
            LayoutSpec::RandomPath { min_spacing, .. } => min_spacing,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            LayoutSpec::Grid { rows, cols, spacing } => {
                if rows == 0 || cols == 0 {
                    return Err(SimError::invalid(
                        "layout.rows",
                        "grid needs at least one row and column",
                    ));
                }
                if !(spacing.is_finite() && spacing > 0.0) {
                    return Err(SimError::invalid("layout.spacing", "must be positive"));
                }
            }
            LayoutSpec::RandomPath {
                pots,
                min_step,
                max_step,
                max_turn,
                min_spacing,
                max_attempts,
            } => {
                if pots == 0 {
                    return Err(SimError::invalid("layout.pots", "must be at least 1"));
                }
                if !(min_step > 0.0 && max_step >= min_step && max_step.is_finite()) {
                    return Err(SimError::invalid(
                        "layout.min_step",
                        "step range must be positive and ordered",
                    ));
                }
                if !(0.0..=180.0).contains(&max_turn) {
                    return Err(SimError::invalid("layout.max_turn", "must lie in [0, 180] degrees"));
                }
                if !(min_spacing >= 0.0 && min_spacing <= max_step) {
                    return Err(SimError::invalid("layout.min_spacing", "must lie in [0, max_step]"));
                }
                if max_attempts == 0 {
                    return Err(SimError::invalid("layout.max_attempts", "must be at least 1"));
                }
            }
        }
        Ok(())
    }
}

/// Pots in visiting order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotLayout {
    pub pots: Vec<Pot>,
    pub min_spacing: f64,
}

impl PotLayout {
    /// Smallest pairwise center distance.
    pub fn closest_pair(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.pots.iter().enumerate() {
            for b in &self.pots[i + 1..] {
                best = best.min((a.x - b.x).hypot(a.y - b.y));
            }
        }
        best
    }

    /// Direction of travel into pot `i`, radians. The first pot takes the
    /// heading toward the second.
    pub fn heading(&self, i: usize) -> f64 {
        let n = self.pots.len();
        if n < 2 {
            return 0.0;
        }
        let (a, b) = if i == 0 { (0, 1) } else { (i - 1, i) };
        (self.pots[b].y - self.pots[a].y).atan2(self.pots[b].x - self.pots[a].x)
    }

    /// Travel distance from pot `i - 1` to pot `i`.
    pub fn leg(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        let (a, b) = (&self.pots[i - 1], &self.pots[i]);
        (b.x - a.x).hypot(b.y - a.y)
    }
}

pub fn generate_layout<R: Rng + ?Sized>(
    spec: &LayoutSpec,
    shape: PotShape,
    rng: &mut R,
) -> Result<PotLayout, SimError> {
    spec.validate()?;
    shape.validate()?;
    let pots = match *spec {
        LayoutSpec::Grid { rows, cols, spacing } => {
            let mut pots = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for k in 0..cols {
                    let c = if r % 2 == 0 { k } else { cols - 1 - k };
                    pots.push(Pot {
                        id: pots.len(),
                        x: c as f64 * spacing,
                        y: r as f64 * spacing,
                        shape,
                    });
                }
            }
            pots
        }
        LayoutSpec::RandomPath {
            pots: n,
            min_step,
            max_step,
            max_turn,
            min_spacing,
            max_attempts,
        } => {
            let mut pots = vec![Pot {
                id: 0,
                x: 0.0,
                y: 0.0,
                shape,
            }];
            let mut heading = 0.0f64;
            while pots.len() < n {
                let last = *pots.last().expect("non-empty");
                let mut placed = false;
                for _ in 0..max_attempts {
                    let step = rng.random_range(min_step..=max_step);
                    let turn = rng.random_range(-max_turn..=max_turn).to_radians();
                    let h = heading + turn;
                    let (x, y) = (last.x + step * h.cos(), last.y + step * h.sin());
                    if pots.iter().all(|p| (p.x - x).hypot(p.y - y) >= min_spacing) {
                        heading = h;
                        pots.push(Pot {
                            id: pots.len(),
                            x,
                            y,
                            shape,
                        });
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return Err(SimError::LayoutExhausted {
                        placed: pots.len(),
                        attempts: max_attempts,
                    });
                }
            }
            pots
        }
    };
    Ok(PotLayout {
        pots,
        min_spacing: spec.min_spacing(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::{stream_rng, Stream};
    use proptest::prelude::*;

    const POT: PotShape = PotShape::Circular { diameter: 100.0 };

    #[test]
    fn grid_is_serpentine() {
        let spec = LayoutSpec::Grid {
            rows: 4,
            cols: 5,
            spacing: 600.0,
        };
        let l = generate_layout(&spec, POT, &mut stream_rng(0, Stream::Layout)).unwrap();
        assert_eq!(l.pots.len(), 20);
        assert_eq!((l.pots[4].x, l.pots[4].y), (2400.0, 0.0));
        assert_eq!((l.pots[5].x, l.pots[5].y), (2400.0, 600.0));
        for i in 1..20 {
            assert_eq!(l.leg(i), 600.0);
        }
        assert_eq!(l.closest_pair(), 600.0);
    }

    #[test]
    fn crowded_path_gives_up() {
        let spec = LayoutSpec::RandomPath {
            pots: 50,
            min_step: 100.0,
            max_step: 100.0,
            max_turn: 180.0,
            min_spacing: 100.0,
            max_attempts: 3,
        };
        let mut rng = stream_rng(3, Stream::Layout);
        let mut failures = 0;
        for _ in 0..20 {
            if let Err(SimError::LayoutExhausted { attempts, .. }) = generate_layout(&spec, POT, &mut rng) {
                assert_eq!(attempts, 3);
                failures += 1;
            }
        }
        assert!(failures > 0);
    }

    proptest! {
        #[test]
        fn random_path_respects_spacing(seed: u64) {
            let spec = LayoutSpec::RandomPath {
                pots: 20,
                min_step: 400.0,
                max_step: 800.0,
                max_turn: 30.0,
                min_spacing: 400.0,
                max_attempts: 200,
            };
            let l = generate_layout(&spec, POT, &mut stream_rng(seed, Stream::Layout)).unwrap();
            prop_assert_eq!(l.pots.len(), 20);
            prop_assert!(l.closest_pair() >= 400.0 - 1e-9);
            for i in 1..20 {
                let leg = l.leg(i);
                prop_assert!((400.0 - 1e-9..=800.0 + 1e-9).contains(&leg));
            }
        }
    }
}
