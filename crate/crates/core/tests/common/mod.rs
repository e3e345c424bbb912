//! Helpers shared by the detection suites.
#![allow(dead_code)]

use irrigation_core::detect::{BBox, ContainerClass, Detection};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn overlap(a: &BBox, b: &BBox) -> f64 {
    let w = (a.u_max().min(b.u_max()) - a.u_min().max(b.u_min())).max(0.0);
    let h = (a.v_max().min(b.v_max()) - a.v_min().max(b.v_min())).max(0.0);
    let i = w * h;
    if i == 0.0 {
        0.0
    } else {
        i / (a.area() + b.area() - i)
    }
}

/// Straight-line reading of the three stages, with suppression done by
/// scanning the whole remaining pool for its maximum each round.
pub fn oracle(dets: &[Detection], conf: f64, iou_thr: f64) -> Vec<Detection> {
    let mut pool: Vec<(usize, Detection)> = dets
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, d)| d.conf() >= conf)
        .filter(|(_, d)| {
            let r = d.bbox.width() / d.bbox.height();
            match d.cls {
                ContainerClass::Circular => r > 0.9 && r < 1.1,
                ContainerClass::Rectangular => r > 1.2 && r < 1.5,
            }
        })
        .collect();
    let mut out = Vec::new();
    while !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            let (bi, bd) = pool[best];
            let (ci, cd) = pool[i];
            if cd.conf() > bd.conf() || (cd.conf() == bd.conf() && ci < bi) {
                best = i;
            }
        }
        let (_, keep) = pool.remove(best);
        pool.retain(|(_, d)| overlap(&keep.bbox, &d.bbox) <= iou_thr);
        out.push(keep);
    }
    out
}

pub fn random_case(rng: &mut ChaCha8Rng) -> Vec<Detection> {
    let n = rng.random_range(0..25);
    // Coarse grids make exact ties in confidence, ratio and IoU common.
    (0..n)
        .map(|_| {
            let cls = if rng.random_bool(0.5) {
                ContainerClass::Circular
            } else {
                ContainerClass::Rectangular
            };
            let h = rng.random_range(2..12) as f64 * 10.0;
            let w = h * rng.random_range(80..160) as f64 / 100.0;
            let u = rng.random_range(0..20) as f64 * 10.0;
            let v = rng.random_range(0..20) as f64 * 10.0;
            let conf = rng.random_range(0..=20) as f64 / 20.0;
            Detection::new(BBox::new(u, v, u + w, v + h).unwrap(), cls, conf).unwrap()
        })
        .collect()
}
