use serde::{Deserialize, Serialize};

use super::state::{AbortCause, SkipCause};

/// Detector scoring accumulated over every frame of a mission.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameStats {
    pub frames: usize,
    /// Pot appearances summed over frames.
    pub pot_frames: usize,
    /// Pot appearances matched by a pipeline output.
    pub tp_pot_frames: usize,
    /// Pipeline outputs not matched to any pot.
    pub false_positives: usize,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrigationRecord {
    pub pot_id: usize,
    /// The served target was scored against this pot.
    pub detected: bool,
    pub skipped: Option<SkipCause>,
    /// Nozzle-to-pot-center distance, mm.
    pub positioning_error: Option<f64>,
    pub dispensed: f64,
    pub delivered: f64,
    /// Time from the start of leveling until the roll stayed in band, s.
    pub leveling_time: Option<f64>,
    /// Largest absolute roll while the arm worked on a leveled platform, deg.
    pub steady_state_error: Option<f64>,
    pub frames: usize,
    pub tp_frames: usize,
    pub arrived_at: f64,
    pub finished_at: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| sum / n as f64)
}

fn max(xs: impl Iterator<Item = f64>) -> Option<f64> {
    xs.fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))))
}

pub(crate) fn savings(flood_efficiency: f64, efficiency: f64) -> f64 {
    1.0 - flood_efficiency / efficiency
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "cause")]
pub enum Outcome {
    Completed,
    Aborted(AbortCause),
}

/// Per-trial metrics in the shape of the results table, plus the records
/// they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub environment: String,
    pub trial: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub pots_total: usize,
    pub pots_watered: usize,
    /// Share of pot appearances detected, per frame.
    pub detection_accuracy_pct: f64,
    /// Share of pots whose served target was the pot itself.
    pub pot_accuracy_pct: f64,
    pub inference_ms: f64,
    /// Unmatched pipeline outputs per frame, in percent.
    pub fp_pct: f64,
    pub positioning_error_mm: Option<f64>,
    pub leveling_s: Option<f64>,
    pub leveling_max_s: Option<f64>,
    pub sse_deg: Option<f64>,
    pub volume_ml: Option<f64>,
    pub efficiency_pct: Option<f64>,
    /// Savings against the configured flood baseline.
    pub water_savings_pct: Option<f64>,
    /// Savings at the efficient and wasteful ends of the baseline range.
    pub water_savings_range_pct: Option<[f64; 2]>,
    pub mission_time_s: f64,
    pub energy_mah: f64,
    /// Battery life at this mission's average draw, min.
    pub projected_runtime_min: Option<f64>,
    pub frames: FrameStats,
    pub records: Vec<IrrigationRecord>,
}

pub(crate) struct ReportInputs<'a> {
    pub environment: &'a str,
    pub trial: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub pots_total: usize,
    pub records: Vec<IrrigationRecord>,
    pub frames: FrameStats,
    pub mission_time_s: f64,
    pub energy_mah: f64,
    pub capacity_mah: f64,
    pub flood_efficiency: f64,
    pub flood_range: [f64; 2],
}

impl TrialReport {
    pub(crate) fn build(inp: ReportInputs<'_>) -> Self {
        let recs = &inp.records;
        let f = inp.frames;
        let pct = |num: f64, den: f64| if den > 0.0 { 100.0 * num / den } else { 0.0 };
        let watered: Vec<&IrrigationRecord> = recs.iter().filter(|r| r.dispensed > 0.0).collect();
        let total_disp: f64 = watered.iter().map(|r| r.dispensed).sum();
        let total_del: f64 = watered.iter().map(|r| r.delivered).sum();
        let eff = (total_disp > 0.0).then(|| total_del / total_disp);
        let savings_at = |flood: f64| eff.filter(|e| *e > 0.0).map(|e| 100.0 * savings(flood, e));
        let range = match (savings_at(inp.flood_range[1]), savings_at(inp.flood_range[0])) {
            (Some(lo), Some(hi)) => Some([lo, hi]),
            _ => None,
        };
        let draw_ma = if inp.mission_time_s > 0.0 {
            inp.energy_mah / (inp.mission_time_s / 3600.0)
        } else {
            0.0
        };
        TrialReport {
            environment: inp.environment.to_string(),
            trial: inp.trial,
            seed: inp.seed,
            outcome: inp.outcome,
            pots_total: inp.pots_total,
            pots_watered: watered.len(),
            detection_accuracy_pct: pct(f.tp_pot_frames as f64, f.pot_frames as f64),
            pot_accuracy_pct: pct(recs.iter().filter(|r| r.detected).count() as f64, inp.pots_total as f64),
            inference_ms: if f.frames > 0 {
                f.latency_ms / f.frames as f64
            } else {
                0.0
            },
            fp_pct: pct(f.false_positives as f64, f.frames as f64),
            positioning_error_mm: mean(recs.iter().filter_map(|r| r.positioning_error)),
            leveling_s: mean(recs.iter().filter_map(|r| r.leveling_time)),
            leveling_max_s: max(recs.iter().filter_map(|r| r.leveling_time)),
            sse_deg: max(recs.iter().filter_map(|r| r.steady_state_error)),
            volume_ml: mean(watered.iter().map(|r| r.dispensed)),
            efficiency_pct: eff.map(|e| 100.0 * e),
            water_savings_pct: savings_at(inp.flood_efficiency),
            water_savings_range_pct: range,
            mission_time_s: inp.mission_time_s,
            energy_mah: inp.energy_mah,
            projected_runtime_min: (draw_ma > 0.0).then(|| inp.capacity_mah / draw_ma * 60.0),
            frames: f,
            records: inp.records,
        }
    }
}

/// Per-environment means over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub environment: String,
    pub trials: usize,
    pub detection_accuracy_pct: f64,
    pub pot_accuracy_pct: f64,
    pub inference_ms: f64,
    pub fp_pct: f64,
    pub positioning_error_mm: Option<f64>,
    pub leveling_s: Option<f64>,
    pub leveling_max_s: Option<f64>,
    pub sse_deg: Option<f64>,
    pub volume_ml: Option<f64>,
    pub efficiency_pct: Option<f64>,
    pub water_savings_pct: Option<f64>,
    pub projected_runtime_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// Rows follow the order in which environments first appear.
    pub fn from_trials(trials: &[TrialReport]) -> Self {
        let mut names: Vec<&str> = Vec::new();
        for t in trials {
            if !names.contains(&t.environment.as_str()) {
                names.push(&t.environment);
            }
        }
        let rows = names
            .into_iter()
            .map(|name| {
                let ts: Vec<&TrialReport> = trials.iter().filter(|t| t.environment == name).collect();
                let m = |f: fn(&TrialReport) -> f64| mean(ts.iter().map(|t| f(t))).unwrap_or(0.0);
                let mo = |f: fn(&TrialReport) -> Option<f64>| mean(ts.iter().filter_map(|t| f(t)));
                SummaryRow {
                    environment: name.to_string(),
                    trials: ts.len(),
                    detection_accuracy_pct: m(|t| t.detection_accuracy_pct),
                    pot_accuracy_pct: m(|t| t.pot_accuracy_pct),
                    inference_ms: m(|t| t.inference_ms),
                    fp_pct: m(|t| t.fp_pct),
                    positioning_error_mm: mo(|t| t.positioning_error_mm),
                    leveling_s: mo(|t| t.leveling_s),
                    leveling_max_s: max(ts.iter().filter_map(|t| t.leveling_max_s)),
                    sse_deg: mo(|t| t.sse_deg),
                    volume_ml: mo(|t| t.volume_ml),
                    efficiency_pct: mo(|t| t.efficiency_pct),
                    water_savings_pct: mo(|t| t.water_savings_pct),
                    projected_runtime_min: mo(|t| t.projected_runtime_min),
                }
            })
            .collect();
        Summary { rows }
    }
}
