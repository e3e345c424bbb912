//! Output files and the plain-text results table.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::leveling::PidGains;
use crate::mission::{Outcome, Summary, SummaryRow, TraceEvent, TrialReport};

/// Contents of `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub config: ScenarioConfig,
    pub gains: PidGains,
    pub trials: Vec<TrialReport>,
    pub summary: Summary,
}

impl ResultsFile {
    pub fn new(config: ScenarioConfig, gains: PidGains, trials: Vec<TrialReport>) -> Self {
        let summary = Summary::from_trials(&trials);
        Self {
            config,
            gains,
            trials,
            summary,
        }
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// One line of `trials.csv`. Missing values are empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub environment: String,
    pub trial: usize,
    pub seed: u64,
    pub outcome: String,
    pub pots_total: usize,
    pub pots_watered: usize,
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
    pub water_savings_low_pct: Option<f64>,
    pub water_savings_high_pct: Option<f64>,
    pub mission_time_s: f64,
    pub energy_mah: f64,
    pub projected_runtime_min: Option<f64>,
}

impl From<&TrialReport> for TrialRow {
    fn from(t: &TrialReport) -> Self {
        let outcome = match t.outcome {
            Outcome::Completed => "completed".to_string(),
            Outcome::Aborted(c) => format!("aborted_{}", format!("{c:?}").to_lowercase()),
        };
        Self {
            environment: t.environment.clone(),
            trial: t.trial,
            seed: t.seed,
            outcome,
            pots_total: t.pots_total,
            pots_watered: t.pots_watered,
            detection_accuracy_pct: t.detection_accuracy_pct,
            pot_accuracy_pct: t.pot_accuracy_pct,
            inference_ms: t.inference_ms,
            fp_pct: t.fp_pct,
            positioning_error_mm: t.positioning_error_mm,
            leveling_s: t.leveling_s,
            leveling_max_s: t.leveling_max_s,
            sse_deg: t.sse_deg,
            volume_ml: t.volume_ml,
            efficiency_pct: t.efficiency_pct,
            water_savings_pct: t.water_savings_pct,
            water_savings_low_pct: t.water_savings_range_pct.map(|r| r[0]),
            water_savings_high_pct: t.water_savings_range_pct.map(|r| r[1]),
            mission_time_s: t.mission_time_s,
            energy_mah: t.energy_mah,
            projected_runtime_min: t.projected_runtime_min,
        }
    }
}

pub fn write_trials_csv<W: Write>(trials: &[TrialReport], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for t in trials {
        w.serialize(TrialRow::from(t))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials_csv<R: std::io::Read>(input: R) -> Result<Vec<TrialRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Debug, Serialize)]
struct TraceRow<'a> {
    environment: &'a str,
    trial: usize,
    t: f64,
    pot: usize,
    from: String,
    to: String,
    alpha_true: f64,
    alpha_filtered: f64,
    voltage: f64,
    note: &'a str,
}

/// Phase changes of every traced trial, one row each.
pub fn write_trace_csv<W: Write>(traces: &[(&TrialReport, &[TraceEvent])], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for (t, events) in traces {
        for e in events.iter() {
            w.serialize(TraceRow {
                environment: &t.environment,
                trial: t.trial,
                t: e.t,
                pot: e.pot,
                from: e.from.to_string(),
                to: e.to.to_string(),
                alpha_true: e.alpha_true,
                alpha_filtered: e.alpha_filtered,
                voltage: e.voltage,
                note: &e.note,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub const TABLE_COLUMNS: [&str; 8] = [
    "Acc %",
    "Time ms",
    "FP %",
    "Error mm",
    "Leveling s",
    "SSE °",
    "Volume mL",
    "Eff %",
];

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.digits$}"))
}

fn row_cells(r: &SummaryRow) -> [String; 8] {
    [
        cell(Some(r.detection_accuracy_pct), 1),
        cell(Some(r.inference_ms), 0),
        cell(Some(r.fp_pct), 1),
        cell(r.positioning_error_mm, 1),
        cell(r.leveling_s, 1),
        cell(r.sse_deg, 1),
        cell(r.volume_ml, 0),
        cell(r.efficiency_pct, 1),
    ]
}

/// The results table, one row per environment.
pub fn render_summary(summary: &Summary) -> String {
    let name_w = summary
        .rows
        .iter()
        .map(|r| r.environment.len())
        .chain(["Environment".len()])
        .max()
        .unwrap_or(0);
    let cells: Vec<[String; 8]> = summary.rows.iter().map(row_cells).collect();
    let widths: Vec<usize> = (0..8)
        .map(|i| {
            cells
                .iter()
                .map(|c| c[i].chars().count())
                .chain([TABLE_COLUMNS[i].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let pad = |s: &str, w: usize| format!("{}{s}", " ".repeat(w - s.chars().count()));
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Environment");
    for (h, w) in TABLE_COLUMNS.iter().zip(&widths) {
        let _ = write!(out, "  {}", pad(h, *w));
    }
    out.push('\n');
    for (r, c) in summary.rows.iter().zip(&cells) {
        let _ = write!(out, "{:<name_w$}", r.environment);
        for (s, w) in c.iter().zip(&widths) {
            let _ = write!(out, "  {}", pad(s, *w));
        }
        out.push('\n');
    }
    out
}

/// Table plus the secondary per-environment figures.
pub fn render_report(results: &ResultsFile) -> String {
    let mut out = render_summary(&results.summary);
    let flood = results.config.robot.mission.flood_efficiency;
    let [lo, hi] = results.config.robot.mission.flood_efficiency_range;
    out.push('\n');
    for r in &results.summary.rows {
        let _ = writeln!(
            out,
            "{}: {} trials, per-pot accuracy {:.1}%, water savings {} (flood {flood}), runtime {} min",
            r.environment,
            r.trials,
            r.pot_accuracy_pct,
            r.water_savings_pct.map_or("N/A".into(), |s| format!("{s:.1}%")),
            cell(r.projected_runtime_min, 1),
        );
        if let Some(e) = r.efficiency_pct.filter(|e| *e > 0.0) {
            let s = |f: f64| 100.0 * (1.0 - f / (e / 100.0));
            let _ = writeln!(
                out,
                "  savings over flood efficiency {lo}..{hi}: {:.1}%..{:.1}%",
                s(hi),
                s(lo)
            );
        }
    }
    out
}
