//! Raster export (CSV and SVG) and the JSON rates summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bg::{ConditionResult, PopulationSummary};
use crate::network::{Backend, SpikeRecord};

pub const CSV_HEADER: [&str; 4] = ["step", "time_ms", "population", "neuron"];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unexpected CSV header {0:?}")]
    Header(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterRow {
    pub step: u64,
    pub time_ms: f64,
    pub population: String,
    pub neuron: u32,
}

pub fn raster_rows(record: &SpikeRecord, dt_ms: f64) -> Vec<RasterRow> {
    record
        .named_events()
        .map(|(step, pop, neuron)| RasterRow {
            step,
            time_ms: step as f64 * dt_ms,
            population: pop.to_string(),
            neuron,
        })
        .collect()
}

pub fn write_raster_csv<W: Write>(
    record: &SpikeRecord,
    dt_ms: f64,
    out: W,
) -> Result<(), ExportError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in raster_rows(record, dt_ms) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raster_csv<R: Read>(input: R) -> Result<Vec<RasterRow>, ExportError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(ExportError::Header(header));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

const SVG_WIDTH: f64 = 900.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 40.0;
const ROW_HEIGHT: f64 = 1.5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Static raster: x is time in ms, y the neuron index, one labeled band per
/// population in record order.
pub fn raster_svg(record: &SpikeRecord, dt_ms: f64, duration_ms: f64) -> String {
    let total: usize = record.sizes.iter().sum();
    let plot_h = (total as f64 * ROW_HEIGHT).max(100.0);
    let row_h = if total == 0 {
        0.0
    } else {
        plot_h / total as f64
    };
    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let height = plot_h + MARGIN_TOP + MARGIN_BOTTOM;
    let duration = duration_ms.max(dt_ms);
    let x_of = |t: f64| MARGIN_LEFT + t / duration * plot_w;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{height}" viewBox="0 0 {SVG_WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let mut band_top = vec![0.0; record.sizes.len()];
    let mut y = MARGIN_TOP;
    for (i, (name, &size)) in record.populations.iter().zip(&record.sizes).enumerate() {
        band_top[i] = y;
        let h = size as f64 * row_h;
        let fill = if i % 2 == 0 { "#f2f2f2" } else { "#ffffff" };
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_LEFT}" y="{y:.2}" width="{plot_w}" height="{h:.2}" fill="{fill}"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            MARGIN_LEFT - 6.0,
            y + h / 2.0,
            escape(name)
        );
        y += h;
    }

    let _ = writeln!(s, r##"<g fill="#1f4e9c">"##);
    for e in &record.events {
        let t = e.step as f64 * dt_ms;
        let cy = band_top[e.population as usize] + (e.neuron as f64 + 0.5) * row_h;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="1" height="{:.2}"/>"#,
            x_of(t),
            cy - row_h / 2.0,
            row_h.max(1.0)
        );
    }
    let _ = writeln!(s, "</g>");

    // axes
    let base = MARGIN_TOP + plot_h;
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_LEFT}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#,
        MARGIN_LEFT + plot_w
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{base:.2}" stroke="black"/>"#
    );
    for k in 0..=4 {
        let t = duration * k as f64 / 4.0;
        let x = x_of(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{base:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            base + 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
            base + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (ms)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        base + 32.0
    );
    s.push_str("</svg>\n");
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub backend: Backend,
    pub duration_ms: f64,
    pub analysis_start_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub conditions: BTreeMap<String, BTreeMap<String, PopulationSummary>>,
    pub metadata: Metadata,
}

impl Summary {
    pub fn new(results: &[ConditionResult], metadata: Metadata) -> Self {
        Summary {
            conditions: results
                .iter()
                .map(|r| (r.condition.name().to_string(), r.summary.clone()))
                .collect(),
            metadata,
        }
    }

    pub fn to_json(&self) -> Result<String, ExportError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Writes `<stem>.csv` and `<stem>.svg` into `dir`.
pub fn export_raster(
    record: &SpikeRecord,
    dt_ms: f64,
    duration_ms: f64,
    dir: &Path,
    stem: &str,
) -> Result<(), ExportError> {
    fs::create_dir_all(dir)?;
    let file = io::BufWriter::new(fs::File::create(dir.join(format!("{stem}.csv")))?);
    write_raster_csv(record, dt_ms, file)?;
    fs::write(
        dir.join(format!("{stem}.svg")),
        raster_svg(record, dt_ms, duration_ms),
    )?;
    Ok(())
}
