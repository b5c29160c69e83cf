//! CSV and SVG emission for experiment results.

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiments::MetricRecord;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("no curves to plot")]
    NoCurves,
}

/// Which CSV schema to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Ccdf,
    Ber,
}

impl CsvKind {
    fn header(self) -> &'static str {
        match self {
            CsvKind::Ccdf => "method,threshold_db,exceed,total,prob",
            CsvKind::Ber => "method,osnr_db,bit_errors,bits,ber,seed",
        }
    }
}

/// Writes records as CSV: fixed header, rows sorted by (method, x), LF
/// line endings, `.` decimal point.
pub fn emit_csv(kind: CsvKind, records: &[MetricRecord], path: &Path) -> Result<(), EmitError> {
    let mut rows: Vec<&MetricRecord> = records.iter().collect();
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.x_db.partial_cmp(&b.x_db).expect("finite x values"))
    });
    let mut text = String::from(kind.header());
    text.push('\n');
    for r in rows {
        match kind {
            CsvKind::Ccdf => text.push_str(&format!(
                "{},{},{},{},{}\n",
                r.method, r.x_db, r.numerator, r.denominator, r.ratio
            )),
            CsvKind::Ber => text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method, r.x_db, r.numerator, r.denominator, r.ratio, r.seed
            )),
        }
    }
    write_file(path, text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), EmitError> {
    let unwritable = |source| EmitError::Unwritable {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(unwritable)?;
    f.write_all(bytes).map_err(unwritable)
}

/// A single plotted curve: label plus (x dB, probability, denominator)
/// points. The denominator sets the display floor 1/(10·denominator)
/// for zero-probability points.
#[derive(Debug, Clone)]
pub struct PlotCurve {
    pub label: String,
    pub points: Vec<(f64, f64, u64)>,
}

impl PlotCurve {
    pub fn from_records(label: &str, records: &[MetricRecord]) -> Self {
        let mut points: Vec<(f64, f64, u64)> = records
            .iter()
            .filter(|r| r.method == label)
            .map(|r| (r.x_db, r.ratio, r.denominator))
            .collect();
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite x values"));
        Self {
            label: label.to_string(),
            points,
        }
    }
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

/// Renders curves to a self-contained SVG: linear x in dB, log-scale y
/// floored at 1/(10·denominator), one polyline per method and a legend.
pub fn emit_plot(curves: &[PlotCurve], path: &Path) -> Result<(), EmitError> {
    if curves.is_empty() || curves.iter().all(|c| c.points.is_empty()) {
        return Err(EmitError::NoCurves);
    }
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = 1.0_f64;
    for c in curves {
        for &(x, y, denom) in &c.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(display_floor(y, denom));
        }
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    // round the y axis down to a full decade
    let y_lo = 10f64.powf(y_min.log10().floor());

    let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| {
        let t = (y.log10() - y_lo.log10()) / (0.0 - y_lo.log10());
        HEIGHT - MARGIN_B - t * (HEIGHT - MARGIN_T - MARGIN_B)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));

    // y grid: one line per decade, labeled 10^k
    let decades = (-y_lo.log10()).round() as i32;
    for k in 0..=decades {
        let y = 10f64.powi(-k);
        let yy = py(y);
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{yy:.2}\" x2=\"{:.2}\" y2=\"{yy:.2}\" \
             stroke=\"#dddddd\"/>\n",
            px(x_min),
            px(x_max)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e-{k}</text>\n",
            MARGIN_L - 8.0,
            yy + 4.0
        ));
    }
    // x ticks: 8 evenly spaced labels
    for i in 0..=8 {
        let x = x_min + (x_max - x_min) * i as f64 / 8.0;
        let xx = px(x);
        svg.push_str(&format!(
            "<line x1=\"{xx:.2}\" y1=\"{:.2}\" x2=\"{xx:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
            py(1.0),
            py(y_lo)
        ));
        svg.push_str(&format!(
            "<text x=\"{xx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{x:.1}</text>\n",
            HEIGHT - MARGIN_B + 18.0
        ));
    }
    // axes
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">dB</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 8.0
    ));

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|&(x, y, denom)| format!("{:.2},{:.2}", px(x), py(display_floor(y, denom))))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        // legend entry
        let ly = MARGIN_T + 16.0 + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            WIDTH - MARGIN_R - 110.0,
            WIDTH - MARGIN_R - 80.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>\n",
            WIDTH - MARGIN_R - 72.0,
            ly + 4.0,
            c.label
        ));
    }
    svg.push_str("</svg>\n");
    write_file(path, svg.as_bytes())
}

/// Zero (or sub-floor) probabilities are drawn at 1/(10·denominator)
/// rather than dropped.
fn display_floor(y: f64, denominator: u64) -> f64 {
    let floor = 1.0 / (10.0 * denominator.max(1) as f64);
    if y > floor {
        y
    } else {
        floor
    }
}
