//! Self-contained SVG renderings of the standard figures, driven by the CSV
//! outputs of the other subcommands (the frequency-landscape figure needs
//! only parameters). Plain hand-rolled SVG: line and scatter panels with
//! linear axes, byte-deterministic for identical inputs.

use anyhow::{bail, Context, Result};

use omsim_core::model::{mode_frequency_jet, DerivedScales, ModeParity, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesKind {
    Line,
    Scatter,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub kind: SeriesKind,
    pub color: &'static str,
    pub label: Option<&'static str>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 46.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn finite_minmax(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo <= hi).then_some((lo, hi))
}

/// Tick positions with a 1/2/5 decade step, covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil();
    let mut out = Vec::new();
    let mut k = first;
    while k * step <= hi + 1e-9 * span {
        out.push(k * step);
        k += 1.0;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e5).contains(&a) {
        // round to 6 significant digits to suppress binary-fraction noise
        let digits = 6 - a.log10().floor() as i32 - 1;
        let scale = 10f64.powi(digits.max(0));
        let r = (v * scale).round() / scale;
        format!("{r}")
    } else {
        format!("{v:.3e}")
    }
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.x_lo) / (self.x_hi - self.x_lo) * self.w
    }
    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.y_lo) / (self.y_hi - self.y_lo) * self.h
    }
}

fn render_panel(out: &mut String, panel: &Panel, y_offset: f64, width: f64, height: f64) {
    let (mut x_lo, mut x_hi) = panel
        .series
        .iter()
        .filter_map(|s| finite_minmax(s.x.iter().copied()))
        .fold(None, |acc: Option<(f64, f64)>, (lo, hi)| {
            Some(acc.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))))
        })
        .unwrap_or((0.0, 1.0));
    let (mut y_lo, mut y_hi) = panel
        .series
        .iter()
        .filter_map(|s| finite_minmax(s.y.iter().copied()))
        .fold(None, |acc: Option<(f64, f64)>, (lo, hi)| {
            Some(acc.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))))
        })
        .unwrap_or((0.0, 1.0));
    if x_lo == x_hi {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_lo == y_hi {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad_x = 0.04 * (x_hi - x_lo);
    let pad_y = 0.06 * (y_hi - y_lo);
    let frame = Frame {
        x0: MARGIN_LEFT,
        y0: y_offset + MARGIN_TOP,
        w: width - MARGIN_LEFT - MARGIN_RIGHT,
        h: height - MARGIN_TOP - MARGIN_BOTTOM,
        x_lo: x_lo - pad_x,
        x_hi: x_hi + pad_x,
        y_lo: y_lo - pad_y,
        y_hi: y_hi + pad_y,
    };

    out.push_str(&format!(
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"white\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        frame.x0, frame.y0, frame.w, frame.h
    ));
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        frame.x0 + frame.w / 2.0,
        y_offset + 18.0,
        panel.title
    ));

    for t in ticks(frame.x_lo, frame.x_hi) {
        let px = frame.px(t);
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#333\" stroke-width=\"1\"/>\n",
            frame.y0 + frame.h,
            frame.y0 + frame.h + 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            frame.y0 + frame.h + 18.0,
            fmt_tick(t)
        ));
    }
    for t in ticks(frame.y_lo, frame.y_hi) {
        let py = frame.py(t);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"#333\" stroke-width=\"1\"/>\n",
            frame.x0 - 5.0,
            frame.x0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">{}</text>\n",
            frame.x0 - 8.0,
            py + 4.0,
            fmt_tick(t)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        frame.x0 + frame.w / 2.0,
        y_offset + height - 8.0,
        panel.x_label
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 16 {:.2})\">{}</text>\n",
        frame.y0 + frame.h / 2.0,
        frame.y0 + frame.h / 2.0,
        panel.y_label
    ));

    for series in &panel.series {
        match series.kind {
            SeriesKind::Line => {
                let mut segment: Vec<String> = Vec::new();
                let flush = |seg: &mut Vec<String>, out: &mut String| {
                    if seg.len() >= 2 {
                        out.push_str(&format!(
                            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"/>\n",
                            seg.join(" "),
                            series.color
                        ));
                    }
                    seg.clear();
                };
                for (&x, &y) in series.x.iter().zip(&series.y) {
                    if x.is_finite() && y.is_finite() {
                        segment.push(format!("{:.2},{:.2}", frame.px(x), frame.py(y)));
                    } else {
                        flush(&mut segment, out);
                    }
                }
                flush(&mut segment, out);
            }
            SeriesKind::Scatter => {
                for (&x, &y) in series.x.iter().zip(&series.y) {
                    if x.is_finite() && y.is_finite() {
                        out.push_str(&format!(
                            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.2\" fill=\"{}\"/>\n",
                            frame.px(x),
                            frame.py(y),
                            series.color
                        ));
                    }
                }
            }
        }
    }

    let mut legend_y = frame.y0 + 14.0;
    for series in panel.series.iter().filter(|s| s.label.is_some()) {
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{legend_y:.2}\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\" fill=\"{}\">{}</text>\n",
            frame.x0 + frame.w - 6.0,
            series.color,
            series.label.unwrap()
        ));
        legend_y += 14.0;
    }
}

/// Render stacked panels into one self-contained SVG document.
pub fn render_svg(panels: &[Panel], width: u32, panel_height: u32) -> String {
    let total_height = panel_height as f64 * panels.len() as f64;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{total_height}\" viewBox=\"0 0 {width} {total_height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));
    for (i, panel) in panels.iter().enumerate() {
        render_panel(
            &mut out,
            panel,
            i as f64 * panel_height as f64,
            width as f64,
            panel_height as f64,
        );
    }
    out.push_str("</svg>\n");
    out
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Result<Vec<f64>> {
    let idx = header
        .iter()
        .position(|h| h == name)
        .with_context(|| format!("CSV schema mismatch: missing column {name:?} (have {header:?})"))?;
    Ok(rows.iter().map(|r| r[idx]).collect())
}

/// Mode-frequency landscape, both parities, over two spatial periods.
pub fn fig2(params: &SystemParams, scales: &DerivedScales) -> Vec<Panel> {
    let n = 1200;
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let curve = |parity: ModeParity| -> Series {
        let y = xs
            .iter()
            .map(|&x| {
                let jet = mode_frequency_jet(x * scales.lambda_n, parity, params, scales);
                (jet.omega_c - scales.omega_n) / (2.0 * std::f64::consts::PI * 1e9)
            })
            .collect();
        Series {
            x: xs.clone(),
            y,
            kind: SeriesKind::Line,
            color: if parity == ModeParity::Even {
                PALETTE[0]
            } else {
                PALETTE[1]
            },
            label: Some(if parity == ModeParity::Even { "even" } else { "odd" }),
        }
    };
    vec![Panel {
        title: "Cavity mode frequencies vs membrane position".into(),
        x_label: "q / lambda_n".into(),
        y_label: "(omega_c - omega_n) / 2pi  [GHz]".into(),
        series: vec![curve(ModeParity::Even), curve(ModeParity::Odd)],
    }]
}

/// Phase portrait from a `simulate` CSV.
pub fn fig3(
    header: &[String],
    rows: &[Vec<f64>],
    params: &SystemParams,
    scales: &DerivedScales,
) -> Result<Vec<Panel>> {
    let q0 = column(header, rows, "q0")?;
    let p0 = column(header, rows, "p0")?;
    let scale_p = params.mass * params.omega_m * scales.lambda_n;
    Ok(vec![Panel {
        title: "Limit cycle in the mechanical phase space".into(),
        x_label: "(q0 - q_s) / lambda_n".into(),
        y_label: "p0 / (m omega_m lambda_n)".into(),
        series: vec![Series {
            x: q0.iter().map(|q| (q - params.q_s) / scales.lambda_n).collect(),
            y: p0.iter().map(|p| p / scale_p).collect(),
            kind: SeriesKind::Line,
            color: PALETTE[0],
            label: None,
        }],
    }])
}

/// Attractor diagram from a `sweep` CSV (converged records only).
pub fn fig4(header: &[String], rows: &[Vec<f64>], scales: &DerivedScales) -> Result<Vec<Panel>> {
    let power = column(header, rows, "power_W")?;
    let a_bar = column(header, rows, "A_bar_m")?;
    let converged = column(header, rows, "converged")?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..power.len() {
        if converged[i] != 0.0 {
            x.push(power[i]);
            y.push(a_bar[i] / scales.lambda_n);
        }
    }
    if x.is_empty() {
        bail!("sweep CSV contains no converged records");
    }
    Ok(vec![Panel {
        title: "Attractor diagram".into(),
        x_label: "drive power P  [W]".into(),
        y_label: "A_bar / lambda_n".into(),
        series: vec![Series {
            x,
            y,
            kind: SeriesKind::Scatter,
            color: PALETTE[0],
            label: None,
        }],
    }])
}

/// Photon number vs membrane position from a `simulate` CSV.
pub fn fig5(
    header: &[String],
    rows: &[Vec<f64>],
    params: &SystemParams,
    scales: &DerivedScales,
) -> Result<Vec<Panel>> {
    let q0 = column(header, rows, "q0")?;
    let n_ph = column(header, rows, "photon_number")?;
    Ok(vec![Panel {
        title: "Cavity occupation along the oscillation".into(),
        x_label: "(q0 - q_s) / lambda_n".into(),
        y_label: "photon number |alpha|^2".into(),
        series: vec![Series {
            x: q0.iter().map(|q| (q - params.q_s) / scales.lambda_n).collect(),
            y: n_ph,
            kind: SeriesKind::Line,
            color: PALETTE[0],
            label: None,
        }],
    }])
}

/// Logarithmic negativity vs membrane position from an `entangle` CSV.
pub fn fig6(
    header: &[String],
    rows: &[Vec<f64>],
    params: &SystemParams,
    scales: &DerivedScales,
) -> Result<Vec<Panel>> {
    let q0 = column(header, rows, "q0")?;
    let e_n = column(header, rows, "E_N")?;
    Ok(vec![Panel {
        title: "Entanglement along the oscillation".into(),
        x_label: "(q0 - q_s) / lambda_n".into(),
        y_label: "E_N".into(),
        series: vec![Series {
            x: q0.iter().map(|q| (q - params.q_s) / scales.lambda_n).collect(),
            y: e_n,
            kind: SeriesKind::Line,
            color: PALETTE[2],
            label: None,
        }],
    }])
}

/// Stacked time series (q0, p0, photon number, E_N) from an `entangle` CSV.
pub fn fig7(
    header: &[String],
    rows: &[Vec<f64>],
    params: &SystemParams,
    scales: &DerivedScales,
) -> Result<Vec<Panel>> {
    let t = column(header, rows, "t")?;
    let q0 = column(header, rows, "q0")?;
    let p0 = column(header, rows, "p0")?;
    let n_ph = column(header, rows, "photon_number")?;
    let e_n = column(header, rows, "E_N")?;
    let t_m = params.mechanical_period();
    let tt: Vec<f64> = t.iter().map(|t| t / t_m).collect();
    let scale_p = params.mass * params.omega_m * scales.lambda_n;
    let panel = |title: &str, y_label: &str, y: Vec<f64>, color: &'static str| Panel {
        title: title.into(),
        x_label: "t / T_m".into(),
        y_label: y_label.into(),
        series: vec![Series {
            x: tt.clone(),
            y,
            kind: SeriesKind::Line,
            color,
            label: None,
        }],
    };
    Ok(vec![
        panel(
            "Membrane position",
            "(q0 - q_s) / lambda_n",
            q0.iter().map(|q| (q - params.q_s) / scales.lambda_n).collect(),
            PALETTE[0],
        ),
        panel(
            "Membrane momentum",
            "p0 / (m omega_m lambda_n)",
            p0.iter().map(|p| p / scale_p).collect(),
            PALETTE[1],
        ),
        panel("Cavity occupation", "|alpha|^2", n_ph, PALETTE[3]),
        panel("Entanglement", "E_N", e_n, PALETTE[2]),
    ])
}
