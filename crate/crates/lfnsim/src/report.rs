//! Batch artifacts: CSV files with fixed 6-decimal formatting for
//! byte-stable diffs, and minimal SVG line plots for goodput series and
//! sweep surfaces.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::sweep::CellStats;
use crate::transport::FlowKind;
use crate::world::RunResult;

/// Output format selection for `emit_report`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
    Both,
}

impl ReportFormat {
    pub fn csv(self) -> bool {
        matches!(self, ReportFormat::Csv | ReportFormat::Both)
    }
    pub fn svg(self) -> bool {
        matches!(self, ReportFormat::Svg | ReportFormat::Both)
    }
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

/// time_s,flow_id,goodput_Bps — one row per (bin, flow).
pub fn goodput_series_csv(result: &RunResult) -> String {
    let mut out = String::from("time_s,flow_id,goodput_Bps\n");
    let bw = result.bin_width.as_secs_f64();
    let n_bins = (result.duration.as_secs_f64() / bw).ceil() as usize;
    for bin in 0..n_bins {
        for flow in &result.flows {
            let bytes = flow.bins.get(bin).copied().unwrap_or(0);
            let _ = writeln!(
                out,
                "{},{},{}",
                f6(bin as f64 * bw),
                flow.name,
                f6(bytes as f64 / bw)
            );
        }
    }
    out
}

pub fn summary_csv(result: &RunResult) -> String {
    let mut out = String::from(
        "flow_id,kind,volume_bytes,data_start_s,completion_s,box_width_s,delivered_bytes,\
         duplicate_bytes,sent_segments,retransmits,fast_retransmits,rtos,data_drops,ack_drops,\
         steady_goodput_Bps\n",
    );
    for f in &result.flows {
        let (kind, volume) = match f.kind {
            FlowKind::Volume(v) => ("volume", v.to_string()),
            FlowKind::Demand(d) => ("demand", d.to_string()),
        };
        let opt = |x: Option<f64>| x.map(f6).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f.name,
            kind,
            volume,
            opt(f.data_start.map(|t| t.as_secs_f64())),
            opt(f.completion.map(|t| t.as_secs_f64())),
            opt(f.box_width()),
            f.delivered_bytes,
            f.duplicate_bytes,
            f.sent_segments,
            f.retransmits,
            f.fast_retransmits,
            f.rto_count,
            f.data_drops,
            f.ack_drops,
            opt(f.steady_goodput(result.bin_width)),
        );
    }
    out
}

pub fn links_csv(result: &RunResult) -> String {
    let mut out = String::from("channel,submitted,sent,delivered,loss_dropped,tail_dropped\n");
    for (name, st) in &result.channels {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            name, st.submitted, st.sent, st.delivered, st.loss_dropped, st.tail_dropped
        );
    }
    out
}

pub fn switches_csv(result: &RunResult) -> String {
    let mut out =
        String::from("switch,forwarded,tail_dropped,peak_occupancy_bytes,pause_events\n");
    for (name, st) in &result.switches {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            name, st.forwarded, st.tail_dropped, st.peak_occupancy, st.pause_events
        );
    }
    out
}

/// time_s,flow_id,old_cwnd,new_cwnd — the controller's applied-action log.
pub fn actions_csv(result: &RunResult) -> String {
    let mut out = String::from("time_s,flow_id,old_cwnd,new_cwnd\n");
    for a in &result.actions {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            f6(a.at.as_secs_f64()),
            a.flow,
            a.old_cwnd,
            a.new_cwnd
        );
    }
    out
}

pub fn trace_csv(result: &RunResult) -> String {
    let mut out = String::from("time_s,flow_id,event,seq,len\n");
    for r in &result.trace {
        let flow = &result.flows[r.flow as usize].name;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            f6(r.t.as_secs_f64()),
            flow,
            r.event.as_str(),
            r.seq,
            r.len
        );
    }
    out
}

/// rtt_ms,loss_pct,mean_s,median_s,stddev_s,reps
pub fn sweep_csv(cells: &[CellStats]) -> String {
    let mut out = String::from("rtt_ms,loss_pct,mean_s,median_s,stddev_s,reps\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            f6(c.rtt_ms),
            f6(c.loss * 100.0),
            f6(c.mean_s),
            f6(c.median_s),
            f6(c.stddev_s),
            c.reps
        );
    }
    out
}

/// Per-replicate completions, for tail-shape inspection.
pub fn sweep_replicates_csv(cells: &[CellStats]) -> String {
    let mut out = String::from("rtt_ms,loss_pct,replicate,completion_s\n");
    for c in cells {
        for (i, t) in c.completions_s.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                f6(c.rtt_ms),
                f6(c.loss * 100.0),
                i,
                f6(*t)
            );
        }
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

struct SvgCanvas {
    out: String,
    w: f64,
    h: f64,
    margin: f64,
}

impl SvgCanvas {
    fn new(w: f64, h: f64) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        SvgCanvas {
            out,
            w,
            h,
            margin: 60.0,
        }
    }

    fn x(&self, v: f64, lo: f64, hi: f64) -> f64 {
        let span = (hi - lo).max(1e-12);
        self.margin + (v - lo) / span * (self.w - 2.0 * self.margin)
    }

    fn y(&self, v: f64, lo: f64, hi: f64) -> f64 {
        let span = (hi - lo).max(1e-12);
        self.h - self.margin - (v - lo) / span * (self.h - 2.0 * self.margin)
    }

    fn axes(&mut self, x_label: &str, y_label: &str, xr: (f64, f64), yr: (f64, f64)) {
        let (x0, y0) = (self.margin, self.h - self.margin);
        let (x1, y1) = (self.w - self.margin, self.margin);
        let _ = writeln!(
            self.out,
            r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
        );
        let _ = writeln!(
            self.out,
            r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
        );
        let _ = writeln!(
            self.out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            self.h - 15.0,
            x_label
        );
        let _ = writeln!(
            self.out,
            r#"<text x="15" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            y_label
        );
        for i in 0..=4 {
            let fx = xr.0 + (xr.1 - xr.0) * i as f64 / 4.0;
            let fy = yr.0 + (yr.1 - yr.0) * i as f64 / 4.0;
            let px = self.x(fx, xr.0, xr.1);
            let py = self.y(fy, yr.0, yr.1);
            let _ = writeln!(
                self.out,
                r#"<text x="{px}" y="{}" font-size="10" text-anchor="middle">{fx:.2}</text>"#,
                y0 + 15.0
            );
            let _ = writeln!(
                self.out,
                r#"<text x="{}" y="{py}" font-size="10" text-anchor="end">{fy:.1}</text>"#,
                x0 - 5.0
            );
        }
    }

    fn polyline(&mut self, pts: &[(f64, f64)], xr: (f64, f64), yr: (f64, f64), color: &str) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", self.x(*x, xr.0, xr.1), self.y(*y, yr.0, yr.1)))
            .collect();
        let _ = writeln!(
            self.out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            coords.join(" "),
            color
        );
    }

    fn legend(&mut self, labels: &[(String, &str)]) {
        for (i, (label, color)) in labels.iter().enumerate() {
            let y = self.margin + 14.0 * i as f64;
            let x = self.w - self.margin - 140.0;
            let _ = writeln!(
                self.out,
                r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#,
                y - 9.0
            );
            let _ = writeln!(
                self.out,
                r#"<text x="{}" y="{y}" font-size="11">{label}</text>"#,
                x + 14.0
            );
        }
    }

    fn finish(mut self) -> String {
        let _ = writeln!(self.out, "</svg>");
        self.out
    }
}

/// Per-flow goodput lines plus the aggregate, MB/s over seconds.
pub fn goodput_svg(result: &RunResult) -> String {
    let bw = result.bin_width.as_secs_f64();
    let n_bins = (result.duration.as_secs_f64() / bw).ceil() as usize;
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for flow in &result.flows {
        let pts: Vec<(f64, f64)> = (0..n_bins)
            .map(|i| {
                let bytes = flow.bins.get(i).copied().unwrap_or(0);
                (i as f64 * bw, bytes as f64 / bw / 1e6)
            })
            .collect();
        series.push((flow.name.clone(), pts));
    }
    let agg = result.aggregate_bins();
    let pts: Vec<(f64, f64)> = (0..n_bins)
        .map(|i| {
            let bytes = agg.get(i).copied().unwrap_or(0);
            (i as f64 * bw, bytes as f64 / bw / 1e6)
        })
        .collect();
    series.push(("all".to_string(), pts));

    let y_max = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|(_, y)| *y))
        .fold(1.0f64, f64::max)
        * 1.05;
    let xr = (0.0, result.duration.as_secs_f64().max(1e-9));
    let yr = (0.0, y_max);
    let mut canvas = SvgCanvas::new(800.0, 480.0);
    canvas.axes("time (s)", "goodput (MB/s)", xr, yr);
    let mut labels = Vec::new();
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        canvas.polyline(pts, xr, yr, color);
        labels.push((name.clone(), color));
    }
    canvas.legend(&labels);
    canvas.finish()
}

/// Median completion time against RTT, one line per loss rate.
pub fn sweep_svg(cells: &[CellStats]) -> String {
    let mut losses: Vec<f64> = cells.iter().map(|c| c.loss).collect();
    losses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    losses.dedup();
    let x_max = cells.iter().map(|c| c.rtt_ms).fold(1.0f64, f64::max);
    let y_max = cells
        .iter()
        .map(|c| c.median_s)
        .filter(|v| v.is_finite())
        .fold(1.0f64, f64::max)
        * 1.05;
    let xr = (0.0, x_max);
    let yr = (0.0, y_max);
    let mut canvas = SvgCanvas::new(800.0, 480.0);
    canvas.axes("RTT (ms)", "median completion (s)", xr, yr);
    let mut labels = Vec::new();
    for (i, loss) in losses.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| c.loss == *loss && c.median_s.is_finite())
            .map(|c| (c.rtt_ms, c.median_s))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let color = PALETTE[i % PALETTE.len()];
        canvas.polyline(&pts, xr, yr, color);
        labels.push((format!("loss {}%", loss * 100.0), color));
    }
    canvas.legend(&labels);
    canvas.finish()
}

/// Writes every artifact for one run into `dir`.
pub fn emit_run_report(
    result: &RunResult,
    dir: &Path,
    format: ReportFormat,
    with_trace: bool,
) -> io::Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut write = |name: &str, content: String| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, content)?;
        written.push(path);
        Ok(())
    };
    if format.csv() {
        write("goodput_series.csv", goodput_series_csv(result))?;
        write("summary.csv", summary_csv(result))?;
        write("links.csv", links_csv(result))?;
        if !result.switches.is_empty() {
            write("switches.csv", switches_csv(result))?;
        }
        if !result.actions.is_empty() {
            write("actions.csv", actions_csv(result))?;
        }
        if with_trace {
            write("trace.csv", trace_csv(result))?;
        }
    }
    if format.svg() {
        write("goodput.svg", goodput_svg(result))?;
    }
    Ok(written)
}

/// Writes both sweep tables (with and without the connection ramp).
pub fn emit_sweep_report(
    ramp: &[CellStats],
    reuse: &[CellStats],
    dir: &Path,
    format: ReportFormat,
) -> io::Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut write = |name: &str, content: String| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, content)?;
        written.push(path);
        Ok(())
    };
    if format.csv() {
        write("sweep_ramp.csv", sweep_csv(ramp))?;
        write("sweep_reuse.csv", sweep_csv(reuse))?;
        write("sweep_ramp_replicates.csv", sweep_replicates_csv(ramp))?;
        write("sweep_reuse_replicates.csv", sweep_replicates_csv(reuse))?;
    }
    if format.svg() {
        write("sweep_ramp.svg", sweep_svg(ramp))?;
        write("sweep_reuse.svg", sweep_svg(reuse))?;
    }
    Ok(written)
}
