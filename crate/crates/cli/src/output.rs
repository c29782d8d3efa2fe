//! Result files: results.csv, results.json, lattice.csv and one convergence plot per target.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::run::{Experiment, Row, RunError, RunOutput};

pub const RESULT_COLUMNS: [&str; 10] = [
    "target_re",
    "target_im",
    "x0_id",
    "n",
    "gla_re",
    "gla_im",
    "oracle_re",
    "oracle_im",
    "abs_err",
    "cesaro_bound",
];

/// 17 significant digits, enough to round-trip a double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_text(header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<String, RunError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let io = |e: csv::Error| RunError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in records {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| RunError::Io(e.to_string()))
}

pub fn results_csv(exp: &Experiment, out: &RunOutput) -> Result<String, RunError> {
    csv_text(
        &RESULT_COLUMNS,
        out.rows.iter().map(|r| {
            let t = exp.targets[r.target].eigenvalue;
            vec![
                num(t.re),
                num(t.im),
                r.x0_id.to_string(),
                r.n.to_string(),
                num(r.value.re),
                num(r.value.im),
                num(r.oracle.re),
                num(r.oracle.im),
                num(r.abs_err()),
                r.cesaro_bound.map(num).unwrap_or_default(),
            ]
        }),
    )
}

pub fn lattice_csv(exp: &Experiment) -> Result<String, RunError> {
    csv_text(
        &["index", "re", "im", "modulus", "circle_id"],
        exp.decomposition.circles().iter().enumerate().flat_map(|(ci, c)| {
            c.members.iter().map(move |m| {
                vec![
                    m.index.to_string(),
                    num(m.value.re),
                    num(m.value.im),
                    num(m.modulus),
                    ci.to_string(),
                ]
            })
        }),
    )
}

pub fn results_json(exp: &Experiment, out: &RunOutput) -> Value {
    let targets: Vec<Value> = exp
        .targets
        .iter()
        .map(|t| json!({"label": t.label, "re": t.eigenvalue.re, "im": t.eigenvalue.im}))
        .collect();
    let rows: Vec<Value> = out
        .rows
        .iter()
        .map(|r| {
            json!({
                "target": exp.targets[r.target].label,
                "x0_id": r.x0_id,
                "n": r.n,
                "gla": [r.value.re, r.value.im],
                "oracle": [r.oracle.re, r.oracle.im],
                "abs_err": r.abs_err(),
                "cesaro_bound": r.cesaro_bound,
            })
        })
        .collect();
    let sweeps: Vec<Value> = out
        .sweeps
        .iter()
        .map(|s| json!({"x0_id": s.x0_id, "n": s.n, "reconstruction_residual": s.reconstruction_residual}))
        .collect();
    json!({
        "mode": exp.config.mode.name(),
        "system": exp.config.system.name(),
        "truncation": {"K": exp.config.truncation.max_degree, "N": exp.config.truncation.max_frequency},
        "n": exp.config.n,
        "x0": exp.config.x0,
        "targets": targets,
        "rows": rows,
        "sweeps": sweeps,
    })
}

pub fn plot_name(label: &str) -> String {
    let slug: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("convergence_{}.svg", slug.trim_matches('_'))
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 60.0;

/// Worst error over start points for each `n`, and the matching worst bound.
fn series(rows: &[&Row]) -> Vec<(usize, f64, Option<f64>)> {
    let mut out: Vec<(usize, f64, Option<f64>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(n, _, _)| *n == r.n) {
            Some(entry) => {
                entry.1 = entry.1.max(r.abs_err());
                entry.2 = match (entry.2, r.cesaro_bound) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                };
            }
            None => out.push((r.n, r.abs_err(), r.cesaro_bound)),
        }
    }
    out.sort_by_key(|e| e.0);
    out
}

/// Log-log error against n with a slope -1 guide.
pub fn convergence_svg(label: &str, rows: &[&Row]) -> String {
    let data = series(rows);
    let errors: Vec<(f64, f64)> = data
        .iter()
        .filter(|e| e.1 > 0.0)
        .map(|e| ((e.0 as f64).log10(), e.1.log10()))
        .collect();
    let bounds: Vec<(f64, f64)> = data
        .iter()
        .filter_map(|e| e.2.filter(|b| *b > 0.0).map(|b| ((e.0 as f64).log10(), b.log10())))
        .collect();

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">target {}</text>\n",
        W / 2.0,
        escape(label)
    );
    let all: Vec<(f64, f64)> = errors.iter().chain(&bounds).copied().collect();
    if all.is_empty() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">all errors are zero</text>\n</svg>\n",
            W / 2.0,
            H / 2.0
        ));
        return svg;
    }
    let (mut x0, mut x1) = extent(all.iter().map(|p| p.0));
    let (mut y0, mut y1) = extent(all.iter().map(|p| p.1));
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    svg.push_str(&format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">log10 n</text>\n",
        W / 2.0,
        H - 20.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">log10 error</text>\n",
        H / 2.0,
        H / 2.0
    ));
    for (v, x, y, anchor) in [
        (x0, sx(x0), H - MARGIN + 16.0, "middle"),
        (x1, sx(x1), H - MARGIN + 16.0, "middle"),
    ]
    .into_iter()
    .chain([(y0, MARGIN - 6.0, sy(y0), "end"), (y1, MARGIN - 6.0, sy(y1), "end")])
    {
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"{anchor}\">{v:.2}</text>\n"
        ));
    }

    if let Some(&(gx, gy)) = errors.first().or(bounds.first()) {
        // slope -1 through the first point, clipped to the frame
        let (a, b) = (x0.max(gx + gy - y1), x1.min(gx + gy - y0));
        if a < b {
            svg.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"gray\" stroke-dasharray=\"2 4\"/>\n",
                sx(a),
                sy(gy - (a - gx)),
                sx(b),
                sy(gy - (b - gx))
            ));
        }
    }
    for (pts, color, dash) in [(&bounds, "steelblue", " stroke-dasharray=\"6 3\""), (&errors, "firebrick", "")] {
        if pts.is_empty() {
            continue;
        }
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n",
            coords.join(" ")
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"firebrick\">max abs error</text>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"steelblue\">Cesaro bound</text>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"gray\">slope -1</text>\n",
        W - MARGIN - 90.0,
        MARGIN + 14.0,
        W - MARGIN - 90.0,
        MARGIN + 28.0,
        W - MARGIN - 90.0,
        MARGIN + 42.0
    ));
    svg.push_str("</svg>\n");
    svg
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Every output file as `(name, contents)`, computed before anything touches disk.
pub fn bundle(exp: &Experiment, out: &RunOutput) -> Result<Vec<(String, String)>, RunError> {
    let mut files = vec![
        ("results.csv".to_owned(), results_csv(exp, out)?),
        (
            "results.json".to_owned(),
            serde_json::to_string_pretty(&results_json(exp, out)).map_err(|e| RunError::Io(e.to_string()))? + "\n",
        ),
        ("lattice.csv".to_owned(), lattice_csv(exp)?),
    ];
    for (ti, t) in exp.targets.iter().enumerate() {
        let rows: Vec<&Row> = out.rows.iter().filter(|r| r.target == ti).collect();
        let name = plot_name(&t.label);
        if files.iter().all(|(f, _)| f != &name) {
            files.push((name, convergence_svg(&t.label, &rows)));
        }
    }
    Ok(files)
}

/// Writes the bundle into `dir`; on failure removes whatever was written.
pub fn write_bundle(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(RunError::Io(format!("{}: {e}", path.display())));
        }
        written.push(path);
    }
    Ok(written)
}
