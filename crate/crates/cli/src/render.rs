//! Static SVG snapshots, one per stage.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pac_core::schedule::{ScheduleFile, Stage};

const CELL: usize = 40;
const MARGIN: usize = 30;

pub fn write_all(file: &ScheduleFile, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut paths = Vec::new();
    for (t, stage) in file.stages.iter().enumerate() {
        let path = dir.join(format!("stage_{t:04}.svg"));
        fs::write(&path, stage_svg(stage, t, file.array)).with_context(|| format!("writing {}", path.display()))?;
        paths.push(path);
    }
    Ok(paths)
}

fn center(i: usize) -> usize {
    MARGIN + i * CELL + CELL / 2
}

/// Sites as grey dots, AOD lines in use as dashed lines, SLM atoms as filled
/// blue circles, AOD atoms as orange rings, fired sites outlined in red.
pub fn stage_svg(stage: &Stage, t: usize, n: usize) -> String {
    let size = 2 * MARGIN + n * CELL;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#);
    let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20" font-family="monospace" font-size="14">stage {t}, fired {:?}</text>"#, stage.fired);
    for x in 0..n {
        for y in 0..n {
            let _ = writeln!(s, r##"<circle cx="{}" cy="{}" r="3" fill="#bbb"/>"##, center(x), center(y));
        }
    }
    let mut cols = std::collections::BTreeMap::new();
    let mut rows = std::collections::BTreeMap::new();
    for rec in &stage.qubits {
        if let (Some(c), Some(r)) = (rec.state.c, rec.state.r) {
            cols.insert(c, rec.state.x);
            rows.insert(r, rec.state.y);
        }
    }
    let far = size - MARGIN;
    for (c, x) in &cols {
        let _ = writeln!(s, r##"<line x1="{0}" y1="{MARGIN}" x2="{0}" y2="{far}" stroke="#e80" stroke-dasharray="4 3"><title>AOD column {c}</title></line>"##, center(*x));
    }
    for (r, y) in &rows {
        let _ = writeln!(s, r##"<line x1="{MARGIN}" y1="{0}" x2="{far}" y2="{0}" stroke="#e80" stroke-dasharray="4 3"><title>AOD row {r}</title></line>"##, center(*y));
    }
    let fired_sites: std::collections::BTreeSet<(usize, usize)> = stage
        .qubits
        .iter()
        .filter(|a| stage.qubits.iter().any(|b| b.id != a.id && b.state.site() == a.state.site()))
        .filter(|_| stage.fires())
        .map(|r| r.state.site())
        .collect();
    for (x, y) in &fired_sites {
        let _ = writeln!(s, r##"<circle cx="{}" cy="{}" r="17" fill="none" stroke="#d00" stroke-width="2"/>"##, center(*x), center(*y));
    }
    for rec in &stage.qubits {
        let (cx, cy) = (center(rec.state.x), center(rec.state.y));
        // Co-sited atoms are nudged apart so both stay visible.
        let (dx, style) = if rec.state.in_aod() {
            (6isize, r##"fill="white" stroke="#e80" stroke-width="3""##)
        } else {
            (-6, r##"fill="#36c""##)
        };
        let _ = writeln!(s, r#"<circle cx="{}" cy="{cy}" r="9" {style}><title>qubit {}</title></circle>"#, cx as isize + dx, rec.id);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="monospace" font-size="9" text-anchor="middle">{}</text>"#, cx as isize + dx, cy + 3, rec.id);
    }
    s.push_str("</svg>\n");
    s
}
