use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{bubble_color, Viewport, FRAGMENT};
use crate::error::{ensure, Error, Result};
use crate::marble::{BubbleSet, EventKind, MarbleTrace};

fn hex([r, g, b]: [u8; 3]) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// SVG with a background rect, one filled polygon-as-polyline per bubble,
/// one polyline per particle id and one per fragmentation event.
pub fn marble_svg(
    trace: &MarbleTrace,
    bubbles: &BubbleSet,
    viewport: Viewport,
    size: (usize, usize),
    palette_seed: u64,
) -> Result<String> {
    let vp = viewport;
    ensure(vp.t_min < vp.t_max && vp.x_min < vp.x_max, || format!("degenerate viewport {vp:?}"))?;
    ensure(size.0 > 0 && size.1 > 0, || "image size must be positive".into())?;
    let (w, h) = (size.0 as f64, size.1 as f64);
    let px = |t: f64| (t - vp.t_min) / (vp.t_max - vp.t_min) * w;
    let py = |x: f64| (vp.x_max - x) / (vp.x_max - vp.x_min) * h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}">"#,
        size.0, size.1
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, size.0, size.1);
    for (id, b) in bubbles.bubbles.iter().enumerate() {
        if b.times.len() < 2 {
            continue;
        }
        let mut pts: Vec<String> = b.times.iter().zip(&b.upper).map(|(&t, &u)| format!("{:.2},{:.2}", px(t), py(u))).collect();
        pts.extend(b.times.iter().zip(&b.lower).rev().map(|(&t, &l)| format!("{:.2},{:.2}", px(t), py(l))));
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="{}" stroke="none"/>"#,
            pts.join(" "),
            hex(bubble_color(id as u64, palette_seed))
        );
    }
    let mut paths: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for f in &trace.fronts {
        for (&id, &x) in f.ids.iter().zip(&f.positions) {
            paths.entry(id).or_default().push((f.time, x));
        }
    }
    for pts in paths.values().filter(|p| p.len() >= 2) {
        let pts: Vec<String> = pts.iter().map(|&(t, x)| format!("{:.2},{:.2}", px(t), py(x))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1"/>"#, pts.join(" "));
    }
    for e in trace.events.iter().filter(|e| e.kind == EventKind::Fragment) {
        let _ = writeln!(
            s,
            r#"<polyline points="{:.2},{:.2} {:.2},{:.2}" fill="none" stroke="{}" stroke-width="1"/>"#,
            px(e.time),
            py(e.upper),
            px(e.time),
            py(e.lower),
            hex(FRAGMENT)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_svg(svg: &str, path: &Path) -> Result<()> {
    fs::write(path, svg).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
