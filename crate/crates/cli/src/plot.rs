//! Self-contained SVG and PGM writers.

use std::io::Write;

use anyhow::Result;
use billiard_mc_core::reachability::ReachMask;
use billiard_mc_core::PhasePoint;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 48.0;

fn frame(w: &mut dyn Write, length: f64, title: &str) -> Result<()> {
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(w, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title))?;
    writeln!(w, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#)?;
    let bottom = HEIGHT - MARGIN;
    writeln!(w, r#"<text x="{MARGIN}" y="{}" text-anchor="middle">0</text>"#, bottom + 16.0)?;
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="middle">{length:.4}</text>"#, WIDTH - MARGIN, bottom + 16.0)?;
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="middle">s</text>"#, WIDTH / 2.0, bottom + 32.0)?;
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="end">0</text>"#, MARGIN - 6.0, bottom + 4.0)?;
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="end">π</text>"#, MARGIN - 6.0, MARGIN + 4.0)?;
    writeln!(w, r#"<text x="16" y="{}" text-anchor="middle">θ</text>"#, HEIGHT / 2.0)?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn to_px(length: f64, s: f64, theta: f64) -> (f64, f64) {
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    (MARGIN + s / length * pw, HEIGHT - MARGIN - theta / std::f64::consts::PI * ph)
}

/// Scatter of phase points, one colour per chain.
pub fn phase_portrait(w: &mut dyn Write, length: f64, title: &str, chains: &[Vec<PhasePoint>]) -> Result<()> {
    frame(w, length, title)?;
    for (c, pts) in chains.iter().enumerate() {
        // Golden-angle hue spacing keeps neighbouring chains distinguishable.
        let hue = (c as f64 * 137.507_764) % 360.0;
        writeln!(w, r#"<g fill="hsl({hue:.1},70%,40%)">"#)?;
        for p in pts {
            let (x, y) = to_px(length, p.s, p.theta);
            writeln!(w, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1"/>"#)?;
        }
        writeln!(w, "</g>")?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}

/// Marked cells in black, `θ` increasing upwards.
pub fn mask_svg(w: &mut dyn Write, mask: &ReachMask, title: &str) -> Result<()> {
    let g = mask.grid;
    frame(w, g.length, title)?;
    let cw = (WIDTH - 2.0 * MARGIN) / g.n_s as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / g.n_theta as f64;
    writeln!(w, r#"<g fill="black">"#)?;
    for i in 0..g.n_s {
        for j in 0..g.n_theta {
            if mask.get(i, j) {
                let x = MARGIN + i as f64 * cw;
                let y = HEIGHT - MARGIN - (j + 1) as f64 * ch;
                writeln!(w, r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}"/>"#)?;
            }
        }
    }
    writeln!(w, "</g>\n</svg>")?;
    Ok(())
}

/// Binary PGM, one pixel per cell, marked cells black, top row `θ ≈ π`.
pub fn mask_pgm(w: &mut dyn Write, mask: &ReachMask) -> Result<()> {
    let g = mask.grid;
    write!(w, "P5\n{} {}\n255\n", g.n_s, g.n_theta)?;
    let mut row = vec![0u8; g.n_s];
    for j in (0..g.n_theta).rev() {
        for (i, px) in row.iter_mut().enumerate() {
            *px = if mask.get(i, j) { 0 } else { 255 };
        }
        w.write_all(&row)?;
    }
    Ok(())
}
