//! Procedural handwritten-style digits on a 28x28 canvas.
//!
//! Stand-in for MNIST when the IDX files are not on disk: each digit is a set
//! of strokes in the unit square, deformed by a random affine map and a smooth
//! warp, then rendered with an anti-aliased pen into a 20x20 box centred in
//! the canvas (the MNIST convention).

use super::IdxImages;
use crate::rng;
use std::f64::consts::PI;

pub const GLYPH_SIDE: usize = 28;

type Pt = (f64, f64);

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64) -> Vec<Pt> {
    let steps = 28;
    (0..=steps)
        .map(|k| {
            let t = (from_deg + (to_deg - from_deg) * k as f64 / steps as f64) * PI / 180.0;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

fn cat(parts: &[Vec<Pt>]) -> Vec<Pt> {
    parts.iter().flatten().copied().collect()
}

// y grows downwards; angle 270 is the top of a circle.
fn strokes(digit: u8) -> Vec<Vec<Pt>> {
    match digit {
        0 => vec![arc(0.5, 0.5, 0.26, 0.38, 0.0, 360.0)],
        1 => vec![vec![(0.36, 0.26), (0.52, 0.12), (0.5, 0.88)]],
        2 => vec![cat(&[
            arc(0.5, 0.33, 0.22, 0.21, 195.0, 385.0),
            vec![(0.26, 0.88), (0.78, 0.88)],
        ])],
        3 => vec![cat(&[
            arc(0.49, 0.3, 0.2, 0.18, 200.0, 450.0),
            arc(0.49, 0.68, 0.23, 0.2, 270.0, 520.0),
        ])],
        4 => vec![vec![(0.63, 0.88), (0.63, 0.12), (0.24, 0.62), (0.8, 0.62)]],
        5 => vec![cat(&[
            vec![(0.74, 0.12), (0.34, 0.12), (0.31, 0.47)],
            arc(0.5, 0.65, 0.22, 0.21, 220.0, 510.0),
        ])],
        6 => vec![
            vec![(0.68, 0.12), (0.44, 0.3), (0.32, 0.58)],
            arc(0.5, 0.67, 0.19, 0.2, 0.0, 360.0),
        ],
        7 => vec![vec![(0.24, 0.12), (0.77, 0.12), (0.42, 0.88)]],
        8 => vec![
            arc(0.5, 0.3, 0.17, 0.17, 0.0, 360.0),
            arc(0.5, 0.68, 0.21, 0.2, 0.0, 360.0),
        ],
        _ => vec![
            arc(0.5, 0.33, 0.2, 0.2, 0.0, 360.0),
            vec![(0.7, 0.36), (0.6, 0.88)],
        ],
    }
}

struct Pen {
    // affine: p' = m * (p - c) + c + shift
    m: [[f64; 2]; 2],
    shift: Pt,
    warp: [f64; 4],
    half_width: f64,
    ink: f64,
}

impl Pen {
    fn random(rng: &mut impl rand::Rng) -> Self {
        let angle = rng.random_range(-0.22..0.22);
        let scale_x = rng.random_range(0.78..1.08);
        let scale_y = rng.random_range(0.86..1.08);
        let shear = rng.random_range(-0.28..0.28);
        let (s, c) = f64::sin_cos(angle);
        let m = [
            [c * scale_x, -s * scale_y + shear * scale_y],
            [s * scale_x, c * scale_y],
        ];
        Pen {
            m,
            shift: (rng.random_range(-0.07..0.07), rng.random_range(-0.06..0.06)),
            warp: [
                rng.random_range(-0.045..0.045),
                rng.random_range(-0.045..0.045),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.0..2.0 * PI),
            ],
            half_width: rng.random_range(0.8..1.5),
            ink: rng.random_range(0.85..1.0),
        }
    }

    fn map(&self, (x, y): Pt) -> Pt {
        let (dx, dy) = (x - 0.5, y - 0.5);
        let mut u = self.m[0][0] * dx + self.m[0][1] * dy + 0.5 + self.shift.0;
        let mut v = self.m[1][0] * dx + self.m[1][1] * dy + 0.5 + self.shift.1;
        u += self.warp[0] * (2.0 * PI * y + self.warp[2]).sin();
        v += self.warp[1] * (2.0 * PI * x + self.warp[3]).sin();
        // unit square -> 20x20 box centred in the canvas
        (4.0 + 20.0 * u, 4.0 + 20.0 * v)
    }
}

fn segment_distance(p: Pt, a: Pt, b: Pt) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (apx - t * abx, apy - t * aby);
    (dx * dx + dy * dy).sqrt()
}

fn render(digit: u8, pen: &Pen, out: &mut [u8]) {
    let segments: Vec<(Pt, Pt)> = strokes(digit)
        .iter()
        .flat_map(|stroke| {
            let pts: Vec<Pt> = stroke.iter().map(|&p| pen.map(p)).collect();
            pts.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()
        })
        .collect();
    for r in 0..GLYPH_SIDE {
        for c in 0..GLYPH_SIDE {
            let p = (c as f64 + 0.5, r as f64 + 0.5);
            let d = segments
                .iter()
                .map(|&(a, b)| segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min);
            // one-pixel soft edge around the pen
            let v = (pen.half_width + 0.5 - d).clamp(0.0, 1.0) * pen.ink;
            out[r * GLYPH_SIDE + c] = (v * 255.0).round() as u8;
        }
    }
}

/// `count` digit images (labels cycle 0..9) as raw IDX-style bytes.
pub fn synth_glyphs(count: usize, seed: u64) -> (IdxImages, Vec<u8>) {
    let mut rng = rng::stream(seed, "glyphs");
    let k = GLYPH_SIDE * GLYPH_SIDE;
    let mut pixels = vec![0u8; count * k];
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let digit = (i % 10) as u8;
        let pen = Pen::random(&mut rng);
        render(digit, &pen, &mut pixels[i * k..(i + 1) * k]);
        labels.push(digit);
    }
    (
        IdxImages {
            count,
            rows: GLYPH_SIDE,
            cols: GLYPH_SIDE,
            pixels,
        },
        labels,
    )
}
