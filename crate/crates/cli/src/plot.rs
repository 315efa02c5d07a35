//! Minimal grayscale line-plot rasterizer for the `theory` figures.

use std::path::Path;

use ndarray::Array2;
use tmholo::io::{write_png, BitDepth};

const MARGIN: usize = 24;

/// How a series is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    /// Connected polyline at the given gray level.
    Line(f64),
    /// Square markers of half-width 2 at the given gray level.
    Markers(f64),
}

#[derive(Debug, Clone)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

/// A plot over fixed axis ranges, drawn black-on-white.
#[derive(Debug, Clone)]
pub struct Plot {
    pub width: usize,
    pub height: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Plot {
            width: 480,
            height: 320,
            x_range,
            y_range,
            series: Vec::new(),
        }
    }

    pub fn line(mut self, points: Vec<(f64, f64)>, gray: f64) -> Self {
        self.series.push(Series {
            points,
            style: Style::Line(gray),
        });
        self
    }

    pub fn markers(mut self, points: Vec<(f64, f64)>, gray: f64) -> Self {
        self.series.push(Series {
            points,
            style: Style::Markers(gray),
        });
        self
    }

    /// Pixel position of a data point; `None` outside the axes.
    fn to_pixel(&self, (x, y): (f64, f64)) -> Option<(f64, f64)> {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let u = (x - x0) / (x1 - x0);
        let v = (y - y0) / (y1 - y0);
        if !(u.is_finite() && v.is_finite()) {
            return None;
        }
        let w = (self.width - 2 * MARGIN - 1) as f64;
        let h = (self.height - 2 * MARGIN - 1) as f64;
        Some((MARGIN as f64 + u * w, (self.height - MARGIN - 1) as f64 - v * h))
    }

    pub fn render(&self) -> Array2<f64> {
        let mut canvas = Array2::from_elem((self.height, self.width), 1.0);
        let (l, r) = (MARGIN, self.width - MARGIN - 1);
        let (t, b) = (MARGIN, self.height - MARGIN - 1);
        for c in l..=r {
            canvas[[t, c]] = 0.0;
            canvas[[b, c]] = 0.0;
        }
        for row in t..=b {
            canvas[[row, l]] = 0.0;
            canvas[[row, r]] = 0.0;
        }
        let clip = (t, b, l, r);
        for s in &self.series {
            let pixels: Vec<Option<(f64, f64)>> = s.points.iter().map(|&p| self.to_pixel(p)).collect();
            match s.style {
                Style::Line(gray) => {
                    for pair in pixels.windows(2) {
                        if let [Some(p), Some(q)] = pair {
                            draw_segment(&mut canvas, *p, *q, gray, clip);
                        }
                    }
                }
                Style::Markers(gray) => {
                    for p in pixels.iter().flatten() {
                        let (x, y) = (p.0.round() as i64, p.1.round() as i64);
                        for dy in -2..=2 {
                            for dx in -2..=2 {
                                put(&mut canvas, y + dy, x + dx, gray, clip);
                            }
                        }
                    }
                }
            }
        }
        canvas
    }

    pub fn write(&self, path: &Path) -> tmholo::Result<()> {
        write_png(path, &self.render(), BitDepth::Eight)
    }
}

fn put(canvas: &mut Array2<f64>, row: i64, col: i64, gray: f64, clip: (usize, usize, usize, usize)) {
    let (t, b, l, r) = clip;
    if row >= t as i64 && row <= b as i64 && col >= l as i64 && col <= r as i64 {
        canvas[[row as usize, col as usize]] = gray;
    }
}

fn draw_segment(canvas: &mut Array2<f64>, a: (f64, f64), b: (f64, f64), gray: f64, clip: (usize, usize, usize, usize)) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let f = i as f64 / steps as f64;
        let x = a.0 + f * (b.0 - a.0);
        let y = a.1 + f * (b.1 - a.1);
        put(canvas, y.round() as i64, x.round() as i64, gray, clip);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_line_hits_corners() {
        let p = Plot::new((0.0, 1.0), (0.0, 1.0)).line(vec![(0.0, 0.0), (1.0, 1.0)], 0.5);
        let img = p.render();
        assert_eq!(img[[p.height - MARGIN - 1, MARGIN]], 0.5);
        assert_eq!(img[[MARGIN, p.width - MARGIN - 1]], 0.5);
        assert_eq!(img[[p.height / 2, 2]], 1.0);
    }

    #[test]
    fn out_of_range_points_are_clipped() {
        let p = Plot::new((0.0, 1.0), (0.0, 1.0)).markers(vec![(5.0, 5.0), (f64::NAN, 0.0)], 0.0);
        let img = p.render();
        let dark = img.iter().filter(|&&v| v == 0.0).count();
        let frame = 2 * (p.width - 2 * MARGIN) + 2 * (p.height - 2 * MARGIN) - 4;
        assert_eq!(dark, frame);
    }
}
