//! Minimal line plots written as P6 images.

use pvm_core::Frame;

const MARGIN: usize = 12;

/// Draws every series on shared axes. The x axis spans the longest series;
/// the y axis spans `[0, max]` over all finite values.
pub fn line_plot(series: &[(&[f64], [f32; 3])], width: usize, height: usize) -> Frame {
    let mut img = Frame::filled(width, height, 1.0);
    let (x0, x1) = (MARGIN, width - MARGIN);
    let (y0, y1) = (MARGIN, height - MARGIN);
    let axis = [0.2, 0.2, 0.2];
    for x in x0..=x1 {
        img.set_pixel(x, y1, axis);
    }
    for y in y0..=y1 {
        img.set_pixel(x0, y, axis);
    }

    let n = series.iter().map(|(s, _)| s.len()).max().unwrap_or(0);
    let top = series
        .iter()
        .flat_map(|(s, _)| s.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    if n < 2 || top <= 0.0 {
        return img;
    }
    let to_px = |i: usize, v: f64| {
        let x = x0 as f64 + i as f64 / (n - 1) as f64 * (x1 - x0) as f64;
        let y = y1 as f64 - (v / top).clamp(0.0, 1.0) * (y1 - y0) as f64;
        (x.round() as i64, y.round() as i64)
    };
    for (s, color) in series {
        let mut last: Option<(i64, i64)> = None;
        for (i, &v) in s.iter().enumerate() {
            if !v.is_finite() {
                last = None;
                continue;
            }
            let p = to_px(i, v);
            if let Some(q) = last {
                draw_line(&mut img, q, p, *color);
            }
            last = Some(p);
        }
    }
    img
}

fn draw_line(img: &mut Frame, (mut x, mut y): (i64, i64), (x2, y2): (i64, i64), color: [f32; 3]) {
    let dx = (x2 - x).abs();
    let dy = -(y2 - y).abs();
    let (sx, sy) = (if x < x2 { 1 } else { -1 }, if y < y2 { 1 } else { -1 });
    let mut err = dx + dy;
    loop {
        if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
            img.set_pixel(x as usize, y as usize, color);
        }
        if x == x2 && y == y2 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_something() {
        let a = [1.0, 0.5, 0.25, 0.1];
        let img = line_plot(&[(&a, [1.0, 0.0, 0.0])], 100, 60);
        let red = img.data().chunks_exact(3).filter(|p| p == &[1.0, 0.0, 0.0]).count();
        assert!(red > 70);
        // highest value at the top-left corner of the plot area
        assert_eq!(img.pixel(MARGIN, MARGIN), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_series_give_axes_only() {
        let img = line_plot(&[], 50, 40);
        assert_eq!(img.pixel(MARGIN, 40 - MARGIN), [0.2, 0.2, 0.2]);
    }
}
