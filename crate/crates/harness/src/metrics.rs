//! Per-frame metrics as comma-separated text with a header row.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};

pub const TRAIN_HEADER: &str = "frame,epoch,set,index,warmup,mse_image,mse_all";
pub const DEMO_HEADER: &str = "step,mse_image,mse_all,gaze_x,gaze_y,eq_x,eq_y,pan,tilt,triggered,switch";

/// One processed frame during training or evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub frame: u64,
    pub epoch: u64,
    pub set: u64,
    /// Position of the frame in its set.
    pub index: u64,
    /// First frame of a set: the prediction came from reset state.
    pub warmup: bool,
    pub mse_image: f64,
    pub mse_all: f64,
}

impl MetricsRow {
    fn line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.frame, self.epoch, self.set, self.index, self.warmup as u8, self.mse_image, self.mse_all
        )
    }
}

/// One closed-loop demo step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoRow {
    pub step: u64,
    pub mse_image: f64,
    pub mse_all: f64,
    pub gaze: [f64; 2],
    pub equilibrium: [f64; 2],
    pub pan: f64,
    pub tilt: f64,
    pub triggered: bool,
    pub switch: bool,
}

impl DemoRow {
    fn line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.mse_image,
            self.mse_all,
            self.gaze[0],
            self.gaze[1],
            self.equilibrium[0],
            self.equilibrium[1],
            self.pan,
            self.tilt,
            self.triggered as u8,
            self.switch as u8
        )
    }
}

/// Append-only CSV writer.
pub struct MetricsWriter {
    out: BufWriter<File>,
    path: PathBuf,
    rows: u64,
}

impl MetricsWriter {
    /// Starts a new file with `header`.
    pub fn create(path: impl AsRef<Path>, header: &str) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path,
            rows: 0,
        };
        w.write_line(header)?;
        Ok(w)
    }

    /// Continues an existing file after `rows` data rows, dropping anything
    /// written past them (a run interrupted after its last checkpoint).
    pub fn resume(path: impl AsRef<Path>, header: &str, rows: u64) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let keep = {
            let file = File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
            let mut len = 0u64;
            let mut lines = BufReader::new(file).lines();
            let first = lines.next().transpose().map_err(|e| HarnessError::io(&path, e))?;
            if first.as_deref() != Some(header) {
                return Err(HarnessError::Data(format!("{}: unexpected metrics header", path.display())));
            }
            len += header.len() as u64 + 1;
            for n in 0..rows {
                let l = lines
                    .next()
                    .transpose()
                    .map_err(|e| HarnessError::io(&path, e))?
                    .ok_or_else(|| HarnessError::Data(format!("{}: only {n} of {rows} rows present", path.display())))?;
                len += l.len() as u64 + 1;
            }
            len
        };
        let file = OpenOptions::new().write(true).open(&path).map_err(|e| HarnessError::io(&path, e))?;
        file.set_len(keep).map_err(|e| HarnessError::io(&path, e))?;
        let mut file = file;
        use std::io::Seek;
        file.seek(std::io::SeekFrom::End(0)).map_err(|e| HarnessError::io(&path, e))?;
        Ok(Self {
            out: BufWriter::new(file),
            path,
            rows,
        })
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}").map_err(|e| HarnessError::io(&self.path, e))
    }

    pub fn push(&mut self, row: &MetricsRow) -> Result<()> {
        self.write_line(&row.line())?;
        self.rows += 1;
        Ok(())
    }

    pub fn push_demo(&mut self, row: &DemoRow) -> Result<()> {
        self.write_line(&row.line())?;
        self.rows += 1;
        Ok(())
    }

    /// Appends a preformatted row.
    pub fn push_raw(&mut self, line: &str) -> Result<()> {
        self.write_line(line)?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| HarnessError::io(&self.path, e))
    }
}

/// Reads the named numeric columns of a metrics file.
pub fn read_columns(path: impl AsRef<Path>, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| HarnessError::Data(format!("{}: no column {n:?}", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        for (c, &i) in idx.iter().enumerate() {
            let v = fields
                .get(i)
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| HarnessError::Data(format!("{}: bad value on row {}", path.display(), n + 1)))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

/// Centred moving average over `window` samples with zero padding at both
/// ends. The window around sample `i` covers
/// `[i − (window − 1 − window/2), i + window/2]`, so the edges are pulled
/// toward zero.
pub fn smooth_curve(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let n = values.len();
    let back = window - 1 - window / 2;
    let ahead = window / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in values {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + ahead + 1).min(n);
            (prefix[hi] - prefix[lo]) / window as f64
        })
        .collect()
}

/// Value of a smoothed curve at the centre of each block of `window`
/// samples. With the padding above this is the plain block mean for every
/// complete block.
pub fn block_centres(smoothed: &[f64], window: usize) -> Vec<f64> {
    let offset = window - 1 - window / 2;
    smoothed.chunks(window).enumerate().filter_map(|(b, _)| smoothed.get(b * window + offset).copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(values: &[f64], w: usize) -> Vec<f64> {
        let back = (w - 1 - w / 2) as i64;
        let ahead = (w / 2) as i64;
        (0..values.len() as i64)
            .map(|i| {
                (i - back..=i + ahead)
                    .map(|j| if j < 0 || j >= values.len() as i64 { 0.0 } else { values[j as usize] })
                    .sum::<f64>()
                    / w as f64
            })
            .collect()
    }

    #[test]
    fn window_one_is_identity() {
        let v = vec![0.3, 1.5, -2.0, 7.0];
        assert_eq!(smooth_curve(&v, 1), v);
    }

    #[test]
    fn constant_series_edges() {
        let c = 0.8;
        for w in [4usize, 5, 10] {
            let s = smooth_curve(&vec![c; 40], w);
            assert!((s[20] - c).abs() < 1e-12);
            let first = c * (w / 2 + 1) as f64 / w as f64;
            assert!((s[0] - first).abs() < 1e-12, "w={w}");
        }
    }

    #[test]
    fn ramp_matches_brute_force() {
        let v: Vec<f64> = (0..57).map(|i| i as f64 * 0.25).collect();
        for w in 1..12 {
            let a = smooth_curve(&v, w);
            let b = brute(&v, w);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn block_centres_are_block_means() {
        let v: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64).collect();
        for w in [5usize, 6, 10] {
            let c = block_centres(&smooth_curve(&v, w), w);
            for (b, chunk) in v.chunks(w).enumerate() {
                let mean = chunk.iter().sum::<f64>() / w as f64;
                assert!((c[b] - mean).abs() < 1e-9, "w={w} block {b}");
            }
        }
    }

    #[test]
    fn writer_round_trip_and_resume() {
        let dir = std::env::temp_dir().join(format!("pvm-metrics-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("m.csv");
        let row = |f| MetricsRow {
            frame: f,
            epoch: 0,
            set: 1,
            index: f,
            warmup: f == 0,
            mse_image: f as f64 * 0.5,
            mse_all: 0.25,
        };
        let mut w = MetricsWriter::create(&p, TRAIN_HEADER).unwrap();
        for f in 0..5 {
            w.push(&row(f)).unwrap();
        }
        w.flush().unwrap();
        drop(w);
        let mut w = MetricsWriter::resume(&p, TRAIN_HEADER, 3).unwrap();
        w.push(&row(3)).unwrap();
        w.flush().unwrap();
        let cols = read_columns(&p, &["frame", "mse_image"]).unwrap();
        assert_eq!(cols[0], vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(cols[1][3], 1.5);
    }
}
