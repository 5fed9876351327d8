//! Versioned, checksummed snapshots of a training run.
//!
//! Layout, little-endian, followed by a CRC-32 of everything before it:
//!
//! ```text
//! "PVMC" version:u16
//! config:str  spec:str
//! progress: epoch set_pos frame_in_set frames_seen train_rows test_rows :u64
//!           sum_image sum_all :f64  sum_count:u64
//!           order:[u32]  pose_prev: flag:u8 pan:f64 tilt:f64
//! rng: seed:[u8;32] stream:u64 word_pos:u128
//! units:u32, then per unit: params:[f32] signal_prev integral pending hidden:[f32]
//!                           last_input: flag:u8 [f32]
//! prev_hidden:[f32]
//! ```
//!
//! `str` and `[T]` are a u32 length followed by the items. Parameters and
//! recurrent state are stored at 32-bit precision.

use std::path::Path;

use pvm_core::{Hierarchy, PoseAngles};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"PVMC";
pub const VERSION: u16 = 1;

/// Where a training run stands.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainProgress {
    pub epoch: u64,
    /// Position in `order` of the set being trained.
    pub set_pos: u64,
    pub frame_in_set: u64,
    pub frames_seen: u64,
    pub train_rows: u64,
    pub test_rows: u64,
    /// Running sums for the epoch summary (non-warm-up frames).
    pub sum_image: f64,
    pub sum_all: f64,
    pub sum_count: u64,
    /// Training set order for the current epoch; empty between epochs.
    pub order: Vec<u32>,
    pub pose_prev: Option<PoseAngles>,
}

pub struct Checkpoint {
    pub config: RunConfig,
    pub progress: TrainProgress,
    pub rng: ChaCha8Rng,
    pub hierarchy: Hierarchy,
}

/// Canonical description of the hierarchy shape, compared on load.
pub fn spec_text(cfg: &RunConfig) -> String {
    format!("{:?}", cfg.hierarchy_spec())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn f32s<'a>(&mut self, len: usize, vals: impl Iterator<Item = &'a f64>) {
        self.u32(len as u32);
        for &v in vals {
            self.0.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(HarnessError::CheckpointFormat {
                path: self.path.to_path_buf(),
                reason: "unexpected end of data".into(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| self.malformed("string is not UTF-8"))
    }
    fn f32s(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        let raw = self.take(n * 4)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
    }
    /// Reads a vector that must have exactly `want` items.
    fn f32s_exact(&mut self, want: usize, what: &str) -> Result<Vec<f64>> {
        let v = self.f32s()?;
        if v.len() != want {
            return Err(self.malformed(&format!("{what}: {} values, expected {want}", v.len())));
        }
        Ok(v)
    }
    fn malformed(&self, reason: &str) -> HarnessError {
        HarnessError::CheckpointFormat {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u16(VERSION);
    w.str(&ck.config.to_text());
    w.str(&spec_text(&ck.config));

    let p = &ck.progress;
    for v in [p.epoch, p.set_pos, p.frame_in_set, p.frames_seen, p.train_rows, p.test_rows] {
        w.u64(v);
    }
    w.f64(p.sum_image);
    w.f64(p.sum_all);
    w.u64(p.sum_count);
    w.u32(p.order.len() as u32);
    for &o in &p.order {
        w.u32(o);
    }
    match p.pose_prev {
        Some(pose) => {
            w.u8(1);
            w.f64(pose.pan);
            w.f64(pose.tilt);
        }
        None => {
            w.u8(0);
            w.f64(0.0);
            w.f64(0.0);
        }
    }

    w.0.extend_from_slice(&ck.rng.get_seed());
    w.u64(ck.rng.get_stream());
    w.0.extend_from_slice(&ck.rng.get_word_pos().to_le_bytes());

    let units = ck.hierarchy.units();
    w.u32(units.len() as u32);
    for u in units {
        w.f32s(u.mlp.param_count(), u.mlp.params());
        for v in [&u.signal_prev, &u.integral, &u.prediction_pending, &u.hidden] {
            w.f32s(v.len(), v.iter());
        }
        match &u.last_input {
            Some(x) => {
                w.u8(1);
                w.f32s(x.len(), x.iter());
            }
            None => {
                w.u8(0);
                w.u32(0);
            }
        }
    }
    let ph = ck.hierarchy.prev_hidden();
    w.f32s(ph.len(), ph.iter());

    let crc = crc32fast::hash(&w.0);
    w.0.extend_from_slice(&crc.to_le_bytes());
    w.0
}

/// Parses a checkpoint. With `expected` set, the stored hierarchy shape must
/// match it.
pub fn decode(bytes: &[u8], path: &Path, expected: Option<&RunConfig>) -> Result<Checkpoint> {
    let p = path.to_path_buf();
    if bytes.len() < 6 || &bytes[..4] != MAGIC {
        return Err(HarnessError::CheckpointMagic { path: p });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(HarnessError::CheckpointVersion {
            path: p,
            found: version,
            expected: VERSION,
        });
    }
    if bytes.len() < 10 {
        return Err(HarnessError::CheckpointChecksum { path: p });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(HarnessError::CheckpointChecksum { path: p });
    }

    let mut r = Reader { buf: body, pos: 6, path };
    let mut config = RunConfig::default();
    config.apply_text(&r.str()?)?;
    let spec = r.str()?;
    if let Some(want) = expected {
        let want = spec_text(want);
        if want != spec {
            return Err(HarnessError::SpecMismatch {
                path: p,
                found: spec,
                expected: want,
            });
        }
    }
    if spec != spec_text(&config) {
        return Err(r.malformed("hierarchy description disagrees with the stored config"));
    }

    let mut progress = TrainProgress {
        epoch: r.u64()?,
        set_pos: r.u64()?,
        frame_in_set: r.u64()?,
        frames_seen: r.u64()?,
        train_rows: r.u64()?,
        test_rows: r.u64()?,
        sum_image: r.f64()?,
        sum_all: r.f64()?,
        sum_count: r.u64()?,
        ..TrainProgress::default()
    };
    let n = r.u32()? as usize;
    progress.order = (0..n).map(|_| r.u32()).collect::<Result<_>>()?;
    let has_pose = r.u8()? == 1;
    let pose = PoseAngles::new(r.f64()?, r.f64()?);
    progress.pose_prev = has_pose.then_some(pose);

    let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
    let stream = r.u64()?;
    let word_pos = u128::from_le_bytes(r.take(16)?.try_into().unwrap());
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);

    let mut hierarchy = Hierarchy::new(&config.hierarchy_spec(), config.tau, 0)?;
    let count = r.u32()? as usize;
    if count != hierarchy.units().len() {
        return Err(r.malformed(&format!("{count} units, expected {}", hierarchy.units().len())));
    }
    for u in hierarchy.units_mut() {
        let params = r.f32s_exact(u.mlp.param_count(), "parameters")?;
        for (dst, src) in u.mlp.params_mut().zip(params) {
            *dst = src;
        }
        let n = u.signal_dim();
        u.signal_prev = r.f32s_exact(n, "previous signal")?;
        u.integral = r.f32s_exact(n, "integral")?;
        u.prediction_pending = r.f32s_exact(n, "pending prediction")?;
        u.hidden = r.f32s_exact(u.hidden_size(), "hidden state")?;
        let has_input = r.u8()? == 1;
        let x = r.f32s()?;
        u.last_input = if has_input {
            if x.len() != u.mlp.input_size() {
                return Err(r.malformed("cached input has the wrong size"));
            }
            Some(x)
        } else {
            None
        };
    }
    let ph_len = hierarchy.prev_hidden().len();
    let ph = r.f32s_exact(ph_len, "hidden buffer")?;
    hierarchy.prev_hidden_mut().copy_from_slice(&ph);
    if r.pos != body.len() {
        return Err(r.malformed("trailing bytes"));
    }
    Ok(Checkpoint {
        config,
        progress,
        rng,
        hierarchy,
    })
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    // write then rename so a crash never leaves a half-written checkpoint
    let tmp = path.with_extension("pvmc.tmp");
    std::fs::write(&tmp, encode(ck)).map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&RunConfig>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode(&bytes, path, expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pvm_core::Frame;
    use rand::{RngCore, SeedableRng};

    fn small_cfg() -> RunConfig {
        let mut c = RunConfig::default();
        c.set("levels", "4x3,2x1,1x1").unwrap();
        c.set("saccade_window", "4x4").unwrap();
        c
    }

    fn sample() -> Checkpoint {
        let cfg = small_cfg();
        let mut h = Hierarchy::new(&cfg.hierarchy_spec(), cfg.tau, 3).unwrap();
        let f = Frame::from_fn(8, 6, |x, y| [x as f32 / 8.0, y as f32 / 6.0, 0.5]);
        h.step(&f, true, 0.01).unwrap();
        h.step(&f, true, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        rng.next_u64();
        Checkpoint {
            config: cfg,
            progress: TrainProgress {
                epoch: 1,
                set_pos: 2,
                frame_in_set: 17,
                order: vec![3, 0, 2, 1],
                pose_prev: Some(PoseAngles::new(0.1, -0.2)),
                ..TrainProgress::default()
            },
            rng,
            hierarchy: h,
        }
    }

    #[test]
    fn save_load_save_is_identical() {
        let a = encode(&sample());
        let ck = decode(&a, Path::new("mem"), None).unwrap();
        assert_eq!(encode(&ck), a);
        assert_eq!(ck.progress.order, vec![3, 0, 2, 1]);
    }

    #[test]
    fn rng_state_survives() {
        let mut s = sample();
        let bytes = encode(&s);
        let mut ck = decode(&bytes, Path::new("mem"), None).unwrap();
        assert_eq!(s.rng.next_u64(), ck.rng.next_u64());
    }

    #[test]
    fn distinct_failures() {
        let good = encode(&sample());
        let p = Path::new("mem");

        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(decode(&b, p, None), Err(HarnessError::CheckpointMagic { .. })));

        let mut b = good.clone();
        b[4] = 7;
        assert!(matches!(decode(&b, p, None), Err(HarnessError::CheckpointVersion { found: 7, .. })));

        let mut b = good.clone();
        let mid = b.len() / 2;
        b[mid] ^= 0x40;
        assert!(matches!(decode(&b, p, None), Err(HarnessError::CheckpointChecksum { .. })));

        let mut other = small_cfg();
        other.set("hidden_size", "4").unwrap();
        assert!(matches!(decode(&good, p, Some(&other)), Err(HarnessError::SpecMismatch { .. })));
        assert!(decode(&good, p, Some(&small_cfg())).is_ok());
    }
}
