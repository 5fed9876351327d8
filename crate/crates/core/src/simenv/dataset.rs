//! Recorded frame sets.
//!
//! One file per set. Little-endian layout:
//!
//! ```text
//! header  "PVMD"  version:u16  width:u16  height:u16  count:u64
//! record  index:u64  pan:f64  tilt:f64  rgb:[u8; width*height*3]  crc32:u32
//! ```
//!
//! The CRC covers the record bytes before it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scene::{render, PanoramaScene};
use super::trajectory::Trajectory;
use crate::error::{PvmError, Result};
use crate::frame::Frame;
use crate::motion::{CameraIntrinsics, PoseAngles};

pub const MAGIC: &[u8; 4] = b"PVMD";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 2 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub index: u64,
    pub pose: PoseAngles,
    pub frame: Frame,
}

pub struct DatasetWriter {
    out: BufWriter<File>,
    path: PathBuf,
    width: usize,
    height: usize,
    count: u64,
}

impl DatasetWriter {
    pub fn create(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        assert!(width <= u16::MAX as usize && height <= u16::MAX as usize);
        let file = File::create(&path).map_err(|e| PvmError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&VERSION.to_le_bytes());
        header.extend_from_slice(&(width as u16).to_le_bytes());
        header.extend_from_slice(&(height as u16).to_le_bytes());
        header.extend_from_slice(&0u64.to_le_bytes());
        out.write_all(&header).map_err(|e| PvmError::io(&path, e))?;
        Ok(Self {
            out,
            path,
            width,
            height,
            count: 0,
        })
    }

    /// Appends a frame; it is stored quantized to 8 bits.
    pub fn push(&mut self, pose: PoseAngles, frame: &Frame) -> Result<()> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(PvmError::FrameSize {
                got_w: frame.width(),
                got_h: frame.height(),
                want_w: self.width,
                want_h: self.height,
            });
        }
        let mut rec = Vec::with_capacity(24 + frame.data().len() + 4);
        rec.extend_from_slice(&self.count.to_le_bytes());
        rec.extend_from_slice(&pose.pan.to_le_bytes());
        rec.extend_from_slice(&pose.tilt.to_le_bytes());
        rec.extend_from_slice(&frame.to_bytes());
        let crc = crc32fast::hash(&rec);
        rec.extend_from_slice(&crc.to_le_bytes());
        self.out.write_all(&rec).map_err(|e| PvmError::io(&self.path, e))?;
        self.count += 1;
        Ok(())
    }

    /// Patches the record count into the header and flushes.
    pub fn finish(mut self) -> Result<u64> {
        let path = self.path.clone();
        self.out.flush().map_err(|e| PvmError::io(&path, e))?;
        let file = self.out.get_mut();
        file.seek(SeekFrom::Start(10)).map_err(|e| PvmError::io(&path, e))?;
        file.write_all(&self.count.to_le_bytes()).map_err(|e| PvmError::io(&path, e))?;
        file.sync_all().map_err(|e| PvmError::io(&path, e))?;
        Ok(self.count)
    }
}

/// Streaming reader; every record is checked as it is read.
pub struct DatasetReader {
    input: BufReader<File>,
    path: PathBuf,
    width: usize,
    height: usize,
    count: u64,
    next: u64,
    failed: bool,
}

impl DatasetReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| PvmError::io(&path, e))?;
        let mut input = BufReader::new(file);
        let mut header = [0u8; HEADER_LEN];
        let got = read_full(&mut input, &mut header).map_err(|e| PvmError::io(&path, e))?;
        if got < 4 || &header[..4] != MAGIC {
            return Err(PvmError::BadMagic { path });
        }
        if got < 6 {
            return Err(PvmError::Truncated { path, index: 0 });
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != VERSION {
            return Err(PvmError::VersionMismatch {
                path,
                found: version,
                expected: VERSION,
            });
        }
        if got < HEADER_LEN {
            return Err(PvmError::Truncated { path, index: 0 });
        }
        let width = u16::from_le_bytes([header[6], header[7]]) as usize;
        let height = u16::from_le_bytes([header[8], header[9]]) as usize;
        let count = u64::from_le_bytes(header[10..18].try_into().unwrap());
        Ok(Self {
            input,
            path,
            width,
            height,
            count,
            next: 0,
            failed: false,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn read_record(&mut self) -> Result<DatasetRecord> {
        let index = self.next;
        let body = 24 + self.width * self.height * 3;
        let mut buf = vec![0u8; body + 4];
        let got = read_full(&mut self.input, &mut buf).map_err(|e| PvmError::io(&self.path, e))?;
        if got < buf.len() {
            return Err(PvmError::Truncated {
                path: self.path.clone(),
                index,
            });
        }
        let stored = u32::from_le_bytes(buf[body..].try_into().unwrap());
        if crc32fast::hash(&buf[..body]) != stored {
            return Err(PvmError::Checksum {
                path: self.path.clone(),
                index,
            });
        }
        let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        Ok(DatasetRecord {
            index: u64::from_le_bytes(buf[..8].try_into().unwrap()),
            pose: PoseAngles::new(f64_at(8), f64_at(16)),
            frame: Frame::from_bytes(self.width, self.height, &buf[24..body]),
        })
    }
}

impl Iterator for DatasetReader {
    type Item = Result<DatasetRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next >= self.count {
            return None;
        }
        let rec = self.read_record();
        if rec.is_err() {
            self.failed = true;
        }
        self.next += 1;
        Some(rec)
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<DatasetReader> {
    DatasetReader::open(path)
}

/// Every set file in `dir`, sorted by name.
pub fn list_sets(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| PvmError::io(dir, e))? {
        let p = entry.map_err(|e| PvmError::io(dir, e))?.path();
        if p.extension().is_some_and(|e| e == "pvmd") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Renders `sets` sets of `frames_per_set` frames into `dir`, one file each.
/// Set `s` follows a trajectory drawn by `seed`, starting at a random step.
pub fn record_dataset(
    scene: &PanoramaScene,
    trajectories: &[Trajectory],
    sets: usize,
    frames_per_set: usize,
    seed: u64,
    dir: impl AsRef<Path>,
    k: &CameraIntrinsics,
) -> Result<Vec<PathBuf>> {
    assert!(!trajectories.is_empty(), "no trajectories");
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| PvmError::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = Vec::with_capacity(sets);
    for s in 0..sets {
        let traj = &trajectories[rng.random_range(0..trajectories.len())];
        let start: u64 = rng.random_range(0..10_000);
        let path = dir.join(format!("set_{s:04}.pvmd"));
        let mut w = DatasetWriter::create(&path, k.width, k.height)?;
        for i in 0..frames_per_set as u64 {
            let pose = scene.limits.clamp(traj.pose(start + i));
            w.push(pose, &render(scene, pose, k))?;
        }
        w.finish()?;
        log::debug!("wrote {} (trajectory {})", path.display(), traj.id);
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simenv::{make_trajectories, SceneKind, TrajectoryConfig};

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("pvm-ds-{}-{name}", std::process::id()));
        let _ = std::fs::remove_dir_all(&d);
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    fn one_set(dir: &Path) -> PathBuf {
        let scene = PanoramaScene::generate(SceneKind::Blobs, 256, 1);
        let traj = make_trajectories(2, 2, 1, &TrajectoryConfig::default());
        let k = CameraIntrinsics::from_horizontal_fov(16, 12, 75.0);
        record_dataset(&scene, &traj, 1, 5, 9, dir, &k).unwrap().remove(0)
    }

    #[test]
    fn round_trip_matches_quantized_render() {
        let dir = tmp("rt");
        let p = one_set(&dir);
        let recs: Vec<_> = read_dataset(&p).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(recs.len(), 5);
        let scene = PanoramaScene::generate(SceneKind::Blobs, 256, 1);
        let k = CameraIntrinsics::from_horizontal_fov(16, 12, 75.0);
        for (i, r) in recs.iter().enumerate() {
            assert_eq!(r.index, i as u64);
            assert_eq!(r.frame, render(&scene, r.pose, &k).quantized());
        }
    }

    #[test]
    fn distinct_errors() {
        let dir = tmp("err");
        let p = one_set(&dir);
        let bytes = std::fs::read(&p).unwrap();

        let bad = dir.join("magic.pvmd");
        let mut b = bytes.clone();
        b[0] = b'X';
        std::fs::write(&bad, &b).unwrap();
        assert!(matches!(read_dataset(&bad), Err(PvmError::BadMagic { .. })));

        let mut b = bytes.clone();
        b[4] = 9;
        std::fs::write(&bad, &b).unwrap();
        assert!(matches!(
            read_dataset(&bad),
            Err(PvmError::VersionMismatch { found: 9, .. })
        ));

        let rec = 24 + 16 * 12 * 3 + 4;
        let mut b = bytes.clone();
        b[HEADER_LEN + 2 * rec + 30] ^= 1;
        std::fs::write(&bad, &b).unwrap();
        let res: Vec<_> = read_dataset(&bad).unwrap().collect();
        assert_eq!(res.len(), 3);
        assert!(matches!(res[2], Err(PvmError::Checksum { index: 2, .. })));

        std::fs::write(&bad, &bytes[..HEADER_LEN + 3 * rec + 10]).unwrap();
        let res: Vec<_> = read_dataset(&bad).unwrap().collect();
        assert!(matches!(res[3], Err(PvmError::Truncated { index: 3, .. })));
    }

    #[test]
    fn sets_are_listed_in_order() {
        let dir = tmp("list");
        let scene = PanoramaScene::generate(SceneKind::Gradient, 128, 0);
        let traj = make_trajectories(1, 1, 0, &TrajectoryConfig::default());
        let k = CameraIntrinsics::from_horizontal_fov(8, 6, 75.0);
        let written = record_dataset(&scene, &traj, 3, 2, 0, &dir, &k).unwrap();
        assert_eq!(list_sets(&dir).unwrap(), written);
    }
}
