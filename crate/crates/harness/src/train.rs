//! Training and evaluation over recorded sets.

use std::path::{Path, PathBuf};

use pvm_core::motion::{warp_frame, warp_map};
use pvm_core::simenv::{list_sets, make_trajectories, read_dataset, record_dataset, DatasetRecord, PanoramaScene, SceneKind};
use pvm_core::{CameraIntrinsics, Hierarchy, PoseAngles, StepOutput};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainProgress};
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::{MetricsRow, MetricsWriter, TRAIN_HEADER};

pub const EPOCH_HEADER: &str = "epoch,train_mse_image,train_mse_all,test_mse_image,test_mse_all";

/// Independent stream seeds derived from the master seed.
pub mod streams {
    pub const WEIGHTS: u64 = 1;
    pub const ORDER: u64 = 2;
    pub const TRAIN_DATA: u64 = 3;
    pub const TEST_DATA: u64 = 4;
    pub const SACCADE: u64 = 5;
    pub const SCENE: u64 = 6;
    pub const TRAJECTORIES: u64 = 7;
}

/// splitmix64 of `seed` mixed with `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn load_scene(cfg: &RunConfig) -> Result<PanoramaScene> {
    match cfg.scene.parse::<SceneKind>() {
        Ok(kind) => Ok(PanoramaScene::generate(kind, cfg.scene_width, derive_seed(cfg.seed, streams::SCENE))),
        Err(_) => Ok(PanoramaScene::load(&cfg.scene)?),
    }
}

/// Records the training and test sets described by `cfg`.
pub fn generate_data(cfg: &RunConfig) -> Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    cfg.validate()?;
    let scene = load_scene(cfg)?;
    let k = cfg.intrinsics();
    let traj = make_trajectories(
        cfg.pan_profiles,
        cfg.tilt_profiles,
        derive_seed(cfg.seed, streams::TRAJECTORIES),
        &cfg.trajectory_config(),
    );
    let train = record_dataset(
        &scene,
        &traj,
        cfg.train_sets,
        cfg.frames_per_set,
        derive_seed(cfg.seed, streams::TRAIN_DATA),
        &cfg.train_dir,
        &k,
    )?;
    let test = record_dataset(
        &scene,
        &traj,
        cfg.test_sets,
        cfg.frames_per_set,
        derive_seed(cfg.seed, streams::TEST_DATA),
        &cfg.test_dir,
        &k,
    )?;
    Ok((train, test))
}

/// Set files in `dir`, each checked against the configured frame size.
pub fn find_sets(dir: &Path, k: &CameraIntrinsics) -> Result<Vec<PathBuf>> {
    let sets = list_sets(dir).map_err(|e| HarnessError::Data(e.to_string()))?;
    if sets.is_empty() {
        return Err(HarnessError::Data(format!("no .pvmd sets in {}", dir.display())));
    }
    for s in &sets {
        let r = read_dataset(s).map_err(|e| HarnessError::Data(e.to_string()))?;
        if (r.width(), r.height()) != (k.width, k.height) {
            return Err(HarnessError::Data(format!(
                "{}: frames are {}x{}, the hierarchy expects {}x{}",
                s.display(),
                r.width(),
                r.height(),
                k.width,
                k.height
            )));
        }
    }
    Ok(sets)
}

/// The hierarchy plus what it needs to follow a moving camera.
pub struct Session {
    pub h: Hierarchy,
    pub k: CameraIntrinsics,
    pub motion_integration: bool,
    pub rate: f64,
    pub pose_prev: Option<PoseAngles>,
}

impl Session {
    pub fn begin_video(&mut self) {
        self.h.reset_state();
        self.pose_prev = None;
    }

    /// One frame. With motion integration the image memories are first
    /// warped into the new view; learning then targets the new frame as seen
    /// from the old view, where the prediction was made.
    pub fn feed(&mut self, frame: &pvm_core::Frame, pose: PoseAngles, train: bool) -> Result<StepOutput> {
        let mut target = None;
        if self.motion_integration {
            if let Some(prev) = self.pose_prev {
                if prev != pose {
                    self.h.compensate(&warp_map(prev, pose, &self.k));
                    if train {
                        target = Some(warp_frame(frame, pose, prev, &self.k));
                    }
                }
            }
        }
        let out = self.h.step_with_target(frame, target.as_ref(), train, self.rate)?;
        self.pose_prev = Some(pose);
        if train && !self.h.all_params_finite() {
            return Err(HarnessError::Numeric("non-finite parameter after update".into()));
        }
        if !out.mse_all.is_finite() {
            return Err(HarnessError::Numeric("non-finite error".into()));
        }
        Ok(out)
    }
}

fn open_set(path: &Path) -> Result<impl Iterator<Item = Result<DatasetRecord>>> {
    let r = read_dataset(path).map_err(|e| HarnessError::Data(e.to_string()))?;
    Ok(r.map(|rec| rec.map_err(|e| HarnessError::Data(e.to_string()))))
}

/// Means over non-warm-up frames.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalResult {
    pub mse_image: f64,
    pub mse_all: f64,
    pub frames: u64,
}

/// Runs every set once without learning. Rows go to `log` when given.
pub fn evaluate(
    session: &mut Session,
    sets: &[PathBuf],
    epoch: u64,
    mut log: Option<&mut MetricsWriter>,
) -> Result<EvalResult> {
    let (mut si, mut sa, mut n) = (0.0, 0.0, 0u64);
    for (set, path) in sets.iter().enumerate() {
        session.begin_video();
        for (index, rec) in open_set(path)?.enumerate() {
            let rec = rec?;
            let out = session.feed(&rec.frame, rec.pose, false)?;
            let warmup = index == 0;
            if !warmup {
                si += out.mse_image;
                sa += out.mse_all;
                n += 1;
            }
            if let Some(w) = log.as_deref_mut() {
                let frame = w.rows();
                w.push(&MetricsRow {
                    frame,
                    epoch,
                    set: set as u64,
                    index: index as u64,
                    warmup,
                    mse_image: out.mse_image,
                    mse_all: out.mse_all,
                })?;
            }
        }
    }
    let d = n.max(1) as f64;
    Ok(EvalResult {
        mse_image: si / d,
        mse_all: sa / d,
        frames: n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch: u64,
    pub train: EvalResult,
    pub test: EvalResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub epochs: Vec<EpochSummary>,
    pub frames_seen: u64,
    /// The run stopped early at a frame limit.
    pub interrupted: bool,
}

pub struct Trainer {
    cfg: RunConfig,
    session: Session,
    rng: ChaCha8Rng,
    progress: TrainProgress,
    train_sets: Vec<PathBuf>,
    test_sets: Vec<PathBuf>,
    train_log: MetricsWriter,
    test_log: MetricsWriter,
    epoch_log: MetricsWriter,
}

pub const TRAIN_CSV: &str = "train.csv";
pub const TEST_CSV: &str = "test.csv";
pub const EPOCHS_CSV: &str = "epochs.csv";
pub const LATEST: &str = "latest.pvmc";

impl Trainer {
    /// Fresh run, or a resumed one when `cfg.checkpoint` is set.
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.intrinsics();
        let train_sets = find_sets(&cfg.train_dir, &k)?;
        let test_sets = find_sets(&cfg.test_dir, &k)?;
        let out = &cfg.output_dir;
        std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
        std::fs::write(out.join("config.txt"), cfg.to_text()).map_err(|e| HarnessError::io(out, e))?;

        let (h, rng, progress, logs) = match &cfg.checkpoint {
            Some(path) => {
                let ck = load_checkpoint(path, Some(cfg))?;
                log::info!("resuming from {} at frame {}", path.display(), ck.progress.frames_seen);
                let logs = (
                    MetricsWriter::resume(out.join(TRAIN_CSV), TRAIN_HEADER, ck.progress.train_rows)?,
                    MetricsWriter::resume(out.join(TEST_CSV), TRAIN_HEADER, ck.progress.test_rows)?,
                    MetricsWriter::resume(out.join(EPOCHS_CSV), EPOCH_HEADER, ck.progress.epoch)?,
                );
                (ck.hierarchy, ck.rng, ck.progress, logs)
            }
            None => {
                let h = Hierarchy::new(&cfg.hierarchy_spec(), cfg.tau, derive_seed(cfg.seed, streams::WEIGHTS))?;
                let rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, streams::ORDER));
                let logs = (
                    MetricsWriter::create(out.join(TRAIN_CSV), TRAIN_HEADER)?,
                    MetricsWriter::create(out.join(TEST_CSV), TRAIN_HEADER)?,
                    MetricsWriter::create(out.join(EPOCHS_CSV), EPOCH_HEADER)?,
                );
                (h, rng, TrainProgress::default(), logs)
            }
        };
        if progress.order.iter().any(|&o| o as usize >= train_sets.len()) {
            return Err(HarnessError::Data("checkpoint refers to training sets that are missing".into()));
        }
        let pose_prev = progress.pose_prev;
        Ok(Self {
            session: Session {
                h,
                k,
                motion_integration: cfg.motion_integration,
                rate: cfg.learning_rate,
                pose_prev,
            },
            cfg: cfg.clone(),
            rng,
            progress,
            train_sets,
            test_sets,
            train_log: logs.0,
            test_log: logs.1,
            epoch_log: logs.2,
        })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.session.h
    }

    pub fn progress(&self) -> &TrainProgress {
        &self.progress
    }

    fn checkpoint(&mut self, name: &str) -> Result<()> {
        self.train_log.flush()?;
        self.test_log.flush()?;
        self.epoch_log.flush()?;
        self.progress.train_rows = self.train_log.rows();
        self.progress.test_rows = self.test_log.rows();
        self.progress.pose_prev = self.session.pose_prev;
        let mut config = self.cfg.clone();
        config.checkpoint = None;
        let ck = Checkpoint {
            config,
            progress: self.progress.clone(),
            rng: self.rng.clone(),
            hierarchy: self.session.h.clone(),
        };
        let dir = &self.cfg.output_dir;
        save_checkpoint(&ck, dir.join(name))?;
        if name != LATEST {
            save_checkpoint(&ck, dir.join(LATEST))?;
        }
        Ok(())
    }

    /// Trains until the configured epoch count, or until `frame_limit`
    /// training frames have been seen in total (then checkpoints and stops).
    pub fn run(mut self, frame_limit: Option<u64>) -> Result<RunSummary> {
        let mut epochs = Vec::new();
        if self.cfg.epochs == 0 {
            let test = evaluate(&mut self.session, &self.test_sets, 0, Some(&mut self.test_log))?;
            self.test_log.flush()?;
            epochs.push(EpochSummary {
                epoch: 0,
                train: EvalResult::default(),
                test,
            });
            return Ok(RunSummary {
                epochs,
                frames_seen: 0,
                interrupted: false,
            });
        }
        while (self.progress.epoch as usize) < self.cfg.epochs {
            if self.progress.order.is_empty() {
                let mut order: Vec<u32> = (0..self.train_sets.len() as u32).collect();
                order.shuffle(&mut self.rng);
                self.progress.order = order;
            }
            while (self.progress.set_pos as usize) < self.progress.order.len() {
                let set = self.progress.order[self.progress.set_pos as usize] as usize;
                let skip = self.progress.frame_in_set as usize;
                if skip == 0 {
                    self.session.begin_video();
                }
                for rec in open_set(&self.train_sets[set])?.skip(skip) {
                    if frame_limit.is_some_and(|l| self.progress.frames_seen >= l) {
                        self.checkpoint(LATEST)?;
                        return Ok(RunSummary {
                            epochs,
                            frames_seen: self.progress.frames_seen,
                            interrupted: true,
                        });
                    }
                    let rec = rec?;
                    let out = self.session.feed(&rec.frame, rec.pose, true)?;
                    let warmup = self.progress.frame_in_set == 0;
                    self.train_log.push(&MetricsRow {
                        frame: self.train_log.rows(),
                        epoch: self.progress.epoch,
                        set: set as u64,
                        index: self.progress.frame_in_set,
                        warmup,
                        mse_image: out.mse_image,
                        mse_all: out.mse_all,
                    })?;
                    if !warmup {
                        self.progress.sum_image += out.mse_image;
                        self.progress.sum_all += out.mse_all;
                        self.progress.sum_count += 1;
                    }
                    self.progress.frame_in_set += 1;
                    self.progress.frames_seen += 1;
                    let every = self.cfg.checkpoint_every;
                    if every > 0 && self.progress.frames_seen.is_multiple_of(every) {
                        self.checkpoint(LATEST)?;
                    }
                }
                self.progress.set_pos += 1;
                self.progress.frame_in_set = 0;
            }

            let epoch = self.progress.epoch;
            let test = evaluate(&mut self.session, &self.test_sets, epoch, Some(&mut self.test_log))?;
            let d = self.progress.sum_count.max(1) as f64;
            let summary = EpochSummary {
                epoch,
                train: EvalResult {
                    mse_image: self.progress.sum_image / d,
                    mse_all: self.progress.sum_all / d,
                    frames: self.progress.sum_count,
                },
                test,
            };
            log::info!(
                "epoch {epoch}: train mse_image {:.6} test mse_image {:.6}",
                summary.train.mse_image,
                summary.test.mse_image
            );
            self.epoch_log.push_raw(&format!(
                "{epoch},{},{},{},{}",
                summary.train.mse_image, summary.train.mse_all, test.mse_image, test.mse_all
            ))?;
            epochs.push(summary);

            self.progress.epoch += 1;
            self.progress.set_pos = 0;
            self.progress.frame_in_set = 0;
            self.progress.order.clear();
            self.progress.sum_image = 0.0;
            self.progress.sum_all = 0.0;
            self.progress.sum_count = 0;
            self.session.pose_prev = None;
            self.checkpoint(&format!("epoch-{epoch}.pvmc"))?;
        }
        Ok(RunSummary {
            epochs,
            frames_seen: self.progress.frames_seen,
            interrupted: false,
        })
    }
}

pub fn train(cfg: &RunConfig) -> Result<RunSummary> {
    Trainer::new(cfg)?.run(None)
}

/// Evaluates the checkpoint named in `cfg` on the test sets; rows go to
/// `eval.csv` in the output directory.
pub fn eval(cfg: &RunConfig) -> Result<EvalResult> {
    cfg.validate()?;
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| HarnessError::Config("eval needs a checkpoint".into()))?;
    let ck = load_checkpoint(path, Some(cfg))?;
    let k = cfg.intrinsics();
    let sets = find_sets(&cfg.test_dir, &k)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| HarnessError::io(&cfg.output_dir, e))?;
    let mut log = MetricsWriter::create(cfg.output_dir.join("eval.csv"), TRAIN_HEADER)?;
    let mut session = Session {
        h: ck.hierarchy,
        k,
        motion_integration: cfg.motion_integration,
        rate: cfg.learning_rate,
        pose_prev: None,
    };
    let r = evaluate(&mut session, &sets, ck.progress.epoch, Some(&mut log))?;
    log.flush()?;
    Ok(r)
}
