//! The runtime unit pyramid.
//!
//! One call to [`Hierarchy::step`] consumes one frame:
//!
//! 1. each level-0 unit takes its pixel tile as signal; each higher unit takes
//!    the concatenated hidden states its children produced this step;
//! 2. the pending prediction of every unit is scored against that signal;
//! 3. optionally the unit trains its own perceptron toward the signal;
//! 4. the unit runs forward with context read from the previous step's hidden
//!    buffer.
//!
//! Because context only ever reads the previous-step buffer, units on the same
//! level are independent and the sweep runs level by level in parallel.

mod topology;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{PvmError, Result};
use crate::frame::Frame;
use crate::motion::WarpMap;
use crate::unit::{UnitState, UnitStepInput};

pub use topology::{cover_map, FoveaSpec, HierarchySpec, PixelRect, SignalSource, Topology, UnitNode};

/// Per-unit and per-pixel squared prediction error for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    pub width: usize,
    pub height: usize,
    /// Level-0 error per pixel: mean over the three channels of the squared
    /// difference between pending prediction and actual value.
    pub pixels: Vec<f64>,
    /// Summed squared error of every unit, grouped by level in unit order.
    pub levels: Vec<Vec<f64>>,
}

impl ErrorMap {
    pub fn pixel(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn pixel_total(&self) -> f64 {
        self.pixels.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Assembled level-0 prediction of the next frame.
    pub prediction: Frame,
    pub errors: ErrorMap,
    /// Mean squared error of the image prediction, per channel value.
    pub mse_image: f64,
    /// Mean squared error over every signal element of every unit.
    pub mse_all: f64,
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    topo: Topology,
    units: Vec<UnitState>,
    /// Hidden states of the previous step, flattened; unit `i` occupies
    /// `i * hidden_size..(i + 1) * hidden_size`.
    prev_hidden: Vec<f64>,
    /// For each pixel, the owning level-0 unit and the offset of its red
    /// channel within that unit's signal.
    pixel_slots: Vec<(u32, u32)>,
}

impl Hierarchy {
    /// Builds and initializes the network. Units draw their weights, in unit
    /// order, from one generator seeded with `seed`.
    pub fn new(spec: &HierarchySpec, tau: f64, seed: u64) -> Result<Self> {
        Self::from_topology(Topology::build(spec)?, tau, seed)
    }

    pub fn from_topology(topo: Topology, tau: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&tau) {
            return Err(PvmError::InvalidHierarchy(format!("tau {tau} outside [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = (0..topo.len())
            .map(|id| {
                UnitState::new(
                    topo.signal_dim(id),
                    topo.context_dim(id),
                    topo.hidden_size(),
                    tau,
                    topo.unit(id).context.clone(),
                    &mut rng,
                )
            })
            .collect();
        let pixel_slots = pixel_slots(&topo);
        let mut h = Self {
            prev_hidden: vec![0.0; topo.len() * topo.hidden_size()],
            topo,
            units,
            pixel_slots,
        };
        h.reset_state();
        Ok(h)
    }

    /// Rebuilds the network with a fovea. Parameters are re-drawn from `seed`
    /// because parent signal sizes change.
    pub fn apply_fovea(&self, region: (usize, usize, usize, usize), factor: usize, seed: u64) -> Result<Self> {
        if factor <= 1 {
            return Ok(self.clone());
        }
        let tau = self.units[0].tau;
        Self::from_topology(self.topo.apply_fovea(region, factor)?, tau, seed)
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn spec(&self) -> &HierarchySpec {
        self.topo.spec()
    }

    pub fn units(&self) -> &[UnitState] {
        &self.units
    }

    pub fn units_mut(&mut self) -> &mut [UnitState] {
        &mut self.units
    }

    pub fn prev_hidden(&self) -> &[f64] {
        &self.prev_hidden
    }

    pub fn prev_hidden_mut(&mut self) -> &mut [f64] {
        &mut self.prev_hidden
    }

    pub fn frame_size(&self) -> (usize, usize) {
        self.topo.frame_size()
    }

    /// Back to the warm-up state (start of a new video); parameters kept.
    pub fn reset_state(&mut self) {
        let hs = self.topo.hidden_size();
        for (i, u) in self.units.iter_mut().enumerate() {
            u.reset();
            self.prev_hidden[i * hs..(i + 1) * hs].copy_from_slice(&u.hidden);
        }
    }

    pub fn param_count(&self) -> usize {
        self.units.iter().map(|u| u.mlp.param_count()).sum()
    }

    pub fn all_params_finite(&self) -> bool {
        self.units.iter().all(|u| u.mlp.params().all(|p| p.is_finite()))
    }

    /// Level-0 pending predictions laid out as an image.
    pub fn pending_prediction(&self) -> Frame {
        let (w, h) = self.frame_size();
        let mut data = Vec::with_capacity(w * h * 3);
        for &(u, off) in &self.pixel_slots {
            let p = &self.units[u as usize].prediction_pending[off as usize..off as usize + 3];
            data.extend(p.iter().map(|&v| v as f32));
        }
        Frame::from_data(w, h, data)
    }

    /// Slices a frame into the level-0 signals, in level-0 unit order.
    pub fn slice_frame(&self, frame: &Frame) -> Vec<Vec<f64>> {
        let level0 = self.topo.levels()[0].clone();
        let mut out: Vec<Vec<f64>> = level0.map(|id| vec![0.0; self.topo.signal_dim(id)]).collect();
        for (&(u, off), rgb) in self.pixel_slots.iter().zip(frame.data().chunks_exact(3)) {
            let dst = &mut out[u as usize][off as usize..off as usize + 3];
            for (d, &s) in dst.iter_mut().zip(rgb) {
                *d = s as f64;
            }
        }
        out
    }

    /// Inverse of [`Hierarchy::slice_frame`].
    pub fn assemble_frame(&self, tiles: &[Vec<f64>]) -> Frame {
        let (w, h) = self.frame_size();
        let mut data = Vec::with_capacity(w * h * 3);
        for &(u, off) in &self.pixel_slots {
            data.extend(tiles[u as usize][off as usize..off as usize + 3].iter().map(|&v| v as f32));
        }
        Frame::from_data(w, h, data)
    }

    /// Applies a camera-motion warp to the level-0 image memories: pending
    /// predictions, previous signal and integral.
    pub fn compensate(&mut self, map: &WarpMap) {
        let (w, h) = self.frame_size();
        assert_eq!((map.width, map.height), (w, h), "warp map does not match the input size");
        let slots = &self.pixel_slots;
        let units = &mut self.units;
        let mut remap = |get: fn(&mut UnitState) -> &mut Vec<f64>| {
            let mut image = Vec::with_capacity(w * h * 3);
            for &(u, off) in slots {
                let v = get(&mut units[u as usize]);
                image.extend_from_slice(&v[off as usize..off as usize + 3]);
            }
            let warped = map.apply(&image, 3);
            for (&(u, off), rgb) in slots.iter().zip(warped.chunks_exact(3)) {
                get(&mut units[u as usize])[off as usize..off as usize + 3].copy_from_slice(rgb);
            }
        };
        remap(|u| &mut u.prediction_pending);
        remap(|u| &mut u.signal_prev);
        remap(|u| &mut u.integral);
    }

    pub fn step(&mut self, frame: &Frame, train: bool, rate: f64) -> Result<StepOutput> {
        self.step_with_target(frame, None, train, rate)
    }

    /// Like [`Hierarchy::step`], but level-0 units learn toward `target`
    /// instead of `frame`. Used with motion compensation, where the training
    /// target is the current frame seen from the previous viewpoint.
    pub fn step_with_target(
        &mut self,
        frame: &Frame,
        target: Option<&Frame>,
        train: bool,
        rate: f64,
    ) -> Result<StepOutput> {
        self.check_frame(frame)?;
        if let Some(t) = target {
            self.check_frame(t)?;
        }
        let errors_px = self.pixel_errors(frame);
        let tiles = self.slice_frame(frame);
        let target_tiles = target.map(|t| self.slice_frame(t));
        let hs = self.topo.hidden_size();

        let mut losses = vec![0.0; self.units.len()];
        for range in self.topo.levels().to_vec() {
            let (lower, rest) = self.units.split_at_mut(range.start);
            let current = &mut rest[..range.len()];
            let topo = &self.topo;
            let prev = &self.prev_hidden;
            let tiles = &tiles;
            let target_tiles = target_tiles.as_ref();
            let level_losses: Vec<f64> = current
                .par_iter_mut()
                .with_min_len(16)
                .enumerate()
                .map(|(i, unit)| {
                    let id = range.start + i;
                    let signal = gather_signal(topo, id, tiles, lower);
                    let tgt = match topo.unit(id).source {
                        SignalSource::Pixels(_) => target_tiles.map(|t| t[id].as_slice()),
                        SignalSource::Children(_) => None,
                    };
                    let context = gather_context(&unit.context_sources, prev, hs);
                    advance_unit(unit, &signal, tgt, &context, train, rate)
                })
                .collect();
            losses[range.clone()].copy_from_slice(&level_losses);
        }
        self.swap_hidden();
        Ok(self.finish(errors_px, losses))
    }

    /// Sequential step visiting units in the given order. Every unit must
    /// appear exactly once and after all of its children. Produces the same
    /// result as [`Hierarchy::step`].
    pub fn step_in_order(&mut self, frame: &Frame, train: bool, rate: f64, order: &[usize]) -> Result<StepOutput> {
        self.check_frame(frame)?;
        assert_eq!(order.len(), self.units.len(), "order must list every unit");
        let errors_px = self.pixel_errors(frame);
        let tiles = self.slice_frame(frame);
        let hs = self.topo.hidden_size();
        let mut losses = vec![0.0; self.units.len()];
        let mut done = vec![false; self.units.len()];
        for &id in order {
            if let SignalSource::Children(ch) = &self.topo.unit(id).source {
                assert!(ch.iter().all(|&c| done[c]), "unit {id} visited before its children");
            }
            let (lower, rest) = self.units.split_at_mut(id);
            let unit = &mut rest[0];
            let signal = gather_signal(&self.topo, id, &tiles, lower);
            let context = gather_context(&unit.context_sources, &self.prev_hidden, hs);
            losses[id] = advance_unit(unit, &signal, None, &context, train, rate);
            done[id] = true;
        }
        self.swap_hidden();
        Ok(self.finish(errors_px, losses))
    }

    fn check_frame(&self, frame: &Frame) -> Result<()> {
        let (w, h) = self.frame_size();
        if (frame.width(), frame.height()) != (w, h) {
            return Err(PvmError::FrameSize {
                got_w: frame.width(),
                got_h: frame.height(),
                want_w: w,
                want_h: h,
            });
        }
        Ok(())
    }

    fn pixel_errors(&self, frame: &Frame) -> Vec<f64> {
        self.pixel_slots
            .iter()
            .zip(frame.data().chunks_exact(3))
            .map(|(&(u, off), rgb)| {
                let p = &self.units[u as usize].prediction_pending[off as usize..off as usize + 3];
                p.iter()
                    .zip(rgb)
                    .map(|(&a, &b)| (a - b as f64) * (a - b as f64))
                    .sum::<f64>()
                    / 3.0
            })
            .collect()
    }

    fn swap_hidden(&mut self) {
        let hs = self.topo.hidden_size();
        for (u, slot) in self.units.iter().zip(self.prev_hidden.chunks_exact_mut(hs)) {
            slot.copy_from_slice(&u.hidden);
        }
    }

    fn finish(&self, pixels: Vec<f64>, losses: Vec<f64>) -> StepOutput {
        let (w, h) = self.frame_size();
        let mse_image = pixels.iter().sum::<f64>() / pixels.len() as f64;
        let total_dims: usize = (0..self.units.len()).map(|i| self.units[i].signal_dim()).sum();
        let mse_all = losses.iter().sum::<f64>() / total_dims as f64;
        let levels = self
            .topo
            .levels()
            .iter()
            .map(|r| losses[r.clone()].to_vec())
            .collect();
        StepOutput {
            prediction: self.pending_prediction(),
            errors: ErrorMap {
                width: w,
                height: h,
                pixels,
                levels,
            },
            mse_image,
            mse_all,
        }
    }
}

fn pixel_slots(topo: &Topology) -> Vec<(u32, u32)> {
    let (w, h) = topo.frame_size();
    let mut slots = vec![(0u32, 0u32); w * h];
    for id in topo.levels()[0].clone() {
        if let SignalSource::Pixels(r) = topo.unit(id).source {
            for dy in 0..r.h {
                for dx in 0..r.w {
                    let px = (r.y + dy) * w + r.x + dx;
                    slots[px] = (id as u32, (3 * (dy * r.w + dx)) as u32);
                }
            }
        }
    }
    slots
}

fn gather_signal(topo: &Topology, id: usize, tiles: &[Vec<f64>], lower: &[UnitState]) -> Vec<f64> {
    match &topo.unit(id).source {
        SignalSource::Pixels(_) => tiles[id].clone(),
        SignalSource::Children(ch) => {
            let mut s = Vec::with_capacity(ch.len() * topo.hidden_size());
            for &c in ch {
                s.extend_from_slice(&lower[c].hidden);
            }
            s
        }
    }
}

fn gather_context(sources: &[usize], prev: &[f64], hs: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(sources.len() * hs);
    for &s in sources {
        c.extend_from_slice(&prev[s * hs..(s + 1) * hs]);
    }
    c
}

/// Score, optionally train, then run forward. Returns the prediction loss
/// against the actual signal.
fn advance_unit(
    unit: &mut UnitState,
    signal: &[f64],
    train_target: Option<&[f64]>,
    context: &[f64],
    train: bool,
    rate: f64,
) -> f64 {
    let loss = unit.prediction_loss(signal);
    if train {
        unit.train(train_target.unwrap_or(signal), rate);
    }
    unit.forward(UnitStepInput { signal, context });
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn tiny_spec() -> HierarchySpec {
        HierarchySpec {
            level_dims: vec![(4, 3), (2, 2), (1, 1)],
            hidden_size: 3,
            tile: (2, 2),
            fovea: None,
            topmost_broadcast: true,
        }
    }

    fn random_frame(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Frame {
        Frame::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()])
    }

    fn bits(out: &StepOutput) -> (u64, u64, Vec<u32>) {
        (
            out.mse_image.to_bits(),
            out.mse_all.to_bits(),
            out.prediction.data().iter().map(|v| v.to_bits()).collect(),
        )
    }

    #[test]
    fn slice_assemble_identity() {
        let h = Hierarchy::new(&HierarchySpec::desk(), 0.9, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_frame(32, 24, &mut rng);
        assert_eq!(h.assemble_frame(&h.slice_frame(&f)), f);

        let fov = h.apply_fovea((4, 3, 8, 6), 2, 1).unwrap();
        assert_eq!(fov.assemble_frame(&fov.slice_frame(&f)), f);
    }

    #[test]
    fn first_step_scores_initial_predictions() {
        let mut h = Hierarchy::new(&tiny_spec(), 0.9, 3).unwrap();
        let f = Frame::filled(8, 6, 0.25);
        let initial = h.pending_prediction();
        let out = h.step(&f, false, 0.01).unwrap();
        let manual: f64 = initial.data().iter().map(|&p| ((p - 0.25) as f64).powi(2)).sum::<f64>()
            / initial.data().len() as f64;
        assert!((out.mse_image - manual).abs() < 1e-6);
        // initial predictions are not uniformly 0.5
        assert!(initial.data().iter().any(|&v| (v - 0.5).abs() > 1e-3));
    }

    #[test]
    fn error_map_total_matches_image_mse() {
        let mut h = Hierarchy::new(&HierarchySpec::desk(), 0.9, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..3 {
            let out = h.step(&random_frame(32, 24, &mut rng), true, 0.01).unwrap();
            let n = (32 * 24) as f64;
            assert!((out.errors.pixel_total() - out.mse_image * n).abs() < 1e-9);
            let level0: f64 = out.errors.levels[0].iter().sum();
            assert!((level0 / 3.0 - out.errors.pixel_total()).abs() < 1e-9);
            assert!(out.errors.pixels.iter().all(|&e| e >= 0.0));
        }
    }

    #[test]
    fn frame_size_checked() {
        let mut h = Hierarchy::new(&tiny_spec(), 0.9, 3).unwrap();
        assert!(matches!(
            h.step(&Frame::new(6, 6), false, 0.01),
            Err(PvmError::FrameSize { .. })
        ));
    }

    #[test]
    fn same_seed_same_curve() {
        let run = || {
            let mut h = Hierarchy::new(&tiny_spec(), 0.9, 9).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(10);
            (0..20)
                .map(|_| h.step(&random_frame(8, 6, &mut rng), true, 0.05).unwrap().mse_all.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn unit_order_does_not_matter() {
        let spec = HierarchySpec::desk();
        let mut a = Hierarchy::new(&spec, 0.9, 12).unwrap();
        let mut b = a.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let levels = a.topology().levels().to_vec();
        for _ in 0..5 {
            let f = random_frame(32, 24, &mut rng);
            let mut order = Vec::new();
            for r in &levels {
                let mut ids: Vec<usize> = r.clone().collect();
                ids.shuffle(&mut rng);
                order.extend(ids);
            }
            let oa = a.step(&f, false, 0.0).unwrap();
            let ob = b.step_in_order(&f, false, 0.0, &order).unwrap();
            assert_eq!(bits(&oa), bits(&ob));
        }
        assert_eq!(a.prev_hidden(), b.prev_hidden());
    }

    #[test]
    fn training_is_local_to_each_unit() {
        let mut h = Hierarchy::new(&tiny_spec(), 0.9, 2).unwrap();
        let f = Frame::filled(8, 6, 0.7);
        h.step(&f, false, 0.1).unwrap();
        let unit0 = h.units()[0].clone();
        let before: Vec<_> = h.units().iter().map(|u| u.mlp.clone()).collect();
        let signal = h.slice_frame(&f)[0].clone();
        h.units_mut()[0].train(&signal, 0.1);
        assert_ne!(h.units()[0].mlp, unit0.mlp);
        for (i, u) in h.units().iter().enumerate().skip(1) {
            assert_eq!(u.mlp, before[i]);
        }
    }

    #[test]
    fn constant_gray_is_learned() {
        let mut h = Hierarchy::new(&HierarchySpec::desk(), 0.9, 1).unwrap();
        let f = Frame::filled(32, 24, 0.5);
        let mut last = f64::INFINITY;
        for _ in 0..600 {
            last = h.step(&f, true, 0.05).unwrap().mse_image;
        }
        assert!(last < 1e-3, "mse {last}");
    }

    #[test]
    fn compensation_with_identity_changes_nothing() {
        let mut h = Hierarchy::new(&tiny_spec(), 0.9, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        h.step(&random_frame(8, 6, &mut rng), false, 0.0).unwrap();
        let before = h.units().to_vec();
        h.compensate(&WarpMap::identity(8, 6));
        assert_eq!(h.units(), &before[..]);
    }

    #[test]
    fn compensation_moves_pending_pixels() {
        let mut h = Hierarchy::new(&tiny_spec(), 0.9, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        h.step(&random_frame(8, 6, &mut rng), false, 0.0).unwrap();
        let before = h.pending_prediction();
        // shift right by one pixel with edge extension
        let src: Vec<u32> = (0..6u32).flat_map(|y| (0..8u32).map(move |x| y * 8 + x.saturating_sub(1))).collect();
        h.compensate(&WarpMap {
            width: 8,
            height: 6,
            src: src.clone(),
            inside: vec![true; 48],
        });
        assert_eq!(h.pending_prediction(), before.gather(&src));
    }

    #[test]
    fn reset_restores_warm_up_state() {
        let mut h = Hierarchy::new(&tiny_spec(), 0.9, 2).unwrap();
        let fresh = h.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        h.step(&random_frame(8, 6, &mut rng), false, 0.0).unwrap();
        h.reset_state();
        assert_eq!(h.units(), fresh.units());
        assert_eq!(h.prev_hidden(), fresh.prev_hidden());
    }
}
