//! Static wiring of the unit pyramid.
//!
//! Units are numbered level by level, level 0 first. Level 0 is defined by
//! pixel rectangles (uniform tiles, or smaller tiles inside the fovea); every
//! higher level is a plain grid. Each child cell is assigned to the parent
//! cell that covers the largest part of it along each axis, ties going to the
//! lower index, so ratios such as 4×3 → 3×2 still wire every cell.

use std::ops::Range;

use crate::error::{PvmError, Result};

/// Split of the central level-0 region into smaller units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoveaSpec {
    /// `(x, y, w, h)` in level-0 unit (cell) coordinates.
    pub region: (usize, usize, usize, usize),
    /// Each covered unit becomes `factor × factor` units.
    pub factor: usize,
}

impl FoveaSpec {
    /// The central half-width, half-height region of a `cols × rows` grid.
    pub fn central_quarter(cols: usize, rows: usize, factor: usize) -> Self {
        let (w, h) = (cols / 2, rows / 2);
        Self {
            region: ((cols - w) / 2, (rows - h) / 2, w, h),
            factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchySpec {
    /// `(cols, rows)` per level, bottom first.
    pub level_dims: Vec<(usize, usize)>,
    pub hidden_size: usize,
    /// Level-0 tile size `(w, h)` in pixels.
    pub tile: (usize, usize),
    pub fovea: Option<FoveaSpec>,
    /// The single top unit sends its hidden state to every other unit.
    pub topmost_broadcast: bool,
}

impl HierarchySpec {
    /// Eight levels over a 128×96 input.
    pub fn full() -> Self {
        Self {
            level_dims: vec![(64, 48), (32, 24), (16, 12), (8, 6), (4, 3), (3, 2), (2, 1), (1, 1)],
            hidden_size: 5,
            tile: (2, 2),
            fovea: None,
            topmost_broadcast: true,
        }
    }

    /// Four levels over a 32×24 input; same shape rules, much cheaper.
    pub fn desk() -> Self {
        Self {
            level_dims: vec![(16, 12), (8, 6), (4, 3), (1, 1)],
            hidden_size: 5,
            tile: (2, 2),
            fovea: None,
            topmost_broadcast: true,
        }
    }

    pub fn frame_size(&self) -> (usize, usize) {
        let (c, r) = self.level_dims.first().copied().unwrap_or((0, 0));
        (c * self.tile.0, r * self.tile.1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PvmError::InvalidHierarchy(m));
        if self.level_dims.is_empty() {
            return bad("no levels".into());
        }
        if self.hidden_size == 0 {
            return bad("hidden size must be positive".into());
        }
        if self.tile.0 == 0 || self.tile.1 == 0 {
            return bad("tile size must be positive".into());
        }
        if self.level_dims.iter().any(|&(c, r)| c == 0 || r == 0) {
            return bad("every level needs at least one unit".into());
        }
        for w in self.level_dims.windows(2) {
            let (a, b) = (w[0].0 * w[0].1, w[1].0 * w[1].1);
            if b >= a {
                return bad(format!("unit count must strictly decrease ({a} -> {b})"));
            }
            if w[1].0 > w[0].0 || w[1].1 > w[0].1 {
                return bad(format!("level {:?} is wider or taller than {:?}", w[1], w[0]));
            }
        }
        if self.topmost_broadcast && self.level_dims.last() != Some(&(1, 1)) {
            return bad("topmost broadcast needs a single top unit".into());
        }
        Ok(())
    }
}

/// Pixel rectangle owned by a level-0 unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl PixelRect {
    pub fn area(&self) -> usize {
        self.w * self.h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalSource {
    Pixels(PixelRect),
    Children(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitNode {
    pub level: usize,
    /// Grid cell on the unit's level; split fovea units keep their original
    /// level-0 cell.
    pub cell: (usize, usize),
    pub source: SignalSource,
    pub parent: Option<usize>,
    pub lateral: Vec<usize>,
    /// Self, lateral neighbours, parent, topmost, in that order.
    pub context: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    spec: HierarchySpec,
    frame_w: usize,
    frame_h: usize,
    units: Vec<UnitNode>,
    levels: Vec<Range<usize>>,
    topmost: Option<usize>,
}

/// For each of `n_child` cells along one axis, the parent cell among
/// `n_parent` with the largest overlap (lowest index on ties).
pub fn cover_map(n_child: usize, n_parent: usize) -> Vec<usize> {
    // work in units of 1/(n_child·n_parent) so overlaps are integers
    (0..n_child)
        .map(|i| {
            let (lo, hi) = (i * n_parent, (i + 1) * n_parent);
            let mut best = (0, 0);
            for j in 0..n_parent {
                let (plo, phi) = (j * n_child, (j + 1) * n_child);
                let overlap = hi.min(phi).saturating_sub(lo.max(plo));
                if overlap > best.1 {
                    best = (j, overlap);
                }
            }
            best.0
        })
        .collect()
}

impl Topology {
    pub fn build(spec: &HierarchySpec) -> Result<Topology> {
        spec.validate()?;
        let (cols, rows) = spec.level_dims[0];
        let (tw, th) = spec.tile;
        let mut level0 = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                level0.push((
                    (c, r),
                    PixelRect {
                        x: c * tw,
                        y: r * th,
                        w: tw,
                        h: th,
                    },
                ));
            }
        }
        if let Some(f) = spec.fovea {
            level0 = split_cells(level0, spec, f)?;
        }
        Self::assemble(spec.clone(), level0)
    }

    /// Rebuilds the topology with level-0 units in `region` split
    /// `factor × factor`. Split units keep their original parent; lateral
    /// links follow the new geometry.
    pub fn apply_fovea(&self, region: (usize, usize, usize, usize), factor: usize) -> Result<Topology> {
        if factor <= 1 {
            return Ok(self.clone());
        }
        let mut spec = self.spec.clone();
        spec.fovea = Some(FoveaSpec { region, factor });
        Topology::build(&spec)
    }

    fn assemble(spec: HierarchySpec, level0: Vec<((usize, usize), PixelRect)>) -> Result<Topology> {
        let (frame_w, frame_h) = spec.frame_size();
        let mut units: Vec<UnitNode> = level0
            .into_iter()
            .map(|(cell, rect)| UnitNode {
                level: 0,
                cell,
                source: SignalSource::Pixels(rect),
                parent: None,
                lateral: Vec::new(),
                context: Vec::new(),
            })
            .collect();
        let mut levels = Vec::with_capacity(spec.level_dims.len());
        levels.push(0..units.len());

        for (lvl, &(cols, rows)) in spec.level_dims.iter().enumerate().skip(1) {
            let base = units.len();
            for r in 0..rows {
                for c in 0..cols {
                    units.push(UnitNode {
                        level: lvl,
                        cell: (c, r),
                        source: SignalSource::Children(Vec::new()),
                        parent: None,
                        lateral: Vec::new(),
                        context: Vec::new(),
                    });
                }
            }
            levels.push(base..units.len());

            let (child_cols, child_rows) = spec.level_dims[lvl - 1];
            let col_map = cover_map(child_cols, cols);
            let row_map = cover_map(child_rows, rows);
            for child in levels[lvl - 1].clone() {
                let (cc, cr) = units[child].cell;
                let parent = base + row_map[cr] * cols + col_map[cc];
                units[child].parent = Some(parent);
                if let SignalSource::Children(ch) = &mut units[parent].source {
                    ch.push(child);
                }
            }
            for p in levels[lvl].clone() {
                if matches!(&units[p].source, SignalSource::Children(ch) if ch.is_empty()) {
                    return Err(PvmError::InvalidHierarchy(format!(
                        "level {lvl} cell {:?} receives no children",
                        units[p].cell
                    )));
                }
            }
        }

        // lateral links: level 0 from pixel adjacency, upper levels from the grid
        let owner = pixel_owner(&units, levels[0].clone(), frame_w, frame_h);
        let mut pairs = Vec::new();
        for y in 0..frame_h {
            for x in 0..frame_w {
                let a = owner[y * frame_w + x];
                if x + 1 < frame_w && owner[y * frame_w + x + 1] != a {
                    pairs.push((a, owner[y * frame_w + x + 1]));
                }
                if y + 1 < frame_h && owner[(y + 1) * frame_w + x] != a {
                    pairs.push((a, owner[(y + 1) * frame_w + x]));
                }
            }
        }
        for (lvl, range) in levels.iter().enumerate().skip(1) {
            let (cols, rows) = spec.level_dims[lvl];
            for u in range.clone() {
                let (c, r) = units[u].cell;
                if c + 1 < cols {
                    pairs.push((u, u + 1));
                }
                if r + 1 < rows {
                    pairs.push((u, u + cols));
                }
            }
        }
        for (a, b) in pairs {
            units[a].lateral.push(b);
            units[b].lateral.push(a);
        }
        for u in &mut units {
            u.lateral.sort_unstable();
            u.lateral.dedup();
        }

        let topmost = spec.topmost_broadcast.then(|| units.len() - 1);
        for (i, u) in units.iter_mut().enumerate() {
            let mut ctx = vec![i];
            ctx.extend(&u.lateral);
            ctx.extend(u.parent);
            if let Some(t) = topmost {
                if t != i && u.parent != Some(t) {
                    ctx.push(t);
                }
            }
            u.context = ctx;
        }

        Ok(Topology {
            spec,
            frame_w,
            frame_h,
            units,
            levels,
            topmost,
        })
    }

    pub fn spec(&self) -> &HierarchySpec {
        &self.spec
    }

    pub fn frame_size(&self) -> (usize, usize) {
        (self.frame_w, self.frame_h)
    }

    pub fn units(&self) -> &[UnitNode] {
        &self.units
    }

    pub fn unit(&self, id: usize) -> &UnitNode {
        &self.units[id]
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn levels(&self) -> &[Range<usize>] {
        &self.levels
    }

    pub fn topmost(&self) -> Option<usize> {
        self.topmost
    }

    pub fn hidden_size(&self) -> usize {
        self.spec.hidden_size
    }

    pub fn signal_dim(&self, id: usize) -> usize {
        match &self.units[id].source {
            SignalSource::Pixels(r) => 3 * r.area(),
            SignalSource::Children(ch) => ch.len() * self.spec.hidden_size,
        }
    }

    pub fn context_dim(&self, id: usize) -> usize {
        self.units[id].context.len() * self.spec.hidden_size
    }

    /// Owning level-0 unit of every pixel, row-major.
    pub fn pixel_owners(&self) -> Vec<usize> {
        pixel_owner(&self.units, self.levels[0].clone(), self.frame_w, self.frame_h)
    }
}

fn pixel_owner(units: &[UnitNode], level0: Range<usize>, w: usize, h: usize) -> Vec<usize> {
    let mut owner = vec![usize::MAX; w * h];
    for id in level0 {
        if let SignalSource::Pixels(r) = units[id].source {
            for y in r.y..r.y + r.h {
                for x in r.x..r.x + r.w {
                    owner[y * w + x] = id;
                }
            }
        }
    }
    owner
}

fn split_cells(
    cells: Vec<((usize, usize), PixelRect)>,
    spec: &HierarchySpec,
    fovea: FoveaSpec,
) -> Result<Vec<((usize, usize), PixelRect)>> {
    let (cols, rows) = spec.level_dims[0];
    let (rx, ry, rw, rh) = fovea.region;
    if rx + rw > cols || ry + rh > rows {
        return Err(PvmError::FoveaOutOfBounds {
            region: fovea.region,
            cols,
            rows,
        });
    }
    let k = fovea.factor;
    if k <= 1 {
        return Ok(cells);
    }
    let (tw, th) = spec.tile;
    if tw % k != 0 || th % k != 0 {
        return Err(PvmError::InvalidHierarchy(format!(
            "tile {tw}x{th} cannot be split by factor {k}"
        )));
    }
    let (sw, sh) = (tw / k, th / k);
    let mut out = Vec::with_capacity(cells.len() + rw * rh * (k * k - 1));
    for (cell, rect) in cells {
        let inside = (rx..rx + rw).contains(&cell.0) && (ry..ry + rh).contains(&cell.1);
        if !inside {
            out.push((cell, rect));
            continue;
        }
        for sy in 0..k {
            for sx in 0..k {
                out.push((
                    cell,
                    PixelRect {
                        x: rect.x + sx * sw,
                        y: rect.y + sy * sh,
                        w: sw,
                        h: sh,
                    },
                ));
            }
        }
    }
    Ok(out)
}
