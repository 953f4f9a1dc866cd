//! Target sets as cell-membership oracles, their digitization into per-level
//! cell covers, and transport of covers through a curve family.
//!
//! Oracles must be monotone under refinement: a disjoint cell has only
//! disjoint descendants, and an intersecting cell has at least one
//! intersecting child. The builtins satisfy this by construction; the
//! covering DP detects violations during descent.

use crate::curve::CurveFamily;
use crate::error::{Error, Result};
use crate::grid::{Cell, CellRecord, FractalStructure};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeSet;

/// Decides whether a cell meets the target set.
pub trait RegionOracle: Send + Sync {
    fn name(&self) -> String;
    /// Whether the decision is an exact set test (false for sampled covers).
    fn exact(&self) -> bool {
        true
    }
    fn intersects(&self, cell: &Cell) -> bool;
}

/// The level-n cells meeting a target set, stored as sorted packed keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellCover {
    pub structure: FractalStructure,
    pub level: u32,
    pub keys: Vec<u64>,
    pub source: String,
}

impl CellCover {
    pub fn len(&self) -> u64 {
        self.keys.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains_key(&self, key: u64) -> bool {
        self.keys.binary_search(&key).is_ok()
    }

    pub fn is_subset_of(&self, other: &CellCover) -> bool {
        self.structure == other.structure
            && self.level == other.level
            && self.keys.iter().all(|&k| other.contains_key(k))
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.keys.iter().map(move |&k| {
            self.structure
                .cell(self.level, k)
                .expect("cover keys are validated at construction")
        })
    }

    /// Serializable record; cell coordinates are included only up to
    /// `cell_limit` entries.
    pub fn record(&self, cell_limit: usize) -> CoverRecord {
        let cells = if self.keys.len() <= cell_limit {
            Some(self.cells().map(|c| c.record()).collect())
        } else {
            None
        };
        CoverRecord {
            structure: self.structure.name(),
            level: self.level,
            count: self.len(),
            source: self.source.clone(),
            cells,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverRecord {
    pub structure: String,
    pub level: u32,
    pub count: u64,
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellRecord>>,
}

/// Exact digitization: the level-n cells the oracle marks intersecting,
/// found by recursive descent that prunes disjoint subtrees.
pub fn digitize(oracle: &dyn RegionOracle, fs: FractalStructure, level: u32) -> Result<CellCover> {
    fs.cell_count(level)?;
    let mut keys = Vec::new();
    let mut stack = vec![fs.root()];
    while let Some(cell) = stack.pop() {
        if !oracle.intersects(&cell) {
            continue;
        }
        if cell.level() == level {
            keys.push(cell.key());
        } else {
            stack.extend(cell.children()?);
        }
    }
    keys.sort_unstable();
    Ok(CellCover {
        structure: fs,
        level,
        keys,
        source: oracle.name(),
    })
}

/// Transport a range-side cover to the domain side of a curve family:
/// the domain cells whose image lies in the cover.
pub fn preimage_cover(cf: &CurveFamily, cover: &CellCover) -> Result<CellCover> {
    if cover.structure != cf.range() {
        return Err(Error::Mismatch {
            context: format!(
                "cover is over {}, curve range is {}",
                cover.structure.name(),
                cf.range().name()
            ),
        });
    }
    let mut keys = Vec::with_capacity(cover.keys.len());
    for &key in &cover.keys {
        keys.extend(cf.backward_keys(cover.level, key)?);
    }
    keys.sort_unstable();
    keys.dedup();
    Ok(CellCover {
        structure: cf.domain(),
        level: cover.level,
        keys,
        source: format!("preimage({})", cover.source),
    })
}

/// Oracle for α⁻¹(F) on the domain structure: a domain cell meets α⁻¹(F)
/// exactly when its image cell meets F.
pub struct TransportedOracle<'a> {
    curve: &'a CurveFamily,
    inner: &'a dyn RegionOracle,
}

impl<'a> TransportedOracle<'a> {
    pub fn new(curve: &'a CurveFamily, inner: &'a dyn RegionOracle) -> Self {
        TransportedOracle { curve, inner }
    }
}

impl RegionOracle for TransportedOracle<'_> {
    fn name(&self) -> String {
        format!("preimage({})", self.inner.name())
    }

    fn exact(&self) -> bool {
        self.inner.exact()
    }

    fn intersects(&self, cell: &Cell) -> bool {
        let image = self
            .curve
            .image_cell(cell)
            .expect("transported oracle queried beyond the generated depth");
        self.inner.intersects(&image)
    }
}

// ---------------------------------------------------------------------------
// builtin oracles
// ---------------------------------------------------------------------------

/// F is the whole carrier: every cell intersects.
pub struct FullOracle {
    structure: FractalStructure,
}

impl FullOracle {
    pub fn new(structure: FractalStructure) -> Self {
        FullOracle { structure }
    }
}

impl RegionOracle for FullOracle {
    fn name(&self) -> String {
        format!("full({})", self.structure.name())
    }

    fn intersects(&self, _cell: &Cell) -> bool {
        true
    }
}

/// The packed key of the unique cell a point is assigned to at one level.
///
/// Box structures use half-open membership [a, b) except at the carrier's
/// upper face; the gasket descends to the lowest-key containing child. Either
/// way each point lands in exactly one cell per level and assignments are
/// refinement-consistent.
pub fn assigned_cell_key(fs: FractalStructure, p: &[f64], level: u32) -> Result<u64> {
    if !fs.carrier_contains(p) {
        return Err(Error::PointOutsideCarrier {
            structure: fs.name(),
            point: p.to_vec(),
        });
    }
    match fs {
        FractalStructure::Cube { dim } => {
            let scale = 1u64 << level;
            Ok(p.iter().enumerate().fold(0u64, |acc, (i, &x)| {
                let k = ((x * scale as f64).floor() as u64).min(scale - 1);
                acc | (k << (level * (dim - 1 - i as u32)))
            }))
        }
        FractalStructure::DyadicInterval { bits_per_level } => {
            let scale = 1u64 << (level * bits_per_level);
            Ok(((p[0] * scale as f64).floor() as u64).min(scale - 1))
        }
        FractalStructure::TriadicInterval => {
            let scale = 3u64.pow(level);
            Ok(((p[0] * scale as f64).floor() as u64).min(scale - 1))
        }
        FractalStructure::Gasket => {
            let mut cell = fs.root();
            for _ in 0..level {
                cell = *cell
                    .children()?
                    .iter()
                    .find(|c| c.contains_point(p))
                    .ok_or_else(|| Error::PointOutsideCarrier {
                        structure: fs.name(),
                        point: p.to_vec(),
                    })?;
            }
            Ok(cell.key())
        }
    }
}

/// A finite point set; a cell intersects iff it is assigned one of the points.
pub struct PointCloudOracle {
    structure: FractalStructure,
    points: Vec<Vec<f64>>,
    label: String,
}

impl PointCloudOracle {
    pub fn new(structure: FractalStructure, points: Vec<Vec<f64>>, label: &str) -> Result<Self> {
        for p in &points {
            if !fs_contains(structure, p) {
                return Err(Error::PointOutsideCarrier {
                    structure: structure.name(),
                    point: p.clone(),
                });
            }
        }
        Ok(PointCloudOracle {
            structure,
            points,
            label: label.to_string(),
        })
    }

    pub fn single_point(structure: FractalStructure, p: Vec<f64>) -> Result<Self> {
        Self::new(structure, vec![p], "point")
    }
}

fn fs_contains(fs: FractalStructure, p: &[f64]) -> bool {
    fs.carrier_contains(p)
}

impl RegionOracle for PointCloudOracle {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn intersects(&self, cell: &Cell) -> bool {
        self.points.iter().any(|p| {
            assigned_cell_key(self.structure, p, cell.level())
                .map(|k| k == cell.key())
                .unwrap_or(false)
        })
    }
}

/// Digit test for the right gasket inside the d-cube: a cell meets the set
/// when no bit position is set in more than one coordinate. For d = 2 this is
/// `k1 AND k2 == 0` and counts 3^n cells per level; corner-only contacts are
/// excluded by design, which changes counts by at most the κ factor and no
/// log-limit dimension.
pub struct SierpinskiDigitsOracle;

impl RegionOracle for SierpinskiDigitsOracle {
    fn name(&self) -> String {
        "sierpinski".to_string()
    }

    fn intersects(&self, cell: &Cell) -> bool {
        let mut seen = 0u64;
        for k in cell.coords() {
            if seen & k != 0 {
                return false;
            }
            seen |= k;
        }
        true
    }
}

/// Digit-prefix test for the product of d copies of the base-4 Cantor set
/// with digits {0, 3}: a coordinate prefix is feasible when every complete
/// pair of binary digits is equal (00 or 11). Per axis this counts
/// 2^ceil(n/2) cells at level n.
pub struct Cantor4ProductOracle;

impl Cantor4ProductOracle {
    /// Per-axis feasibility of an n-bit coordinate prefix.
    pub fn axis_feasible(k: u64, level: u32) -> bool {
        let mut j = level;
        while j >= 2 {
            let hi = (k >> (j - 1)) & 1;
            let lo = (k >> (j - 2)) & 1;
            if hi != lo {
                return false;
            }
            j -= 2;
        }
        true
    }
}

impl RegionOracle for Cantor4ProductOracle {
    fn name(&self) -> String {
        "cantor4".to_string()
    }

    fn intersects(&self, cell: &Cell) -> bool {
        cell.coords()
            .iter()
            .all(|&k| Self::axis_feasible(k, cell.level()))
    }
}

/// The main diagonal segment of the cube: cells with all coordinates equal.
pub struct DiagonalOracle;

impl RegionOracle for DiagonalOracle {
    fn name(&self) -> String {
        "diagonal".to_string()
    }

    fn intersects(&self, cell: &Cell) -> bool {
        let coords = cell.coords();
        coords.iter().all(|&k| k == coords[0])
    }
}

/// Catalog entry names accepted by [`builtin_oracle`].
pub fn catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("full", "the whole carrier"),
        ("point", "a single point (origin unless coordinates are given)"),
        ("sierpinski", "right-gasket digit test on the cube"),
        ("cantor4", "product of base-4 {0,3}-digit Cantor sets"),
        ("diagonal", "main diagonal segment of the cube"),
        ("gasket-native", "the gasket attractor on its own structure"),
    ]
}

/// Construct a builtin oracle by name, validating structure compatibility.
pub fn builtin_oracle(
    name: &str,
    fs: FractalStructure,
    point: Option<Vec<f64>>,
) -> Result<Box<dyn RegionOracle>> {
    let wrong_structure = |need: &str| Error::InvalidConfig {
        field: "set".to_string(),
        reason: format!("oracle '{name}' needs a {need} structure, got {}", fs.name()),
    };
    match name {
        "full" => Ok(Box::new(FullOracle::new(fs))),
        "gasket-native" => {
            if fs != FractalStructure::Gasket {
                return Err(wrong_structure("gasket"));
            }
            Ok(Box::new(FullOracle::new(fs)))
        }
        "point" => {
            let p = point.unwrap_or_else(|| vec![0.0; fs.carrier_dim()]);
            Ok(Box::new(PointCloudOracle::single_point(fs, p)?))
        }
        "sierpinski" => match fs {
            FractalStructure::Cube { .. } => Ok(Box::new(SierpinskiDigitsOracle)),
            _ => Err(wrong_structure("cube")),
        },
        "cantor4" => match fs {
            FractalStructure::Cube { .. } => Ok(Box::new(Cantor4ProductOracle)),
            _ => Err(wrong_structure("cube")),
        },
        "diagonal" => match fs {
            FractalStructure::Cube { .. } => Ok(Box::new(DiagonalOracle)),
            _ => Err(wrong_structure("cube")),
        },
        other => Err(Error::InvalidConfig {
            field: "set".to_string(),
            reason: format!("unknown builtin set '{other}'"),
        }),
    }
}

// ---------------------------------------------------------------------------
// iterated function systems
// ---------------------------------------------------------------------------

/// Affine contraction x -> linear*x + offset (row-major linear part).
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub linear: Vec<f64>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| {
                self.offset[i]
                    + (0..d).map(|j| self.linear[i * d + j] * p[j]).sum::<f64>()
            })
            .collect()
    }

    /// Operator norm estimated by power iteration on AᵀA.
    pub fn operator_norm(&self) -> f64 {
        let d = self.dim();
        let mut v = vec![1.0 / (d as f64).sqrt(); d];
        let mut sigma_sq = 0.0;
        for _ in 0..60 {
            // w = Av, u = Aᵀw
            let w: Vec<f64> = (0..d)
                .map(|i| (0..d).map(|j| self.linear[i * d + j] * v[j]).sum())
                .collect();
            let u: Vec<f64> = (0..d)
                .map(|j| (0..d).map(|i| self.linear[i * d + j] * w[i]).sum())
                .collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            sigma_sq = norm;
            v = u.iter().map(|x| x / norm).collect();
        }
        sigma_sq.sqrt()
    }

    /// The standard scale-1/2 corner maps of the right gasket in the plane.
    pub fn gasket_ifs() -> Vec<AffineMap> {
        [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5)]
            .iter()
            .map(|&(ox, oy)| AffineMap {
                linear: vec![0.5, 0.0, 0.0, 0.5],
                offset: vec![ox, oy],
            })
            .collect()
    }

    /// Four scale-1/2 maps whose attractor is the whole unit square.
    pub fn square_ifs() -> Vec<AffineMap> {
        [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)]
            .iter()
            .map(|&(ox, oy)| AffineMap {
                linear: vec![0.5, 0.0, 0.0, 0.5],
                offset: vec![ox, oy],
            })
            .collect()
    }
}

/// Rasterization mode for IFS attractors.
#[derive(Debug, Clone, Copy)]
pub enum IfsMode {
    /// Cells meeting the n-th Hutchinson iterate of the carrier's bounding
    /// box: guaranteed to contain the true cover.
    Superset,
    /// Cells hit by seeded chaos-game samples: guaranteed to be inside the
    /// true cover, probabilistically complete.
    Subset { samples: usize, seed: u64 },
}

/// Digitize an IFS attractor on a box-structured carrier.
pub fn ifs_cover(
    maps: &[AffineMap],
    fs: FractalStructure,
    level: u32,
    mode: IfsMode,
) -> Result<CellCover> {
    let dim = fs.carrier_dim();
    if matches!(fs, FractalStructure::Gasket) {
        return Err(Error::InvalidConfig {
            field: "structure".to_string(),
            reason: "IFS rasterization targets box-structured carriers".to_string(),
        });
    }
    for (index, map) in maps.iter().enumerate() {
        if map.dim() != dim || map.linear.len() != dim * dim {
            return Err(Error::Mismatch {
                context: format!("IFS map {index} has wrong dimension"),
            });
        }
        let norm = map.operator_norm();
        if norm >= 1.0 {
            return Err(Error::NonContractiveMap { index, norm });
        }
    }
    fs.cell_count(level)?;

    let mut keys: BTreeSet<u64> = BTreeSet::new();
    match mode {
        IfsMode::Superset => {
            // depth-n compositions applied to the carrier bounding box
            let lo = vec![0.0; dim];
            let hi = vec![1.0; dim];
            let mut stack = vec![(0u32, lo, hi)];
            while let Some((depth, lo, hi)) = stack.pop() {
                if depth == level {
                    mark_cells_in_box(fs, level, &lo, &hi, &mut keys)?;
                    continue;
                }
                for map in maps {
                    // bounding box of the affine image of the box
                    let corners = box_corners(&lo, &hi);
                    let mut new_lo = vec![f64::INFINITY; dim];
                    let mut new_hi = vec![f64::NEG_INFINITY; dim];
                    for c in corners {
                        let img = map.apply(&c);
                        for i in 0..dim {
                            new_lo[i] = new_lo[i].min(img[i]);
                            new_hi[i] = new_hi[i].max(img[i]);
                        }
                    }
                    stack.push((depth + 1, new_lo, new_hi));
                }
            }
        }
        IfsMode::Subset { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = vec![0.0; dim];
            for _ in 0..64 {
                p = maps[rng.gen_range(0..maps.len())].apply(&p);
            }
            for _ in 0..samples {
                p = maps[rng.gen_range(0..maps.len())].apply(&p);
                if fs.carrier_contains(&p) {
                    keys.insert(assigned_cell_key(fs, &p, level)?);
                }
            }
        }
    }

    Ok(CellCover {
        structure: fs,
        level,
        keys: keys.into_iter().collect(),
        source: format!("ifs({})", maps.len()),
    })
}

fn box_corners(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let d = lo.len();
    (0..(1usize << d))
        .map(|j| {
            (0..d)
                .map(|i| if (j >> i) & 1 == 1 { hi[i] } else { lo[i] })
                .collect()
        })
        .collect()
}

/// Insert the keys of all level-n cells whose closed realization meets the
/// closed box [lo, hi].
fn mark_cells_in_box(
    fs: FractalStructure,
    level: u32,
    lo: &[f64],
    hi: &[f64],
    keys: &mut BTreeSet<u64>,
) -> Result<()> {
    match fs {
        FractalStructure::Cube { dim } => {
            let scale = 1u64 << level;
            let ranges: Vec<(u64, u64)> = (0..dim as usize)
                .map(|i| candidate_range(lo[i], hi[i], scale))
                .collect();
            let mut coords: Vec<u64> = ranges.iter().map(|r| r.0).collect();
            if ranges.iter().any(|r| r.0 > r.1) {
                return Ok(());
            }
            'outer: loop {
                let sf = scale as f64;
                let overlaps = coords.iter().enumerate().all(|(i, &k)| {
                    k as f64 <= hi[i] * sf && (k + 1) as f64 >= lo[i] * sf
                });
                if overlaps {
                    let key = coords.iter().enumerate().fold(0u64, |acc, (i, &k)| {
                        acc | (k << (level * (dim - 1 - i as u32)))
                    });
                    keys.insert(key);
                }
                let mut axis = dim as usize;
                loop {
                    if axis == 0 {
                        break 'outer;
                    }
                    axis -= 1;
                    coords[axis] += 1;
                    if coords[axis] <= ranges[axis].1 {
                        break;
                    }
                    coords[axis] = ranges[axis].0;
                }
            }
        }
        FractalStructure::DyadicInterval { bits_per_level } => {
            let scale = 1u64 << (level * bits_per_level);
            let (k0, k1) = candidate_range(lo[0], hi[0], scale);
            let sf = scale as f64;
            for k in k0..=k1 {
                if k as f64 <= hi[0] * sf && (k + 1) as f64 >= lo[0] * sf {
                    keys.insert(k);
                }
            }
        }
        FractalStructure::TriadicInterval => {
            let scale = 3u64.pow(level);
            let (k0, k1) = candidate_range(lo[0], hi[0], scale);
            let sf = scale as f64;
            for k in k0..=k1 {
                if k as f64 <= hi[0] * sf && (k + 1) as f64 >= lo[0] * sf {
                    keys.insert(k);
                }
            }
        }
        FractalStructure::Gasket => unreachable!("rejected above"),
    }
    Ok(())
}

fn candidate_range(lo: f64, hi: f64, scale: u64) -> (u64, u64) {
    let sf = scale as f64;
    let k0 = ((lo * sf).floor() - 1.0).max(0.0) as u64;
    let k1 = (((hi * sf).floor() + 1.0).max(0.0) as u64).min(scale - 1);
    (k0.min(scale - 1), k1)
}
