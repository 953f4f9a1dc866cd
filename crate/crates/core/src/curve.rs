//! Per-level curve families α_n: Γ_n → Δ_n and the finite-resolution view of
//! the limit curve α they generate.
//!
//! Two builtin families are provided: a Hilbert family filling the d-cube from
//! the interval structure that refines by 2^d per level, and an arrowhead-style
//! family filling the right gasket from the triadic interval structure. Both
//! are computed by orientation-state recursions in O(level) per query; per-level
//! tables are only materialized on demand (verification, corruption fixtures).
//!
//! The level-1 orientation of the planar Hilbert family is pinned to the order
//! (0,0),(1,0),(1,1),(0,1); deeper levels follow the reflected-Gray-code
//! recursion from that seed.

use crate::error::{Error, Result};
use crate::grid::{Cell, FractalStructure};
use serde::Serialize;
use std::collections::BTreeMap;

fn gray(w: u64) -> u64 {
    w ^ (w >> 1)
}

fn gray_inverse(g: u64) -> u64 {
    let mut i = g;
    let mut shift = 1;
    while shift < 64 {
        i ^= i >> shift;
        shift <<= 1;
    }
    i
}

fn mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

fn rol(x: u64, r: u32, bits: u32) -> u64 {
    let r = r % bits;
    if r == 0 {
        x & mask(bits)
    } else {
        ((x << r) | (x >> (bits - r))) & mask(bits)
    }
}

fn ror(x: u64, r: u32, bits: u32) -> u64 {
    rol(x, bits - (r % bits), bits)
}

/// Entry vertex of the w-th sub-cube in the Gray-code traversal.
fn entry_vertex(w: u64) -> u64 {
    if w == 0 {
        0
    } else {
        gray(2 * ((w - 1) / 2))
    }
}

/// Axis along which the traversal direction changes after sub-cube w.
fn direction_change(w: u64, bits: u32) -> u32 {
    if w == 0 {
        0
    } else if w % 2 == 1 {
        (w.trailing_ones()) % bits
    } else {
        ((w - 1).trailing_ones()) % bits
    }
}

/// Coordinates of the cube cell visited at `index` on the level-`level`
/// Hilbert traversal of the d-cube grid (2^level cells per axis).
pub fn hilbert_coords(index: u64, level: u32, d: u32) -> Vec<u64> {
    let m = mask(d);
    let mut e = 0u64;
    let mut dc = 0u32;
    let mut canon = vec![0u64; d as usize];
    for i in (0..level).rev() {
        let w = (index >> (i as u64 * d as u64)) & m;
        let l = rol(gray(w), dc + 1, d) ^ e;
        for (j, axis) in canon.iter_mut().enumerate() {
            *axis |= ((l >> j) & 1) << i;
        }
        e ^= rol(entry_vertex(w), dc + 1, d);
        dc = (dc + direction_change(w, d) + 1) % d;
    }
    // axis order fixed so the level-1 planar order runs x-first
    (0..d as usize).map(|i| canon[d as usize - 1 - i]).collect()
}

/// Inverse of [`hilbert_coords`].
pub fn hilbert_index(coords: &[u64], level: u32, d: u32) -> u64 {
    let mut e = 0u64;
    let mut dc = 0u32;
    let mut h = 0u64;
    for i in (0..level).rev() {
        let mut l = 0u64;
        for j in 0..d as usize {
            l |= ((coords[d as usize - 1 - j] >> i) & 1) << j;
        }
        let w = gray_inverse(ror(l ^ e, dc + 1, d));
        h = (h << d) | w;
        e ^= rol(entry_vertex(w), dc + 1, d);
        dc = (dc + direction_change(w, d) + 1) % d;
    }
    h
}

/// Gasket traversal state: (entry corner, exit corner) of the current
/// triangle. Child visiting order is entry-corner child, opposite-corner
/// child, exit-corner child, which makes consecutive triangles share the
/// hand-over vertex.
fn gasket_step(a: u64, b: u64, digit: u64) -> (u64, u64, u64) {
    let c = 3 - a - b;
    match digit {
        0 => (a, a, c),
        1 => (c, a, b),
        _ => (b, c, b),
    }
}

/// Word key (base-3, MSB first) of the gasket triangle visited at interval
/// `index` of the level-`level` traversal. Level 0 starts at corner 0 and
/// exits at corner 2.
pub fn gasket_word_key(index: u64, level: u32) -> u64 {
    let (mut a, mut b) = (0u64, 2u64);
    let mut key = 0u64;
    for i in (0..level).rev() {
        let digit = (index / 3u64.pow(i)) % 3;
        let (letter, na, nb) = gasket_step(a, b, digit);
        key = key * 3 + letter;
        a = na;
        b = nb;
    }
    key
}

/// Inverse of [`gasket_word_key`].
pub fn gasket_interval_index(word_key: u64, level: u32) -> u64 {
    let (mut a, mut b) = (0u64, 2u64);
    let mut index = 0u64;
    for i in (0..level).rev() {
        let letter = (word_key / 3u64.pow(i)) % 3;
        let c = 3 - a - b;
        let digit = if letter == a {
            0
        } else if letter == c {
            1
        } else {
            2
        };
        let (_, na, nb) = gasket_step(a, b, digit);
        index = index * 3 + digit;
        a = na;
        b = nb;
    }
    index
}

/// One explicit per-level map: domain interval index -> range cell key.
#[derive(Debug, Clone)]
pub struct LevelMap {
    pub level: u32,
    /// forward[k] is the range cell key assigned to domain interval k.
    pub forward: Vec<u64>,
    backward: BTreeMap<u64, Vec<u64>>,
}

impl LevelMap {
    pub fn new(level: u32, forward: Vec<u64>) -> Self {
        let mut backward: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for (k, &img) in forward.iter().enumerate() {
            backward.entry(img).or_default().push(k as u64);
        }
        LevelMap {
            level,
            forward,
            backward,
        }
    }

    /// Domain interval indices mapping onto `range_key` (empty if none).
    pub fn preimages(&self, range_key: u64) -> &[u64] {
        self.backward.get(&range_key).map_or(&[], |v| v.as_slice())
    }
}

#[derive(Debug, Clone)]
enum FamilyKind {
    Hilbert { dim: u32 },
    GasketArrowhead,
    Tabulated(Vec<LevelMap>),
}

/// A family of per-level maps realizing a curve from an interval structure
/// onto a higher-dimensional structure, together with the diameter-coupling
/// constants `diam(α(A))^exponent = coupling * diam(A)`.
#[derive(Debug, Clone)]
pub struct CurveFamily {
    name: String,
    domain: FractalStructure,
    range: FractalStructure,
    kind: FamilyKind,
    depth: u32,
    exponent: f64,
    coupling: f64,
}

impl CurveFamily {
    /// Hilbert family filling the d-cube, generated to `depth` levels.
    pub fn hilbert(dim: u32, depth: u32) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidConfig {
                field: "curve".to_string(),
                reason: "hilbert family needs dimension >= 2".to_string(),
            });
        }
        let domain = FractalStructure::dyadic_interval(dim);
        let range = FractalStructure::cube(dim);
        domain.cell_count(depth)?;
        Ok(CurveFamily {
            name: format!("hilbert{dim}"),
            domain,
            range,
            kind: FamilyKind::Hilbert { dim },
            depth,
            exponent: dim as f64,
            coupling: (dim as f64).powf(dim as f64 / 2.0),
        })
    }

    /// Arrowhead-style family filling the right gasket.
    pub fn gasket(depth: u32) -> Result<Self> {
        let domain = FractalStructure::TriadicInterval;
        let range = FractalStructure::Gasket;
        domain.cell_count(depth)?;
        Ok(CurveFamily {
            name: "gasket".to_string(),
            domain,
            range,
            kind: FamilyKind::GasketArrowhead,
            depth,
            exponent: 3f64.ln() / 2f64.ln(),
            coupling: 3f64.sqrt(),
        })
    }

    /// Family from explicit per-level maps (levels 1..=maps.len()), for the
    /// generic engine: maps must be total on each level; the four conditions
    /// are certified separately by [`CurveFamily::verify_conditions`].
    pub fn from_level_maps(
        name: &str,
        domain: FractalStructure,
        range: FractalStructure,
        maps: Vec<LevelMap>,
    ) -> Result<Self> {
        match domain {
            FractalStructure::DyadicInterval { .. } | FractalStructure::TriadicInterval => {}
            _ => {
                return Err(Error::InvalidConfig {
                    field: "domain".to_string(),
                    reason: "curve domain must be an interval structure".to_string(),
                })
            }
        }
        for (i, map) in maps.iter().enumerate() {
            let level = i as u32 + 1;
            if map.level != level {
                return Err(Error::Mismatch {
                    context: format!("level map {i} labeled {}, expected {level}", map.level),
                });
            }
            if map.forward.len() as u64 != domain.cell_count(level)? {
                return Err(Error::Mismatch {
                    context: format!("level {level} map is not total on the domain"),
                });
            }
            let range_count = range.cell_count(level)?;
            if let Some(&bad) = map.forward.iter().find(|&&img| img >= range_count) {
                return Err(Error::Mismatch {
                    context: format!("level {level} image key {bad} out of range"),
                });
            }
        }
        let depth = maps.len() as u32;
        let (exponent, coupling) = fitted_constants(domain, range);
        Ok(CurveFamily {
            name: name.to_string(),
            domain,
            range,
            kind: FamilyKind::Tabulated(maps),
            depth,
            exponent,
            coupling,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> FractalStructure {
        self.domain
    }

    pub fn range(&self) -> FractalStructure {
        self.range
    }

    /// Transfer exponent d of the diameter coupling.
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Coupling constant c of the diameter coupling.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// Deepest generated level; queries beyond it fail with `UnknownLevel`.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Raise the generated depth (capacity permitting). Tabulated families
    /// cannot be extended beyond their given maps.
    pub fn extend_to(&mut self, depth: u32) -> Result<()> {
        if depth <= self.depth {
            return Ok(());
        }
        match self.kind {
            FamilyKind::Tabulated(_) => Err(Error::UnknownLevel {
                level: depth,
                max: self.depth,
            }),
            _ => {
                self.domain.cell_count(depth)?;
                self.depth = depth;
                Ok(())
            }
        }
    }

    /// Parse a builtin family name (`hilbert<d>` or `gasket`).
    pub fn parse(name: &str, depth: u32) -> Result<Self> {
        if name == "gasket" {
            return CurveFamily::gasket(depth);
        }
        if let Some(d) = name.strip_prefix("hilbert") {
            let dim: u32 = d.parse().map_err(|_| Error::InvalidConfig {
                field: "curve".to_string(),
                reason: "expected hilbert<d> or gasket".to_string(),
            })?;
            return CurveFamily::hilbert(dim, depth);
        }
        Err(Error::InvalidConfig {
            field: "curve".to_string(),
            reason: format!("unknown curve family '{name}'"),
        })
    }

    fn check_level(&self, level: u32) -> Result<()> {
        if level > self.depth {
            return Err(Error::UnknownLevel {
                level,
                max: self.depth,
            });
        }
        Ok(())
    }

    /// Range cell key assigned to domain interval `index` at `level`.
    pub fn forward_key(&self, level: u32, index: u64) -> Result<u64> {
        self.check_level(level)?;
        Ok(match &self.kind {
            FamilyKind::Hilbert { dim } => {
                let coords = hilbert_coords(index, level, *dim);
                coords
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, &k)| acc | (k << (level * (dim - 1 - i as u32))))
            }
            FamilyKind::GasketArrowhead => gasket_word_key(index, level),
            FamilyKind::Tabulated(maps) => {
                if level == 0 {
                    0
                } else {
                    maps[(level - 1) as usize].forward[index as usize]
                }
            }
        })
    }

    /// Domain interval indices mapping onto range key at `level` (ascending).
    pub fn backward_keys(&self, level: u32, range_key: u64) -> Result<Vec<u64>> {
        self.check_level(level)?;
        Ok(match &self.kind {
            FamilyKind::Hilbert { dim } => {
                let n = level;
                let m = mask(n);
                let coords: Vec<u64> = (0..*dim)
                    .map(|i| (range_key >> (n * (*dim - 1 - i))) & m)
                    .collect();
                vec![hilbert_index(&coords, level, *dim)]
            }
            FamilyKind::GasketArrowhead => vec![gasket_interval_index(range_key, level)],
            FamilyKind::Tabulated(maps) => {
                if level == 0 {
                    vec![0]
                } else {
                    maps[(level - 1) as usize].preimages(range_key).to_vec()
                }
            }
        })
    }

    /// α_n image of a domain cell.
    pub fn image_cell(&self, cell: &Cell) -> Result<Cell> {
        if cell.structure() != self.domain {
            return Err(Error::Mismatch {
                context: format!(
                    "cell belongs to {}, family domain is {}",
                    cell.structure().name(),
                    self.domain.name()
                ),
            });
        }
        let key = self.forward_key(cell.level(), cell.key())?;
        self.range.cell(cell.level(), key)
    }

    /// Domain cells mapping onto a range cell (singleton for the builtins).
    pub fn preimage_cells(&self, cell: &Cell) -> Result<Vec<Cell>> {
        if cell.structure() != self.range {
            return Err(Error::Mismatch {
                context: format!(
                    "cell belongs to {}, family range is {}",
                    cell.structure().name(),
                    self.range.name()
                ),
            });
        }
        self.backward_keys(cell.level(), cell.key())?
            .into_iter()
            .map(|k| self.domain.cell(cell.level(), k))
            .collect()
    }

    /// Lowest-index level-`depth` domain interval containing x.
    fn domain_chain_cell(&self, x: f64, depth: u32) -> Result<Cell> {
        if !self.domain.carrier_contains(&[x]) {
            return Err(Error::PointOutsideCarrier {
                structure: self.domain.name(),
                point: vec![x],
            });
        }
        let count = self.domain.cell_count(depth)?;
        let scaled = x * count as f64;
        let mut k = (scaled.floor() as u64).min(count - 1);
        if scaled == k as f64 && k > 0 {
            k -= 1;
        }
        self.domain.cell(depth, k)
    }

    /// Finite-resolution evaluation of the curve: the center of the image of
    /// the depth-level interval containing x (lowest-index tie-break). The
    /// true α(x) lies in that image cell, so the error is at most its diameter.
    pub fn eval_point(&self, x: f64, depth: u32) -> Result<Vec<f64>> {
        self.check_level(depth)?;
        let cell = self.domain_chain_cell(x, depth)?;
        Ok(self.image_cell(&cell)?.realization().center())
    }

    /// Quasi-inverse: descends the range cell chain containing y, taking the
    /// lowest-index child at each level, and returns the left endpoint of the
    /// pre-image interval at `depth` (an exactly representable rational).
    pub fn quasi_inverse(&self, y: &[f64], depth: u32) -> Result<f64> {
        self.check_level(depth)?;
        if !self.range.carrier_contains(y) {
            return Err(Error::PointOutsideCarrier {
                structure: self.range.name(),
                point: y.to_vec(),
            });
        }
        let mut cell = self.range.root();
        for _ in 0..depth {
            let kids = cell.children()?;
            // children come in ascending key order, so the first hit is the
            // lowest-index containing cell
            cell = *kids
                .iter()
                .find(|c| c.contains_point(y))
                .ok_or_else(|| Error::PointOutsideCarrier {
                    structure: self.range.name(),
                    point: y.to_vec(),
                })?;
        }
        let pre = self.preimage_cells(&cell)?;
        let k = pre
            .iter()
            .map(|c| c.key())
            .min()
            .ok_or_else(|| Error::Mismatch {
                context: format!("range cell {} has no pre-image", cell.key()),
            })?;
        let count = self.domain.cell_count(depth)?;
        Ok(k as f64 / count as f64)
    }

    /// Centers of the level-`level` image cells in traversal order.
    pub fn polyline(&self, level: u32) -> Result<Vec<Vec<f64>>> {
        self.check_level(level)?;
        let count = self.domain.cell_count(level)?;
        (0..count)
            .map(|k| {
                let key = self.forward_key(level, k)?;
                Ok(self.range.cell(level, key)?.realization().center())
            })
            .collect()
    }

    /// Materialize explicit per-level maps for levels 1..=depth.
    pub fn tabulate(&self, depth: u32) -> Result<Vec<LevelMap>> {
        self.check_level(depth)?;
        (1..=depth)
            .map(|level| {
                let count = self.domain.cell_count(level)?;
                let forward = (0..count)
                    .map(|k| self.forward_key(level, k))
                    .collect::<Result<Vec<u64>>>()?;
                Ok(LevelMap::new(level, forward))
            })
            .collect()
    }

    /// Exhaustively check the four generation conditions for all levels up to
    /// `depth`. Failures are reported with a witness, not raised as errors.
    pub fn verify_conditions(&self, depth: u32) -> Result<ConditionsReport> {
        self.check_level(depth)?;
        let mut intersections = ConditionCheck::pass("i");
        let mut nesting = ConditionCheck::pass("ii");
        let mut onto = ConditionCheck::pass("iii");
        let mut union = ConditionCheck::pass("iv");

        for level in 1..=depth {
            let count = self.domain.cell_count(level)?;
            let range_count = self.range.cell_count(level)?;

            // (i) touching domain intervals (consecutive indices) must have
            // touching images; non-consecutive intervals are disjoint
            if intersections.pass {
                let mut prev = self.range.cell(level, self.forward_key(level, 0)?)?;
                for k in 1..count {
                    let cur = self.range.cell(level, self.forward_key(level, k)?)?;
                    if !prev.touches(&cur) {
                        intersections.fail(format!(
                            "level {level}: intervals {} and {k} map to non-touching cells {:?} and {:?}",
                            k - 1,
                            prev.coords(),
                            cur.coords()
                        ));
                        break;
                    }
                    prev = cur;
                }
            }

            // (iii) α_n onto: every range cell is an image
            if onto.pass {
                let mut images: Vec<u64> = (0..count)
                    .map(|k| self.forward_key(level, k))
                    .collect::<Result<_>>()?;
                images.sort_unstable();
                images.dedup();
                if images.len() as u64 != range_count {
                    onto.fail(format!(
                        "level {level}: {} distinct images of {} range cells",
                        images.len(),
                        range_count
                    ));
                }
            }

            // (ii) and (iv) relate level to level+1
            if level < depth && (nesting.pass || union.pass) {
                for k in 0..count {
                    let image = self.range.cell(level, self.forward_key(level, k)?)?;
                    let child_cells = self.domain.cell(level, k)?.children()?;
                    let mut child_images = Vec::with_capacity(child_cells.len());
                    for child in &child_cells {
                        let img =
                            self.range.cell(level + 1, self.forward_key(level + 1, child.key())?)?;
                        if nesting.pass && img.parent() != Some(image) {
                            nesting.fail(format!(
                                "level {}: child interval {} maps outside the image of its parent {k}",
                                level + 1,
                                child.key()
                            ));
                        }
                        child_images.push(img.key());
                    }
                    if union.pass {
                        child_images.sort_unstable();
                        let mut expected: Vec<u64> =
                            image.children()?.iter().map(|c| c.key()).collect();
                        expected.sort_unstable();
                        if child_images != expected {
                            union.fail(format!(
                                "level {level}: images of children of interval {k} do not tile the image cell"
                            ));
                        }
                    }
                    if !nesting.pass && !union.pass {
                        break;
                    }
                }
            }
        }

        let checks = vec![intersections, nesting, onto, union];
        let all_pass = checks.iter().all(|c| c.pass);
        Ok(ConditionsReport {
            family: self.name.clone(),
            depth,
            checks,
            all_pass,
        })
    }

    /// Fit the coupling constants from levels 1–2 and report the worst
    /// relative residual of `diam(α(A))^d = c*diam(A)` over all cells of all
    /// levels up to `depth`.
    pub fn verify_main_hypotheses(&self, depth: u32) -> Result<MainHypothesesReport> {
        if depth < 2 {
            return Err(Error::DegenerateFit {
                reason: "main-hypotheses fit needs at least two levels".to_string(),
            });
        }
        self.check_level(depth)?;
        let (exponent, coupling) = fitted_constants(self.domain, self.range);
        let mut max_residual = 0.0f64;
        let mut cells_checked = 0u64;
        for level in 1..=depth {
            for (domain_cell, range_cell) in self
                .domain
                .level_cells(level)?
                .zip(self.range.level_cells(level)?)
            {
                let lhs = range_cell.diam().powf(exponent);
                let rhs = coupling * domain_cell.diam();
                max_residual = max_residual.max((lhs - rhs).abs() / rhs);
                cells_checked += 2;
            }
        }
        Ok(MainHypothesesReport {
            family: self.name.clone(),
            exponent,
            coupling,
            depth,
            cells_checked,
            max_relative_residual: max_residual,
            pass: max_residual < 1e-9,
        })
    }
}

/// Solve `diam_range(n)^d = c * diam_domain(n)` for (d, c) from levels 1 and 2.
fn fitted_constants(domain: FractalStructure, range: FractalStructure) -> (f64, f64) {
    let d1 = domain.level_diam(1).ln();
    let d2 = domain.level_diam(2).ln();
    let r1 = range.level_diam(1).ln();
    let r2 = range.level_diam(2).ln();
    let exponent = (d1 - d2) / (r1 - r2);
    let coupling = (exponent * r1 - d1).exp();
    (exponent, coupling)
}

/// Pass/fail record of one generation condition.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub condition: &'static str,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl ConditionCheck {
    fn pass(condition: &'static str) -> Self {
        ConditionCheck {
            condition,
            pass: true,
            witness: None,
        }
    }

    fn fail(&mut self, witness: String) {
        self.pass = false;
        self.witness = Some(witness);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionsReport {
    pub family: String,
    pub depth: u32,
    pub checks: Vec<ConditionCheck>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MainHypothesesReport {
    pub family: String,
    pub exponent: f64,
    pub coupling: f64,
    pub depth: u32,
    pub cells_checked: u64,
    pub max_relative_residual: f64,
    pub pass: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_level_one_matches_pinned_order() {
        let cf = CurveFamily::hilbert(2, 4).unwrap();
        let order: Vec<Vec<u64>> = (0..4)
            .map(|k| {
                let key = cf.forward_key(1, k).unwrap();
                cf.range().cell(1, key).unwrap().coords()
            })
            .collect();
        assert_eq!(
            order,
            vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1]]
        );
    }

    #[test]
    fn hilbert_round_trip_small() {
        for d in 2..=4u32 {
            for level in 1..=3u32 {
                let count = 1u64 << (level * d);
                for k in 0..count {
                    let coords = hilbert_coords(k, level, d);
                    assert_eq!(hilbert_index(&coords, level, d), k, "d={d} level={level}");
                }
            }
        }
    }

    #[test]
    fn hilbert_consecutive_cells_are_face_adjacent() {
        for d in [2u32, 3] {
            let level = if d == 2 { 5 } else { 4 };
            let count = 1u64 << (level * d);
            let mut prev = hilbert_coords(0, level, d);
            for k in 1..count {
                let cur = hilbert_coords(k, level, d);
                let diff: u64 = prev
                    .iter()
                    .zip(&cur)
                    .map(|(&a, &b)| a.abs_diff(b))
                    .sum();
                assert_eq!(diff, 1, "step {k} not a unit move (d={d})");
                prev = cur;
            }
        }
    }

    #[test]
    fn hilbert_prefix_gives_parent_cell() {
        for d in [2u32, 3] {
            for level in 1..=4u32 {
                let count = 1u64 << ((level + 1) * d);
                for k in (0..count).step_by(7) {
                    let fine = hilbert_coords(k, level + 1, d);
                    let coarse = hilbert_coords(k >> d, level, d);
                    for (f, c) in fine.iter().zip(&coarse) {
                        assert_eq!(f >> 1, *c);
                    }
                }
            }
        }
    }

    #[test]
    fn level_two_first_interval_nests_in_first_quadrant() {
        let cf = CurveFamily::hilbert(2, 4).unwrap();
        let key = cf.forward_key(2, 0).unwrap();
        let cell = cf.range().cell(2, key).unwrap();
        assert_eq!(cell.parent().unwrap().coords(), vec![0, 0]);
    }

    #[test]
    fn gasket_round_trip_and_identity_at_level_one() {
        for level in 1..=6u32 {
            let count = 3u64.pow(level);
            for k in 0..count {
                let w = gasket_word_key(k, level);
                assert_eq!(gasket_interval_index(w, level), k);
            }
        }
        assert_eq!(gasket_word_key(0, 1), 0);
        assert_eq!(gasket_word_key(1, 1), 1);
        assert_eq!(gasket_word_key(2, 1), 2);
    }

    #[test]
    fn gasket_words_are_prefix_compatible() {
        for level in 1..=5u32 {
            let count = 3u64.pow(level + 1);
            for k in 0..count {
                let fine = gasket_word_key(k, level + 1);
                let coarse = gasket_word_key(k / 3, level);
                assert_eq!(fine / 3, coarse);
            }
        }
    }

    #[test]
    fn verify_conditions_pass_for_builtins() {
        let cf = CurveFamily::hilbert(2, 5).unwrap();
        assert!(cf.verify_conditions(5).unwrap().all_pass);
        let cf = CurveFamily::hilbert(3, 3).unwrap();
        assert!(cf.verify_conditions(3).unwrap().all_pass);
        let cf = CurveFamily::gasket(5).unwrap();
        assert!(cf.verify_conditions(5).unwrap().all_pass);
    }

    #[test]
    fn corrupted_map_fails_condition_i_with_witness() {
        let cf = CurveFamily::hilbert(2, 3).unwrap();
        let mut maps = cf.tabulate(3).unwrap();
        let forward = &mut maps[2].forward;
        // swap two far-apart images so some consecutive pair stops touching
        let last = forward.len() - 1;
        forward.swap(0, last);
        let maps = maps
            .into_iter()
            .map(|m| LevelMap::new(m.level, m.forward))
            .collect();
        let broken =
            CurveFamily::from_level_maps("broken", cf.domain(), cf.range(), maps).unwrap();
        let report = broken.verify_conditions(3).unwrap();
        let cond_i = &report.checks[0];
        assert!(!cond_i.pass);
        assert!(cond_i.witness.is_some());
        assert!(!report.all_pass);
    }

    #[test]
    fn main_hypotheses_constants() {
        let cf = CurveFamily::hilbert(2, 5).unwrap();
        let rep = cf.verify_main_hypotheses(5).unwrap();
        assert!((rep.exponent - 2.0).abs() < 1e-12);
        assert!((rep.coupling - 2.0).abs() < 1e-12);
        assert!(rep.max_relative_residual < 1e-12);

        let cf = CurveFamily::hilbert(3, 4).unwrap();
        let rep = cf.verify_main_hypotheses(4).unwrap();
        assert!((rep.exponent - 3.0).abs() < 1e-12);
        assert!((rep.coupling - 27f64.sqrt()).abs() < 1e-12);
        assert!(rep.max_relative_residual < 1e-12);

        let cf = CurveFamily::gasket(6).unwrap();
        let rep = cf.verify_main_hypotheses(6).unwrap();
        assert!((rep.exponent - 3f64.ln() / 2f64.ln()).abs() < 1e-12);
        assert!((rep.coupling - 3f64.sqrt()).abs() < 1e-12);
        assert!(rep.max_relative_residual < 1e-9);
    }

    #[test]
    fn image_preimage_round_trip() {
        let cf = CurveFamily::hilbert(2, 5).unwrap();
        for level in 1..=5 {
            for cell in cf.domain().level_cells(level).unwrap() {
                let img = cf.image_cell(&cell).unwrap();
                let pre = cf.preimage_cells(&img).unwrap();
                assert_eq!(pre, vec![cell]);
            }
        }
    }

    #[test]
    fn transport_example_from_level_one() {
        // interval 2 -> cube cell (1,1); back again
        let cf = CurveFamily::hilbert(2, 2).unwrap();
        let interval = cf.domain().cell(1, 2).unwrap();
        let img = cf.image_cell(&interval).unwrap();
        assert_eq!(img.coords(), vec![1, 1]);
        assert_eq!(cf.preimage_cells(&img).unwrap()[0].key(), 2);
    }

    #[test]
    fn eval_point_endpoints() {
        let cf = CurveFamily::hilbert(2, 10).unwrap();
        for depth in [4u32, 8, 10] {
            let p0 = cf.eval_point(0.0, depth).unwrap();
            let half_cell = 0.5f64.powi(depth as i32 + 1);
            assert_eq!(p0, vec![half_cell, half_cell]); // cell center next to the origin
            let p1 = cf.eval_point(1.0, depth).unwrap();
            assert!(p1[0] < 0.01 || depth < 6);
            assert!((p1[1] - 1.0).abs() < 0.01 || depth < 6);
        }
    }

    #[test]
    fn eval_point_chain_is_consistent_across_depths() {
        let cf = CurveFamily::hilbert(2, 9).unwrap();
        for &x in &[0.12345, 0.5, 0.77, 0.999] {
            let coarse = cf.eval_point(x, 5).unwrap();
            let fine = cf.eval_point(x, 9).unwrap();
            let dist: f64 = coarse
                .iter()
                .zip(&fine)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(dist <= cf.range().level_diam(5));
        }
    }

    #[test]
    fn quasi_inverse_is_a_right_inverse_at_resolution() {
        let cf = CurveFamily::hilbert(2, 10).unwrap();
        assert_eq!(cf.quasi_inverse(&[0.0, 0.0], 10).unwrap(), 0.0);
        let tol = 2.0 * cf.range().level_diam(10);
        for &y in &[[0.3, 0.7], [0.9, 0.1], [0.5, 0.5], [0.25, 0.75]] {
            let x = cf.quasi_inverse(&y, 10).unwrap();
            let image = cf.eval_point(x, 10).unwrap();
            let err: f64 = image
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err <= tol, "y={y:?} err={err}");
        }
    }

    #[test]
    fn quasi_inverse_boundary_is_deterministic() {
        let cf = CurveFamily::hilbert(2, 8).unwrap();
        let a = cf.quasi_inverse(&[0.5, 0.5], 8).unwrap();
        let b = cf.quasi_inverse(&[0.5, 0.5], 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_level_is_an_error() {
        let cf = CurveFamily::hilbert(2, 3).unwrap();
        assert!(matches!(
            cf.forward_key(4, 0),
            Err(Error::UnknownLevel { .. })
        ));
        let mut cf = cf;
        cf.extend_to(5).unwrap();
        assert!(cf.forward_key(4, 0).is_ok());
    }

    #[test]
    fn polyline_level_one() {
        let cf = CurveFamily::hilbert(2, 1).unwrap();
        assert_eq!(
            cf.polyline(1).unwrap(),
            vec![
                vec![0.25, 0.25],
                vec![0.75, 0.25],
                vec![0.75, 0.75],
                vec![0.25, 0.75]
            ]
        );
    }

    #[test]
    fn gasket_polyline_stays_local() {
        let cf = CurveFamily::gasket(4).unwrap();
        let line = cf.polyline(4).unwrap();
        assert_eq!(line.len(), 81);
        let diam = cf.range().level_diam(4);
        for pair in line.windows(2) {
            let d: f64 = pair[0]
                .iter()
                .zip(&pair[1])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                d <= diam * (1.0 + 1e-12),
                "consecutive centers {d} apart > {diam}"
            );
        }
    }
}
