//! Seeded procedural trees and forest patches.
//!
//! Trees are a simplified branching model: one trunk cylinder, a vertical
//! leader through the crown, `branch_levels` generations of side branches and
//! opaque leaf discs clustered around the terminal branches. Conifers get a
//! narrow conical crown, broadleaf trees a wide ellipsoidal one.

use std::f64::consts::TAU;

use glam::{DVec2, DVec3};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cylinder, Disc, Rect};
use crate::sampling::ForestStats;

/// Default minimum trunk-to-trunk spacing of the placement process (meters).
pub const DEFAULT_MIN_SPACING_M: f64 = 2.0;
/// Consecutive rejected darts after which placement gives up.
pub const MAX_PLACEMENT_ATTEMPTS: u32 = 10_000;

/// Closed interval `[min, max]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl From<[f64; 2]> for Interval {
    fn from([min, max]: [f64; 2]) -> Self {
        Interval { min, max }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.min, i.max]
    }
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Interval { min, max }
    }

    pub const fn point(v: f64) -> Self {
        Interval { min: v, max: v }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..=self.max)
        } else {
            self.min
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.min > 0.0 && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::Param(format!(
                "{name} must be a positive interval with min <= max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeParams {
    pub height_range_m: Interval,
    pub trunk_length_range_m: Interval,
    pub trunk_radius_range_m: Interval,
    pub leaf_size_range_m: Interval,
    pub branch_levels: u32,
    pub branches_per_level: u32,
    pub leaves_per_branch: u32,
    /// Broadleaf crown radius as a fraction of crown height; conifers use half.
    pub crown_radius_fraction: f64,
    pub conifer_probability: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            height_range_m: Interval::new(20.0, 25.0),
            trunk_length_range_m: Interval::new(4.0, 8.0),
            trunk_radius_range_m: Interval::new(0.20, 0.50),
            leaf_size_range_m: Interval::new(0.05, 0.20),
            branch_levels: 2,
            branches_per_level: 6,
            leaves_per_branch: 40,
            crown_radius_fraction: 0.22,
            conifer_probability: 0.5,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        self.height_range_m.check("height_range_m")?;
        self.trunk_length_range_m.check("trunk_length_range_m")?;
        self.trunk_radius_range_m.check("trunk_radius_range_m")?;
        self.leaf_size_range_m.check("leaf_size_range_m")?;
        if self.trunk_length_range_m.max >= self.height_range_m.min {
            return Err(Error::Param(
                "trunk_length_range_m max must be below height_range_m min".into(),
            ));
        }
        if !(self.crown_radius_fraction > 0.0 && self.crown_radius_fraction.is_finite()) {
            return Err(Error::Param(format!(
                "crown_radius_fraction must be positive, got {}",
                self.crown_radius_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.conifer_probability) {
            return Err(Error::Param(format!(
                "conifer_probability must lie in [0, 1], got {}",
                self.conifer_probability
            )));
        }
        if self.branch_levels > 4 || self.branches_per_level > 32 {
            return Err(Error::Param(
                "branch_levels must be <= 4 and branches_per_level <= 32".into(),
            ));
        }
        Ok(())
    }

    /// Every tree parameter collapsed to a single value.
    pub fn fixed(height: f64, trunk: f64, radius: f64, leaf: f64) -> Self {
        TreeParams {
            height_range_m: Interval::point(height),
            trunk_length_range_m: Interval::point(trunk),
            trunk_radius_range_m: Interval::point(radius),
            leaf_size_range_m: Interval::point(leaf),
            ..TreeParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Conifer,
    Broadleaf,
}

/// One tree in local coordinates: trunk base at the origin, z up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeGeometry {
    pub species: Species,
    pub height_m: f64,
    pub trunk_length_m: f64,
    pub trunk_radius_m: f64,
    pub leaf_size_m: f64,
    pub crown_radius_m: f64,
    pub trunk: Cylinder,
    pub branches: Vec<Cylinder>,
    pub leaves: Vec<Disc>,
}

impl TreeGeometry {
    pub fn primitive_count(&self) -> usize {
        1 + self.branches.len() + self.leaves.len()
    }
}

/// Serialized as its label: `sparse`, `medium`, `dense` or `custom:<trees/ha>`.
/// A bare number is read as a custom density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "String")]
pub enum DensityClass {
    Sparse,
    Medium,
    Dense,
    Custom(f64),
}

impl DensityClass {
    pub fn trees_per_ha(&self) -> f64 {
        match *self {
            DensityClass::Sparse => 133.0,
            DensityClass::Medium => 266.0,
            DensityClass::Dense => 400.0,
            DensityClass::Custom(v) => v,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            DensityClass::Sparse => "sparse".into(),
            DensityClass::Medium => "medium".into(),
            DensityClass::Dense => "dense".into(),
            DensityClass::Custom(v) => format!("custom:{v}"),
        }
    }

    /// Tree count on `area_m2`: trees/ha × ha, rounded half up.
    pub fn tree_count(&self, area_m2: f64) -> Result<usize> {
        let tph = self.trees_per_ha();
        if !(tph >= 0.0 && tph.is_finite()) {
            return Err(Error::Param(format!(
                "density must be a non-negative number of trees per hectare, got {tph}"
            )));
        }
        Ok((tph * area_m2 / 10_000.0 + 0.5).floor() as usize)
    }
}

impl std::str::FromStr for DensityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(DensityClass::Sparse),
            "medium" => Ok(DensityClass::Medium),
            "dense" => Ok(DensityClass::Dense),
            other => {
                let value = other.strip_prefix("custom:").unwrap_or(other);
                value
                    .parse::<f64>()
                    .map(DensityClass::Custom)
                    .map_err(|_| Error::Param(format!("unknown density class `{s}`")))
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DensityRepr {
    Label(String),
    TreesPerHa(f64),
}

impl TryFrom<DensityRepr> for DensityClass {
    type Error = Error;

    fn try_from(r: DensityRepr) -> Result<Self> {
        match r {
            DensityRepr::Label(s) => s.parse(),
            DensityRepr::TreesPerHa(v) => Ok(DensityClass::Custom(v)),
        }
    }
}

impl From<DensityClass> for String {
    fn from(d: DensityClass) -> String {
        d.label()
    }
}

impl std::fmt::Display for DensityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedTree {
    pub position: DVec2,
    pub tree: TreeGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub seed: u64,
    pub density: DensityClass,
    pub extent: Rect,
    pub min_spacing_m: f64,
    pub params: TreeParams,
    pub trees: Vec<PlacedTree>,
}

impl Forest {
    pub fn area_ha(&self) -> f64 {
        self.extent.area() / 10_000.0
    }

    pub fn primitive_count(&self) -> usize {
        self.trees.iter().map(|t| t.tree.primitive_count()).sum()
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Forest> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

fn crown_envelope(species: Species, trunk: f64, height: f64, crown_radius: f64, z: f64) -> f64 {
    if z < trunk || z > height {
        return 0.0;
    }
    let crown_height = height - trunk;
    match species {
        Species::Conifer => crown_radius * (height - z) / crown_height,
        Species::Broadleaf => {
            let half = 0.5 * crown_height;
            let u = (z - (trunk + half)) / half;
            crown_radius * (1.0 - u * u).max(0.0).sqrt()
        }
    }
}

fn unit_from_angles(azimuth: f64, elevation: f64) -> DVec3 {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    DVec3::new(ce * ca, ce * sa, se)
}

struct Crown {
    species: Species,
    trunk: f64,
    height: f64,
    radius: f64,
}

impl Crown {
    /// Pulls `p` inside the crown volume, keeping `margin` from the bounding
    /// cylinder wall and `z_margin` above the trunk part.
    fn clamp(&self, p: DVec3, margin: f64, z_margin: f64) -> DVec3 {
        let z = p.z.clamp(self.trunk + z_margin, self.height);
        let limit = (crown_envelope(self.species, self.trunk, self.height, self.radius, z)
            .min(self.radius - margin))
        .max(0.0);
        let xy = p.truncate();
        let r = xy.length();
        let xy = if r > limit && r > 0.0 { xy * (limit / r) } else { xy };
        xy.extend(z)
    }
}

/// Builds one tree from its own seeded stream.
pub fn generate_tree(seed: u64, params: &TreeParams) -> Result<TreeGeometry> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let height = params.height_range_m.sample(&mut rng);
    let trunk_len = params.trunk_length_range_m.sample(&mut rng);
    let trunk_r = params.trunk_radius_range_m.sample(&mut rng);
    let leaf_size = params.leaf_size_range_m.sample(&mut rng);
    let species = if rng.random_bool(params.conifer_probability) {
        Species::Conifer
    } else {
        Species::Broadleaf
    };
    let crown_height = height - trunk_len;
    let fraction = match species {
        Species::Conifer => 0.5 * params.crown_radius_fraction,
        Species::Broadleaf => params.crown_radius_fraction,
    };
    let crown_radius = (fraction * crown_height).max(trunk_r);
    let crown = Crown {
        species,
        trunk: trunk_len,
        height,
        radius: crown_radius,
    };

    let trunk = Cylinder {
        base: DVec3::ZERO,
        top: DVec3::new(0.0, 0.0, trunk_len),
        radius: trunk_r,
    };

    let mut branches = Vec::new();
    let mut terminal: Vec<usize> = Vec::new();
    if params.branch_levels > 0 {
        let leader_r = 0.5 * trunk_r;
        branches.push(Cylinder {
            base: trunk.top,
            top: DVec3::new(0.0, 0.0, height),
            radius: leader_r,
        });
        let mut generation = vec![0usize];
        // First generation hangs off the leader.
        let mut next = Vec::new();
        let side_r = 0.35 * trunk_r;
        for _ in 0..params.branches_per_level {
            let (zmin, zmax) = match species {
                Species::Conifer => (trunk_len, height - 0.05 * crown_height),
                Species::Broadleaf => (trunk_len + 0.1 * crown_height, trunk_len + 0.85 * crown_height),
            };
            let z = rng.random_range(zmin..=zmax);
            let azimuth = rng.random_range(0.0..TAU);
            let elevation = match species {
                Species::Conifer => rng.random_range(-20f64..10.0).to_radians(),
                Species::Broadleaf => rng.random_range(20f64..60.0).to_radians(),
            };
            let reach = crown_envelope(species, trunk_len, height, crown_radius, z).max(0.5);
            let len = reach * rng.random_range(0.7..1.1);
            let base = DVec3::new(0.0, 0.0, z);
            let tip = crown.clamp(base + unit_from_angles(azimuth, elevation) * len, side_r, 0.0);
            next.push(branches.len());
            branches.push(Cylinder {
                base,
                top: tip,
                radius: side_r,
            });
        }
        generation.extend(next);

        for _level in 1..params.branch_levels {
            let mut next = Vec::new();
            for &parent_idx in &generation {
                let parent = branches[parent_idx];
                let axis = parent.top - parent.base;
                let parent_len = axis.length();
                if parent_len == 0.0 {
                    continue;
                }
                let child_r = 0.35 * parent.radius;
                let parent_az = axis.y.atan2(axis.x);
                for _ in 0..params.branches_per_level {
                    let t = rng.random_range(0.3..1.0);
                    let base = parent.base + axis * t;
                    let azimuth = if axis.truncate().length() < 1e-9 {
                        rng.random_range(0.0..TAU)
                    } else {
                        parent_az + rng.random_range(-1.2..1.2)
                    };
                    let elevation = rng.random_range(-30f64..45.0).to_radians();
                    let len = (0.5 * parent_len).min(0.6 * crown_radius).max(0.3)
                        * rng.random_range(0.6..1.0);
                    let tip = crown.clamp(
                        base + unit_from_angles(azimuth, elevation) * len,
                        child_r,
                        0.0,
                    );
                    next.push(branches.len());
                    branches.push(Cylinder {
                        base,
                        top: tip,
                        radius: child_r,
                    });
                }
            }
            generation = next;
        }
        terminal = generation;
    }

    let leaf_r = 0.5 * leaf_size;
    let mut leaves = Vec::with_capacity(terminal.len() * params.leaves_per_branch as usize);
    for &idx in &terminal {
        let b = branches[idx];
        for _ in 0..params.leaves_per_branch {
            let t = rng.random_range(0.0..=1.0);
            let jitter = DVec3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
            );
            // Strictly above the trunk part, clear of the crown's bounding cylinder.
            let center = crown.clamp(b.base.lerp(b.top, t) + jitter, leaf_r, leaf_r + 1e-6);
            let nz: f64 = rng.random_range(0.0..=1.0);
            let phi = rng.random_range(0.0..TAU);
            let s = (1.0 - nz * nz).sqrt();
            leaves.push(Disc {
                center,
                normal: DVec3::new(s * phi.cos(), s * phi.sin(), nz),
                radius: leaf_r,
            });
        }
    }

    Ok(TreeGeometry {
        species,
        height_m: height,
        trunk_length_m: trunk_len,
        trunk_radius_m: trunk_r,
        leaf_size_m: leaf_size,
        crown_radius_m: crown_radius,
        trunk,
        branches,
        leaves,
    })
}

/// Uniform hash grid used for spacing checks and nearest-neighbour queries.
struct PointGrid {
    origin: DVec2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl PointGrid {
    fn new(extent: &Rect, cell: f64) -> Self {
        let nx = ((extent.width() / cell).ceil() as usize).clamp(1, 4096);
        let ny = ((extent.height() / cell).ceil() as usize).clamp(1, 4096);
        PointGrid {
            origin: extent.min,
            cell: (extent.width() / nx as f64).max(extent.height() / ny as f64),
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        }
    }

    fn cell_of(&self, p: DVec2) -> (usize, usize) {
        let c = (p - self.origin) / self.cell;
        (
            (c.x.max(0.0) as usize).min(self.nx - 1),
            (c.y.max(0.0) as usize).min(self.ny - 1),
        )
    }

    fn insert(&mut self, p: DVec2, id: usize) {
        let (cx, cy) = self.cell_of(p);
        self.buckets[cy * self.nx + cx].push(id);
    }

    /// Calls `f` for every id within `ring` cells of `p` (Chebyshev distance).
    fn for_ring(&self, p: DVec2, ring: usize, mut f: impl FnMut(usize)) {
        let (cx, cy) = self.cell_of(p);
        let x0 = cx.saturating_sub(ring);
        let y0 = cy.saturating_sub(ring);
        let x1 = (cx + ring).min(self.nx - 1);
        let y1 = (cy + ring).min(self.ny - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let on_ring = x.abs_diff(cx) == ring || y.abs_diff(cy) == ring;
                if on_ring {
                    self.buckets[y * self.nx + x].iter().for_each(|&id| f(id));
                }
            }
        }
    }
}

/// Dart throwing with a minimum spacing between trunk axes.
fn place_trees(
    rng: &mut impl Rng,
    extent: &Rect,
    count: usize,
    min_spacing: f64,
) -> Result<Vec<DVec2>> {
    let mut points: Vec<DVec2> = Vec::with_capacity(count);
    let mut grid = PointGrid::new(extent, min_spacing.max(0.5));
    let reach = if min_spacing > 0.0 {
        (min_spacing / grid.cell).ceil() as usize
    } else {
        0
    };
    let min2 = min_spacing * min_spacing;
    for _ in 0..count {
        let mut attempts = 0u32;
        loop {
            if attempts >= MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::Param(format!(
                    "could not place tree {} of {count} with {min_spacing} m spacing after \
                     {MAX_PLACEMENT_ATTEMPTS} attempts",
                    points.len() + 1
                )));
            }
            attempts += 1;
            let p = DVec2::new(
                rng.random_range(extent.min.x..extent.max.x),
                rng.random_range(extent.min.y..extent.max.y),
            );
            let mut ok = true;
            for ring in 0..=reach {
                grid.for_ring(p, ring, |id| {
                    if (points[id] - p).length_squared() < min2 {
                        ok = false;
                    }
                });
            }
            if ok {
                grid.insert(p, points.len());
                points.push(p);
                break;
            }
        }
    }
    Ok(points)
}

pub fn generate_forest(
    seed: u64,
    density: DensityClass,
    extent: Rect,
    params: &TreeParams,
    min_spacing_m: f64,
) -> Result<Forest> {
    params.validate()?;
    if extent.is_empty() {
        return Err(Error::Param("forest extent must have positive area".into()));
    }
    if !(min_spacing_m >= 0.0 && min_spacing_m.is_finite()) {
        return Err(Error::Param(format!(
            "min_spacing_m must be non-negative, got {min_spacing_m}"
        )));
    }
    let count = density.tree_count(extent.area())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = place_trees(&mut rng, &extent, count, min_spacing_m)?;
    let trees = positions
        .into_iter()
        .map(|position| {
            let tree_seed = rng.next_u64();
            generate_tree(tree_seed, params).map(|tree| PlacedTree { position, tree })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        seed,
        density,
        extent,
        min_spacing_m,
        params: *params,
        trees,
    })
}

/// Distance from each tree to its nearest neighbouring trunk axis, in tree order.
pub fn nearest_neighbor_distances(positions: &[DVec2]) -> Vec<f64> {
    if positions.len() < 2 {
        return vec![f64::INFINITY; positions.len()];
    }
    let mut lo = positions[0];
    let mut hi = positions[0];
    for p in positions {
        lo = lo.min(*p);
        hi = hi.max(*p);
    }
    let bounds = Rect::new(lo, hi.max(lo + DVec2::splat(1e-9)));
    // About two points per cell on average.
    let cell = (bounds.area() * 2.0 / positions.len() as f64).sqrt().max(1e-6);
    let mut grid = PointGrid::new(&bounds, cell);
    for (i, p) in positions.iter().enumerate() {
        grid.insert(*p, i);
    }
    let max_ring = grid.nx.max(grid.ny);
    positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut best = f64::INFINITY;
            for ring in 0..=max_ring {
                // Anything beyond this ring is at least `(ring) * cell` away.
                if ring > 0 && (ring - 1) as f64 * grid.cell > best {
                    break;
                }
                grid.for_ring(p, ring, |j| {
                    if j != i {
                        let d = (positions[j] - p).length();
                        if d < best {
                            best = d;
                        }
                    }
                });
            }
            best
        })
        .collect()
}

pub fn forest_stats(forest: &Forest) -> Result<ForestStats> {
    let n = forest.trees.len();
    if n < 2 {
        return Err(Error::Stats(format!(
            "need at least 2 trees for a nearest-neighbour distance, forest has {n}"
        )));
    }
    let positions: Vec<DVec2> = forest.trees.iter().map(|t| t.position).collect();
    let nn = nearest_neighbor_distances(&positions);
    let mut d_sum = 0.0;
    for d in &nn {
        d_sum += d;
    }
    let mut h_sum = 0.0;
    for t in &forest.trees {
        h_sum += t.tree.trunk_length_m;
    }
    Ok(ForestStats {
        h_t_m: h_sum / n as f64,
        d_t_m: d_sum / n as f64,
        trees_per_ha: n as f64 / forest.area_ha(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare_forest(points: &[(f64, f64, f64)]) -> Forest {
        let params = TreeParams {
            branch_levels: 0,
            ..TreeParams::default()
        };
        let trees = points
            .iter()
            .map(|&(x, y, trunk)| {
                let mut tree = generate_tree(1, &params).unwrap();
                tree.trunk_length_m = trunk;
                PlacedTree {
                    position: DVec2::new(x, y),
                    tree,
                }
            })
            .collect();
        Forest {
            seed: 0,
            density: DensityClass::Custom(0.0),
            extent: Rect::centered(100.0, 100.0),
            min_spacing_m: 0.0,
            params,
            trees,
        }
    }

    #[test]
    fn degenerate_ranges_force_scalars() {
        let params = TreeParams::fixed(22.0, 6.0, 0.3, 0.1);
        let t = generate_tree(99, &params).unwrap();
        assert_eq!(t.height_m, 22.0);
        assert_eq!(t.trunk_length_m, 6.0);
        assert_eq!(t.trunk_radius_m, 0.3);
        assert_eq!(t.leaf_size_m, 0.1);
        assert!(t.leaves.iter().all(|l| l.radius == 0.05));
        assert_eq!(t.trunk.top.z, 6.0);
    }

    #[test]
    fn tree_generation_is_deterministic() {
        let p = TreeParams::default();
        assert_eq!(generate_tree(7, &p).unwrap(), generate_tree(7, &p).unwrap());
        assert_ne!(generate_tree(7, &p).unwrap(), generate_tree(8, &p).unwrap());
    }

    #[test]
    fn tree_invariants_hold() {
        let p = TreeParams::default();
        for seed in 0..50 {
            let t = generate_tree(seed, &p).unwrap();
            assert_eq!(t.trunk.base.z, 0.0);
            let axis = DVec2::ZERO;
            for leaf in &t.leaves {
                assert!(leaf.center.z > t.trunk_length_m && leaf.center.z <= t.height_m);
                assert!(leaf.center.truncate().length() + leaf.radius <= t.crown_radius_m + 1e-9);
            }
            for b in &t.branches {
                assert!(b.max_radial_extent(axis) <= t.crown_radius_m + 1e-9);
                assert!(b.base.z >= t.trunk_length_m - 1e-9 && b.top.z <= t.height_m + 1e-9);
            }
            assert!(t.trunk.max_radial_extent(axis) <= t.crown_radius_m + 1e-9);
        }
    }

    #[test]
    fn zero_branch_levels_is_trunk_only() {
        let p = TreeParams {
            branch_levels: 0,
            ..TreeParams::default()
        };
        let t = generate_tree(3, &p).unwrap();
        assert!(t.branches.is_empty() && t.leaves.is_empty());
        assert_eq!(t.primitive_count(), 1);
    }

    #[test]
    fn branch_and_leaf_counts() {
        let p = TreeParams {
            branch_levels: 2,
            branches_per_level: 3,
            leaves_per_branch: 5,
            ..TreeParams::default()
        };
        let t = generate_tree(3, &p).unwrap();
        // leader + 3 side branches, then 3 children for each of those 4.
        assert_eq!(t.branches.len(), 1 + 3 + 12);
        assert_eq!(t.leaves.len(), 12 * 5);
    }

    #[test]
    fn trunk_length_mean_near_midpoint() {
        let p = TreeParams {
            branch_levels: 0,
            ..TreeParams::default()
        };
        let mut sum = 0.0;
        for seed in 0..1000u64 {
            let t = generate_tree(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15), &p).unwrap();
            assert!((4.0..=8.0).contains(&t.trunk_length_m));
            sum += t.trunk_length_m;
        }
        // Uniform on [4, 8]: sd of the mean over 1000 draws is 0.037.
        assert!((sum / 1000.0 - 6.0).abs() < 0.2);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = TreeParams {
            trunk_length_range_m: Interval::new(4.0, 21.0),
            ..TreeParams::default()
        };
        assert!(matches!(generate_tree(0, &p), Err(Error::Param(_))));
        let p = TreeParams {
            height_range_m: Interval::new(25.0, 20.0),
            ..TreeParams::default()
        };
        assert!(generate_tree(0, &p).is_err());
        let p = TreeParams {
            trunk_radius_range_m: Interval::new(-0.1, 0.2),
            ..TreeParams::default()
        };
        assert!(generate_tree(0, &p).is_err());
    }

    #[test]
    fn forest_tree_counts() {
        let p = TreeParams {
            branch_levels: 0,
            ..TreeParams::default()
        };
        let ext = Rect::centered(150.0, 150.0);
        let f = generate_forest(1, DensityClass::Sparse, ext, &p, 2.0).unwrap();
        assert_eq!(f.trees.len(), 299);
        let f = generate_forest(1, DensityClass::Dense, ext, &p, 2.0).unwrap();
        assert_eq!(f.trees.len(), 900);
        let f = generate_forest(1, DensityClass::Custom(0.0), ext, &p, 2.0).unwrap();
        assert!(f.trees.is_empty());
        assert!(generate_forest(1, DensityClass::Custom(-1.0), ext, &p, 2.0).is_err());
    }

    #[test]
    fn impossible_spacing_fails() {
        let p = TreeParams {
            branch_levels: 0,
            ..TreeParams::default()
        };
        let ext = Rect::centered(10.0, 10.0);
        // 100 trees at 5 m spacing cannot fit in 100 m².
        let err = generate_forest(1, DensityClass::Custom(100_000.0), ext, &p, 5.0);
        assert!(matches!(err, Err(Error::Param(_))));
    }

    #[test]
    fn stats_two_points() {
        let f = bare_forest(&[(0.0, 0.0, 6.0), (0.0, 6.0, 8.0)]);
        let s = forest_stats(&f).unwrap();
        assert_eq!(s.d_t_m, 6.0);
        assert_eq!(s.h_t_m, 7.0);
        assert_eq!(s.trees_per_ha, 2.0);
    }

    #[test]
    fn stats_one_tree_fails() {
        let f = bare_forest(&[(0.0, 0.0, 6.0)]);
        assert!(matches!(forest_stats(&f), Err(Error::Stats(_))));
    }

    #[test]
    fn density_parsing() {
        assert_eq!("dense".parse::<DensityClass>().unwrap(), DensityClass::Dense);
        assert_eq!(
            "custom:50".parse::<DensityClass>().unwrap(),
            DensityClass::Custom(50.0)
        );
        assert_eq!("0".parse::<DensityClass>().unwrap(), DensityClass::Custom(0.0));
        assert!("thick".parse::<DensityClass>().is_err());
    }
}
