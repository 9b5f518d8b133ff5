//! Immutable, ray-queryable scene built from a forest.
//!
//! Primitives live in a flat bounding-volume hierarchy (binned SAH build,
//! any-hit traversal). The ground is the plane z = 0 and is never itself an
//! occluder.

use glam::{DVec2, DVec3};

use crate::forest::Forest;
use crate::geometry::{Aabb, Cylinder, Primitive, Rect};

/// Segment end points are inset by this distance before testing primitives.
pub const SEGMENT_EPS: f64 = 1e-4;

const LEAF_SIZE: usize = 4;
const SAH_BINS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: DVec3,
    pub direction: DVec3,
    pub t_max: f64,
}

impl Ray {
    /// Ray from `from` towards `to`; `None` when the points coincide.
    pub fn between(from: DVec3, to: DVec3) -> Option<Ray> {
        let delta = to - from;
        let len = delta.length();
        (len > 0.0).then(|| Ray {
            origin: from,
            direction: delta / len,
            t_max: len,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive index. Interior: index of the right child (the
    /// left child immediately follows its parent).
    offset: u32,
    /// Primitive count for leaves, 0 for interior nodes.
    count: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
}

struct BuildItem {
    bounds: Aabb,
    centroid: DVec3,
    index: usize,
}

impl Bvh {
    /// Builds over `primitives`, returning the hierarchy and the permutation
    /// that orders primitives by leaf.
    fn build(primitives: &[Primitive]) -> (Bvh, Vec<usize>) {
        let mut items: Vec<BuildItem> = primitives
            .iter()
            .enumerate()
            .map(|(index, p)| {
                let bounds = p.bounds();
                BuildItem {
                    bounds,
                    centroid: bounds.center(),
                    index,
                }
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * primitives.len() / LEAF_SIZE + 1);
        if !items.is_empty() {
            let len = items.len();
            build_recursive(&mut items, 0, len, &mut nodes);
        }
        let order = items.iter().map(|i| i.index).collect();
        (Bvh { nodes }, order)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Visits every primitive whose leaf box the ray interval touches; stops
    /// as soon as `visit` returns true. Returns whether it stopped early.
    #[inline]
    fn traverse(&self, ray: &Ray, t_min: f64, t_max: f64, mut visit: impl FnMut(usize) -> bool) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let inv = ray.direction.recip();
        let mut stack = [0u32; 128];
        let mut sp = 1usize;
        stack[0] = 0;
        while sp > 0 {
            sp -= 1;
            let idx = stack[sp] as usize;
            let node = &self.nodes[idx];
            if !node.bounds.hit(ray.origin, inv, t_min, t_max) {
                continue;
            }
            if node.count > 0 {
                let start = node.offset as usize;
                for i in start..start + node.count as usize {
                    if visit(i) {
                        return true;
                    }
                }
            } else {
                stack[sp] = node.offset;
                stack[sp + 1] = idx as u32 + 1;
                sp += 2;
            }
        }
        false
    }
}

fn build_recursive(items: &mut [BuildItem], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let slice = &mut items[start..end];
    let bounds = slice.iter().fold(Aabb::EMPTY, |acc, i| acc.union(&i.bounds));
    let node_idx = nodes.len();
    nodes.push(Node {
        bounds,
        offset: start as u32,
        count: (end - start) as u32,
    });
    if slice.len() <= LEAF_SIZE {
        return node_idx;
    }

    let centroid_bounds = slice.iter().fold(Aabb::EMPTY, |acc, i| Aabb {
        min: acc.min.min(i.centroid),
        max: acc.max.max(i.centroid),
    });
    let extent = centroid_bounds.max - centroid_bounds.min;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let lo = centroid_bounds.min[axis];
    let span = extent[axis];

    let mid = if span <= 0.0 {
        slice.len() / 2
    } else {
        // Binned surface area heuristic along the widest centroid axis.
        let bin_of = |c: f64| (((c - lo) / span * SAH_BINS as f64) as usize).min(SAH_BINS - 1);
        let mut bin_bounds = [Aabb::EMPTY; SAH_BINS];
        let mut bin_count = [0usize; SAH_BINS];
        for it in slice.iter() {
            let b = bin_of(it.centroid[axis]);
            bin_bounds[b] = bin_bounds[b].union(&it.bounds);
            bin_count[b] += 1;
        }
        let mut best = (f64::INFINITY, SAH_BINS / 2);
        for split in 1..SAH_BINS {
            let (mut lb, mut lc) = (Aabb::EMPTY, 0);
            for b in 0..split {
                lb = lb.union(&bin_bounds[b]);
                lc += bin_count[b];
            }
            let (mut rb, mut rc) = (Aabb::EMPTY, 0);
            for b in split..SAH_BINS {
                rb = rb.union(&bin_bounds[b]);
                rc += bin_count[b];
            }
            if lc == 0 || rc == 0 {
                continue;
            }
            let cost = lb.surface_area() * lc as f64 + rb.surface_area() * rc as f64;
            if cost < best.0 {
                best = (cost, split);
            }
        }
        let split = best.1;
        let mut i = 0;
        let mut j = slice.len();
        while i < j {
            if bin_of(slice[i].centroid[axis]) < split {
                i += 1;
            } else {
                j -= 1;
                slice.swap(i, j);
            }
        }
        if i == 0 || i == slice.len() {
            slice.len() / 2
        } else {
            i
        }
    };
    nodes[node_idx].count = 0;
    build_recursive(items, start, start + mid, nodes);
    let right = build_recursive(items, start + mid, end, nodes);
    nodes[node_idx].offset = right as u32;
    node_idx
}

/// Forest occluders in world coordinates plus their acceleration index.
#[derive(Debug, Clone)]
pub struct Scene {
    primitives: Vec<Primitive>,
    bvh: Bvh,
    extent: Rect,
    top_z: f64,
}

pub const GROUND_Z: f64 = 0.0;

impl Scene {
    pub fn from_primitives(primitives: Vec<Primitive>, extent: Rect) -> Scene {
        let (bvh, order) = Bvh::build(&primitives);
        let primitives: Vec<Primitive> = order.into_iter().map(|i| primitives[i]).collect();
        let top_z = primitives
            .iter()
            .map(|p| p.bounds().max.z)
            .fold(f64::NEG_INFINITY, f64::max);
        Scene {
            primitives,
            bvh,
            extent,
            top_z,
        }
    }

    /// One bare trunk at the origin: radius 0.3 m, 6 m tall.
    pub fn single_trunk(extent: Rect) -> Scene {
        Scene::from_primitives(
            vec![Primitive::Cylinder(Cylinder {
                base: DVec3::ZERO,
                top: DVec3::new(0.0, 0.0, 6.0),
                radius: 0.3,
            })],
            extent,
        )
    }

    pub fn empty(extent: Rect) -> Scene {
        Scene::from_primitives(Vec::new(), extent)
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn primitive_count(&self) -> usize {
        self.primitives.len()
    }

    pub fn extent(&self) -> Rect {
        self.extent
    }

    pub fn ground_z(&self) -> f64 {
        GROUND_Z
    }

    /// Highest point of any primitive; `-inf` for an empty scene.
    pub fn top_z(&self) -> f64 {
        self.top_z
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// True iff some primitive blocks the open segment between the two points.
    pub fn occluded(&self, from: DVec3, to: DVec3) -> bool {
        let Some(ray) = Ray::between(from, to) else {
            return false;
        };
        self.occluded_ray(&ray)
    }

    pub fn occluded_ray(&self, ray: &Ray) -> bool {
        let (t0, t1) = (SEGMENT_EPS, ray.t_max - SEGMENT_EPS);
        if t0 >= t1 {
            return false;
        }
        self.bvh.traverse(ray, t0, t1, |i| {
            self.primitives[i].intersects(ray.origin, ray.direction, t0, t1)
        })
    }

    /// Exhaustive reference for `occluded`: tests every primitive.
    pub fn occluded_linear(&self, from: DVec3, to: DVec3) -> bool {
        let Some(ray) = Ray::between(from, to) else {
            return false;
        };
        let (t0, t1) = (SEGMENT_EPS, ray.t_max - SEGMENT_EPS);
        t0 < t1
            && self
                .primitives
                .iter()
                .any(|p| p.intersects(ray.origin, ray.direction, t0, t1))
    }

    /// Indices of primitives whose leaf boxes the segment touches; a superset
    /// of the primitives it actually intersects.
    pub fn candidates(&self, from: DVec3, to: DVec3) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(ray) = Ray::between(from, to) {
            self.bvh.traverse(&ray, 0.0, ray.t_max, |i| {
                out.push(i);
                false
            });
        }
        out
    }

    /// True when a vertical line at `xy` is blocked anywhere above the ground.
    pub fn column_occluded(&self, xy: DVec2) -> bool {
        if self.primitives.is_empty() {
            return false;
        }
        let top = self.top_z + 1.0;
        self.occluded(xy.extend(top), xy.extend(GROUND_Z))
    }
}

/// Flattens every tree of the forest into world-space primitives.
pub fn build_scene(forest: &Forest) -> Scene {
    let mut primitives = Vec::with_capacity(forest.primitive_count());
    for placed in &forest.trees {
        let offset = placed.position.extend(GROUND_Z);
        let tree = &placed.tree;
        primitives.push(Primitive::Cylinder(tree.trunk).translated(offset));
        primitives.extend(
            tree.branches
                .iter()
                .map(|b| Primitive::Cylinder(*b).translated(offset)),
        );
        primitives.extend(tree.leaves.iter().map(|l| Primitive::Disc(*l).translated(offset)));
    }
    Scene::from_primitives(primitives, forest.extent)
}
