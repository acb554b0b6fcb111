//! Adaptive quadtree with target-confinement ownership.
//!
//! Box geometry is tracked in integer units (the half-width of a box at level
//! `max_depth`), so adjacency, colleague and box-box separation tests are
//! exact. Particle ownership uses half-open boxes.

use std::collections::{HashMap, VecDeque};
use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::expansions::ComplexPoint;

pub const DEFAULT_MAX_DEPTH: u32 = 40;
pub const MAX_DEPTH_LIMIT: u32 = 50;
const ROOT_PADDING: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("target confinement factor {0} outside [0, 1)")]
    InvalidConfinementFactor(f64),
    #[error("n_max must be at least 1")]
    InvalidNmax,
    #[error("max_depth {0} exceeds the supported limit of {MAX_DEPTH_LIMIT}")]
    DepthTooLarge(u32),
    #[error("particle {0} has a non-finite position or radius")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum ParticleKind {
    Source,
    Center,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub kind: ParticleKind,
    pub position: ComplexPoint,
    /// Expansion disk radius; zero unless `kind` is `Center`.
    pub radius: f64,
    /// Index into the array the particle came from.
    pub index: usize,
}

impl Particle {
    pub fn source(position: ComplexPoint, index: usize) -> Self {
        Self {
            kind: ParticleKind::Source,
            position,
            radius: 0.0,
            index,
        }
    }

    pub fn center(position: ComplexPoint, radius: f64, index: usize) -> Self {
        Self {
            kind: ParticleKind::Center,
            position,
            radius,
            index,
        }
    }

    pub fn target(position: ComplexPoint, index: usize) -> Self {
        Self {
            kind: ParticleKind::Target,
            position,
            radius: 0.0,
            index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeBox {
    pub id: usize,
    pub level: u32,
    /// Integer position among the `2^level x 2^level` boxes of its level.
    pub coords: (u64, u64),
    pub center: ComplexPoint,
    /// Half-width.
    pub radius: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Owned particles, as indices into `Tree::particles`.
    pub particles: Vec<usize>,
    /// Payload indices of owned particles, by kind.
    pub sources: Vec<usize>,
    pub centers: Vec<usize>,
    pub targets: Vec<usize>,
    pub is_leaf: bool,
    pub is_source_box: bool,
    pub is_target_box: bool,
    pub is_target_ancestor: bool,
    /// Sources owned by this box and its descendants.
    pub subtree_sources: usize,
}

#[derive(Debug, Clone)]
pub struct Tree {
    /// Boxes in breadth-first (hence level) order; box 0 is the root.
    pub boxes: Vec<TreeBox>,
    pub particles: Vec<Particle>,
    pub root_center: ComplexPoint,
    pub root_radius: f64,
    pub t_f: f64,
    pub n_max: usize,
    pub max_depth: u32,
    pub level_restricted: bool,
    /// Leaves that stayed over-full because the depth cap was reached.
    pub depth_capped: Vec<usize>,
    /// Box ids per level.
    pub levels: Vec<Vec<usize>>,
    index: HashMap<(u32, u64, u64), usize>,
}

struct Node {
    level: u32,
    ix: u64,
    iy: u64,
    parent: Option<usize>,
    children: [Option<usize>; 4],
    particles: Vec<usize>,
}

struct Builder<'a> {
    particles: &'a [Particle],
    nodes: Vec<Node>,
    root_lo: Complex64,
    root_radius: f64,
    t_f: f64,
}

impl Builder<'_> {
    fn geometry(&self, level: u32, ix: u64, iy: u64) -> (Complex64, f64) {
        let half = self.root_radius / (1u64 << level) as f64;
        let c = self.root_lo + Complex64::new((2 * ix + 1) as f64 * half, (2 * iy + 1) as f64 * half);
        (c, half)
    }

    /// Quadrant a particle falls into and whether it may be owned there.
    fn placement(&self, node: usize, p: usize) -> (usize, bool) {
        let n = &self.nodes[node];
        let (c, _) = self.geometry(n.level, n.ix, n.iy);
        let part = &self.particles[p];
        let qx = (part.position.re >= c.re) as u64;
        let qy = (part.position.im >= c.im) as u64;
        let q = (qx + 2 * qy) as usize;
        if part.radius == 0.0 {
            return (q, true);
        }
        let (cc, ch) = self.geometry(n.level + 1, 2 * n.ix + qx, 2 * n.iy + qy);
        let d = (part.position.re - cc.re).abs().max((part.position.im - cc.im).abs());
        (q, d + part.radius <= ch * (1.0 + self.t_f))
    }

    fn eligible_count(&self, node: usize) -> usize {
        self.nodes[node]
            .particles
            .iter()
            .filter(|&&p| self.placement(node, p).1)
            .count()
    }

    fn child(&mut self, node: usize, q: usize) -> usize {
        if let Some(c) = self.nodes[node].children[q] {
            return c;
        }
        let n = &self.nodes[node];
        let child = Node {
            level: n.level + 1,
            ix: 2 * n.ix + (q as u64 & 1),
            iy: 2 * n.iy + (q as u64 >> 1),
            parent: Some(node),
            children: [None; 4],
            particles: Vec::new(),
        };
        self.nodes.push(child);
        let id = self.nodes.len() - 1;
        self.nodes[node].children[q] = Some(id);
        id
    }

    /// Moves eligible particles into children. With `all_children`, empty
    /// children are created as well.
    fn subdivide(&mut self, node: usize, all_children: bool) {
        if all_children {
            for q in 0..4 {
                self.child(node, q);
            }
        }
        let owned = std::mem::take(&mut self.nodes[node].particles);
        let mut kept = Vec::new();
        for p in owned {
            let (q, ok) = self.placement(node, p);
            if ok {
                let c = self.child(node, q);
                self.nodes[c].particles.push(p);
            } else {
                kept.push(p);
            }
        }
        self.nodes[node].particles = kept;
    }

    fn is_leaf(&self, node: usize) -> bool {
        self.nodes[node].children.iter().all(Option::is_none)
    }
}

/// Builds the quadtree.
///
/// Boxes owning more than `n_max` particles eligible for their children are
/// split; a center is eligible for a child only if its disk fits the child's
/// target confinement region, otherwise it stays with the box (it is
/// suspended). Empty children are pruned. With `level_restrict`, leaves are
/// split further until adjacent leaves differ by at most one level.
pub fn build_tree(
    particles: &[Particle],
    n_max: usize,
    t_f: f64,
    level_restrict: bool,
    max_depth: u32,
) -> Result<Tree, TreeError> {
    if !(0.0..1.0).contains(&t_f) {
        return Err(TreeError::InvalidConfinementFactor(t_f));
    }
    if n_max == 0 {
        return Err(TreeError::InvalidNmax);
    }
    if max_depth > MAX_DEPTH_LIMIT {
        return Err(TreeError::DepthTooLarge(max_depth));
    }
    let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, p) in particles.iter().enumerate() {
        if !(p.position.re.is_finite() && p.position.im.is_finite() && p.radius.is_finite()) {
            return Err(TreeError::NonFinite(i));
        }
        lo.re = lo.re.min(p.position.re - p.radius);
        lo.im = lo.im.min(p.position.im - p.radius);
        hi.re = hi.re.max(p.position.re + p.radius);
        hi.im = hi.im.max(p.position.im + p.radius);
    }
    let (root_center, root_radius) = if particles.is_empty() {
        (Complex64::new(0.0, 0.0), 1.0)
    } else {
        let c = (lo + hi) * 0.5;
        let half = 0.5 * (hi.re - lo.re).max(hi.im - lo.im);
        let half = if half > 0.0 { half } else { 1e-3 * (1.0 + c.norm()) };
        (c, half * (1.0 + ROOT_PADDING))
    };

    let mut b = Builder {
        particles,
        nodes: vec![Node {
            level: 0,
            ix: 0,
            iy: 0,
            parent: None,
            children: [None; 4],
            particles: (0..particles.len()).collect(),
        }],
        root_lo: root_center - Complex64::new(root_radius, root_radius),
        root_radius,
        t_f,
    };

    let mut depth_capped_nodes = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        if b.eligible_count(node) <= n_max {
            continue;
        }
        if b.nodes[node].level >= max_depth {
            depth_capped_nodes.push(node);
            continue;
        }
        b.subdivide(node, false);
        queue.extend(b.nodes[node].children.iter().flatten().copied());
    }

    if level_restrict {
        loop {
            let split = unbalanced_leaves(&b);
            if split.is_empty() {
                break;
            }
            for node in split {
                b.subdivide(node, true);
            }
        }
    }

    Ok(finish(b, n_max, max_depth, level_restrict, depth_capped_nodes, root_center))
}

/// Leaves with an adjacent leaf more than one level finer.
fn unbalanced_leaves(b: &Builder) -> Vec<usize> {
    let mut index = HashMap::new();
    for (i, n) in b.nodes.iter().enumerate() {
        index.insert((n.level, n.ix, n.iy), i);
    }
    let mut out = Vec::new();
    for (leaf, n) in b.nodes.iter().enumerate() {
        if !b.is_leaf(leaf) {
            continue;
        }
        let l = n.level;
        let size = 1i64 << l;
        let mut found = false;
        'outer: for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                let (x, y) = (n.ix as i64 + dx, n.iy as i64 + dy);
                if (dx, dy) == (0, 0) || x < 0 || y < 0 || x >= size || y >= size {
                    continue;
                }
                let Some(&nb) = index.get(&(l, x as u64, y as u64)) else {
                    continue;
                };
                let mut stack: Vec<usize> = b.nodes[nb].children.iter().flatten().copied().collect();
                while let Some(d) = stack.pop() {
                    let dn = &b.nodes[d];
                    if !int_adjacent((l, n.ix, n.iy), (dn.level, dn.ix, dn.iy)) {
                        continue;
                    }
                    if b.is_leaf(d) {
                        if dn.level > l + 1 {
                            found = true;
                            break 'outer;
                        }
                    } else {
                        stack.extend(dn.children.iter().flatten().copied());
                    }
                }
            }
        }
        if found {
            out.push(leaf);
        }
    }
    out
}

/// Closed-box adjacency (including containment) from level/coordinates.
fn int_adjacent(a: (u32, u64, u64), b: (u32, u64, u64)) -> bool {
    let top = a.0.max(b.0);
    let scale = |(l, x, y): (u32, u64, u64)| {
        let s = 1i64 << (top - l);
        ((2 * x as i64 + 1) * s, (2 * y as i64 + 1) * s, s)
    };
    let (ax, ay, ar) = scale(a);
    let (bx, by, br) = scale(b);
    (ax - bx).abs().max((ay - by).abs()) <= ar + br
}

fn finish(
    b: Builder,
    n_max: usize,
    max_depth: u32,
    level_restricted: bool,
    depth_capped_nodes: Vec<usize>,
    root_center: Complex64,
) -> Tree {
    let mut order = Vec::with_capacity(b.nodes.len());
    let mut queue = VecDeque::from([0usize]);
    while let Some(n) = queue.pop_front() {
        order.push(n);
        queue.extend(b.nodes[n].children.iter().flatten().copied());
    }
    let mut new_id = vec![0usize; b.nodes.len()];
    for (i, &n) in order.iter().enumerate() {
        new_id[n] = i;
    }

    let mut boxes: Vec<TreeBox> = order
        .iter()
        .enumerate()
        .map(|(id, &n)| {
            let node = &b.nodes[n];
            let (center, radius) = b.geometry(node.level, node.ix, node.iy);
            let mut particles = node.particles.clone();
            particles.sort_unstable();
            let of_kind = |k: ParticleKind| -> Vec<usize> {
                particles
                    .iter()
                    .filter(|&&p| b.particles[p].kind == k)
                    .map(|&p| b.particles[p].index)
                    .collect()
            };
            let sources = of_kind(ParticleKind::Source);
            let centers = of_kind(ParticleKind::Center);
            let targets = of_kind(ParticleKind::Target);
            TreeBox {
                id,
                level: node.level,
                coords: (node.ix, node.iy),
                center,
                radius,
                parent: node.parent.map(|p| new_id[p]),
                children: node.children.iter().flatten().map(|&c| new_id[c]).collect(),
                is_leaf: b.is_leaf(n),
                is_source_box: !sources.is_empty(),
                is_target_box: !centers.is_empty() || !targets.is_empty(),
                is_target_ancestor: false,
                subtree_sources: sources.len(),
                particles,
                sources,
                centers,
                targets,
            }
        })
        .collect();
    for b in &mut boxes {
        b.children.sort_unstable();
    }

    for i in (1..boxes.len()).rev() {
        let p = boxes[i].parent.expect("non-root box has a parent");
        boxes[p].subtree_sources += boxes[i].subtree_sources;
        if boxes[i].is_target_box || boxes[i].is_target_ancestor {
            boxes[p].is_target_ancestor = true;
        }
    }

    let nlevels = boxes.iter().map(|b| b.level as usize + 1).max().unwrap_or(1);
    let mut levels = vec![Vec::new(); nlevels];
    let mut index = HashMap::with_capacity(boxes.len());
    for bx in &boxes {
        levels[bx.level as usize].push(bx.id);
        index.insert((bx.level, bx.coords.0, bx.coords.1), bx.id);
    }
    let mut depth_capped: Vec<usize> = depth_capped_nodes.iter().map(|&n| new_id[n]).collect();
    depth_capped.sort_unstable();

    Tree {
        boxes,
        particles: b.particles.to_vec(),
        root_center,
        root_radius: b.root_radius,
        t_f: b.t_f,
        n_max,
        max_depth,
        level_restricted,
        depth_capped,
        levels,
        index,
    }
}

/// Closed axis-aligned square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Square {
    pub center: ComplexPoint,
    pub half_width: f64,
}

impl Square {
    pub fn contains_disk(&self, c: ComplexPoint, r: f64) -> bool {
        let d = (c.re - self.center.re).abs().max((c.im - self.center.im).abs());
        d + r <= self.half_width
    }

    pub fn contains_square(&self, other: &Square) -> bool {
        self.contains_disk(other.center, other.half_width)
    }
}

/// Target confinement region of a box: its square scaled by `1 + t_f`.
pub fn tcr(b: &TreeBox, t_f: f64) -> Square {
    Square {
        center: b.center,
        half_width: b.radius * (1.0 + t_f),
    }
}

pub fn linf(a: ComplexPoint, b: ComplexPoint) -> f64 {
    (a.re - b.re).abs().max((a.im - b.im).abs())
}

impl Tree {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn root(&self) -> &TreeBox {
        &self.boxes[0]
    }

    pub fn nlevels(&self) -> usize {
        self.levels.len()
    }

    pub fn find(&self, level: u32, ix: u64, iy: u64) -> Option<usize> {
        self.index.get(&(level, ix, iy)).copied()
    }

    /// Integer center and half-width in units of the finest possible box.
    fn units(&self, b: usize) -> (i64, i64, i64) {
        let bx = &self.boxes[b];
        let s = 1i64 << (self.max_depth.max(bx.level) - bx.level);
        ((2 * bx.coords.0 as i64 + 1) * s, (2 * bx.coords.1 as i64 + 1) * s, s)
    }

    fn unit_distance(&self, a: usize, b: usize) -> (i64, i64, i64) {
        let (ax, ay, ar) = self.units(a);
        let (bx, by, br) = self.units(b);
        ((ax - bx).abs().max((ay - by).abs()), ar, br)
    }

    /// Closed boxes touch or overlap (containment included).
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let (d, ra, rb) = self.unit_distance(a, b);
        d <= ra + rb
    }

    /// Interiors overlap.
    pub fn overlaps(&self, a: usize, b: usize) -> bool {
        let (d, ra, rb) = self.unit_distance(a, b);
        d < ra + rb
    }

    /// `a ≺ b`: center distance at least `3|a| + |b|`.
    pub fn sep_box_box(&self, a: usize, b: usize) -> bool {
        let (d, ra, rb) = self.unit_distance(a, b);
        d >= 3 * ra + rb
    }

    /// `a ≺ TCR(b)`: center distance at least `3|a| + |b|(1 + t_f)`.
    pub fn sep_box_tcr(&self, a: usize, b: usize) -> bool {
        let (d, ra, rb) = self.unit_distance(a, b);
        d as f64 >= 3.0 * ra as f64 + rb as f64 * (1.0 + self.t_f)
    }

    /// `TCR(a) ≺ b`: center distance at least `3|a|(1 + t_f) + |b|`.
    pub fn sep_tcr_box(&self, a: usize, b: usize) -> bool {
        let (d, ra, rb) = self.unit_distance(a, b);
        d as f64 >= 3.0 * ra as f64 * (1.0 + self.t_f) + rb as f64
    }

    /// Same-level boxes inside the k-near neighborhood, including `b`.
    pub fn k_colleagues(&self, b: usize, k: u32) -> Vec<usize> {
        let bx = &self.boxes[b];
        let size = 1i64 << bx.level;
        let k = k as i64;
        let mut out = Vec::new();
        for dy in -k..=k {
            for dx in -k..=k {
                let (x, y) = (bx.coords.0 as i64 + dx, bx.coords.1 as i64 + dy);
                if x < 0 || y < 0 || x >= size || y >= size {
                    continue;
                }
                if let Some(c) = self.find(bx.level, x as u64, y as u64) {
                    out.push(c);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_colleague(&self, a: usize, b: usize, k: u32) -> bool {
        let (d, ra, rb) = self.unit_distance(a, b);
        ra == rb && self.boxes[a].level == self.boxes[b].level && d <= 2 * k as i64 * ra
    }

    pub fn ancestors(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.boxes[b].parent, move |&p| self.boxes[p].parent)
    }

    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        self.boxes[a].level < self.boxes[b].level && self.ancestors(b).any(|x| x == a)
    }

    /// All strict descendants, in breadth-first order.
    pub fn descendants(&self, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut queue: VecDeque<usize> = self.boxes[b].children.iter().copied().collect();
        while let Some(d) = queue.pop_front() {
            out.push(d);
            queue.extend(self.boxes[d].children.iter().copied());
        }
        out
    }

    /// Leaves among `b` and its descendants.
    pub fn leaves_under(&self, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![b];
        while let Some(d) = stack.pop() {
            if self.boxes[d].is_leaf {
                out.push(d);
            } else {
                stack.extend(self.boxes[d].children.iter().copied());
            }
        }
        out.sort_unstable();
        out
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.boxes.iter().filter(|b| b.is_leaf).map(|b| b.id)
    }

    pub fn owner_of(&self) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.particles.len()];
        for b in &self.boxes {
            for &p in &b.particles {
                owner[p] = b.id;
            }
        }
        owner
    }

    /// Whether particle `p`, owned by `owner`, could not be handed to the
    /// child it lies in because its disk exceeds the child's TCR.
    pub fn is_suspended(&self, p: usize, owner: usize) -> bool {
        let part = &self.particles[p];
        if part.kind != ParticleKind::Center {
            return false;
        }
        let b = &self.boxes[owner];
        let half = 0.5 * b.radius;
        let cx = b.center.re + if part.position.re >= b.center.re { half } else { -half };
        let cy = b.center.im + if part.position.im >= b.center.im { half } else { -half };
        let d = linf(part.position, Complex64::new(cx, cy));
        d + part.radius > half * (1.0 + self.t_f)
    }

    /// Owned centers of `b` that are suspended.
    pub fn suspended_centers(&self, b: usize) -> Vec<usize> {
        self.boxes[b]
            .particles
            .iter()
            .copied()
            .filter(|&p| self.is_suspended(p, b))
            .collect()
    }

    /// Checks the structural invariants; returns one message per violation.
    pub fn verify(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut seen = vec![0usize; self.particles.len()];
        let slack = 1e-12 * self.root_radius;
        for b in &self.boxes {
            let sq = Square {
                center: b.center,
                half_width: b.radius + slack,
            };
            for &p in &b.particles {
                seen[p] += 1;
                let part = &self.particles[p];
                if !sq.contains_disk(part.position, 0.0) {
                    errs.push(format!("particle {p} lies outside owner box {}", b.id));
                }
                if part.radius > 0.0 && !tcr(b, self.t_f).contains_disk(part.position, part.radius - slack) {
                    errs.push(format!("center {p} disk escapes TCR of box {}", b.id));
                }
            }
            for &c in &b.children {
                let ch = &self.boxes[c];
                if ch.level != b.level + 1 || (ch.radius - 0.5 * b.radius).abs() > 1e-12 * b.radius {
                    errs.push(format!("child {c} of box {} has the wrong size", b.id));
                }
                if !self.is_ancestor(b.id, c) || !self.adjacent(b.id, c) || self.unit_distance(b.id, c).0 != self.units(c).2 {
                    errs.push(format!("child {c} not inside parent {}", b.id));
                }
            }
            let suspended = self.suspended_centers(b.id);
            for &p in &suspended {
                let r = self.particles[p].radius;
                if r <= 0.5 * self.t_f * b.radius {
                    errs.push(format!("suspended center {p} too small for box {}", b.id));
                }
                let reach = Square {
                    center: self.particles[p].position,
                    half_width: 8.0 * r / self.t_f,
                };
                let near = Square {
                    center: b.center,
                    half_width: 3.0 * b.radius,
                };
                if self.t_f > 0.0 && !reach.contains_square(&near) {
                    errs.push(format!("suspended center {p} does not cover the 1-near neighborhood of box {}", b.id));
                }
            }
            if b.is_leaf && b.particles.len() - suspended.len() > self.n_max && !self.depth_capped.contains(&b.id) {
                errs.push(format!("leaf {} over-full", b.id));
            }
        }
        for (p, &n) in seen.iter().enumerate() {
            if n != 1 {
                errs.push(format!("particle {p} owned {n} times"));
            }
        }
        errs.extend(self.check_large_leaf_count());
        if self.level_restricted {
            for a in self.leaves() {
                for b in self.leaves() {
                    if a < b
                        && self.adjacent(a, b)
                        && self.boxes[a].level.abs_diff(self.boxes[b].level) > 1
                    {
                        errs.push(format!("adjacent leaves {a} and {b} differ by more than one level"));
                    }
                }
            }
        }
        errs
    }

    /// At most 9 leaves at least as large as `b` overlap its 1-near neighborhood.
    fn check_large_leaf_count(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let leaves: Vec<usize> = self.leaves().collect();
        for b in &self.boxes {
            let count = leaves
                .iter()
                .filter(|&&d| {
                    let (dist, rb, rd) = self.unit_distance(b.id, d);
                    self.boxes[d].level <= b.level && dist < rd + 3 * rb
                })
                .count();
            if count > 9 {
                errs.push(format!("{count} large leaves overlap the 1-near neighborhood of box {}", b.id));
            }
        }
        errs
    }

    /// Diagnostic JSON dump, one object per box.
    pub fn write_json<W: Write>(&self, out: W) -> io::Result<()> {
        #[derive(serde::Serialize)]
        struct BoxDump {
            id: usize,
            level: u32,
            center: [f64; 2],
            radius: f64,
            parent: Option<usize>,
            children: Vec<usize>,
            sources: usize,
            centers: usize,
            targets: usize,
            suspended_centers: usize,
        }
        let dump: Vec<BoxDump> = self
            .boxes
            .iter()
            .map(|b| BoxDump {
                id: b.id,
                level: b.level,
                center: [b.center.re, b.center.im],
                radius: b.radius,
                parent: b.parent,
                children: b.children.clone(),
                sources: b.sources.len(),
                centers: b.centers.len(),
                targets: b.targets.len(),
                suspended_centers: self.suspended_centers(b.id).len(),
            })
            .collect();
        serde_json::to_writer_pretty(out, &dump).map_err(io::Error::other)
    }
}
