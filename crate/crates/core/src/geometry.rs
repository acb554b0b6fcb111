//! Test curves, panel quadrature, QBX center placement, refinement and
//! target association.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::expansions::ComplexPoint;

pub const MAX_GL_NODES: usize = 128;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("starfish arm count must be at least 1")]
    InvalidArmCount,
    #[error("Gauss-Legendre node count {0} outside 1..={MAX_GL_NODES}")]
    InvalidNodeCount(usize),
    #[error("panel count must be at least 1")]
    NoPanels,
    #[error("curve speed vanishes at t = {t}")]
    DegenerateParametrization { t: f64 },
    #[error("cannot downsample from {from} to {to} nodes per panel")]
    Downsample { from: usize, to: usize },
    #[error("density has {found} values, discretization has {expected} nodes")]
    DensityLength { expected: usize, found: usize },
    #[error("refinement did not converge after {} passes: {} violating panels remain", .0.passes, .0.violations.last().copied().unwrap_or(0))]
    RefinementIncomplete(RefineReport),
}

/// Which side of the curve a center (or target) lies on. The curve is
/// positively oriented, so `Interior` is opposite the outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Side {
    Interior,
    Exterior,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Interior => -1.0,
            Side::Exterior => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Interior => "interior",
            Side::Exterior => "exterior",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveShape {
    /// `(1 + 0.8 sin(2 pi n t)) (cos 2 pi t, sin 2 pi t)`
    Starfish { arms: u32 },
    Circle { radius: f64 },
}

/// Smooth closed curve parametrized over `[0, 1]`, counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curve {
    pub shape: CurveShape,
}

impl Curve {
    pub fn circle(radius: f64) -> Self {
        Self {
            shape: CurveShape::Circle { radius },
        }
    }

    pub fn position(&self, t: f64) -> ComplexPoint {
        match self.shape {
            CurveShape::Starfish { arms } => {
                let rho = 1.0 + 0.8 * (TAU * arms as f64 * t).sin();
                Complex64::from_polar(rho, TAU * t)
            }
            CurveShape::Circle { radius } => Complex64::from_polar(radius, TAU * t),
        }
    }

    pub fn derivative(&self, t: f64) -> ComplexPoint {
        match self.shape {
            CurveShape::Starfish { arms } => {
                let n = arms as f64;
                let rho = 1.0 + 0.8 * (TAU * n * t).sin();
                let drho = 0.8 * TAU * n * (TAU * n * t).cos();
                let dir = Complex64::from_polar(1.0, TAU * t);
                dir * drho + dir * Complex64::new(0.0, TAU * rho)
            }
            CurveShape::Circle { radius } => Complex64::from_polar(radius * TAU, TAU * t) * Complex64::new(0.0, 1.0),
        }
    }

    /// Outward unit normal: the unit tangent rotated clockwise.
    pub fn normal(&self, t: f64) -> ComplexPoint {
        let d = self.derivative(t);
        let tangent = d / d.norm();
        Complex64::new(tangent.im, -tangent.re)
    }
}

/// The `n`-armed starfish curve.
pub fn starfish(n: u32) -> Result<Curve, GeometryError> {
    if n < 1 {
        return Err(GeometryError::InvalidArmCount);
    }
    Ok(Curve {
        shape: CurveShape::Starfish { arms: n },
    })
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>), GeometryError> {
    if !(1..=MAX_GL_NODES).contains(&n) {
        return Err(GeometryError::InvalidNodeCount(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeRecord {
    pub position: ComplexPoint,
    pub normal: ComplexPoint,
    /// Quadrature weight including the arc-length element.
    pub weight: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub t0: f64,
    pub t1: f64,
    pub nodes: Vec<NodeRecord>,
    /// Quadrature-approximated arc length.
    pub length: f64,
}

/// Panel-wise Gauss-Legendre discretization of a closed curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub curve: Curve,
    pub panels: Vec<Panel>,
    pub nodes_per_panel: usize,
    pub upsampled: bool,
}

impl Discretization {
    /// Discretizes `curve` over the given parameter intervals.
    pub fn from_intervals(
        curve: Curve,
        intervals: &[(f64, f64)],
        nodes_per_panel: usize,
    ) -> Result<Self, GeometryError> {
        if intervals.is_empty() {
            return Err(GeometryError::NoPanels);
        }
        let (ref_nodes, ref_weights) = gauss_legendre(nodes_per_panel)?;
        let mut panels = Vec::with_capacity(intervals.len());
        for &(t0, t1) in intervals {
            let half = 0.5 * (t1 - t0);
            let mid = 0.5 * (t1 + t0);
            let mut nodes = Vec::with_capacity(nodes_per_panel);
            for (x, w) in ref_nodes.iter().zip(&ref_weights) {
                let t = mid + half * x;
                let d = curve.derivative(t);
                let speed = d.norm();
                if !(speed > 1e-300) {
                    return Err(GeometryError::DegenerateParametrization { t });
                }
                nodes.push(NodeRecord {
                    position: curve.position(t),
                    normal: Complex64::new(d.im / speed, -d.re / speed),
                    weight: w * speed * half,
                    t,
                });
            }
            let length = nodes.iter().map(|n| n.weight).sum();
            panels.push(Panel { t0, t1, nodes, length });
        }
        Ok(Self {
            curve,
            panels,
            nodes_per_panel,
            upsampled: false,
        })
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.panels.iter().map(|p| (p.t0, p.t1)).collect()
    }

    pub fn node_count(&self) -> usize {
        self.panels.len() * self.nodes_per_panel
    }

    /// All nodes in panel order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> + '_ {
        self.panels.iter().flat_map(|p| p.nodes.iter())
    }

    /// `(panel index, node)` pairs in panel order.
    pub fn nodes_with_panel(&self) -> impl Iterator<Item = (usize, &NodeRecord)> + '_ {
        self.panels
            .iter()
            .enumerate()
            .flat_map(|(k, p)| p.nodes.iter().map(move |n| (k, n)))
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes().map(|n| n.weight).sum()
    }

    /// Whether panels `a` and `b` are equal or neighbors along the closed curve.
    pub fn panels_touch(&self, a: usize, b: usize) -> bool {
        let n = self.panels.len();
        let d = a.abs_diff(b);
        d <= 1 || d == n - 1
    }

    /// Writes one CSV row per node: `panel_id,t,x,y,nx,ny,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "panel_id,t,x,y,nx,ny,weight")?;
        for (k, n) in self.nodes_with_panel() {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                k, n.t, n.position.re, n.position.im, n.normal.re, n.normal.im, n.weight
            )?;
        }
        Ok(())
    }
}

/// `num_panels` parameter-equispaced panels with `nodes_per_panel` nodes each.
pub fn discretize(curve: Curve, num_panels: usize, nodes_per_panel: usize) -> Result<Discretization, GeometryError> {
    if num_panels == 0 {
        return Err(GeometryError::NoPanels);
    }
    let intervals: Vec<(f64, f64)> = (0..num_panels)
        .map(|k| (k as f64 / num_panels as f64, (k + 1) as f64 / num_panels as f64))
        .collect();
    Discretization::from_intervals(curve, &intervals, nodes_per_panel)
}

/// Re-discretizes every panel at `p_quad` nodes, evaluating the geometry
/// from the exact parametrization.
pub fn upsample(disc: &Discretization, p_quad: usize) -> Result<Discretization, GeometryError> {
    if p_quad < disc.nodes_per_panel {
        return Err(GeometryError::Downsample {
            from: disc.nodes_per_panel,
            to: p_quad,
        });
    }
    if p_quad == disc.nodes_per_panel {
        let mut out = disc.clone();
        out.upsampled = true;
        return Ok(out);
    }
    let mut out = Discretization::from_intervals(disc.curve, &disc.intervals(), p_quad)?;
    out.upsampled = true;
    Ok(out)
}

/// Interpolates per-node values of `disc` onto `p_quad` Gauss-Legendre nodes
/// per panel, panel by panel.
pub fn upsample_density(disc: &Discretization, density: &[f64], p_quad: usize) -> Result<Vec<f64>, GeometryError> {
    let n = disc.nodes_per_panel;
    if density.len() != disc.node_count() {
        return Err(GeometryError::DensityLength {
            expected: disc.node_count(),
            found: density.len(),
        });
    }
    if p_quad < n {
        return Err(GeometryError::Downsample { from: n, to: p_quad });
    }
    if p_quad == n {
        return Ok(density.to_vec());
    }
    let (src, _) = gauss_legendre(n)?;
    let (dst, _) = gauss_legendre(p_quad)?;
    let bary: Vec<f64> = (0..n)
        .map(|j| {
            1.0 / (0..n)
                .filter(|&k| k != j)
                .map(|k| src[j] - src[k])
                .product::<f64>()
        })
        .collect();
    // interpolation matrix, p_quad x n
    let matrix: Vec<Vec<f64>> = dst
        .iter()
        .map(|&x| {
            if let Some(j) = src.iter().position(|&s| s == x) {
                let mut row = vec![0.0; n];
                row[j] = 1.0;
                return row;
            }
            let terms: Vec<f64> = (0..n).map(|j| bary[j] / (x - src[j])).collect();
            let total: f64 = terms.iter().sum();
            terms.into_iter().map(|v| v / total).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(disc.panels.len() * p_quad);
    for panel_vals in density.chunks(n) {
        for row in &matrix {
            out.push(row.iter().zip(panel_vals).map(|(a, b)| a * b).sum());
        }
    }
    Ok(out)
}

/// A QBX expansion center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbxCenter {
    pub center: ComplexPoint,
    pub radius: f64,
    pub side: Side,
    pub panel: usize,
    /// Index of the node (in the target discretization) the center was placed for.
    pub node: usize,
}

/// Two centers per node at `node -/+ (h_k / 2) normal`; center `2i` is the
/// interior center of node `i`, `2i + 1` the exterior one.
pub fn place_centers(disc: &Discretization) -> Vec<QbxCenter> {
    let mut centers = Vec::with_capacity(2 * disc.node_count());
    for (node, (panel, rec)) in disc.nodes_with_panel().enumerate() {
        let radius = 0.5 * disc.panels[panel].length;
        for side in [Side::Interior, Side::Exterior] {
            centers.push(QbxCenter {
                center: rec.position + rec.normal * (side.sign() * radius),
                radius,
                side,
                panel,
                node,
            });
        }
    }
    centers
}

/// Writes `center_id,cx,cy,r,side,panel_id`.
pub fn write_centers_csv<W: Write>(centers: &[QbxCenter], mut out: W) -> io::Result<()> {
    writeln!(out, "center_id,cx,cy,r,side,panel_id")?;
    for (i, c) in centers.iter().enumerate() {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{},{}",
            i,
            c.center.re,
            c.center.im,
            c.radius,
            c.side.as_str(),
            c.panel
        )?;
    }
    Ok(())
}

/// Uniform bucket grid for neighborhood queries.
#[derive(Debug)]
pub struct PointGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl PointGrid {
    pub fn new<I: IntoIterator<Item = ComplexPoint>>(points: I, cell: f64) -> Self {
        let cell = if cell > 0.0 && cell.is_finite() { cell } else { 1.0 };
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.into_iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: ComplexPoint, cell: f64) -> (i64, i64) {
        ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64)
    }

    /// Indices of all points in buckets overlapping the square of half-width
    /// `half` about `center`. Callers filter exactly.
    pub fn candidates(&self, center: ComplexPoint, half: f64) -> impl Iterator<Item = usize> + '_ {
        let lo = Self::key(center - Complex64::new(half, half), self.cell);
        let hi = Self::key(center + Complex64::new(half, half), self.cell);
        (lo.0..=hi.0)
            .flat_map(move |i| (lo.1..=hi.1).map(move |j| (i, j)))
            .filter_map(|k| self.buckets.get(&k))
            .flat_map(|v| v.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RefineReport {
    /// Refinement passes that bisected at least one panel.
    pub passes: usize,
    /// Violating panel count observed at the start of each pass, ending with
    /// the count for the returned discretization.
    pub violations: Vec<usize>,
    pub panels: usize,
}

#[derive(Debug, Clone)]
pub struct Refined {
    pub disc: Discretization,
    pub centers: Vec<QbxCenter>,
    pub report: RefineReport,
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return 1.0;
    }
    let mid = v.len() / 2;
    *v.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// Panels violating either refinement criterion, sorted ascending.
///
/// Disk check: an upsampled node of a panel that neither is nor neighbors a
/// center's own panel lies strictly inside that center's disk; the center's
/// panel is flagged. Resolution check: a panel is more than twice as long as
/// another panel having a node within its own length of one of its nodes,
/// and more than twice as long in parameter space; the longer panel is
/// flagged.
pub fn refinement_violations(disc: &Discretization, p_quad: usize) -> Result<Vec<usize>, GeometryError> {
    let fine = upsample(disc, p_quad)?;
    let centers = place_centers(disc);
    let mut flagged = vec![false; disc.panels.len()];

    let fine_nodes: Vec<(usize, ComplexPoint)> = fine.nodes_with_panel().map(|(k, n)| (k, n.position)).collect();
    let grid = PointGrid::new(fine_nodes.iter().map(|n| n.1), median(centers.iter().map(|c| c.radius)));
    for c in &centers {
        if flagged[c.panel] {
            continue;
        }
        let hit = grid.candidates(c.center, c.radius).any(|j| {
            let (k, p) = fine_nodes[j];
            !disc.panels_touch(k, c.panel) && (p - c.center).norm() < c.radius
        });
        if hit {
            flagged[c.panel] = true;
        }
    }

    let base_nodes: Vec<(usize, ComplexPoint)> = disc.nodes_with_panel().map(|(k, n)| (k, n.position)).collect();
    let grid = PointGrid::new(base_nodes.iter().map(|n| n.1), median(disc.panels.iter().map(|p| p.length)));
    for (k, panel) in disc.panels.iter().enumerate() {
        if flagged[k] {
            continue;
        }
        let h = panel.length;
        let dt = panel.t1 - panel.t0;
        'nodes: for node in &panel.nodes {
            for j in grid.candidates(node.position, h) {
                let (m, p) = base_nodes[j];
                let other = &disc.panels[m];
                if m != k
                    && h > 2.0 * other.length
                    && dt > 2.0 * (other.t1 - other.t0)
                    && (p - node.position).norm() <= h
                {
                    flagged[k] = true;
                    break 'nodes;
                }
            }
        }
    }
    Ok(flagged.iter().enumerate().filter(|(_, &f)| f).map(|(k, _)| k).collect())
}

/// Bisects violating panels (in parameter space) until neither refinement
/// criterion is violated, then re-places centers.
pub fn refine(disc: &Discretization, max_iters: usize, p_quad: usize) -> Result<Refined, GeometryError> {
    let mut current = disc.clone();
    let mut violations = Vec::new();
    let mut passes = 0;
    loop {
        let bad = refinement_violations(&current, p_quad)?;
        violations.push(bad.len());
        if bad.is_empty() {
            let centers = place_centers(&current);
            let panels = current.panels.len();
            return Ok(Refined {
                disc: current,
                centers,
                report: RefineReport {
                    passes,
                    violations,
                    panels,
                },
            });
        }
        if passes == max_iters {
            return Err(GeometryError::RefinementIncomplete(RefineReport {
                passes,
                violations,
                panels: current.panels.len(),
            }));
        }
        let mut intervals = Vec::with_capacity(current.panels.len() + bad.len());
        let mut bad_iter = bad.iter().peekable();
        for (k, p) in current.panels.iter().enumerate() {
            if bad_iter.peek() == Some(&&k) {
                bad_iter.next();
                let mid = 0.5 * (p.t0 + p.t1);
                intervals.push((p.t0, mid));
                intervals.push((mid, p.t1));
            } else {
                intervals.push((p.t0, p.t1));
            }
        }
        current = Discretization::from_intervals(current.curve, &intervals, current.nodes_per_panel)?;
        passes += 1;
    }
}

/// A point at which the potential is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPoint {
    pub position: ComplexPoint,
    /// Preferred side for QBX evaluation; `None` accepts either.
    pub side: Option<Side>,
    /// Set for on-surface targets: index of the node the target sits on.
    pub on_surface_node: Option<usize>,
}

impl TargetPoint {
    pub fn volume(position: ComplexPoint, side: Option<Side>) -> Self {
        Self {
            position,
            side,
            on_surface_node: None,
        }
    }

    /// On-surface target at node `node` of `disc`, evaluated as the limit from `side`.
    pub fn on_surface(disc: &Discretization, node: usize, side: Side) -> Self {
        let n = disc.nodes_per_panel;
        let rec = disc.panels[node / n].nodes[node % n];
        Self {
            position: rec.position,
            side: Some(side),
            on_surface_node: Some(node),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Association {
    /// Evaluated through the QBX expansion of this center.
    Center(usize),
    /// Far enough from the curve for plain quadrature.
    PointEval,
    /// Needs QBX but no center disk (with slack) covers it.
    Unassociated,
}

/// Associates each target with a QBX center.
///
/// On-surface targets take their own node's center on the requested side.
/// Other targets count as near the curve when some upsampled source node lies
/// within one panel length of them; near targets take the nearest center on
/// a matching side with `|target - c| <= slack * r` (ties to the lower index).
pub fn associate_targets(
    targets: &[TargetPoint],
    centers: &[QbxCenter],
    sources: &Discretization,
    slack: f64,
) -> Vec<Association> {
    let max_r = centers.iter().map(|c| c.radius).fold(0.0, f64::max);
    let center_grid = PointGrid::new(centers.iter().map(|c| c.center), max_r.max(f64::MIN_POSITIVE));
    let src_nodes: Vec<(usize, ComplexPoint)> = sources.nodes_with_panel().map(|(k, n)| (k, n.position)).collect();
    let max_len = sources.panels.iter().map(|p| p.length).fold(0.0, f64::max);
    let src_grid = PointGrid::new(src_nodes.iter().map(|n| n.1), max_len.max(f64::MIN_POSITIVE));

    targets
        .iter()
        .map(|t| {
            if let Some(node) = t.on_surface_node {
                let side = t.side.unwrap_or(Side::Interior);
                let slot = 2 * node + usize::from(side == Side::Exterior);
                let idx = centers
                    .get(slot)
                    .filter(|c| c.node == node && c.side == side)
                    .map(|_| slot)
                    .or_else(|| centers.iter().position(|c| c.node == node && c.side == side))
                    .or_else(|| centers.iter().position(|c| c.node == node));
                return idx.map_or(Association::Unassociated, Association::Center);
            }
            let near = src_grid.candidates(t.position, max_len).any(|j| {
                let (k, p) = src_nodes[j];
                (p - t.position).norm() < sources.panels[k].length
            });
            if !near {
                return Association::PointEval;
            }
            let mut best: Option<(f64, usize)> = None;
            for i in center_grid.candidates(t.position, slack * max_r) {
                let c = &centers[i];
                if t.side.is_some_and(|s| s != c.side) {
                    continue;
                }
                let d = (t.position - c.center).norm();
                if d <= slack * c.radius {
                    let better = match best {
                        None => true,
                        Some((bd, bi)) => d < bd || (d == bd && i < bi),
                    };
                    if better {
                        best = Some((d, i));
                    }
                }
            }
            best.map_or(Association::Unassociated, |(_, i)| Association::Center(i))
        })
        .collect()
}
