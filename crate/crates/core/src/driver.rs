//! Layer-potential evaluation: the tree-based fast algorithm and its direct
//! counterparts.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::expansions::{
    accumulate_l2l, accumulate_m2l, accumulate_p2l, accumulate_p2m, l_eval, m_eval, ComplexPoint, Expansion,
    ExpansionError, ExpansionKind, SourceCharge, MAX_ORDER,
};
use crate::geometry::{associate_targets, Association, Discretization, QbxCenter, TargetPoint};
use crate::ilists::{build_lists, far_to_close_demotion, InteractionLists};
use crate::tree::{build_tree, Particle, Tree, TreeError, DEFAULT_MAX_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Kernel {
    /// Single layer: `-(1/2pi) int mu(y) log|y - x| ds(y)`.
    Slp,
    /// Double layer: `-(1/2pi) int mu(y) n(y) . grad_y log|y - x| ds(y)`.
    Dlp,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Config {
    pub p_qbx: usize,
    pub p_fmm: usize,
    pub p_quad: usize,
    pub t_f: f64,
    pub n_max: usize,
    pub slack: f64,
    pub level_restrict: bool,
    pub demotion_threshold: usize,
    /// Results are always reproducible; kept so callers can record intent.
    pub deterministic: bool,
    pub max_depth: u32,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            p_qbx: 5,
            p_fmm: 15,
            p_quad: 33,
            t_f: 0.9,
            n_max: 64,
            slack: 1.0,
            level_restrict: false,
            demotion_threshold: 0,
            deterministic: true,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |msg: String| Err(DriverError::Config(msg));
        if self.p_qbx > MAX_ORDER || self.p_fmm > MAX_ORDER {
            return bad(format!("orders must not exceed {MAX_ORDER}"));
        }
        if !(0.0..1.0).contains(&self.t_f) {
            return bad(format!("t_f = {} outside [0, 1)", self.t_f));
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1".into());
        }
        if !(1..=crate::geometry::MAX_GL_NODES).contains(&self.p_quad) {
            return bad(format!("p_quad = {} outside 1..=128", self.p_quad));
        }
        if !(self.slack >= 1.0) {
            return bad(format!("slack = {} below 1", self.slack));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("density has {found} values, source discretization has {expected} nodes")]
    DensityLength { expected: usize, found: usize },
    #[error("{} near-surface targets have no QBX center: {:?}", .0.len(), .0)]
    Unassociated(Vec<usize>),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Interaction counts per stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct StageCounts {
    pub p2m_sources: usize,
    pub m2m: usize,
    pub list1_pairs: usize,
    pub m2l: usize,
    pub list3close_pairs: usize,
    pub list3far_evals: usize,
    pub list4close_pairs: usize,
    pub list4far_sources: usize,
    pub l2l: usize,
    pub center_l2l: usize,
    pub local_evals: usize,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct Diagnostics {
    pub n_sources: usize,
    pub n_centers: usize,
    pub n_active_centers: usize,
    pub n_point_targets: usize,
    pub n_qbx_targets: usize,
    pub n_boxes: usize,
    pub n_levels: usize,
    pub n_suspended: usize,
    pub stages: StageCounts,
}

#[derive(Debug, Clone)]
pub struct PotentialResult {
    pub potentials: Vec<f64>,
    pub associations: Vec<Association>,
    /// Final QBX local expansion per center; `None` for centers without
    /// associated targets.
    pub center_expansions: Vec<Option<Expansion>>,
    pub diagnostics: Diagnostics,
}

impl PotentialResult {
    /// Writes `target_id,x,y,potential,associated_center_id`.
    pub fn write_csv<W: Write>(&self, targets: &[TargetPoint], mut out: W) -> io::Result<()> {
        writeln!(out, "target_id,x,y,potential,associated_center_id")?;
        for (i, (t, pot)) in targets.iter().zip(&self.potentials).enumerate() {
            let center = match self.associations[i] {
                Association::Center(c) => c as i64,
                _ => -1,
            };
            writeln!(out, "{},{:.16e},{:.16e},{:.16e},{}", i, t.position.re, t.position.im, pot, center)?;
        }
        Ok(())
    }

    pub fn write_diagnostics<W: Write>(&self, out: W) -> io::Result<()> {
        serde_json::to_writer_pretty(out, &self.diagnostics).map_err(io::Error::other)
    }
}

/// Folds quadrature weights, density and the kernel prefactor into point
/// source strengths.
pub fn source_charges(sources: &Discretization, density: &[f64], kernel: Kernel) -> Result<Vec<SourceCharge>, DriverError> {
    if density.len() != sources.node_count() {
        return Err(DriverError::DensityLength {
            expected: sources.node_count(),
            found: density.len(),
        });
    }
    let scale = -1.0 / (2.0 * PI);
    Ok(sources
        .nodes()
        .zip(density)
        .map(|(n, &mu)| {
            let s = scale * n.weight * mu;
            match kernel {
                Kernel::Slp => SourceCharge::charge(n.position, s),
                Kernel::Dlp => SourceCharge::dipole(n.position, n.normal * s),
            }
        })
        .collect())
}

/// Sum of `|w_i mu_i|` over the source nodes.
pub fn density_mass(sources: &Discretization, density: &[f64]) -> f64 {
    sources.nodes().zip(density).map(|(n, mu)| (n.weight * mu).abs()).sum()
}

/// Plain quadrature of the layer potential at `targets`.
pub fn direct_potential(sources: &Discretization, density: &[f64], targets: &[ComplexPoint], kernel: Kernel) -> Result<Vec<f64>, DriverError> {
    let charges = source_charges(sources, density, kernel)?;
    Ok(targets
        .par_iter()
        .map(|&t| charges.iter().map(|s| s.potential_at(t)).sum())
        .collect())
}

/// Suggested FMM order for a target precision: `ceil(|log2 eps|)`.
pub fn orders_from_epsilon(epsilon: f64) -> Result<usize, DriverError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(DriverError::Config(format!("epsilon = {epsilon} outside (0, 1)")));
    }
    Ok(epsilon.log2().abs().ceil() as usize)
}

struct Prepared {
    charges: Vec<SourceCharge>,
    associations: Vec<Association>,
    /// Targets per center.
    center_targets: Vec<Vec<usize>>,
}

fn prepare(
    sources: &Discretization,
    density: &[f64],
    centers: &[QbxCenter],
    targets: &[TargetPoint],
    kernel: Kernel,
    config: &Config,
) -> Result<Prepared, DriverError> {
    config.validate()?;
    let charges = source_charges(sources, density, kernel)?;
    let associations = associate_targets(targets, centers, sources, config.slack);
    let unassociated: Vec<usize> = associations
        .iter()
        .enumerate()
        .filter(|(_, a)| **a == Association::Unassociated)
        .map(|(i, _)| i)
        .collect();
    if !unassociated.is_empty() {
        return Err(DriverError::Unassociated(unassociated));
    }
    let mut center_targets = vec![Vec::new(); centers.len()];
    for (t, a) in associations.iter().enumerate() {
        if let Association::Center(c) = a {
            center_targets[*c].push(t);
        }
    }
    Ok(Prepared {
        charges,
        associations,
        center_targets,
    })
}

fn finish_targets(
    prep: &Prepared,
    targets: &[TargetPoint],
    center_expansions: &[Option<Expansion>],
    point_values: impl Fn(usize) -> f64,
) -> Vec<f64> {
    targets
        .iter()
        .enumerate()
        .map(|(i, t)| match prep.associations[i] {
            Association::Center(c) => l_eval(center_expansions[c].as_ref().expect("active center"), t.position),
            _ => point_values(i),
        })
        .collect()
}

/// Unaccelerated QBX: every center's local expansion is formed from all
/// sources directly; far targets get plain quadrature.
pub fn direct_qbx_eval(
    sources: &Discretization,
    density: &[f64],
    centers: &[QbxCenter],
    targets: &[TargetPoint],
    kernel: Kernel,
    config: &Config,
) -> Result<PotentialResult, DriverError> {
    let prep = prepare(sources, density, centers, targets, kernel, config)?;
    let center_expansions: Vec<Option<Expansion>> = centers
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            if prep.center_targets[i].is_empty() {
                return Ok(None);
            }
            let mut e = Expansion::zeros(ExpansionKind::Local, c.center, config.p_qbx);
            accumulate_p2l(&mut e, &prep.charges)?;
            Ok(Some(e))
        })
        .collect::<Result<_, ExpansionError>>()?;
    let potentials = finish_targets(&prep, targets, &center_expansions, |i| {
        prep.charges.iter().map(|s| s.potential_at(targets[i].position)).sum()
    });
    let n_active = center_expansions.iter().filter(|e| e.is_some()).count();
    let n_qbx = prep.associations.iter().filter(|a| matches!(a, Association::Center(_))).count();
    Ok(PotentialResult {
        potentials,
        diagnostics: Diagnostics {
            n_sources: prep.charges.len(),
            n_centers: centers.len(),
            n_active_centers: n_active,
            n_point_targets: targets.len() - n_qbx,
            n_qbx_targets: n_qbx,
            ..Default::default()
        },
        associations: prep.associations,
        center_expansions,
    })
}

/// Tree, lists and the particle layout used by the fast evaluation.
pub struct EvalTree {
    pub tree: Tree,
    pub lists: InteractionLists,
}

/// Builds the tree over sources, all centers and point targets,
/// then the interaction lists (with far-to-close demotion if configured).
pub fn build_eval_tree(
    sources: &Discretization,
    centers: &[QbxCenter],
    point_targets: &[(usize, ComplexPoint)],
    config: &Config,
) -> Result<EvalTree, DriverError> {
    let mut particles: Vec<Particle> = sources
        .nodes()
        .enumerate()
        .map(|(i, n)| Particle::source(n.position, i))
        .collect();
    particles.extend(centers.iter().enumerate().map(|(i, c)| Particle::center(c.center, c.radius, i)));
    particles.extend(point_targets.iter().map(|&(i, p)| Particle::target(p, i)));
    let tree = build_tree(&particles, config.n_max, config.t_f, config.level_restrict, config.max_depth)?;
    let mut lists = build_lists(&tree);
    if config.demotion_threshold > 0 {
        lists = far_to_close_demotion(&lists, &tree, config.demotion_threshold);
    }
    Ok(EvalTree { tree, lists })
}

/// Per-box results of the near-field and List 3 far stages.
struct BoxTargets {
    points: Vec<(usize, f64)>,
    centers: Vec<(usize, Expansion)>,
}

/// Tree-accelerated QBX evaluation.
///
/// Box expansions use order `p_fmm`; every expansion formed at a QBX center
/// has order `p_qbx`, including the final shift of the box local.
pub fn gigaqbx_eval(
    sources: &Discretization,
    density: &[f64],
    centers: &[QbxCenter],
    targets: &[TargetPoint],
    kernel: Kernel,
    config: &Config,
) -> Result<PotentialResult, DriverError> {
    let prep = prepare(sources, density, centers, targets, kernel, config)?;
    let point_targets: Vec<(usize, ComplexPoint)> = targets
        .iter()
        .enumerate()
        .filter(|(i, _)| prep.associations[*i] == Association::PointEval)
        .map(|(i, t)| (i, t.position))
        .collect();
    let et = build_eval_tree(sources, centers, &point_targets, config)?;
    let (tree, lists) = (&et.tree, &et.lists);
    let charges = &prep.charges;
    let nb = tree.len();
    let (p_fmm, p_qbx) = (config.p_fmm, config.p_qbx);
    let mut counts = StageCounts::default();
    let active = |c: usize| !prep.center_targets[c].is_empty();

    let box_charges = |b: usize| -> Vec<SourceCharge> { tree.boxes[b].sources.iter().map(|&s| charges[s]).collect() };

    // multipoles, finest level first
    let mut multipoles: Vec<Option<Expansion>> = vec![None; nb];
    for level in tree.levels.iter().rev() {
        let formed: Vec<(usize, Expansion)> = level
            .par_iter()
            .filter(|&&b| tree.boxes[b].subtree_sources > 0)
            .map(|&b| {
                let bx = &tree.boxes[b];
                let mut m = Expansion::zeros(ExpansionKind::Multipole, bx.center, p_fmm);
                accumulate_p2m(&mut m, &box_charges(b));
                for &c in &bx.children {
                    if let Some(child) = &multipoles[c] {
                        m.add_assign(&crate::expansions::m2m(child, bx.center)?);
                    }
                }
                Ok((b, m))
            })
            .collect::<Result<_, ExpansionError>>()?;
        for (b, m) in formed {
            counts.p2m_sources += tree.boxes[b].sources.len();
            counts.m2m += tree.boxes[b].children.iter().filter(|&&c| multipoles[c].is_some()).count();
            multipoles[b] = Some(m);
        }
    }

    // near field and List 3 far, per target box in fixed list order
    let target_boxes: Vec<usize> = (0..nb).filter(|&b| tree.boxes[b].is_target_box).collect();
    let per_box: Vec<BoxTargets> = target_boxes
        .par_iter()
        .map(|&b| {
            let bx = &tree.boxes[b];
            let near: Vec<SourceCharge> = lists.list1[b]
                .iter()
                .chain(&lists.list3close[b])
                .chain(&lists.list4close[b])
                .flat_map(|&d| tree.boxes[d].sources.iter().map(|&s| charges[s]))
                .collect();
            let far: Vec<&Expansion> = lists.list3far[b]
                .iter()
                .map(|&d| multipoles[d].as_ref().expect("source subtree has a multipole"))
                .collect();
            let mut points = Vec::with_capacity(bx.targets.len());
            for &t in &bx.targets {
                let pos = targets[t].position;
                let mut pot: f64 = near.iter().map(|s| s.potential_at(pos)).sum();
                for m in &far {
                    pot += m_eval(m, pos)?;
                }
                points.push((t, pot));
            }
            let mut out_centers = Vec::new();
            for &c in &bx.centers {
                if !active(c) {
                    continue;
                }
                let mut e = Expansion::zeros(ExpansionKind::Local, centers[c].center, p_qbx);
                accumulate_p2l(&mut e, &near)?;
                for m in &far {
                    accumulate_m2l(&mut e, m)?;
                }
                out_centers.push((c, e));
            }
            Ok(BoxTargets {
                points,
                centers: out_centers,
            })
        })
        .collect::<Result<_, ExpansionError>>()?;
    for &b in &target_boxes {
        let bx = &tree.boxes[b];
        let nt = bx.targets.len() + bx.centers.iter().filter(|&&c| active(c)).count();
        let src = |l: &Vec<usize>| l.iter().map(|&d| tree.boxes[d].sources.len()).sum::<usize>();
        counts.list1_pairs += nt * src(&lists.list1[b]);
        counts.list3close_pairs += nt * src(&lists.list3close[b]);
        counts.list4close_pairs += nt * src(&lists.list4close[b]);
        counts.list3far_evals += nt * lists.list3far[b].len();
    }

    // box locals from List 2 and List 4 far
    let needs_local: Vec<usize> = (0..nb)
        .filter(|&b| tree.boxes[b].is_target_box || tree.boxes[b].is_target_ancestor)
        .collect();
    let formed: Vec<(usize, Expansion)> = needs_local
        .par_iter()
        .map(|&b| {
            let mut l = Expansion::zeros(ExpansionKind::Local, tree.boxes[b].center, p_fmm);
            for &d in &lists.list2[b] {
                accumulate_m2l(&mut l, multipoles[d].as_ref().expect("source subtree has a multipole"))?;
            }
            for &d in &lists.list4far[b] {
                accumulate_p2l(&mut l, &box_charges(d))?;
            }
            Ok((b, l))
        })
        .collect::<Result<_, ExpansionError>>()?;
    let mut locals: Vec<Option<Expansion>> = vec![None; nb];
    for (b, l) in formed {
        counts.m2l += lists.list2[b].len();
        counts.list4far_sources += lists.list4far[b].iter().map(|&d| tree.boxes[d].sources.len()).sum::<usize>();
        locals[b] = Some(l);
    }

    // push locals down, coarsest level first
    for level in tree.levels.iter().skip(1) {
        let shifted: Vec<(usize, Expansion)> = level
            .par_iter()
            .filter(|&&b| locals[b].is_some())
            .map(|&b| {
                let parent = tree.boxes[b].parent.expect("non-root box");
                let mut l = locals[b].clone().expect("filtered");
                if let Some(pl) = &locals[parent] {
                    accumulate_l2l(&mut l, pl);
                }
                (b, l)
            })
            .collect();
        for (b, l) in shifted {
            counts.l2l += 1;
            locals[b] = Some(l);
        }
    }

    // evaluate
    let mut point_pot = vec![0.0; targets.len()];
    let mut center_expansions: Vec<Option<Expansion>> = vec![None; centers.len()];
    for (k, &b) in target_boxes.iter().enumerate() {
        let local = locals[b].as_ref().expect("target box has a local");
        for &(t, pot) in &per_box[k].points {
            point_pot[t] = pot + l_eval(local, targets[t].position);
            counts.local_evals += 1;
        }
    }
    let finals: Vec<Vec<(usize, Expansion)>> = target_boxes
        .par_iter()
        .zip(per_box.into_par_iter())
        .map(|(&b, bt)| {
            let local = locals[b].as_ref().expect("target box has a local");
            bt.centers
                .into_iter()
                .map(|(c, mut e)| {
                    accumulate_l2l(&mut e, local);
                    (c, e)
                })
                .collect()
        })
        .collect();
    for (c, e) in finals.into_iter().flatten() {
        counts.center_l2l += 1;
        center_expansions[c] = Some(e);
    }
    let potentials = finish_targets(&prep, targets, &center_expansions, |i| point_pot[i]);
    counts.local_evals += prep.associations.iter().filter(|a| matches!(a, Association::Center(_))).count();

    let n_suspended = (0..nb).map(|b| tree.suspended_centers(b).len()).sum();
    let n_qbx = targets.len() - point_targets.len();
    Ok(PotentialResult {
        potentials,
        diagnostics: Diagnostics {
            n_sources: charges.len(),
            n_centers: centers.len(),
            n_active_centers: center_expansions.iter().filter(|e| e.is_some()).count(),
            n_point_targets: point_targets.len(),
            n_qbx_targets: n_qbx,
            n_boxes: nb,
            n_levels: tree.nlevels(),
            n_suspended,
            stages: counts,
        },
        associations: prep.associations,
        center_expansions,
    })
}
