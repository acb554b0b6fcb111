//! Experiment drivers behind the `gigaqbx` command-line tool.

use std::io::{self, Write};

use gigaqbx::bounds::{self, BoundReport, Chain};
use gigaqbx::driver::{self, build_eval_tree, direct_potential, Config, EvalTree, Kernel};
use gigaqbx::expansions::ComplexPoint;
use gigaqbx::geometry::{discretize, refine, starfish, upsample, PointGrid, RefineReport, TargetPoint};
use gigaqbx::ilists::{InteractionLists, ListKind};
use gigaqbx::tree::Tree;
use gigaqbx::{Discretization, QbxCenter, Side};
use thiserror::Error;

pub const BASE_NODES: usize = 9;
pub const MAX_REFINE_PASSES: usize = 40;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal invariant failed: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Precondition(_) => 2,
            CliError::Internal(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<gigaqbx::GeometryError> for CliError {
    fn from(e: gigaqbx::GeometryError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<driver::DriverError> for CliError {
    fn from(e: driver::DriverError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<bounds::BoundsError> for CliError {
    fn from(e: bounds::BoundsError) -> Self {
        CliError::Precondition(e.to_string())
    }
}

/// A refined starfish with its upsampled source grid and QBX centers.
#[derive(Debug, Clone)]
pub struct Problem {
    pub base: Discretization,
    pub fine: Discretization,
    pub centers: Vec<QbxCenter>,
    pub report: RefineReport,
    pub p_quad: usize,
}

impl Problem {
    pub fn starfish(arms: u32, panels: usize, p_quad: usize) -> Result<Self, CliError> {
        let coarse = discretize(starfish(arms)?, panels, BASE_NODES)?;
        let refined = refine(&coarse, MAX_REFINE_PASSES, p_quad)?;
        let fine = upsample(&refined.disc, p_quad)?;
        Ok(Self {
            base: refined.disc,
            fine,
            centers: refined.centers,
            report: refined.report,
            p_quad,
        })
    }

    /// One interior-side on-surface target per base node.
    pub fn surface_targets(&self) -> Vec<TargetPoint> {
        (0..self.base.node_count())
            .map(|i| TargetPoint::on_surface(&self.base, i, Side::Interior))
            .collect()
    }

    pub fn n_particles(&self) -> usize {
        self.fine.node_count() + self.centers.len()
    }

    /// True when the double-layer potential of one at `p` says `p` lies
    /// inside the curve.
    pub fn encloses(&self, p: ComplexPoint) -> Result<bool, CliError> {
        let ones = vec![1.0; self.fine.node_count()];
        let v = direct_potential(&self.fine, &ones, &[p], Kernel::Dlp)?;
        Ok(v[0] < -0.5)
    }

    pub fn eval_tree(&self, config: &Config) -> Result<EvalTree, CliError> {
        Ok(build_eval_tree(&self.fine, &self.centers, &[], config)?)
    }
}

/// Evaluation path for one Green residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluator {
    Direct,
    Fast,
}

/// `max |S(du/dn) - D(u) - u| / max |u|` over the on-surface targets
/// (interior limits), where `u` is the potential of a unit charge at `charge`.
pub fn green_residual(problem: &Problem, charge: ComplexPoint, config: &Config, eval: Evaluator) -> Result<f64, CliError> {
    if problem.encloses(charge)? {
        return Err(CliError::Precondition(format!("charge {charge} lies inside the curve")));
    }
    let u = |p: ComplexPoint| (p - charge).norm().ln();
    let dudn = |p: ComplexPoint, n: ComplexPoint| {
        let d = p - charge;
        (n.re * d.re + n.im * d.im) / d.norm_sqr()
    };
    let u_src: Vec<f64> = problem.fine.nodes().map(|n| u(n.position)).collect();
    let dudn_src: Vec<f64> = problem.fine.nodes().map(|n| dudn(n.position, n.normal)).collect();
    let targets = problem.surface_targets();
    let run = |density: &[f64], kernel| match eval {
        Evaluator::Direct => driver::direct_qbx_eval(&problem.fine, density, &problem.centers, &targets, kernel, config),
        Evaluator::Fast => driver::gigaqbx_eval(&problem.fine, density, &problem.centers, &targets, kernel, config),
    };
    let s = run(&dudn_src, Kernel::Slp)?;
    let d = run(&u_src, Kernel::Dlp)?;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, t) in targets.iter().enumerate() {
        let ut = u(t.position);
        err = err.max((s.potentials[i] - d.potentials[i] - ut).abs());
        scale = scale.max(ut.abs());
    }
    Ok(err / scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenRow {
    /// `None` for the unaccelerated row.
    pub p_fmm: Option<usize>,
    pub residuals: Vec<f64>,
}

impl GreenRow {
    /// `(1/2)^(p_fmm + 1)`
    pub fn reference(&self) -> Option<f64> {
        self.p_fmm.map(|p| 0.5f64.powi(p as i32 + 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenTable {
    pub p_qbx: Vec<usize>,
    pub rows: Vec<GreenRow>,
}

impl GreenTable {
    pub fn direct(&self) -> Option<&GreenRow> {
        self.rows.iter().find(|r| r.p_fmm.is_none())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "p_fmm")?;
        for q in &self.p_qbx {
            write!(out, ",qbx_{q}")?;
        }
        writeln!(out, ",half_pow")?;
        for row in &self.rows {
            match row.p_fmm {
                Some(p) => write!(out, "{p}")?,
                None => write!(out, "direct")?,
            }
            for r in &row.residuals {
                write!(out, ",{r:.6e}")?;
            }
            match row.reference() {
                Some(v) => writeln!(out, ",{v:.6e}")?,
                None => writeln!(out, ",")?,
            }
        }
        Ok(())
    }
}

/// Green residual table: one row per FMM order plus the unaccelerated row.
pub fn green_test(
    problem: &Problem,
    charge: ComplexPoint,
    p_qbx: &[usize],
    p_fmm: &[usize],
    base: &Config,
) -> Result<GreenTable, CliError> {
    let mut rows = Vec::with_capacity(p_fmm.len() + 1);
    for &pf in p_fmm {
        let residuals = p_qbx
            .iter()
            .map(|&pq| {
                let cfg = Config { p_qbx: pq, p_fmm: pf, ..*base };
                green_residual(problem, charge, &cfg, Evaluator::Fast)
            })
            .collect::<Result<_, _>>()?;
        rows.push(GreenRow { p_fmm: Some(pf), residuals });
    }
    let residuals = p_qbx
        .iter()
        .map(|&pq| {
            let cfg = Config { p_qbx: pq, ..*base };
            green_residual(problem, charge, &cfg, Evaluator::Direct)
        })
        .collect::<Result<_, _>>()?;
    rows.push(GreenRow { p_fmm: None, residuals });
    Ok(GreenTable {
        p_qbx: p_qbx.to_vec(),
        rows,
    })
}

/// Modeled operation counts per list kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct CostModel {
    pub list1: u128,
    pub list2: u128,
    pub list3close: u128,
    pub list3far: u128,
    pub list4close: u128,
    pub list4far: u128,
}

impl CostModel {
    pub fn get(&self, kind: ListKind) -> u128 {
        match kind {
            ListKind::List1 => self.list1,
            ListKind::List2 => self.list2,
            ListKind::List3Close => self.list3close,
            ListKind::List3Far => self.list3far,
            ListKind::List4Close => self.list4close,
            ListKind::List4Far => self.list4far,
        }
    }

    fn slot(&mut self, kind: ListKind) -> &mut u128 {
        match kind {
            ListKind::List1 => &mut self.list1,
            ListKind::List2 => &mut self.list2,
            ListKind::List3Close => &mut self.list3close,
            ListKind::List3Far => &mut self.list3far,
            ListKind::List4Close => &mut self.list4close,
            ListKind::List4Far => &mut self.list4far,
        }
    }

    pub fn total(&self) -> u128 {
        ListKind::ALL.iter().map(|&k| self.get(k)).sum()
    }

    pub fn write_csv<W: Write>(&self, n_particles: usize, mut out: W) -> io::Result<()> {
        writeln!(out, "list,ops,ops_per_particle")?;
        let per = |v: u128| v as f64 / n_particles.max(1) as f64;
        for k in ListKind::ALL {
            writeln!(out, "{},{},{:.6e}", k.name(), self.get(k), per(self.get(k)))?;
        }
        writeln!(out, "all,{},{:.6e}", self.total(), per(self.total()))
    }
}

/// Cost of one list entry of `kind` from source box `d` into target box `b`.
pub fn entry_cost(kind: ListKind, p_qbx: usize, p_fmm: usize, n_s: usize, n_t: usize) -> u128 {
    let (pq, pf, ns, nt) = (p_qbx as u128, p_fmm as u128, n_s as u128, n_t as u128);
    match kind {
        ListKind::List1 | ListKind::List3Close | ListKind::List4Close => pq * ns * nt,
        ListKind::List2 => pf * pf,
        ListKind::List3Far => pf * pq * nt,
        ListKind::List4Far => pf * ns,
    }
}

fn box_targets(tree: &Tree, b: usize) -> usize {
    let bx = &tree.boxes[b];
    bx.centers.len() + bx.targets.len()
}

/// Sums the per-entry costs over every list entry, target box by target box.
pub fn op_counts(tree: &Tree, lists: &InteractionLists, p_qbx: usize, p_fmm: usize) -> CostModel {
    let mut cost = CostModel::default();
    for kind in ListKind::ALL {
        let list = lists.get(kind);
        let mut sum = 0;
        for (b, entries) in list.iter().enumerate() {
            let nt = box_targets(tree, b);
            for &d in entries {
                sum += entry_cost(kind, p_qbx, p_fmm, tree.boxes[d].sources.len(), nt);
            }
        }
        *cost.slot(kind) = sum;
    }
    cost
}

/// Same totals as [`op_counts`], accumulated from the source side by walking
/// boxes in reverse order over the inverted lists.
pub fn op_counts_recount(tree: &Tree, lists: &InteractionLists, p_qbx: usize, p_fmm: usize) -> CostModel {
    let mut cost = CostModel::default();
    for kind in ListKind::ALL {
        let mut inverse: Vec<Vec<usize>> = vec![Vec::new(); tree.len()];
        for (b, entries) in lists.get(kind).iter().enumerate() {
            for &d in entries {
                inverse[d].push(b);
            }
        }
        let mut sum = 0;
        for d in (0..tree.len()).rev() {
            let ns = tree.boxes[d].sources.len();
            for &b in inverse[d].iter().rev() {
                sum += entry_cost(kind, p_qbx, p_fmm, ns, box_targets(tree, b));
            }
        }
        *cost.slot(kind) = sum;
    }
    cost
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct McStats {
    pub n_s: usize,
    pub n_c: usize,
    pub m_c: f64,
    /// 20th, 40th, 60th, 80th and 100th percentiles (nearest rank).
    pub percentiles: [f64; 5],
}

impl McStats {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n_s,n_c,m_c,p20,p40,p60,p80,p100")?;
        let p = &self.percentiles;
        writeln!(
            out,
            "{},{},{:.4},{},{},{},{},{}",
            self.n_s, self.n_c, self.m_c, p[0], p[1], p[2], p[3], p[4]
        )
    }
}

/// Per-center number of sources within the square of half-width
/// `8 r / t_f` about the center.
pub fn mc_counts(sources: &[ComplexPoint], centers: &[QbxCenter], t_f: f64) -> Result<Vec<usize>, CliError> {
    if !(t_f > 0.0) {
        return Err(CliError::Precondition(format!("t_f = {t_f} must be positive")));
    }
    let max_half = centers.iter().map(|c| 8.0 * c.radius / t_f).fold(0.0, f64::max);
    let grid = PointGrid::new(sources.iter().copied(), max_half);
    Ok(centers
        .iter()
        .map(|c| {
            let half = 8.0 * c.radius / t_f;
            grid.candidates(c.center, half)
                .filter(|&j| {
                    let d = sources[j] - c.center;
                    d.re.abs() <= half && d.im.abs() <= half
                })
                .count()
        })
        .collect())
}

pub fn mc_stats(sources: &[ComplexPoint], centers: &[QbxCenter], t_f: f64) -> Result<McStats, CliError> {
    let mut counts = mc_counts(sources, centers, t_f)?;
    counts.sort_unstable();
    let n = counts.len();
    let m_c = if n == 0 { 0.0 } else { counts.iter().sum::<usize>() as f64 / n as f64 };
    let rank = |pct: usize| -> f64 {
        if n == 0 {
            return 0.0;
        }
        let k = (pct * n).div_ceil(100).max(1);
        counts[k - 1] as f64
    };
    Ok(McStats {
        n_s: sources.len(),
        n_c: n,
        m_c,
        percentiles: [rank(20), rank(40), rank(60), rank(80), rank(100)],
    })
}

/// Order used for the point-FMM reference value.
pub const REFERENCE_ORDER: usize = 8;

/// The point-FMM reference error printed alongside chain experiments.
pub fn chain_reference() -> f64 {
    bounds::point_fmm_heuristic(REFERENCE_ORDER)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainArgs {
    pub chain: Chain,
    pub p: usize,
    pub q: usize,
    pub c: f64,
    pub lambda: f64,
    pub trials: usize,
    pub seed: u64,
    pub t_f: Option<f64>,
}

pub fn chain_csv<W: Write>(args: &ChainArgs, out: W) -> Result<Vec<BoundReport>, CliError> {
    let reports = bounds::chain_experiment(args.chain, args.c, args.lambda, args.p, args.q, args.trials, args.seed)?;
    bounds::write_reports_csv(&reports, args.t_f, out)?;
    Ok(reports)
}

pub fn parse_chain(s: &str) -> Result<Chain, CliError> {
    Chain::parse(s).ok_or_else(|| CliError::Usage(format!("unknown chain '{s}' (m2l, m2qbxl, l2qbxl, m2l2qbxl)")))
}
