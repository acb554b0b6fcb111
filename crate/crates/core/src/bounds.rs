//! Truncation error bounds for translation chains ending in a QBX local
//! expansion, and randomized experiments that measure them.

use std::f64::consts::{SQRT_2, TAU};
use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expansions::{l2l, m2l, p2l, p2m, ComplexPoint, ExpansionError, SourceCharge};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("inadmissible geometry: {0}")]
    Inadmissible(String),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
}

/// `1 / (1 + c / lambda)`
pub fn omega(c: f64, lambda: f64) -> f64 {
    1.0 / (1.0 + c / lambda)
}

/// `1 / (1 + c)`
pub fn alpha(c: f64) -> f64 {
    1.0 / (1.0 + c)
}

fn tail(factor: f64, p: usize) -> f64 {
    factor.powi(p as i32 + 1) / (1.0 - factor)
}

/// Error of a q-th order local obtained through a p-th order multipole.
pub fn m2qbxl_bound(p: usize, q: usize, c: f64, lambda: f64) -> f64 {
    (q as f64 + 1.0) / (p as f64 + 1.0) * tail(omega(c, lambda), p)
}

/// Error of a q-th order local obtained through a p-th order local.
pub fn l2qbxl_bound(p: usize, q: usize, c: f64) -> f64 {
    (q as f64 + 1.0) / (p as f64 + 1.0) * tail(alpha(c), p)
}

/// Error of a q-th order local obtained through a p-th order multipole and
/// a p-th order local.
pub fn m2l2qbxl_bound(p: usize, q: usize, c: f64, lambda: f64) -> f64 {
    (q as f64 + 1.0) * tail(omega(c, lambda), p) + l2qbxl_bound(p, q, c)
}

/// Largest admissible target confinement factor, `6 - 2 sqrt 2`.
pub fn max_confinement_factor() -> f64 {
    6.0 - 2.0 * SQRT_2
}

/// `(t_f + sqrt 2) / (6 - sqrt 2)`
pub fn theorem_alpha(t_f: f64) -> f64 {
    (t_f + SQRT_2) / (6.0 - SQRT_2)
}

/// Explicit accuracy bound of the fast algorithm relative to unaccelerated
/// QBX, for total source strength `a`:
/// `2 (3A / (3 - sqrt 2)) ((q+1)/(p+1)) (sqrt 2 / 3)^(p+1)
///  + (A / (1 - alpha)) (q+1) (1 + 1/(p+1)) alpha^(p+1)`.
pub fn theorem_bound(p_qbx: usize, p_fmm: usize, t_f: f64, a: f64) -> Result<f64, BoundsError> {
    if !(0.0..max_confinement_factor()).contains(&t_f) {
        return Err(BoundsError::InvalidParameter(format!(
            "t_f = {t_f} outside [0, 6 - 2 sqrt 2)"
        )));
    }
    if !(a >= 0.0) {
        return Err(BoundsError::InvalidParameter(format!("A = {a} must be nonnegative")));
    }
    let q1 = p_qbx as f64 + 1.0;
    let p1 = p_fmm as f64 + 1.0;
    let al = theorem_alpha(t_f);
    let first = 2.0 * (3.0 * a / (3.0 - SQRT_2)) * (q1 / p1) * (SQRT_2 / 3.0).powi(p_fmm as i32 + 1);
    let second = a / (1.0 - al) * q1 * (1.0 + 1.0 / p1) * al.powi(p_fmm as i32 + 1);
    Ok(first + second)
}

/// Rough single-level multipole-to-local error for point FMMs with
/// one-box separation: `(sqrt 2 / (4 - sqrt 2))^(p+1)`.
pub fn point_fmm_heuristic(p: usize) -> f64 {
    (SQRT_2 / (4.0 - SQRT_2)).powi(p as i32 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Chain {
    /// Multipole at the source cluster, local at the origin, evaluated about
    /// the origin.
    M2L,
    M2QBXL,
    L2QBXL,
    M2L2QBXL,
}

impl Chain {
    pub fn name(self) -> &'static str {
        match self {
            Chain::M2L => "m2l",
            Chain::M2QBXL => "m2qbxl",
            Chain::L2QBXL => "l2qbxl",
            Chain::M2L2QBXL => "m2l2qbxl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Chain::M2L, Chain::M2QBXL, Chain::L2QBXL, Chain::M2L2QBXL]
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
    }

    fn uses_multipole(self) -> bool {
        self != Chain::L2QBXL
    }
}

/// One placement of the charge, the expansion points and the target.
///
/// The target disk is `B(0, r)`; the QBX center is `z` and the evaluation
/// point is `y`. Multipole-mediated chains expand about `z0` with the charge
/// at `source` inside `B(z0, lambda r)`; the local-mediated chain puts the
/// charge at `z0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainGeometry {
    pub c: f64,
    pub lambda: f64,
    pub r: f64,
    pub z0: ComplexPoint,
    pub source: ComplexPoint,
    pub z: ComplexPoint,
    pub y: ComplexPoint,
}

impl ChainGeometry {
    pub fn check(&self, chain: Chain) -> Result<(), BoundsError> {
        let bad = |m: String| Err(BoundsError::Inadmissible(m));
        if !(self.c > 0.0 && self.lambda > 0.0 && self.r > 0.0) {
            return bad("c, lambda and r must be positive".into());
        }
        let tol = 1e-12 * self.r;
        if chain.uses_multipole() {
            if self.z0.norm() < (self.c + 1.0 + self.lambda) * self.r - tol {
                return bad(format!("|z0| = {} below (c + 1 + lambda) r", self.z0.norm()));
            }
            if (self.source - self.z0).norm() > self.lambda * self.r + tol {
                return bad("source outside B(z0, lambda r)".into());
            }
        } else if self.z0.norm() < (self.c + 1.0) * self.r - tol {
            return bad(format!("|z0| = {} below (c + 1) r", self.z0.norm()));
        }
        if self.z.norm() >= self.r {
            return bad("|z| must be below r".into());
        }
        if (self.y - self.z).norm() > self.r - self.z.norm() + tol {
            return bad("|y - z| exceeds r - |z|".into());
        }
        if chain == Chain::M2L && self.z != Complex64::new(0.0, 0.0) {
            return bad("the m2l chain expands about the origin".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BoundReport {
    pub chain: Chain,
    pub p: usize,
    pub q: usize,
    pub c: f64,
    pub lambda: f64,
    pub trial: usize,
    pub measured: f64,
    pub bound: f64,
    /// omega for multipole-mediated chains, alpha for the local chain.
    pub factor: f64,
    pub satisfied: bool,
}

impl BoundReport {
    pub fn ratio(&self) -> f64 {
        self.measured / self.bound
    }
}

pub fn chain_bound(chain: Chain, p: usize, q: usize, c: f64, lambda: f64) -> f64 {
    match chain {
        Chain::M2QBXL => m2qbxl_bound(p, q, c, lambda),
        Chain::L2QBXL => l2qbxl_bound(p, q, c),
        Chain::M2L | Chain::M2L2QBXL => m2l2qbxl_bound(p, q, c, lambda),
    }
}

/// Runs one chain and compares its q-th order local at `z`, evaluated at
/// `y`, against the directly formed one. The imaginary part of the
/// constant-term difference is reduced modulo `2 pi`.
pub fn chain_trial(chain: Chain, g: &ChainGeometry, p: usize, q: usize) -> Result<BoundReport, BoundsError> {
    g.check(chain)?;
    let origin = Complex64::new(0.0, 0.0);
    let charge = match chain {
        Chain::L2QBXL => SourceCharge::charge(g.z0, 1.0),
        _ => SourceCharge::charge(g.source, 1.0),
    };
    let exact = p2l(&[charge], g.z, q)?;
    let mediated = match chain {
        Chain::M2QBXL => m2l(&p2m(&[charge], g.z0, p)?, g.z, q)?,
        Chain::L2QBXL => l2l(&p2l(&[charge], origin, p)?, g.z, Some(q.min(p)))?,
        Chain::M2L | Chain::M2L2QBXL => {
            let local = m2l(&p2m(&[charge], g.z0, p)?, origin, p)?;
            l2l(&local, g.z, Some(q.min(p)))?
        }
    };
    let h = g.y - g.z;
    let mut diff = Complex64::new(0.0, 0.0);
    let mut pw = Complex64::new(1.0, 0.0);
    for k in 0..=q {
        let a = exact.coeffs()[k];
        let b = mediated.coeffs().get(k).copied().unwrap_or_default();
        let mut d = b - a;
        if k == 0 {
            d.im -= TAU * (d.im / TAU).round();
        }
        diff += d * pw;
        pw *= h;
    }
    let measured = diff.norm();
    let bound = chain_bound(chain, p, q, g.c, g.lambda);
    let factor = if chain.uses_multipole() { omega(g.c, g.lambda) } else { alpha(g.c) };
    Ok(BoundReport {
        chain,
        p,
        q,
        c: g.c,
        lambda: g.lambda,
        trial: 0,
        measured,
        bound,
        factor,
        satisfied: measured <= bound * (1.0 + 1e-9),
    })
}

fn uniform_disk(rng: &mut ChaCha8Rng, center: ComplexPoint, radius: f64) -> ComplexPoint {
    center + Complex64::from_polar(radius * rng.gen::<f64>().sqrt(), rng.gen::<f64>() * TAU)
}

/// Random admissible placement: `|z0|` between the minimum admissible
/// distance and 25% beyond it, the charge uniform in its ball, `z` uniform
/// in the open target disk and `y` on the circle `|y - z| = r - |z|`.
pub fn sample_geometry(rng: &mut ChaCha8Rng, chain: Chain, c: f64, lambda: f64, r: f64) -> ChainGeometry {
    let min = if chain.uses_multipole() { (c + 1.0 + lambda) * r } else { (c + 1.0) * r };
    let z0 = Complex64::from_polar(min * (1.0 + 0.25 * rng.gen::<f64>()), rng.gen::<f64>() * TAU);
    let source = if chain.uses_multipole() { uniform_disk(rng, z0, lambda * r) } else { z0 };
    let z = if chain == Chain::M2L {
        Complex64::new(0.0, 0.0)
    } else {
        uniform_disk(rng, Complex64::new(0.0, 0.0), r)
    };
    let y = z + Complex64::from_polar(r - z.norm(), rng.gen::<f64>() * TAU);
    ChainGeometry {
        c,
        lambda,
        r,
        z0,
        source,
        z,
        y,
    }
}

/// `trials` random trials of `chain` with target disk radius 1.
pub fn chain_experiment(
    chain: Chain,
    c: f64,
    lambda: f64,
    p: usize,
    q: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<BoundReport>, BoundsError> {
    if !(c > 0.0 && lambda > 0.0) {
        return Err(BoundsError::InvalidParameter("c and lambda must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|trial| {
            let g = sample_geometry(&mut rng, chain, c, lambda, 1.0);
            let mut rep = chain_trial(chain, &g, p, q)?;
            rep.trial = trial;
            Ok(rep)
        })
        .collect()
}

/// Writes `chain,p,q,c,lambda,t_f,trial,measured,bound,ratio`; `t_f` is left
/// empty when not given.
pub fn write_reports_csv<W: Write>(reports: &[BoundReport], t_f: Option<f64>, mut out: W) -> io::Result<()> {
    writeln!(out, "chain,p,q,c,lambda,t_f,trial,measured,bound,ratio")?;
    let tf = t_f.map(|v| format!("{v}")).unwrap_or_default();
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.16e},{:.16e},{:.16e}",
            r.chain.name(),
            r.p,
            r.q,
            r.c,
            r.lambda,
            tf,
            r.trial,
            r.measured,
            r.bound,
            r.ratio()
        )?;
    }
    Ok(())
}

/// Used by the rough point-FMM estimate: the ratio `sqrt 2 / (4 - sqrt 2)`.
pub fn point_fmm_ratio() -> f64 {
    SQRT_2 / (4.0 - SQRT_2)
}
