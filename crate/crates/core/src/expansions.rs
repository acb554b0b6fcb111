//! Complex-plane multipole and local expansions for the 2D Laplace kernel.
//!
//! Points of the plane are complex numbers. A multipole expansion about `c`
//! represents `a_0 log(z - c) + sum_k a_k / (z - c)^k`, a local expansion
//! represents `sum_k b_k (z - c)^k`. Only real parts are physical potentials;
//! the imaginary part of the order-zero coefficient carries an arbitrary
//! branch of the logarithm.
//!
//! Coefficients are stored unscaled. Strength prefactors (quadrature weights,
//! density values, `-1/(2 pi)`) are expected to be folded into
//! [`SourceCharge`] before expansions are formed.

use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

/// A point of the plane, `x + i y`.
pub type ComplexPoint = Complex64;

/// Largest supported expansion order.
pub const MAX_ORDER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ExpansionError {
    #[error("expansion order {order} exceeds the supported maximum {MAX_ORDER}")]
    OrderTooLarge { order: usize },
    #[error("source {index} coincides with the local expansion center")]
    SourceAtCenter { index: usize },
    #[error("multipole and local expansion centers coincide")]
    CoincidentCenters,
    #[error("evaluation target coincides with the multipole center")]
    TargetAtCenter,
    #[error("requested output order {requested} exceeds input order {available}")]
    OrderIncrease { requested: usize, available: usize },
    #[error("expected a {expected:?} expansion, got {found:?}")]
    KindMismatch {
        expected: ExpansionKind,
        found: ExpansionKind,
    },
}

/// Point source with a real monopole strength and a complex dipole moment.
///
/// The potential at `z` is `charge * log|z - position| + Re(dipole / (position - z))`,
/// i.e. the dipole term is the derivative of the charge potential with
/// respect to the source position along `dipole`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceCharge {
    pub position: ComplexPoint,
    pub charge: f64,
    pub dipole: Complex64,
}

impl SourceCharge {
    pub fn charge(position: ComplexPoint, charge: f64) -> Self {
        Self {
            position,
            charge,
            dipole: Complex64::new(0.0, 0.0),
        }
    }

    pub fn dipole(position: ComplexPoint, dipole: Complex64) -> Self {
        Self {
            position,
            charge: 0.0,
            dipole,
        }
    }

    /// Potential of this source at `target`, evaluated directly.
    pub fn potential_at(&self, target: ComplexPoint) -> f64 {
        let d = self.position - target;
        let mut pot = 0.0;
        if self.charge != 0.0 {
            pot += self.charge * d.norm().ln();
        }
        if self.dipole != Complex64::new(0.0, 0.0) {
            pot += (self.dipole / d).re;
        }
        pot
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ExpansionKind {
    Multipole,
    Local,
}

/// Truncated expansion of order `coeffs.len() - 1` about `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    kind: ExpansionKind,
    center: ComplexPoint,
    coeffs: Vec<Complex64>,
}

impl Expansion {
    pub fn zeros(kind: ExpansionKind, center: ComplexPoint, order: usize) -> Self {
        Self {
            kind,
            center,
            coeffs: vec![Complex64::new(0.0, 0.0); order + 1],
        }
    }

    /// Wraps raw coefficients. The order is `coeffs.len() - 1`; an empty
    /// vector is padded to order zero.
    pub fn from_coeffs(kind: ExpansionKind, center: ComplexPoint, mut coeffs: Vec<Complex64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        Self {
            kind,
            center,
            coeffs,
        }
    }

    pub fn kind(&self) -> ExpansionKind {
        self.kind
    }

    pub fn center(&self) -> ComplexPoint {
        self.center
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Adds `other` coefficient-wise.
    ///
    /// # Panics
    /// If kinds, centers or orders differ.
    pub fn add_assign(&mut self, other: &Expansion) {
        assert_eq!(self.kind, other.kind, "expansion kinds differ");
        assert_eq!(self.center, other.center, "expansion centers differ");
        assert_eq!(self.coeffs.len(), other.coeffs.len(), "expansion orders differ");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    fn expect_kind(&self, expected: ExpansionKind) -> Result<(), ExpansionError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(ExpansionError::KindMismatch {
                expected,
                found: self.kind,
            })
        }
    }
}

fn check_order(order: usize) -> Result<(), ExpansionError> {
    if order > MAX_ORDER {
        Err(ExpansionError::OrderTooLarge { order })
    } else {
        Ok(())
    }
}

const BINOMIAL_ROWS: usize = 2 * MAX_ORDER + 3;

fn binomial_table() -> &'static [Vec<f64>] {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(BINOMIAL_ROWS);
        for n in 0..BINOMIAL_ROWS {
            let mut row = vec![1.0; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        rows
    })
}

/// Binomial coefficient `C(n, k)` from the precomputed Pascal triangle.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        0.0
    } else {
        binomial_table()[n][k]
    }
}

/// Forms the order-`order` multipole expansion of `sources` about `center`.
pub fn p2m(sources: &[SourceCharge], center: ComplexPoint, order: usize) -> Result<Expansion, ExpansionError> {
    check_order(order)?;
    let mut out = Expansion::zeros(ExpansionKind::Multipole, center, order);
    accumulate_p2m(&mut out, sources);
    Ok(out)
}

/// Adds the multipole coefficients of `sources` into `target`.
pub(crate) fn accumulate_p2m(target: &mut Expansion, sources: &[SourceCharge]) {
    let order = target.order();
    let center = target.center;
    let coeffs = &mut target.coeffs;
    for src in sources {
        let z0 = src.position - center;
        coeffs[0] += src.charge;
        // pw = z0^(k-1) at the top of iteration k
        let mut pw = Complex64::new(1.0, 0.0);
        for k in 1..=order {
            let next = pw * z0;
            coeffs[k] -= src.charge * next / k as f64 + src.dipole * pw;
            pw = next;
        }
    }
}

/// Forms the order-`order` local expansion of `sources` about `center`.
pub fn p2l(sources: &[SourceCharge], center: ComplexPoint, order: usize) -> Result<Expansion, ExpansionError> {
    check_order(order)?;
    let mut out = Expansion::zeros(ExpansionKind::Local, center, order);
    accumulate_p2l(&mut out, sources)?;
    Ok(out)
}

/// Adds the local coefficients of `sources` into `target`.
pub(crate) fn accumulate_p2l(target: &mut Expansion, sources: &[SourceCharge]) -> Result<(), ExpansionError> {
    let order = target.order();
    let center = target.center;
    let coeffs = &mut target.coeffs;
    for (index, src) in sources.iter().enumerate() {
        let z0 = src.position - center;
        if z0.norm_sqr() == 0.0 {
            return Err(ExpansionError::SourceAtCenter { index });
        }
        let inv = z0.inv();
        if src.charge != 0.0 {
            coeffs[0] += src.charge * (-z0).ln();
        }
        // pw = z0^-m at the top of iteration m
        let mut pw = Complex64::new(1.0, 0.0);
        for m in 0..=order {
            let next = pw * inv;
            if m > 0 {
                coeffs[m] -= src.charge * pw / m as f64;
            }
            coeffs[m] += src.dipole * next;
            pw = next;
        }
    }
    Ok(())
}

/// Shifts a multipole expansion to `new_center`, keeping its order.
pub fn m2m(src: &Expansion, new_center: ComplexPoint) -> Result<Expansion, ExpansionError> {
    src.expect_kind(ExpansionKind::Multipole)?;
    let order = src.order();
    let a = &src.coeffs;
    // old center relative to the new one
    let z0 = src.center - new_center;
    let mut pows = Vec::with_capacity(order + 1);
    let mut pw = Complex64::new(1.0, 0.0);
    for _ in 0..=order {
        pows.push(pw);
        pw *= z0;
    }
    let mut out = Expansion::zeros(ExpansionKind::Multipole, new_center, order);
    out.coeffs[0] = a[0];
    for m in 1..=order {
        let mut acc = -a[0] * pows[m] / m as f64;
        for k in 1..=m {
            acc += binomial(m - 1, k - 1) * a[k] * pows[m - k];
        }
        out.coeffs[m] = acc;
    }
    Ok(out)
}

/// Converts a multipole expansion into an order-`order` local expansion
/// about `new_center`. The inner series are truncated at the source order.
pub fn m2l(src: &Expansion, new_center: ComplexPoint, order: usize) -> Result<Expansion, ExpansionError> {
    src.expect_kind(ExpansionKind::Multipole)?;
    check_order(order)?;
    let mut out = Expansion::zeros(ExpansionKind::Local, new_center, order);
    accumulate_m2l(&mut out, src)?;
    Ok(out)
}

/// Adds the local expansion of multipole `src` into `target`.
pub(crate) fn accumulate_m2l(target: &mut Expansion, src: &Expansion) -> Result<(), ExpansionError> {
    // local center relative to the multipole center
    let y = target.center - src.center;
    if y.norm_sqr() == 0.0 {
        return Err(ExpansionError::CoincidentCenters);
    }
    let p = src.order();
    let q = target.order();
    let a = &src.coeffs;
    let inv = y.inv();

    // scaled[k] = a_k / y^k
    let mut scaled = Vec::with_capacity(p + 1);
    let mut pw = Complex64::new(1.0, 0.0);
    for ak in a {
        scaled.push(ak * pw);
        pw *= inv;
    }

    let coeffs = &mut target.coeffs;
    let mut b0 = a[0] * y.ln();
    for s in &scaled[1..] {
        b0 += s;
    }
    coeffs[0] += b0;

    // ypow = (-1)^m / y^m
    let neg_inv = -inv;
    let mut ypow = Complex64::new(1.0, 0.0);
    for m in 1..=q {
        ypow *= neg_inv;
        let mut acc = -a[0] / m as f64;
        for k in 1..=p {
            acc += binomial(m + k - 1, k - 1) * scaled[k];
        }
        coeffs[m] += ypow * acc;
    }
    Ok(())
}

/// Shifts a local expansion to `new_center`. With `order = None` the input
/// order is kept; a smaller order truncates after shifting.
pub fn l2l(src: &Expansion, new_center: ComplexPoint, order: Option<usize>) -> Result<Expansion, ExpansionError> {
    src.expect_kind(ExpansionKind::Local)?;
    let p = src.order();
    let q = order.unwrap_or(p);
    if q > p {
        return Err(ExpansionError::OrderIncrease {
            requested: q,
            available: p,
        });
    }
    let mut out = Expansion::zeros(ExpansionKind::Local, new_center, q);
    accumulate_l2l(&mut out, src);
    Ok(out)
}

/// Adds the shift of local `src` into `target`; `target.order() <= src.order()`.
pub(crate) fn accumulate_l2l(target: &mut Expansion, src: &Expansion) {
    let p = src.order();
    let q = target.order().min(p);
    let y = target.center - src.center;
    let b = &src.coeffs;
    let mut pows = Vec::with_capacity(p + 1);
    let mut pw = Complex64::new(1.0, 0.0);
    for _ in 0..=p {
        pows.push(pw);
        pw *= y;
    }
    for m in 0..=q {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in m..=p {
            acc += binomial(k, m) * b[k] * pows[k - m];
        }
        target.coeffs[m] += acc;
    }
}

/// Real part of the multipole expansion at `target`.
pub fn m_eval(src: &Expansion, target: ComplexPoint) -> Result<f64, ExpansionError> {
    src.expect_kind(ExpansionKind::Multipole)?;
    let z = target - src.center;
    if z.norm_sqr() == 0.0 {
        return Err(ExpansionError::TargetAtCenter);
    }
    let inv = z.inv();
    let mut acc = src.coeffs[0] * z.ln();
    let mut pw = Complex64::new(1.0, 0.0);
    for ak in &src.coeffs[1..] {
        pw *= inv;
        acc += ak * pw;
    }
    Ok(acc.re)
}

/// Real part of the local expansion at `target` (Horner evaluation).
pub fn l_eval(src: &Expansion, target: ComplexPoint) -> f64 {
    local_value(src, target).re
}

/// Complex value of the local expansion polynomial at `target`.
pub fn local_value(src: &Expansion, target: ComplexPoint) -> Complex64 {
    let z = target - src.center;
    src.coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    fn random_charges(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<SourceCharge> {
        (0..n)
            .map(|_| {
                let r = radius * rng.gen::<f64>().sqrt();
                let th = rng.gen::<f64>() * std::f64::consts::TAU;
                SourceCharge::charge(Complex64::from_polar(r, th), rng.gen_range(-1.0..1.0))
            })
            .collect()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(0, 0), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(binomial(130, 0), 1.0);
    }

    #[test]
    fn p2m_unit_charge_at_center() {
        let e = p2m(&[SourceCharge::charge(c(0.0, 0.0), 1.0)], c(0.0, 0.0), 2).unwrap();
        assert_eq!(e.coeffs(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn p2m_unit_charge_offset() {
        let e = p2m(&[SourceCharge::charge(c(0.5, 0.0), 1.0)], c(0.0, 0.0), 2).unwrap();
        assert!(close(e.coeffs()[0], c(1.0, 0.0), 1e-15));
        assert!(close(e.coeffs()[1], c(-0.5, 0.0), 1e-15));
        assert!(close(e.coeffs()[2], c(-0.125, 0.0), 1e-15));
    }

    #[test]
    fn p2m_symmetric_pair_has_no_odd_terms() {
        let z0 = c(0.3, -0.7);
        let srcs = [SourceCharge::charge(z0, 1.0), SourceCharge::charge(-z0, 1.0)];
        let e = p2m(&srcs, c(0.0, 0.0), 3).unwrap();
        assert_eq!(e.coeffs()[1], c(0.0, 0.0));
        assert_eq!(e.coeffs()[3], c(0.0, 0.0));
    }

    #[test]
    fn order_cap() {
        let err = p2m(&[], c(0.0, 0.0), MAX_ORDER + 1).unwrap_err();
        assert_eq!(err, ExpansionError::OrderTooLarge { order: MAX_ORDER + 1 });
    }

    #[test]
    fn p2l_formulas() {
        let e = p2l(&[SourceCharge::charge(c(-1.0, 0.0), 1.0)], c(0.0, 0.0), 1).unwrap();
        assert!(e.coeffs()[0].re.abs() < 1e-15);
        assert!(close(e.coeffs()[1], c(1.0, 0.0), 1e-15));

        let e = p2l(&[SourceCharge::charge(c(2.0, 0.0), 1.0)], c(0.0, 0.0), 0).unwrap();
        assert!((e.coeffs()[0].re - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn p2l_rejects_source_at_center() {
        let err = p2l(&[SourceCharge::charge(c(1.0, 1.0), 1.0)], c(1.0, 1.0), 3).unwrap_err();
        assert_eq!(err, ExpansionError::SourceAtCenter { index: 0 });
    }

    #[test]
    fn p2l_matches_direct_sum_within_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let srcs: Vec<_> = (0..20)
            .map(|_| {
                let r = rng.gen_range(1.0..2.0);
                let th = rng.gen::<f64>() * std::f64::consts::TAU;
                SourceCharge::charge(Complex64::from_polar(r, th), rng.gen_range(0.0..1.0))
            })
            .collect();
        let min_r = srcs.iter().map(|s| s.position.norm()).fold(f64::INFINITY, f64::min);
        let total: f64 = srcs.iter().map(|s| s.charge.abs()).sum();
        let p = 15;
        let e = p2l(&srcs, c(0.0, 0.0), p).unwrap();
        let ratio: f64 = 0.3;
        let bound = total * ratio.powi(p as i32 + 1) / ((p + 1) as f64 * (1.0 - ratio));
        for k in 0..16 {
            let z = Complex64::from_polar(0.3 * min_r, k as f64 * 0.4);
            let direct: f64 = srcs.iter().map(|s| s.potential_at(z)).sum();
            assert!((l_eval(&e, z) - direct).abs() <= bound, "k={k}");
        }
    }

    #[test]
    fn l_eval_basic() {
        let e = Expansion::from_coeffs(ExpansionKind::Local, c(1.0, 1.0), vec![c(0.25, 3.0), c(5.0, 0.0)]);
        assert_eq!(l_eval(&e, c(1.0, 1.0)), 0.25);
        let e = Expansion::from_coeffs(ExpansionKind::Local, c(0.0, 0.0), vec![c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(l_eval(&e, c(2.0, 0.0)), 2.0);
    }

    #[test]
    fn l_eval_of_p2l_close_to_log() {
        let z0 = c(0.8, 0.6);
        let e = p2l(&[SourceCharge::charge(z0, 1.0)], c(0.0, 0.0), 30).unwrap();
        for k in 0..12 {
            let z = Complex64::from_polar(0.25, k as f64 * 0.5);
            assert!((l_eval(&e, z) - (z - z0).norm().ln()).abs() < 1e-8);
        }
    }

    #[test]
    fn m_eval_basic() {
        let e = Expansion::from_coeffs(ExpansionKind::Multipole, c(0.0, 0.0), vec![c(1.0, 0.0)]);
        let z = Complex64::from_polar(std::f64::consts::E, 1.1);
        assert!((m_eval(&e, z).unwrap() - 1.0).abs() < 1e-15);
        let zero = Expansion::zeros(ExpansionKind::Multipole, c(0.0, 0.0), 4);
        assert_eq!(m_eval(&zero, c(1.0, 2.0)).unwrap(), 0.0);
        assert_eq!(m_eval(&zero, c(0.0, 0.0)).unwrap_err(), ExpansionError::TargetAtCenter);
    }

    #[test]
    fn m_eval_geometric_tail() {
        let z0 = c(0.3, 0.4);
        let e = p2m(&[SourceCharge::charge(z0, 1.0)], c(0.0, 0.0), 20).unwrap();
        let bound = 0.25f64.powi(21) / 0.75;
        for k in 0..10 {
            let z = Complex64::from_polar(4.0 * z0.norm(), k as f64 * 0.7);
            let err = (m_eval(&e, z).unwrap() - (z - z0).norm().ln()).abs();
            assert!(err <= bound, "err {err} bound {bound}");
        }
    }

    #[test]
    fn m_eval_converges_at_predicted_rate() {
        let z0 = c(0.5, 0.0);
        let z = Complex64::from_polar(2.0, 0.3);
        let exact = (z - z0).norm().ln();
        // fit log(err) against p
        let ps: Vec<usize> = (4..=20).step_by(2).collect();
        let errs: Vec<f64> = ps
            .iter()
            .map(|&p| {
                let e = p2m(&[SourceCharge::charge(z0, 1.0)], c(0.0, 0.0), p).unwrap();
                (m_eval(&e, z).unwrap() - exact).abs()
            })
            .collect();
        let n = ps.len() as f64;
        let xs: Vec<f64> = ps.iter().map(|&p| p as f64).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        let predicted = (z0.norm() / z.norm()).ln();
        assert!((slope - predicted).abs() <= 0.1 * predicted.abs(), "slope {slope} predicted {predicted}");
    }

    #[test]
    fn m2m_identity_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let srcs = random_charges(&mut rng, 10, 0.5);
        let e = p2m(&srcs, c(0.1, 0.2), 12).unwrap();
        let shifted = m2m(&e, c(0.1, 0.2)).unwrap();
        for (a, b) in e.coeffs().iter().zip(shifted.coeffs()) {
            assert!(close(*a, *b, 1e-15));
        }
    }

    #[test]
    fn m2m_matches_direct_p2m() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let srcs = random_charges(&mut rng, 30, 0.4);
        let c1 = c(0.05, -0.02);
        let c2 = c(0.3, 0.25);
        let shifted = m2m(&p2m(&srcs, c1, 20).unwrap(), c2).unwrap();
        let direct = p2m(&srcs, c2, 20).unwrap();
        for (a, b) in shifted.coeffs().iter().zip(direct.coeffs()) {
            assert!(close(*a, *b, 1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn m2l_single_term_matches_p2l() {
        let old = c(0.2, 0.1);
        let new = c(3.0, -1.5);
        let mono = Expansion::from_coeffs(ExpansionKind::Multipole, old, vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let local = m2l(&mono, new, 6).unwrap();
        let direct = p2l(&[SourceCharge::charge(old, 1.0)], new, 6).unwrap();
        assert!((local.coeffs()[0].re - direct.coeffs()[0].re).abs() < 1e-14);
        for m in 1..=6 {
            assert!(close(local.coeffs()[m], direct.coeffs()[m], 1e-13), "m={m}");
        }
    }

    #[test]
    fn m2l_order_zero() {
        let mono = Expansion::from_coeffs(ExpansionKind::Multipole, c(0.0, 0.0), vec![c(2.5, 0.0)]);
        let y = c(-1.0, 2.0);
        let local = m2l(&mono, y, 0).unwrap();
        assert!(close(local.coeffs()[0], 2.5 * y.ln(), 1e-15));
        assert_eq!(m2l(&mono, c(0.0, 0.0), 0).unwrap_err(), ExpansionError::CoincidentCenters);
    }

    #[test]
    fn l2l_identity_and_exactness() {
        let e = Expansion::from_coeffs(
            ExpansionKind::Local,
            c(0.0, 0.0),
            (0..8).map(|k| c(1.0 / (k + 1) as f64, 0.3 * k as f64)).collect(),
        );
        let same = l2l(&e, c(0.0, 0.0), None).unwrap();
        assert_eq!(same.coeffs(), e.coeffs());
        let shifted = l2l(&e, c(0.3, -0.2), None).unwrap();
        for k in 0..10 {
            let z = Complex64::from_polar(0.4, k as f64);
            assert!((l_eval(&shifted, z) - l_eval(&e, z)).abs() < 1e-13);
        }
    }

    #[test]
    fn l2l_rejects_order_increase() {
        let e = Expansion::zeros(ExpansionKind::Local, c(0.0, 0.0), 3);
        assert_eq!(
            l2l(&e, c(1.0, 0.0), Some(4)).unwrap_err(),
            ExpansionError::OrderIncrease {
                requested: 4,
                available: 3
            }
        );
        assert_eq!(l2l(&e, c(1.0, 0.0), Some(2)).unwrap().order(), 2);
    }

    #[test]
    fn kind_checks() {
        let e = Expansion::zeros(ExpansionKind::Local, c(0.0, 0.0), 3);
        assert!(matches!(m2m(&e, c(1.0, 0.0)), Err(ExpansionError::KindMismatch { .. })));
        assert!(matches!(m_eval(&e, c(1.0, 0.0)), Err(ExpansionError::KindMismatch { .. })));
    }

    #[test]
    fn dipole_is_derivative_of_charge() {
        let z0 = c(0.4, -0.3);
        let n = Complex64::from_polar(1.0, 0.9);
        let eps = 1e-6;
        let plus = SourceCharge::charge(z0 + n * (eps / 2.0), 1.0 / eps);
        let minus = SourceCharge::charge(z0 - n * (eps / 2.0), -1.0 / eps);
        let dip = SourceCharge::dipole(z0, n);

        let mp = p2m(&[plus, minus], c(0.0, 0.0), 10).unwrap();
        let md = p2m(&[dip], c(0.0, 0.0), 10).unwrap();
        for (a, b) in mp.coeffs().iter().zip(md.coeffs()) {
            assert!((a - b).norm() < 1e-6, "{a} vs {b}");
        }
        let far = c(3.0, 1.0);
        let lp = p2l(&[plus, minus], far, 10).unwrap();
        let ld = p2l(&[dip], far, 10).unwrap();
        for (a, b) in lp.coeffs().iter().zip(ld.coeffs()) {
            assert!((a - b).norm() < 1e-6, "{a} vs {b}");
        }
        let t = c(-1.0, 2.0);
        let fd = plus.potential_at(t) + minus.potential_at(t);
        assert!((fd - dip.potential_at(t)).abs() < 1e-6);
    }
}
