//! Exact divergences between finite distributions.
//!
//! Distributions live on atoms (points in ℝ or ℝ²). Two distributions are
//! compared on the union of their supports; an atom missing from one side
//! carries probability 0 there.

use crate::error::{Error, Result};
use crate::scalar::pairwise_sum;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist<T> {
    support: Vec<Vec<T>>,
    probs: Vec<T>,
}

impl<T: Scalar> DiscreteDist<T> {
    pub fn new(support: Vec<Vec<T>>, probs: Vec<T>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::invalid("support and probability lengths differ"));
        }
        if probs.iter().any(|p| !(*p >= T::zero()) || !p.is_finite()) {
            return Err(Error::invalid("probabilities must be finite and nonnegative"));
        }
        if support.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("support points must be finite"));
        }
        let total = pairwise_sum(&probs);
        if (total - T::one()).abs() > T::lit(1e-12) {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        for i in 0..support.len() {
            if support[..i].contains(&support[i]) {
                return Err(Error::invalid("support points must be distinct"));
            }
        }
        Ok(Self { support, probs })
    }

    /// 1D distribution from (point, probability) pairs.
    pub fn on_line(atoms: &[(T, T)]) -> Result<Self> {
        Self::new(atoms.iter().map(|a| vec![a.0]).collect(), atoms.iter().map(|a| a.1).collect())
    }

    /// Unit mass at a single point.
    pub fn point_mass(point: Vec<T>) -> Self {
        Self {
            support: vec![point],
            probs: vec![T::one()],
        }
    }

    /// Normalize arbitrary nonnegative weights.
    pub fn from_weights(support: Vec<Vec<T>>, weights: &[T]) -> Result<Self> {
        let total = pairwise_sum(weights);
        if !(total > T::zero()) {
            return Err(Error::invalid("weights must have positive total"));
        }
        Self::new(support, weights.iter().map(|&w| w / total).collect())
    }

    pub fn support(&self) -> &[Vec<T>] {
        &self.support
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob_of(&self, atom: &[T]) -> T {
        self.support
            .iter()
            .position(|a| a.as_slice() == atom)
            .map_or(T::zero(), |i| self.probs[i])
    }

    /// Marginal along one coordinate axis.
    pub fn marginal(&self, axis: usize) -> Self {
        let mut support: Vec<Vec<T>> = Vec::new();
        let mut probs: Vec<T> = Vec::new();
        for (a, &p) in self.support.iter().zip(&self.probs) {
            let v = vec![a[axis]];
            match support.iter().position(|s| *s == v) {
                Some(i) => probs[i] += p,
                None => {
                    support.push(v);
                    probs.push(p);
                }
            }
        }
        Self { support, probs }
    }

    /// Translate every atom by `c` along the first axis.
    pub fn shifted(&self, c: T) -> Self {
        Self {
            support: self
                .support
                .iter()
                .map(|a| {
                    let mut a = a.clone();
                    a[0] += c;
                    a
                })
                .collect(),
            probs: self.probs.clone(),
        }
    }
}

/// Union of atoms and the aligned probability vectors of P and Q.
fn align<T: Scalar>(p: &DiscreteDist<T>, q: &DiscreteDist<T>) -> (Vec<Vec<T>>, Vec<T>, Vec<T>) {
    let mut atoms = p.support.clone();
    let mut pv = p.probs.clone();
    let mut qv = vec![T::zero(); atoms.len()];
    for (a, &w) in q.support.iter().zip(&q.probs) {
        match atoms.iter().position(|x| x == a) {
            Some(i) => qv[i] = w,
            None => {
                atoms.push(a.clone());
                pv.push(T::zero());
                qv.push(w);
            }
        }
    }
    (atoms, pv, qv)
}

fn kl_aligned<T: Scalar>(p: &[T], q: &[T]) -> T {
    let mut terms = Vec::with_capacity(p.len());
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == T::zero() {
            continue;
        }
        if qi == T::zero() {
            return T::infinity();
        }
        terms.push(pi * (pi / qi).ln());
    }
    pairwise_sum(&terms)
}

/// KL(P‖Q) in nats; +∞ when P puts mass where Q has none.
pub fn kl<T: Scalar>(p: &DiscreteDist<T>, q: &DiscreteDist<T>) -> T {
    let (_, pv, qv) = align(p, q);
    kl_aligned(&pv, &qv)
}

/// Jensen–Shannon divergence in nats, within [0, ln 2].
pub fn jsd<T: Scalar>(p: &DiscreteDist<T>, q: &DiscreteDist<T>) -> T {
    let (_, pv, qv) = align(p, q);
    let half = T::lit(0.5);
    let m: Vec<T> = pv.iter().zip(&qv).map(|(&a, &b)| half * (a + b)).collect();
    half * kl_aligned(&pv, &m) + half * kl_aligned(&qv, &m)
}

/// Total variation distance ½Σ|p − q|.
pub fn tv<T: Scalar>(p: &DiscreteDist<T>, q: &DiscreteDist<T>) -> T {
    let (_, pv, qv) = align(p, q);
    let diffs: Vec<T> = pv.iter().zip(&qv).map(|(&a, &b)| (a - b).abs()).collect();
    T::lit(0.5) * pairwise_sum(&diffs)
}

/// W₁ on the real line: ∫|F_P − F_Q| over the merged sorted support.
pub fn wasserstein_1d<T: Scalar>(p: &DiscreteDist<T>, q: &DiscreteDist<T>) -> Result<T> {
    if p.support.iter().chain(&q.support).any(|a| a.len() != 1) {
        return Err(Error::invalid("wasserstein_1d needs one-dimensional supports"));
    }
    let (atoms, pv, qv) = align(p, q);
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&a, &b| atoms[a][0].partial_cmp(&atoms[b][0]).expect("finite support"));
    let (mut fp, mut fq) = (T::zero(), T::zero());
    let mut terms = Vec::with_capacity(order.len());
    for w in order.windows(2) {
        fp += pv[w[0]];
        fq += qv[w[0]];
        let gap = atoms[w[1]][0] - atoms[w[0]][0];
        terms.push((fp - fq).abs() * gap);
    }
    Ok(pairwise_sum(&terms))
}

/// Atoms per line used to discretize the unit-length segments.
pub const LINE_ATOMS: usize = 8;

/// Uniform distribution on the vertical segment {θ} × [0, 1), discretized.
pub fn vertical_line<T: Scalar>(theta: T) -> DiscreteDist<T> {
    let n = T::of_usize(LINE_ATOMS);
    DiscreteDist {
        support: (0..LINE_ATOMS).map(|i| vec![theta, T::of_usize(i) / n]).collect(),
        probs: vec![T::one() / n; LINE_ATOMS],
    }
}

/// (W, JS, TV) between the segment at θ and the segment at 0.
///
/// W uses the horizontal marginals (the optimal coupling moves every atom
/// straight across); JS and TV use the full planar atoms.
pub fn parallel_lines_triple<T: Scalar>(theta: T) -> (T, T, T) {
    let p_theta = vertical_line(theta);
    let p_zero = vertical_line(T::zero());
    let w = wasserstein_1d(&p_theta.marginal(0), &p_zero.marginal(0)).expect("1D marginals");
    (w, jsd(&p_theta, &p_zero), tv(&p_theta, &p_zero))
}

/// θ values of the default comparison table.
pub const TABLE_THETAS: [f64; 9] = [-1.0, -0.5, -0.01, -0.001, 0.0, 0.001, 0.01, 0.5, 1.0];

/// `theta,W,JS,TV` CSV of [`parallel_lines_triple`] over `thetas`.
pub fn triple_table(thetas: &[f64]) -> String {
    let mut out = String::from("theta,W,JS,TV\n");
    for &t in thetas {
        let (w, js, tv) = parallel_lines_triple(t);
        out.push_str(&format!("{t},{w},{js},{tv}\n"));
    }
    out
}

/// Optimal joint discriminator p_EX / (p_EX + p_GZ) on every atom carrying mass.
pub fn optimal_joint_discriminator<T: Scalar>(p_ex: &DiscreteDist<T>, p_gz: &DiscreteDist<T>) -> Vec<(Vec<T>, T)> {
    let (atoms, pv, qv) = align(p_ex, p_gz);
    atoms
        .into_iter()
        .zip(pv.iter().zip(&qv))
        .filter(|(_, (&a, &b))| a + b > T::zero())
        .map(|(atom, (&a, &b))| (atom, a / (a + b)))
        .collect()
}

/// E_{P_EX}[ln f] + E_{P_GZ}[ln(1 − f)] under the optimal discriminator f.
pub fn value_at_optimum<T: Scalar>(p_ex: &DiscreteDist<T>, p_gz: &DiscreteDist<T>) -> T {
    let (_, pv, qv) = align(p_ex, p_gz);
    let mut terms = Vec::with_capacity(2 * pv.len());
    for (&a, &b) in pv.iter().zip(&qv) {
        if a + b == T::zero() {
            continue;
        }
        let f = a / (a + b);
        if a > T::zero() {
            terms.push(a * f.ln());
        }
        if b > T::zero() {
            terms.push(b * (T::one() - f).ln());
        }
    }
    pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    #[test]
    fn table_has_one_row_per_theta() {
        let t = triple_table(&[0.0, 0.5]);
        assert_eq!(t.lines().collect::<Vec<_>>(), vec!["theta,W,JS,TV", "0,0,0,0", &format!("0.5,0.5,{LN_2},1")]);
    }

    fn d(atoms: &[(f64, f64)]) -> DiscreteDist<f64> {
        DiscreteDist::on_line(atoms).unwrap()
    }

    #[test]
    fn validation() {
        assert!(DiscreteDist::on_line(&[(0.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(DiscreteDist::on_line(&[(0.0, 0.5), (0.0, 0.5)]).is_err());
        assert!(DiscreteDist::on_line(&[(0.0, -0.5), (1.0, 1.5)]).is_err());
    }

    #[test]
    fn kl_cases() {
        let p = d(&[(0.0, 1.0)]);
        let q = d(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(kl(&p, &p), 0.0);
        assert!((kl(&p, &q) - LN_2).abs() < 1e-15);
        assert_eq!(kl(&p, &d(&[(1.0, 1.0)])), f64::INFINITY);
        assert!(kl(&q, &p).is_infinite());
    }

    #[test]
    fn jsd_cases() {
        let p = d(&[(0.0, 0.3), (1.0, 0.7)]);
        assert_eq!(jsd(&p, &p), 0.0);
        assert_eq!(jsd(&d(&[(0.0, 1.0)]), &d(&[(1.0, 1.0)])), LN_2);
    }

    #[test]
    fn tv_cases() {
        let p = d(&[(0.0, 0.7), (1.0, 0.3)]);
        let q = d(&[(0.0, 0.4), (1.0, 0.6)]);
        assert_eq!(tv(&p, &p), 0.0);
        assert_eq!(tv(&d(&[(0.0, 1.0)]), &d(&[(1.0, 1.0)])), 1.0);
        assert!((tv(&p, &q) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_point_masses() {
        for theta in [0.0, 0.3, -2.5] {
            let w = wasserstein_1d(&d(&[(theta, 1.0)]), &d(&[(0.0, 1.0)])).unwrap();
            assert_eq!(w, f64::abs(theta));
        }
        let p = d(&[(0.0, 0.25), (2.0, 0.75)]);
        assert_eq!(wasserstein_1d(&p, &p).unwrap(), 0.0);
        assert!(wasserstein_1d(&vertical_line(0.0), &vertical_line(1.0)).is_err());
    }

    #[test]
    fn triple_values() {
        assert_eq!(parallel_lines_triple(0.0), (0.0, 0.0, 0.0));
        assert_eq!(parallel_lines_triple(0.5), (0.5, LN_2, 1.0));
        assert_eq!(parallel_lines_triple(-0.5), (0.5, LN_2, 1.0));
        for theta in [1e-1, 1e-2, 1e-3] {
            let (w, js, t) = parallel_lines_triple(theta);
            assert_eq!((w, js, t), (theta, LN_2, 1.0));
        }
        let (w, js, t) = parallel_lines_triple(0.25f32);
        assert_eq!((w, js, t), (0.25, std::f32::consts::LN_2, 1.0));
    }

    #[test]
    fn discriminator_cases() {
        let p = DiscreteDist::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        assert!(optimal_joint_discriminator(&p, &p).iter().all(|(_, f)| *f == 0.5));
        let q = DiscreteDist::point_mass(vec![0.0, 1.0]);
        let table = optimal_joint_discriminator(&p, &q);
        let f = |atom: &[f64]| table.iter().find(|(a, _)| a == atom).unwrap().1;
        assert_eq!(f(&[1.0, 0.0]), 1.0);
        assert!((f(&[0.0, 1.0]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((value_at_optimum(&p, &p) + 2.0 * LN_2).abs() < 1e-15);
        let disjoint = DiscreteDist::point_mass(vec![5.0, 5.0]);
        assert_eq!(value_at_optimum(&p, &disjoint), 0.0);
    }

    fn dist_strategy() -> impl Strategy<Value = DiscreteDist<f64>> {
        prop::collection::vec((0u8..6, 0.01f64..1.0), 1..6).prop_map(|atoms| {
            let mut support: Vec<Vec<f64>> = Vec::new();
            let mut w = Vec::new();
            for (a, p) in atoms {
                if !support.contains(&vec![a as f64]) {
                    support.push(vec![a as f64]);
                    w.push(p);
                }
            }
            DiscreteDist::from_weights(support, &w).unwrap()
        })
    }

    proptest! {
        #[test]
        fn jsd_symmetric_and_bounded(p in dist_strategy(), q in dist_strategy()) {
            let a = jsd(&p, &q);
            prop_assert!((a - jsd(&q, &p)).abs() < 1e-15);
            prop_assert!(a >= -1e-15 && a <= LN_2 + 1e-15);
        }

        #[test]
        fn tv_triangle(p in dist_strategy(), q in dist_strategy(), r in dist_strategy()) {
            prop_assert!(tv(&p, &r) <= tv(&p, &q) + tv(&q, &r) + 1e-12);
        }

        #[test]
        fn wasserstein_translation(p in dist_strategy(), q in dist_strategy(), c in -10.0f64..10.0) {
            let base = wasserstein_1d(&p, &q).unwrap();
            let moved = wasserstein_1d(&p.shifted(c), &q.shifted(c)).unwrap();
            prop_assert!((base - moved).abs() < 1e-9);
        }

        #[test]
        fn discriminator_in_unit_interval(p in dist_strategy(), q in dist_strategy()) {
            for (_, f) in optimal_joint_discriminator(&p, &q) {
                prop_assert!((0.0..=1.0).contains(&f));
            }
        }
    }
}
