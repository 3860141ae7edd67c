//! Truncated series feature families on `[-1, 1]`.
//!
//! A basis is a finite family of bounded functions `ξ_k` with known bounds
//! `b_k` on their derivatives. Two families are provided:
//!
//! * Taylor: `x, x², …, x^N` with derivative bounds `1, 2, …, N`;
//! * Fourier: interleaved `cos(nπx), sin(nπx)` for `n = 1..N`, each with
//!   derivative bound `nπ`.
//!
//! Constant terms are excluded from both families: they cancel in any
//! expectation difference and carry a zero derivative bound.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Taylor,
    Fourier,
}

impl BasisKind {
    /// Components per series index: one power term, or a cos/sin pair.
    pub fn components_per_term(self) -> usize {
        match self {
            BasisKind::Taylor => 1,
            BasisKind::Fourier => 2,
        }
    }
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisKind::Taylor => write!(f, "taylor"),
            BasisKind::Fourier => write!(f, "fourier"),
        }
    }
}

/// A truncated series family: kind plus truncation order `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesBasis {
    kind: BasisKind,
    n_terms: usize,
}

impl SeriesBasis {
    pub fn new(kind: BasisKind, n_terms: usize) -> Result<Self> {
        if n_terms == 0 {
            return Err(Error::invalid("series truncation must be at least 1"));
        }
        Ok(SeriesBasis { kind, n_terms })
    }

    pub fn taylor(n_terms: usize) -> Result<Self> {
        Self::new(BasisKind::Taylor, n_terms)
    }

    pub fn fourier(n_terms: usize) -> Result<Self> {
        Self::new(BasisKind::Fourier, n_terms)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    /// Number of retained features, `N·M`.
    pub fn len(&self) -> usize {
        self.n_terms * self.kind.components_per_term()
    }

    pub fn is_empty(&self) -> bool {
        false // n_terms >= 1 by construction
    }

    fn check_domain(x: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        Ok(())
    }

    /// Evaluate every feature at `x`.
    ///
    /// Taylor order: `(x, x², …, x^N)`. Fourier order: interleaved
    /// `(cos(πx), sin(πx), …, cos(Nπx), sin(Nπx))`.
    pub fn eval_features(&self, x: f64) -> Result<Vec<f64>> {
        Self::check_domain(x)?;
        let mut out = vec![0.0; self.len()];
        self.eval_features_unchecked(x, &mut out);
        Ok(out)
    }

    /// Derivatives `ξ'_k(x)` in feature order.
    pub fn feature_derivatives(&self, x: f64) -> Result<Vec<f64>> {
        Self::check_domain(x)?;
        let mut out = vec![0.0; self.len()];
        self.feature_derivatives_unchecked(x, &mut out);
        Ok(out)
    }

    /// Per-feature bounds on `|ξ'_k|` over `[-1, 1]`, in feature order.
    pub fn derivative_bounds(&self) -> Vec<f64> {
        match self.kind {
            BasisKind::Taylor => (1..=self.n_terms).map(|n| n as f64).collect(),
            BasisKind::Fourier => (1..=self.n_terms)
                .flat_map(|n| {
                    let b = n as f64 * PI;
                    [b, b]
                })
                .collect(),
        }
    }

    /// Accumulate features into `acc` (used for batch feature means).
    pub(crate) fn accumulate_features(&self, x: f64, acc: &mut [f64]) {
        debug_assert_eq!(acc.len(), self.len());
        match self.kind {
            BasisKind::Taylor => {
                let mut p = 1.0;
                for slot in acc.iter_mut() {
                    p *= x;
                    *slot += p;
                }
            }
            BasisKind::Fourier => {
                // Angle-addition recurrence: one sin/cos pair per sample
                // instead of 2N trig calls.
                let (s1, c1) = (PI * x).sin_cos();
                let (mut c, mut s) = (1.0, 0.0);
                for pair in acc.chunks_exact_mut(2) {
                    let (cn, sn) = (c * c1 - s * s1, s * c1 + c * s1);
                    pair[0] += cn;
                    pair[1] += sn;
                    c = cn;
                    s = sn;
                }
            }
        }
    }

    fn eval_features_unchecked(&self, x: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.accumulate_features(x, out);
    }

    fn feature_derivatives_unchecked(&self, x: f64, out: &mut [f64]) {
        match self.kind {
            BasisKind::Taylor => {
                // d/dx x^n = n·x^(n-1)
                let mut p = 1.0;
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = (i + 1) as f64 * p;
                    p *= x;
                }
            }
            BasisKind::Fourier => {
                let (s1, c1) = (PI * x).sin_cos();
                let (mut c, mut s) = (1.0, 0.0);
                for (n, pair) in out.chunks_exact_mut(2).enumerate() {
                    let (cn, sn) = (c * c1 - s * s1, s * c1 + c * s1);
                    let w = (n + 1) as f64 * PI;
                    pair[0] = -w * sn;
                    pair[1] = w * cn;
                    c = cn;
                    s = sn;
                }
            }
        }
    }

    /// Dot product of `coeffs` with the feature derivatives at `x`, without
    /// materializing the derivative vector. Domain is the caller's concern.
    pub(crate) fn derivative_dot(&self, coeffs: &[f64], x: f64) -> f64 {
        debug_assert_eq!(coeffs.len(), self.len());
        match self.kind {
            BasisKind::Taylor => {
                let mut p = 1.0;
                let mut acc = 0.0;
                for (i, a) in coeffs.iter().enumerate() {
                    acc += a * (i + 1) as f64 * p;
                    p *= x;
                }
                acc
            }
            BasisKind::Fourier => {
                let (s1, c1) = (PI * x).sin_cos();
                let (mut c, mut s) = (1.0, 0.0);
                let mut acc = 0.0;
                for (n, pair) in coeffs.chunks_exact(2).enumerate() {
                    let (cn, sn) = (c * c1 - s * s1, s * c1 + c * s1);
                    let w = (n + 1) as f64 * PI;
                    acc += pair[0] * (-w * sn) + pair[1] * (w * cn);
                    c = cn;
                    s = sn;
                }
                acc
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn taylor_features_are_powers() {
        let basis = SeriesBasis::taylor(3).unwrap();
        assert_close(&basis.eval_features(1.0).unwrap(), &[1.0, 1.0, 1.0], 0.0);
        let basis = SeriesBasis::taylor(2).unwrap();
        assert_close(&basis.eval_features(-0.5).unwrap(), &[-0.5, 0.25], 1e-15);
    }

    #[test]
    fn fourier_features_interleave_cos_sin() {
        let basis = SeriesBasis::fourier(1).unwrap();
        // cos(π/2) = 0, sin(π/2) = 1
        assert_close(&basis.eval_features(0.5).unwrap(), &[0.0, 1.0], 1e-12);
    }

    #[test]
    fn fourier_recurrence_matches_direct_trig() {
        let basis = SeriesBasis::fourier(20).unwrap();
        let mut rng = crate::rng::stream_rng(11, 0);
        for _ in 0..200 {
            let x: f64 = rng.gen_range(-1.0..=1.0);
            let feats = basis.eval_features(x).unwrap();
            for n in 1..=20usize {
                let arg = n as f64 * PI * x;
                assert!((feats[2 * (n - 1)] - arg.cos()).abs() < 1e-12);
                assert!((feats[2 * n - 1] - arg.sin()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_bounds_match_reference_values() {
        assert_close(
            &SeriesBasis::taylor(3).unwrap().derivative_bounds(),
            &[1.0, 2.0, 3.0],
            0.0,
        );
        assert_close(
            &SeriesBasis::fourier(2).unwrap().derivative_bounds(),
            &[PI, PI, 2.0 * PI, 2.0 * PI],
            0.0,
        );
        assert_close(&SeriesBasis::taylor(1).unwrap().derivative_bounds(), &[1.0], 0.0);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let basis = SeriesBasis::taylor(2).unwrap();
        assert!(matches!(basis.eval_features(1.5), Err(Error::OutOfDomain(_))));
        assert!(matches!(basis.feature_derivatives(-1.0001), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn features_stay_bounded_by_one() {
        let mut rng = crate::rng::stream_rng(3, 0);
        for basis in [SeriesBasis::taylor(20).unwrap(), SeriesBasis::fourier(20).unwrap()] {
            for _ in 0..1000 {
                let x: f64 = rng.gen_range(-1.0..=1.0);
                for f in basis.eval_features(x).unwrap() {
                    assert!(f.abs() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn finite_differences_respect_derivative_bounds() {
        let mut rng = crate::rng::stream_rng(4, 0);
        let h = 1e-6;
        for basis in [SeriesBasis::taylor(12).unwrap(), SeriesBasis::fourier(12).unwrap()] {
            let bounds = basis.derivative_bounds();
            for _ in 0..100 {
                let x: f64 = rng.gen_range(-0.99..=0.99);
                let up = basis.eval_features(x + h).unwrap();
                let dn = basis.eval_features(x - h).unwrap();
                for (k, b) in bounds.iter().enumerate() {
                    let fd = (up[k] - dn[k]) / (2.0 * h);
                    assert!(fd.abs() <= b + 1e-6, "feature {k}: |{fd}| > {b}");
                }
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let mut rng = crate::rng::stream_rng(5, 0);
        let h = 1e-6;
        for basis in [SeriesBasis::taylor(10).unwrap(), SeriesBasis::fourier(10).unwrap()] {
            for _ in 0..100 {
                let x: f64 = rng.gen_range(-0.99..=0.99);
                let d = basis.feature_derivatives(x).unwrap();
                let up = basis.eval_features(x + h).unwrap();
                let dn = basis.eval_features(x - h).unwrap();
                for k in 0..basis.len() {
                    let fd = (up[k] - dn[k]) / (2.0 * h);
                    assert!((fd - d[k]).abs() <= 1e-5 * (1.0 + d[k].abs()));
                }
            }
        }
    }

    #[test]
    fn feature_and_bound_lengths_agree() {
        for basis in [SeriesBasis::taylor(7).unwrap(), SeriesBasis::fourier(7).unwrap()] {
            assert_eq!(basis.eval_features(0.3).unwrap().len(), basis.len());
            assert_eq!(basis.derivative_bounds().len(), basis.len());
            assert_eq!(basis.feature_derivatives(0.3).unwrap().len(), basis.len());
        }
    }
}
