//! Single-site densities, rescalings, sampling and Fourier decay.
//!
//! A density is either the uniform distribution on `[0,1]` or a tabulated
//! compactly supported density given by `(abscissa, value)` pairs with
//! trapezoid quadrature. The rescaling `r_a(x) = a^{-1} r(x/a)` is the
//! distribution of `a * X` for `X ~ r`.

use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

const NORMALIZATION_TOL: f64 = 1e-9;

/// Compactly supported bounded probability density.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    /// Uniform on `[0, 1]`.
    Uniform,
    /// Tabulated density; linear interpolation between nodes, zero outside.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

impl Density {
    /// Build a tabulated density, validating support, nonnegativity and
    /// unit mass (trapezoid rule, 1e-9).
    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidDensity(
                "need at least two (abscissa, value) pairs".into(),
            ));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidDensity(
                "abscissae must be strictly increasing".into(),
            ));
        }
        if !xs.iter().chain(ys.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidDensity("non-finite table entry".into()));
        }
        if ys.iter().any(|&y| y < 0.0) {
            return Err(Error::InvalidDensity("negative density value".into()));
        }
        let mass: f64 = xs
            .windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
            .sum();
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDensity(format!(
                "trapezoid mass {mass} deviates from 1 by more than {NORMALIZATION_TOL}"
            )));
        }
        Ok(Density::Tabulated { xs, ys })
    }

    /// Load a two-column `(abscissa, value)` plain-text file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(a), Some(b)) = (it.next(), it.next()) else {
                return Err(Error::Parse(format!("line {}: need two columns", lineno + 1)));
            };
            xs.push(a.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?);
            ys.push(b.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?);
        }
        Density::tabulated(xs, ys)
    }

    /// Support interval `[lo, hi]`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Density::Uniform => (0.0, 1.0),
            Density::Tabulated { xs, .. } => (xs[0], *xs.last().unwrap()),
        }
    }

    /// Supremum of the density.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Density::Uniform => 1.0,
            Density::Tabulated { ys, .. } => ys.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Evaluate `r(x)`; exactly zero outside the support.
    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            Density::Uniform => {
                if (0.0..=1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Density::Tabulated { xs, ys } => {
                if x < xs[0] || x > *xs.last().unwrap() {
                    return 0.0;
                }
                let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                    Ok(i) => return ys[i],
                    Err(i) => i - 1,
                };
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                ys[i] + t * (ys[i + 1] - ys[i])
            }
        }
    }

    /// Rescale by `a > 0`.
    pub fn rescale(&self, a: f64) -> Result<ScaledDensity> {
        ScaledDensity::new(self.clone(), a)
    }

    /// Inverse-CDF sample.
    pub fn sample(&self, stream: &mut ChaCha8Rng) -> f64 {
        let u: f64 = stream.gen::<f64>();
        self.inverse_cdf(u)
    }

    fn inverse_cdf(&self, u: f64) -> f64 {
        match self {
            Density::Uniform => u,
            Density::Tabulated { xs, ys } => {
                // Piecewise-quadratic CDF from the trapezoid rule.
                let mut acc = 0.0;
                for i in 0..xs.len() - 1 {
                    let h = xs[i + 1] - xs[i];
                    let cell = 0.5 * (ys[i] + ys[i + 1]) * h;
                    if acc + cell >= u || i == xs.len() - 2 {
                        let target = (u - acc).clamp(0.0, cell);
                        // Solve 0.5*(2*y0 + slope*t)*t = target on t in [0,h].
                        let slope = (ys[i + 1] - ys[i]) / h;
                        let t = if slope.abs() < 1e-300 {
                            if ys[i] > 0.0 { target / ys[i] } else { 0.0 }
                        } else {
                            let disc = (ys[i] * ys[i] + 2.0 * slope * target).max(0.0);
                            (disc.sqrt() - ys[i]) / slope
                        };
                        return xs[i] + t.clamp(0.0, h);
                    }
                    acc += cell;
                }
                *xs.last().unwrap()
            }
        }
    }

    /// `|r̂(k)|²` with the convention `r̂(k) = ∫ e^{ikx} r(x) dx`.
    ///
    /// Closed form for the uniform kind; trapezoid quadrature otherwise.
    /// Only the modulus is consumed downstream, so the phase convention is
    /// immaterial.
    pub fn fourier_sq(&self, k: f64) -> f64 {
        match self {
            Density::Uniform => {
                if k == 0.0 {
                    1.0
                } else {
                    (2.0 - 2.0 * k.cos()) / (k * k)
                }
            }
            Density::Tabulated { xs, .. } => {
                let mut re = 0.0;
                let mut im = 0.0;
                for i in 0..xs.len() - 1 {
                    // Refine each table cell so oscillations of e^{ikx} are
                    // captured for moderate k.
                    let h = xs[i + 1] - xs[i];
                    let sub = (1 + (k.abs() * h / 0.2) as usize).min(64);
                    let hs = h / sub as f64;
                    for s in 0..sub {
                        let x0 = xs[i] + s as f64 * hs;
                        let x1 = x0 + hs;
                        let y0 = self.evaluate(x0);
                        let y1 = self.evaluate(x1);
                        re += 0.5 * (y0 * (k * x0).cos() + y1 * (k * x1).cos()) * hs;
                        im += 0.5 * (y0 * (k * x0).sin() + y1 * (k * x1).sin()) * hs;
                    }
                }
                re * re + im * im
            }
        }
    }

    /// Estimate the largest `c > 0` with
    /// `sup_{λ' ≤ |k| ≤ k_max} |r̂(k)|² ≤ e^{-c λ'²}` for every `λ'` on a
    /// log-spaced grid in `[lambda, k_max]`.
    pub fn decay_constant(&self, lambda: f64, k_max: f64) -> Result<DecayConstant> {
        self.decay_constant_with_grid(lambda, k_max, 10_000)
    }

    /// As [`Self::decay_constant`] with an explicit grid size.
    pub fn decay_constant_with_grid(
        &self,
        lambda: f64,
        k_max: f64,
        grid_points: usize,
    ) -> Result<DecayConstant> {
        if !(lambda > 0.0 && lambda < k_max) {
            return Err(Error::BoundViolation(format!(
                "degenerate grid: need 0 < lambda < k_max, got lambda={lambda}, k_max={k_max}"
            )));
        }
        let ratio = (k_max / lambda).ln();
        let grid: Vec<f64> = (0..grid_points)
            .map(|i| lambda * (ratio * i as f64 / (grid_points - 1) as f64).exp())
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&k| self.fourier_sq(k)).collect();
        // Suffix suprema: sup over grid points with k >= grid[i].
        let mut sup = vec![0.0f64; grid_points];
        let mut run = 0.0f64;
        for i in (0..grid_points).rev() {
            run = run.max(vals[i]);
            sup[i] = run;
        }
        let mut c = f64::INFINITY;
        for i in 0..grid_points {
            if sup[i] >= 1.0 {
                return Err(Error::BoundViolation(format!(
                    "|r̂|² reaches {} at k ≥ {}",
                    sup[i], grid[i]
                )));
            }
            c = c.min(-sup[i].ln() / (grid[i] * grid[i]));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::BoundViolation(format!("no positive constant, c={c}")));
        }
        Ok(DecayConstant {
            c,
            lambda,
            k_max,
            grid_points,
        })
    }
}

/// Result of the Fourier-decay grid search, including the grid it was
/// established on.
#[derive(Debug, Clone, Copy)]
pub struct DecayConstant {
    pub c: f64,
    pub lambda: f64,
    pub k_max: f64,
    pub grid_points: usize,
}

/// `r_a(x) = a^{-1} r(x/a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledDensity {
    base: Density,
    scale: f64,
}

impl ScaledDensity {
    pub fn new(base: Density, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidScale(format!("scale must be positive, got {scale}")));
        }
        Ok(ScaledDensity { base, scale })
    }

    pub fn base(&self) -> &Density {
        &self.base
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.base.support();
        (self.scale * lo, self.scale * hi)
    }

    pub fn sup_bound(&self) -> f64 {
        self.base.sup_bound() / self.scale
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.base.evaluate(x / self.scale) / self.scale
    }

    pub fn sample(&self, stream: &mut ChaCha8Rng) -> f64 {
        self.scale * self.base.sample(stream)
    }
}

/// Convenience: sample `r_a` at site `n` of a seeded experiment.
pub fn sample_scaled(base: &Density, a: f64, seed: u64, path: &[u64]) -> Result<f64> {
    let d = base.rescale(a)?;
    Ok(d.sample(&mut rng::substream(seed, path)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn uniform_evaluate() {
        let d = Density::Uniform;
        assert_eq!(d.evaluate(0.5), 1.0);
        assert_eq!(d.evaluate(2.0), 0.0);
        let s = d.rescale(0.1).unwrap();
        assert!((s.evaluate(0.05) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rescale_invariants() {
        let d = Density::Uniform;
        let s1 = d.rescale(1.0).unwrap();
        assert_eq!(s1.support(), (0.0, 1.0));
        assert_eq!(s1.sup_bound(), 1.0);
        let eps = 1e-3;
        let s = d.rescale(eps).unwrap();
        assert_eq!(s.support(), (0.0, eps));
        assert!((s.sup_bound() - 1.0 / eps).abs() < 1e-6);
        assert!(d.rescale(0.0).is_err());
        assert!(d.rescale(-1.0).is_err());
    }

    #[test]
    fn scaled_mass_is_one() {
        // Trapezoid mass of the rescaled density.
        for &a in &[1.0, 0.1, 3.7] {
            let s = Density::Uniform.rescale(a).unwrap();
            let (lo, hi) = s.support();
            let n = 200_001;
            let h = (hi - lo) / (n - 1) as f64;
            let mass: f64 = (0..n)
                .map(|i| {
                    let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    w * s.evaluate(lo + i as f64 * h) * h
                })
                .sum();
            assert!((mass - 1.0).abs() < 1e-3, "mass {mass} at a={a}");
        }
    }

    #[test]
    fn sample_support_and_mean() {
        let d = Density::Uniform;
        let mut st = substream(1, &[0]);
        for _ in 0..100 {
            let x = d.sample(&mut st);
            assert!((0.0..=1.0).contains(&x));
        }
        let s = d.rescale(1e-3).unwrap();
        for _ in 0..100 {
            let x = s.sample(&mut st);
            assert!((0.0..=1e-3).contains(&x));
        }
        // CLT bound: |mean - 0.5| < 4 * sigma / sqrt(N), sigma = 1/sqrt(12).
        let n = 1_000_000usize;
        let mut st = substream(42, &[7]);
        let mean: f64 = (0..n).map(|_| d.sample(&mut st)).sum::<f64>() / n as f64;
        let bound = 4.0 / (12.0f64.sqrt() * (n as f64).sqrt());
        assert!((mean - 0.5).abs() < bound, "mean {mean}, bound {bound}");
    }

    #[test]
    fn uniform_ks_statistic() {
        // KS statistic over 1e5 draws below the 1% critical value.
        let n = 100_000usize;
        let mut st = substream(3, &[0]);
        let mut xs: Vec<f64> = (0..n).map(|_| Density::Uniform.sample(&mut st)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d_stat = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            d_stat = d_stat.max((x - lo).abs()).max((hi - x).abs());
        }
        let crit = 1.628 / (n as f64).sqrt();
        assert!(d_stat < crit, "KS {d_stat} vs {crit}");
    }

    #[test]
    fn fourier_closed_form() {
        let d = Density::Uniform;
        assert_eq!(d.fourier_sq(0.0), 1.0);
        let v = d.fourier_sq(std::f64::consts::PI);
        assert!((v - 4.0 / (std::f64::consts::PI * std::f64::consts::PI)).abs() < 1e-12);
        assert!(d.fourier_sq(0.1) > d.fourier_sq(0.2));
        for &k in &[0.3, 1.0, 2.0, 7.0] {
            assert!(d.fourier_sq(k) <= 1.0);
        }
    }

    #[test]
    fn fourier_tabulated_matches_uniform() {
        // Tabulated approximation of the uniform density.
        let n = 2001;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let ys = vec![1.0; n];
        let t = Density::tabulated(xs, ys).unwrap();
        for &k in &[0.0, 0.5, 1.5, 3.0] {
            assert!((t.fourier_sq(k) - Density::Uniform.fourier_sq(k)).abs() < 1e-4);
        }
    }

    #[test]
    fn decay_constant_near_one_twelfth() {
        // |r̂|² = 1 - k²/12 + O(k⁴) for the uniform density; on [0.01, 1]
        // the grid search lands within 10% of 1/12.
        let dc = Density::Uniform.decay_constant(0.01, 1.0).unwrap();
        assert!(
            (dc.c - 1.0 / 12.0).abs() < 0.1 / 12.0,
            "c = {} vs 1/12 = {}",
            dc.c,
            1.0 / 12.0
        );
        // Postcondition replay on a fresh grid.
        for i in 0..200 {
            let lp = 0.01 * (1.0f64 / 0.01).powf(i as f64 / 199.0);
            let sup: f64 = (0..500)
                .map(|j| {
                    let k = lp + (1.0 - lp) * j as f64 / 499.0;
                    Density::Uniform.fourier_sq(k)
                })
                .fold(0.0, f64::max);
            assert!(sup <= (-dc.c * lp * lp).exp() + 1e-12);
        }
    }

    #[test]
    fn decay_constant_degenerate_grid() {
        assert!(Density::Uniform.decay_constant(1.0, 1.0).is_err());
        assert!(Density::Uniform.decay_constant(2.0, 1.0).is_err());
    }

    #[test]
    fn tabulated_validation() {
        // Not normalized.
        assert!(Density::tabulated(vec![0.0, 1.0], vec![2.0, 2.0]).is_err());
        // Not increasing.
        assert!(Density::tabulated(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        // Negative value.
        assert!(Density::tabulated(vec![0.0, 0.5, 1.0], vec![-0.1, 2.1, -0.1]).is_err());
        // Triangle density on [0,2]: ok.
        let t = Density::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.support(), (0.0, 2.0));
        assert_eq!(t.sup_bound(), 1.0);
        assert!((t.evaluate(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tabulated_sampling_matches_cdf() {
        let t = Density::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        let mut st = substream(9, &[0]);
        let n = 200_000;
        let below_one = (0..n).filter(|_| t.sample(&mut st) <= 1.0).count();
        let frac = below_one as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "frac {frac}");
    }
}
