//! Monte Carlo estimation of the eigenfunction correlator
//! `ρ_L(n, m) = E(Σ_k |⟨δ_n, φ^k⟩| |⟨δ_m, φ^k⟩|)` on finite windows,
//! the dynamical bound check `|⟨δ_n, e^{-itH} δ_m⟩| ≤ correlator`, decay
//! fitting, and evaluation of the closed-form theoretical decay bounds.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::diophantine::SeqRule;
use crate::error::{Error, Result};
use crate::potentials::{
    limit_periodic_potential, qp_bump_potential, sample_hier_potential, sample_ks_potential,
    HierSpec, KSSpec, PotentialWindow,
};
use crate::rng::substream;
use crate::spectra::TridiagonalOperator;

// ---------------------------------------------------------------------------
// Potential constructions usable per Monte Carlo trial
// ---------------------------------------------------------------------------

/// Any of the potential constructions, sampled freshly per trial.
#[derive(Debug, Clone)]
pub enum SpecKind {
    Ks(KSSpec),
    Hier(HierSpec),
    Qp {
        alpha: f64,
        omega: f64,
        eps: f64,
        alpha_exp: f64,
    },
    LimitPeriodic {
        eps: f64,
        gamma: f64,
        k_levels: usize,
    },
}

impl SpecKind {
    pub fn sample(&self, l: i64, seed: u64) -> Result<PotentialWindow> {
        match self {
            SpecKind::Ks(s) => sample_ks_potential(s, l, seed),
            SpecKind::Hier(s) => sample_hier_potential(s, l, seed, None),
            SpecKind::Qp {
                alpha,
                omega,
                eps,
                alpha_exp,
            } => Ok(qp_bump_potential(*alpha, *omega, *eps, *alpha_exp, l, seed, None)?.window),
            SpecKind::LimitPeriodic { eps, gamma, k_levels } => {
                let density = crate::distributions::Density::Uniform;
                Ok(limit_periodic_potential(&density, *eps, *gamma, None, l, *k_levels, seed)?.window)
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SpecKind::Ks(_) => "ks",
            SpecKind::Hier(_) => "hier",
            SpecKind::Qp { .. } => "qp",
            SpecKind::LimitPeriodic { .. } => "lp",
        }
    }
}

/// Per-trial seed, pre-derived from the master seed so trial dispatch order
/// and worker count cannot affect the draws.
fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    rand::Rng::gen::<u64>(&mut substream(master_seed, &[u64::MAX, trial]))
}

// ---------------------------------------------------------------------------
// Decay profiles
// ---------------------------------------------------------------------------

/// One site's Monte Carlo statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub n: i64,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Monte Carlo estimate of `ρ_L(·, m)` over a window `[-L, L]`.
#[derive(Debug, Clone)]
pub struct DecayProfile {
    pub l: i64,
    pub m: i64,
    pub rows: Vec<DecayRow>,
    pub construction: String,
    pub master_seed: u64,
    /// Trials dropped because diagonalization failed (counted, not retried
    /// into the statistic).
    pub failures: usize,
}

impl DecayProfile {
    pub fn row(&self, n: i64) -> Option<&DecayRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// CSV export `n,mean,stderr,trials[,theoretical_bound]`; the bound
    /// column appears when a bound evaluator is supplied.
    pub fn to_csv(&self, bound: Option<&dyn Fn(i64) -> f64>) -> String {
        let mut s = String::new();
        match bound {
            Some(_) => s.push_str("n,mean,stderr,trials,theoretical_bound\n"),
            None => s.push_str("n,mean,stderr,trials\n"),
        }
        for r in &self.rows {
            match bound {
                Some(b) => {
                    let _ = writeln!(s, "{},{},{},{},{}", r.n, r.mean, r.stderr, r.trials, b(r.n));
                }
                None => {
                    let _ = writeln!(s, "{},{},{},{}", r.n, r.mean, r.stderr, r.trials);
                }
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if !header.starts_with("n,mean,stderr,trials") {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() < 4 {
                return Err(Error::Parse(format!("short row {line:?}")));
            }
            rows.push(DecayRow {
                n: f[0].parse().map_err(|_| Error::Parse(format!("bad n {:?}", f[0])))?,
                mean: f[1].parse().map_err(|_| Error::Parse(format!("bad mean {:?}", f[1])))?,
                stderr: f[2]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad stderr {:?}", f[2])))?,
                trials: f[3]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad trials {:?}", f[3])))?,
            });
        }
        if rows.is_empty() {
            return Err(Error::Parse("empty profile".into()));
        }
        let l = rows.iter().map(|r| r.n.abs()).max().unwrap();
        Ok(DecayProfile {
            l,
            m: 0,
            rows,
            construction: "imported".into(),
            master_seed: 0,
            failures: 0,
        })
    }
}

/// Compensated (Kahan) accumulator for the fixed-order reductions.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Estimate `ρ_L(n, m)` for all `n ∈ [-L, L]` by Monte Carlo over fresh
/// potential realizations. Trials whose diagonalization fails are counted
/// in `failures` and excluded from the statistic. Accumulation is in fixed
/// trial order with compensated summation, so the result is bit-identical
/// regardless of how many workers computed the trials.
pub fn rho_estimate(
    spec: &SpecKind,
    l: i64,
    m: i64,
    trials: usize,
    master_seed: u64,
) -> Result<DecayProfile> {
    if trials < 2 {
        return Err(Error::SpecViolation(format!("need >= 2 trials, got {trials}")));
    }
    if m.abs() > l {
        return Err(Error::OutOfRange { site: m, lo: -l, hi: l });
    }
    let size = (2 * l + 1) as usize;
    // Each trial yields the correlator row (or None on solver failure);
    // trials are independent and safe to compute in parallel.
    let results: Vec<Option<Vec<f64>>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let w = spec.sample(l, trial_seed(master_seed, t)).ok()?;
            let e = TridiagonalOperator::build(&w).eigen().ok()?;
            Some((-l..=l).map(|n| e.correlator(n, m)).collect())
        })
        .collect();
    let mut sums = vec![Kahan::default(); size];
    let mut succ = 0usize;
    for row in results.iter().flatten() {
        succ += 1;
        for (i, &v) in row.iter().enumerate() {
            sums[i].add(v);
        }
    }
    let failures = trials - succ;
    if succ < 2 {
        return Err(Error::DegenerateSample(format!(
            "only {succ} of {trials} trials succeeded"
        )));
    }
    let means: Vec<f64> = sums.iter().map(|s| s.sum / succ as f64).collect();
    // Second pass over the stored trial rows: summing squared deviations
    // avoids the catastrophic cancellation of the sum-of-squares formula.
    let mut dev_sums = vec![Kahan::default(); size];
    for row in results.iter().flatten() {
        for (i, &v) in row.iter().enumerate() {
            dev_sums[i].add((v - means[i]).powi(2));
        }
    }
    let rows = (0..size)
        .map(|i| {
            let var = (dev_sums[i].sum / (succ as f64 - 1.0)).max(0.0);
            DecayRow {
                n: -l + i as i64,
                mean: means[i],
                stderr: (var / succ as f64).sqrt(),
                trials: succ,
            }
        })
        .collect();
    Ok(DecayProfile {
        l,
        m,
        rows,
        construction: format!("{}(L={l},m={m},trials={trials})", spec.tag()),
        master_seed,
        failures,
    })
}

// ---------------------------------------------------------------------------
// Dynamical bound check
// ---------------------------------------------------------------------------

/// Outcome of [`dynamical_check`].
#[derive(Debug, Clone, Copy)]
pub struct DynamicalReport {
    /// Global max over trials, site pairs, and grid times of
    /// `|⟨δ_n, e^{-itH} δ_m⟩| - Σ_k |φ^k(n)||φ^k(m)|`; `-inf` when vacuous.
    pub max_violation: f64,
    /// True when the time grid was empty.
    pub vacuous: bool,
    pub trials: usize,
    pub failures: usize,
}

/// For each trial, check the time-evolution amplitude against the
/// single-realization correlator on the whole window and time grid.
pub fn dynamical_check(
    spec: &SpecKind,
    l: i64,
    trials: usize,
    t_grid: &[f64],
    master_seed: u64,
) -> Result<DynamicalReport> {
    if t_grid.is_empty() {
        return Ok(DynamicalReport {
            max_violation: f64::NEG_INFINITY,
            vacuous: true,
            trials,
            failures: 0,
        });
    }
    let worst = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Option<f64> {
            let w = spec.sample(l, trial_seed(master_seed, t)).ok()?;
            let e = TridiagonalOperator::build(&w).eigen().ok()?;
            let size = e.size();
            // Phase table per time point, then an O(size) pass per pair.
            let evs = e.eigenvalues().to_vec();
            let mut worst = f64::NEG_INFINITY;
            let mut cos_t = vec![0.0f64; size];
            let mut sin_t = vec![0.0f64; size];
            for &time in t_grid {
                for k in 0..size {
                    let ph = -time * evs[k];
                    cos_t[k] = ph.cos();
                    sin_t[k] = ph.sin();
                }
                for i in 0..size {
                    for j in i..size {
                        let (mut re, mut im, mut corr) = (0.0f64, 0.0f64, 0.0f64);
                        for k in 0..size {
                            let w = e.vector(k)[i] * e.vector(k)[j];
                            re += w * cos_t[k];
                            im += w * sin_t[k];
                            corr += w.abs();
                        }
                        worst = worst.max((re * re + im * im).sqrt() - corr);
                    }
                }
            }
            Some(worst)
        })
        .collect::<Vec<_>>();
    let failures = worst.iter().filter(|w| w.is_none()).count();
    let max_violation = worst
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    Ok(DynamicalReport {
        max_violation,
        vacuous: false,
        trials,
        failures,
    })
}

// ---------------------------------------------------------------------------
// Decay-rate fitting
// ---------------------------------------------------------------------------

/// Least-squares decay fit `log mean ≈ intercept - rate · |n - m|`.
#[derive(Debug, Clone, Copy)]
pub struct FitReport {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub rate_stderr: f64,
    /// 95% confidence interval for the rate (Student-t).
    pub rate_ci95: (f64, f64),
    pub points: usize,
}

// Two-sided 97.5% Student-t quantiles for small degrees of freedom.
fn t_quantile_975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179,
        2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
        2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    match df {
        0 => f64::INFINITY,
        d if d <= 30 => TABLE[d - 1],
        d if d <= 120 => 2.0,
        _ => 1.96,
    }
}

/// Fit the decay rate over rows with `lo <= |n - m| <= hi`. All means in
/// range must be positive.
pub fn fit_rate(p: &DecayProfile, lo: i64, hi: i64) -> Result<FitReport> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in &p.rows {
        let d = (r.n - p.m).abs();
        if d < lo || d > hi {
            continue;
        }
        if r.mean <= 0.0 {
            return Err(Error::FitRange(format!(
                "nonpositive mean {} at n = {}",
                r.mean, r.n
            )));
        }
        xs.push(d as f64);
        ys.push(r.mean.ln());
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::FitRange(format!("only {n} rows in range [{lo}, {hi}]")));
    }
    let nf = n as f64;
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    if sxx == 0.0 {
        return Err(Error::FitRange("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    let df = n - 2;
    let slope_var = if df == 0 { 0.0 } else { ss_res / df as f64 / sxx };
    let rate = -slope;
    let rate_stderr = slope_var.sqrt();
    let half = t_quantile_975(df) * rate_stderr;
    Ok(FitReport {
        rate,
        intercept,
        r_squared,
        rate_stderr,
        rate_ci95: (rate - half, rate + half),
        points: n,
    })
}

// ---------------------------------------------------------------------------
// Theoretical decay bounds
// ---------------------------------------------------------------------------

/// Parameters of the closed-form bound for the single-level random model:
/// `|a(n,0)| ≤ Leb(Σ₀) ∥r∥_∞ (a_n a_0)^{-1/2}
///            exp(-c K₀² Σ_{j=1}^{⌊(|n|-1)/2⌋} min{a_{2j}², a_{2j-1}², λ})`.
#[derive(Debug, Clone)]
pub struct ThmBound {
    pub leb_sigma0: f64,
    pub r_sup: f64,
    pub c: f64,
    pub k0: f64,
    pub lambda: f64,
    pub scales: SeqRule,
}

impl ThmBound {
    pub fn evaluate(&self, n: i64) -> f64 {
        let a_n = self.scales.eval(n);
        let a_0 = self.scales.eval(0);
        let sgn = if n < 0 { -1 } else { 1 };
        let k = (n.abs() - 1).max(0) / 2;
        let mut expo = 0.0;
        for j in 1..=k {
            let a2 = self.scales.eval(sgn * 2 * j).powi(2);
            let a1 = self.scales.eval(sgn * (2 * j - 1)).powi(2);
            expo += a2.min(a1).min(self.lambda);
        }
        self.leb_sigma0 * self.r_sup * (a_n * a_0).powf(-0.5)
            * (-self.c * self.k0 * self.k0 * expo).exp()
    }
}

/// Hierarchical variant: `ε_{|m(n)|}` replaces `a_n` via the symmetric
/// partition with radii `n_k`.
#[derive(Debug, Clone)]
pub struct HierBound {
    pub leb_sigma0: f64,
    pub r_sup: f64,
    pub d: f64,
    pub eps: Vec<f64>,
    pub radii: Vec<i64>,
}

impl HierBound {
    fn eps_at(&self, n: i64) -> f64 {
        let a = n.abs();
        let mut m = 0usize;
        while m < self.radii.len() && a > self.radii[m] {
            m += 1;
        }
        self.eps[m.min(self.eps.len() - 1)]
    }

    pub fn evaluate(&self, n: i64) -> f64 {
        let sgn = if n < 0 { -1 } else { 1 };
        let k = (n.abs() - 1).max(0) / 2;
        let mut expo = 0.0;
        for j in 1..=k {
            let e2 = self.eps_at(sgn * 2 * j).powi(2);
            let e1 = self.eps_at(sgn * (2 * j - 1)).powi(2);
            expo += e2.min(e1);
        }
        self.leb_sigma0 * self.r_sup * (self.eps_at(n) * self.eps_at(0)).powf(-0.5)
            * (-self.d * expo).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::{summability_partial, SummabilityKind};
    use crate::distributions::Density;
    use crate::potentials::Profile;
    use std::collections::BTreeMap;

    fn iid_uniform_spec(a: f64) -> SpecKind {
        SpecKind::Ks(
            KSSpec::new(
                Density::Uniform,
                Profile::Constant(a),
                Profile::Constant(0.0),
                BTreeMap::new(),
                1.0,
            )
            .unwrap(),
        )
    }

    #[test]
    fn diagonal_row_is_one() {
        let p = rho_estimate(&iid_uniform_spec(1.0), 8, 3, 5, 17).unwrap();
        let r = p.row(3).unwrap();
        assert!((r.mean - 1.0).abs() < 1e-10);
        assert!(r.stderr <= 1e-10);
        assert_eq!(p.failures, 0);
        // All means in [0, 1 + 3 stderr].
        for r in &p.rows {
            assert!(r.mean >= 0.0 && r.mean <= 1.0 + 3.0 * r.stderr + 1e-10);
        }
    }

    #[test]
    fn profile_symmetric_in_sites() {
        let spec = iid_uniform_spec(1.0);
        let p_a = rho_estimate(&spec, 8, 2, 10, 23).unwrap();
        let p_b = rho_estimate(&spec, 8, 5, 10, 23).unwrap();
        // Same trials, same realizations: the correlator is symmetric.
        assert_eq!(p_a.row(5).unwrap().mean, p_b.row(2).unwrap().mean);
        assert_eq!(p_a.row(5).unwrap().stderr, p_b.row(2).unwrap().stderr);
    }

    #[test]
    fn estimate_is_seed_deterministic() {
        let spec = iid_uniform_spec(0.5);
        let a = rho_estimate(&spec, 6, 0, 8, 99).unwrap();
        let b = rho_estimate(&spec, 6, 0, 8, 99).unwrap();
        assert_eq!(a.rows, b.rows);
        let c = rho_estimate(&spec, 6, 0, 8, 100).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn estimate_precondition_errors() {
        let spec = iid_uniform_spec(1.0);
        assert!(rho_estimate(&spec, 6, 0, 1, 1).is_err());
        assert!(rho_estimate(&spec, 6, 9, 5, 1).is_err());
    }

    #[test]
    fn dynamical_bound_small() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let rep = dynamical_check(&iid_uniform_spec(1.0), 8, 5, &grid, 7).unwrap();
        assert!(!rep.vacuous);
        assert_eq!(rep.failures, 0);
        assert!(rep.max_violation <= 1e-10, "violation {}", rep.max_violation);
        // t = 0 included: the amplitude matrix is the identity there, so
        // the max can only be >= delta - correlator bound checks.
        assert!(rep.max_violation > f64::NEG_INFINITY);
    }

    #[test]
    fn dynamical_empty_grid_vacuous() {
        let rep = dynamical_check(&iid_uniform_spec(1.0), 5, 3, &[], 7).unwrap();
        assert!(rep.vacuous);
        assert_eq!(rep.max_violation, f64::NEG_INFINITY);
    }

    fn synthetic_profile(rate: f64, l: i64) -> DecayProfile {
        let rows = (-l..=l)
            .map(|n| DecayRow {
                n,
                mean: (-rate * n.abs() as f64).exp(),
                stderr: 0.0,
                trials: 100,
            })
            .collect();
        DecayProfile {
            l,
            m: 0,
            rows,
            construction: "synthetic".into(),
            master_seed: 0,
            failures: 0,
        }
    }

    #[test]
    fn fit_recovers_synthetic_rate() {
        let p = synthetic_profile(0.3, 30);
        let f = fit_rate(&p, 1, 30).unwrap();
        assert!((f.rate - 0.3).abs() < 1e-6, "rate {}", f.rate);
        assert!(f.r_squared > 0.999_999);
        assert!(f.rate_ci95.0 > 0.0);
    }

    #[test]
    fn fit_constant_profile_rate_zero() {
        let p = synthetic_profile(0.0, 20);
        let f = fit_rate(&p, 1, 20).unwrap();
        assert!(f.rate.abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_zero_mean() {
        let mut p = synthetic_profile(0.3, 10);
        p.rows[2].mean = 0.0;
        assert!(matches!(fit_rate(&p, 1, 10), Err(Error::FitRange(_))));
    }

    #[test]
    fn bound_constant_scales_geometric() {
        let b = ThmBound {
            leb_sigma0: 6.0,
            r_sup: 1.0,
            c: 1.0 / 12.0,
            k0: 1.0,
            lambda: 0.1,
            scales: SeqRule::Constant(0.7),
        };
        // Ratio between n and n+2 is exp(-c K0^2 min(a^2, lambda)).
        let r = (-b.c * (0.7f64 * 0.7).min(0.1)).exp();
        for n in 1..40i64 {
            let ratio = b.evaluate(n + 2) / b.evaluate(n);
            assert!((ratio - r).abs() < 1e-12, "n={n}");
        }
        // n = 1: empty product.
        let expect = 6.0 * 1.0 * (0.7f64 * 0.7).powf(-0.5);
        assert!((b.evaluate(1) - expect).abs() < 1e-12);
        assert_eq!(b.evaluate(1), b.evaluate(-1));
    }

    #[test]
    fn bound_power_law_summable_cross_check() {
        // The bound terms are exactly Leb ∥r∥ a_0^{-1/2} times the series
        // terms of the random-scale summability condition with d = c K0².
        let scales = SeqRule::PowerLaw { c: 1.0, alpha: 0.25 };
        let b = ThmBound {
            leb_sigma0: 6.0,
            r_sup: 1.0,
            c: 0.5,
            k0: 2.0,
            lambda: 1.0,
            scales: scales.clone(),
        };
        let kind = SummabilityKind::ThmBs {
            scales,
            d: 0.5 * 4.0,
            lambda: 1.0,
        };
        let ps = summability_partial(&kind, 2000);
        assert!(ps.converged);
        let pref = 6.0 * 1.0 * 1.0f64;
        // Compare where the terms are large enough that the partial-sum
        // difference is not pure cancellation noise.
        for n in [1i64, 4, 7, 15] {
            let series_term = ps.sums[n as usize] - ps.sums[n as usize - 1];
            // series term at |n| counts both signs.
            assert!(
                (b.evaluate(n) + b.evaluate(-n) - pref * series_term).abs()
                    < 1e-10 * pref * series_term,
                "n={n}"
            );
        }
        // Direct partial sums of the bound converge as well (tail dwarfed).
        let direct: f64 = (1..2000).map(|n| b.evaluate(n) + b.evaluate(-n)).sum();
        assert!(direct.is_finite());
    }

    #[test]
    fn hier_bound_levels() {
        let b = HierBound {
            leb_sigma0: 6.0,
            r_sup: 1.0,
            d: 1.0,
            eps: vec![0.4, 0.2, 0.1],
            radii: vec![2, 7, 23],
        };
        // Prefactor uses the level scale of n.
        let v0 = b.evaluate(0);
        assert!((v0 - 6.0 / 0.4).abs() < 1e-12);
        // Deeper levels have larger prefactor but more exponential mass.
        assert!(b.evaluate(23) < b.evaluate(8) * (0.2f64 / 0.1).sqrt());
        assert_eq!(b.evaluate(9), b.evaluate(-9));
    }

    #[test]
    fn profile_csv_round_trip() {
        let p = synthetic_profile(0.25, 6);
        let csv = p.to_csv(None);
        assert!(csv.starts_with("n,mean,stderr,trials\n"));
        let back = DecayProfile::from_csv(&csv).unwrap();
        assert_eq!(back.rows, p.rows);
        // With a bound column.
        let b = |n: i64| (-0.2 * n.abs() as f64).exp();
        let csv_b = p.to_csv(Some(&b));
        assert!(csv_b.starts_with("n,mean,stderr,trials,theoretical_bound\n"));
        let back_b = DecayProfile::from_csv(&csv_b).unwrap();
        assert_eq!(back_b.rows, p.rows);
        assert!(DecayProfile::from_csv("x,y\n1,2\n").is_err());
    }
}
