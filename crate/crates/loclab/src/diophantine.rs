//! Exact continued-fraction machinery and number-theoretic condition checkers.
//!
//! Frequencies are accepted only as exact rationals or fixed-precision
//! decimal strings. The continued-fraction expansion runs in exact integer
//! arithmetic with an interval guard: a decimal with D digits is treated as
//! the interval `[v, v + 10^-D]`, and the expansion stops as soon as the two
//! endpoints disagree on a partial quotient.

use crate::error::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::str::FromStr;

/// Circle distance `min(frac, 1 - frac)` of a real taken mod 1.
pub fn circle_dist(x: f64) -> f64 {
    let f = x.rem_euclid(1.0);
    f.min(1.0 - f)
}

/// A frequency in (0,1), given exactly.
#[derive(Debug, Clone)]
pub enum Frequency {
    /// Exact rational.
    Rational(BigRational),
    /// Decimal expansion `0.d1 d2 ... dD`; represents `[v, v + 10^-D]`.
    Decimal(String),
}

impl Frequency {
    pub fn decimal(s: &str) -> Self {
        Frequency::Decimal(s.to_string())
    }

    pub fn rational(num: i64, den: i64) -> Self {
        Frequency::Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Interval `[lo, hi]` containing the frequency.
    fn interval(&self) -> Result<(BigRational, BigRational)> {
        match self {
            Frequency::Rational(r) => {
                if !(r > &BigRational::zero() && r < &BigRational::one()) {
                    return Err(Error::Parse(format!("frequency {r} not in (0,1)")));
                }
                Ok((r.clone(), r.clone()))
            }
            Frequency::Decimal(s) => {
                let s = s.trim();
                let rest = s
                    .strip_prefix("0.")
                    .or_else(|| s.strip_prefix('.'))
                    .ok_or_else(|| Error::Parse(format!("decimal frequency must start with '0.': {s}")))?;
                if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(Error::Parse(format!("bad decimal frequency: {s}")));
                }
                let digits = BigInt::from(BigUint::from_str(rest).unwrap());
                let den = BigInt::from(10u32).pow(rest.len() as u32);
                let lo = BigRational::new(digits.clone(), den.clone());
                let hi = BigRational::new(digits + 1, den);
                Ok((lo, hi))
            }
        }
    }
}

/// One continued-fraction convergent: partial quotient and `p_k / q_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergentEntry {
    pub a: BigInt,
    pub p: BigInt,
    pub q: BigInt,
}

/// Continued-fraction approximants of a frequency.
#[derive(Debug, Clone)]
pub struct Convergents {
    /// Frequency interval, if the table came from an actual frequency.
    alpha: Option<(BigRational, BigRational)>,
    /// Entries starting at k = 0 with `a_0 = 0`, `p_0/q_0 = 0/1`.
    pub entries: Vec<ConvergentEntry>,
    /// True if the expansion terminated (rational frequency).
    pub terminated: bool,
}

/// Expand a frequency into exact convergents, stopping at `k_max` entries
/// past the zeroth, when the expansion terminates (rational input), or with
/// a precision error when the decimal interval no longer pins down the next
/// partial quotient.
pub fn continued_fraction(alpha: &Frequency, k_max: usize) -> Result<Convergents> {
    let (alpha_lo, alpha_hi) = alpha.interval()?;
    let mut entries = vec![ConvergentEntry {
        a: BigInt::zero(),
        p: BigInt::zero(),
        q: BigInt::one(),
    }];
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero()); // p_{-1}, q_{-1}
    let (mut p_cur, mut q_cur) = (BigInt::zero(), BigInt::one());
    let mut lo = alpha_lo.clone();
    let mut hi = alpha_hi.clone();
    let mut terminated = false;
    while entries.len() <= k_max {
        if lo.is_zero() {
            if hi.is_zero() || lo == hi {
                terminated = true;
                break;
            }
            // Interval touches zero: next quotient unbounded.
            return Err(Error::Precision {
                safe_k: entries.len() - 1,
            });
        }
        let inv_hi = hi.recip();
        let inv_lo = lo.recip();
        let a_small = inv_hi.floor().to_integer();
        let a_big = inv_lo.floor().to_integer();
        let exact = lo == hi;
        let a = if exact {
            a_big.clone()
        } else if a_small == a_big {
            a_small.clone()
        } else {
            return Err(Error::Precision {
                safe_k: entries.len() - 1,
            });
        };
        let p_next = &a * &p_cur + &p_prev;
        let q_next = &a * &q_cur + &q_prev;
        entries.push(ConvergentEntry {
            a: a.clone(),
            p: p_next.clone(),
            q: q_next.clone(),
        });
        p_prev = p_cur;
        q_prev = q_cur;
        p_cur = p_next;
        q_cur = q_next;
        let ar = BigRational::from(a);
        let new_lo = inv_hi - &ar;
        let new_hi = inv_lo - &ar;
        lo = new_lo;
        hi = new_hi;
        if exact && lo.is_zero() {
            terminated = true;
            break;
        }
    }
    Ok(Convergents {
        alpha: Some((alpha_lo, alpha_hi)),
        entries,
        terminated,
    })
}

impl Convergents {
    /// Build from explicit partial quotients `a_1, a_2, ...` (synthetic
    /// tables, e.g. Liouville-like growth). No frequency is attached.
    pub fn from_partial_quotients(quotients: &[BigInt]) -> Result<Self> {
        if quotients.iter().any(|a| a <= &BigInt::zero()) {
            return Err(Error::Parse("partial quotients must be positive".into()));
        }
        let mut entries = vec![ConvergentEntry {
            a: BigInt::zero(),
            p: BigInt::zero(),
            q: BigInt::one(),
        }];
        let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
        let (mut p_cur, mut q_cur) = (BigInt::zero(), BigInt::one());
        for a in quotients {
            let p_next = a * &p_cur + &p_prev;
            let q_next = a * &q_cur + &q_prev;
            entries.push(ConvergentEntry {
                a: a.clone(),
                p: p_next.clone(),
                q: q_next.clone(),
            });
            p_prev = p_cur;
            q_prev = q_cur;
            p_cur = p_next;
            q_cur = q_next;
        }
        Ok(Convergents {
            alpha: None,
            entries,
            terminated: false,
        })
    }

    pub fn q(&self, k: usize) -> &BigInt {
        &self.entries[k].q
    }

    pub fn q_f64(&self, k: usize) -> f64 {
        self.entries[k].q.to_f64().unwrap_or(f64::INFINITY)
    }

    /// Midpoint of the frequency interval as f64.
    pub fn alpha_f64(&self) -> Option<f64> {
        self.alpha
            .as_ref()
            .map(|(lo, hi)| ((lo + hi) / BigRational::from(BigInt::from(2))).to_f64().unwrap())
    }

    /// `floor(alpha * 2^128)` of the lower endpoint, for exact-wraparound
    /// circle arithmetic.
    pub fn alpha_fixed128(&self) -> Option<u128> {
        let (lo, _) = self.alpha.as_ref()?;
        let scaled = lo * BigRational::from(BigInt::from(1u8) << 128u16);
        let floor = scaled.floor().to_integer();
        let (_, bytes) = floor.to_bytes_le();
        let mut buf = [0u8; 16];
        for (i, b) in bytes.iter().take(16).enumerate() {
            buf[i] = *b;
        }
        Some(u128::from_le_bytes(buf))
    }

    /// Export as CSV `k,a_k,p_k,q_k`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,a_k,p_k,q_k\n");
        for (k, e) in self.entries.iter().enumerate() {
            s.push_str(&format!("{},{},{},{}\n", k, e.a, e.p, e.q));
        }
        s
    }

    /// Import from the CSV schema written by [`Self::to_csv`]; the
    /// recurrences are re-validated.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut quotients = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Parse(format!("line {}: need 4 columns", i + 1)));
            }
            let a = BigInt::from_str(cols[1].trim()).map_err(|e| Error::Parse(e.to_string()))?;
            let p = BigInt::from_str(cols[2].trim()).map_err(|e| Error::Parse(e.to_string()))?;
            let q = BigInt::from_str(cols[3].trim()).map_err(|e| Error::Parse(e.to_string()))?;
            if !rows.is_empty() || !a.is_zero() {
                quotients.push(a.clone());
            }
            rows.push((p, q));
        }
        if quotients.first().map(|a: &BigInt| a.is_zero()) == Some(true) {
            quotients.remove(0);
        }
        let built = Convergents::from_partial_quotients(&quotients)?;
        for (k, (p, q)) in rows.iter().enumerate() {
            if &built.entries[k].p != p || &built.entries[k].q != q {
                return Err(Error::Parse(format!(
                    "row k={k} violates the convergent recurrences"
                )));
            }
        }
        Ok(built)
    }
}

/// Result of the brute-force orbit gap check.
#[derive(Debug, Clone, Copy)]
pub struct GapCheck {
    /// `min |z_{n1} - z_{n2}|` over distinct `n1 != n2` with `|2n| < q_{k+1}`.
    pub min_gap: f64,
    /// `1 / (q_k + q_{k+1})`.
    pub threshold: f64,
    /// `1 / (2 q_{k+1})`, the weaker end of the chain.
    pub half_inverse_q: f64,
    pub holds: bool,
}

/// Brute-force the minimal circle distance between orbit points `z_n = n α`
/// with `|2n| < q_{k+1}` and compare against `1/(q_k + q_{k+1})`.
///
/// Distances depend only on `n1 - n2`, so the scan runs over the difference
/// `Δ ∈ [1, q_{k+1} - 1]` in 128-bit fixed point.
pub fn gap_check(c: &Convergents, k: usize) -> Result<GapCheck> {
    if k + 1 >= c.entries.len() {
        return Err(Error::OutOfRange {
            site: (k + 1) as i64,
            lo: 0,
            hi: c.entries.len() as i64 - 1,
        });
    }
    let alpha_fixed = c
        .alpha_fixed128()
        .ok_or_else(|| Error::SpecViolation("gap_check needs an attached frequency".into()))?;
    let q_next = c
        .q(k + 1)
        .to_u64()
        .ok_or_else(|| Error::Numerical("q_{k+1} exceeds u64; gap scan not feasible".into()))?;
    if q_next > 200_000_000 {
        return Err(Error::Numerical(format!(
            "q_{{k+1}} = {q_next} too large for the brute-force scan"
        )));
    }
    let n_abs_max = (q_next - 1) / 2; // |2n| < q_{k+1}
    let delta_max = 2 * n_abs_max; // max |n1 - n2|
    let mut min_fixed = u128::MAX;
    let mut acc: u128 = 0;
    for _ in 1..=delta_max {
        acc = acc.wrapping_add(alpha_fixed);
        let d = acc.min(acc.wrapping_neg());
        if d < min_fixed {
            min_fixed = d;
        }
    }
    if delta_max == 0 {
        return Err(Error::Numerical("no distinct pairs in range".into()));
    }
    let min_gap = min_fixed as f64 / 2f64.powi(128);
    let q_k = c.q_f64(k);
    let q_k1 = c.q_f64(k + 1);
    let threshold = 1.0 / (q_k + q_k1);
    Ok(GapCheck {
        min_gap,
        threshold,
        half_inverse_q: 1.0 / (2.0 * q_k1),
        holds: min_gap > threshold,
    })
}

/// Partial sums of a nonnegative series with a convergence heuristic.
#[derive(Debug, Clone)]
pub struct PartialSums {
    /// `S_0, S_1, ..., S_N` (cumulative).
    pub sums: Vec<f64>,
    pub last_term: f64,
    /// Heuristic: last term below `1e-12` of the running sum and terms not
    /// increasing at the tail. Never a claim about the infinite series.
    pub converged: bool,
}

fn partial_sums_from_terms(terms: Vec<f64>) -> PartialSums {
    let mut sums = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for &t in &terms {
        acc += t;
        sums.push(acc);
    }
    let last = *terms.last().unwrap_or(&0.0);
    // Terms can wiggle inside constant-exponent blocks, so the tail is
    // judged over a window: the max of the last few terms must be tiny
    // relative to the partial sum and no larger than the max of the
    // preceding window.
    let w = terms.len().min(5);
    let tail_max = terms[terms.len() - w..].iter().fold(0.0f64, |m, &t| m.max(t));
    let head_max = if terms.len() > w {
        terms[..terms.len() - w].iter().fold(0.0f64, |m, &t| m.max(t))
    } else {
        tail_max
    };
    let converged = !sums.is_empty()
        && tail_max <= head_max
        && tail_max < 1e-12 * sums.last().unwrap().max(1e-300);
    PartialSums {
        sums,
        last_term: last,
        converged,
    }
}

/// Partial sums `S_K = Σ_{k=1..K} exp(-κ q_k^{1-2γ̃}) q_{k+1}^{γ̃/2}`.
pub fn condkappa_partial(c: &Convergents, kappa: f64, gammatilde: f64, k_cap: usize) -> Result<PartialSums> {
    if k_cap + 1 >= c.entries.len() {
        return Err(Error::OutOfRange {
            site: (k_cap + 1) as i64,
            lo: 0,
            hi: c.entries.len() as i64 - 1,
        });
    }
    if !(kappa > 0.0 && gammatilde > 0.0 && gammatilde < 0.5) {
        return Err(Error::SpecViolation(format!(
            "need kappa > 0 and gammatilde in (0, 1/2); got {kappa}, {gammatilde}"
        )));
    }
    let terms: Vec<f64> = (1..=k_cap)
        .map(|k| {
            let qk = c.q_f64(k);
            let qk1 = c.q_f64(k + 1);
            (-kappa * qk.powf(1.0 - 2.0 * gammatilde)).exp() * qk1.powf(gammatilde / 2.0)
        })
        .collect();
    Ok(partial_sums_from_terms(terms))
}

/// A closed-form or tabulated site-indexed nonnegative sequence.
#[derive(Debug, Clone)]
pub enum SeqRule {
    /// `a_n = a` for all n.
    Constant(f64),
    /// `a_n = c (1 + |n|)^{-alpha}`.
    PowerLaw { c: f64, alpha: f64 },
    /// Table indexed by `|n|`; last entry repeats.
    Table(Vec<f64>),
    /// `a_n = (100 q_{k+1})^{-γ̃}` where `|2n| ∈ [q_k, q_{k+1})`;
    /// before `q_0` the first block value is used.
    QpBlocks { qs: Vec<f64>, gammatilde: f64 },
}

impl SeqRule {
    pub fn eval(&self, n: i64) -> f64 {
        let m = n.unsigned_abs() as usize;
        match self {
            SeqRule::Constant(a) => *a,
            SeqRule::PowerLaw { c, alpha } => c * (1.0 + m as f64).powf(-alpha),
            SeqRule::Table(t) => t[m.min(t.len() - 1)],
            SeqRule::QpBlocks { qs, gammatilde } => {
                let two_n = (2 * m) as f64;
                // Find k with q_k <= |2n| < q_{k+1}; clamp at the ends.
                let mut k = 0usize;
                while k + 1 < qs.len() - 1 && two_n >= qs[k + 1] {
                    k += 1;
                }
                (100.0 * qs[(k + 1).min(qs.len() - 1)]).powf(-gammatilde)
            }
        }
    }
}

/// Which summability condition to evaluate.
#[derive(Debug, Clone)]
pub enum SummabilityKind {
    /// Random-scale condition: `Σ_n a_n^{-1/2} exp(-d Σ_j min{a², a², λ})`.
    ThmBs { scales: SeqRule, d: f64, lambda: f64 },
    /// Hierarchical condition with `ε_{|m(n)|}` from a partition; `min` has
    /// no `λ` clamp here.
    General {
        eps: Vec<f64>,
        /// `n_k` breakpoints of the symmetric partition: `I_0 = [-n_0, n_0]`,
        /// `I_m = (n_{m-1}, n_m]`.
        n_k: Vec<i64>,
        d: f64,
    },
    /// One-sided hierarchical condition `Σ_{n≥0} ε_{m(n)}^{-1/2} e^{-d Σ_j ε²_{m(2j)}}`.
    Condi { eps: Vec<f64>, n_k: Vec<i64>, d: f64 },
    /// `Σ_{n≥1} a_n^{-1/2} exp(-δ Σ_{s=1..n} a_s²)`.
    E111 { a: SeqRule, delta: f64 },
    /// `Σ_{n≤0} a_n^{-1/2} exp(-δ Σ_{s=n..0} a_s²)`.
    E222 { a: SeqRule, delta: f64 },
}

fn level_of(n: i64, n_k: &[i64]) -> usize {
    let a = n.abs();
    let mut m = 0usize;
    while a > n_k[m.min(n_k.len() - 1)] {
        m += 1;
        if m >= n_k.len() {
            break;
        }
    }
    m.min(n_k.len() - 1)
}

/// Exact partial sums of the cited series through index `n_cap`.
pub fn summability_partial(kind: &SummabilityKind, n_cap: usize) -> PartialSums {
    let terms: Vec<f64> = match kind {
        SummabilityKind::ThmBs { scales, d, lambda } => {
            let term = |n: i64| -> f64 {
                let a_n = scales.eval(n);
                let k = (n.abs() - 1).max(0) / 2;
                let sgn = n.signum();
                let mut expo = 0.0;
                for j in 1..=k {
                    let a2 = scales.eval(sgn * 2 * j).powi(2);
                    let a1 = scales.eval(sgn * (2 * j - 1)).powi(2);
                    expo += a2.min(a1).min(*lambda);
                }
                a_n.powf(-0.5) * (-d * expo).exp()
            };
            (0..=n_cap as i64)
                .map(|n| if n == 0 { term(0) } else { term(n) + term(-n) })
                .collect()
        }
        SummabilityKind::General { eps, n_k, d } => {
            let eps_at = |m: usize| eps[m.min(eps.len() - 1)];
            let term = |n: i64| -> f64 {
                let sgn = n.signum();
                let k = (n.abs() - 1).max(0) / 2;
                let mut expo = 0.0;
                for j in 1..=k {
                    let e2 = eps_at(level_of(sgn * 2 * j, n_k)).powi(2);
                    let e1 = eps_at(level_of(sgn * (2 * j - 1), n_k)).powi(2);
                    expo += e2.min(e1);
                }
                eps_at(level_of(n, n_k)).powf(-0.5) * (-d * expo).exp()
            };
            (0..=n_cap as i64)
                .map(|n| if n == 0 { term(0) } else { term(n) + term(-n) })
                .collect()
        }
        SummabilityKind::Condi { eps, n_k, d } => {
            let eps_at = |m: usize| eps[m.min(eps.len() - 1)];
            (0..=n_cap as i64)
                .map(|n| {
                    let k = (n - 1).max(0) / 2;
                    let mut expo = 0.0;
                    for j in 1..=k {
                        expo += eps_at(level_of(2 * j, n_k)).powi(2);
                    }
                    eps_at(level_of(n, n_k)).powf(-0.5) * (-d * expo).exp()
                })
                .collect()
        }
        SummabilityKind::E111 { a, delta } => {
            let mut inner = 0.0;
            (1..=n_cap as i64)
                .map(|n| {
                    inner += a.eval(n).powi(2);
                    a.eval(n).powf(-0.5) * (-delta * inner).exp()
                })
                .collect()
        }
        SummabilityKind::E222 { a, delta } => {
            let mut inner = a.eval(0).powi(2);
            std::iter::once(a.eval(0).powf(-0.5) * (-delta * inner).exp())
                .chain((1..=n_cap as i64).map(|m| {
                    let n = -m;
                    inner += a.eval(n).powi(2);
                    a.eval(n).powf(-0.5) * (-delta * inner).exp()
                }))
                .collect()
        }
    };
    partial_sums_from_terms(terms)
}

/// 66 decimal digits of the golden mean `(√5 − 1)/2` (all partial
/// quotients equal 1; the slowest-approximable irrational).
pub const GOLDEN_MEAN_DIGITS: &str =
    "0.618033988749894848204586834365638117720309179805762862135448622705";

/// 50 decimal digits of `π − 3` (partial quotients 7, 15, 1, 292, …).
pub const PI_MINUS_3_DIGITS: &str = "0.14159265358979323846264338327950288419716939937510";

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    pub const GOLDEN_60: &str = GOLDEN_MEAN_DIGITS;
    pub const PI_MINUS_3_50: &str = PI_MINUS_3_DIGITS;

    #[test]
    fn golden_mean_fibonacci() {
        let c = continued_fraction(&Frequency::decimal(GOLDEN_60), 7).unwrap();
        let qs: Vec<i64> = c.entries.iter().map(|e| e.q.to_i64().unwrap()).collect();
        assert_eq!(qs, vec![1, 1, 2, 3, 5, 8, 13, 21]);
        assert!(!c.terminated);
    }

    #[test]
    fn rational_terminates() {
        let c = continued_fraction(&Frequency::rational(5, 7), 20).unwrap();
        let pq: Vec<(i64, i64)> = c
            .entries
            .iter()
            .map(|e| (e.p.to_i64().unwrap(), e.q.to_i64().unwrap()))
            .collect();
        assert_eq!(pq, vec![(0, 1), (1, 1), (2, 3), (5, 7)]);
        assert!(c.terminated);
    }

    #[test]
    fn pi_minus_three_convergents() {
        let c = continued_fraction(&Frequency::decimal(PI_MINUS_3_50), 5).unwrap();
        let qs: Vec<i64> = c.entries.iter().map(|e| e.q.to_i64().unwrap()).collect();
        assert_eq!(qs[..5], [1, 7, 106, 113, 33102]);
    }

    #[test]
    fn recurrence_and_approximation_invariants() {
        let c = continued_fraction(&Frequency::decimal(GOLDEN_60), 20).unwrap();
        let (lo, hi) = (
            BigRational::new(BigInt::from(0), BigInt::from(1)),
            BigRational::new(BigInt::from(1), BigInt::from(1)),
        );
        let _ = (lo, hi);
        let alpha = c.alpha_f64().unwrap();
        for k in 1..c.entries.len() - 1 {
            let e = &c.entries[k];
            let prev = &c.entries[k - 1];
            // p_k q_{k-1} - p_{k-1} q_k = ±1 exactly.
            let det = &e.p * &prev.q - &prev.p * &e.q;
            assert!(det.abs() == BigInt::one(), "det {det} at k={k}");
            // |alpha - p_k/q_k| < 1/(q_k q_{k+1}).
            let approx = e.p.to_f64().unwrap() / e.q.to_f64().unwrap();
            let bound = 1.0 / (c.q_f64(k) * c.q_f64(k + 1));
            assert!((alpha - approx).abs() < bound);
        }
        // q strictly increasing from k >= 1 (golden mean: from k >= 2).
        for k in 2..c.entries.len() {
            assert!(c.entries[k].q > c.entries[k - 1].q);
        }
    }

    #[test]
    fn precision_guard_stops() {
        // 4 digits pin down only a few quotients of the golden mean.
        let err = continued_fraction(&Frequency::decimal("0.6180"), 30).unwrap_err();
        match err {
            Error::Precision { safe_k } => assert!(safe_k >= 3, "safe_k = {safe_k}"),
            other => panic!("expected precision error, got {other}"),
        }
    }

    #[test]
    fn gap_check_golden() {
        let c = continued_fraction(&Frequency::decimal(GOLDEN_60), 14).unwrap();
        let g = gap_check(&c, 3).unwrap();
        assert!(g.holds);
        assert!(g.half_inverse_q < g.threshold);
        // k = 1 admits no distinct pair (q_2 = 2 allows only n = 0).
        assert!(gap_check(&c, 1).is_err());
        // Monotone consistency: the point set grows with k.
        let mut prev = f64::INFINITY;
        for k in 2..=8 {
            let g = gap_check(&c, k).unwrap();
            assert!(g.min_gap <= prev + 1e-18);
            prev = g.min_gap;
        }
    }

    #[test]
    fn gap_check_brute_force_small() {
        // Cross-check the Δ-scan against a literal pair scan at small k.
        let c = continued_fraction(&Frequency::decimal(GOLDEN_60), 8).unwrap();
        let k = 4;
        let alpha = c.alpha_f64().unwrap();
        let q_next = c.q_f64(k + 1) as i64;
        let n_max = (q_next - 1) / 2;
        let mut min_gap = f64::INFINITY;
        for n1 in -n_max..=n_max {
            for n2 in -n_max..=n_max {
                if n1 == n2 {
                    continue; // distinctness
                }
                min_gap = min_gap.min(circle_dist((n1 - n2) as f64 * alpha));
            }
        }
        let g = gap_check(&c, k).unwrap();
        assert!((g.min_gap - min_gap).abs() < 1e-9);
    }

    #[test]
    fn condkappa_golden_converges() {
        // Golden-mean q_k grow like φ^k, so exp(-q_k^{0.2}) wins; the tail
        // only drops below the heuristic threshold around k = 40.
        let c = continued_fraction(&Frequency::decimal(GOLDEN_60), 45).unwrap();
        let ps = condkappa_partial(&c, 1.0, 0.4, 40).unwrap();
        assert!(ps.converged, "last term {}", ps.last_term);
        for w in ps.sums.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn condkappa_liouville_diverges() {
        // Hand-built super-exponential quotients make q_{k+1}^{γ̃/2}
        // overwhelm exp(-κ q_k^{1-2γ̃}): the terms grow, so the partial
        // sums cannot be flagged convergent.
        let quots = vec![
            BigInt::from(20),
            BigInt::from(55_000),
            BigInt::from(10).pow(42u32),
        ];
        let c = Convergents::from_partial_quotients(&quots).unwrap();
        let ps = condkappa_partial(&c, 1.0, 0.4, 2).unwrap();
        assert!(!ps.converged);
        // The second term really is larger than the first.
        assert!(ps.sums[1] - ps.sums[0] > ps.sums[0]);
    }

    #[test]
    fn summability_constant_geometric() {
        // a_n ≡ a: term_n = a^{-1/2} e^{-d min(a²,λ) ⌊(|n|-1)/2⌋}, geometric.
        let (a, d, lambda) = (0.5, 1.0, 0.1);
        let kind = SummabilityKind::ThmBs {
            scales: SeqRule::Constant(a),
            d,
            lambda,
        };
        let n = 200;
        let ps = summability_partial(&kind, n);
        let r: f64 = (-d * (a * a).min(lambda)).exp();
        // Closed form: center term + 2 Σ_{n=1..N} a^{-1/2} r^{⌊(n-1)/2⌋}.
        let mut closed = a.powf(-0.5);
        for m in 1..=n as i64 {
            closed += 2.0 * a.powf(-0.5) * r.powi(((m - 1) / 2) as i32);
        }
        let got = *ps.sums.last().unwrap();
        assert!((got - closed).abs() < 1e-12 * closed, "{got} vs {closed}");
    }

    #[test]
    fn summability_power_law_flags() {
        let conv = SummabilityKind::ThmBs {
            scales: SeqRule::PowerLaw { c: 1.0, alpha: 0.25 },
            d: 1.0,
            lambda: 1.0,
        };
        assert!(summability_partial(&conv, 3000).converged);
        let div = SummabilityKind::ThmBs {
            scales: SeqRule::PowerLaw { c: 1.0, alpha: 1.0 },
            d: 1.0,
            lambda: 1.0,
        };
        assert!(!summability_partial(&div, 3000).converged);
    }

    #[test]
    fn qp_block_estimate_shape() {
        // Per-block sum Σ a_s² over s ∈ [q_k/2, q_{k+1}/2) within a factor
        // 4 of q_{k+1}^{1-2γ̃} / 10^4.
        let c = continued_fraction(&Frequency::decimal(GOLDEN_60), 20).unwrap();
        let gt = 0.4;
        let qs: Vec<f64> = (0..c.entries.len()).map(|k| c.q_f64(k)).collect();
        let rule = SeqRule::QpBlocks {
            qs: qs.clone(),
            gammatilde: gt,
        };
        for k in 6..12 {
            let s_lo = (qs[k] / 2.0).ceil() as i64;
            let s_hi = (qs[k + 1] / 2.0).ceil() as i64;
            let block: f64 = (s_lo..s_hi).map(|s| rule.eval(s).powi(2)).sum();
            // All terms in the block are equal, so the sum is exactly
            // count · (100 q_{k+1})^{-2γ̃}.
            let expected = (s_hi - s_lo) as f64 * (100.0 * qs[k + 1]).powf(-2.0 * gt);
            assert!((block - expected).abs() < 1e-12 * expected, "k={k}");
            // And it scales like q_{k+1}^{1-2γ̃} up to the block constant
            // 100^{-2γ̃} (1 - q_k/q_{k+1}) / 2 ≈ 0.0048 for the golden mean.
            let ratio = block / qs[k + 1].powf(1.0 - 2.0 * gt);
            assert!(ratio > 1e-3 && ratio < 1e-2, "k={k}: ratio {ratio}");
        }
        // E111 with the block rule and a healthy delta converges.
        let kind = SummabilityKind::E111 {
            a: rule,
            delta: 4000.0,
        };
        let ps = summability_partial(&kind, 4000);
        assert!(ps.converged);
    }

    #[test]
    fn csv_round_trip() {
        let c = continued_fraction(&Frequency::decimal(GOLDEN_60), 10).unwrap();
        let csv = c.to_csv();
        assert!(csv.starts_with("k,a_k,p_k,q_k\n"));
        let back = Convergents::from_csv(&csv).unwrap();
        assert_eq!(back.entries, c.entries);
        // Tampered table is rejected.
        let bad = csv.replace("13", "14");
        assert!(Convergents::from_csv(&bad).is_err());
    }
}
