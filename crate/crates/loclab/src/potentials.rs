//! Potential constructions on finite windows of the lattice: correlated
//! random potentials built from a single-site density plus linear
//! functionals of earlier draws, hierarchical multi-level variants,
//! limit-periodic uniform limits of periodic potentials, and quasi-periodic
//! decaying-bump potentials with Hölder tent envelopes.
//!
//! Every window is reproducible bit-exactly from (construction, parameters,
//! seed): per-site draws come from hash-derived substreams keyed by
//! (seed, level, site), so results do not depend on evaluation order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::diophantine::{circle_dist, Convergents};
use crate::distributions::Density;
use crate::error::{Error, Result};
use crate::rng::{site_label, substream};

// ---------------------------------------------------------------------------
// Site-indexed profiles and linear functionals
// ---------------------------------------------------------------------------

/// A site-indexed real quantity (scale `a_n` or background `χ_n`).
#[derive(Debug, Clone)]
pub enum Profile {
    Constant(f64),
    /// Explicit values on `[lo, lo + values.len())`.
    Table { lo: i64, values: Vec<f64> },
}

impl Profile {
    pub fn value(&self, n: i64) -> Result<f64> {
        match self {
            Profile::Constant(c) => Ok(*c),
            Profile::Table { lo, values } => {
                let hi = lo + values.len() as i64 - 1;
                if n < *lo || n > hi {
                    return Err(Error::OutOfRange { site: n, lo: *lo, hi });
                }
                Ok(values[(n - lo) as usize])
            }
        }
    }

    /// Supremum of |values| over the represented range.
    pub fn sup(&self) -> f64 {
        match self {
            Profile::Constant(c) => c.abs(),
            Profile::Table { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// A finite linear functional `Σ_i b_i ξ_i` of site-indexed draws.
#[derive(Debug, Clone, Default)]
pub struct LinearFunctional {
    coefficients: BTreeMap<i64, f64>,
}

impl LinearFunctional {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(coefficients: BTreeMap<i64, f64>) -> Self {
        LinearFunctional { coefficients }
    }

    pub fn coefficients(&self) -> &BTreeMap<i64, f64> {
        &self.coefficients
    }

    /// `Σ_i |b_i|`.
    pub fn plus_norm(&self) -> f64 {
        self.coefficients.values().map(|b| b.abs()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Largest |site index| referenced, or None when zero.
    pub fn max_site(&self) -> Option<i64> {
        self.coefficients.keys().map(|s| s.abs()).max()
    }

    pub fn apply<F: FnMut(i64) -> f64>(&self, mut xi: F) -> f64 {
        self.coefficients.iter().map(|(&s, &b)| b * xi(s)).sum()
    }
}

// ---------------------------------------------------------------------------
// Potential windows
// ---------------------------------------------------------------------------

/// A sampled potential on an integer interval, tagged with its construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialWindow {
    lo: i64,
    values: Vec<f64>,
    /// Construction tag plus parameter summary.
    pub construction: String,
    pub seed: u64,
}

impl PotentialWindow {
    pub fn new(lo: i64, values: Vec<f64>, construction: impl Into<String>, seed: u64) -> Self {
        PotentialWindow {
            lo,
            values,
            construction: construction.into(),
            seed,
        }
    }

    /// All-zero window on `[-l, l]`.
    pub fn zero(l: i64) -> Self {
        PotentialWindow::new(-l, vec![0.0; (2 * l + 1) as usize], "zero", 0)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, n: i64) -> Result<f64> {
        if n < self.lo || n > self.hi() {
            return Err(Error::OutOfRange {
                site: n,
                lo: self.lo,
                hi: self.hi(),
            });
        }
        Ok(self.values[(n - self.lo) as usize])
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_n |self(n) - other(n)|` over the intersection of the ranges.
    pub fn sup_distance(&self, other: &PotentialWindow) -> f64 {
        let lo = self.lo.max(other.lo);
        let hi = self.hi().min(other.hi());
        let mut d = 0.0f64;
        for n in lo..=hi {
            d = d.max((self.value(n).unwrap() - other.value(n).unwrap()).abs());
        }
        d
    }

    /// Export as CSV with columns `n,V` (shortest round-trip float text).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,V\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{},{}", self.lo + i as i64, v);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some("n,V") => {}
            _ => return Err(Error::Parse("expected header n,V".into())),
        }
        let mut lo = None;
        let mut prev = None;
        let mut values = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let (ns, vs) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad row {line:?}")))?;
            let n: i64 = ns.parse().map_err(|_| Error::Parse(format!("bad site {ns:?}")))?;
            let v: f64 = vs.parse().map_err(|_| Error::Parse(format!("bad value {vs:?}")))?;
            if let Some(p) = prev {
                if n != p + 1 {
                    return Err(Error::Parse(format!("non-contiguous site {n} after {p}")));
                }
            } else {
                lo = Some(n);
            }
            prev = Some(n);
            values.push(v);
        }
        let lo = lo.ok_or_else(|| Error::Parse("empty window".into()))?;
        Ok(PotentialWindow::new(lo, values, "imported", 0))
    }
}

// ---------------------------------------------------------------------------
// Correlated random potentials (single-level)
// ---------------------------------------------------------------------------

/// Single-level correlated random potential
/// `V(n) = ξ_n + χ_n + L_n(ξ_{-|n|+1}, …, ξ_{|n|-1})` with `ξ_n ~ r_{a_n}`.
#[derive(Debug, Clone)]
pub struct KSSpec {
    pub density: Density,
    pub scales: Profile,
    pub background: Profile,
    /// Functionals keyed by site; absent entries are zero.
    functionals: BTreeMap<i64, LinearFunctional>,
    /// Uniform bound on the functional `+`-norms.
    pub functional_bound: f64,
}

impl KSSpec {
    pub fn new(
        density: Density,
        scales: Profile,
        background: Profile,
        functionals: BTreeMap<i64, LinearFunctional>,
        functional_bound: f64,
    ) -> Result<Self> {
        if let Some(l0) = functionals.get(&0) {
            if !l0.is_zero() {
                return Err(Error::SpecViolation("functional at site 0 must be zero".into()));
            }
        }
        for (&n, l) in &functionals {
            if l.plus_norm() > functional_bound {
                return Err(Error::SpecViolation(format!(
                    "functional at site {n} has +-norm {} > bound {functional_bound}",
                    l.plus_norm()
                )));
            }
            if let Some(s) = l.max_site() {
                if s >= n.abs() {
                    return Err(Error::SpecViolation(format!(
                        "functional at site {n} references draw at |site| {s} >= |{n}|"
                    )));
                }
            }
        }
        Ok(KSSpec {
            density,
            scales,
            background,
            functionals,
            functional_bound,
        })
    }

    pub fn functional(&self, n: i64) -> LinearFunctional {
        self.functionals.get(&n).cloned().unwrap_or_default()
    }

    /// Independent amplitude draw `ξ_n = a_n · (draw from r)`.
    pub fn draw(&self, n: i64, seed: u64) -> Result<f64> {
        let a = self.scales.value(n)?;
        if a <= 0.0 {
            return Err(Error::InvalidScale(format!("scale at site {n} is {a}")));
        }
        let mut st = substream(seed, &[0, site_label(n)]);
        Ok(a * self.density.sample(&mut st))
    }
}

pub fn sample_ks_potential(spec: &KSSpec, l: i64, seed: u64) -> Result<PotentialWindow> {
    let mut values = Vec::with_capacity((2 * l + 1) as usize);
    for n in -l..=l {
        let mut v = spec.draw(n, seed)? + spec.background.value(n)?;
        let func = spec.functional(n);
        if !func.is_zero() {
            let mut err = None;
            v += func.apply(|s| match spec.draw(s, seed) {
                Ok(x) => x,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        values.push(v);
    }
    Ok(PotentialWindow::new(
        -l,
        values,
        format!("ks(L={l})"),
        seed,
    ))
}

// ---------------------------------------------------------------------------
// Partitions and hierarchical potentials
// ---------------------------------------------------------------------------

/// A partition of an integer range into intervals `I_m = (l_{m-1}, l_m]`
/// with `l_{-1} < 0 <= l_0`, so `0 ∈ I_0`.
#[derive(Debug, Clone)]
pub struct Partition {
    /// `breaks[i] = l_{m_lo + i}`, strictly increasing.
    breaks: Vec<i64>,
    m_lo: i64,
}

impl Partition {
    pub fn new(breaks: Vec<i64>, m_lo: i64) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::SpecViolation("partition needs at least two breakpoints".into()));
        }
        for w in breaks.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::SpecViolation("breakpoints must strictly increase".into()));
            }
        }
        let m_hi = m_lo + breaks.len() as i64 - 1;
        if m_lo > -1 || m_hi < 0 {
            return Err(Error::SpecViolation("breakpoints must include l_{-1} and l_0".into()));
        }
        let p = Partition { breaks, m_lo };
        if !(p.breakpoint(-1)? < 0 && 0 <= p.breakpoint(0)?) {
            return Err(Error::SpecViolation("need l_{-1} < 0 <= l_0".into()));
        }
        Ok(p)
    }

    /// Symmetric partition from interval radii `n_0 < n_1 < …`:
    /// `I_0 = [-n_0, n_0]`, `I_k = (n_{k-1}, n_k]`, `I_{-k} = -I_k`.
    pub fn symmetric(radii: &[i64]) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::SpecViolation("need at least one radius".into()));
        }
        let mut breaks = Vec::with_capacity(2 * radii.len());
        for &n in radii.iter().rev() {
            breaks.push(-n - 1);
        }
        for &n in radii {
            breaks.push(n);
        }
        Partition::new(breaks, -(radii.len() as i64))
    }

    pub fn breakpoint(&self, m: i64) -> Result<i64> {
        let i = m - self.m_lo;
        if i < 0 || i >= self.breaks.len() as i64 {
            return Err(Error::OutOfRange {
                site: m,
                lo: self.m_lo,
                hi: self.m_lo + self.breaks.len() as i64 - 1,
            });
        }
        Ok(self.breaks[i as usize])
    }

    /// Covered range `(l_first, l_last]`.
    pub fn range(&self) -> (i64, i64) {
        (*self.breaks.first().unwrap() + 1, *self.breaks.last().unwrap())
    }

    /// The interval index `m(n)` with `n ∈ (l_{m-1}, l_m]`.
    pub fn m_of(&self, n: i64) -> Result<i64> {
        let (lo, hi) = self.range();
        if n < lo || n > hi {
            return Err(Error::OutOfRange { site: n, lo, hi });
        }
        // First breakpoint >= n; since breaks[0] < n, that index is >= 1
        // and the predecessor breakpoint is < n.
        let i = self.breaks.partition_point(|&b| b < n);
        Ok(self.m_lo + i as i64)
    }
}

/// Multi-level potential
/// `V(n) = Σ_{k ≥ |m(n)|} ξ_{n,k} + χ_n + Σ_{k < |m(n)|} L_{n,k}(level-k draws)`,
/// truncated at the represented depth.
#[derive(Debug, Clone)]
pub struct HierSpec {
    pub partition: Partition,
    pub density: Density,
    /// Level scales ε_0, …, ε_{K-1}; levels k ≥ K are truncated away.
    pub level_scales: Vec<f64>,
    /// Declared sup-norm bound on the omitted tail `Σ_{k ≥ K} ε_k`.
    pub tail_bound: f64,
    functionals: BTreeMap<(i64, usize), LinearFunctional>,
    pub background: Profile,
    pub functional_bound: f64,
}

impl HierSpec {
    pub fn new(
        partition: Partition,
        density: Density,
        level_scales: Vec<f64>,
        tail_bound: f64,
        functionals: BTreeMap<(i64, usize), LinearFunctional>,
        background: Profile,
        functional_bound: f64,
    ) -> Result<Self> {
        if level_scales.iter().any(|&e| e <= 0.0) {
            return Err(Error::InvalidScale("level scales must be positive".into()));
        }
        for ((n, k), l) in &functionals {
            if l.plus_norm() > functional_bound {
                return Err(Error::SpecViolation(format!(
                    "functional at (site {n}, level {k}) has +-norm {} > bound {functional_bound}",
                    l.plus_norm()
                )));
            }
        }
        Ok(HierSpec {
            partition,
            density,
            level_scales,
            tail_bound,
            functionals,
            background,
            functional_bound,
        })
    }

    pub fn depth(&self) -> usize {
        self.level_scales.len()
    }

    pub fn functional(&self, n: i64, k: usize) -> LinearFunctional {
        self.functionals.get(&(n, k)).cloned().unwrap_or_default()
    }

    /// Level-`k` amplitude draw at site `n`: `ξ_{n,k} ~ r_{ε_k}`.
    pub fn draw(&self, n: i64, k: usize, seed: u64) -> f64 {
        let mut st = substream(seed, &[1 + k as u64, site_label(n)]);
        self.level_scales[k] * self.density.sample(&mut st)
    }
}

/// `tail_tol`, when given, rejects specs whose declared truncation tail
/// exceeds the requested sup-norm tolerance.
pub fn sample_hier_potential(
    spec: &HierSpec,
    l: i64,
    seed: u64,
    tail_tol: Option<f64>,
) -> Result<PotentialWindow> {
    if let Some(tol) = tail_tol {
        if spec.tail_bound > tol {
            return Err(Error::Truncation(format!(
                "declared tail bound {} exceeds tolerance {tol}",
                spec.tail_bound
            )));
        }
    }
    let depth = spec.depth();
    let mut values = Vec::with_capacity((2 * l + 1) as usize);
    for n in -l..=l {
        let m_abs = spec.partition.m_of(n)?.unsigned_abs() as usize;
        let mut v = spec.background.value(n)?;
        for k in m_abs..depth {
            v += spec.draw(n, k, seed);
        }
        for k in 0..m_abs.min(depth) {
            v += spec.functional(n, k).apply(|s| spec.draw(s, k, seed));
        }
        values.push(v);
    }
    Ok(PotentialWindow::new(
        -l,
        values,
        format!("hier(L={l},depth={depth})"),
        seed,
    ))
}

// ---------------------------------------------------------------------------
// Scale/radius sequences for the limit-periodic construction
// ---------------------------------------------------------------------------

/// Output of [`gen_sequences`]: decreasing level scales with
/// `Σ ε_k < eps`, and interval radii with `2 n_k + 1` a nontrivial odd
/// multiple of `2 n_{k-1} + 1`.
#[derive(Debug, Clone)]
pub struct LpSequences {
    pub eps_terms: Vec<f64>,
    pub radii: Vec<i64>,
    /// `Σ_{k ≥ levels} ε_k` under the geometric rule.
    pub tail: f64,
}

/// Default level-scale rule: `ε_k = eps · 2^{-(k+2)}`.
fn eps_rule(eps: f64, k: usize) -> f64 {
    eps * 0.25 * 0.5f64.powi(k as i32)
}

// Smallest integer n with eps_next^{-5/2} e^{-gamma n eps_next^2} < 2^{-k},
// the sufficient growth condition at level k (constraining n_{k-1}).
fn radius_requirement(eps_next: f64, gamma: f64, k: usize) -> f64 {
    ((k as f64) * std::f64::consts::LN_2 - 2.5 * eps_next.ln()) / (gamma * eps_next * eps_next)
}

/// Generate `levels` scales and radii for the limit-periodic construction:
/// ε_k decreasing with `Σ ε_k < eps`; each `2 n_k + 1` a nontrivial multiple
/// of `2 n_{k-1} + 1`; each radius the minimal choice satisfying the growth
/// condition for the next level. Radii above `cap` produce a cap error.
pub fn gen_sequences(eps: f64, gamma: f64, levels: usize, cap: i64) -> Result<LpSequences> {
    if eps <= 0.0 || gamma <= 0.0 {
        return Err(Error::SpecViolation("eps and gamma must be positive".into()));
    }
    if levels == 0 {
        return Err(Error::SpecViolation("need at least one level".into()));
    }
    let eps_terms: Vec<f64> = (0..levels).map(|k| eps_rule(eps, k)).collect();
    let mut radii: Vec<i64> = Vec::with_capacity(levels);
    for k in 0..levels {
        // n_k must satisfy the growth condition written at level k+1.
        let need = radius_requirement(eps_rule(eps, k + 1), gamma, k + 1);
        let floor = need.max(0.0).floor() as i64 + 1; // strict inequality
        let n_k = if k == 0 {
            floor.max(1)
        } else {
            // Smallest odd multiple t >= 3 of the previous period that
            // reaches the requirement.
            let prev_period = 2 * radii[k - 1] + 1;
            let mut t = 3i64;
            loop {
                let period = prev_period.checked_mul(t).ok_or(Error::SequenceCap {
                    k,
                    len: radii.len(),
                })?;
                let n = (period - 1) / 2;
                if n >= floor {
                    break n;
                }
                t += 2;
            }
        };
        if n_k > cap {
            return Err(Error::SequenceCap { k, len: radii.len() });
        }
        radii.push(n_k);
    }
    // Geometric tail: Σ_{k >= levels} eps 2^{-(k+2)} = eps 2^{-(levels+1)}.
    let tail = eps * 0.5f64.powi(levels as i32 + 1);
    Ok(LpSequences {
        eps_terms,
        radii,
        tail,
    })
}

// ---------------------------------------------------------------------------
// Limit-periodic potentials
// ---------------------------------------------------------------------------

/// A limit-periodic window together with its periodic approximants.
#[derive(Debug, Clone)]
pub struct LimitPeriodic {
    pub window: PotentialWindow,
    /// `(period, level-K truncation)` for K = 0, …, depth-1.
    pub approximants: Vec<(i64, PotentialWindow)>,
    pub sup_norm: f64,
    /// Sup-norm bound on what truncation at the top level discarded.
    pub tail_bound: f64,
    pub sequences: LpSequences,
}

/// Periodic-copy index: wraps `n` into `[-n_k, n_k]` modulo `2 n_k + 1`.
fn wrap_to_period(n: i64, radius: i64) -> i64 {
    let period = 2 * radius + 1;
    (n + radius).rem_euclid(period) - radius
}

/// Build the limit-periodic potential `Σ_k W_k` where level `k` is the
/// `(2 n_k + 1)`-periodic copy of fresh draws `ξ_{·,k} ~ r_{ε_k}` on
/// `[-n_k, n_k]`, plus an optional background. Returns the level
/// truncations as approximants (the background is added to each, so exact
/// periodicity of approximants holds for zero/periodic backgrounds).
pub fn limit_periodic_potential(
    density: &Density,
    eps: f64,
    gamma: f64,
    background: Option<&PotentialWindow>,
    l: i64,
    k_levels: usize,
    seed: u64,
) -> Result<LimitPeriodic> {
    let seqs = gen_sequences(eps, gamma, k_levels + 1, i64::MAX / 4)?;
    if l > seqs.radii[k_levels] {
        return Err(Error::Coverage(format!(
            "window radius {l} exceeds top-level radius {}",
            seqs.radii[k_levels]
        )));
    }
    let size = (2 * l + 1) as usize;
    let mut level_values = vec![vec![0.0f64; size]; k_levels + 1];
    for (k, lv) in level_values.iter_mut().enumerate() {
        let radius = seqs.radii[k];
        let scale = seqs.eps_terms[k];
        for (i, slot) in lv.iter_mut().enumerate() {
            let n = -l + i as i64;
            let j = wrap_to_period(n, radius);
            let mut st = substream(seed, &[1 + k as u64, site_label(j)]);
            *slot = scale * density.sample(&mut st);
        }
    }
    let bg = |n: i64| -> Result<f64> {
        match background {
            Some(w) => w.value(n),
            None => Ok(0.0),
        }
    };
    let mut approximants = Vec::with_capacity(k_levels + 1);
    let mut acc = vec![0.0f64; size];
    for (k, lv) in level_values.iter().enumerate() {
        for (a, &v) in acc.iter_mut().zip(lv) {
            *a += v;
        }
        let mut vals = Vec::with_capacity(size);
        for (i, &a) in acc.iter().enumerate() {
            vals.push(a + bg(-l + i as i64)?);
        }
        approximants.push((
            2 * seqs.radii[k] + 1,
            PotentialWindow::new(-l, vals, format!("lp-approx(K={k},L={l})"), seed),
        ));
    }
    let window = PotentialWindow::new(
        -l,
        approximants.last().unwrap().1.values().to_vec(),
        format!("lp(L={l},levels={k_levels})"),
        seed,
    );
    let sup_norm = window.sup_norm();
    Ok(LimitPeriodic {
        window,
        approximants,
        sup_norm,
        tail_bound: seqs.tail,
        sequences: seqs,
    })
}

// ---------------------------------------------------------------------------
// Quasi-periodic decaying-bump potentials
// ---------------------------------------------------------------------------

/// Quasi-periodic bump window plus its amplitude envelope and block
/// decomposition.
#[derive(Debug, Clone)]
pub struct QpBump {
    pub window: PotentialWindow,
    /// `a_n` for `n` in the window, indexed from `-L`.
    pub amplitudes: Vec<f64>,
    /// Inclusive block ranges covering the window.
    pub blocks: Vec<(i64, i64)>,
    /// Minimum pairwise circle distance between the orbit points.
    pub min_orbit_gap: f64,
}

/// Decaying amplitude envelope `a_n = (eps/100)(1+|n|)^{-alpha_exp}`.
pub fn bump_amplitude(eps: f64, alpha_exp: f64, n: i64) -> f64 {
    (eps / 100.0) * (1.0 + n.abs() as f64).powf(-alpha_exp)
}

// Block index of site n under the greedy rule: the smallest i >= 0 with
// a_n <= eps 2^{-(i+2)} is i(n) = max(0, ceil(log2(eps / a_n)) - 2); blocks
// are the level sets, contiguous because a_n is monotone in |n|.
fn block_index(eps: f64, alpha_exp: f64, n: i64) -> i64 {
    let a = bump_amplitude(eps, alpha_exp, n);
    let i = (eps / a).log2().ceil() as i64 - 2;
    i.max(0)
}

/// Sample the quasi-periodic bump potential `V(n) = χ_n + ξ_n a_n` with
/// `ξ_n` uniform on [0,1], orbit points `z_n = ω + n α mod 1` required
/// pairwise distinct, and amplitudes grouped into greedy blocks whose
/// one-index-per-block maxima sum below `eps`.
pub fn qp_bump_potential(
    alpha: f64,
    omega: f64,
    eps: f64,
    alpha_exp: f64,
    l: i64,
    seed: u64,
    background: Option<&PotentialWindow>,
) -> Result<QpBump> {
    if !(0.0 < alpha_exp && alpha_exp < 0.5) {
        return Err(Error::SpecViolation(format!(
            "amplitude exponent {alpha_exp} outside (0, 1/2)"
        )));
    }
    // Orbit degeneracy check.
    let orbit: Vec<f64> = (-l..=l)
        .map(|n| (omega + n as f64 * alpha).rem_euclid(1.0))
        .collect();
    let mut min_gap = f64::INFINITY;
    for i in 0..orbit.len() {
        for j in i + 1..orbit.len() {
            min_gap = min_gap.min(circle_dist(orbit[i] - orbit[j]));
        }
    }
    if min_gap <= 0.0 {
        return Err(Error::OrbitDegeneracy(format!(
            "coinciding orbit points on window radius {l} (alpha rational?)"
        )));
    }
    let mut values = Vec::with_capacity((2 * l + 1) as usize);
    let mut amplitudes = Vec::with_capacity((2 * l + 1) as usize);
    for n in -l..=l {
        let a = bump_amplitude(eps, alpha_exp, n);
        let mut st = substream(seed, &[site_label(n)]);
        let xi = rand::Rng::gen::<f64>(&mut st);
        let chi = match background {
            Some(w) => w.value(n)?,
            None => 0.0,
        };
        values.push(chi + xi * a);
        amplitudes.push(a);
    }
    // Contiguous block decomposition by greedy index (mirrored on the
    // negative side).
    let mut blocks: Vec<(i64, i64)> = Vec::new();
    let mut start = -l;
    let mut tag = (block_index(eps, alpha_exp, -l), (-l) >= 0);
    for n in -l..=l {
        let t = (block_index(eps, alpha_exp, n), n >= 0);
        if t != tag {
            blocks.push((start, n - 1));
            start = n;
            tag = t;
        }
    }
    blocks.push((start, l));
    Ok(QpBump {
        window: PotentialWindow::new(-l, values, format!("qp(L={l})"), seed),
        amplitudes,
        blocks,
        min_orbit_gap: min_gap,
    })
}

// ---------------------------------------------------------------------------
// Hölder tents
// ---------------------------------------------------------------------------

/// Tent of width `eps` and peak `eps^γ̃` centered at `z` on the circle:
/// `g(x) = eps^{γ̃-1} max(0, eps - dist(x, z))`. Requires `eps < 1/2` so
/// the tent fits on the circle.
pub fn holder_tent(z: f64, eps: f64, gammatilde: f64, x: f64) -> f64 {
    debug_assert!(eps > 0.0 && eps < 0.5, "tent must fit on the circle");
    let d = circle_dist(x - z);
    eps.powf(gammatilde - 1.0) * (eps - d).max(0.0)
}

/// Value and partial sup bound of the tent series at one point.
#[derive(Debug, Clone, Copy)]
pub struct HolderEval {
    pub value: f64,
    /// `Σ_k 2 / (100 q_{k+1})^{γ̃}` over the represented blocks.
    pub block_bound: f64,
}

// Convergent index k with q_k <= max(|2n|, 1) < q_{k+1}; the tent at z_n
// then has width 1 / (100 q_{k+1}).
fn tent_block(conv: &Convergents, n: i64) -> Result<usize> {
    let target = (2 * n.abs()).max(1) as f64;
    for k in 0..conv.entries.len() - 1 {
        if conv.q_f64(k) <= target && target < conv.q_f64(k + 1) {
            return Ok(k);
        }
    }
    Err(Error::OutOfRange {
        site: n,
        lo: 0,
        hi: conv.entries.len() as i64 - 1,
    })
}

/// Evaluate `G(x) = Σ_{|n| ≤ n_terms} μ_n g_n(x)` with tents centered at
/// `z_n = n α` (phase ω = 0) of width `1/(100 q_{k+1})` for the block
/// `q_k ≤ |2n| < q_{k+1}`. `mu` has length `2 n_terms + 1`, indexed from
/// `-n_terms`, with entries in `[0, 1]`.
pub fn holder_g(
    conv: &Convergents,
    gammatilde: f64,
    mu: &[f64],
    x: f64,
    n_terms: i64,
) -> Result<HolderEval> {
    if mu.len() as i64 != 2 * n_terms + 1 {
        return Err(Error::SpecViolation(format!(
            "mu length {} does not match window radius {n_terms}",
            mu.len()
        )));
    }
    if mu.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
        return Err(Error::SpecViolation("weights must lie in [0,1]".into()));
    }
    let alpha = conv
        .alpha_f64()
        .ok_or_else(|| Error::SpecViolation("convergents carry no frequency".into()))?;
    let mut value = 0.0f64;
    let mut top_block = 0usize;
    for n in -n_terms..=n_terms {
        let m = mu[(n + n_terms) as usize];
        let k = tent_block(conv, n)?;
        top_block = top_block.max(k);
        if m == 0.0 {
            continue;
        }
        let width = 1.0 / (100.0 * conv.q_f64(k + 1));
        let z = (n as f64 * alpha).rem_euclid(1.0);
        value += m * holder_tent(z, width, gammatilde, x);
    }
    let mut block_bound = 0.0f64;
    for k in 0..=top_block {
        block_bound += 2.0 / (100.0 * conv.q_f64(k + 1)).powf(gammatilde);
    }
    Ok(HolderEval { value, block_bound })
}

/// Width of the tent used for site `n` (exposed for regularity tests).
pub fn tent_width(conv: &Convergents, n: i64) -> Result<f64> {
    let k = tent_block(conv, n)?;
    Ok(1.0 / (100.0 * conv.q_f64(k + 1)))
}
