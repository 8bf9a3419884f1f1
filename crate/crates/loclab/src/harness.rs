//! Config-driven experiment harness behind the `loclab` binary.
//!
//! One TOML config file per run. Each subcommand reads its own section,
//! writes CSV artifacts plus a `manifest.toml` into the output directory,
//! and returns a process exit code: 0 on success, 1 on validation failure,
//! 2 on numerical failure. Outputs are computed before anything is written,
//! and files already written are removed if a later write fails, so a
//! failed run leaves no partial artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diophantine::{
    continued_fraction, gap_check, Frequency, GOLDEN_MEAN_DIGITS, PI_MINUS_3_DIGITS,
};
use crate::distributions::Density;
use crate::error::{Error, Result};
use crate::ksoperators::{
    build_s, build_t, factorization_oracle, jacobian_oracle, GridSpec,
};
use crate::localization::{dynamical_check, fit_rate, rho_estimate, SpecKind};
use crate::potentials::{
    gen_sequences, holder_g, sample_ks_potential, KSSpec, Profile,
};
use crate::rng::substream;
use crate::spectra::TridiagonalOperator;

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

pub const SCHEMA_VERSION: u32 = 1;

/// Top-level run configuration. Unknown keys anywhere in the file are
/// rejected with a message naming the key.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequences: Option<SequencesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construct: Option<ConstructConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diophantine: Option<DiophantineConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported; this build reads version {}",
                cfg.schema_version, SCHEMA_VERSION
            )));
        }
        Ok(cfg)
    }
}

/// Limit-periodic scale/radius tables (`sequences` subcommand).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequencesConfig {
    pub eps: f64,
    pub gamma: f64,
    pub levels: usize,
    #[serde(default = "default_cap")]
    pub cap: i64,
}

fn default_cap() -> i64 {
    1_000_000_000_000
}

/// One potential construction. `kind` selects the family; the remaining
/// keys are per-kind parameters, validated with messages naming the key.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructConfig {
    /// `iid-uniform` | `limit-periodic` | `qp-bump`
    pub kind: String,
    /// Window radius: sites `-l..=l`.
    pub l: i64,
    /// iid-uniform: coupling scale (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_levels: Option<usize>,
    /// qp-bump frequency: `golden`, `pi-3`, or a decimal in (0, 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_exp: Option<f64>,
}

fn require<T: Copy>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing key `{key}`")))
}

/// Resolve a frequency name or decimal-digit string to an f64 in (0, 1).
pub fn parse_frequency(s: &str) -> Result<f64> {
    let digits = match s {
        "golden" => GOLDEN_MEAN_DIGITS,
        "pi-3" => PI_MINUS_3_DIGITS,
        other => other,
    };
    let v: f64 = digits
        .parse()
        .map_err(|_| Error::Config(format!("frequency `{s}` is not a decimal number")))?;
    if !(0.0 < v && v < 1.0) {
        return Err(Error::Config(format!("frequency `{s}` outside (0, 1)")));
    }
    Ok(v)
}

impl ConstructConfig {
    pub fn spec_kind(&self) -> Result<SpecKind> {
        if self.l < 1 {
            return Err(Error::Config(format!(
                "construct.l must be >= 1, got {}",
                self.l
            )));
        }
        match self.kind.as_str() {
            "iid-uniform" => {
                let a = self.a.unwrap_or(1.0);
                if a <= 0.0 {
                    return Err(Error::Config("construct.a must be positive".into()));
                }
                let spec = KSSpec::new(
                    Density::Uniform,
                    Profile::Constant(a),
                    Profile::Constant(0.0),
                    BTreeMap::new(),
                    0.0,
                )?;
                Ok(SpecKind::Ks(spec))
            }
            "limit-periodic" => Ok(SpecKind::LimitPeriodic {
                eps: require(self.eps, "construct.eps")?,
                gamma: require(self.gamma, "construct.gamma")?,
                k_levels: require(self.k_levels, "construct.k_levels")?,
            }),
            "qp-bump" => {
                let alpha = self
                    .alpha
                    .as_deref()
                    .ok_or_else(|| Error::Config("missing key `construct.alpha`".into()))?;
                Ok(SpecKind::Qp {
                    alpha: parse_frequency(alpha)?,
                    omega: self.omega.unwrap_or(0.0),
                    eps: require(self.eps, "construct.eps")?,
                    alpha_exp: require(self.alpha_exp, "construct.alpha_exp")?,
                })
            }
            other => Err(Error::Config(format!(
                "construct.kind `{other}` unknown (expected iid-uniform | limit-periodic | qp-bump)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub construct: ConstructConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub trials: usize,
    /// Reference site of the correlator (default 0).
    #[serde(default)]
    pub m: i64,
    /// Optional log-linear fit window over `|n - m|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_lo: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_hi: Option<i64>,
    pub construct: ConstructConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Subset of: jacobian, factorization, norms, gap, holder, dynamical.
    pub checks: Vec<String>,
    /// Test hook: verify the determinant identity against the wrong sign,
    /// which must fail and exit 2 (negative control for the plumbing).
    #[serde(default)]
    pub negative_control: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiophantineConfig {
    /// `golden`, `pi-3`, or a decimal-digit string.
    pub frequency: String,
    /// Number of convergents to compute.
    pub k_max: usize,
    /// Largest `k` for the brute-force orbit-gap scan (default: none).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_k: Option<usize>,
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Written as `manifest.toml` next to the artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub artifact_version: String,
    pub subcommand: String,
    pub seed: u64,
    pub seed_overridden: bool,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub failure_counts: BTreeMap<String, u64>,
    pub files: Vec<FileDigest>,
    /// Echo of the parsed config.
    pub config: RunConfig,
}

pub fn sha256_hex(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(data);
    let d = h.finalize();
    let mut s = String::with_capacity(64);
    for b in d {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

// ---------------------------------------------------------------------------
// Subcommand execution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Sequences,
    Construct,
    Spectrum,
    Decay,
    Verify,
    Diophantine,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Sequences => "sequences",
            Subcommand::Construct => "construct",
            Subcommand::Spectrum => "spectrum",
            Subcommand::Decay => "decay",
            Subcommand::Verify => "verify",
            Subcommand::Diophantine => "diophantine",
        }
    }
}

/// Everything a subcommand produces: named CSV bodies plus manifest fields.
#[derive(Debug, Default)]
struct Outputs {
    files: Vec<(String, String)>,
    tolerances: BTreeMap<String, f64>,
    failure_counts: BTreeMap<String, u64>,
    /// Set by `verify` when some check failed (exit 2 even though the
    /// report is written).
    checks_failed: bool,
}

/// Map an error to the process exit code: configuration and schema
/// problems are validation failures (1); everything else is numerical (2).
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Parse(_)
        | Error::SpecViolation(_)
        | Error::OutOfRange { .. }
        | Error::Coverage(_)
        | Error::Truncation(_)
        | Error::Io(_) => 1,
        _ => 2,
    }
}

/// Run one subcommand end to end. Prints a short summary to stdout and
/// error text to stderr; returns the process exit code.
pub fn execute(
    sub: Subcommand,
    config_path: &Path,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
) -> u8 {
    let started = now_ms();
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", config_path.display());
            return 1;
        }
    };
    let mut config = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let seed_overridden = seed_override.is_some();
    if let Some(s) = seed_override {
        config.seed = s;
    }
    let out_dir = out_override
        .unwrap_or_else(|| PathBuf::from(config.out_dir.as_deref().unwrap_or("out")));

    let result = match sub {
        Subcommand::Sequences => run_sequences(&config),
        Subcommand::Construct => run_construct(&config),
        Subcommand::Spectrum => run_spectrum(&config),
        Subcommand::Decay => run_decay(&config),
        Subcommand::Verify => run_verify(&config),
        Subcommand::Diophantine => run_diophantine(&config),
    };
    let outputs = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };

    match write_outputs(&out_dir, sub, &config, seed_overridden, started, outputs) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn write_outputs(
    out_dir: &Path,
    sub: Subcommand,
    config: &RunConfig,
    seed_overridden: bool,
    started: u64,
    outputs: Outputs,
) -> Result<u8> {
    fs::create_dir_all(out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut digests = Vec::new();
    let mut emit = |name: &str, body: &str, written: &mut Vec<PathBuf>| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        digests.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(body.as_bytes()),
        });
        Ok(())
    };
    for (name, body) in &outputs.files {
        if let Err(e) = emit(name, body, &mut written) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
    }
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: sub.name().to_string(),
        seed: config.seed,
        seed_overridden,
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        tolerances: outputs.tolerances,
        failure_counts: outputs.failure_counts,
        files: digests,
        config: config.clone(),
    };
    let body = toml::to_string(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    if let Err(e) = fs::write(out_dir.join("manifest.toml"), &body) {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        return Err(e.into());
    }
    println!(
        "{}: wrote {} file(s) to {}",
        sub.name(),
        outputs.files.len() + 1,
        out_dir.display()
    );
    Ok(if outputs.checks_failed { 2 } else { 0 })
}

fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T> {
    opt.as_ref()
        .ok_or_else(|| Error::Config(format!("missing config section `[{name}]`")))
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn run_sequences(config: &RunConfig) -> Result<Outputs> {
    let c = section(&config.sequences, "sequences")?;
    let s = gen_sequences(c.eps, c.gamma, c.levels, c.cap)?;
    let mut csv = String::from("k,eps_k,n_k\n");
    for (k, (e, n)) in s.eps_terms.iter().zip(&s.radii).enumerate() {
        let _ = writeln!(csv, "{k},{e},{n}");
    }
    let mut out = Outputs::default();
    out.files.push(("sequences.csv".into(), csv));
    Ok(out)
}

fn run_construct(config: &RunConfig) -> Result<Outputs> {
    let c = section(&config.construct, "construct")?;
    let spec = c.spec_kind()?;
    let w = spec.sample(c.l, config.seed)?;
    let mut out = Outputs::default();
    out.files.push(("potential.csv".into(), w.to_csv()));
    Ok(out)
}

fn run_spectrum(config: &RunConfig) -> Result<Outputs> {
    let c = section(&config.spectrum, "spectrum")?;
    let spec = c.construct.spec_kind()?;
    let w = spec.sample(c.construct.l, config.seed)?;
    let e = TridiagonalOperator::build(&w).eigen()?;
    let mut csv = String::from("j,eigenvalue\n");
    for (j, ev) in e.eigenvalues().iter().enumerate() {
        let _ = writeln!(csv, "{j},{ev}");
    }
    let mut out = Outputs::default();
    out.files.push(("potential.csv".into(), w.to_csv()));
    out.files.push(("eigenvalues.csv".into(), csv));
    Ok(out)
}

fn run_decay(config: &RunConfig) -> Result<Outputs> {
    let c = section(&config.decay, "decay")?;
    let spec = c.construct.spec_kind()?;
    let profile = rho_estimate(&spec, c.construct.l, c.m, c.trials, config.seed)?;
    let mut out = Outputs::default();
    out.failure_counts
        .insert("diagonalization".into(), profile.failures as u64);
    if let (Some(lo), Some(hi)) = (c.fit_lo, c.fit_hi) {
        let fit = fit_rate(&profile, lo, hi)?;
        let mut csv = String::from("rate,intercept,r_squared,rate_stderr,ci_lo,ci_hi,points\n");
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fit.rate,
            fit.intercept,
            fit.r_squared,
            fit.rate_stderr,
            fit.rate_ci95.0,
            fit.rate_ci95.1,
            fit.points
        );
        out.files.push(("fit.csv".into(), csv));
    }
    out.files.push(("decay.csv".into(), profile.to_csv(None)));
    Ok(out)
}

fn run_diophantine(config: &RunConfig) -> Result<Outputs> {
    let c = section(&config.diophantine, "diophantine")?;
    let digits = match c.frequency.as_str() {
        "golden" => GOLDEN_MEAN_DIGITS,
        "pi-3" => PI_MINUS_3_DIGITS,
        other => other,
    };
    let conv = continued_fraction(&Frequency::decimal(digits), c.k_max)?;
    let mut out = Outputs::default();
    out.files.push(("convergents.csv".into(), conv.to_csv()));
    if let Some(gk) = c.gap_k {
        let mut csv = String::from("k,min_gap,threshold,half_inverse_q,holds\n");
        // k starts at 2: below that the orbit window holds no distinct pair.
        for k in 2..=gk {
            let g = gap_check(&conv, k)?;
            let _ = writeln!(
                csv,
                "{k},{},{},{},{}",
                g.min_gap, g.threshold, g.half_inverse_q, g.holds
            );
        }
        out.files.push(("gaps.csv".into(), csv));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Verify suite
// ---------------------------------------------------------------------------

/// One desk-scale verification row: pass iff `residual <= tolerance`.
#[derive(Debug, Clone)]
pub struct CheckRow {
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn pass(&self) -> bool {
        self.residual <= self.tolerance
    }
}

fn plain_uniform_spec(a: f64) -> Result<KSSpec> {
    KSSpec::new(
        Density::Uniform,
        Profile::Constant(a),
        Profile::Constant(0.0),
        BTreeMap::new(),
        0.0,
    )
}

fn check_jacobian(seed: u64, negative_control: bool) -> Result<Vec<CheckRow>> {
    let spec = plain_uniform_spec(1.0)?;
    let (mut jac, mut ratio, mut fd, mut map) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut checked = 0usize;
    for l in 1..=3i64 {
        for trial in 0..5u64 {
            let w = sample_ks_potential(
                &spec,
                l,
                rand::RngCore::next_u64(&mut substream(seed, &[90, l as u64, trial])),
            )?;
            for k in 0..(2 * l + 1) as usize {
                match jacobian_oracle(&w, k) {
                    Ok(r) => {
                        jac = jac.max(r.jac_res);
                        ratio = ratio.max(r.ratio_res);
                        fd = fd.max(r.fd_res);
                        map = map.max(r.map_res);
                        checked += 1;
                    }
                    Err(Error::DegenerateSample(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    if checked == 0 {
        return Err(Error::Numerical("all samples degenerate".into()));
    }
    if negative_control {
        // Test the determinant identity against the wrong sign: the
        // residual |det J * phi(0)^2 + 1| is 2 up to the true residual.
        jac = 2.0 - jac;
    }
    Ok(vec![
        CheckRow { check: "jacobian_det".into(), residual: jac, tolerance: 1e-6 },
        CheckRow { check: "jacobian_ratio".into(), residual: ratio, tolerance: 1e-9 },
        CheckRow { check: "jacobian_fd".into(), residual: fd, tolerance: 1e-5 },
        CheckRow { check: "jacobian_map".into(), residual: map, tolerance: 1e-8 },
    ])
}

fn check_factorization(seed: u64) -> Result<Vec<CheckRow>> {
    let spec = plain_uniform_spec(1.0)?;
    let r = factorization_oracle(&spec, 1, 1, 20_000, 80, seed)?;
    Ok(vec![CheckRow {
        check: "factorization_l1".into(),
        residual: r.rel_err,
        tolerance: 0.05,
    }])
}

fn check_norms() -> Result<Vec<CheckRow>> {
    let mut s11 = f64::NEG_INFINITY;
    let mut s12 = f64::NEG_INFINITY;
    for &a in &[1.0f64, 0.3] {
        let g = GridSpec::new(1e-3, 1e3, -4.0, 4.0, 2e-4 * a, 0.5 * a, f64::INFINITY)?;
        let d = Density::Uniform.rescale(a)?;
        let s = build_s(d, 0.7, &g);
        s11 = s11.max(s.op_norm(1, 1)? - 1.0);
        // Continuum bound: a^{-1/2} ||r||_inf^{1/2}, which is sqrt(1/a)
        // for the unit-height uniform density.
        s12 = s12.max(s.op_norm(1, 2)? - (1.0 / a).sqrt());
    }
    let a = 1.0;
    let g22 = GridSpec::new(1e-3, 1e3, -4.0, 4.0, 1e-3 * a, 0.05 * a, f64::INFINITY)?;
    let t = build_t(Density::Uniform.rescale(a)?, 0.7, &g22);
    let t22 = t.op_norm(2, 2)? - 1.0;
    Ok(vec![
        CheckRow { check: "norm_s11".into(), residual: s11, tolerance: 1e-3 },
        CheckRow { check: "norm_s12".into(), residual: s12, tolerance: 1e-3 },
        CheckRow { check: "norm_t22".into(), residual: t22, tolerance: 1e-3 },
    ])
}

fn check_gap() -> Result<Vec<CheckRow>> {
    let mut worst = f64::NEG_INFINITY;
    for (digits, kmax) in [(GOLDEN_MEAN_DIGITS, 8usize), (PI_MINUS_3_DIGITS, 5)] {
        let conv = continued_fraction(&Frequency::decimal(digits), kmax + 1)?;
        // k = 1 can admit no distinct site pair (q_2 as small as 2).
        for k in 2..=kmax {
            let g = gap_check(&conv, k)?;
            worst = worst.max(g.threshold - g.min_gap);
        }
    }
    Ok(vec![CheckRow {
        check: "gap_bound".into(),
        residual: worst,
        tolerance: 0.0,
    }])
}

fn check_holder(seed: u64) -> Result<Vec<CheckRow>> {
    let conv = continued_fraction(&Frequency::decimal(GOLDEN_MEAN_DIGITS), 14)?;
    let (gamma, gammatilde) = (0.3f64, 0.4f64);
    let n_terms = 40i64;
    let mu = vec![1.0; (2 * n_terms + 1) as usize];
    let dmax = 1.0 / conv.q_f64(5);
    let mut st = substream(seed, &[91]);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..2000 {
        let x: f64 = rand::Rng::gen(&mut st);
        let d = rand::Rng::gen::<f64>(&mut st) * dmax;
        let y = (x + d).rem_euclid(1.0);
        let gx = holder_g(&conv, gammatilde, &mu, x, n_terms)?.value;
        let gy = holder_g(&conv, gammatilde, &mu, y, n_terms)?.value;
        worst = worst.max((gx - gy).abs() - d.powf(gamma));
    }
    Ok(vec![CheckRow {
        check: "holder".into(),
        residual: worst,
        tolerance: 0.0,
    }])
}

fn check_dynamical(seed: u64) -> Result<Vec<CheckRow>> {
    let spec = SpecKind::Ks(plain_uniform_spec(1.0)?);
    let t_grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.2).collect();
    let r = dynamical_check(&spec, 10, 10, &t_grid, seed)?;
    Ok(vec![CheckRow {
        check: "dynamical".into(),
        residual: r.max_violation,
        tolerance: 1e-10,
    }])
}

/// Run the requested desk-scale checks; always returns the rows (the
/// harness writes the report even when checks fail).
pub fn verify_suite(c: &VerifyConfig, seed: u64) -> Result<Vec<CheckRow>> {
    if c.checks.is_empty() {
        return Err(Error::Config(
            "verify.checks is empty: nothing verified is an error".into(),
        ));
    }
    let mut rows = Vec::new();
    for name in &c.checks {
        let got = match name.as_str() {
            "jacobian" => check_jacobian(seed, c.negative_control)?,
            "factorization" => check_factorization(seed)?,
            "norms" => check_norms()?,
            "gap" => check_gap()?,
            "holder" => check_holder(seed)?,
            "dynamical" => check_dynamical(seed)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown check `{other}` (expected jacobian | factorization | norms | gap | holder | dynamical)"
                )))
            }
        };
        rows.extend(got);
    }
    Ok(rows)
}

fn run_verify(config: &RunConfig) -> Result<Outputs> {
    let c = section(&config.verify, "verify")?;
    let rows = verify_suite(c, config.seed)?;
    let mut csv = String::from("check,residual,tolerance,pass\n");
    let mut failed = 0u64;
    for r in &rows {
        let pass = r.pass();
        if !pass {
            failed += 1;
        }
        println!(
            "verify {}: {} (residual {:.3e}, tolerance {:.3e})",
            r.check,
            if pass { "pass" } else { "FAIL" },
            r.residual,
            r.tolerance
        );
        let _ = writeln!(csv, "{},{},{},{}", r.check, r.residual, r.tolerance, pass);
    }
    let mut out = Outputs::default();
    out.failure_counts.insert("checks_failed".into(), failed);
    for r in &rows {
        out.tolerances.insert(r.check.clone(), r.tolerance);
    }
    out.files.push(("verify_report.csv".into(), csv));
    out.checks_failed = failed > 0;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("run.toml");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse("schema_version = 1\nseed = 1\nbogus = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("bogus")), "{err}");
    }

    #[test]
    fn missing_required_key_names_it() {
        let err = RunConfig::parse(
            "schema_version = 1\nseed = 1\n[decay]\nm = 0\n[decay.construct]\nkind = \"iid-uniform\"\nl = 5\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("trials")), "{err}");
    }

    #[test]
    fn schema_version_checked() {
        let err = RunConfig::parse("schema_version = 9\nseed = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn sequences_roundtrip() {
        let dir = tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            "schema_version = 1\nseed = 3\n[sequences]\neps = 0.1\ngamma = 0.04\nlevels = 4\n",
        );
        let out = dir.path().join("out");
        let code = execute(Subcommand::Sequences, &cfg, Some(out.clone()), None);
        assert_eq!(code, 0);
        let csv = fs::read_to_string(out.join("sequences.csv")).unwrap();
        assert!(csv.starts_with("k,eps_k,n_k\n"));
        assert_eq!(csv.lines().count(), 5);
        let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
        assert!(manifest.contains("sha256"));
        // Digest in the manifest matches the emitted file.
        assert!(manifest.contains(&sha256_hex(csv.as_bytes())));
    }

    #[test]
    fn decay_rerun_is_byte_identical() {
        let dir = tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            "schema_version = 1\nseed = 42\n[decay]\ntrials = 40\nm = 0\n[decay.construct]\nkind = \"iid-uniform\"\nl = 6\n",
        );
        let (o1, o2) = (dir.path().join("a"), dir.path().join("b"));
        assert_eq!(execute(Subcommand::Decay, &cfg, Some(o1.clone()), None), 0);
        assert_eq!(execute(Subcommand::Decay, &cfg, Some(o2.clone()), None), 0);
        let a = fs::read(o1.join("decay.csv")).unwrap();
        let b = fs::read(o2.join("decay.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_section_is_validation_failure() {
        let dir = tempdir().unwrap();
        let cfg = write_config(dir.path(), "schema_version = 1\nseed = 3\n");
        let code = execute(Subcommand::Decay, &cfg, Some(dir.path().join("o")), None);
        assert_eq!(code, 1);
        // Nothing written.
        assert!(!dir.path().join("o").join("manifest.toml").exists());
    }

    #[test]
    fn seed_override_recorded() {
        let dir = tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            "schema_version = 1\nseed = 3\n[construct]\nkind = \"iid-uniform\"\nl = 4\n",
        );
        let out = dir.path().join("o");
        assert_eq!(
            execute(Subcommand::Construct, &cfg, Some(out.clone()), Some(99)),
            0
        );
        let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
        assert!(manifest.contains("seed = 99"));
        assert!(manifest.contains("seed_overridden = true"));
    }

    #[test]
    fn verify_empty_checks_is_error() {
        let cfg = VerifyConfig { checks: vec![], negative_control: false };
        assert!(matches!(verify_suite(&cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn verify_negative_control_fails_jacobian() {
        let dir = tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            "schema_version = 1\nseed = 5\n[verify]\nchecks = [\"jacobian\"]\nnegative_control = true\n",
        );
        let out = dir.path().join("o");
        let code = execute(Subcommand::Verify, &cfg, Some(out.clone()), None);
        assert_eq!(code, 2);
        // Report still written.
        let report = fs::read_to_string(out.join("verify_report.csv")).unwrap();
        assert!(report.contains("jacobian_det"));
        assert!(report.contains("false"));
    }

    #[test]
    fn verify_quick_checks_pass() {
        let dir = tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            "schema_version = 1\nseed = 5\n[verify]\nchecks = [\"jacobian\", \"gap\", \"holder\"]\n",
        );
        let out = dir.path().join("o");
        let code = execute(Subcommand::Verify, &cfg, Some(out.clone()), None);
        assert_eq!(code, 0, "{:?}", fs::read_to_string(out.join("verify_report.csv")));
    }

    #[test]
    fn construct_kind_validation() {
        let c = ConstructConfig {
            kind: "qp-bump".into(),
            l: 5,
            a: None,
            eps: Some(0.1),
            gamma: None,
            k_levels: None,
            alpha: None,
            omega: None,
            alpha_exp: Some(0.3),
        };
        let err = c.spec_kind().unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("alpha")), "{err}");
    }

    #[test]
    fn frequency_parsing() {
        assert!(parse_frequency("golden").unwrap() > 0.6);
        assert!(parse_frequency("pi-3").unwrap() < 0.15);
        assert!((parse_frequency("0.25").unwrap() - 0.25).abs() < 1e-15);
        assert!(parse_frequency("1.5").is_err());
        assert!(parse_frequency("abc").is_err());
    }
}
