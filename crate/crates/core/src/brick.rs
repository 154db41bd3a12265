//! Gauges (per-word coefficient bounds), their evanescence/admissibility
//! checks, reproducible sampling from the box of functions whose Haar
//! coefficients respect the gauge, and the Monte Carlo experiment that
//! measures how often a sampled perturbation certifies.
//!
//! Sampling is counter-based: each coefficient is a pure function of
//! (seed, word), so draws are order-independent, parallelizable, and
//! bit-reproducible. Every sampled coefficient is an exact dyadic rational,
//! keeping all downstream certification arithmetic exact.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{scan_levels, CertifyContext, CertifyMode, LevelScan};
use crate::debruijn::PeriodicMeasure;
use crate::haar::{
    forward_transform, lipschitz_constant, HaarCoefficients, SequenceSpec, StepFunction, Word,
    MAX_LEVEL,
};
use crate::magnitude::{LogVal, Magnitude, Round};
use crate::rat::{format_rat, parse_rat, rat, rat_string, Rat};
use crate::{Error, Result};

/// splitmix64 finalizer: the bijective bit mixer all sampling keys run
/// through.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Injective 64-bit key for words up to length 56 (far beyond sampling
/// depths): the length field stays clear of the letter bits.
fn word_tag(w: &Word) -> u64 {
    ((w.len() as u64 + 1) << 57) ^ (w.index() as u64)
}

const DRAW_BITS: u32 = 53;

/// Uniform dyadic draw on (-1, 1): u = (2k - (2^53 - 1)) / 2^53 with k
/// uniform on 53 bits. A pure function of (seed, word).
fn unit_draw(seed: u64, w: &Word) -> Rat {
    let k = (mix64(seed ^ mix64(word_tag(w))) >> (64 - DRAW_BITS)) as i64;
    rat(2 * k - ((1i64 << DRAW_BITS) - 1), 1i64 << DRAW_BITS)
}

fn default_depth() -> u32 {
    5
}
fn default_c_eva() -> Rat {
    Rat::zero()
}
fn default_c_adm() -> u32 {
    1
}
fn default_c_lin() -> u32 {
    4
}

/// How log2(b_omega) is produced from the level |omega|.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum GaugeRule {
    /// log2 b = log2 a_n + per_level_shift * n + shift.
    ScaledSequence { per_level_shift: i64, shift: i64 },
    /// b = a_n / max(n, 1).
    Harmonic,
    /// Explicit log2 values per level (at least two), extended to deeper
    /// levels geometrically with the last tabulated step.
    LevelTable {
        #[serde(with = "crate::rat::rat_vec_string")]
        log2_values: Vec<Rat>,
    },
    /// No coefficient mass at all: the brick is the single function 0.
    Zero,
}

/// A gauge: a positive bound b_omega per word, given by a level rule plus
/// optional per-word overrides, together with the sampling depth and the
/// constants used by the finite-horizon evanescence/admissibility checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeSpec {
    #[serde(flatten)]
    rule: GaugeRule,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty", with = "word_rat_map")]
    overrides: BTreeMap<Word, Rat>,
    #[serde(default = "default_depth")]
    depth: u32,
    #[serde(default = "default_c_eva", with = "rat_string")]
    c_eva_log2: Rat,
    #[serde(default = "default_c_adm")]
    c_adm: u32,
    #[serde(default = "default_c_lin")]
    c_lin: u32,
}

impl Default for GaugeSpec {
    /// b_omega = 2^-|omega| * a_|omega|, the first admissible example.
    fn default() -> Self {
        GaugeSpec::new(GaugeRule::ScaledSequence {
            per_level_shift: -1,
            shift: 0,
        })
    }
}

impl GaugeSpec {
    pub fn new(rule: GaugeRule) -> Self {
        GaugeSpec {
            rule,
            overrides: BTreeMap::new(),
            depth: default_depth(),
            c_eva_log2: default_c_eva(),
            c_adm: default_c_adm(),
            c_lin: default_c_lin(),
        }
    }

    pub fn with_depth(mut self, depth: u32) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_constants(mut self, c_eva_log2: Rat, c_adm: u32, c_lin: u32) -> Self {
        self.c_eva_log2 = c_eva_log2;
        self.c_adm = c_adm;
        self.c_lin = c_lin;
        self
    }

    pub fn with_override(mut self, w: Word, log2_bound: Rat) -> Self {
        self.overrides.insert(w, log2_bound);
        self
    }

    pub fn rule(&self) -> &GaugeRule {
        &self.rule
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn c_eva_log2(&self) -> &Rat {
        &self.c_eva_log2
    }

    pub fn c_adm(&self) -> u32 {
        self.c_adm
    }

    pub fn c_lin(&self) -> u32 {
        self.c_lin
    }

    /// Deepest overridden level, if any; tail sums must start beyond it
    /// before per-level decay ratios are meaningful.
    pub fn max_override_level(&self) -> Option<usize> {
        self.overrides.keys().map(|w| w.len() as usize).max()
    }

    /// The rule's log2 bound at level k; None for the zero gauge.
    fn rule_log2(&self, a: &SequenceSpec, k: usize) -> Result<Option<Rat>> {
        match &self.rule {
            GaugeRule::Zero => Ok(None),
            GaugeRule::ScaledSequence {
                per_level_shift,
                shift,
            } => {
                let linear = BigInt::from(*per_level_shift) * BigInt::from(k as u64)
                    + BigInt::from(*shift);
                Ok(Some(a.log2_a(k)? + Rat::from(linear)))
            }
            GaugeRule::Harmonic => Ok(Some(a.log2_a(k)?)),
            GaugeRule::LevelTable { log2_values } => Ok(Some(table_log2(log2_values, k)?)),
        }
    }

    /// b at level k as produced by the rule alone (no overrides). The
    /// harmonic rule is the only one whose value is not a pure power of 2.
    fn rule_log_val(&self, a: &SequenceSpec, k: usize) -> Result<Option<LogVal>> {
        let Some(log2) = self.rule_log2(a, k)? else {
            return Ok(None);
        };
        let v = LogVal::pow2(log2);
        Ok(Some(match self.rule {
            GaugeRule::Harmonic => v.mul_rat(&rat(1, k.max(1) as i64)),
            _ => v,
        }))
    }

    fn override_vals_at(&self, k: usize) -> impl Iterator<Item = &Rat> + '_ {
        self.overrides
            .iter()
            .filter(move |(w, _)| w.len() as usize == k)
            .map(|(_, r)| r)
    }

    /// Whether overrides replace the rule on every word at level k.
    fn level_fully_overridden(&self, k: usize) -> bool {
        let count = self.override_vals_at(k).count();
        k < 61 && count as u128 == 1u128 << k
    }

    /// bbar_k = max over |omega| = k of b_omega. None means zero.
    pub fn upper_log_val(&self, a: &SequenceSpec, k: usize) -> Result<Option<LogVal>> {
        let ov = self.override_vals_at(k).max().cloned().map(LogVal::pow2);
        if self.level_fully_overridden(k) {
            return Ok(ov);
        }
        match (self.rule_log_val(a, k)?, ov) {
            (None, o) => Ok(o),
            (Some(r), None) => Ok(Some(r)),
            (Some(r), Some(o)) => Ok(Some(logval_max(r, o)?)),
        }
    }

    /// underline-b_k = min over |omega| = k of b_omega. None means zero.
    pub fn lower_log_val(&self, a: &SequenceSpec, k: usize) -> Result<Option<LogVal>> {
        let ov = self.override_vals_at(k).min().cloned().map(LogVal::pow2);
        if self.level_fully_overridden(k) {
            return Ok(ov);
        }
        match (self.rule_log_val(a, k)?, ov) {
            (None, _) => Ok(None),
            (Some(r), None) => Ok(Some(r)),
            (Some(r), Some(o)) => Ok(Some(logval_min(r, o)?)),
        }
    }

    /// The bound for one specific word.
    pub fn word_log_val(&self, a: &SequenceSpec, w: &Word) -> Result<Option<LogVal>> {
        if let Some(r) = self.overrides.get(w) {
            return Ok(Some(LogVal::pow2(r.clone())));
        }
        self.rule_log_val(a, w.len() as usize)
    }

    /// Upper bound on log2(bbar_{k+1}/bbar_k) over all k >= h, valid once h
    /// clears every override. None means the gauge vanishes from h on.
    pub fn ratio_log2_sup_from(&self, a: &SequenceSpec, h: usize) -> Result<Option<Rat>> {
        match &self.rule {
            GaugeRule::Zero => Ok(None),
            GaugeRule::ScaledSequence {
                per_level_shift, ..
            } => Ok(Some(
                a.ratio_log2_sup_from(h)? + Rat::from(BigInt::from(*per_level_shift)),
            )),
            // b_{k+1}/b_k = (a_{k+1}/a_k) * max(k,1)/(k+1) <= a_{k+1}/a_k.
            GaugeRule::Harmonic => Ok(Some(a.ratio_log2_sup_from(h)?)),
            GaugeRule::LevelTable { log2_values } => {
                if log2_values.len() < 2 {
                    return Err(Error::invalid("gauge table needs at least two entries"));
                }
                let m = log2_values.len();
                let ext = &log2_values[m - 1] - &log2_values[m - 2];
                let mut sup = ext;
                for k in h..m.saturating_sub(1) {
                    let r = &log2_values[k + 1] - &log2_values[k];
                    if r > sup {
                        sup = r;
                    }
                }
                Ok(Some(sup))
            }
        }
    }
}

fn table_log2(log2_values: &[Rat], k: usize) -> Result<Rat> {
    if log2_values.len() < 2 {
        return Err(Error::invalid("gauge table needs at least two entries"));
    }
    let m = log2_values.len();
    if k < m {
        Ok(log2_values[k].clone())
    } else {
        let ext = &log2_values[m - 1] - &log2_values[m - 2];
        Ok(&log2_values[m - 1] + ext * Rat::from(BigInt::from((k - m + 1) as u64)))
    }
}

fn logval_max(x: LogVal, y: LogVal) -> Result<LogVal> {
    Ok(if x.cmp_exact(&y)? == Ordering::Less { y } else { x })
}

fn logval_min(x: LogVal, y: LogVal) -> Result<LogVal> {
    Ok(if x.cmp_exact(&y)? == Ordering::Greater { y } else { x })
}

/// Result of the finite-horizon evanescence check: every per-step ratio
/// log2(a_{n+1}/a_n) for 1 <= n <= horizon must stay below
/// c_log2 - 2^(n+2).
#[derive(Clone, Debug, Serialize)]
pub struct EvanescenceReport {
    pub ok: bool,
    pub first_violation: Option<usize>,
    pub constant_log2: String,
    pub detail: Option<String>,
}

pub fn check_evanescent(
    a: &SequenceSpec,
    c_log2: &Rat,
    horizon: usize,
) -> Result<EvanescenceReport> {
    if horizon < 1 {
        return Err(Error::invalid("evanescence horizon must be at least 1"));
    }
    for n in 1..=horizon {
        let step = &a.log2_a(n + 1)? - &a.log2_a(n)?;
        let allowed = c_log2 - Rat::from(BigInt::one() << (n + 2));
        if step > allowed {
            return Ok(EvanescenceReport {
                ok: false,
                first_violation: Some(n),
                constant_log2: format_rat(c_log2),
                detail: Some(format!(
                    "step log2(a_{}/a_{n}) = {} exceeds the evanescent budget {} at n = {n}",
                    n + 1,
                    format_rat(&step),
                    format_rat(&allowed)
                )),
            });
        }
    }
    Ok(EvanescenceReport {
        ok: true,
        first_violation: None,
        constant_log2: format_rat(c_log2),
        detail: None,
    })
}

/// Result of the finite-horizon admissibility check: the decaying envelope
/// bbar_n <= (C_adm / max(n,1)) * a_n and the linear log-gap
/// log2(a_n / underline-b_n) <= C_lin * n, for all n <= horizon.
#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub envelope_ok: bool,
    pub envelope_violation: Option<(usize, String)>,
    pub log_gap_ok: bool,
    pub log_gap_violation: Option<(usize, String)>,
    pub c_adm: u32,
    pub c_lin: u32,
}

impl AdmissibilityReport {
    pub fn ok(&self) -> bool {
        self.envelope_ok && self.log_gap_ok
    }

    pub fn describe(&self) -> String {
        if let Some((n, d)) = &self.envelope_violation {
            return format!("envelope fails at level {n}: {d}");
        }
        if let Some((n, d)) = &self.log_gap_violation {
            return format!("log-gap fails at level {n}: {d}");
        }
        "admissible".to_string()
    }
}

pub fn check_admissible(
    gauge: &GaugeSpec,
    a: &SequenceSpec,
    horizon: usize,
) -> Result<AdmissibilityReport> {
    let mut report = AdmissibilityReport {
        envelope_ok: true,
        envelope_violation: None,
        log_gap_ok: true,
        log_gap_violation: None,
        c_adm: gauge.c_adm,
        c_lin: gauge.c_lin,
    };
    for n in 0..=horizon {
        if report.envelope_ok {
            if let Some(upper) = gauge.upper_log_val(a, n)? {
                let envelope = a
                    .log_val(n)?
                    .mul_rat(&rat(gauge.c_adm as i64, n.max(1) as i64));
                if !upper.le(&envelope)? {
                    report.envelope_ok = false;
                    report.envelope_violation = Some((
                        n,
                        format!(
                            "bbar_{n} exceeds (C_adm/max(n,1)) * a_{n} with C_adm = {}",
                            gauge.c_adm
                        ),
                    ));
                }
            }
        }
        if report.log_gap_ok {
            match gauge.lower_log_val(a, n)? {
                None => {
                    report.log_gap_ok = false;
                    report.log_gap_violation = Some((
                        n,
                        "the gauge vanishes at this level; log2(a_n/b_n) is unbounded".into(),
                    ));
                }
                Some(lower) => {
                    let budget = lower.mul(&LogVal::pow2(rat(
                        gauge.c_lin as i64 * n as i64,
                        1,
                    )));
                    if !a.log_val(n)?.le(&budget)? {
                        report.log_gap_ok = false;
                        report.log_gap_violation = Some((
                            n,
                            format!(
                                "log2(a_{n}/underline-b_{n}) exceeds C_lin * n with C_lin = {}",
                                gauge.c_lin
                            ),
                        ));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// One draw from the brick: exact dyadic coefficients c_omega = u * b_omega
/// for every word below the gauge's depth, mean 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BrickSample {
    pub seed: u64,
    pub coeffs: HaarCoefficients,
}

/// The gauge bound as an exact rational suitable for sampling: exact when
/// log2(b) is an integer, otherwise rounded down to a 64-bit-mantissa
/// dyadic (staying inside the brick).
fn sampling_bound(gauge: &GaugeSpec, a: &SequenceSpec, w: &Word) -> Result<Option<Rat>> {
    let Some(lv) = gauge.word_log_val(a, w)? else {
        return Ok(None);
    };
    if let Some(r) = lv.to_rat_exact() {
        return Ok(Some(r));
    }
    let m = lv.to_magnitude(Round::Down)?;
    m.to_rat().map(Some).ok_or_else(|| {
        Error::cap(format!(
            "gauge bound at word {w} is too extreme to expand exactly"
        ))
    })
}

pub fn sample_brick(gauge: &GaugeSpec, a: &SequenceSpec, seed: u64) -> Result<BrickSample> {
    let depth = gauge.depth();
    if depth > MAX_LEVEL {
        return Err(Error::cap(format!(
            "sampling depth {depth} exceeds the level cap {MAX_LEVEL}"
        )));
    }
    let mut levels = Vec::with_capacity(depth as usize);
    for k in 0..depth {
        let mut row = Vec::with_capacity(1usize << k);
        for i in 0..(1usize << k) {
            let w = Word::from_index(i, k)?;
            let c = match sampling_bound(gauge, a, &w)? {
                None => Rat::zero(),
                Some(b) => unit_draw(seed, &w) * b,
            };
            row.push(c);
        }
        levels.push(row);
    }
    Ok(BrickSample {
        seed,
        coeffs: HaarCoefficients::new(Rat::zero(), levels)?,
    })
}

/// Exact level-k cylinder frequencies of a convex combination of periodic
/// orbits.
pub fn convex_pi(parts: &[(PeriodicMeasure, Rat)], k: u32) -> Result<Vec<Rat>> {
    let mut out = vec![Rat::zero(); 1usize << k];
    for (m, t) in parts {
        for (i, w) in m.pi(k)?.iter().enumerate() {
            out[i] += t * w;
        }
    }
    Ok(out)
}

/// The classical decomposition of the uniform Bernoulli measure's level-3
/// frequencies as a convex combination of four periodic orbits:
/// (1/8) 0 + (1/8) 1 + (3/8) 001 + (3/8) 011 projects to the uniform
/// vector (1/8, ..., 1/8).
pub fn beta_projection_decomposition_check() -> Result<bool> {
    let parts = [
        (PeriodicMeasure::parse("0")?, rat(1, 8)),
        (PeriodicMeasure::parse("1")?, rat(1, 8)),
        (PeriodicMeasure::parse("001")?, rat(3, 8)),
        (PeriodicMeasure::parse("011")?, rat(3, 8)),
    ];
    let pi = convex_pi(&parts, 3)?;
    Ok(pi == vec![rat(1, 8); 8])
}

fn default_samples() -> u64 {
    100
}
fn default_mode() -> CertifyMode {
    CertifyMode::Conservative
}

/// Everything a prevalence experiment needs; serializable so runs are
/// reproducible from a config file plus a seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// The base function the sampled perturbations are added to; absent
    /// means 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<StepFunction>,
    #[serde(default)]
    pub sequence: SequenceSpec,
    #[serde(default)]
    pub gauge: GaugeSpec,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: CertifyMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            f0: None,
            sequence: SequenceSpec::default(),
            gauge: GaugeSpec::default(),
            samples: default_samples(),
            seed: 0,
            mode: default_mode(),
        }
    }
}

/// Per-sample row of the report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SampleOutcome {
    pub sample_id: u64,
    pub certified_level: Option<u32>,
    pub maximizer_word: Option<String>,
    pub period: Option<u32>,
    pub gap_log2: Option<String>,
    pub tail_log2: Option<String>,
}

/// Per-level aggregate: how often the gap criterion failed at exactly this
/// level, against the proved bound, and how many samples were certified by
/// this level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelAggregate {
    pub level: u32,
    pub failures: u64,
    pub failure_rate: Option<String>,
    pub theoretical_bound_log2: Option<String>,
    pub certified_by: u64,
    pub certified_by_rate: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub certified_total: u64,
    pub period_histogram: BTreeMap<u32, u64>,
    pub levels: Vec<LevelAggregate>,
    pub outcomes: Vec<SampleOutcome>,
}

fn merged_coefficients(
    f0: Option<&HaarCoefficients>,
    g: &HaarCoefficients,
) -> Result<HaarCoefficients> {
    let Some(f) = f0 else {
        return Ok(g.clone());
    };
    let depth = f.level().max(g.level());
    let fp = f.padded_to_level(depth)?;
    let gp = g.padded_to_level(depth)?;
    let mean = fp.mean() + gp.mean();
    let levels = (0..depth)
        .map(|k| {
            let fr = fp.coeffs_at_level(k).expect("padded");
            let gr = gp.coeffs_at_level(k).expect("padded");
            fr.iter().zip(gr).map(|(x, y)| x + y).collect()
        })
        .collect();
    HaarCoefficients::new(mean, levels)
}

/// Runs the full prevalence experiment: validates the specs, draws N
/// independent brick samples, finds each one's smallest certifying level,
/// and aggregates failure rates against the proved per-level bounds
/// (erroring if the empirical rate beats the bound by more than four
/// binomial standard deviations).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.sequence.validate()?;
    let depth = config.gauge.depth();
    if depth == 0 {
        return Err(Error::invalid("experiments need sampling depth >= 1"));
    }
    let eva = check_evanescent(&config.sequence, config.gauge.c_eva_log2(), depth as usize)?;
    if !eva.ok {
        return Err(Error::validation(
            "sequence-evanescent",
            eva.detail
                .unwrap_or_else(|| "sequence is not evanescent".into()),
        ));
    }
    let adm = check_admissible(&config.gauge, &config.sequence, depth as usize)?;
    if !adm.ok() {
        return Err(Error::validation("gauge-admissible", adm.describe()));
    }
    let (f0_coeffs, lip0) = match &config.f0 {
        None => (None, Rat::zero()),
        Some(f) => {
            let lip = lipschitz_constant(f, &config.sequence)?;
            let lip_rat = lip.to_rat().ok_or_else(|| {
                Error::cap("the base function's Lipschitz constant is too extreme to expand")
            })?;
            (Some(forward_transform(f)), lip_rat)
        }
    };
    let ctx = CertifyContext::new(depth)?;
    let scans: Vec<LevelScan> = (0..config.samples)
        .into_par_iter()
        .map(|i| {
            let seed_i = mix64(config.seed ^ mix64(i + 1));
            let sample = sample_brick(&config.gauge, &config.sequence, seed_i)?;
            let coeffs = merged_coefficients(f0_coeffs.as_ref(), &sample.coeffs)?;
            scan_levels(
                &ctx,
                &coeffs,
                &config.sequence,
                &config.gauge,
                &lip0,
                config.mode,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let n_samples = config.samples;
    let mut failures = vec![0u64; depth as usize];
    let mut certified_by = vec![0u64; depth as usize];
    let mut period_histogram: BTreeMap<u32, u64> = BTreeMap::new();
    let mut certified_total = 0u64;
    let mut outcomes = Vec::with_capacity(scans.len());
    for (i, scan) in scans.iter().enumerate() {
        for (j, cert) in scan.levels.iter().enumerate() {
            if !cert.certified {
                failures[j] += 1;
            }
        }
        match scan.smallest_certificate() {
            Some(cert) => {
                certified_total += 1;
                for slot in &mut certified_by[(cert.level - 1) as usize..] {
                    *slot += 1;
                }
                *period_histogram
                    .entry(cert.maximizer.period())
                    .or_insert(0) += 1;
                outcomes.push(SampleOutcome {
                    sample_id: i as u64,
                    certified_level: Some(cert.level),
                    maximizer_word: Some(cert.maximizer.to_string()),
                    period: Some(cert.maximizer.period()),
                    gap_log2: Magnitude::from_rat(&cert.gap)
                        .log2_report()
                        .map(|r| format_rat(&r)),
                    tail_log2: cert.tail_log2().map(|r| format_rat(&r)),
                });
            }
            None => outcomes.push(SampleOutcome {
                sample_id: i as u64,
                certified_level: None,
                maximizer_word: None,
                period: None,
                gap_log2: None,
                tail_log2: None,
            }),
        }
    }

    let mut levels_agg = Vec::with_capacity(depth as usize);
    for n in 1..=depth {
        let bound =
            crate::certify::failure_probability_bound(n, &config.sequence, &config.gauge, &lip0)?;
        if n_samples > 0 && bound < Magnitude::one() {
            let p_hat = rat(failures[(n - 1) as usize] as i64, n_samples as i64);
            let bound_rat = bound.to_rat().unwrap_or_else(Rat::zero);
            if p_hat > bound_rat {
                let excess = &p_hat - &bound_rat;
                let lhs = &excess * &excess * rat(n_samples as i64, 1);
                let rhs = rat(16, 1) * &p_hat * (Rat::one() - &p_hat);
                if lhs > rhs {
                    return Err(Error::validation(
                        "prevalence-bound",
                        format!(
                            "level {n}: empirical failure rate {} exceeds the proved bound 2^{} \
                             beyond four binomial standard deviations",
                            format_rat(&p_hat),
                            bound
                                .log2_report()
                                .map_or("-inf".into(), |r| format_rat(&r)),
                        ),
                    ));
                }
            }
        }
        levels_agg.push(LevelAggregate {
            level: n,
            failures: failures[(n - 1) as usize],
            failure_rate: (n_samples > 0)
                .then(|| format_rat(&rat(failures[(n - 1) as usize] as i64, n_samples as i64))),
            theoretical_bound_log2: bound.log2_report().map(|r| format_rat(&r)),
            certified_by: certified_by[(n - 1) as usize],
            certified_by_rate: (n_samples > 0)
                .then(|| format_rat(&rat(certified_by[(n - 1) as usize] as i64, n_samples as i64))),
        });
    }

    Ok(ExperimentReport {
        config: config.clone(),
        certified_total,
        period_histogram,
        levels: levels_agg,
        outcomes,
    })
}

/// The per-sample table as CSV, one row per sample; uncertified samples
/// leave every column after sample_id empty.
pub fn report_to_csv(report: &ExperimentReport) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "sample_id",
        "certified_level",
        "maximizer_word",
        "period",
        "gap_log2",
        "tail_log2",
    ])
    .map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
    for o in &report.outcomes {
        wtr.write_record([
            o.sample_id.to_string(),
            o.certified_level.map(|v| v.to_string()).unwrap_or_default(),
            o.maximizer_word.clone().unwrap_or_default(),
            o.period.map(|v| v.to_string()).unwrap_or_default(),
            o.gap_log2.clone().unwrap_or_default(),
            o.tail_log2.clone().unwrap_or_default(),
        ])
        .map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv flush failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(format!("csv not utf-8: {e}")))
}

mod word_rat_map {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<Word, Rat>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let plain: BTreeMap<String, String> = map
            .iter()
            .map(|(w, r)| (w.to_string(), format_rat(r)))
            .collect();
        plain.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<Word, Rat>, D::Error> {
        let plain = BTreeMap::<String, String>::deserialize(d)?;
        plain
            .into_iter()
            .map(|(k, v)| {
                let w: Word = k.parse().map_err(D::Error::custom)?;
                let r = parse_rat(&v).map_err(D::Error::custom)?;
                Ok((w, r))
            })
            .collect()
    }
}
