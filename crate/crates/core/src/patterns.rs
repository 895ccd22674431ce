//! Census of value patterns `(g(n), …, g(n+K−1))` of finite-alphabet
//! functions.

use std::collections::{HashMap, HashSet};
use std::io;

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::averaging::CompensatedSum;
use crate::functions::{Alphabet, MultiplicativeFunctionSpec};
use crate::sweep::{sweep_one, BlockConsumer, BlockView, Halo, SweepConfig, SweepError};

/// Dense presence bitmaps are used up to this many possible patterns.
pub const BITMAP_LIMIT: u128 = 1 << 26;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("function '{0}' has no finite alphabet")]
    Unsupported(String),
    #[error("pattern length {k} outside 1..={max} for this alphabet")]
    Length { k: usize, max: usize },
    #[error("range N = {n} is shorter than the pattern length {k}")]
    RangeTooShort { n: u64, k: usize },
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Longest supported pattern for an alphabet: 64 for signs, otherwise 32
/// and small enough that codes fit in 128 bits.
pub fn max_length(alphabet: u64) -> usize {
    if alphabet <= 2 {
        return 64;
    }
    let bits = 128.0 / (alphabet as f64).log2();
    (bits.floor() as usize).min(32)
}

/// Symbol alphabet and pattern codec for one function.
#[derive(Clone, Debug)]
struct Codec {
    spec: MultiplicativeFunctionSpec,
    alphabet: Alphabet,
    base: u128,
    k: usize,
    /// `base^(k−1)`.
    lead: u128,
}

impl Codec {
    fn new(spec: &MultiplicativeFunctionSpec, k: usize) -> Result<Self, PatternError> {
        let alphabet = spec
            .alphabet()
            .ok_or_else(|| PatternError::Unsupported(spec.label().to_string()))?;
        let base = alphabet.size() as u128;
        let max = max_length(alphabet.size());
        if k == 0 || k > max {
            return Err(PatternError::Length { k, max });
        }
        Ok(Self {
            spec: spec.clone(),
            alphabet,
            base,
            k,
            lead: base.pow(k as u32 - 1),
        })
    }

    fn possible(&self) -> Option<u128> {
        self.base.checked_pow(self.k as u32)
    }

    fn sym(&self, view: &BlockView<'_>, n: u64) -> u128 {
        self.spec
            .symbol(view.block(), n)
            .expect("alphabet checked at construction") as u128
    }

    /// Calls `visit(n, code)` for every window start `n` in the view's
    /// core, up to `last`.
    fn windows(&self, view: &BlockView<'_>, last: u64, mut visit: impl FnMut(u64, u128)) {
        let hi = view.hi().min(last + 1);
        if view.lo() >= hi {
            return;
        }
        let k = self.k as u64;
        let mut code = (0..k).fold(0u128, |c, j| c * self.base + self.sym(view, view.lo() + j));
        visit(view.lo(), code);
        for n in view.lo() + 1..hi {
            code = (code - self.sym(view, n - 1) * self.lead) * self.base + self.sym(view, n + k - 1);
            visit(n, code);
        }
    }

    fn decode(&self, mut code: u128) -> Vec<u64> {
        let mut out = vec![0; self.k];
        for slot in out.iter_mut().rev() {
            *slot = (code % self.base) as u64;
            code /= self.base;
        }
        out
    }

    fn render(&self, code: u128) -> String {
        let syms = self.decode(code);
        match self.alphabet {
            Alphabet::Sign => syms.iter().map(|&s| if s == 0 { '+' } else { '-' }).collect(),
            Alphabet::Moebius => syms.iter().map(|&s| ['0', '+', '-'][s as usize]).collect(),
            _ if self.base <= 10 => syms.iter().map(|s| s.to_string()).collect(),
            _ => syms.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("."),
        }
    }
}

/// One observed pattern.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PatternFrequency {
    /// `+`/`-` for λ, `0`/`+`/`-` for μ, otherwise the symbol digits
    /// (`Ω mod q` for λ_q; `0` or `1 + k` for a character value `e(k/φ(q))`).
    pub pattern: String,
    pub count: u64,
    pub density_unweighted: f64,
    /// Weight `1/n` at the window's left end.
    pub density_log: f64,
}

/// Distinct patterns and their frequencies over window starts `1..=N−K+1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PatternCensus {
    pub function: String,
    pub k: usize,
    pub n: u64,
    pub alphabet: u64,
    pub distinct: usize,
    /// Sorted by pattern code.
    pub frequencies: Vec<PatternFrequency>,
}

impl PatternCensus {
    pub fn windows(&self) -> u64 {
        self.n + 1 - self.k as u64
    }

    pub fn get(&self, pattern: &str) -> Option<&PatternFrequency> {
        self.frequencies.iter().find(|f| f.pattern == pattern)
    }

    /// CSV `pattern, count, density_unweighted, density_log`.
    pub fn write_csv(&self, w: impl io::Write) -> Result<(), PatternError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["pattern", "count", "density_unweighted", "density_log"])?;
        for f in &self.frequencies {
            out.write_record([
                f.pattern.clone(),
                f.count.to_string(),
                f.density_unweighted.to_string(),
                f.density_log.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

type Tally = HashMap<u128, (u64, CompensatedSum)>;

/// [`census`] as a sweep consumer.
pub struct CensusPlan {
    codec: Codec,
    n: u64,
    tally: Tally,
}

impl CensusPlan {
    pub fn new(k: usize, n: u64, spec: &MultiplicativeFunctionSpec) -> Result<Self, PatternError> {
        let codec = Codec::new(spec, k)?;
        if n < k as u64 {
            return Err(PatternError::RangeTooShort { n, k });
        }
        Ok(Self {
            codec,
            n,
            tally: HashMap::new(),
        })
    }

    pub fn finish(self) -> PatternCensus {
        let windows = (self.n + 1 - self.codec.k as u64) as f64;
        let mut total_log = CompensatedSum::default();
        let mut entries: Vec<(u128, u64, f64)> = self
            .tally
            .into_iter()
            .map(|(code, (c, w))| (code, c, w.value()))
            .collect();
        entries.sort_unstable_by_key(|e| e.0);
        for e in &entries {
            total_log.add(e.2);
        }
        let total_log = total_log.value();
        PatternCensus {
            function: self.codec.spec.label().to_string(),
            k: self.codec.k,
            n: self.n,
            alphabet: self.codec.base as u64,
            distinct: entries.len(),
            frequencies: entries
                .iter()
                .map(|&(code, count, w)| PatternFrequency {
                    pattern: self.codec.render(code),
                    count,
                    density_unweighted: count as f64 / windows,
                    density_log: w / total_log,
                })
                .collect(),
        }
    }

    fn last_start(&self) -> u64 {
        self.n + 1 - self.codec.k as u64
    }
}

impl BlockConsumer for CensusPlan {
    type Partial = HashMap<u128, (u64, f64)>;

    fn limit(&self) -> u64 {
        self.last_start()
    }

    fn halo(&self) -> Halo {
        Halo {
            back: 0,
            forward: self.codec.k as u64 - 1,
        }
    }

    fn process(&self, view: &BlockView<'_>) -> Result<Self::Partial, SweepError> {
        let mut local: HashMap<u128, (u64, f64)> = HashMap::new();
        self.codec.windows(view, self.last_start(), |n, code| {
            let e = local.entry(code).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += 1.0 / n as f64;
        });
        Ok(local)
    }

    fn absorb(&mut self, partial: Self::Partial) {
        // Sorted so that the compensated sums see a fixed order.
        let mut items: Vec<_> = partial.into_iter().collect();
        items.sort_unstable_by_key(|e| e.0);
        for (code, (c, w)) in items {
            let e = self.tally.entry(code).or_default();
            e.0 += c;
            e.1.add(w);
        }
    }
}

/// Exact pattern census of `spec` over window starts `1..=N−K+1`.
pub fn census(
    k: usize,
    n: u64,
    spec: &MultiplicativeFunctionSpec,
    config: SweepConfig,
) -> Result<PatternCensus, PatternError> {
    let mut plan = CensusPlan::new(k, n, spec)?;
    sweep_one(&mut plan, config)?;
    Ok(plan.finish())
}

enum Presence {
    Bitmap(BitVec<u64, Lsb0>),
    Set(HashSet<u128>),
}

/// Counts distinct patterns only; cheaper than [`CensusPlan`] for long
/// patterns.
pub struct DistinctPlan {
    codec: Codec,
    n: u64,
    seen: Presence,
}

impl DistinctPlan {
    pub fn new(k: usize, n: u64, spec: &MultiplicativeFunctionSpec) -> Result<Self, PatternError> {
        let codec = Codec::new(spec, k)?;
        if n < k as u64 {
            return Err(PatternError::RangeTooShort { n, k });
        }
        let seen = match codec.possible() {
            Some(m) if m <= BITMAP_LIMIT => Presence::Bitmap(bitvec![u64, Lsb0; 0; m as usize]),
            _ => Presence::Set(HashSet::new()),
        };
        Ok(Self { codec, n, seen })
    }

    pub fn distinct(&self) -> u64 {
        match &self.seen {
            Presence::Bitmap(b) => b.count_ones() as u64,
            Presence::Set(s) => s.len() as u64,
        }
    }
}

impl BlockConsumer for DistinctPlan {
    type Partial = Vec<u128>;

    fn limit(&self) -> u64 {
        self.n + 1 - self.codec.k as u64
    }

    fn halo(&self) -> Halo {
        Halo {
            back: 0,
            forward: self.codec.k as u64 - 1,
        }
    }

    fn process(&self, view: &BlockView<'_>) -> Result<Vec<u128>, SweepError> {
        let mut codes = Vec::new();
        self.codec.windows(view, BlockConsumer::limit(self), |_, c| codes.push(c));
        codes.sort_unstable();
        codes.dedup();
        Ok(codes)
    }

    fn absorb(&mut self, partial: Vec<u128>) {
        match &mut self.seen {
            Presence::Bitmap(b) => partial.into_iter().for_each(|c| b.set(c as usize, true)),
            Presence::Set(s) => s.extend(partial),
        }
    }
}

/// One row of the growth table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthRow {
    pub k: usize,
    pub s: u64,
    /// `alphabet^K`, when it fits in a `u64`.
    pub full: Option<u64>,
    pub k_plus_5: u64,
    pub k_squared: u64,
    /// `exp(εK/ln K)` for `ε = 1/2` and `ε = 1`; undefined at `K = 1`.
    pub threshold_half: Option<f64>,
    pub threshold_one: Option<f64>,
    /// `s(K) < K + 5` for `K ≥ 3`, which would contradict the known lower
    /// bound and so points at a bug.
    pub below_known_bound: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthReport {
    pub function: String,
    pub n: u64,
    pub rows: Vec<GrowthRow>,
}

impl GrowthReport {
    pub fn write_json(&self, w: impl io::Write) -> Result<(), PatternError> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn flagged(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| r.below_known_bound).map(|r| r.k).collect()
    }
}

/// [`growth_report`] as a sweep consumer: one [`DistinctPlan`] per length.
pub struct GrowthPlan {
    function: String,
    n: u64,
    plans: Vec<DistinctPlan>,
}

impl GrowthPlan {
    pub fn new(ks: &[usize], n: u64, spec: &MultiplicativeFunctionSpec) -> Result<Self, PatternError> {
        Ok(Self {
            function: spec.label().to_string(),
            n,
            plans: ks
                .iter()
                .map(|&k| DistinctPlan::new(k, n, spec))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn finish(self) -> GrowthReport {
        let rows = self
            .plans
            .iter()
            .map(|p| {
                let k = p.codec.k;
                let s = p.distinct();
                let threshold = |eps: f64| (k > 1).then(|| (eps * k as f64 / (k as f64).ln()).exp());
                GrowthRow {
                    k,
                    s,
                    full: p.codec.possible().and_then(|m| u64::try_from(m).ok()),
                    k_plus_5: k as u64 + 5,
                    k_squared: (k * k) as u64,
                    threshold_half: threshold(0.5),
                    threshold_one: threshold(1.0),
                    below_known_bound: k >= 3 && s < k as u64 + 5,
                }
            })
            .collect();
        GrowthReport {
            function: self.function,
            n: self.n,
            rows,
        }
    }
}

impl BlockConsumer for GrowthPlan {
    type Partial = Vec<Vec<u128>>;

    fn limit(&self) -> u64 {
        self.plans.iter().map(BlockConsumer::limit).max().unwrap_or(0)
    }

    fn halo(&self) -> Halo {
        self.plans.iter().map(BlockConsumer::halo).fold(Halo::default(), Halo::max)
    }

    fn process(&self, view: &BlockView<'_>) -> Result<Self::Partial, SweepError> {
        self.plans.iter().map(|p| p.process(view)).collect()
    }

    fn absorb(&mut self, partial: Self::Partial) {
        for (p, codes) in self.plans.iter_mut().zip(partial) {
            p.absorb(codes);
        }
    }
}

/// Distinct-pattern counts `s(K)` for every `K` in `ks`, in one sweep.
pub fn growth_report(
    ks: &[usize],
    n: u64,
    spec: &MultiplicativeFunctionSpec,
    config: SweepConfig,
) -> Result<GrowthReport, PatternError> {
    let mut plan = GrowthPlan::new(ks, n, spec)?;
    sweep_one(&mut plan, config)?;
    Ok(plan.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::{sieve_block, PrimeTable};

    fn cfg() -> SweepConfig {
        SweepConfig {
            segment: 1 << 10,
            threads: 2,
        }
    }

    #[test]
    fn length_one_liouville() {
        let c = census(1, 10, &MultiplicativeFunctionSpec::liouville(), cfg()).unwrap();
        assert_eq!(c.distinct, 2);
        // λ(1..10) has five of each sign.
        assert_eq!(c.get("+").unwrap().count, 5);
        assert_eq!(c.get("-").unwrap().count, 5);
    }

    #[test]
    fn census_matches_direct_reads() {
        let n = 5000;
        let block = sieve_block(1, n + 1, &PrimeTable::new(100)).unwrap();
        for (spec, k) in [
            (MultiplicativeFunctionSpec::liouville(), 5),
            (MultiplicativeFunctionSpec::moebius(), 3),
            (MultiplicativeFunctionSpec::lambda_q(3).unwrap(), 2),
            (MultiplicativeFunctionSpec::character_by_index(5, 1).unwrap(), 2),
        ] {
            let c = census(k, n, &spec, cfg()).unwrap();
            let codec = Codec::new(&spec, k).unwrap();
            let mut direct: HashMap<String, (u64, f64)> = HashMap::new();
            for start in 1..=n + 1 - k as u64 {
                let syms: Vec<u64> = (0..k as u64).map(|j| spec.symbol(&block, start + j).unwrap()).collect();
                let code = syms.iter().fold(0u128, |c, &s| c * codec.base + s as u128);
                let e = direct.entry(codec.render(code)).or_default();
                e.0 += 1;
                e.1 += 1.0 / start as f64;
            }
            assert_eq!(c.distinct, direct.len(), "{}", spec.label());
            let total: f64 = direct.values().map(|e| e.1).sum();
            for f in &c.frequencies {
                let d = direct[&f.pattern];
                assert_eq!(f.count, d.0);
                assert!((f.density_log - d.1 / total).abs() < 1e-12);
            }
            let s_u: f64 = c.frequencies.iter().map(|f| f.density_unweighted).sum();
            let s_l: f64 = c.frequencies.iter().map(|f| f.density_log).sum();
            assert!((s_u - 1.0).abs() < 1e-12 && (s_l - 1.0).abs() < 1e-12);
            assert_eq!(c.frequencies.iter().map(|f| f.count).sum::<u64>(), c.windows());
        }
    }

    #[test]
    fn rejects_infinite_alphabets_and_bad_lengths() {
        let arch = MultiplicativeFunctionSpec::archimedean(1.0);
        assert!(matches!(census(2, 100, &arch, cfg()), Err(PatternError::Unsupported(_))));
        let l = MultiplicativeFunctionSpec::liouville();
        assert!(census(0, 100, &l, cfg()).is_err());
        assert!(census(65, 100, &l, cfg()).is_err());
        assert!(census(5, 4, &l, cfg()).is_err());
        assert!(census(33, 100, &MultiplicativeFunctionSpec::lambda_q(3).unwrap(), cfg()).is_err());
        assert_eq!(max_length(2), 64);
        assert_eq!(max_length(3), 32);
        assert_eq!(max_length(1000), 12);
    }

    #[test]
    fn growth_small() {
        let r = growth_report(&[1, 2, 3, 4, 40], 100_000, &MultiplicativeFunctionSpec::liouville(), cfg()).unwrap();
        let s: Vec<u64> = r.rows.iter().map(|row| row.s).collect();
        assert_eq!(&s[..4], &[2, 4, 8, 16]);
        assert!(r.rows[0].threshold_half.is_none());
        assert!(r.flagged().is_empty());
        assert!(s[4] <= 100_000 - 39);
        // Matches the full census.
        let c = census(40, 100_000, &MultiplicativeFunctionSpec::liouville(), cfg()).unwrap();
        assert_eq!(c.distinct as u64, s[4]);
    }

    #[test]
    fn segment_independence() {
        let g = MultiplicativeFunctionSpec::lambda_q(3).unwrap();
        let a = census(4, 20_000, &g, cfg()).unwrap();
        let b = census(4, 20_000, &g, SweepConfig { segment: 1 << 16, threads: 1 }).unwrap();
        for (x, y) in a.frequencies.iter().zip(&b.frequencies) {
            assert_eq!(x.pattern, y.pattern);
            assert_eq!(x.count, y.count);
            assert!((x.density_log - y.density_log).abs() < 1e-14);
        }
    }
}
