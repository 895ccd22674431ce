//! Experiment configuration files.
//!
//! ```toml
//! [global]
//! max_n = 1e7
//! output_dir = "out"
//! seed = 7
//!
//! [[experiment]]
//! name = "two_point"
//! kind = "correlate"
//! functions = ["liouville", "liouville"]
//! shifts = [0, 1]
//! grid = { x0 = 1e3, max = 1e7, ratio = 1.5 }
//! ```
//!
//! Every problem found is reported with its line and column; parsing never
//! stops at the first one.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;
use toml::{Spanned, Value};

use crate::averaging::{ScaleGrid, WeightScheme, DEFAULT_RATIO};
use crate::correlation::{CorrelationQuery, EquidistMode, Mollifier, RadialProfile};
use crate::functions::{parse_spec, DirichletCharacter, FunctionKind, MultiplicativeFunctionSpec};
use crate::patterns::max_length;
use crate::pretense::FitSearch;
use crate::smoothness::{DickmanSolver, Exponent};
use crate::sieve::DEFAULT_SEGMENT;

/// Largest `max_n` accepted.
pub const MAX_RANGE: u64 = 1 << 63;

/// One problem in a config file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based; 0 when no position is known.
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}:{}: {}", self.line, self.column, self.message)
        }
    }
}

#[derive(Clone, Debug)]
pub struct GlobalConfig {
    pub max_n: u64,
    pub segment_size: u64,
    /// 0 means the pool default; `CHOWLA_THREADS` overrides at run time.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            max_n: 10_000_000,
            segment_size: DEFAULT_SEGMENT,
            threads: 0,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub enum StraightenTask {
    /// Planted characters of random modulus `≤ q_max` (or exactly `q`),
    /// perturbed by `epsilon`.
    Dirichlet {
        trials: usize,
        q_max: u64,
        q: Option<u64>,
        epsilon: f64,
    },
    /// Planted `x^{−it₀}` with `t₀` uniform in `[−t_range, t_range]` (or fixed).
    Archimedean {
        trials: usize,
        t_range: f64,
        t0: Option<f64>,
        x_max: f64,
        epsilon: f64,
    },
}

#[derive(Clone)]
pub enum Task {
    Correlate(CorrelationQuery),
    FdTable {
        functions: Vec<MultiplicativeFunctionSpec>,
        shifts: Vec<i64>,
        scheme: WeightScheme,
        scale: f64,
        divisors: Vec<f64>,
        dilations: Vec<i64>,
        t_max: f64,
    },
    IsotopyArch {
        query: CorrelationQuery,
        q: f64,
        t: f64,
    },
    IsotopyNonarch {
        query: CorrelationQuery,
        chi: DirichletCharacter,
    },
    Equidist {
        query: CorrelationQuery,
        mollifier: Mollifier,
        mode: EquidistMode,
    },
    Pretense {
        f: MultiplicativeFunctionSpec,
        g: MultiplicativeFunctionSpec,
        grid: ScaleGrid,
    },
    Fit {
        g: MultiplicativeFunctionSpec,
        search: FitSearch,
    },
    Race(ScaleGrid),
    Smooth {
        alpha: Exponent,
        beta: Exponent,
        grid: ScaleGrid,
    },
    /// A single length gives a full census; several give a growth report.
    Patterns {
        ks: Vec<usize>,
        n: u64,
        function: MultiplicativeFunctionSpec,
    },
    Straighten(StraightenTask),
    CompareAvgs {
        function: MultiplicativeFunctionSpec,
        a: u64,
        scales: Vec<f64>,
    },
    ThreePoint {
        function: MultiplicativeFunctionSpec,
        shifts: [i64; 3],
        windows: Vec<(f64, f64)>,
    },
}

pub const KINDS: [&str; 13] = [
    "correlate",
    "fd_table",
    "isotopy_arch",
    "isotopy_nonarch",
    "equidist",
    "pretense",
    "fit",
    "race",
    "smooth",
    "patterns",
    "straighten",
    "compare_avgs",
    "three_point",
];

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Correlate(_) => "correlate",
            Task::FdTable { .. } => "fd_table",
            Task::IsotopyArch { .. } => "isotopy_arch",
            Task::IsotopyNonarch { .. } => "isotopy_nonarch",
            Task::Equidist { .. } => "equidist",
            Task::Pretense { .. } => "pretense",
            Task::Fit { .. } => "fit",
            Task::Race(_) => "race",
            Task::Smooth { .. } => "smooth",
            Task::Patterns { .. } => "patterns",
            Task::Straighten(_) => "straighten",
            Task::CompareAvgs { .. } => "compare_avgs",
            Task::ThreePoint { .. } => "three_point",
        }
    }
}

impl fmt::Debug for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Task({})", self.kind())
    }
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub name: String,
    pub task: Task,
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub global: GlobalConfig,
    pub experiments: Vec<Experiment>,
}

type Fields = BTreeMap<String, Spanned<Value>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    global: Option<Spanned<Fields>>,
    #[serde(default)]
    experiment: Vec<Spanned<Fields>>,
}

/// Byte offset to line/column.
struct LineIndex<'a> {
    text: &'a str,
    starts: Vec<usize>,
}

impl<'a> LineIndex<'a> {
    fn new(text: &'a str) -> Self {
        let mut starts = vec![0];
        starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        Self { text, starts }
    }

    fn position(&self, offset: usize) -> (usize, usize) {
        let line = self.starts.partition_point(|&s| s <= offset).max(1);
        let start = self.starts[line - 1];
        let col = self.text[start..offset.min(self.text.len())].chars().count() + 1;
        (line, col)
    }
}

struct Checker<'a> {
    index: LineIndex<'a>,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn at(&mut self, offset: usize, message: impl Into<String>) {
        let (line, column) = self.index.position(offset);
        self.diags.push(Diagnostic {
            line,
            column,
            message: message.into(),
        });
    }
}

/// The keys of one table, read with position-aware diagnostics.
struct Table<'c, 'a> {
    fields: Fields,
    /// Offset of the table itself, for missing keys.
    offset: usize,
    context: String,
    ck: &'c mut Checker<'a>,
}

impl<'c, 'a> Table<'c, 'a> {
    fn report(&mut self, offset: usize, message: impl fmt::Display) {
        let m = format!("{}: {message}", self.context);
        self.ck.at(offset, m);
    }

    fn take(&mut self, key: &str) -> Option<(Value, usize)> {
        self.fields.remove(key).map(|v| {
            let off = v.span().start;
            (v.into_inner(), off)
        })
    }

    fn missing(&mut self, key: &str) {
        let off = self.offset;
        self.report(off, format!("missing required key '{key}'"));
    }

    fn required<T>(&mut self, key: &str, read: impl FnOnce(&mut Self, Value, usize) -> Option<T>) -> Option<T> {
        match self.take(key) {
            Some((v, off)) => read(self, v, off),
            None => {
                self.missing(key);
                None
            }
        }
    }

    fn optional<T>(
        &mut self,
        key: &str,
        default: T,
        read: impl FnOnce(&mut Self, Value, usize) -> Option<T>,
    ) -> Option<T> {
        match self.take(key) {
            Some((v, off)) => read(self, v, off),
            None => Some(default),
        }
    }

    /// Flags keys that nobody read.
    fn finish(mut self) {
        let left: Vec<(String, usize)> = std::mem::take(&mut self.fields)
            .into_iter()
            .map(|(k, v)| (k, v.span().start))
            .collect();
        for (k, off) in left {
            self.report(off, format!("unknown key '{k}'"));
        }
    }

    fn number(&mut self, v: Value, off: usize, key: &str) -> Option<f64> {
        let x = match &v {
            Value::Integer(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::String(s) => s.trim().parse::<f64>().ok(),
            _ => None,
        };
        match x {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.report(off, format!("'{key}' must be a number, got {v}"));
                None
            }
        }
    }

    fn positive(&mut self, v: Value, off: usize, key: &str) -> Option<f64> {
        let x = self.number(v, off, key)?;
        if x > 0.0 {
            Some(x)
        } else {
            self.report(off, format!("'{key}' must be positive, got {x}"));
            None
        }
    }

    /// Integers may be written as floats (`1e8`) when exact.
    fn uint(&mut self, v: Value, off: usize, key: &str) -> Option<u64> {
        let x = self.number(v, off, key)?;
        if x >= 0.0 && x.fract() == 0.0 && x < MAX_RANGE as f64 * 2.0 {
            Some(x as u64)
        } else {
            self.report(off, format!("'{key}' must be a non-negative integer, got {x}"));
            None
        }
    }

    fn int(&mut self, v: Value, off: usize, key: &str) -> Option<i64> {
        if let Value::Integer(i) = v {
            return Some(i);
        }
        let x = self.number(v, off, key)?;
        if x.fract() == 0.0 && x.abs() < 9.2e18 {
            Some(x as i64)
        } else {
            self.report(off, format!("'{key}' must be an integer, got {x}"));
            None
        }
    }

    fn string(&mut self, v: Value, off: usize, key: &str) -> Option<String> {
        match v {
            Value::String(s) => Some(s),
            other => {
                self.report(off, format!("'{key}' must be a string, got {other}"));
                None
            }
        }
    }

    fn array(&mut self, v: Value, off: usize, key: &str) -> Option<Vec<Value>> {
        match v {
            Value::Array(a) => Some(a),
            other => {
                self.report(off, format!("'{key}' must be an array, got {other}"));
                None
            }
        }
    }

    fn spec_text(&mut self, text: &str, off: usize, key: &str) -> Option<MultiplicativeFunctionSpec> {
        match parse_spec(text) {
            Ok(s) => Some(s),
            Err(e) => {
                // Point inside the string: skip the opening quote.
                self.report(off + e.column, format!("'{key}': {}", e.message));
                None
            }
        }
    }

    fn spec(&mut self, v: Value, off: usize, key: &str) -> Option<MultiplicativeFunctionSpec> {
        let text = self.string(v, off, key)?;
        self.spec_text(&text, off, key)
    }

    fn specs(&mut self, v: Value, off: usize, key: &str) -> Option<Vec<MultiplicativeFunctionSpec>> {
        let items = self.array(v, off, key)?;
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for item in items {
            match self.spec(item, off, key) {
                Some(s) => out.push(s),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn ints(&mut self, v: Value, off: usize, key: &str) -> Option<Vec<i64>> {
        let items = self.array(v, off, key)?;
        items.into_iter().map(|x| self.int(x, off, key)).collect()
    }

    fn numbers(&mut self, v: Value, off: usize, key: &str) -> Option<Vec<f64>> {
        let items = self.array(v, off, key)?;
        items.into_iter().map(|x| self.number(x, off, key)).collect()
    }

    fn scheme(&mut self, v: Value, off: usize, key: &str) -> Option<WeightScheme> {
        let s = self.string(v, off, key)?;
        match s.parse() {
            Ok(w) => Some(w),
            Err(_) => {
                let names: Vec<&str> = WeightScheme::ALL.iter().map(|w| w.name()).collect();
                self.report(off, format!("unknown scheme '{s}', expected one of {}", names.join(", ")));
                None
            }
        }
    }

    /// A rational written `"3/2"` or a plain number.
    fn rational(&mut self, v: Value, off: usize, key: &str) -> Option<f64> {
        if let Value::String(s) = &v {
            if let Some((a, b)) = s.split_once('/') {
                if let (Ok(a), Ok(b)) = (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                    if b != 0.0 && (a / b).is_finite() {
                        return Some(a / b);
                    }
                }
                self.report(off, format!("'{key}': cannot parse '{s}' as a rational"));
                return None;
            }
        }
        self.number(v, off, key)
    }

    fn exponent(&mut self, v: Value, off: usize, key: &str) -> Option<Exponent> {
        let text = match v {
            Value::String(s) => s,
            Value::Float(f) => f.to_string(),
            other => {
                self.report(off, format!("'{key}' must be a rational such as \"1/2\", got {other}"));
                return None;
            }
        };
        match text.parse::<Exponent>() {
            Ok(e) => Some(e),
            Err(e) => {
                self.report(off, format!("'{key}': {e}"));
                None
            }
        }
    }

    /// `grid = 1e6` (one scale) or `grid = { x0, ratio, count | max }`.
    fn grid(&mut self, v: Value, off: usize, key: &str) -> Option<ScaleGrid> {
        let grid = match v {
            Value::Table(t) => {
                let get = |t: &toml::Table, k: &str| t.get(k).cloned();
                for k in t.keys() {
                    if !["x0", "ratio", "count", "max"].contains(&k.as_str()) {
                        self.report(off, format!("'{key}': unknown grid key '{k}'"));
                    }
                }
                let x0 = match get(&t, "x0") {
                    Some(x) => self.number(x, off, "x0")?,
                    None => {
                        self.report(off, format!("'{key}' needs 'x0'"));
                        return None;
                    }
                };
                let ratio = match get(&t, "ratio") {
                    Some(r) => self.number(r, off, "ratio")?,
                    None => DEFAULT_RATIO,
                };
                match (get(&t, "count"), get(&t, "max")) {
                    (Some(c), None) => {
                        let c = self.uint(c, off, "count")?;
                        ScaleGrid::new(x0, ratio, c as usize)
                    }
                    (None, Some(m)) => {
                        let m = self.number(m, off, "max")?;
                        if ratio > 1.0 {
                            ScaleGrid::spanning(x0, m, ratio)
                        } else {
                            ScaleGrid::new(x0, ratio, 1)
                        }
                    }
                    _ => {
                        self.report(off, format!("'{key}' needs exactly one of 'count' or 'max'"));
                        return None;
                    }
                }
            }
            other => {
                let x = self.number(other, off, key)?;
                ScaleGrid::single(x)
            }
        };
        match grid {
            Ok(g) => Some(g),
            Err(e) => {
                self.report(off, format!("'{key}': {e}"));
                None
            }
        }
    }

    fn character(&mut self, v: Value, off: usize, key: &str) -> Option<DirichletCharacter> {
        let spec = self.spec(v, off, key)?;
        match spec.kind() {
            FunctionKind::Character(chi) => Some((**chi).clone()),
            _ => {
                self.report(off, format!("'{key}' must be a character such as \"char(q=3,index=1)\""));
                None
            }
        }
    }
}

/// Parse and validate `text`, collecting every problem.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<Diagnostic>> {
    let mut ck = Checker {
        index: LineIndex::new(text),
        diags: Vec::new(),
    };
    let raw: RawConfig = match toml::from_str(text) {
        Ok(r) => r,
        Err(e) => {
            let offset = e.span().map_or(0, |s| s.start);
            ck.at(offset, e.message().trim().to_string());
            return Err(ck.diags);
        }
    };
    let global = match raw.global {
        Some(g) => read_global(g, &mut ck),
        None => GlobalConfig::default(),
    };
    let mut names = HashSet::new();
    let mut experiments = Vec::new();
    for (i, e) in raw.experiment.into_iter().enumerate() {
        if let Some(exp) = read_experiment(i, e, &global, &mut names, &mut ck) {
            experiments.push(exp);
        }
    }
    if ck.diags.is_empty() {
        Ok(ExperimentConfig { global, experiments })
    } else {
        Err(ck.diags)
    }
}

/// All diagnostics for `text`; empty when it is valid.
pub fn validate(text: &str) -> Vec<Diagnostic> {
    parse_config(text).err().unwrap_or_default()
}

fn read_global(g: Spanned<Fields>, ck: &mut Checker<'_>) -> GlobalConfig {
    let offset = g.span().start;
    let mut t = Table {
        fields: g.into_inner(),
        offset,
        context: "[global]".into(),
        ck,
    };
    let d = GlobalConfig::default();
    let max_n = t.optional("max_n", d.max_n, |t, v, o| {
        let n = t.uint(v, o, "max_n")?;
        if n == 0 || n >= MAX_RANGE {
            t.report(o, format!("'max_n' must be in [1, 2^63), got {n}"));
            return None;
        }
        Some(n)
    });
    let segment_size = t.optional("segment_size", d.segment_size, |t, v, o| {
        let s = t.uint(v, o, "segment_size")?;
        if s < 1024 {
            t.report(o, format!("'segment_size' must be at least 1024, got {s}"));
            return None;
        }
        Some(s)
    });
    let threads = t.optional("threads", d.threads as u64, |t, v, o| t.uint(v, o, "threads"));
    let output_dir = t.optional("output_dir", d.output_dir.display().to_string(), |t, v, o| {
        t.string(v, o, "output_dir")
    });
    let seed = t.optional("seed", d.seed, |t, v, o| t.uint(v, o, "seed"));
    t.finish();
    GlobalConfig {
        max_n: max_n.unwrap_or(d.max_n),
        segment_size: segment_size.unwrap_or(d.segment_size),
        threads: threads.unwrap_or(0) as usize,
        output_dir: output_dir.map_or(d.output_dir, PathBuf::from),
        seed: seed.unwrap_or(d.seed),
    }
}

fn read_experiment(
    i: usize,
    raw: Spanned<Fields>,
    global: &GlobalConfig,
    names: &mut HashSet<String>,
    ck: &mut Checker<'_>,
) -> Option<Experiment> {
    let offset = raw.span().start;
    let mut t = Table {
        fields: raw.into_inner(),
        offset,
        context: format!("experiment #{}", i + 1),
        ck,
    };
    let name = t.required("name", |t, v, o| {
        let n = t.string(v, o, "name")?;
        if n.is_empty() || n.contains(['/', '\\']) || n.starts_with('.') {
            t.report(o, format!("name '{n}' is not usable as a file name"));
            return None;
        }
        if !names.insert(n.clone()) {
            t.report(o, format!("duplicate experiment name '{n}'"));
            return None;
        }
        Some(n)
    });
    if let Some(n) = &name {
        t.context = format!("experiment '{n}'");
    }
    let kind = t.required("kind", |t, v, o| {
        let k = t.string(v, o, "kind")?;
        if KINDS.contains(&k.as_str()) {
            Some((k, o))
        } else {
            t.report(o, format!("unknown kind '{k}', expected one of {}", KINDS.join(", ")));
            None
        }
    });
    let task = match kind {
        Some((k, koff)) => read_task(&k, koff, &mut t, global),
        None => {
            // Still flag nothing else: the keys depend on the kind.
            t.fields.clear();
            None
        }
    };
    t.finish();
    Some(Experiment {
        name: name?,
        task: task?,
    })
}

/// Shared keys of the correlation kinds.
fn read_query(t: &mut Table<'_, '_>, global: &GlobalConfig, grid_required: bool) -> Option<CorrelationQuery> {
    let functions = t.required("functions", |t, v, o| t.specs(v, o, "functions"));
    let shifts_off = t.fields.get("shifts").map(|s| s.span().start);
    let shifts = t.required("shifts", |t, v, o| t.ints(v, o, "shifts"));
    let scheme = t.optional("scheme", WeightScheme::Unweighted, |t, v, o| t.scheme(v, o, "scheme"));
    let dilation = t.optional("dilation", 1, |t, v, o| t.int(v, o, "dilation"));
    let divisor = t.optional("divisor", 1.0, |t, v, o| t.positive(v, o, "divisor"));
    let grid_off = t.fields.get("grid").map_or(t.offset, |s| s.span().start);
    let grid = if grid_required {
        t.required("grid", |t, v, o| t.grid(v, o, "grid"))
    } else {
        t.optional("grid", ScaleGrid::single(1.0).expect("valid"), |t, v, o| t.grid(v, o, "grid"))
    };
    let (functions, shifts, scheme, dilation, divisor, grid) =
        (functions?, shifts?, scheme?, dilation?, divisor?, grid?);
    let query = CorrelationQuery::new(functions, shifts, grid)
        .with_scheme(scheme)
        .with_dilation(dilation)
        .with_divisor(divisor);
    if let Err(e) = query.validate() {
        t.report(shifts_off.unwrap_or(t.offset), e);
        return None;
    }
    let offsets = query.offsets().unwrap_or_default();
    check_shifts(t, &offsets, shifts_off.unwrap_or(t.offset), global);
    let reach = (query.grid.max_scale() / divisor).floor();
    check_range(t, reach, grid_off, global);
    Some(query)
}

fn check_shifts(t: &mut Table<'_, '_>, offsets: &[i64], off: usize, global: &GlobalConfig) {
    let half = global.max_n / 2;
    if let Some(&h) = offsets.iter().find(|h| h.unsigned_abs() > half) {
        t.report(off, format!("shift {h} exceeds max_n/2 = {half}"));
    }
}

fn check_range(t: &mut Table<'_, '_>, reach: f64, off: usize, global: &GlobalConfig) {
    if reach > global.max_n as f64 {
        t.report(off, format!("range {reach} exceeds max_n = {}", global.max_n));
    }
}

fn read_task(kind: &str, koff: usize, t: &mut Table<'_, '_>, global: &GlobalConfig) -> Option<Task> {
    match kind {
        "correlate" => read_query(t, global, true).map(Task::Correlate),
        "fd_table" => {
            let functions = t.required("functions", |t, v, o| t.specs(v, o, "functions"));
            let shifts_off = t.fields.get("shifts").map_or(t.offset, |s| s.span().start);
            let shifts = t.required("shifts", |t, v, o| t.ints(v, o, "shifts"));
            let scheme = t.optional("scheme", WeightScheme::Unweighted, |t, v, o| t.scheme(v, o, "scheme"));
            let scale_off = t.fields.get("scale").map_or(t.offset, |s| s.span().start);
            let scale = t.required("scale", |t, v, o| t.positive(v, o, "scale"));
            let divisors = t.required("divisors", |t, v, o| t.numbers(v, o, "divisors"));
            let dilations = t.required("dilations", |t, v, o| t.ints(v, o, "dilations"));
            let t_max = t.optional("t_max", 0.0, |t, v, o| t.number(v, o, "t_max"));
            let (functions, shifts, scheme, scale, divisors, dilations, t_max) =
                (functions?, shifts?, scheme?, scale?, divisors?, dilations?, t_max?);
            if let Err(e) = crate::correlation::FdTablePlan::new(
                functions.clone(),
                shifts.clone(),
                scheme,
                divisors.clone(),
                dilations.clone(),
                scale,
            ) {
                t.report(koff, e);
                return None;
            }
            let offsets: Vec<i64> = dilations
                .iter()
                .flat_map(|a| shifts.iter().map(move |h| h.saturating_mul(*a)))
                .collect();
            check_shifts(t, &offsets, shifts_off, global);
            let min_d = divisors.iter().cloned().fold(f64::INFINITY, f64::min);
            check_range(t, (scale / min_d).floor(), scale_off, global);
            Some(Task::FdTable {
                functions,
                shifts,
                scheme,
                scale,
                divisors,
                dilations,
                t_max,
            })
        }
        "isotopy_arch" => {
            let query = read_query(t, global, true);
            let q = t.required("q", |t, v, o| {
                let q = t.rational(v, o, "q")?;
                if q > 0.0 {
                    Some(q)
                } else {
                    t.report(o, format!("'q' must be positive, got {q}"));
                    None
                }
            });
            let tt = t.optional("t", 0.0, |t, v, o| t.number(v, o, "t"));
            let (query, q, tt) = (query?, q?, tt?);
            // Scales X/q must be reachable too.
            let grid_off = t.offset;
            check_range(t, (query.grid.max_scale() / q / query.divisor).floor(), grid_off, global);
            Some(Task::IsotopyArch { query, q, t: tt })
        }
        "isotopy_nonarch" => {
            let query = read_query(t, global, true);
            let chi = t.required("character", |t, v, o| t.character(v, o, "character"));
            Some(Task::IsotopyNonarch {
                query: query?,
                chi: chi?,
            })
        }
        "equidist" => {
            let query = read_query(t, global, true);
            let mode = t.optional("mode", EquidistMode::Subsampled, |t, v, o| {
                match t.string(v, o, "mode")?.as_str() {
                    "all_scales" => Some(EquidistMode::AllScales),
                    "subsampled" => Some(EquidistMode::Subsampled),
                    other => {
                        t.report(o, format!("unknown mode '{other}', expected all_scales or subsampled"));
                        None
                    }
                }
            });
            let profile = t.required("profile", |t, v, o| {
                let knots = t.array(v, o, "profile")?;
                let mut pts = Vec::with_capacity(knots.len());
                for k in knots {
                    let pair = t.numbers(k, o, "profile")?;
                    if pair.len() != 2 {
                        t.report(o, "'profile' knots must be [r, value] pairs");
                        return None;
                    }
                    pts.push((pair[0], pair[1]));
                }
                match RadialProfile::new(pts) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        t.report(o, e);
                        None
                    }
                }
            });
            let k = t.optional("harmonic", 0, |t, v, o| t.int(v, o, "harmonic"));
            let mollifier = Mollifier::Harmonic {
                profile: profile?,
                k: k? as i32,
            };
            Some(Task::Equidist {
                query: query?,
                mollifier,
                mode: mode?,
            })
        }
        "pretense" => {
            let f = t.required("f", |t, v, o| t.spec(v, o, "f"));
            let g = t.required("g", |t, v, o| t.spec(v, o, "g"));
            let grid_off = t.fields.get("grid").map_or(t.offset, |s| s.span().start);
            let grid = t.required("grid", |t, v, o| t.grid(v, o, "grid"));
            let grid = grid?;
            if grid.x0 < 3.0 {
                t.report(grid_off, "'grid' scales must be at least 3");
                return None;
            }
            check_range(t, grid.max_scale(), grid_off, global);
            Some(Task::Pretense { f: f?, g: g?, grid })
        }
        "fit" => {
            let g = t.required("g", |t, v, o| t.spec(v, o, "g"));
            let q_max = t.required("q_max", |t, v, o| t.uint(v, o, "q_max"));
            let t_max = t.optional("t_max", FitSearch::DEFAULT_T_MAX, |t, v, o| t.positive(v, o, "t_max"));
            let scale_off = t.fields.get("scale").map_or(t.offset, |s| s.span().start);
            let scale = t.required("scale", |t, v, o| t.positive(v, o, "scale"));
            let budget = t.optional("budget", FitSearch::DEFAULT_BUDGET, |t, v, o| {
                t.positive(v, o, "budget")
            });
            let (g, q_max, t_max, scale, budget) = (g?, q_max?, t_max?, scale?, budget?);
            if q_max == 0 {
                t.report(koff, "'q_max' must be at least 1");
                return None;
            }
            check_range(t, scale, scale_off, global);
            let mut search = FitSearch::new(q_max, t_max, scale);
            search.budget = budget;
            Some(Task::Fit { g, search })
        }
        "race" => {
            let grid_off = t.fields.get("grid").map_or(t.offset, |s| s.span().start);
            let grid = t.required("grid", |t, v, o| t.grid(v, o, "grid"))?;
            check_range(t, grid.max_scale(), grid_off, global);
            Some(Task::Race(grid))
        }
        "smooth" => {
            let alpha = t.required("alpha", |t, v, o| t.exponent(v, o, "alpha"));
            let beta = t.required("beta", |t, v, o| t.exponent(v, o, "beta"));
            let grid_off = t.fields.get("grid").map_or(t.offset, |s| s.span().start);
            let grid = t.required("grid", |t, v, o| t.grid(v, o, "grid"));
            let (alpha, beta, grid) = (alpha?, beta?, grid?);
            for e in [alpha, beta] {
                if 1.0 / e.value() > DickmanSolver::DEFAULT_U_MAX {
                    t.report(koff, format!("exponent {e} needs u = {} beyond the Dickman table", 1.0 / e.value()));
                    return None;
                }
            }
            check_range(t, grid.max_scale(), grid_off, global);
            Some(Task::Smooth { alpha, beta, grid })
        }
        "patterns" => {
            let ks = match (t.take("k"), t.take("ks")) {
                (Some((v, o)), None) => t.uint(v, o, "k").map(|k| (vec![k as usize], o)),
                (None, Some((v, o))) => t
                    .array(v, o, "ks")
                    .and_then(|a| a.into_iter().map(|x| t.uint(x, o, "ks").map(|k| k as usize)).collect())
                    .map(|ks: Vec<usize>| (ks, o)),
                _ => {
                    let off = t.offset;
                    t.report(off, "needs exactly one of 'k' or 'ks'");
                    None
                }
            };
            let n_off = t.fields.get("n").map_or(t.offset, |s| s.span().start);
            let n = t.required("n", |t, v, o| t.uint(v, o, "n"));
            let function = t.optional("function", MultiplicativeFunctionSpec::liouville(), |t, v, o| {
                t.spec(v, o, "function")
            });
            let ((ks, koff), n, function) = (ks?, n?, function?);
            let Some(alphabet) = function.alphabet() else {
                t.report(koff, format!("function '{}' has no finite alphabet", function.label()));
                return None;
            };
            let max = max_length(alphabet.size());
            if ks.is_empty() {
                t.report(koff, "no pattern lengths given");
                return None;
            }
            for &k in &ks {
                if k == 0 || k > max {
                    t.report(koff, format!("pattern length {k} outside 1..={max}"));
                    return None;
                }
                if n < k as u64 {
                    t.report(n_off, format!("n = {n} is shorter than the pattern length {k}"));
                    return None;
                }
            }
            check_range(t, n as f64, n_off, global);
            Some(Task::Patterns { ks, n, function })
        }
        "straighten" => {
            let mode = t.required("mode", |t, v, o| {
                let m = t.string(v, o, "mode")?;
                if m == "dirichlet" || m == "archimedean" {
                    Some(m)
                } else {
                    t.report(o, format!("unknown mode '{m}', expected dirichlet or archimedean"));
                    None
                }
            });
            let trials = t.optional("trials", 100, |t, v, o| t.uint(v, o, "trials"));
            let eps = t.required("epsilon", |t, v, o| {
                let e = t.number(v, o, "epsilon")?;
                if (0.0..=crate::straighten::EPSILON_CAP).contains(&e) {
                    Some(e)
                } else {
                    t.report(o, format!("'epsilon' must be in [0, {}]", crate::straighten::EPSILON_CAP));
                    None
                }
            });
            let (mode, trials, epsilon) = (mode?, trials? as usize, eps?);
            if mode == "dirichlet" {
                let q_max = t.optional("q_max", 50, |t, v, o| t.uint(v, o, "q_max"))?;
                if q_max == 0 {
                    t.report(koff, "'q_max' must be at least 1");
                    return None;
                }
                let q = t.optional("q", None, |t, v, o| {
                    let q = t.uint(v, o, "q")?;
                    if q == 0 {
                        t.report(o, "'q' must be at least 1");
                        return None;
                    }
                    Some(Some(q))
                })?;
                Some(Task::Straighten(StraightenTask::Dirichlet {
                    trials,
                    q_max,
                    q,
                    epsilon,
                }))
            } else {
                let t_range = t.optional("t_range", 5.0, |t, v, o| t.positive(v, o, "t_range"))?;
                let t0 = t.optional("t0", None, |t, v, o| t.number(v, o, "t0").map(Some))?;
                let x_max = t.optional("x_max", 1e6, |t, v, o| {
                    let x = t.number(v, o, "x_max")?;
                    if x >= 16.0 {
                        Some(x)
                    } else {
                        t.report(o, "'x_max' must be at least 16");
                        None
                    }
                })?;
                Some(Task::Straighten(StraightenTask::Archimedean {
                    trials,
                    t_range,
                    t0,
                    x_max,
                    epsilon,
                }))
            }
        }
        "compare_avgs" => {
            let function = t.required("function", |t, v, o| t.spec(v, o, "function"));
            let a = t.optional("a", 1, |t, v, o| {
                let a = t.uint(v, o, "a")?;
                if a == 0 {
                    t.report(o, "'a' must be at least 1");
                    return None;
                }
                Some(a)
            });
            let scales_off = t.fields.get("scales").map_or(t.offset, |s| s.span().start);
            let scales = t.required("scales", |t, v, o| t.numbers(v, o, "scales"));
            let (function, a, scales) = (function?, a?, scales?);
            if scales.iter().any(|&x| x < 10.0) {
                t.report(scales_off, "'scales' must all be at least 10");
                return None;
            }
            let top = scales.iter().cloned().fold(0.0, f64::max);
            check_range(t, top * a as f64, scales_off, global);
            Some(Task::CompareAvgs { function, a, scales })
        }
        "three_point" => {
            let function = t.required("function", |t, v, o| t.spec(v, o, "function"));
            let shifts_off = t.fields.get("shifts").map_or(t.offset, |s| s.span().start);
            let shifts = t.required("shifts", |t, v, o| {
                let s = t.ints(v, o, "shifts")?;
                match <[i64; 3]>::try_from(s) {
                    Ok(a) => Some(a),
                    Err(s) => {
                        t.report(o, format!("'shifts' needs exactly three entries, got {}", s.len()));
                        None
                    }
                }
            });
            let windows_off = t.fields.get("windows").map_or(t.offset, |s| s.span().start);
            let windows = t.required("windows", |t, v, o| {
                let items = t.array(v, o, "windows")?;
                let mut out = Vec::new();
                for w in items {
                    let pair = t.numbers(w, o, "windows")?;
                    if pair.len() != 2 {
                        t.report(o, "'windows' entries must be [x, omega] pairs");
                        return None;
                    }
                    out.push((pair[0], pair[1]));
                }
                Some(out)
            });
            let (function, shifts, windows) = (function?, shifts?, windows?);
            if let Err(e) = crate::correlation::ThreePointPlan::new(function.clone(), shifts, &windows) {
                t.report(shifts_off, e);
                return None;
            }
            check_shifts(t, &shifts, shifts_off, global);
            let top = windows.iter().map(|w| w.0).fold(0.0, f64::max);
            check_range(t, top, windows_off, global);
            Some(Task::ThreePoint {
                function,
                shifts,
                windows,
            })
        }
        _ => unreachable!("kind checked against KINDS"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
[global]
max_n = 1e6
output_dir = "results"
seed = 11

[[experiment]]
name = "two_point"
kind = "correlate"
functions = ["liouville", "liouville"]
shifts = [0, 1]
grid = { x0 = 1e3, max = 1e6, ratio = 10 }

[[experiment]]
name = "race"
kind = "race"
grid = 1e5
"#;

    #[test]
    fn parses_good_config() {
        let c = parse_config(GOOD).unwrap();
        assert_eq!(c.global.max_n, 1_000_000);
        assert_eq!(c.global.seed, 11);
        assert_eq!(c.experiments.len(), 2);
        assert_eq!(c.experiments[0].task.kind(), "correlate");
        match &c.experiments[0].task {
            Task::Correlate(q) => assert_eq!(q.grid.scales(), vec![1e3, 1e4, 1e5, 1e6]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn empty_config_is_valid() {
        let c = parse_config("").unwrap();
        assert!(c.experiments.is_empty());
    }

    #[test]
    fn duplicate_names_give_one_diagnostic() {
        let text = "[[experiment]]\nname = \"a\"\nkind = \"race\"\ngrid = 100\n\n[[experiment]]\nname = \"a\"\nkind = \"race\"\ngrid = 100\n";
        let d = validate(text);
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].message.contains("duplicate"));
        assert_eq!((d[0].line, d[0].column), (7, 8));
    }

    #[test]
    fn character_index_out_of_range() {
        let text = "[[experiment]]\nname = \"x\"\nkind = \"correlate\"\nfunctions = [\"char(q=4,index=5)\"]\nshifts = [0]\ngrid = 100\n";
        let d = validate(text);
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].message.contains("index"), "{}", d[0]);
        assert_eq!(d[0].line, 4);
    }

    #[test]
    fn shift_range() {
        let text = "[global]\nmax_n = 1000\n[[experiment]]\nname = \"x\"\nkind = \"correlate\"\nfunctions = [\"liouville\", \"liouville\"]\nshifts = [0, 600]\ngrid = 100\n";
        let d = validate(text);
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].message.contains("max_n/2"));
    }

    #[test]
    fn reports_all_problems() {
        let text = r#"
[global]
max_n = -5
colour = "blue"

[[experiment]]
name = "a"
kind = "nonsense"

[[experiment]]
name = "b"
kind = "smooth"
alpha = "3/2"
beta = "1/2"
grid = 1e9
"#;
        let d = validate(text);
        assert_eq!(d.len(), 4, "{d:#?}");
        assert!(d.iter().all(|x| x.line > 0));
    }

    #[test]
    fn syntax_error_has_position() {
        let d = validate("[global]\nmax_n = = 3\n");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].line, 2);
    }

    #[test]
    fn kinds_round_trip() {
        let text = r#"
[global]
max_n = 1e5

[[experiment]]
name = "fd"
kind = "fd_table"
functions = ["liouville", "liouville"]
shifts = [0, 1]
scale = 1e5
divisors = [1, 2, 4]
dilations = [1, 2]

[[experiment]]
name = "arch"
kind = "isotopy_arch"
functions = ["archimedean(t=1.5)"]
shifts = [0]
grid = { x0 = 1e3, count = 3, ratio = 2 }
q = "3/2"
t = 1.5

[[experiment]]
name = "nonarch"
kind = "isotopy_nonarch"
functions = ["liouville", "liouville"]
shifts = [0, 1]
grid = 1e4
character = "char(q=3,index=1)"

[[experiment]]
name = "eq"
kind = "equidist"
functions = ["archimedean(t=2)"]
shifts = [0]
grid = { x0 = 100, count = 3, ratio = 10 }
profile = [[0.2, 0], [0.3, 1], [1.5, 1], [2, 0]]
harmonic = 1

[[experiment]]
name = "pre"
kind = "pretense"
f = "liouville"
g = "one"
grid = { x0 = 10, max = 1e5, ratio = 10 }

[[experiment]]
name = "fit"
kind = "fit"
g = "liouville"
q_max = 5
t_max = 2
scale = 1e4

[[experiment]]
name = "smooth"
kind = "smooth"
alpha = "1/2"
beta = 0.25
grid = 1e5

[[experiment]]
name = "pat"
kind = "patterns"
ks = [1, 2, 3]
n = 1e5

[[experiment]]
name = "st"
kind = "straighten"
mode = "archimedean"
trials = 2
epsilon = 0.01

[[experiment]]
name = "cmp"
kind = "compare_avgs"
function = "liouville"
a = 2
scales = [100, 1000]

[[experiment]]
name = "tp"
kind = "three_point"
function = "lambda_q(3)"
shifts = [0, 1, 2]
windows = [[1e5, 100]]
"#;
        let c = parse_config(text).unwrap_or_else(|d| panic!("{d:#?}"));
        let kinds: Vec<&str> = c.experiments.iter().map(|e| e.task.kind()).collect();
        assert_eq!(
            kinds,
            [
                "fd_table",
                "isotopy_arch",
                "isotopy_nonarch",
                "equidist",
                "pretense",
                "fit",
                "smooth",
                "patterns",
                "straighten",
                "compare_avgs",
                "three_point"
            ]
        );
    }
}
