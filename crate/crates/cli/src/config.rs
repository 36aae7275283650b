//! Run configuration: a TOML file with `[kernel]`, `[freq]`, `[engine]` and
//! `[output]` tables. Parsing reports every problem found, not just the first.

use std::fmt;
use std::path::{Path, PathBuf};

use kurograph_core::freqdist::FrequencyModel;
use kurograph_core::graphon::{GraphonKernel, GridScheme};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum KernelConfig {
    Constant { p: f64 },
    SmallWorld { p: f64, r: f64 },
    Cosine,
    Circulant { coeffs: Vec<f64> },
    Grid { file: PathBuf, n: usize, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FreqKind {
    StandardNormal,
    Normal { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqConfig {
    pub kind: FreqKind,
    pub quad_nodes: usize,
    /// Overrides the global seed for frequency sampling.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Uniform,
    Coherent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub n: usize,
    pub eig_k: usize,
    pub dt: f64,
    pub t: f64,
    pub j: usize,
    pub beta: f64,
    pub tol: f64,
    pub t_max: f64,
    pub galerkin_n: usize,
    pub galerkin_dt: Option<f64>,
    pub seed_amplitude: Option<f64>,
    pub grid: String,
    pub bernoulli: bool,
    pub stride: usize,
    pub init: Init,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            n: 1024,
            eig_k: 8,
            dt: 0.01,
            t: 200.0,
            j: 8,
            beta: 1.0,
            tol: 1e-6,
            t_max: 4000.0,
            galerkin_n: 64,
            galerkin_dt: None,
            seed_amplitude: None,
            grid: "midpoint".into(),
            bernoulli: false,
            stride: 100,
            init: Init::Coherent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub strict: bool,
    pub kernel: KernelConfig,
    pub freq: FreqConfig,
    pub engine: EngineConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            strict: true,
            kernel: KernelConfig::Constant { p: 1.0 },
            freq: FreqConfig {
                kind: FreqKind::StandardNormal,
                quad_nodes: kurograph_core::freqdist::DEFAULT_QUAD_NODES,
                seed: None,
            },
            engine: EngineConfig::default(),
            output_dir: PathBuf::from("."),
        }
    }
}

/// All problems found in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

const KNOWN: &[(&str, &[&str])] = &[
    ("", &["seed", "strict", "kernel", "freq", "engine", "output"]),
    ("kernel", &["kind", "p", "r", "coeffs", "grid_file"]),
    ("freq", &["kind", "sigma", "quad_nodes", "seed"]),
    (
        "engine",
        &[
            "n",
            "eig_k",
            "dt",
            "T",
            "J",
            "beta",
            "tol",
            "t_max",
            "galerkin_n",
            "galerkin_dt",
            "seed_amplitude",
            "grid",
            "bernoulli",
            "stride",
            "init",
        ],
    ),
    ("output", &["dir"]),
];

struct Reader<'a> {
    root: &'a Table,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn table(&mut self, name: &str) -> Option<&'a Table> {
        match self.root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(v) => {
                self.errors.push(format!("{name}: expected a table, found {}", v.type_str()));
                None
            }
        }
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        match key.split_once('.') {
            Some((t, k)) => match self.root.get(t) {
                Some(Value::Table(tab)) => tab.get(k),
                _ => None,
            },
            None => self.root.get(key),
        }
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            v => {
                self.errors.push(format!("{key}: expected a number, found {}", v.type_str()));
                None
            }
        }
    }

    fn float_in(&mut self, key: &str, lo: f64, hi: f64, what: &str) -> Option<f64> {
        let v = self.float(key)?;
        if !(v >= lo && v <= hi) {
            self.errors.push(format!("{key} = {v} out of range: must be {what}"));
            return None;
        }
        Some(v)
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        let v = self.float(key)?;
        if !(v > 0.0 && v.is_finite()) {
            self.errors.push(format!("{key} = {v} out of range: must be positive"));
            return None;
        }
        Some(v)
    }

    fn int(&mut self, key: &str, min: i64) -> Option<i64> {
        match self.raw(key)? {
            Value::Integer(i) if *i >= min => Some(*i),
            Value::Integer(i) => {
                self.errors.push(format!("{key} = {i} out of range: must be at least {min}"));
                None
            }
            v => {
                self.errors.push(format!("{key}: expected an integer, found {}", v.type_str()));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<&'a str> {
        match self.raw(key)? {
            Value::String(s) => Some(s),
            v => {
                self.errors.push(format!("{key}: expected a string, found {}", v.type_str()));
                None
            }
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        match self.raw(key)? {
            Value::Boolean(b) => Some(*b),
            v => {
                self.errors.push(format!("{key}: expected a boolean, found {}", v.type_str()));
                None
            }
        }
    }

    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        match self.raw(key)? {
            Value::Array(a) => {
                let mut out = Vec::with_capacity(a.len());
                for (i, v) in a.iter().enumerate() {
                    match v {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(n) => out.push(*n as f64),
                        other => {
                            self.errors
                                .push(format!("{key}[{i}]: expected a number, found {}", other.type_str()));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            v => {
                self.errors.push(format!("{key}: expected an array, found {}", v.type_str()));
                None
            }
        }
    }

    fn require<T>(&mut self, key: &str, v: Option<T>) -> Option<T> {
        if v.is_none() && self.raw(key).is_none() {
            self.errors.push(format!("{key}: missing required key"));
        }
        v
    }
}

fn check_unknown(root: &Table, strict: bool, errors: &mut Vec<String>, warnings: &mut Vec<String>) {
    let mut report = |msg: String| {
        if strict {
            errors.push(msg)
        } else {
            warnings.push(msg)
        }
    };
    let top = KNOWN[0].1;
    for key in root.keys() {
        if !top.contains(&key.as_str()) {
            report(format!("{key}: unknown key"));
        }
    }
    for (section, keys) in &KNOWN[1..] {
        if let Some(Value::Table(t)) = root.get(*section) {
            for key in t.keys() {
                if !keys.contains(&key.as_str()) {
                    report(format!("{section}.{key}: unknown key"));
                }
            }
        }
    }
}

/// Parse config text; `base` resolves relative file references.
pub fn parse_config_str(text: &str, base: &Path) -> Result<(RunConfig, Vec<String>), ConfigErrors> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigErrors(vec![format!("syntax: {}", e.message())]))?;
    let mut r = Reader {
        root: &root,
        errors: Vec::new(),
    };
    let mut cfg = RunConfig::default();
    let mut warnings = Vec::new();

    if let Some(s) = r.int("seed", 0) {
        cfg.seed = s as u64;
    }
    if let Some(s) = r.boolean("strict") {
        cfg.strict = s;
    }
    let _ = (r.table("kernel"), r.table("freq"), r.table("engine"), r.table("output"));

    let kind = r.string("kernel.kind");
    match r.require("kernel.kind", kind) {
        Some("constant") => {
            let p = r.float_in("kernel.p", -1.0, 1.0, "in [-1, 1]");
            if let Some(p) = r.require("kernel.p", p) {
                cfg.kernel = KernelConfig::Constant { p };
            }
        }
        Some("small-world") => {
            let p = r.float_in("kernel.p", 0.0, 1.0, "in [0, 1]");
            let p = r.require("kernel.p", p);
            let rr = r.float_in("kernel.r", 0.0, 0.5, "in [0, 1/2]");
            let rr = r.require("kernel.r", rr);
            if let (Some(p), Some(rr)) = (p, rr) {
                cfg.kernel = KernelConfig::SmallWorld { p, r: rr };
            }
        }
        Some("cosine") => cfg.kernel = KernelConfig::Cosine,
        Some("circulant") => {
            let c = r.floats("kernel.coeffs");
            if let Some(coeffs) = r.require("kernel.coeffs", c) {
                let bound = coeffs.first().map_or(0.0, |c| c.abs()) + 2.0 * coeffs.iter().skip(1).map(|c| c.abs()).sum::<f64>();
                if coeffs.is_empty() || bound > 1.0 {
                    r.errors.push(format!(
                        "kernel.coeffs: |c0| + 2 Σ|ck| = {bound} out of range: must be nonempty and at most 1"
                    ));
                } else {
                    cfg.kernel = KernelConfig::Circulant { coeffs };
                }
            }
        }
        Some("grid") => {
            let f = r.string("kernel.grid_file");
            if let Some(file) = r.require("kernel.grid_file", f) {
                let path = base.join(file);
                match read_grid_file(&path) {
                    Ok((n, values)) => cfg.kernel = KernelConfig::Grid { file: path, n, values },
                    Err(e) => r.errors.push(format!("kernel.grid_file: {e}")),
                }
            }
        }
        Some(other) => r.errors.push(format!(
            "kernel.kind = \"{other}\" is not one of constant, small-world, cosine, circulant, grid"
        )),
        None => {}
    }

    let has_sigma = r.raw("freq.sigma").is_some();
    match r.string("freq.kind") {
        None | Some("normal") if has_sigma => {
            if let Some(sigma) = r.positive("freq.sigma") {
                cfg.freq.kind = FreqKind::Normal { sigma };
            }
        }
        None | Some("standard-normal") | Some("normal") => {}
        Some(other) => r
            .errors
            .push(format!("freq.kind = \"{other}\" is not one of standard-normal, normal")),
    }
    if has_sigma && r.raw("freq.kind").and_then(|v| v.as_str()) == Some("standard-normal") {
        r.errors.push("freq.sigma: not allowed with freq.kind = \"standard-normal\"".into());
    }
    if let Some(m) = r.int("freq.quad_nodes", 1) {
        cfg.freq.quad_nodes = m as usize;
    }
    if let Some(s) = r.int("freq.seed", 0) {
        cfg.freq.seed = Some(s as u64);
    }

    let e = &mut cfg.engine;
    if let Some(v) = r.int("engine.n", 1) {
        e.n = v as usize;
    }
    if let Some(v) = r.int("engine.eig_k", 1) {
        e.eig_k = v as usize;
    }
    if let Some(v) = r.positive("engine.dt") {
        e.dt = v;
    }
    if let Some(v) = r.positive("engine.T") {
        e.t = v;
    }
    if let Some(v) = r.int("engine.J", 2) {
        e.j = v as usize;
    }
    if let Some(v) = r.float_in("engine.beta", 0.0, 10.0, "in [0, 10]") {
        e.beta = v;
    }
    if let Some(v) = r.positive("engine.tol") {
        e.tol = v;
    }
    if let Some(v) = r.positive("engine.t_max") {
        e.t_max = v;
    }
    if let Some(v) = r.int("engine.galerkin_n", 1) {
        e.galerkin_n = v as usize;
    }
    if let Some(v) = r.positive("engine.galerkin_dt") {
        e.galerkin_dt = Some(v);
    }
    if let Some(v) = r.positive("engine.seed_amplitude") {
        e.seed_amplitude = Some(v);
    }
    match r.string("engine.grid") {
        None => {}
        Some(g @ ("midpoint" | "left-endpoint" | "uniform-random")) => e.grid = g.to_string(),
        Some(other) => r.errors.push(format!(
            "engine.grid = \"{other}\" is not one of midpoint, left-endpoint, uniform-random"
        )),
    }
    if let Some(v) = r.boolean("engine.bernoulli") {
        e.bernoulli = v;
    }
    if let Some(v) = r.int("engine.stride", 1) {
        e.stride = v as usize;
    }
    match r.string("engine.init") {
        None => {}
        Some("uniform") => e.init = Init::Uniform,
        Some("coherent") => e.init = Init::Coherent,
        Some(other) => r
            .errors
            .push(format!("engine.init = \"{other}\" is not one of uniform, coherent")),
    }
    if let Some(d) = r.string("output.dir") {
        cfg.output_dir = base.join(d);
    }

    let mut errors = r.errors;
    check_unknown(&root, cfg.strict, &mut errors, &mut warnings);
    if errors.is_empty() {
        Ok((cfg, warnings))
    } else {
        Err(ConfigErrors(errors))
    }
}

/// Parse a config file.
pub fn parse_config(path: &Path) -> Result<(RunConfig, Vec<String>), ConfigErrors> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigErrors(vec![format!("{}: {e}", path.display())]))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

/// `n × n` row-major values, comma or whitespace separated, `#` comments.
pub fn read_grid_file(path: &Path) -> Result<(usize, Vec<f64>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut values = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            values.push(
                tok.parse::<f64>()
                    .map_err(|_| format!("{}:{}: not a number: {tok}", path.display(), ln + 1))?,
            );
        }
    }
    let n = (values.len() as f64).sqrt().round() as usize;
    if n == 0 || n * n != values.len() {
        return Err(format!("{}: {} values is not a square count", path.display(), values.len()));
    }
    Ok((n, values))
}

impl RunConfig {
    pub fn kernel(&self) -> kurograph_core::Result<GraphonKernel> {
        match &self.kernel {
            KernelConfig::Constant { p } => GraphonKernel::constant(*p),
            KernelConfig::SmallWorld { p, r } => GraphonKernel::small_world(*p, *r),
            KernelConfig::Cosine => Ok(GraphonKernel::cosine()),
            KernelConfig::Circulant { coeffs } => GraphonKernel::circulant(coeffs.clone()),
            KernelConfig::Grid { n, values, .. } => GraphonKernel::grid(*n, values.clone()),
        }
    }

    pub fn model(&self) -> kurograph_core::Result<FrequencyModel> {
        let base = match self.freq.kind {
            FreqKind::StandardNormal => FrequencyModel::standard_normal(),
            FreqKind::Normal { sigma } => FrequencyModel::normal(sigma)?,
        };
        if self.freq.quad_nodes == base.quadrature.len() {
            Ok(base)
        } else {
            base.with_quad_nodes(self.freq.quad_nodes)
        }
    }

    pub fn scheme(&self) -> GridScheme {
        match self.engine.grid.as_str() {
            "left-endpoint" => GridScheme::LeftEndpoint,
            "uniform-random" => GridScheme::UniformRandom(self.seed),
            _ => GridScheme::Midpoint,
        }
    }

    /// Canonical TOML for the resolved configuration.
    pub fn to_toml(&self) -> String {
        let mut root = Table::new();
        root.insert("seed".into(), Value::Integer(self.seed as i64));
        root.insert("strict".into(), Value::Boolean(self.strict));
        let mut k = Table::new();
        match &self.kernel {
            KernelConfig::Constant { p } => {
                k.insert("kind".into(), "constant".into());
                k.insert("p".into(), Value::Float(*p));
            }
            KernelConfig::SmallWorld { p, r } => {
                k.insert("kind".into(), "small-world".into());
                k.insert("p".into(), Value::Float(*p));
                k.insert("r".into(), Value::Float(*r));
            }
            KernelConfig::Cosine => {
                k.insert("kind".into(), "cosine".into());
            }
            KernelConfig::Circulant { coeffs } => {
                k.insert("kind".into(), "circulant".into());
                k.insert(
                    "coeffs".into(),
                    Value::Array(coeffs.iter().map(|c| Value::Float(*c)).collect()),
                );
            }
            KernelConfig::Grid { file, .. } => {
                k.insert("kind".into(), "grid".into());
                k.insert("grid_file".into(), Value::String(file.display().to_string()));
            }
        }
        root.insert("kernel".into(), Value::Table(k));
        let mut f = Table::new();
        match self.freq.kind {
            FreqKind::StandardNormal => {
                f.insert("kind".into(), "standard-normal".into());
            }
            FreqKind::Normal { sigma } => {
                f.insert("kind".into(), "normal".into());
                f.insert("sigma".into(), Value::Float(sigma));
            }
        }
        f.insert("quad_nodes".into(), Value::Integer(self.freq.quad_nodes as i64));
        if let Some(s) = self.freq.seed {
            f.insert("seed".into(), Value::Integer(s as i64));
        }
        root.insert("freq".into(), Value::Table(f));
        let e = &self.engine;
        let mut t = Table::new();
        t.insert("n".into(), Value::Integer(e.n as i64));
        t.insert("eig_k".into(), Value::Integer(e.eig_k as i64));
        t.insert("dt".into(), Value::Float(e.dt));
        t.insert("T".into(), Value::Float(e.t));
        t.insert("J".into(), Value::Integer(e.j as i64));
        t.insert("beta".into(), Value::Float(e.beta));
        t.insert("tol".into(), Value::Float(e.tol));
        t.insert("t_max".into(), Value::Float(e.t_max));
        t.insert("galerkin_n".into(), Value::Integer(e.galerkin_n as i64));
        if let Some(v) = e.galerkin_dt {
            t.insert("galerkin_dt".into(), Value::Float(v));
        }
        if let Some(v) = e.seed_amplitude {
            t.insert("seed_amplitude".into(), Value::Float(v));
        }
        t.insert("grid".into(), Value::String(e.grid.clone()));
        t.insert("bernoulli".into(), Value::Boolean(e.bernoulli));
        t.insert("stride".into(), Value::Integer(e.stride as i64));
        t.insert(
            "init".into(),
            match e.init {
                Init::Uniform => "uniform",
                Init::Coherent => "coherent",
            }
            .into(),
        );
        root.insert("engine".into(), Value::Table(t));
        let mut o = Table::new();
        o.insert("dir".into(), Value::String(self.output_dir.display().to_string()));
        root.insert("output".into(), Value::Table(o));
        toml::to_string(&root).expect("config tables serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigErrors> {
        parse_config_str(text, Path::new(".")).map(|(c, _)| c)
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse("[kernel]\nkind = \"constant\"\np = 0.5\n").unwrap();
        assert_eq!(cfg.kernel, KernelConfig::Constant { p: 0.5 });
        assert_eq!(cfg.freq.kind, FreqKind::StandardNormal);
        assert_eq!(cfg.engine, EngineConfig::default());
        assert_eq!(cfg.seed, 1);
    }

    #[test]
    fn range_error_names_key() {
        let err = parse("[kernel]\nkind = \"constant\"\np = 1.5\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.0[0].starts_with("kernel.p"), "{err}");
    }

    #[test]
    fn all_errors_reported() {
        let err = parse("seed = \"x\"\n[kernel]\nkind = \"small-world\"\np = 2.0\n[engine]\nn = 0\nbogus = 1\n").unwrap_err();
        let text = err.to_string();
        for key in ["seed", "kernel.p", "kernel.r", "engine.n", "engine.bogus"] {
            assert!(text.contains(key), "{key} missing from {text}");
        }
    }

    #[test]
    fn lenient_mode_warns_on_unknown_keys() {
        let (_, warnings) =
            parse_config_str("strict = false\nextra = 1\n[kernel]\nkind = \"cosine\"\n", Path::new(".")).unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse(
            "seed = 9\n[kernel]\nkind = \"small-world\"\np = 0.1\nr = 0.25\n[freq]\nkind = \"normal\"\nsigma = 0.5\n[engine]\nJ = 6\n",
        )
        .unwrap();
        let again = parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn missing_grid_file_is_an_error() {
        let err = parse("[kernel]\nkind = \"grid\"\ngrid_file = \"/nonexistent/w.csv\"\n").unwrap_err();
        assert!(err.0[0].starts_with("kernel.grid_file"));
    }
}
