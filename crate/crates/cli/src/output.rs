//! CSV files with a reproducibility header, and small argument parsers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TIMESTAMP_PREFIX: &str = "# timestamp: ";
const CONFIG_PREFIX: &str = "# config: ";

/// Comment header: version, command line, seed, timestamp and the resolved
/// config, one TOML line per `# config: ` line.
pub fn header(command: &str, cfg: &RunConfig, extra: &[String]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# kurograph {VERSION}\n"));
    out.push_str(&format!("# command: {command}\n"));
    out.push_str(&format!("# seed: {}\n", cfg.seed));
    out.push_str(&format!(
        "{TIMESTAMP_PREFIX}{}\n",
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    ));
    for line in extra {
        out.push_str(&format!("# {line}\n"));
    }
    for line in cfg.to_toml().lines() {
        out.push_str(CONFIG_PREFIX);
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Config text echoed in a header written by [`header`].
pub fn config_from_header(text: &str) -> Option<String> {
    let lines: Vec<&str> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.strip_prefix(CONFIG_PREFIX))
        .collect();
    (!lines.is_empty()).then(|| lines.join("\n") + "\n")
}

/// Value of a `# key: value` header line.
pub fn header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    let prefix = format!("# {key}: ");
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix(prefix.as_str()))
}

/// Buffered CSV writer; values are written with the shortest round-trip
/// representation.
pub struct Csv {
    out: BufWriter<File>,
}

impl Csv {
    pub fn create(path: &Path, header: &str, columns: &[&str]) -> io::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(header.as_bytes())?;
        writeln!(out, "{}", columns.join(","))?;
        Ok(Self { out })
    }

    pub fn row(&mut self, cells: &[String]) -> io::Result<()> {
        writeln!(self.out, "{}", cells.join(","))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Shortest round-trip text; exponent form outside `[1e-4, 1e16)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Data rows of a CSV written by [`Csv`]: column names and records.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let columns: Vec<String> = lines
        .next()
        .ok_or("missing column header")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>())
        .collect();
    Ok((columns, rows))
}

/// `a:b:steps` as `steps` evenly spaced values from `a` to `b` inclusive.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid '{spec}' is not of the form a:b:steps"));
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| format!("grid '{spec}': bad start"))?;
    let b: f64 = parts[1].trim().parse().map_err(|_| format!("grid '{spec}': bad end"))?;
    let steps: usize = parts[2].trim().parse().map_err(|_| format!("grid '{spec}': bad step count"))?;
    if steps == 0 || !a.is_finite() || !b.is_finite() {
        return Err(format!("grid '{spec}': need finite ends and at least one step"));
    }
    if steps == 1 {
        return Ok(vec![a]);
    }
    Ok((0..steps)
        .map(|i| a + (b - a) * i as f64 / (steps - 1) as f64)
        .collect())
}

/// `a:b` as a closed interval.
pub fn parse_interval(spec: &str) -> Result<(f64, f64), String> {
    let (a, b) = spec
        .split_once(':')
        .ok_or_else(|| format!("interval '{spec}' is not of the form a:b"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("interval '{spec}': bad start"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("interval '{spec}': bad end"))?;
    if !(a < b) {
        return Err(format!("interval '{spec}': need a < b"));
    }
    Ok((a, b))
}

/// Drop the timestamp line so two outputs can be compared.
pub fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect()
}
