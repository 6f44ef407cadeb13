//! Run configuration files.
//!
//! A config is one TOML document (JSON is accepted when the file name ends in
//! `.json`). Top-level keys hold the shared settings and exactly one table
//! named after the command holds its operands:
//!
//! ```toml
//! command = "simulate"
//! seed = 1
//! epsilon = 1.0
//!
//! [output]
//! directory = "out"
//! formats = ["csv", "json-lines", "summary"]
//!
//! [simulate]
//! n = 200
//! replications = 500
//! loss = { kind = "tv" }
//! truth = { kind = "iid", measure = { family = "gaussian", mean = 0.0, sd = 1.0 } }
//! model = { family = "translation-grid", base = { shape = "gaussian" }, lo = -1.0, hi = 1.0, step = 0.05 }
//! ```
//!
//! The full schema lives in `docs/config.md`.

use std::fmt;
use std::path::{Path, PathBuf};

use ellest_core::measures::Measure;
use ellest_core::{Error, LossSpec, Result as CoreResult, Sample};
use serde::{Deserialize, Serialize};

use crate::sim::{replication_rng, DeviationBound, ModelSpec, Scenario, Truth};
use crate::suite::SuiteLoss;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Estimate,
    Test,
    Simulate,
    Distances,
    CheckAssumptions,
}

impl Command {
    pub fn key(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Test => "test",
            Command::Simulate => "simulate",
            Command::Distances => "distances",
            Command::CheckAssumptions => "check_assumptions",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::CheckAssumptions => "check-assumptions",
            c => c.key(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    JsonLines,
    Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
    /// Also write per-replication wall-clock times (never byte-reproducible).
    #[serde(default)]
    pub timings: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("ellest-out")
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::JsonLines, Format::Summary]
}

impl Default for Output {
    fn default() -> Self {
        Output { directory: default_dir(), formats: all_formats(), timings: false }
    }
}

impl Output {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Where the observations of `estimate` and `test` come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    /// Inline 1-d observations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<Vec<f64>>,
    /// Headerless CSV, one observation per row (`#` starts a comment).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_file: Option<PathBuf>,
    /// Draw `n` observations from `truth` with the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draw: Option<Draw>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Draw {
    pub truth: Truth,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub model: ModelSpec,
    pub loss: LossSpec,
    pub data: DataSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSection {
    pub p: Measure,
    pub q: Measure,
    pub loss: LossSpec,
    /// Run the test once on these observations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSpec>,
    /// Tally decisions over seeded i.i.d. draws from a known truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<TestMonteCarlo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestMonteCarlo {
    pub truth: Measure,
    pub n: usize,
    pub replications: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub truth: Truth,
    pub model: ModelSpec,
    pub loss: LossSpec,
    pub n: usize,
    pub replications: usize,
    #[serde(default)]
    pub include_empirical: bool,
    /// Sample sizes of a rate curve; `n` is ignored when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    /// Deviation levels ξ tabulated against `bound`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xis: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<DeviationBound>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistancesSection {
    pub measures: Vec<Measure>,
    pub losses: Vec<LossSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckAssumptionsSection {
    #[serde(flatten)]
    pub loss: SuiteLoss,
    #[serde(default = "five")]
    pub space_size: usize,
    /// Number of random spaces; each checks one `(S, P, Q)` in both orders.
    #[serde(default = "two_hundred")]
    pub triples: usize,
}

fn five() -> usize {
    5
}

fn two_hundred() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default)]
    pub verbosity: u8,
    #[serde(default)]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<DistancesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_assumptions: Option<CheckAssumptionsSection>,
}

fn one() -> f64 {
    1.0
}

impl RunConfig {
    pub fn empty(command: Command) -> Self {
        RunConfig {
            command: Some(command),
            seed: None,
            epsilon: 1.0,
            verbosity: 0,
            output: Output::default(),
            estimate: None,
            test: None,
            simulate: None,
            distances: None,
            check_assumptions: None,
        }
    }

    fn present_sections(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.estimate.is_some() {
            v.push("estimate");
        }
        if self.test.is_some() {
            v.push("test");
        }
        if self.simulate.is_some() {
            v.push("simulate");
        }
        if self.distances.is_some() {
            v.push("distances");
        }
        if self.check_assumptions.is_some() {
            v.push("check_assumptions");
        }
        v
    }

    /// Checks the invariants that do not need the operands to be built.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let command = self.command.ok_or_else(|| ConfigError::at("command", "no command given"))?;
        let sections = self.present_sections();
        if sections != [command.key()] {
            return Err(ConfigError::at(
                command.key(),
                format!("exactly one section named `{}` is required, found {:?}", command.key(), sections),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ConfigError::at("epsilon", format!("must be positive and finite, got {}", self.epsilon)));
        }
        if command == Command::Simulate && self.seed.is_none() {
            return Err(ConfigError::at("seed", "simulate requires a seed"));
        }
        if let Some(d) = &self.estimate {
            d.data.validate("estimate.data")?;
        }
        if let Some(t) = &self.test {
            if t.data.is_none() && t.monte_carlo.is_none() {
                return Err(ConfigError::at("test", "give `data`, `monte_carlo`, or both"));
            }
            if let Some(d) = &t.data {
                d.validate("test.data")?;
            }
        }
        if let Some(s) = &self.simulate {
            if s.xis.is_some() != s.bound.is_some() {
                return Err(ConfigError::at("simulate.bound", "`xis` and `bound` go together"));
            }
        }
        Ok(())
    }

    /// Scenario of a `simulate` run at sample size `n`.
    pub fn scenario(&self, n: usize) -> Option<Scenario> {
        let s = self.simulate.as_ref()?;
        Some(Scenario {
            truth: s.truth.clone(),
            model: s.model.clone(),
            loss: s.loss,
            n,
            epsilon: self.epsilon,
            replications: s.replications,
            seed: self.seed?,
            include_empirical: s.include_empirical,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize to TOML")
    }
}

impl DataSpec {
    fn validate(&self, path: &str) -> Result<(), ConfigError> {
        let given = [self.sample.is_some(), self.sample_file.is_some(), self.draw.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(ConfigError::at(path, "give exactly one of `sample`, `sample_file`, `draw`"));
        }
        Ok(())
    }

    /// Reads or draws the observations. Draws use replication stream 0 of `seed`.
    /// `key` locates this table in error messages.
    pub fn load(&self, key: &str, seed: Option<u64>, dim: usize) -> Result<Sample, ConfigError> {
        if let Some(v) = &self.sample {
            return Sample::new(1, v.clone()).map_err(|e| ConfigError::at(format!("{key}.sample"), e.to_string()));
        }
        if let Some(path) = &self.sample_file {
            return read_sample(path, dim);
        }
        let d = self.draw.as_ref().expect("validated");
        let seed = seed.ok_or_else(|| ConfigError::at("seed", "drawing a sample requires a seed"))?;
        let draw = || -> CoreResult<Sample> {
            let m = d.truth.marginals(d.n)?;
            m.draw(d.n, &mut replication_rng(seed, 0))
        };
        draw().map_err(|e| ConfigError::at(format!("{key}.draw"), e.to_string()))
    }
}

fn read_sample(path: &Path, dim: usize) -> Result<Sample, ConfigError> {
    let where_ = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ConfigError::file(&where_, e.to_string()))?;
    let mut data = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ConfigError::file(&where_, e.to_string()))?;
        if rec.len() != dim {
            return Err(ConfigError::file(&where_, format!("row {} has {} fields, expected {dim}", line + 1, rec.len())));
        }
        for f in rec.iter() {
            data.push(
                f.parse::<f64>()
                    .map_err(|_| ConfigError::file(&where_, format!("row {}: `{f}` is not a number", line + 1)))?,
            );
        }
    }
    Sample::new(dim, data).map_err(|e| ConfigError::file(&where_, e.to_string()))
}

/// Config problem, located by file and key path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: Option<String>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn at(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { file: None, key: Some(key.into()), message: message.into() }
    }

    pub fn file(file: &str, message: impl Into<String>) -> Self {
        ConfigError { file: Some(file.to_string()), key: None, message: message.into() }
    }

    pub fn in_file(mut self, file: &Path) -> Self {
        self.file.get_or_insert_with(|| file.display().to_string());
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.file, &self.key) {
            (Some(p), Some(k)) => write!(f, "{p}: `{k}`: {}", self.message),
            (Some(p), None) => write!(f, "{p}: {}", self.message),
            (None, Some(k)) => write!(f, "`{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses a config document; `json` selects the JSON reader.
pub fn parse(text: &str, json: bool) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = if json {
        serde_json::from_str(text).map_err(|e| ConfigError { file: None, key: None, message: e.to_string() })?
    } else {
        toml::from_str(text).map_err(|e| ConfigError { file: None, key: None, message: e.to_string().trim_end().into() })?
    };
    normalize(&mut cfg).map_err(|(k, e)| ConfigError::at(k, e.to_string()))?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::file(&path.display().to_string(), e.to_string()))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse(&text, json).map_err(|e| e.in_file(path))
}

/// Validates every measure and fills in empty tags, so the resolved config
/// carries the labels used in reports.
fn normalize(cfg: &mut RunConfig) -> Result<(), (String, Error)> {
    fn fix(m: &mut Measure, key: &str) -> Result<(), (String, Error)> {
        let tag = std::mem::take(&mut m.tag);
        *m = Measure::new(m.family.clone(), tag).map_err(|e| (key.to_string(), e))?;
        Ok(())
    }
    fn fix_truth(t: &mut Truth, key: &str) -> Result<(), (String, Error)> {
        match t {
            Truth::Iid { measure } => fix(measure, key),
            Truth::Contaminated { base, contaminant, .. } => {
                fix(base, key)?;
                contaminant.as_mut().map_or(Ok(()), |c| fix(c, key))
            }
            Truth::Tuples { measures } => measures.iter_mut().try_for_each(|m| fix(m, key)),
            Truth::Regression { .. } => Ok(()),
        }
    }
    fn fix_model(m: &mut ModelSpec, key: &str) -> Result<(), (String, Error)> {
        match m {
            ModelSpec::Measures { measures } => measures.iter_mut().try_for_each(|m| fix(m, key)),
            ModelSpec::Config(_) => Ok(()),
        }
    }
    fn fix_data(d: &mut DataSpec, key: &str) -> Result<(), (String, Error)> {
        d.draw.as_mut().map_or(Ok(()), |d| fix_truth(&mut d.truth, key))
    }
    if let Some(e) = &mut cfg.estimate {
        fix_model(&mut e.model, "estimate.model")?;
        fix_data(&mut e.data, "estimate.data.draw.truth")?;
    }
    if let Some(t) = &mut cfg.test {
        fix(&mut t.p, "test.p")?;
        fix(&mut t.q, "test.q")?;
        if let Some(d) = &mut t.data {
            fix_data(d, "test.data.draw.truth")?;
        }
        if let Some(mc) = &mut t.monte_carlo {
            fix(&mut mc.truth, "test.monte_carlo.truth")?;
        }
    }
    if let Some(s) = &mut cfg.simulate {
        fix_truth(&mut s.truth, "simulate.truth")?;
        fix_model(&mut s.model, "simulate.model")?;
    }
    if let Some(d) = &mut cfg.distances {
        d.measures.iter_mut().try_for_each(|m| fix(m, "distances.measures"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIM: &str = r#"
command = "simulate"
seed = 4

[output]
directory = "out"

[simulate]
n = 50
replications = 3
loss = { kind = "tv" }
truth = { kind = "iid", measure = { family = "gaussian", mean = 0, sd = 1 } }
model = { family = "translation-grid", base = { shape = "gaussian" }, lo = -1, hi = 1, step = 0.5 }
"#;

    #[test]
    fn toml_round_trip() {
        let cfg = parse(SIM, false).unwrap();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        assert_eq!(parse(&text, false).unwrap(), cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse(&json, true).unwrap(), cfg);
        match &cfg.simulate.as_ref().unwrap().truth {
            Truth::Iid { measure } => assert!(!measure.tag.is_empty()),
            _ => panic!(),
        }
        assert_eq!(cfg.scenario(50).unwrap().seed, 4);
    }

    #[test]
    fn invariants_are_enforced() {
        let mut cfg = parse(SIM, false).unwrap();
        cfg.seed = None;
        assert_eq!(cfg.validate().unwrap_err().key.as_deref(), Some("seed"));
        let mut two = parse(SIM, false).unwrap();
        two.distances = Some(DistancesSection { measures: vec![], losses: vec![] });
        assert!(two.validate().is_err());
        let mut wrong = parse(SIM, false).unwrap();
        wrong.command = Some(Command::Estimate);
        assert!(wrong.validate().is_err());
        let bad = SIM.replace("sd = 1", "sd = -1");
        assert_eq!(parse(&bad, false).unwrap_err().key.as_deref(), Some("simulate.truth"));
        assert!(parse("command = \"simulate\"\nbogus = 1\n", false).is_err());
    }

    #[test]
    fn sample_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "# observations\n0.5\n1.5\n-2\n").unwrap();
        let d = DataSpec { sample: None, sample_file: Some(p.clone()), draw: None };
        assert_eq!(d.load("data", None, 1).unwrap().as_flat(), &[0.5, 1.5, -2.0]);
        std::fs::write(&p, "0.5\nabc\n").unwrap();
        let e = d.load("data", None, 1).unwrap_err();
        assert!(e.to_string().contains("x.csv") && e.to_string().contains("abc"));
    }
}
