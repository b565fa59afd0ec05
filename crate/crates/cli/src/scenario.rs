//! Scenario files: one `key = value` per line, `#` starts a comment, list
//! values are comma separated.
//!
//! ```text
//! m = 3
//! power = 25
//! noise = 0.1
//! g = log
//! protocol = smith
//! theta = 2
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use macgame::dynamics::ProtocolKind;
use macgame::{CapacityRegionView, ChannelModel, PayoffMethod, Utility};

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    Snr(Vec<f64>),
    /// `power` and `gain` hold one value shared by every user or one per user.
    Physical {
        power: Vec<f64>,
        gain: Vec<f64>,
        noise: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum UtilitySpec {
    Identity,
    Log1p,
    Power(f64),
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    Uniform,
    /// All mass on `C_N/m`, which is added to the grid if needed.
    Share,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: usize,
    pub channel: ChannelSpec,
    pub utility: UtilitySpec,
    pub weights: Option<Vec<f64>>,
    pub grid_points: usize,
    pub initial: InitialState,
    pub protocol: ProtocolKind,
    pub theta: f64,
    pub growth: f64,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    pub seed: u64,
    pub method: MethodKind,
    pub samples: usize,
    pub face_samples: usize,
    pub deviation_grid: usize,
    pub mutant_grid: usize,
    pub epsilons: Vec<f64>,
    pub trace_csv: String,
    pub final_csv: String,
}

/// Every problem found in a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioErrors(pub Vec<Problem>);

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    /// 1-based line, or `None` for a missing key.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid scenario ({} problem{})", self.0.len(), if self.0.len() == 1 { "" } else { "s" })?;
        for p in &self.0 {
            match p.line {
                Some(line) => write!(f, "\n  line {line}: {}", p.message)?,
                None => write!(f, "\n  {}", p.message)?,
            }
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioErrors {}

const KEYS: &[&str] = &[
    "m",
    "snr",
    "power",
    "gain",
    "noise",
    "g",
    "g_exponent",
    "g_table",
    "weights",
    "grid_points",
    "initial",
    "protocol",
    "theta",
    "growth",
    "dt",
    "steps",
    "record_every",
    "seed",
    "method",
    "samples",
    "face_samples",
    "deviation_grid",
    "mutant_grid",
    "epsilons",
    "trace_csv",
    "final_csv",
];

struct Entry {
    line: usize,
    value: String,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    problems: Vec<Problem>,
}

impl Reader {
    fn problem(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.problems.push(Problem {
            line,
            message: message.into(),
        });
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn raw(&self, key: &str) -> Option<(usize, String)> {
        self.entries.get(key).map(|e| (e.line, e.value.clone()))
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let (line, value) = self.raw(key)?;
        match value.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.problem(Some(line), format!("`{key}` must be {what}, got `{value}`"));
                None
            }
        }
    }

    fn real(&mut self, key: &str) -> Option<f64> {
        let v: f64 = self.parsed(key, "a number")?;
        if v.is_finite() {
            Some(v)
        } else {
            let line = self.line_of(key);
            self.problem(line, format!("`{key}` must be finite"));
            None
        }
    }

    fn count(&mut self, key: &str) -> Option<usize> {
        self.parsed(key, "a non-negative integer")
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        let (line, value) = self.raw(key)?;
        let mut out = Vec::new();
        for item in value.split(',') {
            match item.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => {
                    self.problem(Some(line), format!("`{key}` must be a list of numbers, got `{}`", item.trim()));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn pairs(&mut self, key: &str) -> Option<Vec<(f64, f64)>> {
        let (line, value) = self.raw(key)?;
        let mut out = Vec::new();
        for item in value.split(',') {
            let parsed = item
                .split_once(':')
                .and_then(|(x, y)| Some((x.trim().parse::<f64>().ok()?, y.trim().parse::<f64>().ok()?)));
            match parsed {
                Some(p) => out.push(p),
                None => {
                    self.problem(Some(line), format!("`{key}` entries must look like `x:y`, got `{}`", item.trim()));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)]) -> Option<T> {
        let (line, value) = self.raw(key)?;
        match options.iter().find(|(name, _)| *name == value) {
            Some((_, v)) => Some(*v),
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.problem(Some(line), format!("`{key}` must be one of {}, got `{value}`", names.join(", ")));
                None
            }
        }
    }

    fn check(&mut self, key: &str, ok: bool, message: impl Into<String>) {
        if !ok {
            let line = self.line_of(key);
            self.problem(line, message);
        }
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            users: 2,
            channel: ChannelSpec::Snr(vec![1.0, 1.0]),
            utility: UtilitySpec::Identity,
            weights: None,
            grid_points: 51,
            initial: InitialState::Uniform,
            protocol: ProtocolKind::Bnn,
            theta: 1.0,
            growth: 1.0,
            dt: 0.01,
            steps: 20_000,
            record_every: 100,
            seed: 0,
            method: MethodKind::Exact,
            samples: 10_000,
            face_samples: 500,
            deviation_grid: 25,
            mutant_grid: 50,
            epsilons: vec![0.1, 0.01, 0.001],
            trace_csv: "trace.csv".into(),
            final_csv: "final_state.csv".into(),
        }
    }
}

const PROTOCOLS: &[(&str, ProtocolKind)] = &[
    ("bnn", ProtocolKind::Bnn),
    ("replicator", ProtocolKind::Replicator),
    ("smith", ProtocolKind::Smith),
];
const UTILITIES: &[(&str, u8)] = &[("identity", 0), ("log", 1), ("power", 2), ("table", 3)];
const INITIAL: &[(&str, InitialState)] = &[("uniform", InitialState::Uniform), ("share", InitialState::Share)];
const METHODS: &[(&str, MethodKind)] = &[("exact", MethodKind::Exact), ("montecarlo", MethodKind::MonteCarlo)];

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioErrors> {
        let mut reader = Reader {
            entries: BTreeMap::new(),
            problems: Vec::new(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                reader.problem(Some(line), format!("expected `key = value`, got `{content}`"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                reader.problem(Some(line), format!("unknown key `{key}`"));
                continue;
            }
            if value.is_empty() {
                reader.problem(Some(line), format!("`{key}` has no value"));
                continue;
            }
            if let Some(first) = reader.entries.get(key) {
                let first = first.line;
                reader.problem(Some(line), format!("`{key}` already set on line {first}"));
                continue;
            }
            reader.entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.to_string(),
                },
            );
        }

        let mut s = Scenario::default();
        let users = reader.count("m");
        if !reader.entries.contains_key("m") {
            reader.problem(None, "missing required key `m`");
        }
        if let Some(m) = users {
            reader.check("m", m >= 1, "`m` must be at least 1");
            s.users = m;
        }

        let snr = reader.list("snr");
        let power = reader.list("power");
        let gain = reader.list("gain");
        let noise = reader.real("noise");
        let has = |r: &Reader, k: &str| r.entries.contains_key(k);
        if has(&reader, "snr") {
            for key in ["power", "gain", "noise"] {
                if has(&reader, key) {
                    let line = reader.line_of(key);
                    reader.problem(line, format!("`{key}` cannot be combined with `snr`"));
                }
            }
            if let Some(snr) = snr {
                reader.check("snr", snr.len() == s.users, format!("`snr` lists {} values for m = {}", snr.len(), s.users));
                reader.check("snr", snr.iter().all(|x| *x > 0.0), "`snr` values must be positive");
                s.channel = ChannelSpec::Snr(snr);
            }
        } else if has(&reader, "power") || has(&reader, "noise") || has(&reader, "gain") {
            if !has(&reader, "power") {
                reader.problem(None, "missing required key `power` (needed with `noise`)");
            }
            if !has(&reader, "noise") {
                reader.problem(None, "missing required key `noise` (needed with `power`)");
            }
            let power = power.unwrap_or_else(|| vec![1.0]);
            let gain = gain.unwrap_or_else(|| vec![1.0]);
            for (key, values) in [("power", &power), ("gain", &gain)] {
                reader.check(
                    key,
                    values.len() == 1 || values.len() == s.users,
                    format!("`{key}` needs 1 or {} values, got {}", s.users, values.len()),
                );
                reader.check(key, values.iter().all(|x| *x > 0.0), format!("`{key}` values must be positive"));
            }
            let noise = noise.unwrap_or(1.0);
            reader.check("noise", noise > 0.0, "`noise` must be positive");
            s.channel = ChannelSpec::Physical { power, gain, noise };
        } else {
            reader.problem(None, "missing channel: set `snr`, or `power` and `noise`");
        }

        let g_kind = reader.choice("g", UTILITIES);
        let exponent = reader.real("g_exponent");
        let table = reader.pairs("g_table");
        s.utility = match g_kind {
            Some(2) => match exponent {
                Some(p) => {
                    reader.check("g_exponent", p > 0.0 && p < 1.0, "`g_exponent` must lie in (0, 1)");
                    UtilitySpec::Power(p)
                }
                None => {
                    if !has(&reader, "g_exponent") {
                        let line = reader.line_of("g");
                        reader.problem(line, "`g = power` needs `g_exponent`");
                    }
                    UtilitySpec::Power(0.5)
                }
            },
            Some(3) => match table {
                Some(points) => {
                    if let Err(e) = Utility::table(points.clone()) {
                        let line = reader.line_of("g_table");
                        reader.problem(line, e.to_string());
                    }
                    UtilitySpec::Table(points)
                }
                None => {
                    if !has(&reader, "g_table") {
                        let line = reader.line_of("g");
                        reader.problem(line, "`g = table` needs `g_table`");
                    }
                    UtilitySpec::Table(Vec::new())
                }
            },
            Some(1) => UtilitySpec::Log1p,
            _ => UtilitySpec::Identity,
        };
        if g_kind != Some(2) && has(&reader, "g_exponent") {
            let line = reader.line_of("g_exponent");
            reader.problem(line, "`g_exponent` only applies to `g = power`");
        }
        if g_kind != Some(3) && has(&reader, "g_table") {
            let line = reader.line_of("g_table");
            reader.problem(line, "`g_table` only applies to `g = table`");
        }

        if let Some(w) = reader.list("weights") {
            reader.check("weights", w.len() == s.users, format!("`weights` lists {} values for m = {}", w.len(), s.users));
            reader.check("weights", w.iter().all(|x| *x > 0.0), "`weights` must be positive");
            s.weights = Some(w);
        }

        if let Some(v) = reader.count("grid_points") {
            reader.check("grid_points", v >= 2, "`grid_points` must be at least 2");
            s.grid_points = v;
        }
        if let Some(v) = reader.choice("initial", INITIAL) {
            s.initial = v;
        }
        if let Some(v) = reader.choice("protocol", PROTOCOLS) {
            s.protocol = v;
        }
        if let Some(v) = reader.real("theta") {
            reader.check("theta", v >= 1.0, "theta must be ≥ 1");
            s.theta = v;
        }
        if let Some(v) = reader.real("growth") {
            reader.check("growth", v > 0.0, "`growth` must be positive");
            s.growth = v;
        }
        if let Some(v) = reader.real("dt") {
            reader.check("dt", v > 0.0, "`dt` must be positive");
            s.dt = v;
        }
        if let Some(v) = reader.count("steps") {
            s.steps = v;
        }
        if let Some(v) = reader.count("record_every") {
            reader.check("record_every", v >= 1, "`record_every` must be at least 1");
            s.record_every = v;
        }
        if let Some(v) = reader.parsed("seed", "a non-negative integer") {
            s.seed = v;
        }
        if let Some(v) = reader.choice("method", METHODS) {
            s.method = v;
        }
        if let Some(v) = reader.count("samples") {
            reader.check("samples", v >= 2, "`samples` must be at least 2");
            s.samples = v;
        }
        if let Some(v) = reader.count("face_samples") {
            reader.check("face_samples", v >= 1, "`face_samples` must be at least 1");
            s.face_samples = v;
        }
        if let Some(v) = reader.count("deviation_grid") {
            reader.check("deviation_grid", v >= 2, "`deviation_grid` must be at least 2");
            s.deviation_grid = v;
        }
        if let Some(v) = reader.count("mutant_grid") {
            reader.check("mutant_grid", v >= 2, "`mutant_grid` must be at least 2");
            s.mutant_grid = v;
        }
        if let Some(v) = reader.list("epsilons") {
            reader.check("epsilons", v.iter().all(|e| *e > 0.0 && *e < 1.0), "`epsilons` must lie in (0, 1)");
            s.epsilons = v;
        }
        if let Some((_, v)) = reader.raw("trace_csv") {
            s.trace_csv = v;
        }
        if let Some((_, v)) = reader.raw("final_csv") {
            s.final_csv = v;
        }

        // constraints of the channel model and region only once the fields are clean
        if reader.problems.is_empty() {
            if let Err(e) = s.view() {
                let line = reader.line_of("snr").or(reader.line_of("power")).or(reader.line_of("m"));
                reader.problem(line, e.to_string());
            }
        }

        if reader.problems.is_empty() {
            Ok(s)
        } else {
            reader.problems.sort_by_key(|p| p.line.unwrap_or(usize::MAX));
            Err(ScenarioErrors(reader.problems))
        }
    }

    pub fn channel_model(&self) -> macgame::Result<ChannelModel> {
        match &self.channel {
            ChannelSpec::Snr(snr) => ChannelModel::from_snr(snr.clone()),
            ChannelSpec::Physical { power, gain, noise } => {
                let expand = |v: &Vec<f64>| if v.len() == 1 { vec![v[0]; self.users] } else { v.clone() };
                ChannelModel::from_physical(&expand(power), &expand(gain), *noise)
            }
        }
    }

    pub fn view(&self) -> macgame::Result<CapacityRegionView> {
        CapacityRegionView::new(self.channel_model()?)
    }

    pub fn utility(&self) -> macgame::Result<Utility> {
        match &self.utility {
            UtilitySpec::Identity => Ok(Utility::Identity),
            UtilitySpec::Log1p => Ok(Utility::Log1p),
            UtilitySpec::Power(p) => Utility::power(*p),
            UtilitySpec::Table(points) => Utility::table(points.clone()),
        }
    }

    pub fn payoff_method(&self) -> PayoffMethod {
        match self.method {
            MethodKind::Exact => PayoffMethod::Exact,
            MethodKind::MonteCarlo => PayoffMethod::MonteCarlo {
                samples: self.samples,
                seed: self.seed,
            },
        }
    }

    /// Canonical text form; parses back to an equal scenario.
    pub fn dump(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("m", self.users.to_string());
        match &self.channel {
            ChannelSpec::Snr(snr) => line("snr", list(snr)),
            ChannelSpec::Physical { power, gain, noise } => {
                line("power", list(power));
                line("gain", list(gain));
                line("noise", format!("{noise:?}"));
            }
        }
        match &self.utility {
            UtilitySpec::Identity => line("g", "identity".into()),
            UtilitySpec::Log1p => line("g", "log".into()),
            UtilitySpec::Power(p) => {
                line("g", "power".into());
                line("g_exponent", format!("{p:?}"));
            }
            UtilitySpec::Table(points) => {
                line("g", "table".into());
                let items: Vec<String> = points.iter().map(|(x, y)| format!("{x:?}:{y:?}")).collect();
                line("g_table", items.join(", "));
            }
        }
        if let Some(w) = &self.weights {
            line("weights", list(w));
        }
        line("grid_points", self.grid_points.to_string());
        let initial = INITIAL.iter().find(|(_, v)| *v == self.initial).map(|(n, _)| *n).unwrap_or("uniform");
        line("initial", initial.into());
        line("protocol", self.protocol.name().into());
        line("theta", format!("{:?}", self.theta));
        line("growth", format!("{:?}", self.growth));
        line("dt", format!("{:?}", self.dt));
        line("steps", self.steps.to_string());
        line("record_every", self.record_every.to_string());
        line("seed", self.seed.to_string());
        let method = METHODS.iter().find(|(_, v)| *v == self.method).map(|(n, _)| *n).unwrap_or("exact");
        line("method", method.into());
        line("samples", self.samples.to_string());
        line("face_samples", self.face_samples.to_string());
        line("deviation_grid", self.deviation_grid.to_string());
        line("mutant_grid", self.mutant_grid.to_string());
        line("epsilons", list(&self.epsilons));
        line("trace_csv", self.trace_csv.clone());
        line("final_csv", self.final_csv.clone());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = Scenario::parse("m = 2\nsnr = 1,1\ng = identity\n").unwrap();
        assert_eq!(s.users, 2);
        assert_eq!(s.channel, ChannelSpec::Snr(vec![1.0, 1.0]));
        assert_eq!(s.grid_points, 51);
        assert_eq!(s.protocol, ProtocolKind::Bnn);
    }

    #[test]
    fn smith_theta_below_one_is_rejected() {
        let err = Scenario::parse("m = 2\nsnr = 1,1\nprotocol = smith\ntheta = 0.5\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].line, Some(4));
        assert!(err.to_string().contains("theta must be ≥ 1"));
    }

    #[test]
    fn empty_file_lists_required_keys() {
        let err = Scenario::parse("").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("`m`"), "{text}");
        assert!(text.contains("`snr`"), "{text}");
    }

    #[test]
    fn all_problems_are_reported_together() {
        let text = "m = 2\nsnr = 1,x\nbogus = 3\ndt = -1\n# comment\nsteps = many\n";
        let err = Scenario::parse(text).unwrap_err();
        let lines: Vec<Option<usize>> = err.0.iter().map(|p| p.line).collect();
        assert_eq!(lines, vec![Some(2), Some(3), Some(4), Some(6)]);
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = Scenario::parse("m = 2\nm = 3\nsnr = 1,1\n").unwrap_err();
        assert!(err.to_string().contains("already set on line 1"));
    }

    #[test]
    fn physical_channel_with_shared_power() {
        let s = Scenario::parse("m = 3\npower = 25\nnoise = 0.1   # shared\n").unwrap();
        let view = s.view().unwrap();
        assert!((view.total_capacity() - 751f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn power_utility_needs_exponent() {
        assert!(Scenario::parse("m = 2\nsnr = 1,1\ng = power\n").is_err());
        let s = Scenario::parse("m = 2\nsnr = 1,1\ng = power\ng_exponent = 0.5\n").unwrap();
        assert_eq!(s.utility, UtilitySpec::Power(0.5));
    }

    #[test]
    fn region_errors_are_reported() {
        let err = Scenario::parse("m = 21\npower = 1\nnoise = 1\n").unwrap_err();
        assert!(err.to_string().contains("21"), "{err}");
    }

    #[test]
    fn dump_round_trips() {
        let texts = [
            "m = 2\nsnr = 3, 1\n",
            "m = 3\npower = 25\nnoise = 0.1\ng = log\nweights = 1, 2, 0.5\n",
            "m = 2\npower = 1, 2\ngain = 0.3\nnoise = 0.7\ng = table\ng_table = 0:0, 1:0.8, 2:1.1\nprotocol = smith\ntheta = 2.5\nmethod = montecarlo\nsamples = 77\nseed = 9\n",
        ];
        for text in texts {
            let s = Scenario::parse(text).unwrap();
            let again = Scenario::parse(&s.dump()).unwrap();
            assert_eq!(s, again);
        }
    }
}
