//! Line-oriented `key = value` experiment configuration with `[sections]`,
//! validated against a fixed schema.  Unknown keys are rejected, duplicates
//! are reported with both line numbers, and defaults are installed and
//! echoed so the manifest records the exact run parameters.

use crate::bounds::Constants;
use crate::dynamics::{FlowConfig, Integrator};
use crate::error::{Error, Result};
use crate::spectral::{kolmogorov_force, random_divfree_field, GridSpec, ModeCut, SpectralField};
use crate::trajectory::SGrid;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    U64,
    U32,
    Usize,
    F64,
    Bool,
    Str,
}

/// key, type, default (None = no default; value only present if configured).
/// `seed` is the single mandatory key: every stochastic input derives from it.
const SCHEMA: &[(&str, Kind, Option<&str>)] = &[
    ("experiment.name", Kind::Str, Some("run")),
    ("seed", Kind::U64, None),
    ("grid.resolution", Kind::Usize, Some("64")),
    ("grid.box_length", Kind::F64, Some("6.283185307179586")),
    ("grid.dealias_fraction", Kind::F64, Some("0.6666666666666666")),
    ("flow.nu", Kind::F64, Some("1.0")),
    ("flow.dt", Kind::F64, Some("0.01")),
    ("flow.integrator", Kind::Str, Some("etd")),
    ("flow.force", Kind::Str, None),
    ("cut.n", Kind::U32, None),
    ("sgrid.kind", Kind::Str, None),
    ("sgrid.period", Kind::F64, None),
    ("sgrid.ds", Kind::F64, None),
    ("sgrid.s_lo", Kind::F64, Some("0.0")),
    ("sgrid.s_hi", Kind::F64, None),
    ("sgrid.burn_in", Kind::F64, Some("0.0")),
    ("constants.c_t", Kind::F64, Some("1.0")),
    ("constants.c_b", Kind::F64, Some("1.0")),
    ("constants.c_l", Kind::F64, Some("1.0")),
    ("constants.c_a", Kind::F64, Some("1.0")),
    ("constants.c_t_prime", Kind::F64, Some("83.0")),
    ("simulate.u0", Kind::Str, Some("zero")),
    ("simulate.t_final", Kind::F64, Some("1.0")),
    ("simulate.record_every", Kind::Usize, Some("10")),
    ("bounds.g_values", Kind::Str, None),
    ("bounds.n_values", Kind::Str, None),
    ("bounds.ratio_gf", Kind::F64, Some("1.0")),
    ("bounds.ratio_hf", Kind::F64, Some("1.0")),
    ("bounds.h_h1", Kind::F64, Some("0.0")),
    ("bounds.u0_h1", Kind::F64, Some("0.0")),
    ("bounds.mu", Kind::F64, None),
    ("bounds.gamma", Kind::F64, Some("2.0")),
    ("bounds.epsilon", Kind::F64, Some("1.0")),
    ("trajectory.source", Kind::Str, Some("steady")),
    ("wmap.tol", Kind::F64, Some("1e-10")),
    ("wmap.enforce", Kind::Bool, Some("false")),
    ("slave.q0", Kind::Str, Some("zero")),
    ("detform.dt_outer", Kind::F64, Some("0.01")),
    ("detform.steps", Kind::Usize, Some("10")),
    ("detform.tol", Kind::F64, Some("1e-10")),
    ("detform.horizon", Kind::F64, None),
    ("detform.residual_tol", Kind::F64, Some("1e-6")),
    ("nudge.mu", Kind::F64, None),
    ("nudge.observe_every", Kind::Usize, Some("1")),
    ("nudge.w0", Kind::Str, Some("zero")),
    ("stationary.tol", Kind::F64, Some("1e-8")),
];

fn schema_entry(key: &str) -> Option<&'static (&'static str, Kind, Option<&'static str>)> {
    SCHEMA.iter().find(|(k, _, _)| *k == key)
}

fn type_ok(kind: Kind, value: &str) -> bool {
    match kind {
        Kind::U64 => value.parse::<u64>().is_ok(),
        Kind::U32 => value.parse::<u32>().is_ok(),
        Kind::Usize => value.parse::<usize>().is_ok(),
        Kind::F64 => value.parse::<f64>().is_ok(),
        Kind::Bool => matches!(value, "true" | "false"),
        Kind::Str => true,
    }
}

/// A validated configuration: every present key is known and well-typed,
/// defaults are installed, and `defaulted` records which ones were.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
    pub defaulted: Vec<String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values: BTreeMap<String, (String, usize)> = BTreeMap::new();
        let mut violations = Vec::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                match name.strip_suffix(']') {
                    Some(name) if !name.trim().is_empty() => {
                        section = name.trim().to_string();
                    }
                    _ => violations.push(format!("line {lineno}: malformed section header")),
                }
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                violations.push(format!("line {lineno}: expected key = value"));
                continue;
            };
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            let value = v.trim().to_string();
            match schema_entry(&key) {
                None => violations.push(format!("line {lineno}: unknown key '{key}'")),
                Some((_, kind, _)) if !type_ok(*kind, &value) => violations.push(format!(
                    "line {lineno}: value '{value}' for '{key}' has the wrong type ({kind:?})"
                )),
                Some(_) => {
                    if let Some((_, first)) = values.get(&key) {
                        violations.push(format!(
                            "duplicate key '{key}' on lines {first} and {lineno}"
                        ));
                    } else {
                        values.insert(key, (value, lineno));
                    }
                }
            }
        }
        if !values.contains_key("seed") {
            violations.push("missing mandatory key 'seed'".to_string());
        }
        if !violations.is_empty() {
            return Err(Error::InvalidConfig(violations.join("; ")));
        }
        let mut out = BTreeMap::new();
        let mut defaulted = Vec::new();
        for (key, _, default) in SCHEMA {
            match values.get(*key) {
                Some((v, _)) => {
                    out.insert(key.to_string(), v.clone());
                }
                None => {
                    if let Some(d) = default {
                        out.insert(key.to_string(), d.to_string());
                        defaulted.push(key.to_string());
                    }
                }
            }
        }
        Ok(Self {
            values: out,
            defaulted,
        })
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::InvalidConfig(format!("missing key '{key}'")))
    }

    fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("unparsable value for '{key}'")))
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.get_parsed(key)
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.get_parsed(key)
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.get(key)
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.get_parsed(key)
    }

    pub fn seed(&self) -> u64 {
        self.values["seed"].parse().expect("validated at parse")
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.usize("grid.resolution")?,
            self.f64("grid.box_length")?,
            self.f64("grid.dealias_fraction")?,
        )
    }

    pub fn constants(&self) -> Result<Constants> {
        let c = Constants {
            c_t: self.f64("constants.c_t")?,
            c_b: self.f64("constants.c_b")?,
            c_l: self.f64("constants.c_l")?,
            c_a: self.f64("constants.c_a")?,
            c_t_prime: self.f64("constants.c_t_prime")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn cut(&self) -> Result<ModeCut> {
        ModeCut::new(self.get_parsed("cut.n")?, &self.grid()?)
    }

    pub fn sgrid(&self) -> Result<SGrid> {
        match self.str("sgrid.kind")? {
            "periodic" => SGrid::periodic(self.f64("sgrid.period")?, self.f64("sgrid.ds")?),
            "windowed" => SGrid::windowed(
                self.f64("sgrid.s_lo")?,
                self.f64("sgrid.s_hi")?,
                self.f64("sgrid.ds")?,
                self.f64("sgrid.burn_in")?,
            ),
            k => Err(Error::InvalidConfig(format!(
                "sgrid.kind must be periodic or windowed, got '{k}'"
            ))),
        }
    }

    pub fn flow(&self) -> Result<FlowConfig> {
        let grid = self.grid()?;
        let force = field_from_spec(self.str("flow.force")?, &grid, self.seed())?;
        let integrator = match self.str("flow.integrator")? {
            "etd" => Integrator::ExponentialIf,
            "imex" => Integrator::ImplicitExplicit,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "flow.integrator must be etd or imex, got '{other}'"
                )))
            }
        };
        let mut cfg = FlowConfig::new(
            self.f64("flow.nu")?,
            grid,
            force,
            self.f64("flow.dt")?,
            integrator,
        )?;
        cfg.constants = self.constants()?;
        Ok(cfg)
    }

    /// Comma-separated float list (for sweep keys).
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad number '{s}' in '{key}'")))
            })
            .collect()
    }
}

/// Field mini-language:
///   kolmogorov:k=(k1,k2):amplitude  -- single-shear eigenfunction
///   random:seed:decay[:amplitude]   -- seeded random divergence-free field
///   random:decay[:amplitude]        -- same, seeded from the global seed
///   file:path                       -- a stored snapshot
///   zero                            -- the zero field
pub fn field_from_spec(spec: &str, grid: &GridSpec, seed: u64) -> Result<SpectralField> {
    let bad = |msg: &str| Error::InvalidConfig(format!("field spec '{spec}': {msg}"));
    let mut parts = spec.split(':');
    match parts.next().unwrap_or("") {
        "zero" => Ok(SpectralField::zeros(*grid)),
        "kolmogorov" => {
            let kpart = parts.next().ok_or_else(|| bad("missing k=(k1,k2)"))?;
            let amp: f64 = parts
                .next()
                .ok_or_else(|| bad("missing amplitude"))?
                .parse()
                .map_err(|_| bad("amplitude must be a number"))?;
            let inner = kpart
                .strip_prefix("k=(")
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| bad("wavevector must look like k=(0,2)"))?;
            let (a, b) = inner.split_once(',').ok_or_else(|| bad("need two k components"))?;
            let k1: i64 = a.trim().parse().map_err(|_| bad("k1 must be an integer"))?;
            let k2: i64 = b.trim().parse().map_err(|_| bad("k2 must be an integer"))?;
            if (k1, k2) == (0, 0) {
                return Err(bad("wavevector must be nonzero"));
            }
            if !(amp > 0.0) {
                return Err(bad("amplitude must be positive"));
            }
            Ok(kolmogorov_force(*grid, k1, k2, amp))
        }
        "random" => {
            let nums: Vec<&str> = parts.collect();
            let (seed, decay, amp) = match nums.len() {
                1 => (seed, nums[0], "1.0"),
                2 if nums[1].parse::<f64>().is_ok() && nums[0].parse::<u64>().is_ok() => {
                    (nums[0].parse().unwrap(), nums[1], "1.0")
                }
                2 => (seed, nums[0], nums[1]),
                3 => (
                    nums[0].parse().map_err(|_| bad("seed must be an integer"))?,
                    nums[1],
                    nums[2],
                ),
                _ => return Err(bad("expected random:[seed:]decay[:amplitude]")),
            };
            let decay: f64 = decay.parse().map_err(|_| bad("decay must be a number"))?;
            let amp: f64 = amp.parse().map_err(|_| bad("amplitude must be a number"))?;
            let u = random_divfree_field(seed, decay, *grid, None);
            let n = u.norm_l2();
            if n == 0.0 {
                return Err(bad("random field vanished"));
            }
            Ok(u.scaled(amp / n))
        }
        "file" => {
            let path = parts.next().ok_or_else(|| bad("missing path"))?;
            let u = crate::io::read_field(Path::new(path))?;
            u.same_grid(&SpectralField::zeros(*grid))?;
            Ok(u)
        }
        other => Err(bad(&format!("unknown kind '{other}'"))),
    }
}
