//! JSON experiment configuration.
//!
//! A file holds either one scenario object or `{"scenarios": [...]}` with optional
//! shared `seed` and `output` keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use stopbound_core::bounds::{BoundOptions, ConcentrationVariant, Problem, TailKind};
use stopbound_core::geometry::{Boundary, Region, RegionKind, Side};
use stopbound_core::gfun::GFun;
use stopbound_core::moments::{DistributionSpec, ScalarFamily};
use stopbound_core::schedules::Schedule;
use stopbound_core::simulate::validators::{Polytope, ValidatorTag};
use stopbound_core::simulate::SimOptions;
use stopbound_core::{Error, Result, TheoremTag};

/// `{"family": ..., "params": {...}, "dim": d}`; `components` lists distinct laws instead.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionConfig {
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub components: Option<Vec<DistributionConfig>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    /// constant, affine, power, halfspace, norm-power, sample-mean, reciprocal.
    pub family: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default = "default_side")]
    pub side: Side,
    #[serde(default = "default_kind")]
    pub kind: RegionKind,
}

fn default_side() -> Side {
    Side::Below
}

fn default_kind() -> RegionKind {
    RegionKind::Continuity
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: String,
    #[serde(default)]
    pub n0: Option<u64>,
    #[serde(default)]
    pub step: Option<u64>,
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub points: Option<Vec<u64>>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Process {
    #[default]
    Discrete,
    Brownian,
    Overshoot,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_runs: Option<usize>,
    pub horizon: Option<u64>,
    pub seed: Option<u64>,
    /// Brownian step size.
    pub dt: Option<f64>,
    /// Brownian time cap.
    pub t_max: Option<f64>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub process: Process,
    /// Brownian diffusion per coordinate; defaults to the increment standard deviation.
    pub diffusion: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub tol: Option<f64>,
    pub t_cap: Option<f64>,
    pub grad_step: Option<f64>,
    pub support_samples: Option<usize>,
    pub convexity_trials: Option<usize>,
    pub tail: Option<TailKind>,
    pub concentration: Option<ConcentrationVariant>,
    pub series_floor: Option<f64>,
    pub series_cap: Option<u64>,
    pub schedule_audit: Option<usize>,
}

/// Polytope `{x : a_i·x ≤ b_i}` sampled uniformly by rejection from `box_lo..box_hi`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexSetConfig {
    /// Each face is `[a_1, ..., a_d, b]`.
    pub faces: Vec<Vec<f64>>,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub distribution: DistributionConfig,
    pub region: RegionConfig,
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub bounds: Vec<String>,
    #[serde(default)]
    pub validators: Vec<String>,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub optimize: OptimizeConfig,
    #[serde(default)]
    pub gfun: Option<GFun>,
    #[serde(default)]
    pub threshold: Option<DistributionConfig>,
    #[serde(default)]
    pub initial_containment: Option<bool>,
    /// Manual bound values replacing computed ones, keyed by theorem tag.
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
    /// Convex `g` for the Jensen, Wald and perspective validators; defaults to `g(x) = x`.
    #[serde(default)]
    pub validator_gfun: Option<GFun>,
    /// Law of `Y` in the Jensen validator; defaults to the point mass at 1.
    #[serde(default)]
    pub jensen_y: Option<DistributionConfig>,
    #[serde(default)]
    pub convex_set: Option<ConvexSetConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Command-line settings applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub workers: Option<usize>,
}

/// A parsed, validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub problem: Problem,
    pub tags: Vec<TheoremTag>,
    pub validators: Vec<ValidatorTag>,
    pub overrides: BTreeMap<TheoremTag, f64>,
    pub sim: SimOptions,
    pub process: Process,
    pub dt: f64,
    pub t_max: f64,
    pub diffusion: Vec<f64>,
    pub validator_gfun: GFun,
    pub jensen_y: ScalarFamily,
    pub convex_set: Option<(Polytope, Vec<f64>, Vec<f64>)>,
    /// First 16 hex digits of the SHA-256 of the effective configuration.
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenarios: Vec<Scenario>,
    pub output: OutputConfig,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub fn load(path: &Path, ov: &Overrides) -> Result<Experiment> {
    let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, ov)
}

pub fn parse(text: &str, ov: &Overrides) -> Result<Experiment> {
    let root: Value = serde_json::from_str(text).map_err(|e| cfg_err(format!("malformed JSON: {e}")))?;
    let Value::Object(mut obj) = root else {
        return Err(cfg_err("top level must be a JSON object"));
    };
    let (raw, shared_seed, output) = if let Some(list) = obj.remove("scenarios") {
        let shared_seed = match obj.remove("seed") {
            Some(v) => Some(serde_json::from_value::<u64>(v).map_err(|e| cfg_err(format!("seed: {e}")))?),
            None => None,
        };
        let output = match obj.remove("output") {
            Some(v) => serde_json::from_value(v).map_err(|e| cfg_err(format!("output: {e}")))?,
            None => OutputConfig::default(),
        };
        if let Some(k) = obj.keys().next() {
            return Err(cfg_err(format!("unknown top-level key `{k}` next to `scenarios`")));
        }
        let Value::Array(items) = list else {
            return Err(cfg_err("`scenarios` must be an array"));
        };
        (items, shared_seed, output)
    } else {
        let single = Value::Object(obj);
        let output = single
            .get("output")
            .cloned()
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| cfg_err(format!("output: {e}")))?
            .unwrap_or_default();
        (vec![single], None, output)
    };
    let scenarios =
        raw.into_iter().enumerate().map(|(i, v)| build_scenario(v, i, shared_seed, ov)).collect::<Result<Vec<_>>>()?;
    Ok(Experiment { scenarios, output })
}

/// Applies the seed and run-count overrides to the raw JSON so the hash covers them.
/// Worker count and output paths are excluded: they do not change results.
fn effective(mut v: Value, seed: u64, ov: &Overrides) -> Value {
    if let Value::Object(obj) = &mut v {
        obj.remove("output");
        obj.insert("seed".into(), Value::from(seed));
        let sim = obj.entry("simulate").or_insert_with(|| Value::Object(Map::new()));
        if let Value::Object(sim) = sim {
            sim.remove("workers");
            sim.remove("seed");
            if let Some(r) = ov.runs {
                sim.insert("n_runs".into(), Value::from(r));
            }
        }
    }
    v
}

fn config_hash(v: &Value) -> String {
    // serde_json maps are sorted by key, so this serialization is canonical.
    let bytes = serde_json::to_vec(v).expect("JSON values serialize");
    hex::encode(Sha256::digest(&bytes))[..16].to_string()
}

fn build_scenario(raw: Value, index: usize, shared_seed: Option<u64>, ov: &Overrides) -> Result<Scenario> {
    let cfg: ScenarioConfig =
        serde_json::from_value(raw.clone()).map_err(|e| cfg_err(format!("scenario {index}: {e}")))?;
    let name = cfg.name.clone().unwrap_or_else(|| format!("scenario-{index}"));
    let ctx = |e: Error| cfg_err(format!("scenario `{name}`: {e}"));

    let seed = ov.seed.or(cfg.simulate.seed).or(cfg.seed).or(shared_seed).unwrap_or(0);
    let config_hash = config_hash(&effective(raw, seed, ov));

    let spec = distribution(&cfg.distribution).map_err(ctx)?;
    let region = region(&cfg.region).map_err(ctx)?;
    let schedule = match &cfg.schedule {
        Some(s) => schedule(s).map_err(ctx)?,
        None => Schedule::all_naturals(),
    };
    if region.dim() != spec.dim() {
        return Err(ctx(cfg_err(format!(
            "dimension mismatch: region has {} coordinates, distribution has {}",
            region.dim(),
            spec.dim()
        ))));
    }
    let mut problem = Problem::new(spec.clone(), region, schedule).map_err(ctx)?.with_options(options(&cfg.optimize));
    if let Some(g) = &cfg.gfun {
        problem = problem.with_gfun(g.clone());
    }
    if let Some(t) = &cfg.threshold {
        problem = problem.with_threshold(scalar(t).map_err(ctx)?);
    }
    problem.initial_containment = cfg.initial_containment;

    let tags = cfg.bounds.iter().map(|t| t.parse::<TheoremTag>()).collect::<Result<Vec<_>>>().map_err(ctx)?;
    let validators =
        cfg.validators.iter().map(|t| t.parse::<ValidatorTag>()).collect::<Result<Vec<_>>>().map_err(ctx)?;
    let overrides = cfg
        .overrides
        .iter()
        .map(|(k, v)| Ok((k.parse::<TheoremTag>()?, *v)))
        .collect::<Result<BTreeMap<_, _>>>()
        .map_err(ctx)?;

    let defaults = SimOptions::default();
    let sim = SimOptions {
        n_runs: ov.runs.or(cfg.simulate.n_runs).unwrap_or(defaults.n_runs),
        horizon: cfg.simulate.horizon.unwrap_or(defaults.horizon),
        seed,
        workers: ov.workers.or(cfg.simulate.workers).unwrap_or(0),
        strict: cfg.simulate.strict,
    };
    if sim.n_runs == 0 {
        return Err(ctx(cfg_err("n_runs must be positive")));
    }
    let diffusion = match &cfg.simulate.diffusion {
        Some(d) if d.len() != spec.dim() => return Err(ctx(cfg_err("diffusion length differs from dimension"))),
        Some(d) => d.clone(),
        None => problem.profile.variance.iter().map(|v| v.sqrt()).collect(),
    };
    let convex_set = cfg.convex_set.as_ref().map(|c| convex_set(c, spec.dim())).transpose().map_err(ctx)?;
    let jensen_y = match &cfg.jensen_y {
        Some(y) => scalar(y).map_err(ctx)?,
        None => ScalarFamily::PointMass { value: 1.0 },
    };

    Ok(Scenario {
        name,
        problem,
        tags,
        validators,
        overrides,
        sim,
        process: cfg.simulate.process,
        dt: cfg.simulate.dt.unwrap_or(0.01),
        t_max: cfg.simulate.t_max.unwrap_or(1e4),
        diffusion,
        validator_gfun: cfg.validator_gfun.clone().unwrap_or(GFun::Linear { intercept: 0.0, slope: 1.0 }),
        jensen_y,
        convex_set,
        config_hash,
    })
}

fn family_name(name: &str) -> &str {
    match name {
        "bernoulli" => "bernoulli-affine",
        "normal" => "gaussian",
        other => other,
    }
}

fn scalar(c: &DistributionConfig) -> Result<ScalarFamily> {
    let Some(fam) = &c.family else {
        return Err(cfg_err("scalar law needs a `family`"));
    };
    if c.components.is_some() || c.dim.is_some_and(|d| d != 1) {
        return Err(cfg_err(format!("`{fam}` must be a scalar law here")));
    }
    let mut obj = c.params.clone();
    obj.insert("family".into(), Value::from(family_name(fam)));
    let f: ScalarFamily = serde_json::from_value(Value::Object(obj)).map_err(|e| cfg_err(format!("{fam}: {e}")))?;
    f.validate()?;
    Ok(f)
}

pub fn distribution(c: &DistributionConfig) -> Result<DistributionSpec> {
    if let Some(comps) = &c.components {
        if c.family.is_some() {
            return Err(cfg_err("give either `family` or `components`, not both"));
        }
        let laws = comps.iter().map(scalar).collect::<Result<Vec<_>>>()?;
        if c.dim.is_some_and(|d| d != laws.len()) {
            return Err(cfg_err(format!("dim {} but {} components", c.dim.unwrap_or(0), laws.len())));
        }
        return Ok(DistributionSpec::Product(laws));
    }
    let one = DistributionConfig { dim: None, ..c.clone() };
    let law = scalar(&one)?;
    match c.dim.unwrap_or(1) {
        0 => Err(cfg_err("dim must be at least 1")),
        1 => Ok(DistributionSpec::Scalar(law)),
        d => Ok(DistributionSpec::Product(vec![law; d])),
    }
}

fn num(params: &Map<String, Value>, key: &str) -> Result<f64> {
    params.get(key).and_then(Value::as_f64).ok_or_else(|| cfg_err(format!("missing numeric parameter `{key}`")))
}

fn gfun_param(params: &Map<String, Value>) -> Result<GFun> {
    let v = params.get("g").cloned().ok_or_else(|| cfg_err("missing parameter `g`"))?;
    serde_json::from_value(v).map_err(|e| cfg_err(format!("g: {e}")))
}

pub fn region(c: &RegionConfig) -> Result<Region> {
    let p = &c.params;
    match c.family.as_str() {
        "constant" => Region::scalar(Boundary::Constant { c: num(p, "c")? }, c.side, c.kind),
        "affine" => Region::scalar(
            Boundary::Affine { slope: num(p, "slope")?, intercept: num(p, "intercept")? },
            c.side,
            c.kind,
        ),
        "power" => Region::scalar(Boundary::Power { c: num(p, "c")?, gamma: num(p, "gamma")? }, c.side, c.kind),
        "halfspace" => {
            let a: Vec<f64> = p
                .get("a")
                .cloned()
                .map(serde_json::from_value)
                .transpose()
                .map_err(|e| cfg_err(format!("a: {e}")))?
                .ok_or_else(|| cfg_err("missing parameter `a`"))?;
            let (b, cc) = (num(p, "b")?, num(p, "c")?);
            match c.side {
                Side::Below => Region::halfspace(a, b, cc, c.kind),
                Side::Above => Region::halfspace(a.iter().map(|x| -x).collect(), -b, -cc, c.kind),
            }
        }
        "norm-power" => {
            let dim = p.get("dim").and_then(Value::as_u64).unwrap_or(1) as usize;
            Region::norm_power(num(p, "c")?, num(p, "gamma")?, dim, c.side, c.kind)
        }
        // orientation follows the kind for the two g-based rules
        "sample-mean" => Ok(Region::sample_mean(gfun_param(p)?, c.kind)),
        "reciprocal" => Ok(Region::reciprocal_rule(gfun_param(p)?)),
        other => Err(cfg_err(format!("unknown region family `{other}`"))),
    }
}

pub fn schedule(c: &ScheduleConfig) -> Result<Schedule> {
    let need = |v: Option<u64>, k: &str| v.ok_or_else(|| cfg_err(format!("schedule `{}` needs `{k}`", c.kind)));
    let s = match c.kind.as_str() {
        "all-naturals" => Schedule::all_naturals(),
        "arithmetic" => Schedule::arithmetic(c.n0.unwrap_or(0), need(c.step, "step")?)?,
        "geometric" => Schedule::geometric(
            need(c.n0, "n0")?,
            c.ratio.ok_or_else(|| cfg_err("schedule `geometric` needs `ratio`"))?,
        )?,
        "explicit" => {
            let (Some(lambda), Some(k)) = (c.lambda, c.k) else {
                return Err(cfg_err("explicit schedules need declared `lambda` and `k`"));
            };
            let points = c.points.clone().ok_or_else(|| cfg_err("schedule `explicit` needs `points`"))?;
            return Schedule::explicit(c.n0.unwrap_or(0), points, lambda, k);
        }
        other => return Err(cfg_err(format!("unknown schedule kind `{other}`"))),
    };
    Ok(match (c.lambda, c.k) {
        (None, None) => s,
        (l, k) => {
            let (l0, k0) = (s.lambda, s.k);
            s.with_growth(l.unwrap_or(l0), k.unwrap_or(k0))
        }
    })
}

fn options(c: &OptimizeConfig) -> BoundOptions {
    let d = BoundOptions::default();
    BoundOptions {
        tol: c.tol.unwrap_or(d.tol),
        t_cap: c.t_cap.unwrap_or(d.t_cap),
        grad_step: c.grad_step.unwrap_or(d.grad_step),
        support_samples: c.support_samples.unwrap_or(d.support_samples),
        convexity_trials: c.convexity_trials.unwrap_or(d.convexity_trials),
        tail: c.tail.unwrap_or(d.tail),
        concentration: c.concentration.unwrap_or(d.concentration),
        series_floor: c.series_floor.unwrap_or(d.series_floor),
        series_cap: c.series_cap.unwrap_or(d.series_cap),
        schedule_audit: c.schedule_audit.unwrap_or(d.schedule_audit),
    }
}

fn convex_set(c: &ConvexSetConfig, dim: usize) -> Result<(Polytope, Vec<f64>, Vec<f64>)> {
    if c.box_lo.len() != dim || c.box_hi.len() != dim {
        return Err(cfg_err("convex_set box dimension differs from the distribution"));
    }
    if c.box_lo.iter().zip(&c.box_hi).any(|(a, b)| a.partial_cmp(b) != Some(std::cmp::Ordering::Less)) {
        return Err(cfg_err("convex_set box needs box_lo < box_hi"));
    }
    let faces = c
        .faces
        .iter()
        .map(|f| {
            if f.len() != dim + 1 {
                return Err(cfg_err(format!("face {f:?} needs {} numbers", dim + 1)));
            }
            Ok((f[..dim].to_vec(), f[dim]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Polytope { faces }, c.box_lo.clone(), c.box_hi.clone()))
}
