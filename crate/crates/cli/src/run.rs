//! The `bound`, `certify` and `validate` commands.

use rand::Rng;
use stopbound_core::bounds::{compute_bound, lorden_t6, lorden_t7, BoundReport};
use stopbound_core::moments::DistributionSpec;
use stopbound_core::rng::StreamRng;
use stopbound_core::schedules::Schedule;
use stopbound_core::simulate::validators::{
    validate_jensen, validate_lp_norm, validate_overshoot, validate_perspective, validate_polytope_mean,
    validate_wald_identity, validate_wald_mean, validate_wald_variance, Outcome, Polytope, ValidatorTag,
};
use stopbound_core::simulate::{
    run_brownian, run_discrete, run_overshoot, simulate_runs, summarize_runs, Estimate, McSummary, RunRecord,
};
use stopbound_core::{Direction, Error, Result};

use crate::config::{Experiment, Process, Scenario};

/// One bound, optionally compared with a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub scenario: String,
    pub report: BoundReport,
    pub mc: Option<Estimate>,
    pub verdict: Verdict,
    pub config_hash: String,
    pub seed: u64,
}

impl BoundRow {
    pub fn applicable(&self) -> bool {
        self.report.applicable()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// No simulation was run.
    NotRun,
    Pass,
    Fail,
    Inapplicable,
    /// Truncated runs bias the mean downwards, so a lower bound cannot be checked.
    SkippedTruncated,
    /// The bound concerns a different process than the one simulated.
    NotSimulated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NotRun => "NA",
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Inapplicable => "inapplicable",
            Self::SkippedTruncated => "skipped-truncated",
            Self::NotSimulated => "not-simulated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatorRow {
    pub scenario: String,
    pub validator: ValidatorTag,
    pub outcome: Outcome,
    pub config_hash: String,
    pub seed: u64,
}

/// Monte Carlo results kept alongside the rows in JSON output.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub scenario: String,
    pub process: Process,
    pub summary: McSummary,
    /// Brownian only: `|fine - coarse|`.
    pub discretization: Option<f64>,
    pub config_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Bound,
    Certify,
    Validate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: Command,
    pub bounds: Vec<BoundRow>,
    pub validators: Vec<ValidatorRow>,
    pub simulations: Vec<SimulationRecord>,
}

impl Report {
    fn new(command: Command) -> Self {
        Self { command, bounds: Vec::new(), validators: Vec::new(), simulations: Vec::new() }
    }

    pub fn failures(&self) -> Vec<String> {
        let b = self.bounds.iter().filter(|r| r.verdict == Verdict::Fail).map(|r| {
            let mc = r.mc.unwrap_or(Estimate { mean: f64::NAN, stderr: f64::NAN });
            format!(
                "{}/{} ({} bound {} against simulated mean {} with stderr {})",
                r.scenario,
                r.report.theorem,
                r.report.direction.as_str(),
                r.report.value.unwrap_or(f64::NAN),
                mc.mean,
                mc.stderr
            )
        });
        let v = self.validators.iter().filter(|r| !r.outcome.pass).map(|r| {
            let w = r.outcome.witness.as_deref().map(|w| format!(": {w}")).unwrap_or_default();
            format!("{}/{}/{}{w}", r.scenario, r.validator, r.outcome.name)
        });
        b.chain(v).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

fn bound_rows(sc: &Scenario) -> Vec<BoundRow> {
    sc.tags
        .iter()
        .map(|&tag| {
            let mut report = compute_bound(tag, &sc.problem);
            if let Some(&v) = sc.overrides.get(&tag) {
                report.value = Some(v);
                report.assumptions.clear();
                report.note(format!("value replaced by manual override {v}"));
            }
            BoundRow {
                scenario: sc.name.clone(),
                report,
                mc: None,
                verdict: Verdict::NotRun,
                config_hash: sc.config_hash.clone(),
                seed: sc.sim.seed,
            }
        })
        .collect()
}

pub fn run_bound(exp: &Experiment) -> Report {
    let mut out = Report::new(Command::Bound);
    for sc in &exp.scenarios {
        out.bounds.extend(bound_rows(sc));
    }
    out
}

fn simulate(sc: &Scenario) -> Result<SimulationRecord> {
    let p = &sc.problem;
    let (summary, discretization) = match sc.process {
        Process::Discrete => (run_discrete(&p.region, &p.spec, &p.schedule, &sc.sim)?, None),
        Process::Brownian => {
            let b = run_brownian(&p.region, p.mu(), &sc.diffusion, sc.dt, sc.t_max, &sc.sim)?;
            (b.fine, Some(b.discretization))
        }
        Process::Overshoot => {
            let (z, lam) = overshoot_inputs(sc)?;
            (run_overshoot(z, lam, &p.schedule, &sc.sim)?.0, None)
        }
    };
    Ok(SimulationRecord {
        scenario: sc.name.clone(),
        process: sc.process,
        summary,
        discretization,
        config_hash: sc.config_hash.clone(),
    })
}

fn overshoot_inputs(sc: &Scenario) -> Result<(&stopbound_core::ScalarFamily, &stopbound_core::ScalarFamily)> {
    let DistributionSpec::Scalar(z) = &sc.problem.spec else {
        return Err(Error::Config(format!("scenario `{}`: overshoot needs scalar increments", sc.name)));
    };
    let lam = sc
        .problem
        .threshold
        .as_ref()
        .ok_or_else(|| Error::Config(format!("scenario `{}`: overshoot needs a `threshold` law", sc.name)))?;
    Ok((z, lam))
}

fn judge(row: &BoundRow, sim: &SimulationRecord) -> Verdict {
    let tag = row.report.theorem;
    let matches = match sim.process {
        Process::Discrete => !tag.is_brownian() && !tag.is_overshoot(),
        Process::Brownian => tag.is_brownian(),
        Process::Overshoot => tag.is_overshoot(),
    };
    if !matches {
        return Verdict::NotSimulated;
    }
    let Some(value) = row.report.value.filter(|_| row.applicable()) else {
        return Verdict::Inapplicable;
    };
    let s = &sim.summary;
    let slack = (4.0 * s.stderr).max(2.0 * sim.discretization.unwrap_or(0.0)) + 1e-9 * (1.0 + s.mean.abs());
    let ok = match row.report.direction {
        Direction::Upper => value >= s.mean - slack,
        Direction::Lower if s.downward_biased() => return Verdict::SkippedTruncated,
        Direction::Lower => value <= s.mean + slack,
    };
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

pub fn run_certify(exp: &Experiment) -> Result<Report> {
    let mut out = Report::new(Command::Certify);
    for sc in &exp.scenarios {
        let sim = simulate(sc).map_err(|e| match e {
            Error::AllTruncated { .. } => Error::Config(format!("scenario `{}`: {e}", sc.name)),
            other => other,
        })?;
        for mut row in bound_rows(sc) {
            row.verdict = judge(&row, &sim);
            if row.verdict != Verdict::NotSimulated {
                row.mc = Some(sim.summary.estimate());
            }
            out.bounds.push(row);
        }
        out.simulations.push(sim);
    }
    Ok(out)
}

fn scalar_only(sc: &Scenario, what: &str) -> Result<f64> {
    match sc.problem.spec.dim() {
        1 => Ok(sc.problem.mu()[0]),
        _ => Err(Error::Config(format!("scenario `{}`: {what} needs scalar increments", sc.name))),
    }
}

fn box_sampler(lo: Vec<f64>, hi: Vec<f64>) -> impl FnMut(&mut StreamRng) -> Vec<f64> {
    move |rng| lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect()
}

fn convex_mean(sc: &Scenario) -> Result<Outcome> {
    let n = sc.sim.n_runs;
    let seed = sc.sim.seed;
    if let Some((poly, lo, hi)) = &sc.convex_set {
        let mut raw = box_sampler(lo.clone(), hi.clone());
        let inside = poly.clone();
        let mut sampler = move |rng: &mut StreamRng| loop {
            let x = raw(rng);
            if inside.contains(&x) {
                return x;
            }
        };
        return Ok(validate_polytope_mean(poly, &mut sampler, n, seed));
    }
    let Some((lo, hi)) = sc.problem.profile.support() else {
        return Err(Error::Config(format!(
            "scenario `{}`: convex-mean needs bounded support or a `convex_set`",
            sc.name
        )));
    };
    let d = lo.len();
    let mut faces = Vec::with_capacity(2 * d);
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        faces.push((e.clone(), hi[k]));
        e[k] = -1.0;
        faces.push((e, -lo[k]));
    }
    let spec = sc.problem.spec.clone();
    let mut sampler = move |rng: &mut StreamRng| spec.sample(rng);
    Ok(validate_polytope_mean(&Polytope { faces }, &mut sampler, n, seed))
}

fn overshoot_check(sc: &Scenario, tag: ValidatorTag) -> Result<Outcome> {
    let (z, lam) = overshoot_inputs(sc)?;
    let (schedule, report, name) = match tag {
        ValidatorTag::LordenT6 => (Schedule::all_naturals(), lorden_t6(&sc.problem), "lorden-T6"),
        _ => (sc.problem.schedule.clone(), lorden_t7(&sc.problem), "lorden-T7"),
    };
    let (summary, _) = run_overshoot(z, lam, &schedule, &sc.sim)?;
    let bound = report
        .value
        .filter(|_| report.applicable())
        .ok_or_else(|| Error::Config(format!("scenario `{}`: {name} bound is not applicable here", sc.name)))?;
    Ok(validate_overshoot(name, summary.estimate(), bound, summary.n_runs))
}

/// Simulates the scenario's discrete rule once and reuses the records.
fn discrete_runs<'a>(sc: &Scenario, slot: &'a mut Option<Vec<RunRecord>>) -> Result<&'a [RunRecord]> {
    if slot.is_none() {
        let p = &sc.problem;
        *slot = Some(simulate_runs(&p.region, &p.spec, &p.schedule, &sc.sim)?);
    }
    Ok(slot.as_deref().unwrap_or_default())
}

pub fn run_validate(exp: &Experiment) -> Result<Report> {
    let mut out = Report::new(Command::Validate);
    for sc in &exp.scenarios {
        let p = &sc.problem;
        let mut records: Option<Vec<RunRecord>> = None;
        let mut outcomes: Vec<(ValidatorTag, Outcome)> = Vec::new();
        for &tag in &sc.validators {
            let g = &sc.validator_gfun;
            let found = match tag {
                ValidatorTag::ConvexMean => vec![convex_mean(sc)?],
                ValidatorTag::Perspective => vec![validate_perspective(g, sc.sim.n_runs, sc.sim.seed)],
                ValidatorTag::JensenT3 => {
                    scalar_only(sc, "jensen-T3")?;
                    let z = &p.spec.components()[0];
                    vec![validate_jensen(&sc.jensen_y, z, g, sc.sim.n_runs, sc.sim.seed)?]
                }
                ValidatorTag::WaldT4I => {
                    let recs = discrete_runs(sc, &mut records)?;
                    let mut v = validate_wald_identity(recs, p.mu());
                    if p.spec.dim() == 1 {
                        v.push(validate_wald_mean(recs, p.mu()[0], g));
                    }
                    v
                }
                ValidatorTag::WaldT4II => {
                    let mu = scalar_only(sc, "wald-T4-II")?;
                    let recs = discrete_runs(sc, &mut records)?;
                    vec![validate_wald_variance(recs, mu, p.profile.variance[0], g)]
                }
                ValidatorTag::LpNorm => {
                    let recs = discrete_runs(sc, &mut records)?;
                    [1.0, 2.0, 3.0]
                        .iter()
                        .flat_map(|&q| validate_lp_norm(recs, p.mu(), &p.profile.variance, q))
                        .collect()
                }
                ValidatorTag::LordenT6 | ValidatorTag::LordenT7 => vec![overshoot_check(sc, tag)?],
            };
            outcomes.extend(found.into_iter().map(|o| (tag, o)));
        }
        if let Some(recs) = &records {
            out.simulations.push(SimulationRecord {
                scenario: sc.name.clone(),
                process: Process::Discrete,
                summary: summarize_runs(recs, &sc.sim),
                discretization: None,
                config_hash: sc.config_hash.clone(),
            });
        }
        out.validators.extend(outcomes.into_iter().map(|(validator, outcome)| ValidatorRow {
            scenario: sc.name.clone(),
            validator,
            outcome,
            config_hash: sc.config_hash.clone(),
            seed: sc.sim.seed,
        }));
    }
    Ok(out)
}
