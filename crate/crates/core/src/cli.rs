//! Command-line driver: experiment specs, dispatch and tabular output.
//!
//! A run is described by an [`ExperimentSpec`], given either as flags of a
//! subcommand or as one `[[run]]` entry of a TOML experiment file. Every
//! command produces a table and a list of checks; tables are written as CSV
//! (15 significant digits) or as one JSON object with `spec`, `rows` and
//! `checks` keys.
//!
//! Exit status: 0 on success, 1 when a check fails, 2 for an invalid spec.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::asymptotics::{critical_limit, doubling_grid, subcritical_check, supercritical_check};
use crate::correspondence::{PayoffMode, StoppingLaw};
use crate::environment::{Environment, Summability};
use crate::error::{Error, Result};
use crate::inhomogeneous::{
    critical_gg, gg_closed_form, inhom_extinction, inverse_square_rate, trinomial_environment,
};
use crate::offspring::{Criticality, Family, OffspringLaw};
use crate::prophet::{closed_form, max_correspondence, prophet_bounds, prophet_value, ProphetMode};
use crate::report::{all_pass, Check};
use crate::simulation::{simulate, SimulationConfig, DEFAULT_POP_CAP};
use crate::stopping::{evaluate_rule_mc, value_iid_sequence, value_sequence};
use crate::verify::verify_all;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILURE: i32 = 1;
pub const EXIT_INVALID_SPEC: i32 = 2;

/// Significant digits in CSV and JSON output.
pub const SIGNIFICANT_DIGITS: usize = 15;
/// Horizon of the generated environments used by `inhomogeneous`.
const ENVIRONMENT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Extinction,
    Correspond,
    StoppingValue,
    Simulate,
    Asymptotics,
    Inhomogeneous,
    Prophet,
    VerifyAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Bernoulli,
    Mbernoulli,
    Poisson,
    /// Generalized geometric, parameters `b` and `c`.
    Gg,
    Geometric,
    Slack,
    Pmf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentName {
    /// The law given by the family flags in every generation.
    Homogeneous,
    /// Trinomial laws with `r_i = 1 / (i + 1)^2`.
    InverseSquare,
    /// Trinomial laws with constant `r`.
    Constant,
    /// Critical generalized geometric laws with the listed `c_i`.
    CriticalGg,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// One experiment. Fields a command does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub command: CommandName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pop_cap: Option<u64>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(command: CommandName) -> Self {
        ExperimentSpec {
            command,
            family: None,
            p: None,
            m: None,
            lambda: None,
            b: None,
            c: None,
            alpha: None,
            pmf: None,
            environment: None,
            r: None,
            c_list: None,
            n: None,
            points: None,
            trials: None,
            seed: None,
            pop_cap: None,
            format: OutputFormat::Csv,
            output: None,
        }
    }

    /// Sets the family flags from a law.
    pub fn with_law(mut self, law: &OffspringLaw) -> Self {
        match law.family() {
            Family::Bernoulli { p } => {
                self.family = Some(FamilyName::Bernoulli);
                self.p = Some(*p);
            }
            Family::MBernoulli { m, p } => {
                self.family = Some(FamilyName::Mbernoulli);
                self.m = Some(*m);
                self.p = Some(*p);
            }
            Family::Poisson { lambda } => {
                self.family = Some(FamilyName::Poisson);
                self.lambda = Some(*lambda);
            }
            Family::GeneralizedGeometric { b, c } => {
                self.family = Some(FamilyName::Gg);
                self.b = Some(*b);
                self.c = Some(*c);
            }
            Family::Slack { alpha, c } => {
                self.family = Some(FamilyName::Slack);
                self.alpha = Some(*alpha);
                self.c = Some(*c);
            }
            Family::ExplicitPmf { pmf } => {
                self.family = Some(FamilyName::Pmf);
                self.pmf = Some(pmf.clone());
            }
        }
        self
    }

    pub fn with_horizon(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = Some(trials);
        self
    }

    pub fn with_format(mut self, format: OutputFormat) -> Self {
        self.format = format;
        self
    }

    /// The offspring law named by the family flags.
    pub fn law(&self) -> Result<OffspringLaw> {
        let family = self
            .family
            .ok_or_else(|| Error::Spec("this command needs --family".into()))?;
        let need = |v: Option<f64>, flag: &str| {
            v.ok_or_else(|| Error::Spec(format!("family {family:?} needs --{flag}")))
        };
        match family {
            FamilyName::Bernoulli => OffspringLaw::bernoulli(need(self.p, "p")?),
            FamilyName::Mbernoulli => {
                let m = self
                    .m
                    .ok_or_else(|| Error::Spec("family mbernoulli needs --m".into()))?;
                OffspringLaw::mbernoulli(m, need(self.p, "p")?)
            }
            FamilyName::Poisson => OffspringLaw::poisson(need(self.lambda, "lambda")?),
            FamilyName::Gg => {
                OffspringLaw::generalized_geometric(need(self.b, "b")?, need(self.c, "c")?)
            }
            FamilyName::Geometric => OffspringLaw::geometric(need(self.p, "p")?),
            FamilyName::Slack => OffspringLaw::slack(need(self.alpha, "alpha")?, need(self.c, "c")?),
            FamilyName::Pmf => {
                let pmf = self
                    .pmf
                    .clone()
                    .ok_or_else(|| Error::Spec("family pmf needs --pmf".into()))?;
                OffspringLaw::from_pmf(pmf)
            }
        }
    }

    /// The environment for `simulate` and `inhomogeneous`.
    pub fn environment(&self) -> Result<Environment> {
        let name = self.environment.unwrap_or(if self.c_list.is_some() {
            EnvironmentName::CriticalGg
        } else {
            EnvironmentName::Homogeneous
        });
        match name {
            EnvironmentName::Homogeneous => Ok(Environment::homogeneous(self.law()?)),
            EnvironmentName::InverseSquare => Ok(trinomial_environment(
                inverse_square_rate,
                ENVIRONMENT_CAP,
                Summability::Convergent,
            )),
            EnvironmentName::Constant => {
                let r = self
                    .r
                    .ok_or_else(|| Error::Spec("environment constant needs --r".into()))?;
                crate::inhomogeneous::trinomial_law(r)?;
                Ok(trinomial_environment(move |_| r, ENVIRONMENT_CAP, Summability::Divergent))
            }
            EnvironmentName::CriticalGg => {
                let c = self
                    .c_list
                    .as_ref()
                    .ok_or_else(|| Error::Spec("environment critical-gg needs --c-list".into()))?;
                let laws = c.iter().map(|&ci| critical_gg(ci)).collect::<Result<Vec<_>>>()?;
                Environment::finite(laws)
            }
        }
    }

    fn horizon(&self, default: usize) -> Result<usize> {
        match self.n {
            Some(0) => Err(Error::Spec("--n must be at least 1".into())),
            Some(n) => Ok(n),
            None => Ok(default),
        }
    }

    fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Spec(format!("{:?} is stochastic and needs --seed", self.command)))
    }

    fn trials(&self) -> Result<u64> {
        match self.trials {
            Some(0) => Err(Error::Spec("--trials must be at least 1".into())),
            Some(t) => Ok(t),
            None => Err(Error::Spec(format!("{:?} needs --trials", self.command))),
        }
    }

    /// Checks parameters and seeds before anything runs.
    pub fn validate(&self) -> Result<()> {
        match self.command {
            CommandName::Extinction
            | CommandName::Correspond
            | CommandName::StoppingValue
            | CommandName::Asymptotics
            | CommandName::Prophet => {
                self.law()?;
            }
            CommandName::Simulate => {
                self.environment()?;
                self.trials()?;
                self.seed()?;
            }
            CommandName::Inhomogeneous => {
                self.environment()?;
            }
            CommandName::VerifyAll => {
                self.seed()?;
            }
        }
        if self.trials.is_some() {
            self.trials()?;
            self.seed()?;
        }
        if self.n == Some(0) {
            return Err(Error::Spec("--n must be at least 1".into()));
        }
        Ok(())
    }
}

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format_number(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Num(v) => serde_json::Number::from_f64(round_significant(*v))
                .map_or(Value::Null, Value::Number),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Plain decimal text of `x` rounded to 15 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{}", round_significant(x))
    }
}

/// Output of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub checks: Vec<Check>,
}

impl Report {
    fn new(spec: &ExperimentSpec, header: Vec<&'static str>) -> Self {
        Report {
            spec: spec.clone(),
            header,
            rows: Vec::new(),
            checks: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn passed(&self) -> bool {
        all_pass(&self.checks)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// Column `name` as numbers; empty and non-numeric cells become NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| *h == name)?;
        Some(
            self.rows
                .iter()
                .map(|row| match &row[idx] {
                    Cell::Num(v) => *v,
                    Cell::Int(v) => *v as f64,
                    _ => f64::NAN,
                })
                .collect(),
        )
    }

    pub fn render(&self, format: OutputFormat) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        match format {
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(&mut out);
                let io = |e: csv::Error| Error::Io(e.to_string());
                w.write_record(&self.header).map_err(io)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
                }
                w.flush()?;
            }
            OutputFormat::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let mut obj = Map::new();
                        for (h, cell) in self.header.iter().zip(row) {
                            obj.insert((*h).to_string(), cell.json());
                        }
                        Value::Object(obj)
                    })
                    .collect();
                let mut top = Map::new();
                top.insert(
                    "spec".into(),
                    serde_json::to_value(&self.spec).map_err(|e| Error::Io(e.to_string()))?,
                );
                top.insert("rows".into(), Value::Array(rows));
                top.insert(
                    "checks".into(),
                    serde_json::to_value(&self.checks).map_err(|e| Error::Io(e.to_string()))?,
                );
                serde_json::to_writer_pretty(&mut out, &Value::Object(top))
                    .map_err(|e| Error::Io(e.to_string()))?;
                out.push(b'\n');
            }
        }
        Ok(out)
    }
}

/// Validates `spec` and runs it.
pub fn run(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    match spec.command {
        CommandName::Extinction => extinction(spec),
        CommandName::Correspond => correspond(spec),
        CommandName::StoppingValue => stopping_value(spec),
        CommandName::Simulate => simulation(spec),
        CommandName::Asymptotics => asymptotics(spec),
        CommandName::Inhomogeneous => inhomogeneous(spec),
        CommandName::Prophet => prophet(spec),
        CommandName::VerifyAll => {
            let mut report = Report::new(spec, vec!["check", "pass", "detail"]);
            report.checks = verify_all(spec.seed()?)?;
            report.rows = report
                .checks
                .iter()
                .map(|c| vec![Cell::Text(c.name.clone()), Cell::Bool(c.pass), Cell::Text(c.detail.clone())])
                .collect();
            Ok(report)
        }
    }
}

fn extinction(spec: &ExperimentSpec) -> Result<Report> {
    let law = spec.law()?;
    let mut report = Report::new(spec, vec!["n", "q_n"]);
    for (i, q) in law.extinction_sequence(spec.horizon(10)?).into_iter().enumerate() {
        report.push(vec![(i + 1).into(), q.into()]);
    }
    Ok(report)
}

fn correspond(spec: &ExperimentSpec) -> Result<Report> {
    let law = spec.law()?;
    let x = StoppingLaw::from_offspring(&law);
    let points = spec.points.unwrap_or(11).max(2);
    let mut report = Report::new(spec, vec!["x", "cdf", "h_closed_form", "h_quadrature"]);
    let mut worst: f64 = 0.0;
    let mut above_pi_exact = true;
    for k in 0..points {
        let a = k as f64 / (points - 1) as f64;
        let closed = x.payoff_h(a, PayoffMode::ClosedForm)?;
        let quad = x.payoff_h(a, PayoffMode::Quadrature)?;
        if a <= x.upper_support() {
            worst = worst.max((closed - quad).abs());
        } else {
            above_pi_exact &= quad == a;
        }
        report.push(vec![a.into(), x.cdf(a).into(), closed.into(), quad.into()]);
    }
    let mass = x.total_mass();
    report.checks = vec![
        Check::new(
            "total mass is one",
            (mass - 1.0).abs() <= 1e-10,
            format!("atoms {} + {} and density, total {mass}", x.atom_at_zero(), x.atom_at_pi()),
        ),
        Check::new(
            "payoff paths agree on [0, pi]",
            worst < 1e-9,
            format!("pi = {}, max difference {worst:.3e}", x.upper_support()),
        ),
        Check::new("payoff is the identity above pi", above_pi_exact, String::new()),
    ];
    Ok(report)
}

fn stopping_value(spec: &ExperimentSpec) -> Result<Report> {
    let law = spec.law()?;
    let n = spec.horizon(20)?;
    let x = StoppingLaw::from_offspring(&law);
    let v = value_iid_sequence(&x, n, PayoffMode::Quadrature)?;
    let q = law.extinction_sequence(n);
    let mut report = Report::new(spec, vec!["n", "v_n", "q_n", "abs_diff"]);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let diff = (v[i] - q[i]).abs();
        worst = worst.max(diff);
        report.push(vec![(i + 1).into(), v[i].into(), q[i].into(), diff.into()]);
    }
    report.checks.push(Check::new(
        "quadrature value equals extinction probability",
        worst < 1e-8,
        format!("max difference {worst:.3e}"),
    ));
    if spec.trials.is_some() {
        let laws = vec![x; n];
        let seq = value_sequence(&laws, PayoffMode::ClosedForm)?;
        let est = evaluate_rule_mc(&laws, &seq.optimal_rule(), spec.trials()?, spec.seed()?)?;
        report.checks.push(Check::new(
            "simulated optimal rule matches the value",
            est.within(seq.value(), 4.0),
            format!("estimate {} +/- {} vs {}", est.mean, est.std_error, seq.value()),
        ));
    }
    Ok(report)
}

fn simulation(spec: &ExperimentSpec) -> Result<Report> {
    let env = spec.environment()?;
    let n = spec.horizon(10)?;
    let config = SimulationConfig::new(n, spec.trials()?, spec.seed()?)
        .with_pop_cap(spec.pop_cap.unwrap_or(DEFAULT_POP_CAP));
    let result = simulate(&env, &config)?;
    let mut report = Report::new(
        spec,
        vec![
            "n",
            "extinct",
            "frequency",
            "std_error",
            "q_n",
            "mean_population",
            "expected_size",
        ],
    );
    let mut outside = Vec::new();
    for i in 1..=n {
        let q = env.extinction(i)?;
        if !result.agrees_with(i, q, 4.0) {
            outside.push(i);
        }
        report.push(vec![
            i.into(),
            result.extinct[i - 1].into(),
            result.extinction_frequency(i).into(),
            result.standard_error(i).into(),
            q.into(),
            result.mean_population(i).into(),
            env.expected_size(i)?.into(),
        ]);
    }
    report.checks.push(Check::new(
        "extinction frequencies within 4 standard errors",
        outside.is_empty(),
        format!("outside: {outside:?}; cap hits {}", result.cap_hits()),
    ));
    Ok(report)
}

fn asymptotics(spec: &ExperimentSpec) -> Result<Report> {
    let law = spec.law()?;
    let rates = match law.criticality() {
        Criticality::Supercritical => supercritical_check(&law, spec.horizon(50)?)?,
        Criticality::Subcritical => subcritical_check(&law, spec.horizon(50)?)?,
        Criticality::Critical => {
            critical_limit(&law, &doubling_grid(100.min(spec.horizon(10_000)?), spec.horizon(10_000)?))?
        }
    };
    let mut report = Report::new(spec, vec!["n", "q_n", "statistic", "reference", "pass"]);
    for row in &rates.rows {
        report.push(vec![
            row.n.into(),
            row.q_n.into(),
            row.statistic.into(),
            row.reference.into(),
            row.pass.into(),
        ]);
    }
    report.checks = rates.checks;
    Ok(report)
}

fn inhomogeneous(spec: &ExperimentSpec) -> Result<Report> {
    let env = spec.environment()?;
    let n = spec.horizon(match env.horizon() {
        Some(h) if h < 20 => h,
        _ => 20,
    })?;
    let c_list = if spec.environment == Some(EnvironmentName::CriticalGg)
        || (spec.environment.is_none() && spec.c_list.is_some())
    {
        spec.c_list.clone()
    } else {
        None
    };
    let mut report = Report::new(spec, vec!["n", "q_n", "payoff_path", "closed_form"]);
    let mut disagreements = Vec::new();
    let mut closed_worst: f64 = 0.0;
    for i in 1..=n {
        let r = inhom_extinction(&env, i)?;
        if r.agreement == Some(false) {
            disagreements.push(i);
        }
        let closed = match &c_list {
            Some(c) => {
                let v = gg_closed_form(&c[..i])?.extinction;
                closed_worst = closed_worst.max((v - r.extinction).abs());
                Some(v)
            }
            None => None,
        };
        report.push(vec![i.into(), r.extinction.into(), r.payoff_path.into(), closed.into()]);
    }
    report.checks.push(Check::new(
        "payoff path agrees where fixed points are ordered",
        disagreements.is_empty(),
        format!("disagreements at {disagreements:?}"),
    ));
    if c_list.is_some() {
        report.checks.push(Check::new(
            "closed form equals composition",
            closed_worst < 1e-10,
            format!("max difference {closed_worst:.3e}"),
        ));
    }
    Ok(report)
}

fn prophet(spec: &ExperimentSpec) -> Result<Report> {
    let law = spec.law()?;
    let n = spec.horizon(10)?;
    let x = StoppingLaw::from_offspring(&law);
    let corresponds = law.criticality() != Criticality::Supercritical;
    let mut report = Report::new(
        spec,
        vec!["n", "prophet_value", "v_n", "lower", "upper", "p0_star", "closed_form"],
    );
    let mut strict = true;
    let mut worst_star: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    for i in 1..=n {
        let laws = vec![x.clone(); i];
        let b = prophet_bounds(&laws)?;
        strict &= b.prophet_value < 2.0 * b.value;
        let star = if corresponds {
            let s = max_correspondence(&law, i)?.p0;
            worst_star = worst_star.max((s - b.prophet_value).abs());
            Some(s)
        } else {
            None
        };
        let closed = match law.family() {
            Family::MBernoulli { m, p } if corresponds => Some(closed_form::mbernoulli(*m, *p, i as u32)),
            Family::Poisson { lambda } if corresponds => Some(closed_form::poisson(*lambda, i as u32)),
            // geometric laws g = q / (1 - p x) are GG(pq, p)
            Family::GeneralizedGeometric { b, c } if corresponds && (b - c * (1.0 - c)).abs() < 1e-15 => {
                Some(closed_form::geometric(*c, i as u32))
            }
            _ => None,
        };
        if let (Some(s), Some(c)) = (star, closed) {
            worst_closed = worst_closed.max((s - c).abs());
        }
        report.push(vec![
            i.into(),
            b.prophet_value.into(),
            b.value.into(),
            b.lower.into(),
            b.upper.into(),
            star.into(),
            closed.into(),
        ]);
    }
    report.checks.push(Check::new(
        "prophet value below twice the stopping value",
        strict,
        String::new(),
    ));
    if corresponds {
        report.checks.push(Check::new(
            "expected maximum equals P(Y* = 0)",
            worst_star < 1e-9,
            format!("max difference {worst_star:.3e}"),
        ));
        report.checks.push(Check::new(
            "closed form equals P(Y* = 0)",
            worst_closed < 1e-9,
            format!("max difference {worst_closed:.3e}"),
        ));
    }
    if spec.trials.is_some() {
        let laws = vec![x; n];
        let analytic = prophet_value(&laws, ProphetMode::Analytic)?.mean;
        let mc = prophet_value(
            &laws,
            ProphetMode::MonteCarlo {
                trials: spec.trials()?,
                seed: spec.seed()?,
            },
        )?;
        report.checks.push(Check::new(
            "simulated maximum matches the prophet value",
            mc.within(analytic, 4.0),
            format!("estimate {} +/- {} vs {analytic}", mc.mean, mc.std_error),
        ));
    }
    Ok(report)
}

/// Runs `spec` and writes its report to `spec.output`, or to `stdout`
/// when no output path is set. Returns the exit status.
pub fn execute(spec: &ExperimentSpec, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let report = match run(spec) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code_for(&e);
        }
    };
    let bytes = match report.render(spec.format) {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INVALID_SPEC;
        }
    };
    let written = match &spec.output {
        Some(path) => write_file(path, &bytes),
        None => stdout.write_all(&bytes).map_err(Error::from),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_INVALID_SPEC;
    }
    let failures = report.failures();
    for f in &failures {
        let _ = writeln!(stderr, "FAIL {}: {}", f.name, f.detail);
    }
    if failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_VERIFICATION_FAILURE
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::CrossCheck(_) => EXIT_VERIFICATION_FAILURE,
        _ => EXIT_INVALID_SPEC,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// A TOML experiment file: a list of `[[run]]` tables, each an
/// [`ExperimentSpec`]. Relative output paths resolve against the
/// directory of the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub run: Vec<ExperimentSpec>,
}

impl ExperimentFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut file: ExperimentFile =
            toml::from_str(&text).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for spec in &mut file.run {
            if let Some(out) = &spec.output {
                if out.is_relative() {
                    spec.output = Some(base.join(out));
                }
            }
        }
        Ok(file)
    }
}

/// Runs every entry of an experiment file. The status is the worst of the
/// individual statuses: an invalid spec outranks a failed check.
pub fn execute_file(path: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let file = match ExperimentFile::load(path) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INVALID_SPEC;
        }
    };
    file.run
        .iter()
        .map(|spec| execute(spec, stdout, stderr))
        .max()
        .unwrap_or(EXIT_OK)
}

#[derive(Debug, Parser)]
#[command(
    name = "branchstop",
    version,
    about = "Extinction probabilities of branching processes and optimal stopping values"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Extinction probabilities q_1, ..., q_n
    Extinction(SpecArgs),
    /// The stopping law of an offspring law: CDF and payoff on a grid
    Correspond(SpecArgs),
    /// Optimal stopping values against extinction probabilities
    StoppingValue(SpecArgs),
    /// Monte Carlo populations against analytic extinction
    Simulate(SpecArgs),
    /// Convergence rates of q_n in the law's regime
    Asymptotics(SpecArgs),
    /// Varying environments
    Inhomogeneous(SpecArgs),
    /// Prophet values and the maximum correspondence
    Prophet(SpecArgs),
    /// The full cross-check matrix
    VerifyAll(SpecArgs),
    /// Every run of a TOML experiment file
    Run {
        /// Path to the experiment file
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SpecArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyName>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated probabilities p_0, p_1, ...
    #[arg(long, value_delimiter = ',')]
    pmf: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    environment: Option<EnvironmentName>,
    #[arg(long)]
    r: Option<f64>,
    /// Comma-separated c_1, c_2, ... of critical GG laws
    #[arg(long, value_delimiter = ',')]
    c_list: Option<Vec<f64>>,
    /// Horizon
    #[arg(long)]
    n: Option<usize>,
    /// Grid points for `correspond`
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pop_cap: Option<u64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl SpecArgs {
    fn into_spec(self, command: CommandName) -> ExperimentSpec {
        ExperimentSpec {
            command,
            family: self.family,
            p: self.p,
            m: self.m,
            lambda: self.lambda,
            b: self.b,
            c: self.c,
            alpha: self.alpha,
            pmf: self.pmf,
            environment: self.environment,
            r: self.r,
            c_list: self.c_list,
            n: self.n,
            points: self.points,
            trials: self.trials,
            seed: self.seed,
            pop_cap: self.pop_cap,
            format: self.format,
            output: self.output,
        }
    }
}

/// Entry point of the `branchstop` binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_SPEC } else { EXIT_OK };
        }
    };
    let mut stdout = io::stdout().lock();
    let mut stderr = io::stderr().lock();
    let (command, args) = match cli.command {
        CliCommand::Run { config } => return execute_file(&config, &mut stdout, &mut stderr),
        CliCommand::Extinction(a) => (CommandName::Extinction, a),
        CliCommand::Correspond(a) => (CommandName::Correspond, a),
        CliCommand::StoppingValue(a) => (CommandName::StoppingValue, a),
        CliCommand::Simulate(a) => (CommandName::Simulate, a),
        CliCommand::Asymptotics(a) => (CommandName::Asymptotics, a),
        CliCommand::Inhomogeneous(a) => (CommandName::Inhomogeneous, a),
        CliCommand::Prophet(a) => (CommandName::Prophet, a),
        CliCommand::VerifyAll(a) => (CommandName::VerifyAll, a),
    };
    execute(&args.into_spec(command), &mut stdout, &mut stderr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(spec: &ExperimentSpec) -> String {
        String::from_utf8(run(spec).unwrap().render(spec.format).unwrap()).unwrap()
    }

    #[test]
    fn extinction_rows() {
        let spec = ExperimentSpec::new(CommandName::Extinction)
            .with_law(&OffspringLaw::mbernoulli(2, 0.5).unwrap())
            .with_horizon(3);
        assert_eq!(render(&spec), "n,q_n\n1,0.5\n2,0.625\n3,0.6953125\n");
    }

    #[test]
    fn numbers_keep_fifteen_digits() {
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333333");
        assert_eq!(format_number(2.0), "2");
        assert_eq!(format_number(1.5e-20), "0.000000000000000000015");
        assert_eq!(format_number(f64::NAN), "NaN");
    }

    #[test]
    fn json_has_three_keys() {
        let spec = ExperimentSpec::new(CommandName::Extinction)
            .with_law(&OffspringLaw::bernoulli(0.5).unwrap())
            .with_horizon(2)
            .with_format(OutputFormat::Json);
        let v: Value = serde_json::from_str(&render(&spec)).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, vec!["spec", "rows", "checks"]);
        assert_eq!(v["rows"][1]["q_n"], Value::from(0.75));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = ExperimentSpec::new(CommandName::Extinction);
        assert!(matches!(run(&spec), Err(Error::Spec(_))));
        spec.family = Some(FamilyName::Poisson);
        spec.lambda = Some(-1.0);
        assert!(run(&spec).is_err());
        let sim = ExperimentSpec::new(CommandName::Simulate)
            .with_law(&OffspringLaw::poisson(1.0).unwrap())
            .with_trials(10);
        assert!(matches!(sim.validate(), Err(Error::Spec(_))));
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(execute(&sim, &mut out, &mut err), EXIT_INVALID_SPEC);
    }

    #[test]
    fn prophet_matches_poisson_formula() {
        let spec = ExperimentSpec::new(CommandName::Prophet)
            .with_law(&OffspringLaw::poisson(0.8).unwrap())
            .with_horizon(5);
        let report = run(&spec).unwrap();
        assert!(report.passed(), "{:?}", report.failures());
        let star = report.column("p0_star").unwrap();
        assert!((star[4] - closed_form::poisson(0.8, 5)).abs() < 1e-12);
    }

    #[test]
    fn experiment_file_round_trip() {
        let text = r#"
            [[run]]
            command = "extinction"
            family = "mbernoulli"
            m = 2
            p = 0.5
            n = 3

            [[run]]
            command = "asymptotics"
            family = "poisson"
            lambda = 2.0
            n = 20
            format = "json"
        "#;
        let file: ExperimentFile = toml::from_str(text).unwrap();
        assert_eq!(file.run.len(), 2);
        for spec in &file.run {
            assert!(run(spec).unwrap().passed());
        }
        assert!(toml::from_str::<ExperimentFile>("[[run]]\ncommand = \"extinction\"\nbogus = 1\n").is_err());
    }
}
