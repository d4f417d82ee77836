//! One function per subcommand. Each reads its inputs, writes its output
//! and reports failure through [`CliError`].

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use eor_core::metrics::{calibration_curve, platt_fit, Binning, CalibrationCurve, CALIBRATION_BINS};
use eor_core::optim::{dual_certificate, rank_aggregation_exposure, verify_certificate, CertificateReport};
use eor_core::policies::{eor_ranking, prr_ranking};
use eor_core::rng::derive_seed;
use eor_core::synth::{score_policy, Level, RunOptions, Scenario, TABLE_POLICIES};
use eor_core::{CandidatePool, Error, Mode, PolicyKind, PolicySpec, Ranking};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::io::{emit, json_bytes, load_logged, load_pool, round_num, sanitize_names, Cell, Format, Table};

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; each subcommand has its own default.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl OutputArgs {
    fn write_table(&self, table: &Table, default: Format) -> CliResult<()> {
        emit(self.out.as_deref(), &table.render(self.format.unwrap_or(default))?)
    }
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// eor, prp, dp, prr, uniform, ts, fairstar, exp or ra.
    #[arg(long, default_value = "eor")]
    pub policy: PolicyKind,
    /// Seed for stochastic policies.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// FA*IR significance level.
    #[arg(long, default_value_t = PolicySpec::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Protected group for prr and fairstar, by name or index (default: second group).
    #[arg(long)]
    pub protected: Option<String>,
    /// Exposure-ratio target for ra.
    #[arg(long, default_value_t = PolicySpec::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Emit only the top k.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Last prefix to report.
    #[arg(long)]
    pub k: Option<usize>,
    /// Group relevance from probabilities or from labels.
    #[arg(long, default_value = "probs")]
    pub mode: Mode,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Logged rankings: query_id,position,id,group,prob[,label].
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "probs")]
    pub mode: Mode,
    /// Group order for the signed two-group δ, e.g. `A,B`; otherwise
    /// groups are numbered by first appearance in the file.
    #[arg(long, value_delimiter = ',')]
    pub groups: Vec<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Prefix to certify; every prefix when omitted.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Comma-separated policies (default: the eight table policies).
    #[arg(long, value_delimiter = ',')]
    pub policies: Vec<PolicyKind>,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = PolicySpec::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = PolicySpec::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Protected group, by name or index.
    #[arg(long)]
    pub protected: Option<String>,
}

impl ScenarioArgs {
    fn policies(&self) -> Vec<PolicyKind> {
        if self.policies.is_empty() {
            TABLE_POLICIES.to_vec()
        } else {
            self.policies.clone()
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// high, medium or low.
    #[arg(long)]
    pub scenario: Level,
    #[command(flatten)]
    pub params: ScenarioArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["scenario", "input"]))]
pub struct CompareArgs {
    /// Synthetic level: high, medium or low.
    #[arg(long)]
    pub scenario: Option<Level>,
    /// A single pool to compare the policies on.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Relevance mode for --input.
    #[arg(long, default_value = "probs")]
    pub mode: Mode,
    #[command(flatten)]
    pub params: ScenarioArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BinningArg {
    EqualCount,
    EqualWidth,
}

impl From<BinningArg> for Binning {
    fn from(b: BinningArg) -> Self {
        match b {
            BinningArg::EqualCount => Binning::EqualCount,
            BinningArg::EqualWidth => Binning::EqualWidth,
        }
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Labeled pool; prob is the score to recalibrate.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = CALIBRATION_BINS)]
    pub bins: usize,
    #[arg(long, value_enum, default_value = "equal-count")]
    pub binning: BinningArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Group index from a name, falling back to a numeric index.
fn resolve_group(names: &[String], raw: &str) -> CliResult<usize> {
    if let Some(g) = names.iter().position(|n| n == raw) {
        return Ok(g);
    }
    match raw.parse::<usize>() {
        Ok(g) if g < names.len() => Ok(g),
        _ => Err(CliError::Semantic(format!(
            "protected group {raw:?} is not one of {}",
            names.join(", ")
        ))),
    }
}

fn policy_spec(pool: &CandidatePool, args: &PolicyArgs) -> CliResult<PolicySpec> {
    let mut spec = PolicySpec::new(args.policy)
        .with_seed(args.seed)
        .with_alpha(args.alpha)
        .with_threshold(args.threshold);
    if let Some(raw) = &args.protected {
        spec = spec.with_protected(resolve_group(pool.group_names(), raw)?);
    }
    spec.validate(pool)?;
    Ok(spec)
}

fn check_k(k: Option<usize>, n: usize) -> CliResult<usize> {
    match k {
        None => Ok(n),
        Some(k) if (1..=n).contains(&k) => Ok(k),
        Some(k) => Err(CliError::Semantic(format!("--k must lie in 1..={n}, got {k}"))),
    }
}

fn warn(msg: &str) {
    eprintln!("eor: warning: {msg}");
}

/// The policy's ranking, with a warning when a quota or exposure target
/// could not be met.
fn produce_ranking(pool: &CandidatePool, spec: &PolicySpec) -> CliResult<Ranking> {
    match spec.kind {
        PolicyKind::Prr => {
            let out = prr_ranking(pool, spec.protected_group())?;
            if out.violated {
                warn("the protected queue ran out while its quota was binding");
            }
            Ok(out.ranking)
        }
        PolicyKind::Ra => {
            let out = rank_aggregation_exposure(pool, spec.threshold)?;
            if out.best_effort {
                warn(&format!(
                    "exposure ratio {} is below the target {}",
                    crate::io::fmt_num(out.ratio),
                    spec.threshold
                ));
            }
            Ok(out.ranking)
        }
        _ => Ok(spec.rank(pool)?),
    }
}

pub fn rank(args: &RankArgs) -> CliResult<()> {
    let pool = load_pool(&args.input)?;
    let spec = policy_spec(&pool, &args.policy)?;
    let k = check_k(args.k, pool.len())?;
    let ranking = produce_ranking(&pool, &spec)?;
    let mut table = Table::new(["rank", "id", "group", "prob"]);
    for (pos, &i) in ranking.as_slice()[..k].iter().enumerate() {
        table.push(vec![
            (pos + 1).into(),
            pool.id(i).into(),
            pool.group_name(pool.group_of(i)).into(),
            pool.prob(i).into(),
        ]);
    }
    args.output.write_table(&table, Format::Csv)
}

pub fn trace(args: &TraceArgs) -> CliResult<()> {
    let pool = load_pool(&args.input)?;
    let spec = policy_spec(&pool, &args.policy)?;
    let k_max = check_k(args.k, pool.len())?;
    let rel = pool.relevance(args.mode)?;
    let ranking = produce_ranking(&pool, &spec)?;
    let trace = rel.trace(&ranking)?;

    let mut headers: Vec<String> = ["k", "id", "group", "delta", "total_cost"].map(String::from).to_vec();
    headers.extend(sanitize_names(pool.group_names()).into_iter().map(|g| format!("cost_{g}")));
    let mut table = Table::new(headers);
    for k in 1..=k_max {
        let i = ranking.as_slice()[k - 1];
        let mut row: Vec<Cell> = vec![
            k.into(),
            pool.id(i).into(),
            pool.group_name(pool.group_of(i)).into(),
            trace.delta(k).into(),
            trace.total_cost(k).into(),
        ];
        row.extend((0..pool.group_count()).map(|g| Cell::from(trace.group_cost(k, g))));
        table.push(row);
    }
    args.output.write_table(&table, Format::Csv)
}

/// δ at `k = 1..=n`.
fn delta_curve(pool: &CandidatePool, mode: Mode, ranking: &Ranking) -> CliResult<Vec<f64>> {
    let trace = pool.relevance(mode)?.trace(ranking)?;
    Ok(trace.deltas().to_vec())
}

/// Mean of `|curve[k]|` over the curves long enough to reach `k`.
fn mean_abs(curves: &[Vec<f64>], len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| {
            let vals: Vec<f64> = curves.iter().filter_map(|c| c.get(k)).map(|d| d.abs()).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect()
}

pub fn audit(args: &AuditArgs) -> CliResult<()> {
    let queries = load_logged(&args.input, &args.groups)?;
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for q in &queries {
        match q.pool.relevance(args.mode) {
            Ok(_) => {}
            Err(e @ (Error::EmptyGroup { .. } | Error::DegenerateRelevance { .. })) => {
                warn(&format!("query {:?} skipped: {e}", q.query_id));
                skipped.push(q.query_id.clone());
                continue;
            }
            Err(e) => return Err(e.into()),
        }
        let logged = delta_curve(&q.pool, args.mode, &Ranking::identity(q.pool.len()))?;
        let eor = delta_curve(&q.pool, args.mode, &eor_ranking(&q.pool)?)?;
        kept.push((q.query_id.clone(), logged, eor));
    }
    if kept.is_empty() {
        return Err(CliError::Semantic(
            "no query has every group with positive expected relevance".into(),
        ));
    }

    let len = kept.iter().map(|(_, l, _)| l.len()).max().unwrap_or(0);
    let logged: Vec<Vec<f64>> = kept.iter().map(|(_, l, _)| l.clone()).collect();
    let eor: Vec<Vec<f64>> = kept.iter().map(|(_, _, e)| e.clone()).collect();
    let mean_logged = mean_abs(&logged, len);
    let mean_eor = mean_abs(&eor, len);
    let counts: Vec<usize> = (0..len).map(|k| logged.iter().filter(|c| c.len() > k).count()).collect();

    match args.output.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let mut table = Table::new(["k", "queries", "mean_abs_delta_logged", "mean_abs_delta_eor"]);
            for k in 0..len {
                table.push(vec![(k + 1).into(), counts[k].into(), mean_logged[k].into(), mean_eor[k].into()]);
            }
            emit(args.output.out.as_deref(), &table.to_csv()?)
        }
        Format::Json => {
            let nums = |v: &[f64]| v.iter().map(|&x| round_num(x)).collect::<Vec<f64>>();
            let per_query: Vec<Value> = kept
                .iter()
                .map(|(id, l, e)| json!({"query_id": id, "delta_logged": nums(l), "delta_eor": nums(e)}))
                .collect();
            let report = json!({
                "query_count": kept.len(),
                "skipped_queries": skipped,
                "queries_at_k": counts,
                "mean_abs_delta_logged": nums(&mean_logged),
                "mean_abs_delta_eor": nums(&mean_eor),
                "queries": per_query,
            });
            emit(args.output.out.as_deref(), &json_bytes(&report)?)
        }
    }
}

const REPORT_COLUMNS: [&str; 20] = [
    "k",
    "delta",
    "phi",
    "bound",
    "gap",
    "lp_value",
    "ilp_value",
    "eor_value",
    "feasible",
    "residual_max",
    "dual_objective",
    "min_dual",
    "max_lambda_prime_unselected",
    "weak_duality",
    "gap_nonnegative",
    "gap_within_pair_bound",
    "gap_within_bound",
    "sandwich",
    "cost_gap_within_bound",
    "passed",
];

fn report_row(r: &CertificateReport) -> Vec<Cell> {
    vec![
        r.k.into(),
        r.delta.into(),
        r.phi.into(),
        r.bound.into(),
        r.gap.into(),
        r.lp_value.into(),
        r.ilp_value.into(),
        r.eor_value.into(),
        r.feasible.into(),
        r.residual_max.into(),
        r.dual_objective.into(),
        r.min_dual.into(),
        r.max_lambda_prime_unselected.into(),
        r.weak_duality.into(),
        r.gap_nonnegative.into(),
        r.gap_within_pair_bound.into(),
        r.gap_within_bound.into(),
        r.sandwich.into(),
        r.cost_gap_within_bound.into(),
        r.passed().into(),
    ]
}

pub fn verify(args: &VerifyArgs) -> CliResult<()> {
    let pool = load_pool(&args.input)?;
    let ks: Vec<usize> = match args.k {
        Some(_) => vec![check_k(args.k, pool.len())?],
        None => (1..=pool.len()).collect(),
    };
    let eor = eor_ranking(&pool)?;
    let mut table = Table::new(REPORT_COLUMNS);
    let mut failed = Vec::new();
    for &k in &ks {
        let cert = dual_certificate(&pool, &eor, k)?;
        let report = verify_certificate(&cert, &pool, k)?;
        if !report.passed() {
            failed.push(k);
        }
        table.push(report_row(&report));
    }

    let bytes = match args.output.format.unwrap_or(Format::Json) {
        Format::Csv => table.to_csv()?,
        Format::Json if args.k.is_some() => {
            let Value::Array(mut rows) = table.to_json() else { unreachable!() };
            json_bytes(&rows.remove(0))?
        }
        Format::Json => json_bytes(&table.to_json())?,
    };
    emit(args.output.out.as_deref(), &bytes)?;
    if failed.is_empty() {
        Ok(())
    } else {
        let list: Vec<String> = failed.iter().map(usize::to_string).collect();
        Err(CliError::Numerical(format!("certificate checks failed at k = {}", list.join(", "))))
    }
}

fn run_options(params: &ScenarioArgs) -> CliResult<RunOptions> {
    let mut opts = RunOptions::new(params.runs, params.seed);
    opts.policies = params.policies();
    opts.alpha = params.alpha;
    opts.threshold = params.threshold;
    if let Some(raw) = &params.protected {
        opts.protected = Some(resolve_group(&["A".to_string(), "B".to_string()], raw)?);
    }
    Ok(opts)
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let opts = run_options(&args.params)?;
    let report = Scenario::for_level(args.scenario)?.run(&opts)?;
    let mut table = Table::new([
        "run",
        "policy",
        "unfairness",
        "effectiveness",
        "size_a",
        "size_b",
        "n_rel_a",
        "n_rel_b",
    ]);
    for r in &report.records {
        table.push(vec![
            r.run.into(),
            r.policy.name().into(),
            r.unfairness.into(),
            r.effectiveness.into(),
            r.size_a.into(),
            r.size_b.into(),
            r.n_rel_a.into(),
            r.n_rel_b.into(),
        ]);
    }
    args.output.write_table(&table, Format::Csv)
}

const SUMMARY_COLUMNS: [&str; 5] = [
    "policy",
    "unfairness_mean",
    "unfairness_se",
    "effectiveness_mean",
    "effectiveness_se",
];

pub fn compare(args: &CompareArgs) -> CliResult<()> {
    let mut table = Table::new(SUMMARY_COLUMNS);
    if let Some(level) = args.scenario {
        let report = Scenario::for_level(level)?.run(&run_options(&args.params)?)?;
        for s in &report.summaries {
            table.push(vec![
                s.policy.name().into(),
                s.unfairness_mean.into(),
                s.unfairness_se.into(),
                s.effectiveness_mean.into(),
                s.effectiveness_se.into(),
            ]);
        }
    } else {
        let path = args.input.as_deref().expect("clap requires --scenario or --input");
        compare_pool(path, args, &mut table)?;
    }
    args.output.write_table(&table, Format::Csv)
}

/// Scores each policy once on a fixed pool; standard errors are 0.
fn compare_pool(path: &Path, args: &CompareArgs, table: &mut Table) -> CliResult<()> {
    let pool = load_pool(path)?;
    let rel = pool.relevance(args.mode)?;
    let defaults = RunOptions::default();
    for (slot, policy) in args.params.policies().into_iter().enumerate() {
        let mut spec = PolicySpec::new(policy)
            .with_alpha(args.params.alpha)
            .with_threshold(args.params.threshold);
        if let Some(raw) = &args.params.protected {
            spec = spec.with_protected(resolve_group(pool.group_names(), raw)?);
        }
        let (unfairness, effectiveness) = score_policy(
            &spec,
            &rel,
            defaults.unfairness_samples,
            defaults.inclusion_samples,
            derive_seed(args.params.seed, 1 + slot as u64),
        )?;
        table.push(vec![
            policy.name().into(),
            unfairness.into(),
            0.0.into(),
            effectiveness.into(),
            0.0.into(),
        ]);
    }
    Ok(())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn curve_json(curve: &CalibrationCurve) -> Value {
    let bins: Vec<Value> = curve
        .bins
        .iter()
        .map(|b| {
            json!({
                "mean_predicted": round_num(b.mean_predicted),
                "positive_rate": round_num(b.positive_rate),
                "count": b.count,
            })
        })
        .collect();
    Value::Array(bins)
}

/// Fits Platt scaling on the log-odds of the pool's probabilities, so a
/// calibrated input gives `a ≈ 1`, `b ≈ 0`.
pub fn calibrate(args: &CalibrateArgs) -> CliResult<()> {
    let pool = load_pool(&args.input)?;
    let labels = pool.labels().ok_or(Error::MissingLabels)?;
    let scores: Vec<f64> = pool.probs().iter().map(|&p| logit(p)).collect();
    let params = platt_fit(&scores, labels)?;
    let recalibrated: Vec<f64> = scores.iter().map(|&s| params.apply(s)).collect();
    let binning = Binning::from(args.binning);
    let before = calibration_curve(pool.probs(), labels, args.bins, binning)?;
    let after = calibration_curve(&recalibrated, labels, args.bins, binning)?;

    let mut table = Table::new(["a", "b", "n", "max_deviation_before", "max_deviation_after"]);
    table.push(vec![
        params.a.into(),
        params.b.into(),
        pool.len().into(),
        before.max_deviation().into(),
        after.max_deviation().into(),
    ]);
    match args.output.format.unwrap_or(Format::Json) {
        Format::Csv => emit(args.output.out.as_deref(), &table.to_csv()?),
        Format::Json => {
            let Value::Array(mut rows) = table.to_json() else { unreachable!() };
            let mut obj = rows.remove(0);
            obj["bins_before"] = curve_json(&before);
            obj["bins_after"] = curve_json(&after);
            emit(args.output.out.as_deref(), &json_bytes(&obj)?)
        }
    }
}
