use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use active_eval::allocate::{allocate as plan_allocation, AllocRule, AllocationPlan};
use active_eval::estimate::{
    ht_estimate, sample_without_replacement, uniform_estimate, SampleDraw, StreamAddress,
};
use active_eval::harness::{sweep, ExperimentReport, MethodSpec, StratifiedSpec, ABLATION_BUDGETS};
use active_eval::ingest::{
    load_pool, write_pool, LoadOptions, LoadedPool, LossRule, DEFAULT_PARSE_FAILURE_WARN,
};
use active_eval::parse::ParserSpec;
use active_eval::stratify::{stratify as stratify_pool, stratum_mean_sc, Stratification};
use active_eval::synth::{make_pool, reference_pool, SynthConfig};
use active_eval::LabelOracle;
use active_eval_genclient::{
    build_pool, read_inputs, BuildOptions, DecodingConfig, EndpointConfig, GenClient,
    DEFAULT_API_KEY_ENV,
};
use clap::{Args, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::json;

use crate::{CliError, CliResult, Common, LossRuleArg, MethodArg, ModeArg};

const DEFAULT_SEED: u64 = 0;

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Input(e.to_string())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

/// Writes `value` as pretty JSON to `path`.
fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(json_err)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

fn stdout_err(e: io::Error) -> CliError {
    if e.kind() == io::ErrorKind::BrokenPipe {
        return CliError::BrokenPipe;
    }
    CliError::Input(format!("<stdout>: {e}"))
}

fn load(c: &Common) -> CliResult<LoadedPool> {
    let Some(path) = &c.pool else {
        info!("no --pool given, using the synthetic reference pool");
        let s = reference_pool();
        let n = s.labeled.pool.len();
        return Ok(LoadedPool {
            losses: s.labeled.losses().iter().copied().map(Some).collect(),
            pool: s.labeled.pool,
            gold_answers: s.gold_answers.into_iter().map(Some).collect(),
            lines: (1..=n).collect(),
            parse_failures: 0,
            parsed_generations: 0,
            source: PathBuf::from("<reference pool>"),
        });
    };
    let opts = LoadOptions {
        parser: ParserSpec::new(c.parser),
        loss_rule: match c.loss_rule {
            LossRuleArg::ExactMatch => LossRule::ExactMatchAccuracy,
            LossRuleArg::Provided => LossRule::Provided,
        },
        parse_failure_warn: DEFAULT_PARSE_FAILURE_WARN,
    };
    Ok(load_pool(path, &opts)?)
}

fn require_budget(c: &Common) -> CliResult<usize> {
    c.budget
        .ok_or_else(|| CliError::Config("--budget is required".into()))
}

fn stratification(c: &Common, loaded: &LoadedPool) -> CliResult<Stratification> {
    Ok(stratify_pool(
        c.stratify_method,
        &loaded.pool.se_values(),
        c.strata,
    )?)
}

/// Full loss vector when every record has one.
fn full_losses(loaded: &LoadedPool) -> Option<Vec<f64>> {
    loaded.losses.iter().copied().collect()
}

fn stratum_mean(members: &[usize], values: &[f64]) -> f64 {
    members.iter().map(|&i| values[i]).sum::<f64>() / members.len() as f64
}

pub fn signals(c: &Common) -> CliResult {
    let loaded = load(c)?;
    let pool = &loaded.pool;
    let mut out = io::stdout().lock();
    writeln!(out, "id\tse\tsc").map_err(stdout_err)?;
    for inst in pool.instances() {
        writeln!(out, "{}\t{:.6}\t{:.6}", inst.id(), inst.se(), inst.sc()).map_err(stdout_err)?;
    }
    let zeros = pool.instances().iter().filter(|i| i.se() == 0.0).count();
    eprintln!(
        "N = {}, k = {}, SE = 0 for {} instances ({:.1}%)",
        pool.len(),
        pool.k(),
        zeros,
        100.0 * zeros as f64 / pool.len() as f64
    );
    if loaded.parsed_generations > 0 {
        eprintln!(
            "parse failures: {} of {} generations ({:.2}%)",
            loaded.parse_failures,
            loaded.parsed_generations,
            100.0 * loaded.parse_failure_fraction()
        );
    }
    if let Some(path) = &c.out {
        let mut w = create(path)?;
        for inst in pool.instances() {
            let row = json!({"id": inst.id(), "se": inst.se(), "sc": inst.sc()});
            serde_json::to_writer(&mut w, &row).map_err(json_err)?;
            w.write_all(b"\n").map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct StratumRow {
    stratum: usize,
    size: usize,
    se_min: f64,
    se_max: f64,
    p: f64,
    mean_loss: Option<f64>,
}

pub fn stratify(c: &Common) -> CliResult {
    let loaded = load(c)?;
    let st = stratification(c, &loaded)?;
    let se = loaded.pool.se_values();
    let p = stratum_mean_sc(&st, &loaded.pool.sc_values())?;
    let losses = full_losses(&loaded);
    let rows: Vec<StratumRow> = st
        .members()
        .iter()
        .enumerate()
        .map(|(h, m)| StratumRow {
            stratum: h,
            size: m.len(),
            se_min: m.iter().map(|&i| se[i]).fold(f64::INFINITY, f64::min),
            se_max: m.iter().map(|&i| se[i]).fold(f64::NEG_INFINITY, f64::max),
            p: p[h],
            mean_loss: losses.as_deref().map(|l| stratum_mean(m, l)),
        })
        .collect();

    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{} strata (requested H = {}, method {})",
        st.h_eff(),
        st.requested_h(),
        st.method()
    )
    .map_err(stdout_err)?;
    writeln!(out, "stratum\tN_h\tse_min\tse_max\tp_h\tmean_loss").map_err(stdout_err)?;
    for r in &rows {
        let ml = r
            .mean_loss
            .map_or_else(|| "-".into(), |v| format!("{v:.4}"));
        writeln!(
            out,
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{ml}",
            r.stratum, r.size, r.se_min, r.se_max, r.p
        )
        .map_err(stdout_err)?;
    }
    if let Some(path) = &c.out {
        let assignment: Vec<_> = loaded
            .pool
            .instances()
            .iter()
            .zip(st.assignment())
            .map(|(inst, &h)| json!({"id": inst.id(), "stratum": h}))
            .collect();
        let doc = json!({
            "method": st.method(),
            "H": st.requested_h(),
            "H_eff": st.h_eff(),
            "strata": rows,
            "assignment": assignment,
        });
        write_json(path, &doc)?;
    }
    Ok(())
}

fn rule(c: &Common, command: &str) -> CliResult<AllocRule> {
    match c.alloc_rule {
        None => Ok(AllocRule::ProxyNeyman),
        Some(MethodArg::Rule(r)) => Ok(r),
        Some(MethodArg::Uniform) => Err(CliError::Config(format!(
            "`{command}` needs a stratified allocation rule, not uniform"
        ))),
    }
}

fn plan(
    c: &Common,
    loaded: &LoadedPool,
    st: &Stratification,
    rule: AllocRule,
    budget: usize,
) -> CliResult<AllocationPlan> {
    let losses = if rule.needs_losses() {
        Some(loaded.clone().into_labeled()?.losses().to_vec())
    } else {
        None
    };
    Ok(plan_allocation(
        rule,
        st,
        &loaded.pool.sc_values(),
        losses.as_deref(),
        c.delta,
        budget,
    )?)
}

pub fn allocate(c: &Common) -> CliResult {
    let budget = require_budget(c)?;
    let rule = rule(c, "allocate")?;
    let loaded = load(c)?;
    let st = stratification(c, &loaded)?;
    let plan = plan(c, &loaded, &st, rule, budget)?;
    let p = stratum_mean_sc(&st, &loaded.pool.sc_values())?;

    let mut out = io::stdout().lock();
    writeln!(out, "rule {rule}, M = {budget}, H_eff = {}", st.h_eff()).map_err(stdout_err)?;
    writeln!(out, "stratum\tN_h\tp_h\tm_h\tpi_h").map_err(stdout_err)?;
    for (h, (&n, &m)) in st.sizes().iter().zip(plan.counts()).enumerate() {
        writeln!(
            out,
            "{h}\t{n}\t{:.4}\t{m}\t{:.4}",
            p[h],
            m as f64 / n as f64
        )
        .map_err(stdout_err)?;
    }
    if let Some(path) = &c.out {
        let doc = json!({
            "rule": rule,
            "delta": plan.delta(),
            "M": budget,
            "stratification": st.method(),
            "H": st.requested_h(),
            "strata_sizes": st.sizes(),
            "p": p,
            "allocation_counts": plan.counts(),
        });
        write_json(path, &doc)?;
    }
    Ok(())
}

pub fn estimate(c: &Common) -> CliResult {
    let budget = require_budget(c)?;
    let seed = c.seed.unwrap_or(DEFAULT_SEED);
    let loaded = load(c)?;
    let pool = &loaded.pool;
    let n = pool.len();
    if budget == 0 || budget > n {
        return Err(CliError::Config(format!(
            "budget M = {budget} must be between 1 and the pool size N = {n}"
        )));
    }
    let method = c
        .alloc_rule
        .unwrap_or(MethodArg::Rule(AllocRule::ProxyNeyman));

    // The sample does not depend on the losses (except for the oracle rule),
    // so it can be drawn before any label is known.
    let design = match method {
        MethodArg::Uniform => None,
        MethodArg::Rule(rule) => {
            let st = stratification(c, &loaded)?;
            let plan = plan(c, &loaded, &st, rule, budget)?;
            let draw = SampleDraw::draw(&st.members(), &plan, seed, 0)?;
            Some((st, plan, draw))
        }
    };
    let sampled: Vec<usize> = match &design {
        None => {
            let ids: Vec<usize> = (0..n).collect();
            sample_without_replacement(&ids, budget, &mut StreamAddress::new(seed, 0, 0).rng())?
        }
        Some((_, _, draw)) => draw.strata().concat(),
    };

    let missing: Vec<&str> = sampled
        .iter()
        .filter(|&&i| loaded.losses[i].is_none())
        .map(|&i| pool.instances()[i].id())
        .collect();
    if !missing.is_empty() {
        let mut out = io::stdout().lock();
        for id in &missing {
            writeln!(out, "{id}").map_err(stdout_err)?;
        }
        return Err(CliError::Input(format!(
            "{} sampled instance(s) have no target loss (ids listed on stdout); \
             label them and rerun with the same --seed",
            missing.len()
        )));
    }

    // Unsampled losses are never revealed.
    let losses: Vec<f64> = loaded.losses.iter().map(|l| l.unwrap_or(0.0)).collect();
    let mut oracle = LabelOracle::new(pool, &losses);
    let (name, est) = match &design {
        None => {
            let mut rng = StreamAddress::new(seed, 0, 0).rng();
            (
                "uniform".to_string(),
                uniform_estimate(n, budget, &mut rng, &mut oracle)?,
            )
        }
        Some((st, plan, draw)) => {
            let spec = MethodSpec::Stratified(
                StratifiedSpec::new(c.stratify_method, c.strata, plan.rule()).with_delta(c.delta),
            );
            (
                spec.name(),
                ht_estimate(draw, plan, st.sizes(), &mut oracle)?,
            )
        }
    };
    let doc = json!({
        "method": name,
        "M": budget,
        "seed": seed,
        "estimate": est.value,
        "labels_used": est.labels_used,
    });
    println!("{doc}");
    if let Some(path) = &c.out {
        let mut doc = doc;
        doc["sampled_ids"] = json!(sampled
            .iter()
            .map(|&i| pool.instances()[i].id())
            .collect::<Vec<_>>());
        write_json(path, &doc)?;
    }
    Ok(())
}

fn sweep_methods(c: &Common) -> Vec<MethodSpec> {
    let stratified = |rule| {
        MethodSpec::Stratified(
            StratifiedSpec::new(c.stratify_method, c.strata, rule).with_delta(c.delta),
        )
    };
    match c.alloc_rule {
        Some(MethodArg::Uniform) => Vec::new(),
        Some(MethodArg::Rule(r)) => vec![stratified(r)],
        None => AllocRule::ALL.iter().map(|&r| stratified(r)).collect(),
    }
}

fn print_table(report: &ExperimentReport, out: &mut impl Write) -> io::Result<()> {
    writeln!(
        out,
        "N = {}, R_D = {:.6}, T = {}, seed = {}",
        report.meta.pool_size, report.meta.r_d, report.meta.trials, report.meta.master_seed
    )?;
    writeln!(out, "method\tM\tmean\tmse\trelative_mse\tsem")?;
    for cell in &report.cells {
        let rel = cell
            .relative_mse
            .map_or_else(|| "-".into(), |r| format!("{r:.4}"));
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{:.3e}\t{rel}\t{:.3e}",
            cell.method, cell.m, cell.mean_estimate, cell.mse, cell.sem
        )?;
    }
    for s in &report.skipped {
        writeln!(out, "skipped {} at M = {}: {}", s.method, s.m, s.reason)?;
    }
    Ok(())
}

pub fn run(c: &Common) -> CliResult {
    let labeled = load(c)?.into_labeled()?;
    let budgets = c
        .budgets
        .clone()
        .unwrap_or_else(|| ABLATION_BUDGETS.to_vec());
    let seed = c.seed.unwrap_or(DEFAULT_SEED);
    let report = sweep(&labeled, &sweep_methods(c), &budgets, c.trials, seed)?;

    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let csv_path = dir.join("report.csv");
    report.write_csv(create(&csv_path)?)?;
    report.write_json(create(&dir.join("report.json"))?)?;
    write_json(&dir.join("plot.json"), &report.plot_data())?;

    print_table(&report, &mut io::stdout().lock()).map_err(stdout_err)?;
    eprintln!(
        "wrote report.csv, report.json and plot.json to {}",
        dir.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Pool size.
    #[arg(long, default_value_t = SynthConfig::reference().n)]
    pub n: usize,
    /// Surrogate generations per instance.
    #[arg(long, default_value_t = SynthConfig::reference().k)]
    pub k: usize,
    /// Answer options per question.
    #[arg(long, default_value_t = SynthConfig::reference().options)]
    pub options: usize,
    #[arg(long, default_value_t = SynthConfig::reference().difficulty_alpha)]
    pub difficulty_alpha: f64,
    #[arg(long, default_value_t = SynthConfig::reference().difficulty_beta)]
    pub difficulty_beta: f64,
    #[arg(long, default_value_t = SynthConfig::reference().target_link)]
    pub target_link: f64,
    #[arg(long, default_value_t = SynthConfig::reference().zero_se_boost)]
    pub zero_se_boost: f64,
}

pub fn synth(c: &Common, a: &SynthArgs) -> CliResult {
    let config = SynthConfig {
        n: a.n,
        k: a.k,
        options: a.options,
        difficulty_alpha: a.difficulty_alpha,
        difficulty_beta: a.difficulty_beta,
        target_link: a.target_link,
        zero_se_boost: a.zero_se_boost,
        seed: c.seed.unwrap_or(SynthConfig::reference().seed),
    };
    let s = make_pool(&config)?;
    let (pool, losses) = (&s.labeled.pool, Some(s.labeled.losses()));
    match &c.out {
        Some(path) => write_pool(create(path)?, pool, losses, Some(&s.gold_answers))?,
        None => write_pool(io::stdout().lock(), pool, losses, Some(&s.gold_answers))?,
    }
    eprintln!(
        "N = {}, k = {}, R_D = {:.6}",
        pool.len(),
        pool.k(),
        s.labeled.risk()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
    Plot,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A report.json written by `run`.
    pub report: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
}

pub fn report(c: &Common, a: &ReportArgs) -> CliResult {
    let file = File::open(&a.report).map_err(|e| io_err(&a.report, e))?;
    let report = ExperimentReport::read_json(io::BufReader::new(file))?;
    let mut w: Box<dyn Write> = match &c.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    match a.format {
        ReportFormat::Table => print_table(&report, &mut w).map_err(stdout_err)?,
        ReportFormat::Csv => report.write_csv(&mut w)?,
        ReportFormat::Json => report.write_json(&mut w)?,
        ReportFormat::Plot => {
            serde_json::to_writer_pretty(&mut w, &report.plot_data()).map_err(json_err)?;
            writeln!(w).map_err(stdout_err)?;
        }
    }
    w.flush().map_err(stdout_err)
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSONL inputs with `id`, `prompt` and optional `gold_answer`.
    #[arg(long)]
    pub inputs: PathBuf,
    /// Endpoint base URL, e.g. http://localhost:8000/v1.
    #[arg(long)]
    pub base_url: String,
    #[arg(long)]
    pub model: String,
    /// Progress journal; defaults to `<out>.journal.jsonl`.
    #[arg(long)]
    pub journal: Option<PathBuf>,
    /// Generations per input.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0.7)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0.8)]
    pub top_p: f64,
    #[arg(long, default_value_t = 20)]
    pub top_k: u32,
    #[arg(long, default_value_t = 1.5)]
    pub presence_penalty: f64,
    #[arg(long, default_value_t = 1.0)]
    pub repetition_penalty: f64,
    /// Leave unset for the model maximum.
    #[arg(long)]
    pub max_new_tokens: Option<u32>,
    /// Environment variable holding the bearer token.
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    pub api_key_env: String,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
    #[arg(long, default_value_t = 5)]
    pub max_retries: u32,
    /// Delay before the first retry, doubled on each further retry.
    #[arg(long, default_value_t = 500)]
    pub backoff_ms: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Batched)]
    pub mode: ModeArg,
    /// Inputs in flight at once.
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    /// Store answers parsed with --parser instead of raw generations.
    #[arg(long)]
    pub store_parsed: bool,
}

pub fn generate(c: &Common, a: &GenerateArgs) -> CliResult {
    let out = c
        .out
        .clone()
        .ok_or_else(|| CliError::Config("--out is required for generate".into()))?;
    let journal = a.journal.clone().unwrap_or_else(|| {
        let mut p = out.clone().into_os_string();
        p.push(".journal.jsonl");
        PathBuf::from(p)
    });
    let endpoint = EndpointConfig {
        api_key_env: a.api_key_env.clone(),
        timeout: Duration::from_secs(a.timeout_secs),
        max_retries: a.max_retries,
        backoff: Duration::from_millis(a.backoff_ms),
        mode: a.mode.into(),
        concurrency: a.concurrency,
        ..EndpointConfig::new(a.base_url.clone(), a.model.clone())
    };
    let decoding = DecodingConfig {
        k: a.k,
        temperature: a.temperature,
        top_p: a.top_p,
        top_k: Some(a.top_k),
        presence_penalty: a.presence_penalty,
        repetition_penalty: Some(a.repetition_penalty),
        max_new_tokens: a.max_new_tokens,
    };
    let inputs = read_inputs(&a.inputs)?;
    let client = GenClient::new(endpoint)?;
    let opts = BuildOptions {
        out: out.clone(),
        journal,
        parser: a.store_parsed.then(|| ParserSpec::new(c.parser)),
    };
    let s = build_pool(&client, &inputs, &decoding, &opts)?;
    eprintln!(
        "{} completed, {} failed, {} already done; pool written to {}",
        s.completed,
        s.failed,
        s.skipped,
        out.display()
    );
    Ok(())
}
