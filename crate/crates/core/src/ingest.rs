//! Line-delimited JSON pool files.
//!
//! One record per line:
//!
//! ```json
//! {"id": "q1", "surrogate_answers": ["A", "A", "B"], "target_loss": 0.0, "gold_answer": "A"}
//! {"id": "q2", "surrogate_generations": ["... answer is (C)", "..."], "gold_answer": "C", "target_generation": "C"}
//! ```
//!
//! Exactly one of `surrogate_generations` (raw text, parsed on load) and
//! `surrogate_answers` (canonical labels) must be present. Unknown fields
//! are ignored.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parse::{parse_answer, ParserSpec};
use crate::pool::{LabeledPool, Pool, PoolInstance};
use crate::signals::UNPARSED;

/// Default parse-failure fraction above which a warning is logged.
pub const DEFAULT_PARSE_FAILURE_WARN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoolRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_generations: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_answers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_generation: Option<String>,
}

/// How the target loss of a record is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossRule {
    /// Use the record's `target_loss`.
    Provided,
    /// 0/1 loss of the parsed `target_generation` against `gold_answer`
    /// when both are present; otherwise fall back to `target_loss`.
    #[default]
    ExactMatchAccuracy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub parser: ParserSpec,
    pub loss_rule: LossRule,
    pub parse_failure_warn: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            parser: ParserSpec::default(),
            loss_rule: LossRule::default(),
            parse_failure_warn: DEFAULT_PARSE_FAILURE_WARN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedPool {
    pub pool: Pool,
    /// Per-instance target loss, when known.
    pub losses: Vec<Option<f64>>,
    pub gold_answers: Vec<Option<String>>,
    /// 1-based source line of every instance.
    pub lines: Vec<usize>,
    /// Raw generations that parsed to no answer.
    pub parse_failures: usize,
    /// Raw generations parsed in total.
    pub parsed_generations: usize,
    pub source: PathBuf,
}

impl LoadedPool {
    pub fn parse_failure_fraction(&self) -> f64 {
        if self.parsed_generations == 0 {
            0.0
        } else {
            self.parse_failures as f64 / self.parsed_generations as f64
        }
    }

    pub fn has_all_losses(&self) -> bool {
        self.losses.iter().all(Option::is_some)
    }

    /// The pool with its full loss vector; fails naming the lines of records
    /// without a loss.
    pub fn into_labeled(self) -> Result<LabeledPool> {
        let missing: Vec<usize> = self
            .losses
            .iter()
            .zip(&self.lines)
            .filter(|(l, _)| l.is_none())
            .map(|(_, &line)| line)
            .collect();
        if let Some(&line) = missing.first() {
            let shown: Vec<String> = missing.iter().take(10).map(usize::to_string).collect();
            return Err(Error::Record {
                path: self.source,
                line,
                message: format!(
                    "{} record(s) have no target loss (lines {}{}); a loss is required for every record used as ground truth",
                    missing.len(),
                    shown.join(", "),
                    if missing.len() > 10 { ", ..." } else { "" }
                ),
            });
        }
        let losses = self
            .losses
            .into_iter()
            .map(|l| l.unwrap_or_default())
            .collect();
        LabeledPool::new(self.pool, losses)
    }
}

pub fn load_pool(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<LoadedPool> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    load_pool_from_reader(BufReader::new(file), path, opts)
}

pub fn load_pool_from_reader<R: BufRead>(
    reader: R,
    source: impl Into<PathBuf>,
    opts: &LoadOptions,
) -> Result<LoadedPool> {
    let source = source.into();
    let err = |line: usize, message: String| Error::Record {
        path: source.clone(),
        line,
        message,
    };

    let mut instances = Vec::new();
    let mut losses = Vec::new();
    let mut gold_answers = Vec::new();
    let mut lines = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut k: Option<(usize, usize)> = None;
    let mut parse_failures = 0;
    let mut parsed_generations = 0;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(&source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PoolRecord = serde_json::from_str(&line)
            .map_err(|e| err(lineno, format!("malformed record: {e}")))?;

        let answers = match (rec.surrogate_generations, rec.surrogate_answers) {
            (Some(raw), None) => {
                let parsed: Vec<String> =
                    raw.iter().map(|t| parse_answer(t, &opts.parser)).collect();
                parsed_generations += parsed.len();
                parse_failures += parsed.iter().filter(|a| *a == UNPARSED).count();
                parsed
            }
            (None, Some(answers)) => answers,
            (Some(_), Some(_)) => {
                return Err(err(
                    lineno,
                    "record has both surrogate_generations and surrogate_answers".into(),
                ))
            }
            (None, None) => {
                return Err(err(
                    lineno,
                    "record has neither surrogate_generations nor surrogate_answers".into(),
                ))
            }
        };
        match k {
            None => k = Some((answers.len(), lineno)),
            Some((k0, first)) if answers.len() != k0 => {
                return Err(err(
                    lineno,
                    format!(
                        "record {:?} has {} surrogate answers but the pool uses k = {k0} (set by line {first})",
                        rec.id,
                        answers.len()
                    ),
                ))
            }
            Some(_) => {}
        }
        if let Some(&first) = seen.get(&rec.id) {
            return Err(err(
                lineno,
                format!("duplicate id {:?} (first seen on line {first})", rec.id),
            ));
        }
        seen.insert(rec.id.clone(), lineno);

        let derived = match (opts.loss_rule, &rec.target_generation, &rec.gold_answer) {
            (LossRule::ExactMatchAccuracy, Some(out), Some(gold)) => {
                let pred = parse_answer(out, &opts.parser);
                let gold = parse_answer(gold, &opts.parser);
                Some(if pred != UNPARSED && pred == gold {
                    0.0
                } else {
                    1.0
                })
            }
            _ => None,
        };
        let loss = derived.or(rec.target_loss);
        if let Some(l) = loss {
            if !(0.0..=1.0).contains(&l) {
                return Err(err(lineno, format!("target_loss {l} is outside [0, 1]")));
            }
        }

        let inst = PoolInstance::new(rec.id, answers).map_err(|e| err(lineno, e.to_string()))?;
        instances.push(inst);
        losses.push(loss);
        gold_answers.push(rec.gold_answer);
        lines.push(lineno);
    }

    let pool = Pool::new(instances).map_err(|e| err(0, e.to_string()))?;
    let loaded = LoadedPool {
        pool,
        losses,
        gold_answers,
        lines,
        parse_failures,
        parsed_generations,
        source,
    };
    let frac = loaded.parse_failure_fraction();
    if frac > opts.parse_failure_warn {
        warn!(
            "{}: {:.1}% of surrogate generations could not be parsed",
            loaded.source.display(),
            100.0 * frac
        );
    }
    Ok(loaded)
}

/// Writes a pool as canonical-answer records.
pub fn write_pool<W: Write>(
    mut w: W,
    pool: &Pool,
    losses: Option<&[f64]>,
    gold_answers: Option<&[String]>,
) -> Result<()> {
    for (i, inst) in pool.instances().iter().enumerate() {
        let rec = PoolRecord {
            id: inst.id().to_string(),
            surrogate_answers: Some(inst.surrogate_answers().to_vec()),
            target_loss: losses.map(|l| l[i]),
            gold_answer: gold_answers.map(|g| g[i].clone()),
            ..PoolRecord::default()
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<pool output>", e))?;
    }
    w.flush().map_err(|e| Error::io("<pool output>", e))
}
