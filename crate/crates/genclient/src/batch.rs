//! Resumable batch generation into a pool file.
//!
//! Completed inputs are appended to the pool file by a single writer and
//! then recorded in a JSONL progress journal, so an interrupted run can be
//! restarted without re-requesting finished inputs.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use active_eval::ingest::PoolRecord;
use active_eval::parse::{parse_answer, ParserSpec};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::client::GenClient;
use crate::config::DecodingConfig;
use crate::{GenError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenInput {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JournalStatus {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub id: String,
    pub status: JournalStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub out: PathBuf,
    pub journal: PathBuf,
    /// Store parsed `surrogate_answers` instead of raw generations.
    pub parser: Option<ParserSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildSummary {
    pub completed: usize,
    pub failed: usize,
    /// Inputs already finished by an earlier run.
    pub skipped: usize,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| GenError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GenError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| GenError::Malformed(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push((i + 1, v));
    }
    Ok(out)
}

/// Reads generation inputs (`id`, `prompt`, optional `gold_answer`).
pub fn read_inputs(path: impl AsRef<Path>) -> Result<Vec<GenInput>> {
    Ok(read_jsonl(path.as_ref())?
        .into_iter()
        .map(|(_, v)| v)
        .collect())
}

/// Ids already finished: `done` journal entries plus records present in the
/// output file (a record is written before its journal entry).
fn finished_ids(inputs: &[GenInput], opts: &BuildOptions) -> Result<HashSet<String>> {
    let known: HashSet<&str> = inputs.iter().map(|i| i.id.as_str()).collect();
    let mut done = HashSet::new();
    if opts.journal.exists() {
        for (line, e) in read_jsonl::<JournalEntry>(&opts.journal)? {
            if !known.contains(e.id.as_str()) {
                return Err(GenError::StaleJournal(format!(
                    "{}:{line}: id {:?} is not among the inputs",
                    opts.journal.display(),
                    e.id
                )));
            }
            match e.status {
                JournalStatus::Done => {
                    done.insert(e.id);
                }
                JournalStatus::Failed => {
                    done.remove(&e.id);
                }
            }
        }
    }
    if opts.out.exists() {
        for (line, rec) in read_jsonl::<PoolRecord>(&opts.out)? {
            if !known.contains(rec.id.as_str()) {
                return Err(GenError::StaleJournal(format!(
                    "{}:{line}: output record {:?} is not among the inputs",
                    opts.out.display(),
                    rec.id
                )));
            }
            done.insert(rec.id);
        }
    }
    Ok(done)
}

fn append_line<T: Serialize>(file: &mut File, path: &Path, value: &T) -> Result<()> {
    let mut line = serde_json::to_vec(value)?;
    line.push(b'\n');
    file.write_all(&line).map_err(|e| GenError::io(path, e))?;
    file.flush().map_err(|e| GenError::io(path, e))
}

fn open_append(path: &Path) -> Result<File> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| GenError::io(path, e))
}

/// Generates `k` completions for every unfinished input and appends one
/// pool record per success. Failed inputs are journaled and left out of the
/// pool; the batch continues.
pub fn build_pool(
    client: &GenClient,
    inputs: &[GenInput],
    decoding: &DecodingConfig,
    opts: &BuildOptions,
) -> Result<BuildSummary> {
    decoding.validate()?;
    if inputs.is_empty() {
        return Err(GenError::Config("no inputs to generate for".into()));
    }
    let mut seen = HashMap::new();
    for inp in inputs {
        if seen.insert(inp.id.as_str(), ()).is_some() {
            return Err(GenError::Config(format!("duplicate input id {:?}", inp.id)));
        }
    }

    let done = finished_ids(inputs, opts)?;
    let todo: Vec<&GenInput> = inputs.iter().filter(|i| !done.contains(&i.id)).collect();
    let mut summary = BuildSummary {
        skipped: inputs.len() - todo.len(),
        ..BuildSummary::default()
    };
    if todo.is_empty() {
        return Ok(summary);
    }
    info!(
        "generating for {} inputs ({} already done)",
        todo.len(),
        summary.skipped
    );

    let mut out = open_append(&opts.out)?;
    let mut journal = open_append(&opts.journal)?;
    let next = AtomicUsize::new(0);
    let workers = client.endpoint().concurrency.min(todo.len());

    thread::scope(|s| -> Result<()> {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let (todo, next) = (&todo, &next);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(input) = todo.get(i) else { break };
                let res = client.generate_k(&input.prompt, decoding);
                if tx.send((i, res)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        for (i, res) in rx {
            let input = todo[i];
            match res {
                Ok(gens) => {
                    let mut rec = PoolRecord {
                        id: input.id.clone(),
                        gold_answer: input.gold_answer.clone(),
                        ..PoolRecord::default()
                    };
                    match &opts.parser {
                        Some(p) => {
                            rec.surrogate_answers =
                                Some(gens.iter().map(|g| parse_answer(g, p)).collect())
                        }
                        None => rec.surrogate_generations = Some(gens),
                    }
                    append_line(&mut out, &opts.out, &rec)?;
                    append_line(
                        &mut journal,
                        &opts.journal,
                        &JournalEntry {
                            id: input.id.clone(),
                            status: JournalStatus::Done,
                            reason: None,
                        },
                    )?;
                    summary.completed += 1;
                }
                Err(e) => {
                    warn!("input {:?} excluded from the pool: {e}", input.id);
                    append_line(
                        &mut journal,
                        &opts.journal,
                        &JournalEntry {
                            id: input.id.clone(),
                            status: JournalStatus::Failed,
                            reason: Some(e.to_string()),
                        },
                    )?;
                    summary.failed += 1;
                }
            }
        }
        Ok(())
    })?;
    Ok(summary)
}
