//! Line-delimited JSON files for prompts and labelled pairs.
//!
//! Pair records carry prompt texts in `q1`/`q2`, a `label` in `[0, 1]` and
//! an optional cached `sim`. Prompts are keyed by their text unless the
//! record names explicit ids in `id1`/`id2`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use promptcache_core::{LabeledPair, PairDataset, Prompt};
use serde::{Deserialize, Serialize};

use crate::error::{read, write, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub q1: String,
    pub q2: String,
    pub label: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id2: Option<String>,
}

/// A mined pair that has not been labelled yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub q1: String,
    pub q2: String,
    pub sim: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id2: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub text: String,
}

fn lines(path: &Path, bytes: &[u8]) -> Result<Vec<(usize, String)>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::format(path, format!("not UTF-8: {e}")))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_owned()))
        .collect())
}

fn parse_line<T: for<'de> Deserialize<'de>>(path: &Path, line: usize, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::parse(path, line, e.to_string()))
}

fn id_or_text<'a>(id: &'a Option<String>, text: &'a str) -> &'a str {
    id.as_deref().unwrap_or(text)
}

pub fn parse_pairs(path: &Path, bytes: &[u8]) -> Result<PairDataset> {
    let mut prompts: BTreeMap<String, String> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for (line, text) in lines(path, bytes)? {
        let r: PairRecord = parse_line(path, line, &text)?;
        let bad = |m: String| Error::parse(path, line, m);
        if !(0.0..=1.0).contains(&r.label) {
            return Err(bad(format!("label {} outside [0, 1]", r.label)));
        }
        if r.sim.is_some_and(|s| !s.is_finite()) {
            return Err(bad("sim is not finite".into()));
        }
        let (id1, id2) = (id_or_text(&r.id1, &r.q1), id_or_text(&r.id2, &r.q2));
        for (id, q) in [(id1, &r.q1), (id2, &r.q2)] {
            match prompts.get(id) {
                Some(t) if t != q => return Err(bad(format!("prompt id {id:?} reused with different text"))),
                Some(_) => {}
                None => {
                    Prompt::new(id, q.as_str()).map_err(|e| bad(e.to_string()))?;
                    prompts.insert(id.to_owned(), q.clone());
                }
            }
        }
        if id1 == id2 {
            return Err(bad(format!("pair joins prompt {id1:?} with itself")));
        }
        let key = if id1 <= id2 { (id1, id2) } else { (id2, id1) };
        if !seen.insert((key.0.to_owned(), key.1.to_owned())) {
            return Err(bad(format!("duplicate pair ({id1:?}, {id2:?})")));
        }
        pairs.push(LabeledPair {
            q1: id1.to_owned(),
            q2: id2.to_owned(),
            label: r.label,
            similarity: r.sim,
        });
    }
    let table = prompts
        .into_iter()
        .map(|(id, text)| Prompt::new(id, text))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PairDataset::new(pairs, table)?)
}

pub fn read_pairs(path: &Path) -> Result<PairDataset> {
    parse_pairs(path, &read(path)?)
}

fn text_of<'a>(dataset: &'a PairDataset, id: &'a str) -> &'a str {
    dataset.prompt(id).map_or(id, |p| p.text.as_str())
}

fn explicit_id(id: &str, text: &str) -> Option<String> {
    (id != text).then(|| id.to_owned())
}

pub fn encode_pairs(dataset: &PairDataset) -> String {
    let mut out = String::new();
    for p in dataset.pairs() {
        let (t1, t2) = (text_of(dataset, &p.q1), text_of(dataset, &p.q2));
        let r = PairRecord {
            q1: t1.to_owned(),
            q2: t2.to_owned(),
            label: p.label,
            sim: p.similarity,
            id1: explicit_id(&p.q1, t1),
            id2: explicit_id(&p.q2, t2),
        };
        writeln!(out, "{}", serde_json::to_string(&r).expect("pair record serializes")).unwrap();
    }
    out
}

pub fn write_pairs(path: &Path, dataset: &PairDataset) -> Result<()> {
    write(path, encode_pairs(dataset))
}

pub fn encode_candidates(records: &[CandidateRecord]) -> String {
    let mut out = String::new();
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r).expect("candidate record serializes")).unwrap();
    }
    out
}

pub fn parse_prompts(path: &Path, bytes: &[u8]) -> Result<Vec<Prompt>> {
    let mut seen = BTreeSet::new();
    let mut prompts = Vec::new();
    for (line, text) in lines(path, bytes)? {
        let r: PromptRecord = parse_line(path, line, &text)?;
        if !seen.insert(r.id.clone()) {
            return Err(Error::parse(path, line, format!("duplicate prompt id {:?}", r.id)));
        }
        prompts.push(Prompt::new(r.id, r.text).map_err(|e| Error::parse(path, line, e.to_string()))?);
    }
    Ok(prompts)
}

pub fn read_prompts(path: &Path) -> Result<Vec<Prompt>> {
    parse_prompts(path, &read(path)?)
}

pub fn encode_prompts<'a>(prompts: impl IntoIterator<Item = &'a Prompt>) -> String {
    let mut out = String::new();
    for p in prompts {
        let r = PromptRecord {
            id: p.id.clone(),
            text: p.text.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&r).expect("prompt record serializes")).unwrap();
    }
    out
}
