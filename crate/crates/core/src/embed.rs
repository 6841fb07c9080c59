//! Text embeddings, cosine-similarity ranking and two-stage ingredient matching.
//!
//! Ingredient strings are embedded into a 384-dimensional space and compared
//! against every nutrition-entry description. A top-1 match at or above the
//! acceptance threshold is taken automatically. Anything below it goes to a
//! review queue with its five best candidates, where a human decision is
//! recorded in the override table and wins on the next run.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusSnapshot;
use crate::tabular::Table;
use crate::text::normalize;

pub const EMBEDDING_DIM: usize = 384;

/// Candidates kept for human review.
pub const REVIEW_CANDIDATES: usize = 5;

pub const DEFAULT_TAU: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("expected {expected} dimensions, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no precomputed vector for {0:?}")]
    MissingVector(String),
    #[error("nutrition corpus is empty")]
    EmptyCorpus,
    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("override for {ingredient:?} points at unknown nutrition entry {mfd_id:?}")]
    UnknownOverrideTarget { ingredient: String, mfd_id: String },
    #[error("{file} line {line}: {message}")]
    Parse { file: &'static str, line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// A 384-element real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.len() != EMBEDDING_DIM {
            return Err(EmbedError::DimensionMismatch { expected: EMBEDDING_DIM, found: values.len() });
        }
        Ok(EmbeddingVector(values))
    }

    /// Unit vector along axis `i`.
    pub fn basis(i: usize) -> Self {
        let mut v = vec![0.0; EMBEDDING_DIM];
        v[i] = 1.0;
        EmbeddingVector(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        EmbeddingVector(self.0.iter().map(|x| x * c).collect())
    }

    fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.0.iter_mut().for_each(|x| *x /= n);
        }
        self
    }
}

/// `a·b / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Maps text to vectors. Implementations normalize their input so that
/// strings equal under [`normalize`] embed identically.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;
}

/// Character-trigram feature hashing with term-frequency weights and L2
/// normalization. Needs no model files.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramHasher;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl EmbeddingProvider for TrigramHasher {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let normalized = normalize(text);
        if normalized.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let padded: Vec<char> = std::iter::once(' ')
            .chain(normalized.chars())
            .chain(std::iter::once(' '))
            .collect();
        let mut values = vec![0.0; EMBEDDING_DIM];
        let mut buf = [0u8; 12];
        for window in padded.windows(3) {
            let mut len = 0;
            for ch in window {
                len += ch.encode_utf8(&mut buf[len..]).len();
            }
            let slot = (fnv1a(&buf[..len]) % EMBEDDING_DIM as u64) as usize;
            values[slot] += 1.0;
        }
        Ok(EmbeddingVector(values).normalized())
    }
}

/// Vectors supplied from a file, keyed by normalized text.
///
/// File format: one `normalized_text<TAB>v1 v2 … v384` record per line.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedVectors {
    vectors: HashMap<String, EmbeddingVector>,
}

impl PrecomputedVectors {
    pub fn insert(&mut self, text: &str, vector: EmbeddingVector) {
        self.vectors.insert(normalize(text), vector);
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn from_tsv<R: BufRead>(input: R) -> Result<Self, EmbedError> {
        let mut out = PrecomputedVectors::default();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| EmbedError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| EmbedError::Parse { file: "vectors.tsv", line: i + 1, message };
            let (text, rest) = line.split_once('\t').ok_or_else(|| bad("missing TAB separator".into()))?;
            let values = rest
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|e| bad(format!("{v:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let vector = EmbeddingVector::new(values).map_err(|e| bad(e.to_string()))?;
            out.insert(text, vector);
        }
        Ok(out)
    }
}

impl EmbeddingProvider for PrecomputedVectors {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let key = normalize(text);
        if key.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        self.vectors.get(&key).cloned().ok_or(EmbedError::MissingVector(key))
    }
}

/// Ranked nutrition-entry candidates for one ingredient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub ingredient_text: String,
    /// Descending by score; ties in ascending `mfd_id` order.
    pub candidates: Vec<(String, f64)>,
}

/// Embedded nutrition descriptions, ready for ranking.
#[derive(Debug, Clone)]
pub struct MatchIndex {
    entries: Vec<(String, EmbeddingVector)>,
    by_id: HashMap<String, usize>,
}

impl MatchIndex {
    pub fn build(provider: &dyn EmbeddingProvider, snapshot: &CorpusSnapshot) -> Result<Self, EmbedError> {
        if snapshot.nutrition.is_empty() {
            return Err(EmbedError::EmptyCorpus);
        }
        let entries = snapshot
            .nutrition
            .par_iter()
            .map(|e| provider.embed(&e.description).map(|v| (e.mfd_id.clone(), v)))
            .collect::<Result<Vec<_>, _>>()?;
        let by_id = entries.iter().enumerate().map(|(i, (id, _))| (id.clone(), i)).collect();
        Ok(MatchIndex { entries, by_id })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vector(&self, mfd_id: &str) -> Option<&EmbeddingVector> {
        self.by_id.get(mfd_id).map(|&i| &self.entries[i].1)
    }

    fn rank_vector(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<(String, f64)>, EmbedError> {
        let mut scored = self
            .entries
            .iter()
            .map(|(id, v)| cosine_similarity(query, v).map(|s| (id.as_str(), s)))
            .collect::<Result<Vec<_>, _>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        scored.truncate(k);
        Ok(scored.into_iter().map(|(id, s)| (id.to_string(), s)).collect())
    }
}

/// Top-`k` entries by cosine similarity to `ingredient_text`.
pub fn rank_candidates(
    provider: &dyn EmbeddingProvider,
    index: &MatchIndex,
    ingredient_text: &str,
    k: usize,
) -> Result<CandidateList, EmbedError> {
    if index.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let query = provider.embed(ingredient_text)?;
    Ok(CandidateList {
        ingredient_text: normalize(ingredient_text),
        candidates: index.rank_vector(&query, k.max(1))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MatchStage {
    Auto,
    ReviewedTop5,
    Manual,
}

impl fmt::Display for MatchStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchStage::Auto => "Auto",
            MatchStage::ReviewedTop5 => "ReviewedTop5",
            MatchStage::Manual => "Manual",
        })
    }
}

impl FromStr for MatchStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Auto" => Ok(MatchStage::Auto),
            "ReviewedTop5" => Ok(MatchStage::ReviewedTop5),
            "Manual" => Ok(MatchStage::Manual),
            other => Err(format!("unknown stage {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecidedBy {
    Threshold,
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    /// Normalized ingredient string.
    pub ingredient_text: String,
    pub mfd_id: String,
    pub score: f64,
    pub stage: MatchStage,
    pub decided_by: DecidedBy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Override {
    pub mfd_id: String,
    pub stage: MatchStage,
}

/// Human match decisions keyed by normalized ingredient text. Later entries
/// for the same key replace earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OverrideTable {
    entries: BTreeMap<String, Override>,
}

impl OverrideTable {
    pub fn insert(&mut self, ingredient_text: &str, mfd_id: &str, stage: MatchStage) {
        self.entries
            .insert(normalize(ingredient_text), Override { mfd_id: mfd_id.to_string(), stage });
    }

    pub fn extend(&mut self, other: &OverrideTable) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, ingredient_text: &str) -> Option<&Override> {
        self.entries.get(&normalize(ingredient_text))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads `ingredient_text,mfd_id,stage` with stage `ReviewedTop5` or `Manual`.
    pub fn from_csv<R: Read>(mut input: R) -> Result<Self, EmbedError> {
        let mut text = String::new();
        input.read_to_string(&mut text).map_err(|e| EmbedError::Io(e.to_string()))?;
        let parse = |line, message| EmbedError::Parse { file: "overrides.csv", line, message };
        let table = Table::from_csv_str(&text).map_err(|e| match e {
            crate::tabular::TableError::Parse { line, message } => parse(line, message),
            other => parse(0, format!("{other:?}")),
        })?;
        table
            .require(&["ingredient_text", "mfd_id", "stage"])
            .map_err(|e| parse(1, format!("{e:?}")))?;
        let mut out = OverrideTable::default();
        for row in &table.rows {
            let ingredient = table.get(row, "ingredient_text");
            let mfd_id = table.get(row, "mfd_id");
            if normalize(ingredient).is_empty() || mfd_id.is_empty() {
                return Err(parse(row.line, "ingredient_text and mfd_id are required".into()));
            }
            let stage: MatchStage = table.get(row, "stage").parse().map_err(|m| parse(row.line, m))?;
            if stage == MatchStage::Auto {
                return Err(parse(row.line, "overrides must be ReviewedTop5 or Manual".into()));
            }
            out.insert(ingredient, mfd_id, stage);
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ingredient_text", "mfd_id", "stage"])?;
        for (k, v) in &self.entries {
            w.write_record([k.as_str(), v.mfd_id.as_str(), &v.stage.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of a matching run: every distinct ingredient lands in exactly one
/// of the two lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatchOutcome {
    pub records: Vec<MatchRecord>,
    pub review_queue: Vec<CandidateList>,
}

impl MatchOutcome {
    pub fn by_ingredient(&self) -> HashMap<String, MatchRecord> {
        self.records.iter().map(|r| (r.ingredient_text.clone(), r.clone())).collect()
    }
}

/// Matches every distinct ingredient string of the snapshot.
///
/// Order of precedence: an override; otherwise an automatic top-1 match
/// scoring at least `tau`; otherwise a review-queue entry with the top five
/// candidates. Output lists are sorted by normalized ingredient text.
pub fn match_two_stage(
    provider: &dyn EmbeddingProvider,
    index: &MatchIndex,
    snapshot: &CorpusSnapshot,
    overrides: &OverrideTable,
    tau: f64,
) -> Result<MatchOutcome, EmbedError> {
    let ingredients: BTreeSet<String> = snapshot.distinct_ingredients();
    match_ingredients(provider, index, &ingredients, overrides, tau)
}

enum Decision {
    Matched(MatchRecord),
    Review(CandidateList),
}

/// [`match_two_stage`] over an explicit ingredient set.
pub fn match_ingredients(
    provider: &dyn EmbeddingProvider,
    index: &MatchIndex,
    ingredients: &BTreeSet<String>,
    overrides: &OverrideTable,
    tau: f64,
) -> Result<MatchOutcome, EmbedError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(EmbedError::InvalidThreshold(tau));
    }
    if index.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let keys: Vec<String> = ingredients.iter().map(|s| normalize(s)).collect::<BTreeSet<_>>().into_iter().collect();
    let decisions = keys
        .par_iter()
        .map(|key| -> Result<Decision, EmbedError> {
            let query = provider.embed(key)?;
            if let Some(o) = overrides.get(key) {
                let target = index.vector(&o.mfd_id).ok_or_else(|| EmbedError::UnknownOverrideTarget {
                    ingredient: key.clone(),
                    mfd_id: o.mfd_id.clone(),
                })?;
                return Ok(Decision::Matched(MatchRecord {
                    ingredient_text: key.clone(),
                    mfd_id: o.mfd_id.clone(),
                    score: cosine_similarity(&query, target)?,
                    stage: o.stage,
                    decided_by: DecidedBy::Override,
                }));
            }
            let ranked = index.rank_vector(&query, REVIEW_CANDIDATES)?;
            match ranked.first() {
                Some((id, score)) if *score >= tau => Ok(Decision::Matched(MatchRecord {
                    ingredient_text: key.clone(),
                    mfd_id: id.clone(),
                    score: *score,
                    stage: MatchStage::Auto,
                    decided_by: DecidedBy::Threshold,
                })),
                _ => Ok(Decision::Review(CandidateList { ingredient_text: key.clone(), candidates: ranked })),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut outcome = MatchOutcome::default();
    for d in decisions {
        match d {
            Decision::Matched(r) => outcome.records.push(r),
            Decision::Review(c) => outcome.review_queue.push(c),
        }
    }
    Ok(outcome)
}

/// Share of ingredients matched automatically in the first stage.
pub fn match_rate(records: &[MatchRecord], total_ingredients: usize) -> f64 {
    if total_ingredients == 0 {
        return 0.0;
    }
    records.iter().filter(|r| r.stage == MatchStage::Auto).count() as f64 / total_ingredients as f64
}

/// Writes `ingredient_text,rank,mfd_id,score` with ranks 1-5.
pub fn write_review_queue<W: Write>(queue: &[CandidateList], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ingredient_text", "rank", "mfd_id", "score"])?;
    for list in queue {
        for (rank, (id, score)) in list.candidates.iter().enumerate() {
            w.write_record([list.ingredient_text.as_str(), &(rank + 1).to_string(), id, &score.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `ingredient_text,mfd_id,score,stage,decided_by`.
pub fn write_matches<W: Write>(records: &[MatchRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ingredient_text", "mfd_id", "score", "stage", "decided_by"])?;
    for r in records {
        w.write_record([
            r.ingredient_text.as_str(),
            &r.mfd_id,
            &r.score.to_string(),
            &r.stage.to_string(),
            &format!("{:?}", r.decided_by),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nutrition::NUTRIENTS;

    fn corpus(descriptions: &[(&str, &str)]) -> CorpusSnapshot {
        let mut nutrition = String::from("mfd_id,description");
        for n in NUTRIENTS {
            nutrition.push(',');
            nutrition.push_str(n);
        }
        nutrition.push('\n');
        for (id, d) in descriptions {
            nutrition.push_str(&format!("{id},\"{d}\"{}\n", ",0".repeat(16)));
        }
        let mut recipes = String::from("id,name,category,servings,year_tags,line_index,raw_text,quantity,unit\n");
        for (i, (_, d)) in descriptions.iter().enumerate() {
            recipes.push_str(&format!("r,R,Beef,1,,{i},\"{d}\",1,g\n"));
        }
        CorpusSnapshot::from_csv_strs(&recipes, &nutrition, "", None).unwrap()
    }

    #[test]
    fn embedding_is_case_insensitive_and_384_long() {
        let h = TrigramHasher;
        let a = h.embed("milk").unwrap();
        assert_eq!(a.values().len(), EMBEDDING_DIM);
        assert_eq!(a, h.embed("Milk").unwrap());
        assert_eq!(a, h.embed("  MILK!! ").unwrap());
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_words_are_not_parallel() {
        let h = TrigramHasher;
        let s = cosine_similarity(&h.embed("milk").unwrap(), &h.embed("beef").unwrap()).unwrap();
        assert!(s < 0.999, "{s}");
    }

    #[test]
    fn empty_text_rejected() {
        assert_eq!(TrigramHasher.embed(""), Err(EmbedError::EmptyText));
        assert_eq!(TrigramHasher.embed(" ,; "), Err(EmbedError::EmptyText));
    }

    #[test]
    fn zero_vector_rejected() {
        let zero = EmbeddingVector::new(vec![0.0; EMBEDDING_DIM]).unwrap();
        assert_eq!(cosine_similarity(&zero, &EmbeddingVector::basis(0)), Err(EmbedError::ZeroVector));
        assert!(matches!(EmbeddingVector::new(vec![1.0; 3]), Err(EmbedError::DimensionMismatch { found: 3, .. })));
    }

    #[test]
    fn verbatim_entry_ranks_first() {
        let snap = corpus(&[("1", "Beef, ground"), ("2", "Rice, white, cooked"), ("3", "Black beans")]);
        let index = MatchIndex::build(&TrigramHasher, &snap).unwrap();
        let list = rank_candidates(&TrigramHasher, &index, "rice white cooked", 5).unwrap();
        assert_eq!(list.candidates.len(), 3);
        assert_eq!(list.candidates[0].0, "2");
        assert!((list.candidates[0].1 - 1.0).abs() < 1e-12);
        assert!(list.candidates.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn milk_entries_outrank_others() {
        let snap = corpus(&[("10", "Goat Milk"), ("11", "Whole Milk"), ("12", "Beef, ground"), ("13", "Carrots, raw")]);
        let index = MatchIndex::build(&TrigramHasher, &snap).unwrap();
        let list = rank_candidates(&TrigramHasher, &index, "Milk", 4).unwrap();
        let top: BTreeSet<&str> = list.candidates[..2].iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(top, ["10", "11"].into_iter().collect());
        assert!(list.candidates[1].1 > list.candidates[2].1);
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let snap = corpus(&[("b", "Salt"), ("a", "salt"), ("c", "SALT")]);
        let index = MatchIndex::build(&TrigramHasher, &snap).unwrap();
        let list = rank_candidates(&TrigramHasher, &index, "salt", 3).unwrap();
        let ids: Vec<&str> = list.candidates.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn empty_corpus_rejected() {
        let snap = CorpusSnapshot::default();
        assert_eq!(MatchIndex::build(&TrigramHasher, &snap).unwrap_err(), EmbedError::EmptyCorpus);
    }

    #[test]
    fn two_stage_paths() {
        let snap = corpus(&[("1", "Adobo Seasoning"), ("2", "Seasoning Mix Dry Sazon Coriander & Annatto"), ("3", "Whole Milk")]);
        let index = MatchIndex::build(&TrigramHasher, &snap).unwrap();
        let ingredients: BTreeSet<String> =
            ["Adobo Seasoning", "Milk", "Mystery item"].iter().map(|s| s.to_string()).collect();
        let mut overrides = OverrideTable::default();
        overrides.insert("Adobo seasoning", "2", MatchStage::Manual);
        let out = match_ingredients(&TrigramHasher, &index, &ingredients, &overrides, DEFAULT_TAU).unwrap();
        // adobo: override wins even though entry 1 is an exact string match
        let adobo = out.records.iter().find(|r| r.ingredient_text == "adobo seasoning").unwrap();
        assert_eq!((adobo.mfd_id.as_str(), adobo.stage, adobo.decided_by), ("2", MatchStage::Manual, DecidedBy::Override));
        assert!(adobo.score < DEFAULT_TAU);
        assert!(out.records.iter().all(|r| r.ingredient_text != "mystery item"));
        let queued: Vec<&str> = out.review_queue.iter().map(|c| c.ingredient_text.as_str()).collect();
        assert!(queued.contains(&"mystery item"));
        assert_eq!(out.records.len() + out.review_queue.len(), 3);
    }

    #[test]
    fn exact_match_is_auto() {
        let snap = corpus(&[("1", "Black beans"), ("2", "Brown rice")]);
        let index = MatchIndex::build(&TrigramHasher, &snap).unwrap();
        let out = match_two_stage(&TrigramHasher, &index, &snap, &OverrideTable::default(), 0.85).unwrap();
        assert_eq!(out.records.len(), 2);
        assert!(out.records.iter().all(|r| r.stage == MatchStage::Auto && r.decided_by == DecidedBy::Threshold));
        assert_eq!(match_rate(&out.records, 2), 1.0);
    }

    #[test]
    fn invalid_tau_and_unknown_override() {
        let snap = corpus(&[("1", "Black beans")]);
        let index = MatchIndex::build(&TrigramHasher, &snap).unwrap();
        let none = OverrideTable::default();
        for tau in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                match_two_stage(&TrigramHasher, &index, &snap, &none, tau),
                Err(EmbedError::InvalidThreshold(_))
            ));
        }
        let mut bad = OverrideTable::default();
        bad.insert("black beans", "999", MatchStage::Manual);
        assert!(matches!(
            match_two_stage(&TrigramHasher, &index, &snap, &bad, 0.85),
            Err(EmbedError::UnknownOverrideTarget { .. })
        ));
    }

    #[test]
    fn match_rate_cases() {
        let rec = |stage| MatchRecord {
            ingredient_text: "x".into(),
            mfd_id: "1".into(),
            score: 1.0,
            stage,
            decided_by: DecidedBy::Threshold,
        };
        let three_auto = vec![rec(MatchStage::Auto), rec(MatchStage::Auto), rec(MatchStage::Auto), rec(MatchStage::Manual)];
        assert_eq!(match_rate(&three_auto, 4), 0.75);
        assert_eq!(match_rate(&[], 10), 0.0);
        let mut many: Vec<MatchRecord> = (0..87).map(|_| rec(MatchStage::Auto)).collect();
        many.extend((0..13).map(|_| rec(MatchStage::ReviewedTop5)));
        assert_eq!(match_rate(&many, 100), 0.87);
    }

    #[test]
    fn override_csv_is_append_wins() {
        let csv = "ingredient_text,mfd_id,stage\nMilk,1,ReviewedTop5\n milk ,2,Manual\nSalt,3,Manual\n";
        let t = OverrideTable::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("MILK").unwrap(), &Override { mfd_id: "2".into(), stage: MatchStage::Manual });
        let mut twice = t.clone();
        twice.extend(&t);
        assert_eq!(twice, t);
        assert!(OverrideTable::from_csv("ingredient_text,mfd_id,stage\nMilk,1,Auto\n".as_bytes()).is_err());
    }

    #[test]
    fn precomputed_vectors_round_trip() {
        let v: Vec<String> = (0..EMBEDDING_DIM).map(|i| ((i % 7) as f64 * 0.5).to_string()).collect();
        let tsv = format!("whole milk\t{}\n", v.join(" "));
        let p = PrecomputedVectors::from_tsv(tsv.as_bytes()).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.embed("Whole, Milk").unwrap().values()[3], 1.5);
        assert_eq!(p.embed("goat milk"), Err(EmbedError::MissingVector("goat milk".into())));
        assert!(PrecomputedVectors::from_tsv("x\t1 2 3\n".as_bytes()).is_err());
    }

    #[test]
    fn review_queue_csv_layout() {
        let q = vec![CandidateList { ingredient_text: "adobo".into(), candidates: vec![("2".into(), 0.5), ("1".into(), 0.25)] }];
        let mut buf = Vec::new();
        write_review_queue(&q, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "ingredient_text,rank,mfd_id,score\nadobo,1,2,0.5\nadobo,2,1,0.25\n");
    }
}
