//! Loading of chat-linked change datasets.
//!
//! The input is a single JSON document:
//!
//! ```json
//! {
//!   "schema_version": "1",
//!   "entries": [
//!     {
//!       "category": "commit",
//!       "repo_url": "https://github.com/owner/repo",
//!       "change_id": "0123abcd...",
//!       "conversations": [
//!         {
//!           "conversation_id": "c-1",
//!           "turns": [
//!             { "prompt": "...", "answer": "...",
//!               "listings": [ { "language": "rust", "content": "..." } ] }
//!           ]
//!         }
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! `conversations: null` marks a conversation whose shared link has expired.
//! Entries may also carry linkage metadata used to resolve the change in a
//! clone: `head_commit` and `target_branch` for pull requests, a recorded
//! `merged` flag, `closed_by` (a list of commit / pull request links) for
//! issues, and an opaque `repo_meta` object with pre-fetched repository
//! metrics.
//!
//! Structurally invalid entries are never dropped: they load as
//! [`RecordStatus::Malformed`] with a diagnostic naming the offending field.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read dataset {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset is not valid JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("unsupported schema_version: expected \"{expected}\", found {found}")]
    SchemaVersion { expected: String, found: String },
    #[error("invalid dataset document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Commit,
    PullRequest,
    Issue,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Commit, Category::PullRequest, Category::Issue];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Commit => "commit",
            Category::PullRequest => "pull_request",
            Category::Issue => "issue",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        match s {
            "commit" => Some(Category::Commit),
            "pull_request" => Some(Category::PullRequest),
            "issue" => Some(Category::Issue),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordStatus {
    Live,
    ExpiredLink,
    Malformed,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Live => "LIVE",
            RecordStatus::ExpiredLink => "EXPIRED_LINK",
            RecordStatus::Malformed => "MALFORMED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeListing {
    pub language_hint: Option<String>,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub prompt_text: String,
    pub answer_text: String,
    /// Code listings attached to the answer.
    pub listings: Vec<CodeListing>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub conversation_id: String,
    pub turns: Vec<Turn>,
}

/// A commit or pull request that closed an issue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeLink {
    pub category: Category,
    pub change_id: String,
    pub head_commit: Option<String>,
    pub target_branch: Option<String>,
    pub merged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeRecord {
    /// Position of the entry in the source document.
    pub index: usize,
    /// `None` only for malformed entries whose category could not be read.
    pub category: Option<Category>,
    pub repo_url: String,
    pub change_id: String,
    pub head_commit: Option<String>,
    pub target_branch: Option<String>,
    pub merged: Option<bool>,
    pub closed_by: Vec<ChangeLink>,
    pub repo_meta: Option<Value>,
    pub conversations: Vec<Conversation>,
    pub status: RecordStatus,
    pub diagnostic: Option<String>,
    raw: Option<Value>,
}

impl ChangeRecord {
    pub fn is_live(&self) -> bool {
        self.status == RecordStatus::Live
    }

    pub fn conversation_count(&self) -> usize {
        self.conversations.len()
    }

    pub fn prompt_tokens(&self) -> usize {
        self.turns().map(|t| token_count(&t.prompt_text)).sum()
    }

    pub fn answer_tokens(&self) -> usize {
        self.turns().map(|t| token_count(&t.answer_text)).sum()
    }

    fn turns(&self) -> impl Iterator<Item = &Turn> {
        self.conversations.iter().flat_map(|c| c.turns.iter())
    }

    /// Export back to the input schema. Malformed entries are emitted as
    /// they were read.
    pub fn to_json(&self) -> Value {
        if let Some(raw) = &self.raw {
            return raw.clone();
        }
        let mut m = Map::new();
        if let Some(c) = self.category {
            m.insert("category".into(), json!(c.as_str()));
        }
        m.insert("repo_url".into(), json!(self.repo_url));
        m.insert("change_id".into(), json!(self.change_id));
        link_fields_to_json(&mut m, &self.head_commit, &self.target_branch, self.merged);
        if !self.closed_by.is_empty() {
            let links: Vec<Value> = self
                .closed_by
                .iter()
                .map(|l| {
                    let mut lm = Map::new();
                    lm.insert("category".into(), json!(l.category.as_str()));
                    lm.insert("change_id".into(), json!(l.change_id));
                    link_fields_to_json(&mut lm, &l.head_commit, &l.target_branch, l.merged);
                    Value::Object(lm)
                })
                .collect();
            m.insert("closed_by".into(), Value::Array(links));
        }
        if let Some(meta) = &self.repo_meta {
            m.insert("repo_meta".into(), meta.clone());
        }
        let convs = match self.status {
            RecordStatus::ExpiredLink if self.conversations.is_empty() => Value::Null,
            _ => Value::Array(self.conversations.iter().map(conversation_to_json).collect()),
        };
        m.insert("conversations".into(), convs);
        Value::Object(m)
    }
}

fn link_fields_to_json(
    m: &mut Map<String, Value>,
    head: &Option<String>,
    target: &Option<String>,
    merged: Option<bool>,
) {
    if let Some(h) = head {
        m.insert("head_commit".into(), json!(h));
    }
    if let Some(t) = target {
        m.insert("target_branch".into(), json!(t));
    }
    if let Some(b) = merged {
        m.insert("merged".into(), json!(b));
    }
}

fn conversation_to_json(c: &Conversation) -> Value {
    let turns: Vec<Value> = c
        .turns
        .iter()
        .map(|t| {
            let listings: Vec<Value> = t
                .listings
                .iter()
                .map(|l| json!({"language": l.language_hint, "content": l.content}))
                .collect();
            json!({"prompt": t.prompt_text, "answer": t.answer_text, "listings": listings})
        })
        .collect();
    json!({"conversation_id": c.conversation_id, "turns": turns})
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StatusCounts {
    pub live: usize,
    pub expired_link: usize,
    pub malformed: usize,
}

impl StatusCounts {
    pub fn of(records: &[ChangeRecord]) -> Self {
        let mut c = StatusCounts::default();
        for r in records {
            match r.status {
                RecordStatus::Live => c.live += 1,
                RecordStatus::ExpiredLink => c.expired_link += 1,
                RecordStatus::Malformed => c.malformed += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.live + self.expired_link + self.malformed
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<ChangeRecord>,
    pub counts: StatusCounts,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Dataset, IngestError> {
    let doc: Value = serde_json::from_str(text)?;
    let top = doc
        .as_object()
        .ok_or_else(|| IngestError::Document("top level must be an object".into()))?;
    match top.get("schema_version") {
        Some(Value::String(v)) if v == SCHEMA_VERSION => {}
        other => {
            return Err(IngestError::SchemaVersion {
                expected: SCHEMA_VERSION.into(),
                found: other.map_or_else(|| "<missing>".to_string(), |v| v.to_string()),
            })
        }
    }
    let entries = top
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::Document("`entries` must be an array".into()))?;

    let records: Vec<ChangeRecord> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| parse_entry(i, e))
        .collect();
    let counts = StatusCounts::of(&records);
    Ok(Dataset { records, counts })
}

/// Serialize records to the input schema.
pub fn export_dataset(records: &[ChangeRecord]) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "entries": records.iter().map(ChangeRecord::to_json).collect::<Vec<_>>(),
    })
}

pub fn filter_live(records: &[ChangeRecord]) -> Vec<ChangeRecord> {
    records.iter().filter(|r| r.is_live()).cloned().collect()
}

/// Whitespace-delimited token count.
pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

type FieldResult<T> = Result<T, String>;

fn parse_entry(index: usize, entry: &Value) -> ChangeRecord {
    match parse_entry_fields(entry) {
        Ok(mut rec) => {
            rec.index = index;
            rec
        }
        Err(diag) => {
            let obj = entry.as_object();
            let str_field = |k: &str| {
                obj.and_then(|o| o.get(k))
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string()
            };
            ChangeRecord {
                index,
                category: obj
                    .and_then(|o| o.get("category"))
                    .and_then(Value::as_str)
                    .and_then(Category::parse),
                repo_url: str_field("repo_url"),
                change_id: str_field("change_id"),
                head_commit: None,
                target_branch: None,
                merged: None,
                closed_by: Vec::new(),
                repo_meta: None,
                conversations: Vec::new(),
                status: RecordStatus::Malformed,
                diagnostic: Some(format!("entries[{index}].{diag}")),
                raw: Some(entry.clone()),
            }
        }
    }
}

fn parse_entry_fields(entry: &Value) -> FieldResult<ChangeRecord> {
    let obj = entry
        .as_object()
        .ok_or_else(|| "<entry>: expected an object".to_string())?;
    let category = parse_category(obj, "category")?;
    let repo_url = required_str(obj, "repo_url")?;
    let change_id = required_str(obj, "change_id")?;
    if change_id.is_empty() {
        return Err("change_id: must be nonempty".into());
    }
    let (head_commit, target_branch, merged) = parse_link_fields(obj)?;

    let closed_by = match obj.get("closed_by") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(k, v)| parse_link(v).map_err(|e| format!("closed_by[{k}].{e}")))
            .collect::<FieldResult<Vec<_>>>()?,
        Some(_) => return Err("closed_by: expected an array".into()),
    };
    let repo_meta = match obj.get("repo_meta") {
        None | Some(Value::Null) => None,
        Some(v @ Value::Object(_)) => Some(v.clone()),
        Some(_) => return Err("repo_meta: expected an object".into()),
    };

    let (conversations, status) = match obj.get("conversations") {
        None | Some(Value::Null) => (Vec::new(), RecordStatus::ExpiredLink),
        Some(Value::Array(items)) => {
            let convs = items
                .iter()
                .enumerate()
                .map(|(k, v)| parse_conversation(v).map_err(|e| format!("conversations[{k}].{e}")))
                .collect::<FieldResult<Vec<_>>>()?;
            // a payload without a single turn carries nothing to compare
            let status = if convs.iter().any(|c| !c.turns.is_empty()) {
                RecordStatus::Live
            } else {
                RecordStatus::ExpiredLink
            };
            (convs, status)
        }
        Some(_) => return Err("conversations: expected an array or null".into()),
    };

    Ok(ChangeRecord {
        index: 0,
        category: Some(category),
        repo_url,
        change_id,
        head_commit,
        target_branch,
        merged,
        closed_by,
        repo_meta,
        conversations,
        status,
        diagnostic: None,
        raw: None,
    })
}

fn parse_category(obj: &Map<String, Value>, key: &str) -> FieldResult<Category> {
    let s = required_str(obj, key)?;
    Category::parse(&s).ok_or_else(|| {
        format!("{key}: unknown value {s:?} (expected commit, pull_request or issue)")
    })
}

fn parse_link(v: &Value) -> FieldResult<ChangeLink> {
    let obj = v
        .as_object()
        .ok_or_else(|| "<link>: expected an object".to_string())?;
    let category = parse_category(obj, "category")?;
    if category == Category::Issue {
        return Err("category: an issue cannot be closed by another issue".into());
    }
    let change_id = required_str(obj, "change_id")?;
    if change_id.is_empty() {
        return Err("change_id: must be nonempty".into());
    }
    let (head_commit, target_branch, merged) = parse_link_fields(obj)?;
    Ok(ChangeLink {
        category,
        change_id,
        head_commit,
        target_branch,
        merged,
    })
}

type LinkFields = (Option<String>, Option<String>, Option<bool>);

fn parse_link_fields(obj: &Map<String, Value>) -> FieldResult<LinkFields> {
    let head = optional_str(obj, "head_commit")?;
    let target = optional_str(obj, "target_branch")?;
    let merged = match obj.get("merged") {
        None | Some(Value::Null) => None,
        Some(Value::Bool(b)) => Some(*b),
        Some(_) => return Err("merged: expected a boolean".into()),
    };
    Ok((head, target, merged))
}

fn parse_conversation(v: &Value) -> FieldResult<Conversation> {
    let obj = v
        .as_object()
        .ok_or_else(|| "<conversation>: expected an object".to_string())?;
    let conversation_id = required_str(obj, "conversation_id")?;
    let turns = match obj.get("turns") {
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(k, t)| parse_turn(t).map_err(|e| format!("turns[{k}].{e}")))
            .collect::<FieldResult<Vec<_>>>()?,
        None => return Err("turns: missing".into()),
        Some(_) => return Err("turns: expected an array".into()),
    };
    Ok(Conversation {
        conversation_id,
        turns,
    })
}

fn parse_turn(v: &Value) -> FieldResult<Turn> {
    let obj = v
        .as_object()
        .ok_or_else(|| "<turn>: expected an object".to_string())?;
    let prompt_text = optional_str(obj, "prompt")?.unwrap_or_default();
    let answer_text = optional_str(obj, "answer")?.unwrap_or_default();
    if prompt_text.is_empty() && answer_text.is_empty() {
        return Err("prompt: prompt and answer are both empty".into());
    }
    let listings = match obj.get("listings") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(k, l)| parse_listing(l).map_err(|e| format!("listings[{k}].{e}")))
            .collect::<FieldResult<Vec<_>>>()?,
        Some(_) => return Err("listings: expected an array".into()),
    };
    Ok(Turn {
        prompt_text,
        answer_text,
        listings,
    })
}

fn parse_listing(v: &Value) -> FieldResult<CodeListing> {
    let obj = v
        .as_object()
        .ok_or_else(|| "<listing>: expected an object".to_string())?;
    let language_hint = optional_str(obj, "language")?;
    let content = required_str(obj, "content")?;
    if content.is_empty() {
        return Err("content: must be nonempty".into());
    }
    Ok(CodeListing {
        language_hint,
        content,
    })
}

fn required_str(obj: &Map<String, Value>, key: &str) -> FieldResult<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        None => Err(format!("{key}: missing")),
        Some(_) => Err(format!("{key}: expected a string")),
    }
}

fn optional_str(obj: &Map<String, Value>, key: &str) -> FieldResult<Option<String>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(format!("{key}: expected a string")),
    }
}
