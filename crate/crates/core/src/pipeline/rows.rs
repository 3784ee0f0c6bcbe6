//! Row types of the CSV artifacts exchanged between stages.

use serde::{Deserialize, Serialize};

use crate::alignment::Bin;
use crate::ingest::Category;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRow {
    pub category: Category,
    pub repo_url: String,
    pub change_id: String,
    pub via: String,
    pub base_commit: String,
    pub head_commit: String,
    pub main_branch: String,
    pub tip_commit: String,
    pub hunks: usize,
    pub binary_files: usize,
    pub matched_pre: usize,
    pub eligible_pre: usize,
    pub rho_pre: f64,
    pub bin_pre: Bin,
    pub matched_post: usize,
    pub eligible_post: usize,
    pub rho_post: f64,
    pub bin_post: Bin,
    pub flags: String,
}

pub const ALIGNMENT_HEADER: &[&str] = &[
    "category",
    "repo_url",
    "change_id",
    "via",
    "base_commit",
    "head_commit",
    "main_branch",
    "tip_commit",
    "hunks",
    "binary_files",
    "matched_pre",
    "eligible_pre",
    "rho_pre",
    "bin_pre",
    "matched_post",
    "eligible_post",
    "rho_post",
    "bin_post",
    "flags",
];

impl AlignmentRow {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.split(';').any(|f| f == flag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub category: Category,
    pub repo_url: String,
    pub change_id: String,
    pub via: String,
    pub head_commit: String,
    pub main_branch: String,
    pub tip_commit: String,
    pub file: String,
    pub line_no: u32,
    pub influenced: bool,
    pub score: Option<f64>,
    pub segment: String,
    pub content: String,
}

pub const LABEL_HEADER: &[&str] = &[
    "category",
    "repo_url",
    "change_id",
    "via",
    "head_commit",
    "main_branch",
    "tip_commit",
    "file",
    "line_no",
    "influenced",
    "score",
    "segment",
    "content",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRow {
    pub category: String,
    pub repo_url: String,
    pub change_id: String,
    pub via: String,
    pub reason: String,
    pub detail: String,
}

pub const SKIP_HEADER: &[&str] = &["category", "repo_url", "change_id", "via", "reason", "detail"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub category: Category,
    pub repo_url: String,
    pub change_id: String,
    pub via: String,
    pub file: String,
    pub line_no: u32,
    pub influenced: bool,
    pub birth_commit: String,
    pub birth_time: i64,
    pub last_commit: String,
    pub death_commit: String,
    pub death_time: Option<i64>,
    pub censored: bool,
    pub horizon_time: i64,
    pub duration_seconds: i64,
    pub duration_days: f64,
    pub clamped: bool,
}

pub const SAMPLE_HEADER: &[&str] = &[
    "category",
    "repo_url",
    "change_id",
    "via",
    "file",
    "line_no",
    "influenced",
    "birth_commit",
    "birth_time",
    "last_commit",
    "death_commit",
    "death_time",
    "censored",
    "horizon_time",
    "duration_seconds",
    "duration_days",
    "clamped",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSkipRow {
    pub repo_url: String,
    pub head_commit: String,
    pub file: String,
    pub line_no: u32,
    pub reason: String,
}

pub const LINE_SKIP_HEADER: &[&str] = &["repo_url", "head_commit", "file", "line_no", "reason"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub cohort: String,
    pub n: usize,
    pub events: usize,
    pub censored: usize,
    pub median_days: Option<f64>,
}

pub const COHORT_HEADER: &[&str] = &["cohort", "n", "events", "censored", "median_days"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub category: Category,
    pub changes: usize,
    pub metric: String,
    pub n: usize,
    pub median: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub ci_coverage: Option<f64>,
    pub degenerate: Option<bool>,
}

pub const SUMMARY_HEADER: &[&str] = &[
    "category",
    "changes",
    "metric",
    "n",
    "median",
    "ci_lo",
    "ci_hi",
    "ci_coverage",
    "degenerate",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinRow {
    pub category: Category,
    pub side: String,
    pub bin: Bin,
    pub count: usize,
}

pub const BIN_HEADER: &[&str] = &["category", "side", "bin", "count"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsOutRow {
    pub side: String,
    pub first: Category,
    pub second: Category,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub decision: String,
}

pub const KS_HEADER: &[&str] = &[
    "side",
    "first",
    "second",
    "m",
    "n",
    "statistic",
    "p_value",
    "decision",
];
