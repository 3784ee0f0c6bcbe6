//! Statistics over influence ratios and lifetimes: KS tests, median
//! confidence intervals and per-category summaries.

pub mod ks;
pub mod median;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::alignment::Bin;
use crate::ingest::{Category, ChangeRecord};
use crate::survival::{kaplan_meier, median_survival, DurationSample};

pub use ks::{kolmogorov_sf, ks_two_sample, KsResult};
pub use median::{median_ci, MedianCI};

pub const ALPHA: f64 = 0.05;
pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains NaN")]
    NotANumber,
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RatioSide {
    Pre,
    Post,
}

impl RatioSide {
    pub fn as_str(self) -> &'static str {
        match self {
            RatioSide::Pre => "rho_pre",
            RatioSide::Post => "rho_post",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsDecision {
    Reject,
    FailToReject,
    NotApplicable,
}

impl KsDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            KsDecision::Reject => "REJECT",
            KsDecision::FailToReject => "FAIL_TO_REJECT",
            KsDecision::NotApplicable => "NOT_APPLICABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsRow {
    pub side: RatioSide,
    pub first: Category,
    pub second: Category,
    pub result: Option<KsResult>,
    pub decision: KsDecision,
}

/// The category pairs compared: (C, P), (C, I), (P, I).
pub const CATEGORY_PAIRS: [(Category, Category); 3] = [
    (Category::Commit, Category::PullRequest),
    (Category::Commit, Category::Issue),
    (Category::PullRequest, Category::Issue),
];

/// One KS row per category pair and ratio side. Pairs where either side has
/// no samples are marked not applicable.
pub fn pairwise_ks(samples: &BTreeMap<(RatioSide, Category), Vec<f64>>) -> Vec<KsRow> {
    let empty = Vec::new();
    let mut rows = Vec::new();
    for side in [RatioSide::Pre, RatioSide::Post] {
        for (a, b) in CATEGORY_PAIRS {
            let x = samples.get(&(side, a)).unwrap_or(&empty);
            let y = samples.get(&(side, b)).unwrap_or(&empty);
            let result = ks_two_sample(x, y).ok();
            let decision = match &result {
                None => KsDecision::NotApplicable,
                Some(r) if r.rejects(ALPHA) => KsDecision::Reject,
                Some(_) => KsDecision::FailToReject,
            };
            rows.push(KsRow {
                side,
                first: a,
                second: b,
                result,
                decision,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: &'static str,
    pub n: usize,
    pub ci: Option<MedianCI>,
}

impl MetricSummary {
    fn of(metric: &'static str, values: &[f64]) -> Self {
        MetricSummary {
            metric,
            n: values.len(),
            ci: median_ci(values, CI_LEVEL).ok(),
        }
    }
}

/// Cohort sizes and median lifetime (days).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CohortSummary {
    pub n: usize,
    pub events: usize,
    pub median_days: Option<f64>,
}

fn cohort_summary<'a>(samples: impl Iterator<Item = &'a DurationSample>) -> CohortSummary {
    let v: Vec<&DurationSample> = samples.collect();
    let events = v.iter().filter(|s| s.event).count();
    let median_days = kaplan_meier(v.iter().copied())
        .ok()
        .and_then(|c| median_survival(&c));
    CohortSummary {
        n: v.len(),
        events,
        median_days,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategorySummary {
    pub category: Category,
    pub changes: usize,
    pub metrics: Vec<MetricSummary>,
    pub bins_pre: BTreeMap<Bin, usize>,
    pub bins_post: BTreeMap<Bin, usize>,
    pub survival_all: CohortSummary,
    pub survival_influenced: CohortSummary,
    pub survival_uninfluenced: CohortSummary,
}

/// Per-category summary table in the order commit, pull request, issue.
/// `bins` holds `(category, bin_pre, bin_post)` for every aligned change.
pub fn summarize_categories(
    records: &[ChangeRecord],
    bins: &[(Category, Bin, Bin)],
    durations: &[DurationSample],
) -> Vec<CategorySummary> {
    Category::ALL
        .into_iter()
        .map(|cat| {
            let live: Vec<&ChangeRecord> = records
                .iter()
                .filter(|r| r.is_live() && r.category == Some(cat))
                .collect();
            let per_change = |f: &dyn Fn(&ChangeRecord) -> usize| -> Vec<f64> {
                live.iter().map(|r| f(r) as f64).collect()
            };
            let prompts_per_conv: Vec<f64> = live
                .iter()
                .flat_map(|r| r.conversations.iter())
                .map(|c| c.turns.iter().filter(|t| !t.prompt_text.is_empty()).count() as f64)
                .collect();
            let metrics = vec![
                MetricSummary::of("conversations_per_change", &per_change(&|r| r.conversation_count())),
                MetricSummary::of("prompts_per_conversation", &prompts_per_conv),
                MetricSummary::of("prompt_tokens_per_change", &per_change(&|r| r.prompt_tokens())),
                MetricSummary::of("answer_tokens_per_change", &per_change(&|r| r.answer_tokens())),
            ];

            let mut bins_pre: BTreeMap<Bin, usize> = Bin::ALL.iter().map(|b| (*b, 0)).collect();
            let mut bins_post = bins_pre.clone();
            for (c, pre, post) in bins {
                if *c == cat {
                    *bins_pre.entry(*pre).or_default() += 1;
                    *bins_post.entry(*post).or_default() += 1;
                }
            }

            let in_cat = || durations.iter().filter(move |s| s.category == cat);
            CategorySummary {
                category: cat,
                changes: live.len(),
                metrics,
                bins_pre,
                bins_post,
                survival_all: cohort_summary(in_cat()),
                survival_influenced: cohort_summary(in_cat().filter(|s| s.influenced)),
                survival_uninfluenced: cohort_summary(in_cat().filter(|s| !s.influenced)),
            }
        })
        .collect()
}
