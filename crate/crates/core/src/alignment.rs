//! Alignment of diff hunks with conversation segments.
//!
//! Each hunk side is compared against the candidate segments of a record:
//! prompts (and code fenced inside them) for the pre-image, answers and
//! their code listings for the post-image. The best segment is chosen per
//! hunk side by mean best-line similarity, then every eligible hunk line is
//! matched against that segment's lines and kept when the similarity is at
//! least the threshold.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gitbridge::{HunkImage, HunkLine, LineKind};
use crate::ingest::{ChangeRecord, Conversation};
use crate::similarity::{ratio_seq, ratio_upper_bound_seq, SimilarityScore};

pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignConfig {
    pub threshold: f64,
    /// Trim lines and collapse internal whitespace runs before comparing.
    pub normalize_whitespace: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            threshold: DEFAULT_THRESHOLD,
            normalize_whitespace: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Pre,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Section {
    PromptText,
    AnswerText,
    PromptListing(usize),
    AnswerListing(usize),
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Section::PromptText => f.write_str("prompt"),
            Section::AnswerText => f.write_str("answer"),
            Section::PromptListing(k) => write!(f, "prompt_listing[{k}]"),
            Section::AnswerListing(k) => write!(f, "answer_listing[{k}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegmentRef {
    pub conversation_index: usize,
    pub conversation_id: String,
    pub turn_index: usize,
    pub section: Section,
}

impl fmt::Display for SegmentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/turn[{}]/{}", self.conversation_id, self.turn_index, self.section)
    }
}

/// A candidate segment, split into normalized non-blank lines.
#[derive(Debug, Clone)]
pub struct Segment {
    pub reference: SegmentRef,
    pub lines: Vec<String>,
    chars: Vec<Vec<char>>,
}

impl Segment {
    fn new(reference: SegmentRef, text: &str, cfg: &AlignConfig) -> Option<Segment> {
        let lines: Vec<String> = text
            .lines()
            .map(|l| normalize_line(l, cfg))
            .filter(|l| !is_blank(l))
            .collect();
        if lines.is_empty() {
            return None;
        }
        let chars = lines.iter().map(|l| l.chars().collect()).collect();
        Some(Segment {
            reference,
            lines,
            chars,
        })
    }
}

pub fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

pub fn normalize_line(line: &str, cfg: &AlignConfig) -> String {
    if cfg.normalize_whitespace {
        line.split_whitespace().collect::<Vec<_>>().join(" ")
    } else {
        line.strip_suffix('\r').unwrap_or(line).to_string()
    }
}

/// Contents of triple-backtick fenced blocks. An unterminated fence runs to
/// the end of the text.
pub fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let fence = line.trim_start().starts_with("```");
        match (&mut current, fence) {
            (None, true) => current = Some(Vec::new()),
            (Some(body), true) => {
                if !body.is_empty() {
                    blocks.push(body.join("\n"));
                }
                current = None;
            }
            (Some(body), false) => body.push(line),
            (None, false) => {}
        }
    }
    if let Some(body) = current {
        if !body.is_empty() {
            blocks.push(body.join("\n"));
        }
    }
    blocks
}

/// Candidate segments of one record, in tie-break order: conversation,
/// turn, the turn's text, then its listings.
pub fn candidate_segments(record: &ChangeRecord, side: Side, cfg: &AlignConfig) -> Vec<Segment> {
    let mut out = Vec::new();
    for (ci, conv) in record.conversations.iter().enumerate() {
        push_conversation_segments(&mut out, ci, conv, side, cfg);
    }
    out
}

fn push_conversation_segments(
    out: &mut Vec<Segment>,
    ci: usize,
    conv: &Conversation,
    side: Side,
    cfg: &AlignConfig,
) {
    for (ti, turn) in conv.turns.iter().enumerate() {
        let make = |section: Section| SegmentRef {
            conversation_index: ci,
            conversation_id: conv.conversation_id.clone(),
            turn_index: ti,
            section,
        };
        match side {
            Side::Pre => {
                out.extend(Segment::new(make(Section::PromptText), &turn.prompt_text, cfg));
                for (k, block) in fenced_blocks(&turn.prompt_text).iter().enumerate() {
                    out.extend(Segment::new(make(Section::PromptListing(k)), block, cfg));
                }
            }
            Side::Post => {
                out.extend(Segment::new(make(Section::AnswerText), &turn.answer_text, cfg));
                let mut listings: Vec<String> =
                    turn.listings.iter().map(|l| l.content.clone()).collect();
                for block in fenced_blocks(&turn.answer_text) {
                    if !listings.iter().any(|l| l.trim() == block.trim()) {
                        listings.push(block);
                    }
                }
                for (k, text) in listings.iter().enumerate() {
                    out.extend(Segment::new(make(Section::AnswerListing(k)), text, cfg));
                }
            }
        }
    }
}

/// Eligible lines of one hunk side, normalized, with their position.
#[derive(Debug, Clone)]
pub struct SideLines {
    pub lines: Vec<HunkLine>,
    pub normalized: Vec<String>,
    chars: Vec<Vec<char>>,
}

impl SideLines {
    pub fn from_hunk(hunk: &HunkImage, side: Side, cfg: &AlignConfig) -> SideLines {
        let src = match side {
            Side::Pre => &hunk.pre_lines,
            Side::Post => &hunk.post_lines,
        };
        let mut lines = Vec::new();
        let mut normalized = Vec::new();
        for l in src {
            let n = normalize_line(&l.content, cfg);
            if !is_blank(&n) {
                lines.push(l.clone());
                normalized.push(n);
            }
        }
        let chars = normalized.iter().map(|l| l.chars().collect()).collect();
        SideLines {
            lines,
            normalized,
            chars,
        }
    }

    pub fn from_texts<S: AsRef<str>>(texts: &[S], cfg: &AlignConfig) -> SideLines {
        let hunk_lines: Vec<HunkLine> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| HunkLine {
                line_no: i as u32 + 1,
                content: t.as_ref().to_string(),
                kind: LineKind::Added,
            })
            .collect();
        let hunk = HunkImage {
            file_path: String::new(),
            pre_start: 0,
            pre_len: 0,
            post_start: 1,
            post_len: hunk_lines.len() as u32,
            pre_lines: Vec::new(),
            post_lines: hunk_lines,
        };
        SideLines::from_hunk(&hunk, Side::Post, cfg)
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Best similarity of `line` against any of `segment`'s lines, with the
/// index of the first segment line reaching it.
fn best_line_score(line: &[char], segment: &Segment) -> (usize, SimilarityScore) {
    let mut best = (0, SimilarityScore::ZERO);
    for (i, cand) in segment.chars.iter().enumerate() {
        let total = line.len() + cand.len();
        // cheap length bound first, then the character multiset bound
        let length_bound = SimilarityScore::from_counts(line.len().min(cand.len()), total);
        if i > 0 && length_bound <= best.1 {
            continue;
        }
        if i > 0 && ratio_upper_bound_seq(line, cand) <= best.1 {
            continue;
        }
        let s = ratio_seq(line, cand);
        if i == 0 || s > best.1 {
            best = (i, s);
        }
        if best.1 == SimilarityScore::ONE {
            break;
        }
    }
    best
}

/// Mean over hunk lines of the best per-line similarity to the segment.
pub fn segment_score(lines: &SideLines, segment: &Segment) -> f64 {
    if lines.is_empty() {
        return 0.0;
    }
    let sum: f64 = lines
        .chars
        .iter()
        .map(|l| best_line_score(l, segment).1.value())
        .sum();
    sum / lines.len() as f64
}

/// The most similar candidate segment, or `None` when the hunk side has no
/// eligible lines or the record offers no candidates. Ties keep the earlier
/// candidate.
pub fn select_best_segment<'a>(
    lines: &SideLines,
    candidates: &'a [Segment],
) -> Option<(&'a Segment, f64)> {
    if lines.is_empty() {
        return None;
    }
    let mut best: Option<(&Segment, f64)> = None;
    for seg in candidates {
        let score = segment_score(lines, seg);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((seg, score));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineMatch {
    /// Index into [`SideLines::lines`].
    pub hunk_line: usize,
    pub line_no: u32,
    pub kind: LineKind,
    pub segment_line: usize,
    pub score: SimilarityScore,
}

/// Match every eligible hunk line against the segment; keep those whose best
/// similarity is at least `threshold`.
pub fn align_lines(lines: &SideLines, segment: &Segment, threshold: f64) -> Vec<LineMatch> {
    debug_assert!(threshold > 0.0 && threshold <= 1.0);
    lines
        .chars
        .iter()
        .enumerate()
        .filter_map(|(i, l)| {
            let (seg_line, score) = best_line_score(l, segment);
            score.meets(threshold).then(|| LineMatch {
                hunk_line: i,
                line_no: lines.lines[i].line_no,
                kind: lines.lines[i].kind,
                segment_line: seg_line,
                score,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bin {
    #[serde(rename = "NO_IMPACT")]
    NoImpact,
    /// (0, 0.25]
    Q1,
    /// (0.25, 0.5]
    Q2,
    /// (0.5, 0.75]
    Q3,
    /// (0.75, 1]
    Q4,
}

impl Bin {
    pub const ALL: [Bin; 5] = [Bin::NoImpact, Bin::Q1, Bin::Q2, Bin::Q3, Bin::Q4];

    /// Bin of a ratio; only an exact zero is "no impact".
    pub fn from_ratio(rho: f64) -> Bin {
        if rho <= 0.0 {
            Bin::NoImpact
        } else if rho <= 0.25 {
            Bin::Q1
        } else if rho <= 0.5 {
            Bin::Q2
        } else if rho <= 0.75 {
            Bin::Q3
        } else {
            Bin::Q4
        }
    }

    /// Exact bin of `matched / eligible`, free of rounding.
    pub fn from_counts(matched: usize, eligible: usize) -> Bin {
        if matched == 0 || eligible == 0 {
            Bin::NoImpact
        } else if 4 * matched <= eligible {
            Bin::Q1
        } else if 2 * matched <= eligible {
            Bin::Q2
        } else if 4 * matched <= 3 * eligible {
            Bin::Q3
        } else {
            Bin::Q4
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bin::NoImpact => "NO_IMPACT",
            Bin::Q1 => "Q1",
            Bin::Q2 => "Q2",
            Bin::Q3 => "Q3",
            Bin::Q4 => "Q4",
        }
    }

    pub fn parse(s: &str) -> Option<Bin> {
        Bin::ALL.into_iter().find(|b| b.as_str() == s)
    }
}

impl fmt::Display for Bin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideAlignment {
    pub segment: Option<SegmentRef>,
    pub segment_score: f64,
    pub eligible: usize,
    pub matches: Vec<LineMatch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HunkAlignment {
    pub file_path: String,
    pub pre: SideAlignment,
    pub post: SideAlignment,
}

/// Influence label of one added line, consumed by survival analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct LineLabel {
    pub file_path: String,
    pub line_no: u32,
    pub content: String,
    pub influenced: bool,
    pub score: Option<SimilarityScore>,
    pub segment: Option<SegmentRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub hunks: Vec<HunkAlignment>,
    pub matched_pre: usize,
    pub eligible_pre: usize,
    pub matched_post: usize,
    pub eligible_post: usize,
    pub rho_pre: f64,
    pub rho_post: f64,
    pub bin_pre: Bin,
    pub bin_post: Bin,
    pub labels: Vec<LineLabel>,
}

impl AlignmentResult {
    pub fn degenerate_pre(&self) -> bool {
        self.eligible_pre == 0
    }

    pub fn degenerate_post(&self) -> bool {
        self.eligible_post == 0
    }
}

fn ratio_of(matched: usize, eligible: usize) -> f64 {
    if eligible == 0 {
        0.0
    } else {
        matched as f64 / eligible as f64
    }
}

fn align_side(lines: &SideLines, candidates: &[Segment], threshold: f64) -> SideAlignment {
    match select_best_segment(lines, candidates) {
        Some((seg, score)) => SideAlignment {
            segment: Some(seg.reference.clone()),
            segment_score: score,
            eligible: lines.len(),
            matches: align_lines(lines, seg, threshold),
        },
        None => SideAlignment {
            segment: None,
            segment_score: 0.0,
            eligible: lines.len(),
            matches: Vec::new(),
        },
    }
}

/// Align every hunk of a change with the record's conversations and
/// aggregate the per-change influence ratios.
pub fn influence_ratios(hunks: &[HunkImage], record: &ChangeRecord, cfg: &AlignConfig) -> AlignmentResult {
    let pre_candidates = candidate_segments(record, Side::Pre, cfg);
    let post_candidates = candidate_segments(record, Side::Post, cfg);

    let mut out_hunks = Vec::with_capacity(hunks.len());
    let mut labels = Vec::new();
    let (mut matched_pre, mut eligible_pre, mut matched_post, mut eligible_post) = (0, 0, 0, 0);

    for hunk in hunks {
        let pre_lines = SideLines::from_hunk(hunk, Side::Pre, cfg);
        let post_lines = SideLines::from_hunk(hunk, Side::Post, cfg);
        let pre = align_side(&pre_lines, &pre_candidates, cfg.threshold);
        let post = align_side(&post_lines, &post_candidates, cfg.threshold);

        matched_pre += pre.matches.len();
        eligible_pre += pre.eligible;
        matched_post += post.matches.len();
        eligible_post += post.eligible;

        let by_line: HashMap<usize, &LineMatch> =
            post.matches.iter().map(|m| (m.hunk_line, m)).collect();
        for (i, line) in post_lines.lines.iter().enumerate() {
            if line.kind != LineKind::Added {
                continue;
            }
            let m = by_line.get(&i);
            labels.push(LineLabel {
                file_path: hunk.file_path.clone(),
                line_no: line.line_no,
                content: line.content.clone(),
                influenced: m.is_some(),
                score: m.map(|m| m.score),
                segment: m.and(post.segment.clone()),
            });
        }
        out_hunks.push(HunkAlignment {
            file_path: hunk.file_path.clone(),
            pre,
            post,
        });
    }

    AlignmentResult {
        hunks: out_hunks,
        matched_pre,
        eligible_pre,
        matched_post,
        eligible_post,
        rho_pre: ratio_of(matched_pre, eligible_pre),
        rho_post: ratio_of(matched_post, eligible_post),
        bin_pre: Bin::from_counts(matched_pre, eligible_pre),
        bin_post: Bin::from_counts(matched_post, eligible_post),
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_dataset;
    use crate::similarity::ratio;
    use serde_json::json;

    fn record(convs: serde_json::Value) -> ChangeRecord {
        let doc = json!({"schema_version": "1", "entries": [{
            "category": "commit", "repo_url": "u", "change_id": "c", "conversations": convs
        }]});
        parse_dataset(&doc.to_string()).unwrap().records.remove(0)
    }

    fn turn(prompt: &str, answer: &str, listings: &[&str]) -> serde_json::Value {
        let ls: Vec<_> = listings.iter().map(|c| json!({"language": null, "content": c})).collect();
        json!({"prompt": prompt, "answer": answer, "listings": ls})
    }

    fn hunk(pre: &[(&str, LineKind)], post: &[(&str, LineKind)]) -> HunkImage {
        let mk = |v: &[(&str, LineKind)]| -> Vec<HunkLine> {
            v.iter()
                .enumerate()
                .map(|(i, (c, k))| HunkLine {
                    line_no: i as u32 + 1,
                    content: c.to_string(),
                    kind: *k,
                })
                .collect()
        };
        HunkImage {
            file_path: "f.py".into(),
            pre_start: 1,
            pre_len: pre.len() as u32,
            post_start: 1,
            post_len: post.len() as u32,
            pre_lines: mk(pre),
            post_lines: mk(post),
        }
    }

    #[test]
    fn normalization() {
        let cfg = AlignConfig::default();
        assert_eq!(normalize_line("   return  x +\t1  ", &cfg), "return x + 1");
        let raw = AlignConfig {
            normalize_whitespace: false,
            ..cfg
        };
        assert_eq!(normalize_line("  a  b\r", &raw), "  a  b");
    }

    #[test]
    fn fenced_block_detection() {
        let text = "Try this:\n```python\ndef f():\n    return 1\n```\nand\n```\nx = 2\n";
        assert_eq!(fenced_blocks(text), vec!["def f():\n    return 1", "x = 2"]);
        assert!(fenced_blocks("no code here").is_empty());
        assert!(fenced_blocks("```\n```").is_empty());
    }

    #[test]
    fn best_segment_is_identical_listing() {
        let rec = record(json!([{"conversation_id": "c1", "turns": [
            turn("q0", "a0", &["print('zero')"]),
            turn("q1", "a1", &["unrelated = True"]),
            turn("q2", "here you go", &["total = a + b\nreturn total"]),
        ]}]));
        let cfg = AlignConfig::default();
        let cands = candidate_segments(&rec, Side::Post, &cfg);
        let lines = SideLines::from_texts(&["total = a + b", "    return total"], &cfg);
        let (seg, score) = select_best_segment(&lines, &cands).unwrap();
        assert_eq!(seg.reference.turn_index, 2);
        assert_eq!(seg.reference.section, Section::AnswerListing(0));
        assert_eq!(score, 1.0);
    }

    #[test]
    fn all_zero_scores_pick_first_candidate() {
        let rec = record(json!([{"conversation_id": "c1", "turns": [
            turn("q", "xyz", &["xyz"]),
            turn("q", "zzz", &[]),
        ]}]));
        let cfg = AlignConfig::default();
        let cands = candidate_segments(&rec, Side::Post, &cfg);
        let lines = SideLines::from_texts(&["abc"], &cfg);
        let (seg, score) = select_best_segment(&lines, &cands).unwrap();
        assert_eq!(score, 0.0);
        assert_eq!(seg.reference.turn_index, 0);
        assert_eq!(seg.reference.section, Section::AnswerText);
        assert!(align_lines(&lines, seg, 0.6).is_empty());
    }

    #[test]
    fn no_candidates_or_no_lines() {
        let rec = record(json!([{"conversation_id": "c1", "turns": []}]));
        let cfg = AlignConfig::default();
        let cands = candidate_segments(&rec, Side::Post, &cfg);
        assert!(cands.is_empty());
        let lines = SideLines::from_texts(&["abc"], &cfg);
        assert!(select_best_segment(&lines, &cands).is_none());

        let rec = record(json!([{"conversation_id": "c1", "turns": [turn("q", "abc", &[])]}]));
        let cands = candidate_segments(&rec, Side::Post, &cfg);
        let blank = SideLines::from_texts(&["", "   "], &cfg);
        assert!(blank.is_empty());
        assert!(select_best_segment(&blank, &cands).is_none());
    }

    #[test]
    fn prompt_side_uses_prompt_text_and_fences() {
        let rec = record(json!([{"conversation_id": "c1", "turns": [
            turn("Fix this:\n```\nold_call(1)\n```", "answer", &["new_call(1)"]),
        ]}]));
        let cfg = AlignConfig::default();
        let pre = candidate_segments(&rec, Side::Pre, &cfg);
        let sections: Vec<_> = pre.iter().map(|s| s.reference.section).collect();
        assert_eq!(sections, [Section::PromptText, Section::PromptListing(0)]);
        let post = candidate_segments(&rec, Side::Post, &cfg);
        let sections: Vec<_> = post.iter().map(|s| s.reference.section).collect();
        assert_eq!(sections, [Section::AnswerText, Section::AnswerListing(0)]);
    }

    #[test]
    fn answer_fences_duplicating_listings_are_not_repeated() {
        let rec = record(json!([{"conversation_id": "c1", "turns": [
            turn("q", "```\nx = 1\n```\n```\ny = 2\n```", &["x = 1"]),
        ]}]));
        let post = candidate_segments(&rec, Side::Post, &AlignConfig::default());
        let listing_lines: Vec<_> = post[1..].iter().map(|s| s.lines.clone()).collect();
        assert_eq!(listing_lines, vec![vec!["x = 1".to_string()], vec!["y = 2".to_string()]]);
    }

    #[test]
    fn align_lines_examples() {
        let cfg = AlignConfig::default();
        let seg = Segment::new(
            SegmentRef {
                conversation_index: 0,
                conversation_id: "c".into(),
                turn_index: 0,
                section: Section::AnswerText,
            },
            "foo(a)",
            &cfg,
        )
        .unwrap();
        let lines = SideLines::from_texts(&["return x + 1"], &cfg);
        let seg2 = Segment::new(seg.reference.clone(), "return x + 1", &cfg).unwrap();
        let m = align_lines(&lines, &seg2, 0.6);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].score.value(), 1.0);

        // "bar(b)" vs "foo(a)": only "(" and ")" match, 2*2/12 < 0.6
        assert!(ratio("bar(b)", "foo(a)").value() < 0.6);
        let lines = SideLines::from_texts(&["foo(a)", "bar(b)"], &cfg);
        let m = align_lines(&lines, &seg, 0.6);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].hunk_line, 0);
    }

    #[test]
    fn threshold_is_inclusive() {
        let cfg = AlignConfig::default();
        let seg = Segment::new(
            SegmentRef {
                conversation_index: 0,
                conversation_id: "c".into(),
                turn_index: 0,
                section: Section::AnswerText,
            },
            "abcfg",
            &cfg,
        )
        .unwrap();
        assert_eq!(ratio("abcde", "abcfg").value(), 0.6);
        let lines = SideLines::from_texts(&["abcde"], &cfg);
        assert_eq!(align_lines(&lines, &seg, 0.6).len(), 1);
        assert!(align_lines(&lines, &seg, 0.61).is_empty());
    }

    #[test]
    fn bins() {
        let cases = [
            (0.0, Bin::NoImpact),
            (0.25, Bin::Q1),
            (0.26, Bin::Q2),
            (0.5, Bin::Q2),
            (0.51, Bin::Q3),
            (0.75, Bin::Q3),
            (0.76, Bin::Q4),
            (1.0, Bin::Q4),
        ];
        for (rho, bin) in cases {
            assert_eq!(Bin::from_ratio(rho), bin, "rho={rho}");
        }
        assert_eq!(Bin::from_counts(0, 4), Bin::NoImpact);
        assert_eq!(Bin::from_counts(1, 4), Bin::Q1);
        assert_eq!(Bin::from_counts(2, 4), Bin::Q2);
        assert_eq!(Bin::from_counts(3, 4), Bin::Q3);
        assert_eq!(Bin::from_counts(4, 4), Bin::Q4);
        assert_eq!(Bin::from_counts(1, 1000), Bin::Q1);
        assert_eq!(Bin::from_counts(0, 0), Bin::NoImpact);
        for b in Bin::ALL {
            assert_eq!(Bin::parse(b.as_str()), Some(b));
        }
    }

    #[test]
    fn bin_counts_agree_with_ratio() {
        for e in 1..=40usize {
            for m in 0..=e {
                assert_eq!(Bin::from_counts(m, e), Bin::from_ratio(m as f64 / e as f64), "{m}/{e}");
            }
        }
    }

    #[test]
    fn influence_ratio_examples() {
        let rec = record(json!([{"conversation_id": "c1", "turns": [
            turn("q", "a", &["alpha_value = compute_alpha()"]),
        ]}]));
        let cfg = AlignConfig::default();
        let added = |v: &[&'static str]| -> Vec<(&'static str, LineKind)> {
            v.iter().map(|s| (*s, LineKind::Added)).collect()
        };
        let h = hunk(
            &[],
            &added(&[
                "alpha_value = compute_alpha()",
                "0000000000000000",
                "1111111111111111",
                "2222222222222222",
            ]),
        );
        let r = influence_ratios(&[h], &rec, &cfg);
        assert_eq!((r.matched_post, r.eligible_post), (1, 4));
        assert_eq!(r.rho_post, 0.25);
        assert_eq!(r.bin_post, Bin::Q1);
        assert!(r.degenerate_pre());
        assert_eq!(r.bin_pre, Bin::NoImpact);
        assert_eq!(r.labels.len(), 4);
        assert!(r.labels[0].influenced);
        assert!(!r.labels[1].influenced);

        let h = hunk(&[], &added(&["alpha_value = compute_alpha()"; 4]));
        let r = influence_ratios(&[h], &rec, &cfg);
        assert_eq!(r.rho_post, 1.0);
        assert_eq!(r.bin_post, Bin::Q4);

        let h = hunk(&[], &added(&["9999999999999999"]));
        let r = influence_ratios(&[h], &rec, &cfg);
        assert_eq!(r.rho_post, 0.0);
        assert_eq!(r.bin_post, Bin::NoImpact);
    }

    #[test]
    fn context_counts_but_is_never_labeled() {
        let rec = record(json!([{"conversation_id": "c1", "turns": [
            turn("def helper():\n    pass", "a", &["def helper():\n    return 42"]),
        ]}]));
        let cfg = AlignConfig::default();
        let h = hunk(
            &[("def helper():", LineKind::Context), ("    pass", LineKind::Removed)],
            &[("def helper():", LineKind::Context), ("    return 42", LineKind::Added), ("", LineKind::Added)],
        );
        let r = influence_ratios(&[h], &rec, &cfg);
        assert_eq!((r.matched_pre, r.eligible_pre), (2, 2));
        assert_eq!((r.matched_post, r.eligible_post), (2, 2));
        assert_eq!(r.labels.len(), 1);
        assert_eq!(r.labels[0].line_no, 2);
        assert!(r.labels[0].influenced);
    }
}
