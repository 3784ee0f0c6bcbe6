//! Parser for `git diff` unified output.

use super::GitError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LineKind {
    Context,
    Removed,
    Added,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HunkLine {
    /// 1-based line number on this side of the diff.
    pub line_no: u32,
    pub content: String,
    pub kind: LineKind,
}

/// One diff hunk split into the pre-image (context + removed lines, numbered
/// in the base) and the post-image (context + added lines, numbered in the
/// head).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HunkImage {
    pub file_path: String,
    pub pre_start: u32,
    pub pre_len: u32,
    pub post_start: u32,
    pub post_len: u32,
    pub pre_lines: Vec<HunkLine>,
    pub post_lines: Vec<HunkLine>,
}

impl HunkImage {
    pub fn added(&self) -> impl Iterator<Item = &HunkLine> {
        self.post_lines.iter().filter(|l| l.kind == LineKind::Added)
    }

    pub fn removed(&self) -> impl Iterator<Item = &HunkLine> {
        self.pre_lines.iter().filter(|l| l.kind == LineKind::Removed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FileDiff {
    /// `None` for `/dev/null` (file created).
    pub old_path: Option<String>,
    /// `None` for `/dev/null` (file deleted).
    pub new_path: Option<String>,
    pub binary: bool,
    pub hunks: Vec<HunkImage>,
}

impl FileDiff {
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy)]
struct HunkHeader {
    pre_start: u32,
    pre_len: u32,
    post_start: u32,
    post_len: u32,
}

fn parse_range(s: &str) -> Option<(u32, u32)> {
    match s.split_once(',') {
        Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_hunk_header(line: &str) -> Option<HunkHeader> {
    let rest = line.strip_prefix("@@ -")?;
    let (ranges, _) = rest.split_once(" @@")?;
    let (pre, post) = ranges.split_once(" +")?;
    let (pre_start, pre_len) = parse_range(pre)?;
    let (post_start, post_len) = parse_range(post)?;
    Some(HunkHeader {
        pre_start,
        pre_len,
        post_start,
        post_len,
    })
}

/// Undo git's C-style path quoting (`"a\tb"`, octal escapes for non-ASCII).
pub fn unquote_path(s: &str) -> String {
    let Some(inner) = s.strip_prefix('"').and_then(|s| s.strip_suffix('"')) else {
        return s.to_string();
    };
    let mut bytes = Vec::with_capacity(inner.len());
    let raw = inner.as_bytes();
    let mut i = 0;
    while i < raw.len() {
        if raw[i] != b'\\' || i + 1 == raw.len() {
            bytes.push(raw[i]);
            i += 1;
            continue;
        }
        let c = raw[i + 1];
        i += 2;
        match c {
            b'n' => bytes.push(b'\n'),
            b't' => bytes.push(b'\t'),
            b'r' => bytes.push(b'\r'),
            b'a' => bytes.push(7),
            b'b' => bytes.push(8),
            b'f' => bytes.push(12),
            b'v' => bytes.push(11),
            b'0'..=b'7' => {
                let mut v = u32::from(c - b'0');
                let mut n = 1;
                while n < 3 && i < raw.len() && (b'0'..=b'7').contains(&raw[i]) {
                    v = v * 8 + u32::from(raw[i] - b'0');
                    i += 1;
                    n += 1;
                }
                bytes.push(v as u8);
            }
            other => bytes.push(other),
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

fn parse_file_marker(rest: &str, prefix: &str) -> Option<String> {
    let rest = rest.strip_suffix('\t').unwrap_or(rest);
    if rest == "/dev/null" {
        return None;
    }
    let path = unquote_path(rest);
    Some(path.strip_prefix(prefix).map(str::to_string).unwrap_or(path))
}

/// Parse the output of `git diff` (with `a/` and `b/` prefixes).
pub fn parse_unified_diff(text: &str) -> Result<Vec<FileDiff>, GitError> {
    let mut files: Vec<FileDiff> = Vec::new();
    let mut lines = text.lines().peekable();

    while let Some(line) = lines.next() {
        if line.starts_with("diff --git ") {
            files.push(FileDiff::default());
            continue;
        }
        let Some(file) = files.last_mut() else {
            // preamble before the first file header
            continue;
        };
        if let Some(rest) = line.strip_prefix("--- ") {
            if file.hunks.is_empty() {
                file.old_path = parse_file_marker(rest, "a/");
            }
        } else if let Some(rest) = line.strip_prefix("+++ ") {
            if file.hunks.is_empty() {
                file.new_path = parse_file_marker(rest, "b/");
            }
        } else if line.starts_with("Binary files ") || line == "GIT binary patch" {
            file.binary = true;
        } else if line.starts_with("@@ ") {
            let header = parse_hunk_header(line)
                .ok_or_else(|| GitError::Parse(format!("bad hunk header: {line}")))?;
            let path = file.path().to_string();
            let hunk = read_hunk(&mut lines, header, path)?;
            file.hunks.push(hunk);
        }
    }
    Ok(files)
}

fn read_hunk<'a, I>(
    lines: &mut std::iter::Peekable<I>,
    h: HunkHeader,
    file_path: String,
) -> Result<HunkImage, GitError>
where
    I: Iterator<Item = &'a str>,
{
    let mut hunk = HunkImage {
        file_path,
        pre_start: h.pre_start,
        pre_len: h.pre_len,
        post_start: h.post_start,
        post_len: h.post_len,
        pre_lines: Vec::new(),
        post_lines: Vec::new(),
    };
    let (mut pre_left, mut post_left) = (h.pre_len, h.post_len);
    let (mut pre_no, mut post_no) = (h.pre_start, h.post_start);

    while pre_left > 0 || post_left > 0 {
        let Some(line) = lines.next() else {
            return Err(GitError::Parse(format!(
                "truncated hunk in {}: {pre_left} old and {post_left} new lines missing",
                hunk.file_path
            )));
        };
        // an empty line is a context line whose leading space was stripped
        let (tag, content) = match line.as_bytes().first() {
            None => (b' ', ""),
            Some(&t) => (t, &line[1..]),
        };
        match tag {
            b' ' if pre_left > 0 && post_left > 0 => {
                hunk.pre_lines.push(HunkLine {
                    line_no: pre_no,
                    content: content.to_string(),
                    kind: LineKind::Context,
                });
                hunk.post_lines.push(HunkLine {
                    line_no: post_no,
                    content: content.to_string(),
                    kind: LineKind::Context,
                });
                pre_no += 1;
                post_no += 1;
                pre_left -= 1;
                post_left -= 1;
            }
            b'-' if pre_left > 0 => {
                hunk.pre_lines.push(HunkLine {
                    line_no: pre_no,
                    content: content.to_string(),
                    kind: LineKind::Removed,
                });
                pre_no += 1;
                pre_left -= 1;
            }
            b'+' if post_left > 0 => {
                hunk.post_lines.push(HunkLine {
                    line_no: post_no,
                    content: content.to_string(),
                    kind: LineKind::Added,
                });
                post_no += 1;
                post_left -= 1;
            }
            b'\\' => {}
            _ => {
                return Err(GitError::Parse(format!(
                    "unexpected line in hunk of {}: {line:?}",
                    hunk.file_path
                )))
            }
        }
    }
    // trailing "\ No newline at end of file"
    while lines.peek().is_some_and(|l| l.starts_with('\\')) {
        lines.next();
    }
    Ok(hunk)
}
