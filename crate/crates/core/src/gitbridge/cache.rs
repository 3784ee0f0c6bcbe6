//! On-disk cache of bare clones, one directory per source URL.
//!
//! ```text
//! <cache_root>/<url-hash>/repo/   bare clone
//! <cache_root>/<url-hash>/meta    source URL and fetch time
//! <cache_root>/<url-hash>/lock    held while cloning or fetching
//! ```

use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use super::{GitError, Repo};

const LOCK_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone)]
pub struct CloneCache {
    root: PathBuf,
}

/// Exclusive per-repository lock; released on drop.
#[derive(Debug)]
pub struct RepoLock {
    path: PathBuf,
}

impl RepoLock {
    pub fn acquire(path: PathBuf, timeout: Duration) -> Result<RepoLock, GitError> {
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    let _ = writeln!(f, "{}", std::process::id());
                    return Ok(RepoLock { path });
                }
                Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                    if start.elapsed() > timeout {
                        return Err(GitError::Locked(path.display().to_string()));
                    }
                    std::thread::sleep(Duration::from_millis(50));
                }
                Err(e) => return Err(GitError::Io(e)),
            }
        }
    }
}

impl Drop for RepoLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn url_hash(url: &str) -> String {
    let digest = Sha256::digest(url.as_bytes());
    hex::encode(&digest[..8])
}

impl CloneCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CloneCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_dir(&self, url: &str) -> PathBuf {
        self.root.join(url_hash(url))
    }

    pub fn repo_dir(&self, url: &str) -> PathBuf {
        self.entry_dir(url).join("repo")
    }

    /// The cached clone, if one exists. Never touches the network.
    pub fn open(&self, url: &str) -> Option<Repo> {
        let dir = self.repo_dir(url);
        dir.join("HEAD").exists().then(|| Repo::open(dir))
    }

    /// Clone `url` unless it is already cached; with `refresh`, fetch
    /// existing clones again.
    pub fn ensure(&self, url: &str, refresh: bool) -> Result<Repo, GitError> {
        let entry = self.entry_dir(url);
        fs::create_dir_all(&entry)?;
        let _lock = RepoLock::acquire(entry.join("lock"), LOCK_TIMEOUT)?;

        let dir = entry.join("repo");
        if dir.join("HEAD").exists() {
            let repo = Repo::open(&dir);
            if refresh {
                repo.git(&["fetch", "--quiet", "--prune", "origin", "+refs/heads/*:refs/heads/*"])?;
                fetch_pull_refs(&repo);
                write_meta(&entry, url)?;
            }
            return Ok(repo);
        }

        let staging = entry.join("repo.partial");
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        let staging_str = staging.to_string_lossy().into_owned();
        super::run_git(&entry, &["clone", "--bare", "--quiet", url, &staging_str])?;
        fs::rename(&staging, &dir)?;
        let repo = Repo::open(&dir);
        fetch_pull_refs(&repo);
        write_meta(&entry, url)?;
        Ok(repo)
    }
}

// pull request heads are only advertised by some hosts
fn fetch_pull_refs(repo: &Repo) {
    if let Err(e) = repo.git(&[
        "fetch",
        "--quiet",
        "origin",
        "+refs/pull/*/head:refs/pull/*/head",
    ]) {
        log::debug!("no pull request refs fetched: {e}");
    }
}

fn write_meta(entry: &Path, url: &str) -> Result<(), GitError> {
    let fetched = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or_default();
    fs::write(entry.join("meta"), format!("url={url}\nfetched={fetched}\n"))?;
    Ok(())
}
