//! Function-level diffing of commits in a local clone.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use git2::{Delta, DiffFindOptions, DiffOptions, Oid, Repository, Sort};
use rayon::prelude::*;

use super::{DateWindow, IngestError, RawSample};
use crate::features::extract_functions;

fn repo_err(repo: &Path, e: impl std::fmt::Display) -> IngestError {
    IngestError::Repository {
        repo: repo.display().to_string(),
        message: e.to_string(),
    }
}

/// `owner/name` from the `origin` remote when present, else the directory name.
pub fn repository_name(repo: &Repository, path: &Path) -> String {
    let from_remote = repo
        .find_remote("origin")
        .ok()
        .and_then(|r| r.url().ok().map(str::to_owned))
        .and_then(|url| {
            let trimmed = url.trim_end_matches('/').trim_end_matches(".git");
            let parts: Vec<&str> = trimmed
                .rsplit(['/', ':'])
                .filter(|s| !s.is_empty())
                .take(2)
                .collect();
            match parts.as_slice() {
                [name, owner] => Some(format!("{owner}/{name}")),
                [name] => Some((*name).to_owned()),
                _ => None,
            }
        });
    from_remote.unwrap_or_else(|| {
        path.canonicalize()
            .unwrap_or_else(|_| path.to_path_buf())
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    })
}

fn commit_time(commit: &git2::Commit<'_>) -> Option<DateTime<Utc>> {
    DateTime::from_timestamp(commit.committer().when().seconds(), 0)
}

fn blob_text(repo: &Repository, id: Oid) -> Option<String> {
    if id.is_zero() {
        return None;
    }
    let blob = repo.find_blob(id).ok()?;
    String::from_utf8(blob.content().to_vec()).ok()
}

/// One sample per Python method added or changed by a commit (committer date
/// in `window`), ordered by (committed_at, path, fun_name).
///
/// A method is "changed" when its source text differs from the same
/// qualified name in the first parent. A method that only moved to a new
/// name with identical signature and body is treated as a rename and skipped.
pub fn harvest_methods(repo_path: &Path, window: &DateWindow) -> Result<Vec<RawSample>, IngestError> {
    let repo = Repository::open(repo_path).map_err(|e| repo_err(repo_path, e))?;
    let repository = repository_name(&repo, repo_path);

    let mut walk = repo.revwalk().map_err(|e| repo_err(repo_path, e))?;
    walk.set_sorting(Sort::TOPOLOGICAL | Sort::TIME)
        .map_err(|e| repo_err(repo_path, e))?;
    if walk.push_head().is_err() {
        // Unborn HEAD: an empty history has nothing to mine.
        if repo.head().is_err() && repo.is_empty().unwrap_or(false) {
            return Ok(Vec::new());
        }
        return Err(repo_err(repo_path, "HEAD does not point to a commit"));
    }

    let mut samples = Vec::new();
    for oid in walk {
        let oid = oid.map_err(|e| repo_err(repo_path, e))?;
        let commit = repo.find_commit(oid).map_err(|e| repo_err(repo_path, e))?;
        let Some(committed_at) = commit_time(&commit) else {
            continue;
        };
        if !window.contains(committed_at) {
            continue;
        }
        let tree = commit.tree().map_err(|e| repo_err(repo_path, e))?;
        let parent_tree = match commit.parent(0) {
            Ok(p) => Some(p.tree().map_err(|e| repo_err(repo_path, e))?),
            Err(_) => None,
        };
        let mut opts = DiffOptions::new();
        let mut diff = repo
            .diff_tree_to_tree(parent_tree.as_ref(), Some(&tree), Some(&mut opts))
            .map_err(|e| repo_err(repo_path, e))?;
        diff.find_similar(Some(DiffFindOptions::new().renames(true)))
            .map_err(|e| repo_err(repo_path, e))?;

        let message = commit.message().unwrap_or("").trim_end().to_owned();
        for delta in diff.deltas() {
            if !matches!(
                delta.status(),
                Delta::Added | Delta::Modified | Delta::Renamed | Delta::Copied
            ) {
                continue;
            }
            let Some(path) = delta.new_file().path() else {
                continue;
            };
            if path.extension().and_then(|e| e.to_str()) != Some("py") {
                continue;
            }
            let Some(new_text) = blob_text(&repo, delta.new_file().id()) else {
                continue;
            };
            let old_text = match delta.status() {
                Delta::Added => None,
                _ => blob_text(&repo, delta.old_file().id()),
            };
            let path_str = path.to_string_lossy().replace('\\', "/");
            let file_name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();

            let old_funcs = old_text.as_deref().map(extract_functions).unwrap_or_default();
            let old_by_name: BTreeMap<&str, &str> = old_funcs
                .iter()
                .map(|f| (f.qualified_name.as_str(), f.code.as_str()))
                .collect();
            let old_bodies: BTreeSet<&str> = old_funcs.iter().map(|f| f.body_key.as_str()).collect();

            for f in extract_functions(&new_text) {
                let is_new = match old_by_name.get(f.qualified_name.as_str()) {
                    Some(old_code) => *old_code != f.code,
                    None => !old_bodies.contains(f.body_key.as_str()),
                };
                if !is_new || f.code.trim().is_empty() {
                    continue;
                }
                samples.push(RawSample {
                    commit_id: oid.to_string(),
                    repository: repository.clone(),
                    path: path_str.clone(),
                    file_name: file_name.clone(),
                    fun_name: f.name,
                    commit_message: message.clone(),
                    docstring: f.docstring,
                    code: f.code,
                    committed_at,
                    extras: BTreeMap::new(),
                });
            }
        }
    }

    samples.sort_by(|a, b| {
        (a.committed_at, &a.path, &a.fun_name, &a.commit_id, &a.code)
            .cmp(&(b.committed_at, &b.path, &b.fun_name, &b.commit_id, &b.code))
    });
    Ok(samples)
}

/// Harvest several clones with at most `jobs` workers. Each repository is
/// handled by a single worker; results are concatenated in input order.
pub fn harvest_many(
    repos: &[PathBuf],
    window: &DateWindow,
    jobs: usize,
) -> Result<Vec<RawSample>, IngestError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| IngestError::Repository {
            repo: "<pool>".into(),
            message: e.to_string(),
        })?;
    let per_repo: Vec<Vec<RawSample>> = pool.install(|| {
        repos
            .par_iter()
            .map(|p| harvest_methods(p, window))
            .collect::<Result<_, _>>()
    })?;
    Ok(per_repo.into_iter().flatten().collect())
}
