use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Write a file, creating parent directories as needed.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Sibling path built from `out`'s file stem plus a suffix, e.g.
/// `emb.json` -> `emb.delta.json`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// Plain Levenshtein edit distance; inputs are short labels.
fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut current = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        current[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = if ca == cb { 0 } else { 1 };
            current[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(current[j] + 1);
        }
        std::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

/// Up to three known labels closest to `target` by edit distance. A label
/// is also scored against its prefix of the target's length, so a typo of
/// the method name still matches a label that carries a backbone suffix.
pub fn nearest_labels<'a>(target: &str, known: impl Iterator<Item = &'a String>) -> Vec<String> {
    let target_len = target.chars().count();
    let mut scored: Vec<(usize, &String)> = known
        .map(|label| {
            let prefix: String = label.chars().take(target_len).collect();
            let score = levenshtein(target, label).min(levenshtein(target, &prefix) + 1);
            (score, label)
        })
        .collect();
    scored.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(3).map(|(_, l)| l.clone()).collect()
}

pub fn plural(n: usize, noun: &str) -> String {
    if n == 1 {
        format!("{n} {noun}")
    } else {
        format!("{n} {noun}s")
    }
}

/// One `records, models, tasks` summary line for a database.
pub fn db_counts(db: &benchembed::ResultsDb) -> String {
    format!(
        "{}, {}, {}",
        plural(db.len(), "record"),
        plural(db.models().len(), "model"),
        plural(db.tasks().len(), "task")
    )
}
