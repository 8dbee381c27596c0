//! Corpus loading and synthetic corpus generation.
//!
//! Two on-disk layouts: a directory of `.txt` files (document id = file
//! stem, ordered by file name) or a `.jsonl` file with one
//! `{"id": ..., "text": ...}` object per line. Ids must be unique; results
//! are keyed by them.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value as Json;

use spanforge_core::document::DocText;

pub fn load_corpus(path: &Path) -> Result<Vec<DocText>> {
    let meta = fs::metadata(path)
        .with_context(|| format!("reading corpus {}", path.display()))?;
    let docs = if meta.is_dir() { load_dir(path)? } else { load_jsonl(path)? };
    if docs.is_empty() {
        bail!("corpus {} contains no documents", path.display());
    }
    let mut seen = BTreeSet::new();
    for d in &docs {
        if !seen.insert(d.id.as_str()) {
            bail!("duplicate document id {:?} in {}", d.id, path.display());
        }
    }
    Ok(docs)
}

fn load_dir(dir: &Path) -> Result<Vec<DocText>> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    files.sort();
    let mut docs = Vec::with_capacity(files.len());
    for path in files {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| anyhow!("{} has no usable file stem", path.display()))?;
        docs.push(DocText::new(id, text));
    }
    Ok(docs)
}

fn load_jsonl(path: &Path) -> Result<Vec<DocText>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut docs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Json = serde_json::from_str(line)
            .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        let id = v
            .get("id")
            .and_then(Json::as_str)
            .ok_or_else(|| anyhow!("{}:{}: missing \"id\"", path.display(), lineno + 1))?;
        let body = v
            .get("text")
            .and_then(Json::as_str)
            .ok_or_else(|| anyhow!("{}:{}: missing \"text\"", path.display(), lineno + 1))?;
        docs.push(DocText::new(id, body));
    }
    Ok(docs)
}

pub fn corpus_to_jsonl(docs: &[DocText]) -> String {
    let mut out = String::new();
    for d in docs {
        let _ = write!(
            out,
            "{{\"id\": {}, \"text\": {}}}\n",
            serde_json::to_string(&d.id).unwrap(),
            serde_json::to_string(d.text.as_ref()).unwrap(),
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Synthetic corpora. Text is a stream of space-separated ASCII tokens drawn
// from four pools. `hot` sets the probability of drawing from the pools the
// demo queries actually match (names, places, numbers); the rest is filler,
// so match density scales with it directly.

const NAMES: &[&str] = &[
    "Alice", "Bob", "Carol", "Dave", "Erin", "Frank", "Grace", "Heidi", "Ivan", "Judy",
    "Mallory", "Niaj", "Olivia", "Peggy", "Rupert", "Sybil", "Trent", "Victor", "Walter",
];

const PLACES: &[&str] = &[
    "york", "boston", "austin", "dallas", "miami", "reno", "omaha", "tulsa", "salem", "fargo",
];

const NUMBERS: &[&str] = &["7", "42", "128", "999", "3", "56", "2048", "17", "64", "5"];

const FILLER: &[&str] = &[
    "lorem", "ipsum", "dolor", "sit", "amet", "consectetur", "adipiscing", "elit", "sed",
    "do", "eiusmod", "tempor", "incididunt", "ut", "labore", "et", "dolore", "magna",
    "aliqua", "enim", "ad", "minim", "veniam", "quis", "nostrud", "widget", "gadget",
];

/// Shape of a generated corpus.
#[derive(Clone, Copy, Debug)]
pub struct GenSpec {
    pub docs: usize,
    /// Exact byte length of each document (ASCII, padded with spaces).
    pub doc_bytes: usize,
    pub seed: u64,
    /// Probability that a token comes from the matched pools.
    pub hot: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec { docs: 1000, doc_bytes: 256, seed: 1, hot: 0.15 }
    }
}

pub fn generate(spec: &GenSpec) -> Vec<DocText> {
    assert!(spec.doc_bytes > 0, "documents must not be empty");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Hot tokens split evenly across the three matched pools.
    let w = spec.hot.clamp(0.0, 1.0);
    let weights = [w / 3.0, w / 3.0, w / 3.0, (1.0 - w).max(f64::EPSILON)];
    let pick = WeightedIndex::new(weights).expect("weights are positive");
    let pools: [&[&str]; 4] = [NAMES, PLACES, NUMBERS, FILLER];
    (0..spec.docs)
        .map(|i| {
            let mut text = String::with_capacity(spec.doc_bytes);
            loop {
                let pool = pools[pick.sample(&mut rng)];
                let word = pool[rng.gen_range(0..pool.len())];
                if text.len() + word.len() + 1 > spec.doc_bytes {
                    break;
                }
                if !text.is_empty() {
                    text.push(' ');
                }
                text.push_str(word);
            }
            while text.len() < spec.doc_bytes {
                text.push(' ');
            }
            DocText::new(format!("d{i:06}"), text)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_sized() {
        let spec = GenSpec { docs: 8, doc_bytes: 128, seed: 7, hot: 0.3 };
        let a = generate(&spec);
        let b = generate(&spec);
        assert_eq!(a.len(), 8);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.text, y.text);
            assert_eq!(x.bytes, 128);
        }
        assert_eq!(a[0].id, "d000000");
        assert_eq!(a[7].id, "d000007");
        let c = generate(&GenSpec { seed: 8, ..spec });
        assert!(a.iter().zip(&c).any(|(x, y)| x.text != y.text));
    }

    #[test]
    fn hot_fraction_moves_match_density() {
        let sparse = generate(&GenSpec { docs: 20, doc_bytes: 512, seed: 3, hot: 0.05 });
        let dense = generate(&GenSpec { docs: 20, doc_bytes: 512, seed: 3, hot: 0.8 });
        let count = |docs: &[DocText]| -> usize {
            docs.iter()
                .flat_map(|d| d.text.split_whitespace())
                .filter(|w| PLACES.contains(w) || NAMES.contains(w) || NUMBERS.contains(w))
                .count()
        };
        assert!(count(&dense) > 4 * count(&sparse));
    }

    #[test]
    fn jsonl_round_trip() {
        use std::io::Write;
        let docs = generate(&GenSpec { docs: 3, doc_bytes: 64, seed: 1, hot: 0.2 });
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(corpus_to_jsonl(&docs).as_bytes()).unwrap();
        let back = load_corpus(file.path()).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in docs.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.text, b.text);
        }
    }

    #[test]
    fn directory_corpus_sorted_with_stem_ids() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "second doc").unwrap();
        fs::write(dir.path().join("a.txt"), "first doc").unwrap();
        fs::write(dir.path().join("ignore.json"), "{}").unwrap();
        let docs = load_corpus(dir.path()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "a");
        assert_eq!(docs[1].id, "b");
        assert_eq!(docs[0].text.as_ref(), "first doc");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        use std::io::Write;
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{{\"id\": \"x\", \"text\": \"a\"}}").unwrap();
        writeln!(file, "{{\"id\": \"x\", \"text\": \"b\"}}").unwrap();
        assert!(load_corpus(file.path()).is_err());
    }
}
