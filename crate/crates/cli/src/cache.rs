//! Content-addressed on-disk cache for PBW tables.
//!
//! Layout: `<root>/v1/pbw/<sha256>.json`. The key hashes the format
//! version, the pair data (structure constants, anchor, splitting,
//! connection) and the table depth, so a cached file can only ever be
//! served for the configuration that produced it.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fedpair_core::coeffs::{MultiIndex, Poly};
use fedpair_core::liepair::Adapted;
use fedpair_core::uea::{PbwTable, UElem};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::spec::PairSpec;

pub const CACHE_ENV: &str = "FEDPAIR_CACHE_DIR";
const FORMAT: u32 = 1;

type Entries = Vec<(Vec<u32>, Vec<(Vec<u32>, String)>)>;

#[derive(Serialize, Deserialize)]
struct StoredTable {
    format: u32,
    key: String,
    depth: u32,
    entries: Entries,
}

pub struct Cache {
    root: PathBuf,
}

/// How a table request was served.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Served {
    Hit,
    Miss,
    /// The stored file was unreadable or failed its spot check.
    Bypassed,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache { root: root.into() }
    }

    /// The directory from the environment, or `.fedpair-cache` in the
    /// working directory.
    pub fn from_env() -> Self {
        Cache::new(std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".fedpair-cache")))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn clear(&self) -> Result<usize> {
        let dir = self.root.join(format!("v{FORMAT}"));
        if !dir.exists() {
            return Ok(0);
        }
        let n = walk_count(&dir)?;
        fs::remove_dir_all(&dir).with_context(|| format!("removing {}", dir.display()))?;
        Ok(n)
    }

    fn path(&self, key: &str) -> PathBuf {
        self.root.join(format!("v{FORMAT}")).join("pbw").join(format!("{key}.json"))
    }

    /// Loads the table for `spec` at `depth`, or builds and stores it.
    /// Any stored table is spot-checked against a fresh build at one degree
    /// chosen from the key, so a corrupted file is bypassed, never trusted.
    pub fn pbw_table(&self, spec: &PairSpec, ad: &Adapted, depth: u32) -> (PbwTable, Served, Option<String>) {
        let key = table_key(spec, depth);
        let path = self.path(&key);
        let mut served = Served::Miss;
        let mut warning = None;
        if path.exists() {
            match load(&path, &key, ad, depth).and_then(|t| spot_check(&t, ad, &key).map(|()| t)) {
                Ok(t) => return (t, Served::Hit, None),
                Err(e) => {
                    served = Served::Bypassed;
                    warning = Some(format!("cache entry {} bypassed: {e:#}", path.display()));
                }
            }
        }
        let t = PbwTable::build(ad, depth);
        if let Err(e) = store(&path, &key, &t) {
            warning.get_or_insert(format!("could not write cache entry {}: {e:#}", path.display()));
        }
        (t, served, warning)
    }
}

fn walk_count(dir: &Path) -> Result<usize> {
    let mut n = 0;
    for e in fs::read_dir(dir)? {
        let e = e?;
        n += if e.file_type()?.is_dir() { walk_count(&e.path())? } else { 1 };
    }
    Ok(n)
}

/// Hex SHA-256 over the format version, the pair data and the depth.
pub fn table_key(spec: &PairSpec, depth: u32) -> String {
    let mut h = Sha256::new();
    h.update(format!("pbw-v{FORMAT}\n").as_bytes());
    h.update(structure_bytes(spec));
    h.update(format!("depth={depth}").as_bytes());
    hex::encode(h.finalize())
}

/// Canonical bytes for the pair data only (name and run settings excluded).
pub fn structure_bytes(spec: &PairSpec) -> Vec<u8> {
    let cfg = spec.build().expect("spec was validated on load");
    let mut canon = PairSpec::from_config(&cfg, 0, 0);
    canon.name.clear();
    serde_json::to_vec(&canon).expect("spec serializes")
}

fn load(path: &Path, key: &str, ad: &Adapted, depth: u32) -> Result<PbwTable> {
    let stored: StoredTable = serde_json::from_slice(&fs::read(path)?).context("unreadable table")?;
    if stored.format != FORMAT || stored.key != key || stored.depth != depth {
        bail!("header does not match the request");
    }
    let mut fwd = BTreeMap::new();
    for (j, terms) in stored.entries {
        let mut u = UElem::zero();
        for (e, c) in terms {
            u.add_term(MultiIndex::from_slice(&e), Poly::parse(&c)?);
        }
        fwd.insert(MultiIndex::from_slice(&j), u);
    }
    Ok(PbwTable::from_entries(ad, depth, fwd))
}

fn spot_check(t: &PbwTable, ad: &Adapted, key: &str) -> Result<()> {
    if t.depth == 0 {
        return Ok(());
    }
    let byte = u8::from_str_radix(&key[..2], 16)?;
    let degree = 1 + byte as u32 % t.depth;
    let fresh = PbwTable::build(ad, degree);
    for j in MultiIndex::all_of_degree(t.r(), degree) {
        if t.fwd.get(&j) != fresh.fwd.get(&j) {
            bail!("stored pbw(∂^{:?}) differs from a fresh computation", j.0.as_slice());
        }
    }
    let expected = MultiIndex::all_up_to(t.r(), t.depth).len();
    if t.fwd.len() != expected {
        bail!("table has {} entries, expected {expected}", t.fwd.len());
    }
    Ok(())
}

fn store(path: &Path, key: &str, t: &PbwTable) -> Result<()> {
    let dir = path.parent().expect("cache paths have a parent");
    fs::create_dir_all(dir)?;
    let body = StoredTable { format: FORMAT, key: key.to_string(), depth: t.depth, entries: t.entries() };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&serde_json::to_vec(&body)?)?;
    tmp.persist(path)?;
    Ok(())
}
