//! File cache of true effect curves.
//!
//! Entries are keyed by a SHA-256 digest of everything the curve depends on. Values are
//! stored in shortest round-trip form, so a cached curve equals a recomputed one exactly.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use geodesy_core::simbench::TruePoint;

use crate::io::fmt_f64;

const FORMAT: &str = "truth-v1";

/// Cache key text; the file name is its digest.
pub fn key_text(parts: &[(&str, String)]) -> String {
    let mut s = String::from(FORMAT);
    for (k, v) in parts {
        s.push(' ');
        s.push_str(k);
        s.push('=');
        s.push_str(v);
    }
    s
}

fn entry_path(dir: &Path, key: &str) -> PathBuf {
    let digest = Sha256::digest(key.as_bytes());
    let hex: String = digest.iter().take(16).map(|b| format!("{b:02x}")).collect();
    dir.join(format!("truth-{hex}.csv"))
}

/// Cached curve for `key`, if present and intact.
pub fn load(dir: &Path, key: &str) -> Option<Vec<TruePoint>> {
    let text = fs::read_to_string(entry_path(dir, key)).ok()?;
    let mut lines = text.lines();
    if lines.next()? != format!("# {key}") || lines.next()? != "t,psi,mc_se" {
        return None;
    }
    lines
        .map(|l| {
            let mut f = l.split(',').map(str::parse::<f64>);
            let point = TruePoint { t: f.next()?.ok()?, psi: f.next()?.ok()?, mc_se: f.next()?.ok()? };
            f.next().is_none().then_some(point)
        })
        .collect()
}

/// Stores a curve; the file appears atomically.
pub fn store(dir: &Path, key: &str, curve: &[TruePoint]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let path = entry_path(dir, key);
    let mut text = format!("# {key}\nt,psi,mc_se\n");
    for p in curve {
        text.push_str(&format!("{},{},{}\n", fmt_f64(p.t), fmt_f64(p.psi), fmt_f64(p.mc_se)));
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, &path)
}
