use std::fmt::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::artifacts::{verify, Summary, SUMMARY};

/// Verifies `dir` against its manifest and renders the stored summary.
pub fn render(dir: &Path) -> Result<(String, Summary)> {
    let manifest = verify(dir)?;
    if !manifest.files.iter().any(|f| f.path == SUMMARY) {
        bail!(
            "{SUMMARY} is not listed in the manifest of {}",
            dir.display()
        );
    }
    let text = std::fs::read_to_string(dir.join(SUMMARY))?;
    let summary: Summary =
        serde_json::from_str(&text).with_context(|| format!("malformed {SUMMARY}"))?;
    if summary.config_hash != manifest.config_hash {
        bail!("{SUMMARY} and manifest disagree on the config hash");
    }

    let mut out = String::new();
    writeln!(out, "{} ({})", dir.display(), manifest.kind)?;
    writeln!(
        out,
        "  config {}  mdplab {}  {} files verified",
        &manifest.config_hash[..12],
        manifest.version,
        manifest.files.len()
    )?;
    for h in &summary.headline {
        writeln!(out, "  {}: {}", h.label, h.value)?;
    }
    for c in &summary.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "  {tag} {}: {}", c.name, c.detail)?;
    }
    if !summary.checks.is_empty() {
        let passed = summary.checks.iter().filter(|c| c.passed).count();
        writeln!(out, "  {passed}/{} checks passed", summary.checks.len())?;
    }
    Ok((out, summary))
}
