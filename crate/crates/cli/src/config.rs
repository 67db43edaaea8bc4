//! Optional TOML config file, merged under command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use critbif::systems::{FamilyKind, SystemFamily};

use crate::CliError;

/// Every key is optional; a flag given on the command line wins.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub family: Option<String>,
    pub p: Option<f64>,
    pub dim: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub n: Option<String>,
    pub n_max: Option<usize>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub steps: Option<usize>,
    pub ds: Option<f64>,
    pub grid: Option<usize>,
    pub detect_grid: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<String>,
    pub no_meta: Option<bool>,
    pub golden: Option<bool>,
    pub oracle: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Family name as written on the command line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySpec {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl FamilySpec {
    pub fn build(&self, dim: usize) -> Result<SystemFamily, CliError> {
        let kind = match self.name.as_str() {
            "gp" | "gross-pitaevskii" => FamilyKind::GrossPitaevskii,
            "dh" | "druet-hebey" => FamilyKind::DruetHebey,
            "schrodinger" => FamilyKind::Schrodinger {
                p: self.p.ok_or_else(|| CliError::usage("family schrodinger needs --p"))?,
            },
            other => return Err(CliError::usage(format!("unknown family '{other}' (gp, dh, schrodinger)"))),
        };
        SystemFamily::new(kind, dim).map_err(CliError::from)
    }
}

/// Inclusive range `a..b`, `a..=b` or a single value.
pub fn parse_range(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::usage(format!("invalid range '{text}' (expected a..b, a..=b or a single integer)"));
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            (a.trim().parse::<usize>().map_err(|_| bad())?, b.trim().parse::<usize>().map_err(|_| bad())?)
        }
        None => {
            let v = text.trim().parse::<usize>().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(CliError::usage(format!("range '{text}' is empty")));
    }
    Ok((lo..=hi).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0..4").unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(parse_range("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_range("5").unwrap(), vec![5]);
        assert!(parse_range("4..2").is_err());
        assert!(parse_range("a..2").is_err());
    }

    #[test]
    fn config_keys() {
        let c: FileConfig = toml::from_str("family = \"gp\"\ndim = 3\nn = \"2\"\nds = 0.01\ndetect-grid = 64").unwrap();
        assert_eq!(c.family.as_deref(), Some("gp"));
        assert_eq!(c.detect_grid, Some(64));
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
    }

    #[test]
    fn families() {
        let gp = FamilySpec { name: "gp".into(), p: None };
        assert!(gp.build(3).is_ok());
        assert!(FamilySpec { name: "schrodinger".into(), p: None }.build(3).is_err());
        assert!(FamilySpec { name: "xx".into(), p: None }.build(3).is_err());
    }
}
