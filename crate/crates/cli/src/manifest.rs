//! Run manifests and the on-disk output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

/// The results in scope, as check tags. `verify` on
/// the desk and deep tiers asserts that its checks cover all of them.
pub const IN_SCOPE_TAGS: &[&str] = &[
    "normalized-limsup",
    "admissible-norms",
    "projective-cross-norm",
    "shuffle-identity",
    "chen-identity",
    "second-moment-bound",
    "sup-moment-bound",
    "ito-stratonovich-coefficients",
    "expected-signature-formula",
    "kappa-upper-bound",
    "group-like-nonvanishing",
    "factorial-ratio",
    "subadditivity",
    "neoclassical-inequality",
    "deterministic-constant",
    "brownian-scaling",
    "hyperboloid-model",
    "development-length",
    "triangle-defect",
    "projective-duality",
    "cartan-sde",
    "height-series",
    "height-vs-limsup",
    "height-decay",
    "kappa-lower-bound",
    "parametrization-recovery",
    "ito-signature-bounds",
    "sup-versus-limsup",
];

/// One verified property.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// Tags of the results this check exercises.
    pub tags: Vec<String>,
    pub pass: bool,
    /// Numbers behind the verdict (worst ratios, medians, tolerances).
    pub metrics: BTreeMap<String, f64>,
    /// Output files holding the rows of this check.
    pub files: Vec<String>,
    /// Free-form remarks, e.g. which row failed.
    pub notes: Vec<String>,
}

impl CheckRecord {
    pub fn new(name: &str, tags: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            tags: tags.iter().map(|t| t.to_string()).collect(),
            pass: true,
            metrics: BTreeMap::new(),
            files: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn metric(&mut self, key: &str, value: f64) -> &mut Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    /// Records a sub-verdict; the check passes only if every one does.
    pub fn require(&mut self, ok: bool, what: impl Into<String>) -> &mut Self {
        if !ok {
            self.pass = false;
            self.notes.push(format!("failed: {}", what.into()));
        }
        self
    }

    pub fn note(&mut self, what: impl Into<String>) -> &mut Self {
        self.notes.push(what.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coverage {
    pub required: Vec<String>,
    pub missing: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    /// Global tolerances in force for this run.
    pub tolerances: BTreeMap<String, f64>,
    pub slack_overridden: bool,
    pub checks: Vec<CheckRecord>,
    pub coverage: Option<Coverage>,
    pub failures: Vec<String>,
    pub pass: bool,
}

impl RunManifest {
    pub fn new(config: RunConfig) -> Self {
        use sigtail::asymptotics as a;
        let tolerances = [
            ("slack_lower", config.slack_lower),
            ("slack_upper", config.slack_upper),
            ("subadditivity_tol", a::SUBADDITIVITY_TOL),
            ("max_relative_iqr", a::MAX_RELATIVE_IQR),
            ("subinterval_ratio_min", a::SUBINTERVAL_RATIO_RANGE.0),
            ("subinterval_ratio_max", a::SUBINTERVAL_RATIO_RANGE.1),
            ("height_slack", a::HEIGHT_SLACK),
            ("neoclassical_tol", a::NEOCLASSICAL_TOL),
            ("recovery_tol", a::RECOVERY_TOL),
            ("scaling_max_ks", a::SCALING_MAX_KS),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            tool: "sigtail",
            version: env!("CARGO_PKG_VERSION"),
            slack_overridden: config.slack_overridden(),
            config,
            tolerances,
            checks: Vec::new(),
            coverage: None,
            failures: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, check: CheckRecord) {
        if !check.pass {
            self.pass = false;
            self.failures.push(check.name.clone());
        }
        self.checks.push(check);
    }

    /// Fails the run unless the checks' tags include every entry of
    /// `required`.
    pub fn assert_coverage(&mut self, required: &[&str]) {
        let missing: Vec<String> = required
            .iter()
            .filter(|tag| !self.checks.iter().any(|c| c.tags.iter().any(|t| t == *tag)))
            .map(|t| t.to_string())
            .collect();
        if !missing.is_empty() {
            self.pass = false;
            self.failures.push("coverage".to_string());
        }
        self.coverage = Some(Coverage {
            required: required.iter().map(|t| t.to_string()).collect(),
            missing,
        });
    }

    /// Every file named by a check, so that callers can confirm nothing was
    /// written outside the manifest.
    pub fn listed_files(&self) -> Vec<&str> {
        self.checks
            .iter()
            .flat_map(|c| c.files.iter().map(String::as_str))
            .collect()
    }
}

/// Output directory plus wall-clock bookkeeping. Timing goes to its own
/// file so that every other output is reproducible byte for byte.
pub struct OutputDir {
    root: PathBuf,
    started: Instant,
    started_unix: u64,
    sections: Vec<(String, f64)>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMING_FILE: &str = "timing.json";

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|source| CliError::Io {
            context: format!("creating {}", root.display()),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            sections: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            context: format!("writing {}", path.display()),
            source,
        })
    }

    /// Records the wall time of one part of the run.
    pub fn add_section(&mut self, label: &str, seconds: f64) {
        self.sections.push((label.to_string(), seconds));
    }

    /// Writes the manifest and the timing file.
    pub fn finish(self, manifest: &RunManifest) -> Result<(), CliError> {
        self.write(MANIFEST_FILE, &(serde_json::to_string_pretty(manifest)? + "\n"))?;
        let timing = serde_json::json!({
            "started_unix": self.started_unix,
            "wall_seconds": self.started.elapsed().as_secs_f64(),
            "sections": self
                .sections
                .iter()
                .map(|(k, v)| serde_json::json!({ "name": k, "seconds": v }))
                .collect::<Vec<_>>(),
        });
        self.write(TIMING_FILE, &(serde_json::to_string_pretty(&timing)? + "\n"))
    }
}
