//! Acceptance criteria, judged from the files written by
//! `sigtail verify --tier desk --seed 1` at tolerances pinned here, one
//! printed line per criterion.
//!
//! Criteria 7, 9 and 10 are not met at desk scale; see the README. The test
//! fails if any other criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use serde_json::Value;
use sigtail::stats;

const KNOWN_UNMET: [u32; 3] = [7, 9, 10];

struct Run {
    dir: tempfile::TempDir,
    wall: f64,
    exit: i32,
}

fn verify_desk() -> Run {
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_sigtail"))
        .args(["verify", "--tier", "desk", "--seed", "1", "--out"])
        .arg(dir.path())
        .output()
        .expect("binary runs");
    Run {
        dir,
        wall: t0.elapsed().as_secs_f64(),
        exit: o.status.code().unwrap_or(-1),
    }
}

/// Rows of a CSV as header-keyed maps.
fn csv(dir: &Path, name: &str) -> Vec<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key} = {:?}", row[key]))
}

struct Judge {
    timings: BTreeMap<String, f64>,
    metrics: BTreeMap<String, BTreeMap<String, f64>>,
    lines: Vec<String>,
    failed: BTreeSet<u32>,
}

impl Judge {
    fn seconds(&self, checks: &[&str]) -> f64 {
        checks.iter().map(|c| self.timings[*c]).sum()
    }

    fn metric(&self, check: &str, key: &str) -> f64 {
        self.metrics[check][key]
    }

    fn report(&mut self, n: u32, title: &str, ok: bool, detail: String) {
        let line = format!(
            "criterion {n:>2} [{}] {title}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        println!("{line}");
        self.lines.push(line);
        if !ok {
            self.failed.insert(n);
        }
    }
}

#[test]
fn acceptance_criteria() {
    let a = verify_desk();
    let b = verify_desk();
    let dir = a.dir.path();
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let timing: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("timing.json")).unwrap()).unwrap();
    let mut judge = Judge {
        timings: timing["sections"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| (s["name"].as_str().unwrap().to_string(), s["seconds"].as_f64().unwrap()))
            .collect(),
        metrics: manifest["checks"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| {
                let m = c["metrics"]
                    .as_object()
                    .unwrap()
                    .iter()
                    .map(|(k, v)| (k.clone(), v.as_f64().unwrap()))
                    .collect();
                (c["name"].as_str().unwrap().to_string(), m)
            })
            .collect(),
        lines: Vec::new(),
        failed: BTreeSet::new(),
    };
    assert_eq!(manifest["coverage"]["missing"].as_array().unwrap().len(), 0);

    // 1. algebraic exactness
    {
        let tol = 1e-12;
        let rows = csv(dir, "algebra.csv");
        let worst = ["chen", "shuffle", "reversal", "permutation", "cross_norm"]
            .iter()
            .map(|k| rows.iter().map(|r| num(r, k)).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let secs = judge.seconds(&["algebraic-exactness"]);
        let ok = rows.len() == 50 && worst <= tol && secs < 10.0;
        judge.report(
            1,
            "algebraic exactness",
            ok,
            format!("50 paths, d=2, N=8, worst identity error {worst:.2e} <= {tol:.0e}, {secs:.1}s"),
        );
    }

    // 2. expected signature
    {
        let rows = csv(dir, "expected_signature.csv");
        let bad = rows
            .iter()
            .filter(|r| (num(r, "mc") - num(r, "exact")).abs() > 4.0 * num(r, "stderr"))
            .count();
        let find = |w: &str| rows.iter().find(|r| r["word"] == w).unwrap();
        let (w11, w1122) = (find("1-1"), find("1-1-2-2"));
        let secs = judge.seconds(&["expected-signature"]);
        let ok = bad == 0
            && num(w11, "exact") == 0.5
            && num(w1122, "exact") == 0.125
            && judge.metric("expected-signature", "trials") == 1e4
            && secs < 120.0;
        judge.report(
            2,
            "expected signature",
            ok,
            format!(
                "M=1e4, {} words, {bad} outside 4 stderr, (1,1) {:.4} vs 0.5, (1,1,2,2) {:.4} vs 0.125, {secs:.1}s",
                rows.len(),
                num(w11, "mc"),
                num(w1122, "mc")
            ),
        );
    }

    // 3. moment bounds
    {
        let second = csv(dir, "second_moments.csv");
        let sup = csv(dir, "sup_moments.csv");
        let over = |rows: &[BTreeMap<String, String>]| {
            rows.iter()
                .filter(|r| num(r, "mean") > num(r, "bound") + 3.0 * num(r, "stderr"))
                .count()
        };
        let lengths_ok = second.iter().all(|r| (1.0..=8.0).contains(&num(r, "n")))
            && sup.iter().all(|r| (3.0..=6.0).contains(&num(r, "n")));
        let trials_ok = second.iter().chain(&sup).all(|r| num(r, "M") == 5000.0);
        let secs = judge.seconds(&["moment-bounds"]);
        let (o2, os) = (over(&second), over(&sup));
        let ok = second.len() == 20 && !sup.is_empty() && lengths_ok && trials_ok && o2 == 0 && os == 0 && secs < 600.0;
        judge.report(
            3,
            "moment bounds",
            ok,
            format!(
                "M=5000, {} second-moment words with {o2} violations, {} sup words with {os} violations, {secs:.1}s",
                second.len(),
                sup.len()
            ),
        );
    }

    // 4. hyperbolic geometry
    {
        let chord = judge.metric("hyperbolic-geometry", "worst_chord_distance_error");
        let lorentz = judge.metric("hyperbolic-geometry", "worst_lorentz_defect");
        let tri = csv(dir, "triangles.csv");
        let tri_bad = tri
            .iter()
            .filter(|r| {
                let d = num(r, "defect");
                !(d >= -1e-9 && d <= num(r, "bound") + 1e-9)
            })
            .count();
        let secs = judge.seconds(&["hyperbolic-geometry"]);
        let ok = chord <= 1e-10 && lorentz <= 1e-9 && tri.len() == 100 && tri_bad == 0 && secs < 60.0;
        judge.report(
            4,
            "hyperbolic geometry",
            ok,
            format!(
                "chord distance error {chord:.1e}, Lorentz defect over 1e4 chords {lorentz:.1e}, {tri_bad}/100 triangles outside the defect bound, {secs:.1}s"
            ),
        );
    }

    // 5. height decay
    {
        let rows = csv(dir, "height_decay.csv");
        let bad = rows
            .iter()
            .filter(|r| num(r, "mean_hinvmu") > num(r, "bound") + 3.0 * num(r, "stderr"))
            .count();
        let point = rows
            .iter()
            .find(|r| r["d"] == "3" && num(r, "mu") == 1.0 && num(r, "lambda") == 2.0)
            .unwrap();
        let secs = judge.seconds(&["height-decay"]);
        let ok = rows.len() == 12
            && rows.iter().all(|r| num(r, "M") == 2000.0)
            && (num(point, "bound") - 0.135335).abs() < 1e-6
            && bad == 0
            && secs < 600.0;
        judge.report(
            5,
            "height decay",
            ok,
            format!(
                "12 grid points at M=2000, {bad} above bound + 3 stderr, (3,1,2): {:.4} vs {:.6}, {secs:.1}s",
                num(point, "mean_hinvmu"),
                num(point, "bound")
            ),
        );
    }

    // 6. κ sandwich and dispersion
    {
        let kappas: Vec<f64> = csv(dir, "kappa_d2.csv").iter().map(|r| num(r, "kappa_hat")).collect();
        let median = stats::median(&kappas);
        let iqr = stats::relative_iqr(&kappas).unwrap();
        let secs = judge.seconds(&["kappa-sandwich-d2", "kappa-concentration"]);
        let ok = kappas.len() == 16 && (0.2..=5.0).contains(&median) && iqr <= 0.35 && secs < 900.0;
        judge.report(
            6,
            "kappa sandwich",
            ok,
            format!("16 trials, median {median:.3} in [0.2, 5.0], IQR/median {iqr:.3} <= 0.35, {secs:.1}s"),
        );
    }

    // 7. subadditivity, neo-classical inequality, factorial ratio
    {
        let rows = csv(dir, "subadditivity.csv");
        let min_margin = rows.iter().map(|r| num(r, "margin")).fold(f64::INFINITY, f64::min);
        let below = rows.iter().filter(|r| num(r, "margin") < -0.15).count();
        let neo = judge.metric("neoclassical", "worst_ratio");
        let points = judge.metric("neoclassical", "points");
        let fact = csv(dir, "factorial_ratio.csv");
        let fact_ok = !fact.is_empty() && fact.iter().all(|r| r["bounded"] == "true");
        let secs = judge.seconds(&["subadditivity", "neoclassical", "factorial-ratio"]);
        let ok = rows.len() == 20 && below == 0 && points == 1000.0 && neo <= 1.0 + 1e-12 && fact_ok && secs < 120.0;
        judge.report(
            7,
            "subadditivity",
            ok,
            format!(
                "{below}/20 pairs below -15% (min margin {min_margin:.3}), neo-classical worst ratio {neo:.15} over 1000 points, factorial ratio bounded: {fact_ok}, {secs:.1}s"
            ),
        );
    }

    // 8. height against κ̂
    {
        let rows = csv(dir, "height_bound.csv");
        let bad = rows
            .iter()
            .filter(|r| num(r, "lhs") > 1.2 * num(r, "kappa_hat"))
            .count();
        let lambdas: BTreeSet<String> = rows.iter().map(|r| r["lambda"].clone()).collect();
        let series = csv(dir, "height_series.csv");
        let series_bad = series
            .iter()
            .filter(|r| num(r, "lambda") > 0.5 || (num(r, "ode") - num(r, "series")).abs() > num(r, "tail_bound"))
            .count();
        let secs = judge.seconds(&["height-vs-limsup"]);
        let ok = rows.len() == 24 && lambdas.len() == 3 && bad == 0 && !series.is_empty() && series_bad == 0 && secs < 300.0;
        judge.report(
            8,
            "height against limsup",
            ok,
            format!(
                "8 samples x λ in {{4,8,16}}: {bad} above 1.2 κ̂ t (worst ratio {:.3}); {} series rows, {series_bad} outside the tail bound (worst gap {:.1e}), {secs:.1}s",
                judge.metric("height-vs-limsup", "worst_lhs_over_rhs"),
                series.len(),
                judge.metric("height-vs-limsup", "worst_series_gap")
            ),
        );
    }

    // 9. bounded-variation degeneracy
    {
        let rows = csv(dir, "bv_degeneracy.csv");
        let mut parts = Vec::new();
        let mut ok = true;
        for name in ["line", "staircase"] {
            let a: Vec<f64> = rows.iter().filter(|r| r["path"] == name).map(|r| num(r, "a_n")).collect();
            let a_n = a[13];
            let decreasing = (8..14).all(|n| a[n] < a[n - 1]);
            ok &= a_n < 0.05 && decreasing;
            parts.push(format!("{name} a_14 = {a_n:.4} (< 0.05: {}), decreasing over [8,14]: {decreasing}", a_n < 0.05));
        }
        let secs = judge.seconds(&["bv-degeneracy"]);
        ok &= secs < 10.0;
        judge.report(9, "bounded-variation degeneracy", ok, format!("{}, {secs:.1}s", parts.join("; ")));
    }

    // 10. parametrization recovery
    {
        let mut parts = Vec::new();
        let mut ok = true;
        for (file, label, sigma) in [
            ("recovery_identity.csv", "identity", (|t: f64| t) as fn(f64) -> f64),
            ("recovery_squared.csv", "t^2", |t: f64| t * t),
        ] {
            let rows = csv(dir, file);
            let trials: BTreeSet<String> = rows.iter().map(|r| r["trial"].clone()).collect();
            let err = rows
                .iter()
                .map(|r| (num(r, "sigma_hat") - sigma(num(r, "t"))).abs())
                .fold(0.0, f64::max);
            ok &= trials.len() == 4 && rows.len() == 40 && err <= 0.15;
            parts.push(format!("{label} worst sup error {err:.3}"));
        }
        let secs = judge.seconds(&["recovery-identity", "recovery-squared"]);
        ok &= secs < 600.0;
        judge.report(
            10,
            "parametrization recovery",
            ok,
            format!("4 samples each, 10-point grid, tolerance 0.15: {}, {secs:.1}s", parts.join(", ")),
        );
    }

    // 11. reproducibility
    {
        let names = |d: &Path| -> BTreeSet<String> {
            std::fs::read_dir(d)
                .unwrap()
                .map(|e| e.unwrap().file_name().into_string().unwrap())
                .filter(|n| n != "timing.json")
                .collect()
        };
        let (na, nb) = (names(dir), names(b.dir.path()));
        let differing: Vec<&String> = na
            .iter()
            .filter(|n| std::fs::read(dir.join(n)).ok() != std::fs::read(b.dir.path().join(n)).ok())
            .collect();
        let wall = a.wall.max(b.wall);
        let ok = na == nb && differing.is_empty() && wall < 1800.0 && a.exit == b.exit;
        judge.report(
            11,
            "reproducibility",
            ok,
            format!(
                "{} files byte-identical across two runs ({} differ), exit codes {} and {}, slowest run {wall:.0}s",
                na.len(),
                differing.len(),
                a.exit,
                b.exit
            ),
        );
    }

    let unexpected: Vec<u32> = judge
        .failed
        .iter()
        .copied()
        .filter(|n| !KNOWN_UNMET.contains(n))
        .collect();
    for n in KNOWN_UNMET {
        if !judge.failed.contains(&n) {
            println!("note: criterion {n} is listed as unmet but passed");
        }
    }
    println!(
        "summary: {}/11 criteria met; unmet: {:?}",
        11 - judge.failed.len(),
        judge.failed
    );
    assert!(unexpected.is_empty(), "criteria failed unexpectedly: {unexpected:?}");
}
