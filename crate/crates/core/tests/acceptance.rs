//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Each solver criterion runs the `spline-pml` binary on a shipped config in
//! its own process, so peak memory of one study does not carry into the next.
//! Pass criterion numbers as arguments to run a subset:
//! `cargo test --test acceptance -- 1 4`.

mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

/// Criteria that fail with the current method; see the README.
const KNOWN_FAILURES: &[usize] = &[1, 3, 5];

#[derive(Debug, Clone)]
struct Row {
    experiment: String,
    sigma0: f64,
    degree: usize,
    h1: f64,
    l2: f64,
}

impl Row {
    fn parse(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(format!("malformed row {line:?}"));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|e| format!("{line:?}: {e}"));
        Ok(Self {
            experiment: f[0].to_owned(),
            sigma0: num(2)?,
            degree: f[3].parse().map_err(|e| format!("{line:?}: {e}"))?,
            h1: num(6)?,
            l2: num(7)?,
        })
    }
}

fn run_config(config: &str, axes: &[&str]) -> Result<Vec<Row>, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(config);
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spline-pml"));
    if axes.is_empty() {
        cmd.arg("solve").arg(&path);
    } else {
        cmd.arg("sweep").arg(&path);
        for a in axes {
            cmd.args(["--axis", a]);
        }
    }
    let res = cmd.arg("--out").arg(out.path()).output().map_err(|e| e.to_string())?;
    if !res.status.success() {
        return Err(format!("{config}: exit {:?}: {}", res.status.code(), String::from_utf8_lossy(&res.stderr).trim()));
    }
    String::from_utf8_lossy(&res.stdout).lines().map(Row::parse).collect()
}

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new() -> Self {
        Self { pass: true, detail: String::new() }
    }

    fn require(&mut self, ok: bool, what: String) {
        if !ok {
            self.pass = false;
            self.note(format!("violated: {what}"));
        }
    }

    fn note(&mut self, s: String) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(&s);
    }

    fn budget(&mut self, elapsed: Duration, minutes: u64) {
        self.require(elapsed < Duration::from_secs(60 * minutes), format!("runtime {:.0}s >= {minutes} min", elapsed.as_secs_f64()));
    }
}

fn within(v: f64, reference: f64, rel: f64) -> bool {
    (v - reference).abs() <= rel * reference
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn monotone_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn h_refinement_square() -> Result<Verdict, String> {
    let start = Instant::now();
    let rows = run_config("example2_h.toml", &[])?;
    let mut v = Verdict::new();
    let h1: Vec<f64> = rows.iter().map(|r| r.h1).collect();
    let l2: Vec<f64> = rows.iter().map(|r| r.l2).collect();
    v.note(format!("H1 {}", fmt_list(&h1)));
    v.note(format!("L2 {}", fmt_list(&l2)));
    let ref_h1 = [0.882, 0.421, 0.192, 0.0938, 0.0463];
    let ref_l2 = [0.601, 0.234, 0.0676, 0.0174, 0.00437];
    v.require(rows.len() == 5, format!("{} rows", rows.len()));
    for i in 0..rows.len().min(5) {
        v.require(within(h1[i], ref_h1[i], 0.25), format!("H1 row {i}: {:.4} vs {} +-25%", h1[i], ref_h1[i]));
        v.require(within(l2[i], ref_l2[i], 0.25), format!("L2 row {i}: {:.4} vs {} +-25%", l2[i], ref_l2[i]));
    }
    for w in h1.windows(2) {
        v.require((1.8..=2.4).contains(&(w[0] / w[1])), format!("H1 ratio {:.2} outside [1.8, 2.4]", w[0] / w[1]));
    }
    for w in l2.windows(2) {
        v.require((2.4..=4.3).contains(&(w[0] / w[1])), format!("L2 ratio {:.2} outside [2.4, 4.3]", w[0] / w[1]));
    }
    v.budget(start.elapsed(), 10);
    Ok(v)
}

fn p_refinement_square() -> Result<Verdict, String> {
    let start = Instant::now();
    let rows: Vec<Row> = run_config("example2_p.toml", &[])?
        .into_iter()
        .filter(|r| (5..=9).contains(&r.degree))
        .collect();
    let mut v = Verdict::new();
    let h1: Vec<f64> = rows.iter().map(|r| r.h1).collect();
    v.note(format!("H1 d=5..9 {}", fmt_list(&h1)));
    v.require(rows.len() == 5, format!("{} rows for d=5..9", rows.len()));
    v.require(monotone_decreasing(&h1), "monotone H1 decrease".into());
    v.require(h1.first().is_some_and(|&e| e <= 6e-3), "H1(d=5) <= 6e-3".into());
    v.require(h1.last().is_some_and(|&e| e <= 1.2e-4), "H1(d=9) <= 1.2e-4".into());
    v.budget(start.elapsed(), 10);
    Ok(v)
}

fn h_refinement_disk() -> Result<Verdict, String> {
    let start = Instant::now();
    let rows = run_config("example1_h.toml", &[])?;
    let mut v = Verdict::new();
    let h1: Vec<f64> = rows.iter().map(|r| r.h1).collect();
    v.note(format!("H1 {}", fmt_list(&h1)));
    let reference = [5.21e-1, 3.43e-2, 5.61e-3];
    v.require(rows.len() == 3, format!("{} rows", rows.len()));
    for (e, r) in h1.iter().zip(reference) {
        v.require(*e <= 2.0 * r && *e >= 0.5 * r, format!("H1 {e:.3e} not within 2x of {r:.3e}"));
    }
    for w in h1.windows(2) {
        v.require(w[0] / w[1] >= 10.0, format!("step drop {:.1}x < 10x", w[0] / w[1]));
    }
    v.budget(start.elapsed(), 15);
    Ok(v)
}

fn pml_against_abc() -> Result<Verdict, String> {
    let start = Instant::now();
    let keep = |rows: Vec<Row>| -> Vec<Row> { rows.into_iter().filter(|r| [5, 8, 10].contains(&r.degree)).collect() };
    let pml = keep(run_config("example1_pml.toml", &[])?);
    let abc = keep(run_config("example1_abc.toml", &[])?);
    let mut v = Verdict::new();
    v.note(format!("PML L2 d=5,8,10 {}", fmt_list(&pml.iter().map(|r| r.l2).collect::<Vec<_>>())));
    v.note(format!("ABC L2 {}", fmt_list(&abc.iter().map(|r| r.l2).collect::<Vec<_>>())));
    v.require(pml.len() == 3 && abc.len() == 3, "rows for d = 5, 8, 10".into());
    for r in &abc {
        v.require(r.l2 >= 8e-2 * 0.7, format!("ABC L2 {:.3e} at d={} below 5.6e-2", r.l2, r.degree));
    }
    if let (Some(p), Some(a)) = (pml.iter().find(|r| r.degree == 10), abc.iter().find(|r| r.degree == 10)) {
        v.note(format!("ratio at d=10 {:.2e}", p.l2 / a.l2));
        v.require(p.l2 / a.l2 <= 1e-3, "PML/ABC <= 1e-3 at d=10".into());
    }
    v.budget(start.elapsed(), 15);
    Ok(v)
}

fn strength_width_tradeoff() -> Result<Verdict, String> {
    let rows = run_config("sigma_width.toml", &["sigma0", "width"])?;
    let mut v = Verdict::new();
    for m in ["0.25", "0.5", "1"] {
        let tag = format!("[M={m}]");
        let at = |s: f64| rows.iter().find(|r| r.experiment.ends_with(&tag) && r.sigma0 == s).map(|r| r.l2);
        let (Some(e0), Some(e10), Some(e15), Some(e25)) = (at(0.0), at(10.0), at(15.0), at(25.0)) else {
            v.require(false, format!("missing rows for M={m}"));
            continue;
        };
        v.note(format!("M={m}: L2(0)/L2(10) = {:.1}, L2(25)/L2(15) = {:.2}", e0 / e10, e25 / e15));
        if m != "0.25" {
            v.require(e0 / e10 >= 10.0, format!("M={m}: sigma0=0 not 10x worse than sigma0=10"));
        }
        v.require(e25 >= 0.5 * e15, format!("M={m}: still improving from sigma0=15 to 25"));
    }
    Ok(v)
}

fn variable_medium() -> Result<Verdict, String> {
    let start = Instant::now();
    let rows = run_config("example3.toml", &[])?;
    let mut v = Verdict::new();
    let l2: Vec<f64> = rows.iter().map(|r| r.l2).collect();
    let h1: Vec<f64> = rows.iter().map(|r| r.h1).collect();
    v.note(format!("L2 d=5,6,7 {}", fmt_list(&l2)));
    v.require(rows.len() == 3, format!("{} rows", rows.len()));
    v.require(monotone_decreasing(&l2) && monotone_decreasing(&h1), "monotone decrease".into());
    v.require(l2.last().is_some_and(|&e| e <= 1e-3), "L2(d=7) <= 1e-3".into());
    v.budget(start.elapsed(), 15);
    Ok(v)
}

fn higher_wavenumber() -> Result<Verdict, String> {
    let rows = run_config("example1_k20.toml", &[])?;
    let mut v = Verdict::new();
    let l2: Vec<f64> = rows.iter().map(|r| r.l2).collect();
    let h1: Vec<f64> = rows.iter().map(|r| r.h1).collect();
    v.note(format!("L2 d=5..8 {}", fmt_list(&l2)));
    v.require(rows.len() == 4, format!("{} rows", rows.len()));
    v.require(monotone_decreasing(&l2) && monotone_decreasing(&h1), "monotone decrease".into());
    v.require(l2.last().is_some_and(|&e| e <= 1e-3), "L2(d=8) <= 1e-3".into());
    Ok(v)
}

fn invariants() -> Result<Verdict, String> {
    let start = Instant::now();
    let fails = common::invariant_suite();
    let mut v = Verdict::new();
    v.note(format!("{} violations", fails.len()));
    for f in fails.iter().take(5) {
        v.require(false, f.clone());
    }
    v.require(fails.is_empty(), "all invariants".into());
    v.budget(start.elapsed(), 5);
    Ok(v)
}

type Criterion = (usize, &'static str, fn() -> Result<Verdict, String>);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (1, "h-refinement, square scatterer", h_refinement_square),
        (2, "p-refinement, square scatterer", p_refinement_square),
        (3, "h-refinement, disk scatterer", h_refinement_disk),
        (4, "PML against first-order ABC", pml_against_abc),
        (5, "layer strength against width", strength_width_tradeoff),
        (6, "variable medium", variable_medium),
        (7, "disk scatterer at k = 20", higher_wavenumber),
        (8, "invariant suites", invariants),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = 0;
    for (n, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let verdict = f().unwrap_or_else(|e| Verdict { pass: false, detail: format!("error: {e}") });
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.contains(&n);
        let status = if verdict.pass { "PASS" } else { "FAIL" };
        let tag = match (verdict.pass, known) {
            (false, true) => " (known)",
            (true, true) => " (listed as known failure)",
            _ => "",
        };
        println!("criterion {n} [{name}]: {status}{tag} in {secs:.0}s: {}", verdict.detail);
        if !verdict.pass && !known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
