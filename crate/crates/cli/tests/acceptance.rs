//! Acceptance criteria 1-10, one line each. Runs without the libtest
//! harness so the summary is always printed.

use std::process::Command as Proc;
use std::time::{Duration, Instant};

use qcverify::{run, Check, Command, Report, RunConfig};

struct Line {
    id: usize,
    title: &'static str,
    pass: bool,
    summary: String,
}

fn cfg(n: usize) -> RunConfig {
    RunConfig {
        n,
        ..RunConfig::default()
    }
}

fn grid(n: usize) -> RunConfig {
    RunConfig {
        c0: vec![0.5, 1.0, 2.0],
        sigma: vec![0.5, 1.0, 2.0],
        ..cfg(n)
    }
}

fn timed(cmd: Command, c: &RunConfig) -> (Report, Duration) {
    let t = Instant::now();
    let r = run(cmd, c).unwrap_or_else(|e| panic!("{} failed to run: {e}", cmd.name()));
    (r, t.elapsed())
}

fn worst(checks: &[&Check]) -> f64 {
    checks
        .iter()
        .filter(|c| matches!(c.comparison, qcverify::Comparison::Le))
        .map(|c| c.max_residual)
        .fold(0.0, f64::max)
}

fn failing(checks: &[&Check]) -> Vec<String> {
    checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect()
}

fn select<'a>(reports: &'a [Report], prefix: &str) -> Vec<&'a Check> {
    reports.iter().flat_map(|r| r.checks.iter()).filter(|c| c.name.starts_with(prefix)).collect()
}

fn criterion_1() -> Line {
    let mut pass = true;
    let mut notes = Vec::new();
    for n in [1, 2] {
        let (r, t) = timed(Command::Audit, &cfg(n));
        pass &= r.pass && t < Duration::from_secs(1);
        notes.push(format!("n={n}: {} checks exact, {:.0} ms", r.checks.iter().filter(|c| c.pass).count(), t.as_secs_f64() * 1e3));
    }
    Line {
        id: 1,
        title: "frame audit",
        pass,
        summary: notes.join("; "),
    }
}

fn scan(id: usize, title: &'static str, cmd: Command) -> Line {
    let mut pass = true;
    let mut notes = Vec::new();
    for n in [1, 2] {
        let c = grid(n);
        let (r, t) = timed(cmd, &c);
        let configs = c.c0.len() * c.sigma.len();
        let per_config = t / configs as u32;
        let checks: Vec<&Check> = r.checks.iter().collect();
        pass &= r.pass;
        if cmd == Command::Residual {
            pass &= per_config < Duration::from_secs(30);
        }
        let bad = failing(&checks);
        notes.push(format!(
            "n={n}: worst {:.2e} over {configs} configs, {:.2} s/config{}",
            worst(&checks),
            per_config.as_secs_f64(),
            if bad.is_empty() { String::new() } else { format!(", failing {bad:?}") }
        ));
    }
    Line {
        id,
        title,
        pass,
        summary: notes.join("; "),
    }
}

fn criterion_4() -> Line {
    let mut line = scan(4, "qc-Einstein vanishing", Command::Torsion);
    let mut controls = Vec::new();
    for n in [1, 2] {
        let r = run(Command::Torsion, &cfg(n)).expect("torsion runs");
        let c = r.checks.iter().find(|c| c.name == "nonextremal_torsion_detected").expect("control present");
        line.pass &= c.pass;
        controls.push(format!("n={n} min control peak {:.2e}", c.max_residual));
    }
    line.summary = format!("{}; {}", line.summary, controls.join(", "));
    line
}

fn criterion_5() -> Line {
    let (r, t) = timed(Command::Qmatrix, &cfg(1));
    let spectrum = r.details["spectrum"]
        .as_array()
        .map(|v| {
            v.iter()
                .map(|e| format!("{}^{}", e["root"].as_str().unwrap_or("?"), e["multiplicity"]))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .unwrap_or_default();
    let tampered = Proc::new(env!("CARGO_BIN_EXE_qcverify"))
        .args(["qmatrix", "--tamper-q", "0,0,-1"])
        .output()
        .expect("binary runs");
    let control = tampered.status.code() == Some(1);
    Line {
        id: 5,
        title: "matrix Q",
        pass: r.pass && t < Duration::from_secs(1) && control,
        summary: format!(
            "spectrum {spectrum}; min eigenvalue {}; {:.0} ms; tampered entry exit {:?}",
            r.details["min_eigenvalue"]["root"].as_str().unwrap_or("?"),
            t.as_secs_f64() * 1e3,
            tampered.status.code()
        ),
    }
}

fn identity_line(id: usize, title: &'static str, reports: &[Report], prefixes: &[&str]) -> Line {
    let checks: Vec<&Check> = prefixes.iter().flat_map(|p| select(reports, p)).collect();
    let bad = failing(&checks);
    Line {
        id,
        title,
        pass: !checks.is_empty() && bad.is_empty(),
        summary: format!(
            "{} checks over n=1,2, worst residual {:.2e}{}",
            checks.len(),
            worst(&checks),
            if bad.is_empty() { String::new() } else { format!(", failing {bad:?}") }
        ),
    }
}

fn criterion_9() -> Line {
    let (r, t) = timed(Command::Functional, &cfg(1));
    let inv: Vec<String> = r
        .checks
        .iter()
        .filter(|c| c.name.starts_with("ratio_invariance"))
        .map(|c| format!("{} {:.1e}", c.name.trim_start_matches("ratio_invariance"), c.max_residual))
        .collect();
    let bumps = r.checks.iter().find(|c| c.name == "bump_margin_beyond_error");
    Line {
        id: 9,
        title: "symmetry-group checks",
        pass: r.pass && t < Duration::from_secs(120),
        summary: format!(
            "R = {:.6}; {}; min bump margin less error {:.2e}; {:.1} s",
            r.details["base"]["ratio"].as_f64().unwrap_or(f64::NAN),
            inv.join(", "),
            bumps.map_or(f64::NAN, |c| c.max_residual),
            t.as_secs_f64()
        ),
    }
}

fn strip_wall(text: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(text).expect("report is JSON");
    v["wall_ms"] = serde_json::Value::Null;
    v.to_string()
}

fn criterion_10() -> Line {
    let bin = env!("CARGO_BIN_EXE_qcverify");
    let cases: [&[&str]; 5] = [
        &["qmatrix"],
        &["residual", "--n", "2", "--points", "500", "--seed", "11"],
        &["torsion", "--points", "300", "--seed", "12"],
        &["identities", "--points", "40", "--polys", "20", "--seed", "13"],
        &["audit", "--n", "2", "--points", "8"],
    ];
    let mut pass = true;
    for args in cases {
        let a = Proc::new(bin).args(args).output().expect("binary runs");
        let b = Proc::new(bin).args(args).output().expect("binary runs");
        let same = strip_wall(&String::from_utf8_lossy(&a.stdout)) == strip_wall(&String::from_utf8_lossy(&b.stdout));
        pass &= same && a.status.code() == Some(0) && b.status.code() == Some(0);
    }
    let usage = Proc::new(bin).args(["residual", "--q0", "1,2"]).output().expect("binary runs");
    pass &= usage.status.code() == Some(2);
    Line {
        id: 10,
        title: "determinism",
        pass,
        summary: format!("{} commands run twice, reports identical modulo wall_ms; bad config exit {:?}", cases.len(), usage.status.code()),
    }
}

fn main() {
    let identities: Vec<Report> = [1, 2].iter().map(|&n| run(Command::Identities, &cfg(n)).expect("identities run")).collect();
    let lines = vec![
        criterion_1(),
        scan(2, "Yamabe equation", Command::Residual),
        scan(3, "scalar-curvature constancy", Command::Scal),
        criterion_4(),
        criterion_5(),
        identity_line(6, "tensor lemma", &identities, &["lemma_de.", "zero_torsion."]),
        identity_line(7, "universal identities", &identities, &["universal."]),
        identity_line(8, "structural identities", &identities, &["structural."]),
        criterion_9(),
        criterion_10(),
    ];
    let mut all = true;
    for l in &lines {
        all &= l.pass;
        println!(
            "criterion {:>2} [{}]: {} ({})",
            l.id,
            l.title,
            if l.pass { "PASS" } else { "FAIL" },
            l.summary
        );
    }
    if !all {
        eprintln!("acceptance: at least one criterion failed");
        std::process::exit(1);
    }
}
