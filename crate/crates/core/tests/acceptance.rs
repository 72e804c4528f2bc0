use std::time::Duration;

use sumlab_core::verify::{self, Scale};

fn main() {
    let results = verify::run_all(Scale::full(), 20240601, Duration::from_secs(600));
    let mut by_criterion: Vec<(&str, Vec<&verify::CheckResult>)> = Vec::new();
    for r in &results {
        match by_criterion.iter_mut().find(|(c, _)| *c == r.criterion) {
            Some((_, v)) => v.push(r),
            None => by_criterion.push((r.criterion, vec![r])),
        }
    }
    let mut failed = Vec::new();
    for (criterion, checks) in &by_criterion {
        let pass = checks.iter().all(|c| c.pass);
        let worst = checks.iter().find(|c| !c.pass).unwrap_or(&checks[0]);
        println!(
            "{} {criterion}: {}/{} checks ({})",
            if pass { "PASS" } else { "FAIL" },
            checks.iter().filter(|c| c.pass).count(),
            checks.len(),
            worst
        );
        if !pass {
            failed.push(*criterion);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
