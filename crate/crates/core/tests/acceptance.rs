//! Acceptance criteria, one PASS/FAIL/SKIP line each.
//!
//! The 20 Newsgroups checks run when `SENSEKIT_20NG` names a directory
//! holding `20news-bydate-train` and `20news-bydate-test`; the 20-class run
//! additionally needs `SENSEKIT_HEAVY=1`.

use std::path::PathBuf;
use std::process::ExitCode;

use sensekit::verify::suite::{self, CheckResult, Status};

const SEED: u64 = 20140622;

fn main() -> ExitCode {
    let newsgroups = std::env::var_os("SENSEKIT_20NG").map(PathBuf::from);
    let heavy = std::env::var("SENSEKIT_HEAVY").is_ok_and(|v| v == "1");
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));

    let checks: Vec<(u32, Box<dyn Fn() -> CheckResult>)> = vec![
        (1, Box::new(|| suite::kernel_oracle(SEED))),
        (2, Box::new(|| suite::psd(SEED))),
        (3, Box::new(|| suite::overflow(SEED))),
        (4, Box::new(|| suite::solver_oracle(SEED))),
        (
            5,
            Box::new(|| suite::bayes_optimality(&[SEED, SEED + 1, SEED + 2, SEED + 3, SEED + 4])),
        ),
        (6, Box::new(|| suite::table1(newsgroups.as_deref(), SEED))),
        (
            7,
            Box::new(|| {
                if heavy {
                    suite::table2(newsgroups.as_deref(), SEED)
                } else {
                    CheckResult {
                        id: 7,
                        name: "20NG 20-class reproduction",
                        status: Status::Skip,
                        detail: "heavy check; set SENSEKIT_HEAVY=1 and SENSEKIT_20NG".into(),
                        seconds: 0.0,
                    }
                }
            }),
        ),
        (8, Box::new(|| suite::pyramid_consistency(SEED))),
        (9, Box::new(|| suite::determinism(SEED))),
    ];

    let mut failed = 0;
    for (id, check) in &checks {
        if filter.as_ref().is_some_and(|f| *f != id.to_string()) {
            continue;
        }
        let r = check();
        println!("{r}");
        if r.status == Status::Fail {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
