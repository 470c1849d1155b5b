//! Drive the command entry points from code and print their JSON reports:
//! a solve, a kernel benchmark and a layout description.
//!
//!     cargo run --release --example run_report

use blockeig::cli::{run, EXIT_OK};

fn main() {
    let commands: [&[&str]; 3] = [
        &["solve", "--gen", "banded", "--n", "600", "--k", "3", "--no-timings"],
        &["bench", "--gen", "random", "--n", "3000", "--sweep", "cache=128,512", "--reps", "3"],
        &["explain-layout", "--nd", "3", "--n", "90"],
    ];
    for args in commands {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("blockeig").chain(args.iter().copied()), &mut out, &mut err);
        println!("$ blockeig {}  (exit {code})", args.join(" "));
        if code == EXIT_OK {
            let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
            let summary = match v["command"].as_str() {
                Some("solve") => v["solve"]["eigenvalues"].clone(),
                Some("bench") => v["bench"]["rows"].clone(),
                _ => v["layout"]["vector_segments"].clone(),
            };
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
        } else {
            print!("{}", String::from_utf8_lossy(&err));
        }
    }
}
