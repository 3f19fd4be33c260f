use std::path::PathBuf;
use std::process::ExitCode;

use bernstein_lab::report::{run, Experiment, RunConfig};
use bernstein_lab::Error;

const USAGE: &str = "usage: bernstein-lab [run] <experiment> [--flag value]... [--config FILE] [--out DIR]

experiments: leaf perturb barrier solve-mse simons slag mss2d lawson-osserman full-report
`bernstein-lab <experiment> --help` lists the parameters of one experiment.";

fn help(e: Experiment) -> String {
    let mut out = format!("parameters of `{}`:\n", e.name());
    for p in e.parameters() {
        out.push_str(&format!("  --{:<18} {} (default {})\n", p.key.replace('_', "-"), p.help, p.default));
    }
    out
}

enum Parsed {
    Run(RunConfig),
    Help(String),
}

fn parse(args: &[String]) -> Result<Parsed, Error> {
    let mut it = args.iter().peekable();
    if it.peek().map(|s| s.as_str()) == Some("run") {
        it.next();
    }
    let name = match it.next() {
        None => return Err(Error::Config("missing experiment".into())),
        Some(s) if s == "--help" || s == "-h" => return Ok(Parsed::Help(USAGE.into())),
        Some(s) => s,
    };
    let experiment = Experiment::parse(name)?;
    let mut config_file = None;
    let mut out = PathBuf::from("out");
    let mut flags = vec![];
    while let Some(arg) = it.next() {
        if arg == "--help" || arg == "-h" {
            return Ok(Parsed::Help(help(experiment)));
        }
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected `--flag value`, got `{arg}`")))?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| Error::Config(format!("flag `--{key}` needs a value")))?;
                (key.to_string(), v.clone())
            }
        };
        match key.as_str() {
            "config" => config_file = Some(PathBuf::from(value)),
            "out" => out = PathBuf::from(value),
            _ => flags.push((key, value)),
        }
    }
    let mut cfg = RunConfig::new(experiment, out);
    if let Some(path) = config_file {
        cfg.apply_file(&path)?;
    }
    for (k, v) in flags {
        cfg.set(&k, &v)?;
    }
    Ok(Parsed::Run(cfg))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = match parse(&args) {
        Ok(Parsed::Run(cfg)) => cfg,
        Ok(Parsed::Help(text)) => {
            println!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("error: {e}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(report) => {
            for c in &report.checks {
                let mark = if c.passed { "pass" } else { "FAIL" };
                println!("{mark}  {:<40} value={:e} tolerance={:e}", c.name, c.value, c.tolerance);
            }
            println!("report: {}", cfg.output_dir.join("report.json").display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed checks: {}", report.failed_checks().join(", "));
                ExitCode::from(1)
            }
        }
        Err(e @ (Error::Config(_) | Error::Input(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
