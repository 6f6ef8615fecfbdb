use std::process::ExitCode;

use clap::Parser;
use td2wd::{describe, emit, run, Args};

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let outcome = run(&args).and_then(|mut result| {
        if let Some(dir) = &args.out {
            emit(&mut result, dir)?;
        }
        Ok(result)
    });
    match outcome {
        Ok(result) => {
            print!("{}", describe(&result));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("td2wd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
