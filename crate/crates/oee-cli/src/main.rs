use clap::error::ErrorKind;
use clap::Parser;
use oee_cli::{presets, run, Args, Command};
use std::process::ExitCode;

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    if matches!(args.command, Command::Presets) {
        presets::names().for_each(|n| println!("{n}"));
        return ExitCode::SUCCESS;
    }
    match run(&args) {
        Ok(Some(m)) => {
            for o in &m.outputs {
                println!("{}  {}", o.sha256, o.path);
            }
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
