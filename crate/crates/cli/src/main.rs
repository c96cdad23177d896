mod args;
mod commands;
mod error;
mod report;
mod svg;

use std::io::Write;
use std::process::ExitCode;

use args::FormatArg;
use error::CliError;

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            ExitCode::SUCCESS
        }
        Err(err) => {
            match &err {
                CliError::Usage(e) => {
                    let _ = e.print();
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn real_main() -> Result<(), CliError> {
    let cli = args::parse(std::env::args().collect())?;
    let common = cli.command.common();
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Input(format!("--threads: {e}")))?;
    }
    let (report, series) = commands::run(&cli.command)?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match common.format {
        FormatArg::Table => report.write_table(&mut out)?,
        FormatArg::Csv => report.write_csv(&mut out)?,
    }
    out.flush()?;
    if let Some(path) = &common.out {
        report.write_csv(std::fs::File::create(path)?)?;
    }
    if let Some(path) = &common.svg {
        match &series {
            Some(s) => commands::write_svg(path, s)?,
            None => return Err(CliError::Input("--svg applies to plot-weights only".into())),
        }
    }
    Ok(())
}
