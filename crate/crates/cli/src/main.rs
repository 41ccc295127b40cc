use std::io::{self, BufWriter, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shiftlab_cli::{repl, Session, TilerMode};

#[derive(Parser)]
#[command(name = "shiftlab", version, about = "Shifts of finite type and cellular automata on Z^d-like graphs")]
struct Cli {
    /// Worker threads for parallel commands.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Directory for CA ball logs.
    #[arg(long, global = true, default_value = ".")]
    log_dir: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a script.
    Run { file: PathBuf },
    /// Read commands from standard input.
    Repl,
    /// Run a script, then serve the tiler for one of its SFTs.
    Serve {
        script: PathBuf,
        sft: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
    },
}

fn session(cli: &Cli) -> Session {
    let mut s = Session::new();
    s.threads = cli.threads.max(1);
    s.log_dir = cli.log_dir.clone();
    s.tiler_mode = TilerMode::Serve;
    s
}

fn run_file(s: &mut Session, path: &PathBuf) -> Result<(), ExitCode> {
    let src = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(1)
    })?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let r = s.run_source(&src, &mut out);
    let _ = out.flush();
    r.map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(e.exit_code() as u8)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut s = session(&cli);
    match &cli.command {
        Cmd::Run { file } => match run_file(&mut s, file) {
            Ok(()) => ExitCode::SUCCESS,
            Err(c) => c,
        },
        Cmd::Repl => {
            let stdin = io::stdin();
            let prompt = stdin.is_terminal();
            let mut out = BufWriter::new(io::stdout());
            match repl(&mut s, &mut stdin.lock(), &mut out, prompt).and_then(|_| out.flush()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(1)
                }
            }
        }
        Cmd::Serve { script, sft, port } => {
            if let Err(c) = run_file(&mut s, script) {
                return c;
            }
            let session = match s.sft(sft).map(|x| shiftlab_tiler::TilerSession::new(sft.clone(), x.clone())) {
                Ok(Ok(t)) => t,
                Ok(Err(e)) => {
                    eprintln!("{e}");
                    return ExitCode::from(1);
                }
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(1);
                }
            };
            println!("serving {sft} at http://127.0.0.1:{port}/state");
            match shiftlab_tiler::serve_blocking(session, *port) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
