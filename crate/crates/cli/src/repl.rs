use std::io::{BufRead, Write};

use shiftlab::dsl::{parse_script, CommandKind, SftDef, TopologyDecl};

use crate::session::Session;

/// Accumulates REPL lines into commands.
///
/// A line starting with `%` first flushes what is buffered. A buffer that parses runs at once,
/// unless its command takes a list that may continue on later lines (`%CA`, pattern `%SFT`,
/// custom `%topology`); those run at the next `%` line, a lone `.` line, or end of input.
#[derive(Default)]
pub struct ReplBuffer {
    lines: Vec<String>,
}

impl ReplBuffer {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Feeds one line; returns the sources that are ready to run.
    pub fn push(&mut self, line: &str) -> Vec<String> {
        let mut ready = Vec::new();
        if line.trim() == "." {
            ready.extend(self.flush());
            return ready;
        }
        if line.trim_start().starts_with('%') {
            ready.extend(self.flush());
        }
        if line.trim().is_empty() && self.lines.is_empty() {
            return ready;
        }
        self.lines.push(line.to_string());
        let src = self.lines.join("\n");
        match parse_script(&src) {
            Ok(s) if !s.commands.iter().any(|c| open_ended(&c.kind)) => ready.extend(self.flush()),
            Err(e) if !e.incomplete => ready.extend(self.flush()),
            _ => {}
        }
        ready
    }

    pub fn flush(&mut self) -> Option<String> {
        if self.lines.is_empty() {
            return None;
        }
        let src = self.lines.join("\n");
        self.lines.clear();
        Some(src)
    }
}

fn open_ended(k: &CommandKind) -> bool {
    matches!(
        k,
        CommandKind::Ca { .. }
            | CommandKind::Sft { def: SftDef::Patterns(_), .. }
            | CommandKind::Topology(TopologyDecl::Custom(_))
    )
}

/// Reads commands from `input` until it ends; errors are reported and the session continues.
pub fn repl(session: &mut Session, input: &mut dyn BufRead, out: &mut dyn Write, prompt: bool) -> std::io::Result<()> {
    let mut buf = ReplBuffer::default();
    let mut line = String::new();
    loop {
        if prompt {
            write!(out, "{}", if buf.is_empty() { "> " } else { ". " })?;
            out.flush()?;
        }
        line.clear();
        let done = input.read_line(&mut line)? == 0;
        let ready = if done { buf.flush().into_iter().collect() } else { buf.push(line.trim_end_matches(['\n', '\r'])) };
        for src in ready {
            if let Err(e) = session.run_source(&src, out) {
                writeln!(out, "error: {e}")?;
            }
        }
        if done {
            return Ok(());
        }
    }
}
