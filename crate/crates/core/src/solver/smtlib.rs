use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::{Backend, BackendError, CheckResult, Lit, Scopes};

/// Talks SMT-LIB v2 to an external solver over its stdin/stdout. Variables
/// are declared as `Bool` constants; scopes use selector assumptions so
/// declarations survive `pop`.
pub struct SmtLibBackend {
    child: Child,
    input: BufWriter<ChildStdin>,
    lines: Receiver<String>,
    vars: i32,
    scopes: Scopes,
    model: Vec<bool>,
    dead: bool,
}

impl SmtLibBackend {
    pub fn spawn(command: &str) -> Result<Self, BackendError> {
        Self::start(command, None)
    }

    /// Like [`SmtLibBackend::spawn`], also setting the standard `:random-seed` option.
    pub fn spawn_seeded(command: &str, seed: u64) -> Result<Self, BackendError> {
        Self::start(command, Some(seed))
    }

    fn start(command: &str, seed: Option<u64>) -> Result<Self, BackendError> {
        let mut words = command.split_whitespace();
        let program = words.next().ok_or_else(|| BackendError::Process("empty command".into()))?;
        let mut child = Command::new(program)
            .args(words)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| BackendError::Process(format!("cannot start {program:?}: {e}")))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let input = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut b = Self { child, input, lines, vars: 0, scopes: Scopes::default(), model: Vec::new(), dead: false };
        b.send("(set-option :produce-models true)");
        if let Some(seed) = seed {
            b.send(&format!("(set-option :random-seed {})", seed % (1 << 31)));
        }
        b.send("(set-logic QF_UF)");
        Ok(b)
    }

    fn send(&mut self, text: &str) {
        if !self.dead && writeln!(self.input, "{text}").is_err() {
            self.dead = true;
        }
    }

    fn term(l: Lit) -> String {
        if l > 0 {
            format!("v{l}")
        } else {
            format!("(not v{})", -l)
        }
    }

    fn kill(&mut self) {
        self.dead = true;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Next non-empty response line, or `None` once the deadline passes.
    fn read_line(&mut self, deadline: Option<Instant>) -> Result<Option<String>, BackendError> {
        loop {
            let got = match deadline {
                Some(d) => self.lines.recv_timeout(d.saturating_duration_since(Instant::now())),
                None => self.lines.recv().map_err(|_| RecvTimeoutError::Disconnected),
            };
            match got {
                Ok(line) if line.trim().is_empty() => continue,
                Ok(line) => return Ok(Some(line)),
                Err(RecvTimeoutError::Timeout) => return Ok(None),
                Err(RecvTimeoutError::Disconnected) => {
                    self.dead = true;
                    return Err(BackendError::Process("solver exited".into()));
                }
            }
        }
    }

    fn fetch_model(&mut self) -> Result<(), BackendError> {
        self.model = vec![false; self.vars as usize + 1];
        if self.vars == 0 {
            return Ok(());
        }
        let names: Vec<String> = (1..=self.vars).map(|v| format!("v{v}")).collect();
        self.send(&format!("(get-value ({}))", names.join(" ")));
        self.flush()?;
        let mut text = String::new();
        let mut depth = 0i64;
        loop {
            let line = self.read_line(None)?.unwrap_or_default();
            depth += line.matches('(').count() as i64 - line.matches(')').count() as i64;
            text.push_str(&line);
            text.push(' ');
            if depth <= 0 {
                break;
            }
        }
        if text.trim_start().starts_with("(error") {
            return Err(BackendError::Process(text.trim().to_string()));
        }
        let cleaned = text.replace(['(', ')'], " ");
        let mut tokens = cleaned.split_whitespace();
        while let (Some(name), Some(val)) = (tokens.next(), tokens.next()) {
            if let Ok(v) = name.trim_start_matches('v').parse::<usize>() {
                if v < self.model.len() {
                    self.model[v] = val == "true";
                }
            }
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<(), BackendError> {
        if self.dead || self.input.flush().is_err() {
            self.dead = true;
            return Err(BackendError::Process("solver pipe closed".into()));
        }
        Ok(())
    }
}

impl Backend for SmtLibBackend {
    fn new_var(&mut self) -> Lit {
        self.vars += 1;
        let v = self.vars;
        self.send(&format!("(declare-const v{v} Bool)"));
        v
    }

    fn add_clause(&mut self, clause: &[Lit]) {
        let terms: Vec<String> = self.scopes.guard(clause).into_iter().map(Self::term).collect();
        let body = match terms.len() {
            0 => "false".to_string(),
            1 => terms[0].clone(),
            _ => format!("(or {})", terms.join(" ")),
        };
        self.send(&format!("(assert {body})"));
    }

    fn push(&mut self) {
        let s = self.new_var();
        self.scopes.selectors.push(s);
    }

    fn pop(&mut self) -> Result<(), BackendError> {
        let s = self.scopes.selectors.pop().ok_or(BackendError::Unbalanced)?;
        self.send(&format!("(assert (not v{s}))"));
        Ok(())
    }

    fn check(&mut self, assumptions: &[Lit], deadline: Option<Instant>) -> Result<CheckResult, BackendError> {
        if self.dead {
            return Err(BackendError::Process("solver no longer running".into()));
        }
        let assumed: Vec<String> = self.scopes.assumptions(assumptions).into_iter().map(Self::term).collect();
        self.send(&format!("(check-sat-assuming ({}))", assumed.join(" ")));
        self.flush()?;
        loop {
            match self.read_line(deadline)? {
                None => {
                    self.kill();
                    return Ok(CheckResult::Unknown);
                }
                Some(line) => match line.trim() {
                    "sat" => {
                        self.fetch_model()?;
                        return Ok(CheckResult::Sat);
                    }
                    "unsat" => return Ok(CheckResult::Unsat),
                    "unknown" => return Ok(CheckResult::Unknown),
                    other => log::warn!("solver said: {other}"),
                },
            }
        }
    }

    fn value(&mut self, lit: Lit) -> bool {
        let v = self.model.get(lit.unsigned_abs() as usize).copied().unwrap_or(false);
        if lit > 0 {
            v
        } else {
            !v
        }
    }

    fn name(&self) -> &str {
        "smtlib"
    }
}

impl Drop for SmtLibBackend {
    fn drop(&mut self) {
        if !self.dead {
            self.send("(exit)");
            let _ = self.input.flush();
            let started = Instant::now();
            while started.elapsed() < Duration::from_millis(200) {
                if matches!(self.child.try_wait(), Ok(Some(_))) {
                    return;
                }
                thread::sleep(Duration::from_millis(5));
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
