//! External-process adapter: runs a command template and captures its output
//! for the parsers in [`crate::results`] and [`crate::tls::stime`].
//!
//! Templates are split on whitespace into an argument vector; there is no
//! shell involved. The placeholders `{alg}`, `{window}` and `{out}` (plus
//! `{op}` and `{run}` for per-operation tools) are substituted verbatim into
//! each argument.

use std::process::Command;

use super::ProviderError;

/// What the captured text is expected to contain. The adapter itself never
/// interprets output; this tag tells the caller which parser applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    LiboqsSpeed,
    OpensslSpeed,
    STime,
}

/// Placeholder values for one invocation.
#[derive(Debug, Clone, Default)]
pub struct Substitutions {
    pub alg: Option<String>,
    pub window: Option<String>,
    pub out: Option<String>,
    pub op: Option<String>,
    pub run: Option<String>,
}

impl Substitutions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alg(mut self, v: impl Into<String>) -> Self {
        self.alg = Some(v.into());
        self
    }

    pub fn window(mut self, v: impl ToString) -> Self {
        self.window = Some(v.to_string());
        self
    }

    pub fn out(mut self, v: impl Into<String>) -> Self {
        self.out = Some(v.into());
        self
    }

    pub fn op(mut self, v: impl Into<String>) -> Self {
        self.op = Some(v.into());
        self
    }

    pub fn run(mut self, v: impl ToString) -> Self {
        self.run = Some(v.to_string());
        self
    }

    fn apply(&self, token: &str) -> String {
        let mut s = token.to_string();
        for (placeholder, value) in [
            ("{alg}", &self.alg),
            ("{window}", &self.window),
            ("{out}", &self.out),
            ("{op}", &self.op),
            ("{run}", &self.run),
        ] {
            if let Some(v) = value {
                s = s.replace(placeholder, v);
            }
        }
        s
    }
}

/// Captured standard streams and exit status of a completed command.
#[derive(Debug, Clone)]
pub struct CapturedOutput {
    pub stdout: String,
    pub stderr: String,
    pub status: i32,
}

/// Run `template` with placeholders substituted and capture its output.
/// A non-zero exit is an error carrying the captured stderr.
pub fn run_command_template(
    template: &str,
    subs: &Substitutions,
) -> Result<CapturedOutput, ProviderError> {
    let argv: Vec<String> = template
        .split_whitespace()
        .map(|tok| subs.apply(tok))
        .collect();
    if argv.is_empty() {
        return Err(ProviderError::SpawnFailed {
            command: template.to_string(),
            detail: "empty command template".into(),
        });
    }
    let output = Command::new(&argv[0])
        .args(&argv[1..])
        .output()
        .map_err(|e| ProviderError::SpawnFailed {
            command: argv.join(" "),
            detail: e.to_string(),
        })?;
    let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    let status = output.status.code().unwrap_or(-1);
    if status != 0 {
        return Err(ProviderError::NonzeroExit {
            command: argv.join(" "),
            status,
            stderr,
        });
    }
    Ok(CapturedOutput {
        stdout,
        stderr,
        status,
    })
}

/// A command template tied to the output format it produces.
#[derive(Debug, Clone)]
pub struct ExternalAdapter {
    pub template: String,
    pub kind: OutputKind,
}

impl ExternalAdapter {
    pub fn new(template: impl Into<String>, kind: OutputKind) -> Self {
        ExternalAdapter {
            template: template.into(),
            kind,
        }
    }

    pub fn run(&self, subs: &Substitutions) -> Result<CapturedOutput, ProviderError> {
        run_command_template(&self.template, subs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_substitutes_alg() {
        let out = run_command_template("echo {alg}", &Substitutions::new().alg("ML-KEM-512"))
            .unwrap();
        assert_eq!(out.stdout.trim(), "ML-KEM-512");
        assert_eq!(out.status, 0);
    }

    #[test]
    fn missing_binary_is_spawn_failed() {
        let err = run_command_template("definitely-not-a-binary-pqb {alg}", &Substitutions::new())
            .unwrap_err();
        assert_eq!(err.code(), "SPAWN_FAILED");
    }

    #[test]
    fn nonzero_exit_carries_status_and_stderr() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("exit2.sh");
        std::fs::write(&script, "#!/bin/sh\necho boom >&2\nexit 2\n").unwrap();
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
        let err =
            run_command_template(script.to_str().unwrap(), &Substitutions::new()).unwrap_err();
        match err {
            ProviderError::NonzeroExit { status, stderr, .. } => {
                assert_eq!(status, 2);
                assert!(stderr.contains("boom"));
            }
            other => panic!("expected NonzeroExit, got {other:?}"),
        }
    }

    #[test]
    fn window_and_out_placeholders() {
        let out = run_command_template(
            "echo {window}:{out}",
            &Substitutions::new().window(3.0).out("/tmp/x"),
        )
        .unwrap();
        assert_eq!(out.stdout.trim(), "3:/tmp/x");
    }
}
