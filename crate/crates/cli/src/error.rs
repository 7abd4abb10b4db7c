use std::fmt;

/// An error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub const INPUT: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const NUMERICAL: i32 = 4;

    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: Self::INPUT,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: Self::CONFIG,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Library errors raised while running a command: numerical failures map to
/// exit 4, everything else is a problem with the requested configuration.
impl From<kernclust::Error> for CliError {
    fn from(e: kernclust::Error) -> Self {
        CliError {
            code: if e.is_numerical() {
                Self::NUMERICAL
            } else {
                Self::CONFIG
            },
            message: e.to_string(),
        }
    }
}
