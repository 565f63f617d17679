use radfuse::Error;

pub const CONFIG: u8 = 2;
pub const DATA: u8 = 3;
pub const INTERNAL: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: DATA,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: INTERNAL,
            message: message.into(),
        }
    }
}

/// Exit code for a library error.
pub fn code_for(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Json(_) => CONFIG,
        Error::Leakage { .. } => INTERNAL,
        _ => DATA,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: code_for(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}
