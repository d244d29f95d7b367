//! Exit-code discipline: 1 verification/policy failure, 2 usage error, 3
//! I/O or resolution error.

use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (exit {})", self.message, self.code)
    }
}

pub fn verification(message: impl fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

pub fn usage(message: impl fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

pub fn io(message: impl fmt::Display) -> Failure {
    Failure {
        code: 3,
        message: message.to_string(),
    }
}

/// A missing input path is a usage error; an unreadable one is I/O.
pub fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    if !path.exists() {
        return Err(usage(format!("{} does not exist", path.display())));
    }
    std::fs::read(path).map_err(|e| io(format!("reading {}: {e}", path.display())))
}
