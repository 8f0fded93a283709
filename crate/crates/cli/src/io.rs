//! CLI error mapping and atomic file output.

use std::path::Path;

pub const DATA: u8 = 2;
pub const INTERNAL: u8 = 3;

/// An error destined for stderr as a JSON object.
#[derive(Debug)]
pub struct CliError {
    exit_code: u8,
    kind: &'static str,
    message: String,
    line: Option<usize>,
}

impl CliError {
    pub fn new(exit_code: u8, kind: &'static str, message: String) -> Self {
        Self {
            exit_code,
            kind,
            message,
            line: None,
        }
    }

    pub fn data(kind: &'static str, message: String, line: Option<usize>) -> Self {
        Self {
            exit_code: DATA,
            kind,
            message,
            line,
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.exit_code
    }

    pub fn to_json(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("error".to_string(), serde_json::Value::from(self.kind));
        obj.insert(
            "message".to_string(),
            serde_json::Value::from(self.message.as_str()),
        );
        if let Some(line) = self.line {
            obj.insert("line".to_string(), serde_json::Value::from(line));
        }
        serde_json::Value::Object(obj).to_string()
    }
}

/// Writes to a temporary sibling and renames into place, so interrupted runs
/// never leave partial artifacts under the final name.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = {
        let mut name = path
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_default();
        name.push(".tmp");
        path.with_file_name(name)
    };
    let write = std::fs::write(&tmp, bytes).and_then(|()| std::fs::rename(&tmp, path));
    write.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        CliError::new(
            INTERNAL,
            "WriteFailed",
            format!("cannot write {}: {e}", path.display()),
        )
    })
}
