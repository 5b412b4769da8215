//! JSON output with every float printed to 17 significant digits.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, Serializer};

use crate::error::{CliError, CliResult};

struct SigFormatter;

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn write_i64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: i64) -> io::Result<()> {
        CompactFormatter.write_i64(w, value)
    }
}

/// One compact JSON document, no trailing newline.
pub fn to_line<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, SigFormatter);
    value.serialize(&mut ser).expect("report values serialize");
    String::from_utf8(buf).expect("serde_json emits utf-8")
}

/// JSON-lines body.
pub fn json_lines<T: Serialize>(rows: &[T]) -> String {
    let mut s = String::new();
    for r in rows {
        s.push_str(&to_line(r));
        s.push('\n');
    }
    s
}

/// JSON array with one element per line.
pub fn json_array<T: Serialize>(rows: &[T]) -> String {
    if rows.is_empty() {
        return "[]\n".into();
    }
    let body: Vec<String> = rows.iter().map(|r| format!("  {}", to_line(r))).collect();
    format!("[\n{}\n]\n", body.join(",\n"))
}

pub fn write(path: &Path, content: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    fs::write(path, content).map_err(|e| CliError::io(path, e))
}

pub fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = json!({"a": 0.1, "b": -3.0571418389619964, "n": 24, "x": f64::NAN});
        let s = to_line(&v);
        assert_eq!(s, r#"{"a":1.0000000000000001e-1,"b":-3.0571418389619964e0,"n":24,"x":null}"#);
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert_eq!(back["b"].as_f64(), Some(-3.0571418389619964));
    }

    #[test]
    fn array_layout() {
        assert_eq!(json_array::<u8>(&[]), "[]\n");
        assert_eq!(json_array(&[1, 2]), "[\n  1,\n  2\n]\n");
        assert_eq!(json_lines(&[json!({"k": 1.5})]), "{\"k\":1.5000000000000000e0}\n");
    }
}
