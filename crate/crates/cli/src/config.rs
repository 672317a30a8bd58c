use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::Value;

/// Turns the section of `file` for `subcommand` into flags. `{"in": "a",
/// "no_exact": true, "hidden": [50, 50]}` becomes `--in a --no-exact
/// --hidden 50,50`; false booleans and nulls are dropped.
pub fn flags_from_file(file: &Path, subcommand: &str) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let root: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
    let Value::Object(sections) = root else {
        bail!("{}: expected a JSON object of subcommand sections", file.display());
    };
    let Some(section) = sections.get(subcommand) else {
        return Ok(Vec::new());
    };
    let Value::Object(flags) = section else {
        bail!("{}: section {subcommand:?} must be an object", file.display());
    };
    let mut out = Vec::new();
    for (key, value) in flags {
        let flag = format!("--{}", key.replace('_', "-"));
        let text = match value {
            Value::Bool(true) => {
                out.push(flag.into());
                continue;
            }
            Value::Bool(false) | Value::Null => continue,
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            Value::Object(_) => bail!("{}: {subcommand}.{key} cannot be an object", file.display()),
        };
        out.push(flag.into());
        out.push(text.into());
    }
    Ok(out)
}

/// Finds the `--config` file and the subcommand in raw arguments, ahead of
/// clap, so that the file can supply required flags.
pub fn locate(argv: &[OsString], subcommands: &[String]) -> Option<(PathBuf, String)> {
    let mut path = None;
    let mut name = None;
    let mut args = argv.iter().skip(1);
    while let Some(arg) = args.next() {
        let text = arg.to_string_lossy();
        if text == "--" {
            break;
        } else if text == "--config" {
            path = args.next().map(PathBuf::from);
        } else if let Some(p) = text.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else if name.is_none() && subcommands.iter().any(|s| *s == text) {
            name = Some(text.into_owned());
        }
    }
    Some((path?, name?))
}

/// Inserts `extra` right after the subcommand name so that flags typed on
/// the command line, which come later, override them.
pub fn splice(argv: &[OsString], subcommand: &str, extra: Vec<OsString>) -> Vec<OsString> {
    let at = argv
        .iter()
        .position(|a| a == subcommand)
        .map_or(argv.len(), |p| p + 1);
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    out
}
