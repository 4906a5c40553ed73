//! `--config file.json` support.
//!
//! The file holds one flat object whose keys are flag names (`take_cols` and
//! `take-cols` both work). Its entries are turned into flags and placed ahead
//! of the ones typed on the command line, so explicit flags override them.
//! An optional `"command"` key names the subcommand when none is given.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};

const SUBCOMMANDS: [&str; 5] = ["generate", "run", "sweep", "hardcase", "ratio-sim"];
const GLOBAL_KEYS: [&str; 3] = ["seed", "out", "jobs"];

pub fn splice(mut argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = take_config_flag(&mut argv)? else {
        return Ok(argv);
    };
    let map = load(Path::new(&path))?;

    let mut sub_pos = argv
        .iter()
        .skip(1)
        .position(|a| a.to_str().is_some_and(|s| SUBCOMMANDS.contains(&s)))
        .map(|p| p + 1);
    if sub_pos.is_none() {
        if let Some(Value::String(cmd)) = map.get("command") {
            if !SUBCOMMANDS.contains(&cmd.as_str()) {
                bail!("config names unknown command `{cmd}`");
            }
            argv.insert(1, OsString::from(cmd));
            sub_pos = Some(1);
        }
    }

    let mut globals = Vec::new();
    let mut locals = Vec::new();
    for (key, value) in &map {
        if key == "command" {
            continue;
        }
        let flag = key.replace('_', "-");
        let rendered = render(&flag, value)?;
        if GLOBAL_KEYS.contains(&flag.as_str()) {
            globals.extend(rendered);
        } else {
            locals.extend(rendered);
        }
    }

    // globals go right after the program name, locals right after the
    // subcommand; both land before anything the user typed in that position
    let at = sub_pos.map_or(argv.len(), |p| p + 1);
    argv.splice(at..at, locals.into_iter().map(OsString::from));
    argv.splice(1..1, globals.into_iter().map(OsString::from));
    Ok(argv)
}

fn take_config_flag(argv: &mut Vec<OsString>) -> Result<Option<OsString>> {
    let mut i = 1;
    while i < argv.len() {
        let Some(arg) = argv[i].to_str() else {
            i += 1;
            continue;
        };
        if arg == "--" {
            break;
        }
        if arg == "--config" {
            if i + 1 >= argv.len() {
                bail!("--config needs a path");
            }
            let path = argv.remove(i + 1);
            argv.remove(i);
            return Ok(Some(path));
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            let path = OsString::from(path);
            argv.remove(i);
            return Ok(Some(path));
        }
        i += 1;
    }
    Ok(None)
}

fn load(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))? {
        Value::Object(map) => Ok(map),
        _ => bail!("config {} must hold a JSON object", path.display()),
    }
}

fn scalar(flag: &str, value: &Value) -> Result<String> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => bail!("config key `{flag}` must be a scalar or a list of scalars"),
    }
}

fn render(flag: &str, value: &Value) -> Result<Vec<String>> {
    Ok(match value {
        Value::Null | Value::Bool(false) => Vec::new(),
        Value::Bool(true) => vec![format!("--{flag}")],
        Value::Array(items) => {
            if items.is_empty() {
                return Ok(Vec::new());
            }
            let parts = items
                .iter()
                .map(|v| scalar(flag, v))
                .collect::<Result<Vec<_>>>()?;
            vec![format!("--{flag}"), parts.join(",")]
        }
        Value::Object(_) => bail!("config key `{flag}` must not be an object"),
        other => vec![format!("--{flag}"), scalar(flag, other)?],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn args(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    fn strings(v: Vec<OsString>) -> Vec<String> {
        v.into_iter().map(|s| s.into_string().unwrap()).collect()
    }

    #[test]
    fn untouched_without_config() {
        let a = args(&["ascd", "run", "--data", "x"]);
        assert_eq!(splice(a.clone()).unwrap(), a);
    }

    #[test]
    fn flags_are_placed_before_explicit_ones() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"seed": 4, "rule": "ucd", "timing": true, "seeds": [1, 2]}}"#).unwrap();
        let path = file.path().to_str().unwrap();
        let out = strings(splice(args(&["ascd", "--seed", "9", "sweep", "--config", path, "--rule", "scd"])).unwrap());
        assert_eq!(
            out,
            vec![
                "ascd", "--seed", "4", "--seed", "9", "sweep", "--rule", "ucd", "--seeds", "1,2", "--timing",
                "--rule", "scd"
            ]
        );
    }

    #[test]
    fn command_key_fills_in_subcommand() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"command": "hardcase", "n": 12}}"#).unwrap();
        let flag = format!("--config={}", file.path().display());
        let out = strings(splice(args(&["ascd", &flag])).unwrap());
        assert_eq!(out, vec!["ascd", "hardcase", "--n", "12"]);
    }

    #[test]
    fn rejects_nested_objects() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"rule": {{"a": 1}}}}"#).unwrap();
        let path = file.path().to_str().unwrap();
        assert!(splice(args(&["ascd", "run", "--config", path])).is_err());
    }
}
