//! `key = value` config files merged into the argument list.
//!
//! File entries become flags placed directly after the subcommand, so any flag
//! given on the command line appears later and overrides them.

use std::ffi::OsString;
use std::path::Path;

pub const COMMANDS: [&str; 5] = ["gaps", "orbit", "mc-tail", "closed-form", "difftest"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile, String> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
        let k = k.trim().replace('_', "-");
        if k.is_empty() {
            return Err(format!("config line {}: empty key", i + 1));
        }
        entries.push((k, v.trim().to_string()));
    }
    Ok(ConfigFile { entries })
}

pub fn load_config(path: &Path) -> Result<ConfigFile, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse_config(&text)
}

/// Removes `--config` from `args` and splices the file's entries in as flags.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => path = Some(it.next().ok_or("--config needs a path")?),
            Some(s) if s.starts_with("--config=") => path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(a),
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let cfg = load_config(Path::new(&path))?;
    let mut command = None;
    let mut flags = Vec::new();
    for (k, v) in cfg.entries {
        if k == "command" {
            command = Some(v);
            continue;
        }
        match v.as_str() {
            "true" => flags.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => {
                flags.push(OsString::from(format!("--{k}")));
                flags.push(OsString::from(v));
            }
        }
    }
    let pos = rest.iter().position(|a| a.to_str().is_some_and(|s| COMMANDS.contains(&s)));
    let at = match (pos, command) {
        (Some(p), _) => p + 1,
        (None, Some(c)) => {
            let at = 1.min(rest.len());
            rest.insert(at, OsString::from(c));
            at + 1
        }
        (None, None) => return Err("no subcommand on the command line or in the config file".into()),
    };
    rest.splice(at..at, flags);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_comments_and_blanks() {
        let c = parse_config("# run\nseed = 7\n\nworkers=2 # inline\n").unwrap();
        assert_eq!(c.entries, vec![("seed".into(), "7".into()), ("workers".into(), "2".into())]);
        assert!(parse_config("seed 7").is_err());
    }

    #[test]
    fn flags_follow_file_entries() {
        let dir = std::env::temp_dir().join(format!("slopegap-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("run.conf");
        std::fs::write(&p, "command = mc-tail\nseed = 7\nplot = true\nquiet = false\n").unwrap();
        let out = expand_args(os(&["slopegap", "--config", p.to_str().unwrap(), "--seed", "9"])).unwrap();
        assert_eq!(out, os(&["slopegap", "mc-tail", "--seed", "7", "--plot", "--seed", "9"]));
        let out = expand_args(os(&["slopegap", "gaps", &format!("--config={}", p.display())])).unwrap();
        assert_eq!(out, os(&["slopegap", "gaps", "--seed", "7", "--plot"]));
    }
}
