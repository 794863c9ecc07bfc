//! Flat `key=value` config files.
//!
//! Each key names a long flag of the selected subcommand. Entries are spliced
//! into the argument list directly after the subcommand, so explicit flags,
//! which come later, override them.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, CommandFactory};

use crate::args::Cli;
use crate::{CliError, CliResult};

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::usage(format!("config line {}: empty key", n + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(argv: &[OsString]) -> Option<(usize, OsString)> {
    for (i, a) in argv.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return argv.get(i + 1).map(|p| (i, p.clone()));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some((i, p.into()));
        }
    }
    None
}

/// Position of the subcommand token.
fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if s == "--config" || s == "--threads" {
            i += 2;
            continue;
        }
        if !s.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Expands `--config` into explicit flags.
pub fn expand(argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some((_, path)) = config_path(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("config {}: {e}", path.display())))?;
    let entries = parse(&text)?;
    let Some(at) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let name = argv[at].to_string_lossy().to_string();
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&name) else {
        return Ok(argv);
    };
    let injected = inject(&entries, &sub.get_arguments().chain(root.get_arguments()).collect::<Vec<_>>())?;
    let mut out = argv[..=at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[at + 1..]);
    Ok(out)
}

fn inject(entries: &[(String, String)], args: &[&clap::Arg]) -> CliResult<Vec<OsString>> {
    let mut out = Vec::new();
    for (k, v) in entries {
        if k == "config" {
            return Err(CliError::usage("config files cannot include other config files"));
        }
        let arg = args
            .iter()
            .find(|a| a.get_long() == Some(k.as_str()))
            .ok_or_else(|| CliError::usage(format!("unknown config key `{k}`")))?;
        match arg.get_action() {
            ArgAction::SetTrue => match v.as_str() {
                "true" | "1" | "yes" => out.push(format!("--{k}").into()),
                "false" | "0" | "no" => {}
                _ => return Err(CliError::usage(format!("config key `{k}` expects true or false, got `{v}`"))),
            },
            _ => {
                out.push(format!("--{k}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(|s| s.into()).collect()
    }

    #[test]
    fn parse_lines() {
        let e = parse("# c\nrank = 4\n\nalgorithm=roi\n").unwrap();
        assert_eq!(e, vec![("rank".into(), "4".into()), ("algorithm".into(), "roi".into())]);
        assert!(parse("novalue\n").is_err());
        assert!(parse("=3\n").is_err());
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("fit.cfg");
        std::fs::write(&cfg, "rank=3\nalgorithm=roi\nrandomized-svd=true\ndata=x.pdmd\n").unwrap();
        let argv = os(&["pdmd", "--config", cfg.to_str().unwrap(), "fit", "--rank", "5", "-o", "m"]);
        let cli = Cli::try_parse_from(expand(argv).unwrap()).unwrap();
        let crate::args::Command::Fit(f) = cli.command else { panic!() };
        assert_eq!(f.rank, Some(5));
        assert!(f.randomized_svd);
        assert_eq!(f.data, std::path::PathBuf::from("x.pdmd"));
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.cfg");
        std::fs::write(&cfg, "rnak=3\n").unwrap();
        let argv = os(&["pdmd", "fit", "--config", cfg.to_str().unwrap()]);
        let e = expand(argv).unwrap_err();
        assert_eq!(e.code, crate::exit::USAGE);
        assert!(e.message.contains("rnak"));
    }
}
