use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgMatches, Command};

const GLOBAL_WITH_VALUE: [&str; 2] = ["--threads", "--config"];

/// Parses a flat `key=value` file. Blank lines and `#` comments are skipped.
pub fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!(
                "{}:{}: expected key=value, found `{line}`",
                path.display(),
                i + 1
            );
        };
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

/// Index of the subcommand token in `argv`, skipping global flags.
fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if GLOBAL_WITH_VALUE.contains(&a.as_ref()) {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Splices config entries in as flags right after the subcommand; explicit
/// flags come later and override them. Keys must name a flag of the chosen
/// subcommand.
pub fn expand_config(cmd: &Command, argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let entries = read_config(Path::new(&path))?;
    let Some(at) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let name = argv[at].to_string_lossy().to_string();
    let Some(sub) = cmd.find_subcommand(&name) else {
        return Ok(argv);
    };
    let mut injected = Vec::new();
    for (key, value) in entries {
        let Some(arg) = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
        else {
            bail!("unknown config key `{key}` for `{name}`");
        };
        let is_flag = matches!(arg.get_action(), clap::ArgAction::SetTrue);
        if is_flag {
            match value.as_str() {
                "true" | "1" | "yes" => injected.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                other => bail!("config key `{key}` expects true/false, found `{other}`"),
            }
        } else {
            injected.push(format!("--{key}").into());
            injected.push(value.into());
        }
    }
    let mut out = argv[..=at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[at + 1..]);
    Ok(out)
}

/// `key=value` lines of every argument of the chosen subcommand, defaults included.
pub fn resolved(cmd: &Command, matches: &ArgMatches) -> Vec<String> {
    fn push(cmd: &Command, m: &ArgMatches, skip_global: bool, lines: &mut Vec<String>) {
        for arg in cmd.get_arguments() {
            let (Some(long), id) = (arg.get_long(), arg.get_id().as_str()) else {
                continue;
            };
            if skip_global && arg.is_global_set() {
                continue;
            }
            let Ok(Some(vals)) = m.try_get_raw(id) else {
                continue;
            };
            let vals: Vec<String> = vals.map(|s| s.to_string_lossy().into_owned()).collect();
            lines.push(format!("{long}={}", vals.join(",")));
        }
    }
    let mut lines = Vec::new();
    if let Some((name, sub_m)) = matches.subcommand() {
        lines.push(format!("command={name}"));
        if let Some(sub) = cmd.find_subcommand(name) {
            push(sub, sub_m, true, &mut lines);
        }
    }
    push(cmd, matches, false, &mut lines);
    lines
}
