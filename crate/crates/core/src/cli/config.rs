use std::ffi::OsString;
use std::fs;

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, CommandFactory, FromArgMatches};

use super::Cli;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// `key = value` lines; blank lines and lines starting with `#` are
/// skipped. Keys may use `_` or `-`.
pub fn parse_config_file(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key=value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Config(format!("config line {}: empty key", i + 1)));
        }
        out.push(ConfigEntry {
            line: i + 1,
            key,
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

pub(super) enum ParseFailure {
    Clap(clap::Error),
    Other(Error),
}

impl From<clap::Error> for ParseFailure {
    fn from(e: clap::Error) -> Self {
        ParseFailure::Clap(e)
    }
}

fn given_on_command_line(m: &ArgMatches, id: &str) -> bool {
    matches!(m.value_source(id), Some(ValueSource::CommandLine))
}

/// Parses the command line, then fills in every option it left unset from
/// the config file and, for the seed, from `FUSELAB_SEED`.
pub(super) fn parse_with_config(argv: &[OsString]) -> std::result::Result<Cli, ParseFailure> {
    let cmd = Cli::command();
    let matches = cmd.clone().try_get_matches_from(argv)?;
    let Some((sub_name, sub_matches)) = matches.subcommand() else {
        return Ok(Cli::from_arg_matches(&matches)?);
    };
    let mut extra: Vec<OsString> = Vec::new();
    if let Some(path) = sub_matches.get_one::<std::path::PathBuf>("config") {
        let text = fs::read_to_string(path).map_err(|e| ParseFailure::Other(Error::io(path, e)))?;
        let entries = parse_config_file(&text).map_err(ParseFailure::Other)?;
        let sub = cmd.find_subcommand(sub_name).expect("matched subcommand exists");
        for entry in entries {
            let arg = sub
                .get_arguments()
                .chain(cmd.get_arguments())
                .find(|a| a.get_long() == Some(entry.key.as_str()))
                .filter(|a| a.get_id() != "config")
                .ok_or_else(|| {
                    ParseFailure::Other(Error::Config(format!(
                        "config line {}: unknown key `{}` for `{sub_name}`",
                        entry.line, entry.key
                    )))
                })?;
            if given_on_command_line(sub_matches, arg.get_id().as_str()) {
                continue;
            }
            let flag = format!("--{}", entry.key);
            match arg.get_action() {
                ArgAction::SetTrue => match entry.value.as_str() {
                    "true" | "1" | "yes" => extra.push(flag.into()),
                    "false" | "0" | "no" => {}
                    v => {
                        return Err(ParseFailure::Other(Error::Config(format!(
                            "config line {}: `{}` expects true or false, got `{v}`",
                            entry.line, entry.key
                        ))))
                    }
                },
                _ => {
                    extra.push(flag.into());
                    extra.push(entry.value.into());
                }
            }
        }
    }
    let matches = if extra.is_empty() {
        matches
    } else {
        let mut full = argv.to_vec();
        full.extend(extra);
        cmd.try_get_matches_from(full)?
    };
    let mut cli = Cli::from_arg_matches(&matches)?;
    if cli.seed.is_none() {
        if let Ok(v) = std::env::var("FUSELAB_SEED") {
            let seed = v
                .trim()
                .parse()
                .map_err(|_| ParseFailure::Other(Error::Config(format!("FUSELAB_SEED `{v}` is not an unsigned integer"))))?;
            cli.seed = Some(seed);
        }
    }
    Ok(cli)
}
