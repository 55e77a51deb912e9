//! Flag parsing and layered config resolution.
//!
//! Every settable value is a config key; the flag spelling is the key
//! itself (`--train.lr 0.001`). Values resolve as defaults, then
//! `--config` file, then `DOCMT_*` environment, then flags, later layers
//! winning. Unknown flags are usage errors. A flag whose key holds a
//! boolean may omit its value, which reads as `true`.

use std::collections::BTreeMap;
use std::path::Path;

use docmt::config_file::{env_key, Resolved, Source, ENV_PREFIX};

/// Usage errors exit 2 with usage text; runtime errors exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<docmt::Error> for CliError {
    fn from(e: docmt::Error) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Maps config-phase errors (bad values, bad combinations) to usage.
pub fn usage_err(e: docmt::Error) -> CliError {
    CliError::Usage(e.to_string())
}

pub struct CmdSpec {
    pub name: &'static str,
    pub about: &'static str,
    /// (key, default); an empty default with the key listed in
    /// `required` means the caller must supply it.
    pub keys: Vec<(&'static str, &'static str)>,
    pub required: &'static [&'static str],
}

impl CmdSpec {
    fn default_of(&self, key: &str) -> Option<&'static str> {
        self.keys.iter().find(|(k, _)| *k == key).map(|(_, d)| *d)
    }

    fn is_bool(&self, key: &str) -> bool {
        matches!(self.default_of(key), Some("true") | Some("false"))
    }

    pub fn usage(&self) -> String {
        let mut out = format!(
            "usage: docmt {} [--config PATH] [--KEY VALUE]...\n{}\n\nkeys (flag > env > file > default; env prefix {}):\n",
            self.name, self.about, ENV_PREFIX
        );
        let width = self.keys.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (key, default) in &self.keys {
            let note = if self.required.contains(key) {
                "(required)".to_string()
            } else if default.is_empty() {
                "(optional)".to_string()
            } else {
                format!("[{default}]")
            };
            out.push_str(&format!("  --{key:<width$}  {note}\n"));
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct Invocation {
    pub config_path: Option<String>,
    pub flags: Vec<(String, String)>,
    pub help: bool,
}

pub fn parse_args(spec: &CmdSpec, args: &[String]) -> CliResult<Invocation> {
    let mut inv = Invocation::default();
    let mut it = args.iter().peekable();
    while let Some(arg) = it.next() {
        if arg == "--help" || arg == "-h" {
            inv.help = true;
            continue;
        }
        let Some(body) = arg.strip_prefix("--") else {
            return Err(CliError::Usage(format!("unexpected argument {arg:?}")));
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k, Some(v.to_string())),
            None => (body, None),
        };
        if key == "config" {
            let value = match inline {
                Some(v) => v,
                None => match it.next() {
                    Some(v) => v.clone(),
                    None => return Err(CliError::Usage("--config needs a path".into())),
                },
            };
            inv.config_path = Some(value);
            continue;
        }
        if spec.default_of(key).is_none() {
            return Err(CliError::Usage(format!("unknown flag --{key}")));
        }
        let value = match inline {
            Some(v) => v,
            None => match it.peek() {
                Some(v) if !v.starts_with("--") => it.next().unwrap().clone(),
                _ if spec.is_bool(key) => "true".to_string(),
                _ => return Err(CliError::Usage(format!("flag --{key} needs a value"))),
            },
        };
        inv.flags.push((key.to_string(), value));
    }
    Ok(inv)
}

/// Defaults, then config file, then `prefix` environment variables, then
/// flags. Environment variables that do not spell a key of this command
/// are left alone so unrelated subcommands can share one environment.
pub fn resolve_with_prefix(
    spec: &CmdSpec,
    inv: &Invocation,
    prefix: &str,
) -> CliResult<Resolved> {
    let mut r = Resolved::from_defaults(&spec.keys);
    if let Some(path) = &inv.config_path {
        r.apply_file(Path::new(path)).map_err(usage_err)?;
    }
    for (key, _) in &spec.keys {
        if let Ok(value) = std::env::var(env_key(prefix, key)) {
            r.set(key, &value, Source::Env).map_err(usage_err)?;
        }
    }
    for (key, value) in &inv.flags {
        r.set(key, value, Source::Flag).map_err(usage_err)?;
    }
    for key in spec.required {
        if r.get(key).map_err(usage_err)?.is_empty() {
            return Err(CliError::Usage(format!("missing required --{key}")));
        }
    }
    Ok(r)
}

pub fn resolve(spec: &CmdSpec, inv: &Invocation) -> CliResult<Resolved> {
    resolve_with_prefix(spec, inv, ENV_PREFIX)
}

/// Typed accessors that turn malformed values into usage errors.
pub struct Cfg<'a>(pub &'a Resolved);

impl Cfg<'_> {
    pub fn str(&self, key: &str) -> CliResult<&str> {
        self.0.get(key).map_err(usage_err)
    }

    pub fn f64(&self, key: &str) -> CliResult<f64> {
        self.0.get_f64(key).map_err(usage_err)
    }

    pub fn usize(&self, key: &str) -> CliResult<usize> {
        self.0.get_usize(key).map_err(usage_err)
    }

    pub fn u64(&self, key: &str) -> CliResult<u64> {
        self.0.get_u64(key).map_err(usage_err)
    }

    pub fn bool(&self, key: &str) -> CliResult<bool> {
        self.0.get_bool(key).map_err(usage_err)
    }
}

/// Startup echo of the full resolved configuration, one parseable
/// `key = value` line each, sorted by key.
pub fn print_config(name: &str, entries: &BTreeMap<String, String>) {
    println!("[{name} config]");
    for (k, v) in entries {
        println!("{k} = {v}");
    }
    println!();
}

/// The resolved table as the starting point for the echo; commands merge
/// derived values (checkpoint architecture, vocabulary size) on top.
pub fn echo_map(r: &Resolved) -> BTreeMap<String, String> {
    r.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect()
}
