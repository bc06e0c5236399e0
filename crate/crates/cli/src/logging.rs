//! Diagnostics on stderr, gated by `BCDM_LOG=quiet|info|debug`
//! (default `info`). Result data never goes through here.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Quiet,
    Info,
    Debug,
}

fn level() -> Level {
    static LEVEL: OnceLock<Level> = OnceLock::new();
    *LEVEL.get_or_init(|| match std::env::var("BCDM_LOG").as_deref() {
        Ok("quiet") => Level::Quiet,
        Ok("debug") => Level::Debug,
        _ => Level::Info,
    })
}

pub fn info(msg: impl AsRef<str>) {
    if level() >= Level::Info {
        eprintln!("{}", msg.as_ref());
    }
}

pub fn debug(msg: impl AsRef<str>) {
    if level() >= Level::Debug {
        eprintln!("{}", msg.as_ref());
    }
}
