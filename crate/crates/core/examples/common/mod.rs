#![allow(dead_code)]

use std::path::PathBuf;

use hzd_gaits::config::Config;
use hzd_gaits::pipeline::Pipeline;

/// Pipeline over the artifact directory given as the first argument, else
/// `HZD_GAITS_OUT`, else `./artifacts`. Configuration is read from
/// `HZD_GAITS_CONFIG` when set.
pub fn pipeline() -> hzd_gaits::Result<Pipeline> {
    let dir = std::env::args()
        .nth(1)
        .or_else(|| std::env::var("HZD_GAITS_OUT").ok())
        .map_or_else(|| PathBuf::from("artifacts"), PathBuf::from);
    Pipeline::new(Config::resolve(None)?, dir)
}

/// Positional argument `i` (after the directory) parsed as a speed.
pub fn speed_arg(i: usize, default: f64) -> f64 {
    std::env::args().nth(i + 1).and_then(|s| s.parse().ok()).unwrap_or(default)
}

pub fn exit_on_error(r: hzd_gaits::Result<()>) {
    if let Err(e) = r {
        eprintln!("{}", e.to_json());
        std::process::exit(1);
    }
}
