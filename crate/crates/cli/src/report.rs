//! The JSON report every command writes.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TOOL_NAME: &str = "iboss";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolStamp {
    pub name: String,
    pub version: String,
    pub git: String,
}

impl ToolStamp {
    pub fn current() -> Self {
        Self {
            name: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            git: env!("IBOSS_GIT_REV").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_seconds: f64,
    /// High-water resident set size, where the platform reports it.
    pub peak_rss_bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: ToolStamp,
    /// Arguments as given, program name first.
    pub command: Vec<String>,
    /// Effective settings after defaults were filled in.
    pub config: Value,
    pub seed: Option<u64>,
    pub results: Value,
    pub timing: Timing,
}

impl Report {
    pub fn new(command: Vec<String>, config: Value, seed: Option<u64>, results: Value, started: Instant) -> Self {
        Self {
            tool: ToolStamp::current(),
            command,
            config,
            seed,
            results,
            timing: Timing {
                elapsed_seconds: started.elapsed().as_secs_f64(),
                peak_rss_bytes: peak_rss_bytes(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// `VmHWM` from `/proc/self/status`.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_shape() {
        let r = Report::new(
            vec!["iboss".into(), "fit".into()],
            serde_json::json!({"k": 10}),
            Some(3),
            serde_json::json!({}),
            Instant::now(),
        );
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["tool", "command", "config", "seed", "results", "timing"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["tool"]["name"], "iboss");
    }
}
