//! Reproducibility headers: every output starts with the tool version, the
//! exact command line, and the fully resolved parameter set.

use std::fmt::Display;

pub struct Resolved {
    pairs: Vec<(String, String)>,
}

impl Resolved {
    pub fn new() -> Self {
        Self { pairs: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: impl Display) -> Self {
        self.pairs.push((key.to_string(), value.to_string()));
        self
    }

    pub fn header(&self) -> Vec<String> {
        let argv: Vec<String> = std::env::args().collect();
        let resolved = self
            .pairs
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        vec![
            format!("spintree v{}", env!("CARGO_PKG_VERSION")),
            format!("command: {}", argv.join(" ")),
            format!("resolved: {resolved}"),
        ]
    }
}
