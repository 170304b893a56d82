use std::path::Path;

use super::AgentKind;
use crate::error::{Error, Result};

pub const FILE: &str = "manifest.txt";

/// Small key/value file stored next to an agent's network files.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub kind: AgentKind,
    pub gamma: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub episode: u64,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        format!(
            "kind = {}\ngamma = {}\ntau = {}\nepsilon = {}\nepisode = {}\n",
            self.kind, self.gamma, self.tau, self.epsilon, self.episode
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut kind, mut gamma, mut tau, mut epsilon, mut episode) = (None, None, None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("expected `key = value`, got `{l}`")))?;
            let v = v.trim();
            let num = |v: &str| v.parse::<f64>().map_err(|_| Error::parse(line, format!("bad number `{v}`")));
            match k.trim() {
                "kind" => kind = Some(v.parse::<AgentKind>().map_err(|e| Error::parse(line, e.to_string()))?),
                "gamma" => gamma = Some(num(v)?),
                "tau" => tau = Some(num(v)?),
                "epsilon" => epsilon = Some(num(v)?),
                "episode" => {
                    episode = Some(v.parse().map_err(|_| Error::parse(line, format!("bad episode `{v}`")))?)
                }
                other => return Err(Error::parse(line, format!("unknown manifest key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::parse(text.lines().count(), format!("manifest is missing `{k}`"));
        Ok(Self {
            kind: kind.ok_or_else(|| missing("kind"))?,
            gamma: gamma.ok_or_else(|| missing("gamma"))?,
            tau: tau.ok_or_else(|| missing("tau"))?,
            epsilon: epsilon.ok_or_else(|| missing("epsilon"))?,
            episode: episode.ok_or_else(|| missing("episode"))?,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(FILE), self.to_text())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
