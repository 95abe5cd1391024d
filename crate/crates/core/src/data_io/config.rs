//! `key=value` configuration files.
//!
//! Blank lines and `#` comments are skipped. Flags given as `key=value`
//! override the file, and `PAGAN_SEED` overrides `seed` from the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::objectives::{AlphaMode, FDivergenceSpec, GameKind, DEFAULT_GP_LAMBDA};
use crate::trainer::{DatasetId, OptimizerKind, TrainConfig};

const KEYS: &[&str] = &[
    "batch_size",
    "steps",
    "optimizer",
    "lr",
    "beta1",
    "beta2",
    "critic_steps",
    "game",
    "fdiv",
    "gp_lambda",
    "gp_alpha",
    "pad_fraction",
    "latent_dim",
    "dataset",
    "seed",
    "checkpoint_every",
    "eval_every",
    "hidden",
    "latent_hidden",
    "base_channels",
    "spectral_norm",
    "sn_iters",
    "ring_modes",
    "ring_radius",
    "ring_std",
    "ring_samples",
    "mnist_images",
    "mnist_labels",
    "subset",
    "shapes_count",
    "shapes_side",
    "probe_steps",
];

fn split_line(line: &str) -> Result<(String, String)> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::config(line.trim(), "expected `key=value`"))?;
    let key = k.trim().to_string();
    if !KEYS.contains(&key.as_str()) {
        return Err(Error::config(key, "unknown key"));
    }
    Ok((key, v.trim().to_string()))
}

fn parse_lines(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = split_line(line)?;
        map.insert(k, v);
    }
    Ok(map)
}

/// `key=value` flags as pairs.
pub fn parse_overrides(flags: &[String]) -> Result<Vec<(String, String)>> {
    flags.iter().map(|f| split_line(f)).collect()
}

/// Parses config text; keys not given keep their defaults.
pub fn parse_config_str(text: &str) -> Result<TrainConfig> {
    build(parse_lines(text)?)
}

/// Reads `path` (if any), applies `PAGAN_SEED`, then the flags.
pub fn parse_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<TrainConfig> {
    let mut map = match path {
        Some(p) => parse_lines(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => BTreeMap::new(),
    };
    if let Ok(seed) = std::env::var("PAGAN_SEED") {
        map.insert("seed".into(), seed);
    }
    for (k, v) in overrides {
        map.insert(k.clone(), v.clone());
    }
    build(map)
}

fn value<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
        })
        .transpose()
}

fn set<T: FromStr>(map: &BTreeMap<String, String>, key: &str, slot: &mut T) -> Result<()> {
    if let Some(v) = value(map, key)? {
        *slot = v;
    }
    Ok(())
}

fn build(map: BTreeMap<String, String>) -> Result<TrainConfig> {
    let mut c = TrainConfig::default();
    set(&map, "batch_size", &mut c.batch_size)?;
    set(&map, "steps", &mut c.steps)?;
    if let Some(name) = map.get("optimizer") {
        c.optimizer.kind =
            OptimizerKind::from_name(name).ok_or_else(|| Error::config("optimizer", format!("unknown optimizer `{name}`")))?;
    }
    set(&map, "lr", &mut c.optimizer.lr)?;
    set(&map, "beta1", &mut c.optimizer.beta1)?;
    set(&map, "beta2", &mut c.optimizer.beta2)?;

    let game_name = map.get("game").map(String::as_str).unwrap_or("nonsaturating");
    let only_for = |key: &str, game: &str| -> Result<()> {
        if map.contains_key(key) && game_name != game {
            return Err(Error::config(key, format!("only applies to game={game}")));
        }
        Ok(())
    };
    only_for("fdiv", "fgan")?;
    only_for("gp_lambda", "wasserstein")?;
    only_for("gp_alpha", "wasserstein")?;
    c.game = match game_name {
        "nonsaturating" => GameKind::NonSaturating,
        "standard" => GameKind::StandardMinimax,
        "fgan" => {
            let name = map.get("fdiv").map(String::as_str).unwrap_or("js");
            GameKind::FDivergence(FDivergenceSpec::from_name(name).map_err(|e| Error::config("fdiv", e.to_string()))?)
        }
        "wasserstein" => {
            let lambda = value(&map, "gp_lambda")?.unwrap_or(DEFAULT_GP_LAMBDA);
            let alpha = match map.get("gp_alpha") {
                Some(a) => AlphaMode::from_name(a).map_err(|e| Error::config("gp_alpha", e.to_string()))?,
                None => AlphaMode::Shared,
            };
            GameKind::WassersteinGp { lambda, alpha }
        }
        other => return Err(Error::config("game", format!("unknown game `{other}`"))),
    };
    c.critic_steps = value(&map, "critic_steps")?.unwrap_or_else(|| c.game.default_critic_steps());

    if let Some(f) = value::<f64>(&map, "pad_fraction")? {
        c.augment = AugmentConfig {
            pad_fraction: f,
            ..AugmentConfig::default()
        };
    }
    set(&map, "latent_dim", &mut c.latent_dim)?;
    if let Some(name) = map.get("dataset") {
        c.dataset = DatasetId::from_name(name).ok_or_else(|| Error::config("dataset", format!("unknown dataset `{name}`")))?;
    }
    set(&map, "seed", &mut c.seed)?;
    set(&map, "checkpoint_every", &mut c.checkpoint_every)?;
    set(&map, "eval_every", &mut c.eval_every)?;
    set(&map, "hidden", &mut c.hidden)?;
    if let Some(list) = map.get("latent_hidden") {
        c.latent_hidden = list
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::config("latent_hidden", format!("expected comma-separated widths, got `{list}`")))?;
    }
    set(&map, "base_channels", &mut c.base_channels)?;
    set(&map, "spectral_norm", &mut c.spectral_norm)?;
    set(&map, "sn_iters", &mut c.sn_iters)?;
    set(&map, "ring_modes", &mut c.ring.modes)?;
    set(&map, "ring_radius", &mut c.ring.radius)?;
    set(&map, "ring_std", &mut c.ring.std)?;
    set(&map, "ring_samples", &mut c.ring.samples)?;
    set::<PathBuf>(&map, "mnist_images", &mut c.mnist_images)?;
    set::<PathBuf>(&map, "mnist_labels", &mut c.mnist_labels)?;
    set(&map, "subset", &mut c.subset)?;
    set(&map, "shapes_count", &mut c.shapes_count)?;
    set(&map, "shapes_side", &mut c.shapes_side)?;
    set(&map, "probe_steps", &mut c.probe_steps)?;
    c.validate()?;
    Ok(c)
}

impl TrainConfig {
    /// Every key, one `key=value` per line; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("batch_size", self.batch_size.to_string());
        kv("steps", self.steps.to_string());
        kv("optimizer", self.optimizer.kind.name().into());
        kv("lr", self.optimizer.lr.to_string());
        kv("beta1", self.optimizer.beta1.to_string());
        kv("beta2", self.optimizer.beta2.to_string());
        kv("critic_steps", self.critic_steps.to_string());
        match self.game {
            GameKind::NonSaturating => kv("game", "nonsaturating".into()),
            GameKind::StandardMinimax => kv("game", "standard".into()),
            GameKind::FDivergence(spec) => {
                kv("game", "fgan".into());
                kv("fdiv", spec.name().into());
            }
            GameKind::WassersteinGp { lambda, alpha } => {
                kv("game", "wasserstein".into());
                kv("gp_lambda", lambda.to_string());
                kv("gp_alpha", alpha.name().into());
            }
        }
        kv("pad_fraction", self.augment.pad_fraction.to_string());
        kv("latent_dim", self.latent_dim.to_string());
        kv("dataset", self.dataset.name().into());
        kv("seed", self.seed.to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        kv("eval_every", self.eval_every.to_string());
        kv("hidden", self.hidden.to_string());
        kv(
            "latent_hidden",
            self.latent_hidden.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","),
        );
        kv("base_channels", self.base_channels.to_string());
        kv("spectral_norm", self.spectral_norm.to_string());
        kv("sn_iters", self.sn_iters.to_string());
        kv("ring_modes", self.ring.modes.to_string());
        kv("ring_radius", self.ring.radius.to_string());
        kv("ring_std", self.ring.std.to_string());
        kv("ring_samples", self.ring.samples.to_string());
        kv("mnist_images", self.mnist_images.display().to_string());
        kv("mnist_labels", self.mnist_labels.display().to_string());
        kv("subset", self.subset.to_string());
        kv("shapes_count", self.shapes_count.to_string());
        kv("shapes_side", self.shapes_side.to_string());
        kv("probe_steps", self.probe_steps.to_string());
        s
    }
}
