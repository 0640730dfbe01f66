//! Turning flags into a gateway, a dataset, configs and prompts.

use std::cell::RefCell;
use std::path::Path;
use std::sync::Arc;

use promptopt_core::engine::OptimizationConfig;
use promptopt_core::gateway::{
    LlmGateway, Provider, ProviderConfig, RecordingProvider, ReplayProvider, Role, RoleConfig,
};
use promptopt_core::optimizer::AblationFlags;
use promptopt_core::store::{load_dataset, DatasetSplits, LoadOptions};
use promptopt_core::templates::TaskKind;

use crate::failure::Failure;
use crate::{Ablation, DataArgs, ProviderArgs};

/// With neither `--providers` nor `--replay` the gateway has no routes, so
/// only commands that make no model calls succeed.
pub fn gateway(args: &ProviderArgs, required: bool) -> Result<LlmGateway, Failure> {
    let config = args.providers.as_deref().map(ProviderConfig::load).transpose()?;
    if let Some(path) = &args.replay {
        let replay: Arc<dyn Provider> = Arc::new(ReplayProvider::from_jsonl(path)?);
        let mut b = LlmGateway::builder();
        for role in Role::ALL {
            let rc = match &config {
                Some(c) => c.role_config(role),
                None => RoleConfig::new(role, "replay"),
            };
            b = b.route(rc, replay.clone());
        }
        if let Some(c) = &config {
            b = b.parallelism(c.parallelism);
        }
        return Ok(b.build());
    }
    match config {
        Some(c) => {
            let record = args.record.clone();
            let failed = RefCell::new(None);
            let b = c.gateway_builder(|live| match &record {
                None => live,
                Some(path) => match RecordingProvider::new(live.clone(), path) {
                    Ok(r) => Arc::new(r),
                    Err(e) => {
                        *failed.borrow_mut() = Some(Failure::data(format!("cannot open {}: {e}", path.display())));
                        live
                    }
                },
            });
            if let Some(f) = failed.into_inner() {
                return Err(f);
            }
            Ok(b.build())
        }
        None if required => Err(Failure::config("pass --providers for live calls or --replay for a replay file")),
        None => Ok(LlmGateway::builder().build()),
    }
}

pub fn dataset(args: &DataArgs, kind: TaskKind, seed: u64) -> Result<DatasetSplits, Failure> {
    let opts = LoadOptions {
        train_size: args.train_size,
        dev_size: args.dev_size,
        test_size: args.test_size,
        max_contexts: args.max_contexts,
        seed,
    };
    Ok(load_dataset(&args.dataset, kind, &opts)?)
}

pub fn read_text(path: &Path, what: &str) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::data(format!("cannot read {what} {}: {e}", path.display())))
}

pub fn config(path: Option<&Path>) -> Result<OptimizationConfig, Failure> {
    match path {
        None => Ok(OptimizationConfig::default()),
        Some(p) => {
            let text = read_text(p, "config")?;
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))
        }
    }
}

pub fn apply_flags(flags: &mut AblationFlags, opro: bool, ablate: &[Ablation]) {
    if opro {
        *flags = AblationFlags::opro();
    }
    for a in ablate {
        match a {
            Ablation::NoCritique => flags.use_critique = false,
            Ablation::NoCot => flags.use_cot = false,
            Ablation::NoFlexible => flags.use_flexible_template = false,
        }
    }
}
