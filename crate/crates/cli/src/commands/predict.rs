use std::path::PathBuf;

use anyhow::{anyhow, Result};
use benchembed::EmbeddingSpace;
use clap::Args;

use super::Sidecar;
use crate::util::{nearest_labels, read_to_string, sibling};

#[derive(Args)]
pub struct PredictArgs {
    /// Embedding JSON (output of the embed command)
    #[arg(long)]
    pub embedding: PathBuf,
    /// Model display label
    #[arg(long)]
    pub model: String,
    /// Task label, e.g. 'Potsdam@100%/mF1'
    #[arg(long)]
    pub task: String,
    /// Also denormalize the gap into raw metric units
    #[arg(long)]
    pub raw: bool,
}

pub fn run(args: PredictArgs) -> Result<()> {
    let space = EmbeddingSpace::from_json(&read_to_string(&args.embedding)?)?;
    let model_point = space
        .model_point(&args.model)
        .ok_or_else(|| unknown_label("model", &args.model, space.model_points().keys()))?;
    let task_point = space
        .task_point(&args.task)
        .ok_or_else(|| unknown_label("task", &args.task, space.task_points().keys()))?;

    let delta_hat = space.geometry().distance(model_point, task_point)?;
    println!("delta_hat {delta_hat}");

    if args.raw {
        let sidecar = Sidecar::load(&sibling(&args.embedding, "delta.json"))?;
        let stats = sidecar.tasks.get(&args.task).ok_or_else(|| {
            anyhow!("task '{}' missing from the gap-statistics sidecar", args.task)
        })?;
        let denorm = stats.denormalize(delta_hat, &args.task)?;
        if denorm.extrapolated {
            log::warn!(
                "predicted gap {delta_hat} lies outside [0, 1]; raw estimate extrapolates beyond observed results"
            );
        }
        println!("raw {}", denorm.value);
    }
    Ok(())
}

fn unknown_label<'a>(
    kind: &str,
    label: &str,
    known: impl Iterator<Item = &'a String>,
) -> anyhow::Error {
    let nearest = nearest_labels(label, known);
    if nearest.is_empty() {
        anyhow!("unknown {kind} label '{label}' (embedding has no {kind} points)")
    } else {
        anyhow!("unknown {kind} label '{label}'; nearest known: {}", nearest.join(", "))
    }
}
