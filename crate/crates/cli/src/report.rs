use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use crate::run::{RunSummary, Timing};

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directory written by `run`.
    pub dir: PathBuf,
}

pub(crate) fn print_summary(s: &RunSummary, timing: Option<&Timing>) {
    let ind = &s.summary;
    println!("{} on {}: {} calls of {} generations", s.config.algorithm, s.dataset, ind.calls, s.config.generations);
    println!("  best fitness     median {:.5}  mean {:.5}", ind.median_best_fitness, ind.mean_best_fitness);
    println!("  mean error       median {:.6}  mean {:.6}", ind.median_mean_error, ind.mean_mean_error);
    println!("  hidden neurons   median {:.1}  mean {:.2}", ind.median_neurons, ind.mean_neurons);
    println!("  delays           du {:.2}  dy {:.2}", ind.mean_du, ind.mean_dy);
    let hist: Vec<String> = ind.neuron_histogram.iter().map(|(n, k)| format!("{n}:{k}")).collect();
    println!("  neurons:calls    {}", hist.join(" "));
    if let Some(t) = timing {
        println!("  wall clock       {:.2} s per call, {:.2} s total", t.mean_call_seconds, t.total_seconds);
    }
    if !s.failures.is_empty() {
        println!("  failed calls     {}", s.failures.len());
    }
}

pub(crate) fn report(args: &ReportArgs) -> Result<()> {
    let path = args.dir.join("summary.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let summary: RunSummary = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let timing: Option<Timing> = std::fs::read_to_string(args.dir.join("timing.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    print_summary(&summary, timing.as_ref());
    println!();
    println!("{:>4} {:>10} {:>10} {:>10} {:>4} {:>4}", "call", "fitness", "error", "layers", "du", "dy");
    for c in &summary.calls {
        let layers: Vec<String> = c.layers.iter().map(|n| n.to_string()).collect();
        println!(
            "{:>4} {:>10.5} {:>10.6} {:>10} {:>4} {:>4}",
            c.call,
            c.best_fitness,
            c.mean_error,
            layers.join("-"),
            c.du,
            c.dy
        );
    }
    Ok(())
}
