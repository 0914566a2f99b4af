//! Trains the positive-unlabeled baseline and the synthetic-negative
//! variant on the same data and compares them on held-out scenes.
//!
//! Usage: `train_pu [epochs] [scenes]`

use synet::negatives::InjectionConfig;
use synet::pipeline::{compare_with_baseline, generate_dataset, generate_eval_set, DataConfig};
use synet::trainer::TrainConfig;

fn main() -> synet::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("numeric argument"));
    let epochs = args.next().unwrap_or(5);
    let n = args.next().unwrap_or(60);
    let data = DataConfig::default();
    let train_set = generate_dataset(n, 1000, &data)?;
    let (eval_set, _) = generate_eval_set(20, 2000, &data, &InjectionConfig::default())?;

    let mut config = TrainConfig::pu();
    config.epochs = epochs;
    let (base, full) = compare_with_baseline(&train_set, &eval_set, &config)?;
    for (name, run) in [("baseline", &base), ("synthetic negatives", &full)] {
        let s = &run.summary;
        println!(
            "{name:>20}: auroc {:.4}  ap {:.4}  fpr@0.5 {:.4}  overlap {:.4}",
            s.metrics.auroc,
            s.metrics.ap,
            s.fpr_curve.at(0.5),
            s.overlap
        );
    }
    Ok(())
}
