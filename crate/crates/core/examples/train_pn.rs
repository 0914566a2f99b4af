//! Positive-negative training with and without the synthetic contrastive
//! term; prints the object-centric FPR at a few thresholds.
//!
//! Usage: `train_pn [epochs] [scenes]`

use synet::negatives::InjectionConfig;
use synet::pipeline::{compare_with_baseline, generate_dataset, generate_eval_set, DataConfig};
use synet::trainer::TrainConfig;

fn main() -> synet::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("numeric argument"));
    let epochs = args.next().unwrap_or(2);
    let n = args.next().unwrap_or(60);
    let data = DataConfig::default();
    let train_set = generate_dataset(n, 1000, &data)?;
    let (eval_set, _) = generate_eval_set(20, 2000, &data, &InjectionConfig::default())?;

    let mut config = TrainConfig::pn();
    config.epochs = epochs;
    let (base, full) = compare_with_baseline(&train_set, &eval_set, &config)?;
    println!("{:>20}  {:>7} {:>7} {:>7} {:>7}", "", "auroc", "fpr@.1", "fpr@.3", "fpr@.5");
    for (name, run) in [("baseline", &base), ("synthetic negatives", &full)] {
        let s = &run.summary;
        println!(
            "{name:>20}  {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
            s.metrics.auroc,
            s.fpr_curve.at(0.1),
            s.fpr_curve.at(0.3),
            s.fpr_curve.at(0.5)
        );
    }
    Ok(())
}
