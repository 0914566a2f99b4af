//! Sweeps the share of training scenes that receive synthetic negatives
//! and prints the overlap between traversable and non-traversable scores.
//!
//! Usage: `ratio_ablation [epochs] [scenes]`

use synet::negatives::InjectionConfig;
use synet::pipeline::{ablation_csv, generate_dataset, generate_eval_set, ratio_ablation, DataConfig, ABLATION_RATIOS};
use synet::trainer::TrainConfig;

fn main() -> synet::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("numeric argument"));
    let epochs = args.next().unwrap_or(3);
    let n = args.next().unwrap_or(60);
    let data = DataConfig::default();
    let train_set = generate_dataset(n, 1000, &data)?;
    let (eval_set, _) = generate_eval_set(20, 2000, &data, &InjectionConfig::default())?;
    let mut config = TrainConfig::pu();
    config.epochs = epochs;
    let points: Vec<_> = ratio_ablation(&train_set, &eval_set, &config, &ABLATION_RATIOS)?
        .into_iter()
        .map(|(p, _)| p)
        .collect();
    print!("{}", ablation_csv(&points));
    Ok(())
}
