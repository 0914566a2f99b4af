//! Renders an FPR curve CSV to SVG and writes it next to the working directory.

use synet::plot::{plot_csv, PlotKind};

fn main() -> synet::Result<()> {
    let mut csv = String::from("threshold,baseline,synthetic\n");
    for i in 0..=20 {
        let t = i as f64 / 20.0;
        csv.push_str(&format!("{t},{},{}\n", 1.0 - t.powi(3), (1.0 - t).powi(2)));
    }
    let svg = plot_csv(&csv, PlotKind::FprCurve)?;
    let path = std::env::temp_dir().join("synet_fpr_example.svg");
    std::fs::write(&path, &svg)?;
    println!("wrote {} ({} bytes)", path.display(), svg.len());
    Ok(())
}
