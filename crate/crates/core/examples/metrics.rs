//! Pixel metrics, the object-centric FPR sweep and score densities on a
//! hand-made score map.

use synet::eval::{object_centric_fpr, overlap_coefficient, pixel_metrics, similarity_histograms, threshold_grid};

fn main() -> synet::Result<()> {
    let scores = [0.95, 0.9, 0.8, 0.7, 0.65, 0.4, 0.3, 0.2];
    let gt = [true, true, true, false, true, false, false, false];
    let m = pixel_metrics(&scores, &gt)?;
    print!("{}", m.to_csv());

    // the two lowest-scoring negatives belong to a composed object
    let mask = [false, false, false, false, false, false, true, true];
    let curve = object_centric_fpr(&[&scores], &[&mask], &threshold_grid())?;
    for t in [0.1, 0.25, 0.5] {
        println!("object-centric fpr @ {t}: {}", curve.at(t));
    }
    let (pos, neg) = similarity_histograms(&scores, &gt)?;
    println!("density overlap: {}", overlap_coefficient(&pos, &neg));
    Ok(())
}
