//! Evaluates the individual objective terms on small hand-built inputs.

use synet::losses::{contrastive_loss, neg_center_loss, repulsion_loss, TargetMatrix};
use synet::mat::Mat;

fn basis(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}

fn main() -> synet::Result<()> {
    // a feature equidistant from four orthogonal centers
    let f = Mat::from_rows(&[basis(5, 4)], 5);
    let centers = Mat::from_rows(&(0..4).map(|i| basis(5, i)).collect::<Vec<_>>(), 5);
    let uniform = TargetMatrix::uniform(1, 4);
    println!("center loss, uniform targets: {:.4}", neg_center_loss(&f, &centers, &uniform, 1.0)?.value);

    let negs = Mat::from_rows(&[basis(4, 1), basis(4, 2)], 4);
    println!("repulsion, orthogonal centers: {:.4}", repulsion_loss(&negs, &basis(4, 0), 0.1)?.value);

    let pos = Mat::from_rows(&[basis(3, 0), basis(3, 0)], 3);
    let neg = Mat::from_rows(&[basis(3, 1), basis(3, 2)], 3);
    println!("contrastive, two negatives: {:.4}", contrastive_loss(&pos, &neg, 1.0, false)?.value);
    Ok(())
}
