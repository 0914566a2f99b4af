//! Balanced soft assignment of features to negative centers, compared with
//! a plain softmax.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use synet::losses::{sinkhorn_targets, softmax_responsibilities, SinkhornConfig};
use synet::mat::Mat;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(&mut *rng)).collect();
    Mat::from_vec(rows, cols, data)
}

fn column_mass(t: &Mat) -> Vec<f64> {
    (0..t.cols()).map(|k| t.iter_rows().map(|r| r[k]).sum()).collect()
}

fn main() -> synet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let features = random(64, 16, &mut rng);
    let centers = random(4, 16, &mut rng);
    let soft = softmax_responsibilities(&features, &centers, 0.55)?;
    let out = sinkhorn_targets(&features, &centers, &SinkhornConfig::default())?;
    println!("softmax column mass:  {:.2?}", column_mass(soft.as_mat()));
    println!("sinkhorn column mass: {:.2?}", column_mass(&out.plan));
    println!("converged {} after {} iterations (residual {:.1e})", out.converged, out.iterations, out.residual);
    Ok(())
}
