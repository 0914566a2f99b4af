//! Renders one toy scene, drives a trajectory through it and prints the
//! resulting label counts.

use synet::scene::{generate_scene, make_labels, simulate_trajectory, Label, LabelMode, SceneConfig, Terrain};

fn main() -> synet::Result<()> {
    let config = SceneConfig::default();
    let scene = generate_scene(&config, 7)?;
    let traj = simulate_trajectory(&scene, 7, 2)?;
    let labels = make_labels(&scene, &traj, LabelMode::Pn { min_distance: 10.0 })?;

    println!("scene {}x{} with {} channels, horizon at row {}", scene.height(), scene.width(), scene.channels(), scene.horizon);
    for t in [Terrain::GroundA, Terrain::GroundB, Terrain::Sky, Terrain::ObstacleNatural] {
        let n = scene.terrain().iter().filter(|&&x| x == t).count();
        println!("  {t:?}: {n} pixels");
    }
    println!("trajectory: {} waypoints", traj.waypoints.len());
    for l in [Label::Positive, Label::Unlabeled, Label::NegLowConf] {
        println!("  {l:?}: {} pixels", labels.count(l));
    }
    Ok(())
}
