//! Composes synthetic obstacles into a small dataset and prints the
//! JSON-lines manifest of what was placed where.

use synet::negatives::{inject_dataset, read_manifest, write_manifest, InjectionConfig};
use synet::pipeline::{generate_dataset, DataConfig};
use synet::scene::Label;

fn main() -> synet::Result<()> {
    let scenes = generate_dataset(10, 3, &DataConfig::default())?;
    let injection = inject_dataset(&scenes, 0.3, 11, &InjectionConfig::default())?;
    let text = write_manifest(&injection.records)?;
    for record in read_manifest(&text)? {
        let synthetic = injection.scenes[record.scene_id as usize].labels.count(Label::NegSynthetic);
        println!("scene {}: {} objects, {synthetic} synthetic-negative pixels", record.scene_id, record.proposals.len());
        for p in &record.proposals {
            println!("    {:?} {:?} area {} after {} retries", p.class, p.quality, p.area, p.retries);
        }
    }
    Ok(())
}
