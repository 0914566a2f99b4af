mod common;

use proptest::prelude::*;
use synet::format::{decode_scene, encode_scene};
use synet::negatives::LabeledScene;
use synet::scene::{generate_scene, make_labels, simulate_trajectory, Label, LabelMode, Scene, SceneConfig, Terrain};

fn config(h: usize, w: usize, c: usize) -> SceneConfig {
    SceneConfig {
        height: h,
        width: w,
        channels: c,
        ..SceneConfig::default()
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = generate_scene(&config(64, 64, 8), 7).unwrap();
    let b = generate_scene(&config(64, 64, 8), 7).unwrap();
    assert_eq!(a, b);
    assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn small_scene_has_sky_and_ground() {
    let s = generate_scene(&config(32, 32, 1), 0).unwrap();
    assert!(s.terrain().contains(&Terrain::Sky));
    assert!(s.terrain().contains(&Terrain::GroundA));
}

#[test]
fn below_minimum_size_is_rejected() {
    assert!(matches!(generate_scene(&config(31, 64, 3), 0), Err(synet::Error::Config(_))));
    assert!(matches!(generate_scene(&config(64, 64, 0), 0), Err(synet::Error::Config(_))));
}

#[test]
fn obstacle_fraction_matches_a_recount() {
    let cfg = SceneConfig {
        obstacle_density: 0.1,
        ..config(64, 64, 8)
    };
    let count = |s: &Scene| {
        let mut n = 0usize;
        for r in 0..s.height() {
            for c in 0..s.width() {
                if s.terrain_at(r, c) == Terrain::ObstacleNatural {
                    n += 1;
                }
            }
        }
        n
    };
    let first = count(&generate_scene(&cfg, 7).unwrap());
    let again = count(&generate_scene(&cfg, 7).unwrap());
    assert_eq!(first, again);
    let frac = first as f64 / 4096.0;
    assert!((0.02..=0.25).contains(&frac), "obstacle fraction {frac}");
}

#[test]
fn all_ground_scene_admits_a_walk() {
    let s = Scene::uniform(48, 48, 2, Terrain::GroundA, 0.5);
    let t = simulate_trajectory(&s, 1, 2).unwrap();
    assert!(t.footprint(48, 48).iter().enumerate().all(|(i, &on)| !on || s.terrain()[i].is_traversable()));
}

#[test]
fn all_sky_scene_has_no_corridor() {
    let s = Scene::uniform(48, 48, 2, Terrain::Sky, 0.8);
    assert!(matches!(simulate_trajectory(&s, 1, 2), Err(synet::Error::NoTraversableCorridor)));
}

#[test]
fn every_waypoint_is_on_ground() {
    let s = generate_scene(&config(64, 64, 4), 3).unwrap();
    let t = simulate_trajectory(&s, 3, 2).unwrap();
    for (i, &(r, c)) in t.waypoints.iter().enumerate() {
        let class = s.terrain()[r * 64 + c];
        assert!(matches!(class, Terrain::GroundA | Terrain::GroundB), "waypoint {i} on {class:?}");
        if i > 0 {
            let (pr, pc) = t.waypoints[i - 1];
            assert!(pr.abs_diff(r) <= 1 && pc.abs_diff(c) <= 1);
        }
    }
    let fp = t.footprint(64, 64);
    for (i, &on) in fp.iter().enumerate() {
        if on {
            assert!(!matches!(s.terrain()[i], Terrain::Sky | Terrain::ObstacleNatural));
        }
    }
}

#[test]
fn pu_mode_has_two_labels_and_infinite_threshold_has_no_negatives() {
    let s = generate_scene(&SceneConfig::default(), 5).unwrap();
    let t = simulate_trajectory(&s, 5, 2).unwrap();
    let pu = make_labels(&s, &t, LabelMode::Pu).unwrap();
    assert!(pu.labels.iter().all(|l| matches!(l, Label::Positive | Label::Unlabeled)));
    let pn = make_labels(&s, &t, LabelMode::Pn { min_distance: f64::INFINITY }).unwrap();
    assert_eq!(pn.count(Label::NegLowConf), 0);
}

#[test]
fn low_confidence_set_matches_all_pairs_distances() {
    let s = generate_scene(&SceneConfig::default(), 9).unwrap();
    let t = simulate_trajectory(&s, 9, 2).unwrap();
    let labels = make_labels(&s, &t, LabelMode::Pn { min_distance: 10.0 }).unwrap();
    let (h, w) = (s.height(), s.width());
    let positives: Vec<(i64, i64)> = (0..h * w)
        .filter(|&i| labels.labels[i] == Label::Positive)
        .map(|i| ((i / w) as i64, (i % w) as i64))
        .collect();
    for i in 0..h * w {
        let (r, c) = ((i / w) as i64, (i % w) as i64);
        let d2 = positives.iter().map(|&(pr, pc)| (pr - r).pow(2) + (pc - c).pow(2)).min().unwrap();
        let far = d2 > 100;
        assert_eq!(labels.labels[i] == Label::NegLowConf, far, "pixel {i}");
    }
}

#[test]
fn scene_container_layout() {
    let item = common::labeled(4);
    let bytes = encode_scene(&item).unwrap();
    assert_eq!(&bytes[..4], b"SYNT");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    let dims: Vec<u32> = (0..3).map(|k| u32::from_le_bytes(bytes[6 + 4 * k..10 + 4 * k].try_into().unwrap())).collect();
    assert_eq!(dims, vec![64, 64, 4]);
    let n = 64 * 64;
    assert_eq!(bytes.len(), 18 + 4 * 4 * n + 2 * n);
    let first = f32::from_le_bytes(bytes[18..22].try_into().unwrap());
    assert_eq!(first, item.scene.value(0, 0, 0));
    assert_eq!(bytes[18 + 16 * n + n] as usize, item.labels.labels[0] as usize);
    let back: LabeledScene = decode_scene(&bytes).unwrap();
    assert_eq!(back.labels, item.labels);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn labels_are_sound_and_partition_the_grid(seed in 0u64..10_000, dist in 4.0f64..20.0) {
        let s = generate_scene(&SceneConfig::default(), seed).unwrap();
        if let Ok(t) = simulate_trajectory(&s, seed, 2) {
            let l = make_labels(&s, &t, LabelMode::Pn { min_distance: dist }).unwrap();
            prop_assert_eq!(l.labels.len(), s.pixel_count());
            for (i, lab) in l.labels.iter().enumerate() {
                if *lab == Label::Positive {
                    prop_assert!(s.terrain()[i].is_traversable());
                }
                prop_assert!(matches!(lab, Label::Positive | Label::Unlabeled | Label::NegLowConf));
            }
            let again = make_labels(&s, &simulate_trajectory(&s, seed, 2).unwrap(), LabelMode::Pn { min_distance: dist }).unwrap();
            prop_assert_eq!(l, again);
        }
    }
}
