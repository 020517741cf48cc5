use nwa_core::grid::Shape;
use nwa_core::pipeline::{Model, NwaConfig, Variant};
use nwa_demo::state::{DemoState, Mode};

#[test]
fn maps_are_seeded_and_sized() {
    let a = DemoState::new(3, false);
    assert_eq!(a.shape, Shape::square(12));
    assert_eq!(a.image_rgba().len(), 96 * 96 * 4);
    assert_eq!(a.image_rgba(), DemoState::new(3, false).image_rgba());
    assert_ne!(a.image_rgba(), DemoState::new(4, false).image_rgba());
    assert_eq!(DemoState::new(3, true).shape, Shape::square(20));
}

#[test]
fn ground_truth_planning_is_optimal_at_zero_and_bounded() {
    let mut d = DemoState::new(5, false);
    assert_eq!(d.mode(), Mode::GroundTruth);
    let p = d.plan((11, 0), (0, 11), 0.0).unwrap();
    assert_eq!(p.mode, "ground truth");
    assert_eq!(p.path.first(), Some(&(11 * 12)));
    assert_eq!(p.path.last(), Some(&11));
    assert!((p.cost - p.optimal_cost).abs() < 1e-9);
    let q = d.plan((11, 0), (0, 11), 5.0).unwrap();
    assert!(q.cost <= 6.0 * q.optimal_cost + 1e-9);
    assert!(q.expanded.len() <= p.expanded.len());
    assert!(d.plan((12, 0), (0, 0), 0.0).is_err());
    assert!(d.plan((1, 0), (0, 0), -1.0).is_err());
}

#[test]
fn models_are_used_only_when_they_fit() {
    let mut d = DemoState::new(6, false);
    let bytes = Model::new(&NwaConfig::default(), Shape::square(12), 8, 1).unwrap().to_bytes().unwrap();
    let text = d.load_model(&bytes).unwrap();
    assert!(text.starts_with("nwa model"));
    assert_eq!(d.mode(), Mode::Model);
    let p = d.plan((10, 1), (1, 10), 3.0).unwrap();
    assert_eq!(p.variant, Some("nwa"));
    assert!(p.cost <= 4.0 * p.optimal_cost + 1e-9);
    assert!(p.true_cost >= p.true_optimal_cost - 1e-9);
    assert_eq!(d.layer("h-neural", (10, 1), (1, 10), 3.0).unwrap().len(), 144);
    let h0 = d.layer("h-eps", (10, 1), (1, 10), 0.0).unwrap();
    let h9 = d.layer("h-eps", (10, 1), (1, 10), 9.0).unwrap();
    assert!(h0.iter().zip(&h9).all(|(a, b)| a <= b));
    assert!(d.layer("nonsense", (0, 0), (1, 1), 0.0).is_err());
    d.regenerate(7, true);
    assert_eq!(d.mode(), Mode::GroundTruth);
    assert!(d.load_model(&bytes[..10]).is_err());
}

#[test]
fn baselines_have_no_learned_heuristic_layer() {
    let mut d = DemoState::new(8, false);
    let bytes = Model::new(&NwaConfig::for_variant(Variant::Na), Shape::square(12), 8, 1).unwrap().to_bytes().unwrap();
    d.load_model(&bytes).unwrap();
    assert!(d.layer("h-neural", (0, 0), (5, 5), 1.0).is_err());
    // source-dependent costs are recomputed when the source moves
    let a = d.layer("costs", (0, 0), (5, 5), 1.0).unwrap();
    let b = d.layer("costs", (9, 9), (5, 5), 1.0).unwrap();
    assert_ne!(a, b);
    assert!(d.plan((9, 9), (5, 5), 0.0).is_ok());
}
