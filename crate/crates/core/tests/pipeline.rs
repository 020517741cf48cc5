use nwa_core::datagen::{generate_dataset, Dataset, DatagenConfig, SplitCounts};
use nwa_core::grid::{path_cost, Cell};
use nwa_core::pipeline::{forward_train, infer, train, EpsilonParam, Model, NwaConfig, PipelineError, Variant};
use nwa_core::search::{astar, dijkstra_oracle, h_chebyshev};
use sha2::{Digest, Sha256};

fn small_set(train_maps: usize, seed: u64) -> Dataset {
    let cfg = DatagenConfig { maps: SplitCounts { train: train_maps, val: 1, test: 1 }, ..DatagenConfig::easy(seed) };
    generate_dataset(&cfg).unwrap().train
}

fn eps(v: f64) -> EpsilonParam {
    EpsilonParam::new(v).unwrap()
}

fn mean_loss(model: &Model, data: &Dataset, e: EpsilonParam) -> f64 {
    data.samples().map(|s| forward_train(model, &s, e).unwrap().loss.total).sum::<f64>() / data.len() as f64
}

#[test]
fn beta_zero_gives_no_heuristic_gradient() {
    let data = small_set(3, 4);
    let cfg = NwaConfig { beta: 0.0, ..NwaConfig::default() };
    let model = Model::new(&cfg, data.shape, 8, 1).unwrap();
    for s in data.samples() {
        for e in [0.0, 3.0, 9.0] {
            let out = forward_train(&model, &s, eps(e)).unwrap();
            assert!(out.heuristic_grad.iter().all(|&g| g == 0.0));
        }
    }
}

#[test]
fn beta_zero_loss_is_flat_in_heuristic_parameters() {
    let data = small_set(2, 5);
    let cfg = NwaConfig { beta: 0.0, ..NwaConfig::default() };
    let model = Model::new(&cfg, data.shape, 8, 2).unwrap();
    let base = model.heuristic_encoder.as_ref().unwrap().flat_params();
    let step = 1e-4;
    for i in (0..base.len()).step_by(7) {
        let mut diffs = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut m = model.clone();
            let mut p = base.clone();
            p[i] += sign * step;
            m.heuristic_encoder.as_mut().unwrap().set_flat_params(&p).unwrap();
            diffs[k] = mean_loss(&m, &data, eps(5.0));
        }
        let fd = (diffs[0] - diffs[1]) / (2.0 * step);
        assert!(fd.abs() <= 1e-10, "parameter {i}: {fd}");
    }
}

#[test]
fn exploration_branch_sends_nothing_to_the_cost_encoder() {
    let data = small_set(2, 17);
    let cfg = NwaConfig { alpha: 0.0, ..NwaConfig::default() };
    let model = Model::new(&cfg, data.shape, 8, 4).unwrap();
    let mut any_h = false;
    for s in data.samples() {
        let out = forward_train(&model, &s, eps(6.0)).unwrap();
        assert!(out.cost_grad.iter().all(|&g| g == 0.0));
        any_h |= out.heuristic_grad.iter().any(|&g| g != 0.0);
    }
    assert!(any_h);
}

#[test]
fn path_branch_ignores_heuristic_parameters() {
    let data = small_set(2, 6);
    let model = Model::new(&NwaConfig::default(), data.shape, 8, 3).unwrap();
    let mut other = model.clone();
    let h = other.heuristic_encoder.as_mut().unwrap();
    let shifted: Vec<f64> = h.flat_params().iter().map(|p| p * 1.5 + 0.1).collect();
    h.set_flat_params(&shifted).unwrap();
    for s in data.samples() {
        let a = forward_train(&model, &s, eps(4.0)).unwrap();
        let b = forward_train(&other, &s, eps(4.0)).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.loss.path, b.loss.path);
        assert_eq!(a.cost_grad, b.cost_grad);
    }
}

#[test]
fn costs_ignore_cells_the_variant_does_not_see() {
    let data = small_set(1, 7);
    let image = data.maps[0].image.to_tensor();
    let (a, b) = (Cell::new(1, 1), Cell::new(10, 9));
    let (c, d) = (Cell::new(0, 11), Cell::new(6, 3));
    let nwa = Model::new(&NwaConfig::default(), data.shape, 8, 4).unwrap();
    let w1 = nwa.forward_costs(&image, a, b).unwrap().0;
    let w2 = nwa.forward_costs(&image, c, d).unwrap().0;
    assert_eq!(w1, w2);
    let nsna = Model::new(&NwaConfig::for_variant(Variant::NsNa), data.shape, 8, 4).unwrap();
    assert_eq!(nsna.forward_costs(&image, a, b).unwrap().0, nsna.forward_costs(&image, c, b).unwrap().0);
    assert_ne!(nsna.forward_costs(&image, a, b).unwrap().0, nsna.forward_costs(&image, a, d).unwrap().0);
    let na = Model::new(&NwaConfig::for_variant(Variant::Na), data.shape, 8, 4).unwrap();
    assert_ne!(na.forward_costs(&image, a, b).unwrap().0, na.forward_costs(&image, c, b).unwrap().0);
}

#[test]
fn source_free_predictions_plan_from_any_source() {
    let data = small_set(1, 8);
    let image = data.maps[0].image.to_tensor();
    let t = Cell::new(2, 2);
    let nsna = Model::new(&NwaConfig::for_variant(Variant::NsNa), data.shape, 8, 5).unwrap();
    let p = nsna.predict(&image, Cell::new(11, 11), t).unwrap();
    assert!(p.plan(Cell::new(9, 0), EpsilonParam::ZERO).is_ok());
    let na = Model::new(&NwaConfig::for_variant(Variant::Na), data.shape, 8, 5).unwrap();
    let p = na.predict(&image, Cell::new(11, 11), t).unwrap();
    assert!(matches!(p.plan(Cell::new(9, 0), EpsilonParam::ZERO), Err(PipelineError::Incompatible(_))));
}

/// Training loss averaged over an even grid of the training eps range.
fn expected_loss(model: &Model, data: &Dataset) -> f64 {
    (0..=9).map(|e| mean_loss(model, data, eps(e as f64))).sum::<f64>() / 10.0
}

#[test]
fn toy_training_halves_the_loss() {
    let data = small_set(2, 9);
    assert_eq!(data.len(), 8);
    for seed in 0..3 {
        let cfg = NwaConfig::default();
        let before = expected_loss(&Model::new(&cfg, data.shape, 8, seed).unwrap(), &data);
        let (model, log) = train(&data, &cfg, 200, seed).unwrap();
        assert_eq!(log.len(), 200);
        let after = expected_loss(&model, &data);
        assert!(after <= 0.5 * before, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn training_is_reproducible() {
    let data = small_set(4, 10);
    let hash = |seed| {
        let (model, log) = train(&data, &NwaConfig::default(), 2, seed).unwrap();
        let mut csv = Vec::new();
        nwa_core::pipeline::write_loss_csv(&log, &mut csv).unwrap();
        let mut h = Sha256::new();
        h.update(model.to_bytes().unwrap());
        h.update(csv);
        h.finalize()
    };
    assert_eq!(hash(11), hash(11));
    assert_ne!(hash(11), hash(12));
}

#[test]
fn fixed_epsilon_range_is_respected() {
    let data = small_set(4, 11);
    let cfg = NwaConfig { eps_train_range: (0.0, 0.0), ..NwaConfig::default() };
    let (_, log) = train(&data, &cfg, 2, 0).unwrap();
    assert!(log.iter().all(|r| r.eps == 0.0));
    let cfg = NwaConfig { eps_train_range: (2.0, 3.0), ..NwaConfig::default() };
    let (_, log) = train(&data, &cfg, 3, 0).unwrap();
    assert!(log.iter().all(|r| (2.0..=3.0).contains(&r.eps)));
}

#[test]
fn inference_is_optimal_at_zero_and_bounded_above() {
    let data = small_set(6, 12);
    let (model, _) = train(&data, &NwaConfig::default(), 1, 0).unwrap();
    for s in data.samples() {
        let image = s.image.to_tensor();
        let base = infer(&model, &image, s.source, s.target, EpsilonParam::ZERO).unwrap();
        let opt = dijkstra_oracle(&base.costs, s.source, s.target).unwrap();
        assert!((base.result.total_cost - opt.total_cost).abs() <= 1e-9 * opt.total_cost);
        for e in [0.5, 1.0, 4.0, 9.0, 14.0] {
            let r = infer(&model, &image, s.source, s.target, eps(e)).unwrap();
            let cost = path_cost(&r.costs, &r.result.path_mask).unwrap();
            assert!(cost <= (1.0 + e) * opt.total_cost + 1e-9, "eps {e}: {cost} vs {}", opt.total_cost);
        }
    }
}

#[test]
fn baselines_plan_the_same_for_every_epsilon() {
    let data = small_set(1, 13);
    let s = data.sample(0);
    let image = s.image.to_tensor();
    for v in [Variant::Bba, Variant::Na, Variant::AdmNa, Variant::NsNa] {
        let model = Model::new(&NwaConfig::for_variant(v), data.shape, 8, 6).unwrap();
        let a = infer(&model, &image, s.source, s.target, EpsilonParam::ZERO).unwrap();
        let b = infer(&model, &image, s.source, s.target, eps(9.0)).unwrap();
        assert_eq!(a.result, b.result, "{v}");
    }
}

#[test]
fn bba_and_admna_search_is_exact_on_their_costs() {
    let data = small_set(1, 14);
    let s = data.sample(1);
    let image = s.image.to_tensor();
    for v in [Variant::Bba, Variant::AdmNa] {
        let model = Model::new(&NwaConfig::for_variant(v), data.shape, 8, 7).unwrap();
        let r = infer(&model, &image, s.source, s.target, EpsilonParam::ZERO).unwrap();
        let opt = dijkstra_oracle(&r.costs, s.source, s.target).unwrap();
        assert!((r.result.total_cost - opt.total_cost).abs() <= 1e-9 * opt.total_cost);
        let h = h_chebyshev(r.costs.min(), s.target, data.shape).unwrap();
        assert_eq!(astar(&r.costs, &h, s.source, s.target).unwrap().total_cost, r.result.total_cost);
    }
}

#[test]
fn checkpoints_round_trip() {
    let data = small_set(2, 15);
    let dir = tempfile::tempdir().unwrap();
    for v in Variant::ALL {
        let (model, _) = train(&data, &NwaConfig::for_variant(v), 1, 3).unwrap();
        let path = dir.path().join(format!("{v}.ckpt"));
        model.save(&path).unwrap();
        let back = Model::load(&path).unwrap();
        assert_eq!(back.to_bytes().unwrap(), model.to_bytes().unwrap());
        assert_eq!(back.flat_params(), model.flat_params());
        assert_eq!((back.step, back.epochs, back.seed), (model.step, model.epochs, model.seed));
        let s = data.sample(0);
        let image = s.image.to_tensor();
        assert_eq!(
            infer(&back, &image, s.source, s.target, eps(2.0)).unwrap(),
            infer(&model, &image, s.source, s.target, eps(2.0)).unwrap()
        );
        let bytes = model.to_bytes().unwrap();
        assert!(Model::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}

#[test]
fn wrong_image_size_is_rejected() {
    let data = small_set(1, 16);
    let model = Model::new(&NwaConfig::default(), data.shape, 4, 0).unwrap();
    let image = data.maps[0].image.to_tensor();
    assert!(matches!(model.predict(&image, Cell::new(0, 0), Cell::new(5, 5)), Err(PipelineError::Incompatible(_))));
}
