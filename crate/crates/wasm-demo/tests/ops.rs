use b2m_wasm_demo::ops::{contrastive, parse_sample, rank_sum, scene, CURVE_POINTS};

#[test]
fn scene_view_is_rgba_of_requested_size() {
    let v = scene(0.3, -0.2, 0.5, 0.1, Some(0.4), 64, 32, 7).unwrap();
    assert_eq!((v.width(), v.height()), (64, 32));
    let rgba = v.rgba();
    assert_eq!(rgba.len(), 64 * 32 * 4);
    assert!(rgba.chunks(4).all(|p| p[3] == 255));
    assert_eq!(v.teacher().len(), 64);
    // same seed, same teacher map
    assert_eq!(
        v.teacher(),
        scene(0.3, -0.2, 0.5, 0.1, Some(0.4), 8, 4, 7)
            .unwrap()
            .teacher()
    );
}

#[test]
fn full_fog_scene_is_uniform_gray() {
    let v = scene(0.0, 0.0, 0.5, 1.0, None, 16, 8, 0).unwrap();
    assert!(v.rgba().chunks(4).all(|p| p == [128, 128, 128, 255]));
}

#[test]
fn invalid_scene_factors_are_reported() {
    assert!(scene(2.0, 0.0, 0.5, 0.0, None, 16, 8, 0).is_err());
    assert!(scene(0.0, 0.0, 0.5, 0.0, None, 0, 8, 0).is_err());
}

#[test]
fn contrastive_rows_are_distributions_and_alignment_helps() {
    let loose = contrastive(8, 4, 0.0, 0.5, 3).unwrap();
    let tight = contrastive(8, 4, 1.0, 0.5, 3).unwrap();
    for view in [&loose, &tight] {
        let p = view.probabilities();
        assert_eq!(p.len(), 64);
        for row in p.chunks(8) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(
            (view.taus().len(), view.curve().len()),
            (CURVE_POINTS, CURVE_POINTS)
        );
        assert!(view.grad_norm() > 0.0);
    }
    assert!(tight.loss() < loose.loss());
    // the reported loss is the sum of per-anchor cross-entropies
    let p = tight.probabilities();
    let from_probs: f64 = (0..8).map(|i| -p[i * 8 + i].ln()).sum();
    assert!((from_probs - tight.loss()).abs() < 1e-9);
}

#[test]
fn contrastive_rejects_bad_inputs() {
    assert!(contrastive(0, 4, 0.5, 0.1, 0).is_err());
    assert!(contrastive(4, 4, 1.5, 0.1, 0).is_err());
    assert!(contrastive(4, 4, 0.5, 0.0, 0).is_err());
}

#[test]
fn rank_sum_view() {
    assert_eq!(parse_sample(" 1, 2\n3.5 ").unwrap(), vec![1.0, 2.0, 3.5]);
    assert!(parse_sample("1, x").is_err());
    assert!(parse_sample("nan").is_err());

    // complete separation of 4 vs 4: p = 1 / C(8, 4)
    let v = rank_sum("5 6 7 8", "1 2 3 4").unwrap();
    assert!(v.exact());
    assert!((v.p_value() - 1.0 / 70.0).abs() < 1e-15);
    assert_eq!(v.u_statistic(), 16.0);
    assert_eq!(v.exact_p(), Some(v.p_value()));

    let big = rank_sum("1 2 3 4 5 6 7", "1 2 3 4 5 6 7").unwrap();
    assert!(!big.exact());
    assert_eq!(big.exact_p(), None);
    assert_eq!(big.p_value(), big.normal_p());
    assert!(rank_sum("", "1").is_err());
}
