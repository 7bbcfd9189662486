use ethica_ar_core::vision::render::{card_to_frame, gradient_background, placement_corners, Placement, PlacementRange};
use ethica_ar_core::vision::*;
use ethica_ar_core::Emotion;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec() -> MarkerSpec {
    MarkerSpec::default().with_module_size(20)
}

fn placement(tilt: f64, roll: f64, extent: f64, w: usize, h: usize) -> Placement {
    Placement {
        tilt_deg: tilt,
        tilt_axis_deg: 30.0,
        roll_deg: roll,
        extent,
        center: Point::new(w as f64 / 2.0, h as f64 / 2.0),
    }
}

fn frame_at(card: Emotion, p: &Placement, w: usize, h: usize, sigma: f64) -> SyntheticFrame {
    let spec = spec();
    let hom = card_to_frame(&spec, &placement_corners(p, w, h)).unwrap();
    render_synthetic_frame(&spec, card, &hom, sigma, &GrayImage::filled(w, h, 200), 5).unwrap()
}

#[test]
fn sad_card_with_mild_tilt_is_read_with_full_confidence() {
    let f = frame_at(Emotion::Sad, &placement(10.0, 15.0, 0.5, 320, 240), 320, 240, 0.0);
    let dets = detect(&f.frame, &spec(), &DetectionParams::default());
    assert_eq!(dets.len(), 1);
    assert_eq!(dets[0].card, Emotion::Sad);
    assert!(dets[0].confidence >= 0.99, "confidence {}", dets[0].confidence);
}

#[test]
fn upright_card_recovers_ground_truth_corners() {
    let spec = MarkerSpec::default();
    let side = spec.rendered_side_px() as f64;
    let hom = Homography::translation(60.0, 40.0);
    let f = render_synthetic_frame(&spec, Emotion::Happy, &hom, 0.0, &GrayImage::filled(200, 160, 255), 0).unwrap();
    assert!(side < 100.0);
    let dets = detect(&f.frame, &spec, &DetectionParams::default());
    assert_eq!(dets.len(), 1);
    assert_eq!(dets[0].card, Emotion::Happy);
    assert_eq!(dets[0].rotation, 0);
    let err = dets[0].quad.max_corner_distance(&f.quad);
    assert!(err <= 1.5, "corner error {err}");
}

#[test]
fn steep_tilt_with_noise_still_reads_the_card() {
    for card in Emotion::ALL {
        let f = frame_at(card, &placement(45.0, 200.0, 0.6, 480, 480), 480, 480, 5.0);
        let dets = detect(&f.frame, &spec(), &DetectionParams::default());
        assert_eq!(dets.iter().map(|d| d.card).collect::<Vec<_>>(), vec![card]);
    }
}

#[test]
fn quarter_turn_in_frame_rotates_the_sampled_payload() {
    let spec = spec();
    for card in Emotion::ALL {
        let upright = frame_at(card, &placement(0.0, 0.0, 0.5, 320, 320), 320, 320, 0.0);
        let turned = frame_at(card, &placement(0.0, 90.0, 0.5, 320, 320), 320, 320, 0.0);
        let read = |f: &SyntheticFrame| {
            let corners = f.quad.corners;
            let h = estimate_homography(&canonical_corners(), &corners).unwrap();
            sample_grid(&f.frame, &h).unwrap()
        };
        let a = read(&upright);
        let b = read(&turned);
        assert!(a.border_ok && b.border_ok);
        assert_eq!(a.payload, spec.codeword(card));
        assert_eq!(b.payload, spec.codeword(card).rotate_cw());
        let m = decode_payload(b.payload, &spec).unwrap();
        assert_eq!((m.card, m.rotation, m.distance), (card, 1, 0));
    }
}

#[test]
fn two_cards_side_by_side() {
    let spec = spec();
    let (w, h) = (480, 240);
    let left = card_to_frame(
        &spec,
        &placement_corners(
            &Placement {
                center: Point::new(120.0, 120.0),
                ..placement(15.0, 10.0, 0.6, w, h)
            },
            w,
            h,
        ),
    )
    .unwrap();
    let right = card_to_frame(
        &spec,
        &placement_corners(
            &Placement {
                center: Point::new(360.0, 120.0),
                ..placement(15.0, 340.0, 0.6, w, h)
            },
            w,
            h,
        ),
    )
    .unwrap();
    let bg = GrayImage::filled(w, h, 210);
    let first = render_synthetic_frame(&spec, Emotion::Happy, &left, 0.0, &bg, 0).unwrap();
    let both = render_synthetic_frame(&spec, Emotion::Angry, &right, 2.0, &first.frame, 1).unwrap();
    let mut cards: Vec<_> = detect(&both.frame, &spec, &DetectionParams::default())
        .iter()
        .map(|d| d.card)
        .collect();
    cards.sort();
    assert_eq!(cards, vec![Emotion::Happy, Emotion::Angry]);
}

#[test]
fn every_payload_decodes_to_at_most_one_card() {
    let spec = MarkerSpec::default();
    for raw in 0..=u16::MAX {
        let bits = PayloadBits(raw);
        let near: Vec<(Emotion, u8)> = Emotion::ALL
            .into_iter()
            .flat_map(|card| (0..4u8).map(move |r| (card, r)))
            .filter(|&(card, r)| spec.codeword(card).rotated(r).hamming(bits) <= 2)
            .collect();
        let cards: std::collections::BTreeSet<_> = near.iter().map(|(c, _)| *c).collect();
        assert!(cards.len() <= 1, "{raw:#06x} is near {near:?}");
        assert!(near.len() <= 1, "{raw:#06x} is near several rotations: {near:?}");
        match (decode_payload(bits, &spec), near.first()) {
            (None, None) => {}
            (Some(m), Some(&(card, r))) => assert_eq!((m.card, m.rotation), (card, r)),
            (got, want) => panic!("{raw:#06x}: decoded {got:?}, brute force {want:?}"),
        }
    }
}

#[test]
fn rotating_bits_advances_the_decoded_rotation() {
    let spec = MarkerSpec::default();
    for raw in 0..=u16::MAX {
        let bits = PayloadBits(raw);
        if let Some(m) = decode_payload(bits, &spec) {
            let turned = decode_payload(bits.rotate_cw(), &spec).expect("rotation keeps the distance");
            assert_eq!(turned.card, m.card);
            assert_eq!(turned.rotation, (m.rotation + 1) % 4);
            assert_eq!(turned.distance, m.distance);
        }
    }
}

#[test]
fn detection_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = random_synthetic_frame(&mut rng, &spec(), Emotion::Surprised, &PlacementRange::default(), 320, 240, 6.0)
        .unwrap();
    let a = detect(&f.frame, &spec(), &DetectionParams::default());
    let b = detect(&f.frame, &spec(), &DetectionParams::default());
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn lighting_gradient_does_not_hide_the_card() {
    let spec = spec();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bg = gradient_background(&mut rng, 400, 300, 60, 250);
    let p = placement(20.0, 45.0, 0.5, 400, 300);
    let hom = card_to_frame(&spec, &placement_corners(&p, 400, 300)).unwrap();
    let f = render_synthetic_frame(&spec, Emotion::Angry, &hom, 3.0, &bg, 2).unwrap();
    let dets = detect(&f.frame, &spec, &DetectionParams::default());
    assert_eq!(dets.len(), 1);
    assert_eq!(dets[0].card, Emotion::Angry);
}

fn general_position(pts: &[Point; 4]) -> bool {
    let cross = |a: Point, b: Point, c: Point| (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    (0..4).all(|skip| {
        let v: Vec<Point> = (0..4).filter(|&i| i != skip).map(|i| pts[i]).collect();
        cross(v[0], v[1], v[2]).abs() > 1.0
    })
}

fn point() -> impl Strategy<Value = Point> {
    (0.0..640.0f64, 0.0..480.0f64).prop_map(|(x, y)| Point::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn admissible_placements_give_exactly_one_correct_detection(
        card_idx in 0usize..4,
        tilt in 0.0..=45.0f64,
        axis in 0.0..180.0f64,
        roll in 0.0..360.0f64,
        extent in 0.2..=0.8f64,
    ) {
        let card = Emotion::ALL[card_idx];
        let p = Placement { tilt_axis_deg: axis, ..placement(tilt, roll, extent, 400, 400) };
        let f = frame_at(card, &p, 400, 400, 0.0);
        let dets = detect(&f.frame, &spec(), &DetectionParams::default());
        prop_assert_eq!(dets.len(), 1);
        prop_assert_eq!(dets[0].card, card);
        for (c, q) in canonical_corners().iter().zip(dets[0].quad.corners) {
            let projected = dets[0].homography.apply(*c).unwrap();
            prop_assert!(projected.dist(q) <= 1.5);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn homography_reproduces_general_position_correspondences(
        src in [point(), point(), point(), point()],
        dst in [point(), point(), point(), point()],
    ) {
        prop_assume!(general_position(&src) && general_position(&dst));
        let h = estimate_homography(&src, &dst).unwrap();
        prop_assert_eq!(h.matrix()[(2, 2)], 1.0);
        for (s, d) in src.iter().zip(dst) {
            let p = h.apply(*s).unwrap();
            prop_assert!(p.dist(d) < 1e-9 * 640.0, "residual {}", p.dist(d));
        }
    }

    #[test]
    fn four_quarter_turns_are_identity(raw in any::<u16>()) {
        let bits = PayloadBits(raw);
        prop_assert_eq!(bits.rotated(4), bits);
        prop_assert_eq!(bits.rotate_cw().weight(), bits.weight());
    }
}
