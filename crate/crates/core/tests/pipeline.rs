use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use texseg::classifier::{
    accumulate, classify_with_superpixels, map_to_textons, mix_and_vote, to_working_size, ClassifyError,
    TextonAssignment,
};
use texseg::evaluation::{confusion, metrics, RegionDataset, TrainParams};
use texseg::features::{ColorFeature, TextureFeature};
use texseg::synthetic::{render_crop, Material};
use texseg::{
    classify_image, classify_pixelwise, classify_region, Classifier, DistanceMetric, FeatureConfig, FeatureExtractor,
    KMeansOptions, LabelMap, RgbImage, SegParams, SuperpixelMap, SuperpixelMode, TextonDictionary,
};

fn random_dictionary(rng: &mut ChaCha8Rng, classes: usize, k: usize, metric: DistanceMetric) -> TextonDictionary {
    let rows = classes * k;
    let color: Vec<ColorFeature> = (0..rows).map(|_| std::array::from_fn(|_| rng.gen())).collect();
    let texture: Vec<TextureFeature> = (0..rows)
        .map(|_| std::array::from_fn(|i| if i < 9 { rng.gen() } else { rng.gen_range(-0.05..0.05) }))
        .collect();
    TextonDictionary::new(
        (0..classes).map(|i| format!("class{i}")).collect(),
        k,
        metric,
        FeatureConfig::default(),
        0,
        color,
        texture,
    )
    .unwrap()
}

fn random_image(rng: &mut ChaCha8Rng, width: usize, height: usize) -> RgbImage {
    // Blocky noise so that superpixels have some extent.
    let cells: Vec<[u8; 3]> = (0..64).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    RgbImage::from_fn(width, height, |x, y| {
        let c = cells[(y / 8 % 8) * 8 + x / 8 % 8];
        let n: i16 = rng.gen_range(-10..=10);
        c.map(|v| (i16::from(v) + n).clamp(0, 255) as u8)
    })
}

#[test]
fn probabilities_sum_to_one_plus_w() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dict = random_dictionary(&mut rng, 4, 5, DistanceMetric::Euclidean);
    let img = random_image(&mut rng, 48, 40);
    let classifier = Classifier::new(&dict).unwrap();
    for w in [0.0, 0.6, 1.0, 1.2, 3.7] {
        let (result, _) = classifier
            .classify(&img, SuperpixelMode::GraphBased(SegParams { sigma: 0.5, k: 80.0, min_size: 10 }), w)
            .unwrap();
        for (p, seg) in result.probabilities.iter().zip(result.superpixels.segments()) {
            assert!((p.probabilities.iter().sum::<f64>() - (1.0 + w)).abs() < 1e-9);
            assert!(p.probabilities.iter().all(|&v| v >= 0.0));
            let label = p.label() as u8;
            assert!(seg.iter().all(|&px| result.labels.as_slice()[px] == label));
        }
    }
}

#[test]
fn singleton_superpixels_equal_pixelwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dict = random_dictionary(&mut rng, 3, 4, DistanceMetric::Cosine);
    let img = random_image(&mut rng, 320, 240);
    let pixelwise = classify_pixelwise(&img, &dict, 0.8).unwrap();
    let features = FeatureExtractor::new(FeatureConfig::default()).unwrap().extract(&img).unwrap();
    let ids: Vec<usize> = (0..img.len()).rev().collect();
    let sp = SuperpixelMap::from_labels(320, 240, &ids).unwrap();
    let via_map = classify_with_superpixels(&features, &sp, &dict, 0.8).unwrap();
    assert_eq!(pixelwise.labels, via_map.labels);
}

#[test]
fn weight_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dict = random_dictionary(&mut rng, 3, 3, DistanceMetric::Euclidean);
    let img = random_image(&mut rng, 40, 30);
    let features = FeatureExtractor::new(FeatureConfig::default()).unwrap().extract(&img).unwrap();
    let assignment = map_to_textons(&features, &dict).unwrap();
    let classifier = Classifier::new(&dict).unwrap();
    let color_only = classifier.classify(&img, SuperpixelMode::Singletons, 0.0).unwrap().0;
    let texture_heavy = classifier.classify(&img, SuperpixelMode::Singletons, 1e6).unwrap().0;
    for p in 0..img.len() {
        assert_eq!(color_only.labels.as_slice()[p] as usize, assignment.color(p).0);
        assert_eq!(texture_heavy.labels.as_slice()[p] as usize, assignment.texture(p).0);
    }
}

#[test]
fn permuting_textons_within_a_class_keeps_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dict = random_dictionary(&mut rng, 3, 4, DistanceMetric::CityBlock);
    let (mut color, mut texture) = (dict.color_textons().to_vec(), dict.texture_textons().to_vec());
    for class in 0..3 {
        color[class * 4..class * 4 + 4].reverse();
        texture[class * 4..class * 4 + 4].rotate_left(1);
    }
    let permuted = TextonDictionary::new(
        dict.classes().to_vec(),
        4,
        dict.metric(),
        *dict.config(),
        0,
        color,
        texture,
    )
    .unwrap();
    let img = random_image(&mut rng, 64, 64);
    let params = SegParams::default();
    let a = classify_image(&img, &dict, &params, 1.0).unwrap();
    let b = classify_image(&img, &permuted, &params, 1.0).unwrap();
    assert_eq!(a.labels, b.labels);
}

#[test]
fn exact_texton_and_degenerate_dictionary() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dict = random_dictionary(&mut rng, 3, 4, DistanceMetric::Euclidean);
    let target = *dict.color_texton(2, 3);
    let rows = dict.color_textons();
    assert_eq!(texseg::classifier::nearest_texton(DistanceMetric::Euclidean, &target, rows), 2 * 4 + 3);

    let one = random_dictionary(&mut rng, 1, 1, DistanceMetric::Correlation);
    let img = random_image(&mut rng, 20, 20);
    let features = FeatureExtractor::new(FeatureConfig::default()).unwrap().extract(&img).unwrap();
    let a = map_to_textons(&features, &one).unwrap();
    assert!((0..img.len()).all(|p| a.color(p) == (0, 0) && a.texture(p) == (0, 0)));
}

#[test]
fn config_mismatch_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dict = random_dictionary(&mut rng, 2, 2, DistanceMetric::Euclidean);
    let img = random_image(&mut rng, 20, 20);
    let features = FeatureExtractor::new(FeatureConfig::new(9).unwrap()).unwrap().extract(&img).unwrap();
    assert!(matches!(map_to_textons(&features, &dict), Err(ClassifyError::ConfigMismatch { .. })));
}

#[test]
fn hand_built_region_vote() {
    // 20 pixels, C = 3, K = 2. Color hits per class: 9 / 7 / 4; texture hits: 2 / 10 / 8.
    let color: Vec<(usize, usize)> = (0..20)
        .map(|i| match i {
            0..=8 => (0, i % 2),
            9..=15 => (1, 0),
            _ => (2, 1),
        })
        .collect();
    let texture: Vec<(usize, usize)> = (0..20)
        .map(|i| match i {
            0..=1 => (0, 1),
            2..=11 => (1, i % 2),
            _ => (2, 0),
        })
        .collect();
    let a = TextonAssignment::from_pairs(5, 4, 2, &color, &texture).unwrap();
    let table = accumulate(&SuperpixelMap::whole(5, 4), &a, 3).unwrap();
    assert_eq!(table.color_class_counts(0), &[9, 7, 4]);
    assert_eq!(table.texture_class_counts(0), &[2, 10, 8]);
    assert_eq!(table.color_count(0, 0, 0), 5);
    assert_eq!(table.color_count(0, 0, 1), 4);
    // w = 0.5: (9 + 1, 7 + 5, 4 + 4) / 20 = (0.5, 0.6, 0.4) -> class 1.
    let p = table.vote(0, 0.5);
    for (got, want) in p.probabilities.iter().zip([0.5, 0.6, 0.4]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!(p.label(), 1);
    // w = 0: color alone -> class 0.
    assert_eq!(table.vote(0, 0.0).label(), 0);
    assert_eq!(mix_and_vote(&[9.0, 7.0, 4.0], &[2.0, 10.0, 8.0], 0.5, 20), p);
}

/// Dictionary whose class `i` textons are exactly the features of a flat image of `colors[i]`.
fn flat_color_dictionary(colors: &[[u8; 3]]) -> TextonDictionary {
    let extractor = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    let (mut color, mut texture) = (Vec::new(), Vec::new());
    for &c in colors {
        let f = extractor.extract(&RgbImage::filled(9, 9, c)).unwrap();
        color.push(*f.color.get(4, 4));
        texture.push(*f.texture.get(4, 4));
    }
    TextonDictionary::new(
        (0..colors.len()).map(|i| format!("c{i}")).collect(),
        1,
        DistanceMetric::Euclidean,
        FeatureConfig::default(),
        0,
        color,
        texture,
    )
    .unwrap()
}

#[test]
fn flat_images_take_their_class() {
    let colors = [[200, 30, 30], [30, 200, 30], [30, 30, 200], [128, 128, 128]];
    let dict = flat_color_dictionary(&colors);
    for (i, &c) in colors.iter().enumerate() {
        let result = classify_image(&RgbImage::filled(320, 240, c), &dict, &SegParams::default(), 1.0).unwrap();
        assert!(result.labels.as_slice().iter().all(|&l| l as usize == i));
        let (label, p) = classify_region(&RgbImage::filled(12, 9, c), &dict, 1.3).unwrap();
        assert_eq!(label, i);
        assert!((p.probabilities[i] - 2.3).abs() < 1e-12);
    }
}

#[test]
fn single_pixel_region_matches_pixelwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dict = random_dictionary(&mut rng, 3, 2, DistanceMetric::Euclidean);
    let img = random_image(&mut rng, 16, 16);
    let classifier = Classifier::new(&dict).unwrap();
    let pixelwise = classifier.classify(&img, SuperpixelMode::Singletons, 0.7).unwrap().0;
    for p in [0usize, 17, 255] {
        let mut mask = vec![false; img.len()];
        mask[p] = true;
        let v = classifier.classify_masked_region(&img, &mask, 0.7).unwrap();
        assert_eq!(v.label() as u8, pixelwise.labels.as_slice()[p]);
    }
    assert!(matches!(
        classifier.classify_masked_region(&img, &vec![false; img.len()], 0.7),
        Err(ClassifyError::EmptyRegion)
    ));
}

#[test]
fn two_material_composite() {
    let smooth_red = Material {
        name: "red".into(),
        base: [190.0, 50.0, 45.0],
        frequency: 0.0,
        orientation: 0.0,
        amplitude: 0.0,
        noise: 5.0,
    };
    let striped_green = Material {
        name: "green".into(),
        base: [60.0, 160.0, 70.0],
        frequency: 0.2,
        orientation: 0.0,
        amplitude: 35.0,
        noise: 5.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let regions = [&smooth_red, &striped_green]
        .iter()
        .map(|m| (0..12).map(|_| render_crop(m, 48, 48, &mut rng)).collect())
        .collect();
    let dataset = RegionDataset {
        class_names: vec!["red".into(), "green".into()],
        regions,
    };
    let params = TrainParams {
        k: 10,
        kmeans: KMeansOptions::default(),
        ..TrainParams::default()
    };
    let dict = dataset.train(&dataset.all_indices(), &params).unwrap();

    let (ox, oy) = (rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0));
    let img = RgbImage::from_fn(320, 240, |x, y| {
        let m = if x < 160 { &smooth_red } else { &striped_green };
        m.sample(x as f64 + ox, y as f64 + oy, 0.0, &mut rng)
    });
    let gt = LabelMap::new(320, 240, (0..320 * 240).map(|i| u8::from(i % 320 >= 160)).collect()).unwrap();
    let result = classify_image(&to_working_size(&img), &dict, &SegParams::default(), 1.0).unwrap();
    let report = metrics(&confusion(&result.labels, &gt, 2).unwrap(), &dataset.class_names);
    for acc in &report.class_accuracies {
        assert!(acc.unwrap() >= 95.0, "{report:?}");
    }
}
