//! Conv back-propagation against central finite differences, and pooling
//! properties checked on random maps and paired images.

use camtrap::features::{
    extract_region_features, spp_pool, ConvNetParams, FeatureMap, PyramidConfig, Region,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod oracles;

use oracles::random_image;

#[test]
fn conv_backprop_matches_central_differences() {
    oracles::conv_gradients(12, 24).unwrap();
}

#[test]
fn feature_dimension_is_shared_across_regions_and_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let params = ConvNetParams::default_net(0);
    let pyramid = PyramidConfig::default();
    for (w, h) in [(96, 96), (64, 40), (33, 57)] {
        let image = random_image(w, h, &mut rng);
        let regions = [
            Region::full(w, h),
            Region::new(0, 0, 1, 1, w, h).unwrap(),
            Region::new(w / 3, h / 4, w - 1, h, w, h).unwrap(),
        ];
        let rf = extract_region_features(&image, &regions, &params, &pyramid).unwrap();
        assert_eq!(rf.matrix.dim(), (3, 80));
    }
}

/// Region aligned to the 4-pixel cell lattice of the default net.
fn aligned_region(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Region {
    let (cw, ch) = (w / 4, h / 4);
    let x0 = rng.gen_range(1..cw - 3);
    let y0 = rng.gen_range(1..ch - 3);
    let x1 = rng.gen_range(x0 + 2..cw - 1);
    let y1 = rng.gen_range(y0 + 2..ch - 1);
    Region::new(4 * x0, 4 * y0, 4 * x1, 4 * y1, w, h).unwrap()
}

#[test]
fn content_outside_region_margin_does_not_change_its_row() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let params = ConvNetParams::default_net(3);
    let pyramid = PyramidConfig::default();
    // A cell of the stride-4 output reads pixels [4k − 3, 4k + 7), so an
    // aligned region is blind to anything more than 3 pixels outside it.
    let margin = 3;
    for _ in 0..20 {
        let (w, h) = (48, 40);
        let image = random_image(w, h, &mut rng);
        let region = aligned_region(w, h, &mut rng);
        let mut changed = image.clone();
        for y in 0..h {
            for x in 0..w {
                let inside = x + margin >= region.x0
                    && x < region.x1 + margin
                    && y + margin >= region.y0
                    && y < region.y1 + margin;
                if !inside {
                    changed.set_pixel(x, y, [rng.gen(), rng.gen(), rng.gen()]);
                }
            }
        }
        let a = extract_region_features(&image, &[region], &params, &pyramid).unwrap();
        let b = extract_region_features(&changed, &[region], &params, &pyramid).unwrap();
        assert_eq!(a.matrix, b.matrix);
        let full = [Region::full(w, h)];
        let fa = extract_region_features(&image, &full, &params, &pyramid).unwrap();
        let fb = extract_region_features(&changed, &full, &params, &pyramid).unwrap();
        assert_ne!(fa.matrix, fb.matrix);
    }
}

fn map_strategy() -> impl Strategy<Value = FeatureMap> {
    (1usize..6, 1usize..6, 1usize..3).prop_flat_map(|(h, w, c)| {
        prop::collection::vec(0.0..1.0f64, h * w * c).prop_map(move |data| FeatureMap {
            height: h,
            width: w,
            channels: c,
            stride: 1,
            data,
        })
    })
}

proptest! {
    #[test]
    fn spp_pool_is_monotone(map in map_strategy(), idx in any::<prop::sample::Index>(), bump in 0.0..2.0f64, corner in any::<(prop::sample::Index, prop::sample::Index)>()) {
        let (w, h) = (map.width, map.height);
        let x0 = corner.0.index(w);
        let y0 = corner.1.index(h);
        let region = Region::new(x0, y0, w, h, w, h).unwrap();
        let pyramid = PyramidConfig::new(vec![1, 2, 3]).unwrap();
        let before = spp_pool(&map, &region, &pyramid);
        let mut raised = map.clone();
        raised.data[idx.index(map.data.len())] += bump;
        let after = spp_pool(&raised, &region, &pyramid);
        prop_assert_eq!(before.len(), after.len());
        for (a, b) in before.iter().zip(&after) {
            prop_assert!(b >= a);
        }
    }
}
