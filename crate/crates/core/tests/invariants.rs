//! Property tests for the structural invariants: index round trips, count
//! transport, oracle monotonicity, and cover refinement consistency.

use gfdim_core::curve::{gasket_interval_index, gasket_word_key, hilbert_coords, hilbert_index};
use gfdim_core::curve::CurveFamily;
use gfdim_core::dim::{mixed_level_min_cost, single_level_min_cost, count_series};
use gfdim_core::grid::FractalStructure;
use gfdim_core::region::{digitize, preimage_cover, PointCloudOracle, RegionOracle};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hilbert_index_round_trips(d in 2u32..=4, level in 1u32..=7, seed in any::<u64>()) {
        let count = 1u64 << (level * d);
        let index = seed % count;
        let coords = hilbert_coords(index, level, d);
        prop_assert!(coords.iter().all(|&k| k < (1 << level)));
        prop_assert_eq!(hilbert_index(&coords, level, d), index);
    }

    #[test]
    fn gasket_index_round_trips(level in 1u32..=9, seed in any::<u64>()) {
        let count = 3u64.pow(level);
        let index = seed % count;
        let word = gasket_word_key(index, level);
        prop_assert!(word < count);
        prop_assert_eq!(gasket_interval_index(word, level), index);
    }

    #[test]
    fn point_cloud_counts_transport_exactly(
        points in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..40),
        level in 1u32..=6,
    ) {
        let cf = CurveFamily::hilbert(2, 6).unwrap();
        let fs = cf.range();
        let pts: Vec<Vec<f64>> = points.iter().map(|&(x, y)| vec![x, y]).collect();
        let oracle = PointCloudOracle::new(fs, pts, "cloud").unwrap();
        let cover = digitize(&oracle, fs, level).unwrap();
        let pre = preimage_cover(&cf, &cover).unwrap();
        prop_assert_eq!(pre.len(), cover.len());
    }

    #[test]
    fn point_cloud_digitization_is_refinement_monotone(
        points in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
        level in 1u32..=5,
    ) {
        let fs = FractalStructure::cube(2);
        let pts: Vec<Vec<f64>> = points.iter().map(|&(x, y)| vec![x, y]).collect();
        let oracle = PointCloudOracle::new(fs, pts.clone(), "cloud").unwrap();
        let coarse = digitize(&oracle, fs, level).unwrap();
        let fine = digitize(&oracle, fs, level + 1).unwrap();
        // every fine cell's parent is coarse; every coarse cell has a fine child
        for cell in fine.cells() {
            prop_assert!(coarse.contains_key(cell.parent().unwrap().key()));
        }
        for cell in coarse.cells() {
            let kids = cell.children().unwrap();
            prop_assert!(kids.iter().any(|k| fine.contains_key(k.key())));
        }
        // the cloud never digitizes to more cells than points
        prop_assert!(fine.len() <= pts.len() as u64);
    }

    #[test]
    fn dp_is_dominated_by_single_level_costs(
        s in 0.2f64..2.8,
        start in 1u32..=4,
        points in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..12),
    ) {
        let fs = FractalStructure::cube(2);
        let pts: Vec<Vec<f64>> = points.iter().map(|&(x, y)| vec![x, y]).collect();
        let oracle = PointCloudOracle::new(fs, pts, "cloud").unwrap();
        let trunc = 6;
        let series = count_series(&oracle, fs, 1, trunc, 1).unwrap();
        let dp = mixed_level_min_cost(&oracle, fs, s, start, trunc).unwrap();
        let single = single_level_min_cost(&series, s, start).unwrap();
        prop_assert!(dp <= single * (1.0 + 1e-12));
    }
}

#[test]
fn count_identity_over_the_builtin_matrix() {
    // d = 2 through level 8, d = 3 through level 4
    for (dim, max_level) in [(2u32, 8u32), (3, 4)] {
        let cf = CurveFamily::hilbert(dim, max_level).unwrap();
        let fs = cf.range();
        let names = ["full", "point", "sierpinski", "cantor4", "diagonal"];
        for name in names {
            let oracle = gfdim_core::region::builtin_oracle(name, fs, None).unwrap();
            for level in 1..=max_level {
                let cover = digitize(oracle.as_ref(), fs, level).unwrap();
                let pre = preimage_cover(&cf, &cover).unwrap();
                assert_eq!(
                    pre.len(),
                    cover.len(),
                    "{name} on cube{dim} at level {level}"
                );
            }
        }
    }
}

#[test]
fn non_monotone_oracle_is_detected_by_the_dp() {
    struct Liar;
    impl RegionOracle for Liar {
        fn name(&self) -> String {
            "liar".to_string()
        }
        fn intersects(&self, cell: &gfdim_core::Cell) -> bool {
            // claims the root intersects but denies every deeper cell
            cell.level() == 0
        }
    }
    let err = mixed_level_min_cost(&Liar, FractalStructure::cube(2), 1.0, 0, 3).unwrap_err();
    assert!(matches!(
        err,
        gfdim_core::Error::NonMonotoneOracle { .. }
    ));
}
