use proptest::prelude::*;
use thermotopo::mesh::GeometrySpec;
use thermotopo::{Mesh, Region, RegionMap, RegionRect};

fn ring(l: f64, w: f64) -> GeometrySpec {
    let rect = |x0, y0, x1, y1| RegionRect {
        x0,
        y0,
        x1,
        y1,
        region: Region::FixedSolid,
    };
    GeometrySpec {
        rects: vec![
            rect(0.0, 0.0, l, w),
            rect(0.0, l - w, l, l),
            rect(0.0, 0.0, w, l),
            rect(l - w, 0.0, l, l),
        ],
        ..Default::default()
    }
}

#[test]
fn ring_matches_brute_force_count() {
    let mesh = Mesh::build_grid(32, 32, 8.0, 8.0).unwrap();
    let map = RegionMap::classify(&mesh, &ring(8.0, 0.5)).unwrap();
    let brute = (0..mesh.n_elems())
        .filter(|&e| {
            let [x, y] = mesh.elem_centroid(e);
            x <= 0.5 || x >= 7.5 || y <= 0.5 || y >= 7.5
        })
        .count();
    assert_eq!(map.count(Region::FixedSolid), brute);
    assert_eq!(brute, 32 * 32 - 28 * 28);
    assert_eq!(map.count(Region::Design) + brute, mesh.n_elems());
}

#[test]
fn refinement_changes_area_by_at_most_one_band() {
    for w in [0.3, 0.5, 0.77, 1.1] {
        for n in [8, 16, 32] {
            let coarse = Mesh::build_grid(n, n, 8.0, 8.0).unwrap();
            let fine = Mesh::build_grid(2 * n, 2 * n, 8.0, 8.0).unwrap();
            let area = |m: &Mesh| {
                RegionMap::classify(m, &ring(8.0, w))
                    .unwrap()
                    .count(Region::FixedSolid) as f64
                    * m.elem_area()
            };
            let inner_perimeter = 4.0 * (8.0 - 2.0 * w);
            let band = inner_perimeter * coarse.dx() + 4.0 * coarse.elem_area();
            let diff = (area(&coarse) - area(&fine)).abs();
            assert!(diff <= band, "w={w} n={n}: {diff} > {band}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn labels_partition_and_are_deterministic(
        n in 2usize..24,
        rects in prop::collection::vec((0.0f64..4.0, 0.0f64..4.0, 0.0f64..4.0, 0.0f64..4.0, 0u8..3), 0..5),
    ) {
        let mesh = Mesh::build_grid(n, n, 4.0, 4.0).unwrap();
        let rects: Vec<RegionRect> = rects
            .into_iter()
            .map(|(a, b, c, d, r)| RegionRect {
                x0: a.min(c),
                y0: b.min(d),
                x1: a.max(c),
                y1: b.max(d),
                region: [Region::Design, Region::FixedSolid, Region::FixedFluid][r as usize],
            })
            .collect();
        let g = GeometrySpec { rects, ..Default::default() };
        match RegionMap::classify(&mesh, &g) {
            Ok(map) => {
                let total = map.count(Region::Design) + map.count(Region::FixedSolid)
                    + map.count(Region::FixedFluid);
                prop_assert_eq!(total, mesh.n_elems());
                prop_assert!(map.count(Region::Design) > 0);
                prop_assert_eq!(&map, &RegionMap::classify(&mesh, &g).unwrap());
            }
            Err(_) => {
                let covered = (0..mesh.n_elems()).all(|e| {
                    let c = mesh.elem_centroid(e);
                    g.rects.iter().rev().find(|r| r.contains(c)).is_some_and(|r| r.region != Region::Design)
                });
                prop_assert!(covered);
            }
        }
    }
}
