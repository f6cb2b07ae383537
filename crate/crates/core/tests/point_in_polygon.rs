use earlywarn_core::geo::{locate, Point, PointLocation, Polygon};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Even-odd test with a vertical ray towards +y.
fn oracle(polygons: &[Polygon], p: Point) -> bool {
    let mut inside = false;
    for poly in polygons {
        for ring in std::iter::once(&poly.exterior).chain(&poly.holes) {
            for i in 0..ring.len() {
                let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
                if (a.0 > p.0) != (b.0 > p.0) {
                    let y = a.1 + (p.0 - a.0) * (b.1 - a.1) / (b.0 - a.0);
                    if p.1 < y {
                        inside = !inside;
                    }
                }
            }
        }
    }
    inside
}

/// Star-shaped ring around `c`, one vertex per angular sector. With at least
/// eight sectors no gap reaches a right angle, so every edge stays farther
/// than `r_lo·cos(π/4)` from the centre.
fn star(rng: &mut StdRng, c: Point, r_lo: f64, r_hi: f64) -> Vec<Point> {
    let n = rng.gen_range(8..24);
    let sector = std::f64::consts::TAU / n as f64;
    (0..n)
        .map(|i| {
            let t = sector * (i as f64 + rng.gen_range(0.0..1.0));
            let r = rng.gen_range(r_lo..r_hi);
            (c.0 + r * t.cos(), c.1 + r * t.sin())
        })
        .collect()
}

#[test]
fn thousand_points_per_polygon_agree_with_vertical_ray() {
    let mut rng = StdRng::seed_from_u64(1000);
    let mut boundary = 0;
    for case in 0..200 {
        let c = (rng.gen_range(-10.0..30.0), rng.gen_range(35.0..60.0));
        let mut poly = Polygon::new(star(&mut rng, c, 1.0, 3.0));
        if case % 3 == 0 {
            // Stays inside the outer ring: 0.6 < 1·cos(π/4).
            poly.holes.push(star(&mut rng, c, 0.2, 0.6));
        }
        let polys = vec![poly];
        for _ in 0..1000 {
            let p = (c.0 + rng.gen_range(-3.5..3.5), c.1 + rng.gen_range(-3.5..3.5));
            match locate(&polys, p) {
                PointLocation::Boundary => boundary += 1,
                got => assert_eq!(got == PointLocation::Inside, oracle(&polys, p), "case {case} point {p:?}"),
            }
        }
    }
    assert_eq!(boundary, 0, "random points should not land on edges");
}

proptest! {
    #![proptest_config(proptest::test_runner::Config { failure_persistence: None, ..Default::default() })]

    #[test]
    fn vertices_are_boundary(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ring = star(&mut rng, (5.0, 45.0), 1.0, 3.0);
        let polys = vec![Polygon::new(ring.clone())];
        for v in &ring {
            prop_assert_eq!(locate(&polys, *v), PointLocation::Boundary);
        }
        prop_assert_eq!(locate(&polys, (5.0, 45.0)), PointLocation::Inside);
    }

    #[test]
    fn axis_aligned_edges_are_boundary(x in -20.0f64..20.0, y in 30.0f64..60.0, t in 0.0f64..1.0) {
        let sq = vec![Polygon::new(vec![(x, y), (x + 1.0, y), (x + 1.0, y + 1.0), (x, y + 1.0)])];
        let along = x + t;
        prop_assume!(along >= x && along <= x + 1.0);
        prop_assert_eq!(locate(&sq, (along, y)), PointLocation::Boundary);
        prop_assert_eq!(locate(&sq, (x, y + 0.5)), PointLocation::Boundary);
    }
}
