use planecover::io::{read_points_file, write_points, write_sinogram_files};
use planecover::reconstruct::{support_verification, WarpedCover};
use planecover::support::khat;
use planecover::xray::{half_turn_angles, sinogram_plane, uniform_grid};
use planecover::{Bump, CompactSet, Phantom, QuadSettings, VerifyConfig, WarpedMetric};
use proptest::prelude::*;

fn small_config() -> VerifyConfig {
    VerifyConfig {
        hypothesis_offsets: 7,
        hypothesis_angles: 6,
        extra_geodesics: 6,
        reconstruct_planes: 1,
        fbp_offsets: 48,
        fbp_angles: 48,
        image_pixels: 24,
        probe_spacing: 0.25,
        ..VerifyConfig::default()
    }
}

#[test]
fn point_file_round_trip_into_khat() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.csv");
    let pts = vec![vec![0.1, 0.2, 0.0], vec![-0.3, 0.5, 0.2], vec![0.4, -0.1, -0.3]];
    write_points(std::fs::File::create(&path).unwrap(), &pts).unwrap();
    let back = read_points_file(&path).unwrap();
    assert_eq!(back, pts);

    let k = CompactSet::Points { points: back };
    let m = WarpedMetric::euclidean();
    let kh = khat(&k, &m.plane_family(12)).unwrap();
    for p in &pts {
        assert!(kh.contains(p), "{p:?}");
    }
    assert!(!kh.contains(&[2.0, 2.0, 2.0]));
}

#[test]
fn sinogram_files_describe_their_grid() {
    let dir = tempfile::tempdir().unwrap();
    let f = Phantom::new(vec![Bump { center: vec![0.0, 0.3, 0.0], radius: 0.4, amplitude: 1.0 }]).unwrap();
    let plane = WarpedMetric::euclidean().plane(0.0);
    let s = sinogram_plane(&f, &plane, &uniform_grid(-1.0, 1.0, 9), &half_turn_angles(5), &QuadSettings::default()).unwrap();
    write_sinogram_files(dir.path(), "s", &s).unwrap();
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.len() == 5));
    assert_eq!(rows[4][0], s.get(4, 0));
    let header: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("s.json")).unwrap()).unwrap();
    assert!(header.is_object());
}

#[test]
fn hyperbolic_cover_is_consistent() {
    let cover = WarpedCover::new(WarpedMetric::hyperbolic(), 6, 0.02).unwrap();
    let f = Phantom::new(vec![Bump { center: vec![0.3, 0.2, 0.1], radius: 0.4, amplitude: 1.0 }]).unwrap();
    let k = CompactSet::ball(vec![0.3, 0.2, 0.1], 0.5);
    let rep = support_verification(&f, &k, &cover, &small_config()).unwrap();
    assert!(rep.consistent, "{:?} {:?}", rep.hypothesis, rep.planes);
    assert_eq!(rep.occupancy.bound_holds, None);

    let k_small = CompactSet::ball(vec![0.3, 0.2, 0.1], 0.1);
    let rep = support_verification(&f, &k_small, &cover, &small_config()).unwrap();
    assert!(rep.hypothesis_violated);
    assert!(rep.consistent);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn khat_contains_every_point_of_k(
        pts in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 1..6),
    ) {
        let k = CompactSet::Points { points: pts.clone() };
        let kh = khat(&k, &WarpedMetric::euclidean().plane_family(8)).unwrap();
        for p in &pts {
            prop_assert!(kh.contains(p));
        }
    }

    #[test]
    fn khat_grows_with_k(r1 in 0.1f64..0.5, dr in 0.0f64..0.5, probe in proptest::collection::vec(-1.2f64..1.2, 3)) {
        let planes = WarpedMetric::euclidean().plane_family(8);
        let small = khat(&CompactSet::ball(vec![0.0, 0.4, 0.0], r1), &planes).unwrap();
        let large = khat(&CompactSet::ball(vec![0.0, 0.4, 0.0], r1 + dr), &planes).unwrap();
        if small.contains(&probe) {
            prop_assert!(large.contains(&probe));
        }
    }
}
