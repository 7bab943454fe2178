use std::fs;

use handpose::config::Config;
use handpose::dataset::{
    load_annotations, read_records, save_annotations, write_records, Annotated, Record,
    ANNOTATION_HEADER,
};
use handpose::pipeline::generate_frames;
use handpose_core::hand::{JointLocations, LayerSet};
use nalgebra::Vector3;
use proptest::prelude::*;

#[test]
fn out_of_range_coordinates_warn_but_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.txt");
    let mut joints = vec!["0.5 0.5 1.0"; 21];
    joints[20] = "1.25 0.5 1.0";
    let inside = vec!["0.5 0.5 1.0"; 21].join(" ");
    fs::write(
        &path,
        format!(
            "{ANNOTATION_HEADER}\ntruncated {}\nfine {inside}\n",
            joints.join(" ")
        ),
    )
    .unwrap();
    let loaded = read_records(&path).unwrap();
    assert_eq!(loaded.items.len(), 2);
    assert_eq!(loaded.warnings.len(), 1);
    assert!(loaded.warnings[0].contains("truncated") && loaded.warnings[0].contains(":2:"));
    assert_eq!(loaded.items[0].joints.get(3, 5).unwrap().x, 1.25);
}

#[test]
fn generated_split_roundtrips() {
    let mut cfg = Config::default().with_seed(4);
    cfg.camera.width = 40;
    cfg.camera.height = 32;
    let frames: Vec<Annotated> = generate_frames(&cfg, 10..14).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("split").join("annotations.txt");
    save_annotations(&path, &frames).unwrap();
    let back = load_annotations(&path).unwrap();
    assert_eq!(back.items, frames);
    assert_eq!(back.items[0].frame.camera(), &cfg.camera);
}

fn coordinate() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1.0..2.0f64,
        Just(f64::NAN),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn records_roundtrip_bit_exactly(values in prop::collection::vec(coordinate(), 63)) {
        let points: Vec<Vector3<f64>> =
            values.chunks(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect();
        let valid: Vec<bool> = points.iter().map(|p| p.iter().all(|c| !c.is_nan())).collect();
        let joints = JointLocations::with_validity(LayerSet::ALL, points, valid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.txt");
        let rec = Record { id: "f".into(), joints };
        write_records(&path, std::slice::from_ref(&rec)).unwrap();
        let back = read_records(&path).unwrap().items.remove(0);
        prop_assert_eq!(back.joints.validity(), rec.joints.validity());
        for ((p, q), v) in back.joints.points().iter().zip(rec.joints.points()).zip(rec.joints.validity()) {
            if *v {
                for k in 0..3 {
                    prop_assert_eq!(p[k].to_bits(), q[k].to_bits());
                }
            }
        }
    }
}
