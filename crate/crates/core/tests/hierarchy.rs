use handpose_core::cascade::{
    infer_hierarchical, infer_holistic, train_pipeline, CascadeConfig, LayerRefiner,
};
use handpose_core::hand::{layer_joint_range, HandSkeleton, JointLocations, FINGER_COUNT};
use handpose_core::pso::{LikelihoodConfig, SwarmConfig, SwarmRefiner};
use handpose_core::spatial::min_crop_ratio;
use handpose_core::synth::{generate_dataset, generate_sample, Camera, PoseSampler, Sample};

fn mean_error(a: &JointLocations, b: &JointLocations) -> f64 {
    a.points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| (p - q).norm())
        .sum::<f64>()
        / a.len() as f64
}

fn setup() -> (HandSkeleton, Vec<Sample>, Vec<Sample>, CascadeConfig) {
    let skel = HandSkeleton::default();
    let sampler = PoseSampler::new(&skel, 77);
    let cam = Camera::default();
    let train = generate_dataset(&sampler, &skel, &cam, 300).unwrap();
    let test = (1000..1020)
        .map(|i| generate_sample(&sampler, &skel, &cam, i).unwrap())
        .collect();
    let cfg = CascadeConfig {
        patch_size: 8,
        ..CascadeConfig::default()
    };
    (skel, train, test, cfg)
}

#[test]
fn trained_cascade_beats_holistic_and_hybrid_obeys_the_skeleton() {
    let (skel, train, test, cfg) = setup();
    let trained = train_pipeline(&train, &cfg).unwrap();
    let model = &trained.model;

    let lo = min_crop_ratio(Camera::default().width);
    assert!(model
        .crop_ratios()
        .iter()
        .all(|&(_, _, _, b)| b >= lo && b <= 1.0));

    let (mut hier, mut holi) = (0.0, 0.0);
    for s in &test {
        let state = infer_hierarchical(model, &s.frame, None).unwrap();
        assert!(state.theta_frozen());
        assert!(state.estimates().validity().iter().all(|v| *v));
        hier += mean_error(&state.estimates(), &s.joints);
        holi += mean_error(&infer_holistic(model, &s.frame).unwrap(), &s.joints);
    }
    assert!(hier < holi, "hierarchical {hier} vs holistic {holi}");

    let swarm = SwarmConfig {
        particles: 30,
        ..SwarmConfig::default()
    };
    for (i, s) in test.iter().take(5).enumerate() {
        let mut r = SwarmRefiner::new(
            &s.frame,
            &skel,
            LikelihoodConfig::default(),
            swarm.clone(),
            i as u64,
        )
        .unwrap();
        let est = infer_hierarchical(model, &s.frame, Some(&mut r as &mut dyn LayerRefiner))
            .unwrap()
            .estimates();
        for layer in 1..4 {
            for j in layer_joint_range(layer) {
                let bone = est.get(layer, j).unwrap() - est.get(layer - 1, j).unwrap();
                assert!((bone.norm() - skel.bone_length(layer, j)).abs() < 1e-9);
            }
        }
        assert_eq!(r.history.len(), 4);
        assert_eq!(r.history[1].joints.len(), FINGER_COUNT);
    }
}

#[test]
fn training_is_deterministic() {
    let (_, train, _, cfg) = setup();
    let a = train_pipeline(&train[..80], &cfg).unwrap();
    let b = train_pipeline(&train[..80], &cfg).unwrap();
    assert_eq!(a, b);
}
