mod common;

use common::fixtures;
use mf_backend::{Gateway, GatewayConfig};
use mf_core::mask_iou;
use mf_pipeline::config::TrackConfig;
use mf_pipeline::track::{iterative_track, MemoryFrames};
use mf_synth::{corpus, SceneSpec, SyntheticBackend, View};
use std::sync::Arc;

fn scene(name: &str) -> SceneSpec {
    corpus::load_dir(&fixtures()).unwrap().into_iter().find(|s| s.name == name).unwrap()
}

fn setup(spec: SceneSpec) -> (Arc<SyntheticBackend>, Gateway, MemoryFrames) {
    let backend = Arc::new(SyntheticBackend::new([spec.clone()]));
    let gw = Gateway::new(GatewayConfig::default()).route_all(backend.clone());
    let s = backend.scene(&spec.name).unwrap();
    let frames = (0..spec.frames).map(|f| s.render(f, &View::Full)).collect();
    (backend.clone(), gw, MemoryFrames::new(&spec.name, frames))
}

#[test]
fn single_ellipse_is_one_full_track() {
    let (backend, gw, src) = setup(scene("clean_ellipse"));
    let tracks = iterative_track(&src, &gw, "horse", &TrackConfig::default()).unwrap();
    assert_eq!(tracks.len(), 1);
    assert_eq!(tracks[0].len(), 120);
    let s = backend.scene("clean_ellipse").unwrap();
    for d in &tracks[0].detections {
        let iou: f64 = mask_iou(&d.mask, &s.mask(0, d.frame, &View::Full)).unwrap();
        assert!(iou >= 0.95, "frame {} IoU {iou}", d.frame);
    }
}

#[test]
fn identities_persist_across_intervals() {
    let (backend, gw, src) = setup(scene("two_actors"));
    let tracks = iterative_track(&src, &gw, "horse", &TrackConfig::default()).unwrap();
    assert_eq!(tracks.len(), 2);
    let s = backend.scene("two_actors").unwrap();
    for t in &tracks {
        assert_eq!(t.len(), 110);
        // the same actor on both sides of every interval boundary
        let owner = |f: usize| {
            let d = t.detections.iter().find(|d| d.frame == f).unwrap();
            (0..2)
                .max_by(|&a, &b| {
                    let ia: f64 = mask_iou(&d.mask, &s.mask(a, f, &View::Full)).unwrap();
                    let ib: f64 = mask_iou(&d.mask, &s.mask(b, f, &View::Full)).unwrap();
                    ia.total_cmp(&ib)
                })
                .unwrap()
        };
        let first = owner(0);
        for f in [49, 50, 99, 100, 109] {
            assert_eq!(owner(f), first, "frame {f}");
        }
    }
}

#[test]
fn empty_scene_has_no_tracks() {
    let mut spec = scene("clean_ellipse");
    spec.name = "empty".into();
    spec.actors.clear();
    spec.expected.clear();
    let (_, gw, src) = setup(spec);
    assert!(iterative_track(&src, &gw, "horse", &TrackConfig::default()).unwrap().is_empty());
}
