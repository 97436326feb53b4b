//! The twelve scripted scenes of the fixture corpus. Each exercises one
//! pipeline behaviour and lists the tracks the pipeline should emit under
//! the corpus configuration (`corpus_config` in the pipeline crate: crop
//! size 128, interval 50, min length 30, max gap 5).

use crate::spec::*;

pub const WIDTH: usize = 480;
pub const HEIGHT: usize = 360;
pub const FPS: f64 = 10.0;

const GRASS: [u8; 3] = [70, 140, 60];
const SKY: [u8; 3] = [40, 70, 170];
const BROWN: [u8; 3] = [150, 95, 50];
const GREY: [u8; 3] = [200, 200, 205];
const DARK: [u8; 3] = [60, 40, 30];

fn kf(frame: usize, x: f64, y: f64) -> Keyframe {
    Keyframe { frame, x, y, scale: 1.0 }
}

fn ellipse(id: u32, rx: f64, ry: f64, color: [u8; 3], keyframes: Vec<Keyframe>) -> ActorSpec {
    ActorSpec {
        id,
        shape: Shape::Ellipse { rx, ry },
        color,
        depth: 0.5,
        keyframes,
        visible: None,
    }
}

fn scene(name: &str, category: &str, frames: usize, actors: Vec<ActorSpec>, expected: Vec<ExpectedTrack>) -> SceneSpec {
    SceneSpec {
        name: name.to_string(),
        title: format!("{category} video {name}"),
        category: category.to_string(),
        width: WIDTH,
        height: HEIGHT,
        fps: FPS,
        frames,
        seed: crate::mix_str(name),
        background: vec![BackgroundSegment {
            start: 0,
            color: GRASS,
            fade_to: None,
        }],
        grain: 3,
        actors,
        occluders: vec![],
        events: Events::default(),
        semantic_score: 0.4,
        image_check: "yes".into(),
        expected,
    }
}

fn track(clip: usize, actor: u32, start: usize, end: usize) -> ExpectedTrack {
    ExpectedTrack { clip, actor, start, end }
}

pub fn fixture_corpus() -> Vec<SceneSpec> {
    let mut out = Vec::new();

    out.push(scene(
        "clean_ellipse",
        "horse",
        120,
        vec![ellipse(1, 60.0, 40.0, BROWN, vec![kf(0, 150.0, 180.0), kf(119, 330.0, 190.0)])],
        vec![track(0, 1, 0, 120)],
    ));

    let mut s = scene(
        "clean_quadruped",
        "dog",
        100,
        vec![ActorSpec {
            id: 1,
            shape: Shape::Quadruped {
                body_length: 150.0,
                body_height: 72.0,
                leg_length: 42.0,
                leg_width: 32.0,
                gait_period: 20.0,
            },
            color: DARK,
            depth: 0.5,
            keyframes: vec![kf(0, 160.0, 160.0), kf(99, 290.0, 165.0)],
            visible: None,
        }],
        vec![track(0, 1, 0, 100)],
    );
    s.occluders.push(Occluder {
        rect: [300.0, 0.0, 330.0, 360.0],
        depth: 0.9,
        color: GREY,
    });
    out.push(s);

    out.push(scene(
        "two_actors",
        "horse",
        110,
        vec![
            ellipse(1, 55.0, 38.0, BROWN, vec![kf(0, 110.0, 100.0), kf(109, 200.0, 110.0)]),
            ellipse(2, 50.0, 40.0, DARK, vec![kf(0, 370.0, 260.0), kf(109, 280.0, 250.0)]),
        ],
        vec![track(0, 1, 0, 110), track(0, 2, 0, 110)],
    ));

    // Head-on crossing: slow, then 6.4 px/frame each while passing, so the
    // masks overlap with IoU above 0.1 on frames 60..70 only.
    out.push(scene(
        "overlap_crossing",
        "horse",
        130,
        vec![
            ellipse(
                1,
                45.0,
                45.0,
                BROWN,
                vec![kf(0, 60.0, 180.0), kf(50, 147.2, 180.0), kf(80, 339.2, 180.0), kf(129, 420.0, 180.0)],
            ),
            ellipse(
                2,
                45.0,
                45.0,
                DARK,
                vec![kf(0, 420.0, 180.0), kf(50, 332.8, 180.0), kf(80, 140.8, 180.0), kf(129, 60.0, 180.0)],
            ),
        ],
        vec![track(0, 1, 0, 60), track(0, 2, 0, 60)],
    ));

    let mut grow = ellipse(1, 50.0, 35.0, BROWN, vec![kf(0, 240.0, 180.0), kf(80, 250.0, 180.0), kf(119, 260.0, 185.0)]);
    grow.keyframes[0].scale = 0.5;
    grow.keyframes[1].scale = 1.1;
    grow.keyframes[2].scale = 1.1;
    out.push(scene("low_res", "horse", 120, vec![grow], vec![track(0, 1, LOW_RES_START, 120)]));

    out.push(scene(
        "truncated",
        "horse",
        110,
        vec![ellipse(1, 55.0, 38.0, BROWN, vec![kf(0, 20.0, 180.0), kf(100, 260.0, 180.0), kf(109, 270.0, 180.0)])],
        vec![track(0, 1, TRUNCATED_START, 110)],
    ));

    let mut s = scene(
        "id_swap",
        "horse",
        130,
        vec![
            ellipse(1, 55.0, 38.0, BROWN, vec![kf(0, 120.0, 130.0), kf(129, 200.0, 140.0)]),
            ActorSpec {
                visible: Some([40, 130]),
                ..ellipse(2, 50.0, 40.0, DARK, vec![kf(0, 360.0, 260.0), kf(129, 330.0, 250.0)])
            },
        ],
        vec![track(0, 1, 0, 40), track(0, 1, 50, 130)],
    );
    s.events.id_swaps.push(IdSwap { frame: 40, from: 1, to: 2 });
    out.push(s);

    let slow = || vec![ellipse(1, 55.0, 38.0, BROWN, vec![kf(0, 140.0, 180.0), kf(129, 300.0, 180.0)])];
    let mut s = scene("gap_split", "horse", 130, slow(), vec![track(0, 1, 0, 60), track(0, 1, 66, 130)]);
    s.events.track_drops.push(TrackDrop { actor: 1, start: 60, end: 66 });
    out.push(s);

    let mut s = scene("gap_fill", "horse", 130, slow(), vec![track(0, 1, 0, 130)]);
    s.events.track_drops.push(TrackDrop { actor: 1, start: 60, end: 63 });
    out.push(s);

    out.push(scene(
        "short_fragment",
        "horse",
        100,
        vec![
            ellipse(1, 55.0, 38.0, BROWN, vec![kf(0, 120.0, 120.0), kf(99, 200.0, 130.0)]),
            ActorSpec {
                visible: Some([50, 75]),
                ..ellipse(2, 50.0, 40.0, DARK, vec![kf(0, 360.0, 260.0), kf(99, 340.0, 250.0)])
            },
        ],
        vec![track(0, 1, 0, 100)],
    ));

    let mut s = scene(
        "shot_cut",
        "horse",
        110,
        vec![ellipse(1, 55.0, 38.0, BROWN, vec![kf(0, 130.0, 180.0), kf(109, 330.0, 180.0)])],
        vec![track(0, 1, 0, 50), track(1, 1, 50, 110)],
    );
    s.background.push(BackgroundSegment {
        start: 50,
        color: SKY,
        fade_to: None,
    });
    out.push(s);

    let mut s = scene(
        "semantic_reject",
        "horse",
        80,
        vec![ellipse(1, 55.0, 38.0, BROWN, vec![kf(0, 150.0, 180.0), kf(79, 300.0, 180.0)])],
        vec![],
    );
    s.semantic_score = 0.1;
    out.push(s);

    out
}

/// First frame whose box area reaches 128²/4 in `low_res`.
const LOW_RES_START: usize = 35;
/// First frame clear of the 2% border margin in `truncated`.
const TRUNCATED_START: usize = 18;

/// Writes every corpus scene as `<dir>/<name>.json`.
pub fn write_corpus(dir: &std::path::Path) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    fixture_corpus()
        .into_iter()
        .map(|s| {
            let path = dir.join(format!("{}.json", s.name));
            std::fs::write(&path, s.to_json() + "\n")?;
            Ok(path)
        })
        .collect()
}

/// Loads every `*.json` scene in `dir`, sorted by file name.
pub fn load_dir(dir: &std::path::Path) -> std::io::Result<Vec<SceneSpec>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)?;
            SceneSpec::from_json(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", p.display())))
        })
        .collect()
}
