use std::path::Path;
use std::sync::atomic::AtomicBool;

use anyhow::{ensure, Context as _};
use mf_core::Mask;
use mf_pipeline::media;
use mf_pipeline::records::{Provenance, TrackRecord, TrackingReport};
use mf_pipeline::track::*;
use mf_pipeline::Config;
use mf_store::{Kind, Stage, WorkItem};

use crate::common;
use crate::oracle;
use crate::Outcome;

fn rect(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Mask {
    Mask::from_fn(w, h, |x, y| (x0..x1).contains(&x) && (y0..y1).contains(&y))
}

fn track_of(frames: impl IntoIterator<Item = usize>, place: impl Fn(usize) -> Mask) -> Track {
    let mut t = Track::new(0);
    t.detections = frames.into_iter().map(|f| Detection::from_mask(f, place(f)).unwrap()).collect();
    t
}

fn removed_by(t: &Track, pass: Pass) -> Vec<usize> {
    t.log.iter().filter(|e| e.pass == pass).flat_map(|e| e.frames.clone()).collect()
}

/// Runs every filter pass the tracker applies, with default settings.
fn all_passes(mut tracks: Vec<Track>, dims: (usize, usize), cfg: &Config) -> anyhow::Result<(Vec<Track>, Vec<Track>)> {
    filter_overlaps(&mut tracks, cfg.track.overlap_iou)?;
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    for mut t in tracks {
        filter_low_res(&mut t, cfg.crop.size);
        filter_truncated(&mut t, dims, cfg.track.margin_frac);
        cut_inconsistent(&mut t, cfg.track.inconsistency_iou);
        let (k, d) = temporal_postprocess(t, (&cfg.track).into(), |_, _| Ok(None));
        kept.extend(k);
        dropped.extend(d);
    }
    Ok((kept, dropped))
}

fn constructed_failures() -> Outcome {
    let cfg = Config::default();
    ensure!(cfg.crop.size == 512 && cfg.track.max_gap == 5 && cfg.track.min_len == 30);
    let dims = (1920, 1080);
    let place = |x: usize, y: usize, w: usize, h: usize| rect(dims.0, dims.1, x, y, x + w, y + h);

    // overlap: 7×20 boxes offset by 3 px have IoU exactly 0.4 on frames 10..15
    let a = track_of(0..60, |_| place(400, 400, 7 * 40, 20 * 20));
    let b = track_of(0..60, |f| if (10..15).contains(&f) { place(400 + 3 * 40, 400, 7 * 40, 20 * 20) } else { place(1200, 400, 7 * 40, 20 * 20) });
    let overlap = oracle::iou(&a.detections[10].mask, &b.detections[10].mask);
    ensure!((overlap - 0.4).abs() < 1e-12, "constructed overlap {overlap}");
    let (kept, _) = all_passes(vec![a, b], dims, &cfg)?;
    for t in &kept {
        ensure!(removed_by(t, Pass::Overlap) == (10..15).collect::<Vec<_>>(), "overlap removed {:?}", t.log);
        ensure!(t.frames().iter().all(|f| !(10..15).contains(f)));
    }

    // low resolution: 200×300 = 60000 < 512²/4 on frames 0..5
    let t = track_of(0..60, |f| if f < 5 { place(500, 300, 200, 300) } else { place(500, 300, 300, 300) });
    let (kept, _) = all_passes(vec![t], dims, &cfg)?;
    ensure!(kept.len() == 1 && removed_by(&kept[0], Pass::LowRes) == [0, 1, 2, 3, 4], "low-res {:?}", kept);

    // border contact on frames 50..60
    let t = track_of(0..60, |f| if f >= 50 { place(0, 300, 300, 300) } else { place(40, 300, 300, 300) });
    let (kept, _) = all_passes(vec![t], dims, &cfg)?;
    ensure!(removed_by(&kept[0], Pass::Truncated) == (50..60).collect::<Vec<_>>(), "truncation {:?}", kept[0].log);

    // identity swap: the mask jumps to another animal at frame 40
    let t = track_of(0..80, |f| if f < 40 { place(300 + f, 300, 300, 300) } else { place(1300, 600, 300, 300) });
    let (kept, _) = all_passes(vec![t], dims, &cfg)?;
    ensure!(kept.len() == 1 && kept[0].frames() == (0..40).collect::<Vec<_>>(), "id swap kept {:?}", kept[0].span());
    ensure!(removed_by(&kept[0], Pass::Inconsistent).first() == Some(&40));

    // a six-frame gap splits
    let t = track_of((0..40).chain(46..90), |_| place(500, 300, 300, 300));
    let (kept, dropped) = all_passes(vec![t], dims, &cfg)?;
    let spans: Vec<_> = kept.iter().map(|t| t.span().unwrap()).collect();
    ensure!(spans == [0..40, 46..90] && dropped.is_empty(), "gap split {spans:?}");
    ensure!(kept.iter().any(|t| t.log.iter().any(|e| e.pass == Pass::GapSplit)));

    // a 29-frame fragment is discarded
    let t = track_of(0..29, |_| place(500, 300, 300, 300));
    let (kept, dropped) = all_passes(vec![t], dims, &cfg)?;
    ensure!(kept.is_empty() && dropped.len() == 1 && dropped[0].log.iter().any(|e| e.pass == Pass::TooShort));

    // clean track: nothing fires
    let t = track_of(0..120, |f| place(400 + 2 * f, 300, 300, 300));
    let (kept, dropped) = all_passes(vec![t], dims, &cfg)?;
    ensure!(dropped.is_empty() && kept.len() == 1 && kept[0].len() == 120 && kept[0].log.is_empty(), "clean {:?}", kept[0].log);
    Ok(())
}

const SCRIPTED: [&str; 7] = ["clean_ellipse", "overlap_crossing", "low_res", "truncated", "id_swap", "gap_split", "short_fragment"];

fn run_scripted(root: &Path) -> anyhow::Result<mf_pipeline::Context> {
    let scenes = root.join("scenes");
    std::fs::create_dir_all(&scenes)?;
    for name in SCRIPTED {
        std::fs::copy(common::fixtures().join(format!("{name}.json")), scenes.join(format!("{name}.json")))?;
    }
    let mut config = common::corpus_config(root);
    config.backend.scenes_dir = scenes.display().to_string();
    let ctx = mf_cli::app::context(config)?;
    for name in SCRIPTED {
        ctx.store.enqueue(&WorkItem::new(name, Kind::Video, Stage::Collect, "").with_meta("category", "horse"))?;
    }
    let stop = AtomicBool::new(false);
    for stage in [Stage::Collect, Stage::Preprocess, Stage::Track] {
        let report = mf_cli::app::run(&ctx, stage, 1, true, &stop)?;
        ensure!(report.failed == 0, "{stage}: {report:?}");
    }
    Ok(ctx)
}

fn scripted_failures() -> Outcome {
    let dir = tempfile::tempdir()?;
    let ctx = run_scripted(dir.path())?;
    let layout = &ctx.layout;
    let track = |id: &str| -> anyhow::Result<(TrackRecord, Provenance)> {
        let d = layout.track_dir(id);
        Ok((media::read_json(&d.join("track.json"))?, media::read_json(&d.join("provenance.json"))?))
    };
    let report = |clip: &str| -> anyhow::Result<TrackingReport> { Ok(media::read_json(&layout.clip_dir(clip).join("tracking.json"))?) };
    let span = |t: &TrackRecord| t.source_range().unwrap();
    let filter_events = |p: &Provenance| -> Vec<Pass> {
        p.events.iter().map(|e| e.pass).filter(|p| !matches!(p, Pass::Refilled | Pass::Padded)).collect()
    };

    let clean = report("clean_ellipse_c00")?;
    ensure!(clean.kept.len() == 1 && clean.dropped.is_empty(), "clean: {clean:?}");
    let (t, p) = track(&clean.kept[0])?;
    ensure!(span(&t) == (0..120) && filter_events(&p).is_empty(), "clean track {:?} events {:?}", span(&t), p.events);

    for id in ["overlap_crossing_c00_t00", "overlap_crossing_c00_t01"] {
        let (t, p) = track(id).with_context(|| id.to_string())?;
        ensure!(p.frames_removed_by(Pass::Overlap).first() == Some(&60), "{id}: {:?}", p.events);
        ensure!(span(&t) == (0..60), "{id}: span {:?}", span(&t));
    }

    let (t, p) = track("low_res_c00_t00")?;
    ensure!(p.frames_removed_by(Pass::LowRes) == (0..35).collect::<Vec<_>>(), "low_res: {:?}", p.events);
    ensure!(span(&t) == (35..120));

    let (t, p) = track("truncated_c00_t00")?;
    ensure!(p.frames_removed_by(Pass::Truncated) == (0..18).collect::<Vec<_>>(), "truncated: {:?}", p.events);
    ensure!(span(&t) == (18..110));

    let swap = report("id_swap_c00")?;
    let mut spans = Vec::new();
    for id in &swap.kept {
        let (t, p) = track(id)?;
        if span(&t).start == 0 {
            ensure!(span(&t) == (0..40), "id_swap truncated at {:?}", span(&t));
            ensure!(p.frames_removed_by(Pass::Inconsistent).first() == Some(&40), "id_swap: {:?}", p.events);
        }
        spans.push(span(&t));
    }
    spans.sort_by_key(|r| r.start);
    ensure!(spans.first() == Some(&(0..40)), "id_swap spans {spans:?}");

    let split = report("gap_split_c00")?;
    let mut spans = Vec::new();
    let mut split_logged = false;
    for id in &split.kept {
        let (t, p) = track(id)?;
        spans.push(span(&t));
        split_logged |= p.events.iter().any(|e| e.pass == Pass::GapSplit);
    }
    ensure!(split_logged, "gap_split: no split recorded");
    spans.sort_by_key(|r| r.start);
    ensure!(spans == [0..60, 66..130], "gap_split spans {spans:?}");

    let frag = report("short_fragment_c00")?;
    ensure!(frag.kept.len() == 1, "short_fragment kept {:?}", frag.kept);
    ensure!(
        frag.dropped.iter().any(|d| d.events.iter().any(|e| e.pass == Pass::TooShort)),
        "short_fragment dropped {:?}",
        frag.dropped
    );
    Ok(())
}

pub fn filter_triggers() -> Outcome {
    constructed_failures().context("constructed tracks")?;
    scripted_failures().context("scripted scenes")
}
