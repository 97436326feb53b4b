use anyhow::ensure;
use mf_core::metrics::{keypoint_mse, keypoint_transfer_pck, mpjve, pck, silhouette_iou, temporal_roughness, TransferView};
use mf_core::{Keypoint, Keypoints, Mask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle;
use crate::Outcome;

const INSTANCES: usize = 1000;
const TOL: f64 = 1e-9;

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Mask {
    let density = rng.random_range(0.0..1.0);
    Mask::from_fn(w, h, |_, _| rng.random_bool(density))
}

fn random_kps(rng: &mut ChaCha8Rng, k: usize, span: f64) -> Keypoints<f64> {
    Keypoints::new(
        (0..k)
            .map(|_| Keypoint::new(rng.random_range(0.0..span), rng.random_range(0.0..span), rng.random_range(0.0..1.0)))
            .collect(),
    )
}

/// Ground truth plus noise scaled to the normalising distance, so both
/// thresholds see hits and misses.
fn jitter(rng: &mut ChaCha8Rng, gt: &Keypoints<f64>, scale: f64) -> Keypoints<f64> {
    gt.map_points(|x, y| (x + rng.random_range(-scale..scale), y + rng.random_range(-scale..scale)))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn same(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => close(a, b),
        (None, None) => true,
        _ => false,
    }
}

pub fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240917);
    let mut partial_pck = 0;
    for n in 0..INSTANCES {
        let (w, h) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let k = rng.random_range(1..=5);
        let frames = rng.random_range(2..=8);
        let span = w.max(h) as f64;

        let (a, b) = (random_mask(&mut rng, w, h), random_mask(&mut rng, w, h));
        let got: f64 = silhouette_iou(&a, &b)?;
        ensure!(close(got, oracle::iou(&a, &b)), "instance {n}: IoU {got} vs {}", oracle::iou(&a, &b));

        let gt = random_kps(&mut rng, k, span);
        let area = b.area() as f64;
        let pred = jitter(&mut rng, &gt, 0.15 * area.sqrt().max(1.0));
        let hi = pck(&pred, &gt, area, 0.1)?;
        let lo = pck(&pred, &gt, area, 0.05)?;
        ensure!(same(hi, oracle::pck(&pred, &gt, area, 0.1)), "instance {n}: PCK@0.1 {hi:?}");
        ensure!(same(lo, oracle::pck(&pred, &gt, area, 0.05)), "instance {n}: PCK@0.05 {lo:?}");
        if let (Some(hi), Some(lo)) = (hi, lo) {
            ensure!(hi >= lo, "instance {n}: PCK@0.1 {hi} < PCK@0.05 {lo}");
            partial_pck += (hi > 0.0 && hi < 1.0) as usize;
        }

        let verts = rng.random_range(1..=12);
        let src_v: Vec<[f64; 2]> = (0..verts).map(|_| [rng.random_range(0.0..span), rng.random_range(0.0..span)]).collect();
        let tgt_v: Vec<[f64; 2]> = (0..verts).map(|_| [rng.random_range(0.0..span), rng.random_range(0.0..span)]).collect();
        let tgt_gt = random_kps(&mut rng, k, span);
        let tgt_area = rng.random_range(0.0..(w * h) as f64);
        for alpha in [0.1, 0.05] {
            let got = keypoint_transfer_pck(
                TransferView { gt: &gt, vertices: &src_v, mask_area: area },
                TransferView { gt: &tgt_gt, vertices: &tgt_v, mask_area: tgt_area },
                alpha,
            )?;
            let want = oracle::keypoint_transfer((&gt, &src_v), (&tgt_gt, &tgt_v, tgt_area), alpha);
            ensure!(same(got, want), "instance {n}: KT@{alpha} {got:?} vs {want:?}");
        }

        let gt_seq: Vec<_> = (0..frames).map(|_| random_kps(&mut rng, k, span)).collect();
        let pred_seq: Vec<_> = gt_seq.iter().map(|g| jitter(&mut rng, g, 2.0)).collect();
        let norm = rng.random_range(1.0..256.0);
        let got = mpjve(&pred_seq, &gt_seq, norm)?;
        ensure!(close(got, oracle::mpjve(&pred_seq, &gt_seq, norm)), "instance {n}: MPJVE {got}");

        let got = keypoint_mse(&pred, &gt)?;
        ensure!(close(got, oracle::keypoint_sq_error(&pred, &gt)), "instance {n}: keypoint error {got}");

        let traj: Vec<Vec<f64>> = gt_seq.iter().map(|g| g.flat_coords()).collect();
        let got = temporal_roughness(&traj)?;
        ensure!(close(got.value, oracle::roughness(&traj)), "instance {n}: roughness {}", got.value);
        ensure!(got.degenerate == (frames < 3));
    }
    ensure!(partial_pck > INSTANCES / 10, "only {partial_pck} instances with fractional PCK");
    println!("      {INSTANCES} instances, {partial_pck} with fractional PCK@0.1");
    Ok(())
}
