//! Binary morphology with a square (Chebyshev-disc) structuring element.
//!
//! Both operations are separable for a square element, so each runs as a
//! horizontal pass followed by a vertical pass over prefix counts. Cells
//! outside the image count as background.

use serde::{Deserialize, Serialize};

use crate::mask::Mask;

pub const DEFAULT_RADIUS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphOp {
    Dilate,
    Erode,
}

pub fn morph(mask: &Mask, radius: usize, op: MorphOp) -> Mask {
    let (w, h) = mask.dims();
    if radius == 0 || w == 0 || h == 0 {
        return mask.clone();
    }
    let mut tmp = vec![false; w * h];
    let mut line = Vec::new();
    for y in 0..h {
        line.clear();
        line.extend((0..w).map(|x| mask.get(x, y)));
        let out = pass_1d(&line, radius, op);
        tmp[y * w..(y + 1) * w].copy_from_slice(&out);
    }
    let mut bits = vec![false; w * h];
    for x in 0..w {
        line.clear();
        line.extend((0..h).map(|y| tmp[y * w + x]));
        for (y, v) in pass_1d(&line, radius, op).into_iter().enumerate() {
            bits[y * w + x] = v;
        }
    }
    Mask::from_bits(w, h, bits).expect("dimensions preserved")
}

pub fn dilate(mask: &Mask, radius: usize) -> Mask {
    morph(mask, radius, MorphOp::Dilate)
}

pub fn erode(mask: &Mask, radius: usize) -> Mask {
    morph(mask, radius, MorphOp::Erode)
}

fn pass_1d(line: &[bool], radius: usize, op: MorphOp) -> Vec<bool> {
    let n = line.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for v in line {
        prefix.push(prefix.last().unwrap() + *v as usize);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            let count = prefix[hi + 1] - prefix[lo];
            match op {
                MorphOp::Dilate => count > 0,
                // a window clipped by the border contains background
                MorphOp::Erode => count == 2 * radius + 1,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn neighborhood_oracle(m: &Mask, r: usize, op: MorphOp) -> Mask {
        let r = r as i64;
        Mask::from_fn(m.width(), m.height(), |x, y| {
            let mut any = false;
            let mut all = true;
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = m.get_signed(x as i64 + dx, y as i64 + dy);
                    any |= v;
                    all &= v;
                }
            }
            match op {
                MorphOp::Dilate => any,
                MorphOp::Erode => all,
            }
        })
    }

    #[test]
    fn empty_stays_empty() {
        assert!(dilate(&Mask::empty(6, 6), 2).is_empty());
    }

    #[test]
    fn full_erodes_to_inner_block() {
        let e = erode(&Mask::full(6, 5), 1);
        let expected = Mask::from_fn(6, 5, |x, y| (1..5).contains(&x) && (1..4).contains(&y));
        assert_eq!(e, expected);
        assert_eq!(e, neighborhood_oracle(&Mask::full(6, 5), 1, MorphOp::Erode));
    }

    #[test]
    fn single_cell_dilates_to_block() {
        let mut m = Mask::empty(7, 7);
        m.set(3, 3, true);
        let d = dilate(&m, 1);
        assert_eq!(d.area(), 9);
        assert_eq!(d, Mask::from_fn(7, 7, |x, y| (2..5).contains(&x) && (2..5).contains(&y)));
    }

    #[test]
    fn erode_after_dilate_covers_convex_block() {
        let m = Mask::from_fn(20, 20, |x, y| (5..12).contains(&x) && (6..15).contains(&y));
        for r in 1..4 {
            let closed = erode(&dilate(&m, r), r);
            assert!(m.is_subset_of(&closed).unwrap());
        }
    }

    proptest::proptest! {
        #[test]
        fn matches_neighborhood_oracle(seed in 0u64..5000, w in 1usize..20, h in 1usize..20, r in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = Mask::from_fn(w, h, |_, _| rng.random_bool(0.5));
            proptest::prop_assert_eq!(dilate(&m, r), neighborhood_oracle(&m, r, MorphOp::Dilate));
            proptest::prop_assert_eq!(erode(&m, r), neighborhood_oracle(&m, r, MorphOp::Erode));
        }

        #[test]
        fn dilation_is_monotone(seed in 0u64..5000, r in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let small = Mask::from_fn(16, 16, |_, _| rng.random_bool(0.2));
            let extra = Mask::from_fn(16, 16, |_, _| rng.random_bool(0.2));
            let big = small.union(&extra).unwrap();
            proptest::prop_assert!(dilate(&small, r).is_subset_of(&dilate(&big, r)).unwrap());
            proptest::prop_assert!(erode(&small, r).is_subset_of(&erode(&big, r)).unwrap());
        }
    }
}
